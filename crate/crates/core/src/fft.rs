//! Two-dimensional FFT plumbing shared by the grid, filter and simulation code.
//!
//! Layout is row-major with the DC term at index (0, 0). Forward transforms are
//! unnormalised; inverse transforms carry the `1/(width*height)` factor.
//! Real images are filtered through a half spectrum (`width/2 + 1` columns)
//! which halves memory on the large supersampled grids.

use num_complex::Complex64;
use rayon::prelude::*;
use realfft::RealFftPlanner;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Columns processed per gather/scatter tile in the strided column pass.
const COLUMN_TILE: usize = 16;

/// Half spectrum of a real `width x height` raster.
pub(crate) struct HalfSpectrum {
    pub width: usize,
    pub height: usize,
    pub cols: usize,
    pub data: Vec<Complex64>,
}

impl HalfSpectrum {
    /// Visits every stored coefficient with its (column, row) frequency index.
    pub fn for_each_mut(&mut self, mut f: impl FnMut(usize, usize, &mut Complex64)) {
        let cols = self.cols;
        for (iy, row) in self.data.chunks_mut(cols).enumerate() {
            for (ix, v) in row.iter_mut().enumerate() {
                f(ix, iy, v);
            }
        }
    }
}

fn column_pass(data: &mut [Complex64], cols: usize, rows: usize, fft: &Arc<dyn Fft<f64>>) {
    let mut tile = vec![Complex64::new(0.0, 0.0); rows * COLUMN_TILE];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut c0 = 0;
    while c0 < cols {
        let nc = COLUMN_TILE.min(cols - c0);
        for r in 0..rows {
            let src = &data[r * cols + c0..r * cols + c0 + nc];
            for (c, v) in src.iter().enumerate() {
                tile[c * rows + r] = *v;
            }
        }
        for c in 0..nc {
            fft.process_with_scratch(&mut tile[c * rows..(c + 1) * rows], &mut scratch);
        }
        for r in 0..rows {
            let dst = &mut data[r * cols + c0..r * cols + c0 + nc];
            for (c, v) in dst.iter_mut().enumerate() {
                *v = tile[c * rows + r];
            }
        }
        c0 += nc;
    }
}

fn row_pass(data: &mut [Complex64], cols: usize, fft: &Arc<dyn Fft<f64>>) {
    data.par_chunks_mut(cols).for_each_init(
        || vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()],
        |scratch, row| fft.process_with_scratch(row, scratch),
    );
}

/// In-place full complex 2-D transform. The inverse includes `1/(w*h)`.
pub(crate) fn fft2_complex(data: &mut [Complex64], width: usize, height: usize, inverse: bool) {
    debug_assert_eq!(data.len(), width * height);
    let mut planner = FftPlanner::<f64>::new();
    let (row_fft, col_fft) = if inverse {
        (
            planner.plan_fft_inverse(width),
            planner.plan_fft_inverse(height),
        )
    } else {
        (
            planner.plan_fft_forward(width),
            planner.plan_fft_forward(height),
        )
    };
    row_pass(data, width, &row_fft);
    column_pass(data, width, height, &col_fft);
    if inverse {
        let scale = 1.0 / (width * height) as f64;
        data.iter_mut().for_each(|v| *v *= scale);
    }
}

/// Forward real-to-complex 2-D transform.
pub(crate) fn rfft2(samples: &[f64], width: usize, height: usize) -> HalfSpectrum {
    debug_assert_eq!(samples.len(), width * height);
    let cols = width / 2 + 1;
    let mut real_planner = RealFftPlanner::<f64>::new();
    let r2c = real_planner.plan_fft_forward(width);
    let mut data = vec![Complex64::new(0.0, 0.0); cols * height];
    data.par_chunks_mut(cols)
        .zip(samples.par_chunks(width))
        .for_each_init(
            || (r2c.make_input_vec(), r2c.make_scratch_vec()),
            |(input, scratch), (out, row)| {
                input.copy_from_slice(row);
                r2c.process_with_scratch(input, out, scratch)
                    .expect("row buffers sized by the planner");
            },
        );
    let col_fft = FftPlanner::<f64>::new().plan_fft_forward(height);
    column_pass(&mut data, cols, height, &col_fft);
    HalfSpectrum {
        width,
        height,
        cols,
        data,
    }
}

/// Inverse of [`rfft2`], normalised so that `irfft2(rfft2(x)) == x`.
pub(crate) fn irfft2(mut spec: HalfSpectrum) -> Vec<f64> {
    let (width, height, cols) = (spec.width, spec.height, spec.cols);
    let col_fft = FftPlanner::<f64>::new().plan_fft_inverse(height);
    column_pass(&mut spec.data, cols, height, &col_fft);
    let mut real_planner = RealFftPlanner::<f64>::new();
    let c2r = real_planner.plan_fft_inverse(width);
    let scale = 1.0 / (width * height) as f64;
    let mut out = vec![0.0; width * height];
    out.par_chunks_mut(width)
        .zip(spec.data.par_chunks_mut(cols))
        .for_each_init(
            || c2r.make_scratch_vec(),
            |scratch, (row, input)| {
                // Hermitian rows must have real DC (and Nyquist) bins.
                input[0].im = 0.0;
                if width % 2 == 0 {
                    input[cols - 1].im = 0.0;
                }
                c2r.process_with_scratch(input, row, scratch)
                    .expect("row buffers sized by the planner");
                row.iter_mut().for_each(|v| *v *= scale);
            },
        );
    out
}

/// Multiplies the spectrum of a real raster by a real, even multiplier
/// `m(ix, iy)` evaluated on the half-spectrum index set.
pub(crate) fn filter_real(
    samples: &[f64],
    width: usize,
    height: usize,
    multiplier: impl Fn(usize, usize) -> f64,
) -> Vec<f64> {
    let mut spec = rfft2(samples, width, height);
    spec.for_each_mut(|ix, iy, v| *v *= multiplier(ix, iy));
    irfft2(spec)
}

/// Independent forward transforms of each `width`-long row; output holds
/// `width/2 + 1` bins per row.
pub(crate) fn rfft_rows(samples: &[f64], width: usize) -> Vec<Complex64> {
    let cols = width / 2 + 1;
    let r2c = RealFftPlanner::<f64>::new().plan_fft_forward(width);
    let mut out = vec![Complex64::new(0.0, 0.0); samples.len() / width * cols];
    out.par_chunks_mut(cols)
        .zip(samples.par_chunks(width))
        .for_each_init(
            || (r2c.make_input_vec(), r2c.make_scratch_vec()),
            |(input, scratch), (spec, row)| {
                input.copy_from_slice(row);
                r2c.process_with_scratch(input, spec, scratch)
                    .expect("row buffers sized by the planner");
            },
        );
    out
}

/// Inverse of [`rfft_rows`], normalised.
pub(crate) fn irfft_rows(mut spectra: Vec<Complex64>, width: usize) -> Vec<f64> {
    let cols = width / 2 + 1;
    let c2r = RealFftPlanner::<f64>::new().plan_fft_inverse(width);
    let scale = 1.0 / width as f64;
    let mut out = vec![0.0; spectra.len() / cols * width];
    out.par_chunks_mut(width)
        .zip(spectra.par_chunks_mut(cols))
        .for_each_init(
            || c2r.make_scratch_vec(),
            |scratch, (row, spec)| {
                spec[0].im = 0.0;
                if width % 2 == 0 {
                    spec[cols - 1].im = 0.0;
                }
                c2r.process_with_scratch(spec, row, scratch)
                    .expect("row buffers sized by the planner");
                row.iter_mut().for_each(|v| *v *= scale);
            },
        );
    out
}

/// Applies a real multiplier (indexed by half-spectrum bin) to every row of
/// a row-major `rows x width` buffer independently.
pub(crate) fn filter_rows(samples: &mut [f64], width: usize, multiplier: &[f64]) {
    let cols = width / 2 + 1;
    debug_assert_eq!(multiplier.len(), cols);
    let mut planner = RealFftPlanner::<f64>::new();
    let r2c = planner.plan_fft_forward(width);
    let c2r = planner.plan_fft_inverse(width);
    let scale = 1.0 / width as f64;
    samples.par_chunks_mut(width).for_each_init(
        || {
            (
                r2c.make_output_vec(),
                r2c.make_scratch_vec(),
                c2r.make_scratch_vec(),
            )
        },
        |(spec, fs, is), row| {
            r2c.process_with_scratch(row, spec, fs)
                .expect("row buffers sized by the planner");
            for (v, m) in spec.iter_mut().zip(multiplier) {
                *v *= *m;
            }
            spec[0].im = 0.0;
            if width % 2 == 0 {
                spec[cols - 1].im = 0.0;
            }
            c2r.process_with_scratch(spec, row, is)
                .expect("row buffers sized by the planner");
            row.iter_mut().for_each(|v| *v *= scale);
        },
    );
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft2(x: &[f64], w: usize, h: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); w * h];
        for ky in 0..h {
            for kx in 0..w {
                let mut acc = Complex64::new(0.0, 0.0);
                for y in 0..h {
                    for xx in 0..w {
                        let ph = -2.0
                            * std::f64::consts::PI
                            * ((kx * xx) as f64 / w as f64 + (ky * y) as f64 / h as f64);
                        acc += x[y * w + xx] * Complex64::from_polar(1.0, ph);
                    }
                }
                out[ky * w + kx] = acc;
            }
        }
        out
    }

    #[test]
    fn half_spectrum_matches_naive_dft() {
        let (w, h) = (6, 5);
        let x: Vec<f64> = (0..w * h).map(|i| ((i * 7 % 11) as f64).sin()).collect();
        let naive = naive_dft2(&x, w, h);
        let half = rfft2(&x, w, h);
        for iy in 0..h {
            for ix in 0..half.cols {
                let d = half.data[iy * half.cols + ix] - naive[iy * w + ix];
                assert!(d.norm() < 1e-10, "({ix},{iy}) {d}");
            }
        }
        let back = irfft2(half);
        for (a, b) in back.iter().zip(&x) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn complex_transform_matches_naive_dft() {
        let (w, h) = (5, 4);
        let x: Vec<f64> = (0..w * h).map(|i| (i as f64 * 0.37).cos()).collect();
        let naive = naive_dft2(&x, w, h);
        let mut data: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft2_complex(&mut data, w, h, false);
        for (a, b) in data.iter().zip(&naive) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn row_filter_with_unit_multiplier_is_identity() {
        let w = 10;
        let mut rows: Vec<f64> = (0..3 * w).map(|i| (i as f64).sqrt()).collect();
        let orig = rows.clone();
        filter_rows(&mut rows, w, &vec![1.0; w / 2 + 1]);
        for (a, b) in rows.iter().zip(&orig) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
