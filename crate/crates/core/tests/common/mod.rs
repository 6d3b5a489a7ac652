#![allow(dead_code)]

use num_complex::Complex64;
use phaseret::Image2D;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_image(w: usize, h: usize, pitch: f64, lo: f64, hi: f64, seed: u64) -> Image2D {
    let mut r = rng(seed);
    let samples = (0..w * h).map(|_| r.random_range(lo..hi)).collect();
    Image2D::new(w, h, pitch, samples).unwrap()
}

pub fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

/// Direct O(N^2 M^2) forward DFT.
pub fn naive_dft(samples: &[f64], w: usize, h: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); w * h];
    for v in 0..h {
        for u in 0..w {
            let mut acc = Complex64::new(0.0, 0.0);
            for y in 0..h {
                for x in 0..w {
                    let phase = -2.0 * PI * ((u * x) as f64 / w as f64 + (v * y) as f64 / h as f64);
                    acc += samples[y * w + x] * Complex64::from_polar(1.0, phase);
                }
            }
            out[v * w + u] = acc;
        }
    }
    out
}

/// Inverse of [`naive_dft`] with a real-valued multiplier applied per bin,
/// `m(signed u, signed v)`.
pub fn naive_filter(
    samples: &[f64],
    w: usize,
    h: usize,
    m: impl Fn(i64, i64) -> f64,
) -> Vec<f64> {
    let spec = naive_dft(samples, w, h);
    let signed = |i: usize, n: usize| if 2 * i < n { i as i64 } else { i as i64 - n as i64 };
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = Complex64::new(0.0, 0.0);
            for v in 0..h {
                for u in 0..w {
                    let phase = 2.0 * PI * ((u * x) as f64 / w as f64 + (v * y) as f64 / h as f64);
                    acc += spec[v * w + u]
                        * m(signed(u, w), signed(v, h))
                        * Complex64::from_polar(1.0, phase);
                }
            }
            out[y * w + x] = acc.re / (w * h) as f64;
        }
    }
    out
}
