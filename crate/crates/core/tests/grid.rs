mod common;

use common::{naive_dft, random_image, rel_l2};
use phaseret::grid::{block_downsample, dft2, frequency_grid, idft2, rebin};
use phaseret::{Error, Image2D, Variant};
use proptest::prelude::*;
use std::f64::consts::PI;

const W: f64 = 10e-6;

#[test]
fn dft_matches_direct_summation() {
    let img = random_image(6, 5, W, -1.0, 1.0, 3);
    let fast = dft2(&img);
    let slow = naive_dft(img.samples(), 6, 5);
    for (a, b) in fast.values.iter().zip(&slow) {
        assert!((a - b).norm() < 1e-12, "{a} vs {b}");
    }
}

#[test]
fn constant_image_is_dc_only() {
    let img = Image2D::filled(8, 8, W, 2.5).unwrap();
    let s = dft2(&img);
    assert!((s.get(0, 0).re - 2.5 * 64.0).abs() < 1e-12);
    assert!(s.values[1..].iter().all(|c| c.norm() < 1e-12));
}

#[test]
fn unit_impulse_has_flat_spectrum() {
    let img = Image2D::from_fn(8, 8, W, |x, y| f64::from(x == 0 && y == 0)).unwrap();
    assert!(dft2(&img).values.iter().all(|c| (c.re - 1.0).abs() < 1e-15 && c.im.abs() < 1e-15));
}

#[test]
fn round_trip_8x8() {
    let img = random_image(8, 8, W, -1.0, 1.0, 11);
    let back = idft2(&dft2(&img)).unwrap();
    assert!(rel_l2(back.samples(), img.samples()) < 1e-10);
    assert_eq!(back.pixel_size(), W);
}

#[test]
fn frequency_grid_reference_points() {
    let n = 16;
    let c = frequency_grid(n, n, W, Variant::Continuous).unwrap();
    let d = frequency_grid(n, n, W, Variant::Discrete).unwrap();
    assert_eq!(c.ksq(0, 0), 0.0);
    assert_eq!(d.ksq(0, 0), 0.0);
    // Bin n/2 is W k_x = -pi; the squared terms do not see the sign.
    let nyq = n / 2;
    assert!((c.ksq(nyq, 0) * W * W - PI * PI).abs() < 1e-12);
    assert!((d.ksq(nyq, 0) * W * W - 4.0).abs() < 1e-12);
    assert!((d.ksq(nyq, nyq) * W * W - 8.0).abs() < 1e-12);
}

#[test]
fn small_k_agreement_scalar_oracle() {
    // Continuous W^2 k^2 = t^2, discrete 2 - 2 cos t; Taylor remainder t^2/12.
    for t in [0.01_f64, 0.05, 0.1] {
        let kc = t * t;
        let kd = 2.0 - 2.0 * t.cos();
        let rel = (kd - kc).abs() / kc;
        assert!(rel < 1e-3, "t = {t}: {rel}");
        assert!((rel - t * t / 12.0).abs() < t.powi(4) / 300.0);
    }
    // The same through the library grid: a 20 pi-periodic axis puts W k_x = 0.1 on bin 1.
    let n = (2.0 * PI / 0.1).round() as usize;
    let c = frequency_grid(n, 2, W, Variant::Continuous).unwrap();
    let d = c.with_variant(Variant::Discrete);
    let rel = (d.ksq(1, 0) - c.ksq(1, 0)).abs() / c.ksq(1, 0);
    assert!(rel < 1e-3);
}

#[test]
fn rejects_degenerate_grids() {
    assert!(matches!(frequency_grid(1, 4, W, Variant::Continuous), Err(Error::Dimension(_))));
    assert!(frequency_grid(4, 4, 0.0, Variant::Discrete).is_err());
}

#[test]
fn rebin_examples() {
    let img = Image2D::new(2, 2, W, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    let r = rebin(&img, 2).unwrap();
    assert_eq!(r.samples(), &[2.5]);
    assert_eq!(r.pixel_size(), 2.0 * W);
    let c = Image2D::filled(12, 6, W, 0.75).unwrap();
    for n in [1, 2, 3, 6] {
        let r = rebin(&c, n).unwrap();
        assert!(r.samples().iter().all(|&v| v == 0.75));
        assert_eq!(r.pixel_size(), n as f64 * W);
    }
    assert_eq!(rebin(&img, 1).unwrap(), img);
    assert!(matches!(rebin(&c, 4), Err(Error::Dimension(_))));
    assert_eq!(block_downsample(&img, 2).unwrap(), r_for(&img));
}

fn r_for(img: &Image2D) -> Image2D {
    rebin(img, 2).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parseval(w in 2usize..24, h in 2usize..24, seed in any::<u64>()) {
        let img = random_image(w, h, W, -3.0, 3.0, seed);
        let energy: f64 = img.samples().iter().map(|v| v * v).sum();
        let spec: f64 = dft2(&img).values.iter().map(|c| c.norm_sqr()).sum::<f64>() / (w * h) as f64;
        prop_assert!((energy - spec).abs() <= 1e-9 * energy);
    }

    #[test]
    fn discrete_below_continuous_and_bound(w in 2usize..40, h in 2usize..40, pitch in 1e-7f64..1e-3) {
        let c = frequency_grid(w, h, pitch, Variant::Continuous).unwrap();
        let d = c.with_variant(Variant::Discrete);
        for iy in 0..h {
            for ix in 0..w {
                let (kc, kd) = (c.ksq(ix, iy), d.ksq(ix, iy));
                prop_assert!(kd >= 0.0 && kd <= kc * (1.0 + 1e-12));
                prop_assert!(kd <= 8.0 / (pitch * pitch) * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn grid_symmetric_under_negation(w in 2usize..33, h in 2usize..33) {
        for variant in [Variant::Continuous, Variant::Discrete] {
            let g = frequency_grid(w, h, W, variant).unwrap();
            for iy in 0..h {
                for ix in 0..w {
                    let (mx, my) = ((w - ix) % w, (h - iy) % h);
                    prop_assert_eq!(g.ksq(ix, iy), g.ksq(mx, my));
                }
            }
        }
    }

    #[test]
    fn rebin_composes_exactly_for_dyadic_factors(
        ea in 0u32..3, eb in 0u32..3, kx in 1usize..4, ky in 1usize..4, seed in any::<u64>()
    ) {
        // Power-of-two factors and 8-bit dyadic samples keep every sum and
        // division exact.
        let (a, b) = (1usize << ea, 1usize << eb);
        let (w, h) = (a * b * kx, a * b * ky);
        let base = random_image(w, h, W, 0.0, 1.0, seed);
        let img = base.map(|v| (v * 256.0).round() / 256.0).unwrap();
        let two_step = rebin(&rebin(&img, a).unwrap(), b).unwrap();
        let one_step = rebin(&img, a * b).unwrap();
        prop_assert_eq!(two_step.samples(), one_step.samples());
        prop_assert_eq!(two_step.pixel_size(), one_step.pixel_size());
    }

    #[test]
    fn rebin_composes_to_rounding(a in 1usize..5, b in 1usize..5, seed in any::<u64>()) {
        let img = random_image(a * b * 2, a * b * 3, W, -1.0, 1.0, seed);
        let two_step = rebin(&rebin(&img, a).unwrap(), b).unwrap();
        let one_step = rebin(&img, a * b).unwrap();
        for (x, y) in two_step.samples().iter().zip(one_step.samples()) {
            prop_assert!((x - y).abs() <= 1e-14);
        }
    }

    #[test]
    fn rebin_preserves_mean(n in 1usize..5, kx in 1usize..6, ky in 1usize..6, seed in any::<u64>()) {
        let img = random_image(n * kx, n * ky, W, -1.0, 1.0, seed);
        let r = rebin(&img, n).unwrap();
        prop_assert!((r.mean() - img.mean()).abs() < 1e-14);
    }
}
