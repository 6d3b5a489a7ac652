mod common;

use common::{rel_l2, rng};
use phaseret::ct::{
    analytic_sinogram, attenuation_sinogram, blur_sinogram, fbp, propagate_sinogram,
    rebin_sinogram, retrieve_sinogram, row_transfer, uniform_angles, Circle, CirclePhantom2D,
    DetectorSampling, Sinogram,
};
use phaseret::retrieval::{retrieve, RetrievalConfig};
use phaseret::simulate::gaussian_blur;
use phaseret::{Error, Image2D, Variant};
use proptest::prelude::*;
use rand::Rng;
use std::f64::consts::PI;

const W: f64 = 10e-6;

fn disk(center: (f64, f64), r: f64) -> CirclePhantom2D {
    CirclePhantom2D {
        circles: vec![Circle {
            center,
            radius: r,
            material: "m".into(),
            sign: 1.0,
        }],
        background: None,
    }
}

fn random_sinogram(na: usize, nd: usize, seed: u64) -> Sinogram {
    let mut r = rng(seed);
    let samples = (0..na * nd).map(|_| r.random_range(0.5..1.5)).collect();
    Sinogram::new(uniform_angles(na), nd, W, samples).unwrap()
}

#[test]
fn central_chord_is_the_diameter() {
    // Odd detector count puts a bin exactly on the axis.
    let r = 30.0 * W;
    let sino = &analytic_sinogram(&disk((0.0, 0.0), r), &uniform_angles(8), 101, W, DetectorSampling::Point)
        .unwrap()["m"];
    for a in 0..8 {
        assert!((sino.row(a)[50] - 2.0 * r).abs() < 1e-15);
        assert_eq!(sino.row(a)[0], 0.0);
    }
}

#[test]
fn off_axis_chord_follows_the_sinusoid() {
    let (cx, cy, r) = (12.0 * W, -7.0 * W, 20.0 * W);
    let angles = uniform_angles(6);
    let sino = &analytic_sinogram(&disk((cx, cy), r), &angles, 128, W, DetectorSampling::Point)
        .unwrap()["m"];
    for (a, th) in angles.iter().enumerate() {
        let s0 = cx * th.cos() + cy * th.sin();
        for j in 0..128 {
            let u = (j as f64 - 63.5) * W - s0;
            let expected = 2.0 * (r * r - u * u).max(0.0).sqrt();
            assert!((sino.row(a)[j] - expected).abs() < 1e-15);
        }
    }
}

#[test]
fn fbp_reconstructs_disk_attenuation() {
    let n = 128;
    let r = 40.0 * W;
    let mu = 50.0;
    let thick = &analytic_sinogram(
        &disk((3.0 * W, -2.0 * W), r),
        &uniform_angles(360),
        n,
        W,
        DetectorSampling::BinAverage,
    )
    .unwrap()["m"];
    let img = fbp(&thick.map(|t| mu * t).unwrap()).unwrap();
    let c = (n as f64 - 1.0) / 2.0;
    let (mut inside, mut ni, mut outside, mut no) = (0.0, 0, 0.0f64, 0);
    for iy in 0..n {
        for ix in 0..n {
            let x = (ix as f64 - c) * W - 3.0 * W;
            let y = (iy as f64 - c) * W + 2.0 * W;
            let d = x.hypot(y);
            if d < 0.8 * r {
                inside += img.get(ix, iy);
                ni += 1;
            } else if d > 1.2 * r && (ix as f64 - c).hypot(iy as f64 - c) < 0.45 * n as f64 {
                outside += img.get(ix, iy);
                no += 1;
            }
        }
    }
    let inside = inside / ni as f64;
    let outside = outside / no as f64;
    assert!((inside / mu - 1.0).abs() < 0.01, "{inside}");
    assert!(outside.abs() / mu < 0.01, "{outside}");
}

#[test]
fn row_retrieval_equals_2d_retrieval_of_axially_uniform_image() {
    let nd = 48;
    let sino = random_sinogram(1, nd, 5);
    let row = sino.row(0).to_vec();
    let img = Image2D::from_fn(nd, 16, W, |x, _| row[x]).unwrap();
    for variant in [Variant::Continuous, Variant::Discrete] {
        let cfg = RetrievalConfig::new(1.0, W, 1.0, variant, 4.0 * W * W).unwrap();
        let two_d = retrieve(&img, &cfg).unwrap();
        let one_d = retrieve_sinogram(&sino, &cfg).unwrap();
        for y in 0..16 {
            for x in 0..nd {
                assert!((two_d.get(x, y) - one_d.row(0)[x]).abs() < 1e-13);
            }
        }
    }
}

#[test]
fn row_blur_equals_2d_blur_of_axially_uniform_image() {
    let nd = 40;
    let sino = random_sinogram(1, nd, 9);
    let row = sino.row(0).to_vec();
    let img = Image2D::from_fn(nd, 8, W, |x, _| row[x]).unwrap();
    let a = gaussian_blur(&img, 2.5).unwrap();
    let b = blur_sinogram(&sino, 2.5).unwrap();
    for x in 0..nd {
        assert!((a.get(x, 3) - b.row(0)[x]).abs() < 1e-13);
    }
}

#[test]
fn row_transfer_is_the_lorentzian() {
    let c = 2.0 * W * W;
    let t = row_transfer(8, W, c, Variant::Discrete);
    assert_eq!(t[0], 1.0);
    // Nyquist bin: ksq = 4 / W^2.
    assert!((t[4] - 1.0 / 9.0).abs() < 1e-15);
    let t = row_transfer(8, W, c, Variant::Continuous);
    assert!((t[4] - 1.0 / (1.0 + 2.0 * PI * PI)).abs() < 1e-15);
}

#[test]
fn attenuation_requires_positive_intensity() {
    let sino = Sinogram::new(uniform_angles(2), 2, W, vec![1.0, 0.5, 0.0, 1.0]).unwrap();
    assert!(matches!(attenuation_sinogram(&sino, 1.0), Err(Error::Domain(_))));
    let ok = sino.map(|v| v + 1.0).unwrap();
    let att = attenuation_sinogram(&ok, 2.0).unwrap();
    assert!((att.row(0)[1] + (0.75f64).ln()).abs() < 1e-15);
}

#[test]
fn rebin_sinogram_keeps_angles_and_scales_pitch() {
    let sino = random_sinogram(3, 12, 2);
    let r = rebin_sinogram(&sino, 4).unwrap();
    assert_eq!(r.n_detectors(), 3);
    assert_eq!(r.angles(), sino.angles());
    assert_eq!(r.pixel_size(), 4.0 * W);
    let expected = sino.row(2)[4..8].iter().sum::<f64>() / 4.0;
    assert!((r.row(2)[1] - expected).abs() < 1e-15);
    assert!(matches!(rebin_sinogram(&sino, 5), Err(Error::Dimension(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fbp_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, seed in any::<u64>()) {
        let s1 = random_sinogram(12, 24, seed);
        let s2 = random_sinogram(12, 24, seed ^ 0x5555);
        let mix: Vec<f64> = s1.samples().iter().zip(s2.samples()).map(|(x, y)| a * x + b * y).collect();
        let lhs = fbp(&s1.with_samples(mix).unwrap()).unwrap();
        let (f1, f2) = (fbp(&s1).unwrap(), fbp(&s2).unwrap());
        let scale = f1.samples().iter().chain(f2.samples()).fold(0.0f64, |m, v| m.max(v.abs()));
        for ((l, x), y) in lhs.samples().iter().zip(f1.samples()).zip(f2.samples()) {
            prop_assert!((l - (a * x + b * y)).abs() < 1e-11 * scale * (a.abs() + b.abs() + 1.0));
        }
    }

    #[test]
    fn propagate_then_retrieve_is_identity(strength in 0.0f64..40.0, discrete in any::<bool>(), seed in any::<u64>()) {
        let variant = if discrete { Variant::Discrete } else { Variant::Continuous };
        let sino = random_sinogram(5, 33, seed);
        let c = strength * W * W;
        let cfg = RetrievalConfig::new(1.0, W, 1.0, variant, c).unwrap();
        let back = retrieve_sinogram(&propagate_sinogram(&sino, c, variant).unwrap(), &cfg).unwrap();
        prop_assert!(rel_l2(back.samples(), sino.samples()) < 1e-12);
    }

    #[test]
    fn bin_average_integrates_the_projected_area(r_px in 3.0f64..30.0, cx in -10.0f64..10.0) {
        let sino = &analytic_sinogram(&disk((cx * W, 0.0), r_px * W), &uniform_angles(3), 96, W, DetectorSampling::BinAverage).unwrap()["m"];
        let area = PI * (r_px * W).powi(2);
        for a in 0..3 {
            let sum: f64 = sino.row(a).iter().sum::<f64>() * W;
            prop_assert!((sum / area - 1.0).abs() < 1e-12);
        }
    }
}

