mod common;

use common::{naive_filter, random_image, rel_l2};
use phaseret::retrieval::Material;
use phaseret::simulate::{
    add_poisson_noise, disk_thickness, gaussian_blur, projection_approximation, tie_propagate,
    tie_propagate_discrete, Disk, Overlap, PhantomSpec,
};
use phaseret::{Error, Image2D, Variant};
use proptest::prelude::*;
use std::f64::consts::PI;

const W: f64 = 5e-6;

fn disk(cx: f64, cy: f64, r: f64, t: f64) -> Disk {
    Disk {
        center: (cx, cy),
        radius: r,
        thickness: t,
        material: None,
    }
}

fn spec(n: usize, s: usize, overlap: Overlap, shapes: Vec<Disk>) -> PhantomSpec {
    PhantomSpec {
        width: n,
        height: n,
        pixel_size: W,
        supersample: s,
        overlap,
        shapes,
    }
}

#[test]
fn continuous_propagation_matches_direct_dft() {
    let img = random_image(6, 5, W, 0.5, 1.0, 4);
    let c = 3.0 * W * W;
    let oracle = naive_filter(img.samples(), 6, 5, |u, v| {
        let kx = 2.0 * PI * u as f64 / (6.0 * W);
        let ky = 2.0 * PI * v as f64 / (5.0 * W);
        1.0 + c * (kx * kx + ky * ky)
    });
    let got = tie_propagate(&img, c, Variant::Continuous).unwrap();
    assert!(rel_l2(got.samples(), &oracle) < 1e-12);
}

#[test]
fn disk_area_and_interior() {
    let (r, t, s) = (20.3, 2e-3, 8);
    let (cx, cy) = (31.7, 32.2);
    let img = disk_thickness(&spec(64, s, Overlap::Override, vec![disk(cx, cy, r, t)])).unwrap();
    let area_px: f64 = img.samples().iter().sum::<f64>() / t;
    // Sub-sampling misclassifies at most one sub-row per crossed pixel.
    let crossed = (0..64 * 64)
        .filter(|i| {
            let (x, y) = ((i % 64) as f64, (i / 64) as f64);
            ((x - cx).hypot(y - cy) - r).abs() <= std::f64::consts::FRAC_1_SQRT_2
        })
        .count() as f64;
    assert!((area_px - PI * r * r).abs() < crossed / s as f64, "{area_px}");
    assert_eq!(img.get(32, 32), t);
    assert_eq!(img.get(0, 0), 0.0);
    assert!(img.samples().iter().all(|&v| (0.0..=t * (1.0 + 1e-15)).contains(&v)));
}

#[test]
fn overlap_modes() {
    let shapes = vec![disk(16.0, 16.0, 10.0, 1.0), disk(16.0, 16.0, 4.0, 0.5)];
    let over = disk_thickness(&spec(32, 4, Overlap::Override, shapes.clone())).unwrap();
    let add = disk_thickness(&spec(32, 4, Overlap::Add, shapes)).unwrap();
    assert_eq!(over.get(16, 16), 0.5);
    assert_eq!(add.get(16, 16), 1.5);
    assert_eq!(over.get(16, 9), 1.0);
    let bad = spec(32, 4, Overlap::Override, vec![disk(3.0, 16.0, 5.0, 1.0)]);
    assert!(matches!(disk_thickness(&bad), Err(Error::Geometry(_))));
}

#[test]
fn projection_approximation_values() {
    let m = Material::from_attenuation(4e-7, 60.0, 24e3).unwrap();
    let t = Image2D::filled(4, 4, W, 1e-3).unwrap();
    let (i, phi) = projection_approximation(&t, &m, 2.0).unwrap();
    assert!((i.get(0, 0) - 2.0 * (-0.06f64).exp()).abs() < 1e-15);
    let k = 2.0 * PI / m.wavelength();
    assert!((phi.get(1, 1) + k * 4e-7 * 1e-3).abs() < 1e-12);
    let neg = Image2D::filled(4, 4, W, -1e-3).unwrap();
    assert!(projection_approximation(&neg, &m, 1.0).is_err());
}

#[test]
fn poisson_noise_statistics_and_determinism() {
    let img = Image2D::filled(256, 256, W, 0.5).unwrap();
    let counts = 1000.0;
    let a = add_poisson_noise(&img, counts, 7).unwrap();
    let b = add_poisson_noise(&img, counts, 7).unwrap();
    let c = add_poisson_noise(&img, counts, 8).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    let n = img.len() as f64;
    let expected_var = 0.5 / counts;
    assert!((a.mean() - 0.5).abs() < 4.0 * (expected_var / n).sqrt());
    // Relative standard error of a sample variance is about sqrt(2/n).
    assert!((a.variance() / expected_var - 1.0).abs() < 4.0 * (2.0 / n).sqrt());
    assert!(a.samples().iter().all(|v| (v * counts - (v * counts).round()).abs() < 1e-9));
    assert!(add_poisson_noise(&img, 0.0, 1).is_err());
}

#[test]
fn zero_blur_is_identity() {
    let img = random_image(8, 8, W, 0.0, 1.0, 1);
    assert_eq!(gaussian_blur(&img, 0.0).unwrap(), img);
    assert!(gaussian_blur(&img, -1.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn stencil_equals_discrete_multiplier(w in 2usize..40, h in 2usize..40, strength in 0.0f64..50.0, seed in any::<u64>()) {
        let img = random_image(w, h, W, 0.0, 1.0, seed);
        let c = strength * W * W;
        let real = tie_propagate_discrete(&img, c).unwrap();
        let fourier = tie_propagate(&img, c, Variant::Discrete).unwrap();
        let scale = 1.0 + 8.0 * strength;
        for (a, b) in real.samples().iter().zip(fourier.samples()) {
            prop_assert!((a - b).abs() < 1e-12 * scale);
        }
    }

    #[test]
    fn gaussian_blurs_compose_in_quadrature(a in 0.3f64..4.0, b in 0.3f64..4.0, seed in any::<u64>()) {
        let img = random_image(32, 24, W, 0.0, 1.0, seed);
        let twice = gaussian_blur(&gaussian_blur(&img, a).unwrap(), b).unwrap();
        let once = gaussian_blur(&img, a.hypot(b)).unwrap();
        prop_assert!(rel_l2(twice.samples(), once.samples()) < 1e-12);
    }

    #[test]
    fn blur_preserves_mean(fwhm in 0.1f64..10.0, seed in any::<u64>()) {
        let img = random_image(20, 20, W, 0.0, 1.0, seed);
        let out = gaussian_blur(&img, fwhm).unwrap();
        prop_assert!((out.mean() - img.mean()).abs() < 1e-13);
    }

    #[test]
    fn add_of_disjoint_disks_is_sum(r1 in 2.0f64..7.0, r2 in 2.0f64..7.0, s in 1usize..5) {
        let a = disk(9.0, 10.0, r1, 1e-3);
        let b = disk(25.3, 20.6, r2, 2e-3);
        let both = disk_thickness(&spec(36, s, Overlap::Add, vec![a.clone(), b.clone()])).unwrap();
        let one = disk_thickness(&spec(36, s, Overlap::Add, vec![a])).unwrap();
        let two = disk_thickness(&spec(36, s, Overlap::Add, vec![b])).unwrap();
        for ((x, y), z) in one.samples().iter().zip(two.samples()).zip(both.samples()) {
            prop_assert_eq!(x + y, *z);
        }
    }
}
