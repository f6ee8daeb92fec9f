//! Image kernels checked against direct, unoptimized re-implementations.

mod common;

use eyedas_core::imaging::{
    blur_map, dominant_cluster_fraction, edge_map, gaussian_blur, laplacian_response, resize_bilinear, rotate,
    sharpness, sobel_magnitude, ssim, to_grayscale, Image,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{
    blur_map_oracle, laplacian_oracle, max_abs_diff, normalize, random_gray, random_rgb, sobel_oracle, ssim_oracle,
    variance,
};

#[test]
fn ssim_matches_direct_window_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for (w, h) in [(11, 11), (16, 13), (20, 16)] {
        let a = random_gray(&mut rng, w, h);
        let b = Image::from_gray_fn(w, h, |x, y| 0.6 * a.get(x, y, 0) + 0.4 * rng.gen::<f64>());
        let got = ssim(a.as_plane().unwrap(), b.as_plane().unwrap()).unwrap();
        assert!((got - ssim_oracle(&a, &b)).abs() < 1e-12, "{w}x{h}");
    }
}

#[test]
fn ssim_identity_and_symmetry_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..20 {
        let a = random_gray(&mut rng, 16, 16);
        let b = random_gray(&mut rng, 16, 16);
        let (pa, pb) = (a.as_plane().unwrap(), b.as_plane().unwrap());
        assert_eq!(ssim(pa, pa).unwrap(), 1.0);
        let ab = ssim(pa, pb).unwrap();
        let ba = ssim(pb, pa).unwrap();
        assert!((ab - ba).abs() < 1e-12);
        assert!((-1.0..=1.0).contains(&ab));
    }
}

#[test]
fn grayscale_matches_per_pixel_weights() {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let img = random_rgb(&mut rng, 4, 4);
    let g = to_grayscale(&img).unwrap();
    for y in 0..4 {
        for x in 0..4 {
            let expected = 0.299 * img.get(x, y, 0) + 0.587 * img.get(x, y, 1) + 0.114 * img.get(x, y, 2);
            assert!((g.get(x, y, 0) - expected).abs() < 1e-15);
        }
    }
    let red = Image::from_rgb_fn(8, 8, |_, _| [1.0, 0.0, 0.0]);
    assert!(to_grayscale(&red).unwrap().data().iter().all(|&v| v == 0.299));
}

#[test]
fn blur_map_matches_naive_dct() {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    // Left half textured, right half smooth, so blocks differ.
    let img = Image::from_gray_fn(16, 16, |x, y| if x < 8 { rng.gen() } else { 0.3 + 0.02 * y as f64 });
    assert!(max_abs_diff(blur_map(&img).unwrap().data(), &blur_map_oracle(&img)) < 1e-9);
}

#[test]
fn sobel_and_edge_map_match_direct_convolution() {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let img = random_gray(&mut rng, 6, 6);
    let mut expected = sobel_oracle(&img);
    let got = sobel_magnitude(img.as_plane().unwrap()).unwrap();
    for (g, e) in got.iter().zip(&expected) {
        assert!((g - e).abs() < 1e-9);
    }
    normalize(&mut expected);
    for (g, e) in edge_map(&img).unwrap().data().iter().zip(&expected) {
        assert!((g - e).abs() < 1e-9);
    }
}

#[test]
fn laplacian_and_sharpness_match_direct_convolution() {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let img = random_gray(&mut rng, 9, 7);
    let expected = laplacian_oracle(&img);
    let got = laplacian_response(img.as_plane().unwrap()).unwrap();
    assert_eq!(got.len(), expected.len());
    for (g, e) in got.iter().zip(&expected) {
        assert!((g - e).abs() < 1e-9);
    }
    assert!((sharpness(&img).unwrap() - variance(&expected)).abs() < 1e-9);
}

#[test]
fn checkerboard_is_sharper_than_its_blur() {
    let img = Image::from_gray_fn(16, 16, |x, y| ((x + y) % 2) as f64);
    assert!(sharpness(&img).unwrap() > sharpness(&gaussian_blur(&img, 2.0)).unwrap());
}

/// Cheapest 2-partition of weighted colours by within-group squared error.
fn partition_oracle(colours: &[([f64; 3], usize)]) -> f64 {
    let n = colours.len();
    let total: usize = colours.iter().map(|c| c.1).sum();
    let cost = |group: &[&([f64; 3], usize)]| {
        let weight: usize = group.iter().map(|c| c.1).sum();
        let centroid: Vec<f64> = (0..3)
            .map(|ch| group.iter().map(|c| c.0[ch] * c.1 as f64).sum::<f64>() / weight as f64)
            .collect();
        group
            .iter()
            .map(|c| c.1 as f64 * (0..3).map(|ch| (c.0[ch] - centroid[ch]).powi(2)).sum::<f64>())
            .sum::<f64>()
    };
    let mut best = (f64::INFINITY, 0.0);
    for mask in 1..(1u32 << n) - 1 {
        let (a, b): (Vec<_>, Vec<_>) = colours.iter().enumerate().partition(|(i, _)| mask & (1 << i) != 0);
        let a: Vec<_> = a.into_iter().map(|(_, c)| c).collect();
        let b: Vec<_> = b.into_iter().map(|(_, c)| c).collect();
        let c = cost(&a) + cost(&b);
        if c < best.0 {
            let wa: usize = a.iter().map(|c| c.1).sum();
            best = (c, wa.max(total - wa) as f64 / total as f64);
        }
    }
    best.1
}

#[test]
fn three_colour_fraction_matches_partition_oracle() {
    let colours = [([0.0, 0.0, 0.0], 50), ([1.0, 0.0, 0.0], 30), ([1.0, 1.0, 1.0], 20)];
    let img = Image::from_rgb_fn(10, 10, |x, y| {
        let i = y * 10 + x;
        if i < 50 {
            colours[0].0
        } else if i < 80 {
            colours[1].0
        } else {
            colours[2].0
        }
    });
    let expected = partition_oracle(&colours);
    assert_eq!(expected, 0.8);
    assert_eq!(dominant_cluster_fraction(&img, 2).unwrap(), expected);
}

#[test]
fn rotation_preserves_mean_of_smooth_image() {
    let img = Image::from_rgb_fn(32, 32, |x, y| {
        let v = 0.5 + 0.3 * ((x as f64 - 15.5) / 10.0).sin() * ((y as f64 - 15.5) / 12.0).cos();
        [v, v, v]
    });
    let mean = |i: &Image| i.data().iter().sum::<f64>() / i.data().len() as f64;
    let r = rotate(&img, 135.0).unwrap();
    assert!((mean(&r) - mean(&img)).abs() / mean(&img) < 0.02);
}

#[test]
fn resize_to_working_size_keeps_constant_images_constant() {
    let img = Image::from_rgb_fn(40, 30, |_, _| [0.2, 0.4, 0.6]);
    let r = resize_bilinear(&img, 128, 128).unwrap();
    assert_eq!((r.width(), r.height()), (128, 128));
    assert!(r
        .data()
        .chunks(3)
        .all(|p| (p[0] - 0.2).abs() < 1e-12 && (p[2] - 0.6).abs() < 1e-12));
}

#[test]
fn kernels_are_bit_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let img = random_rgb(&mut rng, 24, 24);
    let g = to_grayscale(&img).unwrap();
    assert_eq!(blur_map(&g).unwrap(), blur_map(&g).unwrap());
    assert_eq!(edge_map(&g).unwrap(), edge_map(&g).unwrap());
    assert_eq!(
        dominant_cluster_fraction(&img, 2).unwrap().to_bits(),
        dominant_cluster_fraction(&img, 2).unwrap().to_bits()
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn maps_stay_in_unit_range(seed in any::<u64>(), w in 11usize..24, h in 11usize..24) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let img = random_gray(&mut rng, w, h);
        for map in [blur_map(&img).unwrap(), edge_map(&img).unwrap()] {
            prop_assert!(map.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
        let other = random_gray(&mut rng, w, h);
        let s = ssim(img.as_plane().unwrap(), other.as_plane().unwrap()).unwrap();
        prop_assert!(s.abs() <= 1.0);
    }

    #[test]
    fn sharpness_ignores_constant_offsets(seed in any::<u64>(), offset in 0.0f64..0.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let img = Image::from_gray_fn(12, 12, |_, _| rng.gen::<f64>() * 0.5);
        let shifted = Image::from_gray_fn(12, 12, |x, y| img.get(x, y, 0) + offset);
        let (a, b) = (sharpness(&img).unwrap(), sharpness(&shifted).unwrap());
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn cluster_fraction_is_bounded(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let img = random_rgb(&mut rng, 9, 9);
        let f = dominant_cluster_fraction(&img, 2).unwrap();
        prop_assert!((0.5..=1.0).contains(&f));
    }
}
