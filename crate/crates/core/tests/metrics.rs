mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vipatch::image::Image;
use vipatch::metrics::{self, ClassMap, PointAnnotations};

const TOL: f64 = 1e-9;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn game_matches_oracle(seed: u64, w in 1usize..=32, h in 1usize..=32, n in 0usize..25) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let density = Image::from_fn(w, h, 1, |_, _, _| rng.gen::<f64>() * 0.3);
        let points = common::random_points(&mut rng, w, h, n);
        for k in 0..=3 {
            let got = metrics::game(&density, &points, k).unwrap();
            prop_assert!(close(got, common::game(&density, &points, k)), "k={k}");
        }
    }

    #[test]
    fn game_is_monotone_in_level(seed: u64, w in 1usize..=64, h in 1usize..=64, n in 0usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Dyadic densities keep every cell sum exact.
        let density = Image::from_fn(w, h, 1, |_, _, _| rng.gen_range(0..=32) as f64 / 256.0);
        let points = common::random_points(&mut rng, w, h, n);
        let g: Vec<f64> = (0..=3).map(|k| metrics::game(&density, &points, k).unwrap()).collect();
        prop_assert!(g[0] <= g[1] && g[1] <= g[2] && g[2] <= g[3], "{g:?}");
    }

    #[test]
    fn rmse_matches_oracle(pairs in prop::collection::vec((0.0f64..100.0, 0.0f64..100.0), 1..40)) {
        let (p, t): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        prop_assert!(close(metrics::rmse(&p, &t).unwrap(), common::rmse(&p, &t)));
    }

    #[test]
    fn segmentation_matches_oracle(seed: u64, w in 1usize..=32, h in 1usize..=32, classes in 1u8..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = common::random_labels(&mut rng, w, h, classes);
        let b = common::random_labels(&mut rng, w, h, classes);
        let n = classes as usize;
        prop_assert!(close(metrics::miou(&a, &b, n).unwrap(), common::miou(&a, &b, n)));
        prop_assert!(close(metrics::recall(&a, &b, n).unwrap(), common::recall(&a, &b, n)));
        prop_assert_eq!(metrics::miou(&a, &a, n).unwrap(), 1.0);
    }

    #[test]
    fn similarity_matches_oracle(seed: u64, w in 1usize..=32, h in 1usize..=32, rgb: bool) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = if rgb { 3 } else { 1 };
        let a = common::random_image(&mut rng, w, h, c);
        let b = common::random_image(&mut rng, w, h, c);
        prop_assert!(close(metrics::psnr(&a, &b).unwrap(), common::psnr(&a, &b)));
        prop_assert!(close(metrics::ssim(&a, &b).unwrap(), common::ssim(&a, &b)));
        prop_assert_eq!(metrics::psnr(&a, &a).unwrap(), metrics::PSNR_CAP);
    }

    #[test]
    fn fusion_kernels_match_oracle(seed: u64, w in 1usize..=32, h in 1usize..=32) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vis = common::random_image(&mut rng, w, h, 3);
        let inf = common::random_image(&mut rng, w, h, 1);
        let fused = common::random_image(&mut rng, w, h, 1);
        prop_assert!(close(metrics::cc(&vis, &inf, &fused).unwrap(), common::cc(&vis, &inf, &fused)));
        let (li, lg) = metrics::fusion_losses(&vis, &inf, &fused).unwrap();
        let (oi, og) = common::fusion_losses(&vis, &inf, &fused);
        prop_assert!(close(li, oi) && close(lg, og));
    }
}

#[test]
fn fused_max_with_matching_gradients_has_zero_losses() {
    let vis = Image::from_fn(12, 9, 3, |x, _, _| x as f64 / 11.0);
    let inf = Image::filled(12, 9, 1, 0.0);
    let fused = vis.to_grayscale();
    let (li, lg) = metrics::fusion_losses(&vis, &inf, &fused).unwrap();
    assert_eq!(li, 0.0);
    assert!(lg.abs() < 1e-12);
}

#[test]
fn miou_of_disjoint_maps_is_zero() {
    let a = ClassMap::new(2, 2, vec![0, 0, 1, 1]).unwrap();
    let b = ClassMap::new(2, 2, vec![1, 1, 0, 0]).unwrap();
    assert_eq!(metrics::miou(&a, &b, 2).unwrap(), 0.0);
    assert_eq!(metrics::recall(&a, &b, 2).unwrap(), 0.0);
}

#[test]
fn game_levels_on_a_hand_worked_map() {
    // 4x4 map with all mass in the top-left pixel; one annotation bottom-right.
    let d = Image::from_fn(4, 4, 1, |x, y, _| if (x, y) == (0, 0) { 1.0 } else { 0.0 });
    let gt = PointAnnotations::new(vec![(3.0, 3.0)], (4, 4)).unwrap();
    assert_eq!(metrics::game(&d, &gt, 0).unwrap(), 0.0);
    assert_eq!(metrics::game(&d, &gt, 1).unwrap(), 2.0);
    assert_eq!(metrics::game(&d, &gt, 2).unwrap(), 2.0);
}

#[test]
fn psnr_and_ssim_are_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = common::random_image(&mut rng, 20, 13, 3);
    let b = common::random_image(&mut rng, 20, 13, 3);
    assert_eq!(metrics::psnr(&a, &b).unwrap(), metrics::psnr(&b, &a).unwrap());
    assert_eq!(metrics::ssim(&a, &b).unwrap(), metrics::ssim(&b, &a).unwrap());
}
