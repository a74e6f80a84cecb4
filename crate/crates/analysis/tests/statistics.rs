mod oracle;

use bodyprompt_analysis::{cohen_d_from_r, fleiss_kappa, permutation_p, spearman, RatingMatrix};
use proptest::prelude::*;

#[test]
fn fleiss_matches_pair_enumeration_on_random_matrices() {
    let mut rng = oracle::rng(2024);
    for _ in 0..100 {
        let (labels, q) = oracle::random_labels(&mut rng);
        let m = RatingMatrix::from_labels(&labels, q).unwrap();
        let got = fleiss_kappa(&m).unwrap();
        let want = oracle::fleiss_by_pairs(&labels, q);
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }
}

#[test]
fn fleiss_small_constructed_matrix() {
    // P-bar = 2/3 and chance agreement = 1/2, so kappa = 1/3.
    let m = RatingMatrix::new(vec![vec![3, 0], vec![0, 3], vec![2, 1], vec![1, 2]]).unwrap();
    assert!((fleiss_kappa(&m).unwrap() - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn fleiss_unanimous_is_exactly_one() {
    let m = RatingMatrix::new(vec![vec![0, 4, 0], vec![4, 0, 0], vec![0, 0, 4], vec![0, 4, 0]]).unwrap();
    assert_eq!(fleiss_kappa(&m).unwrap(), 1.0);
}

#[test]
fn spearman_matches_rank_then_pearson_oracle() {
    let mut rng = oracle::rng(7);
    for trial in 0..200 {
        let levels = if trial % 2 == 0 { 1000 } else { 5 };
        let x = oracle::random_vector(&mut rng, 20, levels);
        let y = oracle::random_vector(&mut rng, 20, levels);
        let Ok(got) = spearman(&x, &y) else { continue };
        assert!((got.rho - oracle::spearman_oracle(&x, &y)).abs() < 1e-9);
    }
}

#[test]
fn permutation_p_agrees_with_t_approximation() {
    let mut rng = oracle::rng(11);
    for seed in 0..10 {
        let x = oracle::random_vector(&mut rng, 20, 1000);
        // Mix in some signal so p spans a range.
        let noise = oracle::random_vector(&mut rng, 20, 1000);
        let y: Vec<f64> = x.iter().zip(&noise).map(|(a, b)| a * (seed as f64 / 10.0) + b).collect();
        let t = spearman(&x, &y).unwrap().p_value;
        let perm = permutation_p(&x, &y, 10_000, seed).unwrap();
        assert!((t - perm).abs() <= 0.02, "seed {seed}: t {t} perm {perm}");
    }
}

#[test]
fn cohen_d_reference_points() {
    let d = cohen_d_from_r(0.237).unwrap();
    assert!((d - 0.4879).abs() < 5e-5, "{d}");
    assert!((0.478..=0.498).contains(&d));
    // The conversion gives -0.4857 here; a reported -0.54 cannot come from it.
    let d = cohen_d_from_r(-0.236).unwrap();
    assert!((d - -0.4857).abs() < 5e-5, "{d}");
    assert!((d - -0.54).abs() > 0.05);
}

proptest! {
    #[test]
    fn kappa_ignores_category_relabeling(seed in any::<u64>(), rot in 1usize..5) {
        let mut rng = oracle::rng(seed);
        let (labels, q) = oracle::random_labels(&mut rng);
        let relabeled: Vec<Vec<usize>> =
            labels.iter().map(|s| s.iter().map(|&c| (c + rot) % q).collect()).collect();
        let a = fleiss_kappa(&RatingMatrix::from_labels(&labels, q).unwrap()).unwrap();
        let b = fleiss_kappa(&RatingMatrix::from_labels(&relabeled, q).unwrap()).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn spearman_invariant_under_monotone_transforms(
        x in proptest::collection::vec(-50.0f64..50.0, 3..30),
        seed in any::<u64>(),
    ) {
        let mut rng = oracle::rng(seed);
        let y = oracle::random_vector(&mut rng, x.len(), 7);
        if let Ok(base) = spearman(&x, &y) {
            let fx: Vec<f64> = x.iter().map(|v| v.powi(3) + 2.0 * v).collect();
            let gy: Vec<f64> = y.iter().map(|v| (v / 3.0).exp()).collect();
            let moved = spearman(&fx, &gy).unwrap();
            prop_assert!((base.rho - moved.rho).abs() < 1e-12);
        }
    }

    #[test]
    fn cohen_d_is_odd(r in -0.999f64..0.999) {
        prop_assert_eq!(cohen_d_from_r(-r).unwrap(), -cohen_d_from_r(r).unwrap());
    }

    #[test]
    fn rho_bounded_and_p_in_unit_interval(seed in any::<u64>(), n in 3usize..40) {
        let mut rng = oracle::rng(seed);
        let x = oracle::random_vector(&mut rng, n, 6);
        let y = oracle::random_vector(&mut rng, n, 6);
        if let Ok(r) = spearman(&x, &y) {
            prop_assert!(r.rho.abs() <= 1.0);
            prop_assert!((0.0..=1.0).contains(&r.p_value));
        }
    }
}
