use calib_core::bayes_calibration::{quantile_rank, shrinkage, z_score};
use calib_core::decision::RateTable;
use calib_core::hypothesis::likelihood_ratio_statistic;
use calib_core::optimize::SearchBox;
use calib_core::posterior_grid::build_grid_posterior;
use calib_core::{GridSpec, IndependentPrior, Marginal, Model, NormalMean, Observation};
use proptest::prelude::*;

fn conjugate_posterior(ys: &[f64]) -> calib_core::GridPosterior {
    let m = NormalMean::new(1.0, ys.len()).unwrap();
    let p = IndependentPrior::new(m.param_space().clone(), vec![Marginal::Normal { mean: 0.0, sd: 2.0 }]).unwrap();
    build_grid_posterior(
        &m,
        &p,
        &Observation::scalar(ys.to_vec()).unwrap(),
        &GridSpec::one_dim(-10.0, 10.0, 401).unwrap(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shrinkage_at_most_one(post in 0.0f64..100.0, prior in 1e-3f64..100.0) {
        prop_assert!(shrinkage(post, prior).unwrap() <= 1.0);
    }

    #[test]
    fn z_nonnegative(m in -50.0f64..50.0, sd in 1e-6f64..10.0, t in -50.0f64..50.0) {
        prop_assert!(z_score(m, sd, t).unwrap() >= 0.0);
    }

    #[test]
    fn lambda_at_most_one(ys in prop::collection::vec(-3.0f64..3.0, 1..20), null in -1.0f64..1.0) {
        let m = NormalMean::new(1.0, ys.len()).unwrap();
        let y = Observation::scalar(ys).unwrap();
        let lr = likelihood_ratio_statistic(&m, &[null], &y, &SearchBox::new(vec![-5.0], vec![5.0]).unwrap()).unwrap();
        prop_assert!(lr.lambda <= 1.0);
        prop_assert!(lr.minus2log >= 0.0);
    }

    #[test]
    fn rate_rows_are_stochastic(counts in prop::array::uniform2(prop::array::uniform3(0usize..1000))) {
        let t = RateTable::from_counts(counts);
        for (row, undefined) in t.cells.iter().zip(t.undefined) {
            if !undefined {
                let s: f64 = row.iter().map(|c| c.rate).sum();
                prop_assert!((s - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn posterior_is_normalized(ys in prop::collection::vec(-4.0f64..4.0, 1..6)) {
        let gp = conjugate_posterior(&ys);
        prop_assert!((gp.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(gp.weights().iter().all(|&w| w >= 0.0));
    }

    #[test]
    fn quantiles_monotone_and_ranks_bounded(
        ys in prop::collection::vec(-4.0f64..4.0, 1..6),
        q1 in 0.01f64..0.99,
        q2 in 0.01f64..0.99,
        truth in -20.0f64..20.0,
    ) {
        let gp = conjugate_posterior(&ys);
        let (lo, hi) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
        prop_assert!(gp.quantile(0, lo).unwrap() <= gp.quantile(0, hi).unwrap());
        let r = quantile_rank(&gp, 0, truth).unwrap();
        prop_assert!((0.0..=1.0).contains(&r));
    }
}
