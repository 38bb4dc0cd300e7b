mod common;

use common::{dist, kept_batches, naive_ewm, naive_filter, random_matrix};
use medix::filter::{
    deviation_sweep, err_rates_from_origin, flagged_ind_fraction, medix_filter_gradients, Aggregator, FilterConfig,
    FilterResult, Origin, StopReason, StopRule,
};
use medix::rng::Philox;
use medix::stats::{element_wise_median, geometric_median, GradientMatrix};
use medix::synth::{gradient_pools, simulate_gradient_world, GradientWorldSpec, Tail};
use medix::MedixError;
use proptest::prelude::*;

fn cfg(eps_stop: f64, k: usize, max_iter: usize, stop_rule: StopRule) -> FilterConfig {
    FilterConfig { eps_stop, k, max_iter, stop_rule, aggregator: Aggregator::Ewm }
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn clean_wild_set_flags_nothing() {
    let reference = [0.5, -1.0, 2.0];
    let g = GradientMatrix::from_rows(&vec![reference; 12]).unwrap();
    let res = medix_filter_gradients(&g, &reference, &cfg(5e-3, 2, 40, StopRule::LooDrop)).unwrap();
    assert!(res.outlier_ids.is_empty());
    assert_eq!(res.survivor_ids, (0..12).collect::<Vec<_>>());
    assert_eq!(res.stop_reason, StopReason::Converged);
    assert_eq!(res.trace[0].d_t, 0.0);
    assert_eq!(res.trace[0].delta_max, 0.0);
}

#[test]
fn hand_built_six_by_two() {
    // Four points around the origin and two far away. Removing either far
    // point moves both column medians from 0.05 to 0, a drop of 0.05·√2;
    // the lower id wins the tie. After that every removal moves a median
    // away from 0, so the loop stops with one outlier.
    let g = GradientMatrix::from_rows(&[
        [0.0, 0.0],
        [0.1, -0.1],
        [-0.1, 0.1],
        [-0.05, -0.05],
        [10.0, 10.0],
        [12.0, 9.0],
    ])
    .unwrap();
    let res = medix_filter_gradients(&g, &[0.0, 0.0], &cfg(1e-9, 1, 10, StopRule::LooDrop)).unwrap();
    assert_eq!(res.outlier_ids, vec![4]);
    assert_eq!(res.stop_reason, StopReason::Converged);
    assert!((res.trace[0].delta_max - 0.05 * 2f64.sqrt()).abs() < 1e-15);
    assert!(res.trace[1].delta_max < 0.0);
}

#[test]
fn tiny_instances_match_brute_force_loop() {
    let mut rng = Philox::new(31, 0);
    for case in 0..300 {
        let m = 6;
        let coarse = case % 2 == 0;
        let data = (0..m * 2).map(|_| if coarse { rng.below(4) as f64 } else { rng.standard_normal() }).collect();
        let g = GradientMatrix::new(m, 2, data).unwrap();
        let reference = [rng.standard_normal() * 0.3, rng.standard_normal() * 0.3];
        for rule in [StopRule::LooDrop, StopRule::IterationDrop] {
            let eps = [1e-9, 0.01, 0.1][rng.below(3)];
            let res = medix_filter_gradients(&g, &reference, &cfg(eps, 1, 10, rule)).unwrap();
            let oracle = naive_filter(&g, &reference, eps, 1, 10, rule);
            assert_eq!(kept_batches(&res), oracle.batches, "case {case} {rule:?}");
            assert_eq!(res.outlier_ids, oracle.outliers);
            assert_eq!(res.stop_reason, oracle.reason);
        }
    }
}

fn check_result_shape(res: &FilterResult, g: &GradientMatrix, reference: &[f64], k: usize) {
    // partition
    let mut all: Vec<usize> = res.outlier_ids.iter().chain(&res.survivor_ids).copied().collect();
    all.sort_unstable();
    assert_eq!(all, (0..g.rows()).collect::<Vec<_>>());
    assert!(res.outlier_ids.windows(2).all(|w| w[0] < w[1]));
    assert!(res.survivor_ids.windows(2).all(|w| w[0] < w[1]));
    // each removal is a full batch; the trace replays exactly
    let mut live: Vec<usize> = (0..g.rows()).collect();
    for rec in &res.trace {
        assert_eq!(rec.d_t, dist(&naive_ewm(g, &live), reference), "iteration {}", rec.iter);
        assert!(rec.removed.is_empty() || rec.removed.len() == k);
        live.retain(|i| !rec.removed.contains(i));
    }
    live.extend(&res.restored_ids);
    live.sort_unstable();
    assert_eq!(live, res.survivor_ids);
}

#[test]
fn fast_path_matches_naive_recomputation() {
    let mut rng = Philox::new(77, 0);
    for case in 0..50 {
        let g = random_matrix(&mut rng, 60, 10);
        let reference: Vec<f64> = (0..g.cols()).map(|_| 0.5 * rng.standard_normal()).collect();
        let k = 1 + rng.below((g.rows() - 1).min(4));
        let eps = [1e-6, 1e-3, 0.05][rng.below(3)];
        let rule = if rng.below(2) == 0 { StopRule::LooDrop } else { StopRule::IterationDrop };
        let fast = medix_filter_gradients(&g, &reference, &cfg(eps, k, 8, rule)).unwrap();
        let slow = medix_filter_gradients(
            &g,
            &reference,
            &FilterConfig { aggregator: Aggregator::EwmNaive, ..cfg(eps, k, 8, rule) },
        )
        .unwrap();
        assert_eq!(fast, slow, "case {case}");
        let oracle = naive_filter(&g, &reference, eps, k, 8, rule);
        assert_eq!(fast.outlier_ids, oracle.outliers, "case {case}");
        assert_eq!(fast.stop_reason, oracle.reason);
        check_result_shape(&fast, &g, &reference, k);
    }
}

#[test]
fn result_is_independent_of_thread_count() {
    let world = simulate_gradient_world(&GradientWorldSpec {
        mu_in: vec![0.0; 6],
        sigma: 1.0,
        separation: 3.0,
        pi: 0.3,
        m: 300,
        tail: Tail::Gaussian,
        seed: 4,
    })
    .unwrap();
    for aggregator in [Aggregator::Ewm, Aggregator::geometric()] {
        let c = FilterConfig { aggregator, ..cfg(0.05, 15, 10, StopRule::IterationDrop) };
        let one = in_pool(1, || medix_filter_gradients(&world.gradients, &[0.0; 6], &c).unwrap());
        let many = in_pool(4, || medix_filter_gradients(&world.gradients, &[0.0; 6], &c).unwrap());
        assert_eq!(one, many);
        assert_eq!(one.trace, many.trace);
    }
}

#[test]
fn iteration_drop_restores_the_last_batch() {
    let world = simulate_gradient_world(&GradientWorldSpec {
        mu_in: vec![0.0; 5],
        sigma: 1.0,
        separation: 10.0,
        pi: 0.2,
        m: 200,
        tail: Tail::Gaussian,
        seed: 9,
    })
    .unwrap();
    let res = medix_filter_gradients(&world.gradients, &[0.0; 5], &cfg(0.05, 10, 40, StopRule::IterationDrop)).unwrap();
    assert_eq!(res.stop_reason, StopReason::Converged);
    let last = res.trace.iter().rev().find(|r| !r.removed.is_empty()).unwrap();
    assert_eq!(res.restored_ids, {
        let mut v = last.removed.clone();
        v.sort_unstable();
        v
    });
    assert!(res.restored_ids.iter().all(|i| res.survivor_ids.contains(i)));
    check_result_shape(&res, &world.gradients, &[0.0; 5], 10);
}

#[test]
fn stop_reasons() {
    let mut rng = Philox::new(2, 0);
    let g = GradientMatrix::new(20, 3, (0..60).map(|_| rng.standard_normal()).collect()).unwrap();
    let far = [50.0, 50.0, 50.0];
    // every removal helps when the reference is far away: the loop runs
    // until the iteration cap or until the survivors are exhausted
    let capped = medix_filter_gradients(&g, &far, &cfg(1e-12, 2, 3, StopRule::LooDrop)).unwrap();
    assert_eq!(capped.stop_reason, StopReason::MaxIter);
    assert_eq!(capped.outlier_ids.len(), 6);
    let exhausted = medix_filter_gradients(&g, &far, &cfg(1e-12, 4, 100, StopRule::LooDrop)).unwrap();
    assert_eq!(exhausted.stop_reason, StopReason::Exhausted);
    assert!(exhausted.survivor_ids.len() <= 4 && !exhausted.survivor_ids.is_empty());
}

#[test]
fn invalid_configurations_are_rejected() {
    let g = GradientMatrix::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
    assert!(matches!(
        medix_filter_gradients(&g, &[0.0], &cfg(0.1, 3, 5, StopRule::LooDrop)),
        Err(MedixError::WildSetTooSmall { m: 3, k: 3 })
    ));
    assert!(matches!(
        medix_filter_gradients(&g, &[0.0, 0.0], &cfg(0.1, 1, 5, StopRule::LooDrop)),
        Err(MedixError::DimensionMismatch { .. })
    ));
    for bad in [cfg(0.0, 1, 5, StopRule::LooDrop), cfg(f64::NAN, 1, 5, StopRule::LooDrop), cfg(0.1, 0, 5, StopRule::LooDrop)] {
        assert!(medix_filter_gradients(&g, &[0.0], &bad).is_err());
    }
}

#[test]
fn aggregators_agree_on_symmetric_one_dimensional_data() {
    // odd count, symmetric about 0: both medians sit exactly on the middle point
    let col = [-9.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 9.0];
    let g = GradientMatrix::new(col.len(), 1, col.to_vec()).unwrap();
    assert_eq!(geometric_median(&g, 1e-10, 1000).unwrap().point, element_wise_median(&g));
    for rule in [StopRule::LooDrop, StopRule::IterationDrop] {
        let ewm = medix_filter_gradients(&g, &[0.0], &cfg(1e-3, 1, 10, rule)).unwrap();
        let gm = medix_filter_gradients(&g, &[0.0], &FilterConfig { aggregator: Aggregator::geometric(), ..cfg(1e-3, 1, 10, rule) })
            .unwrap();
        assert_eq!(ewm.outlier_ids, gm.outlier_ids, "{rule:?}");
    }
}

#[test]
fn error_rate_examples() {
    let origin = [Origin::Ind, Origin::Ood, Origin::Ind, Origin::Ood, Origin::Ind];
    let result = |outliers: Vec<usize>| FilterResult {
        survivor_ids: (0..5).filter(|i| !outliers.contains(i)).collect(),
        outlier_ids: outliers,
        restored_ids: vec![],
        trace: vec![],
        stop_reason: StopReason::Converged,
    };
    let perfect = err_rates_from_origin(&result(vec![1, 3]), &origin);
    assert_eq!((perfect.err_in, perfect.err_out), (Some(0.0), Some(0.0)));
    assert_eq!(perfect.ood_recall(), Some(1.0));
    let none = err_rates_from_origin(&result(vec![]), &origin);
    assert_eq!((none.err_in, none.err_out), (Some(0.0), Some(1.0)));
    let mixed = err_rates_from_origin(&result(vec![0, 1]), &origin);
    assert_eq!((mixed.err_in, mixed.err_out), (Some(1.0 / 3.0), Some(0.5)));
    assert_eq!(flagged_ind_fraction(&result(vec![0, 1]), &origin), Some(0.5));
    assert_eq!(flagged_ind_fraction(&result(vec![]), &origin), None);
    let only_ind = err_rates_from_origin(&result(vec![0]), &[Origin::Ind; 5]);
    assert_eq!((only_ind.err_in, only_ind.err_out), (Some(0.2), None));
}

#[test]
fn no_signal_means_chance_level_errors() {
    let mut total = 0.0;
    let trials = 30;
    for seed in 0..trials {
        let world = simulate_gradient_world(&GradientWorldSpec {
            mu_in: vec![0.0; 4],
            sigma: 1.0,
            separation: 0.0,
            pi: 0.3,
            m: 200,
            tail: Tail::Gaussian,
            seed,
        })
        .unwrap();
        let res = medix_filter_gradients(&world.gradients, &[0.0; 4], &cfg(1e-3, 10, 5, StopRule::LooDrop)).unwrap();
        let r = err_rates_from_origin(&res, &world.origin);
        total += r.err_in.unwrap() + r.err_out.unwrap();
    }
    let mean = total / trials as f64;
    assert!((mean - 1.0).abs() < 0.1, "mean err_in + err_out = {mean}");
}

#[test]
fn deviation_sweep_examples() {
    // InD rows in ± pairs: every column median is exactly 0
    let mut rng = Philox::new(6, 0);
    let half: Vec<Vec<f64>> = (0..50).map(|_| (0..4).map(|_| rng.standard_normal()).collect()).collect();
    let rows: Vec<Vec<f64>> = half.iter().flat_map(|r| [r.clone(), r.iter().map(|v| -v).collect()]).collect();
    let ind = GradientMatrix::from_rows(&rows).unwrap();
    let ood = GradientMatrix::from_rows(&vec![[8.0; 4]; 300]).unwrap();
    let pts = deviation_sweep(&ind, &ood, &[0.0; 4], &[0, 10, 150, 300]).unwrap();
    assert_eq!(pts[0].deviation, 0.0);
    // every point equals the direct EWM of the stacked rows
    let all = ind.stack(&ood).unwrap();
    for p in &pts {
        let rows: Vec<usize> = (0..ind.rows() + p.n_ood).collect();
        let direct = dist(&naive_ewm(&all, &rows), &[0.0; 4]);
        assert_eq!(p.deviation, direct, "n_ood {}", p.n_ood);
    }
    // OOD majority: the median sits inside the OOD cluster
    let gap = dist(&[8.0; 4], &[0.0; 4]);
    assert!(pts[3].deviation >= 0.5 * gap, "{} vs gap {gap}", pts[3].deviation);

    assert!(matches!(
        deviation_sweep(&ind, &ood, &[0.0; 4], &[301]),
        Err(MedixError::StepExceedsPool { step: 301, pool: 300 })
    ));
    assert!(deviation_sweep(&ind, &ood, &[0.0; 4], &[20, 10]).is_err());
}

#[test]
fn deviation_grows_with_contamination() {
    let pools = gradient_pools(&[0.0; 10], 1.0, 1.0, 500, 450, Tail::Gaussian, 3).unwrap();
    let steps: Vec<usize> = (0..10).map(|i| 50 * i).collect();
    let pts = deviation_sweep(&pools.ind, &pools.ood, &pools.ind.column_means(), &steps).unwrap();
    assert_eq!(pts.len(), steps.len());
    assert!(pts.windows(2).all(|w| w[1].deviation > w[0].deviation));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn filter_is_deterministic_and_consistent(seed in any::<u64>(), k in 1usize..4, loo in any::<bool>()) {
        let mut rng = Philox::new(seed, 0);
        let g = random_matrix(&mut rng, 40, 6);
        prop_assume!(g.rows() > k);
        let reference: Vec<f64> = (0..g.cols()).map(|_| rng.standard_normal()).collect();
        let rule = if loo { StopRule::LooDrop } else { StopRule::IterationDrop };
        let c = cfg(1e-3, k, 6, rule);
        let a = medix_filter_gradients(&g, &reference, &c).unwrap();
        let b = medix_filter_gradients(&g, &reference, &c).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(&a.trace, &b.trace);
        check_result_shape(&a, &g, &reference, k);
    }
}
