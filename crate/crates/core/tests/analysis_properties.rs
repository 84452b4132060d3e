use descent::analysis::{energy, mean_trace, Record, TraceMeta};
use descent::{check_bound, fit_rate, BoundConstant, Manifold, Objective, RunConfig, ScheduleSpec, StepRule, Trace};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

#[test]
fn fit_rate_recovers_exact_power_laws() {
    for p in [0.3, 0.5, 1.0, 2.0] {
        for c in [0.1, 1.0, 10.0] {
            let series: Vec<(usize, f64)> = (1..=100_000).map(|k| (k, c * (k as f64).powf(-p))).collect();
            let fit = fit_rate(&series, (10, 100_000)).unwrap();
            assert!((fit.exponent - p).abs() <= 1e-9 * p, "p = {p}: {}", fit.exponent);
            assert!((fit.constant - c).abs() <= 1e-9 * c, "c = {c}: {}", fit.constant);
        }
    }
}

fn quadratic_trace(x0: [f64; 2], iters: usize) -> (Trace, DVector<f64>) {
    let f = Objective::quadratic(DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]), DVector::from_column_slice(&[1.0, 2.0]))
        .unwrap();
    let x_star = f.known_minimizer().unwrap().coords().clone();
    let x0 = Manifold::euclidean(2).unwrap().point_from_slice(&x0).unwrap();
    let cfg = RunConfig::new(f, x0, ScheduleSpec::power_law(0.2, 1.0).unwrap())
        .with_step_rule(StepRule::Ambient)
        .with_max_iters(iters);
    (descent::run_rgd(&cfg).unwrap(), x_star)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn energy_dominates_the_gap(a in -5.0f64..5.0, b in -5.0f64..5.0) {
        let (trace, x_star) = quadratic_trace([a, b], 50);
        for r in &trace.records {
            let gap = r.gap.unwrap();
            prop_assert!(gap >= 0.0);
            prop_assert!(energy(r, &x_star).unwrap() >= gap);
        }
    }

    #[test]
    fn exponent_is_scale_free(p in 0.2f64..2.5, scale in 1e-8f64..1e8) {
        let series: Vec<(usize, f64)> = (1..=5000).map(|k| (k, 3.0 * (k as f64).powf(-p) * (1.0 + 0.1 * ((k as f64).sin())))).collect();
        let scaled: Vec<(usize, f64)> = series.iter().map(|(k, e)| (*k, e * scale)).collect();
        let a = fit_rate(&series, (10, 5000)).unwrap();
        let b = fit_rate(&scaled, (10, 5000)).unwrap();
        prop_assert!((a.exponent - b.exponent).abs() <= 1e-12);
    }

    #[test]
    fn explicit_bound_is_the_pointwise_predicate(
        values in prop::collection::vec(1e-6f64..10.0, 15..60),
        p in 0.0f64..2.0,
        c in 0.1f64..100.0,
    ) {
        let series: Vec<(usize, f64)> = values.iter().enumerate().map(|(i, v)| (i + 1, *v)).collect();
        let report = check_bound(&series, p, BoundConstant::Explicit(c), 10, 0.0).unwrap();
        let predicate = series.iter().filter(|(k, _)| *k > 10).all(|(k, e)| e * (*k as f64).powf(p) <= c);
        prop_assert_eq!(report.satisfied, predicate);
    }

    #[test]
    fn mean_of_copies_is_exact(n in 1usize..40, a in -3.0f64..3.0) {
        let (trace, _) = quadratic_trace([a, 1.0], 30);
        let copies: Vec<Trace> = (0..n as u64)
            .map(|s| Trace { meta: TraceMeta { seeds: vec![s], ..trace.meta.clone() }, ..trace.clone() })
            .collect();
        let mean = mean_trace(&copies).unwrap();
        for (m, r) in mean.records.iter().zip(&trace.records) {
            prop_assert_eq!(m.f_value.to_bits(), r.f_value.to_bits());
            prop_assert_eq!(m.gap.map(f64::to_bits), r.gap.map(f64::to_bits));
            prop_assert_eq!(m.grad_norm.to_bits(), r.grad_norm.to_bits());
            prop_assert_eq!(m.alpha.to_bits(), r.alpha.to_bits());
            prop_assert_eq!(m.dist_to_opt.map(f64::to_bits), r.dist_to_opt.map(f64::to_bits));
        }
    }
}

#[test]
fn csv_survives_a_file_round_trip() {
    let (trace, _) = quadratic_trace([1.0, -1.0], 100);
    let csv = trace.to_csv(true);
    let back = Trace::read_csv(csv.as_bytes()).unwrap();
    assert_eq!(back.to_csv(true), csv);
    let r: &Record = &back.records[7];
    assert_eq!(r.x, trace.records[7].x);
}
