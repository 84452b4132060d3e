use descent::optimize::{exact_line_search_quadratic, validate_schedule};
use descent::{
    run_momentum, run_rgd, run_sgd, Manifold, Momentum, NoiseFamily, NoiseSpec, Objective, RunConfig, ScheduleSpec,
    StepRule, StepSize,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
    let q = g.qr().q();
    let d = DMatrix::from_diagonal(&DVector::from_fn(n, |_, _| 0.05 + 20.0 * rng.random::<f64>()));
    let a = q.transpose() * d * q;
    (&a + a.transpose()) * 0.5
}

#[test]
fn inverse_lipschitz_steps_descend_on_random_quadratics() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for i in 0..100 {
        let n = 2 + i % 9;
        let f = Objective::quadratic(random_spd(&mut rng, n), DVector::from_fn(n, |_, _| rng.random::<f64>() - 0.5))
            .unwrap();
        let l = f.known_lipschitz().unwrap();
        let x0 = f.natural_manifold().random_point(&mut rng, 5.0);
        let cfg = RunConfig::new(f, x0, ScheduleSpec::fixed(1.0 / l).unwrap())
            .with_step_rule(StepRule::Ambient)
            .with_max_iters(1000);
        let t = run_rgd(&cfg).unwrap();
        for w in t.records.windows(2) {
            // once converged, f sits at its rounding floor and may tick up by an ulp
            let floor = 8.0 * f64::EPSILON * w[0].f_value.abs().max(1.0);
            assert!(w[1].f_value <= w[0].f_value + floor, "instance {i}, k = {}", w[1].k);
            let bound = w[0].f_value - w[0].grad_norm.powi(2) / (2.0 * l);
            assert!(w[1].f_value <= bound + 1e-10, "instance {i}, k = {}", w[1].k);
        }
    }
}

#[test]
fn sphere_run_satisfies_sufficient_decrease_and_unit_norm() {
    let theta: f64 = 1e-3;
    let x0 = Manifold::sphere(3).unwrap().point_from_slice(&[theta.sin(), 0.0, theta.cos()]).unwrap();
    for rule in [StepRule::ExpMap, StepRule::NormalizeRetract] {
        let cfg = RunConfig::new(Objective::sphere_height(3).unwrap(), x0.clone(), ScheduleSpec::fixed(1.0).unwrap())
            .with_step_rule(rule)
            .with_max_iters(10_000);
        let t = run_rgd(&cfg).unwrap();
        assert_eq!(t.len(), 10_001);
        for w in t.records.windows(2) {
            assert!(w[1].f_value <= w[0].f_value - 0.5 * w[0].grad_norm.powi(2) + 1e-10, "k = {}", w[1].k);
        }
        for r in &t.records {
            assert!((r.x.as_ref().unwrap().norm() - 1.0).abs() <= 1e-12);
        }
    }
}

#[test]
fn exact_line_search_gradients_are_orthogonal() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for i in 0..50 {
        let n = 2 + i % 6;
        let a = random_spd(&mut rng, n);
        let b = DVector::from_fn(n, |_, _| rng.random::<f64>() - 0.5);
        let mut x = DVector::from_fn(n, |_, _| rng.random::<f64>() * 4.0 - 2.0);
        for _ in 0..5 {
            let g = &a * &x - &b;
            if g.norm() < 1e-6 {
                break;
            }
            let alpha = exact_line_search_quadratic(&a, &b, &x).unwrap();
            x -= &g * alpha;
            let g_next = &a * &x - &b;
            assert!(g_next.dot(&g).abs() <= 1e-10 * g.norm().max(1.0) * g_next.norm().max(1.0));
        }
    }
}

#[test]
fn sgd_runs_are_bit_identical_per_seed() {
    let noise = NoiseSpec::new(NoiseFamily::StudentT { dof: 5.0, scale: 0.5 }, 4.0, 3).unwrap();
    let x0 = Manifold::euclidean(3).unwrap().point_from_slice(&[1.0, -2.0, 3.0]).unwrap();
    for seed in [0, 1, 99, u64::MAX] {
        let cfg = RunConfig::new(Objective::half_square(3).unwrap(), x0.clone(), ScheduleSpec::power_law(1.0, 0.9).unwrap())
            .with_noise(noise)
            .with_seed(seed)
            .with_max_iters(2000);
        let a = run_sgd(&cfg).unwrap();
        let b = run_sgd(&cfg).unwrap();
        assert_eq!(a.to_csv(true), b.to_csv(true));
        assert_eq!(a, b);
    }
}

#[test]
fn divergence_verdicts_match_partial_sums() {
    let families = [
        ScheduleSpec::fixed(0.25).unwrap(),
        ScheduleSpec::fixed(1e-3).unwrap(),
        ScheduleSpec::power_law(1.0, 1.0).unwrap(),
        ScheduleSpec::power_law(1.0, 0.8).unwrap(),
        ScheduleSpec::power_law(1.0, 0.6).unwrap(),
        ScheduleSpec::power_law(0.1, 0.5).unwrap(),
        ScheduleSpec::power_law(1.0, 1.5).unwrap(),
    ];
    for s in families {
        let report = validate_schedule(&s);
        let partial: f64 = (1..=1_000_000).map(|k| s.alpha.at(k).unwrap()).sum();
        match report.alpha_sum_diverges {
            Some(true) => assert!(partial > 10.0, "{s:?}: partial sum {partial}"),
            Some(false) => {
                // a convergent sum has a bounded tail
                let tail: f64 = (1_000_001..=2_000_000).map(|k| s.alpha.at(k).unwrap()).sum();
                assert!(tail < 1e-2 * partial, "{s:?}");
            }
            None => unreachable!(),
        }
    }
}

#[test]
fn momentum_runs_stay_finite_with_decaying_schedules() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for i in 0..20 {
        let n = 2 + i % 5;
        let f = Objective::quadratic(random_spd(&mut rng, n), DVector::from_element(n, 1.0)).unwrap();
        let c = 1.0 / f.known_lipschitz().unwrap();
        let schedule =
            ScheduleSpec::new(StepSize::PowerLaw { c, gamma: 1.0 }, Momentum::PowerLaw { d: 0.5, gamma: 1.0 }).unwrap();
        let x0 = f.natural_manifold().random_point(&mut rng, 3.0);
        let start = x0.distance(f.known_minimizer().unwrap()).unwrap();
        let t = run_momentum(&RunConfig::new(f, x0, schedule).with_max_iters(2000)).unwrap();
        assert!(t.abort.is_none());
        assert!(t.last().unwrap().dist_to_opt.unwrap() < start);
    }
}
