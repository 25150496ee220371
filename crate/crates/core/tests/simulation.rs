use panto_core::num::log_spaced;
use panto_core::sdesim::{coarsen_increments, for_each_path, simulate_path_with_increments};
use panto_core::stats::percentile;
use panto_core::{
    classify_scalar, estimate_as_exponent, estimate_moment_curve, fit_exponential_rate, simulate_ensemble,
    simulate_ensemble_range, simulate_path, EnsembleSpec, EstimateKind, InitialCondition, Model, RandomStreamSpec,
    ScalarPantographModel,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn scalar(a: f64, b: f64, s: f64, r: f64, q: f64) -> Model<f64> {
    ScalarPantographModel::new(a, b, s, r, q).into()
}

fn ensemble(m: Model<f64>, h: f64, t_end: f64, n: usize, seed: u64, nodes: Vec<f64>) -> EnsembleSpec<f64> {
    EnsembleSpec { model: m, init: InitialCondition::constant(1.0), h, t_end, n_paths: n, master_seed: seed, nodes, tail: None }
}

#[test]
fn gbm_first_moment() {
    // E X(1) = e^a for b = ρ = 0
    let s = ensemble(scalar(-1.0, 0.0, 0.5, 0.0, 0.5), 0.01, 1.0, 100_000, 11, vec![1.0]);
    let c = estimate_moment_curve(&simulate_ensemble(&s).unwrap(), 1).unwrap();
    let exact = (-1.0f64).exp();
    // E|X| = E X for a positive path; the Euler mean is (1 - h)^n
    let euler = 0.99f64.powi(100);
    assert!((c.m_hat[0] - euler).abs() <= 3.0 * c.stderr[0]);
    assert!((c.m_hat[0] - exact).abs() <= 3.0 * c.stderr[0] + (euler - exact).abs());

    let s = ensemble(scalar(-1.0, 0.0, 0.5, 0.0, 0.5), 0.01, 1.0, 10_000, 12, vec![1.0]);
    let c = estimate_moment_curve(&simulate_ensemble(&s).unwrap(), 1).unwrap();
    assert!((c.m_hat[0] - exact).abs() <= 4.0 * c.stderr[0]);
}

#[test]
fn gbm_second_moment() {
    // E X(1)² = e^{2a + σ²}; Euler gives ((1 + ah)² + σ²h)^n
    let s = ensemble(scalar(-1.0, 0.0, 0.5, 0.0, 0.5), 0.01, 1.0, 100_000, 13, vec![1.0]);
    let c = estimate_moment_curve(&simulate_ensemble(&s).unwrap(), 2).unwrap();
    let euler = (0.99f64 * 0.99 + 0.25 * 0.01).powi(100);
    let exact = (-1.75f64).exp();
    assert!((c.m_hat[0] - euler).abs() <= 3.0 * c.stderr[0]);
    assert!((euler / exact - 1.0).abs() < 0.01);
}

#[test]
fn gbm_exponential_rate() {
    let nodes = log_spaced(1.0, 10.0, 16);
    let s = ensemble(scalar(1.0, 0.0, 0.1, 0.0, 0.5), 0.01, 10.0, 10_000, 14, nodes);
    let c = estimate_moment_curve(&simulate_ensemble(&s).unwrap(), 2).unwrap();
    let e = fit_exponential_rate(&c, (1.0, 10.0)).unwrap();
    assert!((e.value / 2.01 - 1.0).abs() < 0.05, "rate {}", e.value);
}

#[test]
fn deterministic_decay_rate() {
    let nodes = log_spaced(1.0, 2.0, 10);
    let s = ensemble(scalar(-1.0, 0.0, 0.0, 0.0, 0.5), 1e-6, 2.0, 1, 0, nodes);
    let c = estimate_moment_curve(&simulate_ensemble(&s).unwrap(), 1).unwrap();
    assert!(c.stderr.iter().all(|v| *v == 0.0));
    let e = fit_exponential_rate(&c, (1.0, 2.0)).unwrap();
    assert!((e.value + 1.0).abs() < 1e-6);
}

#[test]
fn positivity_without_delayed_noise() {
    let s = ensemble(scalar(-1.0, 0.5, 0.2, 0.0, 0.5), 1e-3, 10.0, 1000, 15, vec![10.0]);
    let ens = simulate_ensemble(&s).unwrap();
    assert!(ens.summaries.iter().all(|p| p.positive));
}

#[test]
fn strong_error_decreases_with_step() {
    let m = scalar(-1.0, 0.5, 0.5, 0.3, 0.5);
    let (h, t_end, refine) = (0.04, 1.0, 64);
    let fine_steps = (t_end / h) as usize * refine;
    let hf = h / refine as f64;
    let (mut e1, mut e2) = (0.0, 0.0);
    let paths = 2000;
    for k in 0..paths {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        rng.set_stream(k);
        let dw: Vec<f64> = (0..fine_steps).map(|_| rng.sample::<f64, _>(StandardNormal) * hf.sqrt()).collect();
        let end = |inc: &[f64], step: f64| {
            let tr = simulate_path_with_increments(&m, &[1.0], step, inc).unwrap();
            tr.values[tr.len() - 1]
        };
        let reference = end(&dw, hf);
        e1 += (end(&coarsen_increments(&dw, refine), h) - reference).abs();
        e2 += (end(&coarsen_increments(&dw, refine / 2), h / 2.0) - reference).abs();
    }
    let ratio = e1 / e2;
    assert!((1.2..=3.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn moment_curve_has_no_jumps() {
    let h = 0.01;
    let nodes: Vec<f64> = (0..=200).map(|k| k as f64 * h).collect();
    let s = ensemble(scalar(-1.0, 0.5, 0.3, 0.2, 0.5), h, 2.0, 2000, 16, nodes);
    let c = estimate_moment_curve(&simulate_ensemble(&s).unwrap(), 1).unwrap();
    let sup = c.m_hat.iter().copied().fold(0.0, f64::max);
    for w in c.m_hat.windows(2) {
        assert!((w[1] - w[0]).abs() <= 10.0 * h.sqrt() * (1.0 + sup));
    }
}

#[test]
fn ensemble_is_order_and_partition_invariant() {
    let nodes = log_spaced(1.0, 20.0, 8);
    let s = ensemble(scalar(-2.0, 1.0, 0.1, 0.1, 0.5), 0.01, 20.0, 40, 17, nodes);
    let full = simulate_ensemble(&s).unwrap();
    let a = simulate_ensemble_range(&s, 0..15).unwrap();
    let b = simulate_ensemble_range(&s, 15..40).unwrap();
    assert_eq!(a.merge(b).unwrap(), full);

    // reversed execution order gives the same per-path summaries
    for k in (0..40u64).rev() {
        let (_, summary) = s.path(k).unwrap();
        assert_eq!(summary, full.summaries[k as usize]);
    }

    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    assert_eq!(one.install(|| simulate_ensemble(&s).unwrap()), four.install(|| simulate_ensemble(&s).unwrap()));
}

#[test]
fn single_path_ensemble_is_simulate_path() {
    let m = scalar(-2.0, 1.0, 0.1, 0.1, 0.5);
    let s = ensemble(m.clone(), 0.01, 5.0, 1, 18, vec![5.0]);
    let mut dumped = Vec::new();
    for_each_path(&s, 0..1, |tr| {
        dumped = tr.values.clone();
        Ok(())
    })
    .unwrap();
    let direct = simulate_path(&m, &[1.0], 0.01, 5.0, RandomStreamSpec::new(18, 0)).unwrap();
    assert_eq!(dumped, direct.values);
}

#[test]
fn moments_scale_with_initial_value() {
    let nodes = log_spaced(1.0, 10.0, 8);
    let mut s = ensemble(scalar(-1.0, 0.5, 0.3, 0.2, 0.5), 0.01, 10.0, 200, 19, nodes);
    let base = simulate_ensemble(&s).unwrap();
    s.init = InitialCondition::constant(2.0);
    let scaled = simulate_ensemble(&s).unwrap();
    for p in [1u8, 2, 4] {
        let c1 = estimate_moment_curve(&base, p).unwrap();
        let c2 = estimate_moment_curve(&scaled, p).unwrap();
        for (x, y) in c1.m_hat.iter().zip(&c2.m_hat) {
            assert_eq!(*y, x * 2f64.powi(p as i32));
        }
    }
}

#[test]
fn tail_statistic_of_deterministic_power_law() {
    let s = ensemble(scalar(-2.0, 1.0, 0.0, 0.0, 0.5), 0.01, 1e4, 1, 0, vec![1e4]);
    let e = estimate_as_exponent(&simulate_ensemble(&s).unwrap(), EstimateKind::PolynomialAs).unwrap();
    assert!((e.value + 1.0).abs() <= 0.05, "{}", e.value);
}

#[test]
fn tail_statistic_polynomial_bound() {
    let model = ScalarPantographModel::new(-3.0, 1.0, 0.2, 0.0, 0.5);
    let r = classify_scalar(&model, 1).unwrap();
    let s = ensemble(model.into(), 0.01, 200.0, 400, 20, vec![200.0]);
    let e = estimate_as_exponent(&simulate_ensemble(&s).unwrap(), EstimateKind::PolynomialAs).unwrap();
    assert!(e.value <= r.alpha_as.unwrap() + 0.1, "{} vs {}", e.value, r.alpha_as.unwrap());
    assert!(e.max.unwrap() >= e.value);
}

#[test]
fn tail_statistic_exponential_bound() {
    let s = ensemble(scalar(0.5, 0.2, 0.1, 0.0, 0.5), 0.01, 100.0, 400, 21, vec![100.0]);
    let e = estimate_as_exponent(&simulate_ensemble(&s).unwrap(), EstimateKind::ExponentialAs).unwrap();
    assert!(e.value <= 0.5 + 0.05, "{}", e.value);
}

#[test]
fn tail_statistic_needs_long_horizon() {
    let s = ensemble(scalar(-1.0, 0.5, 0.1, 0.0, 0.5), 0.01, 50.0, 4, 0, vec![50.0]);
    assert!(estimate_as_exponent(&simulate_ensemble(&s).unwrap(), EstimateKind::PolynomialAs).is_err());
}

#[test]
fn percentile_is_order_free() {
    let v = [0.3, -1.0, 2.0, 0.1, 0.7];
    let mut r = v;
    r.reverse();
    assert_eq!(percentile(&v, 0.95), percentile(&r, 0.95));
}
