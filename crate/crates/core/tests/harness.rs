//! Statistical properties of the experiment engine.
#![cfg(feature = "harness")]

use putraffic::harness::{run_experiment, ExperimentKind, ExperimentSpec, Method};
use putraffic::TrafficParams;

fn avg_sweep(replicates: usize) -> ExperimentSpec {
    ExperimentSpec {
        u: vec![0.2, 0.3, 0.4, 0.5, 0.6, 0.7],
        lambda_f: vec![0.3, 0.6, 0.9, 1.2, 1.5],
        n: vec![20, 50],
        t: vec![30.0],
        methods: vec![Method::Avg],
        replicates,
        seed: 21,
        ..ExperimentSpec::new(ExperimentKind::Custom)
    }
}

#[test]
fn doubling_replicates_shrinks_standard_error_by_root_two() {
    let a = run_experiment(&avg_sweep(4000)).unwrap();
    let b = run_experiment(&avg_sweep(8000)).unwrap();
    assert_eq!(a.rows.len(), 60);
    // per-row errors are themselves noisy (20 batches), so compare geometric means
    let log_ratio: f64 =
        a.rows.iter().zip(&b.rows).map(|(x, y)| (y.mc_se.unwrap() / x.mc_se.unwrap()).ln()).sum::<f64>() / 60.0;
    let ratio = log_ratio.exp();
    let ideal = 0.5f64.sqrt();
    assert!((ratio / ideal - 1.0).abs() <= 0.1, "standard error ratio {ratio}");
}

#[test]
fn rows_cover_the_grid_in_order() {
    let mut spec = avg_sweep(5);
    spec.methods = vec![Method::Avg, Method::MlU, Method::MlLambdaF];
    spec.sensing = vec![(0.0, 0.0), (0.05, 0.02)];
    let t = run_experiment(&spec).unwrap();
    assert_eq!(t.rows.len(), 6 * 5 * 2 * 2 * 3);
    assert!(t.rows.iter().all(|r| r.mc_se.is_none_or(|s| s >= 0.0)));
    for r in &t.rows {
        let p = TrafficParams::from_u_lambda_f(r.u, r.lambda_f).unwrap();
        assert!((p.lambda_n() - r.lambda_n).abs() < 1e-12);
    }
    let first: Vec<&str> = t.rows[..3].iter().map(|r| r.estimator.as_str()).collect();
    assert_eq!(first, ["avg", "ml_u", "ml_lambda_f"]);
}

#[test]
fn monte_carlo_agrees_with_closed_forms() {
    let spec = ExperimentSpec {
        u: vec![0.3, 0.6],
        lambda_f: vec![0.5],
        n: vec![10, 30],
        t: vec![20.0],
        sensing: vec![(0.0, 0.0)],
        methods: vec![Method::Avg, Method::AvgOptimal, Method::Weighted],
        replicates: 20_000,
        seed: 5,
        ..ExperimentSpec::new(ExperimentKind::Custom)
    };
    let t = run_experiment(&spec).unwrap();
    for r in &t.rows {
        let (mc, se, cf) = (r.mc_rms.unwrap(), r.mc_se.unwrap(), r.cf_rms.unwrap());
        assert!((mc - cf).abs() <= 3.0 * se, "{} N={} u={}: {mc} vs {cf} (se {se})", r.estimator, r.n, r.u);
        if let Some(o) = r.oracle_rms {
            assert!((o - cf).abs() <= 1e-10 * cf);
        }
    }
}
