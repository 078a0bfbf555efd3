use super::oracle::*;
use super::*;
use crate::design::optimal_weights;
use crate::seed;
use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::Rng;

fn params(u: f64, lf: f64) -> TrafficParams {
    TrafficParams::from_u_lambda_f(u, lf).unwrap()
}

fn mean(bits: &[bool]) -> f64 {
    bits.iter().filter(|&&b| b).count() as f64 / bits.len() as f64
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

#[test]
fn averaging_small_cases() {
    let p = params(0.4, 0.6);
    let one = SampleSchedule::new(vec![], 0.0).unwrap();
    assert_eq!(mse_avg(&p, &one).mse, 0.24);
    let tc = 0.9;
    let g = p.gamma(tc);
    let two = SampleSchedule::with_interval(2, tc).unwrap();
    assert_relative_eq!(mse_avg(&p, &two).mse, 0.24 * (1.0 + g) / 2.0, max_relative = 1e-14);
    assert_relative_eq!(mse_avg_uniform(&p, 2, tc).unwrap().mse, 0.24 * (1.0 + g) / 2.0, max_relative = 1e-14);
    let sched = SampleSchedule::new(vec![0.7, 1.3], 0.0).unwrap();
    let oracle = oracle_mse_enumeration(&p, &sched, &mean, None).unwrap();
    assert!(rel(mse_avg(&p, &sched).mse, oracle.mse) <= 1e-12);
    assert_eq!(oracle.source, ErrorSource::OracleEnumeration);
}

#[test]
fn report_rms_is_root_of_mse() {
    let r = mse_avg_uniform(&params(0.3, 0.9), 100, 50.0).unwrap();
    assert!((r.rms * r.rms - r.mse).abs() <= 1e-14 * r.mse.max(1.0));
}

#[test]
fn decrement_identities() {
    let p = params(0.3, 0.9);
    let sched = SampleSchedule::new(vec![0.2, 0.5, 0.1, 1.0], 0.0).unwrap();
    let dmax = mse_avg_max_decrement(&p, &sched);
    assert_relative_eq!(mse_avg_decrement(&p, &sched, 1e6).unwrap(), dmax, max_relative = 1e-12);

    let far = SampleSchedule::with_interval(6, 1e5).unwrap();
    assert_relative_eq!(
        mse_avg_decrement(&p, &far, 1e5).unwrap(),
        0.21 * (1.0 / 6.0 - 1.0 / 7.0),
        max_relative = 1e-12
    );

    let mut rng = seed::rng(21, &[]);
    for _ in 0..200 {
        let p = params(rng.gen_range(0.05..0.95), rng.gen_range(0.1..2.0));
        let n = rng.gen_range(1..30);
        let iv: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(0.0..3.0)).collect();
        let next = rng.gen_range(0.0..3.0);
        let sched = SampleSchedule::new(iv.clone(), 0.0).unwrap();
        let mut longer = iv;
        longer.push(next);
        let longer = SampleSchedule::new(longer, 0.0).unwrap();
        let direct = mse_avg(&p, &sched).mse - mse_avg(&p, &longer).mse;
        assert!((mse_avg_decrement(&p, &sched, next).unwrap() - direct).abs() <= 1e-12);
    }
}

#[test]
fn uniform_forms_agree() {
    let mut rng = seed::rng(22, &[]);
    for _ in 0..300 {
        let p = params(rng.gen_range(0.05..0.95), rng.gen_range(0.05..3.0));
        let n = rng.gen_range(2..400);
        let t = 10f64.powf(rng.gen_range(-4.0..3.0));
        let closed = mse_avg_uniform(&p, n, t).unwrap().mse;
        let direct = mse_avg_uniform_direct(&p, n, t).unwrap();
        let general = mse_avg(&p, &SampleSchedule::uniform(n, t).unwrap()).mse;
        assert!(rel(closed, direct) <= 1e-12, "{closed} {direct}");
        assert!(rel(closed, general) <= 1e-12, "{closed} {general}");
    }
}

#[test]
fn uniform_asymptote() {
    let p = params(0.3, 0.9);
    let vl = mse_avg_uniform_asymptote(&p, 50.0).unwrap().mse;
    let big = mse_avg_uniform(&p, 100_000, 50.0).unwrap().mse;
    assert!(rel(big, vl) <= 1e-3);
    assert!(mse_avg_uniform_asymptote(&p, 1e9).unwrap().mse < 1e-9);
    assert_relative_eq!(mse_avg_uniform_asymptote(&p, 1e-12).unwrap().mse, 0.21, max_relative = 1e-9);
    // the series and the closed form meet smoothly
    let a = mse_avg_uniform_asymptote(&p, 0.3 / 0.9 * 0.99e-4).unwrap().mse;
    let b = mse_avg_uniform_asymptote(&p, 0.3 / 0.9 * 1.01e-4).unwrap().mse;
    assert!(rel(a, b) < 1e-5);
}

#[test]
fn required_samples_definition() {
    let p = params(0.3, 0.9);
    assert_eq!(required_samples(&p, 50.0, 1e12).unwrap(), 2);
    assert!(matches!(required_samples(&p, 50.0, 1.0), Err(Error::Infeasible(_))));
    let vl = mse_avg_uniform_asymptote(&p, 50.0).unwrap().mse;
    let n = required_samples(&p, 50.0, 1.05).unwrap();
    let v = |n| mse_avg_uniform(&p, n, 50.0).unwrap().mse;
    assert!(v(n) <= 1.05 * vl && v(n - 1) > 1.05 * vl);
    let scan = (2..).find(|&m| v(m) <= 1.05 * vl).unwrap();
    assert_eq!(n, scan);
}

#[test]
fn corrected_average() {
    let p = params(0.3, 0.9);
    let sched = SampleSchedule::uniform(20, 10.0).unwrap();
    assert_eq!(mse_avg_corrected(&p, &sched, &SensingModel::perfect()).unwrap().mse, mse_avg(&p, &sched).mse);
    let s = SensingModel::new(0.1, 0.05).unwrap();
    // N = 2 base case written out
    let tc = 0.8;
    let g = p.gamma(tc);
    let gain = 0.85;
    let base = 0.21 * (1.0 + g) / 2.0 + (0.3 * 0.05 * 0.95 + 0.7 * 0.1 * 0.9) / (2.0 * gain * gain);
    let two = SampleSchedule::with_interval(2, tc).unwrap();
    assert_relative_eq!(mse_avg_corrected(&p, &two, &s).unwrap().mse, base, max_relative = 1e-14);
    assert!(matches!(
        mse_avg_corrected(&p, &two, &SensingModel::new(0.4, 0.6).unwrap()),
        Err(Error::UndefinedEstimator { .. })
    ));
    let term = sensing_correction_term(&p, 20, &s).unwrap();
    let diff = mse_avg_corrected(&p, &sched, &s).unwrap().mse - mse_avg(&p, &sched).mse;
    assert!(term >= 0.0);
    assert!((diff - term).abs() <= 1e-15);
}

#[test]
fn weighted_forms() {
    let p = params(0.6, 0.4);
    let (n, tc) = (40, 0.5);
    let uni = WeightVector::uniform(n).unwrap();
    let a = mse_weighted(&p, n, tc, &uni, None).unwrap().mse;
    let b = mse_avg_uniform(&p, n, tc * (n - 1) as f64).unwrap().mse;
    assert!(rel(a, b) <= 1e-12);
    let w = optimal_weights(&p, n, tc).unwrap();
    let g = p.gamma(tc);
    let want = 0.24 * (1.0 + g) / (n as f64 * (1.0 - g) + 2.0 * g);
    assert!(rel(mse_weighted(&p, n, tc, &w, None).unwrap().mse, want) <= 1e-12);
    assert!(rel(mse_weighted_optimal(&p, n, tc, None).unwrap().mse, want) <= 1e-12);
    let s = SensingModel::new(0.1, 0.1).unwrap();
    assert!(
        rel(mse_weighted(&p, n, tc, &w, Some(&s)).unwrap().mse, mse_weighted_optimal(&p, n, tc, Some(&s)).unwrap().mse)
            <= 1e-12
    );
    let bad = WeightVector::uniform(n - 1).unwrap();
    assert!(mse_weighted(&p, n, tc, &bad, None).is_err());
}

#[test]
fn weighted_asymptote() {
    for &(u, lf, t) in &[(0.3, 0.9, 50.0), (0.6, 0.4, 50.0), (0.3, 0.4, 10.0)] {
        let p = params(u, lf);
        let vl = mse_weighted_asymptote(&p, t, None).unwrap().mse;
        let n = 100_000;
        let big = mse_weighted_optimal(&p, n, t / (n - 1) as f64, None).unwrap().mse;
        assert!(rel(big, vl) <= 1e-3);
        let s = SensingModel::new(0.1, 0.1).unwrap();
        assert_eq!(mse_weighted_asymptote(&p, t, Some(&s)).unwrap().mse, vl);
        assert!(mse_weighted_asymptote(&p, 1e12, None).unwrap().mse < 1e-10);
    }
}

#[test]
fn fisher_u_limits() {
    let p = params(0.3, 0.9);
    // Γ = 1e-8
    let tc = 8.0 * 10f64.ln() / p.decay_rate();
    for n in [2, 5, 50] {
        let crb = crb_u(&p, n, tc).unwrap().mse;
        assert_relative_eq!(crb, 0.21 / n as f64, max_relative = 1e-6);
    }
    let n = 100_000;
    let big = crb_u(&p, n, 50.0 / (n - 1) as f64).unwrap().mse;
    assert!(rel(big, crb_u_asymptote(&p, 50.0).unwrap().mse) <= 1e-3);
    assert!(fisher_u(&p, 1, 1.0).is_err());
}

#[test]
fn fisher_lambda_identities() {
    let p = params(0.3, 0.9);
    let tc = 0.4;
    let c2 = crb_lambda_f(&p, 2, tc).unwrap().mse;
    for n in [3, 10, 1000] {
        assert_relative_eq!(crb_lambda_f(&p, n, tc).unwrap().mse * (n - 1) as f64, c2, max_relative = 1e-13);
    }
    // the gap to the limit shrinks like 1/N
    let gap = |n: usize| {
        let tc = 50.0 / (n - 1) as f64;
        (
            rel(crb_lambda_f(&p, n, tc).unwrap().mse, crb_lambda_f_asymptote(&p, 50.0).unwrap().mse),
            rel(crb_lambda_n(&p, n, tc).unwrap().mse, crb_lambda_n_asymptote(&p, 50.0).unwrap().mse),
        )
    };
    let (f5, n5) = gap(100_000);
    let (f6, n6) = gap(1_000_000);
    assert!(f5 < 2e-3 && n5 < 2e-3);
    assert!((f5 / f6 - 10.0).abs() < 0.1 && (n5 / n6 - 10.0).abs() < 0.1);

    let half = params(0.5, 0.7);
    assert_eq!(fisher_lambda_n(&half, 9, tc).unwrap().value, fisher_lambda_f(&half, 9, tc).unwrap().value);
    let ratio = fisher_lambda_n(&p, 9, tc).unwrap().value / fisher_lambda_f(&p, 9, tc).unwrap().value;
    assert_relative_eq!(ratio, 0.09 / 0.49, max_relative = 1e-14);
}

#[test]
fn oracle_base_cases() {
    let p = params(0.35, 0.8);
    let tc = 0.6;
    let g = p.gamma(tc);
    let two = SampleSchedule::with_interval(2, tc).unwrap();
    let r = oracle_mse_enumeration(&p, &two, &mean, None).unwrap();
    assert_relative_eq!(r.mse, p.variance() * (1.0 + g) / 2.0, max_relative = 1e-13);

    let f = oracle_fisher_enumeration(&p, 2, tc, Parameter::LambdaF).unwrap();
    let u = p.u();
    let want = (g * tc).powi(2) * (1.0 - u) * (1.0 + g) / (u * (1.0 - g) * (g + u * (1.0 - g).powi(2) * (1.0 - u)));
    assert_relative_eq!(f.value, want, max_relative = 1e-6);

    for param in [Parameter::U, Parameter::LambdaF, Parameter::LambdaN] {
        let (_, score) = oracle_fisher_details(&p, 7, tc, param).unwrap();
        assert!(score.abs() < 1e-6, "{param:?}: {score}");
    }
}

#[test]
fn oracle_guards() {
    let p = params(0.3, 0.9);
    let s21 = SampleSchedule::with_interval(21, 0.1).unwrap();
    assert!(matches!(oracle_mse_enumeration(&p, &s21, &mean, None), Err(Error::Refused { .. })));
    let s11 = SampleSchedule::with_interval(11, 0.1).unwrap();
    assert!(matches!(oracle_joint_enumeration(&p, &s11, &mean, None), Err(Error::Refused { .. })));
    assert!(matches!(oracle_fisher_enumeration(&p, 13, 0.1, Parameter::U), Err(Error::Refused { .. })));
}

#[test]
fn time_reversal() {
    // reversing the schedule equals reversing the estimator's input
    let mut rng = seed::rng(23, &[]);
    for _ in 0..20 {
        let n = rng.gen_range(2..10);
        let p = params(rng.gen_range(0.05..0.95), rng.gen_range(0.1..2.0));
        let sched = SampleSchedule::new((0..n - 1).map(|_| rng.gen_range(0.0..2.0)).collect(), 0.0).unwrap();
        let coef: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = |b: &[bool]| b.iter().zip(&coef).map(|(&x, c)| if x { c * c } else { *c }).sum::<f64>();
        let f_rev = |b: &[bool]| {
            let r: Vec<bool> = b.iter().rev().copied().collect();
            f(&r)
        };
        let a = oracle_mse_enumeration(&p, &sched.reversed(), &f, None).unwrap().mse;
        let b = oracle_mse_enumeration(&p, &sched, &f_rev, None).unwrap().mse;
        assert!(rel(a, b) <= 1e-12);
        // and a symmetric estimator does not notice the reversal at all
        let a = oracle_mse_enumeration(&p, &sched.reversed(), &mean, None).unwrap().mse;
        let b = oracle_mse_enumeration(&p, &sched, &mean, None).unwrap().mse;
        assert!(rel(a, b) <= 1e-12);
    }
}

#[test]
fn optimal_weights_agree_with_oracle() {
    let p = params(0.3, 0.9);
    let (n, tc) = (8, 0.5);
    let w = optimal_weights(&p, n, tc).unwrap();
    let ws = w.as_slice().to_vec();
    let f = move |b: &[bool]| b.iter().zip(&ws).filter(|(&x, _)| x).map(|(_, w)| w).sum::<f64>();
    let sched = SampleSchedule::with_interval(n, tc).unwrap();
    let o = oracle_mse_enumeration(&p, &sched, &f, None).unwrap().mse;
    assert!(rel(mse_weighted(&p, n, tc, &w, None).unwrap().mse, o) <= 1e-12);
}

#[test]
fn joint_and_forward_oracles_agree() {
    let mut rng = seed::rng(24, &[]);
    for _ in 0..30 {
        let n = rng.gen_range(1..=8);
        let p = params(rng.gen_range(0.05..0.95), rng.gen_range(0.1..2.0));
        let sched = SampleSchedule::new((0..n - 1).map(|_| rng.gen_range(0.0..2.0)).collect(), 0.0).unwrap();
        let s = SensingModel::new(rng.gen_range(0.0..0.3), rng.gen_range(0.0..0.3)).unwrap();
        let corrected = |b: &[bool]| (mean(b) - s.p_f()) / s.gain();
        let a = oracle_mse_enumeration(&p, &sched, &corrected, Some(&s)).unwrap().mse;
        let b = oracle_joint_enumeration(&p, &sched, &corrected, Some(&s)).unwrap().mse;
        assert!(rel(a, b) <= 1e-11, "{a} {b}");
    }
}

#[test]
fn monotone_in_window_and_above_asymptote() {
    for &(u, lf) in &[(0.3, 0.4), (0.6, 0.9), (0.1, 2.0)] {
        let p = params(u, lf);
        for t in [1.0, 10.0, 50.0, 200.0] {
            // more samples in a fixed window help until the MSE reaches the
            // continuous-time limit; below it the sample mean can get worse
            let floor = mse_avg_uniform_asymptote(&p, t).unwrap().mse;
            let mut prev = f64::INFINITY;
            for n in 2..300 {
                let v = mse_avg_uniform(&p, n, t).unwrap().mse;
                if v > prev * (1.0 + 1e-14) {
                    assert!(prev < floor, "rise above the asymptote at N={n}");
                }
                prev = v;
            }
        }
        for n in [2, 10, 100] {
            let mut prev = f64::INFINITY;
            for k in 1..200 {
                let v = mse_avg_uniform(&p, n, k as f64 * 0.5).unwrap().mse;
                assert!(v <= prev * (1.0 + 1e-14));
                prev = v;
            }
        }
    }
}

#[test]
fn denser_uniform_sampling_can_hurt() {
    // strongly correlated samples in a short window: three samples beat four
    let p = params(0.3, 0.4);
    let avg = |b: &[bool]| b.iter().filter(|&&x| x).count() as f64 / b.len() as f64;
    let v3 = oracle_mse_enumeration(&p, &SampleSchedule::uniform(3, 1.0).unwrap(), &avg, None).unwrap().mse;
    let v4 = oracle_mse_enumeration(&p, &SampleSchedule::uniform(4, 1.0).unwrap(), &avg, None).unwrap().mse;
    assert!(v4 > v3);
    assert!(rel(v3, mse_avg_uniform(&p, 3, 1.0).unwrap().mse) <= 1e-12);
    assert!(rel(v4, mse_avg_uniform(&p, 4, 1.0).unwrap().mse) <= 1e-12);
}

#[test]
fn optimal_weighting_never_worse() {
    let mut rng = seed::rng(25, &[]);
    for _ in 0..500 {
        let p = params(rng.gen_range(0.02..0.98), rng.gen_range(0.05..3.0));
        let n = rng.gen_range(2..200);
        let tc = 10f64.powf(rng.gen_range(-3.0..1.5));
        let opt = mse_weighted_optimal(&p, n, tc, None).unwrap().mse;
        let uni = mse_avg_uniform(&p, n, tc * (n - 1) as f64).unwrap().mse;
        assert!(opt <= uni * (1.0 + 1e-12));
    }
}

/// Random configuration for the oracle properties.
fn config() -> impl Strategy<Value = (f64, f64, Vec<f64>)> {
    (0.05f64..0.95, 0.1f64..2.0, proptest::collection::vec(0.0f64..3.0, 0..12))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn averaging_matches_oracle((u, lf, iv) in config()) {
        let p = params(u, lf);
        let sched = SampleSchedule::new(iv, 0.0).unwrap();
        let o = oracle_mse_enumeration(&p, &sched, &mean, None).unwrap().mse;
        prop_assert!(rel(mse_avg(&p, &sched).mse, o) <= 1e-10);
    }

    #[test]
    fn corrected_matches_oracle((u, lf, iv) in config(), pf in 0.0f64..0.3, pm in 0.0f64..0.3) {
        let p = params(u, lf);
        let s = SensingModel::new(pf, pm).unwrap();
        let sched = SampleSchedule::new(iv, 0.0).unwrap();
        let est = |b: &[bool]| (mean(b) - pf) / s.gain();
        let o = oracle_mse_enumeration(&p, &sched, &est, Some(&s)).unwrap().mse;
        prop_assert!(rel(mse_avg_corrected(&p, &sched, &s).unwrap().mse, o) <= 1e-10);
    }

    #[test]
    fn sensing_penalty_nonnegative(u in 0.01f64..0.99, n in 1usize..1000, pf in 0.0f64..0.49, pm in 0.0f64..0.49) {
        let p = params(u, 1.0);
        prop_assert!(sensing_correction_term(&p, n, &SensingModel::new(pf, pm).unwrap()).unwrap() >= 0.0);
    }

    #[test]
    fn fisher_matches_oracle(u in 0.05f64..0.95, lf in 0.1f64..2.0, g in 0.01f64..0.95, n in 2usize..=10) {
        let p = params(u, lf);
        let tc = -g.ln() / p.decay_rate();
        let cf = fisher_u(&p, n, tc).unwrap().value;
        let o = oracle_fisher_enumeration(&p, n, tc, Parameter::U).unwrap().value;
        prop_assert!(rel(cf, o) <= 1e-6, "u: {} vs {}", cf, o);
        let cf = fisher_lambda_f(&p, n, tc).unwrap().value;
        let o = oracle_fisher_enumeration(&p, n, tc, Parameter::LambdaF).unwrap().value;
        prop_assert!(rel(cf, o) <= 1e-6, "lambda_f: {} vs {}", cf, o);
    }
}
