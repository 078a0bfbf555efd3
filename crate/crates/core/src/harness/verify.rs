//! Oracle-versus-closed-form verification suites.
//!
//! Each suite draws random configurations from a seed and reports the worst
//! discrepancy per check against its tolerance.

use std::fmt;

use rand::Rng;

use crate::accuracy::oracle::{oracle_fisher_enumeration, oracle_mse_enumeration};
use crate::accuracy::{
    fisher_lambda_f, fisher_u, mse_avg, mse_avg_corrected, mse_avg_uniform, mse_weighted, Parameter,
};
use crate::design::{kkt_residuals, mse_hessian, optimal_schedule, optimal_weights};
use crate::error::Result;
use crate::estimators::WeightVector;
use crate::seed;
use crate::traffic::{SampleSchedule, SensingModel, TrafficParams};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    /// Worst observed value of the checked quantity.
    pub worst: f64,
    pub tolerance: f64,
    pub cases: usize,
    pub passed: bool,
}

impl Check {
    fn new(name: &str, tolerance: f64) -> Self {
        Self { name: name.into(), worst: f64::NEG_INFINITY, tolerance, cases: 0, passed: true }
    }

    /// Record a value that must stay at or below the tolerance.
    fn at_most(&mut self, v: f64) {
        self.cases += 1;
        if !(v <= self.tolerance) {
            self.passed = false;
        }
        if v.is_nan() || v > self.worst {
            self.worst = v;
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: worst {:.3e} (tolerance {:.1e}, {} cases)",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.worst,
            self.tolerance,
            self.cases
        )
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn random_params(rng: &mut seed::Rng) -> Result<TrafficParams> {
    TrafficParams::from_u_lambda_f(rng.gen_range(0.05..0.95), rng.gen_range(0.05..2.0))
}

/// Intervals in [0, 2] with about one in ten exactly zero.
fn random_intervals(rng: &mut seed::Rng, n: usize) -> Vec<f64> {
    (1..n).map(|_| if rng.gen_bool(0.1) { 0.0 } else { rng.gen_range(0.0..2.0) }).collect()
}

fn mean(b: &[bool]) -> f64 {
    b.iter().filter(|&&x| x).count() as f64 / b.len() as f64
}

/// Closed-form MSEs of the averaging and weighted estimators against exact
/// enumeration, `configs` random configurations with `N <= max_n`.
pub fn oracle_suite(configs: usize, max_n: usize, seed_value: u64) -> Result<Vec<Check>> {
    let tol = 1e-10;
    let mut avg = Check::new("mse_avg vs enumeration", tol);
    let mut uni = Check::new("mse_avg_uniform vs enumeration", tol);
    let mut cor = Check::new("mse_avg_corrected vs enumeration", tol);
    let mut wgt = Check::new("mse_weighted vs enumeration", tol);
    let mut rng = seed::rng(seed_value, &[1]);
    for _ in 0..configs {
        let p = random_params(&mut rng)?;
        let n = rng.gen_range(2..=max_n.max(2));
        let s = SensingModel::new(rng.gen_range(0.0..0.2), rng.gen_range(0.0..0.2))?;
        let sched = SampleSchedule::new(random_intervals(&mut rng, n), 0.0)?;

        let exact = oracle_mse_enumeration(&p, &sched, &mean, None)?.mse;
        avg.at_most(rel(mse_avg(&p, &sched).mse, exact));

        let (pf, g) = (s.p_f(), s.gain());
        let corrected = move |b: &[bool]| (mean(b) - pf) / g;
        let exact = oracle_mse_enumeration(&p, &sched, &corrected, Some(&s))?.mse;
        cor.at_most(rel(mse_avg_corrected(&p, &sched, &s)?.mse, exact));

        let t = rng.gen_range(0.1..20.0);
        let u_sched = SampleSchedule::uniform(n, t)?;
        let exact = oracle_mse_enumeration(&p, &u_sched, &mean, None)?.mse;
        uni.at_most(rel(mse_avg_uniform(&p, n, t)?.mse, exact));

        let w = WeightVector::normalized((0..n).map(|_| rng.gen_range(0.05..1.0)).collect())?;
        let t_c = t / (n - 1) as f64;
        let ws = w.as_slice().to_vec();
        let weighted = |b: &[bool]| ws.iter().zip(b).filter(|(_, &x)| x).map(|(w, _)| w).sum::<f64>();
        let exact = oracle_mse_enumeration(&p, &u_sched, &weighted, None)?.mse;
        wgt.at_most(rel(mse_weighted(&p, n, t_c, &w, None)?.mse, exact));
        let weighted_c = |b: &[bool]| (weighted(b) - pf) / g;
        let exact = oracle_mse_enumeration(&p, &u_sched, &weighted_c, Some(&s))?.mse;
        wgt.at_most(rel(mse_weighted(&p, n, t_c, &w, Some(&s))?.mse, exact));
    }
    Ok(vec![avg, uni, cor, wgt])
}

/// Closed-form Fisher information against enumeration, `N <= max_n`.
pub fn fisher_suite(configs: usize, max_n: usize, seed_value: u64) -> Result<Vec<Check>> {
    let tol = 1e-6;
    let mut fu = Check::new("fisher_u vs enumeration", tol);
    let mut fl = Check::new("fisher_lambda_f vs enumeration", tol);
    let mut rng = seed::rng(seed_value, &[2]);
    for _ in 0..configs {
        let p = random_params(&mut rng)?;
        let n = rng.gen_range(2..=max_n.max(2));
        // spacing through the correlation it produces, kept away from 0 and 1
        let gamma: f64 = rng.gen_range(0.01..0.95);
        let t_c = -gamma.ln() / p.decay_rate();
        fu.at_most(rel(fisher_u(&p, n, t_c)?.value, oracle_fisher_enumeration(&p, n, t_c, Parameter::U)?.value));
        fl.at_most(rel(
            fisher_lambda_f(&p, n, t_c)?.value,
            oracle_fisher_enumeration(&p, n, t_c, Parameter::LambdaF)?.value,
        ));
    }
    Ok(vec![fu, fl])
}

/// A random point of the simplex `{T_n >= 0, Σ T_n = T}`, some coordinates zero.
pub fn random_feasible_schedule(rng: &mut seed::Rng, n: usize, t: f64) -> Result<SampleSchedule> {
    let mut x: Vec<f64> = (1..n).map(|_| if rng.gen_bool(0.2) { 0.0 } else { seed::exponential(rng, 1.0) }).collect();
    if x.iter().all(|&v| v == 0.0) {
        let i = rng.gen_range(0..x.len());
        x[i] = 1.0;
    }
    let sum: f64 = x.iter().sum();
    SampleSchedule::new(x.into_iter().map(|v| v * t / sum).collect(), 0.0)
}

/// Optimal schedule against random feasible schedules, optimal weights
/// against uniform weights, and the KKT residuals of the optimum.
pub fn design_suite(configs: usize, random_schedules: usize, max_n: usize, seed_value: u64) -> Result<Vec<Check>> {
    let mut sched = Check::new("optimal schedule minus best random schedule", 1e-9);
    let mut weights = Check::new("optimal weights minus uniform weights", 1e-12);
    let mut kkt = Check::new("KKT residuals of the optimal schedule", 1e-8);
    let mut rng = seed::rng(seed_value, &[3]);
    for _ in 0..configs {
        let p = TrafficParams::from_u_lambda_f(rng.gen_range(0.1..0.9), rng.gen_range(0.1..2.0))?;
        // with two samples the only feasible schedule is optimal
        let n = rng.gen_range(3..=max_n.max(3));
        let t = rng.gen_range(0.2..30.0);
        let opt = optimal_schedule(&p, n, t)?;
        let v_opt = mse_avg(&p, &opt.schedule).mse;
        let mut best = f64::INFINITY;
        for _ in 0..random_schedules {
            best = best.min(mse_avg(&p, &random_feasible_schedule(&mut rng, n, t)?).mse);
        }
        sched.at_most(v_opt - best);
        let k = kkt_residuals(&p, &opt.schedule);
        kkt.at_most(k.stationarity.max(k.slackness).max(-k.min_multiplier));

        let t_c = t / (n - 1) as f64;
        let w_opt = optimal_weights(&p, n, t_c)?;
        let v_w = mse_weighted(&p, n, t_c, &w_opt, None)?.mse;
        let v_u = mse_weighted(&p, n, t_c, &WeightVector::uniform(n)?, None)?.mse;
        weights.at_most(v_w - v_u);
    }
    Ok(vec![sched, weights, kkt])
}

/// Norm-scaled smallest Hessian eigenvalue over random draws.
pub fn hessian_suite(draws: usize, max_n: usize, seed_value: u64) -> Result<Vec<Check>> {
    let mut psd = Check::new("negated scaled min Hessian eigenvalue", 1e-9);
    let mut rng = seed::rng(seed_value, &[4]);
    for _ in 0..draws {
        let p = random_params(&mut rng)?;
        let n = rng.gen_range(3..=max_n.max(3));
        let sched = SampleSchedule::new(random_intervals(&mut rng, n), 0.0)?;
        psd.at_most(-mse_hessian(&p, &sched)?.scaled_min_eigenvalue());
    }
    Ok(vec![psd])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suites_pass() {
        for c in oracle_suite(20, 8, 1).unwrap() {
            assert!(c.passed, "{c}");
            assert_eq!(c.cases, if c.name.starts_with("mse_weighted") { 40 } else { 20 });
        }
        for c in fisher_suite(10, 8, 1).unwrap() {
            assert!(c.passed, "{c}");
        }
        for c in design_suite(5, 200, 6, 1).unwrap() {
            assert!(c.passed, "{c}");
        }
        for c in hessian_suite(50, 10, 1).unwrap() {
            assert!(c.passed, "{c}");
        }
    }

    #[test]
    fn check_flags_nan_and_excess() {
        let mut c = Check::new("x", 1.0);
        c.at_most(0.5);
        assert!(c.passed);
        c.at_most(f64::NAN);
        assert!(!c.passed);
        let mut c = Check::new("y", 1.0);
        c.at_most(2.0);
        assert!(!c.passed && c.worst == 2.0);
        assert!(c.to_string().starts_with("FAIL y"));
    }

    #[test]
    fn feasible_schedules_sum_to_window() {
        let mut rng = seed::rng(5, &[]);
        for n in 2..10 {
            let s = random_feasible_schedule(&mut rng, n, 7.5).unwrap();
            assert!((s.window() - 7.5).abs() < 1e-12);
            assert!(s.intervals().iter().all(|&x| x >= 0.0));
        }
    }
}
