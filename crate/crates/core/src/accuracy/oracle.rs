//! Brute-force oracles: exact enumeration over every possible sample
//! sequence. They share no algebra with the closed forms they check.

use crate::accuracy::{ErrorReport, ErrorSource, FisherInfo, Parameter};
use crate::error::{domain, Error, Result};
use crate::traffic::{transition_prob, SampleSchedule, SensingModel, TrafficParams};

/// Largest `N` accepted by the sequence enumerations.
pub const MAX_ENUMERATION_N: usize = 20;
/// Largest `N` accepted by the joint (state and error pattern) enumeration.
pub const MAX_JOINT_N: usize = 10;
/// Largest `N` accepted by the Fisher-information enumeration.
pub const MAX_FISHER_N: usize = 12;
/// Central-difference step of the Fisher oracle.
pub const FISHER_STEP: f64 = 1e-6;

fn guard(what: &'static str, n: usize, max: usize) -> Result<()> {
    if n > max {
        return Err(Error::Refused { what, n, max });
    }
    Ok(())
}

type Matrix = [[f64; 2]; 2];

fn transition_matrix(p: &TrafficParams, t: f64) -> Result<Matrix> {
    Ok([
        [transition_prob(false, false, t, p)?, transition_prob(false, true, t, p)?],
        [transition_prob(true, false, t, p)?, transition_prob(true, true, t, p)?],
    ])
}

fn stationary(p: &TrafficParams) -> [f64; 2] {
    [1.0 - p.u(), p.u()]
}

struct Dfs<'a> {
    init: [f64; 2],
    mats: Vec<Matrix>,
    emit: [[f64; 2]; 2],
    estimator: &'a dyn Fn(&[bool]) -> f64,
    truth: f64,
    bits: Vec<bool>,
    acc: f64,
    total_prob: f64,
}

impl Dfs<'_> {
    /// `alpha[x]` is the probability of the observed prefix with hidden state `x` now.
    fn walk(&mut self, depth: usize, alpha: [f64; 2]) {
        let n = self.mats.len() + 1;
        for obs in [false, true] {
            let o = usize::from(obs);
            let next = if depth == 0 {
                [self.init[0] * self.emit[0][o], self.init[1] * self.emit[1][o]]
            } else {
                let m = &self.mats[depth - 1];
                [
                    (alpha[0] * m[0][0] + alpha[1] * m[1][0]) * self.emit[0][o],
                    (alpha[0] * m[0][1] + alpha[1] * m[1][1]) * self.emit[1][o],
                ]
            };
            if next[0] + next[1] == 0.0 {
                continue;
            }
            self.bits.push(obs);
            if depth + 1 == n {
                let prob = next[0] + next[1];
                let err = (self.estimator)(&self.bits) - self.truth;
                self.acc += prob * err * err;
                self.total_prob += prob;
            } else {
                self.walk(depth + 1, next);
            }
            self.bits.pop();
        }
    }
}

fn emission_table(s: Option<&SensingModel>) -> [[f64; 2]; 2] {
    let s = s.copied().unwrap_or_else(SensingModel::perfect);
    [
        [s.emission(false, false), s.emission(false, true)],
        [s.emission(true, false), s.emission(true, true)],
    ]
}

/// Exact MSE of any estimator of `u`, by enumerating all `2^N` observable
/// sequences; with a sensing model the probability of each observed
/// sequence sums over the hidden states.
pub fn oracle_mse_enumeration(
    p: &TrafficParams,
    sched: &SampleSchedule,
    estimator: &dyn Fn(&[bool]) -> f64,
    s: Option<&SensingModel>,
) -> Result<ErrorReport> {
    let n = sched.n();
    guard("MSE enumeration", n, MAX_ENUMERATION_N)?;
    let mats = sched.intervals().iter().map(|&t| transition_matrix(p, t)).collect::<Result<Vec<_>>>()?;
    let mut dfs = Dfs {
        init: stationary(p),
        mats,
        emit: emission_table(s),
        estimator,
        truth: p.u(),
        bits: Vec::with_capacity(n),
        acc: 0.0,
        total_prob: 0.0,
    };
    dfs.walk(0, [0.0, 0.0]);
    debug_assert!((dfs.total_prob - 1.0).abs() < 1e-9);
    Ok(ErrorReport::new(dfs.acc, ErrorSource::OracleEnumeration, format!("u={} N={n} enumeration", p.u())))
}

fn sequence_prob(bits: &[bool], init: &[f64; 2], mats: &[Matrix]) -> f64 {
    let mut prob = init[usize::from(bits[0])];
    for (k, w) in bits.windows(2).enumerate() {
        prob *= mats[k][usize::from(w[0])][usize::from(w[1])];
    }
    prob
}

fn bits_of(mask: u32, n: usize) -> Vec<bool> {
    (0..n).map(|i| mask >> i & 1 == 1).collect()
}

/// Exact MSE by enumerating every pair of (true sequence, error pattern):
/// `4^N` terms. A slower second oracle for cross-checking the first.
pub fn oracle_joint_enumeration(
    p: &TrafficParams,
    sched: &SampleSchedule,
    estimator: &dyn Fn(&[bool]) -> f64,
    s: Option<&SensingModel>,
) -> Result<ErrorReport> {
    let n = sched.n();
    guard("joint enumeration", n, MAX_JOINT_N)?;
    let s = s.copied().unwrap_or_else(SensingModel::perfect);
    let mats = sched.intervals().iter().map(|&t| transition_matrix(p, t)).collect::<Result<Vec<_>>>()?;
    let init = stationary(p);
    let mut acc = 0.0;
    for zm in 0..(1u32 << n) {
        let z = bits_of(zm, n);
        let pz = sequence_prob(&z, &init, &mats);
        for em in 0..(1u32 << n) {
            let flips = bits_of(em, n);
            let mut pe = 1.0;
            let mut obs = Vec::with_capacity(n);
            for (&zi, &fi) in z.iter().zip(&flips) {
                let flip_p = if zi { s.p_m() } else { s.p_f() };
                pe *= if fi { flip_p } else { 1.0 - flip_p };
                obs.push(zi ^ fi);
            }
            if pe == 0.0 {
                continue;
            }
            let err = estimator(&obs) - p.u();
            acc += pz * pe * err * err;
        }
    }
    Ok(ErrorReport::new(acc, ErrorSource::OracleEnumeration, format!("u={} N={n} joint enumeration", p.u())))
}

/// Likelihood of an observed sequence as an explicit sum over all `2^N`
/// hidden sequences, each weighted by the error-channel probability
/// `Pf^m1 (1-Pf)^m0 Pm^m2 (1-Pm)^m3` of its false alarms, correct
/// rejections, mis-detections and detections.
pub fn enumerate_sensed_likelihood(
    observed: &[bool],
    p: &TrafficParams,
    sched: &SampleSchedule,
    s: &SensingModel,
) -> Result<f64> {
    let n = observed.len();
    if n != sched.n() {
        return domain(format!("{n} observations for a schedule of {} samples", sched.n()));
    }
    guard("likelihood enumeration", n, MAX_ENUMERATION_N)?;
    let mats = sched.intervals().iter().map(|&t| transition_matrix(p, t)).collect::<Result<Vec<_>>>()?;
    let init = stationary(p);
    let mut total = 0.0;
    for zm in 0..(1u32 << n) {
        let z = bits_of(zm, n);
        let (mut m0, mut m1, mut m2, mut m3) = (0, 0, 0, 0);
        for (&zi, &oi) in z.iter().zip(observed) {
            match (zi, oi) {
                (false, false) => m0 += 1,
                (false, true) => m1 += 1,
                (true, false) => m2 += 1,
                (true, true) => m3 += 1,
            }
        }
        let channel = s.p_f().powi(m1) * (1.0 - s.p_f()).powi(m0) * s.p_m().powi(m2) * (1.0 - s.p_m()).powi(m3);
        if channel == 0.0 {
            continue;
        }
        total += sequence_prob(&z, &init, &mats) * channel;
    }
    Ok(total)
}

fn perturbed(p: &TrafficParams, param: Parameter, delta: f64) -> Result<TrafficParams> {
    match param {
        Parameter::U => TrafficParams::from_u_lambda_f(p.u() + delta, p.lambda_f()),
        Parameter::LambdaF => TrafficParams::from_u_lambda_f(p.u(), p.lambda_f() + delta),
        Parameter::LambdaN => TrafficParams::from_u_lambda_n(p.u(), p.lambda_n() + delta),
    }
}

fn log_tables(p: &TrafficParams, t_c: f64) -> Result<([f64; 2], Matrix)> {
    let m = transition_matrix(p, t_c)?;
    let init = stationary(p);
    Ok(([init[0].ln(), init[1].ln()], [[m[0][0].ln(), m[0][1].ln()], [m[1][0].ln(), m[1][1].ln()]]))
}

fn seq_loglik(bits: &[bool], t: &([f64; 2], Matrix)) -> f64 {
    let mut l = t.0[usize::from(bits[0])];
    for w in bits.windows(2) {
        l += t.1[usize::from(w[0])][usize::from(w[1])];
    }
    l
}

/// Exact Fisher information and mean score, differentiating the enumerated
/// log-likelihoods by central differences.
pub fn oracle_fisher_details(p: &TrafficParams, n: usize, t_c: f64, param: Parameter) -> Result<(FisherInfo, f64)> {
    guard("Fisher enumeration", n, MAX_FISHER_N)?;
    if n < 1 {
        return domain("need at least one sample");
    }
    if !(t_c > 0.0) {
        return domain(format!("sample spacing must be > 0, got {t_c}"));
    }
    let h = FISHER_STEP;
    let center = log_tables(p, t_c)?;
    let plus = log_tables(&perturbed(p, param, h)?, t_c)?;
    let minus = log_tables(&perturbed(p, param, -h)?, t_c)?;
    let (mut info, mut mean_score) = (0.0, 0.0);
    for mask in 0..(1u32 << n) {
        let z = bits_of(mask, n);
        let prob = seq_loglik(&z, &center).exp();
        let score = (seq_loglik(&z, &plus) - seq_loglik(&z, &minus)) / (2.0 * h);
        info += prob * score * score;
        mean_score += prob * score;
    }
    Ok((FisherInfo { value: info, parameter: param }, mean_score))
}

/// Exact Fisher information by enumeration (see [`oracle_fisher_details`]).
pub fn oracle_fisher_enumeration(p: &TrafficParams, n: usize, t_c: f64, param: Parameter) -> Result<FisherInfo> {
    oracle_fisher_details(p, n, t_c, param).map(|(f, _)| f)
}
