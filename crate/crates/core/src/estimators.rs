//! Point estimators of the duty cycle and the sojourn rates.

use std::fmt;

use crate::error::{domain, Error, Result};
use crate::optimize::grid_then_golden;
use crate::traffic::{transition_prob_unchecked, SampleStream, SensingModel, TrafficParams};

/// Which estimator produced an [`Estimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorId {
    Average,
    AverageCorrected,
    Weighted,
    WeightedCorrected,
    MlU,
    MlUNoisy,
    MlLambdaF,
    MlLambdaN,
    MlRateNoisy,
}

impl fmt::Display for EstimatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EstimatorId::Average => "avg",
            EstimatorId::AverageCorrected => "avg_corrected",
            EstimatorId::Weighted => "weighted",
            EstimatorId::WeightedCorrected => "weighted_corrected",
            EstimatorId::MlU => "ml_u",
            EstimatorId::MlUNoisy => "ml_u_noisy",
            EstimatorId::MlLambdaF => "ml_lambda_f",
            EstimatorId::MlLambdaN => "ml_lambda_n",
            EstimatorId::MlRateNoisy => "ml_rate_noisy",
        };
        f.write_str(s)
    }
}

/// A point estimate.
///
/// `value` is clamped to the parameter's range; `raw` keeps the unclamped
/// value for error statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub raw: f64,
    pub estimator: EstimatorId,
    pub converged: bool,
    pub log_likelihood: Option<f64>,
}

impl Estimate {
    fn exact(value: f64, estimator: EstimatorId) -> Self {
        Self { value, raw: value, estimator, converged: true, log_likelihood: None }
    }

    fn duty(raw: f64, estimator: EstimatorId) -> Self {
        Self { value: raw.clamp(0.0, 1.0), raw, estimator, converged: true, log_likelihood: None }
    }
}

/// Normalized sample weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    weights: Vec<f64>,
}

impl WeightVector {
    /// Accepts weights summing to one within 1e-12.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return domain("weight vector is empty");
        }
        let sum: f64 = weights.iter().sum();
        if !((sum - 1.0).abs() <= 1e-12) {
            return domain(format!("weights must sum to 1, got {sum}"));
        }
        Ok(Self { weights })
    }

    /// Rescale arbitrary positive-sum weights.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum.is_finite() && sum != 0.0) {
            return domain(format!("cannot normalize weights with sum {sum}"));
        }
        Self::new(weights.into_iter().map(|w| w / sum).collect())
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return domain("weight vector is empty");
        }
        Ok(Self { weights: vec![1.0 / n as f64; n] })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

fn check_sensed_use(stream: &SampleStream, s: &SensingModel) -> Result<()> {
    s.check_correctable()?;
    if !stream.is_sensed() && !s.is_perfect() {
        return domain("bias correction for sensing errors needs a sensed stream");
    }
    Ok(())
}

/// Sample mean of the bits.
pub fn avg_estimate(stream: &SampleStream) -> Result<Estimate> {
    if stream.is_empty() {
        return domain("cannot average an empty stream");
    }
    Ok(Estimate::exact(stream.ones() as f64 / stream.len() as f64, EstimatorId::Average))
}

/// Sample mean corrected for the sensing-error bias, clamped to [0, 1].
pub fn avg_estimate_corrected(stream: &SampleStream, s: &SensingModel) -> Result<Estimate> {
    check_sensed_use(stream, s)?;
    let mean = avg_estimate(stream)?.value;
    if s.is_perfect() {
        return Ok(Estimate::exact(mean, EstimatorId::AverageCorrected));
    }
    Ok(Estimate::duty((mean - s.p_f()) / s.gain(), EstimatorId::AverageCorrected))
}

/// Weighted mean, bias-corrected when a sensing model is given.
pub fn weighted_estimate(stream: &SampleStream, w: &WeightVector, s: Option<&SensingModel>) -> Result<Estimate> {
    if w.len() != stream.len() {
        return domain(format!("{} weights for {} samples", w.len(), stream.len()));
    }
    let sum: f64 = w.as_slice().iter().zip(stream.values()).filter(|(_, &z)| z).map(|(w, _)| w).sum();
    match s {
        None => Ok(Estimate::exact(sum, EstimatorId::Weighted)),
        Some(s) => {
            check_sensed_use(stream, s)?;
            if s.is_perfect() {
                return Ok(Estimate::exact(sum, EstimatorId::WeightedCorrected));
            }
            Ok(Estimate::duty((sum - s.p_f()) / s.gain(), EstimatorId::WeightedCorrected))
        }
    }
}

/// Counts of adjacent-sample transitions 0→0, 0→1, 1→0, 1→1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TransitionCounts {
    pub n0: u64,
    pub n1: u64,
    pub n2: u64,
    pub n3: u64,
    pub first_sample: bool,
    last: bool,
}

impl TransitionCounts {
    /// Counts for a stream that so far holds only `first`.
    pub fn start(first: bool) -> Self {
        Self { first_sample: first, last: first, ..Self::default() }
    }

    /// Counts from explicit values; `last_sample` is needed for later pushes.
    pub fn from_parts(n0: u64, n1: u64, n2: u64, n3: u64, first_sample: bool) -> Self {
        Self { n0, n1, n2, n3, first_sample, last: first_sample }
    }

    /// Append the next sample.
    pub fn push(&mut self, bit: bool) {
        match (self.last, bit) {
            (false, false) => self.n0 += 1,
            (false, true) => self.n1 += 1,
            (true, false) => self.n2 += 1,
            (true, true) => self.n3 += 1,
        }
        self.last = bit;
    }

    /// Number of samples the counts describe.
    pub fn n(&self) -> u64 {
        self.n0 + self.n1 + self.n2 + self.n3 + 1
    }

    pub fn switches(&self) -> u64 {
        self.n1 + self.n2
    }
}

/// Transition counts of a uniformly sampled stream.
///
/// A single-sample stream is accepted and has all counts zero.
pub fn count_transitions(stream: &SampleStream) -> Result<TransitionCounts> {
    let bits = stream.values();
    let Some((&first, rest)) = bits.split_first() else {
        return domain("cannot count transitions of an empty stream");
    };
    if bits.len() >= 3 && stream.schedule().uniform_interval().is_none() {
        return domain("transition counts need a uniform schedule");
    }
    let mut c = TransitionCounts::start(first);
    for &b in rest {
        c.push(b);
    }
    Ok(c)
}

fn ln_term(count: u64, p: f64) -> f64 {
    if count == 0 {
        0.0
    } else {
        count as f64 * p.ln()
    }
}

fn log_likelihood_params(c: &TransitionCounts, p: &TrafficParams, t_c: f64) -> f64 {
    let u = p.u();
    let pr = |x, y| transition_prob_unchecked(x, y, t_c, p);
    let first = if c.first_sample { u.ln() } else { (1.0 - u).ln() };
    first
        + ln_term(c.n0, pr(false, false))
        + ln_term(c.n1, pr(false, true))
        + ln_term(c.n2, pr(true, false))
        + ln_term(c.n3, pr(true, true))
}

/// Log-likelihood of the counts for a candidate duty cycle, `lambda_f` known.
///
/// Candidates outside (0, 1) give negative infinity.
pub fn log_likelihood_u(counts: &TransitionCounts, u_cand: f64, lambda_f: f64, t_c: f64) -> Result<f64> {
    if !(lambda_f > 0.0 && t_c >= 0.0) {
        return domain(format!("need lambda_f > 0 and t_c >= 0, got {lambda_f}, {t_c}"));
    }
    if !(u_cand > 0.0 && u_cand < 1.0) {
        return Ok(f64::NEG_INFINITY);
    }
    let p = TrafficParams::from_u_lambda_f(u_cand, lambda_f)?;
    Ok(log_likelihood_params(counts, &p, t_c))
}

fn duty_grid() -> Vec<f64> {
    (1..100).map(|i| i as f64 / 100.0).collect()
}

const U_TOL: f64 = 1e-9;
const U_LO: f64 = 1e-12;

fn check_uniform(stream: &SampleStream, t_c: f64) -> Result<()> {
    if !(t_c > 0.0 && t_c.is_finite()) {
        return domain(format!("sample spacing must be finite and > 0, got {t_c}"));
    }
    if let Some(tc) = stream.schedule().uniform_interval() {
        if (tc - t_c).abs() > 1e-9 * t_c {
            return domain(format!("stream spacing {tc} differs from the given t_c = {t_c}"));
        }
    } else if stream.len() >= 2 {
        return domain("maximum likelihood estimation needs a uniform schedule");
    }
    Ok(())
}

/// Maximum-likelihood duty cycle under perfect sensing.
///
/// Streams without a single 0 (or 1) have a monotone likelihood; they yield
/// the boundary value with `converged = false`.
pub fn ml_estimate_u(stream: &SampleStream, lambda_f: f64, t_c: f64) -> Result<Estimate> {
    check_uniform(stream, t_c)?;
    let counts = count_transitions(stream)?;
    ml_u_from_counts(&counts, lambda_f, t_c)
}

pub(crate) fn ml_u_from_counts(counts: &TransitionCounts, lambda_f: f64, t_c: f64) -> Result<Estimate> {
    if !(lambda_f > 0.0) {
        return domain(format!("lambda_f must be > 0, got {lambda_f}"));
    }
    let all_zero = counts.n1 + counts.n2 + counts.n3 == 0 && !counts.first_sample;
    let all_one = counts.n0 + counts.n1 + counts.n2 == 0 && counts.first_sample;
    if all_zero || all_one {
        let v = if all_one { 1.0 } else { 0.0 };
        return Ok(Estimate { value: v, raw: v, estimator: EstimatorId::MlU, converged: false, log_likelihood: None });
    }
    let ll = |u: f64| log_likelihood_u(counts, u, lambda_f, t_c).unwrap_or(f64::NEG_INFINITY);
    let r = grid_then_golden(ll, &duty_grid(), U_LO, 1.0 - U_LO, U_TOL);
    Ok(Estimate { value: r.x, raw: r.x, estimator: EstimatorId::MlU, converged: true, log_likelihood: Some(r.fx) })
}

/// Log-likelihood of observed (possibly erroneous) bits by the forward
/// recursion over the hidden two-state chain.
pub fn forward_log_likelihood(bits: &[bool], p: &TrafficParams, t_c: f64, s: &SensingModel) -> f64 {
    let Some((&first, rest)) = bits.split_first() else {
        return 0.0;
    };
    let u = p.u();
    let pr = [
        [transition_prob_unchecked(false, false, t_c, p), transition_prob_unchecked(false, true, t_c, p)],
        [transition_prob_unchecked(true, false, t_c, p), transition_prob_unchecked(true, true, t_c, p)],
    ];
    let e = |truth: bool, obs: bool| s.emission(truth, obs);
    let mut a0 = (1.0 - u) * e(false, first);
    let mut a1 = u * e(true, first);
    let mut log_scale = 0.0;
    let mut norm = a0 + a1;
    for &z in rest {
        // rescale every step; the log of the scales accumulates the likelihood
        if norm <= 0.0 {
            return f64::NEG_INFINITY;
        }
        log_scale += norm.ln();
        a0 /= norm;
        a1 /= norm;
        let b0 = (a0 * pr[0][0] + a1 * pr[1][0]) * e(false, z);
        let b1 = (a0 * pr[0][1] + a1 * pr[1][1]) * e(true, z);
        a0 = b0;
        a1 = b1;
        norm = a0 + a1;
    }
    if norm <= 0.0 {
        return f64::NEG_INFINITY;
    }
    log_scale + norm.ln()
}

/// Maximum-likelihood duty cycle from sensed bits.
///
/// Perfect sensing dispatches to [`ml_estimate_u`], so both give identical
/// values. A coarse optimum on the edge of the grid sets `converged = false`.
pub fn ml_estimate_u_noisy(stream: &SampleStream, lambda_f: f64, t_c: f64, s: &SensingModel) -> Result<Estimate> {
    if s.is_perfect() {
        let e = ml_estimate_u(stream, lambda_f, t_c)?;
        return Ok(Estimate { estimator: EstimatorId::MlUNoisy, ..e });
    }
    check_uniform(stream, t_c)?;
    if !(lambda_f > 0.0) {
        return domain(format!("lambda_f must be > 0, got {lambda_f}"));
    }
    if stream.is_empty() {
        return domain("empty stream");
    }
    let bits = stream.values();
    let ll = |u: f64| match TrafficParams::from_u_lambda_f(u, lambda_f) {
        Ok(p) => forward_log_likelihood(bits, &p, t_c, s),
        Err(_) => f64::NEG_INFINITY,
    };
    let r = grid_then_golden(ll, &duty_grid(), U_LO, 1.0 - U_LO, U_TOL);
    let pinned = r.at_edge && (r.x < 0.01 || r.x > 0.99);
    Ok(Estimate {
        value: r.x,
        raw: r.x,
        estimator: EstimatorId::MlUNoisy,
        converged: !pinned,
        log_likelihood: Some(r.fx),
    })
}

/// Closed-form maximum-likelihood `lambda_f` with the duty cycle known.
///
/// Counts without any switch give the boundary estimate 0 (`converged =
/// false`); counts for which the quadratic has no admissible root are
/// reported as [`Error::NoSolution`].
pub fn ml_estimate_lambda_f(counts: &TransitionCounts, u: f64, t_c: f64) -> Result<Estimate> {
    if !(u > 0.0 && u < 1.0) {
        return domain(format!("known duty cycle must lie in (0, 1), got {u}"));
    }
    if !(t_c > 0.0 && t_c.is_finite()) {
        return domain(format!("sample spacing must be finite and > 0, got {t_c}"));
    }
    let m = counts.n() - 1;
    if m == 0 {
        return domain("rate estimation needs N >= 2");
    }
    if counts.switches() == 0 {
        return Ok(Estimate { value: 0.0, raw: 0.0, estimator: EstimatorId::MlLambdaF, converged: false, log_likelihood: None });
    }
    let gamma = ml_gamma_closed_form(counts, u)?;
    let lf = -(u / t_c) * gamma.ln();
    Ok(Estimate::exact(lf, EstimatorId::MlLambdaF))
}

/// Root in Γ of the score equation, from the quadratic `A Γ² + B Γ + C = 0`.
fn ml_gamma_closed_form(c: &TransitionCounts, u: f64) -> Result<f64> {
    let m = (c.n() - 1) as f64;
    let (n0, n3) = (c.n0 as f64, c.n3 as f64);
    let a = (u - u * u) * m;
    let b = -2.0 * a + m - (1.0 - u) * n0 - u * n3;
    let cc = a - u * n0 - (1.0 - u) * n3;
    let disc = b * b - 4.0 * a * cc;
    if !(disc >= 0.0) {
        return Err(Error::NoSolution(format!(
            "negative discriminant for counts ({}, {}, {}, {})",
            c.n0, c.n1, c.n2, c.n3
        )));
    }
    let sq = disc.sqrt();
    // (-B + sqrt(D)) / 2A, in the form that avoids cancellation
    let g = if b >= 0.0 { 2.0 * cc / (-b - sq) } else { (-b + sq) / (2.0 * a) };
    if !(g > 0.0 && g < 1.0) {
        return Err(Error::NoSolution(format!(
            "correlation root {g} outside (0, 1) for counts ({}, {}, {}, {})",
            c.n0, c.n1, c.n2, c.n3
        )));
    }
    Ok(g)
}

/// Maximum-likelihood `lambda_n`, obtained as `(1-u) lambda_f / u`.
pub fn ml_estimate_lambda_n(counts: &TransitionCounts, u: f64, t_c: f64) -> Result<Estimate> {
    let lf = ml_estimate_lambda_f(counts, u, t_c)?;
    let ln = (1.0 - u) * lf.value / u;
    Ok(Estimate { value: ln, raw: ln, estimator: EstimatorId::MlLambdaN, ..lf })
}

/// Which rate the noisy ML search reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rate {
    LambdaF,
    LambdaN,
}

/// Search interval and grid density of the noisy rate ML.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSearch {
    pub lo: f64,
    pub hi: f64,
    pub grid_points: usize,
}

impl Default for RateSearch {
    fn default() -> Self {
        Self { lo: 0.01, hi: 100.0, grid_points: 120 }
    }
}

/// Maximum-likelihood rate from sensed bits with the duty cycle known.
///
/// The log-likelihood is maximized over a log-spaced grid on the search
/// interval and refined by golden section in log-rate. An optimum pinned to
/// the interval edge sets `converged = false`. Perfect sensing dispatches to
/// the closed form.
pub fn ml_estimate_rates_noisy(
    stream: &SampleStream,
    u: f64,
    t_c: f64,
    s: &SensingModel,
    rate: Rate,
    search: &RateSearch,
) -> Result<Estimate> {
    check_uniform(stream, t_c)?;
    if s.is_perfect() {
        let counts = count_transitions(stream)?;
        let e = match rate {
            Rate::LambdaF => ml_estimate_lambda_f(&counts, u, t_c)?,
            Rate::LambdaN => ml_estimate_lambda_n(&counts, u, t_c)?,
        };
        return Ok(Estimate { estimator: EstimatorId::MlRateNoisy, ..e });
    }
    if !(u > 0.0 && u < 1.0) {
        return domain(format!("known duty cycle must lie in (0, 1), got {u}"));
    }
    if !(search.lo > 0.0 && search.hi > search.lo && search.grid_points >= 3) {
        return domain("rate search needs 0 < lo < hi and at least 3 grid points");
    }
    if stream.len() < 2 {
        return domain("rate estimation needs N >= 2");
    }
    // search in the requested rate; lambda_f = u lambda_n / (1-u)
    let to_lf = match rate {
        Rate::LambdaF => 1.0,
        Rate::LambdaN => u / (1.0 - u),
    };
    let bits = stream.values();
    let ll = |log_rate: f64| match TrafficParams::from_u_lambda_f(u, log_rate.exp() * to_lf) {
        Ok(p) => forward_log_likelihood(bits, &p, t_c, s),
        Err(_) => f64::NEG_INFINITY,
    };
    let (a, b) = (search.lo.ln(), search.hi.ln());
    let k = search.grid_points;
    let grid: Vec<f64> = (0..k).map(|i| a + (b - a) * i as f64 / (k - 1) as f64).collect();
    let r = grid_then_golden(ll, &grid, a, b, 1e-10);
    let pinned = r.at_edge && ((r.x - a).abs() < 1e-6 || (r.x - b).abs() < 1e-6);
    let value = r.x.exp();
    Ok(Estimate {
        value,
        raw: value,
        estimator: EstimatorId::MlRateNoisy,
        converged: !pinned,
        log_likelihood: Some(r.fx),
    })
}

/// Score of the log-likelihood in Γ for known `u`; zero at the ML estimate.
pub fn lambda_score_in_gamma(c: &TransitionCounts, u: f64, gamma: f64) -> f64 {
    let pr00 = 1.0 - u + u * gamma;
    let pr11 = u + (1.0 - u) * gamma;
    c.n0 as f64 * u / pr00 - (c.n1 + c.n2) as f64 / (1.0 - gamma) + c.n3 as f64 * (1.0 - u) / pr11
}

/// Maximize a log-likelihood in u over (0,1) on a fine grid (test helper).
#[doc(hidden)]
pub fn brute_grid_argmax(f: impl Fn(f64) -> f64, step: f64) -> f64 {
    let n = (1.0 / step).round() as usize;
    let (mut best, mut best_f) = (f64::NAN, f64::NEG_INFINITY);
    for i in 1..n {
        let x = i as f64 * step;
        let fx = f(x);
        if fx > best_f {
            best = x;
            best_f = fx;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::accuracy::oracle::enumerate_sensed_likelihood;
    use crate::seed;
    use crate::traffic::{corrupt, generate_trajectory, sample_trajectory, SampleSchedule};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn stream(bits: &[u8]) -> SampleStream {
        SampleStream::uniform(bits.iter().map(|&b| b == 1).collect(), 1.0).unwrap()
    }

    fn params(u: f64, lf: f64) -> TrafficParams {
        TrafficParams::from_u_lambda_f(u, lf).unwrap()
    }

    fn simulate(p: &TrafficParams, n: usize, t: f64, seed: u64) -> SampleStream {
        let sched = SampleSchedule::uniform(n, t).unwrap();
        let traj = generate_trajectory(p, t + 1.0, seed).unwrap();
        sample_trajectory(&traj, &sched).unwrap()
    }

    #[test]
    fn averaging_basics() {
        assert_eq!(avg_estimate(&stream(&[1; 10])).unwrap().value, 1.0);
        assert_eq!(avg_estimate(&stream(&[1, 0, 1, 0])).unwrap().value, 0.5);
        let sensed = stream(&[1, 0, 1, 0]).into_sensed();
        assert_eq!(
            avg_estimate_corrected(&sensed, &SensingModel::perfect()).unwrap().value,
            avg_estimate(&sensed).unwrap().value
        );
        // mean 0.28 from 25 samples with 7 ones
        let mut bits = vec![0u8; 25];
        bits[..7].fill(1);
        let s = stream(&bits).into_sensed();
        let e = avg_estimate_corrected(&s, &SensingModel::new(0.1, 0.1).unwrap()).unwrap();
        assert_relative_eq!(e.value, 0.225, max_relative = 1e-14);
        assert!(avg_estimate_corrected(&s, &SensingModel::new(0.5, 0.5).unwrap()).is_err());
        assert!(avg_estimate_corrected(&stream(&[1]), &SensingModel::new(0.1, 0.1).unwrap()).is_err());
        // clamping keeps raw
        let s = stream(&[0, 0, 0, 0]).into_sensed();
        let e = avg_estimate_corrected(&s, &SensingModel::new(0.1, 0.1).unwrap()).unwrap();
        assert_eq!(e.value, 0.0);
        assert_relative_eq!(e.raw, -0.125, max_relative = 1e-14);
    }

    #[test]
    fn weighted_basics() {
        let s = stream(&[1, 0, 1, 1, 0]);
        let w = WeightVector::uniform(5).unwrap();
        assert_relative_eq!(
            weighted_estimate(&s, &w, None).unwrap().value,
            avg_estimate(&s).unwrap().value,
            max_relative = 1e-15
        );
        assert!(weighted_estimate(&s, &WeightVector::uniform(4).unwrap(), None).is_err());
        assert!(WeightVector::new(vec![0.5, 0.6]).is_err());
        let sensed = s.clone().into_sensed();
        assert!(weighted_estimate(&sensed, &w, Some(&SensingModel::new(0.3, 0.7).unwrap())).is_err());
        let e = weighted_estimate(&sensed, &w, Some(&SensingModel::new(0.1, 0.2).unwrap())).unwrap();
        assert_relative_eq!(e.raw, (0.6 - 0.1) / 0.7, max_relative = 1e-14);
    }

    #[test]
    fn transition_counting() {
        let c = count_transitions(&stream(&[0, 0, 1, 1])).unwrap();
        assert_eq!((c.n0, c.n1, c.n2, c.n3), (1, 1, 0, 1));
        let c = count_transitions(&stream(&[0; 5])).unwrap();
        assert_eq!((c.n0, c.n1, c.n2, c.n3), (4, 0, 0, 0));
        let mut rng = seed::rng(1, &[]);
        let bits: Vec<u8> = (0..10_000).map(|_| rng.gen_range(0..2)).collect();
        let c = count_transitions(&stream(&bits)).unwrap();
        assert_eq!(c.n0 + c.n1 + c.n2 + c.n3, 9_999);
        assert!(c.n1.abs_diff(c.n2) <= 1);
        let nonuniform = SampleStream::new(
            vec![true, false, true],
            SampleSchedule::new(vec![1.0, 2.0], 0.0).unwrap(),
            false,
        )
        .unwrap();
        assert!(count_transitions(&nonuniform).is_err());
    }

    #[test]
    fn likelihood_small_cases() {
        let c = count_transitions(&stream(&[1])).unwrap();
        assert_relative_eq!(log_likelihood_u(&c, 0.37, 0.9, 1.0).unwrap(), 0.37f64.ln(), max_relative = 1e-14);
        let c = count_transitions(&stream(&[0, 1])).unwrap();
        let u = 0.42;
        let want = (1.0 - u) * crate::traffic::transition_prob(false, true, 0.7, &params(u, 0.9)).unwrap();
        assert_relative_eq!(log_likelihood_u(&c, u, 0.9, 0.7).unwrap().exp(), want, max_relative = 1e-13);
        assert_eq!(log_likelihood_u(&c, 0.0, 0.9, 0.7).unwrap(), f64::NEG_INFINITY);
        assert_eq!(log_likelihood_u(&c, 1.0, 0.9, 0.7).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn likelihood_normalizes() {
        for n in 1..=10usize {
            let mut total = 0.0;
            for mask in 0..(1u32 << n) {
                let bits: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
                let s = SampleStream::uniform(bits, 0.6).unwrap();
                let c = count_transitions(&s).unwrap();
                total += log_likelihood_u(&c, 0.3, 0.8, 0.6).unwrap().exp();
            }
            assert_relative_eq!(total, 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn ml_u_boundaries_and_grid_oracle() {
        let e = ml_estimate_u(&stream(&[1]), 0.9, 1.0).unwrap();
        assert_eq!(e.value, 1.0);
        assert!(!e.converged);
        let e = ml_estimate_u(&stream(&[0, 0, 0]), 0.9, 1.0).unwrap();
        assert_eq!(e.value, 0.0);

        let mut rng = seed::rng(2, &[]);
        for _ in 0..100 {
            let u = rng.gen_range(0.1..0.9);
            let lf = rng.gen_range(0.2..2.0);
            let tc = rng.gen_range(0.1..3.0);
            let p = params(u, lf);
            let s = simulate(&p, 20, 19.0 * tc, rng.gen());
            let s = SampleStream::uniform(s.values().to_vec(), tc).unwrap();
            let e = ml_estimate_u(&s, lf, tc).unwrap();
            if !e.converged {
                continue;
            }
            let c = count_transitions(&s).unwrap();
            let g = brute_grid_argmax(|x| log_likelihood_u(&c, x, lf, tc).unwrap(), 1e-5);
            assert!((e.value - g).abs() <= 1e-4, "{} vs {g}", e.value);
            // idempotent
            assert_eq!(e, ml_estimate_u(&s, lf, tc).unwrap());
        }
    }

    #[test]
    fn forward_equals_enumeration() {
        let mut rng = seed::rng(3, &[]);
        for _ in 0..60 {
            let n = rng.gen_range(1..=12usize);
            let p = params(rng.gen_range(0.05..0.95), rng.gen_range(0.1..2.0));
            let tc = rng.gen_range(0.05..2.0);
            let s = SensingModel::new(rng.gen_range(0.0..0.3), rng.gen_range(0.0..0.3)).unwrap();
            let bits: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
            let sched = SampleSchedule::with_interval(n, tc).unwrap();
            let brute = enumerate_sensed_likelihood(&bits, &p, &sched, &s).unwrap();
            let fwd = forward_log_likelihood(&bits, &p, tc, &s).exp();
            assert_relative_eq!(fwd, brute, max_relative = 1e-10);
        }
    }

    #[test]
    fn noisy_ml_reduces_to_perfect() {
        let p = params(0.3, 0.9);
        for seed in 0..20 {
            let s = simulate(&p, 60, 50.0, seed).into_sensed();
            let tc = 50.0 / 59.0;
            let a = ml_estimate_u(&s, 0.9, tc).unwrap();
            let b = ml_estimate_u_noisy(&s, 0.9, tc, &SensingModel::perfect()).unwrap();
            assert_eq!(a.value, b.value);
            let c = count_transitions(&s).unwrap();
            if let Ok(closed) = ml_estimate_lambda_f(&c, 0.3, tc) {
                let noisy =
                    ml_estimate_rates_noisy(&s, 0.3, tc, &SensingModel::perfect(), Rate::LambdaF, &RateSearch::default())
                        .unwrap();
                assert_eq!(closed.value, noisy.value);
            }
        }
    }

    #[test]
    fn noisy_rate_ml_at_tiny_noise_tracks_closed_form() {
        // the forward path itself (not the dispatch) agrees with the closed form as noise vanishes
        let p = params(0.3, 0.9);
        let tc = 50.0 / 199.0;
        let s = simulate(&p, 200, 50.0, 17).into_sensed();
        let c = count_transitions(&s).unwrap();
        let closed = ml_estimate_lambda_f(&c, 0.3, tc).unwrap().value;
        let tiny = SensingModel::new(1e-12, 1e-12).unwrap();
        let noisy = ml_estimate_rates_noisy(&s, 0.3, tc, &tiny, Rate::LambdaF, &RateSearch::default()).unwrap();
        assert_relative_eq!(noisy.value, closed, max_relative = 1e-6);
        let tiny_u = ml_estimate_u_noisy(&s, 0.9, tc, &tiny).unwrap();
        assert_relative_eq!(tiny_u.value, ml_estimate_u(&s, 0.9, tc).unwrap().value, max_relative = 1e-6);
    }

    fn gamma_root_by_bisection(c: &TransitionCounts, u: f64) -> Option<f64> {
        // the score decreases from +inf-ish near 0 to -inf at 1 when there are switches
        let f = |g: f64| lambda_score_in_gamma(c, u, g);
        let (lo, hi) = (1e-15, 1.0 - 1e-15);
        if !(f(lo) > 0.0 && f(hi) < 0.0) {
            return None;
        }
        Some(crate::optimize::bisect(f, lo, hi, 1e-16))
    }

    #[test]
    fn lambda_closed_form_matches_score_root() {
        let mut rng = seed::rng(4, &[]);
        let mut checked = 0;
        while checked < 100 {
            let u = rng.gen_range(0.1..0.9);
            let n1 = rng.gen_range(1..40u64);
            let n2 = if rng.gen() { n1 } else { n1.saturating_sub(1).max(1) };
            let c = TransitionCounts::from_parts(rng.gen_range(0..200), n1, n2, rng.gen_range(0..200), false);
            let Some(g) = gamma_root_by_bisection(&c, u) else { continue };
            let tc = rng.gen_range(0.1..2.0);
            match ml_estimate_lambda_f(&c, u, tc) {
                Ok(e) => {
                    let want = -(u / tc) * g.ln();
                    assert_relative_eq!(e.value, want, max_relative = 1e-8);
                    checked += 1;
                }
                Err(err) => panic!("closed form failed where a root exists: {err}"),
            }
        }
    }

    #[test]
    fn lambda_recovers_from_expected_counts() {
        for &(u, lf, tc) in &[(0.3, 0.9, 0.25), (0.6, 0.4, 1.0), (0.5, 2.0, 0.1)] {
            let p = params(u, lf);
            let m = 1_000_000.0;
            let pr = |x, y| crate::traffic::transition_prob(x, y, tc, &p).unwrap();
            let n0 = m * (1.0 - u) * pr(false, false);
            let n1 = m * (1.0 - u) * pr(false, true);
            let n3 = m * u * pr(true, true);
            // the closed form only uses n0, n3 and the total, so fractional counts are fine
            let a = (u - u * u) * m;
            let b = -2.0 * a + m - (1.0 - u) * n0 - u * n3;
            let cc = a - u * n0 - (1.0 - u) * n3;
            let g = (-b + (b * b - 4.0 * a * cc).sqrt()) / (2.0 * a);
            assert_relative_eq!(-(u / tc) * g.ln(), lf, max_relative = 1e-6);
            // and through the public API with rounded counts
            let c = TransitionCounts::from_parts(n0.round() as u64, n1.round() as u64, n1.round() as u64, n3.round() as u64, false);
            let e = ml_estimate_lambda_f(&c, u, tc).unwrap();
            assert_relative_eq!(e.value, lf, max_relative = 1e-4);
        }
    }

    #[test]
    fn lambda_n_identities() {
        let c = TransitionCounts::from_parts(50, 10, 10, 30, false);
        let f = ml_estimate_lambda_f(&c, 0.5, 0.5).unwrap();
        let n = ml_estimate_lambda_n(&c, 0.5, 0.5).unwrap();
        assert_eq!(f.value, n.value);
        let f = ml_estimate_lambda_f(&c, 0.3, 0.5).unwrap();
        let n = ml_estimate_lambda_n(&c, 0.3, 0.5).unwrap();
        assert_relative_eq!(n.value * 0.3, f.value * 0.7, max_relative = 1e-15);
        // degenerate: no switches
        let c = TransitionCounts::from_parts(10, 0, 0, 0, false);
        let e = ml_estimate_lambda_f(&c, 0.3, 0.5).unwrap();
        assert_eq!(e.value, 0.0);
        assert!(!e.converged);
        // degenerate: every step switches
        let c = TransitionCounts::from_parts(0, 10, 10, 0, false);
        assert!(matches!(ml_estimate_lambda_f(&c, 0.3, 0.5), Err(Error::NoSolution(_))));
    }

    #[test]
    fn unbiasedness_monte_carlo() {
        // mean of several duty-cycle estimators over 10^5 streams
        let p = params(0.3, 0.9);
        let (n, t) = (100, 50.0);
        let sens = SensingModel::new(0.1, 0.1).unwrap();
        let w = crate::design::optimal_weights(&params(0.6, 0.4), n, t / 99.0).unwrap();
        let p2 = params(0.6, 0.4);
        let reps = 100_000u64;
        let (mut a, mut a2, mut c, mut c2, mut ws, mut ws2) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for r in 0..reps {
            let s = simulate(&p, n, t, r);
            let x = avg_estimate(&s).unwrap().value;
            a += x;
            a2 += x * x;
            let y = avg_estimate_corrected(&corrupt(&s, &sens, r + 7).unwrap(), &sens).unwrap().raw;
            c += y;
            c2 += y * y;
            let s2 = simulate(&p2, n, t, r + 1_000_000);
            let z = weighted_estimate(&s2, &w, None).unwrap().value;
            ws += z;
            ws2 += z * z;
        }
        let check = |sum: f64, sq: f64, truth: f64| {
            let m = sum / reps as f64;
            let sd = ((sq / reps as f64 - m * m) / reps as f64).sqrt();
            assert!((m - truth).abs() < 3.0 * sd, "{m} vs {truth} (se {sd})");
        };
        check(a, a2, 0.3);
        check(c, c2, 0.3);
        check(ws, ws2, 0.6);
    }

    #[test]
    fn lambda_consistency_monte_carlo() {
        let reps = 4000u64;
        for &(u, lf, n, want_f) in &[(0.3, 0.9, 200usize, true), (0.6, 0.4, 200, false)] {
            let p = params(u, lf);
            let tc = 50.0 / (n - 1) as f64;
            let truth = if want_f { lf } else { p.lambda_n() };
            let mut vals = Vec::new();
            for r in 0..reps {
                let s = simulate(&p, n, 50.0, 100 + r);
                let c = count_transitions(&s).unwrap();
                let e = if want_f { ml_estimate_lambda_f(&c, u, tc) } else { ml_estimate_lambda_n(&c, u, tc) };
                if let Ok(e) = e {
                    vals.push(e.value);
                }
            }
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            let sd = (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (vals.len() - 1) as f64).sqrt();
            // consistency: the mean lies within 3 replicate standard deviations of the truth
            assert!((m - truth).abs() < 3.0 * sd, "{m} vs {truth}");
            assert!(vals.len() as u64 > reps * 99 / 100);
        }
    }

    proptest! {
        #[test]
        fn corrected_reduces_bitwise(bits in proptest::collection::vec(any::<bool>(), 1..50)) {
            let s = SampleStream::uniform(bits, 1.0).unwrap().into_sensed();
            let w = WeightVector::uniform(s.len()).unwrap();
            let perfect = SensingModel::perfect();
            prop_assert_eq!(avg_estimate_corrected(&s, &perfect).unwrap().value, avg_estimate(&s).unwrap().value);
            prop_assert_eq!(
                weighted_estimate(&s, &w, Some(&perfect)).unwrap().value,
                weighted_estimate(&s, &w, None).unwrap().value
            );
        }

        #[test]
        fn forward_matches_brute_force(
            bits in proptest::collection::vec(any::<bool>(), 1..=12),
            u in 0.05f64..0.95, lf in 0.1f64..2.0, tc in 0.05f64..2.0,
            pf in 0.0f64..0.4, pm in 0.0f64..0.4,
        ) {
            let p = params(u, lf);
            let s = SensingModel::new(pf, pm).unwrap();
            let sched = SampleSchedule::with_interval(bits.len(), tc).unwrap();
            let brute = enumerate_sensed_likelihood(&bits, &p, &sched, &s).unwrap();
            let fwd = forward_log_likelihood(&bits, &p, tc, &s).exp();
            prop_assert!((fwd - brute).abs() <= 1e-10 * brute);
        }
    }
}
