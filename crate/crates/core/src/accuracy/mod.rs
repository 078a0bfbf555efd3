//! Closed-form MSE of the duty-cycle estimators, Cramér–Rao bounds and their
//! large-N asymptotes.
//!
//! Every closed form here has an independent brute-force counterpart in
//! [`oracle`].

pub mod oracle;

use std::fmt;

use crate::error::{domain, Error, Result};
use crate::estimators::WeightVector;
use crate::traffic::{SampleSchedule, SensingModel, TrafficParams};

/// Where an error value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorSource {
    ClosedForm,
    Asymptote,
    OracleEnumeration,
    MonteCarlo,
}

impl fmt::Display for ErrorSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorSource::ClosedForm => "closed_form",
            ErrorSource::Asymptote => "asymptote",
            ErrorSource::OracleEnumeration => "oracle_enumeration",
            ErrorSource::MonteCarlo => "monte_carlo",
        })
    }
}

/// An MSE value with its RMS and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub mse: f64,
    pub rms: f64,
    pub source: ErrorSource,
    /// Human-readable description of the configuration.
    pub config: String,
}

impl ErrorReport {
    pub fn new(mse: f64, source: ErrorSource, config: impl Into<String>) -> Self {
        Self { mse, rms: mse.max(0.0).sqrt(), source, config: config.into() }
    }
}

/// Parameter a Fisher information refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parameter {
    U,
    LambdaF,
    LambdaN,
}

/// Fisher information of `N` uniformly spaced samples about one parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherInfo {
    pub value: f64,
    pub parameter: Parameter,
}

impl FisherInfo {
    /// Cramér–Rao bound, the reciprocal of the information.
    pub fn crb(&self) -> f64 {
        1.0 / self.value
    }
}

fn describe(p: &TrafficParams, what: impl fmt::Display) -> String {
    format!("u={} lambda_f={} {what}", p.u(), p.lambda_f())
}

fn check_window(t: f64) -> Result<()> {
    if !(t.is_finite() && t > 0.0) {
        return domain(format!("window must be finite and > 0, got {t}"));
    }
    Ok(())
}

fn check_spacing(t_c: f64) -> Result<()> {
    if !(t_c.is_finite() && t_c > 0.0) {
        return domain(format!("sample spacing must be finite and > 0, got {t_c}"));
    }
    Ok(())
}

/// Running state of the correlation sum of the averaging estimator.
///
/// With `s_1 = 0` and `s_{n+1} = Γ_n (1 + s_n)`, `s_n` is the summed correlation
/// of sample `n` with all earlier samples and `S = Σ s_n` is the double sum
/// of products of the MSE.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CorrelationSum {
    pub n: usize,
    pub s_last: f64,
    pub total: f64,
}

impl CorrelationSum {
    pub fn first() -> Self {
        Self { n: 1, s_last: 0.0, total: 0.0 }
    }

    /// Add a sample `gamma` correlation-decay after the previous one.
    pub fn push(&mut self, gamma: f64) {
        self.s_last = gamma * (1.0 + self.s_last);
        self.total += self.s_last;
        self.n += 1;
    }

    /// MSE of the sample mean for variance `var = u(1-u)`.
    pub fn mse(&self, var: f64) -> f64 {
        let n = self.n as f64;
        var / n + 2.0 * var * self.total / (n * n)
    }
}

fn correlation_sum(p: &TrafficParams, sched: &SampleSchedule) -> CorrelationSum {
    let mut c = CorrelationSum::first();
    for &t in sched.intervals() {
        c.push(p.gamma(t));
    }
    c
}

/// MSE of the sample mean for an arbitrary schedule.
pub fn mse_avg(p: &TrafficParams, sched: &SampleSchedule) -> ErrorReport {
    let mse = correlation_sum(p, sched).mse(p.variance());
    ErrorReport::new(mse, ErrorSource::ClosedForm, describe(p, format!("N={} T={}", sched.n(), sched.window())))
}

/// Decrease of the sample-mean MSE when one more sample is taken `t_next`
/// after the last one.
pub fn mse_avg_decrement(p: &TrafficParams, sched: &SampleSchedule, t_next: f64) -> Result<f64> {
    if !(t_next >= 0.0) {
        return domain(format!("next inter-sample time must be >= 0, got {t_next}"));
    }
    let c = correlation_sum(p, sched);
    let var = p.variance();
    let v = c.mse(var);
    let n = c.n as f64;
    let s_next = p.gamma(t_next) * (1.0 + c.s_last);
    Ok(((2.0 * n + 1.0) * v - var * (1.0 + 2.0 * s_next)) / ((n + 1.0) * (n + 1.0)))
}

/// Largest possible decrement, reached as the next interval grows without bound.
pub fn mse_avg_max_decrement(p: &TrafficParams, sched: &SampleSchedule) -> f64 {
    let v = mse_avg(p, sched).mse;
    let n = sched.n() as f64;
    (v * (2.0 * n + 1.0) - p.variance()) / ((n + 1.0) * (n + 1.0))
}

/// `Σ_{i=1}^{N-1} (N-i) Γ^i` for `Γ = exp(-x)`, the correlation double sum of a
/// uniform schedule.
fn uniform_pair_sum(n: usize, x: f64) -> f64 {
    let nf = n as f64;
    if nf * x < 1e-3 {
        return uniform_pair_sum_direct(n, x);
    }
    // Γ (Γ^N - NΓ + N - 1) / (1-Γ)^2 with the numerator written via expm1
    let g = (-x).exp();
    let omg = -(-x).exp_m1();
    let num = (-nf * x).exp_m1() - nf * (-x).exp_m1();
    g * num / (omg * omg)
}

/// The same sum term by term.
fn uniform_pair_sum_direct(n: usize, x: f64) -> f64 {
    (1..n).map(|i| (n - i) as f64 * (-(i as f64) * x).exp()).sum()
}

/// MSE of the sample mean for `n` evenly spaced samples over `t_window`.
pub fn mse_avg_uniform(p: &TrafficParams, n: usize, t_window: f64) -> Result<ErrorReport> {
    if n < 2 {
        return domain(format!("uniform sampling needs N >= 2, got {n}"));
    }
    check_window(t_window)?;
    let x = p.decay_rate() * t_window / (n - 1) as f64;
    let nf = n as f64;
    let var = p.variance();
    let mse = var / nf + 2.0 * var * uniform_pair_sum(n, x) / (nf * nf);
    Ok(ErrorReport::new(mse, ErrorSource::ClosedForm, describe(p, format!("N={n} T={t_window}"))))
}

/// The term-by-term form of [`mse_avg_uniform`], kept for cross-checking.
pub fn mse_avg_uniform_direct(p: &TrafficParams, n: usize, t_window: f64) -> Result<f64> {
    if n < 2 {
        return domain(format!("uniform sampling needs N >= 2, got {n}"));
    }
    check_window(t_window)?;
    let x = p.decay_rate() * t_window / (n - 1) as f64;
    let nf = n as f64;
    let var = p.variance();
    Ok(2.0 * var / (nf * nf) * (nf / 2.0 + uniform_pair_sum_direct(n, x)))
}

/// Limit of [`mse_avg_uniform`] as `N` grows with the window fixed.
pub fn mse_avg_uniform_asymptote(p: &TrafficParams, t_window: f64) -> Result<ErrorReport> {
    check_window(t_window)?;
    let eta = t_window * p.decay_rate();
    let var = p.variance();
    let mse = if eta < 1e-4 {
        var * (1.0 - eta / 3.0 + eta * eta / 12.0)
    } else {
        2.0 * var * ((-eta).exp_m1() + eta) / (eta * eta)
    };
    Ok(ErrorReport::new(mse, ErrorSource::Asymptote, describe(p, format!("T={t_window}"))))
}

/// Smallest `N >= 2` whose uniform-sampling MSE is within a factor `beta` of
/// the asymptote.
pub fn required_samples(p: &TrafficParams, t_window: f64, beta: f64) -> Result<usize> {
    if !(beta > 1.0) {
        return Err(Error::Infeasible(format!("beta must exceed 1, got {beta}")));
    }
    let target = beta * mse_avg_uniform_asymptote(p, t_window)?.mse;
    let ok = |n: usize| mse_avg_uniform(p, n, t_window).map(|r| r.mse <= target);
    if ok(2)? {
        return Ok(2);
    }
    let mut hi = 4usize;
    while !ok(hi)? {
        hi = hi
            .checked_mul(2)
            .filter(|&h| h as u64 <= 1 << 40)
            .ok_or_else(|| Error::Infeasible("required sample count exceeds the supported range".into()))?;
    }
    let mut lo = hi / 2; // fails
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Extra MSE caused by sensing errors in a mean of `n` samples, per unit of
/// `Σ w²` (equal to `1/n` for plain averaging).
fn sensing_penalty(p: &TrafficParams, s: &SensingModel) -> f64 {
    let u = p.u();
    let g = s.gain();
    (u * s.p_m() * (1.0 - s.p_m()) + (1.0 - u) * s.p_f() * (1.0 - s.p_f())) / (g * g)
}

/// MSE of the bias-corrected sample mean under sensing errors.
pub fn mse_avg_corrected(p: &TrafficParams, sched: &SampleSchedule, s: &SensingModel) -> Result<ErrorReport> {
    s.check_correctable()?;
    let base = mse_avg(p, sched).mse;
    let mse = base + sensing_penalty(p, s) / sched.n() as f64;
    Ok(ErrorReport::new(
        mse,
        ErrorSource::ClosedForm,
        describe(p, format!("N={} T={} pf={} pm={}", sched.n(), sched.window(), s.p_f(), s.p_m())),
    ))
}

/// The sensing term that [`mse_avg_corrected`] adds to [`mse_avg`].
pub fn sensing_correction_term(p: &TrafficParams, n: usize, s: &SensingModel) -> Result<f64> {
    s.check_correctable()?;
    Ok(sensing_penalty(p, s) / n as f64)
}

/// MSE of a weighted mean of `n` samples spaced `t_c` apart.
///
/// Under sensing errors the estimator is the bias-corrected weighted mean.
pub fn mse_weighted(
    p: &TrafficParams,
    n: usize,
    t_c: f64,
    w: &WeightVector,
    s: Option<&SensingModel>,
) -> Result<ErrorReport> {
    check_spacing(t_c)?;
    if w.len() != n {
        return domain(format!("{} weights for {n} samples", w.len()));
    }
    let sum: f64 = w.as_slice().iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return domain(format!("weights must sum to 1, got {sum}"));
    }
    let g = p.gamma(t_c);
    let ws = w.as_slice();
    // Σ_i Σ_{k<i} w_k w_i Γ^{i-k} via a_i = Γ (a_{i-1} + w_{i-1})
    let mut a = 0.0;
    let mut cross = 0.0;
    for i in 1..n {
        a = g * (a + ws[i - 1]);
        cross += ws[i] * a;
    }
    let sq: f64 = ws.iter().map(|x| x * x).sum();
    let mut mse = p.variance() * (sq + 2.0 * cross);
    if let Some(s) = s {
        s.check_correctable()?;
        mse += sensing_penalty(p, s) * sq;
    }
    Ok(ErrorReport::new(mse, ErrorSource::ClosedForm, describe(p, format!("N={n} t_c={t_c} weighted"))))
}

/// MSE of the optimally weighted mean in closed form.
pub fn mse_weighted_optimal(p: &TrafficParams, n: usize, t_c: f64, s: Option<&SensingModel>) -> Result<ErrorReport> {
    check_spacing(t_c)?;
    if n < 2 {
        return domain(format!("weighted averaging needs N >= 2, got {n}"));
    }
    let g = p.gamma(t_c);
    let omg = p.one_minus_gamma(t_c);
    let nf = n as f64;
    let d = nf * omg + 2.0 * g;
    let mut mse = p.variance() * (1.0 + g) / d;
    if let Some(s) = s {
        s.check_correctable()?;
        let sq = (2.0 + (nf - 2.0) * omg * omg) / (d * d);
        mse += sensing_penalty(p, s) * sq;
    }
    Ok(ErrorReport::new(mse, ErrorSource::ClosedForm, describe(p, format!("N={n} t_c={t_c} optimal weights"))))
}

/// Limit of the optimally weighted MSE as `N` grows with the window fixed.
/// The sensing term vanishes in the limit, so `s` does not change the value.
pub fn mse_weighted_asymptote(p: &TrafficParams, t_window: f64, s: Option<&SensingModel>) -> Result<ErrorReport> {
    check_window(t_window)?;
    if let Some(s) = s {
        s.check_correctable()?;
    }
    let mse = p.variance() / (1.0 + p.lambda_f() * t_window / (2.0 * p.u()));
    Ok(ErrorReport::new(mse, ErrorSource::Asymptote, describe(p, format!("T={t_window} weighted"))))
}

fn check_fisher_args(n: usize, t_c: f64) -> Result<()> {
    if n < 2 {
        return domain(format!("Fisher information needs N >= 2, got {n}"));
    }
    check_spacing(t_c)
}

/// Fisher information about `u` of `n` samples spaced `t_c` apart, `lambda_f` known.
pub fn fisher_u(p: &TrafficParams, n: usize, t_c: f64) -> Result<FisherInfo> {
    check_fisher_args(n, t_c)?;
    let u = p.u();
    let g = p.gamma(t_c);
    let omg = p.one_minus_gamma(t_c);
    let x = p.lambda_f() * t_c;
    let nf = n as f64;
    let m1 = g * g * x * (nf - 1.0) * (1.0 - u) * (x * (1.0 - u) * (1.0 + g) - 2.0 * u * (1.0 - 2.0 * u) * omg);
    let m2 = g * g * g * u * u * (u * (u - 1.0) * (3.0 * nf - 2.0) + (nf - 1.0));
    let m3 = -g * g * u * u * (u * (u - 1.0) * (7.0 * nf - 4.0) + (2.0 * nf - 1.0));
    let m4 = g * u * u * (nf * (5.0 * u * u - 5.0 * u + 1.0) + 2.0 * u * (1.0 - u));
    let m5 = nf * u * u * u * (1.0 - u);
    let crb = omg * (g + u * omg) * (1.0 - u * omg) * u.powi(3) * (1.0 - u) / (m1 + m2 + m3 + m4 + m5);
    Ok(FisherInfo { value: 1.0 / crb, parameter: Parameter::U })
}

/// Cramér–Rao bound for `u`.
pub fn crb_u(p: &TrafficParams, n: usize, t_c: f64) -> Result<ErrorReport> {
    let f = fisher_u(p, n, t_c)?;
    Ok(ErrorReport::new(f.crb(), ErrorSource::ClosedForm, describe(p, format!("N={n} t_c={t_c} crb_u"))))
}

/// Limit of the `u` bound as `N` grows with the window fixed.
pub fn crb_u_asymptote(p: &TrafficParams, t_window: f64) -> Result<ErrorReport> {
    check_window(t_window)?;
    let mse = p.variance() / (1.0 + p.lambda_f() * t_window / p.u());
    Ok(ErrorReport::new(mse, ErrorSource::Asymptote, describe(p, format!("T={t_window} crb_u"))))
}

/// Fisher information about `lambda_f`, `u` known.
pub fn fisher_lambda_f(p: &TrafficParams, n: usize, t_c: f64) -> Result<FisherInfo> {
    check_fisher_args(n, t_c)?;
    let u = p.u();
    let g = p.gamma(t_c);
    let omg = p.one_minus_gamma(t_c);
    let crb = u * omg * (g + u * omg * omg * (1.0 - u))
        / ((g * t_c).powi(2) * (1.0 - u) * (1.0 + g) * (n - 1) as f64);
    Ok(FisherInfo { value: 1.0 / crb, parameter: Parameter::LambdaF })
}

/// Fisher information about `lambda_n`, `u` known.
pub fn fisher_lambda_n(p: &TrafficParams, n: usize, t_c: f64) -> Result<FisherInfo> {
    let f = fisher_lambda_f(p, n, t_c)?;
    let r = p.u() / (1.0 - p.u());
    Ok(FisherInfo { value: f.value * r * r, parameter: Parameter::LambdaN })
}

pub fn crb_lambda_f(p: &TrafficParams, n: usize, t_c: f64) -> Result<ErrorReport> {
    let f = fisher_lambda_f(p, n, t_c)?;
    Ok(ErrorReport::new(f.crb(), ErrorSource::ClosedForm, describe(p, format!("N={n} t_c={t_c} crb_lambda_f"))))
}

pub fn crb_lambda_n(p: &TrafficParams, n: usize, t_c: f64) -> Result<ErrorReport> {
    let f = fisher_lambda_n(p, n, t_c)?;
    Ok(ErrorReport::new(f.crb(), ErrorSource::ClosedForm, describe(p, format!("N={n} t_c={t_c} crb_lambda_n"))))
}

/// Limit of the `lambda_f` bound as `N` grows with the window fixed.
pub fn crb_lambda_f_asymptote(p: &TrafficParams, t_window: f64) -> Result<ErrorReport> {
    check_window(t_window)?;
    let mse = p.lambda_f() / (2.0 * t_window * (1.0 - p.u()));
    Ok(ErrorReport::new(mse, ErrorSource::Asymptote, describe(p, format!("T={t_window} crb_lambda_f"))))
}

/// Limit of the `lambda_n` bound as `N` grows with the window fixed.
pub fn crb_lambda_n_asymptote(p: &TrafficParams, t_window: f64) -> Result<ErrorReport> {
    check_window(t_window)?;
    let mse = p.lambda_n() / (2.0 * t_window * p.u());
    Ok(ErrorReport::new(mse, ErrorSource::Asymptote, describe(p, format!("T={t_window} crb_lambda_n"))))
}

#[cfg(test)]
mod tests;
