//! Optimal sampling schedules and weights for the averaging estimators.
//!
//! For a fixed sample budget `N` and window `T`, the schedule minimizing the
//! sample-mean MSE has equal edge intervals `t_a`, uniform interior intervals
//! `t_b`, and, when the window is short, `k-1` coinciding samples at each end.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::accuracy::{mse_avg, ErrorReport, ErrorSource};
use crate::error::{domain, Result};
use crate::estimators::WeightVector;
use crate::optimize::bisect;
use crate::traffic::{SampleSchedule, TrafficParams};

/// An optimal schedule and the quantities that define it.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleSolution {
    pub schedule: SampleSchedule,
    /// Regime: samples `k` and `N-k` carry the edge intervals, and `k-1`
    /// samples coincide at each end.
    pub k_regime: usize,
    pub t_a: f64,
    pub t_b: f64,
    pub mse_at_optimum: f64,
}

/// Lower end of the window range in which regime `k` is optimal.
pub fn regime_lower_bound(p: &TrafficParams, n: usize, k: usize) -> f64 {
    let n_hat = n as f64 - 2.0 * k as f64 - 1.0;
    n_hat * (p.u() / p.lambda_f()) * ((k as f64 + 1.0) / k as f64).ln()
}

/// Regime whose window bracket contains `t_window`; on a bracket endpoint the
/// smaller `k` wins.
pub fn select_regime(p: &TrafficParams, n: usize, t_window: f64) -> usize {
    let mut k = 1;
    while n >= 2 * k + 2 {
        if t_window >= regime_lower_bound(p, n, k) {
            return k;
        }
        k += 1;
    }
    n / 2
}

fn check_design_args(n: usize, t_window: f64) -> Result<()> {
    if n < 3 {
        return domain(format!("optimal schedules need N >= 3, got {n}"));
    }
    if !(t_window.is_finite() && t_window > 0.0) {
        return domain(format!("window must be finite and > 0, got {t_window}"));
    }
    Ok(())
}

/// Edge interval implied by an interior interval in regime `k`:
/// `Γ_a = Γ_b / (k (1 - Γ_b))` written in seconds.
fn edge_from_interior(c: f64, k: usize, t_b: f64) -> f64 {
    t_b + c * (k as f64 * -(-t_b / c).exp_m1()).ln()
}

/// The schedule of regime `k`, whether or not `k` is the optimal regime.
pub fn regime_schedule(p: &TrafficParams, n: usize, t_window: f64, k: usize) -> Result<ScheduleSolution> {
    check_design_args(n, t_window)?;
    if k == 0 || 2 * k > n {
        return domain(format!("regime k = {k} is outside 1..={}", n / 2));
    }
    let c = p.u() / p.lambda_f();
    let n_hat = n as isize - 2 * k as isize - 1;
    let zeros = vec![0.0; k - 1];
    let (t_a, t_b, middle): (f64, f64, Vec<f64>) = match n_hat {
        -1 => (t_window, t_window, vec![t_window]),
        0 => (t_window / 2.0, t_window / 2.0, vec![t_window / 2.0; 2]),
        _ => {
            let nh = n_hat as f64;
            let lo = c * ((k as f64 + 1.0) / k as f64).ln();
            let hi = t_window / nh;
            if lo > hi * (1.0 + 1e-12) {
                return domain(format!("window {t_window} is too short for regime k = {k}"));
            }
            let f = |tb: f64| 2.0 * edge_from_interior(c, k, tb).max(0.0) + nh * tb - t_window;
            let t_b = if lo >= hi { hi } else { bisect(f, lo, hi, 1e-15 * hi) };
            let t_a = edge_from_interior(c, k, t_b).max(0.0);
            let mut mid = vec![t_a];
            mid.extend(std::iter::repeat_n(t_b, n_hat as usize));
            mid.push(t_a);
            (t_a, t_b, mid)
        }
    };
    let mut intervals = zeros.clone();
    intervals.extend(middle);
    intervals.extend(zeros);
    let schedule = SampleSchedule::new(intervals, 0.0)?;
    let mse_at_optimum = mse_avg(p, &schedule).mse;
    Ok(ScheduleSolution { schedule, k_regime: k, t_a, t_b, mse_at_optimum })
}

/// MSE-minimizing schedule of `n` samples over `t_window` seconds.
pub fn optimal_schedule(p: &TrafficParams, n: usize, t_window: f64) -> Result<ScheduleSolution> {
    check_design_args(n, t_window)?;
    regime_schedule(p, n, t_window, select_regime(p, n, t_window))
}

/// The minimum MSE in closed form, from the regime parameters.
pub fn optimal_schedule_mse(p: &TrafficParams, n: usize, t_window: f64) -> Result<ErrorReport> {
    let sol = optimal_schedule(p, n, t_window)?;
    let k = sol.k_regime as f64;
    let nf = n as f64;
    let pre = 2.0 * p.variance() / (nf * nf);
    let inner = if 2 * sol.k_regime + 2 <= n {
        let gb = p.gamma(sol.t_b);
        let omg = p.one_minus_gamma(sol.t_b);
        (gb + k * (k - 1.0) * omg * omg) / (omg * omg) + gb * (nf - 2.0 * k) / omg
    } else if n.is_multiple_of(2) {
        (nf * nf * (p.gamma(t_window) + 1.0) - 2.0 * nf) / 4.0
    } else {
        (nf - 1.0) * ((nf - 1.0) * p.gamma(t_window) + 4.0 * p.gamma(t_window / 2.0) + (nf - 3.0)) / 4.0
    };
    let mse = pre * (nf / 2.0 + inner);
    Ok(ErrorReport::new(
        mse,
        ErrorSource::ClosedForm,
        format!("u={} lambda_f={} N={n} T={t_window} optimal schedule k={}", p.u(), p.lambda_f(), sol.k_regime),
    ))
}

/// MSE-minimizing weights for `n` samples spaced `t_c` apart.
pub fn optimal_weights(p: &TrafficParams, n: usize, t_c: f64) -> Result<WeightVector> {
    if n < 2 {
        return domain(format!("optimal weights need N >= 2, got {n}"));
    }
    if !(t_c.is_finite() && t_c > 0.0) {
        return domain(format!("sample spacing must be finite and > 0, got {t_c}"));
    }
    let g = p.gamma(t_c);
    let omg = p.one_minus_gamma(t_c);
    let d = n as f64 * omg + 2.0 * g;
    let mut w = vec![omg / d; n];
    w[0] = 1.0 / d;
    w[n - 1] = 1.0 / d;
    WeightVector::normalized(w)
}

/// Products `L_n = Σ_{i<=n} Π_{k=i}^{n-1} Γ_k` and `R_n = Σ_{j>=n} Π_{k=n+1}^{j} Γ_k`
/// over the intervals, used by the gradient and the Hessian.
fn left_right_sums(g: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let m = g.len();
    let mut left = vec![1.0; m];
    for n in 1..m {
        left[n] = 1.0 + g[n - 1] * left[n - 1];
    }
    let mut right = vec![1.0; m];
    for n in (0..m.saturating_sub(1)).rev() {
        right[n] = 1.0 + g[n + 1] * right[n + 1];
    }
    (left, right)
}

/// Gradient of the sample-mean MSE with respect to each interval.
pub fn mse_gradient(p: &TrafficParams, sched: &SampleSchedule) -> Vec<f64> {
    let g: Vec<f64> = sched.intervals().iter().map(|&t| p.gamma(t)).collect();
    let nf = sched.n() as f64;
    let scale = -2.0 * p.variance() / (nf * nf) * p.decay_rate();
    let (left, right) = left_right_sums(&g);
    (0..g.len()).map(|n| scale * left[n] * g[n] * right[n]).collect()
}

/// Symmetric Hessian of the sample-mean MSE with respect to the intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianMatrix {
    pub entries: DMatrix<f64>,
}

impl HessianMatrix {
    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.entries.clone()).eigenvalues.min()
    }

    /// Largest absolute eigenvalue.
    pub fn spectral_norm(&self) -> f64 {
        SymmetricEigen::new(self.entries.clone()).eigenvalues.amax()
    }

    /// Smallest eigenvalue relative to the spectral norm (0 for a zero matrix).
    pub fn scaled_min_eigenvalue(&self) -> f64 {
        let eig = SymmetricEigen::new(self.entries.clone()).eigenvalues;
        let norm = eig.amax();
        if norm == 0.0 {
            0.0
        } else {
            eig.min() / norm
        }
    }
}

/// Analytic Hessian: entry `(a, b)`, `a <= b`, is
/// `(2u(1-u)/N²)(λ_f/u)² Σ_{i<=a} Σ_{j>=b} Π_{k=i}^{j} Γ_k`.
pub fn mse_hessian(p: &TrafficParams, sched: &SampleSchedule) -> Result<HessianMatrix> {
    if sched.n() < 3 {
        return domain(format!("the Hessian needs N >= 3, got {}", sched.n()));
    }
    let g: Vec<f64> = sched.intervals().iter().map(|&t| p.gamma(t)).collect();
    let m = g.len();
    let nf = sched.n() as f64;
    let scale = 2.0 * p.variance() / (nf * nf) * p.decay_rate().powi(2);
    let (left, right) = left_right_sums(&g);
    let mut h = DMatrix::zeros(m, m);
    for a in 0..m {
        let mut prod = 1.0;
        for b in a..m {
            prod *= g[b];
            let v = scale * left[a] * prod * right[b];
            h[(a, b)] = v;
            h[(b, a)] = v;
        }
    }
    Ok(HessianMatrix { entries: h })
}

/// KKT residuals of a schedule for the problem min V(𝒯) s.t. Σ T_n = T, T_n >= 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport {
    /// Multiplier of the window constraint.
    pub mu: f64,
    /// Largest `|∇V_n + μ|` over positive intervals.
    pub stationarity: f64,
    /// Largest `|υ_n T_n|`.
    pub slackness: f64,
    /// Smallest multiplier `υ_n = ∇V_n + μ` over zero intervals (must be >= 0).
    pub min_multiplier: f64,
}

pub fn kkt_residuals(p: &TrafficParams, sched: &SampleSchedule) -> KktReport {
    let grad = mse_gradient(p, sched);
    let t = sched.intervals();
    let pos: Vec<usize> = (0..t.len()).filter(|&i| t[i] > 0.0).collect();
    let mu = -pos.iter().map(|&i| grad[i]).sum::<f64>() / pos.len().max(1) as f64;
    let mut rep = KktReport { mu, stationarity: 0.0, slackness: 0.0, min_multiplier: f64::INFINITY };
    for (i, (&gi, &ti)) in grad.iter().zip(t).enumerate() {
        let ups = gi + mu;
        if t[i] > 0.0 {
            rep.stationarity = rep.stationarity.max(ups.abs());
        } else {
            rep.min_multiplier = rep.min_multiplier.min(ups);
        }
        rep.slackness = rep.slackness.max((ups * ti).abs());
    }
    rep
}
