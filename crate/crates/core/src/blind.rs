//! Blind estimation algorithms driving a live sample source.
//!
//! Algorithm I estimates the duty cycle with `lambda_f` known, stretching the
//! sampling interval as the estimate settles. Algorithm II samples uniformly
//! and estimates the duty cycle together with one of the rates, stopping
//! when worst-case error bounds over the admissible parameter range reach
//! their targets.

use std::fmt::{self, Write as _};

use crate::accuracy::{crb_lambda_f, crb_lambda_n, CorrelationSum};
use crate::error::{domain, Error, Result};
use crate::estimators::{ml_estimate_lambda_f, TransitionCounts};
use crate::seed::{self, Rng};
use crate::traffic::{Process, SampleStream, SensingModel, TrafficParams, Trajectory};

/// Default cap on the number of samples of a single run.
pub const SAFETY_CAP: usize = 10_000_000;

/// Something that can be sampled forward in time.
pub trait SampleSource {
    /// Take the next sample `dt >= 0` seconds after the previous one (after
    /// time zero for the first call). Returns the sample time and the bit.
    fn next_sample(&mut self, dt: f64) -> Result<(f64, bool)>;
}

/// Live simulated traffic, optionally seen through a sensing-error channel.
#[derive(Debug, Clone)]
pub struct SimulatedSource {
    process: Process,
    sensing: Option<(SensingModel, Rng)>,
    started: bool,
    taken: usize,
}

impl SimulatedSource {
    pub fn new(params: TrafficParams, sensing: Option<SensingModel>, seed: u64) -> Self {
        Self::with_rngs(params, sensing, seed::rng(seed, &[0]), seed::rng(seed, &[1]))
    }

    pub fn with_rngs(params: TrafficParams, sensing: Option<SensingModel>, traffic: Rng, noise: Rng) -> Self {
        Self {
            process: Process::new(params, traffic),
            sensing: sensing.filter(|s| !s.is_perfect()).map(|s| (s, noise)),
            started: false,
            taken: 0,
        }
    }
}

impl SampleSource for SimulatedSource {
    fn next_sample(&mut self, dt: f64) -> Result<(f64, bool)> {
        if !(dt >= 0.0 && dt.is_finite()) {
            return domain(format!("sampling delay must be finite and >= 0, got {dt}"));
        }
        let t = if self.started { self.process.now() + dt } else { dt };
        self.started = true;
        self.taken += 1;
        let mut bit = self.process.advance(t);
        if let Some((s, rng)) = &mut self.sensing {
            let flip = if bit { s.p_m() } else { s.p_f() };
            bit ^= flip > 0.0 && seed::bernoulli(rng, flip);
        }
        Ok((t, bit))
    }
}

/// Replays a recorded stream sample by sample. The recorded times replace the
/// requested delays.
#[derive(Debug, Clone)]
pub struct ReplaySource {
    times: Vec<f64>,
    bits: Vec<bool>,
    next: usize,
}

impl ReplaySource {
    pub fn new(stream: &SampleStream) -> Self {
        Self { times: stream.schedule().sample_times(), bits: stream.values().to_vec(), next: 0 }
    }
}

impl SampleSource for ReplaySource {
    fn next_sample(&mut self, _dt: f64) -> Result<(f64, bool)> {
        let i = self.next;
        if i >= self.bits.len() {
            return Err(Error::SourceExhausted(i));
        }
        self.next += 1;
        Ok((self.times[i], self.bits[i]))
    }
}

/// Samples a recorded trajectory at the requested times.
#[derive(Debug, Clone)]
pub struct TrajectorySource {
    traj: Trajectory,
    now: f64,
    started: bool,
    taken: usize,
}

impl TrajectorySource {
    pub fn new(traj: Trajectory) -> Self {
        Self { traj, now: 0.0, started: false, taken: 0 }
    }
}

impl SampleSource for TrajectorySource {
    fn next_sample(&mut self, dt: f64) -> Result<(f64, bool)> {
        let t = if self.started { self.now + dt } else { dt };
        if t > self.traj.horizon() {
            return Err(Error::SourceExhausted(self.taken));
        }
        self.started = true;
        self.now = t;
        self.taken += 1;
        Ok((t, self.traj.state_at(t)))
    }
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terminated {
    MaxSamples,
    MaxWindow,
    TargetMse,
}

impl fmt::Display for Terminated {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Terminated::MaxSamples => "max_samples",
            Terminated::MaxWindow => "max_window",
            Terminated::TargetMse => "target_mse",
        })
    }
}

/// Stopping rules of Algorithm I; any active rule ends the run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Termination {
    pub max_samples: Option<usize>,
    pub max_window: Option<f64>,
    pub target_mse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgoIConfig {
    pub t0: f64,
    pub n0: usize,
    pub alpha: f64,
    pub termination: Termination,
    /// Spacing of the duty-cycle grid for the worst-case MSE.
    pub u_grid_step: f64,
    /// Keep one trace row per sample (otherwise only the last one).
    pub record_rows: bool,
    pub safety_cap: usize,
}

impl AlgoIConfig {
    pub fn new(t0: f64, n0: usize, alpha: f64, termination: Termination) -> Self {
        Self { t0, n0, alpha, termination, u_grid_step: 0.01, record_rows: true, safety_cap: SAFETY_CAP }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t0 > 0.0 && self.t0.is_finite()) {
            return domain(format!("t0 must be finite and > 0, got {}", self.t0));
        }
        if self.n0 < 1 {
            return domain("n0 must be at least 1");
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return domain(format!("alpha must be finite and > 0, got {}", self.alpha));
        }
        let t = &self.termination;
        if t.max_samples.is_none() && t.max_window.is_none() && t.target_mse.is_none() {
            return domain("at least one termination criterion is required");
        }
        if t.max_samples == Some(0) || t.max_window.is_some_and(|w| !(w > 0.0)) || t.target_mse.is_some_and(|v| !(v > 0.0)) {
            return domain("termination thresholds must be positive");
        }
        check_grid_step(self.u_grid_step)
    }
}

fn check_grid_step(step: f64) -> Result<()> {
    if !(step > 0.0 && step < 0.5) {
        return domain(format!("u grid step must lie in (0, 0.5), got {step}"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgoIIConfig {
    pub t0: f64,
    pub v_u_th: f64,
    pub v_lambda_th: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub u_grid_step: f64,
    pub record_rows: bool,
    pub safety_cap: usize,
}

impl AlgoIIConfig {
    pub fn new(t0: f64, v_u_th: f64, v_lambda_th: f64, lambda_min: f64, lambda_max: f64) -> Self {
        Self { t0, v_u_th, v_lambda_th, lambda_min, lambda_max, u_grid_step: 0.01, record_rows: true, safety_cap: SAFETY_CAP }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t0 > 0.0 && self.t0.is_finite()) {
            return domain(format!("t0 must be finite and > 0, got {}", self.t0));
        }
        if !(self.v_u_th > 0.0 && self.v_lambda_th > 0.0) {
            return domain("error targets must be > 0");
        }
        if !(self.lambda_min > 0.0 && self.lambda_max > self.lambda_min && self.lambda_max.is_finite()) {
            return domain("need 0 < lambda_min < lambda_max");
        }
        check_grid_step(self.u_grid_step)
    }
}

/// One row of a trace, written after each sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    /// Samples taken so far.
    pub n: usize,
    pub time: f64,
    pub bit: bool,
    pub u_hat: f64,
    pub lambda_f_hat: Option<f64>,
    pub lambda_n_hat: Option<f64>,
    pub worst_mse_u: Option<f64>,
    pub worst_mse_rate: Option<f64>,
    /// 1: waiting for a toggle, 2: fixed-interval warm-up, 3: adaptive or steady state.
    pub phase: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationTrace {
    pub sample_times: Vec<f64>,
    pub samples: Vec<bool>,
    pub rows: Vec<TraceRow>,
    pub terminated_by: Terminated,
    /// Time from the first to the last sample.
    pub total_window: f64,
    /// Time from the first sample to the end of the toggle search.
    pub toggle_window: f64,
    pub total_samples: usize,
}

impl EstimationTrace {
    pub fn last(&self) -> &TraceRow {
        self.rows.last().expect("a trace has at least one row")
    }

    pub fn u_hat(&self) -> f64 {
        self.last().u_hat
    }

    /// CSV with header `idx,time,bit,u_hat,lf_hat,ln_hat,worst_mse_u,worst_mse_rate`;
    /// missing values are empty fields.
    pub fn to_csv(&self) -> String {
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        let mut out = String::from("idx,time,bit,u_hat,lf_hat,ln_hat,worst_mse_u,worst_mse_rate\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.n,
                r.time,
                u8::from(r.bit),
                r.u_hat,
                opt(r.lambda_f_hat),
                opt(r.lambda_n_hat),
                opt(r.worst_mse_u),
                opt(r.worst_mse_rate)
            );
        }
        out
    }
}

/// Points `step, 2 step, ...` strictly inside (0, 1).
fn duty_grid(step: f64) -> Vec<f64> {
    let k = (1.0 / step).round() as usize;
    (1..k).map(|i| i as f64 * step).filter(|&u| u > 0.0 && u < 1.0).collect()
}

/// Worst case over a duty-cycle grid of the sample-mean MSE for the schedule
/// realized so far, updated in O(grid) per sample.
#[derive(Debug, Clone)]
struct WorstCaseAvg {
    grid: Vec<(f64, f64)>, // (u, lambda_f / u)
    sums: Vec<CorrelationSum>,
}

impl WorstCaseAvg {
    fn new(grid: &[f64], lambda_f: f64) -> Self {
        Self { grid: grid.iter().map(|&u| (u, lambda_f / u)).collect(), sums: vec![CorrelationSum::first(); grid.len()] }
    }

    fn push(&mut self, dt: f64) {
        for ((_, rate), s) in self.grid.iter().zip(self.sums.iter_mut()) {
            s.push((-dt * rate).exp());
        }
    }

    fn worst(&self) -> f64 {
        self.grid.iter().zip(&self.sums).map(|((u, _), s)| s.mse(u * (1.0 - u))).fold(0.0, f64::max)
    }
}

struct Tracker {
    record: bool,
    times: Vec<f64>,
    bits: Vec<bool>,
    rows: Vec<TraceRow>,
    ones: usize,
    cap: usize,
}

impl Tracker {
    fn new(record: bool, cap: usize) -> Self {
        Self { record, times: Vec::new(), bits: Vec::new(), rows: Vec::new(), ones: 0, cap }
    }

    fn take(&mut self, src: &mut dyn SampleSource, dt: f64) -> Result<(f64, bool)> {
        if self.times.len() >= self.cap {
            return Err(Error::SafetyCap(self.cap));
        }
        let (t, b) = src.next_sample(dt)?;
        self.times.push(t);
        self.bits.push(b);
        self.ones += usize::from(b);
        Ok((t, b))
    }

    fn n(&self) -> usize {
        self.times.len()
    }

    fn u_hat(&self) -> f64 {
        self.ones as f64 / self.n() as f64
    }

    fn window(&self) -> f64 {
        self.times.last().unwrap() - self.times[0]
    }

    fn degenerate(&self) -> bool {
        self.ones == 0 || self.ones == self.n()
    }

    fn row(&mut self, row: TraceRow) {
        if self.record || self.rows.is_empty() {
            self.rows.push(row);
        } else {
            self.rows[0] = row;
        }
    }

    fn finish(self, terminated_by: Terminated, toggle_window: f64) -> EstimationTrace {
        let total_window = self.window();
        EstimationTrace {
            total_samples: self.times.len(),
            sample_times: self.times,
            samples: self.bits,
            rows: self.rows,
            terminated_by,
            total_window,
            toggle_window,
        }
    }
}

/// Algorithm I: duty-cycle estimation with known `lambda_f`.
///
/// Phase 1 samples every `t0` until the state toggles, phase 2 continues at
/// `t0` until `n0` samples, phase 3 waits `ũ α / λ_f` before each sample. The
/// sample-count and window limits are checked after every sample; the
/// worst-case MSE target only in phase 3.
pub fn run_algorithm_i(src: &mut dyn SampleSource, cfg: &AlgoIConfig, lambda_f: f64) -> Result<EstimationTrace> {
    cfg.validate()?;
    if !(lambda_f > 0.0 && lambda_f.is_finite()) {
        return domain(format!("lambda_f must be finite and > 0, got {lambda_f}"));
    }
    let term = cfg.termination;
    let mut worst = term.target_mse.map(|_| WorstCaseAvg::new(&duty_grid(cfg.u_grid_step), lambda_f));
    let mut tr = Tracker::new(cfg.record_rows, cfg.safety_cap);
    let mut toggle_window = None;
    let mut dt = 0.0;
    loop {
        let (t, bit) = tr.take(src, dt)?;
        if tr.n() > 1 {
            if let Some(w) = worst.as_mut() {
                w.push(dt);
            }
        }
        let phase = if toggle_window.is_none() {
            1
        } else if tr.n() <= cfg.n0 {
            2
        } else {
            3
        };
        if toggle_window.is_none() && !tr.degenerate() {
            toggle_window = Some(tr.window());
        }
        let worst_mse = worst.as_ref().map(WorstCaseAvg::worst);
        let u_hat = tr.u_hat();
        tr.row(TraceRow {
            n: tr.n(),
            time: t,
            bit,
            u_hat,
            lambda_f_hat: None,
            lambda_n_hat: None,
            worst_mse_u: worst_mse,
            worst_mse_rate: None,
            phase,
        });
        let tw = toggle_window.unwrap_or_else(|| tr.window());
        if term.max_samples.is_some_and(|m| tr.n() >= m) {
            return Ok(tr.finish(Terminated::MaxSamples, tw));
        }
        if term.max_window.is_some_and(|m| tr.window() >= m) {
            return Ok(tr.finish(Terminated::MaxWindow, tw));
        }
        if phase == 3 {
            if let (Some(v), Some(th)) = (worst_mse, term.target_mse) {
                if v < th {
                    return Ok(tr.finish(Terminated::TargetMse, tw));
                }
            }
        }
        dt = if toggle_window.is_some() && tr.n() >= cfg.n0 { u_hat * cfg.alpha / lambda_f } else { cfg.t0 };
    }
}

/// Precomputed worst-case bounds of Algorithm II as functions of `N`.
///
/// With uniform sampling at `t0` the bounds depend only on `N`, so one plan
/// serves any number of runs.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgoIIPlan {
    /// Worst-case MSE in `u`, indexed by `N - 1`.
    pub worst_u: Vec<f64>,
    /// `(N-1)` times the worst-case rate bound, for the `lambda_f` and `lambda_n` branches.
    pub rate_scale_f: f64,
    pub rate_scale_n: f64,
    /// Samples after which each branch may stop.
    pub stop_f: usize,
    pub stop_n: usize,
}

impl AlgoIIPlan {
    pub fn new(cfg: &AlgoIIConfig) -> Result<Self> {
        cfg.validate()?;
        let (lo, hi) = (cfg.lambda_min, cfg.lambda_max);
        // duty cycles reachable with both rates inside [lambda_min, lambda_max]
        let (u_lo, u_hi) = (lo / (lo + hi), hi / (lo + hi));
        let grid: Vec<f64> = duty_grid(cfg.u_grid_step).into_iter().filter(|&u| u >= u_lo && u <= u_hi).collect();
        if grid.is_empty() {
            return domain("the u grid has no point inside the admissible duty-cycle range");
        }
        let mut rate_scale_f: f64 = 0.0;
        let mut rate_scale_n: f64 = 0.0;
        for &u in &grid {
            if u <= 0.5 {
                let p = TrafficParams::from_u_lambda_f(u, hi)?;
                rate_scale_f = rate_scale_f.max(crb_lambda_f(&p, 2, cfg.t0)?.mse);
            }
            if u >= 0.5 {
                let p = TrafficParams::from_u_lambda_n(u, hi)?;
                rate_scale_n = rate_scale_n.max(crb_lambda_n(&p, 2, cfg.t0)?.mse);
            }
        }
        let rate_ok = |scale: f64, n: usize| n >= 2 && scale / ((n - 1) as f64) < cfg.v_lambda_th;
        let mut avg = WorstCaseAvg::new(&grid, lo);
        let mut worst_u = vec![avg.worst()];
        let (mut stop_f, mut stop_n) = (None, None);
        let mut n = 1;
        while stop_f.is_none() || stop_n.is_none() {
            if n >= cfg.safety_cap {
                return Err(Error::SafetyCap(cfg.safety_cap));
            }
            avg.push(cfg.t0);
            n += 1;
            let w = avg.worst();
            worst_u.push(w);
            if w < cfg.v_u_th {
                if stop_f.is_none() && rate_ok(rate_scale_f, n) {
                    stop_f = Some(n);
                }
                if stop_n.is_none() && rate_ok(rate_scale_n, n) {
                    stop_n = Some(n);
                }
            }
        }
        Ok(Self { worst_u, rate_scale_f, rate_scale_n, stop_f: stop_f.unwrap(), stop_n: stop_n.unwrap() })
    }

    fn worst_u_at(&self, n: usize) -> Option<f64> {
        self.worst_u.get(n - 1).copied()
    }

    fn worst_rate_at(&self, n: usize, branch_f: bool) -> Option<f64> {
        (n >= 2).then(|| if branch_f { self.rate_scale_f } else { self.rate_scale_n } / (n - 1) as f64)
    }
}

/// Algorithm II: joint blind estimation with uniform sampling at `t0`.
pub fn run_algorithm_ii(src: &mut dyn SampleSource, cfg: &AlgoIIConfig) -> Result<EstimationTrace> {
    let plan = AlgoIIPlan::new(cfg)?;
    run_algorithm_ii_with_plan(src, cfg, &plan)
}

/// Algorithm II with bounds precomputed by [`AlgoIIPlan::new`] for the same config.
pub fn run_algorithm_ii_with_plan(
    src: &mut dyn SampleSource,
    cfg: &AlgoIIConfig,
    plan: &AlgoIIPlan,
) -> Result<EstimationTrace> {
    cfg.validate()?;
    let mut tr = Tracker::new(cfg.record_rows, cfg.safety_cap);
    let mut counts: Option<TransitionCounts> = None;
    let mut toggle_window = None;
    let mut dt = 0.0;
    loop {
        let (t, bit) = tr.take(src, dt)?;
        match counts.as_mut() {
            None => counts = Some(TransitionCounts::start(bit)),
            Some(c) => c.push(bit),
        }
        let c = counts.as_ref().unwrap();
        let n = tr.n();
        let u_hat = tr.u_hat();
        let degenerate = tr.degenerate();
        if toggle_window.is_none() && !degenerate {
            toggle_window = Some(tr.window());
        }
        // ties at one half go to the lambda_f branch
        let branch_f = u_hat <= 0.5;
        let (lf_hat, ln_hat) = if degenerate {
            (None, None)
        } else {
            match ml_estimate_lambda_f(c, u_hat, cfg.t0) {
                Ok(e) => (Some(e.value), Some((1.0 - u_hat) * e.value / u_hat)),
                Err(_) => (None, None),
            }
        };
        let wu = plan.worst_u_at(n);
        let wr = plan.worst_rate_at(n, branch_f);
        if cfg.record_rows || !degenerate {
            tr.row(TraceRow {
                n,
                time: t,
                bit,
                u_hat,
                lambda_f_hat: lf_hat,
                lambda_n_hat: ln_hat,
                worst_mse_u: wu,
                worst_mse_rate: wr,
                phase: if degenerate { 1 } else { 3 },
            });
        }
        if !degenerate {
            let stop = if branch_f { plan.stop_f } else { plan.stop_n };
            if n >= stop {
                return Ok(tr.finish(Terminated::TargetMse, toggle_window.unwrap()));
            }
        }
        dt = cfg.t0;
    }
}
