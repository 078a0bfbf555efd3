//! Monte Carlo experiments, figure presets, result files and the CLI.

pub mod cli;
pub mod config;
pub mod output;
pub mod presets;
pub mod verify;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::accuracy::{
    crb_lambda_f, crb_lambda_f_asymptote, crb_lambda_n, crb_u, crb_u_asymptote, mse_avg_corrected,
    mse_avg_uniform, mse_avg_uniform_asymptote, mse_weighted_asymptote, mse_weighted_optimal,
    oracle::{oracle_mse_enumeration, MAX_ENUMERATION_N},
};
use crate::blind::{
    run_algorithm_i, run_algorithm_ii_with_plan, AlgoIConfig, AlgoIIConfig, AlgoIIPlan, SimulatedSource,
};
use crate::design::{optimal_schedule, optimal_schedule_mse, optimal_weights};
use crate::error::{domain, Error, Result};
use crate::estimators::{
    avg_estimate, avg_estimate_corrected, count_transitions, ml_estimate_lambda_f, ml_estimate_lambda_n,
    ml_estimate_rates_noisy, ml_estimate_u, ml_estimate_u_noisy, weighted_estimate, Rate, RateSearch, WeightVector,
};
use crate::seed;
use crate::traffic::{
    corrupt_with, generate_trajectory_with, sample_trajectory, SampleSchedule, SampleStream, SensingModel,
    TrafficParams,
};

/// Number of batches behind every standard error.
pub const BATCHES: usize = 20;

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "PUTRAFFIC_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    RmsVsN,
    AsymptoteVsT,
    RmsVsU,
    SensingImpact,
    Algo1ConstrainedN,
    Algo1TargetError,
    Algo2Joint,
    Custom,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::RmsVsN,
        ExperimentKind::AsymptoteVsT,
        ExperimentKind::RmsVsU,
        ExperimentKind::SensingImpact,
        ExperimentKind::Algo1ConstrainedN,
        ExperimentKind::Algo1TargetError,
        ExperimentKind::Algo2Joint,
        ExperimentKind::Custom,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            ExperimentKind::RmsVsN => "rms_vs_N",
            ExperimentKind::AsymptoteVsT => "asymptote_vs_T",
            ExperimentKind::RmsVsU => "rms_vs_u",
            ExperimentKind::SensingImpact => "sensing_impact",
            ExperimentKind::Algo1ConstrainedN => "algo1_constrained_N",
            ExperimentKind::Algo1TargetError => "algo1_target_error",
            ExperimentKind::Algo2Joint => "algo2_joint",
            ExperimentKind::Custom => "custom",
        }
    }

    fn is_estimator_sweep(self) -> bool {
        matches!(
            self,
            ExperimentKind::RmsVsN | ExperimentKind::RmsVsU | ExperimentKind::SensingImpact | ExperimentKind::Custom
        )
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.tag() == s)
            .ok_or_else(|| Error::Parse(format!("unknown experiment kind {s:?}")))
    }
}

/// Estimation methods a sweep can apply to each simulated stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Sample mean, uniform sampling.
    Avg,
    /// Sample mean on the MSE-optimal schedule.
    AvgOptimal,
    AvgCorrected,
    /// Optimal weights, uniform sampling.
    Weighted,
    WeightedCorrected,
    MlU,
    MlUNoisy,
    MlLambdaF,
    MlLambdaN,
    /// Forward-algorithm ML of `lambda_f` with `u` known.
    MlRateNoisy,
}

impl Method {
    pub const ALL: [Method; 10] = [
        Method::Avg,
        Method::AvgOptimal,
        Method::AvgCorrected,
        Method::Weighted,
        Method::WeightedCorrected,
        Method::MlU,
        Method::MlUNoisy,
        Method::MlLambdaF,
        Method::MlLambdaN,
        Method::MlRateNoisy,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Method::Avg => "avg",
            Method::AvgOptimal => "avg_optimal",
            Method::AvgCorrected => "avg_corrected",
            Method::Weighted => "weighted",
            Method::WeightedCorrected => "weighted_corrected",
            Method::MlU => "ml_u",
            Method::MlUNoisy => "ml_u_noisy",
            Method::MlLambdaF => "ml_lambda_f",
            Method::MlLambdaN => "ml_lambda_n",
            Method::MlRateNoisy => "ml_rate_noisy",
        }
    }

    /// The true value the method estimates.
    fn truth(self, p: &TrafficParams) -> f64 {
        match self {
            Method::MlLambdaF | Method::MlRateNoisy => p.lambda_f(),
            Method::MlLambdaN => p.lambda_n(),
            _ => p.u(),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.tag() == s)
            .ok_or_else(|| Error::Parse(format!("unknown estimator {s:?}")))
    }
}

/// One Algorithm I setting of an algorithm sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum Algo1Variant {
    Algorithm { label: String, config: AlgoIConfig },
    /// Reference: `n` samples at fixed spacing `t0`, sample mean.
    Uniform { label: String, t0: f64, n: usize },
}

impl Algo1Variant {
    fn label(&self) -> &str {
        match self {
            Algo1Variant::Algorithm { label, .. } | Algo1Variant::Uniform { label, .. } => label,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub u: Vec<f64>,
    pub lambda_f: Vec<f64>,
    /// Zip `u` and `lambda_f` into pairs instead of taking their product.
    pub paired: bool,
    pub n: Vec<usize>,
    pub t: Vec<f64>,
    /// `(p_f, p_m)` pairs.
    pub sensing: Vec<(f64, f64)>,
    pub methods: Vec<Method>,
    pub algo1: Vec<Algo1Variant>,
    pub algo2: Option<AlgoIIConfig>,
    pub replicates: usize,
    pub seed: u64,
    /// Free-form lines copied into the metadata sidecar.
    pub notes: Vec<String>,
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind) -> Self {
        Self {
            kind,
            u: Vec::new(),
            lambda_f: Vec::new(),
            paired: false,
            n: Vec::new(),
            t: Vec::new(),
            sensing: vec![(0.0, 0.0)],
            methods: Vec::new(),
            algo1: Vec::new(),
            algo2: None,
            replicates: 1,
            seed: 0,
            notes: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates < 1 {
            return domain("replicates must be at least 1");
        }
        if self.u.is_empty() || self.lambda_f.is_empty() {
            return domain("u and lambda_f grids must be non-empty");
        }
        if self.paired && self.u.len() != self.lambda_f.len() {
            return domain("paired u and lambda_f grids must have equal length");
        }
        for &u in &self.u {
            for &lf in &self.lambda_f {
                TrafficParams::from_u_lambda_f(u, lf)?;
            }
        }
        match self.kind {
            ExperimentKind::Algo1ConstrainedN | ExperimentKind::Algo1TargetError => {
                if self.algo1.is_empty() {
                    return domain("algorithm I sweep needs at least one variant");
                }
                for v in &self.algo1 {
                    if let Algo1Variant::Algorithm { config, .. } = v {
                        config.validate()?;
                    }
                }
            }
            ExperimentKind::Algo2Joint => match &self.algo2 {
                Some(c) => c.validate()?,
                None => return domain("algorithm II sweep needs a config"),
            },
            _ => {
                if self.t.is_empty() || self.methods.is_empty() || self.sensing.is_empty() {
                    return domain("T, sensing and estimator grids must be non-empty");
                }
                if self.kind != ExperimentKind::AsymptoteVsT && self.n.is_empty() {
                    return domain("N grid must be non-empty");
                }
                if self.t.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
                    return domain("T values must be finite and > 0");
                }
                for &(pf, pm) in &self.sensing {
                    SensingModel::new(pf, pm)?;
                }
            }
        }
        Ok(())
    }

    fn param_points(&self) -> Vec<(f64, f64)> {
        if self.paired {
            self.u.iter().copied().zip(self.lambda_f.iter().copied()).collect()
        } else {
            self.u.iter().flat_map(|&u| self.lambda_f.iter().map(move |&lf| (u, lf))).collect()
        }
    }
}

/// One output row: a grid point and one estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub u: f64,
    pub lambda_f: f64,
    pub lambda_n: f64,
    pub n: usize,
    pub t: f64,
    pub pf: f64,
    pub pm: f64,
    pub estimator: String,
    pub mc_rms: Option<f64>,
    pub mc_se: Option<f64>,
    pub cf_rms: Option<f64>,
    pub crb_rms: Option<f64>,
    pub oracle_rms: Option<f64>,
    /// Set when the estimator could not run on this configuration.
    pub error: Option<String>,
}

impl ResultRow {
    fn blank(p: &TrafficParams, n: usize, t: f64, s: (f64, f64), estimator: impl Into<String>) -> Self {
        Self {
            u: p.u(),
            lambda_f: p.lambda_f(),
            lambda_n: p.lambda_n(),
            n,
            t,
            pf: s.0,
            pm: s.1,
            estimator: estimator.into(),
            mc_rms: None,
            mc_se: None,
            cf_rms: None,
            crb_rms: None,
            oracle_rms: None,
            error: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub replicates: usize,
    pub rows: Vec<ResultRow>,
    pub notes: Vec<String>,
}

/// Squared-error sums of one batch of replicates.
#[derive(Debug, Clone, Copy, Default)]
struct BatchAcc {
    sum_sq: f64,
    count: usize,
    failures: usize,
    samples: f64,
    window: f64,
    toggle_window: f64,
}

impl BatchAcc {
    fn push(&mut self, err: Option<f64>) {
        match err {
            Some(e) if e.is_finite() => {
                self.sum_sq += e * e;
                self.count += 1;
            }
            _ => self.failures += 1,
        }
    }
}

/// Monte Carlo RMS and its batch-means standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McSummary {
    pub rms: f64,
    pub se: f64,
    pub count: usize,
    pub failures: usize,
    pub mean_samples: f64,
    pub mean_window: f64,
    pub mean_toggle_window: f64,
}

fn summarize(batches: &[BatchAcc]) -> Option<McSummary> {
    let count: usize = batches.iter().map(|b| b.count).sum();
    let failures: usize = batches.iter().map(|b| b.failures).sum();
    if count == 0 {
        return None;
    }
    let mse = batches.iter().map(|b| b.sum_sq).sum::<f64>() / count as f64;
    let rms = mse.sqrt();
    let means: Vec<f64> = batches.iter().filter(|b| b.count > 0).map(|b| b.sum_sq / b.count as f64).collect();
    let k = means.len();
    let se = if k >= 2 && rms > 0.0 {
        let m = means.iter().sum::<f64>() / k as f64;
        let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (k - 1) as f64;
        (var / k as f64).sqrt() / (2.0 * rms)
    } else {
        0.0
    };
    let runs = (count + failures) as f64;
    Some(McSummary {
        rms,
        se,
        count,
        failures,
        mean_samples: batches.iter().map(|b| b.samples).sum::<f64>() / runs,
        mean_window: batches.iter().map(|b| b.window).sum::<f64>() / runs,
        mean_toggle_window: batches.iter().map(|b| b.toggle_window).sum::<f64>() / runs,
    })
}

/// Replicate index ranges of the batches.
fn batch_ranges(replicates: usize) -> Vec<(u64, u64)> {
    let b = BATCHES.min(replicates);
    (0..b).map(|i| ((i * replicates / b) as u64, ((i + 1) * replicates / b) as u64)).collect()
}

/// Run `f(grid_index, replicates)` for every grid point and batch in
/// parallel and collect the batches per grid point in order.
fn run_batches<F>(grid_len: usize, replicates: usize, f: F) -> Result<Vec<Vec<Vec<BatchAcc>>>>
where
    F: Fn(usize, std::ops::Range<u64>) -> Result<Vec<BatchAcc>> + Sync,
{
    let ranges = batch_ranges(replicates);
    let tasks: Vec<(usize, usize)> = (0..grid_len).flat_map(|g| (0..ranges.len()).map(move |b| (g, b))).collect();
    let work = || -> Result<Vec<Vec<BatchAcc>>> {
        tasks.par_iter().map(|&(g, b)| f(g, ranges[b].0..ranges[b].1)).collect()
    };
    let flat = with_pool(work)?;
    // flat[g * B + b][slot] -> out[g][slot][b]
    let nb = ranges.len();
    let mut out = Vec::with_capacity(grid_len);
    for g in 0..grid_len {
        let slots = flat[g * nb].len();
        out.push((0..slots).map(|s| (0..nb).map(|b| flat[g * nb + b][s]).collect()).collect());
    }
    Ok(out)
}

/// Run `f` on a pool capped by `PUTRAFFIC_THREADS`, or on the global pool.
pub fn with_pool<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    let threads = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()).filter(|&n| n > 0);
    match threads.and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()) {
        Some(pool) => pool.install(f),
        None => f(),
    }
}

/// Everything about a grid point that does not depend on the replicate.
struct SweepPoint {
    p: TrafficParams,
    n: usize,
    t: f64,
    sensing: (f64, f64),
    model: SensingModel,
    uniform: Option<SampleSchedule>,
    optimal: Option<SampleSchedule>,
    weights: Option<WeightVector>,
}

impl SweepPoint {
    fn t_c(&self) -> f64 {
        self.t / (self.n - 1) as f64
    }
}

fn sweep_points(spec: &ExperimentSpec) -> Result<Vec<SweepPoint>> {
    let mut pts = Vec::new();
    for (u, lf) in spec.param_points() {
        let p = TrafficParams::from_u_lambda_f(u, lf)?;
        for &n in &spec.n {
            for &t in &spec.t {
                for &s in &spec.sensing {
                    let model = SensingModel::new(s.0, s.1)?;
                    let uniform = SampleSchedule::uniform(n, t).ok();
                    let optimal = if spec.methods.contains(&Method::AvgOptimal) {
                        optimal_schedule(&p, n, t).ok().map(|o| o.schedule)
                    } else {
                        None
                    };
                    let weights = if n >= 2 { optimal_weights(&p, n, t / (n - 1) as f64).ok() } else { None };
                    pts.push(SweepPoint { p, n, t, sensing: s, model, uniform, optimal, weights });
                }
            }
        }
    }
    Ok(pts)
}

/// Why a method cannot run at a grid point, if it cannot.
fn method_problem(m: Method, pt: &SweepPoint) -> Option<String> {
    let needs_uniform = !matches!(m, Method::AvgOptimal);
    if needs_uniform && pt.uniform.is_none() {
        return Some(format!("{m} needs a uniform schedule with N >= 2"));
    }
    if m == Method::AvgOptimal && pt.optimal.is_none() {
        return Some("no optimal schedule for this configuration".into());
    }
    if matches!(m, Method::AvgCorrected | Method::WeightedCorrected) && pt.model.check_correctable().is_err() {
        return Some(format!("{m} undefined for p_f + p_m = 1"));
    }
    None
}

/// The estimate of one method on one replicate's streams.
fn apply_method(
    m: Method,
    pt: &SweepPoint,
    uniform: Option<&SampleStream>,
    optimal: Option<&SampleStream>,
    search: &RateSearch,
) -> Option<f64> {
    let p = &pt.p;
    let s = &pt.model;
    let est = match m {
        Method::Avg => avg_estimate(uniform?).map(|e| e.raw),
        Method::AvgOptimal => avg_estimate(optimal?).map(|e| e.raw),
        Method::AvgCorrected => avg_estimate_corrected(uniform?, s).map(|e| e.raw),
        Method::Weighted => weighted_estimate(uniform?, pt.weights.as_ref()?, None).map(|e| e.raw),
        Method::WeightedCorrected => weighted_estimate(uniform?, pt.weights.as_ref()?, Some(s)).map(|e| e.raw),
        Method::MlU => ml_estimate_u(uniform?, p.lambda_f(), pt.t_c()).map(|e| e.value),
        Method::MlUNoisy => ml_estimate_u_noisy(uniform?, p.lambda_f(), pt.t_c(), s).map(|e| e.value),
        Method::MlLambdaF => {
            count_transitions(uniform?).and_then(|c| ml_estimate_lambda_f(&c, p.u(), pt.t_c())).map(|e| e.value)
        }
        Method::MlLambdaN => {
            count_transitions(uniform?).and_then(|c| ml_estimate_lambda_n(&c, p.u(), pt.t_c())).map(|e| e.value)
        }
        Method::MlRateNoisy => {
            ml_estimate_rates_noisy(uniform?, p.u(), pt.t_c(), s, Rate::LambdaF, search).map(|e| e.value)
        }
    };
    est.ok().map(|v| v - m.truth(p))
}

type BitsFn<'a> = Box<dyn Fn(&[bool]) -> f64 + 'a>;

/// The estimator as a function of raw bits, for the enumeration oracle.
fn method_on_bits(m: Method, pt: &SweepPoint) -> Option<BitsFn<'_>> {
    let mean = |b: &[bool]| b.iter().filter(|&&x| x).count() as f64 / b.len() as f64;
    let (pf, g) = (pt.model.p_f(), pt.model.gain());
    let wsum = move |w: &WeightVector, b: &[bool]| -> f64 {
        w.as_slice().iter().zip(b).filter(|(_, &x)| x).map(|(w, _)| w).sum()
    };
    match m {
        Method::Avg | Method::AvgOptimal => Some(Box::new(mean)),
        Method::AvgCorrected => Some(Box::new(move |b: &[bool]| (mean(b) - pf) / g)),
        Method::Weighted => {
            let w = pt.weights.as_ref()?;
            Some(Box::new(move |b: &[bool]| wsum(w, b)))
        }
        Method::WeightedCorrected => {
            let w = pt.weights.as_ref()?;
            Some(Box::new(move |b: &[bool]| (wsum(w, b) - pf) / g))
        }
        Method::MlU => {
            let (lf, tc) = (pt.p.lambda_f(), pt.t_c());
            Some(Box::new(move |b: &[bool]| {
                SampleStream::uniform(b.to_vec(), tc)
                    .and_then(|st| ml_estimate_u(&st, lf, tc))
                    .map_or(f64::NAN, |e| e.value)
            }))
        }
        _ => None,
    }
}

/// Closed-form, bound and oracle RMS columns of a method at a grid point.
fn reference_columns(m: Method, pt: &SweepPoint) -> (Option<f64>, Option<f64>, Option<f64>) {
    let p = &pt.p;
    let s = &pt.model;
    let perfect = s.is_perfect();
    let rms = |r: Result<crate::accuracy::ErrorReport>| r.ok().map(|r| r.rms);
    let n = pt.n;
    let cf = match m {
        Method::Avg if perfect => rms(mse_avg_uniform(p, n, pt.t)),
        Method::AvgOptimal if perfect => rms(optimal_schedule_mse(p, n, pt.t)),
        Method::AvgCorrected => pt.uniform.as_ref().and_then(|sch| rms(mse_avg_corrected(p, sch, s))),
        Method::Weighted if perfect => rms(mse_weighted_optimal(p, n, pt.t_c(), None)),
        Method::WeightedCorrected => rms(mse_weighted_optimal(p, n, pt.t_c(), Some(s))),
        _ => None,
    };
    let crb = match m {
        Method::MlU | Method::MlUNoisy if perfect => rms(crb_u(p, n, pt.t_c())),
        Method::MlLambdaF | Method::MlRateNoisy if perfect => rms(crb_lambda_f(p, n, pt.t_c())),
        Method::MlLambdaN if perfect => rms(crb_lambda_n(p, n, pt.t_c())),
        _ => None,
    };
    let oracle = if n <= ORACLE_MAX_N {
        let sched = if m == Method::AvgOptimal { pt.optimal.as_ref() } else { pt.uniform.as_ref() };
        match (sched, method_on_bits(m, pt)) {
            (Some(sched), Some(f)) => {
                let sm = (!perfect).then_some(s);
                oracle_mse_enumeration(p, sched, &*f, sm).ok().map(|r| r.rms).filter(|v| v.is_finite())
            }
            _ => None,
        }
    } else {
        None
    };
    (cf, crb, oracle)
}

/// Largest `N` for which sweeps attach the enumeration oracle.
pub const ORACLE_MAX_N: usize = 12;
const _: () = assert!(ORACLE_MAX_N <= MAX_ENUMERATION_N);

/// Streams of one replicate; every method of a grid point sees the same
/// trajectory and sensing noise.
fn replicate_streams(
    spec: &ExperimentSpec,
    g: usize,
    r: u64,
    pt: &SweepPoint,
) -> Result<(Option<SampleStream>, Option<SampleStream>)> {
    let traj = generate_trajectory_with(&pt.p, pt.t, seed::rng(spec.seed, &[g as u64, r, 0]))?;
    let mut noise = seed::rng(spec.seed, &[g as u64, r, 1]);
    let mut read = |sched: Option<&SampleSchedule>| -> Result<Option<SampleStream>> {
        let Some(sched) = sched else { return Ok(None) };
        let clean = sample_trajectory(&traj, sched)?;
        Ok(Some(if pt.model.is_perfect() { clean } else { corrupt_with(&clean, &pt.model, &mut noise)? }))
    };
    let uniform = read(pt.uniform.as_ref())?;
    let optimal = read(pt.optimal.as_ref())?;
    Ok((uniform, optimal))
}

fn run_estimator_sweep(spec: &ExperimentSpec) -> Result<ResultTable> {
    let points = sweep_points(spec)?;
    let search = RateSearch::default();
    let batches = run_batches(points.len(), spec.replicates, |g, reps| {
        let pt = &points[g];
        let mut acc = vec![BatchAcc::default(); spec.methods.len()];
        let runnable: Vec<bool> = spec.methods.iter().map(|&m| method_problem(m, pt).is_none()).collect();
        for r in reps {
            let (uni, opt) = replicate_streams(spec, g, r, pt)?;
            for (i, &m) in spec.methods.iter().enumerate() {
                if runnable[i] {
                    acc[i].push(apply_method(m, pt, uni.as_ref(), opt.as_ref(), &search));
                }
            }
        }
        Ok(acc)
    })?;
    let mut rows = Vec::new();
    let mut notes = Vec::new();
    for (g, pt) in points.iter().enumerate() {
        for (i, &m) in spec.methods.iter().enumerate() {
            let mut row = ResultRow::blank(&pt.p, pt.n, pt.t, pt.sensing, m.tag());
            if let Some(problem) = method_problem(m, pt) {
                row.error = Some(problem);
                rows.push(row);
                continue;
            }
            match summarize(&batches[g][i]) {
                Some(s) => {
                    row.mc_rms = Some(s.rms);
                    row.mc_se = Some(s.se);
                    if s.failures > 0 {
                        notes.push(format!(
                            "row {}: {m} failed on {} of {} replicates (excluded)",
                            rows.len(),
                            s.failures,
                            s.failures + s.count
                        ));
                    }
                }
                None => row.error = Some(format!("{m} failed on every replicate")),
            }
            let (cf, crb, oracle) = reference_columns(m, pt);
            row.cf_rms = cf;
            row.crb_rms = crb;
            row.oracle_rms = oracle;
            rows.push(row);
        }
    }
    Ok(ResultTable { kind: spec.kind, seed: spec.seed, replicates: spec.replicates, rows, notes })
}

/// Samples used for the numerically evaluated optimal-schedule limit.
pub const OPTIMAL_LIMIT_N: usize = 1000;

fn run_asymptotes(spec: &ExperimentSpec) -> Result<ResultTable> {
    let mut rows = Vec::new();
    for (u, lf) in spec.param_points() {
        let p = TrafficParams::from_u_lambda_f(u, lf)?;
        for &t in &spec.t {
            for &sens in &spec.sensing {
                let s = SensingModel::new(sens.0, sens.1)?;
                let sm = (!s.is_perfect()).then_some(&s);
                for &m in &spec.methods {
                    let mut row = ResultRow::blank(&p, 0, t, sens, m.tag());
                    let outcome = match m {
                        Method::Avg if sm.is_none() => mse_avg_uniform_asymptote(&p, t).map(|r| row.cf_rms = Some(r.rms)),
                        Method::AvgOptimal if sm.is_none() => {
                            row.n = OPTIMAL_LIMIT_N;
                            optimal_schedule_mse(&p, OPTIMAL_LIMIT_N, t).map(|r| row.cf_rms = Some(r.rms))
                        }
                        Method::Weighted | Method::WeightedCorrected => {
                            mse_weighted_asymptote(&p, t, sm).map(|r| row.cf_rms = Some(r.rms))
                        }
                        Method::MlU if sm.is_none() => crb_u_asymptote(&p, t).map(|r| row.crb_rms = Some(r.rms)),
                        Method::MlLambdaF if sm.is_none() => {
                            crb_lambda_f_asymptote(&p, t).map(|r| row.crb_rms = Some(r.rms))
                        }
                        Method::MlLambdaN if sm.is_none() => {
                            crate::accuracy::crb_lambda_n_asymptote(&p, t).map(|r| row.crb_rms = Some(r.rms))
                        }
                        _ => Err(Error::Domain(format!("no asymptote for {m} under this sensing model"))),
                    };
                    if let Err(e) = outcome {
                        row.error = Some(e.to_string());
                    }
                    rows.push(row);
                }
            }
        }
    }
    let notes = vec![
        "N = 0 marks the N -> infinity limit".to_string(),
        format!("avg_optimal limit evaluated numerically at N = {OPTIMAL_LIMIT_N}"),
    ];
    Ok(ResultTable { kind: spec.kind, seed: spec.seed, replicates: spec.replicates, rows, notes })
}

fn run_algo1(spec: &ExperimentSpec) -> Result<ResultTable> {
    let params: Vec<TrafficParams> =
        spec.param_points().into_iter().map(|(u, lf)| TrafficParams::from_u_lambda_f(u, lf)).collect::<Result<_>>()?;
    let nv = spec.algo1.len();
    let grid: Vec<(usize, usize)> = (0..params.len()).flat_map(|i| (0..nv).map(move |v| (i, v))).collect();
    let batches = run_batches(grid.len(), spec.replicates, |g, reps| {
        let (pi, vi) = grid[g];
        let p = params[pi];
        let mut acc = BatchAcc::default();
        for r in reps {
            let traffic = seed::rng(spec.seed, &[g as u64, r, 0]);
            let noise = seed::rng(spec.seed, &[g as u64, r, 1]);
            match &spec.algo1[vi] {
                Algo1Variant::Algorithm { config, .. } => {
                    let mut src = SimulatedSource::with_rngs(p, None, traffic, noise);
                    let tr = run_algorithm_i(&mut src, config, p.lambda_f())?;
                    acc.push(Some(tr.u_hat() - p.u()));
                    acc.samples += tr.total_samples as f64;
                    acc.window += tr.total_window;
                    acc.toggle_window += tr.toggle_window;
                }
                Algo1Variant::Uniform { t0, n, .. } => {
                    let sched = SampleSchedule::with_interval(*n, *t0)?;
                    let traj = generate_trajectory_with(&p, sched.window(), traffic)?;
                    let st = sample_trajectory(&traj, &sched)?;
                    acc.push(Some(st.ones() as f64 / st.len() as f64 - p.u()));
                    acc.samples += *n as f64;
                    acc.window += sched.window();
                }
            }
        }
        Ok(vec![acc])
    })?;
    let mut rows = Vec::new();
    let mut notes = vec![
        "N and T columns hold the mean number of samples and mean observation window".to_string(),
        "cf_rms of algorithm rows: sqrt(u(1-u)/N_th), the independent-sample bound".to_string(),
    ];
    for (g, &(pi, vi)) in grid.iter().enumerate() {
        let p = params[pi];
        let v = &spec.algo1[vi];
        let s = summarize(&batches[g][0]).expect("algorithm runs always produce an estimate");
        let mut row = ResultRow::blank(&p, s.mean_samples.round() as usize, s.mean_window, (0.0, 0.0), v.label());
        row.mc_rms = Some(s.rms);
        row.mc_se = Some(s.se);
        match v {
            Algo1Variant::Algorithm { config, .. } => {
                if let Some(nth) = config.termination.max_samples {
                    row.cf_rms = Some((p.variance() / nth as f64).sqrt());
                }
                notes.push(format!("row {}: mean window excluding toggle search {}", rows.len(), s.mean_window - s.mean_toggle_window));
            }
            Algo1Variant::Uniform { t0, n, .. } => {
                row.cf_rms = mse_avg_uniform(&p, *n, (*n - 1) as f64 * t0).ok().map(|r| r.rms);
            }
        }
        rows.push(row);
    }
    Ok(ResultTable { kind: spec.kind, seed: spec.seed, replicates: spec.replicates, rows, notes })
}

fn run_algo2(spec: &ExperimentSpec) -> Result<ResultTable> {
    let cfg = AlgoIIConfig { record_rows: false, ..spec.algo2.clone().expect("validated") };
    let plan = AlgoIIPlan::new(&cfg)?;
    let params: Vec<TrafficParams> =
        spec.param_points().into_iter().map(|(u, lf)| TrafficParams::from_u_lambda_f(u, lf)).collect::<Result<_>>()?;
    let batches = run_batches(params.len(), spec.replicates, |g, reps| {
        let p = params[g];
        let (mut au, mut ar) = (BatchAcc::default(), BatchAcc::default());
        for r in reps {
            let mut src = SimulatedSource::with_rngs(
                p,
                None,
                seed::rng(spec.seed, &[g as u64, r, 0]),
                seed::rng(spec.seed, &[g as u64, r, 1]),
            );
            let tr = run_algorithm_ii_with_plan(&mut src, &cfg, &plan)?;
            let last = tr.last();
            au.push(Some(last.u_hat - p.u()));
            let rate_err = if last.u_hat <= 0.5 {
                last.lambda_f_hat.map(|v| v - p.lambda_f())
            } else {
                last.lambda_n_hat.map(|v| v - p.lambda_n())
            };
            ar.push(rate_err);
            for a in [&mut au, &mut ar] {
                a.samples += tr.total_samples as f64;
                a.window += tr.total_window;
                a.toggle_window += tr.toggle_window;
            }
        }
        Ok(vec![au, ar])
    })?;
    let mut rows = Vec::new();
    let mut notes = vec![
        "N and T columns hold the mean number of samples and mean observation window".to_string(),
        format!("stopping counts: lambda_f branch {}, lambda_n branch {}", plan.stop_f, plan.stop_n),
        "algo2_rate rows: error in lambda_f when the final u estimate is <= 0.5, else in lambda_n".to_string(),
    ];
    for (g, p) in params.iter().enumerate() {
        for (slot, label) in [(0, "algo2_u"), (1, "algo2_rate")] {
            let Some(s) = summarize(&batches[g][slot]) else {
                let mut row = ResultRow::blank(p, 0, 0.0, (0.0, 0.0), label);
                row.error = Some("no run produced an estimate".into());
                rows.push(row);
                continue;
            };
            let mut row = ResultRow::blank(p, s.mean_samples.round() as usize, s.mean_window, (0.0, 0.0), label);
            row.mc_rms = Some(s.rms);
            row.mc_se = Some(s.se);
            if slot == 0 {
                notes.push(format!(
                    "row {}: mean window excluding toggle search {}",
                    rows.len(),
                    s.mean_window - s.mean_toggle_window
                ));
            } else if s.failures > 0 {
                notes.push(format!("row {}: rate estimate unavailable in {} runs (excluded)", rows.len(), s.failures));
            }
            rows.push(row);
        }
    }
    Ok(ResultTable { kind: spec.kind, seed: spec.seed, replicates: spec.replicates, rows, notes })
}

/// Simulate every grid point `replicates` times and tabulate Monte Carlo
/// RMS next to the matching closed forms. Deterministic in `(spec, seed)`
/// whatever the thread count.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ResultTable> {
    spec.validate()?;
    let mut table = match spec.kind {
        k if k.is_estimator_sweep() => run_estimator_sweep(spec)?,
        ExperimentKind::AsymptoteVsT => run_asymptotes(spec)?,
        ExperimentKind::Algo1ConstrainedN | ExperimentKind::Algo1TargetError => run_algo1(spec)?,
        ExperimentKind::Algo2Joint => run_algo2(spec)?,
        _ => unreachable!(),
    };
    let mut notes = spec.notes.clone();
    notes.append(&mut table.notes);
    table.notes = notes;
    Ok(table)
}
