//! Command-line front end.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use super::config::inject_config;
use super::output::{emit_csv, emit_plotdata, to_csv};
use super::presets::{preset, NAMES};
use super::verify::{design_suite, fisher_suite, hessian_suite, oracle_suite, Check};
use super::{run_experiment, with_pool, ExperimentKind, ExperimentSpec, Method};
use crate::accuracy::{
    crb_lambda_f, crb_lambda_f_asymptote, crb_lambda_n, crb_lambda_n_asymptote, crb_u, crb_u_asymptote,
    mse_avg_corrected, mse_avg_uniform, mse_avg_uniform_asymptote, mse_weighted_asymptote, mse_weighted_optimal,
    required_samples,
};
use crate::blind::{
    run_algorithm_i, run_algorithm_ii, AlgoIConfig, AlgoIIConfig, ReplaySource, SampleSource, SimulatedSource,
    Termination, TrajectorySource,
};
use crate::design::{optimal_schedule, optimal_schedule_mse, optimal_weights};
use crate::error::{domain, Error, Result};
use crate::estimators::{
    avg_estimate, avg_estimate_corrected, count_transitions, ml_estimate_lambda_f, ml_estimate_lambda_n,
    ml_estimate_rates_noisy, ml_estimate_u, ml_estimate_u_noisy, weighted_estimate, Estimate, Rate, RateSearch,
};
use crate::seed;
use crate::traffic::{
    corrupt, generate_trajectory, sample_trajectory, FileHeader, SampleSchedule, SampleStream, SensingModel,
    TrafficParams, Trajectory,
};

#[derive(Parser, Debug)]
#[command(name = "putraffic", version, about = "On/off channel traffic estimation toolkit")]
struct Cli {
    /// `key = value` file whose keys mirror the flags; flags on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a trajectory or a sampled stream file.
    Simulate(SimulateArgs),
    /// Run an estimator on a stream file.
    Estimate(EstimateArgs),
    /// Evaluate a closed-form RMS error or bound.
    Bound(BoundArgs),
    /// Optimal sampling schedule and weights.
    Design(DesignArgs),
    /// Run a blind estimation algorithm.
    Blind(BlindArgs),
    /// Run an experiment preset, or a custom sweep.
    Figure(FigureArgs),
    /// Check closed forms against the brute-force oracles.
    Verify(VerifyArgs),
}

/// Traffic parameters; give `lambda_f` or `lambda_n` with `u`.
#[derive(Args, Debug, Clone)]
struct ParamArgs {
    #[arg(long)]
    u: Option<f64>,
    #[arg(long = "lambda-f")]
    lambda_f: Option<f64>,
    #[arg(long = "lambda-n")]
    lambda_n: Option<f64>,
}

impl ParamArgs {
    fn resolve(&self) -> Result<Option<TrafficParams>> {
        Ok(Some(match (self.u, self.lambda_f, self.lambda_n) {
            (None, None, None) => return Ok(None),
            (_, Some(lf), Some(ln)) => TrafficParams::from_rates(lf, ln)?,
            (Some(u), Some(lf), None) => TrafficParams::from_u_lambda_f(u, lf)?,
            (Some(u), None, Some(ln)) => TrafficParams::from_u_lambda_n(u, ln)?,
            _ => return domain("give u with lambda-f or lambda-n, or both rates"),
        }))
    }

    fn required(&self) -> Result<TrafficParams> {
        self.resolve()?.map_or_else(|| domain("traffic parameters are required (--u, --lambda-f)"), Ok)
    }
}

#[derive(Args, Debug, Clone)]
struct SensingArgs {
    /// False-alarm probability.
    #[arg(long)]
    pf: Option<f64>,
    /// Missed-detection probability.
    #[arg(long)]
    pm: Option<f64>,
}

impl SensingArgs {
    fn resolve(&self) -> Result<Option<SensingModel>> {
        match (self.pf, self.pm) {
            (None, None) => Ok(None),
            (pf, pm) => SensingModel::new(pf.unwrap_or(0.0), pm.unwrap_or(0.0)).map(Some),
        }
    }
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct SimulateArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    sensing: SensingArgs,
    /// Observation window in seconds (the trajectory horizon).
    #[arg(long = "T")]
    t: f64,
    /// Number of uniformly spaced samples over the window.
    #[arg(long = "N")]
    n: Option<usize>,
    /// Write the continuous trajectory instead of a sampled stream.
    #[arg(long)]
    trajectory: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file (stdout if absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct EstimateArgs {
    /// Stream file as written by `simulate`.
    #[arg(long)]
    input: PathBuf,
    /// Estimator tag, e.g. avg, weighted, ml_u, ml_lambda_f, ml_rate_noisy.
    #[arg(long)]
    estimator: String,
    /// Known parameters; default to the file header.
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    sensing: SensingArgs,
    /// Accepted for uniformity; estimators are deterministic.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
enum Formula {
    AvgUniform,
    AvgAsymptote,
    AvgCorrected,
    AvgOptimal,
    Weighted,
    WeightedAsymptote,
    CrbU,
    CrbUAsymptote,
    CrbLambdaF,
    CrbLambdaFAsymptote,
    CrbLambdaN,
    CrbLambdaNAsymptote,
    /// Smallest N whose uniform sample-mean MSE is within `beta` of its limit.
    RequiredSamples,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct BoundArgs {
    #[arg(long, value_enum)]
    formula: Formula,
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    sensing: SensingArgs,
    #[arg(long = "N")]
    n: Option<usize>,
    #[arg(long = "T")]
    t: f64,
    /// Relative excess over the limit, for required_samples.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct DesignArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long = "N")]
    n: usize,
    #[arg(long = "T")]
    t: f64,
    /// Also print the optimal weights for uniform spacing.
    #[arg(long)]
    weights: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SourceKind {
    Sim,
    Replay,
    Trajectory,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct BlindArgs {
    /// 1: duty cycle with known lambda_f; 2: duty cycle and rates.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    algorithm: u8,
    #[arg(long, value_enum, default_value_t = SourceKind::Sim)]
    source: SourceKind,
    /// Stream (replay) or trajectory file.
    #[arg(long)]
    input: Option<PathBuf>,
    /// True parameters for `sim`; algorithm 1 also needs lambda_f.
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    sensing: SensingArgs,
    /// Initial sampling interval in seconds.
    #[arg(long, default_value_t = 0.05)]
    t0: f64,
    #[arg(long, default_value_t = 5)]
    n0: usize,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long = "max-samples")]
    max_samples: Option<usize>,
    #[arg(long = "max-window")]
    max_window: Option<f64>,
    #[arg(long = "target-mse")]
    target_mse: Option<f64>,
    /// Algorithm 2 MSE target for u.
    #[arg(long = "target-u-mse", default_value_t = 0.01)]
    target_u_mse: f64,
    /// Algorithm 2 MSE target for the rates.
    #[arg(long = "target-rate-mse", default_value_t = 0.01)]
    target_rate_mse: f64,
    #[arg(long = "lambda-min", default_value_t = 0.1)]
    lambda_min: f64,
    #[arg(long = "lambda-max", default_value_t = 1.0)]
    lambda_max: f64,
    #[arg(long = "u-grid-step", default_value_t = 0.01)]
    u_grid_step: f64,
    /// Write the per-sample trace CSV here.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct FigureArgs {
    /// Preset name, or `custom` with explicit grids.
    preset: String,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV output (plus a `.meta` sidecar); stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Plot-data output.
    #[arg(long)]
    plotdata: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    u: Option<Vec<f64>>,
    #[arg(long = "lambda-f", value_delimiter = ',')]
    lambda_f: Option<Vec<f64>>,
    #[arg(long = "N", value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[arg(long = "T", value_delimiter = ',')]
    t: Option<Vec<f64>>,
    /// `pf:pm` pairs.
    #[arg(long, value_delimiter = ',')]
    sensing: Option<Vec<String>>,
    /// Estimator tags.
    #[arg(long, value_delimiter = ',')]
    estimators: Option<Vec<String>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Suite {
    Oracle,
    Fisher,
    Design,
    Hessian,
    All,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = Suite::All)]
    suite: Suite,
    /// Largest N; defaults to 12 (oracle), 10 (fisher), 8 (design, hessian).
    #[arg(long = "max-n")]
    max_n: Option<usize>,
    /// Random configurations per suite.
    #[arg(long)]
    configs: Option<usize>,
    /// Random feasible schedules per design configuration.
    #[arg(long = "random-schedules", default_value_t = 10_000)]
    random_schedules: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Run the CLI on `argv` (program name first); returns the exit code.
pub fn run_with(argv: Vec<String>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let argv = match inject_config(argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return exit_code(&e);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    let res = match cli.command {
        Command::Simulate(a) => simulate(a, out),
        Command::Estimate(a) => estimate(a, out),
        Command::Bound(a) => bound(a, out),
        Command::Design(a) => design(a, out),
        Command::Blind(a) => blind(a, out),
        Command::Figure(a) => figure(a, out),
        Command::Verify(a) => verify(a, out),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    if e.is_validation() {
        2
    } else {
        1
    }
}

fn io_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn write_output(path: Option<&Path>, text: &str, out: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => out.write_all(text.as_bytes()).map_err(io_err),
    }
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn simulate(a: SimulateArgs, out: &mut dyn Write) -> Result<i32> {
    let p = a.params.required()?;
    let sensing = a.sensing.resolve()?;
    let traj = generate_trajectory(&p, a.t, a.seed)?;
    let header = FileHeader { params: Some(p), seed: Some(a.seed), sensing };
    let text = if a.trajectory {
        traj.to_text(&header)
    } else {
        let n = a.n.ok_or_else(|| Error::Domain("--N is required for a stream".into()))?;
        let mut stream = sample_trajectory(&traj, &SampleSchedule::uniform(n, a.t)?)?;
        if let Some(s) = &sensing {
            stream = corrupt(&stream, s, seed::derive(a.seed, &[1]))?;
        }
        stream.to_text(&header)
    };
    write_output(a.out.as_deref(), &text, out)?;
    Ok(0)
}

fn uniform_spacing(stream: &SampleStream) -> Result<f64> {
    stream
        .schedule()
        .uniform_interval()
        .map_or_else(|| domain("this estimator needs a uniformly sampled stream with N >= 2"), Ok)
}

fn estimate(a: EstimateArgs, out: &mut dyn Write) -> Result<i32> {
    let method: Method = a.estimator.parse()?;
    let (stream, header) = SampleStream::from_text(&read_file(&a.input)?)?;
    let params = a.params.resolve()?.or(header.params);
    let sensing = a.sensing.resolve()?.or(header.sensing).unwrap_or_else(SensingModel::perfect);
    let need = |what: &str| Error::Domain(format!("{what} needs known traffic parameters (flags or file header)"));
    let est: Estimate = match method {
        Method::Avg | Method::AvgOptimal => avg_estimate(&stream)?,
        Method::AvgCorrected => avg_estimate_corrected(&stream, &sensing)?,
        Method::Weighted | Method::WeightedCorrected => {
            let p = params.ok_or_else(|| need("weighted"))?;
            let w = optimal_weights(&p, stream.len(), uniform_spacing(&stream)?)?;
            let s = (method == Method::WeightedCorrected).then_some(&sensing);
            weighted_estimate(&stream, &w, s)?
        }
        Method::MlU => {
            let p = params.ok_or_else(|| need("ml_u"))?;
            ml_estimate_u(&stream, p.lambda_f(), uniform_spacing(&stream)?)?
        }
        Method::MlUNoisy => {
            let p = params.ok_or_else(|| need("ml_u_noisy"))?;
            ml_estimate_u_noisy(&stream, p.lambda_f(), uniform_spacing(&stream)?, &sensing)?
        }
        Method::MlLambdaF => {
            let p = params.ok_or_else(|| need("ml_lambda_f"))?;
            ml_estimate_lambda_f(&count_transitions(&stream)?, p.u(), uniform_spacing(&stream)?)?
        }
        Method::MlLambdaN => {
            let p = params.ok_or_else(|| need("ml_lambda_n"))?;
            ml_estimate_lambda_n(&count_transitions(&stream)?, p.u(), uniform_spacing(&stream)?)?
        }
        Method::MlRateNoisy => {
            let p = params.ok_or_else(|| need("ml_rate_noisy"))?;
            let t_c = uniform_spacing(&stream)?;
            ml_estimate_rates_noisy(&stream, p.u(), t_c, &sensing, Rate::LambdaF, &RateSearch::default())?
        }
    };
    writeln!(out, "{}", est.value).map_err(io_err)?;
    Ok(0)
}

/// RMS (or, for required_samples, a sample count) of the selected formula.
fn bound_value(a: &BoundArgs) -> Result<String> {
    let p = a.params.required()?;
    let n = || a.n.ok_or_else(|| Error::Domain(format!("--N is required for {:?}", a.formula)));
    let t_c = || n().and_then(|n| if n >= 2 { Ok(a.t / (n - 1) as f64) } else { domain("N must be at least 2") });
    let sensing = a.sensing.resolve()?;
    let mse = match a.formula {
        Formula::AvgUniform => mse_avg_uniform(&p, n()?, a.t)?.mse,
        Formula::AvgAsymptote => mse_avg_uniform_asymptote(&p, a.t)?.mse,
        Formula::AvgCorrected => {
            let s = sensing.unwrap_or_else(SensingModel::perfect);
            mse_avg_corrected(&p, &SampleSchedule::uniform(n()?, a.t)?, &s)?.mse
        }
        Formula::AvgOptimal => optimal_schedule_mse(&p, n()?, a.t)?.mse,
        Formula::Weighted => mse_weighted_optimal(&p, n()?, t_c()?, sensing.as_ref())?.mse,
        Formula::WeightedAsymptote => mse_weighted_asymptote(&p, a.t, sensing.as_ref())?.mse,
        Formula::CrbU => crb_u(&p, n()?, t_c()?)?.mse,
        Formula::CrbUAsymptote => crb_u_asymptote(&p, a.t)?.mse,
        Formula::CrbLambdaF => crb_lambda_f(&p, n()?, t_c()?)?.mse,
        Formula::CrbLambdaFAsymptote => crb_lambda_f_asymptote(&p, a.t)?.mse,
        Formula::CrbLambdaN => crb_lambda_n(&p, n()?, t_c()?)?.mse,
        Formula::CrbLambdaNAsymptote => crb_lambda_n_asymptote(&p, a.t)?.mse,
        Formula::RequiredSamples => {
            let beta = a.beta.ok_or_else(|| Error::Domain("--beta is required for required_samples".into()))?;
            return Ok(required_samples(&p, a.t, beta)?.to_string());
        }
    };
    Ok(mse.sqrt().to_string())
}

fn bound(a: BoundArgs, out: &mut dyn Write) -> Result<i32> {
    writeln!(out, "{}", bound_value(&a)?).map_err(io_err)?;
    Ok(0)
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

fn design(a: DesignArgs, out: &mut dyn Write) -> Result<i32> {
    let p = a.params.required()?;
    let sol = optimal_schedule(&p, a.n, a.t)?;
    let mut text = format!(
        "k_regime={}\nt_a={}\nt_b={}\nrms={}\nintervals={}\n",
        sol.k_regime,
        sol.t_a,
        sol.t_b,
        sol.mse_at_optimum.sqrt(),
        join(sol.schedule.intervals())
    );
    if a.weights {
        if a.n < 2 {
            return domain("weights need N >= 2");
        }
        let w = optimal_weights(&p, a.n, a.t / (a.n - 1) as f64)?;
        text.push_str(&format!("weights={}\n", join(w.as_slice())));
    }
    out.write_all(text.as_bytes()).map_err(io_err)?;
    Ok(0)
}

fn blind(a: BlindArgs, out: &mut dyn Write) -> Result<i32> {
    let params = a.params.resolve()?;
    let input = || a.input.as_deref().ok_or_else(|| Error::Domain("--input is required for this source".into()));
    let mut header_params = None;
    let mut src: Box<dyn SampleSource> = match a.source {
        SourceKind::Sim => {
            let p = params.ok_or_else(|| Error::Domain("a simulated source needs --u and --lambda-f".into()))?;
            Box::new(SimulatedSource::new(p, a.sensing.resolve()?, a.seed))
        }
        SourceKind::Replay => {
            let (stream, h) = SampleStream::from_text(&read_file(input()?)?)?;
            header_params = h.params;
            Box::new(ReplaySource::new(&stream))
        }
        SourceKind::Trajectory => {
            let (traj, h): (Trajectory, _) = Trajectory::from_text(&read_file(input()?)?)?;
            header_params = h.params;
            Box::new(TrajectorySource::new(traj))
        }
    };
    let trace = if a.algorithm == 1 {
        let lambda_f = params
            .or(header_params)
            .map(|p| p.lambda_f())
            .ok_or_else(|| Error::Domain("algorithm 1 needs a known lambda_f".into()))?;
        let term = Termination { max_samples: a.max_samples, max_window: a.max_window, target_mse: a.target_mse };
        let cfg = AlgoIConfig { u_grid_step: a.u_grid_step, ..AlgoIConfig::new(a.t0, a.n0, a.alpha, term) };
        run_algorithm_i(src.as_mut(), &cfg, lambda_f)?
    } else {
        let cfg = AlgoIIConfig {
            u_grid_step: a.u_grid_step,
            ..AlgoIIConfig::new(a.t0, a.target_u_mse, a.target_rate_mse, a.lambda_min, a.lambda_max)
        };
        run_algorithm_ii(src.as_mut(), &cfg)?
    };
    if let Some(path) = &a.trace {
        fs::write(path, trace.to_csv()).map_err(|e| Error::io(path, e))?;
    }
    let last = trace.last();
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_else(|| "-".into());
    let text = format!(
        "terminated_by={}\nsamples={}\nwindow={}\ntoggle_window={}\nu_hat={}\nlambda_f_hat={}\nlambda_n_hat={}\n",
        trace.terminated_by,
        trace.total_samples,
        trace.total_window,
        trace.toggle_window,
        last.u_hat,
        opt(last.lambda_f_hat),
        opt(last.lambda_n_hat)
    );
    out.write_all(text.as_bytes()).map_err(io_err)?;
    Ok(0)
}

fn parse_sensing(pair: &str) -> Result<(f64, f64)> {
    let bad = || Error::Parse(format!("sensing pair {pair:?}: expected pf:pm"));
    let (a, b) = pair.split_once(':').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

/// The experiment a `figure` invocation describes.
fn figure_spec(a: &FigureArgs) -> Result<ExperimentSpec> {
    let mut spec = match a.preset.as_str() {
        "custom" => ExperimentSpec { replicates: 1000, ..ExperimentSpec::new(ExperimentKind::Custom) },
        name => preset(name)
            .ok_or_else(|| Error::Parse(format!("unknown preset {name:?}; known: custom, {}", NAMES.join(", "))))?,
    };
    spec.seed = a.seed;
    if let Some(r) = a.replicates {
        spec.replicates = r;
    }
    if let Some(u) = &a.u {
        spec.u = u.clone();
    }
    if let Some(lf) = &a.lambda_f {
        spec.lambda_f = lf.clone();
    }
    if spec.paired && spec.u.len() != spec.lambda_f.len() {
        spec.paired = false;
    }
    if let Some(n) = &a.n {
        spec.n = n.clone();
    }
    if let Some(t) = &a.t {
        spec.t = t.clone();
    }
    if let Some(s) = &a.sensing {
        spec.sensing = s.iter().map(|p| parse_sensing(p)).collect::<Result<_>>()?;
    }
    if let Some(e) = &a.estimators {
        spec.methods = e.iter().map(|m| m.parse()).collect::<Result<_>>()?;
    }
    spec.validate()?;
    Ok(spec)
}

fn figure(a: FigureArgs, out: &mut dyn Write) -> Result<i32> {
    let spec = figure_spec(&a)?;
    let table = with_pool(|| run_experiment(&spec))?;
    match &a.out {
        Some(path) => emit_csv(&table, path)?,
        None => out.write_all(to_csv(&table).as_bytes()).map_err(io_err)?,
    }
    if let Some(path) = &a.plotdata {
        emit_plotdata(&table, path)?;
    }
    Ok(0)
}

fn verify(a: VerifyArgs, out: &mut dyn Write) -> Result<i32> {
    let run = |s: Suite| -> Result<Vec<Check>> {
        match s {
            Suite::Oracle => oracle_suite(a.configs.unwrap_or(200), a.max_n.unwrap_or(12), a.seed),
            Suite::Fisher => fisher_suite(a.configs.unwrap_or(100), a.max_n.unwrap_or(10), a.seed),
            Suite::Design => design_suite(a.configs.unwrap_or(100), a.random_schedules, a.max_n.unwrap_or(8), a.seed),
            Suite::Hessian => hessian_suite(a.configs.unwrap_or(1000), a.max_n.unwrap_or(8), a.seed),
            Suite::All => unreachable!(),
        }
    };
    let suites = match a.suite {
        Suite::All => vec![Suite::Oracle, Suite::Fisher, Suite::Design, Suite::Hessian],
        s => vec![s],
    };
    let mut ok = true;
    for s in suites {
        for c in with_pool(|| run(s))? {
            ok &= c.passed;
            writeln!(out, "{c}").map_err(io_err)?;
        }
    }
    Ok(if ok { 0 } else { 1 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (i32, String, String) {
        let argv = std::iter::once("putraffic").chain(args.iter().copied()).map(String::from).collect();
        let (mut o, mut e) = (Vec::new(), Vec::new());
        let code = run_with(argv, &mut o, &mut e);
        (code, String::from_utf8(o).unwrap(), String::from_utf8(e).unwrap())
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run(&["frobnicate"]).0, 2);
        assert_eq!(run(&["bound", "--formula", "crb_u", "--bogus"]).0, 2);
        let (code, out, _) = run(&["--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("verify"));
    }

    #[test]
    fn domain_errors_exit_two() {
        let (code, _, err) = run(&["bound", "--formula", "crb_u", "--u", "1.5", "--lambda-f", "0.9", "--N", "10", "--T", "5"]);
        assert_eq!(code, 2);
        assert!(err.contains("error"));
    }

    #[test]
    fn missing_input_file_is_runtime_error() {
        let (code, _, err) = run(&["estimate", "--input", "/no/such/stream", "--estimator", "avg"]);
        assert_eq!(code, 1);
        assert!(err.contains("/no/such/stream"));
    }

    #[test]
    fn repeated_flags_take_the_last_value() {
        let a = run(&["bound", "--formula", "avg_uniform", "--u", "0.1", "--u", "0.3", "--lambda-f", "0.9", "--N", "10", "--T", "5"]);
        let b = run(&["bound", "--formula", "avg_uniform", "--u", "0.3", "--lambda-f", "0.9", "--N", "10", "--T", "5"]);
        assert_eq!(a.0, 0);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn sensing_pairs() {
        assert_eq!(parse_sensing("0.05:0.1").unwrap(), (0.05, 0.1));
        assert!(parse_sensing("0.05").is_err());
    }
}
