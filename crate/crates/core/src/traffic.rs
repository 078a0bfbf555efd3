//! Ground-truth on/off traffic: parameters, transition probabilities,
//! trajectories, sampling and sensing errors.

use std::fmt::Write as _;

use crate::error::{domain, Error, Result};
use crate::seed::{self, Rng};

/// Relative tolerance used when deciding whether a schedule is uniform.
const UNIFORM_RTOL: f64 = 1e-9;

/// Parameters of the on/off process.
///
/// Off sojourns are exponential with rate `lambda_f`, on sojourns with rate
/// `lambda_n`, so the duty cycle is `u = lambda_f / (lambda_f + lambda_n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficParams {
    u: f64,
    lambda_f: f64,
    lambda_n: f64,
}

fn check_rate(name: &str, x: f64) -> Result<()> {
    if !(x.is_finite() && x > 0.0) {
        return domain(format!("{name} must be finite and > 0, got {x}"));
    }
    Ok(())
}

fn check_duty(u: f64) -> Result<()> {
    if !(u > 0.0 && u < 1.0) {
        return domain(format!("duty cycle u must lie in (0, 1), got {u}"));
    }
    Ok(())
}

impl TrafficParams {
    /// From duty cycle and departure rate.
    pub fn from_u_lambda_f(u: f64, lambda_f: f64) -> Result<Self> {
        check_duty(u)?;
        check_rate("lambda_f", lambda_f)?;
        Ok(Self { u, lambda_f, lambda_n: lambda_f * (1.0 - u) / u })
    }

    /// From duty cycle and arrival rate.
    pub fn from_u_lambda_n(u: f64, lambda_n: f64) -> Result<Self> {
        check_duty(u)?;
        check_rate("lambda_n", lambda_n)?;
        Ok(Self { u, lambda_f: lambda_n * u / (1.0 - u), lambda_n })
    }

    /// From both rates.
    pub fn from_rates(lambda_f: f64, lambda_n: f64) -> Result<Self> {
        check_rate("lambda_f", lambda_f)?;
        check_rate("lambda_n", lambda_n)?;
        let u = lambda_f / (lambda_f + lambda_n);
        check_duty(u)?;
        Ok(Self { u, lambda_f, lambda_n })
    }

    pub fn u(&self) -> f64 {
        self.u
    }

    pub fn lambda_f(&self) -> f64 {
        self.lambda_f
    }

    pub fn lambda_n(&self) -> f64 {
        self.lambda_n
    }

    pub fn mean_off_time(&self) -> f64 {
        1.0 / self.lambda_f
    }

    pub fn mean_on_time(&self) -> f64 {
        1.0 / self.lambda_n
    }

    /// Decay rate `lambda_f / u` of the state correlation.
    pub fn decay_rate(&self) -> f64 {
        self.lambda_f / self.u
    }

    /// Correlation decay factor `exp(-lambda_f t / u)`.
    pub fn gamma(&self, t: f64) -> f64 {
        (-t * self.decay_rate()).exp()
    }

    /// `1 - gamma(t)` without cancellation for small `t`.
    pub fn one_minus_gamma(&self, t: f64) -> f64 {
        -(-t * self.decay_rate()).exp_m1()
    }

    /// Variance `u(1-u)` of a single sample.
    pub fn variance(&self) -> f64 {
        self.u * (1.0 - self.u)
    }
}

/// Transition probability `Pr(state y at time t | state x at time 0)`.
///
/// The two probabilities out of a state sum to exactly one in floating point.
pub fn transition_prob(x: bool, y: bool, t: f64, p: &TrafficParams) -> Result<f64> {
    if !(t >= 0.0) {
        return domain(format!("elapsed time must be >= 0, got {t}"));
    }
    Ok(transition_prob_unchecked(x, y, t, p))
}

pub(crate) fn transition_prob_unchecked(x: bool, y: bool, t: f64, p: &TrafficParams) -> f64 {
    let u = p.u();
    let omg = p.one_minus_gamma(t);
    let g = 1.0 - omg;
    // leaving probability and staying probability, both in direct form
    let (leave, stay) = if x { ((1.0 - u) * omg, u + (1.0 - u) * g) } else { (u * omg, 1.0 - u + u * g) };
    // take the smaller one as accurate and derive the other so that they sum to one exactly
    let (leave, stay) = if leave <= stay {
        let s = 1.0 - leave;
        (1.0 - s, s)
    } else {
        (1.0 - stay, stay)
    };
    if x == y {
        stay
    } else {
        leave
    }
}

/// Stationary correlation `E[z_i z_{i+j}]` for uniform spacing `t_c`.
pub fn stationary_correlation(j: usize, p: &TrafficParams, t_c: f64) -> Result<f64> {
    if !(t_c > 0.0 && t_c.is_finite()) {
        return domain(format!("sample spacing must be finite and > 0, got {t_c}"));
    }
    let u = p.u();
    let gj = p.gamma(j as f64 * t_c);
    Ok(u * gj + u * u * (1.0 - gj))
}

/// Correlation `E[ẑ_i ẑ_{i+j}]` of sensed samples.
///
/// For `j >= 1` the sensing errors are independent and the result is
/// `R[j](1-Pf-Pm)^2 + 2uPf(1-Pf-Pm) + Pf^2`. At lag zero `ẑ^2 = ẑ`, so the
/// value is the sensed mean `(1-Pf-Pm)u + Pf`.
pub fn sensed_correlation(j: usize, p: &TrafficParams, t_c: f64, s: &SensingModel) -> Result<f64> {
    let r = stationary_correlation(j, p, t_c)?;
    let g = s.gain();
    let (u, pf) = (p.u(), s.p_f());
    if j == 0 {
        return Ok(g * u + pf);
    }
    Ok(r * g * g + 2.0 * u * pf * g + pf * pf)
}

/// False-alarm and mis-detection probabilities of the sensing device.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensingModel {
    p_f: f64,
    p_m: f64,
}

impl SensingModel {
    pub fn new(p_f: f64, p_m: f64) -> Result<Self> {
        for (name, v) in [("p_f", p_f), ("p_m", p_m)] {
            if !(0.0..=1.0).contains(&v) {
                return domain(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        Ok(Self { p_f, p_m })
    }

    pub fn perfect() -> Self {
        Self { p_f: 0.0, p_m: 0.0 }
    }

    pub fn p_f(&self) -> f64 {
        self.p_f
    }

    pub fn p_m(&self) -> f64 {
        self.p_m
    }

    pub fn is_perfect(&self) -> bool {
        self.p_f == 0.0 && self.p_m == 0.0
    }

    /// `1 - p_f - p_m`, the attenuation of the mean by sensing errors.
    pub fn gain(&self) -> f64 {
        1.0 - self.p_f - self.p_m
    }

    /// Fails when bias correction is impossible.
    pub fn check_correctable(&self) -> Result<()> {
        if self.gain() == 0.0 {
            return Err(Error::UndefinedEstimator { p_f: self.p_f, p_m: self.p_m });
        }
        Ok(())
    }

    /// Probability of observing `observed` when the true state is `truth`.
    pub fn emission(&self, truth: bool, observed: bool) -> f64 {
        match (truth, observed) {
            (false, false) => 1.0 - self.p_f,
            (false, true) => self.p_f,
            (true, false) => self.p_m,
            (true, true) => 1.0 - self.p_m,
        }
    }
}

/// Inter-sample times of a sampling plan and the time of the first sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSchedule {
    intervals: Vec<f64>,
    start_offset: f64,
}

impl SampleSchedule {
    pub fn new(intervals: Vec<f64>, start_offset: f64) -> Result<Self> {
        if let Some(bad) = intervals.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return domain(format!("inter-sample times must be finite and >= 0, got {bad}"));
        }
        if !(start_offset.is_finite() && start_offset >= 0.0) {
            return domain(format!("start offset must be finite and >= 0, got {start_offset}"));
        }
        Ok(Self { intervals, start_offset })
    }

    /// `n` samples spread evenly over a window of `t_window` seconds.
    pub fn uniform(n: usize, t_window: f64) -> Result<Self> {
        if n < 2 {
            return domain(format!("a uniform schedule over a window needs N >= 2, got {n}"));
        }
        if !(t_window.is_finite() && t_window > 0.0) {
            return domain(format!("window must be finite and > 0, got {t_window}"));
        }
        Ok(Self { intervals: vec![t_window / (n - 1) as f64; n - 1], start_offset: 0.0 })
    }

    /// `n` samples with constant spacing `t_c`.
    pub fn with_interval(n: usize, t_c: f64) -> Result<Self> {
        if n == 0 {
            return domain("a schedule needs at least one sample");
        }
        Self::new(vec![t_c; n - 1], 0.0)
    }

    pub fn intervals(&self) -> &[f64] {
        &self.intervals
    }

    pub fn start_offset(&self) -> f64 {
        self.start_offset
    }

    /// Number of samples.
    pub fn n(&self) -> usize {
        self.intervals.len() + 1
    }

    /// Observation window: the sum of the inter-sample times.
    pub fn window(&self) -> f64 {
        self.intervals.iter().sum()
    }

    /// Absolute sample times.
    pub fn sample_times(&self) -> Vec<f64> {
        let mut t = self.start_offset;
        let mut out = Vec::with_capacity(self.n());
        out.push(t);
        for dt in &self.intervals {
            t += dt;
            out.push(t);
        }
        out
    }

    /// Constant spacing if the schedule is uniform (to a relative 1e-9).
    pub fn uniform_interval(&self) -> Option<f64> {
        let first = *self.intervals.first()?;
        if self.intervals.iter().all(|&t| t == first) {
            return Some(first);
        }
        let mean = self.window() / self.intervals.len() as f64;
        let ok = self.intervals.iter().all(|&t| (t - mean).abs() <= UNIFORM_RTOL * mean.abs());
        ok.then_some(mean)
    }

    /// Same intervals in reverse order.
    pub fn reversed(&self) -> Self {
        let mut intervals = self.intervals.clone();
        intervals.reverse();
        Self { intervals, start_offset: self.start_offset }
    }
}

/// Observed bits aligned to a schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleStream {
    values: Vec<bool>,
    schedule: SampleSchedule,
    sensed: bool,
}

impl SampleStream {
    pub fn new(values: Vec<bool>, schedule: SampleSchedule, sensed: bool) -> Result<Self> {
        if values.len() != schedule.n() {
            return domain(format!(
                "stream has {} values but the schedule has {} samples",
                values.len(),
                schedule.n()
            ));
        }
        Ok(Self { values, schedule, sensed })
    }

    /// Unsensed stream with constant spacing `t_c`.
    pub fn uniform(values: Vec<bool>, t_c: f64) -> Result<Self> {
        let sched = SampleSchedule::with_interval(values.len(), t_c)?;
        Self::new(values, sched, false)
    }

    pub fn values(&self) -> &[bool] {
        &self.values
    }

    pub fn schedule(&self) -> &SampleSchedule {
        &self.schedule
    }

    pub fn is_sensed(&self) -> bool {
        self.sensed
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The same stream marked as sensed (for data that came from a real sensor).
    pub fn into_sensed(mut self) -> Self {
        self.sensed = true;
        self
    }

    pub fn ones(&self) -> usize {
        self.values.iter().filter(|&&b| b).count()
    }
}

/// A realization of the continuous-time process on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    initial_state: bool,
    switch_times: Vec<f64>,
    horizon: f64,
}

impl Trajectory {
    pub fn new(initial_state: bool, switch_times: Vec<f64>, horizon: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return domain(format!("horizon must be finite and > 0, got {horizon}"));
        }
        let mut prev = 0.0;
        for &t in &switch_times {
            if !(t > prev && t < horizon) {
                return domain("switch times must be strictly increasing inside (0, horizon)");
            }
            prev = t;
        }
        Ok(Self { initial_state, switch_times, horizon })
    }

    pub fn initial_state(&self) -> bool {
        self.initial_state
    }

    pub fn switch_times(&self) -> &[f64] {
        &self.switch_times
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// State at time `t`; a switch at exactly `t` has already happened.
    pub fn state_at(&self, t: f64) -> bool {
        let k = self.switch_times.partition_point(|&s| s <= t);
        self.initial_state ^ (k % 2 == 1)
    }

    /// Total time spent on within `[0, horizon]`.
    pub fn time_on(&self) -> f64 {
        let mut state = self.initial_state;
        let mut last = 0.0;
        let mut on = 0.0;
        for &s in self.switch_times.iter().chain(std::iter::once(&self.horizon)) {
            if state {
                on += s - last;
            }
            last = s;
            state = !state;
        }
        on
    }
}

/// Lazily generated realization of the process, advanced forward in time.
///
/// Used both to build finite [`Trajectory`] values and as the live source of
/// the blind algorithms, which do not know their horizon in advance.
#[derive(Debug, Clone)]
pub struct Process {
    params: TrafficParams,
    rng: Rng,
    state: bool,
    next_switch: f64,
    now: f64,
}

impl Process {
    /// Starts in the stationary distribution at time zero.
    pub fn new(params: TrafficParams, mut rng: Rng) -> Self {
        let state = seed::bernoulli(&mut rng, params.u());
        let next_switch = Self::sojourn(&params, state, &mut rng);
        Self { params, rng, state, next_switch, now: 0.0 }
    }

    fn sojourn(p: &TrafficParams, state: bool, rng: &mut Rng) -> f64 {
        seed::exponential(rng, if state { p.lambda_n() } else { p.lambda_f() })
    }

    pub fn state(&self) -> bool {
        self.state
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    /// Move to time `t >= now`, calling `on_switch` for every switch passed.
    pub fn advance_with(&mut self, t: f64, mut on_switch: impl FnMut(f64)) -> bool {
        debug_assert!(t >= self.now);
        while self.next_switch <= t {
            on_switch(self.next_switch);
            self.state = !self.state;
            self.next_switch += Self::sojourn(&self.params, self.state, &mut self.rng);
        }
        self.now = t;
        self.state
    }

    pub fn advance(&mut self, t: f64) -> bool {
        self.advance_with(t, |_| {})
    }
}

/// Simulate the process on `[0, horizon]`.
pub fn generate_trajectory(p: &TrafficParams, horizon: f64, seed: u64) -> Result<Trajectory> {
    generate_trajectory_with(p, horizon, seed::rng(seed, &[]))
}

/// Simulate with an explicit generator.
pub fn generate_trajectory_with(p: &TrafficParams, horizon: f64, rng: Rng) -> Result<Trajectory> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return domain(format!("horizon must be finite and > 0, got {horizon}"));
    }
    let mut proc = Process::new(*p, rng);
    let initial_state = proc.state();
    let mut switches = Vec::new();
    proc.advance_with(horizon, |s| {
        if s < horizon {
            switches.push(s)
        }
    });
    // a zero-length first sojourn is not representable; it has probability zero
    switches.retain(|&s| s > 0.0);
    Ok(Trajectory { initial_state, switch_times: switches, horizon })
}

/// Read the trajectory at the schedule's sample times.
pub fn sample_trajectory(traj: &Trajectory, sched: &SampleSchedule) -> Result<SampleStream> {
    let times = sched.sample_times();
    let last = *times.last().expect("schedules have at least one sample");
    // cumulative sums of the intervals may overshoot the window by rounding
    if last > traj.horizon() * (1.0 + 1e-12) {
        return domain(format!(
            "last sample at {last} s is beyond the trajectory horizon {} s",
            traj.horizon()
        ));
    }
    let values = times.iter().map(|&t| traj.state_at(t)).collect();
    SampleStream::new(values, sched.clone(), false)
}

/// Pass a true stream through the sensing-error channel.
pub fn corrupt(stream: &SampleStream, s: &SensingModel, seed: u64) -> Result<SampleStream> {
    corrupt_with(stream, s, &mut seed::rng(seed, &[]))
}

/// Corrupt with an explicit generator.
pub fn corrupt_with(stream: &SampleStream, s: &SensingModel, rng: &mut Rng) -> Result<SampleStream> {
    if stream.is_sensed() {
        return domain("stream is already sensed; corrupting it twice is not allowed");
    }
    let values = stream
        .values()
        .iter()
        .map(|&z| {
            let flip = if z { s.p_m() } else { s.p_f() };
            z ^ flip_bit(rng, flip)
        })
        .collect();
    SampleStream::new(values, stream.schedule().clone(), true)
}

fn flip_bit(rng: &mut Rng, p: f64) -> bool {
    p > 0.0 && seed::bernoulli(rng, p)
}

// ---------------------------------------------------------------------------
// Text formats

/// Header metadata of a trajectory or stream file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FileHeader {
    pub params: Option<TrafficParams>,
    pub seed: Option<u64>,
    pub sensing: Option<SensingModel>,
}

impl FileHeader {
    fn write(&self, kind: &str, extra: &[(&str, String)], out: &mut String) {
        let _ = writeln!(out, "# putraffic {kind}");
        let mut kv: Vec<(String, String)> = Vec::new();
        if let Some(p) = &self.params {
            kv.push(("u".into(), p.u().to_string()));
            kv.push(("lambda_f".into(), p.lambda_f().to_string()));
            kv.push(("lambda_n".into(), p.lambda_n().to_string()));
        }
        if let Some(seed) = self.seed {
            kv.push(("seed".into(), seed.to_string()));
        }
        if let Some(s) = &self.sensing {
            kv.push(("pf".into(), s.p_f().to_string()));
            kv.push(("pm".into(), s.p_m().to_string()));
        }
        kv.extend(extra.iter().map(|(k, v)| (k.to_string(), v.clone())));
        for (k, v) in kv {
            let _ = writeln!(out, "# {k}={v}");
        }
    }
}

struct ParsedText {
    header: Vec<(String, String)>,
    rows: Vec<(f64, bool)>,
}

impl ParsedText {
    fn get(&self, key: &str) -> Option<&str> {
        self.header.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn get_f64(&self, key: &str) -> Result<Option<f64>> {
        self.get(key)
            .map(|v| v.parse::<f64>().map_err(|e| Error::Parse(format!("header {key}={v}: {e}"))))
            .transpose()
    }

    fn file_header(&self) -> Result<FileHeader> {
        let params = match (self.get_f64("u")?, self.get_f64("lambda_f")?, self.get_f64("lambda_n")?) {
            (_, Some(lf), Some(ln)) => Some(TrafficParams::from_rates(lf, ln)?),
            (Some(u), Some(lf), None) => Some(TrafficParams::from_u_lambda_f(u, lf)?),
            (Some(u), None, Some(ln)) => Some(TrafficParams::from_u_lambda_n(u, ln)?),
            _ => None,
        };
        let seed = self
            .get("seed")
            .map(|v| v.parse::<u64>().map_err(|e| Error::Parse(format!("header seed={v}: {e}"))))
            .transpose()?;
        let sensing = match (self.get_f64("pf")?, self.get_f64("pm")?) {
            (None, None) => None,
            (pf, pm) => Some(SensingModel::new(pf.unwrap_or(0.0), pm.unwrap_or(0.0))?),
        };
        Ok(FileHeader { params, seed, sensing })
    }
}

fn parse_bit(s: &str) -> Result<bool> {
    match s.trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(Error::Parse(format!("expected bit 0 or 1, got {other:?}"))),
    }
}

fn parse_text(text: &str, column_header: &str) -> Result<ParsedText> {
    let mut header = Vec::new();
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line == column_header {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.trim().split_once('=') {
                header.push((k.trim().to_string(), v.trim().to_string()));
            }
            continue;
        }
        let (a, b) = line
            .split_once(',')
            .ok_or_else(|| Error::Parse(format!("line {}: expected two comma-separated fields", lineno + 1)))?;
        let t = a
            .trim()
            .parse::<f64>()
            .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
        let bit = parse_bit(b).map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
        rows.push((t, bit));
    }
    Ok(ParsedText { header, rows })
}

impl Trajectory {
    /// Line-oriented text: `#` header lines, then `time,state` rows starting at t = 0.
    pub fn to_text(&self, header: &FileHeader) -> String {
        let mut out = String::new();
        header.write(
            "trajectory",
            &[
                ("horizon", self.horizon.to_string()),
                ("initial_state", u8::from(self.initial_state).to_string()),
            ],
            &mut out,
        );
        out.push_str("time,state\n");
        let _ = writeln!(out, "0,{}", u8::from(self.initial_state));
        let mut state = self.initial_state;
        for t in &self.switch_times {
            state = !state;
            let _ = writeln!(out, "{t},{}", u8::from(state));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<(Self, FileHeader)> {
        let parsed = parse_text(text, "time,state")?;
        let horizon = parsed
            .get_f64("horizon")?
            .ok_or_else(|| Error::Parse("trajectory file lacks a horizon header".into()))?;
        let (first, rest) = parsed
            .rows
            .split_first()
            .ok_or_else(|| Error::Parse("trajectory file has no rows".into()))?;
        if first.0 != 0.0 {
            return Err(Error::Parse("first trajectory row must be at time 0".into()));
        }
        let mut state = first.1;
        for (_, s) in rest {
            if *s == state {
                return Err(Error::Parse("trajectory states must alternate".into()));
            }
            state = *s;
        }
        let traj = Trajectory::new(first.1, rest.iter().map(|r| r.0).collect(), horizon)?;
        Ok((traj, parsed.file_header()?))
    }
}

impl SampleStream {
    /// Line-oriented text: `#` header lines, then `t_n,z_n` rows.
    pub fn to_text(&self, header: &FileHeader) -> String {
        let mut out = String::new();
        header.write("stream", &[("sensed", u8::from(self.sensed).to_string())], &mut out);
        out.push_str("t_n,z_n\n");
        for (t, z) in self.schedule.sample_times().iter().zip(&self.values) {
            let _ = writeln!(out, "{t},{}", u8::from(*z));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<(Self, FileHeader)> {
        let parsed = parse_text(text, "t_n,z_n")?;
        if parsed.rows.is_empty() {
            return Err(Error::Parse("stream file has no samples".into()));
        }
        let sensed = match parsed.get("sensed") {
            Some(v) => parse_bit(v)?,
            None => false,
        };
        let start = parsed.rows[0].0;
        let intervals: Vec<f64> = parsed.rows.windows(2).map(|w| w[1].0 - w[0].0).collect();
        if intervals.iter().any(|&d| d < 0.0) {
            return Err(Error::Parse("sample times must be non-decreasing".into()));
        }
        let sched = SampleSchedule::new(intervals, start)?;
        let stream = SampleStream::new(parsed.rows.iter().map(|r| r.1).collect(), sched, sensed)?;
        Ok((stream, parsed.file_header()?))
    }
}
