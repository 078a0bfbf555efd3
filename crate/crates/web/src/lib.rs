//! Browser bindings for three interactive views: RMS curves against the
//! number of samples, the optimal sampling schedule, and an Algorithm I run.
//!
//! Results cross the boundary as flat `Float64Array`s with a fixed stride;
//! the `*_impl` functions hold the logic and are tested natively.

use putraffic::accuracy::{crb_u, mse_avg_uniform, mse_weighted_optimal};
use putraffic::blind::{run_algorithm_i, AlgoIConfig, SimulatedSource, Termination};
use putraffic::design::optimal_schedule;
use putraffic::{Result, SampleSchedule, TrafficParams};
use wasm_bindgen::prelude::*;

/// Values per N in [`rms_curves`]: N, sample mean (uniform), sample mean
/// (optimal schedule), optimal weights, ML bound.
pub const CURVE_STRIDE: usize = 5;

/// Values per sample in [`algorithm1_trace`]: time, bit, running estimate.
pub const TRACE_STRIDE: usize = 3;

fn to_js(e: putraffic::Error) -> JsError {
    JsError::new(&e.to_string())
}

pub fn rms_curves_impl(u: f64, lambda_f: f64, t: f64, n_min: usize, n_max: usize) -> Result<Vec<f64>> {
    let p = TrafficParams::from_u_lambda_f(u, lambda_f)?;
    let mut out = Vec::with_capacity(CURVE_STRIDE * (n_max.saturating_sub(n_min) + 1));
    for n in n_min.max(3)..=n_max {
        let t_c = t / (n - 1) as f64;
        let opt = optimal_schedule(&p, n, t)?;
        out.extend([
            n as f64,
            mse_avg_uniform(&p, n, t)?.rms,
            opt.mse_at_optimum.sqrt(),
            mse_weighted_optimal(&p, n, t_c, None)?.rms,
            crb_u(&p, n, t_c)?.rms,
        ]);
    }
    Ok(out)
}

/// Closed-form RMS errors for `N = max(n_min, 3) ..= n_max` at fixed window `t`.
#[wasm_bindgen]
pub fn rms_curves(u: f64, lambda_f: f64, t: f64, n_min: usize, n_max: usize) -> std::result::Result<Vec<f64>, JsError> {
    rms_curves_impl(u, lambda_f, t, n_min, n_max).map_err(to_js)
}

/// Optimal sample times followed by the uniform ones (`2 N` values).
pub fn schedule_times_impl(u: f64, lambda_f: f64, n: usize, t: f64) -> Result<Vec<f64>> {
    let p = TrafficParams::from_u_lambda_f(u, lambda_f)?;
    let mut times = optimal_schedule(&p, n, t)?.schedule.sample_times();
    times.extend(SampleSchedule::uniform(n, t)?.sample_times());
    Ok(times)
}

#[wasm_bindgen]
pub fn optimal_schedule_times(u: f64, lambda_f: f64, n: usize, t: f64) -> std::result::Result<Vec<f64>, JsError> {
    schedule_times_impl(u, lambda_f, n, t).map_err(to_js)
}

pub fn algorithm1_impl(u: f64, lambda_f: f64, alpha: f64, t0: f64, n0: usize, n_th: usize, seed: u64) -> Result<Vec<f64>> {
    let p = TrafficParams::from_u_lambda_f(u, lambda_f)?;
    let cfg = AlgoIConfig::new(t0, n0, alpha, Termination { max_samples: Some(n_th), ..Default::default() });
    let trace = run_algorithm_i(&mut SimulatedSource::new(p, None, seed), &cfg, lambda_f)?;
    Ok(trace.rows.iter().flat_map(|r| [r.time, f64::from(u8::from(r.bit)), r.u_hat]).collect())
}

/// One simulated Algorithm I run with a sample budget of `n_th`.
#[wasm_bindgen]
pub fn algorithm1_trace(
    u: f64,
    lambda_f: f64,
    alpha: f64,
    t0: f64,
    n0: usize,
    n_th: usize,
    seed: u32,
) -> std::result::Result<Vec<f64>, JsError> {
    algorithm1_impl(u, lambda_f, alpha, t0, n0, n_th, u64::from(seed)).map_err(to_js)
}
