//! Cross-module behaviour of the public library API.

use putraffic::accuracy::{mse_avg_uniform, oracle::oracle_mse_enumeration};
use putraffic::blind::{
    run_algorithm_i, run_algorithm_ii, AlgoIConfig, AlgoIIConfig, ReplaySource, SimulatedSource, Termination,
    TrajectorySource,
};
use putraffic::design::optimal_schedule;
use putraffic::estimators::{avg_estimate, ml_estimate_u};
use putraffic::seed;
use putraffic::traffic::{generate_trajectory, generate_trajectory_with, sample_trajectory, FileHeader};
use putraffic::{SampleSchedule, SampleStream, TrafficParams, Trajectory};

fn params() -> TrafficParams {
    TrafficParams::from_u_lambda_f(0.4, 0.7).unwrap()
}

fn algo1() -> AlgoIConfig {
    AlgoIConfig::new(0.5, 5, 2.0, Termination { max_samples: Some(60), ..Default::default() })
}

#[test]
fn simulated_and_recorded_traffic_drive_identical_runs() {
    let p = params();
    let live = run_algorithm_i(&mut SimulatedSource::new(p, None, 42), &algo1(), p.lambda_f()).unwrap();
    let traj = generate_trajectory_with(&p, 1e4, seed::rng(42, &[0])).unwrap();
    let recorded = run_algorithm_i(&mut TrajectorySource::new(traj), &algo1(), p.lambda_f()).unwrap();
    assert_eq!(live, recorded);

    // replaying the realized samples reproduces the run exactly
    let times = &live.sample_times;
    let sched = SampleSchedule::new(times.windows(2).map(|w| w[1] - w[0]).collect(), times[0]).unwrap();
    let stream = SampleStream::new(live.samples.clone(), sched, false).unwrap();
    let replayed = run_algorithm_i(&mut ReplaySource::new(&stream), &algo1(), p.lambda_f()).unwrap();
    assert_eq!(live, replayed);
}

#[test]
fn files_round_trip_and_feed_estimators() {
    let p = params();
    let traj = generate_trajectory(&p, 30.0, 9).unwrap();
    let header = FileHeader { params: Some(p), seed: Some(9), sensing: None };
    let (back, h) = Trajectory::from_text(&traj.to_text(&header)).unwrap();
    assert_eq!(back, traj);
    assert_eq!(h.seed, Some(9));

    let stream = sample_trajectory(&traj, &SampleSchedule::uniform(31, 30.0).unwrap()).unwrap();
    let (back, h) = SampleStream::from_text(&stream.to_text(&header)).unwrap();
    assert_eq!(back.values(), stream.values());
    let p_file = h.params.unwrap();
    assert!((p_file.u() - p.u()).abs() < 1e-15);
    let t_c = back.schedule().uniform_interval().unwrap();
    assert!((t_c - 1.0).abs() < 1e-12);
    let ml = ml_estimate_u(&back, p_file.lambda_f(), t_c).unwrap();
    assert!(ml.value > 0.0 && ml.value < 1.0);
    assert_eq!(avg_estimate(&back).unwrap().value, stream.ones() as f64 / 31.0);
}

#[test]
fn uniform_closed_form_matches_oracle_and_optimum_improves_it() {
    let p = params();
    for n in [3, 6, 9] {
        let t = 4.0;
        let cf = mse_avg_uniform(&p, n, t).unwrap().mse;
        let mean = |b: &[bool]| b.iter().filter(|&&x| x).count() as f64 / b.len() as f64;
        let oracle = oracle_mse_enumeration(&p, &SampleSchedule::uniform(n, t).unwrap(), &mean, None).unwrap().mse;
        assert!((cf - oracle).abs() <= 1e-12 * oracle);
        let opt = optimal_schedule(&p, n, t).unwrap();
        assert!(opt.mse_at_optimum <= cf + 1e-15);
        assert!((opt.schedule.window() - t).abs() < 1e-9);
    }
}

#[test]
fn algorithm_two_stops_at_planned_count() {
    let cfg = AlgoIIConfig { record_rows: false, ..AlgoIIConfig::new(0.05, 0.01, 0.01, 0.1, 1.0) };
    let p = TrafficParams::from_u_lambda_f(0.5, 0.5).unwrap();
    let tr = run_algorithm_ii(&mut SimulatedSource::new(p, None, 3), &cfg).unwrap();
    // a toggle shows up long before the stopping count at this duty cycle
    assert_eq!(tr.total_samples, 5790);
    assert!((tr.total_window - 5789.0 * 0.05).abs() < 1e-6);
    assert!(tr.last().lambda_f_hat.is_some());
}
