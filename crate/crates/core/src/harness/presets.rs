//! Named experiment presets with their standard grids and replicate counts.

use super::{Algo1Variant, ExperimentKind, ExperimentSpec, Method};
use crate::blind::{AlgoIConfig, AlgoIIConfig, Termination};

/// Default replicate count for closed-form comparisons.
pub const REPLICATES_CLOSED_FORM: usize = 100_000;
/// Default replicate count for ML estimators and algorithm runs.
pub const REPLICATES_ML: usize = 10_000;
/// Default replicate count when the noisy-sensing ML estimators run.
pub const REPLICATES_NOISY_ML: usize = 1_000;

pub const NAMES: [&str; 8] = [
    "fig_rms_vs_N",
    "fig_lambda_f_vs_N",
    "asymptote_vs_T",
    "fig_rms_vs_u",
    "sensing_impact",
    "algo1_constrained_N",
    "algo1_target_error",
    "algo2_joint",
];

fn range(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let k = ((hi - lo) / step).round() as usize;
    (0..=k).map(|i| ((lo + i as f64 * step) * 1e9).round() / 1e9).collect()
}

fn sweep(kind: ExperimentKind, u: Vec<f64>, lambda_f: Vec<f64>, n: Vec<usize>, t: Vec<f64>, methods: Vec<Method>) -> ExperimentSpec {
    ExperimentSpec { u, lambda_f, n, t, methods, ..ExperimentSpec::new(kind) }
}

/// The preset called `name`, with its default replicate count and seed 0.
pub fn preset(name: &str) -> Option<ExperimentSpec> {
    let spec = match name {
        "fig_rms_vs_N" => ExperimentSpec {
            replicates: REPLICATES_CLOSED_FORM,
            ..sweep(
                ExperimentKind::RmsVsN,
                vec![0.3, 0.6],
                vec![0.4, 0.9],
                (4..=15).map(|k| 10 * k).collect(),
                vec![50.0],
                vec![Method::Avg, Method::AvgOptimal, Method::Weighted, Method::MlU],
            )
        },
        "fig_lambda_f_vs_N" => ExperimentSpec {
            replicates: REPLICATES_ML,
            ..sweep(
                ExperimentKind::RmsVsN,
                vec![0.3, 0.6],
                vec![0.4, 0.9],
                vec![50, 100, 150, 200, 300, 500, 1000, 2000, 5000],
                vec![50.0],
                vec![Method::MlLambdaF],
            )
        },
        "asymptote_vs_T" => ExperimentSpec {
            paired: true,
            notes: vec!["closed forms only; replicates unused".into()],
            ..sweep(
                ExperimentKind::AsymptoteVsT,
                vec![0.3, 0.6],
                vec![0.9, 0.4],
                Vec::new(),
                range(10.0, 200.0, 10.0),
                vec![Method::Avg, Method::AvgOptimal, Method::Weighted, Method::MlU, Method::MlLambdaF],
            )
        },
        "fig_rms_vs_u" => ExperimentSpec {
            replicates: REPLICATES_ML,
            ..sweep(
                ExperimentKind::RmsVsU,
                range(0.05, 0.95, 0.05),
                vec![0.1, 0.5, 1.0, 2.0],
                vec![100],
                vec![100.0],
                vec![Method::Avg, Method::MlU],
            )
        },
        "sensing_impact" => ExperimentSpec {
            replicates: REPLICATES_NOISY_ML,
            sensing: vec![(0.0, 0.0), (0.05, 0.05), (0.1, 0.1)],
            notes: vec![format!(
                "replicates reduced to {REPLICATES_NOISY_ML} by default: the noisy ML estimators optimize a forward-algorithm likelihood per replicate"
            )],
            ..sweep(
                ExperimentKind::SensingImpact,
                vec![0.3],
                vec![0.9],
                vec![50, 100, 150, 300, 1000],
                vec![50.0],
                vec![Method::AvgCorrected, Method::WeightedCorrected, Method::MlUNoisy, Method::MlRateNoisy],
            )
        },
        "algo1_constrained_N" => {
            let n_th = [20usize, 40, 60, 80, 100, 150, 200];
            let mut variants = Vec::new();
            for t0 in [1.0, 10.0] {
                for &n in &n_th {
                    for alpha in [1.0, 2.0, 5.0] {
                        let cfg = AlgoIConfig {
                            record_rows: false,
                            ..AlgoIConfig::new(t0, 5, alpha, Termination { max_samples: Some(n), ..Default::default() })
                        };
                        variants.push(Algo1Variant::Algorithm { label: format!("algo1:alpha={alpha}:t0={t0}"), config: cfg });
                    }
                    variants.push(Algo1Variant::Uniform { label: format!("uniform:t0={t0}"), t0, n });
                }
            }
            ExperimentSpec {
                u: vec![0.6],
                lambda_f: vec![0.9],
                algo1: variants,
                replicates: REPLICATES_ML,
                ..ExperimentSpec::new(ExperimentKind::Algo1ConstrainedN)
            }
        }
        "algo1_target_error" => {
            let variants = [1.0, 2.0, 5.0]
                .into_iter()
                .map(|alpha| Algo1Variant::Algorithm {
                    label: format!("algo1:alpha={alpha}"),
                    config: AlgoIConfig {
                        record_rows: false,
                        ..AlgoIConfig::new(0.05, 50, alpha, Termination { target_mse: Some(0.01), ..Default::default() })
                    },
                })
                .collect();
            ExperimentSpec {
                u: range(0.1, 0.9, 0.1),
                lambda_f: vec![0.9],
                algo1: variants,
                replicates: REPLICATES_ML,
                notes: vec!["target MSE 0.01 (RMS 0.1)".into()],
                ..ExperimentSpec::new(ExperimentKind::Algo1TargetError)
            }
        }
        "algo2_joint" => ExperimentSpec {
            u: range(0.1, 0.9, 0.1),
            lambda_f: vec![0.1, 0.5, 0.9],
            algo2: Some(AlgoIIConfig { record_rows: false, ..AlgoIIConfig::new(0.05, 0.01, 0.01, 0.1, 1.0) }),
            replicates: REPLICATES_ML,
            notes: vec!["targets: MSE 0.01 in u and in the rate; lambda in [0.1, 1]".into()],
            ..ExperimentSpec::new(ExperimentKind::Algo2Joint)
        },
        _ => return None,
    };
    Some(spec)
}
