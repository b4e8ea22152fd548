//! Region sweeps, pilot benchmarks and Monte Carlo validation campaigns.

mod regions;
mod validation;

pub use regions::{
    benchmark_comparison, mse_mi_boundary, mse_mi_point, rate_grid, rate_mi_boundary,
    rate_mi_boundary_at, BenchmarkTable, KindSummary, PilotKind, PowerMode,
};
pub use validation::{
    detection_table, estimation_trial, validate_detection, validate_estimation, DetectRow,
    DetectionCheck, DetectionValidation, EstimationCase, EstimationValidation,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::optimizer::DesignSolution;
use crate::pilot::PowerProfile;

/// A batch of independent trials. Trial `t` draws only from the stream `(base_seed, t)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialPlan {
    pub n_trials: usize,
    pub base_seed: u64,
    pub label: String,
}

impl TrialPlan {
    pub fn new(n_trials: usize, base_seed: u64, label: impl Into<String>) -> Self {
        Self {
            n_trials,
            base_seed,
            label: label.into(),
        }
    }

    pub fn rng(&self, trial: u64) -> ChaCha8Rng {
        trial_rng(self.base_seed, trial)
    }
}

pub fn trial_rng(base_seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(trial);
    rng
}

/// One point of an achievable region. `axis_x` is always the expected MI in bits;
/// `axis_y` is `U_mse` for MSE-MI regions and the rate in bps/Hz for Rate-MI regions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionPoint {
    pub sweep_param: f64,
    pub axis_x: f64,
    pub axis_y: f64,
    #[serde(rename = "L")]
    pub len: usize,
    pub p_t: f64,
    pub feasible: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub profile: Option<PowerProfile>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub design: Option<Box<DesignSolution>>,
}

pub const CSV_HEADER: &str = "sweep_param,axis_x,axis_y,L,p_t,feasible";

impl RegionPoint {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.sweep_param, self.axis_x, self.axis_y, self.len, self.p_t, self.feasible
        )
    }
}

pub fn to_csv(points: &[RegionPoint]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for p in points {
        out.push_str(&p.csv_row());
        out.push('\n');
    }
    out
}

/// Binomial standard deviation of an empirical frequency around `p`.
pub fn binomial_sigma(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}
