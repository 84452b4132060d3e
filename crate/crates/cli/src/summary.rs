use descent::analysis::Abort;
use descent::{BoundReport, RateFit};
use serde::{Deserialize, Serialize};

/// Bumped on any incompatible change to this layout.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub format_version: u32,
    /// Canonical text of the configuration that was run, overrides included.
    pub config: String,
    pub seeds: SeedRange,
    pub experiments: Vec<ExperimentSummary>,
    pub wall_clock_seconds: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedRange {
    pub first: u64,
    pub last: u64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub name: String,
    pub method: String,
    pub traces: Vec<String>,
    pub mean_trace: Option<String>,
    pub iterations: usize,
    pub final_record: Option<FinalRecord>,
    pub aborted: Vec<SeedAbort>,
    /// The series that was fitted and checked: a column name or `energy`.
    pub series: String,
    pub fit: Option<RateFit>,
    pub fit_error: Option<String>,
    pub bounds: Vec<BoundOutcome>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalRecord {
    pub k: usize,
    pub f_value: f64,
    pub gap: Option<f64>,
    pub grad_norm: f64,
    pub dist_to_opt: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedAbort {
    pub seed: u64,
    #[serde(flatten)]
    pub abort: Abort,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundOutcome {
    pub spec: String,
    pub report: Option<BoundReport>,
    pub error: Option<String>,
}
