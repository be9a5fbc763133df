//! JSON reports. Every report starts with a `report` tag naming its kind
//! and holds only values determined by the run's config and seed.

use qpm_core::baseline::BaselineOutcome;
use qpm_core::matcher::{MatchPlan, Verdict};
use qpm_core::sieve::{PhaseLabel, RoundReport, SieveSchedule, StageReport};
use qpm_core::QueryLedger;
use serde::{Deserialize, Serialize};

use crate::config::StateModel;
use crate::experiment::SieveSuccess;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "report", rename_all = "snake_case")]
pub enum Report {
    Gen(GenReport),
    Sieve(SieveReport),
    Match(MatchReport),
    Calibrate(CalibrationReport),
    Verify(VerifyReport),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenReport {
    pub seed: u64,
    pub config: crate::config::GenConfig,
    /// Written files, relative to the output directory.
    pub files: Vec<String>,
}

/// Where the instance of a sieve run came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceSource {
    File(String),
    Generated { bits: u32, d: usize, noise: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SieveReport {
    pub seed: u64,
    pub instance: InstanceSource,
    pub n: u32,
    pub d: usize,
    pub model: StateModel,
    pub noise: f64,
    pub pool_constant: f64,
    pub schedule: SieveSchedule,
    pub stages: Vec<StageReport>,
    pub final_size: usize,
    pub poisoned_final: usize,
    pub k_target: usize,
    pub success: bool,
    pub exhausted: bool,
    /// Shift recovery, when requested.
    pub recovered: Option<PhaseLabel>,
    pub recovery_error: Option<String>,
    pub rounds: Vec<RoundReport>,
    /// Recovered shift equals the sealed one; only with `check_sealed`.
    pub sealed_match: Option<bool>,
    pub ledger: QueryLedger,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BruteForceColumns {
    pub matches: Vec<Vec<usize>>,
    pub ledger: QueryLedger,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub seed: u64,
    pub text: String,
    pub pattern: String,
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub gamma: f64,
    /// Values of nu tried; a single entry when fixed.
    pub nus: Vec<usize>,
    pub plan: MatchPlan,
    pub verdict: Verdict,
    pub trials: u64,
    pub rejected_claims: u64,
    pub ledger: QueryLedger,
    pub baseline: Option<BaselineOutcome>,
    /// Why the classical matcher did not run, e.g. a non-injective pattern.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_skipped: Option<String>,
    pub brute_force: Option<BruteForceColumns>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub pool_constant: f64,
    pub meets_target: bool,
    pub sizes: Vec<SieveSuccess>,
}

/// Also the calibration file read back by later runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub seed: u64,
    pub pool_constant: f64,
    pub target: f64,
    pub trials: u64,
    /// Every constant tried, in order.
    pub evaluations: Vec<Evaluation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub target: String,
    pub kind: String,
    pub consistent: bool,
    pub detail: String,
}
