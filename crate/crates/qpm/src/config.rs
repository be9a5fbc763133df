//! Run configuration. A run is fully determined by its [`RunConfig`] and
//! the code version; every field has a command-line flag.

use std::path::{Path, PathBuf};

use qpm_core::instances::GenMode;
use qpm_core::sieve::{RecoveryConfig, DEFAULT_POOL_CONSTANT};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::format::{read_json, GridEncoding};

/// Default output directory when no flag or config names one.
pub const OUT_DIR_ENV: &str = "QPM_OUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    /// Worker threads for trial-parallel commands.
    #[serde(default = "one")]
    pub workers: usize,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    pub command: CommandConfig,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandConfig {
    Gen(GenConfig),
    Sieve(SieveConfig),
    Match(MatchConfig),
    Bench(BenchConfig),
    Calibrate(CalibrateConfig),
    Verify(VerifyConfig),
}

impl CommandConfig {
    pub fn name(&self) -> &'static str {
        match self {
            CommandConfig::Gen(_) => "gen",
            CommandConfig::Sieve(_) => "sieve",
            CommandConfig::Match(_) => "match",
            CommandConfig::Bench(_) => "bench",
            CommandConfig::Calibrate(_) => "calibrate",
            CommandConfig::Verify(_) => "verify",
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }

    /// Output directory: the config's, else `$QPM_OUT_DIR`, else `.`.
    pub fn resolved_out_dir(&self) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(CliError::Validation("workers must be at least 1".into()));
        }
        match &self.command {
            CommandConfig::Gen(g) => g.validate(),
            CommandConfig::Sieve(s) => s.recovery.validate().map_err(CliError::from),
            CommandConfig::Match(m) => m.validate(),
            CommandConfig::Bench(b) => b.validate(),
            CommandConfig::Calibrate(c) => c.validate(),
            CommandConfig::Verify(_) => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum GenKind {
    /// Uniform text with a pattern copied from it.
    Planted,
    /// Uniform text and an independent uniform pattern.
    Unplanted,
    /// Identity pattern against displaced copies.
    Adversarial,
    /// Permutation text, pattern of fresh distinct symbols.
    D0,
    /// Permutation text, pattern cut from it.
    D1,
    /// Hidden-shift instance.
    Shift,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub mode: GenKind,
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub q: u32,
    /// Adversarial mismatch fraction.
    pub gamma: f64,
    /// Adversarial: keep one block clean, so the pattern occurs.
    pub clean: bool,
    /// Shift: bits per coordinate.
    pub bits: u32,
    /// Shift: fraction of `g` to corrupt.
    pub noise: f64,
    /// Shift: alphabet, default `2 * 2^{bits d}`.
    pub shift_alphabet: Option<u32>,
    pub encoding: GridEncoding,
    /// File stem.
    pub name: String,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            mode: GenKind::Planted,
            n: 1024,
            m: 64,
            d: 1,
            q: 2,
            gamma: 0.25,
            clean: true,
            bits: 8,
            noise: 0.0,
            shift_alphabet: None,
            encoding: GridEncoding::Binary,
            name: "instance".into(),
        }
    }
}

impl GenConfig {
    pub fn gen_mode(&self) -> Option<GenMode> {
        Some(match self.mode {
            GenKind::Planted => GenMode::RandomPlanted,
            GenKind::Unplanted => GenMode::RandomUnplanted,
            GenKind::Adversarial => GenMode::Adversarial {
                gamma: self.gamma,
                clean: self.clean,
            },
            GenKind::D0 => GenMode::PermutationD0,
            GenKind::D1 => GenMode::PermutationD1,
            GenKind::Shift => return None,
        })
    }

    fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(CliError::Validation(format!("bad file stem {:?}", self.name)));
        }
        if self.mode == GenKind::Shift && !(0.0..1.0).contains(&self.noise) {
            return Err(CliError::Validation(format!(
                "noise must be in [0, 1), got {}",
                self.noise
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum StateModel {
    /// States prepared from the tables; corrupted cells poison.
    #[default]
    Exact,
    /// Each state poisoned with probability twice the noise level.
    Poison,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SieveConfig {
    /// Shift instance file; without it one is generated from `bits`, `d`, `noise`.
    pub instance: Option<PathBuf>,
    pub bits: u32,
    pub d: usize,
    pub noise: f64,
    pub model: StateModel,
    /// Calibration file whose constant replaces `recovery.pool_constant`.
    pub calibration: Option<PathBuf>,
    pub recovery: RecoveryConfig,
    /// Run full shift recovery after the reported sieve.
    pub recover: bool,
    /// Compare against the sealed shift (test tooling).
    pub check_sealed: bool,
    pub stage_csv: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

impl Default for SieveConfig {
    fn default() -> Self {
        SieveConfig {
            instance: None,
            bits: 12,
            d: 1,
            noise: 0.0,
            model: StateModel::Exact,
            calibration: None,
            recovery: RecoveryConfig::default(),
            recover: true,
            check_sealed: false,
            stage_csv: None,
            output: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchConfig {
    pub text: PathBuf,
    pub pattern: PathBuf,
    /// Block side; `None` doubles it from 1 until a match is confirmed.
    pub nu: Option<usize>,
    pub gamma: f64,
    pub epsilon: Option<f64>,
    pub budget: Option<u64>,
    pub calibration: Option<PathBuf>,
    pub recovery: RecoveryConfig,
    /// Add the classical matcher and the brute-force oracle to the report.
    pub baseline: bool,
    pub output: Option<PathBuf>,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            text: PathBuf::from("instance.text.qpg"),
            pattern: PathBuf::from("instance.pattern.qpg"),
            nu: None,
            gamma: 0.25,
            epsilon: None,
            budget: None,
            calibration: None,
            recovery: RecoveryConfig::default(),
            baseline: false,
            output: None,
        }
    }
}

impl MatchConfig {
    fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(CliError::Validation(format!(
                "gamma must be in (0, 1], got {}",
                self.gamma
            )));
        }
        self.recovery.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BenchFamily {
    /// The quantum matcher on planted uniform texts.
    Quantum,
    /// The classical injective matcher on planted permutation texts.
    Baseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub family: BenchFamily,
    pub n_values: Vec<usize>,
    /// Fixed pattern side; otherwise `n / m_divisor`.
    pub m: Option<usize>,
    pub m_divisor: usize,
    pub d: usize,
    pub q: u32,
    pub gamma: f64,
    pub nu: usize,
    pub epsilon: Option<f64>,
    pub budget: Option<u64>,
    pub trials: u64,
    /// Quantum family: charge the planned cost without running the search.
    pub plan_only: bool,
    pub csv: Option<PathBuf>,
    /// Keep rows already in the CSV and run only the missing ones.
    pub resume: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            family: BenchFamily::Quantum,
            n_values: vec![256, 512, 1024, 2048],
            m: Some(64),
            m_divisor: 4,
            d: 1,
            q: 2,
            gamma: 0.25,
            nu: 16,
            epsilon: None,
            budget: None,
            trials: 3,
            plan_only: false,
            csv: None,
            resume: false,
        }
    }
}

impl BenchConfig {
    pub fn pattern_side(&self, n: usize) -> usize {
        self.m.unwrap_or(n / self.m_divisor.max(1))
    }

    fn validate(&self) -> Result<()> {
        if self.n_values.is_empty() || self.trials == 0 {
            return Err(CliError::Validation("bench needs at least one n and one trial".into()));
        }
        if self.m.is_none() && self.m_divisor == 0 {
            return Err(CliError::Validation("m_divisor must be positive".into()));
        }
        if let Some(&n) = self
            .n_values
            .iter()
            .find(|&&n| self.pattern_side(n) == 0 || self.pattern_side(n) > n)
        {
            return Err(CliError::Validation(format!(
                "pattern side {} does not fit n = {n}",
                self.pattern_side(n)
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeSpec {
    pub n: u32,
    pub d: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrateConfig {
    pub sizes: Vec<SizeSpec>,
    pub trials: u64,
    /// Required success rate at every size.
    pub target: f64,
    pub k_target: usize,
    pub lo: f64,
    pub hi: f64,
    /// Stop when the bracket is narrower than this.
    pub tolerance: f64,
    pub max_iter: usize,
    pub output: Option<PathBuf>,
}

impl Default for CalibrateConfig {
    fn default() -> Self {
        CalibrateConfig {
            sizes: vec![
                SizeSpec { n: 8, d: 1 },
                SizeSpec { n: 12, d: 1 },
                SizeSpec { n: 16, d: 1 },
                SizeSpec { n: 8, d: 2 },
            ],
            trials: 100,
            target: 0.75,
            k_target: 4,
            lo: 0.25,
            hi: 2.0 * DEFAULT_POOL_CONSTANT,
            tolerance: 0.25,
            max_iter: 24,
            output: None,
        }
    }
}

impl CalibrateConfig {
    fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.trials == 0 || self.k_target == 0 {
            return Err(CliError::Validation(
                "calibration needs sizes, trials and a positive k_target".into(),
            ));
        }
        if !(self.lo > 0.0 && self.lo < self.hi && self.tolerance > 0.0) {
            return Err(CliError::Validation(format!(
                "need 0 < lo < hi and tolerance > 0, got lo={} hi={} tolerance={}",
                self.lo, self.hi, self.tolerance
            )));
        }
        if !(self.target > 0.0 && self.target <= 1.0) {
            return Err(CliError::Validation(format!(
                "target must be in (0, 1], got {}",
                self.target
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub report: PathBuf,
    pub output: Option<PathBuf>,
}
