//! Command-line parsing. Flags override the values of a `--config` file,
//! which override the defaults.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{
    BenchConfig, BenchFamily, CalibrateConfig, CommandConfig, GenConfig, GenKind, MatchConfig, RunConfig, SieveConfig,
    SizeSpec, StateModel, VerifyConfig,
};
use crate::error::{CliError, Result};
use crate::format::GridEncoding;

#[derive(Debug, Parser)]
#[command(name = "qpm", version, about = "Hidden-shift sieve and pattern-matching laboratory")]
pub struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output directory (default: $QPM_OUT_DIR, then the current directory).
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Print the resolved configuration as JSON and exit.
    #[arg(long, global = true)]
    pub dump_config: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a text/pattern pair or a hidden-shift instance.
    Gen(GenArgs),
    /// Run the sieve and shift recovery on a hidden-shift instance.
    Sieve(SieveArgs),
    /// Search for a pattern in a text.
    Match(MatchArgs),
    /// Sweep n and write one CSV row per trial.
    Bench(BenchArgs),
    /// Find the smallest pool constant meeting a success target.
    Calibrate(CalibrateArgs),
    /// Check a report against the brute-force oracle.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub mode: Option<GenKind>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub q: Option<u32>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub clean: Option<bool>,
    #[arg(long)]
    pub bits: Option<u32>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub shift_alphabet: Option<u32>,
    #[arg(long, value_enum)]
    pub encoding: Option<GridEncoding>,
    #[arg(long)]
    pub name: Option<String>,
}

/// Recovery settings shared by `sieve` and `match`.
#[derive(Debug, Args)]
pub struct RecoveryArgs {
    #[arg(long)]
    pub pool_constant: Option<f64>,
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    #[arg(long)]
    pub k_target: Option<usize>,
    #[arg(long)]
    pub votes: Option<usize>,
    #[arg(long)]
    pub max_sieve_runs: Option<usize>,
    #[arg(long)]
    pub random_offset: Option<bool>,
}

#[derive(Debug, Args)]
pub struct SieveArgs {
    #[arg(long)]
    pub instance: Option<PathBuf>,
    #[arg(long)]
    pub bits: Option<u32>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long, value_enum)]
    pub model: Option<StateModel>,
    #[command(flatten)]
    pub recovery: RecoveryArgs,
    #[arg(long)]
    pub recover: Option<bool>,
    /// Compare the recovered shift with the sealed one.
    #[arg(long)]
    pub check_sealed: Option<bool>,
    #[arg(long)]
    pub stage_csv: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    #[arg(long)]
    pub text: Option<PathBuf>,
    #[arg(long)]
    pub pattern: Option<PathBuf>,
    /// Fixed block side; omit to double from 1.
    #[arg(long)]
    pub nu: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub budget: Option<u64>,
    #[command(flatten)]
    pub recovery: RecoveryArgs,
    /// Also run the classical matcher and the brute-force oracle.
    #[arg(long)]
    pub baseline: bool,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum)]
    pub family: Option<BenchFamily>,
    /// Comma-separated text sides.
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    #[arg(long)]
    pub m: Option<usize>,
    /// Use m = n / divisor instead of a fixed m.
    #[arg(long)]
    pub m_divisor: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub q: Option<u32>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub nu: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub budget: Option<u64>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub plan_only: Option<bool>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub resume: bool,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Reference sizes as `n:d`, comma-separated.
    #[arg(long, value_delimiter = ',', value_parser = parse_size)]
    pub sizes: Option<Vec<SizeSpec>>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub target: Option<f64>,
    #[arg(long)]
    pub k_target: Option<usize>,
    #[arg(long)]
    pub lo: Option<f64>,
    #[arg(long)]
    pub hi: Option<f64>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Report written by gen, sieve or match.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn parse_size(s: &str) -> std::result::Result<SizeSpec, String> {
    let (n, d) = s.split_once(':').ok_or_else(|| format!("expected n:d, got {s:?}"))?;
    Ok(SizeSpec {
        n: n.parse().map_err(|_| format!("bad n in {s:?}"))?,
        d: d.parse().map_err(|_| format!("bad d in {s:?}"))?,
    })
}

macro_rules! set {
    ($cfg:expr, $args:expr; $($field:ident),+ $(,)?) => {
        $(if let Some(v) = $args.$field.clone() { $cfg.$field = v; })+
    };
}

impl RecoveryArgs {
    fn apply(&self, cfg: &mut qpm_core::sieve::RecoveryConfig, calibration: &mut Option<PathBuf>) {
        set!(cfg, self; pool_constant, k_target, votes, max_sieve_runs, random_offset);
        if self.calibration.is_some() {
            *calibration = self.calibration.clone();
        }
    }
}

fn default_command(c: &Command) -> CommandConfig {
    match c {
        Command::Gen(_) => CommandConfig::Gen(GenConfig::default()),
        Command::Sieve(_) => CommandConfig::Sieve(SieveConfig::default()),
        Command::Match(_) => CommandConfig::Match(MatchConfig::default()),
        Command::Bench(_) => CommandConfig::Bench(BenchConfig::default()),
        Command::Calibrate(_) => CommandConfig::Calibrate(CalibrateConfig::default()),
        Command::Verify(_) => CommandConfig::Verify(VerifyConfig::default()),
    }
}

impl Cli {
    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig {
                seed: 0,
                workers: 1,
                out_dir: None,
                command: default_command(&self.command),
            },
        };
        if std::mem::discriminant(&cfg.command) != std::mem::discriminant(&default_command(&self.command)) {
            return Err(CliError::Validation(format!(
                "config file is for `{}`, not this subcommand",
                cfg.command.name()
            )));
        }
        set!(cfg, self; seed, workers);
        if self.out_dir.is_some() {
            cfg.out_dir = self.out_dir.clone();
        }
        match (&self.command, &mut cfg.command) {
            (Command::Gen(a), CommandConfig::Gen(c)) => {
                set!(c, a; mode, n, m, d, q, gamma, clean, bits, noise, encoding, name);
                if a.shift_alphabet.is_some() {
                    c.shift_alphabet = a.shift_alphabet;
                }
            }
            (Command::Sieve(a), CommandConfig::Sieve(c)) => {
                set!(c, a; bits, d, noise, model, recover, check_sealed);
                for (dst, src) in [
                    (&mut c.instance, &a.instance),
                    (&mut c.stage_csv, &a.stage_csv),
                    (&mut c.output, &a.output),
                ] {
                    if src.is_some() {
                        *dst = src.clone();
                    }
                }
                a.recovery.apply(&mut c.recovery, &mut c.calibration);
            }
            (Command::Match(a), CommandConfig::Match(c)) => {
                set!(c, a; text, pattern, gamma);
                if a.nu.is_some() {
                    c.nu = a.nu;
                }
                if a.epsilon.is_some() {
                    c.epsilon = a.epsilon;
                }
                if a.budget.is_some() {
                    c.budget = a.budget;
                }
                if a.output.is_some() {
                    c.output = a.output.clone();
                }
                c.baseline |= a.baseline;
                a.recovery.apply(&mut c.recovery, &mut c.calibration);
            }
            (Command::Bench(a), CommandConfig::Bench(c)) => {
                set!(c, a; family, m_divisor, d, q, gamma, nu, trials, plan_only);
                if let Some(n) = &a.n {
                    c.n_values = n.clone();
                }
                if a.m.is_some() {
                    c.m = a.m;
                }
                if a.m_divisor.is_some() && a.m.is_none() {
                    c.m = None;
                }
                if a.epsilon.is_some() {
                    c.epsilon = a.epsilon;
                }
                if a.budget.is_some() {
                    c.budget = a.budget;
                }
                if a.csv.is_some() {
                    c.csv = a.csv.clone();
                }
                c.resume |= a.resume;
            }
            (Command::Calibrate(a), CommandConfig::Calibrate(c)) => {
                set!(c, a; sizes, trials, target, k_target, lo, hi, tolerance, max_iter);
                if a.output.is_some() {
                    c.output = a.output.clone();
                }
            }
            (Command::Verify(a), CommandConfig::Verify(c)) => {
                if let Some(r) = &a.report {
                    c.report = r.clone();
                }
                if a.output.is_some() {
                    c.output = a.output.clone();
                }
            }
            _ => unreachable!("discriminants checked above"),
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> RunConfig {
        Cli::try_parse_from(args).unwrap().resolve().unwrap()
    }

    #[test]
    fn flags_fill_the_gen_config() {
        let c = parse(&[
            "qpm", "gen", "--mode", "planted", "--n", "1024", "--m", "64", "--d", "1", "--q", "2", "--seed", "7",
        ]);
        assert_eq!(c.seed, 7);
        let CommandConfig::Gen(g) = c.command else { panic!() };
        assert_eq!((g.mode, g.n, g.m, g.d, g.q), (GenKind::Planted, 1024, 64, 1, 2));
    }

    #[test]
    fn flags_override_the_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(
            &path,
            r#"{"seed": 3, "command": {"bench": {"n_values": [64], "trials": 9}}}"#,
        )
        .unwrap();
        let p = path.to_str().unwrap();
        let c = parse(&["qpm", "bench", "--config", p, "--trials", "2", "--n", "32,64"]);
        assert_eq!(c.seed, 3);
        let CommandConfig::Bench(b) = c.command else { panic!() };
        assert_eq!((b.trials, b.n_values), (2, vec![32, 64]));
        let err = Cli::try_parse_from(["qpm", "gen", "--config", p]).unwrap().resolve();
        assert!(err.is_err());
    }

    #[test]
    fn sizes_parse_as_pairs() {
        let c = parse(&["qpm", "calibrate", "--sizes", "8:1,8:2"]);
        let CommandConfig::Calibrate(k) = c.command else {
            panic!()
        };
        assert_eq!(k.sizes, vec![SizeSpec { n: 8, d: 1 }, SizeSpec { n: 8, d: 2 }]);
        assert!(Cli::try_parse_from(["qpm", "calibrate", "--sizes", "8"]).is_err());
    }
}
