//! Command implementations. Each writes its report before deciding the
//! exit status, so a failed contract still leaves evidence behind.

use std::path::{Path, PathBuf};

use qpm_core::baseline::{brute_force_match, classical_injective_match};
use qpm_core::instances::{gen_shift_instance, generate, inject_noise, GenSpec};
use qpm_core::matcher::{find_match, find_match_auto_nu, MatchParams, Verdict};
use qpm_core::sieve::{recover_shift, HiddenShiftInstance};
use qpm_core::{GridString, QueryLedger, SeedTree};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{CommandConfig, GenConfig, MatchConfig, RunConfig, SieveConfig, StateModel, VerifyConfig};
use crate::error::{CliError, Result};
use crate::experiment::top_level_sieve;
use crate::format::{read_grid, read_json, read_shift_instance, read_shift_instance_unsealed, write_grid, write_json};
use crate::report::{
    BruteForceColumns, CalibrationReport, GenReport, InstanceSource, MatchReport, Report, SieveReport, VerifyReport,
};

/// What a finished command produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    /// Main output file.
    pub path: PathBuf,
    /// One line for stdout.
    pub summary: String,
}

pub fn run(config: &RunConfig) -> Result<Outcome> {
    config.validate()?;
    let out_dir = config.resolved_out_dir();
    match &config.command {
        CommandConfig::Gen(c) => cmd_gen(c, config.seed, &out_dir),
        CommandConfig::Sieve(c) => cmd_sieve(c, config.seed, &out_dir),
        CommandConfig::Match(c) => cmd_match(c, config.seed, &out_dir),
        CommandConfig::Bench(c) => crate::bench::cmd_bench(c, config.seed, config.workers, &out_dir),
        CommandConfig::Calibrate(c) => crate::calibrate::cmd_calibrate(c, config.seed, config.workers, &out_dir),
        CommandConfig::Verify(c) => cmd_verify(c, &out_dir),
    }
}

fn output_path(explicit: &Option<PathBuf>, out_dir: &Path, default: &str) -> PathBuf {
    explicit.clone().unwrap_or_else(|| out_dir.join(default))
}

fn display(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

/// Planted offset of a generated pattern pair, kept apart from the grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SealedPlant {
    pub planted: Option<Vec<usize>>,
}

pub fn cmd_gen(c: &GenConfig, seed: u64, out_dir: &Path) -> Result<Outcome> {
    let stem = out_dir.join(&c.name);
    let with_ext = |suffix: &str| PathBuf::from(format!("{}.{suffix}", stem.display()));
    let mut files = Vec::new();
    let summary;
    match c.gen_mode() {
        Some(mode) => {
            let spec = GenSpec {
                n: c.n,
                m: c.m,
                d: c.d,
                q: c.q,
                seed,
                mode,
            };
            let inst = generate(&spec)?;
            let ext = c.encoding.extension();
            for (role, grid) in [("text", &inst.text), ("pattern", &inst.pattern)] {
                let path = with_ext(&format!("{role}.{ext}"));
                write_grid(&path, grid, Some(&json!({"role": role, "spec": spec})), c.encoding)?;
                files.push(display(&path));
            }
            let sealed = with_ext("sealed.json");
            write_json(
                &sealed,
                &SealedPlant {
                    planted: inst.planted.unseal().clone(),
                },
            )?;
            files.push(display(&sealed));
            summary = format!(
                "generated {} pair n={} m={} d={} q={}",
                format!("{:?}", c.mode).to_lowercase(),
                c.n,
                c.m,
                c.d,
                c.q
            );
        }
        None => {
            let root = SeedTree::new(seed);
            let mut inst = gen_shift_instance(c.bits, c.d, c.shift_alphabet, root.child(0).seed_u64())?;
            if c.noise > 0.0 {
                inst = inject_noise(&inst, c.noise, root.child(1).seed_u64())?;
            }
            let path = with_ext("shift");
            let meta = json!({"seed": seed, "bits": c.bits, "d": c.d, "noise": c.noise, "q": c.shift_alphabet});
            crate::format::write_shift_instance(&path, &inst, Some(&meta))?;
            files.push(display(&path));
            summary = format!("generated shift instance n={} d={} noise={}", c.bits, c.d, inst.noise());
        }
    }
    let report_path = with_ext("gen.json");
    write_json(
        &report_path,
        &Report::Gen(GenReport {
            seed,
            config: c.clone(),
            files,
        }),
    )?;
    Ok(Outcome {
        path: report_path,
        summary,
    })
}

/// Pool constant from a calibration file.
pub fn load_pool_constant(path: &Path) -> Result<f64> {
    match read_json::<Report>(path)? {
        Report::Calibrate(CalibrationReport { pool_constant, .. }) => Ok(pool_constant),
        _ => Err(CliError::format(path, "not a calibration report")),
    }
}

// The instance a sieve config describes. With `sealed`, the answers are
// restored (poison model and test tooling only).
fn sieve_instance(c: &SieveConfig, seed: u64, sealed: bool) -> Result<(HiddenShiftInstance, InstanceSource)> {
    match &c.instance {
        Some(path) => {
            let inst = if sealed {
                read_shift_instance_unsealed(path)?
            } else {
                read_shift_instance(path)?
            };
            Ok((inst, InstanceSource::File(display(path))))
        }
        None => {
            let root = SeedTree::new(seed);
            let mut inst = gen_shift_instance(c.bits, c.d, None, root.child(0).seed_u64())?;
            if c.noise > 0.0 {
                inst = match c.model {
                    StateModel::Exact => inject_noise(&inst, c.noise, root.child(1).seed_u64())?,
                    StateModel::Poison => inst.with_corrupted(c.noise, Vec::new())?,
                };
            }
            let src = InstanceSource::Generated {
                bits: c.bits,
                d: c.d,
                noise: c.noise,
            };
            Ok((inst, src))
        }
    }
}

pub fn cmd_sieve(c: &SieveConfig, seed: u64, out_dir: &Path) -> Result<Outcome> {
    let needs_sealed = c.check_sealed || c.model == StateModel::Poison;
    let (inst, source) = sieve_instance(c, seed, needs_sealed)?;
    let mut recovery = c.recovery.clone();
    if let Some(path) = &c.calibration {
        recovery.pool_constant = load_pool_constant(path)?;
    }
    let root = SeedTree::new(seed);
    let mut ledger = QueryLedger::new();
    let run = top_level_sieve(
        &inst,
        c.model,
        recovery.pool_constant,
        recovery.k_target,
        &root.child(2),
        &mut ledger,
    )?;
    let schedule = qpm_core::sieve::make_schedule(inst.n_bits(), inst.dims(), recovery.pool_constant)?;

    let mut recovered = None;
    let mut recovery_error = None;
    let mut rounds = Vec::new();
    if c.recover {
        let result = match c.model {
            StateModel::Exact => recover_shift(&inst.tables(), &recovery, None, &root.child(3), &mut ledger),
            StateModel::Poison => recover_shift(&inst.poison_model(), &recovery, None, &root.child(3), &mut ledger),
        };
        match result {
            Ok(r) => {
                recovered = r.shift().copied();
                rounds = r.rounds;
            }
            Err(e @ (qpm_core::Error::Round { .. } | qpm_core::Error::RecoveryFailed { .. })) => {
                recovery_error = Some(e.to_string());
            }
            Err(e) => return Err(e.into()),
        }
    }
    let sealed_match = if c.check_sealed {
        let truth = inst.sealed_shift().map(|s| *s.unseal());
        Some(truth.is_some() && recovered == truth)
    } else {
        None
    };

    if let Some(csv_path) = &c.stage_csv {
        write_stage_csv(csv_path, &run.stages)?;
    }
    let report = SieveReport {
        seed,
        instance: source,
        n: inst.n_bits(),
        d: inst.dims(),
        model: c.model,
        noise: inst.noise(),
        pool_constant: recovery.pool_constant,
        schedule,
        stages: run.stages.clone(),
        final_size: run.final_states.len(),
        poisoned_final: run.poisoned_final(),
        k_target: run.k_target,
        success: run.success,
        exhausted: run.exhausted,
        recovered,
        recovery_error: recovery_error.clone(),
        rounds,
        sealed_match,
        ledger,
    };
    let path = output_path(&c.output, out_dir, "sieve.json");
    write_json(&path, &Report::Sieve(report.clone()))?;
    if let Some(e) = recovery_error {
        return Err(CliError::Unmet(format!("{e}; report in {}", path.display())));
    }
    if sealed_match == Some(false) {
        return Err(CliError::Unmet(format!(
            "recovered shift differs from the sealed one; report in {}",
            path.display()
        )));
    }
    let shift = report
        .recovered
        .map(|s| format!("{:?}", s.components()))
        .unwrap_or_else(|| "-".into());
    Ok(Outcome {
        summary: format!(
            "sieve n={} d={} final={} success={} shift={shift}",
            report.n, report.d, report.final_size, report.success
        ),
        path,
    })
}

fn write_stage_csv(path: &Path, stages: &[qpm_core::sieve::StageReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["stage", "width", "bins", "input", "output", "steps", "discarded"])?;
    for s in stages {
        w.write_record(
            [
                s.stage,
                s.width as usize,
                s.bins,
                s.input,
                s.output,
                s.steps,
                s.discarded,
            ]
            .map(|v| v.to_string()),
        )?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::io(path, e.into_error()))?;
    crate::format::write_bytes(path, &bytes)
}

fn read_pair(c: &MatchConfig) -> Result<(GridString, GridString)> {
    let text = read_grid(&c.text)?.grid;
    let pattern = read_grid(&c.pattern)?.grid;
    Ok((text, pattern))
}

pub fn cmd_match(c: &MatchConfig, seed: u64, out_dir: &Path) -> Result<Outcome> {
    let (text, pattern) = read_pair(c)?;
    let mut recovery = c.recovery.clone();
    if let Some(path) = &c.calibration {
        recovery.pool_constant = load_pool_constant(path)?;
    }
    let params = MatchParams {
        nu: c.nu.unwrap_or(1),
        gamma: c.gamma,
        epsilon: c.epsilon,
        trial_budget: c.budget,
        recovery,
        confirm: true,
    };
    let root = SeedTree::new(seed);
    let mut ledger = QueryLedger::new();
    let (outcome, nus) = match c.nu {
        Some(nu) => (
            find_match(&text, &pattern, &params, &root.child(0), &mut ledger)?,
            vec![nu],
        ),
        None => {
            let auto = find_match_auto_nu(&text, &pattern, &params, &root.child(0), &mut ledger)?;
            (auto.outcome, auto.nus)
        }
    };
    let mut baseline_skipped = None;
    let (baseline, brute_force) = if c.baseline {
        let base = match classical_injective_match(&text, &pattern, c.gamma, &root.child(1), &mut QueryLedger::new()) {
            Ok(b) => Some(b),
            Err(qpm_core::Error::Contract(why)) => {
                baseline_skipped = Some(why);
                None
            }
            Err(e) => return Err(e.into()),
        };
        let oracle = brute_force_match(&text, &pattern)?;
        let brute = BruteForceColumns {
            matches: oracle.all_matches,
            ledger: oracle.queries_used,
        };
        (base, Some(brute))
    } else {
        (None, None)
    };
    let report = MatchReport {
        seed,
        text: display(&c.text),
        pattern: display(&c.pattern),
        n: text.side(),
        m: pattern.side(),
        d: text.dims(),
        gamma: c.gamma,
        nus,
        plan: outcome.plan,
        verdict: outcome.verdict,
        trials: outcome.trials,
        rejected_claims: outcome.rejected_claims,
        ledger,
        baseline,
        baseline_skipped,
        brute_force,
    };
    let path = output_path(&c.output, out_dir, "match.json");
    write_json(&path, &Report::Match(report.clone()))?;
    let verdict = match &report.verdict {
        Verdict::Found(at) => format!("found at {at:?}"),
        Verdict::NotFound => "not found".into(),
    };
    Ok(Outcome {
        summary: format!(
            "match {verdict} after {} trial(s); quantum cost {}, text queries {}, pattern queries {}",
            report.trials,
            report.ledger.quantum_cost(),
            report.ledger.text_queries(),
            report.ledger.pattern_queries()
        ),
        path,
    })
}

fn verdict_consistent(verdict: &Verdict, matches: &[Vec<usize>]) -> std::result::Result<(), String> {
    match verdict {
        Verdict::Found(at) if matches.contains(at) => Ok(()),
        Verdict::Found(at) => Err(format!("claimed offset {at:?} is not an occurrence")),
        Verdict::NotFound if matches.is_empty() => Ok(()),
        Verdict::NotFound => Err(format!(
            "missed {} occurrence(s), first at {:?}",
            matches.len(),
            matches[0]
        )),
    }
}

fn verify_report(report: &Report) -> Result<(String, std::result::Result<String, String>)> {
    Ok(match report {
        Report::Match(r) => {
            let text = read_grid(Path::new(&r.text))?.grid;
            let pattern = read_grid(Path::new(&r.pattern))?.grid;
            let matches = brute_force_match(&text, &pattern)?.all_matches;
            let mut result = verdict_consistent(&r.verdict, &matches);
            if let (Ok(_), Some(b)) = (&result, &r.baseline) {
                result = verdict_consistent(&b.verdict, &matches).map_err(|e| format!("baseline: {e}"));
            }
            (
                "match".into(),
                result.map(|_| format!("{} occurrence(s) by full scan", matches.len())),
            )
        }
        Report::Sieve(r) => {
            let inst = match &r.instance {
                InstanceSource::File(p) => read_shift_instance_unsealed(Path::new(p))?,
                InstanceSource::Generated { bits, d, .. } => {
                    gen_shift_instance(*bits, *d, None, SeedTree::new(r.seed).child(0).seed_u64())?
                }
            };
            let truth = inst.sealed_shift().map(|s| *s.unseal());
            let result = match (truth, r.recovered) {
                (Some(t), Some(got)) if t == got => Ok(format!("shift {:?} matches the sealed answer", t.components())),
                (Some(t), got) => Err(format!(
                    "recovered {:?}, sealed {:?}",
                    got.map(|g| g.components().to_vec()),
                    t.components()
                )),
                (None, _) => Err("instance has no sealed shift".into()),
            };
            ("sieve".into(), result)
        }
        Report::Gen(r) => {
            let find = |suffix: &str| r.files.iter().find(|f| f.ends_with(suffix)).map(PathBuf::from);
            let result = match (
                find("text.qpg").or(find("text.txt")),
                find("pattern.qpg").or(find("pattern.txt")),
                find("sealed.json"),
            ) {
                (Some(t), Some(p), Some(s)) => {
                    let text = read_grid(&t)?.grid;
                    let pattern = read_grid(&p)?.grid;
                    let sealed: SealedPlant = read_json(&s)?;
                    let matches = brute_force_match(&text, &pattern)?.all_matches;
                    match sealed.planted {
                        Some(at) if matches.contains(&at) => Ok(format!("planted offset {at:?} holds the pattern")),
                        Some(at) => Err(format!("planted offset {at:?} does not hold the pattern")),
                        None => Ok(format!(
                            "no planted offset; {} occurrence(s) by full scan",
                            matches.len()
                        )),
                    }
                }
                _ => {
                    let shift = r.files.iter().find(|f| f.ends_with(".shift")).map(PathBuf::from);
                    match shift {
                        Some(p) => {
                            let inst = read_shift_instance_unsealed(&p)?;
                            let best = qpm_core::baseline::brute_force_shift(&inst)?;
                            match inst.sealed_shift().map(|s| *s.unseal()) {
                                Some(t) if t == best => {
                                    Ok(format!("sealed shift {:?} is the best shift", t.components()))
                                }
                                other => Err(format!("best shift {:?}, sealed {:?}", best.components(), other)),
                            }
                        }
                        None => Err("report lists no instance files".into()),
                    }
                }
            };
            ("gen".into(), result)
        }
        Report::Calibrate(_) | Report::Verify(_) => {
            return Err(CliError::Validation(
                "only gen, sieve and match reports can be verified".into(),
            ))
        }
    })
}

pub fn cmd_verify(c: &VerifyConfig, out_dir: &Path) -> Result<Outcome> {
    let report: Report = read_json(&c.report)?;
    let (kind, result) = verify_report(&report)?;
    let out = VerifyReport {
        target: display(&c.report),
        kind,
        consistent: result.is_ok(),
        detail: match &result {
            Ok(s) | Err(s) => s.clone(),
        },
    };
    let path = output_path(&c.output, out_dir, "verify.json");
    write_json(&path, &Report::Verify(out.clone()))?;
    match result {
        Ok(detail) => Ok(Outcome {
            path,
            summary: format!("verified {}: {detail}", out.kind),
        }),
        Err(detail) => Err(CliError::Unmet(format!("{} report inconsistent: {detail}", out.kind))),
    }
}
