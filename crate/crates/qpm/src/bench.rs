//! Cost sweeps: one CSV row per trial, plus a JSON summary with the
//! log-log slope of the mean cost against n.

use std::collections::HashSet;
use std::path::Path;
use std::time::Instant;

use qpm_core::baseline::classical_injective_match;
use qpm_core::instances::{gen_permutation_pair, generate, GenMode, GenSpec};
use qpm_core::matcher::{find_match, MatchParams, Matcher, Verdict};
use qpm_core::stats::log_log_slope;
use qpm_core::{QueryLedger, SeedTree};
use serde::{Deserialize, Serialize};

use crate::config::{BenchConfig, BenchFamily};
use crate::error::{CliError, Result};
use crate::experiment::try_run_indexed;
use crate::format::{write_bytes, write_json};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub q: u32,
    pub gamma: f64,
    /// 0 for the classical family.
    pub nu: usize,
    pub seed: u64,
    pub verdict: String,
    pub quantum_cost: u64,
    pub text_queries: u64,
    pub pattern_queries: u64,
    pub classical_work: u64,
    pub wall_ms: f64,
}

impl BenchRow {
    /// Total oracle queries charged: the quantum column for the quantum
    /// family, reads for the classical one.
    pub fn cost(&self, family: BenchFamily) -> u64 {
        match family {
            BenchFamily::Quantum => self.quantum_cost,
            BenchFamily::Baseline => self.text_queries + self.pattern_queries,
        }
    }

    /// Same trial, ignoring timing.
    pub fn same_trial(&self, other: &BenchRow) -> bool {
        BenchRow {
            wall_ms: 0.0,
            ..self.clone()
        } == BenchRow {
            wall_ms: 0.0,
            ..other.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchPoint {
    pub n: usize,
    pub m: usize,
    pub mean_cost: f64,
    pub found: u64,
    pub trials: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub family: BenchFamily,
    pub seed: u64,
    pub points: Vec<BenchPoint>,
    /// Log-log slope of mean cost against n.
    pub slope: Option<f64>,
}

fn verdict_name(v: &Verdict) -> &'static str {
    match v {
        Verdict::Found(_) => "found",
        Verdict::NotFound => "not_found",
    }
}

// Trial seed for point `i`, trial `t`.
fn trial_seed(seed: u64, i: usize, t: u64) -> u64 {
    SeedTree::new(seed).path(&[i as u64, t]).seed_u64()
}

/// One trial of the sweep.
pub fn bench_trial(c: &BenchConfig, n: usize, seed: u64) -> Result<BenchRow> {
    let m = c.pattern_side(n);
    let start = Instant::now();
    let mut row = BenchRow {
        n,
        m,
        d: c.d,
        q: c.q,
        gamma: c.gamma,
        nu: 0,
        seed,
        verdict: String::new(),
        quantum_cost: 0,
        text_queries: 0,
        pattern_queries: 0,
        classical_work: 0,
        wall_ms: 0.0,
    };
    let ledger = match c.family {
        BenchFamily::Quantum => {
            let spec = GenSpec {
                n,
                m,
                d: c.d,
                q: c.q,
                seed,
                mode: GenMode::RandomPlanted,
            };
            let inst = generate(&spec)?;
            let mut params = MatchParams::new(c.nu, c.gamma);
            params.epsilon = c.epsilon;
            params.trial_budget = c.budget;
            row.nu = c.nu;
            let node = SeedTree::new(seed).child(1);
            if c.plan_only {
                let mut l = QueryLedger::new();
                let plan = Matcher::new(&inst.text, &inst.pattern, &params, &mut l)?.plan().clone();
                row.verdict = "planned".into();
                // Setup only reads; the whole charge is the planned search.
                l.charge_quantum(plan.search_cost());
                l
            } else {
                let out = find_match(&inst.text, &inst.pattern, &params, &node, &mut QueryLedger::new())?;
                row.verdict = verdict_name(&out.verdict).into();
                out.ledger
            }
        }
        BenchFamily::Baseline => {
            let inst = gen_permutation_pair(n, m, c.d, true, seed)?;
            row.q = inst.text.alphabet();
            let node = SeedTree::new(seed).child(1);
            let out = classical_injective_match(&inst.text, &inst.pattern, c.gamma, &node, &mut QueryLedger::new())?;
            row.verdict = verdict_name(&out.verdict).into();
            out.ledger
        }
    };
    row.quantum_cost = ledger.quantum_cost();
    row.text_queries = ledger.text_queries();
    row.pattern_queries = ledger.pattern_queries();
    row.classical_work = ledger.classical_work();
    row.wall_ms = (start.elapsed().as_secs_f64() * 1e6).round() / 1e3;
    Ok(row)
}

/// Every row of the sweep in order, reusing `existing` rows whose
/// `(n, m, seed)` matches.
pub fn run_sweep(c: &BenchConfig, seed: u64, workers: usize, existing: &[BenchRow]) -> Result<Vec<BenchRow>> {
    let keys: Vec<(usize, u64)> = c
        .n_values
        .iter()
        .enumerate()
        .flat_map(|(i, &n)| (0..c.trials).map(move |t| (n, trial_seed(seed, i, t))))
        .collect();
    let done: HashSet<(usize, usize, u64)> = existing.iter().map(|r| (r.n, r.m, r.seed)).collect();
    let todo: Vec<(usize, u64)> = keys
        .iter()
        .copied()
        .filter(|&(n, s)| !done.contains(&(n, c.pattern_side(n), s)))
        .collect();
    let fresh = try_run_indexed(todo.len() as u64, workers, |i| {
        let (n, s) = todo[i as usize];
        bench_trial(c, n, s)
    })?;
    let mut fresh = fresh.into_iter();
    let mut rows = Vec::with_capacity(keys.len());
    for (n, s) in keys {
        let m = c.pattern_side(n);
        match existing.iter().find(|r| (r.n, r.m, r.seed) == (n, m, s)) {
            Some(r) => rows.push(r.clone()),
            None => rows.push(fresh.next().expect("one fresh row per missing key")),
        }
    }
    Ok(rows)
}

pub fn summarize(c: &BenchConfig, seed: u64, rows: &[BenchRow]) -> BenchSummary {
    let points: Vec<BenchPoint> = c
        .n_values
        .iter()
        .map(|&n| {
            let mine: Vec<&BenchRow> = rows.iter().filter(|r| r.n == n).collect();
            let total: u64 = mine.iter().map(|r| r.cost(c.family)).sum();
            BenchPoint {
                n,
                m: c.pattern_side(n),
                mean_cost: total as f64 / mine.len().max(1) as f64,
                found: mine.iter().filter(|r| r.verdict == "found").count() as u64,
                trials: mine.len() as u64,
            }
        })
        .collect();
    let slope = (points.len() >= 2).then(|| {
        let xs: Vec<f64> = points.iter().map(|p| p.n as f64).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.mean_cost.max(1.0)).collect();
        log_log_slope(&xs, &ys)
    });
    BenchSummary {
        family: c.family,
        seed,
        points,
        slope,
    }
}

pub fn read_rows(path: &Path) -> Result<Vec<BenchRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::format(path, format!("{other:?}")),
    })?;
    r.deserialize().map(|row| row.map_err(CliError::from)).collect()
}

pub fn encode_rows(rows: &[BenchRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    if rows.is_empty() {
        return Ok(Vec::new());
    }
    w.into_inner().map_err(|e| CliError::Validation(e.to_string()))
}

pub fn cmd_bench(c: &BenchConfig, seed: u64, workers: usize, out_dir: &Path) -> Result<crate::commands::Outcome> {
    let csv_path = c.csv.clone().unwrap_or_else(|| out_dir.join("bench.csv"));
    let existing = if c.resume && csv_path.exists() {
        read_rows(&csv_path)?
    } else {
        Vec::new()
    };
    let rows = run_sweep(c, seed, workers, &existing)?;
    write_bytes(&csv_path, &encode_rows(&rows)?)?;
    let summary = summarize(c, seed, &rows);
    let json_path = csv_path.with_extension("json");
    write_json(&json_path, &summary)?;
    let slope = summary.slope.map(|s| format!("{s:.3}")).unwrap_or_else(|| "-".into());
    Ok(crate::commands::Outcome {
        path: csv_path,
        summary: format!(
            "bench {}: {} row(s), {} reused, log-log slope {slope}",
            format!("{:?}", c.family).to_lowercase(),
            rows.len(),
            existing.len()
        ),
    })
}
