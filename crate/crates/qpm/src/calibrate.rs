//! Pool-constant calibration by bisection. Every candidate constant is
//! scored on the same trial seeds, so the comparison between constants is
//! not blurred by sampling noise.

use std::path::Path;

use crate::commands::Outcome;
use crate::config::CalibrateConfig;
use crate::error::{CliError, Result};
use crate::experiment::sieve_success;
use crate::format::write_json;
use crate::report::{CalibrationReport, Evaluation, Report};

fn evaluate(c: &CalibrateConfig, constant: f64, seed: u64, workers: usize) -> Result<Evaluation> {
    let sizes = c
        .sizes
        .iter()
        .map(|s| sieve_success(s.n, s.d, constant, c.k_target, c.trials, seed, workers))
        .collect::<Result<Vec<_>>>()?;
    let meets_target = sizes.iter().all(|s| s.success.estimate >= c.target);
    Ok(Evaluation {
        pool_constant: constant,
        meets_target,
        sizes,
    })
}

/// Smallest constant found to meet the target at every size, to within
/// `tolerance`. If `hi` fails it is doubled until it passes or the
/// iteration cap is reached.
pub fn calibrate(c: &CalibrateConfig, seed: u64, workers: usize) -> Result<CalibrationReport> {
    let mut evaluations = Vec::new();
    let (mut lo, mut hi) = (c.lo, c.hi);
    let mut iterations = 0;
    loop {
        let e = evaluate(c, hi, seed, workers)?;
        let ok = e.meets_target;
        evaluations.push(e);
        iterations += 1;
        if ok {
            break;
        }
        if iterations >= c.max_iter {
            return Err(CliError::Unmet(format!(
                "no pool constant up to {hi} reaches success {} within {} evaluations",
                c.target, c.max_iter
            )));
        }
        lo = hi;
        hi *= 2.0;
    }
    let first = evaluate(c, lo, seed, workers)?;
    let lo_ok = first.meets_target;
    evaluations.push(first);
    if lo_ok {
        hi = lo;
    }
    while !lo_ok && hi - lo > c.tolerance && iterations < c.max_iter {
        let mid = 0.5 * (lo + hi);
        let e = evaluate(c, mid, seed, workers)?;
        if e.meets_target {
            hi = mid;
        } else {
            lo = mid;
        }
        evaluations.push(e);
        iterations += 1;
    }
    Ok(CalibrationReport {
        seed,
        pool_constant: hi,
        target: c.target,
        trials: c.trials,
        evaluations,
    })
}

pub fn cmd_calibrate(c: &CalibrateConfig, seed: u64, workers: usize, out_dir: &Path) -> Result<Outcome> {
    let report = calibrate(c, seed, workers)?;
    let path = c.output.clone().unwrap_or_else(|| out_dir.join("calibration.json"));
    write_json(&path, &Report::Calibrate(report.clone()))?;
    Ok(Outcome {
        summary: format!(
            "pool constant {} after {} evaluation(s)",
            report.pool_constant,
            report.evaluations.len()
        ),
        path,
    })
}
