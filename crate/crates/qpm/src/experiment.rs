//! Trial-parallel Monte Carlo experiments. Trial `i` always draws from
//! `SeedTree::new(seed).child(i)` and results come back in trial order, so
//! the worker count never changes a result.

use qpm_core::baseline::brute_force_shift;
use qpm_core::instances::gen_shift_instance;
use qpm_core::sieve::{
    make_schedule, recover_shift, run_sieve, HiddenShiftInstance, RecoveryConfig, RoundOffsets, ShiftProblem,
};
use qpm_core::stats::{wilson, Proportion, Z95};
use qpm_core::{Error, QueryLedger, SeedTree};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::StateModel;
use crate::error::{CliError, Result};

/// `f(i)` for `i in 0..trials` on `workers` threads, in index order.
pub fn run_indexed<T, F>(trials: u64, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    if workers <= 1 {
        return Ok((0..trials).map(f).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Validation(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(|| (0..trials).into_par_iter().map(f).collect()))
}

/// As [`run_indexed`] for fallible trials; the first error by index wins.
pub fn try_run_indexed<T, F>(trials: u64, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    run_indexed(trials, workers, f)?.into_iter().collect()
}

/// Run a sieve on the instance's top-level source.
pub fn top_level_sieve(
    inst: &HiddenShiftInstance,
    model: StateModel,
    pool_constant: f64,
    k_target: usize,
    seed: &SeedTree,
    ledger: &mut QueryLedger,
) -> qpm_core::Result<qpm_core::sieve::SieveRun> {
    let schedule = make_schedule(inst.n_bits(), inst.dims(), pool_constant)?;
    let offsets = RoundOffsets::initial(inst.n_bits(), inst.dims())?;
    match model {
        StateModel::Exact => {
            let src = inst.tables().round_source(&offsets, ledger)?;
            run_sieve(&src, &schedule, k_target, seed, ledger)
        }
        StateModel::Poison => {
            let src = inst.poison_model().round_source(&offsets, ledger)?;
            run_sieve(&src, &schedule, k_target, seed, ledger)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SieveSuccess {
    pub n: u32,
    pub d: usize,
    pub pool_constant: f64,
    pub pool_size: u64,
    pub success: Proportion,
    pub mean_final: f64,
    /// Runs that failed the per-stage zeroing check.
    pub invariant_violations: u64,
}

/// Sieve success rate on fresh exact instances: trial `i` builds its
/// instance from `child(i).child(0)` and sieves with `child(i).child(1)`.
pub fn sieve_success(
    n: u32,
    d: usize,
    pool_constant: f64,
    k_target: usize,
    trials: u64,
    seed: u64,
    workers: usize,
) -> Result<SieveSuccess> {
    let pool_size = make_schedule(n, d, pool_constant)?.pool_size();
    let root = SeedTree::new(seed);
    let outcomes = try_run_indexed(trials, workers, |i| {
        let node = root.child(i);
        let inst = gen_shift_instance(n, d, None, node.child(0).seed_u64())?;
        let mut l = QueryLedger::new();
        match top_level_sieve(
            &inst,
            StateModel::Exact,
            pool_constant,
            k_target,
            &node.child(1),
            &mut l,
        ) {
            Ok(run) => Ok(Some((run.success, run.final_states.len()))),
            Err(Error::Invariant(_)) => Ok(None),
            Err(e) => Err(e.into()),
        }
    })?;
    let ok = outcomes.iter().flatten().filter(|(s, _)| *s).count() as u64;
    let finals: usize = outcomes.iter().flatten().map(|(_, f)| f).sum();
    Ok(SieveSuccess {
        n,
        d,
        pool_constant,
        pool_size,
        success: wilson(ok, trials, Z95),
        mean_final: finals as f64 / trials as f64,
        invariant_violations: outcomes.iter().filter(|o| o.is_none()).count() as u64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryRate {
    pub n: u32,
    pub d: usize,
    pub model: StateModel,
    pub noise: f64,
    pub recovered: Proportion,
    /// Trials where the brute-force scan found the sealed shift.
    pub brute_force_agree: Option<u64>,
    pub invariant_violations: u64,
    pub poisoned_samples: u64,
}

/// Shift recovery on fresh planted instances. Under the poison model each
/// instance carries noise level `noise`; exact instances ignore it.
#[allow(clippy::too_many_arguments)]
pub fn recovery_rate(
    n: u32,
    d: usize,
    model: StateModel,
    noise: f64,
    config: &RecoveryConfig,
    trials: u64,
    seed: u64,
    brute_force: bool,
    workers: usize,
) -> Result<RecoveryRate> {
    let root = SeedTree::new(seed);
    let outcomes = try_run_indexed(trials, workers, |i| {
        let node = root.child(i);
        let mut inst = gen_shift_instance(n, d, None, node.child(0).seed_u64())?;
        let truth = *inst.sealed_shift().expect("generated with a shift").unseal();
        let agree = brute_force
            .then(|| brute_force_shift(&inst).map(|s| s == truth))
            .transpose()?;
        let mut l = QueryLedger::new();
        let rec = match model {
            StateModel::Exact => recover_shift(&inst.tables(), config, None, &node.child(1), &mut l),
            StateModel::Poison => {
                inst = inst.with_corrupted(noise, Vec::new())?;
                recover_shift(&inst.poison_model(), config, None, &node.child(1), &mut l)
            }
        };
        Ok(match rec {
            Ok(r) => (r.shift() == Some(&truth), agree, false, r.poisoned_samples() as u64),
            Err(Error::Invariant(_)) => (false, agree, true, 0),
            Err(Error::Round { .. }) => (false, agree, false, 0),
            Err(e) => return Err(e.into()),
        })
    })?;
    let ok = outcomes.iter().filter(|o| o.0).count() as u64;
    Ok(RecoveryRate {
        n,
        d,
        model,
        noise,
        recovered: wilson(ok, trials, Z95),
        brute_force_agree: brute_force.then(|| outcomes.iter().filter(|o| o.1 == Some(true)).count() as u64),
        invariant_violations: outcomes.iter().filter(|o| o.2).count() as u64,
        poisoned_samples: outcomes.iter().map(|o| o.3).sum(),
    })
}

/// Mean number of poisoned states in the final list of a top-level sieve
/// under the poison model at noise level `noise`.
#[allow(clippy::too_many_arguments)]
pub fn mean_poisoned_final(
    n: u32,
    d: usize,
    noise: f64,
    pool_constant: f64,
    k_target: usize,
    trials: u64,
    seed: u64,
    workers: usize,
) -> Result<f64> {
    let root = SeedTree::new(seed);
    let counts = try_run_indexed(trials, workers, |i| {
        let node = root.child(i);
        let inst = gen_shift_instance(n, d, None, node.child(0).seed_u64())?.with_corrupted(noise, Vec::new())?;
        let mut l = QueryLedger::new();
        let run = top_level_sieve(
            &inst,
            StateModel::Poison,
            pool_constant,
            k_target,
            &node.child(1),
            &mut l,
        )?;
        Ok(run.poisoned_final() as u64)
    })?;
    Ok(counts.iter().sum::<u64>() as f64 / trials as f64)
}
