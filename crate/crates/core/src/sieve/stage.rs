use alloc::vec::Vec;

use super::label::combine_with;
use super::{mask, PhaseState, SieveSchedule, StateSource};
use crate::error::{Error, Result};
use crate::ledger::QueryLedger;
use crate::rng::{Coins, SeedTree};

/// Largest pool a single sieve run will allocate.
pub const MAX_POOL: u64 = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StageReport {
    /// 0-based stage index.
    pub stage: usize,
    pub width: u32,
    /// Non-empty bins at the start of the stage.
    pub bins: usize,
    pub input: usize,
    pub output: usize,
    pub steps: usize,
    /// Unpaired states dropped across all steps.
    pub discarded: usize,
    /// States still binned when the stage stopped.
    pub remaining: usize,
}

/// One stage: zero bits `[offset, offset + width)` of every component.
///
/// States are binned by those bits (stable order, so pairing within a bin
/// follows arrival order). Each step pairs neighbours in every bin, drops
/// a leftover, sends successes to the output and keeps failures in their
/// bin. Every state in a bin has seen the same number of failures, so their
/// block bits stay equal and any success zeroes the block. Steps repeat
/// until at most `stop_threshold` states remain binned, with at least one
/// step even when the input is already that small.
///
/// The coin of pair `p` in step `j` is bit `p` of the stream at
/// `seed.path([stage, j])`, pairs counted across bins in bin order.
pub fn run_stage(
    pool: Vec<PhaseState>,
    stage: usize,
    schedule: &SieveSchedule,
    seed: &SeedTree,
) -> Result<(Vec<PhaseState>, StageReport)> {
    let width = *schedule
        .bit_widths()
        .get(stage)
        .ok_or_else(|| Error::param(alloc::format!("stage {stage} is past the schedule")))?;
    let offset = schedule.stage_offset(stage);
    let n = schedule.n_bits();
    if let Some(bad) = pool
        .iter()
        .find(|s| s.label().n_bits() != n || s.label().dims() != schedule.dims() || !s.label().low_bits_zero(offset))
    {
        return Err(Error::Invariant(alloc::format!(
            "stage {stage} input {:?} lacks {offset} zero low bits",
            bad.label().components()
        )));
    }
    let input = pool.len();
    let wmask = mask(width) as u128;
    let key = |s: &PhaseState| {
        s.label()
            .components()
            .iter()
            .fold(0u128, |k, &c| (k << width) | ((c >> offset) as u128 & wmask))
    };
    let mut pool = pool;
    if width > 0 {
        pool.sort_by_cached_key(key);
    }
    let mut bins: Vec<Vec<PhaseState>> = Vec::new();
    let mut last = None;
    for s in pool {
        let k = if width > 0 { key(&s) } else { 0 };
        if last != Some(k) {
            bins.push(Vec::new());
            last = Some(k);
        }
        bins.last_mut().expect("pushed").push(s);
    }
    let bin_count = bins.len();

    let mut out = Vec::new();
    let mut total;
    let mut steps = 0;
    let mut discarded = 0;
    let threshold = schedule.stop_threshold() as usize;
    loop {
        let mut coins = Coins::new(seed.path(&[stage as u64, steps as u64]).rng());
        let mut paired = false;
        total = 0;
        for bin in &mut bins {
            let states = core::mem::take(bin);
            let mut it = states.chunks_exact(2);
            for pair in &mut it {
                paired = true;
                let success = coins.flip();
                let c = combine_with(&pair[0], &pair[1], success)?;
                if success {
                    out.push(c);
                } else {
                    bin.push(c);
                }
            }
            discarded += it.remainder().len();
            total += bin.len();
        }
        steps += 1;
        if !paired || total <= threshold {
            break;
        }
    }

    let zeroed = offset + width;
    if let Some(bad) = out.iter().find(|s| !s.label().low_bits_zero(zeroed)) {
        return Err(Error::Invariant(alloc::format!(
            "stage {stage} output {:?} has non-zero bits below {zeroed}",
            bad.label().components()
        )));
    }
    let report = StageReport {
        stage,
        width,
        bins: bin_count,
        input,
        output: out.len(),
        steps,
        discarded,
        remaining: total,
    };
    Ok((out, report))
}

/// Outcome of one sieve run.
#[derive(Debug, Clone, PartialEq)]
pub struct SieveRun {
    pub prepared: u64,
    pub stages: Vec<StageReport>,
    /// Every label is in `{0, 2^{n-1}}^d`.
    pub final_states: Vec<PhaseState>,
    pub k_target: usize,
    /// Final list holds at least `k_target` states.
    pub success: bool,
    /// The pool emptied before the last stage.
    pub exhausted: bool,
}

impl SieveRun {
    pub fn poisoned_final(&self) -> usize {
        self.final_states.iter().filter(|s| s.is_poisoned()).count()
    }
}

/// Prepare `N` states from `source` and run every stage of `schedule`.
/// Stages of width zero zero nothing and are skipped, so `n = 1` is a
/// pass-through. Preparation draws from `seed.child(0)`; stage `i` from
/// `seed.child(i + 1)`.
pub fn run_sieve<S: StateSource + ?Sized>(
    source: &S,
    schedule: &SieveSchedule,
    k_target: usize,
    seed: &SeedTree,
    ledger: &mut QueryLedger,
) -> Result<SieveRun> {
    if source.n_bits() != schedule.n_bits() || source.dims() != schedule.dims() {
        return Err(Error::Shape(alloc::format!(
            "schedule for n={} d={} used on a source with n={} d={}",
            schedule.n_bits(),
            schedule.dims(),
            source.n_bits(),
            source.dims()
        )));
    }
    let n = schedule.pool_size();
    if n > MAX_POOL {
        return Err(Error::Size(alloc::format!(
            "pool of {n} states exceeds the limit of {MAX_POOL}"
        )));
    }
    let mut rng = seed.child(0).rng();
    let mut pool: Vec<PhaseState> = (0..n).map(|_| source.prepare(&mut rng, ledger)).collect();
    let mut stages = Vec::new();
    let mut exhausted = false;
    for i in 0..schedule.stage_count() {
        if schedule.bit_widths()[i] == 0 {
            continue;
        }
        if pool.is_empty() {
            exhausted = true;
        }
        let (next, report) = run_stage(pool, i, schedule, &seed.child(i as u64 + 1))?;
        pool = next;
        stages.push(report);
    }
    if let Some(bad) = pool.iter().find(|s| !s.label().is_final()) {
        return Err(Error::Invariant(alloc::format!(
            "final label {:?} is not in {{0, 2^(n-1)}}^d",
            bad.label().components()
        )));
    }
    Ok(SieveRun {
        prepared: n,
        stages,
        success: pool.len() >= k_target,
        final_states: pool,
        k_target,
        exhausted,
    })
}
