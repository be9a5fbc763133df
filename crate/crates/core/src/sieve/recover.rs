use alloc::boxed::Box;
use alloc::vec::Vec;

use rand::RngCore;

use super::{
    make_schedule, measure_final, run_sieve, PhaseLabel, RoundOffsets, ShiftProblem, SieveSchedule, StateSource,
};
use crate::error::{Error, Result};
use crate::gf2::Gf2System;
use crate::ledger::QueryLedger;
use crate::rng::SeedTree;

/// Pool constant from calibration at n in {8, 12, 16} (d = 1) and n = 8
/// (d = 2), 200 trials each: bisection puts the 0.75 success rate at four
/// final states near 0.65, with n = 8 binding. Rounded up to a multiple of
/// 1/2 for margin. `qpm calibrate` reruns the search.
pub const DEFAULT_POOL_CONSTANT: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RecoveryConfig {
    pub pool_constant: f64,
    /// Final states a sieve run aims for.
    pub k_target: usize,
    /// Sieve runs per low-bit recovery before giving up.
    pub max_sieve_runs: usize,
    /// Independent low-bit recoveries per round, combined by majority.
    pub votes: usize,
    /// Draw the free recursion offset `a` at random instead of fixing 0.
    pub random_offset: bool,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        RecoveryConfig {
            pool_constant: DEFAULT_POOL_CONSTANT,
            k_target: 4,
            max_sieve_runs: 16,
            votes: 1,
            random_offset: false,
        }
    }
}

impl RecoveryConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_target == 0 || self.max_sieve_runs == 0 || self.votes == 0 {
            return Err(Error::param("k_target, max_sieve_runs and votes must be positive"));
        }
        if !(self.pool_constant.is_finite() && self.pool_constant > 0.0) {
            return Err(Error::param("pool constant must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LowBits {
    /// Bit `i` is the low bit of component `i`.
    pub bits: u64,
    pub sieve_runs: usize,
    pub samples: usize,
    /// Measured states that were poisoned (simulation diagnostics).
    pub poisoned_samples: usize,
}

/// Sieve, measure final states and solve for the low bits over GF(2).
/// Samples accumulate across sieve runs until the `beta` vectors span.
pub fn recover_low_bits<S: StateSource + ?Sized>(
    source: &S,
    schedule: &SieveSchedule,
    config: &RecoveryConfig,
    seed: &SeedTree,
    ledger: &mut QueryLedger,
) -> Result<LowBits> {
    config.validate()?;
    let mut system = Gf2System::new(source.dims() as u32);
    let mut samples = 0;
    let mut poisoned = 0;
    for attempt in 0..config.max_sieve_runs {
        let node = seed.child(attempt as u64);
        let run = run_sieve(source, schedule, config.k_target, &node, ledger)?;
        let mut rng = node.stream(1);
        for state in &run.final_states {
            let sample = measure_final(state, &mut rng)?;
            samples += 1;
            poisoned += state.is_poisoned() as usize;
            system.insert(sample.beta, sample.parity);
            if let Some(bits) = system.solve() {
                return Ok(LowBits {
                    bits,
                    sieve_runs: attempt + 1,
                    samples,
                    poisoned_samples: poisoned,
                });
            }
        }
    }
    Err(Error::RecoveryFailed {
        attempts: config.max_sieve_runs,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RoundReport {
    pub level: u32,
    pub bits: u64,
    pub votes_ok: usize,
    pub sieve_runs: usize,
    pub samples: usize,
    pub poisoned_samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ShiftOutcome {
    Recovered(PhaseLabel),
    /// A component already exceeded the bound after this level.
    OutOfBound {
        level: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ShiftRecovery {
    pub outcome: ShiftOutcome,
    pub rounds: Vec<RoundReport>,
}

impl ShiftRecovery {
    pub fn shift(&self) -> Option<&PhaseLabel> {
        match &self.outcome {
            ShiftOutcome::Recovered(s) => Some(s),
            ShiftOutcome::OutOfBound { .. } => None,
        }
    }

    pub fn poisoned_samples(&self) -> usize {
        self.rounds.iter().map(|r| r.poisoned_samples).sum()
    }
}

/// Learn the shift one bit per component per round, halving the domain
/// after each round. With `bound`, stop as soon as a component is known
/// to exceed it; bits only ever add, so the partial value is a lower bound.
pub fn recover_shift<P: ShiftProblem>(
    problem: &P,
    config: &RecoveryConfig,
    bound: Option<u32>,
    seed: &SeedTree,
    ledger: &mut QueryLedger,
) -> Result<ShiftRecovery> {
    config.validate()?;
    let n = problem.n_bits();
    let d = problem.dims();
    let mut offsets = RoundOffsets::initial(n, d)?;
    let mut comps = [0u32; super::MAX_DIMS];
    let mut rounds = Vec::with_capacity(n as usize);
    for level in 0..n {
        let round = seed.child(level as u64);
        let source = problem.round_source(&offsets, ledger)?;
        let schedule = make_schedule(n - level, d, config.pool_constant)?;
        let mut ok: Vec<LowBits> = Vec::with_capacity(config.votes);
        let mut last_err = None;
        for v in 0..config.votes {
            match recover_low_bits(&source, &schedule, config, &round.child(v as u64 + 1), ledger) {
                Ok(bits) => ok.push(bits),
                Err(e @ Error::RecoveryFailed { .. }) => last_err = Some(e),
                Err(e) => return Err(e),
            }
        }
        if ok.is_empty() {
            return Err(Error::Round {
                round: level,
                source: Box::new(last_err.expect("at least one vote")),
            });
        }
        let bits = majority(&ok, d);
        for (i, c) in comps[..d].iter_mut().enumerate() {
            *c |= (((bits >> i) & 1) as u32) << level;
        }
        rounds.push(RoundReport {
            level,
            bits,
            votes_ok: ok.len(),
            sieve_runs: ok.iter().map(|b| b.sieve_runs).sum(),
            samples: ok.iter().map(|b| b.samples).sum(),
            poisoned_samples: ok.iter().map(|b| b.poisoned_samples).sum(),
        });
        if bound.is_some_and(|b| comps[..d].iter().any(|&c| c > b)) {
            return Ok(ShiftRecovery {
                outcome: ShiftOutcome::OutOfBound { level },
                rounds,
            });
        }
        if level + 1 < n {
            let a = if config.random_offset {
                round.rng().next_u64() & ((1u64 << d) - 1)
            } else {
                0
            };
            offsets = offsets.descend(a, bits)?;
        }
    }
    Ok(ShiftRecovery {
        outcome: ShiftOutcome::Recovered(PhaseLabel::new(n, &comps[..d])?),
        rounds,
    })
}

// Per-component majority; a tie goes to the first vote.
fn majority(votes: &[LowBits], d: usize) -> u64 {
    let mut out = 0;
    for i in 0..d {
        let ones = votes.iter().filter(|v| (v.bits >> i) & 1 == 1).count();
        let bit = if 2 * ones == votes.len() {
            (votes[0].bits >> i) & 1 == 1
        } else {
            2 * ones > votes.len()
        };
        out |= (bit as u64) << i;
    }
    out
}
