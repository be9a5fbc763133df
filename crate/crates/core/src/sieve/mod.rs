//! Label-level simulation of the hidden-shift sieve over `Z_{2^n}^d`.
//!
//! A sieve element is the one-qubit state `(|0> + w^{r.s}|1>)/sqrt 2`. The
//! simulator keeps the known label `r` and the phase exponent `r.s mod 2^n`
//! as integers; no amplitude is ever stored. Combination, binning and the
//! final Hadamard measurement are exact stochastic rules on these integers.

mod instance;
mod label;
mod recover;
mod schedule;
mod stage;

pub use instance::{
    prepare_state, ExactSource, HiddenShiftInstance, PoisonModel, PoisonSource, RoundOffsets, Sealed, ShiftProblem,
    ShiftTables, StateSource, MAX_TABLE,
};
pub use label::{combine, combine_with, measure_final, ParitySample, PhaseLabel, PhaseState};
pub use recover::{
    recover_low_bits, recover_shift, LowBits, RecoveryConfig, RoundReport, ShiftOutcome, ShiftRecovery,
    DEFAULT_POOL_CONSTANT,
};
pub use schedule::{make_schedule, SieveSchedule, OPTIMAL_STAGE_FACTOR};
pub use stage::{run_sieve, run_stage, SieveRun, StageReport, MAX_POOL};

/// Most dimensions a label can carry.
pub const MAX_DIMS: usize = 4;
/// Most bits per label component.
pub const MAX_BITS: u32 = 32;

#[inline]
pub(crate) fn mask(n_bits: u32) -> u32 {
    if n_bits >= 32 {
        u32::MAX
    } else {
        (1u32 << n_bits) - 1
    }
}
