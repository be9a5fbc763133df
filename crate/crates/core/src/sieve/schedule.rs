use alloc::vec::Vec;

use libm::{ceil, exp2, log2, round, sqrt};

use crate::error::{Error, Result};

/// `sqrt(2 log_3 2)`: the stage count that minimises the pool exponent is
/// this factor times `sqrt(d n)`.
pub const OPTIMAL_STAGE_FACTOR: f64 = 1.123_325_200_973_838_6;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SieveSchedule {
    n_bits: u32,
    dims: usize,
    stage_count: usize,
    bit_widths: Vec<u32>,
    pool_size: u64,
    stop_threshold: u64,
    exponent: f64,
}

/// Schedule for `n` bits per component in `d` dimensions.
///
/// Stage `i` (1-based) would ideally zero `(c sqrt n - i log2 3) / d` bits
/// with `c = d sqrt n / S + log2 3 (S + 1) / (2 sqrt n)`. The real widths are
/// clamped at zero, rounded, and repaired one bit at a time at the stage
/// with the largest rounding error until they sum to `n - 1`. The pool is
/// `ceil(pool_constant * n * 2^{c sqrt n})`, saturating at `u64::MAX`.
pub fn make_schedule(n_bits: u32, dims: usize, pool_constant: f64) -> Result<SieveSchedule> {
    if n_bits == 0 || dims == 0 {
        return Err(Error::param("schedule needs n >= 1 and d >= 1"));
    }
    if !(pool_constant.is_finite() && pool_constant > 0.0) {
        return Err(Error::param(alloc::format!(
            "pool constant must be positive, got {pool_constant}"
        )));
    }
    let n = n_bits as f64;
    let d = dims as f64;
    let rn = sqrt(n);
    let stages = (round(OPTIMAL_STAGE_FACTOR * sqrt(d * n)) as usize).max(1);
    let s = stages as f64;
    let log3 = log2(3.0);
    let c = d * rn / s + log3 * (s + 1.0) / (2.0 * rn);

    let ideal: Vec<f64> = (1..=stages)
        .map(|i| ((c * rn - log3 * i as f64) / d).max(0.0))
        .collect();
    let mut widths: Vec<i64> = ideal.iter().map(|&x| round(x) as i64).collect();
    let target = n_bits as i64 - 1;
    let mut sum: i64 = widths.iter().sum();
    while sum > target {
        let i = pick(&widths, &ideal, |w, x| (w > 0).then_some(w as f64 - x));
        widths[i] -= 1;
        sum -= 1;
    }
    while sum < target {
        let i = pick(&widths, &ideal, |w, x| Some(x - w as f64));
        widths[i] += 1;
        sum += 1;
    }

    let pool = ceil(pool_constant * n * exp2(c * rn));
    let pool_size = if pool >= u64::MAX as f64 {
        u64::MAX
    } else {
        (pool as u64).max(2)
    };

    Ok(SieveSchedule {
        n_bits,
        dims,
        stage_count: stages,
        bit_widths: widths.into_iter().map(|w| w as u32).collect(),
        pool_size,
        stop_threshold: (n_bits as u64) * (n_bits as u64),
        exponent: c,
    })
}

// Index with the largest score; ties go to the earlier stage.
fn pick(widths: &[i64], ideal: &[f64], score: impl Fn(i64, f64) -> Option<f64>) -> usize {
    let mut best: Option<(usize, f64)> = None;
    for (i, (&w, &x)) in widths.iter().zip(ideal).enumerate() {
        if let Some(e) = score(w, x) {
            if best.is_none_or(|(_, b)| e > b) {
                best = Some((i, e));
            }
        }
    }
    best.expect("a stage can always absorb the repair").0
}

impl SieveSchedule {
    pub fn n_bits(&self) -> u32 {
        self.n_bits
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn stage_count(&self) -> usize {
        self.stage_count
    }

    pub fn bit_widths(&self) -> &[u32] {
        &self.bit_widths
    }

    pub fn pool_size(&self) -> u64 {
        self.pool_size
    }

    pub fn stop_threshold(&self) -> u64 {
        self.stop_threshold
    }

    /// The constant `c` in the pool exponent `c sqrt n`.
    pub fn exponent_constant(&self) -> f64 {
        self.exponent
    }

    /// Bits zeroed before stage `i` (0-based).
    pub fn stage_offset(&self, i: usize) -> u32 {
        self.bit_widths[..i].iter().sum()
    }

    /// Same schedule with an explicit pool size.
    pub fn with_pool_size(mut self, pool_size: u64) -> Result<Self> {
        if pool_size < 2 {
            return Err(Error::param("pool size must be at least 2"));
        }
        self.pool_size = pool_size;
        Ok(self)
    }

    /// Same schedule with explicit widths, which must sum to `n - 1`.
    pub fn with_bit_widths(mut self, widths: Vec<u32>) -> Result<Self> {
        let sum: u64 = widths.iter().map(|&w| w as u64).sum();
        if widths.is_empty() || sum != self.n_bits as u64 - 1 {
            return Err(Error::param(alloc::format!(
                "bit widths must be non-empty and sum to {}, got {sum}",
                self.n_bits - 1
            )));
        }
        self.stage_count = widths.len();
        self.bit_widths = widths;
        Ok(self)
    }
}
