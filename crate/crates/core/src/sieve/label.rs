use core::f64::consts::PI;

use rand::{Rng, RngCore};

use super::{mask, MAX_BITS, MAX_DIMS};
use crate::error::{Error, Result};

/// A label `r` in `Z_{2^n}^d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(try_from = "LabelRepr", into = "LabelRepr")
)]
pub struct PhaseLabel {
    n_bits: u8,
    dims: u8,
    comps: [u32; MAX_DIMS],
}

#[cfg(feature = "serde")]
#[derive(serde::Serialize, serde::Deserialize)]
struct LabelRepr {
    n_bits: u32,
    components: alloc::vec::Vec<u32>,
}

#[cfg(feature = "serde")]
impl TryFrom<LabelRepr> for PhaseLabel {
    type Error = Error;

    fn try_from(r: LabelRepr) -> Result<Self> {
        PhaseLabel::new(r.n_bits, &r.components)
    }
}

#[cfg(feature = "serde")]
impl From<PhaseLabel> for LabelRepr {
    fn from(l: PhaseLabel) -> Self {
        LabelRepr {
            n_bits: l.n_bits(),
            components: l.components().to_vec(),
        }
    }
}

pub(crate) fn check_shape(n_bits: u32, dims: usize) -> Result<()> {
    if n_bits == 0 || n_bits > MAX_BITS {
        return Err(Error::param(alloc::format!(
            "bits per component must be in 1..={MAX_BITS}, got {n_bits}"
        )));
    }
    if dims == 0 || dims > MAX_DIMS {
        return Err(Error::param(alloc::format!(
            "dimensions must be in 1..={MAX_DIMS}, got {dims}"
        )));
    }
    Ok(())
}

impl PhaseLabel {
    pub fn new(n_bits: u32, components: &[u32]) -> Result<Self> {
        check_shape(n_bits, components.len())?;
        let m = mask(n_bits);
        if let Some(&c) = components.iter().find(|&&c| c & !m != 0) {
            return Err(Error::param(alloc::format!(
                "component {c} does not fit in {n_bits} bits"
            )));
        }
        let mut comps = [0; MAX_DIMS];
        comps[..components.len()].copy_from_slice(components);
        Ok(PhaseLabel {
            n_bits: n_bits as u8,
            dims: components.len() as u8,
            comps,
        })
    }

    pub fn zero(n_bits: u32, dims: usize) -> Result<Self> {
        check_shape(n_bits, dims)?;
        Ok(PhaseLabel {
            n_bits: n_bits as u8,
            dims: dims as u8,
            comps: [0; MAX_DIMS],
        })
    }

    /// Uniform label; one `next_u32` per component.
    pub fn random<R: RngCore + ?Sized>(n_bits: u32, dims: usize, rng: &mut R) -> Result<Self> {
        let mut l = PhaseLabel::zero(n_bits, dims)?;
        let m = mask(n_bits);
        for c in &mut l.comps[..dims] {
            *c = rng.next_u32() & m;
        }
        Ok(l)
    }

    pub fn n_bits(&self) -> u32 {
        self.n_bits as u32
    }

    pub fn dims(&self) -> usize {
        self.dims as usize
    }

    pub fn components(&self) -> &[u32] {
        &self.comps[..self.dims as usize]
    }

    pub fn component(&self, i: usize) -> u32 {
        self.components()[i]
    }

    fn same_shape(&self, other: &PhaseLabel) -> Result<()> {
        if self.n_bits != other.n_bits || self.dims != other.dims {
            return Err(Error::Shape(alloc::format!(
                "labels over Z_2^{}^{} and Z_2^{}^{}",
                self.n_bits,
                self.dims,
                other.n_bits,
                other.dims
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &PhaseLabel) -> Result<PhaseLabel> {
        self.same_shape(other)?;
        Ok(self.zip(other, u32::wrapping_add))
    }

    pub fn sub(&self, other: &PhaseLabel) -> Result<PhaseLabel> {
        self.same_shape(other)?;
        Ok(self.zip(other, u32::wrapping_sub))
    }

    fn zip(&self, other: &PhaseLabel, op: fn(u32, u32) -> u32) -> PhaseLabel {
        let m = mask(self.n_bits());
        let mut out = *self;
        for i in 0..self.dims() {
            out.comps[i] = op(self.comps[i], other.comps[i]) & m;
        }
        out
    }

    /// `r . s mod 2^n`.
    pub fn dot(&self, s: &PhaseLabel) -> Result<u32> {
        self.same_shape(s)?;
        Ok(self.dot_unchecked(s))
    }

    pub(crate) fn dot_unchecked(&self, s: &PhaseLabel) -> u32 {
        let mut acc = 0u32;
        for i in 0..self.dims() {
            acc = acc.wrapping_add(self.comps[i].wrapping_mul(s.comps[i]));
        }
        acc & mask(self.n_bits())
    }

    /// Every component is `0` or `2^{n-1}`.
    pub fn is_final(&self) -> bool {
        let low = mask(self.n_bits() - 1);
        self.components().iter().all(|&c| c & low == 0)
    }

    /// Whether bits `0..bits` are zero in every component.
    pub fn low_bits_zero(&self, bits: u32) -> bool {
        let low = mask(bits.min(self.n_bits()));
        bits == 0 || self.components().iter().all(|&c| c & low == 0)
    }

    /// Top bit of each component, as a bit mask (bit `i` for component `i`).
    pub fn top_bits(&self) -> u64 {
        let shift = self.n_bits() - 1;
        self.components()
            .iter()
            .enumerate()
            .fold(0, |acc, (i, &c)| acc | (((c >> shift) & 1) as u64) << i)
    }

    /// Lowest bit of each component, as a bit mask.
    pub fn low_bits(&self) -> u64 {
        self.components()
            .iter()
            .enumerate()
            .fold(0, |acc, (i, &c)| acc | ((c & 1) as u64) << i)
    }

    /// Components floor-divided by two, kept in the same ring.
    pub fn halved(&self) -> PhaseLabel {
        let mut out = *self;
        for c in &mut out.comps[..self.dims()] {
            *c >>= 1;
        }
        out
    }
}

/// A sieve element: label, phase exponent `e` of `w^e = e^{2 pi i e / 2^n}`,
/// and the poison flag of the noise model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PhaseState {
    label: PhaseLabel,
    phase: u32,
    poisoned: bool,
}

impl PhaseState {
    pub fn clean(label: PhaseLabel, phase: u32) -> Self {
        PhaseState {
            label,
            phase: phase & mask(label.n_bits()),
            poisoned: false,
        }
    }

    pub fn poisoned(label: PhaseLabel) -> Self {
        PhaseState {
            label,
            phase: 0,
            poisoned: true,
        }
    }

    pub fn label(&self) -> &PhaseLabel {
        &self.label
    }

    pub fn phase(&self) -> u32 {
        self.phase
    }

    pub fn is_poisoned(&self) -> bool {
        self.poisoned
    }
}

/// Combination with a given outcome: success yields `a - b`, failure `a + b`.
pub fn combine_with(a: &PhaseState, b: &PhaseState, success: bool) -> Result<PhaseState> {
    let m = mask(a.label.n_bits());
    let (label, phase) = if success {
        (a.label.sub(&b.label)?, a.phase.wrapping_sub(b.phase) & m)
    } else {
        (a.label.add(&b.label)?, a.phase.wrapping_add(b.phase) & m)
    };
    Ok(PhaseState {
        label,
        phase,
        poisoned: a.poisoned || b.poisoned,
    })
}

/// Parity measurement of a pair: success with probability exactly 1/2.
pub fn combine<R: RngCore + ?Sized>(a: &PhaseState, b: &PhaseState, rng: &mut R) -> Result<(PhaseState, bool)> {
    let success = rng.next_u32() & 1 == 1;
    combine_with(a, b, success).map(|s| (s, success))
}

/// `beta . s' mod 2` for a known `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParitySample {
    /// Bit `i` is the top bit of component `i` of the final label.
    pub beta: u64,
    pub parity: bool,
}

/// Hadamard measurement of a final state. A clean state with phase
/// exponent `e` reads 1 with probability `sin^2(pi e / 2^n)`, which is
/// deterministic for the phases `0` and `2^{n-1}` an exact instance produces.
/// A poisoned state reads a fair coin.
pub fn measure_final<R: RngCore + ?Sized>(state: &PhaseState, rng: &mut R) -> Result<ParitySample> {
    if !state.label.is_final() {
        return Err(Error::NotFinal);
    }
    let beta = state.label.top_bits();
    let n = state.label.n_bits();
    let parity = if state.poisoned {
        rng.next_u32() & 1 == 1
    } else if state.phase == 0 {
        false
    } else if state.phase == 1 << (n - 1) {
        true
    } else {
        let s = libm::sin(PI * state.phase as f64 / libm::ldexp(1.0, n as i32));
        rng.random::<f64>() < s * s
    };
    Ok(ParitySample { beta, parity })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedTree;

    fn l(n: u32, c: &[u32]) -> PhaseLabel {
        PhaseLabel::new(n, c).unwrap()
    }

    #[test]
    fn modular_combination() {
        let a = PhaseState::clean(l(3, &[5]), 0);
        let b = PhaseState::clean(l(3, &[3]), 0);
        assert_eq!(combine_with(&a, &b, true).unwrap().label().components(), &[2]);
        assert_eq!(combine_with(&a, &b, false).unwrap().label().components(), &[0]);
    }

    #[test]
    fn self_cancellation() {
        let a = PhaseState::clean(l(6, &[17, 40]), 9);
        let c = combine_with(&a, &a, true).unwrap();
        assert_eq!(c.label(), &PhaseLabel::zero(6, 2).unwrap());
        assert_eq!(c.phase(), 0);
    }

    #[test]
    fn poison_propagates_on_both_branches() {
        let a = PhaseState::clean(l(4, &[1]), 0);
        let b = PhaseState::poisoned(l(4, &[7]));
        for s in [true, false] {
            assert!(combine_with(&a, &b, s).unwrap().is_poisoned());
            assert!(combine_with(&b, &a, s).unwrap().is_poisoned());
        }
    }

    #[test]
    fn shape_mismatch() {
        let a = PhaseState::clean(l(4, &[1]), 0);
        let b = PhaseState::clean(l(4, &[1, 2]), 0);
        let c = PhaseState::clean(l(5, &[1]), 0);
        assert!(matches!(combine_with(&a, &b, true), Err(Error::Shape(_))));
        assert!(matches!(combine_with(&a, &c, false), Err(Error::Shape(_))));
    }

    #[test]
    fn label_validation() {
        assert!(PhaseLabel::new(3, &[8]).is_err());
        assert!(PhaseLabel::new(0, &[0]).is_err());
        assert!(PhaseLabel::new(33, &[0]).is_err());
        assert!(PhaseLabel::new(4, &[0; 5]).is_err());
        assert!(PhaseLabel::new(32, &[u32::MAX]).is_ok());
    }

    #[test]
    fn final_form_and_bits() {
        let f = l(4, &[8, 0, 8]);
        assert!(f.is_final());
        assert_eq!(f.top_bits(), 0b101);
        assert!(!l(4, &[4]).is_final());
        assert!(l(1, &[1]).is_final());
        assert_eq!(l(4, &[5, 2]).low_bits(), 0b01);
        assert_eq!(l(4, &[5, 2]).halved().components(), &[2, 1]);
    }

    #[test]
    fn measurement_of_exact_final_states() {
        let mut rng = SeedTree::new(0).rng();
        let s = l(4, &[3]);
        // beta = 0: parity 0 for any s.
        let zero = PhaseLabel::zero(4, 1).unwrap();
        let st = PhaseState::clean(zero, zero.dot(&s).unwrap());
        assert_eq!(
            measure_final(&st, &mut rng).unwrap(),
            ParitySample { beta: 0, parity: false }
        );
        // beta = 1, s odd: parity 1.
        let top = l(4, &[8]);
        let st = PhaseState::clean(top, top.dot(&s).unwrap());
        assert_eq!(
            measure_final(&st, &mut rng).unwrap(),
            ParitySample { beta: 1, parity: true }
        );
        assert_eq!(
            measure_final(&PhaseState::clean(l(4, &[4]), 0), &mut rng),
            Err(Error::NotFinal)
        );
    }

    #[test]
    fn poisoned_measurement_is_a_fair_coin() {
        let mut rng = SeedTree::new(5).rng();
        let st = PhaseState::poisoned(l(4, &[8]));
        let ones = (0..10_000)
            .filter(|_| measure_final(&st, &mut rng).unwrap().parity)
            .count() as f64;
        // 3 sigma of Binomial(10^4, 1/2) is 150.
        assert!((ones - 5_000.0).abs() < 150.0, "{ones}");
    }

    #[test]
    fn off_grid_phase_is_biased_coin() {
        let mut rng = SeedTree::new(6).rng();
        // phase 4 of 16: sin^2(pi/4) = 1/2; phase 2: sin^2(pi/8) ~ 0.146.
        let st = PhaseState::clean(l(4, &[8]), 2);
        let ones = (0..20_000)
            .filter(|_| measure_final(&st, &mut rng).unwrap().parity)
            .count() as f64
            / 20_000.0;
        assert!((ones - 0.1464).abs() < 0.01, "{ones}");
    }
}
