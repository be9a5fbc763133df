use alloc::vec::Vec;
use core::fmt;

use hashbrown::HashMap;
use rand::{Rng, RngCore};

use super::label::check_shape;
use super::{mask, PhaseLabel, PhaseState};
use crate::error::{Error, Result};
use crate::grid::{flat_index, unflatten_into, volume, GridAccess, GridString};
use crate::ledger::{QueryLedger, Role};

/// Largest table (cells per function) the simulator will materialize.
pub const MAX_TABLE: usize = 1 << 26;

/// A value that algorithm code does not look at. Only the poison-model
/// measurement oracle and test tooling call [`Sealed::unseal`].
#[derive(Clone)]
pub struct Sealed<T>(T);

impl<T> Sealed<T> {
    pub fn new(value: T) -> Self {
        Sealed(value)
    }

    pub fn unseal(&self) -> &T {
        &self.0
    }
}

impl<T> fmt::Debug for Sealed<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Sealed(..)")
    }
}

/// Produces fresh sieve elements `|psi_r>` for uniformly random `r`.
pub trait StateSource {
    fn n_bits(&self) -> u32;
    fn dims(&self) -> usize;
    /// Prepare one state, charging its modeled quantum queries.
    fn prepare(&self, rng: &mut dyn RngCore, ledger: &mut QueryLedger) -> PhaseState;
}

/// Offsets of the half-domain functions at a recursion level:
/// `f_l(x) = f(2^l x + F)` and `g_l(x) = g(2^l x + G)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoundOffsets {
    level: u32,
    f_off: PhaseLabel,
    g_off: PhaseLabel,
}

impl RoundOffsets {
    pub fn initial(n_bits: u32, dims: usize) -> Result<Self> {
        let z = PhaseLabel::zero(n_bits, dims)?;
        Ok(RoundOffsets {
            level: 0,
            f_off: z,
            g_off: z,
        })
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// Bits per component of the functions at this level.
    pub fn round_bits(&self) -> u32 {
        self.f_off.n_bits() - self.level
    }

    pub fn f_offset(&self) -> &PhaseLabel {
        &self.f_off
    }

    pub fn g_offset(&self) -> &PhaseLabel {
        &self.g_off
    }

    /// Next level after learning low bits `beta`, with free offset bits `a`
    /// (bit `i` of each mask is component `i`): `f' (x) = f_l(2x + a)` and
    /// `g'(x) = g_l(2x + a - beta)`.
    pub fn descend(&self, a: u64, beta: u64) -> Result<RoundOffsets> {
        if self.round_bits() <= 1 {
            return Err(Error::param("no level below a one-bit domain"));
        }
        let n = self.f_off.n_bits();
        let d = self.f_off.dims();
        let mut fa = [0u32; super::MAX_DIMS];
        let mut ga = [0u32; super::MAX_DIMS];
        for i in 0..d {
            let ai = ((a >> i) & 1) as u32;
            let bi = ((beta >> i) & 1) as u32;
            fa[i] = (ai << self.level) & mask(n);
            ga[i] = ai.wrapping_sub(bi).wrapping_shl(self.level) & mask(n);
        }
        Ok(RoundOffsets {
            level: self.level + 1,
            f_off: self.f_off.add(&PhaseLabel::new(n, &fa[..d])?)?,
            g_off: self.g_off.add(&PhaseLabel::new(n, &ga[..d])?)?,
        })
    }

    // Base coordinate of round coordinate x for the given offset.
    fn map(&self, off: &PhaseLabel, x: &[usize], out: &mut [usize]) {
        let m = mask(off.n_bits());
        for (i, (&xi, o)) in x.iter().zip(out.iter_mut()).enumerate() {
            *o = (((xi as u32) << self.level).wrapping_add(off.component(i)) & m) as usize;
        }
    }
}

/// A hidden-shift problem that can be restricted to any recursion level.
pub trait ShiftProblem {
    type Source: StateSource;

    fn n_bits(&self) -> u32;
    fn dims(&self) -> usize;
    fn round_source(&self, offsets: &RoundOffsets, ledger: &mut QueryLedger) -> Result<Self::Source>;
}

/// Tabulated `f, g : Z_{2^n}^d -> X`.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenShiftInstance {
    n_bits: u32,
    f: GridString,
    g: GridString,
    noise: f64,
    shift: Option<Sealed<PhaseLabel>>,
    corrupted: Sealed<Vec<usize>>,
}

impl<T: PartialEq> PartialEq for Sealed<T> {
    fn eq(&self, other: &Self) -> bool {
        self.0 == other.0
    }
}

impl HiddenShiftInstance {
    /// Both tables must be injective grids of side `2^n` over the same
    /// alphabet and dimension.
    pub fn new(n_bits: u32, f: GridString, g: GridString, noise: f64) -> Result<Self> {
        check_shape(n_bits, f.dims())?;
        if f.dims() != g.dims() || f.alphabet() != g.alphabet() {
            return Err(Error::Shape("f and g differ in dimension or alphabet".into()));
        }
        let side = 1usize
            .checked_shl(n_bits)
            .filter(|&s| volume(f.dims(), s).is_some_and(|v| v <= MAX_TABLE))
            .ok_or_else(|| Error::Size(alloc::format!("2^({n_bits}*{}) cells per table", f.dims())))?;
        if f.side() != side || g.side() != side {
            return Err(Error::Shape(alloc::format!(
                "tables must have side 2^{n_bits} = {side}"
            )));
        }
        if !(0.0..1.0).contains(&noise) {
            return Err(Error::param(alloc::format!(
                "noise fraction must be in [0, 1), got {noise}"
            )));
        }
        if !f.is_injective() || !g.is_injective() {
            return Err(Error::Contract("f and g must be injective".into()));
        }
        Ok(HiddenShiftInstance {
            n_bits,
            f,
            g,
            noise,
            shift: None,
            corrupted: Sealed::new(Vec::new()),
        })
    }

    pub fn with_sealed_shift(mut self, shift: PhaseLabel) -> Result<Self> {
        if shift.n_bits() != self.n_bits || shift.dims() != self.dims() {
            return Err(Error::Shape("shift does not match the instance".into()));
        }
        self.shift = Some(Sealed::new(shift));
        Ok(self)
    }

    pub fn with_corrupted(mut self, noise: f64, mut positions: Vec<usize>) -> Result<Self> {
        if !(0.0..1.0).contains(&noise) {
            return Err(Error::param(alloc::format!(
                "noise fraction must be in [0, 1), got {noise}"
            )));
        }
        positions.sort_unstable();
        self.noise = noise;
        self.corrupted = Sealed::new(positions);
        Ok(self)
    }

    pub fn n_bits(&self) -> u32 {
        self.n_bits
    }

    pub fn dims(&self) -> usize {
        self.f.dims()
    }

    pub fn f(&self) -> &GridString {
        &self.f
    }

    pub fn g(&self) -> &GridString {
        &self.g
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    pub fn sealed_shift(&self) -> Option<&Sealed<PhaseLabel>> {
        self.shift.as_ref()
    }

    /// Flat indices of `g` rewritten by noise injection, sorted.
    pub fn corrupted(&self) -> &Sealed<Vec<usize>> {
        &self.corrupted
    }

    /// View for the worst-case noise model.
    pub fn poison_model(&self) -> PoisonModel<'_> {
        PoisonModel { inst: self }
    }

    /// Materialized tables for exact state preparation.
    pub fn tables(&self) -> ShiftTables {
        ShiftTables {
            n_bits: self.n_bits,
            dims: self.dims(),
            f: self.f.to_vec(),
            g: self.g.to_vec(),
            weight: 1,
        }
    }
}

/// The instance under the worst-case noise model: every state is a clean
/// `|psi_r>` for the sealed shift, independently poisoned with probability
/// `min(1, 2 eps)`.
#[derive(Debug, Clone, Copy)]
pub struct PoisonModel<'a> {
    inst: &'a HiddenShiftInstance,
}

impl ShiftProblem for PoisonModel<'_> {
    type Source = PoisonSource;

    fn n_bits(&self) -> u32 {
        self.inst.n_bits
    }

    fn dims(&self) -> usize {
        self.inst.dims()
    }

    fn round_source(&self, offsets: &RoundOffsets, _ledger: &mut QueryLedger) -> Result<PoisonSource> {
        let s = self
            .inst
            .shift
            .as_ref()
            .ok_or_else(|| Error::param("the poison model needs an instance with a sealed shift"))?
            .unseal();
        // g_l(x) = f(2^l x + G + s) equals f_l(x + u) iff 2^l u = G + s - F.
        let diff = offsets.g_off.add(s)?.sub(&offsets.f_off)?;
        let bits = offsets.round_bits();
        let shift = if diff.low_bits_zero(offsets.level) {
            let comps: Vec<u32> = diff.components().iter().map(|&c| c >> offsets.level).collect();
            Some(PhaseLabel::new(bits, &comps)?)
        } else {
            None
        };
        Ok(PoisonSource {
            n_bits: bits,
            dims: self.inst.dims(),
            shift,
            poison: (2.0 * self.inst.noise).min(1.0),
            weight: 1,
        })
    }
}

/// States for a known effective shift. `shift = None` means the round's
/// functions are not shifts of each other; every state is then poisoned.
#[derive(Debug, Clone)]
pub struct PoisonSource {
    n_bits: u32,
    dims: usize,
    shift: Option<PhaseLabel>,
    poison: f64,
    weight: u64,
}

impl PoisonSource {
    pub fn new(shift: PhaseLabel, poison: f64) -> Self {
        PoisonSource {
            n_bits: shift.n_bits(),
            dims: shift.dims(),
            shift: Some(shift),
            poison: poison.clamp(0.0, 1.0),
            weight: 1,
        }
    }

    pub fn poison_probability(&self) -> f64 {
        self.poison
    }
}

impl StateSource for PoisonSource {
    fn n_bits(&self) -> u32 {
        self.n_bits
    }

    fn dims(&self) -> usize {
        self.dims
    }

    fn prepare(&self, rng: &mut dyn RngCore, ledger: &mut QueryLedger) -> PhaseState {
        ledger.charge_quantum(2 * self.weight);
        let r = PhaseLabel::random(self.n_bits, self.dims, rng).expect("shape checked");
        match &self.shift {
            Some(s) if !(self.poison > 0.0 && rng.random::<f64>() < self.poison) => {
                PhaseState::clean(r, r.dot_unchecked(s))
            }
            _ => PhaseState::poisoned(r),
        }
    }
}

/// `prepare_state` on the instance itself (recursion level 0).
pub fn prepare_state(
    inst: &HiddenShiftInstance,
    rng: &mut dyn RngCore,
    ledger: &mut QueryLedger,
) -> Result<PhaseState> {
    let src = inst
        .poison_model()
        .round_source(&RoundOffsets::initial(inst.n_bits, inst.dims())?, ledger)?;
    Ok(src.prepare(rng, ledger))
}

/// Function tables over `Z_{2^n}^d` with values interned as integers.
/// `weight` is the number of base-string queries one evaluation stands for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShiftTables {
    n_bits: u32,
    dims: usize,
    f: Vec<u32>,
    g: Vec<u32>,
    weight: u64,
}

impl ShiftTables {
    /// Read every position of two views of side `2^n`, interning values so
    /// that equal symbols of `f` and `g` get equal ids. Reads are charged
    /// through the views.
    pub fn from_views<A, B>(f: &A, g: &B, ledger: &mut QueryLedger) -> Result<Self>
    where
        A: GridAccess,
        B: GridAccess<Symbol = A::Symbol>,
    {
        let dims = f.dims();
        let side = f.side();
        if g.dims() != dims || g.side() != side || !side.is_power_of_two() {
            return Err(Error::Shape(
                "views must share a power-of-two side and dimension".into(),
            ));
        }
        let n_bits = side.trailing_zeros();
        if n_bits == 0 {
            return Err(Error::param("views need side at least 2"));
        }
        check_shape(n_bits, dims)?;
        let len = volume(dims, side)
            .filter(|&v| v <= MAX_TABLE)
            .ok_or_else(|| Error::Size("view too large".into()))?;
        let mut ids: HashMap<A::Symbol, u32> = HashMap::new();
        let ft = intern_all(f, len, &mut ids, ledger)?;
        let gt = intern_all(g, len, &mut ids, ledger)?;
        Ok(ShiftTables {
            n_bits,
            dims,
            f: ft,
            g: gt,
            weight: f.read_cost().max(g.read_cost()),
        })
    }

    pub fn n_bits(&self) -> u32 {
        self.n_bits
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn weight(&self) -> u64 {
        self.weight
    }

    pub fn f(&self) -> &[u32] {
        &self.f
    }

    pub fn g(&self) -> &[u32] {
        &self.g
    }
}

fn intern_all<V: GridAccess>(
    v: &V,
    len: usize,
    ids: &mut HashMap<V::Symbol, u32>,
    ledger: &mut QueryLedger,
) -> Result<Vec<u32>> {
    let mut x = alloc::vec![0usize; v.dims()];
    let mut out = Vec::with_capacity(len);
    for i in 0..len {
        unflatten_into(v.side(), i, &mut x);
        let sym = v.read(&x, ledger)?;
        let next = ids.len() as u32;
        out.push(*ids.entry(sym).or_insert(next));
    }
    Ok(out)
}

impl ShiftProblem for ShiftTables {
    type Source = ExactSource;

    fn n_bits(&self) -> u32 {
        self.n_bits
    }

    fn dims(&self) -> usize {
        self.dims
    }

    fn round_source(&self, offsets: &RoundOffsets, ledger: &mut QueryLedger) -> Result<ExactSource> {
        if offsets.f_off.n_bits() != self.n_bits || offsets.f_off.dims() != self.dims {
            return Err(Error::Shape("offsets do not match the tables".into()));
        }
        let bits = offsets.round_bits();
        let side = 1usize << bits;
        let base_side = 1usize << self.n_bits;
        let len = volume(self.dims, side).expect("within table size");
        let mut x = alloc::vec![0usize; self.dims];
        let mut y = alloc::vec![0usize; self.dims];
        let mut f = Vec::with_capacity(len);
        let mut g = Vec::with_capacity(len);
        for i in 0..len {
            unflatten_into(side, i, &mut x);
            offsets.map(&offsets.f_off, &x, &mut y);
            f.push(self.f[flat_index(base_side, &y).expect("in range")]);
            offsets.map(&offsets.g_off, &x, &mut y);
            g.push(self.g[flat_index(base_side, &y).expect("in range")]);
        }
        ledger.charge_reads(Role::Internal, 2 * len as u64);
        Ok(ExactSource::new(bits, self.dims, f, g, self.weight))
    }
}

const AMBIGUOUS: u32 = u32::MAX;

fn inverse(table: &[u32]) -> HashMap<u32, u32> {
    let mut inv = HashMap::with_capacity(table.len());
    for (i, &z) in table.iter().enumerate() {
        inv.entry(z).and_modify(|v| *v = AMBIGUOUS).or_insert(i as u32);
    }
    inv
}

/// Exact preparation: sample `(x, c)`, observe `z = f(x)` or `g(x)`, and
/// keep `(|0>|f^-1 z> + |1>|g^-1 z>)/sqrt 2`. When both preimages exist the
/// state is `|psi_r>` with phase `r . (f^-1 z - g^-1 z)`, which is `r . s`
/// wherever `g(x) = f(x + s)`. When one is missing (or not unique) the
/// qubit is a basis state, tracked as poisoned.
#[derive(Debug, Clone)]
pub struct ExactSource {
    n_bits: u32,
    dims: usize,
    f: Vec<u32>,
    g: Vec<u32>,
    f_inv: HashMap<u32, u32>,
    g_inv: HashMap<u32, u32>,
    weight: u64,
}

impl ExactSource {
    fn new(n_bits: u32, dims: usize, f: Vec<u32>, g: Vec<u32>, weight: u64) -> Self {
        let f_inv = inverse(&f);
        let g_inv = inverse(&g);
        ExactSource {
            n_bits,
            dims,
            f,
            g,
            f_inv,
            g_inv,
            weight,
        }
    }

    fn preimage(inv: &HashMap<u32, u32>, z: u32) -> Option<u32> {
        inv.get(&z).copied().filter(|&i| i != AMBIGUOUS)
    }
}

impl StateSource for ExactSource {
    fn n_bits(&self) -> u32 {
        self.n_bits
    }

    fn dims(&self) -> usize {
        self.dims
    }

    fn prepare(&self, rng: &mut dyn RngCore, ledger: &mut QueryLedger) -> PhaseState {
        ledger.charge_quantum(2 * self.weight);
        let x = rng.random_range(0..self.f.len());
        let z = if rng.next_u32() & 1 == 1 { self.g[x] } else { self.f[x] };
        let r = PhaseLabel::random(self.n_bits, self.dims, rng).expect("shape checked");
        match (Self::preimage(&self.f_inv, z), Self::preimage(&self.g_inv, z)) {
            (Some(a), Some(b)) => {
                let side = 1usize << self.n_bits;
                let mut ua = [0usize; super::MAX_DIMS];
                let mut ub = [0usize; super::MAX_DIMS];
                unflatten_into(side, a as usize, &mut ua[..self.dims]);
                unflatten_into(side, b as usize, &mut ub[..self.dims]);
                let mut phase = 0u32;
                for i in 0..self.dims {
                    let diff = (ua[i] as u32).wrapping_sub(ub[i] as u32);
                    phase = phase.wrapping_add(r.component(i).wrapping_mul(diff));
                }
                PhaseState::clean(r, phase)
            }
            _ => PhaseState::poisoned(r),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedTree;
    use alloc::vec;

    // f(x) = 3x + 1 mod 8 over Z_8, g(x) = f(x + 5).
    fn tiny() -> HiddenShiftInstance {
        let f = GridString::from_fn(1, 8, 8, |x| ((3 * x[0] + 1) % 8) as u32).unwrap();
        let g = GridString::from_fn(1, 8, 8, |x| ((3 * (x[0] + 5) + 1) % 8) as u32).unwrap();
        HiddenShiftInstance::new(3, f, g, 0.0)
            .unwrap()
            .with_sealed_shift(PhaseLabel::new(3, &[5]).unwrap())
            .unwrap()
    }

    #[test]
    fn exact_preparation_reproduces_the_shift_phase() {
        let inst = tiny();
        let tables = inst.tables();
        let mut l = QueryLedger::new();
        let src = tables
            .round_source(&RoundOffsets::initial(3, 1).unwrap(), &mut l)
            .unwrap();
        let s = PhaseLabel::new(3, &[5]).unwrap();
        let mut rng = SeedTree::new(1).rng();
        for _ in 0..200 {
            let st = src.prepare(&mut rng, &mut l);
            assert!(!st.is_poisoned());
            assert_eq!(st.phase(), st.label().dot(&s).unwrap());
        }
        assert_eq!(l.quantum_cost(), 400);
    }

    #[test]
    fn exact_zero_noise_never_poisons() {
        let inst = tiny();
        let mut rng = SeedTree::new(2).rng();
        let mut l = QueryLedger::new();
        for _ in 0..100 {
            assert!(!prepare_state(&inst, &mut rng, &mut l).unwrap().is_poisoned());
        }
        assert_eq!(l.quantum_cost(), 200);
    }

    #[test]
    fn descending_tracks_the_halved_shift() {
        let inst = tiny();
        let model = inst.poison_model();
        let mut l = QueryLedger::new();
        let o0 = RoundOffsets::initial(3, 1).unwrap();
        // Correct low bit of 5 is 1; next effective shift is 2.
        let o1 = o0.descend(0, 1).unwrap();
        let src = model.round_source(&o1, &mut l).unwrap();
        assert_eq!(src.shift.unwrap().components(), &[2]);
        assert_eq!(src.n_bits, 2);
        // Exact tables at the same level agree with the poison model.
        let ex = inst.tables().round_source(&o1, &mut l).unwrap();
        let mut rng = SeedTree::new(3).rng();
        for _ in 0..50 {
            let st = ex.prepare(&mut rng, &mut l);
            assert_eq!(st.phase(), st.label().dot(&PhaseLabel::new(2, &[2]).unwrap()).unwrap());
        }
        // A wrong bit leaves no shift relation at the next level.
        let bad = o0.descend(1, 0).unwrap();
        assert!(model.round_source(&bad, &mut l).unwrap().shift.is_none());
        let ex = inst.tables().round_source(&bad, &mut l).unwrap();
        assert!((0..50).all(|_| ex.prepare(&mut rng, &mut l).is_poisoned()));
    }

    #[test]
    fn instance_validation() {
        let f = GridString::from_fn(1, 8, 8, |x| x[0] as u32).unwrap();
        let dup = GridString::constant(1, 8, 8, 0).unwrap();
        assert!(matches!(
            HiddenShiftInstance::new(3, f.clone(), dup, 0.0),
            Err(Error::Contract(_))
        ));
        assert!(HiddenShiftInstance::new(2, f.clone(), f.clone(), 0.0).is_err());
        assert!(HiddenShiftInstance::new(3, f.clone(), f.clone(), 1.0).is_err());
        let inst = HiddenShiftInstance::new(3, f.clone(), f, 0.0).unwrap();
        assert!(inst.with_sealed_shift(PhaseLabel::new(2, &[1]).unwrap()).is_err());
    }

    #[test]
    fn views_are_interned_jointly() {
        let a = GridString::new(1, 4, 9, vec![3, 7, 1, 8]).unwrap();
        let b = GridString::new(1, 4, 9, vec![1, 8, 3, 7]).unwrap();
        let mut l = QueryLedger::new();
        let t = ShiftTables::from_views(&a.metered(Role::Text), &b.metered(Role::Pattern), &mut l).unwrap();
        assert_eq!(t.f(), &[0, 1, 2, 3]);
        assert_eq!(t.g(), &[2, 3, 0, 1]);
        assert_eq!(l.text_queries(), 4);
        assert_eq!(l.pattern_queries(), 4);
        assert_eq!(t.weight(), 1);
    }

    #[test]
    fn sealed_values_do_not_print() {
        let s = Sealed::new(42);
        assert_eq!(alloc::format!("{s:?}"), "Sealed(..)");
        assert_eq!(*s.unseal(), 42);
    }
}
