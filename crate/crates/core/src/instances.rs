//! Seeded generators for the input families: random texts with or without
//! a planted pattern, the identity-pattern adversary, permutation pairs,
//! block re-encoding, and hidden-shift instances with optional noise.
//!
//! Every generator is a pure function of its arguments and seed.

use alloc::vec::Vec;

use hashbrown::HashSet;
use libm::{ceil, log, pow};
use rand::seq::{index, SliceRandom};
use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::{flat_index, is_block_injective, next_coord, unflatten_into, volume, GridString};
use crate::rng::SeedTree;
use crate::sieve::{HiddenShiftInstance, PhaseLabel, Sealed, MAX_TABLE};
use crate::stats::{wilson, Proportion, Z95};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum GenMode {
    /// Random text, pattern copied from a random offset.
    RandomPlanted,
    /// Random text and independent random pattern.
    RandomUnplanted,
    /// Identity pattern against displaced copies; `clean` leaves one block
    /// untouched.
    Adversarial { gamma: f64, clean: bool },
    /// Permutation text, pattern drawn from the alphabet without replacement.
    PermutationD0,
    /// Permutation text, pattern cut from the text.
    PermutationD1,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GenSpec {
    pub n: usize,
    pub m: usize,
    pub d: usize,
    /// Alphabet size for the random modes; the other modes fix their own.
    pub q: u32,
    pub seed: u64,
    pub mode: GenMode,
}

impl GenSpec {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.m == 0 || self.m > self.n {
            return Err(Error::param(alloc::format!(
                "need d >= 1 and 1 <= m <= n, got d={} m={} n={}",
                self.d,
                self.m,
                self.n
            )));
        }
        if self.q < 2 {
            return Err(Error::param(alloc::format!(
                "alphabet size must be at least 2, got {}",
                self.q
            )));
        }
        volume(self.d, self.n)
            .filter(|&v| v <= MAX_TABLE)
            .ok_or_else(|| Error::Size(alloc::format!("{}^{} cells", self.n, self.d)))?;
        Ok(())
    }
}

/// A text, a pattern and the offset the generator planted, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternInstance {
    pub text: GridString,
    pub pattern: GridString,
    pub planted: Sealed<Option<Vec<usize>>>,
}

pub fn generate(spec: &GenSpec) -> Result<PatternInstance> {
    spec.validate()?;
    match spec.mode {
        GenMode::RandomPlanted | GenMode::RandomUnplanted => gen_random(spec),
        GenMode::Adversarial { gamma, clean } => gen_adversarial(spec.n, spec.m, spec.d, gamma, clean, spec.seed),
        GenMode::PermutationD0 => gen_permutation_pair(spec.n, spec.m, spec.d, false, spec.seed),
        GenMode::PermutationD1 => gen_permutation_pair(spec.n, spec.m, spec.d, true, spec.seed),
    }
}

fn uniform_grid(d: usize, side: usize, q: u32, seed: &SeedTree) -> Result<GridString> {
    let mut rng = seed.rng();
    GridString::from_fn(d, side, q, |_| rng.random_range(0..q))
}

fn random_offset(d: usize, span: usize, seed: &SeedTree) -> Vec<usize> {
    let mut rng = seed.rng();
    (0..d).map(|_| rng.random_range(0..span)).collect()
}

/// Uniform text; the pattern is either copied from a uniform offset of the
/// text (planted) or drawn independently.
pub fn gen_random(spec: &GenSpec) -> Result<PatternInstance> {
    spec.validate()?;
    let root = SeedTree::new(spec.seed);
    let text = uniform_grid(spec.d, spec.n, spec.q, &root.child(0))?;
    let (pattern, planted) = match spec.mode {
        GenMode::RandomPlanted => {
            let at = random_offset(spec.d, spec.n - spec.m + 1, &root.child(1));
            (text.subgrid(&at, spec.m)?, Some(at))
        }
        GenMode::RandomUnplanted => (uniform_grid(spec.d, spec.m, spec.q, &root.child(1))?, None),
        _ => return Err(Error::param("gen_random needs a random mode")),
    };
    Ok(PatternInstance {
        text,
        pattern,
        planted: Sealed::new(planted),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TailReport {
    /// `ceil((3 d log_q n)^{1/d})`.
    pub k: usize,
    /// Trials with injectivity length at least `k`.
    pub frequency: Proportion,
    /// `1 / n^d`.
    pub bound: f64,
    /// `n^{2d} q^{-k^d}`, the union bound at `k`.
    pub union_bound: f64,
    /// Trials where the string itself was injective.
    pub injective: u64,
}

/// How often a uniform string needs blocks of side at least `k` to become
/// injective. Trial `i` uses `seed.child(i)`.
pub fn injectivity_tail_experiment(n: usize, d: usize, q: u32, trials: u64, seed: u64) -> Result<TailReport> {
    if trials == 0 || n == 0 || d == 0 || q < 2 {
        return Err(Error::param("tail experiment needs trials, n, d >= 1 and q >= 2"));
    }
    let (nf, df, qf) = (n as f64, d as f64, q as f64);
    // The slack keeps exact powers such as log_2 64 = 6 from rounding up.
    let k = (ceil(pow(3.0 * df * log(nf) / log(qf), 1.0 / df) - 1e-9) as usize).max(1);
    let root = SeedTree::new(seed);
    let mut hits = 0;
    let mut injective = 0;
    for i in 0..trials {
        let s = uniform_grid(d, n, q, &root.child(i))?;
        injective += s.is_injective() as u64;
        // υ(S) >= k iff blocks of side k - 1 still collide.
        if k == 1 || k - 1 > n || !is_block_injective(&s, k - 1) {
            hits += 1;
        }
    }
    Ok(TailReport {
        k,
        frequency: wilson(hits, trials, Z95),
        bound: 1.0 / pow(nf, df),
        union_bound: pow(nf, 2.0 * df) * pow(qf, -pow(k as f64, df)),
        injective,
    })
}

fn encode(x: &[usize], base: usize) -> u32 {
    x.iter().fold(0usize, |acc, &c| acc * base + c) as u32
}

/// Identity pattern `P(x) = x` over the alphabet `[2m]^d`, and a text of
/// `(n/m)^d` copies of it. Every copy except, with `clean`, one uniformly
/// chosen block has exactly `gamma m^d` cells displaced by `m` in every
/// coordinate, chosen uniformly without replacement. `planted` is the
/// corner of the clean block.
pub fn gen_adversarial(n: usize, m: usize, d: usize, gamma: f64, clean: bool, seed: u64) -> Result<PatternInstance> {
    if d == 0 || m == 0 || !n.is_multiple_of(m) {
        return Err(Error::param(alloc::format!(
            "n = {n} must be a positive multiple of m = {m}"
        )));
    }
    let cells = volume(d, m).ok_or_else(|| Error::Size("m^d overflows".into()))?;
    let raw = gamma * cells as f64;
    let displaced = libm::round(raw) as usize;
    if !(gamma > 0.0 && gamma <= 1.0) || (raw - displaced as f64).abs() > 1e-9 || displaced == 0 {
        return Err(Error::param(alloc::format!(
            "gamma m^d = {raw} must be a positive integer"
        )));
    }
    let alphabet = volume(d, 2 * m)
        .filter(|&a| a <= u32::MAX as usize)
        .ok_or_else(|| Error::Size("alphabet (2m)^d exceeds 32 bits".into()))?;
    volume(d, n)
        .filter(|&v| v <= MAX_TABLE)
        .ok_or_else(|| Error::Size(alloc::format!("{n}^{d} cells")))?;
    let pattern = GridString::from_fn(d, m, alphabet as u32, |x| encode(x, 2 * m))?;
    let p = n / m;
    let blocks = volume(d, p).expect("fits below n^d");
    let root = SeedTree::new(seed);
    let clean_block = clean.then(|| root.child(0).rng().random_range(0..blocks));

    let mut symbols = alloc::vec![0u32; volume(d, n).expect("checked")];
    let mut b = alloc::vec![0usize; d];
    let mut x = alloc::vec![0usize; d];
    let mut y = alloc::vec![0usize; d];
    let mut shifted = alloc::vec![0usize; d];
    for bi in 0..blocks {
        unflatten_into(p, bi, &mut b);
        let hit: HashSet<usize> = if Some(bi) == clean_block {
            HashSet::new()
        } else {
            index::sample(&mut root.child(bi as u64 + 1).rng(), cells, displaced)
                .into_iter()
                .collect()
        };
        x.iter_mut().for_each(|c| *c = 0);
        for xi in 0..cells {
            if xi > 0 {
                next_coord(&mut x, m);
            }
            for k in 0..d {
                y[k] = b[k] * m + x[k];
                shifted[k] = x[k] + if hit.contains(&xi) { m } else { 0 };
            }
            symbols[flat_index(n, &y).expect("inside the text")] = encode(&shifted, 2 * m);
        }
    }
    let text = GridString::new(d, n, alphabet as u32, symbols)?;
    let planted = clean_block.map(|bi| {
        unflatten_into(p, bi, &mut b);
        b.iter().map(|&c| c * m).collect()
    });
    Ok(PatternInstance {
        text,
        pattern,
        planted: Sealed::new(planted),
    })
}

/// Text: a uniform permutation of `[n^d]`. Pattern: a uniform `m`-block of
/// the text (`same_source`), or `m^d` distinct symbols in uniform order.
pub fn gen_permutation_pair(n: usize, m: usize, d: usize, same_source: bool, seed: u64) -> Result<PatternInstance> {
    if d == 0 || m == 0 || m > n {
        return Err(Error::param(alloc::format!("need 1 <= m <= n, got m={m} n={n}")));
    }
    let len = volume(d, n)
        .filter(|&v| v <= MAX_TABLE && v <= u32::MAX as usize)
        .ok_or_else(|| Error::Size(alloc::format!("{n}^{d} cells")))?;
    let root = SeedTree::new(seed);
    let mut perm: Vec<u32> = (0..len as u32).collect();
    perm.shuffle(&mut root.child(0).rng());
    let text = GridString::new(d, n, len as u32, perm)?;
    let (pattern, planted) = if same_source {
        let at = random_offset(d, n - m + 1, &root.child(1));
        (text.subgrid(&at, m)?, Some(at))
    } else {
        let cells = volume(d, m).expect("m <= n");
        let mut rng = root.child(1).rng();
        let mut vals: Vec<u32> = index::sample(&mut rng, len, cells)
            .into_iter()
            .map(|v| v as u32)
            .collect();
        vals.shuffle(&mut rng);
        (GridString::new(d, m, len as u32, vals)?, None)
    };
    Ok(PatternInstance {
        text,
        pattern,
        planted: Sealed::new(planted),
    })
}

/// Re-encode every `b`-block as one symbol in base `q`, the first cell in
/// row-major order most significant. Block-aligned matches carry over:
/// the blocked pattern matches at `s` iff the original matches at `b s`.
pub fn megacharacter_blocking(text: &GridString, pattern: &GridString, b: usize) -> Result<(GridString, GridString)> {
    if text.dims() != pattern.dims() || text.alphabet() != pattern.alphabet() {
        return Err(Error::Shape("text and pattern differ in dimension or alphabet".into()));
    }
    if b == 0 || !text.side().is_multiple_of(b) || !pattern.side().is_multiple_of(b) {
        return Err(Error::param(alloc::format!(
            "block {b} must divide both sides {} and {}",
            text.side(),
            pattern.side()
        )));
    }
    let cells = volume(text.dims(), b).ok_or_else(|| Error::Size("b^d overflows".into()))?;
    let q = text.alphabet() as u64;
    let alphabet = u32::try_from(cells)
        .ok()
        .and_then(|c| q.checked_pow(c))
        .filter(|&a| a <= u32::MAX as u64)
        .ok_or_else(|| Error::Size(alloc::format!("alphabet {q}^{cells} exceeds 32 bits")))?;
    Ok((
        block_grid(text, b, alphabet as u32)?,
        block_grid(pattern, b, alphabet as u32)?,
    ))
}

fn block_grid(g: &GridString, b: usize, alphabet: u32) -> Result<GridString> {
    let d = g.dims();
    let q = g.alphabet() as u64;
    let mut z = alloc::vec![0usize; d];
    let mut y = alloc::vec![0usize; d];
    GridString::from_fn(d, g.side() / b, alphabet, |s| {
        z.iter_mut().for_each(|c| *c = 0);
        let mut code = 0u64;
        loop {
            for k in 0..d {
                y[k] = s[k] * b + z[k];
            }
            code = code * q + g.at(flat_index(g.side(), &y).expect("inside the grid")) as u64;
            if !next_coord(&mut z, b) {
                break;
            }
        }
        code as u32
    })
}

/// Exact hidden-shift instance: `f` is injective with values drawn without
/// replacement from `[q]`, `s` is uniform and `g(x) = f(x + s)`. `q = None`
/// uses `2 * 2^{nd}`.
pub fn gen_shift_instance(n_bits: u32, d: usize, q: Option<u32>, seed: u64) -> Result<HiddenShiftInstance> {
    crate::sieve::PhaseLabel::zero(n_bits, d)?;
    let side = 1usize << n_bits;
    let len = volume(d, side)
        .filter(|&v| v <= MAX_TABLE)
        .ok_or_else(|| Error::Size(alloc::format!("2^({n_bits}*{d}) cells")))?;
    let q = match q {
        Some(q) => q,
        None => u32::try_from(2 * len).map_err(|_| Error::Size("default alphabet exceeds 32 bits".into()))?,
    };
    if (q as usize) < len {
        return Err(Error::param(alloc::format!(
            "alphabet {q} cannot hold {len} distinct values"
        )));
    }
    let root = SeedTree::new(seed);
    let f: Vec<u32> = index::sample(&mut root.child(0).rng(), q as usize, len)
        .into_iter()
        .map(|v| v as u32)
        .collect();
    let s = PhaseLabel::random(n_bits, d, &mut root.child(1).rng())?;
    let mask = side - 1;
    let mut x = alloc::vec![0usize; d];
    let mut y = alloc::vec![0usize; d];
    let g: Vec<u32> = (0..len)
        .map(|i| {
            unflatten_into(side, i, &mut x);
            for k in 0..d {
                y[k] = (x[k] + s.component(k) as usize) & mask;
            }
            f[flat_index(side, &y).expect("wrapped")]
        })
        .collect();
    HiddenShiftInstance::new(
        n_bits,
        GridString::new(d, side, q, f)?,
        GridString::new(d, side, q, g)?,
        0.0,
    )?
    .with_sealed_shift(s)
}

/// Rewrite `ceil(noise 2^{nd})` cells of `g`, chosen uniformly among the
/// cells not yet corrupted, with fresh symbols that neither table uses.
/// The instance's noise fraction becomes the exact corrupted fraction.
pub fn inject_noise(inst: &HiddenShiftInstance, noise: f64, seed: u64) -> Result<HiddenShiftInstance> {
    if !(0.0..1.0).contains(&noise) {
        return Err(Error::param(alloc::format!(
            "noise fraction must be in [0, 1), got {noise}"
        )));
    }
    let len = inst.g().len();
    let count = ceil(noise * len as f64) as usize;
    if count == 0 {
        return Ok(inst.clone());
    }
    let already: HashSet<usize> = inst.corrupted().unseal().iter().copied().collect();
    let open: Vec<usize> = (0..len).filter(|i| !already.contains(i)).collect();
    if count > open.len() {
        return Err(Error::param(alloc::format!(
            "only {} cells of g are left to corrupt",
            open.len()
        )));
    }
    let used: HashSet<u32> = inst.f().symbols().chain(inst.g().symbols()).collect();
    let q = inst.g().alphabet();
    let free = q as u64 - used.len() as u64;
    if free < count as u64 {
        return Err(Error::param(alloc::format!(
            "alphabet {q} has {free} unused symbols, {count} needed to keep g injective"
        )));
    }
    let root = SeedTree::new(seed);
    let mut rng = root.child(0).rng();
    let chosen: Vec<usize> = index::sample(&mut rng, open.len(), count)
        .into_iter()
        .map(|i| open[i])
        .collect();
    let mut fresh: Vec<u32> = Vec::with_capacity(count);
    let mut taken: HashSet<u32> = HashSet::new();
    let mut rng = root.child(1).rng();
    if free <= 4 * count as u64 {
        // Dense case: list the unused symbols and pick among them.
        let pool: Vec<u32> = (0..q).filter(|v| !used.contains(v)).collect();
        fresh.extend(index::sample(&mut rng, pool.len(), count).into_iter().map(|i| pool[i]));
    } else {
        while fresh.len() < count {
            let v = rng.random_range(0..q);
            if !used.contains(&v) && taken.insert(v) {
                fresh.push(v);
            }
        }
    }
    let mut g = inst.g().to_vec();
    for (&i, &v) in chosen.iter().zip(&fresh) {
        g[i] = v;
    }
    let mut corrupted: Vec<usize> = already.into_iter().chain(chosen).collect();
    corrupted.sort_unstable();
    let g = GridString::new(inst.dims(), inst.g().side(), q, g)?;
    let mut out = HiddenShiftInstance::new(inst.n_bits(), inst.f().clone(), g, 0.0)?;
    if let Some(s) = inst.sealed_shift() {
        out = out.with_sealed_shift(*s.unseal())?;
    }
    let fraction = corrupted.len() as f64 / len as f64;
    out.with_corrupted(fraction, corrupted)
}
