//! Exhaustive oracles and the classical sampling matcher for injective
//! strings.

use alloc::vec::Vec;

use hashbrown::HashMap;
use libm::{ceil, sqrt};
use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::{flat_index, next_coord, unflatten_into, volume, GridString};
use crate::ledger::{QueryLedger, Role};
use crate::matcher::{check_samples, Verdict};
use crate::rng::SeedTree;
use crate::sieve::{HiddenShiftInstance, PhaseLabel};

/// Largest table `brute_force_shift` will scan.
pub const SHIFT_SCAN_CAP: usize = 1 << 24;

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OracleReport {
    /// Every matching offset, in lexicographic order.
    pub all_matches: Vec<Vec<usize>>,
    pub queries_used: QueryLedger,
}

fn same_shape(text: &GridString, pattern: &GridString) -> Result<()> {
    if text.dims() != pattern.dims() {
        return Err(Error::Shape(alloc::format!(
            "text has {} dimension(s), pattern has {}",
            text.dims(),
            pattern.dims()
        )));
    }
    if pattern.side() > text.side() {
        return Err(Error::param(alloc::format!(
            "pattern side {} exceeds text side {}",
            pattern.side(),
            text.side()
        )));
    }
    Ok(())
}

// Calls `visit(offset, agreements_or_first_mismatch)` for every offset.
// With `exhaustive = false` a comparison stops at the first mismatch.
fn scan(
    text: &GridString,
    pattern: &GridString,
    exhaustive: bool,
    ledger: &mut QueryLedger,
    mut visit: impl FnMut(&[usize], usize, bool),
) {
    let d = text.dims();
    let (n, m) = (text.side(), pattern.side());
    let span = n - m + 1;
    let mut s = alloc::vec![0usize; d];
    let mut x = alloc::vec![0usize; d];
    let mut y = alloc::vec![0usize; d];
    let cells = pattern.len();
    let mut reads = 0u64;
    loop {
        let mut agree = 0;
        let mut all = true;
        x.iter_mut().for_each(|c| *c = 0);
        for i in 0..cells {
            if i > 0 {
                next_coord(&mut x, m);
            }
            for k in 0..d {
                y[k] = s[k] + x[k];
            }
            reads += 1;
            if text.at(flat_index(n, &y).expect("inside")) == pattern.at(i) {
                agree += 1;
            } else {
                all = false;
                if !exhaustive {
                    break;
                }
            }
        }
        visit(&s, agree, all);
        if !next_coord(&mut s, span) {
            break;
        }
    }
    ledger.charge_reads(Role::Text, reads);
    ledger.charge_reads(Role::Pattern, reads);
}

/// Every offset where the pattern occurs, by direct comparison.
pub fn brute_force_match(text: &GridString, pattern: &GridString) -> Result<OracleReport> {
    same_shape(text, pattern)?;
    let mut ledger = QueryLedger::new();
    let mut all = Vec::new();
    scan(text, pattern, false, &mut ledger, |s, _, ok| {
        if ok {
            all.push(s.to_vec());
        }
    });
    Ok(OracleReport {
        all_matches: all,
        queries_used: ledger,
    })
}

/// The offset with the most agreeing positions (first in lexicographic
/// order on ties) and that count.
pub fn best_alignment(text: &GridString, pattern: &GridString) -> Result<(Vec<usize>, usize)> {
    same_shape(text, pattern)?;
    let mut ledger = QueryLedger::new();
    let mut best: (Vec<usize>, usize) = (alloc::vec![0; text.dims()], 0);
    let mut first = true;
    scan(text, pattern, true, &mut ledger, |s, agree, _| {
        if first || agree > best.1 {
            best = (s.to_vec(), agree);
            first = false;
        }
    });
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BaselineOutcome {
    pub verdict: Verdict,
    /// Side of the stored pattern corner block.
    pub k: usize,
    /// Text positions probed.
    pub probes: u64,
    /// Candidate offsets that reached verification.
    pub candidates: u64,
    pub ledger: QueryLedger,
}

/// Classical matcher for injective text and pattern. Stores the corner
/// block `P_{0,k}` with `k = min(ceil(sqrt n), m)`, probes the text at
/// every multiple of `k` that a match's corner block could contain, turns
/// each probe that hits a stored symbol into a candidate offset, and
/// verifies candidates with `ceil(3/gamma)` random positions each.
///
/// A symbol of the corner block hit by two probes means the text is not
/// injective and is reported as a contract error.
pub fn classical_injective_match(
    text: &GridString,
    pattern: &GridString,
    gamma: f64,
    seed: &SeedTree,
    ledger: &mut QueryLedger,
) -> Result<BaselineOutcome> {
    same_shape(text, pattern)?;
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::param(alloc::format!("gamma must be in (0, 1], got {gamma}")));
    }
    let d = text.dims();
    let (n, m) = (text.side(), pattern.side());
    let k = (ceil(sqrt(n as f64)) as usize).clamp(1, m);
    let mut work = QueryLedger::new();

    let corner = volume(d, k).ok_or_else(|| Error::Size("k^d overflows".into()))?;
    let mut stored: HashMap<u32, usize> = HashMap::with_capacity(corner);
    let mut x = alloc::vec![0usize; d];
    for i in 0..corner {
        unflatten_into(k, i, &mut x);
        let v = pattern.read(&x, Role::Pattern, &mut work)?;
        if stored.insert(v, i).is_some() {
            return Err(Error::Contract(alloc::format!(
                "pattern repeats symbol {v} in its corner block"
            )));
        }
    }

    // A match at s has its corner block over [s, s + k) in each coordinate,
    // which holds exactly one multiple of k below n - m + k.
    let per_dim = (n - m + k).div_ceil(k);
    let grid_probes = volume(d, per_dim).ok_or_else(|| Error::Size("probe grid overflows".into()))?;
    let mut j = alloc::vec![0usize; d];
    let mut c = alloc::vec![0usize; d];
    let mut hit_by: HashMap<u32, Vec<usize>> = HashMap::new();
    let mut candidates: Vec<Vec<usize>> = Vec::new();
    let mut probes = 0;
    for p in 0..grid_probes {
        unflatten_into(per_dim, p, &mut j);
        for t in 0..d {
            c[t] = j[t] * k;
        }
        if c.iter().any(|&ct| ct >= n) {
            continue;
        }
        probes += 1;
        let v = text.read(&c, Role::Text, &mut work)?;
        let Some(&pos) = stored.get(&v) else { continue };
        if let Some(prev) = hit_by.insert(v, c.clone()) {
            return Err(Error::Contract(alloc::format!(
                "text repeats symbol {v} at {prev:?} and {c:?}"
            )));
        }
        unflatten_into(k, pos, &mut x);
        let s: Option<Vec<usize>> = c
            .iter()
            .zip(&x)
            .map(|(&ct, &xt)| ct.checked_sub(xt).filter(|&st| st + m <= n))
            .collect();
        if let Some(s) = s {
            candidates.push(s);
        }
    }

    let mut verdict = Verdict::NotFound;
    let samples = check_samples(gamma);
    let mut rng = seed.rng();
    let mut y = alloc::vec![0usize; d];
    'cand: for s in &candidates {
        for _ in 0..samples {
            for t in 0..d {
                x[t] = rng.random_range(0..m);
                y[t] = s[t] + x[t];
            }
            if text.read(&y, Role::Text, &mut work)? != pattern.read(&x, Role::Pattern, &mut work)? {
                continue 'cand;
            }
        }
        verdict = Verdict::Found(s.clone());
        break;
    }
    ledger.merge(&work);
    Ok(BaselineOutcome {
        verdict,
        k,
        probes,
        candidates: candidates.len() as u64,
        ledger: work,
    })
}

/// The shift with the most positions where `g(x) = f(x + s)`, smallest
/// label in lexicographic order on ties. Each `x` votes for the single
/// `s` its value allows, since `f` is injective.
pub fn brute_force_shift(inst: &HiddenShiftInstance) -> Result<PhaseLabel> {
    let (f, g) = (inst.f(), inst.g());
    if f.len() > SHIFT_SCAN_CAP {
        return Err(Error::Size(alloc::format!(
            "{} cells exceed the scan cap of {SHIFT_SCAN_CAP}",
            f.len()
        )));
    }
    let d = inst.dims();
    let side = f.side();
    let where_f: HashMap<u32, usize> = f.symbols().enumerate().map(|(i, v)| (v, i)).collect();
    let mut votes = alloc::vec![0u32; f.len()];
    let mut x = alloc::vec![0usize; d];
    let mut y = alloc::vec![0usize; d];
    let mut s = alloc::vec![0usize; d];
    for (i, v) in g.symbols().enumerate() {
        let Some(&fi) = where_f.get(&v) else { continue };
        unflatten_into(side, i, &mut x);
        unflatten_into(side, fi, &mut y);
        for t in 0..d {
            s[t] = (y[t] + side - x[t]) % side;
        }
        votes[flat_index(side, &s).expect("reduced")] += 1;
    }
    // Row-major order is lexicographic, so the first maximum wins ties.
    let best = votes
        .iter()
        .enumerate()
        .fold((0, 0), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc })
        .0;
    unflatten_into(side, best, &mut s);
    let comps: Vec<u32> = s.iter().map(|&c| c as u32).collect();
    PhaseLabel::new(inst.n_bits(), &comps)
}
