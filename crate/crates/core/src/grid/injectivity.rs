//! Injectivity length `v(S)` and m-injectivity length `v(S, m)`.
//!
//! Both are monotone in `k` (if two `(k+1)`-blocks agree, so do the
//! `k`-blocks at the same positions), so the minimal `k` is found by binary
//! search. Each probe groups blocks by fingerprint and confirms equality on
//! the cells.

use alloc::vec::Vec;
use core::cmp::Ordering;

use hashbrown::HashMap;

use super::{block_fingerprints, unflatten_into, volume, DerivedView, GridString, Megachar};
use crate::error::{Error, Result};
use crate::ledger::Role;

/// Classes of derived positions whose `k`-blocks are equal, for every class
/// with at least two members. With `stop_early`, returns after the first.
fn duplicate_classes(grid: &GridString, k: usize, stop_early: bool) -> Vec<Vec<usize>> {
    let fp = block_fingerprints(grid, k);
    let mut order: Vec<usize> = (0..fp.len()).collect();
    order.sort_unstable_by_key(|&i| fp[i]);
    let view = DerivedView::new(grid, k, Role::Internal).expect("k in range");
    let side = view.logical_side();
    let mut pos = alloc::vec![0usize; grid.dims()];
    let mut classes = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && fp[order[end]] == fp[order[start]] {
            end += 1;
        }
        if end - start >= 2 {
            let mut members: Vec<(Megachar, usize)> = order[start..end]
                .iter()
                .map(|&i| {
                    unflatten_into(side, i, &mut pos);
                    (view.megachar_unmetered(&pos), i)
                })
                .collect();
            members.sort_unstable_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut c = 0;
            while c < members.len() {
                let mut e = c + 1;
                while e < members.len() && members[e].0.cmp(&members[c].0) == Ordering::Equal {
                    e += 1;
                }
                if e - c >= 2 {
                    classes.push(members[c..e].iter().map(|m| m.1).collect());
                    if stop_early {
                        return classes;
                    }
                }
                c = e;
            }
        }
        start = end;
    }
    classes
}

/// Whether `S^{>k}` is injective.
pub fn is_block_injective(grid: &GridString, k: usize) -> bool {
    duplicate_classes(grid, k, true).is_empty()
}

/// Whether every `m`-window of `S^{>k}` is injective. Vacuously true when
/// `S^{>k}` is narrower than `m`.
pub fn is_window_injective(grid: &GridString, k: usize, m: usize) -> bool {
    let side = grid.side() - k + 1;
    if side < m {
        return true;
    }
    duplicate_classes(grid, k, false)
        .iter()
        .all(|class| !has_close_pair(class, grid.dims(), side, m))
}

/// Whether two of the flat positions lie within Chebyshev distance `m - 1`,
/// i.e. inside a common `m`-window.
fn has_close_pair(class: &[usize], dims: usize, side: usize, m: usize) -> bool {
    if dims == 1 {
        let mut p = class.to_vec();
        p.sort_unstable();
        return p.windows(2).any(|w| w[1] - w[0] < m);
    }
    // Cells of side m: two points in one cell are close; otherwise a close
    // partner can only sit in one of the 3^d neighboring cells.
    let mut cells: HashMap<Vec<usize>, Vec<usize>> = HashMap::new();
    let mut x = alloc::vec![0usize; dims];
    for &p in class {
        unflatten_into(side, p, &mut x);
        let cell: Vec<usize> = x.iter().map(|c| c / m).collect();
        let slot = cells.entry(cell).or_default();
        if !slot.is_empty() {
            return true;
        }
        slot.push(p);
    }
    let mut y = alloc::vec![0usize; dims];
    let neighbors = volume(dims, 3).expect("small dims");
    for &p in class {
        unflatten_into(side, p, &mut x);
        for n in 0..neighbors {
            let mut t = n;
            let mut cell = Vec::with_capacity(dims);
            let mut valid = true;
            for &xi in x.iter().rev() {
                let delta = (t % 3) as isize - 1;
                t /= 3;
                let c = (xi / m) as isize + delta;
                if c < 0 {
                    valid = false;
                }
                cell.push(c.max(0) as usize);
            }
            cell.reverse();
            if !valid {
                continue;
            }
            if let Some(others) = cells.get(&cell) {
                for &q in others {
                    if q == p {
                        continue;
                    }
                    unflatten_into(side, q, &mut y);
                    if x.iter().zip(&y).all(|(a, b)| a.abs_diff(*b) < m) {
                        return true;
                    }
                }
            }
        }
    }
    false
}

/// Minimal `k` with `S^{>k}` injective. Always at most the side.
pub fn injectivity_length(grid: &GridString) -> usize {
    let (mut lo, mut hi) = (1, grid.side());
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if is_block_injective(grid, mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}

/// Minimal `k` such that every `m`-window of `S^{>k}` is injective.
pub fn m_injectivity_length(grid: &GridString, m: usize) -> Result<usize> {
    let n = grid.side();
    if m == 0 || m > n {
        return Err(Error::param(alloc::format!("window {m} must be in 1..={n}")));
    }
    // At k = n - m + 2 the derived string is narrower than m.
    let (mut lo, mut hi) = (1, n.min(n + 2 - m));
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if is_window_injective(grid, mid, m) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(lo)
}
