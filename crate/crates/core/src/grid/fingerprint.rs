//! Rolling content hashes of every `k`-block, computed one axis at a time.

use alloc::vec;
use alloc::vec::Vec;

use super::GridString;

const MODULUS: u64 = (1 << 61) - 1;

// One base per axis; axes beyond the table reuse it cyclically.
const BASES: [u64; 4] = [
    0x0b5a_d4ec_eda1_ce2b % MODULUS,
    0x1d8e_4e27_c47d_124f % MODULUS,
    0x0cf1_bbcd_cb7a_5641 % MODULUS,
    0x1426_c8e5_7bf4_a95d % MODULUS,
];

#[inline]
fn reduce(x: u128) -> u64 {
    let folded = (x as u64 & MODULUS) + (x >> 61) as u64;
    let folded = (folded & MODULUS) + (folded >> 61);
    if folded >= MODULUS {
        folded - MODULUS
    } else {
        folded
    }
}

#[inline]
fn mul(a: u64, b: u64) -> u64 {
    reduce(a as u128 * b as u128)
}

#[inline]
fn add(a: u64, b: u64) -> u64 {
    let s = a + b;
    if s >= MODULUS {
        s - MODULUS
    } else {
        s
    }
}

#[inline]
fn sub(a: u64, b: u64) -> u64 {
    if a >= b {
        a - b
    } else {
        a + MODULUS - b
    }
}

fn pow(mut base: u64, mut exp: usize) -> u64 {
    let mut acc = 1;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul(acc, base);
        }
        base = mul(base, base);
        exp >>= 1;
    }
    acc
}

/// Fingerprint of the `k`-block at every position of `S^{>k}`, row-major
/// over the derived side `side - k + 1`. Equal blocks always have equal
/// fingerprints; unequal blocks collide with probability about `2^-61`
/// per pair, so callers confirm equality on the cells.
pub fn block_fingerprints(grid: &GridString, k: usize) -> Vec<u64> {
    assert!(k >= 1 && k <= grid.side(), "block size out of range");
    let d = grid.dims();
    let mut shape = vec![grid.side(); d];
    let mut vals: Vec<u64> = grid.symbols().map(|s| s as u64 + 1).collect();
    for axis in 0..d {
        let len = shape[axis];
        let out_len = len - k + 1;
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let base = BASES[axis % BASES.len()];
        let top = pow(base, k - 1);
        let mut out = vec![0u64; outer * out_len * inner];
        for o in 0..outer {
            let src = o * len * inner;
            let dst = o * out_len * inner;
            for i in 0..inner {
                let at = |j: usize| vals[src + j * inner + i];
                let mut h = 0u64;
                for j in 0..k {
                    h = add(mul(h, base), at(j));
                }
                out[dst + i] = h;
                for j in 1..out_len {
                    h = add(mul(sub(h, mul(at(j - 1), top)), base), at(j + k - 1));
                    out[dst + j * inner + i] = h;
                }
            }
        }
        shape[axis] = out_len;
        vals = out;
    }
    vals
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{unflatten, DerivedView};
    use crate::ledger::Role;

    // Direct polynomial evaluation of one block, independent of the rolling path.
    fn direct(grid: &GridString, k: usize, s: &[usize]) -> u64 {
        let v = DerivedView::new(grid, k, Role::Internal).unwrap();
        let cells = v.megachar_unmetered(s);
        let d = grid.dims();
        let mut h = 0u64;
        let mut z = vec![0usize; d];
        for (idx, &c) in cells.iter().enumerate() {
            crate::grid::unflatten_into(k, idx, &mut z);
            let mut w = c as u64 + 1;
            for (axis, &zi) in z.iter().enumerate() {
                w = mul(w, pow(BASES[axis % BASES.len()], k - 1 - zi));
            }
            h = add(h, w);
        }
        h
    }

    #[test]
    fn rolling_matches_direct_evaluation() {
        let g = GridString::from_fn(2, 6, 5, |x| ((x[0] * 7 + x[1] * 3 + x[0] * x[1]) % 5) as u32).unwrap();
        for k in 1..=6 {
            let fp = block_fingerprints(&g, k);
            let l = 6 - k + 1;
            assert_eq!(fp.len(), l * l);
            for (idx, &h) in fp.iter().enumerate() {
                assert_eq!(h, direct(&g, k, &unflatten(2, l, idx)), "k={k} idx={idx}");
            }
        }
    }

    #[test]
    fn three_dimensional_rolling() {
        let g = GridString::from_fn(3, 4, 2, |x| ((x[0] ^ x[1] ^ (x[2] >> 1)) & 1) as u32).unwrap();
        let fp = block_fingerprints(&g, 2);
        for (idx, &h) in fp.iter().enumerate() {
            assert_eq!(h, direct(&g, 2, &unflatten(3, 3, idx)));
        }
    }

    #[test]
    fn modular_reduction_edges() {
        assert_eq!(reduce((MODULUS as u128) * 2), 0);
        assert_eq!(mul(MODULUS - 1, MODULUS - 1), 1);
        assert_eq!(sub(0, 1), MODULUS - 1);
    }
}
