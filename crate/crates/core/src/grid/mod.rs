//! d-dimensional strings over a finite alphabet.
//!
//! Cells are stored flat in row-major order with the last coordinate
//! fastest. Every view, megacharacter and file format uses the same order.

mod fingerprint;
mod injectivity;
mod view;

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::ledger::{QueryLedger, Role};

pub use fingerprint::block_fingerprints;
pub use injectivity::{injectivity_length, is_block_injective, is_window_injective, m_injectivity_length};
pub use view::{DerivedView, GridAccess, Megachar, Metered, SubgridView};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Cells {
    U8(Vec<u8>),
    U16(Vec<u16>),
    U32(Vec<u32>),
}

impl Cells {
    fn pack(alphabet: u32, symbols: Vec<u32>) -> Cells {
        let max = alphabet - 1;
        if max <= u8::MAX as u32 {
            Cells::U8(symbols.into_iter().map(|s| s as u8).collect())
        } else if max <= u16::MAX as u32 {
            Cells::U16(symbols.into_iter().map(|s| s as u16).collect())
        } else {
            Cells::U32(symbols)
        }
    }

    #[inline]
    fn get(&self, i: usize) -> u32 {
        match self {
            Cells::U8(v) => v[i] as u32,
            Cells::U16(v) => v[i] as u32,
            Cells::U32(v) => v[i],
        }
    }

    fn len(&self) -> usize {
        match self {
            Cells::U8(v) => v.len(),
            Cells::U16(v) => v.len(),
            Cells::U32(v) => v.len(),
        }
    }

    fn width_bytes(&self) -> usize {
        match self {
            Cells::U8(_) => 1,
            Cells::U16(_) => 2,
            Cells::U32(_) => 4,
        }
    }
}

/// `side^dims`, or `None` on overflow.
pub fn volume(dims: usize, side: usize) -> Option<usize> {
    side.checked_pow(u32::try_from(dims).ok()?)
}

/// Row-major flat index of `x` in a cube of the given side.
#[inline]
pub fn flat_index(side: usize, x: &[usize]) -> Option<usize> {
    let mut idx = 0usize;
    for &c in x {
        if c >= side {
            return None;
        }
        idx = idx * side + c;
    }
    Some(idx)
}

/// Inverse of [`flat_index`], written into `out`.
#[inline]
pub fn unflatten_into(side: usize, mut idx: usize, out: &mut [usize]) {
    for slot in out.iter_mut().rev() {
        *slot = idx % side;
        idx /= side;
    }
}

pub fn unflatten(dims: usize, side: usize, idx: usize) -> Vec<usize> {
    let mut out = alloc::vec![0; dims];
    unflatten_into(side, idx, &mut out);
    out
}

/// Advance `x` to the next coordinate of `[side]^d` in row-major order.
/// Returns `false` after the last coordinate.
pub fn next_coord(x: &mut [usize], side: usize) -> bool {
    for c in x.iter_mut().rev() {
        *c += 1;
        if *c < side {
            return true;
        }
        *c = 0;
    }
    false
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GridString {
    dims: usize,
    side: usize,
    alphabet: u32,
    cells: Cells,
}

impl GridString {
    pub fn new(dims: usize, side: usize, alphabet: u32, symbols: Vec<u32>) -> Result<Self> {
        if dims == 0 {
            return Err(Error::param("grid needs at least one dimension"));
        }
        if side == 0 {
            return Err(Error::param("grid side must be positive"));
        }
        if alphabet < 2 {
            return Err(Error::param("alphabet needs at least two symbols"));
        }
        let len = volume(dims, side).ok_or_else(|| Error::Size("side^d overflows".into()))?;
        if symbols.len() != len {
            return Err(Error::Shape(alloc::format!(
                "expected {len} cells for side {side} in {dims}D, got {}",
                symbols.len()
            )));
        }
        if let Some((i, s)) = symbols.iter().enumerate().find(|(_, &s)| s >= alphabet) {
            return Err(Error::param(alloc::format!(
                "cell {i} holds symbol {s}, outside alphabet of size {alphabet}"
            )));
        }
        Ok(GridString {
            dims,
            side,
            alphabet,
            cells: Cells::pack(alphabet, symbols),
        })
    }

    /// Build a grid by evaluating `f` at every coordinate in row-major order.
    pub fn from_fn(dims: usize, side: usize, alphabet: u32, mut f: impl FnMut(&[usize]) -> u32) -> Result<Self> {
        let len = volume(dims, side).ok_or_else(|| Error::Size("side^d overflows".into()))?;
        let mut x = alloc::vec![0usize; dims];
        let mut symbols = Vec::with_capacity(len);
        for i in 0..len {
            if i > 0 {
                next_coord(&mut x, side);
            }
            symbols.push(f(&x));
        }
        GridString::new(dims, side, alphabet, symbols)
    }

    pub fn constant(dims: usize, side: usize, alphabet: u32, symbol: u32) -> Result<Self> {
        let len = volume(dims, side).ok_or_else(|| Error::Size("side^d overflows".into()))?;
        GridString::new(dims, side, alphabet, alloc::vec![symbol; len])
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn alphabet(&self) -> u32 {
        self.alphabet
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.len() == 0
    }

    /// Bytes per stored symbol (1, 2 or 4).
    pub fn symbol_width(&self) -> usize {
        self.cells.width_bytes()
    }

    pub fn index_of(&self, x: &[usize]) -> Result<usize> {
        if x.len() != self.dims {
            return Err(Error::Shape(alloc::format!(
                "coordinate has {} components, grid has {} dimension(s)",
                x.len(),
                self.dims
            )));
        }
        flat_index(self.side, x).ok_or_else(|| Error::Coordinate {
            coord: x.to_vec(),
            side: self.side,
            dims: self.dims,
        })
    }

    /// Unmetered access by flat index.
    #[inline]
    pub fn at(&self, idx: usize) -> u32 {
        self.cells.get(idx)
    }

    /// Unmetered access by coordinate.
    pub fn get(&self, x: &[usize]) -> Result<u32> {
        self.index_of(x).map(|i| self.cells.get(i))
    }

    /// Metered access: charges one read to `role`.
    pub fn read(&self, x: &[usize], role: Role, ledger: &mut QueryLedger) -> Result<u32> {
        let v = self.get(x)?;
        ledger.charge_reads(role, 1);
        Ok(v)
    }

    pub fn metered(&self, role: Role) -> Metered<'_> {
        Metered::new(self, role)
    }

    pub fn symbols(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.len()).map(move |i| self.cells.get(i))
    }

    pub fn to_vec(&self) -> Vec<u32> {
        self.symbols().collect()
    }

    /// Copy of the `side`-cube at `offset`.
    pub fn subgrid(&self, offset: &[usize], side: usize) -> Result<GridString> {
        self.check_block(offset, side)?;
        let mut z = alloc::vec![0usize; self.dims];
        let mut y = alloc::vec![0usize; self.dims];
        let len = volume(self.dims, side).ok_or_else(|| Error::Size("block volume overflows".into()))?;
        let mut out = Vec::with_capacity(len);
        for i in 0..len {
            if i > 0 {
                next_coord(&mut z, side);
            }
            for k in 0..self.dims {
                y[k] = offset[k] + z[k];
            }
            out.push(self.cells.get(flat_index(self.side, &y).expect("checked block")));
        }
        GridString::new(self.dims, side, self.alphabet, out)
    }

    /// Whether all cells are pairwise distinct.
    pub fn is_injective(&self) -> bool {
        let mut seen = hashbrown::HashSet::with_capacity(self.len());
        self.symbols().all(|s| seen.insert(s))
    }

    pub(crate) fn check_block(&self, offset: &[usize], block: usize) -> Result<()> {
        if offset.len() != self.dims {
            return Err(Error::Shape(alloc::format!(
                "offset has {} components, grid has {} dimension(s)",
                offset.len(),
                self.dims
            )));
        }
        if block == 0 || offset.iter().any(|&o| o + block > self.side) {
            return Err(Error::Range {
                offset: offset.to_vec(),
                block,
                side: self.side,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn constant_string_reads_zero() {
        let g = GridString::constant(2, 4, 2, 0).unwrap();
        let mut l = QueryLedger::new();
        assert_eq!(g.read(&[3, 1], Role::Text, &mut l).unwrap(), 0);
        assert_eq!(l.text_queries(), 1);
    }

    #[test]
    fn one_dimensional_indexing() {
        let g = GridString::new(1, 4, 2, vec![0, 1, 0, 1]).unwrap();
        assert_eq!(g.get(&[2]).unwrap(), 0);
        assert_eq!(g.get(&[3]).unwrap(), 1);
    }

    #[test]
    fn row_major_last_coordinate_fastest() {
        let g = GridString::new(2, 3, 9, (0..9).collect()).unwrap();
        assert_eq!(g.get(&[1, 2]).unwrap(), 5);
        assert_eq!(unflatten(2, 3, 5), vec![1, 2]);
    }

    #[test]
    fn out_of_range_coordinate_is_an_error() {
        let g = GridString::constant(2, 3, 2, 1).unwrap();
        assert!(matches!(g.get(&[3, 0]), Err(Error::Coordinate { .. })));
        assert!(matches!(g.get(&[0]), Err(Error::Shape(_))));
    }

    #[test]
    fn construction_validates() {
        assert!(GridString::new(1, 3, 2, vec![0, 1]).is_err());
        assert!(GridString::new(1, 2, 2, vec![0, 2]).is_err());
        assert!(GridString::new(1, 2, 1, vec![0, 0]).is_err());
        assert!(GridString::new(0, 2, 2, vec![]).is_err());
    }

    #[test]
    fn storage_width_follows_alphabet() {
        assert_eq!(GridString::constant(1, 2, 256, 0).unwrap().symbol_width(), 1);
        assert_eq!(GridString::constant(1, 2, 257, 0).unwrap().symbol_width(), 2);
        assert_eq!(GridString::constant(1, 2, 70_000, 0).unwrap().symbol_width(), 4);
    }

    #[test]
    fn subgrid_copies_block() {
        let g = GridString::new(2, 3, 9, (0..9).collect()).unwrap();
        let s = g.subgrid(&[1, 1], 2).unwrap();
        assert_eq!(s.to_vec(), vec![4, 5, 7, 8]);
        assert!(g.subgrid(&[2, 0], 2).is_err());
    }
}
