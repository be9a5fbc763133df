use alloc::vec::Vec;
use core::fmt::Debug;
use core::hash::Hash;

use super::{flat_index, next_coord, volume, GridString};
use crate::error::{Error, Result};
use crate::ledger::{QueryLedger, Role};

/// The `k^d` symbols of a block, in row-major order.
pub type Megachar = Vec<u32>;

/// Read access to a d-dimensional string with metering.
pub trait GridAccess {
    type Symbol: Clone + Eq + Hash + Debug;

    fn dims(&self) -> usize;
    fn side(&self) -> usize;
    fn read(&self, x: &[usize], ledger: &mut QueryLedger) -> Result<Self::Symbol>;
    /// Base-string reads charged per logical read.
    fn read_cost(&self) -> u64;
}

/// A grid bound to a ledger column.
#[derive(Debug, Clone, Copy)]
pub struct Metered<'a> {
    grid: &'a GridString,
    role: Role,
}

impl<'a> Metered<'a> {
    pub fn new(grid: &'a GridString, role: Role) -> Self {
        Metered { grid, role }
    }

    pub fn grid(&self) -> &'a GridString {
        self.grid
    }

    pub fn role(&self) -> Role {
        self.role
    }
}

impl GridAccess for Metered<'_> {
    type Symbol = u32;

    fn dims(&self) -> usize {
        self.grid.dims()
    }

    fn side(&self) -> usize {
        self.grid.side()
    }

    fn read(&self, x: &[usize], ledger: &mut QueryLedger) -> Result<u32> {
        self.grid.read(x, self.role, ledger)
    }

    fn read_cost(&self) -> u64 {
        1
    }
}

/// `S^{>k}`: position `s` holds the `k`-block of the base at offset `s`.
#[derive(Debug, Clone, Copy)]
pub struct DerivedView<'a> {
    base: &'a GridString,
    block: usize,
    role: Role,
}

impl<'a> DerivedView<'a> {
    pub fn new(base: &'a GridString, block: usize, role: Role) -> Result<Self> {
        if block == 0 || block > base.side() {
            return Err(Error::param(alloc::format!(
                "block size {block} must be in 1..={}",
                base.side()
            )));
        }
        Ok(DerivedView { base, block, role })
    }

    pub fn base(&self) -> &'a GridString {
        self.base
    }

    pub fn block(&self) -> usize {
        self.block
    }

    pub fn role(&self) -> Role {
        self.role
    }

    /// Side of the derived string, `side - k + 1`.
    pub fn logical_side(&self) -> usize {
        self.base.side() - self.block + 1
    }

    pub fn megachar(&self, s: &[usize], ledger: &mut QueryLedger) -> Result<Megachar> {
        self.base.check_block(s, self.block)?;
        let out = self.megachar_unmetered(s);
        ledger.charge_reads(self.role, out.len() as u64);
        Ok(out)
    }

    pub(crate) fn megachar_unmetered(&self, s: &[usize]) -> Megachar {
        let d = self.base.dims();
        let len = volume(d, self.block).expect("block volume fits");
        let mut z = alloc::vec![0usize; d];
        let mut y = alloc::vec![0usize; d];
        let mut out = Vec::with_capacity(len);
        for i in 0..len {
            if i > 0 {
                next_coord(&mut z, self.block);
            }
            for k in 0..d {
                y[k] = s[k] + z[k];
            }
            out.push(self.base.at(flat_index(self.base.side(), &y).expect("checked block")));
        }
        out
    }
}

impl GridAccess for DerivedView<'_> {
    type Symbol = Megachar;

    fn dims(&self) -> usize {
        self.base.dims()
    }

    fn side(&self) -> usize {
        self.logical_side()
    }

    fn read(&self, x: &[usize], ledger: &mut QueryLedger) -> Result<Megachar> {
        self.megachar(x, ledger)
    }

    fn read_cost(&self) -> u64 {
        volume(self.base.dims(), self.block).unwrap_or(usize::MAX) as u64
    }
}

/// `f_{s,k}`: the `k`-cube of `base` at offset `s`, re-indexed from zero.
#[derive(Debug, Clone)]
pub struct SubgridView<'a, B: GridAccess> {
    base: &'a B,
    offset: Vec<usize>,
    side: usize,
}

impl<'a, B: GridAccess> SubgridView<'a, B> {
    pub fn new(base: &'a B, offset: &[usize], side: usize) -> Result<Self> {
        if offset.len() != base.dims() {
            return Err(Error::Shape(alloc::format!(
                "offset has {} components, base has {} dimension(s)",
                offset.len(),
                base.dims()
            )));
        }
        if side == 0 || offset.iter().any(|&o| o + side > base.side()) {
            return Err(Error::Range {
                offset: offset.to_vec(),
                block: side,
                side: base.side(),
            });
        }
        Ok(SubgridView {
            base,
            offset: offset.to_vec(),
            side,
        })
    }

    pub fn offset(&self) -> &[usize] {
        &self.offset
    }
}

impl<B: GridAccess> GridAccess for SubgridView<'_, B> {
    type Symbol = B::Symbol;

    fn dims(&self) -> usize {
        self.base.dims()
    }

    fn side(&self) -> usize {
        self.side
    }

    fn read(&self, z: &[usize], ledger: &mut QueryLedger) -> Result<B::Symbol> {
        if z.len() != self.offset.len() || z.iter().any(|&c| c >= self.side) {
            return Err(Error::Coordinate {
                coord: z.to_vec(),
                side: self.side,
                dims: self.offset.len(),
            });
        }
        let y: Vec<usize> = self.offset.iter().zip(z).map(|(o, c)| o + c).collect();
        self.base.read(&y, ledger)
    }

    fn read_cost(&self) -> u64 {
        self.base.read_cost()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    const A: u32 = 0;
    const B: u32 = 1;

    #[test]
    fn megachars_of_abab() {
        let s = GridString::new(1, 4, 2, vec![A, B, A, B]).unwrap();
        let v = DerivedView::new(&s, 2, Role::Text).unwrap();
        let mut l = QueryLedger::new();
        let got: Vec<_> = (0..3).map(|i| v.megachar(&[i], &mut l).unwrap()).collect();
        assert_eq!(got, vec![vec![A, B], vec![B, A], vec![A, B]]);
        assert_eq!(l.text_queries(), 6);
        assert!(v.megachar(&[3], &mut l).is_err());
    }

    #[test]
    fn whole_string_block() {
        let s = GridString::new(2, 3, 9, (0..9).collect()).unwrap();
        let v = DerivedView::new(&s, 3, Role::Pattern).unwrap();
        assert_eq!(v.logical_side(), 1);
        let mut l = QueryLedger::new();
        assert_eq!(v.megachar(&[0, 0], &mut l).unwrap(), s.to_vec());
        assert_eq!(l.pattern_queries(), 9);
    }

    #[test]
    fn constant_string_megachar() {
        let s = GridString::constant(2, 5, 3, 2).unwrap();
        let v = DerivedView::new(&s, 3, Role::Text).unwrap();
        let mut l = QueryLedger::new();
        assert_eq!(v.megachar(&[1, 2], &mut l).unwrap(), vec![2; 9]);
    }

    #[test]
    fn subgrid_view_shifts_reads() {
        let s = GridString::new(2, 3, 9, (0..9).collect()).unwrap();
        let m = s.metered(Role::Text);
        let sub = SubgridView::new(&m, &[1, 1], 2).unwrap();
        let mut l = QueryLedger::new();
        assert_eq!(sub.read(&[1, 0], &mut l).unwrap(), 7);
        assert!(sub.read(&[2, 0], &mut l).is_err());
        assert!(SubgridView::new(&m, &[2, 2], 2).is_err());
    }

    #[test]
    fn subgrid_of_derived_view() {
        let s = GridString::new(1, 6, 6, (0..6).collect()).unwrap();
        let d = DerivedView::new(&s, 2, Role::Text).unwrap();
        let sub = SubgridView::new(&d, &[2], 3).unwrap();
        let mut l = QueryLedger::new();
        assert_eq!(sub.read(&[1], &mut l).unwrap(), vec![3, 4]);
        assert_eq!(sub.read_cost(), 2);
    }
}
