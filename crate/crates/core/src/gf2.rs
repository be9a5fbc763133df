//! Linear systems over GF(2) with at most 64 unknowns, one `u64` per row.

/// Incrementally built system `beta . x = parity`, kept in echelon form.
/// Row `i` of `pivots` has its highest set bit at position `i`.
#[derive(Debug, Clone)]
pub struct Gf2System {
    unknowns: u32,
    pivots: [Option<(u64, bool)>; 64],
    rank: u32,
    conflicts: u32,
}

impl Gf2System {
    pub fn new(unknowns: u32) -> Self {
        assert!((1..=64).contains(&unknowns), "1..=64 unknowns");
        Gf2System {
            unknowns,
            pivots: [None; 64],
            rank: 0,
            conflicts: 0,
        }
    }

    pub fn unknowns(&self) -> u32 {
        self.unknowns
    }

    pub fn rank(&self) -> u32 {
        self.rank
    }

    pub fn is_full_rank(&self) -> bool {
        self.rank == self.unknowns
    }

    /// Dependent equations that disagreed with the system so far. They are
    /// dropped; the first equation seen wins.
    pub fn conflicts(&self) -> u32 {
        self.conflicts
    }

    /// Add one equation. Returns whether it raised the rank.
    pub fn insert(&mut self, mut row: u64, mut rhs: bool) -> bool {
        if self.unknowns < 64 {
            row &= (1u64 << self.unknowns) - 1;
        }
        while row != 0 {
            let top = 63 - row.leading_zeros() as usize;
            match self.pivots[top] {
                Some((r, b)) => {
                    row ^= r;
                    rhs ^= b;
                }
                None => {
                    self.pivots[top] = Some((row, rhs));
                    self.rank += 1;
                    return true;
                }
            }
        }
        if rhs {
            self.conflicts += 1;
        }
        false
    }

    /// The unique solution once the system has full rank.
    pub fn solve(&self) -> Option<u64> {
        if !self.is_full_rank() {
            return None;
        }
        let mut x = 0u64;
        for bit in 0..self.unknowns as usize {
            let (row, rhs) = self.pivots[bit].expect("full rank");
            let rest = row & !(1u64 << bit) & x;
            if rhs ^ (rest.count_ones() & 1 == 1) {
                x |= 1 << bit;
            }
        }
        Some(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_one_system() {
        let mut s = Gf2System::new(1);
        assert!(!s.insert(0, false));
        assert!(s.insert(1, true));
        assert_eq!(s.solve(), Some(1));
    }

    #[test]
    fn identity_system() {
        let mut s = Gf2System::new(2);
        s.insert(0b01, true);
        assert_eq!(s.solve(), None);
        s.insert(0b10, false);
        assert_eq!(s.solve(), Some(0b01));
    }

    #[test]
    fn dependent_rows_and_conflicts() {
        let mut s = Gf2System::new(3);
        assert!(s.insert(0b011, true));
        assert!(s.insert(0b110, false));
        assert!(!s.insert(0b101, true));
        assert_eq!(s.conflicts(), 0);
        assert!(!s.insert(0b101, false));
        assert_eq!(s.conflicts(), 1);
        assert!(s.insert(0b100, true));
        // x2 = 1, x1 = 1, x0 = 0.
        assert_eq!(s.solve(), Some(0b110));
    }

    #[test]
    fn solves_every_consistent_three_bit_system() {
        for secret in 0u64..8 {
            let mut s = Gf2System::new(3);
            for row in 1u64..8 {
                s.insert(row, (row & secret).count_ones() & 1 == 1);
            }
            assert_eq!(s.solve(), Some(secret));
            assert_eq!(s.conflicts(), 0);
        }
    }
}
