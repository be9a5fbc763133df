//! Seed derivation.
//!
//! Every randomized procedure takes a [`SeedTree`] node rather than a live
//! generator. Children are derived by label, so the coin used by a given
//! pair combination is a pure function of (master seed, stage, step, pair
//! index) and parallel runs reproduce sequential ones bit for bit.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedTree {
    key: [u8; 32],
}

impl core::fmt::Debug for SeedTree {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(
            f,
            "SeedTree({:02x}{:02x}{:02x}{:02x}..)",
            self.key[0], self.key[1], self.key[2], self.key[3]
        )
    }
}

impl SeedTree {
    pub fn new(seed: u64) -> Self {
        let mut key = [0u8; 32];
        ChaCha8Rng::seed_from_u64(seed).fill_bytes(&mut key);
        SeedTree { key }
    }

    /// Derive an independent child node. Labels must be below `2^63`.
    pub fn child(&self, label: u64) -> SeedTree {
        debug_assert!(label < 1 << 63);
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(label << 1);
        let mut key = [0u8; 32];
        rng.fill_bytes(&mut key);
        SeedTree { key }
    }

    /// Convenience for nested labels: `path(&[a, b])` is `child(a).child(b)`.
    pub fn path(&self, labels: &[u64]) -> SeedTree {
        labels.iter().fold(*self, |node, &l| node.child(l))
    }

    /// A generator for stream `id` of this node. Streams never overlap the
    /// key material used for children.
    pub fn stream(&self, id: u64) -> ChaCha8Rng {
        debug_assert!(id < 1 << 63);
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream((id << 1) | 1);
        rng
    }

    pub fn rng(&self) -> ChaCha8Rng {
        self.stream(0)
    }

    /// A plain seed for APIs that take a `u64`, from a reserved stream.
    pub fn seed_u64(&self) -> u64 {
        self.stream((1 << 62) - 1).next_u64()
    }
}

/// Fair coins drawn one bit at a time from a generator.
pub struct Coins<R> {
    rng: R,
    buf: u64,
    left: u32,
}

impl<R: RngCore> Coins<R> {
    pub fn new(rng: R) -> Self {
        Coins { rng, buf: 0, left: 0 }
    }

    pub fn flip(&mut self) -> bool {
        if self.left == 0 {
            self.buf = self.rng.next_u64();
            self.left = 64;
        }
        let bit = self.buf & 1 == 1;
        self.buf >>= 1;
        self.left -= 1;
        bit
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn children_are_deterministic_and_distinct() {
        let root = SeedTree::new(7);
        assert_eq!(root.child(3), SeedTree::new(7).child(3));
        assert_ne!(root.child(3), root.child(4));
        assert_ne!(root.child(0), root);
        assert_eq!(root.path(&[1, 2]), root.child(1).child(2));
    }

    #[test]
    fn stream_and_child_do_not_share_bytes() {
        let root = SeedTree::new(1);
        let mut s = root.stream(0);
        let mut first = [0u8; 32];
        s.fill_bytes(&mut first);
        assert_ne!(first, root.child(0).key);
    }

    #[test]
    fn coins_are_roughly_fair() {
        let mut coins = Coins::new(SeedTree::new(11).rng());
        let heads = (0..10_000).filter(|_| coins.flip()).count();
        assert!((4_700..5_300).contains(&heads), "{heads}");
    }
}
