//! Query accounting.
//!
//! A [`QueryLedger`] keeps two kinds of columns apart:
//!
//! * `text_queries`, `pattern_queries` and `classical_work` count reads the
//!   simulator actually performed. Reads made through a text- or pattern-bound
//!   view land in the matching column and always in `classical_work`.
//! * `quantum_cost` holds modeled quantum query charges: one query to each of
//!   `f` and `g` per prepared sieve state, `ceil(3/sqrt(gamma))` per `Check`,
//!   and the Grover wrapper's charge in the matcher. No classical read ever
//!   increments it.
//!
//! Ledgers merge by componentwise addition, so workers keep private ledgers
//! and combine them at join points.

use core::ops::{Add, AddAssign};

/// Which column a metered read is attributed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Role {
    Text,
    Pattern,
    /// Reads of simulator-internal tables; only `classical_work` moves.
    Internal,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QueryLedger {
    text_queries: u64,
    pattern_queries: u64,
    quantum_cost: u64,
    classical_work: u64,
}

impl QueryLedger {
    pub const fn new() -> Self {
        QueryLedger {
            text_queries: 0,
            pattern_queries: 0,
            quantum_cost: 0,
            classical_work: 0,
        }
    }

    pub fn text_queries(&self) -> u64 {
        self.text_queries
    }

    pub fn pattern_queries(&self) -> u64 {
        self.pattern_queries
    }

    pub fn quantum_cost(&self) -> u64 {
        self.quantum_cost
    }

    pub fn classical_work(&self) -> u64 {
        self.classical_work
    }

    /// Text plus pattern reads.
    pub fn queries(&self) -> u64 {
        self.text_queries + self.pattern_queries
    }

    pub fn charge_reads(&mut self, role: Role, count: u64) {
        match role {
            Role::Text => self.text_queries = self.text_queries.saturating_add(count),
            Role::Pattern => self.pattern_queries = self.pattern_queries.saturating_add(count),
            Role::Internal => {}
        }
        self.classical_work = self.classical_work.saturating_add(count);
    }

    pub fn charge_quantum(&mut self, count: u64) {
        self.quantum_cost = self.quantum_cost.saturating_add(count);
    }

    pub fn merge(&mut self, other: &QueryLedger) {
        self.text_queries = self.text_queries.saturating_add(other.text_queries);
        self.pattern_queries = self.pattern_queries.saturating_add(other.pattern_queries);
        self.quantum_cost = self.quantum_cost.saturating_add(other.quantum_cost);
        self.classical_work = self.classical_work.saturating_add(other.classical_work);
    }

    /// Same ledger with the quantum column replaced. Used by wrappers whose
    /// modeled charge is a formula rather than the sum of their sub-calls.
    pub(crate) fn with_quantum_cost(mut self, quantum_cost: u64) -> Self {
        self.quantum_cost = quantum_cost;
        self
    }
}

impl AddAssign for QueryLedger {
    fn add_assign(&mut self, rhs: Self) {
        self.merge(&rhs);
    }
}

impl Add for QueryLedger {
    type Output = QueryLedger;

    fn add(mut self, rhs: Self) -> Self::Output {
        self += rhs;
        self
    }
}

impl core::iter::Sum for QueryLedger {
    fn sum<I: Iterator<Item = QueryLedger>>(iter: I) -> Self {
        iter.fold(QueryLedger::new(), Add::add)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_land_in_role_column_and_work() {
        let mut l = QueryLedger::new();
        l.charge_reads(Role::Text, 3);
        l.charge_reads(Role::Pattern, 2);
        l.charge_reads(Role::Internal, 5);
        assert_eq!(l.text_queries(), 3);
        assert_eq!(l.pattern_queries(), 2);
        assert_eq!(l.classical_work(), 10);
        assert_eq!(l.quantum_cost(), 0);
    }

    #[test]
    fn merge_is_componentwise() {
        let mut a = QueryLedger::new();
        a.charge_reads(Role::Text, 1);
        a.charge_quantum(7);
        let mut b = QueryLedger::new();
        b.charge_reads(Role::Pattern, 4);
        b.charge_quantum(1);
        assert_eq!(a + b, b + a);
        let c = a + b;
        assert_eq!(c.text_queries(), 1);
        assert_eq!(c.pattern_queries(), 4);
        assert_eq!(c.quantum_cost(), 8);
        assert_eq!(c.classical_work(), 5);
    }
}
