//! Average-case pattern matching through hidden-shift recovery.
//!
//! The quantum search over offsets is simulated by a classical loop that
//! samples offsets uniformly. The loop's reads land in the classical
//! columns of the ledger; the quantum column of a search is set from the
//! modeled amplitude-amplification count instead of the loop length.

use alloc::vec::Vec;

use libm::{ceil, log, log2, pow, sqrt};
use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::grid::{volume, DerivedView, GridAccess, GridString, Megachar, Metered, SubgridView};
use crate::ledger::{QueryLedger, Role};
use crate::rng::SeedTree;
use crate::sieve::{make_schedule, recover_shift, RecoveryConfig, ShiftOutcome, ShiftTables, MAX_BITS, MAX_DIMS};

/// Failure probability the default trial budget and the confirmation pass
/// are sized for.
pub const DEFAULT_FAILURE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MatchParams {
    /// Block size of the derived strings.
    pub nu: usize,
    /// Every non-matching offset differs on at least this fraction.
    pub gamma: f64,
    /// Window tolerance; `None` uses [`default_epsilon`].
    pub epsilon: Option<f64>,
    /// Offsets the search samples before giving up; `None` uses the
    /// coupon-style default.
    pub trial_budget: Option<u64>,
    pub recovery: RecoveryConfig,
    /// Re-test a claimed offset with enough extra checks that a false
    /// claim survives the whole budget with probability at most 5%.
    pub confirm: bool,
}

impl MatchParams {
    pub fn new(nu: usize, gamma: f64) -> Self {
        MatchParams {
            nu,
            gamma,
            epsilon: None,
            trial_budget: None,
            recovery: RecoveryConfig::default(),
            confirm: true,
        }
    }
}

/// Parameters resolved against a concrete text and pattern.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MatchPlan {
    pub n: usize,
    pub m: usize,
    pub dims: usize,
    pub nu: usize,
    /// Largest power of two not above `m - nu`.
    pub m_prime: usize,
    /// `log2 m'`: bits per component of the hidden shift.
    pub bits: u32,
    pub gamma: f64,
    pub epsilon: f64,
    /// `floor(epsilon m')`: largest relative offset a rough check accepts.
    pub window: u32,
    /// Offsets are drawn from `[offset_side]^d` with `offset_side = n - nu - m' + 2`.
    pub offset_side: usize,
    pub trial_budget: u64,
    pub check_samples: u64,
    pub check_charge: u64,
    pub confirm_checks: u64,
    /// `ceil((n / (epsilon m'))^{d/2})`.
    pub grover_iterations: u64,
    /// Modeled quantum cost of one rough check: one sieve run per vote per
    /// round at the schedule's pool size, plus one check.
    pub rough_check_cost: u64,
}

impl MatchPlan {
    pub fn new(text: &GridString, pattern: &GridString, params: &MatchParams) -> Result<Self> {
        let d = text.dims();
        if pattern.dims() != d {
            return Err(Error::Shape(alloc::format!(
                "text has {d} dimension(s), pattern has {}",
                pattern.dims()
            )));
        }
        if d > MAX_DIMS {
            return Err(Error::param(alloc::format!(
                "at most {MAX_DIMS} dimensions are supported"
            )));
        }
        let n = text.side();
        let m = pattern.side();
        if m > n {
            return Err(Error::param(alloc::format!("pattern side {m} exceeds text side {n}")));
        }
        let nu = params.nu;
        if nu == 0 || 2 * nu > m {
            return Err(Error::param(alloc::format!("nu = {nu} must be in 1..={}", m / 2)));
        }
        if m - nu < 2 {
            return Err(Error::param(alloc::format!(
                "m - nu = {} leaves no shift to recover",
                m - nu
            )));
        }
        if !(params.gamma > 0.0 && params.gamma <= 1.0) {
            return Err(Error::param(alloc::format!(
                "gamma must be in (0, 1], got {}",
                params.gamma
            )));
        }
        params.recovery.validate()?;
        let m_prime = 1usize << (usize::BITS - 1 - (m - nu).leading_zeros());
        let bits = m_prime.trailing_zeros();
        if bits > MAX_BITS {
            return Err(Error::Size(alloc::format!(
                "m' = {m_prime} needs more than {MAX_BITS} bits"
            )));
        }
        let epsilon = match params.epsilon {
            Some(e) if !(e > 0.0 && e <= 1.0) => {
                return Err(Error::param(alloc::format!("epsilon must be in (0, 1], got {e}")))
            }
            Some(e) => e,
            None => default_epsilon(m_prime, d),
        };
        let window = (epsilon * m_prime as f64) as u32;
        if window == 0 {
            return Err(Error::param(alloc::format!(
                "epsilon m' = {} floors to zero",
                epsilon * m_prime as f64
            )));
        }
        let ratio = n as f64 / (epsilon * m_prime as f64);
        let dd = d as f64;
        let trial_budget = match params.trial_budget {
            Some(0) => return Err(Error::param("trial budget must be positive")),
            Some(b) => b,
            None => saturate(ceil(8.0 * pow(ratio, dd) * log(1.0 / DEFAULT_FAILURE))),
        };
        let check_samples = check_samples(params.gamma);
        let check_charge = check_charge(params.gamma);
        let confirm_checks = if params.confirm {
            saturate(ceil(log(trial_budget as f64 / DEFAULT_FAILURE) / log(3.0))).max(1)
        } else {
            0
        };
        let block = volume(d, nu).ok_or_else(|| Error::Size("nu^d overflows".into()))? as u64;
        let mut sieve_cost = 0u64;
        for level in 0..bits {
            let schedule = make_schedule(bits - level, d, params.recovery.pool_constant)?;
            sieve_cost = sieve_cost.saturating_add(schedule.pool_size().saturating_mul(2 * block));
        }
        let rough_check_cost = sieve_cost
            .saturating_mul(params.recovery.votes as u64)
            .saturating_add(check_charge);
        Ok(MatchPlan {
            n,
            m,
            dims: d,
            nu,
            m_prime,
            bits,
            gamma: params.gamma,
            epsilon,
            window,
            offset_side: n - nu - m_prime + 2,
            trial_budget,
            check_samples,
            check_charge,
            confirm_checks,
            grover_iterations: saturate(ceil(pow(ratio, dd / 2.0))),
            rough_check_cost,
        })
    }

    /// Modeled quantum cost of a whole search.
    pub fn search_cost(&self) -> u64 {
        self.grover_iterations.saturating_mul(self.rough_check_cost)
    }
}

fn saturate(x: f64) -> u64 {
    if x >= u64::MAX as f64 {
        u64::MAX
    } else {
        x as u64
    }
}

/// `max(1 / (log2^2 m' 2^{sqrt(2 log2 3 d log2 m')}), 1 / m')`. The floor
/// keeps at least one nonzero offset inside the window.
pub fn default_epsilon(m_prime: usize, dims: usize) -> f64 {
    let lm = log2(m_prime as f64);
    let e = 1.0 / (lm * lm * libm::exp2(sqrt(2.0 * log2(3.0) * dims as f64 * lm)));
    e.max(1.0 / m_prime as f64)
}

/// `ceil(3 / gamma)` sampled positions.
pub fn check_samples(gamma: f64) -> u64 {
    saturate(ceil(3.0 / gamma))
}

/// `ceil(3 / sqrt gamma)` modeled queries.
pub fn check_charge(gamma: f64) -> u64 {
    saturate(ceil(3.0 / sqrt(gamma)))
}

/// Equality test under the promise that `a` and `b` are equal or differ on
/// at least a `gamma` fraction of positions. Equal inputs are always
/// accepted; far inputs are rejected with probability at least 2/3.
/// Sampling stops at the first mismatch.
pub fn check<A, B>(a: &A, b: &B, gamma: f64, rng: &mut dyn RngCore, ledger: &mut QueryLedger) -> Result<bool>
where
    A: GridAccess,
    B: GridAccess<Symbol = A::Symbol>,
{
    if a.dims() != b.dims() || a.side() != b.side() {
        return Err(Error::Shape(alloc::format!(
            "check compares side {} in {}d with side {} in {}d",
            a.side(),
            a.dims(),
            b.side(),
            b.dims()
        )));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::param(alloc::format!("gamma must be in (0, 1], got {gamma}")));
    }
    ledger.charge_quantum(check_charge(gamma));
    let mut x = alloc::vec![0usize; a.dims()];
    for _ in 0..check_samples(gamma) {
        for c in &mut x {
            *c = rng.random_range(0..a.side());
        }
        if a.read(&x, ledger)? != b.read(&x, ledger)? {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Rejection {
    /// Some component of the shift exceeded the window.
    OutOfWindow,
    /// Shift recovery found no full-rank system in some round.
    RecoveryFailed,
    /// `t + l` leaves no room for the pattern.
    OutOfRange,
    /// The final comparison failed.
    Mismatch,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum RoughOutcome {
    Accept(Vec<usize>),
    Reject(Rejection),
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Verdict {
    Found(Vec<usize>),
    NotFound,
}

impl Verdict {
    pub fn offset(&self) -> Option<&[usize]> {
        match self {
            Verdict::Found(o) => Some(o),
            Verdict::NotFound => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MatchOutcome {
    pub verdict: Verdict,
    /// Offsets sampled before the verdict.
    pub trials: u64,
    /// Rough checks that accepted but failed pinning or confirmation.
    pub rejected_claims: u64,
    pub ledger: QueryLedger,
    pub plan: MatchPlan,
}

// P' with its megacharacters already read; further reads are free.
struct Cached<'a> {
    dims: usize,
    side: usize,
    cells: &'a [Megachar],
    cost: u64,
}

impl GridAccess for Cached<'_> {
    type Symbol = Megachar;

    fn dims(&self) -> usize {
        self.dims
    }

    fn side(&self) -> usize {
        self.side
    }

    fn read(&self, x: &[usize], _ledger: &mut QueryLedger) -> Result<Megachar> {
        let i = crate::grid::flat_index(self.side, x).ok_or_else(|| Error::Coordinate {
            coord: x.to_vec(),
            side: self.side,
            dims: self.dims,
        })?;
        Ok(self.cells[i].clone())
    }

    fn read_cost(&self) -> u64 {
        self.cost
    }
}

/// A text and pattern prepared for repeated rough checks. The pattern's
/// derived block `P'` is read once, on construction.
pub struct Matcher<'a> {
    text: &'a GridString,
    pattern: &'a GridString,
    plan: MatchPlan,
    recovery: RecoveryConfig,
    pattern_block: Vec<Megachar>,
}

impl<'a> Matcher<'a> {
    pub fn new(
        text: &'a GridString,
        pattern: &'a GridString,
        params: &MatchParams,
        ledger: &mut QueryLedger,
    ) -> Result<Self> {
        let plan = MatchPlan::new(text, pattern, params)?;
        let derived = DerivedView::new(pattern, plan.nu, Role::Pattern)?;
        let len = volume(plan.dims, plan.m_prime).ok_or_else(|| Error::Size("m'^d overflows".into()))?;
        let mut x = alloc::vec![0usize; plan.dims];
        let mut pattern_block = Vec::with_capacity(len);
        for i in 0..len {
            crate::grid::unflatten_into(plan.m_prime, i, &mut x);
            pattern_block.push(derived.megachar(&x, ledger)?);
        }
        Ok(Matcher {
            text,
            pattern,
            plan,
            recovery: params.recovery.clone(),
            pattern_block,
        })
    }

    pub fn plan(&self) -> &MatchPlan {
        &self.plan
    }

    fn check_offset(&self, t: &[usize]) -> Result<()> {
        if t.len() != self.plan.dims || t.iter().any(|&c| c >= self.plan.offset_side) {
            return Err(Error::Coordinate {
                coord: t.to_vec(),
                side: self.plan.offset_side,
                dims: self.plan.dims,
            });
        }
        Ok(())
    }

    // Shift between (T^{>nu})_{t,m'} and P', or why there is none.
    fn relative_shift(
        &self,
        t: &[usize],
        seed: &SeedTree,
        ledger: &mut QueryLedger,
    ) -> Result<Result<Vec<usize>, Rejection>> {
        self.check_offset(t)?;
        let derived = DerivedView::new(self.text, self.plan.nu, Role::Text)?;
        let window = SubgridView::new(&derived, t, self.plan.m_prime)?;
        let cached = Cached {
            dims: self.plan.dims,
            side: self.plan.m_prime,
            cells: &self.pattern_block,
            cost: derived.read_cost(),
        };
        let tables = ShiftTables::from_views(&window, &cached, ledger)?;
        let rec = match recover_shift(&tables, &self.recovery, Some(self.plan.window), seed, ledger) {
            Ok(r) => r,
            Err(Error::Round { .. }) => return Ok(Err(Rejection::RecoveryFailed)),
            Err(e) => return Err(e),
        };
        let shift = match rec.outcome {
            ShiftOutcome::Recovered(s) => s,
            ShiftOutcome::OutOfBound { .. } => return Ok(Err(Rejection::OutOfWindow)),
        };
        let ell: Vec<usize> = shift.components().iter().map(|&c| c as usize).collect();
        if t.iter().zip(&ell).any(|(a, b)| a + b > self.plan.n - self.plan.m) {
            return Ok(Err(Rejection::OutOfRange));
        }
        Ok(Ok(ell))
    }

    /// Recover the shift `l` of the pattern against the window at `t`,
    /// reject if it leaves the tolerance box, then check `T_{t+l,m}`
    /// against `P`.
    pub fn rough_check(&self, t: &[usize], seed: &SeedTree, ledger: &mut QueryLedger) -> Result<RoughOutcome> {
        let ell = match self.relative_shift(t, &seed.child(0), ledger)? {
            Ok(l) => l,
            Err(why) => return Ok(RoughOutcome::Reject(why)),
        };
        let at = add(t, &ell);
        if self.check_at(&at, &mut seed.stream(1), ledger)? {
            Ok(RoughOutcome::Accept(ell))
        } else {
            Ok(RoughOutcome::Reject(Rejection::Mismatch))
        }
    }

    /// As [`Matcher::rough_check`], but the final step compares the single
    /// megacharacters `T^{>nu}(t + l)` and `P^{>nu}(0)`. Sound when both
    /// derived strings are injective and the match is unique.
    pub fn rough_check2(&self, t: &[usize], seed: &SeedTree, ledger: &mut QueryLedger) -> Result<RoughOutcome> {
        let ell = match self.relative_shift(t, &seed.child(0), ledger)? {
            Ok(l) => l,
            Err(why) => return Ok(RoughOutcome::Reject(why)),
        };
        let at = add(t, &ell);
        let derived = DerivedView::new(self.text, self.plan.nu, Role::Text)?;
        let here = derived.megachar(&at, ledger)?;
        let corner = DerivedView::new(self.pattern, self.plan.nu, Role::Pattern)?
            .megachar(&alloc::vec![0; self.plan.dims], ledger)?;
        ledger.charge_quantum(2 * here.len() as u64);
        if here == corner {
            Ok(RoughOutcome::Accept(ell))
        } else {
            Ok(RoughOutcome::Reject(Rejection::Mismatch))
        }
    }

    fn check_at(&self, at: &[usize], rng: &mut dyn RngCore, ledger: &mut QueryLedger) -> Result<bool> {
        let text = Metered::new(self.text, Role::Text);
        let window = SubgridView::new(&text, at, self.plan.m)?;
        check(
            &window,
            &Metered::new(self.pattern, Role::Pattern),
            self.plan.gamma,
            rng,
            ledger,
        )
    }

    /// `repeats` independent checks at `at`; all must accept.
    pub fn confirm(&self, at: &[usize], repeats: u64, seed: &SeedTree, ledger: &mut QueryLedger) -> Result<bool> {
        for i in 0..repeats {
            if !self.check_at(at, &mut seed.stream(i), ledger)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Sample offsets until a rough check accepts and the claim survives a
    /// second shift recovery (which must agree) and the confirmation pass.
    ///
    /// Trial `i` draws from `seed.child(i)`. The returned ledger holds the
    /// loop's actual reads; its quantum column is [`MatchPlan::search_cost`].
    pub fn search(&self, seed: &SeedTree, ledger: &mut QueryLedger) -> Result<MatchOutcome> {
        let mut work = QueryLedger::new();
        let mut verdict = Verdict::NotFound;
        let mut rejected = 0;
        let mut trials = 0;
        let mut t = alloc::vec![0usize; self.plan.dims];
        while trials < self.plan.trial_budget {
            let node = seed.child(trials);
            trials += 1;
            let mut rng = node.stream(0);
            for c in &mut t {
                *c = rng.random_range(0..self.plan.offset_side);
            }
            let ell = match self.rough_check(&t, &node.child(1), &mut work)? {
                RoughOutcome::Accept(l) => l,
                RoughOutcome::Reject(_) => continue,
            };
            if self.relative_shift(&t, &node.child(2), &mut work)? != Ok(ell.clone()) {
                rejected += 1;
                continue;
            }
            let at = add(&t, &ell);
            if self.confirm(&at, self.plan.confirm_checks, &node.child(3), &mut work)? {
                verdict = Verdict::Found(at);
                break;
            }
            rejected += 1;
        }
        let work = work.with_quantum_cost(self.plan.search_cost());
        ledger.merge(&work);
        Ok(MatchOutcome {
            verdict,
            trials,
            rejected_claims: rejected,
            ledger: work,
            plan: self.plan.clone(),
        })
    }
}

fn add(a: &[usize], b: &[usize]) -> Vec<usize> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// One rough check at offset `t`.
pub fn rough_check(
    text: &GridString,
    pattern: &GridString,
    params: &MatchParams,
    t: &[usize],
    seed: &SeedTree,
    ledger: &mut QueryLedger,
) -> Result<RoughOutcome> {
    Matcher::new(text, pattern, params, ledger)?.rough_check(t, seed, ledger)
}

pub fn rough_check2(
    text: &GridString,
    pattern: &GridString,
    params: &MatchParams,
    t: &[usize],
    seed: &SeedTree,
    ledger: &mut QueryLedger,
) -> Result<RoughOutcome> {
    Matcher::new(text, pattern, params, ledger)?.rough_check2(t, seed, ledger)
}

/// Search for an occurrence of `pattern` in `text`. The ledger gets the
/// pattern reads of setup plus the search ledger in [`MatchOutcome::ledger`],
/// which also includes setup.
pub fn find_match(
    text: &GridString,
    pattern: &GridString,
    params: &MatchParams,
    seed: &SeedTree,
    ledger: &mut QueryLedger,
) -> Result<MatchOutcome> {
    let mut setup = QueryLedger::new();
    let matcher = Matcher::new(text, pattern, params, &mut setup)?;
    let mut out = matcher.search(seed, &mut setup)?;
    out.ledger = setup.with_quantum_cost(out.ledger.quantum_cost());
    ledger.merge(&out.ledger);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AutoOutcome {
    /// Outcome of the last round run; its ledger is the total over rounds.
    pub outcome: MatchOutcome,
    /// Values of nu tried, in order.
    pub nus: Vec<usize>,
}

/// [`find_match`] with `nu = 1, 2, 4, ...` while `nu <= m/2` and
/// `m - nu >= 2`. A claimed match must also pass `2 (ceil(log2 nu) + 1)`
/// extra checks before it is returned. `base.nu` is ignored.
pub fn find_match_auto_nu(
    text: &GridString,
    pattern: &GridString,
    base: &MatchParams,
    seed: &SeedTree,
    ledger: &mut QueryLedger,
) -> Result<AutoOutcome> {
    let m = pattern.side();
    let mut total = QueryLedger::new();
    let mut nus = Vec::new();
    let mut last = None;
    let mut nu = 1usize;
    while 2 * nu <= m && m - nu >= 2 {
        nus.push(nu);
        let params = MatchParams { nu, ..base.clone() };
        let node = seed.child(nu as u64);
        let mut round = QueryLedger::new();
        let matcher = Matcher::new(text, pattern, &params, &mut round)?;
        let mut out = matcher.search(&node.child(0), &mut round)?;
        let confirmed = match out.verdict.offset() {
            Some(at) => {
                let repeats = 2 * (nu.next_power_of_two().trailing_zeros() as u64 + 1);
                matcher.confirm(at, repeats, &node.child(1), &mut round)?
            }
            None => false,
        };
        total.merge(&round);
        if !confirmed && out.verdict != Verdict::NotFound {
            out.rejected_claims += 1;
            out.verdict = Verdict::NotFound;
        }
        out.ledger = total;
        last = Some(out);
        if confirmed {
            break;
        }
        nu *= 2;
    }
    ledger.merge(&total);
    let outcome = last.ok_or_else(|| Error::param(alloc::format!("pattern side {m} admits no nu")))?;
    Ok(AutoOutcome { outcome, nus })
}

/// Exploratory estimate of the mismatch floor: the smallest mismatch
/// fraction seen over `offsets` random offsets with `samples` positions
/// each, ignoring offsets with no observed mismatch. Not a guarantee.
pub fn estimate_gamma(
    text: &GridString,
    pattern: &GridString,
    offsets: usize,
    samples: usize,
    seed: &SeedTree,
    ledger: &mut QueryLedger,
) -> Result<Option<f64>> {
    if pattern.dims() != text.dims() || pattern.side() > text.side() || samples == 0 {
        return Err(Error::param(
            "estimate needs a pattern that fits the text and samples > 0",
        ));
    }
    let d = text.dims();
    let span = text.side() - pattern.side() + 1;
    let mut rng = seed.rng();
    let mut best: Option<f64> = None;
    let mut s = alloc::vec![0usize; d];
    let mut x = alloc::vec![0usize; d];
    let mut y = alloc::vec![0usize; d];
    for _ in 0..offsets {
        for c in &mut s {
            *c = rng.random_range(0..span);
        }
        let mut miss = 0;
        for _ in 0..samples {
            for i in 0..d {
                x[i] = rng.random_range(0..pattern.side());
                y[i] = s[i] + x[i];
            }
            miss += (text.read(&y, Role::Text, ledger)? != pattern.read(&x, Role::Pattern, ledger)?) as usize;
        }
        if miss > 0 {
            let f = miss as f64 / samples as f64;
            best = Some(best.map_or(f, |b: f64| b.min(f)));
        }
    }
    Ok(best)
}
