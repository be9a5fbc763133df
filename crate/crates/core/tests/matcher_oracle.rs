use qpm_core::baseline::brute_force_match;
use qpm_core::grid::m_injectivity_length;
use qpm_core::instances::{gen_adversarial, generate, GenMode, GenSpec};
use qpm_core::matcher::{check, find_match, find_match_auto_nu, MatchParams, Matcher, RoughOutcome, Verdict};
use qpm_core::stats::{wilson, Z95};
use qpm_core::{GridString, QueryLedger, Role, SeedTree};
use rand::seq::index;
use rand::Rng;

fn random_grid(d: usize, n: usize, q: u32, seed: u64) -> GridString {
    let mut rng = SeedTree::new(seed).rng();
    GridString::from_fn(d, n, q, |_| rng.random_range(0..q)).unwrap()
}

// Copy of `a` with exactly `count` cells changed.
fn perturb(a: &GridString, count: usize, seed: u64) -> GridString {
    let mut rng = SeedTree::new(seed).rng();
    let mut cells = a.to_vec();
    for i in index::sample(&mut rng, cells.len(), count) {
        cells[i] = (cells[i] + 1 + rng.random_range(0..a.alphabet() - 1)) % a.alphabet();
    }
    GridString::new(a.dims(), a.side(), a.alphabet(), cells).unwrap()
}

#[test]
fn check_accepts_equal_inputs_always() {
    let mut rng = SeedTree::new(1).rng();
    let mut l = QueryLedger::new();
    for t in 0..10_000u64 {
        let a = random_grid(1 + (t % 2) as usize, 8, 4, t);
        assert!(check(
            &a.metered(Role::Text),
            &a.metered(Role::Pattern),
            0.25,
            &mut rng,
            &mut l
        )
        .unwrap());
    }
}

#[test]
fn check_rejects_far_inputs_at_least_two_thirds() {
    let mut rng = SeedTree::new(2).rng();
    let mut l = QueryLedger::new();
    let trials = 10_000u64;
    let mut rejected = 0;
    for t in 0..trials {
        let a = random_grid(2, 8, 4, t);
        let b = perturb(&a, 16, t ^ 0xabc);
        rejected += !check(
            &a.metered(Role::Text),
            &b.metered(Role::Pattern),
            0.25,
            &mut rng,
            &mut l,
        )
        .unwrap() as u64;
    }
    let p = wilson(rejected, trials, Z95);
    assert!(p.lower >= 0.63, "{p:?}");
}

#[test]
fn rough_check_never_reports_a_wrong_shift() {
    let mut params = MatchParams::new(2, 1.0);
    params.epsilon = Some(0.25);
    let mut at_zero = 0;
    for seed in 0..40u64 {
        let t = random_grid(1, 512, 1 << 16, seed);
        for ell in 0..6usize {
            let p = t.subgrid(&[100 + ell], 72).unwrap();
            let mut l = QueryLedger::new();
            let m = Matcher::new(&t, &p, &params, &mut l).unwrap();
            assert_eq!(m.plan().window, 16);
            if let RoughOutcome::Accept(v) = m
                .rough_check(&[100], &SeedTree::new(seed * 11 + ell as u64), &mut l)
                .unwrap()
            {
                assert_eq!(v, vec![ell], "seed {seed}");
                assert!(brute_force_match(&t, &p)
                    .unwrap()
                    .all_matches
                    .contains(&vec![100 + ell]));
                at_zero += (ell == 0) as u32;
            }
        }
    }
    assert_eq!(at_zero, 40);
}

#[test]
fn rough_check2_rejects_every_offset_outside_the_box() {
    // Exhaustive over offsets: only t with 0 <= p - t <= window may accept.
    for seed in 0..4u64 {
        let t = random_grid(1, 96, 1 << 12, seed);
        let planted = 40;
        let p = t.subgrid(&[planted], 20).unwrap();
        let mut params = MatchParams::new(2, 1.0);
        params.epsilon = Some(0.25);
        let mut l = QueryLedger::new();
        let m = Matcher::new(&t, &p, &params, &mut l).unwrap();
        let window = m.plan().window as usize;
        for off in 0..m.plan().offset_side {
            let out = m.rough_check2(&[off], &SeedTree::new(off as u64), &mut l).unwrap();
            let inside = off <= planted && planted - off <= window;
            match out {
                RoughOutcome::Accept(v) => {
                    assert!(inside, "accepted {off} with {v:?}");
                    assert_eq!(v, vec![planted - off]);
                }
                RoughOutcome::Reject(_) => {}
            }
        }
    }
}

#[test]
fn unplanted_random_text_rough_check2_rejects_everything() {
    let t = random_grid(1, 96, 1 << 12, 99);
    let p = random_grid(1, 20, 1 << 12, 100);
    assert!(brute_force_match(&t, &p).unwrap().all_matches.is_empty());
    let mut params = MatchParams::new(2, 1.0);
    params.epsilon = Some(0.25);
    let mut l = QueryLedger::new();
    let m = Matcher::new(&t, &p, &params, &mut l).unwrap();
    for off in 0..m.plan().offset_side {
        assert!(matches!(
            m.rough_check2(&[off], &SeedTree::new(off as u64), &mut l).unwrap(),
            RoughOutcome::Reject(_)
        ));
    }
}

#[test]
fn auto_nu_agrees_with_the_injectivity_length() {
    // Alphabet 8 makes a few levels of nu necessary before windows are injective.
    for seed in 0..3u64 {
        let spec = GenSpec {
            n: 192,
            m: 48,
            d: 1,
            q: 8,
            seed,
            mode: GenMode::RandomPlanted,
        };
        let inst = generate(&spec).unwrap();
        let truth = inst.planted.unseal().clone().unwrap();
        let upsilon = m_injectivity_length(&inst.pattern, inst.pattern.side()).unwrap();
        let mut base = MatchParams::new(1, 1.0);
        base.epsilon = Some(0.25);
        let mut l = QueryLedger::new();
        let auto = find_match_auto_nu(&inst.text, &inst.pattern, &base, &SeedTree::new(seed), &mut l).unwrap();
        let found = auto.outcome.verdict.offset().expect("auto nu finds the planted copy");
        assert!(brute_force_match(&inst.text, &inst.pattern)
            .unwrap()
            .all_matches
            .contains(&found.to_vec()));
        let fixed_nu = upsilon.next_power_of_two();
        let fixed = find_match(
            &inst.text,
            &inst.pattern,
            &MatchParams {
                nu: fixed_nu,
                ..base.clone()
            },
            &SeedTree::new(seed + 50),
            &mut QueryLedger::new(),
        )
        .unwrap();
        assert_eq!(
            fixed.verdict,
            Verdict::Found(truth.clone()),
            "seed {seed} nu {fixed_nu}"
        );
        assert!(auto.nus.iter().enumerate().all(|(i, &nu)| nu == 1 << i));
    }
}

#[test]
fn adversarial_texts_are_not_falsely_confirmed() {
    let runs = 200u64;
    let mut false_found = 0;
    let mut params = MatchParams::new(1, 0.25);
    params.epsilon = Some(0.25);
    params.trial_budget = Some(40);
    for seed in 0..runs {
        let inst = gen_adversarial(64, 8, 1, 0.25, false, seed).unwrap();
        if seed < 5 {
            assert!(brute_force_match(&inst.text, &inst.pattern)
                .unwrap()
                .all_matches
                .is_empty());
        }
        let out = find_match(
            &inst.text,
            &inst.pattern,
            &params,
            &SeedTree::new(seed),
            &mut QueryLedger::new(),
        )
        .unwrap();
        if out.verdict != Verdict::NotFound {
            false_found += 1;
        }
    }
    assert!(false_found as f64 <= 0.01 * runs as f64, "{false_found}/{runs}");
}

#[test]
fn every_found_offset_is_a_real_match() {
    let mut found = 0;
    for seed in 0..30u64 {
        let inst = gen_adversarial(64, 8, 1, 0.25, true, seed).unwrap();
        let mut params = MatchParams::new(1, 0.25);
        params.epsilon = Some(0.25);
        let out = find_match(
            &inst.text,
            &inst.pattern,
            &params,
            &SeedTree::new(seed),
            &mut QueryLedger::new(),
        )
        .unwrap();
        if let Verdict::Found(at) = &out.verdict {
            assert_eq!(inst.text.subgrid(at, 8).unwrap(), inst.pattern);
            assert_eq!(Some(at), inst.planted.unseal().as_ref());
            found += 1;
        }
    }
    assert!(found >= 25, "{found}/30");
}
