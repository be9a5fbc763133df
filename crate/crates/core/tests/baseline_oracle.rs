use proptest::prelude::*;
use qpm_core::baseline::{best_alignment, brute_force_match, classical_injective_match};
use qpm_core::instances::gen_permutation_pair;
use qpm_core::matcher::Verdict;
use qpm_core::{GridString, QueryLedger, SeedTree};

// Brute-force verdict: the first occurrence, if any.
fn oracle(text: &GridString, pattern: &GridString) -> Option<Vec<usize>> {
    brute_force_match(text, pattern).unwrap().all_matches.into_iter().next()
}

#[test]
fn classical_matcher_agrees_with_brute_force_on_injective_pairs() {
    let shapes = [
        (16, 4, 1),
        (64, 8, 1),
        (100, 10, 1),
        (256, 16, 1),
        (8, 3, 2),
        (12, 4, 2),
        (6, 2, 3),
    ];
    let mut checked = 0;
    for (i, &(n, m, d)) in shapes.iter().enumerate() {
        for s in 0..150u64 {
            let seed = 1000 * i as u64 + s;
            let inst = gen_permutation_pair(n, m, d, s % 2 == 0, seed).unwrap();
            // The gamma = 1/4 promise: no unmatched offset agrees on more than 3/4 of the cells.
            let (_, agree) = best_alignment(&inst.text, &inst.pattern).unwrap();
            assert!(agree == inst.pattern.len() || 4 * agree <= 3 * inst.pattern.len());
            let mut l = QueryLedger::new();
            let out = classical_injective_match(&inst.text, &inst.pattern, 0.25, &SeedTree::new(seed), &mut l).unwrap();
            let truth = oracle(&inst.text, &inst.pattern);
            assert_eq!(
                out.verdict.offset().map(<[usize]>::to_vec),
                truth,
                "n={n} m={m} d={d} seed={seed}"
            );
            assert_eq!(truth, inst.planted.unseal().clone());
            assert_eq!(l, out.ledger);
            assert_eq!(l.quantum_cost(), 0);
            checked += 1;
        }
    }
    assert!(checked >= 1000);
}

#[test]
fn probe_count_matches_the_grid_of_multiples() {
    for &(n, m) in &[(256usize, 64usize), (1024, 256), (4096, 1024)] {
        let inst = gen_permutation_pair(n, m, 1, true, n as u64).unwrap();
        let out = classical_injective_match(
            &inst.text,
            &inst.pattern,
            1.0,
            &SeedTree::new(0),
            &mut QueryLedger::new(),
        )
        .unwrap();
        let k = (n as f64).sqrt().ceil() as usize;
        assert_eq!(out.k, k.min(m));
        assert_eq!(out.probes as usize, (n - m + out.k).div_ceil(out.k));
        assert!(out.candidates >= 1);
        assert!(matches!(out.verdict, Verdict::Found(_)));
    }
}

proptest! {
    #[test]
    fn best_alignment_is_a_maximum(cells in proptest::collection::vec(0u32..3, 20), p in proptest::collection::vec(0u32..3, 5)) {
        let t = GridString::new(1, 20, 3, cells).unwrap();
        let pat = GridString::new(1, 5, 3, p).unwrap();
        let (at, agree) = best_alignment(&t, &pat).unwrap();
        let score = |o: usize| (0..5).filter(|&i| t.at(o + i) == pat.at(i)).count();
        prop_assert_eq!(score(at[0]), agree);
        prop_assert!((0..16).all(|o| score(o) <= agree));
        prop_assert_eq!(agree == 5, oracle(&t, &pat).is_some());
    }
}
