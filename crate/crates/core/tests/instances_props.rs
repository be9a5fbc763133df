use proptest::prelude::*;
use qpm_core::baseline::brute_force_match;
use qpm_core::grid::unflatten;
use qpm_core::instances::{
    gen_adversarial, gen_shift_instance, generate, inject_noise, injectivity_tail_experiment, megacharacter_blocking,
    GenMode, GenSpec,
};
use qpm_core::stats::chi_square_uniform;

// Upper 1% point of chi-square with one degree of freedom.
const CHI2_1PCT_DF1: f64 = 6.635;

fn spec(n: usize, m: usize, d: usize, q: u32, seed: u64, mode: GenMode) -> GenSpec {
    GenSpec { n, m, d, q, seed, mode }
}

fn all_modes() -> Vec<GenMode> {
    vec![
        GenMode::RandomPlanted,
        GenMode::RandomUnplanted,
        GenMode::Adversarial {
            gamma: 0.25,
            clean: true,
        },
        GenMode::Adversarial {
            gamma: 0.25,
            clean: false,
        },
        GenMode::PermutationD0,
        GenMode::PermutationD1,
    ]
}

#[test]
fn generators_are_pure_functions_of_their_seed() {
    for mode in all_modes() {
        for d in 1..=2 {
            let s = spec(16, 4, d, 3, 42, mode);
            let (a, b) = (generate(&s).unwrap(), generate(&s).unwrap());
            assert_eq!(a.text, b.text);
            assert_eq!(a.pattern, b.pattern);
            assert_eq!(a.planted.unseal(), b.planted.unseal());
            let c = generate(&GenSpec { seed: 43, ..s }).unwrap();
            assert!(c.text != a.text || c.pattern != a.pattern, "{mode:?}");
        }
    }
    let s = gen_shift_instance(5, 2, None, 9).unwrap();
    assert_eq!(s, gen_shift_instance(5, 2, None, 9).unwrap());
}

#[test]
fn planted_offsets_hold_the_pattern() {
    for mode in all_modes() {
        for seed in 0..20 {
            let inst = generate(&spec(32, 8, 1, 4, seed, mode)).unwrap();
            if let Some(at) = inst.planted.unseal() {
                assert_eq!(inst.text.subgrid(at, 8).unwrap(), inst.pattern, "{mode:?}");
            }
        }
    }
}

#[test]
fn adversarial_texts_keep_the_gamma_promise() {
    for d in 1..=2 {
        for seed in 0..30 {
            let m = 4;
            let inst = gen_adversarial(16, m, d, 0.25, seed % 2 == 0, seed).unwrap();
            let cells = inst.pattern.len();
            let matches = brute_force_match(&inst.text, &inst.pattern).unwrap().all_matches;
            match inst.planted.unseal() {
                Some(at) => assert_eq!(&matches, &vec![at.clone()]),
                None => assert!(matches.is_empty()),
            }
            // Every other offset disagrees on at least a quarter of the cells.
            let span = 16 - m + 1;
            for o in 0..span.pow(d as u32) {
                let o = unflatten(d, span, o);
                if matches.contains(&o) {
                    continue;
                }
                let w = inst.text.subgrid(&o, m).unwrap();
                let agree = w.symbols().zip(inst.pattern.symbols()).filter(|(a, b)| a == b).count();
                assert!(4 * (cells - agree) >= cells, "d={d} seed={seed} o={o:?}");
            }
        }
    }
}

#[test]
fn binary_symbols_are_uniform() {
    let mut counts = [0u64; 2];
    for seed in 0..200 {
        let inst = generate(&spec(16, 4, 2, 2, seed, GenMode::RandomUnplanted)).unwrap();
        for v in inst.text.symbols() {
            counts[v as usize] += 1;
        }
    }
    assert!(chi_square_uniform(&counts) < CHI2_1PCT_DF1, "{counts:?}");
}

#[test]
fn unplanted_permutation_patterns_never_match() {
    for seed in 0..1000 {
        let inst = generate(&spec(32, 8, 1, 2, seed, GenMode::PermutationD0)).unwrap();
        assert!(brute_force_match(&inst.text, &inst.pattern)
            .unwrap()
            .all_matches
            .is_empty());
        assert!(inst.text.is_injective() && inst.pattern.is_injective());
    }
}

#[test]
fn injectivity_tail_stays_under_the_bound() {
    let r = injectivity_tail_experiment(64, 1, 2, 2000, 5).unwrap();
    assert_eq!(r.k, 18);
    let sigma = (r.bound * (1.0 - r.bound) / 2000.0).sqrt();
    assert!(r.frequency.estimate <= r.bound + 3.0 * sigma, "{r:?}");
}

#[test]
fn noise_corrupts_the_requested_fraction() {
    let inst = gen_shift_instance(6, 1, None, 3).unwrap();
    let noisy = inject_noise(&inst, 0.1, 4).unwrap();
    let diff: Vec<usize> = (0..64).filter(|&i| noisy.g().at(i) != inst.g().at(i)).collect();
    assert_eq!(diff.len(), 7);
    assert_eq!(noisy.corrupted().unseal(), &diff);
    assert!((noisy.noise() - 7.0 / 64.0).abs() < 1e-12);
    assert!(noisy.g().is_injective());
    assert_eq!(
        noisy.sealed_shift().map(|s| *s.unseal()),
        inst.sealed_shift().map(|s| *s.unseal())
    );
    let more = inject_noise(&noisy, 0.1, 5).unwrap();
    assert_eq!(more.corrupted().unseal().len(), 14);
}

proptest! {
    #[test]
    fn blocking_preserves_aligned_matches(seed in any::<u64>(), b in 1usize..=2, d in 1usize..=2) {
        let inst = generate(&spec(8, 4, d, 2, seed, GenMode::RandomPlanted)).unwrap();
        let (t, p) = megacharacter_blocking(&inst.text, &inst.pattern, b).unwrap();
        prop_assert_eq!(t.side(), 8 / b);
        let big = brute_force_match(&inst.text, &inst.pattern).unwrap().all_matches;
        let small = brute_force_match(&t, &p).unwrap().all_matches;
        let aligned: Vec<Vec<usize>> = big
            .iter()
            .filter(|o| o.iter().all(|c| c % b == 0))
            .map(|o| o.iter().map(|c| c / b).collect())
            .collect();
        prop_assert_eq!(small, aligned);
        // Blocked injectivity at block 1 equals unblocked injectivity at block b.
        prop_assert_eq!(t.is_injective(), blocked_injective(&inst.text, b));
    }
}

// Distinct aligned b-blocks.
fn blocked_injective(s: &qpm_core::GridString, b: usize) -> bool {
    let d = s.dims();
    let per = s.side() / b;
    let mut seen = std::collections::HashSet::new();
    (0..per.pow(d as u32)).all(|i| {
        let at: Vec<usize> = unflatten(d, per, i).iter().map(|c| c * b).collect();
        seen.insert(s.subgrid(&at, b).unwrap().to_vec())
    })
}

#[test]
fn aligned_blocks_of_random_strings_rarely_collide() {
    // 64 binary cells in blocks of 8: 8 blocks out of 256 values.
    let trials = 2000;
    let collisions = (0..trials)
        .filter(|&seed| {
            let inst = generate(&spec(64, 8, 1, 2, seed, GenMode::RandomUnplanted)).unwrap();
            !blocked_injective(&inst.text, 8)
        })
        .count();
    // Birthday bound: 1 - prod (1 - i/256) for i < 8 is about 0.104.
    let rate = collisions as f64 / trials as f64;
    assert!((rate - 0.104).abs() < 0.03, "{rate}");
}
