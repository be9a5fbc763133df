use proptest::prelude::*;
use qpm_core::baseline::brute_force_shift;
use qpm_core::gf2::Gf2System;
use qpm_core::instances::gen_shift_instance;
use qpm_core::sieve::{
    combine_with, make_schedule, prepare_state, recover_shift, run_sieve, run_stage, PhaseLabel, PhaseState,
    PoisonSource, RecoveryConfig,
};
use qpm_core::stats::chi_square_uniform;
use qpm_core::{QueryLedger, SeedTree};
use rand::Rng;

// Upper 1% points of chi-square.
const CHI2_1PCT_DF7: f64 = 18.475;
const CHI2_1PCT_DF15: f64 = 30.578;

fn label_strategy(n: u32, d: usize) -> impl Strategy<Value = PhaseLabel> {
    proptest::collection::vec(0u32..(1 << n), d).prop_map(move |c| PhaseLabel::new(n, &c).unwrap())
}

#[test]
fn schedule_widths_sum_for_every_shape() {
    for n in 1..=32 {
        for d in 1..=4 {
            let s = make_schedule(n, d, 1.0).unwrap();
            assert_eq!(s.bit_widths().iter().sum::<u32>(), n - 1, "n={n} d={d}");
            assert_eq!(s.bit_widths().len(), s.stage_count());
            assert!(s.pool_size() >= 2);
            assert_eq!(s.stop_threshold(), (n * n) as u64);
        }
    }
}

proptest! {
    #[test]
    fn combination_arithmetic(a in label_strategy(7, 3), b in label_strategy(7, 3), pa: bool, pb: bool, ea in 0u32..128, eb in 0u32..128) {
        let sa = if pa { PhaseState::poisoned(a) } else { PhaseState::clean(a, ea) };
        let sb = if pb { PhaseState::poisoned(b) } else { PhaseState::clean(b, eb) };
        let win = combine_with(&sa, &sb, true).unwrap();
        let lose = combine_with(&sa, &sb, false).unwrap();
        for i in 0..3 {
            prop_assert_eq!(win.label().component(i), a.component(i).wrapping_sub(b.component(i)) & 127);
            prop_assert_eq!(lose.label().component(i), (a.component(i) + b.component(i)) & 127);
        }
        prop_assert_eq!(win.is_poisoned(), pa || pb);
        prop_assert_eq!(lose.is_poisoned(), pa || pb);
        if !pa && !pb {
            prop_assert_eq!(win.phase(), ea.wrapping_sub(eb) & 127);
        }
    }

    #[test]
    fn stage_output_zeroes_its_block(seed in any::<u64>(), stage in 0usize..3, size in 50usize..3000) {
        let sch = make_schedule(10, 2, 1.0).unwrap();
        let offset = sch.stage_offset(stage);
        let mut rng = SeedTree::new(seed).rng();
        let pool: Vec<PhaseState> = (0..size)
            .map(|_| {
                let c: Vec<u32> = (0..2).map(|_| (rng.random::<u32>() & 1023) >> offset << offset).collect();
                PhaseState::clean(PhaseLabel::new(10, &c).unwrap(), 0)
            })
            .collect();
        let (out, rep) = run_stage(pool, stage, &sch, &SeedTree::new(seed ^ 1)).unwrap();
        let zeroed = offset + sch.bit_widths()[stage];
        prop_assert!(out.iter().all(|s| s.label().low_bits_zero(zeroed)));
        prop_assert_eq!(rep.output, out.len());
        prop_assert!(rep.remaining <= 100 || rep.steps > 0);
        prop_assert!(out.len() <= size / 2);
    }
}

#[test]
fn prepared_labels_are_uniform_and_poison_rate_is_twice_noise() {
    let src = PoisonSource::new(PhaseLabel::new(4, &[5]).unwrap(), 0.02);
    let mut rng = SeedTree::new(77).rng();
    let mut l = QueryLedger::new();
    let mut counts = [0u64; 16];
    let mut poisoned = 0;
    let draws = 100_000;
    for _ in 0..draws {
        let s = qpm_core::sieve::StateSource::prepare(&src, &mut rng, &mut l);
        counts[s.label().component(0) as usize] += 1;
        poisoned += s.is_poisoned() as u64;
    }
    assert!(chi_square_uniform(&counts) < CHI2_1PCT_DF15, "{counts:?}");
    let rate = poisoned as f64 / draws as f64;
    assert!((0.015..=0.025).contains(&rate), "{rate}");
    assert_eq!(l.quantum_cost(), 2 * draws);
}

#[test]
fn exact_instance_never_poisons_at_level_zero() {
    let inst = gen_shift_instance(6, 2, None, 3).unwrap();
    let mut rng = SeedTree::new(0).rng();
    let mut l = QueryLedger::new();
    assert!((0..10_000).all(|_| !prepare_state(&inst, &mut rng, &mut l).unwrap().is_poisoned()));
}

#[test]
fn survivors_of_the_first_stage_have_uniform_high_bits() {
    // n = 8: stage 0 zeroes bits 0..4; bits 5..8 of survivors should be uniform.
    let sch = make_schedule(8, 1, 3.0).unwrap();
    assert_eq!(sch.bit_widths()[0], 4);
    let src = PoisonSource::new(PhaseLabel::new(8, &[0]).unwrap(), 0.0);
    let mut counts = [0u64; 8];
    for run in 0..60 {
        let seed = SeedTree::new(run);
        let mut rng = seed.child(0).rng();
        let mut l = QueryLedger::new();
        let pool: Vec<PhaseState> = (0..4000)
            .map(|_| qpm_core::sieve::StateSource::prepare(&src, &mut rng, &mut l))
            .collect();
        let (out, _) = run_stage(pool, 0, &sch, &seed.child(1)).unwrap();
        for s in out {
            counts[(s.label().component(0) >> 5) as usize] += 1;
        }
    }
    assert!(chi_square_uniform(&counts) < CHI2_1PCT_DF7, "{counts:?}");
}

#[test]
fn zero_width_stage_passes_about_a_third() {
    // Stage 3 of n = 12 has width zero: one bin, successes leave.
    let sch = make_schedule(12, 1, 1.0).unwrap();
    assert_eq!(sch.bit_widths()[3], 0);
    let mut rng = SeedTree::new(5).rng();
    let pool: Vec<PhaseState> = (0..30_000)
        .map(|_| PhaseState::clean(PhaseLabel::new(12, &[(rng.random::<u32>() & 1) << 11]).unwrap(), 0))
        .collect();
    let (out, rep) = run_stage(pool, 3, &sch, &SeedTree::new(6)).unwrap();
    assert_eq!(rep.bins, 1);
    let frac = out.len() as f64 / 30_000.0;
    assert!((frac - 1.0 / 3.0).abs() < 0.02, "{frac}");
}

#[test]
fn sieve_charges_two_queries_per_prepared_state() {
    let src = PoisonSource::new(PhaseLabel::new(10, &[3]).unwrap(), 0.0);
    let sch = make_schedule(10, 1, 3.0).unwrap();
    let mut l = QueryLedger::new();
    let run = run_sieve(&src, &sch, 4, &SeedTree::new(0), &mut l).unwrap();
    assert_eq!(run.prepared, sch.pool_size());
    assert_eq!(l.quantum_cost(), 2 * sch.pool_size());
    assert!(run.final_states.iter().all(|s| s.label().is_final()));
}

#[test]
fn uniform_betas_span_quickly() {
    let mut rng = SeedTree::new(9).rng();
    for d in 1..=4u32 {
        let trials = 10_000;
        let mut total = 0u64;
        for _ in 0..trials {
            let mut sys = Gf2System::new(d);
            while !sys.is_full_rank() {
                sys.insert(rng.random::<u64>() & ((1 << d) - 1), false);
                total += 1;
            }
        }
        let mean = total as f64 / trials as f64;
        assert!(mean < d as f64 + 2.0, "d={d} mean={mean}");
    }
}

#[test]
fn planted_shifts_are_recovered_with_three_votes() {
    let cfg = RecoveryConfig {
        votes: 3,
        ..RecoveryConfig::default()
    };
    for d in [1usize, 2] {
        let mut exact_ok = 0;
        let mut model_ok = 0;
        for t in 0..200u64 {
            let inst = gen_shift_instance(4, d, None, 1000 * d as u64 + t).unwrap();
            let truth = *inst.sealed_shift().unwrap().unseal();
            assert_eq!(brute_force_shift(&inst).unwrap(), truth);
            let mut l = QueryLedger::new();
            let seed = SeedTree::new(t);
            if let Ok(r) = recover_shift(&inst.tables(), &cfg, None, &seed, &mut l) {
                exact_ok += (r.shift() == Some(&truth)) as u32;
            }
            if let Ok(r) = recover_shift(&inst.poison_model(), &cfg, None, &seed, &mut l) {
                model_ok += (r.shift() == Some(&truth)) as u32;
            }
        }
        assert!(exact_ok >= 190, "d={d} exact {exact_ok}/200");
        assert!(model_ok >= 190, "d={d} model {model_ok}/200");
    }
}
