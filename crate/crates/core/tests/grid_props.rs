use proptest::prelude::*;
use proptest::strategy::ValueTree;
use qpm_core::grid::{
    injectivity_length, is_block_injective, m_injectivity_length, unflatten, DerivedView, GridAccess, SubgridView,
};
use qpm_core::{GridString, QueryLedger, Role};

// Direct oracles: compare every pair of blocks cell by cell.

fn blocks_equal(s: &GridString, k: usize, a: &[usize], b: &[usize]) -> bool {
    s.subgrid(a, k).unwrap() == s.subgrid(b, k).unwrap()
}

fn naive_window_injective(s: &GridString, k: usize, m: usize) -> bool {
    let d = s.dims();
    let side = s.side() - k + 1;
    if side < m {
        return true;
    }
    let span = side - m + 1;
    let cells = m.pow(d as u32);
    for w in 0..span.pow(d as u32) {
        let w = unflatten(d, span, w);
        for i in 0..cells {
            for j in (i + 1)..cells {
                let a: Vec<usize> = unflatten(d, m, i).iter().zip(&w).map(|(x, o)| x + o).collect();
                let b: Vec<usize> = unflatten(d, m, j).iter().zip(&w).map(|(x, o)| x + o).collect();
                if blocks_equal(s, k, &a, &b) {
                    return false;
                }
            }
        }
    }
    true
}

fn naive_length(s: &GridString, m: Option<usize>) -> usize {
    let top = match m {
        Some(m) => s.side().min(s.side() + 2 - m),
        None => s.side(),
    };
    (1..=top)
        .find(|&k| match m {
            Some(m) => naive_window_injective(s, k, m),
            None => naive_window_injective(s, k, s.side() - k + 1),
        })
        .unwrap_or(top)
}

fn grid_strategy(dims: usize, max_side: usize, q: u32) -> impl Strategy<Value = GridString> {
    (1..=max_side).prop_flat_map(move |side| {
        proptest::collection::vec(0..q, side.pow(dims as u32))
            .prop_map(move |cells| GridString::new(dims, side, q, cells).unwrap())
    })
}

#[test]
fn two_dimensional_example_from_the_injectivity_figure() {
    let rows = [
        [0, 0, 1, 1, 1],
        [1, 1, 1, 0, 0],
        [1, 1, 0, 0, 1],
        [1, 0, 1, 0, 1],
        [1, 0, 1, 1, 0],
    ];
    let s = GridString::new(2, 5, 2, rows.iter().flatten().copied().collect()).unwrap();
    assert!(!is_block_injective(&s, 2));
    assert_eq!(injectivity_length(&s), 3);
    assert_eq!(m_injectivity_length(&s, 2).unwrap(), 3);
    assert_eq!(naive_length(&s, Some(2)), 3);
}

#[test]
fn five_by_five_binary_strings_against_window_oracle() {
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    let strat = proptest::collection::vec(0u32..2, 25);
    for _ in 0..200 {
        let cells = strat.new_tree(&mut runner).unwrap().current();
        let s = GridString::new(2, 5, 2, cells).unwrap();
        let got = m_injectivity_length(&s, 2).unwrap();
        assert_eq!(got, naive_length(&s, Some(2)), "{:?}", s.to_vec());
        // Every 2x2 window of S^{>k} at the returned k is injective.
        assert!(naive_window_injective(&s, got, 2));
    }
}

proptest! {
    #[test]
    fn lengths_match_linear_scan_1d(s in grid_strategy(1, 12, 3), m in 1usize..12) {
        let v = injectivity_length(&s);
        prop_assert_eq!(v, naive_length(&s, None));
        prop_assert!(v <= s.side());
        if m <= s.side() {
            let vm = m_injectivity_length(&s, m).unwrap();
            prop_assert_eq!(vm, naive_length(&s, Some(m)));
            prop_assert!(vm <= v);
        } else {
            prop_assert!(m_injectivity_length(&s, m).is_err());
        }
    }

    #[test]
    fn lengths_match_linear_scan_2d(s in grid_strategy(2, 5, 2), m in 1usize..5) {
        let v = injectivity_length(&s);
        prop_assert_eq!(v, naive_length(&s, None));
        if m <= s.side() {
            prop_assert!(m_injectivity_length(&s, m).unwrap() <= v);
        }
    }

    #[test]
    fn injectivity_is_monotone_in_block_size(s in grid_strategy(1, 16, 2)) {
        let flags: Vec<bool> = (1..=s.side()).map(|k| is_block_injective(&s, k)).collect();
        for w in flags.windows(2) {
            prop_assert!(!w[0] || w[1]);
        }
    }

    #[test]
    fn megachar_equality_is_block_agreement(s in grid_strategy(2, 6, 2), k in 1usize..4, seed in any::<u64>()) {
        prop_assume!(k <= s.side());
        let side = s.side() - k + 1;
        let a = unflatten(2, side, (seed as usize) % (side * side));
        let b = unflatten(2, side, (seed >> 32) as usize % (side * side));
        let v = DerivedView::new(&s, k, Role::Text).unwrap();
        let mut l = QueryLedger::new();
        let eq = v.megachar(&a, &mut l).unwrap() == v.megachar(&b, &mut l).unwrap();
        prop_assert_eq!(eq, blocks_equal(&s, k, &a, &b));
        prop_assert_eq!(l.text_queries(), 2 * (k * k) as u64);
    }

    #[test]
    fn subgrid_of_derived_reads_shifted_blocks(s in grid_strategy(1, 12, 4), k in 1usize..4) {
        prop_assume!(k < s.side());
        let v = DerivedView::new(&s, k, Role::Pattern).unwrap();
        let side = v.side() - 1;
        let sub = SubgridView::new(&v, &[1], side).unwrap();
        let mut l = QueryLedger::new();
        for z in 0..side {
            prop_assert_eq!(sub.read(&[z], &mut l).unwrap(), s.subgrid(&[z + 1], k).unwrap().to_vec());
        }
        prop_assert_eq!(l.pattern_queries(), (side * k) as u64);
    }
}
