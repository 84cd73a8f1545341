use gbcs_core::scan::{agent_pairs, enumerate_graphs, topology_from_mask};
use gbcs_core::strategy::{
    cell_strategy_count, coarsest_sep, coarsest_sep_traced, common_neighbor_matrix, is_equitable,
    strategy_matrix, Partition, StrategyMatrix,
};
use gbcs_core::topology::Topology;
use gbcs_testkit::{all_labelled_graphs, closed_neighbourhood};
use proptest::prelude::*;

fn outer_product_oracle(h: usize, edges: &[(usize, usize)]) -> Vec<Vec<u64>> {
    let mut s = vec![vec![0u64; h + 1]; h + 1];
    for agent in 1..=h {
        let b = closed_neighbourhood(h, edges, agent);
        for i in 0..=h {
            for j in 0..=h {
                s[i][j] += (b[i] * b[j]) as u64;
            }
        }
    }
    s
}

#[test]
fn strategy_matrix_matches_outer_products_up_to_six() {
    for h in 1..=6 {
        for edges in all_labelled_graphs(h) {
            let top = Topology::new(h, edges.iter().copied()).unwrap();
            assert_eq!(
                strategy_matrix(&top).rows(),
                outer_product_oracle(h, &edges)
            );
        }
    }
}

#[test]
fn strategy_matrix_equals_common_neighbours_up_to_seven() {
    for h in 1..=7 {
        let count = 1u64 << agent_pairs(h).len();
        for mask in 0..count {
            let top = topology_from_mask(h, mask).unwrap();
            let s = strategy_matrix(&top);
            assert_eq!(s, common_neighbor_matrix(&top), "h={h} mask={mask}");
            assert!(s.check_invariants());
        }
    }
}

fn merge(p: &Partition, a: usize, b: usize) -> Partition {
    let mut cells: Vec<Vec<usize>> = Vec::new();
    let mut merged = Vec::new();
    for (k, c) in p.cells().iter().enumerate() {
        if k == a || k == b {
            merged.extend(c.iter().copied());
        } else {
            cells.push(c.clone());
        }
    }
    cells.push(merged);
    Partition::new(cells)
}

fn automorphisms(top: &Topology) -> Vec<Vec<usize>> {
    let h = top.agents();
    let mut out = Vec::new();
    let mut perm: Vec<usize> = (1..=h).collect();
    permute(&mut perm, 0, &mut |p| {
        if top.relabel(p).unwrap() == *top {
            out.push(p.to_vec());
        }
    });
    out
}

fn permute(v: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == v.len() {
        f(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, f);
        v.swap(k, i);
    }
}

fn check_sep_properties(top: &Topology) {
    let h = top.agents();
    let s = strategy_matrix(top);
    let (p, rounds) = coarsest_sep_traced(&s);
    assert_eq!(p.cells()[0], vec![0]);
    assert!(rounds <= h, "{rounds} rounds for {h} agents");
    assert!(is_equitable(&s, &p));

    // Full row sums agree within each cell.
    for cell in p.cells() {
        let first = s.row_sum(cell[0]);
        assert!(cell.iter().all(|&i| s.row_sum(i) == first));
    }

    // Any merge of two agent cells breaks equitability.
    for a in 1..p.len() {
        for b in a + 1..p.len() {
            assert!(!is_equitable(&s, &merge(&p, a, b)), "{top} merge {a} {b}");
        }
    }

    // Agents swapped by an automorphism share a cell.
    let cell = p.cell_of();
    for perm in automorphisms(top) {
        for i in 1..=h {
            assert_eq!(cell[i], cell[perm[i - 1]]);
        }
    }
}

#[test]
fn sep_properties_exhaustive_up_to_five() {
    for h in 1..=5 {
        for (_, top) in enumerate_graphs(h, false).unwrap() {
            check_sep_properties(&top);
        }
    }
}

#[test]
fn sep_properties_unlabelled_six() {
    for (_, top) in enumerate_graphs(6, true).unwrap() {
        check_sep_properties(&top);
    }
}

fn relabelled_partition(p: &Partition, perm: &[usize]) -> Partition {
    Partition::new(
        p.cells()
            .iter()
            .map(|c| {
                c.iter()
                    .map(|&i| if i == 0 { 0 } else { perm[i - 1] })
                    .collect()
            })
            .collect(),
    )
}

fn cell_counts(s: &StrategyMatrix, p: &Partition) -> Vec<Vec<u64>> {
    (0..s.size())
        .map(|i| {
            p.cells()
                .iter()
                .map(|c| cell_strategy_count(s, i, c))
                .collect()
        })
        .collect()
}

proptest! {
    #[test]
    fn sep_is_label_independent(h in 2usize..=7, mask in any::<u64>(), seed in any::<u64>()) {
        let bits = agent_pairs(h).len();
        let top = topology_from_mask(h, mask & ((1u64 << bits) - 1)).unwrap();
        let mut perm: Vec<usize> = (1..=h).collect();
        let mut state = seed;
        for i in (1..h).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (state >> 33) as usize % (i + 1));
        }
        let relabelled = top.relabel(&perm).unwrap();
        let p = coarsest_sep(&strategy_matrix(&top));
        let q = coarsest_sep(&strategy_matrix(&relabelled));
        prop_assert_eq!(relabelled_partition(&p, &perm), q);
    }

    #[test]
    fn cell_counts_constant_within_cells(h in 1usize..=7, mask in any::<u64>()) {
        let bits = agent_pairs(h).len();
        let top = topology_from_mask(h, if bits == 0 { 0 } else { mask & ((1u64 << bits) - 1) }).unwrap();
        let s = strategy_matrix(&top);
        let p = coarsest_sep(&s);
        let counts = cell_counts(&s, &p);
        for cell in p.cells() {
            for &i in cell {
                prop_assert_eq!(&counts[i], &counts[cell[0]]);
            }
        }
    }
}
