use gbcs_core::linalg::matrix_to_rows;
use gbcs_core::lqgame::{
    assemble_m, cost, default_params, h_matrix, nash_deviation_check, riccati_rhs, riccati_solve,
    simulate, NashCheckConfig, ParamOverrides, RiccatiSolution,
};
use gbcs_core::topology::Topology;
use gbcs_core::{GbcsParams, Signal, Vector};
use gbcs_testkit::{max_abs_diff, series_expm};
use proptest::prelude::*;

fn params(h: usize, edges: &[(usize, usize)], horizon: f64) -> GbcsParams {
    let top = Topology::new(h, edges.iter().copied()).unwrap();
    default_params(&top, &ParamOverrides::horizon(horizon)).unwrap()
}

/// Largest central-difference residual of the Riccati equation at interior
/// grid points.
fn interior_residual(p: &GbcsParams, sol: &RiccatiSolution) -> f64 {
    let dt = sol.times[1] - sol.times[0];
    let mut worst = 0.0f64;
    for i in 0..p.players() {
        let k = &sol.k[i];
        for j in 1..sol.steps() {
            let fd = (&k[j + 1] - &k[j - 1]) / (2.0 * dt);
            worst = worst.max((fd - riccati_rhs(p, i, &k[j])).amax());
        }
    }
    worst
}

#[test]
fn riccati_residual_is_second_order() {
    for (h, edges) in [(1, vec![]), (2, vec![]), (2, vec![(1, 2)])] {
        let p = params(h, &edges, 1.0);
        let coarse = riccati_solve(&p, 40).unwrap();
        let fine = riccati_solve(&p, 80).unwrap();
        for sol in [&coarse, &fine] {
            for i in 0..p.players() {
                assert_eq!(sol.k[i][sol.steps()], p.q_terminal[i]);
            }
            assert!(sol.max_asymmetry <= 1e-9);
        }
        let ratio = interior_residual(&p, &coarse) / interior_residual(&p, &fine);
        assert!((3.0..=5.0).contains(&ratio), "h={h} ratio {ratio}");
    }
}

#[test]
fn h_matrix_matches_series_exponential() {
    for (h, edges, tf) in [
        (1, vec![], 0.7),
        (2, vec![(1, 2)], 1.0),
        (3, vec![(1, 2), (2, 3)], 0.5),
    ] {
        let p = params(h, &edges, tf);
        let n = p.n();
        let m = assemble_m(&p).m;
        let neg: Vec<Vec<f64>> = matrix_to_rows(&m)
            .iter()
            .map(|r| r.iter().map(|v| -v * tf).collect())
            .collect();
        let e = series_expm(&neg);
        let mut expected = vec![vec![0.0; n]; n];
        for r in 0..n {
            for c in 0..n {
                let mut acc = e[r][c];
                for (i, qt) in p.q_terminal.iter().enumerate() {
                    for l in 0..n {
                        acc += e[r][(i + 1) * n + l] * qt[(l, c)];
                    }
                }
                expected[r][c] = acc;
            }
        }
        let got = h_matrix(&p).unwrap();
        let diff = max_abs_diff(&matrix_to_rows(&got.h), &expected);
        assert!(diff <= 1e-10, "h={h} diff {diff}");
    }
}

#[test]
fn nash_check_certifies_defaults() {
    let p = params(2, &[(1, 2)], 1.0);
    let z = Signal::constant(1.0, 1.0).unwrap();
    let x0 = Vector::from_element(p.n(), 1.0);
    let report = nash_deviation_check(&p, &x0, &z, &NashCheckConfig::default()).unwrap();
    assert!(report.certified, "{}", report.min_delta);
    assert_eq!(report.delta.len(), 2);
}

fn graph_strategy() -> impl Strategy<Value = (usize, u64)> {
    (1usize..=3).prop_flat_map(|h| (Just(h), 0u64..(1 << (h * (h - 1) / 2))))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn costs_are_nonnegative(
        (h, mask) in graph_strategy(),
        tf in 0.2f64..1.5,
        x in prop::collection::vec(-2.0f64..2.0, 4),
        z in -2.0f64..2.0,
    ) {
        let top = gbcs_core::scan::topology_from_mask(h, mask).unwrap();
        let p = default_params(&top, &ParamOverrides::horizon(tf)).unwrap();
        let x0 = Vector::from_iterator(p.n(), x.iter().copied().take(p.n()));
        let u = Signal::constant(tf, z).unwrap();
        let traj = simulate(&p, &x0, &u, 200).unwrap();
        for i in 0..p.players() {
            prop_assert!(cost(&p, &traj, i).unwrap() >= 0.0);
        }
    }
}
