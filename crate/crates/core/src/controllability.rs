//! Controllability of the augmented game system: Kalman matrix, the block
//! recursion for its columns, the terminal matrix `T`, the partition-based
//! uncontrollability test and the projected full-row-rank criterion.

use serde::Serialize;

use crate::error::{GbcsError, Result};
use crate::linalg::{
    expm, normalize_columns, rank_with_threshold, set_block, Matrix, RankTol, Vector,
};
use crate::lqgame::{
    assemble_augmented, check_matches_topology, riccati_solve, AugmentedSystem, GbcsParams,
    ParamsEcho, EXPM_TOL,
};
use crate::strategy::{coarsest_sep, has_nontrivial_cell, strategy_matrix, Partition};
use crate::topology::Topology;

/// Tolerance for `Q_i Ã = Ãᵀ Q_i`.
pub const COMMUTE_TOL: f64 = 1.0e-12;
/// Default absolute tolerance on within-cell row deviation of `T`.
pub const DEFAULT_T_TOL: f64 = 1.0e-9;
const SETTING_TOL: f64 = 1.0e-9;
const SETTING_RICCATI_STEPS: usize = 100;

/// `[B̄, ĀB̄, …, Ā^{N-1}B̄]` with `N` the augmented dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanMatrix {
    pub matrix: Matrix,
}

pub fn kalman_matrix(sys: &AugmentedSystem) -> KalmanMatrix {
    let dim = sys.dim();
    let mut matrix = Matrix::zeros(dim, dim);
    let mut col = sys.b_bar.clone();
    for k in 0..dim {
        matrix.set_column(k, &col);
        if k + 1 < dim {
            col = &sys.a_bar * col;
        }
    }
    KalmanMatrix { matrix }
}

/// Numerical rank after scaling every column to unit length, with the
/// threshold that decided it.
pub fn scaled_rank(m: &Matrix, tol: RankTol) -> (usize, f64) {
    rank_with_threshold(&normalize_columns(m), tol)
}

/// Column blocks `Q_pq` of the Kalman matrix, `p` the block row (1 = state)
/// and `q` the column (1 = `B̄`).
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTable {
    n: usize,
    blocks: Vec<Vec<Vector>>,
}

impl BlockTable {
    pub fn rows(&self) -> usize {
        self.blocks.len()
    }

    pub fn columns(&self) -> usize {
        self.blocks[0].len()
    }

    /// Block `Q_pq`, 1-based as in the recursion.
    pub fn get(&self, p: usize, q: usize) -> &Vector {
        &self.blocks[p - 1][q - 1]
    }

    /// Stacks the blocks into the matrix they describe.
    pub fn to_matrix(&self) -> Matrix {
        let rows = self.rows();
        let mut m = Matrix::zeros(self.n * rows, self.columns());
        for (p, row) in self.blocks.iter().enumerate() {
            for (q, v) in row.iter().enumerate() {
                m.view_mut((p * self.n, q), (self.n, 1)).copy_from(v);
            }
        }
        m
    }
}

pub fn check_recursion_precondition(p: &GbcsParams) -> Result<()> {
    for (i, q) in p.q.iter().enumerate() {
        let gap = (q * &p.a_tilde - p.a_tilde.transpose() * q).amax();
        if gap > COMMUTE_TOL {
            return Err(GbcsError::Precondition(format!(
                "Q_{} Ã differs from Ãᵀ Q_{} by {gap:.3e}",
                i + 1,
                i + 1
            )));
        }
    }
    Ok(())
}

/// `W = Σ_i B̃_i R_i^{-1} (B̃_i + C)ᵀ Q_i`.
fn weighted_coupling(p: &GbcsParams) -> Matrix {
    (0..p.players()).fold(Matrix::zeros(p.n(), p.n()), |acc, i| {
        acc + p.coupling(i) * &p.q[i]
    })
}

pub fn recursion_blocks(p: &GbcsParams) -> Result<BlockTable> {
    check_recursion_precondition(p)?;
    let n = p.n();
    let rows = p.players() + 1;
    let cols = rows * rows;
    let a2 = &p.a_tilde * &p.a_tilde;
    let w = weighted_coupling(p);
    let mut blocks = vec![vec![Vector::zeros(n); cols]; rows];
    blocks[0][0] = p.b_tilde.clone();
    for q in 2..=cols {
        if q % 2 == 0 {
            let prev = blocks[0][q - 2].clone();
            blocks[0][q - 1] = &p.a_tilde * &prev;
            for r in 2..=rows {
                blocks[r - 1][q - 1] = &p.q[r - 2] * &prev;
            }
        } else {
            let prev = &blocks[0][q - 3];
            blocks[0][q - 1] = &a2 * prev + &w * prev;
        }
    }
    Ok(BlockTable { n, blocks })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RecursionCheck {
    pub matches: bool,
    pub max_deviation: f64,
}

pub fn recursion_matches_direct(p: &GbcsParams, tol: f64) -> Result<RecursionCheck> {
    let table = recursion_blocks(p)?.to_matrix();
    let direct = kalman_matrix(&assemble_augmented(p)).matrix;
    let max_deviation = (table - direct).amax();
    Ok(RecursionCheck {
        matches: max_deviation <= tol,
        max_deviation,
    })
}

/// `[I 0] Āᵏ B̄` for `k` in `powers`, as columns.
pub fn projected_krylov(sys: &AugmentedSystem, powers: std::ops::Range<usize>) -> Matrix {
    let mut m = Matrix::zeros(sys.n, powers.len());
    let mut col = sys.b_bar.clone();
    for k in 0..powers.end {
        if k >= powers.start {
            m.set_column(k - powers.start, &col.rows(0, sys.n));
        }
        col = &sys.a_bar * col;
    }
    m
}

/// Largest within-cell row spread of `m`, per cell.
pub fn cell_row_deviation(m: &Matrix, partition: &Partition) -> Vec<f64> {
    partition
        .cells()
        .iter()
        .map(|cell| {
            let first = m.row(cell[0]);
            cell.iter()
                .map(|&i| (m.row(i) - first).amax())
                .fold(0.0, f64::max)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TMatrix {
    pub t: Matrix,
}

/// `T = [I 0] e^{-ĀT} (I; -Q̃_1T; …; -Q̃_HT) (0_{1×H}; I_H)`.
pub fn t_matrix(p: &GbcsParams) -> Result<TMatrix> {
    t_matrix_with(p, &assemble_augmented(p).a_bar)
}

/// As [`t_matrix`] with a caller-supplied `Ā`.
pub fn t_matrix_with(p: &GbcsParams, a_bar: &Matrix) -> Result<TMatrix> {
    let n = p.n();
    let h = p.players();
    let e = expm(&(-p.horizon * a_bar), EXPM_TOL)?;
    let mut stack = Matrix::zeros(n * (h + 1), n);
    set_block(&mut stack, 0, 0, &Matrix::identity(n, n));
    for (i, qt) in p.q_terminal.iter().enumerate() {
        set_block(&mut stack, i + 1, 0, &(-qt));
    }
    let selector = Matrix::from_fn(n, h, |r, c| if r == c + 1 { 1.0 } else { 0.0 });
    let t = e.rows(0, n) * stack * selector;
    Ok(TMatrix { t })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Theorem2Check {
    pub partition: Partition,
    /// Row spread of `T` in each cell of `partition` (0 for singletons).
    pub t_row_deviation: Vec<f64>,
    pub t_rows_equal: bool,
    pub thm2_uncontrollable: bool,
}

/// Partition-based uncontrollability test: a nontrivial coarsest partition
/// whose cells also have equal `T` rows.
pub fn theorem2_check(top: &Topology, p: &GbcsParams, tol: f64) -> Result<Theorem2Check> {
    check_matches_topology(p, top)?;
    let partition = coarsest_sep(&strategy_matrix(top));
    let t = t_matrix(p)?.t;
    let t_row_deviation = cell_row_deviation(&t, &partition);
    let t_rows_equal = t_row_deviation.iter().all(|&d| d <= tol);
    let thm2_uncontrollable = has_nontrivial_cell(&partition) && t_rows_equal;
    Ok(Theorem2Check {
        partition,
        t_row_deviation,
        t_rows_equal,
        thm2_uncontrollable,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GameControllability {
    pub controllable: bool,
    pub projected_rank: usize,
    pub threshold: f64,
    /// Rank of the variant whose powers start at `ĀB̄`.
    pub projected_rank_alt: usize,
}

/// Stacked matrix `G = [[I 0]ĀᵏB̄ for k in powers | T]`.
pub fn projected_matrix(p: &GbcsParams, powers: std::ops::Range<usize>) -> Result<Matrix> {
    let sys = assemble_augmented(p);
    let krylov = projected_krylov(&sys, powers);
    let t = t_matrix_with(p, &sys.a_bar)?.t;
    let mut g = Matrix::zeros(sys.n, krylov.ncols() + t.ncols());
    g.columns_mut(0, krylov.ncols()).copy_from(&krylov);
    g.columns_mut(krylov.ncols(), t.ncols()).copy_from(&t);
    Ok(g)
}

/// Full-row-rank verdict on an arbitrary stacked matrix.
pub fn full_row_rank(g: &Matrix, tol: RankTol) -> (bool, usize, f64) {
    let (r, threshold) = scaled_rank(g, tol);
    (r == g.nrows(), r, threshold)
}

pub fn game_controllable(p: &GbcsParams, tol: RankTol) -> Result<GameControllability> {
    let dim = p.n() * (p.players() + 1);
    let g = projected_matrix(p, 0..dim)?;
    let (controllable, projected_rank, threshold) = full_row_rank(&g, tol);
    let alt = projected_matrix(p, 1..dim + 1)?;
    let (_, projected_rank_alt, _) = full_row_rank(&alt, tol);
    Ok(GameControllability {
        controllable,
        projected_rank,
        threshold,
        projected_rank_alt,
    })
}

/// Conditions under which the partition test is a proof of
/// uncontrollability rather than a heuristic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SettingCheck {
    pub riccati_solvable: bool,
    pub cost_commutes: bool,
    /// Cell-constant vectors are mapped to cell-constant vectors by `Ã` and
    /// by `Σ_i S_i Q_i`.
    pub cell_space_invariant: bool,
    pub b_tilde_cell_constant: bool,
}

impl SettingCheck {
    pub fn holds(&self) -> bool {
        self.riccati_solvable
            && self.cost_commutes
            && self.cell_space_invariant
            && self.b_tilde_cell_constant
    }
}

fn indicator(n: usize, cell: &[usize]) -> Vector {
    let mut v = Vector::zeros(n);
    for &i in cell {
        v[i] = 1.0;
    }
    v
}

fn cell_constant(v: &Vector, partition: &Partition) -> bool {
    partition.cells().iter().all(|cell| {
        let scale = v.amax().max(1.0);
        cell.iter()
            .all(|&i| (v[i] - v[cell[0]]).abs() <= SETTING_TOL * scale)
    })
}

pub fn setting_check(p: &GbcsParams, partition: &Partition) -> SettingCheck {
    let n = p.n();
    let w = weighted_coupling(p);
    let cell_space_invariant = partition.cells().iter().all(|cell| {
        let e = indicator(n, cell);
        cell_constant(&(&p.a_tilde * &e), partition) && cell_constant(&(&w * &e), partition)
    });
    SettingCheck {
        riccati_solvable: riccati_solve(p, SETTING_RICCATI_STEPS).is_ok(),
        cost_commutes: check_recursion_precondition(p).is_ok(),
        cell_space_invariant,
        b_tilde_cell_constant: cell_constant(&p.b_tilde, partition),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rank: RankTol,
    pub t_rows: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rank: RankTol::Auto,
            t_rows: DEFAULT_T_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToleranceEcho {
    pub rank: String,
    pub t_rows: f64,
    pub kalman_rank_threshold: f64,
    pub projected_rank_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControllabilityReport {
    pub agents: usize,
    pub edges: Vec<[usize; 2]>,
    pub strategy_matrix: Vec<Vec<u64>>,
    pub sep_cells: Vec<Vec<usize>>,
    pub t_row_deviation_per_cell: Vec<f64>,
    pub thm2_applies: bool,
    pub thm2_uncontrollable: bool,
    pub kalman_rank: usize,
    pub projected_rank: usize,
    pub projected_rank_alt: usize,
    pub controllable: bool,
    pub setting: SettingCheck,
    pub h_condition: f64,
    pub tolerances: ToleranceEcho,
    pub params_digest: String,
    pub params: ParamsEcho,
}

impl ControllabilityReport {
    /// `thm2_applies ⇒ thm2_uncontrollable ⇒ ¬controllable`.
    pub fn check_invariants(&self) -> Result<()> {
        if self.thm2_applies && !self.thm2_uncontrollable {
            return Err(GbcsError::Invariant(
                "partition test applies but did not fire".into(),
            ));
        }
        if self.thm2_applies && self.controllable {
            return Err(GbcsError::Invariant(format!(
                "uncontrollability proved by the partition test but projected rank is full ({})",
                self.projected_rank
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report serialises")
    }
}

/// Full analysis of `top` under `p`. The returned report has passed
/// [`ControllabilityReport::check_invariants`].
pub fn analyze(top: &Topology, p: &GbcsParams, tol: Tolerances) -> Result<ControllabilityReport> {
    let check = theorem2_check(top, p, tol.t_rows)?;
    let sys = assemble_augmented(p);
    let (kalman_rank, kalman_threshold) = scaled_rank(&kalman_matrix(&sys).matrix, tol.rank);
    let game = game_controllable(p, tol.rank)?;
    let setting = setting_check(p, &check.partition);
    let h = crate::lqgame::h_matrix(p)?;
    let report = ControllabilityReport {
        agents: top.agents(),
        edges: top.edges().map(|(a, b)| [a, b]).collect(),
        strategy_matrix: strategy_matrix(top).rows(),
        sep_cells: check.partition.cells().to_vec(),
        t_row_deviation_per_cell: check.t_row_deviation.clone(),
        thm2_applies: check.thm2_uncontrollable && setting.holds(),
        thm2_uncontrollable: check.thm2_uncontrollable,
        kalman_rank,
        projected_rank: game.projected_rank,
        projected_rank_alt: game.projected_rank_alt,
        controllable: game.controllable,
        setting,
        h_condition: h.condition,
        tolerances: ToleranceEcho {
            rank: tol.rank.to_string(),
            t_rows: tol.t_rows,
            kalman_rank_threshold: kalman_threshold,
            projected_rank_threshold: game.threshold,
        },
        params_digest: p.digest(),
        params: p.echo(),
    };
    report.check_invariants()?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lqgame::{default_params, ParamOverrides};

    fn defaults(top: &Topology) -> GbcsParams {
        default_params(top, &ParamOverrides::default()).unwrap()
    }

    fn edgeless(h: usize) -> Topology {
        Topology::new(h, []).unwrap()
    }

    #[test]
    fn kalman_identity_seam() {
        let sys = AugmentedSystem {
            n: 2,
            players: 1,
            a_bar: Matrix::identity(4, 4),
            b_bar: Vector::from_vec(vec![1.0, 0.0, 0.0, 0.0]),
        };
        let k = kalman_matrix(&sys).matrix;
        for c in 0..4 {
            assert_eq!(k.column(c), sys.b_bar.column(0));
        }
        assert_eq!(scaled_rank(&k, RankTol::Auto).0, 1);
    }

    #[test]
    fn kalman_nilpotent_seam() {
        let mut a = Matrix::zeros(4, 4);
        a[(0, 1)] = 1.0;
        let sys = AugmentedSystem {
            n: 2,
            players: 1,
            a_bar: a,
            b_bar: Vector::from_vec(vec![0.0, 1.0, 0.0, 0.0]),
        };
        let k = kalman_matrix(&sys).matrix;
        assert_eq!(
            k.column(1).into_owned(),
            Vector::from_vec(vec![1.0, 0.0, 0.0, 0.0])
        );
        assert_eq!(k.column(2).amax(), 0.0);
        assert_eq!(k.column(3).amax(), 0.0);
    }

    #[test]
    fn recursion_examples() {
        let p = defaults(&edgeless(2));
        let t = recursion_blocks(&p).unwrap();
        assert_eq!(t.get(1, 2), &Vector::from_element(3, 1.0));
        assert_eq!(t.get(1, 3), &Vector::from_vec(vec![5.0, 3.0, 3.0]));
        for p_row in 2..=3 {
            assert_eq!(t.get(p_row, 3).amax(), 0.0);
        }
        let check = recursion_matches_direct(&p, 1e-9).unwrap();
        assert!(check.matches);
    }

    #[test]
    fn recursion_on_path() {
        let p = defaults(&Topology::new(3, [(1, 2), (2, 3)]).unwrap());
        let check = recursion_matches_direct(&p, 1e-9).unwrap();
        assert!(check.matches, "deviation {}", check.max_deviation);
    }

    #[test]
    fn recursion_precondition_guard() {
        let mut p = defaults(&edgeless(2));
        p.a_tilde = Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 2.0, 3.0]));
        p.q[0][(0, 1)] = 1.0;
        p.q[0][(1, 0)] = 1.0;
        assert!(matches!(
            recursion_blocks(&p),
            Err(GbcsError::Precondition(_))
        ));
        assert!(recursion_matches_direct(&p, 1e-9).is_err());
    }

    #[test]
    fn t_matrix_tiny_horizon() {
        let mut p = defaults(&edgeless(3));
        p.horizon = 1e-12;
        let t = t_matrix(&p).unwrap().t;
        let mut expected = Matrix::zeros(4, 3);
        for j in 0..3 {
            expected[(j + 1, j)] = 1.0;
        }
        assert!((t - expected).amax() < 1e-10);
    }

    #[test]
    fn t_matrix_zero_dynamics() {
        let p = defaults(&edgeless(2));
        let t = t_matrix_with(&p, &Matrix::zeros(9, 9)).unwrap().t;
        assert_eq!(
            t,
            Matrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0])
        );
    }

    #[test]
    fn swapped_agents_permute_t_columns() {
        // Exchanging agents 1 and 2 swaps rows 1, 2 and columns 1, 2 of T.
        let p = defaults(&Topology::new(2, [(1, 2)]).unwrap());
        let t = t_matrix(&p).unwrap().t;
        assert!((t[(1, 0)] - t[(2, 1)]).abs() <= 1e-9);
        assert!((t[(1, 1)] - t[(2, 0)]).abs() <= 1e-9);
        assert!((t[(0, 0)] - t[(0, 1)]).abs() <= 1e-9);
        // The rows themselves differ, as they already do for a tiny horizon.
        assert!((t.row(1) - t.row(2)).amax() > 0.1);
    }

    #[test]
    fn partition_test_examples() {
        let top = edgeless(2);
        let check = theorem2_check(&top, &defaults(&top), DEFAULT_T_TOL).unwrap();
        assert_eq!(check.partition.cells(), &[vec![0], vec![1, 2]]);
        assert!(check.t_row_deviation[1] > 0.1);
        assert!(!check.t_rows_equal && !check.thm2_uncontrollable);

        let star = Topology::new(3, [(1, 2), (1, 3)]).unwrap();
        let check = theorem2_check(&star, &defaults(&star), DEFAULT_T_TOL).unwrap();
        assert_eq!(check.partition.cells(), &[vec![0], vec![1], vec![2, 3]]);
        assert!(!check.thm2_uncontrollable);

        // A tolerance wide enough to ignore T makes the test fire.
        let check = theorem2_check(&top, &defaults(&top), 1e3).unwrap();
        assert!(check.thm2_uncontrollable);
    }

    #[test]
    fn asymmetric_weight_breaks_t_rows() {
        let top = edgeless(2);
        let mut p = defaults(&top);
        p.q_terminal[0] = 3.0 * Matrix::identity(3, 3);
        let check = theorem2_check(&top, &p, DEFAULT_T_TOL).unwrap();
        assert!(has_nontrivial_cell(&check.partition));
        assert!(!check.t_rows_equal);
        assert!(!check.thm2_uncontrollable);
    }

    #[test]
    fn mismatched_topology() {
        let p = defaults(&edgeless(2));
        let other = Topology::new(2, [(1, 2)]).unwrap();
        assert!(matches!(
            theorem2_check(&other, &p, DEFAULT_T_TOL),
            Err(GbcsError::Consistency(_))
        ));
    }

    #[test]
    fn edgeless_pair_ranks() {
        let p = defaults(&edgeless(2));
        let sys = assemble_augmented(&p);
        let krylov = projected_krylov(&sys, 0..9);
        // Agents 1 and 2 are interchangeable, so their Krylov rows coincide.
        assert_eq!(krylov.row(1), krylov.row(2));
        assert_eq!(scaled_rank(&krylov, RankTol::Auto).0, 2);
        // T separates them, so the stacked matrix has full row rank.
        let g = game_controllable(&p, RankTol::Auto).unwrap();
        assert!(g.controllable);
        assert_eq!(g.projected_rank, 3);
        assert_eq!(g.projected_rank_alt, 3);
    }

    #[test]
    fn injected_identity_is_full_rank() {
        let mut g = Matrix::zeros(3, 8);
        g.view_mut((0, 5), (3, 3)).fill_with_identity();
        assert!(full_row_rank(&g, RankTol::Auto).0);
    }

    #[test]
    fn report_for_edgeless_pair() {
        let top = edgeless(2);
        let r = analyze(&top, &defaults(&top), Tolerances::default()).unwrap();
        assert!(!r.thm2_applies && !r.thm2_uncontrollable && r.controllable);
        assert!(r.setting.holds());
        // Exact rank of the 9x9 integer Kalman matrix.
        assert_eq!(r.kalman_rank, 4);
        let json = r.to_json();
        for key in [
            "agents",
            "edges",
            "strategy_matrix",
            "sep_cells",
            "t_row_deviation_per_cell",
            "thm2_applies",
            "thm2_uncontrollable",
            "kalman_rank",
            "projected_rank",
            "controllable",
            "tolerances",
            "params_digest",
        ] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
        assert_eq!(json["tolerances"]["rank"], "auto");
        assert_eq!(json["tolerances"]["t_rows"], 1e-9);
    }

    #[test]
    fn invariant_chain_enforced() {
        let top = edgeless(2);
        let mut r = analyze(&top, &defaults(&top), Tolerances::default()).unwrap();
        r.thm2_applies = true;
        r.thm2_uncontrollable = true;
        assert!(matches!(r.check_invariants(), Err(GbcsError::Invariant(_))));
        r.controllable = false;
        assert!(r.check_invariants().is_ok());
        r.thm2_uncontrollable = false;
        assert!(r.check_invariants().is_err());
    }

    #[test]
    fn loose_t_tolerance_breaches_invariant() {
        let top = edgeless(2);
        let tol = Tolerances {
            t_rows: 1e3,
            ..Tolerances::default()
        };
        assert!(matches!(
            analyze(&top, &defaults(&top), tol),
            Err(GbcsError::Invariant(_))
        ));
    }

    #[test]
    fn setting_fails_for_nonuniform_dynamics() {
        let top = edgeless(2);
        let mut p = defaults(&top);
        p.a_tilde[(1, 1)] = 2.0;
        let partition = coarsest_sep(&strategy_matrix(&top));
        let s = setting_check(&p, &partition);
        assert!(!s.cell_space_invariant);
        assert!(!s.holds());
    }
}
