use crate::error::{GbcsError, Result};
use crate::linalg::{condition_number, expm, grid_time, set_block, simpson_weights, solve_linear};
use crate::linalg::{Matrix, Vector, SINGULAR_CONDITION};

use super::assemble::{assemble_m, flip_costates};
use super::params::GbcsParams;
use super::signal::Signal;

pub(crate) const EXPM_TOL: f64 = 1.0e-13;
const MIN_QUADRATURE_INTERVALS: usize = 512;

/// `H(T) = [I 0 … 0] e^{-MT} (I; Q̃_1T; …; Q̃_HT)` with its condition estimate.
#[derive(Debug, Clone)]
pub struct HMatrix {
    pub h: Matrix,
    pub condition: f64,
}

impl HMatrix {
    pub fn invertible(&self) -> bool {
        self.condition <= SINGULAR_CONDITION
    }
}

fn terminal_stack(p: &GbcsParams) -> Matrix {
    let n = p.n();
    let mut stack = Matrix::zeros(n * (p.players() + 1), n);
    set_block(&mut stack, 0, 0, &Matrix::identity(n, n));
    for (i, qt) in p.q_terminal.iter().enumerate() {
        set_block(&mut stack, i + 1, 0, qt);
    }
    stack
}

pub fn h_matrix(p: &GbcsParams) -> Result<HMatrix> {
    let n = p.n();
    let m = assemble_m(p).m;
    let e = expm(&(-p.horizon * m), EXPM_TOL)?;
    let top = e.rows(0, n).into_owned();
    let h = top * terminal_stack(p);
    let condition = condition_number(&h);
    Ok(HMatrix { h, condition })
}

/// Initial value of `(x; φ_1; …; φ_H)` together with the condition estimate
/// of the boundary matrix.
#[derive(Debug, Clone)]
pub struct BvpSolution {
    pub y0: Vector,
    pub condition: f64,
}

/// Solves `ẏ = M y + N z`, `x(0) = x0`, `φ_i(T) = Q̃_iT x(T)` with
/// `N = (C; 0; …; 0)`.
pub fn solve_bvp(p: &GbcsParams, x0: &Vector, z: &Signal) -> Result<BvpSolution> {
    solve_bvp_forced(p, x0, &p.c, z)
}

/// As [`solve_bvp`] with the input entering the state through `column`.
pub fn solve_bvp_forced(
    p: &GbcsParams,
    x0: &Vector,
    column: &Vector,
    z: &Signal,
) -> Result<BvpSolution> {
    let n = p.n();
    let h = p.players();
    let dim = n * (h + 1);
    if x0.len() != n || column.len() != n {
        return Err(GbcsError::Dimension(format!(
            "initial state and input column need length {n}"
        )));
    }
    check_horizon(p, z)?;
    let tf = p.horizon;
    let m = assemble_m(p).m;
    let e_minus = expm(&(-tf * &m), EXPM_TOL)?;

    // Boundary rows: x(0) = x0 from P, φ_i(T) - Q̃_iT x(T) = 0 from Q.
    let mut p_sel = Matrix::zeros(dim, dim);
    p_sel.view_mut((0, 0), (n, n)).fill_with_identity();
    let mut q_sel = Matrix::zeros(dim, dim);
    for i in 0..h {
        set_block(&mut q_sel, i + 1, 0, &(-&p.q_terminal[i]));
        set_block(&mut q_sel, i + 1, i + 1, &Matrix::identity(n, n));
    }
    let boundary = &p_sel * &e_minus + &q_sel;

    let mut rhs = Vector::zeros(dim);
    rhs.rows_mut(0, n).copy_from(x0);
    if !(z.is_zero() || column.iter().all(|&v| v == 0.0)) {
        let mut forcing = Vector::zeros(dim);
        forcing.rows_mut(0, n).copy_from(column);
        rhs -= &q_sel * forced_response(&m, &forcing, z, tf)?;
    }

    // With w = e^{MT} y(0): (P e^{-MT} + Q) w = rhs.
    let sol = solve_linear(
        &boundary,
        &Matrix::from_column_slice(dim, 1, rhs.as_slice()),
    )
    .map_err(|e| match e {
        GbcsError::Singular { condition } => GbcsError::NoEquilibrium { condition },
        other => other,
    })?;
    let w = sol.x.column(0).into_owned();
    Ok(BvpSolution {
        y0: &e_minus * w,
        condition: sol.condition,
    })
}

/// `∫_0^T e^{M(T-τ)} N z(τ) dτ` by composite Simpson on a refinement of the
/// signal grid.
fn forced_response(m: &Matrix, forcing: &Vector, z: &Signal, tf: f64) -> Result<Vector> {
    let base = z.intervals();
    let intervals = base * MIN_QUADRATURE_INTERVALS.div_ceil(base);
    let step = tf / intervals as f64;
    let weights = simpson_weights(intervals, step);
    let propagate = expm(&(step * m), EXPM_TOL)?;
    let mut g = forcing.clone();
    let mut acc = Vector::zeros(forcing.len());
    for k in (0..=intervals).rev() {
        let t = grid_time(0.0, tf, intervals, k);
        acc += (weights[k] * z.value(t)) * &g;
        if k > 0 {
            g = &propagate * g;
        }
    }
    Ok(acc)
}

pub(crate) fn check_horizon(p: &GbcsParams, z: &Signal) -> Result<()> {
    if (z.horizon() - p.horizon).abs() > 1e-12 * p.horizon.max(1.0) {
        return Err(GbcsError::Dimension(format!(
            "input sampled on [0, {}] but horizon is {}",
            z.horizon(),
            p.horizon
        )));
    }
    Ok(())
}

/// Initial augmented state `(X(0); Ψ(0))` of the equilibrium in the
/// convention of the augmented system, with the regulator input `z`
/// entering through `B̃`.
pub fn equilibrium_initial_state(p: &GbcsParams, x0: &Vector, z: &Signal) -> Result<Vector> {
    let sol = solve_bvp_forced(p, x0, &p.b_tilde, z)?;
    let mut y0 = flip_costates(&sol.y0, p.n());
    // The state part is known exactly; drop the round-off of e^{-MT} w.
    y0.rows_mut(0, p.n()).copy_from(x0);
    Ok(y0)
}
