//! Dense linear algebra and ODE plumbing.
//!
//! Storage, products, LU and SVD come from `nalgebra`. The matrix exponential,
//! the rank rule and the fixed-step integrator live here because their exact
//! behaviour (thresholds, grids, error reporting) is part of the contract the
//! rest of the crate relies on.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{GbcsError, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Condition estimate above which `solve_linear` refuses to answer.
pub const SINGULAR_CONDITION: f64 = 1.0e12;

/// Builds a matrix from row vectors, rejecting ragged, empty or non-finite input.
pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 {
        return Err(GbcsError::Dimension(
            "matrix must have positive dimensions".into(),
        ));
    }
    if let Some(bad) = rows.iter().position(|r| r.len() != ncols) {
        return Err(GbcsError::Dimension(format!(
            "row {bad} has {} entries, expected {ncols}",
            rows[bad].len()
        )));
    }
    let m = Matrix::from_fn(nrows, ncols, |i, j| rows[i][j]);
    ensure_finite(&m, "matrix_from_rows")?;
    Ok(m)
}

pub fn matrix_to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn ensure_finite(m: &Matrix, what: &str) -> Result<()> {
    match m.iter().position(|v| !v.is_finite()) {
        None => Ok(()),
        Some(k) => Err(GbcsError::NonFinite(format!(
            "{what}: entry ({}, {})",
            k % m.nrows(),
            k / m.nrows()
        ))),
    }
}

fn ensure_square(m: &Matrix) -> Result<()> {
    if m.nrows() == m.ncols() {
        Ok(())
    } else {
        Err(GbcsError::NonSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        })
    }
}

// ---------------------------------------------------------------------------
// Matrix exponential
// ---------------------------------------------------------------------------

// Backward-error bounds for the [m/m] Padé approximants at unit roundoff.
const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 2.539398330063230e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068;
const THETA_13: f64 = 5.371920351148152;

const PADE_3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE_5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE_7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE_9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE_13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

fn norm_1(m: &Matrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Odd/even split (U, V) of a low-order Padé approximant, so that
/// r(A) = (V - U)^{-1} (V + U).
fn pade_low(a: &Matrix, b: &[f64]) -> (Matrix, Matrix) {
    let n = a.nrows();
    let ident = Matrix::identity(n, n);
    let a2 = a * a;
    let mut power = ident.clone();
    let mut odd = Matrix::zeros(n, n);
    let mut even = Matrix::zeros(n, n);
    for k in 0..b.len() / 2 {
        odd += b[2 * k + 1] * &power;
        even += b[2 * k] * &power;
        power = &power * &a2;
    }
    (a * odd, even)
}

fn pade_13(a: &Matrix) -> (Matrix, Matrix) {
    let b = &PADE_13;
    let n = a.nrows();
    let ident = Matrix::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = b[13] * &a6 + b[11] * &a4 + b[9] * &a2;
    let u = a * (&a6 * inner_u + b[7] * &a6 + b[5] * &a4 + b[3] * &a2 + b[1] * &ident);
    let inner_v = b[12] * &a6 + b[10] * &a4 + b[8] * &a2;
    let v = &a6 * inner_v + b[6] * &a6 + b[4] * &a4 + b[2] * &a2 + b[0] * &ident;
    (u, v)
}

/// Matrix exponential by scaling and squaring with a diagonal Padé approximant
/// (degree 3 to 13 selected from the 1-norm).
///
/// The selection targets unit-roundoff backward error, which meets any
/// requested `tol` in (0, 1e-4].
pub fn expm(a: &Matrix, tol: f64) -> Result<Matrix> {
    ensure_square(a)?;
    if !(tol > 0.0 && tol <= 1.0e-4) {
        return Err(GbcsError::InvalidArgument(format!(
            "expm tolerance {tol} outside (0, 1e-4]"
        )));
    }
    ensure_finite(a, "expm input")?;
    let norm = norm_1(a);
    let (u, v, squarings) = if norm <= THETA_3 {
        let (u, v) = pade_low(a, &PADE_3);
        (u, v, 0)
    } else if norm <= THETA_5 {
        let (u, v) = pade_low(a, &PADE_5);
        (u, v, 0)
    } else if norm <= THETA_7 {
        let (u, v) = pade_low(a, &PADE_7);
        (u, v, 0)
    } else if norm <= THETA_9 {
        let (u, v) = pade_low(a, &PADE_9);
        (u, v, 0)
    } else {
        let s = (norm / THETA_13).log2().ceil().max(0.0);
        if s > 1000.0 {
            return Err(GbcsError::Numeric(format!(
                "expm: norm {norm:.3e} too large to scale"
            )));
        }
        let s = s as i32;
        let scaled = a * 2f64.powi(-s);
        let (u, v) = pade_13(&scaled);
        (u, v, s as u32)
    };
    let numer = &v + &u;
    let denom = &v - &u;
    let mut result = denom
        .lu()
        .solve(&numer)
        .ok_or_else(|| GbcsError::Numeric("expm: Padé denominator is singular".into()))?;
    for _ in 0..squarings {
        result = &result * &result;
    }
    ensure_finite(&result, "expm result (overflow)")
        .map_err(|e| GbcsError::Numeric(e.to_string()))?;
    Ok(result)
}

// ---------------------------------------------------------------------------
// Rank
// ---------------------------------------------------------------------------

/// Singular-value threshold rule for numerical rank.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum RankTol {
    /// `sigma_max * max(rows, cols) * 1e-12`
    #[default]
    Auto,
    Absolute(f64),
}

impl RankTol {
    pub fn threshold(&self, sigma_max: f64, rows: usize, cols: usize) -> f64 {
        match *self {
            RankTol::Auto => sigma_max * rows.max(cols) as f64 * 1.0e-12,
            RankTol::Absolute(t) => t,
        }
    }
}

impl fmt::Display for RankTol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RankTol::Auto => f.write_str("auto"),
            RankTol::Absolute(t) => write!(f, "{t:e}"),
        }
    }
}

impl FromStr for RankTol {
    type Err = GbcsError;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(RankTol::Auto);
        }
        match s.parse::<f64>() {
            Ok(t) if t.is_finite() && t >= 0.0 => Ok(RankTol::Absolute(t)),
            _ => Err(GbcsError::InvalidArgument(format!(
                "rank tolerance must be 'auto' or a nonnegative number, got '{s}'"
            ))),
        }
    }
}

pub fn singular_values(a: &Matrix) -> Vector {
    a.clone().svd(false, false).singular_values
}

/// Numerical rank together with the threshold that decided it.
pub fn rank_with_threshold(a: &Matrix, tol: RankTol) -> (usize, f64) {
    if a.is_empty() {
        return (0, 0.0);
    }
    let sv = singular_values(a);
    let sigma_max = sv.iter().copied().fold(0.0, f64::max);
    let threshold = tol.threshold(sigma_max, a.nrows(), a.ncols());
    (sv.iter().filter(|&&s| s > threshold).count(), threshold)
}

pub fn rank(a: &Matrix, tol: RankTol) -> usize {
    rank_with_threshold(a, tol).0
}

/// Copy of `a` with every nonzero column scaled to unit Euclidean norm.
/// Zero columns are left as they are. Rank is unchanged in exact arithmetic.
pub fn normalize_columns(a: &Matrix) -> Matrix {
    let mut out = a.clone();
    for mut col in out.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Linear solve
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct Solution {
    pub x: Matrix,
    /// 2-norm condition number of the coefficient matrix.
    pub condition: f64,
}

pub fn condition_number(a: &Matrix) -> f64 {
    let sv = singular_values(a);
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Solves `a x = b` by LU with partial pivoting.
pub fn solve_linear(a: &Matrix, b: &Matrix) -> Result<Solution> {
    ensure_square(a)?;
    if b.nrows() != a.nrows() {
        return Err(GbcsError::Dimension(format!(
            "right-hand side has {} rows, expected {}",
            b.nrows(),
            a.nrows()
        )));
    }
    ensure_finite(a, "solve_linear matrix")?;
    ensure_finite(b, "solve_linear right-hand side")?;
    let condition = condition_number(a);
    if !(condition <= SINGULAR_CONDITION) {
        return Err(GbcsError::Singular { condition });
    }
    let x = a
        .clone()
        .lu()
        .solve(b)
        .ok_or(GbcsError::Singular { condition })?;
    Ok(Solution { x, condition })
}

// ---------------------------------------------------------------------------
// Blocks
// ---------------------------------------------------------------------------

/// Square block `(bi, bj)` of size `size` (0-based block indices).
pub fn block(m: &Matrix, bi: usize, bj: usize, size: usize) -> Matrix {
    m.view((bi * size, bj * size), (size, size)).into_owned()
}

pub fn set_block(m: &mut Matrix, bi: usize, bj: usize, value: &Matrix) {
    let (r, c) = value.shape();
    m.view_mut((bi * r, bj * c), (r, c)).copy_from(value);
}

// ---------------------------------------------------------------------------
// Integration and quadrature
// ---------------------------------------------------------------------------

/// Uniformly sampled solution of an ODE.
#[derive(Debug, Clone)]
pub struct Path {
    pub times: Vec<f64>,
    pub states: Vec<Vector>,
}

/// Node `k` of the uniform grid with `steps` intervals from `t0` to `t1`.
/// Both endpoints are hit exactly.
pub fn grid_time(t0: f64, t1: f64, steps: usize, k: usize) -> f64 {
    if k == steps {
        t1
    } else {
        t0 + (t1 - t0) * (k as f64 / steps as f64)
    }
}

/// Classical fourth-order Runge–Kutta on a uniform grid. `t1 < t0` integrates
/// backwards. Returns `steps + 1` samples including both endpoints.
pub fn rk4_integrate<F>(mut f: F, y0: &Vector, t0: f64, t1: f64, steps: usize) -> Result<Path>
where
    F: FnMut(f64, &Vector) -> Vector,
{
    if steps == 0 {
        return Err(GbcsError::InvalidArgument(
            "rk4 needs at least one step".into(),
        ));
    }
    let h = (t1 - t0) / steps as f64;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(t0);
    states.push(y0.clone());
    let mut y = y0.clone();
    for k in 0..steps {
        let t = grid_time(t0, t1, steps, k);
        let k1 = f(t, &y);
        let k2 = f(t + 0.5 * h, &(&y + (0.5 * h) * &k1));
        let k3 = f(t + 0.5 * h, &(&y + (0.5 * h) * &k2));
        let k4 = f(t + h, &(&y + h * &k3));
        y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(GbcsError::Numeric(format!(
                "rk4 produced a non-finite state at step {} (t = {})",
                k + 1,
                grid_time(t0, t1, steps, k + 1)
            )));
        }
        times.push(grid_time(t0, t1, steps, k + 1));
        states.push(y.clone());
    }
    Ok(Path { times, states })
}

/// Composite quadrature weights on `intervals` uniform intervals of width `h`:
/// Simpson's rule, with a 3/8 panel at the end when the count is odd and the
/// trapezoid rule for a single interval.
pub fn simpson_weights(intervals: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; intervals + 1];
    match intervals {
        0 => {}
        1 => {
            w[0] = 0.5 * h;
            w[1] = 0.5 * h;
        }
        _ => {
            let simpson_end = if intervals % 2 == 0 {
                intervals
            } else {
                intervals - 3
            };
            let mut k = 0;
            while k < simpson_end {
                w[k] += h / 3.0;
                w[k + 1] += 4.0 * h / 3.0;
                w[k + 2] += h / 3.0;
                k += 2;
            }
            if simpson_end < intervals {
                let c = 3.0 * h / 8.0;
                w[simpson_end] += c;
                w[simpson_end + 1] += 3.0 * c;
                w[simpson_end + 2] += 3.0 * c;
                w[simpson_end + 3] += c;
            }
        }
    }
    w
}

pub fn trapezoid_weights(intervals: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; intervals + 1];
    w[0] = 0.5 * h;
    w[intervals] = 0.5 * h;
    w
}
