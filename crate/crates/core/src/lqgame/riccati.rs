use crate::error::{GbcsError, Result};
use crate::linalg::{grid_time, Matrix};

use super::params::GbcsParams;

const ESCAPE_BOUND: f64 = 1.0e12;

/// Sampled solutions `K_i(t)` of the per-player Riccati equations, one per
/// player, on a uniform grid from 0 to the horizon.
#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    pub times: Vec<f64>,
    /// `k[i][j]` is player `i` at `times[j]`.
    pub k: Vec<Vec<Matrix>>,
    /// Largest asymmetry removed by the per-step symmetrisation.
    pub max_asymmetry: f64,
}

impl RiccatiSolution {
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn at_start(&self, player: usize) -> &Matrix {
        &self.k[player][0]
    }
}

/// `dK/dt = -Ã^T K - K Ã + K S_i K - Q_i` for player `i`.
pub fn riccati_rhs(p: &GbcsParams, i: usize, k: &Matrix) -> Matrix {
    riccati_rhs_with(&p.a_tilde, &p.coupling(i), &p.q[i], k)
}

fn riccati_rhs_with(a: &Matrix, s: &Matrix, q: &Matrix, k: &Matrix) -> Matrix {
    -a.transpose() * k - k * a + k * s * k - q
}

fn symmetrize(k: &mut Matrix) -> f64 {
    let asym = (&*k - k.transpose()).amax();
    let sym = 0.5 * (&*k + k.transpose());
    *k = sym;
    asym
}

/// Integrates every player's equation backwards from `K_i(T) = Q̃_iT` with
/// classical RK4, symmetrising after each step.
pub fn riccati_solve(p: &GbcsParams, steps: usize) -> Result<RiccatiSolution> {
    if steps < 10 {
        return Err(GbcsError::InvalidArgument(format!(
            "riccati needs at least 10 steps, got {steps}"
        )));
    }
    let tf = p.horizon;
    let times: Vec<f64> = (0..=steps).map(|k| grid_time(0.0, tf, steps, k)).collect();
    let h = -tf / steps as f64;
    let mut all = Vec::with_capacity(p.players());
    let mut max_asymmetry = 0.0f64;
    for i in 0..p.players() {
        let s = p.coupling(i);
        let f = |k: &Matrix| riccati_rhs_with(&p.a_tilde, &s, &p.q[i], k);
        let mut samples = vec![Matrix::zeros(p.n(), p.n()); steps + 1];
        let mut k = p.q_terminal[i].clone();
        samples[steps] = k.clone();
        for j in (0..steps).rev() {
            let k1 = f(&k);
            let k2 = f(&(&k + (0.5 * h) * &k1));
            let k3 = f(&(&k + (0.5 * h) * &k2));
            let k4 = f(&(&k + h * &k3));
            k += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if k.iter().any(|v| !(v.abs() <= ESCAPE_BOUND)) {
                return Err(GbcsError::FiniteEscape { time: times[j] });
            }
            max_asymmetry = max_asymmetry.max(symmetrize(&mut k));
            samples[j] = k.clone();
        }
        all.push(samples);
    }
    Ok(RiccatiSolution {
        times,
        k: all,
        max_asymmetry,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Vector;
    use crate::lqgame::{default_params, ParamOverrides};
    use crate::topology::Topology;

    fn h1() -> GbcsParams {
        default_params(&Topology::new(1, []).unwrap(), &ParamOverrides::default()).unwrap()
    }

    #[test]
    fn zero_weights_stay_zero() {
        let mut p = h1();
        p.q = vec![Matrix::zeros(2, 2)];
        p.q_terminal = vec![Matrix::zeros(2, 2)];
        let sol = riccati_solve(&p, 20).unwrap();
        assert!(sol.k[0].iter().all(|k| k.amax() == 0.0));
    }

    #[test]
    fn scalar_linear_case() {
        // n = 1 surrogate: Ã = 0, S = 0, Q = 1, K(1) = 0 gives K(0) = 1.
        let a = Matrix::zeros(1, 1);
        let s = Matrix::zeros(1, 1);
        let q = Matrix::identity(1, 1);
        let f = |k: &Matrix| riccati_rhs_with(&a, &s, &q, k);
        let mut k = Matrix::zeros(1, 1);
        let h = -0.1;
        for _ in 0..10 {
            let k1 = f(&k);
            let k2 = f(&(&k + (0.5 * h) * &k1));
            let k3 = f(&(&k + (0.5 * h) * &k2));
            let k4 = f(&(&k + h * &k3));
            k += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        assert!((k[(0, 0)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn terminal_value_exact() {
        let mut p = h1();
        p.q_terminal[0] = Matrix::from_row_slice(2, 2, &[0.3, 0.1, 0.1, 0.7]);
        let sol = riccati_solve(&p, 40).unwrap();
        assert_eq!(sol.k[0][40], p.q_terminal[0]);
        assert_eq!(sol.times[40], 1.0);
        assert_eq!(sol.times[0], 0.0);
    }

    #[test]
    fn self_convergence() {
        let p = h1();
        let a = riccati_solve(&p, 200).unwrap();
        let b = riccati_solve(&p, 400).unwrap();
        assert!((a.at_start(0) - b.at_start(0)).amax() < 1e-8);
        assert!(a.max_asymmetry <= 1e-9);
    }

    #[test]
    fn finite_escape_reported() {
        let mut p = h1();
        // C = -2B̃_1 makes the quadratic term destabilising.
        p.c = Vector::from_vec(vec![-2.0, -2.0]);
        p.q_terminal[0] = 50.0 * Matrix::identity(2, 2);
        p.horizon = 5.0;
        match riccati_solve(&p, 200) {
            Err(GbcsError::FiniteEscape { time }) => assert!(time > 0.0 && time < 5.0),
            other => panic!("expected escape, got {other:?}"),
        }
    }

    #[test]
    fn too_few_steps() {
        assert!(riccati_solve(&h1(), 5).is_err());
    }
}
