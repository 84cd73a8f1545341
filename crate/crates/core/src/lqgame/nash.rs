use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{GbcsError, Result};
use crate::linalg::{rk4_integrate, Vector};

use super::assemble::assemble_augmented;
use super::bvp::{check_horizon, equilibrium_initial_state};
use super::cost::{cost_from_samples, Quadrature};
use super::params::GbcsParams;
use super::signal::Signal;
use super::simulate::actions_at;

/// Smallest cost change still accepted as "no improvement".
pub const NASH_TOLERANCE: f64 = 1.0e-6;
const HARMONICS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NashCheckConfig {
    pub trials: usize,
    pub eps: f64,
    pub steps: usize,
    pub seed: u64,
}

impl Default for NashCheckConfig {
    fn default() -> Self {
        NashCheckConfig {
            trials: 20,
            eps: 1.0e-2,
            steps: 400,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NashReport {
    pub seed: u64,
    pub eps: f64,
    pub trials: usize,
    pub steps: usize,
    /// Equilibrium cost of each player.
    pub equilibrium_costs: Vec<f64>,
    /// `delta[i][k]`: cost change of player `i` under perturbation `k`.
    pub delta: Vec<Vec<f64>>,
    pub min_delta: f64,
    pub certified: bool,
}

/// Random smooth perturbation `a_0 + Σ a_k cos(2πkt/T) + b_k sin(2πkt/T)`.
#[derive(Debug, Clone)]
pub struct Perturbation {
    horizon: f64,
    coeffs: [f64; 2 * HARMONICS + 1],
}

impl Perturbation {
    pub fn random(rng: &mut impl Rng, horizon: f64) -> Self {
        let mut coeffs = [0.0; 2 * HARMONICS + 1];
        for c in &mut coeffs {
            *c = rng.random_range(-1.0..1.0);
        }
        Perturbation { horizon, coeffs }
    }

    pub fn value(&self, t: f64) -> f64 {
        let w = 2.0 * PI * t / self.horizon;
        let mut v = self.coeffs[0];
        for k in 1..=HARMONICS {
            let kw = k as f64 * w;
            v += self.coeffs[2 * k - 1] * kw.cos() + self.coeffs[2 * k] * kw.sin();
        }
        v
    }
}

/// Cost of player `i` when it adds `eps·π(t)` to its equilibrium action and
/// every other player keeps its equilibrium action.
fn deviation_cost(
    p: &GbcsParams,
    y0: &Vector,
    x0: &Vector,
    z: &Signal,
    i: usize,
    eps: f64,
    pi: &Perturbation,
    steps: usize,
) -> Result<f64> {
    let n = p.n();
    let sys = assemble_augmented(p);
    let dim = sys.dim();
    let mut start = Vector::zeros(dim + n);
    start.rows_mut(0, dim).copy_from(y0);
    start.rows_mut(dim, n).copy_from(x0);
    let rhs = |t: f64, s: &Vector| {
        let y = s.rows(0, dim).into_owned();
        let x = s.rows(dim, n).into_owned();
        let zt = z.value(t);
        let mut actions = actions_at(p, &y);
        actions[i] += eps * pi.value(t);
        let mut out = Vector::zeros(dim + n);
        out.rows_mut(0, dim)
            .copy_from(&(&sys.a_bar * &y + &sys.b_bar * zt));
        let mut dx = &p.a_tilde * &x + &p.b_tilde * zt;
        for (j, a) in actions.iter().enumerate() {
            dx += &p.b_vectors[j] * *a;
        }
        out.rows_mut(dim, n).copy_from(&dx);
        out
    };
    let path = rk4_integrate(rhs, &start, 0.0, p.horizon, steps)?;
    let states: Vec<Vector> = path
        .states
        .iter()
        .map(|s| s.rows(dim, n).into_owned())
        .collect();
    let own: Vec<f64> = path
        .times
        .iter()
        .zip(&path.states)
        .map(|(&t, s)| {
            let y = s.rows(0, dim).into_owned();
            actions_at(p, &y)[i] + eps * pi.value(t)
        })
        .collect();
    cost_from_samples(p, i, &path.times, &states, &own, Quadrature::Simpson)
}

/// Unilateral-deviation test of the computed equilibrium: every player, many
/// random perturbations, verdict from the worst cost change.
pub fn nash_deviation_check(
    p: &GbcsParams,
    x0: &Vector,
    z: &Signal,
    config: &NashCheckConfig,
) -> Result<NashReport> {
    if config.trials == 0 {
        return Err(GbcsError::InvalidArgument("need at least one trial".into()));
    }
    if !(config.eps >= 0.0 && config.eps.is_finite()) {
        return Err(GbcsError::InvalidArgument(
            "eps must be a nonnegative number".into(),
        ));
    }
    if config.steps < 10 {
        return Err(GbcsError::InvalidArgument(
            "nash check needs at least 10 steps".into(),
        ));
    }
    check_horizon(p, z)?;
    let y0 = equilibrium_initial_state(p, x0, z)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let zero = Perturbation {
        horizon: p.horizon,
        coeffs: [0.0; 2 * HARMONICS + 1],
    };
    let mut equilibrium_costs = Vec::with_capacity(p.players());
    let mut delta = Vec::with_capacity(p.players());
    for i in 0..p.players() {
        let base = deviation_cost(p, &y0, x0, z, i, 0.0, &zero, config.steps)?;
        equilibrium_costs.push(base);
        let mut row = Vec::with_capacity(config.trials);
        for _ in 0..config.trials {
            let pi = Perturbation::random(&mut rng, p.horizon);
            let j = deviation_cost(p, &y0, x0, z, i, config.eps, &pi, config.steps)?;
            row.push(j - base);
        }
        delta.push(row);
    }
    let min_delta = delta
        .iter()
        .flatten()
        .copied()
        .fold(f64::INFINITY, f64::min);
    Ok(NashReport {
        seed: config.seed,
        eps: config.eps,
        trials: config.trials,
        steps: config.steps,
        equilibrium_costs,
        delta,
        min_delta,
        certified: min_delta >= -NASH_TOLERANCE,
    })
}
