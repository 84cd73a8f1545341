use crate::error::{GbcsError, Result};
use crate::linalg::{simpson_weights, trapezoid_weights, Vector};

use super::params::GbcsParams;
use super::simulate::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Quadrature {
    #[default]
    Simpson,
    Trapezoid,
}

/// `½∫(XᵀQ_iX + R_i u_i²)dt + ½X(T)ᵀQ̃_iT X(T)` for player `i` (0-based).
pub fn cost(p: &GbcsParams, traj: &Trajectory, i: usize) -> Result<f64> {
    cost_with(p, traj, i, Quadrature::Simpson)
}

pub fn cost_with(p: &GbcsParams, traj: &Trajectory, i: usize, rule: Quadrature) -> Result<f64> {
    if traj.n != p.n() || traj.players != p.players() {
        return Err(GbcsError::Dimension(
            "trajectory does not match parameters".into(),
        ));
    }
    let states: Vec<Vector> = (0..traj.times.len()).map(|k| traj.state(k)).collect();
    let actions: Vec<f64> = traj.actions.iter().map(|a| a[i]).collect();
    cost_from_samples(p, i, &traj.times, &states, &actions, rule)
}

/// Cost of player `i` from sampled states and own actions on a uniform grid.
pub fn cost_from_samples(
    p: &GbcsParams,
    i: usize,
    times: &[f64],
    states: &[Vector],
    actions: &[f64],
    rule: Quadrature,
) -> Result<f64> {
    if i >= p.players() {
        return Err(GbcsError::IndexOutOfRange {
            index: i + 1,
            max: p.players(),
        });
    }
    if times.len() < 2 || states.len() != times.len() || actions.len() != times.len() {
        return Err(GbcsError::Dimension(
            "cost samples do not share one grid".into(),
        ));
    }
    let intervals = times.len() - 1;
    let h = (times[intervals] - times[0]) / intervals as f64;
    let uniform = times
        .windows(2)
        .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.abs().max(1.0));
    if !uniform || !(h > 0.0) {
        return Err(GbcsError::Dimension(
            "cost needs a uniform increasing grid".into(),
        ));
    }
    let weights = match rule {
        Quadrature::Simpson => simpson_weights(intervals, h),
        Quadrature::Trapezoid => trapezoid_weights(intervals, h),
    };
    let q = &p.q[i];
    let r = p.r[i];
    let running: f64 = weights
        .iter()
        .zip(states.iter().zip(actions))
        .map(|(w, (x, u))| w * (x.dot(&(q * x)) + r * u * u))
        .sum();
    let xt = &states[intervals];
    let terminal = xt.dot(&(&p.q_terminal[i] * xt));
    Ok(0.5 * (running + terminal))
}
