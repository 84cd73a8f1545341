use std::fmt::Write as _;

use crate::error::{GbcsError, Result};
use crate::linalg::{rk4_integrate, Path, Vector};

use super::assemble::{assemble_augmented, AugmentedSystem};
use super::bvp::{check_horizon, equilibrium_initial_state};
use super::params::GbcsParams;
use super::signal::Signal;

/// Sampled equilibrium run of the augmented system.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub n: usize,
    pub players: usize,
    pub times: Vec<f64>,
    /// `(X; Ψ_1; …; Ψ_H)` at each node.
    pub states: Vec<Vector>,
    /// Regulator input at each node.
    pub u: Vec<f64>,
    /// `actions[k][i]` is player `i`'s action at node `k`.
    pub actions: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn state(&self, k: usize) -> Vector {
        self.states[k].rows(0, self.n).into_owned()
    }

    pub fn costate(&self, k: usize, player: usize) -> Vector {
        self.states[k]
            .rows(self.n * (player + 1), self.n)
            .into_owned()
    }

    pub fn csv_header(&self) -> String {
        let mut cols = vec!["t".to_string(), "x_r".to_string()];
        cols.extend((1..=self.players).map(|j| format!("x_{j}")));
        for i in 1..=self.players {
            cols.push(format!("psi{i}_r"));
            cols.extend((1..=self.players).map(|j| format!("psi{i}_{j}")));
        }
        cols.push("u".to_string());
        cols.extend((1..=self.players).map(|i| format!("u_{i}")));
        cols.join(",")
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.csv_header();
        out.push('\n');
        for k in 0..self.times.len() {
            let mut row = vec![self.times[k]];
            row.extend(self.states[k].iter().copied());
            row.push(self.u[k]);
            row.extend(self.actions[k].iter().copied());
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.15e}")).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

/// Forward RK4 of `Ẏ = Ā Y + B̄ u(t)` over `[0, horizon]`.
pub fn integrate_augmented(
    sys: &AugmentedSystem,
    y0: &Vector,
    u: &Signal,
    horizon: f64,
    steps: usize,
) -> Result<Path> {
    if y0.len() != sys.dim() {
        return Err(GbcsError::Dimension(format!(
            "augmented state needs length {}, got {}",
            sys.dim(),
            y0.len()
        )));
    }
    rk4_integrate(
        |t, y| &sys.a_bar * y + &sys.b_bar * u.value(t),
        y0,
        0.0,
        horizon,
        steps,
    )
}

/// Nash action of every player from a stacked augmented state.
pub fn actions_at(p: &GbcsParams, y: &Vector) -> Vec<f64> {
    let n = p.n();
    (0..p.players())
        .map(|i| p.action_gain(i).dot(&y.rows(n * (i + 1), n)))
        .collect()
}

pub fn trajectory_from_path(p: &GbcsParams, path: Path, u: &Signal) -> Trajectory {
    let actions = path.states.iter().map(|y| actions_at(p, y)).collect();
    let inputs = path.times.iter().map(|&t| u.value(t)).collect();
    Trajectory {
        n: p.n(),
        players: p.players(),
        times: path.times,
        states: path.states,
        u: inputs,
        actions,
    }
}

/// Equilibrium trajectory from `x0` under regulator input `u`; initial
/// costates come from the boundary value problem.
pub fn simulate(p: &GbcsParams, x0: &Vector, u: &Signal, steps: usize) -> Result<Trajectory> {
    if steps < 10 {
        return Err(GbcsError::InvalidArgument(format!(
            "simulation needs at least 10 steps, got {steps}"
        )));
    }
    check_horizon(p, u)?;
    let y0 = equilibrium_initial_state(p, x0, u)?;
    let sys = assemble_augmented(p);
    let path = integrate_augmented(&sys, &y0, u, p.horizon, steps)?;
    Ok(trajectory_from_path(p, path, u))
}
