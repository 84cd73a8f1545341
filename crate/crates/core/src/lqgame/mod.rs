//! Linear-quadratic game layer: parameters, the augmented state/costate
//! system, Riccati equations, the equilibrium boundary value problem,
//! simulation, costs and a unilateral-deviation Nash check.

mod assemble;
mod bvp;
mod cost;
mod nash;
mod params;
mod riccati;
mod signal;
mod simulate;

pub use assemble::{assemble_augmented, assemble_m, flip_costates, AugmentedSystem, GameMatrixM};
pub use bvp::{
    equilibrium_initial_state, h_matrix, solve_bvp, solve_bvp_forced, BvpSolution, HMatrix,
};
pub use cost::{cost, cost_from_samples, cost_with, Quadrature};
pub use nash::{nash_deviation_check, NashCheckConfig, NashReport, Perturbation, NASH_TOLERANCE};
pub use params::{
    check_matches_topology, default_params, GbcsParams, ParamOverrides, ParamsEcho,
    PerPlayerMatrix, PerPlayerScalar,
};
pub use riccati::{riccati_rhs, riccati_solve, RiccatiSolution};
pub use signal::Signal;
pub use simulate::{actions_at, integrate_augmented, simulate, trajectory_from_path, Trajectory};

pub(crate) use bvp::EXPM_TOL;
