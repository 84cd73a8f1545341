//! Game-based control systems on regulator-plus-agents graphs: strategy
//! matrices and partitions, the linear-quadratic game layer, and
//! controllability tests for the augmented state/costate system.

pub mod controllability;
pub mod error;
pub mod linalg;
pub mod lqgame;
pub mod scan;
pub mod strategy;
pub mod topology;

pub use controllability::{analyze, ControllabilityReport, Tolerances};
pub use error::{GbcsError, Result};
pub use linalg::{Matrix, RankTol, Vector};
pub use lqgame::{default_params, GbcsParams, ParamOverrides, Signal};
pub use scan::{conjecture_scan, Classification, ScanConfig, ScanRecord};
pub use strategy::{coarsest_sep, strategy_matrix, Partition, StrategyMatrix};
pub use topology::Topology;
