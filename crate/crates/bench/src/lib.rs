//! Inputs shared by the criterion benchmarks under `benches/`.

use gbcs_core::lqgame::{default_params, ParamOverrides};
use gbcs_core::{GbcsParams, Topology};

/// Path graph 1-2-…-h.
pub fn path(h: usize) -> Topology {
    Topology::new(h, (1..h).map(|i| (i, i + 1))).expect("path graph")
}

/// Star centred on agent 1.
pub fn star(h: usize) -> Topology {
    Topology::new(h, (2..=h).map(|i| (1, i))).expect("star graph")
}

pub fn defaults(top: &Topology) -> GbcsParams {
    default_params(top, &ParamOverrides::default()).expect("default parameters")
}
