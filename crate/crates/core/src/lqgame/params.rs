use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{GbcsError, Result};
use crate::linalg::{matrix_from_rows, matrix_to_rows, Matrix, Vector};
use crate::topology::{strategy_vector, Topology};

const SYMMETRY_TOL: f64 = 1.0e-12;

/// Data of a scalar-per-node game-based control system with `H` agents.
/// Every vector and matrix has dimension `n = H + 1`, regulator first.
#[derive(Debug, Clone, PartialEq)]
pub struct GbcsParams {
    /// `Ã`, the coupled state matrix.
    pub a_tilde: Matrix,
    /// Strategy column of each agent (`B̃_i`).
    pub b_vectors: Vec<Vector>,
    /// Regulator input column (`B̃`).
    pub b_tilde: Vector,
    pub c: Vector,
    /// Running state weight of each player.
    pub q: Vec<Matrix>,
    /// Terminal state weight of each player.
    pub q_terminal: Vec<Matrix>,
    /// Scalar control weight of each player.
    pub r: Vec<f64>,
    pub horizon: f64,
}

impl GbcsParams {
    pub fn players(&self) -> usize {
        self.b_vectors.len()
    }

    /// State dimension `H + 1`.
    pub fn n(&self) -> usize {
        self.a_tilde.nrows()
    }

    /// `B̃_i R_i^{-1} (B̃_i + C)^T` for player `i` (0-based).
    pub fn coupling(&self, i: usize) -> Matrix {
        let lhs = &self.b_vectors[i] / self.r[i];
        let rhs = &self.b_vectors[i] + &self.c;
        lhs * rhs.transpose()
    }

    /// Action gain row `R_i^{-1} (B̃_i + C)^T`, applied to a costate.
    pub fn action_gain(&self, i: usize) -> Vector {
        (&self.b_vectors[i] + &self.c) / self.r[i]
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        let h = self.players();
        if n == 0 || self.a_tilde.ncols() != n {
            return Err(GbcsError::Dimension("Ã must be square and nonempty".into()));
        }
        if n != h + 1 {
            return Err(GbcsError::Dimension(format!(
                "state dimension {n} does not match {h} players plus regulator"
            )));
        }
        if self.q.len() != h || self.q_terminal.len() != h || self.r.len() != h {
            return Err(GbcsError::Dimension(
                "need one Q, terminal Q and R per player".into(),
            ));
        }
        let vectors = self.b_vectors.iter().chain([&self.b_tilde, &self.c]);
        if vectors.clone().any(|v| v.len() != n) {
            return Err(GbcsError::Dimension(format!(
                "all columns must have length {n}"
            )));
        }
        for (label, mats) in [("Q", &self.q), ("terminal Q", &self.q_terminal)] {
            for (i, m) in mats.iter().enumerate() {
                if m.shape() != (n, n) {
                    return Err(GbcsError::Dimension(format!(
                        "{label} of player {} must be {n}x{n}",
                        i + 1
                    )));
                }
                let asym = (m - m.transpose()).amax();
                if asym > SYMMETRY_TOL {
                    return Err(GbcsError::InvalidArgument(format!(
                        "{label} of player {} is not symmetric (deviation {asym:.3e})",
                        i + 1
                    )));
                }
            }
        }
        if let Some(i) = self.r.iter().position(|&r| !(r > 0.0 && r.is_finite())) {
            return Err(GbcsError::InvalidArgument(format!(
                "R of player {} must be positive",
                i + 1
            )));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(GbcsError::InvalidArgument(
                "horizon must be positive".into(),
            ));
        }
        let finite = self.a_tilde.iter().all(|v| v.is_finite())
            && vectors.flat_map(|v| v.iter()).all(|v| v.is_finite())
            && self
                .q
                .iter()
                .chain(&self.q_terminal)
                .flat_map(|m| m.iter())
                .all(|v| v.is_finite());
        if !finite {
            return Err(GbcsError::NonFinite("game parameters".into()));
        }
        Ok(())
    }

    /// Short stable fingerprint of every parameter value.
    pub fn digest(&self) -> String {
        let echo = self.echo();
        let bytes = serde_json::to_vec(&echo).expect("params serialise");
        let hash = Sha256::digest(&bytes);
        hex::encode(&hash[..8])
    }

    /// Plain-data copy suitable for reports.
    pub fn echo(&self) -> ParamsEcho {
        ParamsEcho {
            a_tilde: matrix_to_rows(&self.a_tilde),
            b_vectors: self
                .b_vectors
                .iter()
                .map(|v| v.iter().copied().collect())
                .collect(),
            b_tilde: self.b_tilde.iter().copied().collect(),
            c: self.c.iter().copied().collect(),
            q: self.q.iter().map(matrix_to_rows).collect(),
            q_terminal: self.q_terminal.iter().map(matrix_to_rows).collect(),
            r: self.r.clone(),
            horizon: self.horizon,
        }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ParamsEcho {
    pub a_tilde: Vec<Vec<f64>>,
    pub b_vectors: Vec<Vec<f64>>,
    pub b_tilde: Vec<f64>,
    pub c: Vec<f64>,
    pub q: Vec<Vec<Vec<f64>>>,
    pub q_terminal: Vec<Vec<Vec<f64>>>,
    pub r: Vec<f64>,
    pub horizon: f64,
}

/// A matrix given once for every player, or one per player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerPlayerMatrix {
    Shared(Vec<Vec<f64>>),
    Each(Vec<Vec<Vec<f64>>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerPlayerScalar {
    Shared(f64),
    Each(Vec<f64>),
}

/// Optional replacements for the default game data. Reads from JSON such as
/// `{"horizon": 2.0, "q": [[...]], "r": [1.0, 2.0]}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamOverrides {
    pub horizon: Option<f64>,
    pub a_tilde: Option<Vec<Vec<f64>>>,
    pub b_tilde: Option<Vec<f64>>,
    pub c: Option<Vec<f64>>,
    pub q: Option<PerPlayerMatrix>,
    pub q_terminal: Option<PerPlayerMatrix>,
    pub r: Option<PerPlayerScalar>,
}

impl ParamOverrides {
    pub fn horizon(horizon: f64) -> Self {
        ParamOverrides {
            horizon: Some(horizon),
            ..Default::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| GbcsError::parse(e.line(), e.column(), e.to_string()))
    }
}

fn expand_matrices(spec: &PerPlayerMatrix, players: usize, what: &str) -> Result<Vec<Matrix>> {
    match spec {
        PerPlayerMatrix::Shared(rows) => {
            let m = matrix_from_rows(rows)?;
            Ok(vec![m; players])
        }
        PerPlayerMatrix::Each(list) => {
            if list.len() != players {
                return Err(GbcsError::Dimension(format!(
                    "{what}: expected {players} matrices, got {}",
                    list.len()
                )));
            }
            list.iter().map(|rows| matrix_from_rows(rows)).collect()
        }
    }
}

fn column(values: &[f64]) -> Vector {
    Vector::from_column_slice(values)
}

/// Game data for `top` with Ã = I, C = 0, R_i = 1, B̃ = 1, Q_i = I,
/// terminal Q_i = I and horizon 1, then `overrides` applied on top.
pub fn default_params(top: &Topology, overrides: &ParamOverrides) -> Result<GbcsParams> {
    let h = top.agents();
    let n = h + 1;
    let b_vectors = (1..=h)
        .map(|i| strategy_vector(top, i).map(|v| column(&v.to_f64())))
        .collect::<Result<Vec<_>>>()?;
    let mut p = GbcsParams {
        a_tilde: Matrix::identity(n, n),
        b_vectors,
        b_tilde: Vector::from_element(n, 1.0),
        c: Vector::zeros(n),
        q: vec![Matrix::identity(n, n); h],
        q_terminal: vec![Matrix::identity(n, n); h],
        r: vec![1.0; h],
        horizon: 1.0,
    };
    if let Some(t) = overrides.horizon {
        p.horizon = t;
    }
    if let Some(rows) = &overrides.a_tilde {
        p.a_tilde = matrix_from_rows(rows)?;
    }
    if let Some(v) = &overrides.b_tilde {
        p.b_tilde = column(v);
    }
    if let Some(v) = &overrides.c {
        p.c = column(v);
    }
    if let Some(spec) = &overrides.q {
        p.q = expand_matrices(spec, h, "q")?;
    }
    if let Some(spec) = &overrides.q_terminal {
        p.q_terminal = expand_matrices(spec, h, "q_terminal")?;
    }
    match &overrides.r {
        Some(PerPlayerScalar::Shared(r)) => p.r = vec![*r; h],
        Some(PerPlayerScalar::Each(list)) => {
            if list.len() != h {
                return Err(GbcsError::Dimension(format!(
                    "r: expected {h} values, got {}",
                    list.len()
                )));
            }
            p.r = list.clone();
        }
        None => {}
    }
    p.validate()?;
    Ok(p)
}

/// Checks that the strategy columns of `p` are exactly those of `top`.
pub fn check_matches_topology(p: &GbcsParams, top: &Topology) -> Result<()> {
    if p.players() != top.agents() {
        return Err(GbcsError::Consistency(format!(
            "parameters have {} players, topology has {} agents",
            p.players(),
            top.agents()
        )));
    }
    for i in 1..=top.agents() {
        let expected = column(&strategy_vector(top, i)?.to_f64());
        if p.b_vectors[i - 1] != expected {
            return Err(GbcsError::Consistency(format!(
                "strategy column of agent {i} does not match the topology"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_agent_defaults() {
        let p = default_params(&Topology::new(1, []).unwrap(), &ParamOverrides::default()).unwrap();
        assert_eq!(p.n(), 2);
        assert_eq!(p.b_vectors, vec![Vector::from_vec(vec![1.0, 1.0])]);
        assert_eq!(p.b_tilde, Vector::from_vec(vec![1.0, 1.0]));
        assert_eq!(p.q[0], Matrix::identity(2, 2));
        assert_eq!(p.q_terminal[0], Matrix::identity(2, 2));
        assert_eq!(p.r, vec![1.0]);
        assert_eq!(p.c, Vector::zeros(2));
        assert_eq!(p.horizon, 1.0);
    }

    #[test]
    fn edgeless_pair_columns() {
        let p = default_params(&Topology::new(2, []).unwrap(), &ParamOverrides::default()).unwrap();
        assert_eq!(p.b_vectors[0], Vector::from_vec(vec![1.0, 1.0, 0.0]));
        assert_eq!(p.b_vectors[1], Vector::from_vec(vec![1.0, 0.0, 1.0]));
    }

    #[test]
    fn horizon_override_only() {
        let top = Topology::new(2, [(1, 2)]).unwrap();
        let base = default_params(&top, &ParamOverrides::default()).unwrap();
        let p = default_params(&top, &ParamOverrides::horizon(2.0)).unwrap();
        assert_eq!(p.horizon, 2.0);
        assert_eq!(
            GbcsParams {
                horizon: 1.0,
                ..p.clone()
            },
            base
        );
        assert_ne!(p.digest(), base.digest());
    }

    #[test]
    fn override_dimension_mismatch() {
        let top = Topology::new(2, []).unwrap();
        let bad = ParamOverrides {
            a_tilde: Some(vec![vec![1.0, 0.0], vec![0.0, 1.0]]),
            ..Default::default()
        };
        assert!(matches!(
            default_params(&top, &bad),
            Err(GbcsError::Dimension(_))
        ));
        let bad = ParamOverrides {
            r: Some(PerPlayerScalar::Each(vec![1.0])),
            ..Default::default()
        };
        assert!(default_params(&top, &bad).is_err());
        let bad = ParamOverrides {
            q: Some(PerPlayerMatrix::Shared(vec![
                vec![1.0, 2.0, 0.0],
                vec![0.0, 1.0, 0.0],
                vec![0.0, 0.0, 1.0],
            ])),
            ..Default::default()
        };
        assert!(matches!(
            default_params(&top, &bad),
            Err(GbcsError::InvalidArgument(_))
        ));
        let bad = ParamOverrides {
            r: Some(PerPlayerScalar::Shared(0.0)),
            ..Default::default()
        };
        assert!(default_params(&top, &bad).is_err());
    }

    #[test]
    fn overrides_from_json() {
        let o = ParamOverrides::from_json(
            r#"{"horizon": 0.5, "r": [1.0, 2.0], "q": [[[2,0,0],[0,2,0],[0,0,2]], [[1,0,0],[0,1,0],[0,0,1]]]}"#,
        )
        .unwrap();
        let p = default_params(&Topology::new(2, []).unwrap(), &o).unwrap();
        assert_eq!(p.r, vec![1.0, 2.0]);
        assert_eq!(p.q[0], 2.0 * Matrix::identity(3, 3));
        assert_eq!(p.q[1], Matrix::identity(3, 3));
        assert!(ParamOverrides::from_json(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn coupling_is_outer_product() {
        let p = default_params(&Topology::new(2, []).unwrap(), &ParamOverrides::default()).unwrap();
        let s1 = p.coupling(0);
        assert_eq!(
            s1,
            Matrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0])
        );
    }

    #[test]
    fn topology_consistency() {
        let top = Topology::new(2, []).unwrap();
        let p = default_params(&top, &ParamOverrides::default()).unwrap();
        assert!(check_matches_topology(&p, &top).is_ok());
        let other = Topology::new(2, [(1, 2)]).unwrap();
        assert!(matches!(
            check_matches_topology(&p, &other),
            Err(GbcsError::Consistency(_))
        ));
    }
}
