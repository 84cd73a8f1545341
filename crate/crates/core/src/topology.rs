//! Regulator-plus-agents graphs.
//!
//! Agents are numbered `1..=H`. The regulator is implicit, adjacent to every
//! agent, and always occupies slot 0 of any `(H+1)`-sized vector or matrix.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{GbcsError, Result};
use crate::linalg::{rank, Matrix, RankTol};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Topology {
    agents: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Topology {
    /// Validates and builds a topology. Each pair is normalised to `(min, max)`.
    pub fn new(agents: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if agents == 0 {
            return Err(GbcsError::InvalidArgument(
                "agent count must be positive".into(),
            ));
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            for v in [a, b] {
                if v == 0 || v > agents {
                    return Err(GbcsError::IndexOutOfRange {
                        index: v,
                        max: agents,
                    });
                }
            }
            if a == b {
                return Err(GbcsError::InvalidArgument(format!(
                    "self-loop on agent {a}"
                )));
            }
            if !set.insert((a.min(b), a.max(b))) {
                return Err(GbcsError::InvalidArgument(format!(
                    "duplicate edge {a}-{b}"
                )));
            }
        }
        Ok(Topology { agents, edges: set })
    }

    pub fn agents(&self) -> usize {
        self.agents
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    pub fn degree(&self, agent: usize) -> usize {
        self.edges
            .iter()
            .filter(|&&(a, b)| a == agent || b == agent)
            .count()
    }

    fn check_agent(&self, i: usize) -> Result<()> {
        if i == 0 || i > self.agents {
            Err(GbcsError::IndexOutOfRange {
                index: i,
                max: self.agents,
            })
        } else {
            Ok(())
        }
    }

    /// Applies a relabelling: agent `i` becomes `perm[i - 1]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Topology> {
        if perm.len() != self.agents {
            return Err(GbcsError::Dimension(
                "permutation length must equal agent count".into(),
            ));
        }
        Topology::new(
            self.agents,
            self.edges.iter().map(|&(a, b)| (perm[a - 1], perm[b - 1])),
        )
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "agents {}", self.agents)?;
        for (a, b) in &self.edges {
            writeln!(f, "edge {a} {b}")?;
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct TopologyJson {
    agents: usize,
    #[serde(default)]
    edges: Vec<[usize; 2]>,
}

/// Parses the line-oriented graph format:
///
/// ```text
/// # comment
/// agents 3
/// edge 1 2
/// edge 2 3
/// ```
pub fn parse_topology(text: &str) -> Result<Topology> {
    let mut agents: Option<usize> = None;
    let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut tokens = tokenize(content);
        let Some((col, directive)) = tokens.next() else {
            continue;
        };
        let args: Vec<(usize, &str)> = tokens.collect();
        match directive {
            "agents" => {
                if agents.is_some() {
                    return Err(GbcsError::parse(
                        line_no,
                        col,
                        "repeated 'agents' directive",
                    ));
                }
                if !edges.is_empty() {
                    return Err(GbcsError::parse(
                        line_no,
                        col,
                        "'agents' must precede edges",
                    ));
                }
                let [(c, v)] = args[..] else {
                    return Err(GbcsError::parse(line_no, col, "expected 'agents <H>'"));
                };
                let h = parse_index(line_no, c, v)?;
                if h == 0 {
                    return Err(GbcsError::parse(line_no, c, "agent count must be positive"));
                }
                agents = Some(h);
            }
            "edge" => {
                let Some(h) = agents else {
                    return Err(GbcsError::parse(line_no, col, "'edge' before 'agents'"));
                };
                let [(ca, va), (cb, vb)] = args[..] else {
                    return Err(GbcsError::parse(line_no, col, "expected 'edge <i> <j>'"));
                };
                let a = parse_index(line_no, ca, va)?;
                let b = parse_index(line_no, cb, vb)?;
                for (c, v) in [(ca, a), (cb, b)] {
                    if v == 0 || v > h {
                        return Err(GbcsError::parse(
                            line_no,
                            c,
                            format!("agent index {v} out of range 1..={h}"),
                        ));
                    }
                }
                if a == b {
                    return Err(GbcsError::parse(
                        line_no,
                        col,
                        format!("self-loop on agent {a}"),
                    ));
                }
                if !edges.insert((a.min(b), a.max(b))) {
                    return Err(GbcsError::parse(
                        line_no,
                        col,
                        format!("duplicate edge {a}-{b}"),
                    ));
                }
            }
            other => {
                return Err(GbcsError::parse(
                    line_no,
                    col,
                    format!("unknown directive '{other}'"),
                ));
            }
        }
    }
    let agents = agents.ok_or_else(|| GbcsError::parse(1, 1, "missing 'agents <H>' line"))?;
    Ok(Topology { agents, edges })
}

/// 1-based column of each whitespace-separated token.
fn tokenize(s: &str) -> impl Iterator<Item = (usize, &str)> {
    s.split_whitespace().map(move |tok| {
        let offset = tok.as_ptr() as usize - s.as_ptr() as usize;
        (s[..offset].chars().count() + 1, tok)
    })
}

fn parse_index(line: usize, column: usize, tok: &str) -> Result<usize> {
    tok.parse::<usize>().map_err(|_| {
        GbcsError::parse(
            line,
            column,
            format!("expected a nonnegative integer, got '{tok}'"),
        )
    })
}

/// Parses `{"agents": H, "edges": [[i, j], ...]}`.
pub fn parse_topology_json(text: &str) -> Result<Topology> {
    let doc: TopologyJson = serde_json::from_str(text)
        .map_err(|e| GbcsError::parse(e.line(), e.column(), e.to_string()))?;
    Topology::new(doc.agents, doc.edges.iter().map(|&[a, b]| (a, b)))
        .map_err(|e| GbcsError::parse(1, 1, e.to_string()))
}

pub fn topology_to_json(top: &Topology) -> serde_json::Value {
    serde_json::json!({
        "agents": top.agents,
        "edges": top.edges.iter().map(|&(a, b)| [a, b]).collect::<Vec<_>>(),
    })
}

/// Reads a graph file, choosing the JSON parser for `.json` files.
pub fn load_topology(path: &Path) -> std::io::Result<Result<Topology>> {
    let text = std::fs::read_to_string(path)?;
    let is_json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    Ok(if is_json {
        parse_topology_json(&text)
    } else {
        parse_topology(&text)
    })
}

/// 0/1 vector of length H+1: regulator slot, the agent itself and its neighbours.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrategyVector(Vec<u8>);

impl StrategyVector {
    pub fn entries(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&v| f64::from(v)).collect()
    }
}

impl std::ops::Index<usize> for StrategyVector {
    type Output = u8;

    fn index(&self, i: usize) -> &u8 {
        &self.0[i]
    }
}

pub fn strategy_vector(top: &Topology, i: usize) -> Result<StrategyVector> {
    top.check_agent(i)?;
    let mut v = vec![0u8; top.agents + 1];
    v[0] = 1;
    v[i] = 1;
    for &(a, b) in &top.edges {
        if a == i {
            v[b] = 1;
        } else if b == i {
            v[a] = 1;
        }
    }
    Ok(StrategyVector(v))
}

/// Agent Laplacian `D - A` (regulator excluded).
pub fn laplacian(top: &Topology) -> Matrix {
    let h = top.agents;
    let mut l = Matrix::zeros(h, h);
    for &(a, b) in &top.edges {
        let (i, j) = (a - 1, b - 1);
        l[(i, j)] -= 1.0;
        l[(j, i)] -= 1.0;
        l[(i, i)] += 1.0;
        l[(j, j)] += 1.0;
    }
    l
}

/// Leader-follower baseline without game factors: rank of `[e, L e, ..., L^{H-1} e]`.
pub fn classic_controllable(top: &Topology, leader: usize, tol: RankTol) -> Result<bool> {
    top.check_agent(leader)?;
    let h = top.agents;
    let l = laplacian(top);
    let mut kalman = Matrix::zeros(h, h);
    let mut col = nalgebra::DVector::zeros(h);
    col[leader - 1] = 1.0;
    for k in 0..h {
        kalman.set_column(k, &col);
        col = &l * col;
    }
    Ok(rank(&kalman, tol) == h)
}
