//! Exhaustive small-graph scan comparing the partition test against the
//! projected rank verdict.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::controllability::{game_controllable, theorem2_check, Tolerances};
use crate::error::{GbcsError, Result};
use crate::lqgame::{default_params, ParamOverrides};
use crate::strategy::has_nontrivial_cell;
use crate::topology::Topology;

pub const MAX_AGENTS: usize = 7;
/// Largest agent count scanned unless the caller lifts the guard.
pub const DEFAULT_SCAN_LIMIT: usize = 6;

/// Unordered agent pairs in bit order: (1,2), (1,3), …, (1,h), (2,3), ….
pub fn agent_pairs(h: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(h * h.saturating_sub(1) / 2);
    for a in 1..=h {
        for b in a + 1..=h {
            pairs.push((a, b));
        }
    }
    pairs
}

pub fn topology_from_mask(h: usize, mask: u64) -> Result<Topology> {
    let pairs = agent_pairs(h);
    if pairs.len() < 64 && mask >> pairs.len() != 0 {
        return Err(GbcsError::InvalidArgument(format!(
            "graph id {mask} has bits beyond the {} agent pairs",
            pairs.len()
        )));
    }
    Topology::new(
        h,
        pairs
            .iter()
            .enumerate()
            .filter(|(k, _)| mask >> k & 1 == 1)
            .map(|(_, &e)| e),
    )
}

pub fn mask_of(top: &Topology) -> u64 {
    let pairs = agent_pairs(top.agents());
    pairs
        .iter()
        .enumerate()
        .filter(|(_, &(a, b))| top.has_edge(a, b))
        .fold(0, |m, (k, _)| m | 1 << k)
}

fn permutations(h: usize) -> Vec<Vec<usize>> {
    fn extend(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for v in 0..used.len() {
            if !used[v] {
                used[v] = true;
                prefix.push(v);
                extend(prefix, used, out);
                prefix.pop();
                used[v] = false;
            }
        }
    }
    let mut out = Vec::new();
    extend(&mut Vec::with_capacity(h), &mut vec![false; h], &mut out);
    out
}

/// Relabelling tables: for each permutation, where each pair bit moves.
struct PairMaps {
    maps: Vec<Vec<u32>>,
}

impl PairMaps {
    fn new(h: usize) -> Self {
        let pairs = agent_pairs(h);
        let index: BTreeMap<(usize, usize), u32> = pairs
            .iter()
            .enumerate()
            .map(|(k, &e)| (e, k as u32))
            .collect();
        let maps = permutations(h)
            .into_iter()
            .map(|perm| {
                pairs
                    .iter()
                    .map(|&(a, b)| {
                        let (x, y) = (perm[a - 1] + 1, perm[b - 1] + 1);
                        index[&(x.min(y), x.max(y))]
                    })
                    .collect()
            })
            .collect();
        PairMaps { maps }
    }

    fn apply(map: &[u32], mask: u64) -> u64 {
        map.iter()
            .enumerate()
            .filter(|(k, _)| mask >> k & 1 == 1)
            .fold(0, |m, (_, &to)| m | 1 << to)
    }

    fn is_canonical(&self, mask: u64) -> bool {
        self.maps.iter().all(|map| Self::apply(map, mask) >= mask)
    }

    fn canonical(&self, mask: u64) -> u64 {
        self.maps
            .iter()
            .map(|map| Self::apply(map, mask))
            .min()
            .unwrap_or(mask)
    }
}

fn check_agents(h: usize) -> Result<()> {
    if h == 0 || h > MAX_AGENTS {
        return Err(GbcsError::InvalidArgument(format!(
            "agent count must be in 1..={MAX_AGENTS}, got {h}"
        )));
    }
    Ok(())
}

/// Smallest graph id among all relabellings of `top`.
pub fn canonical_mask(top: &Topology) -> Result<u64> {
    check_agents(top.agents())?;
    Ok(PairMaps::new(top.agents()).canonical(mask_of(top)))
}

/// Graph ids (edge bitmasks) in increasing order, optionally only those that
/// are the smallest id of their isomorphism class.
pub fn enumerate_masks(h: usize, dedup_iso: bool) -> Result<Vec<u64>> {
    check_agents(h)?;
    let count = 1u64 << agent_pairs(h).len();
    if !dedup_iso {
        return Ok((0..count).collect());
    }
    let maps = PairMaps::new(h);
    Ok((0..count).filter(|&m| maps.is_canonical(m)).collect())
}

pub fn enumerate_graphs(h: usize, dedup_iso: bool) -> Result<Vec<(u64, Topology)>> {
    enumerate_masks(h, dedup_iso)?
        .into_iter()
        .map(|m| topology_from_mask(h, m).map(|t| (m, t)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Classification {
    #[serde(rename = "consistent")]
    Consistent,
    #[serde(rename = "THEOREM_VIOLATION")]
    TheoremViolation,
    #[serde(rename = "CONJECTURE_COUNTEREXAMPLE")]
    ConjectureCounterexample,
    #[serde(rename = "NUMERIC_FAILURE")]
    NumericFailure,
}

impl Classification {
    pub fn classify(thm2_uncontrollable: bool, controllable: bool) -> Self {
        match (thm2_uncontrollable, controllable) {
            (true, true) => Classification::TheoremViolation,
            (false, false) => Classification::ConjectureCounterexample,
            _ => Classification::Consistent,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Classification::Consistent => "consistent",
            Classification::TheoremViolation => "THEOREM_VIOLATION",
            Classification::ConjectureCounterexample => "CONJECTURE_COUNTEREXAMPLE",
            Classification::NumericFailure => "NUMERIC_FAILURE",
        }
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdicts {
    pub sep_nontrivial: bool,
    pub t_rows_equal: bool,
    pub thm2_uncontrollable: bool,
    pub controllable: bool,
    pub projected_rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRecord {
    pub graph_id: u64,
    pub h: usize,
    pub edges: Vec<(usize, usize)>,
    /// `None` when the graph could not be evaluated.
    pub verdicts: Option<Verdicts>,
    pub classification: Classification,
    pub error: Option<String>,
}

impl ScanRecord {
    pub fn edges_field(&self) -> String {
        let parts: Vec<String> = self.edges.iter().map(|(a, b)| format!("{a}-{b}")).collect();
        parts.join(";")
    }

    /// Classification agrees with the verdict flags.
    pub fn is_consistent(&self) -> bool {
        match &self.verdicts {
            Some(v) => {
                self.classification
                    == Classification::classify(v.thm2_uncontrollable, v.controllable)
            }
            None => self.classification == Classification::NumericFailure,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScanConfig {
    pub h: usize,
    pub dedup_iso: bool,
    pub overrides: ParamOverrides,
    pub tolerances: Tolerances,
    /// 0 runs sequentially.
    pub threads: usize,
    /// Refuse `h` above this unless raised.
    pub max_agents: usize,
}

impl ScanConfig {
    pub fn new(h: usize) -> Self {
        ScanConfig {
            h,
            dedup_iso: false,
            overrides: ParamOverrides::default(),
            tolerances: Tolerances::default(),
            threads: 0,
            max_agents: DEFAULT_SCAN_LIMIT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanSummary {
    pub graphs: usize,
    pub consistent: usize,
    pub theorem_violations: usize,
    pub conjecture_counterexamples: usize,
    pub numeric_failures: usize,
}

#[derive(Debug, Clone)]
pub struct ScanResult {
    pub records: Vec<ScanRecord>,
    pub summary: ScanSummary,
}

fn evaluate(h: usize, mask: u64, config: &ScanConfig) -> ScanRecord {
    let outcome = topology_from_mask(h, mask).and_then(|top| {
        let p = default_params(&top, &config.overrides)?;
        let check = theorem2_check(&top, &p, config.tolerances.t_rows)?;
        let game = game_controllable(&p, config.tolerances.rank)?;
        let sep_nontrivial = has_nontrivial_cell(&check.partition);
        Ok((
            top,
            Verdicts {
                sep_nontrivial,
                t_rows_equal: check.t_rows_equal,
                thm2_uncontrollable: check.thm2_uncontrollable,
                controllable: game.controllable,
                projected_rank: game.projected_rank,
            },
        ))
    });
    let edges = topology_from_mask(h, mask)
        .map(|t| t.edges().collect())
        .unwrap_or_default();
    match outcome {
        Ok((_, v)) => ScanRecord {
            graph_id: mask,
            h,
            edges,
            classification: Classification::classify(v.thm2_uncontrollable, v.controllable),
            verdicts: Some(v),
            error: None,
        },
        Err(e) => ScanRecord {
            graph_id: mask,
            h,
            edges,
            verdicts: None,
            classification: Classification::NumericFailure,
            error: Some(e.to_string()),
        },
    }
}

/// Runs both verdicts on every enumerated graph. Records come back in graph
/// id order whatever the thread count.
pub fn conjecture_scan(config: &ScanConfig) -> Result<ScanResult> {
    check_agents(config.h)?;
    if config.h > config.max_agents {
        return Err(GbcsError::InvalidArgument(format!(
            "scan of {} agents exceeds the limit of {}; raise the limit to proceed",
            config.h, config.max_agents
        )));
    }
    // Surface parameter errors once instead of in every row.
    default_params(&Topology::new(config.h, [])?, &config.overrides)?;
    let masks = enumerate_masks(config.h, config.dedup_iso)?;
    let records: Vec<ScanRecord> = if config.threads == 0 {
        masks
            .iter()
            .map(|&m| evaluate(config.h, m, config))
            .collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(|e| GbcsError::InvalidArgument(format!("thread pool: {e}")))?;
        pool.install(|| {
            masks
                .par_iter()
                .map(|&m| evaluate(config.h, m, config))
                .collect()
        })
    };
    if let Some(bad) = records.iter().find(|r| !r.is_consistent()) {
        return Err(GbcsError::Invariant(format!(
            "graph {} carries classification {} inconsistent with its verdicts",
            bad.graph_id, bad.classification
        )));
    }
    let count = |c| records.iter().filter(|r| r.classification == c).count();
    let summary = ScanSummary {
        graphs: records.len(),
        consistent: count(Classification::Consistent),
        theorem_violations: count(Classification::TheoremViolation),
        conjecture_counterexamples: count(Classification::ConjectureCounterexample),
        numeric_failures: count(Classification::NumericFailure),
    };
    Ok(ScanResult { records, summary })
}

pub const CSV_HEADER: &str =
    "graph_id,h,edges,sep_nontrivial,t_rows_equal,thm2_uncontrollable,controllable,projected_rank,classification";

pub fn records_to_csv(records: &[ScanRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        let flags = match &r.verdicts {
            Some(v) => format!(
                "{},{},{},{},{}",
                v.sep_nontrivial,
                v.t_rows_equal,
                v.thm2_uncontrollable,
                v.controllable,
                v.projected_rank
            ),
            None => ",,,,".to_string(),
        };
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.graph_id,
            r.h,
            r.edges_field(),
            flags,
            r.classification
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_order() {
        assert_eq!(agent_pairs(3), vec![(1, 2), (1, 3), (2, 3)]);
        assert!(agent_pairs(1).is_empty());
    }

    #[test]
    fn labelled_counts() {
        assert_eq!(enumerate_graphs(1, false).unwrap().len(), 1);
        assert_eq!(enumerate_graphs(2, false).unwrap().len(), 2);
        assert_eq!(enumerate_graphs(3, false).unwrap().len(), 8);
        for h in 1..=5 {
            assert_eq!(
                enumerate_masks(h, false).unwrap().len(),
                1 << (h * (h - 1) / 2)
            );
        }
    }

    #[test]
    fn unlabelled_counts() {
        let graphs = enumerate_graphs(3, true).unwrap();
        let edge_counts: Vec<usize> = graphs.iter().map(|(_, t)| t.edge_count()).collect();
        assert_eq!(edge_counts, vec![0, 1, 2, 3]);
        assert_eq!(enumerate_masks(4, true).unwrap().len(), 11);
        assert_eq!(enumerate_masks(5, true).unwrap().len(), 34);
    }

    #[test]
    fn canonical_forms_are_fixed_points() {
        for (m, t) in enumerate_graphs(4, true).unwrap() {
            assert_eq!(canonical_mask(&t).unwrap(), m);
        }
    }

    #[test]
    fn mask_round_trip() {
        for m in 0..64 {
            assert_eq!(mask_of(&topology_from_mask(4, m).unwrap()), m);
        }
        assert!(topology_from_mask(3, 8).is_err());
    }

    #[test]
    fn agent_range() {
        assert!(enumerate_graphs(0, false).is_err());
        assert!(enumerate_masks(8, false).is_err());
    }

    #[test]
    fn scan_two_agents() {
        let result = conjecture_scan(&ScanConfig::new(2)).unwrap();
        assert_eq!(result.records.len(), 2);
        let edgeless = &result.records[0];
        let v = edgeless.verdicts.as_ref().unwrap();
        assert!(v.sep_nontrivial && !v.t_rows_equal);
        assert!(!v.thm2_uncontrollable && v.controllable);
        assert_eq!(edgeless.classification, Classification::Consistent);
        assert_eq!(result.summary.theorem_violations, 0);
    }

    #[test]
    fn scan_one_agent() {
        let result = conjecture_scan(&ScanConfig::new(1)).unwrap();
        let r = &result.records[0];
        let v = r.verdicts.as_ref().unwrap();
        assert!(!v.sep_nontrivial && !v.thm2_uncontrollable);
        assert_eq!(
            r.classification,
            Classification::classify(false, v.controllable)
        );
    }

    #[test]
    fn guard_and_threads() {
        let mut config = ScanConfig::new(7);
        assert!(conjecture_scan(&config).is_err());
        config.h = 3;
        let seq = records_to_csv(&conjecture_scan(&config).unwrap().records);
        config.threads = 3;
        let par = records_to_csv(&conjecture_scan(&config).unwrap().records);
        assert_eq!(seq, par);
        assert!(seq.starts_with(CSV_HEADER));
        assert_eq!(seq.lines().count(), 9);
    }

    #[test]
    fn csv_fields() {
        let result = conjecture_scan(&ScanConfig::new(3)).unwrap();
        let csv = records_to_csv(&result.records);
        let last = csv.lines().last().unwrap();
        assert!(last.starts_with("7,3,1-2;1-3;2-3,"), "{last}");
        assert_eq!(last.split(',').count(), 9);
    }

    #[test]
    fn failures_are_recorded() {
        let r = ScanRecord {
            graph_id: 0,
            h: 2,
            edges: vec![],
            verdicts: None,
            classification: Classification::NumericFailure,
            error: Some("boom".into()),
        };
        assert!(r.is_consistent());
        assert!(records_to_csv(&[r]).ends_with("0,2,,,,,,,NUMERIC_FAILURE\n"));
    }
}
