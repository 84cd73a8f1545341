//! Reference oracles for the test suites.
//!
//! Nothing in here touches `gbcs-core`. Each routine takes the slowest,
//! most obviously correct route so that it can stand as ground truth.

use num::bigint::BigInt;
use num::{BigRational, Zero};

/// Exact rank of an integer matrix by Gaussian elimination over the rationals.
pub fn rational_rank(rows: &[Vec<i128>]) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let cols = rows[0].len();
    let mut m: Vec<Vec<BigRational>> = rows
        .iter()
        .map(|r| {
            assert_eq!(r.len(), cols, "ragged matrix");
            r.iter()
                .map(|&v| BigRational::from_integer(BigInt::from(v)))
                .collect()
        })
        .collect();
    let mut rank = 0;
    for col in 0..cols {
        let Some(pivot) = (rank..m.len()).find(|&r| !m[r][col].is_zero()) else {
            continue;
        };
        m.swap(rank, pivot);
        let p = m[rank][col].clone();
        for r in 0..m.len() {
            if r != rank && !m[r][col].is_zero() {
                let factor = &m[r][col] / &p;
                for c in col..cols {
                    let delta = &factor * &m[rank][c];
                    m[r][c] -= delta;
                }
            }
        }
        rank += 1;
        if rank == m.len() {
            break;
        }
    }
    rank
}

/// Converts a float matrix whose entries are integers into `i128` rows.
/// Returns `None` if some entry is not an exact integer.
pub fn integral_rows(rows: &[Vec<f64>]) -> Option<Vec<Vec<i128>>> {
    rows.iter()
        .map(|r| {
            r.iter()
                .map(|&v| {
                    if v.is_finite() && v.fract() == 0.0 && v.abs() < 1.0e30 {
                        Some(v as i128)
                    } else {
                        None
                    }
                })
                .collect()
        })
        .collect()
}

fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let k = b.len();
    let m = b[0].len();
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for l in 0..k {
            let ail = a[i][l];
            if ail == 0.0 {
                continue;
            }
            for j in 0..m {
                out[i][j] += ail * b[l][j];
            }
        }
    }
    out
}

fn max_abs_row_sum(a: &[Vec<f64>]) -> f64 {
    a.iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by the Taylor series, after halving the argument until
/// its norm is at most 1/2 and squaring back.
pub fn series_expm(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let norm = max_abs_row_sum(a);
    let mut squarings = 0;
    let mut scale = 1.0;
    while norm * scale > 0.5 {
        scale *= 0.5;
        squarings += 1;
    }
    let scaled: Vec<Vec<f64>> = a
        .iter()
        .map(|r| r.iter().map(|v| v * scale).collect())
        .collect();
    let mut sum: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut term = sum.clone();
    for k in 1..60 {
        term = matmul(&term, &scaled);
        for row in term.iter_mut() {
            for v in row.iter_mut() {
                *v /= k as f64;
            }
        }
        for i in 0..n {
            for j in 0..n {
                sum[i][j] += term[i][j];
            }
        }
        if max_abs_row_sum(&term) < 1.0e-20 {
            break;
        }
    }
    for _ in 0..squarings {
        sum = matmul(&sum, &sum);
    }
    sum
}

/// Largest absolute entrywise difference between two equally-shaped matrices.
pub fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .flat_map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max)
}

/// Closed neighbourhood indicator of `agent` with the regulator slot set,
/// built straight from an edge list (agents are 1-based).
pub fn closed_neighbourhood(h: usize, edges: &[(usize, usize)], agent: usize) -> Vec<i64> {
    let mut v = vec![0; h + 1];
    v[0] = 1;
    v[agent] = 1;
    for &(a, b) in edges {
        if a == agent {
            v[b] = 1;
        } else if b == agent {
            v[a] = 1;
        }
    }
    v
}

/// Every labelled simple graph on `h` agents, as edge lists in bitmask order.
pub fn all_labelled_graphs(h: usize) -> Vec<Vec<(usize, usize)>> {
    let pairs: Vec<(usize, usize)> = (1..=h)
        .flat_map(|i| (i + 1..=h).map(move |j| (i, j)))
        .collect();
    (0u64..(1u64 << pairs.len()))
        .map(|mask| {
            pairs
                .iter()
                .enumerate()
                .filter(|(k, _)| mask >> k & 1 == 1)
                .map(|(_, &p)| p)
                .collect()
        })
        .collect()
}
