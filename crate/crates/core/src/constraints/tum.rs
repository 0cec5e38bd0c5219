//! Total unimodularity.
//!
//! The check first strips rows and columns that cannot affect the answer
//! (at most one nonzero, or a duplicate up to sign), then applies the
//! two-nonzeros-per-column colouring test, which is exact when it applies.
//! Anything left falls through to exhaustive enumeration of square
//! submatrices with integer determinants.

use crate::error::{Error, Result};

/// Limits on the exhaustive fallback.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TumBudget {
    /// Largest `min(m, d)` of the reduced matrix that may be enumerated.
    pub max_order: usize,
    /// Cap on the number of square submatrices examined.
    pub max_submatrices: u128,
}

impl Default for TumBudget {
    fn default() -> Self {
        TumBudget { max_order: 12, max_submatrices: 50_000_000 }
    }
}

pub fn is_tum(a: &[Vec<i64>]) -> Result<bool> {
    is_tum_with_budget(a, TumBudget::default())
}

pub fn is_tum_with_budget(a: &[Vec<i64>], budget: TumBudget) -> Result<bool> {
    let ncols = a.first().map_or(0, |r| r.len());
    for (i, row) in a.iter().enumerate() {
        if row.len() != ncols {
            return Err(Error::DimensionMismatch(format!("row {i} has length {}", row.len())));
        }
        if let Some((j, &v)) = row.iter().enumerate().find(|(_, v)| !(-1..=1).contains(*v)) {
            return Err(Error::InvalidEntry { row: i, col: j, value: v });
        }
    }
    let reduced = reduce(a.to_vec());
    if reduced.is_empty() || reduced[0].is_empty() {
        return Ok(true);
    }
    if let Some(verdict) = two_per_column(&reduced) {
        return Ok(verdict);
    }
    let transposed = transpose(&reduced);
    if let Some(verdict) = two_per_column(&transposed) {
        return Ok(verdict);
    }
    exhaustive(&reduced, budget)
}

fn transpose(a: &[Vec<i64>]) -> Vec<Vec<i64>> {
    if a.is_empty() {
        return Vec::new();
    }
    (0..a[0].len()).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

/// Removes rows with at most one nonzero and rows duplicating another up to
/// sign, then the same for columns, until nothing changes.
fn reduce(mut a: Vec<Vec<i64>>) -> Vec<Vec<i64>> {
    loop {
        let before = (a.len(), a.first().map_or(0, |r| r.len()));
        a = reduce_rows(a);
        if a.is_empty() {
            return a;
        }
        a = transpose(&reduce_rows(transpose(&a)));
        if a.is_empty() || a[0].is_empty() {
            return Vec::new();
        }
        if (a.len(), a[0].len()) == before {
            return a;
        }
    }
}

fn reduce_rows(a: Vec<Vec<i64>>) -> Vec<Vec<i64>> {
    let mut kept: Vec<Vec<i64>> = Vec::with_capacity(a.len());
    for row in a {
        if row.iter().filter(|&&v| v != 0).count() <= 1 {
            continue;
        }
        let negated: Vec<i64> = row.iter().map(|v| -v).collect();
        if kept.iter().any(|k| *k == row || *k == negated) {
            continue;
        }
        kept.push(row);
    }
    kept
}

/// Exact verdict when every column has at most two nonzeros: TUM iff the rows
/// split into two classes with same-sign pairs across and opposite-sign pairs
/// together. `None` when some column has three or more nonzeros.
fn two_per_column(a: &[Vec<i64>]) -> Option<bool> {
    let m = a.len();
    let d = a[0].len();
    // edges (r1, r2, must_differ)
    let mut adj: Vec<Vec<(usize, bool)>> = vec![Vec::new(); m];
    for j in 0..d {
        let nz: Vec<usize> = (0..m).filter(|&i| a[i][j] != 0).collect();
        match nz.len() {
            0 | 1 => {}
            2 => {
                let (r1, r2) = (nz[0], nz[1]);
                let differ = a[r1][j] == a[r2][j];
                adj[r1].push((r2, differ));
                adj[r2].push((r1, differ));
            }
            _ => return None,
        }
    }
    let mut colour: Vec<Option<bool>> = vec![None; m];
    for start in 0..m {
        if colour[start].is_some() {
            continue;
        }
        colour[start] = Some(false);
        let mut stack = vec![start];
        while let Some(r) = stack.pop() {
            let c = colour[r].unwrap();
            for &(s, differ) in &adj[r] {
                let want = c ^ differ;
                match colour[s] {
                    None => {
                        colour[s] = Some(want);
                        stack.push(s);
                    }
                    Some(have) if have != want => return Some(false),
                    _ => {}
                }
            }
        }
    }
    Some(true)
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

fn exhaustive(a: &[Vec<i64>], budget: TumBudget) -> Result<bool> {
    let m = a.len();
    let d = a[0].len();
    let order = m.min(d);
    if order > budget.max_order {
        return Err(Error::SizeLimitExceeded(format!(
            "exhaustive TUM check on a reduced {m}x{d} matrix exceeds order {}",
            budget.max_order
        )));
    }
    let total: u128 = (2..=order).map(|k| binomial(m, k) * binomial(d, k)).sum();
    if total > budget.max_submatrices {
        return Err(Error::SizeLimitExceeded(format!(
            "exhaustive TUM check needs {total} submatrices, budget {}",
            budget.max_submatrices
        )));
    }
    let mut sub = Vec::new();
    for k in 2..=order {
        let mut rows: Vec<usize> = (0..k).collect();
        loop {
            let mut cols: Vec<usize> = (0..k).collect();
            loop {
                sub.clear();
                sub.extend(rows.iter().map(|&r| cols.iter().map(|&c| a[r][c]).collect::<Vec<_>>()));
                if determinant(&sub).abs() > 1 {
                    return Ok(false);
                }
                if !next_combination(&mut cols, d) {
                    break;
                }
            }
            if !next_combination(&mut rows, m) {
                break;
            }
        }
    }
    Ok(true)
}

pub(crate) fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < n - k + i {
            idx[i] += 1;
            for t in i + 1..k {
                idx[t] = idx[t - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Exact integer determinant by fraction-free (Bareiss) elimination.
pub fn determinant(a: &[Vec<i64>]) -> i64 {
    let n = a.len();
    if n == 0 {
        return 1;
    }
    let mut m: Vec<Vec<i128>> = a.iter().map(|r| r.iter().map(|&v| v as i128).collect()).collect();
    let mut sign = 1i128;
    let mut prev = 1i128;
    for k in 0..n - 1 {
        if m[k][k] == 0 {
            match (k + 1..n).find(|&i| m[i][k] != 0) {
                Some(i) => {
                    m.swap(k, i);
                    sign = -sign;
                }
                None => return 0,
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) / prev;
            }
        }
        prev = m[k][k];
    }
    (sign * m[n - 1][n - 1]) as i64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_verdicts() {
        let eye = vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]];
        assert!(is_tum(&eye).unwrap());
        assert!(!is_tum(&[vec![1, 1], vec![1, -1]]).unwrap());
        assert!(is_tum(&[]).unwrap());
    }

    #[test]
    fn complete_bipartite_incidence() {
        let k22 = crate::constraints::BipartiteGraph::complete(2, 2).unwrap().incidence();
        assert!(is_tum(&k22).unwrap());
        // odd cycle incidence is the classic non-TUM example
        let triangle = vec![vec![1, 1, 0], vec![0, 1, 1], vec![1, 0, 1]];
        assert!(!is_tum(&triangle).unwrap());
    }

    #[test]
    fn determinants() {
        assert_eq!(determinant(&[vec![1, 1], vec![1, -1]]), -2);
        assert_eq!(determinant(&[vec![0, 1], vec![1, 0]]), -1);
        assert_eq!(determinant(&[vec![1, 1, 0], vec![0, 1, 1], vec![1, 0, 1]]), 2);
        assert_eq!(determinant(&[vec![1, 1], vec![1, 1]]), 0);
    }

    #[test]
    fn budget_is_enforced() {
        // dense non-structured 14x14 pattern survives reduction
        let a: Vec<Vec<i64>> =
            (0..14).map(|i| (0..14).map(|j| if (i * 7 + j * 3) % 5 < 3 { 1 } else { -1 }).collect()).collect();
        let tight = TumBudget { max_order: 12, max_submatrices: 10 };
        assert!(matches!(is_tum_with_budget(&a, tight), Err(Error::SizeLimitExceeded(_))));
    }

    #[test]
    fn combinations_enumerate() {
        let mut idx = vec![0, 1];
        let mut count = 1;
        while next_combination(&mut idx, 4) {
            count += 1;
        }
        assert_eq!(count, 6);
    }
}
