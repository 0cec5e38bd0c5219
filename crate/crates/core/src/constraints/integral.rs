//! Integrality of `{z ∈ [0,1]^d : Az ≤ b}` by exact vertex enumeration.
//!
//! A vertex fixes some coordinates at 0 or 1 and determines the remaining
//! free coordinates `F` from |F| tight rows `R` with `A[R,F]` nonsingular.
//! When `|det A[R,F]| = 1` the solution is integral for every integer right
//! hand side, so only bases with `|det| ≥ 2` are solved, in rationals.

use num_rational::Ratio;

use super::tum::{determinant, next_combination};
use super::ConstraintSystem;
use crate::error::{Error, Result};

type Q = Ratio<i128>;

/// Largest `d` and `m` accepted by [`verify_integral`].
pub const MAX_INTEGRALITY_DIM: usize = 10;

pub fn verify_integral(cs: &ConstraintSystem) -> Result<bool> {
    let d = cs.dim();
    let m = cs.num_rows();
    if d > MAX_INTEGRALITY_DIM || m > MAX_INTEGRALITY_DIM {
        return Err(Error::SizeLimitExceeded(format!(
            "vertex enumeration needs d, m <= {MAX_INTEGRALITY_DIM}, got d={d}, m={m}"
        )));
    }
    let a = cs.matrix();
    let b = cs.rhs();
    for f in 1..=d.min(m) {
        let mut free: Vec<usize> = (0..f).collect();
        loop {
            let fixed: Vec<usize> = (0..d).filter(|j| !free.contains(j)).collect();
            let mut rows: Vec<usize> = (0..f).collect();
            loop {
                let sub: Vec<Vec<i64>> = rows.iter().map(|&r| free.iter().map(|&c| a[r][c]).collect()).collect();
                if determinant(&sub).abs() >= 2 && has_fractional_vertex(&a, b, &free, &fixed, &rows) {
                    return Ok(false);
                }
                if !next_combination(&mut rows, m) {
                    break;
                }
            }
            if !next_combination(&mut free, d) {
                break;
            }
        }
    }
    Ok(true)
}

fn has_fractional_vertex(a: &[Vec<i64>], b: &[i64], free: &[usize], fixed: &[usize], rows: &[usize]) -> bool {
    let f = free.len();
    let d = free.len() + fixed.len();
    for code in 0u32..(1u32 << fixed.len()) {
        let mut z = vec![Q::from_integer(0); d];
        for (t, &j) in fixed.iter().enumerate() {
            z[j] = Q::from_integer(((code >> t) & 1) as i128);
        }
        // augmented system A[R,F] z_F = b_R - A[R,fixed] z_fixed
        let mut sys: Vec<Vec<Q>> = rows
            .iter()
            .map(|&r| {
                let mut rhs = Q::from_integer(b[r] as i128);
                for &j in fixed {
                    rhs -= Q::from_integer(a[r][j] as i128) * z[j];
                }
                let mut row: Vec<Q> = free.iter().map(|&c| Q::from_integer(a[r][c] as i128)).collect();
                row.push(rhs);
                row
            })
            .collect();
        let solution = match solve(&mut sys, f) {
            Some(s) => s,
            None => continue,
        };
        let zero = Q::from_integer(0);
        let one = Q::from_integer(1);
        if solution.iter().any(|v| *v < zero || *v > one) {
            continue;
        }
        for (t, &j) in free.iter().enumerate() {
            z[j] = solution[t];
        }
        let feasible = a.iter().zip(b).all(|(row, &bi)| {
            let lhs: Q = row.iter().zip(&z).map(|(&aij, zj)| Q::from_integer(aij as i128) * zj).sum();
            lhs <= Q::from_integer(bi as i128)
        });
        if feasible && solution.iter().any(|v| !v.is_integer()) {
            return true;
        }
    }
    false
}

fn solve(sys: &mut [Vec<Q>], n: usize) -> Option<Vec<Q>> {
    let zero = Q::from_integer(0);
    for k in 0..n {
        let p = (k..n).find(|&i| sys[i][k] != zero)?;
        sys.swap(k, p);
        let pivot = sys[k][k];
        for j in k..=n {
            sys[k][j] /= pivot;
        }
        for i in 0..n {
            if i != k && sys[i][k] != zero {
                let factor = sys[i][k];
                for j in k..=n {
                    let delta = factor * sys[k][j];
                    sys[i][j] -= delta;
                }
            }
        }
    }
    Some(sys.iter().map(|r| r[n]).collect())
}
