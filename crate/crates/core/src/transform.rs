//! The transform `T(ζ) = argmax ζ'z` over `z ∈ [0,1]^d, Az ≤ b`.
//!
//! On an integral system the continuous LP has a binary optimum, unique for
//! almost every `ζ`. The row multipliers `u` of the LP certify the answer
//! through the dual thresholding conditions checked by
//! [`dual_certificate_check`].

use crate::constraints::{enumerate_feasible, ConstraintSystem};
use crate::error::{Error, Result};
use crate::lp;
use crate::polytope::DualPolytope;
use crate::TOLERANCE;

/// Rounding tolerance for reading a binary vertex off the LP solution.
const INTEGRALITY_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct TransformResult {
    /// The primal optimum, binary.
    pub y: Vec<u8>,
    /// Multipliers of the rows of `A` (box rows excluded).
    pub u: Vec<f64>,
    /// `ζ'y`.
    pub objective: f64,
    /// Rows with `(Ay - b)_k = 0`.
    pub active_rows: Vec<usize>,
}

/// Solves the LP and returns the binary maximizer with its dual vector.
///
/// Fails with `DegenerateInput` when the optimum is not a unique binary
/// vertex (a tie in `ζ`, or a non-integral polyhedron), and with
/// `Infeasible` when no point of the unit box satisfies `Az ≤ b`.
pub fn solve_transform(zeta: &[f64], cs: &ConstraintSystem) -> Result<TransformResult> {
    let d = cs.dim();
    if zeta.len() != d {
        return Err(Error::DimensionMismatch(format!("zeta has length {}, d = {d}", zeta.len())));
    }
    if zeta.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateInput("non-finite zeta".into()));
    }
    let rhs: Vec<f64> = cs.rhs().iter().map(|&b| b as f64).collect();
    let sol = lp::maximize(cs, zeta, &rhs, &vec![0.0; d], &vec![1.0; d])?;

    let mut y = Vec::with_capacity(d);
    for &x in &sol.x {
        let r = x.round();
        if (x - r).abs() > INTEGRALITY_TOL || !(r == 0.0 || r == 1.0) {
            return Err(Error::DegenerateInput(format!("fractional LP optimum {x}")));
        }
        y.push(r as u8);
    }
    if !cs.is_feasible(&y) {
        return Err(Error::DegenerateInput("rounded optimum is infeasible".into()));
    }
    let mut u: Vec<f64> = sol.duals.iter().map(|&v| v.max(0.0)).collect();

    // The vertex dual often sits on a threshold (ζ_j = A'_{.j}u). Replace it
    // by the point of largest threshold slack; if even that point does not
    // separate strictly, the optimum is tied.
    let separates = |u: &[f64]| {
        (0..d).all(|j| {
            let t = cs.column_dot(j, u);
            if y[j] == 1 {
                zeta[j] > t
            } else {
                zeta[j] < t
            }
        })
    };
    if !separates(&u) {
        let poly = DualPolytope::new(&y, zeta, cs)?;
        let (centre, slack) = poly.max_min_slack(false)?;
        if !(slack > 0.0 && separates(&centre)) {
            return Err(Error::DegenerateInput("tied optimum".into()));
        }
        u = centre;
    }

    let objective = zeta.iter().zip(&y).map(|(z, &v)| z * v as f64).sum();
    let active_rows = cs.active_rows(&y);
    Ok(TransformResult { y, u, objective, active_rows })
}

/// The three optimality conditions for `(y, u)`: complementary slackness
/// `u'(Ay - b) = 0`, `ζ_j ≥ A'_{.j}u` where `y_j = 1`, and `ζ_j ≤ A'_{.j}u`
/// where `y_j = 0`, each within [`TOLERANCE`].
pub fn dual_certificate_check(result: &TransformResult, zeta: &[f64], cs: &ConstraintSystem) -> bool {
    let y = &result.y;
    let u = &result.u;
    if y.len() != cs.dim() || zeta.len() != cs.dim() || u.len() != cs.num_rows() {
        return false;
    }
    if !cs.is_feasible(y) || u.iter().any(|&v| v < -TOLERANCE) {
        return false;
    }
    let comp: f64 = cs.slack(y).iter().zip(u).map(|(&s, &uk)| s as f64 * uk).sum();
    if comp.abs() > TOLERANCE {
        return false;
    }
    (0..cs.dim()).all(|j| {
        let threshold = cs.column_dot(j, u);
        if y[j] == 1 {
            zeta[j] >= threshold - TOLERANCE
        } else {
            zeta[j] <= threshold + TOLERANCE
        }
    })
}

/// `|ζ'y - (u'b + Σ_j (ζ_j - A'_{.j}u)_+)|`.
pub fn strong_duality_residual(result: &TransformResult, zeta: &[f64], cs: &ConstraintSystem) -> f64 {
    let primal: f64 = zeta.iter().zip(&result.y).map(|(z, &v)| z * v as f64).sum();
    let mut dual: f64 = result.u.iter().zip(cs.rhs()).map(|(u, &b)| u * b as f64).sum();
    for (j, &z) in zeta.iter().enumerate() {
        dual += (z - cs.column_dot(j, &result.u)).max(0.0);
    }
    (primal - dual).abs()
}

/// Exact argmax over the enumerated feasible set; ties go to the
/// lexicographically smallest vector.
pub fn brute_force_transform(zeta: &[f64], cs: &ConstraintSystem) -> Result<Vec<u8>> {
    let feasible = enumerate_feasible(cs)?;
    let mut best: Option<(f64, Vec<u8>)> = None;
    for y in feasible {
        let value: f64 = zeta.iter().zip(&y).map(|(z, &v)| z * v as f64).sum();
        if best.as_ref().is_none_or(|(b, _)| value > *b) {
            best = Some((value, y));
        }
    }
    best.map(|(_, y)| y).ok_or(Error::Infeasible)
}

/// Whether `ζ` lies in the (closed) pre-image `T^{-1}(y)`: some `u ≥ 0`,
/// zero on inactive rows, satisfies the thresholding inequalities.
pub fn preimage_contains(y: &[u8], zeta: &[f64], cs: &ConstraintSystem) -> Result<bool> {
    let poly = DualPolytope::new(y, zeta, cs)?;
    let (_, slack) = poly.max_min_slack(false)?;
    Ok(slack >= -TOLERANCE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{build_cardinality, build_equality, BipartiteGraph};

    fn card21() -> ConstraintSystem {
        build_cardinality(2, 1).unwrap()
    }

    #[test]
    fn closed_form_regions() {
        let cs = card21();
        assert_eq!(solve_transform(&[-0.5, -0.7], &cs).unwrap().y, vec![0, 0]);
        assert_eq!(solve_transform(&[0.3, 0.8], &cs).unwrap().y, vec![0, 1]);
        assert_eq!(solve_transform(&[0.9, 0.2], &cs).unwrap().y, vec![1, 0]);
        let free = ConstraintSystem::new(3, vec![], vec![]).unwrap();
        assert_eq!(solve_transform(&[0.9, -0.2, 0.4], &free).unwrap().y, vec![1, 0, 1]);
    }

    #[test]
    fn certificate_examples() {
        let cs = card21();
        let zeta = [0.9, 0.2];
        let mk = |y: Vec<u8>, u: f64| TransformResult { y, u: vec![u], objective: 0.0, active_rows: vec![] };
        assert!(dual_certificate_check(&mk(vec![1, 0], 0.5), &zeta, &cs));
        assert!(!dual_certificate_check(&mk(vec![1, 0], 0.1), &zeta, &cs));
        assert!(!dual_certificate_check(&mk(vec![0, 0], 0.3), &[-1.0, -1.0], &cs));
    }

    #[test]
    fn solved_results_certify() {
        let cs = card21();
        for zeta in [[0.9, 0.2], [-0.4, 0.1], [-1.0, -2.0], [2.0, 1.9]] {
            let r = solve_transform(&zeta, &cs).unwrap();
            assert!(dual_certificate_check(&r, &zeta, &cs));
            assert!(strong_duality_residual(&r, &zeta, &cs) < 1e-8);
        }
    }

    #[test]
    fn ties_are_degenerate() {
        let cs = card21();
        assert!(matches!(solve_transform(&[0.5, 0.5], &cs), Err(Error::DegenerateInput(_))));
        let free = ConstraintSystem::new(1, vec![], vec![]).unwrap();
        assert!(matches!(solve_transform(&[0.0], &free), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn infeasible_system() {
        // z1 + z2 >= 3 cannot hold in the unit box
        let cs = ConstraintSystem::new(2, vec![vec![-1, -1]], vec![-3]).unwrap();
        assert!(matches!(solve_transform(&[1.0, 1.0], &cs), Err(Error::Infeasible)));
    }

    #[test]
    fn perfect_matching_uses_phase_one() {
        let g = BipartiteGraph::complete(2, 2).unwrap();
        let cs = build_equality(4, g.incidence(), vec![1; 4]).unwrap();
        let zeta = [-1.0, 0.3, 0.2, -0.5];
        let r = solve_transform(&zeta, &cs).unwrap();
        assert_eq!(r.y, brute_force_transform(&zeta, &cs).unwrap());
        assert_eq!(r.y, vec![0, 1, 1, 0]);
    }

    #[test]
    fn brute_force_examples() {
        let cs = card21();
        assert_eq!(brute_force_transform(&[0.9, 0.2], &cs).unwrap(), vec![1, 0]);
        assert_eq!(brute_force_transform(&[-1.0, -1.0], &cs).unwrap(), vec![0, 0]);
    }

    #[test]
    fn preimage_examples() {
        let cs = card21();
        assert!(preimage_contains(&[1, 0], &[0.9, 0.2], &cs).unwrap());
        assert!(!preimage_contains(&[0, 1], &[0.9, 0.2], &cs).unwrap());
        assert!(preimage_contains(&[0, 0], &[-0.1, -0.1], &cs).unwrap());
        assert!(matches!(preimage_contains(&[1, 1], &[0.1, 0.1], &cs), Err(Error::InfeasibleY)));
    }
}
