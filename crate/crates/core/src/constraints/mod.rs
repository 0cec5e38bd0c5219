//! Affine constraint systems `Az ≤ b` over binary vectors.
//!
//! Entries of `A` are restricted to `{-1, 0, 1}`; `b` is integer. The unit
//! box `0 ≤ z ≤ 1` is always implied and never stored as rows. All indices in
//! this API are zero-based.

mod integral;
mod tum;

pub use integral::verify_integral;
pub use tum::{determinant, is_tum, is_tum_with_budget, TumBudget};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum dimension accepted by [`enumerate_feasible`].
pub const MAX_ENUMERATION_DIM: usize = 20;

/// The pair `(A, b)` defining `P = {z : Az ≤ b}` intersected with the unit box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConstraintJson", into = "ConstraintJson")]
pub struct ConstraintSystem {
    dim: usize,
    rows: Vec<Vec<i8>>,
    rhs: Vec<i64>,
    label: Option<String>,
    // column-major sparse view, (row, coefficient)
    columns: Vec<Vec<(usize, i8)>>,
}

/// On-disk layout: `{"d", "m", "A", "b", "label"}` in that key order.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ConstraintJson {
    d: usize,
    m: usize,
    #[serde(rename = "A")]
    a: Vec<Vec<i64>>,
    b: Vec<i64>,
    label: Option<String>,
}

impl TryFrom<ConstraintJson> for ConstraintSystem {
    type Error = Error;

    fn try_from(json: ConstraintJson) -> Result<Self> {
        if json.a.len() != json.m {
            return Err(Error::DimensionMismatch(format!("m = {} but A has {} rows", json.m, json.a.len())));
        }
        let cs = ConstraintSystem::new(json.d, json.a, json.b)?;
        Ok(cs.with_label(json.label))
    }
}

impl From<ConstraintSystem> for ConstraintJson {
    fn from(cs: ConstraintSystem) -> Self {
        ConstraintJson { d: cs.dim, m: cs.rows.len(), a: cs.matrix(), b: cs.rhs.clone(), label: cs.label.clone() }
    }
}

impl ConstraintSystem {
    /// Validates `A` (rows of length `d`, entries in `{-1,0,1}`) and `b`.
    pub fn new(dim: usize, a: Vec<Vec<i64>>, b: Vec<i64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::DimensionMismatch("d must be at least 1".into()));
        }
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch(format!("A has {} rows but b has {} entries", a.len(), b.len())));
        }
        let mut rows = Vec::with_capacity(a.len());
        for (i, row) in a.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::DimensionMismatch(format!("row {i} has length {}, expected {dim}", row.len())));
            }
            let mut r = Vec::with_capacity(dim);
            for (j, &v) in row.iter().enumerate() {
                if !(-1..=1).contains(&v) {
                    return Err(Error::InvalidEntry { row: i, col: j, value: v });
                }
                r.push(v as i8);
            }
            rows.push(r);
        }
        let mut columns = vec![Vec::new(); dim];
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0 {
                    columns[j].push((i, v));
                }
            }
        }
        Ok(ConstraintSystem { dim, rows, rhs: b, label: None, columns })
    }

    /// Infers `d` from the first row. Use [`ConstraintSystem::new`] for
    /// systems without rows.
    pub fn from_rows(a: Vec<Vec<i64>>, b: Vec<i64>) -> Result<Self> {
        let dim = a
            .first()
            .map(|r| r.len())
            .ok_or_else(|| Error::DimensionMismatch("cannot infer d from an empty A".into()))?;
        Self::new(dim, a, b)
    }

    pub fn with_label(mut self, label: Option<String>) -> Self {
        self.label = label;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn rhs(&self) -> &[i64] {
        &self.rhs
    }

    pub fn entry(&self, row: usize, col: usize) -> i8 {
        self.rows[row][col]
    }

    pub fn row(&self, row: usize) -> &[i8] {
        &self.rows[row]
    }

    /// Nonzero entries of column `j` as `(row, coefficient)`.
    pub fn column(&self, j: usize) -> &[(usize, i8)] {
        &self.columns[j]
    }

    /// Dense copy of `A`.
    pub fn matrix(&self) -> Vec<Vec<i64>> {
        self.rows.iter().map(|r| r.iter().map(|&v| v as i64).collect()).collect()
    }

    /// `A'_{.j} u` for a dual vector over the rows.
    pub fn column_dot(&self, j: usize, u: &[f64]) -> f64 {
        self.columns[j].iter().map(|&(k, c)| c as f64 * u[k]).sum()
    }

    /// `b - Ay` computed exactly.
    pub fn slack(&self, y: &[u8]) -> Vec<i64> {
        let mut s = self.rhs.clone();
        for (col, &z) in self.columns.iter().zip(y) {
            if z != 0 {
                for &(k, c) in col {
                    s[k] -= c as i64 * z as i64;
                }
            }
        }
        s
    }

    pub fn is_feasible(&self, y: &[u8]) -> bool {
        y.len() == self.dim && y.iter().all(|&v| v <= 1) && self.slack(y).iter().all(|&s| s >= 0)
    }

    /// Rows with `(Ay - b)_k = 0`.
    pub fn active_rows(&self, y: &[u8]) -> Vec<usize> {
        self.slack(y).iter().enumerate().filter_map(|(k, &s)| (s == 0).then_some(k)).collect()
    }

    /// The system with the unit box written out: `[A; I; -I] z ≤ [b; 1; 0]`.
    pub fn boxed(&self) -> ConstraintSystem {
        let d = self.dim;
        let mut a = self.matrix();
        let mut b = self.rhs.clone();
        for sign in [1i64, -1] {
            for j in 0..d {
                let mut row = vec![0; d];
                row[j] = sign;
                a.push(row);
                b.push(if sign == 1 { 1 } else { 0 });
            }
        }
        ConstraintSystem::new(d, a, b).expect("boxing preserves validity").with_label(self.label.clone())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("constraint system serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// A bipartite graph whose edge order fixes the LP variable order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BipartiteGraph {
    left_nodes: usize,
    right_nodes: usize,
    edges: Vec<(usize, usize)>,
}

impl BipartiteGraph {
    pub fn new(left_nodes: usize, right_nodes: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        if left_nodes == 0 || right_nodes == 0 {
            return Err(Error::DimensionMismatch("both sides need at least one node".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for &(l, r) in &edges {
            if l >= left_nodes {
                return Err(Error::IndexOutOfRange { index: l, dim: left_nodes });
            }
            if r >= right_nodes {
                return Err(Error::IndexOutOfRange { index: r, dim: right_nodes });
            }
            if !seen.insert((l, r)) {
                return Err(Error::DimensionMismatch(format!("duplicate edge ({l}, {r})")));
            }
        }
        Ok(BipartiteGraph { left_nodes, right_nodes, edges })
    }

    /// `K_{l,r}` with edges ordered left-major.
    pub fn complete(left_nodes: usize, right_nodes: usize) -> Result<Self> {
        let edges = (0..left_nodes).flat_map(|l| (0..right_nodes).map(move |r| (l, r))).collect();
        Self::new(left_nodes, right_nodes, edges)
    }

    pub fn left_nodes(&self) -> usize {
        self.left_nodes
    }

    pub fn right_nodes(&self) -> usize {
        self.right_nodes
    }

    pub fn num_nodes(&self) -> usize {
        self.left_nodes + self.right_nodes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Edge indices incident to node `v`, where right node `r` is numbered
    /// `left_nodes + r`.
    pub fn incident_edges(&self, v: usize) -> Vec<usize> {
        self.edges
            .iter()
            .enumerate()
            .filter_map(|(e, &(l, r))| (l == v || self.left_nodes + r == v).then_some(e))
            .collect()
    }

    /// Node-edge incidence matrix, left nodes first.
    pub fn incidence(&self) -> Vec<Vec<i64>> {
        let mut a = vec![vec![0; self.edges.len()]; self.num_nodes()];
        for (e, &(l, r)) in self.edges.iter().enumerate() {
            a[l][e] = 1;
            a[self.left_nodes + r][e] = 1;
        }
        a
    }
}

/// At most `max_successes` ones among `d` coordinates.
pub fn build_cardinality(d: usize, max_successes: usize) -> Result<ConstraintSystem> {
    Ok(ConstraintSystem::new(d, vec![vec![1; d]], vec![max_successes as i64])?
        .with_label(Some(format!("cardinality(d={d},M={max_successes})"))))
}

/// Every node carries at most one chosen edge.
pub fn build_matching(g: &BipartiteGraph) -> Result<ConstraintSystem> {
    if g.edges.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let a = g.incidence();
    let b = vec![1; a.len()];
    Ok(ConstraintSystem::new(g.edges.len(), a, b)?.with_label(Some(format!(
        "matching(left={},right={},edges={})",
        g.left_nodes,
        g.right_nodes,
        g.edges.len()
    ))))
}

/// One row `z_j - z_k ≤ 0` per pair `(j, k)`.
pub fn build_partial_order(d: usize, pairs: &[(usize, usize)]) -> Result<ConstraintSystem> {
    let mut a = Vec::with_capacity(pairs.len());
    for &(j, k) in pairs {
        for idx in [j, k] {
            if idx >= d {
                return Err(Error::IndexOutOfRange { index: idx, dim: d });
            }
        }
        if j == k {
            return Err(Error::SelfPair(j));
        }
        let mut row = vec![0; d];
        row[j] = 1;
        row[k] = -1;
        a.push(row);
    }
    let b = vec![0; a.len()];
    Ok(ConstraintSystem::new(d, a, b)?.with_label(Some("partial_order".into())))
}

/// `Ãz = b̃` written as `[Ã; -Ã] z ≤ [b̃; -b̃]`.
pub fn build_equality(d: usize, a_tilde: Vec<Vec<i64>>, b_tilde: Vec<i64>) -> Result<ConstraintSystem> {
    let mut a = a_tilde.clone();
    a.extend(a_tilde.iter().map(|r| r.iter().map(|&v| -v).collect::<Vec<_>>()));
    let mut b = b_tilde.clone();
    b.extend(b_tilde.iter().map(|&v| -v));
    Ok(ConstraintSystem::new(d, a, b)?.with_label(Some("equality".into())))
}

/// All feasible binary vectors in lexicographic order (first coordinate most
/// significant).
pub fn enumerate_feasible(cs: &ConstraintSystem) -> Result<Vec<Vec<u8>>> {
    let d = cs.dim();
    if d > MAX_ENUMERATION_DIM {
        return Err(Error::SizeLimitExceeded(format!("enumeration needs d <= {MAX_ENUMERATION_DIM}, got {d}")));
    }
    let mut out = Vec::new();
    let mut y = vec![0u8; d];
    for code in 0u32..(1u32 << d) {
        for (j, v) in y.iter_mut().enumerate() {
            *v = ((code >> (d - 1 - j)) & 1) as u8;
        }
        if cs.is_feasible(&y) {
            out.push(y.clone());
        }
    }
    Ok(out)
}

/// Renders a binary vector as a bit string, e.g. `[0, 1] -> "01"`.
pub fn bits_to_string(y: &[u8]) -> String {
    y.iter().map(|&v| if v == 1 { '1' } else { '0' }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cardinality_row() {
        let cs = ConstraintSystem::new(2, vec![vec![1, 1]], vec![1]).unwrap();
        assert_eq!(cs.num_rows(), 1);
        assert_eq!(cs.dim(), 2);
        assert_eq!(build_cardinality(2, 1).unwrap().matrix(), vec![vec![1, 1]]);
        assert_eq!(build_cardinality(3, 3).unwrap().rhs(), &[3]);
    }

    #[test]
    fn box_only_and_invalid_entries() {
        let cs = ConstraintSystem::new(3, vec![], vec![]).unwrap();
        assert_eq!(cs.num_rows(), 0);
        assert_eq!(enumerate_feasible(&cs).unwrap().len(), 8);
        assert!(matches!(
            ConstraintSystem::new(2, vec![vec![2, 0]], vec![1]),
            Err(Error::InvalidEntry { value: 2, .. })
        ));
        assert!(matches!(ConstraintSystem::new(2, vec![vec![1, 0]], vec![1, 2]), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn cardinality_zero_allows_only_origin() {
        let cs = build_cardinality(5, 0).unwrap();
        assert_eq!(enumerate_feasible(&cs).unwrap(), vec![vec![0u8; 5]]);
    }

    #[test]
    fn feasible_sets() {
        let cs = build_cardinality(2, 1).unwrap();
        assert_eq!(enumerate_feasible(&cs).unwrap(), vec![vec![0, 0], vec![0, 1], vec![1, 0]]);
        let chain = build_partial_order(3, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(
            enumerate_feasible(&chain).unwrap(),
            vec![vec![0, 0, 0], vec![0, 0, 1], vec![0, 1, 1], vec![1, 1, 1]]
        );
        let eq = build_equality(2, vec![vec![1, 1]], vec![1]).unwrap();
        assert_eq!(eq.matrix(), vec![vec![1, 1], vec![-1, -1]]);
        assert_eq!(eq.rhs(), &[1, -1]);
        assert_eq!(enumerate_feasible(&eq).unwrap(), vec![vec![0, 1], vec![1, 0]]);
    }

    #[test]
    fn matching_incidence() {
        let k11 = BipartiteGraph::complete(1, 1).unwrap();
        let cs = build_matching(&k11).unwrap();
        assert_eq!(cs.matrix(), vec![vec![1], vec![1]]);
        assert_eq!(cs.rhs(), &[1, 1]);

        let k22 = BipartiteGraph::complete(2, 2).unwrap();
        let cs = build_matching(&k22).unwrap();
        // edges (0,0) (0,1) (1,0) (1,1); rows L0 L1 R0 R1
        assert_eq!(cs.matrix(), vec![vec![1, 1, 0, 0], vec![0, 0, 1, 1], vec![1, 0, 1, 0], vec![0, 1, 0, 1]]);
        let perfect = build_equality(4, k22.incidence(), vec![1; 4]).unwrap();
        assert_eq!(enumerate_feasible(&perfect).unwrap().len(), 2);

        assert!(matches!(BipartiteGraph::new(1, 1, vec![]).and_then(|g| build_matching(&g)), Err(Error::EmptyGraph)));
    }

    #[test]
    fn partial_order_errors() {
        assert_eq!(build_partial_order(2, &[(0, 1)]).unwrap().matrix(), vec![vec![1, -1]]);
        assert_eq!(build_partial_order(3, &[]).unwrap().num_rows(), 0);
        assert!(matches!(build_partial_order(2, &[(0, 2)]), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(build_partial_order(2, &[(1, 1)]), Err(Error::SelfPair(1))));
    }

    #[test]
    fn json_layout() {
        let cs = build_cardinality(2, 1).unwrap();
        let json = cs.to_json();
        assert_eq!(json, r#"{"d":2,"m":1,"A":[[1,1]],"b":[1],"label":"cardinality(d=2,M=1)"}"#);
        assert_eq!(ConstraintSystem::from_json(&json).unwrap(), cs);
        let unlabeled = ConstraintSystem::from_json(r#"{"d":3,"m":0,"A":[],"b":[],"label":null}"#).unwrap();
        assert_eq!(unlabeled.dim(), 3);
        assert!(ConstraintSystem::from_json(r#"{"d":2,"m":2,"A":[[1,1]],"b":[1],"label":null}"#).is_err());
        assert!(ConstraintSystem::from_json("{not json").is_err());
    }

    #[test]
    fn boxed_system() {
        let cs = build_cardinality(2, 1).unwrap().boxed();
        assert_eq!(cs.num_rows(), 5);
        assert_eq!(cs.rhs(), &[1, 1, 1, 0, 0]);
        assert_eq!(cs.row(3), &[-1, 0]);
    }
}
