//! Declarative events over binary outcome vectors.
//!
//! A predicate is a tree of coordinate-sum comparisons. Coordinates are
//! 0-based. In JSON:
//!
//! ```json
//! {"event": {"op": "sum", "coords": [0, 3], "cmp": "eq", "target": 1},
//!  "given": {"op": "any", "of": [{"op": "sum", "coords": [2], "cmp": "eq", "target": 0}]}}
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Comparison {
    pub fn apply(self, lhs: i64, rhs: i64) -> bool {
        match self {
            Comparison::Eq => lhs == rhs,
            Comparison::Ne => lhs != rhs,
            Comparison::Lt => lhs < rhs,
            Comparison::Le => lhs <= rhs,
            Comparison::Gt => lhs > rhs,
            Comparison::Ge => lhs >= rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Predicate {
    True,
    /// `Σ_{j ∈ coords} y_j  cmp  target`.
    Sum {
        coords: Vec<usize>,
        cmp: Comparison,
        target: i64,
    },
    All {
        of: Vec<Predicate>,
    },
    Any {
        of: Vec<Predicate>,
    },
    Not {
        of: Box<Predicate>,
    },
}

impl Predicate {
    pub fn holds(&self, y: &[u8]) -> bool {
        match self {
            Predicate::True => true,
            Predicate::Sum { coords, cmp, target } => {
                let s: i64 = coords.iter().map(|&j| y[j] as i64).sum();
                cmp.apply(s, *target)
            }
            Predicate::All { of } => of.iter().all(|p| p.holds(y)),
            Predicate::Any { of } => of.iter().any(|p| p.holds(y)),
            Predicate::Not { of } => !of.holds(y),
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        match self {
            Predicate::True => Ok(()),
            Predicate::Sum { coords, .. } => match coords.iter().find(|&&j| j >= d) {
                Some(&j) => Err(Error::IndexOutOfRange { index: j, dim: d }),
                None => Ok(()),
            },
            Predicate::All { of } | Predicate::Any { of } => of.iter().try_for_each(|p| p.validate(d)),
            Predicate::Not { of } => of.validate(d),
        }
    }
}

/// An event and an optional conditioning event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventQuery {
    pub event: Predicate,
    #[serde(default)]
    pub given: Option<Predicate>,
}

impl EventQuery {
    pub fn new(event: Predicate) -> Self {
        EventQuery { event, given: None }
    }

    pub fn given(mut self, condition: Predicate) -> Self {
        self.given = Some(condition);
        self
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        self.event.validate(d)?;
        self.given.as_ref().map_or(Ok(()), |g| g.validate(d))
    }

    pub fn conditioning_holds(&self, y: &[u8]) -> bool {
        self.given.as_ref().is_none_or(|g| g.holds(y))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let text = r#"{"event": {"op": "sum", "coords": [0, 3], "cmp": "eq", "target": 1},
            "given": {"op": "any", "of": [{"op": "sum", "coords": [2], "cmp": "eq", "target": 0}]}}"#;
        let q = EventQuery::from_json(text).unwrap();
        assert!(q.event.holds(&[1, 0, 0, 0]));
        assert!(!q.event.holds(&[1, 0, 0, 1]));
        assert!(q.conditioning_holds(&[0, 0, 0, 0]));
        assert!(!q.conditioning_holds(&[0, 0, 1, 0]));
        let back = EventQuery::from_json(&serde_json::to_string(&q).unwrap()).unwrap();
        assert_eq!(back, q);
        assert!(q.validate(4).is_ok());
        assert_eq!(q.validate(3), Err(Error::IndexOutOfRange { index: 3, dim: 3 }));
    }

    #[test]
    fn combinators() {
        let one = Predicate::Sum { coords: vec![0], cmp: Comparison::Ge, target: 1 };
        let not = Predicate::Not { of: Box::new(one.clone()) };
        assert!(Predicate::All { of: vec![] }.holds(&[0]));
        assert!(!Predicate::Any { of: vec![] }.holds(&[0]));
        assert!(not.holds(&[0]) && !not.holds(&[1]));
    }
}
