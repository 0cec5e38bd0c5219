//! Synthetic pair-formation data in the style of a waterfowl courtship
//! study: ducks of several species, one bipartite male-female graph whose
//! edges are the possible within-species pairs, and a weekly matching
//! observed over a season.
//!
//! Edge means follow the grouped hierarchical model
//! `μ_t,e = α_0 + α_1 w_male(e) + α_2 w_female(e) + B(t)'β_{species(e)}`,
//! with `B` a cubic B-spline basis in time.

use std::io::Write;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::constraints::{build_matching, BipartiteGraph, ConstraintSystem};
use crate::distributions::SeededStream;
use crate::error::{Error, Result};
use crate::inference::{bspline_design, event_probabilities_at_means, BSplineBasis, Comparison, EventQuery, Predicate};
use crate::mcmc::{Chain, HierarchicalSpec};
use crate::simulate::simulate_responses;

const WEIGHT_STREAM: u64 = 1 << 34;

/// Scenario knobs; the default has 95 ducks, 339 possible pairs, 7 species
/// and a 5-column spline basis over 20 weeks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DuckScenario {
    /// `(males, females)` per species.
    pub species: Vec<(usize, usize)>,
    pub weeks: usize,
    pub obs_per_week: usize,
    pub num_basis: usize,
    /// True `(α_0, α_1, α_2)`.
    pub alpha: Vec<f64>,
    /// Amplitude of the true species curves.
    pub curve_amplitude: f64,
    pub tau_alpha: f64,
    pub tau_beta: f64,
    pub seed: u64,
}

impl Default for DuckScenario {
    fn default() -> Self {
        DuckScenario {
            species: vec![(7, 13), (9, 9), (7, 8), (6, 6), (5, 6), (5, 5), (4, 5)],
            weeks: 20,
            obs_per_week: 1,
            num_basis: 5,
            alpha: vec![-0.5, 0.3, -0.2],
            curve_amplitude: 0.8,
            tau_alpha: 0.1,
            tau_beta: 0.1,
            seed: 2024,
        }
    }
}

/// A generated data set with everything needed to fit and predict.
#[derive(Debug, Clone)]
pub struct DuckData {
    pub scenario: DuckScenario,
    pub graph: BipartiteGraph,
    pub constraints: ConstraintSystem,
    /// Species of each duck; males are ducks `0..L`, females follow.
    pub duck_species: Vec<usize>,
    pub duck_weight: Vec<f64>,
    /// Observation times.
    pub times: Vec<f64>,
    pub responses: Vec<Vec<u8>>,
    pub spec: HierarchicalSpec,
    pub basis: BSplineBasis,
    pub true_alpha: Vec<f64>,
    /// `κ × K`.
    pub true_beta: DMatrix<f64>,
}

impl DuckScenario {
    pub fn num_ducks(&self) -> usize {
        self.species.iter().map(|(m, f)| m + f).sum()
    }

    pub fn num_pairs(&self) -> usize {
        self.species.iter().map(|(m, f)| m * f).sum()
    }

    /// Simulates a season of matchings from the true parameters.
    pub fn generate(&self) -> Result<DuckData> {
        let mut data = self.design()?;
        let mean = data.spec.mean(&data.true_alpha, &data.true_beta).transpose();
        data.responses = simulate_responses(&mean, &data.constraints, self.seed)?;
        Ok(data)
    }

    /// Graph, designs and true parameters, without responses.
    pub fn design(&self) -> Result<DuckData> {
        if self.species.is_empty() || self.species.iter().any(|&(m, f)| m == 0 || f == 0) {
            return Err(Error::InvalidConfig("every species needs at least one male and one female".into()));
        }
        if self.alpha.len() != 3 {
            return Err(Error::InvalidConfig("alpha must have 3 entries".into()));
        }
        let males: usize = self.species.iter().map(|s| s.0).sum();
        let females: usize = self.species.iter().map(|s| s.1).sum();
        let mut duck_species = Vec::with_capacity(males + females);
        for (k, &(m, _)) in self.species.iter().enumerate() {
            duck_species.extend(std::iter::repeat_n(k, m));
        }
        for (k, &(_, f)) in self.species.iter().enumerate() {
            duck_species.extend(std::iter::repeat_n(k, f));
        }
        let mut edges = Vec::with_capacity(self.num_pairs());
        let (mut m0, mut f0) = (0, 0);
        for &(m, f) in &self.species {
            for a in m0..m0 + m {
                for b in f0..f0 + f {
                    edges.push((a, b));
                }
            }
            m0 += m;
            f0 += f;
        }
        let graph = BipartiteGraph::new(males, females, edges)?;
        let constraints = build_matching(&graph)?.with_label(Some("duck-style matching".into()));
        let mut rng = SeededStream::new(self.seed, WEIGHT_STREAM).rng();
        let duck_weight: Vec<f64> = (0..males + females).map(|_| rng.sample(StandardNormal)).collect();

        let n = self.weeks * self.obs_per_week;
        let times: Vec<f64> = (0..n).map(|i| (1 + i / self.obs_per_week) as f64).collect();
        let b = bspline_design(&times, self.num_basis)?;
        let basis = BSplineBasis::new(1.0, self.weeks as f64, self.num_basis)?;
        let d = graph.edges().len();
        let edge_weight = |e: usize, male: bool| {
            let (a, c) = graph.edges()[e];
            if male {
                duck_weight[a]
            } else {
                duck_weight[males + c]
            }
        };
        let w = vec![
            DMatrix::from_element(n, d, 1.0),
            DMatrix::from_fn(n, d, |_, e| edge_weight(e, true)),
            DMatrix::from_fn(n, d, |_, e| edge_weight(e, false)),
        ];
        let groups: Vec<usize> = graph.edges().iter().map(|&(a, _)| duck_species[a]).collect();
        let k = self.species.len();
        let spec = HierarchicalSpec::new(w, b, groups, k, DMatrix::identity(3, 3) / self.tau_alpha, self.tau_beta)?;
        let kappa = self.num_basis;
        let true_beta = DMatrix::from_fn(kappa, k, |r, g| {
            let x = r as f64 / (kappa - 1).max(1) as f64;
            self.curve_amplitude * (std::f64::consts::PI * (x + g as f64 / k as f64)).sin()
        });
        Ok(DuckData {
            scenario: self.clone(),
            graph,
            constraints,
            duck_species,
            duck_weight,
            times,
            responses: Vec::new(),
            spec,
            basis,
            true_alpha: self.alpha.clone(),
            true_beta,
        })
    }
}

impl DuckData {
    /// Replaces the responses, e.g. with observed data.
    pub fn with_responses(mut self, y: Vec<Vec<u8>>) -> Result<Self> {
        if y.len() != self.times.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} rows for {} observation times",
                y.len(),
                self.times.len()
            )));
        }
        for (i, row) in y.iter().enumerate() {
            if row.len() != self.constraints.dim() {
                return Err(Error::DimensionMismatch(format!("row {i} has length {}", row.len())));
            }
            if !self.constraints.is_feasible(row) {
                return Err(Error::InfeasibleRow(i));
            }
        }
        self.responses = y;
        Ok(self)
    }

    pub fn num_males(&self) -> usize {
        self.graph.left_nodes()
    }

    /// Edge means at time `t` for one draw of `(α, β)`.
    pub fn mean_at(&self, t: f64, alpha: &[f64], beta: &DMatrix<f64>) -> Vec<f64> {
        let bt = self.basis.evaluate(t);
        let males = self.num_males();
        let curve: Vec<f64> = (0..beta.ncols()).map(|g| (0..bt.len()).map(|r| bt[r] * beta[(r, g)]).sum()).collect();
        self.graph
            .edges()
            .iter()
            .map(|&(a, c)| {
                alpha[0]
                    + alpha[1] * self.duck_weight[a]
                    + alpha[2] * self.duck_weight[males + c]
                    + curve[self.duck_species[a]]
            })
            .collect()
    }

    /// The first male of each species.
    pub fn focal_ducks(&self) -> Vec<usize> {
        (0..self.scenario.species.len())
            .map(|k| self.duck_species.iter().position(|&s| s == k).expect("species has males"))
            .collect()
    }

    /// `duck` is matched: exactly one incident pair is formed. With
    /// `competition`, conditioned on at least one unmatched duck of the
    /// opposite sex in the same species.
    pub fn matching_query(&self, duck: usize, competition: bool) -> EventQuery {
        let matched = Predicate::Sum { coords: self.graph.incident_edges(duck), cmp: Comparison::Eq, target: 1 };
        let q = EventQuery::new(matched);
        if !competition {
            return q;
        }
        let males = self.num_males();
        let is_male = duck < males;
        let species = self.duck_species[duck];
        let rivals: Vec<Predicate> = (0..self.duck_species.len())
            .filter(|&v| (v < males) != is_male && self.duck_species[v] == species)
            .map(|v| Predicate::Sum { coords: self.graph.incident_edges(v), cmp: Comparison::Eq, target: 0 })
            .collect();
        q.given(Predicate::Any { of: rivals })
    }
}

/// One point of a probability curve with its pointwise 95% band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub t: f64,
    pub group: usize,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Matching probability of each species' focal duck over `grid`, using
/// every retained draw of a hierarchical chain.
pub fn matching_curves(
    data: &DuckData,
    chain: &Chain,
    grid: &[f64],
    mc_draws: usize,
    competition: bool,
    seed: u64,
) -> Result<Vec<CurvePoint>> {
    if chain.is_empty() {
        return Err(Error::EmptyChain);
    }
    if chain.num_alpha != 3 || chain.beta_rows != data.spec.kappa() || chain.beta_cols != data.spec.num_groups {
        return Err(Error::DimensionMismatch("chain does not match the duck-style model".into()));
    }
    let queries: Vec<EventQuery> =
        data.focal_ducks().into_iter().map(|v| data.matching_query(v, competition)).collect();
    let mut points = Vec::with_capacity(grid.len() * queries.len());
    for (ti, &t) in grid.iter().enumerate() {
        let means: Vec<Vec<f64>> = (0..chain.len()).map(|s| data.mean_at(t, chain.alpha(s), &chain.beta(s))).collect();
        let est =
            event_probabilities_at_means(&means, &data.constraints, &queries, mc_draws, seed.wrapping_add(ti as u64))?;
        for (group, e) in est.into_iter().enumerate() {
            points.push(CurvePoint { t, group, mean: e.mean, lower: e.lower, upper: e.upper });
        }
    }
    Ok(points)
}

/// CSV with columns `t,group,prob_mean,prob_lo,prob_hi`.
pub fn write_curves_csv<W: Write>(points: &[CurvePoint], mut out: W) -> std::io::Result<()> {
    writeln!(out, "t,group,prob_mean,prob_lo,prob_hi")?;
    for p in points {
        writeln!(out, "{},{},{},{},{}", p.t, p.group + 1, p.mean, p.lower, p.upper)?;
    }
    Ok(())
}
