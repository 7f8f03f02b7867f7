// SPDX-License-Identifier: Apache-2.0

//! Exact centralities by one breadth-first visit per node, and error
//! summaries of estimates against them.

use rayon::prelude::*;
use statrs::statistics::{Data, OrderStatistics, Statistics};
use thiserror::Error;

use crate::centrality::{closeness, lin, Centralities, DiscountSpec};
use crate::graph::{CsrGraph, NodeWeights};

/// Largest accepted `n * m` product unless overridden.
pub const DEFAULT_BUDGET: u128 = 10_000_000_000;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("exact computation needs about {cost} node-arc steps, budget is {budget}")]
    BudgetExceeded { cost: u128, budget: u128 },
    #[error("weights cover {found} nodes, graph has {expected}")]
    WeightCount { expected: usize, found: usize },
    #[error("arrays have different lengths: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

/// Exact incoming-distance sums of every node.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactCentralities {
    /// `sum_y w(y) d(y, x)` over coreachable `y`.
    pub sum_dist: Vec<u64>,
    /// `sum_{y != x} w(y) / d(y, x)`, summed by increasing distance.
    pub sum_recip: Vec<f64>,
    /// `sum_{d(y, x) < inf} w(y)`, including `x`.
    pub coreach: Vec<u64>,
    pub specs: Vec<DiscountSpec>,
    /// One array per spec: `sum_{y != x} w(y) f(d(y, x))`.
    pub discounted: Vec<Vec<f64>>,
}

impl ExactCentralities {
    pub fn len(&self) -> usize {
        self.sum_dist.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sum_dist.is_empty()
    }

    pub fn sum_dist_f64(&self) -> Vec<f64> {
        self.sum_dist.iter().map(|&d| d as f64).collect()
    }

    pub fn coreach_f64(&self) -> Vec<f64> {
        self.coreach.iter().map(|&c| c as f64).collect()
    }

    pub fn centralities(&self) -> Centralities {
        let sum_dist = self.sum_dist_f64();
        let coreach = self.coreach_f64();
        Centralities {
            closeness: closeness(&sum_dist),
            harmonic: self.sum_recip.clone(),
            lin: lin(&coreach, &sum_dist),
            coreach,
            discounted: self
                .specs
                .iter()
                .zip(&self.discounted)
                .map(|(s, d)| (s.name().to_string(), d.clone()))
                .collect(),
        }
    }
}

struct NodeSums {
    sum_dist: u64,
    sum_recip: f64,
    coreach: u64,
    discounted: Vec<f64>,
}

/// Visits the transpose of `g` from every node. `budget` bounds `n * m`
/// (default [`DEFAULT_BUDGET`]).
pub fn exact_all(
    g: &CsrGraph,
    specs: &[DiscountSpec],
    weights: Option<&NodeWeights>,
    budget: Option<u128>,
) -> Result<ExactCentralities, OracleError> {
    let n = g.num_nodes();
    let budget = budget.unwrap_or(DEFAULT_BUDGET);
    let cost = n as u128 * g.num_arcs().max(1) as u128;
    if cost > budget {
        return Err(OracleError::BudgetExceeded { cost, budget });
    }
    if let Some(w) = weights {
        if w.len() != n {
            return Err(OracleError::WeightCount {
                expected: n,
                found: w.len(),
            });
        }
    }
    let weight = |v: usize| weights.map_or(1, |w| w.weight(v));
    let transpose = g.transpose();

    let sums: Vec<NodeSums> = (0..n)
        .into_par_iter()
        .map_init(
            || (vec![u32::MAX; n], Vec::with_capacity(n)),
            |(seen, queue), x| {
                // `seen[y] == x` marks y as visited from x.
                let stamp = x as u32;
                queue.clear();
                queue.push(x);
                seen[x] = stamp;
                let mut out = NodeSums {
                    sum_dist: 0,
                    sum_recip: 0.0,
                    coreach: weight(x),
                    discounted: vec![0.0; specs.len()],
                };
                let (mut level_start, mut t) = (0, 0usize);
                while level_start < queue.len() {
                    let level_end = queue.len();
                    t += 1;
                    let mut count = 0u64;
                    for i in level_start..level_end {
                        for &y in transpose.successors(queue[i]) {
                            if seen[y] != stamp {
                                seen[y] = stamp;
                                queue.push(y);
                                count += weight(y);
                            }
                        }
                    }
                    if count > 0 {
                        out.sum_dist += t as u64 * count;
                        out.sum_recip += count as f64 / t as f64;
                        out.coreach += count;
                        for (acc, spec) in out.discounted.iter_mut().zip(specs) {
                            *acc += spec.apply(t, count as f64);
                        }
                    }
                    level_start = level_end;
                }
                out
            },
        )
        .collect();

    let mut exact = ExactCentralities {
        sum_dist: Vec::with_capacity(n),
        sum_recip: Vec::with_capacity(n),
        coreach: Vec::with_capacity(n),
        specs: specs.to_vec(),
        discounted: vec![Vec::with_capacity(n); specs.len()],
    };
    for s in sums {
        exact.sum_dist.push(s.sum_dist);
        exact.sum_recip.push(s.sum_recip);
        exact.coreach.push(s.coreach);
        for (col, v) in exact.discounted.iter_mut().zip(s.discounted) {
            col.push(v);
        }
    }
    Ok(exact)
}

/// Error of one node's estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeError {
    pub node: usize,
    pub exact: f64,
    pub estimate: f64,
    /// `|estimate - exact| / exact`; `None` when the exact value is 0.
    pub rel_error: Option<f64>,
    pub abs_error: f64,
}

/// Distribution of relative errors over the nodes with a nonzero exact
/// value. Statistics are NaN when there is no such node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSummary {
    pub count: usize,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub mean: f64,
    pub std: f64,
    /// Nodes whose exact value is 0, reported by absolute error.
    pub zero_exact: usize,
    pub max_abs_error_zero_exact: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub nodes: Vec<NodeError>,
    pub summary: ErrorSummary,
}

pub fn compare(estimated: &[f64], exact: &[f64]) -> Result<Comparison, OracleError> {
    if estimated.len() != exact.len() {
        return Err(OracleError::LengthMismatch(estimated.len(), exact.len()));
    }
    let nodes: Vec<NodeError> = estimated
        .iter()
        .zip(exact)
        .enumerate()
        .map(|(node, (&estimate, &exact))| {
            let abs_error = (estimate - exact).abs();
            NodeError {
                node,
                exact,
                estimate,
                rel_error: (exact != 0.0).then(|| abs_error / exact.abs()),
                abs_error,
            }
        })
        .collect();
    let rel: Vec<f64> = nodes.iter().filter_map(|e| e.rel_error).collect();
    let zero: Vec<f64> = nodes
        .iter()
        .filter(|e| e.rel_error.is_none())
        .map(|e| e.abs_error)
        .collect();
    let (mean, std) = match rel.len() {
        0 => (f64::NAN, f64::NAN),
        1 => (rel[0], 0.0),
        _ => (rel.iter().mean(), rel.iter().std_dev()),
    };
    let count = rel.len();
    let mut data = Data::new(rel);
    let (q1, median, q3) = if count == 0 {
        (f64::NAN, f64::NAN, f64::NAN)
    } else {
        (data.lower_quartile(), data.median(), data.upper_quartile())
    };
    Ok(Comparison {
        nodes,
        summary: ErrorSummary {
            count,
            q1,
            median,
            q3,
            mean,
            std,
            zero_exact: zero.len(),
            max_abs_error_zero_exact: zero.iter().copied().fold(0.0, f64::max),
        },
    })
}
