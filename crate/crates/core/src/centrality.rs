// SPDX-License-Identifier: Apache-2.0

//! Geometric centralities from telescoped ball sizes.
//!
//! Run the engine on the transpose of a graph: the ball of radius `t`
//! around `x` then holds the nodes `y` with `d(y, x) <= t`, and the growth
//! of the ball between `t - 1` and `t` counts the nodes at distance exactly
//! `t`. Weighting these counts by `t`, `1/t` or a discount `f(t)` and
//! summing gives the sum of distances, the harmonic centrality and the
//! discounted-gain centralities of `x`.

use std::fmt;

use rayon::prelude::*;
use thiserror::Error;

use crate::hyperball::BallObserver;

#[derive(Debug, Error)]
pub enum CentralityError {
    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(usize),
    #[error("discount table must be non-negative and non-increasing: {0}")]
    BadDiscountTable(String),
    #[error("arrays have different lengths: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("at least one run is required")]
    NoRuns,
}

/// A non-increasing discount function on positive distances, with
/// `f(t) >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum DiscountSpec {
    /// `1/t`
    Harmonic,
    /// `1/log2(t + 1)`
    Logarithmic,
    /// `1/t^2`
    Quadratic,
    /// `1`
    Constant,
    /// Explicit values `f(1), f(2), ...`, then `tail` beyond the table.
    Table { values: Vec<f64>, tail: f64 },
}

impl DiscountSpec {
    pub fn table(values: Vec<f64>, tail: f64) -> Result<Self, CentralityError> {
        let all = values.iter().chain(std::iter::once(&tail));
        if all.clone().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(CentralityError::BadDiscountTable(
                "values must be finite and >= 0".into(),
            ));
        }
        let seq: Vec<f64> = all.copied().collect();
        if let Some(i) = seq.windows(2).position(|w| w[1] > w[0]) {
            return Err(CentralityError::BadDiscountTable(format!(
                "f({}) = {} exceeds f({}) = {}",
                i + 2,
                seq[i + 1],
                i + 1,
                seq[i]
            )));
        }
        Ok(Self::Table { values, tail })
    }

    /// Parses a table: one value per line for `t = 1, 2, ...`, and a
    /// mandatory `tail <value>` line. `#` starts a comment.
    pub fn parse_table(text: &str) -> Result<Self, CentralityError> {
        let mut values = Vec::new();
        let mut tail = None;
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let bad = || CentralityError::BadDiscountTable(format!("line {}: {line:?}", i + 1));
            if let Some(rest) = line.strip_prefix("tail") {
                tail = Some(rest.trim().parse::<f64>().map_err(|_| bad())?);
            } else {
                values.push(line.parse::<f64>().map_err(|_| bad())?);
            }
        }
        let tail = tail.ok_or_else(|| {
            CentralityError::BadDiscountTable("missing 'tail <value>' line".into())
        })?;
        Self::table(values, tail)
    }

    pub fn name(&self) -> &'static str {
        match self {
            DiscountSpec::Harmonic => "harmonic",
            DiscountSpec::Logarithmic => "log",
            DiscountSpec::Quadratic => "quad",
            DiscountSpec::Constant => "const",
            DiscountSpec::Table { .. } => "table",
        }
    }

    /// `f(t)` for `t >= 1`.
    pub fn value(&self, t: usize) -> f64 {
        match self {
            DiscountSpec::Harmonic => 1.0 / t as f64,
            DiscountSpec::Logarithmic => 1.0 / ((t + 1) as f64).log2(),
            DiscountSpec::Quadratic => 1.0 / (t as f64 * t as f64),
            DiscountSpec::Constant => 1.0,
            DiscountSpec::Table { values, tail } => values.get(t - 1).copied().unwrap_or(*tail),
        }
    }

    /// Contribution `f(t) * count` of `count` nodes at distance `t`.
    #[inline]
    pub fn apply(&self, t: usize, count: f64) -> f64 {
        match self {
            // Same rounding as the reciprocal-distance sum.
            DiscountSpec::Harmonic => count / t as f64,
            DiscountSpec::Quadratic => count / (t as f64 * t as f64),
            DiscountSpec::Logarithmic => count / ((t + 1) as f64).log2(),
            DiscountSpec::Constant => count,
            DiscountSpec::Table { .. } => self.value(t) * count,
        }
    }
}

impl fmt::Display for DiscountSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-node running sums fed by the engine.
#[derive(Debug, Clone)]
pub struct CentralityAccumulator {
    sum_dist: Vec<f64>,
    sum_recip: Vec<f64>,
    specs: Vec<DiscountSpec>,
    discounted: Vec<Vec<f64>>,
    coreach: Vec<f64>,
}

impl CentralityAccumulator {
    pub fn new(n: usize, specs: Vec<DiscountSpec>) -> Self {
        Self {
            sum_dist: vec![0.0; n],
            sum_recip: vec![0.0; n],
            discounted: vec![vec![0.0; n]; specs.len()],
            specs,
            coreach: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.sum_dist.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sum_dist.is_empty()
    }

    /// Adds `delta` (possibly weighted) nodes at distance `t` to the sums of
    /// `x`. Negative deltas count as zero.
    pub fn accumulate(&mut self, x: usize, t: usize, delta: f64) -> Result<(), CentralityError> {
        if t == 0 {
            return Err(CentralityError::NonPositiveDistance(t));
        }
        self.add(x, t, delta.max(0.0));
        Ok(())
    }

    #[inline]
    fn add(&mut self, x: usize, t: usize, delta: f64) {
        self.sum_dist[x] += t as f64 * delta;
        self.sum_recip[x] += delta / t as f64;
        for (spec, acc) in self.specs.iter().zip(&mut self.discounted) {
            acc[x] += spec.apply(t, delta);
        }
    }

    pub fn sum_dist(&self) -> &[f64] {
        &self.sum_dist
    }

    pub fn sum_recip(&self) -> &[f64] {
        &self.sum_recip
    }

    pub fn coreach(&self) -> &[f64] {
        &self.coreach
    }

    pub fn specs(&self) -> &[DiscountSpec] {
        &self.specs
    }

    pub fn discounted(&self, index: usize) -> &[f64] {
        &self.discounted[index]
    }

    pub fn closeness(&self) -> Vec<f64> {
        closeness(&self.sum_dist)
    }

    pub fn harmonic(&self) -> Vec<f64> {
        self.sum_recip.clone()
    }

    pub fn lin(&self) -> Vec<f64> {
        lin(&self.coreach, &self.sum_dist)
    }

    pub fn centralities(&self) -> Centralities {
        Centralities {
            closeness: self.closeness(),
            harmonic: self.harmonic(),
            lin: self.lin(),
            coreach: self.coreach.clone(),
            discounted: self
                .specs
                .iter()
                .zip(&self.discounted)
                .map(|(s, d)| (s.name().to_string(), d.clone()))
                .collect(),
        }
    }
}

impl BallObserver for CentralityAccumulator {
    fn on_step(&mut self, node: usize, t: usize, old_estimate: f64, new_estimate: f64) {
        debug_assert!(t > 0);
        self.add(node, t, (new_estimate - old_estimate).max(0.0));
    }

    fn on_converged(&mut self, node: usize, final_estimate: f64) {
        self.coreach[node] = final_estimate;
    }

    fn on_iteration(&mut self, t: usize, old: &[f64], new: &[f64]) {
        let tf = t as f64;
        let deltas = || old.par_iter().zip(new).map(|(&o, &n)| (n - o).max(0.0));
        self.sum_dist
            .par_iter_mut()
            .zip(deltas())
            .for_each(|(s, d)| *s += tf * d);
        self.sum_recip
            .par_iter_mut()
            .zip(deltas())
            .for_each(|(s, d)| *s += d / tf);
        for (spec, acc) in self.specs.iter().zip(&mut self.discounted) {
            acc.par_iter_mut()
                .zip(deltas())
                .for_each(|(s, d)| *s += spec.apply(t, d));
        }
    }

    fn on_convergence(&mut self, estimates: &[f64]) {
        self.coreach.copy_from_slice(estimates);
    }
}

/// `1 / sum_dist`, or 0 when the sum is 0.
pub fn closeness(sum_dist: &[f64]) -> Vec<f64> {
    sum_dist
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 0.0 })
        .collect()
}

/// `coreach^2 / sum_dist`, or 1 when the sum is 0.
pub fn lin(coreach: &[f64], sum_dist: &[f64]) -> Vec<f64> {
    coreach
        .iter()
        .zip(sum_dist)
        .map(|(&c, &d)| if d > 0.0 { c * c / d } else { 1.0 })
        .collect()
}

/// Final per-node values of every supported centrality.
#[derive(Debug, Clone, PartialEq)]
pub struct Centralities {
    pub closeness: Vec<f64>,
    pub harmonic: Vec<f64>,
    pub lin: Vec<f64>,
    pub coreach: Vec<f64>,
    /// `(discount name, values)` in request order.
    pub discounted: Vec<(String, Vec<f64>)>,
}

impl Centralities {
    pub fn len(&self) -> usize {
        self.closeness.len()
    }

    pub fn is_empty(&self) -> bool {
        self.closeness.is_empty()
    }

    /// Column names and values, in output order.
    pub fn columns(&self) -> Vec<(String, &[f64])> {
        let mut cols: Vec<(String, &[f64])> = vec![
            ("closeness".into(), &self.closeness),
            ("harmonic".into(), &self.harmonic),
            ("lin".into(), &self.lin),
            ("coreach".into(), &self.coreach),
        ];
        for (name, values) in &self.discounted {
            cols.push((format!("discount:{name}"), values));
        }
        cols
    }

    fn map_columns(&self, mut f: impl FnMut(usize) -> Vec<f64>) -> Self {
        let mut index = 0;
        let mut next = || {
            let v = f(index);
            index += 1;
            v
        };
        Self {
            closeness: next(),
            harmonic: next(),
            lin: next(),
            coreach: next(),
            discounted: self
                .discounted
                .iter()
                .map(|(name, _)| (name.clone(), next()))
                .collect(),
        }
    }
}

/// Per-node mean over runs, with the sample standard deviation when there
/// are at least two runs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunAggregate {
    pub runs: usize,
    pub mean: Centralities,
    pub std: Option<Centralities>,
}

pub fn multi_run_aggregate(runs: &[Centralities]) -> Result<RunAggregate, CentralityError> {
    let first = runs.first().ok_or(CentralityError::NoRuns)?;
    let shape: Vec<usize> = first.columns().iter().map(|(_, c)| c.len()).collect();
    for run in runs {
        let other: Vec<usize> = run.columns().iter().map(|(_, c)| c.len()).collect();
        if other != shape {
            return Err(CentralityError::LengthMismatch(
                shape.iter().sum(),
                other.iter().sum(),
            ));
        }
    }
    let columns: Vec<Vec<&[f64]>> = runs
        .iter()
        .map(|r| r.columns().into_iter().map(|(_, c)| c).collect())
        .collect();
    let r = runs.len() as f64;
    let mean_of = |col: usize| -> Vec<f64> {
        (0..shape[col])
            .map(|v| columns.iter().map(|run| run[col][v]).sum::<f64>() / r)
            .collect()
    };
    let mean = first.map_columns(mean_of);
    let std = (runs.len() >= 2).then(|| {
        let means: Vec<&[f64]> = mean.columns().into_iter().map(|(_, c)| c).collect();
        first.map_columns(|col| {
            (0..shape[col])
                .map(|v| {
                    let m = means[col][v];
                    let ss: f64 = columns.iter().map(|run| (run[col][v] - m).powi(2)).sum();
                    (ss / (r - 1.0)).sqrt()
                })
                .collect()
        })
    });
    Ok(RunAggregate {
        runs: runs.len(),
        mean,
        std,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::CsrGraph;
    use crate::hyperball::{run_exact, HyperBallConfig};

    fn exact_centralities(g: &CsrGraph, specs: Vec<DiscountSpec>) -> CentralityAccumulator {
        let t = g.transpose();
        let mut acc = CentralityAccumulator::new(g.num_nodes(), specs);
        run_exact(&t, &HyperBallConfig::default(), &mut [&mut acc]).unwrap();
        acc
    }

    #[test]
    fn accumulate_arithmetic() {
        let mut acc = CentralityAccumulator::new(1, vec![DiscountSpec::Quadratic]);
        acc.accumulate(0, 1, 3.0).unwrap();
        assert_eq!(
            (acc.sum_dist()[0], acc.sum_recip()[0], acc.discounted(0)[0]),
            (3.0, 3.0, 3.0)
        );
        acc.accumulate(0, 2, 4.0).unwrap();
        assert_eq!(
            (acc.sum_dist()[0], acc.sum_recip()[0], acc.discounted(0)[0]),
            (11.0, 5.0, 4.0)
        );
        assert!(matches!(
            acc.accumulate(0, 0, 1.0),
            Err(CentralityError::NonPositiveDistance(0))
        ));
    }

    #[test]
    fn presets_at_distance_one() {
        for spec in [
            DiscountSpec::Harmonic,
            DiscountSpec::Logarithmic,
            DiscountSpec::Quadratic,
            DiscountSpec::Constant,
        ] {
            assert_eq!(spec.value(1), 1.0, "{spec}");
        }
    }

    #[test]
    fn path_centralities() {
        let g = CsrGraph::from_arcs(3, [(0, 1), (1, 2)]).unwrap();
        let acc = exact_centralities(&g, vec![DiscountSpec::Logarithmic, DiscountSpec::Constant]);
        assert_eq!(acc.sum_dist(), &[0.0, 1.0, 3.0]);
        assert_eq!(acc.sum_recip(), &[0.0, 1.0, 1.5]);
        assert_eq!(acc.closeness(), vec![0.0, 1.0, 1.0 / 3.0]);
        assert_eq!(acc.harmonic(), vec![0.0, 1.0, 1.5]);
        assert_eq!(acc.lin(), vec![1.0, 4.0, 3.0]);
        assert_eq!(acc.coreach(), &[1.0, 2.0, 3.0]);
        let log = acc.discounted(0)[2];
        assert!((log - (1.0 + 1.0 / 3f64.log2())).abs() < 1e-15);
        assert!((log - 1.63093).abs() < 1e-5);
        assert_eq!(acc.discounted(1), &[0.0, 1.0, 2.0]);
    }

    #[test]
    fn five_cycle_is_uniform() {
        let g = CsrGraph::from_arcs(5, (0..5).map(|i| (i, (i + 1) % 5))).unwrap();
        let acc = exact_centralities(&g, vec![]);
        for x in 0..5 {
            assert_eq!(acc.closeness()[x], 0.1);
            assert_eq!(acc.lin()[x], 2.5);
        }
    }

    #[test]
    fn star_into_center() {
        let k = 9;
        let g = CsrGraph::from_arcs(k + 1, (1..=k).map(|leaf| (leaf, 0))).unwrap();
        let acc = exact_centralities(&g, vec![]);
        assert_eq!(acc.harmonic()[0], k as f64);
        assert_eq!(acc.closeness()[1], 0.0);
        assert_eq!(acc.lin()[1], 1.0);
    }

    #[test]
    fn discount_tables() {
        let spec = DiscountSpec::parse_table("1\n0.5 # half\n\ntail 0.25\n").unwrap();
        assert_eq!(
            (spec.value(1), spec.value(2), spec.value(3), spec.value(40)),
            (1.0, 0.5, 0.25, 0.25)
        );
        assert!(DiscountSpec::parse_table("1\n0.5\n").is_err());
        assert!(DiscountSpec::parse_table("1\n2\ntail 0\n").is_err());
        assert!(DiscountSpec::parse_table("1\ntail 3\n").is_err());
        assert!(DiscountSpec::table(vec![-1.0], -1.0).is_err());
    }

    #[test]
    fn aggregate_runs() {
        let run = |v: f64| Centralities {
            closeness: vec![v, 1.0],
            harmonic: vec![v, 2.0],
            lin: vec![v, 3.0],
            coreach: vec![v, 4.0],
            discounted: vec![("quad".into(), vec![v, 5.0])],
        };
        let single = multi_run_aggregate(&[run(1.0)]).unwrap();
        assert_eq!(single.mean, run(1.0));
        assert!(single.std.is_none());

        let same = multi_run_aggregate(&[run(2.0), run(2.0)]).unwrap();
        assert!(same
            .std
            .unwrap()
            .columns()
            .iter()
            .all(|(_, c)| c.iter().all(|&s| s == 0.0)));

        let spread = multi_run_aggregate(&[run(1.0), run(3.0)]).unwrap();
        assert_eq!(spread.mean.harmonic, vec![2.0, 2.0]);
        assert_eq!(spread.std.unwrap().discounted[0].1, vec![2f64.sqrt(), 0.0]);

        let mut short = run(1.0);
        short.lin.pop();
        assert!(matches!(
            multi_run_aggregate(&[run(1.0), short]),
            Err(CentralityError::LengthMismatch(..))
        ));
        assert!(matches!(
            multi_run_aggregate(&[]),
            Err(CentralityError::NoRuns)
        ));
    }
}
