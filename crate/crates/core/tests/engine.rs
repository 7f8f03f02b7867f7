// SPDX-License-Identifier: Apache-2.0

mod common;

use common::*;
use hyperball_core::centrality::DiscountSpec;
use hyperball_core::graph::{CsrGraph, NodeWeights};
use hyperball_core::hll::{CounterParams, HyperLogLog};
use hyperball_core::hyperball::{
    run_exact, run_probabilistic, BallObserver, HyperBallConfig, HyperBallState,
};
use hyperball_core::oracle::exact_all;

fn assert_matches_oracle(g: &CsrGraph, weights: Option<NodeWeights>) {
    let specs = [DiscountSpec::Logarithmic, DiscountSpec::Constant];
    let engine = engine_exact(g, &specs, weights.clone()).centralities();
    let oracle = exact_all(g, &specs, weights.as_ref(), None)
        .unwrap()
        .centralities();
    assert_eq!(engine, oracle);
}

#[test]
fn exact_engine_agrees_with_breadth_first_oracle() {
    for seed in 0..20 {
        assert_matches_oracle(&random_digraph(150, 3.0, seed), None);
        assert_matches_oracle(&random_dag(150, 3.0, seed), None);
    }
    assert_matches_oracle(&web_like(500, 6, 0.2, 3), None);
    assert_matches_oracle(&disconnected(4, 30, 2.0, 9), None);
    assert_matches_oracle(&CsrGraph::empty(0), None);
    assert_matches_oracle(&CsrGraph::empty(1), None);
}

#[test]
fn weighted_exact_engine_agrees_with_oracle() {
    for seed in 0..5 {
        let g = random_digraph(120, 2.5, seed);
        assert_matches_oracle(&g, Some(random_weights(120, 10, seed)));
    }
}

#[derive(Default)]
struct Trace {
    steps: Vec<(usize, Vec<f64>)>,
}

impl BallObserver for Trace {
    fn on_step(&mut self, _: usize, _: usize, _: f64, _: f64) {}
    fn on_converged(&mut self, _: usize, _: f64) {}
    fn on_iteration(&mut self, t: usize, _old: &[f64], new: &[f64]) {
        self.steps.push((t, new.to_vec()));
    }
}

#[test]
fn active_set_matches_full_scan_with_hll_counters() {
    for seed in 0..10 {
        let g = random_digraph(300, 2.0, seed);
        let params = CounterParams::new(6, 5, seed).unwrap();
        let lazy = run_probabilistic(&g, params, &HyperBallConfig::default(), &mut []).unwrap();
        let full_config = HyperBallConfig {
            full_scan: true,
            ..HyperBallConfig::default()
        };
        let full = run_probabilistic(&g, params, &full_config, &mut []).unwrap();
        assert_eq!(lazy.counters(), full.counters());
        assert_eq!(lazy.iteration(), full.iteration());
    }
}

#[test]
fn estimates_never_decrease() {
    let g = web_like(2000, 5, 0.3, 1);
    let params = CounterParams::new(5, 5, 4).unwrap();
    let mut trace = Trace::default();
    run_probabilistic(&g, params, &HyperBallConfig::default(), &mut [&mut trace]).unwrap();
    for pair in trace.steps.windows(2) {
        assert_eq!(pair[1].0, pair[0].0 + 1);
        assert!(pair[0].1.iter().zip(&pair[1].1).all(|(a, b)| a <= b));
    }
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let g = random_digraph(3000, 4.0, 77);
    let t = g.transpose();
    let specs = [DiscountSpec::Quadratic];
    let mut outputs = Vec::new();
    for threads in [1, 3, 8] {
        let mut acc = hyperball_core::CentralityAccumulator::new(g.num_nodes(), specs.to_vec());
        let config = HyperBallConfig {
            threads: Some(threads),
            ..HyperBallConfig::default()
        };
        let params = CounterParams::new(7, 5, 11).unwrap();
        let state = run_probabilistic(&t, params, &config, &mut [&mut acc]).unwrap();
        outputs.push((state.counters().to_vec(), acc.centralities()));
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn exact_ball_sizes_by_step() {
    // Out-star 0 -> {1, 2, 3} plus 3 -> 4; balls along outgoing arcs.
    let g = CsrGraph::from_arcs(5, [(0, 1), (0, 2), (0, 3), (3, 4)]).unwrap();
    let mut state =
        HyperBallState::initialize(&g, hyperball_core::hyperball::ExactCounters::new(5), None)
            .unwrap();
    assert_eq!(state.estimates(), &[1.0; 5]);
    state.iterate(&g, false, &mut []);
    assert_eq!(state.estimates(), &[4.0, 1.0, 1.0, 2.0, 1.0]);
    state.iterate(&g, false, &mut []);
    assert_eq!(state.estimates(), &[5.0, 1.0, 1.0, 2.0, 1.0]);
    assert_eq!(state.iterate(&g, false, &mut []), 0);
    assert!(state.is_converged());
}

#[test]
fn hll_run_counts_reachable_sets_roughly() {
    let g = web_like(3000, 6, 0.2, 5);
    let params = CounterParams::new(10, 5, 3).unwrap();
    let state = run_probabilistic(&g, params, &HyperBallConfig::default(), &mut []).unwrap();
    let exact = run_exact(&g, &HyperBallConfig::default(), &mut []).unwrap();
    let mut errors: Vec<f64> = (0..g.num_nodes())
        .map(|v| (state.estimate(v) - exact.estimate(v)).abs() / exact.estimate(v))
        .collect();
    errors.sort_by(f64::total_cmp);
    let median = errors[errors.len() / 2];
    assert!(median < 2.0 * 1.06 / 32.0, "{median}");
    let _: &HyperLogLog = state.logic();
}
