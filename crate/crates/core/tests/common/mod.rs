// SPDX-License-Identifier: Apache-2.0

//! Seeded graph generators and helpers shared by the integration tests.

#![allow(dead_code)]

use hyperball_core::centrality::{CentralityAccumulator, DiscountSpec};
use hyperball_core::graph::{CsrGraph, NodeWeights};
use hyperball_core::hll::CounterParams;
use hyperball_core::hyperball::{run_exact, run_probabilistic, HyperBallConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// About `n * avg_degree` uniformly random arcs, self-loops allowed.
pub fn random_digraph(n: usize, avg_degree: f64, seed: u64) -> CsrGraph {
    let mut r = rng(seed);
    let m = if n == 0 {
        0
    } else {
        (n as f64 * avg_degree).round() as usize
    };
    let arcs: Vec<(usize, usize)> = (0..m)
        .map(|_| (r.random_range(0..n), r.random_range(0..n)))
        .collect();
    CsrGraph::from_arcs(n, arcs).unwrap()
}

/// Random arcs from lower to higher ids.
pub fn random_dag(n: usize, avg_degree: f64, seed: u64) -> CsrGraph {
    let mut r = rng(seed);
    let m = if n < 2 {
        0
    } else {
        (n as f64 * avg_degree).round() as usize
    };
    let arcs: Vec<(usize, usize)> = (0..m)
        .map(|_| {
            let a = r.random_range(0..n);
            let b = r.random_range(0..n);
            (a.min(b), a.max(b))
        })
        .filter(|(a, b)| a != b)
        .collect();
    CsrGraph::from_arcs(n, arcs).unwrap()
}

/// Disjoint union of `parts` random graphs of `part_size` nodes each.
pub fn disconnected(parts: usize, part_size: usize, avg_degree: f64, seed: u64) -> CsrGraph {
    let mut arcs = Vec::new();
    for p in 0..parts {
        let g = random_digraph(part_size, avg_degree, seed.wrapping_add(p as u64));
        arcs.extend(
            g.arcs()
                .map(|(u, v)| (u + p * part_size, v + p * part_size)),
        );
    }
    CsrGraph::from_arcs(parts * part_size, arcs).unwrap()
}

/// A copying-model graph: each node links to `out_degree` targets, each a
/// uniformly random node with probability `jump`, otherwise a successor of
/// a random earlier node. Gives skewed in-degrees and a large strongly
/// connected core with dangling tendrils.
pub fn web_like(n: usize, out_degree: usize, jump: f64, seed: u64) -> CsrGraph {
    let mut r = rng(seed);
    let mut succ: Vec<Vec<usize>> = Vec::with_capacity(n);
    for v in 0..n {
        let mut out = Vec::with_capacity(out_degree);
        // A tenth of the nodes have no outgoing arcs.
        if v > 0 && r.random_bool(0.9) {
            for _ in 0..out_degree {
                let target = if r.random_bool(jump) {
                    r.random_range(0..n)
                } else {
                    let proto = &succ[r.random_range(0..v)];
                    if proto.is_empty() {
                        r.random_range(0..v)
                    } else {
                        proto[r.random_range(0..proto.len())]
                    }
                };
                out.push(target);
            }
        }
        succ.push(out);
    }
    let arcs = succ
        .iter()
        .enumerate()
        .flat_map(|(u, out)| out.iter().map(move |&v| (u, v)));
    CsrGraph::from_arcs(n, arcs.collect::<Vec<_>>()).unwrap()
}

pub fn random_weights(n: usize, max: u64, seed: u64) -> NodeWeights {
    let mut r = rng(seed);
    NodeWeights::new((0..n).map(|_| r.random_range(1..=max)).collect()).unwrap()
}

/// Incoming centralities computed by the engine with exact counters.
pub fn engine_exact(
    g: &CsrGraph,
    specs: &[DiscountSpec],
    weights: Option<NodeWeights>,
) -> CentralityAccumulator {
    let t = g.transpose();
    let mut acc = CentralityAccumulator::new(g.num_nodes(), specs.to_vec());
    let config = HyperBallConfig {
        weights,
        ..HyperBallConfig::default()
    };
    run_exact(&t, &config, &mut [&mut acc]).unwrap();
    acc
}

/// Incoming centralities computed by the engine with HyperLogLog counters
/// on an already transposed graph.
pub fn engine_hll(
    transpose: &CsrGraph,
    params: CounterParams,
    specs: &[DiscountSpec],
) -> CentralityAccumulator {
    let mut acc = CentralityAccumulator::new(transpose.num_nodes(), specs.to_vec());
    run_probabilistic(
        transpose,
        params,
        &HyperBallConfig::default(),
        &mut [&mut acc],
    )
    .unwrap();
    acc
}
