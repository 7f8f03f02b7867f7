// SPDX-License-Identifier: Apache-2.0

//! Approximate closeness, harmonic, Lin and discounted-gain centralities of
//! large directed graphs via HyperLogLog counters and HyperBall, with an
//! exact breadth-first oracle for validation.

pub mod centrality;
pub mod graph;
pub mod hll;
pub mod hyperball;
pub mod oracle;
pub mod tsv;

pub use centrality::{Centralities, CentralityAccumulator, DiscountSpec};
pub use graph::{CsrGraph, NodeWeights};
pub use hll::{CounterArray, CounterParams, HyperLogLog};
pub use hyperball::{
    run_exact, run_probabilistic, BallObserver, HyperBallConfig, HyperBallError, HyperBallState,
};
pub use oracle::{compare, exact_all, ExactCentralities};
