// SPDX-License-Identifier: Apache-2.0

//! The ball-growth engine.
//!
//! One counter per node; at the end of iteration `t` the counter of `v`
//! holds the ball of radius `t` around `v`. Each iteration unions every
//! node's counter with the counters of its successors into a second
//! buffer, reports old and new ball estimates to the observers, and swaps
//! the buffers. The loop stops only when an iteration leaves every counter
//! unchanged.
//!
//! A node whose successors did not change in the previous iteration cannot
//! change, and is skipped. For processed nodes only the successors that
//! changed are merged: every other successor counter is already contained
//! in the node's own counter.

mod backend;

use std::io::{Read, Write};
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

pub use backend::{CounterLogic, ExactCounters};

use crate::graph::{CsrGraph, NodeWeights};
use crate::hll::{CounterArray, CounterParams, HllError, HyperLogLog};

const CHECKPOINT_MAGIC: &[u8; 4] = b"HBCK";
const CHECKPOINT_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum HyperBallError {
    #[error("weights cover {found} nodes, graph has {expected}")]
    WeightCount { expected: usize, found: usize },
    #[error(
        "{width}-bit registers saturate below rank {needed} needed for total weight {total}; \
         use wider registers"
    )]
    RegisterWidth { width: u32, needed: u32, total: u64 },
    #[error("no convergence after {t} iterations ({num_changed} counters still changing)")]
    IterationLimit { t: usize, num_changed: usize },
    #[error("graph has {found} nodes, state has {expected}")]
    GraphMismatch { expected: usize, found: usize },
    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Hll(#[from] HllError),
    #[error(transparent)]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Receives ball-size estimates as the balls grow.
///
/// `on_step(v, t, old, new)` reports the estimate of the ball of radius
/// `t - 1` and of radius `t` around `v`; it is called once per node and
/// iteration, with `old == new` for nodes the iteration skipped. Estimates
/// never decrease. `on_converged` is called once per node after the last
/// iteration.
pub trait BallObserver: Send {
    fn on_step(&mut self, node: usize, t: usize, old_estimate: f64, new_estimate: f64);

    fn on_converged(&mut self, node: usize, final_estimate: f64);

    /// Whole-iteration form of [`on_step`](Self::on_step); `old` and `new`
    /// are indexed by node. Override to process nodes in parallel.
    fn on_iteration(&mut self, t: usize, old: &[f64], new: &[f64]) {
        for (v, (&o, &n)) in old.iter().zip(new).enumerate() {
            self.on_step(v, t, o, n);
        }
    }

    /// Whole-graph form of [`on_converged`](Self::on_converged).
    fn on_convergence(&mut self, estimates: &[f64]) {
        for (v, &e) in estimates.iter().enumerate() {
            self.on_converged(v, e);
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct HyperBallConfig {
    /// Integer node weights; node `v` contributes `w(v)` replicas.
    pub weights: Option<NodeWeights>,
    /// Fail instead of running more than this many iterations.
    pub max_iterations: Option<usize>,
    /// Worker threads; `None` uses the ambient rayon pool.
    pub threads: Option<usize>,
    /// Process every node with every successor in every iteration.
    pub full_scan: bool,
}

/// Counters and bookkeeping of a run.
#[derive(Debug, Clone)]
pub struct HyperBallState<L> {
    logic: L,
    n: usize,
    current: Vec<u64>,
    next: Vec<u64>,
    changed_prev: Vec<bool>,
    changed_now: Vec<bool>,
    estimates: Vec<f64>,
    next_estimates: Vec<f64>,
    t: usize,
    num_changed: usize,
}

impl<L: CounterLogic> HyperBallState<L> {
    /// Counter `v` is fed node `v` (or its `w(v)` replicas).
    pub fn initialize(
        g: &CsrGraph,
        logic: L,
        weights: Option<&NodeWeights>,
    ) -> Result<Self, HyperBallError> {
        let n = g.num_nodes();
        if let Some(w) = weights {
            if w.len() != n {
                return Err(HyperBallError::WeightCount {
                    expected: n,
                    found: w.len(),
                });
            }
        }
        let k = logic.words_per_counter();
        let mut current = vec![0u64; n * k];
        let mut estimates = vec![0.0; n];
        current
            .par_chunks_mut(k.max(1))
            .zip(estimates.par_iter_mut())
            .enumerate()
            .for_each(|(v, (counter, est))| {
                let replicas = weights.map_or(1, |w| w.weight(v));
                for r in 0..replicas {
                    logic.add(counter, v, r);
                }
                *est = logic.estimate(counter);
            });
        Ok(Self {
            next: current.clone(),
            next_estimates: estimates.clone(),
            logic,
            n,
            current,
            changed_prev: vec![true; n],
            changed_now: vec![false; n],
            estimates,
            t: 0,
            num_changed: n,
        })
    }

    pub fn logic(&self) -> &L {
        &self.logic
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    /// Number of completed iterations.
    pub fn iteration(&self) -> usize {
        self.t
    }

    /// Counters changed by the last iteration.
    pub fn num_changed(&self) -> usize {
        self.num_changed
    }

    pub fn is_converged(&self) -> bool {
        self.n == 0 || (self.t > 0 && self.num_changed == 0)
    }

    pub fn counter(&self, v: usize) -> &[u64] {
        let k = self.logic.words_per_counter();
        &self.current[v * k..(v + 1) * k]
    }

    /// All counters, node after node.
    pub fn counters(&self) -> &[u64] {
        &self.current
    }

    /// Current ball-size estimate of `v`.
    pub fn estimate(&self, v: usize) -> f64 {
        self.estimates[v]
    }

    pub fn estimates(&self) -> &[f64] {
        &self.estimates
    }

    /// Whether counter `v` changed in the last iteration.
    pub fn changed(&self, v: usize) -> bool {
        self.changed_prev[v]
    }

    /// One iteration over the successor lists of `g`; returns the number
    /// of counters that changed.
    pub fn iterate(
        &mut self,
        g: &CsrGraph,
        full_scan: bool,
        observers: &mut [&mut dyn BallObserver],
    ) -> usize {
        assert_eq!(g.num_nodes(), self.n, "graph does not match state");
        let start = Instant::now();
        let k = self.logic.words_per_counter();
        let scan_all = full_scan || self.t == 0;
        let logic = &self.logic;
        let current = &self.current[..];
        let changed_prev = &self.changed_prev[..];
        let estimates = &self.estimates[..];
        let scratch_len = logic.scratch_words();

        if self.n > 0 {
            self.next
                .par_chunks_mut(k)
                .zip(self.changed_now.par_iter_mut())
                .zip(self.next_estimates.par_iter_mut())
                .enumerate()
                .with_min_len(64)
                .for_each_init(
                    || vec![0u64; scratch_len],
                    |scratch, (v, ((slot, changed), est))| {
                        let succ = g.successors(v);
                        let active =
                            scan_all || changed_prev[v] || succ.iter().any(|&w| changed_prev[w]);
                        if !active {
                            // The slot still holds the previous state of v,
                            // which equals its current state.
                            *changed = false;
                            *est = estimates[v];
                            return;
                        }
                        slot.copy_from_slice(&current[v * k..(v + 1) * k]);
                        let mut grew = false;
                        for &w in succ {
                            if w != v && (scan_all || changed_prev[w]) {
                                grew |= logic.merge(slot, &current[w * k..(w + 1) * k], scratch);
                            }
                        }
                        *changed = grew;
                        *est = if grew {
                            logic.estimate(slot).max(estimates[v])
                        } else {
                            estimates[v]
                        };
                    },
                );
        }

        let t = self.t + 1;
        for obs in observers.iter_mut() {
            obs.on_iteration(t, &self.estimates, &self.next_estimates);
        }
        std::mem::swap(&mut self.current, &mut self.next);
        std::mem::swap(&mut self.estimates, &mut self.next_estimates);
        std::mem::swap(&mut self.changed_prev, &mut self.changed_now);
        self.t = t;
        self.num_changed = self.changed_prev.iter().filter(|&&c| c).count();
        log::info!(
            "t={} changed={} elapsed_ms={}",
            self.t,
            self.num_changed,
            start.elapsed().as_millis()
        );
        self.num_changed
    }

    /// Iterates until no counter changes, then reports final estimates.
    pub fn run_to_convergence(
        &mut self,
        g: &CsrGraph,
        config: &HyperBallConfig,
        observers: &mut [&mut dyn BallObserver],
    ) -> Result<(), HyperBallError>
    where
        L: Send,
    {
        if g.num_nodes() != self.n {
            return Err(HyperBallError::GraphMismatch {
                expected: self.n,
                found: g.num_nodes(),
            });
        }
        with_pool(config.threads, || {
            let start = Instant::now();
            while !self.is_converged() {
                if let Some(max) = config.max_iterations {
                    if self.t >= max {
                        return Err(HyperBallError::IterationLimit {
                            t: self.t,
                            num_changed: self.num_changed,
                        });
                    }
                }
                self.iterate(g, config.full_scan, observers);
            }
            for obs in observers.iter_mut() {
                obs.on_convergence(&self.estimates);
            }
            log::info!(
                "converged t={} elapsed_ms={}",
                self.t,
                start.elapsed().as_millis()
            );
            Ok(())
        })
    }
}

impl HyperBallState<HyperLogLog> {
    /// The current counters as an array.
    pub fn counter_array(&self) -> CounterArray {
        CounterArray::from_words(*self.logic.params(), self.n, self.current.clone())
            .expect("state buffers match their logic")
    }

    /// Writes the state: header, both counter buffers as counter-array
    /// blobs, the change flags and the running estimates.
    pub fn write_checkpoint<W: Write>(&self, mut out: W) -> Result<(), HyperBallError> {
        out.write_all(CHECKPOINT_MAGIC)?;
        out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        for x in [self.t as u64, self.num_changed as u64, self.n as u64] {
            out.write_all(&x.to_le_bytes())?;
        }
        let params = *self.logic.params();
        CounterArray::from_words(params, self.n, self.current.clone())?.write_to(&mut out)?;
        CounterArray::from_words(params, self.n, self.next.clone())?.write_to(&mut out)?;
        let flags: Vec<u8> = self.changed_prev.iter().map(|&c| c as u8).collect();
        out.write_all(&flags)?;
        let mut buf = Vec::with_capacity(8 * self.n);
        for e in &self.estimates {
            buf.extend_from_slice(&e.to_le_bytes());
        }
        out.write_all(&buf)?;
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(mut input: R) -> Result<Self, HyperBallError> {
        let mut header = [0u8; 30];
        input
            .read_exact(&mut header)
            .map_err(|_| HyperBallError::Checkpoint("truncated header".into()))?;
        if &header[..4] != CHECKPOINT_MAGIC {
            return Err(HyperBallError::Checkpoint("bad magic".into()));
        }
        let version = u16::from_le_bytes([header[4], header[5]]);
        if version != CHECKPOINT_VERSION {
            return Err(HyperBallError::Checkpoint(format!(
                "unsupported version {version}"
            )));
        }
        let word = |i: usize| u64::from_le_bytes(header[6 + 8 * i..14 + 8 * i].try_into().unwrap());
        let (t, num_changed, n) = (word(0) as usize, word(1) as usize, word(2) as usize);
        let current = CounterArray::read_from(&mut input)?;
        let next = CounterArray::read_from(&mut input)?;
        if current.len() != n || next.len() != n || current.params() != next.params() {
            return Err(HyperBallError::Checkpoint("counter arrays disagree".into()));
        }
        let mut flags = vec![0u8; n];
        input
            .read_exact(&mut flags)
            .map_err(|_| HyperBallError::Checkpoint("truncated flags".into()))?;
        let mut raw = vec![0u8; 8 * n];
        input
            .read_exact(&mut raw)
            .map_err(|_| HyperBallError::Checkpoint("truncated estimates".into()))?;
        let estimates: Vec<f64> = raw
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        let changed_prev: Vec<bool> = flags.iter().map(|&f| f != 0).collect();
        if changed_prev.iter().filter(|&&c| c).count() != num_changed {
            return Err(HyperBallError::Checkpoint("flag count disagrees".into()));
        }
        let logic = current.logic().clone();
        Ok(Self {
            logic,
            n,
            current: current.into_words(),
            next: next.into_words(),
            changed_prev,
            changed_now: vec![false; n],
            next_estimates: estimates.clone(),
            estimates,
            t,
            num_changed,
        })
    }
}

fn with_pool<T: Send>(
    threads: Option<usize>,
    body: impl FnOnce() -> Result<T, HyperBallError> + Send,
) -> Result<T, HyperBallError> {
    match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()?
            .install(body),
        None => body(),
    }
}

/// Checks that registers can hold the ranks produced by `total` items.
/// Warns when they are narrower than `ceil(log2 log2 total)` bits.
pub fn check_register_width(params: &CounterParams, total: u64) -> Result<(), HyperBallError> {
    if total < 2 {
        return Ok(());
    }
    let log_total = (total as f64).log2();
    let needed = log_total.ceil() as u32;
    if params.max_register() < needed {
        return Err(HyperBallError::RegisterWidth {
            width: params.register_width(),
            needed,
            total,
        });
    }
    let loglog = log_total.log2().ceil() as u32;
    if params.register_width() < loglog {
        log::warn!(
            "register width {} is below log log of total weight {total}; consider {} bits",
            params.register_width(),
            loglog
        );
    }
    Ok(())
}

/// Runs the engine on `g` to convergence with an arbitrary counter backend.
pub fn run<L: CounterLogic + Send>(
    g: &CsrGraph,
    logic: L,
    config: &HyperBallConfig,
    observers: &mut [&mut dyn BallObserver],
) -> Result<HyperBallState<L>, HyperBallError> {
    let mut state = with_pool(config.threads, || {
        HyperBallState::initialize(g, logic, config.weights.as_ref())
    })?;
    state.run_to_convergence(g, config, observers)?;
    Ok(state)
}

/// Runs the engine with HyperLogLog counters.
pub fn run_probabilistic(
    g: &CsrGraph,
    params: CounterParams,
    config: &HyperBallConfig,
    observers: &mut [&mut dyn BallObserver],
) -> Result<HyperBallState<HyperLogLog>, HyperBallError> {
    if let Some(w) = &config.weights {
        check_register_width(&params, w.total())?;
    }
    run(g, HyperLogLog::new(params), config, observers)
}

/// Runs the engine with exact bitset counters.
pub fn run_exact(
    g: &CsrGraph,
    config: &HyperBallConfig,
    observers: &mut [&mut dyn BallObserver],
) -> Result<HyperBallState<ExactCounters>, HyperBallError> {
    let logic = match &config.weights {
        Some(w) => ExactCounters::weighted(w),
        None => ExactCounters::new(g.num_nodes()),
    };
    run(g, logic, config, observers)
}
