// SPDX-License-Identifier: Apache-2.0

//! Immutable directed graphs in compressed-sparse-row form.
//!
//! Binary layout (all integers little-endian):
//!
//! ```text
//! "CSR1" | n: u64 | m: u64 | offsets: (n + 1) x u64 | successors: m x u64
//! ```
//!
//! Successor lists are stored back to back in node order, so a scan of the
//! file visits them sequentially without any decoding step.

use std::io::{BufRead, Read, Write};

use thiserror::Error;

const CSR_MAGIC: &[u8; 4] = b"CSR1";
/// Bytes preceding the offsets array in the binary format.
pub const BINARY_HEADER_LEN: usize = 20;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("node id {id} out of range for {n} nodes")]
    NodeOutOfRange { id: u64, n: u64 },
    #[error("invalid graph file: {0}")]
    Format(String),
    #[error("weight of node {node} must be at least 1")]
    ZeroWeight { node: usize },
    #[error("weights cover {found} nodes, graph has {expected}")]
    WeightCount { expected: usize, found: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A directed graph with sorted, duplicate-free successor lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsrGraph {
    offsets: Vec<usize>,
    successors: Vec<usize>,
}

impl CsrGraph {
    /// A graph with `n` nodes and no arcs.
    pub fn empty(n: usize) -> Self {
        Self {
            offsets: vec![0; n + 1],
            successors: Vec::new(),
        }
    }

    /// Builds a graph from arbitrary arcs; duplicates are collapsed.
    pub fn from_arcs<I>(n: usize, arcs: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut arcs: Vec<(usize, usize)> = arcs.into_iter().collect();
        if let Some(&(u, v)) = arcs.iter().find(|&&(u, v)| u >= n || v >= n) {
            return Err(GraphError::NodeOutOfRange {
                id: u.max(v) as u64,
                n: n as u64,
            });
        }
        arcs.sort_unstable();
        arcs.dedup();
        let mut offsets = vec![0usize; n + 1];
        for &(u, _) in &arcs {
            offsets[u + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let successors = arcs.into_iter().map(|(_, v)| v).collect();
        Ok(Self {
            offsets,
            successors,
        })
    }

    /// Validates raw CSR arrays.
    pub fn from_parts(offsets: Vec<usize>, successors: Vec<usize>) -> Result<Self, GraphError> {
        if offsets.first() != Some(&0) {
            return Err(GraphError::Format("offsets must start at 0".into()));
        }
        if *offsets.last().unwrap() != successors.len() {
            return Err(GraphError::Format(format!(
                "last offset {} differs from arc count {}",
                offsets.last().unwrap(),
                successors.len()
            )));
        }
        if offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(GraphError::Format("offsets are not monotone".into()));
        }
        let n = offsets.len() - 1;
        if let Some(&id) = successors.iter().find(|&&s| s >= n) {
            return Err(GraphError::NodeOutOfRange {
                id: id as u64,
                n: n as u64,
            });
        }
        for v in 0..n {
            if successors[offsets[v]..offsets[v + 1]]
                .windows(2)
                .any(|w| w[0] >= w[1])
            {
                return Err(GraphError::Format(format!(
                    "successors of node {v} are not strictly increasing"
                )));
            }
        }
        Ok(Self {
            offsets,
            successors,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn num_arcs(&self) -> usize {
        self.successors.len()
    }

    #[inline]
    pub fn successors(&self, v: usize) -> &[usize] {
        &self.successors[self.offsets[v]..self.offsets[v + 1]]
    }

    #[inline]
    pub fn outdegree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_nodes()).flat_map(move |u| self.successors(u).iter().map(move |&v| (u, v)))
    }

    /// The graph with every arc reversed.
    pub fn transpose(&self) -> CsrGraph {
        let n = self.num_nodes();
        let mut offsets = vec![0usize; n + 1];
        for &v in &self.successors {
            offsets[v + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut cursor = offsets.clone();
        let mut successors = vec![0usize; self.successors.len()];
        // Sources are visited in increasing order, so each reversed list
        // comes out sorted.
        for u in 0..n {
            for &v in self.successors(u) {
                successors[cursor[v]] = u;
                cursor[v] += 1;
            }
        }
        CsrGraph {
            offsets,
            successors,
        }
    }

    /// Parses a text edge list: one `u v` pair per line (tab or space
    /// separated), `#` comments, and an optional `#nodes N` declaration.
    pub fn load_edge_list<R: BufRead>(input: R) -> Result<Self, GraphError> {
        let mut declared: Option<u64> = None;
        let mut arcs = Vec::new();
        let mut max_id: Option<u64> = None;
        for (index, line) in input.lines().enumerate() {
            let line = line?;
            let lineno = index + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(comment) = trimmed.strip_prefix('#') {
                let mut words = comment.split_whitespace();
                if words.next() == Some("nodes") {
                    let n = words.next().and_then(|w| w.parse().ok()).ok_or_else(|| {
                        GraphError::Parse {
                            line: lineno,
                            message: "expected '#nodes <count>'".into(),
                        }
                    })?;
                    declared = Some(n);
                }
                continue;
            }
            let mut fields = trimmed.split_whitespace();
            let mut id = |what: &str| -> Result<u64, GraphError> {
                let field = fields.next().ok_or_else(|| GraphError::Parse {
                    line: lineno,
                    message: format!("missing {what} node id"),
                })?;
                field.parse().map_err(|_| GraphError::Parse {
                    line: lineno,
                    message: format!("invalid {what} node id {field:?}"),
                })
            };
            let (u, v) = (id("source")?, id("target")?);
            if fields.next().is_some() {
                return Err(GraphError::Parse {
                    line: lineno,
                    message: "expected exactly two node ids".into(),
                });
            }
            max_id = Some(max_id.map_or(u.max(v), |m| m.max(u).max(v)));
            arcs.push((u as usize, v as usize));
        }
        let n = match (declared, max_id) {
            (Some(n), Some(id)) if id >= n => return Err(GraphError::NodeOutOfRange { id, n }),
            (Some(n), _) => n,
            (None, Some(id)) => id + 1,
            (None, None) => 0,
        };
        Self::from_arcs(n as usize, arcs)
    }

    /// Size in bytes of the binary encoding.
    pub fn binary_len(&self) -> usize {
        BINARY_HEADER_LEN + 8 * (self.num_nodes() + 1) + 8 * self.num_arcs()
    }

    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<(), GraphError> {
        out.write_all(CSR_MAGIC)?;
        out.write_all(&(self.num_nodes() as u64).to_le_bytes())?;
        out.write_all(&(self.num_arcs() as u64).to_le_bytes())?;
        let mut buf = Vec::with_capacity(8 * (self.offsets.len() + self.successors.len()));
        for &x in self.offsets.iter().chain(&self.successors) {
            buf.extend_from_slice(&(x as u64).to_le_bytes());
        }
        out.write_all(&buf)?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self, GraphError> {
        let mut header = [0u8; BINARY_HEADER_LEN];
        input.read_exact(&mut header).map_err(truncated)?;
        if &header[..4] != CSR_MAGIC {
            return Err(GraphError::Format("bad magic".into()));
        }
        let n = u64::from_le_bytes(header[4..12].try_into().unwrap());
        let m = u64::from_le_bytes(header[12..20].try_into().unwrap());
        let n =
            usize::try_from(n).map_err(|_| GraphError::Format("node count too large".into()))?;
        let m = usize::try_from(m).map_err(|_| GraphError::Format("arc count too large".into()))?;
        let offsets = read_u64s(&mut input, n + 1)?;
        if offsets.last() != Some(&m) {
            return Err(GraphError::Format(format!(
                "last offset differs from declared arc count {m}"
            )));
        }
        let successors = read_u64s(&mut input, m)?;
        Self::from_parts(offsets, successors)
    }
}

fn read_u64s<R: Read>(input: &mut R, count: usize) -> Result<Vec<usize>, GraphError> {
    const CHUNK: usize = 1 << 16;
    let mut out = Vec::with_capacity(count.min(1 << 24));
    let mut buf = vec![0u8; 8 * CHUNK];
    let mut left = count;
    while left > 0 {
        let take = left.min(CHUNK);
        input.read_exact(&mut buf[..8 * take]).map_err(truncated)?;
        out.extend(
            buf[..8 * take]
                .chunks_exact(8)
                .map(|b| u64::from_le_bytes(b.try_into().unwrap()) as usize),
        );
        left -= take;
    }
    Ok(out)
}

fn truncated(e: std::io::Error) -> GraphError {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        GraphError::Format("truncated file".into())
    } else {
        GraphError::Io(e)
    }
}

/// Positive integer weights on the nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeWeights {
    weights: Vec<u64>,
    max_weight: u64,
    total: u64,
}

impl NodeWeights {
    pub fn new(weights: Vec<u64>) -> Result<Self, GraphError> {
        if let Some(node) = weights.iter().position(|&w| w == 0) {
            return Err(GraphError::ZeroWeight { node });
        }
        let max_weight = weights.iter().copied().max().unwrap_or(0);
        let total = weights.iter().sum();
        Ok(Self {
            weights,
            max_weight,
            total,
        })
    }

    /// All weights equal to one.
    pub fn uniform(n: usize) -> Self {
        Self::new(vec![1; n]).unwrap()
    }

    /// Parses `node<TAB>weight` lines for a graph with `n` nodes. Nodes that
    /// are not listed get weight 1.
    pub fn load<R: BufRead>(input: R, n: usize) -> Result<Self, GraphError> {
        let mut weights = vec![1u64; n];
        for (index, line) in input.lines().enumerate() {
            let line = line?;
            let lineno = index + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let parse_err = |message: String| GraphError::Parse {
                line: lineno,
                message,
            };
            let mut fields = trimmed.split_whitespace();
            let (Some(node), Some(weight), None) = (fields.next(), fields.next(), fields.next())
            else {
                return Err(parse_err("expected 'node<TAB>weight'".into()));
            };
            let node: u64 = node
                .parse()
                .map_err(|_| parse_err(format!("invalid node id {node:?}")))?;
            let weight: u64 = weight
                .parse()
                .map_err(|_| parse_err(format!("invalid weight {weight:?}")))?;
            if node >= n as u64 {
                return Err(GraphError::NodeOutOfRange {
                    id: node,
                    n: n as u64,
                });
            }
            weights[node as usize] = weight;
        }
        Self::new(weights)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    #[inline]
    pub fn weight(&self, node: usize) -> u64 {
        self.weights[node]
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.weights
    }

    pub fn max_weight(&self) -> u64 {
        self.max_weight
    }

    pub fn total(&self) -> u64 {
        self.total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(text: &str) -> Result<CsrGraph, GraphError> {
        CsrGraph::load_edge_list(text.as_bytes())
    }

    #[test]
    fn load_simple_edge_list() {
        let g = parse("0 1\n1\t2\n").unwrap();
        assert_eq!(g.num_nodes(), 3);
        assert_eq!(g.num_arcs(), 2);
        assert_eq!(g.successors(0), &[1]);
    }

    #[test]
    fn declared_node_count() {
        let g = parse("#nodes 4\n").unwrap();
        assert_eq!((g.num_nodes(), g.num_arcs()), (4, 0));
        assert!(matches!(
            parse("#nodes 2\n0 2\n"),
            Err(GraphError::NodeOutOfRange { id: 2, n: 2 })
        ));
    }

    #[test]
    fn duplicates_collapse_self_loops_stay() {
        let g = parse("0 1\n0 1\n1 0\n# comment\n2 2\n").unwrap();
        assert_eq!(g.num_arcs(), 3);
        assert_eq!(g.successors(2), &[2]);
    }

    #[test]
    fn malformed_lines_name_their_line() {
        match parse("0 1\n1 x\n") {
            Err(GraphError::Parse { line: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse("0 1 2\n"),
            Err(GraphError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse("7\n"),
            Err(GraphError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn transpose_of_path() {
        let g = CsrGraph::from_arcs(3, [(0, 1), (1, 2)]).unwrap();
        let t = g.transpose();
        assert_eq!(t.successors(1), &[0]);
        assert_eq!(t.successors(2), &[1]);
        assert!(t.successors(0).is_empty());
    }

    #[test]
    fn symmetric_graph_is_its_own_transpose() {
        let g = CsrGraph::from_arcs(3, [(0, 1), (1, 0), (1, 2), (2, 1)]).unwrap();
        assert_eq!(g.transpose(), g);
    }

    #[test]
    fn binary_rejects_corruption() {
        let g = CsrGraph::from_arcs(3, [(0, 1), (1, 2)]).unwrap();
        let mut bytes = Vec::new();
        g.write_binary(&mut bytes).unwrap();
        assert_eq!(bytes.len(), g.binary_len());
        assert_eq!(CsrGraph::read_binary(&bytes[..]).unwrap(), g);

        let mut bad = bytes.clone();
        bad[1] = b'Z';
        assert!(matches!(
            CsrGraph::read_binary(&bad[..]),
            Err(GraphError::Format(_))
        ));
        assert!(matches!(
            CsrGraph::read_binary(&bytes[..bytes.len() - 3]),
            Err(GraphError::Format(_))
        ));
        // offsets[1] > offsets[2]
        let mut bad = bytes.clone();
        bad[BINARY_HEADER_LEN + 8] = 3;
        assert!(matches!(
            CsrGraph::read_binary(&bad[..]),
            Err(GraphError::Format(_))
        ));
    }

    #[test]
    fn from_parts_validation() {
        assert!(CsrGraph::from_parts(vec![0, 1], vec![0]).is_ok());
        assert!(CsrGraph::from_parts(vec![1, 1], vec![0]).is_err());
        assert!(CsrGraph::from_parts(vec![0, 1], vec![3]).is_err());
        assert!(CsrGraph::from_parts(vec![0, 2], vec![0, 0]).is_err());
    }

    #[test]
    fn weights_parse_and_validate() {
        let w = NodeWeights::load("0\t3\n2 5\n".as_bytes(), 3).unwrap();
        assert_eq!(w.as_slice(), &[3, 1, 5]);
        assert_eq!((w.max_weight(), w.total()), (5, 9));
        assert!(matches!(
            NodeWeights::load("1\t0\n".as_bytes(), 3),
            Err(GraphError::ZeroWeight { node: 1 })
        ));
        assert!(matches!(
            NodeWeights::load("5\t1\n".as_bytes(), 3),
            Err(GraphError::NodeOutOfRange { .. })
        ));
        assert!(matches!(
            NodeWeights::load("1\n".as_bytes(), 3),
            Err(GraphError::Parse { line: 1, .. })
        ));
    }

    fn arb_graph() -> impl Strategy<Value = CsrGraph> {
        (1usize..40).prop_flat_map(|n| {
            prop::collection::vec((0..n, 0..n), 0..4 * n)
                .prop_map(move |arcs| CsrGraph::from_arcs(n, arcs).unwrap())
        })
    }

    proptest! {
        #[test]
        fn transpose_is_an_involution(g in arb_graph()) {
            let t = g.transpose();
            prop_assert_eq!(t.num_nodes(), g.num_nodes());
            prop_assert_eq!(t.num_arcs(), g.num_arcs());
            prop_assert_eq!(t.transpose(), g.clone());
            let mut indeg = vec![0; g.num_nodes()];
            for (_, v) in g.arcs() { indeg[v] += 1; }
            for (v, &d) in indeg.iter().enumerate() {
                prop_assert_eq!(t.outdegree(v), d);
            }
        }

        #[test]
        fn binary_round_trip(g in arb_graph()) {
            let mut bytes = Vec::new();
            g.write_binary(&mut bytes).unwrap();
            prop_assert_eq!(bytes.len(), 20 + 8 * (g.num_nodes() + 1) + 8 * g.num_arcs());
            prop_assert_eq!(CsrGraph::read_binary(&bytes[..]).unwrap(), g);
        }
    }
}
