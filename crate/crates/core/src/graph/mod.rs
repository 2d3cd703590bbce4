//! Joint topologies, binary adjacency, and the normalized partition stack
//! consumed by the graph convolution.
//!
//! Topologies ship as text files under `data/topology/`:
//!
//! ```text
//! # comment
//! version 1
//! nodes 25
//! root 0
//! edge 0 1
//! ```
//!
//! Edges are undirected for adjacency purposes; the written orientation is
//! kept so the body file doubles as the source → target bone list.

use std::collections::{HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use crate::modality::Modality;

pub const BODY25_TOPOLOGY: &str = include_str!("../../data/topology/body25.top");
pub const HANDS42_TOPOLOGY: &str = include_str!("../../data/topology/hands42.top");
pub const FACE68_TOPOLOGY: &str = include_str!("../../data/topology/face68.top");

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("topology line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid topology: {0}")]
    Invalid(String),
    #[error("invalid argument: {0}")]
    Argument(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub name: String,
    pub node_count: usize,
    edges: Vec<(usize, usize)>,
    pub root: usize,
}

impl Topology {
    pub fn new(
        name: impl Into<String>,
        node_count: usize,
        edges: Vec<(usize, usize)>,
        root: usize,
    ) -> Result<Self, GraphError> {
        let t = Topology {
            name: name.into(),
            node_count,
            edges,
            root,
        };
        t.validate()?;
        Ok(t)
    }

    fn validate(&self) -> Result<(), GraphError> {
        if self.node_count == 0 {
            return Err(GraphError::Invalid("node count must be positive".into()));
        }
        if self.root >= self.node_count {
            return Err(GraphError::Invalid(format!(
                "root {} out of range for {} nodes",
                self.root, self.node_count
            )));
        }
        let mut seen = HashSet::new();
        for &(i, j) in &self.edges {
            if i >= self.node_count || j >= self.node_count {
                return Err(GraphError::Invalid(format!(
                    "edge ({i},{j}) out of range for {} nodes",
                    self.node_count
                )));
            }
            if i == j {
                return Err(GraphError::Invalid(format!("self edge ({i},{j})")));
            }
            if !seen.insert((i.min(j), i.max(j))) {
                return Err(GraphError::Invalid(format!("duplicate edge ({i},{j})")));
            }
        }
        Ok(())
    }

    pub fn parse(name: &str, text: &str) -> Result<Self, GraphError> {
        let mut nodes = None;
        let mut root = None;
        let mut edges = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |m: String| GraphError::Parse {
                line: i + 1,
                message: m,
            };
            let toks: Vec<&str> = line.split_whitespace().collect();
            let num = |s: &str| s.parse::<usize>().map_err(|_| err(format!("not an index: `{s}`")));
            match toks.as_slice() {
                ["version", v] => {
                    if *v != "1" {
                        return Err(err(format!("unsupported topology version {v}")));
                    }
                }
                ["nodes", n] => nodes = Some(num(n)?),
                ["root", r] => root = Some(num(r)?),
                ["edge", a, b] => edges.push((num(a)?, num(b)?)),
                _ => return Err(err(format!("unrecognized record `{line}`"))),
            }
        }
        let node_count = nodes.ok_or_else(|| GraphError::Invalid("missing `nodes` header".into()))?;
        Topology::new(name, node_count, edges, root.unwrap_or(0))
    }

    /// Serializes back to the topology file grammar.
    pub fn to_text(&self) -> String {
        let mut s = format!("version 1\nnodes {}\nroot {}\n", self.node_count, self.root);
        for (a, b) in &self.edges {
            s.push_str(&format!("edge {a} {b}\n"));
        }
        s
    }

    pub fn body() -> Self {
        Topology::parse("body25", BODY25_TOPOLOGY).expect("shipped body25 topology is valid")
    }

    pub fn hands() -> Self {
        Topology::parse("hands42", HANDS42_TOPOLOGY).expect("shipped hands42 topology is valid")
    }

    pub fn face() -> Self {
        Topology::parse("face68", FACE68_TOPOLOGY).expect("shipped face68 topology is valid")
    }

    /// Line graph of the body tree: one node per bone, bones sharing a joint are adjacent.
    pub fn bones_line_graph() -> Self {
        let body = Topology::body();
        let e = body.directed_edges();
        let mut edges = Vec::new();
        for a in 0..e.len() {
            for b in a + 1..e.len() {
                let (p, q) = (e[a], e[b]);
                if p.0 == q.0 || p.0 == q.1 || p.1 == q.0 || p.1 == q.1 {
                    edges.push((a, b));
                }
            }
        }
        Topology::new("bones24", e.len(), edges, 0).expect("line graph is valid")
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Edges in file orientation (source → target).
    pub fn directed_edges(&self) -> Vec<(usize, usize)> {
        self.edges.clone()
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut nb = vec![Vec::new(); self.node_count];
        for &(a, b) in &self.edges {
            nb[a].push(b);
            nb[b].push(a);
        }
        nb
    }

    /// Hop distance to a component root: `root` for its own component, the
    /// lowest-index node for every other component.
    pub fn hop_distances(&self, root: usize) -> Result<Vec<usize>, GraphError> {
        if root >= self.node_count {
            return Err(GraphError::Argument(format!(
                "root {root} out of range for {} nodes",
                self.node_count
            )));
        }
        let nb = self.neighbors();
        let mut dist = vec![usize::MAX; self.node_count];
        let starts = std::iter::once(root).chain(0..self.node_count);
        for start in starts {
            if dist[start] != usize::MAX {
                continue;
            }
            dist[start] = 0;
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                for &v in &nb[u] {
                    if dist[v] == usize::MAX {
                        dist[v] = dist[u] + 1;
                        queue.push_back(v);
                    }
                }
            }
        }
        Ok(dist)
    }
}

/// Fixed topology for a modality; flow reuses the body graph.
pub fn topology(modality: Modality) -> Result<Topology, GraphError> {
    match modality {
        Modality::Body | Modality::Flow => Ok(Topology::body()),
        Modality::Hands => Ok(Topology::hands()),
        Modality::Face => Ok(Topology::face()),
        Modality::Bones => Err(GraphError::Argument(
            "bones have no joint graph (use the bones line graph explicitly)".into(),
        )),
    }
}

/// Dense row-major N×N matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        SquareMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = SquareMatrix::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn transpose(&self) -> Self {
        let mut t = SquareMatrix::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.data[i * self.n..(i + 1) * self.n].iter().sum()
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn count_nonzero(&self) -> usize {
        self.data.iter().filter(|v| **v != 0.0).count()
    }

    pub fn binarize(&self) -> Self {
        SquareMatrix {
            n: self.n,
            data: self.data.iter().map(|&v| if v != 0.0 { 1.0 } else { 0.0 }).collect(),
        }
    }

    /// Divides each row by its sum; all-zero rows stay zero.
    pub fn row_normalized(&self) -> Self {
        let mut out = self.clone();
        for i in 0..self.n {
            let s = self.row_sum(i);
            if s != 0.0 {
                for j in 0..self.n {
                    out.data[i * self.n + j] /= s;
                }
            }
        }
        out
    }
}

/// Binary symmetric adjacency with zero diagonal.
pub fn adjacency(top: &Topology) -> SquareMatrix {
    let mut a = SquareMatrix::zeros(top.node_count);
    for &(i, j) in top.edges() {
        a.set(i, j, 1.0);
        a.set(j, i, 1.0);
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PartitionStrategy {
    /// [I, D⁻¹A]
    #[default]
    SelfNeighbor,
    /// [I, centripetal, centrifugal], split by hop distance to the root.
    SpatialConfig,
}

impl PartitionStrategy {
    pub fn partition_count(self) -> usize {
        match self {
            PartitionStrategy::SelfNeighbor => 2,
            PartitionStrategy::SpatialConfig => 3,
        }
    }
}

impl fmt::Display for PartitionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PartitionStrategy::SelfNeighbor => "self_neighbor",
            PartitionStrategy::SpatialConfig => "spatial_config",
        })
    }
}

impl FromStr for PartitionStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "self_neighbor" => Ok(PartitionStrategy::SelfNeighbor),
            "spatial_config" => Ok(PartitionStrategy::SpatialConfig),
            other => Err(format!("unknown partition strategy `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionedAdjacency {
    pub strategy: PartitionStrategy,
    pub stack: Vec<SquareMatrix>,
}

impl PartitionedAdjacency {
    pub fn partition_count(&self) -> usize {
        self.stack.len()
    }

    pub fn node_count(&self) -> usize {
        self.stack[0].n
    }

    /// Arbitrary stack, e.g. for tests that need a plain `[I]`.
    pub fn from_stack(stack: Vec<SquareMatrix>) -> Result<Self, GraphError> {
        let n = stack
            .first()
            .ok_or_else(|| GraphError::Argument("empty partition stack".into()))?
            .n;
        if stack.iter().any(|m| m.n != n) {
            return Err(GraphError::Argument("partitions differ in size".into()));
        }
        Ok(PartitionedAdjacency {
            strategy: PartitionStrategy::SelfNeighbor,
            stack,
        })
    }

    /// Masks shape N×N for every partition.
    pub fn masks_shape(&self) -> (usize, usize) {
        (self.node_count(), self.node_count())
    }
}

/// Splits binary adjacency `a` into degree-normalized partitions.
///
/// Within `spatial_config`, a neighbor at the same hop distance as the
/// center is grouped with the centripetal partition.
pub fn partitioned_adjacency(
    a: &SquareMatrix,
    strategy: PartitionStrategy,
    root: usize,
) -> Result<PartitionedAdjacency, GraphError> {
    let n = a.n;
    if root >= n {
        return Err(GraphError::Argument(format!("root {root} out of range for {n} nodes")));
    }
    let identity = SquareMatrix::identity(n);
    let stack = match strategy {
        PartitionStrategy::SelfNeighbor => vec![identity, a.row_normalized()],
        PartitionStrategy::SpatialConfig => {
            let mut edges = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    if a.get(i, j) != 0.0 || a.get(j, i) != 0.0 {
                        edges.push((i, j));
                    }
                }
            }
            let top = Topology::new("adjacency", n, edges, root)?;
            let dist = top.hop_distances(root)?;
            let mut centripetal = SquareMatrix::zeros(n);
            let mut centrifugal = SquareMatrix::zeros(n);
            for i in 0..n {
                for j in 0..n {
                    if a.get(i, j) == 0.0 {
                        continue;
                    }
                    if dist[j] > dist[i] {
                        centrifugal.set(i, j, 1.0);
                    } else {
                        centripetal.set(i, j, 1.0);
                    }
                }
            }
            vec![identity, centripetal.row_normalized(), centrifugal.row_normalized()]
        }
    };
    Ok(PartitionedAdjacency { strategy, stack })
}

/// Partition stack for one modality's shipped topology.
pub fn modality_partitions(
    modality: Modality,
    strategy: PartitionStrategy,
) -> Result<PartitionedAdjacency, GraphError> {
    let top = topology(modality)?;
    partitioned_adjacency(&adjacency(&top), strategy, top.root)
}

/// Lowercase hex SHA-256 of a topology file's bytes.
pub fn topology_hash(text: &str) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
