//! Undirected weighted graphs, edge-list ingestion and random graph models.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

/// An undirected edge stored with `u < v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

/// Immutable undirected, loop-free graph with contiguous node ids.
///
/// `edges` keeps insertion order; `adjacency[v]` lists `(neighbor, weight)`
/// sorted by neighbor id.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    id: String,
    num_nodes: usize,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(usize, f64)>>,
    labels: Option<Vec<String>>,
}

/// Outcome of inserting an edge through [`GraphBuilder::add_edge`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Insert {
    Added,
    Duplicate,
    SelfLoop,
}

/// Incremental constructor that enforces the graph invariants.
#[derive(Debug, Default)]
pub struct GraphBuilder {
    num_nodes: usize,
    edges: Vec<Edge>,
    seen: HashMap<(usize, usize), usize>,
}

impl GraphBuilder {
    pub fn new(num_nodes: usize) -> Self {
        GraphBuilder { num_nodes, ..Default::default() }
    }

    /// Grows the node range to at least `n` nodes.
    pub fn ensure_nodes(&mut self, n: usize) {
        self.num_nodes = self.num_nodes.max(n);
    }

    /// Adds `{u, v}`. Duplicates keep the first weight; self-loops are ignored.
    pub fn add_edge(&mut self, u: usize, v: usize, weight: f64) -> Result<Insert> {
        for node in [u, v] {
            if node >= self.num_nodes {
                return Err(Error::InvalidNode(node));
            }
        }
        if !(weight.is_finite() && weight > 0.0) {
            return Err(Error::InvalidParameter(format!("edge weight must be positive and finite, got {weight}")));
        }
        if u == v {
            return Ok(Insert::SelfLoop);
        }
        let key = (u.min(v), u.max(v));
        if self.seen.contains_key(&key) {
            return Ok(Insert::Duplicate);
        }
        self.seen.insert(key, self.edges.len());
        self.edges.push(Edge { u: key.0, v: key.1, weight });
        Ok(Insert::Added)
    }

    pub fn build(self, id: impl Into<String>) -> Graph {
        let mut adjacency = vec![Vec::new(); self.num_nodes];
        for e in &self.edges {
            adjacency[e.u].push((e.v, e.weight));
            adjacency[e.v].push((e.u, e.weight));
        }
        for list in &mut adjacency {
            list.sort_by_key(|&(n, _)| n);
        }
        Graph {
            id: id.into(),
            num_nodes: self.num_nodes,
            edges: self.edges,
            adjacency,
            labels: None,
        }
    }
}

impl Graph {
    /// Builds a graph from an explicit edge list, rejecting self-loops and
    /// duplicate pairs.
    pub fn from_edges(
        id: impl Into<String>,
        num_nodes: usize,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Graph> {
        let mut builder = GraphBuilder::new(num_nodes);
        for (u, v, w) in edges {
            match builder.add_edge(u, v, w)? {
                Insert::Added => {}
                Insert::Duplicate => {
                    return Err(Error::InvalidParameter(format!("duplicate edge ({u}, {v})")))
                }
                Insert::SelfLoop => return Err(Error::InvalidParameter(format!("self-loop at node {u}"))),
            }
        }
        Ok(builder.build(id))
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Graph {
        self.id = id.into();
        self
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Display name of node `v`: its original label if known, else the id.
    pub fn label(&self, v: usize) -> String {
        match &self.labels {
            Some(labels) => labels[v].clone(),
            None => v.to_string(),
        }
    }

    /// Neighbors of `v` with edge weights, sorted by neighbor id.
    pub fn neighbors(&self, v: usize) -> &[(usize, f64)] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edge_weight(u, v).is_some()
    }

    pub fn edge_weight(&self, u: usize, v: usize) -> Option<f64> {
        let list = self.adjacency.get(u)?;
        list.binary_search_by_key(&v, |&(n, _)| n).ok().map(|i| list[i].1)
    }

    /// Fraction of the `C(n, 2)` possible pairs that are edges.
    pub fn edge_density(&self) -> Result<f64> {
        if self.num_nodes < 2 {
            return Err(Error::InvalidParameter("edge density needs at least two nodes".into()));
        }
        let n = self.num_nodes as f64;
        Ok(self.edges.len() as f64 / (n * (n - 1.0) / 2.0))
    }

    /// Serializes to the edge-list text format, one edge per line.
    pub fn to_edge_list(&self, weighted: bool) -> String {
        let mut out = String::new();
        for e in &self.edges {
            let (a, b) = (self.label(e.u), self.label(e.v));
            if weighted {
                out.push_str(&format!("{a} {b} {}\n", e.weight));
            } else {
                out.push_str(&format!("{a} {b}\n"));
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        let dump = GraphDump {
            id: Some(self.id.clone()),
            num_nodes: self.num_nodes,
            edges: self.edges.iter().map(|e| (e.u, e.v, e.weight)).collect(),
            labels: self.labels.clone(),
        };
        Ok(serde_json::to_string(&dump)?)
    }

    pub fn from_json(text: &str) -> Result<Graph> {
        let dump: GraphDump = serde_json::from_str(text)?;
        if let Some(labels) = &dump.labels {
            if labels.len() != dump.num_nodes {
                return Err(Error::ShapeMismatch(format!(
                    "{} labels for {} nodes",
                    labels.len(),
                    dump.num_nodes
                )));
            }
        }
        let mut graph = Graph::from_edges(dump.id.unwrap_or_default(), dump.num_nodes, dump.edges)?;
        graph.labels = dump.labels;
        Ok(graph)
    }
}

#[derive(Serialize, Deserialize)]
struct GraphDump {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    num_nodes: usize,
    edges: Vec<(usize, usize, f64)>,
    labels: Option<Vec<String>>,
}

/// A graph read from an edge list plus what was discarded on the way.
#[derive(Debug, Clone)]
pub struct LoadedGraph {
    pub graph: Graph,
    pub self_loops_dropped: usize,
    pub duplicates_collapsed: usize,
}

/// Parses an edge list. Lines are `u v` or `u v w`; `#` starts a comment.
///
/// Node labels are mapped to ids in order of first appearance. With
/// `weighted == false` every edge gets weight 1, although a third column is
/// still validated.
pub fn load_edge_list(text: &str, weighted: bool) -> Result<LoadedGraph> {
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut labels: Vec<String> = Vec::new();
    let mut pairs: Vec<(usize, usize, f64)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if tokens.len() != 2 && tokens.len() != 3 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected 2 or 3 tokens, found {}", tokens.len()),
            });
        }
        let weight = match tokens.get(2) {
            Some(tok) => {
                let w: f64 = tok.parse().map_err(|_| Error::Parse {
                    line: line_no,
                    msg: format!("weight {tok:?} is not a number"),
                })?;
                if !(w.is_finite() && w > 0.0) {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: format!("weight {tok:?} must be positive and finite"),
                    });
                }
                if weighted { w } else { 1.0 }
            }
            None => 1.0,
        };
        let mut intern = |tok: &str| -> usize {
            *ids.entry(tok.to_string()).or_insert_with(|| {
                labels.push(tok.to_string());
                labels.len() - 1
            })
        };
        let u = intern(tokens[0]);
        let v = intern(tokens[1]);
        pairs.push((u, v, weight));
    }

    if labels.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let mut builder = GraphBuilder::new(labels.len());
    let mut self_loops_dropped = 0;
    let mut duplicates_collapsed = 0;
    for (u, v, w) in pairs {
        match builder.add_edge(u, v, w)? {
            Insert::Added => {}
            Insert::Duplicate => duplicates_collapsed += 1,
            Insert::SelfLoop => self_loops_dropped += 1,
        }
    }
    if self_loops_dropped > 0 {
        log::warn!("dropped {self_loops_dropped} self-loop(s) while loading edge list");
    }
    let mut graph = builder.build("");
    graph.labels = Some(labels);
    Ok(LoadedGraph { graph, self_loops_dropped, duplicates_collapsed })
}

/// Reads a graph file: JSON (see [`Graph::to_json`]) when the extension is
/// `.json`, an edge list otherwise. Edge-list graphs take the file stem as id.
pub fn load_graph_file(path: &std::path::Path, weighted: bool) -> Result<Graph> {
    let text = std::fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e == "json") {
        return Graph::from_json(&text);
    }
    let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(load_edge_list(&text, weighted)?.graph.with_id(id))
}

/// The Les Misérables character co-occurrence network (77 nodes, 254 edges).
/// The unweighted form treats every co-occurrence as an edge of weight 1.
pub fn les_miserables(weighted: bool) -> Graph {
    const DATA: &str = include_str!("../data/lesmis.txt");
    let loaded = load_edge_list(DATA, weighted).expect("bundled dataset parses");
    loaded.graph.with_id("lesmis")
}

/// Parameters of a stochastic block model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmSpec {
    pub block_sizes: Vec<usize>,
    pub p_intra: f64,
    pub p_inter: f64,
    pub seed: u64,
}

impl SbmSpec {
    pub fn validate(&self) -> Result<()> {
        if self.block_sizes.is_empty() || self.block_sizes.contains(&0) {
            return Err(Error::InvalidParameter("block sizes must be nonempty and at least 1".into()));
        }
        for (name, p) in [("p_intra", self.p_intra), ("p_inter", self.p_inter)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!("{name} = {p} is not a probability")));
            }
        }
        Ok(())
    }

    pub fn num_nodes(&self) -> usize {
        self.block_sizes.iter().sum()
    }

    /// Block index of every node; blocks occupy consecutive id ranges.
    pub fn membership(&self) -> Vec<usize> {
        self.block_sizes
            .iter()
            .enumerate()
            .flat_map(|(b, &size)| std::iter::repeat_n(b, size))
            .collect()
    }

    pub fn default_id(&self) -> String {
        let blocks: Vec<String> = self.block_sizes.iter().map(|b| b.to_string()).collect();
        format!("sbm-{}-pin{}-pout{}-s{}", blocks.join("x"), self.p_intra, self.p_inter, self.seed)
    }
}

/// Samples a stochastic block model. Pairs are visited in lexicographic order
/// and each consumes exactly one uniform draw from the graph-generation
/// stream, so the output depends only on the spec.
pub fn generate_sbm(spec: &SbmSpec) -> Result<Graph> {
    spec.validate()?;
    let membership = spec.membership();
    let n = membership.len();
    let mut rng = stream_rng(spec.seed, Stream::GraphGen, 0, 0);
    let mut builder = GraphBuilder::new(n);
    for u in 0..n {
        for v in (u + 1)..n {
            let p = if membership[u] == membership[v] { spec.p_intra } else { spec.p_inter };
            let draw: f64 = rng.random();
            if draw < p {
                builder.add_edge(u, v, 1.0)?;
            }
        }
    }
    Ok(builder.build(spec.default_id()))
}

/// Samples an Erdős–Rényi graph G(n, p).
pub fn generate_er(n: usize, p: f64, seed: u64) -> Result<Graph> {
    if n == 0 {
        return Err(Error::InvalidParameter("an Erdős–Rényi graph needs n ≥ 1".into()));
    }
    let spec = SbmSpec { block_sizes: vec![n], p_intra: p, p_inter: p, seed };
    Ok(generate_sbm(&spec)?.with_id(format!("er-n{n}-p{p}-s{seed}")))
}
