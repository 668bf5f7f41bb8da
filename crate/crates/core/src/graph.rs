//! Immutable multi-edge directed knowledge graph and its read-only queries.
//!
//! Nodes are unique entities keyed by their normalized label; every distinct
//! triple becomes one edge. Degrees count edge records (in + out), so
//! parallel edges each count and a self-loop counts twice.
//!
//! Subgraphs produced by [`filter_by_degree`] and [`expand_neighborhood`]
//! keep the original node ids and original degrees; the degree inside the
//! subgraph is exposed as [`Node::filtered_degree`].

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{normalize_label, AbbrevTable, TripleKey, Triplet};

/// Default spacing between parallel edges in a group.
pub const DEFAULT_BASE_CURVATURE: f64 = 0.15;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("duplicate triple {0}; run deduplication before building the graph")]
    DuplicateTriple(String),
    #[error("node {0} is not in the graph")]
    UnknownNode(NodeId),
    #[error("invalid graph export: {0}")]
    InvalidExport(String),
}

impl GraphError {
    pub fn code(&self) -> &'static str {
        match self {
            GraphError::DuplicateTriple(_) => "E_DUPLICATE_TRIPLE",
            GraphError::UnknownNode(_) => "E_UNKNOWN_NODE",
            GraphError::InvalidExport(_) => "E_INVALID_EXPORT",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub id: NodeId,
    pub label: String,
    /// Degree in the graph this node was first built into.
    pub degree: usize,
    /// Degree counting only the edges present in this (sub)graph.
    pub filtered_degree: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub source: NodeId,
    pub target: NodeId,
    pub relation: String,
    /// Alias from the abbreviation table, empty when there is none.
    pub abbrev: String,
    pub multiplicity: u64,
    pub curvature: f64,
}

impl Edge {
    /// The label to draw: the alias when present, the relation otherwise.
    pub fn display_label(&self) -> &str {
        if self.abbrev.is_empty() {
            &self.relation
        } else {
            &self.abbrev
        }
    }

    /// Whether the edge runs along its group's reference direction
    /// (lower node id towards higher; self-loops count as forward).
    pub fn is_forward(&self) -> bool {
        self.source <= self.target
    }

    /// Curvature expressed in the group's reference frame. Two edges of a
    /// group render on the same arc exactly when these values are equal.
    pub fn reference_offset(&self) -> f64 {
        if self.is_forward() {
            self.curvature
        } else {
            -self.curvature
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphOptions {
    pub base_curvature: f64,
}

impl Default for GraphOptions {
    fn default() -> Self {
        GraphOptions {
            base_curvature: DEFAULT_BASE_CURVATURE,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeGraph {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    index: HashMap<NodeId, usize>,
    /// Incident edge indices per node position; a self-loop is listed once.
    adjacency: Vec<Vec<usize>>,
    reference_max_degree: usize,
}

/// One parallel edge as seen by [`edge_group_curvatures`].
#[derive(Debug, Clone, Copy)]
pub struct GroupMember<'a> {
    pub source: NodeId,
    pub target: NodeId,
    pub relation: &'a str,
}

/// Curvatures for the edges of one group, returned in input order.
///
/// Edges are ranked forward-first, each direction sorted by relation label
/// (input order breaks ties). Rank `i` of `n` gets `base * (i - (n-1)/2)`,
/// negated for edges running against the reference direction so that the
/// rendered arcs stay apart.
pub fn edge_group_curvatures(members: &[GroupMember<'_>], base: f64) -> Vec<f64> {
    let n = members.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let fa = members[a].source <= members[a].target;
        let fb = members[b].source <= members[b].target;
        fb.cmp(&fa)
            .then_with(|| members[a].relation.cmp(members[b].relation))
            .then_with(|| a.cmp(&b))
    });
    let centre = (n as f64 - 1.0) / 2.0;
    let mut out = vec![0.0; n];
    for (rank, &i) in order.iter().enumerate() {
        let c = base * (rank as f64 - centre);
        let forward = members[i].source <= members[i].target;
        // avoid -0.0 so exports stay byte-stable
        out[i] = if forward { c } else { -c } + 0.0;
    }
    out
}

/// `r_min + (r_max - r_min) * sqrt(degree / max_degree)`; `r_min` when
/// `max_degree` is zero. Degrees above `max_degree` are clamped.
pub fn node_radius(degree: usize, max_degree: usize, r_min: f64, r_max: f64) -> f64 {
    if max_degree == 0 {
        return r_min;
    }
    let ratio = (degree as f64 / max_degree as f64).min(1.0);
    r_min + (r_max - r_min) * ratio.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusScale {
    pub r_min: f64,
    pub r_max: f64,
}

impl Default for RadiusScale {
    fn default() -> Self {
        RadiusScale {
            r_min: 4.0,
            r_max: 20.0,
        }
    }
}

/// Builds the graph with the default curvature spacing.
pub fn build_graph(triples: &[Triplet], abbrev: &AbbrevTable) -> Result<KnowledgeGraph, GraphError> {
    build_graph_with(triples, abbrev, &GraphOptions::default())
}

pub fn build_graph_with(
    triples: &[Triplet],
    abbrev: &AbbrevTable,
    options: &GraphOptions,
) -> Result<KnowledgeGraph, GraphError> {
    let mut seen: HashSet<TripleKey> = HashSet::with_capacity(triples.len());
    let mut by_label: IndexMap<String, usize> = IndexMap::new();
    let mut nodes: Vec<Node> = Vec::new();
    let mut edges: Vec<Edge> = Vec::with_capacity(triples.len());

    let mut intern = |label: &str, nodes: &mut Vec<Node>| -> NodeId {
        let key = normalize_label(label);
        let next = nodes.len();
        let pos = *by_label.entry(key).or_insert_with(|| {
            nodes.push(Node {
                id: NodeId(next as u32),
                label: label.trim().to_owned(),
                degree: 0,
                filtered_degree: 0,
            });
            next
        });
        nodes[pos].id
    };

    for t in triples {
        let key = t.key();
        if !seen.insert(key) {
            return Err(GraphError::DuplicateTriple(t.to_string()));
        }
        let source = intern(&t.subject, &mut nodes);
        let target = intern(&t.object, &mut nodes);
        let relation = normalize_label(&t.predicate);
        let abbrev = abbrev.get(&relation).unwrap_or_default().to_owned();
        edges.push(Edge {
            source,
            target,
            relation,
            abbrev,
            multiplicity: t.multiplicity,
            curvature: 0.0,
        });
    }

    assign_curvatures(&mut edges, options.base_curvature);
    for e in &edges {
        nodes[e.source.0 as usize].degree += 1;
        nodes[e.target.0 as usize].degree += 1;
    }
    for n in &mut nodes {
        n.filtered_degree = n.degree;
    }
    let reference_max_degree = nodes.iter().map(|n| n.degree).max().unwrap_or(0);
    Ok(KnowledgeGraph::assemble(nodes, edges, reference_max_degree))
}

fn assign_curvatures(edges: &mut [Edge], base: f64) {
    let mut groups: IndexMap<(NodeId, NodeId), Vec<usize>> = IndexMap::new();
    for (i, e) in edges.iter().enumerate() {
        let pair = (e.source.min(e.target), e.source.max(e.target));
        groups.entry(pair).or_default().push(i);
    }
    for members in groups.values() {
        let view: Vec<GroupMember<'_>> = members
            .iter()
            .map(|&i| GroupMember {
                source: edges[i].source,
                target: edges[i].target,
                relation: &edges[i].relation,
            })
            .collect();
        let curvatures = edge_group_curvatures(&view, base);
        for (&i, c) in members.iter().zip(curvatures) {
            edges[i].curvature = c;
        }
    }
}

impl KnowledgeGraph {
    /// Wires up the index and adjacency; `filtered_degree` must already be set.
    fn assemble(nodes: Vec<Node>, edges: Vec<Edge>, reference_max_degree: usize) -> Self {
        let index: HashMap<NodeId, usize> =
            nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect();
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for (i, e) in edges.iter().enumerate() {
            let s = index[&e.source];
            let t = index[&e.target];
            adjacency[s].push(i);
            if s != t {
                adjacency[t].push(i);
            }
        }
        KnowledgeGraph {
            nodes,
            edges,
            index,
            adjacency,
            reference_max_degree,
        }
    }

    pub fn empty() -> Self {
        Self::assemble(Vec::new(), Vec::new(), 0)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.index.get(&id).map(|&i| &self.nodes[i])
    }

    /// Position of `id` in [`Self::nodes`].
    pub fn position(&self, id: NodeId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.index.contains_key(&id)
    }

    /// Edges touching `id`, each listed once.
    pub fn incident_edges(&self, id: NodeId) -> impl Iterator<Item = &Edge> + '_ {
        let list = self
            .index
            .get(&id)
            .map(|&i| self.adjacency[i].as_slice())
            .unwrap_or(&[]);
        list.iter().map(move |&e| &self.edges[e])
    }

    /// Distinct neighbors of `id`, ignoring direction. Includes `id` itself
    /// when it has a self-loop.
    pub fn neighbors(&self, id: NodeId) -> Vec<NodeId> {
        let mut out: Vec<NodeId> = self
            .incident_edges(id)
            .map(|e| if e.source == id { e.target } else { e.source })
            .collect();
        out.sort();
        out.dedup();
        out
    }

    /// Largest original degree among this graph's nodes.
    pub fn max_degree(&self) -> usize {
        self.nodes.iter().map(|n| n.degree).max().unwrap_or(0)
    }

    /// Largest degree of the full graph this one was derived from; keeps node
    /// sizes comparable across filtered views.
    pub fn reference_max_degree(&self) -> usize {
        self.reference_max_degree
    }

    /// Subgraph on the nodes accepted by `keep`, with every edge whose
    /// endpoints both survive.
    pub fn induced_subgraph(&self, mut keep: impl FnMut(&Node) -> bool) -> KnowledgeGraph {
        let mut nodes: Vec<Node> = self.nodes.iter().filter(|n| keep(n)).cloned().collect();
        let kept: HashMap<NodeId, usize> =
            nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect();
        let edges: Vec<Edge> = self
            .edges
            .iter()
            .filter(|e| kept.contains_key(&e.source) && kept.contains_key(&e.target))
            .cloned()
            .collect();
        for n in &mut nodes {
            n.filtered_degree = 0;
        }
        for e in &edges {
            nodes[kept[&e.source]].filtered_degree += 1;
            nodes[kept[&e.target]].filtered_degree += 1;
        }
        KnowledgeGraph::assemble(nodes, edges, self.reference_max_degree)
    }

    pub fn radius(&self, node: &Node, scale: &RadiusScale) -> f64 {
        node_radius(node.degree, self.reference_max_degree, scale.r_min, scale.r_max)
    }

    pub fn export(&self, scale: &RadiusScale) -> GraphExport {
        GraphExport {
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeRecord {
                    id: n.id,
                    label: n.label.clone(),
                    degree: n.degree,
                    filtered_degree: n.filtered_degree,
                    radius: self.radius(n, scale),
                })
                .collect(),
            links: self
                .edges
                .iter()
                .map(|e| LinkRecord {
                    source: e.source,
                    target: e.target,
                    relation: e.relation.clone(),
                    abbrev: e.abbrev.clone(),
                    multiplicity: e.multiplicity,
                    curvature: e.curvature,
                })
                .collect(),
        }
    }

    /// Rebuilds a graph from its JSON export, checking referential integrity.
    pub fn from_export(export: &GraphExport) -> Result<KnowledgeGraph, GraphError> {
        let mut ids = HashSet::new();
        let mut nodes = Vec::with_capacity(export.nodes.len());
        for n in &export.nodes {
            if !ids.insert(n.id) {
                return Err(GraphError::InvalidExport(format!("node id {} repeats", n.id)));
            }
            nodes.push(Node {
                id: n.id,
                label: n.label.clone(),
                degree: n.degree,
                filtered_degree: 0,
            });
        }
        let mut edges = Vec::with_capacity(export.links.len());
        for l in &export.links {
            for end in [l.source, l.target] {
                if !ids.contains(&end) {
                    return Err(GraphError::InvalidExport(format!(
                        "link {} -> {} references unknown node {}",
                        l.source, l.target, end
                    )));
                }
            }
            if l.multiplicity == 0 {
                return Err(GraphError::InvalidExport("multiplicity 0".into()));
            }
            edges.push(Edge {
                source: l.source,
                target: l.target,
                relation: l.relation.clone(),
                abbrev: l.abbrev.clone(),
                multiplicity: l.multiplicity,
                curvature: l.curvature,
            });
        }
        let pos: HashMap<NodeId, usize> =
            nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect();
        for e in &edges {
            nodes[pos[&e.source]].filtered_degree += 1;
            nodes[pos[&e.target]].filtered_degree += 1;
        }
        let reference_max_degree = nodes.iter().map(|n| n.degree).max().unwrap_or(0);
        Ok(KnowledgeGraph::assemble(nodes, edges, reference_max_degree))
    }
}

/// Keeps the nodes whose original degree is at least `min_degree` and the
/// edges between them. Single pass: this is a threshold, not a k-core.
pub fn filter_by_degree(graph: &KnowledgeGraph, min_degree: usize) -> KnowledgeGraph {
    graph.induced_subgraph(|n| n.degree >= min_degree)
}

/// Case-insensitive substring search over node labels, best-connected first.
pub fn search(graph: &KnowledgeGraph, query: &str) -> Vec<NodeId> {
    let needle = query.trim().to_lowercase();
    if needle.is_empty() {
        return Vec::new();
    }
    let mut hits: Vec<&Node> = graph
        .nodes
        .iter()
        .filter(|n| n.label.to_lowercase().contains(&needle))
        .collect();
    hits.sort_by(|a, b| {
        b.degree
            .cmp(&a.degree)
            .then_with(|| a.label.cmp(&b.label))
            .then_with(|| a.id.cmp(&b.id))
    });
    hits.into_iter().map(|n| n.id).collect()
}

/// Induced subgraph on everything within `depth` undirected hops of a seed.
pub fn expand_neighborhood(
    graph: &KnowledgeGraph,
    seeds: &[NodeId],
    depth: usize,
) -> Result<KnowledgeGraph, GraphError> {
    let mut distance: HashMap<NodeId, usize> = HashMap::new();
    let mut queue = VecDeque::new();
    for &seed in seeds {
        if !graph.contains(seed) {
            return Err(GraphError::UnknownNode(seed));
        }
        if distance.insert(seed, 0).is_none() {
            queue.push_back(seed);
        }
    }
    while let Some(current) = queue.pop_front() {
        let d = distance[&current];
        if d == depth {
            continue;
        }
        for e in graph.incident_edges(current) {
            let other = if e.source == current { e.target } else { e.source };
            if !distance.contains_key(&other) {
                distance.insert(other, d + 1);
                queue.push_back(other);
            }
        }
    }
    Ok(graph.induced_subgraph(|n| distance.contains_key(&n.id)))
}

/// Undirected simple neighbor sets: parallel edges collapsed, self-loops removed.
fn simple_neighbors(graph: &KnowledgeGraph) -> Vec<HashSet<usize>> {
    let mut sets = vec![HashSet::new(); graph.nodes.len()];
    for e in &graph.edges {
        let s = graph.index[&e.source];
        let t = graph.index[&e.target];
        if s != t {
            sets[s].insert(t);
            sets[t].insert(s);
        }
    }
    sets
}

/// Mean local clustering coefficient over all nodes of the undirected
/// simple projection. Nodes with fewer than two neighbors contribute zero.
pub fn clustering_coefficient(graph: &KnowledgeGraph) -> f64 {
    if graph.nodes.is_empty() {
        return 0.0;
    }
    let sets = simple_neighbors(graph);
    let mut total = 0.0;
    for neighbors in &sets {
        let k = neighbors.len();
        if k < 2 {
            continue;
        }
        let list: Vec<usize> = neighbors.iter().copied().collect();
        let mut links = 0usize;
        for (i, &a) in list.iter().enumerate() {
            for &b in &list[i + 1..] {
                if sets[a].contains(&b) {
                    links += 1;
                }
            }
        }
        total += 2.0 * links as f64 / (k * (k - 1)) as f64;
    }
    total / graph.nodes.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub node_count: usize,
    pub edge_count: usize,
    /// degree → number of nodes with that degree (degrees within this graph)
    pub degree_distribution: BTreeMap<usize, usize>,
    pub max_degree: usize,
    pub clustering_coefficient: f64,
}

impl GraphStats {
    pub fn compute(graph: &KnowledgeGraph) -> Self {
        let mut degree_distribution = BTreeMap::new();
        for n in &graph.nodes {
            *degree_distribution.entry(n.filtered_degree).or_default() += 1;
        }
        GraphStats {
            node_count: graph.node_count(),
            edge_count: graph.edge_count(),
            max_degree: graph
                .nodes
                .iter()
                .map(|n| n.filtered_degree)
                .max()
                .unwrap_or(0),
            degree_distribution,
            clustering_coefficient: clustering_coefficient(graph),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: NodeId,
    pub label: String,
    pub degree: usize,
    pub filtered_degree: usize,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkRecord {
    pub source: NodeId,
    pub target: NodeId,
    pub relation: String,
    pub abbrev: String,
    pub multiplicity: u64,
    pub curvature: f64,
}

/// The `{"nodes": [...], "links": [...]}` document shared by the file export
/// and the HTTP API.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GraphExport {
    pub nodes: Vec<NodeRecord>,
    pub links: Vec<LinkRecord>,
}
