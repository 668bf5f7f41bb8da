//! Brute-force reference implementations used by the integration tests and
//! the acceptance suite. Deliberately naive: quadratic scans, explicit
//! distance matrices, no shared code with the library beyond the data types.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use kgatlas_core::{KnowledgeGraph, Triplet};
use rand::seq::SliceRandom;
use rand::Rng;

/// Normalization written out character by character.
pub fn norm(label: &str) -> String {
    let mut out = String::new();
    let mut pending_space = false;
    for c in label.chars() {
        let c = if c == '-' || c == '_' { ' ' } else { c };
        if c.is_whitespace() {
            pending_space = !out.is_empty();
            continue;
        }
        if pending_space {
            out.push(' ');
            pending_space = false;
        }
        out.extend(c.to_lowercase());
    }
    out
}

pub type Key = (String, String, String);

pub fn key_of(t: &Triplet) -> Key {
    (norm(&t.subject), norm(&t.predicate), norm(&t.object))
}

/// Spells a label with random case and separator noise.
fn noisy<R: Rng>(rng: &mut R, label: &str) -> String {
    let sep = *["-", "_", " ", "  "].choose(rng).unwrap();
    let mut text: String = label
        .split(' ')
        .collect::<Vec<_>>()
        .join(sep)
        .chars()
        .map(|c| if rng.gen_bool(0.2) { c.to_ascii_uppercase() } else { c })
        .collect();
    if rng.gen_bool(0.1) {
        text = format!(" {text} ");
    }
    text
}

const SUBJECTS: &[&str] = &["trust", "local governments", "media", "voters", "policy", "elites"];
const OBJECTS: &[&str] = &["support", "turnout", "reform", "trust", "identity"];
const PREDICATES: &[&str] = &[
    "influenced by",
    "related to",
    "favor",
    "opposes",
    "shapes",
    "not",
    "no",
    "drives",
    "other",
    "x1",
    "x2",
];

/// A random corpus over small alphabets: lots of collisions and variants.
pub fn random_corpus<R: Rng>(rng: &mut R, max_len: usize) -> Vec<Triplet> {
    let n = rng.gen_range(0..=max_len);
    (0..n)
        .map(|_| {
            let s = SUBJECTS.choose(rng).unwrap();
            let p = PREDICATES.choose(rng).unwrap();
            let o = OBJECTS.choose(rng).unwrap();
            let mult = if rng.gen_bool(0.1) { rng.gen_range(2..5) } else { 1 };
            Triplet::new(&noisy(rng, s), &noisy(rng, p), &noisy(rng, o))
                .unwrap()
                .with_multiplicity(mult)
                .unwrap()
        })
        .collect()
}

/// Dedup oracle: for every record scan all earlier records.
pub fn brute_dedup(triples: &[Triplet]) -> Vec<(Key, u64)> {
    let mut out: Vec<(Key, u64)> = Vec::new();
    for t in triples {
        let k = key_of(t);
        let mut found = false;
        for slot in out.iter_mut() {
            if slot.0 == k {
                slot.1 += t.multiplicity;
                found = true;
            }
        }
        if !found {
            out.push((k, t.multiplicity));
        }
    }
    out
}

/// Weighted relation counts, recomputed from scratch.
pub fn brute_counts(triples: &[Triplet]) -> BTreeMap<String, u64> {
    let mut counts = BTreeMap::new();
    for t in triples {
        *counts.entry(norm(&t.predicate)).or_insert(0) += t.multiplicity;
    }
    counts
}

/// Relabel oracle: every predicate under `min` (except `other`) becomes `other`.
pub fn brute_consolidate(triples: &[Triplet], min: u64, other: &str) -> Vec<Key> {
    let counts = brute_counts(triples);
    triples
        .iter()
        .map(|t| {
            let (s, p, o) = key_of(t);
            if p != other && counts[&p] < min {
                (s, other.to_owned(), o)
            } else {
                (s, p, o)
            }
        })
        .collect()
}

/// Random deduplicated triples over `n` numbered entities.
pub fn random_graph_triples<R: Rng>(rng: &mut R, max_nodes: usize, max_edges: usize) -> Vec<Triplet> {
    let n = rng.gen_range(1..=max_nodes);
    let m = rng.gen_range(0..=max_edges);
    let relations = ["r0", "r1", "r2", "r3"];
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for _ in 0..m {
        let s = rng.gen_range(0..n);
        let o = if rng.gen_bool(0.05) { s } else { rng.gen_range(0..n) };
        let r = relations.choose(rng).unwrap();
        if seen.insert((s, *r, o)) {
            out.push(Triplet::new(&format!("n{s}"), r, &format!("n{o}")).unwrap());
        }
    }
    out
}

pub type EdgeView = (String, String, String);

/// Node labels of a graph, as a set.
pub fn node_labels(g: &KnowledgeGraph) -> BTreeSet<String> {
    g.nodes().iter().map(|n| n.label.clone()).collect()
}

fn label_of(g: &KnowledgeGraph, id: kgatlas_core::NodeId) -> String {
    g.node(id).unwrap().label.clone()
}

/// Edges as sorted (source label, target label, relation) triples.
pub fn edge_views(g: &KnowledgeGraph) -> Vec<EdgeView> {
    let mut v: Vec<EdgeView> = g
        .edges()
        .iter()
        .map(|e| (label_of(g, e.source), label_of(g, e.target), e.relation.clone()))
        .collect();
    v.sort();
    v
}

/// Node set of a triple list.
pub fn brute_nodes(triples: &[Triplet]) -> BTreeSet<String> {
    let mut set = BTreeSet::new();
    for t in triples {
        set.insert(norm(&t.subject));
        set.insert(norm(&t.object));
    }
    set
}

/// Incidence counting: one for each endpoint slot, so self-loops count twice.
pub fn brute_degrees(edges: &[EdgeView]) -> BTreeMap<String, usize> {
    let mut deg = BTreeMap::new();
    for (s, t, _) in edges {
        *deg.entry(s.clone()).or_insert(0) += 1;
        *deg.entry(t.clone()).or_insert(0) += 1;
    }
    deg
}

/// Filter nodes by degree, then filter edges by surviving endpoints.
pub fn brute_filter(
    nodes: &BTreeSet<String>,
    edges: &[EdgeView],
    min_degree: usize,
) -> (BTreeSet<String>, Vec<EdgeView>) {
    let deg = brute_degrees(edges);
    let kept: BTreeSet<String> = nodes
        .iter()
        .filter(|n| deg.get(*n).copied().unwrap_or(0) >= min_degree)
        .cloned()
        .collect();
    let mut kept_edges: Vec<EdgeView> = edges
        .iter()
        .filter(|(s, t, _)| kept.contains(s) && kept.contains(t))
        .cloned()
        .collect();
    kept_edges.sort();
    (kept, kept_edges)
}

/// All-pairs undirected hop distances (Floyd–Warshall).
pub fn floyd(nodes: &[String], edges: &[EdgeView]) -> Vec<Vec<usize>> {
    let n = nodes.len();
    let inf = usize::MAX / 4;
    let pos = |l: &str| nodes.iter().position(|x| x == l).unwrap();
    let mut d = vec![vec![inf; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for (s, t, _) in edges {
        let (a, b) = (pos(s), pos(t));
        if a != b {
            d[a][b] = 1;
            d[b][a] = 1;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

/// Nodes within `depth` hops of any seed, with the edges among them.
pub fn brute_expand(
    nodes: &BTreeSet<String>,
    edges: &[EdgeView],
    seeds: &[String],
    depth: usize,
) -> (BTreeSet<String>, Vec<EdgeView>) {
    let list: Vec<String> = nodes.iter().cloned().collect();
    let d = floyd(&list, edges);
    let kept: BTreeSet<String> = list
        .iter()
        .enumerate()
        .filter(|(i, _)| {
            seeds
                .iter()
                .any(|s| d[list.iter().position(|x| x == s).unwrap()][*i] <= depth)
        })
        .map(|(_, l)| l.clone())
        .collect();
    let mut kept_edges: Vec<EdgeView> = edges
        .iter()
        .filter(|(s, t, _)| kept.contains(s) && kept.contains(t))
        .cloned()
        .collect();
    kept_edges.sort();
    (kept, kept_edges)
}

/// Average local clustering by enumerating every (v, u, w) triple.
pub fn brute_clustering(nodes: &BTreeSet<String>, edges: &[EdgeView]) -> f64 {
    let list: Vec<&String> = nodes.iter().collect();
    let n = list.len();
    if n == 0 {
        return 0.0;
    }
    let mut adj = vec![vec![false; n]; n];
    let pos = |l: &str| list.iter().position(|x| *x == l).unwrap();
    for (s, t, _) in edges {
        let (a, b) = (pos(s), pos(t));
        if a != b {
            adj[a][b] = true;
            adj[b][a] = true;
        }
    }
    let mut total = 0.0;
    for v in 0..n {
        let k = (0..n).filter(|&u| adj[v][u]).count();
        if k < 2 {
            continue;
        }
        let mut closed = 0;
        for u in 0..n {
            for w in u + 1..n {
                if adj[v][u] && adj[v][w] && adj[u][w] {
                    closed += 1;
                }
            }
        }
        total += closed as f64 / (k * (k - 1) / 2) as f64;
    }
    total / n as f64
}

/// Separation of two connected nodes at rest: repulsion outwards balances
/// the spring plus the centering pull on each node (sitting at ±s/2).
pub fn two_node_equilibrium(k: f64, rest: f64, stiffness: f64, centering: f64) -> f64 {
    let net = |s: f64| k / (s * s) - stiffness * (s - rest) - centering * s / 2.0;
    let (mut lo, mut hi) = (1.0, 10_000.0);
    assert!(net(lo) > 0.0 && net(hi) < 0.0);
    for _ in 0..200 {
        let mid = (lo + hi) / 2.0;
        if net(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) / 2.0
}
