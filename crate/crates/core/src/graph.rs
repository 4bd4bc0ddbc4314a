//! Directed acyclic graphs with bitmask parent sets, intervention surgery and
//! Markov equivalence keys.
//!
//! Node subsets are `u32` masks, so every graph has at most [`MAX_NODES`]
//! nodes. Equivalence is decided by skeleton plus v-structures; completed
//! PDAGs are never built.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type NodeId = usize;

/// Largest supported node count.
pub const MAX_NODES: usize = 25;

/// Default cap for exhaustive DAG enumeration.
pub const ENUMERATION_LIMIT: usize = 6;

/// A set of nodes stored as a bitmask; bit `i` is node `i`.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeSet(u32);

impl NodeSet {
    pub const EMPTY: NodeSet = NodeSet(0);

    pub const fn from_bits(bits: u32) -> Self {
        NodeSet(bits)
    }

    pub const fn bits(self) -> u32 {
        self.0
    }

    pub const fn singleton(node: NodeId) -> Self {
        NodeSet(1 << node)
    }

    /// All nodes `0..n`.
    pub const fn full(n: usize) -> Self {
        if n >= 32 {
            NodeSet(u32::MAX)
        } else {
            NodeSet((1u32 << n) - 1)
        }
    }

    pub const fn contains(self, node: NodeId) -> bool {
        node < 32 && self.0 & (1 << node) != 0
    }

    pub fn insert(&mut self, node: NodeId) {
        self.0 |= 1 << node;
    }

    pub fn remove(&mut self, node: NodeId) {
        self.0 &= !(1 << node);
    }

    pub const fn with(self, node: NodeId) -> Self {
        NodeSet(self.0 | (1 << node))
    }

    pub const fn without(self, node: NodeId) -> Self {
        NodeSet(self.0 & !(1 << node))
    }

    pub const fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub const fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub const fn union(self, other: NodeSet) -> Self {
        NodeSet(self.0 | other.0)
    }

    pub const fn intersection(self, other: NodeSet) -> Self {
        NodeSet(self.0 & other.0)
    }

    pub const fn difference(self, other: NodeSet) -> Self {
        NodeSet(self.0 & !other.0)
    }

    pub const fn is_subset(self, other: NodeSet) -> bool {
        self.0 & !other.0 == 0
    }

    /// Members in ascending order.
    pub fn iter(self) -> NodeSetIter {
        NodeSetIter(self.0)
    }
}

impl fmt::Debug for NodeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl FromIterator<NodeId> for NodeSet {
    fn from_iter<I: IntoIterator<Item = NodeId>>(iter: I) -> Self {
        iter.into_iter().fold(NodeSet::EMPTY, NodeSet::with)
    }
}

pub struct NodeSetIter(u32);

impl Iterator for NodeSetIter {
    type Item = NodeId;

    fn next(&mut self) -> Option<NodeId> {
        if self.0 == 0 {
            return None;
        }
        let i = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(i)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.0.count_ones() as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for NodeSetIter {}

/// Parents, children and descendants of one node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Relations {
    pub parents: NodeSet,
    pub children: NodeSet,
    pub descendants: NodeSet,
}

/// A directed acyclic graph, stored as one parent mask per node.
///
/// Ordering and hashing follow the parent-mask vector, so graphs can key
/// ordered and hashed maps alike.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Dag {
    parents: Vec<NodeSet>,
}

impl Dag {
    pub fn empty(num_nodes: usize) -> Self {
        Dag {
            parents: vec![NodeSet::EMPTY; num_nodes],
        }
    }

    pub fn from_edges(num_nodes: usize, edges: &[(NodeId, NodeId)]) -> Result<Self> {
        check_size(num_nodes)?;
        let mut parents = vec![NodeSet::EMPTY; num_nodes];
        for &(u, v) in edges {
            for node in [u, v] {
                if node >= num_nodes {
                    return Err(Error::NodeOutOfRange { node, num_nodes });
                }
            }
            if u == v {
                return Err(Error::SelfLoop(u));
            }
            if parents[v].contains(u) {
                return Err(Error::DuplicateEdge(u, v));
            }
            parents[v].insert(u);
        }
        Self::from_parent_sets(parents)
    }

    pub fn from_parent_sets(parents: Vec<NodeSet>) -> Result<Self> {
        let num_nodes = parents.len();
        check_size(num_nodes)?;
        let valid = NodeSet::full(num_nodes);
        for (v, pa) in parents.iter().enumerate() {
            if pa.contains(v) {
                return Err(Error::SelfLoop(v));
            }
            if let Some(node) = pa.difference(valid).iter().next() {
                return Err(Error::NodeOutOfRange { node, num_nodes });
            }
        }
        if !is_acyclic(&parents) {
            return Err(Error::Cycle);
        }
        Ok(Dag { parents })
    }

    /// Caller guarantees the masks are valid and acyclic.
    pub(crate) fn from_parent_sets_unchecked(parents: Vec<NodeSet>) -> Self {
        debug_assert!(is_acyclic(&parents));
        Dag { parents }
    }

    pub fn num_nodes(&self) -> usize {
        self.parents.len()
    }

    pub fn parents(&self, v: NodeId) -> NodeSet {
        self.parents[v]
    }

    pub fn parent_sets(&self) -> &[NodeSet] {
        &self.parents
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.parents[v].contains(u)
    }

    pub fn num_edges(&self) -> usize {
        self.parents.iter().map(|p| p.len()).sum()
    }

    /// Edges sorted by (source, target).
    pub fn edges(&self) -> Vec<(NodeId, NodeId)> {
        let mut edges: Vec<_> = self
            .parents
            .iter()
            .enumerate()
            .flat_map(|(v, pa)| pa.iter().map(move |u| (u, v)))
            .collect();
        edges.sort_unstable();
        edges
    }

    pub fn children(&self, e: NodeId) -> NodeSet {
        self.parents
            .iter()
            .enumerate()
            .filter(|(_, pa)| pa.contains(e))
            .map(|(v, _)| v)
            .collect()
    }

    /// Nodes reachable from `e` along directed edges, excluding `e`.
    pub fn descendants(&self, e: NodeId) -> NodeSet {
        let children = self.children_masks();
        let mut seen = NodeSet::EMPTY;
        let mut frontier = children[e];
        while !frontier.is_empty() {
            seen = seen.union(frontier);
            let mut next = NodeSet::EMPTY;
            for c in frontier.iter() {
                next = next.union(children[c]);
            }
            frontier = next.difference(seen);
        }
        seen
    }

    pub fn relations(&self, e: NodeId) -> Relations {
        Relations {
            parents: self.parents[e],
            children: self.children(e),
            descendants: self.descendants(e),
        }
    }

    pub(crate) fn children_masks(&self) -> Vec<NodeSet> {
        let mut children = vec![NodeSet::EMPTY; self.parents.len()];
        for (v, pa) in self.parents.iter().enumerate() {
            for u in pa.iter() {
                children[u].insert(v);
            }
        }
        children
    }

    /// The graph with every edge into `e` removed.
    pub fn surgery(&self, e: NodeId) -> Dag {
        let mut parents = self.parents.clone();
        parents[e] = NodeSet::EMPTY;
        Dag { parents }
    }

    /// Topological order, taking the smallest available index first.
    pub fn topological_order(&self) -> Vec<NodeId> {
        let n = self.parents.len();
        let mut placed = NodeSet::EMPTY;
        let mut order = Vec::with_capacity(n);
        while order.len() < n {
            let next = (0..n)
                .find(|&v| !placed.contains(v) && self.parents[v].is_subset(placed))
                .expect("acyclic graph always has a source");
            placed.insert(next);
            order.push(next);
        }
        order
    }

    pub fn mec_key(&self) -> MecKey {
        let mut skeleton = Vec::with_capacity(self.num_edges());
        for (v, pa) in self.parents.iter().enumerate() {
            for u in pa.iter() {
                skeleton.push((u.min(v), u.max(v)));
            }
        }
        skeleton.sort_unstable();

        let mut vstructures = Vec::new();
        for (y, pa) in self.parents.iter().enumerate() {
            for x in pa.iter() {
                for z in pa.iter().filter(|&z| z > x) {
                    if !self.parents[z].contains(x) && !self.parents[x].contains(z) {
                        vstructures.push((x, y, z));
                    }
                }
            }
        }
        vstructures.sort_unstable();
        MecKey {
            skeleton,
            vstructures,
        }
    }
}

impl fmt::Debug for Dag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dag({}; ", self.num_nodes())?;
        f.debug_list()
            .entries(self.edges().iter().map(|(u, v)| format!("{u}->{v}")))
            .finish()?;
        write!(f, ")")
    }
}

fn check_size(num_nodes: usize) -> Result<()> {
    if num_nodes > MAX_NODES {
        return Err(Error::Limit {
            what: "number of nodes",
            value: num_nodes,
            limit: MAX_NODES,
        });
    }
    Ok(())
}

/// Kahn's algorithm over parent masks.
pub fn is_acyclic(parents: &[NodeSet]) -> bool {
    let n = parents.len();
    let mut placed = NodeSet::EMPTY;
    let mut count = 0;
    loop {
        let ready: NodeSet = (0..n)
            .filter(|&v| !placed.contains(v) && parents[v].is_subset(placed))
            .collect();
        if ready.is_empty() {
            return count == n;
        }
        count += ready.len();
        placed = placed.union(ready);
    }
}

/// A directed graph that may contain cycles, e.g. a thresholded edge set.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct DirectedGraph {
    num_nodes: usize,
    edges: BTreeSet<(NodeId, NodeId)>,
}

impl DirectedGraph {
    pub fn new(num_nodes: usize, edges: impl IntoIterator<Item = (NodeId, NodeId)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            for node in [u, v] {
                if node >= num_nodes {
                    return Err(Error::NodeOutOfRange { node, num_nodes });
                }
            }
            if u == v {
                return Err(Error::SelfLoop(u));
            }
            set.insert((u, v));
        }
        Ok(DirectedGraph {
            num_nodes,
            edges: set,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn edges(&self) -> &BTreeSet<(NodeId, NodeId)> {
        &self.edges
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.edges.contains(&(u, v))
    }
}

impl From<&Dag> for DirectedGraph {
    fn from(dag: &Dag) -> Self {
        DirectedGraph {
            num_nodes: dag.num_nodes(),
            edges: dag.edges().into_iter().collect(),
        }
    }
}

/// Canonical Markov equivalence class identity: sorted skeleton pairs
/// `(min, max)` and sorted v-structures `(x, y, z)` with `x < z`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MecKey {
    pub skeleton: Vec<(NodeId, NodeId)>,
    pub vstructures: Vec<(NodeId, NodeId, NodeId)>,
}

impl MecKey {
    /// Fixed-width encoding: little-endian `u16` counts followed by one byte
    /// per node index.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out =
            Vec::with_capacity(4 + 2 * self.skeleton.len() + 3 * self.vstructures.len());
        out.extend_from_slice(&(self.skeleton.len() as u16).to_le_bytes());
        out.extend_from_slice(&(self.vstructures.len() as u16).to_le_bytes());
        for &(a, b) in &self.skeleton {
            out.extend_from_slice(&[a as u8, b as u8]);
        }
        for &(x, y, z) in &self.vstructures {
            out.extend_from_slice(&[x as u8, y as u8, z as u8]);
        }
        out
    }
}

/// JSON graph file: `{ "num_nodes": V, "edges": [[u, v], ...] }`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub num_nodes: usize,
    pub edges: Vec<[NodeId; 2]>,
}

impl From<&Dag> for GraphFile {
    fn from(dag: &Dag) -> Self {
        GraphFile {
            num_nodes: dag.num_nodes(),
            edges: dag.edges().into_iter().map(|(u, v)| [u, v]).collect(),
        }
    }
}

impl TryFrom<GraphFile> for Dag {
    type Error = Error;

    fn try_from(file: GraphFile) -> Result<Dag> {
        let edges: Vec<_> = file.edges.iter().map(|&[u, v]| (u, v)).collect();
        Dag::from_edges(file.num_nodes, &edges)
    }
}

impl Serialize for Dag {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        GraphFile::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Dag {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let file = GraphFile::deserialize(deserializer)?;
        Dag::try_from(file).map_err(serde::de::Error::custom)
    }
}

/// Calls `visit` on every labelled DAG over `num_nodes` nodes, in increasing
/// order of the edge bitvector (node `V-1`'s parent mask most significant).
pub fn for_each_dag(num_nodes: usize, limit: usize, mut visit: impl FnMut(&Dag)) -> Result<()> {
    if num_nodes > limit {
        return Err(Error::Limit {
            what: "DAG enumeration size",
            value: num_nodes,
            limit,
        });
    }
    if num_nodes == 0 {
        visit(&Dag::empty(0));
        return Ok(());
    }
    let mut dag = Dag::empty(num_nodes);
    assign(&mut dag, num_nodes - 1, &mut visit);
    Ok(())
}

fn assign(dag: &mut Dag, v: NodeId, visit: &mut impl FnMut(&Dag)) {
    let n = dag.num_nodes();
    // nodes v+1.. already carry their final parent masks
    let assigned = NodeSet::full(n).difference(NodeSet::full(v + 1)).with(v);
    let limit = 1u32 << n;
    let own = 1u32 << v;
    let mut bits = 0u32;
    while bits < limit {
        if bits & own == 0 {
            let mask = NodeSet::from_bits(bits);
            if !closes_cycle(dag, v, mask, assigned) {
                dag.parents[v] = mask;
                if v == 0 {
                    visit(dag);
                } else {
                    assign(dag, v - 1, visit);
                }
            }
        }
        bits += 1;
    }
    dag.parents[v] = NodeSet::EMPTY;
}

/// Whether giving `v` the parents `mask` closes a cycle among `assigned` nodes.
fn closes_cycle(dag: &Dag, v: NodeId, mask: NodeSet, assigned: NodeSet) -> bool {
    let targets = mask.intersection(assigned);
    if targets.is_empty() {
        return false;
    }
    let mut seen = NodeSet::singleton(v);
    let mut frontier = NodeSet::singleton(v);
    while !frontier.is_empty() {
        let mut next = NodeSet::EMPTY;
        for w in assigned.without(v).iter() {
            if !dag.parents[w].intersection(frontier).is_empty() {
                next.insert(w);
            }
        }
        next = next.difference(seen);
        if !next.intersection(targets).is_empty() {
            return true;
        }
        seen = seen.union(next);
        frontier = next;
    }
    false
}

/// Every labelled DAG over `num_nodes` nodes, capped at [`ENUMERATION_LIMIT`].
pub fn enumerate_dags(num_nodes: usize) -> Result<Vec<Dag>> {
    enumerate_dags_with_limit(num_nodes, ENUMERATION_LIMIT)
}

pub fn enumerate_dags_with_limit(num_nodes: usize, limit: usize) -> Result<Vec<Dag>> {
    let mut out = Vec::new();
    for_each_dag(num_nodes, limit, |g| out.push(g.clone()))?;
    Ok(out)
}
