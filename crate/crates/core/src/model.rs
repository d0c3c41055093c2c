//! Cross-layer instance data model.
//!
//! A [`CrossLayerInstance`] couples a [`PhysicalNetwork`] (links carry independent failure
//! probabilities) with a [`LogicalNetwork`] through an injective [`NodeMapping`]. A
//! [`LinkMapping`] then routes every logical link over a simple physical path. All links are
//! undirected and stored with their endpoints in ascending order.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use fixedbitset::FixedBitSet;
use thiserror::Error;

/// Opaque positive node identifier.
pub type NodeId = u32;

/// Undirected link, endpoints stored in ascending order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Link {
    a: NodeId,
    b: NodeId,
}

impl Link {
    /// Builds the canonical form of the link between `x` and `y`.
    pub fn new(x: NodeId, y: NodeId) -> Self {
        if x <= y {
            Self { a: x, b: y }
        } else {
            Self { a: y, b: x }
        }
    }

    /// Smaller endpoint.
    pub fn a(&self) -> NodeId {
        self.a
    }

    /// Larger endpoint.
    pub fn b(&self) -> NodeId {
        self.b
    }

    pub fn endpoints(&self) -> (NodeId, NodeId) {
        (self.a, self.b)
    }

    pub fn is_self_loop(&self) -> bool {
        self.a == self.b
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.a, self.b)
    }
}

impl From<(NodeId, NodeId)> for Link {
    fn from((x, y): (NodeId, NodeId)) -> Self {
        Link::new(x, y)
    }
}

/// A physical path given as its node sequence.
///
/// Paths order by hop count first and then lexicographically by node sequence, which is the
/// deterministic candidate ordering used throughout the crate.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PhysicalPath(Vec<NodeId>);

impl PhysicalPath {
    pub fn new(nodes: Vec<NodeId>) -> Self {
        Self(nodes)
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.0
    }

    /// Number of physical links on the path.
    pub fn hops(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn source(&self) -> Option<NodeId> {
        self.0.first().copied()
    }

    pub fn target(&self) -> Option<NodeId> {
        self.0.last().copied()
    }

    /// Links traversed by the path, in path order.
    pub fn links(&self) -> impl Iterator<Item = Link> + '_ {
        self.0.windows(2).map(|w| Link::new(w[0], w[1]))
    }

    pub fn reversed(&self) -> Self {
        Self(self.0.iter().rev().copied().collect())
    }
}

impl Ord for PhysicalPath {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0
            .len()
            .cmp(&other.0.len())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for PhysicalPath {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for PhysicalPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|n| n.to_string()).collect();
        write!(f, "{}", parts.join("-"))
    }
}

/// Errors raised while building or validating instances, mappings and trees.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("line {line}: {source}")]
    AtLine {
        line: usize,
        #[source]
        source: Box<ModelError>,
    },
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("node identifiers must be positive integers, got {0}")]
    InvalidNodeId(String),
    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),
    #[error("duplicate link {0}")]
    DuplicateLink(Link),
    #[error("failure probability {value} of link {link} is outside [0, 1)")]
    InvalidProbability { link: Link, value: f64 },
    #[error("expected {expected} failure probabilities, got {got}")]
    ProbabilityCount { expected: usize, got: usize },
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("unknown logical link {0}")]
    UnknownLogicalLink(Link),
    #[error(
        "node map is not injective: logical nodes {first} and {second} both map to {physical}"
    )]
    NonInjective {
        physical: NodeId,
        first: NodeId,
        second: NodeId,
    },
    #[error("logical node {0} is mapped twice")]
    DuplicateMapping(NodeId),
    #[error("logical node {0} has no physical node assigned")]
    UnmappedNode(NodeId),
    #[error("logical network has no links")]
    EmptyLogical,
    #[error("logical network is not connected")]
    Disconnected,
    #[error("route for logical link {link} is invalid: {reason}")]
    InvalidRoute { link: Link, reason: String },
    #[error("logical link {0} is routed twice")]
    DuplicateRoute(Link),
    #[error("logical link {0} has no route")]
    MissingRoute(Link),
    #[error("invalid protecting tree: {0}")]
    InvalidTree(String),
    #[error("no physical path exists for logical link {0}")]
    NoPath(Link),
    #[error("invalid path policy: {0}")]
    InvalidPolicy(String),
}

impl ModelError {
    pub(crate) fn at_line(self, line: usize) -> Self {
        match self {
            e @ ModelError::AtLine { .. } => e,
            e => ModelError::AtLine {
                line,
                source: Box::new(e),
            },
        }
    }

    /// The error with any line annotation stripped.
    pub fn root(&self) -> &ModelError {
        match self {
            ModelError::AtLine { source, .. } => source.root(),
            e => e,
        }
    }

    /// Line number of the offending input line, when known.
    pub fn line(&self) -> Option<usize> {
        match self {
            ModelError::AtLine { line, .. } => Some(*line),
            _ => None,
        }
    }
}

fn check_node_id(id: NodeId) -> Result<(), ModelError> {
    if id == 0 {
        Err(ModelError::InvalidNodeId(id.to_string()))
    } else {
        Ok(())
    }
}

pub(crate) fn check_probability(link: Link, value: f64) -> Result<(), ModelError> {
    if value.is_finite() && (0.0..1.0).contains(&value) {
        Ok(())
    } else {
        Err(ModelError::InvalidProbability { link, value })
    }
}

/// Physical substrate: nodes, undirected links and per-link failure probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalNetwork {
    nodes: BTreeSet<NodeId>,
    links: Vec<Link>,
    rho: Vec<f64>,
    index: HashMap<Link, usize>,
    adjacency: BTreeMap<NodeId, Vec<NodeId>>,
}

impl PhysicalNetwork {
    /// Builds the network. Link endpoints are added to the node set implicitly; `nodes` only
    /// needs to list isolated nodes.
    pub fn new(
        nodes: impl IntoIterator<Item = NodeId>,
        links: impl IntoIterator<Item = (NodeId, NodeId, f64)>,
    ) -> Result<Self, ModelError> {
        let mut node_set = BTreeSet::new();
        for n in nodes {
            check_node_id(n)?;
            node_set.insert(n);
        }
        let mut entries: Vec<(Link, f64)> = Vec::new();
        let mut seen = BTreeSet::new();
        for (x, y, rho) in links {
            check_node_id(x)?;
            check_node_id(y)?;
            let link = Link::new(x, y);
            if link.is_self_loop() {
                return Err(ModelError::SelfLoop(x));
            }
            if !seen.insert(link) {
                return Err(ModelError::DuplicateLink(link));
            }
            check_probability(link, rho)?;
            node_set.insert(x);
            node_set.insert(y);
            entries.push((link, rho));
        }
        entries.sort_by_key(|e| e.0);
        let links: Vec<Link> = entries.iter().map(|e| e.0).collect();
        let rho: Vec<f64> = entries.iter().map(|e| e.1).collect();
        let index = links.iter().enumerate().map(|(i, l)| (*l, i)).collect();
        let mut adjacency: BTreeMap<NodeId, Vec<NodeId>> =
            node_set.iter().map(|n| (*n, Vec::new())).collect();
        for l in &links {
            adjacency.get_mut(&l.a).unwrap().push(l.b);
            adjacency.get_mut(&l.b).unwrap().push(l.a);
        }
        for adj in adjacency.values_mut() {
            adj.sort_unstable();
        }
        Ok(Self {
            nodes: node_set,
            links,
            rho,
            index,
            adjacency,
        })
    }

    pub fn nodes(&self) -> &BTreeSet<NodeId> {
        &self.nodes
    }

    /// Links in canonical (sorted) order; positions are the link indices used everywhere else.
    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn num_links(&self) -> usize {
        self.links.len()
    }

    /// Failure probabilities aligned with [`links`](Self::links).
    pub fn failure_probs(&self) -> &[f64] {
        &self.rho
    }

    pub fn rho(&self, index: usize) -> f64 {
        self.rho[index]
    }

    pub fn rho_of(&self, link: Link) -> Option<f64> {
        self.index.get(&link).map(|&i| self.rho[i])
    }

    pub fn link_index(&self, link: Link) -> Option<usize> {
        self.index.get(&link).copied()
    }

    pub fn contains_node(&self, node: NodeId) -> bool {
        self.nodes.contains(&node)
    }

    /// Neighbors of `node` in ascending order.
    pub fn neighbors(&self, node: NodeId) -> &[NodeId] {
        self.adjacency.get(&node).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Same topology with a new probability vector (aligned with [`links`](Self::links)).
    pub fn with_failure_probs(&self, rho: Vec<f64>) -> Result<Self, ModelError> {
        if rho.len() != self.links.len() {
            return Err(ModelError::ProbabilityCount {
                expected: self.links.len(),
                got: rho.len(),
            });
        }
        for (l, r) in self.links.iter().zip(&rho) {
            check_probability(*l, *r)?;
        }
        Ok(Self {
            rho,
            ..self.clone()
        })
    }

    /// Checks that `path` is a simple path over existing links.
    pub fn check_path(&self, path: &PhysicalPath) -> Result<(), String> {
        if path.nodes().len() < 2 {
            return Err("a route needs at least two nodes".into());
        }
        let mut seen = BTreeSet::new();
        for n in path.nodes() {
            if !self.nodes.contains(n) {
                return Err(format!("node {n} is not a physical node"));
            }
            if !seen.insert(*n) {
                return Err(format!("node {n} is visited twice"));
            }
        }
        for l in path.links() {
            if !self.index.contains_key(&l) {
                return Err(format!("{l} is not a physical link"));
            }
        }
        Ok(())
    }

    /// Bitset over link indices of the links traversed by `path`. The path must be valid.
    pub(crate) fn link_bits(&self, path: &PhysicalPath) -> FixedBitSet {
        let mut bits = FixedBitSet::with_capacity(self.links.len());
        for l in path.links() {
            bits.insert(self.index[&l]);
        }
        bits
    }
}

/// Logical (overlay) network. Always connected with at least one link.
#[derive(Debug, Clone, PartialEq)]
pub struct LogicalNetwork {
    nodes: BTreeSet<NodeId>,
    links: Vec<Link>,
    index: HashMap<Link, usize>,
    adjacency: BTreeMap<NodeId, Vec<(NodeId, usize)>>,
}

impl LogicalNetwork {
    pub fn new(
        nodes: impl IntoIterator<Item = NodeId>,
        links: impl IntoIterator<Item = (NodeId, NodeId)>,
    ) -> Result<Self, ModelError> {
        let mut node_set = BTreeSet::new();
        for n in nodes {
            check_node_id(n)?;
            node_set.insert(n);
        }
        let mut set = BTreeSet::new();
        for (x, y) in links {
            check_node_id(x)?;
            check_node_id(y)?;
            let link = Link::new(x, y);
            if link.is_self_loop() {
                return Err(ModelError::SelfLoop(x));
            }
            if !set.insert(link) {
                return Err(ModelError::DuplicateLink(link));
            }
            node_set.insert(x);
            node_set.insert(y);
        }
        if set.is_empty() {
            return Err(ModelError::EmptyLogical);
        }
        let links: Vec<Link> = set.into_iter().collect();
        let index = links.iter().enumerate().map(|(i, l)| (*l, i)).collect();
        let mut adjacency: BTreeMap<NodeId, Vec<(NodeId, usize)>> =
            node_set.iter().map(|n| (*n, Vec::new())).collect();
        for (i, l) in links.iter().enumerate() {
            adjacency.get_mut(&l.a).unwrap().push((l.b, i));
            adjacency.get_mut(&l.b).unwrap().push((l.a, i));
        }
        for adj in adjacency.values_mut() {
            adj.sort_unstable();
        }
        let net = Self {
            nodes: node_set,
            links,
            index,
            adjacency,
        };
        if !net.is_connected_by(|_| true) {
            return Err(ModelError::Disconnected);
        }
        Ok(net)
    }

    pub fn nodes(&self) -> &BTreeSet<NodeId> {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn num_links(&self) -> usize {
        self.links.len()
    }

    pub fn link_index(&self, link: Link) -> Option<usize> {
        self.index.get(&link).copied()
    }

    /// Lowest-numbered logical node; the root for tree traversals and flow encodings.
    pub fn root(&self) -> NodeId {
        *self
            .nodes
            .iter()
            .next()
            .expect("logical network is non-empty")
    }

    /// Whether all logical nodes are connected using only the links accepted by `alive`
    /// (called with logical link indices).
    pub fn is_connected_by(&self, alive: impl Fn(usize) -> bool) -> bool {
        self.bfs_tree(alive).len() + 1 == self.nodes.len()
    }

    /// Breadth-first spanning tree from [`root`](Self::root) over the links accepted by
    /// `alive`, visiting neighbors in ascending order. Returns the tree's link indices in
    /// discovery order; the result spans all nodes iff it has `|V_L| - 1` entries.
    pub fn bfs_tree(&self, alive: impl Fn(usize) -> bool) -> Vec<usize> {
        let root = self.root();
        let mut visited = BTreeSet::from([root]);
        let mut queue = VecDeque::from([root]);
        let mut tree = Vec::with_capacity(self.nodes.len().saturating_sub(1));
        while let Some(n) = queue.pop_front() {
            for &(next, idx) in &self.adjacency[&n] {
                if alive(idx) && visited.insert(next) {
                    tree.push(idx);
                    queue.push_back(next);
                }
            }
        }
        tree
    }

    /// Logical links whose removal disconnects the network.
    pub fn bridges(&self) -> Vec<usize> {
        (0..self.links.len())
            .filter(|&i| !self.is_connected_by(|j| j != i))
            .collect()
    }
}

/// Injective assignment of logical nodes to physical nodes.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NodeMapping {
    assign: BTreeMap<NodeId, NodeId>,
}

impl NodeMapping {
    pub fn new(pairs: impl IntoIterator<Item = (NodeId, NodeId)>) -> Result<Self, ModelError> {
        let mut assign = BTreeMap::new();
        let mut image: BTreeMap<NodeId, NodeId> = BTreeMap::new();
        for (logical, physical) in pairs {
            check_node_id(logical)?;
            check_node_id(physical)?;
            if assign.insert(logical, physical).is_some() {
                return Err(ModelError::DuplicateMapping(logical));
            }
            if let Some(first) = image.insert(physical, logical) {
                return Err(ModelError::NonInjective {
                    physical,
                    first,
                    second: logical,
                });
            }
        }
        Ok(Self { assign })
    }

    /// Identity mapping over `nodes`.
    pub fn identity(nodes: impl IntoIterator<Item = NodeId>) -> Result<Self, ModelError> {
        Self::new(nodes.into_iter().map(|n| (n, n)))
    }

    pub fn get(&self, logical: NodeId) -> Option<NodeId> {
        self.assign.get(&logical).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.assign.iter().map(|(l, p)| (*l, *p))
    }
}

/// Physical network, logical network and node mapping.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossLayerInstance {
    pub name: String,
    physical: PhysicalNetwork,
    logical: LogicalNetwork,
    node_map: NodeMapping,
}

impl CrossLayerInstance {
    pub fn new(
        name: impl Into<String>,
        physical: PhysicalNetwork,
        logical: LogicalNetwork,
        node_map: NodeMapping,
    ) -> Result<Self, ModelError> {
        for (l, p) in node_map.iter() {
            if !logical.nodes().contains(&l) {
                return Err(ModelError::UnknownNode(l));
            }
            if !physical.contains_node(p) {
                return Err(ModelError::UnknownNode(p));
            }
        }
        if let Some(n) = logical.nodes().iter().find(|n| node_map.get(**n).is_none()) {
            return Err(ModelError::UnmappedNode(*n));
        }
        Ok(Self {
            name: name.into(),
            physical,
            logical,
            node_map,
        })
    }

    pub fn physical(&self) -> &PhysicalNetwork {
        &self.physical
    }

    pub fn logical(&self) -> &LogicalNetwork {
        &self.logical
    }

    pub fn node_map(&self) -> &NodeMapping {
        &self.node_map
    }

    /// Physical endpoints of logical link `u`, as `(m(u.a), m(u.b))`.
    pub fn endpoints(&self, u: Link) -> (NodeId, NodeId) {
        (
            self.node_map.get(u.a).expect("node map is total"),
            self.node_map.get(u.b).expect("node map is total"),
        )
    }

    /// Same instance with per-link failure probabilities replaced.
    pub fn with_failure_probs(&self, rho: Vec<f64>) -> Result<Self, ModelError> {
        Ok(Self {
            physical: self.physical.with_failure_probs(rho)?,
            ..self.clone()
        })
    }

    /// Same instance with every physical link failing with probability `rho`.
    pub fn with_uniform_failure(&self, rho: f64) -> Result<Self, ModelError> {
        self.with_failure_probs(vec![rho; self.physical.num_links()])
    }

    /// Validates `path` as a route for logical link `u` and returns it oriented from
    /// `m(u.a)` to `m(u.b)`. Either orientation is accepted.
    pub fn orient_route(&self, u: Link, path: &PhysicalPath) -> Result<PhysicalPath, ModelError> {
        let invalid = |reason: String| ModelError::InvalidRoute { link: u, reason };
        if self.logical.link_index(u).is_none() {
            return Err(ModelError::UnknownLogicalLink(u));
        }
        self.physical.check_path(path).map_err(invalid)?;
        let (ms, mt) = self.endpoints(u);
        match (path.source(), path.target()) {
            (Some(s), Some(t)) if s == ms && t == mt => Ok(path.clone()),
            (Some(s), Some(t)) if s == mt && t == ms => Ok(path.reversed()),
            _ => Err(invalid(format!(
                "endpoints must be the mapped nodes {ms} and {mt}"
            ))),
        }
    }
}

/// One physical route per logical link.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LinkMapping {
    routes: BTreeMap<Link, PhysicalPath>,
}

impl LinkMapping {
    /// Validates every route against `inst`. Partial mappings are accepted here; use
    /// [`check_total`](Self::check_total) before evaluating.
    pub fn new(
        inst: &CrossLayerInstance,
        routes: impl IntoIterator<Item = (Link, PhysicalPath)>,
    ) -> Result<Self, ModelError> {
        let mut map = BTreeMap::new();
        for (u, path) in routes {
            let oriented = inst.orient_route(u, &path)?;
            if map.insert(u, oriented).is_some() {
                return Err(ModelError::DuplicateRoute(u));
            }
        }
        Ok(Self { routes: map })
    }

    /// Builds a mapping from routes already validated and oriented.
    pub(crate) fn from_oriented(routes: BTreeMap<Link, PhysicalPath>) -> Self {
        Self { routes }
    }

    pub fn check_total(&self, inst: &CrossLayerInstance) -> Result<(), ModelError> {
        match inst
            .logical()
            .links()
            .iter()
            .find(|u| !self.routes.contains_key(u))
        {
            Some(u) => Err(ModelError::MissingRoute(*u)),
            None => Ok(()),
        }
    }

    pub fn route(&self, u: Link) -> Option<&PhysicalPath> {
        self.routes.get(&u)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Link, &PhysicalPath)> + '_ {
        self.routes.iter().map(|(u, p)| (*u, p))
    }

    pub fn len(&self) -> usize {
        self.routes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.routes.is_empty()
    }

    /// Per logical link (by logical index), the set of physical link indices its route uses.
    /// Panics if the mapping is not total.
    pub(crate) fn supports(&self, inst: &CrossLayerInstance) -> Vec<FixedBitSet> {
        inst.logical()
            .links()
            .iter()
            .map(|u| inst.physical().link_bits(&self.routes[u]))
            .collect()
    }
}

/// Logical links that survive the failure of `failed`, and whether they still connect every
/// logical node. A logical link dies when its route crosses any failed physical link.
pub fn surviving_logical_subgraph(
    inst: &CrossLayerInstance,
    mapping: &LinkMapping,
    failed: &BTreeSet<Link>,
) -> (BTreeSet<Link>, bool) {
    let logical = inst.logical();
    let alive: Vec<bool> = logical
        .links()
        .iter()
        .map(|u| {
            mapping
                .route(*u)
                .map(|p| p.links().all(|e| !failed.contains(&e)))
                .unwrap_or(false)
        })
        .collect();
    let connected = logical.is_connected_by(|i| alive[i]);
    let survivors = logical
        .links()
        .iter()
        .zip(&alive)
        .filter(|(_, a)| **a)
        .map(|(u, _)| *u)
        .collect();
    (survivors, connected)
}
