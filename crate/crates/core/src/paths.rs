//! Candidate physical routes for logical links.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;

use crate::model::{CrossLayerInstance, Link, ModelError, NodeId, PhysicalNetwork, PhysicalPath};

/// How candidate routes are generated for a logical link.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathPolicy {
    /// Every simple path with at most `max_hops` links.
    AllPaths { max_hops: usize },
    /// The `k` first simple paths in (hop count, node sequence) order.
    KShortest { k: usize },
}

impl PathPolicy {
    /// All simple paths when the substrate has at most 25 links, otherwise 16 shortest.
    pub fn default_for(inst: &CrossLayerInstance) -> Self {
        let p = inst.physical();
        if p.num_links() <= 25 {
            PathPolicy::AllPaths {
                max_hops: p.nodes().len().saturating_sub(1),
            }
        } else {
            PathPolicy::KShortest { k: 16 }
        }
    }
}

impl fmt::Display for PathPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathPolicy::AllPaths { max_hops } => write!(f, "all(H={max_hops})"),
            PathPolicy::KShortest { k } => write!(f, "ksp(k={k})"),
        }
    }
}

/// Candidate routes of one logical link, oriented from `m(u.a)` to `m(u.b)` and sorted by hop
/// count then node sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathSet {
    pub link: Link,
    pub policy: PathPolicy,
    pub paths: Vec<PhysicalPath>,
}

/// Enumerates candidate routes for logical link `u`.
pub fn enumerate_paths(
    inst: &CrossLayerInstance,
    u: Link,
    policy: PathPolicy,
) -> Result<PathSet, ModelError> {
    if inst.logical().link_index(u).is_none() {
        return Err(ModelError::UnknownLogicalLink(u));
    }
    let (src, dst) = inst.endpoints(u);
    let paths = match policy {
        PathPolicy::AllPaths { max_hops } => all_simple_paths(inst.physical(), src, dst, max_hops),
        PathPolicy::KShortest { k } => {
            if k == 0 {
                return Err(ModelError::InvalidPolicy("k must be at least 1".into()));
            }
            k_shortest_paths(inst.physical(), src, dst, k)
        }
    };
    if paths.is_empty() {
        return Err(ModelError::NoPath(u));
    }
    Ok(PathSet {
        link: u,
        policy,
        paths,
    })
}

/// Candidate sets for every logical link, in logical link order.
pub fn enumerate_all(
    inst: &CrossLayerInstance,
    policy: PathPolicy,
) -> Result<Vec<PathSet>, ModelError> {
    inst.logical()
        .links()
        .iter()
        .map(|u| enumerate_paths(inst, *u, policy))
        .collect()
}

fn all_simple_paths(
    net: &PhysicalNetwork,
    src: NodeId,
    dst: NodeId,
    max_hops: usize,
) -> Vec<PhysicalPath> {
    fn dfs(
        net: &PhysicalNetwork,
        dst: NodeId,
        max_hops: usize,
        stack: &mut Vec<NodeId>,
        on_path: &mut HashSet<NodeId>,
        out: &mut Vec<PhysicalPath>,
    ) {
        let cur = *stack.last().unwrap();
        if cur == dst {
            out.push(PhysicalPath::new(stack.clone()));
            return;
        }
        if stack.len() > max_hops {
            return;
        }
        for &next in net.neighbors(cur) {
            if on_path.insert(next) {
                stack.push(next);
                dfs(net, dst, max_hops, stack, on_path, out);
                stack.pop();
                on_path.remove(&next);
            }
        }
    }

    let mut out = Vec::new();
    if src == dst || !net.contains_node(src) || !net.contains_node(dst) {
        return out;
    }
    let mut stack = vec![src];
    let mut on_path = HashSet::from([src]);
    dfs(net, dst, max_hops, &mut stack, &mut on_path, &mut out);
    out.sort();
    out
}

/// Lexicographically smallest among the shortest `src`-`dst` paths avoiding `blocked_nodes`
/// and `blocked_links`.
fn smallest_shortest_path(
    net: &PhysicalNetwork,
    src: NodeId,
    dst: NodeId,
    blocked_nodes: &HashSet<NodeId>,
    blocked_links: &HashSet<Link>,
) -> Option<Vec<NodeId>> {
    if blocked_nodes.contains(&src) || blocked_nodes.contains(&dst) {
        return None;
    }
    let usable = |a: NodeId, b: NodeId| {
        !blocked_nodes.contains(&b) && !blocked_links.contains(&Link::new(a, b))
    };
    // Distances to dst, then a greedy walk from src taking the smallest node that gets closer.
    let mut dist: HashMap<NodeId, usize> = HashMap::from([(dst, 0)]);
    let mut queue = VecDeque::from([dst]);
    while let Some(n) = queue.pop_front() {
        if n == src {
            break;
        }
        let d = dist[&n];
        for &next in net.neighbors(n) {
            if usable(n, next) && !dist.contains_key(&next) {
                dist.insert(next, d + 1);
                queue.push_back(next);
            }
        }
    }
    let mut remaining = *dist.get(&src)?;
    let mut path = vec![src];
    let mut cur = src;
    while cur != dst {
        let next = net
            .neighbors(cur)
            .iter()
            .copied()
            .find(|&n| usable(cur, n) && dist.get(&n) == Some(&(remaining - 1)))?;
        path.push(next);
        cur = next;
        remaining -= 1;
    }
    Some(path)
}

/// Yen's algorithm under the (hop count, node sequence) total order.
fn k_shortest_paths(
    net: &PhysicalNetwork,
    src: NodeId,
    dst: NodeId,
    k: usize,
) -> Vec<PhysicalPath> {
    let none_nodes = HashSet::new();
    let none_links = HashSet::new();
    let Some(first) = smallest_shortest_path(net, src, dst, &none_nodes, &none_links) else {
        return Vec::new();
    };
    let mut accepted: Vec<Vec<NodeId>> = vec![first];
    let mut candidates: BTreeSet<PhysicalPath> = BTreeSet::new();
    while accepted.len() < k {
        let prev = accepted.last().unwrap().clone();
        for i in 0..prev.len() - 1 {
            let spur = prev[i];
            let root = &prev[..=i];
            let blocked_links: HashSet<Link> = accepted
                .iter()
                .filter(|p| p.len() > i + 1 && &p[..=i] == root)
                .map(|p| Link::new(p[i], p[i + 1]))
                .collect();
            let blocked_nodes: HashSet<NodeId> = root[..i].iter().copied().collect();
            if let Some(tail) =
                smallest_shortest_path(net, spur, dst, &blocked_nodes, &blocked_links)
            {
                let mut full = root[..i].to_vec();
                full.extend(tail);
                if !accepted.contains(&full) {
                    candidates.insert(PhysicalPath::new(full));
                }
            }
        }
        match candidates.pop_first() {
            Some(best) => accepted.push(best.nodes().to_vec()),
            None => break,
        }
    }
    accepted.into_iter().map(PhysicalPath::new).collect()
}
