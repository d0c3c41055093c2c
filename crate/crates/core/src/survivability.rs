//! Survivable probabilities of protecting spanning trees, tree sets and link mappings, and
//! extraction of base protecting spanning tree sets.
//!
//! A protecting spanning tree is a logical spanning tree together with the physical routes of
//! its branches; it survives exactly when none of the physical links in its support fails. A
//! set of trees fails only when a link shared by every tree fails. For a full mapping, the
//! critical links are those whose single failure disconnects the logical network, and the
//! survivable probability of the mapping is the probability that none of them fails.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use crate::instance_file::write_routes;
use crate::model::{
    surviving_logical_subgraph, CrossLayerInstance, Link, LinkMapping, ModelError, PhysicalPath,
};

/// Above this many factors products are accumulated in the log domain.
const DIRECT_PRODUCT_LIMIT: usize = 64;

/// `∏ (1 - ρ_e)` over the given physical links. Unknown links are ignored.
pub fn survival_probability<'a>(
    inst: &CrossLayerInstance,
    links: impl IntoIterator<Item = &'a Link>,
) -> f64 {
    let rhos: Vec<f64> = links
        .into_iter()
        .filter_map(|l| inst.physical().rho_of(*l))
        .collect();
    product_of_survivals(&rhos)
}

pub(crate) fn product_of_survivals(rhos: &[f64]) -> f64 {
    if rhos.len() > DIRECT_PRODUCT_LIMIT {
        rhos.iter().map(|r| (-r).ln_1p()).sum::<f64>().exp()
    } else {
        rhos.iter().map(|r| 1.0 - r).product()
    }
}

/// A routed logical spanning tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtectingTree {
    branches: BTreeMap<Link, PhysicalPath>,
}

impl ProtectingTree {
    /// Validates that `branches` form a spanning tree of the logical network and that every
    /// route is a simple physical path between the mapped endpoints.
    pub fn new(
        inst: &CrossLayerInstance,
        branches: impl IntoIterator<Item = (Link, PhysicalPath)>,
    ) -> Result<Self, ModelError> {
        let mut map = BTreeMap::new();
        for (u, path) in branches {
            let oriented = inst.orient_route(u, &path)?;
            if map.insert(u, oriented).is_some() {
                return Err(ModelError::InvalidTree(format!("branch {u} listed twice")));
            }
        }
        let logical = inst.logical();
        if map.len() + 1 != logical.nodes().len() {
            return Err(ModelError::InvalidTree(format!(
                "{} branches for {} logical nodes",
                map.len(),
                logical.nodes().len()
            )));
        }
        let in_tree: Vec<bool> = logical
            .links()
            .iter()
            .map(|u| map.contains_key(u))
            .collect();
        if !logical.is_connected_by(|i| in_tree[i]) {
            return Err(ModelError::InvalidTree(
                "branches do not span the logical network".into(),
            ));
        }
        Ok(Self { branches: map })
    }

    /// The tree formed by `branches` with routes taken from `mapping`.
    pub fn from_mapping(
        inst: &CrossLayerInstance,
        mapping: &LinkMapping,
        branches: impl IntoIterator<Item = Link>,
    ) -> Result<Self, ModelError> {
        let routed = branches
            .into_iter()
            .map(|u| {
                mapping
                    .route(u)
                    .cloned()
                    .map(|p| (u, p))
                    .ok_or(ModelError::MissingRoute(u))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(inst, routed)
    }

    pub fn branches(&self) -> impl Iterator<Item = (Link, &PhysicalPath)> + '_ {
        self.branches.iter().map(|(u, p)| (*u, p))
    }

    pub fn num_branches(&self) -> usize {
        self.branches.len()
    }
}

/// Physical links used by any branch route of the tree.
pub fn tree_links(tree: &ProtectingTree) -> BTreeSet<Link> {
    tree.branches.values().flat_map(|p| p.links()).collect()
}

/// Probability that every physical link in the tree's support survives. Links shared by
/// several branches count once.
pub fn tree_probability(inst: &CrossLayerInstance, tree: &ProtectingTree) -> f64 {
    survival_probability(inst, &tree_links(tree))
}

/// Non-empty collection of protecting trees over one instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeSet {
    trees: Vec<ProtectingTree>,
}

impl TreeSet {
    pub fn new(trees: Vec<ProtectingTree>) -> Result<Self, ModelError> {
        if trees.is_empty() {
            return Err(ModelError::InvalidTree(
                "a tree set needs at least one tree".into(),
            ));
        }
        Ok(Self { trees })
    }

    pub fn trees(&self) -> &[ProtectingTree] {
        &self.trees
    }
}

/// Physical links in the support of every tree of the set.
pub fn treeset_common_links(set: &TreeSet) -> BTreeSet<Link> {
    let mut iter = set.trees.iter();
    let mut common = tree_links(iter.next().expect("tree sets are non-empty"));
    for tree in iter {
        let links = tree_links(tree);
        common.retain(|l| links.contains(l));
    }
    common
}

/// Probability that no link shared by all trees fails.
pub fn treeset_probability(inst: &CrossLayerInstance, set: &TreeSet) -> f64 {
    survival_probability(inst, &treeset_common_links(set))
}

/// Physical links whose single failure disconnects the logical network under `mapping`.
///
/// # Panics
///
/// If `mapping` does not route every logical link.
pub fn critical_links(inst: &CrossLayerInstance, mapping: &LinkMapping) -> BTreeSet<Link> {
    assert_total(inst, mapping);
    inst.physical()
        .links()
        .iter()
        .filter(|e| !surviving_logical_subgraph(inst, mapping, &BTreeSet::from([**e])).1)
        .copied()
        .collect()
}

/// Survivable probability of a full mapping: the probability that no critical link fails.
pub fn mapping_probability(inst: &CrossLayerInstance, mapping: &LinkMapping) -> f64 {
    survival_probability(inst, &critical_links(inst, mapping))
}

fn assert_total(inst: &CrossLayerInstance, mapping: &LinkMapping) {
    if let Err(e) = mapping.check_total(inst) {
        panic!("mapping must be total: {e}");
    }
}

/// Witness trees for every protectable physical link of a mapping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaseTreeSet {
    pub trees: Vec<ProtectingTree>,
    /// Physical link to the index of a tree whose routes avoid it.
    pub protected_by: BTreeMap<Link, usize>,
    /// Critical links; no tree can avoid them.
    pub unprotected: BTreeSet<Link>,
}

impl BaseTreeSet {
    pub fn tree_set(&self) -> TreeSet {
        TreeSet {
            trees: self.trees.clone(),
        }
    }

    pub fn probability(&self, inst: &CrossLayerInstance) -> f64 {
        treeset_probability(inst, &self.tree_set())
    }

    /// Text block: the unprotected links, then one `[tree i]` section per tree listing the
    /// links it protects followed by its routes in `[routes]` syntax.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let fmt_links = |links: &mut dyn Iterator<Item = &Link>| {
            links.map(|l| l.to_string()).collect::<Vec<_>>().join(" ")
        };
        let _ = writeln!(
            out,
            "unprotected: {}",
            fmt_links(&mut self.unprotected.iter())
        );
        for (i, tree) in self.trees.iter().enumerate() {
            let protects: Vec<&Link> = self
                .protected_by
                .iter()
                .filter(|(_, t)| **t == i)
                .map(|(l, _)| l)
                .collect();
            let _ = writeln!(out, "[tree {i}]");
            let _ = writeln!(out, "protects: {}", fmt_links(&mut protects.into_iter()));
            let mapping = LinkMapping::from_oriented(tree.branches.clone());
            write_routes(&mut out, &mapping);
        }
        out
    }
}

/// Builds a base protecting spanning tree set for `mapping`.
///
/// For every physical link whose failure leaves the logical network connected, a breadth-first
/// spanning tree of the surviving logical links (rooted at the lowest logical node) protects it.
/// Identical trees are shared. When every physical link is critical, the spanning tree of the
/// intact logical network is returned as the single witness so the set is never empty.
///
/// # Panics
///
/// If `mapping` does not route every logical link.
pub fn extract_base_tree_set(inst: &CrossLayerInstance, mapping: &LinkMapping) -> BaseTreeSet {
    assert_total(inst, mapping);
    let logical = inst.logical();
    let supports = mapping.supports(inst);
    let mut trees: Vec<ProtectingTree> = Vec::new();
    let mut protected_by = BTreeMap::new();
    let mut unprotected = BTreeSet::new();

    let mut add_tree = |tree_idx: Vec<usize>| -> usize {
        let tree = ProtectingTree::from_mapping(
            inst,
            mapping,
            tree_idx.iter().map(|&i| logical.links()[i]),
        )
        .expect("breadth-first tree of a connected survivor is a spanning tree");
        match trees.iter().position(|t| *t == tree) {
            Some(i) => i,
            None => {
                trees.push(tree);
                trees.len() - 1
            }
        }
    };

    for (e_idx, e) in inst.physical().links().iter().enumerate() {
        let tree_idx = logical.bfs_tree(|u| !supports[u].contains(e_idx));
        if tree_idx.len() + 1 == logical.nodes().len() {
            let t = add_tree(tree_idx);
            protected_by.insert(*e, t);
        } else {
            unprotected.insert(*e);
        }
    }
    if protected_by.is_empty() {
        add_tree(logical.bfs_tree(|_| true));
    }
    BaseTreeSet {
        trees,
        protected_by,
        unprotected,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LogicalNetwork, NodeMapping, PhysicalNetwork};

    fn path(nodes: &[u32]) -> PhysicalPath {
        PhysicalPath::new(nodes.to_vec())
    }

    fn chain_instance() -> CrossLayerInstance {
        // One logical link over a 3-hop physical chain.
        let p = PhysicalNetwork::new([], [(1, 2, 0.1), (2, 3, 0.2), (3, 4, 0.3)]).unwrap();
        let l = LogicalNetwork::new([], [(1, 2)]).unwrap();
        let nm = NodeMapping::new([(1, 1), (2, 4)]).unwrap();
        CrossLayerInstance::new("chain", p, l, nm).unwrap()
    }

    #[test]
    fn bridge_mapping_makes_every_route_link_critical() {
        let inst = chain_instance();
        let m = LinkMapping::new(&inst, [(Link::new(1, 2), path(&[1, 2, 3, 4]))]).unwrap();
        let crit = critical_links(&inst, &m);
        assert_eq!(crit.len(), 3);
        let phi = mapping_probability(&inst, &m);
        assert!((phi - 0.9 * 0.8 * 0.7).abs() < 1e-12);
        let base = extract_base_tree_set(&inst, &m);
        assert_eq!(base.trees.len(), 1);
        assert_eq!(base.unprotected, crit);
        assert!((base.probability(&inst) - phi).abs() < 1e-12);
    }

    #[test]
    fn shared_branch_links_count_once() {
        // Star logical network whose two branches share physical link (1,2).
        let p = PhysicalNetwork::new([], [(1, 2, 0.5), (2, 3, 0.1), (2, 4, 0.1)]).unwrap();
        let l = LogicalNetwork::new([], [(1, 3), (1, 4)]).unwrap();
        let inst = CrossLayerInstance::new("star", p, l, NodeMapping::identity([1, 3, 4]).unwrap())
            .unwrap();
        let tree = ProtectingTree::new(
            &inst,
            [
                (Link::new(1, 3), path(&[1, 2, 3])),
                (Link::new(1, 4), path(&[1, 2, 4])),
            ],
        )
        .unwrap();
        assert_eq!(tree_links(&tree).len(), 3);
        assert!((tree_probability(&inst, &tree) - 0.5 * 0.9 * 0.9).abs() < 1e-12);
    }

    #[test]
    fn tree_validation() {
        let p = PhysicalNetwork::new([], [(1, 2, 0.1), (2, 3, 0.1), (1, 3, 0.1)]).unwrap();
        let l = LogicalNetwork::new([], [(1, 2), (2, 3), (1, 3)]).unwrap();
        let inst =
            CrossLayerInstance::new("tri", p, l, NodeMapping::identity(1..=3).unwrap()).unwrap();
        let too_few = ProtectingTree::new(&inst, [(Link::new(1, 2), path(&[1, 2]))]);
        assert!(matches!(too_few, Err(ModelError::InvalidTree(_))));
        let ok = ProtectingTree::new(
            &inst,
            [
                (Link::new(1, 2), path(&[1, 2])),
                (Link::new(2, 3), path(&[3, 2])),
            ],
        )
        .unwrap();
        assert_eq!(ok.num_branches(), 2);
        assert!(TreeSet::new(vec![]).is_err());
    }

    #[test]
    fn disjoint_supports_have_no_common_links() {
        let p = PhysicalNetwork::new([], [(1, 2, 0.3), (1, 3, 0.3), (3, 2, 0.3)]).unwrap();
        let l = LogicalNetwork::new([], [(1, 2)]).unwrap();
        let inst =
            CrossLayerInstance::new("tri", p, l, NodeMapping::identity([1, 2]).unwrap()).unwrap();
        let a = ProtectingTree::new(&inst, [(Link::new(1, 2), path(&[1, 2]))]).unwrap();
        let b = ProtectingTree::new(&inst, [(Link::new(1, 2), path(&[1, 3, 2]))]).unwrap();
        let set = TreeSet::new(vec![a, b]).unwrap();
        assert!(treeset_common_links(&set).is_empty());
        assert_eq!(treeset_probability(&inst, &set), 1.0);
    }

    #[test]
    fn zero_risk_trees_survive_surely() {
        let inst = chain_instance().with_uniform_failure(0.0).unwrap();
        let tree = ProtectingTree::new(&inst, [(Link::new(1, 2), path(&[1, 2, 3, 4]))]).unwrap();
        assert_eq!(tree_probability(&inst, &tree), 1.0);
    }

    #[test]
    fn log_domain_product_matches_direct_product() {
        let rhos: Vec<f64> = (0..100).map(|i| (i % 7) as f64 * 0.01).collect();
        let direct: f64 = rhos.iter().map(|r| 1.0 - r).product();
        assert!((product_of_survivals(&rhos) - direct).abs() < 1e-12);
    }
}
