//! Random instances and brute-force reference implementations shared by the integration tests.
//!
//! The oracles deliberately avoid the library's internals: paths come from breadth-first
//! extension of partial walks, connectivity from a plain graph search, and optima from full
//! enumeration of every routing.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;

use xsurv::optimizer::WeightModel;
use xsurv::{
    CrossLayerInstance, Link, LinkMapping, LogicalNetwork, NodeId, NodeMapping, PhysicalNetwork,
    PhysicalPath,
};

/// Size limits for [`random_instance`].
#[derive(Debug, Clone, Copy)]
pub struct Limits {
    pub max_physical_nodes: u32,
    pub max_physical_links: usize,
    pub max_logical_nodes: u32,
    pub max_logical_links: usize,
}

pub const SMALL: Limits = Limits {
    max_physical_nodes: 7,
    max_physical_links: 8,
    max_logical_nodes: 4,
    max_logical_links: 4,
};

pub const SCAN: Limits = Limits {
    max_physical_nodes: 8,
    max_physical_links: 12,
    max_logical_nodes: 5,
    max_logical_links: 6,
};

/// A connected random physical network with a connected logical overlay, failure
/// probabilities in `[0, 0.3]` (two decimals), and a random injective node map.
pub fn random_instance(seed: u64, lim: Limits) -> CrossLayerInstance {
    let mut rng = Pcg64::seed_from_u64(seed);
    let np = rng.gen_range(3..=lim.max_physical_nodes);
    let max_links = lim.max_physical_links.min((np * (np - 1) / 2) as usize);
    let target = rng.gen_range((np as usize - 1)..=max_links);
    let mut edges = BTreeSet::new();
    for v in 2..=np {
        edges.insert(Link::new(rng.gen_range(1..v), v));
    }
    while edges.len() < target {
        let a = rng.gen_range(1..=np);
        let b = rng.gen_range(1..=np);
        if a != b {
            edges.insert(Link::new(a, b));
        }
    }
    let physical = PhysicalNetwork::new(
        [],
        edges
            .iter()
            .map(|l| (l.a(), l.b(), f64::from(rng.gen_range(0..=30u32)) / 100.0)),
    )
    .unwrap();

    let nl = rng.gen_range(2..=lim.max_logical_nodes.min(np));
    let lmax = lim.max_logical_links.min((nl * (nl - 1) / 2) as usize);
    let ltarget = rng.gen_range((nl as usize - 1)..=lmax);
    let mut ledges = BTreeSet::new();
    for v in 2..=nl {
        ledges.insert((rng.gen_range(1..v), v));
    }
    while ledges.len() < ltarget {
        let a = rng.gen_range(1..=nl);
        let b = rng.gen_range(1..=nl);
        if a != b {
            ledges.insert((a.min(b), a.max(b)));
        }
    }
    let logical = LogicalNetwork::new([], ledges).unwrap();
    let mut hosts: Vec<NodeId> = (1..=np).collect();
    hosts.shuffle(&mut rng);
    let map = NodeMapping::new((1..=nl).zip(hosts)).unwrap();
    CrossLayerInstance::new(format!("rand{seed}"), physical, logical, map).unwrap()
}

/// A random total mapping drawn from the oracle's path lists.
pub fn random_mapping(inst: &CrossLayerInstance, seed: u64) -> LinkMapping {
    let mut rng = Pcg64::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let hops = inst.physical().nodes().len() - 1;
    let routes: Vec<(Link, PhysicalPath)> = inst
        .logical()
        .links()
        .iter()
        .map(|u| {
            let paths = oracle_paths(inst, *u, hops);
            (*u, paths.choose(&mut rng).unwrap().clone())
        })
        .collect();
    LinkMapping::new(inst, routes).unwrap()
}

/// Every simple path from `m(u.a)` to `m(u.b)` with at most `max_hops` links, sorted by length
/// then node sequence. Grows partial walks breadth first.
pub fn oracle_paths(inst: &CrossLayerInstance, u: Link, max_hops: usize) -> Vec<PhysicalPath> {
    let (s, t) = inst.endpoints(u);
    let links: BTreeSet<Link> = inst.physical().links().iter().copied().collect();
    let nodes: Vec<NodeId> = inst.physical().nodes().iter().copied().collect();
    let mut found = Vec::new();
    let mut queue = VecDeque::from([vec![s]]);
    while let Some(walk) = queue.pop_front() {
        let last = *walk.last().unwrap();
        if last == t {
            found.push(walk);
            continue;
        }
        if walk.len() > max_hops {
            continue;
        }
        for &n in &nodes {
            if !walk.contains(&n) && links.contains(&Link::new(last, n)) {
                let mut next = walk.clone();
                next.push(n);
                queue.push_back(next);
            }
        }
    }
    let mut paths: Vec<PhysicalPath> = found.into_iter().map(PhysicalPath::new).collect();
    paths.sort_by(|a, b| (a.hops(), a.nodes()).cmp(&(b.hops(), b.nodes())));
    paths
}

/// Whether `links` connect every node in `nodes` (graph search from the first node).
pub fn oracle_connected(nodes: &BTreeSet<NodeId>, links: &[Link]) -> bool {
    let Some(&start) = nodes.iter().next() else {
        return true;
    };
    let mut seen = BTreeSet::from([start]);
    let mut stack = vec![start];
    while let Some(n) = stack.pop() {
        for l in links {
            let other = if l.a() == n {
                l.b()
            } else if l.b() == n {
                l.a()
            } else {
                continue;
            };
            if seen.insert(other) {
                stack.push(other);
            }
        }
    }
    seen.len() == nodes.len()
}

/// Whether the logical network survives when exactly the physical links in `failed` are down.
pub fn oracle_survives(
    inst: &CrossLayerInstance,
    routes: &BTreeMap<Link, PhysicalPath>,
    failed: &BTreeSet<Link>,
) -> bool {
    let alive: Vec<Link> = routes
        .iter()
        .filter(|(_, p)| p.links().all(|e| !failed.contains(&e)))
        .map(|(u, _)| *u)
        .collect();
    oracle_connected(inst.logical().nodes(), &alive)
}

pub fn routes_of(m: &LinkMapping) -> BTreeMap<Link, PhysicalPath> {
    m.iter().map(|(u, p)| (u, p.clone())).collect()
}

pub fn oracle_critical(
    inst: &CrossLayerInstance,
    routes: &BTreeMap<Link, PhysicalPath>,
) -> BTreeSet<Link> {
    inst.physical()
        .links()
        .iter()
        .filter(|e| !oracle_survives(inst, routes, &BTreeSet::from([**e])))
        .copied()
        .collect()
}

pub fn cost_of(inst: &CrossLayerInstance, w: &WeightModel, links: &BTreeSet<Link>) -> f64 {
    links.iter().fold(0.0, |acc, l| {
        acc + w.cost(inst.physical().link_index(*l).unwrap())
    })
}

pub fn survival(inst: &CrossLayerInstance, links: &BTreeSet<Link>) -> f64 {
    links
        .iter()
        .map(|l| 1.0 - inst.physical().rho_of(*l).unwrap())
        .product()
}

/// Calls `visit` with every combination of one path per logical link.
fn for_each_routing(
    inst: &CrossLayerInstance,
    max_hops: usize,
    mut visit: impl FnMut(&BTreeMap<Link, PhysicalPath>),
) {
    let lists: Vec<(Link, Vec<PhysicalPath>)> = inst
        .logical()
        .links()
        .iter()
        .map(|u| (*u, oracle_paths(inst, *u, max_hops)))
        .collect();
    let mut idx = vec![0usize; lists.len()];
    loop {
        let routes: BTreeMap<Link, PhysicalPath> = lists
            .iter()
            .zip(&idx)
            .map(|((u, ps), &i)| (*u, ps[i].clone()))
            .collect();
        visit(&routes);
        let mut k = 0;
        loop {
            if k == idx.len() {
                return;
            }
            idx[k] += 1;
            if idx[k] < lists[k].1.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Number of full routings the exhaustive oracles would visit.
pub fn routing_count(inst: &CrossLayerInstance) -> u64 {
    let hops = inst.physical().nodes().len() - 1;
    inst.logical()
        .links()
        .iter()
        .map(|u| oracle_paths(inst, *u, hops).len() as u64)
        .product()
}

/// Minimal total cost of critical links over every routing with all simple paths.
pub fn exhaustive_base(inst: &CrossLayerInstance, w: &WeightModel) -> f64 {
    let mut best = f64::INFINITY;
    for_each_routing(inst, inst.physical().nodes().len() - 1, |routes| {
        best = best.min(cost_of(inst, w, &oracle_critical(inst, routes)));
    });
    best
}

/// Minimal support cost over every routed logical spanning tree.
pub fn exhaustive_maxtree(inst: &CrossLayerInstance, w: &WeightModel) -> f64 {
    let nodes = inst.logical().nodes();
    let links = inst.logical().links();
    let need = nodes.len() - 1;
    let mut best = f64::INFINITY;
    let hops = inst.physical().nodes().len() - 1;
    let paths: Vec<Vec<PhysicalPath>> =
        links.iter().map(|u| oracle_paths(inst, *u, hops)).collect();
    for mask in 0u32..(1 << links.len()) {
        if mask.count_ones() as usize != need {
            continue;
        }
        let chosen: Vec<usize> = (0..links.len()).filter(|i| mask >> i & 1 == 1).collect();
        let tree_links: Vec<Link> = chosen.iter().map(|&i| links[i]).collect();
        if !oracle_connected(nodes, &tree_links) {
            continue;
        }
        let mut idx = vec![0usize; chosen.len()];
        loop {
            let support: BTreeSet<Link> = chosen
                .iter()
                .zip(&idx)
                .flat_map(|(&u, &i)| paths[u][i].links().collect::<Vec<_>>())
                .collect();
            best = best.min(cost_of(inst, w, &support));
            let mut k = 0;
            loop {
                if k == idx.len() {
                    break;
                }
                idx[k] += 1;
                if idx[k] < paths[chosen[k]].len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == idx.len() {
                break;
            }
        }
    }
    best
}

/// Exact survival probability by recursive enumeration of link states.
pub fn oracle_reliability(inst: &CrossLayerInstance, m: &LinkMapping) -> f64 {
    let routes = routes_of(m);
    let links: Vec<(Link, f64)> = inst
        .physical()
        .links()
        .iter()
        .map(|l| (*l, inst.physical().rho_of(*l).unwrap()))
        .collect();
    fn rec(
        inst: &CrossLayerInstance,
        routes: &BTreeMap<Link, PhysicalPath>,
        links: &[(Link, f64)],
        k: usize,
        failed: &mut BTreeSet<Link>,
        p: f64,
    ) -> f64 {
        if p == 0.0 {
            return 0.0;
        }
        if k == links.len() {
            return if oracle_survives(inst, routes, failed) {
                p
            } else {
                0.0
            };
        }
        let (l, rho) = links[k];
        let up = rec(inst, routes, links, k + 1, failed, p * (1.0 - rho));
        failed.insert(l);
        let down = rec(inst, routes, links, k + 1, failed, p * rho);
        failed.remove(&l);
        up + down
    }
    rec(inst, &routes, &links, 0, &mut BTreeSet::new(), 1.0)
}
