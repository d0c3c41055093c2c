//! Failure simulation: single-failure scans, exact reliability by enumerating every failure
//! pattern, and Monte Carlo estimates.
//!
//! Everything here evaluates logical connectivity with its own union-find over route link
//! indices, independently of [`crate::survivability`], so the two can check each other.
//!
//! Monte Carlo sampling uses PCG64 (`Lcg128Xsl64` from `rand_pcg`) seeded with
//! `seed_from_u64(seed)`. Each sample draws one uniform `f64` per physical link in canonical link
//! order; a link fails when the draw is below its failure probability. Output is a function of
//! `(seed, samples)` only.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;
use rayon::prelude::*;
use thiserror::Error;

use crate::model::{CrossLayerInstance, Link, LinkMapping, ModelError};

/// Largest physical network handled by [`exact_reliability`].
pub const EXACT_LINK_CAP: usize = 22;

/// Patterns per parallel chunk; partial sums are added in chunk order.
const CHUNK: u64 = 1 << 12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(
        "exact enumeration is limited to {cap} physical links (instance has {links}); \
         use Monte Carlo instead"
    )]
    TooManyLinks { links: usize, cap: usize },
    #[error("at least one sample is required")]
    NoSamples,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReliabilityMethod {
    Exact,
    MonteCarlo,
}

impl std::fmt::Display for ReliabilityMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ReliabilityMethod::Exact => "exact",
            ReliabilityMethod::MonteCarlo => "monte-carlo",
        })
    }
}

/// Probability that the logical network stays connected.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReliabilityReport {
    pub method: ReliabilityMethod,
    pub value: f64,
    /// Standard error of `value`; 0 for exact results.
    pub stderr: f64,
    /// Samples drawn, or failure patterns enumerated.
    pub samples: u64,
    /// Generator seed (0 for exact results).
    pub seed: u64,
}

/// Logical links reduced to dense node indices and physical link index lists.
struct Compiled {
    nodes: usize,
    ends: Vec<(usize, usize)>,
    routes: Vec<Vec<usize>>,
}

impl Compiled {
    fn new(inst: &CrossLayerInstance, m: &LinkMapping) -> Result<Self, ModelError> {
        m.check_total(inst)?;
        let logical = inst.logical();
        let pos = |n| logical.nodes().iter().position(|x| *x == n).unwrap();
        let physical = inst.physical();
        let mut ends = Vec::new();
        let mut routes = Vec::new();
        for u in logical.links() {
            ends.push((pos(u.a()), pos(u.b())));
            let path = m.route(*u).expect("checked total");
            routes.push(
                path.links()
                    .map(|l| physical.link_index(l).expect("routes use physical links"))
                    .collect(),
            );
        }
        Ok(Self {
            nodes: logical.nodes().len(),
            ends,
            routes,
        })
    }

    /// Whether the logical links whose routes avoid every failed link connect all nodes.
    fn connected(&self, failed: impl Fn(usize) -> bool) -> bool {
        let mut parent: Vec<usize> = (0..self.nodes).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut components = self.nodes;
        for (route, &(a, b)) in self.routes.iter().zip(&self.ends) {
            if route.iter().any(|&e| failed(e)) {
                continue;
            }
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra] = rb;
                components -= 1;
                if components == 1 {
                    return true;
                }
            }
        }
        components == 1
    }
}

/// For every physical link, whether the logical network stays connected when only that link
/// fails.
pub fn single_failure_scan(
    inst: &CrossLayerInstance,
    m: &LinkMapping,
) -> Result<BTreeMap<Link, bool>, SimError> {
    let c = Compiled::new(inst, m)?;
    Ok(inst
        .physical()
        .links()
        .iter()
        .enumerate()
        .map(|(i, l)| (*l, c.connected(|e| e == i)))
        .collect())
}

/// Exact probability that the logical network stays connected when every physical link fails
/// independently with its own probability. Enumerates all `2^|E_P|` failure patterns.
pub fn exact_reliability(
    inst: &CrossLayerInstance,
    m: &LinkMapping,
) -> Result<ReliabilityReport, SimError> {
    let links = inst.physical().num_links();
    if links > EXACT_LINK_CAP {
        return Err(SimError::TooManyLinks {
            links,
            cap: EXACT_LINK_CAP,
        });
    }
    let c = Compiled::new(inst, m)?;
    let rho = inst.physical().failure_probs();
    let total: u64 = 1 << links;
    let chunks = total.div_ceil(CHUNK);
    let partial: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut sum = 0.0;
            for mask in k * CHUNK..((k + 1) * CHUNK).min(total) {
                if c.connected(|e| mask >> e & 1 == 1) {
                    let mut p = 1.0;
                    for (e, r) in rho.iter().enumerate() {
                        p *= if mask >> e & 1 == 1 { *r } else { 1.0 - r };
                    }
                    sum += p;
                }
            }
            sum
        })
        .collect();
    let value: f64 = partial.iter().sum();
    Ok(ReliabilityReport {
        method: ReliabilityMethod::Exact,
        value: value.clamp(0.0, 1.0),
        stderr: 0.0,
        samples: total,
        seed: 0,
    })
}

/// Monte Carlo estimate of [`exact_reliability`] from `samples` independent failure patterns.
pub fn mc_reliability(
    inst: &CrossLayerInstance,
    m: &LinkMapping,
    samples: u64,
    seed: u64,
) -> Result<ReliabilityReport, SimError> {
    if samples == 0 {
        return Err(SimError::NoSamples);
    }
    let c = Compiled::new(inst, m)?;
    let rho = inst.physical().failure_probs();
    let mut rng = Pcg64::seed_from_u64(seed);
    let mut failed = vec![false; rho.len()];
    let mut hits = 0u64;
    for _ in 0..samples {
        for (f, r) in failed.iter_mut().zip(rho) {
            *f = rng.gen::<f64>() < *r;
        }
        if c.connected(|e| failed[e]) {
            hits += 1;
        }
    }
    let p = hits as f64 / samples as f64;
    Ok(ReliabilityReport {
        method: ReliabilityMethod::MonteCarlo,
        value: p,
        stderr: (p * (1.0 - p) / samples as f64).sqrt(),
        samples,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances;
    use crate::model::{LogicalNetwork, NodeMapping, PhysicalNetwork, PhysicalPath};

    #[test]
    fn fig1_scan_flags_the_shared_ring_links() {
        let (inst, m) = instances::fig1();
        let scan = single_failure_scan(&inst, &m).unwrap();
        let down: Vec<Link> = scan.iter().filter(|(_, s)| !**s).map(|(l, _)| *l).collect();
        assert_eq!(down, vec![Link::new(3, 6), Link::new(4, 6)]);
    }

    #[test]
    fn fig1_exact_reliability() {
        let (inst, m) = instances::fig1();
        let r = exact_reliability(&inst, &m).unwrap();
        assert!((r.value - 0.734832).abs() < 1e-9, "{}", r.value);
        assert_eq!(r.stderr, 0.0);
        assert_eq!(r.samples, 64);
    }

    #[test]
    fn zero_risk_is_certain() {
        let (inst, m) = instances::fig1();
        let inst = inst.with_uniform_failure(0.0).unwrap();
        assert_eq!(exact_reliability(&inst, &m).unwrap().value, 1.0);
        for seed in [0, 7, 99] {
            assert_eq!(mc_reliability(&inst, &m, 500, seed).unwrap().value, 1.0);
        }
    }

    #[test]
    fn single_link_network() {
        let p = PhysicalNetwork::new([], [(1, 2, 0.2)]).unwrap();
        let l = LogicalNetwork::new([], [(1, 2)]).unwrap();
        let inst =
            CrossLayerInstance::new("one", p, l, NodeMapping::identity([1, 2]).unwrap()).unwrap();
        let m =
            LinkMapping::new(&inst, [(Link::new(1, 2), PhysicalPath::new(vec![1, 2]))]).unwrap();
        assert!((exact_reliability(&inst, &m).unwrap().value - 0.8).abs() < 1e-12);
        let scan = single_failure_scan(&inst, &m).unwrap();
        assert!(!scan[&Link::new(1, 2)]);
    }

    #[test]
    fn monte_carlo_is_reproducible_and_close() {
        let (inst, m) = instances::fig1();
        let a = mc_reliability(&inst, &m, 200_000, 42).unwrap();
        let b = mc_reliability(&inst, &m, 200_000, 42).unwrap();
        assert_eq!(a, b);
        assert!((a.value - 0.734832).abs() < 4.0 * a.stderr);
        let one = mc_reliability(&inst, &m, 1, 3).unwrap();
        assert!(one.value == 0.0 || one.value == 1.0);
        assert_eq!(mc_reliability(&inst, &m, 0, 3), Err(SimError::NoSamples));
    }

    #[test]
    fn enumeration_cap() {
        let links: Vec<_> = (1..24u32).map(|i| (i, i + 1, 0.1)).collect();
        let p = PhysicalNetwork::new([], links).unwrap();
        let l = LogicalNetwork::new([], [(1, 24)]).unwrap();
        let big =
            CrossLayerInstance::new("path", p, l, NodeMapping::identity([1, 24]).unwrap()).unwrap();
        let m = LinkMapping::new(
            &big,
            [(Link::new(1, 24), PhysicalPath::new((1..25).collect()))],
        )
        .unwrap();
        assert!(matches!(
            exact_reliability(&big, &m),
            Err(SimError::TooManyLinks { links: 23, .. })
        ));
    }
}
