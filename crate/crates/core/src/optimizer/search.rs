//! Shared machinery for the branch-and-bound searches.

use std::time::Instant;

use fixedbitset::FixedBitSet;

use super::{Budget, SolveError, SolveStats};
use crate::model::{CrossLayerInstance, PhysicalPath};
use crate::paths::{enumerate_all, PathPolicy};

/// Absolute slack for comparing objective values.
pub(crate) const EPS: f64 = 1e-9;

pub(crate) struct Candidate {
    pub path: PhysicalPath,
    /// Physical link indices on the route, ascending.
    pub links: Vec<usize>,
    pub bits: FixedBitSet,
}

/// Logical topology compressed to dense indices, plus candidate routes per logical link.
pub(crate) struct Prepared {
    pub num_nodes: usize,
    pub ends: Vec<(usize, usize)>,
    pub candidates: Vec<Vec<Candidate>>,
    pub num_physical: usize,
}

impl Prepared {
    pub fn new(inst: &CrossLayerInstance, policy: PathPolicy) -> Result<Self, SolveError> {
        let logical = inst.logical();
        let node_pos = |n| logical.nodes().iter().position(|x| *x == n).unwrap();
        let ends = logical
            .links()
            .iter()
            .map(|u| (node_pos(u.a()), node_pos(u.b())))
            .collect();
        let physical = inst.physical();
        let candidates = enumerate_all(inst, policy)?
            .into_iter()
            .map(|set| {
                set.paths
                    .into_iter()
                    .map(|path| {
                        let mut links: Vec<usize> = path
                            .links()
                            .map(|l| physical.link_index(l).unwrap())
                            .collect();
                        links.sort_unstable();
                        let bits = physical.link_bits(&path);
                        Candidate { path, links, bits }
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            num_nodes: logical.nodes().len(),
            ends,
            candidates,
            num_physical: physical.num_links(),
        })
    }

    pub fn num_logical(&self) -> usize {
        self.ends.len()
    }

    /// Whether the logical links not in `removed` connect every logical node.
    pub fn connected_without(&self, removed: &FixedBitSet) -> bool {
        let mut dsu = Dsu::new(self.num_nodes);
        let mut components = self.num_nodes;
        for (i, &(a, b)) in self.ends.iter().enumerate() {
            if !removed.contains(i) && dsu.union(a, b) {
                components -= 1;
                if components == 1 {
                    return true;
                }
            }
        }
        components == 1
    }
}

/// Union-find with union by size and an undo log (no path compression).
#[derive(Clone)]
pub(crate) struct Dsu {
    parent: Vec<usize>,
    size: Vec<usize>,
    log: Vec<Option<(usize, usize)>>,
}

impl Dsu {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
            log: Vec::new(),
        }
    }

    pub fn find(&self, mut x: usize) -> usize {
        while self.parent[x] != x {
            x = self.parent[x];
        }
        x
    }

    /// Merges the classes of `a` and `b`; returns false if they were already joined. Every
    /// call pushes one undo record.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            self.log.push(None);
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        self.log.push(Some((ra, rb)));
        true
    }

    pub fn undo(&mut self) {
        if let Some(Some((ra, rb))) = self.log.pop() {
            self.parent[rb] = rb;
            self.size[ra] -= self.size[rb];
        }
    }
}

/// Node and wall-clock accounting against a [`Budget`].
pub(crate) struct Tracker {
    budget: Budget,
    start: Instant,
    pub nodes: u64,
}

impl Tracker {
    pub fn new(budget: Budget) -> Self {
        Self {
            budget,
            start: Instant::now(),
            nodes: 0,
        }
    }

    pub fn tick(&mut self) -> Result<(), SolveError> {
        self.nodes += 1;
        let over_nodes = self.budget.node_limit.is_some_and(|n| self.nodes > n);
        let over_time = self.nodes % 256 == 1
            && self
                .budget
                .time_limit
                .is_some_and(|t| self.start.elapsed() > t);
        if over_nodes || over_time {
            return Err(SolveError::BudgetExceeded {
                nodes: self.nodes,
                elapsed: self.start.elapsed(),
            });
        }
        Ok(())
    }

    pub fn stats(&self) -> SolveStats {
        SolveStats {
            nodes: self.nodes,
            elapsed: self.start.elapsed(),
        }
    }
}
