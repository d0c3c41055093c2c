//! Branch-and-bound for the most reliable single protecting spanning tree.
//!
//! Each logical link, in canonical order, is either added to the tree with one of its candidate
//! routes (candidates in path order) or left out (tried last). The cost of the physical links
//! already used is a valid bound since costs are non-negative. A partial tree is abandoned when
//! the undecided logical links can no longer connect its components.

use std::collections::BTreeMap;

use super::search::{Dsu, Prepared, Tracker, EPS};
use super::{Budget, MaxTreeResult, SolveError, WeightModel};
use crate::model::CrossLayerInstance;
use crate::paths::PathPolicy;
use crate::survivability::{tree_probability, ProtectingTree};

struct Search<'a> {
    prep: &'a Prepared,
    weights: &'a WeightModel,
    dsu: Dsu,
    branches: usize,
    /// Per logical link: chosen candidate, if the link is a branch.
    choice: Vec<Option<usize>>,
    use_count: Vec<u32>,
    cost: f64,
    best: Option<Vec<Option<usize>>>,
    best_value: f64,
    tracker: Tracker,
}

impl Search<'_> {
    fn can_still_span(&mut self, from: usize) -> bool {
        let mut components = self.prep.num_nodes - self.branches;
        let mut unions = 0;
        for &(a, b) in &self.prep.ends[from..] {
            if components == 1 {
                break;
            }
            if self.dsu.union(a, b) {
                components -= 1;
            }
            unions += 1;
        }
        for _ in 0..unions {
            self.dsu.undo();
        }
        components == 1
    }

    fn dfs(&mut self, depth: usize) -> Result<(), SolveError> {
        self.tracker.tick()?;
        if self.branches + 1 == self.prep.num_nodes {
            let value = self
                .weights
                .total((0..self.use_count.len()).filter(|&e| self.use_count[e] > 0));
            if value < self.best_value - EPS {
                self.best_value = value;
                self.best = Some(self.choice.clone());
            }
            return Ok(());
        }
        if depth == self.prep.num_logical() || !self.can_still_span(depth) {
            return Ok(());
        }
        let prep = self.prep;
        let (a, b) = prep.ends[depth];
        if self.dsu.find(a) != self.dsu.find(b) {
            self.dsu.union(a, b);
            self.branches += 1;
            for (ci, cand) in prep.candidates[depth].iter().enumerate() {
                for &e in &cand.links {
                    self.use_count[e] += 1;
                    if self.use_count[e] == 1 {
                        self.cost += self.weights.cost(e);
                    }
                }
                let outcome = if self.cost < self.best_value - EPS {
                    self.choice[depth] = Some(ci);
                    let r = self.dfs(depth + 1);
                    self.choice[depth] = None;
                    r
                } else {
                    Ok(())
                };
                for &e in &cand.links {
                    self.use_count[e] -= 1;
                    if self.use_count[e] == 0 {
                        self.cost -= self.weights.cost(e);
                    }
                }
                if let Err(e) = outcome {
                    self.dsu.undo();
                    self.branches -= 1;
                    return Err(e);
                }
            }
            self.dsu.undo();
            self.branches -= 1;
        }
        self.dfs(depth + 1)
    }
}

/// Finds the routed logical spanning tree whose physical support has minimal total cost, with
/// routes drawn from the candidate sets generated by `policy`.
pub fn solve_max_prct_tree(
    inst: &CrossLayerInstance,
    policy: PathPolicy,
    weights: &WeightModel,
    budget: Budget,
) -> Result<MaxTreeResult, SolveError> {
    let prep = Prepared::new(inst, policy)?;
    let mut search = Search {
        prep: &prep,
        weights,
        dsu: Dsu::new(prep.num_nodes),
        branches: 0,
        choice: vec![None; prep.num_logical()],
        use_count: vec![0; prep.num_physical],
        cost: 0.0,
        best: None,
        best_value: f64::INFINITY,
        tracker: Tracker::new(budget),
    };
    search.dfs(0)?;
    let choice = search
        .best
        .clone()
        .expect("a connected logical network always has a routable spanning tree");
    let branches: BTreeMap<_, _> = inst
        .logical()
        .links()
        .iter()
        .zip(&choice)
        .enumerate()
        .filter_map(|(u, (link, ci))| ci.map(|ci| (*link, prep.candidates[u][ci].path.clone())))
        .collect();
    let tree = ProtectingTree::new(inst, branches).expect("search yields spanning trees");
    let phi = tree_probability(inst, &tree);
    Ok(MaxTreeResult {
        tree,
        objective: search.best_value,
        phi,
        stats: search.tracker.stats(),
    })
}
