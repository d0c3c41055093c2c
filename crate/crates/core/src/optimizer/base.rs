//! Branch-and-bound for the maximal survivable probability routing.
//!
//! Logical links are routed one at a time in canonical order, trying candidates in path order.
//! A physical link `e` is *forced critical* once the logical links that certainly cross it
//! disconnect the logical network: committed links whose route uses `e`, plus uncommitted links
//! whose every candidate uses `e`. Later commitments only add links to that set, so the cost of
//! forced links never overestimates the cost of any completion. Uncommitted logical bridges add
//! the cheapest not-yet-forced cost among their candidates. At a leaf the forced set is exactly
//! the critical set of the mapping.
//!
//! Subtrees are cut when the bound reaches the incumbent, and incumbents are only replaced by
//! strictly better values, so the result is the lexicographically smallest optimal assignment.

use std::collections::BTreeMap;

use fixedbitset::FixedBitSet;

use super::search::{Prepared, Tracker, EPS};
use super::{Budget, SolveError, SolveResult, WeightModel};
use crate::model::{CrossLayerInstance, LinkMapping};
use crate::paths::PathPolicy;
use crate::survivability::{critical_links, extract_base_tree_set, survival_probability};

struct Search<'a> {
    prep: &'a Prepared,
    weights: &'a WeightModel,
    /// Per physical link: logical links known to cross it.
    crossing: Vec<FixedBitSet>,
    forced: Vec<bool>,
    forced_cost: f64,
    bridges: Vec<usize>,
    choice: Vec<usize>,
    best: Option<Vec<usize>>,
    best_value: f64,
    root_bound: f64,
    tracker: Tracker,
}

impl<'a> Search<'a> {
    fn new(prep: &'a Prepared, weights: &'a WeightModel, budget: Budget) -> Self {
        let n_log = prep.num_logical();
        let mut crossing = vec![FixedBitSet::with_capacity(n_log); prep.num_physical];
        for (u, cands) in prep.candidates.iter().enumerate() {
            let mut must = cands[0].bits.clone();
            for c in &cands[1..] {
                must.intersect_with(&c.bits);
            }
            for e in must.ones() {
                crossing[e].insert(u);
            }
        }
        let all = FixedBitSet::with_capacity(n_log);
        let bridges = (0..n_log)
            .filter(|&u| {
                let mut without = all.clone();
                without.insert(u);
                !prep.connected_without(&without)
            })
            .collect();
        let mut search = Self {
            prep,
            weights,
            crossing,
            forced: vec![false; prep.num_physical],
            forced_cost: 0.0,
            bridges,
            choice: Vec::with_capacity(n_log),
            best: None,
            best_value: f64::INFINITY,
            root_bound: 0.0,
            tracker: Tracker::new(budget),
        };
        for e in 0..prep.num_physical {
            if !prep.connected_without(&search.crossing[e]) {
                search.forced[e] = true;
                search.forced_cost += weights.cost(e);
            }
        }
        search.root_bound = search.forced_cost + search.bridge_bound(0);
        search
    }

    /// Largest cheapest-extra-cost over uncommitted bridges at or after `from`.
    fn bridge_bound(&self, from: usize) -> f64 {
        self.bridges
            .iter()
            .filter(|&&u| u >= from)
            .map(|&u| {
                self.prep.candidates[u]
                    .iter()
                    .map(|c| {
                        c.links
                            .iter()
                            .filter(|&&e| !self.forced[e])
                            .map(|&e| self.weights.cost(e))
                            .sum::<f64>()
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    }

    fn finished(&self) -> bool {
        self.best_value <= self.root_bound + EPS
    }

    fn dfs(&mut self, depth: usize) -> Result<(), SolveError> {
        self.tracker.tick()?;
        if depth == self.prep.num_logical() {
            let value = self
                .weights
                .total((0..self.forced.len()).filter(|&e| self.forced[e]));
            if value < self.best_value - EPS {
                self.best_value = value;
                self.best = Some(self.choice.clone());
            }
            return Ok(());
        }
        let prep = self.prep;
        for (ci, cand) in prep.candidates[depth].iter().enumerate() {
            let mut inserted = Vec::new();
            for &e in &cand.links {
                if !self.crossing[e].put(depth) {
                    inserted.push(e);
                }
            }
            let mut newly_forced = Vec::new();
            for &e in &cand.links {
                if !self.forced[e] && !prep.connected_without(&self.crossing[e]) {
                    self.forced[e] = true;
                    self.forced_cost += self.weights.cost(e);
                    newly_forced.push(e);
                }
            }
            let bound = self.forced_cost + self.bridge_bound(depth + 1);
            let outcome = if bound < self.best_value - EPS {
                self.choice.push(ci);
                let r = self.dfs(depth + 1);
                self.choice.pop();
                r
            } else {
                Ok(())
            };
            for e in newly_forced {
                self.forced[e] = false;
                self.forced_cost -= self.weights.cost(e);
            }
            for e in inserted {
                self.crossing[e].set(depth, false);
            }
            outcome?;
            if self.finished() {
                break;
            }
        }
        Ok(())
    }
}

/// Finds the routing with maximal survivable probability under `weights`, drawing routes from
/// the candidate sets generated by `policy`.
pub fn solve_base_mapping(
    inst: &CrossLayerInstance,
    policy: PathPolicy,
    weights: &WeightModel,
    budget: Budget,
) -> Result<SolveResult, SolveError> {
    let prep = Prepared::new(inst, policy)?;
    let mut search = Search::new(&prep, weights, budget);
    search.dfs(0)?;
    let choice = search
        .best
        .clone()
        .expect("every candidate assignment is a feasible mapping");
    let routes: BTreeMap<_, _> = inst
        .logical()
        .links()
        .iter()
        .zip(&choice)
        .enumerate()
        .map(|(u, (link, &ci))| (*link, prep.candidates[u][ci].path.clone()))
        .collect();
    let mapping = LinkMapping::from_oriented(routes);
    let unprotected = critical_links(inst, &mapping);
    let objective = weights.total(
        unprotected
            .iter()
            .map(|l| inst.physical().link_index(*l).unwrap()),
    );
    debug_assert!((objective - search.best_value).abs() < 1e-9);
    let phi = survival_probability(inst, &unprotected);
    let base_set = extract_base_tree_set(inst, &mapping);
    Ok(SolveResult {
        mapping,
        unprotected,
        objective,
        phi,
        base_set,
        stats: search.tracker.stats(),
    })
}
