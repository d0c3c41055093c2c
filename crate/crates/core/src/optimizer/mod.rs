//! Exact optimization of logical link routings.
//!
//! Two problems are solved by branch-and-bound over per-logical-link candidate routes:
//!
//! * [`solve_max_prct_tree`]: the routed logical spanning tree whose physical support has the
//!   smallest total cost (the most reliable single protecting tree).
//! * [`solve_base_mapping`]: the full routing whose critical physical links have the smallest
//!   total cost, i.e. the maximal survivable probability of the instance.
//!
//! Costs come from a [`WeightModel`]: unit costs minimize link counts (the uniform failure
//! case), `-ln(1 - ρ_e)` costs turn the product of survival probabilities into a sum.
//!
//! Both searches are exact with respect to the candidate route sets, and globally exact when
//! candidates are all simple paths. The [`milp`] module exports the equivalent integer
//! programs in LP format and checks externally produced solutions against them.

mod base;
mod maxtree;
pub mod milp;
mod search;

use std::collections::BTreeSet;
use std::time::Duration;

use thiserror::Error;

use crate::model::{CrossLayerInstance, Link, LinkMapping, ModelError};
use crate::survivability::{BaseTreeSet, ProtectingTree};

pub use base::solve_base_mapping;
pub use maxtree::solve_max_prct_tree;

/// How physical link costs are derived from failure probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightKind {
    /// Every link costs 1; the objective counts links.
    Uniform,
    /// Link `e` costs `-ln(1 - ρ_e)`; the objective is minus the log survival probability.
    Random,
}

impl std::str::FromStr for WeightKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(WeightKind::Uniform),
            "random" => Ok(WeightKind::Random),
            other => Err(format!("unknown weight model `{other}`")),
        }
    }
}

/// Non-negative cost per physical link, aligned with the physical link order.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightModel {
    pub kind: WeightKind,
    costs: Vec<f64>,
}

impl WeightModel {
    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn cost(&self, link_index: usize) -> f64 {
        self.costs[link_index]
    }

    /// Same model with every cost multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Self {
        assert!(factor > 0.0 && factor.is_finite());
        Self {
            kind: self.kind,
            costs: self.costs.iter().map(|c| c * factor).collect(),
        }
    }

    /// Sum of costs over `links` (physical link indices), accumulated in index order.
    pub fn total(&self, links: impl IntoIterator<Item = usize>) -> f64 {
        let mut idx: Vec<usize> = links.into_iter().collect();
        idx.sort_unstable();
        idx.iter().fold(0.0, |acc, &i| acc + self.costs[i])
    }
}

/// Cost model for `inst` under `kind`.
pub fn build_weights(
    inst: &CrossLayerInstance,
    kind: WeightKind,
) -> Result<WeightModel, SolveError> {
    let rho = inst.physical().failure_probs();
    let costs = match kind {
        WeightKind::Uniform => vec![1.0; rho.len()],
        WeightKind::Random => rho
            .iter()
            .zip(inst.physical().links())
            .map(|(r, l)| {
                if !(0.0..1.0).contains(r) {
                    return Err(SolveError::InvalidWeights(format!(
                        "link {l} has failure probability {r}; the cost -ln(1 - ρ) must be finite"
                    )));
                }
                Ok(-(-r).ln_1p())
            })
            .collect::<Result<_, _>>()?,
    };
    Ok(WeightModel { kind, costs })
}

/// Search limits. The default allows 450 seconds and an unlimited number of nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    pub node_limit: Option<u64>,
    pub time_limit: Option<Duration>,
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            node_limit: None,
            time_limit: Some(Duration::from_secs(450)),
        }
    }
}

impl Budget {
    pub fn unlimited() -> Self {
        Self {
            node_limit: None,
            time_limit: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SolveStats {
    pub nodes: u64,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("infeasible instance: {0}")]
    Infeasible(#[from] ModelError),
    #[error("search budget exceeded after {nodes} nodes and {elapsed:?}")]
    BudgetExceeded { nodes: u64, elapsed: Duration },
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
}

/// Optimal single protecting tree.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxTreeResult {
    pub tree: ProtectingTree,
    /// Total cost of the tree's physical support.
    pub objective: f64,
    /// Survival probability of the tree's physical support.
    pub phi: f64,
    pub stats: SolveStats,
}

/// Optimal full routing with its certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub mapping: LinkMapping,
    /// Critical physical links of `mapping`.
    pub unprotected: BTreeSet<Link>,
    /// Total cost of the unprotected links.
    pub objective: f64,
    /// Probability that no unprotected link fails.
    pub phi: f64,
    pub base_set: BaseTreeSet,
    pub stats: SolveStats,
}
