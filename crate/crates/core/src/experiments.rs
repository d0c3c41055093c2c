//! Failure scenarios and parameter sweeps.
//!
//! A sweep walks a grid of failure probabilities. In uniform mode every physical link gets the
//! grid value and links are weighted uniformly. In random mode the grid value is the mean of a
//! normal distribution truncated to `(0, 1)` by rejection; each grid point is repeated for a
//! number of replicates (replicate `r` uses seed `seed + r`), links are weighted by
//! `-ln(1 - ρ_e)`, and a row averaging the replicates follows them.
//!
//! For each scenario both the optimal base mapping and the most reliable single protecting tree
//! are solved. Rows are computed in parallel and returned in grid order.
//!
//! CSV columns: `scenario,rho_or_mean,replicate,base_phi,maxtree_phi,ratio,num_unprotected,
//! solve_ms,status`. `solve_ms` is left empty unless timing output is requested, so that
//! repeated runs produce identical files.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use rand_pcg::Pcg64;
use rayon::prelude::*;
use thiserror::Error;

use crate::model::{CrossLayerInstance, Link, ModelError};
use crate::optimizer::{
    build_weights, solve_base_mapping, solve_max_prct_tree, Budget, SolveError, WeightKind,
};
use crate::paths::PathPolicy;

/// Draws allowed per link before random generation gives up.
pub const MAX_REJECTIONS: u32 = 1000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("invalid scenario parameters: {0}")]
    InvalidParameters(String),
    #[error("no draw in (0, 1) for link {link} after {attempts} attempts")]
    RejectionLimit { link: Link, attempts: u32 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScenarioKind {
    Uniform {
        rho: f64,
    },
    Random {
        mean: f64,
        sd: f64,
        replicate: u32,
        seed: u64,
    },
}

/// Failure probability of every physical link.
#[derive(Debug, Clone, PartialEq)]
pub struct FailureScenario {
    pub kind: ScenarioKind,
    pub probs: BTreeMap<Link, f64>,
}

impl FailureScenario {
    /// `inst` with this scenario's failure probabilities.
    pub fn apply(&self, inst: &CrossLayerInstance) -> Result<CrossLayerInstance, ModelError> {
        let links = inst.physical().links();
        let rho: Vec<f64> = links
            .iter()
            .filter_map(|l| self.probs.get(l).copied())
            .collect();
        if rho.len() != links.len() || self.probs.len() != links.len() {
            return Err(ModelError::ProbabilityCount {
                expected: links.len(),
                got: self.probs.len(),
            });
        }
        inst.with_failure_probs(rho)
    }
}

/// Every physical link fails with probability `rho`.
pub fn uniform_scenario(
    inst: &CrossLayerInstance,
    rho: f64,
) -> Result<FailureScenario, ScenarioError> {
    if !(0.0..1.0).contains(&rho) {
        return Err(ScenarioError::InvalidParameters(format!(
            "uniform probability {rho} is outside [0, 1)"
        )));
    }
    Ok(FailureScenario {
        kind: ScenarioKind::Uniform { rho },
        probs: inst.physical().links().iter().map(|l| (*l, rho)).collect(),
    })
}

/// Per-link failure probabilities drawn from `normal(mean, sd)` and kept only inside `(0, 1)`.
/// Links are drawn in canonical order from PCG64 seeded with `seed`.
pub fn gen_random_probs(
    inst: &CrossLayerInstance,
    mean: f64,
    sd: f64,
    seed: u64,
) -> Result<FailureScenario, ScenarioError> {
    if !(0.0..1.0).contains(&mean) || !(sd >= 0.0 && sd.is_finite()) {
        return Err(ScenarioError::InvalidParameters(format!(
            "mean {mean} must lie in [0, 1) and sd {sd} must be non-negative"
        )));
    }
    if sd == 0.0 && mean == 0.0 {
        return Err(ScenarioError::InvalidParameters(
            "mean 0 with sd 0 admits no positive failure probability".into(),
        ));
    }
    let normal =
        Normal::new(mean, sd).map_err(|e| ScenarioError::InvalidParameters(e.to_string()))?;
    let mut rng = Pcg64::seed_from_u64(seed);
    let mut probs = BTreeMap::new();
    for l in inst.physical().links() {
        let mut attempts = 0;
        let value = loop {
            if attempts == MAX_REJECTIONS {
                return Err(ScenarioError::RejectionLimit { link: *l, attempts });
            }
            attempts += 1;
            let x = normal.sample(&mut rng);
            if x > 0.0 && x < 1.0 {
                break x;
            }
        };
        probs.insert(*l, value);
    }
    Ok(FailureScenario {
        kind: ScenarioKind::Random {
            mean,
            sd,
            replicate: 0,
            seed,
        },
        probs,
    })
}

/// Grid from `start` towards `end` in steps of `step`, both ends included when `end` is on the
/// grid. Values are rounded to 12 decimals so that e.g. `0.15 - 30 * 0.005` is exactly 0.
pub fn rho_grid(start: f64, end: f64, step: f64) -> Result<Vec<f64>, ScenarioError> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(ScenarioError::InvalidParameters(format!(
            "step {step} must be positive"
        )));
    }
    for v in [start, end] {
        if !(0.0..1.0).contains(&v) {
            return Err(ScenarioError::InvalidParameters(format!(
                "grid bound {v} is outside [0, 1)"
            )));
        }
    }
    let span = (end - start).abs();
    let count = (span / step + 1e-9).floor() as u64;
    let dir = if end < start { -1.0 } else { 1.0 };
    Ok((0..=count)
        .map(|k| {
            let v = start + dir * k as f64 * step;
            (v * 1e12).round() / 1e12
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepMode {
    Uniform,
    Random { sd: f64, replicates: u32, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub grid: Vec<f64>,
    pub mode: SweepMode,
    /// Candidate routes; `None` picks [`PathPolicy::default_for`] the instance.
    pub policy: Option<PathPolicy>,
    pub budget: Budget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowStatus {
    Ok,
    Infeasible,
    BudgetExceeded,
    Invalid,
    /// Mean row where some replicates failed; averages cover the successful ones.
    Partial,
}

impl std::fmt::Display for RowStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RowStatus::Ok => "ok",
            RowStatus::Infeasible => "infeasible",
            RowStatus::BudgetExceeded => "budget_exceeded",
            RowStatus::Invalid => "invalid",
            RowStatus::Partial => "partial",
        })
    }
}

impl From<&SolveError> for RowStatus {
    fn from(e: &SolveError) -> Self {
        match e {
            SolveError::Infeasible(_) => RowStatus::Infeasible,
            SolveError::BudgetExceeded { .. } => RowStatus::BudgetExceeded,
            SolveError::InvalidWeights(_) => RowStatus::Invalid,
        }
    }
}

/// One scenario's results. Measurements are `None` on failed rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub scenario: String,
    pub rho_or_mean: f64,
    /// Replicate index; `None` on a mean row.
    pub replicate: Option<u32>,
    pub base_phi: Option<f64>,
    pub maxtree_phi: Option<f64>,
    pub ratio: Option<f64>,
    /// Averaged on mean rows.
    pub num_unprotected: Option<f64>,
    /// Wall time of both solves.
    pub solve_ms: f64,
    pub status: RowStatus,
}

struct Job {
    index: usize,
    value: f64,
    replicate: Option<u32>,
}

fn solve_scenario(
    inst: &CrossLayerInstance,
    scenario: Result<FailureScenario, ScenarioError>,
    kind: WeightKind,
    policy: PathPolicy,
    budget: Budget,
) -> (Result<(f64, f64, usize), RowStatus>, f64) {
    let start = Instant::now();
    let outcome = (|| {
        let scenario = scenario.map_err(|_| RowStatus::Invalid)?;
        let inst = scenario.apply(inst).map_err(|_| RowStatus::Invalid)?;
        let weights = build_weights(&inst, kind).map_err(|e| RowStatus::from(&e))?;
        let base =
            solve_base_mapping(&inst, policy, &weights, budget).map_err(|e| RowStatus::from(&e))?;
        let tree = solve_max_prct_tree(&inst, policy, &weights, budget)
            .map_err(|e| RowStatus::from(&e))?;
        Ok((base.phi, tree.phi, base.unprotected.len()))
    })();
    (outcome, start.elapsed().as_secs_f64() * 1e3)
}

/// Solves every scenario of the sweep. Failed solves produce rows with a non-`ok` status.
pub fn run_sweep(inst: &CrossLayerInstance, config: &SweepConfig) -> Vec<SweepRow> {
    let policy = config
        .policy
        .unwrap_or_else(|| PathPolicy::default_for(inst));
    let mut jobs = Vec::new();
    for (index, &value) in config.grid.iter().enumerate() {
        match config.mode {
            SweepMode::Uniform => jobs.push(Job {
                index,
                value,
                replicate: None,
            }),
            SweepMode::Random { replicates, .. } => {
                for r in 0..replicates {
                    jobs.push(Job {
                        index,
                        value,
                        replicate: Some(r),
                    });
                }
            }
        }
    }
    let solved: Vec<SweepRow> = jobs
        .par_iter()
        .map(|job| {
            let (scenario, kind, prefix) = match (config.mode, job.replicate) {
                (SweepMode::Random { sd, seed, .. }, Some(r)) => {
                    let child = seed.wrapping_add(u64::from(r));
                    let s = gen_random_probs(inst, job.value, sd, child).map(|mut s| {
                        s.kind = ScenarioKind::Random {
                            mean: job.value,
                            sd,
                            replicate: r,
                            seed: child,
                        };
                        s
                    });
                    (s, WeightKind::Random, "random")
                }
                _ => (
                    uniform_scenario(inst, job.value),
                    WeightKind::Uniform,
                    "uniform",
                ),
            };
            let (outcome, ms) = solve_scenario(inst, scenario, kind, policy, config.budget);
            let scenario = format!("{prefix}-{:03}", job.index);
            match outcome {
                Ok((base, tree, unprotected)) => SweepRow {
                    scenario,
                    rho_or_mean: job.value,
                    replicate: Some(job.replicate.unwrap_or(0)),
                    base_phi: Some(base),
                    maxtree_phi: Some(tree),
                    ratio: (base > 0.0).then(|| tree / base),
                    num_unprotected: Some(unprotected as f64),
                    solve_ms: ms,
                    status: RowStatus::Ok,
                },
                Err(status) => SweepRow {
                    scenario,
                    rho_or_mean: job.value,
                    replicate: Some(job.replicate.unwrap_or(0)),
                    base_phi: None,
                    maxtree_phi: None,
                    ratio: None,
                    num_unprotected: None,
                    solve_ms: ms,
                    status,
                },
            }
        })
        .collect();

    let SweepMode::Random { replicates, .. } = config.mode else {
        return solved;
    };
    let mut rows = Vec::with_capacity(solved.len() + config.grid.len());
    for chunk in solved.chunks(replicates.max(1) as usize) {
        rows.extend_from_slice(chunk);
        if replicates > 0 {
            rows.push(mean_row(chunk));
        }
    }
    rows
}

fn mean_row(replicates: &[SweepRow]) -> SweepRow {
    let ok: Vec<&SweepRow> = replicates
        .iter()
        .filter(|r| r.status == RowStatus::Ok)
        .collect();
    let n = ok.len() as f64;
    let avg = |f: fn(&SweepRow) -> Option<f64>| -> Option<f64> {
        (!ok.is_empty()).then(|| ok.iter().map(|r| f(r).unwrap_or(0.0)).sum::<f64>() / n)
    };
    let base = avg(|r| r.base_phi);
    let tree = avg(|r| r.maxtree_phi);
    let status = if ok.len() == replicates.len() {
        RowStatus::Ok
    } else if ok.is_empty() {
        replicates[0].status
    } else {
        RowStatus::Partial
    };
    SweepRow {
        scenario: replicates[0].scenario.clone(),
        rho_or_mean: replicates[0].rho_or_mean,
        replicate: None,
        base_phi: base,
        maxtree_phi: tree,
        ratio: match (base, tree) {
            (Some(b), Some(t)) if b > 0.0 => Some(t / b),
            _ => None,
        },
        num_unprotected: avg(|r| r.num_unprotected),
        solve_ms: replicates.iter().map(|r| r.solve_ms).sum(),
        status,
    }
}

pub const CSV_HEADER: [&str; 9] = [
    "scenario",
    "rho_or_mean",
    "replicate",
    "base_phi",
    "maxtree_phi",
    "ratio",
    "num_unprotected",
    "solve_ms",
    "status",
];

/// Writes `rows` as CSV. `solve_ms` is only filled in when `timing` is set.
pub fn write_csv<W: Write>(rows: &[SweepRow], out: W, timing: bool) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.scenario.clone(),
            r.rho_or_mean.to_string(),
            r.replicate
                .map(|x| x.to_string())
                .unwrap_or_else(|| "mean".into()),
            opt(r.base_phi),
            opt(r.maxtree_phi),
            opt(r.ratio),
            opt(r.num_unprotected),
            if timing {
                format!("{:.3}", r.solve_ms)
            } else {
                String::new()
            },
            r.status.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances;

    fn sweep(inst: &CrossLayerInstance, grid: Vec<f64>, mode: SweepMode) -> Vec<SweepRow> {
        run_sweep(
            inst,
            &SweepConfig {
                grid,
                mode,
                policy: None,
                budget: Budget::default(),
            },
        )
    }

    #[test]
    fn default_sweep_grid_has_31_points() {
        let g = rho_grid(0.15, 0.0, 0.005).unwrap();
        assert_eq!(g.len(), 31);
        assert_eq!(g[0], 0.15);
        assert_eq!(g[1], 0.145);
        assert_eq!(*g.last().unwrap(), 0.0);
        assert_eq!(rho_grid(0.1, 0.1, 0.01).unwrap(), vec![0.1]);
        assert!(rho_grid(0.1, 0.0, 0.0).is_err());
        assert!(rho_grid(1.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn degenerate_normal_is_constant() {
        let inst = instances::nsf_ln1();
        let s = gen_random_probs(&inst, 0.1, 0.0, 5).unwrap();
        assert!(s.probs.values().all(|p| *p == 0.1));
        assert!(gen_random_probs(&inst, 0.0, 0.0, 5).is_err());
    }

    #[test]
    fn random_probs_stay_in_unit_interval() {
        let inst = instances::nsf_ln1();
        let s = gen_random_probs(&inst, 0.15, 0.02, 42).unwrap();
        assert_eq!(s, gen_random_probs(&inst, 0.15, 0.02, 42).unwrap());
        let n = s.probs.len() as f64;
        assert!(s.probs.values().all(|p| *p > 0.0 && *p < 1.0));
        let mean = s.probs.values().sum::<f64>() / n;
        assert!((mean - 0.15).abs() < 5.0 * 0.02 / n.sqrt());
    }

    #[test]
    fn wide_normal_completes_or_hits_the_cap() {
        let inst = instances::nsf_ln1();
        match gen_random_probs(&inst, 0.5, 10.0, 1) {
            Ok(s) => assert!(s.probs.values().all(|p| *p > 0.0 && *p < 1.0)),
            Err(e) => assert!(matches!(e, ScenarioError::RejectionLimit { .. })),
        }
    }

    #[test]
    fn fig1_uniform_rows() {
        let (inst, _) = instances::fig1();
        let rows = sweep(&inst, vec![0.0, 0.1], SweepMode::Uniform);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].base_phi, Some(1.0));
        assert_eq!(rows[0].maxtree_phi, Some(1.0));
        assert_eq!(rows[0].ratio, Some(1.0));
        let r = &rows[1];
        assert!((r.base_phi.unwrap() - 0.81).abs() < 1e-9);
        assert!((r.maxtree_phi.unwrap() - 0.6561).abs() < 1e-9);
        assert!((r.ratio.unwrap() - 0.81).abs() < 1e-9);
        assert_eq!(r.num_unprotected, Some(2.0));
    }

    #[test]
    fn random_mode_adds_mean_rows() {
        let inst = instances::nsf_ln2();
        let mode = SweepMode::Random {
            sd: 0.02,
            replicates: 3,
            seed: 9,
        };
        let rows = sweep(&inst, vec![0.1, 0.05], mode);
        assert_eq!(rows.len(), 8);
        assert_eq!(rows[3].replicate, None);
        let mean = rows[..3].iter().map(|r| r.base_phi.unwrap()).sum::<f64>() / 3.0;
        assert!((rows[3].base_phi.unwrap() - mean).abs() < 1e-12);
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_csv(&rows, &mut a, false).unwrap();
        write_csv(&sweep(&inst, vec![0.1, 0.05], mode), &mut b, false).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with(&CSV_HEADER.join(",")));
        assert!(text.contains(",mean,"));
    }

    #[test]
    fn failed_rows_keep_the_sweep_going() {
        let (inst, _) = instances::fig1();
        let rows = run_sweep(
            &inst,
            &SweepConfig {
                grid: vec![0.1, 0.05],
                mode: SweepMode::Uniform,
                policy: Some(PathPolicy::AllPaths { max_hops: 1 }),
                budget: Budget::default(),
            },
        );
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.status == RowStatus::Infeasible));
        let mut out = Vec::new();
        write_csv(&rows, &mut out, false).unwrap();
        assert!(String::from_utf8(out).unwrap().contains(",,,,,infeasible"));
    }
}
