//! `xsurv`: command-line front end.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 infeasible, 3 search budget exceeded.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use xsurv::experiments::{rho_grid, run_sweep, write_csv, RowStatus, SweepConfig, SweepMode};
use xsurv::failure_sim::{exact_reliability, mc_reliability, SimError};
use xsurv::instance_file::write_routes;
use xsurv::instances;
use xsurv::optimizer::milp::{export_milp, Formulation};
use xsurv::optimizer::{
    build_weights, solve_base_mapping, solve_max_prct_tree, Budget, SolveError, WeightKind,
};
use xsurv::survivability::{critical_links, extract_base_tree_set, mapping_probability};
use xsurv::{parse_instance, CrossLayerInstance, Link, LinkMapping, PathPolicy};

#[derive(Parser)]
#[command(
    name = "xsurv",
    version,
    about = "Survivable probability of cross-layer networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse an instance and print its size.
    Validate { file: PathBuf },
    /// Evaluate the routing stored in an instance file.
    Eval { file: PathBuf },
    /// Find an optimal routing or protecting tree.
    Solve {
        #[arg(long, value_enum)]
        objective: Objective,
        #[arg(long, value_enum)]
        weights: Weights,
        #[command(flatten)]
        search: SearchArgs,
        file: PathBuf,
    },
    /// Solve a grid of failure scenarios and write CSV.
    Sweep {
        #[arg(long)]
        rho_start: f64,
        #[arg(long)]
        rho_end: f64,
        #[arg(long)]
        rho_step: f64,
        /// Draw per-link probabilities around each grid value instead of using it directly.
        #[arg(long)]
        random: bool,
        /// Spread of random probabilities: `sd=X`, `var=X`, or a bare standard deviation.
        #[arg(long, default_value = "sd=0.02", value_parser = parse_spread)]
        variance: f64,
        #[arg(long, default_value_t = 5)]
        replicates: u32,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Fill in the solve_ms column (makes the output run-dependent).
        #[arg(long)]
        timing: bool,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        search: SearchArgs,
        file: PathBuf,
    },
    /// Probability that the logical network survives independent multi-link failures.
    Reliability {
        #[arg(long, value_enum)]
        method: Method,
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        file: PathBuf,
    },
    /// Write an integer program in LP format.
    ExportMilp {
        #[arg(long, value_enum)]
        objective: Objective,
        #[arg(long, value_enum, default_value = "uniform")]
        weights: Weights,
        #[arg(long)]
        out: PathBuf,
        file: PathBuf,
    },
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long, value_enum)]
    paths: Option<Paths>,
    /// Candidate count for k-shortest paths.
    #[arg(long)]
    k: Option<usize>,
    /// Hop cap for all-paths enumeration.
    #[arg(long)]
    max_hops: Option<usize>,
    /// Time limit per solve, in seconds.
    #[arg(long, default_value_t = 450.0)]
    budget_s: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Objective {
    Maxtree,
    Baseset,
}

#[derive(Clone, Copy, ValueEnum)]
enum Weights {
    Uniform,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum Paths {
    All,
    Ksp,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Exact,
    Mc,
}

impl From<Weights> for WeightKind {
    fn from(w: Weights) -> Self {
        match w {
            Weights::Uniform => WeightKind::Uniform,
            Weights::Random => WeightKind::Random,
        }
    }
}

impl From<Objective> for Formulation {
    fn from(o: Objective) -> Self {
        match o {
            Objective::Maxtree => Formulation::MaxTree,
            Objective::Baseset => Formulation::BaseSet,
        }
    }
}

fn parse_spread(s: &str) -> Result<f64, String> {
    let (kind, num) = match s.split_once('=') {
        Some((k, v)) => (k.trim(), v.trim()),
        None => ("sd", s.trim()),
    };
    let v: f64 = num.parse().map_err(|_| format!("not a number: `{num}`"))?;
    if !(v >= 0.0 && v.is_finite()) {
        return Err(format!("spread must be non-negative, got {v}"));
    }
    match kind {
        "sd" => Ok(v),
        "var" => Ok(v.sqrt()),
        other => Err(format!("unknown spread unit `{other}` (use sd= or var=)")),
    }
}

/// A failure with its exit code.
struct Fail(u8, String);

impl From<SolveError> for Fail {
    fn from(e: SolveError) -> Self {
        let code = match e {
            SolveError::Infeasible(_) => 2,
            SolveError::BudgetExceeded { .. } => 3,
            SolveError::InvalidWeights(_) => 1,
        };
        Fail(code, e.to_string())
    }
}

fn input_err(e: impl std::fmt::Display) -> Fail {
    Fail(1, e.to_string())
}

impl SearchArgs {
    fn policy(&self, inst: &CrossLayerInstance) -> Result<PathPolicy, Fail> {
        let kind = match (self.paths, self.k, self.max_hops) {
            (Some(p), _, _) => Some(p),
            (None, Some(_), None) => Some(Paths::Ksp),
            (None, None, Some(_)) => Some(Paths::All),
            (None, Some(_), Some(_)) => {
                return Err(input_err("--k and --max-hops need an explicit --paths"))
            }
            (None, None, None) => None,
        };
        let policy = match kind {
            None => PathPolicy::default_for(inst),
            Some(Paths::All) => PathPolicy::AllPaths {
                max_hops: self
                    .max_hops
                    .unwrap_or(inst.physical().nodes().len().saturating_sub(1)),
            },
            Some(Paths::Ksp) => PathPolicy::KShortest {
                k: self.k.unwrap_or(16),
            },
        };
        Ok(policy)
    }

    fn budget(&self) -> Result<Budget, Fail> {
        if !(self.budget_s > 0.0 && self.budget_s.is_finite()) {
            return Err(input_err("--budget-s must be positive"));
        }
        Ok(Budget {
            node_limit: None,
            time_limit: Some(Duration::from_secs_f64(self.budget_s)),
        })
    }
}

/// Reads `path`, falling back to a bundled instance of the same file name.
fn load(path: &Path) -> Result<(CrossLayerInstance, Option<LinkMapping>), Fail> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
            match instances::ALL
                .iter()
                .find(|(n, _)| *n == name && !path.exists())
            {
                Some((_, t)) => t.to_string(),
                None => return Err(Fail(1, format!("{}: {e}", path.display()))),
            }
        }
    };
    parse_instance(&text).map_err(|e| Fail(1, format!("{}: {e}", path.display())))
}

fn total_mapping(
    inst: &CrossLayerInstance,
    routes: Option<LinkMapping>,
) -> Result<Option<LinkMapping>, Fail> {
    match routes {
        Some(m) => {
            m.check_total(inst).map_err(input_err)?;
            Ok(Some(m))
        }
        None => Ok(None),
    }
}

fn links_text<'a>(links: impl IntoIterator<Item = &'a Link>) -> String {
    links
        .into_iter()
        .map(|l| l.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn run(cmd: Command) -> Result<String, Fail> {
    let mut out = String::new();
    match cmd {
        Command::Validate { file } => {
            let (inst, routes) = load(&file)?;
            let p = inst.physical();
            let l = inst.logical();
            let _ = writeln!(out, "name={}", inst.name);
            let _ = writeln!(out, "physical_nodes={}", p.nodes().len());
            let _ = writeln!(out, "physical_links={}", p.num_links());
            let _ = writeln!(out, "logical_nodes={}", l.nodes().len());
            let _ = writeln!(out, "logical_links={}", l.num_links());
            let routes = match &routes {
                None => "none",
                Some(m) if m.check_total(&inst).is_ok() => "total",
                Some(_) => "partial",
            };
            let _ = writeln!(out, "routes={routes}");
        }
        Command::Eval { file } => {
            let (inst, routes) = load(&file)?;
            let m = total_mapping(&inst, routes)?
                .ok_or_else(|| input_err("instance has no [routes] section to evaluate"))?;
            let critical = critical_links(&inst, &m);
            let _ = writeln!(out, "phi={}", mapping_probability(&inst, &m));
            let _ = writeln!(out, "num_critical={}", critical.len());
            let _ = writeln!(out, "critical={}", links_text(&critical));
            let base = extract_base_tree_set(&inst, &m);
            let _ = writeln!(out, "base_set_probability={}", base.probability(&inst));
            let _ = writeln!(out, "num_trees={}", base.trees.len());
            out.push_str(&base.to_text());
        }
        Command::Solve {
            objective,
            weights,
            search,
            file,
        } => {
            let (inst, _) = load(&file)?;
            let policy = search.policy(&inst)?;
            let budget = search.budget()?;
            let w = build_weights(&inst, weights.into())?;
            let _ = writeln!(out, "policy={policy}");
            match objective {
                Objective::Baseset => {
                    let r = solve_base_mapping(&inst, policy, &w, budget)?;
                    let _ = writeln!(out, "phi={}", r.phi);
                    let _ = writeln!(out, "objective={}", r.objective);
                    let _ = writeln!(out, "num_unprotected={}", r.unprotected.len());
                    let _ = writeln!(out, "unprotected={}", links_text(&r.unprotected));
                    let _ = writeln!(out, "nodes={}", r.stats.nodes);
                    let _ = writeln!(out, "num_trees={}", r.base_set.trees.len());
                    out.push_str("[routes]\n");
                    write_routes(&mut out, &r.mapping);
                    out.push_str(&r.base_set.to_text());
                }
                Objective::Maxtree => {
                    let r = solve_max_prct_tree(&inst, policy, &w, budget)?;
                    let support = xsurv::survivability::tree_links(&r.tree);
                    let _ = writeln!(out, "phi={}", r.phi);
                    let _ = writeln!(out, "objective={}", r.objective);
                    let _ = writeln!(out, "num_support_links={}", support.len());
                    let _ = writeln!(out, "support={}", links_text(&support));
                    let _ = writeln!(out, "nodes={}", r.stats.nodes);
                    out.push_str("[tree]\n");
                    for (u, path) in r.tree.branches() {
                        let nodes: Vec<String> =
                            path.nodes().iter().map(|n| n.to_string()).collect();
                        let _ = writeln!(out, "{} {} : {}", u.a(), u.b(), nodes.join(" "));
                    }
                }
            }
        }
        Command::Sweep {
            rho_start,
            rho_end,
            rho_step,
            random,
            variance,
            replicates,
            seed,
            timing,
            out: csv_path,
            search,
            file,
        } => {
            let (inst, _) = load(&file)?;
            let grid = rho_grid(rho_start, rho_end, rho_step).map_err(input_err)?;
            let mode = if random {
                if replicates == 0 {
                    return Err(input_err("--replicates must be at least 1"));
                }
                SweepMode::Random {
                    sd: variance,
                    replicates,
                    seed,
                }
            } else {
                SweepMode::Uniform
            };
            let config = SweepConfig {
                grid,
                mode,
                policy: Some(search.policy(&inst)?),
                budget: search.budget()?,
            };
            let rows = run_sweep(&inst, &config);
            let file = std::fs::File::create(&csv_path)
                .map_err(|e| Fail(1, format!("{}: {e}", csv_path.display())))?;
            write_csv(&rows, std::io::BufWriter::new(file), timing).map_err(input_err)?;
            let failed = rows.iter().filter(|r| r.status != RowStatus::Ok).count();
            let _ = writeln!(out, "rows={}", rows.len());
            let _ = writeln!(out, "failed_rows={failed}");
            let _ = writeln!(out, "out={}", csv_path.display());
        }
        Command::Reliability {
            method,
            samples,
            seed,
            file,
        } => {
            let (inst, routes) = load(&file)?;
            let (m, source) = match total_mapping(&inst, routes)? {
                Some(m) => (m, "file"),
                None => {
                    let w = build_weights(&inst, WeightKind::Random)?;
                    let policy = PathPolicy::default_for(&inst);
                    let r = solve_base_mapping(&inst, policy, &w, Budget::default())?;
                    (r.mapping, "optimal")
                }
            };
            let report = match method {
                Method::Exact => exact_reliability(&inst, &m),
                Method::Mc => mc_reliability(&inst, &m, samples, seed),
            }
            .map_err(|e: SimError| input_err(e))?;
            let _ = writeln!(out, "mapping={source}");
            let _ = writeln!(out, "method={}", report.method);
            let _ = writeln!(out, "value={}", report.value);
            let _ = writeln!(out, "stderr={}", report.stderr);
            let _ = writeln!(out, "samples={}", report.samples);
            let _ = writeln!(out, "seed={}", report.seed);
            let _ = writeln!(out, "mapping_phi={}", mapping_probability(&inst, &m));
        }
        Command::ExportMilp {
            objective,
            weights,
            out: lp_path,
            file,
        } => {
            let (inst, _) = load(&file)?;
            let w = build_weights(&inst, weights.into())?;
            let text = export_milp(&inst, objective.into(), &w);
            std::fs::write(&lp_path, &text)
                .map_err(|e| Fail(1, format!("{}: {e}", lp_path.display())))?;
            let _ = writeln!(out, "out={}", lp_path.display());
            let _ = writeln!(out, "lines={}", text.lines().count());
        }
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(Fail(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
