//! Mixed-integer models in LP text format, and a checker for solutions produced by external
//! solvers.
//!
//! Variable names:
//!
//! | name          | meaning                                                              |
//! |---------------|----------------------------------------------------------------------|
//! | `y_s_t_i_j`   | logical link `(s,t)` is routed over physical arc `i -> j` (binary)   |
//! | `x_i_j`       | physical link `(i,j)` is used by the tree's routes (binary)          |
//! | `z_s_t`       | logical link `(s,t)` is a tree branch (binary)                       |
//! | `f_s_t`       | spanning-tree flow on logical arc `s -> t` (continuous)              |
//! | `g_i_j`       | physical link `(i,j)` is unprotected (binary)                        |
//! | `w_i_j_s_t`   | connectivity flow on logical arc `s -> t` after `(i,j)` fails        |
//!
//! Logical links are named by their canonical endpoints (`s < t`); the route of `(s,t)` runs
//! from the physical image of `s` to that of `t`. The spanning tree of the max-tree model is
//! certified by a single-commodity flow: the root (lowest logical node) ships `|V_L| - 1` units,
//! every other node absorbs one, and an arc may only carry flow if its link is a branch. In the
//! base-set model, every physical link either is marked unprotected or admits a unit flow from
//! the root to all logical nodes over logical links whose routes avoid it.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write;

use super::{MaxTreeResult, SolveResult, WeightModel};
use crate::model::{CrossLayerInstance, Link, NodeId};
use crate::survivability::ProtectingTree;

/// Which integer program to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Formulation {
    /// Most reliable single protecting spanning tree.
    MaxTree,
    /// Maximal survivable probability routing with its protecting tree set.
    BaseSet,
}

impl std::str::FromStr for Formulation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "maxtree" => Ok(Formulation::MaxTree),
            "baseset" => Ok(Formulation::BaseSet),
            other => Err(format!("unknown objective `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Binary,
    /// Non-negative continuous.
    Continuous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    /// `(coefficient, variable index)`.
    pub terms: Vec<(f64, usize)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// A linear minimization model over binary and non-negative continuous variables.
#[derive(Debug, Clone, PartialEq)]
pub struct MilpModel {
    pub name: String,
    pub formulation: Formulation,
    /// Root logical node of the tree encodings.
    pub root: NodeId,
    pub variables: Vec<Variable>,
    pub objective: Vec<(f64, usize)>,
    pub constraints: Vec<Constraint>,
    index: HashMap<String, usize>,
}

impl MilpModel {
    fn new(name: String, formulation: Formulation, root: NodeId) -> Self {
        Self {
            name,
            formulation,
            root,
            variables: Vec::new(),
            objective: Vec::new(),
            constraints: Vec::new(),
            index: HashMap::new(),
        }
    }

    fn var(&mut self, name: String, kind: VarKind) -> usize {
        let idx = self.variables.len();
        self.index.insert(name.clone(), idx);
        self.variables.push(Variable { name, kind });
        idx
    }

    fn idx(&self, name: &str) -> usize {
        self.index[name]
    }

    fn constrain(&mut self, name: String, terms: Vec<(f64, usize)>, sense: Sense, rhs: f64) {
        self.constraints.push(Constraint {
            name,
            terms,
            sense,
            rhs,
        });
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    /// Number of variables whose name starts with `prefix` followed by `_`.
    pub fn count_prefix(&self, prefix: &str) -> usize {
        let p = format!("{prefix}_");
        self.variables
            .iter()
            .filter(|v| v.name.starts_with(&p))
            .count()
    }

    /// Renders the model in LP format.
    pub fn to_lp(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "\\ {} model for instance {} (root logical node {})",
            match self.formulation {
                Formulation::MaxTree => "max protecting tree",
                Formulation::BaseSet => "base protecting tree set",
            },
            self.name,
            self.root
        );
        out.push_str("Minimize\n");
        self.write_expr(&mut out, "obj", &self.objective, "");
        out.push_str("Subject To\n");
        for c in &self.constraints {
            let tail = format!(
                " {} {}",
                match c.sense {
                    Sense::Le => "<=",
                    Sense::Eq => "=",
                },
                fmt_num(c.rhs)
            );
            self.write_expr(&mut out, &c.name, &c.terms, &tail);
        }
        out.push_str("Bounds\n");
        for v in &self.variables {
            if v.kind == VarKind::Continuous {
                let _ = writeln!(out, " {} >= 0", v.name);
            }
        }
        out.push_str("Binary\n");
        for v in &self.variables {
            if v.kind == VarKind::Binary {
                let _ = writeln!(out, " {}", v.name);
            }
        }
        out.push_str("End\n");
        out
    }

    fn write_expr(&self, out: &mut String, label: &str, terms: &[(f64, usize)], tail: &str) {
        let _ = write!(out, " {label}:");
        for (k, (coef, var)) in terms.iter().enumerate() {
            if k > 0 && k % 8 == 0 {
                out.push_str("\n   ");
            }
            let name = &self.variables[*var].name;
            let sign = if *coef < 0.0 {
                "-"
            } else if k == 0 {
                ""
            } else {
                "+"
            };
            let mag = coef.abs();
            let lead = if sign.is_empty() { "" } else { " " };
            if mag == 1.0 {
                let _ = write!(out, " {sign}{lead}{name}");
            } else {
                let _ = write!(out, " {sign}{lead}{} {name}", fmt_num(mag));
            }
        }
        if terms.is_empty() {
            out.push_str(" 0");
        }
        out.push_str(tail);
        out.push('\n');
    }

    /// Checks `values` (missing variables read as 0) against every bound, integrality
    /// requirement and constraint, within absolute tolerance `tol`. Returns the objective value
    /// or the list of violations.
    pub fn check_solution(
        &self,
        values: &HashMap<String, f64>,
        tol: f64,
    ) -> Result<f64, Vec<String>> {
        let mut problems = Vec::new();
        let mut x = vec![0.0; self.variables.len()];
        for (name, v) in values {
            match self.index.get(name) {
                Some(&i) => x[i] = *v,
                None => problems.push(format!("unknown variable {name}")),
            }
        }
        for (v, val) in self.variables.iter().zip(&x) {
            let ok = match v.kind {
                VarKind::Binary => val.abs() <= tol || (val - 1.0).abs() <= tol,
                VarKind::Continuous => *val >= -tol,
            };
            if !ok {
                problems.push(format!("{} = {val} violates its domain", v.name));
            }
        }
        for c in &self.constraints {
            let lhs: f64 = c.terms.iter().map(|(a, i)| a * x[*i]).sum();
            let ok = match c.sense {
                Sense::Le => lhs <= c.rhs + tol,
                Sense::Eq => (lhs - c.rhs).abs() <= tol,
            };
            if !ok {
                problems.push(format!("{}: lhs {lhs} vs rhs {}", c.name, c.rhs));
            }
        }
        if problems.is_empty() {
            Ok(self.objective.iter().map(|(a, i)| a * x[*i]).sum())
        } else {
            Err(problems)
        }
    }
}

fn fmt_num(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

fn link_name(l: Link) -> String {
    format!("{}_{}", l.a(), l.b())
}

/// Directed arcs `(from, to)` of every physical link, in link order.
fn arcs(inst: &CrossLayerInstance) -> Vec<(NodeId, NodeId)> {
    inst.physical()
        .links()
        .iter()
        .flat_map(|l| [(l.a(), l.b()), (l.b(), l.a())])
        .collect()
}

/// Adds `y` variables of logical link `u` and its conservation constraints with right-hand
/// side `±supply` at the mapped endpoints (`supply = None` means `z_u`).
fn add_routing(model: &mut MilpModel, inst: &CrossLayerInstance, u: Link, supply: Option<usize>) {
    let un = link_name(u);
    for (i, j) in arcs(inst) {
        model.var(format!("y_{un}_{i}_{j}"), VarKind::Binary);
    }
    let (src, dst) = inst.endpoints(u);
    for &n in inst.physical().nodes() {
        let mut terms = Vec::new();
        for &m in inst.physical().neighbors(n) {
            terms.push((1.0, model.idx(&format!("y_{un}_{n}_{m}"))));
            terms.push((-1.0, model.idx(&format!("y_{un}_{m}_{n}"))));
        }
        let side = if n == src {
            1.0
        } else if n == dst {
            -1.0
        } else {
            0.0
        };
        let rhs = match supply {
            Some(_) => side,
            None => {
                if side != 0.0 {
                    terms.push((-side, model.idx(&format!("z_{un}"))));
                }
                0.0
            }
        };
        model.constrain(format!("route_{un}_n{n}"), terms, Sense::Eq, rhs);
    }
}

/// Builds the integer program for `which` under `weights`.
pub fn build_milp(
    inst: &CrossLayerInstance,
    which: Formulation,
    weights: &WeightModel,
) -> MilpModel {
    let logical = inst.logical();
    let root = logical.root();
    let mut model = MilpModel::new(inst.name.clone(), which, root);
    let n = logical.nodes().len() as f64;
    let plinks = inst.physical().links();

    match which {
        Formulation::MaxTree => {
            for (e, l) in plinks.iter().enumerate() {
                let x = model.var(format!("x_{}", link_name(*l)), VarKind::Binary);
                model.objective.push((weights.cost(e), x));
            }
            for u in logical.links() {
                model.var(format!("z_{}", link_name(*u)), VarKind::Binary);
            }
            for u in logical.links() {
                add_routing(&mut model, inst, *u, None);
            }
            for u in logical.links() {
                let un = link_name(*u);
                for l in plinks {
                    let (i, j) = l.endpoints();
                    let terms = vec![
                        (1.0, model.idx(&format!("y_{un}_{i}_{j}"))),
                        (1.0, model.idx(&format!("y_{un}_{j}_{i}"))),
                        (-1.0, model.idx(&format!("x_{}", link_name(*l)))),
                    ];
                    model.constrain(format!("use_{un}_{i}_{j}"), terms, Sense::Le, 0.0);
                }
            }
            for u in logical.links() {
                for (s, t) in [(u.a(), u.b()), (u.b(), u.a())] {
                    model.var(format!("f_{s}_{t}"), VarKind::Continuous);
                }
            }
            for &v in logical.nodes() {
                let terms = logical_flow_terms(&model, inst, v, "f");
                let rhs = if v == root { n - 1.0 } else { -1.0 };
                model.constrain(format!("tree_n{v}"), terms, Sense::Eq, rhs);
            }
            for u in logical.links() {
                let z = model.idx(&format!("z_{}", link_name(*u)));
                for (s, t) in [(u.a(), u.b()), (u.b(), u.a())] {
                    let f = model.idx(&format!("f_{s}_{t}"));
                    model.constrain(
                        format!("branch_{s}_{t}"),
                        vec![(1.0, f), (-(n - 1.0), z)],
                        Sense::Le,
                        0.0,
                    );
                }
            }
            let card = logical
                .links()
                .iter()
                .map(|u| (1.0, model.idx(&format!("z_{}", link_name(*u)))))
                .collect();
            model.constrain("tree_size".into(), card, Sense::Eq, n - 1.0);
        }
        Formulation::BaseSet => {
            for u in logical.links() {
                add_routing(&mut model, inst, *u, Some(1));
            }
            for (e, l) in plinks.iter().enumerate() {
                let g = model.var(format!("g_{}", link_name(*l)), VarKind::Binary);
                model.objective.push((weights.cost(e), g));
            }
            for l in plinks {
                let en = link_name(*l);
                let (i, j) = l.endpoints();
                for u in logical.links() {
                    let un = link_name(*u);
                    for (s, t) in [(u.a(), u.b()), (u.b(), u.a())] {
                        let w = model.var(format!("w_{en}_{s}_{t}"), VarKind::Continuous);
                        let terms = vec![
                            (1.0, w),
                            (1.0, model.idx(&format!("y_{un}_{i}_{j}"))),
                            (1.0, model.idx(&format!("y_{un}_{j}_{i}"))),
                        ];
                        model.constrain(format!("avoid_{en}_{s}_{t}"), terms, Sense::Le, 1.0);
                    }
                }
                let g = model.idx(&format!("g_{en}"));
                for &v in logical.nodes() {
                    let mut terms = logical_flow_terms(&model, inst, v, &format!("w_{en}"));
                    // Root supplies 1 - g; every other node absorbs (1 - g) / (|V_L| - 1),
                    // written scaled by |V_L| - 1.
                    let rhs = if v == root {
                        terms.push((1.0, g));
                        1.0
                    } else {
                        for t in &mut terms {
                            t.0 *= n - 1.0;
                        }
                        terms.push((-1.0, g));
                        -1.0
                    };
                    model.constrain(format!("protect_{en}_n{v}"), terms, Sense::Eq, rhs);
                }
            }
        }
    }
    model
}

/// `Σ out - Σ in` of the logical arc variables `{prefix}_{s}_{t}` at logical node `v`.
fn logical_flow_terms(
    model: &MilpModel,
    inst: &CrossLayerInstance,
    v: NodeId,
    prefix: &str,
) -> Vec<(f64, usize)> {
    let mut terms = Vec::new();
    for u in inst.logical().links() {
        let other = if u.a() == v {
            u.b()
        } else if u.b() == v {
            u.a()
        } else {
            continue;
        };
        terms.push((1.0, model.idx(&format!("{prefix}_{v}_{other}"))));
        terms.push((-1.0, model.idx(&format!("{prefix}_{other}_{v}"))));
    }
    terms
}

/// LP text of the integer program for `which` under `weights`.
pub fn export_milp(inst: &CrossLayerInstance, which: Formulation, weights: &WeightModel) -> String {
    build_milp(inst, which, weights).to_lp()
}

/// Reads a solution listing: one `name value` (or `name = value`) pair per line. Lines that do
/// not end in a number are skipped, so most solver solution dumps can be fed in directly.
pub fn parse_solution(text: &str) -> HashMap<String, f64> {
    let mut values = HashMap::new();
    for line in text.lines() {
        let toks: Vec<&str> = line
            .split(|c: char| c.is_whitespace() || c == '=')
            .filter(|t| !t.is_empty())
            .collect();
        if toks.len() >= 2 {
            if let Ok(v) = toks[toks.len() - 1].parse::<f64>() {
                values.insert(toks[0].to_string(), v);
            }
        }
    }
    values
}

/// Flow on every tree arc directed away from the root, as the number of nodes below it.
fn subtree_flows(inst: &CrossLayerInstance, tree: &ProtectingTree) -> Vec<(NodeId, NodeId, f64)> {
    let root = inst.logical().root();
    let mut adj: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    for (u, _) in tree.branches() {
        adj.entry(u.a()).or_default().push(u.b());
        adj.entry(u.b()).or_default().push(u.a());
    }
    fn visit(
        n: NodeId,
        parent: Option<NodeId>,
        adj: &BTreeMap<NodeId, Vec<NodeId>>,
        out: &mut Vec<(NodeId, NodeId, f64)>,
    ) -> f64 {
        let mut size = 1.0;
        for &c in adj.get(&n).map(Vec::as_slice).unwrap_or(&[]) {
            if Some(c) != parent {
                let below = visit(c, Some(n), adj, out);
                out.push((n, c, below));
                size += below;
            }
        }
        size
    }
    let mut out = Vec::new();
    visit(root, None, &adj, &mut out);
    out
}

fn route_values(values: &mut HashMap<String, f64>, u: Link, path: &crate::model::PhysicalPath) {
    let un = link_name(u);
    for w in path.nodes().windows(2) {
        values.insert(format!("y_{un}_{}_{}", w[0], w[1]), 1.0);
    }
}

/// Variable assignment of the base-set model encoding a solver result.
pub fn solution_from_base(inst: &CrossLayerInstance, result: &SolveResult) -> HashMap<String, f64> {
    let mut values = HashMap::new();
    for (u, path) in result.mapping.iter() {
        route_values(&mut values, u, path);
    }
    let scale = (inst.logical().nodes().len() - 1) as f64;
    for l in inst.physical().links() {
        let en = link_name(*l);
        match result.base_set.protected_by.get(l) {
            Some(&t) => {
                for (s, t, flow) in subtree_flows(inst, &result.base_set.trees[t]) {
                    values.insert(format!("w_{en}_{s}_{t}"), flow / scale);
                }
            }
            None => {
                values.insert(format!("g_{en}"), 1.0);
            }
        }
    }
    values
}

/// Variable assignment of the max-tree model encoding a solver result.
pub fn solution_from_tree(
    inst: &CrossLayerInstance,
    result: &MaxTreeResult,
) -> HashMap<String, f64> {
    let mut values = HashMap::new();
    for (u, path) in result.tree.branches() {
        values.insert(format!("z_{}", link_name(u)), 1.0);
        route_values(&mut values, u, path);
        for l in path.links() {
            values.insert(format!("x_{}", link_name(l)), 1.0);
        }
    }
    for (s, t, flow) in subtree_flows(inst, &result.tree) {
        values.insert(format!("f_{s}_{t}"), flow);
    }
    values
}
