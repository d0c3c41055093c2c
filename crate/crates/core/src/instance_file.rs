//! Reading and writing the line-oriented instance format.
//!
//! ```text
//! name fig1            # optional, before any section
//! [physical]
//! node 7               # only needed for isolated nodes
//! link 1 4 0.2         # endpoints and failure probability in [0, 1)
//! [logical]
//! link 1 2
//! [node_map]
//! 1 1                  # logical node, physical node
//! [routes]             # optional
//! 1 2 : 1 5 2          # logical link, physical node sequence
//! ```
//!
//! `#` starts a comment anywhere on a line.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::model::{
    CrossLayerInstance, Link, LinkMapping, LogicalNetwork, ModelError, NodeId, NodeMapping,
    PhysicalNetwork, PhysicalPath,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Preamble,
    Physical,
    Logical,
    NodeMap,
    Routes,
}

fn parse_node(tok: &str) -> Result<NodeId, ModelError> {
    match tok.parse::<NodeId>() {
        Ok(n) if n > 0 => Ok(n),
        _ => Err(ModelError::InvalidNodeId(tok.to_string())),
    }
}

fn expect_args(toks: &[&str], n: usize, what: &str) -> Result<(), ModelError> {
    if toks.len() != n {
        return Err(ModelError::Syntax(format!(
            "`{what}` expects {} argument(s), got {}",
            n - 1,
            toks.len() - 1
        )));
    }
    Ok(())
}

/// Parses an instance file. Returns the validated instance and, when a `[routes]` section is
/// present, the link mapping it describes. Errors carry the offending line number whenever the
/// problem can be pinned to a line.
pub fn parse_instance(text: &str) -> Result<(CrossLayerInstance, Option<LinkMapping>), ModelError> {
    let mut name = None;
    let mut section = Section::Preamble;
    let mut seen_sections = Vec::new();

    let mut phys_nodes = Vec::new();
    let mut phys_links: Vec<(NodeId, NodeId, f64)> = Vec::new();
    let mut phys_seen: BTreeMap<Link, usize> = BTreeMap::new();
    let mut log_nodes = Vec::new();
    let mut log_links = Vec::new();
    let mut log_seen: BTreeMap<Link, usize> = BTreeMap::new();
    let mut map_entries: Vec<(usize, NodeId, NodeId)> = Vec::new();
    let mut route_entries: Vec<(usize, NodeId, NodeId, Vec<NodeId>)> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let at = |e: ModelError| e.at_line(lineno);
        if line.starts_with('[') {
            let next = match line {
                "[physical]" => Section::Physical,
                "[logical]" => Section::Logical,
                "[node_map]" => Section::NodeMap,
                "[routes]" => Section::Routes,
                other => return Err(at(ModelError::Syntax(format!("unknown section {other}")))),
            };
            if seen_sections.contains(&next) {
                return Err(at(ModelError::Syntax(format!("repeated section {line}"))));
            }
            seen_sections.push(next);
            section = next;
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        match section {
            Section::Preamble => {
                if toks[0] == "name" && toks.len() > 1 {
                    name = Some(line["name".len()..].trim().to_string());
                } else {
                    return Err(at(ModelError::Syntax(format!(
                        "unexpected `{line}` before the first section"
                    ))));
                }
            }
            Section::Physical => match toks[0] {
                "node" => {
                    expect_args(&toks, 2, "node").map_err(at)?;
                    phys_nodes.push(parse_node(toks[1]).map_err(at)?);
                }
                "link" => {
                    expect_args(&toks, 4, "link").map_err(at)?;
                    let a = parse_node(toks[1]).map_err(at)?;
                    let b = parse_node(toks[2]).map_err(at)?;
                    let link = Link::new(a, b);
                    if link.is_self_loop() {
                        return Err(at(ModelError::SelfLoop(a)));
                    }
                    let rho: f64 = toks[3].parse().map_err(|_| {
                        at(ModelError::Syntax(format!("bad probability `{}`", toks[3])))
                    })?;
                    crate::model::check_probability(link, rho).map_err(at)?;
                    if phys_seen.insert(link, lineno).is_some() {
                        return Err(at(ModelError::DuplicateLink(link)));
                    }
                    phys_links.push((a, b, rho));
                }
                other => {
                    return Err(at(ModelError::Syntax(format!(
                        "unknown [physical] directive `{other}`"
                    ))))
                }
            },
            Section::Logical => match toks[0] {
                "node" => {
                    expect_args(&toks, 2, "node").map_err(at)?;
                    log_nodes.push(parse_node(toks[1]).map_err(at)?);
                }
                "link" => {
                    expect_args(&toks, 3, "link").map_err(at)?;
                    let s = parse_node(toks[1]).map_err(at)?;
                    let t = parse_node(toks[2]).map_err(at)?;
                    let link = Link::new(s, t);
                    if link.is_self_loop() {
                        return Err(at(ModelError::SelfLoop(s)));
                    }
                    if log_seen.insert(link, lineno).is_some() {
                        return Err(at(ModelError::DuplicateLink(link)));
                    }
                    log_links.push((s, t));
                }
                other => {
                    return Err(at(ModelError::Syntax(format!(
                        "unknown [logical] directive `{other}`"
                    ))))
                }
            },
            Section::NodeMap => {
                if toks.len() != 2 {
                    return Err(at(ModelError::Syntax(
                        "node map entries are `<logical> <physical>`".into(),
                    )));
                }
                let l = parse_node(toks[0]).map_err(at)?;
                let p = parse_node(toks[1]).map_err(at)?;
                map_entries.push((lineno, l, p));
            }
            Section::Routes => {
                let (head, tail) = line.split_once(':').ok_or_else(|| {
                    at(ModelError::Syntax(
                        "routes are `<s> <t> : <n1> ... <nk>`".into(),
                    ))
                })?;
                let ends: Vec<&str> = head.split_whitespace().collect();
                if ends.len() != 2 {
                    return Err(at(ModelError::Syntax(
                        "route must name exactly one logical link".into(),
                    )));
                }
                let s = parse_node(ends[0]).map_err(at)?;
                let t = parse_node(ends[1]).map_err(at)?;
                let nodes = tail
                    .split_whitespace()
                    .map(parse_node)
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(at)?;
                route_entries.push((lineno, s, t, nodes));
            }
        }
    }

    for required in [Section::Physical, Section::Logical, Section::NodeMap] {
        if !seen_sections.contains(&required) {
            let label = match required {
                Section::Physical => "[physical]",
                Section::Logical => "[logical]",
                _ => "[node_map]",
            };
            return Err(ModelError::Syntax(format!("missing section {label}")));
        }
    }

    let physical = PhysicalNetwork::new(phys_nodes, phys_links)?;
    let logical = LogicalNetwork::new(log_nodes, log_links).map_err(|e| match &e {
        ModelError::DuplicateLink(l) => e.clone().at_line(log_seen[l]),
        _ => e,
    })?;

    let mut image: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    let mut pairs = Vec::new();
    for &(lineno, l, p) in &map_entries {
        let at = |e: ModelError| e.at_line(lineno);
        if !logical.nodes().contains(&l) || !physical.contains_node(p) {
            let unknown = if logical.nodes().contains(&l) { p } else { l };
            return Err(at(ModelError::UnknownNode(unknown)));
        }
        if pairs.iter().any(|(x, _)| *x == l) {
            return Err(at(ModelError::DuplicateMapping(l)));
        }
        if let Some(first) = image.insert(p, l) {
            return Err(at(ModelError::NonInjective {
                physical: p,
                first,
                second: l,
            }));
        }
        pairs.push((l, p));
    }
    let node_map = NodeMapping::new(pairs)?;
    let inst = CrossLayerInstance::new(
        name.unwrap_or_else(|| "unnamed".to_string()),
        physical,
        logical,
        node_map,
    )?;

    if !seen_sections.contains(&Section::Routes) {
        return Ok((inst, None));
    }
    let mut routes = BTreeMap::new();
    for (lineno, s, t, nodes) in route_entries {
        let at = |e: ModelError| e.at_line(lineno);
        let u = Link::new(s, t);
        let path = PhysicalPath::new(nodes);
        // The written orientation must match the written logical link.
        let (ms, mt) = (
            inst.node_map()
                .get(s)
                .ok_or(at(ModelError::UnknownNode(s)))?,
            inst.node_map()
                .get(t)
                .ok_or(at(ModelError::UnknownNode(t)))?,
        );
        if path.source() != Some(ms) || path.target() != Some(mt) {
            return Err(at(ModelError::InvalidRoute {
                link: u,
                reason: format!("route for {s} {t} must run from {ms} to {mt}"),
            }));
        }
        let oriented = inst.orient_route(u, &path).map_err(at)?;
        if routes.insert(u, oriented).is_some() {
            return Err(at(ModelError::DuplicateRoute(u)));
        }
    }
    Ok((inst, Some(LinkMapping::from_oriented(routes))))
}

/// Renders the routes of `mapping` as `[routes]` body lines.
pub fn write_routes(out: &mut String, mapping: &LinkMapping) {
    for (u, path) in mapping.iter() {
        let nodes: Vec<String> = path.nodes().iter().map(|n| n.to_string()).collect();
        let _ = writeln!(out, "{} {} : {}", u.a(), u.b(), nodes.join(" "));
    }
}

/// Serializes an instance (and optionally a mapping) in the format read by
/// [`parse_instance`].
pub fn write_instance(inst: &CrossLayerInstance, mapping: Option<&LinkMapping>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "name {}", inst.name);
    out.push_str("[physical]\n");
    let p = inst.physical();
    for n in p.nodes() {
        if p.neighbors(*n).is_empty() {
            let _ = writeln!(out, "node {n}");
        }
    }
    for (l, rho) in p.links().iter().zip(p.failure_probs()) {
        let _ = writeln!(out, "link {} {} {}", l.a(), l.b(), rho);
    }
    out.push_str("[logical]\n");
    for l in inst.logical().links() {
        let _ = writeln!(out, "link {} {}", l.a(), l.b());
    }
    out.push_str("[node_map]\n");
    for (l, ph) in inst.node_map().iter() {
        let _ = writeln!(out, "{l} {ph}");
    }
    if let Some(m) = mapping {
        out.push_str("[routes]\n");
        write_routes(&mut out, m);
    }
    out
}
