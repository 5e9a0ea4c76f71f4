use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{NodeKind, ParamRef, PlanGraph};
use crate::registry::ToolRegistry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ViolationCode {
    Cycle,
    UnsatisfiedInput,
    NonTerminalReport,
    MissingReport,
    UnknownTool,
    BadReference,
    BadFallback,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub nodes: Vec<String>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn has(&self, code: ViolationCode) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }

    pub fn of(&self, code: ViolationCode) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(move |v| v.code == code)
    }

    /// One line per violation, for repair prompts and logs.
    pub fn describe(&self) -> String {
        self.violations
            .iter()
            .map(|v| format!("{:?} [{}]: {}", v.code, v.nodes.join(", "), v.message))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

struct Collector(Vec<Violation>);

impl Collector {
    fn push(&mut self, code: ViolationCode, nodes: &[&str], message: String) {
        self.0.push(Violation {
            code,
            nodes: nodes.iter().map(|s| s.to_string()).collect(),
            message,
        });
    }
}

/// Checks a draft plan. Total over any input; violations are returned, never raised.
pub fn validate(g: &PlanGraph, registry: &ToolRegistry) -> ValidationReport {
    let mut out = Collector(Vec::new());

    let mut ids = BTreeSet::new();
    for n in &g.nodes {
        if !ids.insert(n.id.as_str()) {
            out.push(ViolationCode::BadReference, &[&n.id], format!("duplicate node id `{}`", n.id));
        }
    }
    for (from, to) in &g.edges {
        for end in [from, to] {
            if !ids.contains(end.as_str()) {
                out.push(
                    ViolationCode::BadReference,
                    &[from, to],
                    format!("edge {from} -> {to} names missing node `{end}`"),
                );
            }
        }
    }

    for n in &g.nodes {
        if registry.get_tool(&n.tool).is_none() {
            out.push(ViolationCode::UnknownTool, &[&n.id], format!("tool `{}` is not registered", n.tool));
        }
    }

    check_report_rules(g, registry, &mut out);
    for cycle in cycles(g) {
        let refs: Vec<&str> = cycle.iter().map(String::as_str).collect();
        out.push(ViolationCode::Cycle, &refs, format!("cycle through {}", cycle.join(" -> ")));
    }
    check_inputs(g, registry, &mut out);
    check_fallbacks(g, registry, &mut out);

    let mut violations = out.0;
    violations.sort_by(|a, b| a.code.cmp(&b.code).then_with(|| a.nodes.cmp(&b.nodes)).then_with(|| a.message.cmp(&b.message)));
    violations.dedup();
    ValidationReport {
        ok: violations.is_empty(),
        violations,
    }
}

fn check_report_rules(g: &PlanGraph, registry: &ToolRegistry, out: &mut Collector) {
    let reports: Vec<&str> = g
        .nodes
        .iter()
        .filter(|n| n.kind == NodeKind::Report)
        .map(|n| n.id.as_str())
        .collect();
    if reports.len() != 1 {
        out.push(
            ViolationCode::MissingReport,
            &reports,
            format!("plan must contain exactly one report node, found {}", reports.len()),
        );
    }
    let succs = g.successors();
    for n in &g.nodes {
        let terminal_tool = registry.get_tool(&n.tool).map(|t| t.is_terminal());
        if n.kind == NodeKind::Report {
            if let Some(s) = succs.get(n.id.as_str()).filter(|s| !s.is_empty()) {
                let mut nodes = vec![n.id.as_str()];
                nodes.extend(s.iter().copied());
                out.push(
                    ViolationCode::NonTerminalReport,
                    &nodes,
                    format!("report node `{}` has outgoing edges", n.id),
                );
            }
            if terminal_tool == Some(false) {
                out.push(
                    ViolationCode::NonTerminalReport,
                    &[&n.id],
                    format!("report node `{}` uses non-terminal tool `{}`", n.id, n.tool),
                );
            }
        } else if terminal_tool == Some(true) {
            out.push(
                ViolationCode::NonTerminalReport,
                &[&n.id],
                format!("terminal tool `{}` used by non-report node `{}`", n.tool, n.id),
            );
        }
    }
}

/// Strongly connected components that contain a cycle (Tarjan), each sorted.
fn cycles(g: &PlanGraph) -> Vec<Vec<String>> {
    let succs = g.successors();
    let ids: Vec<&str> = succs.keys().copied().collect();
    let pos: BTreeMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let adj: Vec<Vec<usize>> = ids.iter().map(|id| succs[id].iter().map(|s| pos[s]).collect()).collect();

    struct State {
        index: Vec<Option<usize>>,
        low: Vec<usize>,
        on_stack: Vec<bool>,
        stack: Vec<usize>,
        next: usize,
        comps: Vec<Vec<usize>>,
    }
    let n = ids.len();
    let mut st = State {
        index: vec![None; n],
        low: vec![0; n],
        on_stack: vec![false; n],
        stack: Vec::new(),
        next: 0,
        comps: Vec::new(),
    };

    // iterative Tarjan to stay safe on deep graphs
    for root in 0..n {
        if st.index[root].is_some() {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        st.index[root] = Some(st.next);
        st.low[root] = st.next;
        st.next += 1;
        st.stack.push(root);
        st.on_stack[root] = true;
        while let Some(&mut (v, ref mut child)) = call.last_mut() {
            if *child < adj[v].len() {
                let w = adj[v][*child];
                *child += 1;
                match st.index[w] {
                    None => {
                        st.index[w] = Some(st.next);
                        st.low[w] = st.next;
                        st.next += 1;
                        st.stack.push(w);
                        st.on_stack[w] = true;
                        call.push((w, 0));
                    }
                    Some(iw) if st.on_stack[w] => st.low[v] = st.low[v].min(iw),
                    Some(_) => {}
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    st.low[parent] = st.low[parent].min(st.low[v]);
                }
                if Some(st.low[v]) == st.index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = st.stack.pop().unwrap();
                        st.on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    st.comps.push(comp);
                }
            }
        }
    }

    let mut result: Vec<Vec<String>> = st
        .comps
        .into_iter()
        .filter(|c| c.len() > 1 || adj[c[0]].contains(&c[0]))
        .map(|c| {
            let mut names: Vec<String> = c.into_iter().map(|i| ids[i].to_string()).collect();
            names.sort();
            names
        })
        .collect();
    result.sort();
    result
}

fn check_inputs(g: &PlanGraph, registry: &ToolRegistry, out: &mut Collector) {
    let preds = g.predecessors();
    for n in &g.nodes {
        let Some(tool) = registry.get_tool(&n.tool) else { continue };
        let ancestors = g.ancestors_with_distance(&preds, &n.id);

        for (field, value) in &n.params {
            let Some(spec) = tool.input(field) else {
                out.push(
                    ViolationCode::BadReference,
                    &[&n.id],
                    format!("param `{field}` is not an input of tool `{}`", tool.name),
                );
                continue;
            };
            let Some(r) = ParamRef::parse(value) else { continue };
            let Some(target) = g.node(&r.node) else {
                out.push(
                    ViolationCode::BadReference,
                    &[&n.id],
                    format!("`{}` names missing node `{}`", r.render(), r.node),
                );
                continue;
            };
            if !ancestors.contains_key(r.node.as_str()) {
                out.push(
                    ViolationCode::BadReference,
                    &[&n.id, &r.node],
                    format!("`{}` refers to a node that is not upstream of `{}`", r.render(), n.id),
                );
                continue;
            }
            let Some(target_tool) = registry.get_tool(&target.tool) else { continue };
            match target_tool.output(&r.field) {
                None => out.push(
                    ViolationCode::BadReference,
                    &[&n.id, &r.node],
                    format!("tool `{}` has no output `{}`", target_tool.name, r.field),
                ),
                Some(o) if o.semantic_type != spec.semantic_type => out.push(
                    ViolationCode::BadReference,
                    &[&n.id, &r.node],
                    format!(
                        "`{}` is {} but input `{}` expects {}",
                        r.render(),
                        o.semantic_type,
                        field,
                        spec.semantic_type
                    ),
                ),
                Some(_) => {}
            }
        }

        for spec in tool.inputs.iter().filter(|s| s.required) {
            if n.params.contains_key(&spec.name) {
                continue;
            }
            let produced_upstream = ancestors.keys().any(|a| {
                g.node(a)
                    .and_then(|an| registry.get_tool(&an.tool))
                    .map(|t| t.outputs.iter().any(|o| o.semantic_type == spec.semantic_type))
                    .unwrap_or(false)
            });
            if !produced_upstream {
                out.push(
                    ViolationCode::UnsatisfiedInput,
                    &[&n.id],
                    format!(
                        "required input `{}` ({}) has no value and no upstream producer",
                        spec.name, spec.semantic_type
                    ),
                );
            }
        }
    }
}

fn check_fallbacks(g: &PlanGraph, registry: &ToolRegistry, out: &mut Collector) {
    let succs = g.successors();
    let preds = g.predecessors();
    let mut claimed: BTreeMap<&str, &str> = BTreeMap::new();
    for n in &g.nodes {
        let Some(primary_id) = n.fallback_for.as_deref() else { continue };
        let mut bad = |msg: String| out.push(ViolationCode::BadFallback, &[&n.id, primary_id], msg);
        if primary_id == n.id {
            bad(format!("node `{}` is declared as its own fallback", n.id));
            continue;
        }
        let Some(primary) = g.node(primary_id) else {
            bad(format!("fallback target `{primary_id}` does not exist"));
            continue;
        };
        if primary.fallback_for.is_some() {
            bad(format!("`{primary_id}` is itself a fallback; fallbacks cannot be chained"));
        }
        if primary.kind == NodeKind::Report || n.kind == NodeKind::Report {
            bad("report nodes take part in no fallback relation".to_string());
        }
        if let Some(prev) = claimed.insert(primary_id, &n.id) {
            bad(format!("`{primary_id}` already has fallback `{prev}`"));
        }
        if succs.get(n.id.as_str()).map(|s| !s.is_empty()).unwrap_or(false) {
            bad(format!("fallback `{}` must not have outgoing edges", n.id));
        }
        if g.ancestors_with_distance(&preds, &n.id).contains_key(primary_id) {
            bad(format!("fallback `{}` depends on its own primary `{primary_id}`", n.id));
        }
        if let (Some(ft), Some(pt)) = (registry.get_tool(&n.tool), registry.get_tool(&primary.tool)) {
            let covered = ft.output_types();
            let missing: Vec<&str> = pt.output_types().into_iter().filter(|t| !covered.contains(t)).collect();
            if !missing.is_empty() {
                bad(format!(
                    "fallback tool `{}` does not produce {} required to replace `{}`",
                    ft.name,
                    missing.join(", "),
                    pt.name
                ));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workflow::testkit::registry;
    use crate::workflow::PlanNode;
    use serde_json::json;

    fn aoi() -> serde_json::Value {
        json!([[21.5, 38.5], [21.6, 38.5], [21.6, 38.6]])
    }
    fn window() -> serde_json::Value {
        json!({"start": "2024-06-01", "stop": "2024-06-30"})
    }

    fn chlorophyll_chain() -> PlanGraph {
        PlanGraph::new("r")
            .with_node(
                PlanNode::new("search", "scene-search", NodeKind::Retrieval)
                    .with_param("aoi", aoi())
                    .with_param("window", window()),
            )
            .with_node(PlanNode::new("index", "index", NodeKind::Transformation).with_param("aoi", aoi()))
            .with_node(PlanNode::new("chl", "chl", NodeKind::Transformation))
            .with_node(PlanNode::new("report", "report", NodeKind::Report))
            .with_edge("search", "index")
            .with_edge("index", "chl")
            .with_edge("chl", "report")
    }

    #[test]
    fn chlorophyll_chain_is_valid() {
        let r = validate(&chlorophyll_chain(), &registry());
        assert!(r.ok, "{}", r.describe());
    }

    #[test]
    fn two_node_cycle() {
        let g = PlanGraph::new("r")
            .with_node(PlanNode::new("A", "chl", NodeKind::Transformation))
            .with_node(PlanNode::new("B", "chl", NodeKind::Transformation))
            .with_node(PlanNode::new("R", "report", NodeKind::Report))
            .with_edge("A", "B")
            .with_edge("B", "A");
        let r = validate(&g, &registry());
        let cycles: Vec<_> = r.of(ViolationCode::Cycle).collect();
        assert_eq!(cycles.len(), 1);
        assert_eq!(cycles[0].nodes, ["A", "B"]);
    }

    #[test]
    fn self_loop_is_a_cycle() {
        let g = PlanGraph::new("r")
            .with_node(PlanNode::new("R", "report", NodeKind::Report))
            .with_edge("R", "R");
        let r = validate(&g, &registry());
        assert!(r.has(ViolationCode::Cycle));
    }

    #[test]
    fn chl_without_ndci_producer_is_unsatisfied() {
        let g = PlanGraph::new("r")
            .with_node(PlanNode::new("chl", "chl", NodeKind::Transformation))
            .with_node(PlanNode::new("report", "report", NodeKind::Report))
            .with_edge("chl", "report");
        let r = validate(&g, &registry());
        let v: Vec<_> = r.of(ViolationCode::UnsatisfiedInput).collect();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].nodes, ["chl"]);
    }

    #[test]
    fn literal_param_satisfies_input() {
        let g = PlanGraph::new("r")
            .with_node(PlanNode::new("chl", "chl", NodeKind::Transformation).with_param("ndci", json!(0.2)))
            .with_node(PlanNode::new("report", "report", NodeKind::Report))
            .with_edge("chl", "report");
        assert!(validate(&g, &registry()).ok);
    }

    #[test]
    fn report_with_outgoing_edge() {
        let mut g = chlorophyll_chain();
        g.nodes.push(PlanNode::new("late", "chl", NodeKind::Transformation));
        g.edges.push(("report".into(), "late".into()));
        let r = validate(&g, &registry());
        assert!(r.has(ViolationCode::NonTerminalReport));
    }

    #[test]
    fn missing_and_duplicate_report() {
        let g = PlanGraph::new("r").with_node(PlanNode::new("chl", "chl", NodeKind::Transformation).with_param("ndci", json!(0.1)));
        assert!(validate(&g, &registry()).has(ViolationCode::MissingReport));
        let g2 = PlanGraph::new("r")
            .with_node(PlanNode::new("a", "report", NodeKind::Report))
            .with_node(PlanNode::new("b", "report", NodeKind::Report));
        assert!(validate(&g2, &registry()).has(ViolationCode::MissingReport));
    }

    #[test]
    fn unknown_tool_and_dangling_edge() {
        let g = PlanGraph::new("r")
            .with_node(PlanNode::new("x", "teleport", NodeKind::Transformation))
            .with_node(PlanNode::new("report", "report", NodeKind::Report))
            .with_edge("x", "ghost");
        let r = validate(&g, &registry());
        assert!(r.has(ViolationCode::UnknownTool));
        assert!(r.has(ViolationCode::BadReference));
    }

    #[test]
    fn bad_references() {
        let mut g = chlorophyll_chain();
        // reference to a node that is downstream
        g.nodes[1].params.insert("scenes".into(), json!("$chl.chl"));
        let r = validate(&g, &registry());
        assert!(r.has(ViolationCode::BadReference));

        let mut g = chlorophyll_chain();
        g.nodes[2].params.insert("ndci".into(), json!("$index.nope"));
        assert!(validate(&g, &registry()).has(ViolationCode::BadReference));

        let mut g = chlorophyll_chain();
        g.nodes[2].params.insert("ndci".into(), json!("$index.ndci"));
        assert!(validate(&g, &registry()).ok);

        let mut g = chlorophyll_chain();
        g.nodes[2].params.insert("bogus".into(), json!(1));
        assert!(validate(&g, &registry()).has(ViolationCode::BadReference));
    }

    #[test]
    fn fallback_rules() {
        let base = || {
            PlanGraph::new("r")
                .with_node(
                    PlanNode::new("w", "weather", NodeKind::Retrieval)
                        .with_param("aoi", aoi())
                        .with_param("window", window()),
                )
                .with_node(
                    PlanNode::new("clim", "climatology", NodeKind::Retrieval)
                        .with_param("aoi", aoi())
                        .with_param("window", window())
                        .fallback_for("w"),
                )
                .with_node(PlanNode::new("report", "report", NodeKind::Report))
                .with_edge("w", "report")
        };
        assert!(validate(&base(), &registry()).ok);

        let mut chained = base();
        chained.nodes.push(
            PlanNode::new("clim2", "climatology", NodeKind::Retrieval)
                .with_param("aoi", aoi())
                .with_param("window", window())
                .fallback_for("clim"),
        );
        assert!(validate(&chained, &registry()).has(ViolationCode::BadFallback));

        let mut uncovered = base();
        uncovered.nodes[1].tool = "chl".into();
        uncovered.nodes[1].params.clear();
        uncovered.nodes[1].params.insert("ndci".into(), json!(0.1));
        assert!(validate(&uncovered, &registry()).has(ViolationCode::BadFallback));

        let mut missing = base();
        missing.nodes[1].fallback_for = Some("ghost".into());
        assert!(validate(&missing, &registry()).has(ViolationCode::BadFallback));

        let mut with_edge = base();
        with_edge.edges.push(("clim".into(), "report".into()));
        assert!(validate(&with_edge, &registry()).has(ViolationCode::BadFallback));
    }

    #[test]
    fn validate_is_pure() {
        let mut g = chlorophyll_chain();
        g.edges.push(("chl".into(), "search".into()));
        let reg = registry();
        assert_eq!(validate(&g, &reg), validate(&g, &reg));
    }
}
