use std::collections::{BTreeMap, BTreeSet};

use super::{PlanGraph, ValidationReport, Violation, ViolationCode, WorkflowError};

/// Kahn's algorithm, always taking the lexicographically smallest ready node.
///
/// Fails with `NotValidated` when the graph has dangling edges or a cycle.
pub fn topological_order(g: &PlanGraph) -> Result<Vec<String>, WorkflowError> {
    let ids: BTreeSet<&str> = g.nodes.iter().map(|n| n.id.as_str()).collect();
    if ids.len() != g.nodes.len() {
        return Err(not_validated(ViolationCode::BadReference, vec![], "duplicate node ids"));
    }
    if let Some((from, to)) = g
        .edges
        .iter()
        .find(|(f, t)| !ids.contains(f.as_str()) || !ids.contains(t.as_str()))
    {
        return Err(not_validated(
            ViolationCode::BadReference,
            vec![from.clone(), to.clone()],
            "edge names a missing node",
        ));
    }

    let succs = g.successors();
    let mut indegree: BTreeMap<&str, usize> = g.predecessors().iter().map(|(k, v)| (*k, v.len())).collect();
    let mut ready: BTreeSet<&str> = indegree.iter().filter(|(_, d)| **d == 0).map(|(k, _)| *k).collect();
    let mut order = Vec::with_capacity(ids.len());
    while let Some(next) = ready.pop_first() {
        order.push(next.to_string());
        for s in &succs[next] {
            let d = indegree.get_mut(s).unwrap();
            *d -= 1;
            if *d == 0 {
                ready.insert(s);
            }
        }
    }
    if order.len() != ids.len() {
        let stuck: Vec<String> = indegree
            .into_iter()
            .filter(|(_, d)| *d > 0)
            .map(|(k, _)| k.to_string())
            .collect();
        return Err(not_validated(ViolationCode::Cycle, stuck, "graph contains a cycle"));
    }
    Ok(order)
}

fn not_validated(code: ViolationCode, nodes: Vec<String>, message: &str) -> WorkflowError {
    WorkflowError::NotValidated(ValidationReport {
        ok: false,
        violations: vec![Violation {
            code,
            nodes,
            message: message.to_string(),
        }],
    })
}
