//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use aquaflow::aquatools::{compute_index, zonal_stats, GeoTransform, IndexKind, RasterGrid, ZonalError, ZonalStat};
use aquaflow::clock::FixedClock;
use aquaflow::engine::RunStatus;
use aquaflow::evaluation::{aggregate, load_gold, run_suite, ScoreCard, SuiteOptions};
use aquaflow::executor::{
    execute, AttemptOutcome, ExecutionContext, ExecutorOptions, HandlerTable, Resolution, RetryPolicy, ToolError,
    ToolValues,
};
use aquaflow::gateway::{build_engine, run_cli, CliContext, EngineConfig, ENV_CONFIG, ENV_DATA_DIR};
use aquaflow::geo::Polygon;
use aquaflow::knowledge::{Document, Embedder, HashEmbedder, KnowledgeStore};
use aquaflow::registry::{Binding, FieldSpec, TemporalScope, ToolDescriptor, ToolRegistry, TERMINAL_CONTEXT};
use aquaflow::transport::RecordingTransport;
use aquaflow::workflow::{validate, NodeKind, PlanGraph, PlanNode, PrunedPlan, ValidatedPlan, ViolationCode};

type Outcome = Result<String, String>;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    check(elapsed < limit, || format!("took {elapsed:?}, limit {limit:?}"))
}

fn tool(name: &str, inputs: Vec<FieldSpec>, outputs: Vec<FieldSpec>) -> ToolDescriptor {
    ToolDescriptor {
        name: name.to_string(),
        description: String::new(),
        inputs,
        outputs,
        temporal_scope: TemporalScope::None,
        invocation_contexts: vec![],
        binding: Binding::InProcess {
            handler: name.to_string(),
        },
        retry_default: 0,
    }
}

fn report_tool(input_type: &str) -> ToolDescriptor {
    let mut t = tool(
        "report",
        vec![FieldSpec::optional("x", input_type)],
        vec![FieldSpec::required("text", "report-text")],
    );
    t.invocation_contexts = vec![TERMINAL_CONTEXT.to_string()];
    t
}

// Metric arithmetic --------------------------------------------------------

fn metric_arithmetic() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    let mut cards: Vec<ScoreCard> = (0..47)
        .map(|i| ScoreCard {
            task_id: format!("task-{i:02}"),
            input_correct: false,
            tools_correct: false,
            order_correct: false,
            relevant: false,
            anomalies: vec![],
        })
        .collect();
    // each component judged true on a different random subset of 39 cards
    let mut idx: Vec<usize> = (0..47).collect();
    for set in 0..4 {
        idx.shuffle(&mut rng);
        let n = if set == 3 { 37 } else { 39 };
        for &i in &idx[..n] {
            match set {
                0 => cards[i].input_correct = true,
                1 => cards[i].tools_correct = true,
                2 => cards[i].order_correct = true,
                _ => cards[i].relevant = true,
            }
        }
    }
    let s = aggregate(&cards).map_err(|e| e.to_string())?;
    check(s.correctness_pct == "82.98", || format!("correctness {}", s.correctness_pct))?;
    check(s.relevancy_pct == "78.72", || format!("relevancy {}", s.relevancy_pct))?;
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("correctness {}%, relevancy {}% from 47 cards", s.correctness_pct, s.relevancy_pct))
}

// Validator oracle -----------------------------------------------------------

const TYPES: [&str; 3] = ["scene-list", "ndci-value", "weather-series"];

/// Tools with assorted required inputs over three types.
fn oracle_registry() -> ToolRegistry {
    let mut reg = ToolRegistry::new();
    let specs: [(&str, &[usize], &[usize]); 6] = [
        ("src-a", &[], &[0]),
        ("src-b", &[], &[1, 2]),
        ("a-to-b", &[0], &[1]),
        ("b-to-c", &[1], &[2]),
        ("ab-to-c", &[0, 1], &[2]),
        ("c-sink", &[2], &[0]),
    ];
    for (name, ins, outs) in specs {
        let inputs = ins.iter().map(|&t| FieldSpec::required(&format!("in{t}"), TYPES[t])).collect();
        let outputs = outs.iter().map(|&t| FieldSpec::required(&format!("out{t}"), TYPES[t])).collect();
        reg.register_tool(tool(name, inputs, outputs)).unwrap();
    }
    reg
}

/// `reach[u][v]`: a path of one or more edges leads from u to v.
fn reachability(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<bool>> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
    }
    let mut reach = vec![vec![false; n]; n];
    for (u, row) in reach.iter_mut().enumerate() {
        let mut stack = adj[u].clone();
        while let Some(v) = stack.pop() {
            if !row[v] {
                row[v] = true;
                stack.extend(&adj[v]);
            }
        }
    }
    reach
}

fn validator_oracle() -> Outcome {
    let start = Instant::now();
    let reg = oracle_registry();
    let names: Vec<String> = reg.tools().map(|t| t.name.clone()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let (mut cyclic, mut unsatisfied) = (0, 0);
    for case in 0..1000 {
        let n = rng.gen_range(1..=50);
        let density: f64 = rng.gen_range(0.0..=0.3);
        let mut g = PlanGraph::new("oracle");
        let mut tools = Vec::new();
        for i in 0..n {
            let t = names[rng.gen_range(0..names.len())].clone();
            let mut node = PlanNode::new(&format!("n{i}"), &t, NodeKind::Transformation);
            for spec in &reg.get_tool(&t).unwrap().inputs {
                if rng.gen_bool(0.15) {
                    node.params.insert(spec.name.clone(), json!(1));
                }
            }
            tools.push(t);
            g.nodes.push(node);
        }
        let mut edges = Vec::new();
        for a in 0..n {
            for b in 0..n {
                if rng.gen_bool(density / 2.0) {
                    edges.push((a, b));
                    g.edges.push((format!("n{a}"), format!("n{b}")));
                }
            }
        }
        let reach = reachability(n, &edges);

        let expected_cycle: BTreeSet<String> = (0..n).filter(|&v| reach[v][v]).map(|v| format!("n{v}")).collect();
        let mut expected_unsat: BTreeMap<String, usize> = BTreeMap::new();
        for v in 0..n {
            let t = reg.get_tool(&tools[v]).unwrap();
            for spec in t.inputs.iter().filter(|s| s.required && !g.nodes[v].params.contains_key(&s.name)) {
                let produced = (0..n).any(|u| {
                    u != v
                        && reach[u][v]
                        && reg.get_tool(&tools[u]).unwrap().outputs.iter().any(|o| o.semantic_type == spec.semantic_type)
                });
                if !produced {
                    *expected_unsat.entry(format!("n{v}")).or_default() += 1;
                }
            }
        }

        let report = validate(&g, &reg);
        let got_cycle: BTreeSet<String> = report.of(ViolationCode::Cycle).flat_map(|v| v.nodes.clone()).collect();
        let mut got_unsat: BTreeMap<String, usize> = BTreeMap::new();
        for v in report.of(ViolationCode::UnsatisfiedInput) {
            *got_unsat.entry(v.nodes[0].clone()).or_default() += 1;
        }
        check(got_cycle == expected_cycle, || format!("case {case}: cycle nodes {got_cycle:?} vs oracle {expected_cycle:?}"))?;
        check(report.has(ViolationCode::Cycle) == !expected_cycle.is_empty(), || format!("case {case}: cycle verdict"))?;
        check(got_unsat == expected_unsat, || format!("case {case}: unsatisfied {got_unsat:?} vs oracle {expected_unsat:?}"))?;
        cyclic += usize::from(!expected_cycle.is_empty());
        unsatisfied += usize::from(!expected_unsat.is_empty());
    }
    within(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!("1000 digraphs, 0 disagreements ({cyclic} cyclic, {unsatisfied} with unsatisfied inputs)"))
}

// Execution order ------------------------------------------------------------

struct Timeline {
    seq: AtomicU64,
    spans: Mutex<BTreeMap<String, (u64, u64)>>,
}

fn order_fixture(timeline: Arc<Timeline>) -> (ToolRegistry, HandlerTable) {
    let mut reg = ToolRegistry::new();
    let mut handlers = HandlerTable::new();
    for i in 0..50 {
        let name = format!("step{i}");
        reg.register_tool(tool(
            &name,
            vec![FieldSpec::optional("x", "ndci-value")],
            vec![FieldSpec::required("y", "ndci-value")],
        ))
        .unwrap();
        let tl = timeline.clone();
        let id = name.clone();
        handlers.insert(&name, move |_: &ToolValues| {
            let begin = tl.seq.fetch_add(1, Ordering::SeqCst);
            let spin = (begin * 2654435761) % 150;
            std::thread::sleep(Duration::from_micros(spin));
            let end = tl.seq.fetch_add(1, Ordering::SeqCst);
            tl.spans.lock().unwrap().insert(id.clone(), (begin, end));
            Ok(ToolValues::from([("y".to_string(), json!(0.25))]))
        });
    }
    reg.register_tool(report_tool("ndci-value")).unwrap();
    handlers.insert("report", |_: &ToolValues| Ok(ToolValues::from([("text".to_string(), json!("done"))])));
    (reg, handlers)
}

fn execution_order() -> Outcome {
    let start = Instant::now();
    let timeline = Arc::new(Timeline {
        seq: AtomicU64::new(0),
        spans: Mutex::new(BTreeMap::new()),
    });
    let (reg, handlers) = order_fixture(timeline.clone());
    let transport = RecordingTransport::offline();
    let clock = FixedClock::epoch();
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let mut runs = 0;
    for case in 0..500 {
        let n = rng.gen_range(1..=50);
        let density: f64 = rng.gen_range(0.0..=0.3);
        // topological positions are a random permutation of the tool indices
        let mut perm: Vec<usize> = (0..50).collect();
        perm.shuffle(&mut rng);
        let ids: Vec<String> = perm[..n].iter().map(|p| format!("v{p:02}")).collect();
        let mut g = PlanGraph::new("order");
        for (i, id) in ids.iter().enumerate() {
            g.nodes.push(PlanNode::new(id, &format!("step{}", perm[i]), NodeKind::Transformation));
        }
        let mut edges = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if rng.gen_bool(density) {
                    edges.push((ids[a].clone(), ids[b].clone()));
                }
            }
        }
        let mut has_succ = vec![false; n];
        for (a, _) in &edges {
            has_succ[ids.iter().position(|x| x == a).unwrap()] = true;
        }
        g.nodes.push(PlanNode::new("report", "report", NodeKind::Report));
        for (i, id) in ids.iter().enumerate() {
            if !has_succ[i] {
                edges.push((id.clone(), "report".to_string()));
            }
        }
        g.edges = edges.clone();
        let plan = ValidatedPlan::new(g, &reg).map_err(|e| format!("case {case}: {e}"))?;
        let pruned = PrunedPlan::unpruned(plan);
        for workers in [1, 4] {
            timeline.spans.lock().unwrap().clear();
            let ctx = ExecutionContext {
                registry: &reg,
                handlers: &handlers,
                transport: &transport,
                clock: &clock,
                options: ExecutorOptions {
                    workers,
                    retry: RetryPolicy::immediate(1),
                    shuffle_seed: Some(rng.gen()),
                },
            };
            let trace = execute(&pruned, &ctx).map_err(|e| e.to_string())?;
            runs += 1;
            let pos: BTreeMap<&str, usize> =
                trace.entries.iter().enumerate().map(|(i, e)| (e.node_id.as_str(), i)).collect();
            check(pos.len() == n + 1, || format!("case {case}: {} of {} nodes traced", pos.len(), n + 1))?;
            let spans = timeline.spans.lock().unwrap();
            for (a, b) in &edges {
                check(pos[a.as_str()] < pos[b.as_str()], || format!("case {case} workers {workers}: trace puts {b} before {a}"))?;
                if b != "report" {
                    let (ea, sb) = (spans[&tool_of(&pruned, a)].1, spans[&tool_of(&pruned, b)].0);
                    check(ea < sb, || format!("case {case} workers {workers}: {b} started before {a} finished"))?;
                }
            }
        }
    }
    within(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!("{runs} executions of 500 DAGs, 0 violations"))
}

fn tool_of(plan: &PrunedPlan, id: &str) -> String {
    plan.plan.graph().node(id).unwrap().tool.clone()
}

// Retry and fallback ---------------------------------------------------------

fn retry_and_fallback() -> Outcome {
    let transport = RecordingTransport::offline();
    let clock = FixedClock::epoch();
    for k in 1..=6u32 {
        for (budget, expect_ok) in [(k, true), (k.saturating_sub(1).max(1), k == 1)] {
            let mut reg = ToolRegistry::new();
            let mut flaky = tool("flaky", vec![], vec![FieldSpec::required("y", "ndci-value")]);
            flaky.retry_default = budget;
            reg.register_tool(flaky).unwrap();
            reg.register_tool(report_tool("ndci-value")).unwrap();
            let calls = Arc::new(AtomicU64::new(0));
            let c = calls.clone();
            let mut handlers = HandlerTable::new();
            handlers.insert("flaky", move |_: &ToolValues| {
                if c.fetch_add(1, Ordering::SeqCst) < u64::from(k - 1) {
                    Err(ToolError::Failed("transient".into()))
                } else {
                    Ok(ToolValues::from([("y".to_string(), json!(0.5))]))
                }
            });
            handlers.insert("report", |_: &ToolValues| Ok(ToolValues::from([("text".to_string(), json!("r"))])));
            let g = PlanGraph::new("retry")
                .with_node(PlanNode::new("f", "flaky", NodeKind::Retrieval))
                .with_node(PlanNode::new("report", "report", NodeKind::Report))
                .with_edge("f", "report");
            let plan = PrunedPlan::unpruned(ValidatedPlan::new(g, &reg).map_err(|e| e.to_string())?);
            let ctx = ExecutionContext {
                registry: &reg,
                handlers: &handlers,
                transport: &transport,
                clock: &clock,
                options: ExecutorOptions {
                    workers: 1,
                    retry: RetryPolicy::immediate(1),
                    shuffle_seed: None,
                },
            };
            let trace = execute(&plan, &ctx).map_err(|e| e.to_string())?;
            let e = trace.entry("f").unwrap();
            let attempts = e.attempts.len() as u32;
            if expect_ok {
                check(e.resolution == Resolution::Executed, || format!("k={k}: {:?}", e.resolution))?;
                check(attempts == k, || format!("k={k}: {attempts} attempts recorded"))?;
                let failures = e.attempts.iter().filter(|a| matches!(a.outcome, AttemptOutcome::Failure { .. })).count();
                check(failures as u32 == k - 1, || format!("k={k}: {failures} failed attempts"))?;
            } else {
                check(e.resolution == Resolution::Failed && attempts == budget, || {
                    format!("k={k} budget {budget}: {:?} after {attempts}", e.resolution)
                })?;
            }
        }
    }

    // an exhausted primary with a declared fallback, through the whole pipeline
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut config = EngineConfig::load(&fixtures().join("config.json"), &|_| None).map_err(|e| e.to_string())?;
    config.data_dir = dir.path().to_path_buf();
    let engine = build_engine(&config, Arc::new(RecordingTransport::offline())).map_err(|e| e.to_string())?;
    let rec = engine.run("Summarize the weather at Lake Trichonida in March 2023.", None);
    let wx = rec.trace.entry("wx").ok_or("no wx entry")?;
    let clim = rec.trace.entry("clim").ok_or("no clim entry")?;
    check(wx.resolution == Resolution::Failed && wx.attempts.len() as u32 == config.retry.max_attempts, || {
        format!("primary {:?} after {} attempts", wx.resolution, wx.attempts.len())
    })?;
    check(clim.resolution == Resolution::ReplacedByFallback && clim.replaces.as_deref() == Some("wx"), || {
        format!("fallback {:?} replaces {:?}", clim.resolution, clim.replaces)
    })?;
    let report = rec.report.as_ref().ok_or("no final report")?;
    check(report.section("Caveats").is_some(), || "report has no caveats section".into())?;
    check(rec.status != RunStatus::Failed, || format!("run status {:?}", rec.status))?;
    Ok("k-1 failures succeed in k attempts for k=1..6; exhausted primary replaced_by_fallback with final report".into())
}

// Zonal statistics -----------------------------------------------------------

const NODATA: f64 = -9999.0;

fn inside_triangle(p: (f64, f64), t: &[[f64; 2]; 3]) -> bool {
    let cross = |a: [f64; 2], b: [f64; 2]| (b[0] - a[0]) * (p.1 - a[1]) - (b[1] - a[1]) * (p.0 - a[0]);
    let d1 = cross(t[0], t[1]);
    let d2 = cross(t[1], t[2]);
    let d3 = cross(t[2], t[0]);
    let neg = d1 < 0.0 || d2 < 0.0 || d3 < 0.0;
    let pos = d1 > 0.0 || d2 > 0.0 || d3 > 0.0;
    !(neg && pos)
}

fn relative_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn zonal_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    let (mut overlaps, mut empties) = (0, 0);
    for case in 0..200 {
        let (w, h) = (rng.gen_range(1..=64), rng.gen_range(1..=64));
        let origin = [rng.gen_range(-10.0..10.0), rng.gen_range(30.0..50.0)];
        let px = [rng.gen_range(0.001..0.1), rng.gen_range(0.001..0.1)];
        let values: Vec<f64> = (0..w * h)
            .map(|_| if rng.gen_bool(0.1) { NODATA } else { rng.gen_range(-1.0..1.0) })
            .collect();
        let grid = RasterGrid::new(w, h, GeoTransform { origin, pixel_size: px }, NODATA, values.clone())
            .map_err(|e| e.to_string())?;
        // triangles roam a box somewhat larger than the raster
        let (span_x, span_y) = (w as f64 * px[0], h as f64 * px[1]);
        let mut tri = [[0.0; 2]; 3];
        loop {
            let scale = if rng.gen_bool(0.3) { 0.05 } else { 1.0 };
            let cx = origin[0] + rng.gen_range(-0.3..1.3) * span_x;
            let cy = origin[1] - rng.gen_range(-0.3..1.3) * span_y;
            for v in tri.iter_mut() {
                *v = [
                    cx + rng.gen_range(-0.6..0.6) * span_x * scale,
                    cy + rng.gen_range(-0.6..0.6) * span_y * scale,
                ];
            }
            let area2 = (tri[1][0] - tri[0][0]) * (tri[2][1] - tri[0][1]) - (tri[2][0] - tri[0][0]) * (tri[1][1] - tri[0][1]);
            if area2.abs() > 1e-9 {
                break;
            }
        }
        let (mut selected, mut picked) = (0usize, Vec::new());
        for row in 0..h {
            for col in 0..w {
                let c = (origin[0] + (col as f64 + 0.5) * px[0], origin[1] - (row as f64 + 0.5) * px[1]);
                if inside_triangle(c, &tri) {
                    selected += 1;
                    let v = values[row * w + col];
                    if v != NODATA {
                        picked.push(v);
                    }
                }
            }
        }
        let zone = Polygon(tri.to_vec());
        let mean = zonal_stats(&grid, &zone, ZonalStat::Mean);
        let max = zonal_stats(&grid, &zone, ZonalStat::Max);
        if selected == 0 {
            empties += 1;
            check(mean == Err(ZonalError::NoOverlap) && max == Err(ZonalError::NoOverlap), || {
                format!("case {case}: oracle selects nothing, got {mean:?}")
            })?;
            continue;
        }
        check(mean != Err(ZonalError::NoOverlap), || format!("case {case}: NoOverlap but oracle selects {selected}"))?;
        if picked.is_empty() {
            check(mean == Err(ZonalError::AllNodata), || format!("case {case}: {mean:?} for all-nodata zone"))?;
            continue;
        }
        overlaps += 1;
        let want_mean = picked.iter().sum::<f64>() / picked.len() as f64;
        let want_max = picked.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (m, x) = (mean.map_err(|e| e.to_string())?, max.map_err(|e| e.to_string())?);
        check(relative_eq(m, want_mean), || format!("case {case}: mean {m} vs {want_mean}"))?;
        check(relative_eq(x, want_max), || format!("case {case}: max {x} vs {want_max}"))?;
    }
    Ok(format!("200 rasters: {overlaps} with values, {empties} NoOverlap, all within 1e-12"))
}

// Index math -----------------------------------------------------------------

fn index_math() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let grid = |w: usize, h: usize, v: Vec<f64>| {
        RasterGrid::new(w, h, GeoTransform { origin: [0.0, 1.0], pixel_size: [0.01, 0.01] }, NODATA, v).unwrap()
    };
    let mut checked = 0usize;
    for case in 0..200 {
        let (w, h) = (rng.gen_range(1..=32), rng.gen_range(1..=32));
        let sample = |rng: &mut ChaCha8Rng| match rng.gen_range(0..10) {
            0 => 0.0,
            1 => NODATA,
            _ => rng.gen_range(0.0..1.0),
        };
        let b5: Vec<f64> = (0..w * h).map(|_| sample(&mut rng)).collect();
        let mut b4: Vec<f64> = (0..w * h).map(|_| sample(&mut rng)).collect();
        for i in 0..w * h {
            if rng.gen_bool(0.1) {
                b4[i] = b5[i];
            }
        }
        let bands = BTreeMap::from([("B05".to_string(), grid(w, h, b5.clone())), ("B04".to_string(), grid(w, h, b4.clone()))]);
        let swapped = BTreeMap::from([("B05".to_string(), grid(w, h, b4.clone())), ("B04".to_string(), grid(w, h, b5.clone()))]);
        let out = compute_index(&bands, IndexKind::Ndci).map_err(|e| e.to_string())?;
        let rev = compute_index(&swapped, IndexKind::Ndci).map_err(|e| e.to_string())?;
        for i in 0..w * h {
            let (x, y) = (b5[i], b4[i]);
            let (v, r) = (out.values()[i], rev.values()[i]);
            if x == NODATA || y == NODATA || x + y == 0.0 {
                check(out.is_nodata(v) && rev.is_nodata(r), || format!("case {case} pixel {i}: ({x}, {y}) -> {v}, want nodata"))?;
                continue;
            }
            checked += 1;
            check((v + r).abs() <= 1e-12, || format!("case {case} pixel {i}: {v} vs swapped {r}"))?;
            check((-1.0..=1.0).contains(&v), || format!("case {case} pixel {i}: {v} outside [-1, 1]"))?;
            if x == y {
                check(v == 0.0, || format!("case {case} pixel {i}: equal bands give {v}"))?;
            }
        }
    }
    Ok(format!("{checked} defined pixels antisymmetric and bounded; zero-denominator and nodata pixels are nodata"))
}

// Retrieval ------------------------------------------------------------------

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

fn retrieval_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let words: Vec<String> = (0..400).map(|i| format!("w{i}")).collect();
    let sentence = |rng: &mut ChaCha8Rng, n: usize| -> String {
        (0..n).map(|_| words[rng.gen_range(0..words.len())].as_str()).collect::<Vec<_>>().join(" ")
    };
    let embedder = HashEmbedder::default();
    let mut disagreements = 0;
    let mut queries = 0;
    for tank_no in 0..3 {
        let store = KnowledgeStore::new(embedder.dimension());
        let tank = format!("tank{tank_no}");
        let mut docs = Vec::new();
        for i in 0..1000 {
            // every tenth document repeats an earlier one so ties exercise the id order
            let (title, body) = if i % 10 == 9 {
                let d: &Document = &docs[rng.gen_range(0..docs.len())];
                (d.title.clone(), d.body.clone())
            } else {
                let t = sentence(&mut rng, 3);
                let len = rng.gen_range(5..40);
                let b = sentence(&mut rng, len);
                (t, b)
            };
            docs.push(Document::new(&tank, &format!("d{:04}", rng.gen_range(0..100_000) * 1000 + i), &title, &body));
        }
        store.ingest_batch(docs.clone(), &embedder).map_err(|e| e.to_string())?;
        let texts: Vec<String> = docs.iter().map(|d| d.embedding_text()).collect();
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let vectors = embedder.embed(&refs).map_err(|e| e.to_string())?;
        let mut text_count: BTreeMap<&str, usize> = BTreeMap::new();
        for t in &texts {
            *text_count.entry(t.as_str()).or_default() += 1;
        }

        let mut probes: Vec<(String, Option<usize>)> = Vec::new();
        for _ in 0..40 {
            let len = rng.gen_range(1..12);
            probes.push((sentence(&mut rng, len), None));
        }
        for _ in 0..60 {
            let i = rng.gen_range(0..docs.len());
            probes.push((texts[i].clone(), Some(i)));
        }
        for (q, own) in probes {
            queries += 1;
            let qv = embedder.embed(&[q.as_str()]).map_err(|e| e.to_string())?.remove(0);
            let mut full: Vec<(f64, &str)> = vectors.iter().zip(&docs).map(|(v, d)| (cosine(&qv, v), d.id.as_str())).collect();
            full.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
            let got = store.retrieve(&q, &tank, 10, &embedder).map_err(|e| e.to_string())?;
            let ids: Vec<&str> = got.iter().map(|r| r.document_id.as_str()).collect();
            let want: Vec<&str> = full.iter().take(10).map(|p| p.1).collect();
            let scores_ok = got.iter().zip(&full).all(|(r, w)| (r.score - w.0).abs() <= 1e-12);
            let ranks_ok = got.iter().enumerate().all(|(i, r)| r.rank == i + 1);
            if ids != want || !scores_ok || !ranks_ok {
                disagreements += 1;
            }
            if let Some(i) = own {
                if text_count[texts[i].as_str()] == 1 && ids.first() != Some(&docs[i].id.as_str()) {
                    return Err(format!("self-retrieval of {} ranked {:?}", docs[i].id, ids.first()));
                }
            }
        }
    }
    check(disagreements == 0, || format!("{disagreements} of {queries} queries disagree with the full scan"))?;
    Ok(format!("{queries} queries over 3 tanks of 1000 documents, top-10 equals full scan; self-retrieval first"))
}

// End-to-end determinism -----------------------------------------------------

fn collect_files(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn end_to_end_determinism() -> Outcome {
    let start = Instant::now();
    let gold = load_gold(&fixtures().join("gold.jsonl")).map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for workers in [4, 2] {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let mut config = EngineConfig::load(&fixtures().join("config.json"), &|_| None).map_err(|e| e.to_string())?;
        config.data_dir = dir.path().to_path_buf();
        let engine = build_engine(&config, Arc::new(RecordingTransport::offline())).map_err(|e| e.to_string())?;
        let out = config.evals_dir();
        let opts = SuiteOptions {
            eval_id: "acceptance",
            workers,
            parameters: &config.model_parameters,
            out_dir: Some(&out),
        };
        let summary = run_suite(&gold, &engine, &opts).map_err(|e| e.to_string())?;
        check(summary.n_tasks == 10, || format!("{} tasks", summary.n_tasks))?;
        for card in &summary.cards {
            check(card.input_correct && card.tools_correct && card.order_correct && card.relevant, || {
                format!("task {} scored {card:?}", card.task_id)
            })?;
        }
        outputs.push(collect_files(&out.join("acceptance")));
    }
    let (a, b) = (&outputs[0], &outputs[1]);
    check(a.keys().eq(b.keys()), || "runs wrote different file sets".into())?;
    for kind in ["plan.json", "trace.json", "report.json", "card.json"] {
        let n = a.keys().filter(|p| p.ends_with(kind)).count();
        check(n == 10, || format!("{n} {kind} files"))?;
    }
    if let Some((p, _)) = a.iter().find(|(p, bytes)| b.get(*p) != Some(bytes)) {
        return Err(format!("{} differs between runs", p.display()));
    }
    within(start.elapsed(), Duration::from_secs(60))?;
    Ok(format!("{} files byte-identical across two runs; 10/10 tasks all-true", a.len()))
}

// Dry-run isolation ----------------------------------------------------------

fn dry_run_isolation() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    // every tool bound to a remote endpoint, so any invocation would reach the transport
    let mut config = EngineConfig::load(&fixtures().join("config.json"), &|_| None).map_err(|e| e.to_string())?;
    for t in aquaflow::aquatools::descriptors() {
        config.tools.endpoints.insert(t.name, "http://127.0.0.1:9".into());
    }
    let path = dir.path().join("config.json");
    std::fs::write(&path, serde_json::to_string(&config).unwrap()).map_err(|e| e.to_string())?;

    let prompts = std::fs::read_to_string(fixtures().join("prompts.txt")).map_err(|e| e.to_string())?;
    let transport = Arc::new(RecordingTransport::offline());
    let ctx = CliContext {
        env: BTreeMap::from([
            (ENV_CONFIG.to_string(), path.display().to_string()),
            (ENV_DATA_DIR.to_string(), dir.path().join("data").display().to_string()),
        ]),
        transport: transport.clone(),
    };
    let mut n = 0;
    for prompt in prompts.lines().filter(|l| !l.trim().is_empty()) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run_cli(["aquaflow", "--output", "json", "query", prompt, "--dry-run"], &ctx, &mut out, &mut err);
        check(code == 0, || format!("`{prompt}` exited {code}: {}", String::from_utf8_lossy(&err)))?;
        let v: Value = serde_json::from_slice(&out).map_err(|e| e.to_string())?;
        check(v["preview"]["dry_run"] == json!(true) || v["preview"].is_object(), || "no preview".into())?;
        n += 1;
    }
    let calls = transport.call_count();
    check(calls == 0, || format!("{calls} transport call(s): {:?}", transport.calls()))?;
    check(!dir.path().join("data/runs").exists(), || "dry run wrote run directories".into())?;
    Ok(format!("{n} fixture prompts dry-run with every tool remote-bound; 0 transport calls"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("metric arithmetic", metric_arithmetic),
        ("validator oracle equivalence", validator_oracle),
        ("execution-order property", execution_order),
        ("retry/fallback semantics", retry_and_fallback),
        ("zonal-stats oracle", zonal_oracle),
        ("index math", index_math),
        ("retrieval exactness", retrieval_exactness),
        ("end-to-end determinism", end_to_end_determinism),
        ("dry-run isolation", dry_run_isolation),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let t = Instant::now();
        let result = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS  {name:<30} {secs:>7.2}s  {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name:<30} {secs:>7.2}s  {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
