use serde::Serialize;
use serde_json::{json, Map, Value};

use super::config::{self, merge};
use super::output::{format_float, Sink, DEFAULT_PRECISION};
use super::{
    Axis, BoundsArgs, BoundsCommand, Cli, CliError, Command, GlobalArgs, GraphArgs, GraphCommand,
    GraphInfoArgs, ModelName, ProtocolName, RandomizerArgs, RandomizerName, SimulateArgs, Suite,
    TopologyName, VerifyArgs,
};
use crate::analysis::{self, CheckResult, NeighborPair, DEFAULT_BUDGET, MIXING_SLACK};
use crate::bounds::{self, BoundInputs, PrivacyBound};
use crate::graph::{self, generate_topology, read_edge_list, Graph, Topology};
use crate::protocol::{Protocol, ProtocolConfig, Rounds, Simulator};
use crate::randomizer::Randomizer;
use crate::Error;

pub const BUDGET_ENV: &str = "NETSHUFFLE_BUDGET";

/// Returns `Ok(false)` when a verification ran but did not pass.
pub fn run(cli: Cli) -> Result<bool, CliError> {
    let mut file = match &cli.global.config {
        Some(path) => config::read_config(path)?,
        None => Map::new(),
    };
    let file_globals = config::split_globals(&mut file);
    let global: GlobalArgs = merge(&cli.global, &file_globals)?;
    let seed = match global.seed {
        Some(s) => s,
        None => {
            let s: u64 = rand::random();
            eprintln!("seed: {s}");
            s
        }
    };
    let sink = Sink::new(global.precision.unwrap_or(DEFAULT_PRECISION));
    log::info!(
        "global config: {}",
        json!({"seed": seed, "out": global.out, "precision": sink.precision, "workers": global.workers})
    );

    let work = move || -> Result<(bool, Sink), CliError> {
        let mut sink = sink;
        let ok = match cli.command {
            Command::Graph(GraphCommand::Info(args)) => {
                graph_info(&resolve(&args, &file)?, seed, &mut sink)?;
                true
            }
            Command::Bounds(BoundsCommand::Compute(args)) => {
                bounds_cmd(&resolve(&args, &file)?, seed, false, &mut sink)?;
                true
            }
            Command::Bounds(BoundsCommand::Sweep(args)) => {
                bounds_cmd(&resolve(&args, &file)?, seed, true, &mut sink)?;
                true
            }
            Command::Simulate(args) => {
                simulate(&resolve(&args, &file)?, seed, &mut sink)?;
                true
            }
            Command::Verify { suite, args } => {
                verify(suite, &resolve(&args, &file)?, seed, &mut sink)?
            }
        };
        Ok((ok, sink))
    };
    let (ok, sink) = match global.workers {
        Some(0) => return Err(CliError::Usage("--workers must be at least 1".into())),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?
            .install(work)?,
        None => work()?,
    };
    sink.finish(global.out.as_ref())?;
    Ok(ok)
}

fn resolve<T>(args: &T, file: &Map<String, Value>) -> Result<T, CliError>
where
    T: Serialize + serde::de::DeserializeOwned,
{
    let merged = merge(args, file)?;
    log::info!("command config: {}", serde_json::to_string(&merged)?);
    Ok(merged)
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn topology_kind(name: TopologyName, g: &GraphArgs, p: Option<f64>) -> Result<Topology, CliError> {
    Ok(match name {
        TopologyName::Complete => Topology::Complete,
        TopologyName::Cycle => Topology::Cycle,
        TopologyName::Path => Topology::Path,
        TopologyName::Star => Topology::Star,
        TopologyName::ErdosRenyi => Topology::ErdosRenyi {
            p: g.edge_p
                .or(p)
                .ok_or_else(|| usage("erdos_renyi needs --edge-p"))?,
        },
        TopologyName::RandomRegular => Topology::RandomRegular {
            d: g.d.ok_or_else(|| usage("random_regular needs --d"))?,
        },
    })
}

/// `p` stands in for `--edge-p` on commands where `--p` means nothing else.
fn build_graph(
    g: &GraphArgs,
    n: Option<usize>,
    p: Option<f64>,
    seed: u64,
) -> Result<Graph, CliError> {
    match (g.topology, &g.edges) {
        (Some(_), Some(_)) => Err(usage("give either --topology or --edges, not both")),
        (None, Some(path)) => {
            let graph = read_edge_list(path)?;
            match n {
                Some(n) if n != graph.n() => Err(usage(format!(
                    "--n {n} disagrees with the {} vertices in {}",
                    graph.n(),
                    path.display()
                ))),
                _ => Ok(graph),
            }
        }
        (Some(name), None) => {
            let n = n.ok_or_else(|| usage("--topology needs --n"))?;
            Ok(generate_topology(&topology_kind(name, g, p)?, n, seed)?)
        }
        (None, None) => Err(usage(
            "a graph is needed: --topology NAME --n N, or --edges FILE",
        )),
    }
}

fn describe_graph(g: &GraphArgs, graph: &Graph) -> Value {
    match (&g.edges, g.topology) {
        (Some(path), _) => json!({"edges": path, "n": graph.n()}),
        (None, Some(name)) => json!({"topology": name, "n": graph.n()}),
        _ => json!({"n": graph.n()}),
    }
}

#[derive(Serialize)]
struct GraphInfo {
    n: usize,
    m: usize,
    connected: bool,
    bipartite: bool,
    ergodic: bool,
    spectral_gap: Option<f64>,
    eigenvalues: Option<Vec<f64>>,
    degrees: Vec<usize>,
    stationary_distribution: Option<Vec<f64>>,
    #[serde(rename = "recommended_T")]
    recommended_rounds: Option<usize>,
}

fn graph_info(args: &GraphInfoArgs, seed: u64, sink: &mut Sink) -> Result<(), CliError> {
    let g = build_graph(&args.graph, args.n, args.p, seed)?;
    let report = g.ergodicity();
    let spectrum = graph::spectral_gap(&g).ok();
    let recommended_rounds = match (args.eps0, &spectrum) {
        (Some(eps0), Some(s)) if report.ergodic => {
            Some(graph::recommended_rounds(s.gap, g.n(), eps0)?)
        }
        _ => None,
    };
    let info = GraphInfo {
        n: g.n(),
        m: g.m(),
        connected: report.connected,
        bipartite: report.bipartite,
        ergodic: report.ergodic,
        spectral_gap: spectrum.as_ref().map(|s| s.gap),
        eigenvalues: spectrum.map(|s| s.eigenvalues),
        degrees: g.degrees().to_vec(),
        stationary_distribution: graph::stationary_distribution(&g)
            .ok()
            .map(|d| d.into_vec()),
        recommended_rounds,
    };
    sink.json_pretty(&info)
}

/// One grid point of a bounds evaluation.
#[derive(Debug, Clone, Default)]
struct Point {
    eps0: Option<f64>,
    n: Option<usize>,
    delta: Option<f64>,
    delta0: f64,
    p: Option<f64>,
    l: Option<usize>,
    eps: Option<f64>,
}

struct Row {
    model: ModelName,
    point: Point,
    eps: Option<f64>,
    delta: Option<f64>,
    valid: bool,
    json: Value,
}

fn model_name(m: ModelName) -> &'static str {
    match m {
        ModelName::Fmt => "fmt",
        ModelName::Netshuffle => "netshuffle",
        ModelName::SmplWlk => "smpl_wlk",
        ModelName::Partial => "partial",
        ModelName::SubsampleWor => "subsample_wor",
        ModelName::LiewMetric => "liew_metric",
    }
}

/// Axes a model reads, in CSV column order.
fn model_axes(m: ModelName) -> &'static [&'static str] {
    match m {
        ModelName::Fmt | ModelName::Netshuffle => &["eps0", "n", "delta", "delta0"],
        ModelName::SmplWlk => &["eps0", "n", "delta", "delta0", "p"],
        ModelName::Partial => &["eps0", "n", "delta", "delta0", "l"],
        ModelName::SubsampleWor => &["eps", "n", "delta", "l"],
        ModelName::LiewMetric => &["n"],
    }
}

fn bound_row(
    model: ModelName,
    point: Point,
    bound: std::result::Result<PrivacyBound, String>,
) -> Row {
    let inputs = json!({
        "eps0": point.eps0, "n": point.n, "delta": point.delta, "delta0": point.delta0,
        "p": point.p, "l": point.l, "eps": point.eps,
    });
    let mut inputs = inputs;
    if let Value::Object(map) = &mut inputs {
        map.retain(|k, v| !v.is_null() && (model_axes(model).contains(&k.as_str())));
    }
    match bound {
        Ok(b) => Row {
            model,
            eps: b.eps,
            delta: b.delta,
            valid: b.valid,
            json: json!({
                "model": model_name(model),
                "inputs": inputs,
                "eps": b.eps,
                "delta": b.delta,
                "valid": b.valid,
                "validity_condition": b.validity_condition,
                "notes": b.notes,
            }),
            point,
        },
        Err(reason) => Row {
            model,
            eps: None,
            delta: None,
            valid: false,
            json: json!({
                "model": model_name(model),
                "inputs": inputs,
                "eps": null,
                "delta": null,
                "valid": false,
                "validity_condition": reason,
            }),
            point,
        },
    }
}

fn evaluate(model: ModelName, point: Point, args: &BoundsArgs, seed: u64) -> Result<Row, CliError> {
    let need = |v: Option<f64>, flag: &str| {
        v.ok_or_else(|| usage(format!("model {} needs --{flag}", model_name(model))))
    };
    let n = point
        .n
        .ok_or_else(|| usage(format!("model {} needs --n", model_name(model))))?;
    if model == ModelName::LiewMetric {
        let g = build_graph(&args.graph, Some(n), None, seed)?;
        let metric = bounds::liew_topology_metric(&g, args.rounds)?;
        return Ok(Row {
            model,
            eps: Some(metric.value),
            delta: None,
            valid: true,
            json: json!({
                "model": "liew_metric",
                "inputs": {"graph": describe_graph(&args.graph, &g), "T": args.rounds},
                "value": metric.value,
                "stationary_term": metric.stationary_term,
                "gap": metric.gap,
                "ergodic": metric.ergodic,
                "warning": metric.warning,
                "valid": true,
            }),
            point,
        });
    }
    let delta = need(point.delta, "delta")?;
    if model == ModelName::SubsampleWor {
        let eps = need(point.eps, "eps")?;
        let l = point
            .l
            .ok_or_else(|| usage("model subsample_wor needs --l"))?;
        let b = bounds::subsample_wor(eps, delta, l, n).map_err(|e| e.to_string());
        return Ok(bound_row(model, point, b));
    }
    let eps0 = need(point.eps0, "eps0")?;
    let inputs = BoundInputs::new(eps0, point.delta0, n, delta);
    let b = match model {
        ModelName::Fmt => inputs.map(|i| bounds::fmt_shuffle_bound(&i)),
        ModelName::Netshuffle => inputs.map(|i| bounds::netshuffle_bound(&i)),
        ModelName::SmplWlk => {
            let p = need(point.p, "p")?;
            inputs
                .and_then(|i| i.with_p(p))
                .and_then(|i| bounds::smpl_wlk_bound(&i))
        }
        ModelName::Partial => {
            let l = point.l.ok_or_else(|| usage("model partial needs --l"))?;
            inputs
                .and_then(|i| i.with_l(l))
                .and_then(|i| bounds::partial_shuffle_bound(&i))
        }
        ModelName::SubsampleWor | ModelName::LiewMetric => unreachable!(),
    };
    Ok(bound_row(model, point, b.map_err(|e: Error| e.to_string())))
}

fn axis_values(axis: &Option<Axis>) -> Result<Vec<Option<f64>>, CliError> {
    match axis {
        Some(a) => Ok(a.values()?.into_iter().map(Some).collect()),
        None => Ok(vec![None]),
    }
}

fn axis_counts(axis: &Option<Axis>) -> Result<Vec<Option<usize>>, CliError> {
    match axis {
        Some(a) => Ok(a.counts()?.into_iter().map(Some).collect()),
        None => Ok(vec![None]),
    }
}

/// Cartesian product over the axes `model` reads; unused axes stay unset.
fn grid(model: ModelName, args: &BoundsArgs) -> Result<Vec<Point>, CliError> {
    let axes = model_axes(model);
    let uses = |name: &str| axes.contains(&name);
    let pick_f = |name: &str, axis: &Option<Axis>| -> Result<Vec<Option<f64>>, CliError> {
        if uses(name) {
            axis_values(axis)
        } else {
            Ok(vec![None])
        }
    };
    let pick_c = |name: &str, axis: &Option<Axis>| -> Result<Vec<Option<usize>>, CliError> {
        if uses(name) {
            axis_counts(axis)
        } else {
            Ok(vec![None])
        }
    };
    let delta0s: Vec<f64> = match (&args.delta0, uses("delta0")) {
        (Some(a), true) => a.values()?,
        _ => vec![0.0],
    };
    let mut points = Vec::new();
    for &eps0 in &pick_f("eps0", &args.eps0)? {
        for &n in &pick_c("n", &args.n)? {
            for &delta in &pick_f("delta", &args.delta)? {
                for &delta0 in &delta0s {
                    for &p in &pick_f("p", &args.p)? {
                        for &l in &pick_c("l", &args.l)? {
                            for &eps in &pick_f("eps", &args.eps)? {
                                points.push(Point {
                                    eps0,
                                    n,
                                    delta,
                                    delta0,
                                    p,
                                    l,
                                    eps,
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(points)
}

pub const CSV_HEADER: &str = "model,eps0,n,delta,p,l,eps,delta_out,valid";

fn bounds_cmd(args: &BoundsArgs, seed: u64, sweep: bool, sink: &mut Sink) -> Result<(), CliError> {
    let models = args
        .model
        .clone()
        .filter(|m| !m.is_empty())
        .ok_or_else(|| usage("--model is required"))?;
    let mut rows = Vec::new();
    for &model in &models {
        let points = grid(model, args)?;
        if !sweep && points.len() != 1 {
            return Err(usage(
                "bounds compute takes single values; use bounds sweep for ranges",
            ));
        }
        for point in points {
            rows.push(evaluate(model, point, args, seed)?);
        }
    }
    if !sweep {
        return match rows.as_slice() {
            [row] => sink.json_pretty(&row.json),
            _ => sink.json_pretty(&rows.iter().map(|r| &r.json).collect::<Vec<_>>()),
        };
    }
    let digits = sink.precision;
    let f = |x: Option<f64>| x.map(|v| format_float(v, digits)).unwrap_or_default();
    let c = |x: Option<usize>| x.map(|v| v.to_string()).unwrap_or_default();
    sink.line(CSV_HEADER);
    for row in rows {
        // subsample_wor reports its input ε in the eps0 column.
        let eps_in = match row.model {
            ModelName::SubsampleWor => row.point.eps,
            _ => row.point.eps0,
        };
        let line = format!(
            "{},{},{},{},{},{},{},{},{}",
            model_name(row.model),
            f(eps_in),
            c(row.point.n),
            f(row.point.delta),
            f(row.point.p),
            c(row.point.l),
            f(row.eps),
            f(row.delta),
            row.valid
        );
        sink.line(&line);
    }
    Ok(())
}

fn build_randomizer(args: &RandomizerArgs, n: usize) -> Result<Randomizer, CliError> {
    let eps0 = args.eps0.unwrap_or(1.0);
    Ok(match args.randomizer.unwrap_or(RandomizerName::BinaryRr) {
        RandomizerName::BinaryRr => Randomizer::binary_rr(eps0)?,
        RandomizerName::KaryRr => {
            Randomizer::kary_rr(eps0, args.k.ok_or_else(|| usage("kary_rr needs --k"))?)?
        }
        RandomizerName::Identity => Randomizer::identity(args.k.unwrap_or(n))?,
    })
}

fn build_protocol(
    name: ProtocolName,
    p: Option<f64>,
    clients: &Option<Vec<usize>>,
) -> Result<Protocol, CliError> {
    Ok(match name {
        ProtocolName::RndWlk => Protocol::RndWlk,
        ProtocolName::Infinite => Protocol::Infinite,
        ProtocolName::SmplWlk => Protocol::SmplWlk {
            p: p.ok_or_else(|| usage("smpl_wlk needs a sampling probability"))?,
        },
        ProtocolName::Restricted => Protocol::Restricted {
            clients: clients
                .clone()
                .ok_or_else(|| usage("restricted needs --clients"))?,
        },
    })
}

fn read_data_file(path: &std::path::Path) -> Result<Vec<usize>, CliError> {
    let text = std::fs::read_to_string(path)?;
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| usage(format!("{}: `{s}` is not a symbol", path.display())))
        })
        .collect()
}

/// Client `u` holds `u mod k` unless data is given.
fn default_data(n: usize, k: usize) -> Vec<usize> {
    (0..n).map(|u| u % k).collect()
}

fn simulate(args: &SimulateArgs, seed: u64, sink: &mut Sink) -> Result<(), CliError> {
    let g = build_graph(&args.graph, args.n, None, seed)?;
    let n = g.n();
    let randomizer = build_randomizer(&args.randomizer, n)?;
    let data = match (&args.data, &args.data_file) {
        (Some(_), Some(_)) => return Err(usage("give either --data or --data-file, not both")),
        (Some(d), None) => d.clone(),
        (None, Some(path)) => read_data_file(path)?,
        (None, None) => default_data(n, randomizer.input_size()),
    };
    let protocol = build_protocol(
        args.protocol.unwrap_or(ProtocolName::RndWlk),
        args.p,
        &args.clients,
    )?;
    let cfg = ProtocolConfig::new(g, randomizer, args.rounds.unwrap_or(Rounds::Auto), seed);
    let sim = Simulator::new(&cfg, protocol)?;
    let trials = args.trials.unwrap_or(1);
    if args.summary {
        let summary = sim.destination_summary(&data, trials)?;
        let frequencies = summary.frequencies();
        let mut v = serde_json::to_value(&summary)?;
        v["frequencies"] = serde_json::to_value(frequencies)?;
        return sink.json_line(&v);
    }
    for record in sim.run_trials(&data, trials)? {
        sink.json_line(&record)?;
    }
    Ok(())
}

fn resolve_budget(flag: Option<f64>) -> Result<f64, CliError> {
    let budget = match flag {
        Some(b) => b,
        None => match std::env::var(BUDGET_ENV) {
            Ok(text) => text
                .trim()
                .parse()
                .map_err(|_| usage(format!("{BUDGET_ENV}=`{text}` is not a number")))?,
            Err(_) => DEFAULT_BUDGET,
        },
    };
    if !(budget > 0.0) {
        return Err(usage("budget must be positive"));
    }
    Ok(budget)
}

/// Over-budget enumerations become skipped checks; other errors abort.
fn budgeted(
    check: &str,
    instance: &Value,
    f: impl FnOnce() -> Result<Vec<CheckResult>, CliError>,
) -> Result<Vec<CheckResult>, CliError> {
    match f() {
        Err(CliError::Core(e @ Error::BudgetExceeded { .. })) => Ok(vec![CheckResult::skipped(
            check,
            instance.clone(),
            e.to_string(),
        )]),
        other => other,
    }
}

#[derive(Serialize)]
struct VerifyReport {
    suite: String,
    checks: Vec<CheckResult>,
    pass: bool,
}

fn verify(suite: Suite, args: &VerifyArgs, seed: u64, sink: &mut Sink) -> Result<bool, CliError> {
    let mut graph_args = args.graph.clone();
    if graph_args.topology.is_none() && graph_args.edges.is_none() {
        graph_args.topology = Some(TopologyName::Complete);
    }
    let n_flag = match graph_args.edges {
        Some(_) => args.n,
        None => Some(args.n.unwrap_or(3)),
    };
    let g = build_graph(&graph_args, n_flag, args.p, seed)?;
    let n = g.n();
    let eps0 = args.randomizer.eps0.unwrap_or(1.0);
    let randomizer = build_randomizer(&args.randomizer, n)?;
    let budget = resolve_budget(args.budget)?;
    let delta = args.delta.unwrap_or(1e-6);
    let rounds = args.rounds.unwrap_or(Rounds::Auto);
    let base = args.data.clone().unwrap_or_else(|| vec![0; n]);
    let pair = NeighborPair::new(
        base,
        args.position.unwrap_or(0),
        args.replacement.unwrap_or(1),
    )?;
    let (_, neighbour) = pair.datasets();
    let cfg = ProtocolConfig::new(g.clone(), randomizer.clone(), rounds, seed);
    let mut instance = describe_graph(&graph_args, &g);
    instance["eps0"] = json!(eps0);
    instance["T"] = json!(rounds);

    let run_suite = |s: Suite| s == suite || suite == Suite::All;
    let mut checks = Vec::new();

    if run_suite(Suite::Lemma1) {
        checks.extend(budgeted("lemma1", &instance, || {
            let t = cfg.resolve_rounds()?;
            let report = analysis::lemma1_ratio_check(&g, t, eps0, budget)?;
            let walk =
                analysis::exact_output_distribution(&Protocol::RndWlk, &cfg, &neighbour, budget)?;
            let inf =
                analysis::exact_output_distribution(&Protocol::Infinite, &cfg, &neighbour, budget)?;
            let events =
                analysis::event_ratio_check(&walk, &inf, eps0, n, args.unions.unwrap_or(100), seed);
            let observed = events.max_ratio.ln().max(-events.min_ratio.ln());
            let event_check = CheckResult::new(
                "lemma1_events",
                json!({"graph": instance, "data": neighbour}),
                observed,
                eps0 / (2.0 * n as f64),
                events.pass,
            )
            .with_details(&events);
            Ok(vec![report.to_check(instance.clone()), event_check])
        })?);
    }
    if run_suite(Suite::EmpiricalDp) {
        let protocol = build_protocol(
            args.protocol.unwrap_or(ProtocolName::RndWlk),
            args.sample_p,
            &args.clients,
        )?;
        let mut inst = instance.clone();
        inst["protocol"] = json!(protocol.name());
        inst["delta"] = json!(delta);
        checks.extend(budgeted("empirical_dp", &inst, || {
            let report = analysis::empirical_dp_check(&protocol, &cfg, &pair, delta, budget)?;
            Ok(vec![report.to_check(inst.clone())])
        })?);
    }
    if run_suite(Suite::Mixing) {
        let report = analysis::mixing_check(&g, eps0, MIXING_SLACK)?;
        checks.push(report.to_check(instance.clone()));
    }
    if run_suite(Suite::Concentration) {
        let p = args.concentration_p.unwrap_or(0.5);
        let cn = args.concentration_n.unwrap_or(100);
        let cd = args.concentration_delta.unwrap_or(0.05);
        let trials = args.trials.unwrap_or(10_000);
        let report = analysis::sampling_concentration_check(p, cn, cd, trials, seed)?;
        checks.push(report.to_check(json!({"p": p, "n": cn, "delta": cd, "trials": trials})));
    }
    if run_suite(Suite::Ldp) {
        checks.push(analysis::ldp_check(
            &randomizer,
            json!({"randomizer": randomizer.kind(), "k": randomizer.output_size(), "eps0": randomizer.claimed_eps0()}),
        ));
    }
    if run_suite(Suite::Shuffle) {
        let mut inst = instance.clone();
        inst["data"] = json!(neighbour);
        checks.extend(budgeted("shuffle", &inst, || {
            let r = analysis::shuffle_invariance_check(&cfg, &neighbour, budget)?;
            Ok(vec![CheckResult::new(
                "shuffle",
                inst.clone(),
                r.max_difference,
                r.tolerance,
                r.pass,
            )
            .with_details(&r)])
        })?);
    }

    let skipped = checks
        .iter()
        .any(|c| c.status == analysis::CheckStatus::Skipped);
    let pass = checks.iter().all(|c| c.pass) && !(args.strict && skipped);
    let report = VerifyReport {
        suite: clap::ValueEnum::to_possible_value(&suite)
            .map(|v| v.get_name().to_owned())
            .unwrap_or_default(),
        checks,
        pass,
    };
    sink.json_pretty(&report)?;
    Ok(pass)
}
