use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use graphbench_core::builder::{
    annotate_missing, build_draft, enqueue_proposals, ingest_trajectories, supplement_branches, write_draft,
    CurationStore, OracleSuite, PipelineConfig, SupplementConfig,
};
use graphbench_core::engine::{replay, EpisodeLog, ReplayVerdict};
use graphbench_core::graph::{graph_stats, load_graph, validate_graph, Task};
use graphbench_core::harness::{run_eval, AgentFactory, AgentSpec, EvalConfig, ScriptedFactory, TaskFilter};
use graphbench_core::metrics::{aggregate, score_episode, RunMeta};
use graphbench_core::par::Exec;
use graphbench_core::{action::ProfileRegistry, GraphBenchmark};
use graphbench_service::{connect_http_oracle, AppState, CurationConfig, HttpAgentFactory, ServiceConfig};
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

#[derive(Parser)]
#[command(name = "graphbench", version, about = "Graph-structured benchmark for mobile GUI agents")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check a manifest for reachability, box, signature and task problems.
    Validate {
        manifest: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Print graph statistics.
    Stats {
        manifest: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Serve the session protocol over HTTP.
    Serve(ServeArgs),
    /// Run an agent over the tasks and write logs and a report.
    Eval(EvalArgs),
    /// Score existing episode logs.
    Score {
        manifest: PathBuf,
        /// Directory of `*.jsonl` episode logs.
        #[arg(long)]
        logs: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a draft graph from recorded trajectories.
    Merge(MergeArgs),
    /// Fill in missing click boxes and print the annotations.
    Annotate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        oracles: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Propose branches from no-op clicks in probe logs.
    Supplement {
        manifest: PathBuf,
        /// Directory of probe episode logs.
        #[arg(long)]
        probes: PathBuf,
        #[arg(long, default_value_t = 30.0)]
        radius: f64,
        #[arg(long, default_value_t = 1)]
        min_points: usize,
        /// Curation store to queue proposals in.
        #[arg(long)]
        store: Option<PathBuf>,
    },
    /// Re-execute a log against the graph and report the first divergence.
    Replay { manifest: PathBuf, log: PathBuf },
}

#[derive(Args)]
struct ServeArgs {
    manifest: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: String,
    /// Write every session's log here.
    #[arg(long)]
    log_dir: Option<PathBuf>,
    /// Extra parser profiles (`*.json`).
    #[arg(long)]
    profiles: Option<PathBuf>,
    #[arg(long, default_value = "json")]
    default_profile: String,
    /// Curation store; enables the curation and graph inspection routes.
    #[arg(long)]
    store: Option<PathBuf>,
    /// Further screenshot directories served by hash (with --store).
    #[arg(long = "image-dir")]
    image_dirs: Vec<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    manifest: PathBuf,
    /// `oracle[:n]`, `random`, `script:<file>` or an `http(s)://` agent URL.
    #[arg(long)]
    agent: String,
    #[arg(long, default_value = "all")]
    tasks: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "json")]
    profile: String,
    #[arg(long)]
    profiles: Option<PathBuf>,
    /// Per-step timeout for HTTP agents, in seconds.
    #[arg(long, default_value_t = 120)]
    timeout: u64,
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct MergeArgs {
    /// Trajectory corpus directory.
    #[arg(long = "in")]
    input: PathBuf,
    /// Oracle role configuration.
    #[arg(long)]
    oracles: PathBuf,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    max_screens: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    /// Curation store: human decisions are applied, new items queued.
    #[arg(long)]
    store: Option<PathBuf>,
    #[arg(long)]
    sequential: bool,
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load(manifest: &Path) -> Result<GraphBenchmark> {
    load_graph(manifest).with_context(|| format!("loading {}", manifest.display()))
}

fn asset_root(manifest: &Path) -> PathBuf {
    manifest.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn exec(sequential: bool) -> Exec {
    if sequential {
        Exec::Sequential
    } else {
        Exec::Parallel
    }
}

fn profiles(dir: Option<&Path>) -> Result<ProfileRegistry> {
    let mut reg = ProfileRegistry::builtin();
    if let Some(d) = dir {
        reg.load_dir(d)?;
    }
    Ok(reg)
}

fn suite(path: &Path) -> Result<OracleSuite> {
    OracleSuite::from_config(path, Some(&connect_http_oracle)).with_context(|| format!("oracles {}", path.display()))
}

fn read_logs(dir: &Path) -> Result<Vec<(PathBuf, EpisodeLog)>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| dir.display().to_string())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let text = std::fs::read_to_string(&p).with_context(|| p.display().to_string())?;
            let log = EpisodeLog::from_jsonl(&text).with_context(|| p.display().to_string())?;
            Ok((p, log))
        })
        .collect()
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| p.display().to_string()),
        None => {
            use std::io::Write;
            match writeln!(std::io::stdout().lock(), "{text}") {
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                r => Ok(r?),
            }
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.cmd {
        Cmd::Validate { manifest, json } => {
            let g = load(&manifest)?;
            let r = validate_graph(&g);
            if json {
                println!("{}", serde_json::to_string_pretty(&r)?);
            } else if r.is_clean() {
                println!("ok: {} nodes, {} edges, {} tasks", g.nodes.len(), g.edges.len(), g.tasks.len());
            } else {
                for f in &r.findings {
                    println!("{}", serde_json::to_string(f)?);
                }
            }
            Ok(if r.is_clean() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Cmd::Stats { manifest, json } => {
            let s = graph_stats(&load(&manifest)?);
            if json {
                println!("{}", serde_json::to_string_pretty(&s)?);
            } else {
                println!("nodes           {}", s.nodes);
                println!("edges           {} ({} excluding global actions)", s.edges, s.filtered_edges);
                println!("screens         {}", s.screens);
                println!("tasks           {} ({} single-app, {} cross-app)", s.tasks, s.single_app_tasks, s.cross_app_tasks);
                println!("mean out-degree {:.2} (max {})", s.mean_out_degree, s.max_out_degree);
                if let Some(l) = s.mean_optimal_path_length {
                    println!("mean optimal path length {l:.2}");
                }
                for (app, n) in &s.nodes_per_app {
                    println!("  {app}: {n} nodes");
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Serve(a) => serve(a),
        Cmd::Eval(a) => eval(a),
        Cmd::Score { manifest, logs, out } => {
            let g = load(&manifest)?;
            let logs = read_logs(&logs)?;
            if logs.is_empty() {
                bail!("no episode logs found");
            }
            let mut scores = Vec::new();
            let mut tasks: Vec<Task> = Vec::new();
            for (path, log) in &logs {
                let v = replay(&g, log).with_context(|| path.display().to_string())?;
                if let ReplayVerdict::Diverged { step, field, .. } = v {
                    bail!("{}: diverges at step {step} ({field})", path.display());
                }
                let task = g.task(&log.header.task).with_context(|| format!("unknown task `{}`", log.header.task))?;
                scores.push(score_episode(task, log)?);
                tasks.push(task.clone());
            }
            let meta = RunMeta {
                agent: "logs".into(),
                seed: logs[0].1.header.seed,
                manifest_digest: g.digest().to_string(),
                engine_version: env!("CARGO_PKG_VERSION").to_string(),
            };
            let report = aggregate(&scores, &tasks, meta)?;
            if let Some(dir) = &out {
                std::fs::create_dir_all(dir)?;
                std::fs::write(dir.join("report.json"), report.to_json())?;
                std::fs::write(dir.join("report.txt"), report.to_text())?;
            }
            print!("{}", report.to_text());
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Merge(a) => merge(a),
        Cmd::Annotate { input, oracles, out } => {
            let mut ts = ingest_trajectories(&input)?;
            let anns = annotate_missing(&mut ts, &suite(&oracles)?);
            write_or_print(out.as_deref(), &serde_json::to_string_pretty(&anns)?)?;
            let pending = anns.iter().filter(|a| a.result.is_err()).count();
            eprintln!("{} boxes annotated, {pending} pending", anns.len() - pending);
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Supplement { manifest, probes, radius, min_points, store } => {
            let g = load(&manifest)?;
            let logs: Vec<EpisodeLog> = read_logs(&probes)?.into_iter().map(|(_, l)| l).collect();
            let props = supplement_branches(&g, &logs, &SupplementConfig { radius, min_points })?;
            println!("{}", serde_json::to_string_pretty(&props)?);
            if let Some(dir) = store {
                let mut store = CurationStore::open(&dir)?;
                let n = enqueue_proposals(&mut store, &g, &props)?;
                eprintln!("{n} proposals queued");
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Replay { manifest, log } => {
            let g = load(&manifest)?;
            let text = std::fs::read_to_string(&log).with_context(|| log.display().to_string())?;
            let log = EpisodeLog::from_jsonl(&text)?;
            match replay(&g, &log)? {
                ReplayVerdict::Identical => {
                    println!("identical: {} steps{}", log.steps.len(), if log.is_partial() { " (partial)" } else { "" });
                    Ok(ExitCode::SUCCESS)
                }
                ReplayVerdict::Diverged { step, field, expected, actual } => {
                    println!("diverged at step {step}: {field} expected {expected}, got {actual}");
                    Ok(ExitCode::FAILURE)
                }
            }
        }
    }
}

fn eval(a: EvalArgs) -> Result<ExitCode> {
    let g = load(&a.manifest)?;
    let reg = profiles(a.profiles.as_deref())?;
    let factory: Box<dyn AgentFactory> = if a.agent.starts_with("http://") || a.agent.starts_with("https://") {
        let mut f = HttpAgentFactory::new(a.agent.clone(), asset_root(&a.manifest));
        f.timeout = Duration::from_secs(a.timeout);
        Box::new(f)
    } else {
        let spec: AgentSpec = a.agent.parse().map_err(|e: graphbench_core::harness::AgentError| anyhow::anyhow!(e.0))?;
        Box::new(ScriptedFactory::new(spec).map_err(|e| anyhow::anyhow!(e.0))?)
    };
    let cfg = EvalConfig {
        filter: a.tasks.parse::<TaskFilter>().map_err(anyhow::Error::msg)?,
        seed: a.seed.unwrap_or_else(graphbench_core::default_seed),
        out_dir: a.out,
        exec: exec(a.sequential),
        profile: reg.get(&a.profile)?.clone(),
    };
    let run = run_eval(&g, factory.as_ref(), &cfg)?;
    print!("{}", run.report.to_text());
    Ok(ExitCode::SUCCESS)
}

fn merge(a: MergeArgs) -> Result<ExitCode> {
    let ts = ingest_trajectories(&a.input)?;
    let s = suite(&a.oracles)?;
    let mut cfg = PipelineConfig { exec: exec(a.sequential), ..PipelineConfig::default() };
    if let Some(t) = a.threshold {
        cfg.coarse.threshold = t;
    }
    if let Some(k) = a.max_screens {
        cfg.merge.max_screens_per_node = k;
    }
    let mut store = a.store.as_deref().map(CurationStore::open).transpose()?;
    let out = build_draft(ts, &s, store.as_mut(), &cfg)?;
    write_draft(&out.draft, &out.trajectories, &a.out)?;
    let summary = json!({
        "nodes": out.draft.graph.nodes.len(),
        "edges": out.draft.graph.edges.len(),
        "candidates": out.candidates.len(),
        "gaps": out.gaps,
        "excluded": out.excluded,
        "judge_failures": out.judge_failures,
        "report": out.draft.report,
        "enqueued": out.enqueued,
    });
    std::fs::write(a.out.join("merge-report.json"), serde_json::to_string_pretty(&summary)?)?;
    println!(
        "draft: {} nodes, {} edges, {} merge candidates, {} queued",
        out.draft.graph.nodes.len(),
        out.draft.graph.edges.len(),
        out.candidates.len(),
        out.enqueued
    );
    Ok(ExitCode::SUCCESS)
}

fn serve(a: ServeArgs) -> Result<ExitCode> {
    let g = Arc::new(load(&a.manifest)?);
    let mut cfg = ServiceConfig::new(g, asset_root(&a.manifest));
    cfg.log_dir = a.log_dir;
    cfg.profiles = profiles(a.profiles.as_deref())?;
    cfg.profiles.get(&a.default_profile)?;
    cfg.default_profile = a.default_profile;
    if let Some(dir) = &a.store {
        cfg.curation = Some(CurationConfig { store: CurationStore::open(dir)?, image_dirs: a.image_dirs });
    }
    let state = AppState::new(cfg)?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&a.addr).await.with_context(|| a.addr.clone())?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        graphbench_service::serve(listener, state, graphbench_service::shutdown_signal()).await?;
        anyhow::Ok(())
    })?;
    Ok(ExitCode::SUCCESS)
}
