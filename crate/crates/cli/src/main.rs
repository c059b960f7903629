//! `specweak`: similarity graphs, spectral grouping, weak annotation and
//! bag classification from the command line.
//!
//! Exit status: 0 when every check passed, 1 when a check failed, 2 on error.
//! `report.json` is written to the output directory in all three cases.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;

use commands::{write_json, Outcome, Suite};
use config::{BenchArgs, ClassifyArgs, GraphArgs, GroupArgs, InputArgs, RunConfig};
use specweak::experiments::all_hard_passed;

#[derive(Debug, Parser)]
#[command(name = "specweak", version, about = "Weak supervision through spectral grouping")]
struct Cli {
    /// Flat TOML file whose keys mirror the long flags; flags win
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default ./specweak-out)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for grid search and cross-validation
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// -v for progress, -vv for detail
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build one similarity graph and report its connected components
    Graph {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        graph: GraphArgs,
    },
    /// Spectral grouping over a graph grid, scored by Davies–Bouldin or F1
    Group {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        group: GroupArgs,
    },
    /// Weakly label the members of non-strong bags
    Annotate {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        min_group_fraction: Option<f64>,
    },
    /// Fit a classifier on the annotated (or bag-labelled) training set
    Train {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        classify: ClassifyArgs,
        #[arg(long)]
        min_group_fraction: Option<f64>,
    },
    /// Leave-one-bag-out accuracy of weak labels against the bag-label baseline
    Evaluate {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        classify: ClassifyArgs,
        #[arg(long)]
        min_group_fraction: Option<f64>,
    },
    /// Run a bundled experiment suite against its pass/fail thresholds
    Bench {
        #[arg(value_enum)]
        suite: Suite,
        #[command(flatten)]
        bench: BenchArgs,
    },
}

impl Command {
    fn name(&self) -> String {
        match self {
            Command::Graph { .. } => "graph".into(),
            Command::Group { .. } => "group".into(),
            Command::Annotate { .. } => "annotate".into(),
            Command::Train { .. } => "train".into(),
            Command::Evaluate { .. } => "evaluate".into(),
            Command::Bench { suite, .. } => format!("bench {}", suite_name(*suite)),
        }
    }

    /// The flag values as a config layer.
    fn flags(&self) -> RunConfig {
        let mut cfg = RunConfig::default();
        match self {
            Command::Graph { input, graph } => {
                cfg.input = input.clone();
                cfg.graph = graph.clone();
            }
            Command::Group { input, graph, group } => {
                cfg.input = input.clone();
                cfg.graph = graph.clone();
                cfg.group = group.clone();
            }
            Command::Annotate {
                input,
                graph,
                min_group_fraction,
            } => {
                cfg.input = input.clone();
                cfg.graph = graph.clone();
                cfg.group.min_group_fraction = *min_group_fraction;
            }
            Command::Train {
                input,
                graph,
                classify,
                min_group_fraction,
            }
            | Command::Evaluate {
                input,
                graph,
                classify,
                min_group_fraction,
            } => {
                cfg.input = input.clone();
                cfg.graph = graph.clone();
                cfg.classify = classify.clone();
                cfg.group.min_group_fraction = *min_group_fraction;
            }
            Command::Bench { bench, .. } => cfg.bench = bench.clone(),
        }
        cfg
    }
}

fn suite_name(s: Suite) -> &'static str {
    match s {
        Suite::Toyfig => "toyfig",
        Suite::Table2synth => "table2synth",
        Suite::Table1 => "table1",
    }
}

fn run(cli: &Cli, cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let out = cfg.out_dir();
    match &cli.command {
        Command::Graph { .. } => commands::graph(cfg, &out),
        Command::Group { .. } => commands::group(cfg, &out),
        Command::Annotate { .. } => commands::annotate(cfg, &out),
        Command::Train { .. } => commands::train(cfg, &out),
        Command::Evaluate { .. } => commands::evaluate(cfg, &out),
        Command::Bench { suite, .. } => commands::bench(*suite, cfg, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let mut flags = cli.command.flags();
    flags.seed = cli.seed;
    flags.out = cli.out.clone();
    flags.threads = cli.threads;
    let command = cli.command.name();

    let cfg = match RunConfig::merge(cli.config.as_deref(), &flags) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            let fallback = flags.out.clone().unwrap_or_else(|| PathBuf::from("specweak-out"));
            let _ = std::fs::create_dir_all(&fallback).map(|_| {
                write_json(
                    &fallback.join("report.json"),
                    &json!({ "command": command, "passed": false, "error": format!("{e:#}") }),
                )
            });
            return ExitCode::from(2);
        }
    };
    let out = cfg.out_dir();
    if let Err(e) = std::fs::create_dir_all(&out) {
        eprintln!("error: cannot create {}: {e}", out.display());
        return ExitCode::from(2);
    }
    if let Some(t) = cfg.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }

    let start = Instant::now();
    let outcome = run(&cli, &cfg);
    let elapsed = start.elapsed().as_secs_f64();
    let (report, code) = match outcome {
        Ok(o) => {
            let passed = all_hard_passed(&o.checks);
            for c in &o.checks {
                let tag = match (c.passed, c.hard) {
                    (true, _) => "PASS",
                    (false, true) => "FAIL",
                    (false, false) => "SOFT-MISS",
                };
                println!("[{tag}] {}: {}", c.name, c.detail);
            }
            let report = json!({
                "command": command,
                "passed": passed,
                "seed": cfg.seed(),
                "checks": o.checks,
                "result": o.result,
            });
            (report, if passed { 0 } else { 1 })
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            (
                json!({ "command": command, "passed": false, "error": format!("{e:#}") }),
                2,
            )
        }
    };
    // timings live apart from the report so reruns stay byte-identical
    let written = write_json(&out.join("report.json"), &report).and_then(|_| {
        write_json(
            &out.join("timing.json"),
            &json!({ "command": command, "elapsed_s": elapsed }),
        )
    });
    if let Err(e) = written {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    println!("report: {}", out.join("report.json").display());
    ExitCode::from(code)
}
