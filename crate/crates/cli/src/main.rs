use std::net::TcpListener;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use phlayout_core::persistence::compute_barcode;
use phlayout_core::session::batch::{run_batch, BatchConfig};
use phlayout_core::session::server::{serve, TARGET_FPS};
use phlayout_core::session::{read_graph, LoadGraph, Message, Reply, Session, DEFAULT_SEED, SEED_ENV};
use phlayout_core::weighting::{weigh, WeightingMode};

#[derive(Parser)]
#[command(name = "phlayout", version, about = "Persistence-steered graph layout")]
struct Cli {
    /// Seed for the initial layout and jitter.
    #[arg(long, global = true, env = SEED_ENV, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct WeightingArgs {
    /// Ego-network radius for Jaccard weights [default: 1 when mean degree >= 4, else 2]
    #[arg(long)]
    hops: Option<usize>,
    /// jaccard or given
    #[arg(long)]
    weighting: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Serve a live session over line-delimited JSON on TCP.
    Serve {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = 7878)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// on, off or auto (at most 500 edges)
        #[arg(long, default_value = "auto")]
        bundle: String,
        #[command(flatten)]
        weighting: WeightingArgs,
    },
    /// Run a scripted layout from a TOML config and write its artifacts.
    Batch {
        #[arg(long)]
        config: PathBuf,
        /// SVG style JSON; overrides the config's `style`.
        #[arg(long)]
        style: Option<PathBuf>,
        /// Overrides the config's `bundle`.
        #[arg(long)]
        bundle: Option<String>,
        #[command(flatten)]
        weighting: WeightingArgs,
    },
    /// Print the barcode of a graph as JSON.
    Barcode {
        #[arg(long)]
        graph: PathBuf,
        #[command(flatten)]
        weighting: WeightingArgs,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Barcode { graph, weighting } => {
            let g = read_graph(&graph, None)?;
            let mode = match &weighting.weighting {
                Some(m) => m.parse::<WeightingMode>().map_err(anyhow::Error::msg)?,
                None => WeightingMode::Jaccard,
            };
            let wg = weigh(&g, mode, weighting.hops)?;
            let barcode = compute_barcode(&wg);
            println!("{}", serde_json::to_string_pretty(&barcode.export(wg.graph()))?);
            Ok(())
        }
        Command::Batch {
            config,
            style,
            bundle,
            weighting,
        } => {
            let mut batch = BatchConfig::from_path(&config)?;
            if style.is_some() {
                batch.style = style;
            }
            if bundle.is_some() {
                batch.bundle = bundle;
            }
            if let Some(w) = weighting.weighting {
                batch.weighting = w;
            }
            if weighting.hops.is_some() {
                batch.hops = weighting.hops;
            }
            let outcome = run_batch(&batch, cli.seed)?;
            println!("wrote {}", outcome.output_dir.display());
            println!("{}", serde_json::to_string(&outcome.metrics)?);
            Ok(())
        }
        Command::Serve {
            graph,
            port,
            host,
            bundle,
            weighting,
        } => {
            let mut session = Session::new(cli.seed);
            let replies = session.handle(Message::LoadGraph(LoadGraph {
                path: Some(graph.display().to_string()),
                weighting: weighting.weighting,
                hops: weighting.hops,
                bundle: Some(bundle),
                ..LoadGraph::default()
            }));
            if let Some(Reply::Error { message, .. }) = replies.last() {
                bail!("{}: {message}", graph.display());
            }
            let listener = TcpListener::bind((host.as_str(), port)).with_context(|| format!("binding {host}:{port}"))?;
            println!("listening on {}", listener.local_addr()?);
            serve(listener, &mut session, TARGET_FPS)?;
            Ok(())
        }
    }
}
