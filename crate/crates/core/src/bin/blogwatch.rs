use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use clap::{Parser, Subcommand};

use blogwatch::graph::{FrontierGraph, NodeStatus, DEFAULT_MAX_NODES};
use blogwatch::harness::{generate_world, materialize, WorldSpec};
use blogwatch::pipeline::{run, ConfigError, Mode, RunConfig, RunError, RunReport};

#[derive(Parser)]
#[command(name = "blogwatch", version, about = "Blog discovery and focused crawling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the crawler.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_parser = ["online", "batch"])]
        mode: Option<String>,
        /// Fixture directory or world spec file.
        #[arg(long)]
        fixture: Option<PathBuf>,
        #[arg(long)]
        max_pages: Option<usize>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Render a report file or summarize a graph checkpoint.
    Report { path: PathBuf },
    /// Write a synthetic world to disk.
    GenFixture {
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Config(c) => Failure::Config(c.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run { config, mode, fixture, max_pages, report } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(m) = mode {
                cfg.mode = m.parse::<Mode>().map_err(Failure::Config)?;
            }
            if let Some(f) = fixture {
                cfg.fixture = Some(f);
            }
            if let Some(n) = max_pages {
                cfg.max_pages = n;
            }
            cfg.validate()?;
            let stop = Arc::new(AtomicBool::new(false));
            let flag = stop.clone();
            ctrlc::set_handler(move || flag.store(true, Ordering::SeqCst))
                .map_err(|e| Failure::Runtime(format!("signal handler: {e}")))?;
            let r = run(&cfg, report.as_deref(), stop)?;
            print!("{}", r.render());
            Ok(())
        }
        Command::Report { path } => {
            let text = std::fs::read_to_string(&path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
            if text.starts_with("N\t") || text.starts_with("E\t") || text.is_empty() {
                let g = FrontierGraph::from_checkpoint(&text, DEFAULT_MAX_NODES).map_err(|e| Failure::Runtime(e.to_string()))?;
                print!("{}", render_graph(&g));
            } else {
                let r = RunReport::parse(&text).map_err(|e| Failure::Runtime(e.to_string()))?;
                print!("{}", r.render());
            }
            Ok(())
        }
        Command::GenFixture { spec, out } => {
            let spec = match spec {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?;
                    WorldSpec::parse(&text).map_err(|e| Failure::Config(e.to_string()))?
                }
                None => WorldSpec::default(),
            };
            let world = generate_world(&spec).map_err(|e| Failure::Config(e.to_string()))?;
            materialize(&world, &out).map_err(|e| Failure::Runtime(e.to_string()))?;
            println!("{} sites, {} changes documents written to {}", world.sites.len(), world.ping_script.len(), out.display());
            Ok(())
        }
    }
}

fn render_graph(g: &FrontierGraph) -> String {
    let counts = g.status_counts();
    let mut out = format!("nodes     {:>8}\nedges     {:>8}\nfrontier  {:>8}\n", g.len(), g.edge_count(), g.frontier_len());
    for s in [NodeStatus::Unfetched, NodeStatus::Fetched, NodeStatus::Failed, NodeStatus::Excluded] {
        out.push_str(&format!("{:<9} {:>8}\n", s.as_str(), counts.get(&s).copied().unwrap_or(0)));
    }
    let mut top: Vec<_> = g.nodes().filter(|n| n.status == NodeStatus::Unfetched && n.priority > 0.0).collect();
    top.sort_by(|a, b| b.priority.total_cmp(&a.priority).then_with(|| a.url.cmp(&b.url)));
    if !top.is_empty() {
        out.push_str("\nhighest-priority frontier\n");
        for n in top.iter().take(10) {
            out.push_str(&format!("  {:>10.3}  {}\n", n.priority, n.url));
        }
    }
    out
}
