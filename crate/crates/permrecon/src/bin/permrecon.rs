use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use permrecon::harness::{run_pipeline, Pipeline, RunConfig};
use permrecon::Error;

#[derive(Parser, Debug)]
#[command(name = "permrecon", version, about = "Seeded reconstruction pipelines over space-filling grid curves")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Master seed for every random stage.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for artifacts and report.json.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Plain-text `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Linear solver tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Monte Carlo walks for the harmonic-measure cross-check (0 disables).
    #[arg(long, global = true)]
    walks: Option<usize>,
    #[arg(long, global = true)]
    depth: Option<u32>,
    /// Walk length or ensemble size.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Any config key, as `key=value`; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Grid measure masses.
    Measure,
    /// Mass-parametrized curves and their induced permutation.
    Curves,
    /// Correlated walk pair and its mated-CRT graph.
    Walks,
    /// Permuton of a curve pair and its support.
    Permuton,
    /// Resolved support and its augmentation.
    Augment,
    /// Intersection set from the augmented support or the oracle.
    Tm,
    /// Cell graph rebuilt from the intersection set.
    Graph,
    /// Boundary times, cut times, bipartition and boundary path.
    Geometry,
    /// Tutte embedding aligned to ground-truth cell centers.
    Embed,
    /// Full chain from support to embedding and field recovery.
    Reconstruct,
    /// Log-mass field recovery.
    Recover,
    /// Exhaustive meandric, Baxter or full permutation ensembles.
    Ensembles,
    /// Battery of invariant checks.
    Verify,
    /// Pipeline named by the `pipeline` key of the config.
    Run,
}

impl Command {
    fn pipeline(self) -> Option<Pipeline> {
        Some(match self {
            Command::Measure => Pipeline::Measure,
            Command::Curves => Pipeline::Curves,
            Command::Walks => Pipeline::Walks,
            Command::Permuton => Pipeline::Permuton,
            Command::Augment => Pipeline::Augment,
            Command::Tm => Pipeline::Tm,
            Command::Graph => Pipeline::Graph,
            Command::Geometry => Pipeline::Geometry,
            Command::Embed => Pipeline::Embed,
            Command::Reconstruct => Pipeline::Reconstruct,
            Command::Recover => Pipeline::Recover,
            Command::Ensembles => Pipeline::Ensembles,
            Command::Verify => Pipeline::Verify,
            Command::Run => return None,
        })
    }
}

fn config(cli: &Cli) -> permrecon::Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    cfg.apply_overrides(cli.set.iter().map(String::as_str))?;
    if let Some(p) = cli.command.pipeline() {
        cfg.pipeline = p;
    }
    if let Some(v) = cli.seed {
        cfg.seed = v;
    }
    if let Some(v) = &cli.out {
        cfg.out = v.clone();
    }
    if let Some(v) = cli.tol {
        cfg.tol = v;
    }
    if let Some(v) = cli.threads {
        cfg.threads = Some(v);
    }
    if let Some(v) = cli.walks {
        cfg.walks = v;
    }
    if let Some(v) = cli.depth {
        cfg.depth = v;
    }
    if let Some(v) = cli.n {
        cfg.n = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(t) = cfg.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run_pipeline(&cfg) {
        Ok(report) => {
            for c in &report.checks {
                println!("{} {} {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.value);
            }
            if report.all_invariants_pass() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
