use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use fedcref_cli::{aggregate_dir, presets, resolve_config, Aggregate, ConfigLayer, ExperimentConfig};

#[derive(Parser)]
#[command(name = "fedcref", version, about = "Federated cluster-wise refinement simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML file with any of the keys accepted as flags (snake_case).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Start from a catalog preset; see `fedcref presets`.
    #[arg(long)]
    preset: Option<String>,
    #[command(flatten)]
    layer: ConfigLayer,
}

impl Common {
    fn resolve(self) -> anyhow::Result<ExperimentConfig> {
        let cfg = resolve_config(self.preset.as_deref(), self.config.as_deref(), self.layer)?;
        if cfg.threads > 0 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.threads)
                .build_global()
                .context("configuring the thread pool")?;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build and save the federation snapshot of every seed.
    Generate(Common),
    /// Run the full experiment for every seed and aggregate.
    Run(Common),
    /// List the preset catalog.
    Presets,
    /// Re-aggregate existing run directories.
    Metrics {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
    },
}

fn print_aggregate(agg: &Aggregate) {
    println!("{:<22} {:>4} {:>12} {:>10}", "metric", "n", "mean", "ci95");
    for s in &agg.stats {
        let ci = s.ci95.map(|c| format!("{c:.4}")).unwrap_or_else(|| "-".into());
        println!("{:<22} {:>4} {:>12.4} {:>10}", s.metric, s.n, s.mean, ci);
    }
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Presets => {
            for p in presets::catalog() {
                println!("{:<20} {}", p.name, p.description);
            }
        }
        Command::Generate(common) => {
            let cfg = common.resolve()?;
            for path in fedcref_cli::experiment::generate(&cfg)? {
                println!("{}", path.display());
            }
        }
        Command::Run(common) => {
            let cfg = common.resolve()?;
            let report = fedcref_cli::run_experiment(&cfg)
                .with_context(|| format!("running into {}", cfg.out.display()))?;
            for run in &report.runs {
                let (s, f) = (&run.summary, &run.summary.final_metrics);
                println!(
                    "seed {:>4}: {:?} after {} iterations, |G| {} |I| {} wrong {:.1}% ACC {:.3} -> {:.3} ({:.1}s)",
                    s.seed,
                    s.termination,
                    s.iterations,
                    f.communities_found,
                    f.isolated_count,
                    f.wrong_assoc_pct,
                    s.initial.mean_acc,
                    f.mean_acc,
                    s.metadata.wall_time_secs
                );
            }
            print_aggregate(&report.aggregate);
        }
        Command::Metrics { dirs } => {
            for dir in dirs {
                let agg = aggregate_dir(&dir).with_context(|| format!("aggregating {}", dir.display()))?;
                println!("{}", dir.display());
                print_aggregate(&agg);
            }
        }
    }
    Ok(())
}
