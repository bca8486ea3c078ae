use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use scn_core::sim::experiment::{run_sweep, Experiment, Sweep};
use scn_core::sim::output::{write_cluster_dump, write_energy_cdf, write_summary, write_trace};
use scn_core::{Mode, ScenarioConfig};

/// Small-cell network simulator with clustered sleep/wake learning.
#[derive(Debug, Parser)]
#[command(name = "scn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the configured scenario.
    Run(Common),
    /// Run the scenario at every point of one or more parameter sweeps.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// `ues=10:75:5`, `eps_d=50:400:25`, `theta=0,0.5,1`, `small_cells=...`; repeat for a product.
        #[arg(long, required = true)]
        vary: Vec<Sweep>,
    },
    /// Print the default configuration as TOML.
    Defaults,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of Monte-Carlo runs.
    #[arg(long)]
    runs: Option<usize>,
    /// `classical`, `learning_no_clusters`, `learning_clustered` or `all`.
    #[arg(long)]
    mode: Option<String>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Write per-step station and learner records.
    #[arg(long)]
    trace: bool,
    /// Write the final partition and similarity graph.
    #[arg(long)]
    dump_clusters: bool,
}

impl Common {
    fn load(&self) -> Result<(ScenarioConfig, Vec<Mode>)> {
        let mut cfg = match &self.config {
            Some(path) => ScenarioConfig::from_file(path)
                .with_context(|| format!("reading {}", path.display()))?,
            None => ScenarioConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.run.seed = seed;
        }
        if let Some(runs) = self.runs {
            cfg.run.runs = runs;
        }
        cfg.validate()?;
        let modes = match self.mode.as_deref() {
            None => vec![cfg.run.mode],
            Some("all") => Mode::ALL.to_vec(),
            Some(m) => vec![m.parse()?],
        };
        Ok((cfg, modes))
    }
}

fn write_outputs(common: &Common, experiments: &[Experiment]) -> Result<()> {
    let out: &Path = &common.out;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_summary(&out.join("summary.csv"), experiments)?;
    write_energy_cdf(&out.join("energy_cdf.csv"), experiments)?;
    if common.trace {
        write_trace(out, experiments)?;
    }
    if common.dump_clusters {
        write_cluster_dump(out, experiments)?;
    }
    for e in experiments {
        let a = &e.aggregate;
        eprintln!(
            "{:<22} ues={:<3} cost/bs={:.5} (+-{:.5}) energy/bs={:.2} J load={:.4} clusters={:.2}",
            e.mode.as_str(),
            e.config.layout.ues,
            a.cost_per_bs.mean,
            a.cost_per_bs.ci95,
            a.energy_per_bs.mean,
            a.load.mean,
            a.cluster_count.mean,
        );
    }
    eprintln!("wrote {}", out.display());
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(common) => {
            let (cfg, modes) = common.load()?;
            let experiments = run_sweep(&cfg, &[], &modes, common.trace)?;
            write_outputs(&common, &experiments)
        }
        Command::Sweep { common, vary } => {
            let (cfg, modes) = common.load()?;
            let experiments = run_sweep(&cfg, &vary, &modes, common.trace)?;
            write_outputs(&common, &experiments)
        }
        Command::Defaults => {
            print!("{}", ScenarioConfig::default().to_toml());
            Ok(())
        }
    }
}
