use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use sdnsync::agent::Checkpoint;
use sdnsync::harness::{
    self, describe_actions, evaluate_agent, replica_metrics, run_experiment, run_sweep, write_episodes, ExperimentConfig,
    PolicyKind, SweepParam, SUMMARY_METRICS,
};
use sdnsync::record::Phase;

#[derive(Parser)]
#[command(name = "sdnsync", version, about = "SDN controller synchronization and placement simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON experiment config; defaults are used for missing sections.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Single master seed (overrides run.seeds).
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Comma-separated master seeds (overrides run.seeds).
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Output directory (overrides run.out_dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Policies to run; repeatable or comma-separated.
    #[arg(long, value_delimiter = ',')]
    policy: Option<Vec<PolicyKind>>,
    /// Save agent checkpoints every N training episodes.
    #[arg(long)]
    checkpoint_every: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the topology of one seed and print or save it as JSON.
    GenerateTopology {
        #[command(flatten)]
        common: Common,
    },
    /// Train the learning agent and evaluate it greedily.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Greedy evaluation of a saved agent, or evaluation rollouts of a baseline.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Agent checkpoint, required for ddrl.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Run every configured policy over every seed and summarize.
    Compare {
        #[command(flatten)]
        common: Common,
    },
    /// Repeat the comparison over values of one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// tau, budget_fraction or num_domains.
        #[arg(long)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Print the flat action ordering for the configured environment.
    DescribeActions {
        #[command(flatten)]
        common: Common,
    },
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.run.seeds = vec![seed];
        }
        if let Some(seeds) = &self.seeds {
            cfg.run.seeds = seeds.clone();
        }
        if let Some(out) = &self.out {
            cfg.run.out_dir = out.clone();
        }
        if let Some(policies) = &self.policy {
            cfg.run.policies = policies.clone();
        }
        if self.checkpoint_every.is_some() {
            cfg.run.checkpoint_every = self.checkpoint_every;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print_summary(summary: &harness::ExperimentSummary) {
    for p in &summary.policies {
        let cols: Vec<String> = SUMMARY_METRICS
            .iter()
            .zip(p.mean.iter().zip(&p.std))
            .map(|(m, (mean, std))| format!("{m}={mean:.4}±{std:.4}"))
            .collect();
        println!("{:<12} {}", p.policy.name(), cols.join(" "));
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::GenerateTopology { common } => {
            let cfg = common.load()?;
            let seed = cfg.run.seeds[0];
            let json = cfg.topology(seed)?.to_json()?;
            match common.out {
                Some(dir) => {
                    fs::create_dir_all(&dir)?;
                    let path = dir.join(format!("topology_{seed}.json"));
                    fs::write(&path, json)?;
                    eprintln!("wrote {}", path.display());
                }
                None => println!("{json}"),
            }
        }
        Command::Train { common } => {
            let mut cfg = common.load()?;
            cfg.run.policies = vec![PolicyKind::Ddrl];
            // always keep the final agent
            cfg.run.checkpoint_every.get_or_insert(cfg.agent.episodes);
            print_summary(&run_experiment(&cfg)?);
        }
        Command::Evaluate { common, checkpoint } => {
            let cfg = common.load()?;
            fs::create_dir_all(&cfg.run.out_dir)?;
            let policy = match cfg.run.policies.as_slice() {
                [p] => *p,
                _ if common.policy.is_none() => PolicyKind::Ddrl,
                _ => bail!("evaluate takes a single --policy"),
            };
            for &seed in &cfg.run.seeds {
                let records = match policy {
                    PolicyKind::Ddrl => {
                        let Some(path) = &checkpoint else {
                            bail!("evaluating ddrl needs --checkpoint");
                        };
                        let mut agent = Checkpoint::load(path)?.restore()?;
                        evaluate_agent(&cfg, &mut agent, seed)?
                    }
                    baseline => harness::run_replica(&cfg, baseline, seed, None)?
                        .into_iter()
                        .filter(|r| r.phase == Phase::Eval)
                        .collect(),
                };
                let path = cfg.run.out_dir.join(format!("eval_{policy}_{seed}.csv"));
                write_episodes(&path, &records)?;
                let m = replica_metrics(&records);
                let cols: Vec<String> = SUMMARY_METRICS.iter().zip(m).map(|(k, v)| format!("{k}={v:.4}")).collect();
                println!("{policy} seed {seed}: {}", cols.join(" "));
            }
        }
        Command::Compare { common } => {
            let cfg = common.load()?;
            print_summary(&run_experiment(&cfg)?);
        }
        Command::Sweep { common, param, values } => {
            let cfg = common.load()?;
            for (value, summary) in run_sweep(&cfg, param, &values)? {
                println!("{param} = {value}");
                print_summary(&summary);
            }
        }
        Command::DescribeActions { common } => {
            let cfg = common.load()?;
            print!("{}", describe_actions(&cfg, cfg.run.seeds[0])?);
        }
    }
    Ok(())
}
