use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use online_rnn::analysis::alignment::{alignment_sweep, SWEEP_LEARNERS};
use online_rnn::analysis::gradcheck::{gradcheck, GradcheckReport};
use online_rnn::analysis::memtrace::{memory_trace_r2, InitScheme, MemTraceConfig};
use online_rnn::io;
use online_rnn::train::{run_training, task_stream};
use online_rnn::{Algorithm, RunConfig, TaskKind};

#[derive(Parser)]
#[command(name = "online-rnn", version, about = "Online gradient algorithms for recurrent networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a network online with one learning algorithm.
    Train {
        #[arg(long)]
        task: TaskKind,
        #[arg(long)]
        alg: Algorithm,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 100_000)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// TOML file of `key = value` overrides.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Compare the gradients of every algorithm along one training run.
    Align {
        #[arg(long)]
        task: TaskKind,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 100_000)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Algorithm that trains the network.
        #[arg(long, default_value_t = Algorithm::Rtrl)]
        driver: Algorithm,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decodability of the Add label from an untrained network's state.
    Memtrace {
        #[arg(long)]
        scheme: InitScheme,
        #[arg(long, default_value_t = 20_000)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check exact gradients against each other and finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long, default_value_t = 20)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Dump a task's input and label stream.
    Stream {
        #[arg(long)]
        task: TaskKind,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Train {
            task,
            alg,
            alpha,
            steps,
            seed,
            out,
            config,
        } => {
            let mut run = RunConfig::new(task, alg).with_alpha(alpha).with_steps(steps).with_seed(seed);
            if let Some(path) = config {
                run = run.apply_override_file(&path)?;
            }
            run.validate()?;
            let result = run_training(&run)?;
            io::write_run(&out, &result)?;
            println!(
                "{} on {}: final loss {:.4} after {} updates ({:.1}s)",
                alg, task, result.final_loss, result.w_updates, result.wall_clock_secs
            );
        }
        Command::Align {
            task,
            alpha,
            steps,
            seed,
            driver,
            out,
        } => {
            let run = RunConfig::new(task, driver).with_alpha(alpha).with_steps(steps).with_seed(seed);
            run.validate()?;
            io::ensure_dir(&out)?;
            let mut writer = io::AlignmentWriter::create(&out.join("alignments.csv"))?;
            let mut write_err = None;
            let report = alignment_sweep(&run, &SWEEP_LEARNERS, |r| {
                if write_err.is_none() {
                    write_err = writer.write(r).err();
                }
            })?;
            if let Some(e) = write_err {
                return Err(e.into());
            }
            writer.finish()?;
            io::write_alignment_means(&out.join("alignment_means.json"), &report)?;
            for (pair, m) in report.means() {
                match m.mean {
                    Some(mean) => println!("{pair:>20}  {mean:+.4}  ({} steps)", m.count),
                    None => println!("{pair:>20}  n/a"),
                }
            }
        }
        Command::Memtrace {
            scheme,
            steps,
            seed,
            out,
        } => {
            let config = MemTraceConfig {
                steps,
                seed,
                ..MemTraceConfig::default()
            };
            let results = memory_trace_r2(scheme, &config)?;
            io::write_memtrace(&out, scheme, &config, &results)?;
            for r in &results {
                println!("{:>4}  {:.4}", r.delta_t, r.r_squared);
            }
        }
        Command::Gradcheck { n, steps, seed } => {
            let r = gradcheck(n, steps, seed).context("gradient check failed to run")?;
            println!("n = {}, m = {}, {} steps", r.n, r.m, r.steps);
            println!(
                "max pairwise relative error {:.3e} (tol {:.0e})",
                r.max_pairwise(),
                GradcheckReport::PAIRWISE_TOL
            );
            println!(
                "max relative error vs finite differences {:.3e} (tol {:.0e})",
                r.max_vs_fd(),
                GradcheckReport::FD_TOL
            );
            if !r.passed() {
                bail!("gradient check FAILED");
            }
            println!("gradient check passed");
        }
        Command::Stream {
            task,
            alpha,
            steps,
            seed,
            out,
        } => {
            let run = RunConfig::new(task, Algorithm::FixedW).with_alpha(alpha).with_seed(seed);
            let samples: Vec<_> = task_stream(&run)?.take(steps).collect();
            io::write_stream(&out, &samples)?;
        }
    }
    Ok(())
}
