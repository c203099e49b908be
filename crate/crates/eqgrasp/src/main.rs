use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use eqgrasp::pipeline::{eval, gen, sample, stats, train, verify};
use eqgrasp::{Config, Rayon, Result};

#[derive(Parser)]
#[command(name = "eqgrasp", version, about = "Gripper-conditioned grasp pose diffusion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Override a config key, e.g. `--set train.steps=50`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

impl Common {
    fn load(&self) -> Result<(Config, Rayon)> {
        Ok((Config::load(&self.config, &self.overrides)?, Rayon::new(self.threads)?))
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    Quick,
    Full,
}

#[derive(Subcommand)]
enum Command {
    /// Generate objects, grasps, scenes and scans into a dataset directory.
    Gen {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the score model; writes checkpoint.bin and loss.csv.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Continue from `<out>/checkpoint.bin`.
        #[arg(long)]
        resume: bool,
    },
    /// Sample pre-grasp poses for one scene and gripper.
    Sample {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        scene: String,
        #[arg(long)]
        gripper: String,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Iterative-removal evaluation over the dataset's scenes.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Numerical self-checks with measured errors.
    Verify {
        #[arg(long, value_enum, default_value = "quick")]
        level: LevelArg,
        /// Also write the report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the statistics report of a dataset.
    Stats {
        #[arg(long)]
        data: PathBuf,
    },
}

fn table(rows: &[(&str, String)]) {
    let w = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    for (k, v) in rows {
        println!("  {k:<w$}  {v}");
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Gen { common, out } => {
            let (config, pool) = common.load()?;
            let ds = gen::cmd_gen(&config, &out, &pool)?;
            let records: usize = ds.scenes.iter().map(|e| e.records.len()).sum();
            table(&[
                ("objects", ds.objects.len().to_string()),
                ("grippers", ds.grippers.len().to_string()),
                ("object grasps", ds.object_grasps.len().to_string()),
                ("scenes", ds.scenes.len().to_string()),
                ("scene records", records.to_string()),
                ("output", out.display().to_string()),
            ]);
        }
        Command::Train { common, data, out, resume } => {
            let (config, pool) = common.load()?;
            let o = train::cmd_train(&data, &config, &out, resume, &pool)?;
            for (step, loss) in &o.losses {
                println!("step {step} loss {loss}");
            }
            table(&[
                ("parameters", o.checkpoint.values.len().to_string()),
                ("steps", o.checkpoint.steps_done.to_string()),
                ("initial eval loss", o.initial_eval.to_string()),
                ("final eval loss", o.final_eval.to_string()),
                ("checkpoint", out.join("checkpoint.bin").display().to_string()),
            ]);
        }
        Command::Sample { common, checkpoint, data, scene, gripper, count, out } => {
            let (config, pool) = common.load()?;
            let poses = sample::cmd_sample(&checkpoint, &data, &scene, &gripper, count, &config, &out, &pool)?;
            table(&[("poses", poses.len().to_string()), ("output", out.display().to_string())]);
        }
        Command::Eval { common, checkpoint, data, out } => {
            let (config, pool) = common.load()?;
            let report = eval::cmd_eval(&checkpoint, &data, &config, &out, &pool)?;
            print!("{}", report.to_text());
            let rounds: usize = report.scenes.iter().map(|s| s.rounds.len()).sum();
            table(&[
                ("scenes", report.scenes.len().to_string()),
                ("rounds", rounds.to_string()),
                ("success rate %", format!("{:.2}", report.success_rate)),
            ]);
        }
        Command::Verify { level, out } => {
            let level = match level {
                LevelArg::Quick => verify::Level::Quick,
                LevelArg::Full => verify::Level::Full,
            };
            let (report, secs) = verify::run(level, verify::Mutation::None);
            let text = report.to_text();
            print!("{text}");
            if let Some(out) = out {
                eqgrasp::formats::write_bytes(&out, text.as_bytes())?;
            }
            let failed = report.checks.iter().filter(|c| !c.passed).count();
            table(&[
                ("checks", report.checks.len().to_string()),
                ("failed", failed.to_string()),
                ("seconds", format!("{secs:.1}")),
            ]);
            return Ok(report.passed());
        }
        Command::Stats { data } => {
            print!("{}", stats::cmd_stats(&data)?);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
