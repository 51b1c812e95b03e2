use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use d2dsim::sim::{self, Algorithm, Arm, SweepResult, SweepSpec};
use d2dsim::{Error, Execution, SystemConfig};

#[derive(Parser)]
#[command(
    name = "d2dsim",
    version,
    about = "Resource allocation simulator for D2D links underlaid on a cellular cell"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the chosen algorithms once on one seeded network.
    Trial(Common),
    /// Sweep one parameter over several values.
    Sweep {
        /// Parameter and values, e.g. `delta_gamma=50,125,250,1250,2500`.
        #[arg(long)]
        sweep: SweepSpec,
        #[command(flatten)]
        common: Common,
    },
    /// Graph coloring at several delta_gamma values against the coalition
    /// game on the same networks.
    Compare {
        #[arg(long, value_delimiter = ',', default_value = "50,125,250,1250,2500")]
        deltas: Vec<f64>,
        /// Also run the no-reuse benchmark.
        #[arg(long)]
        no_reuse: bool,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// TOML config file; unset keys keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config value, e.g. `--set n_d2d=20`. Repeatable.
    #[arg(long = "set", value_name = "NAME=VALUE")]
    overrides: Vec<String>,
    /// Base seed; trial t uses seed + t. Defaults to the config's rng_seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of trials (sweep and compare).
    #[arg(long, default_value_t = 20)]
    trials: usize,
    /// Comma-separated: vertex_coloring (vc), coalitional_game (cg), no_reuse (nr).
    #[arg(long, value_delimiter = ',', default_value = "vc,cg,nr")]
    algorithms: Vec<Algorithm>,
    /// Per-trial CSV path; stdout when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Summary CSV path; defaults to `<output stem>.summary.csv` next to the
    /// per-trial file.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Leave the wall-time columns empty so repeated runs give identical files.
    #[arg(long)]
    no_timing: bool,
    /// Run on the calling thread only.
    #[arg(long)]
    sequential: bool,
}

impl Common {
    fn load_config(&self) -> d2dsim::Result<SystemConfig> {
        let mut config = match &self.config {
            Some(path) => SystemConfig::from_file(path)?,
            None => SystemConfig::default(),
        };
        for kv in &self.overrides {
            let (name, value) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{kv}` is not NAME=VALUE")))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("override `{kv}` has a non-numeric value")))?;
            config.set_param(name.trim(), value)?;
        }
        config.validate()?;
        Ok(config)
    }

    fn exec(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }
}

fn summary_path(output: &Path) -> PathBuf {
    let stem = output
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("results");
    output.with_file_name(format!("{stem}.summary.csv"))
}

fn emit(result: &SweepResult, common: &Common) -> d2dsim::Result<()> {
    let timing = !common.no_timing;
    match &common.output {
        Some(path) => {
            sim::write_trials_csv(BufWriter::new(File::create(path)?), &result.rows, timing)?;
            let summary = common.summary.clone().unwrap_or_else(|| summary_path(path));
            sim::write_summary_csv(
                BufWriter::new(File::create(summary)?),
                &result.summary,
                timing,
            )?;
        }
        None => {
            sim::write_trials_csv(io::stdout().lock(), &result.rows, timing)?;
            if let Some(summary) = &common.summary {
                sim::write_summary_csv(
                    BufWriter::new(File::create(summary)?),
                    &result.summary,
                    timing,
                )?;
            }
        }
    }
    Ok(())
}

fn run(cli: Cli) -> d2dsim::Result<()> {
    match cli.command {
        Command::Trial(common) => {
            let config = common.load_config()?;
            let seed = common.seed.unwrap_or(config.rng_seed);
            let arm = Arm {
                swept_value: None,
                config,
                algorithms: common.algorithms.clone(),
            };
            let result = sim::run_arms(&[arm], 1, seed, common.exec())?;
            emit(&result, &common)
        }
        Command::Sweep { sweep, common } => {
            let config = common.load_config()?;
            let seed = common.seed.unwrap_or(config.rng_seed);
            let result = sim::run_sweep(
                &config,
                &sweep,
                &common.algorithms,
                common.trials,
                seed,
                common.exec(),
            )?;
            emit(&result, &common)
        }
        Command::Compare {
            deltas,
            no_reuse,
            common,
        } => {
            let config = common.load_config()?;
            let seed = common.seed.unwrap_or(config.rng_seed);
            let mut extra = vec![Algorithm::CoalitionalGame];
            if no_reuse {
                extra.push(Algorithm::NoReuse);
            }
            let result =
                sim::run_compare(&config, &deltas, &extra, common.trials, seed, common.exec())?;
            emit(&result, &common)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(io::stderr(), "error: {e}");
            match e {
                Error::Inconsistent(_) | Error::NumericFailure(_) | Error::DegenerateRates(..) => {
                    ExitCode::from(2)
                }
                _ => ExitCode::from(1),
            }
        }
    }
}
