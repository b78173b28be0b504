//! `fedrecon` command-line front end.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fedrecon::config::{Preset, RunConfig};
use fedrecon::fed::{Aggregation, EmaMode};
use fedrecon::par::{self, Execution};
use fedrecon::pipeline;
use fedrecon::{Error, Result};

#[derive(Parser)]
#[command(name = "fedrecon", version, about = "Federated architecture search for unrolled MRI reconstruction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic multi-client phantom archive.
    MakeData {
        #[command(flatten)]
        common: Common,
    },
    /// Federated architecture search; writes genotype.txt, supernet.ckpt, search_log.csv.
    Search {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
    },
    /// Federated training of a genotype; writes model.ckpt and train_log.csv.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        genotype: PathBuf,
    },
    /// Per-client and pooled test PSNR/SSIM against the zero-filled baseline.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        genotype: PathBuf,
        /// Also dump 16-bit PGM images of every test sample.
        #[arg(long)]
        images: bool,
    },
    /// Summarize every evaluated run below a directory.
    Report {
        /// Directory whose subdirectories hold eval.csv files.
        #[arg(long)]
        run: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum EmaArg {
    On,
    Off,
    Literal,
}

#[derive(Clone, Copy, ValueEnum)]
enum AggArg {
    Weighted,
    Uniform,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Desk,
    Paper,
}

#[derive(Args)]
struct Common {
    /// TOML file overriding the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "desk")]
    preset: PresetArg,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Rounds for the phase this command runs.
    #[arg(long)]
    rounds: Option<usize>,
    /// Worker thread cap (1 runs sequentially).
    #[arg(long)]
    threads: Option<usize>,
    /// Replace a non-empty output directory.
    #[arg(long)]
    force: bool,
    #[arg(long, value_enum)]
    ema: Option<EmaArg>,
    #[arg(long, value_enum)]
    agg: Option<AggArg>,
}

enum Which {
    Search,
    Train,
    Other,
}

impl Common {
    fn resolve(&self, which: Which) -> Result<RunConfig> {
        let preset = match self.preset {
            PresetArg::Desk => Preset::Desk,
            PresetArg::Paper => Preset::Paper,
        };
        let text = match &self.config {
            Some(p) => std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
            None => String::new(),
        };
        let mut cfg = RunConfig::from_toml(&text, preset)?;
        if let Some(s) = self.seed {
            cfg.fed.seed = s;
        }
        if let Some(r) = self.rounds {
            match which {
                Which::Search => cfg.fed.search.rounds = r,
                Which::Train => cfg.fed.train.rounds = r,
                Which::Other => return Err(Error::Config("--rounds applies to search and train only".into())),
            }
        }
        if let Some(e) = self.ema {
            cfg.fed.train.ema = match e {
                EmaArg::On => EmaMode::On,
                EmaArg::Off => EmaMode::Off,
                EmaArg::Literal => EmaMode::Literal,
            };
        }
        if let Some(a) = self.agg {
            cfg.fed.aggregation = match a {
                AggArg::Weighted => Aggregation::Weighted,
                AggArg::Uniform => Aggregation::Uniform,
            };
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn out(&self) -> Result<&Path> {
        self.out.as_deref().ok_or_else(|| Error::Config("--out is required".into()))
    }

    fn execution(&self) -> Execution {
        if self.threads == Some(1) {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::MakeData { common } => {
            let cfg = common.resolve(Which::Other)?;
            let out = common.out()?;
            let s = pipeline::make_data(&cfg, out, common.force)?;
            println!("wrote {} clients to {}", s.samples_per_client.len(), out.display());
            for (c, n) in s.samples_per_client.iter().enumerate() {
                println!("  client {c}: {n} samples");
            }
            println!("sha256 {}", s.digest);
        }
        Command::Search { common, data } => {
            let cfg = common.resolve(Which::Search)?;
            let out = common.out()?;
            let g = par::with_threads(common.threads, || {
                pipeline::search(&cfg, &data, out, common.force, common.execution())
            })?;
            print!("{}", g.to_text());
        }
        Command::Train { common, data, genotype } => {
            let cfg = common.resolve(Which::Train)?;
            let out = common.out()?;
            let net = par::with_threads(common.threads, || {
                pipeline::train(&cfg, &genotype, &data, out, common.force, common.execution())
            })?;
            println!("trained {} weights, λ = {:.6}", net.weight_count(), net.lambda());
        }
        Command::Eval { common, data, checkpoint, genotype, images } => {
            let cfg = common.resolve(Which::Other)?;
            let out = common.out.as_deref();
            let s = par::with_threads(common.threads, || {
                pipeline::eval(&cfg, &checkpoint, &genotype, &data, out, images, common.execution())
            })?;
            print!("{}", s.to_table());
        }
        Command::Report { run } => {
            let (text, _) = pipeline::report(&run)?;
            print!("{text}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
