use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fedecg::experiment::{cmd_compare, cmd_run, cmd_synth, DataConfig, ExperimentConfig};
use fedecg::Error;

/// Federated ECG arrhythmia classification experiments.
#[derive(Debug, Parser)]
#[command(name = "fedecg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic dataset (manifest plus one file per record).
    Synth {
        /// Experiment config; only its [data] table is used.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated class codes, overriding the config.
        #[arg(long, value_delimiter = ',')]
        classes: Option<Vec<String>>,
        #[arg(long)]
        per_class: Option<usize>,
    },
    /// Run one experiment and write its report.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Report directory, overriding the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Tabulate finished runs into one CSV.
    Compare {
        /// Report directories.
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn synth(
    config: Option<PathBuf>,
    out: PathBuf,
    seed: Option<u64>,
    classes: Option<Vec<String>>,
    per_class: Option<usize>,
) -> Result<(), Error> {
    let (mut data, cfg_seed) = match config {
        Some(p) => {
            let cfg = ExperimentConfig::load(p)?;
            (cfg.data, cfg.seed)
        }
        None => (DataConfig::default(), 0),
    };
    if let Some(c) = classes {
        data.classes = c;
    }
    if let Some(n) = per_class {
        data.per_class = n;
    }
    let (manifest, counts) = cmd_synth(&data, seed.unwrap_or(cfg_seed), &out)?;
    for (class, n) in counts {
        println!("{class}\t{n}");
    }
    println!("manifest\t{}", manifest.display());
    Ok(())
}

fn run(config: PathBuf, out: Option<PathBuf>, seed: Option<u64>) -> Result<(), Error> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(o) = out {
        cfg.out = o;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    for o in cmd_run(&cfg)? {
        println!(
            "{}\tN={}\tf1={:.4}\taccuracy={:.4}\trounds={}\t{}",
            o.info.scenario,
            o.info.clients,
            o.history.test.f1,
            o.history.test.accuracy,
            o.history.rounds.len(),
            o.dir.map(|d| d.display().to_string()).unwrap_or_default()
        );
    }
    Ok(())
}

fn compare(reports: Vec<PathBuf>, out: PathBuf) -> Result<(), Error> {
    for r in cmd_compare(&reports, &out)? {
        println!("{}\t{}\t{}\tN={}\tf1={:.4}\taccuracy={:.4}", r.scenario, r.model, r.balancing, r.n, r.f1, r.accuracy);
    }
    Ok(())
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("error kind=usage: {}", one_line(&e.to_string()));
            return ExitCode::from(1);
        }
    };
    let result = match cli.command {
        Command::Synth { config, out, seed, classes, per_class } => synth(config, out, seed, classes, per_class),
        Command::Run { config, out, seed } => run(config, out, seed),
        Command::Compare { reports, out } => compare(reports, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error kind={}: {}", e.kind(), one_line(&e.to_string()));
            ExitCode::from(if e.is_user_error() { 1 } else { 2 })
        }
    }
}
