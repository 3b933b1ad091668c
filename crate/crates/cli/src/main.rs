//! `nats`: runs the thermalization studies and writes plot data.

mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nats_core::experiments::{
    fit_fig2, fit_power_law, run_fig2, run_robustness, run_stddev_scaling, run_tomography_demo, write_fig2_csv,
    write_robustness_csv, write_stddev_csv, ExperimentConfig, FitResult, Prep, TimeMode,
};
use nats_core::{Boundary, Engine, Error, Result};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "nats", version, about = "Spin-chain thermalization to the non-Abelian thermal state")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Relative entropies to the NATS, canonical and grand-canonical states
    Fig2(Fig2Args),
    /// Charge standard deviations after soft measurements, with power-law fits
    Stddev(StddevArgs),
    /// Thermalization under an anisotropic coupling, with or without the echo
    Robustness(RobustnessArgs),
    /// Tomography of the two-qubit reduced state
    Tomo(TomoArgs),
    /// Power-law fit of two columns of a CSV file
    Fit(FitArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

#[derive(Args)]
struct Common {
    /// TOML or JSON experiment config
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated chain sizes, e.g. 6,8,10
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    #[arg(long, value_parser = parse_time_mode)]
    time_mode: Option<TimeMode>,
    #[arg(long, value_enum, default_value = "csv")]
    out: OutFormat,
    /// Write here instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
    /// Allow sizes above 12
    #[arg(long)]
    long_run: bool,
    #[arg(long, value_parser = parse_engine)]
    engine: Option<Engine>,
    #[arg(long, value_parser = parse_boundary)]
    boundary: Option<Boundary>,
}

#[derive(Args)]
struct Fig2Args {
    #[command(flatten)]
    common: Common,
    /// Boundary assumed by the β, μ formulas; must match the chain
    #[arg(long, value_parser = parse_boundary)]
    beta_formula: Option<Boundary>,
    #[arg(long, value_parser = parse_prep)]
    prep: Option<Prep>,
}

#[derive(Args)]
struct StddevArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Args)]
struct RobustnessArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    no_echo: bool,
    #[arg(long)]
    echo_steps: Option<usize>,
}

#[derive(Args)]
struct TomoArgs {
    #[command(flatten)]
    common: Common,
    /// Shots per basis; 0 uses exact probabilities
    #[arg(long)]
    shots: Option<u64>,
}

#[derive(Args)]
struct FitArgs {
    /// CSV file with a header row
    input: PathBuf,
    #[arg(long, default_value = "R")]
    x: String,
    #[arg(long, default_value = "D_nats")]
    y: String,
    #[arg(long, value_enum, default_value = "csv")]
    out: OutFormat,
}

fn parse_time_mode(s: &str) -> std::result::Result<TimeMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_engine(s: &str) -> std::result::Result<Engine, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_boundary(s: &str) -> std::result::Result<Boundary, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_prep(s: &str) -> std::result::Result<Prep, String> {
    match s {
        "product_siii" | "product" => Ok(Prep::ProductSiii),
        "soft_measurement" | "soft" => Ok(Prep::SoftMeasurement),
        other => Err(format!("unknown preparation '{other}'")),
    }
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => config::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(sizes) = &self.sizes {
            cfg.sizes = Some(sizes.clone());
        }
        if let Some(mode) = self.time_mode {
            cfg.time_mode = mode;
        }
        if let Some(engine) = self.engine {
            cfg.engine = Some(engine);
        }
        if let Some(b) = self.boundary {
            cfg.chain.boundary = b;
        }
        if let Some(out) = &self.output {
            cfg.output = Some(out.clone());
        }
        cfg.long_run |= self.long_run;
        Ok(cfg)
    }
}

fn sink(cfg: &ExperimentConfig) -> Result<Box<dyn Write>> {
    Ok(match &cfg.output {
        Some(path) => Box::new(std::fs::File::create(path)?),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn write_json<T: Serialize>(value: &T, mut out: impl Write) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn write_fit_csv(fits: &[(&str, FitResult)], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["series", "coefficient", "exponent", "residual"])?;
    for (name, f) in fits {
        w.write_record([name.to_string(), f.coefficient.to_string(), f.exponent.to_string(), f.residual.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn fig2(args: &Fig2Args) -> Result<()> {
    let mut cfg = args.common.resolve()?;
    if let Some(f) = args.beta_formula {
        cfg.beta_formula = Some(f);
    }
    if let Some(p) = args.prep {
        cfg.prep = p;
    }
    let rows = run_fig2(&cfg)?;
    for r in rows.iter().filter(|r| r.smallparam_max >= 0.1) {
        eprintln!("warning: Nn={} first-order β, μ have small parameter {:.3}", r.nn, r.smallparam_max);
    }
    let out = sink(&cfg)?;
    match args.common.out {
        OutFormat::Csv => write_fig2_csv(&rows, out),
        OutFormat::Json => {
            #[derive(Serialize)]
            struct Report<'a> {
                rows: &'a [nats_core::experiments::Fig2Row],
                fit: Option<FitResult>,
            }
            write_json(&Report { rows: &rows, fit: fit_fig2(&rows).ok() }, out)
        }
    }
}

fn stddev(args: &StddevArgs) -> Result<()> {
    let mut cfg = args.common.resolve()?;
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    let report = run_stddev_scaling(&cfg)?;
    for (axis, f) in ["x", "y", "z"].iter().zip(&report.fits) {
        eprintln!("{axis}: std ≈ {:.4} · Nn^{:.3}", f.coefficient, f.exponent);
    }
    let out = sink(&cfg)?;
    match args.common.out {
        OutFormat::Csv => write_stddev_csv(&report.rows, out),
        OutFormat::Json => write_json(&report, out),
    }
}

fn robustness(args: &RobustnessArgs) -> Result<()> {
    let mut cfg = args.common.resolve()?;
    if let Some(d) = args.delta {
        cfg.delta = d;
    }
    if args.no_echo {
        cfg.echo = false;
    }
    if let Some(s) = args.echo_steps {
        cfg.echo_steps = Some(s);
    }
    let rows = run_robustness(&cfg)?;
    let out = sink(&cfg)?;
    match args.common.out {
        OutFormat::Csv => write_robustness_csv(&rows, out),
        OutFormat::Json => write_json(&rows, out),
    }
}

fn tomo(args: &TomoArgs) -> Result<()> {
    let mut cfg = args.common.resolve()?;
    if let Some(s) = args.shots {
        cfg.shots = s;
    }
    let report = run_tomography_demo(&cfg)?;
    let out = sink(&cfg)?;
    match args.common.out {
        OutFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.serialize(&report)?;
            w.flush()?;
            Ok(())
        }
        OutFormat::Json => write_json(&report, out),
    }
}

fn fit(args: &FitArgs) -> Result<()> {
    let mut reader = csv::Reader::from_path(&args.input)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", args.input.display())))?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Config(format!("column '{name}' not found")))
    };
    let (xi, yi) = (col(&args.x)?, col(&args.y)?);
    let mut points = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let num = |i: usize| rec[i].parse::<f64>().map_err(|e| Error::Domain(format!("bad number '{}': {e}", &rec[i])));
        points.push((num(xi)?, num(yi)?));
    }
    let result = fit_power_law(&points)?;
    let out = std::io::stdout().lock();
    match args.out {
        OutFormat::Csv => write_fit_csv(&[(args.y.as_str(), result)], out),
        OutFormat::Json => write_json(&result, out),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Resource(_) => 3,
        Error::Numerical(_) | Error::DegenerateParameters(_) | Error::Support { .. } => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Fig2(a) => fig2(a),
        Command::Stddev(a) => stddev(a),
        Command::Robustness(a) => robustness(a),
        Command::Tomo(a) => tomo(a),
        Command::Fit(a) => fit(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
