use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use surromoo_core::dataset::write_csv;
use surromoo_core::oracle::{generate_dataset, Sampler};
use surromoo_core::pipeline::{run_until, PipelineConfig, RunReport, Stage};
use surromoo_core::{Error, OracleProblem};

const EXIT_CONFIG: u8 = 2;
const EXIT_STAGE: u8 = 3;

/// Surrogate-assisted multiobjective optimization pipeline.
#[derive(Parser, Debug)]
#[command(name = "surromoo", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Pipeline configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample an oracle problem and write dataset.csv.
    Generate {
        #[arg(long)]
        problem: Option<OracleProblem>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, value_parser = parse_sampler)]
        sampler: Option<Sampler>,
    },
    /// Acquire data, tune, train and evaluate the configured models.
    Train,
    /// Train, then export importances and partial dependence.
    Explain,
    /// Train and explain, then run NSGA-II on every surrogate.
    Optimize,
    /// Optimize, then validate the predicted fronts on the oracle.
    Validate,
    /// Print the indicator table of an existing report.json.
    Report,
    /// Every stage.
    Run,
}

fn parse_sampler(s: &str) -> Result<Sampler, String> {
    match s {
        "lhd" => Ok(Sampler::Lhd),
        "uniform" => Ok(Sampler::Uniform),
        other => Err(format!("unknown sampler {other:?} (lhd | uniform)")),
    }
}

enum Failure {
    Config(String),
    Stage(String),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Stage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_STAGE)
        }
    }
}

fn load_config(global: &Global) -> Result<Option<PipelineConfig>, Failure> {
    let Some(path) = &global.config else { return Ok(None) };
    let mut cfg = PipelineConfig::load(path).map_err(|e| Failure::Config(e.to_string()))?;
    if let Some(seed) = global.seed {
        cfg.seed = seed;
    }
    Ok(Some(cfg))
}

fn out_dir(global: &Global, cfg: Option<&PipelineConfig>) -> PathBuf {
    global
        .out
        .clone()
        .or_else(|| cfg.and_then(|c| c.output_dir.clone()))
        .unwrap_or_else(|| PathBuf::from("surromoo-out"))
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    let cfg = load_config(&cli.global)?;
    let out = out_dir(&cli.global, cfg.as_ref());
    let last = match &cli.command {
        Command::Generate { problem, n, sampler } => return generate(cli, cfg.as_ref(), &out, *problem, *n, *sampler),
        Command::Report => return print_report(&out),
        Command::Train => Stage::Train,
        Command::Explain => Stage::Explain,
        Command::Optimize => Stage::Optimize,
        Command::Validate => Stage::Validate,
        Command::Run => Stage::Report,
    };
    let cfg = cfg.ok_or_else(|| Failure::Config("--config is required for this command".into()))?;
    match run_until(&cfg, &out, last) {
        Ok(report) => {
            print_summary(&report);
            println!("wrote {}", out.display());
            Ok(())
        }
        Err(e) if e.stage == Stage::Config => Err(Failure::Config(e.source.to_string())),
        Err(e) => Err(Failure::Stage(e.to_string())),
    }
}

fn generate(
    cli: &Cli,
    cfg: Option<&PipelineConfig>,
    out: &PathBuf,
    problem: Option<OracleProblem>,
    n: Option<usize>,
    sampler: Option<Sampler>,
) -> Result<(), Failure> {
    let from_cfg = match cfg.map(|c| &c.data) {
        Some(surromoo_core::pipeline::DataSource::Oracle { problem, sampler, n }) => Some((*problem, *sampler, *n)),
        _ => None,
    };
    let problem = problem
        .or(from_cfg.map(|c| c.0))
        .ok_or_else(|| Failure::Config("--problem is required without an oracle config".into()))?;
    let sampler = sampler.or(from_cfg.map(|c| c.1)).unwrap_or_default();
    let n = n.or(from_cfg.map(|c| c.2)).ok_or_else(|| Failure::Config("--n is required".into()))?;
    let seed = cli.global.seed.or(cfg.map(|c| c.seed)).unwrap_or(0);
    let stage = |e: Error| Failure::Stage(e.to_string());
    let generated = generate_dataset(problem, sampler, n, seed).map_err(stage)?;
    std::fs::create_dir_all(out).map_err(|e| stage(e.into()))?;
    let path = out.join("dataset.csv");
    write_csv(&generated.dataset, &path).map_err(stage)?;
    println!(
        "{problem}: {} rows written to {} ({} infeasible dropped)",
        generated.dataset.n_rows(),
        path.display(),
        generated.dropped_rows
    );
    Ok(())
}

fn print_report(out: &std::path::Path) -> Result<(), Failure> {
    let report = RunReport::load(out.join("report.json")).map_err(|e| Failure::Stage(e.to_string()))?;
    print_summary(&report);
    if let Some(f) = &report.failure {
        println!("failed at stage {}: {}", f.stage, f.message);
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.6}"))
}

fn print_summary(report: &RunReport) {
    for m in report.models.iter().chain(&report.retrain_cycle) {
        let metrics: Vec<String> =
            m.metrics.iter().map(|t| format!("{} mape {:.3}% mse {:.4e}", t.target, t.mape, t.mse)).collect();
        println!("{:<16} {}", m.label, metrics.join(", "));
    }
    if !report.indicators.is_empty() {
        println!("{:<16} {:>10} {:>10} {:>10} {:>10}", "label", "sim_rate", "gd", "gd_plus", "hv");
        for r in &report.indicators {
            println!(
                "{:<16} {:>10} {:>10} {:>10} {:>10.6}",
                r.label,
                fmt_opt(r.simulation_rate),
                fmt_opt(r.gd),
                fmt_opt(r.gd_plus),
                r.hv
            );
        }
    }
}
