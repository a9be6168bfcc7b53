use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use csbsd::harness::{self, ExperimentConfig};
use csbsd::{oracle, ConvMode, CsBsdConfig, PriorParams, SensingGraph};

#[derive(Parser)]
#[command(name = "csbsd", version, about = "Detection-directed sparse reconstruction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a sparse sensing matrix and write it in text form.
    GenMatrix {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 4)]
        l: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output file; stdout when omitted.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Reconstruct one signal from a matrix file and a measurement file.
    Reconstruct(ReconstructArgs),
    /// Run a Monte Carlo experiment described by a config file.
    Experiment(ExperimentArgs),
    /// Run the built-in oracle checks.
    Selftest {
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

#[derive(Args)]
struct ReconstructArgs {
    #[arg(long)]
    matrix: PathBuf,
    /// One measurement per line.
    #[arg(long)]
    measurements: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    q: f64,
    #[arg(long, default_value_t = 10.0)]
    sigma_x: f64,
    #[arg(long)]
    sigma_n: f64,
    #[arg(long, default_value_t = 64)]
    n_d: usize,
    #[arg(long, default_value_t = ConvMode::Circular)]
    conv_mode: ConvMode,
    #[arg(long, default_value_t = 10)]
    max_iters: usize,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Estimate CSV; stdout when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Write per-iteration posteriors to this CSV file.
    #[arg(long)]
    debug_dump: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Extra `key=value` overrides, applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn open_output(path: Option<&PathBuf>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn read_measurements(path: &PathBuf) -> anyhow::Result<Vec<f64>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut z = Vec::new();
    for (k, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        z.push(line.parse().with_context(|| format!("line {}: bad number '{line}'", k + 1))?);
    }
    Ok(z)
}

fn gen_matrix(n: usize, m: usize, l: usize, seed: u64, output: Option<PathBuf>) -> anyhow::Result<ExitCode> {
    let graph = SensingGraph::generate(n, m, l, seed)?;
    let mut out = open_output(output.as_ref())?;
    graph.write_text(&mut out)?;
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn reconstruct(args: ReconstructArgs) -> anyhow::Result<ExitCode> {
    let file = File::open(&args.matrix).with_context(|| format!("opening {}", args.matrix.display()))?;
    let graph = SensingGraph::read_text(BufReader::new(file))?;
    let z = read_measurements(&args.measurements)?;
    let prior = PriorParams::new(args.q, args.sigma_x, args.sigma_n)?;
    let config = CsBsdConfig {
        epsilon: args.epsilon,
        max_iters: args.max_iters,
        n_d: args.n_d,
        conv_mode: args.conv_mode,
        debug_dump: args.debug_dump,
        ..CsBsdConfig::default()
    };
    let res = csbsd::cs_bsd(&z, &graph, &prior, &config)?;
    let mut out = open_output(args.output.as_ref())?;
    writeln!(out, "i,x_hat,s_hat")?;
    for (i, (x, s)) in res.estimate.iter().zip(&res.states).enumerate() {
        writeln!(out, "{i},{x},{}", u8::from(*s))?;
    }
    out.flush()?;
    eprintln!(
        "iterations={} residual={} diverged={}",
        res.iterations_run,
        res.residual_trace.last().copied().unwrap_or(f64::NAN),
        res.diverged
    );
    Ok(if res.diverged { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn experiment(args: ExperimentArgs) -> anyhow::Result<ExitCode> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::load(path).with_context(|| format!("reading {}", path.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(kind) = &args.kind {
        config.set("kind", kind)?;
    }
    if let Some(trials) = args.trials {
        config.trials = trials;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(output) = args.output {
        config.output = Some(output);
    }
    for kv in &args.overrides {
        let Some((key, value)) = kv.split_once('=') else {
            bail!("override '{kv}' is not key=value");
        };
        config.set(key, value)?;
    }
    config.validate()?;

    let pool = harness::thread_pool()?;
    let result = pool.install(|| harness::run_experiment(&config))?;
    let mut out = open_output(config.output.as_ref())?;
    result.rows.write_csv(&mut out)?;
    out.flush()?;
    let fraction = result.diverged_fraction();
    eprintln!(
        "trials={} diverged={} ({:.3})",
        result.total_trials, result.diverged_trials, fraction
    );
    Ok(if fraction > config.max_diverged_fraction {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}

fn selftest(seed: u64) -> anyhow::Result<ExitCode> {
    let mut ok = true;
    let mut check = |name: &str, pass: bool, detail: String| {
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        ok &= pass;
    };
    let ex = oracle::exhaustive_check(20, seed)?;
    check(
        "exhaustive posterior",
        ex.max_tv < 1e-6 && ex.degenerate == 0,
        format!("{} forests, max TV {:.3e}", ex.instances, ex.max_tv),
    );
    let mm = oracle::dense_mmse_check(100, seed)?;
    check(
        "dense MMSE",
        mm.max_rel_diff < 1e-10 && mm.max_gradient < 1e-8,
        format!(
            "{} supports, max rel diff {:.3e}, max gradient {:.3e}",
            mm.instances, mm.max_rel_diff, mm.max_gradient
        ),
    );
    let tvs = oracle::measurement_density_check(10, 100_000, seed)?;
    let worst = tvs.iter().cloned().fold(0.0, f64::max);
    check(
        "measurement density",
        worst < 0.05,
        format!("{} rows, max TV {worst:.4}", tvs.len()),
    );
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::GenMatrix { n, m, l, seed, output } => gen_matrix(n, m, l, seed, output),
        Command::Reconstruct(args) => reconstruct(args),
        Command::Experiment(args) => experiment(args),
        Command::Selftest { seed } => selftest(seed),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
