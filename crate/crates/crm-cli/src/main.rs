//! `crm`: experiment CLI for counterfactual risk minimization.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result, bail};
use clap::{Args, Parser, Subcommand};
use crm_core::dataset::{Corpus, IndexBase};
use crm_core::learner::CrmConfig;
use crm_core::logsim;
use crm_core::modelsel::{self, HyperGrid, Optimizer};
use crm_core::policy::PolicyParams;

use crm_cli::harness::{self, ExperimentSpec, Method, SweepAxis};
use crm_cli::synth::SynthSpec;
use crm_cli::{io, report, synth};

#[derive(Parser)]
#[command(name = "crm", about = "Counterfactual risk minimization experiments", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a multi-label corpus file and print its shape.
    Parse(ParseArgs),
    /// Simulate a bandit log from a supervised corpus.
    Logsim(LogsimArgs),
    /// Train one method on an existing log file.
    Train(TrainArgs),
    /// Run the full protocol over a seed list.
    Experiment(ExperimentArgs),
    /// Run the protocol repeatedly along one simulation knob.
    Sweep(SweepArgs),
    /// Generate a synthetic corpus pair.
    Synth(SynthArgs),
}

#[derive(Args)]
struct ParseArgs {
    /// Corpus file in multi-label LibSVM text format.
    corpus: PathBuf,
    /// Feature index base in the file: "one" (LibSVM convention) or "zero".
    #[arg(long, default_value = "one")]
    base: String,
    /// Pin the label count instead of inferring it from the data.
    #[arg(long)]
    labels: Option<u32>,
    /// Pin the feature count instead of inferring it from the data.
    #[arg(long)]
    features: Option<u32>,
}

#[derive(Args)]
struct CorpusSource {
    /// Training corpus path (exclusive with --synth).
    #[arg(long)]
    train: Option<PathBuf>,
    /// Test corpus path (required with --train).
    #[arg(long)]
    test: Option<PathBuf>,
    /// Generate a synthetic corpus pair instead: "scene" or "yeast".
    #[arg(long)]
    synth: Option<String>,
    /// Seed for the synthetic generator.
    #[arg(long, default_value_t = 1)]
    synth_seed: u64,
    /// Feature index base of corpus files.
    #[arg(long, default_value = "one")]
    base: String,
    /// Pin the label count when loading corpus files.
    #[arg(long)]
    labels: Option<u32>,
    /// Pin the feature count when loading corpus files.
    #[arg(long)]
    features: Option<u32>,
}

#[derive(Args)]
struct LogsimArgs {
    #[command(flatten)]
    source: CorpusSource,
    /// Fraction of the training set used to fit the logging policy.
    #[arg(long, default_value_t = 0.05)]
    f: f64,
    /// Number of replay passes over the training set.
    #[arg(long, default_value_t = 4)]
    replay: u32,
    /// Logging-policy temperature.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path for the log file.
    #[arg(long)]
    out: PathBuf,
    /// Optional output path for the logging policy itself.
    #[arg(long)]
    pi0_out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Log file produced by `logsim`.
    #[arg(long)]
    log: PathBuf,
    /// Method: ips-b, ips-s, poem-b, or poem-s.
    #[arg(long)]
    method: String,
    /// Output path for the trained policy.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Held-out fraction of the log for hyperparameter selection.
    #[arg(long, default_value_t = harness::VALIDATION_FRACTION)]
    val_fraction: f64,
    /// Logging policy file; enables the calibrated variance-weight anchor.
    #[arg(long)]
    pi0: Option<PathBuf>,
}

#[derive(Args)]
struct ProtocolArgs {
    #[command(flatten)]
    source: CorpusSource,
    #[arg(long, default_value_t = 0.05)]
    f: f64,
    #[arg(long, default_value_t = 4)]
    replay: u32,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Comma-separated seed list, one protocol run per seed.
    #[arg(long = "seed-list", default_value = "0,1,2,3,4,5,6,7,8,9")]
    seed_list: String,
    /// Comma-separated methods (ips-b, ips-s, poem-b, poem-s, crf).
    #[arg(long, default_value = "ips-b,ips-s,poem-b,poem-s,crf")]
    methods: String,
    /// Worker threads for the seed/grid fan-out (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory for results.csv and summary.json.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    protocol: ProtocolArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    protocol: ProtocolArgs,
    /// Axis to sweep: replay, fraction, or temperature.
    #[arg(long)]
    axis: String,
    /// Comma-separated axis values.
    #[arg(long)]
    values: String,
}

#[derive(Args)]
struct SynthArgs {
    /// Preset name: "scene" or "yeast".
    #[arg(long)]
    preset: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output directory for <preset>-train.txt and <preset>-test.txt.
    #[arg(long)]
    out_dir: PathBuf,
}

fn parse_base(s: &str) -> Result<IndexBase> {
    match s {
        "one" => Ok(IndexBase::One),
        "zero" => Ok(IndexBase::Zero),
        other => bail!("unknown index base `{other}` (expected `one` or `zero`)"),
    }
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<T>().map_err(|e| anyhow::anyhow!("bad {what} `{t}`: {e}")))
        .collect()
}

impl CorpusSource {
    fn load(&self) -> Result<(Corpus, Corpus, String)> {
        match (&self.synth, &self.train, &self.test) {
            (Some(preset), None, None) => {
                let spec = SynthSpec::preset(preset)
                    .with_context(|| format!("unknown synth preset `{preset}`"))?;
                let (train, test) = synth::generate(&spec, self.synth_seed);
                Ok((train, test, spec.name))
            }
            (None, Some(train), Some(test)) => {
                let base = parse_base(&self.base)?;
                let train_c = io::load_corpus(train, base, self.labels, self.features)?;
                let q = Some(train_c.q);
                let p = Some(train_c.p.max(self.features.unwrap_or(0)));
                let test_c = io::load_corpus(test, base, q, p)?;
                let name = train_c.name.trim_end_matches("-train").to_string();
                Ok((train_c, test_c, name))
            }
            _ => bail!("provide either --synth PRESET or both --train and --test"),
        }
    }
}

fn cmd_parse(args: &ParseArgs) -> Result<()> {
    let base = parse_base(&args.base)?;
    let corpus = io::load_corpus(&args.corpus, base, args.labels, args.features)?;
    let cardinality: f64 = corpus
        .examples
        .iter()
        .map(|e| e.y_star.count_ones() as f64)
        .sum::<f64>()
        / corpus.len() as f64;
    println!(
        "{}: {} examples, {} features, {} labels, mean label cardinality {:.3}",
        corpus.name,
        corpus.len(),
        corpus.p,
        corpus.q,
        cardinality
    );
    Ok(())
}

fn cmd_logsim(args: &LogsimArgs) -> Result<()> {
    let (train, _test, _) = args.source.load()?;
    let pi0 = logsim::train_logging_policy(
        &train,
        args.f,
        args.seed,
        harness::PI0_EPOCHS,
        harness::PI0_LR,
        harness::PI0_L2,
    )?;
    let pi0 = logsim::scale_temperature(&pi0, args.alpha)?;
    let mut log = logsim::generate_log(&train, &pi0, args.replay, args.seed)?;
    log.meta.f = args.f;
    io::save_log(&args.out, &log)?;
    if let Some(path) = &args.pi0_out {
        io::save_policy(path, &pi0)?;
    }
    println!(
        "wrote {} records (q = {}, mean translated loss {:.4}) to {}",
        log.len(),
        log.q,
        logsim::mean_loss(&log),
        args.out.display()
    );
    Ok(())
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let log = io::load_log(&args.log)?;
    let parts = logsim::split_log(&log, &[1.0 - args.val_fraction, args.val_fraction], args.seed)?;
    let (log_train, log_val) = (&parts[0], &parts[1]);
    let q = log.q;
    let p = log_train
        .records
        .iter()
        .map(|r| r.x.dim_lower_bound())
        .max()
        .unwrap_or(0);
    // Warm-start at the logging policy when it is available.
    let pi0 = args.pi0.as_ref().map(|path| io::load_policy(path)).transpose()?;
    let init = pi0.clone().unwrap_or_else(|| PolicyParams::zeros(q, p));
    let base_cfg = CrmConfig { seed: args.seed, ..CrmConfig::default() };

    let (optimizer, poem) = match args.method.as_str() {
        "ips-b" => (Optimizer::Batch, false),
        "ips-s" => (Optimizer::Stochastic, false),
        "poem-b" => (Optimizer::Batch, true),
        "poem-s" => (Optimizer::Stochastic, true),
        other => bail!("unknown method `{other}`"),
    };

    let m_clip = modelsel::clip_constant(log_train, harness::M_RULE)?;
    let params = if poem {
        let pi0 = pi0
            .as_ref()
            .context("poem methods need --pi0 for variance-weight calibration")?;
        let grid = modelsel::calibrate(log_train, pi0, HyperGrid::default_c_values(), harness::M_RULE)?;
        let cfg = CrmConfig { m_clip: grid.m_clip, ..base_cfg };
        let start = std::time::Instant::now();
        let mut timer = move || start.elapsed().as_secs_f64();
        let (params, sel) =
            modelsel::grid_search(log_train, log_val, &grid, optimizer, &cfg, &init, &mut timer)?;
        if sel.all_failed {
            bail!("every grid point diverged");
        }
        println!(
            "selected c = {:?} (M = {}, lambda* = {})",
            sel.selected_c, sel.m_clip, sel.lambda_star
        );
        params
    } else {
        let cfg = CrmConfig { m_clip, lambda: 0.0, ..base_cfg };
        let (params, trace) = modelsel::train_with(optimizer, log_train, &cfg, &init)?;
        println!("trained {} epochs, stop: {:?}", trace.epochs.len(), trace.stop);
        params
    };

    let val_estimate = crm_core::estimator::counterfactual_validate(log_val, &params)?;
    println!("validation estimate: {val_estimate}");
    io::save_policy(&args.out, &params)?;
    println!("wrote policy to {}", args.out.display());
    Ok(())
}

fn build_spec(args: &ProtocolArgs) -> Result<ExperimentSpec> {
    let (train, test, dataset) = args.source.load()?;
    let seeds: Vec<u64> = parse_list(&args.seed_list, "seed")?;
    let methods = args
        .methods
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| Method::parse(t).with_context(|| format!("unknown method `{t}`")))
        .collect::<Result<Vec<_>>>()?;
    if let Some(workers) = args.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .context("configuring worker pool")?;
    }
    let mut spec = ExperimentSpec::new(train, test, &dataset);
    spec.f = args.f;
    spec.replay_count = args.replay;
    spec.alpha = args.alpha;
    spec.seeds = seeds;
    spec.methods = methods;
    Ok(spec)
}

fn cmd_experiment(args: &ExperimentArgs) -> Result<()> {
    let spec = build_spec(&args.protocol)?;
    let outcome = harness::run_experiment(&spec)?;
    let out_dir = &args.protocol.out_dir;
    report::write_text(&out_dir.join("results.csv"), &report::results_csv(&outcome))?;
    report::write_text(&out_dir.join("summary.json"), &report::summary_json(&outcome)?)?;
    for (method, mean) in &outcome.method_means {
        println!("{method}: mean expected test loss {mean:.4}");
    }
    if let Some(t) = &outcome.poem_vs_ips_batch {
        println!("POEM-B vs IPS-B: t = {:.3}, one-tailed p = {:.4}", t.t_statistic, t.p_value);
    }
    if let Some(t) = &outcome.poem_vs_ips_stochastic {
        println!("POEM-S vs IPS-S: t = {:.3}, one-tailed p = {:.4}", t.t_statistic, t.p_value);
    }
    let failures: Vec<_> = outcome.rows.iter().filter(|r| r.error.is_some()).collect();
    for r in &failures {
        eprintln!("warning: {} seed {} failed: {}", r.method.name(), r.seed, r.error.as_deref().unwrap());
    }
    println!("wrote {}", out_dir.join("results.csv").display());
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let spec = build_spec(&args.protocol)?;
    let axis = SweepAxis::parse(&args.axis)
        .with_context(|| format!("unknown sweep axis `{}`", args.axis))?;
    let values: Vec<f64> = parse_list(&args.values, "sweep value")?;
    let results = harness::sweep(&spec, axis, &values)?;
    let out_dir = &args.protocol.out_dir;
    report::write_text(&out_dir.join("sweep.csv"), &report::sweep_csv(axis, &results))?;
    for (value, outcome) in &results {
        for (method, mean) in &outcome.method_means {
            println!("{} = {value}: {method} mean expected test loss {mean:.4}", axis.name());
        }
    }
    println!("wrote {}", out_dir.join("sweep.csv").display());
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let spec = SynthSpec::preset(&args.preset)
        .with_context(|| format!("unknown synth preset `{}`", args.preset))?;
    let (train, test) = synth::generate(&spec, args.seed);
    std::fs::create_dir_all(&args.out_dir)?;
    let train_path = args.out_dir.join(format!("{}-train.txt", spec.name));
    let test_path = args.out_dir.join(format!("{}-test.txt", spec.name));
    io::save_corpus(&train_path, &train)?;
    io::save_corpus(&test_path, &test)?;
    println!("wrote {} and {}", train_path.display(), test_path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Parse(args) => cmd_parse(args),
        Command::Logsim(args) => cmd_logsim(args),
        Command::Train(args) => cmd_train(args),
        Command::Experiment(args) => cmd_experiment(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Synth(args) => cmd_synth(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
