//! The end-to-end experiment protocol: supervised corpus in, logging policy,
//! simulated bandit log, counterfactually trained policies, test-set
//! evaluation, and sweeps over the simulation knobs.

use std::time::Instant;

use anyhow::{Context, Result};
use crm_core::dataset::Corpus;
use crm_core::learner::CrmConfig;
use crm_core::logsim::{self, LoggedDataset};
use crm_core::modelsel::{self, HyperGrid, Optimizer, SelectionReport};
use crm_core::policy::{self, PolicyParams};
use rayon::prelude::*;

use crate::stats::{self, PairedTTest};

/// Epochs and learning rate for the full-batch logistic trainer shared by
/// the logging policy and the full-information skyline.
pub const LOGISTIC_EPOCHS: u32 = 2000;
pub const LOGISTIC_LR: f64 = 2.0;

/// Ridge penalty for the logging policy. With only a small fraction of the
/// data, unregularized logistic regression becomes overconfident; the
/// penalty keeps the logged propensities exploratory.
pub const PI0_L2: f64 = 0.02;

/// Epoch budget for the logging-policy fit. Deliberately short: gradient
/// descent picks up the dominant (true) directions first, so an
/// undertrained fit is soft but mostly right, mirroring the moderate
/// confidence of a logging policy trained on a small supervised sliver.
pub const PI0_EPOCHS: u32 = 2000;

/// Learning rate for the logging-policy fit.
pub const PI0_LR: f64 = 2.0;

/// Ridge penalty for the full-information skyline (effectively none; it
/// sees the whole training set).
pub const CRF_L2: f64 = 1e-4;

/// Fraction of the simulated log held out for counterfactual validation.
pub const VALIDATION_FRACTION: f64 = 0.25;

/// Percentile pair for the clip-constant rule.
pub const M_RULE: (u32, u32) = (90, 10);

/// A trainable method, plus the logging-policy baseline row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum Method {
    /// Logging policy baseline (always reported).
    Pi0,
    /// Clipped importance sampling, batch optimizer, no variance term.
    IpsBatch,
    /// Clipped importance sampling, stochastic optimizer.
    IpsStochastic,
    /// Variance-regularized objective, batch optimizer, grid-searched c.
    PoemBatch,
    /// Variance-regularized objective, stochastic optimizer.
    PoemStochastic,
    /// Full-information per-label logistic regression on 100% of the
    /// supervised training set; the skyline reference.
    CrfSkyline,
}

impl Method {
    pub fn parse(s: &str) -> Option<Method> {
        match s {
            "pi0" => Some(Method::Pi0),
            "ips-b" | "IPS-B" => Some(Method::IpsBatch),
            "ips-s" | "IPS-S" => Some(Method::IpsStochastic),
            "poem-b" | "POEM-B" => Some(Method::PoemBatch),
            "poem-s" | "POEM-S" => Some(Method::PoemStochastic),
            "crf" | "CRF" => Some(Method::CrfSkyline),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Pi0 => "pi0",
            Method::IpsBatch => "IPS-B",
            Method::IpsStochastic => "IPS-S",
            Method::PoemBatch => "POEM-B",
            Method::PoemStochastic => "POEM-S",
            Method::CrfSkyline => "CRF",
        }
    }

    pub fn all_trainable() -> Vec<Method> {
        vec![
            Method::IpsBatch,
            Method::IpsStochastic,
            Method::PoemBatch,
            Method::PoemStochastic,
            Method::CrfSkyline,
        ]
    }
}

/// Everything one experiment needs.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub train: Corpus,
    pub test: Corpus,
    pub dataset: String,
    /// Fraction of the training set used to fit the logging policy.
    pub f: f64,
    pub replay_count: u32,
    /// Logging-policy temperature.
    pub alpha: f64,
    pub seeds: Vec<u64>,
    pub methods: Vec<Method>,
    pub c_values: Vec<f64>,
    pub train_cfg: CrmConfig,
}

impl ExperimentSpec {
    pub fn new(train: Corpus, test: Corpus, dataset: &str) -> Self {
        Self {
            train,
            test,
            dataset: dataset.into(),
            f: 0.05,
            replay_count: 4,
            alpha: 1.0,
            seeds: (0..10).collect(),
            methods: Method::all_trainable(),
            c_values: HyperGrid::default_c_values(),
            train_cfg: CrmConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        anyhow::ensure!(self.f > 0.0 && self.f <= 1.0, "f must be in (0, 1], got {}", self.f);
        anyhow::ensure!(self.replay_count >= 1, "replay count must be >= 1");
        anyhow::ensure!(!self.seeds.is_empty(), "need at least one seed");
        anyhow::ensure!(self.alpha > 0.0, "alpha must be positive");
        Ok(())
    }
}

/// One (method, seed) cell of the result table. Losses are raw Hamming.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ResultRow {
    pub method: Method,
    pub dataset: String,
    pub seed: u64,
    pub expected_test_loss: f64,
    pub map_test_loss: f64,
    pub train_seconds: f64,
    pub selected_c: Option<f64>,
    pub m_clip: f64,
    pub clip_fraction: f64,
    /// Populated instead of the losses when the method failed on this seed.
    pub error: Option<String>,
}

/// A finished experiment: per-cell rows plus derived aggregates.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ExperimentOutcome {
    pub rows: Vec<ResultRow>,
    pub method_means: Vec<(String, f64)>,
    /// One-tailed paired tests that the IPS variant's loss exceeds POEM's.
    pub poem_vs_ips_batch: Option<PairedTTest>,
    pub poem_vs_ips_stochastic: Option<PairedTTest>,
}

/// Mean expected Hamming loss of the stochastic policy over a test corpus,
/// on the raw [0, q] scale.
pub fn evaluate_expected(test: &Corpus, params: &PolicyParams) -> Result<f64> {
    anyhow::ensure!(!test.is_empty(), "empty test corpus");
    let mut acc = 0.0;
    for ex in &test.examples {
        acc += policy::expected_hamming(params, &ex.x, &ex.y_star)?;
    }
    Ok(acc / test.len() as f64)
}

/// Mean Hamming loss of the policy's MAP predictions over a test corpus.
pub fn evaluate_map(test: &Corpus, params: &PolicyParams) -> Result<f64> {
    anyhow::ensure!(!test.is_empty(), "empty test corpus");
    let mut acc = 0.0;
    for ex in &test.examples {
        let y = policy::map_predict(params, &ex.x)?;
        acc += logsim::hamming(&ex.y_star, &y)?.value;
    }
    Ok(acc / test.len() as f64)
}

/// Trained policy plus the selection metadata that goes into its row.
struct TrainedMethod {
    params: PolicyParams,
    seconds: f64,
    selected_c: Option<f64>,
    m_clip: f64,
    clip_fraction: f64,
}

fn ips_config(grid: &HyperGrid, base: &CrmConfig, seed: u64) -> CrmConfig {
    CrmConfig { m_clip: grid.m_clip, lambda: 0.0, seed, ..base.clone() }
}

fn train_method(
    method: Method,
    spec: &ExperimentSpec,
    seed: u64,
    pi0: &PolicyParams,
    log_train: &LoggedDataset,
    log_val: &LoggedDataset,
    grid: &HyperGrid,
) -> Result<TrainedMethod> {
    // Warm-start at the logging policy: importance weights begin at 1, so
    // the optimizer refines pi0 instead of first having to find its way
    // back into the log's support from an arbitrary point.
    let init = pi0.clone();
    let start = Instant::now();
    match method {
        Method::Pi0 => unreachable!("pi0 is not trained"),
        Method::CrfSkyline => {
            let all: Vec<usize> = (0..spec.train.len()).collect();
            let params = logsim::fit_label_logistic(&spec.train, &all, LOGISTIC_EPOCHS, LOGISTIC_LR, CRF_L2)?;
            Ok(TrainedMethod {
                params,
                seconds: start.elapsed().as_secs_f64(),
                selected_c: None,
                m_clip: grid.m_clip,
                clip_fraction: 0.0,
            })
        }
        Method::IpsBatch | Method::IpsStochastic => {
            let optimizer = if method == Method::IpsBatch { Optimizer::Batch } else { Optimizer::Stochastic };
            let cfg = ips_config(grid, &spec.train_cfg, seed);
            let (params, trace) = modelsel::train_with(optimizer, log_train, &cfg, &init)?;
            let clip_fraction = trace.epochs.last().map_or(0.0, |e| e.clip_fraction);
            Ok(TrainedMethod {
                params,
                seconds: start.elapsed().as_secs_f64(),
                selected_c: None,
                m_clip: grid.m_clip,
                clip_fraction,
            })
        }
        Method::PoemBatch | Method::PoemStochastic => {
            let optimizer = if method == Method::PoemBatch { Optimizer::Batch } else { Optimizer::Stochastic };
            let cfg = CrmConfig { m_clip: grid.m_clip, seed, ..spec.train_cfg.clone() };
            let wall = Instant::now();
            let mut timer = move || wall.elapsed().as_secs_f64();
            let (params, report): (PolicyParams, SelectionReport) =
                modelsel::grid_search(log_train, log_val, grid, optimizer, &cfg, &init, &mut timer)?;
            anyhow::ensure!(!report.all_failed, "every grid point diverged");
            Ok(TrainedMethod {
                params,
                seconds: start.elapsed().as_secs_f64(),
                selected_c: report.selected_c,
                m_clip: grid.m_clip,
                clip_fraction: 0.0,
            })
        }
    }
}

/// Runs the full protocol for one seed: logging policy on the f-fraction,
/// simulated log with replay, 75/25 split, per-method training and
/// selection, test-set evaluation.
pub fn run_seed(spec: &ExperimentSpec, seed: u64) -> Result<Vec<ResultRow>> {
    let pi0 = logsim::train_logging_policy(&spec.train, spec.f, seed, PI0_EPOCHS, PI0_LR, PI0_L2)
        .context("training logging policy")?;
    let pi0 = logsim::scale_temperature(&pi0, spec.alpha)?;
    let log = logsim::generate_log(&spec.train, &pi0, spec.replay_count, seed)?;
    let parts = logsim::split_log(&log, &[1.0 - VALIDATION_FRACTION, VALIDATION_FRACTION], seed)?;
    let (log_train, log_val) = (&parts[0], &parts[1]);
    let grid = modelsel::calibrate(log_train, &pi0, spec.c_values.clone(), M_RULE)?;

    let mut rows = Vec::with_capacity(spec.methods.len() + 1);
    rows.push(ResultRow {
        method: Method::Pi0,
        dataset: spec.dataset.clone(),
        seed,
        expected_test_loss: evaluate_expected(&spec.test, &pi0)?,
        map_test_loss: evaluate_map(&spec.test, &pi0)?,
        train_seconds: 0.0,
        selected_c: None,
        m_clip: grid.m_clip,
        clip_fraction: 0.0,
        error: None,
    });

    for &method in &spec.methods {
        if method == Method::Pi0 {
            continue;
        }
        let row = match train_method(method, spec, seed, &pi0, log_train, log_val, &grid) {
            Ok(t) => ResultRow {
                method,
                dataset: spec.dataset.clone(),
                seed,
                expected_test_loss: evaluate_expected(&spec.test, &t.params)?,
                map_test_loss: evaluate_map(&spec.test, &t.params)?,
                train_seconds: t.seconds,
                selected_c: t.selected_c,
                m_clip: t.m_clip,
                clip_fraction: t.clip_fraction,
                error: None,
            },
            // A method failure is recorded and the run continues.
            Err(e) => ResultRow {
                method,
                dataset: spec.dataset.clone(),
                seed,
                expected_test_loss: f64::NAN,
                map_test_loss: f64::NAN,
                train_seconds: 0.0,
                selected_c: None,
                m_clip: grid.m_clip,
                clip_fraction: 0.0,
                error: Some(format!("{e:#}")),
            },
        };
        rows.push(row);
    }
    Ok(rows)
}

/// Runs all seeds (in parallel) and aggregates. Row order is canonical:
/// sorted by (method, seed), independent of scheduling.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutcome> {
    spec.validate()?;
    let per_seed: Result<Vec<Vec<ResultRow>>> =
        spec.seeds.par_iter().map(|&seed| run_seed(spec, seed)).collect();
    let mut rows: Vec<ResultRow> = per_seed?.into_iter().flatten().collect();
    rows.sort_by(|a, b| (a.method, a.seed).cmp(&(b.method, b.seed)));
    Ok(aggregate(rows))
}

fn losses_for(rows: &[ResultRow], method: Method) -> Vec<f64> {
    let mut v: Vec<(u64, f64)> = rows
        .iter()
        .filter(|r| r.method == method && r.error.is_none())
        .map(|r| (r.seed, r.expected_test_loss))
        .collect();
    v.sort_by_key(|&(seed, _)| seed);
    v.into_iter().map(|(_, l)| l).collect()
}

fn aggregate(rows: Vec<ResultRow>) -> ExperimentOutcome {
    let mut methods: Vec<Method> = rows.iter().map(|r| r.method).collect();
    methods.sort();
    methods.dedup();
    let method_means = methods
        .iter()
        .map(|&m| (m.name().to_string(), stats::mean(&losses_for(&rows, m))))
        .collect();

    // Paired one-tailed tests: H1 is "IPS loss exceeds POEM loss".
    let test_pair = |ips: Method, poem: Method| {
        let a = losses_for(&rows, ips);
        let b = losses_for(&rows, poem);
        stats::paired_t_test(&a, &b)
    };
    let poem_vs_ips_batch = test_pair(Method::IpsBatch, Method::PoemBatch);
    let poem_vs_ips_stochastic = test_pair(Method::IpsStochastic, Method::PoemStochastic);

    ExperimentOutcome { rows, method_means, poem_vs_ips_batch, poem_vs_ips_stochastic }
}

/// Sweep axis for [`sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SweepAxis {
    Replay,
    Fraction,
    Temperature,
}

impl SweepAxis {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "replay" => Some(SweepAxis::Replay),
            "fraction" => Some(SweepAxis::Fraction),
            "temperature" => Some(SweepAxis::Temperature),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Replay => "replay",
            SweepAxis::Fraction => "fraction",
            SweepAxis::Temperature => "temperature",
        }
    }
}

/// One experiment per axis value, sharing seeds across values.
pub fn sweep(
    base: &ExperimentSpec,
    axis: SweepAxis,
    values: &[f64],
) -> Result<Vec<(f64, ExperimentOutcome)>> {
    anyhow::ensure!(!values.is_empty(), "sweep needs at least one value");
    let mut out = Vec::with_capacity(values.len());
    for &v in values {
        let mut spec = base.clone();
        match axis {
            SweepAxis::Replay => {
                anyhow::ensure!(v >= 1.0 && v.fract() == 0.0, "replay value must be a positive integer, got {v}");
                spec.replay_count = v as u32;
            }
            SweepAxis::Fraction => spec.f = v,
            SweepAxis::Temperature => spec.alpha = v,
        }
        out.push((v, run_experiment(&spec)?));
    }
    Ok(out)
}
