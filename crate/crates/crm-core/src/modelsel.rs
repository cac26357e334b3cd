//! Hyperparameter calibration and grid search: the percentile rule for the
//! clip constant, the calibration anchor for the variance weight, and
//! selection by counterfactual validation on a held-out split.

use alloc::vec::Vec;

use crate::estimator::{self, ClippedTerms, EstimatorError};
use crate::learner::{self, CrmConfig, LearnerError, StopReason, TrainTrace};
use crate::logsim::LoggedDataset;
use crate::policy::PolicyParams;

/// Grid of variance-weight multipliers with the calibrated constants.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HyperGrid {
    /// Ascending positive multipliers c; the trained weights are c * lambda_star.
    pub c_values: Vec<f64>,
    /// Percentile pair (high, low) for the clip-constant rule.
    pub m_rule: (u32, u32),
    /// Calibrated variance-weight anchor; the largest weight at which the
    /// logging policy's own objective is still non-positive.
    pub lambda_star: f64,
    /// Calibrated clip constant.
    pub m_clip: f64,
    /// Set when lambda_star was undefined and the grid values are used as
    /// absolute variance weights instead of multipliers.
    pub absolute_fallback: bool,
}

impl HyperGrid {
    /// The default multiplier grid 1e-6 ..= 1 in multiples of 10.
    pub fn default_c_values() -> Vec<f64> {
        alloc::vec![1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0]
    }

    /// Variance weight for grid point `c`.
    pub fn lambda_for(&self, c: f64) -> f64 {
        if self.absolute_fallback {
            c
        } else {
            c * self.lambda_star
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ModelSelError {
    #[error("empty logged dataset")]
    Empty,
    #[error("percentile rule needs percentiles in 1..=100, high >= low")]
    BadRule,
    #[error("lambda_star undefined: logging-policy clipped mean is zero")]
    ZeroMean,
    #[error("lambda_star undefined: logging-policy terms have zero variance")]
    ZeroVariance,
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
}

/// Nearest-rank percentile of a sample: the `floor(pct * n / 100)`-th order
/// statistic (0-indexed, clamped). Fixed explicitly so M is bit-reproducible
/// across platforms.
pub fn nearest_rank_percentile(sorted: &[f64], pct: u32) -> f64 {
    let n = sorted.len();
    let idx = ((pct as usize) * n / 100).min(n - 1);
    sorted[idx]
}

/// Clip constant from the ratio of the high to the low propensity
/// percentile over the training log. Always >= 1; a constant propensity
/// sample yields M = 1 (everything clipped at weight 1).
pub fn clip_constant(log_train: &LoggedDataset, rule: (u32, u32)) -> Result<f64, ModelSelError> {
    if log_train.is_empty() {
        return Err(ModelSelError::Empty);
    }
    let (hi, lo) = rule;
    if hi < lo || hi > 100 || lo == 0 {
        return Err(ModelSelError::BadRule);
    }
    let mut props: Vec<f64> = log_train.records.iter().map(|r| r.propensity).collect();
    props.sort_unstable_by(|a, b| a.partial_cmp(b).expect("propensities are finite"));
    let high = nearest_rank_percentile(&props, hi);
    let low = nearest_rank_percentile(&props, lo);
    Ok((high / low).max(1.0))
}

/// Diagnostic alternative to the percentile rule: max over min propensity.
pub fn propensity_ratio_extremes(log_train: &LoggedDataset) -> Result<f64, ModelSelError> {
    if log_train.is_empty() {
        return Err(ModelSelError::Empty);
    }
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    for r in &log_train.records {
        min = min.min(r.propensity);
        max = max.max(r.propensity);
    }
    Ok(max / min)
}

/// Calibration anchor `lambda_star = |mean| / sqrt(var / n)` of the logging
/// policy's clipped terms: the largest variance weight at which the logging
/// policy's own training objective is exactly zero.
pub fn lambda_star(pi0_terms: &ClippedTerms, n: usize) -> Result<f64, ModelSelError> {
    if pi0_terms.mean == 0.0 {
        return Err(ModelSelError::ZeroMean);
    }
    if pi0_terms.variance <= 0.0 {
        return Err(ModelSelError::ZeroVariance);
    }
    Ok(-pi0_terms.mean / libm::sqrt(pi0_terms.variance / n as f64))
}

/// Builds the calibrated grid from a training log: M by the percentile
/// rule, lambda_star from the logging policy's own terms (weights zero,
/// temperature 1 stand-in is not assumed; the caller passes pi0).
pub fn calibrate(
    log_train: &LoggedDataset,
    pi0: &PolicyParams,
    c_values: Vec<f64>,
    m_rule: (u32, u32),
) -> Result<HyperGrid, ModelSelError> {
    let m_clip = clip_constant(log_train, m_rule)?;
    let terms = estimator::clipped_terms(log_train, pi0, m_clip)?;
    let (lambda_star, absolute_fallback) = match lambda_star(&terms, log_train.len()) {
        Ok(l) => (l, false),
        Err(ModelSelError::ZeroMean) | Err(ModelSelError::ZeroVariance) => (0.0, true),
        Err(e) => return Err(e),
    };
    Ok(HyperGrid { c_values, m_rule, lambda_star, m_clip, absolute_fallback })
}

/// Which trainer a grid point uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Optimizer {
    Batch,
    Stochastic,
}

pub fn train_with(
    optimizer: Optimizer,
    log: &LoggedDataset,
    cfg: &CrmConfig,
    init: &PolicyParams,
) -> Result<(PolicyParams, TrainTrace), LearnerError> {
    match optimizer {
        Optimizer::Batch => learner::train_batch(log, cfg, init),
        Optimizer::Stochastic => learner::train_stochastic(log, cfg, init),
    }
}

/// One grid point's outcome.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SelectionEntry {
    pub c: f64,
    pub lambda: f64,
    pub train_objective: f64,
    pub validation_estimate: f64,
    pub seconds: f64,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SelectionReport {
    pub entries: Vec<SelectionEntry>,
    pub selected_c: Option<f64>,
    pub m_clip: f64,
    pub lambda_star: f64,
    /// True when every candidate diverged and the zero policy was returned.
    pub all_failed: bool,
}

/// Trains one policy per grid multiplier, scores each on the validation log
/// with the unclipped counterfactual estimator, and returns the argmin.
/// Ties break toward smaller c. Every grid point starts from the same
/// `init`: chaining starts across the grid would compound training passes
/// and push later candidates into regimes where the validation estimate is
/// at its noisiest. `timer` supplies wall-clock seconds (the caller owns
/// the clock); pass `|| 0.0` where timing is irrelevant.
pub fn grid_search(
    log_train: &LoggedDataset,
    log_val: &LoggedDataset,
    grid: &HyperGrid,
    optimizer: Optimizer,
    base_cfg: &CrmConfig,
    init: &PolicyParams,
    timer: &mut dyn FnMut() -> f64,
) -> Result<(PolicyParams, SelectionReport), ModelSelError> {
    if log_train.is_empty() || log_val.is_empty() {
        return Err(ModelSelError::Empty);
    }
    let mut entries = Vec::with_capacity(grid.c_values.len());
    let mut best: Option<(f64, PolicyParams)> = None;
    let mut selected_c = None;

    for &c in &grid.c_values {
        let cfg = CrmConfig { m_clip: grid.m_clip, lambda: grid.lambda_for(c), ..base_cfg.clone() };
        let t0 = timer();
        let (params, trace) = train_with(optimizer, log_train, &cfg, init)?;
        let seconds = timer() - t0;
        let diverged = trace.stop == StopReason::Diverged;
        let train_objective = trace.epochs.last().map_or(f64::NAN, |e| e.objective);
        let validation_estimate = estimator::counterfactual_validate(log_val, &params)?;
        let usable = !diverged && validation_estimate.is_finite();
        if usable && best.as_ref().is_none_or(|(v, _)| validation_estimate < *v) {
            best = Some((validation_estimate, params.clone()));
            selected_c = Some(c);
        }
        entries.push(SelectionEntry { c, lambda: cfg.lambda, train_objective, validation_estimate, seconds, diverged });
    }

    match best {
        Some((_, params)) => Ok((
            params,
            SelectionReport {
                entries,
                selected_c,
                m_clip: grid.m_clip,
                lambda_star: grid.lambda_star,
                all_failed: false,
            },
        )),
        None => Ok((
            init.clone(),
            SelectionReport {
                entries,
                selected_c: None,
                m_clip: grid.m_clip,
                lambda_star: grid.lambda_star,
                all_failed: true,
            },
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{LabelVector, SparseVector};
    use crate::logsim::{BanditRecord, LoggingMeta};
    use alloc::vec;

    fn log_with_propensities(props: &[f64]) -> LoggedDataset {
        LoggedDataset {
            records: props
                .iter()
                .map(|&p| BanditRecord {
                    x: SparseVector::new(vec![(0, 1.0)]).unwrap(),
                    y: LabelVector::new(vec![true]),
                    loss: -0.5,
                    propensity: p,
                })
                .collect(),
            q: 1,
            loss_bounds: (0.0, 1.0),
            meta: LoggingMeta::unknown(),
        }
    }

    #[test]
    fn constant_propensities_give_m_one() {
        let log = log_with_propensities(&[0.015625; 12]);
        assert_eq!(clip_constant(&log, (90, 10)).unwrap(), 1.0);
    }

    #[test]
    fn percentile_rule_fixture() {
        let mut props = vec![0.1; 9];
        props.push(0.9);
        let log = log_with_propensities(&props);
        assert_eq!(clip_constant(&log, (90, 10)).unwrap(), 0.9 / 0.1);
        assert!((propensity_ratio_extremes(&log).unwrap() - 9.0).abs() < 1e-12);
    }

    #[test]
    fn lambda_star_closed_form() {
        // mean = -0.5, sqrt(var/n) = 0.1 -> lambda_star = 5.
        let terms = ClippedTerms { u: vec![], mean: -0.5, variance: 0.04, clip_fraction: 0.0 };
        let l = lambda_star(&terms, 4).unwrap();
        assert!((l - 5.0).abs() < 1e-12);
        // c = 0.1 leaves the logging policy's objective strictly negative.
        let obj = -0.5 + 0.1 * l * 0.1;
        assert!((obj - (-0.45)).abs() < 1e-12);
        // c = 1 sits exactly on the zero boundary.
        assert!((-0.5 + l * 0.1).abs() < 1e-12);
    }

    #[test]
    fn degenerate_lambda_star_errors() {
        let zero_var = ClippedTerms { u: vec![], mean: -0.5, variance: 0.0, clip_fraction: 0.0 };
        assert_eq!(lambda_star(&zero_var, 4).unwrap_err(), ModelSelError::ZeroVariance);
        let zero_mean = ClippedTerms { u: vec![], mean: 0.0, variance: 0.1, clip_fraction: 0.0 };
        assert_eq!(lambda_star(&zero_mean, 4).unwrap_err(), ModelSelError::ZeroMean);
    }
}
