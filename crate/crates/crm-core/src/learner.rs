//! Variance-regularized counterfactual training.
//!
//! The objective is the clipped importance-weighted mean plus a weighted
//! empirical standard deviation of the clipped terms. The batch trainer
//! descends the exact objective with a backtracking line search; the
//! stochastic trainer replaces the square-rooted variance per epoch with its
//! tangent majorizer, which turns the objective into a sum over records and
//! admits minibatch AdaGrad updates.

use alloc::vec;
use alloc::vec::Vec;

use crate::estimator::{ClippedTerms, EstimatorError};
use crate::logsim::LoggedDataset;
use crate::policy::{self, PolicyError, PolicyParams};
use crate::rng::{derive_rng, rng_stream, shuffled_indices};

/// Variance floor used inside square roots and majorizer denominators.
pub const EPSILON_VAR: f64 = 1e-12;
/// AdaGrad denominator offset.
pub const ADAGRAD_EPS: f64 = 1e-8;
/// Armijo sufficient-decrease constant for the batch line search.
pub const ARMIJO_C: f64 = 1e-4;
/// Maximum step halvings before the line search gives up.
pub const MAX_HALVINGS: u32 = 50;
/// Maximum step doublings when the base step already passes the Armijo test.
pub const MAX_DOUBLINGS: u32 = 30;

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CrmConfig {
    /// Importance-weight clip constant M > 0.
    pub m_clip: f64,
    /// Variance regularization weight, 0 recovers plain clipped IPS.
    pub lambda: f64,
    pub max_epochs: u32,
    pub minibatch: usize,
    /// Base learning rate (AdaGrad numerator / initial line-search step).
    pub lr: f64,
    /// Stop when the full gradient norm falls below `tol_grad * (1 + |w|)`.
    pub tol_grad: f64,
    /// Stop when the relative objective change falls below this.
    pub tol_obj: f64,
    /// Epochs without progressive-validation improvement before stopping.
    pub patience: u32,
    pub seed: u64,
}

impl Default for CrmConfig {
    fn default() -> Self {
        Self {
            m_clip: 1.0,
            lambda: 0.0,
            max_epochs: 200,
            minibatch: 100,
            lr: 0.1,
            tol_grad: 1e-5,
            tol_obj: 1e-9,
            patience: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum LearnerError {
    #[error("clip constant must be positive, got {0}")]
    BadClip(f64),
    #[error("variance regularization needs at least 2 records")]
    TooFewRecords,
    #[error("empty logged dataset")]
    Empty,
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
}

/// Coefficients of the tangent majorizer of `sqrt(Var(u))` anchored at the
/// current iterate: for every w,
/// `sqrt(Var_w(u)) <= A * sum(u_w) + B * sum(u_w^2) + C`, with equality at
/// the anchor.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MajorizerCoeffs {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub anchor_mean: f64,
    pub anchor_var: f64,
    /// Set when the anchor variance had to be floored at `EPSILON_VAR`.
    pub floored: bool,
}

/// Per-epoch training statistics.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EpochStats {
    pub epoch: u32,
    pub objective: f64,
    pub mean: f64,
    pub variance: f64,
    pub grad_norm: f64,
    pub clip_fraction: f64,
    /// Progressive-validation loss: counterfactual estimate of each
    /// minibatch before it is trained on, averaged over the epoch.
    /// NaN for the batch trainer, which has no minibatches.
    pub prog_val: f64,
}

/// Why training stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum StopReason {
    GradientTolerance,
    ObjectiveTolerance,
    PatienceExhausted,
    MaxEpochs,
    LineSearchFailed,
    Diverged,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainTrace {
    pub epochs: Vec<EpochStats>,
    pub stop: StopReason,
    /// Any epoch hit the degenerate zero-variance majorizer guard.
    pub variance_floored: bool,
}

/// One record's clipped term and the per-label gradient coefficients.
/// The gradient of `u^i` w.r.t. row j of w is `coeff[j] * x`; clipped
/// records sit on the constant branch of the min and contribute zero.
struct RecordTerm {
    u: f64,
    clipped: bool,
    coeffs: Vec<f64>,
}

fn record_term(params: &PolicyParams, r: &crate::logsim::BanditRecord, m_clip: f64, with_grad: bool) -> Result<RecordTerm, PolicyError> {
    let s = policy::scores(params, &r.x)?;
    let mut lp = 0.0;
    for (j, &sj) in s.iter().enumerate() {
        lp += if r.y.get(j) { sj } else { 0.0 };
        lp -= policy::softplus(sj);
    }
    let w_imp = libm::exp(lp - libm::log(r.propensity));
    let clipped = w_imp >= m_clip;
    let u = r.loss * if clipped { m_clip } else { w_imp };
    let coeffs = if with_grad && !clipped {
        s.iter()
            .enumerate()
            .map(|(j, &sj)| {
                let y_j = if r.y.get(j) { 1.0 } else { 0.0 };
                u * params.alpha() * (y_j - policy::sigmoid(sj))
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(RecordTerm { u, clipped, coeffs })
}

fn add_scaled_record_grad(grad: &mut [f64], term: &RecordTerm, x: &crate::dataset::SparseVector, p: usize, scale: f64) {
    if term.clipped {
        return;
    }
    for (j, &cj) in term.coeffs.iter().enumerate() {
        let row = &mut grad[j * p..(j + 1) * p];
        for &(k, v) in x.entries() {
            row[k as usize] += scale * cj * v;
        }
    }
}

fn l2_norm(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|&g| g * g).sum())
}

/// Clipped terms of the whole log at the given weights.
pub fn anchor_terms(log: &LoggedDataset, params: &PolicyParams, m_clip: f64) -> Result<ClippedTerms, LearnerError> {
    if log.len() < 2 {
        return Err(LearnerError::TooFewRecords);
    }
    let mut u = Vec::with_capacity(log.len());
    let mut clipped = 0usize;
    for r in &log.records {
        let t = record_term(params, r, m_clip, false)?;
        if t.clipped {
            clipped += 1;
        }
        u.push(t.u);
    }
    Ok(ClippedTerms::from_terms(u, clipped))
}

/// Training objective: clipped mean plus `lambda * sqrt(Var / n)`.
pub fn crm_objective(log: &LoggedDataset, params: &PolicyParams, cfg: &CrmConfig) -> Result<f64, LearnerError> {
    if log.is_empty() {
        return Err(LearnerError::Empty);
    }
    if !(cfg.m_clip > 0.0) {
        return Err(LearnerError::BadClip(cfg.m_clip));
    }
    let value = if cfg.lambda == 0.0 {
        crate::estimator::clipped_mean(log, params, cfg.m_clip)?
    } else {
        let terms = anchor_terms(log, params, cfg.m_clip)?;
        terms.mean + cfg.lambda * libm::sqrt(terms.variance / log.len() as f64)
    };
    debug_assert!(objective_in_range(value, log.len(), cfg), "objective {value} out of admissible range");
    Ok(value)
}

/// Admissible range of the objective given translated losses in [-1, 0]:
/// the mean lies in [-M, 0] and the penalty in [0, lambda*M/(2*sqrt(n))].
pub fn objective_in_range(value: f64, n: usize, cfg: &CrmConfig) -> bool {
    let penalty_max = cfg.lambda * cfg.m_clip / (2.0 * libm::sqrt(n as f64));
    let slack = 1e-9 * (1.0 + cfg.m_clip);
    value >= -cfg.m_clip - penalty_max - slack && value <= penalty_max + slack
}

/// Exact gradient of [`crm_objective`], flattened q-by-p row-major.
///
/// The variance part is expanded analytically through
/// `Var = (sum u^2 - n*mean^2)/(n-1)`; at zero variance it is defined as 0.
pub fn crm_gradient(log: &LoggedDataset, params: &PolicyParams, cfg: &CrmConfig) -> Result<Vec<f64>, LearnerError> {
    if log.is_empty() {
        return Err(LearnerError::Empty);
    }
    let n = log.len();
    let p = params.p() as usize;
    let q = params.q() as usize;
    let mut grad = vec![0.0f64; q * p];

    let mut terms = Vec::with_capacity(n);
    for r in &log.records {
        terms.push(record_term(params, r, cfg.m_clip, true)?);
    }
    let mean = terms.iter().map(|t| t.u).sum::<f64>() / n as f64;
    for (t, r) in terms.iter().zip(&log.records) {
        add_scaled_record_grad(&mut grad, t, &r.x, p, 1.0 / n as f64);
    }

    if cfg.lambda > 0.0 && n >= 2 {
        let variance = terms.iter().map(|t| (t.u - mean) * (t.u - mean)).sum::<f64>() / (n - 1) as f64;
        if variance > EPSILON_VAR {
            // d/dw [lambda*sqrt(Var/n)] =
            //   lambda / (sqrt(n*Var) * (n-1)) * sum (u_i - mean) * grad u_i
            let scale = cfg.lambda / (libm::sqrt(variance * n as f64) * (n - 1) as f64);
            for (t, r) in terms.iter().zip(&log.records) {
                add_scaled_record_grad(&mut grad, t, &r.x, p, scale * (t.u - mean));
            }
        }
    }
    Ok(grad)
}

/// Tangent majorizer coefficients at the anchor terms. A degenerate anchor
/// (zero variance) is floored at `EPSILON_VAR` and flagged.
pub fn majorizer(anchor: &ClippedTerms) -> MajorizerCoeffs {
    let n = anchor.n() as f64;
    let floored = anchor.variance <= EPSILON_VAR;
    let var = if floored { EPSILON_VAR } else { anchor.variance };
    let sd = libm::sqrt(var);
    let denom = (n - 1.0) * sd;
    MajorizerCoeffs {
        a: -anchor.mean / denom,
        b: 1.0 / (2.0 * denom),
        c: n * anchor.mean * anchor.mean / (2.0 * denom) + sd / 2.0,
        anchor_mean: anchor.mean,
        anchor_var: var,
        floored,
    }
}

impl MajorizerCoeffs {
    /// Majorizer value `A*sum(u) + B*sum(u^2) + C` for arbitrary terms.
    pub fn evaluate(&self, u: &[f64]) -> f64 {
        let s1: f64 = u.iter().sum();
        let s2: f64 = u.iter().map(|&ui| ui * ui).sum();
        self.a * s1 + self.b * s2 + self.c
    }
}

/// Surrogate objective with frozen majorizer coefficients:
/// `mean(u) + (lambda/sqrt(n)) * (A*sum u + B*sum u^2 + C)`.
/// Equals the true objective at the anchor and upper-bounds it elsewhere.
pub fn surrogate_objective(
    log: &LoggedDataset,
    params: &PolicyParams,
    cfg: &CrmConfig,
    coeffs: &MajorizerCoeffs,
) -> Result<f64, LearnerError> {
    let terms = anchor_terms(log, params, cfg.m_clip)?;
    let n = log.len() as f64;
    Ok(terms.mean + cfg.lambda / libm::sqrt(n) * coeffs.evaluate(&terms.u))
}

/// Gradient of [`surrogate_objective`]: each record contributes
/// `(1/n) * (1 + lambda*sqrt(n)*(A + 2*B*u_i)) * grad u_i`.
pub fn surrogate_gradient(
    log: &LoggedDataset,
    params: &PolicyParams,
    cfg: &CrmConfig,
    coeffs: &MajorizerCoeffs,
) -> Result<Vec<f64>, LearnerError> {
    let n = log.len();
    let p = params.p() as usize;
    let q = params.q() as usize;
    let sqrt_n = libm::sqrt(n as f64);
    let mut grad = vec![0.0f64; q * p];
    for r in &log.records {
        let t = record_term(params, r, cfg.m_clip, true)?;
        let scale = (1.0 + cfg.lambda * sqrt_n * (coeffs.a + 2.0 * coeffs.b * t.u)) / n as f64;
        add_scaled_record_grad(&mut grad, &t, &r.x, p, scale);
    }
    Ok(grad)
}

fn stats_for(
    log: &LoggedDataset,
    params: &PolicyParams,
    cfg: &CrmConfig,
    epoch: u32,
    prog_val: f64,
) -> Result<(EpochStats, Vec<f64>), LearnerError> {
    // One pass computes the per-record terms with gradient coefficients;
    // mean, variance, clip fraction and both gradient contributions are
    // assembled from it without re-scoring the log.
    let n = log.len();
    let p = params.p() as usize;
    let q = params.q() as usize;
    let mut terms = Vec::with_capacity(n);
    let mut clipped = 0usize;
    for r in &log.records {
        let t = record_term(params, r, cfg.m_clip, true)?;
        if t.clipped {
            clipped += 1;
        }
        terms.push(t);
    }
    let mean = terms.iter().map(|t| t.u).sum::<f64>() / n as f64;
    let variance = if n >= 2 {
        terms.iter().map(|t| (t.u - mean) * (t.u - mean)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    let objective = mean + cfg.lambda * libm::sqrt(variance / n as f64);

    let mut grad = vec![0.0f64; q * p];
    for (t, r) in terms.iter().zip(&log.records) {
        add_scaled_record_grad(&mut grad, t, &r.x, p, 1.0 / n as f64);
    }
    if cfg.lambda > 0.0 && n >= 2 && variance > EPSILON_VAR {
        let scale = cfg.lambda / (libm::sqrt(variance * n as f64) * (n - 1) as f64);
        for (t, r) in terms.iter().zip(&log.records) {
            add_scaled_record_grad(&mut grad, t, &r.x, p, scale * (t.u - mean));
        }
    }
    let grad_norm = l2_norm(&grad);
    Ok((
        EpochStats {
            epoch,
            objective,
            mean,
            variance,
            grad_norm,
            clip_fraction: clipped as f64 / n as f64,
            prog_val,
        },
        grad,
    ))
}

/// Full-gradient descent on the exact objective with an Armijo backtracking
/// line search. Plays the batch-optimizer role for both the plain clipped
/// estimator (lambda = 0) and the variance-regularized objective.
pub fn train_batch(
    log: &LoggedDataset,
    cfg: &CrmConfig,
    init: &PolicyParams,
) -> Result<(PolicyParams, TrainTrace), LearnerError> {
    if log.is_empty() {
        return Err(LearnerError::Empty);
    }
    let mut params = init.clone();
    let mut trace = TrainTrace { epochs: Vec::new(), stop: StopReason::MaxEpochs, variance_floored: false };
    let mut objective = crm_objective(log, &params, cfg)?;

    for epoch in 0..cfg.max_epochs {
        let (stats, grad) = stats_for(log, &params, cfg, epoch, f64::NAN)?;
        trace.epochs.push(stats.clone());
        let w_norm = l2_norm(params.weights());
        if stats.grad_norm < cfg.tol_grad * (1.0 + w_norm) {
            trace.stop = StopReason::GradientTolerance;
            return Ok((params, trace));
        }

        let g_sq = grad.iter().map(|&g| g * g).sum::<f64>();
        let try_step = |eta: f64| -> Result<(PolicyParams, f64), LearnerError> {
            let mut trial = params.clone();
            for (wk, gk) in trial.weights_mut().iter_mut().zip(&grad) {
                *wk -= eta * gk;
            }
            let f_trial = crm_objective(log, &trial, cfg)?;
            Ok((trial, f_trial))
        };

        // Memoryless search: the chosen step depends only on the current
        // iterate, so restarting from a returned optimum replays the same
        // stopping decision. Start at the base rate, grow by doubling while
        // the Armijo test keeps improving, otherwise backtrack by halving.
        let mut eta = cfg.lr;
        let mut accepted: Option<(PolicyParams, f64)> = None;
        let (trial, f_trial) = try_step(eta)?;
        if f_trial <= objective - ARMIJO_C * eta * g_sq {
            accepted = Some((trial, f_trial));
            for _ in 0..MAX_DOUBLINGS {
                let eta2 = eta * 2.0;
                let (trial2, f_trial2) = try_step(eta2)?;
                let best_f = accepted.as_ref().map(|&(_, f)| f).unwrap_or(objective);
                if f_trial2 <= objective - ARMIJO_C * eta2 * g_sq && f_trial2 < best_f {
                    accepted = Some((trial2, f_trial2));
                    eta = eta2;
                } else {
                    break;
                }
            }
        } else {
            for _ in 0..MAX_HALVINGS {
                eta *= 0.5;
                let (trial, f_trial) = try_step(eta)?;
                if f_trial <= objective - ARMIJO_C * eta * g_sq {
                    accepted = Some((trial, f_trial));
                    break;
                }
            }
        }

        match accepted {
            Some((new_params, f_new)) => {
                let rel_change = (objective - f_new).abs() / (1.0 + objective.abs());
                params = new_params;
                objective = f_new;
                if rel_change < cfg.tol_obj {
                    trace.stop = StopReason::ObjectiveTolerance;
                    return Ok((params, trace));
                }
            }
            None => {
                trace.stop = StopReason::LineSearchFailed;
                return Ok((params, trace));
            }
        }
    }
    Ok((params, trace))
}

/// Stochastic iterated-majorization training with minibatch AdaGrad.
///
/// Each epoch freezes the majorizer coefficients at the epoch-start iterate,
/// then sweeps seed-shuffled minibatches applying the averaged per-sample
/// update with per-coordinate adaptive scaling `lr / sqrt(eps + sum g^2)`;
/// the accumulator persists across epochs. Progressive validation scores
/// every minibatch before it is trained on; the returned policy is the
/// epoch-end iterate with the best progressive-validation loss.
pub fn train_stochastic(
    log: &LoggedDataset,
    cfg: &CrmConfig,
    init: &PolicyParams,
) -> Result<(PolicyParams, TrainTrace), LearnerError> {
    let n = log.len();
    if n == 0 {
        return Err(LearnerError::Empty);
    }
    if cfg.lambda > 0.0 && n < 2 {
        return Err(LearnerError::TooFewRecords);
    }
    let p = init.p() as usize;
    let q = init.q() as usize;
    let sqrt_n = libm::sqrt(n as f64);
    let batch = cfg.minibatch.max(1).min(n);

    let mut params = init.clone();
    let mut trace = TrainTrace { epochs: Vec::new(), stop: StopReason::MaxEpochs, variance_floored: false };
    let mut adagrad_acc = vec![0.0f64; q * p];
    let mut grad_buf = vec![0.0f64; q * p];

    let mut best_params = params.clone();
    let mut best_prog_val = f64::INFINITY;
    let mut epochs_since_best = 0u32;
    let mut have_best = false;

    for epoch in 0..cfg.max_epochs {
        let coeffs = if cfg.lambda > 0.0 {
            let anchor = anchor_terms(log, &params, cfg.m_clip)?;
            let c = majorizer(&anchor);
            trace.variance_floored |= c.floored;
            Some(c)
        } else {
            None
        };

        let mut rng = derive_rng(cfg.seed, rng_stream::TRAIN_SHUFFLE, epoch as u64);
        let order = shuffled_indices(n, &mut rng);
        let mut prog_val_sum = 0.0;

        for chunk in order.chunks(batch) {
            grad_buf.iter_mut().for_each(|g| *g = 0.0);
            for &i in chunk {
                let r = &log.records[i];
                let t = record_term(&params, r, cfg.m_clip, true)?;
                // Progressive validation: unclipped counterfactual estimate
                // of this record before the update that consumes it.
                let lp = policy::log_prob(&params, &r.x, &r.y)?;
                prog_val_sum += r.loss * libm::exp(lp - libm::log(r.propensity));
                let scale = match &coeffs {
                    Some(c) => 1.0 + cfg.lambda * sqrt_n * (c.a + 2.0 * c.b * t.u),
                    None => 1.0,
                } / chunk.len() as f64;
                add_scaled_record_grad(&mut grad_buf, &t, &r.x, p, scale);
            }
            let w = params.weights_mut();
            for k in 0..w.len() {
                let g = grad_buf[k];
                if g != 0.0 {
                    adagrad_acc[k] += g * g;
                    w[k] -= cfg.lr * g / libm::sqrt(ADAGRAD_EPS + adagrad_acc[k]);
                }
            }
        }

        let prog_val = prog_val_sum / n as f64;
        let (stats, _) = stats_for(log, &params, cfg, epoch, prog_val)?;
        trace.epochs.push(stats.clone());

        if stats.objective > cfg.m_clip {
            trace.stop = StopReason::Diverged;
            return Ok((if have_best { best_params } else { init.clone() }, trace));
        }

        if prog_val < best_prog_val {
            best_prog_val = prog_val;
            best_params = params.clone();
            have_best = true;
            epochs_since_best = 0;
        } else {
            epochs_since_best += 1;
        }

        let w_norm = l2_norm(params.weights());
        if stats.grad_norm < cfg.tol_grad * (1.0 + w_norm) {
            trace.stop = StopReason::GradientTolerance;
            return Ok((params, trace));
        }
        if epochs_since_best >= cfg.patience {
            trace.stop = StopReason::PatienceExhausted;
            return Ok((best_params, trace));
        }
    }
    Ok((if have_best { best_params } else { params }, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{LabelVector, SparseVector};
    use crate::logsim::{BanditRecord, LoggedDataset, LoggingMeta};

    fn fixture_log() -> LoggedDataset {
        let rows: [(&[(u32, f64)], &[bool], f64, f64); 5] = [
            (&[(0, 1.0), (2, -0.5)], &[true, false, true], -1.0, 0.2),
            (&[(1, 0.5)], &[false, true, false], -0.6, 0.4),
            (&[(0, -1.0), (3, 2.0)], &[true, true, false], -0.2, 0.1),
            (&[(2, 1.5)], &[false, false, false], 0.0, 0.5),
            (&[(1, 1.0), (4, -2.0)], &[false, true, true], -0.8, 0.3),
        ];
        LoggedDataset {
            records: rows
                .iter()
                .map(|&(e, bits, loss, propensity)| BanditRecord {
                    x: SparseVector::new(e.to_vec()).unwrap(),
                    y: LabelVector::new(bits.to_vec()),
                    loss,
                    propensity,
                })
                .collect(),
            q: 3,
            loss_bounds: (0.0, 3.0),
            meta: LoggingMeta::unknown(),
        }
    }

    #[test]
    fn lambda_zero_objective_is_clipped_mean() {
        let log = fixture_log();
        let params = PolicyParams::zeros(3, 5);
        let cfg = CrmConfig { m_clip: 2.0, ..Default::default() };
        let obj = crm_objective(&log, &params, &cfg).unwrap();
        let mean = crate::estimator::clipped_terms(&log, &params, 2.0).unwrap().mean;
        assert_eq!(obj, mean);
    }

    #[test]
    fn uniform_policy_objective_matches_direct_formula() {
        let log = fixture_log();
        let params = PolicyParams::zeros(3, 5);
        let cfg = CrmConfig { m_clip: 1.5, ..Default::default() };
        let expected: f64 = log
            .records
            .iter()
            .map(|r| r.loss * (0.125 / r.propensity).min(1.5))
            .sum::<f64>()
            / 5.0;
        assert!((crm_objective(&log, &params, &cfg).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn all_zero_losses_objective_zero() {
        let mut log = fixture_log();
        for r in &mut log.records {
            r.loss = 0.0;
        }
        let params = PolicyParams::new(alloc::vec![0.1; 15], 3, 5, 1.0).unwrap();
        let cfg = CrmConfig { m_clip: 2.0, lambda: 0.7, ..Default::default() };
        assert_eq!(crm_objective(&log, &params, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn tiny_clip_gradient_is_zero() {
        let log = fixture_log();
        let params = PolicyParams::zeros(3, 5);
        let cfg = CrmConfig { m_clip: 1e-9, lambda: 0.5, ..Default::default() };
        let grad = crm_gradient(&log, &params, &cfg).unwrap();
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn majorizer_identity_at_anchor() {
        let log = fixture_log();
        let params = PolicyParams::zeros(3, 5);
        let anchor = anchor_terms(&log, &params, 2.0).unwrap();
        let coeffs = majorizer(&anchor);
        let q_at_anchor = coeffs.evaluate(&anchor.u);
        assert!((q_at_anchor - libm::sqrt(anchor.variance)).abs() < 1e-10);
        assert!(!coeffs.floored);
        assert!(coeffs.b > 0.0);
    }

    #[test]
    fn majorizer_degenerate_anchor_flagged() {
        let anchor = ClippedTerms::from_terms(alloc::vec![-0.5; 8], 0);
        let coeffs = majorizer(&anchor);
        assert!(coeffs.floored);
        assert!(coeffs.b.is_finite() && coeffs.b > 0.0);
    }

    #[test]
    fn batch_training_descends_and_is_stationary_at_optimum() {
        let log = fixture_log();
        let cfg = CrmConfig {
            m_clip: 2.0,
            lambda: 0.0,
            lr: 0.5,
            max_epochs: 5000,
            ..Default::default()
        };
        let init = PolicyParams::zeros(3, 5);
        let (opt, trace) = train_batch(&log, &cfg, &init).unwrap();
        for pair in trace.epochs.windows(2) {
            assert!(pair[1].objective <= pair[0].objective + 1e-12);
        }
        assert_ne!(trace.stop, StopReason::MaxEpochs);
        // Restarting from the optimum converges immediately.
        let (_, trace2) = train_batch(&log, &cfg, &opt).unwrap();
        assert!(trace2.epochs.len() <= 1, "restart took {} epochs", trace2.epochs.len());
    }

    #[test]
    fn stochastic_deterministic_given_seed() {
        let log = fixture_log();
        let cfg = CrmConfig { m_clip: 2.0, lambda: 0.3, minibatch: 2, lr: 0.2, max_epochs: 15, seed: 4, ..Default::default() };
        let init = PolicyParams::zeros(3, 5);
        let (w1, _) = train_stochastic(&log, &cfg, &init).unwrap();
        let (w2, _) = train_stochastic(&log, &cfg, &init).unwrap();
        assert_eq!(w1, w2);
    }

    #[test]
    fn lambda_zero_stochastic_matches_plain_ips_update_scale() {
        // With lambda = 0 the majorized update reduces to the plain clipped
        // importance-weighted gradient; the trainer must not touch the
        // majorizer path at all (no variance flooring possible).
        let log = fixture_log();
        let cfg = CrmConfig { m_clip: 2.0, lambda: 0.0, minibatch: 5, lr: 0.2, max_epochs: 10, ..Default::default() };
        let (_, trace) = train_stochastic(&log, &cfg, &PolicyParams::zeros(3, 5)).unwrap();
        assert!(!trace.variance_floored);
    }
}
