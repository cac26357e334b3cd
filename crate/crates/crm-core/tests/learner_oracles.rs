//! Learner checks against numerical oracles: finite-difference gradients,
//! majorizer dominance, and per-epoch descent of the
//! majorize-minimize loop.

mod common;

use common::*;
use crm_core::dataset::LabelVector;
use crm_core::estimator;
use crm_core::learner::{self, CrmConfig, StopReason};
use crm_core::logsim::{BanditRecord, LoggedDataset, LoggingMeta};
use crm_core::policy::{self, PolicyParams};
use crm_core::rng::{derive_rng, uniform_usize};

const Q: u32 = 3;
const P: u32 = 5;

/// Small random log: contexts are random sparse vectors, predictions are
/// sampled from a random logging policy, losses are translated Hamming
/// against random ground-truth labels.
fn fixture_log(n: usize, seed: u64) -> LoggedDataset {
    let pi0 = random_policy(Q, P, 0.7, seed.wrapping_mul(3) + 1);
    let mut rng = derive_rng(seed, 0x61u64, 0);
    let records = (0..n)
        .map(|i| {
            let x = random_sparse(P, 3, seed.wrapping_mul(31) + i as u64);
            let y_star = LabelVector::new((0..Q as usize).map(|_| uniform_usize(&mut rng, 2) == 1).collect());
            let (y, propensity) = policy::sample(&pi0, &x, &mut rng).unwrap();
            let loss = (hamming_count(&y_star, &y) - Q as f64) / Q as f64;
            BanditRecord { x, y, loss, propensity }
        })
        .collect();
    LoggedDataset { records, q: Q, loss_bounds: (0.0, Q as f64), meta: LoggingMeta::unknown() }
}

fn numeric_gradient(
    log: &LoggedDataset,
    params: &PolicyParams,
    mut f: impl FnMut(&LoggedDataset, &PolicyParams) -> f64,
) -> Vec<f64> {
    let h = 1e-6;
    let dim = params.weights().len();
    (0..dim)
        .map(|k| {
            let mut plus = params.clone();
            plus.weights_mut()[k] += h;
            let mut minus = params.clone();
            minus.weights_mut()[k] -= h;
            (f(log, &plus) - f(log, &minus)) / (2.0 * h)
        })
        .collect()
}

fn assert_grad_close(analytic: &[f64], numeric: &[f64], tol: f64, what: &str) {
    let norm: f64 = numeric.iter().map(|g| g * g).sum::<f64>().sqrt();
    for (k, (a, g)) in analytic.iter().zip(numeric).enumerate() {
        let denom = norm.max(1.0);
        assert!(
            (a - g).abs() / denom <= tol,
            "{what}: coord {k} analytic {a} vs numeric {g} (grad norm {norm})"
        );
    }
}

/// Exact-objective gradient vs central differences, with a clip constant
/// large enough that no term sits on the kink of the min.
#[test]
fn objective_gradient_matches_finite_differences() {
    let log = fixture_log(10, 11);
    let params = random_policy(Q, P, 0.4, 77);
    for lambda in [0.0, 0.5, 5.0] {
        let cfg = CrmConfig { m_clip: 1e6, lambda, ..CrmConfig::default() };
        let analytic = learner::crm_gradient(&log, &params, &cfg).unwrap();
        let numeric = numeric_gradient(&log, &params, |l, w| learner::crm_objective(l, w, &cfg).unwrap());
        assert_grad_close(&analytic, &numeric, 1e-5, &format!("lambda={lambda}"));
    }
}

/// Surrogate gradient vs central differences of the surrogate objective,
/// with the majorizer frozen at a separate anchor point.
#[test]
fn surrogate_gradient_matches_finite_differences() {
    let log = fixture_log(10, 13);
    let anchor = random_policy(Q, P, 0.5, 88);
    let params = random_policy(Q, P, 0.4, 99);
    for lambda in [0.0, 0.5, 5.0] {
        let cfg = CrmConfig { m_clip: 1e6, lambda, ..CrmConfig::default() };
        let coeffs = learner::majorizer(&learner::anchor_terms(&log, &anchor, cfg.m_clip).unwrap());
        let analytic = learner::surrogate_gradient(&log, &params, &cfg, &coeffs).unwrap();
        let numeric = numeric_gradient(&log, &params, |l, w| {
            learner::surrogate_objective(l, w, &cfg, &coeffs).unwrap()
        });
        assert_grad_close(&analytic, &numeric, 1e-5, &format!("surrogate lambda={lambda}"));
    }
}

/// The quadratic majorizer dominates sqrt(variance) everywhere and touches
/// it at the anchor.
#[test]
fn majorizer_dominates_sqrt_variance() {
    let log = fixture_log(20, 17);
    let m_clip = 10.0;
    let anchor = random_policy(Q, P, 0.5, 3);
    let anchor_terms = learner::anchor_terms(&log, &anchor, m_clip).unwrap();
    let coeffs = learner::majorizer(&anchor_terms);

    // Equality at the anchor itself.
    let at_anchor = coeffs.evaluate(&anchor_terms.u);
    assert!(
        (at_anchor - anchor_terms.variance.sqrt()).abs() <= 1e-10,
        "majorizer at anchor {at_anchor} vs sqrt var {}",
        anchor_terms.variance.sqrt()
    );

    // Dominance at random other policies.
    for trial in 0..1000u64 {
        let other = random_policy(Q, P, 1.0, 10_000 + trial);
        let terms = learner::anchor_terms(&log, &other, m_clip).unwrap();
        let surrogate = coeffs.evaluate(&terms.u);
        assert!(
            surrogate >= terms.variance.sqrt() - 1e-12,
            "trial {trial}: surrogate {surrogate} < sqrt var {}",
            terms.variance.sqrt()
        );
    }
}

/// With lambda = 0 the objective is just the clipped mean.
#[test]
fn lambda_zero_objective_is_clipped_mean() {
    let log = fixture_log(25, 29);
    let params = random_policy(Q, P, 0.8, 4);
    let cfg = CrmConfig { m_clip: 2.0, lambda: 0.0, ..CrmConfig::default() };
    let obj = learner::crm_objective(&log, &params, &cfg).unwrap();
    let mean = estimator::clipped_mean(&log, &params, 2.0).unwrap();
    assert_eq!(obj, mean);
}

/// The batch trainer's exact objective never increases across epochs.
#[test]
fn batch_training_descends_monotonically() {
    let log = fixture_log(40, 41);
    for lambda in [0.0, 1.0] {
        let cfg = CrmConfig { m_clip: 5.0, lambda, max_epochs: 60, ..CrmConfig::default() };
        let (trained, trace) = learner::train_batch(&log, &cfg, &PolicyParams::zeros(Q, P)).unwrap();
        for pair in trace.epochs.windows(2) {
            assert!(
                pair[1].objective <= pair[0].objective + 1e-12,
                "objective rose from {} to {} at epoch {}",
                pair[0].objective,
                pair[1].objective,
                pair[1].epoch
            );
        }
        let final_obj = learner::crm_objective(&log, &trained, &cfg).unwrap();
        let init_obj = learner::crm_objective(&log, &PolicyParams::zeros(Q, P), &cfg).unwrap();
        assert!(final_obj < init_obj, "training must improve on the zero policy");
    }
}

/// Stochastic training with the per-epoch frozen majorizer also improves the
/// exact objective over the zero initializer and stops for a stated reason.
#[test]
fn stochastic_training_improves_objective() {
    let log = fixture_log(200, 53);
    let cfg = CrmConfig {
        m_clip: 5.0,
        lambda: 0.5,
        max_epochs: 80,
        minibatch: 20,
        lr: 0.2,
        seed: 7,
        ..CrmConfig::default()
    };
    let init = PolicyParams::zeros(Q, P);
    let (trained, trace) = learner::train_stochastic(&log, &cfg, &init).unwrap();
    assert!(!trace.epochs.is_empty());
    assert_ne!(trace.stop, StopReason::Diverged);
    let final_obj = learner::crm_objective(&log, &trained, &cfg).unwrap();
    let init_obj = learner::crm_objective(&log, &init, &cfg).unwrap();
    assert!(final_obj < init_obj, "final {final_obj} vs init {init_obj}");
    // Same config, same seed: the run is reproducible bit-for-bit.
    let (trained2, trace2) = learner::train_stochastic(&log, &cfg, &init).unwrap();
    assert_eq!(trained.weights(), trained2.weights());
    assert_eq!(trace.epochs, trace2.epochs);
}
