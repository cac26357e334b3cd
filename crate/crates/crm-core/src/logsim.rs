//! Supervised-to-bandit conversion: train a stochastic logging policy on a
//! fraction of the supervised data, replay the training set sampling labels
//! from it, and record propensity-logged feedback with losses translated to
//! [-1, 0].

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand_core::RngCore;

use crate::dataset::{Corpus, LabelVector, SparseVector};
use crate::policy::{self, PolicyError, PolicyParams};
use crate::rng::{derive_rng, rng_stream, shuffled_indices, uniform_f64};

/// Untranslated loss value with its admissible bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawLoss {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
}

/// One unit of logged feedback: context, sampled prediction, translated
/// loss in [-1, 0], and the logging policy's propensity for the prediction.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BanditRecord {
    pub x: SparseVector,
    pub y: LabelVector,
    pub loss: f64,
    pub propensity: f64,
}

/// Knobs used to produce a log, kept with the data for reproducibility.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LoggingMeta {
    pub f: f64,
    pub alpha: f64,
    pub replay_count: u32,
    pub seed: u64,
}

impl LoggingMeta {
    pub fn unknown() -> Self {
        Self { f: 0.0, alpha: 1.0, replay_count: 0, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LoggedDataset {
    pub records: Vec<BanditRecord>,
    pub q: u32,
    /// (lower, upper) bounds of the raw loss before translation.
    pub loss_bounds: (f64, f64),
    pub meta: LoggingMeta,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum LogError {
    #[error("record {0}: propensity must be in (0, 1]")]
    BadPropensity(usize),
    #[error("record {0}: translated loss must be in [-1, 0]")]
    BadLoss(usize),
    #[error("record {record}: label length {len} != q = {q}")]
    LabelLength { record: usize, len: usize, q: u32 },
    #[error("logging subset is empty (f too small)")]
    EmptySubset,
    #[error("replay_count must be >= 1")]
    BadReplayCount,
    #[error("degenerate loss range: upper must exceed lower")]
    DegenerateLossRange,
    #[error("label vectors have different lengths")]
    LengthMismatch,
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("log file line {line}: {reason}")]
    Format { line: usize, reason: String },
}

impl LoggedDataset {
    pub fn validate(&self) -> Result<(), LogError> {
        for (i, r) in self.records.iter().enumerate() {
            if !(r.propensity > 0.0 && r.propensity <= 1.0) {
                return Err(LogError::BadPropensity(i));
            }
            if !(-1.0..=0.0).contains(&r.loss) {
                return Err(LogError::BadLoss(i));
            }
            if r.y.len() != self.q as usize {
                return Err(LogError::LabelLength { record: i, len: r.y.len(), q: self.q });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Newline-delimited text form: a JSON header line, then one record per
    /// line as `loss propensity labels_bitstring idx:val ...`. Floats are
    /// printed in shortest-round-trip form, so decode(encode(d)) == d.
    pub fn to_text(&self) -> String {
        #[derive(serde::Serialize)]
        struct Header<'a> {
            q: u32,
            loss_lower: f64,
            loss_upper: f64,
            #[serde(flatten)]
            meta: &'a LoggingMeta,
        }
        let header = Header {
            q: self.q,
            loss_lower: self.loss_bounds.0,
            loss_upper: self.loss_bounds.1,
            meta: &self.meta,
        };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!("{} {} {}", r.loss, r.propensity, r.y.to_bitstring()));
            for &(i, v) in r.x.entries() {
                out.push_str(&format!(" {i}:{v}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, LogError> {
        #[derive(serde::Deserialize)]
        struct Header {
            q: u32,
            loss_lower: f64,
            loss_upper: f64,
            #[serde(flatten)]
            meta: LoggingMeta,
        }
        let mut lines = text.lines();
        let header_line = lines
            .next()
            .ok_or(LogError::Format { line: 1, reason: String::from("missing header") })?;
        let header: Header = serde_json::from_str(header_line)
            .map_err(|e| LogError::Format { line: 1, reason: format!("bad header: {e}") })?;
        let mut records = Vec::new();
        for (i, line) in lines.enumerate() {
            let lineno = i + 2;
            if line.trim().is_empty() {
                continue;
            }
            let mut tok = line.split_whitespace();
            let mut next_f64 = |what: &str| -> Result<f64, LogError> {
                tok.next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| LogError::Format { line: lineno, reason: format!("bad {what}") })
            };
            let loss = next_f64("loss")?;
            let propensity = next_f64("propensity")?;
            let bits = tok
                .next()
                .and_then(LabelVector::from_bitstring)
                .ok_or_else(|| LogError::Format { line: lineno, reason: String::from("bad label bitstring") })?;
            let mut entries = Vec::new();
            for t in tok {
                let (idx, val) = t
                    .split_once(':')
                    .and_then(|(a, b)| Some((a.parse::<u32>().ok()?, b.parse::<f64>().ok()?)))
                    .ok_or_else(|| LogError::Format { line: lineno, reason: format!("bad feature `{t}`") })?;
                entries.push((idx, val));
            }
            let x = SparseVector::new(entries)
                .map_err(|e| LogError::Format { line: lineno, reason: format!("{e}") })?;
            records.push(BanditRecord { x, y: bits, loss, propensity });
        }
        let out = Self {
            records,
            q: header.q,
            loss_bounds: (header.loss_lower, header.loss_upper),
            meta: header.meta,
        };
        out.validate()?;
        Ok(out)
    }
}

/// Hamming loss: the count of differing labels. Bounds are (0, q).
pub fn hamming(y_star: &LabelVector, y: &LabelVector) -> Result<RawLoss, LogError> {
    if y_star.len() != y.len() {
        return Err(LogError::LengthMismatch);
    }
    let value = y_star
        .bits()
        .iter()
        .zip(y.bits())
        .filter(|(a, b)| a != b)
        .count() as f64;
    Ok(RawLoss { value, lower: 0.0, upper: y.len() as f64 })
}

/// Affine translation `(loss - upper) / (upper - lower)` mapping the raw
/// range onto [-1, 0], the tightest range for which the clipped estimator
/// upper-bounds the true risk.
pub fn translate_loss(raw: RawLoss) -> Result<f64, LogError> {
    if !(raw.upper > raw.lower) {
        return Err(LogError::DegenerateLossRange);
    }
    Ok((raw.value - raw.upper) / (raw.upper - raw.lower))
}

/// Fits independent per-label logistic regressions by full-batch gradient
/// descent on a uniformly drawn (without replacement) f-fraction of the
/// corpus. Unregularized; temperature 1.
pub fn train_logging_policy(
    corpus: &Corpus,
    f: f64,
    seed: u64,
    epochs: u32,
    lr: f64,
    l2: f64,
) -> Result<PolicyParams, LogError> {
    let n = corpus.len();
    let m = libm::floor((n as f64) * f) as usize;
    if m == 0 {
        return Err(LogError::EmptySubset);
    }
    let mut rng = derive_rng(seed, rng_stream::LOGGING_SUBSET, 0);
    let order = shuffled_indices(n, &mut rng);
    let subset: Vec<usize> = order[..m].to_vec();
    fit_label_logistic(corpus, &subset, epochs, lr, l2)
}

/// Shared trainer for the logging policy and the full-information skyline:
/// per-label logistic regression, full-batch gradient descent with an
/// optional ridge penalty `l2` (pass 0 for plain maximum likelihood).
/// Regularization keeps a policy trained on a small subset from becoming
/// overconfident, which matters when it is used for logging: softer
/// probabilities mean more exploration and tamer importance weights.
pub fn fit_label_logistic(
    corpus: &Corpus,
    subset: &[usize],
    epochs: u32,
    lr: f64,
    l2: f64,
) -> Result<PolicyParams, LogError> {
    if subset.is_empty() {
        return Err(LogError::EmptySubset);
    }
    let (p, q) = (corpus.p as usize, corpus.q as usize);
    let mut params = PolicyParams::zeros(corpus.q, corpus.p);
    let m = subset.len() as f64;
    let mut grad = alloc::vec![0.0f64; q * p];
    for _ in 0..epochs {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for &i in subset {
            let ex = &corpus.examples[i];
            let s = policy::scores(&params, &ex.x)?;
            for j in 0..q {
                let residual = policy::sigmoid(s[j]) - if ex.y_star.get(j) { 1.0 } else { 0.0 };
                let row = &mut grad[j * p..(j + 1) * p];
                for &(k, v) in ex.x.entries() {
                    row[k as usize] += residual * v;
                }
            }
        }
        let w = params.weights_mut();
        for (wk, gk) in w.iter_mut().zip(&grad) {
            *wk -= lr * (gk / m + l2 * *wk);
        }
    }
    Ok(params)
}

/// Replays the corpus `replay_count` times, sampling a label vector from the
/// logging policy for every example and logging the translated Hamming loss
/// with the exact sampling propensity.
///
/// Each pass visits the corpus in a seed-shuffled order; every (pass,
/// example) pair gets its own derived random stream, so the output is
/// canonical regardless of how the work is scheduled.
pub fn generate_log(
    corpus: &Corpus,
    pi0: &PolicyParams,
    replay_count: u32,
    seed: u64,
) -> Result<LoggedDataset, LogError> {
    if replay_count == 0 {
        return Err(LogError::BadReplayCount);
    }
    let n = corpus.len();
    let q = corpus.q;
    let mut records = Vec::with_capacity(n * replay_count as usize);
    for pass in 0..replay_count {
        let mut order_rng = derive_rng(seed, rng_stream::LOG_ORDER, pass as u64);
        let order = shuffled_indices(n, &mut order_rng);
        for &i in &order {
            let ex = &corpus.examples[i];
            let mut rng = derive_rng(seed, rng_stream::LOG_SAMPLE, (pass as u64) * (n as u64) + i as u64);
            let (y, propensity) = policy::sample(pi0, &ex.x, &mut rng)?;
            let raw = hamming(&ex.y_star, &y)?;
            let loss = translate_loss(raw)?;
            records.push(BanditRecord { x: ex.x.clone(), y, loss, propensity });
        }
    }
    let log = LoggedDataset {
        records,
        q,
        loss_bounds: (0.0, q as f64),
        meta: LoggingMeta { f: 0.0, alpha: pi0.alpha(), replay_count, seed },
    };
    log.validate()?;
    Ok(log)
}

/// Replaces the temperature of the logging policy; the weight matrix and the
/// MAP prediction are unchanged, only the sharpness of the distribution.
pub fn scale_temperature(pi0: &PolicyParams, alpha: f64) -> Result<PolicyParams, LogError> {
    Ok(pi0.with_alpha(alpha)?)
}

/// Splits a logged dataset deterministically into contiguous-by-shuffle
/// parts, mirroring `dataset::split` for bandit records.
pub fn split_log(
    log: &LoggedDataset,
    fractions: &[f64],
    seed: u64,
) -> Result<Vec<LoggedDataset>, LogError> {
    let n = log.len();
    if n == 0 {
        return Err(LogError::EmptySubset);
    }
    let mut rng = derive_rng(seed, rng_stream::SPLIT, 1);
    let order = shuffled_indices(n, &mut rng);
    let total = libm::round((n as f64) * fractions.iter().sum::<f64>()) as usize;
    let mut sizes: Vec<usize> = fractions.iter().map(|&f| libm::floor((n as f64) * f) as usize).collect();
    let assigned: usize = sizes.iter().sum();
    if let Some(last) = sizes.last_mut() {
        *last += total.saturating_sub(assigned);
    }
    let mut parts = Vec::with_capacity(sizes.len());
    let mut cursor = 0;
    for &size in &sizes {
        let mut idx: Vec<usize> = order[cursor..cursor + size].to_vec();
        idx.sort_unstable();
        cursor += size;
        parts.push(LoggedDataset {
            records: idx.iter().map(|&i| log.records[i].clone()).collect(),
            q: log.q,
            loss_bounds: log.loss_bounds,
            meta: log.meta.clone(),
        });
    }
    Ok(parts)
}

/// Mean translated loss of a log; the logging policy's own estimated risk.
pub fn mean_loss(log: &LoggedDataset) -> f64 {
    if log.is_empty() {
        return 0.0;
    }
    log.records.iter().map(|r| r.loss).sum::<f64>() / log.len() as f64
}

// Used by tests and the synthetic acceptance fixtures.
#[doc(hidden)]
pub fn sample_uniform_label(q: usize, rng: &mut impl RngCore) -> LabelVector {
    LabelVector::new((0..q).map(|_| uniform_f64(rng) < 0.5).collect())
}
