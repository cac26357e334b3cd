//! Stochastic linear multi-label policy.
//!
//! The exponential model over label bitvectors with the feature map
//! `x (x) y` factorizes into q independent Bernoulli distributions, one per
//! label, with success probability `sigmoid(score_j)`. Every probability,
//! sampling, expectation and partition computation below uses that closed
//! form, so each operation costs O(q * nnz(x)) instead of O(2^q).

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand_core::RngCore;

use crate::dataset::{LabelVector, SparseVector};
use crate::rng::uniform_f64;

/// Weight matrix of a stochastic linear policy, q label rows by p feature
/// columns, plus a temperature multiplier applied at scoring time.
///
/// The temperature is stored separately from the weights so sweeps over
/// alpha never mutate logged weights.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PolicyParams {
    w: Vec<f64>,
    p: u32,
    q: u32,
    alpha: f64,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PolicyError {
    #[error("weight matrix length {len} != q*p = {qp}")]
    Shape { len: usize, qp: usize },
    #[error("non-finite weight entry")]
    NonFinite,
    #[error("temperature must be positive, got {0}")]
    BadAlpha(f64),
    #[error("feature index {index} out of range (p = {p})")]
    FeatureIndex { index: u32, p: u32 },
    #[error("policy file: {0}")]
    Format(String),
}

impl PolicyParams {
    pub fn zeros(q: u32, p: u32) -> Self {
        Self { w: alloc::vec![0.0; (q as usize) * (p as usize)], p, q, alpha: 1.0 }
    }

    pub fn new(w: Vec<f64>, q: u32, p: u32, alpha: f64) -> Result<Self, PolicyError> {
        if w.len() != (q as usize) * (p as usize) {
            return Err(PolicyError::Shape { len: w.len(), qp: (q as usize) * (p as usize) });
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(PolicyError::NonFinite);
        }
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(PolicyError::BadAlpha(alpha));
        }
        Ok(Self { w, p, q, alpha })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.w
    }

    pub fn row(&self, j: usize) -> &[f64] {
        let p = self.p as usize;
        &self.w[j * p..(j + 1) * p]
    }

    /// Returns the same distribution family member with temperature `alpha`
    /// substituted; weights are shared semantics, MAP is unchanged.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self, PolicyError> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(PolicyError::BadAlpha(alpha));
        }
        Ok(Self { w: self.w.clone(), p: self.p, q: self.q, alpha })
    }

    /// Versioned textual weight file, round-trip stable through `from_text`.
    pub fn to_text(&self) -> String {
        let mut out = format!("crm-policy v1\n{} {} {}\n", self.p, self.q, self.alpha);
        let p = self.p as usize;
        for j in 0..self.q as usize {
            let row: Vec<String> = self.w[j * p..(j + 1) * p].iter().map(|v| format!("{v}")).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, PolicyError> {
        let mut lines = text.lines();
        let magic = lines.next().unwrap_or("");
        if magic != "crm-policy v1" {
            return Err(PolicyError::Format(format!("bad magic line `{magic}`")));
        }
        let header = lines.next().ok_or_else(|| PolicyError::Format(String::from("missing header")))?;
        let mut it = header.split_whitespace();
        let parse = |s: Option<&str>| -> Result<f64, PolicyError> {
            s.and_then(|t| t.parse().ok())
                .ok_or_else(|| PolicyError::Format(String::from("bad header field")))
        };
        let p = parse(it.next())? as u32;
        let q = parse(it.next())? as u32;
        let alpha = parse(it.next())?;
        let mut w = Vec::with_capacity((q as usize) * (p as usize));
        for line in lines.take(q as usize) {
            for tok in line.split_whitespace() {
                let v: f64 = tok
                    .parse()
                    .map_err(|_| PolicyError::Format(format!("bad weight `{tok}`")))?;
                w.push(v);
            }
        }
        Self::new(w, q, p, alpha)
    }
}

/// Numerically stable logistic function.
pub fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + libm::exp(-s))
    } else {
        let e = libm::exp(s);
        e / (1.0 + e)
    }
}

/// log(1 + exp(s)) with overflow guards: s above 30 returns s, below -30
/// returns 0.
pub fn softplus(s: f64) -> f64 {
    if s > 30.0 {
        s
    } else if s < -30.0 {
        0.0
    } else {
        libm::log1p(libm::exp(s))
    }
}

/// Per-label scores `alpha * (row_j(w) . x)`.
pub fn scores(params: &PolicyParams, x: &SparseVector) -> Result<Vec<f64>, PolicyError> {
    if x.dim_lower_bound() > params.p {
        return Err(PolicyError::FeatureIndex { index: x.dim_lower_bound() - 1, p: params.p });
    }
    Ok((0..params.q as usize)
        .map(|j| params.alpha * x.dot(params.row(j)))
        .collect())
}

fn log_prob_from_scores(s: &[f64], y: &LabelVector) -> f64 {
    let mut lp = 0.0;
    for (j, &sj) in s.iter().enumerate() {
        lp += if y.get(j) { sj } else { 0.0 };
        lp -= softplus(sj);
    }
    lp
}

/// Log probability of the label vector under the policy.
pub fn log_prob(params: &PolicyParams, x: &SparseVector, y: &LabelVector) -> Result<f64, PolicyError> {
    let s = scores(params, x)?;
    Ok(log_prob_from_scores(&s, y))
}

/// Samples a label vector and returns it with its propensity.
///
/// The propensity is `exp(log_prob)` of the drawn vector, evaluated through
/// the same code path as `log_prob` so re-evaluation reproduces it exactly.
pub fn sample(
    params: &PolicyParams,
    x: &SparseVector,
    rng: &mut impl RngCore,
) -> Result<(LabelVector, f64), PolicyError> {
    let s = scores(params, x)?;
    let bits: Vec<bool> = s.iter().map(|&sj| uniform_f64(rng) < sigmoid(sj)).collect();
    let y = LabelVector::new(bits);
    let propensity = libm::exp(log_prob_from_scores(&s, &y));
    Ok((y, propensity))
}

/// Rank-1 representation of `E_{y ~ h(x)}[phi(x, y)]`: the per-label
/// marginals paired with the input vector; entry (j, k) is
/// `marginals[j] * x[k]`, never materialized densely.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedPhi {
    pub marginals: Vec<f64>,
    pub x: SparseVector,
}

impl ExpectedPhi {
    pub fn entry(&self, j: usize, k: u32) -> f64 {
        let xv = self
            .x
            .entries()
            .iter()
            .find(|&&(i, _)| i == k)
            .map_or(0.0, |&(_, v)| v);
        self.marginals[j] * xv
    }
}

/// Expectation of the feature map under the policy, as (marginals, x).
pub fn expected_phi(params: &PolicyParams, x: &SparseVector) -> Result<ExpectedPhi, PolicyError> {
    let s = scores(params, x)?;
    Ok(ExpectedPhi {
        marginals: s.iter().map(|&sj| sigmoid(sj)).collect(),
        x: x.clone(),
    })
}

/// MAP label vector: bit j set iff score_j > 0; ties at exactly zero
/// resolve to the absent label.
pub fn map_predict(params: &PolicyParams, x: &SparseVector) -> Result<LabelVector, PolicyError> {
    let s = scores(params, x)?;
    Ok(LabelVector::new(s.iter().map(|&sj| sj > 0.0).collect()))
}

/// Exact expected Hamming loss of the policy against the true labels:
/// each label contributes `sigma_j` when absent in `y_star` and
/// `1 - sigma_j` when present.
pub fn expected_hamming(
    params: &PolicyParams,
    x: &SparseVector,
    y_star: &LabelVector,
) -> Result<f64, PolicyError> {
    let s = scores(params, x)?;
    let mut loss = 0.0;
    for (j, &sj) in s.iter().enumerate() {
        let sig = sigmoid(sj);
        loss += if y_star.get(j) { 1.0 - sig } else { sig };
    }
    Ok(loss)
}
