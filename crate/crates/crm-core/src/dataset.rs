//! Sparse multi-label corpora: the LibSVM multi-label text format, immutable
//! in-memory storage, and deterministic splits.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::rng::{derive_rng, rng_stream, shuffled_indices};

/// Sparse feature vector with strictly increasing indices.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SparseVector {
    entries: Vec<(u32, f64)>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum VectorError {
    #[error("feature indices must be strictly increasing (index {0} repeated or out of order)")]
    IndexOrder(u32),
    #[error("non-finite feature value at index {0}")]
    NonFinite(u32),
}

impl SparseVector {
    pub fn new(entries: Vec<(u32, f64)>) -> Result<Self, VectorError> {
        let mut prev: Option<u32> = None;
        for &(idx, val) in &entries {
            if let Some(p) = prev {
                if idx <= p {
                    return Err(VectorError::IndexOrder(idx));
                }
            }
            if !val.is_finite() {
                return Err(VectorError::NonFinite(idx));
            }
            prev = Some(idx);
        }
        Ok(Self { entries })
    }

    pub fn empty() -> Self {
        Self { entries: Vec::new() }
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Largest index plus one, or 0 for the empty vector.
    pub fn dim_lower_bound(&self) -> u32 {
        self.entries.last().map_or(0, |&(i, _)| i + 1)
    }

    /// Dot product against a dense row of length >= every index.
    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.entries
            .iter()
            .map(|&(i, v)| dense[i as usize] * v)
            .sum()
    }
}

/// Fixed-length label bitvector for one example.
#[derive(Debug, Clone, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct LabelVector {
    bits: Vec<bool>,
}

impl LabelVector {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn zeros(q: usize) -> Self {
        Self { bits: alloc::vec![false; q] }
    }

    /// Builds a q-length vector from the set label ids.
    pub fn from_ids(ids: &[u32], q: usize) -> Self {
        let mut bits = alloc::vec![false; q];
        for &id in ids {
            bits[id as usize] = true;
        }
        Self { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, j: usize) -> bool {
        self.bits[j]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// `"0110..."` encoding, one character per label.
    pub fn to_bitstring(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    pub fn from_bitstring(s: &str) -> Option<Self> {
        let mut bits = Vec::with_capacity(s.len());
        for c in s.chars() {
            match c {
                '0' => bits.push(false),
                '1' => bits.push(true),
                _ => return None,
            }
        }
        Some(Self { bits })
    }
}

/// One fully labeled example of the simulation side.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SupervisedExample {
    pub x: SparseVector,
    pub y_star: LabelVector,
}

/// Immutable multi-label corpus.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Corpus {
    pub examples: Vec<SupervisedExample>,
    /// Feature count; every feature index is < p.
    pub p: u32,
    /// Label count; every `y_star` has length q.
    pub q: u32,
    pub name: String,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CorpusError {
    #[error("corpus has no examples")]
    Empty,
    #[error("example {example}: feature index {index} >= feature count {p}")]
    FeatureIndex { example: usize, index: u32, p: u32 },
    #[error("example {example}: label vector length {len} != label count {q}")]
    LabelLength { example: usize, len: usize, q: u32 },
}

impl Corpus {
    pub fn new(
        examples: Vec<SupervisedExample>,
        p: u32,
        q: u32,
        name: String,
    ) -> Result<Self, CorpusError> {
        if examples.is_empty() {
            return Err(CorpusError::Empty);
        }
        for (i, ex) in examples.iter().enumerate() {
            let bound = ex.x.dim_lower_bound();
            if bound > p {
                return Err(CorpusError::FeatureIndex { example: i, index: bound - 1, p });
            }
            if ex.y_star.len() != q as usize {
                return Err(CorpusError::LabelLength { example: i, len: ex.y_star.len(), q });
            }
        }
        Ok(Self { examples, p, q, name })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }
}

/// Whether feature indices in the input text start at 1 (LibSVM convention)
/// or at 0. Internally everything is 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexBase {
    One,
    Zero,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ParseError {
    #[error("line {line}: non-numeric token `{token}`")]
    BadToken { line: usize, token: String },
    #[error("line {line}: feature index 0 in a 1-based file")]
    ZeroIndexOneBased { line: usize },
    #[error("line {line}: feature indices not strictly increasing at {index}")]
    DecreasingIndex { line: usize, index: u32 },
    #[error("line {line}: non-finite feature value")]
    NonFinite { line: usize },
    #[error("line {line}: label id {id} >= declared label count {q}")]
    LabelOutOfRange { line: usize, id: u32, q: u32 },
    #[error("no examples found")]
    Empty,
}

/// Parses the LibSVM multi-label text format:
/// `label,label,... idx:val idx:val ...` per line, `#` starting a comment
/// line, blank lines skipped. The label list may be empty (line starts with
/// whitespace before the first feature).
///
/// `q_override` pins the label count; without it q = max label id + 1.
pub fn parse_multilabel(
    text: &str,
    base: IndexBase,
    q_override: Option<u32>,
    name: &str,
) -> Result<Corpus, ParseError> {
    let mut rows: Vec<(Vec<u32>, SparseVector)> = Vec::new();
    let mut max_feature: i64 = -1;
    let mut max_label: i64 = -1;

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.trim_end();
        if content.trim().is_empty() || content.trim_start().starts_with('#') {
            continue;
        }
        let starts_blank = content.starts_with(|c: char| c.is_whitespace());
        let mut tokens = content.split_whitespace();

        let mut labels: Vec<u32> = Vec::new();
        let mut first_feature: Option<&str> = None;
        if !starts_blank {
            let head = tokens.next().unwrap();
            if head.contains(':') {
                // No label list on this line.
                first_feature = Some(head);
            } else {
                for part in head.split(',') {
                    if part.is_empty() {
                        continue;
                    }
                    let id: u32 = part.parse().map_err(|_| ParseError::BadToken {
                        line,
                        token: String::from(part),
                    })?;
                    if let Some(q) = q_override {
                        if id >= q {
                            return Err(ParseError::LabelOutOfRange { line, id, q });
                        }
                    }
                    labels.push(id);
                    max_label = max_label.max(id as i64);
                }
            }
        }

        let mut entries: Vec<(u32, f64)> = Vec::new();
        let mut push_feature = |tok: &str| -> Result<(), ParseError> {
            let (idx_s, val_s) = tok.split_once(':').ok_or_else(|| ParseError::BadToken {
                line,
                token: String::from(tok),
            })?;
            let raw_idx: u32 = idx_s.parse().map_err(|_| ParseError::BadToken {
                line,
                token: String::from(idx_s),
            })?;
            let idx = match base {
                IndexBase::One => raw_idx
                    .checked_sub(1)
                    .ok_or(ParseError::ZeroIndexOneBased { line })?,
                IndexBase::Zero => raw_idx,
            };
            let val: f64 = val_s.parse().map_err(|_| ParseError::BadToken {
                line,
                token: String::from(val_s),
            })?;
            if !val.is_finite() {
                return Err(ParseError::NonFinite { line });
            }
            if let Some(&(prev, _)) = entries.last() {
                if idx <= prev {
                    return Err(ParseError::DecreasingIndex { line, index: idx });
                }
            }
            entries.push((idx, val));
            Ok(())
        };
        if let Some(tok) = first_feature {
            push_feature(tok)?;
        }
        for tok in tokens {
            push_feature(tok)?;
        }
        if let Some(&(last, _)) = entries.last() {
            max_feature = max_feature.max(last as i64);
        }
        let x = SparseVector { entries };
        rows.push((labels, x));
    }

    if rows.is_empty() {
        return Err(ParseError::Empty);
    }
    let p = (max_feature + 1) as u32;
    let q = q_override.unwrap_or((max_label + 1).max(0) as u32);
    let examples = rows
        .into_iter()
        .map(|(labels, x)| SupervisedExample { x, y_star: LabelVector::from_ids(&labels, q as usize) })
        .collect();
    Ok(Corpus { examples, p, q, name: String::from(name) })
}

/// Serializes a corpus back to the text format, always 0-based indices.
/// `parse_multilabel(serialize(c), IndexBase::Zero, Some(c.q), &c.name)`
/// reproduces `c` up to the inferred p.
pub fn serialize_multilabel(corpus: &Corpus) -> String {
    let mut out = String::new();
    for ex in &corpus.examples {
        let mut first = true;
        for (j, &b) in ex.y_star.bits().iter().enumerate() {
            if b {
                if !first {
                    out.push(',');
                }
                out.push_str(&format!("{j}"));
                first = false;
            }
        }
        if first {
            // Empty label set: lead with a space so the parser sees no labels.
            out.push(' ');
        }
        for &(i, v) in ex.x.entries() {
            out.push_str(&format!(" {i}:{v}"));
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SplitError {
    #[error("cannot split an empty corpus")]
    Empty,
    #[error("fractions must be positive and sum to at most 1 (sum = {0})")]
    BadFractions(f64),
}

/// Deterministic disjoint split. Part `i < last` gets `floor(fraction_i * n)`
/// examples; the last part absorbs the rounding remainder so the total is
/// `round(n * sum(fractions))`.
pub fn split(corpus: &Corpus, fractions: &[f64], seed: u64) -> Result<Vec<Corpus>, SplitError> {
    if corpus.is_empty() {
        return Err(SplitError::Empty);
    }
    let sum: f64 = fractions.iter().sum();
    if fractions.iter().any(|&f| f <= 0.0) || sum > 1.0 + 1e-12 {
        return Err(SplitError::BadFractions(sum));
    }
    let n = corpus.len();
    let mut rng = derive_rng(seed, rng_stream::SPLIT, 0);
    let order = shuffled_indices(n, &mut rng);

    let total = libm::round((n as f64) * sum) as usize;
    let mut sizes: Vec<usize> = fractions
        .iter()
        .map(|&f| libm::floor((n as f64) * f) as usize)
        .collect();
    let assigned: usize = sizes.iter().sum();
    if let Some(last) = sizes.last_mut() {
        *last += total.saturating_sub(assigned);
    }

    let mut parts = Vec::with_capacity(sizes.len());
    let mut cursor = 0usize;
    for (k, &size) in sizes.iter().enumerate() {
        let mut idx: Vec<usize> = order[cursor..cursor + size].to_vec();
        // Canonical order inside each part keeps downstream iteration stable.
        idx.sort_unstable();
        cursor += size;
        let examples = idx.iter().map(|&i| corpus.examples[i].clone()).collect();
        parts.push(Corpus {
            examples,
            p: corpus.p,
            q: corpus.q,
            name: format!("{}[{}]", corpus.name, k),
        });
    }
    Ok(parts)
}
