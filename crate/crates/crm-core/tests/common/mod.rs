//! Brute-force oracles shared by the integration tests. Everything here
//! enumerates the 2^q label space directly and stays independent of the
//! library's closed-form code paths.
#![allow(dead_code)] // each test binary uses a different subset

use crm_core::dataset::{LabelVector, SparseVector};
use crm_core::policy::PolicyParams;

/// All 2^q label vectors in counting order.
pub fn enumerate_labels(q: usize) -> Vec<LabelVector> {
    (0..(1u32 << q))
        .map(|bits| LabelVector::new((0..q).map(|j| bits >> j & 1 == 1).collect()))
        .collect()
}

/// Probability of `y` by direct evaluation of exp(score.y) / Z(x), with the
/// partition function summed over the full label space.
pub fn brute_force_prob(params: &PolicyParams, x: &SparseVector, y: &LabelVector) -> f64 {
    let q = params.q() as usize;
    let scores: Vec<f64> = (0..q).map(|j| params.alpha() * x.dot(params.row(j))).collect();
    let weight = |yv: &LabelVector| -> f64 {
        let dot: f64 = scores
            .iter()
            .enumerate()
            .map(|(j, &s)| if yv.get(j) { s } else { 0.0 })
            .sum();
        dot.exp()
    };
    let z: f64 = enumerate_labels(q).iter().map(&weight).sum();
    weight(y) / z
}

pub fn hamming_count(a: &LabelVector, b: &LabelVector) -> f64 {
    a.bits().iter().zip(b.bits()).filter(|(x, y)| x != y).count() as f64
}

/// Exact expected Hamming loss by enumeration.
pub fn brute_force_expected_hamming(params: &PolicyParams, x: &SparseVector, y_star: &LabelVector) -> f64 {
    enumerate_labels(params.q() as usize)
        .iter()
        .map(|y| brute_force_prob(params, x, y) * hamming_count(y_star, y))
        .sum()
}

/// Exact translated risk of policy `h` under contexts with true labels:
/// mean over contexts of sum_y h(y|x) * translated_hamming(y*, y).
pub fn brute_force_risk(h: &PolicyParams, data: &[(SparseVector, LabelVector)]) -> f64 {
    let q = h.q() as usize;
    data.iter()
        .map(|(x, y_star)| {
            enumerate_labels(q)
                .iter()
                .map(|y| {
                    let loss = (hamming_count(y_star, y) - q as f64) / q as f64;
                    brute_force_prob(h, x, y) * loss
                })
                .sum::<f64>()
        })
        .sum::<f64>()
        / data.len() as f64
}

/// Random small policy with weights uniform in [-scale, scale].
pub fn random_policy(q: u32, p: u32, scale: f64, seed: u64) -> PolicyParams {
    let mut rng = crm_core::rng::derive_rng(seed, 0xfeed, 0);
    let w = (0..(q as usize * p as usize))
        .map(|_| (crm_core::rng::uniform_f64(&mut rng) * 2.0 - 1.0) * scale)
        .collect();
    PolicyParams::new(w, q, p, 1.0).unwrap()
}

pub fn random_sparse(p: u32, nnz: usize, seed: u64) -> SparseVector {
    let mut rng = crm_core::rng::derive_rng(seed, 0xbeef, 0);
    let mut idx: Vec<u32> = (0..p).collect();
    // partial shuffle, take nnz indices
    for i in 0..nnz.min(p as usize) {
        let j = i + crm_core::rng::uniform_usize(&mut rng, p as usize - i);
        idx.swap(i, j);
    }
    let mut chosen: Vec<u32> = idx[..nnz.min(p as usize)].to_vec();
    chosen.sort_unstable();
    let entries = chosen
        .into_iter()
        .map(|i| (i, crm_core::rng::uniform_f64(&mut rng) * 2.0 - 1.0))
        .collect();
    SparseVector::new(entries).unwrap()
}
