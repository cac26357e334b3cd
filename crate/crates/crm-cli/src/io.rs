//! File-format glue: corpora, logged datasets, and policies on disk.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use crm_core::dataset::{self, Corpus, IndexBase};
use crm_core::logsim::LoggedDataset;
use crm_core::policy::PolicyParams;

/// Loads a multi-label corpus from a LibSVM-style text file.
pub fn load_corpus(
    path: &Path,
    base: IndexBase,
    q_override: Option<u32>,
    p_override: Option<u32>,
) -> Result<Corpus> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "corpus".into());
    let mut corpus = dataset::parse_multilabel(&text, base, q_override, &name)
        .with_context(|| format!("parsing {}", path.display()))?;
    if let Some(p) = p_override {
        anyhow::ensure!(
            p >= corpus.p,
            "feature-count override {p} below observed maximum {}",
            corpus.p
        );
        corpus.p = p;
    }
    Ok(corpus)
}

pub fn save_corpus(path: &Path, corpus: &Corpus) -> Result<()> {
    fs::write(path, dataset::serialize_multilabel(corpus))
        .with_context(|| format!("writing {}", path.display()))
}

pub fn load_log(path: &Path) -> Result<LoggedDataset> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let log = LoggedDataset::from_text(&text).with_context(|| format!("parsing {}", path.display()))?;
    log.validate()?;
    Ok(log)
}

pub fn save_log(path: &Path, log: &LoggedDataset) -> Result<()> {
    fs::write(path, log.to_text()).with_context(|| format!("writing {}", path.display()))
}

pub fn load_policy(path: &Path) -> Result<PolicyParams> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    PolicyParams::from_text(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn save_policy(path: &Path, params: &PolicyParams) -> Result<()> {
    fs::write(path, params.to_text()).with_context(|| format!("writing {}", path.display()))
}
