//! Learnability oracle: on a small synthetic task with a large replayed log,
//! clipped-IPS training should clearly beat the logging policy on true test
//! loss. Development tool.

use crm_cli::harness::{self, evaluate_expected};
use crm_cli::synth::{self, SynthSpec};
use crm_core::learner::CrmConfig;
use crm_core::logsim;
use crm_core::modelsel::{self, Optimizer};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let replay: u32 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(64);
    let signal: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(5.0);
    let l2: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(0.01);
    let q: u32 = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(3);
    let latent: usize = args.get(5).map(|s| s.parse().unwrap()).unwrap_or(8);
    let spec = SynthSpec {
        name: "tiny".into(),
        p: latent as u32 * 2 + 5,
        q,
        n_train: 800,
        n_test: 800,
        latent,
        signal,
        bias: (-0.5, 0.5),
        noise: 0.6,
        quad: 0.0,
    };
    let (train, test) = synth::generate(&spec, 1);
    let seed = 0u64;
    let pi0 = logsim::train_logging_policy(&train, 0.05, seed, 2000, harness::LOGISTIC_LR, l2).unwrap();
    let log = logsim::generate_log(&train, &pi0, replay, seed).unwrap();
    let all: Vec<usize> = (0..train.len()).collect();
    let crf = logsim::fit_label_logistic(&train, &all, 2000, harness::LOGISTIC_LR, harness::CRF_L2).unwrap();
    let m_clip = modelsel::clip_constant(&log, harness::M_RULE).unwrap();
    println!(
        "pi0 test {:.4}  crf test {:.4}  M {:.1}  n_log {}",
        evaluate_expected(&test, &pi0).unwrap(),
        evaluate_expected(&test, &crf).unwrap(),
        m_clip,
        log.records.len()
    );
    for &(m, lr) in &[(m_clip, 0.05), (m_clip, 0.5), (10.0, 0.05), (10.0, 0.5), (3.0, 0.5)] {
        let cfg = CrmConfig { m_clip: m, lambda: 0.0, lr, max_epochs: 400, seed, ..CrmConfig::default() };
        let (params, trace) = modelsel::train_with(Optimizer::Stochastic, &log, &cfg, &pi0).unwrap();
        println!(
            "M {m:.1} lr {lr}: ran {} obj {:.4} test {:.4}",
            trace.epochs.len(),
            trace.epochs.last().unwrap().objective,
            evaluate_expected(&test, &params).unwrap()
        );
    }
}
