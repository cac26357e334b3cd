//! Optimizer tuning probe: train one method on a synthetic-yeast log with
//! different learning rates and epoch budgets, printing training objective,
//! validation estimate, test loss, and wall time. Development tool.

use std::time::Instant;

use crm_cli::harness::{self, evaluate_expected};
use crm_cli::synth::{self, SynthSpec};
use crm_core::estimator;
use crm_core::learner::CrmConfig;
use crm_core::logsim;
use crm_core::modelsel::{self, Optimizer};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let pi0_epochs: u32 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(harness::LOGISTIC_EPOCHS);
    let pi0_lr: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(harness::LOGISTIC_LR);
    let pi0_l2: f64 = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(harness::PI0_L2);

    let spec = SynthSpec::yeast();
    let (train, test) = synth::generate(&spec, 1);
    let seed = 0u64;
    let pi0 = logsim::train_logging_policy(&train, 0.05, seed, pi0_epochs, pi0_lr, pi0_l2).unwrap();
    let log = logsim::generate_log(&train, &pi0, 4, seed).unwrap();
    let parts = logsim::split_log(&log, &[0.75, 0.25], seed).unwrap();
    let (log_train, log_val) = (&parts[0], &parts[1]);
    let m_clip = modelsel::clip_constant(log_train, harness::M_RULE).unwrap();
    let mut props: Vec<f64> = log_train.records.iter().map(|r| r.propensity).collect();
    props.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pct = |p: usize| props[(p * props.len()) / 100];
    let mut modal = 0.0;
    for ex in train.examples.iter() {
        let s = crm_core::policy::scores(&pi0, &ex.x).unwrap();
        modal += s
            .iter()
            .map(|&v| {
                let p = crm_core::policy::sigmoid(v);
                p.max(1.0 - p)
            })
            .sum::<f64>()
            / s.len() as f64;
    }
    modal /= train.examples.len() as f64;
    println!(
        "pi0 test {:.4}, M = {m_clip:.1}, pi0 val {:.4}, prop p10/p50/p90 {:.2e}/{:.2e}/{:.2e}, modal {:.3}",
        evaluate_expected(&test, &pi0).unwrap(),
        estimator::counterfactual_validate(log_val, &pi0).unwrap(),
        pct(10),
        pct(50),
        pct(90),
        modal
    );

    let mode = args.get(1).map(String::as_str).unwrap_or("s");
    let optimizer = if mode == "b" { Optimizer::Batch } else { Optimizer::Stochastic };

    for &lr in &[0.05, 0.1, 0.5, 1.0, 2.0] {
        for &epochs in &[200u32, 600] {
            let cfg = CrmConfig { m_clip, lambda: 0.0, lr, max_epochs: epochs, seed, ..CrmConfig::default() };
            let t0 = Instant::now();
            let (params, trace) = modelsel::train_with(optimizer, log_train, &cfg, &pi0).unwrap();
            let secs = t0.elapsed().as_secs_f64();
            let last = trace.epochs.last().unwrap();
            println!(
                "{mode} lr {lr} epochs {epochs}: ran {} stop {:?} obj {:.4} val {:.4} test {:.4} ({secs:.1}s)",
                trace.epochs.len(),
                trace.stop,
                last.objective,
                estimator::counterfactual_validate(log_val, &params).unwrap(),
                evaluate_expected(&test, &params).unwrap()
            );
        }
    }
}
