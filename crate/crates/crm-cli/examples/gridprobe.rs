//! Prints the full hyperparameter grid for one protocol seed: each
//! candidate's training objective, validation estimate, and true test
//! loss. Development tool for judging validation-selection quality.

use crm_cli::harness::{self, evaluate_expected};
use crm_cli::synth::{self, SynthSpec};
use crm_core::learner::CrmConfig;
use crm_core::logsim;
use crm_core::modelsel::{self, Optimizer};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let seed: u64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(1);
    let mode = args.get(2).map(String::as_str).unwrap_or("b");
    let max_epochs: u32 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(200);
    let optimizer = if mode == "b" { Optimizer::Batch } else { Optimizer::Stochastic };

    let spec = SynthSpec::yeast();
    let (train, test) = synth::generate(&spec, 1);
    let pi0 = logsim::train_logging_policy(&train, 0.05, seed, harness::PI0_EPOCHS, harness::PI0_LR, harness::PI0_L2).unwrap();
    let log = logsim::generate_log(&train, &pi0, 4, seed).unwrap();
    let parts = logsim::split_log(&log, &[0.75, 0.25], seed).unwrap();
    let (log_train, log_val) = (&parts[0], &parts[1]);
    let grid = modelsel::calibrate(log_train, &pi0, crm_core::modelsel::HyperGrid::default_c_values(), harness::M_RULE).unwrap();
    println!(
        "seed {seed} {mode}: pi0 test {:.4} val {:.4}  M {:.1} lambda* {:.1}",
        evaluate_expected(&test, &pi0).unwrap(),
        crm_core::estimator::counterfactual_validate(log_val, &pi0).unwrap(),
        grid.m_clip,
        grid.lambda_star
    );
    let base = CrmConfig { m_clip: grid.m_clip, seed, max_epochs, ..CrmConfig::default() };
    for &c in &grid.c_values {
        let cfg = CrmConfig { lambda: grid.lambda_for(c), ..base.clone() };
        let (params, trace) = modelsel::train_with(optimizer, log_train, &cfg, &pi0).unwrap();
        let val = crm_core::estimator::counterfactual_validate(log_val, &params).unwrap();
        let mut ws: Vec<f64> = log_val
            .records
            .iter()
            .map(|r| {
                let lp = crm_core::policy::log_prob(&params, &r.x, &r.y).unwrap();
                lp.exp() / r.propensity
            })
            .collect();
        ws.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let sw: f64 = ws.iter().sum();
        let sw2: f64 = ws.iter().map(|w| w * w).sum();
        let ess = sw * sw / sw2;
        println!(
            "c {c:>8.0e} lambda {:>9.3}: obj {:>8.4} val {:>8.4} test {:.4} wsum {:.0} ess {:.0} wmax {:.0}",
            cfg.lambda,
            trace.epochs.last().unwrap().objective,
            val,
            evaluate_expected(&test, &params).unwrap(),
            sw,
            ess,
            ws[ws.len() - 1]
        );
    }
}
