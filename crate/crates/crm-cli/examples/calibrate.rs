//! Calibration probe for the synthetic presets: prints where the logging
//! policy and the full-information skyline land for a range of generator
//! signal strengths. Development tool, not part of the experiment protocol.

use crm_cli::harness::{self, evaluate_expected, evaluate_map};
use crm_cli::synth::{self, SynthSpec};
use crm_core::logsim;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let preset = args.get(1).map(String::as_str).unwrap_or("yeast");
    let signals: Vec<f64> = if args.len() > 2 {
        args[2..].iter().map(|s| s.parse().unwrap()).collect()
    } else {
        vec![2.0, 3.0, 4.0, 5.0]
    };

    let base = SynthSpec::preset(preset).expect("unknown preset");
    for &signal in &signals {
        let spec = SynthSpec { signal, ..base.clone() };
        let mut pi0_exp = vec![];
        let mut pi0_map = vec![];
        let mut crf_exp = vec![];
        let mut crf_map = vec![];
        for seed in 0..3u64 {
            let (train, test) = synth::generate(&spec, 1);
            let pi0 = logsim::train_logging_policy(
                &train,
                0.05,
                seed,
                harness::LOGISTIC_EPOCHS,
                harness::LOGISTIC_LR,
                harness::PI0_L2,
            )
            .unwrap();
            let all: Vec<usize> = (0..train.len()).collect();
            let crf =
                logsim::fit_label_logistic(&train, &all, harness::LOGISTIC_EPOCHS, harness::LOGISTIC_LR, harness::CRF_L2)
                    .unwrap();
            pi0_exp.push(evaluate_expected(&test, &pi0).unwrap());
            pi0_map.push(evaluate_map(&test, &pi0).unwrap());
            crf_exp.push(evaluate_expected(&test, &crf).unwrap());
            crf_map.push(evaluate_map(&test, &crf).unwrap());
        }
        let m = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        println!(
            "{preset} signal {signal}: pi0 expected {:.3} map {:.3} | crf expected {:.3} map {:.3}",
            m(&pi0_exp),
            m(&pi0_map),
            m(&crf_exp),
            m(&crf_map)
        );
    }
}
