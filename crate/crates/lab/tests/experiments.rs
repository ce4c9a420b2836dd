use qcslab::config::{ExperimentConfig, ExperimentKind};
use qcslab::experiments::{run, RunOptions};
use qcslab::fit::fit_loglog_slope;

fn small(kind: ExperimentKind) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(kind);
    cfg.trials = Some(2);
    cfg.m_list = Some(vec![20, 40]);
    cfg
}

#[test]
fn zero_signal_is_recovered() {
    let mut cfg = small(ExperimentKind::FigModified);
    cfg.k = Some(0);
    let out = run(&cfg, RunOptions::default()).unwrap();
    for t in &out.trials {
        assert!(t.converged);
        assert!(t.error <= 1e-6, "error {}", t.error);
    }
}

#[test]
fn summary_matches_trials() {
    let out = run(&small(ExperimentKind::FigModified), RunOptions::default()).unwrap();
    assert_eq!(out.trials.len(), 2 * 2 * 2);
    for row in &out.summary {
        let errs: Vec<f64> = out
            .trials
            .iter()
            .filter(|t| t.r == row.r && t.sweep_value == row.sweep_value && t.converged)
            .map(|t| t.error)
            .collect();
        let mean = errs.iter().sum::<f64>() / errs.len() as f64;
        assert!((mean - row.mean_error).abs() <= 1e-12 * mean.max(1.0));
        assert!((row.log10_mean_error - mean.log10()).abs() < 1e-12);
    }
    for (r, fit) in &out.slopes {
        let pts: Vec<(f64, f64)> = out.rows(*r).map(|s| (s.sweep_value, s.mean_error)).collect();
        assert!((fit_loglog_slope(&pts).unwrap().slope - fit.slope).abs() < 1e-12);
    }
}

#[test]
fn seeds_change_trials() {
    let a = run(&small(ExperimentKind::FigModified), RunOptions::default()).unwrap();
    let mut cfg = small(ExperimentKind::FigModified);
    cfg.master_seed = 1;
    let b = run(&cfg, RunOptions::default()).unwrap();
    assert_ne!(a.trials, b.trials);
}

#[test]
fn buffer_pairs_with_modified() {
    let out = run(&small(ExperimentKind::FigBuffer), RunOptions::default()).unwrap();
    assert!(out.summary.iter().all(|s| s.paired_ratio.is_some()));
    assert!(out.trials.iter().all(|t| t.truth_feasible));
}

#[test]
fn distortion_rows_carry_rates() {
    let mut cfg = ExperimentConfig::new(ExperimentKind::DistortionRate);
    cfg.trials = Some(2);
    cfg.r_list = vec![1];
    cfg.l_list = Some(vec![10, 30]);
    let out = run(&cfg, RunOptions::default()).unwrap();
    let rates: Vec<u64> = out.rows(1).map(|s| s.rate.unwrap()).collect();
    assert_eq!(rates.len(), 2);
    assert!(rates[0] < rates[1]);
    assert!(out.trials.iter().all(|t| t.bits.is_some()));
}
