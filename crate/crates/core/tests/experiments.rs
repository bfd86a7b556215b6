use std::collections::BTreeMap;

use maps_core::anchors::default_num_atoms;
use maps_core::experiments::{
    double_block_trial, generate_fixture, read_csv, run_double_block, run_historical_double, run_single_block,
    BetaTable, BoxSummary, EstimatorTag, ExperimentConfig, FixtureParams, Metric, Scenario, TrialRecord,
    HISTORICAL_PAIRS,
};

fn small_double() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::defaults(Scenario::Double);
    cfg.p = 150;
    cfg.num_atoms = default_num_atoms(150);
    cfg.trials = 6;
    cfg.rho_grid = vec![0.0, 0.6, 1.0];
    cfg.master_seed = 42;
    cfg
}

fn find(summaries: &[BoxSummary], tag: EstimatorTag, metric: Metric, rho: Option<f64>) -> &BoxSummary {
    summaries
        .iter()
        .find(|s| s.estimator == tag && s.metric == metric && s.rho == rho)
        .unwrap_or_else(|| panic!("no summary for {tag} {metric:?} {rho:?}"))
}

#[test]
fn trial_order_does_not_change_results() {
    let cfg = small_double();
    let out = run_double_block(&cfg).unwrap();

    let mut jobs: Vec<(usize, usize)> = (0..3).flat_map(|i| (0..cfg.trials).map(move |t| (i, t))).collect();
    jobs.reverse();
    let mut by_job: BTreeMap<(usize, usize), Vec<TrialRecord>> = BTreeMap::new();
    for (i, t) in jobs {
        by_job.insert((i, t), double_block_trial(&cfg, i, t).unwrap().records);
    }
    let serial: Vec<TrialRecord> = by_job.into_values().flatten().collect();
    assert_eq!(serial, out.trials);

    // Re-aggregate independently from the shuffled records.
    let mut shuffled = serial.clone();
    shuffled.sort_by(|a, b| b.l2_error.total_cmp(&a.l2_error));
    for s in &out.summaries {
        let vals: Vec<f64> = shuffled
            .iter()
            .filter(|r| r.estimator == s.estimator && r.rho == s.rho)
            .map(|r| match s.metric {
                Metric::L2Error => r.l2_error,
                Metric::TrackingP => r.tracking_p,
                Metric::OptBiasP => r.opt_bias_p,
                Metric::ForecastRatio => r.forecast_ratio,
                Metric::L2ErrorSq => unreachable!(),
            })
            .collect();
        let again = BoxSummary::new(s.estimator, s.rho, s.metric, &vals, s.degenerate).unwrap();
        assert_eq!(&again, s);
    }
}

#[test]
fn every_cell_accounts_for_all_trials() {
    let cfg = small_double();
    let out = run_double_block(&cfg).unwrap();
    assert_eq!(out.summaries.len(), cfg.rho_grid.len() * cfg.estimators.len() * 4);
    for s in &out.summaries {
        assert_eq!(s.count + s.degenerate, cfg.trials, "{s:?}");
    }
    for r in &out.trials {
        assert!((0.0..=2.0).contains(&r.l2_error));
        assert!(r.tracking_p >= 0.0 && r.opt_bias_p >= 0.0 && r.forecast_ratio > 0.0);
    }
}

#[test]
fn outputs_round_trip_through_csv() {
    let cfg = small_double();
    let out = run_double_block(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    out.write(dir.path(), &cfg).unwrap();
    let trials: Vec<TrialRecord> = read_csv(std::fs::File::open(dir.path().join("trials.csv")).unwrap()).unwrap();
    let summaries: Vec<BoxSummary> = read_csv(std::fs::File::open(dir.path().join("summary.csv")).unwrap()).unwrap();
    assert_eq!(trials, out.trials);
    assert_eq!(summaries, out.summaries);
    let echoed = ExperimentConfig::parse(&std::fs::read_to_string(dir.path().join("config.txt")).unwrap()).unwrap();
    assert_eq!(echoed, cfg);
    assert!(dir.path().join("plot.py").exists());
}

#[test]
fn single_trial_is_byte_identical() {
    let mut cfg = small_double();
    cfg.trials = 1;
    let bytes = || {
        let dir = tempfile::tempdir().unwrap();
        run_double_block(&cfg).unwrap().write(dir.path(), &cfg).unwrap();
        std::fs::read(dir.path().join("trials.csv")).unwrap()
    };
    assert_eq!(bytes(), bytes());
}

#[test]
fn more_data_helps_gps_when_betas_do_not_move() {
    let mut cfg = ExperimentConfig::defaults(Scenario::Double);
    cfg.rho_grid = vec![1.0];
    cfg.estimators = vec![EstimatorTag::Gps1, EstimatorTag::Gps2];
    cfg.master_seed = 5;
    let out = run_double_block(&cfg).unwrap();
    let g1 = find(&out.summaries, EstimatorTag::Gps1, Metric::L2Error, Some(1.0)).median;
    let g2 = find(&out.summaries, EstimatorTag::Gps2, Metric::L2Error, Some(1.0)).median;
    assert!(g2 <= g1, "gps2 {g2} gps1 {g1}");
}

fn fixture() -> BetaTable {
    generate_fixture(&FixtureParams::default(), 2024).unwrap()
}

#[test]
fn single_block_sector_and_beta_ordered_beat_gps() {
    let table = fixture();
    let mut cfg = ExperimentConfig::defaults(Scenario::HistoricalSingle);
    cfg.master_seed = 3;
    let out = run_single_block(&cfg, &table, None).unwrap();
    assert_eq!(out.expected.len(), 24 * cfg.estimators.len());
    let med = |tag, metric| find(&out.summaries, tag, metric, None).median;
    use EstimatorTag::*;
    assert!(med(Sector, Metric::L2ErrorSq) < med(Gps1, Metric::L2ErrorSq));
    for metric in [Metric::L2ErrorSq, Metric::TrackingP, Metric::OptBiasP] {
        let bo = med(BetaOrdered, metric);
        for other in [Pca1, Gps1, Sector] {
            assert!(bo < med(other, metric), "{metric:?}: beta_ordered {bo} vs {other} {}", med(other, metric));
        }
    }
}

#[test]
fn historical_double_pairs_and_ranking() {
    let table = fixture();
    let mut cfg = ExperimentConfig::defaults(Scenario::HistoricalDouble);
    cfg.master_seed = 9;
    let out = run_historical_double(&cfg, &table).unwrap();
    for tag in &cfg.estimators {
        assert_eq!(out.expected.iter().filter(|e| e.estimator == *tag).count(), HISTORICAL_PAIRS);
    }
    let med = |tag, metric| find(&out.summaries, tag, metric, None).median;
    use EstimatorTag::*;
    for metric in [Metric::L2ErrorSq, Metric::TrackingP, Metric::OptBiasP] {
        let dy = med(DynMaps, metric);
        for other in [Pca1, Pca2, Gps1, Gps2] {
            assert!(dy < med(other, metric), "{metric:?}: dynmaps {dy} vs {other} {}", med(other, metric));
        }
    }
    let again = run_historical_double(&cfg, &table).unwrap();
    assert_eq!(again, out);
}

#[test]
fn historical_runs_need_enough_columns() {
    let table = generate_fixture(&FixtureParams { periods: 20, ..FixtureParams::default() }, 1).unwrap();
    let cfg = ExperimentConfig::defaults(Scenario::HistoricalDouble);
    let err = run_historical_double(&cfg, &table).unwrap_err();
    assert!(err.to_string().contains("at least 24"), "{err}");
}

#[test]
fn empty_beta_file_is_a_clean_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.csv");
    std::fs::write(&path, "").unwrap();
    let msg = BetaTable::read(&path).unwrap_err().to_string();
    assert!(msg.contains("empty.csv") && msg.contains("asset_id,sector,b1"), "{msg}");
}
