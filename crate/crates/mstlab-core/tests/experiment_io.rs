use mstlab_core::experiments::{run_experiment, summary_json, to_csv, ExperimentConfig};

#[test]
fn config_round_trips_and_runs() {
    let c = ExperimentConfig::parse("experiment = critical_census\nn = 600\nlambda = -1, 1\nreplicas = 4\nseed = 3\n").unwrap();
    assert_eq!(ExperimentConfig::parse(&c.to_text()).unwrap(), c);
    let recs = run_experiment(&c).unwrap();
    assert_eq!(recs.len(), 8);
    let csv = to_csv(&c.to_text(), &recs);
    assert_eq!(csv, to_csv(&c.to_text(), &run_experiment(&c).unwrap()));
    let j = summary_json(&c.to_text(), &recs);
    assert_eq!(j["replicas"], 8);
    assert!(j["statistics"]["perc_c1_scaled"]["median"].as_f64().unwrap() > 0.0);
}

#[test]
fn unknown_experiment_is_rejected() {
    let c = ExperimentConfig::parse("experiment = nope\nsizes = 10\n");
    assert!(c.is_err() || run_experiment(&c.unwrap()).is_err());
}
