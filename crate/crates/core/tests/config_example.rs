use htrisk::experiments::ExperimentName;
use htrisk::ExperimentConfig;

#[test]
fn annotated_example_resolves_to_trichotomy_defaults() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../docs/config.example.toml");
    let text = std::fs::read_to_string(path).unwrap();
    let cfg = ExperimentConfig::from_toml_over_defaults(ExperimentName::Trichotomy, false, &text).unwrap();
    assert_eq!(cfg, ExperimentConfig::defaults(ExperimentName::Trichotomy, false));
}

#[test]
fn resolved_config_round_trips() {
    for name in ExperimentName::ALL {
        let cfg = ExperimentConfig::defaults(name, false);
        let text = cfg.to_toml().unwrap();
        let back = ExperimentConfig::from_toml_over_defaults(name, false, &text).unwrap();
        assert_eq!(back, cfg, "{}", name.as_str());
    }
}

#[test]
fn partial_config_keeps_other_defaults() {
    let cfg = ExperimentConfig::from_toml_over_defaults(
        ExperimentName::Floor,
        false,
        "[experiment]\nreplications = 7\n[covariance]\nkind = \"identity\"\n",
    )
    .unwrap();
    let mut expected = ExperimentConfig::defaults(ExperimentName::Floor, false);
    expected.experiment.replications = 7;
    expected.covariance.kind = htrisk::experiments::config::CovarianceKindName::Identity;
    assert_eq!(cfg, expected);
}

#[test]
fn typos_and_mismatched_names_are_rejected() {
    let typo = ExperimentConfig::from_toml_over_defaults(ExperimentName::Floor, false, "[signal]\nsparsty = 0.2\n");
    assert!(typo.unwrap_err().to_string().contains("sparsty"));
    let section = ExperimentConfig::from_toml_over_defaults(ExperimentName::Floor, false, "[noize]\nalpha = 1.2\n");
    assert!(section.unwrap_err().to_string().contains("noize"));
    let other = ExperimentConfig::from_toml_over_defaults(ExperimentName::Floor, false, "[experiment]\nname = \"paradox\"\n");
    assert!(other.is_err());
}
