use hsvar::analysis::{self, FitReport};
use hsvar::data_io::{self, load_table, write_counts};
use hsvar::diagnostics;
use hsvar::hmc::{self, SamplerConfig};
use hsvar::synth::{simulate_var, TruthSpec};
use hsvar::{DrawTable, Model, ModelConfig, ModelData};

fn small_truth(missing: f64) -> TruthSpec {
    TruthSpec {
        k: 3,
        l: 1,
        n: 80,
        a: vec![vec![0.4, 0.0, 0.0], vec![0.0, 0.4, 0.2], vec![0.0, 0.0, 0.4]],
        beta: vec![vec![0.3, 0.0, 0.0]],
        gamma: vec![vec![0.0, 0.2, 0.0]],
        b: vec![vec![0.0; 3], vec![0.2, 0.0, 0.0]],
        varpi0: 1.2,
        varpi1: 0.8,
        phi_x: vec![0.4],
        sigma_x: vec![vec![1.0]],
        seed: 17,
        missing_fraction: missing,
        period: 52.0,
        burn_in: 50,
    }
}

#[test]
fn tables_survive_a_csv_round_trip() {
    let sim = simulate_var(&small_truth(0.1)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bins.csv");
    write_counts(&sim.y, &path).unwrap();
    let back = load_table(&path).unwrap();
    assert_eq!(back.columns(), sim.y.columns());
    assert_eq!(back.timestamps(), sim.y.timestamps());
    assert_eq!(back.missing(), sim.y.missing());
    for t in 0..back.nrows() {
        for c in 0..back.ncols() {
            assert_eq!(back.get(t, c), sim.y.get(t, c));
        }
    }
}

#[test]
fn covariate_transform_inverts() {
    let sim = simulate_var(&small_truth(0.0)).unwrap();
    // Shift onto the non-negative half line so the square root is defined.
    let raw = sim.covariates.values().map(|v| v * v + 0.5);
    let raw = hsvar::SeriesTable::from_values(
        sim.covariates.timestamps().to_vec(),
        sim.covariates.columns().to_vec(),
        raw,
    )
    .unwrap();
    let (z, spec) = data_io::transform_covariates(&raw).unwrap();
    let present = z.present(0);
    assert!(hsvar::stats::mean(&present).abs() < 1e-12);
    assert!((hsvar::stats::population_sd(&present) - 1.0).abs() < 1e-12);
    let back = spec.inverse(&z).unwrap();
    assert!((back.values() - raw.values()).amax() < 1e-12);
}

#[test]
fn short_fit_produces_consistent_artifacts() {
    let sim = simulate_var(&small_truth(0.05)).unwrap();
    let data = ModelData::new(&sim.y, Some(&sim.covariates)).unwrap();
    let model = Model::new(ModelConfig::default(), data).unwrap();
    let sampler = SamplerConfig {
        chains: 2,
        iterations: 300,
        warmup: 150,
        thin: 3,
        seed: 5,
        ..SamplerConfig::default()
    };
    let draws = hmc::sample_model(&model, &sampler).unwrap();
    let table = DrawTable::from_model(&model, &draws).unwrap();
    assert_eq!(table.n_draws(), 2 * sampler.retained());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("draws.csv");
    table.save(&path).unwrap();
    let back = DrawTable::load(&path).unwrap();
    assert_eq!(back.names(), table.names());
    assert_eq!(back.column("tau").unwrap(), table.column("tau").unwrap());

    let report = FitReport::build(&back, 0.95, model.data().bin_names.clone(), vec!["x1".into()]).unwrap();
    assert!(report.selected.iter().all(|s| s.excludes_zero()));
    assert_eq!(report.error_correlations.len(), 1);
    assert_eq!(report.covariate_effects.len(), 3);
    assert!(report.m_eff.is_some());
    let md = report.to_markdown();
    assert!(md.contains("## Selected autoregressive coefficients"));
    assert!(md.contains("| x1 | bin_1 |"));

    let diag = diagnostics::diagnose(&back, Some(draws.divergences()), Some(300)).unwrap();
    assert_eq!(diag.parameters.len(), back.names().len());

    let residuals = analysis::residual_means(&back, model.data(), 52.0).unwrap();
    assert_eq!(residuals.shape(), (model.data().n(), 3));
    assert!(residuals.row(1).iter().all(|v| v.is_finite() || model.data().y_missing.row(1).iter().any(|m| *m)));
}
