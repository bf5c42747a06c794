use warmtrend_core::grid::{run_grid, write_grid_csv};
use warmtrend_core::simulation::{synthetic_grid, synthetic_series, SyntheticCell};
use warmtrend_core::stats::mean;
use warmtrend_core::{analyze_cell, ingest_grid_csv, EmOptions, GridCell, PipelineConfig};

fn cell(id: &str) -> GridCell {
    GridCell {
        cell_id: id.into(),
        lat: 50.0,
        lon: 20.0,
    }
}

#[test]
fn steady_warming_is_significant_and_tracked_by_the_curve() {
    let spec = SyntheticCell {
        trend: 1e-4,
        ..Default::default()
    };
    let years = 35;
    let s = synthetic_series(1981, years, &spec, 5).unwrap();
    let config = PipelineConfig::default();
    let res = analyze_cell(&cell("warm"), &s, None, &config).unwrap();
    assert!(res.p_nonpositive < 0.05, "p = {}", res.p_nonpositive);

    // Standardization divides by the per-day spread, which the trend inflates.
    let days = s.len() as f64;
    let expected = 1e-4 / (1.0 + (1e-4 * days).powi(2) / 12.0).sqrt();
    let curve = res.curve.unwrap();
    for (k, a) in curve.coeffs.iter().enumerate() {
        let n = days - 365.25 * k as f64;
        let sd = (12.0 / n.powi(3)).sqrt() * spec.innovation_sd / (1.0 - spec.r);
        assert!((a - expected).abs() < 4.0 * sd, "k = {k}: {a} vs {expected} ± {sd}");
    }
    assert!(curve.coeffs.iter().all(|a| *a <= res.max_coeff));
}

#[test]
fn late_onset_trend_gives_increasing_curve() {
    let spec = SyntheticCell {
        trend: 1e-4,
        trend_start_year: Some(1981),
        innovation_sd: 0.0,
        ..Default::default()
    };
    let s = synthetic_series(1951, 66, &spec, 0).unwrap();
    let res = analyze_cell(&cell("late"), &s, None, &PipelineConfig::default()).unwrap();
    let coeffs = &res.curve.as_ref().unwrap().coeffs;
    assert!(coeffs.windows(2).all(|w| w[1] > w[0]), "{coeffs:?}");
    assert_eq!(res.max_coeff, coeffs[29]);
    assert_eq!(res.r2_max, res.curve.unwrap().r_squareds[29]);
}

#[test]
fn linear_cell_gives_flat_curve() {
    let spec = SyntheticCell {
        trend: 1e-4,
        innovation_sd: 0.0,
        ..Default::default()
    };
    let s = synthetic_series(1951, 66, &spec, 0).unwrap();
    let res = analyze_cell(&cell("line"), &s, None, &PipelineConfig::default()).unwrap();
    let curve = res.curve.unwrap();
    let max = curve.coeffs.iter().cloned().fold(f64::MIN, f64::max);
    assert_eq!(res.max_coeff, max);
    for a in &curve.coeffs {
        assert!((a - max).abs() <= 1e-2 * max, "{a} vs {max}");
    }
}

fn null_run() -> warmtrend_core::grid::GridRun {
    let ds = synthetic_grid(6, 6, 1951, 66, &SyntheticCell::default(), 77).unwrap();
    run_grid(&ds, None, &PipelineConfig { seed: 3, ..Default::default() }).unwrap()
}

#[test]
fn null_cells_are_centred() {
    let run = null_run();
    assert!(run.failures.is_empty());
    let p = mean(&run.results.iter().map(|r| r.p_nonpositive).collect::<Vec<_>>());
    assert!((p - 0.5).abs() <= 0.15, "mean p = {p}");
    let sig = mean(&run.results.iter().map(|r| r.sig_fraction).collect::<Vec<_>>());
    assert!((sig - 0.5).abs() <= 0.15, "mean sig_fraction = {sig}");
}

#[test]
fn grid_run_is_independent_of_thread_count() {
    let ds = synthetic_grid(2, 2, 1951, 40, &SyntheticCell::default(), 1).unwrap();
    let config = PipelineConfig {
        k_max: 10,
        k_compare: vec![5, 10],
        seed: 9,
        ..Default::default()
    };
    let run_with = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_grid(&ds, None, &config).unwrap())
    };
    let one = run_with(1);
    let three = run_with(3);
    assert_eq!(one.results, three.results);
    assert_eq!(one.results.len(), 4);
}

#[test]
fn sparse_cell_is_excluded_and_clustering_skips_it() {
    let mut ds = synthetic_grid(3, 3, 1951, 40, &SyntheticCell::default(), 2).unwrap();
    let holes = SyntheticCell {
        missing_fraction: 1.0,
        ..Default::default()
    };
    ds.series
        .insert("r1c1".into(), synthetic_series(1951, 40, &holes, 0).unwrap());

    // through the CSV layer, as the command line does
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grid.csv");
    write_grid_csv(&ds, std::fs::File::create(&path).unwrap()).unwrap();
    let ds = ingest_grid_csv(&path).unwrap();
    assert_eq!(ds.series["r1c1"].n_present(), 0);

    let config = PipelineConfig {
        k_max: 3,
        k_compare: vec![1, 3],
        cluster_k_max: 2,
        families: vec!["EII".into(), "VII".into()],
        ..Default::default()
    };
    let mut run = run_grid(&ds, None, &config).unwrap();
    assert!(run.failures.is_empty(), "{:?}", run.failures);
    let sparse = run.results.iter().find(|r| r.cell_id == "r1c1").unwrap();
    assert!(sparse.excluded && sparse.curve.is_none());
    let (selection, ids) =
        warmtrend_core::grid::cluster_results(&mut run.results, &config, &EmOptions::default()).unwrap();
    assert_eq!(ids.len(), 8);
    assert!(!ids.contains(&"r1c1".to_string()));
    assert_eq!(selection.assignment.labels.len(), 8);
    for r in &run.results {
        assert_eq!(r.cluster.is_some(), r.cell_id != "r1c1");
    }
}

#[test]
fn nao_component_is_removed() {
    let base = SyntheticCell::default();
    let nao = synthetic_series(1951, 40, &SyntheticCell { r: 0.5, ..base.clone() }, 123).unwrap();
    let clean = synthetic_series(1951, 40, &base, 7).unwrap();
    let mixed_values: Vec<Option<f64>> = (0..clean.len())
        .map(|i| Some(clean.value(i).unwrap() + 3.0 * nao.value(i).unwrap()))
        .collect();
    let mixed = warmtrend_core::DailySeries::from_options(clean.start_date(), mixed_values).unwrap();
    let config = PipelineConfig {
        k_max: 10,
        k_compare: vec![5, 10],
        ..Default::default()
    };
    let adjusted = analyze_cell(&cell("nao"), &mixed, Some(&nao), &config).unwrap();
    let raw = analyze_cell(&cell("nao"), &mixed, None, &config).unwrap();
    assert!(adjusted.curve.unwrap().coeffs.iter().all(|a| a.is_finite()));
    assert_ne!(adjusted.max_coeff, raw.max_coeff);
}
