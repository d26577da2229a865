use std::fs;

use eda_core::bench::{run_benchmark, BenchConfig, DataSource, Method};
use eda_core::data::{generate_shift, load_manifest, write_manifest, SynthShiftSpec};
use eda_core::eda::{build_map, fit_eda, predict_eda, EdaParams};
use eda_core::model_io::{load_model, save_model, ModelFile};
use eda_core::preclassifier::{preclassify_elm, PreLabelMatrix};

fn params() -> EdaParams {
    EdaParams { hidden: 40, standardize: true, ..EdaParams::default() }
}

#[test]
fn files_in_model_out_same_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = generate_shift(&SynthShiftSpec::default().with_seed(8)).unwrap();
    let manifest = write_manifest(&dir.path().join("data"), &bundle).unwrap();
    let loaded = load_manifest(&manifest).unwrap();
    assert_eq!(loaded, bundle);

    let p = params();
    let map = build_map(&loaded, &p, p.seed).unwrap();
    let phi = preclassify_elm(&loaded, &map, 10.0).unwrap();
    let model = fit_eda(&loaded, &phi, &p).unwrap();

    let path = dir.path().join("model.json");
    save_model(&ModelFile::Eda(model.clone()), &path).unwrap();
    let ModelFile::Eda(back) = load_model(&path).unwrap() else {
        panic!("wrong model kind");
    };
    let test = loaded.target_test.as_ref().unwrap().without_labels();
    for detransform in [false, true] {
        assert_eq!(
            predict_eda(&back, &test, detransform).unwrap(),
            predict_eda(&model, &test, detransform).unwrap()
        );
    }
}

#[test]
fn imported_prelabels_match_in_memory() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = generate_shift(&SynthShiftSpec::default().with_seed(2)).unwrap();
    let p = params();
    let map = build_map(&bundle, &p, p.seed).unwrap();
    let phi = preclassify_elm(&bundle, &map, 10.0).unwrap();
    let csv: String = phi
        .scores()
        .row_iter()
        .map(|r| r.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(",") + "\n")
        .collect();
    let path = dir.path().join("phi.csv");
    fs::write(&path, csv).unwrap();
    let imported = PreLabelMatrix::from_csv(&path).unwrap();
    assert_eq!(imported.scores(), phi.scores());
    assert_eq!(fit_eda(&bundle, &imported, &p).unwrap(), fit_eda(&bundle, &phi, &p).unwrap());
}

#[test]
fn manifest_source_benchmarks() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = generate_shift(&SynthShiftSpec::default().with_seed(5)).unwrap();
    write_manifest(&dir.path().join("data"), &bundle).unwrap();
    let cfg_path = dir.path().join("bench.toml");
    let cfg = BenchConfig {
        methods: vec![Method::ElmSt, Method::Eda],
        seeds: vec![0, 1],
        params: params(),
        data: DataSource::Manifest { path: "data/manifest.toml".into() },
        ..BenchConfig::default()
    };
    fs::write(&cfg_path, cfg.to_toml().unwrap()).unwrap();
    let report = run_benchmark(&BenchConfig::load(&cfg_path).unwrap()).unwrap();
    for m in [Method::ElmSt, Method::Eda] {
        let s = report.method(m).unwrap();
        assert_eq!(s.per_seed.len(), 2);
        assert!((0.0..=1.0).contains(&s.best_mean));
    }
    // Different seeds resplit the labeled target pool.
    assert_ne!(report.splits[0].split_hash, report.splits[1].split_hash);
}
