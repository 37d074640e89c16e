use std::fs;

use normlens::error::Error;
use normlens::models::ModelKind;
use normlens::pipeline::{
    demo, run_pipeline, write_demo_inputs, DemoOptions, RunConfig, RunManifest, MANIFEST_FILE, STAGE_EVALUATE,
    STAGE_ESTIMATE, STAGE_INGEST,
};

fn small(model: ModelKind) -> DemoOptions {
    DemoOptions {
        seed: 3,
        year2_messages: 4_000,
        year1_messages: 2_000,
        model,
        ..Default::default()
    }
}

#[test]
fn demo_is_deterministic_across_directories() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ma = demo(a.path(), &small(ModelKind::Lstm)).unwrap();
    let mb = demo(b.path(), &small(ModelKind::Lstm)).unwrap();
    assert_eq!(ma, mb);
    let ta = fs::read(a.path().join("run").join(MANIFEST_FILE)).unwrap();
    let tb = fs::read(b.path().join("run").join(MANIFEST_FILE)).unwrap();
    assert_eq!(ta, tb);
    assert!(ma.stages.iter().all(|s| s.wall_ms.is_none()));
    let names: Vec<&str> = ma.stages.iter().map(|s| s.name.as_str()).collect();
    assert_eq!(names, ["ingest", "embed", "train", "evaluate", "estimate", "report"]);
    let report = fs::read_to_string(a.path().join("run/report/report.txt")).unwrap();
    assert!(report.contains("After Metoo"), "{report}");
}

#[test]
fn rerun_reuses_stages_and_repairs_tampered_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_demo_inputs(dir.path(), &small(ModelKind::Nb)).unwrap();
    let cfg = RunConfig::load(&path).unwrap();
    let first = run_pipeline(&cfg).unwrap();
    let model = dir.path().join("run/train/model.json");
    let stamp = fs::metadata(&model).unwrap().modified().unwrap();
    let second = run_pipeline(&cfg).unwrap();
    assert_eq!(first, second);
    assert_eq!(fs::metadata(&model).unwrap().modified().unwrap(), stamp);

    let metrics = dir.path().join("run").join(STAGE_EVALUATE).join("metrics.json");
    fs::write(&metrics, "tampered").unwrap();
    let third = run_pipeline(&cfg).unwrap();
    assert_eq!(first, third);
    assert_ne!(fs::read_to_string(&metrics).unwrap(), "tampered");
    let history = fs::read_to_string(dir.path().join("run/manifest_history.jsonl")).unwrap();
    assert_eq!(history.lines().count(), 3);
}

#[test]
fn changed_parameters_rerun_downstream_stages_only() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_demo_inputs(dir.path(), &small(ModelKind::Nb)).unwrap();
    let mut cfg = RunConfig::load(&path).unwrap();
    let first = run_pipeline(&cfg).unwrap();
    cfg.estimate.truncate(1);
    let second = run_pipeline(&cfg).unwrap();
    assert_eq!(first.stage(STAGE_INGEST), second.stage(STAGE_INGEST));
    assert_eq!(first.stage(STAGE_EVALUATE), second.stage(STAGE_EVALUATE));
    assert_ne!(first.stage(STAGE_ESTIMATE), second.stage(STAGE_ESTIMATE));
}

#[test]
fn failing_stage_is_named_and_quarantined() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_demo_inputs(dir.path(), &small(ModelKind::Nb)).unwrap();
    let mut cfg = RunConfig::load(&path).unwrap();
    // the run has no togetherness series, so this selection is empty
    cfg.estimate[0].spec = "time_trends:after;fe=none;years=2;series=togetherness".into();
    match run_pipeline(&cfg) {
        Err(Error::Stage { stage, .. }) => assert_eq!(stage, STAGE_ESTIMATE),
        other => panic!("{other:?}"),
    }
    let run = dir.path().join("run");
    assert!(run.join("estimate.failed").is_dir());
    assert!(!run.join(STAGE_ESTIMATE).exists());
    assert!(!run.join(MANIFEST_FILE).exists());
}

#[test]
fn lstm_without_vectors_is_rejected_before_any_stage() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_demo_inputs(dir.path(), &small(ModelKind::Lstm)).unwrap();
    let mut cfg = RunConfig::load(&path).unwrap();
    cfg.embeddings = None;
    assert!(matches!(run_pipeline(&cfg), Err(Error::Config(_))));
    assert!(!dir.path().join("run").exists());
}

#[test]
fn manifest_file_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let m = demo(dir.path(), &small(ModelKind::Nb)).unwrap();
    assert_eq!(RunManifest::load(&dir.path().join("run").join(MANIFEST_FILE)).unwrap(), m);
}
