use std::fs;
use std::path::Path;
use std::sync::Arc;

use n2vlab_core::experiment::{
    cell_seed, enumerate_grid, run_experiment, ExperimentSpec, GraphSource, Grid, MetricsSpec, ParamSet, RunOptions,
    Store, StatsSpec, TrainingSpec,
};
use n2vlab_core::experiment::store::{DISTANCES, QUALITY, RECORDS, REPORT};
use n2vlab_core::graph::SbmSpec;
use n2vlab_core::{Error, PointCloud};

fn spec(root: &Path, repeats: usize) -> ExperimentSpec {
    ExperimentSpec {
        name: "small".into(),
        graph: GraphSource::Sbm(SbmSpec { block_sizes: vec![10, 10], p_intra: 0.5, p_inter: 0.1, seed: 5 }),
        grid: Grid { walk_length: vec![5], walks_per_node: vec![4], dim: vec![4, 8], window: vec![2], p: vec![1.0], q: vec![1.0] },
        repeats,
        experiment_seed: 11,
        metrics: MetricsSpec::default(),
        training: TrainingSpec { epochs_max: 3, ..TrainingSpec::default() },
        stats: StatsSpec::default(),
        output_dir: "store".into(),
        base_dir: root.to_path_buf(),
    }
}

fn options(threads: usize) -> RunOptions {
    RunOptions { threads: Some(threads), ..RunOptions::default() }
}

fn fingerprint(spec: &ExperimentSpec) -> String {
    Store::open(spec.output_path()).fingerprint().unwrap()
}

fn reference() -> (tempfile::TempDir, String) {
    let dir = tempfile::tempdir().unwrap();
    let s = spec(dir.path(), 3);
    let summary = run_experiment(&s, &options(2)).unwrap();
    assert!(summary.finished);
    let fp = fingerprint(&s);
    (dir, fp)
}

#[test]
fn full_run_writes_every_table() {
    let dir = tempfile::tempdir().unwrap();
    let s = spec(dir.path(), 3);
    let summary = run_experiment(&s, &options(2)).unwrap();
    assert_eq!(summary.new_cells, 6);
    assert_eq!(summary.records.len(), 6);
    assert!(summary.records.iter().all(|r| r.is_ok()));
    // Per metric: 3 intra pairs in each of 2 groups plus 3 cross-group pairs.
    assert_eq!(summary.num_distances, 2 * (2 * 3 + 3));
    let store = Store::open(s.output_path());
    for name in [RECORDS, QUALITY, DISTANCES, REPORT] {
        assert!(store.path(name).is_file(), "{name} missing");
    }
    let report = summary.report.unwrap();
    assert_eq!(report.metrics.len(), 2);
    for m in &report.metrics {
        assert_eq!(m.groups.len(), 2);
        assert_eq!(m.comparisons.m, 1);
    }
    let quality = fs::read_to_string(store.path(QUALITY)).unwrap();
    assert_eq!(quality.lines().count(), 1 + 6 * 4);

    // Every stored cloud has unit diameter and carries its provenance.
    let cells = enumerate_grid(&s.grid).unwrap();
    for r in &summary.records {
        let cloud = store.load_cloud(r).unwrap();
        assert!((cloud.diameter() - 1.0).abs() < 1e-9);
        assert_eq!((cloud.len(), cloud.dim()), (20, ParamSet::from_label(&r.param_set).unwrap().dim));
        assert_eq!(cloud.provenance.param_set.as_deref(), Some(r.param_set.as_str()));
        let cell = cells.iter().find(|c| c.label() == r.param_set).unwrap();
        assert_eq!(r.seed, cell_seed(11, cell, r.repeat));
    }
}

#[test]
fn second_run_computes_nothing() {
    let (dir, fp) = reference();
    let s = spec(dir.path(), 3);
    let again = run_experiment(&s, &options(1)).unwrap();
    assert_eq!(again.new_cells, 0);
    assert_eq!(fingerprint(&s), fp);
}

#[test]
fn thread_count_does_not_change_results() {
    let (_dir, fp) = reference();
    for threads in [1, 4] {
        let dir = tempfile::tempdir().unwrap();
        let s = spec(dir.path(), 3);
        run_experiment(&s, &options(threads)).unwrap();
        assert_eq!(fingerprint(&s), fp, "{threads} threads");
    }
}

#[test]
fn resume_after_losing_half_the_records() {
    let (dir, fp) = reference();
    let s = spec(dir.path(), 3);
    let path = Store::open(s.output_path()).path(RECORDS);
    let text = fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let kept = lines[..1 + (lines.len() - 1) / 2].join("\n") + "\n";
    fs::write(&path, kept).unwrap();
    let resumed = run_experiment(&s, &options(3)).unwrap();
    assert_eq!(resumed.new_cells, 3);
    assert_eq!(fingerprint(&s), fp);
}

#[test]
fn resume_after_interruption_and_torn_write() {
    let (_ref_dir, fp) = reference();
    let dir = tempfile::tempdir().unwrap();
    let s = spec(dir.path(), 3);
    let partial = run_experiment(&s, &RunOptions { max_new_cells: Some(2), ..options(2) }).unwrap();
    assert!(!partial.finished);
    assert_eq!(partial.new_cells, 2);
    assert!(!Store::open(s.output_path()).path(DISTANCES).exists());

    // A half-written trailing row is dropped and its cell recomputed.
    let path = Store::open(s.output_path()).path(RECORDS);
    let mut text = fs::read_to_string(&path).unwrap();
    text.push_str("g,L5-N4-d8-C2-p1-q1,2,123,clo");
    fs::write(&path, text).unwrap();

    let rest = run_experiment(&s, &options(2)).unwrap();
    assert!(rest.finished);
    assert_eq!(rest.new_cells, 4);
    assert_eq!(fingerprint(&s), fp);
}

#[test]
fn records_without_cloud_files_are_recomputed() {
    let (dir, fp) = reference();
    let s = spec(dir.path(), 3);
    let store = Store::open(s.output_path());
    fs::remove_file(store.root().join(Store::cloud_name("L5-N4-d4-C2-p1-q1", 1))).unwrap();
    let resumed = run_experiment(&s, &options(2)).unwrap();
    assert_eq!(resumed.new_cells, 1);
    assert_eq!(fingerprint(&s), fp);
}

#[test]
fn cells_do_not_depend_on_each_other() {
    // Adding repeats and grid values leaves existing cells bit-identical.
    let dir = tempfile::tempdir().unwrap();
    let small = spec(dir.path(), 2);
    let a = run_experiment(&small, &options(2)).unwrap();

    let other = tempfile::tempdir().unwrap();
    let mut large = spec(other.path(), 3);
    large.grid.dim.push(6);
    let b = run_experiment(&large, &options(2)).unwrap();
    let (sa, sb) = (Store::open(small.output_path()), Store::open(large.output_path()));
    for r in &a.records {
        let twin = b.records.iter().find(|x| x.param_set == r.param_set && x.repeat == r.repeat).unwrap();
        assert_eq!(r.seed, twin.seed);
        assert_eq!(r.metrics, twin.metrics);
        assert_eq!(fs::read(sa.root().join(&r.cloud)).unwrap(), fs::read(sb.root().join(&twin.cloud)).unwrap());
    }

    let mut shifted = spec(tempfile::tempdir().unwrap().path(), 2);
    shifted.experiment_seed = 12;
    assert_ne!(cell_seed(11, &enumerate_grid(&small.grid).unwrap()[0], 0), cell_seed(12, &enumerate_grid(&shifted.grid).unwrap()[0], 0));
}

#[test]
fn single_repeat_has_no_stability_analysis() {
    let dir = tempfile::tempdir().unwrap();
    let s = spec(dir.path(), 1);
    let summary = run_experiment(&s, &options(2)).unwrap();
    assert!(summary.report.is_none());
    let store = Store::open(s.output_path());
    assert!(!store.path(REPORT).exists());
    assert!(store.read_distances().unwrap().iter().all(|d| !d.is_intra()));
    let quality = fs::read_to_string(store.path(QUALITY)).unwrap();
    assert_eq!(quality.lines().count(), 1 + 2 * 4);

    let mut isolated = spec(dir.path(), 1);
    isolated.output_dir = "alone".into();
    isolated.metrics.cross_group = false;
    let summary = run_experiment(&isolated, &options(1)).unwrap();
    assert_eq!(summary.num_distances, 0);
    assert_eq!(Store::open(isolated.output_path()).read_distances().unwrap().len(), 0);
}

#[test]
fn injected_failures_are_recorded_and_excluded() {
    let dir = tempfile::tempdir().unwrap();
    let s = spec(dir.path(), 3);
    let fail_if = Arc::new(|cell: &ParamSet, repeat: usize| cell.dim == 8 && repeat == 1);
    let summary = run_experiment(&s, &RunOptions { fail_if: Some(fail_if), ..options(2) }).unwrap();
    let failed: Vec<_> = summary.records.iter().filter(|r| !r.is_ok()).collect();
    assert_eq!(failed.len(), 1);
    assert!(failed[0].error.contains("failure injected"));
    assert!(failed[0].cloud.is_empty());
    // The damaged group keeps one intra pair; no test is possible with
    // a single complete group.
    let distances = Store::open(s.output_path()).read_distances().unwrap();
    let intra_d8 = distances.iter().filter(|d| d.is_intra() && d.group_a.contains("d8")).count();
    assert_eq!(intra_d8, 2);
    assert!(summary.report.is_none());

    // Failed cells stay failed on resume.
    assert_eq!(run_experiment(&s, &options(2)).unwrap().new_cells, 0);
}

#[test]
fn all_failures_are_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let s = spec(dir.path(), 2);
    let fail_if = Arc::new(|_: &ParamSet, _: usize| true);
    let err = run_experiment(&s, &RunOptions { fail_if: Some(fail_if), ..options(2) }).unwrap_err();
    assert!(matches!(err, Error::AllCellsFailed));
}

#[test]
fn store_of_a_different_experiment_is_rejected() {
    let (dir, _) = reference();
    let mut s = spec(dir.path(), 3);
    s.experiment_seed = 99;
    assert!(matches!(run_experiment(&s, &options(1)).unwrap_err(), Error::Format { .. }));
}

#[test]
fn spec_files_resolve_paths_against_their_directory() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("g.edges"), "0 1\n1 2\n2 0\n2 3\n3 4\n4 5\n5 3\n").unwrap();
    let text = r#"
        name = "file"
        repeats = 2
        experiment_seed = 3
        output_dir = "out"
        [graph]
        kind = "file"
        path = "g.edges"
        [grid]
        walk_length = [4]
        walks_per_node = [3]
        dim = [3]
        window = [2]
        [training]
        epochs_max = 2
    "#;
    fs::write(dir.path().join("exp.toml"), text).unwrap();
    let loaded = ExperimentSpec::load(&dir.path().join("exp.toml")).unwrap();
    let summary = run_experiment(&loaded, &options(1)).unwrap();
    assert_eq!(summary.records.len(), 2);
    assert!(summary.records.iter().all(|r| r.graph_id == "g"));
    let cloud = PointCloud::load(&dir.path().join("out").join(&summary.records[0].cloud)).unwrap();
    assert_eq!(cloud.len(), 6);
}
