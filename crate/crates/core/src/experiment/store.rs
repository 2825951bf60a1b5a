//! The on-disk result store of one experiment.
//!
//! ```text
//! <dir>/manifest.json
//! <dir>/records.csv
//! <dir>/clouds/<label>_r<repeat>.pc
//! <dir>/quality.csv
//! <dir>/distances.csv
//! <dir>/stability_report.json
//! ```

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::metrics::CloudMetric;
use crate::pointcloud::{write_atomic, PointCloud};
use crate::quality::QualityMetric;

use super::spec::ExperimentSpec;

pub const MANIFEST: &str = "manifest.json";
pub const RECORDS: &str = "records.csv";
pub const QUALITY: &str = "quality.csv";
pub const DISTANCES: &str = "distances.csv";
pub const REPORT: &str = "stability_report.json";
pub const CLOUDS: &str = "clouds";

/// Columns that hold wall-clock information and are ignored when comparing
/// stores.
pub const TIMING_COLUMNS: [&str; 2] = ["started_unix_ms", "elapsed_ms"];

const RECORD_HEADER: [&str; 16] = [
    "graph_id",
    "param_set",
    "repeat",
    "seed",
    "cloud",
    "status",
    "epochs",
    "first_loss",
    "final_loss",
    "w_link_discrete",
    "w_link_sorted1d",
    "auprc",
    "auroc",
    "error",
    "started_unix_ms",
    "elapsed_ms",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    Failed,
}

/// One `(param_set, repeat)` cell of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub graph_id: String,
    pub param_set: String,
    pub repeat: usize,
    pub seed: u64,
    /// Cloud path relative to the store directory; empty for failed cells.
    pub cloud: String,
    pub status: CellStatus,
    pub epochs: usize,
    pub first_loss: Option<f64>,
    pub final_loss: Option<f64>,
    pub metrics: BTreeMap<QualityMetric, f64>,
    pub error: String,
    pub started_unix_ms: u64,
    pub elapsed_ms: u64,
}

impl RunRecord {
    pub fn is_ok(&self) -> bool {
        self.status == CellStatus::Ok
    }

    fn to_row(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut row = vec![
            self.graph_id.clone(),
            self.param_set.clone(),
            self.repeat.to_string(),
            self.seed.to_string(),
            self.cloud.clone(),
            match self.status {
                CellStatus::Ok => "ok".into(),
                CellStatus::Failed => "failed".into(),
            },
            self.epochs.to_string(),
            opt(self.first_loss),
            opt(self.final_loss),
        ];
        for m in QualityMetric::ALL {
            row.push(opt(self.metrics.get(&m).copied()));
        }
        row.push(self.error.clone());
        row.push(self.started_unix_ms.to_string());
        row.push(self.elapsed_ms.to_string());
        row
    }

    fn from_row(row: &csv::StringRecord) -> Option<RunRecord> {
        if row.len() != RECORD_HEADER.len() {
            return None;
        }
        let opt = |i: usize| -> Option<Option<f64>> {
            let s = &row[i];
            if s.is_empty() {
                Some(None)
            } else {
                s.parse().ok().map(Some)
            }
        };
        let status = match &row[5] {
            "ok" => CellStatus::Ok,
            "failed" => CellStatus::Failed,
            _ => return None,
        };
        let mut metrics = BTreeMap::new();
        for (k, m) in QualityMetric::ALL.into_iter().enumerate() {
            if let Some(v) = opt(9 + k)? {
                metrics.insert(m, v);
            }
        }
        Some(RunRecord {
            graph_id: row[0].to_string(),
            param_set: row[1].to_string(),
            repeat: row[2].parse().ok()?,
            seed: row[3].parse().ok()?,
            cloud: row[4].to_string(),
            status,
            epochs: row[6].parse().ok()?,
            first_loss: opt(7)?,
            final_loss: opt(8)?,
            metrics,
            error: row[13].to_string(),
            started_unix_ms: row[14].parse().ok()?,
            elapsed_ms: row[15].parse().ok()?,
        })
    }
}

/// One row of `distances.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceRow {
    pub group_a: String,
    pub run_a: usize,
    pub group_b: String,
    pub run_b: usize,
    pub metric: CloudMetric,
    pub value: f64,
}

impl DistanceRow {
    pub fn is_intra(&self) -> bool {
        self.group_a == self.group_b
    }
}

/// Identifies the experiment a store belongs to; a store is only resumed by a
/// spec with the same manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub graph_id: String,
    pub num_nodes: usize,
    pub num_edges: usize,
    pub experiment_seed: u64,
    pub repeats: usize,
    pub param_sets: Vec<String>,
    pub spec: serde_json::Value,
}

impl Manifest {
    /// The output directory is left out so that a store can be moved or
    /// compared with a copy produced elsewhere.
    pub fn new(spec: &ExperimentSpec, graph: &crate::graph::Graph, param_sets: Vec<String>) -> Result<Manifest> {
        let mut spec_value = serde_json::to_value(spec)?;
        if let Some(obj) = spec_value.as_object_mut() {
            obj.remove("output_dir");
        }
        Ok(Manifest {
            name: spec.name.clone(),
            graph_id: graph.id().to_string(),
            num_nodes: graph.num_nodes(),
            num_edges: graph.num_edges(),
            experiment_seed: spec.experiment_seed,
            repeats: spec.repeats,
            param_sets,
            spec: spec_value,
        })
    }
}

/// A result store rooted at one directory.
#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Store {
        Store { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn cloud_name(label: &str, repeat: usize) -> String {
        format!("{CLOUDS}/{label}_r{repeat:03}.pc")
    }

    pub fn exists(&self) -> bool {
        self.path(MANIFEST).is_file()
    }

    /// Writes the manifest, or checks it against the one already present.
    pub fn init(&self, manifest: &Manifest) -> Result<()> {
        fs::create_dir_all(self.root.join(CLOUDS))?;
        let path = self.path(MANIFEST);
        if path.is_file() {
            let existing = self.manifest()?;
            if existing != *manifest {
                return Err(Error::Format {
                    path,
                    msg: "store belongs to a different experiment; choose another output_dir".into(),
                });
            }
            return Ok(());
        }
        let mut text = serde_json::to_string_pretty(manifest)?;
        text.push('\n');
        write_atomic(&path, text.as_bytes())
    }

    pub fn manifest(&self) -> Result<Manifest> {
        let text = fs::read_to_string(self.path(MANIFEST))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Reads `records.csv`, skipping rows that do not parse (for example a
    /// line cut short by an interrupted run). Later rows for the same cell
    /// replace earlier ones.
    pub fn read_records_lenient(&self) -> Result<Vec<RunRecord>> {
        let path = self.path(RECORDS);
        if !path.is_file() {
            return Ok(Vec::new());
        }
        let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_path(&path)?;
        let mut by_cell = BTreeMap::new();
        for row in reader.records() {
            let Ok(row) = row else { continue };
            if let Some(rec) = RunRecord::from_row(&row) {
                by_cell.insert((rec.param_set.clone(), rec.repeat), rec);
            }
        }
        Ok(by_cell.into_values().collect())
    }

    /// Strict read of `records.csv`.
    pub fn read_records(&self) -> Result<Vec<RunRecord>> {
        let path = self.path(RECORDS);
        let mut reader = csv::Reader::from_path(&path)?;
        let mut out = Vec::new();
        for (i, row) in reader.records().enumerate() {
            let row = row?;
            out.push(RunRecord::from_row(&row).ok_or_else(|| Error::Format {
                path: path.clone(),
                msg: format!("malformed record on data row {}", i + 1),
            })?);
        }
        Ok(out)
    }

    /// Appends a record and flushes it to disk.
    pub fn append_record(&self, record: &RunRecord) -> Result<()> {
        let path = self.path(RECORDS);
        let fresh = !path.is_file() || fs::metadata(&path)?.len() == 0;
        if !fresh {
            repair_trailing_newline(&path)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        let mut writer = csv::Writer::from_writer(file);
        if fresh {
            writer.write_record(RECORD_HEADER)?;
        }
        writer.write_record(record.to_row())?;
        let file = writer.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        file.sync_data()?;
        Ok(())
    }

    /// Rewrites `records.csv` atomically with the given rows.
    pub fn write_records(&self, records: &[RunRecord]) -> Result<()> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(RECORD_HEADER)?;
        for r in records {
            writer.write_record(r.to_row())?;
        }
        write_atomic(&self.path(RECORDS), &csv_bytes(writer)?)
    }

    pub fn write_quality(&self, records: &[RunRecord]) -> Result<()> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(["graph_id", "param_set", "repeat", "metric", "value"])?;
        for r in records.iter().filter(|r| r.is_ok()) {
            for (m, v) in &r.metrics {
                writer.write_record([&r.graph_id, &r.param_set, &r.repeat.to_string(), m.name(), &v.to_string()])?;
            }
        }
        write_atomic(&self.path(QUALITY), &csv_bytes(writer)?)
    }

    pub fn write_distances(&self, rows: &[DistanceRow]) -> Result<()> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(["group_a", "run_a", "group_b", "run_b", "metric", "value"])?;
        for r in rows {
            writer.write_record([
                &r.group_a,
                &r.run_a.to_string(),
                &r.group_b,
                &r.run_b.to_string(),
                r.metric.name(),
                &r.value.to_string(),
            ])?;
        }
        write_atomic(&self.path(DISTANCES), &csv_bytes(writer)?)
    }

    pub fn read_distances(&self) -> Result<Vec<DistanceRow>> {
        let path = self.path(DISTANCES);
        let mut reader = csv::Reader::from_path(&path)?;
        let bad = |msg: String| Error::Format { path: path.clone(), msg };
        let mut out = Vec::new();
        for row in reader.records() {
            let row = row?;
            if row.len() != 6 {
                return Err(bad(format!("expected 6 columns, found {}", row.len())));
            }
            let num = |i: usize| row[i].parse::<usize>().map_err(|_| bad(format!("bad integer {:?}", &row[i])));
            out.push(DistanceRow {
                group_a: row[0].to_string(),
                run_a: num(1)?,
                group_b: row[2].to_string(),
                run_b: num(3)?,
                metric: CloudMetric::parse(&row[4]).ok_or_else(|| bad(format!("unknown metric {:?}", &row[4])))?,
                value: row[5].parse().map_err(|_| bad(format!("bad value {:?}", &row[5])))?,
            });
        }
        Ok(out)
    }

    pub fn write_report<T: Serialize>(&self, report: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(report)?;
        text.push('\n');
        write_atomic(&self.path(REPORT), text.as_bytes())
    }

    pub fn load_cloud(&self, record: &RunRecord) -> Result<PointCloud> {
        PointCloud::load(&self.root.join(&record.cloud))
    }

    /// Every cloud file currently in the store, sorted by name.
    pub fn cloud_files(&self) -> Result<Vec<PathBuf>> {
        let dir = self.root.join(CLOUDS);
        if !dir.is_dir() {
            return Ok(Vec::new());
        }
        let mut files: Vec<PathBuf> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && !p.extension().is_some_and(|e| e == "tmp"))
            .collect();
        files.sort();
        Ok(files)
    }

    /// SHA-256 over every file in the store with timing columns blanked, for
    /// comparing two executions.
    pub fn fingerprint(&self) -> Result<String> {
        let mut hasher = Sha256::new();
        let mut names = vec![MANIFEST, RECORDS, QUALITY, DISTANCES, REPORT]
            .into_iter()
            .map(|n| self.path(n))
            .filter(|p| p.is_file())
            .collect::<Vec<_>>();
        names.extend(self.cloud_files()?);
        for path in names {
            let rel = path.strip_prefix(&self.root).unwrap_or(&path);
            hasher.update(rel.to_string_lossy().as_bytes());
            hasher.update([0]);
            let bytes = if path.file_name().is_some_and(|n| n == RECORDS) {
                self.records_without_timing()?
            } else {
                fs::read(&path)?
            };
            hasher.update((bytes.len() as u64).to_le_bytes());
            hasher.update(&bytes);
        }
        Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
    }

    fn records_without_timing(&self) -> Result<Vec<u8>> {
        let mut reader = csv::Reader::from_path(self.path(RECORDS))?;
        let headers = reader.headers()?.clone();
        let keep: Vec<usize> = (0..headers.len()).filter(|&i| !TIMING_COLUMNS.contains(&&headers[i])).collect();
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(keep.iter().map(|&i| &headers[i]))?;
        for row in reader.records() {
            let row = row?;
            writer.write_record(keep.iter().map(|&i| row.get(i).unwrap_or("")))?;
        }
        csv_bytes(writer)
    }
}

fn csv_bytes(writer: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    writer.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Terminates a partially written last line so the next append starts on a
/// fresh row.
fn repair_trailing_newline(path: &Path) -> Result<()> {
    let bytes = fs::read(path)?;
    if bytes.last().is_some_and(|&b| b != b'\n') {
        let mut f = OpenOptions::new().append(true).open(path)?;
        f.write_all(b"\n")?;
    }
    Ok(())
}
