//! Executes an experiment grid into a result store.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::metrics::normalize_diameter;
use crate::pointcloud::PointCloud;
use crate::quality;
use crate::skipgram;
use crate::walks::build_corpus;

use super::report::{stability_report, StabilityReport};
use super::spec::{cell_seed, enumerate_grid, ExperimentSpec, ParamSet};
use super::store::{CellStatus, DistanceRow, Manifest, RunRecord, Store};

/// Predicate used to force a cell to fail, for exercising failure handling.
pub type FailHook = Arc<dyn Fn(&ParamSet, usize) -> bool + Send + Sync>;

#[derive(Clone, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses the rayon default.
    pub threads: Option<usize>,
    /// Stop after this many newly computed cells, leaving the store as an
    /// interrupted run would.
    pub max_new_cells: Option<usize>,
    pub fail_if: Option<FailHook>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub records: Vec<RunRecord>,
    pub new_cells: usize,
    /// False when the run stopped early because of `max_new_cells`.
    pub finished: bool,
    pub num_distances: usize,
    pub report: Option<StabilityReport>,
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

fn train_cell(graph: &Graph, spec: &ExperimentSpec, cell: &ParamSet, repeat: usize, seed: u64) -> Result<(PointCloud, skipgram::LossTrace)> {
    let corpus = build_corpus(graph, &cell.walk_params(seed))?;
    let out = skipgram::train(&corpus, &spec.training.embed_params(cell, seed))?;
    let mut cloud = normalize_diameter(&out.cloud)?;
    cloud.provenance.param_set = Some(cell.label());
    cloud.provenance.repeat = Some(repeat);
    Ok((cloud, out.loss))
}

fn run_cell(graph: &Graph, spec: &ExperimentSpec, store: &Store, cell: &ParamSet, repeat: usize, fail: bool) -> RunRecord {
    let started_unix_ms = now_ms();
    let clock = Instant::now();
    let seed = cell_seed(spec.experiment_seed, cell, repeat);
    let mut record = RunRecord {
        graph_id: graph.id().to_string(),
        param_set: cell.label(),
        repeat,
        seed,
        cloud: String::new(),
        status: CellStatus::Failed,
        epochs: 0,
        first_loss: None,
        final_loss: None,
        metrics: BTreeMap::new(),
        error: String::new(),
        started_unix_ms,
        elapsed_ms: 0,
    };
    let outcome = (|| -> Result<()> {
        if fail {
            return Err(Error::Degenerate("failure injected".into()));
        }
        let (cloud, loss) = train_cell(graph, spec, cell, repeat, seed)?;
        record.epochs = loss.epochs();
        record.first_loss = loss.first();
        record.final_loss = loss.last();
        let name = Store::cloud_name(&record.param_set, repeat);
        cloud.save(&store.root().join(&name))?;
        record.metrics = quality::evaluate(graph, &cloud, &spec.metrics.quality)?.into_iter().collect();
        record.cloud = name;
        record.status = CellStatus::Ok;
        Ok(())
    })();
    if let Err(e) = outcome {
        log::warn!("cell {} repeat {repeat} failed: {e}", record.param_set);
        record.error = e.to_string();
        record.cloud.clear();
        record.metrics.clear();
    }
    record.elapsed_ms = clock.elapsed().as_millis() as u64;
    record
}

/// Runs every `(param_set, repeat)` cell not already in the store, then
/// recomputes the distance table, quality table and stability report from
/// the full set of records.
pub fn run_experiment(spec: &ExperimentSpec, options: &RunOptions) -> Result<RunSummary> {
    spec.validate()?;
    let graph = spec.load_graph()?;
    let cells = enumerate_grid(&spec.grid)?;
    let labels: Vec<String> = cells.iter().map(ParamSet::label).collect();
    let store = Store::open(spec.output_path());
    store.init(&Manifest::new(spec, &graph, labels.clone())?)?;
    if spec.repeats < 2 {
        log::warn!("repeats = {}: no stability analysis is possible", spec.repeats);
    }

    let mut done: BTreeMap<(String, usize), RunRecord> = BTreeMap::new();
    for r in store.read_records_lenient()? {
        let usable = r.repeat < spec.repeats
            && labels.contains(&r.param_set)
            && (!r.is_ok() || store.root().join(&r.cloud).is_file());
        if usable {
            done.insert((r.param_set.clone(), r.repeat), r);
        }
    }
    let mut todo: Vec<(&ParamSet, usize)> = cells
        .iter()
        .flat_map(|c| (0..spec.repeats).map(move |r| (c, r)))
        .filter(|(c, r)| !done.contains_key(&(c.label(), *r)))
        .collect();
    let pending = todo.len();
    if let Some(limit) = options.max_new_cells {
        todo.truncate(limit);
    }
    if todo.is_empty() {
        log::info!("all cells complete");
    } else {
        log::info!("{} of {} cells to compute", todo.len(), cells.len() * spec.repeats);
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let writer = Mutex::new(());
    let fresh: Vec<RunRecord> = pool.install(|| {
        todo.par_iter()
            .map(|&(cell, repeat)| {
                let fail = options.fail_if.as_ref().is_some_and(|f| f(cell, repeat));
                let record = run_cell(&graph, spec, &store, cell, repeat, fail);
                let _guard = writer.lock().unwrap_or_else(|e| e.into_inner());
                store.append_record(&record)?;
                log::info!("{} r{} {:?} ({} ms)", record.param_set, repeat, record.status, record.elapsed_ms);
                Ok(record)
            })
            .collect::<Result<_>>()
    })?;
    let new_cells = fresh.len();
    for r in fresh {
        done.insert((r.param_set.clone(), r.repeat), r);
    }

    let order: BTreeMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let mut records: Vec<RunRecord> = done.into_values().collect();
    records.sort_by_key(|r| (order[r.param_set.as_str()], r.repeat));

    if new_cells < pending {
        return Ok(RunSummary { records, new_cells, finished: false, num_distances: 0, report: None });
    }

    store.write_records(&records)?;
    store.write_quality(&records)?;
    if records.iter().all(|r| !r.is_ok()) {
        return Err(Error::AllCellsFailed);
    }
    let distances = pool.install(|| compute_distances(spec, &store, &labels, &records))?;
    store.write_distances(&distances)?;

    let report = if spec.repeats >= 2 {
        match stability_report(&records, &distances, &spec.metrics.distances, spec.stats.alpha, spec.stats.test) {
            Ok(report) => {
                store.write_report(&report)?;
                Some(report)
            }
            Err(e) => {
                log::warn!("no stability report: {e}");
                None
            }
        }
    } else {
        None
    };
    if report.is_none() {
        let stale = store.path(super::store::REPORT);
        if stale.is_file() {
            std::fs::remove_file(stale)?;
        }
    }
    Ok(RunSummary { records, new_cells, finished: true, num_distances: distances.len(), report })
}

/// Intra-group distances for every pair of successful repeats, and, when
/// enabled, cross-group distances between equal repeat indices.
fn compute_distances(spec: &ExperimentSpec, store: &Store, labels: &[String], records: &[RunRecord]) -> Result<Vec<DistanceRow>> {
    let ok: Vec<&RunRecord> = records.iter().filter(|r| r.is_ok()).collect();
    let clouds: Vec<PointCloud> = ok.par_iter().map(|r| store.load_cloud(r)).collect::<Result<_>>()?;
    let index: BTreeMap<(&str, usize), usize> =
        ok.iter().enumerate().map(|(i, r)| ((r.param_set.as_str(), r.repeat), i)).collect();

    let mut jobs: Vec<(usize, usize)> = Vec::new();
    for g in labels {
        for a in 0..spec.repeats {
            for b in (a + 1)..spec.repeats {
                if let (Some(&i), Some(&j)) = (index.get(&(g.as_str(), a)), index.get(&(g.as_str(), b))) {
                    jobs.push((i, j));
                }
            }
        }
    }
    if spec.metrics.cross_group {
        for (x, ga) in labels.iter().enumerate() {
            for gb in &labels[x + 1..] {
                for r in 0..spec.repeats {
                    if let (Some(&i), Some(&j)) = (index.get(&(ga.as_str(), r)), index.get(&(gb.as_str(), r))) {
                        jobs.push((i, j));
                    }
                }
            }
        }
    }
    let metrics = &spec.metrics.distances;
    let values: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(i, j)| metrics.iter().map(|m| m.eval(&clouds[i], &clouds[j])).collect())
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(jobs.len() * metrics.len());
    for (k, &m) in metrics.iter().enumerate() {
        for (&(i, j), v) in jobs.iter().zip(&values) {
            rows.push(DistanceRow {
                group_a: ok[i].param_set.clone(),
                run_a: ok[i].repeat,
                group_b: ok[j].param_set.clone(),
                run_b: ok[j].repeat,
                metric: m,
                value: v[k],
            });
        }
    }
    Ok(rows)
}
