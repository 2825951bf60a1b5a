use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::anyhow;
use clap::{Args, Parser, Subcommand, ValueEnum};

use n2vlab_core::experiment::{self, ExperimentSpec, RunOptions, StabilityReport, Store};
use n2vlab_core::graph::{self, Graph, SbmSpec};
use n2vlab_core::metrics::{normalize_diameter, project_pca, CloudMetric};
use n2vlab_core::quality::{self, QualityMetric};
use n2vlab_core::{Error, PointCloud};

const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_COMPUTE: u8 = 4;

#[derive(Parser)]
#[command(name = "n2vlab", version, about = "Stability and quality laboratory for node2vec embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a random graph and write it as an edge list (or JSON for `.json`).
    Generate(GenerateArgs),
    /// Execute an experiment spec into its result store.
    Run(RunArgs),
    /// Export plot-ready CSV tables from a result store.
    Report(ReportArgs),
    /// Distances between two point-cloud files.
    Dist(DistArgs),
    /// Link-reconstruction quality of one point cloud on a graph.
    Quality(QualityArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Sbm,
    Er,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    model: Model,
    /// Comma-separated block sizes (sbm).
    #[arg(long, value_delimiter = ',')]
    blocks: Vec<usize>,
    #[arg(long)]
    p_intra: Option<f64>,
    #[arg(long)]
    p_inter: Option<f64>,
    /// Number of nodes (er).
    #[arg(long)]
    n: Option<usize>,
    /// Edge probability (er).
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Write a weight column.
    #[arg(long)]
    weighted: bool,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    spec: PathBuf,
    /// Worker threads; defaults to all cores.
    #[arg(long, env = "N2VLAB_THREADS")]
    threads: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    store: PathBuf,
    /// Output directory; defaults to `<store>/report`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also export the first k principal-component coordinates of every cloud.
    #[arg(long)]
    pca: Option<usize>,
}

#[derive(Args)]
struct DistArgs {
    a: PathBuf,
    b: PathBuf,
    /// Rescale both clouds to diameter 1 first.
    #[arg(long)]
    normalize: bool,
}

#[derive(Args)]
struct QualityArgs {
    /// Edge-list or JSON graph file, or `lesmis` for the bundled network.
    #[arg(long)]
    graph: String,
    #[arg(long)]
    weighted: bool,
    #[arg(long)]
    cloud: PathBuf,
}

/// Failure classes, each with its own exit code.
enum Failure {
    Usage(anyhow::Error),
    Io(anyhow::Error),
    Compute(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_) => Failure::Usage(e.into()),
            e if e.is_io() => Failure::Io(e.into()),
            e => Failure::Compute(e.into()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.into())
    }
}

trait Ctx<T> {
    fn ctx(self, msg: impl FnOnce() -> String) -> Result<T, Failure>;
}

impl<T, E: Into<Failure>> Ctx<T> for Result<T, E> {
    fn ctx(self, msg: impl FnOnce() -> String) -> Result<T, Failure> {
        self.map_err(|e| match e.into() {
            Failure::Usage(e) => Failure::Usage(e.context(msg())),
            Failure::Io(e) => Failure::Io(e.context(msg())),
            Failure::Compute(e) => Failure::Compute(e.context(msg())),
        })
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Run(a) => run(a),
        Command::Report(a) => report(a),
        Command::Dist(a) => dist(a),
        Command::Quality(a) => quality_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (code, err) = match f {
                Failure::Usage(e) => (EXIT_USAGE, e),
                Failure::Io(e) => (EXIT_IO, e),
                Failure::Compute(e) => (EXIT_COMPUTE, e),
            };
            eprintln!("error: {err:#}");
            ExitCode::from(code)
        }
    }
}

fn usage(msg: &str) -> Failure {
    Failure::Usage(anyhow!("{msg}"))
}

fn generate(a: GenerateArgs) -> Result<(), Failure> {
    let g = match a.model {
        Model::Sbm => {
            if a.blocks.is_empty() {
                return Err(usage("--blocks is required for --model sbm"));
            }
            let spec = SbmSpec {
                block_sizes: a.blocks,
                p_intra: a.p_intra.ok_or_else(|| usage("--p-intra is required for --model sbm"))?,
                p_inter: a.p_inter.ok_or_else(|| usage("--p-inter is required for --model sbm"))?,
                seed: a.seed,
            };
            graph::generate_sbm(&spec)?
        }
        Model::Er => {
            let n = a.n.ok_or_else(|| usage("--n is required for --model er"))?;
            let p = a.p.ok_or_else(|| usage("--p is required for --model er"))?;
            graph::generate_er(n, p, a.seed)?
        }
    };
    let text = if a.out.extension().is_some_and(|e| e == "json") {
        g.to_json()?
    } else {
        let isolated = (0..g.num_nodes()).filter(|&v| g.degree(v) == 0).count();
        if isolated > 0 {
            log::warn!("{isolated} isolated node(s) cannot be represented in an edge list; use a .json output to keep them");
        }
        format!("# {} nodes={} edges={}\n{}", g.id(), g.num_nodes(), g.num_edges(), g.to_edge_list(a.weighted))
    };
    fs::write(&a.out, text).ctx(|| format!("writing {}", a.out.display()))?;
    println!("nodes {} edges {}", g.num_nodes(), g.num_edges());
    Ok(())
}

fn run(a: RunArgs) -> Result<(), Failure> {
    if a.threads == Some(0) {
        return Err(usage("--threads must be at least 1"));
    }
    let spec = ExperimentSpec::load(&a.spec).ctx(|| format!("reading spec {}", a.spec.display()))?;
    let options = RunOptions { threads: a.threads, ..Default::default() };
    let summary = experiment::run_experiment(&spec, &options)?;
    let failed = summary.records.iter().filter(|r| !r.is_ok()).count();
    if summary.new_cells == 0 {
        eprintln!("all cells complete");
    }
    eprintln!(
        "{} records ({} failed), {} new, {} distances -> {}",
        summary.records.len(),
        failed,
        summary.new_cells,
        summary.num_distances,
        spec.output_path().display()
    );
    Ok(())
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<usize, Failure> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Failure::Io(anyhow!(e)))?;
    w.write_record(header).map_err(|e| Failure::Io(anyhow!(e)))?;
    let mut count = 0;
    for row in rows {
        w.write_record(&row).map_err(|e| Failure::Io(anyhow!(e)))?;
        count += 1;
    }
    w.flush()?;
    Ok(count)
}

fn report(a: ReportArgs) -> Result<(), Failure> {
    let store = Store::open(&a.store);
    if !store.exists() {
        return Err(Failure::Io(anyhow!("{} is not a result store", a.store.display())));
    }
    let records = store.read_records().ctx(|| "reading records".into())?;
    let ok: Vec<_> = records.iter().filter(|r| r.is_ok()).collect();
    if ok.is_empty() {
        return Err(Failure::Compute(anyhow!("store {} has no successful records", a.store.display())));
    }
    let out = a.out.unwrap_or_else(|| a.store.join("report"));
    fs::create_dir_all(&out)?;

    let distances = store.read_distances().ctx(|| "reading distances".into())?;
    let n = write_csv(
        &out.join("stability_boxplot.csv"),
        &["param_set", "metric", "run_a", "run_b", "value"],
        distances.iter().filter(|d| d.is_intra()).map(|d| {
            vec![d.group_a.clone(), d.metric.name().into(), d.run_a.to_string(), d.run_b.to_string(), d.value.to_string()]
        }),
    )?;
    println!("stability_boxplot.csv: {n} rows");

    let n = write_csv(
        &out.join("quality_boxplot.csv"),
        &["param_set", "repeat", "metric", "value"],
        ok.iter().flat_map(|r| {
            r.metrics
                .iter()
                .map(|(m, v)| vec![r.param_set.clone(), r.repeat.to_string(), m.name().into(), v.to_string()])
        }),
    )?;
    println!("quality_boxplot.csv: {n} rows");

    if let Some(k) = a.pca {
        if k == 0 {
            return Err(usage("--pca must be at least 1"));
        }
        let mut header = vec!["param_set".to_string(), "repeat".into(), "node".into()];
        header.extend((1..=k).map(|i| format!("pc{i}")));
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut rows = Vec::new();
        for r in &ok {
            let cloud = store.load_cloud(r).ctx(|| format!("loading {}", r.cloud))?;
            let proj = project_pca(&cloud, k)?;
            for v in 0..cloud.len() {
                let mut row = vec![r.param_set.clone(), r.repeat.to_string(), v.to_string()];
                row.extend(proj.scores.row(v).iter().map(f64::to_string));
                rows.push(row);
            }
        }
        let n = write_csv(&out.join("pca.csv"), &header, rows)?;
        println!("pca.csv: {n} rows");
    }

    let report_path = store.path(experiment::store::REPORT);
    if report_path.is_file() {
        let text = fs::read_to_string(&report_path)?;
        let rep: StabilityReport = serde_json::from_str(&text).map_err(|e| Failure::Io(anyhow!(e)))?;
        fs::write(out.join("stability_report.json"), &text)?;
        print_report(&rep);
    } else {
        println!("no stability report (fewer than two complete groups with two or more repeats)");
    }
    Ok(())
}

fn print_report(rep: &StabilityReport) {
    for m in &rep.metrics {
        let c = &m.comparisons;
        let significant = c.pairs.iter().filter(|p| p.significant).count();
        println!(
            "{}: fraction_significant = {} ({significant} of m = {} pairs, alpha = {}, {:?})",
            m.metric.name(),
            c.fraction_significant,
            c.m,
            c.alpha,
            c.test
        );
        match m.rank_correlation.rho {
            Some(rho) => println!("  spearman(param distance, median cross distance) = {rho:.4} over {} pairs", m.rank_correlation.num_pairs),
            None => println!("  spearman: degenerate"),
        }
        println!("  {:<28} {:>4} {:>10} {:>10} {:>10} {:>12}", "param_set", "ok", "median", "q1", "q3", "variance");
        for g in &m.groups {
            match &g.summary {
                Some(s) => println!(
                    "  {:<28} {:>4} {:>10.5} {:>10.5} {:>10.5} {:>12.3e}{}",
                    g.group,
                    g.successful_repeats,
                    s.median,
                    s.q1,
                    s.q3,
                    s.variance,
                    if g.complete { "" } else { "  (incomplete)" }
                ),
                None => println!("  {:<28} {:>4} (no distances)", g.group, g.successful_repeats),
            }
        }
    }
}

fn load_cloud(path: &Path, normalize: bool) -> Result<PointCloud, Failure> {
    let cloud = PointCloud::load(path).ctx(|| format!("loading {}", path.display()))?;
    Ok(if normalize { normalize_diameter(&cloud)? } else { cloud })
}

fn dist(a: DistArgs) -> Result<(), Failure> {
    let x = load_cloud(&a.a, a.normalize)?;
    let y = load_cloud(&a.b, a.normalize)?;
    for m in CloudMetric::ALL {
        println!("{}\t{}", m.name(), m.eval(&x, &y)?);
    }
    Ok(())
}

fn quality_cmd(a: QualityArgs) -> Result<(), Failure> {
    let g: Graph = if a.graph == "lesmis" {
        graph::les_miserables(a.weighted)
    } else {
        graph::load_graph_file(Path::new(&a.graph), a.weighted).ctx(|| format!("loading graph {}", a.graph))?
    };
    let cloud = load_cloud(&a.cloud, false)?;
    for (m, v) in quality::evaluate(&g, &cloud, &QualityMetric::ALL)? {
        println!("{}\t{v}", m.name());
    }
    Ok(())
}
