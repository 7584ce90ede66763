use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use spectral_pe::community::{align_errors, spectral_partition, ClusterMethod, Partition, Selector};
use spectral_pe::distances::{
    bump_llpe_construct, encoding_distance_error, spectral_distance_matrix, SpectralKernel, DEFAULT_C_MAX,
};
use spectral_pe::encodings::{build_encoding, encoding_spectrum, llpe_forward, EncodingSpec, LlpeParams};
use spectral_pe::graph::{edge_homophily, load_graph, save_graph, FeatureGenParams, Graph};
use spectral_pe::harness::{
    bench_eigs, rademacher_estimate, run_sweep, sensitivity_sweeps, spectrum_for, write_rows, write_sweep,
    ExperimentConfig, GraphFamily, RademacherBasis, SensitivityConfig,
};
use spectral_pe::learner::{split_nodes, train_node_classifier, ClassifierConfig};
use spectral_pe::spectral::{laplacian_extremal, laplacian_spectrum, normalize_eigenvalues, LanczosOptions};

#[derive(Parser)]
#[command(name = "spectral-pe", version, about = "Spectral positional encodings and SBM experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labelled graph with Gaussian features.
    Gen(GenArgs),
    /// Compute Laplacian eigenpairs of a graph.
    Spectrum(SpectrumArgs),
    /// Build a positional encoding.
    Encode(EncodeArgs),
    /// Pairwise spectral distances.
    Distance(DistanceArgs),
    /// Spectral community recovery against the graph's labels.
    Community(CommunityArgs),
    /// Train one node classifier.
    Train(TrainArgs),
    /// Run a homophily sweep from a TOML config.
    Sweep(ConfigArgs),
    /// Empirical Rademacher complexity of the Chebyshev hypothesis class.
    Rademacher(RademacherArgs),
    /// Time the extremal eigensolver.
    Bench(BenchArgs),
    /// Sensitivity to polynomial order and retained eigenpairs.
    Sensitivity(ConfigArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum, default_value_t = Family::Sbm)]
    family: Family,
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 10.0)]
    avg_degree: f64,
    /// Edges per new node (preferential attachment).
    #[arg(long, default_value_t = 5)]
    m_edges: usize,
    #[arg(long, default_value_t = 0.5)]
    h: f64,
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    #[arg(long, default_value_t = 8.0)]
    sigma: f64,
    #[arg(long, default_value_t = 10)]
    dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Edge-list path; features.csv and labels.csv are written next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Sbm,
    Pa,
}

#[derive(Args)]
struct SpectrumArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Lowest eigenpairs to compute with the iterative solver.
    #[arg(long)]
    first: Option<usize>,
    /// Highest eigenpairs to compute with the iterative solver.
    #[arg(long)]
    last: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    graph: PathBuf,
    /// e.g. `lpe-fk:16`, `rwse:16`, `llpe:M=64,d=32`.
    #[arg(long)]
    encoding: EncodingSpec,
    /// Θ as CSV; random initialization when omitted.
    #[arg(long)]
    theta: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DistanceArgs {
    #[arg(long)]
    graph: PathBuf,
    /// `commute`, `biharmonic`, `diffusion:<t>`, `highpass:<t>` or `custom:<c0,c1,...>`.
    #[arg(long)]
    kernel: SpectralKernel,
    /// Also build the bump-filter encoding at this order and report its error.
    #[arg(long)]
    bump_order: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_C_MAX)]
    c_max: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SelectorArg {
    First,
    Last,
    SignOfLast,
}

#[derive(Args)]
struct CommunityArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Number of clusters; the number of label classes when omitted.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_enum, default_value_t = SelectorArg::First)]
    selector: SelectorArg,
    /// `sign` or `kmeans`.
    #[arg(long, default_value = "kmeans")]
    method: ClusterMethod,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    encoding: EncodingSpec,
    /// Classifier settings as TOML; defaults otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Where to write the learned Θ.
    #[arg(long)]
    theta_out: Option<PathBuf>,
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: PathBuf,
    /// Run only this seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's output path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RademacherArgs {
    /// Use this graph's spectrum as the sample.
    #[arg(long, conflicts_with = "uniform")]
    graph: Option<PathBuf>,
    /// Use this many uniform samples on [-1, 1].
    #[arg(long)]
    uniform: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 64)]
    order: usize,
    #[arg(long, default_value_t = 2000)]
    num_sigma: usize,
    /// Include the constant polynomial in the feature map.
    #[arg(long)]
    with_constant: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "10000")]
    n: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "32")]
    k: Vec<usize>,
    #[arg(long, default_value_t = 10.0)]
    avg_degree: f64,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seeds: Vec<u64>,
    #[arg(long, default_value_t = 3)]
    reps: usize,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn print_json(value: serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(&value).expect("json"));
}

fn load(path: &Path) -> Result<Graph> {
    load_graph(path).with_context(|| format!("loading {}", path.display()))
}

/// Returns whether any soft failure occurred.
fn run(command: Command) -> Result<bool> {
    match command {
        Command::Gen(a) => {
            let family = match a.family {
                Family::Sbm => GraphFamily::Sbm { n: a.n, k: a.k, avg_degree: a.avg_degree },
                Family::Pa => GraphFamily::Pa { n: a.n, k: a.k, m_edges: a.m_edges },
            };
            let features = FeatureGenParams { mu: a.mu, sigma: a.sigma, dim: a.dim };
            let g = family.generate(a.h, &features, a.seed)?;
            save_graph(&g, &a.out)?;
            print_json(json!({
                "nodes": g.n(),
                "edges": g.num_edges(),
                "edge_homophily": edge_homophily(&g).ok(),
                "out": a.out,
            }));
        }
        Command::Spectrum(a) => {
            let g = load(&a.graph)?;
            let s = match (a.first, a.last) {
                (None, None) => laplacian_spectrum(&g)?,
                (f, l) => {
                    let opts = LanczosOptions { seed: a.seed, ..Default::default() };
                    laplacian_extremal(&g, f.unwrap_or(0), l.unwrap_or(0), &opts)?
                }
            };
            s.write_csv(&a.out)?;
            print_json(json!({ "pairs": s.len(), "min": s.eigenvalues.first(), "max": s.eigenvalues.last() }));
        }
        Command::Encode(a) => {
            let g = load(&a.graph)?;
            let spectrum = spectrum_for(&g, &[a.encoding])?;
            let theta = match (a.encoding.llpe_shape(), &a.theta) {
                (Some(_), Some(p)) => Some(LlpeParams::read_csv(p)?),
                (Some((order, dim, ..)), None) => Some(LlpeParams::init(order, dim, a.seed)),
                (None, _) => None,
            };
            let pe = build_encoding(&a.encoding, &g, spectrum.as_ref(), theta.as_ref())?;
            let mut w = csv_writer(&a.out)?;
            for row in pe.matrix.rows() {
                w.write_record(row.iter().map(|v| v.to_string()))?;
            }
            w.flush()?;
            print_json(json!({ "rows": pe.matrix.nrows(), "cols": pe.matrix.ncols(), "encoding": a.encoding.to_string() }));
        }
        Command::Distance(a) => {
            let g = load(&a.graph)?;
            let s = laplacian_spectrum(&g)?;
            let d = spectral_distance_matrix(&s, &a.kernel)?;
            d.write_csv(&a.out)?;
            let mut report = json!({ "nodes": d.n(), "kernel": a.kernel.to_string() });
            if let Some(order) = a.bump_order {
                let theta = bump_llpe_construct(&s, &a.kernel, a.c_max, order)?;
                let (abs, rel) = encoding_distance_error(&llpe_forward(&s, &theta), &d);
                report["bump_abs_error"] = json!(abs);
                report["bump_rel_error"] = json!(rel);
            }
            print_json(report);
        }
        Command::Community(a) => {
            let g = load(&a.graph)?;
            let labels = g.labels_or_err()?.to_vec();
            let k = a.k.or(g.num_classes()).context("need --k or labels")?;
            let (selector, first, last) = match a.selector {
                SelectorArg::First => (Selector::FirstNontrivial, k, 0),
                SelectorArg::Last => (Selector::Last, 1, k - 1),
                SelectorArg::SignOfLast => (Selector::SignOfLast, 1, 1),
            };
            let s = if g.n() <= spectral_pe::harness::DENSE_SPECTRUM_MAX_N {
                laplacian_spectrum(&g)?
            } else {
                laplacian_extremal(&g, first, last, &LanczosOptions::default())?
            };
            let pred = spectral_partition(&s, &selector, k, a.method, a.seed)?;
            let r = align_errors(&pred, &Partition::new(labels, k)?)?;
            print_json(json!({ "misclassified": r.misclassified, "accuracy": r.accuracy, "permutation": r.permutation }));
        }
        Command::Train(a) => {
            let g = load(&a.graph)?;
            let config: ClassifierConfig = match &a.config {
                Some(p) => toml::from_str(&std::fs::read_to_string(p)?)?,
                None => ClassifierConfig::default(),
            };
            let spectrum = spectrum_for(&g, &[a.encoding])?;
            if let Some(s) = &spectrum {
                encoding_spectrum(&a.encoding, s)?;
            }
            let split = split_nodes(g.n(), (0.6, 0.2, 0.2), a.seed)?;
            let r = train_node_classifier(&g, &a.encoding, spectrum.as_ref(), &split, &config, a.seed)?;
            if let (Some(p), Some(theta)) = (&a.theta_out, &r.theta) {
                theta.write_csv(p)?;
            }
            print_json(json!({
                "test_accuracy": r.test_accuracy,
                "val_accuracy": r.val_accuracy,
                "train_accuracy": r.train_accuracy,
                "best_epoch": r.best_epoch,
                "epochs_run": r.epochs_run,
                "quintile_accuracy": r.quintile_accuracy,
            }));
        }
        Command::Sweep(a) => {
            let mut cfg = ExperimentConfig::from_toml_file(&a.config)?;
            if let Some(seed) = a.seed {
                cfg.seeds = vec![seed];
            }
            let out_path = a.out.or(cfg.out.clone()).context("no output path (--out or `out` in the config)")?;
            let out = run_sweep(&cfg)?;
            let json_path = write_sweep(&out, &out_path)?;
            eprintln!("wrote {} and {}", out_path.display(), json_path.display());
            for c in &out.summary.cells {
                println!(
                    "h={:<4} {:<40} mean={} std={} failures={}",
                    c.h,
                    c.encoding,
                    c.mean_test.map_or("-".into(), |v| format!("{v:.4}")),
                    c.std_test.map_or("-".into(), |v| format!("{v:.4}")),
                    c.failures
                );
            }
            return Ok(out.summary.failures > 0);
        }
        Command::Rademacher(a) => {
            let lambdas: Vec<f64> = match (&a.graph, a.uniform) {
                (Some(p), _) => {
                    let s = laplacian_spectrum(&load(p)?)?;
                    normalize_eigenvalues(s.eigenvalues.as_slice().context("contiguous eigenvalues")?)
                }
                (None, Some(n)) => {
                    use rand::{Rng, SeedableRng};
                    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(a.seed ^ 0xa5a5);
                    (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect()
                }
                (None, None) => bail!("pass --graph or --uniform"),
            };
            let basis = if a.with_constant { RademacherBasis::WithConstant } else { RademacherBasis::WithoutConstant };
            let r = rademacher_estimate(&lambdas, a.c, a.order, a.num_sigma, a.seed, basis)?;
            print_json(serde_json::to_value(r)?);
        }
        Command::Bench(a) => {
            let rows = bench_eigs(&a.n, &a.k, a.avg_degree, &a.seeds, a.reps);
            write_rows(&rows, &a.out)?;
            for r in &rows {
                println!(
                    "n={} k={} seed={} time={} peak_bytes={}",
                    r.n,
                    r.k,
                    r.seed,
                    r.wall_time_s.map_or("-".into(), |t| format!("{t:.3}s")),
                    r.peak_bytes.map_or("-".into(), |b| b.to_string())
                );
            }
            return Ok(rows.iter().any(|r| r.error.is_some()));
        }
        Command::Sensitivity(a) => {
            let mut cfg = SensitivityConfig::from_toml_file(&a.config)?;
            if let Some(seed) = a.seed {
                cfg.seeds = vec![seed];
            }
            let out_path = a.out.or(cfg.out.clone()).context("no output path (--out or `out` in the config)")?;
            let rows = sensitivity_sweeps(&cfg)?;
            write_rows(&rows, &out_path)?;
            for (sweep, value, mean) in spectral_pe::harness::sensitivity_means(&rows) {
                println!("{sweep}={value:<4} mean={mean:.4}");
            }
            return Ok(rows.iter().any(|r| r.error.is_some()));
        }
    }
    Ok(false)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    Ok(csv::WriterBuilder::new().has_headers(false).from_path(path)?)
}
