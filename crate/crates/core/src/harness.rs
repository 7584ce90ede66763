//! Experiment orchestration: homophily sweeps, sensitivity sweeps, the
//! Rademacher estimate and eigensolver timing.

use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::chebyshev::{basis_into, clamp_unit, monic_scale};
use crate::encodings::{EncodingSpec, SpectrumNeed};
use crate::error::{Error, Result};
use crate::graph::{
    gen_features, pa_generate, sbm_from_homophily, sbm_generate, FeatureGenParams, FeatureMode, Graph, PaParams,
};
use crate::learner::{split_nodes, train_node_classifier, ClassifierConfig};
use crate::graph::normalized_laplacian;
use crate::spectral::{
    extremal_eigs_with_stats, laplacian_extremal, laplacian_spectrum, LanczosOptions, SpectralDecomposition,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum GraphFamily {
    /// Equal-size blocks, edge probabilities set from `avg_degree` and `h`.
    Sbm { n: usize, k: usize, avg_degree: f64 },
    /// Preferential attachment; class compatibility `h` on the diagonal and
    /// `(1−h)/(k−1)` off it, uniform labels.
    Pa { n: usize, k: usize, m_edges: usize },
}

impl Default for GraphFamily {
    fn default() -> Self {
        GraphFamily::Sbm { n: 2000, k: 2, avg_degree: 10.0 }
    }
}

impl GraphFamily {
    pub fn n(&self) -> usize {
        match *self {
            GraphFamily::Sbm { n, .. } | GraphFamily::Pa { n, .. } => n,
        }
    }

    pub fn classes(&self) -> usize {
        match *self {
            GraphFamily::Sbm { k, .. } | GraphFamily::Pa { k, .. } => k,
        }
    }

    /// Labelled graph with Gaussian features.
    pub fn generate(&self, h: f64, features: &FeatureGenParams, seed: u64) -> Result<Graph> {
        let g = match *self {
            GraphFamily::Sbm { n, k, avg_degree } => sbm_generate(&sbm_from_homophily(n, k, avg_degree, h)?, mix(seed, 1))?,
            GraphFamily::Pa { n, k, m_edges } => {
                if k < 2 {
                    return Err(Error::Parameter("preferential attachment needs k ≥ 2".into()));
                }
                let off = (1.0 - h) / (k - 1) as f64;
                let compat = Array2::from_shape_fn((k, k), |(i, j)| if i == j { h } else { off });
                pa_generate(&PaParams { n, k, m_edges, compat }, &vec![1.0; k], mix(seed, 1))?
            }
        };
        let k = self.classes();
        let mode = if k == 2 { FeatureMode::Binary } else { FeatureMode::Multiclass { classes: k } };
        let x = gen_features(g.labels_or_err()?, features, mode, mix(seed, 2))?;
        g.with_features(x)
    }
}

/// SplitMix64 finalizer over `seed + stream`, for deriving independent
/// per-purpose seeds.
pub fn mix(seed: u64, stream: u64) -> u64 {
    let mut z = seed.wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn cell_seed(seed: u64, h: f64) -> u64 {
    mix(seed, h.to_bits())
}

fn default_homophily() -> Vec<f64> {
    vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0]
}

fn default_encodings() -> Vec<EncodingSpec> {
    ["nope", "lpe-fk:16", "lpe-flk:16", "lpe-full", "llpe:M=64,d=32,l1=0.001,l2=0"]
        .iter()
        .map(|s| s.parse().expect("valid default"))
        .collect()
}

fn default_seeds() -> Vec<u64> {
    (0..10).collect()
}

fn default_split() -> [f64; 3] {
    [0.6, 0.2, 0.2]
}

/// One homophily sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub name: String,
    pub graph: GraphFamily,
    pub features: FeatureGenParams,
    pub homophily: Vec<f64>,
    pub encodings: Vec<EncodingSpec>,
    pub classifier: ClassifierConfig,
    pub seeds: Vec<u64>,
    pub split: [f64; 3],
    pub out: Option<PathBuf>,
    /// Worker threads; all cores when unset.
    pub threads: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "sweep".into(),
            graph: GraphFamily::default(),
            features: FeatureGenParams::default(),
            homophily: default_homophily(),
            encodings: default_encodings(),
            classifier: ClassifierConfig::default(),
            seeds: default_seeds(),
            split: default_split(),
            out: None,
            threads: None,
        }
    }
}

fn check_seeds(seeds: &[u64]) -> Result<()> {
    let mut s = seeds.to_vec();
    s.sort();
    s.dedup();
    if seeds.is_empty() || s.len() != seeds.len() {
        return Err(Error::Config("seeds must be nonempty and distinct".into()));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml_file(path: impl AsRef<Path>) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.homophily.is_empty() || self.encodings.is_empty() {
            return Err(Error::Config("homophily and encoding grids must be nonempty".into()));
        }
        if let Some(h) = self.homophily.iter().find(|h| !(0.0..=1.0).contains(*h)) {
            return Err(Error::Config(format!("homophily {h} outside [0, 1]")));
        }
        check_seeds(&self.seeds)?;
        for e in &self.encodings {
            e.validate()?;
        }
        self.classifier.validate()?;
        if (self.split.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config("split fractions must sum to 1".into()));
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        config_hash(self)
    }
}

fn config_hash<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_string(value).expect("config serializes");
    hex::encode(Sha256::digest(json.as_bytes()))[..16].to_string()
}

/// Graphs up to this size always get the dense full spectrum.
pub const DENSE_SPECTRUM_MAX_N: usize = 3000;

/// Spectrum covering every encoding in `specs`.
pub fn spectrum_for(graph: &Graph, specs: &[EncodingSpec]) -> Result<Option<SpectralDecomposition>> {
    if specs.iter().all(|s| s.need() == SpectrumNeed::None) {
        return Ok(None);
    }
    if graph.n() <= DENSE_SPECTRUM_MAX_N {
        return laplacian_spectrum(graph).map(Some);
    }
    let mut first = 0;
    let mut last = 0;
    for s in specs {
        match s.need() {
            SpectrumNeed::None => {}
            SpectrumNeed::Full => return laplacian_spectrum(graph).map(Some),
            SpectrumNeed::Extremal { first_k, last_k } => {
                first = first.max(first_k);
                last = last.max(last_k);
            }
        }
    }
    if first == 0 && last == 0 {
        return Ok(None);
    }
    laplacian_extremal(graph, first, last, &LanczosOptions::default()).map(Some)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub h: f64,
    pub encoding: String,
    pub seed: u64,
    pub test_accuracy: Option<f64>,
    pub val_accuracy: Option<f64>,
    pub best_epoch: Option<usize>,
    pub wall_time_s: f64,
    pub q1: Option<f64>,
    pub q2: Option<f64>,
    pub q3: Option<f64>,
    pub q4: Option<f64>,
    pub q5: Option<f64>,
    pub config_hash: String,
    pub error: Option<String>,
}

fn error_tag(e: &Error) -> String {
    let name = match e {
        Error::Parameter(_) => "parameter",
        Error::Generation(_) => "generation",
        Error::Capacity { .. } => "capacity",
        Error::Convergence { .. } => "convergence",
        Error::Config(_) => "config",
        Error::Training { .. } => "training",
        Error::Fitting(_) => "fitting",
        _ => "error",
    };
    format!("{name}: {e}")
}

fn failed_row(h: f64, encoding: &EncodingSpec, seed: u64, hash: &str, err: &Error, secs: f64) -> SweepRow {
    SweepRow {
        h,
        encoding: encoding.to_string(),
        seed,
        test_accuracy: None,
        val_accuracy: None,
        best_epoch: None,
        wall_time_s: secs,
        q1: None,
        q2: None,
        q3: None,
        q4: None,
        q5: None,
        config_hash: hash.to_string(),
        error: Some(error_tag(err)),
    }
}

struct Prepared {
    graph: Graph,
    spectrum: Option<SpectralDecomposition>,
}

fn prepare(config: &ExperimentConfig, h: f64, seed: u64) -> Result<Prepared> {
    let graph = config.graph.generate(h, &config.features, cell_seed(seed, h))?;
    let spectrum = spectrum_for(&graph, &config.encodings)?;
    Ok(Prepared { graph, spectrum })
}

fn train_cell(config: &ExperimentConfig, prep: &Prepared, h: f64, spec: &EncodingSpec, seed: u64, hash: &str) -> SweepRow {
    let start = Instant::now();
    let s = cell_seed(seed, h);
    let split = (config.split[0], config.split[1], config.split[2]);
    let result = split_nodes(prep.graph.n(), split, mix(s, 3)).and_then(|split| {
        train_node_classifier(&prep.graph, spec, prep.spectrum.as_ref(), &split, &config.classifier, mix(s, 4))
    });
    let secs = start.elapsed().as_secs_f64();
    match result {
        Ok(r) => {
            let q = |i: usize| r.quintile_accuracy.get(i).copied().flatten();
            SweepRow {
                h,
                encoding: spec.to_string(),
                seed,
                test_accuracy: Some(r.test_accuracy),
                val_accuracy: Some(r.val_accuracy),
                best_epoch: Some(r.best_epoch),
                wall_time_s: secs,
                q1: q(0),
                q2: q(1),
                q3: q(2),
                q4: q(3),
                q5: q(4),
                config_hash: hash.to_string(),
                error: None,
            }
        }
        Err(e) => {
            log::warn!("h={h} {spec} seed={seed}: {e}");
            failed_row(h, spec, seed, hash, &e, secs)
        }
    }
}

/// Re-runs one `(h, encoding, seed)` cell of a sweep.
pub fn run_cell(config: &ExperimentConfig, h: f64, spec: &EncodingSpec, seed: u64) -> SweepRow {
    let hash = config.hash();
    let start = Instant::now();
    match prepare(config, h, seed) {
        Ok(prep) => train_cell(config, &prep, h, spec, seed, &hash),
        Err(e) => failed_row(h, spec, seed, &hash, &e, start.elapsed().as_secs_f64()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub h: f64,
    pub encoding: String,
    pub mean_test: Option<f64>,
    pub std_test: Option<f64>,
    pub mean_val: Option<f64>,
    pub std_val: Option<f64>,
    pub count: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub name: String,
    pub config_hash: String,
    pub rows: usize,
    pub failures: usize,
    pub cells: Vec<CellSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub summary: SweepSummary,
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Some((mean, var.sqrt()))
}

/// Groups rows by `(h, encoding)` in first-appearance order.
pub fn summarize(name: &str, hash: &str, rows: &[SweepRow]) -> SweepSummary {
    let mut keys: Vec<(f64, String)> = Vec::new();
    for r in rows {
        if !keys.iter().any(|(h, e)| *h == r.h && *e == r.encoding) {
            keys.push((r.h, r.encoding.clone()));
        }
    }
    let cells = keys
        .into_iter()
        .map(|(h, encoding)| {
            let group: Vec<&SweepRow> = rows.iter().filter(|r| r.h == h && r.encoding == encoding).collect();
            let test: Vec<f64> = group.iter().filter_map(|r| r.test_accuracy).collect();
            let val: Vec<f64> = group.iter().filter_map(|r| r.val_accuracy).collect();
            let (mt, st) = mean_std(&test).unzip();
            let (mv, sv) = mean_std(&val).unzip();
            CellSummary {
                h,
                encoding,
                mean_test: mt,
                std_test: st,
                mean_val: mv,
                std_val: sv,
                count: group.len(),
                failures: group.iter().filter(|r| r.error.is_some()).count(),
            }
        })
        .collect();
    SweepSummary {
        name: name.to_string(),
        config_hash: hash.to_string(),
        rows: rows.len(),
        failures: rows.iter().filter(|r| r.error.is_some()).count(),
        cells,
    }
}

fn with_pool<T: Send>(threads: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(job))
        }
        None => Ok(job()),
    }
}

/// Every `(h, encoding, seed)` cell. Graphs and spectra are shared across
/// encodings; failures are recorded in the row and the sweep continues.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepOutput> {
    config.validate()?;
    let hash = config.hash();
    let jobs: Vec<(usize, u64)> = (0..config.homophily.len())
        .flat_map(|hi| config.seeds.iter().map(move |&s| (hi, s)))
        .collect();
    let mut rows: Vec<(usize, usize, usize, SweepRow)> = with_pool(config.threads, || {
        jobs.par_iter()
            .flat_map_iter(|&(hi, seed)| {
                let h = config.homophily[hi];
                let si = config.seeds.iter().position(|&s| s == seed).expect("seed in list");
                let start = Instant::now();
                let prepared = prepare(config, h, seed);
                let prep_secs = start.elapsed().as_secs_f64();
                log::info!("h={h} seed={seed}: graph and spectrum in {prep_secs:.2}s");
                config
                    .encodings
                    .iter()
                    .enumerate()
                    .map(|(ei, spec)| {
                        let row = match &prepared {
                            Ok(prep) => train_cell(config, prep, h, spec, seed, &hash),
                            Err(e) => failed_row(h, spec, seed, &hash, e, prep_secs),
                        };
                        (hi, ei, si, row)
                    })
                    .collect::<Vec<_>>()
            })
            .collect()
    })?;
    rows.sort_by_key(|&(hi, ei, si, _)| (hi, ei, si));
    let rows: Vec<SweepRow> = rows.into_iter().map(|t| t.3).collect();
    let summary = summarize(&config.name, &hash, &rows);
    Ok(SweepOutput { rows, summary })
}

/// Writes rows as CSV to `path` and the summary as JSON next to it.
pub fn write_rows<T: Serialize>(rows: &[T], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep(output: &SweepOutput, csv_path: impl AsRef<Path>) -> Result<PathBuf> {
    let csv_path = csv_path.as_ref();
    write_rows(&output.rows, csv_path)?;
    let json_path = csv_path.with_extension("json");
    std::fs::write(&json_path, serde_json::to_string_pretty(&output.summary)?)?;
    Ok(json_path)
}

/// Feature map used by the Rademacher estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RademacherBasis {
    /// `(T̃_1, …, T̃_M)`.
    #[default]
    WithoutConstant,
    /// `(T̃_0, T̃_1, …, T̃_M)`.
    WithConstant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RademacherReport {
    pub estimate: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub mc_stderr: f64,
    pub n: usize,
    pub order: usize,
}

impl RademacherReport {
    /// Inside `[lower − w·stderr, upper + w·stderr]`.
    pub fn within(&self, widen: f64) -> bool {
        self.estimate >= self.lower_bound - widen * self.mc_stderr
            && self.estimate <= self.upper_bound + widen * self.mc_stderr
    }
}

/// Empirical Rademacher complexity of `{λ̃ ↦ θ·φ(λ̃) : ‖θ‖₂ ≤ C}` on the
/// sample of normalized eigenvalues `lambdas`. The supremum over the ball
/// is `C‖Σ σ_i φ(λ̃_i)‖₂`; the expectation over σ is a Monte-Carlo mean over
/// `num_sigma` draws.
pub fn rademacher_estimate(
    lambdas: &[f64],
    c: f64,
    order: usize,
    num_sigma: usize,
    seed: u64,
    basis: RademacherBasis,
) -> Result<RademacherReport> {
    let n = lambdas.len();
    if n == 0 || num_sigma == 0 {
        return Err(Error::Parameter("need a nonempty sample and at least one draw".into()));
    }
    if !(c >= 0.0) {
        return Err(Error::Parameter(format!("C = {c} must be nonnegative")));
    }
    let skip = match basis {
        RademacherBasis::WithoutConstant => 1,
        RademacherBasis::WithConstant => 0,
    };
    let width = order + 1 - skip;
    let mut phi = Array2::zeros((n, width));
    let mut buf = vec![0.0; order + 1];
    for (i, &l) in lambdas.iter().enumerate() {
        basis_into(clamp_unit(l)?, &mut buf);
        for m in skip..=order {
            phi[[i, m - skip]] = buf[m] * monic_scale(m);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut norms = Vec::with_capacity(num_sigma);
    let mut acc = vec![0.0; width];
    for _ in 0..num_sigma {
        acc.iter_mut().for_each(|a| *a = 0.0);
        for row in phi.rows() {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            for (a, &p) in acc.iter_mut().zip(row) {
                *a += sign * p;
            }
        }
        norms.push(acc.iter().map(|a| a * a).sum::<f64>().sqrt());
    }
    let (mean, std) = mean_std(&norms).expect("nonempty");
    let scale = c / n as f64;
    let nf = n as f64;
    Ok(RademacherReport {
        estimate: scale * mean,
        lower_bound: c / (2.0 * nf).sqrt(),
        upper_bound: 2f64.sqrt() * c / nf.sqrt(),
        mc_stderr: scale * std / (num_sigma as f64).sqrt(),
        n,
        order,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    /// Median over repetitions.
    pub wall_time_s: Option<f64>,
    pub peak_bytes: Option<usize>,
    pub matvecs: Option<usize>,
    pub error: Option<String>,
}

/// Times the first `k` plus last `k` eigenpairs of SBM graphs (two blocks,
/// `h = 0.5`). Each row is the median of `reps` runs; rows run one at a
/// time.
pub fn bench_eigs(n_grid: &[usize], k_grid: &[usize], avg_degree: f64, seeds: &[u64], reps: usize) -> Vec<BenchRow> {
    let mut rows = Vec::new();
    for &n in n_grid {
        for &seed in seeds {
            let graph = sbm_from_homophily(n, 2, avg_degree, 0.5).and_then(|p| sbm_generate(&p, seed));
            for &k in k_grid {
                let mut row = BenchRow { n, k, seed, wall_time_s: None, peak_bytes: None, matvecs: None, error: None };
                let g = match &graph {
                    Ok(g) => g,
                    Err(e) => {
                        row.error = Some(error_tag(e));
                        rows.push(row);
                        continue;
                    }
                };
                let l = normalized_laplacian(g);
                let mut times = Vec::new();
                for rep in 0..reps.max(1) {
                    let opts = LanczosOptions { seed: mix(seed, rep as u64), ..Default::default() };
                    let start = Instant::now();
                    match extremal_eigs_with_stats(&l, k, k, &opts) {
                        Ok((_, stats)) => {
                            times.push(start.elapsed().as_secs_f64());
                            row.peak_bytes = Some(row.peak_bytes.unwrap_or(0).max(stats.workspace_bytes));
                            row.matvecs = Some(stats.matvecs);
                        }
                        Err(e) => {
                            row.error = Some(error_tag(&e));
                            break;
                        }
                    }
                }
                if row.error.is_none() {
                    times.sort_by(f64::total_cmp);
                    row.wall_time_s = Some(times[times.len() / 2]);
                    log::info!("n={n} k={k}: {:.2}s", times[times.len() / 2]);
                }
                rows.push(row);
            }
        }
    }
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MSweep {
    pub homophily: f64,
    pub grid: Vec<usize>,
    pub dim: usize,
    pub l1: f64,
    pub l2: f64,
}

impl Default for MSweep {
    fn default() -> Self {
        MSweep { homophily: 1.0, grid: vec![8, 16, 25, 50, 64, 128, 256, 500], dim: 32, l1: 0.001, l2: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KSweep {
    pub homophily: f64,
    pub grid: Vec<usize>,
    pub order: usize,
    pub dim: usize,
    pub l1: f64,
    pub l2: f64,
}

impl Default for KSweep {
    fn default() -> Self {
        KSweep { homophily: 0.0, grid: vec![8, 16, 32, 64, 128, 256], order: 64, dim: 32, l1: 0.001, l2: 0.0 }
    }
}

/// Sensitivity of LLPE to the polynomial order and to the number of
/// retained extremal eigenpairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensitivityConfig {
    pub name: String,
    pub graph: GraphFamily,
    pub features: FeatureGenParams,
    pub classifier: ClassifierConfig,
    pub seeds: Vec<u64>,
    pub split: [f64; 3],
    pub m_sweep: Option<MSweep>,
    pub k_sweep: Option<KSweep>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

impl Default for SensitivityConfig {
    fn default() -> Self {
        SensitivityConfig {
            name: "sensitivity".into(),
            graph: GraphFamily::default(),
            features: FeatureGenParams::default(),
            classifier: ClassifierConfig::default(),
            seeds: default_seeds(),
            split: default_split(),
            m_sweep: Some(MSweep::default()),
            k_sweep: Some(KSweep::default()),
            out: None,
            threads: None,
        }
    }
}

impl SensitivityConfig {
    pub fn from_toml_file(path: impl AsRef<Path>) -> Result<Self> {
        let cfg: SensitivityConfig = toml::from_str(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        check_seeds(&self.seeds)?;
        self.classifier.validate()?;
        if self.m_sweep.as_ref().is_some_and(|m| m.grid.is_empty())
            || self.k_sweep.as_ref().is_some_and(|k| k.grid.is_empty() || k.grid.contains(&0))
        {
            return Err(Error::Config("sensitivity grids must be nonempty".into()));
        }
        Ok(())
    }

    /// The sweep cells as `(sweep, value, h, spec)`, grids sorted and
    /// deduplicated.
    pub fn cells(&self) -> Vec<(&'static str, usize, f64, EncodingSpec)> {
        let mut out = Vec::new();
        if let Some(m) = &self.m_sweep {
            let mut grid = m.grid.clone();
            grid.sort();
            grid.dedup();
            for order in grid {
                out.push(("M", order, m.homophily, EncodingSpec::Llpe { order, dim: m.dim, l1: m.l1, l2: m.l2 }));
            }
        }
        if let Some(k) = &self.k_sweep {
            let mut grid = k.grid.clone();
            grid.sort();
            grid.dedup();
            for kk in grid {
                out.push((
                    "k",
                    kk,
                    k.homophily,
                    EncodingSpec::LlpeLarge { k: kk, order: k.order, dim: k.dim, l1: k.l1, l2: k.l2 },
                ));
            }
        }
        out
    }

    fn as_experiment(&self, h: f64, encodings: Vec<EncodingSpec>) -> ExperimentConfig {
        ExperimentConfig {
            name: self.name.clone(),
            graph: self.graph,
            features: self.features,
            homophily: vec![h],
            encodings,
            classifier: self.classifier,
            seeds: self.seeds.clone(),
            split: self.split,
            out: None,
            threads: self.threads,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub sweep: String,
    pub value: usize,
    pub h: f64,
    pub seed: u64,
    pub test_accuracy: Option<f64>,
    pub val_accuracy: Option<f64>,
    pub wall_time_s: f64,
    pub config_hash: String,
    pub error: Option<String>,
}

/// Runs both sweeps; each is a homophily sweep at a single `h` over the
/// grid's encodings, so graphs and spectra are shared across grid values.
pub fn sensitivity_sweeps(config: &SensitivityConfig) -> Result<Vec<SensitivityRow>> {
    config.validate()?;
    let hash = config_hash(config);
    let cells = config.cells();
    let mut rows = Vec::new();
    for sweep in ["M", "k"] {
        let mine: Vec<_> = cells.iter().filter(|c| c.0 == sweep).collect();
        let Some(first) = mine.first() else { continue };
        let h = first.2;
        let exp = config.as_experiment(h, mine.iter().map(|c| c.3).collect());
        let out = run_sweep(&exp)?;
        for r in out.rows {
            let value = mine
                .iter()
                .find(|c| c.3.to_string() == r.encoding)
                .map(|c| c.1)
                .expect("row comes from a grid cell");
            rows.push(SensitivityRow {
                sweep: sweep.to_string(),
                value,
                h,
                seed: r.seed,
                test_accuracy: r.test_accuracy,
                val_accuracy: r.val_accuracy,
                wall_time_s: r.wall_time_s,
                config_hash: hash.clone(),
                error: r.error,
            });
        }
    }
    Ok(rows)
}

/// Mean test accuracy per `(sweep, value)`.
pub fn sensitivity_means(rows: &[SensitivityRow]) -> Vec<(String, usize, f64)> {
    let mut keys: Vec<(String, usize)> = Vec::new();
    for r in rows {
        if !keys.iter().any(|(s, v)| *s == r.sweep && *v == r.value) {
            keys.push((r.sweep.clone(), r.value));
        }
    }
    keys.into_iter()
        .filter_map(|(s, v)| {
            let acc: Vec<f64> =
                rows.iter().filter(|r| r.sweep == s && r.value == v).filter_map(|r| r.test_accuracy).collect();
            mean_std(&acc).map(|(m, _)| (s, v, m))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ExperimentConfig {
        ExperimentConfig {
            graph: GraphFamily::Sbm { n: 60, k: 2, avg_degree: 6.0 },
            homophily: vec![0.0, 1.0],
            encodings: vec!["nope".parse().unwrap(), "lpe-fk:4".parse().unwrap(), "llpe:M=8,d=4".parse().unwrap()],
            classifier: ClassifierConfig { epochs: 20, patience: 10, ..Default::default() },
            seeds: vec![0, 1, 2],
            ..Default::default()
        }
    }

    #[test]
    fn default_grid_has_300_cells() {
        let c = ExperimentConfig::default();
        assert_eq!(c.homophily.len() * c.encodings.len() * c.seeds.len(), 300);
        c.validate().unwrap();
    }

    #[test]
    fn sweep_rows_and_summary() {
        let cfg = tiny_config();
        let out = run_sweep(&cfg).unwrap();
        assert_eq!(out.rows.len(), 2 * 3 * 3);
        assert!(out.rows.iter().all(|r| r.error.is_none()));
        for cell in &out.summary.cells {
            let acc: Vec<f64> = out
                .rows
                .iter()
                .filter(|r| r.h == cell.h && r.encoding == cell.encoding)
                .map(|r| r.test_accuracy.unwrap())
                .collect();
            let (m, s) = mean_std(&acc).unwrap();
            assert!((m - cell.mean_test.unwrap()).abs() <= 1e-12);
            assert!((s - cell.std_test.unwrap()).abs() <= 1e-12);
        }
        let row = &out.rows[7];
        let again = run_cell(&cfg, row.h, &row.encoding.parse().unwrap(), row.seed);
        assert_eq!(again.test_accuracy, row.test_accuracy);
        assert_eq!(again.config_hash, row.config_hash);
    }

    #[test]
    fn failures_are_recorded_not_fatal() {
        let mut cfg = tiny_config();
        cfg.encodings = vec!["nope".parse().unwrap(), "lpe-fk:70".parse().unwrap()];
        let out = run_sweep(&cfg).unwrap();
        assert_eq!(out.rows.len(), 12);
        assert_eq!(out.summary.failures, 6);
        for r in &out.rows {
            assert_eq!(r.error.is_some(), r.encoding == "lpe-fk:70", "{r:?}");
        }
    }

    #[test]
    fn config_validation_and_toml() {
        let mut c = tiny_config();
        c.seeds = vec![1, 1];
        assert!(c.validate().is_err());
        c.seeds = vec![];
        assert!(c.validate().is_err());
        let text = r#"
name = "demo"
homophily = [0.0, 0.5]
encodings = ["nope", "lpe-fk:8"]
seeds = [3, 4]
[graph]
family = "sbm"
n = 100
k = 2
avg_degree = 8.0
[classifier]
lr = 0.05
"#;
        let cfg: ExperimentConfig = toml::from_str(text).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.graph, GraphFamily::Sbm { n: 100, k: 2, avg_degree: 8.0 });
        assert_eq!(cfg.encodings[1], EncodingSpec::LpeFk { k: 8 });
        assert_eq!(cfg.classifier.epochs, 500);
        assert_ne!(cfg.hash(), tiny_config().hash());
        assert_eq!(cfg.hash(), cfg.clone().hash());
    }

    #[test]
    fn pa_family_generates_labelled_graphs() {
        let fam = GraphFamily::Pa { n: 300, k: 3, m_edges: 3 };
        let g = fam.generate(0.8, &FeatureGenParams::default(), 1).unwrap();
        assert_eq!(g.n(), 300);
        assert_eq!(g.features.as_ref().unwrap().ncols(), 3);
        assert!(crate::graph::edge_homophily(&g).unwrap() > 0.6);
    }

    #[test]
    fn rademacher_examples() {
        let r = rademacher_estimate(&[1.0], 1.0, 1, 50, 0, RademacherBasis::WithoutConstant).unwrap();
        assert_eq!(r.estimate, 1.0);
        assert!(r.within(0.0));
        assert!((r.lower_bound - 1.0 / 2f64.sqrt()).abs() < 1e-15 && (r.upper_bound - 2f64.sqrt()).abs() < 1e-15);
        let z = rademacher_estimate(&[0.3, -0.2], 0.0, 4, 10, 0, RademacherBasis::WithoutConstant).unwrap();
        assert_eq!((z.estimate, z.lower_bound, z.upper_bound), (0.0, 0.0, 0.0));
        assert!(rademacher_estimate(&[1.5], 1.0, 2, 10, 0, RademacherBasis::WithConstant).is_err());
    }

    #[test]
    fn rademacher_matches_exhaustive_expectation() {
        // n = 6: all 64 sign patterns
        let lambdas = [-0.9, -0.3, 0.0, 0.2, 0.7, 1.0];
        let order = 5;
        for basis in [RademacherBasis::WithoutConstant, RademacherBasis::WithConstant] {
            let skip = usize::from(basis == RademacherBasis::WithoutConstant);
            let phi: Vec<Vec<f64>> = lambdas
                .iter()
                .map(|&l| (skip..=order).map(|m| crate::chebyshev::monic_cheb_eval(m, l).unwrap()).collect())
                .collect();
            let mut total = 0.0;
            for mask in 0..64u32 {
                let mut v = vec![0.0; phi[0].len()];
                for (i, p) in phi.iter().enumerate() {
                    let s = if mask >> i & 1 == 1 { 1.0 } else { -1.0 };
                    v.iter_mut().zip(p).for_each(|(a, b)| *a += s * b);
                }
                total += v.iter().map(|a| a * a).sum::<f64>().sqrt();
            }
            let exact = 2.0 * total / 64.0 / 6.0;
            let r = rademacher_estimate(&lambdas, 2.0, order, 20000, 1, basis).unwrap();
            assert!((r.estimate - exact).abs() < 4.0 * r.mc_stderr, "{basis:?}: {} vs {exact}", r.estimate);
        }
    }

    #[test]
    fn bench_rows() {
        let rows = bench_eigs(&[400], &[1, 4], 10.0, &[0], 3);
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.wall_time_s.is_some() && r.peak_bytes.unwrap() > 0));
    }

    #[test]
    fn sensitivity_grids_are_deduplicated() {
        let cfg = SensitivityConfig {
            graph: GraphFamily::Sbm { n: 60, k: 2, avg_degree: 6.0 },
            classifier: ClassifierConfig { epochs: 10, patience: 5, ..Default::default() },
            seeds: vec![0, 1],
            m_sweep: Some(MSweep { grid: vec![8, 4, 8], dim: 4, ..Default::default() }),
            k_sweep: Some(KSweep { grid: vec![4, 4, 2], order: 8, dim: 4, ..Default::default() }),
            ..Default::default()
        };
        let cells = cfg.cells();
        assert_eq!(cells.iter().map(|c| (c.0, c.1)).collect::<Vec<_>>(), vec![("M", 4), ("M", 8), ("k", 2), ("k", 4)]);
        let rows = sensitivity_sweeps(&cfg).unwrap();
        assert_eq!(rows.len(), 8);
        assert!(rows.iter().all(|r| r.error.is_none()), "{rows:?}");
        assert_eq!(sensitivity_means(&rows).len(), 4);
    }

    #[test]
    fn csv_and_json_written() {
        let out = run_sweep(&ExperimentConfig { seeds: vec![0], homophily: vec![0.5], ..tiny_config() }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let json = write_sweep(&out, dir.path().join("r/sweep.csv")).unwrap();
        let text = std::fs::read_to_string(dir.path().join("r/sweep.csv")).unwrap();
        assert!(text.starts_with("h,encoding,seed,test_accuracy"));
        assert_eq!(text.lines().count(), 4);
        let summary: SweepSummary = serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
        assert_eq!(summary, out.summary);
    }
}
