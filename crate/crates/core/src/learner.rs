//! Full-batch node classifiers over node features concatenated with a
//! positional encoding. LLPE coefficients are trained jointly with the
//! classifier weights.

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encodings::{build_encoding, encoding_spectrum, EncodingSpec, LlpeBasis, LlpeParams};
use crate::error::{Error, Result};
use crate::graph::{quintile_bucketing, Graph};
use crate::spectral::SpectralDecomposition;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Arch {
    /// Softmax regression on `[X, P]`.
    Linear,
    /// Projections of `X` and `P` concatenated to `hidden` units, ReLU, linear head.
    Mlp { hidden: usize },
    /// As `Mlp`, plus a separately projected mean over neighbors before the ReLU.
    Sage1 { hidden: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    SgdMomentum {
        #[serde(default = "default_momentum")]
        momentum: f64,
    },
    Adam {
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_eps")]
        eps: f64,
    },
}

fn default_momentum() -> f64 {
    0.9
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    pub fn sgd_momentum() -> Self {
        Optimizer::SgdMomentum { momentum: 0.9 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub arch: Arch,
    pub lr: f64,
    pub epochs: usize,
    pub patience: usize,
    pub weight_decay: f64,
    pub optimizer: Optimizer,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            arch: Arch::Mlp { hidden: 64 },
            lr: 0.01,
            epochs: 500,
            patience: 200,
            weight_decay: 0.0,
            optimizer: Optimizer::adam(),
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        let hidden_ok = match self.arch {
            Arch::Linear => true,
            Arch::Mlp { hidden } | Arch::Sage1 { hidden } => hidden >= 2,
        };
        if !(self.lr > 0.0) || self.epochs == 0 || self.patience == 0 || !(self.weight_decay >= 0.0) || !hidden_ok {
            return Err(Error::Config(format!("invalid classifier config {self:?}")));
        }
        Ok(())
    }
}

/// Train/validation/test node masks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<bool>,
    pub val: Vec<bool>,
    pub test: Vec<bool>,
}

impl Split {
    pub fn sizes(&self) -> (usize, usize, usize) {
        let count = |m: &[bool]| m.iter().filter(|&&b| b).count();
        (count(&self.train), count(&self.val), count(&self.test))
    }
}

/// Random split with sizes `⌊f·n⌋`, the remainder handed out by largest
/// fractional part.
pub fn split_nodes(n: usize, fractions: (f64, f64, f64), seed: u64) -> Result<Split> {
    let f = [fractions.0, fractions.1, fractions.2];
    if f.iter().any(|&x| !(x >= 0.0)) || (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Parameter(format!("split fractions {fractions:?} must be non-negative and sum to 1")));
    }
    let exact: Vec<f64> = f.iter().map(|&x| x * n as f64).collect();
    let mut sizes: Vec<usize> = exact.iter().map(|&x| (x + 1e-9).floor() as usize).collect();
    let mut rest = n - sizes.iter().sum::<usize>();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| (exact[b] - sizes[b] as f64).total_cmp(&(exact[a] - sizes[a] as f64)).then(a.cmp(&b)));
    for &i in order.iter().cycle() {
        if rest == 0 {
            break;
        }
        sizes[i] += 1;
        rest -= 1;
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut split = Split { train: vec![false; n], val: vec![false; n], test: vec![false; n] };
    for (rank, &i) in perm.iter().enumerate() {
        if rank < sizes[0] {
            split.train[i] = true;
        } else if rank < sizes[0] + sizes[1] {
            split.val[i] = true;
        } else {
            split.test[i] = true;
        }
    }
    Ok(split)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainResult {
    pub test_accuracy: f64,
    pub val_accuracy: f64,
    pub train_accuracy: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub theta: Option<LlpeParams>,
    /// Test accuracy within each local-homophily quintile; `None` if the
    /// quintile has no test node.
    pub quintile_accuracy: Vec<Option<f64>>,
    pub predictions: Vec<usize>,
}

/// Accuracy per local-homophily quintile over all nodes.
pub fn evaluate_by_quintile(graph: &Graph, predictions: &[usize]) -> Result<Vec<Option<f64>>> {
    evaluate_by_quintile_masked(graph, predictions, None)
}

/// As [`evaluate_by_quintile`], restricted to nodes where `mask` is set.
pub fn evaluate_by_quintile_masked(
    graph: &Graph,
    predictions: &[usize],
    mask: Option<&[bool]>,
) -> Result<Vec<Option<f64>>> {
    let labels = graph.labels_or_err()?;
    if predictions.len() != labels.len() {
        return Err(Error::Parameter(format!("{} predictions for {} nodes", predictions.len(), labels.len())));
    }
    let buckets = quintile_bucketing(graph)?;
    let mut hit = [0usize; 5];
    let mut total = [0usize; 5];
    for i in 0..labels.len() {
        if mask.is_some_and(|m| !m[i]) {
            continue;
        }
        total[buckets[i]] += 1;
        hit[buckets[i]] += usize::from(predictions[i] == labels[i]);
    }
    Ok((0..5)
        .map(|b| (total[b] > 0).then(|| hit[b] as f64 / total[b] as f64))
        .collect())
}

/// All trainable tensors. Biases are `1 × width` rows.
#[derive(Debug, Clone)]
struct Weights {
    wx: Array2<f64>,
    wp: Array2<f64>,
    wx2: Option<Array2<f64>>,
    wp2: Option<Array2<f64>>,
    b1: Option<Array2<f64>>,
    wo: Option<Array2<f64>>,
    bo: Array2<f64>,
    theta: Option<Array2<f64>>,
}

impl Weights {
    fn zeros_like(&self) -> Weights {
        let z = |a: &Array2<f64>| Array2::zeros(a.raw_dim());
        Weights {
            wx: z(&self.wx),
            wp: z(&self.wp),
            wx2: self.wx2.as_ref().map(z),
            wp2: self.wp2.as_ref().map(z),
            b1: self.b1.as_ref().map(z),
            wo: self.wo.as_ref().map(z),
            bo: z(&self.bo),
            theta: self.theta.as_ref().map(z),
        }
    }

    /// Tensors in a fixed order, flagged with whether weight decay applies.
    fn tensors(&self) -> Vec<(&Array2<f64>, bool)> {
        let mut v = vec![(&self.wx, true), (&self.wp, true)];
        v.extend(self.wx2.iter().map(|a| (a, true)));
        v.extend(self.wp2.iter().map(|a| (a, true)));
        v.extend(self.b1.iter().map(|a| (a, false)));
        v.extend(self.wo.iter().map(|a| (a, true)));
        v.push((&self.bo, false));
        v.extend(self.theta.iter().map(|a| (a, false)));
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut Array2<f64>> {
        let mut v = vec![&mut self.wx, &mut self.wp];
        v.extend(self.wx2.iter_mut());
        v.extend(self.wp2.iter_mut());
        v.extend(self.b1.iter_mut());
        v.extend(self.wo.iter_mut());
        v.push(&mut self.bo);
        v.extend(self.theta.iter_mut());
        v
    }
}

fn glorot(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let limit = if rows + cols == 0 { 0.0 } else { (6.0 / (rows + cols) as f64).sqrt() };
    Array2::from_shape_fn((rows, cols), |_| if limit == 0.0 { 0.0 } else { rng.random_range(-limit..limit) })
}

/// Fixed inputs and the positional-encoding source for one training problem.
struct Problem<'a> {
    graph: &'a Graph,
    x: Array2<f64>,
    /// Neighbor means of `x` (sage only).
    mx: Option<Array2<f64>>,
    labels: &'a [usize],
    classes: usize,
    arch: Arch,
    weight_decay: f64,
    pe: PeSource,
}

enum PeSource {
    Fixed(Array2<f64>),
    Learned { basis: LlpeBasis, l1: f64, l2: f64 },
}

struct Forward {
    p: Array2<f64>,
    mp: Option<Array2<f64>>,
    z: Option<Array2<f64>>,
    h: Option<Array2<f64>>,
    logits: Array2<f64>,
}

fn mean_aggregate(graph: &Graph, x: ArrayView2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros(x.raw_dim());
    for i in 0..graph.n() {
        let nb = graph.neighbors(i);
        if nb.is_empty() {
            continue;
        }
        let mut row = out.row_mut(i);
        for &j in nb {
            row += &x.row(j);
        }
        row /= nb.len() as f64;
    }
    out
}

/// Transpose of [`mean_aggregate`].
fn mean_aggregate_t(graph: &Graph, g: ArrayView2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros(g.raw_dim());
    for i in 0..graph.n() {
        let nb = graph.neighbors(i);
        if nb.is_empty() {
            continue;
        }
        let scaled = &g.row(i) / nb.len() as f64;
        for &j in nb {
            let mut row = out.row_mut(j);
            row += &scaled;
        }
    }
    out
}

fn widths(arch: Arch, pe_dim: usize, classes: usize) -> (usize, usize) {
    match arch {
        Arch::Linear => (classes, classes),
        Arch::Mlp { hidden } | Arch::Sage1 { hidden } => {
            if pe_dim == 0 {
                (hidden, 0)
            } else {
                (hidden - hidden / 2, hidden / 2)
            }
        }
    }
}

impl Problem<'_> {
    fn init(&self, theta: Option<LlpeParams>, rng: &mut ChaCha8Rng) -> Weights {
        let f = self.x.ncols();
        let dpe = match (&self.pe, &theta) {
            (PeSource::Fixed(p), _) => p.ncols(),
            (PeSource::Learned { .. }, Some(t)) => t.dim(),
            (PeSource::Learned { .. }, None) => 0,
        };
        let (hx, hp) = widths(self.arch, dpe, self.classes);
        let c = self.classes;
        let wx = glorot(f, hx, rng);
        let wp = glorot(dpe, hp, rng);
        let (wx2, wp2) = match self.arch {
            Arch::Sage1 { .. } => (Some(glorot(f, hx, rng)), Some(glorot(dpe, hp, rng))),
            _ => (None, None),
        };
        let (b1, wo) = match self.arch {
            Arch::Linear => (None, None),
            Arch::Mlp { hidden } | Arch::Sage1 { hidden } => {
                (Some(Array2::zeros((1, hidden))), Some(glorot(hidden, c, rng)))
            }
        };
        Weights { wx, wp, wx2, wp2, b1, wo, bo: Array2::zeros((1, c)), theta: theta.map(|t| t.theta) }
    }

    fn forward(&self, w: &Weights) -> Forward {
        let p = match &self.pe {
            PeSource::Fixed(p) => p.clone(),
            PeSource::Learned { basis, .. } => basis.ub.dot(w.theta.as_ref().expect("learned encoding has Θ")),
        };
        match self.arch {
            Arch::Linear => {
                let logits = self.x.dot(&w.wx) + p.dot(&w.wp) + &w.bo;
                Forward { p, mp: None, z: None, h: None, logits }
            }
            Arch::Mlp { .. } | Arch::Sage1 { .. } => {
                let mut z = concatenate(Axis(1), &[self.x.dot(&w.wx).view(), p.dot(&w.wp).view()]).expect("rows match");
                let mut mp = None;
                if let (Some(wx2), Some(wp2), Some(mx)) = (&w.wx2, &w.wp2, &self.mx) {
                    let agg_p = mean_aggregate(self.graph, p.view());
                    z += &concatenate(Axis(1), &[mx.dot(wx2).view(), agg_p.dot(wp2).view()]).expect("rows match");
                    mp = Some(agg_p);
                }
                z += w.b1.as_ref().expect("hidden bias");
                let h = z.mapv(|v| v.max(0.0));
                let logits = h.dot(w.wo.as_ref().expect("head")) + &w.bo;
                Forward { p, mp, z: Some(z), h: Some(h), logits }
            }
        }
    }

    /// Mean cross-entropy over `mask`, plus penalties, and `∂/∂logits`.
    fn loss(&self, w: &Weights, fw: &Forward, mask: &[bool]) -> (f64, Array2<f64>) {
        let count = mask.iter().filter(|&&b| b).count().max(1) as f64;
        let mut dlogits = Array2::zeros(fw.logits.raw_dim());
        let mut ce = 0.0;
        for (i, row) in fw.logits.rows().into_iter().enumerate() {
            if !mask[i] {
                continue;
            }
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = row.iter().map(|&v| (v - max).exp()).collect();
            let total: f64 = exps.iter().sum();
            ce -= (exps[self.labels[i]] / total).ln();
            for (c, e) in exps.iter().enumerate() {
                dlogits[[i, c]] = e / total / count;
            }
            dlogits[[i, self.labels[i]]] -= 1.0 / count;
        }
        let mut loss = ce / count;
        if self.weight_decay > 0.0 {
            let sq: f64 = w.tensors().iter().filter(|(_, d)| *d).map(|(a, _)| a.iter().map(|v| v * v).sum::<f64>()).sum();
            loss += 0.5 * self.weight_decay * sq;
        }
        if let (PeSource::Learned { basis, l1, l2 }, Some(theta)) = (&self.pe, &w.theta) {
            let (pen, _) = basis.penalty(&LlpeParams { theta: theta.clone() }, *l1, *l2);
            loss += pen;
        }
        (loss, dlogits)
    }

    fn backward(&self, w: &Weights, fw: &Forward, dlogits: &Array2<f64>) -> Weights {
        let mut g = w.zeros_like();
        g.bo = dlogits.sum_axis(Axis(0)).insert_axis(Axis(0));
        let dp = match self.arch {
            Arch::Linear => {
                g.wx = self.x.t().dot(dlogits);
                g.wp = fw.p.t().dot(dlogits);
                dlogits.dot(&w.wp.t())
            }
            Arch::Mlp { .. } | Arch::Sage1 { .. } => {
                let h = fw.h.as_ref().expect("hidden");
                let z = fw.z.as_ref().expect("pre-activation");
                let wo = w.wo.as_ref().expect("head");
                g.wo = Some(h.t().dot(dlogits));
                let mut dz = dlogits.dot(&wo.t());
                dz.zip_mut_with(z, |d, &zv| {
                    if zv <= 0.0 {
                        *d = 0.0
                    }
                });
                g.b1 = Some(dz.sum_axis(Axis(0)).insert_axis(Axis(0)));
                let hx = w.wx.ncols();
                let dzx = dz.slice(s![.., ..hx]);
                let dzp = dz.slice(s![.., hx..]);
                g.wx = self.x.t().dot(&dzx);
                g.wp = fw.p.t().dot(&dzp);
                let mut dp = dzp.dot(&w.wp.t());
                if let (Some(wp2), Some(mx), Some(mp)) = (&w.wp2, &self.mx, &fw.mp) {
                    g.wx2 = Some(mx.t().dot(&dzx));
                    g.wp2 = Some(mp.t().dot(&dzp));
                    dp += &mean_aggregate_t(self.graph, dzp.dot(&wp2.t()).view());
                }
                dp
            }
        };
        if self.weight_decay > 0.0 {
            let wd = self.weight_decay;
            let src = w.tensors();
            for (gt, (wt, decay)) in g.tensors_mut().into_iter().zip(src) {
                if decay {
                    gt.scaled_add(wd, wt);
                }
            }
        }
        if let (PeSource::Learned { basis, l1, l2 }, Some(theta)) = (&self.pe, &w.theta) {
            let (_, dpen) = basis.penalty(&LlpeParams { theta: theta.clone() }, *l1, *l2);
            g.theta = Some(basis.grad(&dp) + dpen);
        }
        g
    }
}

fn argmax_rows(logits: &Array2<f64>) -> Vec<usize> {
    logits
        .rows()
        .into_iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc })
                .0
        })
        .collect()
}

fn accuracy(pred: &[usize], labels: &[usize], mask: &[bool]) -> f64 {
    let (mut hit, mut total) = (0usize, 0usize);
    for i in 0..pred.len() {
        if mask[i] {
            total += 1;
            hit += usize::from(pred[i] == labels[i]);
        }
    }
    if total == 0 {
        0.0
    } else {
        hit as f64 / total as f64
    }
}

enum OptState {
    Sgd { velocity: Vec<Array2<f64>> },
    Adam { m: Vec<Array2<f64>>, v: Vec<Array2<f64>>, t: i32 },
}

fn step(opt: &Optimizer, state: &mut OptState, lr: f64, w: &mut Weights, g: &Weights) {
    let grads: Vec<&Array2<f64>> = g.tensors().into_iter().map(|(a, _)| a).collect();
    match (opt, state) {
        (Optimizer::SgdMomentum { momentum }, OptState::Sgd { velocity }) => {
            for ((p, gr), vel) in w.tensors_mut().into_iter().zip(grads).zip(velocity.iter_mut()) {
                vel.zip_mut_with(gr, |v, &gv| *v = momentum * *v + gv);
                p.scaled_add(-lr, vel);
            }
        }
        (Optimizer::Adam { beta1, beta2, eps }, OptState::Adam { m, v, t }) => {
            *t += 1;
            let c1 = 1.0 - beta1.powi(*t);
            let c2 = 1.0 - beta2.powi(*t);
            for (((p, gr), mi), vi) in w.tensors_mut().into_iter().zip(grads).zip(m.iter_mut()).zip(v.iter_mut()) {
                mi.zip_mut_with(gr, |a, &gv| *a = beta1 * *a + (1.0 - beta1) * gv);
                vi.zip_mut_with(gr, |a, &gv| *a = beta2 * *a + (1.0 - beta2) * gv * gv);
                ndarray::Zip::from(p).and(&*mi).and(&*vi).for_each(|pv, &mv, &vv| {
                    *pv -= lr * (mv / c1) / ((vv / c2).sqrt() + eps);
                });
            }
        }
        _ => unreachable!("optimizer state matches its config"),
    }
}

fn build_problem<'a>(
    graph: &'a Graph,
    spec: &EncodingSpec,
    spectrum: Option<&SpectralDecomposition>,
    config: &ClassifierConfig,
    seed: u64,
) -> Result<(Problem<'a>, Option<LlpeParams>)> {
    config.validate()?;
    spec.validate()?;
    let labels = graph.labels_or_err()?;
    let x = graph.features_or_err()?.clone();
    let classes = graph.num_classes().unwrap_or(0).max(2);
    let (pe, theta) = match spec.llpe_shape() {
        Some((order, dim, l1, l2)) => {
            let s = spectrum.ok_or_else(|| Error::Config(format!("{spec} needs a spectrum")))?;
            let s = encoding_spectrum(spec, s)?;
            if s.n() != graph.n() {
                return Err(Error::Config(format!("spectrum has dimension {}, graph has {} nodes", s.n(), graph.n())));
            }
            let basis = LlpeBasis::new(&s, order);
            (PeSource::Learned { basis, l1, l2 }, Some(LlpeParams::init(order, dim, seed ^ 0x5eed)))
        }
        None => (PeSource::Fixed(build_encoding(spec, graph, spectrum, None)?.matrix), None),
    };
    let mx = matches!(config.arch, Arch::Sage1 { .. }).then(|| mean_aggregate(graph, x.view()));
    Ok((
        Problem { graph, x, mx, labels, classes, arch: config.arch, weight_decay: config.weight_decay, pe },
        theta,
    ))
}

/// Trains a classifier on the split's training nodes and reports accuracy of
/// the epoch with the best validation accuracy (earliest on ties).
pub fn train_node_classifier(
    graph: &Graph,
    spec: &EncodingSpec,
    spectrum: Option<&SpectralDecomposition>,
    split: &Split,
    config: &ClassifierConfig,
    seed: u64,
) -> Result<TrainResult> {
    if split.train.len() != graph.n() {
        return Err(Error::Config(format!("split covers {} nodes, graph has {}", split.train.len(), graph.n())));
    }
    let (problem, theta) = build_problem(graph, spec, spectrum, config, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = problem.init(theta, &mut rng);
    let zeros = || w.tensors().iter().map(|(a, _)| Array2::zeros(a.raw_dim())).collect::<Vec<_>>();
    let mut state = match config.optimizer {
        Optimizer::SgdMomentum { .. } => OptState::Sgd { velocity: zeros() },
        Optimizer::Adam { .. } => OptState::Adam { m: zeros(), v: zeros(), t: 0 },
    };
    let mut best: Option<(f64, usize, Weights, Vec<usize>)> = None;
    let mut last_finite = None;
    let mut epochs_run = 0;
    for epoch in 0..config.epochs {
        epochs_run = epoch + 1;
        let fw = problem.forward(&w);
        let (loss, dlogits) = problem.loss(&w, &fw, &split.train);
        if !loss.is_finite() {
            return Err(Error::Training { epoch, last_finite });
        }
        last_finite = Some(epoch);
        let pred = argmax_rows(&fw.logits);
        let val = accuracy(&pred, problem.labels, &split.val);
        if best.as_ref().is_none_or(|(b, ..)| val > *b) {
            best = Some((val, epoch, w.clone(), pred));
        }
        let best_epoch = best.as_ref().map_or(0, |b| b.1);
        if epoch - best_epoch >= config.patience {
            break;
        }
        let g = problem.backward(&w, &fw, &dlogits);
        step(&config.optimizer, &mut state, config.lr, &mut w, &g);
    }
    let (val_accuracy, best_epoch, weights, predictions) = best.expect("at least one epoch");
    log::debug!("{spec}: best epoch {best_epoch} of {epochs_run}, val {val_accuracy:.3}");
    Ok(TrainResult {
        test_accuracy: accuracy(&predictions, problem.labels, &split.test),
        val_accuracy,
        train_accuracy: accuracy(&predictions, problem.labels, &split.train),
        best_epoch,
        epochs_run,
        theta: weights.theta.map(|theta| LlpeParams { theta }),
        quintile_accuracy: evaluate_by_quintile_masked(graph, &predictions, Some(&split.test))?,
        predictions,
    })
}

/// Largest relative gap between the analytic gradient of the training loss
/// (classifier weights and Θ together) and central differences with `step`,
/// at the initial weights for `seed`. Gaps are divided by
/// `max(|analytic|, |numeric|, 1e-6)`.
pub fn classifier_gradient_check(
    graph: &Graph,
    spec: &EncodingSpec,
    spectrum: Option<&SpectralDecomposition>,
    split: &Split,
    config: &ClassifierConfig,
    seed: u64,
    step: f64,
) -> Result<f64> {
    let (problem, theta) = build_problem(graph, spec, spectrum, config, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = problem.init(theta, &mut rng);
    let fw = problem.forward(&w);
    let (_, dlogits) = problem.loss(&w, &fw, &split.train);
    let g = problem.backward(&w, &fw, &dlogits);
    let analytic: Vec<Array2<f64>> = g.tensors().into_iter().map(|(a, _)| a.clone()).collect();
    let eval = |w: &Weights| problem.loss(w, &problem.forward(w), &split.train).0;
    let mut worst: f64 = 0.0;
    let count = analytic.len();
    for t in 0..count {
        for idx in 0..analytic[t].len() {
            let mut plus = w.clone();
            let mut minus = w.clone();
            {
                let mut tp = plus.tensors_mut();
                let cols = tp[t].ncols();
                tp[t][[idx / cols, idx % cols]] += step;
            }
            {
                let mut tm = minus.tensors_mut();
                let cols = tm[t].ncols();
                tm[t][[idx / cols, idx % cols]] -= step;
            }
            let fd = (eval(&plus) - eval(&minus)) / (2.0 * step);
            let cols = analytic[t].ncols();
            let a = analytic[t][[idx / cols, idx % cols]];
            worst = worst.max((fd - a).abs() / a.abs().max(fd.abs()).max(1e-6));
        }
    }
    Ok(worst)
}
