use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::LabeledDataset;
use crate::error::{MedixError, Result};
use crate::filter::WildSet;
use crate::rng::Philox;
use crate::stats::GradientMatrix;

const SHUFFLE_STREAM: u64 = 0x5348_5546;

/// Training objective of the linear classifier head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    /// Softmax cross-entropy (multinomial logistic regression).
    #[default]
    CrossEntropy,
    /// Half squared error against one-hot targets on the raw logits.
    SquaredError,
}

impl fmt::Display for Loss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Loss::CrossEntropy => "cross_entropy",
            Loss::SquaredError => "squared_error",
        })
    }
}

impl FromStr for Loss {
    type Err = MedixError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cross_entropy" | "ce" => Ok(Loss::CrossEntropy),
            "squared_error" | "se" => Ok(Loss::SquaredError),
            other => Err(MedixError::invalid("loss", format!("unknown loss `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
    pub loss: Loss,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { lr: 0.1, epochs: 200, batch: 64, seed: 0, loss: Loss::CrossEntropy }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingMeta {
    pub epochs: usize,
    pub lr: f64,
    pub final_loss: f64,
    /// Full-data training loss after each epoch.
    pub loss_history: Vec<f64>,
}

/// Linear classifier: logits z = W x + b, W is K×p (class-major).
#[derive(Debug, Clone, PartialEq)]
pub struct IndModel {
    classes: usize,
    features: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
    loss: Loss,
    pub meta: TrainingMeta,
}

/// Which parameters the flattened gradient covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GradientLayout {
    pub include_bias: bool,
}

impl GradientLayout {
    pub fn dim(&self, model: &IndModel) -> usize {
        model.classes * model.features + if self.include_bias { model.classes } else { 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: usize,
    pub confidence: f64,
}

/// Mean per-sample gradient of the InD training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceGradient(pub Vec<f64>);

impl ReferenceGradient {
    pub fn values(&self) -> &[f64] {
        &self.0
    }
    pub fn len(&self) -> usize {
        self.0.len()
    }
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl IndModel {
    pub fn zeros(classes: usize, features: usize, loss: Loss) -> Self {
        IndModel {
            classes,
            features,
            weights: vec![0.0; classes * features],
            biases: vec![0.0; classes],
            loss,
            meta: TrainingMeta { epochs: 0, lr: 0.0, final_loss: f64::NAN, loss_history: Vec::new() },
        }
    }

    /// Builds a model from explicit parameters (weights class-major).
    pub fn from_parameters(
        classes: usize,
        features: usize,
        weights: Vec<f64>,
        biases: Vec<f64>,
        loss: Loss,
    ) -> Result<Self> {
        if classes < 2 || features == 0 {
            return Err(MedixError::invalid("shape", "need ≥ 2 classes and ≥ 1 feature"));
        }
        if weights.len() != classes * features {
            return Err(MedixError::DimensionMismatch { expected: classes * features, actual: weights.len() });
        }
        if biases.len() != classes {
            return Err(MedixError::DimensionMismatch { expected: classes, actual: biases.len() });
        }
        if weights.iter().chain(&biases).any(|v| !v.is_finite()) {
            return Err(MedixError::invalid("parameters", "non-finite value"));
        }
        let mut m = IndModel::zeros(classes, features, loss);
        m.weights = weights;
        m.biases = biases;
        Ok(m)
    }

    pub fn classes(&self) -> usize {
        self.classes
    }
    pub fn features(&self) -> usize {
        self.features
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn biases(&self) -> &[f64] {
        &self.biases
    }
    pub fn loss(&self) -> Loss {
        self.loss
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.features)
            .zip(&self.biases)
            .map(|(w, b)| w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + b)
            .collect()
    }

    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        softmax(&self.logits(x))
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.features {
            return Err(MedixError::DimensionMismatch { expected: self.features, actual: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(MedixError::NonFiniteFeature);
        }
        Ok(())
    }

    /// dℓ/dz for one sample.
    fn residual(&self, x: &[f64], y: usize) -> Vec<f64> {
        let z = self.logits(x);
        let mut r = match self.loss {
            Loss::CrossEntropy => softmax(&z),
            Loss::SquaredError => z,
        };
        r[y] -= 1.0;
        r
    }

    /// Loss of one sample.
    pub fn sample_loss(&self, x: &[f64], y: usize) -> f64 {
        let z = self.logits(x);
        match self.loss {
            Loss::CrossEntropy => log_sum_exp(&z) - z[y],
            Loss::SquaredError => {
                0.5 * z.iter().enumerate().map(|(c, v)| (v - f64::from(u8::from(c == y))).powi(2)).sum::<f64>()
            }
        }
    }

    pub fn mean_loss(&self, data: &LabeledDataset) -> f64 {
        let total: f64 =
            data.features().iter().zip(data.labels()).map(|(x, &y)| self.sample_loss(x, y)).sum();
        total / data.len() as f64
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        argmax(&self.logits(x))
    }
}

pub(crate) fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// First index of the maximum (lowest id wins ties).
pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Mini-batch gradient descent from zero initialisation with seeded
/// per-epoch shuffling. Single-threaded and deterministic.
pub fn train_ind_classifier(data: &LabeledDataset, cfg: &TrainConfig) -> Result<IndModel> {
    if data.present_classes() < 2 {
        return Err(MedixError::DegenerateDataset("training data holds a single class".into()));
    }
    if !(cfg.lr > 0.0) || !cfg.lr.is_finite() {
        return Err(MedixError::invalid("lr", "must be positive"));
    }
    if cfg.epochs == 0 {
        return Err(MedixError::invalid("epochs", "must be ≥ 1"));
    }
    if cfg.batch == 0 {
        return Err(MedixError::invalid("batch", "must be ≥ 1"));
    }
    let (k, p) = (data.classes(), data.dim());
    let mut model = IndModel::zeros(k, p, cfg.loss);
    let mut rng = Philox::new(cfg.seed, SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut gw = vec![0.0; k * p];
    let mut gb = vec![0.0; k];
    let mut history = Vec::with_capacity(cfg.epochs);

    for _ in 0..cfg.epochs {
        rng.shuffle(&mut order);
        for batch in order.chunks(cfg.batch) {
            gw.iter_mut().for_each(|v| *v = 0.0);
            gb.iter_mut().for_each(|v| *v = 0.0);
            for &i in batch {
                let x = &data.features()[i];
                let r = model.residual(x, data.labels()[i]);
                for (c, rc) in r.iter().enumerate() {
                    gb[c] += rc;
                    for (g, xf) in gw[c * p..(c + 1) * p].iter_mut().zip(x) {
                        *g += rc * xf;
                    }
                }
            }
            let scale = cfg.lr / batch.len() as f64;
            for (w, g) in model.weights.iter_mut().zip(&gw) {
                *w -= scale * g;
            }
            for (b, g) in model.biases.iter_mut().zip(&gb) {
                *b -= scale * g;
            }
        }
        history.push(model.mean_loss(data));
    }
    if model.weights.iter().chain(&model.biases).any(|v| !v.is_finite()) {
        return Err(MedixError::invalid("lr", "training diverged to non-finite parameters"));
    }
    model.meta = TrainingMeta {
        epochs: cfg.epochs,
        lr: cfg.lr,
        final_loss: *history.last().expect("epochs ≥ 1"),
        loss_history: history,
    };
    Ok(model)
}

/// Gradient of the sample loss w.r.t. the final-layer weights, flattened
/// class-major (`[c * p + f]`), followed by the K bias entries when the
/// layout includes them.
pub fn per_sample_gradient(model: &IndModel, x: &[f64], y: usize, layout: GradientLayout) -> Result<Vec<f64>> {
    model.check_input(x)?;
    if y >= model.classes {
        return Err(MedixError::invalid("label", format!("{y} ≥ class count {}", model.classes)));
    }
    let r = model.residual(x, y);
    let mut g = Vec::with_capacity(layout.dim(model));
    for rc in &r {
        g.extend(x.iter().map(|xf| rc * xf));
    }
    if layout.include_bias {
        g.extend_from_slice(&r);
    }
    Ok(g)
}

/// Per-sample gradients of many samples as the rows of a matrix.
pub fn gradient_matrix(
    model: &IndModel,
    features: &[Vec<f64>],
    labels: &[usize],
    layout: GradientLayout,
) -> Result<GradientMatrix> {
    if features.len() != labels.len() {
        return Err(MedixError::DimensionMismatch { expected: features.len(), actual: labels.len() });
    }
    let rows = features
        .par_iter()
        .zip(labels.par_iter())
        .map(|(x, &y)| per_sample_gradient(model, x, y, layout))
        .collect::<Result<Vec<_>>>()?;
    GradientMatrix::from_rows(&rows)
}

/// Arithmetic mean of per-sample gradients, summed in index order.
pub fn mean_gradient(
    model: &IndModel,
    features: &[Vec<f64>],
    labels: &[usize],
    layout: GradientLayout,
) -> Result<ReferenceGradient> {
    if features.is_empty() {
        return Err(MedixError::EmptySampleSet);
    }
    let g = gradient_matrix(model, features, labels, layout)?;
    Ok(ReferenceGradient(g.column_means()))
}

/// The reference gradient: mean per-sample gradient over the InD set.
pub fn reference_gradient(model: &IndModel, data: &LabeledDataset, layout: GradientLayout) -> Result<ReferenceGradient> {
    mean_gradient(model, data.features(), data.labels(), layout)
}

/// Argmax label with its max-softmax confidence; ties go to the lowest id.
pub fn pseudo_label(model: &IndModel, x: &[f64]) -> Prediction {
    let p = model.probabilities(x);
    let label = argmax(&p);
    Prediction { label, confidence: p[label] }
}

#[derive(Debug, Clone)]
pub struct PrefilterOutcome {
    /// The retained samples; `None` when no sample reaches the threshold.
    pub kept: Option<WildSet>,
    /// Row ids of `kept` within the input wild set.
    pub kept_ids: Vec<usize>,
    pub removed_fraction: f64,
}

/// Keeps wild samples whose max-softmax confidence is at least `threshold`.
pub fn confidence_prefilter(model: &IndModel, wild: &WildSet, threshold: f64) -> Result<PrefilterOutcome> {
    if !(0.0..=1.0 + 1e-9).contains(&threshold) {
        return Err(MedixError::invalid("threshold", "must lie in [0, 1]"));
    }
    let kept_ids: Vec<usize> = (0..wild.len())
        .filter(|&i| pseudo_label(model, &wild.features()[i]).confidence >= threshold)
        .collect();
    let removed_fraction = 1.0 - kept_ids.len() as f64 / wild.len() as f64;
    let kept = if kept_ids.is_empty() { None } else { Some(wild.subset(&kept_ids)?) };
    Ok(PrefilterOutcome { kept, kept_ids, removed_fraction })
}

/// Writes a checkpoint: one `#`-prefixed metadata line, then a CSV of
/// `kind,class,index,value` rows.
pub fn write_checkpoint(model: &IndModel, path: &Path) -> Result<()> {
    let mut out = format!(
        "# medix-model classes={} features={} loss={} epochs={} lr={} final_loss={}\n",
        model.classes, model.features, model.loss, model.meta.epochs, model.meta.lr, model.meta.final_loss
    );
    out.push_str("kind,class,index,value\n");
    for c in 0..model.classes {
        for f in 0..model.features {
            out.push_str(&format!("weight,{c},{f},{}\n", model.weights[c * model.features + f]));
        }
    }
    for (c, b) in model.biases.iter().enumerate() {
        out.push_str(&format!("bias,{c},0,{b}\n"));
    }
    fs::write(path, out).map_err(|e| MedixError::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<IndModel> {
    let text = fs::read_to_string(path).map_err(|e| MedixError::io(path, e))?;
    let bad = |why: &str| MedixError::format(path, why.to_string());
    let mut lines = text.lines();
    let meta = lines.next().and_then(|l| l.strip_prefix("# medix-model ")).ok_or_else(|| bad("missing header"))?;
    let field = |key: &str| {
        meta.split_whitespace()
            .find_map(|kv| kv.strip_prefix(key).and_then(|v| v.strip_prefix('=')))
            .ok_or_else(|| bad(&format!("missing `{key}`")))
    };
    let classes: usize = field("classes")?.parse().map_err(|_| bad("classes"))?;
    let features: usize = field("features")?.parse().map_err(|_| bad("features"))?;
    let loss: Loss = field("loss")?.parse()?;
    let epochs: usize = field("epochs")?.parse().map_err(|_| bad("epochs"))?;
    let lr: f64 = field("lr")?.parse().map_err(|_| bad("lr"))?;
    let final_loss: f64 = field("final_loss")?.parse().map_err(|_| bad("final_loss"))?;

    let mut weights = vec![f64::NAN; classes * features];
    let mut biases = vec![f64::NAN; classes];
    if lines.next() != Some("kind,class,index,value") {
        return Err(bad("missing column header"));
    }
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let parts: Vec<&str> = line.split(',').collect();
        let [kind, c, i, v] = parts[..] else { return Err(bad("expected 4 fields")) };
        let c: usize = c.parse().map_err(|_| bad("class"))?;
        let i: usize = i.parse().map_err(|_| bad("index"))?;
        let v: f64 = v.parse().map_err(|_| bad("value"))?;
        match kind {
            "weight" if c < classes && i < features => weights[c * features + i] = v,
            "bias" if c < classes => biases[c] = v,
            _ => return Err(bad("unknown or out-of-range parameter")),
        }
    }
    let mut model = IndModel::from_parameters(classes, features, weights, biases, loss)
        .map_err(|_| bad("incomplete parameter listing"))?;
    model.meta = TrainingMeta { epochs, lr, final_loss, loss_history: Vec::new() };
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_model_gradient_closed_form() {
        let m = IndModel::zeros(2, 1, Loss::CrossEntropy);
        let g = per_sample_gradient(&m, &[1.0], 0, GradientLayout::default()).unwrap();
        assert_eq!(g, vec![-0.5, 0.5]);
        let g = per_sample_gradient(&m, &[1.0], 0, GradientLayout { include_bias: true }).unwrap();
        assert_eq!(g, vec![-0.5, 0.5, -0.5, 0.5]);
    }

    #[test]
    fn zero_model_pseudo_label_is_uniform() {
        let m = IndModel::zeros(3, 2, Loss::CrossEntropy);
        let p = pseudo_label(&m, &[4.0, -1.0]);
        assert_eq!(p.label, 0);
        assert_eq!(p.confidence, 1.0 / 3.0);
    }

    #[test]
    fn gradient_rejects_bad_input() {
        let m = IndModel::zeros(2, 1, Loss::CrossEntropy);
        let l = GradientLayout::default();
        assert!(matches!(per_sample_gradient(&m, &[f64::NAN], 0, l), Err(MedixError::NonFiniteFeature)));
        assert!(per_sample_gradient(&m, &[1.0], 2, l).is_err());
        assert!(per_sample_gradient(&m, &[1.0, 2.0], 0, l).is_err());
    }

    #[test]
    fn single_class_training_is_rejected() {
        let ds = LabeledDataset::new(vec![vec![1.0], vec![2.0]], vec![1, 1], 2).unwrap();
        assert!(matches!(
            train_ind_classifier(&ds, &TrainConfig::default()),
            Err(MedixError::DegenerateDataset(_))
        ));
    }

    #[test]
    fn two_point_loss_decreases() {
        let ds = LabeledDataset::new(vec![vec![1.0], vec![-1.0]], vec![0, 1], 2).unwrap();
        let cfg = TrainConfig { epochs: 500, batch: 2, ..TrainConfig::default() };
        let m = train_ind_classifier(&ds, &cfg).unwrap();
        let h = &m.meta.loss_history;
        assert!(h.windows(2).all(|w| w[1] <= w[0]));
        assert!(m.meta.final_loss < 0.05);
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let ds = LabeledDataset::new(vec![vec![1.0, 0.5], vec![-1.0, 0.25], vec![0.0, 2.0]], vec![0, 1, 2], 3)
            .unwrap();
        let m = train_ind_classifier(&ds, &TrainConfig { epochs: 20, ..TrainConfig::default() }).unwrap();
        write_checkpoint(&m, &p).unwrap();
        let back = read_checkpoint(&p).unwrap();
        assert_eq!(back.weights(), m.weights());
        assert_eq!(back.biases(), m.biases());
        assert_eq!(back.meta.final_loss, m.meta.final_loss);
    }
}
