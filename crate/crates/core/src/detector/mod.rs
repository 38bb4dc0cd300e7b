//! Binary OOD detector trained on InD data versus filtered candidate
//! outliers, plus the evaluation metrics.

mod metrics;

pub use metrics::{auroc, fpr_at_tpr, ind_accuracy, DetectionMetrics};

use serde::{Deserialize, Serialize};

use crate::error::{MedixError, Result};
use crate::gradients::{IndModel, LabeledDataset, Loss};
use crate::gradients::softmax;
use crate::rng::Philox;

const INIT_STREAM: u64 = 0x4445_5445;

/// Linear scorer g(x) = w·x + b in raw feature space; x is classified InD
/// iff g(x) > threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OodDetector {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub threshold: f64,
}

impl OodDetector {
    pub fn zeros(p: usize) -> Self {
        OodDetector { weights: vec![0.0; p], bias: 0.0, threshold: 0.0 }
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        score(self, x)
    }

    pub fn is_ind(&self, x: &[f64]) -> bool {
        self.score(x) > self.threshold
    }
}

/// Raw linear score.
pub fn score(det: &OodDetector, x: &[f64]) -> f64 {
    det.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + det.bias
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub lr: f64,
    pub epochs: usize,
    /// Weight on the binary term when an InD classifier head is trained
    /// jointly: total = w·L_bin + L_ce. Zero trains the binary term alone.
    pub ind_loss_weight: f64,
    pub seed: u64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig { lr: 0.1, epochs: 300, ind_loss_weight: 10.0, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct DetectorFit {
    pub detector: OodDetector,
    /// Jointly trained InD head (present when `ind_loss_weight > 0`).
    pub classifier: Option<IndModel>,
    /// Binary surrogate loss after each epoch.
    pub loss_history: Vec<f64>,
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    fn fit(rows: &[&[f64]]) -> Self {
        let p = rows[0].len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; p];
        for r in rows {
            mean.iter_mut().zip(*r).for_each(|(m, v)| *m += v / n);
        }
        let mut var = vec![0.0; p];
        for r in rows {
            var.iter_mut().zip(*r).zip(&mean).for_each(|((s, v), m)| *s += (v - m) * (v - m) / n);
        }
        let scale = var.iter().map(|v| if *v > 0.0 { v.sqrt() } else { 1.0 }).collect();
        Standardizer { mean, scale }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).zip(&self.scale).map(|((v, m), s)| (v - m) / s).collect()
    }
}

/// Full-batch gradient descent on
/// mean_InD softplus(−g(x)) + mean_out softplus(g(x)),
/// the smooth surrogate of the two 0/1 error terms. Features are
/// standardized internally; the returned detector works on raw features.
pub fn train_ood_detector(ind: &LabeledDataset, outliers: &[Vec<f64>], cfg: &DetectorConfig) -> Result<DetectorFit> {
    if outliers.is_empty() {
        return Err(MedixError::NoCandidateOutliers);
    }
    if !(cfg.lr > 0.0) || cfg.epochs == 0 || !(cfg.ind_loss_weight >= 0.0) {
        return Err(MedixError::invalid("detector", "need lr > 0, epochs ≥ 1, ind_loss_weight ≥ 0"));
    }
    let p = ind.dim();
    for x in outliers {
        if x.len() != p {
            return Err(MedixError::DimensionMismatch { expected: p, actual: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(MedixError::NonFiniteFeature);
        }
    }
    let all: Vec<&[f64]> = ind.features().iter().chain(outliers).map(Vec::as_slice).collect();
    let st = Standardizer::fit(&all);
    let xin: Vec<Vec<f64>> = ind.features().iter().map(|x| st.apply(x)).collect();
    let xout: Vec<Vec<f64>> = outliers.iter().map(|x| st.apply(x)).collect();

    let mut rng = Philox::new(cfg.seed, INIT_STREAM);
    let mut w: Vec<f64> = (0..p).map(|_| 1e-3 * rng.standard_normal()).collect();
    let mut b = 0.0;
    let bin_weight = if cfg.ind_loss_weight > 0.0 { cfg.ind_loss_weight } else { 1.0 };

    let k = ind.classes();
    let joint = cfg.ind_loss_weight > 0.0;
    let mut cw = vec![0.0; k * p];
    let mut cb = vec![0.0; k];

    let lin = |w: &[f64], b: f64, x: &[f64]| w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + b;
    let bin_loss = |w: &[f64], b: f64| {
        xin.iter().map(|x| softplus(-lin(w, b, x))).sum::<f64>() / xin.len() as f64
            + xout.iter().map(|x| softplus(lin(w, b, x))).sum::<f64>() / xout.len() as f64
    };

    let mut history = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let mut gw = vec![0.0; p];
        let mut gb = 0.0;
        for (set, sign) in [(&xin, -1.0), (&xout, 1.0)] {
            let n = set.len() as f64;
            for x in set.iter() {
                // d/dz softplus(sign·z) = sign·σ(sign·z)
                let g = sign * sigmoid(sign * lin(&w, b, x)) / n;
                gw.iter_mut().zip(x).for_each(|(a, v)| *a += g * v);
                gb += g;
            }
        }
        let step = cfg.lr * bin_weight;
        w.iter_mut().zip(&gw).for_each(|(a, g)| *a -= step * g);
        b -= step * gb;

        if joint {
            let n = xin.len() as f64;
            let mut gcw = vec![0.0; k * p];
            let mut gcb = vec![0.0; k];
            for (x, &y) in xin.iter().zip(ind.labels()) {
                let z: Vec<f64> = (0..k).map(|c| lin(&cw[c * p..(c + 1) * p], cb[c], x)).collect();
                let mut r = softmax(&z);
                r[y] -= 1.0;
                for c in 0..k {
                    gcb[c] += r[c] / n;
                    gcw[c * p..(c + 1) * p].iter_mut().zip(x).for_each(|(a, v)| *a += r[c] * v / n);
                }
            }
            cw.iter_mut().zip(&gcw).for_each(|(a, g)| *a -= cfg.lr * g);
            cb.iter_mut().zip(&gcb).for_each(|(a, g)| *a -= cfg.lr * g);
        }
        history.push(bin_loss(&w, b));
    }

    // fold the standardization into raw-space parameters
    let fold = |w: &[f64], b: f64| {
        let raw: Vec<f64> = w.iter().zip(&st.scale).map(|(a, s)| a / s).collect();
        let shift: f64 = raw.iter().zip(&st.mean).map(|(a, m)| a * m).sum();
        (raw, b - shift)
    };
    let (weights, bias) = fold(&w, b);
    let classifier = if joint {
        let mut ws = Vec::with_capacity(k * p);
        let mut bs = Vec::with_capacity(k);
        for c in 0..k {
            let (rw, rb) = fold(&cw[c * p..(c + 1) * p], cb[c]);
            ws.extend(rw);
            bs.push(rb);
        }
        Some(IndModel::from_parameters(k, p, ws, bs, Loss::CrossEntropy)?)
    } else {
        None
    };
    if weights.iter().any(|v| !v.is_finite()) || !bias.is_finite() {
        return Err(MedixError::invalid("lr", "detector training diverged"));
    }
    Ok(DetectorFit { detector: OodDetector { weights, bias, threshold: 0.0 }, classifier, loss_history: history })
}
