//! Synthetic worlds: the three-Gaussian 2-D mixture, Huber-style wild-set
//! assembly, and raw gradient matrices for bound verification.
//!
//! Every draw comes from [`Philox`](crate::rng::Philox) keyed by the seed,
//! with one counter stream per purpose, so outputs are bit-reproducible.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand_distr::{ChiSquared, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{MedixError, Result};
use crate::filter::Origin;
use crate::gradients::LabeledDataset;
use crate::rng::Philox;
use crate::stats::GradientMatrix;

const TRAIN_STREAM: u64 = 1;
const WILD_IND_STREAM: u64 = 2;
const WILD_OOD_STREAM: u64 = 3;
const WILD_SHUFFLE_STREAM: u64 = 4;
const TEST_STREAM: u64 = 5;
const MAKE_WILD_STREAM: u64 = 6;
const DIRECTION_STREAM: u64 = 7;
const GRAD_IND_STREAM: u64 = 8;
const GRAD_OOD_STREAM: u64 = 9;
const GRAD_SHUFFLE_STREAM: u64 = 10;

/// Isotropic Gaussian mixture: K InD classes plus one OOD component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub class_means: Vec<Vec<f64>>,
    /// Covariance multiplier: each class is N(mean, cov_scale·I).
    pub cov_scale: f64,
    pub ood_mean: Vec<f64>,
    pub ood_cov_scale: f64,
    /// Samples per class in each of the training split and the wild InD pool.
    pub n_per_class: usize,
    /// OOD samples in the wild pool.
    pub n_ood: usize,
    pub seed: u64,
}

impl MixtureSpec {
    /// Means (−2,0), (2,0), (0,2√3); OOD at (20, 2√3); all covariances 0.25·I.
    pub fn three_gaussians() -> Self {
        let h = 2.0 * 3f64.sqrt();
        MixtureSpec {
            class_means: vec![vec![-2.0, 0.0], vec![2.0, 0.0], vec![0.0, h]],
            cov_scale: 0.25,
            ood_mean: vec![20.0, h],
            ood_cov_scale: 0.25,
            n_per_class: 200,
            n_ood: 600,
            seed: 0,
        }
    }

    pub fn classes(&self) -> usize {
        self.class_means.len()
    }

    pub fn dim(&self) -> usize {
        self.ood_mean.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.class_means.len() < 2 {
            return Err(MedixError::invalid("class_means", "need at least 2 classes"));
        }
        let p = self.ood_mean.len();
        if p == 0 {
            return Err(MedixError::invalid("ood_mean", "empty mean vector"));
        }
        for m in &self.class_means {
            if m.len() != p {
                return Err(MedixError::DimensionMismatch { expected: p, actual: m.len() });
            }
        }
        if !(self.cov_scale >= 0.0) || !(self.ood_cov_scale >= 0.0) {
            return Err(MedixError::invalid("cov_scale", "must be non-negative"));
        }
        if self.n_per_class == 0 || self.n_ood == 0 {
            return Err(MedixError::invalid("counts", "n_per_class and n_ood must be ≥ 1"));
        }
        Ok(())
    }
}

fn gaussian_point(rng: &mut Philox, mean: &[f64], scale: f64) -> Vec<f64> {
    mean.iter().map(|m| m + scale * rng.standard_normal()).collect()
}

/// Wild samples without gradients yet; ids refer to the generating world.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedSample {
    pub features: Vec<Vec<f64>>,
    pub origin: Vec<Origin>,
    pub sample_ids: Vec<usize>,
}

impl MixedSample {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Realised OOD fraction.
    pub fn realized_pi(&self) -> f64 {
        self.origin.iter().filter(|&&o| o == Origin::Ood).count() as f64 / self.len() as f64
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticWorld {
    pub train: LabeledDataset,
    /// Ids of the training rows (0..n_train).
    pub train_ids: Vec<usize>,
    /// Wild InD pool (true labels kept for reference only).
    pub ind_pool: Vec<Vec<f64>>,
    pub ind_pool_labels: Vec<usize>,
    pub ood_pool: Vec<Vec<f64>>,
    /// Both pools mixed and shuffled.
    pub wild: MixedSample,
}

/// Draws the training split, a disjoint wild InD pool and an OOD pool.
pub fn gaussian_world(spec: &MixtureSpec) -> Result<SyntheticWorld> {
    spec.validate()?;
    let k = spec.classes();
    let scale = spec.cov_scale.sqrt();
    let draw_classes = |stream: u64| {
        let mut rng = Philox::new(spec.seed, stream);
        let mut xs = Vec::with_capacity(k * spec.n_per_class);
        let mut ys = Vec::with_capacity(k * spec.n_per_class);
        for (c, mean) in spec.class_means.iter().enumerate() {
            for _ in 0..spec.n_per_class {
                xs.push(gaussian_point(&mut rng, mean, scale));
                ys.push(c);
            }
        }
        (xs, ys)
    };
    let (train_x, train_y) = draw_classes(TRAIN_STREAM);
    let (ind_pool, ind_pool_labels) = draw_classes(WILD_IND_STREAM);
    let mut rng = Philox::new(spec.seed, WILD_OOD_STREAM);
    let ood_scale = spec.ood_cov_scale.sqrt();
    let ood_pool: Vec<Vec<f64>> = (0..spec.n_ood).map(|_| gaussian_point(&mut rng, &spec.ood_mean, ood_scale)).collect();

    let n_train = train_x.len();
    let mut order: Vec<usize> = (0..ind_pool.len() + ood_pool.len()).collect();
    Philox::new(spec.seed, WILD_SHUFFLE_STREAM).shuffle(&mut order);
    let wild = assemble(&ind_pool, &ood_pool, &order, n_train);

    Ok(SyntheticWorld {
        train: LabeledDataset::new(train_x, train_y, k)?,
        train_ids: (0..n_train).collect(),
        ind_pool,
        ind_pool_labels,
        ood_pool,
        wild,
    })
}

// `order` indexes the concatenation ind_pool ++ ood_pool
fn assemble(ind: &[Vec<f64>], ood: &[Vec<f64>], order: &[usize], id_offset: usize) -> MixedSample {
    let mut out = MixedSample { features: Vec::new(), origin: Vec::new(), sample_ids: Vec::new() };
    for &i in order {
        if i < ind.len() {
            out.features.push(ind[i].clone());
            out.origin.push(Origin::Ind);
        } else {
            out.features.push(ood[i - ind.len()].clone());
            out.origin.push(Origin::Ood);
        }
        out.sample_ids.push(id_offset + i);
    }
    out
}

/// Fresh held-out draws from the same mixture: `n_per_class` labeled InD
/// samples per class and `n_ood` OOD samples.
pub fn held_out(spec: &MixtureSpec, n_per_class: usize, n_ood: usize) -> Result<(LabeledDataset, Vec<Vec<f64>>)> {
    spec.validate()?;
    let mut rng = Philox::new(spec.seed, TEST_STREAM);
    let scale = spec.cov_scale.sqrt();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (c, mean) in spec.class_means.iter().enumerate() {
        for _ in 0..n_per_class {
            xs.push(gaussian_point(&mut rng, mean, scale));
            ys.push(c);
        }
    }
    let ood_scale = spec.ood_cov_scale.sqrt();
    let ood = (0..n_ood).map(|_| gaussian_point(&mut rng, &spec.ood_mean, ood_scale)).collect();
    Ok((LabeledDataset::new(xs, ys, spec.classes())?, ood))
}

/// (m_in, m_out) = (⌊(1−π)m⌋, ⌈πm⌉), with products that are integers up
/// to rounding noise treated as exact.
pub fn split_counts(pi: f64, m: usize) -> Result<(usize, usize)> {
    if !(0.0..=1.0).contains(&pi) {
        return Err(MedixError::invalid("pi", format!("must lie in [0, 1], got {pi}")));
    }
    let x = pi * m as f64;
    let m_out = if (x - x.round()).abs() < 1e-9 { x.round() } else { x.ceil() } as usize;
    Ok((m - m_out.min(m), m_out.min(m)))
}

/// Samples ⌊(1−π)m⌋ InD and ⌈πm⌉ OOD points without replacement and
/// shuffles them. Ids: InD pool index i ↦ i, OOD pool index j ↦ |ind_pool| + j.
pub fn make_wild(ind_pool: &[Vec<f64>], ood_pool: &[Vec<f64>], pi: f64, m: usize, seed: u64) -> Result<MixedSample> {
    if !(pi > 0.0 && pi <= 1.0) {
        return Err(MedixError::invalid("pi", format!("must lie in (0, 1], got {pi}")));
    }
    if m == 0 {
        return Err(MedixError::invalid("m", "must be ≥ 1"));
    }
    let (m_in, m_out) = split_counts(pi, m)?;
    if m_in > ind_pool.len() {
        return Err(MedixError::InsufficientPool { needed: m_in, available: ind_pool.len() });
    }
    if m_out > ood_pool.len() {
        return Err(MedixError::InsufficientPool { needed: m_out, available: ood_pool.len() });
    }
    let mut rng = Philox::new(seed, MAKE_WILD_STREAM);
    let mut pick = |n: usize, take: usize| {
        let mut idx: Vec<usize> = (0..n).collect();
        for i in 0..take {
            let j = i + rng.below(n - i);
            idx.swap(i, j);
        }
        idx.truncate(take);
        idx
    };
    let ind_ids = pick(ind_pool.len(), m_in);
    let ood_ids = pick(ood_pool.len(), m_out);
    let mut order: Vec<usize> = ind_ids.into_iter().chain(ood_ids.into_iter().map(|j| ind_pool.len() + j)).collect();
    rng.shuffle(&mut order);
    Ok(assemble(ind_pool, ood_pool, &order, 0))
}

/// Noise family of simulated gradient coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    Gaussian,
    /// Student-t with ν degrees of freedom, rescaled to variance σ².
    StudentT(f64),
}

impl Tail {
    /// Fourth central moment of one coordinate with variance σ².
    pub fn fourth_moment(&self, sigma: f64) -> f64 {
        let s4 = sigma.powi(4);
        match *self {
            Tail::Gaussian => 3.0 * s4,
            Tail::StudentT(nu) => 3.0 * (nu - 2.0) / (nu - 4.0) * s4,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Tail::StudentT(nu) if !(nu > 4.0) => Err(MedixError::FourthMomentUnbounded(nu)),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Tail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tail::Gaussian => f.write_str("gaussian"),
            Tail::StudentT(nu) => write!(f, "student_t:{nu}"),
        }
    }
}

impl FromStr for Tail {
    type Err = MedixError;
    fn from_str(s: &str) -> Result<Self> {
        if s == "gaussian" {
            return Ok(Tail::Gaussian);
        }
        let nu = s
            .strip_prefix("student_t:")
            .and_then(|v| v.parse::<f64>().ok())
            .ok_or_else(|| MedixError::invalid("tail", format!("expected `gaussian` or `student_t:<nu>`, got `{s}`")))?;
        Ok(Tail::StudentT(nu))
    }
}

/// Unit-variance noise source for one tail family.
struct Noise {
    rng: Philox,
    tail: Tail,
    chi: Option<ChiSquared<f64>>,
}

impl Noise {
    fn new(seed: u64, stream: u64, tail: Tail) -> Self {
        let chi = match tail {
            Tail::StudentT(nu) => Some(ChiSquared::new(nu).expect("validated nu > 4")),
            Tail::Gaussian => None,
        };
        Noise { rng: Philox::new(seed, stream), tail, chi }
    }

    fn draw(&mut self) -> f64 {
        let z = self.rng.standard_normal();
        match (self.tail, &self.chi) {
            (Tail::StudentT(nu), Some(chi)) => {
                let v = chi.sample(&mut self.rng);
                z / (v / nu).sqrt() * ((nu - 2.0) / nu).sqrt()
            }
            _ => z,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientWorldSpec {
    pub mu_in: Vec<f64>,
    pub sigma: f64,
    /// Δ: the OOD mean is mu_in + Δ√d·u for a random unit vector u.
    pub separation: f64,
    pub pi: f64,
    pub m: usize,
    pub tail: Tail,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct SimulatedGradients {
    pub gradients: GradientMatrix,
    pub origin: Vec<Origin>,
    pub ood_mean: Vec<f64>,
}

/// Separate InD and OOD gradient pools.
#[derive(Debug, Clone)]
pub struct GradientPools {
    pub ind: GradientMatrix,
    pub ood: GradientMatrix,
    pub ood_mean: Vec<f64>,
}

/// Draws `n_in` InD rows around `mu_in` and `n_out` OOD rows around the
/// shifted mean, each coordinate with standard deviation σ.
pub fn gradient_pools(
    mu_in: &[f64],
    sigma: f64,
    separation: f64,
    n_in: usize,
    n_out: usize,
    tail: Tail,
    seed: u64,
) -> Result<GradientPools> {
    let d = mu_in.len();
    if d == 0 {
        return Err(MedixError::invalid("mu_in", "empty mean vector"));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(MedixError::invalid("sigma", "must be finite and non-negative"));
    }
    if !(separation >= 0.0) || !separation.is_finite() {
        return Err(MedixError::invalid("separation", "must be finite and non-negative"));
    }
    tail.validate()?;

    let mut dir = Philox::new(seed, DIRECTION_STREAM);
    let u: Vec<f64> = (0..d).map(|_| dir.standard_normal()).collect();
    let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    let shift = separation * (d as f64).sqrt() / norm;
    let ood_mean: Vec<f64> = mu_in.iter().zip(&u).map(|(m, v)| m + shift * v).collect();

    let draw = |mean: &[f64], n: usize, stream: u64| -> Result<Option<GradientMatrix>> {
        if n == 0 {
            return Ok(None);
        }
        let mut noise = Noise::new(seed, stream, tail);
        let data: Vec<f64> = (0..n).flat_map(|_| mean.iter().map(|m| m + sigma * noise.draw()).collect::<Vec<_>>()).collect();
        GradientMatrix::new(n, d, data).map(Some)
    };
    let ind = draw(mu_in, n_in, GRAD_IND_STREAM)?.ok_or(MedixError::EmptySampleSet)?;
    let ood = draw(&ood_mean, n_out, GRAD_OOD_STREAM)?.ok_or(MedixError::EmptySampleSet)?;
    Ok(GradientPools { ind, ood, ood_mean })
}

/// A shuffled wild gradient matrix with ⌊(1−π)m⌋ InD and ⌈πm⌉ OOD rows.
pub fn simulate_gradient_world(spec: &GradientWorldSpec) -> Result<SimulatedGradients> {
    let (m_in, m_out) = split_counts(spec.pi, spec.m)?;
    if m_in == 0 || m_out == 0 {
        return Err(MedixError::invalid("pi", "both populations need at least one row"));
    }
    let pools = gradient_pools(&spec.mu_in, spec.sigma, spec.separation, m_in, m_out, spec.tail, spec.seed)?;
    let all = pools.ind.stack(&pools.ood)?;
    let mut order: Vec<usize> = (0..spec.m).collect();
    Philox::new(spec.seed, GRAD_SHUFFLE_STREAM).shuffle(&mut order);
    let origin = order.iter().map(|&i| if i < m_in { Origin::Ind } else { Origin::Ood }).collect();
    Ok(SimulatedGradients { gradients: all.select_rows(&order)?, origin, ood_mean: pools.ood_mean })
}

/// Writes wild samples as CSV `x0,..,x{p-1},__origin[,extra...]`. The origin
/// column is evaluation-only ground truth.
pub fn write_wild_csv(path: &Path, sample: &MixedSample, extra: &[(&str, Vec<String>)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let p = sample.features.first().map_or(0, Vec::len);
    let mut header: Vec<String> = (0..p).map(|j| format!("x{j}")).collect();
    header.push("__origin".into());
    header.extend(extra.iter().map(|(name, _)| name.to_string()));
    w.write_record(&header)?;
    for (i, (x, o)) in sample.features.iter().zip(&sample.origin).enumerate() {
        let mut rec: Vec<String> = x.iter().map(f64::to_string).collect();
        rec.push(o.to_string());
        rec.extend(extra.iter().map(|(_, col)| col[i].clone()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| MedixError::io(path, e))
}
