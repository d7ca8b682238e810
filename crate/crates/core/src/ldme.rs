//! List-decodable mean estimation.
//!
//! When only an `alpha` fraction of samples are inliers, no single estimate can be
//! accurate, so the estimator returns a list of candidates of which at least one is
//! close to the inlier mean with high probability.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::batch::{distance, SampleBatch};
use crate::error::{config, Error, Result};
use crate::par::par_map;
use crate::rng::{derive_seed, stream_rng, streams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LdmeConfig {
    pub alpha: f64,
    pub eta: f64,
    pub delta: f64,
    pub repeats_cap: usize,
    /// Below this outlier fraction (`1 − alpha`) a single robust mean is returned instead.
    pub clean_threshold: f64,
}

impl Default for LdmeConfig {
    fn default() -> Self {
        Self { alpha: 0.5, eta: 0.5, delta: 0.05, repeats_cap: 100_000, clean_threshold: 0.1 }
    }
}

impl LdmeConfig {
    pub fn new(alpha: f64, eta: f64, delta: f64) -> Self {
        Self { alpha, eta, delta, ..Self::default() }
    }

    pub fn with_repeats_cap(mut self, cap: usize) -> Self {
        self.repeats_cap = cap;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(config(format!("alpha = {} must lie in (0, 1]", self.alpha)));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(config(format!("eta = {} must lie in (0, 1]", self.eta)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(config("delta must lie in (0, 1)"));
        }
        if self.repeats_cap == 0 {
            return Err(config("repeats_cap must be positive"));
        }
        if !(self.clean_threshold > 0.0 && self.clean_threshold < 0.5) {
            return Err(config("clean_threshold must lie in (0, 0.5)"));
        }
        Ok(())
    }

    /// `⌈1/eta²⌉`.
    pub fn subsample_size(&self) -> usize {
        (1.0 / (self.eta * self.eta)).ceil().max(1.0) as usize
    }

    /// Uncapped repeat count `⌈100·(1/alpha)^{2/eta²}·ln²(1/δ)⌉`; infinite on overflow.
    pub fn repeats_rule(&self) -> f64 {
        let log = (1.0 / self.delta).ln();
        (100.0 * (1.0 / self.alpha).powf(2.0 / (self.eta * self.eta)) * log * log).ceil()
    }

    pub fn repeats(&self) -> usize {
        let rule = self.repeats_rule();
        if rule.is_finite() && rule <= self.repeats_cap as f64 { (rule as usize).max(1) } else { self.repeats_cap }
    }

    pub fn is_capped(&self) -> bool {
        !(self.repeats_rule() <= self.repeats_cap as f64)
    }

    /// Probability that at least one subsample is all inliers.
    pub fn achieved_confidence(&self) -> f64 {
        let p = self.alpha.powi(self.subsample_size() as i32);
        1.0 - (1.0 - p).powf(self.repeats() as f64)
    }
}

/// Where a candidate came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Subsample { repeat: usize, indices: Vec<usize> },
    TrimmedMean { eps: f64 },
    /// Final iterate of an optimization path, negated.
    Path { index: usize },
    Given,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateList {
    dim: usize,
    candidates: Vec<Vec<f64>>,
    provenance: Vec<Provenance>,
    /// The repeat count hit its cap.
    pub capped: bool,
    /// Probability the list holds an accurate candidate, when known.
    pub achieved_confidence: Option<f64>,
}

impl CandidateList {
    pub fn new(dim: usize, candidates: Vec<Vec<f64>>, provenance: Vec<Provenance>) -> Result<Self> {
        if candidates.len() != provenance.len() {
            return Err(Error::Argument("one provenance record per candidate is required".into()));
        }
        if let Some(c) = candidates.iter().find(|c| c.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: c.len() });
        }
        Ok(Self { dim, candidates, provenance, capped: false, achieved_confidence: None })
    }

    /// List of caller-provided vectors.
    pub fn from_vectors(dim: usize, candidates: Vec<Vec<f64>>) -> Result<Self> {
        let provenance = vec![Provenance::Given; candidates.len()];
        Self::new(dim, candidates, provenance)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn candidates(&self) -> &[Vec<f64>] {
        &self.candidates
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.candidates[i]
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    /// Index and distance of the candidate closest to `target`.
    pub fn closest(&self, target: &[f64]) -> Option<(usize, f64)> {
        self.candidates
            .iter()
            .map(|c| distance(c, target))
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }

    /// Every candidate translated by `shift`.
    pub fn translated(&self, shift: &[f64]) -> Self {
        let candidates = self.candidates.iter().map(|c| c.iter().zip(shift).map(|(a, b)| a + b).collect()).collect();
        Self { candidates, ..self.clone() }
    }
}

/// Means of random subsamples of size `⌈1/eta²⌉`.
pub fn ldme_subsample(samples: &SampleBatch, cfg: &LdmeConfig, seed: u64) -> Result<CandidateList> {
    cfg.validate()?;
    let size = cfg.subsample_size();
    let m = samples.len();
    if m < size {
        return Err(Error::InsufficientSamples { got: m, required: size });
    }
    let repeats = cfg.repeats();
    let distinct = m >= 10 * size;
    let drawn = par_map(repeats, |r| {
        let mut rng = stream_rng(derive_seed(seed, &[r as u64]), streams::SUBSAMPLE);
        let indices: Vec<usize> = if distinct {
            index::sample(&mut rng, m, size).into_vec()
        } else {
            (0..size).map(|_| rng.random_range(0..m)).collect()
        };
        let mut mean = vec![0.0; samples.dim()];
        for &i in &indices {
            mean.iter_mut().zip(samples.row(i)).for_each(|(a, v)| *a += v);
        }
        mean.iter_mut().for_each(|a| *a /= size as f64);
        (mean, Provenance::Subsample { repeat: r, indices })
    });
    let (candidates, provenance) = drawn.into_iter().unzip();
    let mut list = CandidateList::new(samples.dim(), candidates, provenance)?;
    list.capped = cfg.is_capped();
    list.achieved_confidence = Some(cfg.achieved_confidence());
    Ok(list)
}

/// Coordinate-wise trimmed mean dropping `⌈eps·m⌉` samples from each tail.
///
/// Stand-in for a stability-based robust mean estimator in the near-clean regime;
/// rejects `eps ≥ clean_threshold`.
pub fn robust_mean_single(samples: &SampleBatch, eps: f64, clean_threshold: f64) -> Result<Vec<f64>> {
    if !(eps >= 0.0) {
        return Err(Error::Argument("outlier fraction must be nonnegative".into()));
    }
    if eps >= clean_threshold {
        return Err(Error::Contract(format!(
            "outlier fraction {eps} is at or above the clean threshold {clean_threshold}; use the list estimator"
        )));
    }
    let m = samples.len();
    if m == 0 {
        return Err(Error::Argument("robust mean of an empty batch".into()));
    }
    let trim = ((eps * m as f64).ceil() as usize).min((m - 1) / 2);
    Ok((0..samples.dim())
        .map(|j| {
            let mut col = samples.column(j);
            col.sort_unstable_by(f64::total_cmp);
            let kept = &col[trim..m - trim];
            kept.iter().sum::<f64>() / kept.len() as f64
        })
        .collect())
}

/// Single trimmed mean when the outlier fraction `1 − alpha` is below the clean
/// threshold, otherwise [`ldme_subsample`].
pub fn list_decode(samples: &SampleBatch, cfg: &LdmeConfig, seed: u64) -> Result<CandidateList> {
    cfg.validate()?;
    let eps = 1.0 - cfg.alpha;
    if eps < cfg.clean_threshold {
        let mean = robust_mean_single(samples, eps, cfg.clean_threshold)?;
        let mut list = CandidateList::new(samples.dim(), vec![mean], vec![Provenance::TrimmedMean { eps }])?;
        list.achieved_confidence = None;
        return Ok(list);
    }
    ldme_subsample(samples, cfg, seed)
}
