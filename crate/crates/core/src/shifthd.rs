//! High-dimensional location estimation by random sign rotations.
//!
//! Each trial rotates both batches by a random ±1/√d matrix, estimates the shift of
//! every rotated coordinate with the scalar estimator of [`crate::shift1d`], and maps
//! the coordinate estimates back with an LU solve. Trials are combined by [`amplify`].
//! A [`ShiftReference`] holds the rotated second batch so it can be compared against
//! many first batches.

use nalgebra::{DMatrix, DMatrixView, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::batch::{distance, SampleBatch};
use crate::error::{argument, config, Error, Result};
use crate::par::par_map;
use crate::rng::{derive_seed, stream_rng, streams};
use crate::shift1d::{refine_against, shuffled, PreparedSlices, Shift1DConfig};

/// A `d × d` matrix with entries `±1/√d` and a positive diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignBasis {
    dim: usize,
    /// Row-major entries.
    entries: Vec<f64>,
    seed: u64,
}

pub fn random_sign_basis(d: usize, seed: u64) -> SignBasis {
    let mag = 1.0 / (d.max(1) as f64).sqrt();
    let mut rng = stream_rng(seed, streams::SIGN_BASIS);
    let mut entries = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            let positive = i == j || rng.random::<bool>();
            entries.push(if positive { mag } else { -mag });
        }
    }
    SignBasis { dim: d, entries, seed }
}

impl SignBasis {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.dim..(i + 1) * self.dim]
    }

    fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.entries)
    }

    /// `R x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim).map(|i| self.row(i).iter().zip(x).map(|(r, v)| r * v).sum()).collect()
    }

    /// Every sample mapped through `R`.
    pub fn project_batch(&self, batch: &SampleBatch) -> Result<SampleBatch> {
        if batch.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: batch.dim() });
        }
        let data = batch.rows().flat_map(|r| self.apply(r)).collect();
        SampleBatch::new(self.dim, data)
    }

    /// Rotated coordinates of the rows of `batch` taken in `order`, one vector per coordinate.
    fn project_columns(&self, batch: &SampleBatch, order: &[usize]) -> Vec<Vec<f64>> {
        let data: Vec<f64> = order.iter().flat_map(|&i| batch.row(i).iter().copied()).collect();
        // Row-major `n × d` data is the column-major `d × n` matrix of samples.
        let samples = DMatrixView::from_slice(&data, self.dim, order.len());
        let rotated = (self.matrix() * samples).transpose();
        rotated.column_iter().map(|c| c.as_slice().to_vec()).collect()
    }

    /// Ratio of extreme singular values; infinite when singular.
    pub fn condition_number(&self) -> f64 {
        let sv = self.matrix().singular_values();
        let max = sv.max();
        let min = sv.min();
        if min <= max * 1e-13 { f64::INFINITY } else { max / min }
    }

    /// Solves `R v = w`.
    pub fn solve(&self, w: &[f64]) -> Result<Vec<f64>> {
        if w.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: w.len() });
        }
        self.matrix()
            .lu()
            .solve(&DVector::from_column_slice(w))
            .map(|v| v.as_slice().to_vec())
            .ok_or_else(|| Error::Estimation("sign basis is singular".into()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AmplifyConfig {
    /// Number of independent rotations.
    pub trials: usize,
    /// Ball radius is `ball_radius_multiplier · eta · sigma`.
    pub ball_radius_multiplier: f64,
    /// Fraction of candidates the ball must hold.
    pub quorum: f64,
    /// Per-coordinate scale is `coord_scale · sigma · √(log d / d)`.
    pub coord_scale: f64,
    /// Rotations with condition number above `condition_factor · d` are redrawn.
    pub condition_factor: f64,
    pub max_redraws: usize,
    /// Refinement rounds added per coordinate. `None` adds `⌈ln √d / ln(1/eta)⌉`, so
    /// the coordinate errors, of size `eta·sigma/√d` each, sum to `O(eta·sigma)`.
    pub extra_rounds: Option<usize>,
}

impl Default for AmplifyConfig {
    fn default() -> Self {
        Self::from_delta(0.05)
    }
}

impl AmplifyConfig {
    /// `⌈8·ln(1/δ)⌉` trials, at least 3.
    pub fn from_delta(delta: f64) -> Self {
        let trials = (8.0 * (1.0 / delta).ln()).ceil().max(3.0) as usize;
        Self {
            trials,
            ball_radius_multiplier: 4.0,
            quorum: 0.9,
            coord_scale: 2.0,
            condition_factor: 4.0,
            max_redraws: 1000,
            extra_rounds: None,
        }
    }

    pub fn with_trials(mut self, trials: usize) -> Self {
        self.trials = trials;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials < 3 {
            return Err(config("amplification needs at least 3 trials"));
        }
        if !(self.quorum > 0.5 && self.quorum <= 1.0) {
            return Err(config("quorum must lie in (0.5, 1]"));
        }
        if !(self.ball_radius_multiplier > 0.0) || !(self.coord_scale > 0.0) {
            return Err(config("radius multiplier and coordinate scale must be positive"));
        }
        if !(self.condition_factor > 0.0) {
            return Err(config("condition_factor must be positive"));
        }
        Ok(())
    }

    /// Per-coordinate `sigma` handed to the scalar estimator.
    pub fn coordinate_sigma(&self, sigma: f64, d: usize) -> f64 {
        let d = d as f64;
        self.coord_scale * sigma * (d.ln().max(1.0) / d).sqrt()
    }

    pub fn coordinate_extra_rounds(&self, eta: f64, d: usize) -> usize {
        self.extra_rounds.unwrap_or_else(|| ((d as f64).sqrt().ln() / (1.0 / eta).ln()).ceil().max(0.0) as usize)
    }

    /// Scalar estimator settings used on each rotated coordinate.
    pub fn coordinate_config(&self, cfg: &Shift1DConfig, d: usize) -> Shift1DConfig {
        Shift1DConfig {
            sigma: self.coordinate_sigma(cfg.sigma, d),
            rounds: Some(cfg.rounds() + self.coordinate_extra_rounds(cfg.eta, d)),
            ..cfg.clone()
        }
    }
}

/// Index of the first candidate whose closed `radius`-ball holds at least
/// `quorum · len` candidates, with the success flag; index 0 and `false` otherwise.
pub fn amplify(candidates: &[Vec<f64>], radius: f64, quorum: f64) -> Result<(usize, bool)> {
    if candidates.is_empty() {
        return Err(argument("amplify needs at least one candidate"));
    }
    let need = quorum * candidates.len() as f64 - 1e-9;
    for (i, c) in candidates.iter().enumerate() {
        let support = candidates.iter().filter(|o| distance(c, o) <= radius).count();
        if support as f64 >= need {
            return Ok((i, true));
        }
    }
    Ok((0, false))
}

/// Diagnostics for one rotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub basis_seed: u64,
    pub redraws: usize,
    pub condition: f64,
    pub candidate: Vec<f64>,
    /// Radius indices chosen per coordinate, per completed round.
    pub coordinate_ks: Vec<Vec<usize>>,
    /// Coordinates where no refinement round completed.
    pub rough_only: usize,
    pub fallback_rounds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftHdEstimate {
    pub value: Vec<f64>,
    /// A quorum ball was found.
    pub succeeded: bool,
    pub chosen: usize,
    pub trials: Vec<TrialRecord>,
}

/// Estimates `v` from batches of `∇ + v` and `∇`, where both carry the same
/// oblivious noise law. Equivalent to [`ShiftReference::new`] on `s2` followed by
/// [`ShiftReference::estimate`] on `s1`.
pub fn shift_highd(
    s1: &SampleBatch,
    s2: &SampleBatch,
    cfg: &Shift1DConfig,
    amp: &AmplifyConfig,
    seed: u64,
) -> Result<ShiftHdEstimate> {
    if s1.dim() != s2.dim() {
        return Err(argument(format!("batch dimensions differ: {} vs {}", s1.dim(), s2.dim())));
    }
    if s1.len() != s2.len() {
        return Err(argument(format!("batch sizes differ: {} vs {}", s1.len(), s2.len())));
    }
    ShiftReference::new(s2, cfg, amp, seed)?.estimate(s1, seed)
}

/// Rotations, row orders and rotated slices of a second batch, shared by every
/// first batch compared against it.
#[derive(Debug, Clone)]
pub struct ShiftReference {
    dim: usize,
    len: usize,
    coord_cfg: Shift1DConfig,
    radius: f64,
    quorum: f64,
    trials: Vec<ReferenceTrial>,
}

#[derive(Debug, Clone)]
struct ReferenceTrial {
    basis: SignBasis,
    redraws: usize,
    condition: f64,
    /// Row order applied to first batches.
    order: Vec<usize>,
    coords: Vec<PreparedSlices>,
}

impl ShiftReference {
    pub fn new(s2: &SampleBatch, cfg: &Shift1DConfig, amp: &AmplifyConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        amp.validate()?;
        let d = s2.dim();
        let coord_cfg = amp.coordinate_config(cfg, d);
        let max_condition = amp.condition_factor * d as f64;
        let trials = (0..amp.trials as u64)
            .map(|trial| {
                let trial_seed = derive_seed(seed, &[trial]);
                let (basis, redraws, condition) = draw_basis(d, trial_seed, max_condition, amp.max_redraws)?;
                let order = shuffled(s2.len(), trial_seed, streams::PARTITION_S1);
                let cols = basis.project_columns(s2, &shuffled(s2.len(), trial_seed, streams::PARTITION_S2));
                let coords = par_map(d, |i| PreparedSlices::new(&cols[i], &coord_cfg));
                let coords = coords.into_iter().collect::<Result<Vec<_>>>()?;
                Ok(ReferenceTrial { basis, redraws, condition, order, coords })
            })
            .collect::<Result<Vec<_>>>()?;
        let radius = amp.ball_radius_multiplier * cfg.eta * cfg.sigma;
        Ok(Self { dim: d, len: s2.len(), coord_cfg, radius, quorum: amp.quorum, trials })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Batch size every first batch must match.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Shift of `s1` relative to the reference batch; `seed` drives the per-coordinate
    /// rough estimates.
    pub fn estimate(&self, s1: &SampleBatch, seed: u64) -> Result<ShiftHdEstimate> {
        if s1.dim() != self.dim {
            return Err(argument(format!("batch dimensions differ: {} vs {}", s1.dim(), self.dim)));
        }
        if s1.len() != self.len {
            return Err(argument(format!("batch sizes differ: {} vs {}", s1.len(), self.len)));
        }
        let mut trials = Vec::with_capacity(self.trials.len());
        for (trial, t) in self.trials.iter().enumerate() {
            let cols = t.basis.project_columns(s1, &t.order);
            let coord_seed = derive_seed(seed, &[trial as u64, u64::MAX]);
            let estimates = par_map(self.dim, |i| {
                refine_against(&cols[i], &t.coords[i], &self.coord_cfg, derive_seed(coord_seed, &[i as u64]))
            });
            let estimates = estimates.into_iter().collect::<Result<Vec<_>>>()?;
            let w: Vec<f64> = estimates.iter().map(|e| e.value).collect();
            let candidate = t.basis.solve(&w)?;
            trials.push(TrialRecord {
                basis_seed: t.basis.seed(),
                redraws: t.redraws,
                condition: t.condition,
                candidate,
                coordinate_ks: estimates
                    .iter()
                    .map(|e| e.trace.iter().filter(|r| !r.skipped).filter_map(|r| r.step.as_ref().map(|s| s.k)).collect())
                    .collect(),
                rough_only: estimates.iter().filter(|e| e.rough_only).count(),
                fallback_rounds: estimates.iter().map(|e| e.fallback_rounds()).sum(),
            });
        }
        let candidates: Vec<Vec<f64>> = trials.iter().map(|t| t.candidate.clone()).collect();
        let (chosen, succeeded) = amplify(&candidates, self.radius, self.quorum)?;
        Ok(ShiftHdEstimate { value: candidates[chosen].clone(), succeeded, chosen, trials })
    }
}

/// First acceptable basis in the seed sequence `derive_seed(seed, [attempt])`.
fn draw_basis(d: usize, seed: u64, max_condition: f64, max_redraws: usize) -> Result<(SignBasis, usize, f64)> {
    for attempt in 0..=max_redraws {
        let basis = random_sign_basis(d, derive_seed(seed, &[attempt as u64]));
        let condition = basis.condition_number();
        if condition.is_finite() && condition <= max_condition.max(1.0) {
            return Ok((basis, attempt, condition));
        }
    }
    Err(Error::Estimation(format!("no well-conditioned sign basis in {} draws", max_redraws + 1)))
}
