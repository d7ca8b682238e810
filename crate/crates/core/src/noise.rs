//! Synthetic noise distributions and the simulated oblivious-noise gradient oracle.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::batch::SampleBatch;
use crate::error::{config, Error, Result};
use crate::objective::SmoothObjective;
use crate::rng::{stream_rng, streams};

/// Distribution of the non-zero part of the oblivious noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum TailSpec {
    /// `|X| = scale · U^{-1/exponent}` with a uniformly random sign.
    SymmetricPareto { exponent: f64, scale: f64 },
    /// `±magnitude` with equal probability.
    TwoPoint { magnitude: f64 },
    Uniform { low: f64, high: f64 },
    Gaussian { stddev: f64 },
    /// Finite support given as `[value, weight]` pairs.
    CustomAtoms { atoms: Vec<[f64; 2]> },
}

impl TailSpec {
    pub fn validate(&self) -> Result<()> {
        let finite = |v: f64, what: &str| {
            if v.is_finite() { Ok(()) } else { Err(config(format!("{what} must be finite"))) }
        };
        match self {
            Self::SymmetricPareto { exponent, scale } => {
                finite(*exponent, "pareto exponent")?;
                finite(*scale, "pareto scale")?;
                if !(*exponent > 0.0) || !(*scale > 0.0) {
                    return Err(config("pareto exponent and scale must be positive"));
                }
            }
            Self::TwoPoint { magnitude } => {
                finite(*magnitude, "two-point magnitude")?;
                if *magnitude < 0.0 {
                    return Err(config("two-point magnitude must be nonnegative"));
                }
            }
            Self::Uniform { low, high } => {
                finite(*low, "uniform low")?;
                finite(*high, "uniform high")?;
                if !(low < high) {
                    return Err(config("uniform range needs low < high"));
                }
            }
            Self::Gaussian { stddev } => {
                finite(*stddev, "gaussian stddev")?;
                if *stddev < 0.0 {
                    return Err(config("gaussian stddev must be nonnegative"));
                }
            }
            Self::CustomAtoms { atoms } => {
                if atoms.is_empty() {
                    return Err(config("custom_atoms needs at least one atom"));
                }
                for [v, w] in atoms {
                    finite(*v, "atom value")?;
                    if !(*w >= 0.0) || !w.is_finite() {
                        return Err(config("atom weights must be nonnegative"));
                    }
                }
                let total: f64 = atoms.iter().map(|a| a[1]).sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(config(format!("atom weights sum to {total}, expected 1")));
                }
            }
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::SymmetricPareto { exponent, scale } => {
                let u = 1.0 - rng.random::<f64>();
                let mag = scale * u.powf(-1.0 / exponent);
                if rng.random::<bool>() { mag } else { -mag }
            }
            Self::TwoPoint { magnitude } => {
                if rng.random::<bool>() { *magnitude } else { -*magnitude }
            }
            Self::Uniform { low, high } => rng.random_range(*low..*high),
            Self::Gaussian { stddev } => stddev * rng.sample::<f64, _>(StandardNormal),
            Self::CustomAtoms { atoms } => {
                let u = rng.random::<f64>();
                let mut acc = 0.0;
                for [v, w] in atoms {
                    acc += w;
                    if u < acc {
                        return *v;
                    }
                }
                atoms.iter().rev().find(|a| a[1] > 0.0).map_or(atoms[0][0], |a| a[0])
            }
        }
    }

    /// Mean of the tail, when it exists.
    pub fn mean(&self) -> Option<f64> {
        match self {
            Self::SymmetricPareto { exponent, .. } => (*exponent > 1.0).then_some(0.0),
            Self::TwoPoint { .. } | Self::Gaussian { .. } => Some(0.0),
            Self::Uniform { low, high } => Some(0.5 * (low + high)),
            Self::CustomAtoms { atoms } => Some(atoms.iter().map(|[v, w]| v * w).sum()),
        }
    }

    /// Variance of the tail, when it is finite.
    pub fn variance(&self) -> Option<f64> {
        match self {
            Self::SymmetricPareto { exponent, scale } => {
                (*exponent > 2.0).then(|| scale * scale * exponent / (exponent - 2.0))
            }
            Self::TwoPoint { magnitude } => Some(magnitude * magnitude),
            Self::Uniform { low, high } => Some((high - low).powi(2) / 12.0),
            Self::Gaussian { stddev } => Some(stddev * stddev),
            Self::CustomAtoms { atoms } => {
                let mean = self.mean()?;
                Some(atoms.iter().map(|[v, w]| w * (v - mean).powi(2)).sum())
            }
        }
    }
}

/// How a scalar oblivious noise draw becomes a vector in d dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Vectorization {
    /// Scalar draw times a uniformly random unit direction.
    #[default]
    RandomDirection,
    /// The zero atom is shared by all coordinates; otherwise every coordinate
    /// gets an independent tail draw.
    PerCoordinate,
}

/// Oblivious noise: exactly zero with probability `alpha`, a tail draw otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObliviousNoiseSpec {
    pub alpha: f64,
    pub tail: TailSpec,
    /// Rescale tail draws so the noise is mean-zero with standard deviation `sigma_xi`.
    #[serde(default)]
    pub bounded_variance_mode: bool,
    #[serde(default, rename = "sigma", skip_serializing_if = "Option::is_none")]
    pub sigma_xi: Option<f64>,
    #[serde(default)]
    pub vectorization: Vectorization,
}

impl ObliviousNoiseSpec {
    pub fn new(alpha: f64, tail: TailSpec) -> Self {
        Self { alpha, tail, bounded_variance_mode: false, sigma_xi: None, vectorization: Vectorization::default() }
    }

    /// No oblivious noise at all.
    pub fn none() -> Self {
        Self::new(1.0, TailSpec::TwoPoint { magnitude: 0.0 })
    }

    pub fn with_vectorization(mut self, mode: Vectorization) -> Self {
        self.vectorization = mode;
        self
    }

    pub fn bounded(alpha: f64, tail: TailSpec, sigma_xi: f64) -> Self {
        Self { bounded_variance_mode: true, sigma_xi: Some(sigma_xi), ..Self::new(alpha, tail) }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(config(format!("alpha = {} must lie in (0, 1]", self.alpha)));
        }
        self.tail.validate()?;
        if self.bounded_variance_mode {
            self.tail_rescale()?;
        }
        Ok(())
    }

    /// Factor applied to tail draws; 1 unless in bounded-variance mode.
    fn tail_rescale(&self) -> Result<f64> {
        if !self.bounded_variance_mode {
            return Ok(1.0);
        }
        let sigma = self.sigma_xi.ok_or_else(|| config("bounded_variance_mode requires sigma"))?;
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(config("sigma must be positive in bounded_variance_mode"));
        }
        let var = self
            .tail
            .variance()
            .ok_or_else(|| config("bounded_variance_mode requires a tail with finite variance"))?;
        let mean = self.tail.mean().unwrap_or(f64::NAN);
        if !(mean.abs() <= 1e-12 * var.sqrt().max(1.0)) {
            return Err(config("bounded_variance_mode requires a mean-zero tail"));
        }
        let tail_mass = 1.0 - self.alpha;
        if var == 0.0 || tail_mass == 0.0 {
            return Ok(1.0);
        }
        Ok(sigma / (tail_mass * var).sqrt())
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R, rescale: f64) -> f64 {
        if rng.random::<f64>() < self.alpha {
            0.0
        } else {
            rescale * self.tail.sample(rng)
        }
    }
}

/// Mean-zero, bounded-variance observation noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ObservationNoiseSpec {
    Gaussian { sigma: f64 },
    /// `±sigma` with equal probability.
    ScaledRademacher { sigma: f64 },
    /// `y' − C_t` where `y'` has density `(2+t)/y^{3+t}` on `[1, ∞)` and `C_t = (2+t)/(1+t)`.
    RecenteredPareto { t: f64 },
}

impl ObservationNoiseSpec {
    pub fn none() -> Self {
        Self::Gaussian { sigma: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Gaussian { sigma } | Self::ScaledRademacher { sigma } => {
                if !(*sigma >= 0.0) || !sigma.is_finite() {
                    return Err(config("observation sigma must be finite and nonnegative"));
                }
            }
            Self::RecenteredPareto { t } => {
                if !(*t > 0.0) || !t.is_finite() {
                    return Err(config("recentered_pareto needs t > 0 for finite variance"));
                }
            }
        }
        Ok(())
    }

    /// Standard deviation of one scalar draw.
    pub fn sigma(&self) -> f64 {
        match self {
            Self::Gaussian { sigma } | Self::ScaledRademacher { sigma } => *sigma,
            Self::RecenteredPareto { t } => {
                let c = pareto_offset(*t);
                ((2.0 + t) / t - c * c).sqrt()
            }
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Gaussian { sigma } => sigma * rng.sample::<f64, _>(StandardNormal),
            Self::ScaledRademacher { sigma } => {
                if rng.random::<bool>() { *sigma } else { -*sigma }
            }
            Self::RecenteredPareto { t } => {
                let u = 1.0 - rng.random::<f64>();
                u.powf(-1.0 / (2.0 + t)) - pareto_offset(*t)
            }
        }
    }
}

/// Mean of the Pareto density `(2+t)/y^{3+t}` on `[1, ∞)`.
pub fn pareto_offset(t: f64) -> f64 {
    (2.0 + t) / (1.0 + t)
}

pub fn sample_oblivious(spec: &ObliviousNoiseSpec, m: usize, seed: u64) -> Result<SampleBatch> {
    spec.validate()?;
    let rescale = spec.tail_rescale()?;
    let mut rng = stream_rng(seed, streams::OBLIVIOUS);
    Ok(SampleBatch::from_scalars((0..m).map(|_| spec.draw(&mut rng, rescale)).collect()))
}

pub fn sample_observation(spec: &ObservationNoiseSpec, m: usize, seed: u64) -> Result<SampleBatch> {
    spec.validate()?;
    let mut rng = stream_rng(seed, streams::OBSERVATION);
    Ok(SampleBatch::from_scalars((0..m).map(|_| spec.draw(&mut rng)).collect()))
}

/// `m` oblivious noise vectors in `dim` dimensions, vectorized per `spec.vectorization`.
pub fn sample_oblivious_vectors(spec: &ObliviousNoiseSpec, dim: usize, m: usize, seed: u64) -> Result<SampleBatch> {
    spec.validate()?;
    if dim == 0 {
        return Err(Error::Argument("dimension must be at least 1".into()));
    }
    let rescale = spec.tail_rescale()?;
    let mut rng = stream_rng(seed, streams::OBLIVIOUS);
    let mut data = vec![0.0; dim * m];
    match spec.vectorization {
        Vectorization::RandomDirection => {
            let mut dir_rng = stream_rng(seed, streams::DIRECTION);
            for row in data.chunks_exact_mut(dim) {
                let mag = spec.draw(&mut rng, rescale);
                if mag == 0.0 {
                    continue;
                }
                let u = random_unit(&mut dir_rng, dim);
                row.iter_mut().zip(&u).for_each(|(r, u)| *r = mag * u);
            }
        }
        Vectorization::PerCoordinate => {
            // Keep E‖ξ‖² at sigma² in bounded-variance mode.
            let coord = if spec.bounded_variance_mode { rescale / (dim as f64).sqrt() } else { 1.0 };
            for row in data.chunks_exact_mut(dim) {
                if rng.random::<f64>() < spec.alpha {
                    continue;
                }
                for r in row.iter_mut() {
                    *r = coord * spec.tail.sample(&mut rng);
                }
            }
        }
    }
    SampleBatch::new(dim, data)
}

/// `m` observation noise vectors with per-coordinate scale `1/√dim`, so `E‖e‖² = sigma²`.
pub fn sample_observation_vectors(spec: &ObservationNoiseSpec, dim: usize, m: usize, seed: u64) -> Result<SampleBatch> {
    spec.validate()?;
    if dim == 0 {
        return Err(Error::Argument("dimension must be at least 1".into()));
    }
    let mut rng = stream_rng(seed, streams::OBSERVATION);
    let scale = 1.0 / (dim as f64).sqrt();
    let data = (0..dim * m).map(|_| scale * spec.draw(&mut rng)).collect();
    SampleBatch::new(dim, data)
}

fn random_unit<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = crate::batch::norm(&v);
        if n > 1e-300 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Source of noisy gradient batches at requested points.
pub trait GradientOracle {
    fn dim(&self) -> usize;

    /// `m` noisy gradient samples at `x`, reproducible for a fixed `seed`.
    fn query(&mut self, x: &[f64], m: usize, seed: u64) -> Result<SampleBatch>;

    /// Total number of samples served so far.
    fn samples_served(&self) -> u64;

    /// Noise-free gradient, if the oracle knows it. Meant for test assertions.
    fn true_gradient(&self, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

/// Oracle returning `∇f(x) + e + ξ` for a synthetic objective.
#[derive(Debug, Clone)]
pub struct SimulatedOracle {
    objective: SmoothObjective,
    oblivious: ObliviousNoiseSpec,
    observation: ObservationNoiseSpec,
    served: u64,
}

pub fn make_oracle(
    objective: SmoothObjective,
    oblivious: ObliviousNoiseSpec,
    observation: ObservationNoiseSpec,
) -> Result<SimulatedOracle> {
    objective.validate()?;
    oblivious.validate()?;
    observation.validate()?;
    Ok(SimulatedOracle { objective, oblivious, observation, served: 0 })
}

impl SimulatedOracle {
    pub fn objective(&self) -> &SmoothObjective {
        &self.objective
    }
}

impl GradientOracle for SimulatedOracle {
    fn dim(&self) -> usize {
        self.objective.dim()
    }

    fn query(&mut self, x: &[f64], m: usize, seed: u64) -> Result<SampleBatch> {
        self.objective.check_dim(x).map_err(|e| Error::Contract(e.to_string()))?;
        let d = self.dim();
        let grad = self.objective.gradient(x);
        let xi = sample_oblivious_vectors(&self.oblivious, d, m, seed)?;
        let e = sample_observation_vectors(&self.observation, d, m, seed)?;
        let data = e
            .as_slice()
            .chunks_exact(d)
            .zip(xi.as_slice().chunks_exact(d))
            .flat_map(|(e, xi)| (0..d).map(move |j| (j, e[j], xi[j])))
            .map(|(j, e, xi)| grad[j] + e + xi)
            .collect();
        self.served += m as u64;
        SampleBatch::new(d, data)
    }

    fn samples_served(&self) -> u64 {
        self.served
    }

    fn true_gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        Some(self.objective.gradient(x))
    }
}

/// Construction showing the median of `x + y` can sit far from zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessSpec {
    pub alpha: f64,
    pub t: f64,
    /// Largest admissible `alpha`.
    pub alpha_threshold: f64,
}

impl WitnessSpec {
    pub fn new(alpha: f64, t: f64) -> Self {
        Self { alpha, t, alpha_threshold: 0.01 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= self.alpha_threshold) {
            return Err(config(format!(
                "witness alpha = {} must lie in (0, {}]",
                self.alpha, self.alpha_threshold
            )));
        }
        if !(self.t > 0.0 && self.t < 1.0) {
            return Err(config(format!("witness exponent t = {} must lie in (0, 1)", self.t)));
        }
        Ok(())
    }

    /// Magnitude of the non-zero support points of `x`.
    pub fn support_magnitude(&self) -> f64 {
        0.01 * self.alpha.powf(-1.0 / (2.0 + self.t)) + pareto_offset(self.t)
    }
}

/// Draws `m` samples of `x` (symmetric, atom `alpha` at zero) and of `y` (recentered Pareto).
pub fn median_tightness_witness(spec: &WitnessSpec, m: usize, seed: u64) -> Result<(SampleBatch, SampleBatch)> {
    spec.validate()?;
    let mag = spec.support_magnitude();
    let mut rx = stream_rng(seed, streams::WITNESS_X);
    let x = (0..m)
        .map(|_| {
            if rx.random::<f64>() < spec.alpha {
                0.0
            } else if rx.random::<bool>() {
                mag
            } else {
                -mag
            }
        })
        .collect();
    let obs = ObservationNoiseSpec::RecenteredPareto { t: spec.t };
    let mut ry = stream_rng(seed, streams::WITNESS_Y);
    let y = (0..m).map(|_| obs.draw(&mut ry)).collect();
    Ok((SampleBatch::from_scalars(x), SampleBatch::from_scalars(y)))
}

/// Samples of `x + ξ` where coordinate `i` of `x` is `s_i` w.p. `1/d` (else 0) and `ξ` is an
/// independent draw of `−x`. The law of the sum does not depend on `s`.
pub fn hardness_pair(d: usize, s: &[i8], m: usize, seed: u64) -> Result<SampleBatch> {
    if d == 0 {
        return Err(config("hardness dimension must be at least 1"));
    }
    if s.len() != d {
        return Err(config(format!("sign vector has length {}, expected {d}", s.len())));
    }
    if s.iter().any(|v| *v != 1 && *v != -1) {
        return Err(config("sign vector entries must be +1 or -1"));
    }
    let p = 1.0 / d as f64;
    let mut rng = stream_rng(seed, streams::HARDNESS);
    let mut data = Vec::with_capacity(d * m);
    for _ in 0..m {
        for &si in s {
            let x = if rng.random::<f64>() < p { si as f64 } else { 0.0 };
            let xi = if rng.random::<f64>() < p { -(si as f64) } else { 0.0 };
            data.push(x + xi);
        }
    }
    SampleBatch::new(d, data)
}
