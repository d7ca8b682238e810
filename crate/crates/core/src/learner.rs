//! Gradient descent with inexact gradients.
//!
//! The gradient source may be off by up to `beta` in norm. The run returns the
//! visited point with the smallest observed gradient norm.

use serde::{Deserialize, Serialize};

pub use crate::objective::SmoothObjective;

use crate::batch::norm;
use crate::error::{config, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerConfig {
    /// Lipschitz constant of the gradient.
    pub smoothness: f64,
    /// Upper bound on `f(x₀) − min f`.
    pub f_bound: f64,
    /// Gradient error tolerated from the source.
    pub beta: f64,
    /// Target accuracy on top of `beta`.
    pub epsilon: f64,
    pub c_g: f64,
    /// `None` uses `1/(2L)`.
    pub step_size: Option<f64>,
    /// `None` uses `⌈c_g·L·F/(beta + epsilon)²⌉`.
    pub max_iters: Option<usize>,
    /// Keep every iterate in the outcome.
    pub keep_iterates: bool,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            smoothness: 1.0,
            f_bound: 1.0,
            beta: 0.0,
            epsilon: 1e-3,
            c_g: 8.0,
            step_size: None,
            max_iters: None,
            keep_iterates: false,
        }
    }
}

impl LearnerConfig {
    pub fn new(smoothness: f64, f_bound: f64, beta: f64, epsilon: f64) -> Self {
        Self { smoothness, f_bound, beta, epsilon, ..Self::default() }
    }

    pub fn step(&self) -> f64 {
        self.step_size.unwrap_or(0.5 / self.smoothness)
    }

    pub fn iterations(&self) -> usize {
        self.max_iters.unwrap_or_else(|| {
            let t = self.c_g * self.smoothness * self.f_bound / (self.beta + self.epsilon).powi(2);
            if t.is_finite() { (t.ceil() as usize).max(1) } else { usize::MAX }
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.smoothness > 0.0) || !self.smoothness.is_finite() {
            return Err(config("smoothness must be positive"));
        }
        let h = self.step();
        if !(h > 0.0 && h <= 1.0 / self.smoothness) {
            return Err(config(format!("step size {h} must lie in (0, 1/L]")));
        }
        if self.max_iters.is_none() {
            if !(self.f_bound > 0.0) || !(self.beta >= 0.0) || !(self.epsilon > 0.0) {
                return Err(config("iteration rule needs F > 0, beta ≥ 0 and epsilon > 0"));
            }
            if self.iterations() == usize::MAX {
                return Err(config("iteration rule overflows; set max_iters"));
            }
        }
        if self.iterations() == 0 {
            return Err(config("max_iters must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerOutcome {
    /// Iterate with the smallest observed gradient norm.
    pub best_point: Vec<f64>,
    pub best_observed_norm: f64,
    pub best_iteration: usize,
    /// Point after the last update.
    pub last_point: Vec<f64>,
    /// Gradient requests made.
    pub iterations: usize,
    /// `x₀, x₁, …` when requested.
    pub iterates: Vec<Vec<f64>>,
}

/// Descent state advanced one observed gradient at a time.
#[derive(Debug, Clone)]
pub struct GdState {
    x: Vec<f64>,
    step: f64,
    remaining: usize,
    iteration: usize,
    best: Option<(Vec<f64>, f64, usize)>,
    keep: bool,
    iterates: Vec<Vec<f64>>,
}

impl GdState {
    pub fn new(x0: Vec<f64>, cfg: &LearnerConfig) -> Result<Self> {
        cfg.validate()?;
        if let Some(i) = x0.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical { iteration: 0, reason: format!("start coordinate {i} is not finite") });
        }
        let iterates = if cfg.keep_iterates { vec![x0.clone()] } else { Vec::new() };
        Ok(Self {
            x: x0,
            step: cfg.step(),
            remaining: cfg.iterations(),
            iteration: 0,
            best: None,
            keep: cfg.keep_iterates,
            iterates,
        })
    }

    pub fn point(&self) -> &[f64] {
        &self.x
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn is_done(&self) -> bool {
        self.remaining == 0
    }

    /// Records gradient `g` observed at the current point and takes a step.
    pub fn observe(&mut self, g: &[f64]) -> Result<()> {
        if g.len() != self.x.len() {
            return Err(Error::DimensionMismatch { expected: self.x.len(), got: g.len() });
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical { iteration: self.iteration, reason: "gradient is not finite".into() });
        }
        let gn = norm(g);
        if self.best.as_ref().is_none_or(|b| gn < b.1) {
            self.best = Some((self.x.clone(), gn, self.iteration));
        }
        for (x, g) in self.x.iter_mut().zip(g) {
            *x -= self.step * g;
        }
        self.iteration += 1;
        self.remaining = self.remaining.saturating_sub(1);
        if self.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical { iteration: self.iteration, reason: "iterate is not finite".into() });
        }
        if self.keep {
            self.iterates.push(self.x.clone());
        }
        Ok(())
    }

    pub fn finish(self) -> LearnerOutcome {
        let (best_point, best_observed_norm, best_iteration) =
            self.best.unwrap_or_else(|| (self.x.clone(), f64::INFINITY, 0));
        LearnerOutcome {
            best_point,
            best_observed_norm,
            best_iteration,
            last_point: self.x,
            iterations: self.iteration,
            iterates: self.iterates,
        }
    }
}

/// Runs descent from `x0` with gradients from `grad_source` (called with the point and
/// the iteration index).
pub fn inexact_gd<G>(dim: usize, mut grad_source: G, x0: &[f64], cfg: &LearnerConfig) -> Result<LearnerOutcome>
where
    G: FnMut(&[f64], usize) -> Result<Vec<f64>>,
{
    if x0.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: x0.len() });
    }
    let mut state = GdState::new(x0.to_vec(), cfg)?;
    while !state.is_done() {
        let g = grad_source(state.point(), state.iteration())?;
        state.observe(&g)?;
    }
    Ok(state.finish())
}
