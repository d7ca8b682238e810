//! Smooth synthetic objectives used to drive the learner and the simulated oracle.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::rng::stream_rng;

/// An L-smooth objective with a global minimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SmoothObjective {
    /// `f(x) = ½ Σ sᵢ (xᵢ − cᵢ)²`.
    Quadratic { center: Vec<f64>, scaling: Vec<f64> },
    /// Two-dimensional `(1 − x)² + b (y − x²)²`.
    ///
    /// Not globally smooth, so the smoothness constant is a bound over the box
    /// `|x|, |y| ≤ box_radius`; iterates are expected to stay in that box.
    RosenbrockLike { curvature: f64, box_radius: f64 },
    /// Ridge-regularized logistic loss `(1/n) Σ log(1 + exp(−yᵢ aᵢ·x)) + (λ/2)‖x‖²`.
    LogisticSum { features: Vec<Vec<f64>>, labels: Vec<f64>, ridge: f64 },
}

impl SmoothObjective {
    pub fn quadratic(center: Vec<f64>) -> Self {
        let scaling = vec![1.0; center.len()];
        Self::Quadratic { center, scaling }
    }

    pub fn rosenbrock_like() -> Self {
        Self::RosenbrockLike { curvature: 1.0, box_radius: 2.0 }
    }

    /// Logistic problem on `n` Gaussian feature vectors with labels from a random separator.
    pub fn logistic_synthetic(n: usize, dim: usize, ridge: f64, seed: u64) -> Self {
        let mut rng = stream_rng(seed, 0);
        let w: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let mut features = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let a: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            let margin: f64 = a.iter().zip(&w).map(|(x, y)| x * y).sum();
            let flip = rng.random::<f64>() < 0.1;
            labels.push(if (margin >= 0.0) ^ flip { 1.0 } else { -1.0 });
            features.push(a);
        }
        Self::LogisticSum { features, labels, ridge }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Quadratic { center, scaling } => {
                if center.is_empty() || center.len() != scaling.len() {
                    return Err(config("quadratic center and scaling must be nonempty and equal length"));
                }
                if scaling.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
                    return Err(config("quadratic scaling entries must be positive"));
                }
            }
            Self::RosenbrockLike { curvature, box_radius } => {
                if !(*curvature > 0.0) || !(*box_radius > 0.0) {
                    return Err(config("rosenbrock curvature and box radius must be positive"));
                }
            }
            Self::LogisticSum { features, labels, ridge } => {
                if features.is_empty() || features.len() != labels.len() {
                    return Err(config("logistic dataset must be nonempty with one label per row"));
                }
                let d = features[0].len();
                if d == 0 || features.iter().any(|f| f.len() != d) {
                    return Err(config("logistic feature rows must share a positive dimension"));
                }
                if !(*ridge > 0.0) {
                    return Err(config("logistic ridge must be positive so a minimum exists"));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Quadratic { center, .. } => center.len(),
            Self::RosenbrockLike { .. } => 2,
            Self::LogisticSum { features, .. } => features[0].len(),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Self::Quadratic { center, scaling } => {
                0.5 * x.iter().zip(center).zip(scaling).map(|((x, c), s)| s * (x - c) * (x - c)).sum::<f64>()
            }
            Self::RosenbrockLike { curvature, .. } => {
                let (a, b) = (x[0], x[1]);
                (1.0 - a).powi(2) + curvature * (b - a * a).powi(2)
            }
            Self::LogisticSum { features, labels, ridge } => {
                let n = features.len() as f64;
                let loss: f64 = features
                    .iter()
                    .zip(labels)
                    .map(|(a, y)| {
                        let z = -y * dot(a, x);
                        // log(1 + e^z) without overflow
                        if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() }
                    })
                    .sum();
                loss / n + 0.5 * ridge * dot(x, x)
            }
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Self::Quadratic { center, scaling } => {
                x.iter().zip(center).zip(scaling).map(|((x, c), s)| s * (x - c)).collect()
            }
            Self::RosenbrockLike { curvature, .. } => {
                let (a, b) = (x[0], x[1]);
                let r = b - a * a;
                vec![-2.0 * (1.0 - a) - 4.0 * curvature * a * r, 2.0 * curvature * r]
            }
            Self::LogisticSum { features, labels, ridge } => {
                let n = features.len() as f64;
                let mut g: Vec<f64> = x.iter().map(|v| ridge * v).collect();
                for (a, y) in features.iter().zip(labels) {
                    let z = -y * dot(a, x);
                    let s = 1.0 / (1.0 + (-z).exp());
                    for (gi, ai) in g.iter_mut().zip(a) {
                        *gi -= y * ai * s / n;
                    }
                }
                g
            }
        }
    }

    /// Lipschitz constant of the gradient.
    pub fn smoothness(&self) -> f64 {
        match self {
            Self::Quadratic { scaling, .. } => scaling.iter().cloned().fold(0.0, f64::max),
            Self::RosenbrockLike { curvature, box_radius } => {
                let (b, r) = (*curvature, *box_radius);
                let h11 = 2.0 + 4.0 * b * r + 12.0 * b * r * r;
                let h12 = 4.0 * b * r;
                let h22 = 2.0 * b;
                (h11 * h11 + 2.0 * h12 * h12 + h22 * h22).sqrt()
            }
            Self::LogisticSum { features, ridge, .. } => {
                let n = features.len() as f64;
                features.iter().map(|a| dot(a, a)).sum::<f64>() / (4.0 * n) + ridge
            }
        }
    }

    /// Known minimizer, when it has a closed form.
    pub fn optimum(&self) -> Option<Vec<f64>> {
        match self {
            Self::Quadratic { center, .. } => Some(center.clone()),
            Self::RosenbrockLike { .. } => Some(vec![1.0, 1.0]),
            Self::LogisticSum { .. } => None,
        }
    }

    pub(crate) fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    fn families() -> Vec<SmoothObjective> {
        vec![
            SmoothObjective::Quadratic { center: vec![1.0, -2.0, 0.5], scaling: vec![1.0, 3.0, 0.5] },
            SmoothObjective::rosenbrock_like(),
            SmoothObjective::logistic_synthetic(50, 3, 0.1, 4),
        ]
    }

    fn random_point(rng: &mut impl Rng, d: usize, radius: f64) -> Vec<f64> {
        (0..d).map(|_| rng.random_range(-radius..radius)).collect()
    }

    #[test]
    fn gradients_match_central_differences() {
        let mut rng = stream_rng(11, 0);
        for f in families() {
            f.validate().unwrap();
            let d = f.dim();
            for _ in 0..100 {
                let x = random_point(&mut rng, d, 1.8);
                let g = f.gradient(&x);
                let h = 1e-6;
                for i in 0..d {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[i] += h;
                    xm[i] -= h;
                    let fd = (f.value(&xp) - f.value(&xm)) / (2.0 * h);
                    let scale = g[i].abs().max(1.0);
                    assert!((fd - g[i]).abs() / scale < 1e-6, "{f:?} coord {i}: {fd} vs {}", g[i]);
                }
            }
        }
    }

    #[test]
    fn smoothness_bound_holds_on_sampled_pairs() {
        let mut rng = stream_rng(12, 0);
        for f in families() {
            let d = f.dim();
            let l = f.smoothness();
            for _ in 0..1000 {
                let x = random_point(&mut rng, d, 2.0);
                let y = random_point(&mut rng, d, 2.0);
                let gx = f.gradient(&x);
                let gy = f.gradient(&y);
                let dg = crate::batch::distance(&gx, &gy);
                let dx = crate::batch::distance(&x, &y);
                assert!(dg <= 1.05 * l * dx, "{f:?}: {dg} > {l}·{dx}");
            }
        }
    }

    #[test]
    fn validation_rejects_bad_objectives() {
        assert!(SmoothObjective::Quadratic { center: vec![1.0], scaling: vec![0.0] }.validate().is_err());
        assert!(SmoothObjective::Quadratic { center: vec![], scaling: vec![] }.validate().is_err());
        assert!(SmoothObjective::LogisticSum { features: vec![vec![1.0]], labels: vec![1.0], ridge: 0.0 }
            .validate()
            .is_err());
    }
}
