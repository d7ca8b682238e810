//! Browser demo: three estimators behind JSON-returning exports.
//!
//! Build with `wasm-pack build crates/demo --target web --out-dir www/pkg` and
//! serve `crates/demo/www`.

use oblivion_core::batch::{norm, SampleBatch};
use oblivion_core::ldme::{ldme_subsample, LdmeConfig};
use oblivion_core::noise::{
    median_tightness_witness, sample_oblivious, sample_oblivious_vectors, sample_observation, sample_observation_vectors,
    ObliviousNoiseSpec, ObservationNoiseSpec, TailSpec, WitnessSpec,
};
use oblivion_core::rng::derive_seed;
use oblivion_core::shift1d::{shift1d, Shift1DConfig};
use oblivion_core::stats::median;
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest batch the page may request.
pub const MAX_SAMPLES: usize = 200_000;
const BINS: usize = 80;

fn two_point(alpha: f64) -> ObliviousNoiseSpec {
    ObliviousNoiseSpec::new(alpha, TailSpec::TwoPoint { magnitude: 1e3 })
}

fn unit_gaussian() -> ObservationNoiseSpec {
    ObservationNoiseSpec::Gaussian { sigma: 1.0 }
}

fn check_size(m: usize) -> oblivion_core::Result<()> {
    if m > MAX_SAMPLES {
        return Err(oblivion_core::Error::Argument(format!("at most {MAX_SAMPLES} samples in the demo")));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct Histogram {
    pub lo: f64,
    pub width: f64,
    pub first: Vec<u32>,
    pub second: Vec<u32>,
}

impl Histogram {
    fn new(lo: f64, hi: f64, first: &[f64], second: &[f64]) -> Self {
        let width = (hi - lo) / BINS as f64;
        let count = |xs: &[f64]| {
            let mut bins = vec![0u32; BINS];
            for x in xs {
                let b = ((x - lo) / width).floor();
                if b >= 0.0 && b < BINS as f64 {
                    bins[b as usize] += 1;
                }
            }
            bins
        };
        Self { lo, width, first: count(first), second: count(second) }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RoundView {
    pub scale: f64,
    pub k: Option<usize>,
    pub radius: Option<f64>,
    pub estimate: f64,
    pub skipped: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ShiftDemo {
    pub truth: f64,
    pub estimate: f64,
    pub rough: f64,
    pub error: f64,
    /// Median of `S1` minus median of `S2`, for comparison.
    pub median_gap: f64,
    pub rounds: Vec<RoundView>,
    /// Counts near the shift; the ±1000 noise lies off this window.
    pub histogram: Histogram,
}

/// Estimates `t` from `ξ + y + t` and `ξ̃ + y'` with two-point `ξ` and Gaussian `y`.
pub fn shift_demo(alpha: f64, eta: f64, t: f64, m: usize, seed: u64) -> oblivion_core::Result<ShiftDemo> {
    check_size(m)?;
    let draw = |k: u64, shift: f64| -> oblivion_core::Result<Vec<f64>> {
        let xi = sample_oblivious(&two_point(alpha), m, derive_seed(seed, &[k]))?;
        let y = sample_observation(&unit_gaussian(), m, derive_seed(seed, &[k + 1]))?;
        Ok(xi.as_slice().iter().zip(y.as_slice()).map(|(a, b)| a + b + shift).collect())
    };
    let (s1, s2) = (draw(1, t)?, draw(3, 0.0)?);
    let cfg = Shift1DConfig::new(eta, alpha, 1.0);
    let est = shift1d(&SampleBatch::from_scalars(s1.clone()), &SampleBatch::from_scalars(s2.clone()), &cfg, seed)?;
    let rounds = est
        .trace
        .iter()
        .map(|r| RoundView {
            scale: r.scale,
            k: r.step.as_ref().map(|s| s.k),
            radius: r.step.as_ref().map(|s| s.radius),
            estimate: r.estimate,
            skipped: r.skipped,
        })
        .collect();
    let (lo, hi) = (t.min(0.0) - 6.0, t.max(0.0) + 6.0);
    Ok(ShiftDemo {
        truth: t,
        estimate: est.value,
        rough: est.rough,
        error: (est.value - t).abs(),
        median_gap: median(&s1)? - median(&s2)?,
        rounds,
        histogram: Histogram::new(lo, hi, &s1, &s2),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct WitnessPoint {
    pub alpha: f64,
    pub median: f64,
    /// `0.005·alpha^{-1/(2+t)}`, the growth the median should keep up with.
    pub reference: f64,
}

/// Median of `x + y` for the tightness construction over `points` values of alpha
/// spaced evenly in log scale from `1e-2` to `1e-4`.
pub fn witness_curve(t: f64, m: usize, points: usize, seed: u64) -> oblivion_core::Result<Vec<WitnessPoint>> {
    check_size(m)?;
    let n = points.max(2);
    (0..n)
        .map(|i| {
            let alpha = 10f64.powf(-2.0 - 2.0 * i as f64 / (n - 1) as f64);
            let (x, y) = median_tightness_witness(&WitnessSpec::new(alpha, t), m, derive_seed(seed, &[i as u64]))?;
            let sums: Vec<f64> = x.as_slice().iter().zip(y.as_slice()).map(|(a, b)| a + b).collect();
            Ok(WitnessPoint { alpha, median: median(&sums)?, reference: 0.005 * alpha.powf(-1.0 / (2.0 + t)) })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct LdmeDemo {
    pub mean: [f64; 2],
    /// Up to 500 samples within 10 of the mean.
    pub samples: Vec<[f64; 2]>,
    pub candidates: Vec<[f64; 2]>,
    pub best: usize,
    pub best_error: f64,
    pub capped: bool,
}

/// Candidate means for two-dimensional samples with a zero atom of mass `alpha`.
pub fn ldme_demo(alpha: f64, eta: f64, m: usize, cap: usize, seed: u64) -> oblivion_core::Result<LdmeDemo> {
    check_size(m)?;
    let g = sample_observation_vectors(&unit_gaussian(), 2, 1, derive_seed(seed, &[9]))?;
    let mean = [2.0 * g.row(0)[0] / norm(g.row(0)), 2.0 * g.row(0)[1] / norm(g.row(0))];
    let xi = sample_oblivious_vectors(&two_point(alpha), 2, m, derive_seed(seed, &[1]))?;
    let y = sample_observation_vectors(&unit_gaussian(), 2, m, derive_seed(seed, &[2]))?;
    let data: Vec<f64> = xi.as_slice().iter().zip(y.as_slice()).map(|(a, b)| a + b).collect();
    let samples = SampleBatch::new(2, data)?.translated(&mean);
    let cfg = LdmeConfig::new(alpha, eta, 0.05).with_repeats_cap(cap.clamp(1, 5000));
    let list = ldme_subsample(&samples, &cfg, derive_seed(seed, &[3]))?;
    let (best, best_error) = list.closest(&mean).unwrap_or((0, f64::NAN));
    let near = samples
        .rows()
        .filter(|r| (r[0] - mean[0]).abs() < 10.0 && (r[1] - mean[1]).abs() < 10.0)
        .take(500)
        .map(|r| [r[0], r[1]])
        .collect();
    Ok(LdmeDemo {
        mean,
        samples: near,
        candidates: list.candidates().iter().map(|c| [c[0], c[1]]).collect(),
        best,
        best_error,
        capped: list.capped,
    })
}

fn to_json<T: Serialize>(r: oblivion_core::Result<T>) -> Result<String, JsError> {
    let value = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn shift1d_json(alpha: f64, eta: f64, t: f64, m: usize, seed: u64) -> Result<String, JsError> {
    to_json(shift_demo(alpha, eta, t, m, seed))
}

#[wasm_bindgen]
pub fn witness_json(t: f64, m: usize, points: usize, seed: u64) -> Result<String, JsError> {
    to_json(witness_curve(t, m, points, seed))
}

#[wasm_bindgen]
pub fn ldme_json(alpha: f64, eta: f64, m: usize, cap: usize, seed: u64) -> Result<String, JsError> {
    to_json(ldme_demo(alpha, eta, m, cap, seed))
}
