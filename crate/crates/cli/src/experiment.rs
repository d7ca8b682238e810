//! One result row per (sweep point, seed).

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use oblivion_core::batch::{distance, norm, SampleBatch};
use oblivion_core::ldme::ldme_subsample;
use oblivion_core::ldso::{mean_est_via_noisy_grad_desc, noisy_grad_desc};
use oblivion_core::noise::{
    make_oracle, median_tightness_witness, sample_oblivious, sample_oblivious_vectors, sample_observation,
    sample_observation_vectors, ObservationNoiseSpec, WitnessSpec,
};
use oblivion_core::objective::SmoothObjective;
use oblivion_core::rng::derive_seed;
use oblivion_core::shift1d::shift1d;
use oblivion_core::shifthd::shift_highd;
use oblivion_core::stats::median;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, ExperimentKind, ObjectiveKind, Point};
use crate::error::CliResult;

/// Outcome of one run; `error` is NaN when the run failed.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub seed: u64,
    pub point: Point,
    /// Batch size actually used, when the kind has one.
    pub m: Option<usize>,
    pub error: f64,
    pub queries: u64,
    pub flags: Vec<String>,
    pub wall_seconds: f64,
}

impl ResultRow {
    /// Failed runs and non-finite errors.
    pub fn is_flagged(&self) -> bool {
        !self.error.is_finite()
    }
}

struct Measured {
    error: f64,
    m: Option<usize>,
    queries: u64,
    flags: Vec<String>,
}

/// Runs every (point, seed) pair on the current rayon pool; rows come back in
/// point-major, seed-minor order.
pub fn run_all(cfg: &ExperimentConfig, seeds: &[u64]) -> CliResult<Vec<ResultRow>> {
    let points = cfg.points()?;
    let id = cfg.experiment_id();
    let jobs: Vec<(Point, u64)> = points.iter().flat_map(|p| seeds.iter().map(move |s| (*p, *s))).collect();
    Ok(jobs.par_iter().map(|(p, s)| run_row(cfg, &id, p, *s)).collect())
}

/// One row; errors and panics are recorded in the row's flags.
pub fn run_row(cfg: &ExperimentConfig, id: &str, p: &Point, seed: u64) -> ResultRow {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(|| measure(cfg, p, seed)));
    let wall_seconds = start.elapsed().as_secs_f64();
    let (error, m, queries, mut flags) = match outcome {
        Ok(Ok(r)) => (r.error, r.m, r.queries, r.flags),
        Ok(Err(e)) => (f64::NAN, p.m, 0, vec![format!("error: {e}")]),
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (f64::NAN, p.m, 0, vec![format!("panic: {msg}")])
        }
    };
    if !error.is_finite() && flags.is_empty() {
        flags.push("nonfinite".into());
    }
    ResultRow { experiment: id.to_string(), seed, point: *p, m, error, queries, flags, wall_seconds }
}

fn measure(cfg: &ExperimentConfig, p: &Point, seed: u64) -> Result<Measured, Box<dyn std::error::Error>> {
    let obs = cfg.observation_noise()?;
    match cfg.kind {
        ExperimentKind::Witness => {
            let m = p.m.unwrap_or(1);
            let (x, y) = median_tightness_witness(&WitnessSpec::new(p.alpha, p.t), m, seed)?;
            let sums: Vec<f64> = x.as_slice().iter().zip(y.as_slice()).map(|(a, b)| a + b).collect();
            Ok(Measured { error: median(&sums)?, m: Some(m), queries: 2 * m as u64, flags: Vec::new() })
        }
        ExperimentKind::Shift1d => {
            let m = p.m.unwrap_or(1);
            let noise = cfg.oblivious_noise(p.alpha)?;
            let draw = |k: u64, shift: f64| -> oblivion_core::Result<SampleBatch> {
                let xi = sample_oblivious(&noise, m, derive_seed(seed, &[k]))?;
                let y = sample_observation(&obs, m, derive_seed(seed, &[k + 1]))?;
                Ok(SampleBatch::from_scalars(xi.as_slice().iter().zip(y.as_slice()).map(|(a, b)| a + b + shift).collect()))
            };
            let (s1, s2) = (draw(1, p.t)?, draw(3, 0.0)?);
            let est = shift1d(&s1, &s2, &cfg.shift_config(p), derive_seed(seed, &[5]))?;
            let mut flags = Vec::new();
            if est.rough_only {
                flags.push("rough_only".into());
            }
            if est.fallback_rounds() > 0 {
                flags.push(format!("fallback_rounds={}", est.fallback_rounds()));
            }
            Ok(Measured { error: (est.value - p.t).abs(), m: Some(m), queries: 2 * m as u64, flags })
        }
        ExperimentKind::Shifthd => {
            let m = p.m.unwrap_or(1);
            let noise = cfg.oblivious_noise(p.alpha)?;
            let v = direction(p.d, p.t, derive_seed(seed, &[9]))?;
            let draw = |k: u64| -> oblivion_core::Result<SampleBatch> {
                let xi = sample_oblivious_vectors(&noise, p.d, m, derive_seed(seed, &[k]))?;
                let y = sample_observation_vectors(&obs, p.d, m, derive_seed(seed, &[k + 1]))?;
                SampleBatch::new(p.d, add(xi.as_slice(), y.as_slice()))
            };
            let (s1, s2) = (draw(1)?.translated(&v), draw(3)?);
            let est = shift_highd(&s1, &s2, &cfg.shift_config(p), &cfg.amplify_config(), derive_seed(seed, &[5]))?;
            let flags = if est.succeeded { Vec::new() } else { vec!["quorum_failed".into()] };
            Ok(Measured { error: distance(&est.value, &v), m: Some(m), queries: 2 * m as u64, flags })
        }
        ExperimentKind::Ldme => {
            let m = p.m.unwrap_or(1);
            let mu = direction(p.d, p.t, derive_seed(seed, &[9]))?;
            let samples = contaminated(cfg, p, &obs, &mu, m, seed)?;
            let ldme = cfg.ldme_config(p);
            let list = ldme_subsample(&samples, &ldme, derive_seed(seed, &[5]))?;
            let flags = if list.capped { vec![format!("capped:confidence={:.3e}", ldme.achieved_confidence())] } else { Vec::new() };
            let error = list.closest(&mu).map_or(f64::NAN, |c| c.1);
            Ok(Measured { error, m: Some(m), queries: m as u64, flags })
        }
        ExperimentKind::Ldso => {
            let ldso = cfg.ldso_config(p);
            let f = match cfg.params.objective {
                ObjectiveKind::Quadratic => SmoothObjective::quadratic(direction(p.d, p.t, derive_seed(seed, &[9]))?),
                ObjectiveKind::Logistic => SmoothObjective::logistic_synthetic(200, p.d, 0.1, derive_seed(seed, &[9])),
            };
            let mut oracle = make_oracle(f.clone(), cfg.oblivious_noise(p.alpha)?, obs)?;
            let out = noisy_grad_desc(&mut oracle, &ldso, derive_seed(seed, &[5]))?;
            let error = out
                .paths
                .iter()
                .filter(|path| path.failure.is_none())
                .map(|path| norm(&f.gradient(&path.final_point)))
                .fold(f64::INFINITY, f64::min);
            let mut flags = Vec::new();
            if out.failed_paths() > 0 {
                flags.push(format!("failed_paths={}", out.failed_paths()));
            }
            if out.initial.capped {
                flags.push("capped".into());
            }
            Ok(Measured { error, m: Some(ldso.shift_batch(p.d)?), queries: out.samples_used, flags })
        }
        ExperimentKind::Roundtrip => {
            let m = p.m.unwrap_or(1);
            let mu = direction(p.d, p.t, derive_seed(seed, &[9]))?;
            let samples = contaminated(cfg, p, &obs, &mu, m, seed)?;
            let est = mean_est_via_noisy_grad_desc(&samples, &cfg.ldso_config(p), cfg.params.allow_replay, derive_seed(seed, &[5]))?;
            let error = est.list.closest(&mu).map_or(f64::NAN, |c| c.1);
            let flags = if est.replays > 0 { vec![format!("replays={}", est.replays)] } else { Vec::new() };
            Ok(Measured { error, m: Some(m), queries: est.samples_served, flags })
        }
    }
}

/// Samples of `μ + y + ξ`.
fn contaminated(
    cfg: &ExperimentConfig,
    p: &Point,
    obs: &ObservationNoiseSpec,
    mu: &[f64],
    m: usize,
    seed: u64,
) -> Result<SampleBatch, Box<dyn std::error::Error>> {
    let noise = cfg.oblivious_noise(p.alpha)?;
    let xi = sample_oblivious_vectors(&noise, p.d, m, derive_seed(seed, &[1]))?;
    let y = sample_observation_vectors(obs, p.d, m, derive_seed(seed, &[2]))?;
    Ok(SampleBatch::new(p.d, add(xi.as_slice(), y.as_slice()))?.translated(mu))
}

/// Uniformly random vector of norm `length`.
fn direction(d: usize, length: f64, seed: u64) -> oblivion_core::Result<Vec<f64>> {
    let g = sample_observation_vectors(&ObservationNoiseSpec::Gaussian { sigma: 1.0 }, d, 1, seed)?;
    let n = norm(g.row(0));
    Ok(g.row(0).iter().map(|x| x * length / n).collect())
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}
