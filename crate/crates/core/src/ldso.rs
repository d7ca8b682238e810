//! List-decodable stochastic optimization and its reduction to mean estimation.
//!
//! [`noisy_grad_desc`] builds a candidate list for `∇f(0)` from one anchor batch,
//! then runs one descent path per candidate. At a point `x`, path `i` uses
//! `gᵢ + v` as its gradient, where `v` estimates `∇f(x) − ∇f(0)` by high-dimensional
//! location estimation between a batch at `x` and the anchor batch. The path started
//! from an accurate candidate sees gradients with error `O(ησ)` throughout.
//!
//! [`mean_est_via_ldso`] goes the other way: stored samples `p` answer a query at `x`
//! with `x + p`, which is a gradient oracle for `½‖x + μ‖²`, so negated solver output
//! estimates `μ`.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::batch::{norm, SampleBatch};
use crate::error::{argument, config, Error, Result};
use crate::ldme::{list_decode, CandidateList, LdmeConfig, Provenance};
use crate::learner::{GdState, LearnerConfig};
use crate::noise::GradientOracle;
use crate::par::par_map;
use crate::rng::{derive_seed, stream_rng, streams};
use crate::shift1d::Shift1DConfig;
use crate::shifthd::{shift_highd, AmplifyConfig, ShiftHdEstimate, ShiftReference};

/// Paths whose queries are held in memory at once.
const PATH_CHUNK: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdsoConfig {
    pub eta: f64,
    pub alpha: f64,
    pub sigma: f64,
    pub delta: f64,
    /// Anchor batch size at 0; `None` uses `max(m_shift, 1000)`.
    pub m_anchor: Option<usize>,
    /// Batch size per shift estimate; `None` uses the per-coordinate minimum.
    pub m_shift: Option<usize>,
    /// Reuse the anchor batch for every shift estimate instead of re-querying 0.
    pub cache_anchor: bool,
    /// Paths whose iterate leaves this ball are abandoned.
    pub divergence_bound: f64,
    pub learner: LearnerConfig,
    pub ldme: LdmeConfig,
    pub shift: Shift1DConfig,
    pub amplify: AmplifyConfig,
}

impl LdsoConfig {
    pub fn new(eta: f64, alpha: f64, sigma: f64, delta: f64, learner: LearnerConfig) -> Self {
        Self {
            eta,
            alpha,
            sigma,
            delta,
            m_anchor: None,
            m_shift: None,
            cache_anchor: true,
            divergence_bound: 1e9,
            learner,
            ldme: LdmeConfig::new(alpha, eta, delta),
            shift: Shift1DConfig { eta, alpha, sigma, delta, ..Shift1DConfig::default() },
            amplify: AmplifyConfig::from_delta(delta),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.learner.validate()?;
        self.ldme.validate()?;
        self.shift.validate()?;
        self.amplify.validate()?;
        if !(self.divergence_bound > 0.0) {
            return Err(config("divergence_bound must be positive"));
        }
        Ok(())
    }

    /// Smallest shift batch the per-coordinate estimator accepts in `d` dimensions.
    pub fn min_shift_batch(&self, d: usize) -> Result<usize> {
        self.amplify.coordinate_config(&self.shift, d).min_samples()
    }

    pub fn shift_batch(&self, d: usize) -> Result<usize> {
        let min = self.min_shift_batch(d)?;
        match self.m_shift {
            Some(m) if m < min => Err(Error::InsufficientSamples { got: m, required: min }),
            Some(m) => Ok(m),
            None => Ok(min),
        }
    }

    pub fn anchor_batch(&self, d: usize) -> Result<usize> {
        let shift = self.shift_batch(d)?;
        let anchor = self.m_anchor.unwrap_or(shift.max(1000));
        if self.cache_anchor && anchor < shift {
            return Err(config(format!("cached anchor of {anchor} samples is smaller than the shift batch {shift}")));
        }
        Ok(anchor)
    }
}

/// `L0 + v` at `x`, with `v` estimating `∇f(x) − ∇f(0)`.
///
/// With `anchor = None` the oracle is queried at 0 for a fresh anchor batch.
pub fn inexact_oracle<O: GradientOracle + ?Sized>(
    x: &[f64],
    oracle: &mut O,
    l0: &CandidateList,
    cfg: &LdsoConfig,
    anchor: Option<&SampleBatch>,
    seed: u64,
) -> Result<(CandidateList, ShiftHdEstimate)> {
    let d = oracle.dim();
    if x.len() != d || l0.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: if x.len() != d { x.len() } else { l0.dim() } });
    }
    let m = cfg.shift_batch(d)?;
    let at_x = oracle.query(x, m, derive_seed(seed, &[0]))?;
    let fresh;
    let at_zero = match anchor {
        Some(a) => a,
        None => {
            fresh = oracle.query(&vec![0.0; d], m, derive_seed(seed, &[1]))?;
            &fresh
        }
    };
    let est = shift_highd(&at_x, &prefix(at_zero, m)?, &cfg.shift, &cfg.amplify, derive_seed(seed, &[2]))?;
    Ok((l0.translated(&est.value), est))
}

fn prefix(batch: &SampleBatch, m: usize) -> Result<SampleBatch> {
    if batch.len() < m {
        return Err(Error::InsufficientSamples { got: batch.len(), required: m });
    }
    if batch.len() == m {
        return Ok(batch.clone());
    }
    SampleBatch::new(batch.dim(), batch.as_slice()[..m * batch.dim()].to_vec())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathOutcome {
    pub index: usize,
    pub start: Vec<f64>,
    /// Learner output, or the last finite iterate of a failed path.
    pub final_point: Vec<f64>,
    pub best_observed_norm: f64,
    pub iterations: usize,
    pub failure: Option<String>,
    pub iterates: Vec<Vec<f64>>,
}

/// One gradient served to one path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub path: usize,
    pub shift_norm: f64,
    pub shift_succeeded: bool,
    pub grad_norm: f64,
    /// `‖g − ∇f(x)‖` when the oracle exposes its true gradient.
    pub true_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdsoOutcome {
    pub initial: CandidateList,
    pub paths: Vec<PathOutcome>,
    pub trace: Vec<StepRecord>,
    pub samples_used: u64,
    pub steps: usize,
}

impl LdsoOutcome {
    pub fn final_points(&self) -> Vec<Vec<f64>> {
        self.paths.iter().map(|p| p.final_point.clone()).collect()
    }

    pub fn failed_paths(&self) -> usize {
        self.paths.iter().filter(|p| p.failure.is_some()).count()
    }
}

/// Runs one descent path per candidate of a list decoded from an anchor batch at 0.
pub fn noisy_grad_desc<O: GradientOracle + ?Sized>(oracle: &mut O, cfg: &LdsoConfig, seed: u64) -> Result<LdsoOutcome> {
    cfg.validate()?;
    let d = oracle.dim();
    let anchor = oracle.query(&vec![0.0; d], cfg.anchor_batch(d)?, derive_seed(seed, &[0]))?;
    let l0 = list_decode(&anchor, &cfg.ldme, derive_seed(seed, &[1]))?;
    run_paths(oracle, l0, anchor, cfg, seed)
}

/// [`noisy_grad_desc`] with a caller-supplied initial list.
pub fn noisy_grad_desc_with_list<O: GradientOracle + ?Sized>(
    oracle: &mut O,
    l0: CandidateList,
    cfg: &LdsoConfig,
    seed: u64,
) -> Result<LdsoOutcome> {
    cfg.validate()?;
    let d = oracle.dim();
    if l0.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: l0.dim() });
    }
    let anchor = oracle.query(&vec![0.0; d], cfg.anchor_batch(d)?, derive_seed(seed, &[0]))?;
    run_paths(oracle, l0, anchor, cfg, seed)
}

fn run_paths<O: GradientOracle + ?Sized>(
    oracle: &mut O,
    l0: CandidateList,
    anchor: SampleBatch,
    cfg: &LdsoConfig,
    seed: u64,
) -> Result<LdsoOutcome> {
    if l0.is_empty() {
        return Err(argument("initial candidate list is empty"));
    }
    let d = oracle.dim();
    let m = cfg.shift_batch(d)?;
    let cached = if cfg.cache_anchor { Some(prefix(&anchor, m)?) } else { None };
    let zero = vec![0.0; d];
    let learner = LearnerConfig { keep_iterates: cfg.learner.keep_iterates, ..cfg.learner.clone() };

    let mut states: Vec<Option<GdState>> =
        l0.candidates().iter().map(|g| GdState::new(g.clone(), &learner).map(Some)).collect::<Result<_>>()?;
    let mut failures: Vec<Option<(String, Vec<f64>)>> = vec![None; l0.len()];
    let mut finished: Vec<Option<crate::learner::LearnerOutcome>> = vec![None; l0.len()];
    let mut trace = Vec::new();
    let steps = learner.iterations();

    for step in 0..steps {
        let live: Vec<usize> = (0..l0.len()).filter(|&i| states[i].is_some()).collect();
        if live.is_empty() {
            break;
        }
        // With a cached anchor, every path at this step shares one prepared reference.
        let shared = cached.as_ref().map(|a| ShiftReference::new(a, &cfg.shift, &cfg.amplify, derive_seed(seed, &[4, step as u64])));
        if let Some(Err(e @ (Error::Config(_) | Error::Argument(_) | Error::InsufficientSamples { .. }))) = &shared {
            return Err(e.clone());
        }
        for chunk in live.chunks(PATH_CHUNK) {
            let mut queries = Vec::with_capacity(chunk.len());
            for &i in chunk {
                let x = states[i].as_ref().map(|s| s.point().to_vec()).unwrap_or_default();
                let key = [step as u64, i as u64];
                let at_x = oracle.query(&x, m, derive_seed(seed, &[2, key[0], key[1]]))?;
                let at_zero = match &cached {
                    Some(_) => None,
                    None => Some(oracle.query(&zero, m, derive_seed(seed, &[3, key[0], key[1]]))?),
                };
                queries.push((at_x, at_zero));
            }
            let shifts = par_map(chunk.len(), |k| {
                let (at_x, at_zero) = &queries[k];
                let key = derive_seed(seed, &[4, step as u64, chunk[k] as u64]);
                match (at_zero, &shared) {
                    (Some(z), _) => shift_highd(at_x, z, &cfg.shift, &cfg.amplify, key),
                    (None, Some(Ok(reference))) => reference.estimate(at_x, key),
                    (None, Some(Err(e))) => Err(e.clone()),
                    (None, None) => unreachable!("anchor batch is cached"),
                }
            });
            for (&i, shift) in chunk.iter().zip(shifts) {
                let state = states[i].as_mut().expect("live path");
                let x = state.point().to_vec();
                let shift = match shift {
                    Ok(s) => s,
                    Err(e @ (Error::Config(_) | Error::Argument(_) | Error::InsufficientSamples { .. })) => return Err(e),
                    Err(e) => {
                        failures[i] = Some((e.to_string(), x));
                        states[i] = None;
                        continue;
                    }
                };
                let g: Vec<f64> = l0.get(i).iter().zip(&shift.value).map(|(a, b)| a + b).collect();
                trace.push(StepRecord {
                    step,
                    path: i,
                    shift_norm: norm(&shift.value),
                    shift_succeeded: shift.succeeded,
                    grad_norm: norm(&g),
                    true_error: oracle.true_gradient(&x).map(|t| crate::batch::distance(&t, &g)),
                });
                let outcome = state.observe(&g);
                let escaped = norm(state.point()) > cfg.divergence_bound;
                if let Err(e) = outcome {
                    failures[i] = Some((e.to_string(), x));
                    states[i] = None;
                } else if escaped {
                    let reason = format!("iterate norm exceeded {} at step {}", cfg.divergence_bound, step + 1);
                    failures[i] = Some((reason, x));
                    states[i] = None;
                } else if state.is_done() {
                    finished[i] = states[i].take().map(GdState::finish);
                }
            }
        }
    }

    let mut paths = Vec::with_capacity(l0.len());
    for i in 0..l0.len() {
        let start = l0.get(i).to_vec();
        let path = match (finished[i].take(), failures[i].take()) {
            (Some(out), _) => PathOutcome {
                index: i,
                start,
                final_point: out.best_point,
                best_observed_norm: out.best_observed_norm,
                iterations: out.iterations,
                failure: None,
                iterates: out.iterates,
            },
            (None, Some((reason, last))) => PathOutcome {
                index: i,
                start,
                final_point: last,
                best_observed_norm: f64::NAN,
                iterations: trace.iter().filter(|r| r.path == i).count(),
                failure: Some(reason),
                iterates: Vec::new(),
            },
            (None, None) => {
                let out = states[i].take().expect("path state").finish();
                PathOutcome {
                    index: i,
                    start,
                    final_point: out.best_point,
                    best_observed_norm: out.best_observed_norm,
                    iterations: out.iterations,
                    failure: None,
                    iterates: out.iterates,
                }
            }
        };
        paths.push(path);
    }
    if paths.iter().all(|p| p.failure.is_some()) {
        return Err(Error::Numerical {
            iteration: steps,
            reason: format!("all {} paths failed; first: {}", paths.len(), paths[0].failure.as_deref().unwrap_or("")),
        });
    }
    Ok(LdsoOutcome { initial: l0, paths, trace, samples_used: oracle.samples_served(), steps })
}

/// Oracle answering a query at `x` with `x + p` for stored samples `p`.
#[derive(Debug, Clone)]
pub struct ReplayOracle {
    samples: SampleBatch,
    order: Vec<usize>,
    cursor: usize,
    allow_replay: bool,
    replays: usize,
    seed: u64,
    served: u64,
}

impl ReplayOracle {
    pub fn new(samples: SampleBatch, allow_replay: bool, seed: u64) -> Result<Self> {
        if samples.is_empty() {
            return Err(argument("replay oracle needs at least one sample"));
        }
        let order = (0..samples.len()).collect();
        Ok(Self { samples, order, cursor: 0, allow_replay, replays: 0, seed, served: 0 })
    }

    /// Times the stored samples were reshuffled and reused.
    pub fn replays(&self) -> usize {
        self.replays
    }
}

impl GradientOracle for ReplayOracle {
    fn dim(&self) -> usize {
        self.samples.dim()
    }

    fn query(&mut self, x: &[f64], m: usize, _seed: u64) -> Result<SampleBatch> {
        let d = self.dim();
        if x.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: x.len() });
        }
        let mut data = Vec::with_capacity(m * d);
        for _ in 0..m {
            if self.cursor == self.order.len() {
                if !self.allow_replay {
                    return Err(argument(format!(
                        "stored samples exhausted after {} queries; enable replay or supply more samples",
                        self.served
                    )));
                }
                self.replays += 1;
                let mut rng = stream_rng(derive_seed(self.seed, &[self.replays as u64]), streams::REPLAY);
                self.order.shuffle(&mut rng);
                self.cursor = 0;
            }
            let p = self.samples.row(self.order[self.cursor]);
            data.extend(x.iter().zip(p).map(|(a, b)| a + b));
            self.cursor += 1;
            self.served += 1;
        }
        SampleBatch::new(d, data)
    }

    fn samples_served(&self) -> u64 {
        self.served
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub list: CandidateList,
    /// Stored samples were reused; queries were not independent.
    pub replays: usize,
    pub samples_served: u64,
}

/// Mean estimation through an optimization solver: negated final points of `solver`
/// run against a [`ReplayOracle`] over `samples`.
pub fn mean_est_via_ldso<S>(samples: &SampleBatch, allow_replay: bool, seed: u64, solver: S) -> Result<MeanEstimate>
where
    S: FnOnce(&mut ReplayOracle) -> Result<Vec<Vec<f64>>>,
{
    let mut oracle = ReplayOracle::new(samples.clone(), allow_replay, derive_seed(seed, &[0]))?;
    let finals = solver(&mut oracle)?;
    let negated: Vec<Vec<f64>> = finals.iter().map(|x| x.iter().map(|v| -v).collect()).collect();
    let provenance = (0..negated.len()).map(|index| Provenance::Path { index }).collect();
    Ok(MeanEstimate {
        list: CandidateList::new(samples.dim(), negated, provenance)?,
        replays: oracle.replays(),
        samples_served: oracle.samples_served(),
    })
}

/// [`mean_est_via_ldso`] with [`noisy_grad_desc`] as the solver; failed paths are dropped.
pub fn mean_est_via_noisy_grad_desc(
    samples: &SampleBatch,
    cfg: &LdsoConfig,
    allow_replay: bool,
    seed: u64,
) -> Result<MeanEstimate> {
    mean_est_via_ldso(samples, allow_replay, seed, |oracle| {
        let out = noisy_grad_desc(oracle, cfg, derive_seed(seed, &[1]))?;
        Ok(out.paths.into_iter().filter(|p| p.failure.is_none()).map(|p| p.final_point).collect())
    })
}
