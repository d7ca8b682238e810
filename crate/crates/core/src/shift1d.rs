//! One-dimensional noisy location estimation.
//!
//! Given samples of `ξ + y + t` and `ξ̃ + y'`, where the oblivious noise has an atom of
//! mass `alpha` at zero and `y, y'` are mean-zero with standard deviation at most
//! `sigma`, recover `t`. A median of pairwise differences gives a rough estimate; each
//! later round re-centers a fresh slice and corrects the estimate by the difference
//! of conditional means inside a radius chosen from the [`PHatProfile`].

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::batch::SampleBatch;
use crate::error::{argument, config, Error, Result};
use crate::rng::{stream_rng, streams};
use crate::stats::{
    conditional_mean, find_small_index_with, hoeffding_sample_size, lower_median, PHatParams, PHatProfile,
    SortedAbs,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Shift1DConfig {
    /// Target accuracy as a fraction of `sigma`, and per-round shrink factor of the scale.
    pub eta: f64,
    /// Mass of the zero atom of the oblivious noise.
    pub alpha: f64,
    /// Standard-deviation bound of the observation noise.
    pub sigma: f64,
    /// Failure probability used to size the rough-estimate pair budget and slices.
    pub delta: f64,
    /// Initial scale is `a0_multiplier / √alpha`.
    pub a0_multiplier: f64,
    pub c_near: f64,
    pub c_far: f64,
    /// Multiplier on the `eta/k` slack in the radius search.
    pub slack_const: f64,
    /// Bound on the total of the profile; `None` uses the analytic bound for `c_near`, `c_far`.
    pub c_budget: Option<f64>,
    /// Hard cap on the largest radius index searched.
    pub u_cap: usize,
    /// Number of slices; `None` keeps refining until the scale drops below `eta`.
    pub rounds: Option<usize>,
    /// Number of random pairs in the rough estimate; `None` uses `⌈2·ln(2/δ)/α⁴⌉`.
    pub pair_budget: Option<usize>,
    pub pair_cap: usize,
    /// Minimum slice size; `None` uses the Hoeffding size for accuracy `alpha·eta`.
    pub min_slice: Option<usize>,
    /// Rounds whose conditional sets keep fewer samples are skipped.
    pub min_retained: usize,
    /// Polynomial radius cap for bounded-variance oblivious noise.
    pub bounded_variance_mode: bool,
}

impl Default for Shift1DConfig {
    fn default() -> Self {
        Self {
            eta: 0.25,
            alpha: 0.5,
            sigma: 1.0,
            delta: 0.05,
            a0_multiplier: 4.0,
            c_near: 3.0,
            c_far: 10.0,
            slack_const: 1.0,
            c_budget: None,
            u_cap: 1_000_000,
            rounds: None,
            pair_budget: None,
            pair_cap: 2_000_000,
            min_slice: None,
            min_retained: 10,
            bounded_variance_mode: false,
        }
    }
}

impl Shift1DConfig {
    pub fn new(eta: f64, alpha: f64, sigma: f64) -> Self {
        Self { eta, alpha, sigma, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta <= 0.5) {
            return Err(config(format!("eta = {} must lie in (0, 0.5]", self.eta)));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(config(format!("alpha = {} must lie in (0, 1]", self.alpha)));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(config("sigma must be positive and finite"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(config("delta must lie in (0, 1)"));
        }
        for (name, v) in [("a0_multiplier", self.a0_multiplier), ("c_near", self.c_near), ("c_far", self.c_far)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(config(format!("{name} must be positive")));
            }
        }
        if !(self.slack_const >= 0.0) {
            return Err(config("slack_const must be nonnegative"));
        }
        if matches!(self.c_budget, Some(c) if !(c > 0.0)) {
            return Err(config("c_budget must be positive"));
        }
        if matches!(self.rounds, Some(r) if r < 2) {
            return Err(config("at least two rounds are needed"));
        }
        if self.u_cap == 0 || self.pair_cap == 0 {
            return Err(config("caps must be positive"));
        }
        Ok(())
    }

    /// Smallest radius index searched: `⌈1/(alpha·eta²)⌉`.
    pub fn k_lo(&self) -> usize {
        (1.0 / (self.alpha * self.eta * self.eta)).ceil().max(1.0) as usize
    }

    /// Analytic bound on `Σ_i P̂(i)` over both sample sets.
    pub fn profile_budget(&self) -> f64 {
        self.c_budget.unwrap_or_else(|| {
            let basel = std::f64::consts::PI.powi(2) / 6.0;
            2.0 * (10.0 * self.c_near + 9.0 * self.c_far * basel)
        })
    }

    /// Largest radius index searched, after the hard cap.
    pub fn k_hi(&self) -> usize {
        let lo = self.k_lo() as f64;
        let rule = if self.bounded_variance_mode {
            (self.c_budget.unwrap_or(1.0) / (self.alpha * self.eta).powi(3)).ceil()
        } else {
            (self.profile_budget() / self.alpha + lo.powf(self.eta)).powf(1.0 / self.eta).ceil()
        };
        let capped = if rule.is_finite() { rule.min(self.u_cap as f64) } else { self.u_cap as f64 };
        (capped as usize).max(self.k_lo())
    }

    /// Number of slices, including the one used by the rough estimate.
    pub fn rounds(&self) -> usize {
        self.rounds.unwrap_or_else(|| {
            let refine = (self.initial_scale().ln() / (1.0 / self.eta).ln()).ceil().max(0.0) as usize;
            refine + 2
        })
    }

    pub fn initial_scale(&self) -> f64 {
        self.a0_multiplier / self.alpha.sqrt()
    }

    pub fn min_slice(&self) -> Result<usize> {
        match self.min_slice {
            Some(n) => Ok(n.max(1)),
            None => hoeffding_sample_size(self.alpha * self.eta, 1.0, self.delta),
        }
    }

    /// Smallest batch size [`shift1d`] accepts.
    pub fn min_samples(&self) -> Result<usize> {
        Ok(self.rounds() * self.min_slice()?)
    }

    pub fn pair_budget(&self) -> usize {
        let rule = self.pair_budget.map(|p| p as f64).unwrap_or_else(|| {
            // Hoeffding: the atom-on-atom mass α² keeps the median within the central cluster.
            (2.0 * (2.0 / self.delta).ln() / self.alpha.powi(4)).ceil()
        });
        (rule.min(self.pair_cap as f64) as usize).max(1)
    }
}

/// Median of `a − b` over `pair_budget` distinct random pairs; all pairs when the
/// budget covers them.
///
/// Pairs are taken along random diagonals `(i, (i + o) mod |s2|)` with distinct
/// offsets `o`, so each pair is equally likely and no pair repeats.
pub fn rough_estimate(s1: &[f64], s2: &[f64], pair_budget: usize, seed: u64) -> Result<f64> {
    if s1.is_empty() || s2.is_empty() {
        return Err(argument("rough estimate needs two nonempty batches"));
    }
    let (n1, n2) = (s1.len(), s2.len());
    let total = n1.saturating_mul(n2);
    let diffs = if pair_budget >= total {
        s1.iter().flat_map(|a| s2.iter().map(move |b| a - b)).collect::<Vec<_>>()
    } else {
        let budget = pair_budget.max(1);
        let mut rng = stream_rng(seed, streams::PAIRS);
        let offsets = index::sample(&mut rng, n2, budget.div_ceil(n1));
        let mut diffs = Vec::with_capacity(budget);
        for o in offsets.iter() {
            let take = (budget - diffs.len()).min(n1);
            let mut i = if take < n1 { rng.random_range(0..n1) } else { 0 };
            let mut j = (i + o) % n2;
            for _ in 0..take {
                diffs.push(s1[i] - s2[j]);
                i += 1;
                j += 1;
                if i == n1 {
                    i = 0;
                    j = o % n2;
                } else if j == n2 {
                    j = 0;
                }
            }
        }
        diffs
    };
    Ok(lower_median(&diffs))
}

/// Outcome of one refinement round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FineStep {
    /// Chosen radius index.
    pub k: usize,
    /// No index met the search condition; `k` minimizes the ratio instead.
    pub fallback: bool,
    pub radius: f64,
    pub p_hat_k: f64,
    /// `Σ_{j≤k} P̂(j)`.
    pub p_hat_sum: f64,
    /// `Pr₁[|x| ≤ radius] + Pr₂[|x| ≤ radius]`.
    pub mass_k: f64,
    pub retained: [usize; 2],
    pub retained_fraction: [f64; 2],
    /// Difference of conditional means; `None` when a set kept too few samples.
    pub delta: Option<f64>,
}

/// One refinement round on re-centered slices at scale `a`.
pub fn fine_step(s1c: &[f64], s2c: &[f64], a: f64, cfg: &Shift1DConfig) -> Result<FineStep> {
    fine_step_sorted(s1c, s2c, &SortedAbs::new(s2c), a, cfg)
}

/// [`fine_step`] with the magnitudes of `s2c` already sorted.
fn fine_step_sorted(s1c: &[f64], s2c: &[f64], s2_sorted: &SortedAbs, a: f64, cfg: &Shift1DConfig) -> Result<FineStep> {
    if !(a > 0.0) {
        return Err(argument("fine step scale must be positive"));
    }
    let params = PHatParams { a, sigma: cfg.sigma, c_near: cfg.c_near, c_far: cfg.c_far };
    let mut profile = PHatProfile::from_sorted(SortedAbs::new(s1c), s2_sorted, params)?;
    let (lo, hi) = (cfg.k_lo(), cfg.k_hi());
    let (eta, slack) = (cfg.eta, cfg.slack_const);
    let found = find_small_index_with(|j| profile.value(j), eta, lo, hi, |k| slack * eta / k as f64);
    let values = profile.values();
    let prefix = |k: usize| values[..=k].iter().sum::<f64>();
    let (k, fallback) = match found {
        Some(k) => (k, false),
        None => {
            let mut sum: f64 = values[..lo].iter().sum();
            let mut best = (lo, f64::INFINITY);
            for (k, v) in values.iter().enumerate().take(hi + 1).skip(lo) {
                sum += v;
                let ratio = if sum > 0.0 { k as f64 * v / sum } else { 0.0 };
                if ratio < best.1 {
                    best = (k, ratio);
                }
            }
            (best.0, true)
        }
    };
    let radius = params.width() * k as f64;
    let c1 = conditional_mean(s1c, radius)?;
    let c2 = conditional_mean(s2c, radius)?;
    let enough = c1.retained >= cfg.min_retained && c2.retained >= cfg.min_retained;
    Ok(FineStep {
        k,
        fallback,
        radius,
        p_hat_k: values[k],
        p_hat_sum: prefix(k),
        mass_k: profile.mass_within(radius),
        retained: [c1.retained, c2.retained],
        retained_fraction: [c1.fraction, c2.fraction],
        delta: enough.then_some(c1.mean - c2.mean),
    })
}

/// Per-round diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub scale: f64,
    /// `None` when the round could not run at all (empty conditional sets).
    pub step: Option<FineStep>,
    pub skipped: bool,
    /// Estimate after this round.
    pub estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftEstimate {
    pub value: f64,
    /// Median-of-differences estimate from the first slice.
    pub rough: f64,
    /// Sum of the per-round corrections, so `value = rough + refinement`.
    pub refinement: f64,
    pub trace: Vec<RoundRecord>,
    /// No refinement round completed.
    pub rough_only: bool,
    pub k_lo: usize,
    pub k_hi: usize,
}

impl ShiftEstimate {
    /// Rounds that fell back to the ratio minimizer.
    pub fn fallback_rounds(&self) -> usize {
        self.trace.iter().filter(|r| r.step.as_ref().is_some_and(|s| s.fallback)).count()
    }
}

/// Estimates `t` from samples of `ξ + y + t` (`s1`) and `ξ̃ + y'` (`s2`).
pub fn shift1d(s1: &SampleBatch, s2: &SampleBatch, cfg: &Shift1DConfig, seed: u64) -> Result<ShiftEstimate> {
    shift1d_slices(s1.scalars()?, s2.scalars()?, cfg, seed)
}

/// [`shift1d`] on raw scalar slices.
pub fn shift1d_slices(x1: &[f64], x2: &[f64], cfg: &Shift1DConfig, seed: u64) -> Result<ShiftEstimate> {
    cfg.validate()?;
    if x1.len() != x2.len() {
        return Err(argument(format!("batch sizes differ: {} vs {}", x1.len(), x2.len())));
    }
    let m = x1.len();
    let gather = |x: &[f64], stream| -> Vec<f64> { shuffled(m, seed, stream).iter().map(|&i| x[i]).collect() };
    let reference = PreparedSlices::new(&gather(x2, streams::PARTITION_S2), cfg)?;
    refine_against(&gather(x1, streams::PARTITION_S1), &reference, cfg, seed)
}

/// Second batch cut into the slices of each round, with sorted magnitudes for the
/// refinement rounds. Reusable against any first batch of the same length.
#[derive(Debug, Clone)]
pub(crate) struct PreparedSlices {
    len: usize,
    slice: usize,
    rough: Vec<f64>,
    rounds: Vec<(Vec<f64>, SortedAbs)>,
}

impl PreparedSlices {
    /// Slice `r` is `x2[r·slice..(r+1)·slice]`, so `x2` should already be in random order.
    pub(crate) fn new(x2: &[f64], cfg: &Shift1DConfig) -> Result<Self> {
        let m = x2.len();
        let rounds = cfg.rounds();
        let need = cfg.min_slice()?;
        if m / rounds < need {
            return Err(Error::InsufficientSamples { got: m, required: rounds * need });
        }
        let slice = m / rounds;
        let part = |r: usize| x2[r * slice..(r + 1) * slice].to_vec();
        let refine = (1..rounds)
            .map(|r| {
                let s = part(r);
                let sorted = SortedAbs::new(&s);
                (s, sorted)
            })
            .collect();
        Ok(Self { len: m, slice, rough: part(0), rounds: refine })
    }
}

/// Rough estimate and refinement rounds of `x1`, in random order, against a prepared
/// second batch. `seed` drives the rough-estimate pairs.
pub(crate) fn refine_against(x1: &[f64], reference: &PreparedSlices, cfg: &Shift1DConfig, seed: u64) -> Result<ShiftEstimate> {
    if x1.len() != reference.len {
        return Err(argument(format!("batch sizes differ: {} vs {}", x1.len(), reference.len)));
    }
    let slice = reference.slice;
    let part = |r: usize| &x1[r * slice..(r + 1) * slice];
    let rough = rough_estimate(part(0), &reference.rough, cfg.pair_budget(), seed)?;
    let mut refinement = 0.0;
    let mut scale = cfg.initial_scale();
    let mut trace = Vec::with_capacity(reference.rounds.len());
    let mut completed = 0;
    for (r, (s2c, sorted)) in reference.rounds.iter().enumerate() {
        let round = r + 1;
        // Subtract the rough part first so translating S1 leaves these values unchanged.
        let s1c: Vec<f64> = part(round).iter().map(|x| (x - rough) - refinement).collect();
        let step = match fine_step_sorted(&s1c, s2c, sorted, scale, cfg) {
            Ok(step) => Some(step),
            Err(Error::Estimation(_)) => None,
            Err(e) => return Err(e),
        };
        let delta = step.as_ref().and_then(|s| s.delta);
        if let Some(d) = delta {
            refinement += d;
            completed += 1;
        }
        trace.push(RoundRecord { round, scale, step, skipped: delta.is_none(), estimate: rough + refinement });
        scale *= cfg.eta;
    }
    Ok(ShiftEstimate {
        value: rough + refinement,
        rough,
        refinement,
        trace,
        rough_only: completed == 0,
        k_lo: cfg.k_lo(),
        k_hi: cfg.k_hi(),
    })
}

pub(crate) fn shuffled(m: usize, seed: u64, stream: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..m).collect();
    perm.shuffle(&mut stream_rng(seed, stream));
    perm
}
