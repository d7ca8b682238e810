//! Scalar statistics and search primitives shared by the estimators.

use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use crate::error::{argument, Error, Result};

/// Lower median: the middle order statistic, or the lower of the two middle ones.
pub fn median(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(argument("median of an empty sample"));
    }
    Ok(lower_median(samples))
}

pub(crate) fn lower_median(v: &[f64]) -> f64 {
    // Integer keys with the order of `f64::total_cmp`.
    let key = |x: f64| {
        let bits = x.to_bits() as i64;
        bits ^ (((bits >> 63) as u64) >> 1) as i64
    };
    let mut keys: Vec<i64> = v.iter().map(|&x| key(x)).collect();
    let k = (keys.len() - 1) / 2;
    let chosen = *keys.select_nth_unstable(k).1;
    let bits = chosen ^ (((chosen >> 63) as u64) >> 1) as i64;
    f64::from_bits(bits as u64)
}

/// Mean of the samples with `|x| ≤ radius`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalMean {
    pub mean: f64,
    pub retained: usize,
    pub fraction: f64,
}

pub fn conditional_mean(samples: &[f64], radius: f64) -> Result<ConditionalMean> {
    if !(radius > 0.0) {
        return Err(argument(format!("conditional mean radius {radius} must be positive")));
    }
    let (mut sum, mut n) = (0.0, 0usize);
    for &x in samples {
        if x.abs() <= radius {
            sum += x;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::Estimation(format!("no samples within radius {radius}")));
    }
    Ok(ConditionalMean { mean: sum / n as f64, retained: n, fraction: n as f64 / samples.len() as f64 })
}

/// Interval on the real line with per-endpoint openness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub fn new(lo: f64, hi: f64, lo_closed: bool, hi_closed: bool) -> Result<Self> {
        if !(lo <= hi) {
            return Err(argument(format!("interval endpoints out of order: {lo} > {hi}")));
        }
        Ok(Self { lo, hi, lo_closed, hi_closed })
    }

    /// `(lo, hi)`
    pub fn open(lo: f64, hi: f64) -> Result<Self> {
        Self::new(lo, hi, false, false)
    }

    /// `[lo, hi]`
    pub fn closed(lo: f64, hi: f64) -> Result<Self> {
        Self::new(lo, hi, true, true)
    }

    /// `(lo, hi]`
    pub fn open_closed(lo: f64, hi: f64) -> Result<Self> {
        Self::new(lo, hi, false, true)
    }

    /// `[lo, hi)`
    pub fn closed_open(lo: f64, hi: f64) -> Result<Self> {
        Self::new(lo, hi, true, false)
    }

    pub fn contains(&self, v: f64) -> bool {
        let above = if self.lo_closed { v >= self.lo } else { v > self.lo };
        let below = if self.hi_closed { v <= self.hi } else { v < self.hi };
        above && below
    }
}

/// Fraction of samples whose absolute value lies in `interval`.
pub fn empirical_prob(samples: &[f64], interval: &Interval) -> Result<f64> {
    if samples.is_empty() {
        return Err(argument("probability over an empty sample"));
    }
    let n = samples.iter().filter(|x| interval.contains(x.abs())).count();
    Ok(n as f64 / samples.len() as f64)
}

/// Sorted absolute values, for repeated interval-probability queries.
#[derive(Debug, Clone)]
pub struct SortedAbs {
    values: Vec<f64>,
}

impl SortedAbs {
    pub fn new(samples: &[f64]) -> Self {
        let mut values: Vec<f64> = samples.iter().map(|x| x.abs()).collect();
        // Bit patterns of non-negative floats sort in numeric order.
        values.sort_unstable_by_key(|x| x.to_bits());
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn count_below(&self, v: f64, inclusive: bool) -> usize {
        if inclusive {
            self.values.partition_point(|x| *x <= v)
        } else {
            self.values.partition_point(|x| *x < v)
        }
    }

    pub fn count_in(&self, interval: &Interval) -> usize {
        let hi = self.count_below(interval.hi, interval.hi_closed);
        let lo = self.count_below(interval.lo, !interval.lo_closed);
        hi.saturating_sub(lo)
    }

    pub fn prob(&self, interval: &Interval) -> f64 {
        self.count_in(interval) as f64 / self.values.len() as f64
    }

    /// Empirical `Pr[|x| ≤ radius]`.
    pub fn mass_within(&self, radius: f64) -> f64 {
        self.count_below(radius, true) as f64 / self.values.len() as f64
    }

    /// Largest absolute value.
    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
}

impl From<SortedAbs> for Cow<'_, SortedAbs> {
    fn from(s: SortedAbs) -> Self {
        Cow::Owned(s)
    }
}

impl<'a> From<&'a SortedAbs> for Cow<'a, SortedAbs> {
    fn from(s: &'a SortedAbs) -> Self {
        Cow::Borrowed(s)
    }
}

/// Constants and scale defining the `P̂` profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PHatParams {
    /// Inflation factor on the scale.
    pub a: f64,
    pub sigma: f64,
    pub c_near: f64,
    pub c_far: f64,
}

impl PHatParams {
    pub fn width(&self) -> f64 {
        self.a * self.sigma
    }
}

/// Band `w·(i−5, i+5)` for the near term.
fn near_band(w: f64, i: usize) -> Interval {
    let i = i as f64;
    Interval { lo: w * (i - 5.0), hi: w * (i + 5.0), lo_closed: false, hi_closed: false }
}

/// Band `w·[j−4, j+5)` for the far term.
fn far_band(w: f64, j: usize) -> Interval {
    let j = j as f64;
    Interval { lo: w * (j - 4.0), hi: w * (j + 5.0), lo_closed: true, hi_closed: false }
}

fn validate_phat(params: &PHatParams, i: usize) -> Result<()> {
    if i < 1 {
        return Err(argument("p_hat index must be at least 1"));
    }
    if !(params.a > 0.0) || !(params.sigma > 0.0) {
        return Err(argument("p_hat needs positive scale"));
    }
    Ok(())
}

/// `c_near·Pr[|x| ∈ w(i−5, i+5)] + c_far·Σ_{j<i} (i−j)^{-2}·Pr[|x| ∈ w[j−4, j+5)]` with `w = Aσ`.
pub fn p_hat(samples: &[f64], params: &PHatParams, i: usize) -> Result<f64> {
    validate_phat(params, i)?;
    let w = params.width();
    let near = empirical_prob(samples, &near_band(w, i))?;
    let mut far = 0.0;
    for j in 1..i {
        let gap = (i - j) as f64;
        far += empirical_prob(samples, &far_band(w, j))? / (gap * gap);
    }
    Ok(params.c_near * near + params.c_far * far)
}

/// Lazily extended `P̂ = P̂₁ + P̂₂` over two sample sets.
///
/// Far bands are only non-empty up to the largest sample, so the far sum touches
/// only those bands.
#[derive(Debug, Clone)]
pub struct PHatProfile<'a> {
    params: PHatParams,
    sets: [Cow<'a, SortedAbs>; 2],
    grids: [GridCounts; 2],
    /// Non-empty far bands as `(j, Pr₁ + Pr₂)`.
    bands: Vec<(usize, f64)>,
    next_band: usize,
    last_band: usize,
    values: Vec<f64>,
}

impl<'a> PHatProfile<'a> {
    pub fn new(first: &[f64], second: &[f64], params: PHatParams) -> Result<Self> {
        Self::from_sorted(SortedAbs::new(first), SortedAbs::new(second), params)
    }

    pub fn from_sorted(
        first: impl Into<Cow<'a, SortedAbs>>,
        second: impl Into<Cow<'a, SortedAbs>>,
        params: PHatParams,
    ) -> Result<Self> {
        let (first, second) = (first.into(), second.into());
        validate_phat(&params, 1)?;
        if first.is_empty() || second.is_empty() {
            return Err(argument("p_hat profile needs two nonempty sample sets"));
        }
        let sets = [first, second];
        // Bands with j − 4 > max/w hold no samples.
        let reach = sets[0].max().max(sets[1].max()) / params.width() + 5.0;
        let last_band = if reach.is_finite() && reach < 1e15 { reach as usize } else { usize::MAX };
        let grids = [GridCounts::with_capacity(64), GridCounts::with_capacity(64)];
        let (bands, values) = (Vec::with_capacity(64), Vec::with_capacity(64));
        Ok(Self { params, sets, grids, bands, next_band: 1, last_band, values })
    }

    pub fn params(&self) -> &PHatParams {
        &self.params
    }

    /// Counts of `|x| < w·m` and `|x| ≤ w·m` in set `s`, or 0 for negative `m`.
    #[inline]
    fn grid(&mut self, s: usize, m: i64) -> (usize, usize) {
        if m < 0 {
            return (0, 0);
        }
        let m = m as usize;
        if m >= self.grids[s].below.len() {
            self.grids[s].extend(&self.sets[s].values, self.params.width(), m);
        }
        (self.grids[s].below[m], self.grids[s].at_or_below[m])
    }

    /// `Pr₁ + Pr₂` of the open band `w·(i−5, i+5)`.
    fn near_prob(&mut self, i: usize) -> f64 {
        let i = i as i64;
        (0..2)
            .map(|s| {
                let count = self.grid(s, i + 5).0 - self.grid(s, i - 5).1;
                count as f64 / self.sets[s].len() as f64
            })
            .sum()
    }

    /// `Pr₁ + Pr₂` of the band `w·[j−4, j+5)`.
    fn far_prob(&mut self, j: usize) -> f64 {
        let j = j as i64;
        (0..2)
            .map(|s| {
                let count = self.grid(s, j + 5).0 - self.grid(s, j - 4).0;
                count as f64 / self.sets[s].len() as f64
            })
            .sum()
    }

    /// `P̂(i)`; at `i = 0` only the near term `Pr[|x| < 5Aσ]` contributes.
    pub fn value(&mut self, i: usize) -> f64 {
        while self.next_band < i {
            let j = self.next_band;
            if j <= self.last_band {
                let p = self.far_prob(j);
                if p > 0.0 {
                    self.bands.push((j, p));
                }
            }
            self.next_band += 1;
        }
        let near = self.near_prob(i);
        let mut far = 0.0;
        for &(j, p) in self.bands.iter().take_while(|(j, _)| *j < i) {
            let gap = (i - j) as f64;
            far += p / (gap * gap);
        }
        let v = self.params.c_near * near + self.params.c_far * far;
        if i < self.values.len() {
            self.values[i] = v;
        } else if i == self.values.len() {
            self.values.push(v);
        }
        v
    }

    /// Values computed so far, indexed from 0.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `Pr₁[|x| ≤ r] + Pr₂[|x| ≤ r]`.
    pub fn mass_within(&self, radius: f64) -> f64 {
        self.sets[0].mass_within(radius) + self.sets[1].mass_within(radius)
    }
}

/// Sample counts at the grid points `w·m`, extended on demand.
#[derive(Debug, Clone, Default)]
struct GridCounts {
    below: Vec<usize>,
    at_or_below: Vec<usize>,
}

impl GridCounts {
    fn with_capacity(n: usize) -> Self {
        Self { below: Vec::with_capacity(n), at_or_below: Vec::with_capacity(n) }
    }

    fn extend(&mut self, sorted: &[f64], w: f64, upto: usize) {
        let (mut lt, mut le) = (self.below.last().copied().unwrap_or(0), self.at_or_below.last().copied().unwrap_or(0));
        while self.below.len() <= upto {
            let edge = w * self.below.len() as f64;
            while lt < sorted.len() && sorted[lt] < edge {
                lt += 1;
            }
            le = le.max(lt);
            while le < sorted.len() && sorted[le] <= edge {
                le += 1;
            }
            self.below.push(lt);
            self.at_or_below.push(le);
        }
    }
}

/// Smallest `k ∈ [lo, hi]` with `k·a(k) < eta·Σ_{j≤k} a(j) + tolerance(k)`.
///
/// `a` is evaluated once per index, in increasing order from 0.
pub fn find_small_index_with<A, T>(mut a: A, eta: f64, lo: usize, hi: usize, tolerance: T) -> Option<usize>
where
    A: FnMut(usize) -> f64,
    T: Fn(usize) -> f64,
{
    let mut sum = 0.0;
    for k in 0..=hi {
        let ak = a(k);
        sum += ak;
        if k >= lo && (k as f64) * ak < eta * sum + tolerance(k) {
            return Some(k);
        }
    }
    None
}

/// [`find_small_index_with`] without slack.
pub fn find_small_index<A: FnMut(usize) -> f64>(a: A, eta: f64, lo: usize, hi: usize) -> Option<usize> {
    find_small_index_with(a, eta, lo, hi, |_| 0.0)
}

/// Smallest `n` with `exp(−2n·accuracy²/width²) ≤ delta`.
pub fn hoeffding_sample_size(accuracy: f64, width: f64, delta: f64) -> Result<usize> {
    if !(accuracy > 0.0 && width > 0.0 && delta > 0.0) {
        return Err(argument("hoeffding sample size needs positive accuracy, width and delta"));
    }
    if delta >= 1.0 {
        return Ok(1);
    }
    let rate = 2.0 * accuracy * accuracy / (width * width);
    let holds = |n: f64| (-n * rate).exp() <= delta;
    let mut n = ((1.0 / delta).ln() / rate).ceil().max(1.0);
    if !n.is_finite() || n > usize::MAX as f64 {
        return Err(argument("hoeffding sample size overflows"));
    }
    while !holds(n) {
        n += 1.0;
    }
    while n > 1.0 && holds(n - 1.0) {
        n -= 1.0;
    }
    Ok(n as usize)
}
