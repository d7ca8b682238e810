//! Acceptance experiments, one line per criterion.
//!
//! Run a subset with `cargo test -p oblivion-core --test acceptance -- A2 A4`.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use oblivion_core::batch::SampleBatch;
use oblivion_core::ldme::{ldme_subsample, LdmeConfig};
use oblivion_core::ldso::{mean_est_via_noisy_grad_desc, noisy_grad_desc, LdsoConfig};
use oblivion_core::learner::LearnerConfig;
use oblivion_core::noise::{
    hardness_pair, make_oracle, median_tightness_witness, sample_oblivious, sample_oblivious_vectors,
    sample_observation, sample_observation_vectors, ObliviousNoiseSpec, ObservationNoiseSpec, TailSpec,
    WitnessSpec,
};
use oblivion_core::objective::SmoothObjective;
use oblivion_core::rng::{derive_seed, stream_rng};
use oblivion_core::shift1d::{rough_estimate, shift1d, Shift1DConfig};
use oblivion_core::shifthd::{random_sign_basis, shift_highd, AmplifyConfig};
use oblivion_core::stats::{find_small_index_with, median};
use rand::Rng;
use rand_distr::StandardNormal;

const SEEDS: u64 = 20;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict { passed, detail: detail.into() }
}

fn two_point_noise(alpha: f64) -> ObliviousNoiseSpec {
    ObliviousNoiseSpec::new(alpha, TailSpec::TwoPoint { magnitude: 1e3 })
}

fn unit_gaussian() -> ObservationNoiseSpec {
    ObservationNoiseSpec::Gaussian { sigma: 1.0 }
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn random_vector(seed: u64, d: usize, length: f64) -> Vec<f64> {
    let mut rng = stream_rng(seed, 100);
    let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let n = norm(&v);
    v.iter().map(|x| x * length / n).collect()
}

/// Scalar batches of `ξ + y + t` and `ξ̃ + y'`.
fn scalar_pair(noise: &ObliviousNoiseSpec, obs: &ObservationNoiseSpec, t: f64, m: usize, seed: u64) -> (SampleBatch, SampleBatch) {
    let xi1 = sample_oblivious(noise, m, derive_seed(seed, &[1])).unwrap();
    let y1 = sample_observation(obs, m, derive_seed(seed, &[2])).unwrap();
    let xi2 = sample_oblivious(noise, m, derive_seed(seed, &[3])).unwrap();
    let y2 = sample_observation(obs, m, derive_seed(seed, &[4])).unwrap();
    let s1 = xi1.as_slice().iter().zip(y1.as_slice()).map(|(a, b)| a + b + t).collect();
    let s2 = add(xi2.as_slice(), y2.as_slice());
    (SampleBatch::from_scalars(s1), SampleBatch::from_scalars(s2))
}

/// Vector batches of `ξ + y + v` and `ξ̃ + y'`.
fn vector_pair(noise: &ObliviousNoiseSpec, obs: &ObservationNoiseSpec, v: &[f64], m: usize, seed: u64) -> (SampleBatch, SampleBatch) {
    let d = v.len();
    let xi1 = sample_oblivious_vectors(noise, d, m, derive_seed(seed, &[1])).unwrap();
    let y1 = sample_observation_vectors(obs, d, m, derive_seed(seed, &[2])).unwrap();
    let xi2 = sample_oblivious_vectors(noise, d, m, derive_seed(seed, &[3])).unwrap();
    let y2 = sample_observation_vectors(obs, d, m, derive_seed(seed, &[4])).unwrap();
    let s1 = SampleBatch::new(d, add(xi1.as_slice(), y1.as_slice())).unwrap().translated(v);
    let s2 = SampleBatch::new(d, add(xi2.as_slice(), y2.as_slice())).unwrap();
    (s1, s2)
}

/// Inliers `μ + z` plus oblivious noise, in `d` dimensions.
fn contaminated_samples(mu: &[f64], alpha: f64, m: usize, seed: u64) -> SampleBatch {
    let d = mu.len();
    let xi = sample_oblivious_vectors(&two_point_noise(alpha), d, m, derive_seed(seed, &[1])).unwrap();
    let z = sample_observation_vectors(&unit_gaussian(), d, m, derive_seed(seed, &[2])).unwrap();
    SampleBatch::new(d, add(xi.as_slice(), z.as_slice())).unwrap().translated(mu)
}

fn a1() -> Verdict {
    let (t, alpha) = (7.3, 0.25);
    let cfg = Shift1DConfig::new(0.25, alpha, 1.0);
    let bound = 10.0 / alpha.sqrt();
    let mut worst = 0.0f64;
    let hits = (0..SEEDS)
        .filter(|&seed| {
            let (s1, s2) = scalar_pair(&two_point_noise(alpha), &unit_gaussian(), t, 100_000, seed);
            let r = rough_estimate(s1.as_slice(), s2.as_slice(), cfg.pair_budget(), seed).unwrap();
            worst = worst.max((r - t).abs());
            (r - t).abs() <= bound
        })
        .count();
    verdict(hits >= 19, format!("{hits}/20 seeds with |rough − t| ≤ {bound}, worst {worst:.3}"))
}

fn a2() -> Verdict {
    let (t, alpha) = (7.3, 0.25);
    let cfg = Shift1DConfig::new(0.25, alpha, 1.0);
    let (mut accurate, mut improved, mut worst) = (0, 0, 0.0f64);
    for seed in 0..SEEDS {
        let (s1, s2) = scalar_pair(&two_point_noise(alpha), &unit_gaussian(), t, 400_000, seed);
        let est = shift1d(&s1, &s2, &cfg, seed).unwrap();
        let err = (est.value - t).abs();
        worst = worst.max(err);
        accurate += (err <= 0.5) as usize;
        improved += (err < (est.rough - t).abs()) as usize;
    }
    verdict(
        accurate >= 18 && improved >= 18,
        format!("{accurate}/20 within 0.5 (worst {worst:.4}), {improved}/20 improve on the rough estimate"),
    )
}

fn a3() -> Verdict {
    let d = 16;
    let cfg = Shift1DConfig::new(0.25, 0.3, 1.0);
    let amp = AmplifyConfig::default().with_trials(8);
    let mut errors = Vec::new();
    for seed in 0..SEEDS {
        let v = random_vector(derive_seed(seed, &[9]), d, 5.0);
        let (s1, s2) = vector_pair(&two_point_noise(0.3), &unit_gaussian(), &v, 400_000, seed);
        let est = shift_highd(&s1, &s2, &cfg, &amp, seed).unwrap();
        errors.push(dist(&est.value, &v));
    }
    let hits = errors.iter().filter(|e| **e <= 1.0).count();
    errors.sort_by(f64::total_cmp);
    verdict(hits >= 18, format!("{hits}/20 within 1.0, median {:.3}, max {:.3}", errors[10], errors[19]))
}

fn a4_config(d: usize) -> LdsoConfig {
    let (eta, alpha, eps) = (0.5, 0.3, 0.1);
    // ‖c‖ = 1 and the start near ∇f(0) = −c give f(x₀) − min f ≈ 2.
    let learner = LearnerConfig::new(1.0, 2.0, eta, eps);
    let mut cfg = LdsoConfig::new(eta, alpha, 1.0, 0.05, learner);
    cfg.ldme = cfg.ldme.with_repeats_cap(500);
    cfg.amplify = cfg.amplify.with_trials(3);
    cfg.m_shift = Some(cfg.min_shift_batch(d).unwrap());
    cfg.m_anchor = Some(4000);
    cfg
}

fn a4() -> Verdict {
    let d = 8;
    let cfg = a4_config(d);
    let mut errors = Vec::new();
    for seed in 0..SEEDS {
        let c = random_vector(derive_seed(seed, &[9]), d, 1.0);
        let f = SmoothObjective::quadratic(c);
        let mut oracle = make_oracle(f.clone(), two_point_noise(0.3), unit_gaussian()).unwrap();
        let out = noisy_grad_desc(&mut oracle, &cfg, seed).unwrap();
        let best = out.paths.iter().map(|p| norm(&f.gradient(&p.final_point))).fold(f64::INFINITY, f64::min);
        errors.push(best);
    }
    let hits = errors.iter().filter(|e| **e <= 1.1).count();
    errors.sort_by(f64::total_cmp);
    verdict(hits >= 18, format!("{hits}/20 with min ‖∇f‖ ≤ 1.1, median {:.3}, max {:.3}", errors[10], errors[19]))
}

fn a5() -> Verdict {
    let (alpha, eta, d) = (0.3, 0.5, 4);
    let cfg = LdmeConfig::new(alpha, eta, 0.05);
    let required = 10.0 / alpha.powf(1.0 / (eta * eta));
    let mut errors = Vec::new();
    for seed in 0..SEEDS {
        let mu = random_vector(derive_seed(seed, &[9]), d, 3.0);
        let samples = contaminated_samples(&mu, alpha, 10_000, seed);
        let list = ldme_subsample(&samples, &cfg, seed).unwrap();
        assert!(list.len() as f64 >= required);
        errors.push(list.closest(&mu).unwrap().1);
    }
    let hits = errors.iter().filter(|e| **e <= 1.0).count();
    errors.sort_by(f64::total_cmp);
    verdict(
        hits >= 18,
        format!("{hits}/20 within 1.0 with {} repeats (≥ {required:.0}), max {:.3}", cfg.repeats(), errors[19]),
    )
}

/// Exhaustive oracle: recomputes every prefix sum from scratch.
fn scan_oracle(a: &[f64], eta: f64, lo: usize, hi: usize, slack: f64) -> Option<usize> {
    (lo..=hi).find(|&k| {
        let sum: f64 = a[..=k].iter().sum();
        (k as f64) * a[k] < eta * sum + slack
    })
}

fn a6() -> Verdict {
    let mut rng = stream_rng(6, 0);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let n = rng.random_range(2..=10_000usize);
        let decay: f64 = rng.random_range(0.0..3.0);
        let a: Vec<f64> = (0..n)
            .map(|j| if rng.random::<f64>() < 0.2 { 0.0 } else { rng.random::<f64>() * (1.0 + j as f64).powf(-decay) })
            .collect();
        let eta = rng.random_range(0.01..0.99);
        let lo = rng.random_range(1..=(n - 1).min(50));
        let hi = rng.random_range(lo..n);
        let slack = if rng.random::<bool>() { 0.0 } else { rng.random_range(0.0..0.1) };
        let got = find_small_index_with(|j| a[j], eta, lo, hi, |_| slack);
        let want = scan_oracle(&a, eta, lo, hi, slack);
        mismatches += (got != want) as usize;
    }

    let mut misses = 0;
    for case in 0..1000u64 {
        let alpha = rng.random_range(0.05..1.0);
        let eta = rng.random_range(0.2..0.9);
        let lo = rng.random_range(1..=20usize);
        let a0 = rng.random_range(alpha / 2.0..1.0);
        let p = rng.random_range(1.1..3.0);
        let scale = rng.random_range(0.0..5.0);
        let key = derive_seed(case, &[]);
        // a(j) = scale·u_j·j^{-p} for j ≥ 1, summing to at most scale·ζ(p).
        let zeta: f64 = (1..200_000).map(|j| (j as f64).powf(-p)).sum::<f64>() + 200_000f64.powf(1.0 - p) / (p - 1.0);
        let total = a0 + scale * zeta;
        let u = |j: usize| (derive_seed(key, &[j as u64]) >> 11) as f64 / (1u64 << 53) as f64;
        let a = |j: usize| if j == 0 { a0 } else { scale * u(j) * (j as f64).powf(-p) };
        let hi = ((total / a0 + (lo as f64).powf(eta)).powf(1.0 / eta)).ceil() as usize;
        misses += find_small_index_with(a, eta, lo, hi, |_| 0.0).is_none() as usize;
    }
    verdict(
        mismatches == 0 && misses == 0,
        format!("{mismatches} oracle mismatches over 1000 sequences, {misses}/1000 lemma cases without an index"),
    )
}

fn a7() -> Verdict {
    let t = 0.5;
    let mut medians = Vec::new();
    let mut ok = true;
    for (i, alpha) in [1e-2, 1e-3, 1e-4].into_iter().enumerate() {
        let (x, y) = median_tightness_witness(&WitnessSpec::new(alpha, t), 1_000_000, 70 + i as u64).unwrap();
        let med = median(&add(x.as_slice(), y.as_slice())).unwrap();
        ok &= med >= 0.005 * alpha.powf(-1.0 / 2.5);
        medians.push(med);
    }
    let increasing = medians.windows(2).all(|w| w[1] > w[0]);
    verdict(ok && increasing, format!("medians {medians:.4?} (thresholds 0.0317, 0.0792, 0.1990)"))
}

fn a8() -> Verdict {
    let d = 8;
    let m = 100_000;
    let mut rng = stream_rng(8, 0);
    let signs = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<i8> { (0..d).map(|_| if rng.random() { 1 } else { -1 }).collect() };
    let (s, s2) = (signs(&mut rng), signs(&mut rng));
    let a = hardness_pair(d, &s, m, 81).unwrap();
    let b = hardness_pair(d, &s2, m, 82).unwrap();
    let mut worst_p = 1.0f64;
    for j in 0..d {
        let count = |batch: &SampleBatch| {
            let mut c = [0.0f64; 3];
            for v in batch.column(j) {
                c[(v + 1.0) as usize] += 1.0;
            }
            c
        };
        let (ca, cb) = (count(&a), count(&b));
        let n = 2.0 * m as f64;
        let mut chi2 = 0.0;
        for k in 0..3 {
            let col = ca[k] + cb[k];
            for obs in [ca[k], cb[k]] {
                let expected = col * m as f64 / n;
                if expected > 0.0 {
                    chi2 += (obs - expected).powi(2) / expected;
                }
            }
        }
        // Two degrees of freedom: p = exp(−χ²/2).
        worst_p = worst_p.min((-chi2 / 2.0).exp());
    }
    verdict(worst_p >= 1e-3, format!("smallest per-coordinate p-value {worst_p:.4} for s={s:?} vs {s2:?}"))
}

fn a9() -> Verdict {
    let (d, m) = (64usize, 100_000usize);
    let bound = 4.0 * (d as f64).ln() / d as f64;
    // Half the energy isotropic, half along the all-ones direction.
    let iso = sample_observation_vectors(&ObservationNoiseSpec::Gaussian { sigma: 0.5f64.sqrt() }, d, m, 90).unwrap();
    let mut rng = stream_rng(91, 0);
    let u = 1.0 / (d as f64).sqrt();
    let data: Vec<f64> = iso
        .rows()
        .flat_map(|r| {
            let g: f64 = 0.5f64.sqrt() * rng.sample::<f64, _>(StandardNormal);
            r.iter().map(move |x| x + g * u).collect::<Vec<_>>()
        })
        .collect();
    let z = SampleBatch::new(d, data).unwrap();
    let mut good = 0;
    let mut worst = 0.0f64;
    for seed in 0..50 {
        let p = random_sign_basis(d, 900 + seed).project_batch(&z).unwrap();
        let max_var = (0..d)
            .map(|i| {
                let col = p.column(i);
                let mean = col.iter().sum::<f64>() / m as f64;
                col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / m as f64
            })
            .fold(0.0, f64::max);
        worst = worst.max(max_var);
        good += (max_var <= bound) as usize;
    }
    verdict(good * 100 >= 95 * 50, format!("{good}/50 bases within {bound:.4}, largest variance {worst:.4}"))
}

fn a10() -> Verdict {
    let (alpha, eta, d) = (0.3, 0.5, 4);
    let mut cfg = a4_config(d);
    // Start near μ, optimum at −μ: F = ½‖2μ‖² = 8. β + ε is the target radius 2ησ.
    cfg.learner = LearnerConfig::new(1.0, 8.0, 2.0 * eta - 0.1, 0.1);
    let ldme_cfg = LdmeConfig::new(alpha, eta, 0.05);
    let (mut direct, mut reduced) = (0, 0);
    let mut worst = 0.0f64;
    for seed in 0..SEEDS {
        let mu = random_vector(derive_seed(seed, &[9]), d, 2.0);
        let samples = contaminated_samples(&mu, alpha, 20_000, seed);
        let list = ldme_subsample(&samples, &ldme_cfg, seed).unwrap();
        direct += (list.closest(&mu).unwrap().1 <= 2.0 * eta) as usize;
        let est = mean_est_via_noisy_grad_desc(&samples, &cfg, true, seed).unwrap();
        let err = est.list.closest(&mu).map_or(f64::INFINITY, |c| c.1);
        worst = worst.max(err);
        reduced += (err <= 2.0 * eta) as usize;
    }
    verdict(
        direct >= 18 && reduced >= 18,
        format!("direct {direct}/20, via optimization {reduced}/20 within 1.0 (worst {worst:.3})"),
    )
}

fn a11() -> Verdict {
    let mut failures = Vec::new();
    let mut check = |name: &str, ok: bool| {
        if !ok {
            failures.push(name.to_string());
        }
    };

    let noise = two_point_noise(0.3);
    let (s1, s2) = scalar_pair(&noise, &unit_gaussian(), 7.3, 20_000, 1);
    let cfg = Shift1DConfig::new(0.25, 0.3, 1.0);
    check("shift1d rerun", shift1d(&s1, &s2, &cfg, 5).unwrap() == shift1d(&s1, &s2, &cfg, 5).unwrap());
    check("sample_oblivious rerun", sample_oblivious(&noise, 1000, 3).unwrap() == sample_oblivious(&noise, 1000, 3).unwrap());
    check(
        "witness rerun",
        median_tightness_witness(&WitnessSpec::new(0.001, 0.5), 1000, 3).unwrap()
            == median_tightness_witness(&WitnessSpec::new(0.001, 0.5), 1000, 3).unwrap(),
    );
    check("hardness rerun", hardness_pair(4, &[1, -1, 1, 1], 1000, 3).unwrap() == hardness_pair(4, &[1, -1, 1, 1], 1000, 3).unwrap());

    let v = random_vector(4, 4, 2.0);
    let (h1, h2) = vector_pair(&noise, &unit_gaussian(), &v, 8_000, 2);
    let amp = AmplifyConfig::default().with_trials(3);
    check("shift_highd rerun", shift_highd(&h1, &h2, &cfg, &amp, 9).unwrap() == shift_highd(&h1, &h2, &cfg, &amp, 9).unwrap());

    let samples = contaminated_samples(&v, 0.3, 2000, 3);
    let lcfg = LdmeConfig::new(0.3, 0.5, 0.05).with_repeats_cap(500);
    check("ldme rerun", ldme_subsample(&samples, &lcfg, 4).unwrap() == ldme_subsample(&samples, &lcfg, 4).unwrap());

    let mut small = a4_config(4);
    small.ldme = small.ldme.with_repeats_cap(20);
    small.learner.max_iters = Some(5);
    let run = || {
        let f = SmoothObjective::quadratic(vec![1.0, 0.0, -1.0, 0.5]);
        let mut o = make_oracle(f, noise.clone(), unit_gaussian()).unwrap();
        noisy_grad_desc(&mut o, &small, 11).unwrap()
    };
    check("noisy_grad_desc rerun", run() == run());
    check(
        "mean_est_via_ldso rerun",
        mean_est_via_noisy_grad_desc(&samples, &small, true, 2).unwrap()
            == mean_est_via_noisy_grad_desc(&samples, &small, true, 2).unwrap(),
    );

    // Translation on a dyadic grid: every internal statistic is exact.
    let grid = |b: &SampleBatch| SampleBatch::from_scalars(b.as_slice().iter().map(|x| (x * 1024.0).round() / 1024.0).collect());
    let (g1, g2) = (grid(&s1), grid(&s2));
    let base = shift1d(&g1, &g2, &cfg, 5).unwrap();
    for c in [3.25, -17.5, 1024.0] {
        let moved = shift1d(&g1.translated(&[c]), &g2, &cfg, 5).unwrap();
        check("shift1d rough translation", moved.rough == base.rough + c);
        check("shift1d refinement invariance", moved.refinement == base.refinement && moved.trace == retag(&base, &moved));
        let ulp = (base.value + c).abs() * f64::EPSILON;
        check("shift1d value translation", (moved.value - (base.value + c)).abs() <= ulp);
    }
    for lambda in [0.25, 2.0, 8.0] {
        let scaled_cfg = Shift1DConfig { sigma: cfg.sigma * lambda, ..cfg.clone() };
        let scaled = shift1d(&s1.scaled(lambda), &s2.scaled(lambda), &scaled_cfg, 5).unwrap();
        let plain = shift1d(&s1, &s2, &cfg, 5).unwrap();
        check("shift1d scale", scaled.value == plain.value * lambda && scaled.rough == plain.rough * lambda);
    }
    let grid_rows = SampleBatch::new(4, samples.as_slice().iter().map(|x| (x * 64.0).round() / 64.0).collect()).unwrap();
    let shift = [0.5, -3.0, 128.0, 0.015625];
    let moved = ldme_subsample(&grid_rows.translated(&shift), &lcfg, 4).unwrap();
    let expected = ldme_subsample(&grid_rows, &lcfg, 4).unwrap().translated(&shift);
    check("ldme translation", moved.candidates() == expected.candidates());

    verdict(failures.is_empty(), if failures.is_empty() { "all reruns identical, equivariances exact".into() } else { format!("failed: {failures:?}") })
}

/// The moved run's trace with estimates rewritten to the base run's, so only
/// translation-invariant fields are compared.
fn retag(base: &oblivion_core::ShiftEstimate, moved: &oblivion_core::ShiftEstimate) -> Vec<oblivion_core::shift1d::RoundRecord> {
    base.trace
        .iter()
        .zip(&moved.trace)
        .map(|(b, m)| oblivion_core::shift1d::RoundRecord { estimate: m.estimate, ..b.clone() })
        .collect()
}

type Criterion = (&'static str, fn() -> Verdict, Duration);

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("A1", a1, Duration::from_secs(5)),
        ("A2", a2, Duration::from_secs(60)),
        ("A3", a3, Duration::from_secs(300)),
        ("A4", a4, Duration::from_secs(600)),
        ("A5", a5, Duration::from_secs(30)),
        ("A6", a6, Duration::from_secs(10)),
        ("A7", a7, Duration::from_secs(30)),
        ("A8", a8, Duration::from_secs(10)),
        ("A9", a9, Duration::from_secs(30)),
        ("A10", a10, Duration::from_secs(300)),
        ("A11", a11, Duration::from_secs(60)),
    ];
    let wanted: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut all_passed = true;
    for (id, run, budget) in criteria {
        if !wanted.is_empty() && !wanted.iter().any(|w| w == id) {
            continue;
        }
        let start = Instant::now();
        let v = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= budget;
        let passed = v.passed && in_time;
        all_passed &= passed;
        println!(
            "{id:<4} {} {} [{:.1}s of {}s]",
            if passed { "PASS" } else { "FAIL" },
            v.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    if all_passed { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
