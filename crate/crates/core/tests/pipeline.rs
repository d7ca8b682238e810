use oblivion_core::batch::SampleBatch;
use oblivion_core::ldme::{robust_mean_single, CandidateList};
use oblivion_core::ldso::{inexact_oracle, mean_est_via_noisy_grad_desc, noisy_grad_desc, noisy_grad_desc_with_list, LdsoConfig};
use oblivion_core::learner::{inexact_gd, LearnerConfig};
use oblivion_core::noise::{
    make_oracle, sample_oblivious, sample_oblivious_vectors, sample_observation, sample_observation_vectors,
    ObliviousNoiseSpec, ObservationNoiseSpec, TailSpec,
};
use oblivion_core::objective::SmoothObjective;
use oblivion_core::rng::{derive_seed, stream_rng};
use oblivion_core::shift1d::{fine_step, rough_estimate, Shift1DConfig};
use oblivion_core::shifthd::random_sign_basis;
use oblivion_core::Error;
use rand::Rng;
use rand_distr::StandardNormal;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn gaussian_vector(seed: u64, d: usize, scale: f64) -> Vec<f64> {
    let mut rng = stream_rng(seed, 100);
    (0..d).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn clean_config(learner: LearnerConfig) -> LdsoConfig {
    let mut cfg = LdsoConfig::new(0.25, 1.0, 1.0, 0.05, learner);
    cfg.shift.min_slice = Some(4);
    cfg.amplify.trials = 3;
    cfg
}

fn two_point(alpha: f64) -> ObliviousNoiseSpec {
    ObliviousNoiseSpec::new(alpha, TailSpec::TwoPoint { magnitude: 1e3 })
}

#[test]
fn reduction_is_transparent_without_noise() {
    let c = vec![1.5, -0.75, 2.0];
    let f = SmoothObjective::quadratic(c.clone());
    let learner = LearnerConfig { max_iters: Some(30), keep_iterates: true, ..LearnerConfig::new(1.0, 10.0, 0.0, 1e-6) };
    let cfg = clean_config(learner.clone());
    let mut o = make_oracle(f.clone(), ObliviousNoiseSpec::none(), ObservationNoiseSpec::none()).unwrap();
    let l0 = CandidateList::from_vectors(3, vec![f.gradient(&[0.0; 3])]).unwrap();
    let out = noisy_grad_desc_with_list(&mut o, l0, &cfg, 7).unwrap();
    let plain = inexact_gd(3, |x, _| Ok(f.gradient(x)), &f.gradient(&[0.0; 3]), &learner).unwrap();
    let path = &out.paths[0];
    assert_eq!(path.iterates.len(), plain.iterates.len());
    for (k, (a, b)) in path.iterates.iter().zip(&plain.iterates).enumerate() {
        assert!(dist(a, b) <= 1e-9 * norm(b).max(1.0), "iterate {k}: {a:?} vs {b:?}");
    }
}

#[test]
fn list_size_is_conserved() {
    let f = SmoothObjective::quadratic(vec![1.0, -1.0]);
    let mut o = make_oracle(f.clone(), two_point(0.5), ObservationNoiseSpec::Gaussian { sigma: 1.0 }).unwrap();
    let mut cfg = LdsoConfig::new(0.5, 0.5, 1.0, 0.05, LearnerConfig { max_iters: Some(4), ..LearnerConfig::new(1.0, 2.0, 0.5, 0.1) });
    cfg.ldme = cfg.ldme.with_repeats_cap(12);
    cfg.amplify.trials = 3;
    let out = noisy_grad_desc(&mut o, &cfg, 2).unwrap();
    assert_eq!(out.paths.len(), out.initial.len());
    assert_eq!(out.paths.len(), 12);
    for (i, p) in out.paths.iter().enumerate() {
        assert_eq!(p.index, i);
        assert_eq!(p.start, out.initial.get(i));
    }
}

#[test]
fn good_path_tracks_the_true_gradient() {
    let d = 2;
    let f = SmoothObjective::quadratic(vec![0.8, -0.6]);
    let g0 = f.gradient(&[0.0; 2]);
    let mut violations = 0;
    let mut checked = 0;
    for seed in 0..5u64 {
        let mut o = make_oracle(f.clone(), two_point(0.7), ObservationNoiseSpec::Gaussian { sigma: 1.0 }).unwrap();
        let mut cfg = LdsoConfig::new(0.5, 0.7, 1.0, 0.05, LearnerConfig { max_iters: Some(8), ..LearnerConfig::new(1.0, 2.0, 0.5, 0.1) });
        cfg.ldme = cfg.ldme.with_repeats_cap(30);
        // The minimum batch only meets the per-slice precondition; the contract needs headroom.
        cfg.m_shift = Some(4 * cfg.min_shift_batch(d).unwrap());
        let out = noisy_grad_desc(&mut o, &cfg, seed).unwrap();
        let (good, _) = out.initial.closest(&g0).unwrap();
        for rec in out.trace.iter().filter(|r| r.path == good) {
            checked += 1;
            violations += (rec.true_error.unwrap() > 4.0 * cfg.eta * cfg.sigma) as usize;
        }
        assert_eq!(d, out.initial.dim());
    }
    assert!(checked > 0);
    assert!(violations * 10 <= checked, "{violations} of {checked} good-path steps above 4·eta·sigma");
}

#[test]
fn inexact_oracle_noiseless_examples() {
    let c = vec![0.25, -1.0, 2.0];
    let f = SmoothObjective::quadratic(c);
    let mut o = make_oracle(f.clone(), ObliviousNoiseSpec::none(), ObservationNoiseSpec::none()).unwrap();
    let cfg = clean_config(LearnerConfig::default());
    let l0 = CandidateList::from_vectors(3, vec![f.gradient(&[0.0; 3]), vec![5.0, 5.0, -5.0]]).unwrap();
    let (same, est) = inexact_oracle(&[0.0; 3], &mut o, &l0, &cfg, None, 1).unwrap();
    assert_eq!(same.candidates(), l0.candidates());
    assert!(est.value.iter().all(|v| *v == 0.0));
    let x = [3.0, -2.5, 0.125];
    let (moved, _) = inexact_oracle(&x, &mut o, &l0, &cfg, None, 2).unwrap();
    for (got, base) in moved.candidates().iter().zip(l0.candidates()) {
        let want: Vec<f64> = base.iter().zip(&x).map(|(b, x)| b + x).collect();
        assert!(dist(got, &want) <= 1e-9 * norm(&want));
    }
}

#[test]
fn inexact_oracle_good_index_under_heavy_noise() {
    let d = 8;
    let mut hits = 0;
    for seed in 0..20u64 {
        let c = gaussian_vector(derive_seed(seed, &[9]), d, 1.0);
        let f = SmoothObjective::quadratic(c);
        let mut o = make_oracle(f.clone(), two_point(0.3), ObservationNoiseSpec::Gaussian { sigma: 1.0 }).unwrap();
        let mut cfg = LdsoConfig::new(0.25, 0.3, 1.0, 0.05, LearnerConfig::default());
        cfg.amplify.trials = 3;
        cfg.m_shift = Some(100_000);
        let g0 = f.gradient(&vec![0.0; d]);
        let l0 = CandidateList::from_vectors(d, vec![vec![40.0; d], g0]).unwrap();
        let x = gaussian_vector(derive_seed(seed, &[10]), d, 1.0);
        let (list, _) = inexact_oracle(&x, &mut o, &l0, &cfg, None, seed).unwrap();
        hits += (dist(list.get(1), &f.gradient(&x)) <= 1.0) as usize;
    }
    assert!(hits >= 18, "{hits}/20 seeds within 1.0");
}

#[test]
fn mean_estimation_of_constant_samples() {
    let mu = vec![0.75, -1.5, 3.0];
    let samples = SampleBatch::repeat(&mu, 200);
    let cfg = clean_config(LearnerConfig { max_iters: Some(80), ..LearnerConfig::new(1.0, 10.0, 0.0, 1e-6) });
    let est = mean_est_via_noisy_grad_desc(&samples, &cfg, true, 4).unwrap();
    let (_, err) = est.list.closest(&mu).unwrap();
    assert!(err <= 1e-9, "error {err}");
}

#[test]
fn mean_estimation_of_clean_gaussian_samples() {
    let d = 2;
    let mu = vec![1.0, -2.0];
    let z = sample_observation_vectors(&ObservationNoiseSpec::Gaussian { sigma: 1.0 }, d, 50_000, 5).unwrap();
    let samples = SampleBatch::new(d, z.into_vec()).unwrap().translated(&mu);
    let mut cfg = LdsoConfig::new(0.25, 1.0, 1.0, 0.05, LearnerConfig { max_iters: Some(20), ..LearnerConfig::new(1.0, 4.0, 0.0, 0.1) });
    cfg.amplify.trials = 3;
    let est = mean_est_via_noisy_grad_desc(&samples, &cfg, true, 6).unwrap();
    assert_eq!(est.list.len(), 1);
    let coord = cfg.amplify.coordinate_config(&cfg.shift, d);
    let slice = cfg.shift_batch(d).unwrap() / coord.rounds();
    let bound = 4.0 * cfg.sigma / (slice as f64).sqrt();
    let err = dist(est.list.get(0), &mu);
    assert!(err <= bound, "error {err} above {bound}");
}

#[test]
fn sign_basis_rows_are_nearly_orthogonal() {
    let d = 64;
    let bound = 6.0 * ((d as f64).ln() / d as f64).sqrt();
    let good = (0..100u64)
        .filter(|&seed| {
            let b = random_sign_basis(d, seed);
            (0..d).all(|i| (i + 1..d).all(|j| b.row(i).iter().zip(b.row(j)).map(|(x, y)| x * y).sum::<f64>().abs() <= bound))
        })
        .count();
    assert!(good >= 95, "{good}/100 bases within {bound}");
}

#[test]
fn rough_estimate_examples() {
    let noise = two_point(0.3);
    let xi1 = sample_oblivious(&noise, 100_000, 1).unwrap();
    let xi2 = sample_oblivious(&noise, 100_000, 2).unwrap();
    let s1: Vec<f64> = xi1.as_slice().iter().map(|x| x + 4.5).collect();
    assert_eq!(rough_estimate(&s1, xi2.as_slice(), 10_000, 3).unwrap(), 4.5);

    let noise = two_point(0.25);
    let obs = ObservationNoiseSpec::Gaussian { sigma: 1.0 };
    let pairs = Shift1DConfig::new(0.25, 0.25, 1.0).pair_budget();
    for seed in 0..20u64 {
        let s1: Vec<f64> = sample_oblivious(&noise, 100_000, derive_seed(seed, &[1]))
            .unwrap()
            .as_slice()
            .iter()
            .zip(sample_observation(&obs, 100_000, derive_seed(seed, &[2])).unwrap().as_slice())
            .map(|(a, b)| a + b + 7.3)
            .collect();
        let s2: Vec<f64> = sample_oblivious(&noise, 100_000, derive_seed(seed, &[3]))
            .unwrap()
            .as_slice()
            .iter()
            .zip(sample_observation(&obs, 100_000, derive_seed(seed, &[4])).unwrap().as_slice())
            .map(|(a, b)| a + b)
            .collect();
        let r = rough_estimate(&s1, &s2, pairs, seed).unwrap();
        assert!((r - 7.3).abs() <= 20.0, "seed {seed}: {r}");
    }
}

#[test]
fn fine_step_heavy_tail_example() {
    let cfg = Shift1DConfig::new(0.25, 0.25, 1.0);
    let a = cfg.initial_scale();
    let noise = ObliviousNoiseSpec::new(0.25, TailSpec::SymmetricPareto { exponent: 1.5, scale: 1.0 });
    let m = 200_000;
    let mut hits = 0;
    for seed in 0..20u64 {
        let xi1 = sample_oblivious(&noise, m, derive_seed(seed, &[1])).unwrap();
        let y1 = sample_observation(&ObservationNoiseSpec::Gaussian { sigma: 1.0 }, m, derive_seed(seed, &[2])).unwrap();
        let xi2 = sample_oblivious(&noise, m, derive_seed(seed, &[3])).unwrap();
        let y2 = sample_observation(&ObservationNoiseSpec::RecenteredPareto { t: 1.0 }, m, derive_seed(seed, &[4])).unwrap();
        let s1: Vec<f64> = xi1.as_slice().iter().zip(y1.as_slice()).map(|(a, b)| a + b).collect();
        let s2: Vec<f64> = xi2.as_slice().iter().zip(y2.as_slice()).map(|(a, b)| a + b).collect();
        let step = fine_step(&s1, &s2, a, &cfg).unwrap();
        hits += step.delta.is_some_and(|d| d.abs() <= 2.0 * cfg.eta * a * cfg.sigma) as usize;
    }
    assert!(hits >= 18, "{hits}/20 seeds within 2·eta·A·sigma");
}

#[test]
fn robust_mean_examples() {
    let mu = [2.0, -1.0];
    let m = 100_000;
    let z = sample_observation_vectors(&ObservationNoiseSpec::Gaussian { sigma: 1.0 }, 2, m, 3).unwrap();
    let rows: Vec<Vec<f64>> = z
        .rows()
        .enumerate()
        .map(|(i, r)| {
            let out = if i % 20 == 0 { 1e3 } else { 0.0 };
            r.iter().zip(&mu).map(|(v, c)| v * 2f64.sqrt() + c + out).collect()
        })
        .collect();
    let batch = SampleBatch::from_rows(2, &rows).unwrap();
    let est = robust_mean_single(&batch, 0.05, 0.1).unwrap();
    for (e, c) in est.iter().zip(&mu) {
        assert!((e - c).abs() <= 0.5, "{est:?}");
    }
    assert!(matches!(robust_mean_single(&batch, 0.2, 0.1), Err(Error::Contract(_))));

    let clean = sample_oblivious_vectors(&ObliviousNoiseSpec::none(), 2, 10, 1).unwrap();
    assert_eq!(robust_mean_single(&clean.translated(&mu), 0.0, 0.1).unwrap(), mu.to_vec());
}
