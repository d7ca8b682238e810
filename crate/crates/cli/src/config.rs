//! Experiment configuration files.

use std::path::{Path, PathBuf};

use oblivion_core::ldme::LdmeConfig;
use oblivion_core::ldso::LdsoConfig;
use oblivion_core::learner::LearnerConfig;
use oblivion_core::noise::{ObliviousNoiseSpec, ObservationNoiseSpec, TailSpec, WitnessSpec};
use oblivion_core::rng::derive_seed;
use oblivion_core::shift1d::Shift1DConfig;
use oblivion_core::shifthd::AmplifyConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Shift1d,
    Shifthd,
    Ldme,
    Ldso,
    Roundtrip,
    Witness,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Shift1d => "shift1d",
            Self::Shifthd => "shifthd",
            Self::Ldme => "ldme",
            Self::Ldso => "ldso",
            Self::Roundtrip => "roundtrip",
            Self::Witness => "witness",
        }
    }

    fn default_axes(self) -> Axes {
        let (eta, alpha, m, d, t) = match self {
            Self::Shift1d => (0.25, 0.3, Some(400_000), 1, 7.3),
            Self::Shifthd => (0.25, 0.3, Some(400_000), 16, 5.0),
            Self::Ldme => (0.5, 0.3, Some(10_000), 4, 2.0),
            Self::Ldso => (0.5, 0.3, None, 8, 1.0),
            Self::Roundtrip => (0.5, 0.3, Some(20_000), 4, 2.0),
            Self::Witness => (0.25, 1e-3, Some(1_000_000), 1, 0.5),
        };
        Axes { eta: vec![eta], alpha: vec![alpha], m: vec![m], d: vec![d], t: vec![t] }
    }
}

/// `seeds = [1, 2, 3]` or `seeds = { base = 0, count = 20 }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    List(Vec<u64>),
    Range { base: u64, count: u64 },
}

impl Seeds {
    /// Seeds after an optional base override: it replaces `base`, or keys every listed seed.
    pub fn resolve(&self, base_override: Option<u64>) -> Vec<u64> {
        match (self, base_override) {
            (Self::Range { base, count }, over) => {
                let base = over.unwrap_or(*base);
                (0..*count).map(|i| base.wrapping_add(i)).collect()
            }
            (Self::List(list), None) => list.clone(),
            (Self::List(list), Some(over)) => list.iter().map(|s| derive_seed(over, &[*s])).collect(),
        }
    }
}

/// Lists of values to sweep; omitted axes take the kind's default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub eta: Option<Vec<f64>>,
    pub alpha: Option<Vec<f64>>,
    /// Batch size: per batch for the estimators, stored samples for `roundtrip`,
    /// shift batch for `ldso`.
    pub m: Option<Vec<usize>>,
    pub d: Option<Vec<usize>>,
    /// Shift size: `t` in one dimension, `‖v‖`, `‖μ‖` or `‖c‖` otherwise, the witness exponent.
    pub t: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// A row succeeds when its error is at most the threshold.
    #[default]
    Below,
    Above,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Threshold {
    pub value: f64,
    #[serde(default)]
    pub direction: Direction,
}

impl Threshold {
    pub fn accepts(&self, error: f64) -> bool {
        match self.direction {
            Direction::Below => error <= self.value,
            Direction::Above => error >= self.value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    /// `½‖x − c‖²` with a random center of norm `t`.
    #[default]
    Quadratic,
    /// Ridge-regularized logistic loss on synthetic data.
    Logistic,
}

/// Scalar settings shared by every sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub sigma: f64,
    pub delta: f64,
    pub objective: ObjectiveKind,
    /// Stored samples may be reshuffled and reused in `roundtrip`.
    pub allow_replay: bool,
    pub m_anchor: Option<usize>,
    pub cache_anchor: bool,
}

impl Default for Params {
    fn default() -> Self {
        Self { sigma: 1.0, delta: 0.05, objective: ObjectiveKind::Quadratic, allow_replay: true, m_anchor: None, cache_anchor: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Experiment id written to every row; defaults to the kind.
    pub name: Option<String>,
    pub kind: ExperimentKind,
    pub seeds: Seeds,
    /// CSV path, relative to the config file.
    pub output: PathBuf,
    /// Oblivious noise table; `alpha` is set from the sweep.
    pub noise: Option<toml::Table>,
    pub observation: Option<ObservationNoiseSpec>,
    #[serde(default)]
    pub sweep: Sweep,
    #[serde(default)]
    pub params: Params,
    /// Overrides for the estimators; `eta`, `alpha`, `sigma` and `delta` are set per point.
    pub shift: Option<Shift1DConfig>,
    pub amplify: Option<AmplifyConfig>,
    pub ldme: Option<LdmeConfig>,
    pub learner: Option<LearnerConfig>,
    pub threshold: Option<Threshold>,
    /// Largest fraction of failed rows before `run` exits with status 2.
    #[serde(default = "default_tolerance")]
    pub failure_tolerance: f64,
}

fn default_tolerance() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq)]
struct Axes {
    eta: Vec<f64>,
    alpha: Vec<f64>,
    m: Vec<Option<usize>>,
    d: Vec<usize>,
    t: Vec<f64>,
}

/// One combination of swept values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub eta: f64,
    pub alpha: f64,
    pub m: Option<usize>,
    pub d: usize,
    pub t: f64,
}

impl std::fmt::Display for Point {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "eta={} alpha={} d={} t={}", self.eta, self.alpha, self.d, self.t)?;
        if let Some(m) = self.m {
            write!(f, " m={m}")?;
        }
        Ok(())
    }
}

impl ExperimentConfig {
    /// Reads and validates a config file.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let cfg: Self = toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn experiment_id(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.kind.name().to_string())
    }

    /// Output path resolved against the directory holding `config_path`.
    pub fn output_path(&self, config_path: &Path) -> PathBuf {
        match config_path.parent() {
            Some(dir) if self.output.is_relative() => dir.join(&self.output),
            _ => self.output.clone(),
        }
    }

    fn axes(&self) -> CliResult<Axes> {
        fn pick<T: Clone>(field: &str, given: &Option<Vec<T>>, default: Vec<T>) -> CliResult<Vec<T>> {
            match given {
                Some(v) if v.is_empty() => Err(CliError::Config(format!("sweep.{field}: list must not be empty"))),
                Some(v) => Ok(v.clone()),
                None => Ok(default),
            }
        }
        let defaults = self.kind.default_axes();
        let axes = Axes {
            eta: pick("eta", &self.sweep.eta, defaults.eta)?,
            alpha: pick("alpha", &self.sweep.alpha, defaults.alpha)?,
            m: pick("m", &self.sweep.m.as_ref().map(|v| v.iter().map(|m| Some(*m)).collect()), defaults.m)?,
            d: pick("d", &self.sweep.d, defaults.d)?,
            t: pick("t", &self.sweep.t, defaults.t)?,
        };
        if matches!(self.kind, ExperimentKind::Shift1d | ExperimentKind::Witness) && axes.d != [1] {
            return Err(CliError::Config(format!("sweep.d: {} experiments are one-dimensional", self.kind.name())));
        }
        if axes.d.contains(&0) {
            return Err(CliError::Config("sweep.d: dimensions must be at least 1".into()));
        }
        Ok(axes)
    }

    /// Sweep points in row order: `eta` outermost, then `alpha`, `m`, `d`, `t`.
    pub fn points(&self) -> CliResult<Vec<Point>> {
        let a = self.axes()?;
        let mut out = Vec::new();
        for &eta in &a.eta {
            for &alpha in &a.alpha {
                for &m in &a.m {
                    for &d in &a.d {
                        for &t in &a.t {
                            out.push(Point { eta, alpha, m, d, t });
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn oblivious_noise(&self, alpha: f64) -> CliResult<ObliviousNoiseSpec> {
        let spec = match &self.noise {
            None => ObliviousNoiseSpec::new(alpha, TailSpec::TwoPoint { magnitude: 1e3 }),
            Some(table) => {
                let mut table = table.clone();
                if table.contains_key("alpha") {
                    return Err(CliError::Config("noise.alpha: alpha is set by sweep.alpha".into()));
                }
                table.insert("alpha".into(), toml::Value::Float(alpha));
                table.try_into().map_err(|e| CliError::Config(format!("noise: {e}")))?
            }
        };
        spec.validate().map_err(|e| CliError::Config(format!("noise: {e}")))?;
        Ok(spec)
    }

    pub fn observation_noise(&self) -> CliResult<ObservationNoiseSpec> {
        let spec = self.observation.clone().unwrap_or(ObservationNoiseSpec::Gaussian { sigma: 1.0 });
        spec.validate().map_err(|e| CliError::Config(format!("observation: {e}")))?;
        Ok(spec)
    }

    pub fn shift_config(&self, p: &Point) -> Shift1DConfig {
        let base = self.shift.clone().unwrap_or_default();
        Shift1DConfig { eta: p.eta, alpha: p.alpha, sigma: self.params.sigma, delta: self.params.delta, ..base }
    }

    pub fn amplify_config(&self) -> AmplifyConfig {
        self.amplify.clone().unwrap_or_else(|| AmplifyConfig::from_delta(self.params.delta))
    }

    pub fn ldme_config(&self, p: &Point) -> LdmeConfig {
        let base = self.ldme.clone().unwrap_or_default();
        LdmeConfig { alpha: p.alpha, eta: p.eta, delta: self.params.delta, ..base }
    }

    pub fn ldso_config(&self, p: &Point) -> LdsoConfig {
        let learner = self.learner.clone().unwrap_or_default();
        let mut cfg = LdsoConfig::new(p.eta, p.alpha, self.params.sigma, self.params.delta, learner);
        cfg.shift = self.shift_config(p);
        cfg.amplify = self.amplify_config();
        cfg.ldme = self.ldme_config(p);
        cfg.m_anchor = self.params.m_anchor;
        cfg.cache_anchor = self.params.cache_anchor;
        if self.kind == ExperimentKind::Ldso {
            cfg.m_shift = p.m;
        }
        cfg
    }

    /// Checks every sweep point against the estimators' own validation.
    pub fn validate(&self) -> CliResult<()> {
        if self.seeds.resolve(None).is_empty() {
            return Err(CliError::Config("seeds: at least one seed is required".into()));
        }
        if !(0.0..=1.0).contains(&self.failure_tolerance) {
            return Err(CliError::Config("failure_tolerance: must lie in [0, 1]".into()));
        }
        if let Some(th) = &self.threshold {
            if !th.value.is_finite() {
                return Err(CliError::Config("threshold.value: must be finite".into()));
            }
        }
        if self.output.as_os_str().is_empty() {
            return Err(CliError::Config("output: path must not be empty".into()));
        }
        self.observation_noise()?;
        for (i, p) in self.points()?.iter().enumerate() {
            self.validate_point(p).map_err(|e| CliError::Config(format!("sweep point {i} ({p}): {e}")))?;
        }
        Ok(())
    }

    fn validate_point(&self, p: &Point) -> Result<(), String> {
        let core = |r: oblivion_core::Result<()>| r.map_err(|e| e.to_string());
        let cli = |r: CliResult<()>| r.map_err(|e| e.to_string());
        let need_m = |m: Option<usize>, required: usize| match m {
            Some(m) if m < required => Err(format!("m = {m} is below the required {required}")),
            _ => Ok(()),
        };
        match self.kind {
            ExperimentKind::Witness => {
                core(WitnessSpec::new(p.alpha, p.t).validate())?;
                need_m(p.m, 1)
            }
            ExperimentKind::Shift1d => {
                cli(self.oblivious_noise(p.alpha).map(drop))?;
                let cfg = self.shift_config(p);
                core(cfg.validate())?;
                need_m(p.m, cfg.min_samples().map_err(|e| e.to_string())?)
            }
            ExperimentKind::Shifthd => {
                cli(self.oblivious_noise(p.alpha).map(drop))?;
                let cfg = self.shift_config(p);
                core(cfg.validate())?;
                let amp = self.amplify_config();
                core(amp.validate())?;
                need_m(p.m, amp.coordinate_config(&cfg, p.d).min_samples().map_err(|e| e.to_string())?)
            }
            ExperimentKind::Ldme => {
                cli(self.oblivious_noise(p.alpha).map(drop))?;
                let cfg = self.ldme_config(p);
                core(cfg.validate())?;
                need_m(p.m, cfg.subsample_size())
            }
            ExperimentKind::Ldso | ExperimentKind::Roundtrip => {
                cli(self.oblivious_noise(p.alpha).map(drop))?;
                let cfg = self.ldso_config(p);
                core(cfg.validate())?;
                core(cfg.anchor_batch(p.d).map(drop))?;
                if self.kind == ExperimentKind::Roundtrip {
                    need_m(p.m, 1)?;
                }
                Ok(())
            }
        }
    }
}
