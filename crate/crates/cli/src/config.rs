//! Experiment configuration: a TOML file, overridden by command-line flags,
//! then resolved against per-command defaults.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use ncpfr::jacobi::Precision;
use ncpfr::measures::{default_n_range, HolderProbe};
use ncpfr::polydyn::{sample_cover_pairs, ExpandingPolynomial};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::Command;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolynomialSpec {
    Quadratic { a: f64 },
    ScaledCheb3 { c: f64 },
    /// Ascending coefficients.
    Custom { coefficients: Vec<f64> },
}

impl PolynomialSpec {
    pub fn build(&self) -> ncpfr::Result<ExpandingPolynomial> {
        match self {
            PolynomialSpec::Quadratic { a } => ExpandingPolynomial::quadratic(*a),
            PolynomialSpec::ScaledCheb3 { c } => ExpandingPolynomial::scaled_cheb3(*c),
            PolynomialSpec::Custom { coefficients } => ExpandingPolynomial::custom(coefficients),
        }
    }
}

/// Where base points `x` come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum XSpec {
    /// Explicit points; pair-based experiments use neighbouring points.
    Grid { points: Vec<f64> },
    /// Seeded uniform draws from the level-`level` cover of the Julia set.
    Random { count: usize, level: usize },
}

impl XSpec {
    pub fn pairs(&self, p: &ExpandingPolynomial, seed: u64) -> anyhow::Result<Vec<(f64, f64)>> {
        match self {
            XSpec::Grid { points } => {
                if points.len() < 2 {
                    bail!("x grid needs at least two points for pair-based experiments");
                }
                Ok(points.windows(2).map(|w| (w[0], w[1])).collect())
            }
            XSpec::Random { count, level } => Ok(sample_cover_pairs(p, *level, *count, seed)?),
        }
    }

    pub fn points(&self, p: &ExpandingPolynomial, seed: u64) -> anyhow::Result<Vec<f64>> {
        match self {
            XSpec::Grid { points } => Ok(points.clone()),
            XSpec::Random { count, level } => {
                let pairs = sample_cover_pairs(p, *level, count.div_ceil(2), seed)?;
                Ok(pairs.into_iter().flat_map(|(a, b)| [a, b]).take(*count).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub p0: f64,
    pub growth_max: f64,
    pub c_max: f64,
    pub r2_min: f64,
    pub ht_ratio_max: f64,
    pub diag_factor: f64,
    /// Levels `n ≤ small_n_max` form the baseline of uniformity ratios.
    pub small_n_max: usize,
    pub exponent_rel: f64,
    pub random_ratio_max: f64,
    pub identity: f64,
    pub flow_ratio: [f64; 2],
    pub flow_abs: f64,
    pub re: f64,
    pub renorm_c_max: f64,
    pub independence: f64,
    pub defect_ratio_max: f64,
    pub q_max: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            p0: 1e-9,
            growth_max: 1.5,
            c_max: 0.9,
            r2_min: 0.95,
            ht_ratio_max: 1.5,
            diag_factor: 1.5,
            small_n_max: 4,
            exponent_rel: 0.2,
            random_ratio_max: 5.0,
            identity: 1e-6,
            flow_ratio: [30.0, 300.0],
            flow_abs: 1e-4,
            re: 1e-8,
            renorm_c_max: 0.99,
            independence: 1e-6,
            defect_ratio_max: 0.9,
            q_max: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out: PathBuf,
    /// Largest matrix size `d = N^n` any command may build.
    pub max_d: usize,
    pub precision: Option<Precision>,
    pub n_range: Option<[usize; 2]>,
    pub t_grid: Option<Vec<f64>>,
    /// `ε̂` of the testing conditions and the two-sided pressure check.
    pub eps_hat: f64,
    pub random_intervals: usize,
    pub probe: HolderProbe,
    /// Hölder exponent of `|x_1 - x_2|` in the weak PFR ratio.
    pub gamma: f64,
    pub polynomial: PolynomialSpec,
    pub x: XSpec,
    pub tolerances: Tolerances,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 1,
            out: PathBuf::from("ncpfr-out"),
            max_d: 8192,
            precision: None,
            n_range: None,
            t_grid: None,
            eps_hat: 0.05,
            random_intervals: 1000,
            probe: HolderProbe::default(),
            gamma: 0.5,
            polynomial: PolynomialSpec::Quadratic { a: 5.0 },
            x: XSpec::Random { count: 20, level: 2 },
            tolerances: Tolerances::default(),
        }
    }
}

fn grid(lo: f64, step: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| lo + k as f64 * step).collect()
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Fills every optional field with the default of `command` and checks
    /// the result.
    pub fn resolve(mut self, command: Command, p: &ExpandingPolynomial) -> anyhow::Result<Self> {
        let (n_range, t_grid, precision) = match command {
            Command::Pressure => {
                let (lo, hi) = default_n_range(p.degree());
                ([lo, hi], grid(0.0, 0.1, 21), Precision::Double)
            }
            Command::Lipschitz => ([2, 8], grid(0.0, 0.5, 5), Precision::Double),
            Command::Contraction => ([2, 8], vec![0.0], Precision::Double),
            Command::HilbertNorm => ([2, 8], grid(0.0, 0.25, 9), Precision::Double),
            Command::TestConditions => ([2, 8], grid(0.0, 0.5, 5), Precision::Double),
            Command::FlowCheck => ([1, 6], vec![0.0, 1.0, 2.0], Precision::Extended),
            Command::Renorm => ([1, 3], vec![0.0], Precision::Double),
            Command::WeakPfr => ([2, 8], vec![0.0, 1.0], Precision::Double),
        };
        self.n_range.get_or_insert(n_range);
        self.t_grid.get_or_insert(t_grid);
        self.precision.get_or_insert(precision);
        self.validate(p)?;
        Ok(self)
    }

    fn validate(&self, p: &ExpandingPolynomial) -> anyhow::Result<()> {
        let [lo, hi] = self.n_range();
        if lo < 1 || hi < lo {
            bail!("n_range must satisfy 1 <= lo <= hi, got [{lo}, {hi}]");
        }
        let d = (p.degree() as u128).checked_pow(hi as u32);
        if d.is_none_or(|d| d > self.max_d as u128) {
            bail!("level {hi} needs d = {}^{hi} nodes, above max_d = {}", p.degree(), self.max_d);
        }
        if self.t_grid().iter().any(|t| !t.is_finite()) {
            bail!("t_grid must be finite");
        }
        if let XSpec::Grid { points } = &self.x {
            if let Some(x) = points.iter().find(|x| !(x.abs() <= 1.0)) {
                bail!("x grid point {x} lies outside [-1, 1]");
            }
        }
        Ok(())
    }

    pub fn n_range(&self) -> [usize; 2] {
        self.n_range.expect("resolved config")
    }

    pub fn t_grid(&self) -> &[f64] {
        self.t_grid.as_deref().expect("resolved config")
    }

    pub fn precision(&self) -> Precision {
        self.precision.expect("resolved config")
    }

    /// First 16 hex digits of the SHA-256 of the canonical TOML form, with
    /// the output directory left out.
    pub fn hash(&self) -> anyhow::Result<String> {
        let text = toml::to_string(&ExperimentConfig {
            out: PathBuf::new(),
            ..self.clone()
        })?;
        let digest = Sha256::digest(text.as_bytes());
        Ok(digest[..8].iter().map(|b| format!("{b:02x}")).collect())
    }
}
