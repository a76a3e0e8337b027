//! Birkhoff averages along selected orbits, the deterministic reference
//! integral over cover centers, and ensemble experiments.

use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use serde::{Serialize, Serializer};

use crate::dynamics::ComplexPoint;
use crate::error::{Error, Result};
use crate::lattice::{make_lattice, BorelCover};
use crate::rng::derive_seed;
use crate::selector::{adaptive_select, select_pseudorandom, ObjectiveForm, ObjectiveParams, SelectionReport};
use crate::transfer::DensityCache;

type Eval = dyn Fn(ComplexPoint) -> f64 + Send + Sync;

/// A bounded observable `g` on the Julia set.
#[derive(Clone)]
pub struct TestFunction {
    name: String,
    eval: Arc<Eval>,
}

impl TestFunction {
    pub fn new(name: impl Into<String>, eval: impl Fn(ComplexPoint) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            eval: Arc::new(eval),
        }
    }

    pub fn modulus() -> Self {
        Self::new("modulus", |z| z.norm())
    }

    pub fn real() -> Self {
        Self::new("real", |z| z.re)
    }

    pub fn imag() -> Self {
        Self::new("imag", |z| z.im)
    }

    pub fn modulus_squared() -> Self {
        Self::new("modulus_squared", |z| z.norm_sqr())
    }

    pub const BUILTIN_NAMES: [&'static str; 4] = ["modulus", "real", "imag", "modulus_squared"];

    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "modulus" | "abs" => Ok(Self::modulus()),
            "real" | "re" => Ok(Self::real()),
            "imag" | "im" => Ok(Self::imag()),
            "modulus_squared" | "abs2" => Ok(Self::modulus_squared()),
            other => Err(Error::InvalidArgument(format!(
                "unknown test function {other:?}, expected one of {:?}",
                Self::BUILTIN_NAMES
            ))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn eval(&self, z: ComplexPoint) -> f64 {
        (self.eval)(z)
    }
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("TestFunction").field(&self.name).finish()
    }
}

impl Serialize for TestFunction {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.name)
    }
}

/// Mean of `g` over the trajectory.
pub fn birkhoff_average(trajectory: &[ComplexPoint], g: &TestFunction) -> Result<f64> {
    if trajectory.is_empty() {
        return Err(Error::InvalidArgument("Birkhoff average of an empty trajectory".into()));
    }
    Ok(trajectory.iter().map(|&z| g.eval(z)).sum::<f64>() / trajectory.len() as f64)
}

/// Mean of `g` over all cover centers, i.e. over `T^{-m}(z0)`.
pub fn reference_integral(cover: &BorelCover, g: &TestFunction) -> Result<f64> {
    birkhoff_average(&cover.centers, g)
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig<'a> {
    pub cover: &'a BorelCover,
    pub densities: &'a DensityCache,
    pub ell: usize,
    /// Lattice depth `N`.
    pub depth: usize,
    /// Sum length `n` of the objective.
    pub n_sum: usize,
    pub form: ObjectiveForm,
    pub g: TestFunction,
    /// Points of the selected orbit entering the average; `None` means `N`.
    pub average_len: Option<usize>,
    /// `(threshold, p_max)`: lengthen the sum until the normalized minimum
    /// reaches the threshold instead of using a fixed `n`.
    pub adaptive: Option<(f64, usize)>,
}

impl<'a> ExperimentConfig<'a> {
    pub fn new(cover: &'a BorelCover, densities: &'a DensityCache, ell: usize, depth: usize, n_sum: usize) -> Self {
        Self {
            cover,
            densities,
            ell,
            depth,
            n_sum,
            form: ObjectiveForm::Conformal,
            g: TestFunction::modulus(),
            average_len: None,
            adaptive: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentParams {
    pub m_cover: u32,
    pub ell: usize,
    #[serde(rename = "N")]
    pub depth: usize,
    pub n: usize,
    pub alpha: usize,
    pub h: f64,
    pub c: ComplexPoint,
    pub seed: u64,
    pub form: ObjectiveForm,
    pub g: String,
    pub average_len: usize,
    pub threshold: Option<f64>,
    pub p_max: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub index: usize,
    pub seed: u64,
    pub average: Option<f64>,
    pub beta_sq: Option<f64>,
    pub selection: Option<SelectionReport>,
    /// Whether the adaptive threshold was reached; `None` for fixed `n`.
    pub attained: Option<bool>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub params: ExperimentParams,
    /// Mean of the per-trial averages over completed trials.
    pub mu: f64,
    /// Sample standard deviation (`alpha - 1` denominator); zero for one trial.
    pub sigma: f64,
    pub completed: usize,
    pub incomplete: bool,
    pub per_trial: Vec<TrialRecord>,
    /// Wall-clock time; machine dependent and left out of serialized output.
    #[serde(skip)]
    pub runtime_seconds: f64,
}

/// Mean and sample standard deviation.
pub fn mean_and_sigma(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs `alpha` independent trials, each on a fresh lattice seeded from
/// `(master_seed, trial)`. A failing trial is recorded, not fatal.
///
/// Trials run one after another with each lattice built and searched in
/// parallel, so only one `ell * (N + 1)` lattice is alive at a time.
pub fn run_experiment(config: &ExperimentConfig<'_>, alpha: usize, master_seed: u64) -> Result<ExperimentReport> {
    if alpha == 0 {
        return Err(Error::InvalidArgument("alpha must be at least 1".into()));
    }
    if config.ell == 0 || config.depth == 0 || config.n_sum == 0 {
        return Err(Error::InvalidArgument("ell, N and n must all be at least 1".into()));
    }
    let average_len = config.average_len.unwrap_or(config.depth);
    if average_len == 0 || average_len > config.depth + 1 {
        return Err(Error::InvalidArgument(format!(
            "average length {average_len} outside 1..={}",
            config.depth + 1
        )));
    }
    let started = Instant::now();
    let params = ObjectiveParams {
        n_sum: config.n_sum,
        cover: config.cover,
        densities: config.densities,
        h: config.densities.h,
        form: config.form,
    };

    let per_trial: Vec<TrialRecord> = (0..alpha)
        .map(|index| {
            let seed = derive_seed(master_seed, index as u64);
            let outcome = make_lattice(config.cover, config.ell, config.depth, seed).and_then(|lattice| {
                let (point, p_used, attained) = match config.adaptive {
                    None => (select_pseudorandom(&lattice, &params)?, config.n_sum, None),
                    Some((threshold, p_max)) => {
                        let out = adaptive_select(|_| Ok(&lattice), &params, threshold, p_max)?;
                        (out.point, out.p_used, Some(out.attained))
                    }
                };
                let orbit = lattice.forward_trajectory(point.lattice_row, average_len);
                let average = birkhoff_average(&orbit, &config.g)?;
                Ok((point, p_used, attained, average))
            });
            match outcome {
                Ok((point, p_used, attained, average)) => TrialRecord {
                    index,
                    seed,
                    average: Some(average),
                    beta_sq: Some(point.beta_sq),
                    selection: Some(SelectionReport::new(&point, p_used)),
                    attained,
                    error: None,
                },
                Err(e) => TrialRecord {
                    index,
                    seed,
                    average: None,
                    beta_sq: None,
                    selection: None,
                    attained: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    let averages: Vec<f64> = per_trial.iter().filter_map(|t| t.average).collect();
    let (mu, sigma) = mean_and_sigma(&averages);
    Ok(ExperimentReport {
        params: ExperimentParams {
            m_cover: config.cover.m_cover,
            ell: config.ell,
            depth: config.depth,
            n: config.n_sum,
            alpha,
            h: config.densities.h,
            c: config.cover.map.c(),
            seed: master_seed,
            form: config.form,
            g: config.g.name().to_string(),
            average_len,
            threshold: config.adaptive.map(|a| a.0),
            p_max: config.adaptive.map(|a| a.1),
        },
        mu,
        sigma,
        completed: averages.len(),
        incomplete: averages.len() < alpha,
        per_trial,
        runtime_seconds: started.elapsed().as_secs_f64(),
    })
}

/// Parameter-study table: one row per report, columns `param,mu,sigma,time`
/// with `sigma` in units of 1e-3.
pub fn sweep_csv(param: &str, rows: &[(String, ExperimentReport)]) -> String {
    let mut out = format!("{param},mu,sigma_e3,time\n");
    for (value, report) in rows {
        out.push_str(&format!(
            "{value},{:.16e},{:.16e},{:.3}\n",
            report.mu,
            report.sigma * 1e3,
            report.runtime_seconds
        ));
    }
    out
}
