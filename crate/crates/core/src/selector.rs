//! Least-squares selection of a pseudo-generic point.
//!
//! For a candidate orbit `x_0, x_1, ...` and each cover ball `A` with center
//! `z*`, the discretized conformal equation compares the time spent in
//! `T(A)`, weighted by `1/f(T z*)`, with the `|T'|^h`-weighted time spent in
//! `A`, weighted by `1/f(z*)`. The objective is the sum over balls of the
//! squared difference, and the selected point is the lattice row that
//! minimizes it.

use std::borrow::Borrow;

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{ComplexPoint, QuadraticMap};
use crate::error::{Error, Result};
use crate::lattice::{BorelCover, Lattice};
use crate::transfer::DensityCache;

/// Which discretization of the residual to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveForm {
    /// Both occupation sums over `x_0..x_{n-1}`, `1_{T(A)}(x_k)` against
    /// `1_A(x_k) |T'(x_k)|^h`, each divided by `n`.
    #[default]
    Conformal,
    /// `1_{T(A)}(x_{k+1})` against `1_A(x_k) |T'(x_k)|^h`.
    Shifted,
    /// Literal behavior of the original MATLAB `opteval`: the `A` window is
    /// `x_1..x_{n+1}` with weight `2 |x|^h`, the `T(A)` window `x_0..x_n`
    /// tests `Re(+-x - z*) < delta`, sums are not divided by `n`, and the
    /// total is divided by the lattice depth.
    Appendix,
}

impl ObjectiveForm {
    /// Trajectory points the form reads for a sum of length `n`.
    pub fn points_needed(self, n: usize) -> usize {
        match self {
            ObjectiveForm::Conformal | ObjectiveForm::Shifted => n + 1,
            ObjectiveForm::Appendix => n + 2,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ObjectiveParams<'a> {
    pub n_sum: usize,
    pub cover: &'a BorelCover,
    pub densities: &'a DensityCache,
    pub h: f64,
    pub form: ObjectiveForm,
}

impl<'a> ObjectiveParams<'a> {
    pub fn new(n_sum: usize, cover: &'a BorelCover, densities: &'a DensityCache) -> Self {
        Self {
            n_sum,
            cover,
            densities,
            h: densities.h,
            form: ObjectiveForm::Conformal,
        }
    }

    pub fn with_form(self, form: ObjectiveForm) -> Self {
        Self { form, ..self }
    }

    pub fn with_sum_len(self, n_sum: usize) -> Self {
        Self { n_sum, ..self }
    }

    fn validate(&self) -> Result<()> {
        if self.n_sum == 0 {
            return Err(Error::InvalidArgument("sum length n must be at least 1".into()));
        }
        if self.densities.len() != self.cover.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} cached densities for {} cover centers",
                self.densities.len(),
                self.cover.len()
            )));
        }
        Ok(())
    }
}

/// `|z - center| < radius`.
#[inline]
pub fn indicator_a(z: ComplexPoint, center: ComplexPoint, radius: f64) -> bool {
    (z - center).norm() < radius
}

/// Whether either preimage of `z` lies in the ball, i.e. `z` lies in `T(A)`.
#[inline]
pub fn indicator_ta(map: &QuadraticMap, z: ComplexPoint, center: ComplexPoint, radius: f64) -> bool {
    let (a, b) = map.inverse_branches(z);
    indicator_a(a, center, radius) || indicator_a(b, center, radius)
}

pub fn objective(trajectory: &[ComplexPoint], params: &ObjectiveParams<'_>) -> Result<f64> {
    params.validate()?;
    let n = params.n_sum;
    let needed = params.form.points_needed(n);
    if trajectory.len() < needed {
        return Err(Error::DimensionMismatch(format!(
            "objective with n = {n} needs {needed} trajectory points, got {}",
            trajectory.len()
        )));
    }
    Ok(match params.form {
        ObjectiveForm::Conformal => occupation_residual(trajectory, params, 0),
        ObjectiveForm::Shifted => occupation_residual(trajectory, params, 1),
        ObjectiveForm::Appendix => appendix_residual(trajectory, params),
    })
}

fn occupation_residual(trajectory: &[ComplexPoint], params: &ObjectiveParams<'_>, shift: usize) -> f64 {
    let n = params.n_sum;
    let cover = params.cover;
    let map = &cover.map;
    let radius = cover.radius;
    let balls = cover.len();
    let mut image_hits = vec![0u32; balls];
    let mut weighted = vec![0.0f64; balls];

    for &x in &trajectory[..n] {
        let weight = map.derivative(x).norm().powf(params.h);
        for (j, &center) in cover.centers.iter().enumerate() {
            if indicator_a(x, center, radius) {
                weighted[j] += weight;
            }
        }
    }
    for &x in &trajectory[shift..n + shift] {
        let (a, b) = map.inverse_branches(x);
        for (j, &center) in cover.centers.iter().enumerate() {
            if indicator_a(a, center, radius) || indicator_a(b, center, radius) {
                image_hits[j] += 1;
            }
        }
    }

    let n = n as f64;
    params
        .densities
        .entries
        .iter()
        .enumerate()
        .map(|(j, d)| {
            let r = f64::from(image_hits[j]) / n / d.at_image - weighted[j] / n / d.at_center;
            r * r
        })
        .sum()
}

fn appendix_residual(trajectory: &[ComplexPoint], params: &ObjectiveParams<'_>) -> f64 {
    let n = params.n_sum;
    let depth = (trajectory.len() - 1) as f64;
    let cover = params.cover;
    let delta = cover.radius;
    let mut total = 0.0;
    for (center, d) in cover.centers.iter().zip(&params.densities.entries) {
        // MATLAB sums along a row, i.e. from the deepest point towards x_0.
        let rhs = 2.0
            * trajectory[1..=n + 1]
                .iter()
                .rev()
                .map(|&x| {
                    let inside = if indicator_a(x, *center, delta) { 1.0 } else { 0.0 };
                    (inside * x.norm()).powf(params.h)
                })
                .sum::<f64>();
        let lhs: f64 = trajectory[..=n]
            .iter()
            .rev()
            .map(|&x| {
                let plus = ((x - center).re < delta) as u8;
                let minus = ((-x - center).re < delta) as u8;
                f64::from(plus + minus)
            })
            .sum();
        let r = lhs / d.at_image - rhs / d.at_center;
        total += r * r;
    }
    total / depth
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PseudoPoint {
    pub lattice_row: usize,
    /// Forward orbit `x_0, ..., x_n` of the selected lattice point.
    pub trajectory: Vec<ComplexPoint>,
    pub beta_sq: f64,
    /// `beta_sq / n^2`.
    pub normalized: f64,
}

fn trajectory_len(lattice: &Lattice, params: &ObjectiveParams<'_>) -> Result<usize> {
    let needed = params.form.points_needed(params.n_sum);
    if lattice.depth() + 1 < needed {
        return Err(Error::DimensionMismatch(format!(
            "sum length {} needs lattice depth >= {}, got {}",
            params.n_sum,
            needed - 1,
            lattice.depth()
        )));
    }
    Ok(match params.form {
        ObjectiveForm::Appendix => lattice.depth() + 1,
        _ => needed,
    })
}

/// Evaluates the objective on every row's forward orbit (the stored row read
/// backwards) and returns the minimizer; ties go to the lowest row index.
pub fn select_pseudorandom(lattice: &Lattice, params: &ObjectiveParams<'_>) -> Result<PseudoPoint> {
    params.validate()?;
    let len = trajectory_len(lattice, params)?;
    let values: Vec<f64> = (0..lattice.ell())
        .into_par_iter()
        .map(|i| {
            let traj = lattice.forward_trajectory(i, len);
            objective(&traj, params).map_err(|e| Error::at("lattice row", i, e))
        })
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = i;
        }
    }
    let beta_sq = values[best];
    let n = params.n_sum as f64;
    Ok(PseudoPoint {
        lattice_row: best,
        trajectory: lattice.forward_trajectory(best, params.n_sum + 1),
        beta_sq,
        normalized: beta_sq / (n * n),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaptiveOutcome {
    pub point: PseudoPoint,
    pub p_used: usize,
    pub attained: bool,
}

/// Lengthens the sum `p = n, n+1, ...` until the normalized minimum drops to
/// `threshold` or `p_max` is reached. `lattice_for(p)` supplies the lattice
/// searched at sum length `p`.
pub fn adaptive_select<F, L>(
    mut lattice_for: F,
    params: &ObjectiveParams<'_>,
    threshold: f64,
    p_max: usize,
) -> Result<AdaptiveOutcome>
where
    F: FnMut(usize) -> Result<L>,
    L: Borrow<Lattice>,
{
    if !(threshold >= 0.0) {
        return Err(Error::InvalidArgument(format!("threshold must be >= 0, got {threshold}")));
    }
    if p_max < params.n_sum {
        return Err(Error::InvalidArgument(format!(
            "p_max {p_max} is below the starting sum length {}",
            params.n_sum
        )));
    }
    let mut p = params.n_sum;
    loop {
        let lattice = lattice_for(p)?;
        let point = select_pseudorandom(lattice.borrow(), &params.with_sum_len(p))?;
        if point.normalized <= threshold {
            return Ok(AdaptiveOutcome {
                point,
                p_used: p,
                attained: true,
            });
        }
        if p == p_max {
            return Ok(AdaptiveOutcome {
                point,
                p_used: p,
                attained: false,
            });
        }
        p += 1;
    }
}

/// JSON shape of a selected point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionReport {
    pub row: usize,
    pub beta_sq: f64,
    pub normalized: f64,
    pub p_used: usize,
    pub trajectory_head: Vec<ComplexPoint>,
}

impl SelectionReport {
    pub fn new(point: &PseudoPoint, p_used: usize) -> Self {
        Self {
            row: point.lattice_row,
            beta_sq: point.beta_sq,
            normalized: point.normalized,
            p_used,
            trajectory_head: point.trajectory.iter().take(10).copied().collect(),
        }
    }
}
