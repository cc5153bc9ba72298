//! Conserved and dissipated quantities, exact reference solutions, error
//! norms, and convergence-order fits.

use std::f64::consts::PI;

use statrs::function::gamma::gamma;

use crate::dynamics::{pair_quadratic_form, GradientField};
use crate::ensemble::{reconstruct_density, ParticleEnsemble, QuadratureGrid};
use crate::error::{Error, Result};
use crate::integrators::{mean_value_gradient, MeanValueConfig};
use crate::models::{CollisionKernel, EnergyModel};

/// One row of the per-step diagnostics table.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub step: usize,
    pub time: f64,
    pub mass: f64,
    pub momentum: Vec<f64>,
    pub kinetic_energy: f64,
    /// `None` on steps skipped by the diagnostics cadence.
    pub energy: Option<f64>,
    pub fisher: Option<f64>,
    pub dissipation_rate: Option<f64>,
    pub solver_iterations: usize,
}

pub fn mass(ensemble: &ParticleEnsemble) -> f64 {
    ensemble.weights().iter().sum()
}

pub fn momentum(ensemble: &ParticleEnsemble) -> Vec<f64> {
    let d = ensemble.dim();
    let mut out = vec![0.0; d];
    for (x, w) in ensemble.positions().chunks_exact(d).zip(ensemble.weights()) {
        for k in 0..d {
            out[k] += w * x[k];
        }
    }
    out
}

/// `K = 1/2 sum_p w_p |x_p|^2`
pub fn kinetic_energy(ensemble: &ParticleEnsemble) -> f64 {
    let d = ensemble.dim();
    0.5 * ensemble
        .positions()
        .chunks_exact(d)
        .zip(ensemble.weights())
        .map(|(x, w)| w * x.iter().map(|a| a * a).sum::<f64>())
        .sum::<f64>()
}

/// `sum_p w_p |Gbar_p|^2` for a per-mass mean gradient.
pub fn fisher_from_gradient(weights: &[f64], mean_gradient: &GradientField) -> f64 {
    let d = mean_gradient.dim();
    weights
        .iter()
        .enumerate()
        .map(|(p, w)| w * mean_gradient.values()[p * d..(p + 1) * d].iter().map(|g| g * g).sum::<f64>())
        .sum()
}

/// Discrete Fisher information of a step `X_old -> X_new`.
pub fn fisher_information(model: &EnergyModel, x_old: &[f64], x_new: &[f64], weights: &[f64]) -> Result<f64> {
    let gbar = mean_value_gradient(model, weights, x_old, x_new, &MeanValueConfig::default())?;
    Ok(fisher_from_gradient(weights, &gbar))
}

/// `1/2 sum_{p,q} w_p w_q (Gbar_p - Gbar_q)^T A(m_p - m_q) (Gbar_p - Gbar_q)`
/// at the step midpoints `m`. Nonnegative: this is the magnitude of the
/// entropy decay rate.
pub fn dissipation_from_gradient(
    kernel: &CollisionKernel,
    midpoints: &[f64],
    weights: &[f64],
    mean_gradient: &GradientField,
) -> f64 {
    pair_quadratic_form(kernel, midpoints, weights, mean_gradient)
}

/// Discrete entropy dissipation rate of a step `X_old -> X_new`.
pub fn dissipation_rate(
    model: &EnergyModel,
    kernel: &CollisionKernel,
    x_old: &[f64],
    x_new: &[f64],
    weights: &[f64],
) -> Result<f64> {
    let gbar = mean_value_gradient(model, weights, x_old, x_new, &MeanValueConfig::default())?;
    let mid: Vec<f64> = x_old.iter().zip(x_new).map(|(a, b)| 0.5 * (a + b)).collect();
    Ok(dissipation_from_gradient(kernel, &mid, weights, &gbar))
}

/// Closed-form reference solutions of the benchmark problems.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnalyticSolution {
    /// 1D heat kernel `(4 pi t)^(-1/2) exp(-x^2 / 4t)`.
    HeatKernel,
    /// 1D Barenblatt profile of the porous medium equation.
    Barenblatt { m: f64, k: f64 },
    /// 1D Ornstein-Uhlenbeck solution of `f_t = f_xx + (x f)_x`.
    LinearFokkerPlanck,
    /// 2D BKW solution of the Landau equation with the Maxwell kernel
    /// `C = 1/16`.
    Bkw,
}

impl AnalyticSolution {
    pub fn dim(&self) -> usize {
        match self {
            Self::Bkw => 2,
            _ => 1,
        }
    }

    pub fn value(&self, t: f64, x: &[f64]) -> Result<f64> {
        let r2: f64 = x.iter().map(|a| a * a).sum();
        match *self {
            Self::HeatKernel => {
                require_positive_time(t)?;
                Ok((4.0 * PI * t).powf(-0.5) * (-r2 / (4.0 * t)).exp())
            }
            Self::Barenblatt { m, k } => {
                require_positive_time(t)?;
                let alpha = 1.0 / (m + 1.0);
                let kappa = alpha * (m - 1.0) / (2.0 * m);
                let ta = t.powf(alpha);
                let xi2 = r2 / (ta * ta);
                Ok((k - kappa * xi2).max(0.0).powf(1.0 / (m - 1.0)) / ta)
            }
            Self::LinearFokkerPlanck => {
                require_positive_time(t)?;
                let var = 1.0 - (-2.0 * t).exp();
                Ok((2.0 * PI * var).powf(-0.5) * (-r2 / (2.0 * var)).exp())
            }
            Self::Bkw => {
                if !(t.is_finite() && t >= 0.0) {
                    return Err(Error::InvalidArgument(format!("BKW time must be >= 0, got {t}")));
                }
                let r = bkw_radius(t);
                Ok((-r2 / (2.0 * r)).exp() / (2.0 * PI * r) * ((2.0 * r - 1.0) / r + (1.0 - r) * r2 / (2.0 * r * r)))
            }
        }
    }

    /// Total mass of the solution (constant in time).
    pub fn total_mass(&self) -> f64 {
        match *self {
            Self::Barenblatt { m, k } => {
                let alpha = 1.0 / (m + 1.0);
                let exponent = 1.0 / (m - 1.0) + 0.5;
                let a = (2.0 * PI * m / (alpha * (m - 1.0))).sqrt() * gamma(m / (m - 1.0)) / gamma(m / (m - 1.0) + 0.5);
                a * k.powf(exponent)
            }
            _ => 1.0,
        }
    }

    /// Radius of the Barenblatt support at time `t`, if applicable.
    pub fn support_radius(&self, t: f64) -> Option<f64> {
        match *self {
            Self::Barenblatt { m, k } => {
                let alpha = 1.0 / (m + 1.0);
                let kappa = alpha * (m - 1.0) / (2.0 * m);
                Some(t.powf(alpha) * (k / kappa).sqrt())
            }
            _ => None,
        }
    }
}

/// BKW thermal radius `R(t) = 1 - exp(-t/8) / 2`.
pub fn bkw_radius(t: f64) -> f64 {
    1.0 - 0.5 * (-t / 8.0).exp()
}

fn require_positive_time(t: f64) -> Result<()> {
    if t.is_finite() && t > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("solution needs t > 0, got {t}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNorms {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
}

/// Discrete `L1`, `L2`, `Linf` distances between the blob reconstruction and
/// a reference density sampled at the grid centers.
pub fn error_norms_against<F>(ensemble: &ParticleEnsemble, epsilon: f64, grid: &QuadratureGrid, exact: F) -> Result<ErrorNorms>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let centers = grid.centers_flat();
    let recon = reconstruct_density(ensemble, epsilon, &centers)?;
    let vol = grid.cell_volume();
    let (mut l1, mut l2, mut linf) = (0.0, 0.0, 0.0f64);
    for (c, r) in centers.chunks_exact(grid.dim()).zip(&recon) {
        let e = (r - exact(c)?).abs();
        l1 += vol * e;
        l2 += vol * e * e;
        linf = linf.max(e);
    }
    Ok(ErrorNorms { l1, l2: l2.sqrt(), linf })
}

/// Errors of the reconstruction against `exact` at time `t`.
pub fn error_norms(
    ensemble: &ParticleEnsemble,
    epsilon: f64,
    exact: &AnalyticSolution,
    t: f64,
    grid: &QuadratureGrid,
) -> Result<ErrorNorms> {
    error_norms_against(ensemble, epsilon, grid, |x| exact.value(t, x))
}

/// Least-squares slope of `log(error)` against `log(h)`.
pub fn convergence_order(h_values: &[f64], error_values: &[f64]) -> Result<f64> {
    if h_values.len() != error_values.len() || h_values.len() < 2 {
        return Err(Error::InvalidArgument("need at least two (h, error) pairs of equal length".into()));
    }
    if h_values.iter().chain(error_values).any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::InvalidArgument("cell sizes and errors must be finite and positive".into()));
    }
    let lx: Vec<f64> = h_values.iter().map(|h| h.ln()).collect();
    let ly: Vec<f64> = error_values.iter().map(|e| e.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("cell sizes must not all be equal".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}
