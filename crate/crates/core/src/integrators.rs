//! Mean-value discrete gradient and the implicit particle steppers.
//!
//! Both schemes are solved by Picard iteration started from a forward Euler
//! predictor. Iteration stops once the relative change between consecutive
//! iterates, `|X^{k+1} - X^k|_inf / max(1, |X^k|_inf)`, is at most the
//! tolerance.

use crate::dynamics::{velocity_landau, GradientField};
use crate::ensemble::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::models::{CollisionKernel, EnergyKind, EnergyModel};

/// Gauss-Legendre rule on `[0, 1]` used for the `s`-integral of the
/// mean-value discrete gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanValueConfig {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Default for MeanValueConfig {
    fn default() -> Self {
        Self::gauss_legendre(4).expect("four-point rule")
    }
}

impl MeanValueConfig {
    /// `n`-point Gauss-Legendre rule mapped to `[0, 1]`.
    pub fn gauss_legendre(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("quadrature node count must be at least 1".into()));
        }
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            // Newton on P_n from the Chebyshev-like initial guess.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            // x is the i-th largest root; mirror for the smaller one.
            nodes[n - 1 - i] = 0.5 * (1.0 + x);
            nodes[i] = 0.5 * (1.0 - x);
            weights[n - 1 - i] = 0.5 * w;
            weights[i] = 0.5 * w;
        }
        Ok(Self { nodes, weights })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointConfig {
    pub dt: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl FixedPointConfig {
    pub fn new(dt: f64) -> Self {
        Self {
            dt,
            tolerance: 1e-15,
            max_iterations: 200,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt >= 0.0) {
            return Err(Error::InvalidArgument(format!("time step must be finite and nonnegative, got {}", self.dt)));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

/// Outcome of one accepted implicit step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub positions: Vec<f64>,
    /// Picard sweeps after the forward Euler predictor.
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    /// Mean-value gradient of the last sweep, between the old positions and
    /// the iterate that produced `positions`.
    pub mean_gradient: GradientField,
}

/// `(1/w_p) int_0^1 grad_{x_p} E(X_old + s (X_new - X_old)) ds` by the
/// configured quadrature, per-mass layout.
pub fn mean_value_gradient(
    model: &EnergyModel,
    weights: &[f64],
    x_old: &[f64],
    x_new: &[f64],
    cfg: &MeanValueConfig,
) -> Result<GradientField> {
    if x_old.len() != x_new.len() {
        return Err(Error::InvalidArgument(format!(
            "endpoint lengths differ: {} vs {}",
            x_old.len(),
            x_new.len()
        )));
    }
    if x_old == x_new {
        return GradientField::new(model.dim(), model.grad_energy_at(x_old, weights)?);
    }
    let mut acc = vec![0.0; x_old.len()];
    let mut point = vec![0.0; x_old.len()];
    for (&s, &b) in cfg.nodes().iter().zip(cfg.weights()) {
        for i in 0..point.len() {
            point[i] = x_old[i] + s * (x_new[i] - x_old[i]);
        }
        let g = model.grad_energy_at(&point, weights)?;
        acc.iter_mut().zip(&g).for_each(|(a, gi)| *a += b * gi);
    }
    GradientField::new(model.dim(), acc)
}

fn relative_change(next: &[f64], current: &[f64]) -> f64 {
    let diff = next.iter().zip(current).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let scale = current.iter().map(|a| a.abs()).fold(0.0, f64::max).max(1.0);
    diff / scale
}

/// Picard loop shared by both schemes. `update(x_k)` returns the next iterate
/// and the mean gradient it used.
fn picard<F>(predictor: Vec<f64>, cfg: &FixedPointConfig, mut update: F) -> Result<StepResult>
where
    F: FnMut(&[f64]) -> Result<(Vec<f64>, GradientField)>,
{
    let mut current = predictor;
    let mut history = Vec::new();
    for iteration in 1..=cfg.max_iterations {
        let (next, mean_gradient) = update(&current)?;
        let residual = relative_change(&next, &current);
        history.push(residual);
        if !residual.is_finite() {
            break;
        }
        current = next;
        if residual <= cfg.tolerance {
            return Ok(StepResult {
                positions: current,
                iterations: iteration,
                residual,
                converged: true,
                mean_gradient,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: history.len(),
        residual_history: history,
    })
}

/// One step of `(X^{n+1} - X^n)/dt = -W^{-1} mean-grad E(X^{n+1}, X^n)`.
pub fn step_aggdiff(
    model: &EnergyModel,
    ensemble: &ParticleEnsemble,
    cfg: &FixedPointConfig,
    dg: &MeanValueConfig,
) -> Result<StepResult> {
    cfg.validate()?;
    let x0 = ensemble.positions();
    let w = ensemble.weights();
    let dt = cfg.dt;
    let g0 = model.grad_energy_at(x0, w)?;
    let predictor: Vec<f64> = x0.iter().zip(&g0).map(|(x, g)| x - dt * g).collect();
    picard(predictor, cfg, |xk| {
        let gbar = mean_value_gradient(model, w, x0, xk, dg)?;
        let next = x0.iter().zip(gbar.values()).map(|(x, g)| x - dt * g).collect();
        Ok((next, gbar))
    })
}

/// One step of the Landau scheme: `x_p^{n+1} = x_p^n - dt sum_q w_q
/// A(m_p - m_q)(Gbar_p - Gbar_q)` with midpoints `m = (X^n + X^{n+1})/2`.
/// The midpoints are refreshed from the current iterate on every sweep.
pub fn step_landau(
    model: &EnergyModel,
    ensemble: &ParticleEnsemble,
    cfg: &FixedPointConfig,
    dg: &MeanValueConfig,
) -> Result<StepResult> {
    let EnergyKind::Landau { kernel } = model.kind() else {
        return Err(Error::InvalidArgument("step_landau needs a Landau energy model".into()));
    };
    let w = ensemble.weights();
    step_landau_with(kernel, ensemble, cfg, |x_old, x_new| mean_value_gradient(model, w, x_old, x_new, dg))
}

/// The Landau step with a caller-supplied mean gradient `(X^n, X^k) ->
/// Gbar`. Momentum and kinetic energy are conserved for any choice.
pub fn step_landau_with<F>(kernel: &CollisionKernel, ensemble: &ParticleEnsemble, cfg: &FixedPointConfig, mut mean_gradient: F) -> Result<StepResult>
where
    F: FnMut(&[f64], &[f64]) -> Result<GradientField>,
{
    cfg.validate()?;
    let x0 = ensemble.positions();
    let w = ensemble.weights();
    let dt = cfg.dt;
    let g0 = mean_gradient(x0, x0)?;
    let v0 = velocity_landau(kernel, x0, w, &g0)?;
    let predictor: Vec<f64> = x0.iter().zip(&v0).map(|(x, v)| x + dt * v).collect();
    picard(predictor, cfg, |xk| {
        let gbar = mean_gradient(x0, xk)?;
        let mid: Vec<f64> = x0.iter().zip(xk).map(|(a, b)| 0.5 * (a + b)).collect();
        let v = velocity_landau(kernel, &mid, w, &gbar)?;
        let next = x0.iter().zip(&v).map(|(x, vi)| x + dt * vi).collect();
        Ok((next, gbar))
    })
}

/// Dispatches to the scheme matching the model.
pub fn step(model: &EnergyModel, ensemble: &ParticleEnsemble, cfg: &FixedPointConfig, dg: &MeanValueConfig) -> Result<StepResult> {
    match model.kind() {
        EnergyKind::AggregationDiffusion { .. } => step_aggdiff(model, ensemble, cfg, dg),
        EnergyKind::Landau { .. } => step_landau(model, ensemble, cfg, dg),
    }
}

/// Both sides of the discrete-gradient identity between two states:
/// `(sum_p w_p Gbar_p . (y_p - x_p), E(Y) - E(X))`.
pub fn discrete_gradient_balance(
    model: &EnergyModel,
    weights: &[f64],
    x_old: &[f64],
    x_new: &[f64],
    cfg: &MeanValueConfig,
) -> Result<(f64, f64)> {
    let d = model.dim();
    let gbar = mean_value_gradient(model, weights, x_old, x_new, cfg)?;
    let mut work = 0.0;
    for (p, w) in weights.iter().enumerate() {
        for k in 0..d {
            let i = p * d + k;
            work += w * gbar.values()[i] * (x_new[i] - x_old[i]);
        }
    }
    let change = model.energy_at(x_new, weights)? - model.energy_at(x_old, weights)?;
    Ok((work, change))
}
