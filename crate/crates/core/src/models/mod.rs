//! Regularized energies, their per-particle gradients, and the collision
//! kernel.
//!
//! Energies are evaluated with the midpoint rule on the model's quadrature
//! grid, and the `h_eps` field uses the same grid with the full `H'(g)` as
//! integrand (`log g + 1` for the entropy; the `+1` integrates to zero in the
//! continuum but not on the grid). The per-mass gradient returned by
//! [`grad_energy`] is therefore the exact gradient of [`energy_value`] divided
//! by the particle weight, for any particle positions.

mod field;
mod kernel;

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

pub use kernel::{kernel_matrix_apply, CollisionKernel};

use crate::ensemble::{ParticleEnsemble, QuadratureGrid};
use crate::error::{Error, Result};

/// Gaussian mollifier `phi_eps(x) = (2 pi eps)^(-d/2) exp(-|x|^2 / (2 eps))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mollifier {
    epsilon: f64,
}

impl Mollifier {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "mollifier epsilon must be finite and positive, got {epsilon}"
            )));
        }
        Ok(Self { epsilon })
    }

    /// `eps = coeff * h^power`; the default rule is `0.64 h^1.98`.
    pub fn from_cell_size(cell_size: f64, coeff: f64, power: f64) -> Result<Self> {
        Self::new(coeff * cell_size.powf(power))
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|a| a * a).sum();
        field::normalization(self.epsilon, x.len()) * (-r2 / (2.0 * self.epsilon)).exp()
    }

    /// `grad phi_eps(x) = -(x / eps) phi_eps(x)`.
    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let v = self.value(x);
        for (o, xi) in out.iter_mut().zip(x) {
            *o = -(xi / self.epsilon) * v;
        }
    }
}

/// Internal energy density `H`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InternalEnergy {
    /// `H(f) = f log f`
    LogEntropy,
    /// `H(f) = f^m / (m - 1)`, `m > 1`
    PowerLaw { m: f64 },
}

impl InternalEnergy {
    pub fn power_law(m: f64) -> Result<Self> {
        if !(m.is_finite() && m > 1.0) {
            return Err(Error::InvalidArgument(format!("power-law exponent must exceed 1, got {m}")));
        }
        Ok(Self::PowerLaw { m })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialKind {
    External,
    Interaction,
}

type ScalarField = dyn Fn(&[f64]) -> f64 + Send + Sync;
type VectorField = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// A potential `V` (external) or `W` (interaction) with its gradient.
#[derive(Clone)]
pub struct PotentialSpec {
    name: String,
    kind: PotentialKind,
    value: Arc<ScalarField>,
    gradient: Arc<VectorField>,
}

impl fmt::Debug for PotentialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PotentialSpec")
            .field("name", &self.name)
            .field("kind", &self.kind)
            .finish_non_exhaustive()
    }
}

impl PotentialSpec {
    /// A user-supplied potential. Interaction potentials are checked for
    /// `grad W(0) = 0` and `grad W(-x) = -grad W(x)` on sample points in
    /// dimension `dim`.
    pub fn custom<V, G>(name: &str, kind: PotentialKind, dim: usize, value: V, gradient: G) -> Result<Self>
    where
        V: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        let spec = Self {
            name: name.to_string(),
            kind,
            value: Arc::new(value),
            gradient: Arc::new(gradient),
        };
        if kind == PotentialKind::Interaction {
            spec.check_odd_gradient(dim)?;
        }
        Ok(spec)
    }

    /// `x^2 / 2` (`|x|^2 / 2` in several dimensions).
    pub fn quadratic(kind: PotentialKind) -> Self {
        Self {
            name: "quadratic".into(),
            kind,
            value: Arc::new(|x: &[f64]| 0.5 * x.iter().map(|a| a * a).sum::<f64>()),
            gradient: Arc::new(|x: &[f64], out: &mut [f64]| out.copy_from_slice(x)),
        }
    }

    pub fn zero(kind: PotentialKind) -> Self {
        Self {
            name: "zero".into(),
            kind,
            value: Arc::new(|_: &[f64]| 0.0),
            gradient: Arc::new(|_: &[f64], out: &mut [f64]| out.iter_mut().for_each(|o| *o = 0.0)),
        }
    }

    /// Looks up a registered potential: `zero` or `quadratic`.
    pub fn from_name(name: &str, kind: PotentialKind) -> Result<Self> {
        match name {
            "zero" => Ok(Self::zero(kind)),
            "quadratic" => Ok(Self::quadratic(kind)),
            other => Err(Error::InvalidArgument(format!(
                "unknown potential '{other}' (expected zero or quadratic)"
            ))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> PotentialKind {
        self.kind
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        (self.gradient)(x, out)
    }

    fn check_odd_gradient(&self, dim: usize) -> Result<()> {
        let mut g = vec![0.0; dim];
        let mut gn = vec![0.0; dim];
        self.gradient(&vec![0.0; dim], &mut g);
        if g.iter().any(|v| v.abs() > 1e-12) {
            return Err(Error::InvalidInput(format!(
                "interaction potential '{}' has nonzero gradient at the origin",
                self.name
            )));
        }
        for s in 1..=16 {
            let x: Vec<f64> = (0..dim).map(|k| ((s * 7 + k * 3) as f64 * 0.61).sin() * s as f64 * 0.25).collect();
            let neg: Vec<f64> = x.iter().map(|a| -a).collect();
            self.gradient(&x, &mut g);
            self.gradient(&neg, &mut gn);
            let scale = 1.0 + g.iter().map(|a| a.abs()).fold(0.0, f64::max);
            if g.iter().zip(&gn).any(|(a, b)| (a + b).abs() > 1e-10 * scale) {
                return Err(Error::InvalidInput(format!(
                    "interaction potential '{}' is not symmetric (gradient not odd at {x:?})",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub enum EnergyKind {
    AggregationDiffusion {
        internal: Option<InternalEnergy>,
        external: Option<PotentialSpec>,
        interaction: Option<PotentialSpec>,
    },
    /// Always uses the log entropy.
    Landau { kernel: CollisionKernel },
}

/// A regularized energy together with its mollifier and quadrature grid.
#[derive(Debug, Clone)]
pub struct EnergyModel {
    kind: EnergyKind,
    mollifier: Mollifier,
    grid: QuadratureGrid,
}

impl EnergyModel {
    pub fn aggregation_diffusion(
        internal: Option<InternalEnergy>,
        external: Option<PotentialSpec>,
        interaction: Option<PotentialSpec>,
        mollifier: Mollifier,
        grid: QuadratureGrid,
    ) -> Result<Self> {
        if let Some(w) = &interaction {
            w.check_odd_gradient(grid.dim())?;
        }
        Ok(Self {
            kind: EnergyKind::AggregationDiffusion { internal, external, interaction },
            mollifier,
            grid,
        })
    }

    pub fn landau(kernel: CollisionKernel, mollifier: Mollifier, grid: QuadratureGrid) -> Self {
        Self {
            kind: EnergyKind::Landau { kernel },
            mollifier,
            grid,
        }
    }

    pub fn kind(&self) -> &EnergyKind {
        &self.kind
    }

    pub fn mollifier(&self) -> Mollifier {
        self.mollifier
    }

    pub fn grid(&self) -> &QuadratureGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn kernel(&self) -> Option<&CollisionKernel> {
        match &self.kind {
            EnergyKind::Landau { kernel } => Some(kernel),
            EnergyKind::AggregationDiffusion { .. } => None,
        }
    }

    fn internal(&self) -> Option<InternalEnergy> {
        match &self.kind {
            EnergyKind::AggregationDiffusion { internal, .. } => *internal,
            EnergyKind::Landau { .. } => Some(InternalEnergy::LogEntropy),
        }
    }

    fn check_layout(&self, positions: &[f64], weights: &[f64]) -> Result<()> {
        if weights.is_empty() {
            return Err(Error::EmptyEnsemble { weight_floor: 0.0 });
        }
        if positions.len() != weights.len() * self.dim() {
            return Err(Error::InvalidArgument(format!(
                "{} position entries do not match {} particles in dimension {}",
                positions.len(),
                weights.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Per-cell integrand of the `h_eps` field: `H'(g)`, i.e. `log g + 1` or
    /// `m/(m-1) g^(m-1)`.
    fn cell_field(&self, internal: InternalEnergy, positions: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
        let eps = self.mollifier.epsilon();
        let density = field::grid_density(&self.grid, eps, positions, weights);
        match internal {
            InternalEnergy::LogEntropy => {
                let logs = field::log_grid_density(&self.grid, eps, positions, weights, &density);
                if let Some(cell) = logs.iter().position(|l| !l.is_finite()) {
                    return Err(Error::NumericalDomain {
                        cell,
                        detail: format!("log of reconstructed density {} is not finite", density[cell]),
                    });
                }
                Ok(logs.into_iter().map(|l| l + 1.0).collect())
            }
            InternalEnergy::PowerLaw { m } => {
                let c = m / (m - 1.0);
                Ok(density.iter().map(|g| c * g.powf(m - 1.0)).collect())
            }
        }
    }

    /// [`h_eps`] on raw slices.
    pub fn h_eps_at(&self, positions: &[f64], weights: &[f64], eval_positions: &[f64]) -> Result<Vec<f64>> {
        self.check_layout(positions, weights)?;
        let Some(internal) = self.internal() else {
            return Ok(vec![0.0; eval_positions.len()]);
        };
        let cells = self.cell_field(internal, positions, weights)?;
        Ok(field::contract_gradient(&self.grid, self.mollifier.epsilon(), eval_positions, &cells))
    }

    /// [`grad_energy`] on raw slices; flat, `dim` entries per particle.
    pub fn grad_energy_at(&self, positions: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
        let mut grad = self.h_eps_at(positions, weights, positions)?;
        let EnergyKind::AggregationDiffusion { external, interaction, .. } = &self.kind else {
            return Ok(grad);
        };
        let d = self.dim();
        if let Some(v) = external {
            grad.par_chunks_mut(d).zip(positions.par_chunks(d)).for_each(|(g, x)| {
                let mut dv = vec![0.0; d];
                v.gradient(x, &mut dv);
                g.iter_mut().zip(&dv).for_each(|(a, b)| *a += b);
            });
        }
        if let Some(w) = interaction {
            grad.par_chunks_mut(d).zip(positions.par_chunks(d)).for_each(|(g, xp)| {
                let mut diff = vec![0.0; d];
                let mut dw = vec![0.0; d];
                let mut acc = vec![0.0; d];
                for (xq, wq) in positions.chunks_exact(d).zip(weights) {
                    for k in 0..d {
                        diff[k] = xp[k] - xq[k];
                    }
                    w.gradient(&diff, &mut dw);
                    for k in 0..d {
                        acc[k] += wq * dw[k];
                    }
                }
                g.iter_mut().zip(&acc).for_each(|(a, b)| *a += b);
            });
        }
        Ok(grad)
    }

    /// [`energy_value`] on raw slices.
    pub fn energy_at(&self, positions: &[f64], weights: &[f64]) -> Result<f64> {
        self.check_layout(positions, weights)?;
        let d = self.dim();
        let eps = self.mollifier.epsilon();
        let mut energy = 0.0;
        if let Some(internal) = self.internal() {
            let density = field::grid_density(&self.grid, eps, positions, weights);
            let integrand: Vec<f64> = match internal {
                InternalEnergy::LogEntropy => {
                    let logs = field::log_grid_density(&self.grid, eps, positions, weights, &density);
                    if let Some(cell) = logs.iter().position(|l| !l.is_finite()) {
                        return Err(Error::NumericalDomain {
                            cell,
                            detail: format!("log of reconstructed density {} is not finite", density[cell]),
                        });
                    }
                    density.iter().zip(&logs).map(|(g, l)| g * l).collect()
                }
                InternalEnergy::PowerLaw { m } => density.iter().map(|g| g.powf(m) / (m - 1.0)).collect(),
            };
            energy += self.grid.cell_volume() * integrand.iter().sum::<f64>();
        }
        if let EnergyKind::AggregationDiffusion { external, interaction, .. } = &self.kind {
            if let Some(v) = external {
                energy += positions.chunks_exact(d).zip(weights).map(|(x, w)| w * v.value(x)).sum::<f64>();
            }
            if let Some(w) = interaction {
                let rows: Vec<f64> = positions
                    .par_chunks(d)
                    .zip(weights.par_iter())
                    .map(|(xp, wp)| {
                        let mut diff = vec![0.0; d];
                        let mut acc = 0.0;
                        for (xq, wq) in positions.chunks_exact(d).zip(weights) {
                            for k in 0..d {
                                diff[k] = xp[k] - xq[k];
                            }
                            acc += wq * w.value(&diff);
                        }
                        wp * acc
                    })
                    .collect();
                energy += 0.5 * rows.iter().sum::<f64>();
            }
        }
        Ok(energy)
    }
}

/// Midpoint-rule `h_eps` field at each evaluation point (flat, `dim` entries
/// per point). Zero for models without internal energy.
pub fn h_eps(model: &EnergyModel, ensemble: &ParticleEnsemble, eval_positions: &[f64]) -> Result<Vec<f64>> {
    model.h_eps_at(ensemble.positions(), ensemble.weights(), eval_positions)
}

/// Per-mass energy gradient `G_p = grad_x (dE/df)[f^N](x_p)` for every
/// particle, flat layout.
pub fn grad_energy(model: &EnergyModel, ensemble: &ParticleEnsemble) -> Result<Vec<f64>> {
    model.grad_energy_at(ensemble.positions(), ensemble.weights())
}

/// Regularized energy of the particle configuration.
pub fn energy_value(model: &EnergyModel, ensemble: &ParticleEnsemble) -> Result<f64> {
    model.energy_at(ensemble.positions(), ensemble.weights())
}
