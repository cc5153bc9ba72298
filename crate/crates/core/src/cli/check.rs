//! Reduced-scale self-checks of the invariants every module relies on.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{run, ScenarioConfig};
use crate::dynamics::{velocity_landau, GradientField};
use crate::error::Result;
use crate::integrators::discrete_gradient_balance;
use crate::models::CollisionKernel;

const SEED: u64 = 0x5eed_b10b;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckSummary {
    pub outcomes: Vec<CheckOutcome>,
}

impl CheckSummary {
    pub fn passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }
}

fn outcome(name: &'static str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome { name, passed, detail }
}

/// Copy of `config` shrunk to a grid that checks in well under a second.
fn reduced(config: &ScenarioConfig) -> ScenarioConfig {
    let mut cfg = config.clone();
    cfg.cells_per_dim = cfg.cells_per_dim.min(if cfg.scenario.dim() == 1 { 40 } else { 10 });
    cfg.output = None;
    cfg
}

/// Runs all checks for the scenario. Errors only if the config is invalid
/// or a computation fails outright; failed checks are reported in the
/// summary.
pub fn check(config: &ScenarioConfig) -> Result<CheckSummary> {
    config.validate()?;
    let cfg = reduced(config);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let kernel = if cfg.scenario.is_landau() {
        CollisionKernel::new(cfg.kernel_c, cfg.kernel_gamma)?
    } else {
        CollisionKernel::maxwell()
    };
    Ok(CheckSummary {
        outcomes: vec![
            check_compatibility(&cfg)?,
            check_dg_identity(&cfg, &mut rng)?,
            check_landau_conservation(&kernel, &mut rng)?,
            check_kernel(&kernel, &mut rng),
            check_energy_decay(&cfg)?,
        ],
    })
}

/// `w_p G_p` against central differences of the energy, norm-wise.
fn check_compatibility(cfg: &ScenarioConfig) -> Result<CheckOutcome> {
    let grid = cfg.grid()?;
    let model = cfg.energy_model(&grid)?;
    let ens = cfg.initial_ensemble(&grid)?;
    let (x, w) = (ens.positions(), ens.weights());
    let d = ens.dim();
    let grad = model.grad_energy_at(x, w)?;
    let stride = (x.len() / 24).max(1);
    let step = 1e-5;
    let (mut num, mut den) = (0.0, 0.0);
    let mut probe = x.to_vec();
    for i in (0..x.len()).step_by(stride) {
        probe[i] = x[i] + step;
        let up = model.energy_at(&probe, w)?;
        probe[i] = x[i] - step;
        let down = model.energy_at(&probe, w)?;
        probe[i] = x[i];
        let fd = (up - down) / (2.0 * step);
        num += (w[i / d] * grad[i] - fd).powi(2);
        den += fd * fd;
    }
    let rel = (num / den.max(f64::MIN_POSITIVE)).sqrt();
    Ok(outcome("compatibility", rel <= 1e-6, format!("relative error {rel:.3e} (limit 1e-6)")))
}

/// Discrete-gradient identity for a random displacement of norm `1e-2`.
fn check_dg_identity(cfg: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Result<CheckOutcome> {
    let grid = cfg.grid()?;
    let model = cfg.energy_model(&grid)?;
    let ens = cfg.initial_ensemble(&grid)?;
    let x = ens.positions();
    let mut delta: Vec<f64> = (0..x.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = delta.iter().map(|v| v * v).sum::<f64>().sqrt();
    delta.iter_mut().for_each(|v| *v *= 1e-2 / norm);
    let y: Vec<f64> = x.iter().zip(&delta).map(|(a, b)| a + b).collect();
    let (work, change) = discrete_gradient_balance(&model, ens.weights(), x, &y, &cfg.mean_value_rule()?)?;
    let rel = (work - change).abs() / change.abs();
    Ok(outcome("dg_identity", rel <= 1e-6, format!("residual {rel:.3e} (limit 1e-6)")))
}

/// Landau velocities conserve momentum and kinetic energy for arbitrary
/// gradient fields.
fn check_landau_conservation(kernel: &CollisionKernel, rng: &mut ChaCha8Rng) -> Result<CheckOutcome> {
    let n = 24;
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let pos: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
        let g = GradientField::new(2, (0..2 * n).map(|_| rng.gen_range(-2.0..2.0)).collect())?;
        let v = velocity_landau(kernel, &pos, &w, &g)?;
        let (mut px, mut py, mut k, mut scale) = (0.0, 0.0, 0.0, 0.0);
        for p in 0..n {
            px += w[p] * v[2 * p];
            py += w[p] * v[2 * p + 1];
            k += w[p] * (pos[2 * p] * v[2 * p] + pos[2 * p + 1] * v[2 * p + 1]);
            scale += w[p] * v[2 * p].hypot(v[2 * p + 1]) * (1.0 + pos[2 * p].hypot(pos[2 * p + 1]));
        }
        worst = worst.max(px.abs().max(py.abs()).max(k.abs()) / scale);
    }
    Ok(outcome(
        "landau_conservation",
        worst <= 1e-12,
        format!("worst relative momentum/energy rate {worst:.3e} (limit 1e-12)"),
    ))
}

/// Symmetry, positive semidefiniteness and `A(x) x = 0`.
fn check_kernel(kernel: &CollisionKernel, rng: &mut ChaCha8Rng) -> CheckOutcome {
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let x = [rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)];
        let u = [rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)];
        let a = kernel.matrix(&x);
        let scale = a.iter().map(|v| v.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let asym = (a[1] - a[2]).abs() / scale;
        let mut ax = [0.0; 2];
        kernel.apply(&x, &x, &mut ax);
        let null = ax[0].hypot(ax[1]) / (scale * x[0].hypot(x[1]));
        let neg = (-kernel.quadratic_form(&x, &u)).max(0.0) / (scale * (u[0] * u[0] + u[1] * u[1]));
        worst = worst.max(asym).max(null).max(neg);
    }
    outcome("kernel", worst <= 1e-14, format!("worst relative defect {worst:.3e} (limit 1e-14)"))
}

/// Energy is nonincreasing over a few steps at reduced scale.
fn check_energy_decay(cfg: &ScenarioConfig) -> Result<CheckOutcome> {
    let mut short = cfg.clone();
    short.t_end = cfg.t_start + 3.0 * cfg.dt;
    short.diag_every = 1;
    let report = run(&short)?;
    let energies: Vec<f64> = report.records.iter().filter_map(|r| r.energy).collect();
    let worst = energies
        .windows(2)
        .map(|e| (e[1] - e[0]) / e[0].abs().max(1.0))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(outcome(
        "energy_decay",
        worst <= 1e-8,
        format!("largest relative increase {worst:.3e} over 3 steps (limit 1e-8)"),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::Scenario;

    #[test]
    fn default_heat_passes() {
        let summary = check(&ScenarioConfig::defaults(Scenario::Heat)).unwrap();
        assert!(summary.passed(), "{summary:?}");
        assert_eq!(summary.outcomes.len(), 5);
    }

    #[test]
    fn loose_solver_tolerance_keeps_identity() {
        let mut cfg = ScenarioConfig::defaults(Scenario::Heat);
        cfg.tolerance = 1e-1;
        let summary = check(&cfg).unwrap();
        let dg = summary.outcomes.iter().find(|o| o.name == "dg_identity").unwrap();
        assert!(dg.passed, "{}", dg.detail);
    }

    #[test]
    fn negative_time_step_is_a_config_error() {
        let mut cfg = ScenarioConfig::defaults(Scenario::Heat);
        cfg.dt = -0.01;
        assert!(matches!(check(&cfg), Err(crate::Error::Config(_))));
    }
}
