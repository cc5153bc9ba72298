//! Scenario registry and the flat `key = value` config format.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::diagnostics::AnalyticSolution;
use crate::ensemble::{build_grid, init_from_density, ParticleEnsemble, QuadratureGrid};
use crate::error::{Error, Result};
use crate::integrators::{FixedPointConfig, MeanValueConfig};
use crate::models::{CollisionKernel, EnergyModel, InternalEnergy, Mollifier, PotentialKind, PotentialSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Heat,
    PorousMedium,
    LinearFokkerPlanck,
    NonlocalFokkerPlanck,
    LandauMaxwell,
    LandauCoulomb,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Self::Heat,
        Self::PorousMedium,
        Self::LinearFokkerPlanck,
        Self::NonlocalFokkerPlanck,
        Self::LandauMaxwell,
        Self::LandauCoulomb,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Heat => "heat",
            Self::PorousMedium => "porous_medium",
            Self::LinearFokkerPlanck => "linear_fp",
            Self::NonlocalFokkerPlanck => "nonlocal_fp",
            Self::LandauMaxwell => "landau_maxwell",
            Self::LandauCoulomb => "landau_coulomb",
        }
    }

    pub fn dim(&self) -> usize {
        if self.is_landau() {
            2
        } else {
            1
        }
    }

    pub fn is_landau(&self) -> bool {
        matches!(self, Self::LandauMaxwell | Self::LandauCoulomb)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| {
                let known: Vec<&str> = Self::ALL.iter().map(|sc| sc.name()).collect();
                Error::Config(format!("unknown scenario '{s}' (known: {})", known.join(", ")))
            })
    }
}

/// Every knob of a run. Unset keys take the scenario defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub half_width: f64,
    pub cells_per_dim: usize,
    pub dt: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub epsilon_coeff: f64,
    pub epsilon_power: f64,
    /// Porous medium exponent.
    pub porous_m: f64,
    /// Barenblatt height constant.
    pub barenblatt_k: f64,
    pub kernel_c: f64,
    pub kernel_gamma: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub quadrature_nodes: usize,
    pub output: Option<PathBuf>,
    /// Energy is evaluated every this many steps (and at the last step).
    pub diag_every: usize,
}

const KEYS: [&str; 17] = [
    "scenario",
    "half_width",
    "cells_per_dim",
    "dt",
    "t_start",
    "t_end",
    "epsilon_coeff",
    "epsilon_power",
    "porous_m",
    "barenblatt_k",
    "kernel_c",
    "kernel_gamma",
    "tolerance",
    "max_iterations",
    "quadrature_nodes",
    "output",
    "diag_every",
];

impl ScenarioConfig {
    pub fn defaults(scenario: Scenario) -> Self {
        let (half_width, dt, t_start, t_end) = match scenario {
            Scenario::Heat => (15.0, 0.01, 2.0, 3.0),
            Scenario::PorousMedium => (8.0, 0.01, 2.0, 3.0),
            Scenario::LinearFokkerPlanck | Scenario::NonlocalFokkerPlanck => (5.0, 0.001, 0.5, 1.0),
            Scenario::LandauMaxwell => (4.0, 0.01 / 8.0, 0.0, 5.0),
            Scenario::LandauCoulomb => (10.0, 0.05, 0.0, 20.0),
        };
        Self {
            scenario,
            half_width,
            cells_per_dim: if scenario.is_landau() { 40 } else { 60 },
            dt,
            t_start,
            t_end,
            epsilon_coeff: 0.64,
            epsilon_power: 1.98,
            porous_m: 1.5,
            barenblatt_k: 1.0,
            kernel_c: 1.0 / 16.0,
            kernel_gamma: if scenario == Scenario::LandauCoulomb { -3.0 } else { 0.0 },
            tolerance: 1e-15,
            max_iterations: 200,
            quadrature_nodes: 4,
            output: None,
            diag_every: if scenario.dim() == 1 { 1 } else { 10 },
        }
    }

    /// Parses the config text. `scenario` is required; everything else
    /// overrides its defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs: Vec<(usize, &str, &str)> = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got '{line}'", n + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(Error::Config(format!("line {}: unknown key '{key}'", n + 1)));
            }
            if pairs.iter().any(|(_, k, _)| *k == key) {
                return Err(Error::Config(format!("line {}: duplicate key '{key}'", n + 1)));
            }
            pairs.push((n + 1, key, value));
        }
        let scenario = pairs
            .iter()
            .find(|(_, k, _)| *k == "scenario")
            .ok_or_else(|| Error::Config("missing required key 'scenario'".into()))?
            .2
            .parse()?;
        let mut cfg = Self::defaults(scenario);
        for (line, key, value) in pairs {
            cfg.set(key, value).map_err(|e| Error::Config(format!("line {line}: {e}")))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        match key {
            "scenario" => {}
            "half_width" => self.half_width = parse_real(value)?,
            "cells_per_dim" => self.cells_per_dim = parse_count(value)?,
            "dt" => self.dt = parse_real(value)?,
            "t_start" => self.t_start = parse_real(value)?,
            "t_end" => self.t_end = parse_real(value)?,
            "epsilon_coeff" => self.epsilon_coeff = parse_real(value)?,
            "epsilon_power" => self.epsilon_power = parse_real(value)?,
            "porous_m" => self.porous_m = parse_real(value)?,
            "barenblatt_k" => self.barenblatt_k = parse_real(value)?,
            "kernel_c" => self.kernel_c = parse_real(value)?,
            "kernel_gamma" => self.kernel_gamma = parse_real(value)?,
            "tolerance" => self.tolerance = parse_real(value)?,
            "max_iterations" => self.max_iterations = parse_count(value)?,
            "quadrature_nodes" => self.quadrature_nodes = parse_count(value)?,
            "output" => self.output = if value.is_empty() { None } else { Some(PathBuf::from(value)) },
            "diag_every" => self.diag_every = parse_count(value)?,
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_start.is_finite() && self.t_end.is_finite() && self.t_end > self.t_start) {
            return bad(format!("need t_end > t_start, got [{}, {}]", self.t_start, self.t_end));
        }
        let steps = (self.t_end - self.t_start) / self.dt;
        if (steps - steps.round()).abs() > 1e-6 * steps.max(1.0) {
            return bad(format!("dt = {} does not divide [{}, {}]", self.dt, self.t_start, self.t_end));
        }
        if self.cells_per_dim < 2 {
            return bad(format!("cells_per_dim must be at least 2, got {}", self.cells_per_dim));
        }
        if !(self.half_width.is_finite() && self.half_width > 0.0) {
            return bad(format!("half_width must be positive, got {}", self.half_width));
        }
        if !(self.epsilon_coeff > 0.0 && self.epsilon_coeff.is_finite() && self.epsilon_power.is_finite()) {
            return bad("epsilon_coeff must be positive and epsilon_power finite".into());
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return bad(format!("tolerance must be positive, got {}", self.tolerance));
        }
        if self.max_iterations == 0 || self.quadrature_nodes == 0 || self.diag_every == 0 {
            return bad("max_iterations, quadrature_nodes and diag_every must be at least 1".into());
        }
        if self.scenario == Scenario::PorousMedium && !(self.porous_m > 1.0 && self.barenblatt_k > 0.0) {
            return bad(format!("porous medium needs m > 1 and K > 0, got m={} K={}", self.porous_m, self.barenblatt_k));
        }
        if !self.scenario.is_landau() && self.t_start <= 0.0 {
            return bad(format!("{} starts from its exact solution and needs t_start > 0", self.scenario));
        }
        if self.scenario.is_landau() {
            CollisionKernel::new(self.kernel_c, self.kernel_gamma).map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        ((self.t_end - self.t_start) / self.dt).round() as usize
    }

    pub fn grid(&self) -> Result<QuadratureGrid> {
        build_grid(self.half_width, self.cells_per_dim, self.scenario.dim())
    }

    pub fn mollifier(&self, grid: &QuadratureGrid) -> Result<Mollifier> {
        Mollifier::from_cell_size(grid.cell_size(), self.epsilon_coeff, self.epsilon_power)
    }

    pub fn solver(&self) -> FixedPointConfig {
        FixedPointConfig {
            dt: self.dt,
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
        }
    }

    pub fn mean_value_rule(&self) -> Result<MeanValueConfig> {
        MeanValueConfig::gauss_legendre(self.quadrature_nodes)
    }

    /// Exact solution used for initialization and error norms, if any.
    pub fn analytic(&self) -> Option<AnalyticSolution> {
        match self.scenario {
            Scenario::Heat => Some(AnalyticSolution::HeatKernel),
            Scenario::PorousMedium => Some(AnalyticSolution::Barenblatt {
                m: self.porous_m,
                k: self.barenblatt_k,
            }),
            Scenario::LinearFokkerPlanck | Scenario::NonlocalFokkerPlanck => Some(AnalyticSolution::LinearFokkerPlanck),
            // BKW only solves the Maxwell problem with C = 1/16.
            Scenario::LandauMaxwell if self.kernel_gamma == 0.0 && self.kernel_c == 1.0 / 16.0 => Some(AnalyticSolution::Bkw),
            _ => None,
        }
    }

    pub fn energy_model(&self, grid: &QuadratureGrid) -> Result<EnergyModel> {
        let moll = self.mollifier(grid)?;
        let grid = grid.clone();
        let quadratic = PotentialSpec::quadratic;
        match self.scenario {
            Scenario::Heat => EnergyModel::aggregation_diffusion(Some(InternalEnergy::LogEntropy), None, None, moll, grid),
            Scenario::PorousMedium => {
                EnergyModel::aggregation_diffusion(Some(InternalEnergy::power_law(self.porous_m)?), None, None, moll, grid)
            }
            Scenario::LinearFokkerPlanck => EnergyModel::aggregation_diffusion(
                Some(InternalEnergy::LogEntropy),
                Some(quadratic(PotentialKind::External)),
                None,
                moll,
                grid,
            ),
            Scenario::NonlocalFokkerPlanck => EnergyModel::aggregation_diffusion(
                Some(InternalEnergy::LogEntropy),
                None,
                Some(quadratic(PotentialKind::Interaction)),
                moll,
                grid,
            ),
            Scenario::LandauMaxwell | Scenario::LandauCoulomb => Ok(EnergyModel::landau(
                CollisionKernel::new(self.kernel_c, self.kernel_gamma)?,
                moll,
                grid,
            )),
        }
    }

    /// Initial density at `t_start`.
    pub fn initial_density(&self, x: &[f64]) -> f64 {
        match self.scenario {
            Scenario::LandauCoulomb => coulomb_initial_density(x),
            _ => {
                let sol = match self.scenario {
                    Scenario::LandauMaxwell => AnalyticSolution::Bkw,
                    _ => self.analytic().expect("1D scenarios have exact solutions"),
                };
                sol.value(self.t_start, x).expect("validated start time")
            }
        }
    }

    pub fn initial_ensemble(&self, grid: &QuadratureGrid) -> Result<ParticleEnsemble> {
        init_from_density(|x| self.initial_density(x), grid, 0.0)
    }
}

/// Two unit-variance Gaussians at `(-2, 1)` and `(0, -1)`, normalized to
/// unit mass.
pub fn coulomb_initial_density(x: &[f64]) -> f64 {
    let bump = |cx: f64, cy: f64| (-((x[0] - cx).powi(2) + (x[1] - cy).powi(2)) / 2.0).exp();
    (bump(-2.0, 1.0) + bump(0.0, -1.0)) / (4.0 * std::f64::consts::PI)
}

/// A real number, optionally written as a quotient `a/b`.
fn parse_real(value: &str) -> std::result::Result<f64, String> {
    let parsed = match value.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| format!("'{value}' is not a number"))?;
            let b: f64 = b.trim().parse().map_err(|_| format!("'{value}' is not a number"))?;
            a / b
        }
        None => value.parse().map_err(|_| format!("'{value}' is not a number"))?,
    };
    if parsed.is_finite() {
        Ok(parsed)
    } else {
        Err(format!("'{value}' is not finite"))
    }
}

fn parse_count(value: &str) -> std::result::Result<usize, String> {
    value.parse().map_err(|_| format!("'{value}' is not a nonnegative integer"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_defaults() {
        let heat = ScenarioConfig::parse("scenario = heat").unwrap();
        assert_eq!((heat.half_width, heat.cells_per_dim, heat.dt), (15.0, 60, 0.01));
        assert_eq!((heat.t_start, heat.t_end, heat.steps()), (2.0, 3.0, 100));
        let fp = ScenarioConfig::parse("scenario = linear_fp").unwrap();
        assert_eq!((fp.dt, fp.t_start, fp.t_end, fp.steps()), (0.001, 0.5, 1.0, 500));
        let c = ScenarioConfig::parse("scenario = landau_coulomb").unwrap();
        assert_eq!((c.dt, c.t_start, c.t_end, c.kernel_gamma, c.diag_every), (0.05, 0.0, 20.0, -3.0, 10));
        let m = ScenarioConfig::parse("scenario = landau_maxwell").unwrap();
        assert_eq!((m.steps(), m.half_width), (4000, 4.0));
        assert_eq!(m.analytic(), Some(AnalyticSolution::Bkw));
        let p = ScenarioConfig::parse("scenario = porous_medium").unwrap();
        assert_eq!((p.porous_m, p.barenblatt_k, p.half_width), (1.5, 1.0, 8.0));
    }

    #[test]
    fn overrides_comments_and_fractions() {
        let cfg = ScenarioConfig::parse(
            "# comment\n\nscenario = landau_maxwell  # trailing\ncells_per_dim=24\n dt = 0.01/8 \nt_end = 1\noutput = out.csv\n",
        )
        .unwrap();
        assert_eq!(cfg.cells_per_dim, 24);
        assert_eq!(cfg.dt, 0.00125);
        assert_eq!(cfg.steps(), 800);
        assert_eq!(cfg.output, Some(PathBuf::from("out.csv")));
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            "",
            "cells_per_dim = 10",
            "scenario = plasma",
            "scenario = heat\nfoo = 1",
            "scenario = heat\ndt = 0.01\ndt = 0.02",
            "scenario = heat\ndt = -0.01",
            "scenario = heat\ndt = abc",
            "scenario = heat\nt_end = 1",
            "scenario = heat\ncells_per_dim = 1",
            "scenario = heat\ndt = 0.3",
            "scenario = heat\nmax_iterations = -3",
            "scenario = heat\nno equals sign",
            "scenario = porous_medium\nporous_m = 1",
            "scenario = landau_coulomb\nkernel_c = -1",
        ] {
            assert!(matches!(ScenarioConfig::parse(text), Err(Error::Config(_))), "accepted: {text:?}");
        }
    }

    #[test]
    fn coulomb_initial_mass_is_one() {
        let grid = build_grid(10.0, 200, 2).unwrap();
        let total: f64 = grid.centers().map(|c| grid.cell_volume() * coulomb_initial_density(&c)).sum();
        assert!((total - 1.0).abs() < 1e-10, "{total}");
    }

    #[test]
    fn initial_ensembles_have_expected_mass() {
        for sc in Scenario::ALL {
            let mut cfg = ScenarioConfig::defaults(sc);
            cfg.cells_per_dim = if sc.dim() == 1 { 60 } else { 40 };
            let grid = cfg.grid().unwrap();
            let ens = cfg.initial_ensemble(&grid).unwrap();
            let expected = cfg.analytic().map_or(1.0, |s| s.total_mass());
            assert!((ens.total_mass() - expected).abs() < 2e-2 * expected, "{sc}: {}", ens.total_mass());
        }
    }
}
