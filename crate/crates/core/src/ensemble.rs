//! Particle state, the uniform cell-center grid, initialization from a
//! density, and blob reconstruction of the particle density.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::models::Mollifier;

/// Uniform tensor grid of cell centers on `[-L, L]^d`.
///
/// Centers are not stored; they are produced from the flat cell index. Axis 0
/// is the slowest varying index.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid {
    half_width: f64,
    cells_per_dim: usize,
    dim: usize,
    cell_size: f64,
}

impl QuadratureGrid {
    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn cells_per_dim(&self) -> usize {
        self.cells_per_dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    /// `h^d`, the midpoint-rule weight of every cell.
    pub fn cell_volume(&self) -> f64 {
        self.cell_size.powi(self.dim as i32)
    }

    /// Number of cells, `M^d`.
    pub fn len(&self) -> usize {
        self.cells_per_dim.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Coordinate of the `j`-th cell midpoint along any axis.
    ///
    /// Written as an odd multiple of `h/2` so that the grid is exactly
    /// symmetric about the origin in floating point.
    pub fn axis_coord(&self, j: usize) -> f64 {
        let k = 2 * j as i64 + 1 - self.cells_per_dim as i64;
        k as f64 * (0.5 * self.cell_size)
    }

    /// All axis coordinates, in index order.
    pub fn axis_coords(&self) -> Vec<f64> {
        (0..self.cells_per_dim).map(|j| self.axis_coord(j)).collect()
    }

    /// Writes the center of cell `index` into `out` (length `dim`).
    pub fn center_into(&self, index: usize, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        let mut rest = index;
        for k in (0..self.dim).rev() {
            out[k] = self.axis_coord(rest % self.cells_per_dim);
            rest /= self.cells_per_dim;
        }
    }

    /// Splits a flat cell index into per-axis indices.
    pub fn multi_index(&self, index: usize, out: &mut [usize]) {
        let mut rest = index;
        for k in (0..self.dim).rev() {
            out[k] = rest % self.cells_per_dim;
            rest /= self.cells_per_dim;
        }
    }

    pub fn center(&self, index: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.center_into(index, &mut out);
        out
    }

    pub fn centers(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(|i| self.center(i))
    }

    /// Centers as one flat `len * dim` buffer, for use as query points.
    pub fn centers_flat(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.len() * self.dim];
        for (i, chunk) in out.chunks_exact_mut(self.dim).enumerate() {
            self.center_into(i, chunk);
        }
        out
    }
}

/// Builds the uniform grid with `M^d` cells of size `h = 2L/M`.
pub fn build_grid(half_width: f64, cells_per_dim: usize, dimension: usize) -> Result<QuadratureGrid> {
    if !(half_width.is_finite() && half_width > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "half_width must be finite and positive, got {half_width}"
        )));
    }
    if cells_per_dim == 0 {
        return Err(Error::InvalidArgument("cells_per_dim must be at least 1".into()));
    }
    if dimension == 0 {
        return Err(Error::InvalidArgument("dimension must be at least 1".into()));
    }
    Ok(QuadratureGrid {
        half_width,
        cells_per_dim,
        dim: dimension,
        cell_size: 2.0 * half_width / cells_per_dim as f64,
    })
}

/// Weighted point particles `f^N = sum_p w_p delta(x - x_p)`.
///
/// Positions are stored flat (`len * dim`). Weights are fixed at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    dim: usize,
    positions: Vec<f64>,
    weights: Vec<f64>,
}

impl ParticleEnsemble {
    pub fn new(dim: usize, positions: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be at least 1".into()));
        }
        if weights.is_empty() {
            return Err(Error::EmptyEnsemble { weight_floor: 0.0 });
        }
        if positions.len() != weights.len() * dim {
            return Err(Error::InvalidArgument(format!(
                "{} position entries do not match {} particles in dimension {dim}",
                positions.len(),
                weights.len()
            )));
        }
        if let Some(p) = weights.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidInput(format!(
                "weight of particle {p} is {}, must be finite and positive",
                weights[p]
            )));
        }
        check_finite(&positions)?;
        Ok(Self { dim, positions, weights })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn position(&self, p: usize) -> &[f64] {
        &self.positions[p * self.dim..(p + 1) * self.dim]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Replaces all positions; weights are untouched.
    pub fn set_positions(&mut self, positions: Vec<f64>) -> Result<()> {
        if positions.len() != self.positions.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} position entries, got {}",
                self.positions.len(),
                positions.len()
            )));
        }
        check_finite(&positions)?;
        self.positions = positions;
        Ok(())
    }

    /// Same weights, new positions.
    pub fn with_positions(&self, positions: Vec<f64>) -> Result<Self> {
        let mut out = self.clone();
        out.set_positions(positions)?;
        Ok(out)
    }
}

fn check_finite(positions: &[f64]) -> Result<()> {
    match positions.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(Error::InvalidInput(format!(
            "position entry {i} is not finite ({})",
            positions[i]
        ))),
        None => Ok(()),
    }
}

/// Places one particle at every cell center carrying the cell mass
/// `h^d f0(x_i)`. Cells whose mass is `<= weight_floor` get no particle.
pub fn init_from_density<F>(f0: F, grid: &QuadratureGrid, weight_floor: f64) -> Result<ParticleEnsemble>
where
    F: Fn(&[f64]) -> f64,
{
    if !(weight_floor.is_finite() && weight_floor >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "weight_floor must be finite and nonnegative, got {weight_floor}"
        )));
    }
    let dim = grid.dim();
    let volume = grid.cell_volume();
    let mut center = vec![0.0; dim];
    let mut positions = Vec::new();
    let mut weights = Vec::new();
    for i in 0..grid.len() {
        grid.center_into(i, &mut center);
        let value = f0(&center);
        if !value.is_finite() || value < 0.0 {
            return Err(Error::InvalidInput(format!(
                "initial density is {value} at cell {i} ({center:?})"
            )));
        }
        let w = volume * value;
        if w > weight_floor {
            positions.extend_from_slice(&center);
            weights.push(w);
        }
    }
    if weights.is_empty() {
        return Err(Error::EmptyEnsemble { weight_floor });
    }
    ParticleEnsemble::new(dim, positions, weights)
}

/// Blob density `f^N_eps(x) = sum_p w_p phi_eps(x - x_p)` at each query point
/// (`points` is flat, `dim` entries per point).
pub fn reconstruct_density(ensemble: &ParticleEnsemble, epsilon: f64, points: &[f64]) -> Result<Vec<f64>> {
    let mollifier = Mollifier::new(epsilon)?;
    let dim = ensemble.dim();
    if !points.len().is_multiple_of(dim) {
        return Err(Error::InvalidArgument(format!(
            "query buffer of length {} is not a multiple of dimension {dim}",
            points.len()
        )));
    }
    Ok(points
        .par_chunks_exact(dim)
        .map(|x| {
            let mut diff = vec![0.0; dim];
            let mut acc = 0.0;
            for (xp, w) in ensemble.positions().chunks_exact(dim).zip(ensemble.weights()) {
                for k in 0..dim {
                    diff[k] = x[k] - xp[k];
                }
                acc += w * mollifier.value(&diff);
            }
            acc
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn heat_kernel(t: f64) -> impl Fn(&[f64]) -> f64 {
        move |x: &[f64]| (4.0 * PI * t).powf(-0.5) * (-x[0] * x[0] / (4.0 * t)).exp()
    }

    #[test]
    fn heat_grid_matches_reported_layout() {
        let grid = build_grid(15.0, 60, 1).unwrap();
        assert_eq!(grid.cell_size(), 0.5);
        assert_eq!(grid.len(), 60);
        assert_eq!(grid.axis_coord(0), -14.75);
        assert_eq!(grid.axis_coord(1), -14.25);
        assert_eq!(grid.axis_coord(59), 14.75);
    }

    #[test]
    fn two_cell_grid() {
        let grid = build_grid(1.0, 2, 1).unwrap();
        assert_eq!(grid.cell_size(), 1.0);
        assert_eq!(grid.centers_flat(), vec![-0.5, 0.5]);
    }

    #[test]
    fn landau_grid_size() {
        let grid = build_grid(4.0, 40, 2).unwrap();
        assert!((grid.cell_size() - 0.2).abs() < 1e-15);
        assert_eq!(grid.len(), 1600);
        assert_eq!(grid.center(0), vec![grid.axis_coord(0); 2]);
        assert_eq!(grid.center(1), vec![grid.axis_coord(0), grid.axis_coord(1)]);
    }

    #[test]
    fn grid_is_symmetric() {
        for &(l, m, d) in &[(15.0, 60, 1), (4.0, 40, 2), (10.0, 23, 2), (0.7, 9, 1)] {
            let grid = build_grid(l, m, d).unwrap();
            let centers: Vec<Vec<f64>> = grid.centers().collect();
            for c in &centers {
                let neg: Vec<f64> = c.iter().map(|x| -x).collect();
                assert!(centers.contains(&neg), "missing mirror of {c:?}");
            }
        }
    }

    #[test]
    fn build_grid_rejects_bad_arguments() {
        assert!(matches!(build_grid(0.0, 10, 1), Err(Error::InvalidArgument(_))));
        assert!(matches!(build_grid(-1.0, 10, 1), Err(Error::InvalidArgument(_))));
        assert!(matches!(build_grid(f64::NAN, 10, 1), Err(Error::InvalidArgument(_))));
        assert!(matches!(build_grid(f64::INFINITY, 10, 1), Err(Error::InvalidArgument(_))));
        assert!(matches!(build_grid(1.0, 0, 1), Err(Error::InvalidArgument(_))));
        assert!(matches!(build_grid(1.0, 4, 0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn heat_initial_mass_matches_midpoint_sum() {
        let grid = build_grid(15.0, 60, 1).unwrap();
        let ens = init_from_density(heat_kernel(2.0), &grid, 0.0).unwrap();
        // Independent midpoint sum written out directly.
        let h = 30.0 / 60.0;
        let mut quad = 0.0;
        for j in 0..60 {
            let x = -15.0 + (j as f64 + 0.5) * h;
            quad += h * (8.0 * PI).powf(-0.5) * (-x * x / 8.0).exp();
        }
        assert_eq!(ens.len(), 60);
        assert!((ens.total_mass() - quad).abs() < 1e-14);
        assert!((ens.total_mass() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn zero_density_is_empty_ensemble() {
        let grid = build_grid(1.0, 8, 2).unwrap();
        assert!(matches!(
            init_from_density(|_| 0.0, &grid, 0.0),
            Err(Error::EmptyEnsemble { .. })
        ));
    }

    #[test]
    fn negative_density_is_rejected() {
        let grid = build_grid(1.0, 8, 1).unwrap();
        assert!(matches!(
            init_from_density(|x| x[0], &grid, 0.0),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn barenblatt_particles_only_inside_support() {
        let (m, k, t) = (1.5_f64, 1.0_f64, 2.0_f64);
        let alpha = 1.0 / (m + 1.0);
        let kappa = alpha * (m - 1.0) / (2.0 * m);
        let psi = |x: &[f64]| {
            let xi = x[0].abs() / t.powf(alpha);
            t.powf(-alpha) * (k - kappa * xi * xi).max(0.0).powf(1.0 / (m - 1.0))
        };
        let radius = t.powf(alpha) * (k / kappa).sqrt();
        let grid = build_grid(8.0, 60, 1).unwrap();
        let ens = init_from_density(psi, &grid, 0.0).unwrap();
        let inside = grid.axis_coords().into_iter().filter(|x| x.abs() < radius).count();
        assert_eq!(ens.len(), inside);
        assert!(ens.len() < 60);
        assert!(ens.weights().iter().all(|&w| w > 0.0));
        assert!(ens.positions().iter().all(|x| x.abs() < radius));
    }

    #[test]
    fn weight_floor_discards_light_cells() {
        let grid = build_grid(15.0, 60, 1).unwrap();
        let all = init_from_density(heat_kernel(2.0), &grid, 0.0).unwrap();
        let some = init_from_density(heat_kernel(2.0), &grid, 1e-6).unwrap();
        assert!(some.len() < all.len());
        assert!(some.weights().iter().all(|&w| w > 1e-6));
    }

    #[test]
    fn ensemble_rejects_bad_state() {
        assert!(ParticleEnsemble::new(1, vec![0.0], vec![0.0]).is_err());
        assert!(ParticleEnsemble::new(1, vec![0.0], vec![-1.0]).is_err());
        assert!(ParticleEnsemble::new(1, vec![f64::NAN], vec![1.0]).is_err());
        assert!(ParticleEnsemble::new(2, vec![0.0], vec![1.0]).is_err());
        let mut ens = ParticleEnsemble::new(1, vec![0.0], vec![1.0]).unwrap();
        assert!(ens.set_positions(vec![f64::INFINITY]).is_err());
        assert!(ens.set_positions(vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn single_blob_peak() {
        for d in 1..=2 {
            let ens = ParticleEnsemble::new(d, vec![0.0; d], vec![1.0]).unwrap();
            let eps = 0.3;
            let v = reconstruct_density(&ens, eps, &vec![0.0; d]).unwrap();
            let expected = (2.0 * PI * eps).powf(-(d as f64) / 2.0);
            assert!((v[0] - expected).abs() < 1e-15 * expected);
        }
    }

    #[test]
    fn symmetric_pair_midpoint_value() {
        let (a, eps) = (0.7, 0.2);
        let ens = ParticleEnsemble::new(1, vec![-a, a], vec![0.5, 0.5]).unwrap();
        let v = reconstruct_density(&ens, eps, &[0.0]).unwrap()[0];
        let expected = (2.0 * PI * eps).powf(-0.5) * (-a * a / (2.0 * eps)).exp();
        assert!((v - expected).abs() < 1e-15);
    }

    #[test]
    fn heat_reconstruction_is_accurate() {
        let grid = build_grid(15.0, 100, 1).unwrap();
        let ens = init_from_density(heat_kernel(2.0), &grid, 0.0).unwrap();
        let eps = 0.64 * grid.cell_size().powf(1.98);
        let recon = reconstruct_density(&ens, eps, &grid.centers_flat()).unwrap();
        let exact = heat_kernel(2.0);
        let linf = grid
            .centers()
            .zip(&recon)
            .map(|(c, r)| (exact(&c) - r).abs())
            .fold(0.0, f64::max);
        assert!(linf < 1e-2, "linf = {linf}");
    }

    #[test]
    fn reconstruct_rejects_bad_epsilon() {
        let ens = ParticleEnsemble::new(1, vec![0.0], vec![1.0]).unwrap();
        assert!(reconstruct_density(&ens, 0.0, &[0.0]).is_err());
        assert!(reconstruct_density(&ens, -1.0, &[0.0]).is_err());
    }
}
