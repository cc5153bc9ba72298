//! Grid sums of Gaussian blobs.
//!
//! Every quantity here is a double sum over grid cells and particles of
//! `phi_eps(x_i - x_q)`. Because the grid is a tensor product and the Gaussian
//! factorizes over axes, the exponentials are tabulated once per (axis,
//! coordinate, point) and the sums reduce to products of table entries.
//! Each output entry is an independent fixed-order sum, so results do not
//! depend on the thread count.

use rayon::prelude::*;

use crate::ensemble::QuadratureGrid;

/// `1D` Gaussian factors `exp(-(c_j - y)^2 / (2 eps))` for all grid
/// coordinates `c_j` and the `k`-th coordinate `y` of every point.
struct AxisTables {
    /// `tables[k][j * n + p]`
    grid_major: Vec<Vec<f64>>,
    n: usize,
}

fn gaussian_factor(dx: f64, inv_two_eps: f64) -> f64 {
    (-(dx * dx) * inv_two_eps).exp()
}

impl AxisTables {
    fn new(grid: &QuadratureGrid, epsilon: f64, points: &[f64]) -> Self {
        let d = grid.dim();
        let n = points.len() / d;
        let coords = grid.axis_coords();
        let inv_two_eps = 0.5 / epsilon;
        let grid_major = (0..d)
            .map(|k| {
                let mut t = vec![0.0; coords.len() * n];
                t.par_chunks_mut(n.max(1)).zip(coords.par_iter()).for_each(|(row, &c)| {
                    for (p, out) in row.iter_mut().enumerate() {
                        *out = gaussian_factor(c - points[p * d + k], inv_two_eps);
                    }
                });
                t
            })
            .collect();
        Self { grid_major, n }
    }

    fn row(&self, axis: usize, j: usize) -> &[f64] {
        &self.grid_major[axis][j * self.n..(j + 1) * self.n]
    }
}

/// Gaussian normalization `(2 pi eps)^(-d/2)`.
pub(crate) fn normalization(epsilon: f64, dim: usize) -> f64 {
    (2.0 * std::f64::consts::PI * epsilon).powf(-0.5 * dim as f64)
}

/// `g(x_i) = sum_q w_q phi_eps(x_i - x_q)` at every grid cell.
pub(crate) fn grid_density(grid: &QuadratureGrid, epsilon: f64, positions: &[f64], weights: &[f64]) -> Vec<f64> {
    let d = grid.dim();
    let m = grid.cells_per_dim();
    let norm = normalization(epsilon, d);
    let tables = AxisTables::new(grid, epsilon, positions);
    match d {
        1 => (0..m)
            .into_par_iter()
            .map(|j| norm * dot(weights, tables.row(0, j)))
            .collect(),
        2 => {
            // Fold weights into the first axis once.
            let weighted: Vec<Vec<f64>> = (0..m)
                .into_par_iter()
                .map(|j| tables.row(0, j).iter().zip(weights).map(|(a, w)| a * w).collect())
                .collect();
            let mut out = vec![0.0; m * m];
            out.par_chunks_mut(m).enumerate().for_each(|(j0, row)| {
                let a = &weighted[j0];
                for (j1, g) in row.iter_mut().enumerate() {
                    *g = norm * dot(a, tables.row(1, j1));
                }
            });
            out
        }
        _ => (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let mut idx = vec![0; d];
                grid.multi_index(i, &mut idx);
                let mut acc = 0.0;
                for (q, w) in weights.iter().enumerate() {
                    let mut prod = *w;
                    for (k, &j) in idx.iter().enumerate() {
                        prod *= tables.row(k, j)[q];
                    }
                    acc += prod;
                }
                norm * acc
            })
            .collect(),
    }
}

/// `log g(x_i)` at every cell. Cells where the direct sum fell below the
/// normal floating-point range are recomputed in log-sum-exp form.
pub(crate) fn log_grid_density(
    grid: &QuadratureGrid,
    epsilon: f64,
    positions: &[f64],
    weights: &[f64],
    density: &[f64],
) -> Vec<f64> {
    let d = grid.dim();
    let log_norm = normalization(epsilon, d).ln();
    let inv_two_eps = 0.5 / epsilon;
    density
        .par_iter()
        .enumerate()
        .map(|(i, &g)| {
            if g >= f64::MIN_POSITIVE {
                return g.ln();
            }
            let center = grid.center(i);
            let exponents: Vec<f64> = positions
                .chunks_exact(d)
                .zip(weights)
                .map(|(x, w)| {
                    let r2: f64 = x.iter().zip(&center).map(|(a, b)| (a - b) * (a - b)).sum();
                    w.ln() - r2 * inv_two_eps
                })
                .collect();
            let max = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = exponents.iter().map(|e| (e - max).exp()).sum();
            log_norm + max + sum.ln()
        })
        .collect()
}

/// `h^d sum_i grad phi_eps(y_p - x_i) F(x_i)` for every evaluation point
/// `y_p`, given a per-cell field `F`. Returned flat, `dim` entries per point.
pub(crate) fn contract_gradient(grid: &QuadratureGrid, epsilon: f64, eval_points: &[f64], cell_field: &[f64]) -> Vec<f64> {
    let d = grid.dim();
    let m = grid.cells_per_dim();
    let coords = grid.axis_coords();
    let inv_two_eps = 0.5 / epsilon;
    // grad phi(y - x) = -(y - x)/eps * phi(y - x)
    let scale = -normalization(epsilon, d) * grid.cell_volume() / epsilon;
    let mut out = vec![0.0; eval_points.len()];
    out.par_chunks_mut(d).zip(eval_points.par_chunks(d)).for_each(|(h, y)| {
        // factors[k][j] = exp(-(y_k - c_j)^2 / (2 eps))
        let factors: Vec<Vec<f64>> = (0..d)
            .map(|k| coords.iter().map(|&c| gaussian_factor(y[k] - c, inv_two_eps)).collect())
            .collect();
        match d {
            1 => {
                let mut acc = 0.0;
                for j in 0..m {
                    acc += (y[0] - coords[j]) * factors[0][j] * cell_field[j];
                }
                h[0] = scale * acc;
            }
            2 => {
                let (fx, fy) = (&factors[0], &factors[1]);
                let (mut hx, mut hy) = (0.0, 0.0);
                for j0 in 0..m {
                    let row = &cell_field[j0 * m..(j0 + 1) * m];
                    let (mut s, mut sy) = (0.0, 0.0);
                    for j1 in 0..m {
                        let t = fy[j1] * row[j1];
                        s += t;
                        sy += (y[1] - coords[j1]) * t;
                    }
                    hx += (y[0] - coords[j0]) * fx[j0] * s;
                    hy += fx[j0] * sy;
                }
                h[0] = scale * hx;
                h[1] = scale * hy;
            }
            _ => {
                let mut idx = vec![0; d];
                let mut acc = vec![0.0; d];
                for (i, f) in cell_field.iter().enumerate() {
                    grid.multi_index(i, &mut idx);
                    let mut prod = *f;
                    for (k, &j) in idx.iter().enumerate() {
                        prod *= factors[k][j];
                    }
                    for (k, &j) in idx.iter().enumerate() {
                        acc[k] += (y[k] - coords[j]) * prod;
                    }
                }
                for k in 0..d {
                    h[k] = scale * acc[k];
                }
            }
        }
    });
    out
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
