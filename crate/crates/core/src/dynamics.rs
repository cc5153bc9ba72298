//! Particle velocity fields.
//!
//! Aggregation-diffusion moves each particle against its per-mass energy
//! gradient. Landau couples all pairs through the collision kernel; the
//! `dN x dN` pair operator is never assembled.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::models::CollisionKernel;

/// Rows per block of the unordered pair loop. Fixed so that the reduction
/// order, and therefore every bit of the result, is independent of the
/// thread count.
const PAIR_ROW_BLOCK: usize = 32;

/// Per-particle `d`-vectors in flat layout (`len * dim`), usually per-mass
/// energy gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    dim: usize,
    values: Vec<f64>,
}

impl GradientField {
    pub fn new(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || !values.len().is_multiple_of(dim) {
            return Err(Error::InvalidArgument(format!(
                "gradient buffer of length {} does not fit dimension {dim}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("gradient entry {i} is not finite ({})", values[i])));
        }
        Ok(Self { dim, values })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, p: usize) -> &[f64] {
        &self.values[p * self.dim..(p + 1) * self.dim]
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// `v_p = -G_p`: the per-mass gradient already absorbs `W^{-1}`.
pub fn velocity_aggdiff(grad: &GradientField) -> Vec<f64> {
    grad.values().iter().map(|g| -g).collect()
}

/// `v_p = -sum_q w_q A(x_p - x_q)(G_p - G_q)`.
///
/// Each unordered pair is visited once and its contribution is added to `p`
/// and subtracted from `q`, so `sum_p w_p v_p` cancels pairwise.
pub fn velocity_landau(
    kernel: &CollisionKernel,
    positions: &[f64],
    weights: &[f64],
    grad: &GradientField,
) -> Result<Vec<f64>> {
    let d = grad.dim();
    let n = weights.len();
    if positions.len() != n * d || grad.len() != n {
        return Err(Error::InvalidArgument(format!(
            "inconsistent lengths: {} positions, {} weights, {} gradients (dim {d})",
            positions.len(),
            n,
            grad.len()
        )));
    }
    let g = grad.values();
    let blocks: Vec<Vec<f64>> = (0..n.div_ceil(PAIR_ROW_BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut acc = vec![0.0; n * d];
            let mut diff = vec![0.0; d];
            let mut du = vec![0.0; d];
            let mut f = vec![0.0; d];
            for p in b * PAIR_ROW_BLOCK..((b + 1) * PAIR_ROW_BLOCK).min(n) {
                let xp = &positions[p * d..(p + 1) * d];
                let gp = &g[p * d..(p + 1) * d];
                for q in p + 1..n {
                    for k in 0..d {
                        diff[k] = xp[k] - positions[q * d + k];
                        du[k] = gp[k] - g[q * d + k];
                    }
                    kernel.apply(&diff, &du, &mut f);
                    let ww = weights[p] * weights[q];
                    for k in 0..d {
                        let t = ww * f[k];
                        acc[p * d + k] += t;
                        acc[q * d + k] -= t;
                    }
                }
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; n * d];
    for block in &blocks {
        total.iter_mut().zip(block).for_each(|(t, b)| *t += b);
    }
    for (p, w) in weights.iter().enumerate() {
        for k in 0..d {
            total[p * d + k] = -total[p * d + k] / w;
        }
    }
    Ok(total)
}

/// `sum_{p<q} w_p w_q (G_p - G_q)^T A(x_p - x_q) (G_p - G_q)`, reduced in the
/// same fixed block order as [`velocity_landau`].
pub(crate) fn pair_quadratic_form(kernel: &CollisionKernel, positions: &[f64], weights: &[f64], grad: &GradientField) -> f64 {
    let d = grad.dim();
    let n = weights.len();
    let g = grad.values();
    let partial: Vec<f64> = (0..n.div_ceil(PAIR_ROW_BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut diff = vec![0.0; d];
            let mut du = vec![0.0; d];
            let mut acc = 0.0;
            for p in b * PAIR_ROW_BLOCK..((b + 1) * PAIR_ROW_BLOCK).min(n) {
                for q in p + 1..n {
                    for k in 0..d {
                        diff[k] = positions[p * d + k] - positions[q * d + k];
                        du[k] = g[p * d + k] - g[q * d + k];
                    }
                    acc += weights[p] * weights[q] * kernel.quadratic_form(&diff, &du);
                }
            }
            acc
        })
        .collect();
    partial.iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn field(dim: usize, values: Vec<f64>) -> GradientField {
        GradientField::new(dim, values).unwrap()
    }

    #[test]
    fn zero_gradient_gives_zero_velocity() {
        assert_eq!(velocity_aggdiff(&field(1, vec![0.0; 4])), vec![-0.0; 4]);
    }

    #[test]
    fn aggdiff_velocity_is_negated_gradient() {
        let v = velocity_aggdiff(&field(2, vec![1.0, -2.0, 0.5, 3.0]));
        assert_eq!(v, vec![-1.0, 2.0, -0.5, -3.0]);
    }

    #[test]
    fn single_landau_particle_is_stationary() {
        let v = velocity_landau(&CollisionKernel::maxwell(), &[0.3, 0.4], &[1.0], &field(2, vec![1.0, 2.0])).unwrap();
        assert_eq!(v, vec![0.0, 0.0]);
    }

    #[test]
    fn uniform_gradient_gives_zero_velocity() {
        let pos = [0.0, 0.0, 1.0, 0.5, -0.7, 2.0];
        let v = velocity_landau(&CollisionKernel::coulomb(), &pos, &[0.2, 0.3, 0.5], &field(2, [0.4, -1.0].repeat(3)))
            .unwrap();
        assert!(v.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let r = velocity_landau(&CollisionKernel::maxwell(), &[0.0, 0.0], &[1.0, 1.0], &field(2, vec![0.0; 4]));
        assert!(r.is_err());
        assert!(GradientField::new(2, vec![0.0; 3]).is_err());
        assert!(GradientField::new(1, vec![f64::NAN]).is_err());
    }

    fn config(n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
        (
            proptest::collection::vec(-3.0f64..3.0, 2 * n),
            proptest::collection::vec(0.01f64..1.0, n),
            proptest::collection::vec(-2.0f64..2.0, 2 * n),
        )
    }

    proptest! {
        #[test]
        fn landau_velocity_annihilates_momentum_and_energy((pos, w, g) in config(40), gamma in -3.0f64..0.5) {
            let kernel = CollisionKernel::new(1.0 / 16.0, gamma).unwrap();
            let grad = field(2, g);
            let v = velocity_landau(&kernel, &pos, &w, &grad).unwrap();
            let scale: f64 = (0..w.len()).map(|p| w[p] * v[2 * p].hypot(v[2 * p + 1])).sum();
            let mut momentum = [0.0; 2];
            let mut kinetic = 0.0;
            let mut dissipation = 0.0;
            for p in 0..w.len() {
                for k in 0..2 {
                    momentum[k] += w[p] * v[2 * p + k];
                    kinetic += w[p] * pos[2 * p + k] * v[2 * p + k];
                    dissipation += w[p] * grad.values()[2 * p + k] * v[2 * p + k];
                }
            }
            prop_assert!(momentum[0].abs() <= 1e-12 * scale && momentum[1].abs() <= 1e-12 * scale);
            let pos_scale: f64 = (0..w.len()).map(|p| w[p] * pos[2 * p].hypot(pos[2 * p + 1]) * v[2 * p].hypot(v[2 * p + 1])).sum();
            prop_assert!(kinetic.abs() <= 1e-12 * pos_scale.max(scale));
            let g_scale: f64 = (0..w.len()).map(|p| w[p] * grad.get(p)[0].hypot(grad.get(p)[1]) * v[2 * p].hypot(v[2 * p + 1])).sum();
            prop_assert!(dissipation <= 1e-12 * g_scale);
        }

        #[test]
        fn landau_velocity_is_permutation_equivariant((pos, w, g) in config(12), seed in 0usize..1000) {
            let kernel = CollisionKernel::maxwell();
            let n = w.len();
            let mut perm: Vec<usize> = (0..n).collect();
            perm.rotate_left(seed % n);
            perm.swap(0, (seed / 7) % n);
            let pos2: Vec<f64> = perm.iter().flat_map(|&p| [pos[2 * p], pos[2 * p + 1]]).collect();
            let g2: Vec<f64> = perm.iter().flat_map(|&p| [g[2 * p], g[2 * p + 1]]).collect();
            let w2: Vec<f64> = perm.iter().map(|&p| w[p]).collect();
            let v = velocity_landau(&kernel, &pos, &w, &field(2, g)).unwrap();
            let v2 = velocity_landau(&kernel, &pos2, &w2, &field(2, g2)).unwrap();
            for (i, &p) in perm.iter().enumerate() {
                for k in 0..2 {
                    let a = v[2 * p + k];
                    let b = v2[2 * i + k];
                    prop_assert!((a - b).abs() <= 1e-13 * (1.0 + a.abs()));
                }
            }
        }

        #[test]
        fn aggdiff_velocity_dissipates(g in proptest::collection::vec(-5.0f64..5.0, 1..30)) {
            let grad = field(1, g.clone());
            let v = velocity_aggdiff(&grad);
            let rate: f64 = g.iter().zip(&v).map(|(a, b)| a * b).sum();
            prop_assert!(rate <= 0.0);
        }
    }

    #[test]
    fn pair_form_matches_dissipation_identity() {
        // sum_p w_p G_p . v_p = -sum_{p<q} w_p w_q u^T A u
        let pos = [0.1, 0.2, -0.5, 0.9, 1.3, -0.4, 0.0, -1.1];
        let w = [0.1, 0.4, 0.3, 0.2];
        let grad = field(2, vec![0.3, -0.2, 1.0, 0.1, -0.6, 0.8, 0.2, 0.2]);
        let kernel = CollisionKernel::new(0.5, -1.0).unwrap();
        let v = velocity_landau(&kernel, &pos, &w, &grad).unwrap();
        let rate: f64 = (0..4).map(|p| w[p] * (grad.get(p)[0] * v[2 * p] + grad.get(p)[1] * v[2 * p + 1])).sum();
        let form = pair_quadratic_form(&kernel, &pos, &w, &grad);
        assert!((rate + form).abs() < 1e-14 * form.abs());
        assert!(form > 0.0);
    }
}
