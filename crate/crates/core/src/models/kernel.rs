use crate::error::{Error, Result};

/// Landau collision kernel `A(x) = C |x|^gamma (|x|^2 I - x x^T)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionKernel {
    strength: f64,
    exponent: f64,
}

impl CollisionKernel {
    pub fn new(strength: f64, exponent: f64) -> Result<Self> {
        if !(strength.is_finite() && strength > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "kernel strength must be finite and positive, got {strength}"
            )));
        }
        if !exponent.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "kernel exponent must be finite, got {exponent}"
            )));
        }
        Ok(Self { strength, exponent })
    }

    /// `C = 1/16`, `gamma = 0`.
    pub fn maxwell() -> Self {
        Self { strength: 1.0 / 16.0, exponent: 0.0 }
    }

    /// `C = 1/16`, `gamma = -3`.
    pub fn coulomb() -> Self {
        Self { strength: 1.0 / 16.0, exponent: -3.0 }
    }

    pub fn strength(&self) -> f64 {
        self.strength
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    /// `C |x|^gamma`, the scalar prefactor at squared radius `r2 > 0`.
    #[inline]
    pub(crate) fn prefactor(&self, r2: f64) -> f64 {
        if self.exponent == 0.0 {
            self.strength
        } else {
            self.strength * r2.powf(0.5 * self.exponent)
        }
    }

    /// Writes `A(x) v` into `out` without forming the matrix. `A(0)` is the
    /// zero matrix for every exponent.
    #[inline]
    pub fn apply(&self, x: &[f64], v: &[f64], out: &mut [f64]) {
        let mut r2 = 0.0;
        let mut xv = 0.0;
        for k in 0..x.len() {
            r2 += x[k] * x[k];
            xv += x[k] * v[k];
        }
        if r2 == 0.0 {
            out.iter_mut().for_each(|o| *o = 0.0);
            return;
        }
        let c = self.prefactor(r2);
        for k in 0..x.len() {
            out[k] = c * (r2 * v[k] - xv * x[k]);
        }
    }

    /// Dense row-major `d x d` matrix `A(x)`.
    pub fn matrix(&self, x: &[f64]) -> Vec<f64> {
        let d = x.len();
        let r2: f64 = x.iter().map(|a| a * a).sum();
        let mut out = vec![0.0; d * d];
        if r2 == 0.0 {
            return out;
        }
        let c = self.prefactor(r2);
        for i in 0..d {
            for j in 0..d {
                let delta = if i == j { r2 } else { 0.0 };
                out[i * d + j] = c * (delta - x[i] * x[j]);
            }
        }
        out
    }

    /// `u^T A(x) u`, computed as `C |x|^gamma (|x|^2 |u|^2 - (x.u)^2)`.
    #[inline]
    pub fn quadratic_form(&self, x: &[f64], u: &[f64]) -> f64 {
        let mut r2 = 0.0;
        let mut xu = 0.0;
        let mut u2 = 0.0;
        for k in 0..x.len() {
            r2 += x[k] * x[k];
            xu += x[k] * u[k];
            u2 += u[k] * u[k];
        }
        if r2 == 0.0 {
            return 0.0;
        }
        self.prefactor(r2) * (r2 * u2 - xu * xu)
    }
}

/// `A(x) v` as a new vector.
pub fn kernel_matrix_apply(kernel: &CollisionKernel, x: &[f64], v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    kernel.apply(x, v, &mut out);
    out
}
