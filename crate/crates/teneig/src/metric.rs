//! Closed-form contractions of the denominator tensor that selects the
//! spectrum type.
//!
//! For the H spectrum the denominator is the identity tensor (diagonal ones):
//! `B x^r = sum x_i^r`, `B x^{r-1} = x^{[r-1]}`, `B x^{r-2} = diag(x_i^{r-2})`.
//! For the Z spectrum it is the symmetrized r/2-fold product of the identity
//! matrix: `B x^r = ||x||^r`, `B x^{r-1} = ||x||^{r-2} x`, and
//! `B x^{r-2} = (||x||^{r-2} I + (r-2) ||x||^{r-4} x x^T) / (r-1)`,
//! the unique matrix consistent with the gradient and Hessian of `||x||^r`.
//! No dense denominator tensor is ever built.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

/// Spectrum selector; doubles as the choice of denominator tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Spectrum {
    H,
    Z,
}

impl Spectrum {
    /// `B x^r`.
    pub fn bxr(self, r: usize, x: &DVector<f64>) -> f64 {
        match self {
            Spectrum::H => x.iter().map(|&v| v.powi(r as i32)).sum(),
            Spectrum::Z => x.norm().powi(r as i32),
        }
    }

    /// `B x^{r-1}`.
    pub fn bxr1(self, r: usize, x: &DVector<f64>) -> DVector<f64> {
        match self {
            Spectrum::H => x.map(|v| v.powi(r as i32 - 1)),
            Spectrum::Z => {
                let nx = x.norm();
                if r == 2 {
                    x.clone()
                } else {
                    x * nx.powi(r as i32 - 2)
                }
            }
        }
    }

    /// Product `(B x^{r-2}) v` without forming the matrix.
    pub fn bxr2_mul(self, r: usize, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        match self {
            Spectrum::H => {
                DVector::from_fn(x.len(), |i, _| x[i].powi(r as i32 - 2) * v[i])
            }
            Spectrum::Z => {
                let nx = x.norm();
                let s_ident = if r == 2 { 1.0 } else { nx.powi(r as i32 - 2) };
                let mut out = v * s_ident;
                if r > 2 {
                    let s_rank1 = (r as f64 - 2.0) * nx.powi(r as i32 - 4);
                    out += x * (s_rank1 * x.dot(v));
                }
                out / (r as f64 - 1.0)
            }
        }
    }

    /// Dense `B x^{r-2}` (small problems and derivative tests).
    pub fn bxr2_dense(self, r: usize, x: &DVector<f64>) -> DMatrix<f64> {
        let n = x.len();
        match self {
            Spectrum::H => {
                DMatrix::from_diagonal(&x.map(|v| v.powi(r as i32 - 2)))
            }
            Spectrum::Z => {
                let nx = x.norm();
                let s_ident = if r == 2 { 1.0 } else { nx.powi(r as i32 - 2) };
                let mut m = DMatrix::identity(n, n) * s_ident;
                if r > 2 {
                    let s_rank1 = (r as f64 - 2.0) * nx.powi(r as i32 - 4);
                    m += x * x.transpose() * s_rank1;
                }
                m / (r as f64 - 1.0)
            }
        }
    }
}
