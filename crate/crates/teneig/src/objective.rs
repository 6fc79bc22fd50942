//! The spherically constrained spectral objective `f(x) = A x^r / B x^r`
//! with its gradient, Hessian and tangent-space projected Hessian.
//!
//! Stationary points of `f` on the unit sphere are H- or Z-eigenpairs of `A`
//! depending on the metric choice, with eigenvalue `f(x)`. Maximization is
//! run as minimization of `-f` by negating the numerator contractions;
//! reported eigenvalues are un-negated.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Result, TeneigError};
use crate::hypergraph::HypergraphTensor;
use crate::metric::Spectrum;
use crate::tensor::{ContractionMatrix, DenseSymmetricTensor};

/// Which end of the spectrum to search for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Extreme {
    Min,
    Max,
}

impl Extreme {
    /// Internal sign applied to the numerator: the solver always minimizes.
    pub fn sign(self) -> f64 {
        match self {
            Extreme::Min => 1.0,
            Extreme::Max => -1.0,
        }
    }
}

/// Numerator tensor: explicit dense block or hypergraph-backed.
#[derive(Debug, Clone)]
pub enum TensorHandle {
    Dense(DenseSymmetricTensor),
    Hypergraph(HypergraphTensor),
}

impl TensorHandle {
    pub fn order(&self) -> usize {
        match self {
            TensorHandle::Dense(t) => t.order(),
            TensorHandle::Hypergraph(t) => t.order(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            TensorHandle::Dense(t) => t.dim(),
            TensorHandle::Hypergraph(t) => t.dim(),
        }
    }

    pub fn txr(&self, x: &DVector<f64>) -> Result<f64> {
        match self {
            TensorHandle::Dense(t) => t.txr(x),
            TensorHandle::Hypergraph(t) => t.txr(x),
        }
    }

    pub fn txr1(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        match self {
            TensorHandle::Dense(t) => t.txr1(x),
            TensorHandle::Hypergraph(t) => t.txr1(x),
        }
    }

    pub fn txr2(&self, x: &DVector<f64>) -> Result<ContractionMatrix> {
        match self {
            TensorHandle::Dense(t) => t.txr2(x).map(ContractionMatrix::Dense),
            TensorHandle::Hypergraph(t) => t.txr2(x),
        }
    }
}

/// Everything a solve needs to evaluate the objective: the numerator tensor,
/// the spectrum metric, and which extreme is sought.
#[derive(Debug, Clone)]
pub struct ObjectiveContext {
    tensor: TensorHandle,
    spectrum: Spectrum,
    extreme: Extreme,
}

impl ObjectiveContext {
    pub fn new(tensor: TensorHandle, spectrum: Spectrum, extreme: Extreme) -> Result<Self> {
        let r = tensor.order();
        if r % 2 != 0 || r < 2 {
            return Err(TeneigError::OddOrder(r));
        }
        Ok(Self { tensor, spectrum, extreme })
    }

    pub fn tensor(&self) -> &TensorHandle {
        &self.tensor
    }

    pub fn spectrum(&self) -> Spectrum {
        self.spectrum
    }

    pub fn extreme(&self) -> Extreme {
        self.extreme
    }

    pub fn order(&self) -> usize {
        self.tensor.order()
    }

    pub fn dim(&self) -> usize {
        self.tensor.dim()
    }

    /// Maps an internal (minimized) objective value back to the true
    /// eigenvalue estimate.
    pub fn true_lambda(&self, internal_f: f64) -> f64 {
        self.extreme.sign() * internal_f
    }

    /// Internal objective value only (cheap path for line searches).
    pub fn value(&self, x: &DVector<f64>) -> Result<f64> {
        let axr = self.extreme.sign() * self.tensor.txr(x)?;
        let bxr = self.spectrum.bxr(self.order(), x);
        let f = axr / bxr;
        if !f.is_finite() {
            return Err(TeneigError::EvalFailed(format!("objective value {f} at a point")));
        }
        Ok(f)
    }

    /// Full evaluation at `x`. The formulas are exact for any nonzero `x`
    /// (the objective is zero-order homogeneous); the solvers keep their
    /// iterates on the unit sphere.
    pub fn eval(&self, x: &DVector<f64>, want_hessian: bool) -> Result<EvalBundle> {
        let r = self.order();
        let sign = self.extreme.sign();
        let axr = sign * self.tensor.txr(x)?;
        let axr1 = self.tensor.txr1(x)? * sign;
        let bxr = self.spectrum.bxr(r, x);
        let bxr1 = self.spectrum.bxr1(r, x);
        if !axr.is_finite() || !bxr.is_finite() || bxr <= 0.0 {
            return Err(TeneigError::EvalFailed(format!(
                "contractions A x^r = {axr}, B x^r = {bxr}"
            )));
        }
        let f = axr / bxr;
        let g = (&axr1 - &bxr1 * f) * (r as f64 / bxr);
        if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(TeneigError::EvalFailed("nonfinite gradient".into()));
        }
        let axr2 = if want_hessian {
            let mut m = self.tensor.txr2(x)?;
            if sign < 0.0 {
                m.scale_mut(-1.0);
            }
            Some(m)
        } else {
            None
        };
        Ok(EvalBundle {
            x: x.clone(),
            r,
            spectrum: self.spectrum,
            f,
            g,
            axr,
            bxr,
            axr1,
            bxr1,
            axr2,
        })
    }

    /// Eigen-residual `|| A x^{r-1} - lambda * B x^{r-1} ||_2` in the true
    /// (un-negated) problem.
    pub fn residual(&self, x: &DVector<f64>, lambda: f64) -> Result<f64> {
        let axr1 = self.tensor.txr1(x)?;
        let bxr1 = self.spectrum.bxr1(self.order(), x);
        Ok((axr1 - bxr1 * lambda).norm())
    }
}

/// Cached contractions and derivative operators at one evaluation point.
#[derive(Debug, Clone)]
pub struct EvalBundle {
    pub x: DVector<f64>,
    r: usize,
    spectrum: Spectrum,
    /// Internal (signed) objective value.
    pub f: f64,
    /// Internal gradient.
    pub g: DVector<f64>,
    pub axr: f64,
    pub bxr: f64,
    pub axr1: DVector<f64>,
    pub bxr1: DVector<f64>,
    /// Matrix contraction of the (signed) numerator; present when the
    /// Hessian was requested.
    pub axr2: Option<ContractionMatrix>,
}

impl EvalBundle {
    fn coeffs(&self) -> (f64, f64, f64, f64) {
        let r = self.r as f64;
        let c1 = r * (r - 1.0) / self.bxr;
        let c2 = r * r / (self.bxr * self.bxr);
        let c3 = r * (r - 1.0) * self.axr / (self.bxr * self.bxr);
        let c4 = r * r * self.axr / (self.bxr * self.bxr * self.bxr);
        (c1, c2, c3, c4)
    }

    fn axr2(&self) -> &ContractionMatrix {
        self.axr2.as_ref().expect("eval was called without want_hessian")
    }

    /// Full Hessian product `H v` from the cached contractions.
    pub fn hess_mul(&self, v: &DVector<f64>) -> DVector<f64> {
        let (c1, c2, c3, c4) = self.coeffs();
        let av = self.axr1.dot(v);
        let bv = self.bxr1.dot(v);
        let mut out = self.axr2().mul_vec(v) * c1;
        out -= (&self.axr1 * bv + &self.bxr1 * av) * c2;
        out -= self.spectrum.bxr2_mul(self.r, &self.x, v) * c3;
        out += &self.bxr1 * (2.0 * c4 * bv);
        out
    }

    /// Projected Hessian product `B_k v = P H P v` with `P = I - x x^T`.
    pub fn proj_hess_mul(&self, v: &DVector<f64>) -> DVector<f64> {
        let t = v - &self.x * self.x.dot(v);
        let w = self.hess_mul(&t);
        &w - &self.x * self.x.dot(&w)
    }

    /// Dense full Hessian (small problems and derivative tests).
    pub fn hess_dense(&self) -> DMatrix<f64> {
        let (c1, c2, c3, c4) = self.coeffs();
        let mut h = self.axr2().to_dense() * c1;
        let ab = &self.axr1 * self.bxr1.transpose();
        h -= (&ab + ab.transpose()) * c2;
        h -= self.spectrum.bxr2_dense(self.r, &self.x) * c3;
        h += &self.bxr1 * self.bxr1.transpose() * (2.0 * c4);
        h
    }

    /// Dense projected Hessian.
    pub fn proj_hess_dense(&self) -> DMatrix<f64> {
        let n = self.x.len();
        let p = DMatrix::identity(n, n) - &self.x * self.x.transpose();
        &p * self.hess_dense() * &p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::qi_example_tensor;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn qi_ctx(alpha: f64, spectrum: Spectrum, extreme: Extreme) -> ObjectiveContext {
        ObjectiveContext::new(TensorHandle::Dense(qi_example_tensor(alpha)), spectrum, extreme)
            .unwrap()
    }

    fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
        let v = DVector::from_fn(n, |_, _| rng.random_range(-1.0f64..1.0));
        &v / v.norm().max(1e-9)
    }

    fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> DenseSymmetricTensor {
        let raw: Vec<f64> = (0..n.pow(4)).map(|_| rng.random_range(-1.0..1.0)).collect();
        DenseSymmetricTensor::symmetrize(4, n, raw).unwrap()
    }

    #[test]
    fn analytic_z_eigenpair_is_stationary() {
        let ctx = qi_ctx(0.0, Spectrum::Z, Extreme::Min);
        let x = DVector::from_vec(vec![0.5, 3f64.sqrt() / 2.0]);
        let bundle = ctx.eval(&x, false).unwrap();
        assert_relative_eq!(bundle.f, 0.75, max_relative = 1e-14);
        assert!(bundle.g.norm() <= 1e-12, "gradient norm {}", bundle.g.norm());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let h = 1e-5;
        for spectrum in [Spectrum::H, Spectrum::Z] {
            for n in 2..=4usize {
                let tensor = random_symmetric(&mut rng, n);
                let ctx = ObjectiveContext::new(
                    TensorHandle::Dense(tensor),
                    spectrum,
                    Extreme::Min,
                )
                .unwrap();
                let x = random_unit(&mut rng, n);
                let bundle = ctx.eval(&x, false).unwrap();
                for _ in 0..5 {
                    let mut d = random_unit(&mut rng, n);
                    d -= &x * x.dot(&d); // tangent direction
                    let fp = ctx.value(&(&x + &d * h)).unwrap();
                    let fm = ctx.value(&(&x - &d * h)).unwrap();
                    let fd = (fp - fm) / (2.0 * h);
                    let an = bundle.g.dot(&d);
                    let scale = bundle.g.norm().max(1.0);
                    assert!(
                        (fd - an).abs() <= 1e-6 * scale,
                        "fd {fd} vs analytic {an} (spectrum {spectrum:?}, n {n})"
                    );
                }
            }
        }
    }

    #[test]
    fn hessian_matches_finite_differences_of_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let h = 1e-5;
        for spectrum in [Spectrum::H, Spectrum::Z] {
            for n in [2usize, 3] {
                let tensor = random_symmetric(&mut rng, n);
                let ctx = ObjectiveContext::new(
                    TensorHandle::Dense(tensor),
                    spectrum,
                    Extreme::Min,
                )
                .unwrap();
                let x = random_unit(&mut rng, n);
                let hess = ctx.eval(&x, true).unwrap().hess_dense();
                let mut fd = DMatrix::zeros(n, n);
                for j in 0..n {
                    let mut e = DVector::zeros(n);
                    e[j] = h;
                    let gp = ctx.eval(&(&x + &e), false).unwrap().g;
                    let gm = ctx.eval(&(&x - &e), false).unwrap().g;
                    fd.set_column(j, &((gp - gm) / (2.0 * h)));
                }
                let err = (&hess - &fd).norm() / hess.norm().max(1.0);
                assert!(err <= 1e-5, "hessian fd error {err} (spectrum {spectrum:?}, n {n})");
            }
        }
    }

    #[test]
    fn gradient_is_orthogonal_to_the_iterate() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for spectrum in [Spectrum::H, Spectrum::Z] {
            let tensor = random_symmetric(&mut rng, 3);
            let ctx =
                ObjectiveContext::new(TensorHandle::Dense(tensor), spectrum, Extreme::Min)
                    .unwrap();
            for _ in 0..10 {
                let x = random_unit(&mut rng, 3);
                let b = ctx.eval(&x, false).unwrap();
                assert!(b.g.dot(&x).abs() <= 1e-10, "g^T x = {}", b.g.dot(&x));
            }
        }
    }

    #[test]
    fn projected_hessian_annihilates_x_and_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for spectrum in [Spectrum::H, Spectrum::Z] {
            let tensor = random_symmetric(&mut rng, 4);
            let ctx =
                ObjectiveContext::new(TensorHandle::Dense(tensor), spectrum, Extreme::Min)
                    .unwrap();
            let x = random_unit(&mut rng, 4);
            let bundle = ctx.eval(&x, true).unwrap();
            let b = bundle.proj_hess_dense();
            assert!((&b - b.transpose()).norm() <= 1e-10 * b.norm().max(1.0));
            assert!((&b * &x).norm() <= 1e-10 * b.norm().max(1.0));
            // operator application agrees with the dense assembly
            let v = random_unit(&mut rng, 4);
            let fast = bundle.proj_hess_mul(&v);
            let slow = &b * &v;
            for i in 0..4 {
                assert_relative_eq!(fast[i], slow[i], max_relative = 1e-11, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn objective_is_zero_order_homogeneous() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for spectrum in [Spectrum::H, Spectrum::Z] {
            let tensor = random_symmetric(&mut rng, 3);
            let ctx =
                ObjectiveContext::new(TensorHandle::Dense(tensor), spectrum, Extreme::Min)
                    .unwrap();
            let x = random_unit(&mut rng, 3);
            let f = ctx.value(&x).unwrap();
            for &c in &[0.5, -1.0, 2.5] {
                assert_relative_eq!(ctx.value(&(&x * c)).unwrap(), f, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn residual_at_the_analytic_eigenpair() {
        let ctx = qi_ctx(0.0, Spectrum::Z, Extreme::Min);
        let x = DVector::from_vec(vec![0.5, 3f64.sqrt() / 2.0]);
        assert!(ctx.residual(&x, 0.75).unwrap() <= 1e-12);
    }

    #[test]
    fn e1_is_a_z_eigenvector_of_qi_alpha10() {
        // (A x^3) at (1,0) is (3,0) = 3 x, so (3, e1) is a Z-eigenpair.
        let ctx = qi_ctx(10.0, Spectrum::Z, Extreme::Min);
        let x = DVector::from_vec(vec![1.0, 0.0]);
        assert!(ctx.residual(&x, 3.0).unwrap() <= 1e-14);
        assert_relative_eq!(ctx.value(&x).unwrap(), 3.0, max_relative = 1e-14);
    }

    #[test]
    fn residual_grows_with_eigenvalue_shift() {
        let ctx = qi_ctx(0.0, Spectrum::Z, Extreme::Min);
        let x = DVector::from_vec(vec![0.5, 3f64.sqrt() / 2.0]);
        let shifted = ctx.residual(&x, 0.75 + 0.1).unwrap();
        let bxr1_norm = Spectrum::Z.bxr1(4, &x).norm();
        assert!(shifted >= 0.1 * bxr1_norm - 1e-12);
    }

    #[test]
    fn max_extreme_negates_internally_and_unnegates_reports() {
        let ctx = qi_ctx(0.0, Spectrum::Z, Extreme::Max);
        let x = DVector::from_vec(vec![1.0, 0.0]);
        let b = ctx.eval(&x, true).unwrap();
        assert_relative_eq!(b.f, -3.0, max_relative = 1e-14);
        assert_relative_eq!(ctx.true_lambda(b.f), 3.0, max_relative = 1e-14);
        // residual is evaluated in the true problem
        assert!(ctx.residual(&x, 3.0).unwrap() <= 1e-14);
    }

    #[test]
    fn odd_order_is_rejected_at_the_solver_level() {
        let t = DenseSymmetricTensor::zeros(3, 2).unwrap();
        assert!(matches!(
            ObjectiveContext::new(TensorHandle::Dense(t), Spectrum::Z, Extreme::Min),
            Err(TeneigError::OddOrder(3))
        ));
    }
}
