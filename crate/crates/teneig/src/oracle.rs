//! Independent brute-force ground truth: naive contractions with their own
//! loop order, and exhaustive eigenpair enumeration for two-dimensional
//! tensors by scanning the unit circle.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, TeneigError};
use crate::metric::Spectrum;
use crate::tensor::DenseSymmetricTensor;

const NAIVE_BUDGET: usize = 10_000_000;

/// Output of [`naive_contract`] for drop = 0, 1 or 2.
#[derive(Debug, Clone)]
pub enum NaiveResult {
    Scalar(f64),
    Vector(DVector<f64>),
    Matrix(DMatrix<f64>),
}

impl NaiveResult {
    pub fn scalar(&self) -> f64 {
        match self {
            NaiveResult::Scalar(s) => *s,
            _ => panic!("expected scalar contraction"),
        }
    }

    pub fn vector(&self) -> &DVector<f64> {
        match self {
            NaiveResult::Vector(v) => v,
            _ => panic!("expected vector contraction"),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        match self {
            NaiveResult::Matrix(m) => m,
            _ => panic!("expected matrix contraction"),
        }
    }
}

/// Advances a multi-index with the FIRST position fastest, the reverse of
/// the dense tensor's internal order, so sums associate differently.
fn advance_reversed(idx: &mut [usize], dim: usize) -> bool {
    for slot in idx.iter_mut() {
        *slot += 1;
        if *slot < dim {
            return true;
        }
        *slot = 0;
    }
    false
}

/// Full summation over all `n^r` index tuples with no symmetry shortcuts.
/// `drop` selects how many leading indices stay free: 0 gives the scalar
/// `T x^r`, 1 the vector `T x^{r-1}`, 2 the matrix `T x^{r-2}`.
pub fn naive_contract(
    t: &DenseSymmetricTensor,
    x: &DVector<f64>,
    drop: usize,
) -> Result<NaiveResult> {
    if drop > 2 {
        return Err(TeneigError::InvalidArgument("drop must be 0, 1 or 2".into()));
    }
    if drop >= t.order() {
        return Err(TeneigError::InvalidArgument(
            "drop must be smaller than the tensor order".into(),
        ));
    }
    if x.len() != t.dim() {
        return Err(TeneigError::DimensionMismatch { expected: t.dim(), got: x.len() });
    }
    if t.entries().len() > NAIVE_BUDGET {
        return Err(TeneigError::BudgetExceeded {
            needed: t.entries().len() as u128,
            budget: NAIVE_BUDGET as u128,
        });
    }
    let n = t.dim();
    let r = t.order();
    let mut idx = vec![0usize; r];
    match drop {
        0 => {
            let mut sum = 0.0;
            loop {
                let mut term = t.get(&idx);
                for &i in &idx {
                    term *= x[i];
                }
                sum += term;
                if !advance_reversed(&mut idx, n) {
                    break;
                }
            }
            Ok(NaiveResult::Scalar(sum))
        }
        1 => {
            let mut out = DVector::zeros(n);
            loop {
                let mut term = t.get(&idx);
                for &i in &idx[1..] {
                    term *= x[i];
                }
                out[idx[0]] += term;
                if !advance_reversed(&mut idx, n) {
                    break;
                }
            }
            Ok(NaiveResult::Vector(out))
        }
        _ => {
            let mut out = DMatrix::zeros(n, n);
            loop {
                let mut term = t.get(&idx);
                for &i in &idx[2..] {
                    term *= x[i];
                }
                out[(idx[0], idx[1])] += term;
                if !advance_reversed(&mut idx, n) {
                    break;
                }
            }
            Ok(NaiveResult::Matrix(out))
        }
    }
}

/// An eigenpair found by the circle scan.
#[derive(Debug, Clone)]
pub struct CirclePair {
    pub lambda: f64,
    pub vector: DVector<f64>,
    pub theta: f64,
}

/// Exhaustive stationary-point enumeration for n = 2, even r: parameterize
/// `x(theta) = (cos theta, sin theta)` on `[0, pi)`, locate sign changes of
/// `dF/dtheta` for `F = f(x(theta))` on a uniform grid, refine each bracket
/// by bisection, and return the deduplicated `(lambda, x)` pairs sorted by
/// eigenvalue. Antipodal pairs are identified by the half-period domain.
pub fn circle_eigenpairs(
    t: &DenseSymmetricTensor,
    spectrum: Spectrum,
    grid: usize,
) -> Result<Vec<CirclePair>> {
    if t.dim() != 2 {
        return Err(TeneigError::InvalidArgument(format!(
            "circle enumeration needs dimension 2, got {}",
            t.dim()
        )));
    }
    let r = t.order();
    if r % 2 != 0 {
        return Err(TeneigError::OddOrder(r));
    }
    if grid < 16 {
        return Err(TeneigError::InvalidArgument("grid too coarse".into()));
    }

    let point = |theta: f64| DVector::from_vec(vec![theta.cos(), theta.sin()]);
    let tangent = |theta: f64| DVector::from_vec(vec![-theta.sin(), theta.cos()]);
    // numerator of dF/dtheta: u' v - u v' (v > 0 on the circle for even r)
    let slope_num = |theta: f64| -> Result<f64> {
        let x = point(theta);
        let xp = tangent(theta);
        let u = naive_contract(t, &x, 0)?.scalar();
        let up = r as f64 * naive_contract(t, &x, 1)?.vector().dot(&xp);
        let v = spectrum.bxr(r, &x);
        let vp = r as f64 * spectrum.bxr1(r, &x).dot(&xp);
        Ok(up * v - u * vp)
    };
    let value = |theta: f64| -> Result<f64> {
        let x = point(theta);
        let u = naive_contract(t, &x, 0)?.scalar();
        Ok(u / spectrum.bxr(r, &x))
    };

    let step = std::f64::consts::PI / grid as f64;
    let mut slopes = Vec::with_capacity(grid);
    let mut max_abs: f64 = 0.0;
    for i in 0..grid {
        let s = slope_num(i as f64 * step)?;
        max_abs = max_abs.max(s.abs());
        slopes.push(s);
    }

    // constant objective: every point is stationary, report one
    if max_abs <= 1e-13 {
        let theta = 0.0;
        return Ok(vec![CirclePair { lambda: value(theta)?, vector: point(theta), theta }]);
    }

    let mut roots: Vec<f64> = Vec::new();
    for i in 0..grid {
        let a = i as f64 * step;
        let b = a + step;
        let (sa, sb) = (slopes[i], slopes[(i + 1) % grid]);
        if sa == 0.0 {
            roots.push(a);
            continue;
        }
        if sa * sb < 0.0 {
            // bisect to machine-level width
            let (mut lo, mut hi, mut slo) = (a, b, sa);
            for _ in 0..64 {
                let mid = 0.5 * (lo + hi);
                let sm = slope_num(mid)?;
                if sm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if slo * sm < 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    slo = sm;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
    }

    // deduplicate by wrap-around angular distance
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pi = std::f64::consts::PI;
    let mut kept: Vec<f64> = Vec::new();
    for &th in &roots {
        let th = th.rem_euclid(pi);
        let dup = kept.iter().any(|&k| {
            let d = (th - k).abs();
            d.min(pi - d) <= 1e-9
        });
        if !dup {
            kept.push(th);
        }
    }

    let mut pairs = Vec::with_capacity(kept.len());
    for th in kept {
        pairs.push(CirclePair { lambda: value(th)?, vector: point(th), theta: th });
    }
    pairs.sort_by(|a, b| a.lambda.partial_cmp(&b.lambda).unwrap());
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypergraph::{HypergraphTensor, TensorKind, UniformHypergraph};
    use crate::objective::{Extreme, ObjectiveContext, TensorHandle};
    use crate::tensor::qi_example_tensor;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn naive_contractions_match_the_fast_paths() {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        for trial in 0..50 {
            let n: usize = rng.random_range(2..=4);
            let raw: Vec<f64> = (0..n.pow(4)).map(|_| rng.random_range(-1.0..1.0)).collect();
            let t = DenseSymmetricTensor::symmetrize(4, n, raw).unwrap();
            let x = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let s = naive_contract(&t, &x, 0).unwrap().scalar();
            assert_relative_eq!(s, t.txr(&x).unwrap(), max_relative = 1e-12, epsilon = 1e-14);
            let v = naive_contract(&t, &x, 1).unwrap();
            let tv = t.txr1(&x).unwrap();
            let m = naive_contract(&t, &x, 2).unwrap();
            let tm = t.txr2(&x).unwrap();
            for i in 0..n {
                assert_relative_eq!(v.vector()[i], tv[i], max_relative = 1e-12, epsilon = 1e-14);
                for j in 0..n {
                    assert_relative_eq!(
                        m.matrix()[(i, j)],
                        tm[(i, j)],
                        max_relative = 1e-12,
                        epsilon = 1e-14
                    );
                }
            }
            let _ = trial;
        }
    }

    #[test]
    fn identity_tensor_contraction_is_the_power_sum() {
        let t = DenseSymmetricTensor::identity(4, 3).unwrap();
        let x = DVector::from_vec(vec![0.5, -1.5, 2.0]);
        let want: f64 = x.iter().map(|v: &f64| v.powi(4)).sum();
        assert_relative_eq!(naive_contract(&t, &x, 0).unwrap().scalar(), want);
    }

    #[test]
    fn materialized_flower_scalar_contraction() {
        let g = UniformHypergraph::flower(4, 4).unwrap();
        let t = HypergraphTensor::new(g, TensorKind::Adjacency)
            .materialize(crate::tensor::DEFAULT_DENSE_BUDGET)
            .unwrap();
        let ones = DVector::from_element(10, 1.0);
        assert_relative_eq!(
            naive_contract(&t, &ones, 0).unwrap().scalar(),
            16.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn circle_finds_the_qi_alpha0_z_spectrum() {
        let t = qi_example_tensor(0.0);
        let pairs = circle_eigenpairs(&t, Spectrum::Z, 100_000).unwrap();
        let lambdas: Vec<f64> = pairs.iter().map(|p| p.lambda).collect();
        assert_relative_eq!(lambdas[0], 0.75, epsilon = 1e-10);
        assert!(lambdas.iter().any(|&l| (l - 1.0).abs() <= 1e-10));
        assert!(lambdas.iter().any(|&l| (l - 3.0).abs() <= 1e-10));
    }

    #[test]
    fn circle_finds_the_qi_alpha10_z_spectrum() {
        let t = qi_example_tensor(10.0);
        let pairs = circle_eigenpairs(&t, Spectrum::Z, 100_000).unwrap();
        let lambdas: Vec<f64> = pairs.iter().map(|p| p.lambda).collect();
        assert!(lambdas.iter().any(|&l| (l - 1.0).abs() <= 1e-10), "missing 1.0: {lambdas:?}");
        assert!(lambdas.iter().any(|&l| (l - 3.0).abs() <= 1e-10), "missing 3.0: {lambdas:?}");
        assert_relative_eq!(lambdas[0], 1.0, epsilon = 1e-10);
        // interior maximum 897/56 from the closed-form quartic in cos^2(theta)
        let top = 897.0 / 56.0;
        assert!(lambdas.iter().any(|&l| (l - top).abs() <= 1e-9), "missing {top}: {lambdas:?}");
    }

    #[test]
    fn circle_h_spectrum_of_a_diagonal_tensor() {
        let mut t = DenseSymmetricTensor::zeros(4, 2).unwrap();
        t.set(&[0, 0, 0, 0], 3.0);
        t.set(&[1, 1, 1, 1], 1.0);
        let pairs = circle_eigenpairs(&t, Spectrum::H, 100_000).unwrap();
        let lambdas: Vec<f64> = pairs.iter().map(|p| p.lambda).collect();
        assert!(lambdas.iter().any(|&l| (l - 3.0).abs() <= 1e-10));
        assert!(lambdas.iter().any(|&l| (l - 1.0).abs() <= 1e-10));
    }

    #[test]
    fn every_returned_pair_is_a_numerical_eigenpair() {
        for alpha in [0.0, 10.0, 100.0] {
            let t = qi_example_tensor(alpha);
            let ctx = ObjectiveContext::new(
                TensorHandle::Dense(t.clone()),
                Spectrum::Z,
                Extreme::Min,
            )
            .unwrap();
            let pairs = circle_eigenpairs(&t, Spectrum::Z, 200_000).unwrap();
            assert!(!pairs.is_empty());
            for p in pairs {
                let res = ctx.residual(&p.vector, p.lambda).unwrap();
                assert!(res <= 1e-10, "alpha {alpha}: residual {res} at lambda {}", p.lambda);
            }
        }
    }

    #[test]
    fn constant_objective_reports_a_single_pair() {
        // the symmetrized identity product against the Z metric gives
        // f(x) = ||x||^4 / ||x||^4 = 1 everywhere on the circle
        let mut b = DenseSymmetricTensor::zeros(4, 2).unwrap();
        b.set(&[0, 0, 0, 0], 1.0);
        b.set(&[1, 1, 1, 1], 1.0);
        b.set_symmetric(&[0, 0, 1, 1], 1.0 / 3.0);
        let pairs = circle_eigenpairs(&b, Spectrum::Z, 10_000).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_relative_eq!(pairs[0].lambda, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn dimension_and_order_preconditions() {
        let t3 = DenseSymmetricTensor::zeros(4, 3).unwrap();
        assert!(circle_eigenpairs(&t3, Spectrum::Z, 1000).is_err());
        let todd = DenseSymmetricTensor::zeros(3, 2).unwrap();
        assert!(circle_eigenpairs(&todd, Spectrum::Z, 1000).is_err());
        let t = qi_example_tensor(0.0);
        let x = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        assert!(naive_contract(&t, &x, 0).is_err());
        assert!(naive_contract(&t, &x, 3).is_err());
    }
}
