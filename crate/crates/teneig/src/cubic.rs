//! The cubic regularization subproblem: build and approximately minimize
//!
//! ```text
//! m(p) = f + g^T p + 1/2 p^T B p + sigma/3 ||p||^3
//! ```
//!
//! The trial step only has to do at least as well as the Cauchy point.
//! A Lanczos reduction from `g` shrinks the problem to a small tridiagonal
//! one whose global minimizer solves the secular system
//! `(T + lambda I) u = -gamma e1` with `lambda = sigma ||u||` and
//! `T + lambda I` positive semidefinite; Newton on a monotone reformulation
//! finds `lambda`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Result, TeneigError};

/// Default Krylov dimension cap when the caller does not set one.
pub const DEFAULT_MAX_KRYLOV: usize = 50;

/// The local cubic model around the current iterate.
pub struct CubicModel<'a> {
    /// Objective value at the expansion point (`m(0)`).
    pub f: f64,
    /// Gradient at the expansion point.
    pub g: &'a DVector<f64>,
    /// Symmetric operator `v -> B v` (tangent-projected Hessian in the solver).
    pub b_op: &'a (dyn Fn(&DVector<f64>) -> DVector<f64> + 'a),
    /// Cubic weight, strictly positive.
    pub sigma: f64,
}

/// Minimizer of the model along the steepest descent ray.
#[derive(Debug, Clone)]
pub struct CauchyPoint {
    pub tau: f64,
    pub p: DVector<f64>,
    pub value: f64,
}

/// Result of the inexact subproblem solve.
#[derive(Debug, Clone)]
pub struct SubproblemSolution {
    /// Trial step.
    pub p: DVector<f64>,
    /// `m(p)`.
    pub model_value: f64,
    pub cauchy: CauchyPoint,
    /// Secular multiplier of the reduced solve (`sigma * ||u||`).
    pub lambda: f64,
    /// Krylov dimension actually used (0 when the Cauchy fallback fired).
    pub krylov_dim: usize,
    /// Set when the Lanczos/Newton path failed and the Cauchy point was
    /// returned instead.
    pub cauchy_fallback: bool,
}

impl<'a> CubicModel<'a> {
    pub fn new(
        f: f64,
        g: &'a DVector<f64>,
        b_op: &'a (dyn Fn(&DVector<f64>) -> DVector<f64> + 'a),
        sigma: f64,
    ) -> Self {
        assert!(sigma > 0.0, "cubic weight must be positive");
        Self { f, g, b_op, sigma }
    }

    /// Exact model value `m(p)`.
    pub fn value(&self, p: &DVector<f64>) -> f64 {
        let bp = (self.b_op)(p);
        self.f + self.g.dot(p) + 0.5 * p.dot(&bp) + self.sigma / 3.0 * p.norm().powi(3)
    }

    /// Model gradient `g + B p + sigma ||p|| p`.
    pub fn gradient(&self, p: &DVector<f64>) -> DVector<f64> {
        let bp = (self.b_op)(p);
        self.g + bp + p * (self.sigma * p.norm())
    }

    /// The Cauchy point `p = -tau g`: `tau` is the unique positive root of
    /// `sigma ||g||^3 t^2 + (g^T B g) t - ||g||^2 = 0`.
    pub fn cauchy_point(&self) -> Result<CauchyPoint> {
        let gnorm = self.g.norm();
        if gnorm == 0.0 {
            return Err(TeneigError::EvalFailed(
                "cauchy point undefined at a stationary point".into(),
            ));
        }
        let bg = (self.b_op)(self.g);
        let gbg = self.g.dot(&bg);
        let a = self.sigma * gnorm.powi(3);
        let c = gnorm * gnorm;
        // root via the cancellation-free form: both a and c are positive
        let disc = (gbg * gbg + 4.0 * a * c).sqrt();
        let tau = 2.0 * c / (gbg + disc);
        let p = self.g * (-tau);
        let value = self.value(&p);
        Ok(CauchyPoint { tau, p, value })
    }

    /// Inexact global minimization: grow a Lanczos space from `g` until the
    /// model gradient norm drops below `rel_tol * ||g||`, the space becomes
    /// invariant, or `max_krylov` is reached. Falls back to the Cauchy point
    /// if the Newton solve stalls or the reduced step fails the
    /// `m(p) <= m(p_C)` contract.
    pub fn solve(&self, rel_tol: f64, max_krylov: usize) -> Result<SubproblemSolution> {
        let n = self.g.len();
        let gamma = self.g.norm();
        if gamma == 0.0 {
            return Err(TeneigError::EvalFailed(
                "subproblem called at a stationary point".into(),
            ));
        }
        let cauchy = self.cauchy_point()?;
        let maxk = max_krylov.clamp(1, n);
        let target = rel_tol.max(0.0) * gamma;

        match self.lanczos_solve(gamma, maxk, target) {
            Some((p, lambda, dim)) => {
                let model_value = self.value(&p);
                // acceptance contract: never worse than the Cauchy point and
                // never an ascent direction
                if model_value <= cauchy.value && self.g.dot(&p) <= 0.0 {
                    Ok(SubproblemSolution {
                        p,
                        model_value,
                        cauchy,
                        lambda,
                        krylov_dim: dim,
                        cauchy_fallback: false,
                    })
                } else {
                    Ok(Self::fallback(cauchy, self.sigma))
                }
            }
            None => Ok(Self::fallback(cauchy, self.sigma)),
        }
    }

    fn fallback(cauchy: CauchyPoint, sigma: f64) -> SubproblemSolution {
        let lambda = sigma * cauchy.p.norm();
        SubproblemSolution {
            p: cauchy.p.clone(),
            model_value: cauchy.value,
            lambda,
            krylov_dim: 0,
            cauchy_fallback: true,
            cauchy,
        }
    }

    /// Lanczos loop with full reorthogonalization. Returns the mapped-back
    /// step, the secular multiplier and the Krylov dimension, or `None` when
    /// the reduced Newton solve failed.
    fn lanczos_solve(
        &self,
        gamma: f64,
        maxk: usize,
        target: f64,
    ) -> Option<(DVector<f64>, f64, usize)> {
        let mut qs: Vec<DVector<f64>> = vec![self.g / gamma];
        let mut alphas: Vec<f64> = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        let mut op_scale = 0.0f64;

        loop {
            let j = alphas.len();
            let q = &qs[j];
            let mut w = (self.b_op)(q);
            op_scale = op_scale.max(w.norm());
            if j > 0 {
                w -= &qs[j - 1] * betas[j - 1];
            }
            let alpha = q.dot(&w);
            w -= q * alpha;
            for _ in 0..2 {
                for qq in &qs {
                    let c = qq.dot(&w);
                    if c != 0.0 {
                        w -= qq * c;
                    }
                }
            }
            alphas.push(alpha);
            let beta = w.norm();
            let breakdown = beta <= (1e-11 * op_scale).max(1e-300);

            let t = tridiagonal(&alphas, &betas);
            let red = solve_reduced(&t, gamma, self.sigma)?;
            let dim = alphas.len();
            let res_est = beta * red.u[dim - 1].abs();
            let exhausted = breakdown || dim == maxk;

            if res_est <= target || exhausted {
                let p = map_back(&qs[..dim], &red.u);
                if exhausted {
                    return Some((p, red.lambda, dim));
                }
                // the estimate can be optimistic once orthogonality degrades;
                // one extra operator application confirms it
                let true_res = self.gradient(&p).norm();
                if true_res <= target * (1.0 + 1e-10) {
                    return Some((p, red.lambda, dim));
                }
            }

            betas.push(beta);
            qs.push(&w / beta);
        }
    }
}

fn tridiagonal(alphas: &[f64], betas: &[f64]) -> DMatrix<f64> {
    let k = alphas.len();
    let mut t = DMatrix::zeros(k, k);
    for (i, &a) in alphas.iter().enumerate() {
        t[(i, i)] = a;
    }
    for (i, &b) in betas.iter().enumerate() {
        t[(i, i + 1)] = b;
        t[(i + 1, i)] = b;
    }
    t
}

fn map_back(qs: &[DVector<f64>], u: &DVector<f64>) -> DVector<f64> {
    let mut p = DVector::zeros(qs[0].len());
    for (q, &c) in qs.iter().zip(u.iter()) {
        p += q * c;
    }
    p
}

/// Global minimizer of the reduced cubic `gamma u_1 + 1/2 u^T T u +
/// sigma/3 ||u||^3` for a small symmetric `T`.
#[derive(Debug, Clone)]
pub(crate) struct ReducedSolution {
    pub u: DVector<f64>,
    pub lambda: f64,
    #[allow(dead_code)]
    pub hard_case: bool,
}

/// Solves the secular system `(T + lambda I) u = -gamma e1`,
/// `lambda = sigma ||u||`, `T + lambda I >= 0` by safeguarded Newton on the
/// monotone reformulation `h(lambda) = 1/||u(lambda)|| - sigma/lambda`.
/// Returns `None` if Newton fails to converge in 100 iterations.
pub(crate) fn solve_reduced(t: &DMatrix<f64>, gamma: f64, sigma: f64) -> Option<ReducedSolution> {
    let k = t.nrows();
    let eig = SymmetricEigen::new(t.clone());
    let d = &eig.eigenvalues;
    let v = &eig.eigenvectors;
    // weight of e1 on each eigenvector
    let c: Vec<f64> = (0..k).map(|i| gamma * v[(0, i)]).collect();
    let d_min = d.iter().cloned().fold(f64::INFINITY, f64::min);
    let d_scale = d.iter().fold(0.0f64, |a, &b| a.max(b.abs())).max(1.0);
    let lam_bar = (-d_min).max(0.0);

    // squared norm of u(lambda) and its derivative; terms sitting exactly on
    // a pole with zero weight are dropped
    let cluster_tol = 1e-12 * d_scale;
    let norm2 = |lam: f64| -> f64 {
        (0..k)
            .map(|i| {
                let den = d[i] + lam;
                if den.abs() <= cluster_tol && c[i].abs() <= 1e-13 * gamma {
                    0.0
                } else {
                    (c[i] / den).powi(2)
                }
            })
            .sum()
    };
    let dnorm2 = |lam: f64| -> f64 {
        (0..k)
            .map(|i| {
                let den = d[i] + lam;
                if den.abs() <= cluster_tol && c[i].abs() <= 1e-13 * gamma {
                    0.0
                } else {
                    -2.0 * c[i] * c[i] / den.powi(3)
                }
            })
            .sum()
    };

    // hard case: the minimum eigenvalue is negative, e1 has no weight on its
    // eigenspace, and the interior branch undershoots the required norm
    if d_min < 0.0 {
        let pole_weight: f64 = (0..k)
            .filter(|&i| d[i] <= d_min + cluster_tol)
            .map(|i| c[i] * c[i])
            .sum();
        if pole_weight.sqrt() <= 1e-13 * gamma {
            let n_perp = norm2(lam_bar).sqrt();
            if n_perp < lam_bar / sigma {
                let mut u_eig = DVector::zeros(k);
                for i in 0..k {
                    if d[i] > d_min + cluster_tol {
                        u_eig[i] = -c[i] / (d[i] + lam_bar);
                    }
                }
                let z = ((lam_bar / sigma).powi(2) - n_perp * n_perp).max(0.0).sqrt();
                let j_min = (0..k)
                    .min_by(|&a, &b| d[a].partial_cmp(&d[b]).unwrap())
                    .expect("nonempty spectrum");
                u_eig[j_min] += z;
                let u = v * u_eig;
                return Some(ReducedSolution { u, lambda: lam_bar, hard_case: true });
            }
        }
    }

    // regular case: unique root of h in (lam_bar, inf)
    let mut hi = 0.5 * (-d_min + (d_min * d_min + 4.0 * sigma * gamma).sqrt());
    let h = |lam: f64| -> f64 {
        let n = norm2(lam).sqrt();
        if n == 0.0 {
            f64::INFINITY
        } else {
            1.0 / n - sigma / lam
        }
    };
    for _ in 0..60 {
        if h(hi) >= 0.0 {
            break;
        }
        hi *= 2.0;
    }
    let mut lo = lam_bar;
    let mut lam = (sigma * gamma.sqrt()).clamp(
        lo + 1e-3 * (hi - lo).max(1e-300),
        hi,
    );
    for _ in 0..100 {
        let n2 = norm2(lam);
        let n = n2.sqrt();
        if n == 0.0 {
            lam = 0.5 * (lo + hi);
            continue;
        }
        let hval = 1.0 / n - sigma / lam;
        // converged when lambda = sigma * ||u|| to near machine precision
        if (sigma * n - lam).abs() <= 1e-12 * lam.max(sigma * n).max(1e-300) {
            let u_eig = DVector::from_fn(k, |i, _| -c[i] / (d[i] + lam));
            let u = v * u_eig;
            return Some(ReducedSolution { u, lambda: lam, hard_case: false });
        }
        if hval < 0.0 {
            lo = lo.max(lam);
        } else {
            hi = hi.min(lam);
        }
        let nprime = dnorm2(lam) / (2.0 * n);
        let hprime = -nprime / n2 + sigma / (lam * lam);
        let newton = lam - hval / hprime;
        lam = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    None
}
