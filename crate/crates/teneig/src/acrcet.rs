//! The outer solver loop: evaluate on the sphere, solve the cubic
//! subproblem, Cayley-transform curvilinear backtracking, ratio test and
//! adaptive weight update, plus the seeded multistart driver.

use nalgebra::DVector;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::cubic::{CubicModel, DEFAULT_MAX_KRYLOV};
use crate::error::{Result, TeneigError};
use crate::objective::{EvalBundle, ObjectiveContext};
use crate::report::{EigenReport, IterationRecord, SolveStatus, SubproblemInfo};

/// Tunables of the outer loop. Defaults follow the standard parameter set
/// eta1 = 0.1, eta2 = 0.5, gamma1 = 0.25, gamma2 = 1.2, gamma3 = 2.
#[derive(Debug, Clone, Serialize)]
pub struct SolverConfig {
    /// Acceptance threshold for the reduction ratio.
    pub eta1: f64,
    /// "Very successful" threshold.
    pub eta2: f64,
    /// Backtracking factor for the curvilinear search (0 < gamma1 < 1).
    pub gamma1: f64,
    /// Lower inflation factor for sigma (> 1).
    pub gamma2: f64,
    /// Upper inflation factor for sigma (>= gamma2).
    pub gamma3: f64,
    /// Initial cubic weight.
    pub sigma0: f64,
    /// Floor that keeps sigma positive after very successful iterations.
    pub sigma_min: f64,
    /// Relative gradient tolerance: converged when
    /// ||g_k|| <= grad_tol * max(1, |f_k|).
    pub grad_tol: f64,
    pub max_iter: usize,
    pub max_backtracks: usize,
    /// Krylov dimension cap for the subproblem; 0 means min(n, 50).
    pub max_krylov: usize,
    /// Base seed for multistart sampling and trace diagnostics.
    pub seed: u64,
    /// Record per-iteration diagnostics (costs a few extra operator
    /// applications per iteration).
    pub record_trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eta1: 0.1,
            eta2: 0.5,
            gamma1: 0.25,
            gamma2: 1.2,
            gamma3: 2.0,
            sigma0: 1.0,
            sigma_min: 1e-8,
            grad_tol: 1e-10,
            max_iter: 500,
            max_backtracks: 60,
            max_krylov: 0,
            seed: 0,
            record_trace: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.gamma3 >= self.gamma2
            && self.gamma2 > 1.0
            && 1.0 > self.gamma1
            && self.gamma1 > 0.0
            && 1.0 > self.eta2
            && self.eta2 >= self.eta1
            && self.eta1 > 0.0
            && self.sigma0 > 0.0
            && self.sigma_min > 0.0
            && self.grad_tol > 0.0;
        if ok {
            Ok(())
        } else {
            Err(TeneigError::InvalidArgument(
                "solver parameters must satisfy gamma3 >= gamma2 > 1 > gamma1 > 0, \
                 1 > eta2 >= eta1 > 0, sigma0 > 0"
                    .into(),
            ))
        }
    }
}

/// One step of the curvilinear search: the Cayley-transform point
///
/// ```text
/// x+(a) = ([(2 - a p^T x)^2 - a^2 ||p||^2] x + 4 a p)
///         / (4 + a^2 ||p||^2 - a^2 (p^T x)^2)
/// ```
///
/// which equals `Q(a) x` for the orthogonal Cayley matrix of the skew part
/// of `x p^T`, so it stays on the unit sphere up to roundoff.
pub fn cayley_step(x: &DVector<f64>, p: &DVector<f64>, alpha: f64) -> DVector<f64> {
    let ptx = p.dot(x);
    let pn2 = p.dot(p);
    let denom = 4.0 + alpha * alpha * pn2 - alpha * alpha * ptx * ptx;
    // Cauchy-Schwarz keeps the denominator at 4 or above for unit x
    debug_assert!(denom >= 4.0 - 1e-9);
    let cx = (2.0 - alpha * ptx).powi(2) - alpha * alpha * pn2;
    let mut out = (x * cx + p * (4.0 * alpha)) / denom;
    let norm = out.norm();
    if (norm - 1.0).abs() > 1e-14 {
        out /= norm;
    }
    out
}

/// Ratio of actual to predicted reduction. A degenerate predicted reduction
/// (<= 1e-16) returns negative infinity so the trial is rejected.
pub fn rho(f_x: f64, f_xplus: f64, m0: f64, m_alpha_p: f64) -> f64 {
    let predicted = m0 - m_alpha_p;
    if predicted <= 1e-16 {
        return f64::NEG_INFINITY;
    }
    (f_x - f_xplus) / predicted
}

/// Adaptive weight update:
/// full step and rho > eta2 -> halve (floored); full step and
/// eta1 <= rho <= eta2 -> keep; backtracked step -> inflate by gamma3.
pub fn update_sigma(sigma: f64, rho_k: f64, alpha: f64, cfg: &SolverConfig) -> f64 {
    if alpha == 1.0 {
        if rho_k > cfg.eta2 {
            (sigma / 2.0).max(cfg.sigma_min)
        } else {
            sigma
        }
    } else {
        cfg.gamma3 * sigma
    }
}

/// Power-iteration estimate of the operator norm of `B_k` (diagnostics only).
fn estimate_b_norm(bundle: &EvalBundle, seed: u64, steps: usize) -> f64 {
    let n = bundle.x.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut norm = 0.0;
    for _ in 0..steps {
        let vn = v.norm();
        if vn == 0.0 {
            return 0.0;
        }
        v /= vn;
        v = bundle.proj_hess_mul(&v);
        norm = v.norm();
    }
    norm
}

/// Runs the adaptive cubic-regularization loop from one start point.
pub fn run(ctx: &ObjectiveContext, x0: &DVector<f64>, cfg: &SolverConfig) -> Result<EigenReport> {
    cfg.validate()?;
    let n = ctx.dim();
    if x0.len() != n {
        return Err(TeneigError::DimensionMismatch { expected: n, got: x0.len() });
    }
    let x0_norm = x0.norm();
    if x0_norm == 0.0 || !x0_norm.is_finite() {
        return Err(TeneigError::InvalidArgument("start point must be nonzero".into()));
    }
    let mut x = x0 / x0_norm;
    let mut sigma = cfg.sigma0;
    let max_krylov = if cfg.max_krylov == 0 {
        n.min(DEFAULT_MAX_KRYLOV)
    } else {
        cfg.max_krylov
    };

    let mut trace: Vec<IterationRecord> = Vec::new();
    let mut status = SolveStatus::MaxIter;
    let mut iterations = 0usize;

    for k in 0..cfg.max_iter {
        let bundle = ctx.eval(&x, true)?;
        let gnorm = bundle.g.norm();
        if gnorm <= cfg.grad_tol * bundle.f.abs().max(1.0) {
            status = SolveStatus::Converged;
            break;
        }

        let b_op = |v: &DVector<f64>| bundle.proj_hess_mul(v);
        let model = CubicModel::new(bundle.f, &bundle.g, &b_op, sigma);
        let rel_tol = 0.1f64.min(gnorm.sqrt());
        let sol = model.solve(rel_tol, max_krylov)?;
        if sol.p.norm() <= 1e-16 {
            status = SolveStatus::Stalled;
            break;
        }

        // curvilinear backtracking: alpha = gamma1^j
        let m0 = bundle.f;
        let mut accepted: Option<(f64, DVector<f64>, f64, usize)> = None;
        for j in 0..=cfg.max_backtracks {
            let alpha = cfg.gamma1.powi(j as i32);
            let x_plus = cayley_step(&x, &sol.p, alpha);
            let f_plus = ctx.value(&x_plus)?;
            let m_alpha = model.value(&(&sol.p * alpha));
            let rho_k = rho(bundle.f, f_plus, m0, m_alpha);
            if rho_k >= cfg.eta1 {
                accepted = Some((alpha, x_plus, rho_k, j));
                break;
            }
        }
        let Some((alpha, x_plus, rho_k, backtracks)) = accepted else {
            status = SolveStatus::Stalled;
            break;
        };

        if cfg.record_trace {
            let b_norm_est =
                estimate_b_norm(&bundle, cfg.seed ^ (k as u64).wrapping_mul(0x9E3779B97F4A7C15), 5);
            trace.push(IterationRecord {
                k,
                f: bundle.f,
                grad_norm: gnorm,
                sigma,
                alpha,
                rho: rho_k,
                backtracks,
                x_norm_err: (x_plus.norm() - 1.0).abs(),
                subproblem: Some(SubproblemInfo {
                    model_value: sol.model_value,
                    cauchy_value: sol.cauchy.value,
                    cauchy_tau: sol.cauchy.tau,
                    step_norm: sol.p.norm(),
                    gtp: bundle.g.dot(&sol.p),
                    lambda: sol.lambda,
                    krylov_dim: sol.krylov_dim,
                    cauchy_fallback: sol.cauchy_fallback,
                    b_norm_est: Some(b_norm_est),
                }),
            });
        }

        x = x_plus;
        sigma = update_sigma(sigma, rho_k, alpha, cfg);
        iterations += 1;
    }

    finish_report(ctx, x, status, iterations, trace)
}

pub(crate) fn finish_report(
    ctx: &ObjectiveContext,
    x: DVector<f64>,
    status: SolveStatus,
    iterations: usize,
    trace: Vec<IterationRecord>,
) -> Result<EigenReport> {
    let f = ctx.value(&x)?;
    let lambda = ctx.true_lambda(f);
    let residual = ctx.residual(&x, lambda)?;
    Ok(EigenReport {
        spectrum: ctx.spectrum(),
        extreme: ctx.extreme(),
        lambda,
        eigenvector: x.iter().copied().collect(),
        residual,
        status,
        iterations,
        trace,
    })
}

/// Deterministic per-start seed derivation (SplitMix64 over the base seed
/// and start index).
pub fn start_seed(base: u64, index: usize) -> u64 {
    let mut z = base ^ (index as u64).wrapping_mul(0x9E3779B97F4A7C15);
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Uniform sample on the unit sphere: normalized standard Gaussian.
pub fn sample_sphere(n: usize, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let v = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = v.norm();
        if norm > 1e-12 {
            return v / norm;
        }
    }
}

/// One start's outcome inside a multistart run.
#[derive(Debug, Clone, Serialize)]
pub struct StartRecord {
    pub index: usize,
    pub seed: u64,
    pub lambda: f64,
    pub residual: f64,
    pub status: SolveStatus,
    pub iterations: usize,
    /// Wall-clock seconds for this start.
    pub seconds: f64,
    #[serde(skip)]
    pub report: EigenReport,
}

/// Aggregated multistart outcome.
#[derive(Debug, Clone)]
pub struct MultistartOutcome {
    pub starts: Vec<StartRecord>,
    /// Index of the best converged start, if any converged.
    pub best_converged: Option<usize>,
    /// Index of the best start regardless of status.
    pub best_any: usize,
}

impl MultistartOutcome {
    pub fn best(&self) -> &StartRecord {
        &self.starts[self.best_converged.unwrap_or(self.best_any)]
    }
}

/// Runs `n_starts` independent seeded solves and selects the best eigenvalue
/// (min or max per the context) among converged runs, ties broken by smaller
/// residual. Runs execute in parallel on the current rayon pool; results are
/// deterministic for a fixed base seed at any thread count.
pub fn run_multistart<F>(
    ctx: &ObjectiveContext,
    n_starts: usize,
    base_seed: u64,
    solve: F,
) -> Result<MultistartOutcome>
where
    F: Fn(&DVector<f64>, u64) -> Result<EigenReport> + Sync,
{
    if n_starts == 0 {
        return Err(TeneigError::InvalidArgument("need at least one start".into()));
    }
    let n = ctx.dim();
    let results: Vec<Result<StartRecord>> = (0..n_starts)
        .into_par_iter()
        .map(|i| {
            let seed = start_seed(base_seed, i);
            let x0 = sample_sphere(n, seed);
            let t0 = std::time::Instant::now();
            let report = solve(&x0, seed)?;
            let seconds = t0.elapsed().as_secs_f64();
            Ok(StartRecord {
                index: i,
                seed,
                lambda: report.lambda,
                residual: report.residual,
                status: report.status,
                iterations: report.iterations,
                seconds,
                report,
            })
        })
        .collect();
    let mut starts = Vec::with_capacity(n_starts);
    for r in results {
        starts.push(r?);
    }

    // minimization selects the smallest true lambda, maximization the largest
    let better = |a: &StartRecord, b: &StartRecord| -> bool {
        let key_a = ctx.extreme().sign() * a.lambda;
        let key_b = ctx.extreme().sign() * b.lambda;
        key_a < key_b || (key_a == key_b && a.residual < b.residual)
    };
    let mut best_converged: Option<usize> = None;
    let mut best_any = 0usize;
    for (i, s) in starts.iter().enumerate() {
        if better(s, &starts[best_any]) {
            best_any = i;
        }
        if s.status == SolveStatus::Converged {
            match best_converged {
                None => best_converged = Some(i),
                Some(j) if better(s, &starts[j]) => best_converged = Some(i),
                _ => {}
            }
        }
    }
    Ok(MultistartOutcome { starts, best_converged, best_any })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::Spectrum;
    use crate::objective::{Extreme, TensorHandle};
    use crate::tensor::qi_example_tensor;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn qi_ctx(alpha: f64, extreme: Extreme) -> ObjectiveContext {
        ObjectiveContext::new(TensorHandle::Dense(qi_example_tensor(alpha)), Spectrum::Z, extreme)
            .unwrap()
    }

    #[test]
    fn cayley_fixes_x_when_p_is_x() {
        let x = DVector::from_vec(vec![0.6, 0.8]);
        for &alpha in &[0.1, 1.0, 3.0] {
            let out = cayley_step(&x, &x, alpha);
            assert_relative_eq!(out[0], x[0], max_relative = 1e-14);
            assert_relative_eq!(out[1], x[1], max_relative = 1e-14);
        }
    }

    #[test]
    fn cayley_quarter_turn() {
        let x = DVector::from_vec(vec![1.0, 0.0]);
        let p = DVector::from_vec(vec![0.0, 1.0]);
        let out = cayley_step(&x, &p, 2.0);
        assert_relative_eq!(out[0], 0.0, epsilon = 1e-15);
        assert_relative_eq!(out[1], 1.0, max_relative = 1e-15);
    }

    /// Explicit Cayley-matrix reference: solve (I + W) y = (I - W) x for the
    /// skew matrix W = alpha/2 (x p^T - p x^T).
    fn cayley_reference(x: &DVector<f64>, p: &DVector<f64>, alpha: f64) -> DVector<f64> {
        let n = x.len();
        let w = (x * p.transpose() - p * x.transpose()) * (alpha / 2.0);
        let lhs = DMatrix::identity(n, n) + &w;
        let rhs = (DMatrix::identity(n, n) - &w) * x;
        lhs.lu().solve(&rhs).expect("I + W is invertible for skew W")
    }

    #[test]
    fn cayley_matches_matrix_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(71);
        for _ in 0..50 {
            let n = rng.random_range(2..8);
            let x = sample_sphere(n, rng.random());
            let p = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
            let alpha = rng.random_range(0.01..2.0);
            let fast = cayley_step(&x, &p, alpha);
            let slow = cayley_reference(&x, &p, alpha);
            assert!((fast.clone() - &slow).norm() <= 1e-12, "cayley mismatch");
            assert!((fast.norm() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn rho_basic_cases() {
        assert_relative_eq!(rho(1.0, 0.9, 1.0, 0.9), 1.0);
        assert_relative_eq!(rho(1.0, 0.95, 1.0, 0.9), 0.5, max_relative = 1e-12);
        assert_eq!(rho(1.0, 0.5, 1.0, 1.0 + 1e-20), f64::NEG_INFINITY);
        assert_eq!(rho(1.0, 0.5, 1.0, 2.0), f64::NEG_INFINITY);
    }

    #[test]
    fn sigma_update_rules() {
        let cfg = SolverConfig::default();
        assert_relative_eq!(update_sigma(1.0, 0.7, 1.0, &cfg), 0.5);
        assert_relative_eq!(update_sigma(1.0, 0.3, 1.0, &cfg), 1.0);
        assert_relative_eq!(update_sigma(1.0, 0.7, 0.25, &cfg), 2.0);
        // floor applies on the very-successful branch
        assert_relative_eq!(update_sigma(1.5e-8, 0.9, 1.0, &cfg), 1e-8);
    }

    #[test]
    fn config_validation() {
        let mut cfg = SolverConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.gamma1 = 1.5;
        assert!(cfg.validate().is_err());
        cfg = SolverConfig { eta1: 0.6, eta2: 0.5, ..SolverConfig::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn starting_at_the_eigenvector_converges_immediately() {
        let ctx = qi_ctx(0.0, Extreme::Min);
        let x0 = DVector::from_vec(vec![0.5, 3f64.sqrt() / 2.0]);
        let report = run(&ctx, &x0, &SolverConfig::default()).unwrap();
        assert_eq!(report.status, SolveStatus::Converged);
        assert!(report.iterations <= 1);
        assert_relative_eq!(report.lambda, 0.75, max_relative = 1e-10);
    }

    #[test]
    fn multistart_finds_the_global_z_minimum() {
        let ctx = qi_ctx(0.0, Extreme::Min);
        let cfg = SolverConfig::default();
        let outcome = run_multistart(&ctx, 100, 7, |x0, _seed| run(&ctx, x0, &cfg)).unwrap();
        let best = outcome.best();
        assert_eq!(best.status, SolveStatus::Converged);
        assert_relative_eq!(best.lambda, 0.75, epsilon = 1e-6);
        assert!(best.residual <= 1e-8);
    }

    #[test]
    fn multistart_is_deterministic_for_a_fixed_seed() {
        let ctx = qi_ctx(10.0, Extreme::Min);
        let cfg = SolverConfig::default();
        let a = run_multistart(&ctx, 20, 3, |x0, _| run(&ctx, x0, &cfg)).unwrap();
        let b = run_multistart(&ctx, 20, 3, |x0, _| run(&ctx, x0, &cfg)).unwrap();
        for (s, t) in a.starts.iter().zip(&b.starts) {
            assert_eq!(s.lambda.to_bits(), t.lambda.to_bits());
            assert_eq!(s.iterations, t.iterations);
        }
    }

    #[test]
    fn h_max_of_signless_laplacian_of_a_2_regular_graph() {
        use crate::hypergraph::{HypergraphTensor, TensorKind, UniformHypergraph};
        let g = UniformHypergraph::new(
            6,
            4,
            vec![vec![1, 2, 3, 4], vec![3, 4, 5, 6], vec![5, 6, 1, 2]],
        )
        .unwrap();
        let t = HypergraphTensor::new(g, TensorKind::SignlessLaplacian);
        let ctx = ObjectiveContext::new(
            TensorHandle::Hypergraph(t),
            Spectrum::H,
            Extreme::Max,
        )
        .unwrap();
        let cfg = SolverConfig::default();
        let outcome = run_multistart(&ctx, 40, 11, |x0, _| run(&ctx, x0, &cfg)).unwrap();
        assert_relative_eq!(outcome.best().lambda, 4.0, epsilon = 1e-6);
    }

    #[test]
    fn trace_invariants_replay() {
        let ctx = qi_ctx(10.0, Extreme::Min);
        let cfg = SolverConfig { record_trace: true, seed: 5, ..SolverConfig::default() };
        let x0 = sample_sphere(2, 99);
        let report = run(&ctx, &x0, &cfg).unwrap();
        assert_eq!(report.status, SolveStatus::Converged);
        let tr = &report.trace;
        assert!(!tr.is_empty());
        let mut sigma = cfg.sigma0;
        for (i, rec) in tr.iter().enumerate() {
            assert!(rec.x_norm_err <= 1e-12, "iterate left the sphere");
            assert!(rec.rho >= cfg.eta1);
            assert_relative_eq!(rec.sigma, sigma, max_relative = 1e-15);
            sigma = update_sigma(sigma, rec.rho, rec.alpha, &cfg);
            if i + 1 < tr.len() {
                assert!(tr[i + 1].f < rec.f, "objective must strictly decrease");
            }
            let sub = rec.subproblem.as_ref().unwrap();
            assert!(sub.model_value <= sub.cauchy_value);
            assert!(sub.gtp <= 0.0);
        }
    }
}
