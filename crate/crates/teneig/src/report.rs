//! Result types shared by the cubic-regularization solver and the power
//! baseline, serializable for the CLI's JSON reports.

use serde::Serialize;

use crate::metric::Spectrum;
use crate::objective::Extreme;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIter,
    Stalled,
}

/// Subproblem diagnostics attached to each accepted iteration.
#[derive(Debug, Clone, Serialize)]
pub struct SubproblemInfo {
    /// m(p) at the accepted trial step.
    pub model_value: f64,
    /// m(p_C) at the Cauchy point.
    pub cauchy_value: f64,
    pub cauchy_tau: f64,
    pub step_norm: f64,
    /// g^T p (non-positive by construction).
    pub gtp: f64,
    /// Secular multiplier of the reduced solve.
    pub lambda: f64,
    pub krylov_dim: usize,
    pub cauchy_fallback: bool,
    /// Power-iteration estimate of ||B_k||, recorded when tracing.
    pub b_norm_est: Option<f64>,
}

/// One accepted outer iteration.
#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub k: usize,
    /// Internal objective value f(x_k) before the step.
    pub f: f64,
    pub grad_norm: f64,
    /// sigma_k used for this iteration's subproblem.
    pub sigma: f64,
    /// Accepted step size alpha_k.
    pub alpha: f64,
    pub rho: f64,
    /// Number of rejected trial step sizes before acceptance.
    pub backtracks: usize,
    /// Deviation |(||x_{k+1}|| - 1)| after the Cayley step.
    pub x_norm_err: f64,
    /// Present for the cubic-regularization solver, absent for the power
    /// baseline (which reuses this record with `sigma` holding the shift).
    pub subproblem: Option<SubproblemInfo>,
}

/// Final outcome of a single solve.
#[derive(Debug, Clone, Serialize)]
pub struct EigenReport {
    pub spectrum: Spectrum,
    pub extreme: Extreme,
    /// Eigenvalue estimate in the true (un-negated) problem.
    pub lambda: f64,
    pub eigenvector: Vec<f64>,
    /// ||A x^{r-1} - lambda B x^{r-1}||_2.
    pub residual: f64,
    pub status: SolveStatus,
    /// Accepted outer iterations.
    pub iterations: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<IterationRecord>,
}
