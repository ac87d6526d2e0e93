//! Bounded nonlinear least squares and the fit recipes built on it.
//!
//! [`minimize`] is a damped Gauss–Newton (Levenberg–Marquardt) solver with
//! Marquardt diagonal scaling. Bounds are enforced through smooth internal
//! transforms; standard errors come from the external-parameter Jacobian at the
//! optimum.

mod recipes;

pub use recipes::*;
pub(crate) use recipes::{extinction_shape, linear_lstsq};

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// One named fit parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub fixed: bool,
}

impl Parameter {
    pub fn free(name: &str, value: f64) -> Self {
        Self {
            name: name.to_string(),
            value,
            lower: None,
            upper: None,
            fixed: false,
        }
    }

    pub fn at_least(name: &str, value: f64, lower: f64) -> Self {
        Self {
            lower: Some(lower),
            ..Self::free(name, value)
        }
    }

    pub fn bounded(name: &str, value: f64, lower: f64, upper: f64) -> Self {
        Self {
            lower: Some(lower),
            upper: Some(upper),
            ..Self::free(name, value)
        }
    }

    pub fn fixed(mut self, fixed: bool) -> Self {
        self.fixed = fixed;
        self
    }

    fn to_internal(&self, p: f64) -> f64 {
        match (self.lower, self.upper) {
            (None, None) => p,
            (Some(lo), None) => ((p - lo + 1.0).powi(2) - 1.0).max(0.0).sqrt(),
            (None, Some(hi)) => ((hi - p + 1.0).powi(2) - 1.0).max(0.0).sqrt(),
            (Some(lo), Some(hi)) => (2.0 * (p - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0).asin(),
        }
    }

    fn to_external(&self, x: f64) -> f64 {
        match (self.lower, self.upper) {
            (None, None) => x,
            (Some(lo), None) => lo - 1.0 + (x * x + 1.0).sqrt(),
            (None, Some(hi)) => hi + 1.0 - (x * x + 1.0).sqrt(),
            (Some(lo), Some(hi)) => lo + (hi - lo) * (x.sin() + 1.0) / 2.0,
        }
    }

    /// Starting value moved off an active bound, where the transforms are flat.
    fn start_value(&self) -> f64 {
        let mut v = self.value;
        let nudge = |b: f64| 1e-6 * b.abs().max(1.0);
        if let Some(lo) = self.lower {
            if v <= lo {
                v = lo + nudge(lo);
            }
        }
        if let Some(hi) = self.upper {
            if v >= hi {
                v = hi - nudge(hi);
            }
        }
        v
    }
}

type ResidualFn<'a> = dyn Fn(&[f64], &mut [f64]) + Sync + 'a;

/// A weighted least-squares problem.
///
/// The residual closure receives the full external parameter vector (fixed
/// parameters included, in declaration order) and writes `model − data` for
/// every data point. Weights are inverse variances.
pub struct FitProblem<'a> {
    params: Vec<Parameter>,
    n_residuals: usize,
    residual: Box<ResidualFn<'a>>,
    weights: Option<Vec<f64>>,
}

impl<'a> FitProblem<'a> {
    pub fn new(params: Vec<Parameter>, n_residuals: usize, residual: impl Fn(&[f64], &mut [f64]) + Sync + 'a) -> Self {
        Self {
            params,
            n_residuals,
            residual: Box::new(residual),
            weights: None,
        }
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Self {
        self.weights = Some(weights);
        self
    }

    pub fn params(&self) -> &[Parameter] {
        &self.params
    }

    fn validate(&self) -> Result<()> {
        let n_free = self.params.iter().filter(|p| !p.fixed).count();
        if self.n_residuals < n_free {
            return Err(Error::RankDeficient(format!(
                "{} residuals for {} free parameters",
                self.n_residuals, n_free
            )));
        }
        for p in &self.params {
            if !p.value.is_finite() {
                return Err(invalid("initial value", format!("`{}` is not finite", p.name)));
            }
            let lo = p.lower.unwrap_or(f64::NEG_INFINITY);
            let hi = p.upper.unwrap_or(f64::INFINITY);
            if !(lo <= p.value && p.value <= hi) || lo >= hi {
                return Err(invalid(
                    "bounds",
                    format!("`{}` requires lower <= init <= upper, got {lo} <= {} <= {hi}", p.name, p.value),
                ));
            }
        }
        if let Some(w) = &self.weights {
            if w.len() != self.n_residuals {
                return Err(invalid("weights", format!("expected {} weights, got {}", self.n_residuals, w.len())));
            }
            if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(invalid("weights", "must be finite and non-negative"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimizeOptions {
    pub max_iter: usize,
    /// Relative decrease of the weighted residual norm treated as converged.
    pub ftol: f64,
    /// Scaled gradient norm treated as converged.
    pub gtol: f64,
    /// Relative step size treated as converged.
    pub xtol: f64,
    /// Condition number of the scaled normal matrix above which the problem is rank deficient.
    pub max_condition: f64,
    /// Scale the covariance by the reduced chi-square.
    pub scale_covariance: bool,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            ftol: 1e-10,
            gtol: 1e-8,
            xtol: 1e-10,
            max_condition: 1e12,
            scale_covariance: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Converged,
    MaxIter,
    RankDeficient,
}

impl fmt::Display for FitStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FitStatus::Converged => "converged",
            FitStatus::MaxIter => "max_iter",
            FitStatus::RankDeficient => "rank_deficient",
        })
    }
}

/// Outcome of [`minimize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub names: Vec<String>,
    pub values: Vec<f64>,
    /// Zero for fixed parameters.
    pub std_errors: Vec<f64>,
    pub fixed: Vec<bool>,
    /// Covariance over the free parameters, in declaration order.
    #[serde(skip)]
    pub covariance: Vec<Vec<f64>>,
    /// Weighted sum of squared residuals.
    pub chi_square: f64,
    /// Square root of `chi_square`.
    pub residual_norm: f64,
    pub status: FitStatus,
    pub iterations: usize,
    pub n_data: usize,
    pub n_free: usize,
    pub condition: f64,
    /// Weighted residual norm after each accepted step, starting from the initial point.
    #[serde(skip)]
    pub norm_history: Vec<f64>,
}

impl FitResult {
    fn index(&self, name: &str) -> usize {
        self.names
            .iter()
            .position(|n| n == name)
            .unwrap_or_else(|| panic!("no parameter named `{name}`"))
    }

    /// Best-fit value of `name`. Panics on an unknown name.
    pub fn value(&self, name: &str) -> f64 {
        self.values[self.index(name)]
    }

    pub fn error(&self, name: &str) -> f64 {
        self.std_errors[self.index(name)]
    }

    pub fn converged(&self) -> bool {
        self.status == FitStatus::Converged
    }

    pub fn reduced_chi_square(&self) -> f64 {
        if self.n_data > self.n_free {
            self.chi_square / (self.n_data - self.n_free) as f64
        } else {
            f64::NAN
        }
    }

    /// Covariance between two free parameters.
    pub fn covariance_of(&self, a: &str, b: &str) -> f64 {
        let free: Vec<usize> = (0..self.names.len()).filter(|&i| !self.fixed[i]).collect();
        let ia = free.iter().position(|&i| i == self.index(a));
        let ib = free.iter().position(|&i| i == self.index(b));
        match (ia, ib) {
            (Some(i), Some(j)) => self.covariance[i][j],
            _ => 0.0,
        }
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Out<'a> {
            parameters: BTreeMap<&'a str, f64>,
            errors: BTreeMap<&'a str, f64>,
            fixed: Vec<&'a str>,
            status: FitStatus,
            iterations: usize,
            residual_norm: f64,
            chi_square: f64,
            n_data: usize,
            n_free: usize,
        }
        let out = Out {
            parameters: self.names.iter().map(String::as_str).zip(self.values.iter().copied()).collect(),
            errors: self.names.iter().map(String::as_str).zip(self.std_errors.iter().copied()).collect(),
            fixed: self
                .names
                .iter()
                .zip(&self.fixed)
                .filter(|(_, f)| **f)
                .map(|(n, _)| n.as_str())
                .collect(),
            status: self.status,
            iterations: self.iterations,
            residual_norm: finite_or_zero(self.residual_norm),
            chi_square: finite_or_zero(self.chi_square),
            n_data: self.n_data,
            n_free: self.n_free,
        };
        serde_json::to_string_pretty(&out).expect("fit result serializes")
    }

    /// Fixed-width text table of the parameters.
    pub fn table(&self) -> String {
        let mut s = format!("{:<16} {:>16} {:>14}\n", "parameter", "value", "std_error");
        for i in 0..self.names.len() {
            let err = if self.fixed[i] {
                "fixed".to_string()
            } else {
                format!("{:.6e}", self.std_errors[i])
            };
            s.push_str(&format!("{:<16} {:>16.8e} {:>14}\n", self.names[i], self.values[i], err));
        }
        s.push_str(&format!(
            "status={} iterations={} residual_norm={:.6e}\n",
            self.status, self.iterations, self.residual_norm
        ));
        s
    }
}

fn finite_or_zero(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        0.0
    }
}

struct Evaluator<'p, 'a> {
    problem: &'p FitProblem<'a>,
    free: Vec<usize>,
    sqrt_w: Vec<f64>,
    base: Vec<f64>,
}

impl Evaluator<'_, '_> {
    fn external(&self, x: &[f64]) -> Vec<f64> {
        let mut p = self.base.clone();
        for (k, &i) in self.free.iter().enumerate() {
            p[i] = self.problem.params[i].to_external(x[k]);
        }
        p
    }

    fn weighted(&self, p: &[f64], out: &mut [f64]) {
        (self.problem.residual)(p, out);
        for (r, w) in out.iter_mut().zip(&self.sqrt_w) {
            *r *= w;
        }
    }

    fn residual_internal(&self, x: &[f64], out: &mut [f64]) {
        let p = self.external(x);
        self.weighted(&p, out);
    }

    /// Central-difference Jacobian of the weighted residuals.
    fn jacobian(&self, x: &[f64], ext: bool) -> DMatrix<f64> {
        let m = self.problem.n_residuals;
        let n = self.free.len();
        let mut jac = DMatrix::zeros(m, n);
        let mut plus = vec![0.0; m];
        let mut minus = vec![0.0; m];
        for k in 0..n {
            let h = 6e-6 * x[k].abs().max(1.0);
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[k] += h;
            xm[k] -= h;
            if ext {
                let mut pp = self.base.clone();
                let mut pm = self.base.clone();
                for (kk, &i) in self.free.iter().enumerate() {
                    pp[i] = xp[kk];
                    pm[i] = xm[kk];
                }
                self.weighted(&pp, &mut plus);
                self.weighted(&pm, &mut minus);
            } else {
                self.residual_internal(&xp, &mut plus);
                self.residual_internal(&xm, &mut minus);
            }
            let inv = 1.0 / (xp[k] - xm[k]);
            for i in 0..m {
                jac[(i, k)] = (plus[i] - minus[i]) * inv;
            }
        }
        jac
    }
}

fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Minimizes the weighted sum of squared residuals of `problem`.
///
/// Returns `Err` only for an ill-posed problem (inconsistent bounds, too few
/// residuals, non-finite initial residual). Non-convergence and rank
/// deficiency are reported through [`FitResult::status`].
pub fn minimize(problem: &FitProblem<'_>, opts: &MinimizeOptions) -> Result<FitResult> {
    problem.validate()?;
    let m = problem.n_residuals;
    let free: Vec<usize> = (0..problem.params.len()).filter(|&i| !problem.params[i].fixed).collect();
    let n = free.len();
    let sqrt_w = match &problem.weights {
        Some(w) => w.iter().map(|v| v.sqrt()).collect(),
        None => vec![1.0; m],
    };
    let base: Vec<f64> = problem.params.iter().map(|p| p.value).collect();
    let ev = Evaluator {
        problem,
        free: free.clone(),
        sqrt_w,
        base,
    };

    let mut x: Vec<f64> = free
        .iter()
        .map(|&i| {
            let p = &problem.params[i];
            p.to_internal(p.start_value())
        })
        .collect();
    let mut r = vec![0.0; m];
    ev.residual_internal(&x, &mut r);
    if r.iter().any(|v| !v.is_finite()) {
        return Err(invalid("initial residual", "is not finite"));
    }
    let mut cost = norm_sq(&r);
    let mut history = vec![cost.sqrt()];
    let mut lambda = 0.0_f64;
    let mut nu = 2.0;
    let mut iterations = 0;
    let mut status = FitStatus::MaxIter;
    let mut trial = vec![0.0; m];

    if n == 0 || cost == 0.0 {
        status = FitStatus::Converged;
    }

    while status == FitStatus::MaxIter && iterations < opts.max_iter {
        iterations += 1;
        let jac = ev.jacobian(&x, false);
        let rv = DVector::from_column_slice(&r);
        let grad = jac.tr_mul(&rv);
        let jtj = jac.tr_mul(&jac);
        let diag: Vec<f64> = (0..n).map(|k| jtj[(k, k)]).collect();
        let rnorm = cost.sqrt();
        let scaled_grad = (0..n)
            .filter(|&k| diag[k] > 0.0)
            .map(|k| grad[k].abs() / (diag[k].sqrt() * rnorm))
            .fold(0.0, f64::max);
        if scaled_grad <= opts.gtol {
            status = FitStatus::Converged;
            break;
        }
        let dmax = diag.iter().copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let scale: Vec<f64> = diag.iter().map(|&d| d.max(1e-12 * dmax)).collect();

        // inner loop: raise damping until a step lowers the cost
        loop {
            let mut a = jtj.clone();
            for k in 0..n {
                a[(k, k)] += lambda * scale[k];
            }
            let step = a.cholesky().map(|c| c.solve(&(-&grad)));
            let Some(step) = step else {
                lambda = if lambda == 0.0 { 1e-3 } else { lambda * nu };
                nu *= 2.0;
                if lambda > 1e20 {
                    status = FitStatus::Converged;
                    break;
                }
                continue;
            };
            let x_new: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            ev.residual_internal(&x_new, &mut trial);
            let new_cost = norm_sq(&trial);
            let predicted = -(2.0 * grad.dot(&step) + step.dot(&(&jtj * &step)));
            if new_cost.is_finite() && new_cost < cost {
                let actual = cost - new_cost;
                let rho = if predicted > 0.0 { actual / predicted } else { 0.0 };
                let xnorm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                let small_step = step.norm() <= opts.xtol * (xnorm + opts.xtol);
                let small_decrease = actual <= opts.ftol * cost && predicted.abs() <= opts.ftol * cost;
                x = x_new;
                std::mem::swap(&mut r, &mut trial);
                cost = new_cost;
                history.push(cost.sqrt());
                if lambda > 0.0 {
                    lambda *= (1.0 - (2.0 * rho - 1.0).powi(3)).max(1.0 / 3.0);
                    if lambda < 1e-9 {
                        lambda = 0.0;
                    }
                }
                nu = 2.0;
                if small_step || small_decrease || cost == 0.0 {
                    status = FitStatus::Converged;
                }
                break;
            }
            lambda = if lambda == 0.0 { 1e-3 } else { lambda * nu };
            nu *= 2.0;
            if lambda > 1e20 {
                // no representable step lowers the cost
                status = FitStatus::Converged;
                break;
            }
        }
    }

    let p = ev.external(&x);
    let ext_free: Vec<f64> = free.iter().map(|&i| p[i]).collect();
    let ev_ext = Evaluator {
        problem,
        free: free.clone(),
        sqrt_w: ev.sqrt_w.clone(),
        base: p.clone(),
    };
    let (cov, condition) = if n > 0 {
        covariance(&ev_ext.jacobian(&ext_free, true))
    } else {
        (Vec::new(), 1.0)
    };
    if condition > opts.max_condition {
        status = FitStatus::RankDeficient;
    }
    let dof_scale = if opts.scale_covariance && m > n { cost / (m - n) as f64 } else { 1.0 };
    let mut std_errors = vec![0.0; p.len()];
    let cov: Vec<Vec<f64>> = cov
        .into_iter()
        .map(|row| row.into_iter().map(|v| v * dof_scale).collect())
        .collect();
    for (k, &i) in free.iter().enumerate() {
        std_errors[i] = cov[k][k].max(0.0).sqrt();
    }
    Ok(FitResult {
        names: problem.params.iter().map(|p| p.name.clone()).collect(),
        values: p,
        std_errors,
        fixed: problem.params.iter().map(|p| p.fixed).collect(),
        covariance: cov,
        chi_square: cost,
        residual_norm: cost.sqrt(),
        status,
        iterations,
        n_data: m,
        n_free: n,
        condition,
        norm_history: history,
    })
}

/// Pseudo-inverse of JᵀJ and the condition number of its diagonally scaled form.
fn covariance(jac: &DMatrix<f64>) -> (Vec<Vec<f64>>, f64) {
    let n = jac.ncols();
    let jtj = jac.tr_mul(jac);
    let d: Vec<f64> = (0..n).map(|k| jtj[(k, k)].sqrt()).collect();
    if d.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return (vec![vec![f64::INFINITY; n]; n], f64::INFINITY);
    }
    let scaled = DMatrix::from_fn(n, n, |i, j| jtj[(i, j)] / (d[i] * d[j]));
    let eig = SymmetricEigen::new(scaled.clone());
    let emax = eig.eigenvalues.iter().copied().fold(f64::MIN, f64::max);
    let emin = eig.eigenvalues.iter().copied().fold(f64::MAX, f64::min);
    let condition = if emin > 0.0 { emax / emin } else { f64::INFINITY };
    // pseudo-inverse through the eigendecomposition of the scaled matrix
    let cutoff = emax * 1e-14;
    let mut inv = DMatrix::zeros(n, n);
    for (k, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev > cutoff {
            let v = eig.eigenvectors.column(k);
            inv += (v * v.transpose()) / ev;
        }
    }
    let cov = (0..n)
        .map(|i| (0..n).map(|j| inv[(i, j)] / (d[i] * d[j])).collect())
        .collect();
    (cov, condition)
}
