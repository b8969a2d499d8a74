//! Bounded Levenberg-Marquardt least squares.
//!
//! The engine minimizes `1/2 sum (w_i (y_i - f_i(p)))^2` over the free
//! parameters. Bounds are enforced by reparametrization (logistic for
//! two-sided, exponential for one-sided bounds), so every model evaluation,
//! including finite-difference probes, happens inside the box. Each step
//! solves `(A + lambda I) dz = -g` with the Jacobian columns scaled to unit
//! norm; `lambda` starts at `1e-3 max diag(A)` and is divided by 3 on an
//! accepted step and multiplied by 3 on a rejected one.
//!
//! Runs are deterministic: identical problems and options give bit-identical
//! results.

mod bounds;
mod covariance;
mod jacobian;
pub mod models;
pub mod study;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use bounds::Bound;
pub use covariance::{covariance, Covariance};
pub use jacobian::{fd_step, jacobian_mismatch, numeric_jacobian};

use crate::{Error, Result};

/// A forward model `y = f(x; p)`.
///
/// Inputs are flattened with [`Model::input_dim`] values per point and
/// outputs with [`Model::outputs_per_point`] values per point.
pub trait Model {
    fn name(&self) -> &str;
    fn param_names(&self) -> Vec<String>;
    fn input_dim(&self) -> usize {
        1
    }
    fn outputs_per_point(&self) -> usize {
        1
    }
    fn predict(&self, x: &[f64], p: &[f64]) -> Vec<f64>;
    /// Analytic Jacobian (outputs x parameters), if the model has one.
    fn jacobian(&self, _x: &[f64], _p: &[f64]) -> Option<DMatrix<f64>> {
        None
    }
    fn default_bounds(&self) -> Vec<Bound> {
        vec![Bound::FREE; self.param_names().len()]
    }
}

pub struct FitProblem<'a> {
    pub model: &'a dyn Model,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Per-output standard errors; unweighted when `None`.
    pub sigma: Option<Vec<f64>>,
    pub init: Vec<f64>,
    pub bounds: Vec<Bound>,
    pub fixed: Vec<bool>,
}

impl<'a> FitProblem<'a> {
    pub fn new(model: &'a dyn Model, x: Vec<f64>, y: Vec<f64>, init: Vec<f64>) -> Self {
        let k = init.len();
        Self {
            bounds: model.default_bounds(),
            model,
            x,
            y,
            sigma: None,
            init,
            fixed: vec![false; k],
        }
    }

    pub fn with_sigma(mut self, sigma: Vec<f64>) -> Self {
        self.sigma = Some(sigma);
        self
    }

    pub fn with_bounds(mut self, bounds: Vec<Bound>) -> Self {
        self.bounds = bounds;
        self
    }

    pub fn with_bound(mut self, name: &str, bound: Bound) -> Result<Self> {
        let j = self.index_of(name)?;
        self.bounds[j] = bound;
        Ok(self)
    }

    /// Holds the named parameter at its initial value.
    pub fn fix(mut self, name: &str) -> Result<Self> {
        let j = self.index_of(name)?;
        self.fixed[j] = true;
        Ok(self)
    }

    fn index_of(&self, name: &str) -> Result<usize> {
        let names = self.model.param_names();
        names.iter().position(|n| n == name).ok_or_else(|| {
            Error::InvalidInput(format!(
                "model `{}` has no parameter `{name}` (parameters: {})",
                self.model.name(),
                names.join(", ")
            ))
        })
    }

    pub fn n_points(&self) -> usize {
        self.x.len() / self.model.input_dim().max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let names = self.model.param_names();
        let k = names.len();
        if self.init.len() != k || self.bounds.len() != k || self.fixed.len() != k {
            return Err(Error::InvalidInput(format!(
                "model `{}` has {k} parameters; got {} initial values, {} bounds, {} fixed flags",
                self.model.name(),
                self.init.len(),
                self.bounds.len(),
                self.fixed.len()
            )));
        }
        let dim = self.model.input_dim().max(1);
        if self.x.is_empty() || self.x.len() % dim != 0 {
            return Err(Error::InvalidInput(format!(
                "input length {} is not a positive multiple of {dim}",
                self.x.len()
            )));
        }
        let expected = self.n_points() * self.model.outputs_per_point();
        if self.y.len() != expected {
            return Err(Error::InvalidInput(format!(
                "expected {expected} observations for {} points, got {}",
                self.n_points(),
                self.y.len()
            )));
        }
        if let Some(s) = &self.sigma {
            if s.len() != self.y.len() {
                return Err(Error::InvalidInput(format!("{} sigmas for {} observations", s.len(), self.y.len())));
            }
            if let Some(i) = s.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(Error::InvalidInput(format!("sigma[{i}] = {} must be finite and > 0", s[i])));
            }
        }
        if let Some(i) = self.x.iter().chain(&self.y).position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("data contain a non-finite value at flat index {i}")));
        }
        for (j, (p, b)) in self.init.iter().zip(&self.bounds).enumerate() {
            if !p.is_finite() || !b.contains(*p) {
                return Err(Error::InvalidInput(format!(
                    "initial {} = {p} outside bounds [{}, {}]",
                    names[j], b.lo, b.hi
                )));
            }
        }
        let free = self.fixed.iter().filter(|f| !**f).count();
        if free == 0 {
            return Err(Error::InvalidInput("no free parameters".into()));
        }
        if self.y.len() <= free {
            return Err(Error::InsufficientData {
                points: self.y.len(),
                params: free,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Relative step tolerance.
    pub xtol: f64,
    /// Relative cost-decrease tolerance.
    pub ftol: f64,
    pub max_iter: usize,
    /// Factor applied to lambda on reject (and divided on accept).
    pub lambda_factor: f64,
    /// Initial lambda relative to the largest diagonal of the scaled `J^T J`.
    pub lambda_init: f64,
    /// Correlations above this magnitude produce a warning.
    pub correlation_warn: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            xtol: 1e-10,
            ftol: 1e-12,
            max_iter: 200,
            lambda_factor: 3.0,
            lambda_init: 1e-3,
            correlation_warn: 0.99,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    ZeroResidual,
    StepTolerance,
    CostTolerance,
    MaxIterations,
}

impl Termination {
    pub fn converged(self) -> bool {
        !matches!(self, Termination::MaxIterations)
    }

    pub fn describe(self) -> &'static str {
        match self {
            Termination::ZeroResidual => "residual is zero",
            Termination::StepTolerance => "relative step below tolerance",
            Termination::CostTolerance => "relative residual change below tolerance",
            Termination::MaxIterations => "iteration limit reached",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: String,
    pub param_names: Vec<String>,
    pub params: Vec<f64>,
    pub fixed: Vec<bool>,
    /// Zero for fixed parameters.
    pub sigmas: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub correlation: Vec<Vec<f64>>,
    /// `|W (y - f)|`.
    pub residual_norm: f64,
    /// Unweighted `y - f` per observation.
    pub residuals: Vec<f64>,
    pub reduced_chi2: f64,
    pub n_iter: usize,
    pub converged: bool,
    pub termination: Termination,
    /// Rank of the free-parameter Jacobian.
    pub rank: usize,
    pub degenerate_directions: Vec<Vec<f64>>,
    /// Cost `1/2 |r|^2` at the start and after every accepted step.
    pub cost_trace: Vec<f64>,
    pub warnings: Vec<String>,
}

impl FitResult {
    pub fn param(&self, name: &str) -> Option<(f64, f64)> {
        let j = self.param_names.iter().position(|n| n == name)?;
        Some((self.params[j], self.sigmas[j]))
    }
}

struct State<'p, 'a> {
    problem: &'p FitProblem<'a>,
    free: Vec<usize>,
    weights: Vec<f64>,
}

impl State<'_, '_> {
    fn external(&self, u: &DVector<f64>) -> Vec<f64> {
        let mut p = self.problem.init.clone();
        for (i, &j) in self.free.iter().enumerate() {
            p[j] = self.problem.bounds[j].to_external(u[i]);
        }
        p
    }

    fn residuals(&self, p: &[f64]) -> Result<DVector<f64>> {
        let f = jacobian::evaluate(self.problem.model, &self.problem.x, p)?;
        Ok(DVector::from_fn(f.len(), |i, _| self.weights[i] * (self.problem.y[i] - f[i])))
    }

    /// Weighted model Jacobian in external coordinates (free columns only).
    fn model_jacobian(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        let prob = self.problem;
        let full = match prob.model.jacobian(&prob.x, p) {
            Some(j) => j,
            None => numeric_jacobian(prob.model, &prob.x, p, Some(&prob.bounds))?,
        };
        if full.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                model: format!("{} (Jacobian)", prob.model.name()),
                params: format!("{p:?}"),
            });
        }
        Ok(DMatrix::from_fn(full.nrows(), self.free.len(), |i, c| self.weights[i] * full[(i, self.free[c])]))
    }
}

fn cost(r: &DVector<f64>) -> f64 {
    0.5 * r.norm_squared()
}

/// Runs Levenberg-Marquardt on `problem`.
pub fn fit(problem: &FitProblem, options: &FitOptions) -> Result<FitResult> {
    problem.validate()?;
    let k = problem.init.len();
    let free: Vec<usize> = (0..k).filter(|j| !problem.fixed[*j]).collect();
    let weights = match &problem.sigma {
        Some(s) => s.iter().map(|v| 1.0 / v).collect(),
        None => vec![1.0; problem.y.len()],
    };
    let state = State {
        problem,
        free: free.clone(),
        weights,
    };

    let mut u = DVector::from_fn(free.len(), |i, _| problem.bounds[free[i]].to_internal(problem.init[free[i]]));
    let mut p = state.external(&u);
    let mut r = state.residuals(&p)?;
    let mut c = cost(&r);
    let mut trace = vec![c];
    let mut lambda: Option<f64> = None;
    let mut scale = DVector::<f64>::zeros(free.len());
    let mut n_iter = 0;

    let termination = 'outer: loop {
        if c == 0.0 {
            break Termination::ZeroResidual;
        }
        if n_iter >= options.max_iter {
            break Termination::MaxIterations;
        }
        // residual Jacobian with respect to internal coordinates: -W J_p dp/du
        let jm = state.model_jacobian(&p)?;
        let mut ju = jm;
        for (i, &j) in free.iter().enumerate() {
            let d = -problem.bounds[j].derivative(u[i]);
            ju.column_mut(i).scale_mut(d);
        }
        for i in 0..free.len() {
            scale[i] = scale[i].max(ju.column(i).norm());
        }
        let d = scale.map(|s| if s > 0.0 { s } else { 1.0 });
        let mut js = ju;
        for i in 0..free.len() {
            js.column_mut(i).scale_mut(1.0 / d[i]);
        }
        let a = js.transpose() * &js;
        let g = js.transpose() * &r;
        let lam = lambda.get_or_insert_with(|| options.lambda_init * a.diagonal().max());

        loop {
            n_iter += 1;
            let damped = &a + DMatrix::<f64>::identity(free.len(), free.len()) * *lam;
            let z = match solve_damped(damped, &g, lam, options.lambda_factor) {
                Some(z) => -z,
                None => return Err(Error::Singular { lambda: *lam }),
            };
            let du = z.component_div(&d);
            let du_norm = z.norm();
            let u_norm = u.component_mul(&d).norm();
            let small_step = du_norm <= options.xtol * (u_norm + options.xtol);
            let trial_u = &u + &du;
            let trial_p = state.external(&trial_u);
            let trial_r = state.residuals(&trial_p)?;
            let trial_c = cost(&trial_r);
            if trial_c < c {
                let rel = (c - trial_c) / c;
                u = trial_u;
                p = trial_p;
                r = trial_r;
                c = trial_c;
                trace.push(c);
                *lam /= options.lambda_factor;
                if c == 0.0 {
                    break 'outer Termination::ZeroResidual;
                }
                if small_step {
                    break 'outer Termination::StepTolerance;
                }
                if rel <= options.ftol {
                    break 'outer Termination::CostTolerance;
                }
                continue 'outer;
            }
            *lam *= options.lambda_factor;
            if small_step {
                break 'outer Termination::StepTolerance;
            }
            if n_iter >= options.max_iter {
                break 'outer Termination::MaxIterations;
            }
        }
    };

    finish(&state, p, r, n_iter, termination, trace, options)
}

/// Cholesky solve, raising lambda a few times if the factorization fails.
fn solve_damped(mut m: DMatrix<f64>, g: &DVector<f64>, lambda: &mut f64, factor: f64) -> Option<DVector<f64>> {
    for _ in 0..20 {
        if let Some(ch) = m.clone().cholesky() {
            let z = ch.solve(g);
            if z.iter().all(|v| v.is_finite()) {
                return Some(z);
            }
        }
        let bump = (*lambda * (factor - 1.0)).max(f64::MIN_POSITIVE);
        *lambda += bump;
        for i in 0..m.nrows() {
            m[(i, i)] += bump;
        }
    }
    None
}

fn finish(
    state: &State,
    params: Vec<f64>,
    r: DVector<f64>,
    n_iter: usize,
    termination: Termination,
    cost_trace: Vec<f64>,
    options: &FitOptions,
) -> Result<FitResult> {
    let problem = state.problem;
    let names = problem.model.param_names();
    let k = names.len();
    let jm = state.model_jacobian(&params)?;
    let cov = covariance(&jm, r.as_slice())?;

    let mut full = vec![vec![0.0; k]; k];
    for (a, &i) in state.free.iter().enumerate() {
        for (b, &j) in state.free.iter().enumerate() {
            full[i][j] = cov.matrix[(a, b)];
        }
    }
    let sigmas: Vec<f64> = (0..k).map(|j| full[j][j].max(0.0).sqrt()).collect();
    let correlation: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| {
                    if i == j {
                        1.0
                    } else if sigmas[i] > 0.0 && sigmas[j] > 0.0 {
                        (full[i][j] / (sigmas[i] * sigmas[j])).clamp(-1.0, 1.0)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();

    let mut warnings = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            if correlation[i][j].abs() > options.correlation_warn {
                warnings.push(format!(
                    "parameters {} and {} are strongly correlated (rho = {:.4})",
                    names[i], names[j], correlation[i][j]
                ));
            }
        }
    }
    let mut degenerate = Vec::new();
    for dir in &cov.degenerate_directions {
        let mut v = vec![0.0; k];
        for (a, &j) in state.free.iter().enumerate() {
            v[j] = dir[a];
        }
        let combo = names
            .iter()
            .zip(&v)
            .filter(|(_, c)| c.abs() > 1e-6)
            .map(|(n, c)| format!("{c:+.3}*{n}"))
            .collect::<Vec<_>>()
            .join(" ");
        warnings.push(format!("rank-deficient direction not constrained by data: {combo}"));
        degenerate.push(v);
    }
    if !termination.converged() {
        warnings.push(format!("did not converge within {} iterations", options.max_iter));
    }
    for w in &warnings {
        log::warn!("{}: {w}", problem.model.name());
    }

    let residuals: Vec<f64> = r.iter().zip(&state.weights).map(|(ri, w)| ri / w).collect();
    Ok(FitResult {
        model: problem.model.name().to_string(),
        param_names: names,
        params,
        fixed: problem.fixed.clone(),
        sigmas,
        covariance: full,
        correlation,
        residual_norm: r.norm(),
        residuals,
        reduced_chi2: cov.sigma2,
        n_iter,
        converged: termination.converged(),
        termination,
        rank: cov.rank,
        degenerate_directions: degenerate,
        cost_trace,
        warnings,
    })
}
