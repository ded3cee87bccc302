//! Sparse relaxed regularized logistic fitting.
//!
//! Minimizes
//!
//! ```text
//! L(beta, w) = sum_i log(1 + exp(-y_i (z_i . beta + b0))) + lambda ||w||_1 + kappa/2 ||beta - w||^2
//! ```
//!
//! The minimizing `w` for a given `beta` is the soft threshold of `beta` at
//! `lambda / kappa`. [`Scheme::Alternating`] alternates a descent step in
//! `(beta, b0)` with that exact `w` update. [`Scheme::Reduced`] substitutes
//! the optimal `w` back in, which leaves a convex function of `(beta, b0)`
//! alone (the logistic loss plus a Huber penalty per coefficient), and runs
//! semismooth Newton on it. Both reach the same minimizer; the second needs
//! far fewer iterations. The intercept `b0` sits in the loss only.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    /// Sparsity weight on `||w||_1`.
    pub lambda: f64,
    /// Coupling weight on `||beta - w||^2`.
    pub kappa: f64,
    /// Rules kept per class.
    pub r_max: usize,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            kappa: 1.0,
            r_max: 100,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::Config(format!("kappa must be > 0, got {}", self.kappa)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerSolver {
    /// Damped Newton steps with Armijo backtracking.
    Newton,
    /// Steepest descent with Armijo backtracking from `initial_step`.
    GradientDescent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Beta step then soft-threshold w step, repeated.
    Alternating,
    /// Newton on the objective with `w` eliminated; `w` is read off at the end.
    Reduced,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub scheme: Scheme,
    pub max_outer_iters: usize,
    pub outer_tol: f64,
    pub max_inner_iters: usize,
    pub inner_tol: f64,
    pub armijo_c: f64,
    pub backtrack_factor: f64,
    pub initial_step: f64,
    pub inner_solver: InnerSolver,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Reduced,
            max_outer_iters: 500,
            outer_tol: 1e-6,
            max_inner_iters: 100,
            inner_tol: 1e-8,
            armijo_c: 1e-4,
            backtrack_factor: 0.5,
            initial_step: 1.0,
            inner_solver: InnerSolver::Newton,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_outer_iters > 0
            && self.max_inner_iters > 0
            && self.outer_tol > 0.0
            && self.inner_tol > 0.0
            && self.armijo_c > 0.0
            && self.armijo_c < 1.0
            && self.backtrack_factor > 0.0
            && self.backtrack_factor < 1.0
            && self.initial_step > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid optimizer settings: {self:?}")))
        }
    }
}

/// Coupled coefficient vectors over the columns of `Z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseLinearModel {
    pub beta: Vec<f64>,
    pub intercept: f64,
    pub w: Vec<f64>,
    /// Columns with `w != 0`, ascending.
    pub support: Vec<usize>,
    /// Objective at initialization followed by one value per outer iteration.
    #[serde(skip)]
    pub objective_trace: Vec<f64>,
}

impl SparseLinearModel {
    pub fn n_columns(&self) -> usize {
        self.beta.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub outer_iterations: usize,
    pub converged: bool,
    pub final_objective: f64,
    pub nnz: usize,
}

/// Overflow-safe `1 / (1 + exp(-t))`.
#[inline]
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Overflow-safe `log(1 + exp(t))`.
#[inline]
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn check_dims(z: ArrayView2<f64>, y: &[f64], beta: &[f64]) -> Result<()> {
    if z.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: z.nrows(),
            got: y.len(),
        });
    }
    if z.ncols() != beta.len() {
        return Err(Error::DimensionMismatch {
            expected: z.ncols(),
            got: beta.len(),
        });
    }
    Ok(())
}

fn scores(z: ArrayView2<f64>, beta: &[f64], intercept: f64) -> Array1<f64> {
    z.dot(&ArrayView1::from(beta)) + intercept
}

/// `sum_i log(1 + exp(-y_i (z_i . beta + intercept)))`.
pub fn logistic_loss(z: ArrayView2<f64>, y: &[f64], beta: &[f64], intercept: f64) -> Result<f64> {
    check_dims(z, y, beta)?;
    let s = scores(z, beta, intercept);
    Ok(s.iter().zip(y).map(|(si, yi)| softplus(-yi * si)).sum())
}

/// Gradient of [`logistic_loss`] in `beta` and in the intercept.
pub fn logistic_gradient(
    z: ArrayView2<f64>,
    y: &[f64],
    beta: &[f64],
    intercept: f64,
) -> Result<(Vec<f64>, f64)> {
    check_dims(z, y, beta)?;
    let s = scores(z, beta, intercept);
    let r: Array1<f64> = s
        .iter()
        .zip(y)
        .map(|(si, yi)| -yi * sigmoid(-yi * si))
        .collect();
    Ok((z.t().dot(&r).to_vec(), r.sum()))
}

/// The full relaxed objective `L(beta, w)`.
pub fn objective(
    z: ArrayView2<f64>,
    y: &[f64],
    beta: &[f64],
    intercept: f64,
    w: &[f64],
    hp: &HyperParams,
) -> Result<f64> {
    if w.len() != beta.len() {
        return Err(Error::DimensionMismatch {
            expected: beta.len(),
            got: w.len(),
        });
    }
    let loss = logistic_loss(z, y, beta, intercept)?;
    Ok(loss + penalty(beta, w, hp))
}

fn penalty(beta: &[f64], w: &[f64], hp: &HyperParams) -> f64 {
    let l1: f64 = w.iter().map(|v| v.abs()).sum();
    let gap: f64 = beta.iter().zip(w).map(|(b, v)| (b - v) * (b - v)).sum();
    hp.lambda * l1 + 0.5 * hp.kappa * gap
}

/// `sign(beta_j) * max(|beta_j| - lambda/kappa, 0)` elementwise, with
/// `sign(0) = 0`.
pub fn soft_threshold(beta: &[f64], hp: &HyperParams) -> Vec<f64> {
    let t = hp.lambda / hp.kappa;
    beta.iter()
        .map(|&b| {
            let shrunk = (b.abs() - t).max(0.0);
            if b > 0.0 {
                shrunk
            } else if b < 0.0 {
                -shrunk
            } else {
                0.0
            }
        })
        .collect()
}

/// The beta-step subproblem on `[Z | 1]`, with the coupling applied to the
/// first `p` coordinates only.
struct Subproblem<'a> {
    za: &'a Array2<f64>,
    y: &'a [f64],
    w: &'a [f64],
    kappa: f64,
}

impl Subproblem<'_> {
    fn p(&self) -> usize {
        self.w.len()
    }

    fn value(&self, theta: &Array1<f64>) -> f64 {
        let s = self.za.dot(theta);
        let loss: f64 = s.iter().zip(self.y).map(|(si, yi)| softplus(-yi * si)).sum();
        let gap: f64 = theta
            .iter()
            .zip(self.w)
            .map(|(b, v)| (b - v) * (b - v))
            .sum();
        loss + 0.5 * self.kappa * gap
    }

    /// Value, gradient and per-row logistic curvature at `theta`.
    fn eval(&self, theta: &Array1<f64>) -> (f64, Array1<f64>, Array1<f64>) {
        let s = self.za.dot(theta);
        let mut loss = 0.0;
        let mut r = Array1::zeros(s.len());
        let mut curv = Array1::zeros(s.len());
        for i in 0..s.len() {
            let m = -self.y[i] * s[i];
            loss += softplus(m);
            let q = sigmoid(m);
            r[i] = -self.y[i] * q;
            curv[i] = q * (1.0 - q);
        }
        let mut grad = self.za.t().dot(&r);
        let mut gap = 0.0;
        for j in 0..self.p() {
            let diff = theta[j] - self.w[j];
            gap += diff * diff;
            grad[j] += self.kappa * diff;
        }
        (loss + 0.5 * self.kappa * gap, grad, curv)
    }

    fn hessian(&self, curv: &Array1<f64>) -> Array2<f64> {
        let weighted = self.za * &curv.mapv(f64::sqrt).insert_axis(Axis(1));
        let mut h = weighted.t().dot(&weighted);
        for j in 0..self.p() {
            h[[j, j]] += self.kappa;
        }
        h
    }
}

/// Cholesky solve of `a x = b` for symmetric positive definite `a`.
fn solve_spd(mut a: Array2<f64>, b: &Array1<f64>) -> Option<Array1<f64>> {
    let n = a.nrows();
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= a[[j, k]] * a[[j, k]];
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        a[[j, j]] = d;
        for i in j + 1..n {
            let mut v = a[[i, j]];
            for k in 0..j {
                v -= a[[i, k]] * a[[j, k]];
            }
            a[[i, j]] = v / d;
        }
    }
    let mut x = b.clone();
    for i in 0..n {
        let mut v = x[i];
        for k in 0..i {
            v -= a[[i, k]] * x[k];
        }
        x[i] = v / a[[i, i]];
    }
    for i in (0..n).rev() {
        let mut v = x[i];
        for k in i + 1..n {
            v -= a[[k, i]] * x[k];
        }
        x[i] = v / a[[i, i]];
    }
    Some(x)
}

fn with_ones_column(z: ArrayView2<f64>) -> Array2<f64> {
    let (n, p) = z.dim();
    let mut za = Array2::ones((n, p + 1));
    za.slice_mut(s![.., ..p]).assign(&z);
    za
}

fn inf_norm(v: &Array1<f64>) -> f64 {
    v.iter().fold(0.0, |m: f64, x| if m.is_nan() || x.is_nan() { f64::NAN } else { m.max(x.abs()) })
}

/// Descent on `loss + kappa/2 ||beta - w||^2` over `theta = [beta; b0]`.
/// Never returns a point with a larger subproblem value than `theta`.
fn descend(sub: &Subproblem<'_>, mut theta: Array1<f64>, cfg: &OptimizerConfig) -> Array1<f64> {
    for _ in 0..cfg.max_inner_iters {
        let (f, grad, curv) = sub.eval(&theta);
        if inf_norm(&grad) < cfg.inner_tol {
            break;
        }
        let direction = match cfg.inner_solver {
            InnerSolver::Newton => solve_spd(sub.hessian(&curv), &grad)
                .map(|d| -d)
                .filter(|d| d.dot(&grad) < 0.0)
                .unwrap_or_else(|| -&grad),
            InnerSolver::GradientDescent => -&grad,
        };
        let slope = direction.dot(&grad);
        let mut step = cfg.initial_step;
        let mut accepted = None;
        for _ in 0..64 {
            let candidate = &theta + &(step * &direction);
            let fc = sub.value(&candidate);
            if fc <= f + cfg.armijo_c * step * slope {
                accepted = Some(candidate);
                break;
            }
            step *= cfg.backtrack_factor;
        }
        match accepted {
            Some(next) => theta = next,
            None => break,
        }
    }
    theta
}

/// Descent steps on `loss + kappa/2 ||beta - w||^2` with `w` fixed.
///
/// Each accepted step satisfies the Armijo condition, so the subproblem value
/// of the output never exceeds that of the input.
pub fn beta_step(
    z: ArrayView2<f64>,
    y: &[f64],
    beta_init: &[f64],
    intercept_init: f64,
    w: &[f64],
    hp: &HyperParams,
    cfg: &OptimizerConfig,
) -> Result<(Vec<f64>, f64)> {
    check_dims(z, y, beta_init)?;
    let za = with_ones_column(z);
    let sub = Subproblem {
        za: &za,
        y,
        w,
        kappa: hp.kappa,
    };
    let mut theta: Array1<f64> = beta_init.iter().copied().collect();
    theta
        .push(Axis(0), ndarray::aview0(&intercept_init))
        .expect("1-D push");
    let theta = descend(&sub, theta, cfg);
    let p = beta_init.len();
    Ok((theta.slice(s![..p]).to_vec(), theta[p]))
}

/// Minimizes `L(beta, w)` from `beta = w = 0`, `b0 = 0` with `cfg.scheme`.
///
/// Stops when neither `beta` nor `w` moves by `outer_tol` (infinity norm) in
/// an outer iteration, or after `max_outer_iters`. The reduced scheme also
/// stops once its gradient norm drops below `inner_tol`.
pub fn fit_sr3(
    z: ArrayView2<f64>,
    y: &[f64],
    hp: &HyperParams,
    cfg: &OptimizerConfig,
) -> Result<(SparseLinearModel, FitDiagnostics)> {
    hp.validate()?;
    cfg.validate()?;
    let (n, p) = z.dim();
    if n == 0 {
        return Err(Error::EmptyData);
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::Config("labels must be -1 or +1".into()));
    }

    let za = with_ones_column(z);
    let run = match cfg.scheme {
        Scheme::Alternating => run_alternating(&za, y, hp, cfg)?,
        Scheme::Reduced => run_reduced(&za, y, hp, cfg)?,
    };
    let Run {
        theta,
        w,
        trace,
        iterations,
        converged,
    } = run;

    let support: Vec<usize> = (0..p).filter(|&j| w[j] != 0.0).collect();
    let diagnostics = FitDiagnostics {
        outer_iterations: iterations,
        converged,
        final_objective: *trace.last().expect("trace starts non-empty"),
        nnz: support.len(),
    };
    let model = SparseLinearModel {
        beta: theta.slice(s![..p]).to_vec(),
        intercept: theta[p],
        w,
        support,
        objective_trace: trace,
    };
    Ok((model, diagnostics))
}

struct Run {
    theta: Array1<f64>,
    w: Vec<f64>,
    trace: Vec<f64>,
    iterations: usize,
    converged: bool,
}

fn max_move(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

fn run_alternating(za: &Array2<f64>, y: &[f64], hp: &HyperParams, cfg: &OptimizerConfig) -> Result<Run> {
    let p = za.ncols() - 1;
    let mut theta = Array1::<f64>::zeros(p + 1);
    let mut w = vec![0.0; p];
    let mut trace = vec![reduced_value(za, y, &theta, hp)];
    let mut converged = false;
    let mut iterations = 0;

    for k in 1..=cfg.max_outer_iters {
        iterations = k;
        let sub = Subproblem {
            za,
            y,
            w: &w,
            kappa: hp.kappa,
        };
        let next = descend(&sub, theta.clone(), cfg);
        let beta = next.slice(s![..p]);
        let beta = beta.as_slice().expect("contiguous");
        let w_next = soft_threshold(beta, hp);

        let value = sub_loss(za, y, &next) + penalty(beta, &w_next, hp);
        if !value.is_finite() {
            return Err(Error::NonFiniteObjective { iteration: k });
        }
        trace.push(value);

        let moved = max_move(beta, theta.as_slice().expect("contiguous")).max(max_move(&w_next, &w));
        theta = next;
        w = w_next;
        if moved < cfg.outer_tol {
            converged = true;
            break;
        }
    }
    Ok(Run {
        theta,
        w,
        trace,
        iterations,
        converged,
    })
}

fn sub_loss(za: &Array2<f64>, y: &[f64], theta: &Array1<f64>) -> f64 {
    let s = za.dot(theta);
    s.iter().zip(y).map(|(si, yi)| softplus(-yi * si)).sum()
}

/// `min_w lambda |w| + kappa/2 (b - w)^2`: quadratic within `lambda/kappa`
/// of zero, linear beyond.
fn huber(b: f64, hp: &HyperParams) -> f64 {
    let t = hp.lambda / hp.kappa;
    if b.abs() <= t {
        0.5 * hp.kappa * b * b
    } else {
        hp.lambda * (b.abs() - 0.5 * t)
    }
}

/// `L(beta, soft_threshold(beta))` over `theta = [beta; b0]`.
fn reduced_value(za: &Array2<f64>, y: &[f64], theta: &Array1<f64>, hp: &HyperParams) -> f64 {
    let p = za.ncols() - 1;
    sub_loss(za, y, theta) + theta.iter().take(p).map(|&b| huber(b, hp)).sum::<f64>()
}

fn run_reduced(za: &Array2<f64>, y: &[f64], hp: &HyperParams, cfg: &OptimizerConfig) -> Result<Run> {
    let (n, q) = za.dim();
    let p = q - 1;
    let t = hp.lambda / hp.kappa;
    let mut theta = Array1::<f64>::zeros(q);
    let mut value = reduced_value(za, y, &theta, hp);
    if !value.is_finite() {
        return Err(Error::NonFiniteObjective { iteration: 0 });
    }
    let mut trace = vec![value];
    let mut converged = false;
    let mut iterations = 0;
    // Levenberg damping, relaxed after full steps and raised after short ones
    let mut damping = 0.0;

    for k in 1..=cfg.max_outer_iters {
        let s = za.dot(&theta);
        let mut r = Array1::zeros(n);
        let mut curv = Array1::zeros(n);
        for i in 0..n {
            let m = -y[i] * s[i];
            let sig = sigmoid(m);
            r[i] = -y[i] * sig;
            curv[i] = sig * (1.0 - sig);
        }
        let mut grad = za.t().dot(&r);
        for j in 0..p {
            let b = theta[j];
            grad[j] += if b.abs() <= t { hp.kappa * b } else { hp.lambda * b.signum() };
        }
        if inf_norm(&grad) < cfg.inner_tol {
            converged = true;
            break;
        }

        let weighted = za * &curv.mapv(f64::sqrt).insert_axis(Axis(1));
        let mut h = weighted.t().dot(&weighted);
        let ridge = 1e-12 * (1.0 + h.diag().iter().fold(0.0f64, |m, v| m.max(*v)));
        for j in 0..q {
            if j < p && theta[j].abs() <= t {
                h[[j, j]] += hp.kappa;
            }
            h[[j, j]] += ridge + damping;
        }
        let direction = solve_spd(h, &grad)
            .map(|d| -d)
            .filter(|d| d.dot(&grad) < 0.0)
            .unwrap_or_else(|| -&grad);
        let slope = direction.dot(&grad);

        let mut step = cfg.initial_step;
        let mut accepted = None;
        for _ in 0..64 {
            let candidate = &theta + &(step * &direction);
            let fc = reduced_value(za, y, &candidate, hp);
            if fc <= value + cfg.armijo_c * step * slope {
                accepted = Some((candidate, fc));
                break;
            }
            step *= cfg.backtrack_factor;
        }
        let Some((next, next_value)) = accepted else {
            break;
        };
        damping = if step == cfg.initial_step {
            damping * 0.1
        } else {
            (damping * 10.0).max(1e-3)
        };
        if !next_value.is_finite() {
            return Err(Error::NonFiniteObjective { iteration: k });
        }
        iterations = k;
        let beta_old = theta.slice(s![..p]);
        let beta_new = next.slice(s![..p]);
        let (beta_old, beta_new) = (
            beta_old.as_slice().expect("contiguous"),
            beta_new.as_slice().expect("contiguous"),
        );
        let moved = max_move(beta_new, beta_old)
            .max(max_move(&soft_threshold(beta_new, hp), &soft_threshold(beta_old, hp)))
            .max((next[p] - theta[p]).abs());
        theta = next;
        value = next_value;
        trace.push(value);
        if moved < cfg.outer_tol {
            converged = true;
            break;
        }
    }
    let w = soft_threshold(theta.slice(s![..p]).as_slice().expect("contiguous"), hp);
    Ok(Run {
        theta,
        w,
        trace,
        iterations,
        converged,
    })
}

/// Zeroes `beta` outside the support of `w`.
pub fn prune(model: &SparseLinearModel) -> SparseLinearModel {
    let mut out = model.clone();
    for (b, v) in out.beta.iter_mut().zip(&model.w) {
        if *v == 0.0 {
            *b = 0.0;
        }
    }
    out.support = (0..model.w.len()).filter(|&j| model.w[j] != 0.0).collect();
    out
}

/// Re-optimizes the intercept of `model` with `beta` held fixed (1-D Newton).
///
/// After [`prune`] the intercept was still tuned against the dense `beta`, so
/// an empty support would not give the base-rate predictor without this.
pub fn refit_intercept(z: ArrayView2<f64>, y: &[f64], model: &SparseLinearModel) -> Result<SparseLinearModel> {
    check_dims(z, y, &model.beta)?;
    let s = scores(z, &model.beta, 0.0);
    let loss = |b: f64| -> f64 { s.iter().zip(y).map(|(si, yi)| softplus(-yi * (si + b))).sum() };
    let mut b = model.intercept;
    let mut f = loss(b);
    for _ in 0..100 {
        let (mut g, mut h) = (0.0, 0.0);
        for (si, yi) in s.iter().zip(y) {
            let p = sigmoid(-yi * (si + b));
            g -= yi * p;
            h += p * (1.0 - p);
        }
        if g.abs() <= 1e-12 * y.len() as f64 || h <= 0.0 {
            break;
        }
        // Newton overshoots on the flat tails; halve until the loss drops.
        // Tiny steps are taken as is since the loss cannot resolve them.
        let mut step = (g / h).clamp(-10.0, 10.0);
        let mut accepted = false;
        for _ in 0..60 {
            let f_new = loss(b - step);
            if f_new <= f || step.abs() < 1e-7 {
                b -= step;
                f = f_new;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let mut out = model.clone();
    if b.is_finite() {
        out.intercept = b;
    }
    Ok(out)
}
