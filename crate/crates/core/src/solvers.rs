//! Dual-ascent solvers built on the projected shrinkage.
//!
//! * [`proshrink`]: `x = [tau * shrink(u / tau + A^T y)]_X`, `y += h (b - Ax)`.
//!   With `X = R^n` and `u = 0` this is exactly linearized Bregman.
//! * [`proshrink_accelerated`]: the same primal step with a momentum-extrapolated
//!   dual sequence.
//! * [`proximal_point_bp`]: outer proximal-point loop for
//!   `min ||x||_1 s.t. Ax = b, x in X`, re-solving the augmented model with
//!   anchor `u = z_k`.
//! * [`fbs_box_bpdn`]: forward-backward splitting for
//!   `min_{x in X} ||x||_1 + ||Ax - b||^2 / (2 lambda)`.

use std::fmt;

use serde::Serialize;

use crate::boxset::BoxSet;
use crate::dual::{Problem, ProblemView};
use crate::error::{check_len, Error, Result};
use crate::linalg::{
    dist2, dot, norm2, spectral_norm, DenseMatrix, SpectralEstimate, SpectralOptions,
};
use crate::operators::soft_threshold;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum StepSize {
    /// `step_safety / (tau * sigma^2)` from an inflated spectral norm estimate.
    Auto,
    Fixed(f64),
}

/// How `gamma_k` is computed from `theta_k` in the accelerated scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MomentumRule {
    /// `gamma = (sqrt(theta + 4) - theta) / 2`
    Linear,
    /// `gamma = (sqrt(theta^2 + 4) - theta) / 2`, the classical recursion.
    Squared,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverConfig {
    pub step: StepSize,
    pub step_safety: f64,
    /// Stop once `||Ax - b|| / max(1, ||b||)` falls to this level.
    pub tol_feas: f64,
    /// Optional additional fixed-point residual target.
    pub tol_fp: Option<f64>,
    pub max_iter: usize,
    pub record_history: bool,
    pub theta0: f64,
    pub momentum: MomentumRule,
    pub restart: bool,
    pub spectral: SpectralOptions,
    /// Abort once the feasibility residual exceeds this multiple of its first value.
    pub divergence_factor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            step: StepSize::Auto,
            step_safety: 1.9,
            tol_feas: 1e-10,
            tol_fp: None,
            max_iter: 50_000,
            record_history: false,
            theta0: 1.0,
            momentum: MomentumRule::Linear,
            restart: false,
            spectral: SpectralOptions::default(),
            divergence_factor: 1e6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Termination {
    /// Feasibility (and fixed-point, if requested) tolerance reached.
    FeasTol,
    /// Forward-backward splitting: relative step below tolerance.
    StepTol,
    MaxIter,
}

impl Termination {
    pub fn converged(self) -> bool {
        !matches!(self, Termination::MaxIter)
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::FeasTol => "FEAS_TOL",
            Termination::StepTol => "STEP_TOL",
            Termination::MaxIter => "MAX_ITER",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistoryRow {
    pub iter: usize,
    pub primal_feas: f64,
    pub fixed_point: f64,
    /// Dual value `L(x^k, y^{k-1})` for the dual solvers; the penalized
    /// objective for forward-backward splitting.
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult {
    pub x: Vec<f64>,
    /// Dual iterate; empty for forward-backward splitting.
    pub y: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
    pub history: Option<Vec<HistoryRow>>,
    /// The step actually used (`h`, or `gamma` for splitting).
    pub step: f64,
    pub spectral: Option<SpectralEstimate>,
    /// Outer proximal-point steps, when applicable.
    pub outer_steps: Option<usize>,
}

/// The per-iteration history table.
pub fn residual_trace(result: &SolverResult) -> Result<&[HistoryRow]> {
    result.history.as_deref().ok_or(Error::NoHistory)
}

/// `safety / (tau * sigma^2)`. A zero matrix imposes no bound; `1` is returned.
pub fn auto_step(sigma: f64, tau: f64, safety: f64) -> f64 {
    if sigma > 0.0 {
        safety / (tau * sigma * sigma)
    } else {
        1.0
    }
}

/// One step of the momentum recursion: returns `(gamma_k, beta_{k+1}, theta_{k+1})`.
pub fn momentum_step(theta: f64, rule: MomentumRule) -> (f64, f64, f64) {
    let gamma = match rule {
        MomentumRule::Linear => ((theta + 4.0).sqrt() - theta) / 2.0,
        MomentumRule::Squared => ((theta * theta + 4.0).sqrt() - theta) / 2.0,
    };
    (gamma, (1.0 - theta) * gamma, theta * gamma)
}

fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be positive and finite",
        })
    }
}

fn validate(cfg: &SolverConfig) -> Result<()> {
    if !(cfg.step_safety > 0.0 && cfg.step_safety < 2.0) {
        return Err(Error::InvalidParameter {
            name: "step_safety",
            value: cfg.step_safety,
            reason: "must lie in (0, 2)",
        });
    }
    if let StepSize::Fixed(h) = cfg.step {
        check_positive("h", h)?;
    }
    check_positive("theta0", cfg.theta0)?;
    if !(cfg.tol_feas >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "tol_feas",
            value: cfg.tol_feas,
            reason: "must be non-negative",
        });
    }
    Ok(())
}

fn resolve_step(
    a: &DenseMatrix,
    tau: f64,
    cfg: &SolverConfig,
) -> Result<(f64, Option<SpectralEstimate>)> {
    match cfg.step {
        StepSize::Fixed(h) => Ok((h, None)),
        StepSize::Auto => {
            let est = spectral_norm(a, &cfg.spectral)?;
            Ok((auto_step(est.inflated(), tau, cfg.step_safety), Some(est)))
        }
    }
}

/// Observer hook called once per iteration with `(k, x^k, y^k)`.
pub trait Observer {
    fn observe(&mut self, iter: usize, x: &[f64], y: &[f64]);
}

impl<F: FnMut(usize, &[f64], &[f64])> Observer for F {
    fn observe(&mut self, iter: usize, x: &[f64], y: &[f64]) {
        self(iter, x, y)
    }
}

struct Quiet;

impl Observer for Quiet {
    fn observe(&mut self, _: usize, _: &[f64], _: &[f64]) {}
}

/// Plain projected shrinkage iteration from `y^0 = 0`.
pub fn proshrink(problem: &Problem, cfg: &SolverConfig) -> Result<SolverResult> {
    proshrink_with(problem, cfg, None, &mut Quiet)
}

/// [`proshrink`] with an optional warm start and a per-iteration observer.
pub fn proshrink_with(
    problem: &Problem,
    cfg: &SolverConfig,
    y0: Option<&[f64]>,
    observer: &mut dyn Observer,
) -> Result<SolverResult> {
    validate(cfg)?;
    let (h, spectral) = resolve_step(problem.a(), problem.tau(), cfg)?;
    let mut res = dual_ascent(problem.view(), cfg, h, y0, None, observer)?;
    res.spectral = spectral;
    Ok(res)
}

/// Momentum-accelerated projected shrinkage from `z^0 = y^0 = 0`.
pub fn proshrink_accelerated(problem: &Problem, cfg: &SolverConfig) -> Result<SolverResult> {
    proshrink_accelerated_with(problem, cfg, None, &mut Quiet)
}

pub fn proshrink_accelerated_with(
    problem: &Problem,
    cfg: &SolverConfig,
    y0: Option<&[f64]>,
    observer: &mut dyn Observer,
) -> Result<SolverResult> {
    validate(cfg)?;
    let (h, spectral) = resolve_step(problem.a(), problem.tau(), cfg)?;
    let momentum = Momentum {
        theta0: cfg.theta0,
        rule: cfg.momentum,
        restart: cfg.restart,
    };
    let mut res = dual_ascent(problem.view(), cfg, h, y0, Some(momentum), observer)?;
    res.spectral = spectral;
    Ok(res)
}

#[derive(Debug, Clone, Copy)]
struct Momentum {
    theta0: f64,
    rule: MomentumRule,
    restart: bool,
}

/// Shared loop. Each pass computes the residual of the current primal point
/// `x^k = x*(y^{k-1})`, takes the dual step, then forms `x^{k+1}` so the
/// fixed-point residual of the returned pair is available for free.
fn dual_ascent(
    p: ProblemView<'_>,
    cfg: &SolverConfig,
    h: f64,
    y0: Option<&[f64]>,
    momentum: Option<Momentum>,
    observer: &mut dyn Observer,
) -> Result<SolverResult> {
    let (m, n) = (p.a.rows(), p.a.cols());
    let mut y = match y0 {
        Some(y0) => {
            check_len("dual warm start", m, y0.len())?;
            y0.to_vec()
        }
        None => vec![0.0; m],
    };
    let b_scale = norm2(p.b).max(1.0);
    let mut aty = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut x_next = vec![0.0; n];
    let mut r = vec![0.0; m];
    let mut z_prev = y.clone();
    let mut z = vec![0.0; m];
    let mut theta = momentum.map_or(1.0, |mo| mo.theta0);
    let mut history = cfg.record_history.then(Vec::new);
    let mut initial_feas = None;

    p.a.rmatvec_into(&y, &mut aty);
    p.primal_into(&aty, &mut x);

    for k in 1..=cfg.max_iter {
        p.a.matvec_into(&x, &mut r);
        for (ri, bi) in r.iter_mut().zip(p.b) {
            *ri = bi - *ri;
        }
        let feas = norm2(&r) / b_scale;
        let objective = if history.is_some() {
            p.lagrangian(&x, &y, &r)
        } else {
            f64::NAN
        };

        match momentum {
            None => {
                for (yi, ri) in y.iter_mut().zip(&r) {
                    *yi += h * ri;
                }
            }
            Some(mo) => {
                for ((zi, yi), ri) in z.iter_mut().zip(&y).zip(&r) {
                    *zi = yi + h * ri;
                }
                let (_, mut beta, mut theta_next) = momentum_step(theta, mo.rule);
                if mo.restart && restart_triggered(&y, &z, &z_prev) {
                    beta = 0.0;
                    theta_next = mo.theta0;
                }
                for ((yi, zi), zp) in y.iter_mut().zip(&z).zip(&z_prev) {
                    *yi = zi + beta * (zi - zp);
                }
                std::mem::swap(&mut z_prev, &mut z);
                theta = theta_next;
            }
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { iteration: k });
        }

        p.a.rmatvec_into(&y, &mut aty);
        p.primal_into(&aty, &mut x_next);
        let fixed_point = dist2(&x, &x_next) / norm2(&x).max(1.0);

        if let Some(hist) = history.as_mut() {
            hist.push(HistoryRow {
                iter: k,
                primal_feas: feas,
                fixed_point,
                objective,
            });
        }
        observer.observe(k, &x, &y);

        let fp_ok = cfg.tol_fp.is_none_or(|t| fixed_point <= t);
        if feas <= cfg.tol_feas && fp_ok {
            return Ok(SolverResult {
                x,
                y,
                iterations: k,
                termination: Termination::FeasTol,
                history,
                step: h,
                spectral: None,
                outer_steps: None,
            });
        }
        let initial = *initial_feas.get_or_insert(feas);
        if feas > cfg.divergence_factor * initial.max(f64::MIN_POSITIVE) {
            return Err(Error::Diverged {
                iteration: k,
                residual: feas,
                initial,
                factor: cfg.divergence_factor,
                hint: if momentum.is_some() {
                    "; the momentum recursion (theta rule) is the likely culprit"
                } else {
                    "; the step size is probably above 2 / (tau ||A||^2)"
                },
            });
        }
        std::mem::swap(&mut x, &mut x_next);
    }

    Ok(SolverResult {
        x,
        y,
        iterations: cfg.max_iter,
        termination: Termination::MaxIter,
        history,
        step: h,
        spectral: None,
        outer_steps: None,
    })
}

/// Gradient restart for ascent: the new gradient step `z^{k+1} - y^k` points
/// against the momentum direction `z^{k+1} - z^k`.
fn restart_triggered(y: &[f64], z: &[f64], z_prev: &[f64]) -> bool {
    let s: f64 = y
        .iter()
        .zip(z)
        .zip(z_prev)
        .map(|((yi, zi), zp)| (zi - yi) * (zi - zp))
        .sum();
    s < 0.0
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum LambdaSchedule {
    /// `lambda_k = max(floor, scale * ||z_k||_inf)`.
    Adaptive {
        scale: f64,
        floor: f64,
        outer_steps: usize,
    },
    Constant {
        lambda: f64,
        outer_steps: usize,
    },
    List(Vec<f64>),
}

impl Default for LambdaSchedule {
    fn default() -> Self {
        LambdaSchedule::Adaptive {
            scale: 10.0,
            floor: 1.0,
            outer_steps: 50,
        }
    }
}

impl LambdaSchedule {
    fn outer_steps(&self) -> usize {
        match self {
            LambdaSchedule::Adaptive { outer_steps, .. }
            | LambdaSchedule::Constant { outer_steps, .. } => *outer_steps,
            LambdaSchedule::List(l) => l.len(),
        }
    }

    fn lambda(&self, k: usize, z: &[f64]) -> f64 {
        match self {
            LambdaSchedule::Adaptive { scale, floor, .. } => {
                let zinf = z.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                (scale * zinf).max(*floor)
            }
            LambdaSchedule::Constant { lambda, .. } => *lambda,
            LambdaSchedule::List(l) => l[k],
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            LambdaSchedule::Adaptive { scale, floor, .. } => {
                check_positive("lambda floor", *floor)?;
                if !(*scale >= 0.0) {
                    return Err(Error::InvalidParameter {
                        name: "lambda scale",
                        value: *scale,
                        reason: "must be non-negative",
                    });
                }
                Ok(())
            }
            LambdaSchedule::Constant { lambda, .. } => check_positive("lambda", *lambda),
            LambdaSchedule::List(l) => l.iter().try_for_each(|&v| check_positive("lambda", v)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OuterConfig {
    pub lambda: LambdaSchedule,
    pub inner: SolverConfig,
    /// Stop once `||z_{k+1} - z_k|| / max(1, ||z_k||)` falls to this level.
    pub outer_tol: f64,
    pub accelerated: bool,
}

impl Default for OuterConfig {
    fn default() -> Self {
        Self {
            lambda: LambdaSchedule::default(),
            inner: SolverConfig {
                tol_feas: 1e-13,
                ..SolverConfig::default()
            },
            outer_tol: 1e-12,
            accelerated: false,
        }
    }
}

/// Proximal-point loop for `min ||x||_1 s.t. Ax = b, x in X`.
///
/// Outer step `k` solves the augmented model with `u = z_k`, `tau = lambda_k`
/// starting from the previous dual iterate. The spectral norm is estimated
/// once and reused for every inner step size.
pub fn proximal_point_bp(
    a: &DenseMatrix,
    b: &[f64],
    set: &BoxSet,
    cfg: &OuterConfig,
) -> Result<SolverResult> {
    check_len("rhs", a.rows(), b.len())?;
    check_len("box", a.cols(), set.len())?;
    validate(&cfg.inner)?;
    cfg.lambda.validate()?;
    let outer_steps = cfg.lambda.outer_steps();
    if outer_steps == 0 {
        return Err(Error::Other("lambda schedule has no outer steps".into()));
    }
    let spectral = match cfg.inner.step {
        StepSize::Auto => Some(spectral_norm(a, &cfg.inner.spectral)?),
        StepSize::Fixed(_) => None,
    };

    let mut z = vec![0.0; a.cols()];
    let mut y: Option<Vec<f64>> = None;
    let mut total_iters = 0;
    let mut history: Option<Vec<HistoryRow>> = cfg.inner.record_history.then(Vec::new);
    let mut last_h = f64::NAN;

    for k in 0..outer_steps {
        let lambda = cfg.lambda.lambda(k, &z);
        let h = match (cfg.inner.step, spectral) {
            (StepSize::Fixed(h), _) => h,
            (StepSize::Auto, Some(est)) => auto_step(est.inflated(), lambda, cfg.inner.step_safety),
            (StepSize::Auto, None) => unreachable!(),
        };
        last_h = h;
        let view = ProblemView {
            a,
            b,
            set,
            tau: lambda,
            u: &z,
        };
        let momentum = cfg.accelerated.then_some(Momentum {
            theta0: cfg.inner.theta0,
            rule: cfg.inner.momentum,
            restart: cfg.inner.restart,
        });
        let inner = dual_ascent(view, &cfg.inner, h, y.as_deref(), momentum, &mut Quiet)?;
        log::debug!(
            "outer step {k}: lambda {lambda:e}, {} inner iterations, {}",
            inner.iterations,
            inner.termination
        );
        if let (Some(all), Some(rows)) = (history.as_mut(), inner.history.as_ref()) {
            all.extend(rows.iter().map(|r| HistoryRow {
                iter: r.iter + total_iters,
                ..*r
            }));
        }
        total_iters += inner.iterations;
        let change = dist2(&inner.x, &z) / norm2(&z).max(1.0);
        let inner_ok = inner.termination.converged();
        z.clone_from(&inner.x);
        y = Some(inner.y);
        if change <= cfg.outer_tol && inner_ok {
            return Ok(SolverResult {
                x: z,
                y: y.unwrap_or_default(),
                iterations: total_iters,
                termination: Termination::FeasTol,
                history,
                step: h,
                spectral,
                outer_steps: Some(k + 1),
            });
        }
    }
    Ok(SolverResult {
        x: z,
        y: y.unwrap_or_default(),
        iterations: total_iters,
        termination: Termination::MaxIter,
        history,
        step: last_h,
        spectral,
        outer_steps: Some(outer_steps),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FbsConfig {
    /// Weight of the data term, `||Ax - b||^2 / (2 lambda)`.
    pub lambda: f64,
    /// `gamma`; `Auto` resolves to `step_safety * lambda / sigma^2`.
    pub step: StepSize,
    pub step_safety: f64,
    /// Stop once `||x_{k+1} - x_k|| / max(1, ||x_k||)` falls to this level.
    pub tol: f64,
    pub max_iter: usize,
    pub record_history: bool,
    pub spectral: SpectralOptions,
    pub divergence_factor: f64,
}

impl Default for FbsConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            step: StepSize::Auto,
            step_safety: 1.0,
            tol: 1e-12,
            max_iter: 50_000,
            record_history: false,
            spectral: SpectralOptions::default(),
            divergence_factor: 1e6,
        }
    }
}

/// Forward-backward splitting for `min_{x in X} ||x||_1 + ||Ax - b||^2 / (2 lambda)`.
///
/// Each step is `x <- prox_{gamma (||.||_1 + indicator_X)}(x - (gamma / lambda) A^T (Ax - b))`,
/// evaluated as a projected soft threshold at level `gamma`.
pub fn fbs_box_bpdn(
    a: &DenseMatrix,
    b: &[f64],
    set: &BoxSet,
    cfg: &FbsConfig,
) -> Result<SolverResult> {
    fbs_box_bpdn_with(a, b, set, cfg, &mut Quiet)
}

/// [`fbs_box_bpdn`] with an observer; the dual slot passed to it is empty.
pub fn fbs_box_bpdn_with(
    a: &DenseMatrix,
    b: &[f64],
    set: &BoxSet,
    cfg: &FbsConfig,
    observer: &mut dyn Observer,
) -> Result<SolverResult> {
    check_len("rhs", a.rows(), b.len())?;
    check_len("box", a.cols(), set.len())?;
    check_positive("lambda", cfg.lambda)?;
    let (gamma, spectral) = match cfg.step {
        StepSize::Fixed(g) => {
            check_positive("gamma", g)?;
            (g, None)
        }
        StepSize::Auto => {
            check_positive("step_safety", cfg.step_safety)?;
            let est = spectral_norm(a, &cfg.spectral)?;
            let s = est.inflated();
            let g = if s > 0.0 {
                cfg.step_safety * cfg.lambda / (s * s)
            } else {
                1.0
            };
            (g, Some(est))
        }
    };
    let (m, n) = (a.rows(), a.cols());
    let b_scale = norm2(b).max(1.0);
    let ratio = gamma / cfg.lambda;
    let mut x = vec![0.0; n];
    let mut x_next = vec![0.0; n];
    let mut r = vec![0.0; m];
    let mut g = vec![0.0; n];
    let mut history = cfg.record_history.then(Vec::new);
    let mut initial_obj = None;

    // r = Ax - b for the current x
    a.matvec_into(&x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri -= bi;
    }

    for k in 1..=cfg.max_iter {
        a.rmatvec_into(&r, &mut g);
        for (((xn, &xi), &gi), iv) in x_next.iter_mut().zip(&x).zip(&g).zip(set.intervals()) {
            *xn = iv.project(soft_threshold(xi - ratio * gi, gamma));
        }
        if x_next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { iteration: k });
        }
        let step = dist2(&x_next, &x) / norm2(&x).max(1.0);
        a.matvec_into(&x_next, &mut r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri -= bi;
        }
        let rn = norm2(&r);
        let objective = x_next.iter().map(|v| v.abs()).sum::<f64>() + rn * rn / (2.0 * cfg.lambda);
        if let Some(hist) = history.as_mut() {
            hist.push(HistoryRow {
                iter: k,
                primal_feas: rn / b_scale,
                fixed_point: step,
                objective,
            });
        }
        observer.observe(k, &x_next, &[]);
        std::mem::swap(&mut x, &mut x_next);
        if step <= cfg.tol {
            return Ok(SolverResult {
                x,
                y: Vec::new(),
                iterations: k,
                termination: Termination::StepTol,
                history,
                step: gamma,
                spectral,
                outer_steps: None,
            });
        }
        let initial = *initial_obj.get_or_insert(objective.max(dot(b, b) / (2.0 * cfg.lambda)));
        if objective > cfg.divergence_factor * initial.max(f64::MIN_POSITIVE) {
            return Err(Error::Diverged {
                iteration: k,
                residual: objective,
                initial,
                factor: cfg.divergence_factor,
                hint: "; gamma is probably above 2 lambda / ||A||^2",
            });
        }
    }
    Ok(SolverResult {
        x,
        y: Vec::new(),
        iterations: cfg.max_iter,
        termination: Termination::MaxIter,
        history,
        step: gamma,
        spectral,
        outer_steps: None,
    })
}

/// Renders a history table as `iter,primal_feas,fixed_point,dual_value`.
pub fn trace_csv(rows: &[HistoryRow]) -> String {
    let mut s = String::from("iter,primal_feas,fixed_point,dual_value\n");
    for r in rows {
        s.push_str(&format!(
            "{},{:?},{:?},{:?}\n",
            r.iter, r.primal_feas, r.fixed_point, r.objective
        ));
    }
    s
}
