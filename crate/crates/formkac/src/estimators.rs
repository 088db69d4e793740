//! Monte Carlo estimators over reflecting paths: the semigroup expectation
//! for forms, its scalar pointwise bound, exponential-functional rates,
//! the integrated decay functional, semigroup domination, and an
//! occupation-time transience diagnostic.
//!
//! Every estimator maps over paths in parallel with one counter-based stream
//! per path and reduces the per-path outputs serially in path order with
//! compensated sums, so reports are bitwise identical for a fixed seed
//! regardless of the worker count.
//!
//! On this catalog the interior curvature factor of the multiplicative
//! functional is the scalar `exp(-q (n - q) c t / 2)`; it commutes with the
//! boundary factors, so the functional is tracked as that scalar times the
//! ordered product of the boundary factors.

use crate::development::walk;
use crate::error::{Error, Result};
use crate::form_algebra::binomial;
use crate::functional::{operator_norm, FunctionalEvolver, FunctionalMode};
use crate::geometry::ManifoldModel;
use crate::oracles::FormField;
use crate::rng::{stable_hash64, PathRng};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

/// A Monte Carlo estimate with componentwise standard errors.
#[derive(Debug, Clone, serde::Serialize)]
pub struct EstimateReport {
    pub value: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_paths: usize,
    pub seed: u64,
    pub t: f64,
    pub inputs_digest: String,
}

impl EstimateReport {
    pub fn scalar(&self) -> f64 {
        self.value[0]
    }

    pub fn norm(&self) -> f64 {
        self.value.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Compensated (Kahan) accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    pub fn add(&mut self, v: f64) {
        let y = v - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }
    pub fn value(&self) -> f64 {
        self.sum
    }
}

fn digest(parts: &[String]) -> String {
    let bytes: Vec<&[u8]> = parts.iter().map(|s| s.as_bytes()).collect();
    format!("{:016x}", stable_hash64(&bytes))
}

fn model_digest(model: &ManifoldModel) -> String {
    format!("{model}")
}

fn check_min_paths(n_paths: usize) -> Result<()> {
    if n_paths < 100 {
        return Err(Error::Argument(format!(
            "n_paths = {n_paths} below the minimum of 100"
        )));
    }
    Ok(())
}

/// Reduce per-path vectors (in path order) to mean and standard error.
fn reduce_reports(values: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = values.len();
    let dim = values[0].len();
    let mut mean = vec![0.0; dim];
    let mut se = vec![0.0; dim];
    for k in 0..dim {
        let mut acc = Kahan::default();
        for v in values {
            acc.add(v[k]);
        }
        let m = acc.value() / n as f64;
        let mut var = Kahan::default();
        for v in values {
            let d = v[k] - m;
            var.add(d * d);
        }
        mean[k] = m;
        se[k] = (var.value() / (n as f64 - 1.0)).sqrt() / (n as f64).sqrt();
    }
    (mean, se)
}

/// Grid times mapped onto integer step counts.
fn grid_steps(t_grid: &[f64], dt: f64) -> Result<Vec<usize>> {
    if t_grid.is_empty() {
        return Err(Error::Argument("empty time grid".into()));
    }
    let mut steps = Vec::with_capacity(t_grid.len());
    let mut prev = 0usize;
    for &t in t_grid {
        let k = (t / dt).round().max(1.0) as usize;
        if k < prev {
            return Err(Error::Argument("time grid must be increasing".into()));
        }
        prev = k;
        steps.push(k);
    }
    Ok(steps)
}

/// One-pass per-path outputs of the semigroup estimator on a time grid.
struct FkPathRow {
    /// Per grid time: coefficient vector of `M^t omega0(u^t)`.
    fk: Vec<Vec<f64>>,
    /// Per grid time: scalar bound integrand value.
    bound: Vec<f64>,
    /// Per grid time: plain `|omega0(x^t)|` (the degree-zero coupling).
    abs0: Vec<f64>,
    /// Count of times the functional operator norm exceeded the bound.
    norm_violations: usize,
}

fn fk_single_path(
    model: &ManifoldModel,
    omega0: &dyn FormField,
    x0: &DVector<f64>,
    frame0: Option<&DMatrix<f64>>,
    record_steps: &[usize],
    q: usize,
    mode: FunctionalMode,
    dt: f64,
    seed: u64,
    path_index: u64,
    check_norm_bound: bool,
) -> Result<FkPathRow> {
    let evolver = FunctionalEvolver::new(model, q, mode)?;
    let rate = 0.5 * q as f64 * (model.dim - q) as f64 * model.constant_curvature();
    let r_q = model.r_q_at(x0, q)?;
    let mut rng = PathRng::new(seed, path_index);
    let mut m_boundary = evolver.identity();
    let mut rho_exponent = 0.0;
    let mut fk = Vec::with_capacity(record_steps.len());
    let mut bound = Vec::with_capacity(record_steps.len());
    let mut abs0 = Vec::with_capacity(record_steps.len());
    let mut violations = 0usize;
    let mut next = 0usize;
    let t_max = *record_steps.last().unwrap() as f64 * dt;
    let mut step_err: Option<Error> = None;
    walk(model, x0, frame0, t_max, dt, &mut rng, |ev| {
        if step_err.is_some() {
            return;
        }
        if ev.dl > 0.0 {
            if let Some(p) = ev.touch {
                if let Err(e) =
                    evolver.apply_boundary_event(&mut m_boundary, ev.frame, ev.dl, p)
                {
                    step_err = Some(e);
                    return;
                }
                if q >= 1 && q <= model.dim - 1 {
                    match model.rho_q_at(p, q) {
                        Ok(rho) => rho_exponent -= rho * ev.dl,
                        Err(e) => {
                            step_err = Some(e);
                            return;
                        }
                    }
                }
            }
        }
        while next < record_steps.len() && ev.step + 1 == record_steps[next] {
            let t = ev.t;
            let interior = (-rate * t).exp();
            let w_chart = omega0.eval_chart(ev.x);
            let w_frame =
                match crate::oracles::chart_to_frame(ev.frame, &w_chart, model.dim, q) {
                    Ok(w) => w,
                    Err(e) => {
                        step_err = Some(e);
                        return;
                    }
                };
            if w_frame.iter().any(|v| !v.is_finite()) {
                step_err = Some(Error::Input("form field produced a NaN".into()));
                return;
            }
            let y = (&m_boundary * &w_frame) * interior;
            fk.push(y.iter().cloned().collect());
            let b = (-0.5 * r_q * t + rho_exponent).exp();
            bound.push(b * w_frame.norm());
            abs0.push(w_frame.norm());
            if check_norm_bound {
                let mnorm = operator_norm(&m_boundary) * interior;
                if mnorm > b * (1.0 + 10.0 * dt) {
                    violations += 1;
                }
            }
            next += 1;
        }
    })?;
    if let Some(e) = step_err {
        return Err(e);
    }
    Ok(FkPathRow {
        fk,
        bound,
        abs0,
        norm_violations: violations,
    })
}

/// Results of the one-pass grid estimator.
pub struct FkGridResult {
    pub t_grid: Vec<f64>,
    pub fk: Vec<EstimateReport>,
    pub bound: Vec<EstimateReport>,
    pub abs0: Vec<EstimateReport>,
    pub norm_violations: usize,
}

/// Semigroup expectation, scalar bound, and degree-zero coupling on a time
/// grid, from one shared set of paths.
#[allow(clippy::too_many_arguments)]
pub fn fk_grid(
    model: &ManifoldModel,
    omega0: &dyn FormField,
    x0: &DVector<f64>,
    frame0: Option<&DMatrix<f64>>,
    q: usize,
    mode: FunctionalMode,
    t_grid: &[f64],
    n_paths: usize,
    dt: f64,
    seed: u64,
    check_norm_bound: bool,
) -> Result<FkGridResult> {
    check_min_paths(n_paths)?;
    if omega0.degree() != q {
        return Err(Error::Argument("form degree does not match q".into()));
    }
    let record_steps = grid_steps(t_grid, dt)?;
    let rows: Result<Vec<FkPathRow>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| {
            fk_single_path(
                model,
                omega0,
                x0,
                frame0,
                &record_steps,
                q,
                mode,
                dt,
                seed,
                p,
                check_norm_bound,
            )
        })
        .collect();
    let rows = rows?;
    let dig = digest(&[
        "fk_grid".into(),
        model_digest(model),
        format!("{x0:?}"),
        format!("q={q} dt={dt} n={n_paths} seed={seed} grid={t_grid:?}"),
    ]);
    let mut fk_reports = Vec::with_capacity(t_grid.len());
    let mut bound_reports = Vec::with_capacity(t_grid.len());
    let mut abs_reports = Vec::with_capacity(t_grid.len());
    for k in 0..t_grid.len() {
        let t = record_steps[k] as f64 * dt;
        let fk_vals: Vec<Vec<f64>> = rows.iter().map(|r| r.fk[k].clone()).collect();
        let (mean, se) = reduce_reports(&fk_vals);
        fk_reports.push(EstimateReport {
            value: mean,
            stderr: se,
            n_paths,
            seed,
            t,
            inputs_digest: dig.clone(),
        });
        let b_vals: Vec<Vec<f64>> = rows.iter().map(|r| vec![r.bound[k]]).collect();
        let (mean, se) = reduce_reports(&b_vals);
        bound_reports.push(EstimateReport {
            value: mean,
            stderr: se,
            n_paths,
            seed,
            t,
            inputs_digest: dig.clone(),
        });
        let a_vals: Vec<Vec<f64>> = rows.iter().map(|r| vec![r.abs0[k]]).collect();
        let (mean, se) = reduce_reports(&a_vals);
        abs_reports.push(EstimateReport {
            value: mean,
            stderr: se,
            n_paths,
            seed,
            t,
            inputs_digest: dig.clone(),
        });
    }
    Ok(FkGridResult {
        t_grid: t_grid.to_vec(),
        fk: fk_reports,
        bound: bound_reports,
        abs0: abs_reports,
        norm_violations: rows.iter().map(|r| r.norm_violations).sum(),
    })
}

/// Estimate of the evolved form coefficients at one time.
#[allow(clippy::too_many_arguments)]
pub fn fk_expectation(
    model: &ManifoldModel,
    omega0: &dyn FormField,
    x0: &DVector<f64>,
    frame0: Option<&DMatrix<f64>>,
    t: f64,
    q: usize,
    n_paths: usize,
    dt: f64,
    seed: u64,
) -> Result<EstimateReport> {
    let grid = fk_grid(
        model,
        omega0,
        x0,
        frame0,
        q,
        FunctionalMode::Projected,
        &[t],
        n_paths,
        dt,
        seed,
        false,
    )?;
    Ok(grid.fk.into_iter().next().unwrap())
}

/// Estimate of the scalar pointwise bound
/// `E[|omega0(x^t)| exp(-1/2 int r_(q) ds - int rho_(q) dl)]`.
#[allow(clippy::too_many_arguments)]
pub fn pointwise_bound(
    model: &ManifoldModel,
    omega0: &dyn FormField,
    x0: &DVector<f64>,
    t: f64,
    q: usize,
    n_paths: usize,
    dt: f64,
    seed: u64,
) -> Result<EstimateReport> {
    let grid = fk_grid(
        model,
        omega0,
        x0,
        None,
        q,
        FunctionalMode::Projected,
        &[t],
        n_paths,
        dt,
        seed,
        false,
    )?;
    Ok(grid.bound.into_iter().next().unwrap())
}

/// Interior weight for the exponential-functional estimators.
pub enum InteriorWeight {
    Const(f64),
    /// Least eigenvalue of the degree-q curvature endomorphism.
    RqMin(usize),
}

impl InteriorWeight {
    fn eval(&self, model: &ManifoldModel, x: &DVector<f64>) -> Result<f64> {
        match self {
            InteriorWeight::Const(c) => Ok(*c),
            InteriorWeight::RqMin(q) => model.r_q_at(x, *q),
        }
    }
}

/// Boundary weight for the exponential-functional estimators.
pub enum BoundaryWeight {
    Zero,
    Const(f64),
    /// Sum of the q smallest principal curvatures.
    RhoQ(usize),
}

impl BoundaryWeight {
    fn eval(&self, model: &ManifoldModel, p: &DVector<f64>) -> Result<f64> {
        match self {
            BoundaryWeight::Zero => Ok(0.0),
            BoundaryWeight::Const(c) => Ok(*c),
            BoundaryWeight::RhoQ(q) => model.rho_q_at(p, *q),
        }
    }
}

const EXP_CLIP: f64 = 700.0;

/// Exponential-functional means `E[exp(-1/2 int alpha ds - int beta dl)]`
/// on a time grid from one starting point.
#[allow(clippy::too_many_arguments)]
fn exponential_functional_grid(
    model: &ManifoldModel,
    alpha: &InteriorWeight,
    beta: &BoundaryWeight,
    x0: &DVector<f64>,
    t_grid: &[f64],
    n_paths: usize,
    dt: f64,
    seed: u64,
) -> Result<(Vec<EstimateReport>, usize)> {
    check_min_paths(n_paths)?;
    let record_steps = grid_steps(t_grid, dt)?;
    let t_max = *record_steps.last().unwrap() as f64 * dt;
    let rows: Result<Vec<(Vec<f64>, usize)>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let mut rng = PathRng::new(seed, p);
            let mut exponent = 0.0;
            let mut clipped = 0usize;
            let mut prev_x = x0.clone();
            let mut out = Vec::with_capacity(record_steps.len());
            let mut next = 0usize;
            let mut err: Option<Error> = None;
            walk(model, x0, None, t_max, dt, &mut rng, |ev| {
                if err.is_some() {
                    return;
                }
                match alpha.eval(model, &prev_x) {
                    Ok(a) => exponent -= 0.5 * a * dt,
                    Err(e) => {
                        err = Some(e);
                        return;
                    }
                }
                if ev.dl > 0.0 {
                    if let Some(p) = ev.touch {
                        match beta.eval(model, p) {
                            Ok(b) => exponent -= b * ev.dl,
                            Err(e) => {
                                err = Some(e);
                                return;
                            }
                        }
                    }
                }
                prev_x.copy_from(ev.x);
                while next < record_steps.len() && ev.step + 1 == record_steps[next] {
                    let z = if exponent > EXP_CLIP {
                        clipped += 1;
                        EXP_CLIP
                    } else {
                        exponent
                    };
                    out.push(z.exp());
                    next += 1;
                }
            })?;
            if let Some(e) = err {
                return Err(e);
            }
            Ok((out, clipped))
        })
        .collect();
    let rows = rows?;
    let dig = digest(&[
        "exp_functional".into(),
        model_digest(model),
        format!("{x0:?} grid={t_grid:?} n={n_paths} dt={dt} seed={seed}"),
    ]);
    let mut reports = Vec::with_capacity(t_grid.len());
    for k in 0..t_grid.len() {
        let t = record_steps[k] as f64 * dt;
        let vals: Vec<Vec<f64>> = rows.iter().map(|r| vec![r.0[k]]).collect();
        let (mean, se) = reduce_reports(&vals);
        reports.push(EstimateReport {
            value: mean,
            stderr: se,
            n_paths,
            seed,
            t,
            inputs_digest: dig.clone(),
        });
    }
    let clip_count = rows.iter().map(|r| r.1).sum();
    Ok((reports, clip_count))
}

/// Fitted exponential rate of the functional, with the sup over a dither
/// grid of starting points.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SspReport {
    pub slope: f64,
    pub ci: f64,
    /// Per grid time: sup over starting points of `log E[exp(...)]`.
    pub sup_log: Vec<(f64, f64)>,
    pub clip_count: usize,
    /// `slope + ci < 0`.
    pub ssp_verdict: bool,
}

/// Least-squares slope of `log E[exp(-1/2 int alpha - int beta dl)]` over a
/// time grid, maximized over the starting set.
#[allow(clippy::too_many_arguments)]
pub fn ssp_rate(
    model: &ManifoldModel,
    alpha: &InteriorWeight,
    beta: &BoundaryWeight,
    x0_set: &[DVector<f64>],
    t_grid: &[f64],
    n_paths: usize,
    dt: f64,
    seed: u64,
) -> Result<SspReport> {
    if t_grid.len() < 4 {
        return Err(Error::Argument("time grid needs at least 4 points".into()));
    }
    if x0_set.is_empty() {
        return Err(Error::Argument("empty starting set".into()));
    }
    let mut sup_log: Vec<f64> = vec![f64::NEG_INFINITY; t_grid.len()];
    let mut sup_sigma: Vec<f64> = vec![0.0; t_grid.len()];
    let mut actual_t: Vec<f64> = t_grid.to_vec();
    let mut clip_count = 0usize;
    for (i, x0) in x0_set.iter().enumerate() {
        let (reports, clips) = exponential_functional_grid(
            model,
            alpha,
            beta,
            x0,
            t_grid,
            n_paths,
            dt,
            seed.wrapping_add(i as u64),
        )?;
        clip_count += clips;
        for (k, rep) in reports.iter().enumerate() {
            actual_t[k] = rep.t;
            let v = rep.scalar();
            if v <= 0.0 {
                return Err(Error::Input("nonpositive functional mean".into()));
            }
            let lv = v.ln();
            if lv > sup_log[k] {
                sup_log[k] = lv;
                sup_sigma[k] = rep.stderr[0] / v; // delta method
            }
        }
    }
    // weighted least squares for the slope of sup_log against t
    let w: Vec<f64> = sup_sigma
        .iter()
        .map(|s| 1.0 / (s * s).max(1e-12))
        .collect();
    let sw: f64 = w.iter().sum();
    let swt: f64 = w.iter().zip(&actual_t).map(|(w, t)| w * t).sum();
    let swy: f64 = w.iter().zip(&sup_log).map(|(w, y)| w * y).sum();
    let tbar = swt / sw;
    let ybar = swy / sw;
    let mut num = 0.0;
    let mut den = 0.0;
    for ((wk, &t), &y) in w.iter().zip(&actual_t).zip(&sup_log) {
        num += wk * (t - tbar) * (y - ybar);
        den += wk * (t - tbar) * (t - tbar);
    }
    let slope = num / den;
    let se_slope = (1.0 / den).sqrt();
    let ci = 1.96 * se_slope;
    Ok(SspReport {
        slope,
        ci,
        sup_log: actual_t.iter().cloned().zip(sup_log).collect(),
        clip_count,
        ssp_verdict: slope + ci < 0.0,
    })
}

/// Truncated integral of the exponential functional with a tail fit.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ThetaReport {
    pub value: f64,
    pub tail_rate: f64,
    pub tail_mass: f64,
    pub finite_verdict: bool,
    pub integrand: Vec<(f64, f64)>,
    pub clip_count: usize,
}

/// Trapezoid integral over `[0, t_max]` of
/// `E[exp(-1/2 int r_(q) ds - int rho_(q) dl)]`, with an exponential tail
/// extrapolation fitted on the last half of the grid.
#[allow(clippy::too_many_arguments)]
pub fn theta_integral(
    model: &ManifoldModel,
    q: usize,
    x0: &DVector<f64>,
    t_max: f64,
    n_grid: usize,
    n_paths: usize,
    dt: f64,
    seed: u64,
) -> Result<ThetaReport> {
    if t_max <= 0.0 || n_grid < 8 {
        return Err(Error::Argument("need t_max > 0 and >= 8 grid points".into()));
    }
    let t_grid: Vec<f64> = (1..=n_grid).map(|k| k as f64 * t_max / n_grid as f64).collect();
    let alpha = InteriorWeight::RqMin(q);
    let beta = if q >= 1 && q <= model.dim - 1 {
        BoundaryWeight::RhoQ(q)
    } else {
        BoundaryWeight::Zero
    };
    let (reports, clip_count) =
        exponential_functional_grid(model, &alpha, &beta, x0, &t_grid, n_paths, dt, seed)?;
    let g: Vec<f64> = reports.iter().map(|r| r.scalar()).collect();
    let actual_t: Vec<f64> = reports.iter().map(|r| r.t).collect();
    // trapezoid with g(0) = 1 over the actual recorded times
    let mut acc = Kahan::default();
    let mut prev = (0.0, 1.0);
    for (&t, &v) in actual_t.iter().zip(&g) {
        acc.add(0.5 * (prev.1 + v) * (t - prev.0));
        prev = (t, v);
    }
    // exponential tail fit over the last half
    let half = n_grid / 2;
    let (ts, ys): (Vec<f64>, Vec<f64>) = actual_t[half..]
        .iter()
        .cloned()
        .zip(g[half..].iter().map(|v| v.max(1e-300).ln()))
        .unzip();
    let tbar = ts.iter().sum::<f64>() / ts.len() as f64;
    let ybar = ys.iter().sum::<f64>() / ys.len() as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for (t, y) in ts.iter().zip(ys.iter()) {
        num += (t - tbar) * (y - ybar);
        den += (t - tbar) * (t - tbar);
    }
    let rate = num / den;
    let finite_verdict = rate < 0.0;
    let tail_mass = if finite_verdict {
        g.last().unwrap() / (-rate)
    } else {
        f64::INFINITY
    };
    Ok(ThetaReport {
        value: acc.value(),
        tail_rate: rate,
        tail_mass,
        finite_verdict,
        integrand: actual_t.into_iter().zip(g).collect(),
        clip_count,
    })
}

/// Coupled-seed semigroup domination report.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DominationReport {
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub stderr: f64,
    pub pass: bool,
}

/// Verify `|E[M^t omega0(u^t)]| <= C(n,q) e^{-t r_(q)/2} E[|omega0(x^t)|]`
/// on matched paths; requires `rho_(q) >= 0` on sampled boundary points.
#[allow(clippy::too_many_arguments)]
pub fn domination_check(
    model: &ManifoldModel,
    q: usize,
    omega0: &dyn FormField,
    x0: &DVector<f64>,
    t_grid: &[f64],
    n_paths: usize,
    dt: f64,
    seed: u64,
) -> Result<Vec<DominationReport>> {
    if q < 1 || q > model.dim - 1 {
        return Err(Error::Argument("domination needs 1 <= q <= n-1".into()));
    }
    // hypothesis check on sampled boundary points
    if model.has_boundary() {
        let mut rng = PathRng::new(stable_hash64(&[b"domination-witness"]), 0);
        for _ in 0..256 {
            let p = sample_boundary_point(model, &mut rng);
            let rho = model.rho_q_at(&p, q)?;
            if rho < 0.0 {
                return Err(Error::Precondition(format!(
                    "rho_({q}) = {rho:.6} < 0 at sampled boundary point {p:?}"
                )));
            }
        }
    }
    let r_lower = model.r_q_at(x0, q)?; // constant on the catalog
    let grid = fk_grid(
        model,
        omega0,
        x0,
        None,
        q,
        FunctionalMode::Projected,
        t_grid,
        n_paths,
        dt,
        seed,
        false,
    )?;
    let c_nq = binomial(model.dim, q) as f64;
    let mut out = Vec::with_capacity(t_grid.len());
    for k in 0..t_grid.len() {
        let lhs = grid.fk[k].norm();
        let scalar = &grid.abs0[k];
        let rhs = c_nq * (-0.5 * r_lower * t_grid[k]).exp() * scalar.scalar();
        let lhs_se: f64 = grid.fk[k].stderr.iter().map(|s| s * s).sum::<f64>().sqrt();
        let stderr = (lhs_se.powi(2)
            + (c_nq * (-0.5 * r_lower * t_grid[k]).exp() * scalar.stderr[0]).powi(2))
        .sqrt();
        let margin = rhs - lhs;
        out.push(DominationReport {
            t: t_grid[k],
            lhs,
            rhs,
            margin,
            stderr,
            pass: margin >= -2.0 * stderr,
        });
    }
    Ok(out)
}

fn sample_boundary_point(model: &ManifoldModel, rng: &mut PathRng) -> DVector<f64> {
    use crate::geometry::ModelKind::*;
    let n = model.dim;
    match model.kind {
        EuclideanHalfspace => {
            let mut x = DVector::from_fn(n, |_, _| rng.normal());
            x[n - 1] = 0.0;
            x
        }
        EuclideanSlab => {
            let w = model.param("width", 1.0);
            let mut x = DVector::from_fn(n, |_, _| rng.normal());
            x[n - 1] = if rng.uniform_co() < 0.5 { 0.0 } else { w };
            x
        }
        EuclideanBall => {
            let r0 = model.param("r0", 1.0);
            let mut x = DVector::from_fn(n, |_, _| rng.normal());
            x *= r0 / x.norm();
            x
        }
        SphereCap => {
            let th0 = model.param("theta0", 1.0);
            let mut x = DVector::from_fn(n, |_, _| rng.normal());
            x *= (th0 / 2.0).tan() / x.norm();
            x
        }
        HyperbolicTube => {
            let r = model.param("r", 0.8);
            let mut x = DVector::from_fn(n, |_, _| rng.normal());
            let t = x.rows(1, n - 1).norm();
            for i in 1..n {
                x[i] *= r / t;
            }
            x
        }
        _ => DVector::zeros(n),
    }
}

/// Occupation target set.
pub enum OccupationSet {
    ChartBall { center: DVector<f64>, radius: f64 },
    BoundaryBand { depth: f64 },
}

impl OccupationSet {
    fn contains(&self, model: &ManifoldModel, x: &DVector<f64>) -> bool {
        match self {
            OccupationSet::ChartBall { center, radius } => (x - center).norm() <= *radius,
            OccupationSet::BoundaryBand { depth } => match model.boundary_gap(x) {
                Some((d, _)) => d <= *depth,
                None => false,
            },
        }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct OccupationReport {
    pub t_grid: Vec<f64>,
    pub occupation: Vec<f64>,
    /// Relative increments over the last two doublings of the grid tail.
    pub rel_increments: (f64, f64),
    pub transient: bool,
}

/// Mean occupation time of the target set up to each grid time; the
/// transience indicator requires the relative increments over the last two
/// doublings (grid tail `[T/4, T/2, T]`) to both fall below 0.2.
#[allow(clippy::too_many_arguments)]
pub fn occupation_diagnostic(
    model: &ManifoldModel,
    x0: &DVector<f64>,
    set: &OccupationSet,
    t_grid: &[f64],
    n_paths: usize,
    dt: f64,
    seed: u64,
) -> Result<OccupationReport> {
    check_min_paths(n_paths)?;
    if t_grid.len() < 3 {
        return Err(Error::Argument("occupation grid needs >= 3 times".into()));
    }
    let record_steps = grid_steps(t_grid, dt)?;
    let t_max = *record_steps.last().unwrap() as f64 * dt;
    let rows: Result<Vec<Vec<f64>>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let mut rng = PathRng::new(seed, p);
            let mut occ = 0.0;
            let mut out = Vec::with_capacity(record_steps.len());
            let mut next = 0usize;
            walk(model, x0, None, t_max, dt, &mut rng, |ev| {
                if set.contains(model, ev.x) {
                    occ += dt;
                }
                while next < record_steps.len() && ev.step + 1 == record_steps[next] {
                    out.push(occ);
                    next += 1;
                }
            })?;
            Ok(out)
        })
        .collect();
    let rows = rows?;
    let m = t_grid.len();
    let mut occupation = vec![0.0; m];
    for (k, occ) in occupation.iter_mut().enumerate() {
        let mut acc = Kahan::default();
        for r in &rows {
            acc.add(r[k]);
        }
        *occ = acc.value() / n_paths as f64;
    }
    let a = occupation[m - 3];
    let b = occupation[m - 2];
    let c = occupation[m - 1];
    let rel1 = (b - a) / a.max(1e-300);
    let rel2 = (c - b) / b.max(1e-300);
    Ok(OccupationReport {
        t_grid: t_grid.to_vec(),
        occupation,
        rel_increments: (rel1, rel2),
        transient: rel1 < 0.2 && rel2 < 0.2,
    })
}
