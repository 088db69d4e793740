//! Config-driven experiment runner: dispatches the estimators and oracle
//! checks, writes results.csv and summary.json, and reports verdicts.

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::{Error, Result};
use crate::estimators::{
    domination_check, fk_grid, occupation_diagnostic, ssp_rate, theta_integral, BoundaryWeight,
    InteriorWeight, OccupationSet,
};
use crate::form_algebra::{
    binomial, hodge_star_matrix, projections, r_q_min, weitzenbock_matrix, CurvatureTensor,
    FormBasis,
};
use crate::functional::FunctionalMode;
use crate::geometry::{catalog, ManifoldModel, ModelKind};
use crate::oracles::{
    halfspace_evolve, hessian_identity_check, pinched_coercivity_check, ClosureFormField,
    FormField, KernelKind, ProductBumpForm, QuadSpec, ScalarField,
};
use crate::report::{
    write_results_csv, write_summary_json, ResultRow, RunSummary, Verdict,
    SUMMARY_SCHEMA_VERSION,
};
use crate::rng::PathRng;
use crate::spin::{
    boundary_projection, build_clifford, intertwine_certificate, spinor_fk_bound_check,
    ProjectionKind, SpinorProfile,
};
use nalgebra::{DMatrix, DVector};
use std::path::Path;

/// Outcome of one run, before exit-code mapping.
pub struct RunOutcome {
    pub summary: RunSummary,
    pub rows: Vec<ResultRow>,
}

/// Run an experiment and write `results.csv` + `summary.json` into
/// `out_dir`. `threads` bounds the worker pool (`None` keeps the global
/// default); reports are bitwise identical across thread counts.
pub fn run_experiment(
    config: &ExperimentConfig,
    out_dir: &Path,
    threads: Option<usize>,
) -> Result<RunOutcome> {
    config.validate()?;
    let started = std::time::Instant::now();
    let body = || -> Result<(Vec<ResultRow>, Vec<Verdict>, usize)> {
        match config.kind {
            ExperimentKind::Fk => run_fk(config, false),
            ExperimentKind::Bound => run_fk(config, true),
            ExperimentKind::Ssp => run_ssp(config),
            ExperimentKind::Theta => run_theta(config),
            ExperimentKind::Domination => run_domination(config),
            ExperimentKind::Occupation => run_occupation(config),
            ExperimentKind::IntegralIdentity => run_integral_identity(config),
            ExperimentKind::DistanceCoercivity => run_coercivity(config),
            ExperimentKind::Spinor => run_spinor(config),
            ExperimentKind::AlgebraSuite => run_algebra_suite(config),
        }
    };
    let (rows, verdicts, clip_count) = match threads {
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::Argument(format!("thread pool: {e}")))?;
            pool.install(body)?
        }
        None => body()?,
    };
    let all_pass = verdicts.iter().all(|v| v.pass);
    let summary = RunSummary {
        schema_version: SUMMARY_SCHEMA_VERSION,
        kind: config.kind.id().to_string(),
        model: config.model.clone().unwrap_or_else(|| "-".into()),
        dim: config.dim.unwrap_or(0),
        seed: config.seed(),
        n_paths: config.n_paths.unwrap_or(0),
        dt: config.dt.unwrap_or(0.0),
        wall_time_s: started.elapsed().as_secs_f64(),
        clip_count,
        verdicts,
        all_pass,
    };
    std::fs::create_dir_all(out_dir)?;
    write_results_csv(&out_dir.join("results.csv"), &rows)?;
    write_summary_json(&out_dir.join("summary.json"), &summary)?;
    Ok(RunOutcome { summary, rows })
}

fn fmt_x0(x0: &DVector<f64>) -> String {
    let parts: Vec<String> = x0.iter().map(|v| format!("{v}")).collect();
    parts.join(";")
}

/// Named initial-form registry.
pub fn build_form_field(
    name: &str,
    model: &ManifoldModel,
    q: usize,
    x0: &DVector<f64>,
    seed: u64,
) -> Result<Box<dyn FormField>> {
    let n = model.dim;
    let dim_q = binomial(n, q);
    match name {
        "constant" => Ok(Box::new(ClosureFormField {
            q,
            f: move |_: &DVector<f64>| DVector::from_element(dim_q, 1.0),
        })),
        "halfspace_bump" => {
            if q != 0 {
                return Err(Error::Config("halfspace_bump is a scalar field".into()));
            }
            Ok(Box::new(ClosureFormField {
                q: 0,
                f: move |x: &DVector<f64>| {
                    let s = x[x.len() - 1];
                    DVector::from_element(1, (-2.0 * (s - 1.0) * (s - 1.0)).exp())
                },
            }))
        }
        "halfspace_mixed" => {
            if q != 1 {
                return Err(Error::Config("halfspace_mixed is a one-form".into()));
            }
            Ok(Box::new(ClosureFormField {
                q: 1,
                f: move |x: &DVector<f64>| {
                    let s = x[x.len() - 1];
                    let mut v = DVector::zeros(x.len());
                    v[0] = (-2.0 * (s - 0.8) * (s - 0.8)).exp();
                    v[x.len() - 1] = s * (-s * s).exp();
                    v
                },
            }))
        }
        "gaussian_coeffs" => {
            let mut rng = PathRng::new(seed, u64::MAX);
            let amps: Vec<f64> = (0..dim_q).map(|_| rng.normal()).collect();
            let center = x0.clone();
            Ok(Box::new(ClosureFormField {
                q,
                f: move |x: &DVector<f64>| {
                    let env = (-(x - &center).norm_squared()).exp();
                    DVector::from_fn(amps.len(), |k, _| env * amps[k])
                },
            }))
        }
        other => Err(Error::Config(format!("unknown omega0 field '{other}'"))),
    }
}

/// Oracle for the half-space named fields: per component, the image-method
/// evolution (tangential components by the Neumann kernel, the normal
/// component by the Dirichlet kernel).
fn halfspace_oracle(
    name: &str,
    q: usize,
    n: usize,
    x0_height: f64,
    t: f64,
) -> Result<Option<Vec<f64>>> {
    let cutoff = x0_height + 14.0 * t.sqrt().max(1.0);
    match (name, q) {
        ("halfspace_bump", 0) => {
            let g = |s: f64| (-2.0 * (s - 1.0) * (s - 1.0)).exp();
            Ok(Some(vec![halfspace_evolve(
                KernelKind::Neumann,
                t,
                x0_height,
                &g,
                cutoff,
            )?]))
        }
        ("halfspace_mixed", 1) => {
            let g_tan = |s: f64| (-2.0 * (s - 0.8) * (s - 0.8)).exp();
            let g_nor = |s: f64| s * (-s * s).exp();
            let mut out = vec![0.0; n];
            out[0] = halfspace_evolve(KernelKind::Neumann, t, x0_height, &g_tan, cutoff)?;
            out[n - 1] = halfspace_evolve(KernelKind::Dirichlet, t, x0_height, &g_nor, cutoff)?;
            Ok(Some(out))
        }
        _ => Ok(None),
    }
}

fn run_fk(config: &ExperimentConfig, with_bound: bool) -> Result<(Vec<ResultRow>, Vec<Verdict>, usize)> {
    let model = config.build_model()?;
    let q = ExperimentConfig::require(config.q, "q")?;
    let x0 = config.x0_vector()?;
    let t_grid = config.t_grid.clone().unwrap();
    let n_paths = config.n_paths.unwrap();
    let dt = config.dt.unwrap();
    let seed = config.seed();
    let field_name = config.field("omega0").unwrap_or("gaussian_coeffs").to_string();
    let omega0 = build_form_field(&field_name, &model, q, &x0, seed)?;
    let tolerance = config.tolerance.unwrap_or(0.03);

    let grid = fk_grid(
        &model,
        omega0.as_ref(),
        &x0,
        None,
        q,
        FunctionalMode::Projected,
        &t_grid,
        n_paths,
        dt,
        seed,
        with_bound,
    )?;

    let basis = FormBasis::new(model.dim, q)?;
    let mut rows = Vec::new();
    let mut verdicts = Vec::new();
    let mut oracle_pass = true;
    let mut oracle_seen = false;
    let mut bound_pass = true;
    for (k, rep) in grid.fk.iter().enumerate() {
        let t = rep.t;
        let oracle = if config.oracle_compare && model.kind == ModelKind::EuclideanHalfspace {
            halfspace_oracle(&field_name, q, model.dim, x0[model.dim - 1], t)?
        } else {
            None
        };
        for c in 0..rep.value.len() {
            let mut row = ResultRow {
                kind: config.kind.id().into(),
                model: model.kind.id().into(),
                dim: model.dim.to_string(),
                q: q.to_string(),
                t: format!("{t}"),
                x0: fmt_x0(&x0),
                component: basis.label(c),
                value: ResultRow::num(rep.value[c]),
                stderr: ResultRow::num(rep.stderr[c]),
                ..Default::default()
            };
            if let Some(oracle) = &oracle {
                if oracle[c].abs() > 1e-12 {
                    let rel = (rep.value[c] - oracle[c]).abs() / oracle[c].abs();
                    row.oracle = ResultRow::num(oracle[c]);
                    row.rel_err = ResultRow::num(rel);
                    row.verdict = if rel < tolerance { "pass" } else { "fail" }.into();
                    oracle_seen = true;
                    if rel >= tolerance {
                        oracle_pass = false;
                    }
                }
            }
            rows.push(row);
        }
        if with_bound {
            let b = &grid.bound[k];
            let dominated = grid.fk[k].norm() <= b.scalar() + 2.0 * b.stderr[0];
            if !dominated {
                bound_pass = false;
            }
            rows.push(ResultRow {
                kind: "bound".into(),
                model: model.kind.id().into(),
                dim: model.dim.to_string(),
                q: q.to_string(),
                t: format!("{t}"),
                x0: fmt_x0(&x0),
                component: "|omega|".into(),
                value: ResultRow::num(b.scalar()),
                stderr: ResultRow::num(b.stderr[0]),
                extra: format!("estimate_norm={}", grid.fk[k].norm()),
                verdict: if dominated { "pass" } else { "fail" }.into(),
                ..Default::default()
            });
        }
    }
    if oracle_seen {
        verdicts.push(Verdict {
            name: "oracle_agreement".into(),
            pass: oracle_pass,
            detail: format!("rel err tolerance {tolerance}"),
        });
    }
    if with_bound {
        verdicts.push(Verdict {
            name: "pointwise_bound_dominates".into(),
            pass: bound_pass,
            detail: "bound >= |estimate| on matched seeds".into(),
        });
        verdicts.push(Verdict {
            name: "functional_norm_bound".into(),
            pass: grid.norm_violations == 0,
            detail: format!("{} per-path violations", grid.norm_violations),
        });
    }
    if verdicts.is_empty() {
        verdicts.push(Verdict {
            name: "completed".into(),
            pass: true,
            detail: "estimates computed".into(),
        });
    }
    Ok((rows, verdicts, 0))
}

fn interior_weight(config: &ExperimentConfig) -> Result<InteriorWeight> {
    match config.field("alpha").unwrap_or("r_q") {
        "r_q" => {
            let q = config.field_param("alpha_q", config.q.unwrap_or(1) as f64) as usize;
            Ok(InteriorWeight::RqMin(q))
        }
        "const" => Ok(InteriorWeight::Const(config.field_param("alpha_value", 0.0))),
        other => Err(Error::Config(format!("unknown alpha weight '{other}'"))),
    }
}

fn boundary_weight(config: &ExperimentConfig) -> Result<BoundaryWeight> {
    match config.field("beta").unwrap_or("zero") {
        "zero" => Ok(BoundaryWeight::Zero),
        "rho_q" => {
            let q = config.field_param("beta_q", config.q.unwrap_or(1) as f64) as usize;
            Ok(BoundaryWeight::RhoQ(q))
        }
        "const" => Ok(BoundaryWeight::Const(config.field_param("beta_value", 0.0))),
        other => Err(Error::Config(format!("unknown beta weight '{other}'"))),
    }
}

fn run_ssp(config: &ExperimentConfig) -> Result<(Vec<ResultRow>, Vec<Verdict>, usize)> {
    let model = config.build_model()?;
    let x0 = config.x0_vector()?;
    let t_grid = config.t_grid.clone().unwrap();
    let alpha = interior_weight(config)?;
    let beta = boundary_weight(config)?;
    let count = config.x0_dither_count.unwrap_or(1).max(1);
    let spacing = config.x0_dither_spacing.unwrap_or(0.0);
    let mut x0_set = Vec::with_capacity(count);
    for j in 0..count {
        let mut p = x0.clone();
        p[0] += j as f64 * spacing;
        x0_set.push(p);
    }
    let rep = ssp_rate(
        &model,
        &alpha,
        &beta,
        &x0_set,
        &t_grid,
        config.n_paths.unwrap(),
        config.dt.unwrap(),
        config.seed(),
    )?;
    let mut rows = Vec::new();
    for (t, y) in &rep.sup_log {
        rows.push(ResultRow {
            kind: "ssp".into(),
            model: model.kind.id().into(),
            dim: model.dim.to_string(),
            t: format!("{t}"),
            x0: fmt_x0(&x0),
            component: "sup_log_mean".into(),
            value: ResultRow::num(*y),
            ..Default::default()
        });
    }
    rows.push(ResultRow {
        kind: "ssp".into(),
        model: model.kind.id().into(),
        dim: model.dim.to_string(),
        component: "slope".into(),
        value: ResultRow::num(rep.slope),
        stderr: ResultRow::num(rep.ci / 1.96),
        extra: format!("clip_count={}", rep.clip_count),
        verdict: if rep.ssp_verdict { "ssp" } else { "not-ssp" }.into(),
        ..Default::default()
    });
    let verdicts = vec![Verdict {
        name: "ssp_rate".into(),
        pass: true,
        detail: format!(
            "slope {:.4} +- {:.4}, verdict {}",
            rep.slope,
            rep.ci,
            if rep.ssp_verdict { "ssp" } else { "not-ssp" }
        ),
    }];
    Ok((rows, verdicts, rep.clip_count))
}

fn run_theta(config: &ExperimentConfig) -> Result<(Vec<ResultRow>, Vec<Verdict>, usize)> {
    let model = config.build_model()?;
    let q = config.q.unwrap();
    let x0 = config.x0_vector()?;
    let rep = theta_integral(
        &model,
        q,
        &x0,
        config.t_max.unwrap(),
        config.n_grid.unwrap_or(32),
        config.n_paths.unwrap(),
        config.dt.unwrap(),
        config.seed(),
    )?;
    let mut rows = Vec::new();
    for (t, g) in &rep.integrand {
        rows.push(ResultRow {
            kind: "theta".into(),
            model: model.kind.id().into(),
            dim: model.dim.to_string(),
            q: q.to_string(),
            t: format!("{t}"),
            x0: fmt_x0(&x0),
            component: "integrand".into(),
            value: ResultRow::num(*g),
            ..Default::default()
        });
    }
    rows.push(ResultRow {
        kind: "theta".into(),
        model: model.kind.id().into(),
        dim: model.dim.to_string(),
        q: q.to_string(),
        x0: fmt_x0(&x0),
        component: "integral".into(),
        value: ResultRow::num(rep.value),
        extra: format!("tail_rate={} tail_mass={}", rep.tail_rate, rep.tail_mass),
        verdict: if rep.finite_verdict { "finite" } else { "infinite" }.into(),
        ..Default::default()
    });
    let pass = match config.field("expect") {
        Some("finite") => rep.finite_verdict,
        Some("infinite") => !rep.finite_verdict,
        _ => true,
    };
    let verdicts = vec![Verdict {
        name: "theta_tail".into(),
        pass,
        detail: format!(
            "truncated integral {:.4}, tail rate {:.4}, {}",
            rep.value,
            rep.tail_rate,
            if rep.finite_verdict { "finite" } else { "infinite" }
        ),
    }];
    Ok((rows, verdicts, rep.clip_count))
}

fn run_domination(config: &ExperimentConfig) -> Result<(Vec<ResultRow>, Vec<Verdict>, usize)> {
    let model = config.build_model()?;
    let q = config.q.unwrap();
    let x0 = config.x0_vector()?;
    let seed = config.seed();
    let field_name = config.field("omega0").unwrap_or("gaussian_coeffs").to_string();
    let omega0 = build_form_field(&field_name, &model, q, &x0, seed)?;
    let reports = domination_check(
        &model,
        q,
        omega0.as_ref(),
        &x0,
        config.t_grid.as_ref().unwrap(),
        config.n_paths.unwrap(),
        config.dt.unwrap(),
        seed,
    )?;
    let mut rows = Vec::new();
    let mut all_pass = true;
    for r in &reports {
        all_pass &= r.pass;
        rows.push(ResultRow {
            kind: "domination".into(),
            model: model.kind.id().into(),
            dim: model.dim.to_string(),
            q: q.to_string(),
            t: format!("{}", r.t),
            x0: fmt_x0(&x0),
            component: "margin".into(),
            value: ResultRow::num(r.margin),
            stderr: ResultRow::num(r.stderr),
            extra: format!("lhs={} rhs={}", r.lhs, r.rhs),
            verdict: if r.pass { "pass" } else { "fail" }.into(),
            ..Default::default()
        });
    }
    let verdicts = vec![Verdict {
        name: "semigroup_domination".into(),
        pass: all_pass,
        detail: format!("{} time points", reports.len()),
    }];
    Ok((rows, verdicts, 0))
}

fn run_occupation(config: &ExperimentConfig) -> Result<(Vec<ResultRow>, Vec<Verdict>, usize)> {
    let model = config.build_model()?;
    let x0 = config.x0_vector()?;
    let set = match config.field("set").unwrap_or("chart_ball") {
        "chart_ball" => OccupationSet::ChartBall {
            center: x0.clone(),
            radius: config.field_param("radius", 1.0),
        },
        "boundary_band" => OccupationSet::BoundaryBand {
            depth: config.field_param("depth", 1.0),
        },
        other => return Err(Error::Config(format!("unknown occupation set '{other}'"))),
    };
    let rep = occupation_diagnostic(
        &model,
        &x0,
        &set,
        config.t_grid.as_ref().unwrap(),
        config.n_paths.unwrap(),
        config.dt.unwrap(),
        config.seed(),
    )?;
    let mut rows = Vec::new();
    for (t, occ) in rep.t_grid.iter().zip(&rep.occupation) {
        rows.push(ResultRow {
            kind: "occupation".into(),
            model: model.kind.id().into(),
            dim: model.dim.to_string(),
            t: format!("{t}"),
            x0: fmt_x0(&x0),
            component: "occupation".into(),
            value: ResultRow::num(*occ),
            ..Default::default()
        });
    }
    rows.push(ResultRow {
        kind: "occupation".into(),
        model: model.kind.id().into(),
        dim: model.dim.to_string(),
        x0: fmt_x0(&x0),
        component: "rel_increments".into(),
        value: ResultRow::num(rep.rel_increments.0),
        stderr: ResultRow::num(rep.rel_increments.1),
        verdict: if rep.transient { "transient" } else { "recurrent" }.into(),
        ..Default::default()
    });
    let pass = match config.field("expect") {
        Some("transient") => rep.transient,
        Some("recurrent") => !rep.transient,
        _ => true,
    };
    let verdicts = vec![Verdict {
        name: "occupation_indicator".into(),
        pass,
        detail: format!(
            "rel increments {:.3}/{:.3}, {}",
            rep.rel_increments.0,
            rep.rel_increments.1,
            if rep.transient { "transient" } else { "recurrent" }
        ),
    }];
    Ok((rows, verdicts, 0))
}

fn run_integral_identity(config: &ExperimentConfig) -> Result<(Vec<ResultRow>, Vec<Verdict>, usize)> {
    let model = config.build_model()?;
    let q = config.q.unwrap();
    let n = model.dim;
    let seed = config.seed();
    let n_forms = config.n_forms.unwrap_or(20);
    let tolerance = config.tolerance.unwrap_or(1e-5);
    let fd_h = config.field_param("fd_h", 1e-3);
    let radius = config.field_param("support_radius", 0.45);
    let spec = QuadSpec {
        lo: DVector::from_element(n, -radius),
        hi: DVector::from_element(n, radius),
        cells: config.field_param("cells", 8.0) as usize,
        order: config.field_param("order", 8.0) as usize,
        fd_h,
    };
    let mut rows = Vec::new();
    let mut all_pass = true;
    let mut coarse_sum = 0.0;
    let mut fine_sum = 0.0;
    for k in 0..n_forms {
        let omega = ProductBumpForm::seeded(n, q, DVector::zeros(n), radius, seed + k as u64);
        let mut rng = PathRng::new(seed, 1_000 + k as u64);
        let mut qm = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = rng.normal();
                qm[(i, j)] = v;
                qm[(j, i)] = v;
            }
        }
        let a = DVector::from_fn(n, |_, _| rng.normal());
        let f = ScalarField::quadratic(qm, a);
        let fine = hessian_identity_check(&model, &f, &omega, &spec)?;
        // convergence order measured on a coarse halving pair where the
        // finite-difference truncation dominates the quadrature floor
        let mut spec_4h = spec.clone();
        spec_4h.fd_h = 4.0 * fd_h;
        let mut spec_8h = spec.clone();
        spec_8h.fd_h = 8.0 * fd_h;
        let mid = hessian_identity_check(&model, &f, &omega, &spec_4h)?;
        let coarse = hessian_identity_check(&model, &f, &omega, &spec_8h)?;
        let pass = fine.residual < tolerance;
        all_pass &= pass;
        coarse_sum += coarse.residual;
        fine_sum += mid.residual;
        rows.push(ResultRow {
            kind: "intfor".into(),
            model: model.kind.id().into(),
            dim: n.to_string(),
            q: q.to_string(),
            component: format!("pair_{k}"),
            value: ResultRow::num(fine.lhs),
            oracle: ResultRow::num(fine.rhs),
            rel_err: ResultRow::num(fine.residual),
            extra: format!("residual_4h={} residual_8h={}", mid.residual, coarse.residual),
            verdict: if pass { "pass" } else { "fail" }.into(),
            ..Default::default()
        });
    }
    let order = (coarse_sum / fine_sum).log2();
    let order_pass = order >= 1.8;
    rows.push(ResultRow {
        kind: "intfor".into(),
        model: model.kind.id().into(),
        dim: n.to_string(),
        q: q.to_string(),
        component: "convergence_order".into(),
        value: ResultRow::num(order),
        verdict: if order_pass { "pass" } else { "fail" }.into(),
        ..Default::default()
    });
    let verdicts = vec![
        Verdict {
            name: "identity_residuals".into(),
            pass: all_pass,
            detail: format!("{n_forms} pairs below {tolerance}"),
        },
        Verdict {
            name: "identity_order".into(),
            pass: order_pass,
            detail: format!("observed order {order:.2}"),
        },
    ];
    Ok((rows, verdicts, 0))
}

fn run_coercivity(config: &ExperimentConfig) -> Result<(Vec<ResultRow>, Vec<Verdict>, usize)> {
    let model = config.build_model()?;
    if model.kind != ModelKind::HyperbolicSpace {
        return Err(Error::Config(
            "coercivity check runs on the hyperbolic_space model".into(),
        ));
    }
    let p = config.q.unwrap();
    let n = model.dim;
    let kappa = config.field_param("kappa", 1.0);
    let seed = config.seed();
    let n_forms = config.n_forms.unwrap_or(20);
    let radius = config.field_param("support_radius", 0.3);
    let spec = QuadSpec {
        lo: DVector::from_fn(n, |d, _| if d == n - 1 { 1.0 - radius } else { -radius }),
        hi: DVector::from_fn(n, |d, _| if d == n - 1 { 1.0 + radius } else { radius }),
        cells: config.field_param("cells", 3.0) as usize,
        order: config.field_param("order", 8.0) as usize,
        fd_h: config.field_param("fd_h", 1e-3),
    };
    let d_list: Vec<f64> = match config.field("d_list") {
        Some(text) => text
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|_| Error::Config("field 'd_list' must be comma-separated reals".into()))?,
        None => vec![3.0, 5.0],
    };
    let centers: Vec<DVector<f64>> = d_list
        .iter()
        .map(|d| {
            let mut c = DVector::zeros(n);
            c[n - 1] = (-d).exp();
            c
        })
        .collect();
    let mut rows = Vec::new();
    let mut all_pass = true;
    for k in 0..n_forms {
        let center = DVector::from_fn(n, |d, _| if d == n - 1 { 1.0 } else { 0.0 });
        let omega = ProductBumpForm::seeded(n, p, center, radius, seed + 7_000 + k as u64);
        let result = pinched_coercivity_check(&model, kappa, &omega, &centers, &spec, 1.0)?;
        for (row, d_nominal) in result.iter().zip(&d_list) {
            let coth_d = 1.0 / row.d_min.tanh();
            let holds = row.lhs >= row.rhs;
            let within = row.constant >= row.asymptotic - 1e-12
                && row.constant <= row.asymptotic * coth_d + 1e-12;
            all_pass &= holds && within;
            rows.push(ResultRow {
                kind: "dx".into(),
                model: model.kind.id().into(),
                dim: n.to_string(),
                q: p.to_string(),
                component: format!("form_{k}_d{d_nominal}"),
                value: ResultRow::num(row.lhs),
                oracle: ResultRow::num(row.rhs),
                extra: format!(
                    "d_min={} constant={} asymptotic={} margin={}",
                    row.d_min,
                    row.constant,
                    row.asymptotic,
                    row.lhs - row.rhs
                ),
                verdict: if holds && within { "pass" } else { "fail" }.into(),
                ..Default::default()
            });
        }
    }
    let verdicts = vec![Verdict {
        name: "coercivity_bound".into(),
        pass: all_pass,
        detail: format!("{n_forms} bump forms at distances {d_list:?}"),
    }];
    Ok((rows, verdicts, 0))
}

fn run_spinor(config: &ExperimentConfig) -> Result<(Vec<ResultRow>, Vec<Verdict>, usize)> {
    let seed = config.seed();
    let t = config
        .t_grid
        .as_ref()
        .and_then(|g| g.first())
        .copied()
        .or(config.t_max)
        .unwrap();
    let height = config
        .x0
        .as_ref()
        .and_then(|v| v.last())
        .copied()
        .unwrap_or(0.5);
    let profile_name = config.field("profile").unwrap_or("gaussian");
    let profile = build_spinor_profile(profile_name)?;
    let rep = spinor_fk_bound_check(
        &profile,
        height,
        t,
        config.n_paths.unwrap(),
        config.dt.unwrap(),
        seed,
    )?;
    let rows = vec![ResultRow {
        kind: "spinor".into(),
        model: "euclidean_halfspace".into(),
        dim: "2".into(),
        t: format!("{t}"),
        x0: format!("{height}"),
        component: profile_name.into(),
        value: ResultRow::num(rep.lhs),
        oracle: ResultRow::num(rep.rhs),
        stderr: ResultRow::num(rep.stderr),
        extra: format!("margin={}", rep.margin),
        verdict: if rep.pass { "pass" } else { "fail" }.into(),
        ..Default::default()
    }];
    let verdicts = vec![Verdict {
        name: "spinor_bound".into(),
        pass: rep.pass,
        detail: format!("margin {:.5} +- {:.5}", rep.margin, rep.stderr),
    }];
    Ok((rows, verdicts, 0))
}

pub fn build_spinor_profile(name: &str) -> Result<SpinorProfile> {
    match name {
        "constant" => Ok(SpinorProfile {
            plus_amplitudes: vec![1.0],
            plus_profile: Box::new(|_| 1.0),
            minus_amplitudes: vec![0.0],
            minus_profile: Box::new(|_| 0.0),
        }),
        "gaussian" => Ok(SpinorProfile {
            plus_amplitudes: vec![1.0],
            plus_profile: Box::new(|s| (-(s - 1.0) * (s - 1.0)).exp()),
            minus_amplitudes: vec![0.0],
            minus_profile: Box::new(|_| 0.0),
        }),
        "mixed" => Ok(SpinorProfile {
            plus_amplitudes: vec![0.8, 0.3],
            plus_profile: Box::new(|s| (-(s - 0.6) * (s - 0.6) * 2.0).exp()),
            minus_amplitudes: vec![0.5],
            minus_profile: Box::new(|s| s * (-s * s).exp()),
        }),
        other => Err(Error::Config(format!("unknown spinor profile '{other}'"))),
    }
}

fn run_algebra_suite(config: &ExperimentConfig) -> Result<(Vec<ResultRow>, Vec<Verdict>, usize)> {
    let mut rows = Vec::new();
    let mut failures = 0usize;
    let tol = config.tolerance.unwrap_or(1e-12);
    let mut push = |name: String, residual: f64, tol: f64, failures: &mut usize| {
        let pass = residual < tol;
        if !pass {
            *failures += 1;
        }
        rows.push(ResultRow {
            kind: "algebra-suite".into(),
            component: name,
            value: ResultRow::num(residual),
            verdict: if pass { "pass" } else { "fail" }.into(),
            ..Default::default()
        });
    };

    // curvature endomorphism pinning on every catalog curvature
    for n in 2..=6usize {
        for &c in &[0.0, 1.0, -1.0] {
            let tensor = CurvatureTensor::constant_curvature(n, c);
            for q in 0..=n {
                let rq = weitzenbock_matrix(&tensor, q)?;
                let dim = binomial(n, q);
                let expect = DMatrix::identity(dim, dim) * (q as f64 * (n - q) as f64 * c);
                push(
                    format!("weitzenbock_const_n{n}_q{q}_c{c}"),
                    (&rq.mat - expect).abs().max(),
                    tol,
                    &mut failures,
                );
                if q == 1 {
                    let ric = tensor.ricci();
                    push(
                        format!("weitzenbock_ricci_n{n}_c{c}"),
                        (&rq.mat - ric).abs().max(),
                        tol,
                        &mut failures,
                    );
                }
                let s = hodge_star_matrix(n, q)?;
                let rnq = weitzenbock_matrix(&tensor, n - q)?;
                push(
                    format!("weitzenbock_duality_n{n}_q{q}_c{c}"),
                    (&s * &rq.mat - &rnq.mat * &s).abs().max(),
                    tol,
                    &mut failures,
                );
                push(
                    format!("r_q_min_n{n}_q{q}_c{c}"),
                    (r_q_min(&rq) - q as f64 * (n - q) as f64 * c).abs(),
                    tol,
                    &mut failures,
                );
            }
        }
        // fermionic relation with a seeded random unit normal
        let mut rng = PathRng::new(config.seed(), n as u64);
        let mut nu = DVector::from_fn(n, |_, _| rng.normal());
        nu /= nu.norm();
        for q in 0..=n {
            let (tan, nor) = projections(&nu, q)?;
            let dim = binomial(n, q);
            let id = DMatrix::identity(dim, dim);
            push(
                format!("fermionic_n{n}_q{q}"),
                (&tan.mat + &nor.mat - id).abs().max(),
                tol,
                &mut failures,
            );
        }
    }

    // spinor identities
    for n in 2..=6usize {
        let module = build_clifford(n)?;
        push(
            format!("clifford_relations_n{n}"),
            module.relation_residual(),
            tol,
            &mut failures,
        );
        let kinds: Vec<ProjectionKind> = if n % 2 == 0 {
            vec![ProjectionKind::Chirality, ProjectionKind::MitBag]
        } else {
            vec![ProjectionKind::MitBag]
        };
        for kind in kinds {
            let ops = boundary_projection(&module, n - 1, kind)?;
            push(
                format!("spin_projection_n{n}_{kind:?}"),
                ops.projection_residual(),
                tol,
                &mut failures,
            );
            let res = intertwine_certificate(&module, &ops, n - 1, 200, config.seed())?;
            push(
                format!("spin_intertwine_n{n}_{kind:?}"),
                res,
                tol,
                &mut failures,
            );
        }
    }

    let verdicts = vec![Verdict {
        name: "algebra_suite".into(),
        pass: failures == 0,
        detail: format!("{failures} failures"),
    }];
    Ok((rows, verdicts, 0))
}

/// Catalog table for the `list-models` command.
pub fn list_models_text() -> String {
    let mut out = String::new();
    out.push_str("id                   dims   boundary  curvature  parameters\n");
    for e in catalog() {
        let params: Vec<String> = e
            .params
            .iter()
            .map(|(k, v)| format!("{k}: {v}"))
            .collect();
        out.push_str(&format!(
            "{:<20} {:<6} {:<9} {:<10} {}\n",
            e.id,
            e.dims,
            if e.has_boundary { "yes" } else { "no" },
            e.curvature,
            if params.is_empty() {
                "-".to_string()
            } else {
                params.join("; ")
            }
        ));
        out.push_str(&format!("{:<20} chart: {}\n", "", e.chart_domain));
    }
    out
}

pub fn list_models_json() -> Result<String> {
    serde_json::to_string_pretty(&catalog()).map_err(|e| Error::Io(std::io::Error::other(e)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;

    #[test]
    fn algebra_suite_has_zero_failures() {
        let cfg = ExperimentConfig::from_str(
            "[experiment]\nkind = \"algebra-suite\"\nseed = 1\n",
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let outcome = run_experiment(&cfg, dir.path(), None).unwrap();
        assert!(outcome.summary.all_pass);
        assert!(dir.path().join("results.csv").exists());
        assert!(dir.path().join("summary.json").exists());
        let text = std::fs::read_to_string(dir.path().join("summary.json")).unwrap();
        assert!(text.contains("\"all_pass\": true"));
    }

    #[test]
    fn fk_run_with_oracle_comparison() {
        let cfg = ExperimentConfig::from_str(
            r#"
[experiment]
kind = "fk"
model = "euclidean_halfspace"
dim = 3
seed = 11
dt = 5e-4
n_paths = 8000
t_grid = [0.25]
q = 1
x0 = [0.0, 0.0, 0.5]
oracle_compare = true
tolerance = 0.08

[experiment.fields]
omega0 = "halfspace_mixed"
"#,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let outcome = run_experiment(&cfg, dir.path(), None).unwrap();
        assert!(outcome.summary.all_pass, "{:?}", outcome.summary.verdicts);
        let text = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
        assert!(text.lines().count() > 2);
    }

    #[test]
    fn reruns_are_byte_identical_across_thread_counts() {
        let cfg = ExperimentConfig::from_str(
            r#"
[experiment]
kind = "fk"
model = "euclidean_ball"
dim = 3
seed = 5
dt = 1e-3
n_paths = 400
t_grid = [0.1, 0.2]
q = 1
x0 = [0.3, 0.0, 0.0]

[experiment.fields]
omega0 = "gaussian_coeffs"
"#,
        )
        .unwrap();
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        run_experiment(&cfg, d1.path(), Some(1)).unwrap();
        run_experiment(&cfg, d2.path(), Some(2)).unwrap();
        let a = std::fs::read(d1.path().join("results.csv")).unwrap();
        let b = std::fs::read(d2.path().join("results.csv")).unwrap();
        assert_eq!(a, b, "results.csv differs across thread counts");
    }

    #[test]
    fn list_models_contains_catalog() {
        let text = list_models_text();
        assert!(text.contains("hyperbolic_tube"));
        assert!(text.contains("r: (0, inf)"));
        let json = list_models_json().unwrap();
        let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed.as_array().unwrap().len(), 8);
    }
}
