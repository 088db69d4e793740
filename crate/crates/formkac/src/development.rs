//! Horizontal reflecting Brownian motion on the model catalog.
//!
//! Interior motion is stochastic development: a chart Euler step with
//! geodesic (Christoffel) correction driven by `frame * sqrt(dt) * noise`,
//! with the frame parallel-transported along the step by one fourth-order
//! integrator step and re-orthonormalized through the metric polar
//! decomposition.
//!
//! Boundary handling works in the normal coordinate. Each step draws the
//! minimum of the Brownian bridge between the signed boundary gaps of the
//! two endpoints; the Skorokhod local-time increment is the positive part of
//! minus that minimum and the endpoint is pushed back inside by exactly that
//! amount. On the half-line this reproduces the joint law of reflecting
//! Brownian motion and its boundary local time at the grid times, which is
//! what pins the local-time normalization (`E[l^t] = sqrt(2t/pi)` from a
//! boundary start). Touch events are exactly the steps with `dl > 0`.

use crate::error::{Error, Result};
use crate::geometry::{inv_sqrt_spd, ManifoldModel};
use crate::rng::PathRng;
use nalgebra::{DMatrix, DVector};

/// State of one path at a grid time.
#[derive(Debug, Clone)]
pub struct PathState {
    /// Chart coordinates.
    pub x: DVector<f64>,
    /// Columns form an h-orthonormal tangent frame.
    pub frame: DMatrix<f64>,
    /// Cumulative boundary local time.
    pub ltime: f64,
    /// Elapsed time.
    pub t: f64,
    /// Local-time increment of the step that produced this state.
    pub dl: f64,
    /// Boundary point touched during that step, if any.
    pub touch: Option<DVector<f64>>,
}

impl PathState {
    pub fn initial(model: &ManifoldModel, x0: &DVector<f64>, frame0: Option<&DMatrix<f64>>) -> Result<Self> {
        let frame = match frame0 {
            Some(f) => {
                let h = model.metric_at(x0)?;
                let gram = f.transpose() * &h * f;
                let defect = (&gram - DMatrix::identity(model.dim, model.dim))
                    .abs()
                    .max();
                if defect > 1e-6 {
                    return Err(Error::Argument(format!(
                        "initial frame is not h-orthonormal (defect {defect:.2e})"
                    )));
                }
                f.clone()
            }
            None => model.canonical_frame_at(x0)?,
        };
        Ok(PathState {
            x: x0.clone(),
            frame,
            ltime: 0.0,
            t: 0.0,
            dl: 0.0,
            touch: None,
        })
    }
}

/// A discretized path.
#[derive(Debug, Clone)]
pub struct PathSample {
    pub states: Vec<PathState>,
    pub dt: f64,
    pub seed: u64,
    pub path_index: u64,
    pub model_id: String,
    pub dim: usize,
}

/// Reusable workspace for the stepping loop.
pub struct Scratch {
    gamma: Vec<DMatrix<f64>>,
    v: DVector<f64>,
    k: [DMatrix<f64>; 4],
    ftmp: DMatrix<f64>,
}

impl Scratch {
    pub fn new(n: usize) -> Self {
        Scratch {
            gamma: vec![DMatrix::zeros(n, n); n],
            v: DVector::zeros(n),
            k: [
                DMatrix::zeros(n, n),
                DMatrix::zeros(n, n),
                DMatrix::zeros(n, n),
                DMatrix::zeros(n, n),
            ],
            ftmp: DMatrix::zeros(n, n),
        }
    }
}

/// `(Gamma[v, F])^i_a = Gamma^i_{jk} v^j F^k_a`, written into `out`.
fn christoffel_contract(
    gamma: &[DMatrix<f64>],
    v: &DVector<f64>,
    f: &DMatrix<f64>,
    out: &mut DMatrix<f64>,
) {
    let n = v.len();
    for i in 0..n {
        for a in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                let gij = gamma[i].row(j);
                let mut inner = 0.0;
                for k in 0..n {
                    inner += gij[k] * f[(k, a)];
                }
                s += v[j] * inner;
            }
            out[(i, a)] = s;
        }
    }
}

/// Advance `(x, frame)` by one step. Returns `(dl, touch point)`.
///
/// `noise` must hold `n` standard normals and `bridge_u` a uniform in
/// `(0, 1]` used for the boundary bridge-minimum draw.
pub fn step_in_place(
    model: &ManifoldModel,
    x: &mut DVector<f64>,
    frame: &mut DMatrix<f64>,
    dt: f64,
    noise: &[f64],
    bridge_u: f64,
    scratch: &mut Scratch,
) -> Result<(f64, Option<DVector<f64>>)> {
    let n = model.dim;
    if dt <= 0.0 {
        return Err(Error::Argument("dt must be positive".into()));
    }
    let sdt = dt.sqrt();
    // v = frame * (sqrt(dt) * noise)
    for i in 0..n {
        let mut s = 0.0;
        for a in 0..n {
            s += frame[(i, a)] * noise[a];
        }
        scratch.v[i] = s * sdt;
    }

    let gap_before = model.boundary_distance_only(x);

    let flat = model.is_flat_chart();
    if flat {
        *x += &scratch.v;
    } else if model.kind == crate::geometry::ModelKind::Sphere {
        // exact exponential map and parallel transport through the round
        // embedding; the stereographic chart-Euler step overshoots near the
        // antipode, the embedded geodesic cannot
        sphere_exact_step(x, frame, &scratch.v);
    } else {
        // geodesic Euler: dx = v - 0.5 Gamma[v, v]
        model.christoffel_into(x, &mut scratch.gamma);
        let mut dx = scratch.v.clone();
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                for k in 0..n {
                    s += scratch.gamma[i][(j, k)] * scratch.v[j] * scratch.v[k];
                }
            }
            dx[i] -= 0.5 * s;
        }
        // one RK4 step of frame transport along the chart segment
        let x0 = x.clone();
        let half = &x0 + &dx * 0.5;
        let full = &x0 + &dx;
        if !chart_closure_ok(model, &half) || !chart_closure_ok(model, &full) {
            return Err(Error::StepFailure(format!(
                "step left the chart near {x0:?}"
            )));
        }
        christoffel_contract(&scratch.gamma, &dx, frame, &mut scratch.k[0]);
        scratch.k[0].neg_mut();

        model.christoffel_into(&half, &mut scratch.gamma);
        scratch.ftmp.copy_from(frame);
        scratch.ftmp += &scratch.k[0] * 0.5;
        let ftmp = scratch.ftmp.clone();
        christoffel_contract(&scratch.gamma, &dx, &ftmp, &mut scratch.k[1]);
        scratch.k[1].neg_mut();

        scratch.ftmp.copy_from(frame);
        scratch.ftmp += &scratch.k[1] * 0.5;
        let ftmp = scratch.ftmp.clone();
        christoffel_contract(&scratch.gamma, &dx, &ftmp, &mut scratch.k[2]);
        scratch.k[2].neg_mut();

        model.christoffel_into(&full, &mut scratch.gamma);
        scratch.ftmp.copy_from(frame);
        scratch.ftmp += &scratch.k[2];
        let ftmp = scratch.ftmp.clone();
        christoffel_contract(&scratch.gamma, &dx, &ftmp, &mut scratch.k[3]);
        scratch.k[3].neg_mut();

        *frame += &scratch.k[0] * (1.0 / 6.0);
        *frame += &scratch.k[1] * (2.0 / 6.0);
        *frame += &scratch.k[2] * (2.0 / 6.0);
        *frame += &scratch.k[3] * (1.0 / 6.0);

        *x += dx;
    }

    // boundary handling in the normal coordinate
    let mut dl = 0.0;
    let mut touch: Option<DVector<f64>> = None;
    if let Some(a) = gap_before {
        let b = model
            .boundary_distance_only(x)
            .expect("boundary model keeps reporting a gap");
        // bridge minimum between gaps a (>= 0) and b over time dt
        let disc = (a - b) * (a - b) - 2.0 * dt * bridge_u.ln();
        let m = 0.5 * ((a + b) - disc.sqrt());
        if m < 0.0 {
            dl = -m;
            let g_new = b + dl;
            let (moved, p) = model.place_at_gap(x, g_new)?;
            *x = moved;
            touch = Some(p);
        } else if b < 0.0 {
            // numerically possible only through roundoff at b ~ 0
            let (moved, p) = model.place_at_gap(x, 0.0)?;
            *x = moved;
            touch = Some(p);
        }
    } else if !chart_closure_ok(model, x) {
        return Err(Error::StepFailure(format!("left chart of {model}")));
    }

    if !flat {
        // re-orthonormalize through the metric polar decomposition
        let h = model.metric_unchecked(x);
        let gram = frame.transpose() * &h * &*frame;
        let corr = inv_sqrt_spd(&gram);
        let fixed = &*frame * corr;
        frame.copy_from(&fixed);
    }
    Ok((dl, touch))
}

/// Exact unit-sphere step in stereographic coordinates: embed, move along
/// the geodesic with tangent `v` (chart components), parallel-transport the
/// frame columns, and pull back.
fn sphere_exact_step(x: &mut DVector<f64>, frame: &mut DMatrix<f64>, v: &DVector<f64>) {
    let n = x.len();
    let r2 = x.norm_squared();
    let lam = 2.0 / (1.0 + r2);

    // embedding P = (lam x, lam - 1) and isometric pushforward
    let embed_point = |y: &DVector<f64>| -> (DVector<f64>, f64) {
        let r2 = y.norm_squared();
        let lam = 2.0 / (1.0 + r2);
        let mut p = DVector::zeros(n + 1);
        for i in 0..n {
            p[i] = lam * y[i];
        }
        p[n] = lam - 1.0;
        (p, lam)
    };
    let push = |y: &DVector<f64>, lam: f64, w: &DVector<f64>| -> DVector<f64> {
        let dlam = -lam * lam * y.dot(w);
        let mut out = DVector::zeros(n + 1);
        for i in 0..n {
            out[i] = lam * w[i] + dlam * y[i];
        }
        out[n] = dlam;
        out
    };

    let (p, _) = embed_point(x);
    let vv = push(x, lam, v);
    let theta = vv.norm();
    if theta < 1e-300 {
        return;
    }
    let vhat = &vv / theta;
    let p_new = &p * theta.cos() + &vhat * theta.sin();

    // parallel transport along the geodesic: the (P, vhat) plane rotates,
    // the orthogonal complement is fixed
    let transport = |w: &DVector<f64>| -> DVector<f64> {
        let a = vhat.dot(w);
        w - &vhat * a + (&vhat * theta.cos() - &p * theta.sin()) * a
    };

    // pull back to the chart at the new point
    let denom = 1.0 + p_new[n];
    let mut x_new = DVector::zeros(n);
    for i in 0..n {
        x_new[i] = p_new[i] / denom;
    }
    let pull = |w: &DVector<f64>| -> DVector<f64> {
        let mut out = DVector::zeros(n);
        for i in 0..n {
            out[i] = w[i] / denom - p_new[i] * w[n] / (denom * denom);
        }
        out
    };
    for a in 0..n {
        let col = frame.column(a).clone_owned();
        let w = transport(&push(x, lam, &col));
        let back = pull(&w);
        frame.set_column(a, &back);
    }
    *x = x_new;
}

/// Chart-closure membership (boundary overshoot is handled separately).
fn chart_closure_ok(model: &ManifoldModel, x: &DVector<f64>) -> bool {
    use crate::geometry::ModelKind::*;
    match model.kind {
        HyperbolicSpace => x[model.dim - 1] > 0.0,
        _ => true,
    }
}

/// One public development step with explicit noise.
pub fn develop_step(
    model: &ManifoldModel,
    state: &PathState,
    dt: f64,
    noise: &[f64],
    bridge_u: f64,
) -> Result<PathState> {
    if noise.len() != model.dim {
        return Err(Error::Argument(format!(
            "noise has length {}, expected {}",
            noise.len(),
            model.dim
        )));
    }
    let mut scratch = Scratch::new(model.dim);
    let mut x = state.x.clone();
    let mut frame = state.frame.clone();
    let (dl, touch) = step_in_place(model, &mut x, &mut frame, dt, noise, bridge_u, &mut scratch)?;
    Ok(PathState {
        x,
        frame,
        ltime: state.ltime + dl,
        t: state.t + dt,
        dl,
        touch,
    })
}

/// Step event passed to streaming observers.
pub struct StepEvent<'a> {
    pub step: usize,
    pub t: f64,
    pub x: &'a DVector<f64>,
    pub frame: &'a DMatrix<f64>,
    pub ltime: f64,
    pub dl: f64,
    pub touch: Option<&'a DVector<f64>>,
}

/// Drive one path to time `t_max`, invoking the observer after every step.
/// On a step failure the step is retried as two half-steps (fresh noise),
/// recursively up to four levels.
pub fn walk<F>(
    model: &ManifoldModel,
    x0: &DVector<f64>,
    frame0: Option<&DMatrix<f64>>,
    t_max: f64,
    dt: f64,
    rng: &mut PathRng,
    mut on_step: F,
) -> Result<PathState>
where
    F: FnMut(&StepEvent<'_>),
{
    let n = model.dim;
    let init = PathState::initial(model, x0, frame0)?;
    let mut x = init.x;
    let mut frame = init.frame;
    let mut ltime = 0.0;
    let mut scratch = Scratch::new(n);
    let n_steps = (t_max / dt).ceil() as usize;
    let has_boundary = model.has_boundary();
    let mut noise = vec![0.0; n];
    for step in 0..n_steps {
        rng.fill_normals(&mut noise);
        let u = if has_boundary { rng.uniform_oc() } else { 1.0 };
        let result = step_in_place(model, &mut x, &mut frame, dt, &noise, u, &mut scratch);
        let (dl, touch) = match result {
            Ok(r) => r,
            Err(Error::StepFailure(_)) => {
                substep(model, &mut x, &mut frame, dt, rng, &mut scratch, 0)?
            }
            Err(e) => return Err(e),
        };
        ltime += dl;
        let t = (step + 1) as f64 * dt;
        on_step(&StepEvent {
            step,
            t,
            x: &x,
            frame: &frame,
            ltime,
            dl,
            touch: touch.as_ref(),
        });
    }
    Ok(PathState {
        x,
        frame,
        ltime,
        t: n_steps as f64 * dt,
        dl: 0.0,
        touch: None,
    })
}

/// Retry a failed step as two half-steps with fresh noise.
fn substep(
    model: &ManifoldModel,
    x: &mut DVector<f64>,
    frame: &mut DMatrix<f64>,
    dt: f64,
    rng: &mut PathRng,
    scratch: &mut Scratch,
    depth: usize,
) -> Result<(f64, Option<DVector<f64>>)> {
    if depth >= 4 {
        return Err(Error::StepFailure(
            "step failure persisted after four halvings".into(),
        ));
    }
    let n = model.dim;
    let has_boundary = model.has_boundary();
    let mut total_dl = 0.0;
    let mut last_touch = None;
    let mut noise = vec![0.0; n];
    for _ in 0..2 {
        rng.fill_normals(&mut noise);
        let u = if has_boundary { rng.uniform_oc() } else { 1.0 };
        match step_in_place(model, x, frame, dt / 2.0, &noise, u, scratch) {
            Ok((dl, touch)) => {
                total_dl += dl;
                if touch.is_some() {
                    last_touch = touch;
                }
            }
            Err(Error::StepFailure(_)) => {
                let (dl, touch) = substep(model, x, frame, dt / 2.0, rng, scratch, depth + 1)?;
                total_dl += dl;
                if touch.is_some() {
                    last_touch = touch;
                }
            }
            Err(e) => return Err(e),
        }
    }
    Ok((total_dl, last_touch))
}

/// Simulate and store a full path. Deterministic in `(seed, path_index)`.
pub fn sample_path(
    model: &ManifoldModel,
    x0: &DVector<f64>,
    frame0: Option<&DMatrix<f64>>,
    t_max: f64,
    dt: f64,
    seed: u64,
    path_index: u64,
) -> Result<PathSample> {
    let mut rng = PathRng::new(seed, path_index);
    let init = PathState::initial(model, x0, frame0)?;
    let mut states = Vec::with_capacity((t_max / dt).ceil() as usize + 1);
    states.push(init);
    walk(model, x0, frame0, t_max, dt, &mut rng, |ev| {
        states.push(PathState {
            x: ev.x.clone(),
            frame: ev.frame.clone(),
            ltime: ev.ltime,
            t: ev.t,
            dl: ev.dl,
            touch: ev.touch.cloned(),
        });
    })?;
    Ok(PathSample {
        states,
        dt,
        seed,
        path_index,
        model_id: model.kind.id().to_string(),
        dim: model.dim,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ModelKind};
    use std::collections::BTreeMap;

    fn model(kind: ModelKind, dim: usize) -> ManifoldModel {
        ManifoldModel::new(kind, dim, BTreeMap::new()).unwrap()
    }

    fn vecn(vals: &[f64]) -> DVector<f64> {
        DVector::from_vec(vals.to_vec())
    }

    #[test]
    fn flat_steps_are_exact_increments() {
        let m = model(ModelKind::EuclideanSpace, 3);
        let st = PathState::initial(&m, &vecn(&[0.0, 0.0, 0.0]), None).unwrap();
        let noise = [0.3, -1.2, 0.7];
        let dt = 0.01;
        let next = develop_step(&m, &st, dt, &noise, 0.5).unwrap();
        for i in 0..3 {
            assert_eq!(next.x[i], dt.sqrt() * noise[i]);
        }
        assert_eq!(next.frame, DMatrix::identity(3, 3));
        assert_eq!(next.ltime, 0.0);
    }

    #[test]
    fn frame_orthonormality_is_restored_each_step() {
        for kind in [ModelKind::SphereCap, ModelKind::HyperbolicTube, ModelKind::HyperbolicSpace] {
            let m = model(kind, 3);
            let x0 = match kind {
                ModelKind::HyperbolicSpace => vecn(&[0.0, 0.0, 1.0]),
                ModelKind::HyperbolicTube => vecn(&[0.0, 0.2, 0.1]),
                _ => vecn(&[0.1, 0.0, 0.05]),
            };
            let mut rng = PathRng::new(2024, 0);
            let mut worst: f64 = 0.0;
            walk(&m, &x0, None, 0.5, 1e-3, &mut rng, |ev| {
                let h = m.metric_unchecked(ev.x);
                let gram = ev.frame.transpose() * &h * ev.frame;
                let defect = (gram - DMatrix::identity(3, 3)).abs().max();
                worst = worst.max(defect);
            })
            .unwrap();
            assert!(worst < 1e-10, "orthonormality drift {worst:.2e} on {kind:?}");
        }
    }

    #[test]
    fn halfline_local_time_calibration_small() {
        // E[l^t] = sqrt(2 t / pi) for reflecting BM started on the boundary;
        // moderate scale here, full scale in the acceptance suite
        let m = model(ModelKind::EuclideanHalfspace, 2);
        let x0 = vecn(&[0.0, 0.0]);
        let t = 0.5;
        let dt = 1e-3;
        let n_paths = 20_000u64;
        let mut sum = 0.0;
        for p in 0..n_paths {
            let mut rng = PathRng::new(99, p);
            let end = walk(&m, &x0, None, t, dt, &mut rng, |_| {}).unwrap();
            sum += end.ltime;
        }
        let mean = sum / n_paths as f64;
        let expect = (2.0 * t / std::f64::consts::PI).sqrt();
        let rel = (mean - expect).abs() / expect;
        assert!(rel < 0.02, "E[l] = {mean}, expected {expect}, rel {rel:.3}");
    }

    #[test]
    fn ltime_zero_without_boundary_contact() {
        let m = model(ModelKind::EuclideanHalfspace, 2);
        let x0 = vecn(&[0.0, 50.0]); // far from the boundary
        let mut rng = PathRng::new(7, 0);
        let end = walk(&m, &x0, None, 1.0, 1e-3, &mut rng, |_| {}).unwrap();
        assert_eq!(end.ltime, 0.0);
    }

    #[test]
    fn flat_quadratic_variation() {
        // E|x_T - x_0|^2 = n T within 3% at 1e4 paths
        let m = model(ModelKind::EuclideanSpace, 3);
        let x0 = vecn(&[0.0, 0.0, 0.0]);
        let t = 1.0;
        let n_paths = 10_000u64;
        let mut sum = 0.0;
        for p in 0..n_paths {
            let mut rng = PathRng::new(123, p);
            let end = walk(&m, &x0, None, t, 1e-2, &mut rng, |_| {}).unwrap();
            sum += end.x.norm_squared();
        }
        let mean = sum / n_paths as f64;
        let expect = 3.0;
        assert!(
            (mean - expect).abs() / expect < 0.03,
            "quadratic variation {mean} vs {expect}"
        );
    }

    #[test]
    fn occupation_near_boundary_scales_linearly() {
        // fraction of time in {x_n < eps} matches the half-line closed form
        // int_0^T P(|N(0,t)| <= eps) dt / T within 5%
        let m = model(ModelKind::EuclideanHalfspace, 2);
        let x0 = vecn(&[0.0, 0.0]);
        let t = 1.0;
        let dt = 1e-3;
        let n_paths = 4_000u64;
        for eps in [0.1, 0.2] {
            let mut occ = 0.0;
            for p in 0..n_paths {
                let mut rng = PathRng::new(4242, p);
                walk(&m, &x0, None, t, dt, &mut rng, |ev| {
                    if ev.x[1] < eps {
                        occ += dt;
                    }
                })
                .unwrap();
            }
            let mean = occ / n_paths as f64;
            // oracle by quadrature of erf
            let steps = 4000;
            let mut oracle = 0.0;
            for k in 0..steps {
                let tt = (k as f64 + 0.5) * t / steps as f64;
                let p_in = erf_approx(eps / (2.0 * tt).sqrt());
                oracle += p_in * t / steps as f64;
            }
            let rel = (mean - oracle).abs() / oracle;
            assert!(rel < 0.05, "eps={eps}: occupation {mean} vs {oracle}, rel {rel:.3}");
        }
    }

    fn erf_approx(x: f64) -> f64 {
        // Abramowitz-Stegun 7.1.26
        let sign = x.signum();
        let x = x.abs();
        let t = 1.0 / (1.0 + 0.3275911 * x);
        let y = 1.0
            - (((((1.061405429 * t - 1.453152027) * t) + 1.421413741) * t - 0.284496736) * t
                + 0.254829592)
                * t
                * (-x * x).exp();
        sign * y
    }

    #[test]
    fn sphere_cap_chart_constraint() {
        // paths stay inside the cap chart; frame stays orthonormal
        let m = model(ModelKind::SphereCap, 3);
        let x0 = vecn(&[0.05, 0.0, 0.0]);
        let mut rng = PathRng::new(31337, 0);
        walk(&m, &x0, None, 1.0, 1e-3, &mut rng, |ev| {
            assert!(m.in_chart_domain(ev.x), "escaped cap chart: {:?}", ev.x);
        })
        .unwrap();
    }

    #[test]
    fn paths_are_deterministic_in_seed_and_index() {
        let m = model(ModelKind::HyperbolicTube, 3);
        let x0 = vecn(&[0.0, 0.1, 0.2]);
        let a = sample_path(&m, &x0, None, 0.3, 1e-3, 5, 17).unwrap();
        let b = sample_path(&m, &x0, None, 0.3, 1e-3, 5, 17).unwrap();
        assert_eq!(a.states.len(), b.states.len());
        for (sa, sb) in a.states.iter().zip(b.states.iter()) {
            assert_eq!(sa.x, sb.x);
            assert_eq!(sa.frame, sb.frame);
            assert_eq!(sa.ltime, sb.ltime);
        }
        let c = sample_path(&m, &x0, None, 0.3, 1e-3, 5, 18).unwrap();
        assert_ne!(a.states.last().unwrap().x, c.states.last().unwrap().x);
    }

    #[test]
    fn slab_folding_matches_quotient_statistics() {
        // reflecting BM on [0, a] is the fold of reflecting BM on [0, 2a]:
        // compare E[l at the lower face] and occupation of the lower half
        let mut params = BTreeMap::new();
        params.insert("width".to_string(), 1.0);
        let narrow = ManifoldModel::new(ModelKind::EuclideanSlab, 2, params).unwrap();
        let mut params2 = BTreeMap::new();
        params2.insert("width".to_string(), 2.0);
        let wide = ManifoldModel::new(ModelKind::EuclideanSlab, 2, params2).unwrap();

        let t = 1.0;
        let dt = 1e-3;
        let n_paths = 8_000u64;
        let x0 = vecn(&[0.0, 0.3]);

        let mut l_narrow_lower = 0.0;
        let mut occ_narrow = 0.0;
        for p in 0..n_paths {
            let mut rng = PathRng::new(2718, p);
            walk(&narrow, &x0, None, t, dt, &mut rng, |ev| {
                if ev.dl > 0.0 {
                    if let Some(tp) = ev.touch {
                        if tp[1] < 0.5 {
                            l_narrow_lower += ev.dl;
                        }
                    }
                }
                if ev.x[1] < 0.5 {
                    occ_narrow += dt;
                }
            })
            .unwrap();
        }

        // wide slab folded: x -> min(x, 2 - x); lower face of the fold is
        // {0, 2}, occupation of the folded lower half is {x<0.5 or x>1.5}
        let mut l_wide_folded = 0.0;
        let mut occ_wide = 0.0;
        for p in 0..n_paths {
            let mut rng = PathRng::new(577, p);
            walk(&wide, &x0, None, t, dt, &mut rng, |ev| {
                if ev.dl > 0.0 {
                    l_wide_folded += ev.dl; // both faces fold onto x = 0
                }
                let folded = ev.x[1].min(2.0 - ev.x[1]);
                if folded < 0.5 {
                    occ_wide += dt;
                }
            })
            .unwrap();
        }

        let l_n = l_narrow_lower / n_paths as f64;
        let l_w = l_wide_folded / n_paths as f64;
        let o_n = occ_narrow / n_paths as f64;
        let o_w = occ_wide / n_paths as f64;
        assert!(
            (l_n - l_w).abs() / l_w < 0.06,
            "folded local time mismatch: {l_n} vs {l_w}"
        );
        assert!(
            (o_n - o_w).abs() / o_w < 0.04,
            "folded occupation mismatch: {o_n} vs {o_w}"
        );
    }
}
