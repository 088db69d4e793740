//! The multiplicative functional along a reflecting path.
//!
//! Interior steps damp the form coefficients by `exp(-R_q dt / 2)` with the
//! curvature endomorphism expressed in the moving frame; on this catalog the
//! endomorphism is the constant scalar `q (n - q) c`, so the interior factor
//! is exact. Boundary local-time increments apply, in penalized mode,
//! `exp(-(A_q + (1/eps) Pi_nor) dl)`, and in projected mode
//! `exp(-A_q dl) Pi_tan`, realizing the annihilation of normal components in
//! the vanishing-penalty limit.
//!
//! Boundary operators are conjugated into a frame re-orthonormalized against
//! the metric at the touch point, which keeps the spectrum of the conjugated
//! shape operator exactly equal to the principal curvatures there; the
//! pathwise norm bound then holds with no discretization leakage.

use crate::development::{PathSample, StepEvent};
use crate::error::{Error, Result};
use crate::form_algebra::{binomial, derivation_matrix, projections, symmetry_defect};
use crate::geometry::{inv_sqrt_spd, ManifoldModel};
use nalgebra::{DMatrix, DVector};

/// Evolution mode of the functional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FunctionalMode {
    /// Penalized boundary condition with parameter `eps > 0`.
    Eps(f64),
    /// Projected limit: annihilates normal components at every touch.
    Projected,
}

/// The functional at one time point.
#[derive(Debug, Clone)]
pub struct FunctionalMatrix {
    pub q: usize,
    pub mat: DMatrix<f64>,
    pub mode: FunctionalMode,
}

/// Matrix exponential by scaling and squaring with a Taylor core.
pub fn matrix_exp(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm = a.abs().max() * n as f64;
    let mut k = 0u32;
    let mut scale = 1.0;
    while norm * scale > 0.5 {
        scale *= 0.5;
        k += 1;
    }
    let b = a * scale;
    let mut result = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for j in 1..=24 {
        term = &term * &b / (j as f64);
        result += &term;
        if term.abs().max() < 1e-18 {
            break;
        }
    }
    for _ in 0..k {
        result = &result * &result;
    }
    result
}

/// Per-step driver of the functional for one `(model, q, mode)` triple.
pub struct FunctionalEvolver<'m> {
    pub model: &'m ManifoldModel,
    pub q: usize,
    pub mode: FunctionalMode,
    /// (1/2) q (n - q) c: interior decay rate (constant on this catalog).
    interior_rate: f64,
    dim_q: usize,
}

impl<'m> FunctionalEvolver<'m> {
    pub fn new(model: &'m ManifoldModel, q: usize, mode: FunctionalMode) -> Result<Self> {
        let n = model.dim;
        if q > n {
            return Err(Error::Argument(format!(
                "form degree {q} exceeds dimension {n}"
            )));
        }
        if let FunctionalMode::Eps(e) = mode {
            if e <= 0.0 {
                return Err(Error::Argument("eps must be positive".into()));
            }
        }
        let c = model.constant_curvature();
        Ok(FunctionalEvolver {
            model,
            q,
            mode,
            interior_rate: 0.5 * q as f64 * (n - q) as f64 * c,
            dim_q: binomial(n, q),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim_q
    }

    pub fn identity(&self) -> DMatrix<f64> {
        DMatrix::identity(self.dim_q, self.dim_q)
    }

    /// Apply the factor of one step (interior damping, then the boundary
    /// factor when the step carried local time).
    pub fn apply_step(
        &self,
        m: &mut DMatrix<f64>,
        dt: f64,
        frame: &DMatrix<f64>,
        dl: f64,
        touch: Option<&DVector<f64>>,
    ) -> Result<()> {
        if self.interior_rate != 0.0 {
            *m *= (-self.interior_rate * dt).exp();
        }
        if dl > 0.0 {
            let p = touch.ok_or_else(|| {
                Error::Argument("positive local time without a touch point".into())
            })?;
            let (a_frame, nu_frame) = self.boundary_ops_in_frame(frame, p)?;
            self.apply_boundary(m, &a_frame, &nu_frame, dl)?;
        }
        Ok(())
    }

    /// Shape operator and inward normal at touch point `p`, conjugated into
    /// the path frame after re-orthonormalizing it against the metric at `p`.
    fn boundary_ops_in_frame(
        &self,
        frame: &DMatrix<f64>,
        p: &DVector<f64>,
    ) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let bd = self.model.boundary_data_at(p)?;
        let h = self.model.metric_unchecked(p);
        let gram = frame.transpose() * &h * frame;
        let f = frame * inv_sqrt_spd(&gram);
        let hf = &h * &f;
        let mut a = f.transpose() * &h * &bd.shape_operator * &f;
        a = (&a + a.transpose()) * 0.5;
        let mut nu = hf.transpose() * &bd.normal;
        let norm = nu.norm();
        nu /= norm;
        Ok((a, nu))
    }

    fn apply_boundary(
        &self,
        m: &mut DMatrix<f64>,
        a_frame: &DMatrix<f64>,
        nu_frame: &DVector<f64>,
        dl: f64,
    ) -> Result<()> {
        debug_assert!(symmetry_defect(a_frame) < 1e-9);
        let (tan, nor) = projections(nu_frame, self.q)?;
        let a_zero = a_frame.abs().max() == 0.0;
        match self.mode {
            FunctionalMode::Eps(eps) => {
                if a_zero {
                    // exp(-(dl/eps) Pi_nor) = I + (e^{-dl/eps} - 1) Pi_nor
                    let decay = (-dl / eps).exp() - 1.0;
                    let correction = &*m * &nor.mat * decay;
                    *m += correction;
                } else {
                    let a_q = derivation_matrix(a_frame, self.q)?;
                    let gen = &a_q.mat + &nor.mat / eps;
                    *m *= matrix_exp(&(-gen * dl));
                }
            }
            FunctionalMode::Projected => {
                if !a_zero {
                    let a_q = derivation_matrix(a_frame, self.q)?;
                    *m *= matrix_exp(&(-a_q.mat * dl));
                }
                *m *= &tan.mat;
            }
        }
        Ok(())
    }

    /// Streaming form used by the estimators.
    pub fn apply_event(&self, m: &mut DMatrix<f64>, dt: f64, ev: &StepEvent<'_>) -> Result<()> {
        self.apply_step(m, dt, ev.frame, ev.dl, ev.touch)
    }

    /// Apply only the boundary factor of one touch event (the interior
    /// scalar is tracked separately by callers that exploit its constancy).
    pub fn apply_boundary_event(
        &self,
        m: &mut DMatrix<f64>,
        frame: &DMatrix<f64>,
        dl: f64,
        touch: &DVector<f64>,
    ) -> Result<()> {
        let (a_frame, nu_frame) = self.boundary_ops_in_frame(frame, touch)?;
        self.apply_boundary(m, &a_frame, &nu_frame, dl)
    }

    /// Interior decay rate `(1/2) q (n - q) c`.
    pub fn interior_rate(&self) -> f64 {
        self.interior_rate
    }
}

/// Functional along a stored path, one matrix per state (the first is the
/// identity).
pub fn evolve_functional(
    path: &PathSample,
    model: &ManifoldModel,
    q: usize,
    mode: FunctionalMode,
) -> Result<Vec<FunctionalMatrix>> {
    if model.dim != path.dim {
        return Err(Error::Argument("path/model dimension mismatch".into()));
    }
    let ev = FunctionalEvolver::new(model, q, mode)?;
    let mut out = Vec::with_capacity(path.states.len());
    let mut m = ev.identity();
    out.push(FunctionalMatrix {
        q,
        mat: m.clone(),
        mode,
    });
    for w in path.states.windows(2) {
        let (prev, cur) = (&w[0], &w[1]);
        let dt = cur.t - prev.t;
        ev.apply_step(&mut m, dt, &cur.frame, cur.dl, cur.touch.as_ref())?;
        out.push(FunctionalMatrix {
            q,
            mat: m.clone(),
            mode,
        });
    }
    Ok(out)
}

/// Scalar comparison functional
/// `exp(-1/2 int r_(q) ds - int rho_(q) dl)` along the path, one value per
/// state, by left-endpoint quadrature.
pub fn bound_functional(path: &PathSample, model: &ManifoldModel, q: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(path.states.len());
    let mut exponent = 0.0;
    out.push(1.0);
    for w in path.states.windows(2) {
        let (prev, cur) = (&w[0], &w[1]);
        let dt = cur.t - prev.t;
        let r_q = model.r_q_at(&prev.x, q)?;
        exponent -= 0.5 * r_q * dt;
        if cur.dl > 0.0 {
            if let Some(p) = &cur.touch {
                let rho_q = if q >= 1 && q <= model.dim - 1 {
                    model.rho_q_at(p, q)?
                } else {
                    0.0
                };
                exponent -= rho_q * cur.dl;
            }
        }
        out.push(exponent.exp());
    }
    Ok(out)
}

/// Terminal-time deviation between penalized and projected evolutions for a
/// decreasing sequence of penalties. Returns one Frobenius-norm deviation
/// per epsilon.
pub fn eps_convergence_probe(
    path: &PathSample,
    model: &ManifoldModel,
    q: usize,
    eps_seq: &[f64],
) -> Result<Vec<f64>> {
    for w in eps_seq.windows(2) {
        if w[1] >= w[0] {
            return Err(Error::Argument("eps sequence must be decreasing".into()));
        }
    }
    let proj = evolve_functional(path, model, q, FunctionalMode::Projected)?;
    let m_proj = &proj.last().expect("nonempty path").mat;
    let mut out = Vec::with_capacity(eps_seq.len());
    for &eps in eps_seq {
        let pen = evolve_functional(path, model, q, FunctionalMode::Eps(eps))?;
        let m_eps = &pen.last().expect("nonempty path").mat;
        out.push((m_eps - m_proj).norm());
    }
    Ok(out)
}

/// Spectral (operator) norm of a small matrix.
pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .singular_values()
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::development::sample_path;
    use crate::geometry::ModelKind;
    use std::collections::BTreeMap;

    fn model(kind: ModelKind, dim: usize) -> ManifoldModel {
        ManifoldModel::new(kind, dim, BTreeMap::new()).unwrap()
    }

    fn vecn(vals: &[f64]) -> DVector<f64> {
        DVector::from_vec(vals.to_vec())
    }

    #[test]
    fn matrix_exp_agrees_with_scalar_and_nilpotent_cases() {
        let a = DMatrix::from_diagonal(&vecn(&[0.3, -1.2, 2.0]));
        let e = matrix_exp(&a);
        for i in 0..3 {
            let expect = a[(i, i)].exp();
            assert!((e[(i, i)] - expect).abs() < 1e-13 * expect.max(1.0));
        }
        let mut nil = DMatrix::zeros(2, 2);
        nil[(0, 1)] = 3.0;
        let e = matrix_exp(&nil);
        assert!((e[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((e[(0, 1)] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn flat_full_space_functional_is_identity() {
        let m = model(ModelKind::EuclideanSpace, 3);
        let path = sample_path(&m, &vecn(&[0.0, 0.0, 0.0]), None, 0.5, 1e-2, 1, 0).unwrap();
        for q in 0..=3usize {
            let ms = evolve_functional(&path, &m, q, FunctionalMode::Projected).unwrap();
            for fm in &ms {
                let id = DMatrix::identity(fm.mat.nrows(), fm.mat.ncols());
                assert!((&fm.mat - id).abs().max() < 1e-14);
            }
        }
    }

    #[test]
    fn constant_curvature_reduction_is_exact() {
        // boundaryless constant curvature: M^t = e^{-q (n-q) c t / 2} I
        let m = model(ModelKind::Sphere, 3);
        let path = sample_path(&m, &vecn(&[0.1, 0.0, 0.0]), None, 0.5, 1e-3, 2, 0).unwrap();
        let q = 1;
        let ms = evolve_functional(&path, &m, q, FunctionalMode::Projected).unwrap();
        let last = ms.last().unwrap();
        let t = path.states.last().unwrap().t;
        let expect = (-0.5 * (q * (3 - q)) as f64 * t).exp();
        let id = DMatrix::identity(3, 3);
        assert!(
            (&last.mat - id * expect).abs().max() < 1e-12,
            "constant-curvature reduction"
        );
    }

    #[test]
    fn halfspace_projected_kills_normal_column() {
        let m = model(ModelKind::EuclideanHalfspace, 3);
        // start on the boundary so local time accrues immediately
        let path = sample_path(&m, &vecn(&[0.0, 0.0, 0.0]), None, 0.2, 1e-3, 3, 1).unwrap();
        assert!(path.states.last().unwrap().ltime > 0.0);
        let ms = evolve_functional(&path, &m, 1, FunctionalMode::Projected).unwrap();
        let last = &ms.last().unwrap().mat;
        // column acting on the e^3 (normal) component must vanish
        for i in 0..3 {
            assert!(last[(i, 2)].abs() < 1e-12);
        }
        // tangential columns stay exactly identity (A = 0, R = 0)
        assert!((last[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((last[(1, 1)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn projected_mode_annihilates_normal_projection_after_touch() {
        let m = model(ModelKind::EuclideanBall, 3);
        let path = sample_path(&m, &vecn(&[0.97, 0.0, 0.0]), None, 0.1, 1e-3, 11, 0).unwrap();
        let ms = evolve_functional(&path, &m, 1, FunctionalMode::Projected).unwrap();
        for (k, st) in path.states.iter().enumerate() {
            if st.dl > 0.0 {
                let p = st.touch.as_ref().unwrap();
                let bd = m.boundary_data_at(p).unwrap();
                let h = m.metric_unchecked(p);
                let gram = st.frame.transpose() * &h * &st.frame;
                let f = &st.frame * inv_sqrt_spd(&gram);
                let mut nu = (&h * &f).transpose() * &bd.normal;
                nu /= nu.norm();
                let (_, nor) = projections(&nu, 1).unwrap();
                let prod = &ms[k].mat * &nor.mat;
                assert!(
                    prod.abs().max() < 1e-10,
                    "M Pi_nor != 0 after a touch (step {k})"
                );
            }
        }
    }

    #[test]
    fn multiplicativity_on_frozen_path() {
        let m = model(ModelKind::SphereCap, 3);
        let path = sample_path(&m, &vecn(&[0.3, 0.1, 0.0]), None, 0.4, 1e-3, 5, 2).unwrap();
        let q = 1;
        let ms = evolve_functional(&path, &m, q, FunctionalMode::Projected).unwrap();
        // split at an intermediate state and evolve the tail separately
        let mid = path.states.len() / 2;
        let tail = PathSample {
            states: path.states[mid..].to_vec(),
            dt: path.dt,
            seed: path.seed,
            path_index: path.path_index,
            model_id: path.model_id.clone(),
            dim: path.dim,
        };
        let tail_ms = evolve_functional(&tail, &m, q, FunctionalMode::Projected).unwrap();
        let recombined = &ms[mid].mat * &tail_ms.last().unwrap().mat;
        let direct = &ms.last().unwrap().mat;
        assert!(
            (recombined - direct).abs().max() < 1e-12,
            "multiplicativity violated"
        );
    }

    #[test]
    fn norm_bound_dominates_functional() {
        // |M^t| <= bound * (1 + 10 dt) along every state, several models
        for (kind, x0) in [
            (ModelKind::EuclideanBall, vecn(&[0.9, 0.0, 0.0])),
            (ModelKind::SphereCap, vecn(&[0.45, 0.1, 0.0])),
            (ModelKind::HyperbolicTube, vecn(&[0.0, 0.7, 0.0])),
        ] {
            let m = model(kind, 3);
            let dt = 1e-3;
            for q in 1..=2usize {
                for pi in 0..4u64 {
                    let path = sample_path(&m, &x0, None, 0.5, dt, 21, pi).unwrap();
                    let ms = evolve_functional(&path, &m, q, FunctionalMode::Projected).unwrap();
                    let bounds = bound_functional(&path, &m, q).unwrap();
                    for (fm, b) in ms.iter().zip(bounds.iter()) {
                        let norm = operator_norm(&fm.mat);
                        assert!(
                            norm <= b * (1.0 + 10.0 * dt),
                            "norm {norm} exceeds bound {b} on {kind:?} q={q}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn tube_functional_respects_constant_curvature_bound() {
        // |M^t| <= exp(2 (n-2) t / 2 - int rho_(2) dl) within per-step slack
        let n = 4;
        let m = model(ModelKind::HyperbolicTube, n);
        let path = sample_path(&m, &vecn(&[0.0, 0.5, 0.0, 0.0]), None, 0.3, 1e-3, 8, 0).unwrap();
        let q = 2;
        let ms = evolve_functional(&path, &m, q, FunctionalMode::Projected).unwrap();
        let bounds = bound_functional(&path, &m, q).unwrap();
        // r_(2) = -2 (n-2) on hyperbolic space
        let r2 = m.r_q_at(&path.states[0].x, 2).unwrap();
        assert_eq!(r2, -2.0 * (n as f64 - 2.0));
        for (k, (fm, b)) in ms.iter().zip(bounds.iter()).enumerate() {
            let norm = operator_norm(&fm.mat);
            assert!(norm <= b * (1.0 + 1e-6 * (k as f64 + 1.0)));
        }
    }

    #[test]
    fn eps_probe_decreases_and_vanishes_off_boundary() {
        let m = model(ModelKind::EuclideanHalfspace, 3);
        // far path: never touches
        let far = sample_path(&m, &vecn(&[0.0, 0.0, 40.0]), None, 0.2, 1e-3, 6, 0).unwrap();
        assert_eq!(far.states.last().unwrap().ltime, 0.0);
        let dev = eps_convergence_probe(&far, &m, 1, &[1.0, 0.1, 0.01]).unwrap();
        for d in dev {
            assert_eq!(d, 0.0);
        }

        // boundary path: deviations decrease in eps
        let near = sample_path(&m, &vecn(&[0.0, 0.0, 0.0]), None, 0.2, 1e-3, 6, 1).unwrap();
        assert!(near.states.last().unwrap().ltime > 0.0);
        let dev = eps_convergence_probe(&near, &m, 1, &[1.0, 0.1, 0.01]).unwrap();
        assert!(dev[0] > dev[1] && dev[1] > dev[2], "deviations {dev:?}");
    }

    #[test]
    fn eps_probe_small_at_tight_penalty() {
        let m = model(ModelKind::EuclideanHalfspace, 2);
        let mut worst: f64 = 0.0;
        for pi in 0..100u64 {
            let path = sample_path(&m, &vecn(&[0.0, 0.0]), None, 0.25, 1e-4, 77, pi).unwrap();
            let dev = eps_convergence_probe(&path, &m, 1, &[1e-3]).unwrap();
            worst = worst.max(dev[0]);
        }
        assert!(worst < 1e-2, "max deviation {worst}");
    }
}
