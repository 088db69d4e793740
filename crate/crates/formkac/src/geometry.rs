//! Catalog of model manifolds-with-boundary.
//!
//! Each model is covered by a single global chart and exposes its metric,
//! Christoffel symbols, curvature (all catalog members have constant
//! sectional curvature), signed distance to the boundary, and boundary data
//! (inward normal, shape operator, principal curvatures) in that chart.
//!
//! Sign convention: the shape operator is `A X = -grad_X nu` with `nu` the
//! inward unit normal, so the Euclidean ball has principal curvatures
//! `+1/r0`.

use crate::error::{Error, Result};
use crate::form_algebra::CurvatureTensor;
use nalgebra::{DMatrix, DVector};
use std::collections::BTreeMap;
use std::fmt;

/// Chart-scale relative tolerance for "on the boundary".
pub const BOUNDARY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    EuclideanSpace,
    EuclideanHalfspace,
    EuclideanSlab,
    EuclideanBall,
    Sphere,
    SphereCap,
    HyperbolicSpace,
    HyperbolicTube,
}

impl ModelKind {
    pub fn id(&self) -> &'static str {
        match self {
            ModelKind::EuclideanSpace => "euclidean_space",
            ModelKind::EuclideanHalfspace => "euclidean_halfspace",
            ModelKind::EuclideanSlab => "euclidean_slab",
            ModelKind::EuclideanBall => "euclidean_ball",
            ModelKind::Sphere => "sphere",
            ModelKind::SphereCap => "sphere_cap",
            ModelKind::HyperbolicSpace => "hyperbolic_space",
            ModelKind::HyperbolicTube => "hyperbolic_tube",
        }
    }

    pub fn all() -> &'static [ModelKind] {
        &[
            ModelKind::EuclideanSpace,
            ModelKind::EuclideanHalfspace,
            ModelKind::EuclideanSlab,
            ModelKind::EuclideanBall,
            ModelKind::Sphere,
            ModelKind::SphereCap,
            ModelKind::HyperbolicSpace,
            ModelKind::HyperbolicTube,
        ]
    }
}

/// Boundary data at a boundary point, in chart coordinates.
#[derive(Debug, Clone)]
pub struct BoundaryData {
    /// Inward unit normal (unit with respect to the model metric).
    pub normal: DVector<f64>,
    /// Shape operator as a chart-basis endomorphism, extended by `A nu = 0`.
    pub shape_operator: DMatrix<f64>,
    /// Eigenvalues of the shape operator on the boundary tangent space,
    /// sorted ascending.
    pub principal_curvatures: Vec<f64>,
}

/// One model geometry from the fixed catalog.
#[derive(Debug, Clone)]
pub struct ManifoldModel {
    pub kind: ModelKind,
    pub dim: usize,
    pub params: BTreeMap<String, f64>,
}

impl fmt::Display for ManifoldModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (dim {})", self.kind.id(), self.dim)?;
        for (k, v) in &self.params {
            write!(f, " {k}={v}")?;
        }
        Ok(())
    }
}

/// Catalog entry for `list-models`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CatalogEntry {
    pub id: &'static str,
    pub dims: &'static str,
    pub params: Vec<(&'static str, &'static str)>,
    pub chart_domain: &'static str,
    pub has_boundary: bool,
    pub curvature: f64,
}

pub fn catalog() -> Vec<CatalogEntry> {
    vec![
        CatalogEntry {
            id: "euclidean_space",
            dims: "2..=6",
            params: vec![],
            chart_domain: "R^n",
            has_boundary: false,
            curvature: 0.0,
        },
        CatalogEntry {
            id: "euclidean_halfspace",
            dims: "2..=6",
            params: vec![],
            chart_domain: "x_n >= 0",
            has_boundary: true,
            curvature: 0.0,
        },
        CatalogEntry {
            id: "euclidean_slab",
            dims: "2..=6",
            params: vec![("width", "(0, inf), default 1")],
            chart_domain: "0 <= x_n <= width",
            has_boundary: true,
            curvature: 0.0,
        },
        CatalogEntry {
            id: "euclidean_ball",
            dims: "2..=6",
            params: vec![("r0", "(0, inf), default 1")],
            chart_domain: "|x| <= r0",
            has_boundary: true,
            curvature: 0.0,
        },
        CatalogEntry {
            id: "sphere",
            dims: "2..=6",
            params: vec![],
            chart_domain: "R^n (stereographic, misses one point)",
            has_boundary: false,
            curvature: 1.0,
        },
        CatalogEntry {
            id: "sphere_cap",
            dims: "2..=6",
            params: vec![("theta0", "(0, 1.5], default 1: geodesic radius")],
            chart_domain: "2 atan|y| <= theta0 (stereographic)",
            has_boundary: true,
            curvature: 1.0,
        },
        CatalogEntry {
            id: "hyperbolic_space",
            dims: "2..=6",
            params: vec![],
            chart_domain: "x_n > 0 (upper half-space)",
            has_boundary: false,
            curvature: -1.0,
        },
        CatalogEntry {
            id: "hyperbolic_tube",
            dims: "2..=6",
            params: vec![("r", "(0, inf), default 0.8: tube radius")],
            chart_domain: "(s, w) with |w| <= r (Fermi coordinates)",
            has_boundary: true,
            curvature: -1.0,
        },
    ]
}

impl ManifoldModel {
    pub fn new(kind: ModelKind, dim: usize, params: BTreeMap<String, f64>) -> Result<Self> {
        if !(2..=6).contains(&dim) {
            return Err(Error::Argument(format!(
                "dimension {dim} outside supported range 2..=6"
            )));
        }
        let model = ManifoldModel { kind, dim, params };
        // parameter validation
        match kind {
            ModelKind::EuclideanSlab => {
                let w = model.param("width", 1.0);
                if w <= 0.0 {
                    return Err(Error::Argument("slab width must be positive".into()));
                }
            }
            ModelKind::EuclideanBall => {
                let r0 = model.param("r0", 1.0);
                if r0 <= 0.0 {
                    return Err(Error::Argument("ball radius must be positive".into()));
                }
            }
            ModelKind::SphereCap => {
                let th = model.param("theta0", 1.0);
                if !(th > 0.0 && th <= 1.5) {
                    return Err(Error::Argument(
                        "cap radius theta0 must lie in (0, 1.5]".into(),
                    ));
                }
            }
            ModelKind::HyperbolicTube => {
                let r = model.param("r", 0.8);
                if r <= 0.0 {
                    return Err(Error::Argument("tube radius must be positive".into()));
                }
            }
            _ => {}
        }
        Ok(model)
    }

    pub fn from_id(id: &str, dim: usize, params: BTreeMap<String, f64>) -> Result<Self> {
        let kind = ModelKind::all()
            .iter()
            .find(|k| k.id() == id)
            .copied()
            .ok_or_else(|| Error::Argument(format!("unknown model id '{id}'")))?;
        Self::new(kind, dim, params)
    }

    pub fn param(&self, name: &str, default: f64) -> f64 {
        self.params.get(name).copied().unwrap_or(default)
    }

    /// Constant sectional curvature of the model.
    pub fn constant_curvature(&self) -> f64 {
        match self.kind {
            ModelKind::Sphere | ModelKind::SphereCap => 1.0,
            ModelKind::HyperbolicSpace | ModelKind::HyperbolicTube => -1.0,
            _ => 0.0,
        }
    }

    pub fn has_boundary(&self) -> bool {
        matches!(
            self.kind,
            ModelKind::EuclideanHalfspace
                | ModelKind::EuclideanSlab
                | ModelKind::EuclideanBall
                | ModelKind::SphereCap
                | ModelKind::HyperbolicTube
        )
    }

    /// True when the chart metric is identically the identity matrix.
    pub fn is_flat_chart(&self) -> bool {
        matches!(
            self.kind,
            ModelKind::EuclideanSpace
                | ModelKind::EuclideanHalfspace
                | ModelKind::EuclideanSlab
                | ModelKind::EuclideanBall
        )
    }

    /// Characteristic chart length used for boundary tolerance bands.
    pub fn chart_scale(&self) -> f64 {
        match self.kind {
            ModelKind::EuclideanSlab => self.param("width", 1.0),
            ModelKind::EuclideanBall => self.param("r0", 1.0),
            ModelKind::SphereCap => self.param("theta0", 1.0),
            ModelKind::HyperbolicTube => self.param("r", 0.8),
            _ => 1.0,
        }
    }

    pub fn in_chart_domain(&self, x: &DVector<f64>) -> bool {
        if x.len() != self.dim {
            return false;
        }
        let n = self.dim;
        match self.kind {
            ModelKind::EuclideanSpace | ModelKind::Sphere => true,
            ModelKind::EuclideanHalfspace => x[n - 1] >= 0.0,
            ModelKind::EuclideanSlab => {
                let w = self.param("width", 1.0);
                x[n - 1] >= 0.0 && x[n - 1] <= w
            }
            ModelKind::EuclideanBall => x.norm() <= self.param("r0", 1.0),
            ModelKind::SphereCap => {
                2.0 * x.norm().atan() <= self.param("theta0", 1.0)
            }
            ModelKind::HyperbolicSpace => x[n - 1] > 0.0,
            ModelKind::HyperbolicTube => {
                x.rows(1, n - 1).norm() <= self.param("r", 0.8)
            }
        }
    }

    fn check_domain(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Argument(format!(
                "point has dimension {}, model has {}",
                x.len(),
                self.dim
            )));
        }
        if !self.in_chart_domain(x) {
            return Err(Error::Domain(format!("{x:?} not in chart of {self}")));
        }
        Ok(())
    }

    /// Metric matrix `h(x)` in chart coordinates.
    pub fn metric_at(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_domain(x)?;
        Ok(self.metric_unchecked(x))
    }

    pub(crate) fn metric_unchecked(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let n = self.dim;
        match self.kind {
            ModelKind::EuclideanSpace
            | ModelKind::EuclideanHalfspace
            | ModelKind::EuclideanSlab
            | ModelKind::EuclideanBall => DMatrix::identity(n, n),
            ModelKind::Sphere | ModelKind::SphereCap => {
                let lam = 2.0 / (1.0 + x.norm_squared());
                DMatrix::identity(n, n) * (lam * lam)
            }
            ModelKind::HyperbolicSpace => {
                let y = x[n - 1];
                DMatrix::identity(n, n) / (y * y)
            }
            ModelKind::HyperbolicTube => {
                let w = x.rows(1, n - 1);
                let t = w.norm();
                let mut h = DMatrix::zeros(n, n);
                h[(0, 0)] = t.cosh().powi(2);
                let u = sinh_sq_over_t_sq(t);
                for i in 1..n {
                    h[(i, i)] = u;
                }
                if t > 1e-14 {
                    let b = 1.0 - u;
                    for i in 1..n {
                        for j in 1..n {
                            h[(i, j)] += b * (w[i - 1] / t) * (w[j - 1] / t);
                        }
                    }
                }
                h
            }
        }
    }

    /// Christoffel symbols `Gamma^k_{ij}` at `x`, indexed `[k][i][j]`.
    pub fn christoffel_at(&self, x: &DVector<f64>) -> Result<Vec<DMatrix<f64>>> {
        self.check_domain(x)?;
        Ok(self.christoffel_unchecked(x))
    }

    pub(crate) fn christoffel_unchecked(&self, x: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let n = self.dim;
        let mut out = vec![DMatrix::zeros(n, n); n];
        self.christoffel_into(x, &mut out);
        out
    }

    /// Allocation-free Christoffel evaluation for the stepping loop.
    pub(crate) fn christoffel_into(&self, x: &DVector<f64>, out: &mut [DMatrix<f64>]) {
        let n = self.dim;
        match self.kind {
            ModelKind::EuclideanSpace
            | ModelKind::EuclideanHalfspace
            | ModelKind::EuclideanSlab
            | ModelKind::EuclideanBall => {
                for g in out.iter_mut() {
                    g.fill(0.0);
                }
            }
            ModelKind::Sphere | ModelKind::SphereCap => {
                // conformal metric exp(2 psi) delta with psi = ln 2 - ln(1+|y|^2)
                let denom = 1.0 + x.norm_squared();
                let dpsi: Vec<f64> = (0..n).map(|i| -2.0 * x[i] / denom).collect();
                conformal_christoffel(&dpsi, out);
            }
            ModelKind::HyperbolicSpace => {
                let y = x[n - 1];
                let mut dpsi = vec![0.0; n];
                dpsi[n - 1] = -1.0 / y;
                conformal_christoffel(&dpsi, out);
            }
            ModelKind::HyperbolicTube => tube_christoffel(x, n, out),
        }
    }

    /// Move a point onto the locus at metric distance `g_new` from the
    /// boundary along the inward normal of its nearest boundary face,
    /// returning the moved point and that boundary projection.
    pub(crate) fn place_at_gap(
        &self,
        x: &DVector<f64>,
        g_new: f64,
    ) -> Result<(DVector<f64>, DVector<f64>)> {
        let n = self.dim;
        match self.kind {
            ModelKind::EuclideanHalfspace => {
                let mut moved = x.clone();
                moved[n - 1] = g_new;
                let mut p = x.clone();
                p[n - 1] = 0.0;
                Ok((moved, p))
            }
            ModelKind::EuclideanSlab => {
                let w = self.param("width", 1.0);
                let mut moved = x.clone();
                let mut p = x.clone();
                if x[n - 1] <= w / 2.0 {
                    moved[n - 1] = g_new;
                    p[n - 1] = 0.0;
                } else {
                    moved[n - 1] = w - g_new;
                    p[n - 1] = w;
                }
                Ok((moved, p))
            }
            ModelKind::EuclideanBall => {
                let r0 = self.param("r0", 1.0);
                let r = x.norm();
                let dir = if r > 1e-300 {
                    x / r
                } else {
                    let mut e = DVector::zeros(n);
                    e[0] = 1.0;
                    e
                };
                let r_new = (r0 - g_new).max(0.0);
                Ok(((&dir) * r_new, dir * r0))
            }
            ModelKind::SphereCap => {
                let th0 = self.param("theta0", 1.0);
                let r = x.norm();
                let dir = if r > 1e-300 {
                    x / r
                } else {
                    let mut e = DVector::zeros(n);
                    e[0] = 1.0;
                    e
                };
                let theta_new = (th0 - g_new).max(0.0);
                Ok(((&dir) * (theta_new / 2.0).tan(), dir * (th0 / 2.0).tan()))
            }
            ModelKind::HyperbolicTube => {
                let r0 = self.param("r", 0.8);
                let w = x.rows(1, n - 1).clone_owned();
                let t = w.norm();
                let dir = if t > 1e-300 {
                    &w / t
                } else {
                    let mut e = DVector::zeros(n - 1);
                    e[0] = 1.0;
                    e
                };
                let t_new = (r0 - g_new).max(0.0);
                let mut moved = x.clone();
                let mut p = x.clone();
                for i in 1..n {
                    moved[i] = dir[i - 1] * t_new;
                    p[i] = dir[i - 1] * r0;
                }
                Ok((moved, p))
            }
            _ => Err(Error::Precondition(format!(
                "{} has no boundary",
                self.kind.id()
            ))),
        }
    }

    /// Curvature tensor components in an orthonormal frame. All catalog
    /// members have constant sectional curvature, so the components do not
    /// depend on the point or on the particular orthonormal frame.
    pub fn curvature_at(&self, x: &DVector<f64>) -> Result<CurvatureTensor> {
        self.check_domain(x)?;
        Ok(CurvatureTensor::constant_curvature(
            self.dim,
            self.constant_curvature(),
        ))
    }

    /// Distance to the boundary (nonnegative inside the chart domain) plus
    /// the nearest boundary point. Models without boundary report infinity.
    pub fn signed_boundary_distance(&self, x: &DVector<f64>) -> Result<(f64, Option<DVector<f64>>)> {
        self.check_domain(x)?;
        match self.boundary_gap(x) {
            Some((d, p)) => Ok((d.max(0.0), Some(p))),
            None => Ok((f64::INFINITY, None)),
        }
    }

    /// Allocation-free signed metric distance to the boundary (negative
    /// outside the domain); `None` for boundaryless models.
    #[inline]
    pub(crate) fn boundary_distance_only(&self, x: &DVector<f64>) -> Option<f64> {
        let n = self.dim;
        match self.kind {
            ModelKind::EuclideanSpace | ModelKind::Sphere | ModelKind::HyperbolicSpace => None,
            ModelKind::EuclideanHalfspace => Some(x[n - 1]),
            ModelKind::EuclideanSlab => {
                let w = self.param("width", 1.0);
                Some(x[n - 1].min(w - x[n - 1]))
            }
            ModelKind::EuclideanBall => Some(self.param("r0", 1.0) - x.norm()),
            ModelKind::SphereCap => {
                Some(self.param("theta0", 1.0) - 2.0 * x.norm().atan())
            }
            ModelKind::HyperbolicTube => {
                let mut t2 = 0.0;
                for i in 1..n {
                    t2 += x[i] * x[i];
                }
                Some(self.param("r", 0.8) - t2.sqrt())
            }
        }
    }

    /// Signed metric distance to the boundary (negative outside the domain)
    /// and the boundary projection, without domain checks. `None` for
    /// boundaryless models.
    pub(crate) fn boundary_gap(&self, x: &DVector<f64>) -> Option<(f64, DVector<f64>)> {
        let n = self.dim;
        match self.kind {
            ModelKind::EuclideanSpace | ModelKind::Sphere | ModelKind::HyperbolicSpace => None,
            ModelKind::EuclideanHalfspace => {
                let mut p = x.clone();
                p[n - 1] = 0.0;
                Some((x[n - 1], p))
            }
            ModelKind::EuclideanSlab => {
                let w = self.param("width", 1.0);
                let d_lo = x[n - 1];
                let d_hi = w - x[n - 1];
                let mut p = x.clone();
                if d_lo <= d_hi {
                    p[n - 1] = 0.0;
                    Some((d_lo, p))
                } else {
                    p[n - 1] = w;
                    Some((d_hi, p))
                }
            }
            ModelKind::EuclideanBall => {
                let r0 = self.param("r0", 1.0);
                let r = x.norm();
                let dir = if r > 1e-300 {
                    x / r
                } else {
                    let mut e = DVector::zeros(n);
                    e[0] = 1.0;
                    e
                };
                Some((r0 - r, dir * r0))
            }
            ModelKind::SphereCap => {
                let th0 = self.param("theta0", 1.0);
                let r = x.norm();
                let theta = 2.0 * r.atan();
                let dir = if r > 1e-300 {
                    x / r
                } else {
                    let mut e = DVector::zeros(n);
                    e[0] = 1.0;
                    e
                };
                Some((th0 - theta, dir * (th0 / 2.0).tan()))
            }
            ModelKind::HyperbolicTube => {
                let r0 = self.param("r", 0.8);
                let w = x.rows(1, n - 1).clone_owned();
                let t = w.norm();
                let mut p = x.clone();
                let dir = if t > 1e-300 {
                    &w / t
                } else {
                    let mut e = DVector::zeros(n - 1);
                    e[0] = 1.0;
                    e
                };
                for i in 1..n {
                    p[i] = dir[i - 1] * r0;
                }
                Some((r0 - t, p))
            }
        }
    }

    /// Boundary data (inward normal, shape operator, principal curvatures)
    /// at a boundary point.
    pub fn boundary_data_at(&self, x: &DVector<f64>) -> Result<BoundaryData> {
        if x.len() != self.dim {
            return Err(Error::Argument("point dimension mismatch".into()));
        }
        let n = self.dim;
        let gap = self
            .boundary_gap(x)
            .ok_or_else(|| Error::Precondition(format!("{} has no boundary", self.kind.id())))?;
        if gap.0.abs() > BOUNDARY_TOL * self.chart_scale() {
            return Err(Error::Precondition(format!(
                "point at distance {:.3e} from boundary",
                gap.0
            )));
        }
        let (normal, shape) = match self.kind {
            ModelKind::EuclideanHalfspace => {
                let mut nu = DVector::zeros(n);
                nu[n - 1] = 1.0;
                (nu, DMatrix::zeros(n, n))
            }
            ModelKind::EuclideanSlab => {
                let w = self.param("width", 1.0);
                let mut nu = DVector::zeros(n);
                nu[n - 1] = if x[n - 1] < w / 2.0 { 1.0 } else { -1.0 };
                (nu, DMatrix::zeros(n, n))
            }
            ModelKind::EuclideanBall => {
                let r0 = self.param("r0", 1.0);
                let dir = x / x.norm();
                let nu = -&dir;
                let shape =
                    (DMatrix::identity(n, n) - &dir * dir.transpose()) / r0;
                (nu, shape)
            }
            ModelKind::SphereCap => {
                let th0 = self.param("theta0", 1.0);
                let lam = 2.0 / (1.0 + x.norm_squared());
                let dir = x / x.norm();
                let nu = -&dir / lam;
                let kappa = 1.0 / th0.tan();
                let shape =
                    (DMatrix::identity(n, n) - &dir * dir.transpose()) * kappa;
                (nu, shape)
            }
            ModelKind::HyperbolicTube => {
                let r0 = self.param("r", 0.8);
                let w = x.rows(1, n - 1).clone_owned();
                let t = w.norm();
                let dir = &w / t;
                let mut nu = DVector::zeros(n);
                for i in 1..n {
                    nu[i] = -dir[i - 1];
                }
                let mut shape = DMatrix::zeros(n, n);
                shape[(0, 0)] = r0.tanh();
                let coth = 1.0 / r0.tanh();
                for i in 1..n {
                    for j in 1..n {
                        let proj = if i == j { 1.0 } else { 0.0 }
                            - dir[i - 1] * dir[j - 1];
                        shape[(i, j)] = coth * proj;
                    }
                }
                (nu, shape)
            }
            _ => unreachable!("boundaryless kinds handled above"),
        };
        let principal = self.principal_curvatures(x, &normal, &shape)?;
        Ok(BoundaryData {
            normal,
            shape_operator: shape,
            principal_curvatures: principal,
        })
    }

    fn principal_curvatures(
        &self,
        x: &DVector<f64>,
        nu: &DVector<f64>,
        shape: &DMatrix<f64>,
    ) -> Result<Vec<f64>> {
        let n = self.dim;
        let h = self.metric_unchecked(x);
        // orthonormal basis of the boundary tangent space: h-Gram-Schmidt of
        // the chart basis against nu
        let mut basis: Vec<DVector<f64>> = Vec::with_capacity(n - 1);
        let h_ip = |a: &DVector<f64>, b: &DVector<f64>| (a.transpose() * &h * b)[(0, 0)];
        let nu_n = nu / h_ip(nu, nu).sqrt();
        for i in 0..n {
            let mut v = DVector::zeros(n);
            v[i] = 1.0;
            let mut w = v.clone();
            w -= &nu_n * h_ip(&nu_n, &v);
            for b in &basis {
                let c = h_ip(b, &w);
                w -= b * c;
            }
            let norm = h_ip(&w, &w).sqrt();
            if norm > 1e-8 {
                basis.push(w / norm);
            }
            if basis.len() == n - 1 {
                break;
            }
        }
        if basis.len() != n - 1 {
            return Err(Error::Precondition(
                "failed to build boundary tangent basis".into(),
            ));
        }
        let mut b = DMatrix::zeros(n - 1, n - 1);
        for (i, fi) in basis.iter().enumerate() {
            let afj: Vec<DVector<f64>> = basis.iter().map(|fj| shape * fj).collect();
            for (j, a) in afj.iter().enumerate() {
                b[(i, j)] = h_ip(fi, a);
            }
        }
        // symmetrize against roundoff before the eigensolve
        let b = (&b + b.transpose()) * 0.5;
        let eig = nalgebra::SymmetricEigen::new(b);
        let mut rho: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
        rho.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(rho)
    }

    /// Sum of the q smallest principal curvatures at a boundary point.
    pub fn rho_q_at(&self, x: &DVector<f64>, q: usize) -> Result<f64> {
        if q == 0 || q > self.dim - 1 {
            return Err(Error::Argument(format!(
                "rho_q degree {q} outside 1..={}",
                self.dim - 1
            )));
        }
        let data = self.boundary_data_at(x)?;
        Ok(data.principal_curvatures[..q].iter().sum())
    }

    /// Canonical h-orthonormal frame at `x` (symmetric inverse square root of
    /// the metric).
    pub fn canonical_frame_at(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let h = self.metric_at(x)?;
        Ok(inv_sqrt_spd(&h))
    }

    /// When the chart metric is conformal, `h = s^{-2} delta`, returns `s`
    /// (the canonical frame is then `s I`).
    pub fn conformal_scale(&self, x: &DVector<f64>) -> Option<f64> {
        match self.kind {
            ModelKind::EuclideanSpace
            | ModelKind::EuclideanHalfspace
            | ModelKind::EuclideanSlab
            | ModelKind::EuclideanBall => Some(1.0),
            ModelKind::Sphere | ModelKind::SphereCap => Some((1.0 + x.norm_squared()) / 2.0),
            ModelKind::HyperbolicSpace => Some(x[self.dim - 1]),
            ModelKind::HyperbolicTube => None,
        }
    }

    /// Least eigenvalue of the degree-q curvature endomorphism at `x`; for
    /// this catalog it equals `q (n - q) c`.
    pub fn r_q_at(&self, x: &DVector<f64>, q: usize) -> Result<f64> {
        self.check_domain(x)?;
        if q > self.dim {
            return Err(Error::Argument("degree exceeds dimension".into()));
        }
        Ok(q as f64 * (self.dim - q) as f64 * self.constant_curvature())
    }
}

/// Symmetric inverse square root of a symmetric positive-definite matrix.
pub fn inv_sqrt_spd(h: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = nalgebra::SymmetricEigen::new(h.clone());
    let n = h.nrows();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        d[(i, i)] = 1.0 / eig.eigenvalues[i].sqrt();
    }
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

/// `sinh(t)^2 / t^2` with the series branch near zero.
fn sinh_sq_over_t_sq(t: f64) -> f64 {
    if t < 1e-4 {
        let t2 = t * t;
        1.0 + t2 / 3.0 + 2.0 * t2 * t2 / 45.0
    } else {
        let s = t.sinh();
        s * s / (t * t)
    }
}

/// `d/dt [sinh(t)^2/t^2]` with the series branch near zero.
fn d_sinh_sq_over_t_sq(t: f64) -> f64 {
    if t < 1e-4 {
        let t2 = t * t;
        2.0 * t / 3.0 + 8.0 * t * t2 / 45.0
    } else {
        ((2.0 * t).sinh() - 2.0 * t.sinh().powi(2) / t) / (t * t)
    }
}

fn conformal_christoffel(dpsi: &[f64], gamma: &mut [DMatrix<f64>]) {
    let n = dpsi.len();
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut v = 0.0;
                if i == k {
                    v += dpsi[j];
                }
                if j == k {
                    v += dpsi[i];
                }
                if i == j {
                    v -= dpsi[k];
                }
                gamma[k][(i, j)] = v;
            }
        }
    }
}

/// Christoffel symbols of the tube metric `cosh^2(t) ds^2 + dt^2 +
/// sinh^2(t) dOmega^2` in Cartesian cross-section coordinates.
fn tube_christoffel(x: &DVector<f64>, n: usize, gamma: &mut [DMatrix<f64>]) {
    for g in gamma.iter_mut() {
        g.fill(0.0);
    }
    let w = x.rows(1, n - 1).clone_owned();
    let t = w.norm();
    if t < 1e-14 {
        return; // all terms vanish on the axis
    }
    let dir = &w / t;
    let u = sinh_sq_over_t_sq(t);
    let up = d_sinh_sq_over_t_sq(t);
    let tanh_t = t.tanh();
    let cs = t.cosh() * t.sinh();

    // axis block
    for i in 1..n {
        gamma[0][(0, i)] = tanh_t * dir[i - 1];
        gamma[0][(i, 0)] = gamma[0][(0, i)];
        gamma[i][(0, 0)] = -cs * dir[i - 1];
    }

    // cross-section block
    let half_up_over_u = up / (2.0 * u);
    let radial_coef = -0.5 * up + (1.0 - u) / t;
    for k in 1..n {
        for i in 1..n {
            for j in 1..n {
                let p_ij = if i == j { 1.0 } else { 0.0 } - dir[i - 1] * dir[j - 1];
                let p_jk = if j == k { 1.0 } else { 0.0 } - dir[j - 1] * dir[k - 1];
                let p_ik = if i == k { 1.0 } else { 0.0 } - dir[i - 1] * dir[k - 1];
                gamma[k][(i, j)] = half_up_over_u
                    * (dir[i - 1] * p_jk + dir[j - 1] * p_ik)
                    + radial_coef * p_ij * dir[k - 1];
            }
        }
    }
}
