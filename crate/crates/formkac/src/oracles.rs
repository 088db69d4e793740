//! Deterministic ground truth: image-method half-space kernels, a
//! Crank-Nicolson line solver, finite-difference exterior calculus on chart
//! components, and the two quadrature identities (the Hessian-weighted
//! integration-by-parts identity and the pinched-manifold coercivity bound).

use crate::error::{Error, Result};
use crate::form_algebra::{derivation_matrix, FormBasis, TupleTable};
use crate::geometry::{ManifoldModel, ModelKind};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

// ---------------------------------------------------------------------------
// quadrature

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Chebyshev initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            // Legendre P_n(x) and P_n'(x) by recurrence
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0, x);
        for k in 2..=n {
            let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Composite Gauss-Legendre rule over `[a, b]` with `cells` panels.
pub fn panel_rule(a: f64, b: f64, cells: usize, order: usize) -> (Vec<f64>, Vec<f64>) {
    let (gn, gw) = gauss_legendre(order);
    let mut nodes = Vec::with_capacity(cells * order);
    let mut weights = Vec::with_capacity(cells * order);
    let dx = (b - a) / cells as f64;
    for c in 0..cells {
        let lo = a + c as f64 * dx;
        for (x, w) in gn.iter().zip(gw.iter()) {
            nodes.push(lo + 0.5 * dx * (x + 1.0));
            weights.push(0.5 * dx * w);
        }
    }
    (nodes, weights)
}

// ---------------------------------------------------------------------------
// half-space kernels

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Neumann,
    Dirichlet,
}

/// One-dimensional Gaussian kernel of variance `t` (generator `1/2 d^2/dx^2`).
pub fn gauss_kernel(t: f64, d: f64) -> f64 {
    (-d * d / (2.0 * t)).exp() / (2.0 * std::f64::consts::PI * t).sqrt()
}

/// Image-method heat kernel on the half-line.
pub fn halfspace_kernel(kind: KernelKind, t: f64, x: f64, y: f64) -> Result<f64> {
    if t <= 0.0 {
        return Err(Error::Argument("kernel time must be positive".into()));
    }
    if x < 0.0 || y < 0.0 {
        return Err(Error::Argument("kernel arguments must be nonnegative".into()));
    }
    let direct = gauss_kernel(t, x - y);
    let image = gauss_kernel(t, x + y);
    Ok(match kind {
        KernelKind::Neumann => direct + image,
        KernelKind::Dirichlet => direct - image,
    })
}

/// Evolve a profile `g` on the half-line by the image-method kernel,
/// integrating over `[0, cutoff]` by composite quadrature.
pub fn halfspace_evolve(
    kind: KernelKind,
    t: f64,
    x: f64,
    g: &dyn Fn(f64) -> f64,
    cutoff: f64,
) -> Result<f64> {
    let (nodes, weights) = panel_rule(0.0, cutoff, 64, 16);
    let mut acc = 0.0;
    for (y, w) in nodes.iter().zip(weights.iter()) {
        acc += w * halfspace_kernel(kind, t, x, *y)? * g(*y);
    }
    Ok(acc)
}

// ---------------------------------------------------------------------------
// Crank-Nicolson line solver

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryCondition {
    Neumann,
    Dirichlet,
    Robin(f64),
}

/// Uniform 1-D grid field with a boundary-condition tag (applied at both
/// ends; keep the far end beyond the diffusion range).
#[derive(Debug, Clone)]
pub struct GridField {
    pub xs: Vec<f64>,
    pub values: Vec<f64>,
    pub bc: BoundaryCondition,
}

impl GridField {
    pub fn new(x0: f64, x1: f64, n: usize, bc: BoundaryCondition, f: &dyn Fn(f64) -> f64) -> Result<Self> {
        if n < 3 || x1 <= x0 {
            return Err(Error::Argument("grid needs >= 3 increasing points".into()));
        }
        let dx = (x1 - x0) / (n - 1) as f64;
        let xs: Vec<f64> = (0..n).map(|i| x0 + i as f64 * dx).collect();
        let values: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("grid values must be finite".into()));
        }
        Ok(GridField { xs, values, bc })
    }

    pub fn dx(&self) -> f64 {
        self.xs[1] - self.xs[0]
    }

    /// Trapezoid mass.
    pub fn mass(&self) -> f64 {
        let dx = self.dx();
        let n = self.values.len();
        let inner: f64 = self.values[1..n - 1].iter().sum();
        dx * (inner + 0.5 * (self.values[0] + self.values[n - 1]))
    }

    /// Linear interpolation.
    pub fn sample(&self, x: f64) -> f64 {
        let dx = self.dx();
        let pos = (x - self.xs[0]) / dx;
        let i = pos.floor().max(0.0) as usize;
        if i + 1 >= self.xs.len() {
            return *self.values.last().unwrap();
        }
        let frac = pos - i as f64;
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }
}

/// Crank-Nicolson evolution of `du/dt = 1/2 u''` over time `t` in `steps`
/// steps, second-order accurate, with the grid's boundary tag at both ends.
pub fn pde_solve_1d(field: &GridField, t: f64, steps: usize) -> Result<GridField> {
    if steps == 0 || t <= 0.0 {
        return Err(Error::Argument("need positive time and steps".into()));
    }
    let dx = field.dx();
    let dt = t / steps as f64;
    // explicit stability window for diffusion coefficient 1/2
    if dt > dx * dx {
        return Err(Error::Argument(format!(
            "time step {dt:.3e} violates dt <= dx^2 = {:.3e}",
            dx * dx
        )));
    }
    let n = field.values.len();
    let lam = 0.25 * dt / (dx * dx); // (1/2) * dt/(2 dx^2)

    // L u with the boundary stencils folded in
    let apply_l = |u: &[f64], out: &mut [f64]| {
        for i in 1..n - 1 {
            out[i] = u[i - 1] - 2.0 * u[i] + u[i + 1];
        }
        match field.bc {
            BoundaryCondition::Neumann => {
                out[0] = 2.0 * u[1] - 2.0 * u[0];
                out[n - 1] = 2.0 * u[n - 2] - 2.0 * u[n - 1];
            }
            BoundaryCondition::Dirichlet => {
                out[0] = 0.0;
                out[n - 1] = 0.0;
            }
            BoundaryCondition::Robin(c) => {
                out[0] = 2.0 * u[1] - (2.0 + 2.0 * dx * c) * u[0];
                out[n - 1] = 2.0 * u[n - 2] - (2.0 + 2.0 * dx * c) * u[n - 1];
            }
        }
    };

    // implicit matrix rows: (I - lam L)
    let mut diag = vec![0.0; n];
    let mut lower = vec![0.0; n]; // lower[i] multiplies u[i-1]
    let mut upper = vec![0.0; n];
    for i in 0..n {
        diag[i] = 1.0 + 2.0 * lam;
        lower[i] = -lam;
        upper[i] = -lam;
    }
    match field.bc {
        BoundaryCondition::Neumann => {
            upper[0] = -2.0 * lam;
            lower[n - 1] = -2.0 * lam;
        }
        BoundaryCondition::Dirichlet => {
            diag[0] = 1.0;
            upper[0] = 0.0;
            diag[n - 1] = 1.0;
            lower[n - 1] = 0.0;
        }
        BoundaryCondition::Robin(c) => {
            diag[0] = 1.0 + (2.0 + 2.0 * dx * c) * lam;
            upper[0] = -2.0 * lam;
            diag[n - 1] = 1.0 + (2.0 + 2.0 * dx * c) * lam;
            lower[n - 1] = -2.0 * lam;
        }
    }

    let mut u = field.values.clone();
    if matches!(field.bc, BoundaryCondition::Dirichlet) {
        u[0] = 0.0;
        u[n - 1] = 0.0;
    }
    let mut lu = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut cp = vec![0.0; n];
    for _ in 0..steps {
        apply_l(&u, &mut lu);
        for i in 0..n {
            rhs[i] = u[i] + lam * lu[i];
        }
        if matches!(field.bc, BoundaryCondition::Dirichlet) {
            rhs[0] = 0.0;
            rhs[n - 1] = 0.0;
        }
        // Thomas solve of the tridiagonal system
        cp[0] = upper[0] / diag[0];
        rhs[0] /= diag[0];
        for i in 1..n {
            let m = diag[i] - lower[i] * cp[i - 1];
            cp[i] = upper[i] / m;
            rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / m;
        }
        u[n - 1] = rhs[n - 1];
        for i in (0..n - 1).rev() {
            u[i] = rhs[i] - cp[i] * u[i + 1];
        }
    }
    Ok(GridField {
        xs: field.xs.clone(),
        values: u,
        bc: field.bc,
    })
}

// ---------------------------------------------------------------------------
// fields

/// Scalar field with analytic chart derivatives.
pub struct ScalarField {
    pub f: Box<dyn Fn(&DVector<f64>) -> f64 + Sync>,
    pub grad: Box<dyn Fn(&DVector<f64>) -> DVector<f64> + Sync>,
    pub hess: Box<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Sync>,
}

impl ScalarField {
    pub fn linear(a: DVector<f64>) -> Self {
        let n = a.len();
        let a2 = a.clone();
        ScalarField {
            f: Box::new(move |x| a.dot(x)),
            grad: Box::new(move |_| a2.clone()),
            hess: Box::new(move |_| DMatrix::zeros(n, n)),
        }
    }

    /// `f(x) = |x - b|^2 / 2` (chart Hessian the identity).
    pub fn half_square_distance(b: DVector<f64>) -> Self {
        let n = b.len();
        let b2 = b.clone();
        ScalarField {
            f: Box::new(move |x| (x - &b).norm_squared() / 2.0),
            grad: Box::new(move |x| x - &b2),
            hess: Box::new(move |_| DMatrix::identity(n, n)),
        }
    }

    pub fn quadratic(q: DMatrix<f64>, a: DVector<f64>) -> Self {
        let q2 = q.clone();
        let a2 = a.clone();
        let q3 = q.clone();
        ScalarField {
            f: Box::new(move |x| 0.5 * (x.transpose() * &q * x)[(0, 0)] + a.dot(x)),
            grad: Box::new(move |x| &q2 * x + &a2),
            hess: Box::new(move |_| q3.clone()),
        }
    }
}

/// A q-form field given by covariant chart components in basis order.
pub trait FormField: Sync {
    fn degree(&self) -> usize;
    fn eval_chart(&self, x: &DVector<f64>) -> DVector<f64>;
}

/// Form field from a closure.
pub struct ClosureFormField<F: Fn(&DVector<f64>) -> DVector<f64> + Sync> {
    pub q: usize,
    pub f: F,
}

impl<F: Fn(&DVector<f64>) -> DVector<f64> + Sync> FormField for ClosureFormField<F> {
    fn degree(&self) -> usize {
        self.q
    }
    fn eval_chart(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.f)(x)
    }
}

/// Smooth compactly supported bump on [-1, 1], equal to 1 at 0.
pub fn bump(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - u * u)).exp()
    }
}

/// Product-bump q-form with polynomial coefficient mixes, seeded for
/// reproducibility. Supported in the box `center ± radius` per axis.
pub struct ProductBumpForm {
    pub q: usize,
    pub center: DVector<f64>,
    pub radius: f64,
    pub amps: Vec<f64>,
    pub lins: Vec<DVector<f64>>,
}

impl ProductBumpForm {
    pub fn seeded(n: usize, q: usize, center: DVector<f64>, radius: f64, seed: u64) -> Self {
        let mut rng = crate::rng::PathRng::new(seed, 0);
        let dim = FormBasis::new(n, q).map(|b| b.len()).unwrap_or(0);
        let amps: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
        let lins: Vec<DVector<f64>> = (0..dim)
            .map(|_| DVector::from_fn(n, |_, _| 0.3 * rng.normal()))
            .collect();
        ProductBumpForm {
            q,
            center,
            radius,
            amps,
            lins,
        }
    }
}

impl FormField for ProductBumpForm {
    fn degree(&self) -> usize {
        self.q
    }
    fn eval_chart(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut env = 1.0;
        for i in 0..x.len() {
            env *= bump((x[i] - self.center[i]) / self.radius);
        }
        DVector::from_fn(self.amps.len(), |k, _| {
            env * self.amps[k] * (1.0 + self.lins[k].dot(&(x - &self.center)))
        })
    }
}

// ---------------------------------------------------------------------------
// finite-difference exterior calculus

/// Chart components of the exterior derivative by central differences
/// (metric-free).
pub fn exterior_derivative_chart(
    field: &dyn FormField,
    x: &DVector<f64>,
    h: f64,
) -> Result<DVector<f64>> {
    let n = x.len();
    let q = field.degree();
    if q + 1 > n {
        return Err(Error::Argument("derivative degree exceeds dimension".into()));
    }
    let src = FormBasis::new(n, q)?;
    let dst = FormBasis::new(n, q + 1)?;
    // partials of every source component
    let mut partials = vec![DVector::zeros(src.len()); n];
    for j in 0..n {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += h;
        xm[j] -= h;
        partials[j] = (field.eval_chart(&xp) - field.eval_chart(&xm)) / (2.0 * h);
    }
    let mut out = DVector::zeros(dst.len());
    for (row, kidx) in (0..dst.len()).map(|r| (r, dst.index_set(r).to_vec())) {
        let mut acc = 0.0;
        for (pos, &j) in kidx.iter().enumerate() {
            let reduced: Vec<u8> = kidx.iter().copied().filter(|&b| b != j).collect();
            if let Some(col) = src.position(&reduced) {
                let sign = if pos % 2 == 0 { 1.0 } else { -1.0 };
                acc += sign * partials[j as usize][col];
            }
        }
        out[row] = acc;
    }
    Ok(out)
}

/// Chart components of the codifferential
/// `(delta w)_J = -h^{jk} (grad_j w)_{k J}` by central differences, with the
/// sign convention that makes the Hodge Laplacian nonnegative
/// (`delta(f dx^1) = -df/dx^1` on a flat chart).
pub fn codifferential_chart(
    model: &ManifoldModel,
    field: &dyn FormField,
    x: &DVector<f64>,
    h: f64,
) -> Result<DVector<f64>> {
    let n = model.dim;
    let q = field.degree();
    if q == 0 {
        return Err(Error::Argument("codifferential needs degree >= 1".into()));
    }
    let src = FormBasis::new(n, q)?;
    let dst = FormBasis::new(n, q - 1)?;
    let hinv = model
        .metric_at(x)?
        .try_inverse()
        .ok_or_else(|| Error::Argument("metric not invertible".into()))?;
    let gamma = model.christoffel_at(x)?;
    let w0 = field.eval_chart(x);
    let mut partials = vec![DVector::zeros(src.len()); n];
    for j in 0..n {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += h;
        xm[j] -= h;
        partials[j] = (field.eval_chart(&xp) - field.eval_chart(&xm)) / (2.0 * h);
    }
    // signed component lookup of an arbitrary q-index tuple
    let comp = |coeffs: &DVector<f64>, idx: &[u8]| -> f64 {
        match src.position_signed(idx) {
            Some((p, s)) => s * coeffs[p],
            None => 0.0,
        }
    };
    let mut out = DVector::zeros(dst.len());
    let mut tuple = vec![0u8; q];
    for row in 0..dst.len() {
        let jidx = dst.index_set(row).to_vec();
        let mut acc = 0.0;
        for j in 0..n {
            for k in 0..n {
                let hjk = hinv[(j, k)];
                if hjk == 0.0 {
                    continue;
                }
                tuple[0] = k as u8;
                tuple[1..].copy_from_slice(&jidx);
                // partial derivative term
                let mut nabla = comp(&partials[j], &tuple);
                // -Gamma^m_{jk} w_{m J}
                for m in 0..n {
                    let g = gamma[m][(j, k)];
                    if g != 0.0 {
                        tuple[0] = m as u8;
                        nabla -= g * comp(&w0, &tuple);
                        tuple[0] = k as u8;
                    }
                }
                // -sum_s Gamma^m_{j J_s} w_{k, J with J_s -> m}
                for s in 0..q - 1 {
                    let js = jidx[s] as usize;
                    for m in 0..n {
                        let g = gamma[m][(j, js)];
                        if g != 0.0 {
                            tuple[1 + s] = m as u8;
                            nabla -= g * comp(&w0, &tuple);
                            tuple[1 + s] = jidx[s];
                        }
                    }
                }
                acc -= hjk * nabla;
            }
        }
        out[row] = acc;
    }
    Ok(out)
}

/// Convert covariant chart components into orthonormal-frame coefficients
/// by evaluating on the frame columns (compound-matrix pullback).
pub fn chart_to_frame(frame: &DMatrix<f64>, chart: &DVector<f64>, n: usize, q: usize) -> Result<DVector<f64>> {
    let basis = FormBasis::new(n, q)?;
    if q == 0 {
        return Ok(chart.clone());
    }
    let mut out = DVector::zeros(basis.len());
    let mut sub = DMatrix::zeros(q, q);
    for a in 0..basis.len() {
        let cols = basis.index_set(a).to_vec();
        let mut acc = 0.0;
        for i in 0..basis.len() {
            let rows = basis.index_set(i);
            for (r, &ri) in rows.iter().enumerate() {
                for (c, &cj) in cols.iter().enumerate() {
                    sub[(r, c)] = frame[(ri as usize, cj as usize)];
                }
            }
            acc += chart[i] * sub.determinant();
        }
        out[a] = acc;
    }
    Ok(out)
}

/// Frame-coefficient exterior derivative at `x`.
pub fn exterior_derivative_fd(
    model: &ManifoldModel,
    field: &dyn FormField,
    x: &DVector<f64>,
    h: f64,
) -> Result<DVector<f64>> {
    let chart = exterior_derivative_chart(field, x, h)?;
    let frame = model.canonical_frame_at(x)?;
    chart_to_frame(&frame, &chart, model.dim, field.degree() + 1)
}

/// Frame-coefficient codifferential at `x`.
pub fn codifferential_fd(
    model: &ManifoldModel,
    field: &dyn FormField,
    x: &DVector<f64>,
    h: f64,
) -> Result<DVector<f64>> {
    let chart = codifferential_chart(model, field, x, h)?;
    let frame = model.canonical_frame_at(x)?;
    chart_to_frame(&frame, &chart, model.dim, field.degree() - 1)
}

// ---------------------------------------------------------------------------
// sparse assembly maps: allocation-free chart-level exterior calculus for
// the quadrature loops on conformal-chart models (frame = s I)

struct AssemblyMaps {
    n: usize,
    q: usize,
    /// (row in deg q+1, vector component j, col in deg q, sign): the
    /// single structure behind both `d` and wedging with a vector.
    raise: Vec<(u32, u32, u32, f64)>,
    /// (row in deg q-1, component a, col in deg q, sign): both the
    /// contraction with a vector and the partial-derivative part of delta.
    lower: Vec<(u32, u32, u32, f64)>,
    /// (col, c, d, row, sign) quadruples of the derivation extension.
    derivation: Vec<(u32, u32, u32, u32, f64)>,
    table_q: TupleTable,
    basis_qm1: FormBasis,
    dim_qm1: usize,
    dim_q: usize,
    dim_qp1: usize,
}

impl AssemblyMaps {
    fn new(n: usize, q: usize) -> Result<Self> {
        let basis_q = FormBasis::new(n, q)?;
        let basis_qp1 = FormBasis::new(n, q + 1)?;
        let basis_qm1 = if q >= 1 {
            FormBasis::new(n, q - 1)?
        } else {
            FormBasis::new(n, 0)?
        };
        let mut raise = Vec::new();
        for col in 0..basis_q.len() {
            let idx = basis_q.index_set(col).to_vec();
            for j in 0..n as u8 {
                if idx.contains(&j) {
                    continue;
                }
                let mut merged = Vec::with_capacity(q + 1);
                merged.push(j);
                merged.extend_from_slice(&idx);
                if let Some((row, sign)) = basis_qp1.position_signed(&merged) {
                    raise.push((row as u32, j as u32, col as u32, sign));
                }
            }
        }
        let mut lower = Vec::new();
        if q >= 1 {
            for col in 0..basis_q.len() {
                let idx = basis_q.index_set(col).to_vec();
                for (pos, &a) in idx.iter().enumerate() {
                    let reduced: Vec<u8> =
                        idx.iter().copied().filter(|&b| b != a).collect();
                    let row = basis_qm1.position(&reduced).expect("reduced in basis");
                    let sign = if pos % 2 == 0 { 1.0 } else { -1.0 };
                    lower.push((row as u32, a as u32, col as u32, sign));
                }
            }
        }
        let mut derivation = Vec::new();
        for col in 0..basis_q.len() {
            let idx = basis_q.index_set(col).to_vec();
            for (slot, &c) in idx.iter().enumerate() {
                for d in 0..n as u8 {
                    let mut replaced = idx.clone();
                    replaced[slot] = d;
                    if let Some((row, sign)) = basis_q.position_signed(&replaced) {
                        derivation.push((col as u32, c as u32, d as u32, row as u32, sign));
                    }
                }
            }
        }
        Ok(AssemblyMaps {
            n,
            q,
            raise,
            lower,
            derivation,
            table_q: TupleTable::new(n, q)?,
            dim_qm1: basis_qm1.len(),
            dim_q: basis_q.len(),
            dim_qp1: basis_qp1.len(),
            basis_qm1,
        })
    }
}

/// Per-worker scratch of the quadrature node loop.
struct NodeScratch {
    w0: DVector<f64>,
    partials: Vec<DVector<f64>>,
    d_chart: DVector<f64>,
    del_chart: DVector<f64>,
    gamma: Vec<DMatrix<f64>>,
    tuple: Vec<u8>,
}

impl NodeScratch {
    fn new(maps: &AssemblyMaps) -> Self {
        NodeScratch {
            w0: DVector::zeros(maps.dim_q),
            partials: vec![DVector::zeros(maps.dim_q); maps.n],
            d_chart: DVector::zeros(maps.dim_qp1),
            del_chart: DVector::zeros(maps.dim_qm1),
            gamma: vec![DMatrix::zeros(maps.n, maps.n); maps.n],
            tuple: vec![0u8; maps.q],
        }
    }
}

/// Evaluate omega, d omega and delta omega (chart components) at `x` on a
/// conformal-chart model, writing into the scratch buffers.
fn node_d_delta_conformal(
    maps: &AssemblyMaps,
    model: &ManifoldModel,
    field: &dyn FormField,
    x: &DVector<f64>,
    h: f64,
    scale: f64,
    sc: &mut NodeScratch,
) {
    let n = maps.n;
    let q = maps.q;
    sc.w0.copy_from(&field.eval_chart(x));
    let mut xp = x.clone();
    for j in 0..n {
        xp[j] = x[j] + h;
        let fp = field.eval_chart(&xp);
        xp[j] = x[j] - h;
        let fm = field.eval_chart(&xp);
        xp[j] = x[j];
        for k in 0..maps.dim_q {
            sc.partials[j][k] = (fp[k] - fm[k]) / (2.0 * h);
        }
    }
    sc.d_chart.fill(0.0);
    for &(row, j, col, sign) in &maps.raise {
        sc.d_chart[row as usize] += sign * sc.partials[j as usize][col as usize];
    }
    if q >= 1 {
        model.christoffel_into(x, &mut sc.gamma);
        sc.del_chart.fill(0.0);
        // partial-derivative part
        for &(row, a, col, sign) in &maps.lower {
            sc.del_chart[row as usize] -= sign * sc.partials[a as usize][col as usize];
        }
        // Christoffel corrections
        for row in 0..maps.dim_qm1 {
            let jidx = maps.basis_qm1.index_set(row).to_vec();
            let mut corr = 0.0;
            for j in 0..n {
                // + Gamma^m_{jj} w_{(m, J)}
                sc.tuple[0] = 0;
                sc.tuple[1..q].copy_from_slice(&jidx);
                for m in 0..n {
                    let g = sc.gamma[m][(j, j)];
                    if g != 0.0 {
                        sc.tuple[0] = m as u8;
                        if let Some((pos, sign)) = maps.table_q.lookup(&sc.tuple) {
                            corr += g * sign * sc.w0[pos];
                        }
                    }
                }
                // + sum_s Gamma^m_{j J_s} w_{(j, J with J_s -> m)}
                sc.tuple[0] = j as u8;
                sc.tuple[1..q].copy_from_slice(&jidx);
                for slot in 0..q - 1 {
                    let js = jidx[slot] as usize;
                    for m in 0..n {
                        let g = sc.gamma[m][(j, js)];
                        if g != 0.0 {
                            sc.tuple[1 + slot] = m as u8;
                            if let Some((pos, sign)) = maps.table_q.lookup(&sc.tuple) {
                                corr += g * sign * sc.w0[pos];
                            }
                            sc.tuple[1 + slot] = jidx[slot];
                        }
                    }
                }
            }
            sc.del_chart[row] += corr;
        }
        // conformal inverse metric h^{jk} = s^2 delta
        let s2 = scale * scale;
        for v in sc.del_chart.iter_mut() {
            *v *= s2;
        }
    }
}

// ---------------------------------------------------------------------------
// integral identity (Hessian-weighted integration by parts)

/// Tensor-product quadrature specification over a chart box.
#[derive(Debug, Clone)]
pub struct QuadSpec {
    pub lo: DVector<f64>,
    pub hi: DVector<f64>,
    pub cells: usize,
    pub order: usize,
    pub fd_h: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct IdentityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub boundary_first: f64,
    pub boundary_second: f64,
    pub residual: f64,
}

fn tensor_nodes(spec: &QuadSpec) -> (Vec<DVector<f64>>, Vec<f64>) {
    let n = spec.lo.len();
    let mut axes: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(n);
    for d in 0..n {
        axes.push(panel_rule(spec.lo[d], spec.hi[d], spec.cells, spec.order));
    }
    let total: usize = axes.iter().map(|a| a.0.len()).product();
    let mut nodes = Vec::with_capacity(total);
    let mut weights = Vec::with_capacity(total);
    let mut idx = vec![0usize; n];
    'outer: loop {
        let mut x = DVector::zeros(n);
        let mut w = 1.0;
        for d in 0..n {
            x[d] = axes[d].0[idx[d]];
            w *= axes[d].1[idx[d]];
        }
        nodes.push(x);
        weights.push(w);
        for d in 0..n {
            idx[d] += 1;
            if idx[d] < axes[d].0.len() {
                continue 'outer;
            }
            idx[d] = 0;
        }
        break;
    }
    (nodes, weights)
}

/// Evaluate both sides of the identity
/// `int (<dw, grad f ^ w> + <delta w, grad f _| w>)
///    = int (<D_q(Hess f) w, w> - 1/2 |w|^2 tr Hess f)
///      - int_b <grad f _| w, nu _| w> - 1/2 int_b |w|^2 <grad f, nu>`
/// over the given box. The form must be compactly supported strictly inside
/// the chart; the boundary integrals are evaluated for the Euclidean ball
/// (they vanish for admissible supports) and are zero for other models.
pub fn hessian_identity_check(
    model: &ManifoldModel,
    f: &ScalarField,
    omega: &dyn FormField,
    spec: &QuadSpec,
) -> Result<IdentityReport> {
    let n = model.dim;
    let q = omega.degree();
    // support must stay strictly inside the chart domain
    let mut corner_worst = 0.0f64;
    for mask in 0..(1usize << n) {
        let corner = DVector::from_fn(n, |d, _| {
            if mask >> d & 1 == 1 {
                spec.hi[d]
            } else {
                spec.lo[d]
            }
        });
        if !model.in_chart_domain(&corner) {
            return Err(Error::Precondition(
                "support box touches the chart edge".into(),
            ));
        }
        if let Some((gap, _)) = model.boundary_gap(&corner) {
            corner_worst = corner_worst.max(-gap);
        }
    }

    let (nodes, weights) = tensor_nodes(spec);
    let conformal = model.conformal_scale(&nodes[0]).is_some();
    let (lhs, rhs) = if conformal {
        let maps = AssemblyMaps::new(n, q)?;
        let terms: Vec<(f64, f64)> = nodes
            .par_iter()
            .zip(weights.par_iter())
            .map_init(
                || NodeScratch::new(&maps),
                |sc, (x, w)| {
                    let scale = model.conformal_scale(x).expect("conformal chart");
                    node_d_delta_conformal(&maps, model, omega, x, spec.fd_h, scale, sc);
                    // frame factors: w_f = s^q w, dw_f = s^{q+1} dw,
                    // del_f = s^{q-1} del, grad_f = s grad, H_f = s^2 H
                    let sq = scale.powi(q as i32);
                    let grad_chart = (f.grad)(x);
                    let mut hess_chart = (f.hess)(x);
                    model.christoffel_into(x, &mut sc.gamma);
                    for k in 0..n {
                        hess_chart -= &sc.gamma[k] * grad_chart[k];
                    }
                    let mut node_lhs = 0.0;
                    for &(row, j, col, sign) in &maps.raise {
                        node_lhs += sign
                            * grad_chart[j as usize]
                            * sc.w0[col as usize]
                            * sc.d_chart[row as usize];
                    }
                    // frame factors of the d-pairing: s^{q+1} * s * s^q
                    node_lhs *= scale * scale * sq * sq;
                    if q >= 1 {
                        let mut ip = 0.0;
                        for &(row, a, col, sign) in &maps.lower {
                            ip += sign
                                * grad_chart[a as usize]
                                * sc.w0[col as usize]
                                * sc.del_chart[row as usize];
                        }
                        // s^{q-1} * s * s^q
                        node_lhs += ip * sq * sq;
                    }
                    let mut node_rhs = 0.0;
                    let mut trace = 0.0;
                    for c in 0..n {
                        trace += hess_chart[(c, c)];
                    }
                    for &(col, c, d, row, sign) in &maps.derivation {
                        node_rhs += sign
                            * hess_chart[(c as usize, d as usize)]
                            * sc.w0[col as usize]
                            * sc.w0[row as usize];
                    }
                    let w2 = sc.w0.norm_squared();
                    // H_f carries s^2; the coefficients carry s^{2q}
                    node_rhs = (node_rhs - 0.5 * w2 * trace) * scale * scale * sq * sq;
                    let vol = scale.powi(-(n as i32));
                    (w * vol * node_lhs, w * vol * node_rhs)
                },
            )
            .collect();
        let mut lhs = 0.0;
        let mut rhs = 0.0;
        for (a, b) in terms {
            lhs += a;
            rhs += b;
        }
        (lhs, rhs)
    } else {
        let mut lhs = 0.0;
        let mut rhs = 0.0;
        for (x, w) in nodes.iter().zip(weights.iter()) {
            let h_mat = model.metric_unchecked(x);
            let vol = h_mat.determinant().sqrt();
            let frame = model.canonical_frame_at(x)?;

            let w_chart = omega.eval_chart(x);
            let w_frame = chart_to_frame(&frame, &w_chart, n, q)?;
            let dw = exterior_derivative_fd(model, omega, x, spec.fd_h)?;
            let del = if q >= 1 {
                codifferential_fd(model, omega, x, spec.fd_h)?
            } else {
                DVector::zeros(1)
            };

            let grad_chart = (f.grad)(x);
            let grad_frame = frame.transpose() * &grad_chart;
            let gamma = model.christoffel_unchecked(x);
            let mut hess_chart = (f.hess)(x);
            for k in 0..n {
                hess_chart -= &gamma[k] * grad_chart[k];
            }
            let hess_frame = frame.transpose() * &hess_chart * &frame;
            let hess_frame = (&hess_frame + hess_frame.transpose()) * 0.5;

            // lhs integrand
            let gw = crate::form_algebra::wedge_vector_matrix(&grad_frame, n, q)? * &w_frame;
            let mut node_lhs = dw.dot(&gw);
            if q >= 1 {
                let iw =
                    crate::form_algebra::interior_vector_matrix(&grad_frame, n, q)? * &w_frame;
                node_lhs += del.dot(&iw);
            }

            // rhs integrand
            let dq = derivation_matrix(&hess_frame, q)?;
            let node_rhs = (&dq.mat * &w_frame).dot(&w_frame)
                - 0.5 * w_frame.norm_squared() * hess_frame.trace();

            lhs += w * vol * node_lhs;
            rhs += w * vol * node_rhs;
        }
        (lhs, rhs)
    };

    // boundary integrals: nonzero only if the support reached the boundary,
    // which the precondition excludes; evaluated for the ball for fidelity
    let (b1, b2) = if model.kind == ModelKind::EuclideanBall && n == 3 {
        ball_boundary_integrals(model, f, omega, spec.fd_h)?
    } else {
        (0.0, 0.0)
    };

    let total_rhs = rhs - b1 - b2;
    Ok(IdentityReport {
        lhs,
        rhs: total_rhs,
        boundary_first: b1,
        boundary_second: b2,
        residual: (lhs - total_rhs).abs(),
    })
}

fn ball_boundary_integrals(
    model: &ManifoldModel,
    f: &ScalarField,
    omega: &dyn FormField,
    _h: f64,
) -> Result<(f64, f64)> {
    let r0 = model.param("r0", 1.0);
    let q = omega.degree();
    let n = model.dim;
    let (tn, tw) = panel_rule(0.0, std::f64::consts::PI, 8, 8);
    let (pn, pw) = panel_rule(0.0, 2.0 * std::f64::consts::PI, 8, 8);
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for (theta, wt) in tn.iter().zip(tw.iter()) {
        for (phi, wp) in pn.iter().zip(pw.iter()) {
            let x = DVector::from_vec(vec![
                r0 * theta.sin() * phi.cos(),
                r0 * theta.sin() * phi.sin(),
                r0 * theta.cos(),
            ]);
            let area = wt * wp * r0 * r0 * theta.sin();
            let w_chart = omega.eval_chart(&x);
            if w_chart.abs().max() == 0.0 {
                continue;
            }
            let frame = DMatrix::identity(n, n);
            let w_frame = chart_to_frame(&frame, &w_chart, n, q)?;
            let grad = (f.grad)(&x);
            let nu = -(&x / x.norm());
            if q >= 1 {
                let gi = crate::form_algebra::interior_vector_matrix(&grad, n, q)? * &w_frame;
                let ni = crate::form_algebra::interior_vector_matrix(&nu, n, q)? * &w_frame;
                b1 += area * gi.dot(&ni);
            }
            b2 += area * 0.5 * w_frame.norm_squared() * grad.dot(&nu);
        }
    }
    Ok((b1, b2))
}

// ---------------------------------------------------------------------------
// pinched-manifold coercivity bound

#[derive(Debug, Clone, serde::Serialize)]
pub struct CoercivityRow {
    /// Minimum distance from the center to the support nodes.
    pub d_min: f64,
    /// `|dw|_2 + |delta w|_2`.
    pub lhs: f64,
    /// Weighted integral bound divided by `|w|_2` (the inequality side).
    pub rhs: f64,
    /// The |w|^2-weighted mean of the distance factor: converges to
    /// `asymptotic` as the center recedes.
    pub constant: f64,
    /// Large-distance limit of the weighted constant.
    pub asymptotic: f64,
}

/// Distance in the upper half-space chart of curvature -1.
pub fn hyperbolic_distance(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let n = a.len();
    let ya = a[n - 1];
    let yb = b[n - 1];
    let num = (a - b).norm_squared();
    (1.0 + num / (2.0 * ya * yb)).acosh()
}

/// Evaluate the distance-weighted coercivity bound
/// `|dw|_2 + |delta w|_2 >= (1/(2 |w|_2)) int ((n-p-1) sqrt(k) coth(sqrt(k) d)
///  - p coth(d)) |w|^2 dV` for each center, with node-wise distances, on the
/// hyperbolic upper half-space model.
pub fn pinched_coercivity_check(
    model: &ManifoldModel,
    kappa: f64,
    omega: &dyn FormField,
    centers: &[DVector<f64>],
    spec: &QuadSpec,
    d_min_required: f64,
) -> Result<Vec<CoercivityRow>> {
    if model.kind != ModelKind::HyperbolicSpace {
        return Err(Error::Precondition(
            "coercivity check requires the pinched (hyperbolic) model".into(),
        ));
    }
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(Error::Precondition(
            "pinching constant must lie in (0, 1]".into(),
        ));
    }
    let n = model.dim;
    let p = omega.degree();
    let (nodes, weights) = tensor_nodes(spec);

    // per-node data shared across centers
    let maps = AssemblyMaps::new(n, p)?;
    let node_rows: Vec<(f64, f64, f64)> = nodes
        .par_iter()
        .zip(weights.par_iter())
        .map_init(
            || NodeScratch::new(&maps),
            |sc, (x, w)| {
                let scale = model.conformal_scale(x).expect("hyperbolic chart");
                node_d_delta_conformal(&maps, model, omega, x, spec.fd_h, scale, sc);
                let sq = scale.powi(p as i32);
                let wv = w * scale.powi(-(n as i32));
                let n2 = sc.w0.norm_squared() * sq * sq;
                let d2 = sc.d_chart.norm_squared() * (scale * sq).powi(2);
                // stored delta already carries one factor of scale^2
                let del2 = sc.del_chart.norm_squared() * (sq / scale).powi(2);
                (wv * n2, wv * d2, wv * del2)
            },
        )
        .collect();
    let mut norms2 = Vec::with_capacity(nodes.len());
    let mut mass2 = 0.0;
    let mut l2w = 0.0;
    let mut l2d = 0.0;
    let mut l2del = 0.0;
    for &(n2, d2, del2) in &node_rows {
        norms2.push(n2);
        l2w += n2;
        l2d += d2;
        l2del += del2;
    }
    mass2 += l2w;
    let l2w = l2w.sqrt();
    let lhs = l2d.sqrt() + l2del.sqrt();
    let sk = kappa.sqrt();
    let asymptotic = 0.5 * ((n - p - 1) as f64 * sk - p as f64);

    let mut out = Vec::with_capacity(centers.len());
    for c in centers {
        let mut weighted = 0.0;
        let mut d_min = f64::INFINITY;
        for (x, wn) in nodes.iter().zip(norms2.iter()) {
            if *wn == 0.0 {
                continue;
            }
            let d = hyperbolic_distance(c, x);
            d_min = d_min.min(d);
            let coth = |v: f64| 1.0 / v.tanh();
            let factor = 0.5 * ((n - p - 1) as f64 * sk * coth(sk * d) - p as f64 * coth(d));
            weighted += factor * wn;
        }
        if d_min < d_min_required {
            return Err(Error::Precondition(format!(
                "center at distance {d_min:.3} from the support, need >= {d_min_required}"
            )));
        }
        out.push(CoercivityRow {
            d_min,
            lhs,
            rhs: weighted / l2w,
            constant: weighted / mass2,
            asymptotic,
        });
    }
    Ok(out)
}
