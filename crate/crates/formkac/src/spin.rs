//! Clifford algebra and spinor boundary-condition machinery: gamma matrices
//! by the tensor-product construction, chirality and bag-type boundary
//! projections, tangential-symbol intertwining certificates, and the spinor
//! heat-bound check on the flat half-space (where the mixed
//! Dirichlet/Neumann line oracle exists).

use crate::error::{Error, Result};
use crate::oracles::{halfspace_evolve, KernelKind};
use crate::rng::PathRng;
use nalgebra::DMatrix;
use num_complex::Complex64;

type CMatrix = DMatrix<Complex64>;

fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = a[(i, j)] * b[(k, l)];
                }
            }
        }
    }
    out
}

fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[
        Complex64::new(0.0, 0.0),
        Complex64::new(1.0, 0.0),
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 0.0),
    ])
}

fn pauli_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, -1.0),
        Complex64::new(0.0, 1.0),
        Complex64::new(0.0, 0.0),
    ])
}

fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(-1.0, 0.0),
    ])
}

fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Gamma matrices and (for even dimension) the chirality involution.
#[derive(Debug, Clone)]
pub struct CliffordModule {
    pub dim: usize,
    pub spinor_dim: usize,
    /// Anti-Hermitian generators with `g_i g_j + g_j g_i = -2 delta_ij`.
    pub gamma: Vec<CMatrix>,
    /// Hermitian involution anticommuting with every generator (even dim).
    pub chirality: Option<CMatrix>,
}

/// Boundary projection flavor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionKind {
    Chirality,
    MitBag,
}

/// Boundary projections and the scalar data of the spinor bound.
#[derive(Debug, Clone)]
pub struct SpinorBoundaryOps {
    pub plus: CMatrix,
    pub minus: CMatrix,
    pub kind: ProjectionKind,
    /// Mean curvature (trace of the shape operator).
    pub mean_curvature: f64,
    /// Scalar zeroth-order term `R / 4` (auxiliary curvature set to zero).
    pub lichnerowicz: f64,
}

/// Build the Clifford module in dimension `2 <= n <= 6` by the
/// Jordan-Wigner tensor construction: Hermitian anticommuting squares-to-one
/// generators multiplied by `i` to make them anti-Hermitian.
pub fn build_clifford(n: usize) -> Result<CliffordModule> {
    if !(2..=6).contains(&n) {
        return Err(Error::Argument(format!(
            "spinor dimension {n} outside 2..=6"
        )));
    }
    let m = n / 2;
    let dim = 1usize << m;
    let i_unit = Complex64::new(0.0, 1.0);
    let mut sigma: Vec<CMatrix> = Vec::with_capacity(n);
    for k in 0..m {
        // sigma_{2k+1} = Z^k (x) X (x) I^(m-k-1), sigma_{2k+2} likewise with Y
        let mut x_mat = identity(1);
        let mut y_mat = identity(1);
        for j in 0..m {
            let factor_x = if j < k {
                pauli_z()
            } else if j == k {
                pauli_x()
            } else {
                identity(2)
            };
            let factor_y = if j < k {
                pauli_z()
            } else if j == k {
                pauli_y()
            } else {
                identity(2)
            };
            x_mat = kron(&x_mat, &factor_x);
            y_mat = kron(&y_mat, &factor_y);
        }
        sigma.push(x_mat);
        sigma.push(y_mat);
    }
    if n % 2 == 1 {
        let mut z_mat = identity(1);
        for _ in 0..m {
            z_mat = kron(&z_mat, &pauli_z());
        }
        sigma.push(z_mat);
    }
    let gamma: Vec<CMatrix> = sigma.iter().map(|s| s * i_unit).collect();

    let chirality = if n % 2 == 0 {
        // Q = i^{n/2} gamma_1 ... gamma_n
        let mut q = identity(dim);
        for g in &gamma {
            q = &q * g;
        }
        let phase = i_unit.powu((n / 2) as u32);
        Some(q * phase)
    } else {
        None
    };

    Ok(CliffordModule {
        dim: n,
        spinor_dim: dim,
        gamma,
        chirality,
    })
}

impl CliffordModule {
    /// Largest violation of the defining relations (and of the chirality
    /// invariants when present).
    pub fn relation_residual(&self) -> f64 {
        let d = self.spinor_dim;
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            // anti-Hermitian
            let ah = (&self.gamma[i] + self.gamma[i].adjoint()).camax();
            worst = worst.max(ah);
            for j in 0..self.dim {
                let anti = &self.gamma[i] * &self.gamma[j] + &self.gamma[j] * &self.gamma[i];
                let target = if i == j {
                    identity(d) * Complex64::new(-2.0, 0.0)
                } else {
                    CMatrix::zeros(d, d)
                };
                worst = worst.max((anti - target).camax());
            }
        }
        if let Some(q) = &self.chirality {
            worst = worst.max((q * q - identity(d)).camax());
            worst = worst.max((q - q.adjoint()).camax());
            for g in &self.gamma {
                worst = worst.max((q * g + g * q).camax());
            }
        }
        worst
    }

    /// Clifford product with a real tangent vector.
    pub fn gamma_of(&self, v: &[f64]) -> Result<CMatrix> {
        if v.len() != self.dim {
            return Err(Error::Argument("vector dimension mismatch".into()));
        }
        let d = self.spinor_dim;
        let mut out = CMatrix::zeros(d, d);
        for (c, g) in v.iter().zip(&self.gamma) {
            out += g * Complex64::new(*c, 0.0);
        }
        Ok(out)
    }
}

/// Boundary projections `(1/2)(I -+ Qhat)` with `Qhat = gamma(nu) Q`
/// (chirality) or `Qhat = i gamma(nu)` (bag), for the normal along the
/// `nu_index` axis.
pub fn boundary_projection(
    module: &CliffordModule,
    nu_index: usize,
    kind: ProjectionKind,
) -> Result<SpinorBoundaryOps> {
    if nu_index >= module.dim {
        return Err(Error::Argument("normal index out of range".into()));
    }
    let d = module.spinor_dim;
    let g_nu = &module.gamma[nu_index];
    let qhat = match kind {
        ProjectionKind::Chirality => {
            let q = module.chirality.as_ref().ok_or_else(|| {
                Error::Argument("chirality projection needs an even dimension".into())
            })?;
            g_nu * q
        }
        ProjectionKind::MitBag => g_nu * Complex64::new(0.0, 1.0),
    };
    let half = Complex64::new(0.5, 0.0);
    let plus = (identity(d) - &qhat) * half;
    let minus = (identity(d) + &qhat) * half;
    Ok(SpinorBoundaryOps {
        plus,
        minus,
        kind,
        mean_curvature: 0.0,
        lichnerowicz: 0.0,
    })
}

impl SpinorBoundaryOps {
    /// Largest violation of the projection identities.
    pub fn projection_residual(&self) -> f64 {
        let d = self.plus.nrows();
        let id = identity(d);
        let mut worst = (&self.plus + &self.minus - &id).camax();
        worst = worst.max((&self.plus * &self.plus - &self.plus).camax());
        worst = worst.max((&self.minus * &self.minus - &self.minus).camax());
        worst = worst.max((&self.plus - self.plus.adjoint()).camax());
        worst = worst.max((&self.plus * &self.minus).camax());
        worst
    }

    /// Rank of each projection (a trace for idempotent Hermitian matrices).
    pub fn rank(&self) -> usize {
        self.plus.trace().re.round() as usize
    }
}

/// Maximal residual of the intertwining relation
/// `Pi_+- sigma(xi) = sigma(xi) Pi_-+` over tangential samples, where
/// `sigma(xi) = sum_j xi_j gamma(e_j) gamma(nu)` is the tangential symbol,
/// together with the anticommutation `sigma(xi) gamma(nu) = -gamma(nu)
/// sigma(xi)`.
pub fn intertwine_certificate(
    module: &CliffordModule,
    ops: &SpinorBoundaryOps,
    nu_index: usize,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    let n = module.dim;
    let g_nu = &module.gamma[nu_index];
    let mut rng = PathRng::new(seed, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..n_samples {
        let mut xi = vec![0.0; n];
        for (j, v) in xi.iter_mut().enumerate() {
            if j != nu_index {
                *v = rng.normal();
            }
        }
        if xi.iter().any(|v| v.abs() > 0.0) {
            let sym = tangential_symbol(module, &xi, nu_index)?;
            worst = worst.max((&ops.plus * &sym - &sym * &ops.minus).camax());
            worst = worst.max((&ops.minus * &sym - &sym * &ops.plus).camax());
            worst = worst.max((&sym * g_nu + g_nu * &sym).camax());
        }
    }
    Ok(worst)
}

/// `sigma(xi) = sum_j xi_j gamma(e_j) gamma(nu)` for tangential `xi`.
pub fn tangential_symbol(
    module: &CliffordModule,
    xi: &[f64],
    nu_index: usize,
) -> Result<CMatrix> {
    if xi.len() != module.dim {
        return Err(Error::Argument("symbol vector dimension mismatch".into()));
    }
    if xi[nu_index].abs() > 0.0 {
        return Err(Error::Argument("symbol vector must be tangential".into()));
    }
    let g_nu = &module.gamma[nu_index];
    Ok(module.gamma_of(xi)? * g_nu)
}

/// A spinor initial profile on the half-line: component amplitudes in the
/// eigenbasis of the boundary involution, s-profiles shared per component
/// parity (plus-components evolve by the Neumann kernel, minus by the
/// Dirichlet kernel).
pub struct SpinorProfile {
    /// Amplitudes of the Qhat = -1 block (Neumann side under `Pi_+ psi = 0`).
    pub plus_amplitudes: Vec<f64>,
    pub plus_profile: Box<dyn Fn(f64) -> f64 + Sync>,
    /// Amplitudes of the Qhat = +1 block (Dirichlet side).
    pub minus_amplitudes: Vec<f64>,
    pub minus_profile: Box<dyn Fn(f64) -> f64 + Sync>,
}

impl SpinorProfile {
    pub fn norm_at(&self, s: f64) -> f64 {
        let p = (self.plus_profile)(s);
        let m = (self.minus_profile)(s);
        let a: f64 = self.plus_amplitudes.iter().map(|a| a * a).sum();
        let b: f64 = self.minus_amplitudes.iter().map(|a| a * a).sum();
        (a * p * p + b * m * m).sqrt()
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SpinorBoundReport {
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub stderr: f64,
    pub margin: f64,
    pub pass: bool,
}

/// Flat half-space spinor bound: `|psi_t(x0)| <= E[|psi_0(x^t)|]` with the
/// left side from the mixed Dirichlet/Neumann line oracle (the bag
/// conditions diagonalize into scalar heat problems) and the right side by
/// Monte Carlo over reflecting paths.
pub fn spinor_fk_bound_check(
    profile: &SpinorProfile,
    x0_height: f64,
    t: f64,
    n_paths: usize,
    dt: f64,
    seed: u64,
) -> Result<SpinorBoundReport> {
    use crate::development::walk;
    use crate::geometry::{ManifoldModel, ModelKind};
    use rayon::prelude::*;

    if n_paths < 100 {
        return Err(Error::Argument("need at least 100 paths".into()));
    }
    // PDE side: evolve each block by its kernel
    let cutoff = x0_height + 14.0 * t.sqrt().max(1.0);
    let neumann =
        halfspace_evolve(KernelKind::Neumann, t, x0_height, &|s| (profile.plus_profile)(s), cutoff)?;
    let dirichlet = halfspace_evolve(
        KernelKind::Dirichlet,
        t,
        x0_height,
        &|s| (profile.minus_profile)(s),
        cutoff,
    )?;
    let a: f64 = profile.plus_amplitudes.iter().map(|a| a * a).sum();
    let b: f64 = profile.minus_amplitudes.iter().map(|a| a * a).sum();
    let lhs = (a * neumann * neumann + b * dirichlet * dirichlet).sqrt();

    // MC side: scalar expectation of the initial norm over reflecting paths
    let model = ManifoldModel::new(ModelKind::EuclideanHalfspace, 2, Default::default())?;
    let x0 = nalgebra::DVector::from_vec(vec![0.0, x0_height]);
    let vals: Result<Vec<f64>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let mut rng = PathRng::new(seed, p);
            let end = walk(&model, &x0, None, t, dt, &mut rng, |_| {})?;
            Ok(profile.norm_at(end.x[1]))
        })
        .collect();
    let vals = vals?;
    let mut acc = super::estimators::Kahan::default();
    for &v in &vals {
        acc.add(v);
    }
    let mean = acc.value() / n_paths as f64;
    let mut var = super::estimators::Kahan::default();
    for &v in &vals {
        var.add((v - mean) * (v - mean));
    }
    let stderr = (var.value() / (n_paths as f64 - 1.0)).sqrt() / (n_paths as f64).sqrt();
    let margin = mean - lhs;
    Ok(SpinorBoundReport {
        t,
        lhs,
        rhs: mean,
        stderr,
        margin,
        pass: margin >= -2.0 * stderr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clifford_relations_all_dims() {
        for n in 2..=6usize {
            let m = build_clifford(n).unwrap();
            assert_eq!(m.spinor_dim, 1 << (n / 2));
            assert!(
                m.relation_residual() < 1e-12,
                "relations at n={n}: {:.2e}",
                m.relation_residual()
            );
            assert_eq!(m.chirality.is_some(), n % 2 == 0);
        }
        assert!(build_clifford(1).is_err());
        assert!(build_clifford(7).is_err());
    }

    #[test]
    fn dimension_two_generators_anticommute_exactly() {
        let m = build_clifford(2).unwrap();
        let anti = &m.gamma[0] * &m.gamma[1] + &m.gamma[1] * &m.gamma[0];
        assert_eq!(anti.camax(), 0.0);
        let sq = &m.gamma[0] * &m.gamma[0];
        assert_eq!((sq + identity(2)).camax(), 0.0);
    }

    #[test]
    fn projections_have_half_rank() {
        for n in [2usize, 4, 6] {
            let m = build_clifford(n).unwrap();
            for kind in [ProjectionKind::Chirality, ProjectionKind::MitBag] {
                let ops = boundary_projection(&m, n - 1, kind).unwrap();
                assert!(
                    ops.projection_residual() < 1e-12,
                    "projection identities at n={n} {kind:?}"
                );
                assert_eq!(ops.rank(), m.spinor_dim / 2);
            }
        }
        for n in [3usize, 5] {
            let m = build_clifford(n).unwrap();
            assert!(boundary_projection(&m, n - 1, ProjectionKind::Chirality).is_err());
            let ops = boundary_projection(&m, n - 1, ProjectionKind::MitBag).unwrap();
            assert!(ops.projection_residual() < 1e-12);
            assert_eq!(ops.rank(), m.spinor_dim / 2);
        }
    }

    #[test]
    fn involution_squares_to_identity() {
        for n in [2usize, 4, 6] {
            let m = build_clifford(n).unwrap();
            for kind in [ProjectionKind::Chirality, ProjectionKind::MitBag] {
                let ops = boundary_projection(&m, n - 1, kind).unwrap();
                // Qhat = I - 2 Pi_+
                let qhat = identity(m.spinor_dim) - &ops.plus * Complex64::new(2.0, 0.0);
                assert!((&qhat * &qhat - identity(m.spinor_dim)).camax() < 1e-12);
            }
        }
    }

    #[test]
    fn intertwining_certificates_are_tight() {
        for n in 2..=6usize {
            let m = build_clifford(n).unwrap();
            let kinds: Vec<ProjectionKind> = if n % 2 == 0 {
                vec![ProjectionKind::Chirality, ProjectionKind::MitBag]
            } else {
                vec![ProjectionKind::MitBag]
            };
            for kind in kinds {
                let ops = boundary_projection(&m, n - 1, kind).unwrap();
                let res = intertwine_certificate(&m, &ops, n - 1, 1000, 2024).unwrap();
                assert!(res < 1e-13, "intertwining residual {res:.2e} at n={n} {kind:?}");
            }
        }
    }

    #[test]
    fn zero_symbol_has_zero_residual() {
        let m = build_clifford(4).unwrap();
        let sym = tangential_symbol(&m, &[0.0, 0.0, 0.0, 0.0], 3).unwrap();
        assert_eq!(sym.camax(), 0.0);
        assert!(tangential_symbol(&m, &[0.0, 0.0, 0.0, 1.0], 3).is_err());
    }

    #[test]
    fn constant_spinor_bound_is_sharp() {
        // constant profile: RHS = |psi_0| exactly, LHS <= |psi_0|
        let profile = SpinorProfile {
            plus_amplitudes: vec![1.0, 0.5],
            plus_profile: Box::new(|_| 1.0),
            minus_amplitudes: vec![0.0],
            minus_profile: Box::new(|_| 0.0),
        };
        let rep = spinor_fk_bound_check(&profile, 0.7, 0.3, 200, 1e-3, 5).unwrap();
        let norm = (1.0f64 + 0.25).sqrt();
        assert!((rep.rhs - norm).abs() < 1e-12);
        assert!(rep.lhs <= norm + 1e-12);
        assert!(rep.pass);
    }

    #[test]
    fn gaussian_spinor_bound_holds_with_margin() {
        let profile = SpinorProfile {
            plus_amplitudes: vec![0.8],
            plus_profile: Box::new(|s| (-(s - 1.0) * (s - 1.0)).exp()),
            minus_amplitudes: vec![0.6],
            minus_profile: Box::new(|s| s * (-s * s).exp()),
        };
        let rep = spinor_fk_bound_check(&profile, 0.5, 0.5, 4000, 1e-3, 6).unwrap();
        assert!(rep.pass, "spinor bound failed: {rep:?}");
        assert!(rep.margin > 0.0);
    }

    #[test]
    fn spinor_bound_short_time_consistency() {
        let profile = SpinorProfile {
            plus_amplitudes: vec![1.0],
            plus_profile: Box::new(|s| 1.0 / (1.0 + s * s)),
            minus_amplitudes: vec![0.0],
            minus_profile: Box::new(|_| 0.0),
        };
        let dt = 1e-3;
        let x0 = 1.1;
        let rep = spinor_fk_bound_check(&profile, x0, dt, 500, dt, 7).unwrap();
        let init = profile.norm_at(x0);
        assert!((rep.lhs - init).abs() < 5.0 * dt.sqrt());
        assert!((rep.rhs - init).abs() < 5.0 * dt.sqrt());
    }
}
