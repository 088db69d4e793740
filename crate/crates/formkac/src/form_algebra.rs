//! Exterior algebra over an n-dimensional inner-product space, realized as
//! explicit dense matrices on the C(n,q)-dimensional coefficient space.
//!
//! Basis coefficients are indexed by increasing multi-indices in
//! lexicographic order; this ordering is fixed once here and used by every
//! matrix representation in the crate. Degrees run over 0..=n with n <= 6,
//! so all matrices are at most 20x20 and dense storage is the right call.
//!
//! The curvature endomorphism on q-forms is assembled from the curvature
//! tensor through the derivation action
//!   R_q = sum_{a,b} (e^b wedge e_a interior) . Rho(e_a, e_b),
//! where Rho(e_a,e_b) acts on one-forms by e^c -> -sum_d R_{abcd} e^d and
//! extends to q-forms as a derivation. Its correctness contract is the
//! triple of pinning identities (Ricci at degree one, Hodge duality,
//! constant-curvature scalar form) exercised in the tests and in the
//! acceptance suite.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Binomial coefficient, exact for the small arguments used here.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut num = 1usize;
    for i in 0..k {
        num = num * (n - i) / (i + 1);
    }
    num
}

/// Ordered basis of increasing multi-indices of length `q` over `{0..n-1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormBasis {
    pub n: usize,
    pub q: usize,
    indices: Vec<Vec<u8>>,
}

impl FormBasis {
    pub fn new(n: usize, q: usize) -> Result<Self> {
        if q > n {
            return Err(Error::Argument(format!("degree {q} exceeds dimension {n}")));
        }
        let mut indices = Vec::with_capacity(binomial(n, q));
        let mut cur: Vec<u8> = (0..q as u8).collect();
        loop {
            indices.push(cur.clone());
            // next lexicographic increasing q-subset
            let mut i = q;
            loop {
                if i == 0 {
                    return Ok(FormBasis { n, q, indices });
                }
                i -= 1;
                if cur[i] < (n - q + i) as u8 {
                    cur[i] += 1;
                    for j in i + 1..q {
                        cur[j] = cur[j - 1] + 1;
                    }
                    break;
                }
            }
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn index_set(&self, k: usize) -> &[u8] {
        &self.indices[k]
    }

    /// Position of a sorted multi-index in the basis.
    pub fn position(&self, idx: &[u8]) -> Option<usize> {
        self.indices.binary_search_by(|probe| probe.as_slice().cmp(idx)).ok()
    }

    /// Position and sign of an arbitrary (unsorted, possibly repeating)
    /// index tuple. Returns `None` on repeats.
    pub fn position_signed(&self, idx: &[u8]) -> Option<(usize, f64)> {
        let mut v: Vec<u8> = idx.to_vec();
        let mut sign = 1.0;
        // insertion sort with sign tracking
        for i in 1..v.len() {
            let mut j = i;
            while j > 0 && v[j - 1] > v[j] {
                v.swap(j - 1, j);
                sign = -sign;
                j -= 1;
            }
        }
        for w in v.windows(2) {
            if w[0] == w[1] {
                return None;
            }
        }
        self.position(&v).map(|p| (p, sign))
    }

    /// Human-readable label like `e^{124}` (1-based).
    pub fn label(&self, k: usize) -> String {
        if self.q == 0 {
            return "1".to_string();
        }
        let s: String = self.indices[k].iter().map(|i| (i + 1).to_string()).collect();
        format!("e^{{{s}}}")
    }
}

/// Dense lookup from arbitrary index tuples of length q (radix-n encoded)
/// to basis position and permutation sign. Repeated indices map to `None`.
#[derive(Debug, Clone)]
pub struct TupleTable {
    pub n: usize,
    pub q: usize,
    entries: Vec<Option<(u32, f64)>>,
}

impl TupleTable {
    pub fn new(n: usize, q: usize) -> Result<Self> {
        let basis = FormBasis::new(n, q)?;
        let size = n.pow(q as u32);
        let mut entries = vec![None; size];
        let mut tuple = vec![0u8; q];
        for code in 0..size {
            let mut rem = code;
            for slot in 0..q {
                tuple[slot] = (rem % n) as u8;
                rem /= n;
            }
            entries[code] = basis.position_signed(&tuple).map(|(p, s)| (p as u32, s));
        }
        Ok(TupleTable { n, q, entries })
    }

    #[inline]
    pub fn encode(&self, tuple: &[u8]) -> usize {
        let mut code = 0usize;
        for &t in tuple.iter().rev() {
            code = code * self.n + t as usize;
        }
        code
    }

    #[inline]
    pub fn lookup(&self, tuple: &[u8]) -> Option<(usize, f64)> {
        self.entries[self.encode(tuple)].map(|(p, s)| (p as usize, s))
    }
}

/// Coefficient vector of a q-form in an orthonormal frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FormCoefficients {
    pub n: usize,
    pub q: usize,
    pub coeffs: DVector<f64>,
}

impl FormCoefficients {
    pub fn zero(n: usize, q: usize) -> Result<Self> {
        let dim = FormBasis::new(n, q)?.len();
        Ok(FormCoefficients {
            n,
            q,
            coeffs: DVector::zeros(dim),
        })
    }

    pub fn from_vec(n: usize, q: usize, coeffs: Vec<f64>) -> Result<Self> {
        let dim = FormBasis::new(n, q)?.len();
        if coeffs.len() != dim {
            return Err(Error::Argument(format!(
                "coefficient length {} != C({n},{q}) = {dim}",
                coeffs.len()
            )));
        }
        Ok(FormCoefficients {
            n,
            q,
            coeffs: DVector::from_vec(coeffs),
        })
    }

    /// Basis form e^I for the k-th multi-index.
    pub fn basis_form(n: usize, q: usize, k: usize) -> Result<Self> {
        let mut f = Self::zero(n, q)?;
        f.coeffs[k] = 1.0;
        Ok(f)
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.norm()
    }
}

/// Endomorphism of the degree-q coefficient space.
#[derive(Debug, Clone, PartialEq)]
pub struct EndoMatrix {
    pub n: usize,
    pub q: usize,
    pub mat: DMatrix<f64>,
}

impl EndoMatrix {
    pub fn identity(n: usize, q: usize) -> Result<Self> {
        let dim = FormBasis::new(n, q)?.len();
        Ok(EndoMatrix {
            n,
            q,
            mat: DMatrix::identity(dim, dim),
        })
    }

    pub fn zeros(n: usize, q: usize) -> Result<Self> {
        let dim = FormBasis::new(n, q)?.len();
        Ok(EndoMatrix {
            n,
            q,
            mat: DMatrix::zeros(dim, dim),
        })
    }

    pub fn apply(&self, f: &FormCoefficients) -> Result<FormCoefficients> {
        if f.n != self.n || f.q != self.q {
            return Err(Error::Argument(
                "endomorphism/form degree mismatch".to_string(),
            ));
        }
        Ok(FormCoefficients {
            n: self.n,
            q: self.q,
            coeffs: &self.mat * &f.coeffs,
        })
    }

    /// Dump as CSV rows (debug aid).
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.mat.nrows() {
            let row: Vec<String> = (0..self.mat.ncols())
                .map(|j| format!("{}", self.mat[(i, j)]))
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Riemann curvature components `R_{ijkl}` in an orthonormal frame, with the
/// convention fixed so constant curvature c gives
/// `R_{ijkl} = c (delta_ik delta_jl - delta_il delta_jk)`.
#[derive(Debug, Clone)]
pub struct CurvatureTensor {
    pub n: usize,
    comps: Vec<f64>,
}

impl CurvatureTensor {
    pub fn zeros(n: usize) -> Self {
        CurvatureTensor {
            n,
            comps: vec![0.0; n * n * n * n],
        }
    }

    pub fn constant_curvature(n: usize, c: f64) -> Self {
        let mut t = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
                        t.set(i, j, k, l, c * (d(i, k) * d(j, l) - d(i, l) * d(j, k)));
                    }
                }
            }
        }
        t
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.comps[((i * self.n + j) * self.n + k) * self.n + l]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, l: usize, v: f64) {
        self.comps[((i * self.n + j) * self.n + k) * self.n + l] = v;
    }

    /// Largest violation of the antisymmetry / pair / first-Bianchi symmetries.
    pub fn symmetry_residual(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let r = self.get(i, j, k, l);
                        worst = worst.max((r + self.get(j, i, k, l)).abs());
                        worst = worst.max((r + self.get(i, j, l, k)).abs());
                        worst = worst.max((r - self.get(k, l, i, j)).abs());
                        let bianchi =
                            r + self.get(j, k, i, l) + self.get(k, i, j, l);
                        worst = worst.max(bianchi.abs());
                    }
                }
            }
        }
        worst
    }

    /// Ricci endomorphism `Ric_{jl} = sum_i R_{ijil}`.
    pub fn ricci(&self) -> DMatrix<f64> {
        let n = self.n;
        let mut ric = DMatrix::zeros(n, n);
        for j in 0..n {
            for l in 0..n {
                let mut s = 0.0;
                for i in 0..n {
                    s += self.get(i, j, i, l);
                }
                ric[(j, l)] = s;
            }
        }
        ric
    }
}

/// Matrix of `v wedge .` from degree q to q+1.
pub fn wedge_vector_matrix(v: &DVector<f64>, n: usize, q: usize) -> Result<DMatrix<f64>> {
    let src = FormBasis::new(n, q)?;
    let dst = FormBasis::new(n, q + 1)?;
    let mut m = DMatrix::zeros(dst.len(), src.len());
    for (col, idx) in src.indices.iter().enumerate() {
        for a in 0..n as u8 {
            if idx.contains(&a) {
                continue;
            }
            let mut merged = Vec::with_capacity(q + 1);
            merged.push(a);
            merged.extend_from_slice(idx);
            if let Some((row, sign)) = dst.position_signed(&merged) {
                m[(row, col)] += sign * v[a as usize];
            }
        }
    }
    Ok(m)
}

/// Matrix of `v interior .` from degree q to q-1.
pub fn interior_vector_matrix(v: &DVector<f64>, n: usize, q: usize) -> Result<DMatrix<f64>> {
    if q == 0 {
        return Err(Error::Argument("interior product needs degree >= 1".into()));
    }
    let src = FormBasis::new(n, q)?;
    let dst = FormBasis::new(n, q - 1)?;
    let mut m = DMatrix::zeros(dst.len(), src.len());
    for (col, idx) in src.indices.iter().enumerate() {
        for (pos, &a) in idx.iter().enumerate() {
            let reduced: Vec<u8> = idx
                .iter()
                .copied()
                .filter(|&b| b != a)
                .collect();
            let sign = if pos % 2 == 0 { 1.0 } else { -1.0 };
            let row = dst.position(&reduced).expect("reduced index in basis");
            m[(row, col)] += sign * v[a as usize];
        }
    }
    Ok(m)
}

/// Wedge product of coefficient forms.
pub fn wedge(alpha: &FormCoefficients, beta: &FormCoefficients) -> Result<FormCoefficients> {
    if alpha.n != beta.n {
        return Err(Error::Argument("wedge over mismatched dimensions".into()));
    }
    let n = alpha.n;
    let (p, q) = (alpha.q, beta.q);
    if p + q > n {
        return Err(Error::Argument(format!(
            "wedge degree overflow: {p}+{q} > {n}"
        )));
    }
    let ba = FormBasis::new(n, p)?;
    let bb = FormBasis::new(n, q)?;
    let bc = FormBasis::new(n, p + q)?;
    let mut out = DVector::zeros(bc.len());
    for (ia, idx_a) in ba.indices.iter().enumerate() {
        let ca = alpha.coeffs[ia];
        if ca == 0.0 {
            continue;
        }
        'next: for (ib, idx_b) in bb.indices.iter().enumerate() {
            let cb = beta.coeffs[ib];
            if cb == 0.0 {
                continue;
            }
            for x in idx_a.iter() {
                if idx_b.contains(x) {
                    continue 'next;
                }
            }
            let mut merged = Vec::with_capacity(p + q);
            merged.extend_from_slice(idx_a);
            merged.extend_from_slice(idx_b);
            if let Some((k, sign)) = bc.position_signed(&merged) {
                out[k] += sign * ca * cb;
            }
        }
    }
    Ok(FormCoefficients {
        n,
        q: p + q,
        coeffs: out,
    })
}

/// Interior product `v interior omega` (metric adjoint of wedging with v).
pub fn interior(v: &DVector<f64>, omega: &FormCoefficients) -> Result<FormCoefficients> {
    if v.len() != omega.n {
        return Err(Error::Argument("vector dimension mismatch".into()));
    }
    let m = interior_vector_matrix(v, omega.n, omega.q)?;
    Ok(FormCoefficients {
        n: omega.n,
        q: omega.q - 1,
        coeffs: m * &omega.coeffs,
    })
}

/// Sign of the permutation sending `(I, I^c)` to `(0, ..., n-1)`.
fn complement_sign(idx: &[u8], n: usize) -> (Vec<u8>, f64) {
    let comp: Vec<u8> = (0..n as u8).filter(|a| !idx.contains(a)).collect();
    let mut perm: Vec<u8> = idx.to_vec();
    perm.extend_from_slice(&comp);
    // count inversions
    let mut inv = 0usize;
    for i in 0..perm.len() {
        for j in i + 1..perm.len() {
            if perm[i] > perm[j] {
                inv += 1;
            }
        }
    }
    (comp, if inv % 2 == 0 { 1.0 } else { -1.0 })
}

/// Matrix of the Hodge star from degree q to n-q, with orientation `e^{1...n}`.
pub fn hodge_star_matrix(n: usize, q: usize) -> Result<DMatrix<f64>> {
    let src = FormBasis::new(n, q)?;
    let dst = FormBasis::new(n, n - q)?;
    let mut m = DMatrix::zeros(dst.len(), src.len());
    for (col, idx) in src.indices.iter().enumerate() {
        let (comp, sign) = complement_sign(idx, n);
        let row = dst.position(&comp).expect("complement in basis");
        m[(row, col)] = sign;
    }
    Ok(m)
}

/// Hodge star of a coefficient form.
pub fn hodge_star(omega: &FormCoefficients) -> Result<FormCoefficients> {
    let m = hodge_star_matrix(omega.n, omega.q)?;
    Ok(FormCoefficients {
        n: omega.n,
        q: omega.n - omega.q,
        coeffs: m * &omega.coeffs,
    })
}

/// Tangential and normal projections `(nu interior nu wedge, nu wedge nu interior)`
/// on degree-q forms, for a unit vector nu.
pub fn projections(nu: &DVector<f64>, q: usize) -> Result<(EndoMatrix, EndoMatrix)> {
    let n = nu.len();
    if (nu.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::Argument(format!(
            "projection normal is not unit: |nu| = {}",
            nu.norm()
        )));
    }
    if q > n {
        return Err(Error::Argument("degree exceeds dimension".into()));
    }
    let dim = binomial(n, q);
    let (tan, nor) = if q == 0 {
        (DMatrix::identity(dim, dim), DMatrix::zeros(dim, dim))
    } else if q == n {
        (DMatrix::zeros(dim, dim), DMatrix::identity(dim, dim))
    } else {
        let w_q = wedge_vector_matrix(nu, n, q)?; // q -> q+1
        let i_q1 = interior_vector_matrix(nu, n, q + 1)?; // q+1 -> q
        let i_q = interior_vector_matrix(nu, n, q)?; // q -> q-1
        let w_q1 = wedge_vector_matrix(nu, n, q - 1)?; // q-1 -> q
        (&i_q1 * &w_q, &w_q1 * &i_q)
    };
    Ok((
        EndoMatrix { n, q, mat: tan },
        EndoMatrix { n, q, mat: nor },
    ))
}

/// Derivation extension of a symmetric endomorphism `S` (acting on
/// one-form coefficients by `e^c -> sum_d S_{cd} e^d`) to degree-q forms.
pub fn derivation_matrix(s: &DMatrix<f64>, q: usize) -> Result<EndoMatrix> {
    let n = s.nrows();
    if s.ncols() != n {
        return Err(Error::Argument("derivation of non-square matrix".into()));
    }
    let basis = FormBasis::new(n, q)?;
    let dim = basis.len();
    let mut m = DMatrix::zeros(dim, dim);
    for (col, idx) in basis.indices.iter().enumerate() {
        for (slot, &c) in idx.iter().enumerate() {
            for d in 0..n as u8 {
                let coeff = s[(c as usize, d as usize)];
                if coeff == 0.0 {
                    continue;
                }
                let mut replaced = idx.clone();
                replaced[slot] = d;
                if let Some((row, sign)) = basis.position_signed(&replaced) {
                    m[(row, col)] += sign * coeff;
                }
            }
        }
    }
    Ok(EndoMatrix { n, q, mat: m })
}

/// Degree-q extension of the boundary shape operator (eigenvalues on a
/// principal tangential basis form are the q-fold sums of the principal
/// curvatures it selects).
pub fn shape_matrix(a: &DMatrix<f64>, q: usize) -> Result<EndoMatrix> {
    let asym = (a - a.transpose()).abs().max();
    if asym > 1e-9 {
        return Err(Error::Argument(format!(
            "shape operator not symmetric (residual {asym:.3e})"
        )));
    }
    derivation_matrix(a, q)
}

/// Curvature endomorphism on degree-q forms from frame components.
pub fn weitzenbock_matrix(r: &CurvatureTensor, q: usize) -> Result<EndoMatrix> {
    let sym = r.symmetry_residual();
    if sym > 1e-8 {
        return Err(Error::Argument(format!(
            "curvature symmetries violated (residual {sym:.3e})"
        )));
    }
    let n = r.n;
    let dim = binomial(n, q);
    let mut total = DMatrix::zeros(dim, dim);
    if q == 0 || q == n {
        return Ok(EndoMatrix { n, q, mat: total });
    }
    let mut e_a = DVector::zeros(n);
    let mut e_b = DVector::zeros(n);
    for a in 0..n {
        e_a.fill(0.0);
        e_a[a] = 1.0;
        let int_a = interior_vector_matrix(&e_a, n, q)?; // q -> q-1
        for b in 0..n {
            e_b.fill(0.0);
            e_b[b] = 1.0;
            let wedge_b = wedge_vector_matrix(&e_b, n, q - 1)?; // q-1 -> q
            // curvature action on one-forms: e^c -> -sum_d R_{abcd} e^d
            let mut s = DMatrix::zeros(n, n);
            for c in 0..n {
                for d in 0..n {
                    s[(c, d)] = -r.get(a, b, c, d);
                }
            }
            let rho = derivation_matrix(&s, q)?;
            total += &wedge_b * &int_a * &rho.mat;
        }
    }
    Ok(EndoMatrix { n, q, mat: total })
}

/// Least eigenvalue of a symmetric endomorphism.
pub fn r_q_min(m: &EndoMatrix) -> f64 {
    if m.mat.nrows() == 0 {
        return 0.0;
    }
    let sym = nalgebra::SymmetricEigen::new(m.mat.clone());
    sym.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Symmetric part residual, used by sanity checks.
pub fn symmetry_defect(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).abs().max()
}
