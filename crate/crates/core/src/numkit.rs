//! Dense complex linear algebra for small qudit systems.
//!
//! Everything here is sized for d ≤ 4 and up to threefold tensor products,
//! so plain row-major storage and O(n³) kernels are used throughout.
//! Subsystem 1 is always the slow (left) tensor factor.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Default tolerance for structural checks (Hermiticity, positivity, identities).
pub const STRUCTURAL_TOL: f64 = 1e-10;
/// Default tolerance for residuals of iterative solvers.
pub const SOLVER_TOL: f64 = 1e-7;
/// Relative Hermiticity tolerance accepted by [`HermitianMatrix::new`].
pub const HERMITIAN_REL_TOL: f64 = 1e-12;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Dense complex matrix in row-major order.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:+.6}{:+.6}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Builds a matrix from row-major entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries cannot form a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let cols = rows[0].len();
        Self::from_fn(rows.len(), cols, |i, j| C64::new(rows[i][j], 0.0))
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = C64::new(v, 0.0);
        }
        m
    }

    /// Column vector from amplitudes.
    pub fn column(v: &[C64]) -> Self {
        Self::from_fn(v.len(), 1, |i, _| v[i])
    }

    /// Outer product |u⟩⟨v|.
    pub fn ket_bra(u: &[C64], v: &[C64]) -> Self {
        Self::from_fn(u.len(), v.len(), |i, j| u[i] * v[j].conj())
    }

    /// Matrix unit |i⟩⟨j| in dimension n.
    pub fn unit(n: usize, i: usize, j: usize) -> Self {
        let mut m = Self::zeros(n, n);
        m[(i, j)] = ONE;
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn col(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, k: f64) -> Self {
        self.map(|z| z * k)
    }

    pub fn scale_c(&self, k: C64) -> Self {
        self.map(|z| z * k)
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let row = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        out
    }

    /// Returns `self · m · self*`.
    pub fn conjugate(&self, m: &Self) -> Self {
        self.matmul(m).matmul(&self.adjoint())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Hilbert–Schmidt inner product tr(self* · other).
    pub fn hs_inner(&self, other: &Self) -> C64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// max |A[i][j] − conj(A[j][i])|
    pub fn hermiticity_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// (A + A*)/2
    pub fn hermitian_part(&self) -> Self {
        assert!(self.is_square());
        Self::from_fn(self.rows, self.cols, |i, j| {
            (self[(i, j)] + self[(j, i)].conj()) * 0.5
        })
    }

    /// Square block `(bi, bj)` of size `n`.
    pub fn block(&self, bi: usize, bj: usize, n: usize) -> Self {
        Self::from_fn(n, n, |i, j| self[(bi * n + i, bj * n + j)])
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Add<&CMatrix> for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Sub<&CMatrix> for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl AddAssign<&CMatrix> for CMatrix {
    fn add_assign(&mut self, rhs: &CMatrix) {
        assert_eq!(
            (self.rows, self.cols),
            (rhs.rows, rhs.cols),
            "add dimension mismatch"
        );
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl SubAssign<&CMatrix> for CMatrix {
    fn sub_assign(&mut self, rhs: &CMatrix) {
        assert_eq!(
            (self.rows, self.cols),
            (rhs.rows, rhs.cols),
            "sub dimension mismatch"
        );
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a -= b;
        }
    }
}

impl Mul<&CMatrix> for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.matmul(rhs)
    }
}

impl Mul<f64> for &CMatrix {
    type Output = CMatrix;
    fn mul(self, k: f64) -> CMatrix {
        self.scale(k)
    }
}

impl Neg for &CMatrix {
    type Output = CMatrix;
    fn neg(self) -> CMatrix {
        self.map(|z| -z)
    }
}

/// A square matrix checked to be Hermitian.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix(CMatrix);

impl HermitianMatrix {
    /// Accepts `m` if its Hermiticity defect is within `1e-12 · max|m|`; the
    /// stored value is the exact Hermitian part.
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension(format!(
                "Hermitian matrix must be square, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        if !m.is_finite() {
            return Err(Error::NonFinite);
        }
        let defect = m.hermiticity_defect();
        if defect > HERMITIAN_REL_TOL * m.max_abs().max(f64::MIN_POSITIVE) {
            return Err(Error::NotHermitian(defect));
        }
        Ok(Self(m.hermitian_part()))
    }

    /// Takes the Hermitian part without checking how far `m` was from it.
    pub fn from_hermitian_part(m: &CMatrix) -> Self {
        Self(m.hermitian_part())
    }

    pub fn identity(n: usize) -> Self {
        Self(CMatrix::identity(n))
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn trace_re(&self) -> f64 {
        self.0.trace().re
    }
}

impl std::ops::Deref for HermitianMatrix {
    type Target = CMatrix;
    fn deref(&self) -> &CMatrix {
        &self.0
    }
}

/// Which tensor factor of a bipartite space to keep.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subsystem {
    First,
    Second,
}

/// Kronecker product with `a` as the slow index.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ra, ca, rb, cb) = (a.rows(), a.cols(), b.rows(), b.cols());
    let mut out = CMatrix::zeros(ra * rb, ca * cb);
    for i in 0..ra {
        for j in 0..ca {
            let aij = a[(i, j)];
            if aij == ZERO {
                continue;
            }
            for k in 0..rb {
                for l in 0..cb {
                    out[(i * rb + k, j * cb + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Partial trace on C^{d1} ⊗ C^{d2} keeping the requested factor.
pub fn partial_trace(m: &CMatrix, dims: (usize, usize), keep: Subsystem) -> Result<CMatrix> {
    let (d1, d2) = dims;
    if !m.is_square() || m.rows() != d1 * d2 {
        return Err(Error::Dimension(format!(
            "partial trace over {d1}x{d2} factors needs a {}x{} matrix, got {}x{}",
            d1 * d2,
            d1 * d2,
            m.rows(),
            m.cols()
        )));
    }
    Ok(match keep {
        Subsystem::First => CMatrix::from_fn(d1, d1, |i, j| {
            (0..d2).map(|k| m[(i * d2 + k, j * d2 + k)]).sum()
        }),
        Subsystem::Second => CMatrix::from_fn(d2, d2, |i, j| {
            (0..d1).map(|k| m[(k * d2 + i, k * d2 + j)]).sum()
        }),
    })
}

/// Traces out factor `which` of a multipartite operator with factor dimensions `dims`.
pub fn trace_out(m: &CMatrix, dims: &[usize], which: usize) -> Result<CMatrix> {
    let total: usize = dims.iter().product();
    if which >= dims.len() || !m.is_square() || m.rows() != total {
        return Err(Error::Dimension(format!(
            "cannot trace out factor {which} of {dims:?} from a {}x{} matrix",
            m.rows(),
            m.cols()
        )));
    }
    let before: usize = dims[..which].iter().product();
    let mid = dims[which];
    let after: usize = dims[which + 1..].iter().product();
    let n = before * after;
    Ok(CMatrix::from_fn(n, n, |r, c| {
        let (ra, rb) = (r / after, r % after);
        let (ca, cb) = (c / after, c % after);
        (0..mid)
            .map(|k| m[((ra * mid + k) * after + rb, (ca * mid + k) * after + cb)])
            .sum()
    }))
}

/// Eigenvalues in ascending order with the matching unitary of column eigenvectors.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl EigenSystem {
    /// V · diag(f(λ)) · V*
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let w = f(self.values[j]);
            for i in 0..n {
                scaled[(i, j)] *= w;
            }
        }
        scaled.matmul(&self.vectors.adjoint())
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.reconstruct_with(|x| x)
    }
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi rotations.
pub fn hermitian_eigensystem(m: &CMatrix) -> Result<EigenSystem> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "eigensystem needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let scale = m.max_abs().max(1.0);
    let defect = m.hermiticity_defect();
    if defect > STRUCTURAL_TOL * scale {
        return Err(Error::NotHermitian(defect));
    }
    Ok(jacobi(m.hermitian_part()))
}

fn off_diagonal_norm(a: &CMatrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

fn jacobi(mut a: CMatrix) -> EigenSystem {
    let n = a.rows();
    let mut v = CMatrix::identity(n);
    let total = a.frobenius_norm();
    for sweep in 0..JACOBI_MAX_SWEEPS {
        let off = off_diagonal_norm(&a);
        if off <= 1e-15 * total || off == 0.0 {
            break;
        }
        // Early sweeps skip small pivots; later ones rotate everything nonzero.
        let threshold = if sweep < 3 {
            0.2 * off / (n * n) as f64
        } else {
            0.0
        };
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let g = apq.norm();
                if g == 0.0 || g < threshold {
                    continue;
                }
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                if sweep > 3 && g < 1e-18 * (app.abs() + aqq.abs()) {
                    a[(p, q)] = ZERO;
                    a[(q, p)] = ZERO;
                    continue;
                }
                rotate(&mut a, &mut v, p, q, apq, g, app, aqq);
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    order.sort_by(|&i, &j| diag[i].total_cmp(&diag[j]));
    let values = order.iter().map(|&i| diag[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    EigenSystem { values, vectors }
}

#[allow(clippy::too_many_arguments)]
fn rotate(
    a: &mut CMatrix,
    v: &mut CMatrix,
    p: usize,
    q: usize,
    apq: C64,
    g: f64,
    app: f64,
    aqq: f64,
) {
    let n = a.rows();
    // Phase e^{iφ} of the pivot; diag(1, e^{-iφ}) makes the 2x2 block real.
    let phase = apq / g;
    let theta = (aqq - app) / (2.0 * g);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let t = if theta == 0.0 { 1.0 } else { t };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let u_pp = C64::new(c, 0.0);
    let u_pq = C64::new(s, 0.0);
    let u_qp = -phase.conj() * s;
    let u_qq = phase.conj() * c;
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * u_pp + akq * u_qp;
        a[(k, q)] = akp * u_pq + akq * u_qq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = u_pp.conj() * apk + u_qp.conj() * aqk;
        a[(q, k)] = u_pq.conj() * apk + u_qq.conj() * aqk;
    }
    a[(p, q)] = ZERO;
    a[(q, p)] = ZERO;
    a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
    a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * u_pp + vkq * u_qp;
        v[(k, q)] = vkp * u_pq + vkq * u_qq;
    }
}

/// Smallest eigenvalue; the matrix counts as PSD when this is ≥ −tol.
pub fn psd_margin(m: &CMatrix) -> Result<f64> {
    Ok(hermitian_eigensystem(m)?.values[0])
}

/// Nearest PSD matrix in Frobenius norm (negative eigenvalues clipped to zero).
pub fn project_psd(m: &CMatrix) -> Result<CMatrix> {
    let es = hermitian_eigensystem(m)?;
    if es.values[0] >= 0.0 {
        return Ok(m.hermitian_part());
    }
    Ok(es.reconstruct_with(|x| x.max(0.0)).hermitian_part())
}

/// Orthonormal basis of Hermitian d×d matrices under the real HS inner product:
/// E_aa, (E_ab + E_ba)/√2 and i(E_ab − E_ba)/√2 for a < b.
pub fn hermitian_operator_basis(d: usize) -> Vec<CMatrix> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(d * d);
    for a in 0..d {
        out.push(CMatrix::unit(d, a, a));
    }
    for a in 0..d {
        for b in a + 1..d {
            let mut sym = CMatrix::zeros(d, d);
            sym[(a, b)] = C64::new(r, 0.0);
            sym[(b, a)] = C64::new(r, 0.0);
            out.push(sym);
            let mut anti = CMatrix::zeros(d, d);
            anti[(a, b)] = C64::new(0.0, -r);
            anti[(b, a)] = C64::new(0.0, r);
            out.push(anti);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn shift2() -> CMatrix {
        CMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])
    }

    fn flip(d: usize) -> CMatrix {
        let mut f = CMatrix::zeros(d * d, d * d);
        for i in 0..d {
            for j in 0..d {
                f[(j * d + i, i * d + j)] = ONE;
            }
        }
        f
    }

    fn omega_projector(d: usize) -> CMatrix {
        let mut v = vec![ZERO; d * d];
        for x in 0..d {
            v[x * d + x] = c(1.0 / (d as f64).sqrt(), 0.0);
        }
        CMatrix::ket_bra(&v, &v)
    }

    #[test]
    fn kron_identity_and_projector() {
        assert_eq!(
            kron(&CMatrix::identity(2), &CMatrix::identity(2)),
            CMatrix::identity(4)
        );
        assert_eq!(
            kron(&CMatrix::diag(&[1.0, 0.0]), &CMatrix::identity(2)),
            CMatrix::diag(&[1.0, 1.0, 0.0, 0.0])
        );
    }

    #[test]
    fn kron_shift_moves_product_basis_vector() {
        let xx = kron(&shift2(), &shift2());
        let phi00 = CMatrix::column(&[ONE, ZERO, ZERO, ZERO]);
        let phi11 = CMatrix::column(&[ZERO, ZERO, ZERO, ONE]);
        assert_eq!(xx.matmul(&phi00), phi11);
    }

    #[test]
    fn kron_block_structure_for_rectangular_factors() {
        let a = CMatrix::from_fn(2, 3, |i, j| c((i * 3 + j) as f64, 1.0));
        let b = CMatrix::from_fn(3, 2, |i, j| c(i as f64, -(j as f64)));
        let k = kron(&a, &b);
        assert_eq!((k.rows(), k.cols()), (6, 6));
        for i in 0..2 {
            for j in 0..3 {
                for p in 0..3 {
                    for q in 0..2 {
                        assert_eq!(k[(i * 3 + p, j * 2 + q)], a[(i, j)] * b[(p, q)]);
                    }
                }
            }
        }
    }

    #[test]
    fn partial_trace_of_maximally_entangled_state() {
        let pt = partial_trace(&omega_projector(2), (2, 2), Subsystem::First).unwrap();
        assert!(pt.max_abs_diff(&CMatrix::identity(2).scale(0.5)) < 1e-15);
    }

    #[test]
    fn partial_trace_of_flip_is_identity() {
        // Entrywise: (tr_1 F)[i][j] = Σ_k F[(k,i),(k,j)] = δ_ij.
        let pt = partial_trace(&flip(2), (2, 2), Subsystem::Second).unwrap();
        assert_eq!(pt, CMatrix::identity(2));
    }

    #[test]
    fn partial_trace_rejects_bad_dimensions() {
        let err = partial_trace(&CMatrix::identity(5), (2, 2), Subsystem::First);
        assert!(matches!(err, Err(Error::Dimension(_))));
    }

    #[test]
    fn trace_out_matches_partial_trace() {
        let m = CMatrix::from_fn(6, 6, |i, j| c((i + 2 * j) as f64, (i as f64) - (j as f64)));
        let a = trace_out(&m, &[2, 3], 1).unwrap();
        let b = partial_trace(&m, (2, 3), Subsystem::First).unwrap();
        assert_eq!(a, b);
        let a = trace_out(&m, &[2, 3], 0).unwrap();
        let b = partial_trace(&m, (2, 3), Subsystem::Second).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn trace_out_middle_factor_of_product() {
        let a = CMatrix::diag(&[1.0, 2.0]);
        let b = CMatrix::from_real_rows(&[&[1.0, 1.0, 0.0], &[1.0, 2.0, 0.0], &[0.0, 0.0, 4.0]]);
        let cm = CMatrix::from_fn(2, 2, |i, j| c(i as f64, j as f64));
        let m = kron(&kron(&a, &b), &cm);
        let got = trace_out(&m, &[2, 3, 2], 1).unwrap();
        let want = kron(&a, &cm).scale(7.0);
        assert!(got.max_abs_diff(&want) < 1e-14);
    }

    #[test]
    fn eigen_diagonal_sorted() {
        let es = hermitian_eigensystem(&CMatrix::diag(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(es.values, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn eigen_pauli_x() {
        let es = hermitian_eigensystem(&shift2()).unwrap();
        assert!((es.values[0] + 1.0).abs() < 1e-15);
        assert!((es.values[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eigen_of_boundary_depolarizer_choi() {
        // r|ω⟩⟨ω| + (1−r)/d²·1 at r = −1/3, d = 2.
        let r = -1.0 / 3.0;
        let choi = &omega_projector(2).scale(r) + &CMatrix::identity(4).scale((1.0 - r) / 4.0);
        let es = hermitian_eigensystem(&choi).unwrap();
        let want = [0.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0];
        for (got, want) in es.values.iter().zip(want) {
            assert!((got - want).abs() < 1e-14, "{:?}", es.values);
        }
    }

    #[test]
    fn eigen_rejects_non_hermitian() {
        let m = CMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(matches!(
            hermitian_eigensystem(&m),
            Err(Error::NotHermitian(_))
        ));
    }

    #[test]
    fn eigen_complex_pivot() {
        // [[1, i],[−i, 1]] has spectrum {0, 2}.
        let m = CMatrix::from_vec(
            2,
            2,
            vec![c(1.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(1.0, 0.0)],
        )
        .unwrap();
        let es = hermitian_eigensystem(&m).unwrap();
        assert!(es.values[0].abs() < 1e-15 && (es.values[1] - 2.0).abs() < 1e-15);
        assert!(es.reconstruct().max_abs_diff(&m) < 1e-15);
    }

    #[test]
    fn psd_margin_examples() {
        assert_eq!(psd_margin(&CMatrix::identity(3)).unwrap(), 1.0);
        assert!((psd_margin(&CMatrix::diag(&[1.0, -0.25])).unwrap() + 0.25).abs() < 1e-16);
        let m2 = -1.0 / 3.0;
        let choi = &omega_projector(2).scale(m2) + &CMatrix::identity(4).scale((1.0 - m2) / 4.0);
        assert!(psd_margin(&choi).unwrap().abs() < 1e-12);
    }

    #[test]
    fn project_psd_clips_negative_part() {
        let m = CMatrix::diag(&[2.0, -1.0]);
        assert_eq!(project_psd(&m).unwrap(), CMatrix::diag(&[2.0, 0.0]));
    }

    #[test]
    fn hermitian_constructor_checks_relative_defect() {
        let mut m = CMatrix::identity(2);
        m[(0, 1)] = c(1e-3, 0.0);
        assert!(HermitianMatrix::new(m.clone()).is_err());
        m[(1, 0)] = c(1e-3, 0.0);
        assert!(HermitianMatrix::new(m).is_ok());
        assert!(HermitianMatrix::new(CMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn operator_basis_is_orthonormal() {
        let basis = hermitian_operator_basis(3);
        assert_eq!(basis.len(), 9);
        for (i, a) in basis.iter().enumerate() {
            assert!(a.hermiticity_defect() < 1e-16);
            for (j, b) in basis.iter().enumerate() {
                let ip = a.hs_inner(b);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((ip - c(want, 0.0)).norm() < 1e-15);
            }
        }
    }
}
