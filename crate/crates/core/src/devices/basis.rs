use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numkit::{CMatrix, C64, ONE, STRUCTURAL_TOL, ZERO};

/// `ω^k` with `ω = exp(2πi/d)`; the exponent is reduced mod d first so that
/// equal phases are bitwise equal.
pub fn omega_pow(d: usize, k: i64) -> C64 {
    let k = k.rem_euclid(d as i64);
    if k == 0 {
        return ONE;
    }
    C64::from_polar(1.0, 2.0 * PI * k as f64 / d as f64)
}

/// An orthonormal basis of `C^d`, stored as the columns of a unitary matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Basis {
    vectors: CMatrix,
}

impl Basis {
    pub fn new(vectors: CMatrix) -> Result<Self> {
        if !vectors.is_square() || vectors.rows() < 2 {
            return Err(Error::Dimension(format!(
                "a basis of C^d needs a d x d matrix with d >= 2, got {}x{}",
                vectors.rows(),
                vectors.cols()
            )));
        }
        let gram = vectors.adjoint().matmul(&vectors);
        let defect = gram.max_abs_diff(&CMatrix::identity(vectors.rows()));
        if defect > STRUCTURAL_TOL {
            return Err(Error::InvalidDevice(format!(
                "basis vectors are not orthonormal (Gram defect {defect:.3e})"
            )));
        }
        Ok(Self { vectors })
    }

    pub fn standard(d: usize) -> Self {
        assert!(d >= 2, "dimension must be at least 2");
        Self {
            vectors: CMatrix::identity(d),
        }
    }

    pub fn dim(&self) -> usize {
        self.vectors.rows()
    }

    pub fn vector(&self, i: usize) -> Vec<C64> {
        self.vectors.col(i)
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.vectors
    }
}

/// Conjugate basis `ψ_z = Σ_u ω^{uz} φ_u / √d`.
pub fn fourier_conjugate(basis: &Basis) -> Basis {
    let d = basis.dim();
    let norm = 1.0 / (d as f64).sqrt();
    let f_adj = CMatrix::from_fn(d, d, |u, z| omega_pow(d, (u * z) as i64) * norm);
    Basis {
        vectors: basis.vectors.matmul(&f_adj),
    }
}

/// Weyl operator with `W(x,y) φ_z = ω^{yz} φ_{x+z}` on the standard basis.
pub fn weyl(d: usize, x: usize, y: usize) -> CMatrix {
    let mut w = CMatrix::zeros(d, d);
    for z in 0..d {
        w[((x + z) % d, z)] = omega_pow(d, (y * z) as i64);
    }
    w
}

/// The flip `F(φ ⊗ ψ) = ψ ⊗ φ` on `C^d ⊗ C^d`.
pub fn flip(d: usize) -> CMatrix {
    let mut f = CMatrix::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            f[(j * d + i, i * d + j)] = ONE;
        }
    }
    f
}

/// Maximally entangled vector `ω = Σ_i φ_i ⊗ φ_i / √d`.
pub fn max_entangled(d: usize) -> Vec<C64> {
    let mut v = vec![ZERO; d * d];
    let amp = C64::new(1.0 / (d as f64).sqrt(), 0.0);
    for i in 0..d {
        v[i * d + i] = amp;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::kron;

    #[test]
    fn weyl_identity_and_shift() {
        assert_eq!(weyl(3, 0, 0), CMatrix::identity(3));
        let phi0 = CMatrix::column(&[ONE, ZERO, ZERO]);
        let phi1 = CMatrix::column(&[ZERO, ONE, ZERO]);
        assert_eq!(weyl(3, 1, 0).matmul(&phi0), phi1);
    }

    #[test]
    fn weyl_phase_on_last_vector() {
        let phi2 = CMatrix::column(&[ZERO, ZERO, ONE]);
        let got = weyl(3, 0, 1).matmul(&phi2);
        let w2 = C64::from_polar(1.0, 4.0 * PI / 3.0);
        assert!((got[(2, 0)] - w2).norm() < 1e-15);
        assert_eq!(got[(0, 0)], ZERO);
    }

    #[test]
    fn weyl_composition_rule() {
        for d in 2..=4 {
            for (x1, y1, x2, y2) in [(1, 0, 0, 1), (1, 2, 3, 1), (2, 2, 1, 3)] {
                let (x1, y1, x2, y2) = (x1 % d, y1 % d, x2 % d, y2 % d);
                let lhs = weyl(d, x1, y1).matmul(&weyl(d, x2, y2));
                let rhs =
                    weyl(d, (x1 + x2) % d, (y1 + y2) % d).scale_c(omega_pow(d, (x2 * y1) as i64));
                assert!(lhs.max_abs_diff(&rhs) < 1e-12);
            }
        }
    }

    #[test]
    fn fourier_d2_is_hadamard_basis() {
        let f = fourier_conjugate(&Basis::standard(2));
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let want = CMatrix::from_real_rows(&[&[r, r], &[r, -r]]);
        assert!(f.as_matrix().max_abs_diff(&want) < 1e-15);
    }

    #[test]
    fn fourier_has_order_four() {
        for d in 2..=5 {
            let b = Basis::standard(d);
            let mut f = b.clone();
            for _ in 0..4 {
                f = fourier_conjugate(&f);
            }
            assert!(f.as_matrix().max_abs_diff(b.as_matrix()) < 1e-12);
        }
    }

    #[test]
    fn fourier_overlaps_are_flat() {
        for d in 2..=4 {
            let f = fourier_conjugate(&Basis::standard(d));
            for u in 0..d {
                for v in 0..d {
                    let o = f.as_matrix()[(u, v)].norm();
                    assert!((o - 1.0 / (d as f64).sqrt()).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn flip_swaps_factors() {
        let a = CMatrix::from_fn(2, 2, |i, j| C64::new(i as f64, j as f64 + 1.0));
        let b = CMatrix::diag(&[3.0, -1.0]);
        let f = flip(2);
        assert!(f.conjugate(&kron(&a, &b)).max_abs_diff(&kron(&b, &a)) < 1e-15);
    }

    #[test]
    fn basis_rejects_non_orthonormal() {
        let m = CMatrix::from_real_rows(&[&[1.0, 1.0], &[0.0, 1.0]]);
        assert!(Basis::new(m).is_err());
    }
}
