use crate::error::{Error, Result};
use crate::numkit::{psd_margin, trace_out, CMatrix, HermitianMatrix, Subsystem, STRUCTURAL_TOL};

use super::basis::max_entangled;
use super::meter::Meter;
use super::NoiseBounds;

/// A CPTP map `L(C^{in}) → L(C^{out})` stored as its normalized Choi operator
/// `(1/in) Σ_ij |i⟩⟨j| ⊗ Φ(|i⟩⟨j|)`, input factor first.
#[derive(Clone, Debug, PartialEq)]
pub struct Channel {
    in_dim: usize,
    out_dim: usize,
    choi: HermitianMatrix,
}

/// Unnormalized Choi operator `Σ_ij |i⟩⟨j| ⊗ f(|i⟩⟨j|)` of a linear map.
pub fn choi_of(in_dim: usize, out_dim: usize, f: impl Fn(&CMatrix) -> CMatrix) -> CMatrix {
    let n = in_dim * out_dim;
    let mut c = CMatrix::zeros(n, n);
    for i in 0..in_dim {
        for j in 0..in_dim {
            let out = f(&CMatrix::unit(in_dim, i, j));
            assert_eq!(out.rows(), out_dim, "map output has the wrong size");
            for k in 0..out_dim {
                for l in 0..out_dim {
                    c[(i * out_dim + k, j * out_dim + l)] = out[(k, l)];
                }
            }
        }
    }
    c
}

/// `Σ_ij ρ_ij · block_ij` for an unnormalized Choi operator.
pub(crate) fn apply_choi(choi: &CMatrix, in_dim: usize, out_dim: usize, rho: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros(out_dim, out_dim);
    for i in 0..in_dim {
        for j in 0..in_dim {
            let r = rho[(i, j)];
            if r.norm() == 0.0 {
                continue;
            }
            for k in 0..out_dim {
                for l in 0..out_dim {
                    out[(k, l)] += r * choi[(i * out_dim + k, j * out_dim + l)];
                }
            }
        }
    }
    out
}

/// Heisenberg picture `Φ†(A)[j][i] = tr(block_ij · A)` for an unnormalized Choi operator.
pub(crate) fn adjoint_choi(choi: &CMatrix, in_dim: usize, out_dim: usize, a: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros(in_dim, in_dim);
    for i in 0..in_dim {
        for j in 0..in_dim {
            let mut acc = crate::numkit::ZERO;
            for k in 0..out_dim {
                for l in 0..out_dim {
                    acc += choi[(i * out_dim + k, j * out_dim + l)] * a[(l, k)];
                }
            }
            out[(j, i)] = acc;
        }
    }
    out
}

impl Channel {
    /// Accepts a normalized Choi operator after checking positivity and trace
    /// preservation at tolerance 1e-10.
    pub fn from_choi(in_dim: usize, out_dim: usize, choi: HermitianMatrix) -> Result<Self> {
        let ch = Self::from_choi_unchecked(in_dim, out_dim, choi)?;
        ch.validate(STRUCTURAL_TOL)?;
        Ok(ch)
    }

    pub fn from_choi_unchecked(
        in_dim: usize,
        out_dim: usize,
        choi: HermitianMatrix,
    ) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 || choi.dim() != in_dim * out_dim {
            return Err(Error::Dimension(format!(
                "Choi operator of size {} does not fit {in_dim} -> {out_dim}",
                choi.dim()
            )));
        }
        Ok(Self {
            in_dim,
            out_dim,
            choi,
        })
    }

    /// Builds the channel of a linear map given by its action on matrix units.
    pub fn from_map(
        in_dim: usize,
        out_dim: usize,
        f: impl Fn(&CMatrix) -> CMatrix,
    ) -> Result<Self> {
        let c = choi_of(in_dim, out_dim, f).scale(1.0 / in_dim as f64);
        let choi = HermitianMatrix::new(c)?;
        Self::from_choi(in_dim, out_dim, choi)
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        let (tp, margin) = self.defects()?;
        if tp > tol {
            return Err(Error::InvalidDevice(format!(
                "map is not trace preserving (defect {tp:.3e})"
            )));
        }
        if margin < -tol {
            return Err(Error::InvalidDevice(format!(
                "map is not completely positive (Choi eigenvalue {margin:.3e})"
            )));
        }
        Ok(())
    }

    /// (trace-preservation residual, smallest Choi eigenvalue)
    pub fn defects(&self) -> Result<(f64, f64)> {
        let reduced = trace_out(&self.choi, &[self.in_dim, self.out_dim], 1)?;
        let target = CMatrix::identity(self.in_dim).scale(1.0 / self.in_dim as f64);
        Ok((reduced.max_abs_diff(&target), psd_margin(&self.choi)?))
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    /// Normalized Choi operator.
    pub fn choi(&self) -> &HermitianMatrix {
        &self.choi
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        apply_choi(&self.choi, self.in_dim, self.out_dim, rho).scale(self.in_dim as f64)
    }

    pub fn adjoint(&self, a: &CMatrix) -> CMatrix {
        adjoint_choi(&self.choi, self.in_dim, self.out_dim, a).scale(self.in_dim as f64)
    }

    /// For a channel into `C^{d1} ⊗ C^{d2}`, the channel into the kept factor.
    pub fn output_margin(&self, dims: (usize, usize), keep: Subsystem) -> Result<Channel> {
        if dims.0 * dims.1 != self.out_dim {
            return Err(Error::Dimension(format!(
                "output of size {} is not {}x{}",
                self.out_dim, dims.0, dims.1
            )));
        }
        let factors = [self.in_dim, dims.0, dims.1];
        let (which, kept) = match keep {
            Subsystem::First => (2, dims.0),
            Subsystem::Second => (1, dims.1),
        };
        let choi = trace_out(&self.choi, &factors, which)?;
        Ok(Channel {
            in_dim: self.in_dim,
            out_dim: kept,
            choi: HermitianMatrix::from_hermitian_part(&choi),
        })
    }

    pub fn max_abs_diff(&self, other: &Channel) -> f64 {
        self.choi.max_abs_diff(&other.choi)
    }
}

/// Normalized Choi operator of `I_r`: `r|ω⟩⟨ω| + (1−r)/d²·1`.
fn depolarizing_choi(d: usize, r: f64) -> CMatrix {
    let w = max_entangled(d);
    let n = (d * d) as f64;
    &CMatrix::ket_bra(&w, &w).scale(r) + &CMatrix::identity(d * d).scale((1.0 - r) / n)
}

/// The depolarizing channel `I_r(ρ) = rρ + (1−r) tr(ρ) 1/d` for `r ∈ [m2, 1]`.
pub fn depolarizing(d: usize, r: f64) -> Result<Channel> {
    let bounds = NoiseBounds::new(d)?;
    Error::check_range("r", r, bounds.m2, 1.0)?;
    Ok(Channel {
        in_dim: d,
        out_dim: d,
        choi: HermitianMatrix::from_hermitian_part(&depolarizing_choi(d, r)),
    })
}

/// Returns `r` when `phi` equals `I_r` within `tol` (max-entry norm on Choi operators).
pub fn detect_depolarizing(phi: &Channel, tol: f64) -> Option<f64> {
    let d = phi.in_dim;
    if phi.out_dim != d {
        return None;
    }
    let w = max_entangled(d);
    let overlap = CMatrix::column(&w)
        .adjoint()
        .matmul(&phi.choi.matmul(&CMatrix::column(&w)))[(0, 0)]
        .re;
    let n = (d * d) as f64;
    let r = (n * overlap - 1.0) / (n - 1.0);
    (phi.choi.max_abs_diff(&depolarizing_choi(d, r)) <= tol).then_some(r)
}

/// Unitary conjugation `ρ ↦ UρU*`.
pub fn unitary_channel(u: &CMatrix) -> Result<Channel> {
    let d = u.rows();
    if !u.is_square() || u.adjoint().matmul(u).max_abs_diff(&CMatrix::identity(d)) > STRUCTURAL_TOL
    {
        return Err(Error::InvalidDevice("conjugation needs a unitary".into()));
    }
    Channel::from_map(d, d, |e| u.conjugate(e))
}

/// Measure-and-prepare channel `Φ_Q(ρ) = Σ_x tr(ρQ(x)) Q(x)` of a sharp meter.
pub fn measure_and_prepare(q: &Meter) -> Result<Channel> {
    if !q.is_sharp() {
        return Err(Error::InvalidDevice(
            "measure_and_prepare needs a sharp meter".into(),
        ));
    }
    Channel::from_map(q.dim(), q.dim(), |rho| {
        let mut out = CMatrix::zeros(q.dim(), q.dim());
        for e in q.effects() {
            out += &e.scale_c(e.hs_inner(rho));
        }
        out
    })
}

/// `I′_t(ρ) = tρ + (1−t)Φ_Q(ρ)`, completely positive exactly for `t ∈ [m1, 1]`.
pub fn q_biased_depolarizer(q: &Meter, t: f64) -> Result<Channel> {
    let bounds = NoiseBounds::new(q.dim())?;
    Error::check_range("t", t, bounds.m1, 1.0)?;
    let mp = measure_and_prepare(q)?;
    let id = depolarizing(q.dim(), 1.0)?;
    let c = &id.choi.scale(t) + &mp.choi.scale(1.0 - t);
    Channel::from_choi(q.dim(), q.dim(), HermitianMatrix::from_hermitian_part(&c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::devices::{fourier_conjugate, sharp_meter, weyl, Basis};
    use crate::numkit::hermitian_eigensystem;

    #[test]
    fn identity_and_full_depolarizer() {
        for d in 2..=4 {
            let id = depolarizing(d, 1.0).unwrap();
            let w = max_entangled(d);
            assert!(id.choi().max_abs_diff(&CMatrix::ket_bra(&w, &w)) < 1e-15);
            let full = depolarizing(d, 0.0).unwrap();
            let want = CMatrix::identity(d * d).scale(1.0 / (d * d) as f64);
            assert!(full.choi().max_abs_diff(&want) < 1e-16);
        }
    }

    #[test]
    fn boundary_depolarizer_spectrum_d2() {
        let ch = depolarizing(2, -1.0 / 3.0).unwrap();
        let vals = hermitian_eigensystem(ch.choi()).unwrap().values;
        assert!(vals[0].abs() < 1e-15);
        for v in &vals[1..] {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn depolarizing_rejects_below_m2() {
        assert!(depolarizing(2, -0.34).is_err());
        assert!(depolarizing(3, -0.126).is_err());
    }

    #[test]
    fn apply_and_adjoint_agree() {
        let ch = depolarizing(3, 0.4).unwrap();
        let rho = CMatrix::from_fn(3, 3, |i, j| {
            crate::C64::new((i + j) as f64, i as f64 - j as f64)
        });
        let want = &rho.scale(0.4) + &CMatrix::identity(3).scale(0.6 * rho.trace().re / 3.0);
        assert!(ch.apply(&rho).max_abs_diff(&want) < 1e-14);
        let a = CMatrix::diag(&[1.0, 2.0, -1.0]);
        let lhs = ch.apply(&rho).hs_inner(&a);
        let rhs = rho.hs_inner(&ch.adjoint(&a));
        assert!((lhs - rhs).norm() < 1e-13);
    }

    #[test]
    fn detect_depolarizing_examples() {
        let r = detect_depolarizing(&depolarizing(2, 0.3).unwrap(), 1e-10).unwrap();
        assert!((r - 0.3).abs() < 1e-12);
        let x = unitary_channel(&weyl(2, 1, 0)).unwrap();
        assert_eq!(detect_depolarizing(&x, 1e-10), None);
        let m2 = -1.0 / 8.0;
        let r = detect_depolarizing(&depolarizing(3, m2).unwrap(), 1e-10).unwrap();
        assert!((r - m2).abs() < 1e-10);
    }

    #[test]
    fn pinching_choi_d2() {
        let q = sharp_meter(&Basis::standard(2));
        let pin = measure_and_prepare(&q).unwrap();
        assert!(
            pin.choi()
                .max_abs_diff(&CMatrix::diag(&[0.5, 0.0, 0.0, 0.5]))
                < 1e-16
        );
    }

    #[test]
    fn pinching_flattens_conjugate_basis() {
        for d in 2..=4 {
            let b = Basis::standard(d);
            let q = sharp_meter(&b);
            let p = sharp_meter(&fourier_conjugate(&b));
            let pin = measure_and_prepare(&q).unwrap();
            for e in p.effects() {
                let got = pin.adjoint(e);
                assert!(got.max_abs_diff(&CMatrix::identity(d).scale(1.0 / d as f64)) < 1e-14);
            }
        }
    }

    #[test]
    fn q_biased_depolarizer_range() {
        let q = sharp_meter(&Basis::standard(3));
        let id = q_biased_depolarizer(&q, 1.0).unwrap();
        assert!(id.max_abs_diff(&depolarizing(3, 1.0).unwrap()) < 1e-16);
        let edge = q_biased_depolarizer(&q, -0.5).unwrap();
        assert!(psd_margin(edge.choi()).unwrap().abs() < 1e-12);
        assert!(q_biased_depolarizer(&q, -0.51).is_err());
    }
}
