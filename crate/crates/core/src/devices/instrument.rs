use crate::error::{Error, Result};
use crate::numkit::{psd_margin, trace_out, CMatrix, HermitianMatrix, STRUCTURAL_TOL};

use super::channel::{adjoint_choi, apply_choi, choi_of, Channel};
use super::meter::{Meter, OutcomeShape};

/// An instrument with outcomes `0..n`; branch `x` is stored as the
/// unnormalized Choi operator `Σ_ij |i⟩⟨j| ⊗ J(x, |i⟩⟨j|)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Instrument {
    dim_in: usize,
    dim_out: usize,
    branches: Vec<HermitianMatrix>,
}

impl Instrument {
    pub fn new(dim_in: usize, dim_out: usize, branches: Vec<HermitianMatrix>) -> Result<Self> {
        let j = Self::new_unchecked(dim_in, dim_out, branches)?;
        j.validate(STRUCTURAL_TOL)?;
        Ok(j)
    }

    pub fn new_unchecked(
        dim_in: usize,
        dim_out: usize,
        branches: Vec<HermitianMatrix>,
    ) -> Result<Self> {
        if branches.is_empty() || branches.iter().any(|b| b.dim() != dim_in * dim_out) {
            return Err(Error::Dimension(format!(
                "instrument branches must be {0}x{0} Choi blocks",
                dim_in * dim_out
            )));
        }
        Ok(Self {
            dim_in,
            dim_out,
            branches,
        })
    }

    /// Builds an instrument from the action `f(x, ρ)` of each branch.
    pub fn from_maps(
        dim_in: usize,
        dim_out: usize,
        outcomes: usize,
        f: impl Fn(usize, &CMatrix) -> CMatrix,
    ) -> Result<Self> {
        let branches = (0..outcomes)
            .map(|x| HermitianMatrix::new(choi_of(dim_in, dim_out, |e| f(x, e))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(dim_in, dim_out, branches)
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        let (tp, margin) = self.defects()?;
        if tp > tol {
            return Err(Error::InvalidDevice(format!(
                "branches do not sum to a trace-preserving map (defect {tp:.3e})"
            )));
        }
        if margin < -tol {
            return Err(Error::InvalidDevice(format!(
                "branch is not completely positive (Choi eigenvalue {margin:.3e})"
            )));
        }
        Ok(())
    }

    /// (trace-preservation residual of the total channel, smallest branch Choi eigenvalue)
    pub fn defects(&self) -> Result<(f64, f64)> {
        let mut margin = f64::INFINITY;
        for b in &self.branches {
            margin = margin.min(psd_margin(b)?);
        }
        let total = self.branch_sum();
        let reduced = trace_out(&total, &[self.dim_in, self.dim_out], 1)?;
        Ok((
            reduced.max_abs_diff(&CMatrix::identity(self.dim_in)),
            margin,
        ))
    }

    fn branch_sum(&self) -> CMatrix {
        let n = self.dim_in * self.dim_out;
        let mut total = CMatrix::zeros(n, n);
        for b in &self.branches {
            total += b.as_matrix();
        }
        total
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    pub fn branch(&self, x: usize) -> &HermitianMatrix {
        &self.branches[x]
    }

    /// `J(x, ρ)`
    pub fn apply(&self, x: usize, rho: &CMatrix) -> CMatrix {
        apply_choi(&self.branches[x], self.dim_in, self.dim_out, rho)
    }

    /// `J†(x, A)`
    pub fn adjoint(&self, x: usize, a: &CMatrix) -> CMatrix {
        adjoint_choi(&self.branches[x], self.dim_in, self.dim_out, a)
    }

    pub fn max_abs_diff(&self, other: &Instrument) -> f64 {
        assert_eq!(
            self.len(),
            other.len(),
            "instruments have different outcome counts"
        );
        self.branches
            .iter()
            .zip(&other.branches)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    }
}

/// The meter `x ↦ J†(x, 1)`.
pub fn instrument_induced_meter(j: &Instrument) -> Meter {
    let one = CMatrix::identity(j.dim_out);
    let effects = (0..j.len())
        .map(|x| HermitianMatrix::from_hermitian_part(&j.adjoint(x, &one)))
        .collect();
    Meter::new_unchecked(OutcomeShape::Flat(j.len()), effects)
        .expect("branch shapes checked at construction")
}

/// The channel `Σ_x J(x, ·)`.
pub fn instrument_total_channel(j: &Instrument) -> Channel {
    let choi = j.branch_sum().scale(1.0 / j.dim_in as f64);
    Channel::from_choi_unchecked(
        j.dim_in,
        j.dim_out,
        HermitianMatrix::from_hermitian_part(&choi),
    )
    .expect("branch shapes checked at construction")
}

/// Meter on `X × Y` with effects `J†(x, P(y))`.
pub fn sequential_compose(j: &Instrument, p: &Meter) -> Result<Meter> {
    if p.dim() != j.dim_out {
        return Err(Error::Dimension(format!(
            "instrument outputs C^{} but the meter acts on C^{}",
            j.dim_out,
            p.dim()
        )));
    }
    let mut effects = Vec::with_capacity(j.len() * p.len());
    for x in 0..j.len() {
        for e in p.effects() {
            effects.push(HermitianMatrix::from_hermitian_part(&j.adjoint(x, e)));
        }
    }
    Meter::new(OutcomeShape::Product(j.len(), p.len()), effects)
}
