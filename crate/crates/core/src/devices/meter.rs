use crate::error::{Error, Result};
use crate::numkit::{psd_margin, CMatrix, HermitianMatrix, STRUCTURAL_TOL};

use super::basis::Basis;
use super::NoiseBounds;

/// Outcome set of a meter. Product outcomes `(x, y)` are labelled `x·n2 + y`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutcomeShape {
    Flat(usize),
    Product(usize, usize),
}

impl OutcomeShape {
    pub fn len(self) -> usize {
        match self {
            OutcomeShape::Flat(n) => n,
            OutcomeShape::Product(a, b) => a * b,
        }
    }

    pub fn is_empty(self) -> bool {
        self.len() == 0
    }
}

/// Which margin of a product-outcome meter to take.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    First,
    Second,
}

/// A POVM on `C^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct Meter {
    dim: usize,
    shape: OutcomeShape,
    effects: Vec<HermitianMatrix>,
}

impl Meter {
    /// Validates positivity of each effect and normalization at tolerance 1e-10.
    pub fn new(shape: OutcomeShape, effects: Vec<HermitianMatrix>) -> Result<Self> {
        let m = Self::new_unchecked(shape, effects)?;
        m.validate(STRUCTURAL_TOL)?;
        Ok(m)
    }

    /// Builds a meter without the positivity and normalization checks. Only the
    /// shapes are checked; used to feed deliberately broken devices to verifiers.
    pub fn new_unchecked(shape: OutcomeShape, effects: Vec<HermitianMatrix>) -> Result<Self> {
        if effects.is_empty() || effects.len() != shape.len() {
            return Err(Error::Dimension(format!(
                "{} effects for {} outcomes",
                effects.len(),
                shape.len()
            )));
        }
        let dim = effects[0].dim();
        if effects.iter().any(|e| e.dim() != dim) {
            return Err(Error::Dimension("effects have different sizes".into()));
        }
        Ok(Self {
            dim,
            shape,
            effects,
        })
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        let (residual, margin) = self.defects()?;
        if residual > tol {
            return Err(Error::InvalidDevice(format!(
                "effects sum to identity only within {residual:.3e}"
            )));
        }
        if margin < -tol {
            return Err(Error::InvalidDevice(format!(
                "effect has negative eigenvalue {margin:.3e}"
            )));
        }
        Ok(())
    }

    /// (normalization residual, smallest effect eigenvalue)
    pub fn defects(&self) -> Result<(f64, f64)> {
        let mut sum = CMatrix::zeros(self.dim, self.dim);
        let mut margin = f64::INFINITY;
        for e in &self.effects {
            sum += e.as_matrix();
            margin = margin.min(psd_margin(e)?);
        }
        Ok((sum.max_abs_diff(&CMatrix::identity(self.dim)), margin))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shape(&self) -> OutcomeShape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.effects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effects.is_empty()
    }

    pub fn effect(&self, i: usize) -> &HermitianMatrix {
        &self.effects[i]
    }

    pub fn effects(&self) -> &[HermitianMatrix] {
        &self.effects
    }

    /// Effect of the product outcome `(x, y)`.
    pub fn joint_effect(&self, x: usize, y: usize) -> Result<&HermitianMatrix> {
        match self.shape {
            OutcomeShape::Product(_, n2) => Ok(&self.effects[x * n2 + y]),
            OutcomeShape::Flat(_) => Err(Error::NonProduct),
        }
    }

    /// True when every effect is a rank-one projector.
    pub fn is_sharp(&self) -> bool {
        self.effects.iter().all(|e| {
            let sq = e.matmul(e);
            sq.max_abs_diff(e) <= STRUCTURAL_TOL && (e.trace_re() - 1.0).abs() <= STRUCTURAL_TOL
        })
    }

    /// Largest entrywise difference to another meter with the same outcome set.
    pub fn max_abs_diff(&self, other: &Meter) -> f64 {
        assert_eq!(
            self.len(),
            other.len(),
            "meters have different outcome counts"
        );
        self.effects
            .iter()
            .zip(&other.effects)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    }
}

/// The sharp meter of rank-one projectors onto `basis`.
pub fn sharp_meter(basis: &Basis) -> Meter {
    let effects = (0..basis.dim())
        .map(|i| {
            let v = basis.vector(i);
            HermitianMatrix::from_hermitian_part(&CMatrix::ket_bra(&v, &v))
        })
        .collect();
    Meter {
        dim: basis.dim(),
        shape: OutcomeShape::Flat(basis.dim()),
        effects,
    }
}

/// `Q_s(x) = s·Q(x) + (1−s)/d·1` for `s ∈ [m1, 1]`.
pub fn noisy_meter(q: &Meter, s: f64) -> Result<Meter> {
    if !q.is_sharp() {
        return Err(Error::InvalidDevice(
            "noisy_meter needs a sharp meter".into(),
        ));
    }
    let d = q.dim();
    let bounds = NoiseBounds::new(d)?;
    Error::check_range("s", s, bounds.m1, 1.0)?;
    let noise = CMatrix::identity(d).scale((1.0 - s) / d as f64);
    let effects = q
        .effects
        .iter()
        .map(|e| HermitianMatrix::from_hermitian_part(&(&e.scale(s) + &noise)))
        .collect();
    Ok(Meter {
        dim: d,
        shape: q.shape,
        effects,
    })
}

/// True iff `|tr(Q(x)P(y)) − 1/d| ≤ tol` for all outcomes.
pub fn is_mutually_unbiased(q: &Meter, p: &Meter, tol: f64) -> Result<bool> {
    if q.dim() != p.dim() {
        return Err(Error::Dimension(format!(
            "meters act on C^{} and C^{}",
            q.dim(),
            p.dim()
        )));
    }
    let target = 1.0 / q.dim() as f64;
    for a in q.effects() {
        for b in p.effects() {
            if (a.hs_inner(b).re - target).abs() > tol {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Sums a product-outcome meter over the other index.
pub fn joint_meter_margin(g: &Meter, side: Side) -> Result<Meter> {
    let OutcomeShape::Product(n1, n2) = g.shape else {
        return Err(Error::NonProduct);
    };
    let d = g.dim();
    let n = match side {
        Side::First => n1,
        Side::Second => n2,
    };
    let mut sums = vec![CMatrix::zeros(d, d); n];
    for x in 0..n1 {
        for y in 0..n2 {
            let k = if side == Side::First { x } else { y };
            sums[k] += g.effects[x * n2 + y].as_matrix();
        }
    }
    Ok(Meter {
        dim: d,
        shape: OutcomeShape::Flat(n),
        effects: sums
            .iter()
            .map(HermitianMatrix::from_hermitian_part)
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::devices::fourier_conjugate;
    use crate::numkit::{hermitian_eigensystem, kron, partial_trace, Subsystem};

    #[test]
    fn sharp_standard_d2() {
        let q = sharp_meter(&Basis::standard(2));
        assert_eq!(q.effect(0).as_matrix(), &CMatrix::diag(&[1.0, 0.0]));
        assert_eq!(q.effect(1).as_matrix(), &CMatrix::diag(&[0.0, 1.0]));
        assert!(q.is_sharp());
    }

    #[test]
    fn sharp_fourier_d2() {
        let p = sharp_meter(&fourier_conjugate(&Basis::standard(2)));
        let plus = CMatrix::from_real_rows(&[&[0.5, 0.5], &[0.5, 0.5]]);
        let minus = CMatrix::from_real_rows(&[&[0.5, -0.5], &[-0.5, 0.5]]);
        assert!(p.effect(0).max_abs_diff(&plus) < 1e-15);
        assert!(p.effect(1).max_abs_diff(&minus) < 1e-15);
    }

    #[test]
    fn sharp_standard_d3_is_diagonal() {
        let q = sharp_meter(&Basis::standard(3));
        for x in 0..3 {
            let mut diag = [0.0; 3];
            diag[x] = 1.0;
            assert_eq!(q.effect(x).as_matrix(), &CMatrix::diag(&diag));
        }
    }

    #[test]
    fn noisy_meter_endpoints() {
        let q = sharp_meter(&Basis::standard(3));
        assert_eq!(noisy_meter(&q, 1.0).unwrap(), q);
        let flat = noisy_meter(&q, 0.0).unwrap();
        for e in flat.effects() {
            assert!(e.max_abs_diff(&CMatrix::identity(3).scale(1.0 / 3.0)) < 1e-16);
        }
    }

    #[test]
    fn reverse_meter_d3() {
        let q = sharp_meter(&Basis::standard(3));
        let r = noisy_meter(&q, -0.5).unwrap();
        for x in 0..3 {
            let want = (&CMatrix::identity(3) - q.effect(x).as_matrix()).scale(0.5);
            assert!(r.effect(x).max_abs_diff(&want) < 1e-15);
            let vals = hermitian_eigensystem(r.effect(x)).unwrap().values;
            assert!(vals[0].abs() < 1e-15 && (vals[1] - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn noisy_meter_rejects_overnoise() {
        let q = sharp_meter(&Basis::standard(2));
        assert!(matches!(
            noisy_meter(&q, -1.01),
            Err(Error::Inadmissible { .. })
        ));
        assert!(noisy_meter(&q, 1.0001).is_err());
    }

    #[test]
    fn mub_detection() {
        let b = Basis::standard(2);
        let q = sharp_meter(&b);
        let p = sharp_meter(&fourier_conjugate(&b));
        assert!(is_mutually_unbiased(&q, &p, 1e-12).unwrap());
        assert!(!is_mutually_unbiased(&q, &q, 1e-12).unwrap());
        let th = std::f64::consts::PI / 6.0;
        let (c, s) = (th.cos(), th.sin());
        let rot = Basis::new(CMatrix::from_real_rows(&[&[c, -s], &[s, c]])).unwrap();
        assert!(!is_mutually_unbiased(&q, &sharp_meter(&rot), 1e-12).unwrap());
    }

    #[test]
    fn margins_of_independent_product() {
        // Q(x) ⊗ P(y) on C^2 ⊗ C^2; the margins are Q(x) ⊗ 1 and 1 ⊗ P(y).
        let b = Basis::standard(2);
        let q = sharp_meter(&b);
        let p = sharp_meter(&fourier_conjugate(&b));
        let mut effects = Vec::new();
        for x in 0..2 {
            for y in 0..2 {
                let e = kron(q.effect(x), p.effect(y));
                effects.push(HermitianMatrix::from_hermitian_part(&e));
            }
        }
        let g = Meter::new(OutcomeShape::Product(2, 2), effects).unwrap();
        let m1 = joint_meter_margin(&g, Side::First).unwrap();
        let m2 = joint_meter_margin(&g, Side::Second).unwrap();
        for x in 0..2 {
            let red = partial_trace(m1.effect(x), (2, 2), Subsystem::First).unwrap();
            assert!(red.max_abs_diff(&q.effect(x).scale(2.0)) < 1e-15);
            let red = partial_trace(m2.effect(x), (2, 2), Subsystem::Second).unwrap();
            assert!(red.max_abs_diff(&p.effect(x).scale(2.0)) < 1e-15);
        }
    }

    #[test]
    fn margin_of_flat_meter_is_rejected() {
        let q = sharp_meter(&Basis::standard(2));
        assert_eq!(joint_meter_margin(&q, Side::First), Err(Error::NonProduct));
    }
}
