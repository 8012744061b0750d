use crate::error::{Error, Result};
use crate::numkit::{psd_margin, HermitianMatrix, STRUCTURAL_TOL};

/// PSD operators `S(x)`, `x ∈ Z_d`, with `Σ_x tr S(x) = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorMeasure {
    dim: usize,
    values: Vec<HermitianMatrix>,
}

impl VectorMeasure {
    pub fn new(values: Vec<HermitianMatrix>) -> Result<Self> {
        let vm = Self::new_unchecked(values)?;
        let (trace_defect, margin) = vm.defects()?;
        if trace_defect > STRUCTURAL_TOL {
            return Err(Error::InvalidDevice(format!(
                "vector measure has total trace off by {trace_defect:.3e}"
            )));
        }
        if margin < -STRUCTURAL_TOL {
            return Err(Error::InvalidDevice(format!(
                "vector measure value has eigenvalue {margin:.3e}"
            )));
        }
        Ok(vm)
    }

    pub fn new_unchecked(values: Vec<HermitianMatrix>) -> Result<Self> {
        let dim = values.first().map(|v| v.dim()).unwrap_or(0);
        if dim < 2 || values.len() != dim || values.iter().any(|v| v.dim() != dim) {
            return Err(Error::Dimension(format!(
                "a vector measure on Z_d needs d values of size d x d, got {}",
                values.len()
            )));
        }
        Ok(Self { dim, values })
    }

    /// (|Σ tr S(x) − 1|, smallest eigenvalue over all S(x))
    pub fn defects(&self) -> Result<(f64, f64)> {
        let total: f64 = self.values.iter().map(|v| v.trace_re()).sum();
        let mut margin = f64::INFINITY;
        for v in &self.values {
            margin = margin.min(psd_margin(v)?);
        }
        Ok(((total - 1.0).abs(), margin))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value(&self, x: usize) -> &HermitianMatrix {
        &self.values[x]
    }

    pub fn values(&self) -> &[HermitianMatrix] {
        &self.values
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::CMatrix;

    #[test]
    fn uniform_measure_is_valid() {
        let d = 3;
        let v = HermitianMatrix::from_hermitian_part(&CMatrix::identity(d).scale(1.0 / 9.0));
        let vm = VectorMeasure::new(vec![v; d]).unwrap();
        assert_eq!(vm.dim(), 3);
    }

    #[test]
    fn wrong_trace_is_rejected() {
        let v = HermitianMatrix::from_hermitian_part(&CMatrix::identity(2));
        assert!(VectorMeasure::new(vec![v.clone(), v]).is_err());
    }
}
