use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix has non-finite entries")]
    NonFinite,

    #[error("matrix is not Hermitian (defect {0:.3e})")]
    NotHermitian(f64),

    #[error("{name} = {value} is outside the admissible range [{min}, {max}]")]
    Inadmissible {
        name: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("invalid device: {0}")]
    InvalidDevice(String),

    #[error("{0} is not defined in dimension {1}")]
    Unsupported(&'static str, usize),

    #[error("outcome labels do not form a product set")]
    NonProduct,

    #[error("sharp meters are not mutually unbiased")]
    NotMub,

    #[error("iteration budget {0} is below the minimum of 100")]
    Budget(usize),
}

impl Error {
    pub(crate) fn check_range(name: &'static str, value: f64, min: f64, max: f64) -> Result<()> {
        // Admissible ranges are closed; allow rounding noise at the endpoints.
        let slack = 1e-12;
        if value.is_finite() && value >= min - slack && value <= max + slack {
            Ok(())
        } else {
            Err(Error::Inadmissible {
                name,
                value,
                min,
                max,
            })
        }
    }
}
