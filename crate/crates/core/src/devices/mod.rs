//! Meters, channels, instruments and vector measures on `C^d`.

mod basis;
mod channel;
mod instrument;
mod meter;
mod vector_measure;

pub use basis::{flip, fourier_conjugate, max_entangled, omega_pow, weyl, Basis};
pub use channel::{
    choi_of, depolarizing, detect_depolarizing, measure_and_prepare, q_biased_depolarizer,
    unitary_channel, Channel,
};
pub use instrument::{
    instrument_induced_meter, instrument_total_channel, sequential_compose, Instrument,
};
pub use meter::{
    is_mutually_unbiased, joint_meter_margin, noisy_meter, sharp_meter, Meter, OutcomeShape, Side,
};
pub use vector_measure::VectorMeasure;

use crate::error::{Error, Result};

/// Lowest admissible noise parameters in dimension `d`: meters `Q_s` stay
/// positive down to `m1 = −1/(d−1)`, depolarizers `I_r` down to `m2 = −1/(d²−1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseBounds {
    pub dim: usize,
    pub m1: f64,
    pub m2: f64,
}

impl NoiseBounds {
    pub fn new(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::Dimension(format!(
                "qudit dimension must be at least 2, got {d}"
            )));
        }
        let df = d as f64;
        Ok(Self {
            dim: d,
            m1: -1.0 / (df - 1.0),
            m2: -1.0 / (df * df - 1.0),
        })
    }
}

/// The canonical pair: `Q` on the standard basis and `P` on its Fourier conjugate.
pub fn canonical_pair(d: usize) -> (Meter, Meter) {
    let b = Basis::standard(d);
    (sharp_meter(&b), sharp_meter(&fourier_conjugate(&b)))
}
