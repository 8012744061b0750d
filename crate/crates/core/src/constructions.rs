//! Explicit joint devices on the edges of the compatibility regions, and
//! verifiers that check their margins and positivity.

use std::fmt;

use crate::devices::{
    depolarizing, detect_depolarizing, flip, instrument_induced_meter, instrument_total_channel,
    is_mutually_unbiased, joint_meter_margin, noisy_meter, q_biased_depolarizer, Channel,
    Instrument, Meter, NoiseBounds, OutcomeShape, Side,
};
use crate::error::{Error, Result};
use crate::numkit::{kron, CMatrix, HermitianMatrix, Subsystem, STRUCTURAL_TOL};
use crate::regions::{coeff_a, coeff_b};

/// Joint meters for a pair of mutually unbiased noisy sharp meters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum JointMeterKind {
    /// `G(x,y) = X P(y) X` with `X = a₁(s)Q(x) + b(s)/√d`.
    Optimal { s: f64 },
    /// `G(x,y) = Y Q(x) Y` with `Y = a₁(t)P(y) + b(t)/√d`.
    Tilde { t: f64 },
    /// `G(x,y) = X (1 − P(y)) X`, qubits only.
    Minus { s: f64 },
    /// `G(x,y) = [1 − (d/(d−1))(Q(x) − P(y))²] / (d(d−2))`, for `d ≥ 3`.
    Corner,
}

/// Joint channels `C^d → C^d ⊗ C^d` for two depolarizing channels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ClonerKind {
    /// `ρ ↦ (a₂(s) + b(s)F)(ρ ⊗ 1/d)(a₂(s) + b(s)F)`
    Optimal { s: f64 },
    /// `ρ ↦ (b(t) + a₂(t)F)(ρ ⊗ 1/d)(b(t) + a₂(t)F)`
    Tilde { t: f64 },
    /// `ρ ↦ [tr(ρ)1 − 2Σ_± S_±(ρ ⊗ 1)S_±/(d ± 1)] / (d² − 2)`
    Corner,
}

/// Joint instruments for a noisy sharp meter and a channel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InstrumentKind {
    Optimal {
        s: f64,
    },
    Tilde {
        t: f64,
    },
    TildeMinus {
        t: f64,
    },
    /// Requires `d ≥ 3`.
    Corner,
    /// `ρ ↦ X ρ X` with `X = Q_s(x)^{1/2}`.
    Luders {
        s: f64,
    },
    /// Lüders followed by conjugation with `1 − 2Q(x)`.
    LudersReflect {
        s: f64,
    },
    /// Lüders at `s = m1` followed by the corner postprocessing; requires `d ≥ 3`.
    LudersCornerPost,
}

/// The channel an instrument is expected to reproduce.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ChannelTarget {
    /// `I_r`
    Depolarizing(f64),
    /// `I′_t = t·id + (1−t)Φ_Q`
    QBiased(f64),
}

impl fmt::Display for ChannelTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelTarget::Depolarizing(r) => write!(f, "I_{r:.6}"),
            ChannelTarget::QBiased(t) => write!(f, "I'_{t:.6}"),
        }
    }
}

fn check_pair(q: &Meter, p: &Meter) -> Result<()> {
    if !q.is_sharp() || !p.is_sharp() {
        return Err(Error::InvalidDevice(
            "joint meters need sharp target meters".into(),
        ));
    }
    if !is_mutually_unbiased(q, p, STRUCTURAL_TOL)? {
        return Err(Error::NotMub);
    }
    Ok(())
}

fn require_qubit(what: &'static str, d: usize) -> Result<()> {
    if d == 2 {
        Ok(())
    } else {
        Err(Error::Unsupported(what, d))
    }
}

fn require_at_least_3(what: &'static str, d: usize) -> Result<()> {
    if d >= 3 {
        Ok(())
    } else {
        Err(Error::Unsupported(what, d))
    }
}

/// `a₁(s)E + b(s)/√d · 1`, the square root of `s E + (1−s)/d` for a projector `E`.
fn sqrt_noisy(e: &CMatrix, d: usize, s: f64) -> CMatrix {
    let id = CMatrix::identity(d);
    &e.scale(coeff_a(1, d, s)) + &id.scale(coeff_b(s) / (d as f64).sqrt())
}

impl JointMeterKind {
    /// Noise parameters `(s, t)` of the two margins `(Q_s, P_t)`.
    pub fn expected_margins(self, d: usize) -> Result<(f64, f64)> {
        let b = NoiseBounds::new(d)?;
        match self {
            JointMeterKind::Optimal { s } => {
                Error::check_range("s", s, b.m1, 1.0)?;
                Ok((s, 1.0 - coeff_a(1, d, s).powi(2)))
            }
            JointMeterKind::Tilde { t } => {
                Error::check_range("t", t, b.m1, 1.0)?;
                Ok((1.0 - coeff_a(1, d, t).powi(2), t))
            }
            JointMeterKind::Minus { s } => {
                require_qubit("the reflected joint meter", d)?;
                Error::check_range("s", s, -1.0, 1.0)?;
                Ok((s, coeff_a(1, d, s).powi(2) - 1.0))
            }
            JointMeterKind::Corner => {
                require_at_least_3("the corner joint meter", d)?;
                Ok((b.m1, b.m1))
            }
        }
    }
}

/// Joint meter on `X × Y` for the sharp mutually unbiased pair `(q, p)`.
pub fn joint_meter(kind: JointMeterKind, q: &Meter, p: &Meter) -> Result<Meter> {
    check_pair(q, p)?;
    let d = q.dim();
    kind.expected_margins(d)?;
    let id = CMatrix::identity(d);
    let mut effects = Vec::with_capacity(d * d);
    for x in 0..d {
        for y in 0..d {
            let qx = q.effect(x).as_matrix();
            let py = p.effect(y).as_matrix();
            let g = match kind {
                JointMeterKind::Optimal { s } => sqrt_noisy(qx, d, s).conjugate(py),
                JointMeterKind::Tilde { t } => sqrt_noisy(py, d, t).conjugate(qx),
                JointMeterKind::Minus { s } => sqrt_noisy(qx, d, s).conjugate(&(&id - py)),
                JointMeterKind::Corner => {
                    let diff = qx - py;
                    let df = d as f64;
                    (&id - &diff.matmul(&diff).scale(df / (df - 1.0)))
                        .scale(1.0 / (df * (df - 2.0)))
                }
            };
            effects.push(HermitianMatrix::from_hermitian_part(&g));
        }
    }
    Meter::new(OutcomeShape::Product(d, d), effects)
}

impl ClonerKind {
    /// Depolarizing parameters of the two clones.
    pub fn expected_margins(self, d: usize) -> Result<(f64, f64)> {
        let b = NoiseBounds::new(d)?;
        match self {
            ClonerKind::Optimal { s } => {
                Error::check_range("s", s, b.m2, 1.0)?;
                Ok((s, 1.0 - coeff_a(2, d, s).powi(2)))
            }
            ClonerKind::Tilde { t } => {
                Error::check_range("t", t, b.m2, 1.0)?;
                Ok((1.0 - coeff_a(2, d, t).powi(2), t))
            }
            ClonerKind::Corner => Ok((b.m2, b.m2)),
        }
    }
}

/// Joint channel `C^d → C^d ⊗ C^d` whose two clones are depolarizing.
pub fn cloner(kind: ClonerKind, d: usize) -> Result<Channel> {
    kind.expected_margins(d)?;
    let df = d as f64;
    let id = CMatrix::identity(d);
    let id2 = CMatrix::identity(d * d);
    let f = flip(d);
    match kind {
        ClonerKind::Optimal { .. } | ClonerKind::Tilde { .. } => {
            let (c_id, c_flip) = match kind {
                ClonerKind::Optimal { s } => (coeff_a(2, d, s), coeff_b(s)),
                ClonerKind::Tilde { t } => (coeff_b(t), coeff_a(2, d, t)),
                ClonerKind::Corner => unreachable!(),
            };
            let k = &id2.scale(c_id) + &f.scale(c_flip);
            Channel::from_map(d, d * d, |rho| k.conjugate(&kron(rho, &id)).scale(1.0 / df))
        }
        ClonerKind::Corner => {
            let sym = (&id2 + &f).scale(0.5);
            let anti = (&id2 - &f).scale(0.5);
            Channel::from_map(d, d * d, |rho| {
                let lifted = kron(rho, &id);
                let mut out = id2.scale_c(rho.trace());
                out -= &sym.conjugate(&lifted).scale(2.0 / (df + 1.0));
                out -= &anti.conjugate(&lifted).scale(2.0 / (df - 1.0));
                out.scale(1.0 / (df * df - 2.0))
            })
        }
    }
}

impl InstrumentKind {
    /// Induced meter parameter and total channel.
    pub fn expected_pair(self, d: usize) -> Result<(f64, ChannelTarget)> {
        let b = NoiseBounds::new(d)?;
        let df = d as f64;
        match self {
            InstrumentKind::Optimal { s } => {
                Error::check_range("s", s, b.m2, 1.0)?;
                Ok((
                    s,
                    ChannelTarget::Depolarizing(1.0 - coeff_a(2, d, s).powi(2)),
                ))
            }
            InstrumentKind::Tilde { t } => {
                Error::check_range("t", t, b.m2, 1.0)?;
                Ok((
                    1.0 - coeff_a(2, d, t).powi(2),
                    ChannelTarget::Depolarizing(t),
                ))
            }
            InstrumentKind::TildeMinus { t } => {
                Error::check_range("t", t, b.m2, 1.0)?;
                let (a, bt) = (coeff_a(2, d, t), coeff_b(t));
                let s = -(2.0 / df) * bt * (a + 2.0 * bt / df);
                Ok((s, ChannelTarget::Depolarizing(t)))
            }
            InstrumentKind::Corner => {
                require_at_least_3("the corner joint instrument", d)?;
                Ok((b.m1, ChannelTarget::Depolarizing(b.m2)))
            }
            InstrumentKind::Luders { s } => {
                Error::check_range("s", s, b.m1, 1.0)?;
                Ok((s, ChannelTarget::QBiased(1.0 - coeff_a(1, d, s).powi(2))))
            }
            InstrumentKind::LudersReflect { s } => {
                Error::check_range("s", s, b.m1, 1.0)?;
                let c = coeff_a(1, d, s) + 2.0 * coeff_b(s) / df.sqrt();
                Ok((s, ChannelTarget::QBiased(1.0 - c * c)))
            }
            InstrumentKind::LudersCornerPost => {
                require_at_least_3("the postprocessed corner instrument", d)?;
                Ok((b.m1, ChannelTarget::QBiased(b.m1)))
            }
        }
    }
}

/// Joint instrument on `C^d` with outcomes indexed by the sharp meter `q`.
pub fn instrument(kind: InstrumentKind, q: &Meter) -> Result<Instrument> {
    if !q.is_sharp() {
        return Err(Error::InvalidDevice(
            "instruments are built on a sharp meter".into(),
        ));
    }
    let d = q.dim();
    kind.expected_pair(d)?;
    let df = d as f64;
    let id = CMatrix::identity(d);
    let qm = |x: usize| q.effect(x).as_matrix().clone();
    let tr_q = |x: usize, rho: &CMatrix| q.effect(x).hs_inner(rho);
    // (1/d)[α² tr(ρQ)1 + αβ(ρQ + Qρ) + β²ρ]
    let id_ref = &id;
    let clone_branch = |alpha: f64, beta: f64| {
        move |x: usize, rho: &CMatrix| {
            let id = id_ref;
            let qx = qm(x);
            let mut out = id.scale_c(tr_q(x, rho) * alpha * alpha);
            out += &(&rho.matmul(&qx) + &qx.matmul(rho)).scale(alpha * beta);
            out += &rho.scale(beta * beta);
            out.scale(1.0 / df)
        }
    };
    match kind {
        InstrumentKind::Optimal { s } => {
            Instrument::from_maps(d, d, d, clone_branch(coeff_a(2, d, s), coeff_b(s)))
        }
        InstrumentKind::Tilde { t } => {
            Instrument::from_maps(d, d, d, clone_branch(coeff_b(t), coeff_a(2, d, t)))
        }
        InstrumentKind::TildeMinus { t } => {
            let (a, b) = (coeff_a(2, d, t), coeff_b(t));
            Instrument::from_maps(d, d, d, |x, rho| {
                let qx = qm(x);
                let y = &id.scale(a + 2.0 * b / df) - &qx.scale(b);
                let not_x = rho.trace() - tr_q(x, rho);
                let out = &qx.scale_c(not_x * b * b) + &y.conjugate(rho);
                out.scale(1.0 / df)
            })
        }
        InstrumentKind::Corner => Instrument::from_maps(d, d, d, |x, rho| {
            let qx = qm(x);
            let mut pinch = CMatrix::zeros(d, d);
            for z in 0..d {
                pinch += &qm(z).scale_c(tr_q(z, rho));
            }
            let mut out = (&(&qx.matmul(rho) + &rho.matmul(&qx)) - rho).scale(1.0 / (df - 2.0));
            pinch -= &qx.scale_c(tr_q(x, rho) * df);
            out += &pinch.scale(1.0 / ((df - 1.0) * (df - 2.0)));
            out += &id.scale_c((rho.trace() - tr_q(x, rho)) * (df / (df - 1.0)));
            out.scale(1.0 / (df * df - 1.0))
        }),
        InstrumentKind::Luders { s } => {
            Instrument::from_maps(d, d, d, |x, rho| sqrt_noisy(&qm(x), d, s).conjugate(rho))
        }
        InstrumentKind::LudersReflect { s } => Instrument::from_maps(d, d, d, |x, rho| {
            let r = &id - &qm(x).scale(2.0);
            r.matmul(&sqrt_noisy(&qm(x), d, s)).conjugate(rho)
        }),
        InstrumentKind::LudersCornerPost => {
            let m1 = -1.0 / (df - 1.0);
            let c = 1.0 / (df - 1.0);
            Instrument::from_maps(d, d, d, |x, rho| {
                let sigma = sqrt_noisy(&qm(x), d, m1).conjugate(rho);
                let mut out = CMatrix::zeros(d, d);
                for z in (0..d).filter(|&z| z != x) {
                    out += &(&id.scale(c) - &qm(z)).conjugate(&sigma);
                }
                out.scale((df - 1.0) / (df - 2.0))
            })
        }
    }
}

/// One margin identity checked by a verifier.
#[derive(Clone, Debug, PartialEq)]
pub struct MarginCheck {
    pub label: String,
    pub residual: f64,
}

/// Outcome of a device verification.
#[derive(Clone, Debug, PartialEq)]
pub struct DeviceReport {
    pub margins: Vec<MarginCheck>,
    /// Normalization (meters) or trace-preservation (channels, instruments) defect.
    pub normalization_residual: f64,
    /// Smallest eigenvalue over effects or Choi operators.
    pub psd_margin: f64,
    /// Noise parameters read off the device, e.g. a detected depolarizing parameter.
    pub detected: Vec<(String, Option<f64>)>,
}

impl DeviceReport {
    pub fn max_residual(&self) -> f64 {
        self.margins
            .iter()
            .map(|m| m.residual)
            .fold(self.normalization_residual, f64::max)
    }

    pub fn passed(&self, tol: f64) -> bool {
        self.max_residual() <= tol && self.psd_margin >= -tol
    }
}

/// Noise parameter `s` of a meter of the form `Q_s`, read from `M(0)`.
fn fit_noisy_parameter(m: &Meter, sharp: &Meter) -> Option<f64> {
    let d = m.dim() as f64;
    let s = (d * m.effect(0).hs_inner(sharp.effect(0)).re - 1.0) / (d - 1.0);
    let candidate = noisy_meter(sharp, s).ok()?;
    (candidate.max_abs_diff(m) <= STRUCTURAL_TOL).then_some(s)
}

/// Checks a product-outcome meter against `(Q_{s}, P_{t})` margins.
pub fn verify_joint_meter(
    g: &Meter,
    q: &Meter,
    p: &Meter,
    expected: (f64, f64),
) -> Result<DeviceReport> {
    check_pair(q, p)?;
    let (norm, psd) = g.defects()?;
    let m1 = joint_meter_margin(g, Side::First)?;
    let m2 = joint_meter_margin(g, Side::Second)?;
    let want1 = noisy_meter(q, expected.0)?;
    let want2 = noisy_meter(p, expected.1)?;
    Ok(DeviceReport {
        margins: vec![
            MarginCheck {
                label: format!("first margin = Q_{:.6}", expected.0),
                residual: m1.max_abs_diff(&want1),
            },
            MarginCheck {
                label: format!("second margin = P_{:.6}", expected.1),
                residual: m2.max_abs_diff(&want2),
            },
        ],
        normalization_residual: norm,
        psd_margin: psd,
        detected: vec![
            ("first margin s".into(), fit_noisy_parameter(&m1, q)),
            ("second margin t".into(), fit_noisy_parameter(&m2, p)),
        ],
    })
}

/// Checks a channel into `C^d ⊗ C^d` against depolarizing clones `(I_s, I_t)`.
pub fn verify_cloner(c: &Channel, expected: (f64, f64)) -> Result<DeviceReport> {
    let d = c.in_dim();
    if c.out_dim() != d * d {
        return Err(Error::Dimension(format!(
            "a cloner maps C^{d} into C^{d} ⊗ C^{d}, got output size {}",
            c.out_dim()
        )));
    }
    let (norm, psd) = c.defects()?;
    let first = c.output_margin((d, d), Subsystem::First)?;
    let second = c.output_margin((d, d), Subsystem::Second)?;
    Ok(DeviceReport {
        margins: vec![
            MarginCheck {
                label: format!("first clone = I_{:.6}", expected.0),
                residual: first.max_abs_diff(&depolarizing(d, expected.0)?),
            },
            MarginCheck {
                label: format!("second clone = I_{:.6}", expected.1),
                residual: second.max_abs_diff(&depolarizing(d, expected.1)?),
            },
        ],
        normalization_residual: norm,
        psd_margin: psd,
        detected: vec![
            (
                "first clone r".into(),
                detect_depolarizing(&first, STRUCTURAL_TOL),
            ),
            (
                "second clone r".into(),
                detect_depolarizing(&second, STRUCTURAL_TOL),
            ),
        ],
    })
}

/// Checks an instrument against the pair `(Q_s, channel)`.
pub fn verify_instrument(
    j: &Instrument,
    q: &Meter,
    meter_s: f64,
    channel: ChannelTarget,
) -> Result<DeviceReport> {
    let (norm, psd) = j.defects()?;
    let m = instrument_induced_meter(j);
    let total = instrument_total_channel(j);
    let want_m = noisy_meter(q, meter_s)?;
    let want_c = match channel {
        ChannelTarget::Depolarizing(r) => depolarizing(q.dim(), r)?,
        ChannelTarget::QBiased(t) => q_biased_depolarizer(q, t)?,
    };
    Ok(DeviceReport {
        margins: vec![
            MarginCheck {
                label: format!("induced meter = Q_{meter_s:.6}"),
                residual: m.max_abs_diff(&want_m),
            },
            MarginCheck {
                label: format!("total channel = {channel}"),
                residual: total.max_abs_diff(&want_c),
            },
        ],
        normalization_residual: norm,
        psd_margin: psd,
        detected: vec![
            ("meter s".into(), fit_noisy_parameter(&m, q)),
            (
                "channel r".into(),
                detect_depolarizing(&total, STRUCTURAL_TOL),
            ),
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::devices::{canonical_pair, sequential_compose};
    use crate::numkit::hermitian_eigensystem;
    use approx::assert_abs_diff_eq;

    #[test]
    fn optimal_d2_half() {
        let (q, p) = canonical_pair(2);
        let kind = JointMeterKind::Optimal { s: 0.5 };
        let (s, t) = kind.expected_margins(2).unwrap();
        assert_eq!(s, 0.5);
        assert_abs_diff_eq!(t, 0.866025, epsilon = 1e-6);
        let g = joint_meter(kind, &q, &p).unwrap();
        assert!(verify_joint_meter(&g, &q, &p, (s, t))
            .unwrap()
            .passed(1e-10));
    }

    #[test]
    fn optimal_at_one_is_sequential_sharp() {
        let (q, p) = canonical_pair(3);
        let g = joint_meter(JointMeterKind::Optimal { s: 1.0 }, &q, &p).unwrap();
        for x in 0..3 {
            for y in 0..3 {
                let want = q.effect(x).conjugate(p.effect(y));
                assert!(g.joint_effect(x, y).unwrap().max_abs_diff(&want) < 1e-15);
            }
        }
        assert_eq!(
            JointMeterKind::Optimal { s: 1.0 }
                .expected_margins(3)
                .unwrap(),
            (1.0, 0.0)
        );
    }

    #[test]
    fn corner_meter_d3() {
        let (q, p) = canonical_pair(3);
        let g = joint_meter(JointMeterKind::Corner, &q, &p).unwrap();
        let report = verify_joint_meter(&g, &q, &p, (-0.5, -0.5)).unwrap();
        assert!(report.passed(1e-10), "{report:?}");
        assert_abs_diff_eq!(report.detected[0].1.unwrap(), -0.5, epsilon = 1e-12);
    }

    #[test]
    fn dimension_restrictions() {
        let (q, p) = canonical_pair(3);
        assert!(matches!(
            joint_meter(JointMeterKind::Minus { s: 0.2 }, &q, &p),
            Err(Error::Unsupported(..))
        ));
        let (q2, p2) = canonical_pair(2);
        assert!(joint_meter(JointMeterKind::Corner, &q2, &p2).is_err());
        assert!(instrument(InstrumentKind::Corner, &q2).is_err());
        assert!(instrument(InstrumentKind::LudersCornerPost, &q2).is_err());
    }

    #[test]
    fn non_mub_pair_is_rejected() {
        let (q, _) = canonical_pair(2);
        assert_eq!(
            joint_meter(JointMeterKind::Optimal { s: 0.5 }, &q, &q),
            Err(Error::NotMub)
        );
    }

    #[test]
    fn symmetric_cloner_d2() {
        let s = 2.0 / 3.0;
        let c = cloner(ClonerKind::Optimal { s }, 2).unwrap();
        let (r1, r2) = ClonerKind::Optimal { s }.expected_margins(2).unwrap();
        assert_abs_diff_eq!(r2, s, epsilon = 1e-12);
        assert!(verify_cloner(&c, (r1, r2)).unwrap().passed(1e-10));
        // (2/(d+1)) S (ρ ⊗ 1) S with S the symmetric projector.
        let id4 = CMatrix::identity(4);
        let sym = (&id4 + &flip(2)).scale(0.5);
        let rho = CMatrix::diag(&[0.3, 0.7]);
        let want = sym
            .conjugate(&kron(&rho, &CMatrix::identity(2)))
            .scale(2.0 / 3.0);
        assert!(c.apply(&rho).max_abs_diff(&want) < 1e-14);
    }

    #[test]
    fn corner_cloner_spectrum_d3() {
        let c = cloner(ClonerKind::Corner, 3).unwrap();
        let vals = hermitian_eigensystem(c.choi()).unwrap().values;
        for v in &vals[..6] {
            assert!(v.abs() < 1e-10);
        }
        for v in &vals[6..] {
            assert!((v - 1.0 / 21.0).abs() < 1e-10);
        }
        let report = verify_cloner(&c, (-0.125, -0.125)).unwrap();
        assert!(report.passed(1e-10));
        assert_abs_diff_eq!(report.detected[1].1.unwrap(), -0.125, epsilon = 1e-10);
    }

    #[test]
    fn cloner_at_one_keeps_first_copy() {
        let c = cloner(ClonerKind::Optimal { s: 1.0 }, 3).unwrap();
        assert!(verify_cloner(&c, (1.0, 0.0)).unwrap().passed(1e-10));
    }

    #[test]
    fn optimal_instrument_d2() {
        let (q, _) = canonical_pair(2);
        // 1 − a₂(s)² = 0.5 on the boundary.
        let s = crate::regions::boundary_s_max(crate::regions::PairKind::QI, 2, 0.5).unwrap();
        let kind = InstrumentKind::Optimal { s };
        let (ms, ch) = kind.expected_pair(2).unwrap();
        let ChannelTarget::Depolarizing(r) = ch else {
            panic!()
        };
        assert_abs_diff_eq!(r, 0.5, epsilon = 1e-10);
        let j = instrument(kind, &q).unwrap();
        assert!(verify_instrument(&j, &q, ms, ch).unwrap().passed(1e-10));
    }

    #[test]
    fn tilde_minus_d2_half() {
        let (q, _) = canonical_pair(2);
        let kind = InstrumentKind::TildeMinus { t: 0.5 };
        let (ms, ch) = kind.expected_pair(2).unwrap();
        assert_abs_diff_eq!(ms, -0.809017, epsilon = 1e-6);
        let j = instrument(kind, &q).unwrap();
        assert!(verify_instrument(&j, &q, ms, ch).unwrap().passed(1e-10));
    }

    #[test]
    fn corner_instrument_d3() {
        let (q, _) = canonical_pair(3);
        let j = instrument(InstrumentKind::Corner, &q).unwrap();
        let report = verify_instrument(&j, &q, -0.5, ChannelTarget::Depolarizing(-0.125)).unwrap();
        assert!(report.passed(1e-10), "{report:?}");
    }

    #[test]
    fn luders_composes_to_optimal_meter() {
        for d in 2..=4 {
            let (q, p) = canonical_pair(d);
            for s in [0.3, 0.9, -0.2] {
                let j = instrument(InstrumentKind::Luders { s }, &q).unwrap();
                let g = joint_meter(JointMeterKind::Optimal { s }, &q, &p).unwrap();
                assert!(sequential_compose(&j, &p).unwrap().max_abs_diff(&g) < 1e-12);
            }
        }
    }

    #[test]
    fn optimal_instrument_measures_first_clone() {
        for d in 2..=3 {
            let (q, _) = canonical_pair(d);
            let s = 0.4;
            let j = instrument(InstrumentKind::Optimal { s }, &q).unwrap();
            let c = cloner(ClonerKind::Optimal { s }, d).unwrap();
            let id = CMatrix::identity(d);
            for x in 0..d {
                for (a, b) in [(0, 0), (0, 1), (1, 1)] {
                    let rho = CMatrix::unit(d, a, b);
                    let lifted = kron(q.effect(x), &id).matmul(&c.apply(&rho));
                    let want =
                        crate::numkit::partial_trace(&lifted, (d, d), Subsystem::Second).unwrap();
                    assert!(j.apply(x, &rho).max_abs_diff(&want) < 1e-12);
                }
            }
        }
    }

    #[test]
    fn corrupted_effect_fails() {
        let (q, p) = canonical_pair(3);
        let g = joint_meter(JointMeterKind::Corner, &q, &p).unwrap();
        let mut effects = g.effects().to_vec();
        let mut e0 = effects[0].as_matrix().clone();
        e0[(0, 0)] += crate::C64::new(1e-3, 0.0);
        effects[0] = HermitianMatrix::new(e0).unwrap();
        let bad = Meter::new_unchecked(g.shape(), effects).unwrap();
        let report = verify_joint_meter(&bad, &q, &p, (-0.5, -0.5)).unwrap();
        assert!(!report.passed(1e-10));
        assert_abs_diff_eq!(report.max_residual(), 1e-3, epsilon = 1e-9);
    }
}
