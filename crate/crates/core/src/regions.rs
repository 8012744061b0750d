//! Closed-form compatibility regions.
//!
//! Three pairs are covered: two mutually unbiased noisy sharp meters
//! `(Q_s, P_t)`, two depolarizing channels `(I_s, I_t)` and a noisy meter with
//! a depolarizing channel `(Q_s, I_t)`. The standard regions live in `[0,1]²`;
//! the extended regions allow the overnoisy parameters down to `m1`/`m2`.

use std::fmt;
use std::str::FromStr;

use crate::devices::NoiseBounds;
use crate::error::{Error, Result};

/// Slack on closed-form residuals; regions are closed.
pub const MEMBERSHIP_TOL: f64 = 1e-12;
const BISECTION_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PairKind {
    /// Noisy sharp meters on mutually unbiased bases.
    QP,
    /// Two depolarizing channels.
    II,
    /// Noisy sharp meter and depolarizing channel.
    QI,
}

impl PairKind {
    pub const ALL: [PairKind; 3] = [PairKind::QP, PairKind::II, PairKind::QI];

    pub fn name(self) -> &'static str {
        match self {
            PairKind::QP => "qp",
            PairKind::II => "ii",
            PairKind::QI => "qi",
        }
    }

    /// Lowest admissible `s` and `t` in the extended setting.
    pub fn lower_bounds(self, d: usize) -> Result<(f64, f64)> {
        let b = NoiseBounds::new(d)?;
        Ok(match self {
            PairKind::QP => (b.m1, b.m1),
            PairKind::II => (b.m2, b.m2),
            PairKind::QI => (b.m1, b.m2),
        })
    }
}

impl fmt::Display for PairKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PairKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "qp" => Ok(PairKind::QP),
            "ii" => Ok(PairKind::II),
            "qi" => Ok(PairKind::QI),
            other => Err(format!("unknown pair '{other}' (expected qp, ii or qi)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegionQuery {
    pub kind: PairKind,
    pub dim: usize,
    pub s: f64,
    pub t: f64,
    pub extended: bool,
}

impl RegionQuery {
    pub fn new(kind: PairKind, dim: usize, s: f64, t: f64, extended: bool) -> Self {
        Self {
            kind,
            dim,
            s,
            t,
            extended,
        }
    }

    pub fn check_admissible(&self) -> Result<()> {
        let (s_lo, t_lo) = if self.extended {
            self.kind.lower_bounds(self.dim)?
        } else {
            NoiseBounds::new(self.dim)?;
            (0.0, 0.0)
        };
        Error::check_range("s", self.s, s_lo, 1.0)?;
        Error::check_range("t", self.t, t_lo, 1.0)
    }
}

/// The coefficients `a_k(r)` and `b(r)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseCoeffs {
    pub k: u32,
    pub dim: usize,
    pub r: f64,
    pub a: f64,
    pub b: f64,
}

impl NoiseCoeffs {
    /// `a² + b² + (2/√(d^k))ab − 1`, zero up to rounding.
    pub fn identity_residual(&self) -> f64 {
        let sd = (self.dim as f64).powi(self.k as i32).sqrt();
        self.a * self.a + self.b * self.b + 2.0 / sd * self.a * self.b - 1.0
    }
}

/// `a_k(r) = (1/√(d^k))[√(r(d^k−1)+1) − √(1−r)]`, `b(r) = √(1−r)`, for `r ∈ [m_k, 1]`.
pub fn noise_coeffs(k: u32, d: usize, r: f64) -> Result<NoiseCoeffs> {
    let bounds = NoiseBounds::new(d)?;
    let lo = match k {
        1 => bounds.m1,
        2 => bounds.m2,
        _ => {
            return Err(Error::Dimension(format!(
                "coefficient order must be 1 or 2, got {k}"
            )))
        }
    };
    Error::check_range("r", r, lo, 1.0)?;
    let dk = (d as f64).powi(k as i32);
    let a = ((r * (dk - 1.0) + 1.0).max(0.0).sqrt() - (1.0 - r).max(0.0).sqrt()) / dk.sqrt();
    let b = (1.0 - r).max(0.0).sqrt();
    Ok(NoiseCoeffs { k, dim: d, r, a, b })
}

/// `a_k(r)` for callers that have already checked the range.
pub(crate) fn coeff_a(k: u32, d: usize, r: f64) -> f64 {
    let dk = (d as f64).powi(k as i32);
    ((r * (dk - 1.0) + 1.0).max(0.0).sqrt() - (1.0 - r).max(0.0).sqrt()) / dk.sqrt()
}

pub(crate) fn coeff_b(r: f64) -> f64 {
    (1.0 - r).max(0.0).sqrt()
}

/// Ellipse through the standard boundary arc with effective dimension `d^k`:
/// `d^k(s²+t²) + 2(d^k−2)(1−s)(1−t) − d^k`.
pub fn ellipse_residual(k: u32, d: usize, s: f64, t: f64) -> f64 {
    let dk = (d as f64).powi(k as i32);
    dk * (s * s + t * t) + 2.0 * (dk - 2.0) * (1.0 - s) * (1.0 - t) - dk
}

/// Ellipse through the lower meter–channel arc: `d²s² + 4t² + 4(1+s)(1−t) − 4`.
pub fn ellipse_neg_residual(d: usize, s: f64, t: f64) -> f64 {
    let d2 = (d * d) as f64;
    d2 * s * s + 4.0 * t * t + 4.0 * (1.0 + s) * (1.0 - t) - 4.0
}

/// Effective dimension entering the standard inequality `s+t−1 ≤ (2/√D)√((1−s)(1−t))`.
fn effective_dim(kind: PairKind, d: usize) -> f64 {
    match kind {
        PairKind::QP => d as f64,
        PairKind::II | PairKind::QI => (d * d) as f64,
    }
}

fn standard_holds(kind: PairKind, d: usize, s: f64, t: f64) -> bool {
    let dk = effective_dim(kind, d);
    let rhs = 2.0 / dk.sqrt() * ((1.0 - s).max(0.0) * (1.0 - t).max(0.0)).sqrt();
    s + t - 1.0 <= rhs + MEMBERSHIP_TOL
}

/// `s+t−1 ≤ (2/D)[m−1+√(m²(1−D)+m(D−2)+1)]` with `m = min(s,t)`, `D ≥ 3`.
fn min_form_holds(dk: f64, s: f64, t: f64) -> bool {
    let m = s.min(t);
    let rad = (1.0 - m) * (1.0 + (dk - 1.0) * m);
    let rhs = 2.0 / dk * (m - 1.0 + rad.max(0.0).sqrt());
    s + t - 1.0 <= rhs + MEMBERSHIP_TOL
}

/// `(1−t)(1+(d²−1)t)`, the radicand of the meter–channel bounds.
fn qi_radicand(d: usize, t: f64) -> f64 {
    let d2 = (d * d) as f64;
    ((1.0 - t) * (1.0 + (d2 - 1.0) * t)).max(0.0)
}

fn qi_t_d(d: usize, t: f64) -> f64 {
    if d >= 3 {
        let td = (d as f64 - 2.0) / (2.0 * (d as f64 - 1.0));
        if t <= td {
            return td;
        }
    }
    t
}

fn qi_upper(d: usize, t: f64) -> f64 {
    let d2 = (d * d) as f64;
    ((d2 - 2.0) * (1.0 - t) + 2.0 * qi_radicand(d, t).sqrt()) / d2
}

fn qi_lower(d: usize, t: f64) -> f64 {
    let d2 = (d * d) as f64;
    let td = qi_t_d(d, t);
    -2.0 * (1.0 - td + qi_radicand(d, td).sqrt()) / d2
}

fn extended_holds(kind: PairKind, d: usize, s: f64, t: f64) -> bool {
    match kind {
        PairKind::QP if d == 2 => s * s + t * t <= 1.0 + MEMBERSHIP_TOL,
        PairKind::QP => min_form_holds(d as f64, s, t),
        PairKind::II => min_form_holds((d * d) as f64, s, t),
        PairKind::QI => {
            qi_lower(d, t) - MEMBERSHIP_TOL <= s && s <= qi_upper(d, t) + MEMBERSHIP_TOL
        }
    }
}

/// Closed-form membership test.
pub fn in_region(q: &RegionQuery) -> Result<bool> {
    q.check_admissible()?;
    Ok(if q.extended {
        extended_holds(q.kind, q.dim, q.s, q.t)
    } else {
        standard_holds(q.kind, q.dim, q.s, q.t)
    })
}

fn check_t(kind: PairKind, d: usize, t: f64) -> Result<()> {
    let (_, t_lo) = kind.lower_bounds(d)?;
    Error::check_range("t", t, t_lo, 1.0)
}

/// Largest `x` in `[lo, hi]` with `inside(x)`, given `inside(lo)` and `!inside(hi)`.
pub(crate) fn bisect_last_true(
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    inside: impl Fn(f64) -> bool,
) -> f64 {
    while (hi - lo).abs() > tol {
        let mid = 0.5 * (lo + hi);
        if inside(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Admissible `s`-interval of the extended region at fixed `t`.
///
/// The interval always contains `s = 0`. For `D ≥ 3` the boundary is
/// `max(s,t) = F(min(s,t))` with `F(m) = (1−2/D)(1−m) + (2/D)√((1−m)(1+(D−1)m))`,
/// so both ends are either `F(t)` or roots of `F(s) = t`.
pub fn s_interval(kind: PairKind, d: usize, t: f64) -> Result<(f64, f64)> {
    check_t(kind, d, t)?;
    let (s_lo, _) = kind.lower_bounds(d)?;
    if kind == PairKind::QI {
        return Ok((qi_lower(d, t).max(s_lo), qi_upper(d, t).min(1.0)));
    }
    if kind == PairKind::QP && d == 2 {
        let r = (1.0 - t * t).max(0.0).sqrt();
        return Ok((-r, r));
    }
    let dk = effective_dim(kind, d);
    let f = |m: f64| min_form_curve(dk, m);
    let (r1, r2) = min_form_roots(dk, t);
    let hi = if f(t) >= t { f(t).min(1.0) } else { r2 };
    let lo = if f(s_lo) >= t { s_lo } else { r1.max(s_lo) };
    // Adding zero turns a negative zero from the root formula into +0.
    Ok((lo.min(hi) + 0.0, hi + 0.0))
}

/// `F(m) = (1−2/D)(1−m) + (2/D)√((1−m)(1+(D−1)m))`.
fn min_form_curve(dk: f64, m: f64) -> f64 {
    let k = 2.0 / dk;
    (1.0 - k) * (1.0 - m) + k * ((1.0 - m) * (1.0 + (dk - 1.0) * m)).max(0.0).sqrt()
}

/// Roots of `F(s) = t` from the squared equation, ascending.
fn min_form_roots(dk: f64, t: f64) -> (f64, f64) {
    let k = 2.0 / dk;
    let c = 1.0 - k;
    let a = c * c + k * k * (dk - 1.0);
    let b = 2.0 * c * (t - c) - k * k * (dk - 2.0);
    let cc = (t - c) * (t - c) - k * k;
    let disc = (b * b - 4.0 * a * cc).max(0.0).sqrt();
    // Stable pairing of the two roots.
    let q = -0.5 * (b + b.signum() * disc);
    let (x1, x2) = if q == 0.0 {
        (0.0, 0.0)
    } else {
        (q / a, cc / q)
    };
    (x1.min(x2), x1.max(x2))
}

/// Largest compatible `s` at fixed `t` (extended setting; equals the standard
/// value for `t ∈ [0,1]`).
pub fn boundary_s_max(kind: PairKind, d: usize, t: f64) -> Result<f64> {
    Ok(s_interval(kind, d, t)?.1)
}

/// Smallest compatible `s` at fixed `t`; only the meter–channel pair has a
/// single-valued closed form.
pub fn boundary_s_min(kind: PairKind, d: usize, t: f64) -> Result<f64> {
    if kind != PairKind::QI {
        return Err(Error::Unsupported("boundary_s_min for this pair", d));
    }
    Ok(s_interval(kind, d, t)?.0)
}

/// `n` points on the region boundary, with `t` ascending.
///
/// Standard regions trace the arc from `(1, 0)` to `(0, 1)` at evenly spaced
/// values of `s − t`, which puts the symmetric point in the middle for odd `n`.
/// Extended regions list `⌈n/2⌉` points of the upper branch `s_max(t)` followed
/// by the lower branch `s_min(t)`, both on an even `t` grid over the admissible span.
pub fn sample_boundary(
    kind: PairKind,
    d: usize,
    extended: bool,
    n: usize,
) -> Result<Vec<(f64, f64)>> {
    if n < 2 {
        return Err(Error::Dimension(format!(
            "need at least 2 boundary points, got {n}"
        )));
    }
    NoiseBounds::new(d)?;
    if !extended {
        return Ok((0..n)
            .map(|i| {
                let c = 1.0 - 2.0 * i as f64 / (n - 1) as f64;
                standard_arc_point(kind, d, c)
            })
            .collect());
    }
    let (_, t_lo) = kind.lower_bounds(d)?;
    let n_up = n.div_ceil(2);
    let n_lo = n - n_up;
    let grid = |m: usize| -> Vec<f64> {
        if m == 1 {
            return vec![t_lo];
        }
        (0..m)
            .map(|i| {
                if i == m - 1 {
                    1.0
                } else {
                    t_lo + (1.0 - t_lo) * i as f64 / (m - 1) as f64
                }
            })
            .collect()
    };
    let mut out = Vec::with_capacity(n);
    for t in grid(n_up) {
        out.push((s_interval(kind, d, t)?.1, t));
    }
    for t in grid(n_lo) {
        out.push((s_interval(kind, d, t)?.0, t));
    }
    Ok(out)
}

/// Point of the standard arc with `s − t = c`, `c ∈ [−1, 1]`.
fn standard_arc_point(kind: PairKind, d: usize, c: f64) -> (f64, f64) {
    if c >= 1.0 {
        return (1.0, 0.0);
    }
    if c <= -1.0 {
        return (0.0, 1.0);
    }
    // The arc lies between the line s + t = 1 and the edge of the square.
    let t_lo = (1.0 - c) / 2.0;
    let t_hi = if c >= 0.0 { 1.0 - c } else { 1.0 };
    let t = bisect_last_true(t_lo, t_hi, BISECTION_TOL, |t| {
        standard_holds(kind, d, t + c, t)
    });
    (t + c, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn interval_ends_match_membership() {
        for (kind, d) in [
            (PairKind::QP, 3),
            (PairKind::QP, 4),
            (PairKind::II, 2),
            (PairKind::II, 3),
        ] {
            let (_, t_lo) = kind.lower_bounds(d).unwrap();
            for i in 0..=40 {
                let t = t_lo + (1.0 - t_lo) * i as f64 / 40.0;
                let (lo, hi) = s_interval(kind, d, t).unwrap();
                assert!(
                    ext(kind, d, lo, t) && ext(kind, d, hi, t),
                    "{kind} d={d} t={t}"
                );
                if hi < 1.0 {
                    assert!(!ext(kind, d, hi + 1e-5, t), "{kind} d={d} t={t} hi={hi}");
                }
                let (s_lo, _) = kind.lower_bounds(d).unwrap();
                if lo > s_lo {
                    assert!(!ext(kind, d, lo - 1e-5, t), "{kind} d={d} t={t} lo={lo}");
                }
            }
        }
        assert_eq!(s_interval(PairKind::II, 2, 1.0).unwrap().1, 0.0);
    }

    fn ext(kind: PairKind, d: usize, s: f64, t: f64) -> bool {
        in_region(&RegionQuery::new(kind, d, s, t, true)).unwrap()
    }

    fn std_(kind: PairKind, d: usize, s: f64, t: f64) -> bool {
        in_region(&RegionQuery::new(kind, d, s, t, false)).unwrap()
    }

    #[test]
    fn coeffs_at_endpoints() {
        for d in 2..=4 {
            for k in 1..=2 {
                let c = noise_coeffs(k, d, 1.0).unwrap();
                assert_eq!((c.a, c.b), (1.0, 0.0));
                let c = noise_coeffs(k, d, 0.0).unwrap();
                assert_eq!((c.a, c.b), (0.0, 1.0));
            }
        }
    }

    #[test]
    fn coeffs_d2_half() {
        let c = noise_coeffs(1, 2, 0.5).unwrap();
        assert_abs_diff_eq!(c.a, 0.366025, epsilon = 1e-6);
        assert_abs_diff_eq!(c.b, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-6);
        assert!(c.identity_residual().abs() < 1e-12);
    }

    #[test]
    fn coeffs_reject_out_of_range() {
        assert!(noise_coeffs(1, 2, -1.01).is_err());
        assert!(noise_coeffs(2, 2, -0.34).is_err());
        assert!(noise_coeffs(3, 2, 0.0).is_err());
    }

    #[test]
    fn corner_points_are_inside() {
        for kind in PairKind::ALL {
            for d in 2..=4 {
                assert!(std_(kind, d, 1.0, 0.0));
                assert!(std_(kind, d, 0.0, 1.0));
                assert!(ext(kind, d, 1.0, 0.0));
            }
        }
    }

    #[test]
    fn reverse_meters() {
        assert!(!ext(PairKind::QP, 2, -1.0, -1.0));
        assert!(ext(PairKind::QP, 3, -0.5, -0.5));
    }

    #[test]
    fn qi_closed_forms() {
        assert_abs_diff_eq!(
            boundary_s_max(PairKind::QI, 2, 0.5).unwrap(),
            0.809017,
            epsilon = 1e-6
        );
        assert_abs_diff_eq!(
            boundary_s_min(PairKind::QI, 2, 0.5).unwrap(),
            -0.809017,
            epsilon = 1e-6
        );
        assert_abs_diff_eq!(
            boundary_s_max(PairKind::QI, 2, 1.0).unwrap(),
            0.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            boundary_s_min(PairKind::QI, 2, 1.0).unwrap(),
            0.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            boundary_s_min(PairKind::QI, 3, 0.0).unwrap(),
            -0.5,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            boundary_s_max(PairKind::QI, 3, -0.125).unwrap(),
            0.875,
            epsilon = 1e-12
        );
    }

    #[test]
    fn s_min_only_for_qi() {
        assert!(matches!(
            boundary_s_min(PairKind::QP, 2, 0.5),
            Err(Error::Unsupported(..))
        ));
    }

    #[test]
    fn ellipse_examples() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!(ellipse_residual(1, 2, h, h).abs() < 1e-12);
        for d in 2..=4 {
            let s = (d as f64 + 2.0) / (2.0 * (d as f64 + 1.0));
            assert!(ellipse_residual(2, d, s, s).abs() < 1e-12);
        }
        assert_eq!(ellipse_neg_residual(2, 0.0, 1.0), 0.0);
    }

    #[test]
    fn standard_arc_n3() {
        let pts = sample_boundary(PairKind::QP, 3, false, 3).unwrap();
        let sq = 3f64.sqrt();
        let sym = (sq + 2.0) / (2.0 * (sq + 1.0));
        assert_eq!(pts[0], (1.0, 0.0));
        assert_abs_diff_eq!(pts[1].0, sym, epsilon = 1e-10);
        assert_abs_diff_eq!(pts[1].1, sym, epsilon = 1e-10);
        assert_eq!(pts[2], (0.0, 1.0));
        let ii = sample_boundary(PairKind::II, 2, false, 3).unwrap();
        assert_abs_diff_eq!(ii[1].0, 2.0 / 3.0, epsilon = 1e-10);
    }

    #[test]
    fn extended_qi_starts_at_m2() {
        let pts = sample_boundary(PairKind::QI, 3, true, 10).unwrap();
        assert_eq!(pts[0].1, -0.125);
        assert_abs_diff_eq!(pts[0].0, 0.875, epsilon = 1e-12);
        // Channel pairs reach (d²−2)/(d²−1) at t = m2.
        let pts = sample_boundary(PairKind::II, 3, true, 10).unwrap();
        assert_abs_diff_eq!(pts[0].1, -0.125, epsilon = 1e-15);
        assert_abs_diff_eq!(pts[0].0, 0.875, epsilon = 1e-10);
        let pts = sample_boundary(PairKind::II, 2, true, 10).unwrap();
        assert_abs_diff_eq!(pts[0].1, -1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(pts[0].0, 2.0 / 3.0, epsilon = 1e-10);
    }

    #[test]
    fn extended_qi_d2_is_mirror_symmetric() {
        let pts = sample_boundary(PairKind::QI, 2, true, 40).unwrap();
        for i in 0..20 {
            assert_abs_diff_eq!(pts[i].0, -pts[i + 20].0, epsilon = 1e-12);
            assert_eq!(pts[i].1, pts[i + 20].1);
        }
    }

    #[test]
    fn samples_lie_on_boundary() {
        for kind in PairKind::ALL {
            for d in 2..=4 {
                for extended in [false, true] {
                    for (s, t) in sample_boundary(kind, d, extended, 25).unwrap() {
                        let q = RegionQuery::new(kind, d, s, t, extended);
                        assert!(in_region(&q).unwrap(), "{kind} d={d} ({s},{t})");
                    }
                }
            }
        }
    }
}
