//! Named devices and the self-check suites run by `qcompat verify`.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use crate::constructions::{
    cloner, instrument, joint_meter, verify_cloner, verify_instrument, verify_joint_meter,
    ClonerKind, DeviceReport, InstrumentKind, JointMeterKind,
};
use crate::covariance::{
    canonical_vector_measure, constraint_residual, covariance_residual, from_vector_measure,
    symmetrize, VectorMeasureKind,
};
use crate::devices::{
    canonical_pair, depolarizing, detect_depolarizing, instrument_induced_meter,
    instrument_total_channel, is_mutually_unbiased, measure_and_prepare, noisy_meter,
    sequential_compose, unitary_channel, weyl, Channel, Instrument, Meter, NoiseBounds,
};
use crate::error::{Error, Result};
use crate::feasibility::{
    certificate_residual, check, oracle_vs_theory, Direction, FeasibilityProblem, DEFAULT_BUDGET,
};
use crate::numkit::{
    hermitian_eigensystem, kron, partial_trace, project_psd, CMatrix, HermitianMatrix, Subsystem,
    C64, STRUCTURAL_TOL,
};
use crate::regions::{
    ellipse_residual, in_region, noise_coeffs, sample_boundary, PairKind, RegionQuery,
};

/// Device vocabulary shared by the CLI and the suites.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DeviceName {
    GOpt,
    GTilde,
    GMinus,
    GCorner,
    GammaOpt,
    GammaTilde,
    GammaCorner,
    JOpt,
    JTilde,
    JTildeMinus,
    JCorner,
    Luders,
    LudersReflect,
    LudersCornerPost,
}

impl DeviceName {
    pub const ALL: [DeviceName; 14] = [
        DeviceName::GOpt,
        DeviceName::GTilde,
        DeviceName::GMinus,
        DeviceName::GCorner,
        DeviceName::GammaOpt,
        DeviceName::GammaTilde,
        DeviceName::GammaCorner,
        DeviceName::JOpt,
        DeviceName::JTilde,
        DeviceName::JTildeMinus,
        DeviceName::JCorner,
        DeviceName::Luders,
        DeviceName::LudersReflect,
        DeviceName::LudersCornerPost,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DeviceName::GOpt => "g-opt",
            DeviceName::GTilde => "g-tilde",
            DeviceName::GMinus => "g-minus",
            DeviceName::GCorner => "g-corner",
            DeviceName::GammaOpt => "gamma-opt",
            DeviceName::GammaTilde => "gamma-tilde",
            DeviceName::GammaCorner => "gamma-corner",
            DeviceName::JOpt => "j-opt",
            DeviceName::JTilde => "j-tilde",
            DeviceName::JTildeMinus => "j-tilde-minus",
            DeviceName::JCorner => "j-corner",
            DeviceName::Luders => "luders",
            DeviceName::LudersReflect => "luders-reflect",
            DeviceName::LudersCornerPost => "luders-corner-post",
        }
    }

    /// Admissible parameter interval, or `None` for devices without a parameter.
    /// Fails when the device does not exist in dimension `d`.
    pub fn param_range(self, d: usize) -> Result<Option<(f64, f64)>> {
        let b = NoiseBounds::new(d)?;
        let range = match self {
            DeviceName::GOpt
            | DeviceName::GTilde
            | DeviceName::Luders
            | DeviceName::LudersReflect => Some(b.m1),
            DeviceName::GMinus => {
                if d != 2 {
                    return Err(Error::Unsupported("the reflected joint meter", d));
                }
                Some(-1.0)
            }
            DeviceName::GammaOpt
            | DeviceName::GammaTilde
            | DeviceName::JOpt
            | DeviceName::JTilde
            | DeviceName::JTildeMinus => Some(b.m2),
            DeviceName::GammaCorner => None,
            DeviceName::GCorner | DeviceName::JCorner | DeviceName::LudersCornerPost => {
                if d < 3 {
                    return Err(Error::Unsupported("corner devices", d));
                }
                None
            }
        };
        Ok(range.map(|lo| (lo, 1.0)))
    }
}

impl fmt::Display for DeviceName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DeviceName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DeviceName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::InvalidDevice(format!("unknown device `{s}`")))
    }
}

/// Parameter used when none is given.
pub const DEFAULT_PARAM: f64 = 0.5;

#[derive(Clone, Debug)]
pub enum Device {
    Meter(Meter),
    Cloner(Channel),
    Instrument(Instrument),
}

/// A constructed device together with what it is supposed to reproduce.
#[derive(Clone, Debug)]
pub struct NamedDevice {
    pub name: DeviceName,
    pub dim: usize,
    pub param: Option<f64>,
    pub device: Device,
    expected: Expected,
}

#[derive(Clone, Copy, Debug)]
enum Expected {
    Margins(f64, f64),
    Pair(f64, crate::constructions::ChannelTarget),
}

/// Builds a named device. Parametric devices default to [`DEFAULT_PARAM`];
/// passing a parameter to a fixed device is an error.
pub fn build(name: DeviceName, d: usize, param: Option<f64>) -> Result<NamedDevice> {
    let param = match (name.param_range(d)?, param) {
        (Some(_), p) => Some(p.unwrap_or(DEFAULT_PARAM)),
        (None, None) => None,
        (None, Some(_)) => return Err(Error::InvalidDevice(format!("{name} takes no parameter"))),
    };
    let v = param.unwrap_or(0.0);
    let (q, p) = canonical_pair(d);
    let meter = |kind: JointMeterKind| -> Result<(Device, Expected)> {
        let (s, t) = kind.expected_margins(d)?;
        Ok((
            Device::Meter(joint_meter(kind, &q, &p)?),
            Expected::Margins(s, t),
        ))
    };
    let clone = |kind: ClonerKind| -> Result<(Device, Expected)> {
        let (s, t) = kind.expected_margins(d)?;
        Ok((Device::Cloner(cloner(kind, d)?), Expected::Margins(s, t)))
    };
    let instr = |kind: InstrumentKind| -> Result<(Device, Expected)> {
        let (s, c) = kind.expected_pair(d)?;
        Ok((
            Device::Instrument(instrument(kind, &q)?),
            Expected::Pair(s, c),
        ))
    };
    let (device, expected) = match name {
        DeviceName::GOpt => meter(JointMeterKind::Optimal { s: v })?,
        DeviceName::GTilde => meter(JointMeterKind::Tilde { t: v })?,
        DeviceName::GMinus => meter(JointMeterKind::Minus { s: v })?,
        DeviceName::GCorner => meter(JointMeterKind::Corner)?,
        DeviceName::GammaOpt => clone(ClonerKind::Optimal { s: v })?,
        DeviceName::GammaTilde => clone(ClonerKind::Tilde { t: v })?,
        DeviceName::GammaCorner => clone(ClonerKind::Corner)?,
        DeviceName::JOpt => instr(InstrumentKind::Optimal { s: v })?,
        DeviceName::JTilde => instr(InstrumentKind::Tilde { t: v })?,
        DeviceName::JTildeMinus => instr(InstrumentKind::TildeMinus { t: v })?,
        DeviceName::JCorner => instr(InstrumentKind::Corner)?,
        DeviceName::Luders => instr(InstrumentKind::Luders { s: v })?,
        DeviceName::LudersReflect => instr(InstrumentKind::LudersReflect { s: v })?,
        DeviceName::LudersCornerPost => instr(InstrumentKind::LudersCornerPost)?,
    };
    Ok(NamedDevice {
        name,
        dim: d,
        param,
        device,
        expected,
    })
}

/// Runs the matching verifier on a named device.
pub fn check_device(named: &NamedDevice) -> Result<DeviceReport> {
    let (q, p) = canonical_pair(named.dim);
    match (&named.device, named.expected) {
        (Device::Meter(g), Expected::Margins(s, t)) => verify_joint_meter(g, &q, &p, (s, t)),
        (Device::Cloner(c), Expected::Margins(s, t)) => verify_cloner(c, (s, t)),
        (Device::Instrument(j), Expected::Pair(s, c)) => verify_instrument(j, &q, s, c),
        _ => unreachable!("device and expectation are built together"),
    }
}

/// Size of the perturbation added by [`inject_fault`].
pub const FAULT_SIZE: f64 = 1e-3;

/// Adds `1e-3` to the top-left entry of the first effect, Choi operator or branch.
pub fn inject_fault(named: &mut NamedDevice) -> Result<()> {
    let bump = |m: &HermitianMatrix| {
        let mut c = m.as_matrix().clone();
        c[(0, 0)] += C64::new(FAULT_SIZE, 0.0);
        HermitianMatrix::from_hermitian_part(&c)
    };
    named.device = match &named.device {
        Device::Meter(g) => {
            let mut effects = g.effects().to_vec();
            effects[0] = bump(&effects[0]);
            Device::Meter(Meter::new_unchecked(g.shape(), effects)?)
        }
        Device::Cloner(c) => Device::Cloner(Channel::from_choi_unchecked(
            c.in_dim(),
            c.out_dim(),
            bump(c.choi()),
        )?),
        Device::Instrument(j) => {
            let mut branches: Vec<HermitianMatrix> =
                (0..j.len()).map(|x| j.branch(x).clone()).collect();
            branches[0] = bump(&branches[0]);
            Device::Instrument(Instrument::new_unchecked(
                j.dim_in(),
                j.dim_out(),
                branches,
            )?)
        }
    };
    Ok(())
}

/// `n` evenly spaced points of `[lo, hi]`, endpoints included.
pub fn param_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![lo];
    }
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Numkit,
    Devices,
    Regions,
    Constructions,
    Covariance,
    Feasibility,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::Numkit,
        Suite::Devices,
        Suite::Regions,
        Suite::Constructions,
        Suite::Covariance,
        Suite::Feasibility,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Numkit => "numkit",
            Suite::Devices => "devices",
            Suite::Regions => "regions",
            Suite::Constructions => "constructions",
            Suite::Covariance => "covariance",
            Suite::Feasibility => "feasibility",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteReport {
    pub suite: Suite,
    pub passed: usize,
    pub skipped: usize,
    pub failures: Vec<String>,
    pub elapsed: Duration,
}

impl SuiteReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn total(&self) -> usize {
        self.passed + self.failures.len()
    }
}

#[derive(Clone, Debug, Default)]
pub struct VerifyOptions {
    pub dims: Vec<usize>,
    pub fault: Option<DeviceName>,
    /// Include the slow oracle checks (II at d = 3).
    pub long: bool,
}

struct Tally {
    passed: usize,
    skipped: usize,
    failures: Vec<String>,
}

impl Tally {
    fn new() -> Self {
        Self {
            passed: 0,
            skipped: 0,
            failures: Vec::new(),
        }
    }

    fn expect(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if ok {
            self.passed += 1;
        } else {
            self.failures.push(what());
        }
    }

    fn within(&mut self, value: f64, tol: f64, what: impl FnOnce() -> String) {
        self.expect(value <= tol, || {
            format!("{}: {value:.3e} > {tol:.0e}", what())
        });
    }

    fn result<T>(&mut self, r: Result<T>, what: impl FnOnce() -> String) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.failures.push(format!("{}: {e}", what()));
                None
            }
        }
    }
}

/// Runs every suite for each requested dimension.
pub fn run(options: &VerifyOptions) -> Result<Vec<SuiteReport>> {
    for &d in &options.dims {
        NoiseBounds::new(d)?;
    }
    Ok(Suite::ALL
        .into_iter()
        .map(|suite| {
            let start = Instant::now();
            let mut tally = Tally::new();
            for &d in &options.dims {
                match suite {
                    Suite::Numkit => numkit_suite(&mut tally, d),
                    Suite::Devices => devices_suite(&mut tally, d),
                    Suite::Regions => regions_suite(&mut tally, d),
                    Suite::Constructions => constructions_suite(&mut tally, d, options.fault),
                    Suite::Covariance => covariance_suite(&mut tally, d),
                    Suite::Feasibility => feasibility_suite(&mut tally, d, options.long),
                }
            }
            SuiteReport {
                suite,
                passed: tally.passed,
                skipped: tally.skipped,
                failures: tally.failures,
                elapsed: start.elapsed(),
            }
        })
        .collect())
}

/// Deterministic dense Hermitian test matrix.
fn test_hermitian(n: usize, seed: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |i, j| {
        let a = ((i * 7 + j * 13 + seed * 3) % 11) as f64 / 11.0 - 0.5;
        let b = ((i * 5 + j * 3 + seed) % 7) as f64 / 7.0 - 0.5;
        C64::new(a, b)
    })
    .hermitian_part()
}

fn numkit_suite(tally: &mut Tally, d: usize) {
    for (seed, n) in [d, d * d].into_iter().enumerate() {
        let m = test_hermitian(n, seed);
        let Some(es) = tally.result(hermitian_eigensystem(&m), || format!("eigensystem n={n}"))
        else {
            continue;
        };
        tally.within(es.reconstruct().max_abs_diff(&m), 1e-10, || {
            format!("d={d}: eigen reconstruction n={n}")
        });
        let u = &es.vectors;
        tally.within(
            u.adjoint().matmul(u).max_abs_diff(&CMatrix::identity(n)),
            1e-10,
            || format!("d={d}: eigenvectors unitary n={n}"),
        );
        tally.expect(es.values.windows(2).all(|w| w[0] <= w[1]), || {
            format!("d={d}: eigenvalues ascending n={n}")
        });
        if let Some(p) = tally.result(project_psd(&m), || format!("project_psd n={n}")) {
            let again = project_psd(&p)
                .map(|q| q.max_abs_diff(&p))
                .unwrap_or(f64::INFINITY);
            tally.within(again, 1e-10, || {
                format!("d={d}: PSD projection idempotent n={n}")
            });
        }
    }
    let a = test_hermitian(d, 1);
    let b = &test_hermitian(d, 2) + &CMatrix::identity(d).scale(3.0);
    let ab = kron(&a, &b);
    let first =
        partial_trace(&ab, (d, d), Subsystem::First).map(|r| r.max_abs_diff(&a.scale_c(b.trace())));
    let second = partial_trace(&ab, (d, d), Subsystem::Second)
        .map(|r| r.max_abs_diff(&b.scale_c(a.trace())));
    for (label, r) in [("first", first), ("second", second)] {
        if let Some(diff) = tally.result(r, || format!("partial trace {label}")) {
            tally.within(diff, 1e-12, || {
                format!("d={d}: partial trace of a product keeps {label} factor")
            });
        }
    }
    let c = test_hermitian(2, 3);
    let assoc = kron(&kron(&a, &b), &c).max_abs_diff(&kron(&a, &kron(&b, &c)));
    tally.within(assoc, 1e-14, || format!("d={d}: kron associativity"));
}

fn devices_suite(tally: &mut Tally, d: usize) {
    let b = NoiseBounds::new(d).expect("validated dimension");
    let (q, p) = canonical_pair(d);
    tally.expect(q.is_sharp() && p.is_sharp(), || {
        format!("d={d}: canonical meters are sharp")
    });
    tally.expect(
        is_mutually_unbiased(&q, &p, STRUCTURAL_TOL).unwrap_or(false),
        || format!("d={d}: canonical pair is mutually unbiased"),
    );
    // W(x,y) Q(z) W(x,y)* = Q(z + x)
    let mut cov: f64 = 0.0;
    for x in 0..d {
        for y in 0..d {
            let w = weyl(d, x, y);
            for z in 0..d {
                cov = cov.max(w.conjugate(q.effect(z)).max_abs_diff(q.effect((z + x) % d)));
            }
        }
    }
    tally.within(cov, 1e-12, || format!("d={d}: Weyl shifts permute Q"));
    for s in [b.m1, 0.0, 1.0] {
        let ok = noisy_meter(&q, s)
            .and_then(|m| m.validate(STRUCTURAL_TOL))
            .is_ok();
        tally.expect(ok, || format!("d={d}: Q_{s} is a meter"));
    }
    tally.expect(noisy_meter(&q, b.m1 - 1e-3).is_err(), || {
        format!("d={d}: Q_s rejected below m1")
    });
    let mut worst: f64 = 0.0;
    for r in param_grid(b.m2, 1.0, 50) {
        let found = depolarizing(d, r)
            .ok()
            .and_then(|c| detect_depolarizing(&c, STRUCTURAL_TOL));
        worst = worst.max(found.map_or(f64::INFINITY, |f| (f - r).abs()));
    }
    tally.within(worst, 1e-10, || {
        format!("d={d}: depolarizing parameter recovered on 50 samples")
    });
    let mut others = vec![measure_and_prepare(&q), measure_and_prepare(&p)];
    for (x, y) in [(1, 0), (0, 1), (1, 1)] {
        others.push(unitary_channel(&weyl(d, x, y)));
    }
    for (i, c) in others.into_iter().enumerate() {
        let rejected = c
            .map(|c| detect_depolarizing(&c, STRUCTURAL_TOL).is_none())
            .unwrap_or(false);
        tally.expect(rejected, || {
            format!("d={d}: non-depolarizing channel #{i} rejected")
        });
    }
}

fn regions_suite(tally: &mut Tally, d: usize) {
    for k in [1u32, 2] {
        let lo = if k == 1 {
            NoiseBounds::new(d).unwrap().m1
        } else {
            NoiseBounds::new(d).unwrap().m2
        };
        let mut worst: f64 = 0.0;
        for r in param_grid(lo, 1.0, 200) {
            worst =
                worst.max(noise_coeffs(k, d, r).map_or(f64::INFINITY, |c| c.identity_residual()));
        }
        tally.within(worst, 1e-12, || {
            format!("d={d}: coefficient identity for k={k}")
        });
        // (s, 1 − a_k(s)²) lies on the standard boundary.
        let mut worst: f64 = 0.0;
        for s in param_grid(0.0, 1.0, 100) {
            let a = noise_coeffs(k, d, s).map_or(f64::NAN, |c| c.a);
            worst = worst.max(ellipse_residual(k, d, s, 1.0 - a * a).abs());
        }
        tally.within(worst, 1e-12, || {
            format!("d={d}: optimal boundary points satisfy the ellipse for k={k}")
        });
    }
    let grid = param_grid(0.0, 1.0, 50);
    for kind in [PairKind::QP, PairKind::II, PairKind::QI] {
        let mut agree = true;
        for &s in &grid {
            for &t in &grid {
                let a = in_region(&RegionQuery::new(kind, d, s, t, false));
                let b = in_region(&RegionQuery::new(kind, d, s, t, true));
                agree &= matches!((a, b), (Ok(x), Ok(y)) if x == y);
            }
        }
        tally.expect(agree, || {
            format!("d={d}: extended {kind} agrees with standard on [0,1]²")
        });
    }
    for kind in [PairKind::QP, PairKind::II] {
        let (lo, _) = kind.lower_bounds(d).unwrap();
        let g = param_grid(lo, 1.0, 41);
        let mut symmetric = true;
        for &s in &g {
            for &t in &g {
                for ext in [false, true] {
                    if !ext && (s < 0.0 || t < 0.0) {
                        continue;
                    }
                    let a = in_region(&RegionQuery::new(kind, d, s, t, ext));
                    let b = in_region(&RegionQuery::new(kind, d, t, s, ext));
                    symmetric &= matches!((a, b), (Ok(x), Ok(y)) if x == y);
                }
            }
        }
        tally.expect(symmetric, || {
            format!("d={d}: {kind} region symmetric under swap")
        });
    }
    let (lo, _) = PairKind::II.lower_bounds(d).unwrap();
    let g = param_grid(lo, 1.0, 41);
    let mut shifted = true;
    for &s in &g {
        for &t in &g {
            let a = in_region(&RegionQuery::new(PairKind::II, d, s, t, true));
            let b = in_region(&RegionQuery::new(PairKind::QP, d * d, s, t, true));
            shifted &= matches!((a, b), (Ok(x), Ok(y)) if x == y);
        }
    }
    tally.expect(shifted, || {
        format!("d={d}: II region at d equals QP region at d²")
    });
    if d == 2 {
        let g = param_grid(-1.0, 1.0, 41);
        let t_lo = PairKind::QI.lower_bounds(2).unwrap().1;
        let mut mirror = true;
        for &s in &g {
            for t in param_grid(t_lo, 1.0, 41) {
                let a = in_region(&RegionQuery::new(PairKind::QI, 2, s, t, true));
                let b = in_region(&RegionQuery::new(PairKind::QI, 2, -s, t, true));
                mirror &= matches!((a, b), (Ok(x), Ok(y)) if x == y);
            }
        }
        tally.expect(mirror, || "d=2: extended QI symmetric under s -> -s".into());
        let disk = in_region(&RegionQuery::new(PairKind::QP, 2, -1.0, -1.0, true)) == Ok(false)
            && in_region(&RegionQuery::new(PairKind::QP, 2, -0.6, -0.8, true)) == Ok(true);
        tally.expect(disk, || "d=2: extended QP region is the unit disk".into());
    }
    if d == 3 {
        let corner = in_region(&RegionQuery::new(PairKind::QP, 3, -0.5, -0.5, true)) == Ok(true);
        tally.expect(corner, || "d=3: corner (-1/2,-1/2) is compatible".into());
    }
    for kind in [PairKind::QP, PairKind::II, PairKind::QI] {
        for ext in [false, true] {
            if let Some(points) = tally.result(sample_boundary(kind, d, ext, 33), || {
                format!("{kind} samples")
            }) {
                let on = points.iter().all(|&(s, t)| {
                    in_region(&RegionQuery::new(kind, d, s, t, ext)).unwrap_or(false)
                });
                tally.expect(on, || {
                    format!("d={d}: {kind} boundary samples lie in the region (extended={ext})")
                });
            }
        }
    }
}

fn report_failure(named: &NamedDevice, report: &DeviceReport, tol: f64) -> String {
    let mut parts: Vec<String> = report
        .margins
        .iter()
        .filter(|m| m.residual > tol)
        .map(|m| format!("{} (residual {:.3e})", m.label, m.residual))
        .collect();
    if report.normalization_residual > tol {
        parts.push(format!(
            "normalization (residual {:.3e})",
            report.normalization_residual
        ));
    }
    if report.psd_margin < -tol {
        parts.push(format!("positivity (eigenvalue {:.3e})", report.psd_margin));
    }
    let param = named
        .param
        .map(|p| format!(" param={p:.6}"))
        .unwrap_or_default();
    format!(
        "{} d={}{param}: {}",
        named.name,
        named.dim,
        parts.join("; ")
    )
}

/// Samples per parametric device kind.
pub const DEVICE_SAMPLES: usize = 20;

fn constructions_suite(tally: &mut Tally, d: usize, fault: Option<DeviceName>) {
    for name in DeviceName::ALL {
        let params: Vec<Option<f64>> = match name.param_range(d) {
            Err(_) => {
                tally.skipped += 1;
                continue;
            }
            Ok(None) => vec![None],
            Ok(Some((lo, hi))) => param_grid(lo, hi, DEVICE_SAMPLES)
                .into_iter()
                .map(Some)
                .collect(),
        };
        for param in params {
            let Some(mut named) =
                tally.result(build(name, d, param), || format!("{name} d={d} {param:?}"))
            else {
                continue;
            };
            if fault == Some(name) && inject_fault(&mut named).is_err() {
                tally
                    .failures
                    .push(format!("{name}: fault injection failed"));
                continue;
            }
            if let Some(report) = tally.result(check_device(&named), || format!("{name} d={d}")) {
                tally.expect(report.passed(STRUCTURAL_TOL), || {
                    report_failure(&named, &report, STRUCTURAL_TOL)
                });
            }
        }
    }
    sequential_checks(tally, d);
    if d == 3 {
        corner_cloner_spectrum(tally);
    }
}

/// Lüders instruments followed by `P` reproduce the joint meters.
fn sequential_checks(tally: &mut Tally, d: usize) {
    let b = NoiseBounds::new(d).unwrap();
    let (q, p) = canonical_pair(d);
    let composed =
        |kind: InstrumentKind| instrument(kind, &q).and_then(|j| sequential_compose(&j, &p));
    for s in param_grid(b.m1, 1.0, 11) {
        let diff = composed(InstrumentKind::Luders { s })
            .and_then(|g| Ok(g.max_abs_diff(&joint_meter(JointMeterKind::Optimal { s }, &q, &p)?)));
        if let Some(diff) = tally.result(diff, || format!("luders s={s}")) {
            tally.within(diff, 1e-10, || {
                format!("d={d}: Lüders then P equals G(s) at s={s:.4}")
            });
        }
    }
    for t in param_grid(b.m1, 0.0, 11).into_iter().filter(|&t| t < 0.0) {
        let a = noise_coeffs(1, d, t).map(|c| c.a).unwrap_or(f64::NAN);
        let s = 1.0 - a * a;
        let diff = composed(InstrumentKind::LudersReflect { s })
            .and_then(|g| Ok(g.max_abs_diff(&joint_meter(JointMeterKind::Tilde { t }, &q, &p)?)));
        if let Some(diff) = tally.result(diff, || format!("luders-reflect t={t}")) {
            tally.within(diff, 1e-10, || {
                format!("d={d}: reflected Lüders then P equals G~(t) at t={t:.4}")
            });
        }
    }
    if d == 2 {
        for s in param_grid(-1.0, 1.0, 11) {
            let diff = composed(InstrumentKind::LudersReflect { s }).and_then(|g| {
                Ok(g.max_abs_diff(&joint_meter(JointMeterKind::Minus { s }, &q, &p)?))
            });
            if let Some(diff) = tally.result(diff, || format!("luders-reflect s={s}")) {
                tally.within(diff, 1e-10, || {
                    format!("d=2: reflected Lüders then P equals G-(s) at s={s:.4}")
                });
            }
        }
    } else {
        let diff = composed(InstrumentKind::LudersCornerPost)
            .and_then(|g| Ok(g.max_abs_diff(&joint_meter(JointMeterKind::Corner, &q, &p)?)));
        if let Some(diff) = tally.result(diff, || "luders-corner-post".into()) {
            tally.within(diff, 1e-10, || {
                format!("d={d}: postprocessed corner Lüders then P equals the corner meter")
            });
        }
    }
}

/// Spectrum of the corner cloner at `d = 3`: six zeros and 21 copies of `1/21`.
fn corner_cloner_spectrum(tally: &mut Tally) {
    let Some(c) = tally.result(cloner(ClonerKind::Corner, 3), || "corner cloner d=3".into()) else {
        return;
    };
    let Some(es) = tally.result(hermitian_eigensystem(c.choi()), || {
        "corner cloner spectrum".into()
    }) else {
        return;
    };
    let zeros = es.values[..6].iter().map(|v| v.abs()).fold(0.0, f64::max);
    let rest = es.values[6..]
        .iter()
        .map(|v| (v - 1.0 / 21.0).abs())
        .fold(0.0, f64::max);
    tally.within(zeros.max(rest), 1e-10, || {
        "d=3: corner cloner Choi spectrum {0 x6, 1/21 x21}".into()
    });
    for keep in [Subsystem::First, Subsystem::Second] {
        let r = c
            .output_margin((3, 3), keep)
            .ok()
            .and_then(|m| detect_depolarizing(&m, STRUCTURAL_TOL));
        tally.within(
            r.map_or(f64::INFINITY, |r| (r + 0.125).abs()),
            1e-10,
            || format!("d=3: corner cloner {keep:?} clone detects as I_-1/8"),
        );
    }
}

/// Instrument with induced meter `Q_s` and total channel `I_0` that is not
/// Weyl covariant: `J(z, ρ) = tr(ρ Q_s(z))/d · 1 + ε tr(ρ (Q(z) − 1/d)) B` with traceless `B`.
pub fn skewed_trivial_instrument(d: usize, s: f64) -> Result<Instrument> {
    let (q, _) = canonical_pair(d);
    let qs = noisy_meter(&q, s)?;
    let df = d as f64;
    let eps = 0.05 * (1.0 - s).min(1.0 + (df - 1.0) * s).max(0.0) / df;
    let mut bmat = CMatrix::zeros(d, d);
    bmat[(0, 0)] = C64::new(1.0, 0.0);
    bmat[(1, 1)] = C64::new(-1.0, 0.0);
    let id = CMatrix::identity(d);
    Instrument::from_maps(d, d, d, |z, rho| {
        let noisy = qs.effect(z).hs_inner(rho);
        let skew = q.effect(z).hs_inner(rho) - rho.trace().scale(1.0 / df);
        &id.scale_c(noisy / df) + &bmat.scale_c(skew * eps)
    })
}

fn covariance_suite(tally: &mut Tally, d: usize) {
    let b = NoiseBounds::new(d).unwrap();
    let (q, _) = canonical_pair(d);
    for s in param_grid(b.m1 / 2.0, 0.9, 5) {
        let Some(j) = tally.result(skewed_trivial_instrument(d, s), || {
            format!("skewed instrument s={s}")
        }) else {
            continue;
        };
        tally.expect(covariance_residual(&j) > 1e-6, || {
            format!("d={d}: test instrument is not covariant")
        });
        let Some(sym) = tally.result(symmetrize(&j), || "symmetrize".into()) else {
            continue;
        };
        tally.within(covariance_residual(&sym), 1e-10, || {
            format!("d={d}: symmetrized instrument is covariant")
        });
        let meter = instrument_induced_meter(&sym).max_abs_diff(&instrument_induced_meter(&j));
        let channel = instrument_total_channel(&sym).max_abs_diff(&instrument_total_channel(&j));
        tally.within(meter.max(channel), 1e-12, || {
            format!("d={d}: symmetrization keeps margins at s={s:.4}")
        });
    }
    let mut kinds = Vec::new();
    for v in param_grid(b.m2, 1.0, 5) {
        kinds.push(VectorMeasureKind::Optimal { s: v });
        kinds.push(VectorMeasureKind::Tilde { t: v });
        kinds.push(VectorMeasureKind::TildeMinus { t: v });
    }
    if d >= 3 {
        kinds.push(VectorMeasureKind::Corner);
    }
    for kind in kinds {
        let Some(vm) = tally.result(canonical_vector_measure(kind, d), || {
            format!("{kind:?} d={d}")
        }) else {
            continue;
        };
        let derived = from_vector_measure(&vm);
        let named = instrument(kind.instrument_kind(), &q);
        if let (Some(derived), Some(named)) = (
            tally.result(derived, || format!("{kind:?}: instrument from measure")),
            tally.result(named, || format!("{kind:?}: named instrument")),
        ) {
            tally.within(derived.max_abs_diff(&named), 1e-10, || {
                format!("d={d}: vector measure {kind:?} reproduces its instrument")
            });
        }
        if matches!(
            kind,
            VectorMeasureKind::Tilde { .. } | VectorMeasureKind::TildeMinus { .. }
        ) {
            if let Some((s, target)) =
                tally.result(kind.instrument_kind().expected_pair(d), || "pair".into())
            {
                let t = match target {
                    crate::constructions::ChannelTarget::Depolarizing(t) => t,
                    crate::constructions::ChannelTarget::QBiased(t) => t,
                };
                tally.within(constraint_residual(&vm, s, t).max(), 1e-10, || {
                    format!("d={d}: constraints vanish for {kind:?}")
                });
            }
        }
    }
}

/// Oracle grid used by the suite.
pub const SUITE_T_GRID: [f64; 2] = [0.25, 0.5];

fn feasibility_suite(tally: &mut Tally, d: usize, long: bool) {
    let mut kinds = vec![PairKind::QI, PairKind::QP];
    if d == 2 || (d == 3 && long) {
        kinds.push(PairKind::II);
    } else {
        tally.skipped += 1;
    }
    if d > 4 {
        tally.skipped += kinds.len();
        return;
    }
    for kind in kinds {
        for direction in [Direction::Max, Direction::Min] {
            let rows = oracle_vs_theory(kind, d, &SUITE_T_GRID, direction, DEFAULT_BUDGET);
            let Some(rows) = tally.result(rows, || format!("{kind} d={d} oracle")) else {
                continue;
            };
            for row in rows {
                tally.within(row.gap, crate::feasibility::AGREEMENT_TOL, || {
                    format!(
                        "d={d}: {kind} oracle {direction:?} at t={} (closed {:.6})",
                        row.t, row.s_closed
                    )
                });
            }
        }
        let problem = FeasibilityProblem {
            kind,
            dim: d,
            s: 0.3,
            t: 0.3,
        };
        let soundness = check(&problem, DEFAULT_BUDGET).and_then(|r| match r.certificate() {
            Some(blocks) => certificate_residual(&problem, blocks),
            None => Ok(f64::INFINITY),
        });
        if let Some(res) = tally.result(soundness, || format!("{kind} d={d} certificate")) {
            tally.within(res, 1e-6, || {
                format!("d={d}: {kind} certificate rebuilds into a valid joint device")
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for n in DeviceName::ALL {
            assert_eq!(n.as_str().parse::<DeviceName>().unwrap(), n);
        }
        assert!("g-best".parse::<DeviceName>().is_err());
    }

    #[test]
    fn fixed_devices_refuse_parameters() {
        assert!(build(DeviceName::GammaCorner, 3, Some(0.1)).is_err());
        assert!(build(DeviceName::GMinus, 3, None).is_err());
        assert_eq!(
            build(DeviceName::GOpt, 2, None).unwrap().param,
            Some(DEFAULT_PARAM)
        );
    }

    #[test]
    fn injected_fault_names_the_margin() {
        let mut named = build(DeviceName::GCorner, 3, None).unwrap();
        inject_fault(&mut named).unwrap();
        let report = check_device(&named).unwrap();
        assert!(!report.passed(STRUCTURAL_TOL));
        let msg = report_failure(&named, &report, STRUCTURAL_TOL);
        assert!(msg.contains("first margin = Q_-0.5"), "{msg}");
    }

    #[test]
    fn skewed_instrument_is_valid() {
        let j = skewed_trivial_instrument(3, 0.2).unwrap();
        j.validate(STRUCTURAL_TOL).unwrap();
    }
}
