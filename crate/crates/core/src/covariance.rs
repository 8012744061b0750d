//! Weyl-covariant instruments and their vector measures.
//!
//! An instrument `J` on `C^d` with outcomes in `Z_d` is W-covariant when
//! `W J(z, ρ) W* = J(x + z, W ρ W*)` for every Weyl operator `W = W(x, y)`.
//! Such instruments are in one-to-one correspondence with vector measures
//! `S: Z_d → L(C^d)`; the meter–channel constraints reduce to linear equations
//! on `S`.

use crate::constructions::InstrumentKind;
use crate::devices::{canonical_pair, weyl, Instrument, NoiseBounds, VectorMeasure};
use crate::error::{Error, Result};
use crate::numkit::{CMatrix, HermitianMatrix, C64};
use crate::regions::{coeff_a, coeff_b};

/// The canonical vector measures of the four covariant joint instruments.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum VectorMeasureKind {
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
}

impl VectorMeasureKind {
    /// The instrument this vector measure corresponds to.
    pub fn instrument_kind(self) -> InstrumentKind {
        match self {
            VectorMeasureKind::Optimal { s } => InstrumentKind::Optimal { s },
            VectorMeasureKind::Tilde { t } => InstrumentKind::Tilde { t },
            VectorMeasureKind::TildeMinus { t } => InstrumentKind::TildeMinus { t },
            VectorMeasureKind::Corner => InstrumentKind::Corner,
        }
    }
}

/// A vector measure together with the covariant instrument it defines.
#[derive(Clone, Debug)]
pub struct CovariantInstrumentData {
    pub dim: usize,
    pub vm: VectorMeasure,
    pub derived: Instrument,
}

impl CovariantInstrumentData {
    pub fn new(vm: VectorMeasure) -> Result<Self> {
        let derived = from_vector_measure(&vm)?;
        Ok(Self {
            dim: vm.dim(),
            vm,
            derived,
        })
    }
}

/// Violations of the constraint system for `(Q_s, I_t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstraintResidual {
    /// `max_z |q(z) − (s δ_{z,0} + (1−s)/d)|`
    pub meter_residual: f64,
    /// `max_{x,z} |p(x,z) − (t δ_{x,0} δ_{z,0} + (1−t)/d²)|`
    pub channel_residual: f64,
}

impl ConstraintResidual {
    pub fn max(&self) -> f64 {
        self.meter_residual.max(self.channel_residual)
    }
}

/// Instrument `J(z, ρ) = Σ_{x,u,v} W(x,0)* Q(u) ρ Q(v) W(x,0) · tr{W(v,0)* Q(z) W(u,0) S(x)}`
/// for `Q` the standard basis.
pub fn from_vector_measure(vm: &VectorMeasure) -> Result<Instrument> {
    let d = vm.dim();
    let m = |a: usize| a % d;
    Instrument::from_maps(d, d, d, |z, rho| {
        let mut out = CMatrix::zeros(d, d);
        for x in 0..d {
            let s = vm.value(x);
            for u in 0..d {
                for v in 0..d {
                    let r = rho[(u, v)];
                    if r.norm() == 0.0 {
                        continue;
                    }
                    // tr{W(v,0)* Q(z) W(u,0) S(x)} = S(x)[z−u, z−v]
                    let coef = s[(m(z + d - u), m(z + d - v))];
                    out[(m(u + d - x), m(v + d - x))] += r * coef;
                }
            }
        }
        out
    })
}

/// `q(z) = tr(Q(z) Σ_x S(x))` and `p(x, z) = tr(P(z) S(x))`, with `p` indexed `[x][z]`.
pub fn induced_distributions(vm: &VectorMeasure) -> (Vec<f64>, Vec<Vec<f64>>) {
    let d = vm.dim();
    let (q, p) = canonical_pair(d);
    let mut total = CMatrix::zeros(d, d);
    for s in vm.values() {
        total += s.as_matrix();
    }
    let qd = (0..d).map(|z| q.effect(z).hs_inner(&total).re).collect();
    let pd = (0..d)
        .map(|x| {
            (0..d)
                .map(|z| p.effect(z).hs_inner(vm.value(x)).re)
                .collect()
        })
        .collect();
    (qd, pd)
}

/// Residuals of the linear system that makes the covariant instrument of `vm`
/// a joint instrument for `(Q_s, I_t)`.
pub fn constraint_residual(vm: &VectorMeasure, s: f64, t: f64) -> ConstraintResidual {
    let d = vm.dim();
    let df = d as f64;
    let (q, p) = induced_distributions(vm);
    let meter_residual = (0..d)
        .map(|z| (q[z] - (if z == 0 { s } else { 0.0 } + (1.0 - s) / df)).abs())
        .fold(0.0, f64::max);
    let mut channel_residual: f64 = 0.0;
    for (x, row) in p.iter().enumerate() {
        for (z, &pxz) in row.iter().enumerate() {
            let delta = if x == 0 && z == 0 { t } else { 0.0 };
            channel_residual = channel_residual.max((pxz - delta - (1.0 - t) / (df * df)).abs());
        }
    }
    ConstraintResidual {
        meter_residual,
        channel_residual,
    }
}

/// Vector measure of one of the covariant joint instruments.
pub fn canonical_vector_measure(kind: VectorMeasureKind, d: usize) -> Result<VectorMeasure> {
    let bounds = NoiseBounds::new(d)?;
    let df = d as f64;
    let (q, p) = canonical_pair(d);
    let id = CMatrix::identity(d);
    let q0 = q.effect(0).as_matrix();
    let p0 = p.effect(0).as_matrix();
    // (α + γ δ_{x,0} P(0)) Q(σx) (α + γ δ_{x,0} P(0)) / d
    let sandwich = |alpha: f64, gamma: f64, reflect: bool| -> Vec<CMatrix> {
        (0..d)
            .map(|x| {
                let k = if x == 0 {
                    &id.scale(alpha) + &p0.scale(gamma)
                } else {
                    id.scale(alpha)
                };
                let qx = if reflect { (d - x) % d } else { 0 };
                k.conjugate(q.effect(qx)).scale(1.0 / df)
            })
            .collect()
    };
    let values = match kind {
        VectorMeasureKind::Optimal { s } => {
            Error::check_range("s", s, bounds.m2, 1.0)?;
            sandwich(coeff_a(2, d, s), df * coeff_b(s), false)
        }
        VectorMeasureKind::Tilde { t } => {
            Error::check_range("t", t, bounds.m2, 1.0)?;
            sandwich(coeff_b(t), df * coeff_a(2, d, t), false)
        }
        VectorMeasureKind::TildeMinus { t } => {
            Error::check_range("t", t, bounds.m2, 1.0)?;
            let (a, b) = (coeff_a(2, d, t), coeff_b(t));
            sandwich(b, -(df * a + 2.0 * b), true)
        }
        VectorMeasureKind::Corner => {
            if d < 3 {
                return Err(Error::Unsupported("the corner vector measure", d));
            }
            let diff = q0 - p0;
            let at_zero =
                (&id - &diff.matmul(&diff).scale(df / (df - 1.0))).scale(1.0 / (df - 2.0));
            let elsewhere = (&id - q0).scale(df / ((df - 1.0) * (df - 1.0)));
            (0..d)
                .map(|x| if x == 0 { &at_zero } else { &elsewhere }.scale(1.0 / (df + 1.0)))
                .collect()
        }
    };
    VectorMeasure::new(
        values
            .iter()
            .map(HermitianMatrix::from_hermitian_part)
            .collect(),
    )
}

/// Weyl average `J(z, ρ) = (1/d²) Σ_{x,y} W(x,y) J′(z−x, W(x,y)* ρ W(x,y)) W(x,y)*`.
pub fn symmetrize(j: &Instrument) -> Result<Instrument> {
    let d = j.dim_in();
    if j.dim_out() != d || j.len() != d {
        return Err(Error::Dimension(format!(
            "symmetrization needs an instrument on C^{d} with {d} outcomes"
        )));
    }
    let weyls: Vec<(usize, CMatrix)> = (0..d)
        .flat_map(|x| (0..d).map(move |y| (x, y)))
        .map(|(x, y)| (x, weyl(d, x, y)))
        .collect();
    let norm = 1.0 / (d * d) as f64;
    Instrument::from_maps(d, d, d, |z, rho| {
        let mut out = CMatrix::zeros(d, d);
        for (x, w) in &weyls {
            let w_adj = w.adjoint();
            let inner = j.apply((z + d - x) % d, &w_adj.conjugate(rho));
            out += &w.conjugate(&inner);
        }
        out.scale(norm)
    })
}

/// `max ‖W J(z, ρ) W* − J(x+z, W ρ W*)‖_max` over Weyl operators `W = W(x,y)`,
/// outcomes `z` and inputs `ρ` running through the Weyl operator basis.
pub fn covariance_residual(j: &Instrument) -> f64 {
    let d = j.dim_in();
    let mut worst: f64 = 0.0;
    let basis: Vec<CMatrix> = (0..d)
        .flat_map(|a| (0..d).map(move |b| weyl(d, a, b)))
        .collect();
    for x in 0..d {
        for y in 0..d {
            let w = weyl(d, x, y);
            for rho in &basis {
                let moved = w.conjugate(rho);
                for z in 0..d {
                    let lhs = w.conjugate(&j.apply(z, rho));
                    let rhs = j.apply((x + z) % d, &moved);
                    worst = worst.max(lhs.max_abs_diff(&rhs));
                }
            }
        }
    }
    worst
}

/// Checks `Σ_u ω^{uv} = d δ_{v,0}` in exact integer arithmetic: for `v ≠ 0`
/// the exponents `uv mod d` cover the nontrivial subgroup `gZ_d`,
/// `g = gcd(v, d)`, each exactly `g` times, and roots over such a subgroup sum to zero.
pub fn orthogonality_holds(d: usize) -> bool {
    (0..d).all(|v| {
        let mut counts = vec![0usize; d];
        for u in 0..d {
            counts[(u * v) % d] += 1;
        }
        if v == 0 {
            return counts[0] == d;
        }
        let g = gcd(v, d);
        d / g > 1 && (0..d).all(|k| counts[k] == if k % g == 0 { g } else { 0 })
    })
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// `Σ_u ω^{uv}` evaluated in floating point, for comparison with the exact check.
pub fn phase_sum(d: usize, v: usize) -> C64 {
    (0..d)
        .map(|u| crate::devices::omega_pow(d, (u * v) as i64))
        .sum()
}
