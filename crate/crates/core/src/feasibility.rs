//! Numerical compatibility oracle.
//!
//! Each pair is posed as a feasibility problem over PSD blocks with linear
//! equality constraints and solved by Dykstra-corrected alternating
//! projections: an affine projection through a precomputed least-squares map,
//! then eigenvalue clipping per block. Only feasibility is certified; a stalled
//! residual is reported as evidence of infeasibility.
//!
//! Layouts:
//! - `QI`: the covariant reduction, `d` blocks `S(x)` of size `d`.
//! - `QP`: `d²` effects `G(x,y)` with both margins fixed.
//! - `II`: one normalized Choi operator of size `d³` with both clones fixed.

use std::f64::consts::FRAC_1_SQRT_2;

use rayon::prelude::*;

use crate::constructions::{verify_cloner, verify_joint_meter};
use crate::covariance::constraint_residual;
use crate::devices::{
    canonical_pair, depolarizing, noisy_meter, Channel, Meter, NoiseBounds, OutcomeShape,
    VectorMeasure,
};
use crate::error::{Error, Result};
use crate::numkit::{hermitian_eigensystem, kron, CMatrix, HermitianMatrix, C64, SOLVER_TOL};
use crate::regions::{s_interval, PairKind};

pub const DEFAULT_BUDGET: usize = 50_000;
pub const MIN_BUDGET: usize = 100;
/// Residual plateau check: window length and minimal improvement.
const PLATEAU_WINDOW: usize = 1_000;
const PLATEAU_DECREASE: f64 = 1e-12;
const INFEASIBLE_FLOOR: f64 = 1e-5;
/// Bisection stops once the bracket is narrower than this.
pub const BISECTION_WIDTH: f64 = 1e-3;
const BISECTION_CAP: usize = 40;
/// Largest accepted gap between oracle and closed form.
pub const AGREEMENT_TOL: f64 = 2e-3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeasibilityProblem {
    pub kind: PairKind,
    pub dim: usize,
    pub s: f64,
    pub t: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum FeasibilityStatus {
    /// PSD blocks satisfying every equality to 1e-7.
    Feasible(Vec<HermitianMatrix>),
    /// The residual stalled above 1e-5; carries the best residual seen.
    InfeasibleEvidence(f64),
    Undetermined,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeasibilityResult {
    pub status: FeasibilityStatus,
    pub iterations: usize,
    /// Max-norm violation of the equalities by the last PSD iterate.
    pub residual: f64,
}

impl FeasibilityResult {
    pub fn is_feasible(&self) -> bool {
        matches!(self.status, FeasibilityStatus::Feasible(_))
    }

    pub fn certificate(&self) -> Option<&[HermitianMatrix]> {
        match &self.status {
            FeasibilityStatus::Feasible(blocks) => Some(blocks),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Max,
    Min,
}

/// Linear functional `Σ_blocks Re tr(F_block X_block)` in real coordinates.
struct Layout {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    len: usize,
}

impl Layout {
    fn new(sizes: Vec<usize>) -> Self {
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut len = 0;
        for &n in &sizes {
            offsets.push(len);
            len += n * n;
        }
        Self {
            sizes,
            offsets,
            len,
        }
    }
}

/// Coordinates of a Hermitian matrix in the orthonormal basis
/// `E_aa, (E_ab + E_ba)/√2, i(E_ba − E_ab)/√2`.
fn to_coords(m: &CMatrix, out: &mut [f64]) {
    let n = m.rows();
    let mut k = 0;
    for a in 0..n {
        out[k] = m[(a, a)].re;
        k += 1;
    }
    let r2 = std::f64::consts::SQRT_2;
    for a in 0..n {
        for b in a + 1..n {
            out[k] = r2 * m[(a, b)].re;
            out[k + 1] = -r2 * m[(a, b)].im;
            k += 2;
        }
    }
}

fn from_coords(x: &[f64], n: usize) -> CMatrix {
    let mut m = CMatrix::zeros(n, n);
    let mut k = 0;
    for a in 0..n {
        m[(a, a)] = C64::new(x[k], 0.0);
        k += 1;
    }
    for a in 0..n {
        for b in a + 1..n {
            let z = C64::new(x[k], -x[k + 1]) * FRAC_1_SQRT_2;
            m[(a, b)] = z;
            m[(b, a)] = z.conj();
            k += 2;
        }
    }
    m
}

/// Affine set `{x : A x = b}` with the projection `x ↦ x − P x + q`.
struct AffineProjector {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    p: Vec<f64>,
    q: Vec<f64>,
    n: usize,
}

impl AffineProjector {
    fn new(a: Vec<Vec<f64>>, b: Vec<f64>, n: usize) -> Result<Self> {
        let m = a.len();
        let gram = CMatrix::from_fn(m, m, |i, j| {
            C64::new(a[i].iter().zip(&a[j]).map(|(u, v)| u * v).sum(), 0.0)
        });
        let es = hermitian_eigensystem(&gram)?;
        let cutoff = 1e-10 * es.values.last().copied().unwrap_or(1.0).abs().max(1.0);
        let ginv = es.reconstruct_with(|l| if l > cutoff { 1.0 / l } else { 0.0 });
        // H = G⁺ A (m × n)
        let mut h = vec![vec![0.0; n]; m];
        for i in 0..m {
            for k in 0..m {
                let g = ginv[(i, k)].re;
                if g != 0.0 {
                    for (hj, ak) in h[i].iter_mut().zip(&a[k]) {
                        *hj += g * ak;
                    }
                }
            }
        }
        // P = Aᵀ G⁺ A, q = Aᵀ G⁺ b
        let mut p = vec![0.0; n * n];
        let mut q = vec![0.0; n];
        for i in 0..m {
            for r in 0..n {
                let ai = a[i][r];
                if ai == 0.0 {
                    continue;
                }
                let row = &mut p[r * n..(r + 1) * n];
                for (pc, hc) in row.iter_mut().zip(&h[i]) {
                    *pc += ai * hc;
                }
            }
        }
        for i in 0..m {
            let w: f64 = (0..m).map(|k| ginv[(i, k)].re * b[k]).sum();
            for r in 0..n {
                q[r] += a[i][r] * w;
            }
        }
        Ok(Self { a, b, p, q, n })
    }

    fn project(&self, x: &[f64], out: &mut [f64]) {
        for r in 0..self.n {
            let row = &self.p[r * self.n..(r + 1) * self.n];
            let px: f64 = row.iter().zip(x).map(|(u, v)| u * v).sum();
            out[r] = x[r] - px + self.q[r];
        }
    }

    fn residual(&self, x: &[f64]) -> f64 {
        self.a
            .iter()
            .zip(&self.b)
            .map(|(row, bi)| (row.iter().zip(x).map(|(u, v)| u * v).sum::<f64>() - bi).abs())
            .fold(0.0, f64::max)
    }
}

struct Assembled {
    layout: Layout,
    affine: AffineProjector,
    start: Vec<f64>,
    faces: Vec<Option<CMatrix>>,
}

/// Positive functionals forced to vanish. A PSD block paired with a PSD
/// functional `F` to zero lives on `ker F`, so the cone is replaced by that
/// face before clipping. Without this, constraints on the wall of the
/// admissible range leave no interior and the iteration crawls.
struct Faces {
    sums: Vec<Option<CMatrix>>,
}

impl Faces {
    fn new(layout: &Layout) -> Self {
        Self {
            sums: vec![None; layout.sizes.len()],
        }
    }

    fn add(&mut self, block: usize, f: &CMatrix) {
        match &mut self.sums[block] {
            Some(acc) => *acc += f,
            slot => *slot = Some(f.clone()),
        }
    }

    /// Projector onto the common kernel, per block.
    fn projectors(self) -> Result<Vec<Option<CMatrix>>> {
        self.sums
            .into_iter()
            .map(|sum| {
                let Some(sum) = sum else { return Ok(None) };
                let es = hermitian_eigensystem(&sum)?;
                let cutoff = FACE_TOL * es.values.last().copied().unwrap_or(0.0).max(1.0);
                Ok(Some(es.reconstruct_with(|l| {
                    if l <= cutoff {
                        1.0
                    } else {
                        0.0
                    }
                })))
            })
            .collect()
    }
}

const FACE_TOL: f64 = 1e-12;

/// Rank-one projectors onto the kernel of a PSD target.
fn kernel_projectors(target: &CMatrix) -> Result<Vec<CMatrix>> {
    let es = hermitian_eigensystem(target)?;
    let cutoff = FACE_TOL * es.values.last().copied().unwrap_or(0.0).abs().max(1.0);
    Ok((0..es.values.len())
        .filter(|&k| es.values[k].abs() <= cutoff)
        .map(|k| {
            let v = es.vectors.col(k);
            CMatrix::ket_bra(&v, &v)
        })
        .collect())
}

/// Adds one functional per Hermitian basis element of a matrix equation
/// `Σ_k tr(F_k X_{block_k}) = target`, expressed through `lift` which maps a
/// basis element to its per-block coefficient matrices.
fn push_matrix_equation(
    layout: &Layout,
    rows: &mut Vec<Vec<f64>>,
    rhs: &mut Vec<f64>,
    faces: &mut Faces,
    target: &CMatrix,
    lift: impl Fn(&CMatrix) -> Vec<(usize, CMatrix)>,
) -> Result<()> {
    for k in kernel_projectors(target)? {
        for (block, f) in lift(&k) {
            faces.add(block, &f);
        }
    }
    for e in crate::numkit::hermitian_operator_basis(target.rows()) {
        let mut row = vec![0.0; layout.len];
        for (block, f) in lift(&e) {
            let off = layout.offsets[block];
            let n = layout.sizes[block];
            to_coords(&f, &mut row[off..off + n * n]);
        }
        rows.push(row);
        rhs.push(e.hs_inner(target).re);
    }
    Ok(())
}

fn assemble(problem: &FeasibilityProblem) -> Result<Assembled> {
    let d = problem.dim;
    let df = d as f64;
    let (s, t) = (problem.s, problem.t);
    let (q, p) = canonical_pair(d);
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    let mut faces;
    let (layout, start_block) = match problem.kind {
        PairKind::QI => {
            let layout = Layout::new(vec![d; d]);
            faces = Faces::new(&layout);
            for z in 0..d {
                let mut row = vec![0.0; layout.len];
                for x in 0..d {
                    to_coords(
                        q.effect(z),
                        &mut row[layout.offsets[x]..layout.offsets[x] + d * d],
                    );
                }
                rows.push(row);
                let value = if z == 0 { s } else { 0.0 } + (1.0 - s) / df;
                if value.abs() <= FACE_TOL {
                    for x in 0..d {
                        faces.add(x, q.effect(z));
                    }
                }
                rhs.push(value);
            }
            for x in 0..d {
                for z in 0..d {
                    let mut row = vec![0.0; layout.len];
                    to_coords(
                        p.effect(z),
                        &mut row[layout.offsets[x]..layout.offsets[x] + d * d],
                    );
                    rows.push(row);
                    let value = if x == 0 && z == 0 { t } else { 0.0 } + (1.0 - t) / (df * df);
                    if value.abs() <= FACE_TOL {
                        faces.add(x, p.effect(z));
                    }
                    rhs.push(value);
                }
            }
            (layout, CMatrix::identity(d).scale(1.0 / (df * df)))
        }
        PairKind::QP => {
            let layout = Layout::new(vec![d; d * d]);
            faces = Faces::new(&layout);
            let qs = noisy_meter(&q, s)?;
            let pt = noisy_meter(&p, t)?;
            for x in 0..d {
                push_matrix_equation(
                    &layout,
                    &mut rows,
                    &mut rhs,
                    &mut faces,
                    qs.effect(x),
                    |e| (0..d).map(|y| (x * d + y, e.clone())).collect(),
                )?;
            }
            for y in 0..d {
                push_matrix_equation(
                    &layout,
                    &mut rows,
                    &mut rhs,
                    &mut faces,
                    pt.effect(y),
                    |e| (0..d).map(|x| (x * d + y, e.clone())).collect(),
                )?;
            }
            (layout, CMatrix::identity(d).scale(1.0 / (df * df)))
        }
        PairKind::II => {
            let layout = Layout::new(vec![d * d * d]);
            faces = Faces::new(&layout);
            let id = CMatrix::identity(d);
            let first = depolarizing(d, s)?;
            let second = depolarizing(d, t)?;
            // tr_3 C = Choi(I_s): coefficient E ⊗ 1.
            push_matrix_equation(
                &layout,
                &mut rows,
                &mut rhs,
                &mut faces,
                first.choi(),
                |e| vec![(0, kron(e, &id))],
            )?;
            // tr_2 C = Choi(I_t): coefficient E acting on factors 1 and 3.
            push_matrix_equation(
                &layout,
                &mut rows,
                &mut rhs,
                &mut faces,
                second.choi(),
                |e| vec![(0, embed_outer(e, d))],
            )?;
            (
                layout,
                CMatrix::identity(d * d * d).scale(1.0 / (df * df * df)),
            )
        }
    };
    let affine = AffineProjector::new(rows, rhs, layout.len)?;
    let mut start = vec![0.0; layout.len];
    for (i, &n) in layout.sizes.iter().enumerate() {
        to_coords(
            &start_block,
            &mut start[layout.offsets[i]..layout.offsets[i] + n * n],
        );
    }
    Ok(Assembled {
        layout,
        affine,
        start,
        faces: faces.projectors()?,
    })
}

/// `E` on factors 1 and 3 of `C^d ⊗ C^d ⊗ C^d`, identity on factor 2.
fn embed_outer(e: &CMatrix, d: usize) -> CMatrix {
    let n = d * d * d;
    CMatrix::from_fn(n, n, |r, c| {
        let (i, j, k) = (r / (d * d), (r / d) % d, r % d);
        let (i2, j2, k2) = (c / (d * d), (c / d) % d, c % d);
        if j == j2 {
            e[(i * d + k, i2 * d + k2)]
        } else {
            crate::numkit::ZERO
        }
    })
}

fn check_problem(problem: &FeasibilityProblem) -> Result<()> {
    NoiseBounds::new(problem.dim)?;
    let (s_lo, t_lo) = problem.kind.lower_bounds(problem.dim)?;
    Error::check_range("s", problem.s, s_lo, 1.0)?;
    Error::check_range("t", problem.t, t_lo, 1.0)
}

/// Runs the oracle for at most `budget` iterations.
pub fn check(problem: &FeasibilityProblem, budget: usize) -> Result<FeasibilityResult> {
    if budget < MIN_BUDGET {
        return Err(Error::Budget(budget));
    }
    check_problem(problem)?;
    let Assembled {
        layout,
        affine,
        start,
        faces,
    } = assemble(problem)?;
    let n = layout.len;
    let mut x = vec![0.0; n];
    affine.project(&start, &mut x);
    let mut corr = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut shifted = vec![0.0; n];
    let mut best = f64::INFINITY;
    let mut best_at_window_start = f64::INFINITY;
    let mut residual = f64::INFINITY;
    for it in 1..=budget {
        for i in 0..n {
            shifted[i] = x[i] + corr[i];
        }
        project_psd_blocks(&layout, &faces, &shifted, &mut y)?;
        for i in 0..n {
            corr[i] = shifted[i] - y[i];
        }
        residual = affine.residual(&y);
        best = best.min(residual);
        if residual < SOLVER_TOL {
            let blocks = layout
                .sizes
                .iter()
                .zip(&layout.offsets)
                .map(|(&m, &off)| {
                    HermitianMatrix::from_hermitian_part(&from_coords(&y[off..off + m * m], m))
                })
                .collect();
            return Ok(FeasibilityResult {
                status: FeasibilityStatus::Feasible(blocks),
                iterations: it,
                residual,
            });
        }
        if it % PLATEAU_WINDOW == 0 {
            if best > INFEASIBLE_FLOOR && best_at_window_start - best < PLATEAU_DECREASE {
                return Ok(FeasibilityResult {
                    status: FeasibilityStatus::InfeasibleEvidence(best),
                    iterations: it,
                    residual,
                });
            }
            best_at_window_start = best;
        }
        affine.project(&y, &mut x);
    }
    Ok(FeasibilityResult {
        status: FeasibilityStatus::Undetermined,
        iterations: budget,
        residual,
    })
}

fn project_psd_blocks(
    layout: &Layout,
    faces: &[Option<CMatrix>],
    x: &[f64],
    out: &mut [f64],
) -> Result<()> {
    for ((&m, &off), face) in layout.sizes.iter().zip(&layout.offsets).zip(faces) {
        let mut block = from_coords(&x[off..off + m * m], m);
        if let Some(pi) = face {
            block = pi.matmul(&block).matmul(pi);
            let es = hermitian_eigensystem(&block)?;
            to_coords(
                &es.reconstruct_with(|l| l.max(0.0)),
                &mut out[off..off + m * m],
            );
            continue;
        }
        let es = hermitian_eigensystem(&block)?;
        let dst = &mut out[off..off + m * m];
        if es.values[0] >= 0.0 {
            dst.copy_from_slice(&x[off..off + m * m]);
        } else {
            to_coords(&es.reconstruct_with(|l| l.max(0.0)), dst);
        }
    }
    Ok(())
}

/// Bisects on `s` against [`check`] until the bracket is narrower than 1e-3
/// and returns its midpoint. Anything short of a feasibility certificate
/// counts as outside.
pub fn empirical_boundary(
    kind: PairKind,
    d: usize,
    t: f64,
    direction: Direction,
    budget: usize,
) -> Result<f64> {
    let (s_lo, t_lo) = kind.lower_bounds(d)?;
    Error::check_range("t", t, t_lo, 1.0)?;
    let feasible = |s: f64| -> Result<bool> {
        Ok(check(&FeasibilityProblem { kind, dim: d, s, t }, budget)?.is_feasible())
    };
    // s = 0 is compatible with every admissible t, so it anchors the bracket.
    let edge = match direction {
        Direction::Max => 1.0,
        Direction::Min => s_lo,
    };
    if feasible(edge)? {
        return Ok(edge);
    }
    let (mut inside, mut outside) = (0.0, edge);
    for _ in 0..BISECTION_CAP {
        if (outside - inside).abs() < BISECTION_WIDTH {
            break;
        }
        let mid = 0.5 * (inside + outside);
        if feasible(mid)? {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    Ok(0.5 * (inside + outside))
}

/// Rebuilds the device described by a certificate and returns its worst
/// violation as judged by the device verifiers: margin and normalization
/// residuals, and the negated PSD margin when negative.
pub fn certificate_residual(
    problem: &FeasibilityProblem,
    blocks: &[HermitianMatrix],
) -> Result<f64> {
    check_problem(problem)?;
    let d = problem.dim;
    let (q, p) = canonical_pair(d);
    let (residual, psd) = match problem.kind {
        PairKind::QP => {
            let g = Meter::new_unchecked(OutcomeShape::Product(d, d), blocks.to_vec())?;
            let report = verify_joint_meter(&g, &q, &p, (problem.s, problem.t))?;
            (report.max_residual(), report.psd_margin)
        }
        PairKind::II => {
            let block = blocks
                .first()
                .ok_or_else(|| Error::Dimension("empty certificate".into()))?;
            let c = Channel::from_choi_unchecked(d, d * d, block.clone())?;
            let report = verify_cloner(&c, (problem.s, problem.t))?;
            (report.max_residual(), report.psd_margin)
        }
        PairKind::QI => {
            let vm = VectorMeasure::new_unchecked(blocks.to_vec())?;
            let (trace_defect, margin) = vm.defects()?;
            let r = constraint_residual(&vm, problem.s, problem.t);
            (r.max().max(trace_defect), margin)
        }
    };
    Ok(residual.max(-psd).max(0.0))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleRow {
    pub t: f64,
    pub s_closed: f64,
    pub s_empirical: f64,
    pub gap: f64,
}

impl OracleRow {
    pub fn passed(&self) -> bool {
        self.gap <= AGREEMENT_TOL
    }
}

/// Closed-form end of the `s` interval in the given direction.
pub fn closed_form_boundary(kind: PairKind, d: usize, t: f64, direction: Direction) -> Result<f64> {
    let (lo, hi) = s_interval(kind, d, t)?;
    Ok(match direction {
        Direction::Max => hi,
        Direction::Min => lo,
    })
}

/// Compares the oracle with the closed forms on a grid of `t`, in parallel;
/// rows come back in grid order.
pub fn oracle_vs_theory(
    kind: PairKind,
    d: usize,
    t_grid: &[f64],
    direction: Direction,
    budget: usize,
) -> Result<Vec<OracleRow>> {
    t_grid
        .par_iter()
        .map(|&t| {
            let s_closed = closed_form_boundary(kind, d, t, direction)?;
            let s_empirical = empirical_boundary(kind, d, t, direction, budget)?;
            Ok(OracleRow {
                t,
                s_closed,
                s_empirical,
                gap: (s_closed - s_empirical).abs(),
            })
        })
        .collect()
}
