//! Linear stability: eigenvalue classification, Hopf detection along the
//! coexistence branch in `p2`, and the Turing dispersion relation of
//! `A(k) = J - D k^2`.

use crate::equilibria::{cce_solve, Equilibrium, EquilibriumKind, Stability};
use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::kinetics::{jacobian, reaction_rhs, ModelParams, State};
use crate::linalg::Mat3;
use num_complex::Complex64;

/// Real parts within this band of zero count as marginal.
pub const MARGINAL_TOL: f64 = 1e-10;
/// Largest residual accepted by [`classify`].
pub const FIXED_POINT_TOL: f64 = 1e-8;

/// Eigenvalues of the Jacobian at a fixed point and the resulting verdict.
pub fn classify(p: &ModelParams, e: State) -> Result<Equilibrium> {
    let res = reaction_rhs(p, e)?.max_norm();
    if !(res < FIXED_POINT_TOL) {
        return Err(Error::arg(format!(
            "state {e} is not a fixed point (residual {res:e})"
        )));
    }
    let eigenvalues = jacobian(p, e)?.eigenvalues();
    Ok(Equilibrium {
        kind: EquilibriumKind::of(e),
        state: e,
        eigenvalues,
        stability: verdict(&eigenvalues),
    })
}

pub fn verdict(eigs: &[Complex64]) -> Stability {
    if eigs.iter().all(|z| z.re < -MARGINAL_TOL) {
        Stability::Stable
    } else if eigs.iter().any(|z| z.re > MARGINAL_TOL) {
        Stability::Unstable
    } else {
        Stability::Marginal
    }
}

/// Real part of the dominant complex-conjugate pair, if the spectrum has one.
pub fn complex_pair(eigs: &[Complex64; 3]) -> Option<(Complex64, Complex64)> {
    let z = eigs
        .iter()
        .filter(|z| z.im > 0.0)
        .max_by(|a, b| a.re.total_cmp(&b.re))?;
    Some((*z, z.conj()))
}

/// Diffusion matrix with pattern `{(1,1)=d11, (2,2)=d22, (3,2)=d32, (3,3)=d33}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionMatrix {
    pub d11: f64,
    pub d22: f64,
    pub d33: f64,
    pub d32: f64,
}

impl DiffusionMatrix {
    pub fn from_params(p: &ModelParams) -> Self {
        Self {
            d11: p.d11,
            d22: p.d22,
            d33: p.d33,
            d32: p.d32,
        }
    }

    pub fn matrix(&self) -> Mat3 {
        let mut m = Mat3::diag([self.d11, self.d22, self.d33]);
        m[(2, 1)] = self.d32;
        m
    }
}

/// `J(e) - D k^2`.
pub fn dispersion_matrix(p: &ModelParams, e: State, k: f64) -> Result<Mat3> {
    let j = jacobian(p, e)?;
    if k == 0.0 {
        return Ok(j);
    }
    Ok(j - DiffusionMatrix::from_params(p).matrix().scale(k * k))
}

/// Coefficients of `-λ³ + a2 λ² + a1 λ + a0 = det(A - λ I)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharCoeffs {
    pub a2: f64,
    pub a1: f64,
    pub a0: f64,
}

pub fn char_coeffs(a: &Mat3) -> CharCoeffs {
    CharCoeffs {
        a2: a.trace(),
        a1: -a.principal_minor_sum(),
        a0: a.det(),
    }
}

/// Coefficients of the characteristic coefficients as polynomials in `k²`:
/// `a2 = a2[0] + a2[1] k²`, `a1 = a1[0] + a1[1] k² + a1[2] k⁴`,
/// `a0 = a0[0] + a0[1] k² + a0[2] k⁴ + a0[3] k⁶`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharCoeffsInK2 {
    pub a2: [f64; 2],
    pub a1: [f64; 3],
    pub a0: [f64; 4],
}

/// Exact expansion of [`char_coeffs`] of `J - D k²` in powers of `k²`.
pub fn char_coeffs_in_k2(j: &Mat3, d: &DiffusionMatrix) -> CharCoeffsInK2 {
    // A = J - s D with s = k². Expand trace, minor sum and determinant in s.
    let m = &j.0;
    let (d11, d22, d33, d32) = (d.d11, d.d22, d.d33, d.d32);
    // Diagonal entries (x - s·dx) and the single off-diagonal shift at (3,2).
    let a2 = [j.trace(), -(d11 + d22 + d33)];
    // Principal minors.
    // M12 = (m00 - s d11)(m11 - s d22) - m01 m10
    let m12 = [
        m[0][0] * m[1][1] - m[0][1] * m[1][0],
        -(m[0][0] * d22 + m[1][1] * d11),
        d11 * d22,
    ];
    // M13 = (m00 - s d11)(m22 - s d33) - m02 m20
    let m13 = [
        m[0][0] * m[2][2] - m[0][2] * m[2][0],
        -(m[0][0] * d33 + m[2][2] * d11),
        d11 * d33,
    ];
    // M23 = (m11 - s d22)(m22 - s d33) - m12 (m21 - s d32)
    let m23 = [
        m[1][1] * m[2][2] - m[1][2] * m[2][1],
        -(m[1][1] * d33 + m[2][2] * d22) + m[1][2] * d32,
        d22 * d33,
    ];
    let a1 = [
        -(m12[0] + m13[0] + m23[0]),
        -(m12[1] + m13[1] + m23[1]),
        -(m12[2] + m13[2] + m23[2]),
    ];
    // det by expansion along the first row, each cofactor a polynomial in s.
    let poly_mul = |a: &[f64], b: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; a.len() + b.len() - 1];
        for (i, x) in a.iter().enumerate() {
            for (k, y) in b.iter().enumerate() {
                out[i + k] += x * y;
            }
        }
        out
    };
    let sub = |a: Vec<f64>, b: Vec<f64>| -> Vec<f64> {
        let n = a.len().max(b.len());
        (0..n)
            .map(|i| a.get(i).copied().unwrap_or(0.0) - b.get(i).copied().unwrap_or(0.0))
            .collect()
    };
    let e00 = [m[0][0], -d11];
    let e11 = [m[1][1], -d22];
    let e22 = [m[2][2], -d33];
    let e21 = [m[2][1], -d32];
    let c00 = sub(poly_mul(&e11, &e22), poly_mul(&[m[1][2]], &e21));
    let c01 = sub(poly_mul(&[m[1][0]], &e22), vec![m[1][2] * m[2][0]]);
    let c02 = sub(poly_mul(&[m[1][0]], &e21), poly_mul(&e11, &[m[2][0]]));
    let t0 = poly_mul(&e00, &c00);
    let t1: Vec<f64> = c01.iter().map(|x| -m[0][1] * x).collect();
    let t2: Vec<f64> = c02.iter().map(|x| m[0][2] * x).collect();
    let mut a0 = [0.0; 4];
    for t in [t0, t1, t2] {
        for (i, x) in t.iter().enumerate() {
            a0[i] += x;
        }
    }
    CharCoeffsInK2 { a2, a1, a0 }
}

impl CharCoeffsInK2 {
    pub fn eval(&self, k: f64) -> CharCoeffs {
        let s = k * k;
        let horner = |c: &[f64]| c.iter().rev().fold(0.0, |acc, x| acc * s + x);
        CharCoeffs {
            a2: horner(&self.a2),
            a1: horner(&self.a1),
            a0: horner(&self.a0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersionSample {
    pub k: f64,
    /// Largest real part of the eigenvalues of `A(k)`.
    pub growth: f64,
    /// Imaginary part of the eigenvalue attaining `growth` (non-negative).
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispersionResult {
    pub samples: Vec<DispersionSample>,
    pub k_max: f64,
    pub growth_max: f64,
}

impl DispersionResult {
    /// Sign of the dominant mode's frequency at `k_max`: a nonzero value marks
    /// an oscillatory (wave) instability candidate.
    pub fn frequency_at_max(&self) -> f64 {
        self.samples
            .iter()
            .find(|s| s.k == self.k_max)
            .map(|s| s.frequency)
            .unwrap_or(0.0)
    }
}

/// Default wavenumber grid: `0..=300` in steps of `0.5`.
pub fn default_k_grid() -> Vec<f64> {
    (0..=600).map(|i| i as f64 * 0.5).collect()
}

fn check_k_grid(k_grid: &[f64]) -> Result<()> {
    if k_grid.is_empty() {
        return Err(Error::arg("k grid is empty"));
    }
    if k_grid.iter().any(|k| !(*k >= 0.0)) {
        return Err(Error::arg("k grid entries must be non-negative"));
    }
    if k_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::arg("k grid must be strictly increasing"));
    }
    Ok(())
}

fn dominant(a: &Mat3) -> (f64, f64) {
    let z = a.eigenvalues()[0];
    (z.re, z.im.abs())
}

pub fn dispersion_relation(
    p: &ModelParams,
    e: State,
    k_grid: &[f64],
    exec: Exec,
) -> Result<DispersionResult> {
    check_k_grid(k_grid)?;
    let j = jacobian(p, e)?;
    let d = DiffusionMatrix::from_params(p).matrix();
    let samples = exec::map_ordered(exec, k_grid, |&k| {
        let (growth, frequency) = dominant(&(j - d.scale(k * k)));
        DispersionSample {
            k,
            growth,
            frequency,
        }
    });
    let best = samples
        .iter()
        .copied()
        .reduce(|a, b| if b.growth > a.growth { b } else { a })
        .expect("non-empty grid");
    Ok(DispersionResult {
        k_max: best.k,
        growth_max: best.growth,
        samples,
    })
}

/// Largest growth rate over `k_grid` with `d32` replaced.
pub fn growth_max_at(p: &ModelParams, e: State, d32: f64, k_grid: &[f64]) -> Result<f64> {
    let mut q = *p;
    q.d32 = d32;
    Ok(dispersion_relation(&q, e, k_grid, Exec::Sequential)?.growth_max)
}

/// Tolerance of the d32 bisection.
pub const D32_TOL: f64 = 1e-3;

/// Cross-diffusion threshold at which `max_k growth(k)` changes sign.
pub fn critical_d32(
    p: &ModelParams,
    e: State,
    d32_lo: f64,
    d32_hi: f64,
    k_grid: &[f64],
) -> Result<f64> {
    check_k_grid(k_grid)?;
    let f = |d32: f64| growth_max_at(p, e, d32, k_grid);
    bisect(f, d32_lo, d32_hi, D32_TOL)
}

/// Largest `det A(k)` over the nonzero wavenumbers of `k_grid`.
///
/// With `a2 < 0` and `a1 < 0` a real eigenvalue of `A(k)` crosses zero exactly
/// where `det A(k)` does, so its sign is the stationary Turing indicator.
pub fn determinant_max_at(p: &ModelParams, e: State, d32: f64, k_grid: &[f64]) -> Result<f64> {
    let mut q = *p;
    q.d32 = d32;
    let j = jacobian(&q, e)?;
    let d = DiffusionMatrix::from_params(&q).matrix();
    Ok(k_grid
        .iter()
        .filter(|&&k| k > 0.0)
        .map(|&k| (j - d.scale(k * k)).det())
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Threshold on `d32` where `max_{k>0} det A(k)` changes sign.
pub fn determinant_threshold_d32(
    p: &ModelParams,
    e: State,
    d32_lo: f64,
    d32_hi: f64,
    k_grid: &[f64],
) -> Result<f64> {
    check_k_grid(k_grid)?;
    if !k_grid.iter().any(|&k| k > 0.0) {
        return Err(Error::arg("k grid has no positive wavenumber"));
    }
    bisect(
        |d| determinant_max_at(p, e, d, k_grid),
        d32_lo,
        d32_hi,
        D32_TOL,
    )
}

fn bisect<F>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let (mut lo, mut hi) = (lo, hi);
    let mut f_lo = f(lo)?;
    let f_hi = f(hi)?;
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() || f_lo.is_nan() || f_hi.is_nan() {
        return Err(Error::Bracket { lo, hi, f_lo, f_hi });
    }
    while (hi - lo).abs() > tol {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid)?;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// One row of a `p2` sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub p2: f64,
    /// The tracked coexistence equilibrium, or `None` when no CCE exists there.
    pub equilibrium: Option<Equilibrium>,
}

/// Select the equilibrium on the tracked branch: nearest to `prev`, or the
/// first stable one (falling back to the first) when there is no history.
fn pick_branch(candidates: Vec<Equilibrium>, prev: Option<State>) -> Option<Equilibrium> {
    match prev {
        Some(s) => candidates.into_iter().min_by(|a, b| {
            (a.state - s)
                .max_norm()
                .total_cmp(&(b.state - s).max_norm())
        }),
        None => {
            let stable = candidates
                .iter()
                .position(|e| e.stability == Stability::Stable);
            let idx = stable.unwrap_or(0);
            candidates.into_iter().nth(idx)
        }
    }
}

/// CCE and its eigenvalues along a list of `p2` values, following one branch.
pub fn stability_sweep(p: &ModelParams, p2_values: &[f64]) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(p2_values.len());
    let mut prev: Option<State> = None;
    for &p2 in p2_values {
        let mut q = *p;
        q.p2 = p2;
        let eq = pick_branch(cce_solve(&q)?, prev);
        if let Some(e) = &eq {
            prev = Some(e.state);
        }
        rows.push(SweepRow {
            p2,
            equilibrium: eq,
        });
    }
    Ok(rows)
}

/// Longest run of consecutive stable rows, as `(first p2, last p2)`.
pub fn stable_interval(rows: &[SweepRow]) -> Option<(f64, f64)> {
    let mut best: Option<(usize, usize)> = None;
    let mut start: Option<usize> = None;
    for (i, r) in rows.iter().enumerate() {
        let stable = matches!(&r.equilibrium, Some(e) if e.stability == Stability::Stable);
        match (stable, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                if best.is_none_or(|(a, b)| i - s > b - a + 1) {
                    best = Some((s, i - 1));
                }
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        let e = rows.len() - 1;
        if best.is_none_or(|(a, b)| e - s > b - a) {
            best = Some((s, e));
        }
    }
    best.map(|(a, b)| (rows[a].p2, rows[b].p2))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopfResult {
    pub p2_critical: f64,
    /// Dominant conjugate pair at the critical value, positive imaginary part first.
    pub eigenpair: (Complex64, Complex64),
    /// Final bisection bracket.
    pub bracket: (f64, f64),
    pub equilibrium: State,
}

/// Tolerance of the Hopf bisection in `p2`.
pub const HOPF_TOL: f64 = 1e-4;
/// Continuation steps used to locate the first sign change before bisecting.
const HOPF_MARCH_STEPS: usize = 64;

struct BranchPoint {
    state: State,
    pair_re: Option<f64>,
    eigenvalues: [Complex64; 3],
}

fn branch_point(p: &ModelParams, p2: f64, prev: Option<State>) -> Result<Option<BranchPoint>> {
    let mut q = *p;
    q.p2 = p2;
    Ok(pick_branch(cce_solve(&q)?, prev).map(|e| BranchPoint {
        state: e.state,
        pair_re: complex_pair(&e.eigenvalues).map(|(z, _)| z.re),
        eigenvalues: e.eigenvalues,
    }))
}

/// Locate the Hopf point on the coexistence branch between `p2_lo` and `p2_hi`.
///
/// The branch is followed from `p2_lo` by re-solving the CCE and taking the
/// root nearest the previous one. Returns `None` when the real part of the
/// dominant complex pair keeps its sign over the bracket.
pub fn hopf_scan(p: &ModelParams, p2_lo: f64, p2_hi: f64) -> Result<Option<HopfResult>> {
    if !(p2_lo < p2_hi) || !p2_lo.is_finite() || !p2_hi.is_finite() {
        return Err(Error::arg(format!("invalid p2 bracket [{p2_lo}, {p2_hi}]")));
    }
    let mut last_valid = p2_lo;
    let mut prev = branch_point(p, p2_lo, None)?.ok_or(Error::BranchLost { last_p2: p2_lo })?;
    let h = (p2_hi - p2_lo) / HOPF_MARCH_STEPS as f64;
    for i in 1..=HOPF_MARCH_STEPS {
        let p2 = if i == HOPF_MARCH_STEPS {
            p2_hi
        } else {
            p2_lo + h * i as f64
        };
        let cur = branch_point(p, p2, Some(prev.state))?.ok_or(Error::BranchLost {
            last_p2: last_valid,
        })?;
        if let (Some(a), Some(b)) = (prev.pair_re, cur.pair_re) {
            if a.signum() != b.signum() {
                return bisect_hopf(p, last_valid, p2, prev, a).map(Some);
            }
        }
        last_valid = p2;
        prev = cur;
    }
    Ok(None)
}

fn bisect_hopf(
    p: &ModelParams,
    mut lo: f64,
    mut hi: f64,
    mut at_lo: BranchPoint,
    re_lo: f64,
) -> Result<HopfResult> {
    let sign_lo = re_lo.signum();
    while hi - lo > HOPF_TOL {
        let mid = 0.5 * (lo + hi);
        let pt =
            branch_point(p, mid, Some(at_lo.state))?.ok_or(Error::BranchLost { last_p2: lo })?;
        let re = pt
            .pair_re
            .ok_or_else(|| Error::arg(format!("complex pair vanished at p2 = {mid}")))?;
        if re.signum() == sign_lo {
            lo = mid;
            at_lo = pt;
        } else {
            hi = mid;
        }
    }
    let p2c = 0.5 * (lo + hi);
    let pt = branch_point(p, p2c, Some(at_lo.state))?.ok_or(Error::BranchLost { last_p2: lo })?;
    let pair = complex_pair(&pt.eigenvalues).unwrap_or((pt.eigenvalues[0], pt.eigenvalues[1]));
    Ok(HopfResult {
        p2_critical: p2c,
        eigenpair: pair,
        bracket: (lo, hi),
        equilibrium: pt.state,
    })
}

/// Dominant complex-pair real part on the tracked branch at `p2`, starting the
/// branch selection near `near`.
pub fn pair_real_part_near(p: &ModelParams, p2: f64, near: State) -> Result<Option<f64>> {
    Ok(branch_point(p, p2, Some(near))?.and_then(|b| b.pair_re))
}
