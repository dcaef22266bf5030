//! Homogeneous steady states: the cancer-free equilibrium (closed form), the
//! coexistence equilibria (roots of a quintic in the tumor density) and the
//! Routh–Hurwitz machinery behind the existence-region scans.

use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::kinetics::{jacobian, reaction_rhs, ModelParams, State};
use crate::linalg::{companion_roots, solve3};
use crate::stability;
use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EquilibriumKind {
    /// Cancer-free: `v = 0`.
    Cfe,
    /// Coexistence: `u, v, w > 0`.
    Cce,
    Other,
}

impl EquilibriumKind {
    pub fn of(s: State) -> Self {
        if s.v == 0.0 {
            EquilibriumKind::Cfe
        } else if s.u > 0.0 && s.v > 0.0 && s.w > 0.0 {
            EquilibriumKind::Cce
        } else {
            EquilibriumKind::Other
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            EquilibriumKind::Cfe => "CFE",
            EquilibriumKind::Cce => "CCE",
            EquilibriumKind::Other => "OTHER",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Stable,
    Unstable,
    Marginal,
}

impl Stability {
    pub fn label(self) -> &'static str {
        match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
            Stability::Marginal => "marginal",
        }
    }
}

/// A classified steady state. Eigenvalues are sorted by descending real part.
#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub kind: EquilibriumKind,
    pub state: State,
    pub eigenvalues: [Complex64; 3],
    pub stability: Stability,
}

impl Equilibrium {
    /// Largest real part among the eigenvalues.
    pub fn spectral_abscissa(&self) -> f64 {
        self.eigenvalues[0].re
    }
}

/// The cancer-free equilibrium `(u1, 0, s3 / mu3)`.
///
/// Exists when `p1 s3 - s3 mu1 - g1 mu1 mu3 < 0`. Without ACI (`s1 = 0`) the
/// effector component is zero, so the origin (or `(0, 0, s3/mu3)`) is returned.
pub fn cfe(p: &ModelParams) -> Result<Option<Equilibrium>> {
    let w = p.s3 / p.mu3;
    let denom = p.p1 * p.s3 - p.s3 * p.mu1 - p.g1 * p.mu1 * p.mu3;
    let u = if p.s1 == 0.0 {
        0.0
    } else if denom < 0.0 {
        -p.s1 * (p.s3 + p.g1 * p.mu3) / denom
    } else {
        return Ok(None);
    };
    let state = State::new(u, 0.0, w);
    let mut eq = stability::classify(p, state)?;
    eq.kind = EquilibriumKind::Cfe;
    Ok(Some(eq))
}

/// Coefficients `a0..a5` of the coexistence quintic, stored by ascending power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuinticCoeffs(pub [f64; 6]);

impl QuinticCoeffs {
    pub fn a(&self, i: usize) -> f64 {
        self.0[i]
    }

    pub fn eval(&self, v: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * v + c)
    }

    /// Coefficients from the leading term down: `[a5, a4, ..., a0]`.
    pub fn descending(&self) -> [f64; 6] {
        let mut d = self.0;
        d.reverse();
        d
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }
}

/// Coefficients of the quintic whose roots in `(0, 1/b)` are the tumor
/// densities of the coexistence equilibria.
///
/// Obtained by substituting `u(v)` from `F2 = 0` and `w(v)` from `F3 = 0`
/// into `F1 = 0` and clearing the positive factor `p2^2 mu3 (g3 + v)(g1 + w)`.
pub fn quintic_coeffs(p: &ModelParams) -> QuinticCoeffs {
    let ModelParams {
        c,
        mu1,
        mu3,
        p1,
        p2,
        p3,
        g1,
        g2,
        g3,
        s1,
        s3,
        r2,
        b,
        ..
    } = *p;
    let k = s3 + g1 * mu3;
    let net = p1 - mu1;
    let r22 = r2 * r2;
    // p1 s3 - mu1 (s3 + g1 mu3): sign decides the cancer-free equilibrium.
    let cfe_den = p1 * s3 - mu1 * k;

    let a5 = b * b * p3 * r22 * net;
    let a4 = -b * c * p2 * p3 * r2 - 2.0 * b * p3 * r22 * net + 2.0 * b * b * g2 * p3 * r22 * net;
    let a3 = c * p2 * p3 * r2
        - b * c * g2 * p2 * p3 * r2
        - b * p2 * p3 * r2 * s1
        - b * p1 * p2 * r2 * s3
        + p3 * r22 * net
        - 4.0 * b * g2 * p3 * r22 * net
        + b * b * g2 * g2 * p3 * r22 * net
        + b * p2 * r2 * mu1 * k;
    let a2 = c * g2 * p2 * p3 * r2 + p2 * p3 * r2 * s1 - b * g2 * p2 * p3 * r2 * s1
        + p1 * p2 * r2 * s3
        - b * g2 * p1 * p2 * r2 * s3
        + 2.0 * g2 * p3 * r22 * net
        - 2.0 * b * g2 * g2 * p3 * r22 * net
        + c * p2 * p2 * k
        - p2 * r2 * mu1 * k
        + b * g2 * p2 * r2 * mu1 * k
        - b * g3 * p2 * r2 * cfe_den;
    let a1 = g2 * g2 * p3 * r22 * net + c * g3 * p2 * p2 * k - g2 * p2 * r2 * mu1 * k
        + g3 * p2 * r2 * cfe_den
        - b * g2 * g3 * p2 * r2 * cfe_den
        + p2 * (g1 * mu3 * p2 * s1 + g2 * p1 * r2 * s3 + g2 * p3 * r2 * s1 + p2 * s1 * s3);
    let a0 = g3 * p2 * p2 * s1 * k + g2 * g3 * p2 * r2 * cfe_den;
    QuinticCoeffs([a0, a1, a2, a3, a4, a5])
}

/// `u` and `w` on the coexistence branch as functions of the tumor density.
pub fn cce_components(p: &ModelParams, v: f64) -> State {
    let logistic = (p.g2 + v) * (1.0 - p.b * v);
    let u = p.r2 * logistic / p.p2;
    let w = (p.s3 * p.p2 * (p.g3 + v) + p.p3 * p.r2 * v * logistic) / (p.p2 * (p.g3 + v) * p.mu3);
    State::new(u, v, w)
}

/// Imaginary-part cutoff for accepting a companion eigenvalue as real.
const REAL_ROOT_IMAG_TOL: f64 = 1e-9;
/// Roots closer than this (in `v`) are merged.
const DUPLICATE_TOL: f64 = 1e-8;
const NEWTON_TOL: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 50;

/// Positive real roots of the quintic inside `(0, 1/b)`, ascending.
pub fn quintic_positive_roots(p: &ModelParams) -> Vec<f64> {
    let q = quintic_coeffs(p);
    let upper = 1.0 / p.b;
    let mut coeffs = q.0.to_vec();
    while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
        coeffs.pop();
    }
    let mut roots: Vec<f64> = companion_roots(&coeffs)
        .into_iter()
        .filter(|z| z.im.abs() < REAL_ROOT_IMAG_TOL)
        .map(|z| z.re)
        .filter(|&v| v > 0.0 && v < upper)
        .collect();
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() < DUPLICATE_TOL);
    roots
}

/// Damped Newton on `F(U) = 0` with the analytic Jacobian.
pub fn refine_equilibrium(p: &ModelParams, start: State) -> Result<State> {
    let fail = |reason: String| Error::Convergence {
        root: start.v,
        reason,
    };
    let mut x = start;
    let mut f = reaction_rhs(p, x)?;
    for _ in 0..NEWTON_MAX_ITER {
        let res = f.max_norm();
        if res < NEWTON_TOL {
            return Ok(x);
        }
        let j = jacobian(p, x)?;
        let neg_f = (f * -1.0).to_array();
        let dx = solve3(&j, neg_f).ok_or_else(|| fail("singular Jacobian".into()))?;
        let dx = State::from_array(dx);
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let trial = x + dx * lambda;
            if let Ok(ft) = reaction_rhs(p, trial) {
                if ft.max_norm() < res {
                    accepted = Some((trial, ft));
                    break;
                }
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((nx, nf)) => {
                x = nx;
                f = nf;
            }
            // No decrease possible: we are at the rounding floor.
            None if res < 1e-10 => return Ok(x),
            None => return Err(fail(format!("line search stalled at residual {res:e}"))),
        }
    }
    if f.max_norm() < 1e-10 {
        Ok(x)
    } else {
        Err(fail(format!(
            "no convergence after {NEWTON_MAX_ITER} iterations (residual {:e})",
            f.max_norm()
        )))
    }
}

/// All coexistence equilibria, ascending in `v`, each refined to full precision
/// and classified.
pub fn cce_solve(p: &ModelParams) -> Result<Vec<Equilibrium>> {
    let upper = 1.0 / p.b;
    let mut out: Vec<Equilibrium> = Vec::new();
    for v in quintic_positive_roots(p) {
        let guess = cce_components(p, v);
        if !(guess.u > 0.0 && guess.w > 0.0) {
            continue;
        }
        let s = refine_equilibrium(p, guess)?;
        if !(s.u > 0.0 && s.v > 0.0 && s.w > 0.0 && s.v < upper) {
            continue;
        }
        if out.iter().any(|e| (e.state.v - s.v).abs() < DUPLICATE_TOL) {
            continue;
        }
        let mut eq = stability::classify(p, s)?;
        eq.kind = EquilibriumKind::Cce;
        out.push(eq);
    }
    Ok(out)
}

/// First column of a Routh array.
#[derive(Debug, Clone, PartialEq)]
pub struct RouthColumn {
    /// `entries[i]` is the first element of row `i` (row 0 holds the leading coefficient).
    pub entries: Vec<f64>,
    /// Rows whose pivot was replaced by ε or whose zero row was replaced by
    /// the derivative of the auxiliary polynomial.
    pub substituted: Vec<bool>,
    /// Sign changes with ε → 0⁺.
    pub sign_changes: usize,
    /// Sign changes with ε → 0⁻. Differs from `sign_changes` only when roots
    /// sit on the imaginary axis.
    pub sign_changes_neg_eps: usize,
}

impl RouthColumn {
    /// One-based element access matching the `R1..R6` naming.
    pub fn r(&self, one_based: usize) -> f64 {
        self.entries[one_based - 1]
    }

    pub fn any_substituted(&self) -> bool {
        self.substituted.iter().any(|&b| b)
    }
}

/// Routh first column of the coexistence quintic.
pub fn routh_first_column(q: &QuinticCoeffs) -> Result<RouthColumn> {
    routh_column(&q.descending())
}

/// Routh first column of a real polynomial given by descending coefficients.
pub fn routh_column(desc: &[f64]) -> Result<RouthColumn> {
    if desc.is_empty() || desc[0] == 0.0 {
        return Err(Error::DegenerateDegree);
    }
    let scale = desc.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let eps = 1e-10 * scale;
    let (pos, flags) = routh_pass(desc, eps);
    let (neg, _) = routh_pass(desc, -eps);
    Ok(RouthColumn {
        sign_changes: sign_changes(&pos),
        sign_changes_neg_eps: sign_changes(&neg),
        entries: pos,
        substituted: flags,
    })
}

fn sign_changes(col: &[f64]) -> usize {
    let signs: Vec<f64> = col
        .iter()
        .copied()
        .filter(|x| *x != 0.0)
        .map(f64::signum)
        .collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

fn routh_pass(desc: &[f64], eps: f64) -> (Vec<f64>, Vec<bool>) {
    let n = desc.len() - 1;
    let width = n / 2 + 1;
    let row_from = |start: usize| -> Vec<f64> {
        let mut r: Vec<f64> = desc.iter().skip(start).step_by(2).copied().collect();
        r.resize(width, 0.0);
        r
    };
    let mut rows = vec![row_from(0)];
    let mut flags = vec![false];
    if n == 0 {
        return (vec![desc[0]], flags);
    }
    rows.push(row_from(1));
    flags.push(false);
    let tiny = eps.abs() * 1e-2;
    for k in 2..=n {
        // The row above must have a usable pivot before it can be divided by.
        let prev_idx = k - 1;
        if rows[prev_idx].iter().all(|x| x.abs() <= tiny) {
            // Zero row: replace by the derivative of the auxiliary polynomial
            // built from the row above it.
            let order = n - (k - 2);
            let aux = &rows[k - 2];
            let deriv: Vec<f64> = (0..width)
                .map(|j| {
                    let power = order as isize - 2 * j as isize;
                    if power > 0 {
                        aux[j] * power as f64
                    } else {
                        0.0
                    }
                })
                .collect();
            rows[prev_idx] = deriv;
            flags[prev_idx] = true;
        }
        if rows[prev_idx][0].abs() <= tiny {
            rows[prev_idx][0] = eps;
            flags[prev_idx] = true;
        }
        let a = &rows[k - 2];
        let b = &rows[k - 1];
        let mut next = vec![0.0; width];
        for j in 0..width - 1 {
            next[j] = (b[0] * a[j + 1] - a[0] * b[j + 1]) / b[0];
        }
        rows.push(next);
        flags.push(false);
    }
    // The final row holds a single element; only its sign matters.
    let col = rows.iter().map(|r| r[0]).collect();
    (col, flags)
}

/// Which condition set decides membership in the existence region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanRule {
    /// `(R4 < 0 ∧ R5 < 0) ∨ (R4 > 0 ∧ R5 > 0)`.
    Untreated,
    /// `a0 < 0 ∧ ((R4<0 ∧ R5<0) ∨ (R4>0 ∧ R5<0) ∨ (R4>0 ∧ R5>0))`.
    Treated,
}

impl ScanRule {
    pub fn holds(self, q: &QuinticCoeffs, col: &RouthColumn) -> bool {
        let (r4, r5) = (col.r(4), col.r(5));
        match self {
            ScanRule::Untreated => (r4 < 0.0 && r5 < 0.0) || (r4 > 0.0 && r5 > 0.0),
            ScanRule::Treated => {
                q.a(0) < 0.0
                    && ((r4 < 0.0 && r5 < 0.0) || (r4 > 0.0 && r5 < 0.0) || (r4 > 0.0 && r5 > 0.0))
            }
        }
    }
}

/// Indicator grid over `(p2, c)`, row-major with `c` varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionGrid {
    pub p2: Vec<f64>,
    pub c: Vec<f64>,
    pub exists: Vec<bool>,
}

impl RegionGrid {
    pub fn at(&self, i_p2: usize, i_c: usize) -> bool {
        self.exists[i_p2 * self.c.len() + i_c]
    }

    pub fn count(&self) -> usize {
        self.exists.iter().filter(|&&b| b).count()
    }
}

fn check_grid(name: &str, g: &[f64]) -> Result<()> {
    if g.is_empty() {
        return Err(Error::arg(format!("{name} grid is empty")));
    }
    if g.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::arg(format!(
            "{name} grid must be strictly increasing"
        )));
    }
    Ok(())
}

/// Evaluate the Routh existence rule on every `(p2, c)` pair.
pub fn existence_region_scan(
    p: &ModelParams,
    p2_grid: &[f64],
    c_grid: &[f64],
    rule: ScanRule,
    exec: Exec,
) -> Result<RegionGrid> {
    check_grid("p2", p2_grid)?;
    check_grid("c", c_grid)?;
    let points: Vec<(f64, f64)> = p2_grid
        .iter()
        .flat_map(|&p2| c_grid.iter().map(move |&c| (p2, c)))
        .collect();
    let exists = exec::map_ordered(exec, &points, |&(p2, c)| {
        let mut q_params = *p;
        q_params.p2 = p2;
        q_params.c = c;
        let q = quintic_coeffs(&q_params);
        match routh_first_column(&q) {
            Ok(col) => rule.holds(&q, &col),
            Err(_) => false,
        }
    });
    Ok(RegionGrid {
        p2: p2_grid.to_vec(),
        c: c_grid.to_vec(),
        exists,
    })
}

/// `n` points log-spaced over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
                .collect()
        }
    }
}

/// `n` points evenly spaced over `[lo, hi]`.
pub fn lin_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::Scenario;

    fn untreated() -> ModelParams {
        ModelParams::scenario(Scenario::Untreated)
    }

    fn treated() -> ModelParams {
        ModelParams::scenario(Scenario::Treated)
    }

    #[test]
    fn cfe_without_therapy_is_origin_and_unstable() {
        let e = cfe(&untreated()).unwrap().unwrap();
        assert_eq!(e.state, State::ZERO);
        assert_eq!(e.kind, EquilibriumKind::Cfe);
        assert_eq!(e.stability, Stability::Unstable);
        assert!((e.spectral_abscissa() - 1.0).abs() < 1e-12); // r2
    }

    #[test]
    fn cfe_with_therapy_closed_form() {
        let p = treated();
        let e = cfe(&p).unwrap().unwrap();
        assert!((e.state.w - 0.2 / 55.55556).abs() < 1e-15);
        assert!((e.state.w - 0.0036).abs() < 1e-6);
        let denom = p.p1 * p.s3 - p.s3 * p.mu1 - p.g1 * p.mu1 * p.mu3;
        let u = -p.s1 * (p.s3 + p.g1 * p.mu3) / denom;
        assert_eq!(e.state.u, u);
        assert!(reaction_rhs(&p, e.state).unwrap().max_norm() < 1e-10);
    }

    #[test]
    fn cfe_absent_when_constraint_fails() {
        let mut p = untreated();
        p.p1 = 1.0;
        p.s3 = 1.0;
        p.mu1 = 0.1;
        p.g1 = 1.0;
        p.mu3 = 0.001;
        p.s1 = 0.01;
        assert!(cfe(&p).unwrap().is_none());
    }

    #[test]
    fn printed_numeric_coefficients_untreated() {
        // Leading coefficient 14.57; a0 = -0.0186 p2 (printed as -0.02 p2).
        for p2 in [0.1, 0.5, 2.0] {
            let mut p = untreated();
            p.p2 = p2;
            let q = quintic_coeffs(&p);
            assert!((q.a(5) - 14.57).abs() < 0.01);
            assert!((q.a(0) / p2 + 0.0186).abs() < 5e-5);
            assert!((q.a(0) / p2 + 0.02).abs() < 0.005);
        }
        // Two-decimal printed coefficient list at c = 0.25, p2 = 0.5.
        let p = untreated();
        let (c, p2) = (p.c, p.p2);
        let q = quintic_coeffs(&p);
        let printed = [
            -0.02 * p2,
            0.15 - 18.72 * p2 + 1.11 * c * p2 * p2,
            2.62 - 166.81 * p2 + 2.78 * c * p2 + 1111.11 * c * p2 * p2,
            8.89 + 185.56 * p2 + 25.0 * c * p2,
            -26.23 - 27.78 * c * p2,
            14.57,
        ];
        for (i, want) in printed.iter().enumerate() {
            assert!((q.a(i) - want).abs() < 0.01, "a{i}: {} vs {want}", q.a(i));
        }
    }

    #[test]
    fn printed_numeric_coefficients_treated() {
        let p = treated();
        let (c, p2) = (p.c, p.p2);
        let q = quintic_coeffs(&p);
        let printed = [
            -0.02 * p2 + 0.004 * p2 * p2,
            0.15 - 18.7 * p2 + 3.89 * p2 * p2 + 1.11 * c * p2 * p2,
            2.62 - 166.63 * p2 + 2.78 * c * p2 + 1111.31 * c * p2 * p2,
            8.89 + 185.35 * p2 + 25.0 * c * p2,
            -26.23 - 27.78 * c * p2,
            14.57,
        ];
        for (i, want) in printed.iter().enumerate() {
            assert!((q.a(i) - want).abs() < 0.01, "a{i}: {} vs {want}", q.a(i));
        }
    }

    #[test]
    fn a0_without_sources_simplifies() {
        let p = untreated();
        let q = quintic_coeffs(&p);
        let want = -p.g2 * p.g3 * p.p2 * p.r2 * p.g1 * p.mu1 * p.mu3;
        assert!((q.a(0) - want).abs() <= 1e-15 * want.abs());
    }

    #[test]
    fn quintic_vanishes_on_the_coexistence_branch() {
        // Independent route: take the refined equilibrium of the full system and
        // confirm the quintic (after clearing denominators) is zero there.
        for p in [untreated(), treated()] {
            for e in cce_solve(&p).unwrap() {
                let q = quintic_coeffs(&p);
                assert!(q.eval(e.state.v).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn cce_untreated_matches_printed_values() {
        let eqs = cce_solve(&untreated()).unwrap();
        let want = State::new(0.592878, 0.372148, 0.295647);
        let e = eqs
            .iter()
            .find(|e| (e.state - want).max_norm() < 1e-4)
            .expect("printed CCE present");
        assert_eq!(e.stability, Stability::Stable);
        assert!(reaction_rhs(&untreated(), e.state).unwrap().max_norm() < 1e-10);
    }

    #[test]
    fn cce_treated_matches_printed_values() {
        let eqs = cce_solve(&treated()).unwrap();
        let want = State::new(0.586645, 0.3542, 0.296099);
        assert!(eqs.iter().any(|e| (e.state - want).max_norm() < 1e-3));
    }

    #[test]
    fn roots_beyond_carrying_capacity_are_dropped() {
        // Shrink the carrying capacity below the untreated root v ≈ 0.372.
        let mut p = untreated();
        p.b = 1.0 / 0.3;
        for v in quintic_positive_roots(&p) {
            assert!(v < 0.3);
        }
        for e in cce_solve(&p).unwrap() {
            assert!(e.state.v < 0.3);
        }
    }

    #[test]
    fn routh_hurwitz_polynomial() {
        let col = routh_column(&[1.0, 5.0, 10.0, 10.0, 5.0, 1.0]).unwrap();
        assert_eq!(col.entries.len(), 6);
        assert!(col.entries.iter().all(|&x| x > 0.0));
        assert_eq!(col.sign_changes, 0);
        assert!(!col.any_substituted());
    }

    #[test]
    fn routh_zero_pivot_is_flagged() {
        // s^4 + s^3 + 2 s^2 + 2 s + 3: classic ε case, two RHP roots.
        let col = routh_column(&[1.0, 1.0, 2.0, 2.0, 3.0]).unwrap();
        assert!(col.any_substituted());
        assert_eq!(col.sign_changes, 2);
        assert_eq!(col.sign_changes_neg_eps, 2);
    }

    #[test]
    fn routh_zero_row_uses_auxiliary_polynomial() {
        // (s^2 + 1)(s + 1)(s + 2) = s^4 + 3s^3 + 3s^2 + 3s + 2: roots on the imaginary axis.
        let col = routh_column(&[1.0, 3.0, 3.0, 3.0, 2.0]).unwrap();
        assert!(col.any_substituted());
        assert_eq!(col.sign_changes, 0);
    }

    #[test]
    fn routh_rejects_zero_leading_coefficient() {
        assert!(matches!(
            routh_first_column(&QuinticCoeffs([1.0, 1.0, 1.0, 1.0, 1.0, 0.0])),
            Err(Error::DegenerateDegree)
        ));
    }

    #[test]
    fn region_rules_at_the_pattern_forming_point() {
        let p = untreated();
        let q = quintic_coeffs(&p);
        let col = routh_first_column(&q).unwrap();
        assert!(ScanRule::Untreated.holds(&q, &col));
        assert!(!cce_solve(&p).unwrap().is_empty());
    }

    #[test]
    fn treated_rule_requires_negative_a0() {
        // a0 = -0.0185 p2 + 0.0039 p2^2 > 0 once p2 > ~4.77.
        let mut p = treated();
        p.p2 = 8.0;
        let q = quintic_coeffs(&p);
        assert!(q.a(0) > 0.0);
        let col = routh_first_column(&q).unwrap();
        assert!(!ScanRule::Treated.holds(&q, &col));
    }

    #[test]
    fn scan_rejects_bad_grids() {
        let p = untreated();
        assert!(
            existence_region_scan(&p, &[], &[0.1], ScanRule::Untreated, Exec::Sequential).is_err()
        );
        assert!(existence_region_scan(
            &p,
            &[0.2, 0.1],
            &[0.1],
            ScanRule::Untreated,
            Exec::Sequential
        )
        .is_err());
    }

    #[test]
    fn grids() {
        let g = log_grid(0.01, 10.0, 4);
        assert!((g[0] - 0.01).abs() < 1e-15 && (g[3] - 10.0).abs() < 1e-12);
        assert!((g[1] - 0.1).abs() < 1e-12);
        assert_eq!(lin_grid(0.0, 1.0, 3), vec![0.0, 0.5, 1.0]);
    }
}
