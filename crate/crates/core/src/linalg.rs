//! Small dense linear algebra: 3×3 matrices, cubic characteristic polynomials
//! and their eigenvalues.

use nalgebra::{DMatrix, Matrix3};
use num_complex::Complex64;
use std::ops::{Index, IndexMut, Sub};

/// Row-major 3×3 real matrix, rows/columns ordered (u, v, w).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub fn zeros() -> Self {
        Self::default()
    }

    pub fn diag(d: [f64; 3]) -> Self {
        let mut m = Self::zeros();
        for (i, di) in d.iter().enumerate() {
            m.0[i][i] = *di;
        }
        m
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = *self;
        out.0.iter_mut().flatten().for_each(|x| *x *= s);
        out
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    /// Sum of the three principal 2×2 minors.
    pub fn principal_minor_sum(&self) -> f64 {
        let m = &self.0;
        (m[0][0] * m[1][1] - m[0][1] * m[1][0])
            + (m[0][0] * m[2][2] - m[0][2] * m[2][0])
            + (m[1][1] * m[2][2] - m[1][2] * m[2][1])
    }

    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|x| x.is_finite())
    }

    /// Monic characteristic polynomial `λ³ + c2 λ² + c1 λ + c0`, returned as `[c0, c1, c2]`.
    pub fn char_poly(&self) -> [f64; 3] {
        [-self.det(), self.principal_minor_sum(), -self.trace()]
    }

    /// Eigenvalues sorted by descending real part (ties broken by imaginary part).
    pub fn eigenvalues(&self) -> [Complex64; 3] {
        let [c0, c1, c2] = self.char_poly();
        let mut roots = match cubic_roots(c2, c1, c0) {
            Some(r) => r,
            None => self.eigenvalues_qr(),
        };
        sort_by_real_desc(&mut roots);
        roots
    }

    /// Eigenvalues through a real Schur (QR iteration) decomposition.
    pub fn eigenvalues_qr(&self) -> [Complex64; 3] {
        let m = Matrix3::from_fn(|i, j| self.0[i][j]);
        let ev = m.complex_eigenvalues();
        let mut out = [ev[0], ev[1], ev[2]];
        sort_by_real_desc(&mut out);
        out
    }
}

impl Index<(usize, usize)> for Mat3 {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.0[i][j]
    }
}

impl IndexMut<(usize, usize)> for Mat3 {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.0[i][j]
    }
}

impl Sub for Mat3 {
    type Output = Mat3;
    fn sub(self, rhs: Mat3) -> Mat3 {
        let mut out = self;
        for i in 0..3 {
            for j in 0..3 {
                out.0[i][j] -= rhs.0[i][j];
            }
        }
        out
    }
}

pub(crate) fn sort_by_real_desc(roots: &mut [Complex64]) {
    roots.sort_by(|a, b| {
        b.re.partial_cmp(&a.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(b.im.partial_cmp(&a.im).unwrap_or(std::cmp::Ordering::Equal))
    });
}

/// Relative discriminant magnitude below which the closed form is abandoned.
const DISC_REL_TOL: f64 = 1e-12;

/// Roots of `λ³ + a λ² + b λ + c` by the closed form, polished with Newton steps.
///
/// Returns `None` when the discriminant is too close to zero for the closed
/// form to be trusted (clustered roots); callers fall back to QR iteration.
pub fn cubic_roots(a: f64, b: f64, c: f64) -> Option<[Complex64; 3]> {
    let shift = a / 3.0;
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let disc = 4.0 * p * p * p + 27.0 * q * q;
    let scale = 4.0 * p.abs().powi(3) + 27.0 * q * q;
    if !disc.is_finite() || scale == 0.0 || disc.abs() <= DISC_REL_TOL * scale {
        return None;
    }

    let mut roots = if disc < 0.0 {
        // Three distinct real roots.
        let r = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * r)).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        let two_pi_3 = 2.0 * std::f64::consts::PI / 3.0;
        [0.0, 1.0, 2.0].map(|k| Complex64::new(r * (phi - k * two_pi_3).cos() - shift, 0.0))
    } else {
        // One real root, one conjugate pair.
        let sq = (disc / 108.0).sqrt();
        let big = -q / 2.0 + if q <= 0.0 { sq } else { -sq };
        let s = big.cbrt();
        let t = if s != 0.0 { -p / (3.0 * s) } else { 0.0 };
        let real = s + t - shift;
        let real = newton_real(a, b, c, real);
        // Deflate: (λ - r)(λ² + (a + r) λ + (b + r (a + r))).
        let bq = a + real;
        let cq = b + real * bq;
        let d = bq * bq - 4.0 * cq;
        let (re, im) = if d < 0.0 {
            (-bq / 2.0, (-d).sqrt() / 2.0)
        } else {
            // Numerically the pair collapsed onto the real axis.
            return None;
        };
        [
            Complex64::new(real, 0.0),
            Complex64::new(re, im),
            Complex64::new(re, -im),
        ]
    };

    for z in roots.iter_mut() {
        *z = newton_complex(a, b, c, *z);
    }
    Some(roots)
}

fn newton_real(a: f64, b: f64, c: f64, mut x: f64) -> f64 {
    for _ in 0..3 {
        let f = ((x + a) * x + b) * x + c;
        let df = (3.0 * x + 2.0 * a) * x + b;
        if df == 0.0 {
            break;
        }
        let nx = x - f / df;
        let nf = ((nx + a) * nx + b) * nx + c;
        if nf.abs() >= f.abs() {
            break;
        }
        x = nx;
    }
    x
}

fn newton_complex(a: f64, b: f64, c: f64, mut z: Complex64) -> Complex64 {
    let eval = |z: Complex64| ((z + a) * z + b) * z + c;
    for _ in 0..3 {
        let f = eval(z);
        let df = (3.0 * z + 2.0 * a) * z + b;
        if df.norm() == 0.0 {
            break;
        }
        let nz = z - f / df;
        if eval(nz).norm() >= f.norm() {
            break;
        }
        z = nz;
    }
    z
}

/// Roots of a real polynomial given by ascending coefficients `c[0] + c[1] x + ...`,
/// computed as eigenvalues of its companion matrix and Newton-polished.
///
/// Trailing zero coefficients are an error for the caller to avoid; the
/// leading coefficient must be nonzero.
pub fn companion_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let n = coeffs.len().saturating_sub(1);
    if n == 0 {
        return Vec::new();
    }
    let lead = coeffs[n];
    debug_assert!(lead != 0.0);
    let mut comp = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        comp[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        comp[(i, n - 1)] = -coeffs[i] / lead;
    }
    let ev = comp.complex_eigenvalues();
    let eval = |z: Complex64| {
        coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &ci| acc * z + ci)
    };
    let deriv = |z: Complex64| {
        coeffs
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, (i, &ci)| {
                acc * z + ci * i as f64
            })
    };
    ev.iter()
        .map(|&z0| {
            let mut z = z0;
            for _ in 0..4 {
                let f = eval(z);
                let df = deriv(z);
                if df.norm() == 0.0 {
                    break;
                }
                let nz = z - f / df;
                if !(eval(nz).norm() < f.norm()) {
                    break;
                }
                z = nz;
            }
            z
        })
        .collect()
}

/// Solve the 3×3 system `m x = rhs` with partial pivoting; `None` if singular.
pub fn solve3(m: &Mat3, rhs: [f64; 3]) -> Option<[f64; 3]> {
    let mut a = m.0;
    let mut b = rhs;
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col] == 0.0 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            let pivot = a[col];
            for (x, y) in a[row].iter_mut().zip(pivot).skip(col) {
                *x -= f * y;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for i in (0..3).rev() {
        let s: f64 = (i + 1..3).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}
