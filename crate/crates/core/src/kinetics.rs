//! Dimensionless kinetics of the effector (u), tumor (v) and IL-2 (w) system.
//!
//! ```text
//! F1 = c v - mu1 u + p1 u w / (g1 + w) + s1
//! F2 = r2 v (1 - b v) - p2 u v / (g2 + v)
//! F3 = p3 u v / (g3 + v) - mu3 w + s3
//! ```
//!
//! Diffusion enters only through `d11, d22, d33` (self) and `d32` (the IL-2
//! flux driven by the tumor gradient); the reaction terms here ignore them.

use crate::config::KvFile;
use crate::error::{Error, Result};
use crate::linalg::Mat3;
use std::fmt;
use std::ops::{Add, Mul, Sub};

/// A point in concentration space.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct State {
    pub u: f64,
    pub v: f64,
    pub w: f64,
}

impl State {
    pub const ZERO: State = State {
        u: 0.0,
        v: 0.0,
        w: 0.0,
    };

    pub const fn new(u: f64, v: f64, w: f64) -> Self {
        Self { u, v, w }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.u, self.v, self.w]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn max_norm(self) -> f64 {
        self.u.abs().max(self.v.abs()).max(self.w.abs())
    }

    pub fn is_finite(self) -> bool {
        self.u.is_finite() && self.v.is_finite() && self.w.is_finite()
    }
}

impl Add for State {
    type Output = State;
    fn add(self, o: State) -> State {
        State::new(self.u + o.u, self.v + o.v, self.w + o.w)
    }
}

impl Sub for State {
    type Output = State;
    fn sub(self, o: State) -> State {
        State::new(self.u - o.u, self.v - o.v, self.w - o.w)
    }
}

impl Mul<f64> for State {
    type Output = State;
    fn mul(self, s: f64) -> State {
        State::new(self.u * s, self.v * s, self.w * s)
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.u, self.v, self.w)
    }
}

/// All dimensionless kinetic and diffusion coefficients of one scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Antigenicity of the tumor.
    pub c: f64,
    pub mu1: f64,
    pub mu3: f64,
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub g1: f64,
    pub g2: f64,
    pub g3: f64,
    /// Adoptive cellular immunotherapy source.
    pub s1: f64,
    /// Cytokine (IL-2) source.
    pub s3: f64,
    pub r2: f64,
    /// Inverse carrying capacity.
    pub b: f64,
    pub d11: f64,
    pub d22: f64,
    pub d33: f64,
    /// Cross-diffusion of the tumor gradient into the IL-2 equation; any sign.
    pub d32: f64,
    /// Anisotropy factor `(Lx / Ly)^2`.
    pub tau_l: f64,
}

/// Treatment scenario presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// No therapy: `s1 = s3 = 0`.
    Untreated,
    /// ACI plus cytokine therapy: `s1 = 0.0035`, `s3 = 0.2`.
    Treated,
}

impl Scenario {
    pub fn sources(self) -> (f64, f64) {
        match self {
            Scenario::Untreated => (0.0, 0.0),
            Scenario::Treated => (0.0035, 0.2),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Untreated => "untreated",
            Scenario::Treated => "treated",
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "untreated" => Ok(Scenario::Untreated),
            "treated" => Ok(Scenario::Treated),
            other => Err(Error::arg(format!(
                "unknown scenario `{other}` (expected `untreated` or `treated`)"
            ))),
        }
    }
}

pub const PRESET_TABLE1: &str = "kirschner-table1";

/// Names of every parameter key, in canonical order.
pub const PARAM_KEYS: [&str; 18] = [
    "c", "mu1", "mu3", "p1", "p2", "p3", "g1", "g2", "g3", "s1", "s3", "r2", "b", "d11", "d22",
    "d33", "d32", "tau_l",
];

impl ModelParams {
    /// Kirschner–Panetta rates with the pattern-forming defaults
    /// `c = 0.25`, `p2 = 0.5`, `d11 = 1e-3`, `d22 = 1.99e-5`, `d33 = 1e-2`,
    /// `d32 = -1e-2`, and no therapy.
    pub fn kirschner_table1() -> Self {
        Self {
            c: 0.25,
            mu1: 0.167,
            mu3: 55.55556,
            p1: 0.69167,
            p2: 0.5,
            p3: 27.778,
            g1: 20.0,
            g2: 0.1,
            g3: 0.001,
            s1: 0.0,
            s3: 0.0,
            r2: 1.0,
            b: 1.0,
            d11: 0.001,
            d22: 1.99e-5,
            d33: 0.01,
            d32: -0.01,
            tau_l: 1.0,
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            PRESET_TABLE1 => Ok(Self::kirschner_table1()),
            other => Err(Error::arg(format!("unknown preset `{other}`"))),
        }
    }

    /// Table 1 preset with the scenario's therapy sources applied.
    pub fn scenario(s: Scenario) -> Self {
        Self::kirschner_table1().with_scenario(s)
    }

    pub fn with_scenario(mut self, s: Scenario) -> Self {
        (self.s1, self.s3) = s.sources();
        self
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        Some(match key {
            "c" => self.c,
            "mu1" => self.mu1,
            "mu3" => self.mu3,
            "p1" => self.p1,
            "p2" => self.p2,
            "p3" => self.p3,
            "g1" => self.g1,
            "g2" => self.g2,
            "g3" => self.g3,
            "s1" => self.s1,
            "s3" => self.s3,
            "r2" => self.r2,
            "b" => self.b,
            "d11" => self.d11,
            "d22" => self.d22,
            "d33" => self.d33,
            "d32" => self.d32,
            "tau_l" => self.tau_l,
            _ => return None,
        })
    }

    /// Set a parameter by name; unknown names are an error.
    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        let slot = match key {
            "c" => &mut self.c,
            "mu1" => &mut self.mu1,
            "mu3" => &mut self.mu3,
            "p1" => &mut self.p1,
            "p2" => &mut self.p2,
            "p3" => &mut self.p3,
            "g1" => &mut self.g1,
            "g2" => &mut self.g2,
            "g3" => &mut self.g3,
            "s1" => &mut self.s1,
            "s3" => &mut self.s3,
            "r2" => &mut self.r2,
            "b" => &mut self.b,
            "d11" => &mut self.d11,
            "d22" => &mut self.d22,
            "d33" => &mut self.d33,
            "d32" => &mut self.d32,
            "tau_l" => &mut self.tau_l,
            other => return Err(Error::arg(format!("unknown parameter `{other}`"))),
        };
        *slot = value;
        Ok(())
    }

    /// Iterate `(name, value)` in canonical order.
    pub fn entries(&self) -> impl Iterator<Item = (&'static str, f64)> + '_ {
        PARAM_KEYS
            .iter()
            .map(move |k| (*k, self.get(k).expect("known key")))
    }

    /// Build parameters from a key=value file containing only parameter keys
    /// plus optional `preset` and `scenario` entries. Unknown keys are errors.
    pub fn from_kv(kv: &KvFile) -> Result<Self> {
        let (params, rest) = Self::from_kv_partial(kv)?;
        if let Some(e) = rest.first() {
            return Err(Error::Config {
                line: e.line,
                message: format!("unknown key `{}`", e.key),
            });
        }
        params.validate()?;
        Ok(params)
    }

    /// Like [`ModelParams::from_kv`] but returns the entries it did not
    /// recognize instead of rejecting them, so callers can layer their own keys.
    pub fn from_kv_partial(kv: &KvFile) -> Result<(Self, Vec<crate::config::Entry>)> {
        let mut params = match kv.get("preset") {
            Some(e) => Self::preset(&e.value).map_err(|err| Error::Config {
                line: e.line,
                message: err.to_string(),
            })?,
            None => Self::kirschner_table1(),
        };
        if let Some(e) = kv.get("scenario") {
            let s: Scenario = e.value.parse().map_err(|err: Error| Error::Config {
                line: e.line,
                message: err.to_string(),
            })?;
            params = params.with_scenario(s);
        }
        let mut rest = Vec::new();
        for e in &kv.entries {
            if e.key == "preset" || e.key == "scenario" {
                continue;
            }
            if PARAM_KEYS.contains(&e.key.as_str()) {
                params.set(&e.key, e.as_f64()?)?;
            } else {
                rest.push(e.clone());
            }
        }
        Ok((params, rest))
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in self.entries() {
            if !value.is_finite() {
                return Err(Error::arg(format!("parameter {name} is not finite")));
            }
        }
        let positive = [
            ("c", self.c),
            ("mu1", self.mu1),
            ("mu3", self.mu3),
            ("p1", self.p1),
            ("p2", self.p2),
            ("p3", self.p3),
            ("g1", self.g1),
            ("g2", self.g2),
            ("g3", self.g3),
            ("r2", self.r2),
            ("b", self.b),
            ("d11", self.d11),
            ("d22", self.d22),
            ("d33", self.d33),
            ("tau_l", self.tau_l),
        ];
        for (name, value) in positive {
            if value <= 0.0 {
                return Err(Error::arg(format!(
                    "parameter {name} must be > 0, got {value}"
                )));
            }
        }
        for (name, value) in [("s1", self.s1), ("s3", self.s3)] {
            if value < 0.0 {
                return Err(Error::arg(format!(
                    "parameter {name} must be >= 0, got {value}"
                )));
            }
        }
        Ok(())
    }
}

fn check_denominator(name: &'static str, value: f64, s: State) -> Result<()> {
    if value == 0.0 || !value.is_finite() {
        return Err(Error::Domain {
            denominator: name,
            value,
            state: s.to_string(),
        });
    }
    Ok(())
}

fn check_denominators(p: &ModelParams, s: State) -> Result<()> {
    check_denominator("g1 + w", p.g1 + s.w, s)?;
    check_denominator("g2 + v", p.g2 + s.v, s)?;
    check_denominator("g3 + v", p.g3 + s.v, s)
}

/// Reaction terms without the zero-denominator guard. Used in the hot loops,
/// which check for non-finite values after the fact.
#[inline(always)]
pub(crate) fn rhs_unchecked(p: &ModelParams, u: f64, v: f64, w: f64) -> (f64, f64, f64) {
    let f1 = p.c * v - p.mu1 * u + p.p1 * u * w / (p.g1 + w) + p.s1;
    let f2 = p.r2 * v * (1.0 - p.b * v) - p.p2 * u * v / (p.g2 + v);
    let f3 = p.p3 * u * v / (p.g3 + v) - p.mu3 * w + p.s3;
    (f1, f2, f3)
}

/// The reaction right-hand side `F(U)`.
pub fn reaction_rhs(p: &ModelParams, s: State) -> Result<State> {
    check_denominators(p, s)?;
    let (f1, f2, f3) = rhs_unchecked(p, s.u, s.v, s.w);
    let out = State::new(f1, f2, f3);
    if !out.is_finite() {
        return Err(Error::Domain {
            denominator: "non-finite rate",
            value: f64::NAN,
            state: s.to_string(),
        });
    }
    Ok(out)
}

/// Analytic Jacobian of [`reaction_rhs`]; entry (v, w) is identically zero.
pub fn jacobian(p: &ModelParams, s: State) -> Result<Mat3> {
    check_denominators(p, s)?;
    let State { u, v, w } = s;
    let gw = p.g1 + w;
    let gv2 = p.g2 + v;
    let gv3 = p.g3 + v;
    let m = Mat3([
        [-p.mu1 + p.p1 * w / gw, p.c, p.p1 * u * p.g1 / (gw * gw)],
        [
            -p.p2 * v / gv2,
            p.r2 * (1.0 - 2.0 * p.b * v) - p.p2 * u * p.g2 / (gv2 * gv2),
            0.0,
        ],
        [p.p3 * v / gv3, p.p3 * u * p.g3 / (gv3 * gv3), -p.mu3],
    ]);
    if !m.is_finite() {
        return Err(Error::Domain {
            denominator: "non-finite Jacobian entry",
            value: f64::NAN,
            state: s.to_string(),
        });
    }
    Ok(m)
}

/// Dimensional model coefficients (capital `D` diffusivities, physical units).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionalParams {
    pub c: f64,
    pub mu1: f64,
    pub mu3: f64,
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub g1: f64,
    pub g2: f64,
    pub g3: f64,
    pub s1: f64,
    pub s3: f64,
    pub r2: f64,
    pub b: f64,
    pub d11: f64,
    pub d22: f64,
    pub d33: f64,
    pub d32: f64,
}

/// Reference scales used to remove units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingSet {
    pub tau: f64,
    pub lx: f64,
    pub ly: f64,
    pub e0: f64,
    pub t0: f64,
    pub il0: f64,
}

impl ScalingSet {
    pub const IDENTITY: ScalingSet = ScalingSet {
        tau: 1.0,
        lx: 1.0,
        ly: 1.0,
        e0: 1.0,
        t0: 1.0,
        il0: 1.0,
    };

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("tau", self.tau),
            ("Lx", self.lx),
            ("Ly", self.ly),
            ("E0", self.e0),
            ("T0", self.t0),
            ("IL0", self.il0),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::arg(format!(
                    "scaling {name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

pub fn nondimensionalize(d: &DimensionalParams, sc: &ScalingSet) -> Result<ModelParams> {
    sc.validate()?;
    let ScalingSet {
        tau,
        lx,
        ly,
        e0,
        t0,
        il0,
    } = *sc;
    let lx2 = lx * lx;
    Ok(ModelParams {
        c: tau * d.c * t0 / e0,
        mu1: tau * d.mu1,
        mu3: tau * d.mu3,
        p1: tau * d.p1,
        p2: tau * d.p2 * e0 / t0,
        p3: tau * d.p3 * e0 / il0,
        g1: d.g1 / il0,
        g2: d.g2 / t0,
        g3: d.g3 / t0,
        s1: tau * d.s1 / e0,
        s3: tau * d.s3 / il0,
        r2: tau * d.r2,
        b: d.b * t0,
        d11: tau * d.d11 / lx2,
        d22: tau * d.d22 / lx2,
        d33: tau * d.d33 / lx2,
        d32: tau * d.d32 * t0 / (lx2 * il0),
        tau_l: (lx / ly) * (lx / ly),
    })
}

/// Inverse of [`nondimensionalize`]. `tau_l` is implied by the scaling set and ignored.
pub fn dimensionalize(p: &ModelParams, sc: &ScalingSet) -> Result<DimensionalParams> {
    sc.validate()?;
    let ScalingSet {
        tau,
        lx,
        e0,
        t0,
        il0,
        ..
    } = *sc;
    let lx2 = lx * lx;
    Ok(DimensionalParams {
        c: p.c * e0 / (tau * t0),
        mu1: p.mu1 / tau,
        mu3: p.mu3 / tau,
        p1: p.p1 / tau,
        p2: p.p2 * t0 / (tau * e0),
        p3: p.p3 * il0 / (tau * e0),
        g1: p.g1 * il0,
        g2: p.g2 * t0,
        g3: p.g3 * t0,
        s1: p.s1 * e0 / tau,
        s3: p.s3 * il0 / tau,
        r2: p.r2 / tau,
        b: p.b / t0,
        d11: p.d11 * lx2 / tau,
        d22: p.d22 * lx2 / tau,
        d33: p.d33 * lx2 / tau,
        d32: p.d32 * lx2 * il0 / (tau * t0),
    })
}
