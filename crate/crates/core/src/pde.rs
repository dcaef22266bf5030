//! Explicit finite-difference solver for the reaction-diffusion system on the
//! unit square (or unit interval) with zero-flux boundaries.

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::kinetics::{rhs_unchecked, ModelParams, State};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Values below this count as a negativity event.
pub const NEGATIVITY_TOL: f64 = -1e-8;
/// Relative slack on the stability bound so a step sitting exactly on the bound passes.
const GUARD_SLACK: f64 = 1e-9;
pub const DEFAULT_DX: f64 = 0.01;
pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_T_END: f64 = 200.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    U,
    V,
    W,
}

impl Field {
    pub const ALL: [Field; 3] = [Field::U, Field::V, Field::W];

    pub fn name(self) -> &'static str {
        match self {
            Field::U => "u",
            Field::V => "v",
            Field::W => "w",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// Node layout of a vertex-centred grid spanning `[0,1]` (and `[0,1]` in y for 2D).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
}

impl Geometry {
    /// `n × n` nodes on the unit square.
    pub fn square(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::arg(format!(
                "need at least 3 nodes per side, got {n}"
            )));
        }
        let h = 1.0 / (n - 1) as f64;
        Ok(Geometry {
            nx: n,
            ny: 1,
            dx: h,
            dy: h,
        }
        .with_ny(n))
    }

    /// `n` nodes on the unit interval.
    pub fn line(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::arg(format!("need at least 3 nodes, got {n}")));
        }
        Ok(Geometry {
            nx: n,
            ny: 1,
            dx: 1.0 / (n - 1) as f64,
            dy: 1.0,
        })
    }

    /// Geometry for spacing `dx` in `dims` dimensions; `1/dx` must be an integer.
    pub fn from_spacing(dims: usize, dx: f64) -> Result<Self> {
        if !(dx > 0.0 && dx <= 0.5) {
            return Err(Error::arg(format!("dx must lie in (0, 0.5], got {dx}")));
        }
        let cells = (1.0 / dx).round();
        if ((cells * dx) - 1.0).abs() > 1e-9 {
            return Err(Error::arg(format!(
                "1/dx must be an integer, got dx = {dx}"
            )));
        }
        let n = cells as usize + 1;
        match dims {
            1 => Self::line(n),
            2 => Self::square(n),
            _ => Err(Error::arg(format!("dims must be 1 or 2, got {dims}"))),
        }
    }

    fn with_ny(mut self, ny: usize) -> Self {
        self.ny = ny;
        self
    }

    pub fn dims(&self) -> usize {
        if self.ny == 1 {
            1
        } else {
            2
        }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx
    }

    /// y coordinate of row `j`; 1D grids sit on the y-centre line.
    pub fn y(&self, j: usize) -> f64 {
        if self.ny == 1 {
            0.5
        } else {
            j as f64 * self.dy
        }
    }

    /// Nearest node to a point of the unit domain, as `(i, j)`.
    pub fn nearest(&self, x: f64, y: f64) -> Result<(usize, usize)> {
        let inside = |c: f64| (0.0..=1.0).contains(&c);
        if !inside(x) || (self.ny > 1 && !inside(y)) {
            return Err(Error::arg(format!(
                "point ({x}, {y}) lies outside the unit domain"
            )));
        }
        let i = (x / self.dx).round() as usize;
        let j = if self.ny == 1 {
            0
        } else {
            (y / self.dy).round() as usize
        };
        Ok((i.min(self.nx - 1), j.min(self.ny - 1)))
    }

    /// Quadrature weight of node `(i, j)` for the trapezoid rule (boundary
    /// nodes get half weight per boundary they lie on).
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let edge = |k: usize, n: usize| if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
        let wy = if self.ny == 1 {
            1.0
        } else {
            edge(j, self.ny) * self.dy
        };
        edge(i, self.nx) * self.dx * wy
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    /// Row-major (`j * nx + i`) node values.
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    pub t: f64,
}

impl FieldGrid {
    pub fn uniform(geom: Geometry, s: State) -> Self {
        let n = geom.len();
        FieldGrid {
            nx: geom.nx,
            ny: geom.ny,
            dx: geom.dx,
            dy: geom.dy,
            u: vec![s.u; n],
            v: vec![s.v; n],
            w: vec![s.w; n],
            t: 0.0,
        }
    }

    pub fn geometry(&self) -> Geometry {
        Geometry {
            nx: self.nx,
            ny: self.ny,
            dx: self.dx,
            dy: self.dy,
        }
    }

    pub fn field(&self, f: Field) -> &[f64] {
        match f {
            Field::U => &self.u,
            Field::V => &self.v,
            Field::W => &self.w,
        }
    }

    pub fn field_mut(&mut self, f: Field) -> &mut [f64] {
        match f {
            Field::U => &mut self.u,
            Field::V => &mut self.v,
            Field::W => &mut self.w,
        }
    }

    pub fn at(&self, i: usize, j: usize) -> State {
        let k = j * self.nx + i;
        State::new(self.u[k], self.v[k], self.w[k])
    }

    /// Trapezoid-rule integral of a field over the domain.
    ///
    /// This is the quantity the mirror-ghost Neumann stencil conserves exactly
    /// under pure diffusion.
    pub fn mass(&self, f: Field) -> f64 {
        let geom = self.geometry();
        let data = self.field(f);
        let mut total = 0.0;
        for j in 0..self.ny {
            for i in 0..self.nx {
                total += geom.weight(i, j) * data[j * self.nx + i];
            }
        }
        total
    }

    pub fn stats(&self, f: Field) -> FieldStats {
        FieldStats::of(self.field(f))
    }

    pub fn same_shape(&self, other: &FieldGrid) -> bool {
        self.nx == other.nx && self.ny == other.ny && self.dx == other.dx && self.dy == other.dy
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Population variance over nodes.
    pub variance: f64,
}

impl FieldStats {
    pub fn of(data: &[f64]) -> Self {
        let n = data.len() as f64;
        let mean = data.iter().sum::<f64>() / n;
        let variance = data.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        FieldStats {
            min: data.iter().copied().fold(f64::INFINITY, f64::min),
            max: data.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean,
            variance,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub grid: FieldGrid,
    pub stats: [FieldStats; 3],
}

impl Snapshot {
    pub fn of(grid: &FieldGrid) -> Self {
        Snapshot {
            time: grid.t,
            grid: grid.clone(),
            stats: Field::ALL.map(|f| grid.stats(f)),
        }
    }

    pub fn stat(&self, f: Field) -> FieldStats {
        self.stats[f.index()]
    }
}

const IC_B: [[f64; 4]; 3] = [
    [1.0, 1.0, 1.0, 1.0],
    [1.0, 0.0, 0.0, 0.0],
    [1.0, 0.0, 0.0, 0.0],
];
const IC_X0: [[f64; 4]; 3] = [[0.0, 0.0, 1.0, 1.0], [1.0, 0.0, 0.0, 0.0], [0.0; 4]];
const IC_Y0: [[f64; 4]; 3] = [[0.0, 1.0, 0.0, 1.0], [1.0, 0.0, 0.0, 0.0], [0.0; 4]];
const IC_X1: [f64; 3] = [0.5, 1.0, 0.0];
const IC_Y1: [f64; 3] = [0.5, 1.0, 0.0];
const SIGMA1_SQ: f64 = 0.02;
const SIGMA2_SQ: f64 = 0.06;

/// Gaussian initial data for variant `j` (1, 2 or 3).
pub fn initial_condition(j: usize, geom: Geometry) -> Result<FieldGrid> {
    if !(1..=3).contains(&j) {
        return Err(Error::arg(format!(
            "initial-condition variant must be 1, 2 or 3, got {j}"
        )));
    }
    let k = j - 1;
    let mut g = FieldGrid::uniform(geom, State::new(0.0, 0.0, 0.0));
    for row in 0..geom.ny {
        let y = geom.y(row);
        for col in 0..geom.nx {
            let x = geom.x(col);
            let bumps: f64 = (0..4)
                .map(|m| {
                    let r2 = (x - IC_X0[k][m]).powi(2) + (y - IC_Y0[k][m]).powi(2);
                    IC_B[k][m] * (-r2 / SIGMA1_SQ).exp()
                })
                .sum();
            let r2 = (x - IC_X1[k]).powi(2) + (y - IC_Y1[k]).powi(2);
            let idx = row * geom.nx + col;
            g.u[idx] = bumps;
            g.w[idx] = bumps;
            g.v[idx] = (-r2 / SIGMA2_SQ).exp();
        }
    }
    Ok(g)
}

#[inline(always)]
fn mirror_lo(i: usize) -> usize {
    if i == 0 {
        1
    } else {
        i - 1
    }
}

#[inline(always)]
fn mirror_hi(i: usize, n: usize) -> usize {
    if i == n - 1 {
        n - 2
    } else {
        i + 1
    }
}

/// Second differences `(∂xx f, ∂yy f)` at node `(i, j)` with reflecting ghosts.
#[inline(always)]
fn second_diffs(
    f: &[f64],
    nx: usize,
    ny: usize,
    i: usize,
    j: usize,
    idx2x: f64,
    idx2y: f64,
) -> (f64, f64) {
    let row = j * nx;
    let c = f[row + i];
    let fxx = (f[row + mirror_lo(i)] - 2.0 * c + f[row + mirror_hi(i, nx)]) * idx2x;
    let fyy = if ny == 1 {
        0.0
    } else {
        (f[mirror_lo(j) * nx + i] - 2.0 * c + f[mirror_hi(j, ny) * nx + i]) * idx2y
    };
    (fxx, fyy)
}

/// Discrete `∂²/∂x² + τ_L ∂²/∂y²` with zero-flux (mirror) boundaries.
pub fn laplacian(field: &[f64], geom: Geometry, tau_l: f64) -> Result<Vec<f64>> {
    check_geometry(geom)?;
    if field.len() != geom.len() {
        return Err(Error::arg(format!(
            "field has {} values, geometry expects {}",
            field.len(),
            geom.len()
        )));
    }
    let (idx2x, idx2y) = (1.0 / (geom.dx * geom.dx), 1.0 / (geom.dy * geom.dy));
    let mut out = vec![0.0; geom.len()];
    for j in 0..geom.ny {
        for i in 0..geom.nx {
            let (fxx, fyy) = second_diffs(field, geom.nx, geom.ny, i, j, idx2x, idx2y);
            out[j * geom.nx + i] = fxx + tau_l * fyy;
        }
    }
    Ok(out)
}

fn check_geometry(geom: Geometry) -> Result<()> {
    if geom.nx < 3 || (geom.ny != 1 && geom.ny < 3) {
        return Err(Error::arg(format!(
            "grid {}x{} too small; need at least 3 nodes per active dimension",
            geom.nx, geom.ny
        )));
    }
    if !(geom.dx > 0.0) || !(geom.dy > 0.0) {
        return Err(Error::arg("grid spacings must be positive"));
    }
    Ok(())
}

/// Pointwise source terms of the PDE.
pub trait Reaction: Sync {
    fn rates(&self, x: f64, y: f64, t: f64, s: [f64; 3]) -> [f64; 3];
}

impl Reaction for ModelParams {
    #[inline(always)]
    fn rates(&self, _x: f64, _y: f64, _t: f64, s: [f64; 3]) -> [f64; 3] {
        let (a, b, c) = rhs_unchecked(self, s[0], s[1], s[2]);
        [a, b, c]
    }
}

/// Pure diffusion.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoReaction;

impl Reaction for NoReaction {
    #[inline(always)]
    fn rates(&self, _x: f64, _y: f64, _t: f64, _s: [f64; 3]) -> [f64; 3] {
        [0.0; 3]
    }
}

impl<F> Reaction for F
where
    F: Fn(f64, f64, f64, [f64; 3]) -> [f64; 3] + Sync,
{
    fn rates(&self, x: f64, y: f64, t: f64, s: [f64; 3]) -> [f64; 3] {
        self(x, y, t, s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diffusion {
    pub d11: f64,
    pub d22: f64,
    pub d33: f64,
    pub d32: f64,
    pub tau_l: f64,
}

impl Diffusion {
    pub fn from_params(p: &ModelParams) -> Self {
        Diffusion {
            d11: p.d11,
            d22: p.d22,
            d33: p.d33,
            d32: p.d32,
            tau_l: p.tau_l,
        }
    }

    /// Largest stable explicit-Euler step for this grid.
    pub fn stability_bound(&self, geom: Geometry) -> f64 {
        let h2 = if geom.ny == 1 {
            geom.dx * geom.dx
        } else {
            (geom.dx * geom.dx).min(geom.dy * geom.dy / self.tau_l)
        };
        let d = self.d11.max(self.d22).max(self.d33 + self.d32.abs());
        if d > 0.0 {
            0.2 * h2 / d
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NegativityPolicy {
    #[default]
    Abort,
    Warn,
}

impl std::str::FromStr for NegativityPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "abort" => Ok(NegativityPolicy::Abort),
            "warn" => Ok(NegativityPolicy::Warn),
            other => Err(Error::arg(format!(
                "negativity policy must be abort or warn, got {other}"
            ))),
        }
    }
}

/// Per-row outcome of a step: first non-finite node and most negative value.
#[derive(Debug, Clone, Copy)]
struct RowCheck {
    non_finite: Option<(usize, usize)>,
    min: (f64, usize, usize),
}

impl RowCheck {
    const CLEAN: RowCheck = RowCheck {
        non_finite: None,
        min: (f64::INFINITY, usize::MAX, 0),
    };

    // Deterministic merge: lowest cell index wins ties.
    fn merge(a: RowCheck, b: RowCheck) -> RowCheck {
        let non_finite = match (a.non_finite, b.non_finite) {
            (Some(x), Some(y)) => Some(if x.0 <= y.0 { x } else { y }),
            (x, y) => x.or(y),
        };
        let min = if a.min.0 < b.min.0 || (a.min.0 == b.min.0 && a.min.1 <= b.min.1) {
            a.min
        } else {
            b.min
        };
        RowCheck { non_finite, min }
    }
}

/// Double-buffered explicit Euler integrator.
#[derive(Debug, Clone)]
pub struct Solver<R: Reaction> {
    current: FieldGrid,
    next: FieldGrid,
    reaction: R,
    diffusion: Diffusion,
    dt: f64,
    steps: u64,
    t0: f64,
    exec: Exec,
    policy: NegativityPolicy,
    negative_events: u64,
}

impl<R: Reaction> Solver<R> {
    pub fn new(grid: FieldGrid, reaction: R, diffusion: Diffusion, dt: f64) -> Result<Self> {
        let geom = grid.geometry();
        check_geometry(geom)?;
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::arg(format!("dt must be positive, got {dt}")));
        }
        let bound = diffusion.stability_bound(geom);
        if dt > bound * (1.0 + GUARD_SLACK) {
            return Err(Error::StepTooLarge { dt, bound });
        }
        Ok(Solver {
            next: grid.clone(),
            t0: grid.t,
            current: grid,
            reaction,
            diffusion,
            dt,
            steps: 0,
            exec: Exec::default(),
            policy: NegativityPolicy::default(),
            negative_events: 0,
        })
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn with_policy(mut self, policy: NegativityPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn grid(&self) -> &FieldGrid {
        &self.current
    }

    pub fn into_grid(self) -> FieldGrid {
        self.current
    }

    pub fn time(&self) -> f64 {
        self.current.t
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Number of steps in which some value fell below the negativity tolerance
    /// (only nonzero under the warn policy).
    pub fn negative_events(&self) -> u64 {
        self.negative_events
    }

    pub fn advance(&mut self, steps: u64) -> Result<()> {
        for _ in 0..steps {
            self.step()?;
        }
        Ok(())
    }

    pub fn step(&mut self) -> Result<()> {
        let nx = self.current.nx;
        let check = self.compute_next();
        let t_prev = self.current.t;
        if let Some((cell, field)) = check.non_finite {
            return Err(Error::BlowUp {
                time: t_prev,
                cell,
                field: Field::ALL[field].name(),
            });
        }
        let (value, cell, field) = check.min;
        let t_new = self.t0 + (self.steps + 1) as f64 * self.dt;
        if value < NEGATIVITY_TOL {
            let field = Field::ALL[field].name();
            match self.policy {
                NegativityPolicy::Abort => {
                    return Err(Error::Negative {
                        time: t_new,
                        cell,
                        field,
                        value,
                    });
                }
                NegativityPolicy::Warn => {
                    if self.negative_events == 0 {
                        log::warn!(
                            "field {field} went negative ({value:e}) at t = {t_new}, cell {cell} ({}, {}); continuing",
                            cell % nx,
                            cell / nx
                        );
                    }
                    self.negative_events += 1;
                }
            }
        }
        std::mem::swap(&mut self.current, &mut self.next);
        self.steps += 1;
        self.current.t = t_new;
        Ok(())
    }

    fn compute_next(&mut self) -> RowCheck {
        let cur = &self.current;
        let (nx, ny) = (cur.nx, cur.ny);
        let geom = cur.geometry();
        let kernel = RowKernel {
            u: &cur.u,
            v: &cur.v,
            w: &cur.w,
            nx,
            ny,
            idx2x: 1.0 / (cur.dx * cur.dx),
            idx2y: 1.0 / (cur.dy * cur.dy),
            geom,
            t: cur.t,
            dt: self.dt,
            d: self.diffusion,
            reaction: &self.reaction,
        };
        let next = &mut self.next;
        if self.exec.is_parallel() {
            #[cfg(feature = "parallel")]
            {
                return next
                    .u
                    .par_chunks_mut(nx)
                    .zip(next.v.par_chunks_mut(nx))
                    .zip(next.w.par_chunks_mut(nx))
                    .enumerate()
                    .with_min_len(4)
                    .map(|(j, ((ru, rv), rw))| kernel.row(j, ru, rv, rw))
                    .reduce(|| RowCheck::CLEAN, RowCheck::merge);
            }
        }
        next.u
            .chunks_mut(nx)
            .zip(next.v.chunks_mut(nx))
            .zip(next.w.chunks_mut(nx))
            .enumerate()
            .map(|(j, ((ru, rv), rw))| kernel.row(j, ru, rv, rw))
            .fold(RowCheck::CLEAN, RowCheck::merge)
    }
}

struct RowKernel<'a, R> {
    u: &'a [f64],
    v: &'a [f64],
    w: &'a [f64],
    nx: usize,
    ny: usize,
    idx2x: f64,
    idx2y: f64,
    geom: Geometry,
    t: f64,
    dt: f64,
    d: Diffusion,
    reaction: &'a R,
}

impl<R: Reaction> RowKernel<'_, R> {
    #[inline]
    fn row(&self, j: usize, ru: &mut [f64], rv: &mut [f64], rw: &mut [f64]) -> RowCheck {
        let (nx, ny) = (self.nx, self.ny);
        let d = &self.d;
        let tau = d.tau_l;
        let y = self.geom.y(j);
        let mut check = RowCheck::CLEAN;
        for i in 0..nx {
            let k = j * nx + i;
            let s = [self.u[k], self.v[k], self.w[k]];
            let (uxx, uyy) = second_diffs(self.u, nx, ny, i, j, self.idx2x, self.idx2y);
            let (vxx, vyy) = second_diffs(self.v, nx, ny, i, j, self.idx2x, self.idx2y);
            let (wxx, wyy) = second_diffs(self.w, nx, ny, i, j, self.idx2x, self.idx2y);
            let lu = uxx + tau * uyy;
            let lv = vxx + tau * vyy;
            let lw = wxx + tau * wyy;
            let f = self.reaction.rates(self.geom.x(i), y, self.t, s);
            let out = [
                s[0] + self.dt * (f[0] + d.d11 * lu),
                s[1] + self.dt * (f[1] + d.d22 * lv),
                s[2] + self.dt * (f[2] + d.d33 * lw + d.d32 * lv),
            ];
            ru[i] = out[0];
            rv[i] = out[1];
            rw[i] = out[2];
            for (field, &x) in out.iter().enumerate() {
                if !x.is_finite() {
                    if check.non_finite.is_none() {
                        check.non_finite = Some((k, field));
                    }
                } else if x < check.min.0 {
                    check.min = (x, k, field);
                }
            }
        }
        check
    }
}

/// One explicit step of the model system.
pub fn step(g: &FieldGrid, p: &ModelParams, dt: f64) -> Result<FieldGrid> {
    let mut solver = Solver::new(g.clone(), *p, Diffusion::from_params(p), dt)?;
    solver.step()?;
    Ok(solver.into_grid())
}

/// Initial data for a simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialData {
    /// Gaussian variant 1, 2 or 3.
    Gaussian(usize),
    /// Spatially constant state.
    Uniform(State),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub params: ModelParams,
    pub initial: InitialData,
    pub dims: usize,
    pub dx: f64,
    pub dt: f64,
    pub t_end: f64,
    /// Sorted times in `[0, t_end]` at which snapshots are recorded.
    pub snapshot_times: Vec<f64>,
    pub negativity: NegativityPolicy,
    pub exec: Exec,
}

impl SimConfig {
    pub fn new(params: ModelParams) -> Self {
        SimConfig {
            params,
            initial: InitialData::Gaussian(1),
            dims: 2,
            dx: DEFAULT_DX,
            dt: DEFAULT_DT,
            t_end: DEFAULT_T_END,
            snapshot_times: Vec::new(),
            negativity: NegativityPolicy::Abort,
            exec: Exec::default(),
        }
    }

    /// Snapshot every `interval` time units (excluding t=0).
    pub fn snapshot_every(mut self, interval: f64) -> Result<Self> {
        if !(interval > 0.0) {
            return Err(Error::arg(format!(
                "snapshot interval must be positive, got {interval}"
            )));
        }
        let n = (self.t_end / interval + 1e-9).floor() as usize;
        self.snapshot_times = (1..=n).map(|k| k as f64 * interval).collect();
        Ok(self)
    }

    pub fn geometry(&self) -> Result<Geometry> {
        Geometry::from_spacing(self.dims, self.dx)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::arg(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(Error::arg(format!(
                "t_end must be positive, got {}",
                self.t_end
            )));
        }
        if self.snapshot_times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::arg("snapshot times must be sorted"));
        }
        if let Some(&t) = self
            .snapshot_times
            .iter()
            .find(|&&t| !(0.0..=self.t_end).contains(&t))
        {
            return Err(Error::arg(format!(
                "snapshot time {t} outside [0, {}]",
                self.t_end
            )));
        }
        if let InitialData::Gaussian(j) = self.initial {
            if !(1..=3).contains(&j) {
                return Err(Error::arg(format!(
                    "initial-condition variant must be 1, 2 or 3, got {j}"
                )));
            }
        }
        let geom = self.geometry()?;
        let bound = Diffusion::from_params(&self.params).stability_bound(geom);
        if self.dt > bound * (1.0 + GUARD_SLACK) {
            return Err(Error::StepTooLarge { dt: self.dt, bound });
        }
        Ok(())
    }

    pub fn initial_grid(&self) -> Result<FieldGrid> {
        let geom = self.geometry()?;
        match self.initial {
            InitialData::Gaussian(j) => initial_condition(j, geom),
            InitialData::Uniform(s) => Ok(FieldGrid::uniform(geom, s)),
        }
    }
}

/// Run the configured simulation, calling `on_snapshot` for each recorded
/// snapshot (the final state is always recorded).
pub fn simulate_with<F>(cfg: &SimConfig, mut on_snapshot: F) -> Result<u64>
where
    F: FnMut(Snapshot) -> Result<()>,
{
    cfg.validate()?;
    let grid = cfg.initial_grid()?;
    let mut solver = Solver::new(
        grid,
        cfg.params,
        Diffusion::from_params(&cfg.params),
        cfg.dt,
    )?
    .with_exec(cfg.exec)
    .with_policy(cfg.negativity);
    let total = (cfg.t_end / cfg.dt).round() as u64;
    let mut marks: Vec<u64> = cfg
        .snapshot_times
        .iter()
        .map(|t| ((t / cfg.dt).round() as u64).min(total))
        .collect();
    marks.dedup();
    let mut next_mark = marks.iter().peekable();
    while next_mark.peek() == Some(&&0) {
        on_snapshot(Snapshot::of(solver.grid()))?;
        next_mark.next();
    }
    let mut final_recorded = false;
    while solver.steps() < total {
        solver.step()?;
        if next_mark.peek() == Some(&&solver.steps()) {
            next_mark.next();
            on_snapshot(Snapshot::of(solver.grid()))?;
            final_recorded = solver.steps() == total;
        }
    }
    if !final_recorded && total > 0 {
        on_snapshot(Snapshot::of(solver.grid()))?;
    }
    if solver.negative_events() > 0 {
        log::warn!(
            "{} steps produced negative values",
            solver.negative_events()
        );
    }
    Ok(solver.negative_events())
}

/// Run the configured simulation and collect every snapshot.
pub fn simulate(cfg: &SimConfig) -> Result<Vec<Snapshot>> {
    let mut out = Vec::new();
    simulate_with(cfg, |s| {
        out.push(s);
        Ok(())
    })?;
    Ok(out)
}

/// Eigenvalue of the discrete Neumann Laplacian for cosine mode `(m, n)` on the unit square.
pub fn neumann_mode_wavenumber_sq(m: u32, n: u32) -> f64 {
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    pi2 * f64::from(m * m + n * n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibria::cce_solve;
    use crate::kinetics::{reaction_rhs, Scenario};

    fn untreated() -> ModelParams {
        ModelParams::scenario(Scenario::Untreated)
    }

    #[test]
    fn gaussian_initial_data() {
        let geom = Geometry::square(101).unwrap();
        let g = initial_condition(1, geom).unwrap();
        assert_eq!(g.at(50, 50).v, 1.0);
        assert!((g.at(0, 0).u - 1.0).abs() < 1e-15);
        let g3 = initial_condition(3, geom).unwrap();
        assert_eq!(g3.at(0, 0).u, 1.0);
        assert!(g3.at(100, 100).u < 1e-40);
        assert!(initial_condition(0, geom).is_err());
        assert!(initial_condition(4, geom).is_err());
        let line = initial_condition(1, Geometry::line(101).unwrap()).unwrap();
        assert_eq!(line.at(50, 0).v, 1.0);
    }

    #[test]
    fn geometry_from_spacing() {
        let g = Geometry::from_spacing(2, 0.01).unwrap();
        assert_eq!((g.nx, g.ny), (101, 101));
        assert!((g.dx * (g.nx - 1) as f64 - 1.0).abs() < 1e-12);
        let l = Geometry::from_spacing(1, 0.01).unwrap();
        assert_eq!((l.nx, l.ny), (101, 1));
        assert!(Geometry::from_spacing(2, 0.03).is_err());
        assert!(Geometry::from_spacing(3, 0.01).is_err());
        assert_eq!(g.nearest(0.5, 0.5).unwrap(), (50, 50));
        assert!(g.nearest(1.5, 0.5).is_err());
    }

    #[test]
    fn laplacian_of_constant_is_zero() {
        let geom = Geometry::square(11).unwrap();
        let lap = laplacian(&vec![3.7; geom.len()], geom, 1.0).unwrap();
        assert!(lap.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn laplacian_exact_on_quadratic_interior() {
        let geom = Geometry::square(21).unwrap();
        let f: Vec<f64> = (0..geom.len())
            .map(|k| geom.x(k % geom.nx).powi(2))
            .collect();
        let lap = laplacian(&f, geom, 1.0).unwrap();
        for j in 0..geom.ny {
            for i in 1..geom.nx - 1 {
                assert!((lap[j * geom.nx + i] - 2.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn laplacian_spike_weights() {
        let geom = Geometry {
            nx: 5,
            ny: 5,
            dx: 1.0,
            dy: 1.0,
        };
        let mut f = vec![0.0; 25];
        f[12] = 1.0;
        let lap = laplacian(&f, geom, 1.0).unwrap();
        assert_eq!(lap[12], -4.0);
        for k in [7, 11, 13, 17] {
            assert_eq!(lap[k], 1.0);
        }
        assert_eq!(lap.iter().filter(|&&x| x != 0.0).count(), 5);
    }

    #[test]
    fn laplacian_rejects_tiny_grid() {
        let geom = Geometry {
            nx: 2,
            ny: 5,
            dx: 1.0,
            dy: 1.0,
        };
        assert!(laplacian(&[0.0; 10], geom, 1.0).is_err());
    }

    #[test]
    fn uniform_equilibrium_is_unchanged() {
        let p = untreated();
        let e = cce_solve(&p).unwrap()[0].state;
        let g = FieldGrid::uniform(Geometry::square(21).unwrap(), e);
        let next = step(&g, &p, 1e-3).unwrap();
        for f in Field::ALL {
            for (a, b) in g.field(f).iter().zip(next.field(f)) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn uniform_grid_matches_scalar_euler() {
        let mut p = untreated();
        p.d32 = 0.3;
        p.d11 = 0.05;
        let s = State::new(0.4, 0.2, 0.7);
        let g = FieldGrid::uniform(Geometry::square(11).unwrap(), s);
        let dt = 1e-3;
        let next = step(&g, &p, dt).unwrap();
        let expect = s + reaction_rhs(&p, s).unwrap() * dt;
        for k in 0..g.u.len() {
            let got = State::new(next.u[k], next.v[k], next.w[k]);
            assert!((got - expect).max_norm() < 1e-14);
        }
        assert_eq!(next.t, dt);
    }

    #[test]
    fn stability_guard() {
        let p = untreated();
        let geom = Geometry::square(101).unwrap();
        let bound = Diffusion::from_params(&p).stability_bound(geom);
        assert!((bound - 1e-3).abs() < 1e-15);
        let g = FieldGrid::uniform(geom, State::new(0.5, 0.5, 0.5));
        assert!(Solver::new(g.clone(), p, Diffusion::from_params(&p), 1e-3).is_ok());
        let err = Solver::new(g, p, Diffusion::from_params(&p), 2e-3).unwrap_err();
        assert!(matches!(err, Error::StepTooLarge { .. }));
    }

    #[test]
    fn negativity_policies() {
        let p = untreated();
        let mut g = FieldGrid::uniform(Geometry::square(11).unwrap(), State::new(0.5, 0.5, 0.5));
        g.u[60] = -1e-3;
        let d = Diffusion::from_params(&p);
        let err = Solver::new(g.clone(), p, d, 1e-4)
            .unwrap()
            .step()
            .unwrap_err();
        assert!(matches!(err, Error::Negative { field: "u", .. }), "{err}");
        let mut warn = Solver::new(g, p, d, 1e-4)
            .unwrap()
            .with_policy(NegativityPolicy::Warn);
        warn.step().unwrap();
        assert_eq!(warn.negative_events(), 1);
    }

    #[test]
    fn blow_up_is_reported() {
        let p = untreated();
        let mut g = FieldGrid::uniform(Geometry::square(11).unwrap(), State::new(0.5, 0.5, 0.5));
        g.w[30] = f64::INFINITY;
        let err = step(&g, &p, 1e-4).unwrap_err();
        assert!(matches!(err, Error::BlowUp { .. }), "{err}");
    }

    fn diffusion_only(d32: f64) -> Diffusion {
        Diffusion {
            d11: 0.001,
            d22: 0.002,
            d33: 0.01,
            d32,
            tau_l: 1.0,
        }
    }

    #[test]
    fn pure_diffusion_conserves_mass() {
        let geom = Geometry::square(41).unwrap();
        let g = initial_condition(1, geom).unwrap();
        let before = Field::ALL.map(|f| g.mass(f));
        let d = diffusion_only(0.0);
        let dt = d.stability_bound(geom);
        let mut s = Solver::new(g, NoReaction, d, dt).unwrap();
        s.advance(10_000).unwrap();
        for f in Field::ALL {
            let after = s.grid().mass(f);
            let rel = (after - before[f.index()]).abs() / before[f.index()];
            assert!(rel < 1e-10, "{} drift {rel}", f.name());
        }
    }

    #[test]
    fn equilibrium_preserved_over_many_steps() {
        let p = untreated();
        let e = cce_solve(&p).unwrap()[0].state;
        let g = FieldGrid::uniform(Geometry::square(21).unwrap(), e);
        let mut s = Solver::new(g, p, Diffusion::from_params(&p), 1e-3).unwrap();
        s.advance(10_000).unwrap();
        for k in 0..s.grid().u.len() {
            assert!((s.grid().at(k % 21, k / 21) - e).max_norm() < 1e-10);
        }
    }

    #[test]
    fn gaussian_one_keeps_diagonal_symmetry() {
        let p = untreated();
        let geom = Geometry::square(41).unwrap();
        let g = initial_condition(1, geom).unwrap();
        let dt = 0.5 * Diffusion::from_params(&p).stability_bound(geom);
        let mut s = Solver::new(g, p, Diffusion::from_params(&p), dt)
            .unwrap()
            .with_policy(NegativityPolicy::Warn);
        s.advance(2000).unwrap();
        let g = s.grid();
        for j in 0..41 {
            for i in 0..41 {
                assert!((g.at(i, j) - g.at(j, i)).max_norm() < 1e-10);
            }
        }
    }

    #[test]
    fn parallel_and_sequential_are_bit_identical() {
        let p = untreated();
        let geom = Geometry::square(41).unwrap();
        let g = initial_condition(2, geom).unwrap();
        let run = |exec: Exec| {
            let mut s = Solver::new(g.clone(), p, Diffusion::from_params(&p), 1e-3)
                .unwrap()
                .with_exec(exec)
                .with_policy(NegativityPolicy::Warn);
            s.advance(500).unwrap();
            s.into_grid()
        };
        assert_eq!(run(Exec::Sequential), run(Exec::Parallel));
    }

    #[test]
    fn snapshots_follow_schedule() {
        let mut cfg = SimConfig::new(untreated());
        cfg.dx = 0.1;
        cfg.t_end = 1.0;
        cfg.negativity = NegativityPolicy::Warn;
        let cfg = cfg.snapshot_every(0.25).unwrap();
        let snaps = simulate(&cfg).unwrap();
        let times: Vec<f64> = snaps.iter().map(|s| s.time).collect();
        assert_eq!(times.len(), 4);
        assert!((times[3] - 1.0).abs() < 1e-12);
        let mut cfg = cfg;
        cfg.snapshot_times = vec![0.0, 0.5];
        let snaps = simulate(&cfg).unwrap();
        assert_eq!(snaps.len(), 3);
        assert_eq!(snaps[0].time, 0.0);
        cfg.snapshot_times = vec![0.5, 0.2];
        assert!(simulate(&cfg).is_err());
        cfg.snapshot_times = vec![];
        cfg.dt = 1.0;
        assert!(matches!(simulate(&cfg), Err(Error::StepTooLarge { .. })));
    }

    #[test]
    fn snapshot_stats_are_consistent() {
        let g = initial_condition(1, Geometry::square(11).unwrap()).unwrap();
        let s = Snapshot::of(&g);
        let v = s.stat(Field::V);
        assert_eq!(v.max, 1.0);
        assert!(v.min > 0.0 && v.variance > 0.0);
        assert!((v.mean - g.v.iter().sum::<f64>() / 121.0).abs() < 1e-15);
    }

    #[test]
    fn neumann_modes() {
        let pi2 = std::f64::consts::PI.powi(2);
        assert_eq!(neumann_mode_wavenumber_sq(0, 0), 0.0);
        assert!((neumann_mode_wavenumber_sq(1, 2) - 5.0 * pi2).abs() < 1e-12);
    }
}
