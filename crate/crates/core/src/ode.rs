//! Fixed-step RK4 integration of the diffusion-free system `dU/dt = F(U)`
//! and limit-cycle measurements on the resulting trajectories.

use crate::error::{Error, Result};
use crate::kinetics::{reaction_rhs, ModelParams, State};

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_TRANSIENT_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub params: ModelParams,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> State {
        *self
            .states
            .last()
            .expect("trajectory has at least the initial state")
    }

    pub fn component(&self, idx: usize) -> Vec<f64> {
        self.states.iter().map(|s| s.to_array()[idx]).collect()
    }
}

fn rk4_step(p: &ModelParams, y: State, dt: f64) -> Result<State> {
    let k1 = reaction_rhs(p, y)?;
    let k2 = reaction_rhs(p, y + k1 * (0.5 * dt))?;
    let k3 = reaction_rhs(p, y + k2 * (0.5 * dt))?;
    let k4 = reaction_rhs(p, y + k3 * dt)?;
    Ok(y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))
}

/// Integrate to `t_end`, recording every step.
pub fn integrate(p: &ModelParams, u0: State, t_end: f64, dt: f64) -> Result<Trajectory> {
    integrate_strided(p, u0, t_end, dt, 1)
}

/// Integrate to `t_end`, recording every `stride`-th step plus the final state.
///
/// The step count is `round(t_end / dt)`; the last step is shortened or
/// lengthened by at most half a step so the trajectory ends exactly at `t_end`.
pub fn integrate_strided(
    p: &ModelParams,
    u0: State,
    t_end: f64,
    dt: f64,
    stride: usize,
) -> Result<Trajectory> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::arg(format!("dt must be positive, got {dt}")));
    }
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::arg(format!("t_end must be positive, got {t_end}")));
    }
    if !u0.is_finite() {
        return Err(Error::arg("initial state is not finite"));
    }
    if stride == 0 {
        return Err(Error::arg("stride must be at least 1"));
    }
    let n = ((t_end / dt).round() as usize).max(1);
    let h = t_end / n as f64;
    let cap = n / stride + 2;
    let mut times = Vec::with_capacity(cap);
    let mut states = Vec::with_capacity(cap);
    times.push(0.0);
    states.push(u0);
    let mut y = u0;
    for i in 1..=n {
        let t_prev = (i - 1) as f64 * h;
        let next = rk4_step(p, y, h).map_err(|_| blow_up(t_prev, y))?;
        if !next.is_finite() {
            return Err(blow_up(t_prev, y));
        }
        y = next;
        if i % stride == 0 || i == n {
            times.push(i as f64 * h);
            states.push(y);
        }
    }
    Ok(Trajectory {
        times,
        states,
        params: *p,
    })
}

fn blow_up(last_valid: f64, y: State) -> Error {
    let field = if !y.u.is_finite() {
        "u"
    } else if !y.v.is_finite() {
        "v"
    } else {
        "w"
    };
    Error::BlowUp {
        time: last_valid,
        cell: 0,
        field,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleMetrics {
    pub period: f64,
    /// Max minus min of each component over the last full period.
    pub amplitude: State,
    /// Time average of each component over the last full period.
    pub mean: State,
}

/// Interpolated local maxima `(time, value)` of a sampled signal.
pub(crate) fn local_maxima(times: &[f64], values: &[f64]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for i in 1..values.len().saturating_sub(1) {
        let (a, b, c) = (values[i - 1], values[i], values[i + 1]);
        if b > a && b >= c {
            // Parabola through the three samples (uniform spacing assumed locally).
            let denom = a - 2.0 * b + c;
            let offset = if denom != 0.0 {
                0.5 * (a - c) / denom
            } else {
                0.0
            };
            let offset = offset.clamp(-0.5, 0.5);
            let h = 0.5 * (times[i + 1] - times[i - 1]);
            let t = times[i] + offset * h;
            let v = b - 0.25 * (a - c) * offset;
            out.push((t, v));
        }
    }
    out
}

/// Mean spacing of successive maxima, if there are at least three with
/// spacings that vary by less than `max_cv` (coefficient of variation).
pub(crate) fn regular_period(peaks: &[(f64, f64)], max_cv: f64) -> Option<f64> {
    if peaks.len() < 3 {
        return None;
    }
    let gaps: Vec<f64> = peaks.windows(2).map(|w| w[1].0 - w[0].0).collect();
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    if !(mean > 0.0) {
        return None;
    }
    let var = gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / gaps.len() as f64;
    (var.sqrt() / mean < max_cv).then_some(mean)
}

/// Smallest per-cycle amplitude treated as a genuine oscillation.
const MIN_CYCLE_AMPLITUDE: f64 = 1e-6;
/// Cycle-to-cycle amplitude ratio below which the oscillation counts as decaying.
const DECAY_RATIO: f64 = 0.98;

/// Period, amplitude and mean of a sustained oscillation in the trajectory tail.
///
/// Returns `None` when the tail (after dropping `transient_fraction` of the
/// samples) has fewer than three regularly spaced maxima of `v`, or when the
/// oscillation is decaying towards a fixed point.
pub fn cycle_metrics(tr: &Trajectory, transient_fraction: f64) -> Result<Option<CycleMetrics>> {
    if !(0.0..1.0).contains(&transient_fraction) {
        return Err(Error::arg(format!(
            "transient fraction must lie in [0, 1), got {transient_fraction}"
        )));
    }
    let cut = (tr.len() as f64 * transient_fraction).floor() as usize;
    if tr.len() < 16 || tr.len() - cut < 16 {
        return Err(Error::arg(format!(
            "trajectory too short for cycle detection ({} samples after the transient cut)",
            tr.len().saturating_sub(cut)
        )));
    }
    let times = &tr.times[cut..];
    let states = &tr.states[cut..];
    let v: Vec<f64> = states.iter().map(|s| s.v).collect();
    let peaks = local_maxima(times, &v);
    let Some(period) = regular_period(&peaks, 0.05) else {
        return Ok(None);
    };

    // Peak-to-trough amplitude of each complete cycle.
    let peak_idx: Vec<usize> = peaks
        .iter()
        .map(|(t, _)| times.partition_point(|x| x < t).min(times.len() - 1))
        .collect();
    let amps: Vec<f64> = peak_idx
        .windows(2)
        .map(|w| {
            let seg = &v[w[0]..=w[1]];
            let max = seg.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = seg.iter().copied().fold(f64::INFINITY, f64::min);
            max - min
        })
        .collect();
    let last = *amps.last().expect("three peaks give two cycles");
    if last < MIN_CYCLE_AMPLITUDE {
        return Ok(None);
    }
    if amps.len() >= 2 && last / amps[amps.len() - 2] < DECAY_RATIO {
        return Ok(None);
    }

    let (a, b) = (peak_idx[peak_idx.len() - 2], peak_idx[peak_idx.len() - 1]);
    let window = &states[a..=b];
    let wt = &times[a..=b];
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for s in window {
        for (i, x) in s.to_array().into_iter().enumerate() {
            lo[i] = lo[i].min(x);
            hi[i] = hi[i].max(x);
        }
    }
    // Trapezoidal time average.
    let mut integral = [0.0; 3];
    for k in 1..window.len() {
        let dt = wt[k] - wt[k - 1];
        let (p, q) = (window[k - 1].to_array(), window[k].to_array());
        for i in 0..3 {
            integral[i] += 0.5 * dt * (p[i] + q[i]);
        }
    }
    let span = wt[wt.len() - 1] - wt[0];
    let mean = integral.map(|x| x / span);
    Ok(Some(CycleMetrics {
        period,
        amplitude: State::new(hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]),
        mean: State::from_array(mean),
    }))
}
