//! Pattern diagnostics on simulation snapshots: stationarity, spot/stripe
//! character and temporal oscillation at probe points.

use std::collections::VecDeque;
use std::fmt;

use crate::error::{Error, Result};
use crate::io::fmt_num;
use crate::ode::{local_maxima, regular_period};
use crate::pde::{Field, FieldStats, Snapshot};

/// Variance below which a field is classed as homogeneous.
pub const HOMOGENEOUS_VARIANCE: f64 = 1e-6;
/// Median isoperimetric ratio below which components count as spots.
pub const SPOT_RATIO: f64 = 25.0;
/// Median isoperimetric ratio above which components count as stripes.
pub const STRIPE_RATIO: f64 = 60.0;
/// Components smaller than this many nodes are ignored.
pub const MIN_COMPONENT_AREA: usize = 5;
/// Smallest swing between alternating extrema counted as oscillation.
pub const OSCILLATION_AMPLITUDE: f64 = 1e-4;
pub const MIN_PROBE_SNAPSHOTS: usize = 8;

/// Max over fields and nodes of `|b − a| / |t_b − t_a|`.
pub fn stationarity(a: &Snapshot, b: &Snapshot) -> Result<f64> {
    if !a.grid.same_shape(&b.grid) {
        return Err(Error::arg(format!(
            "snapshots have different grids ({}x{} vs {}x{})",
            a.grid.nx, a.grid.ny, b.grid.nx, b.grid.ny
        )));
    }
    let dt = (b.time - a.time).abs();
    if !(dt > 0.0) {
        return Err(Error::arg("snapshots must be taken at different times"));
    }
    let mut worst: f64 = 0.0;
    for f in Field::ALL {
        for (x, y) in a.grid.field(f).iter().zip(b.grid.field(f)) {
            worst = worst.max((y - x).abs());
        }
    }
    Ok(worst / dt)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatternClass {
    Homogeneous,
    Spots,
    Stripes,
    Mixed,
}

impl PatternClass {
    pub fn name(self) -> &'static str {
        match self {
            PatternClass::Homogeneous => "homogeneous",
            PatternClass::Spots => "spots",
            PatternClass::Stripes => "stripes",
            PatternClass::Mixed => "mixed",
        }
    }
}

impl fmt::Display for PatternClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Shape summary of the thresholded field.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSummary {
    pub class: PatternClass,
    /// Isoperimetric ratio perimeter²/area of each counted component.
    pub ratios: Vec<f64>,
    pub median_ratio: Option<f64>,
}

/// Classify a row-major `nx × ny` field by the shapes of its minority phase
/// after binarizing at the mean.
pub fn pattern_class(field: &[f64], nx: usize, ny: usize) -> Result<PatternClass> {
    Ok(pattern_components(field, nx, ny)?.class)
}

pub fn pattern_components(field: &[f64], nx: usize, ny: usize) -> Result<ComponentSummary> {
    if nx == 0 || ny == 0 || field.len() != nx * ny {
        return Err(Error::arg(format!(
            "field has {} values, expected {nx}x{ny}",
            field.len()
        )));
    }
    if field.iter().any(|x| !x.is_finite()) {
        return Err(Error::arg("field contains non-finite values"));
    }
    let stats = FieldStats::of(field);
    if stats.variance < HOMOGENEOUS_VARIANCE {
        return Ok(ComponentSummary {
            class: PatternClass::Homogeneous,
            ratios: Vec::new(),
            median_ratio: None,
        });
    }
    let high: Vec<bool> = field.iter().map(|&x| x > stats.mean).collect();
    let n_high = high.iter().filter(|&&b| b).count();
    let phase = n_high * 2 <= high.len();
    let mask: Vec<bool> = high.iter().map(|&b| b == phase).collect();

    let mut ratios: Vec<f64> = components(&mask, nx, ny)
        .into_iter()
        .filter(|c| c.area >= MIN_COMPONENT_AREA)
        .map(|c| (c.perimeter as f64).powi(2) / c.area as f64)
        .collect();
    ratios.sort_by(f64::total_cmp);
    let median_ratio = median(&ratios);
    let class = match median_ratio {
        Some(m) if m < SPOT_RATIO => PatternClass::Spots,
        Some(m) if m > STRIPE_RATIO => PatternClass::Stripes,
        _ => PatternClass::Mixed,
    };
    Ok(ComponentSummary {
        class,
        ratios,
        median_ratio,
    })
}

fn median(sorted: &[f64]) -> Option<f64> {
    let n = sorted.len();
    match n {
        0 => None,
        _ if n % 2 == 1 => Some(sorted[n / 2]),
        _ => Some(0.5 * (sorted[n / 2 - 1] + sorted[n / 2])),
    }
}

struct Component {
    area: usize,
    /// Count of node edges facing a node outside the component or the domain boundary.
    perimeter: usize,
}

/// 4-connected components of the `true` nodes.
fn components(mask: &[bool], nx: usize, ny: usize) -> Vec<Component> {
    let mut seen = vec![false; mask.len()];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let (mut area, mut perimeter) = (0, 0);
        while let Some(k) = queue.pop_front() {
            area += 1;
            let (i, j) = (k % nx, k / nx);
            let neighbours = [
                (i > 0).then(|| k - 1),
                (i + 1 < nx).then(|| k + 1),
                (j > 0).then(|| k - nx),
                (j + 1 < ny).then(|| k + nx),
            ];
            for n in neighbours {
                match n {
                    Some(n) if mask[n] => {
                        if !seen[n] {
                            seen[n] = true;
                            queue.push_back(n);
                        }
                    }
                    _ => perimeter += 1,
                }
            }
        }
        out.push(Component { area, perimeter });
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSeries {
    /// Node actually sampled.
    pub cell: (usize, usize),
    pub times: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    pub oscillating: bool,
    pub period: Option<f64>,
}

/// Nearest-node time series at `(x, y)` with oscillation detection on `v`.
pub fn probe_series(snapshots: &[Snapshot], point: (f64, f64)) -> Result<ProbeSeries> {
    if snapshots.len() < MIN_PROBE_SNAPSHOTS {
        return Err(Error::arg(format!(
            "probe needs at least {MIN_PROBE_SNAPSHOTS} snapshots, got {}",
            snapshots.len()
        )));
    }
    let first = &snapshots[0].grid;
    if snapshots.iter().any(|s| !s.grid.same_shape(first)) {
        return Err(Error::arg("snapshots have different grids"));
    }
    let (i, j) = first.geometry().nearest(point.0, point.1)?;
    let k = j * first.nx + i;
    let times: Vec<f64> = snapshots.iter().map(|s| s.time).collect();
    let u = snapshots.iter().map(|s| s.grid.u[k]).collect();
    let v: Vec<f64> = snapshots.iter().map(|s| s.grid.v[k]).collect();
    let w = snapshots.iter().map(|s| s.grid.w[k]).collect();
    let (oscillating, period) = detect_oscillation(&times, &v);
    Ok(ProbeSeries {
        cell: (i, j),
        times,
        u,
        v,
        w,
        oscillating,
        period,
    })
}

/// Oscillation flag and period for the second half of a sampled signal.
pub fn detect_oscillation(times: &[f64], values: &[f64]) -> (bool, Option<f64>) {
    let start = values.len() / 2;
    let (t, x) = (&times[start..], &values[start..]);
    if x.len() < 3 {
        return (false, None);
    }
    let resid = detrend(t, x);
    let turns = turning_points(&resid, OSCILLATION_AMPLITUDE);
    if turns < 3 {
        return (false, None);
    }
    (true, regular_period(&local_maxima(t, &resid), 0.05))
}

/// Residual of a least-squares line fit.
fn detrend(t: &[f64], x: &[f64]) -> Vec<f64> {
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let xm = x.iter().sum::<f64>() / n;
    let sxx: f64 = t.iter().map(|ti| (ti - tm).powi(2)).sum();
    let sxy: f64 = t.iter().zip(x).map(|(ti, xi)| (ti - tm) * (xi - xm)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    t.iter()
        .zip(x)
        .map(|(ti, xi)| xi - xm - slope * (ti - tm))
        .collect()
}

/// Number of alternating extrema separated by swings larger than `threshold`.
fn turning_points(x: &[f64], threshold: f64) -> usize {
    let mut turns = 0;
    // +1 while tracking a rise, -1 while tracking a fall, 0 before the first swing.
    let mut dir = 0i8;
    let (mut lo, mut hi) = (x[0], x[0]);
    for &xi in &x[1..] {
        match dir {
            0 => {
                lo = lo.min(xi);
                hi = hi.max(xi);
                if xi - lo > threshold {
                    dir = 1;
                    hi = xi;
                } else if hi - xi > threshold {
                    dir = -1;
                    lo = xi;
                }
            }
            1 => {
                if xi > hi {
                    hi = xi;
                } else if hi - xi > threshold {
                    turns += 1;
                    dir = -1;
                    lo = xi;
                }
            }
            _ => {
                if xi < lo {
                    lo = xi;
                } else if xi - lo > threshold {
                    turns += 1;
                    dir = 1;
                    hi = xi;
                }
            }
        }
    }
    turns
}

/// Summary of a simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternReport {
    pub time: f64,
    pub stats: [FieldStats; 3],
    /// Rate between the last two snapshots, if there are two.
    pub stationarity: Option<f64>,
    /// Class of each field in the final snapshot.
    pub classes: [PatternClass; 3],
    pub median_ratio_v: Option<f64>,
    pub oscillating: Option<bool>,
    pub period: Option<f64>,
    pub probe: (f64, f64),
}

impl PatternReport {
    pub fn from_snapshots(snapshots: &[Snapshot], probe: (f64, f64)) -> Result<Self> {
        let last = snapshots
            .last()
            .ok_or_else(|| Error::arg("no snapshots to report on"))?;
        let stationarity = match snapshots.len() {
            n if n >= 2 => Some(stationarity(&snapshots[n - 2], last)?),
            _ => None,
        };
        let g = &last.grid;
        let mut classes = [PatternClass::Homogeneous; 3];
        let mut median_ratio_v = None;
        for f in Field::ALL {
            let summary = pattern_components(g.field(f), g.nx, g.ny)?;
            if f == Field::V {
                median_ratio_v = summary.median_ratio;
            }
            classes[f as usize] = summary.class;
        }
        let (oscillating, period) = if snapshots.len() >= MIN_PROBE_SNAPSHOTS {
            let p = probe_series(snapshots, probe)?;
            (Some(p.oscillating), p.period)
        } else {
            (None, None)
        };
        Ok(PatternReport {
            time: last.time,
            stats: last.stats,
            stationarity,
            classes,
            median_ratio_v,
            oscillating,
            period,
            probe,
        })
    }

    pub fn class(&self, f: Field) -> PatternClass {
        self.classes[f as usize]
    }

    pub fn stat(&self, f: Field) -> FieldStats {
        self.stats[f as usize]
    }

    fn pairs(&self) -> Vec<(String, String)> {
        let opt = |x: Option<f64>| x.map_or_else(|| "none".to_string(), fmt_num);
        let mut out = vec![("time".to_string(), fmt_num(self.time))];
        for f in Field::ALL {
            let s = self.stat(f);
            let n = f.name();
            out.push((format!("{n}_min"), fmt_num(s.min)));
            out.push((format!("{n}_max"), fmt_num(s.max)));
            out.push((format!("{n}_mean"), fmt_num(s.mean)));
            out.push((format!("{n}_variance"), fmt_num(s.variance)));
            out.push((format!("{n}_class"), self.class(f).to_string()));
        }
        out.push(("stationarity_rate".into(), opt(self.stationarity)));
        out.push((
            "median_isoperimetric_ratio_v".into(),
            opt(self.median_ratio_v),
        ));
        out.push((
            "class_thresholds".into(),
            format!("spots<{SPOT_RATIO},stripes>{STRIPE_RATIO},homogeneous_variance<{HOMOGENEOUS_VARIANCE:e}"),
        ));
        out.push(("probe_x".into(), fmt_num(self.probe.0)));
        out.push(("probe_y".into(), fmt_num(self.probe.1)));
        out.push((
            "oscillating".into(),
            self.oscillating
                .map_or_else(|| "none".to_string(), |b| b.to_string()),
        ));
        out.push(("period".into(), opt(self.period)));
        out
    }

    /// Flat `key=value` block, one pair per line.
    pub fn to_kv(&self) -> String {
        self.pairs()
            .into_iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    pub fn csv_header(&self) -> String {
        self.pairs()
            .into_iter()
            .map(|(k, _)| k)
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn csv_row(&self) -> String {
        // The threshold description contains commas.
        self.pairs()
            .into_iter()
            .map(|(_, v)| {
                if v.contains(',') {
                    format!("\"{v}\"")
                } else {
                    v
                }
            })
            .collect::<Vec<_>>()
            .join(",")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::State;
    use crate::pde::{FieldGrid, Geometry};
    use proptest::prelude::*;

    fn snapshot(t: f64, fill: impl Fn(usize, usize) -> f64) -> Snapshot {
        let geom = Geometry::square(21).unwrap();
        let mut g = FieldGrid::uniform(geom, State::new(0.0, 0.0, 0.0));
        for j in 0..21 {
            for i in 0..21 {
                let x = fill(i, j);
                g.u[j * 21 + i] = x;
                g.v[j * 21 + i] = 2.0 * x;
                g.w[j * 21 + i] = -x;
            }
        }
        g.t = t;
        Snapshot::of(&g)
    }

    fn discs(n: usize) -> Vec<f64> {
        let mut f = vec![0.0; n * n];
        for cy in [15.0, 45.0, 75.0] {
            for cx in [15.0, 45.0, 75.0] {
                for j in 0..n {
                    for i in 0..n {
                        let (dx, dy) = (i as f64 - cx, j as f64 - cy);
                        if dx * dx + dy * dy <= 64.0 {
                            f[j * n + i] = 1.0;
                        }
                    }
                }
            }
        }
        f
    }

    fn bands(n: usize, width: usize) -> Vec<f64> {
        (0..n * n)
            .map(|k| {
                if (k % n / width).is_multiple_of(2) {
                    1.0
                } else {
                    0.0
                }
            })
            .collect()
    }

    #[test]
    fn identical_snapshots_are_stationary() {
        let a = snapshot(1.0, |i, j| (i + j) as f64);
        let b = snapshot(2.0, |i, j| (i + j) as f64);
        assert_eq!(stationarity(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn stationarity_symmetry_and_scaling() {
        let a = snapshot(1.0, |i, _| i as f64);
        let b = snapshot(3.0, |i, _| 1.5 * i as f64);
        let r = stationarity(&a, &b).unwrap();
        assert_eq!(r, stationarity(&b, &a).unwrap());
        // v changes most: 2 * 0.5 * 20 over two time units.
        assert!((r - 20.0 / 2.0).abs() < 1e-12);
        let c = snapshot(5.0, |i, _| 1.5 * i as f64);
        let a2 = snapshot(1.0, |i, _| i as f64);
        assert!((stationarity(&a2, &c).unwrap() - r / 2.0).abs() < 1e-12);
        assert!(stationarity(&a, &a).is_err());
    }

    #[test]
    fn stationarity_rejects_mismatched_grids() {
        let a = snapshot(1.0, |_, _| 0.0);
        let g = FieldGrid::uniform(Geometry::square(11).unwrap(), State::new(0.0, 0.0, 0.0));
        let mut b = Snapshot::of(&g);
        b.time = 2.0;
        assert!(stationarity(&a, &b).is_err());
    }

    #[test]
    fn constant_field_is_homogeneous() {
        assert_eq!(
            pattern_class(&[0.3; 100], 10, 10).unwrap(),
            PatternClass::Homogeneous
        );
    }

    #[test]
    fn discs_are_spots() {
        let s = pattern_components(&discs(91), 91, 91).unwrap();
        assert_eq!(s.class, PatternClass::Spots, "{:?}", s.median_ratio);
        assert_eq!(s.ratios.len(), 9);
    }

    #[test]
    fn bands_are_stripes() {
        for width in [4, 7] {
            let s = pattern_components(&bands(101, width), 101, 101).unwrap();
            assert_eq!(
                s.class,
                PatternClass::Stripes,
                "width {width}: {:?}",
                s.median_ratio
            );
        }
    }

    #[test]
    fn tiny_components_are_ignored() {
        let mut f = discs(91);
        f[0] = 1.0;
        f[90] = 1.0;
        let s = pattern_components(&f, 91, 91).unwrap();
        assert_eq!(s.ratios.len(), 9);
    }

    #[test]
    fn pattern_class_rejects_bad_input() {
        assert!(pattern_class(&[0.0; 5], 2, 2).is_err());
        assert!(pattern_class(&[f64::NAN; 4], 2, 2).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn class_invariant_under_affine_maps(shift in -5.0f64..5.0, scale in 0.1f64..10.0, width in 3usize..9) {
            for f in [discs(91), bands(91, width)] {
                let base = pattern_class(&f, 91, 91).unwrap();
                let mapped: Vec<f64> = f.iter().map(|x| scale * x + shift).collect();
                prop_assert_eq!(pattern_class(&mapped, 91, 91).unwrap(), base);
            }
        }

        #[test]
        fn probe_period_invariant_under_time_shift(shift in -100.0f64..100.0) {
            let snaps = sine_snapshots(4.0, 0.0);
            let shifted = sine_snapshots(4.0, shift);
            let a = probe_series(&snaps, (0.5, 0.5)).unwrap().period.unwrap();
            let b = probe_series(&shifted, (0.5, 0.5)).unwrap().period.unwrap();
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    fn sine_snapshots(period: f64, t0: f64) -> Vec<Snapshot> {
        (0..160)
            .map(|k| {
                let t = t0 + 0.25 * k as f64;
                let amp = (2.0 * std::f64::consts::PI * (t - t0) / period).sin();
                snapshot(t, |_, _| 0.4 + 0.01 * amp)
            })
            .collect()
    }

    #[test]
    fn sinusoidal_probe_is_flagged() {
        let p = probe_series(&sine_snapshots(4.0, 0.0), (0.5, 0.5)).unwrap();
        assert!(p.oscillating);
        let period = p.period.unwrap();
        assert!((period - 4.0).abs() < 0.08, "{period}");
    }

    #[test]
    fn stationary_probe_is_not_flagged() {
        let snaps: Vec<Snapshot> = (0..20)
            .map(|k| {
                snapshot(k as f64, |i, j| {
                    0.3 + 1e-3 * (i * j) as f64 + 1e-7 * k as f64
                })
            })
            .collect();
        let p = probe_series(&snaps, (0.25, 0.75)).unwrap();
        assert!(!p.oscillating);
        assert_eq!(p.cell, (5, 15));
    }

    #[test]
    fn decaying_trend_is_not_oscillation() {
        let snaps: Vec<Snapshot> = (0..40)
            .map(|k| snapshot(k as f64, |_, _| (-0.1 * k as f64).exp()))
            .collect();
        assert!(!probe_series(&snaps, (0.5, 0.5)).unwrap().oscillating);
    }

    #[test]
    fn probe_errors() {
        let snaps = sine_snapshots(4.0, 0.0);
        assert!(probe_series(&snaps[..7], (0.5, 0.5)).is_err());
        assert!(probe_series(&snaps, (1.5, 0.5)).is_err());
    }

    #[test]
    fn report_serialization() {
        let snaps = sine_snapshots(4.0, 0.0);
        let r = PatternReport::from_snapshots(&snaps, (0.5, 0.5)).unwrap();
        assert_eq!(r.oscillating, Some(true));
        assert_eq!(r.class(Field::V), PatternClass::Homogeneous);
        let kv = r.to_kv();
        assert!(kv.contains("v_class=homogeneous\n"));
        assert!(kv.contains("oscillating=true\n"));
        assert!(kv.contains("class_thresholds=spots<25,stripes>60"));
        let header_cols = r.csv_header().split(',').count();
        assert_eq!(header_cols, r.pairs().len());
        assert!(r.csv_row().contains("\"spots<25,stripes>60"));
    }
}
