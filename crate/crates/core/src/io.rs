//! Output formats: CSV tables, binary snapshots, heatmap PNGs and run manifests.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::equilibria::{Equilibrium, RegionGrid};
use crate::error::{Error, Result};
use crate::kinetics::ModelParams;
use crate::ode::Trajectory;
use crate::pde::{Field, FieldGrid, Snapshot};
use crate::stability::{DispersionResult, HopfResult};

/// Format with 9 significant digits; fixed notation for moderate magnitudes.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.8e}");
    let exp: i32 = sci[sci.find('e').expect("exponent") + 1..]
        .parse()
        .expect("integer exponent");
    if (-4..9).contains(&exp) {
        format!("{:.*}", (8 - exp) as usize, x)
    } else {
        sci
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// One row per node: `x, y, value`.
pub fn write_field_csv(path: &Path, grid: &FieldGrid, field: Field) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "x,y,{}", field.name())?;
    let geom = grid.geometry();
    let data = grid.field(field);
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            writeln!(
                out,
                "{},{},{}",
                fmt_num(geom.x(i)),
                fmt_num(geom.y(j)),
                fmt_num(data[j * grid.nx + i])
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_dispersion_csv(path: &Path, d: &DispersionResult) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "k,growth,frequency")?;
    for s in &d.samples {
        writeln!(
            out,
            "{},{},{}",
            fmt_num(s.k),
            fmt_num(s.growth),
            fmt_num(s.frequency)
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_hopf_csv(path: &Path, h: &HopfResult) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "p2_critical,eig_re,eig_im,bracket_lo,bracket_hi,u,v,w")?;
    let e = h.equilibrium;
    writeln!(
        out,
        "{},{},{},{},{},{},{},{}",
        fmt_num(h.p2_critical),
        fmt_num(h.eigenpair.0.re),
        fmt_num(h.eigenpair.0.im),
        fmt_num(h.bracket.0),
        fmt_num(h.bracket.1),
        fmt_num(e.u),
        fmt_num(e.v),
        fmt_num(e.w)
    )?;
    out.flush()?;
    Ok(())
}

pub fn write_trajectory_csv(path: &Path, tr: &Trajectory) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "t,u,v,w")?;
    for (t, s) in tr.times.iter().zip(&tr.states) {
        writeln!(
            out,
            "{},{},{},{}",
            fmt_num(*t),
            fmt_num(s.u),
            fmt_num(s.v),
            fmt_num(s.w)
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_region_csv(path: &Path, r: &RegionGrid) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "p2,c,exists")?;
    for (i, p2) in r.p2.iter().enumerate() {
        for (j, c) in r.c.iter().enumerate() {
            writeln!(out, "{},{},{}", fmt_num(*p2), fmt_num(*c), r.at(i, j))?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_equilibria_csv(path: &Path, eqs: &[Equilibrium]) -> Result<()> {
    let mut out = create(path)?;
    writeln!(
        out,
        "kind,u,v,w,lambda1_re,lambda1_im,lambda2_re,lambda2_im,lambda3_re,lambda3_im,stability"
    )?;
    for e in eqs {
        let s = e.state;
        let mut row = vec![
            e.kind.label().to_string(),
            fmt_num(s.u),
            fmt_num(s.v),
            fmt_num(s.w),
        ];
        for l in e.eigenvalues {
            row.push(fmt_num(l.re));
            row.push(fmt_num(l.im));
        }
        row.push(e.stability.label().to_string());
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}

/// Little-endian layout: `nx, ny` (u64), `dx, dy, t` (f64), then the `u`, `v`
/// and `w` arrays in row-major order.
pub fn write_snapshot_bin(path: &Path, grid: &FieldGrid) -> Result<()> {
    let mut out = create(path)?;
    out.write_all(&(grid.nx as u64).to_le_bytes())?;
    out.write_all(&(grid.ny as u64).to_le_bytes())?;
    for x in [grid.dx, grid.dy, grid.t] {
        out.write_all(&x.to_le_bytes())?;
    }
    for f in Field::ALL {
        for x in grid.field(f) {
            out.write_all(&x.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_snapshot_bin(path: &Path) -> Result<FieldGrid> {
    let mut r = BufReader::new(File::open(path)?);
    let mut buf = [0u8; 8];
    let mut next = |r: &mut BufReader<File>| -> Result<[u8; 8]> {
        r.read_exact(&mut buf)?;
        Ok(buf)
    };
    let nx = u64::from_le_bytes(next(&mut r)?) as usize;
    let ny = u64::from_le_bytes(next(&mut r)?) as usize;
    let dx = f64::from_le_bytes(next(&mut r)?);
    let dy = f64::from_le_bytes(next(&mut r)?);
    let t = f64::from_le_bytes(next(&mut r)?);
    let n = nx
        .checked_mul(ny)
        .filter(|&n| n > 0 && n <= 1 << 28)
        .ok_or_else(|| Error::arg(format!("implausible snapshot dimensions {nx}x{ny}")))?;
    let mut fields = [Vec::new(), Vec::new(), Vec::new()];
    for f in &mut fields {
        f.reserve_exact(n);
        for _ in 0..n {
            f.push(f64::from_le_bytes(next(&mut r)?));
        }
    }
    let [u, v, w] = fields;
    Ok(FieldGrid {
        nx,
        ny,
        dx,
        dy,
        u,
        v,
        w,
        t,
    })
}

const VIRIDIS: [[u8; 3]; 9] = [
    [68, 1, 84],
    [71, 44, 122],
    [59, 81, 139],
    [44, 113, 142],
    [33, 144, 141],
    [39, 173, 129],
    [92, 200, 99],
    [170, 220, 50],
    [253, 231, 37],
];

/// Viridis-like colour for `s ∈ [0, 1]`.
pub fn colormap(s: f64) -> [u8; 3] {
    let s = if s.is_finite() {
        s.clamp(0.0, 1.0)
    } else {
        0.0
    };
    let pos = s * (VIRIDIS.len() - 1) as f64;
    let k = (pos.floor() as usize).min(VIRIDIS.len() - 2);
    let frac = pos - k as f64;
    let (a, b) = (VIRIDIS[k], VIRIDIS[k + 1]);
    [0, 1, 2].map(|c| (a[c] as f64 + frac * (b[c] as f64 - a[c] as f64)).round() as u8)
}

fn normalize(data: &[f64]) -> impl Fn(f64) -> f64 {
    let lo = data.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    move |x| if span > 0.0 { (x - lo) / span } else { 0.5 }
}

fn save_rgb(path: &Path, width: usize, height: usize, pixels: Vec<u8>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let img = image::RgbImage::from_raw(width as u32, height as u32, pixels)
        .ok_or_else(|| Error::Image("pixel buffer does not match dimensions".into()))?;
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::Image(e.to_string()))
}

/// Heatmap of one field, min-max normalized, with y increasing upwards.
pub fn write_field_png(path: &Path, grid: &FieldGrid, field: Field) -> Result<()> {
    let data = grid.field(field);
    let norm = normalize(data);
    let mut pixels = Vec::with_capacity(data.len() * 3);
    for j in (0..grid.ny).rev() {
        for i in 0..grid.nx {
            pixels.extend_from_slice(&colormap(norm(data[j * grid.nx + i])));
        }
    }
    save_rgb(path, grid.nx, grid.ny, pixels)
}

/// Space-time image of a 1D run: one row per snapshot, time increasing downwards.
pub fn write_spacetime_png(path: &Path, snapshots: &[Snapshot], field: Field) -> Result<()> {
    let first = snapshots
        .first()
        .ok_or_else(|| Error::arg("no snapshots"))?;
    if first.grid.ny != 1 || snapshots.iter().any(|s| !s.grid.same_shape(&first.grid)) {
        return Err(Error::arg(
            "space-time images need 1D snapshots on a common grid",
        ));
    }
    let all: Vec<f64> = snapshots
        .iter()
        .flat_map(|s| s.grid.field(field).iter().copied())
        .collect();
    let norm = normalize(&all);
    let pixels = all.iter().flat_map(|&x| colormap(norm(x))).collect();
    save_rgb(path, first.grid.nx, snapshots.len(), pixels)
}

/// Provenance record written before a run starts.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub subcommand: String,
    pub params: ModelParams,
    pub config_path: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Extra solver or scan settings as `key=value` pairs.
    pub settings: Vec<(String, String)>,
    /// Full command line, for re-running.
    pub command_line: Vec<String>,
}

impl RunManifest {
    pub const FILE_NAME: &'static str = "manifest.txt";

    pub fn render(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("subcommand={}\n", self.subcommand));
        s.push_str(&format!("version={}\n", env!("CARGO_PKG_VERSION")));
        s.push_str("determinism=seedless\n");
        s.push_str(&format!(
            "config={}\n",
            self.config_path
                .as_ref()
                .map_or("none".to_string(), |p| p.display().to_string())
        ));
        s.push_str(&format!("output_dir={}\n", self.output_dir.display()));
        s.push_str(&format!("command_line={}\n", self.command_line.join(" ")));
        for (k, v) in self.params.entries() {
            s.push_str(&format!("param.{k}={}\n", fmt_num(v)));
        }
        for (k, v) in &self.settings {
            s.push_str(&format!("{k}={v}\n"));
        }
        s
    }

    /// Create the output directory, check it is writable and write the manifest.
    pub fn write(&self) -> Result<PathBuf> {
        fs::create_dir_all(&self.output_dir)?;
        let path = self.output_dir.join(Self::FILE_NAME);
        fs::write(&path, self.render())?;
        Ok(path)
    }
}
