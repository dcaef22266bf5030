//! Command-line front end: parameter resolution, subcommands and exit codes.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{Entry, KvFile};
use crate::equilibria::{
    cce_solve, cfe, existence_region_scan, lin_grid, log_grid, Equilibrium, ScanRule,
};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::io::{self, fmt_num, RunManifest};
use crate::kinetics::{ModelParams, Scenario, State};
use crate::metrics::{probe_series, PatternReport};
use crate::ode::{cycle_metrics, integrate_strided};
use crate::pde::{self, Diffusion, Field, InitialData, NegativityPolicy, SimConfig, Snapshot};
use crate::stability::{
    critical_d32, determinant_threshold_d32, dispersion_relation, growth_max_at, hopf_scan,
};
use crate::Stability;

pub const EXIT_OK: i32 = 0;
pub const EXIT_NO_RESULT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Environment variable holding the default output directory.
pub const OUT_DIR_ENV: &str = "IMMUNO_TURING_OUT";

/// Reference Turing thresholds on d32 for the Table 1 scenarios.
const REFERENCE_D32_UNTREATED: f64 = -1.0668;
const REFERENCE_D32_TREATED: f64 = -1.45136;

#[derive(Debug, Parser)]
#[command(
    name = "immuno-turing",
    version,
    about = "Tumor/effector/IL-2 cross-diffusion model analysis"
)]
pub struct Cli {
    /// Directory for output files (one subdirectory per subcommand).
    #[arg(long, global = true, env = OUT_DIR_ENV, default_value = "out")]
    pub out_dir: PathBuf,

    /// Run data-parallel kernels on a single thread.
    #[arg(long, global = true)]
    pub sequential: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List the cancer-free and coexistence equilibria with their eigenvalues.
    Equilibria(EquilibriaArgs),
    /// Dispersion relation of J - D k² at the coexistence equilibrium.
    Dispersion(DispersionArgs),
    /// Locate the Hopf point in p2 along the coexistence branch.
    Hopf(HopfArgs),
    /// Routh existence region over the (p2, c) plane.
    Region(RegionArgs),
    /// Explicit finite-difference simulation of the full system.
    Simulate(SimulateArgs),
    /// RK4 integration of the diffusion-free system.
    Ode(OdeArgs),
}

macro_rules! param_flags {
    ($($field:ident => $key:literal),* $(,)?) => {
        /// Model parameters: `--config` file, then `--scenario`, then per-parameter flags.
        #[derive(Debug, Clone, Default, Args)]
        pub struct ParamArgs {
            /// key=value file with parameter (and, for simulate, solver) keys.
            #[arg(long)]
            pub config: Option<PathBuf>,
            /// Source terms preset: untreated (s1 = s3 = 0) or treated.
            #[arg(long)]
            pub scenario: Option<Scenario>,
            $(
                #[arg(long = $key, allow_negative_numbers = true, value_name = "VALUE")]
                pub $field: Option<f64>,
            )*
        }

        impl ParamArgs {
            fn overrides(&self) -> Vec<(&'static str, f64)> {
                let mut out = Vec::new();
                $(
                    if let Some(v) = self.$field {
                        out.push((stringify!($field), v));
                    }
                )*
                out
            }
        }
    };
}

param_flags! {
    c => "c", mu1 => "mu1", mu3 => "mu3", p1 => "p1", p2 => "p2", p3 => "p3",
    g1 => "g1", g2 => "g2", g3 => "g3", s1 => "s1", s3 => "s3", r2 => "r2", b => "b",
    d11 => "d11", d22 => "d22", d33 => "d33", d32 => "d32", tau_l => "tau-l",
}

impl ValueEnum for Scenario {
    fn value_variants<'a>() -> &'a [Self] {
        &[Scenario::Untreated, Scenario::Treated]
    }

    fn to_possible_value(&self) -> Option<clap::builder::PossibleValue> {
        Some(clap::builder::PossibleValue::new(self.name()))
    }
}

#[derive(Debug, Args)]
pub struct EquilibriaArgs {
    #[command(flatten)]
    pub params: ParamArgs,
}

#[derive(Debug, Args)]
pub struct DispersionArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Largest wavenumber sampled.
    #[arg(long, default_value_t = 300.0)]
    pub k_max: f64,
    /// Wavenumber spacing.
    #[arg(long, default_value_t = 0.5)]
    pub k_step: f64,
    /// Bisect for the d32 threshold where the maximal growth rate changes sign.
    #[arg(long)]
    pub find_critical: bool,
    #[arg(long, default_value_t = -2.0, allow_negative_numbers = true)]
    pub d32_lo: f64,
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub d32_hi: f64,
}

#[derive(Debug, Args)]
pub struct HopfArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, default_value_t = 0.3)]
    pub p2_lo: f64,
    #[arg(long, default_value_t = 0.58)]
    pub p2_hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Spacing {
    Log,
    Lin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    Untreated,
    Treated,
}

#[derive(Debug, Args)]
pub struct RegionArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, default_value_t = 0.01)]
    pub p2_min: f64,
    #[arg(long, default_value_t = 10.0)]
    pub p2_max: f64,
    #[arg(long, default_value_t = 50)]
    pub p2_n: usize,
    #[arg(long, value_enum, default_value_t = Spacing::Log)]
    pub p2_spacing: Spacing,
    #[arg(long, default_value_t = 0.0)]
    pub c_min: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c_max: f64,
    #[arg(long, default_value_t = 50)]
    pub c_n: usize,
    /// Condition set; defaults to the one matching the source terms.
    #[arg(long, value_enum)]
    pub rule: Option<RuleArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputMode {
    /// Files for every recorded snapshot.
    All,
    /// Files for the final snapshot only.
    Final,
    /// Reports only.
    None,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long)]
    pub dims: Option<usize>,
    #[arg(long)]
    pub dx: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Initial data: 1, 2 or 3 (Gaussian variants) or `cce` (uniform equilibrium).
    #[arg(long)]
    pub ic: Option<String>,
    #[arg(long)]
    pub snapshot_every: Option<f64>,
    #[arg(long, value_parser = ["abort", "warn"])]
    pub negativity: Option<String>,
    #[arg(long)]
    pub probe_x: Option<f64>,
    #[arg(long)]
    pub probe_y: Option<f64>,
    #[arg(long, value_enum)]
    pub outputs: Option<OutputMode>,
}

#[derive(Debug, Args)]
pub struct OdeArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Initial state `u,v,w`.
    #[arg(long, default_value = "0.1,0.3,1", allow_hyphen_values = true)]
    pub u0: String,
    #[arg(long, default_value_t = 1000.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = crate::ode::DEFAULT_DT)]
    pub dt: f64,
    /// Record every n-th step.
    #[arg(long, default_value_t = 10)]
    pub stride: usize,
    /// Fraction of the trajectory discarded before cycle detection.
    #[arg(long, default_value_t = crate::ode::DEFAULT_TRANSIENT_FRACTION)]
    pub transient: f64,
}

enum Outcome {
    Done,
    NoResult(String),
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let command_line = argv
        .iter()
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    match dispatch(&cli, command_line) {
        Ok(Outcome::Done) => EXIT_OK,
        Ok(Outcome::NoResult(msg)) => {
            eprintln!("{msg}");
            EXIT_NO_RESULT
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_USAGE
    }
}

fn dispatch(cli: &Cli, command_line: Vec<String>) -> Result<Outcome> {
    let exec = if cli.sequential {
        Exec::Sequential
    } else {
        Exec::Parallel
    };
    let ctx = Context {
        out_root: &cli.out_dir,
        exec,
        command_line,
    };
    match &cli.command {
        Command::Equilibria(a) => cmd_equilibria(&ctx, a),
        Command::Dispersion(a) => cmd_dispersion(&ctx, a),
        Command::Hopf(a) => cmd_hopf(&ctx, a),
        Command::Region(a) => cmd_region(&ctx, a),
        Command::Simulate(a) => cmd_simulate(&ctx, a),
        Command::Ode(a) => cmd_ode(&ctx, a),
    }
}

struct Context<'a> {
    out_root: &'a Path,
    exec: Exec,
    command_line: Vec<String>,
}

impl Context<'_> {
    fn start(
        &self,
        sub: &str,
        params: &ModelParams,
        config: &Option<PathBuf>,
        settings: Vec<(String, String)>,
    ) -> Result<PathBuf> {
        let dir = self.out_root.join(sub);
        RunManifest {
            subcommand: sub.to_string(),
            params: *params,
            config_path: config.clone(),
            output_dir: dir.clone(),
            settings,
            command_line: self.command_line.clone(),
        }
        .write()?;
        Ok(dir)
    }
}

/// Resolve parameters with precedence flag > file > preset. Returns the
/// config-file entries that are not model parameters.
pub fn resolve_params(args: &ParamArgs) -> Result<(ModelParams, Vec<Entry>)> {
    let (mut p, rest) = match &args.config {
        Some(path) => ModelParams::from_kv_partial(&KvFile::read(path)?)?,
        None => (ModelParams::kirschner_table1(), Vec::new()),
    };
    if let Some(s) = args.scenario {
        p = p.with_scenario(s);
    }
    for (key, value) in args.overrides() {
        p.set(key, value)?;
    }
    p.validate()?;
    Ok((p, rest))
}

fn params_only(args: &ParamArgs) -> Result<ModelParams> {
    let (p, rest) = resolve_params(args)?;
    if let Some(e) = rest.first() {
        return Err(Error::Config {
            line: e.line,
            message: format!("unknown key `{}`", e.key),
        });
    }
    Ok(p)
}

fn is_untreated(p: &ModelParams) -> bool {
    p.s1 == 0.0 && p.s3 == 0.0
}

/// First stable coexistence equilibrium, or the first one if none is stable.
fn main_cce(p: &ModelParams) -> Result<Option<Equilibrium>> {
    let all = cce_solve(p)?;
    Ok(all
        .iter()
        .find(|e| e.stability == Stability::Stable)
        .or(all.first())
        .cloned())
}

fn eig_text(e: &Equilibrium) -> String {
    e.eigenvalues
        .iter()
        .map(|l| {
            let sign = if l.im < 0.0 { '-' } else { '+' };
            format!("{}{sign}{}i", fmt_num(l.re), fmt_num(l.im.abs()))
        })
        .collect::<Vec<_>>()
        .join("  ")
}

fn state_text(s: State) -> String {
    format!("{},{},{}", fmt_num(s.u), fmt_num(s.v), fmt_num(s.w))
}

fn cmd_equilibria(ctx: &Context, a: &EquilibriaArgs) -> Result<Outcome> {
    let p = params_only(&a.params)?;
    let dir = ctx.start("equilibria", &p, &a.params.config, Vec::new())?;
    let mut eqs = Vec::new();
    if let Some(e) = cfe(&p)? {
        eqs.push(e);
    }
    eqs.extend(cce_solve(&p)?);
    io::write_equilibria_csv(&dir.join("equilibria.csv"), &eqs)?;
    let mut out = std::io::stdout().lock();
    writeln!(
        out,
        "{:<6} {:>12} {:>12} {:>12}  {:<10} eigenvalues",
        "kind", "u", "v", "w", "stability"
    )?;
    for e in &eqs {
        writeln!(
            out,
            "{:<6} {:>12} {:>12} {:>12}  {:<10} {}",
            e.kind.label(),
            fmt_num(e.state.u),
            fmt_num(e.state.v),
            fmt_num(e.state.w),
            e.stability.label(),
            eig_text(e)
        )?;
    }
    if eqs.is_empty() {
        return Ok(Outcome::NoResult(
            "no admissible equilibrium for these parameters".into(),
        ));
    }
    Ok(Outcome::Done)
}

fn k_grid(k_max: f64, k_step: f64) -> Result<Vec<f64>> {
    if !(k_max >= 0.0) || !k_max.is_finite() {
        return Err(Error::arg(format!(
            "--k-max must be non-negative, got {k_max}"
        )));
    }
    if k_max == 0.0 {
        return Ok(vec![0.0]);
    }
    if !(k_step > 0.0) {
        return Err(Error::arg(format!(
            "--k-step must be positive, got {k_step}"
        )));
    }
    let n = (k_max / k_step + 1e-9).floor() as usize;
    let mut g: Vec<f64> = (0..=n).map(|i| i as f64 * k_step).collect();
    if k_max - g[n] > 1e-9 {
        g.push(k_max);
    }
    Ok(g)
}

fn cmd_dispersion(ctx: &Context, a: &DispersionArgs) -> Result<Outcome> {
    let p = params_only(&a.params)?;
    let grid = k_grid(a.k_max, a.k_step)?;
    let settings = vec![
        ("k_max".into(), fmt_num(a.k_max)),
        ("k_step".into(), fmt_num(a.k_step)),
        ("find_critical".into(), a.find_critical.to_string()),
    ];
    let Some(e) = main_cce(&p)? else {
        return Ok(Outcome::NoResult(
            "no coexistence equilibrium for these parameters".into(),
        ));
    };
    let dir = ctx.start("dispersion", &p, &a.params.config, settings)?;
    let d = dispersion_relation(&p, e.state, &grid, ctx.exec)?;
    io::write_dispersion_csv(&dir.join("dispersion.csv"), &d)?;

    let mut report = vec![
        ("equilibrium".to_string(), state_text(e.state)),
        ("equilibrium_stability".into(), e.stability.label().into()),
        ("d32".into(), fmt_num(p.d32)),
        ("growth_max".into(), fmt_num(d.growth_max)),
        ("k_max".into(), fmt_num(d.k_max)),
        ("frequency_at_k_max".into(), fmt_num(d.frequency_at_max())),
        ("turing_unstable".into(), (d.growth_max > 0.0).to_string()),
    ];
    if a.find_critical {
        let reference = if is_untreated(&p) {
            REFERENCE_D32_UNTREATED
        } else {
            REFERENCE_D32_TREATED
        };
        report.push(("reference_threshold".into(), fmt_num(reference)));
        match critical_d32(&p, e.state, a.d32_lo, a.d32_hi, &grid) {
            Ok(t) => {
                let below = growth_max_at(&p, e.state, t - 0.01, &grid)?;
                let above = growth_max_at(&p, e.state, t + 0.01, &grid)?;
                report.push(("critical_d32".into(), fmt_num(t)));
                report.push(("growth_max_below".into(), fmt_num(below)));
                report.push(("growth_max_above".into(), fmt_num(above)));
                report.push(("discrepancy".into(), fmt_num(t - reference)));
            }
            Err(Error::Bracket { f_lo, f_hi, .. }) => {
                report.push(("critical_d32".into(), "none".into()));
                report.push((
                    "critical_d32_note".into(),
                    format!(
                        "growth_max has the same sign at both ends of [{}, {}] ({} and {})",
                        fmt_num(a.d32_lo),
                        fmt_num(a.d32_hi),
                        fmt_num(f_lo),
                        fmt_num(f_hi)
                    ),
                ));
            }
            Err(other) => return Err(other),
        }
        match determinant_threshold_d32(&p, e.state, a.d32_lo, a.d32_hi, &grid) {
            Ok(t) => report.push(("determinant_threshold_d32".into(), fmt_num(t))),
            Err(Error::Bracket { .. }) | Err(Error::Argument(_)) => {
                report.push(("determinant_threshold_d32".into(), "none".into()))
            }
            Err(other) => return Err(other),
        }
    }
    let text: String = report.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
    fs::write(dir.join("dispersion_report.txt"), &text)?;
    print!("{text}");
    Ok(Outcome::Done)
}

fn cmd_hopf(ctx: &Context, a: &HopfArgs) -> Result<Outcome> {
    let p = params_only(&a.params)?;
    let settings = vec![
        ("p2_lo".into(), fmt_num(a.p2_lo)),
        ("p2_hi".into(), fmt_num(a.p2_hi)),
    ];
    let dir = ctx.start("hopf", &p, &a.params.config, settings)?;
    match hopf_scan(&p, a.p2_lo, a.p2_hi)? {
        Some(h) => {
            io::write_hopf_csv(&dir.join("hopf.csv"), &h)?;
            println!("p2_critical={}", fmt_num(h.p2_critical));
            println!(
                "eigenpair={}+-{}i",
                fmt_num(h.eigenpair.0.re),
                fmt_num(h.eigenpair.0.im.abs())
            );
            println!("bracket={},{}", fmt_num(h.bracket.0), fmt_num(h.bracket.1));
            println!("equilibrium={}", state_text(h.equilibrium));
            Ok(Outcome::Done)
        }
        None => Ok(Outcome::NoResult(format!(
            "no crossing: the dominant pair keeps its sign on [{}, {}]",
            fmt_num(a.p2_lo),
            fmt_num(a.p2_hi)
        ))),
    }
}

fn cmd_region(ctx: &Context, a: &RegionArgs) -> Result<Outcome> {
    let p = params_only(&a.params)?;
    if a.p2_n == 0 || a.c_n == 0 {
        return Err(Error::arg("region grid needs at least one point per axis"));
    }
    if a.p2_spacing == Spacing::Log && !(a.p2_min > 0.0) {
        return Err(Error::arg("log spacing needs --p2-min > 0"));
    }
    let p2 = match a.p2_spacing {
        Spacing::Log => log_grid(a.p2_min, a.p2_max, a.p2_n),
        Spacing::Lin => lin_grid(a.p2_min, a.p2_max, a.p2_n),
    };
    let c = lin_grid(a.c_min, a.c_max, a.c_n);
    let rule = match a.rule {
        Some(RuleArg::Untreated) => ScanRule::Untreated,
        Some(RuleArg::Treated) => ScanRule::Treated,
        None if is_untreated(&p) => ScanRule::Untreated,
        None => ScanRule::Treated,
    };
    let settings = vec![
        (
            "p2_grid".into(),
            format!(
                "{:?},{},{},{}",
                a.p2_spacing,
                fmt_num(a.p2_min),
                fmt_num(a.p2_max),
                a.p2_n
            ),
        ),
        (
            "c_grid".into(),
            format!("lin,{},{},{}", fmt_num(a.c_min), fmt_num(a.c_max), a.c_n),
        ),
        ("rule".into(), format!("{rule:?}")),
    ];
    let dir = ctx.start("region", &p, &a.params.config, settings)?;
    let r = existence_region_scan(&p, &p2, &c, rule, ctx.exec)?;
    io::write_region_csv(&dir.join("region.csv"), &r)?;
    println!("points={} true={}", r.exists.len(), r.count());
    Ok(Outcome::Done)
}

/// Solver settings for `simulate`, read from config-file leftovers and flags.
#[derive(Debug, Clone, PartialEq)]
struct SimSettings {
    dims: usize,
    dx: f64,
    dt: f64,
    t_end: f64,
    ic: String,
    snapshot_every: Option<f64>,
    snapshot_times: Option<Vec<f64>>,
    negativity: NegativityPolicy,
    probe: (f64, f64),
    outputs: OutputMode,
}

impl SimSettings {
    fn from_entries(rest: &[Entry]) -> Result<Self> {
        let mut s = SimSettings {
            dims: 2,
            dx: pde::DEFAULT_DX,
            dt: pde::DEFAULT_DT,
            t_end: pde::DEFAULT_T_END,
            ic: "1".into(),
            snapshot_every: None,
            snapshot_times: None,
            negativity: NegativityPolicy::Abort,
            probe: (0.5, 0.5),
            outputs: OutputMode::Final,
        };
        for e in rest {
            let bad = |msg: String| Error::Config {
                line: e.line,
                message: msg,
            };
            match e.key.as_str() {
                "dims" => s.dims = e.as_usize()?,
                "dx" => s.dx = e.as_f64()?,
                "dt" => s.dt = e.as_f64()?,
                "t_end" => s.t_end = e.as_f64()?,
                "ic" => s.ic = e.value.clone(),
                "snapshot_every" => s.snapshot_every = Some(e.as_f64()?),
                "snapshot_times" => s.snapshot_times = Some(e.as_f64_list()?),
                "negativity" => {
                    s.negativity = e.value.parse().map_err(|x: Error| bad(x.to_string()))?
                }
                "probe_x" => s.probe.0 = e.as_f64()?,
                "probe_y" => s.probe.1 = e.as_f64()?,
                "outputs" => {
                    s.outputs = OutputMode::from_str(&e.value, false).map_err(bad)?;
                }
                other => return Err(bad(format!("unknown key `{other}`"))),
            }
        }
        Ok(s)
    }

    fn apply_flags(&mut self, a: &SimulateArgs) -> Result<()> {
        if let Some(v) = a.dims {
            self.dims = v;
        }
        if let Some(v) = a.dx {
            self.dx = v;
        }
        if let Some(v) = a.dt {
            self.dt = v;
        }
        if let Some(v) = a.t_end {
            self.t_end = v;
        }
        if let Some(v) = &a.ic {
            self.ic = v.clone();
        }
        if let Some(v) = a.snapshot_every {
            self.snapshot_every = Some(v);
            self.snapshot_times = None;
        }
        if let Some(v) = &a.negativity {
            self.negativity = v.parse()?;
        }
        if let Some(v) = a.probe_x {
            self.probe.0 = v;
        }
        if let Some(v) = a.probe_y {
            self.probe.1 = v;
        }
        if let Some(v) = a.outputs {
            self.outputs = v;
        }
        Ok(())
    }

    fn render(&self) -> Vec<(String, String)> {
        let mut out = vec![
            ("dims".to_string(), self.dims.to_string()),
            ("dx".into(), fmt_num(self.dx)),
            ("dt".into(), fmt_num(self.dt)),
            ("t_end".into(), fmt_num(self.t_end)),
            ("ic".into(), self.ic.clone()),
            (
                "negativity".into(),
                format!("{:?}", self.negativity).to_lowercase(),
            ),
            (
                "probe".into(),
                format!("{},{}", fmt_num(self.probe.0), fmt_num(self.probe.1)),
            ),
            (
                "outputs".into(),
                format!("{:?}", self.outputs).to_lowercase(),
            ),
        ];
        if let Some(v) = self.snapshot_every {
            out.push(("snapshot_every".into(), fmt_num(v)));
        }
        if let Some(v) = &self.snapshot_times {
            out.push((
                "snapshot_times".into(),
                v.iter().map(|x| fmt_num(*x)).collect::<Vec<_>>().join(","),
            ));
        }
        out
    }
}

/// Build the simulation config from resolved parameters and solver settings.
fn sim_config(
    p: ModelParams,
    s: &SimSettings,
    exec: Exec,
) -> Result<std::result::Result<SimConfig, String>> {
    let initial = match s.ic.as_str() {
        "1" | "2" | "3" => InitialData::Gaussian(s.ic.parse().expect("digit")),
        "cce" => match main_cce(&p)? {
            Some(e) => InitialData::Uniform(e.state),
            None => {
                return Ok(Err(
                    "no coexistence equilibrium for a uniform initial state".into(),
                ))
            }
        },
        other => {
            return Err(Error::arg(format!(
                "ic must be 1, 2, 3 or cce, got `{other}`"
            )))
        }
    };
    let mut cfg = SimConfig::new(p);
    cfg.initial = initial;
    cfg.dims = s.dims;
    cfg.dx = s.dx;
    cfg.dt = s.dt;
    cfg.t_end = s.t_end;
    cfg.negativity = s.negativity;
    cfg.exec = exec;
    cfg = match (&s.snapshot_times, s.snapshot_every) {
        (Some(times), _) => {
            cfg.snapshot_times = times.clone();
            cfg
        }
        (None, Some(every)) => cfg.snapshot_every(every)?,
        (None, None) => cfg.snapshot_every(s.t_end / 20.0)?,
    };
    Ok(Ok(cfg))
}

fn snapshot_stem(index: usize, t: f64) -> String {
    format!("snap{index:04}_t{}", fmt_num(t))
}

fn write_snapshot_files(dir: &Path, index: usize, snap: &Snapshot) -> Result<()> {
    let stem = snapshot_stem(index, snap.time);
    for f in Field::ALL {
        io::write_field_csv(&dir.join(format!("{stem}_{}.csv", f.name())), &snap.grid, f)?;
        if snap.grid.ny > 1 {
            io::write_field_png(&dir.join(format!("{stem}_{}.png", f.name())), &snap.grid, f)?;
        }
    }
    io::write_snapshot_bin(&dir.join(format!("{stem}.bin")), &snap.grid)
}

fn cmd_simulate(ctx: &Context, a: &SimulateArgs) -> Result<Outcome> {
    let (p, rest) = resolve_params(&a.params)?;
    let mut s = SimSettings::from_entries(&rest)?;
    s.apply_flags(a)?;
    let cfg = match sim_config(p, &s, ctx.exec)? {
        Ok(cfg) => cfg,
        Err(msg) => return Ok(Outcome::NoResult(msg)),
    };
    if let Err(e) = cfg.validate() {
        if let Error::StepTooLarge { dt, bound } = e {
            eprintln!(
                "dt = {} exceeds the explicit stability bound {}",
                fmt_num(dt),
                fmt_num(bound)
            );
        }
        return Err(e);
    }
    let geom = cfg.geometry()?;
    let mut settings = s.render();
    settings.push((
        "stability_bound".into(),
        fmt_num(Diffusion::from_params(&p).stability_bound(geom)),
    ));
    let dir = ctx.start("simulate", &p, &a.params.config, settings)?;

    let mut snapshots = Vec::new();
    let negative_steps = pde::simulate_with(&cfg, |snap| {
        if s.outputs == OutputMode::All {
            write_snapshot_files(&dir, snapshots.len(), &snap)?;
        }
        snapshots.push(snap);
        Ok(())
    })?;
    let last = snapshots.len() - 1;
    if s.outputs == OutputMode::Final {
        write_snapshot_files(&dir, last, &snapshots[last])?;
    }
    if geom.dims() == 1 && s.outputs != OutputMode::None {
        for f in Field::ALL {
            io::write_spacetime_png(
                &dir.join(format!("spacetime_{}.png", f.name())),
                &snapshots,
                f,
            )?;
        }
    }
    if snapshots.len() >= crate::metrics::MIN_PROBE_SNAPSHOTS {
        let probe = probe_series(&snapshots, s.probe)?;
        let mut text = String::from("t,u,v,w\n");
        for k in 0..probe.times.len() {
            text.push_str(&format!(
                "{},{},{},{}\n",
                fmt_num(probe.times[k]),
                fmt_num(probe.u[k]),
                fmt_num(probe.v[k]),
                fmt_num(probe.w[k])
            ));
        }
        fs::write(dir.join("probe.csv"), text)?;
    }
    let report = PatternReport::from_snapshots(&snapshots, s.probe)?;
    let mut kv = report.to_kv();
    kv.push_str(&format!("negative_steps={negative_steps}\n"));
    fs::write(dir.join("report.txt"), &kv)?;
    fs::write(
        dir.join("report.csv"),
        format!("{}\n{}\n", report.csv_header(), report.csv_row()),
    )?;
    print!("{kv}");
    Ok(Outcome::Done)
}

fn parse_state(text: &str) -> Result<State> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| Error::arg(format!("bad number `{x}` in --u0")))
        })
        .collect::<Result<_>>()?;
    match parts.as_slice() {
        [u, v, w] => Ok(State::new(*u, *v, *w)),
        _ => Err(Error::arg(format!(
            "--u0 needs three comma-separated values, got `{text}`"
        ))),
    }
}

fn cmd_ode(ctx: &Context, a: &OdeArgs) -> Result<Outcome> {
    let p = params_only(&a.params)?;
    let u0 = parse_state(&a.u0)?;
    let settings = vec![
        ("u0".into(), a.u0.clone()),
        ("t_end".into(), fmt_num(a.t_end)),
        ("dt".into(), fmt_num(a.dt)),
        ("stride".into(), a.stride.to_string()),
        ("transient".into(), fmt_num(a.transient)),
    ];
    if !(0.0..1.0).contains(&a.transient) {
        return Err(Error::arg(format!(
            "--transient must lie in [0, 1), got {}",
            a.transient
        )));
    }
    let dir = ctx.start("ode", &p, &a.params.config, settings)?;
    let tr = integrate_strided(&p, u0, a.t_end, a.dt, a.stride)?;
    io::write_trajectory_csv(&dir.join("trajectory.csv"), &tr)?;
    println!("final={}", state_text(tr.last()));
    match cycle_metrics(&tr, a.transient) {
        Ok(Some(m)) => {
            println!("cycle=true");
            println!("period={}", fmt_num(m.period));
            println!("amplitude={}", state_text(m.amplitude));
            println!("mean={}", state_text(m.mean));
        }
        Ok(None) => println!("cycle=false"),
        Err(Error::Argument(msg)) => println!("cycle=unknown ({msg})"),
        Err(e) => return Err(e),
    }
    Ok(Outcome::Done)
}
