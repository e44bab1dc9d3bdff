//! Command-line front end.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::amplitude::{g2_for, steady_amplitudes};
use crate::error::{Error, Result};
use crate::lindblad::MasterEquationPoint;
use crate::model::{Preset, Regime, SystemParams};
use crate::optimize::{compare_printed_roots, find_optimal_pairs, SearchGrid};
use crate::sweep::{
    figure_dataset, format_float, run_sweep, Axis, CavitySelection, Figure, Method, SweepSpec,
    DEFAULT_FIGURE_POINTS, DEFAULT_SWEEP_CUTOFF,
};

#[derive(Debug, Parser)]
#[command(
    name = "blockade",
    version,
    about = "Photon-blockade statistics of two coupled Kerr cavities with parametric gain"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sweep one parameter and write g2 by either or both methods to CSV.
    Sweep(SweepArgs),
    /// Search for (delta, lambda) pairs that cancel the two-photon amplitude.
    Optimize(OptimizeArgs),
    /// Regenerate the dataset of one figure panel.
    Figure(FigureArgs),
    /// Evaluate g2 at a single parameter point.
    G2(G2Args),
    /// Print the resolved parameter set.
    Params(ParamArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PresetArg {
    Weak,
    Strong,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Amp,
    Me,
    Both,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Amp => Method::Amplitude,
            MethodArg::Me => Method::Lindblad,
            MethodArg::Both => Method::Both,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CavityArg {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    Both,
}

impl From<CavityArg> for CavitySelection {
    fn from(c: CavityArg) -> Self {
        match c {
            CavityArg::One => CavitySelection::One,
            CavityArg::Two => CavitySelection::Two,
            CavityArg::Both => CavitySelection::Both,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AxisArg {
    Delta,
    Lambda,
    #[value(name = "J")]
    J,
    G,
}

impl From<AxisArg> for Axis {
    fn from(a: AxisArg) -> Self {
        match a {
            AxisArg::Delta => Axis::Delta,
            AxisArg::Lambda => Axis::Lambda,
            AxisArg::J => Axis::Hop,
            AxisArg::G => Axis::G,
        }
    }
}

#[derive(Debug, Args)]
struct ParamArgs {
    /// Base parameter set.
    #[arg(long, value_enum, default_value = "weak")]
    preset: PresetArg,
    /// JSON parameter file (replaces the preset).
    #[arg(long = "params", value_name = "FILE")]
    params_file: Option<PathBuf>,
    /// Detuning Δ in units of ωm.
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<f64>,
    /// Parametric gain λ in units of ωm.
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<f64>,
    /// Photon hopping J in units of ωm.
    #[arg(long = "J", allow_hyphen_values = true)]
    hop: Option<f64>,
    /// Optomechanical coupling g in units of ωm.
    #[arg(long, allow_hyphen_values = true)]
    g: Option<f64>,
}

impl ParamArgs {
    fn resolve(&self) -> Result<SystemParams> {
        let mut p = match &self.params_file {
            Some(path) => SystemParams::from_json_str(&std::fs::read_to_string(path)?)?,
            None => match self.preset {
                PresetArg::Weak => Preset::Weak.params(),
                PresetArg::Strong => Preset::Strong.params(),
            },
        };
        if let Some(v) = self.delta {
            p = p.with_delta(v);
        }
        if let Some(v) = self.lambda {
            p = p.with_lambda(v);
        }
        if let Some(v) = self.hop {
            p = p.with_hop(v);
        }
        if let Some(v) = self.g {
            p = p.with_g(v);
        }
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Swept parameter.
    #[arg(long, value_enum, default_value = "delta")]
    axis: AxisArg,
    /// Lower end of the sweep (defaults to the preset's plotted range).
    #[arg(long, allow_hyphen_values = true)]
    from: Option<f64>,
    /// Upper end of the sweep.
    #[arg(long, allow_hyphen_values = true)]
    to: Option<f64>,
    #[arg(long, default_value_t = 201)]
    points: usize,
    #[arg(long, value_enum, default_value = "both")]
    method: MethodArg,
    #[arg(long, value_enum, default_value = "both")]
    cavity: CavityArg,
    /// Per-mode photon cutoff of the master-equation path.
    #[arg(long, default_value_t = DEFAULT_SWEEP_CUTOFF)]
    cutoff: usize,
    /// Negate the emitted delta column.
    #[arg(long)]
    flip_axis: bool,
    /// Output CSV; metadata goes to the same path with a .json extension.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct OptimizeArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, value_enum, default_value = "both")]
    cavity: CavityArg,
    /// Lower delta bound of the search box.
    #[arg(long, allow_hyphen_values = true)]
    delta_from: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    delta_to: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    lambda_from: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    lambda_to: Option<f64>,
    /// Newton start points along delta.
    #[arg(long)]
    n_delta: Option<usize>,
    /// Newton start points along lambda.
    #[arg(long)]
    n_lambda: Option<usize>,
    /// Also write the JSON list to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FigureArgs {
    /// Panel id: 2a, 2b, 3a, 3b, 4a, 4b, 5a or 5b.
    id: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_FIGURE_POINTS)]
    points: usize,
    #[arg(long, default_value_t = DEFAULT_SWEEP_CUTOFF)]
    cutoff: usize,
}

#[derive(Debug, Args)]
struct G2Args {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, default_value_t = DEFAULT_SWEEP_CUTOFF)]
    cutoff: usize,
    #[arg(long, value_enum, default_value = "both")]
    method: MethodArg,
    #[arg(long, value_enum, default_value = "both")]
    cavity: CavityArg,
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            eprint!("{}", e.render());
            eprintln!();
            eprintln!("{}", Cli::command().render_usage());
            return 1;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_solver_error() {
                2
            } else {
                1
            }
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Sweep(a) => sweep(a),
        Command::Optimize(a) => optimize(a),
        Command::Figure(a) => figure(a),
        Command::G2(a) => g2(a),
        Command::Params(a) => {
            let p = a.resolve()?;
            let mut v = p.to_json();
            v["regime"] = json!(match p.regime() {
                Regime::Weak => "weak",
                Regime::Strong => "strong",
            });
            println!("{}", serde_json::to_string_pretty(&v)?);
            Ok(0)
        }
    }
}

fn default_range(axis: Axis, p: &SystemParams) -> Option<(f64, f64)> {
    match axis {
        Axis::Delta => Some(SearchGrid::for_regime(p.regime()).delta_range),
        Axis::Lambda => Some(SearchGrid::for_regime(p.regime()).lambda_range),
        Axis::Hop | Axis::G => None,
    }
}

fn sweep(a: SweepArgs) -> Result<i32> {
    let base = a.params.resolve()?;
    let axis = Axis::from(a.axis);
    let default = default_range(axis, &base);
    let range = match (a.from, a.to, default) {
        (Some(lo), Some(hi), _) => (lo, hi),
        (lo, hi, Some((dlo, dhi))) => (lo.unwrap_or(dlo), hi.unwrap_or(dhi)),
        _ => {
            return Err(Error::InvalidSweep(format!(
                "--from and --to are required for a {axis} sweep"
            )))
        }
    };
    let spec = SweepSpec {
        axis,
        range,
        points: a.points,
        method: a.method.into(),
        base,
        cavity: a.cavity.into(),
        axis_flip: a.flip_axis,
        cutoff: a.cutoff,
    };
    let result = run_sweep(&spec)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut notes = Vec::new();
    if spec.axis_flip {
        notes.push("emitted delta column is negated".to_string());
    }
    let meta = result.write(&a.out, &notes)?;
    println!("{}", a.out.display());
    println!("{}", meta.display());
    Ok(0)
}

fn optimize(a: OptimizeArgs) -> Result<i32> {
    let p = a.params.resolve()?;
    let d = SearchGrid::for_regime(p.regime());
    let grid = SearchGrid::new(
        (a.delta_from.unwrap_or(d.delta_range.0), a.delta_to.unwrap_or(d.delta_range.1)),
        (a.lambda_from.unwrap_or(d.lambda_range.0), a.lambda_to.unwrap_or(d.lambda_range.1)),
        a.n_delta.unwrap_or(d.n_delta),
        a.n_lambda.unwrap_or(d.n_lambda),
    )?;
    let mut pairs = Vec::new();
    for cavity in CavitySelection::from(a.cavity).cavities() {
        let found = find_optimal_pairs(&p, cavity, &grid)?;
        if found.is_empty() {
            eprintln!("note: no optimal pairs found for cavity {}", cavity.number());
        }
        let cmp = compare_printed_roots(&p, cavity, &grid)?;
        if cmp.differs() {
            let printed: Vec<Value> = cmp
                .printed
                .iter()
                .map(|r| json!({"delta": r.delta, "lambda": r.lambda}))
                .collect();
            eprintln!(
                "note: closed-form roots for cavity {} differ by up to {:e}: {}",
                cavity.number(),
                cmp.max_mismatch(),
                Value::Array(printed)
            );
        }
        pairs.extend(found);
    }
    let text = serde_json::to_string_pretty(&pairs)?;
    if let Some(path) = &a.out {
        std::fs::write(path, text.clone() + "\n")?;
    }
    println!("{text}");
    Ok(0)
}

fn figure(a: FigureArgs) -> Result<i32> {
    let fig: Figure = a.id.parse()?;
    for path in figure_dataset(fig, &a.out, a.points, a.cutoff)? {
        println!("{}", path.display());
    }
    Ok(0)
}

fn cell(r: Result<f64>) -> Value {
    match r {
        Ok(v) if v.is_finite() => json!(v),
        Ok(v) => json!(format!("err:{}", format_float(v))),
        Err(e) => json!(format!("err:{}", e.code())),
    }
}

fn g2(a: G2Args) -> Result<i32> {
    let p = a.params.resolve()?;
    let method = Method::from(a.method);
    let cavities = CavitySelection::from(a.cavity).cavities();
    let mut out = json!({ "params": p.to_json() });
    let mut failed = false;

    if method.amplitude() {
        match steady_amplitudes(&p) {
            Ok(s) => {
                let mut v = json!({ "warnings": s.warnings });
                for &c in &cavities {
                    let k = c.number();
                    v[format!("g2_{k}")] = cell(g2_for(&s.state, c));
                    v[format!("n{k}")] = json!(s.state.mean_photons(c));
                }
                out["amplitude"] = v;
            }
            Err(e) => {
                eprintln!("error: amplitude method: {e}");
                out["amplitude"] = json!(format!("err:{}", e.code()));
                failed = true;
            }
        }
    }
    if method.lindblad() {
        match MasterEquationPoint::solve(&p, a.cutoff) {
            Ok(m) => {
                let mut v = json!({
                    "cutoff": a.cutoff,
                    "residual": m.steady.residual,
                    "asymmetry": m.steady.asymmetry,
                });
                for &c in &cavities {
                    let k = c.number();
                    match m.statistics(c) {
                        Ok((g, n)) => {
                            v[format!("g2_{k}")] = cell(Ok(g));
                            v[format!("n{k}")] = json!(n);
                        }
                        Err(e) => v[format!("g2_{k}")] = cell(Err(e)),
                    }
                }
                out["master_equation"] = v;
            }
            Err(e) => {
                eprintln!("error: master equation: {e}");
                out["master_equation"] = json!(format!("err:{}", e.code()));
                failed = true;
            }
        }
    }
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(if failed { 2 } else { 0 })
}
