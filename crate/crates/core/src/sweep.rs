//! One-dimensional parameter sweeps of g2 by both methods, CSV/JSON emission,
//! and the preset figure datasets.
//!
//! Sweep ranges are in internal coordinates. `axis_flip` only negates the
//! emitted Δ column; every solver call sees the unflipped value.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::amplitude::steady_amplitudes;
use crate::error::{Error, Result};
use crate::lindblad::MasterEquationPoint;
use crate::model::{strong_params, weak_params, Cavity, SystemParams};

/// Environment variable that caps the sweep worker count.
pub const THREADS_ENV: &str = "BLOCKADE_THREADS";

pub const DEFAULT_SWEEP_CUTOFF: usize = 3;
pub const DEFAULT_FIGURE_POINTS: usize = 401;

/// Half-width of the method agreement band in decades.
pub const AGREEMENT_DECADES: f64 = 0.3;
/// Master-equation g2 below which points are not compared.
pub const AGREEMENT_FLOOR: f64 = 1e-3;
/// Disagreeing points with either g2 below this lie inside a dip and are exempt.
pub const DIP_INTERIOR: f64 = 1e-2;

pub const CSV_HEADER: [&str; 7] = ["axis_value", "g2_1_amp", "g2_2_amp", "g2_1_me", "g2_2_me", "n1", "n2"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    #[serde(rename = "delta")]
    Delta,
    #[serde(rename = "lambda")]
    Lambda,
    #[serde(rename = "J")]
    Hop,
    #[serde(rename = "g")]
    G,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Delta => "delta",
            Axis::Lambda => "lambda",
            Axis::Hop => "J",
            Axis::G => "g",
        }
    }

    pub fn apply(self, p: &SystemParams, x: f64) -> SystemParams {
        match self {
            Axis::Delta => p.with_delta(x),
            Axis::Lambda => p.with_lambda(x),
            Axis::Hop => p.with_hop(x),
            Axis::G => p.with_g(x),
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "delta" => Ok(Axis::Delta),
            "lambda" => Ok(Axis::Lambda),
            "J" => Ok(Axis::Hop),
            "g" => Ok(Axis::G),
            _ => Err(Error::InvalidSweep(format!("unknown axis {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Amplitude,
    Lindblad,
    Both,
}

impl Method {
    pub fn amplitude(self) -> bool {
        matches!(self, Method::Amplitude | Method::Both)
    }

    pub fn lindblad(self) -> bool {
        matches!(self, Method::Lindblad | Method::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CavitySelection {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
    Both,
}

impl CavitySelection {
    pub fn includes(self, c: Cavity) -> bool {
        match self {
            CavitySelection::Both => true,
            CavitySelection::One => c == Cavity::One,
            CavitySelection::Two => c == Cavity::Two,
        }
    }

    pub fn cavities(self) -> Vec<Cavity> {
        [Cavity::One, Cavity::Two]
            .into_iter()
            .filter(|&c| self.includes(c))
            .collect()
    }
}

impl From<Cavity> for CavitySelection {
    fn from(c: Cavity) -> Self {
        match c {
            Cavity::One => CavitySelection::One,
            Cavity::Two => CavitySelection::Two,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: Axis,
    /// Internal-coordinate range `[lo, hi]`, units of ωₘ.
    pub range: (f64, f64),
    pub points: usize,
    pub method: Method,
    pub base: SystemParams,
    pub cavity: CavitySelection,
    /// Negate the emitted Δ column.
    pub axis_flip: bool,
    /// Per-mode photon cutoff of the master-equation path.
    pub cutoff: usize,
}

impl SweepSpec {
    pub fn new(axis: Axis, range: (f64, f64), points: usize, base: SystemParams) -> Self {
        SweepSpec {
            axis,
            range,
            points,
            method: Method::Both,
            base,
            cavity: CavitySelection::Both,
            axis_flip: false,
            cutoff: DEFAULT_SWEEP_CUTOFF,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidSweep(format!("range [{lo}, {hi}]")));
        }
        if self.points < 2 {
            return Err(Error::InvalidSweep(format!("{} points (need at least 2)", self.points)));
        }
        if self.axis_flip && self.axis != Axis::Delta {
            return Err(Error::InvalidSweep("axis flip applies to delta sweeps only".into()));
        }
        if self.cutoff < 1 {
            return Err(Error::InvalidCutoff(self.cutoff));
        }
        self.base.validate()
    }

    /// Internal axis value of point `k`.
    pub fn value(&self, k: usize) -> f64 {
        let (lo, hi) = self.range;
        if k + 1 == self.points {
            hi
        } else {
            lo + (hi - lo) * k as f64 / (self.points - 1) as f64
        }
    }

    pub fn step(&self) -> f64 {
        (self.range.1 - self.range.0) / (self.points - 1) as f64
    }

    fn emitted(&self, x: f64) -> f64 {
        if self.axis_flip {
            -x
        } else {
            x
        }
    }
}

/// One CSV field.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Value(f64),
    /// Solver failure at this point, emitted as `err:<code>`.
    Failed(&'static str),
    /// Not requested.
    Blank,
}

impl Cell {
    fn from_result(r: &Result<f64>) -> Self {
        match r {
            Ok(v) if v.is_finite() => Cell::Value(*v),
            Ok(_) => Cell::Failed("nonfinite"),
            Err(e) => Cell::Failed(e.code()),
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Cell::Value(v) => Some(*v),
            _ => None,
        }
    }

    pub fn render(&self) -> String {
        match self {
            Cell::Value(v) => format_float(*v),
            Cell::Failed(code) => format!("err:{code}"),
            Cell::Blank => String::new(),
        }
    }
}

/// Shortest decimal that round-trips, switching to exponent form for tiny or huge magnitudes.
pub fn format_float(v: f64) -> String {
    format!("{v:?}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    /// Emitted axis value (after any flip).
    pub axis_value: f64,
    pub g2_1_amp: Cell,
    pub g2_2_amp: Cell,
    pub g2_1_me: Cell,
    pub g2_2_me: Cell,
    /// Master-equation photon numbers when that path ran, else `|c10|²`, `|c01|²`.
    pub n1: Cell,
    pub n2: Cell,
}

impl SweepRow {
    pub fn amp(&self, c: Cavity) -> &Cell {
        match c {
            Cavity::One => &self.g2_1_amp,
            Cavity::Two => &self.g2_2_amp,
        }
    }

    pub fn me(&self, c: Cavity) -> &Cell {
        match c {
            Cavity::One => &self.g2_1_me,
            Cavity::Two => &self.g2_2_me,
        }
    }

    fn fields(&self) -> [String; 7] {
        [
            format_float(self.axis_value),
            self.g2_1_amp.render(),
            self.g2_2_amp.render(),
            self.g2_1_me.render(),
            self.g2_2_me.render(),
            self.n1.render(),
            self.n2.render(),
        ]
    }
}

/// Method agreement summary over the compared points.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Agreement {
    /// Points with both values and `g2_me ≥ 1e-3`.
    pub compared: usize,
    /// Outside the band but inside a dip.
    pub exempt: usize,
    /// Outside the band and outside any dip.
    pub violations: usize,
    /// Largest `|log10 g2_amp - log10 g2_me|` over compared points.
    pub worst_decades: f64,
}

impl Agreement {
    pub fn exempt_fraction(&self) -> f64 {
        if self.compared == 0 {
            0.0
        } else {
            self.exempt as f64 / self.compared as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub rows: Vec<SweepRow>,
    pub wall_time_s: f64,
}

impl SweepResult {
    /// Agreement band check for one cavity.
    pub fn agreement(&self, cavity: Cavity) -> Agreement {
        let mut a = Agreement::default();
        for row in &self.rows {
            let (Some(amp), Some(me)) = (row.amp(cavity).value(), row.me(cavity).value()) else {
                continue;
            };
            if me < AGREEMENT_FLOOR {
                continue;
            }
            a.compared += 1;
            let diff = if amp > 0.0 {
                (amp.log10() - me.log10()).abs()
            } else {
                f64::INFINITY
            };
            a.worst_decades = a.worst_decades.max(diff);
            if diff > AGREEMENT_DECADES {
                if amp.min(me) < DIP_INTERIOR {
                    a.exempt += 1;
                } else {
                    a.violations += 1;
                }
            }
        }
        a
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(CSV_HEADER)?;
        for row in &self.rows {
            w.write_record(row.fields())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER)?;
        for row in &self.rows {
            w.write_record(row.fields())?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn metadata(&self, notes: &[String]) -> Value {
        let s = &self.spec;
        let mut meta = json!({
            "params": s.base.to_json(),
            "axis": s.axis,
            "range": [s.range.0, s.range.1],
            "points": s.points,
            "method": s.method,
            "cavity": s.cavity,
            "axis_flip": s.axis_flip,
            "cutoffs": {
                "amplitude": "n1 + n2 <= 2",
                "master_equation": if s.method.lindblad() { json!(s.cutoff) } else { Value::Null },
            },
            "version": env!("CARGO_PKG_VERSION"),
            "wall_time_s": self.wall_time_s,
            "notes": notes,
        });
        if s.method == Method::Both {
            let agreement: serde_json::Map<String, Value> = s
                .cavity
                .cavities()
                .into_iter()
                .map(|c| (c.number().to_string(), json!(self.agreement(c))))
                .collect();
            meta["agreement"] = Value::Object(agreement);
        }
        meta
    }

    /// Writes `path` and a sibling `.json` metadata file; returns the metadata path.
    pub fn write(&self, path: &Path, notes: &[String]) -> Result<PathBuf> {
        self.write_csv(path)?;
        let meta_path = path.with_extension("json");
        write_json(&meta_path, &self.metadata(notes))?;
        Ok(meta_path)
    }
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

fn worker_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::InvalidSweep(format!("{THREADS_ENV}={v:?} is not a positive integer")))?;
        b = b.num_threads(n);
    }
    b.build()
        .map_err(|e| Error::InvalidSweep(format!("worker pool: {e}")))
}

fn evaluate(spec: &SweepSpec, x: f64) -> SweepRow {
    let p = spec.axis.apply(&spec.base, x);
    let want = |c| spec.cavity.includes(c);
    let mut row = SweepRow {
        axis_value: spec.emitted(x),
        g2_1_amp: Cell::Blank,
        g2_2_amp: Cell::Blank,
        g2_1_me: Cell::Blank,
        g2_2_me: Cell::Blank,
        n1: Cell::Blank,
        n2: Cell::Blank,
    };

    if spec.method.amplitude() {
        match steady_amplitudes(&p) {
            Ok(s) => {
                let g = |c| Cell::from_result(&crate::amplitude::g2_for(&s.state, c));
                if want(Cavity::One) {
                    row.g2_1_amp = g(Cavity::One);
                    row.n1 = Cell::Value(s.state.mean_photons(Cavity::One));
                }
                if want(Cavity::Two) {
                    row.g2_2_amp = g(Cavity::Two);
                    row.n2 = Cell::Value(s.state.mean_photons(Cavity::Two));
                }
            }
            Err(e) => {
                let f = Cell::Failed(e.code());
                if want(Cavity::One) {
                    row.g2_1_amp = f.clone();
                    row.n1 = f.clone();
                }
                if want(Cavity::Two) {
                    row.g2_2_amp = f.clone();
                    row.n2 = f;
                }
            }
        }
    }

    if spec.method.lindblad() {
        match MasterEquationPoint::solve(&p, spec.cutoff) {
            Ok(m) => {
                for c in spec.cavity.cavities() {
                    let g2 = match m.statistics(c) {
                        Ok((g, _)) => Cell::from_result(&Ok(g)),
                        Err(e) => Cell::Failed(e.code()),
                    };
                    let n = photon_number(&m, c);
                    match c {
                        Cavity::One => {
                            row.g2_1_me = g2;
                            row.n1 = n;
                        }
                        Cavity::Two => {
                            row.g2_2_me = g2;
                            row.n2 = n;
                        }
                    }
                }
            }
            Err(e) => {
                let f = Cell::Failed(e.code());
                if want(Cavity::One) {
                    row.g2_1_me = f.clone();
                    row.n1 = f.clone();
                }
                if want(Cavity::Two) {
                    row.g2_2_me = f.clone();
                    row.n2 = f;
                }
            }
        }
    }
    row
}

/// Photon number straight from ρ, so empty modes still report their (tiny) occupation.
fn photon_number(m: &MasterEquationPoint, c: Cavity) -> Cell {
    let (a1, a2) = crate::fock::two_mode_ops(&m.basis);
    let a = match c {
        Cavity::One => a1,
        Cavity::Two => a2,
    };
    let n = m.rho().expect(&(&a.adjoint() * &a)).re;
    Cell::Value(n)
}

/// Evaluates every point of `spec`; rows come back in axis order.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let start = Instant::now();
    let pool = worker_pool()?;
    let rows = pool.install(|| {
        (0..spec.points)
            .into_par_iter()
            .map(|k| evaluate(spec, spec.value(k)))
            .collect()
    });
    Ok(SweepResult {
        spec: *spec,
        rows,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    F2a,
    F2b,
    F3a,
    F3b,
    F4a,
    F4b,
    F5a,
    F5b,
}

impl Figure {
    pub const ALL: [Figure; 8] = [
        Figure::F2a,
        Figure::F2b,
        Figure::F3a,
        Figure::F3b,
        Figure::F4a,
        Figure::F4b,
        Figure::F5a,
        Figure::F5b,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Figure::F2a => "2a",
            Figure::F2b => "2b",
            Figure::F3a => "3a",
            Figure::F3b => "3b",
            Figure::F4a => "4a",
            Figure::F4b => "4b",
            Figure::F5a => "5a",
            Figure::F5b => "5b",
        }
    }
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().trim_start_matches("fig");
        Figure::ALL
            .into_iter()
            .find(|f| f.id() == s)
            .ok_or_else(|| Error::UnknownFigure(s.to_string()))
    }
}

/// Sweep bindings of one figure panel.
#[derive(Debug, Clone)]
pub struct FigurePlan {
    pub figure: Figure,
    pub axis: Axis,
    pub range: (f64, f64),
    pub axis_flip: bool,
    pub cavity: CavitySelection,
    /// Parameter varied between curves and its values.
    pub curve_param: &'static str,
    pub curves: Vec<SystemParams>,
    pub curve_values: Vec<f64>,
    pub notes: Vec<String>,
}

const WEAK_RANGE: (f64, f64) = (-0.01, 0.01);
const STRONG_RANGE: (f64, f64) = (-0.02, 0.1);
const GAIN_RANGE: (f64, f64) = (-5e-6, 5e-6);

impl FigurePlan {
    pub fn new(figure: Figure) -> Self {
        let weak = weak_params();
        let strong = strong_params();
        let k = weak.kappa;
        let flip_note = "emitted delta column is negated (figure plots -delta)".to_string();
        let lambdas = |base: SystemParams, opt: f64| {
            let vals = vec![0.0, opt, 2.0 * opt];
            (vals.iter().map(|&l| base.with_lambda(l)).collect(), vals)
        };
        let (axis, range, axis_flip, cavity, curve_param, (curves, curve_values), notes): (
            _,
            _,
            _,
            _,
            _,
            (Vec<SystemParams>, Vec<f64>),
            Vec<String>,
        ) = match figure {
            Figure::F2a => (
                Axis::Delta,
                WEAK_RANGE,
                true,
                CavitySelection::One,
                "lambda_gain",
                lambdas(weak, 0.93e-6),
                vec![flip_note],
            ),
            Figure::F2b => (
                Axis::Delta,
                WEAK_RANGE,
                true,
                CavitySelection::Two,
                "lambda_gain",
                lambdas(weak, 0.4e-6),
                vec![flip_note],
            ),
            Figure::F3a => {
                let base = weak.with_lambda(0.93e-6);
                let vals = vec![0.0, 0.02, 0.042];
                (
                    Axis::Delta,
                    WEAK_RANGE,
                    false,
                    CavitySelection::One,
                    "g_om",
                    (vals.iter().map(|&g| base.with_g(g)).collect(), vals),
                    vec!["g values other than 0.042 are a repo choice".into()],
                )
            }
            Figure::F3b => {
                let base = weak.with_lambda(0.93e-6);
                let vals = vec![0.0, 0.5 * k, 0.95 * k];
                (
                    Axis::Delta,
                    WEAK_RANGE,
                    false,
                    CavitySelection::One,
                    "hop_J",
                    (vals.iter().map(|&j| base.with_hop(j)).collect(), vals),
                    vec!["J values {0, 0.5, 0.95} x kappa are a repo choice".into()],
                )
            }
            Figure::F4a => (
                Axis::Delta,
                STRONG_RANGE,
                true,
                CavitySelection::One,
                "lambda_gain",
                lambdas(strong, 1.1e-6),
                vec![flip_note],
            ),
            Figure::F4b => (
                Axis::Delta,
                STRONG_RANGE,
                true,
                CavitySelection::Two,
                "lambda_gain",
                lambdas(strong, 0.01e-6),
                vec![
                    flip_note,
                    "gain 0.01e-6 is a fixed panel setting, not a cavity-2 optimum".into(),
                ],
            ),
            Figure::F5a => {
                let base = strong.with_delta(2.4e-2);
                let vals = vec![0.0, 0.1, 0.2];
                (
                    Axis::Lambda,
                    GAIN_RANGE,
                    false,
                    CavitySelection::One,
                    "g_om",
                    (vals.iter().map(|&g| base.with_g(g)).collect(), vals),
                    vec![
                        "lambda sweep at delta = 2.4e-2".into(),
                        "g values other than 0.2 are a repo choice".into(),
                    ],
                )
            }
            Figure::F5b => {
                let base = strong.with_lambda(1.1e-6);
                let vals = vec![0.0, 4.0 * k, 8.0 * k];
                (
                    Axis::Delta,
                    STRONG_RANGE,
                    false,
                    CavitySelection::One,
                    "hop_J",
                    (vals.iter().map(|&j| base.with_hop(j)).collect(), vals),
                    vec!["J values {0, 4, 8} x kappa are a repo choice".into()],
                )
            }
        };
        FigurePlan {
            figure,
            axis,
            range,
            axis_flip,
            cavity,
            curve_param,
            curves,
            curve_values,
            notes,
        }
    }

    pub fn spec(&self, curve: usize, points: usize, cutoff: usize) -> SweepSpec {
        SweepSpec {
            axis: self.axis,
            range: self.range,
            points,
            method: Method::Both,
            base: self.curves[curve],
            cavity: self.cavity,
            axis_flip: self.axis_flip,
            cutoff,
        }
    }
}

/// Writes one CSV per curve plus `fig<id>.json` into `outdir`; returns all paths written.
pub fn figure_dataset(figure: Figure, outdir: &Path, points: usize, cutoff: usize) -> Result<Vec<PathBuf>> {
    let plan = FigurePlan::new(figure);
    std::fs::create_dir_all(outdir)?;
    let start = Instant::now();
    let mut written = Vec::new();
    let mut curves = Vec::new();
    for (k, value) in plan.curve_values.iter().enumerate() {
        let spec = plan.spec(k, points, cutoff);
        let result = run_sweep(&spec)?;
        let name = format!("fig{}_{}.csv", figure.id(), k + 1);
        let path = outdir.join(&name);
        result.write_csv(&path)?;
        let mut entry = json!({
            "file": name,
            plan.curve_param: value,
            "params": spec.base.to_json(),
            "rows": result.rows.len(),
        });
        if spec.method == Method::Both {
            let agreement: serde_json::Map<String, Value> = spec
                .cavity
                .cavities()
                .into_iter()
                .map(|c| (c.number().to_string(), json!(result.agreement(c))))
                .collect();
            entry["agreement"] = Value::Object(agreement);
        }
        curves.push(entry);
        written.push(path);
    }
    let meta = json!({
        "figure": figure.id(),
        "axis": plan.axis,
        "range": [plan.range.0, plan.range.1],
        "points": points,
        "axis_flip": plan.axis_flip,
        "cavity": plan.cavity,
        "method": Method::Both,
        "curve_param": plan.curve_param,
        "curves": curves,
        "cutoffs": { "amplitude": "n1 + n2 <= 2", "master_equation": cutoff },
        "version": env!("CARGO_PKG_VERSION"),
        "wall_time_s": start.elapsed().as_secs_f64(),
        "notes": plan.notes,
    });
    let meta_path = outdir.join(format!("fig{}.json", figure.id()));
    write_json(&meta_path, &meta)?;
    written.push(meta_path);
    Ok(written)
}
