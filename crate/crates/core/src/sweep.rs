//! Wavenumber sweeps: configuration, resumable CSV persistence, exponent fits and verdicts.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;

use crate::assembly::{assemble_combined, assemble_on, default_n, discretize, OperatorKind};
use crate::config::{geometric_grid, Config};
use crate::error::{Error, Result};
use crate::experiments::{
    curved_witness, default_witness_nodes, flat_witness, restriction_growth, witness_ratios,
    RestrictionGrowth, WitnessKind, DEFAULT_BIG_M, DEFAULT_WIDTH_EXPONENT,
};
use crate::fit::{fit_exponent, Fit, FitModel};
use crate::geometry::{BoundaryGeometry, BoundaryPiece, Classification, Registry, Shape};
use crate::norms::{operator_norm, oracle_n_max, oracle_norm, NormReport, NormSpec, Space};

pub const CSV_HEADER: &str = "kind,k,N,spec,norm,method,converged,iterations";
pub const SMOOTH_TOLERANCE: f64 = 0.08;
pub const CORNER_TOLERANCE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaRule {
    Constant(f64),
    /// `η = c·k`
    ProportionalToK(f64),
}

impl EtaRule {
    pub fn eta(self, k: f64) -> f64 {
        match self {
            EtaRule::Constant(v) => v,
            EtaRule::ProportionalToK(c) => c * k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    /// Nyström matrix and a generalized singular value.
    Assembly,
    /// Fourier symbols on the unit circle.
    Oracle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub geometry: String,
    pub registry: Option<PathBuf>,
    pub kind: OperatorKind,
    pub spec: NormSpec<f64>,
    pub k_min: f64,
    pub k_max: f64,
    pub points_per_octave: usize,
    pub ppw: u32,
    pub eta: EtaRule,
    pub model: FitModel,
    pub tolerance: Option<f64>,
    pub solver: Solver,
    pub output: Option<PathBuf>,
}

const SWEEP_KEYS: &[&str] = &[
    "geometry",
    "geometry.registry",
    "operator",
    "norm",
    "k_min",
    "k_max",
    "points_per_octave",
    "ppw",
    "eta.rule",
    "eta.value",
    "fit.model",
    "fit.tolerance",
    "solver",
    "output",
    "derived.",
    "witness.",
    "quasimode.",
];

impl SweepConfig {
    pub fn from_config(c: &Config) -> Result<Self> {
        c.check_keys(SWEEP_KEYS)?;
        let eta_value = c.value_or("eta.value", 1.0)?;
        let eta = match c.get("eta.rule").unwrap_or("proportional_to_k") {
            "proportional_to_k" => EtaRule::ProportionalToK(eta_value),
            "constant" => EtaRule::Constant(eta_value),
            other => return Err(Error::Config(format!("unknown eta.rule `{other}`"))),
        };
        if eta_value == 0.0 || !eta_value.is_finite() {
            return Err(Error::Config("eta.value must be a nonzero real".into()));
        }
        let solver = match c.get("solver").unwrap_or("assembly") {
            "assembly" => Solver::Assembly,
            "oracle" => Solver::Oracle,
            other => return Err(Error::Config(format!("unknown solver `{other}`"))),
        };
        let cfg = SweepConfig {
            geometry: c.require("geometry")?.to_string(),
            registry: c.path("geometry.registry"),
            kind: OperatorKind::parse(c.get("operator").unwrap_or("S"))?,
            spec: c.get("norm").unwrap_or("L2->H1k").parse()?,
            k_min: c.value_or("k_min", 8.0)?,
            k_max: c.value_or("k_max", 256.0)?,
            points_per_octave: c.value_or("points_per_octave", 4)?,
            ppw: c.value_or("ppw", 10)?,
            eta,
            model: c.get("fit.model").unwrap_or("pure_power").parse()?,
            tolerance: c.value("fit.tolerance")?,
            solver,
            output: c.path("output"),
        };
        if cfg.kind == OperatorKind::Custom {
            return Err(Error::Config("custom operators cannot be swept".into()));
        }
        if !(cfg.k_min >= 1.0) {
            return Err(Error::Config(format!(
                "k_min = {} must be at least 1",
                cfg.k_min
            )));
        }
        if cfg.ppw < 4 {
            return Err(Error::Config(format!(
                "ppw = {} is below the minimum of 4",
                cfg.ppw
            )));
        }
        if let Some(t) = cfg.tolerance {
            if !(t > 0.0) {
                return Err(Error::Config(format!(
                    "fit.tolerance = {t} must be positive"
                )));
            }
        }
        let ks = cfg.k_values()?;
        if ks.len() < 4 {
            return Err(Error::Config(format!(
                "the k grid has {} points; a fit needs 4",
                ks.len()
            )));
        }
        Ok(cfg)
    }

    pub fn k_values(&self) -> Result<Vec<f64>> {
        geometric_grid(self.k_min, self.k_max, self.points_per_octave)
    }

    pub fn build_geometry(&self) -> Result<BoundaryGeometry<f64>> {
        let registry = match &self.registry {
            Some(p) => Registry::parse(&std::fs::read_to_string(p).map_err(|e| {
                Error::Config(format!("cannot read registry {}: {e}", p.display()))
            })?)?,
            None => Registry::default(),
        };
        registry.build(&self.geometry)
    }

    /// Canonical `key = value` form, used for the `.meta` sidecar.
    pub fn to_config_text(&self, classification: Classification) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("geometry", self.geometry.clone());
        put("operator", self.kind.to_string());
        put("norm", self.spec.to_string());
        put("k_min", self.k_min.to_string());
        put("k_max", self.k_max.to_string());
        put("points_per_octave", self.points_per_octave.to_string());
        put("ppw", self.ppw.to_string());
        let (rule, v) = match self.eta {
            EtaRule::Constant(v) => ("constant", v),
            EtaRule::ProportionalToK(v) => ("proportional_to_k", v),
        };
        put("eta.rule", rule.into());
        put("eta.value", v.to_string());
        put("fit.model", self.model.to_string());
        if let Some(t) = self.tolerance {
            put("fit.tolerance", t.to_string());
        }
        put(
            "solver",
            match self.solver {
                Solver::Assembly => "assembly",
                Solver::Oracle => "oracle",
            }
            .into(),
        );
        put("derived.classification", classification.to_string());
        out
    }
}

/// One CSV line.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub kind: OperatorKind,
    pub k: f64,
    pub n: usize,
    pub spec: String,
    pub norm: f64,
    /// A [`crate::norms::Method`] name, or `skipped`.
    pub method: String,
    pub converged: bool,
    pub iterations: usize,
}

type RowKey = (String, u64, String, usize);

impl Row {
    fn from_report(r: &NormReport<f64>, spec: &NormSpec<f64>) -> Self {
        Row {
            kind: r.kind,
            k: r.k,
            n: r.n,
            spec: spec.to_string(),
            norm: r.norm,
            method: r.method.to_string(),
            converged: r.converged,
            iterations: r.iterations,
        }
    }

    pub fn is_skipped(&self) -> bool {
        self.method == "skipped"
    }

    /// Sort and identity key: kind, k, spec, then N. `k > 0`, so its bit pattern orders like its value.
    fn key(&self) -> RowKey {
        (
            self.kind.to_string(),
            self.k.to_bits(),
            self.spec.clone(),
            self.n,
        )
    }

    pub fn to_csv(&self) -> String {
        format!(
            "{},{:.16e},{},{},{:.16e},{},{},{}",
            self.kind,
            self.k,
            self.n,
            self.spec,
            self.norm,
            self.method,
            self.converged,
            self.iterations
        )
    }

    pub fn parse(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.split(',').collect();
        let bad = || Error::Argument(format!("malformed CSV row `{line}`"));
        if f.len() != 8 {
            return Err(bad());
        }
        Ok(Row {
            kind: OperatorKind::parse(f[0]).map_err(|_| bad())?,
            k: f[1].parse().map_err(|_| bad())?,
            n: f[2].parse().map_err(|_| bad())?,
            spec: f[3].to_string(),
            norm: f[4].parse().map_err(|_| bad())?,
            method: f[5].to_string(),
            converged: f[6].parse().map_err(|_| bad())?,
            iterations: f[7].parse().map_err(|_| bad())?,
        })
    }
}

pub fn parse_csv(text: &str) -> Result<Vec<Row>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(CSV_HEADER) => {}
        None => return Ok(Vec::new()),
        Some(h) => return Err(Error::Argument(format!("unexpected CSV header `{h}`"))),
    }
    lines.filter(|l| !l.is_empty()).map(Row::parse).collect()
}

pub fn read_csv(path: &Path) -> Result<Vec<Row>> {
    parse_csv(&std::fs::read_to_string(path)?)
}

pub fn render_csv<'a>(rows: impl IntoIterator<Item = &'a Row>) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv());
        out.push('\n');
    }
    out
}

/// Writes through a temporary sibling and renames it over `path`.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn meta_path(csv: &Path) -> PathBuf {
    let mut p = csv.as_os_str().to_owned();
    p.push(".meta");
    PathBuf::from(p)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub p: f64,
    pub q: i32,
}

fn gain(s: Space<f64>) -> f64 {
    match s {
        Space::L2 => 0.0,
        Space::H1 | Space::H1k => 1.0,
        Space::Hs(s) => s,
    }
}

/// Expected growth exponent of the norm in `k`, when the bounds cover the case.
pub fn predict(
    class: Classification,
    kind: OperatorKind,
    spec: NormSpec<f64>,
    eta: EtaRule,
) -> Option<Prediction> {
    use Classification::*;
    let pred = |p: f64, q: i32| Some(Prediction { p, q });
    let base = match kind {
        OperatorKind::S => match class {
            SmoothCurved => pred(-2.0 / 3.0, 0),
            PiecewiseCurved => pred(-2.0 / 3.0, 1),
            Smooth | PiecewiseSmooth => pred(-0.5, 1),
        },
        OperatorKind::D | OperatorKind::Dprime => match class {
            SmoothCurved => pred(0.0, 0),
            Smooth => pred(0.25, 1),
            PiecewiseCurved | PiecewiseSmooth => None,
        },
        OperatorKind::ADirect | OperatorKind::AIndirect => {
            if class != SmoothCurved
                || spec.source != spec.target
                || matches!(spec.source, Space::H1 | Space::H1k)
            {
                return None;
            }
            return match eta {
                EtaRule::ProportionalToK(_) => pred(1.0 / 3.0, 0),
                EtaRule::Constant(_) => pred(0.0, 0),
            };
        }
        OperatorKind::Custom => None,
    }?;
    // Semiclassical targets and L² agree in exponent; each unsmoothed derivative adds one power of k.
    let shift = match (spec.source, spec.target) {
        (Space::L2, Space::L2 | Space::H1k) => 0.0,
        (Space::L2, Space::H1) => 1.0,
        (a, b) if class == SmoothCurved => {
            let d = gain(b) - gain(a);
            if d == 0.0 || d == 1.0 {
                d
            } else {
                return None;
            }
        }
        _ => return None,
    };
    pred(base.p + shift, base.q)
}

pub fn default_tolerance(class: Classification) -> f64 {
    if class.has_corners() {
        CORNER_TOLERANCE
    } else {
        SMOOTH_TOLERANCE
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    /// No bound covers this combination.
    NoPrediction,
    /// Fewer than four usable points.
    NoFit,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::NoPrediction => "n/a",
            Verdict::NoFit => "NOFIT",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub label: String,
    pub classification: Classification,
    pub kind: OperatorKind,
    pub spec: String,
    pub model: FitModel,
    /// Rows of this sweep's grid, in k order.
    pub rows: Vec<Row>,
    /// `(k, reason)` for points that were refused.
    pub skipped: Vec<(f64, String)>,
    pub unconverged: usize,
    pub fit: Option<Fit<f64>>,
    pub prediction: Option<Prediction>,
    pub tolerance: f64,
    pub verdict: Verdict,
}

/// Fits the converged rows of `cfg`'s grid and compares with the prediction.
pub fn evaluate(
    cfg: &SweepConfig,
    label: &str,
    class: Classification,
    all: &[Row],
) -> Result<SweepResult> {
    let ks = cfg.k_values()?;
    let spec = cfg.spec.to_string();
    let mut rows: Vec<Row> = all
        .iter()
        .filter(|r| {
            r.kind == cfg.kind && r.spec == spec && ks.iter().any(|k| (k - r.k).abs() <= 1e-12 * k)
        })
        .cloned()
        .collect();
    rows.sort_by_key(|a| a.key());
    let unconverged = rows
        .iter()
        .filter(|r| !r.is_skipped() && !r.converged)
        .count();
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.converged)
        .map(|r| (r.k, r.norm))
        .collect();
    let fit = fit_exponent(&points, cfg.model).ok();
    let prediction = predict(class, cfg.kind, cfg.spec, cfg.eta);
    let tolerance = cfg.tolerance.unwrap_or_else(|| default_tolerance(class));
    let verdict = match (&fit, prediction) {
        (None, _) => Verdict::NoFit,
        (Some(_), None) => Verdict::NoPrediction,
        (Some(f), Some(p)) if (f.p - p.p).abs() <= tolerance => Verdict::Pass,
        _ => Verdict::Fail,
    };
    Ok(SweepResult {
        label: label.to_string(),
        classification: class,
        kind: cfg.kind,
        spec,
        model: cfg.model,
        rows,
        skipped: Vec::new(),
        unconverged,
        fit,
        prediction,
        tolerance,
        verdict,
    })
}

fn is_unit_circle(g: &BoundaryGeometry<f64>) -> bool {
    g.pieces.len() == 1
        && g.pieces[0].is_periodic()
        && matches!(g.pieces[0].shape, Shape::Arc { radius, .. } if (radius - 1.0).abs() < 1e-14)
}

fn measure(cfg: &SweepConfig, geometry: &BoundaryGeometry<f64>, k: f64, n: usize) -> Result<Row> {
    let eta = cfg.eta.eta(k);
    let report = match cfg.solver {
        Solver::Oracle => oracle_norm(cfg.kind, k, cfg.spec, n, eta)?,
        Solver::Assembly => {
            let disc = discretize(geometry, k, n)?;
            let op = match cfg.kind {
                OperatorKind::ADirect | OperatorKind::AIndirect => {
                    assemble_combined(geometry, k, n, eta, cfg.kind == OperatorKind::ADirect)?.1
                }
                kind => assemble_on(&disc, kind)?,
            };
            operator_norm(&op, &disc, cfg.spec)?
        }
    };
    Ok(Row::from_report(&report, &cfg.spec))
}

/// Runs every grid point not already in the output file and refits.
///
/// Refused points become `skipped` rows (norm NaN). The output CSV is rewritten atomically
/// after every completed point, sorted by (kind, k, spec), with the config in a `.meta` sidecar.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    let geometry = cfg.build_geometry()?;
    if cfg.solver == Solver::Oracle && !is_unit_circle(&geometry) {
        return Err(Error::Config(format!(
            "the oracle solver needs the unit circle, not {}",
            geometry.name
        )));
    }
    let ks = cfg.k_values()?;
    let mut existing = BTreeMap::new();
    if let Some(out) = &cfg.output {
        if out.exists() {
            for r in read_csv(out)? {
                existing.insert(r.key(), r);
            }
        }
        write_atomic(
            &meta_path(out),
            &cfg.to_config_text(geometry.classification),
        )?;
    }
    let spec = cfg.spec.to_string();
    // The matrix size is known before any assembly, which keys resumption.
    // Entries are (k, requested n, actual N, refusal).
    let plan: Vec<(f64, usize, usize, std::result::Result<(), String>)> = ks
        .iter()
        .map(|&k| match cfg.solver {
            Solver::Oracle => (k, oracle_n_max(k), oracle_n_max(k), Ok(())),
            Solver::Assembly => {
                let n = default_n(&geometry, k, cfg.ppw as f64);
                match discretize(&geometry, k, n) {
                    Ok(d) => (k, n, d.len(), Ok(())),
                    Err(e) => (k, n, n, Err(e.to_string())),
                }
            }
        })
        .collect();
    let store = Mutex::new(existing);
    let skipped = Mutex::new(Vec::new());
    let flush = |rows: &BTreeMap<RowKey, Row>| -> Result<()> {
        match &cfg.output {
            Some(out) => write_atomic(out, &render_csv(rows.values())),
            None => Ok(()),
        }
    };
    plan.par_iter()
        .try_for_each(|(k, requested, n, planned)| -> Result<()> {
            let key = (cfg.kind.to_string(), k.to_bits(), spec.clone(), *n);
            if store.lock().unwrap().contains_key(&key) {
                return Ok(());
            }
            let outcome = match planned {
                Ok(()) => measure(cfg, &geometry, *k, *requested).map_err(|e| e.to_string()),
                Err(reason) => Err(reason.clone()),
            };
            let row = outcome.unwrap_or_else(|reason| {
                skipped.lock().unwrap().push((*k, reason));
                Row {
                    kind: cfg.kind,
                    k: *k,
                    n: *n,
                    spec: spec.clone(),
                    norm: f64::NAN,
                    method: "skipped".into(),
                    converged: false,
                    iterations: 0,
                }
            });
            let mut rows = store.lock().unwrap();
            rows.insert(key, row);
            flush(&rows)
        })?;
    let rows = store.into_inner().unwrap();
    flush(&rows)?;
    let all: Vec<Row> = rows.into_values().collect();
    let mut result = evaluate(cfg, &geometry.name, geometry.classification, &all)?;
    let mut skipped = skipped.into_inner().unwrap();
    skipped.sort_by(|a, b| a.0.total_cmp(&b.0));
    result.skipped = skipped;
    Ok(result)
}

/// Re-evaluates a finished sweep from its CSV and `.meta` sidecar.
pub fn load_result(csv: &Path) -> Result<SweepResult> {
    let meta = Config::load(&meta_path(csv))?;
    let cfg = SweepConfig::from_config(&meta)?;
    let class = match meta.require("derived.classification")? {
        "smooth_curved" => Classification::SmoothCurved,
        "smooth" => Classification::Smooth,
        "piecewise_curved" => Classification::PiecewiseCurved,
        "piecewise_smooth" => Classification::PiecewiseSmooth,
        other => return Err(Error::Config(format!("unknown classification `{other}`"))),
    };
    evaluate(&cfg, &cfg.geometry, class, &read_csv(csv)?)
}

/// Comparison table, one line per sweep.
pub fn report_table(results: &[SweepResult]) -> String {
    let mut out = String::new();
    if results.is_empty() {
        return out;
    }
    let _ = writeln!(
        out,
        "{:<18} {:<18} {:<7} {:<18} {:<16} {:>9} {:>11} {:>6} {:>5}  verdict",
        "geometry", "class", "kind", "spec", "model", "p", "predicted", "q", "tol"
    );
    for r in results {
        let p = r.fit.map_or("-".to_string(), |f| format!("{:.4}", f.p));
        let (pp, q) = r
            .prediction
            .map_or(("-".to_string(), "-".to_string()), |p| {
                (format!("{:.4}", p.p), p.q.to_string())
            });
        let _ = writeln!(
            out,
            "{:<18} {:<18} {:<7} {:<18} {:<16} {:>9} {:>11} {:>6} {:>5}  {}",
            r.label,
            r.classification.to_string(),
            r.kind.to_string(),
            r.spec,
            r.model.to_string(),
            p,
            pp,
            q,
            r.tolerance,
            r.verdict
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct WitnessConfig {
    pub geometry: String,
    pub registry: Option<PathBuf>,
    pub kind: Option<WitnessKind>,
    pub ks: Vec<f64>,
    pub epsilon: Option<f64>,
    pub big_m: f64,
    pub output: Option<PathBuf>,
}

impl WitnessConfig {
    pub fn from_config(c: &Config) -> Result<Self> {
        c.check_keys(&[
            "geometry",
            "geometry.registry",
            "k_min",
            "k_max",
            "points_per_octave",
            "output",
            "witness.kind",
            "witness.epsilon",
            "witness.bigM",
        ])?;
        let kind = match c.get("witness.kind") {
            None => None,
            Some("flat") => Some(WitnessKind::Flat),
            Some("curved") => Some(WitnessKind::Curved),
            Some(other) => return Err(Error::Config(format!("unknown witness.kind `{other}`"))),
        };
        let ks = geometric_grid(
            c.value_or("k_min", 16.0)?,
            c.value_or("k_max", 128.0)?,
            c.value_or("points_per_octave", 1)?,
        )?;
        if ks[0] < 1.0 {
            return Err(Error::Config("k_min must be at least 1".into()));
        }
        Ok(WitnessConfig {
            geometry: c.require("geometry")?.to_string(),
            registry: c.path("geometry.registry"),
            kind,
            ks,
            epsilon: c.value("witness.epsilon")?,
            big_m: c.value_or("witness.bigM", DEFAULT_BIG_M)?,
            output: c.path("output"),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WitnessRow {
    pub k: f64,
    pub nodes: usize,
    pub u_norm: f64,
    pub r_l2: f64,
    pub r_h1: f64,
    /// `r_L2` and `r_H1` times the powers of k that make them constant.
    pub compensated: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct WitnessReport {
    pub kind: WitnessKind,
    pub rows: Vec<WitnessRow>,
    /// max/min of each compensated ratio over the sweep.
    pub spread: [f64; 2],
    pub pass: bool,
}

pub const WITNESS_CSV_HEADER: &str = "k,nodes,u_norm,r_l2,r_h1,comp_l2,comp_h1";

impl WitnessReport {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{WITNESS_CSV_HEADER}\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.k, r.nodes, r.u_norm, r.r_l2, r.r_h1, r.compensated[0], r.compensated[1]
            );
        }
        out
    }
}

pub fn run_witness(cfg: &WitnessConfig) -> Result<WitnessReport> {
    let registry = match &cfg.registry {
        Some(p) => Registry::parse(&std::fs::read_to_string(p)?)?,
        None => Registry::default(),
    };
    let g: BoundaryGeometry<f64> = registry.build(&cfg.geometry)?;
    let kind = cfg.kind.unwrap_or(if g.classification.has_corners() {
        WitnessKind::Flat
    } else {
        WitnessKind::Curved
    });
    let (a, b) = match kind {
        WitnessKind::Flat => (0.5, -0.5),
        WitnessKind::Curved => (2.0 / 3.0, -1.0 / 3.0),
    };
    let rows = cfg
        .ks
        .par_iter()
        .map(|&k| {
            let w = match kind {
                WitnessKind::Flat => flat_witness(&g, k, cfg.epsilon, cfg.big_m)?,
                WitnessKind::Curved => curved_witness(&g, k, cfg.epsilon, cfg.big_m)?,
            };
            let r = witness_ratios(&w, &g, default_witness_nodes(&w))?;
            Ok(WitnessRow {
                k,
                nodes: r.nodes,
                u_norm: r.u_norm,
                r_l2: r.r_l2,
                r_h1: r.r_h1,
                compensated: [k.powf(a) * r.r_l2, k.powf(b) * r.r_h1],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let spread = [0, 1].map(|i| {
        let v = rows.iter().map(|r| r.compensated[i]);
        v.clone().fold(0.0, f64::max) / v.fold(f64::INFINITY, f64::min)
    });
    let positive = rows.iter().all(|r| r.compensated.iter().all(|c| *c > 0.0));
    let report = WitnessReport {
        kind,
        rows,
        spread,
        pass: positive && spread.iter().all(|s| *s <= 2.0),
    };
    if let Some(out) = &cfg.output {
        write_atomic(out, &report.to_csv())?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuasimodeConfig {
    pub piece: BoundaryPiece<f64>,
    /// Bound on the trace exponent: 1/4 on segments, 1/6 on arcs.
    pub trace_bound: f64,
    pub rs: Vec<f64>,
    pub width_exponent: f64,
    pub tolerance: f64,
}

/// Upper bound on the normal-derivative exponent.
pub const NORMAL_BOUND: f64 = 1.0;
pub const QUASIMODE_TOLERANCE: f64 = 0.05;

impl QuasimodeConfig {
    pub fn from_config(c: &Config) -> Result<Self> {
        c.check_keys(&[
            "quasimode.shape",
            "quasimode.length",
            "quasimode.radius",
            "quasimode.angle",
            "quasimode.r_min",
            "quasimode.r_max",
            "quasimode.points_per_octave",
            "quasimode.width_exponent",
            "quasimode.tolerance",
        ])?;
        let (piece, trace_bound) = match c.get("quasimode.shape").unwrap_or("segment") {
            "segment" => {
                let h = c.value_or("quasimode.length", 2.0)? / 2.0;
                if !(h > 0.0) {
                    return Err(Error::Config("quasimode.length must be positive".into()));
                }
                (
                    BoundaryPiece::new(Shape::Segment {
                        a: [-h, 0.0],
                        b: [h, 0.0],
                    }),
                    0.25,
                )
            }
            "arc" => {
                let radius = c.value_or("quasimode.radius", 1.0)?;
                let half = c.value_or("quasimode.angle", 1.0)? / 2.0;
                if !(radius > 0.0 && half > 0.0 && half < std::f64::consts::PI) {
                    return Err(Error::Config(
                        "quasimode arc needs radius > 0 and 0 < angle < 2π".into(),
                    ));
                }
                (
                    BoundaryPiece::new(Shape::Arc {
                        center: [0.0, 0.0],
                        radius,
                        theta0: -half,
                        theta1: half,
                    }),
                    1.0 / 6.0,
                )
            }
            other => return Err(Error::Config(format!("unknown quasimode.shape `{other}`"))),
        };
        let rs = geometric_grid(
            c.value_or("quasimode.r_min", 16.0)?,
            c.value_or("quasimode.r_max", 256.0)?,
            c.value_or("quasimode.points_per_octave", 4)?,
        )?;
        if rs.len() < 4 {
            return Err(Error::Config(format!(
                "the r grid has {} points; a fit needs 4",
                rs.len()
            )));
        }
        Ok(QuasimodeConfig {
            piece,
            trace_bound,
            rs,
            width_exponent: c.value_or("quasimode.width_exponent", DEFAULT_WIDTH_EXPONENT)?,
            tolerance: c.value_or("quasimode.tolerance", QUASIMODE_TOLERANCE)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuasimodeReport {
    pub growth: RestrictionGrowth<f64>,
    pub trace_pass: bool,
    pub normal_pass: bool,
}

pub fn run_quasimode(cfg: &QuasimodeConfig) -> Result<QuasimodeReport> {
    let growth = restriction_growth(&cfg.piece, &cfg.rs, cfg.width_exponent)?;
    Ok(QuasimodeReport {
        trace_pass: growth.trace_fit.p <= cfg.trace_bound + cfg.tolerance,
        normal_pass: growth.normal_fit.p <= NORMAL_BOUND + cfg.tolerance,
        growth,
    })
}
