//! Batch front end behind the `subeq` binary.
//!
//! Every command prints one JSON report with the top-level keys
//! `command`, `inputs`, `seed`, `verdicts`, `witnesses` and `timings`;
//! `timings` carries deterministic work counters rather than wall-clock
//! times so that identical inputs give byte-identical reports.
//!
//! Exit codes: 0 all checks pass, 1 a check failed, 2 invalid input.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::cone::{
    self, oracle, ConeConfig, ConvexSetRep, GeneratedCone, Generators, HalfSpace, HalfSpaceList, RecessionCone,
};
use crate::cone::oracle::SupportValue;
use crate::elliptic::{self, BatteryMember, EllipticOperator, HarnessConfig};
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::jet_space::{jet_dim, Jet2};
use crate::report;
use crate::subequation::{self, SpecKind, SubequationSpec};
use crate::subharmonic::{self, DistributionalConfig, ProbeDictionary};

#[derive(Debug, Parser)]
#[command(name = "subeq", version, about = "Subequation geometry and grid-level subharmonicity checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a subequation and report its edge, dual span, completeness
    /// and a batch of stable operators.
    Analyze {
        spec: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 16)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Polar, recession cone, edge, Stab probes and bipolar residual of a
    /// closed convex set.
    Cones {
        set: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Test a grid function for F-subharmonicity.
    Check {
        spec: PathBuf,
        grid: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        tol: Option<f64>,
        /// Mollifier radius (dist mode); defaults to 6h.
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Essential-limsup regularization; `--out` receives the regularized grid.
    Regularize {
        grid: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        radii: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Viscosity / classical / distributional agreement for a linear
    /// elliptic operator on a test battery.
    Linear {
        operator: PathBuf,
        #[arg(long, value_enum, default_value_t = Battery::Shipped)]
        battery: Battery,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check that sampled stable half-spaces cut out the subequation.
    Decompose {
        spec: PathBuf,
        #[arg(long)]
        samples: usize,
        #[arg(long)]
        seed: u64,
        points: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    C2,
    Visc,
    Dist,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Battery {
    Shipped,
    /// Every member negated while keeping its original expectation.
    Flipped,
}

/// Result of one invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn error(e: &Error) -> Self {
        Self { code: exit_code(e), stdout: String::new(), stderr: format!("error: {e}\n") }
    }
}

/// Exit code for a library error: solver and LP breakdowns count as failed
/// checks, everything else as invalid input.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NoConvergence(_) | Error::Lp(_) => 1,
        _ => 2,
    }
}

/// Runs the command line `args` (including the program name).
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    Outcome { code: 0, stdout: text, stderr: String::new() }
                }
                _ => Outcome { code: 2, stdout: String::new(), stderr: text },
            };
        }
    };
    let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| dispatch(cli)));
    match result {
        Ok(Ok((code, text, out))) => match out {
            Some(path) => match std::fs::write(&path, &text) {
                Ok(()) => Outcome { code, stdout: String::new(), stderr: String::new() },
                Err(e) => Outcome::error(&Error::Invalid(format!("cannot write {}: {e}", path.display()))),
            },
            None => Outcome { code, stdout: text, stderr: String::new() },
        },
        Ok(Err(e)) => Outcome::error(&e),
        Err(_) => Outcome::error(&Error::Invalid("internal failure".into())),
    }
}

type Dispatched = (i32, String, Option<PathBuf>);

fn dispatch(cli: Cli) -> Result<Dispatched> {
    match cli.command {
        Command::Analyze { spec, seed, samples, out } => cmd_analyze(&spec, seed, samples).map(|r| r.finish(out)),
        Command::Cones { set, seed, samples, out } => cmd_cones(&set, seed, samples).map(|r| r.finish(out)),
        Command::Check { spec, grid, mode, seed, tol, eps, samples, out } => {
            cmd_check(&spec, &grid, mode, seed, tol, eps, samples).map(|r| r.finish(out))
        }
        Command::Regularize { grid, radii, out } => cmd_regularize(&grid, &radii, out.as_deref()).map(|r| r.finish(None)),
        Command::Linear { operator, battery, seed, samples, eps, tol, out } => {
            cmd_linear(&operator, battery, seed, samples, eps, tol).map(|r| r.finish(out))
        }
        Command::Decompose { spec, samples, seed, points, out } => {
            cmd_decompose(&spec, samples, seed, &points).map(|r| r.finish(out))
        }
    }
}

/// The fixed-schema report plus its exit code.
struct Report {
    code: i32,
    command: &'static str,
    inputs: BTreeMap<String, Value>,
    seed: Option<u64>,
    verdicts: BTreeMap<String, Value>,
    witnesses: BTreeMap<String, Value>,
    timings: BTreeMap<String, Value>,
}

impl Report {
    fn new(command: &'static str, seed: Option<u64>) -> Self {
        Self {
            code: 0,
            command,
            inputs: BTreeMap::new(),
            seed,
            verdicts: BTreeMap::new(),
            witnesses: BTreeMap::new(),
            timings: BTreeMap::new(),
        }
    }

    fn input(&mut self, k: &str, v: impl Serialize) -> Result<()> {
        self.inputs.insert(k.into(), report::to_value(&v)?);
        Ok(())
    }

    fn verdict(&mut self, k: &str, v: impl Serialize) -> Result<()> {
        self.verdicts.insert(k.into(), report::to_value(&v)?);
        Ok(())
    }

    fn witness(&mut self, k: &str, v: impl Serialize) -> Result<()> {
        self.witnesses.insert(k.into(), report::to_value(&v)?);
        Ok(())
    }

    fn count(&mut self, k: &str, v: usize) {
        self.timings.insert(k.into(), Value::from(v as u64));
    }

    fn finish(self, out: Option<PathBuf>) -> Dispatched {
        let mut top = serde_json::Map::new();
        top.insert("command".into(), Value::from(self.command));
        top.insert("inputs".into(), Value::Object(self.inputs.into_iter().collect()));
        top.insert("seed".into(), self.seed.map_or(Value::Null, Value::from));
        top.insert("verdicts".into(), Value::Object(self.verdicts.into_iter().collect()));
        top.insert("witnesses".into(), Value::Object(self.witnesses.into_iter().collect()));
        top.insert("timings".into(), Value::Object(self.timings.into_iter().collect()));
        (self.code, report::write_json(&Value::Object(top)), out)
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Invalid(format!("cannot read {}: {e}", path.display())))
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn load_spec(path: &Path) -> Result<SubequationSpec> {
    SubequationSpec::parse_json(&read(path)?).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn load_grid(path: &Path) -> Result<GridFunction> {
    GridFunction::parse(&read(path)?).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn cone_config(seed: u64) -> ConeConfig {
    ConeConfig::with_seed(seed)
}

#[derive(Serialize)]
struct StableRow {
    operator: Vec<f64>,
    lambda: f64,
    symbol_spectrum: Vec<f64>,
}

fn cmd_analyze(path: &Path, seed: u64, samples: usize) -> Result<Report> {
    let spec = load_spec(path)?;
    let cfg = cone_config(seed);
    let mut r = Report::new("analyze", Some(seed));
    r.input("spec", path_str(path))?;
    r.input("samples", samples)?;
    r.input("n", spec.n)?;
    r.input("kind", spec.kind)?;

    let validation = subequation::validate(&spec, samples, seed);
    let edge = cone::edge(&spec.rep, &cfg)?;
    let span = cone::dual_span(&spec.rep, &cfg)?;
    let completeness = subequation::second_order_complete(&spec, &cfg)?;
    let (stable, stable_note) = match subequation::sample_stable(&spec, samples, seed) {
        Ok(s) => (s, None),
        Err(e @ Error::Unsupported(_)) => (Vec::new(), Some(e.to_string())),
        Err(e) => return Err(e),
    };
    let rows: Vec<StableRow> = stable
        .iter()
        .map(|s| StableRow {
            operator: s.operator.to_vector(),
            lambda: s.lambda,
            symbol_spectrum: s.operator.a.eigen().values,
        })
        .collect();
    let all_elliptic = stable.iter().all(|s| s.min_symbol_eigenvalue > 1e-10);

    r.verdict("valid", validation.all_pass())?;
    r.verdict("positivity", validation.positivity)?;
    r.verdict("negativity", validation.negativity)?;
    r.verdict("topological", validation.topological)?;
    r.verdict("proper", validation.proper)?;
    r.verdict("nonempty", validation.nonempty)?;
    r.verdict("complete", completeness.complete)?;
    r.verdict("edge_dim", edge.dim())?;
    r.verdict("dual_span_dim", span.dim())?;
    r.verdict("stable_samples_elliptic", (!stable.is_empty()).then_some(all_elliptic))?;

    r.witness("validation", &validation.witnesses)?;
    r.witness("edge_basis", &edge.basis)?;
    r.witness("dual_span_basis", &span.basis)?;
    r.witness("completeness", &completeness)?;
    r.witness("stable_samples", &rows)?;
    if let Some(note) = stable_note {
        r.witness("stable_samples_note", note)?;
    }
    r.count("jet_dim", jet_dim(spec.n));
    r.count("stable_samples", rows.len());
    r.count("validation_witnesses", validation.witnesses.len());
    if !validation.all_pass() {
        r.code = 1;
    }
    Ok(r)
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum SetFile {
    Hrep { dim: usize, halfspaces: Vec<SetHalfSpace> },
    Vrep {
        dim: usize,
        #[serde(default)]
        points: Vec<Vec<f64>>,
        #[serde(default)]
        rays: Vec<Vec<f64>>,
        #[serde(default)]
        lines: Vec<Vec<f64>>,
    },
    Cone { dim: usize, rays: Vec<Vec<f64>> },
    BuiltinParabolaA9,
    BuiltinUnitBall { dim: usize },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SetHalfSpace {
    w: Vec<f64>,
    #[serde(default)]
    lambda: f64,
}

/// A parsed set file; `cone` is kept when the input was a generated cone.
struct ParsedSet {
    rep: ConvexSetRep,
    cone: Option<GeneratedCone>,
    kind: &'static str,
}

fn parse_set(text: &str) -> Result<ParsedSet> {
    if text.trim().is_empty() {
        return Err(Error::Parse("empty set file".into()));
    }
    let file: SetFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    Ok(match file {
        SetFile::Hrep { dim, halfspaces } => {
            let items = halfspaces.into_iter().map(|h| HalfSpace::new(h.w, h.lambda)).collect::<Result<Vec<_>>>()?;
            ParsedSet { rep: HalfSpaceList::new(dim, items)?.into(), cone: None, kind: "hrep" }
        }
        SetFile::Vrep { dim, points, rays, lines } => {
            ParsedSet { rep: Generators::new(dim, points, rays, lines)?.into(), cone: None, kind: "vrep" }
        }
        SetFile::Cone { dim, rays } => {
            let c = GeneratedCone::new(dim, rays)?;
            ParsedSet { rep: c.to_generators().into(), cone: Some(c), kind: "cone" }
        }
        SetFile::BuiltinParabolaA9 => {
            ParsedSet { rep: ConvexSetRep::Oracle(oracle::parabola_a9()), cone: None, kind: "builtin_parabola_a9" }
        }
        SetFile::BuiltinUnitBall { dim } => {
            if dim == 0 {
                return Err(Error::Invalid("dimension must be positive".into()));
            }
            ParsedSet { rep: ConvexSetRep::Oracle(oracle::unit_ball(dim)), cone: None, kind: "builtin_unit_ball" }
        }
    })
}

/// Serializable description of a representation; oracles carry no data.
fn describe(rep: &ConvexSetRep) -> Result<Value> {
    match rep {
        ConvexSetRep::HRep(h) => {
            let mut m = serde_json::Map::new();
            m.insert("kind".into(), Value::from("halfspace_list"));
            m.insert("halfspaces".into(), report::to_value(h.items())?);
            Ok(Value::Object(m))
        }
        ConvexSetRep::VRep(g) => {
            let mut m = serde_json::Map::new();
            m.insert("kind".into(), Value::from("generated"));
            m.insert("points".into(), report::to_value(&g.points)?);
            m.insert("rays".into(), report::to_value(&g.rays)?);
            m.insert("lines".into(), report::to_value(&g.lines)?);
            Ok(Value::Object(m))
        }
        ConvexSetRep::Oracle(o) => {
            let mut m = serde_json::Map::new();
            m.insert("kind".into(), Value::from("oracle"));
            m.insert("name".into(), Value::from(o.name.clone()));
            Ok(Value::Object(m))
        }
    }
}

fn describe_recession(rc: &RecessionCone) -> Result<Value> {
    match rc {
        RecessionCone::HRep(h) => describe(&ConvexSetRep::HRep(h.clone())),
        RecessionCone::Generated(g) => {
            let mut m = serde_json::Map::new();
            m.insert("kind".into(), Value::from("cone"));
            m.insert("rays".into(), report::to_value(&g.rays)?);
            Ok(Value::Object(m))
        }
        RecessionCone::Oracle(o) => describe(&ConvexSetRep::Oracle(o.clone())),
    }
}

fn unit_vector(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 && n <= 1.0 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Scale of the finite data of a set, used for the sampling box.
fn data_scale(rep: &ConvexSetRep) -> f64 {
    let m = match rep {
        ConvexSetRep::HRep(h) => h
            .items()
            .iter()
            .map(|it| it.lambda.abs() / crate::linalg::norm(&it.w))
            .fold(0.0, f64::max),
        ConvexSetRep::VRep(g) => g.points.iter().flatten().map(|x| x.abs()).fold(0.0, f64::max),
        ConvexSetRep::Oracle(o) => o.diameter(),
    };
    2.0 * m.max(1.0)
}

#[derive(Serialize)]
struct StabRow {
    w: Vec<f64>,
    stab: bool,
}

#[derive(Serialize)]
struct SupportRow {
    w: Vec<f64>,
    infimum: f64,
    point: Vec<f64>,
}

fn cmd_cones(path: &Path, seed: u64, samples: usize) -> Result<Report> {
    let set = parse_set(&read(path)?).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })?;
    let cfg = cone_config(seed);
    let d = set.rep.dim();
    let mut r = Report::new("cones", Some(seed));
    r.input("set", path_str(path))?;
    r.input("kind", set.kind)?;
    r.input("dim", d)?;
    r.input("samples", samples)?;

    let polar = cone::polar_set(&set.rep, &cfg)?;
    let rec = cone::recession_cone(&set.rep, &cfg)?;
    let edge = cone::edge(&set.rep, &cfg)?;
    let span = cone::dual_span(&set.rep, &cfg)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stab = Vec::with_capacity(samples);
    for _ in 0..samples {
        let w = unit_vector(&mut rng, d);
        let s = cone::stab_membership(&w, &set.rep, &cfg)?;
        stab.push(StabRow { w, stab: s });
    }
    let mut support = Vec::with_capacity(2 * d);
    for i in 0..d {
        for sign in [1.0, -1.0] {
            let mut w = vec![0.0; d];
            w[i] = sign;
            let (infimum, point) = match cone::support_infimum(&set.rep, &w, &cfg)? {
                SupportValue::Finite { value, argmin } => (value, argmin),
                SupportValue::NegInfinity { witness } => (f64::NEG_INFINITY, witness),
            };
            support.push(SupportRow { w, infimum, point });
        }
    }

    // F ⊂ (F⁰)⁰ always; equality is expected when 0 ∈ F
    let probes = samples.max(1) * 4;
    let scale = data_scale(&set.rep);
    let pts: Vec<Vec<f64>> = (0..probes)
        .map(|_| (0..d).map(|_| rng.gen_range(-scale..scale)).collect())
        .collect();
    let (bipolar_residual, bipolar_checked) = match &set.rep {
        ConvexSetRep::Oracle(_) => (None, 0),
        rep => {
            let bb = cone::bipolar_roundtrip(rep, &cfg)?;
            let zero_inside = rep.contains(&vec![0.0; d], 1e-12);
            let bad = pts
                .iter()
                .filter(|x| {
                    let a = rep.contains(x, 1e-9);
                    let b = bb.contains(x, 1e-9);
                    (a && !b) || (zero_inside && b && !a)
                })
                .count();
            (Some(bad), pts.len())
        }
    };
    let self_polar = match &set.cone {
        Some(c) => {
            let dual = cone::polar_cone(c);
            Some(pts.iter().all(|x| c.contains(x, 1e-9) == dual.contains(x, 1e-9)))
        }
        None => None,
    };

    r.verdict("edge_dim", edge.dim())?;
    r.verdict("dual_span_dim", span.dim())?;
    r.verdict("stab_true", stab.iter().filter(|s| s.stab).count())?;
    r.verdict("bipolar_ok", bipolar_residual.map(|b| b == 0))?;
    r.verdict("self_polar", self_polar)?;

    r.witness("polar", describe(&polar)?)?;
    r.witness("recession_cone", describe_recession(&rec)?)?;
    r.witness("edge_basis", &edge.basis)?;
    r.witness("dual_span_basis", &span.basis)?;
    r.witness("stab_probes", &stab)?;
    r.witness("support", &support)?;
    r.witness("bipolar_residual", bipolar_residual)?;
    r.count("stab_probes", stab.len());
    r.count("support_directions", support.len());
    r.count("bipolar_points", bipolar_checked);
    if bipolar_residual.is_some_and(|b| b > 0) {
        r.code = 1;
    }
    Ok(r)
}

fn cmd_check(
    spec_path: &Path,
    grid_path: &Path,
    mode: Mode,
    seed: Option<u64>,
    tol: Option<f64>,
    eps: Option<f64>,
    samples: Option<usize>,
) -> Result<Report> {
    let spec = load_spec(spec_path)?;
    let u = load_grid(grid_path)?;
    if !subharmonic::spec_matches_grid(&u, &spec) {
        return Err(Error::DimensionMismatch { expected: spec.n, got: u.n() });
    }
    if let Some(t) = tol {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::Invalid(format!("tolerance {t} must be finite and nonnegative")));
        }
    }
    let mut r = Report::new("check", seed);
    r.input("spec", path_str(spec_path))?;
    r.input("grid", path_str(grid_path))?;
    r.input("n", u.n())?;
    r.input("shape", u.shape())?;
    r.input("h", u.h())?;
    let pass = match mode {
        Mode::C2 => {
            r.input("mode", "c2")?;
            let rep = subharmonic::c2_membership(&u, &spec, tol)?;
            r.witness("report", &rep)?;
            r.count("points_checked", rep.checked);
            rep.pass
        }
        Mode::Visc => {
            r.input("mode", "visc")?;
            let tol = tol.unwrap_or(1e-6);
            r.input("tol", tol)?;
            let probes = ProbeDictionary::standard(u.n());
            let rep = subharmonic::viscosity_check(&u, &spec, &probes, tol)?;
            r.witness("report", &rep)?;
            r.count("points_checked", rep.points_checked);
            r.count("outside_probes", rep.outside_probes);
            rep.pass
        }
        Mode::Dist => {
            r.input("mode", "dist")?;
            let seed = seed.ok_or_else(|| Error::Invalid("--seed is required for --mode dist".into()))?;
            let mut cfg = DistributionalConfig::new(eps.unwrap_or(6.0 * u.h()), seed);
            if let Some(t) = tol {
                cfg.tol = t;
            }
            if let Some(s) = samples {
                cfg.samples = s;
            }
            r.input("eps", cfg.eps)?;
            r.input("tol", cfg.tol)?;
            r.input("samples", cfg.samples)?;
            let rep = subharmonic::distributional_check(&u, &spec, &cfg)?;
            r.witness("report", &rep)?;
            r.count("points_checked", rep.points_checked);
            r.count("samples", rep.samples);
            rep.pass
        }
    };
    r.verdict("pass", pass)?;
    r.count("grid_nodes", u.len());
    if !pass {
        r.code = 1;
    }
    Ok(r)
}

fn cmd_regularize(grid_path: &Path, radii: &[f64], out: Option<&Path>) -> Result<Report> {
    let u = load_grid(grid_path)?;
    if radii.iter().any(|r| !r.is_finite() || *r <= 0.0) {
        return Err(Error::Invalid("radii must be positive".into()));
    }
    let ess = subharmonic::ess_limsup(&u, radii)?;
    let all: Vec<usize> = (0..u.len()).collect();
    let audit = subharmonic::regularization_properties(&u, &ess, None, &all);
    let mut r = Report::new("regularize", None);
    r.input("grid", path_str(grid_path))?;
    r.input("radii", radii)?;
    r.input("h", u.h())?;
    r.verdict("radius_monotone", audit.radius_monotone)?;
    r.verdict("dominates_input", audit.lebesgue_points)?;
    let sups: Vec<f64> = ess.stack.iter().map(|g| g.values().iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect();
    r.witness("sup_per_radius", &sups)?;
    r.witness("r_min", ess.r_min())?;
    match out {
        Some(p) => {
            std::fs::write(p, ess.finest().to_text())
                .map_err(|e| Error::Invalid(format!("cannot write {}: {e}", p.display())))?;
            r.input("out", path_str(p))?;
        }
        None => r.witness("grid", ess.finest().to_text())?,
    }
    r.count("grid_nodes", u.len());
    r.count("radii", radii.len());
    if !audit.radius_monotone || !audit.lebesgue_points {
        r.code = 1;
    }
    Ok(r)
}

#[derive(Serialize)]
struct MemberRow {
    name: String,
    expected: bool,
    viscosity: bool,
    classical: bool,
    distributional: bool,
    agree: bool,
    matches_expected: bool,
    roundtrip_error: f64,
    roundtrip_bound: f64,
    roundtrip_ok: bool,
}

fn cmd_linear(
    path: &Path,
    battery: Battery,
    seed: u64,
    samples: Option<usize>,
    eps: Option<f64>,
    tol: Option<f64>,
) -> Result<Report> {
    let text = read(path)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let loader = |p: &str| load_grid(&base.join(p));
    let op = EllipticOperator::parse_json(&text, &loader)?;
    let mut members: Vec<BatteryMember> = elliptic::shipped_battery(&op)?;
    if battery == Battery::Flipped {
        for m in &mut members {
            let neg: Vec<f64> = m.u.values().iter().map(|v| -v).collect();
            m.u = m.u.with_values(neg)?;
            m.name = format!("flip:{}", m.name);
        }
    }
    let mut cfg = HarnessConfig::new(seed);
    if let Some(s) = samples {
        cfg.samples = s;
    }
    if let Some(e) = eps {
        if !(e.is_finite() && e > 0.0) {
            return Err(Error::Invalid(format!("eps {e} must be positive")));
        }
        cfg.eps_cells = e / elliptic::BATTERY_H;
    }
    if let Some(t) = tol {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::Invalid(format!("tolerance {t} must be finite and nonnegative")));
        }
        cfg.viscosity_tol = t;
    }
    let harness = elliptic::equivalence_harness(&members, &op, &cfg)?;
    let rows: Vec<MemberRow> = harness
        .members
        .iter()
        .map(|m| MemberRow {
            name: m.name.clone(),
            expected: m.expected,
            viscosity: m.viscosity,
            classical: m.classical,
            distributional: m.distributional,
            agree: m.agree,
            matches_expected: m.agree && m.viscosity == m.expected,
            roundtrip_error: m.roundtrip_error,
            roundtrip_bound: m.roundtrip_bound,
            roundtrip_ok: m.roundtrip_ok,
        })
        .collect();
    let coherent = rows.iter().all(|m| m.agree);
    let expected = rows.iter().all(|m| m.matches_expected);

    let mut r = Report::new("linear", Some(seed));
    r.input("operator", path_str(path))?;
    r.input("battery", if battery == Battery::Shipped { "shipped" } else { "flipped" })?;
    r.input("h", elliptic::BATTERY_H)?;
    r.input("eps", cfg.eps_cells * elliptic::BATTERY_H)?;
    r.input("samples", cfg.samples)?;
    r.input("viscosity_tol", cfg.viscosity_tol)?;
    r.verdict("pass", harness.pass && expected)?;
    r.verdict("coherent", coherent)?;
    r.verdict("matches_expected", expected)?;
    r.verdict("roundtrip_ok", rows.iter().all(|m| m.roundtrip_ok))?;
    r.witness("members", &rows)?;
    r.count("members", rows.len());
    r.count("grid_nodes", elliptic::BATTERY_NODES * elliptic::BATTERY_NODES);
    if !(harness.pass && expected) {
        r.code = 1;
    }
    Ok(r)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PointsFile {
    #[serde(default)]
    inside: Vec<Vec<f64>>,
    #[serde(default)]
    outside: Vec<Vec<f64>>,
}

fn cmd_decompose(spec_path: &Path, samples: usize, seed: u64, points_path: &Path) -> Result<Report> {
    let spec = load_spec(spec_path)?;
    if spec.halfspaces().is_none() && spec.kind != SpecKind::BuiltinPsd {
        return Err(Error::Unsupported("decomposition needs an H-rep or builtin spec".into()));
    }
    if samples == 0 {
        return Err(Error::Invalid("--samples must be positive".into()));
    }
    let pts: PointsFile = serde_json::from_str(&read(points_path)?)
        .map_err(|e| Error::Parse(format!("{}: {e}", points_path.display())))?;
    let to_jets = |v: &[Vec<f64>]| v.iter().map(|x| Jet2::from_vector(spec.n, x)).collect::<Result<Vec<_>>>();
    let inside = to_jets(&pts.inside)?;
    let outside = to_jets(&pts.outside)?;
    let stable = subequation::sample_stable(&spec, samples, seed)?;
    let rep = subequation::decomposition_check(&spec, &stable, &inside, &outside, seed)?;

    let mut r = Report::new("decompose", Some(seed));
    r.input("spec", path_str(spec_path))?;
    r.input("points", path_str(points_path))?;
    r.input("samples", samples)?;
    r.verdict("pass", rep.passes())?;
    r.verdict("inside_ok", rep.inside_violations.is_empty())?;
    r.verdict("outside_excluded", rep.outside.iter().filter(|o| o.excluded).count())?;
    r.witness("inside_violations", &rep.inside_violations)?;
    r.witness("escalation_trace", &rep.outside)?;
    r.count("inside_points", inside.len());
    r.count("outside_points", outside.len());
    r.count("samples_used", rep.outside.iter().map(|o| o.samples_used).sum::<usize>() + stable.len());
    if !rep.passes() {
        r.code = 1;
    }
    Ok(r)
}
