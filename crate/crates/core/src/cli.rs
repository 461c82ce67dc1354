//! The `hitchin` command line.
//!
//! Every command writes a JSON report `{"manifest", "results", "warnings"}`
//! plus CSV tables into `--out`, and exits with 0 (pass), 1 (quantitative
//! failure) or 2 (invalid input).

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::f64::consts::{PI, TAU};
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::action::{full_action, reduced_action, ActionError, ActionReport};
use crate::fields::{
    transformed_pair, Branch, CothCsch, FieldConfig, FieldError, Point, Smoothness, TanhSech,
    TransformedSystem,
};
use crate::holonomy::{
    circle_holonomy, holonomy_convergence_profile, limiting_map, HolonomyError,
};
use crate::liealg::PairingKind;
use crate::numerics::{OdeSpec, QuadratureSpec};
use crate::residual::{
    calibrate_convention, matrix_residual, ode_residual, separation_scan, transformed_residual,
    ConventionCalibration, ResidualError, CALIBRATION_THRESHOLD,
};

pub const EXCLUSION_ENV: &str = "HITCHIN_EXCLUSION_RADIUS";
const ODE_THRESHOLD: f64 = 1e-10;
const TRANSFORMED_THRESHOLD: f64 = 1e-12;
const MATRIX_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(name = "hitchin", version, about = "Exact solutions of Hitchin's equations on the plane")]
pub struct Cli {
    /// Directory for reports and tables.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Residuals of the reduced and matrix equations.
    Verify(VerifyArgs),
    /// Radial and full action integrals.
    Action(ActionArgs),
    /// Holonomy around origin-centred circles.
    Holonomy(HolonomyArgs),
    /// Sweep a quantity over a range of c.
    Scan(ScanArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchArg {
    Exact,
    Singular,
}

impl From<BranchArg> for Branch {
    fn from(b: BranchArg) -> Branch {
        match b {
            BranchArg::Exact => Branch::Exact,
            BranchArg::Singular => Branch::Singular,
        }
    }
}

#[derive(Debug, Args)]
pub struct SourceArgs {
    /// Shape parameter of the radial family.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "config", required_unless_present = "config")]
    pub c: Option<f64>,
    /// Particle file {"particles": [{"x", "y", "c"?}]}.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "exact")]
    pub branch: BranchArg,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long, default_value_t = 1e-3)]
    pub r_min: f64,
    #[arg(long, default_value_t = 1e3)]
    pub r_max: f64,
    /// Radii on the log grid.
    #[arg(long, default_value_t = 200)]
    pub points: usize,
    /// Finite-difference step of the matrix residuals.
    #[arg(long, default_value_t = 1e-4)]
    pub h: f64,
    /// Matrix-residual sample points.
    #[arg(long, default_value_t = 50)]
    pub samples: usize,
    /// Draw sample points at random with this seed instead of a spiral.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ActionArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub c: f64,
    #[arg(long, default_value = "killing")]
    pub pairing: PairingKind,
    #[arg(long, default_value_t = 1e-10)]
    pub rel_tol: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub abs_tol: f64,
    #[arg(long, default_value_t = 100_000)]
    pub max_subdivisions: usize,
}

#[derive(Debug, Args)]
pub struct HolonomyArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long, allow_hyphen_values = true, conflicts_with = "sweep", required_unless_present = "sweep")]
    pub radius: Option<f64>,
    /// Comma-separated increasing radii.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub sweep: Option<Vec<f64>>,
    /// RK4 steps per revolution.
    #[arg(long, default_value_t = 4096)]
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantity {
    Action,
    Winding,
    Smoothness,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[arg(long, value_enum)]
    pub quantity: Quantity,
    /// start:stop:step, inclusive.
    #[arg(long, allow_hyphen_values = true)]
    pub c: String,
    /// Circle radius for winding scans.
    #[arg(long, default_value_t = 1e4)]
    pub radius: f64,
    #[arg(long, default_value_t = 4096)]
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: BTreeMap<String, Value>,
    pub tool_version: String,
    pub outputs: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub manifest: RunManifest,
    pub results: Value,
    pub warnings: Vec<String>,
}

#[derive(Debug)]
pub enum CliError {
    /// Exit 2.
    Input(String),
    /// Exit 1.
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Failure(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "invalid input: {m}"),
            CliError::Failure(m) => write!(f, "failure: {m}"),
        }
    }
}

impl From<FieldError> for CliError {
    fn from(e: FieldError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<ResidualError> for CliError {
    fn from(e: ResidualError) -> Self {
        match e {
            ResidualError::Field(f) => f.into(),
            ResidualError::InvalidStep { .. } | ResidualError::NotExact => {
                CliError::Input(e.to_string())
            }
            ResidualError::CalibrationFailed { .. } => CliError::Failure(e.to_string()),
        }
    }
}

impl From<ActionError> for CliError {
    fn from(e: ActionError) -> Self {
        match e {
            ActionError::InvalidParameter(_)
            | ActionError::Field(_)
            | ActionError::Residual(_)
            | ActionError::Unsupported(_) => CliError::Input(e.to_string()),
            ActionError::Quadrature(q) if matches!(q, crate::numerics::QuadratureError::Spec(_)) => {
                CliError::Input(q.to_string())
            }
            ActionError::Quadrature(_) | ActionError::NotRadial { .. } => {
                CliError::Failure(e.to_string())
            }
        }
    }
}

impl From<HolonomyError> for CliError {
    fn from(e: HolonomyError) -> Self {
        match e {
            HolonomyError::Undersampled { .. } | HolonomyError::DeterminantDrift(_) => {
                CliError::Failure(e.to_string())
            }
            _ => CliError::Input(e.to_string()),
        }
    }
}

/// Outcome of a command before it is written to disk.
struct Outcome {
    command: &'static str,
    parameters: BTreeMap<String, Value>,
    results: Value,
    warnings: Vec<String>,
    tables: Vec<(String, Table)>,
    /// Quantitative failure to report after writing.
    failure: Option<String>,
}

struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(report) => {
            if let Ok(text) = serde_json::to_string_pretty(&report) {
                use std::io::Write;
                let _ = writeln!(std::io::stdout().lock(), "{text}");
            }
            0
        }
        Err(e) => {
            eprintln!("hitchin: {e}");
            e.exit_code()
        }
    }
}

/// Runs the command, writes its outputs and returns the report.
pub fn execute(cli: &Cli) -> Result<Report, CliError> {
    let exclusion = exclusion_radius()?;
    let outcome = match &cli.command {
        Command::Verify(a) => verify(a, exclusion)?,
        Command::Action(a) => action(a)?,
        Command::Holonomy(a) => holonomy(a, exclusion)?,
        Command::Scan(a) => scan(a, exclusion)?,
    };
    let report = write_outputs(&cli.out, outcome, exclusion)?;
    Ok(report)
}

fn exclusion_radius() -> Result<Option<f64>, CliError> {
    match std::env::var(EXCLUSION_ENV) {
        Ok(text) => {
            let v: f64 = text
                .trim()
                .parse()
                .map_err(|_| CliError::Input(format!("{EXCLUSION_ENV}={text} is not a number")))?;
            if !(v.is_finite() && v > 0.0) {
                return Err(CliError::Input(format!("{EXCLUSION_ENV} must be positive")));
            }
            Ok(Some(v))
        }
        Err(_) => Ok(None),
    }
}

fn write_outputs(dir: &Path, mut outcome: Outcome, exclusion: Option<f64>) -> Result<Report, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?;
    let mut outputs = Vec::new();
    for (name, table) in &outcome.tables {
        let path = dir.join(name);
        let io = |e: csv::Error| CliError::Failure(format!("{}: {e}", path.display()));
        let mut w = csv::Writer::from_path(&path).map_err(io)?;
        w.write_record(&table.header).map_err(io)?;
        for row in &table.rows {
            w.write_record(row).map_err(io)?;
        }
        w.flush()
            .map_err(|e| CliError::Failure(format!("{}: {e}", path.display())))?;
        outputs.push(path.display().to_string());
    }
    let report_path = dir.join(format!("{}.json", outcome.command));
    outputs.push(report_path.display().to_string());
    if let Some(e) = exclusion {
        outcome.parameters.insert("exclusion_radius".into(), json!(e));
    }
    let report = Report {
        manifest: RunManifest {
            command: outcome.command.to_string(),
            parameters: outcome.parameters,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            outputs,
        },
        results: outcome.results,
        warnings: outcome.warnings,
    };
    let text = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::Failure(e.to_string()))?;
    fs::write(&report_path, text + "\n")
        .map_err(|e| CliError::Failure(format!("{}: {e}", report_path.display())))?;
    match outcome.failure {
        Some(msg) => Err(CliError::Failure(msg)),
        None => Ok(report),
    }
}

fn with_exclusion(cfg: FieldConfig, exclusion: Option<f64>) -> Result<FieldConfig, CliError> {
    Ok(match exclusion {
        Some(e) => cfg.with_exclusion(e)?,
        None => cfg,
    })
}

fn load_source(src: &SourceArgs, exclusion: Option<f64>) -> Result<FieldConfig, CliError> {
    let cfg = match (&src.config, src.c) {
        (Some(path), _) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            FieldConfig::from_json(&text)?
        }
        (None, Some(c)) => match src.branch {
            BranchArg::Exact => FieldConfig::exact(c)?,
            BranchArg::Singular => FieldConfig::singular(c)?,
        },
        (None, None) => return Err(CliError::Input("either --c or --config is required".into())),
    };
    with_exclusion(cfg, exclusion)
}

fn source_parameters(src: &SourceArgs, params: &mut BTreeMap<String, Value>) {
    if let Some(c) = src.c {
        params.insert("c".into(), json!(c));
        params.insert("branch".into(), json!(src.branch));
    }
    if let Some(p) = &src.config {
        params.insert("config".into(), json!(p.display().to_string()));
    }
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

fn verify(a: &VerifyArgs, exclusion: Option<f64>) -> Result<Outcome, CliError> {
    if !(a.r_min > 0.0 && a.r_max >= a.r_min && a.r_max.is_finite()) || a.points == 0 {
        return Err(CliError::Input("need 0 < r-min <= r-max and points >= 1".into()));
    }
    if !(a.h > 0.0 && a.h.is_finite()) {
        return Err(CliError::Input("h must be positive".into()));
    }
    let cfg = load_source(&a.source, exclusion)?;
    let mut params = BTreeMap::new();
    source_parameters(&a.source, &mut params);
    params.insert("r_min".into(), json!(a.r_min));
    params.insert("r_max".into(), json!(a.r_max));
    params.insert("points".into(), json!(a.points));
    params.insert("h".into(), json!(a.h));
    params.insert("samples".into(), json!(a.samples));
    if let Some(s) = a.seed {
        params.insert("seed".into(), json!(s));
    }
    let mut warnings = Vec::new();
    let calibration = match calibrate_convention(&with_exclusion(FieldConfig::exact(1.0)?, exclusion)?) {
        Ok(cal) => Some(cal),
        Err(e) => {
            warnings.push(format!("convention calibration failed: {e}; matrix-level checks skipped"));
            None
        }
    };
    if let Some(cal) = &calibration {
        warnings.push(format!(
            "calibrated convention constants: kappa = {:.6}i, connection weight = {:.6} (calibration residual {:.2e})",
            cal.kappa.im, cal.connection_weight.re, cal.residual
        ));
    }

    let Some(profile) = cfg.radial_profile() else {
        return verify_particles(cfg, a, params, warnings, calibration);
    };

    // Reduced ODE residuals.
    let branch = profile.branch();
    let mut rows = Vec::new();
    let mut per_radius = Vec::new();
    let mut max_ode: f64 = 0.0;
    let mut per_eq = [0.0f64; 3];
    for r in log_grid(a.r_min, a.r_max, a.points) {
        if branch == Branch::Singular && (r - 1.0).abs() < 1e-2 {
            continue;
        }
        let res = ode_residual(&profile, r)?;
        max_ode = max_ode.max(res.max_abs());
        per_eq[0] = per_eq[0].max(res.r1.abs());
        per_eq[1] = per_eq[1].max(res.r2.abs());
        per_eq[2] = per_eq[2].max(res.r3.abs());
        per_radius.push(json!({"radius": r, "max_abs": res.max_abs()}));
        rows.push(vec![num(r), num(res.r1), num(res.r2), num(res.r3)]);
    }

    // Transformed system on t ∈ [−5, 5].
    let c = profile.c();
    let closed: Box<dyn TransformedSystem> = match branch {
        Branch::Exact => Box::new(TanhSech { c }),
        Branch::Singular => Box::new(CothCsch { c }),
    };
    let from_profile = transformed_pair(profile);
    let mut max_closed: f64 = 0.0;
    let mut max_pair_gap: f64 = 0.0;
    for i in 0..=1000 {
        let t = -5.0 + 0.01 * i as f64;
        if branch == Branch::Singular && t.abs() < 1e-2 {
            continue;
        }
        let (q1, q2) = transformed_residual(closed.as_ref(), branch, t)?;
        max_closed = max_closed.max(q1.abs()).max(q2.abs());
        let r = (-t).exp();
        if branch == Branch::Exact || (r - 1.0).abs() >= 1e-2 {
            let (f1, g1) = from_profile.values(t)?;
            let (f2, g2) = closed.values(t)?;
            max_pair_gap = max_pair_gap.max((f1 - f2).abs()).max((g1 - g2).abs());
        }
    }

    // Matrix residuals in the annulus 0.5 ≤ r ≤ 5.
    let mut matrix_rows = Vec::new();
    let mut max_curv: f64 = 0.0;
    let mut max_holo: f64 = 0.0;
    if let Some(cal) = &calibration {
        let points = sample_points(a.samples, a.seed, &cfg);
        for p in points {
            let m = matrix_residual(&cfg, p, a.h, cal)?;
            max_curv = max_curv.max(m.curvature);
            max_holo = max_holo.max(m.holomorphicity);
            matrix_rows.push(vec![num(p.x), num(p.y), num(m.curvature), num(m.holomorphicity)]);
        }
    }

    // r1 on the singular branch is reported, not asserted.
    let asserted_ode = match branch {
        Branch::Exact => max_ode,
        Branch::Singular => per_eq[1].max(per_eq[2]),
    };
    let ode_pass = asserted_ode < ODE_THRESHOLD;
    let transformed_pass = max_closed < TRANSFORMED_THRESHOLD;
    let matrix_pass = calibration.is_none()
        || branch == Branch::Singular
        || (max_curv < MATRIX_THRESHOLD && max_holo < MATRIX_THRESHOLD);
    if branch == Branch::Singular {
        warnings.push(format!(
            "singular branch: first reduced equation leaves r1 = 2g^2 (max |r1| = {:.3e}); r2, r3 vanish",
            per_eq[0]
        ));
    }
    let mut failures = Vec::new();
    if !ode_pass {
        failures.push(format!("max ODE residual {asserted_ode:.3e} >= {ODE_THRESHOLD:e}"));
    }
    if !transformed_pass {
        failures.push(format!("transformed residual {max_closed:.3e} >= {TRANSFORMED_THRESHOLD:e}"));
    }
    if !matrix_pass {
        failures.push(format!(
            "matrix residuals {max_curv:.3e}/{max_holo:.3e} >= {MATRIX_THRESHOLD:e}"
        ));
    }
    let results = json!({
        "variant": cfg.variant(),
        "smoothness": cfg.smoothness_class(),
        "max_ode_residual": max_ode,
        "max_ode_residual_by_equation": per_eq,
        "ode_threshold": ODE_THRESHOLD,
        "ode_residual_by_radius": per_radius,
        "max_transformed_residual": max_closed,
        "transformed_threshold": TRANSFORMED_THRESHOLD,
        "max_profile_vs_closed_form": max_pair_gap,
        "calibration": calibration,
        "calibration_threshold": CALIBRATION_THRESHOLD,
        "max_matrix_curvature_residual": calibration.map(|_| max_curv),
        "max_matrix_holomorphicity_residual": calibration.map(|_| max_holo),
        "matrix_threshold": MATRIX_THRESHOLD,
        "passed": failures.is_empty(),
    });
    let mut tables = vec![(
        "verify_ode.csv".to_string(),
        Table {
            header: vec!["radius", "r1", "r2", "r3"],
            rows,
        },
    )];
    if !matrix_rows.is_empty() {
        tables.push((
            "verify_matrix.csv".to_string(),
            Table {
                header: vec!["x", "y", "curvature_residual", "holomorphicity_residual"],
                rows: matrix_rows,
            },
        ));
    }
    Ok(Outcome {
        command: "verify",
        parameters: params,
        results,
        warnings,
        tables,
        failure: (!failures.is_empty()).then(|| failures.join("; ")),
    })
}

/// Sample points in the annulus 0.5 ≤ r ≤ 5: a golden-angle spiral, or
/// uniform random draws when seeded.
fn sample_points(n: usize, seed: Option<u64>, cfg: &FieldConfig) -> Vec<Point> {
    let golden = PI * (3.0 - 5f64.sqrt());
    let mut rng = seed.map(ChaCha8Rng::seed_from_u64);
    let mut out = Vec::with_capacity(n);
    let mut k = 0usize;
    while out.len() < n && k < 100 * n.max(1) {
        let p = match rng.as_mut() {
            Some(rng) => {
                let r = 0.5 * 10f64.powf(rng.gen::<f64>());
                Point::polar(r, rng.gen_range(0.0..TAU))
            }
            None => {
                let s = if n > 1 { k as f64 / (n - 1) as f64 } else { 0.0 };
                Point::polar(0.5 * 10f64.powf(s), golden * k as f64)
            }
        };
        k += 1;
        if crate::fields::PlanarField::singular_distance(cfg, p) > 1e-2 {
            out.push(p);
        }
    }
    out
}

fn verify_particles(
    cfg: FieldConfig,
    a: &VerifyArgs,
    params: BTreeMap<String, Value>,
    mut warnings: Vec<String>,
    calibration: Option<ConventionCalibration>,
) -> Result<Outcome, CliError> {
    let mut rows = Vec::new();
    let mut table = Vec::new();
    if let Some(cal) = &calibration {
        let scales = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0];
        rows = separation_scan(&cfg, &scales, a.h, cal)?;
        for r in &rows {
            table.push(vec![
                num(r.scale),
                num(r.min_separation),
                num(r.max_curvature_residual),
                num(r.max_holomorphicity_residual),
                r.samples.to_string(),
            ]);
        }
    }
    warnings.push("superposed configurations are measured, not asserted to solve the equations".into());
    let results = json!({
        "variant": cfg.variant(),
        "smoothness": cfg.smoothness_class(),
        "asymptotic_charge": cfg.asymptotic_charge(),
        "calibration": calibration,
        "separation_scan": rows,
    });
    Ok(Outcome {
        command: "verify",
        parameters: params,
        results,
        warnings,
        tables: vec![(
            "verify_separation.csv".to_string(),
            Table {
                header: vec![
                    "scale",
                    "min_separation",
                    "max_curvature_residual",
                    "max_holomorphicity_residual",
                    "samples",
                ],
                rows: table,
            },
        )],
        failure: None,
    })
}

fn quadrature_spec(a: &ActionArgs) -> Result<QuadratureSpec, CliError> {
    let spec = QuadratureSpec {
        rel_tol: a.rel_tol,
        abs_tol: a.abs_tol,
        max_subdivisions: a.max_subdivisions,
    };
    spec.validate().map_err(|e| CliError::Input(e.to_string()))?;
    Ok(spec)
}

fn action(a: &ActionArgs) -> Result<Outcome, CliError> {
    if !(a.c.is_finite() && a.c > 0.0) {
        return Err(CliError::Input(format!("c must be positive (got {})", a.c)));
    }
    let spec = quadrature_spec(a)?;
    let mut params = BTreeMap::new();
    params.insert("c".into(), json!(a.c));
    params.insert("pairing".into(), json!(a.pairing));
    params.insert("rel_tol".into(), json!(a.rel_tol));
    params.insert("abs_tol".into(), json!(a.abs_tol));
    params.insert("max_subdivisions".into(), json!(a.max_subdivisions));

    let reduced = reduced_action(a.c, &spec)?;
    let full = full_action(&FieldConfig::exact(a.c)?, a.pairing, &spec)?;
    let mut warnings = Vec::new();
    if let Some(ratio) = reduced.ratio {
        warnings.push(format!(
            "reduced_value / reference_value = {ratio:.12} (2*pi*int (f')^2/r dr against the 2*pi*c^4 closed-form chain)"
        ));
    }
    if let (Some(f), Some(r)) = (full.full_value, reduced.reduced_value) {
        warnings.push(format!("full_value / reduced_value = {:.12} under the {} pairing", f / r, a.pairing));
    }
    if !reduced.convergent {
        warnings.push("radial action integral diverges (c <= 1/2)".into());
    }
    let merged = ActionReport {
        full_value: full.full_value,
        pairing: Some(a.pairing),
        convergent: reduced.convergent && full.convergent,
        error_estimate: reduced.error_estimate + full.error_estimate,
        divergence: reduced.divergence.or(full.divergence),
        ..reduced.clone()
    };
    let results = json!({
        "report": merged,
        "reduced": reduced,
        "full": full,
    });
    Ok(Outcome {
        command: "action",
        parameters: params,
        results,
        warnings,
        tables: Vec::new(),
        failure: None,
    })
}

fn ode_spec(steps: usize) -> Result<OdeSpec, CliError> {
    let spec = OdeSpec {
        step_count: steps,
        richardson_check: true,
    };
    spec.validate().map_err(|e| CliError::Input(e.to_string()))?;
    Ok(spec)
}

fn holonomy(a: &HolonomyArgs, exclusion: Option<f64>) -> Result<Outcome, CliError> {
    let cfg = load_source(&a.source, exclusion)?;
    let spec = ode_spec(a.steps)?;
    let mut params = BTreeMap::new();
    source_parameters(&a.source, &mut params);
    params.insert("steps".into(), json!(a.steps));
    let charge = cfg.asymptotic_charge();
    let mut warnings = Vec::new();

    if let Some(radii) = &a.sweep {
        if radii.is_empty() || radii.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(CliError::Input("--sweep needs increasing radii".into()));
        }
        params.insert("sweep".into(), json!(radii));
        let rows = holonomy_convergence_profile(&cfg, radii, &spec)?;
        let table = rows
            .iter()
            .map(|r| vec![num(r.radius), num(r.deviation), num(r.direct_deviation), opt_num(r.order)])
            .collect();
        let results = json!({
            "variant": cfg.variant(),
            "asymptotic_charge": charge,
            "profile": rows,
        });
        return Ok(Outcome {
            command: "holonomy",
            parameters: params,
            results,
            warnings,
            tables: vec![(
                "holonomy_sweep.csv".to_string(),
                Table {
                    header: vec!["radius", "deviation", "direct_deviation", "decay_order"],
                    rows: table,
                },
            )],
            failure: None,
        });
    }

    let r = a.radius.unwrap_or(f64::NAN);
    params.insert("radius".into(), json!(r));
    let res = circle_holonomy(&cfg, r, &spec)?;
    let limit_deviation = res
        .samples
        .iter()
        .map(|(t, g)| (*g - limiting_map(charge, *t)).max_abs())
        .fold(0.0, f64::max);
    if res.abelian_discrepancy > 1e-8 {
        warnings.push(format!(
            "RK4 and abelian solutions differ by {:.3e}",
            res.abelian_discrepancy
        ));
    }
    let fractional = (charge - charge.round()).abs() > 1e-12 || (charge / 2.0).fract() != 0.0;
    if fractional {
        warnings.push(format!(
            "total charge {charge} gives a non-integer limiting degree; the winding is a rounded phase"
        ));
    }
    let table = res
        .samples
        .iter()
        .map(|(t, g)| {
            let mut row = vec![num(*t)];
            for i in 0..2 {
                for j in 0..2 {
                    row.push(num(g.get(i, j).re));
                    row.push(num(g.get(i, j).im));
                }
            }
            row
        })
        .collect();
    let results = json!({
        "variant": cfg.variant(),
        "radius": r,
        "winding": res.winding,
        "total_phase": res.total_phase,
        "expected_total_phase": PI * charge,
        "asymptotic_charge": charge,
        "final": res.final_value,
        "limit_prediction": res.limit_prediction,
        "limit_deviation": limit_deviation,
        "abelian_discrepancy": res.abelian_discrepancy,
        "max_det_error": res.max_det_error,
        "max_off_diagonal": res.max_off_diagonal,
        "step_doubling_diff": res.step_doubling_diff,
    });
    Ok(Outcome {
        command: "holonomy",
        parameters: params,
        results,
        warnings,
        tables: vec![(
            "holonomy_samples.csv".to_string(),
            Table {
                header: vec![
                    "theta_rad", "re_g11", "im_g11", "re_g12", "im_g12", "re_g21", "im_g21",
                    "re_g22", "im_g22",
                ],
                rows: table,
            },
        )],
        failure: None,
    })
}

/// Parses `start:stop:step` into an inclusive grid.
pub fn parse_range(text: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || CliError::Input(format!("range '{text}' is not start:stop:step"));
    let nums = match parts.as_slice() {
        [a] => vec![a.trim().parse::<f64>().map_err(|_| bad())?; 1],
        [a, b, s] => vec![
            a.trim().parse::<f64>().map_err(|_| bad())?,
            b.trim().parse::<f64>().map_err(|_| bad())?,
            s.trim().parse::<f64>().map_err(|_| bad())?,
        ],
        _ => return Err(bad()),
    };
    if nums.len() == 1 {
        return Ok(nums);
    }
    let (start, stop, step) = (nums[0], nums[1], nums[2]);
    if !(start.is_finite() && stop.is_finite() && step.is_finite()) || step <= 0.0 || stop < start {
        return Err(CliError::Input(format!("range '{text}' is empty")));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    if n > 100_000 {
        return Err(CliError::Input(format!("range '{text}' has too many points")));
    }
    Ok((0..n).map(|i| start + i as f64 * step).collect())
}

fn scan(a: &ScanArgs, exclusion: Option<f64>) -> Result<Outcome, CliError> {
    let cs = parse_range(&a.c)?;
    if let Some(bad) = cs.iter().find(|c| !(**c > 0.0)) {
        return Err(CliError::Input(format!("c must be positive (got {bad})")));
    }
    let mut params = BTreeMap::new();
    params.insert("quantity".into(), json!(a.quantity));
    params.insert("c".into(), json!(a.c));
    let mut warnings = Vec::new();
    let mut rows = Vec::new();
    let mut entries = Vec::new();
    let header = match a.quantity {
        Quantity::Action => {
            let spec = QuadratureSpec::default();
            let mut last: Option<f64> = None;
            let mut monotone = true;
            for &c in &cs {
                let rep = reduced_action(c, &spec)?;
                if let (Some(prev), Some(v)) = (last, rep.reference_value) {
                    monotone &= v >= prev;
                }
                if rep.reference_value.is_some() {
                    last = rep.reference_value;
                }
                rows.push(vec![
                    num(c),
                    opt_num(rep.reduced_value),
                    opt_num(rep.reference_value),
                    num(rep.error_estimate),
                    rep.convergent.to_string(),
                ]);
                entries.push(rep);
            }
            if !monotone {
                warnings.push("action values are not monotone in c over this range".into());
            }
            vec!["c", "reduced_value", "reference_value", "error_estimate", "convergent"]
        }
        Quantity::Winding => {
            let spec = ode_spec(a.steps)?;
            params.insert("radius".into(), json!(a.radius));
            params.insert("steps".into(), json!(a.steps));
            let mut out = Vec::new();
            for &c in &cs {
                let cfg = with_exclusion(FieldConfig::exact(c)?, exclusion)?;
                let res = circle_holonomy(&cfg, a.radius, &spec)?;
                rows.push(vec![num(c), num(res.total_phase), res.winding.to_string()]);
                out.push(json!({"c": c, "total_phase": res.total_phase, "winding": res.winding}));
            }
            return finish_scan(a, params, json!(out), warnings, rows, vec!["c", "total_phase_rad", "winding"]);
        }
        Quantity::Smoothness => {
            let mut out = Vec::new();
            for &c in &cs {
                let class = FieldConfig::exact(c)?.smoothness_class();
                let label = match class {
                    Smoothness::Smooth => "smooth",
                    Smoothness::MeronSingular => "meron_singular",
                };
                rows.push(vec![num(c), label.to_string()]);
                out.push(json!({"c": c, "class": class}));
            }
            return finish_scan(a, params, json!(out), warnings, rows, vec!["c", "class"]);
        }
    };
    finish_scan(a, params, json!(entries), warnings, rows, header)
}

fn finish_scan(
    a: &ScanArgs,
    params: BTreeMap<String, Value>,
    results: Value,
    warnings: Vec<String>,
    rows: Vec<Vec<String>>,
    header: Vec<&'static str>,
) -> Result<Outcome, CliError> {
    let name = match a.quantity {
        Quantity::Action => "scan_action.csv",
        Quantity::Winding => "scan_winding.csv",
        Quantity::Smoothness => "scan_smoothness.csv",
    };
    Ok(Outcome {
        command: "scan",
        parameters: params,
        results: json!({"quantity": a.quantity, "rows": results}),
        warnings,
        tables: vec![(name.to_string(), Table { header, rows })],
        failure: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        let r = parse_range("0.5:1.5:0.25").unwrap();
        assert_eq!(r, vec![0.5, 0.75, 1.0, 1.25, 1.5]);
        assert_eq!(parse_range("0.6:2.5:0.1").unwrap().len(), 20);
        assert_eq!(parse_range("2").unwrap(), vec![2.0]);
        assert!(parse_range("2:1:0.1").is_err());
        assert!(parse_range("1:2:0").is_err());
        assert!(parse_range("1:2").is_err());
        assert!(parse_range("").is_err());
    }

    #[test]
    fn numbers_round_trip() {
        for &x in &[PI, 1.0 / 3.0, 1e-300, 123456.789] {
            let s = num(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Input("x".into()).exit_code(), 2);
        assert_eq!(CliError::Failure("x".into()).exit_code(), 1);
    }

    #[test]
    fn sample_points_are_deterministic() {
        let cfg = FieldConfig::exact(1.0).unwrap();
        let a = sample_points(50, None, &cfg);
        assert_eq!(a, sample_points(50, None, &cfg));
        assert_eq!(sample_points(50, Some(3), &cfg), sample_points(50, Some(3), &cfg));
        assert_ne!(a, sample_points(50, Some(3), &cfg));
        for p in a {
            let r = p.norm();
            assert!((0.5 - 1e-12..=5.0 + 1e-12).contains(&r));
        }
    }
}
