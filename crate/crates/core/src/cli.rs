//! Command-line front end.
//!
//! Every command that produces results prints a [`ReportEnvelope`] as JSON
//! and, with `--out DIR`, writes it to `DIR/<command>.json` together with
//! any CSV tables. Flags may be preset from a JSON object given by
//! `--config FILE`; keys are flag names (`k_min` or `k-min`), flags given
//! on the command line win. Model parameters go under `"params"` as an
//! object. `KURV_THREADS` sets the worker count.
//!
//! Exit codes: 0 success, 1 usage or runtime error, 2 not certified.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::certifier::{
    asymptotic_check, companion_seed, estimate_griffiths_bounds, estimate_hsc_sup_base_fiber,
    find_threshold, parse_k_grid, sample_directions, Quantity, SampleMode, ThresholdOptions,
};
use crate::error::{KurvError, Result};
use crate::fibration::{
    adapted_curvature_blocks, decomposition_check, generic_frame_oracle, geodesic_curvature,
    horizontal_lift, kodaira_spencer, omega_metric, total_curvature, BlockKind,
};
use crate::hermitian::{hbc, hsc, HermitianMatrix, VERDICT_TOL};
use crate::jets::{check_reality, ChartPoint};
use crate::ke::{
    corollary_1d_check, solve_liouville, trace_identity_check, verify_ke_det_identity,
    KE_PRECONDITION_TOL,
};
use crate::models::{catalog, instantiate, ModelSpec};

pub const SCHEMA_VERSION: u32 = 1;
pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NOT_CERTIFIED: i32 = 2;
/// `c(φ)` and `μ` count as vanishing below this.
pub const FRAME_TOL: f64 = 1e-10;

#[derive(Parser, Debug)]
#[command(
    name = "kurv",
    version,
    about = "Curvature of relative Kähler fibrations on local charts"
)]
struct Cli {
    /// JSON object presetting flags of the invoked command.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Directory for report files.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Builtin model catalog.
    Models {
        #[command(subcommand)]
        cmd: ModelsCmd,
    },
    Verify {
        #[command(subcommand)]
        cmd: VerifyCmd,
    },
    /// All curvature blocks and named-direction HSC/HBC at one point.
    Analyze(AnalyzeArgs),
    /// Smallest k past which the sampled HSC or HBC supremum stays negative.
    Certify(CertifyArgs),
    /// Decay of the curvature blocks along a k grid.
    Asymptotics(AsymptoticsArgs),
    /// Sampled sectional and Griffiths constants.
    Griffiths(GriffithsArgs),
    Ke {
        #[command(subcommand)]
        cmd: KeCmd,
    },
}

#[derive(Subcommand, Debug)]
enum ModelsCmd {
    List {
        #[arg(long)]
        json: bool,
    },
}

#[derive(Subcommand, Debug)]
enum VerifyCmd {
    /// Oracle agreement, decomposition, reality and frame checks at random points.
    Identities(VerifyArgs),
}

#[derive(Subcommand, Debug)]
enum KeCmd {
    /// Newton solve of the Liouville equation on a disk.
    Solve(KeSolveArgs),
    /// `e^φ = det(φ_{ij̄})` and the trace identity at random points.
    Identities(KeIdentitiesArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
struct ModelArgs {
    #[arg(long)]
    model: String,
    /// Model parameter, repeatable.
    #[arg(long = "param", value_name = "NAME=VALUE", value_parser = parse_param)]
    params: Vec<(String, f64)>,
}

impl ModelArgs {
    fn spec(&self) -> Result<ModelSpec> {
        instantiate(&self.model, &self.params.iter().cloned().collect())
    }
}

#[derive(Args, Debug, Clone, Serialize)]
struct VerifyArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 20)]
    points: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Values of k for the oracle comparison.
    #[arg(long, value_delimiter = ',', default_value = "1,10,100")]
    k: Vec<f64>,
}

#[derive(Args, Debug, Clone, Serialize)]
struct AnalyzeArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Coordinates `re,im` separated by `;`, base first. Default: origin.
    #[arg(long, allow_hyphen_values = true)]
    point: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    k: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
struct CertifyArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value = "hsc")]
    quantity: Quantity,
    #[arg(long, default_value_t = 1.0)]
    k_min: f64,
    #[arg(long, default_value_t = 1e6)]
    k_max: f64,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 8)]
    points: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = VERDICT_TOL)]
    tol: f64,
    /// Default: stratified for hsc, pairs for hbc.
    #[arg(long)]
    mode: Option<SampleMode>,
    /// Points are drawn from this fraction of the validity region.
    #[arg(long, default_value_t = 0.9)]
    fraction: f64,
    #[arg(long, default_value_t = 2.0)]
    scan_ratio: f64,
    #[arg(long, default_value_t = 30)]
    bisection_steps: usize,
    #[arg(long)]
    no_refine: bool,
}

#[derive(Args, Debug, Clone, Serialize)]
struct AsymptoticsArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, allow_hyphen_values = true)]
    point: Option<String>,
    #[arg(long, default_value = "geometric:100:1000000:9")]
    k_grid: String,
}

#[derive(Args, Debug, Clone, Serialize)]
struct GriffithsArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 8)]
    points: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.9)]
    fraction: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
struct KeSolveArgs {
    #[arg(long, default_value_t = 0.8)]
    radius: f64,
    #[arg(long, default_value_t = 129)]
    grid: usize,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
struct KeIdentitiesArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 100)]
    points: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = KE_PRECONDITION_TOL)]
    precondition_tol: f64,
}

fn parse_param(s: &str) -> std::result::Result<(String, f64), String> {
    let (name, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected NAME=VALUE, got `{s}`"))?;
    let value: f64 = value
        .trim()
        .parse()
        .map_err(|e| format!("parameter `{name}`: {e}"))?;
    Ok((name.trim().to_string(), value))
}

/// Parse `re,im;re,im;...` into a chart point with `m` base coordinates.
pub fn parse_point(s: &str, m: usize, n: usize) -> Result<ChartPoint> {
    let coords: Vec<Complex64> = s
        .split(';')
        .map(|c| {
            let parts: Vec<&str> = c.split(',').map(str::trim).collect();
            let num = |t: &str| {
                t.parse::<f64>()
                    .map_err(|e| KurvError::InvalidArgument(format!("bad coordinate `{c}`: {e}")))
            };
            match parts.as_slice() {
                [re] => Ok(Complex64::new(num(re)?, 0.0)),
                [re, im] => Ok(Complex64::new(num(re)?, num(im)?)),
                _ => Err(KurvError::InvalidArgument(format!("bad coordinate `{c}`"))),
            }
        })
        .collect::<Result<_>>()?;
    if coords.len() != m + n {
        return Err(KurvError::Dimension(format!(
            "point has {} coordinates, model needs {}",
            coords.len(),
            m + n
        )));
    }
    Ok(ChartPoint::new(coords[..m].to_vec(), coords[m..].to_vec()))
}

/// Seed of the random chart points paired with a direction seed.
pub fn point_seed(seed: u64) -> u64 {
    seed ^ 0x5851_f42d_4c95_7f2d
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportEnvelope {
    pub schema_version: u32,
    pub tool: String,
    pub command: String,
    /// Arguments after merging the config file.
    pub argv: Vec<String>,
    pub params: Value,
    pub seeds: BTreeMap<String, u64>,
    pub started_at: String,
    pub finished_at: String,
    pub threads: usize,
    pub payload: Value,
    pub exit_status: i32,
    /// SHA-256 of everything except timestamps, `argv` and `threads`.
    pub determinism_hash: String,
}

impl ReportEnvelope {
    pub fn compute_hash(&self) -> String {
        let canonical = json!({
            "schema_version": self.schema_version,
            "tool": self.tool,
            "command": self.command,
            "params": self.params,
            "seeds": self.seeds,
            "payload": self.payload,
            "exit_status": self.exit_status,
        });
        hex::encode(Sha256::digest(canonical.to_string().as_bytes()))
    }

    pub fn hash_is_valid(&self) -> bool {
        self.compute_hash() == self.determinism_hash
    }
}

/// Outcome of one invocation; nothing is printed.
#[derive(Clone, Debug)]
pub struct CliRun {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
    pub report: Option<ReportEnvelope>,
}

struct Outcome {
    command: &'static str,
    params: Value,
    seeds: BTreeMap<String, u64>,
    payload: Value,
    code: i32,
    csv: Vec<(String, String)>,
}

fn now() -> String {
    time::OffsetDateTime::now_utc()
        .format(&time::format_description::well_known::Rfc3339)
        .unwrap_or_default()
}

fn threads_from_env() -> Result<usize> {
    match std::env::var("KURV_THREADS") {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(KurvError::InvalidArgument(format!(
                "KURV_THREADS must be a positive integer, got `{s}`"
            ))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn config_scalar(key: &str, v: &Value) -> Result<String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(x) => Ok(x.to_string()),
        _ => Err(KurvError::InvalidArgument(format!(
            "config key `{key}` must be a string, number or boolean"
        ))),
    }
}

/// Append config entries not already given as flags.
fn merge_config(argv: Vec<String>) -> Result<Vec<String>> {
    let mut path = None;
    for (i, a) in argv.iter().enumerate() {
        if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else if a == "--config" {
            path = argv.get(i + 1).cloned();
        }
    }
    let Some(path) = path else { return Ok(argv) };
    let text = std::fs::read_to_string(&path).map_err(|e| KurvError::Io(format!("{path}: {e}")))?;
    let cfg: Value = serde_json::from_str(&text)
        .map_err(|e| KurvError::InvalidArgument(format!("config {path}: {e}")))?;
    let Value::Object(cfg) = cfg else {
        return Err(KurvError::InvalidArgument(format!(
            "config {path} must be a JSON object"
        )));
    };

    let given = |flag: &str| {
        argv.iter()
            .any(|a| a == flag || a.starts_with(&format!("{flag}=")))
    };
    let given_params: Vec<String> = argv
        .iter()
        .enumerate()
        .filter_map(|(i, a)| {
            let body = a.strip_prefix("--param=").or_else(|| {
                (a == "--param")
                    .then(|| argv.get(i + 1).map(String::as_str))
                    .flatten()
            })?;
            body.split_once('=').map(|(k, _)| k.trim().to_string())
        })
        .collect();

    let mut extra = Vec::new();
    for (key, value) in &cfg {
        let flag = format!("--{}", key.replace('_', "-"));
        if key == "config" {
            return Err(KurvError::InvalidArgument(
                "config files cannot nest".into(),
            ));
        }
        if key == "params" {
            let Value::Object(ps) = value else {
                return Err(KurvError::InvalidArgument(
                    "config `params` must be an object".into(),
                ));
            };
            for (name, v) in ps {
                if !given_params.contains(name) {
                    extra.push(format!("--param={name}={}", config_scalar(name, v)?));
                }
            }
            continue;
        }
        if given(&flag) {
            continue;
        }
        match value {
            Value::Bool(true) => extra.push(flag),
            Value::Bool(false) | Value::Null => {}
            Value::Array(items) => {
                let joined: Vec<String> = items
                    .iter()
                    .map(|x| config_scalar(key, x))
                    .collect::<Result<_>>()?;
                extra.push(format!("{flag}={}", joined.join(",")));
            }
            other => extra.push(format!("{flag}={}", config_scalar(key, other)?)),
        }
    }
    let mut merged = argv;
    merged.extend(extra);
    Ok(merged)
}

/// Run one invocation. `argv[0]` is the program name.
pub fn run_command<I, S>(argv: I) -> CliRun
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let argv: Vec<String> = argv.into_iter().map(Into::into).collect();
    let fail = |msg: String| CliRun {
        code: EXIT_ERROR,
        stdout: String::new(),
        stderr: format!("error: {msg}\n"),
        report: None,
    };
    let argv = match merge_config(argv) {
        Ok(a) => a,
        Err(e) => return fail(e.to_string()),
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let text = e.render().to_string();
            return if e.use_stderr() {
                CliRun {
                    code,
                    stdout: String::new(),
                    stderr: text,
                    report: None,
                }
            } else {
                CliRun {
                    code,
                    stdout: text,
                    stderr: String::new(),
                    report: None,
                }
            };
        }
    };
    let threads = match threads_from_env() {
        Ok(t) => t,
        Err(e) => return fail(e.to_string()),
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => return fail(e.to_string()),
    };

    if let Command::Models {
        cmd: ModelsCmd::List { json: false },
    } = &cli.command
    {
        return CliRun {
            code: EXIT_OK,
            stdout: models_table(),
            stderr: String::new(),
            report: None,
        };
    }

    let started_at = now();
    let outcome = match pool.install(|| dispatch(&cli.command)) {
        Ok(o) => o,
        Err(e) => return fail(e.to_string()),
    };
    let mut report = ReportEnvelope {
        schema_version: SCHEMA_VERSION,
        tool: format!("kurv {}", env!("CARGO_PKG_VERSION")),
        command: outcome.command.to_string(),
        argv: argv[1..].to_vec(),
        params: outcome.params,
        seeds: outcome.seeds,
        started_at,
        finished_at: now(),
        threads,
        payload: outcome.payload,
        exit_status: outcome.code,
        determinism_hash: String::new(),
    };
    report.determinism_hash = report.compute_hash();
    let text = match serde_json::to_string_pretty(&report) {
        Ok(t) => t + "\n",
        Err(e) => return fail(e.to_string()),
    };
    if let Some(dir) = &cli.out {
        if let Err(e) = write_outputs(dir, &report.command, &text, &outcome.csv) {
            return fail(e.to_string());
        }
    }
    let mut stderr = String::new();
    if outcome.code == EXIT_NOT_CERTIFIED {
        stderr.push_str("not certified\n");
    }
    CliRun {
        code: outcome.code,
        stdout: text,
        stderr,
        report: Some(report),
    }
}

fn write_outputs(dir: &Path, command: &str, json: &str, csv: &[(String, String)]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let slug = command.replace(' ', "_");
    std::fs::write(dir.join(format!("{slug}.json")), json)?;
    for (name, body) in csv {
        std::fs::write(dir.join(name), body)?;
    }
    Ok(())
}

fn models_table() -> String {
    let mut out = format!("{:<20} {:<6} {}\n", "name", "dims", "parameters");
    for e in catalog() {
        let spec = instantiate(&e.name, &BTreeMap::new()).expect("defaults are valid");
        let params: Vec<String> = e
            .params
            .iter()
            .map(|p| format!("{}={}", p.name, p.default))
            .collect();
        out.push_str(&format!(
            "{:<20} {:<6} {}\n",
            e.name,
            format!("{}+{}", spec.m(), spec.n()),
            params.join(" ")
        ));
    }
    out
}

fn to_value<T: Serialize>(t: &T) -> Result<Value> {
    serde_json::to_value(t).map_err(|e| KurvError::InvalidArgument(e.to_string()))
}

fn csv_table(header: &[String], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| KurvError::Io(e.to_string());
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| KurvError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| KurvError::Io(e.to_string()))
}

fn opt(x: Option<f64>) -> String {
    x.map_or(String::new(), |v| format!("{v:e}"))
}

fn dispatch(cmd: &Command) -> Result<Outcome> {
    match cmd {
        Command::Models {
            cmd: ModelsCmd::List { .. },
        } => Ok(Outcome {
            command: "models list",
            params: json!({}),
            seeds: BTreeMap::new(),
            payload: to_value(&catalog())?,
            code: EXIT_OK,
            csv: vec![],
        }),
        Command::Verify {
            cmd: VerifyCmd::Identities(a),
        } => verify_cmd(a),
        Command::Analyze(a) => analyze_cmd(a),
        Command::Certify(a) => certify_cmd(a),
        Command::Asymptotics(a) => asymptotics_cmd(a),
        Command::Griffiths(a) => griffiths_cmd(a),
        Command::Ke {
            cmd: KeCmd::Solve(a),
        } => ke_solve_cmd(a),
        Command::Ke {
            cmd: KeCmd::Identities(a),
        } => ke_identities_cmd(a),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    pub max_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Evaluations left out, such as `k` values where `Ω(k)` is degenerate.
    pub skipped: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub model: String,
    pub params: BTreeMap<String, f64>,
    pub points: usize,
    pub checks: Vec<IdentityCheck>,
    pub all_passed: bool,
}

/// Per-point identity checks behind `verify identities`.
///
/// - `oracle`: closed-form adapted blocks against the raw-coordinate oracle,
///   relative to the largest block entry, at each `k`.
/// - `decomposition`: `ω_X` is block diagonal in the adapted frame.
/// - `reality`: the weights are real and the blocks conjugation symmetric.
/// - `frame`: `c(φ)` and `μ` vanish; only for Kähler–Einstein product-type
///   families, where this is expected.
pub fn verify_identities(
    model: &ModelSpec,
    points: &[ChartPoint],
    ks: &[f64],
    tol: f64,
) -> Result<IdentityReport> {
    struct Row {
        oracle: f64,
        oracle_skipped: usize,
        decomposition: f64,
        reality: f64,
        frame: f64,
    }
    let rows: Vec<Row> = points
        .par_iter()
        .map(|p| -> Result<Row> {
            let fj = model.fibration_jet(p)?;
            let mut oracle: f64 = 0.0;
            let mut oracle_skipped = 0;
            let mut reality: f64 = 0.0;
            for &k in ks {
                match adapted_curvature_blocks(&fj, k) {
                    Ok(blocks) => {
                        let o = generic_frame_oracle(&fj, k)?;
                        oracle = oracle.max(blocks.relative_difference(&o));
                        reality =
                            reality.max(blocks.conjugation_defect() / blocks.scale().max(1.0));
                    }
                    Err(KurvError::DegenerateOmega { .. }) => oracle_skipped += 1,
                    Err(e) => return Err(e),
                }
            }
            if !(check_reality(fj.phi(), tol) && check_reality(fj.psi(), tol)) {
                reality = f64::INFINITY;
            }
            let d = decomposition_check(&fj)?;
            let mu = kodaira_spencer(&fj)?;
            let c = geodesic_curvature(&fj)?;
            let frame = mu
                .iter()
                .flatten()
                .flatten()
                .chain(c.matrix().iter())
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            Ok(Row {
                oracle,
                oracle_skipped,
                decomposition: d.horizontal.max(d.mixed),
                reality,
                frame,
            })
        })
        .collect::<Result<_>>()?;

    let fold = |f: &dyn Fn(&Row) -> f64| rows.iter().map(f).fold(0.0, f64::max);
    let check = |name: &str, max_residual: f64, tolerance: f64, skipped: usize| IdentityCheck {
        name: name.to_string(),
        max_residual,
        tolerance,
        passed: max_residual <= tolerance,
        skipped,
    };
    let mut checks = vec![
        check(
            "oracle",
            fold(&|r| r.oracle),
            tol,
            rows.iter().map(|r| r.oracle_skipped).sum(),
        ),
        check("decomposition", fold(&|r| r.decomposition), tol, 0),
        check("reality", fold(&|r| r.reality), tol, 0),
    ];
    if model.flags().ke_family {
        checks.push(check("frame", fold(&|r| r.frame), FRAME_TOL, 0));
    }
    Ok(IdentityReport {
        model: model.name().to_string(),
        params: model.params().clone(),
        points: points.len(),
        all_passed: checks.iter().all(|c| c.passed),
        checks,
    })
}

fn verify_cmd(a: &VerifyArgs) -> Result<Outcome> {
    let model = a.model.spec()?;
    let pts = model.random_points(a.points, point_seed(a.seed), 0.9);
    let report = verify_identities(&model, &pts, &a.k, a.tol)?;
    Ok(Outcome {
        command: "verify identities",
        params: to_value(a)?,
        seeds: BTreeMap::from([("points".to_string(), point_seed(a.seed))]),
        payload: to_value(&report)?,
        code: EXIT_OK,
        csv: vec![],
    })
}

fn matrix_rows(h: &HermitianMatrix) -> Vec<Vec<Complex64>> {
    let d = h.dim();
    (0..d)
        .map(|i| (0..d).map(|j| h.get(i, j)).collect())
        .collect()
}

fn point_or_origin(s: &Option<String>, model: &ModelSpec) -> Result<ChartPoint> {
    match s {
        Some(s) => parse_point(s, model.m(), model.n()),
        None => Ok(ChartPoint::origin(model.m(), model.n())),
    }
}

fn analyze_cmd(a: &AnalyzeArgs) -> Result<Outcome> {
    let model = a.model.spec()?;
    let p = point_or_origin(&a.point, &model)?;
    let fj = model.fibration_jet(&p)?;
    let blocks = adapted_curvature_blocks(&fj, a.k)?;
    let omega = omega_metric(&fj, a.k)?;
    let frame = horizontal_lift(&fj)?;
    let (r, h) = total_curvature(&fj, a.k)?;
    let (m, n) = (fj.m(), fj.n());
    let names: Vec<String> = (0..m)
        .map(|i| format!("delta_z{}", i + 1))
        .chain((0..n).map(|i| format!("d_v{}", i + 1)))
        .collect();
    let basis = frame.basis();
    let mut directions = Vec::new();
    for (i, x) in basis.iter().enumerate() {
        directions.push(json!({ "direction": names[i], "hsc": hsc(&r, &h, x)? }));
    }
    let mut pairs = Vec::new();
    for i in 0..basis.len() {
        for j in i + 1..basis.len() {
            pairs.push(json!({
                "directions": [names[i], names[j]],
                "hbc": hbc(&r, &h, &basis[i], &basis[j])?,
            }));
        }
    }
    let norms: BTreeMap<&str, f64> = BlockKind::ALL
        .iter()
        .map(|&b| (b.label(), blocks.block(b).norm()))
        .collect();
    let payload = json!({
        "model": model.name(),
        "params": model.params(),
        "point": p,
        "k": a.k,
        "omega": {
            "horizontal": matrix_rows(&omega.horizontal),
            "vertical": matrix_rows(&omega.vertical),
            "valid": omega.is_valid(),
        },
        "geodesic_curvature": matrix_rows(&geodesic_curvature(&fj)?),
        "kodaira_spencer": kodaira_spencer(&fj)?,
        "frame": frame,
        "block_norms": norms,
        "blocks": blocks,
        "hsc": directions,
        "hbc": pairs,
    });
    Ok(Outcome {
        command: "analyze",
        params: to_value(a)?,
        seeds: BTreeMap::new(),
        payload,
        code: EXIT_OK,
        csv: vec![],
    })
}

fn certify_cmd(a: &CertifyArgs) -> Result<Outcome> {
    let model = a.model.spec()?;
    let mode = a.mode.unwrap_or(match a.quantity {
        Quantity::Hsc => SampleMode::Stratified,
        Quantity::Hbc => SampleMode::Pairs,
    });
    let pts = model.random_points(a.points, point_seed(a.seed), a.fraction);
    let sample = sample_directions(model.m(), model.n(), a.samples, a.seed, mode)?;
    let options = ThresholdOptions {
        tol: a.tol,
        scan_ratio: a.scan_ratio,
        bisection_steps: a.bisection_steps,
        refine: !a.no_refine,
    };
    let cert = find_threshold(&model, &pts, a.quantity, a.k_min, a.k_max, &sample, options)?;
    let rows: Vec<Vec<String>> = cert
        .k_grid
        .iter()
        .zip(&cert.sups)
        .map(|(k, s)| vec![format!("{k:e}"), opt(*s)])
        .collect();
    let table = csv_table(&["k".into(), "sup".into()], &rows)?;
    Ok(Outcome {
        command: "certify",
        params: to_value(a)?,
        seeds: BTreeMap::from([
            ("directions".to_string(), a.seed),
            ("points".to_string(), point_seed(a.seed)),
        ]),
        code: if cert.certified {
            EXIT_OK
        } else {
            EXIT_NOT_CERTIFIED
        },
        payload: to_value(&cert)?,
        csv: vec![("certify_k_grid.csv".into(), table)],
    })
}

fn asymptotics_cmd(a: &AsymptoticsArgs) -> Result<Outcome> {
    let model = a.model.spec()?;
    let p = point_or_origin(&a.point, &model)?;
    let grid = parse_k_grid(&a.k_grid)?;
    let report = asymptotic_check(&model, &p, &grid)?;
    let header: Vec<String> = std::iter::once("k".to_string())
        .chain(report.fits.iter().map(|f| f.block.clone()))
        .collect();
    let rows: Vec<Vec<String>> = report
        .k_grid
        .iter()
        .enumerate()
        .map(|(i, k)| {
            std::iter::once(format!("{k:e}"))
                .chain(report.fits.iter().map(|f| opt(f.deviations[i])))
                .collect()
        })
        .collect();
    let table = csv_table(&header, &rows)?;
    Ok(Outcome {
        command: "asymptotics",
        params: to_value(a)?,
        seeds: BTreeMap::new(),
        payload: to_value(&report)?,
        code: EXIT_OK,
        csv: vec![("asymptotics_k_grid.csv".into(), table)],
    })
}

fn griffiths_cmd(a: &GriffithsArgs) -> Result<Outcome> {
    let model = a.model.spec()?;
    let pts = model.random_points(a.points, point_seed(a.seed), a.fraction);
    let sample = sample_directions(
        model.m(),
        model.n(),
        a.samples,
        a.seed,
        SampleMode::Stratified,
    )?;
    let griffiths = estimate_griffiths_bounds(&model, &pts, &sample)?;
    let sectional = estimate_hsc_sup_base_fiber(&model, &pts, &sample)?;
    let corollary = if model.n() == 1 {
        Some(corollary_1d_check(
            &model,
            &pts,
            a.samples,
            a.seed,
            VERDICT_TOL,
        )?)
    } else {
        None
    };
    Ok(Outcome {
        command: "griffiths",
        params: to_value(a)?,
        seeds: BTreeMap::from([
            ("directions".to_string(), a.seed),
            ("vertical".to_string(), companion_seed(a.seed)),
            ("points".to_string(), point_seed(a.seed)),
        ]),
        payload: json!({ "griffiths": griffiths, "sectional": sectional, "corollary": corollary }),
        code: EXIT_OK,
        csv: vec![],
    })
}

fn ke_solve_cmd(a: &KeSolveArgs) -> Result<Outcome> {
    let sol = solve_liouville(a.radius, a.grid, a.tol)?;
    let mut buf = Vec::new();
    sol.write_csv(&mut buf)?;
    let table = String::from_utf8(buf).map_err(|e| KurvError::Io(e.to_string()))?;
    let payload = json!({
        "radius": sol.radius,
        "grid": sol.n,
        "spacing": sol.spacing,
        "interior_nodes": sol.interior().count(),
        "iterations": sol.iterations,
        "residual": sol.residual,
        "residual_history": sol.residual_history,
        "max_error": sol.max_error(),
    });
    Ok(Outcome {
        command: "ke solve",
        params: to_value(a)?,
        seeds: BTreeMap::new(),
        payload,
        code: EXIT_OK,
        csv: vec![("ke_solve_grid.csv".into(), table)],
    })
}

fn ke_identities_cmd(a: &KeIdentitiesArgs) -> Result<Outcome> {
    let model = a.model.spec()?;
    let pts = model.random_points(a.points, point_seed(a.seed), 0.9);
    let rows: Vec<_> = pts
        .par_iter()
        .map(|p| -> Result<_> {
            let fj = model.fibration_jet(p)?;
            Ok((
                verify_ke_det_identity(&fj)?,
                trace_identity_check(&fj, a.precondition_tol)?,
            ))
        })
        .collect::<Result<_>>()?;
    let max = |it: &mut dyn Iterator<Item = f64>| it.fold(0.0, f64::max);
    let gated: Vec<_> = rows.iter().filter(|r| r.1.precondition_ok()).collect();
    let payload = json!({
        "model": model.name(),
        "params": model.params(),
        "points": pts.len(),
        "det": {
            "max_residual": max(&mut rows.iter().map(|r| r.0.residual)),
            "max_relative": max(&mut rows.iter().map(|r| r.0.relative)),
        },
        "trace": {
            "precondition_ok": gated.len(),
            "precondition_failed": rows.len() - gated.len(),
            "max_residual": max(&mut gated.iter().map(|r| r.1.max_residual)),
            "max_residual_all_points": max(&mut rows.iter().map(|r| r.1.max_residual)),
            "max_geodesic": max(&mut rows.iter().map(|r| r.1.max_geodesic)),
            "max_raw_contraction": max(&mut rows.iter().map(|r| r.1.max_raw_contraction)),
        },
    });
    Ok(Outcome {
        command: "ke identities",
        params: to_value(a)?,
        seeds: BTreeMap::from([("points".to_string(), point_seed(a.seed))]),
        payload,
        code: EXIT_OK,
        csv: vec![],
    })
}
