//! Command-line front end.
//!
//! Every command validates its inputs, computes, and writes one artifact to
//! stdout or to `--out` (temp file plus rename). JSON artifacts carry the
//! command configuration, the `git describe` string and the units; CSV
//! artifacts carry the same in `#` header lines.
//!
//! Exit codes: 0 success, 1 I/O failure or failed verification, 2 invalid
//! input, 3 exceeded size, search or numerical budget.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::acceptance;
use crate::coupling::{
    axis_grid, lower_convex_envelope, min_kl_coupling, sample_surface, upper_concave_envelope, CouplingProblem,
    ExponentSurface, GridKind, SphereSearch, SphereSolver, SurfaceKind, ThetaSurfaces,
};
use crate::dsbs::{bac_bound, bac_r2_max, phi_psi_dsbs, DsbsParams};
use crate::error::Error;
use crate::exchange::{exchange_partition, SubspacePair};
use crate::hyper::{Direction, HolderPair, HyperSurfaces, HYPER_GRID, HYPER_MIN_FRAC};
use crate::probcore::{info_measures, Base, Dist, JointDist, JointNType};
use crate::singleletter::{biclique_region_star, hk_region_boundary, FStarOptions, FStarSolver, RatePoint};
use crate::typegraph::{build_graph, gamma_n, SearchMode};

/// Version and `git describe` string embedded in every artifact.
pub const GIT_DESCRIBE: &str = env!("TYPEFLOW_GIT_DESCRIBE");

/// Default seed of every randomized search.
pub const DEFAULT_SEED: u64 = 2024;

#[derive(Debug, Parser)]
#[command(name = "typeflow", version, about = "Type-graph exponents, KL couplings and hypercontractivity regions")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// Seed of randomized searches.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// Validate the inputs and stop before computing.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub dry_run: bool,
    /// Worker threads; overrides TYPEFLOW_THREADS.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Command {
    /// E*, F* and G* at a rate pair, with the witness channel.
    Exponent(ExponentArgs),
    /// Boundary polyline of the biclique or Han-Kobayashi region (CSV r1,r2).
    Region(RegionArgs),
    /// Minimum-KL coupling with prescribed marginals.
    Coupling(CouplingArgs),
    /// phi, psi or Theta surfaces on a grid (CSV s,t,value,envelope_value).
    Surface(SurfaceArgs),
    /// Exact or greedy maximum density of a type graph.
    Bruteforce(BruteforceArgs),
    /// Closed-form DSBS surfaces in bits (CSV s,t,value,envelope_value).
    Dsbs(DsbsArgs),
    /// Zero-error bound for the binary adder channel.
    Bac(BacArgs),
    /// Hypercontractivity region membership.
    Hyper(HyperArgs),
    /// Exchange partition of a pair of orthogonal complements.
    Exchange(ExchangeArgs),
    /// Runs the acceptance criteria.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ExponentArgs {
    /// Joint distribution: JSON text or a path to a JSON file.
    #[arg(long)]
    pub joint: String,
    #[arg(long)]
    pub r1: f64,
    #[arg(long)]
    pub r2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionKind {
    Biclique,
    Hk,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RegionArgs {
    #[arg(long, value_enum)]
    pub kind: RegionKind,
    #[arg(long)]
    pub joint: String,
    #[arg(long, default_value_t = 64)]
    pub resolution: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CouplingArgs {
    /// Reference joint distribution.
    #[arg(long)]
    pub p: String,
    /// X marginal: JSON, a JSON file, or comma-separated probabilities.
    #[arg(long)]
    pub qx: String,
    /// Y marginal: JSON, a JSON file, or comma-separated probabilities.
    #[arg(long)]
    pub qy: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurfaceWhich {
    Phi,
    Psi,
    ThetaLower,
    ThetaUpper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GridArg {
    Uniform,
    Quadratic,
}

impl From<GridArg> for GridKind {
    fn from(g: GridArg) -> Self {
        match g {
            GridArg::Uniform => GridKind::Uniform,
            GridArg::Quadratic => GridKind::Quadratic,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SurfaceArgs {
    /// Joint distribution; exclusive with `--rho`.
    #[arg(long, conflicts_with = "rho", required_unless_present = "rho")]
    pub p: Option<String>,
    /// Use the DSBS with this correlation, in bits.
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long, value_enum)]
    pub which: SurfaceWhich,
    #[arg(long, default_value_t = 64)]
    pub grid: usize,
    #[arg(long, value_enum, default_value_t = GridArg::Uniform)]
    pub grid_kind: GridArg,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BruteforceArgs {
    /// Joint type counts, rows separated by `;`, e.g. `0,1;1,0`.
    #[arg(long)]
    pub counts: String,
    /// Block length; must equal the sum of the counts.
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long)]
    pub m1: usize,
    #[arg(long)]
    pub m2: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Exact)]
    pub mode: ModeArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Exact,
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DsbsSurface {
    Phi,
    Psi,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DsbsArgs {
    #[arg(long)]
    pub rho: f64,
    #[arg(long, value_enum)]
    pub surface: DsbsSurface,
    #[arg(long, default_value_t = 64)]
    pub grid: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BacArgs {
    #[arg(long, default_value_t = 0.0)]
    pub eps: f64,
    /// With `--eps > 0`: the rate `R2` whose constraint residual is reported.
    #[arg(long, requires = "rho")]
    pub r2: Option<f64>,
    /// With `--eps > 0`: the DSBS correlation of the constraint.
    #[arg(long)]
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DirectionArg {
    Forward,
    Reverse,
}

impl From<DirectionArg> for Direction {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::Forward => Direction::Forward,
            DirectionArg::Reverse => Direction::Reverse,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct HyperArgs {
    /// Joint distribution; exclusive with `--rho`.
    #[arg(long, conflicts_with = "rho", required_unless_present = "rho")]
    pub p: Option<String>,
    /// Use the DSBS with this correlation, in bits.
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long, value_enum)]
    pub check_region: DirectionArg,
    /// Holder pair `p,q`; `inf` is accepted.
    #[arg(long)]
    pub pq: String,
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    pub beta: f64,
    #[arg(long, default_value_t = HYPER_GRID)]
    pub grid: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ExchangeArgs {
    /// CSV file with the rows of an orthogonal matrix.
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long)]
    pub n1: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VerifyArgs {
    /// `all` or a comma-separated list of criterion numbers.
    #[arg(long, default_value = "all")]
    pub suite: String,
}

/// Failure of a command, mapped onto an exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Lib(#[from] Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0} criteria failed")]
    Verify(usize),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Lib(e) if e.is_budget() => 3,
            CliError::Lib(_) => 2,
            CliError::Io(_) | CliError::Verify(_) => 1,
        }
    }
}

/// A finished artifact.
enum Artifact {
    Json { units: Option<Base>, result: Value },
    Csv { units: Option<Base>, header: &'static str, rows: Vec<Vec<f64>> },
    /// Verification table and the number of failed criteria.
    Verify { table: String, failed: usize },
}

/// Parses the arguments, runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("typeflow: {e}");
            e.exit_code()
        }
    }
}

/// Runs a parsed command line.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    configure_threads(cli.common.threads)?;
    let artifact = dispatch(&cli.command, &cli.common)?;
    let Some(artifact) = artifact else {
        return emit(&cli.common, "dry run: inputs are valid\n");
    };
    if let Artifact::Verify { table, failed } = artifact {
        emit(&cli.common, &table)?;
        return if failed > 0 { Err(CliError::Verify(failed)) } else { Ok(()) };
    }
    let config = json!({ "seed": cli.common.seed, "args": &cli.command });
    let text = render(artifact, &config)?;
    emit(&cli.common, &text)
}

fn configure_threads(flag: Option<usize>) -> Result<(), CliError> {
    let from_env = std::env::var("TYPEFLOW_THREADS").ok();
    let n = match (flag, from_env) {
        (Some(n), _) => Some(n),
        (None, Some(v)) => Some(
            v.trim()
                .parse::<usize>()
                .map_err(|_| Error::Parse(format!("TYPEFLOW_THREADS must be a positive integer, got {v:?}")))?,
        ),
        (None, None) => None,
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(Error::OutOfRange("thread count must be positive".into()).into());
        }
        // A pool built earlier in the same process keeps its size.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn render(artifact: Artifact, config: &Value) -> Result<String, CliError> {
    let provenance = format!("typeflow {} ({GIT_DESCRIBE})", env!("CARGO_PKG_VERSION"));
    Ok(match artifact {
        Artifact::Json { units, result } => {
            let mut obj = match result {
                Value::Object(m) => m,
                other => {
                    let mut m = serde_json::Map::new();
                    m.insert("result".into(), other);
                    m
                }
            };
            obj.insert("config".into(), config.clone());
            obj.insert("provenance".into(), Value::String(provenance));
            if let Some(b) = units {
                obj.insert("units".into(), Value::String(b.label().into()));
            }
            let mut s = serde_json::to_string_pretty(&Value::Object(obj)).map_err(|e| Error::Parse(e.to_string()))?;
            s.push('\n');
            s
        }
        Artifact::Csv { units, header, rows } => {
            let mut s = format!("# {provenance}\n# config: {config}\n");
            if let Some(b) = units {
                s.push_str(&format!("# units: {}\n", b.label()));
            }
            s.push_str(header);
            s.push('\n');
            for row in rows {
                let cells: Vec<String> = row.iter().map(|v| format_number(*v)).collect();
                s.push_str(&cells.join(","));
                s.push('\n');
            }
            s
        }
        Artifact::Verify { table, .. } => table,
    })
}

fn format_number(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:.12e}")
    }
}

fn emit(common: &Common, text: &str) -> Result<(), CliError> {
    match &common.out {
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
        Some(path) => write_atomic(path, text.as_bytes()),
    }
}

/// Writes `bytes` to a temporary file beside `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Reads a JSON argument given inline or as a file path.
fn read_json<T: serde::de::DeserializeOwned>(arg: &str, what: &str) -> Result<T, CliError> {
    let text = if arg.trim_start().starts_with(['{', '[']) {
        arg.to_string()
    } else {
        std::fs::read_to_string(arg).map_err(|e| Error::Parse(format!("cannot read {what} from {arg:?}: {e}")))?
    };
    Ok(serde_json::from_str(&text).map_err(|e| Error::Parse(format!("malformed {what} JSON: {e}")))?)
}

/// A marginal given as JSON or as comma-separated probabilities in `base`.
fn read_dist(arg: &str, base: Base, what: &str) -> Result<Dist, CliError> {
    let t = arg.trim();
    if t.starts_with('{') || Path::new(t).is_file() {
        return read_json(t, what);
    }
    let probs = parse_list(t, what)?;
    Ok(Dist::new(probs, base)?)
}

fn parse_list(s: &str, what: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("{what}: {v:?} is not a number")).into())
        })
        .collect()
}

/// Parses `0,1;1,0` into rows of counts.
pub fn parse_counts(s: &str) -> Result<Vec<Vec<u64>>, Error> {
    s.split(';')
        .map(|row| {
            row.split(',')
                .map(|v| {
                    v.trim()
                        .parse::<u64>()
                        .map_err(|_| Error::Parse(format!("count {v:?} is not a nonnegative integer")))
                })
                .collect()
        })
        .collect()
}

/// Reads a numeric CSV matrix; `#` lines are comments.
pub fn read_matrix_csv(path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse(format!("malformed CSV: {e}")))?;
        let row = rec
            .iter()
            .map(|v| v.parse::<f64>().map_err(|_| Error::Parse(format!("{v:?} is not a number"))))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(rows)
}

fn positive(name: &str, v: usize) -> Result<(), Error> {
    if v == 0 {
        return Err(Error::OutOfRange(format!("{name} must be positive")));
    }
    Ok(())
}

fn to_value<T: Serialize>(v: &T) -> Result<Value, CliError> {
    Ok(serde_json::to_value(v).map_err(|e| Error::Parse(e.to_string()))?)
}

fn sphere_opts(seed: u64) -> SphereSearch {
    SphereSearch {
        seed,
        ..SphereSearch::default()
    }
}

fn dsbs_or_joint(p: &Option<String>, rho: Option<f64>) -> Result<JointDist, CliError> {
    match (p, rho) {
        (Some(p), None) => read_json(p, "joint distribution"),
        (None, Some(r)) => Ok(DsbsParams::new(r)?.joint()),
        _ => Err(Error::Precondition("give exactly one of --p and --rho".into()).into()),
    }
}

fn dispatch(cmd: &Command, common: &Common) -> Result<Option<Artifact>, CliError> {
    let seed = common.seed;
    let dry = common.dry_run;
    match cmd {
        Command::Exponent(a) => {
            let t: JointDist = read_json(&a.joint, "joint distribution")?;
            let r = RatePoint::new(a.r1, a.r2)?;
            if dry {
                return Ok(None);
            }
            let opts = FStarOptions {
                seed,
                ..FStarOptions::default()
            };
            let sol = FStarSolver::new(&t, opts).solve(r)?;
            let h = info_measures(&t).h_xy;
            let result = json!({
                "e_star": (a.r1 + a.r2 - sol.value).max(0.0),
                "f_star": sol.value,
                "g_star": (h - sol.value).max(0.0),
                "pricing_gap": sol.pricing_gap,
                "witness": to_value(&sol.witness)?,
            });
            Ok(Some(Artifact::Json {
                units: Some(t.base()),
                result,
            }))
        }
        Command::Region(a) => {
            let t: JointDist = read_json(&a.joint, "joint distribution")?;
            positive("resolution", a.resolution)?;
            if dry {
                return Ok(None);
            }
            let poly = match a.kind {
                RegionKind::Biclique => biclique_region_star(&t, a.resolution)?.polyline(),
                RegionKind::Hk => hk_region_boundary(&t, a.resolution)?,
            };
            Ok(Some(Artifact::Csv {
                units: Some(t.base()),
                header: "r1,r2",
                rows: poly.into_iter().map(|(x, y)| vec![x, y]).collect(),
            }))
        }
        Command::Coupling(a) => {
            let p: JointDist = read_json(&a.p, "joint distribution")?;
            let qx = read_dist(&a.qx, p.base(), "qx")?;
            let qy = read_dist(&a.qy, p.base(), "qy")?;
            let cp = CouplingProblem::new(qx, qy, p)?;
            if dry {
                return Ok(None);
            }
            let sol = min_kl_coupling(&cp)?;
            Ok(Some(Artifact::Json {
                units: Some(cp.p.base()),
                result: to_value(&sol)?,
            }))
        }
        Command::Surface(a) => {
            let p = dsbs_or_joint(&a.p, a.rho)?;
            if a.grid < 2 {
                return Err(Error::OutOfRange("grid must be at least 2".into()).into());
            }
            let solver = SphereSolver::new(&p, sphere_opts(seed))?;
            if dry {
                return Ok(None);
            }
            let rows = surface_rows(&solver, a.which, a.grid, a.grid_kind.into())?;
            Ok(Some(Artifact::Csv {
                units: Some(p.base()),
                header: "s,t,value,envelope_value",
                rows,
            }))
        }
        Command::Bruteforce(a) => {
            let counts = parse_counts(&a.counts)?;
            let t = match a.n {
                Some(n) => JointNType::with_n(counts, n)?,
                None => JointNType::new(counts)?,
            };
            positive("m1", a.m1)?;
            positive("m2", a.m2)?;
            if dry {
                return Ok(None);
            }
            let g = build_graph(&t)?;
            let mode = match a.mode {
                ModeArg::Exact => SearchMode::Exact,
                ModeArg::Greedy => SearchMode::Greedy,
            };
            let rep = gamma_n(&g, a.m1, a.m2, mode)?;
            Ok(Some(Artifact::Json {
                units: None,
                result: to_value(&rep)?,
            }))
        }
        Command::Dsbs(a) => {
            let params = DsbsParams::new(a.rho)?;
            if a.grid < 2 {
                return Err(Error::OutOfRange("grid must be at least 2".into()).into());
            }
            if dry {
                return Ok(None);
            }
            Ok(Some(Artifact::Csv {
                units: Some(Base::Bits),
                header: "s,t,value,envelope_value",
                rows: dsbs_rows(&params, a.surface, a.grid)?,
            }))
        }
        Command::Bac(a) => {
            if !(a.eps >= 0.0) {
                return Err(Error::OutOfRange(format!("eps must be nonnegative, got {}", a.eps)).into());
            }
            if a.eps == 0.0 && a.r2.is_none() {
                if dry {
                    return Ok(None);
                }
                let b = bac_r2_max()?;
                return Ok(Some(Artifact::Json {
                    units: Some(Base::Bits),
                    result: to_value(&b)?,
                }));
            }
            let (Some(r2), Some(rho)) = (a.r2, a.rho) else {
                return Err(Error::Precondition("a positive --eps needs --r2 and --rho".into()).into());
            };
            let params = DsbsParams::new(rho)?;
            if dry {
                return Ok(None);
            }
            let residual = bac_bound(&params, a.eps, r2)?;
            Ok(Some(Artifact::Json {
                units: Some(Base::Bits),
                result: json!({ "eps": a.eps, "r2": r2, "rho": rho, "residual": residual, "admissible": residual >= 0.0 }),
            }))
        }
        Command::Hyper(a) => {
            let p = dsbs_or_joint(&a.p, a.rho)?;
            let pq: HolderPair = a.pq.parse()?;
            let which: Direction = a.check_region.into();
            let restricted = a.alpha != 0.0 || a.beta != 0.0;
            if restricted {
                pq.check_extended()?;
            } else {
                pq.check(which)?;
            }
            if a.grid < 3 {
                return Err(Error::OutOfRange("grid must be at least 3".into()).into());
            }
            if dry {
                return Ok(None);
            }
            let hs = HyperSurfaces::sample_with(&p, a.grid, HYPER_MIN_FRAC, sphere_opts(seed))?;
            let m = if restricted {
                hs.restricted_region_member(pq, a.alpha, a.beta, which)?
            } else {
                hs.region_member(pq, which)?
            };
            Ok(Some(Artifact::Json {
                units: Some(p.base()),
                result: to_value(&m)?,
            }))
        }
        Command::Exchange(a) => {
            let rows = read_matrix_csv(&a.matrix)?;
            let sp = SubspacePair::from_rows(&rows)?;
            if a.n1 > sp.dim() {
                return Err(Error::OutOfRange(format!("n1 = {} exceeds the dimension {}", a.n1, sp.dim())).into());
            }
            if dry {
                return Ok(None);
            }
            let part = exchange_partition(&sp, a.n1)?;
            Ok(Some(Artifact::Json {
                units: None,
                result: json!({
                    "J": part.j,
                    "Jc": part.jc,
                    "residuals": [part.residuals.0, part.residuals.1],
                    "dets": [part.dets.0, part.dets.1],
                    "method": to_value(&part.method)?,
                }),
            }))
        }
        Command::Verify(a) => {
            let ids = parse_suite(&a.suite)?;
            if dry {
                return Ok(None);
            }
            let mut table = String::new();
            let mut failed = 0;
            for id in ids {
                let r = acceptance::run(id)?;
                if !r.passed {
                    failed += 1;
                }
                table.push_str(&r.line());
                table.push('\n');
            }
            Ok(Some(Artifact::Verify { table, failed }))
        }
    }
}

fn parse_suite(s: &str) -> Result<Vec<u8>, Error> {
    if s.trim() == "all" {
        return Ok((1..=13).collect());
    }
    s.split(',')
        .map(|v| {
            let id: u8 = v
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("suite entry {v:?} is not a criterion number")))?;
            if !(1..=13).contains(&id) {
                return Err(Error::OutOfRange(format!("criterion {id} outside 1..=13")));
            }
            Ok(id)
        })
        .collect()
}

fn grid_rows(surface: &ExponentSurface, value: impl Fn(usize, usize) -> Result<(f64, f64), Error>) -> Result<Vec<Vec<f64>>, Error> {
    let mut rows = Vec::with_capacity(surface.s_grid().len() * surface.t_grid().len());
    for (i, &s) in surface.s_grid().iter().enumerate() {
        for (j, &t) in surface.t_grid().iter().enumerate() {
            let (v, e) = value(i, j)?;
            rows.push(vec![s, t, v, e]);
        }
    }
    Ok(rows)
}

fn surface_rows(solver: &SphereSolver, which: SurfaceWhich, grid: usize, kind: GridKind) -> Result<Vec<Vec<f64>>, Error> {
    let (e1, e2) = solver.emax();
    let sg = axis_grid(e1, grid, kind);
    let tg = axis_grid(e2, grid, kind);
    match which {
        SurfaceWhich::Phi | SurfaceWhich::Psi => {
            let (sk, env): (_, fn(&ExponentSurface) -> Result<ExponentSurface, Error>) = match which {
                SurfaceWhich::Phi => (SurfaceKind::Phi, lower_convex_envelope),
                _ => (SurfaceKind::Psi, upper_concave_envelope),
            };
            let surf = env(&sample_surface(solver, sk, &sg, &tg)?)?;
            grid_rows(&surf, |i, j| Ok((surf.value(i, j), surf.envelope_value(i, j).unwrap_or(f64::NAN))))
        }
        SurfaceWhich::ThetaLower | SurfaceWhich::ThetaUpper => {
            let th = ThetaSurfaces::from_grids(solver.clone(), &sg, &tg)?;
            let lower = which == SurfaceWhich::ThetaLower;
            let surf = if lower { th.phi_surface() } else { th.psi_surface() };
            grid_rows(surf, |i, j| {
                let (s, t) = (sg[i], tg[j]);
                let v = if lower { th.theta_lower(s, t)? } else { th.theta_upper(s, t)? };
                let e = if lower { th.phi_breve(s, t)? } else { th.psi_hat(s, t)? };
                Ok((v, e))
            })
        }
    }
}

fn dsbs_rows(params: &DsbsParams, which: DsbsSurface, grid: usize) -> Result<Vec<Vec<f64>>, Error> {
    let g = axis_grid(1.0, grid, GridKind::Uniform);
    let mut values = Vec::with_capacity(grid * grid);
    for &s in &g {
        for &t in &g {
            let (phi, psi) = phi_psi_dsbs(params, s, t)?;
            values.push(match which {
                DsbsSurface::Phi => phi,
                DsbsSurface::Psi => psi,
            });
        }
    }
    let raw = ExponentSurface::new(g.clone(), g.clone(), values, Vec::new(), Base::Bits)?;
    let surf = match which {
        DsbsSurface::Phi => lower_convex_envelope(&raw)?,
        DsbsSurface::Psi => upper_concave_envelope(&raw)?,
    };
    grid_rows(&surf, |i, j| Ok((surf.value(i, j), surf.envelope_value(i, j).unwrap_or(f64::NAN))))
}
