//! `droso`: batch front end for the drosophila Lie algebra engine.
//!
//! Four subcommands cover the artifact workflow: `species` prints a census
//! CSV, `verify` runs the structural relation suite and emits a JSON report,
//! `growth` measures the growth function into a table CSV (plus an optional
//! envelope overlay CSV) and fits the log-log slope, and `nil` powers
//! seeded random elements to zero and streams JSON reports.
//!
//! Every output opens with a versioned format header that echoes the full
//! run configuration, so a run is reproducible from its output alone.
//! Identical configurations and seeds produce byte-identical outputs.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use drosophila::dpring::PrimeField;
use drosophila::growth::{
    bound_overlay, enumerate, gk_fit, stabilize_depth, GkFit, GrowthRow, GrowthTable, Stability,
    TupleGenerator,
};
use drosophila::nilcheck::{nil_index_with, sample_elements};
use drosophila::pivots::{verify_suite, SuiteOptions};
use drosophila::species::{parse_schedule, Schedule, Segment, SegmentRule};
use drosophila::{Ctx, Error};

const FORMAT_VERSION: u32 = 1;
const TOOL: &str = concat!("droso ", env!("CARGO_PKG_VERSION"));

const EXIT_CODES: &str = "\
EXIT CODES:
  0  success; all requested checks passed
  1  a verification check failed (relation counterexample or depletion
     trajectory violation); the report written still describes the failure
  2  invalid input: unknown flags, non-prime p, malformed schedule or tuple
     file (diagnostics cite line and column), inconsistent depths
  3  budget exhausted: outputs were written but are partial and flagged
     (growth table not stabilized, or some elements not nil within budget)";

/// Exact computations on drosophila restricted Lie algebras: censuses,
/// structural relation suites, growth tables, and nillity sampling.
#[derive(Parser)]
#[command(name = "droso", version, after_help = EXIT_CODES)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build a specie and print its generation census as CSV.
    ///
    /// Output: `# droso-census v1` header, a `# config:` line echoing the
    /// run configuration as JSON, then rows `generation,size,subexp_root`
    /// where subexp_root is |gen|^(1/2^n) to six decimals.
    Species(SpeciesCmd),
    /// Run the structural relation suite and print a JSON report.
    ///
    /// Output: one JSON document {format, version, tool, config, all_pass,
    /// report}; report.relations lists each relation family with status
    /// pass/fail/skipped and a counterexample string on failure. Exit 1 if
    /// any relation fails; skipped families do not fail a run.
    Verify(VerifyCmd),
    /// Measure the growth function gamma(n) and fit its log-log slope.
    ///
    /// Output: `# droso-growth v1` header, `# config:` echo, `# depth:` and
    /// `# status:` lines, rows `n,dim,gamma,stable`, then a trailing
    /// `# gk-fit slope=... lower=... upper=... points=...` comment (or
    /// `# gk-fit unavailable: ...` for short tables). With --overlay FILE,
    /// also writes `# droso-overlay v1` with rows `n,lower,upper` giving the
    /// reference envelope exp(c*n/(ln n)^lambda(p)) for the two constants.
    /// With --from-table FILE, skips computation, reads a previously written
    /// table (comments ignored, columns n,dim,gamma) and prints the fit as a
    /// JSON document {format, version, tool, config, fit}.
    Growth(GrowthCmd),
    /// Power seeded random elements to zero and stream JSON reports.
    ///
    /// Output: JSON lines. First a header object {format, version, tool,
    /// config}; then one {sample, report} object per element, where report
    /// carries nil_index (null if the budget ran out), the depletion
    /// trajectory of the successive p-th powers, trajectory_ok, and the
    /// predicted generation bound; finally a {summary} object. Exit 1 on a
    /// trajectory violation, 3 if any element was inconclusive.
    Nil(NilCmd),
}

/// Where the specie comes from: a schedule file or a built-in family.
#[derive(Args)]
struct SpecieArgs {
    /// JSON schedule file: {"k": K, "segments": [{"rule":
    /// "wild"|"duplex"|"clover"|"custom", "length": N, "pairs": [[f,m],..]},
    /// ..]}. "pairs" applies to custom segments only.
    #[arg(long, value_name = "FILE", conflicts_with_all = ["wild", "clover", "gens"])]
    schedule: Option<PathBuf>,
    /// Built-in wild specie (all ordered pairs) over an alphabet of K flies.
    #[arg(long, value_name = "K", conflicts_with = "clover")]
    wild: Option<u32>,
    /// Built-in clover specie: three flies per generation over alphabet 3.
    #[arg(long)]
    clover: bool,
    /// Breeding generations for --wild/--clover (generation 0 is the
    /// alphabet).
    #[arg(long, value_name = "N", default_value_t = 3)]
    gens: u32,
}

#[derive(Args)]
struct SpeciesCmd {
    #[command(flatten)]
    specie: SpecieArgs,
    /// Write the CSV here instead of stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyCmd {
    /// Field characteristic (a prime).
    #[arg(long)]
    p: u64,
    #[command(flatten)]
    specie: SpecieArgs,
    /// Truncation depth to verify at; defaults to the full specie depth.
    #[arg(long, value_name = "D")]
    depth: Option<u32>,
    /// Cap tuple: trivial | kappa:K | qkappa:Q,K | constant:S,R | file:PATH.
    #[arg(long, value_name = "SPEC", default_value = "trivial")]
    tuple: String,
    /// Write the JSON report here instead of stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GrowthCmd {
    /// Field characteristic (a prime). Required unless --from-table.
    #[arg(long)]
    p: Option<u64>,
    #[command(flatten)]
    specie: SpecieArgs,
    /// Cap tuple: trivial | kappa:K | qkappa:Q,K | constant:S,R | file:PATH.
    /// A tuple file holds either [[S,R],..] per generation or a generator
    /// object {"kind": "kappa", "kappa": 0.5}.
    #[arg(long, value_name = "SPEC", default_value = "trivial")]
    tuple: String,
    /// Largest weight n to tabulate gamma(n) for.
    #[arg(long, value_name = "N")]
    max_weight: Option<u64>,
    /// Truncation depth: "auto" deepens until the table stabilizes, a number
    /// fixes it.
    #[arg(long, value_name = "auto|D", default_value = "auto")]
    depth: String,
    /// Trailing fit window in points; 0 picks max(16, a quarter of the
    /// table).
    #[arg(long, value_name = "W", default_value_t = 0)]
    window: usize,
    /// Write the table CSV here instead of stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Also write the reference envelope CSV here.
    #[arg(long, value_name = "FILE")]
    overlay: Option<PathBuf>,
    /// Envelope constant for the overlay lower curve.
    #[arg(long, value_name = "C", default_value_t = 0.5)]
    c_lower: f64,
    /// Envelope constant for the overlay upper curve.
    #[arg(long, value_name = "C", default_value_t = 2.0)]
    c_upper: f64,
    /// Skip computation: read a table CSV written by this tool (or any CSV
    /// with columns n,dim,gamma) and print the GK fit as JSON.
    #[arg(long, value_name = "FILE", conflicts_with_all = ["p", "schedule", "wild", "clover", "gens", "max_weight", "overlay"])]
    from_table: Option<PathBuf>,
}

#[derive(Args)]
struct NilCmd {
    /// Field characteristic (a prime).
    #[arg(long)]
    p: u64,
    #[command(flatten)]
    specie: SpecieArgs,
    /// Truncation depth to power at; defaults to the full specie depth.
    #[arg(long, value_name = "D")]
    depth: Option<u32>,
    /// Cap tuple: trivial | kappa:K | qkappa:Q,K | constant:S,R | file:PATH.
    #[arg(long, value_name = "SPEC", default_value = "trivial")]
    tuple: String,
    /// Sample elements as combinations of growth basis rows of weight <= N.
    #[arg(long, value_name = "N", default_value_t = 8)]
    max_weight: u64,
    /// Number of random elements to test.
    #[arg(long, value_name = "C", default_value_t = 12)]
    count: usize,
    /// Seed for the sample generator; recorded in the output.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Power budget per element; defaults to a cap-and-depth heuristic.
    #[arg(long, value_name = "B")]
    budget: Option<u32>,
    /// Test non-uniform tuples anyway; reports are marked
    /// outside_hypotheses.
    #[arg(long)]
    allow_nonuniform: bool,
    /// Write the JSON lines here instead of stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

enum CliError {
    /// Bad flags or files: exit 2.
    Invalid(String),
    /// A check ran and failed: exit 1.
    CheckFailed(String),
    /// Work exceeded its budget; partial output was written: exit 3.
    Budget(String),
}

type CliResult<T> = std::result::Result<T, CliError>;

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::ResourceLimit(m) => CliError::Budget(m),
            other => CliError::Invalid(other.to_string()),
        }
    }
}

/// Everything needed to reproduce a run. The schedule is embedded in full,
/// so the echo is self-contained even when it came from a file.
#[derive(Serialize)]
struct RunConfig {
    command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    p: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    source: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    schedule: Option<Schedule>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tuple: Option<TupleGenerator>,
    #[serde(skip_serializing_if = "Option::is_none")]
    depth: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_weight: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    window: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    budget: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    c_lower: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    c_upper: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    from_table: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    overlay: Option<String>,
}

impl RunConfig {
    fn new(command: &'static str) -> Self {
        RunConfig {
            command,
            p: None,
            source: None,
            schedule: None,
            tuple: None,
            depth: None,
            max_weight: None,
            window: None,
            count: None,
            seed: None,
            budget: None,
            c_lower: None,
            c_upper: None,
            from_table: None,
            out: None,
            overlay: None,
        }
    }

    fn json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

fn main() {
    let cli = Cli::parse();
    if let Ok(v) = std::env::var("DROSO_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n >= 1 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: DROSO_THREADS must be a positive integer, got {v:?}");
                std::process::exit(2);
            }
        }
    }
    let code = match run(cli) {
        Ok(()) => 0,
        Err(CliError::CheckFailed(m)) => {
            eprintln!("check failed: {m}");
            1
        }
        Err(CliError::Invalid(m)) => {
            eprintln!("error: {m}");
            2
        }
        Err(CliError::Budget(m)) => {
            eprintln!("budget exhausted: {m}");
            3
        }
    };
    std::process::exit(code);
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.cmd {
        Cmd::Species(c) => cmd_species(c),
        Cmd::Verify(c) => cmd_verify(c),
        Cmd::Growth(c) => cmd_growth(c),
        Cmd::Nil(c) => cmd_nil(c),
    }
}

impl SpecieArgs {
    /// Resolves to a (source label, schedule) pair. Built-ins are expressed
    /// as single-segment schedules so every specie takes the same path.
    fn resolve(&self) -> CliResult<(String, Schedule)> {
        if let Some(path) = &self.schedule {
            let text = fs::read_to_string(path).map_err(|e| {
                CliError::Invalid(format!("cannot read schedule {}: {e}", path.display()))
            })?;
            let sched = parse_schedule(&text).map_err(|e| {
                CliError::Invalid(format!("in schedule {}: {e}", path.display()))
            })?;
            return Ok((path.display().to_string(), sched));
        }
        let (label, k, rule) = if let Some(k) = self.wild {
            (format!("wild:{k}"), k, SegmentRule::Wild)
        } else if self.clover {
            ("clover".to_string(), 3, SegmentRule::Clover)
        } else {
            return Err(CliError::Invalid(
                "choose a specie source: --schedule FILE, --wild K, or --clover".into(),
            ));
        };
        let sched = Schedule {
            k,
            segments: vec![Segment { rule, length: self.gens, pairs: None }],
        };
        Ok((label, sched))
    }
}

fn parse_tuple_spec(spec: &str) -> CliResult<TupleGenerator> {
    let invalid = |msg: String| CliError::Invalid(format!("tuple spec {spec:?}: {msg}"));
    if spec == "trivial" {
        return Ok(TupleGenerator::Trivial);
    }
    if let Some(rest) = spec.strip_prefix("kappa:") {
        let kappa: f64 =
            rest.parse().map_err(|e| invalid(format!("bad kappa {rest:?}: {e}")))?;
        return Ok(TupleGenerator::Kappa { kappa });
    }
    if let Some(rest) = spec.strip_prefix("qkappa:") {
        let (q, kappa) = rest
            .split_once(',')
            .ok_or_else(|| invalid("expected qkappa:Q,K".into()))?;
        let q: u32 = q.trim().parse().map_err(|e| invalid(format!("bad q {q:?}: {e}")))?;
        let kappa: f64 =
            kappa.trim().parse().map_err(|e| invalid(format!("bad kappa {kappa:?}: {e}")))?;
        return Ok(TupleGenerator::QKappa { q, kappa });
    }
    if let Some(rest) = spec.strip_prefix("constant:") {
        let (s, r) = rest
            .split_once(',')
            .ok_or_else(|| invalid("expected constant:S,R".into()))?;
        let s: u32 = s.trim().parse().map_err(|e| invalid(format!("bad S {s:?}: {e}")))?;
        let r: u32 = r.trim().parse().map_err(|e| invalid(format!("bad R {r:?}: {e}")))?;
        return Ok(TupleGenerator::Constant { s, r });
    }
    if let Some(path) = spec.strip_prefix("file:") {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Invalid(format!("cannot read tuple file {path}: {e}")))?;
        let trimmed = text.trim_start();
        if trimmed.starts_with('[') {
            let pairs: Vec<(u32, u32)> = serde_json::from_str(&text).map_err(|e| {
                CliError::Invalid(format!(
                    "malformed tuple file {path} (line {}, column {}): {e}",
                    e.line(),
                    e.column()
                ))
            })?;
            return Ok(TupleGenerator::Custom { pairs });
        }
        let gen: TupleGenerator = serde_json::from_str(&text).map_err(|e| {
            CliError::Invalid(format!(
                "malformed tuple file {path} (line {}, column {}): {e}",
                e.line(),
                e.column()
            ))
        })?;
        return Ok(gen);
    }
    Err(invalid(
        "expected trivial | kappa:K | qkappa:Q,K | constant:S,R | file:PATH".into(),
    ))
}

fn build_ctx(p: u64, sched: &Schedule, tuple: &TupleGenerator) -> CliResult<Ctx> {
    let fp = PrimeField::new(p)?;
    let specie = sched.build()?;
    let caps = tuple.realize(&specie, p)?;
    Ok(Ctx::new(fp, specie, caps)?)
}

fn emit(out: Option<&PathBuf>, body: &str) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, body).map_err(|e| {
            CliError::Invalid(format!("cannot write {}: {e}", path.display()))
        }),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn path_string(p: &Option<PathBuf>) -> Option<String> {
    p.as_ref().map(|p| p.display().to_string())
}

fn stability_str(s: Stability) -> &'static str {
    match s {
        Stability::Unknown => "unknown",
        Stability::Stable => "stable",
        Stability::ProvedStable => "proved-stable",
        Stability::Unstable => "unstable",
    }
}

fn cmd_species(c: SpeciesCmd) -> CliResult<()> {
    let (source, sched) = c.specie.resolve()?;
    let specie = sched.build()?;
    let mut cfg = RunConfig::new("species");
    cfg.source = Some(source);
    cfg.schedule = Some(sched);
    cfg.out = path_string(&c.out);

    let mut body = String::new();
    let _ = writeln!(body, "# droso-census v{FORMAT_VERSION} ({TOOL})");
    let _ = writeln!(body, "# config: {}", cfg.json());
    let _ = writeln!(body, "generation,size,subexp_root");
    for row in specie.census() {
        let _ = writeln!(body, "{},{},{:.6}", row.generation, row.size, row.subexp_root);
    }
    emit(c.out.as_ref(), &body)
}

fn cmd_verify(c: VerifyCmd) -> CliResult<()> {
    let (source, sched) = c.specie.resolve()?;
    let tuple = parse_tuple_spec(&c.tuple)?;
    let ctx = build_ctx(c.p, &sched, &tuple)?;
    let depth = c.depth.unwrap_or_else(|| ctx.specie.last_gen());

    let mut cfg = RunConfig::new("verify");
    cfg.p = Some(c.p);
    cfg.source = Some(source);
    cfg.schedule = Some(sched);
    cfg.tuple = Some(tuple);
    cfg.depth = Some(depth.to_string());
    cfg.out = path_string(&c.out);

    let report = verify_suite(&ctx, depth, &SuiteOptions::default())?;
    let all_pass = report.all_pass();

    #[derive(Serialize)]
    struct Doc<'a> {
        format: &'static str,
        version: u32,
        tool: &'static str,
        config: &'a RunConfig,
        all_pass: bool,
        report: &'a drosophila::pivots::VerifyReport,
    }
    let doc = Doc {
        format: "droso-verify",
        version: FORMAT_VERSION,
        tool: TOOL,
        config: &cfg,
        all_pass,
        report: &report,
    };
    let mut body = serde_json::to_string_pretty(&doc).expect("report serializes");
    body.push('\n');
    emit(c.out.as_ref(), &body)?;

    if all_pass {
        Ok(())
    } else {
        let failed: Vec<&str> = report
            .relations
            .iter()
            .filter(|r| r.status == drosophila::pivots::RelationStatus::Fail)
            .map(|r| r.relation.as_str())
            .collect();
        Err(CliError::CheckFailed(format!("relations failed: {}", failed.join(", "))))
    }
}

fn cmd_growth(c: GrowthCmd) -> CliResult<()> {
    if let Some(path) = &c.from_table {
        return growth_fit_only(&c, path);
    }
    let p = c
        .p
        .ok_or_else(|| CliError::Invalid("--p is required unless --from-table".into()))?;
    let max_weight = c
        .max_weight
        .ok_or_else(|| CliError::Invalid("--max-weight is required unless --from-table".into()))?;
    let (source, sched) = c.specie.resolve()?;
    let tuple = parse_tuple_spec(&c.tuple)?;
    let ctx = build_ctx(p, &sched, &tuple)?;

    let mut cfg = RunConfig::new("growth");
    cfg.p = Some(p);
    cfg.source = Some(source);
    cfg.schedule = Some(sched);
    cfg.tuple = Some(tuple);
    cfg.depth = Some(c.depth.clone());
    cfg.max_weight = Some(max_weight);
    cfg.window = Some(c.window);
    cfg.out = path_string(&c.out);
    if c.overlay.is_some() {
        cfg.c_lower = Some(c.c_lower);
        cfg.c_upper = Some(c.c_upper);
        cfg.overlay = path_string(&c.overlay);
    }

    let table = match c.depth.as_str() {
        "auto" => stabilize_depth(&ctx, max_weight, 1)?.1,
        d => {
            let depth: u32 = d.parse().map_err(|_| {
                CliError::Invalid(format!("--depth must be \"auto\" or an integer, got {d:?}"))
            })?;
            enumerate(&ctx, max_weight, depth)?
        }
    };

    let mut body = String::new();
    let _ = writeln!(body, "# droso-growth v{FORMAT_VERSION} ({TOOL})");
    let _ = writeln!(body, "# config: {}", cfg.json());
    let _ = writeln!(body, "# depth: {}", table.depth);
    let _ = writeln!(body, "# status: {}", stability_str(table.status));
    let _ = writeln!(body, "n,dim,gamma,stable");
    for row in &table.rows {
        let _ = writeln!(body, "{},{},{},{}", row.n, row.dim, row.gamma, stability_str(table.status));
    }
    match gk_fit(&table, c.window) {
        Ok(fit) => {
            let _ = writeln!(
                body,
                "# gk-fit slope={:.6} lower={:.6} upper={:.6} points={}",
                fit.slope, fit.lower, fit.upper, fit.points
            );
        }
        Err(e) => {
            let _ = writeln!(body, "# gk-fit unavailable: {e}");
        }
    }
    emit(c.out.as_ref(), &body)?;

    if let Some(overlay_path) = &c.overlay {
        let mut ov = String::new();
        let _ = writeln!(ov, "# droso-overlay v{FORMAT_VERSION} ({TOOL})");
        let _ = writeln!(ov, "# config: {}", cfg.json());
        let _ = writeln!(ov, "n,lower,upper");
        for row in &table.rows {
            if row.n < 3 {
                continue;
            }
            let (lo, hi) = bound_overlay(table.p, row.n, c.c_lower, c.c_upper)?;
            let _ = writeln!(ov, "{},{:.6e},{:.6e}", row.n, lo, hi);
        }
        emit(Some(overlay_path), &ov)?;
    }

    if c.depth == "auto" && table.status == Stability::Unstable {
        return Err(CliError::Budget(format!(
            "table did not stabilize by depth {}; output flagged unstable",
            table.depth
        )));
    }
    Ok(())
}

fn growth_fit_only(c: &GrowthCmd, path: &PathBuf) -> CliResult<()> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Invalid(format!("cannot read table {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields[0] == "n" {
            continue;
        }
        if fields.len() < 3 {
            return Err(CliError::Invalid(format!(
                "table {} line {}: expected at least n,dim,gamma",
                path.display(),
                lineno + 1
            )));
        }
        let parse = |s: &str, what: &str| -> CliResult<u64> {
            s.trim().parse().map_err(|e| {
                CliError::Invalid(format!(
                    "table {} line {}: bad {what} {s:?}: {e}",
                    path.display(),
                    lineno + 1
                ))
            })
        };
        rows.push(GrowthRow {
            n: parse(fields[0], "n")?,
            dim: parse(fields[1], "dim")?,
            gamma: parse(fields[2], "gamma")?,
        });
    }
    if rows.is_empty() {
        return Err(CliError::Invalid(format!("table {} has no data rows", path.display())));
    }
    let table = GrowthTable {
        p: 0,
        depth: 0,
        max_weight: rows.last().map(|r| r.n).unwrap_or(0),
        specie: String::new(),
        tuple: String::new(),
        status: Stability::Unknown,
        rows,
    };
    let fit = gk_fit(&table, c.window)?;

    let mut cfg = RunConfig::new("growth");
    cfg.from_table = Some(path.display().to_string());
    cfg.window = Some(c.window);
    cfg.out = path_string(&c.out);

    #[derive(Serialize)]
    struct Doc<'a> {
        format: &'static str,
        version: u32,
        tool: &'static str,
        config: &'a RunConfig,
        fit: &'a GkFit,
    }
    let doc = Doc {
        format: "droso-gkfit",
        version: FORMAT_VERSION,
        tool: TOOL,
        config: &cfg,
        fit: &fit,
    };
    let mut body = serde_json::to_string_pretty(&doc).expect("fit serializes");
    body.push('\n');
    emit(c.out.as_ref(), &body)
}

fn cmd_nil(c: NilCmd) -> CliResult<()> {
    let (source, sched) = c.specie.resolve()?;
    let tuple = parse_tuple_spec(&c.tuple)?;
    let ctx = build_ctx(c.p, &sched, &tuple)?;
    let depth = c.depth.unwrap_or_else(|| ctx.specie.last_gen());

    let mut cfg = RunConfig::new("nil");
    cfg.p = Some(c.p);
    cfg.source = Some(source);
    cfg.schedule = Some(sched);
    cfg.tuple = Some(tuple);
    cfg.depth = Some(depth.to_string());
    cfg.max_weight = Some(c.max_weight);
    cfg.count = Some(c.count);
    cfg.seed = Some(c.seed);
    cfg.budget = c.budget;
    cfg.out = path_string(&c.out);

    let samples = sample_elements(&ctx, depth, c.max_weight, c.count, c.seed)?;

    #[derive(Serialize)]
    struct Header<'a> {
        format: &'static str,
        version: u32,
        tool: &'static str,
        config: &'a RunConfig,
    }
    #[derive(Serialize)]
    struct Line<'a> {
        sample: usize,
        report: &'a drosophila::nilcheck::NilReport,
    }
    #[derive(Serialize)]
    struct Summary {
        count: usize,
        nil: usize,
        inconclusive: usize,
        trajectories_ok: bool,
    }
    #[derive(Serialize)]
    struct Tail {
        summary: Summary,
    }

    let mut body = String::new();
    let header =
        Header { format: "droso-nil", version: FORMAT_VERSION, tool: TOOL, config: &cfg };
    let _ = writeln!(body, "{}", serde_json::to_string(&header).expect("header serializes"));

    let mut nil = 0usize;
    let mut inconclusive = 0usize;
    let mut trajectories_ok = true;
    for (i, w) in samples.iter().enumerate() {
        let report = nil_index_with(w, &ctx, c.budget, c.allow_nonuniform)?;
        if report.nil_index.is_some() {
            nil += 1;
        } else {
            inconclusive += 1;
        }
        trajectories_ok &= report.trajectory_ok;
        let line = Line { sample: i, report: &report };
        let _ = writeln!(body, "{}", serde_json::to_string(&line).expect("line serializes"));
    }
    let tail = Tail {
        summary: Summary { count: samples.len(), nil, inconclusive, trajectories_ok },
    };
    let _ = writeln!(body, "{}", serde_json::to_string(&tail).expect("summary serializes"));
    emit(c.out.as_ref(), &body)?;

    if !trajectories_ok {
        return Err(CliError::CheckFailed(
            "a depletion trajectory exceeded its bound".into(),
        ));
    }
    if inconclusive > 0 {
        return Err(CliError::Budget(format!(
            "{inconclusive} of {} elements did not reach zero within budget",
            samples.len()
        )));
    }
    Ok(())
}
