use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gfa_core::classify::{Params, Report, SweepRow, Verdict};
use gfa_core::dsl::{parse, parse_family_file, print, Family};
use gfa_core::examples::{builtin, builtin_names};
use gfa_core::fourier::{dft_family, window, FourierError, FourierParams};
use gfa_core::scale::EpsGrid;
use gfa_core::verify::{run_battery, run_test, Criterion, RunError, TEST_NAMES};
use serde::Serialize;
use serde_json::{json, Value};

const EXIT_MISMATCH: u8 = 1;
const EXIT_INCONCLUSIVE: u8 = 2;
const EXIT_USAGE: u8 = 3;

#[derive(Parser)]
#[command(name = "gfa", version, about = "Regularity and scale tests for families of functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run membership and regularity tests.
    Classify(RunArgs),
    /// Run the spectral tests.
    Spectrum(RunArgs),
    /// Run the acceptance battery.
    Verify {
        /// Run the reduced subset.
        #[arg(long)]
        quick: bool,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Check a family file or expression and print it in canonical form.
    Parse {
        /// Family file.
        #[arg(long, conflicts_with = "expr")]
        family: Option<PathBuf>,
        /// Expression in `x1..xd` and `eps`.
        expr: Option<String>,
        #[arg(long, default_value_t = 1)]
        dim: usize,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Shipped family name.
    #[arg(long, conflicts_with = "family", required_unless_present = "family")]
    builtin: Option<String>,
    /// Family file.
    #[arg(long)]
    family: Option<PathBuf>,
    /// Comma-separated test names.
    #[arg(long, value_delimiter = ',')]
    tests: Vec<String>,
    /// `geom:<start>:<stop>:<count>`.
    #[arg(long)]
    eps_grid: Option<String>,
    #[arg(long)]
    m_max: Option<usize>,
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long)]
    n_max: Option<usize>,
    /// JSON report path, `-` for stdout.
    #[arg(long)]
    json: Option<PathBuf>,
    /// CSV path: sweep rows for classify, the peak trajectory for spectrum.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Reduced sampling density.
    #[arg(long)]
    quick: bool,
}

struct Usage(String);

impl<E: std::fmt::Display> From<E> for Usage {
    fn from(e: E) -> Usage {
        Usage(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    if let Err(Usage(msg)) = init_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(EXIT_USAGE);
    }
    let out = match cli.command {
        Command::Classify(a) => run(a, false),
        Command::Spectrum(a) => run(a, true),
        Command::Verify { quick, json } => verify(quick, json.as_deref()),
        Command::Parse { family, expr, dim } => parse_cmd(family.as_deref(), expr.as_deref(), dim),
    };
    match out {
        Ok(code) => ExitCode::from(code),
        Err(Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn init_threads() -> Result<(), Usage> {
    let Ok(v) = std::env::var("GFA_THREADS") else { return Ok(()) };
    let n: usize = v.parse().ok().filter(|&n| n > 0).ok_or_else(|| Usage(format!("GFA_THREADS={v:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn parse_grid(spec: &str) -> Result<EpsGrid, Usage> {
    let bad = || Usage(format!("bad --eps-grid {spec:?}, expected geom:<start>:<stop>:<count>"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [kind, start, stop, count] = parts[..] else { return Err(bad()) };
    let (start, stop): (f64, f64) = (start.parse().map_err(|_| bad())?, stop.parse().map_err(|_| bad())?);
    let count: usize = count.parse().map_err(|_| bad())?;
    if kind != "geom" {
        return Err(bad());
    }
    Ok(EpsGrid::geometric(start, stop, count)?)
}

struct Loaded {
    name: String,
    family: Family,
    expected: Vec<(&'static str, Option<Verdict>)>,
}

fn load(a: &RunArgs) -> Result<Loaded, Usage> {
    if let Some(name) = &a.builtin {
        let c = builtin(name)
            .ok_or_else(|| Usage(format!("unknown builtin {name:?}; known: {}", builtin_names().join(", "))))?;
        return Ok(Loaded { name: c.name.into(), family: c.family, expected: c.expected });
    }
    let path = a.family.as_ref().expect("clap requires a family source");
    let text = fs::read_to_string(path).map_err(|e| Usage(format!("{}: {e}", path.display())))?;
    let def = parse_family_file(&text).map_err(|e| Usage(format!("{}: {e}", path.display())))?;
    let family = Family::from_def(&def)?;
    Ok(Loaded { name: def.name, family, expected: Vec::new() })
}

fn run(a: RunArgs, spectral: bool) -> Result<u8, Usage> {
    let fam = load(&a)?;
    let tests: Vec<String> = match (&a.tests[..], spectral) {
        ([], false) => ["moderate", "tau", "schwartz", "slowscale_support"].map(String::from).to_vec(),
        ([], true) => ["slowscale_spectrum", "gs_infinity", "tempered_equality"].map(String::from).to_vec(),
        (t, _) => t.to_vec(),
    };
    if let Some(t) = tests.iter().find(|t| !TEST_NAMES.contains(&t.as_str())) {
        return Err(Usage(format!("unknown test {t:?}; known: {}", TEST_NAMES.join(", "))));
    }
    if spectral && fam.family.dim() != 1 {
        return Err(Usage(format!("spectrum needs a one-dimensional family, got d = {}", fam.family.dim())));
    }
    let mut p = if a.quick {
        Params { k_max: 4, points: 1025, refine_rounds: 2, ..Params::default() }
    } else {
        Params::default()
    };
    let mut fp = FourierParams::default();
    if let Some(g) = &a.eps_grid {
        let grid = parse_grid(g)?;
        if spectral { fp.grid = grid } else { p.grid = grid }
    }
    p.m_max = a.m_max.unwrap_or(p.m_max);
    p.k_max = a.k_max.unwrap_or(p.k_max);
    p.n_max = a.n_max.unwrap_or(p.n_max);
    let params = json!({"classify": p.to_json(), "fourier": fp.to_json()});

    // The summary moves to stderr when the JSON report takes stdout.
    let json_stdout = a.json.as_deref() == Some(Path::new("-"));
    let say = |line: String| if json_stdout { eprintln!("{line}") } else { println!("{line}") };
    let (mut mismatch, mut inconclusive) = (false, false);
    let mut reports = Vec::new();
    let mut rows = Vec::new();
    for t in &tests {
        let r = match run_test(t, &fam.family, &p, &fp) {
            Ok(r) => r,
            Err(RunError::Fourier(e @ FourierError::Dimension(_))) => return Err(e.into()),
            // Budget caps and other engine failures leave the test undecided.
            Err(e) => {
                say(format!("{:<20} error: {e}", t));
                inconclusive = true;
                reports.push(json!({"family": fam.name, "test": t, "verdict": "inconclusive",
                    "witnesses": {}, "diagnostics": {"error": e.to_string()}, "params": params, "version": version()}));
                continue;
            }
        };
        let want = fam.expected.iter().find(|e| e.0 == t.as_str()).and_then(|e| e.1);
        let status = match (r.verdict, want) {
            (Verdict::Inconclusive, _) => {
                inconclusive = true;
                "inconclusive"
            }
            (v, Some(w)) if v == w => "as expected",
            (_, None) => "",
            _ => {
                mismatch = true;
                "MISMATCH"
            }
        };
        let shown_want = want.map(|w| format!(" (expected {w})")).unwrap_or_default();
        say(format!("{:<20} {:<13}{shown_want} {status}", t, r.verdict.to_string()));
        for s in &r.sub_reports {
            say(format!("  {:<18} {}", s.test, s.verdict));
        }
        collect_rows(&r, &mut rows);
        reports.push(report_json(&fam.name, &r, &params));
    }
    if let Some(path) = &a.json {
        let doc = if reports.len() == 1 { reports.pop().expect("one report") } else { Value::Array(reports) };
        write_json(path, &doc)?;
    }
    if let Some(path) = &a.csv {
        if spectral { write_peaks(path, &fam.family, &fp)? } else { write_rows(path, &rows)? }
    }
    Ok(if mismatch {
        EXIT_MISMATCH
    } else if inconclusive {
        EXIT_INCONCLUSIVE
    } else {
        0
    })
}

fn version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

fn report_json(family: &str, r: &Report, params: &Value) -> Value {
    let mut v = json!({"family": family, "params": params, "version": version()});
    let body = serde_json::to_value(r).expect("serializable report");
    v.as_object_mut().expect("object").extend(body.as_object().expect("object").clone());
    v
}

fn collect_rows(r: &Report, out: &mut Vec<SweepRow>) {
    out.extend(r.rows.iter().cloned());
    for s in &r.sub_reports {
        collect_rows(s, out);
    }
}

fn write_json(path: &Path, doc: &Value) -> Result<(), Usage> {
    let text = serde_json::to_string_pretty(doc)? + "\n";
    if path == Path::new("-") {
        std::io::stdout().write_all(text.as_bytes())?;
    } else {
        fs::write(path, text).map_err(|e| Usage(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn write_rows(path: &Path, rows: &[SweepRow]) -> Result<(), Usage> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record(["eps", "region", "alpha", "m_or_k", "sup_logmag", "fit_slope", "residual"])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct PeakRow {
    eps: f64,
    l: f64,
    npts: usize,
    xi_peak: f64,
    xi_peak_times_eps: f64,
    peak_abs: f64,
    accuracy: Option<f64>,
}

fn write_peaks(path: &Path, f: &Family, fp: &FourierParams) -> Result<(), Usage> {
    let mut w = csv::Writer::from_path(path)?;
    for &eps in fp.grid.values() {
        let (l, npts) = window(f, eps)?;
        let s = dft_family(f, eps, l, npts)?;
        let (xi_peak, peak_abs) = s.peak();
        w.serialize(PeakRow { eps, l, npts, xi_peak, xi_peak_times_eps: xi_peak * eps, peak_abs, accuracy: s.accuracy })?;
    }
    w.flush()?;
    Ok(())
}

fn verify(quick: bool, json_path: Option<&Path>) -> Result<u8, Usage> {
    let line = |c: &Criterion| {
        println!("{} {:<18} {:>6.1}s  {}", if c.passed { "PASS" } else { "FAIL" }, c.id, c.seconds, c.summary);
    };
    let b = run_battery(quick, line);
    let failed = b.criteria.iter().filter(|c| !c.passed).count();
    println!("{} of {} criteria passed", b.criteria.len() - failed, b.criteria.len());
    if let Some(path) = json_path {
        write_json(path, &serde_json::to_value(&b)?)?;
    }
    Ok(if b.passed { 0 } else { EXIT_MISMATCH })
}

fn parse_cmd(family: Option<&Path>, expr: Option<&str>, dim: usize) -> Result<u8, Usage> {
    let (name, dim, e) = match (family, expr) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(|e| Usage(format!("{}: {e}", path.display())))?;
            let def = parse_family_file(&text).map_err(|e| Usage(format!("{}: {e}", path.display())))?;
            (def.name, def.dim, def.expr)
        }
        (None, Some(src)) => ("expr".to_string(), dim, parse(src)?),
        (None, None) => return Err(Usage("give a family file with --family or an expression".into())),
    };
    let f = Family::from_expr(&name, &e, dim)?;
    println!("name = {name}\ndim = {dim}\nu = {}", print(&e));
    println!("# max derivative order {}", f.max_order());
    Ok(0)
}
