use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use phasespace::charfn::CharFn;
use phasespace::deltaseries::{exp_laplace_series, fock_diagonal, TAYLOR_ORDER};
use phasespace::filters::{filtered_p_gaussian, filtered_p_numeric, filtered_p_numeric_cut, Cut, FilterKernel, GaussianCF};
use phasespace::numerics::{PhaseGrid, PhasePoint};
use phasespace::states::{make_state, StateKind, StateSpec};
use phasespace::witness::{classify_with, ClassifyOptions};

#[derive(Parser, Debug)]
#[command(name = "phasespace", version, about = "Phase-space distributions, filters and nonclassicality tests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample the s-ordered characteristic function on a grid.
    Charfn(CharfnArgs),
    /// Filtered P on a grid or along a cut.
    Filtered(FilteredArgs),
    /// Run the nonclassicality battery.
    Classify(ClassifyArgs),
    /// Fock diagonal of a Gaussian generator series (thermal or p_max).
    Fockdiag(FockdiagArgs),
    /// Run the acceptance suite.
    Verify(VerifyArgs),
    /// Write the filtered-P cuts of the four reference states.
    Figure1(Figure1Args),
}

#[derive(Args, Debug, Clone, Serialize)]
struct Common {
    /// Output path; stdout when omitted. Not part of the config hash.
    #[arg(long)]
    #[serde(skip)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Csv,
    Json,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
enum CutArg {
    Re,
    Im,
}

impl From<CutArg> for Cut {
    fn from(c: CutArg) -> Self {
        match c {
            CutArg::Re => Cut::Re,
            CutArg::Im => Cut::Im,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
struct CharfnArgs {
    /// State as JSON, or @path to a JSON file.
    #[arg(long)]
    state: String,
    /// Half-extent and odd node count, `L,N`.
    #[arg(long, default_value = "6,257")]
    grid: String,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    s: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Clone, Serialize)]
struct FilteredArgs {
    #[arg(long)]
    state: String,
    #[arg(long, default_value = "4,321")]
    grid: String,
    #[arg(long, default_value_t = 2.0)]
    w: f64,
    /// Emit a 1-D cut instead of the full grid.
    #[arg(long, value_enum)]
    cut: Option<CutArg>,
    /// Largest accepted imaginary residue.
    #[arg(long, default_value_t = 1e-9)]
    tolerance: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Clone, Serialize)]
struct ClassifyArgs {
    #[arg(long)]
    state: String,
    #[arg(long, default_value = "4,321")]
    grid: String,
    #[arg(long, default_value_t = 2.0)]
    w: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Clone, Serialize)]
struct FockdiagArgs {
    #[arg(long)]
    state: String,
    #[arg(long, default_value_t = 6)]
    kmax: u32,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Clone, Serialize)]
struct VerifyArgs {
    /// Run only these criteria (comma-separated ids).
    #[arg(long, value_delimiter = ',')]
    only: Vec<u8>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Clone, Serialize)]
struct Figure1Args {
    /// Output directory.
    #[arg(long, default_value = "figure1")]
    out: PathBuf,
    #[arg(long, default_value = "4,321")]
    grid: String,
    #[arg(long, default_value_t = 2.0)]
    w: f64,
}

enum Failure {
    Config(String),
    Runtime(String),
    Verification,
}

impl From<phasespace::Error> for Failure {
    fn from(e: phasespace::Error) -> Self {
        match e {
            phasespace::Error::Parameter(_) => Failure::Config(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Verification) => ExitCode::from(1),
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("PHASESPACE_THREADS") else { return Ok(()) };
    let n: usize = v.parse().map_err(|_| format!("PHASESPACE_THREADS must be a positive integer, got {v:?}"))?;
    if n == 0 {
        return Err("PHASESPACE_THREADS must be positive".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn run(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Charfn(a) => charfn(a),
        Command::Filtered(a) => filtered(a),
        Command::Classify(a) => classify(a),
        Command::Fockdiag(a) => fockdiag(a),
        Command::Verify(a) => verify(a),
        Command::Figure1(a) => figure1(a),
    }
}

fn parse_state(arg: &str) -> Result<StateSpec, Failure> {
    let text = match arg.strip_prefix('@') {
        Some(path) => std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("reading {path}: {e}")))?,
        None => arg.to_string(),
    };
    serde_json::from_str(&text).map_err(|e| Failure::Config(format!("invalid state: {e}")))
}

fn parse_grid(arg: &str) -> Result<PhaseGrid, Failure> {
    let bad = || Failure::Config(format!("grid must be `L,N` with L > 0 and odd N >= 3, got {arg:?}"));
    let (l, n) = arg.split_once(',').ok_or_else(bad)?;
    let l: f64 = l.trim().parse().map_err(|_| bad())?;
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    if n.is_multiple_of(2) {
        return Err(bad());
    }
    PhaseGrid::new(l, n).map_err(|e| Failure::Config(e.to_string()))
}

fn check_width(w: f64) -> Result<FilterKernel, Failure> {
    FilterKernel::box_filter(w).map_err(|e| Failure::Config(e.to_string()))
}

/// Stable hash of the canonical JSON form of a command's arguments: the
/// state and grid enter in parsed form, so equivalent spellings agree.
fn config_hash<T: Serialize>(command: &str, args: &T, spec: Option<&StateSpec>, grid: Option<&PhaseGrid>) -> String {
    // serde_json::Value keeps object keys sorted, which fixes the byte form
    let mut args = serde_json::to_value(args).expect("config serializes");
    if let Some(obj) = args.as_object_mut() {
        if let Some(spec) = spec {
            obj.insert("state".into(), serde_json::to_value(spec).expect("state serializes"));
        }
        if let Some(g) = grid {
            obj.insert("grid".into(), serde_json::json!([g.extent(), g.resolution()]));
        }
    }
    let value = serde_json::json!({ "command": command, "args": args });
    let canonical = serde_json::to_string(&value).expect("config serializes");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

fn provenance(command: &str, hash: &str) -> String {
    format!("# phasespace {} {command} config_sha256={hash}\n", env!("CARGO_PKG_VERSION"))
}

// Opens the destination up front so an unwritable path is a config error.
fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    match path {
        Some(p) => {
            let f = File::create(p).map_err(|e| Failure::Config(format!("cannot write {}: {e}", p.display())))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
    }
}

fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else {
        format!("{v:?}")
    }
}

fn write_cut(out: &mut dyn Write, header: &str, ts: &[f64], values: &[f64]) -> io::Result<()> {
    out.write_all(header.as_bytes())?;
    writeln!(out, "t,value")?;
    for (t, v) in ts.iter().zip(values) {
        writeln!(out, "{},{}", fmt_num(*t), fmt_num(*v))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct FieldJson<'a> {
    config_sha256: &'a str,
    extent: f64,
    resolution: usize,
    /// `[x, p, re, im]` rows in row-major order.
    values: Vec<[f64; 4]>,
}

fn write_field(out: &mut dyn Write, format: Format, command: &str, hash: &str, field: &phasespace::numerics::PhaseField) -> Result<(), Failure> {
    match format {
        Format::Csv => {
            out.write_all(provenance(command, hash).as_bytes())?;
            field.write_csv(&mut *out)?;
        }
        Format::Json => {
            let grid = field.grid().expect("sampled");
            let values = field
                .values()
                .expect("sampled")
                .iter()
                .enumerate()
                .map(|(k, z)| {
                    let p = grid.point_at(k);
                    [p.x, p.p, z.re, z.im]
                })
                .collect();
            let doc = FieldJson {
                config_sha256: hash,
                extent: grid.extent(),
                resolution: grid.resolution(),
                values,
            };
            serde_json::to_writer_pretty(&mut *out, &doc).map_err(|e| Failure::Runtime(e.to_string()))?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Tagged<'a, T: Serialize> {
    config_sha256: &'a str,
    #[serde(flatten)]
    body: T,
}

fn write_json<T: Serialize>(out: &mut dyn Write, hash: &str, body: T) -> Result<(), Failure> {
    serde_json::to_writer_pretty(&mut *out, &Tagged { config_sha256: hash, body }).map_err(|e| Failure::Runtime(e.to_string()))?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn charfn(a: CharfnArgs) -> Result<(), Failure> {
    let spec = parse_state(&a.state)?;
    let grid = parse_grid(&a.grid)?;
    let state = make_state(spec.clone())?;
    let hash = config_hash("charfn", &a, Some(&spec), Some(&grid));
    let mut out = open_out(a.common.out.as_deref())?;
    let field = CharFn::new(&state).with_s(a.s).sample(&grid)?;
    write_field(&mut *out, a.common.format.unwrap_or(Format::Csv), "charfn", &hash, &field)
}

fn filtered(a: FilteredArgs) -> Result<(), Failure> {
    let spec = parse_state(&a.state)?;
    let grid = parse_grid(&a.grid)?;
    let kernel = check_width(a.w)?;
    let state = make_state(spec.clone())?;
    let hash = config_hash("filtered", &a, Some(&spec), Some(&grid));
    let mut out = open_out(a.common.out.as_deref())?;
    let format = a.common.format.unwrap_or(Format::Csv);
    match a.cut {
        Some(cut) => {
            let ts = grid.coords();
            let (values, residue) = filtered_p_numeric_cut(&state, &kernel, cut.into(), &ts)?;
            if residue > a.tolerance {
                return Err(phasespace::Error::ComplexResidue { residue }.into());
            }
            match format {
                Format::Csv => write_cut(&mut *out, &provenance("filtered", &hash), &ts, &values)?,
                Format::Json => {
                    #[derive(Serialize)]
                    struct CutJson {
                        cut: CutArg,
                        t: Vec<f64>,
                        value: Vec<f64>,
                    }
                    write_json(&mut *out, &hash, CutJson { cut, t: ts, value: values })?;
                }
            }
            out.flush()?;
            Ok(())
        }
        None => {
            let f = filtered_p_numeric(&state, &kernel, &grid)?;
            if f.residue > a.tolerance {
                return Err(phasespace::Error::ComplexResidue { residue: f.residue }.into());
            }
            write_field(&mut *out, format, "filtered", &hash, &f.field)
        }
    }
}

fn classify(a: ClassifyArgs) -> Result<(), Failure> {
    let spec = parse_state(&a.state)?;
    let grid = parse_grid(&a.grid)?;
    check_width(a.w)?;
    if a.common.format == Some(Format::Csv) {
        return Err(Failure::Config("classify writes JSON only".into()));
    }
    let state = make_state(spec.clone())?;
    let hash = config_hash("classify", &a, Some(&spec), Some(&grid));
    let mut out = open_out(a.common.out.as_deref())?;
    let opts = ClassifyOptions {
        w: a.w,
        filter_grid: grid,
        ..ClassifyOptions::default()
    };
    write_json(&mut *out, &hash, classify_with(&state, &opts))
}

fn fockdiag(a: FockdiagArgs) -> Result<(), Failure> {
    let spec = parse_state(&a.state)?;
    let gamma = match (&spec.kind, spec.rotation, spec.displacement) {
        (StateKind::PMax, _, d) if d == PhasePoint::ORIGIN => -0.5,
        (StateKind::Thermal { nbar }, _, d) if d == PhasePoint::ORIGIN => *nbar,
        _ => return Err(Failure::Config("fockdiag needs an undisplaced thermal or p_max state".into())),
    };
    let hash = config_hash("fockdiag", &a, Some(&spec), None);
    let mut out = open_out(a.common.out.as_deref())?;
    let report = fock_diagonal(&exp_laplace_series(gamma, TAYLOR_ORDER), a.kmax)?;
    match a.common.format.unwrap_or(Format::Json) {
        Format::Json => write_json(&mut *out, &hash, report),
        Format::Csv => {
            out.write_all(provenance("fockdiag", &hash).as_bytes())?;
            writeln!(out, "k,pairing,fourier,candidate,matches_candidate")?;
            for e in &report.entries {
                let fourier = e.fourier.map(fmt_num).unwrap_or_default();
                writeln!(out, "{},{},{},{},{}", e.k, fmt_num(e.pairing), fourier, fmt_num(e.candidate), e.matches_candidate)?;
            }
            out.flush()?;
            Ok(())
        }
    }
}

fn verify(a: VerifyArgs) -> Result<(), Failure> {
    if let Some(bad) = a.only.iter().find(|&&id| !(1..=11).contains(&id)) {
        return Err(Failure::Config(format!("no acceptance criterion {bad}")));
    }
    let mut out = open_out(a.common.out.as_deref())?;
    let report = if a.only.is_empty() {
        phasespace_verify::run_suite(&mut |id, t| eprintln!("criterion {id:>2}: {:.2} s", t.as_secs_f64()))
    } else {
        let criteria = a
            .only
            .iter()
            .map(|&id| {
                let start = std::time::Instant::now();
                let c = phasespace_verify::run_criterion(id);
                eprintln!("criterion {id:>2}: {:.2} s", start.elapsed().as_secs_f64());
                c
            })
            .collect();
        phasespace_verify::SuiteReport { criteria }
    };
    match a.common.format {
        Some(Format::Json) => {
            out.write_all(report.to_json().as_bytes())?;
            writeln!(out)?;
        }
        Some(Format::Csv) => return Err(Failure::Config("verify writes text or JSON".into())),
        None => out.write_all(report.to_text().as_bytes())?,
    }
    out.flush()?;
    if a.common.out.is_some() {
        for c in &report.criteria {
            println!("{}", c.summary_line());
        }
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Verification)
    }
}

/// Cut files written by `figure1`: name, state, characteristic-function
/// parameters and cut direction.
fn figure1_cuts() -> Vec<(&'static str, &'static str, GaussianCF, Cut)> {
    vec![
        ("vacuum.csv", "vacuum", GaussianCF::vacuum(), Cut::Re),
        ("p_max.csv", "p_max", GaussianCF::p_max(), Cut::Re),
        ("thermal.csv", "thermal(nbar=0.5)", GaussianCF::thermal(0.5), Cut::Re),
        ("squeezed_re.csv", "squeezed(xi=1.4)", GaussianCF::squeezed(1.4), Cut::Re),
        ("squeezed_im.csv", "squeezed(xi=1.4)", GaussianCF::squeezed(1.4), Cut::Im),
    ]
}

fn figure1(a: Figure1Args) -> Result<(), Failure> {
    let grid = parse_grid(&a.grid)?;
    check_width(a.w)?;
    std::fs::create_dir_all(&a.out).map_err(|e| Failure::Config(format!("cannot create {}: {e}", a.out.display())))?;
    #[derive(Serialize)]
    struct Figure1Config {
        w: f64,
    }
    let hash = config_hash("figure1", &Figure1Config { w: a.w }, None, Some(&grid));
    let ts = grid.coords();
    for (file, label, cf, cut) in figure1_cuts() {
        let values: Vec<f64> = ts.iter().map(|&t| filtered_p_gaussian(cf, a.w, cut.point(t))).collect();
        let path = a.out.join(file);
        let mut out = open_out(Some(&path))?;
        let cut_name = match cut {
            Cut::Re => "re",
            Cut::Im => "im",
        };
        let header = format!("{}# state={label} cut={cut_name} w={}\n", provenance("figure1", &hash), a.w);
        write_cut(&mut *out, &header, &ts, &values)?;
        out.flush()?;
    }
    Ok(())
}
