mod config;

use clap::{Args, Parser, Subcommand};
use config::RunConfig;
use hausstraight::decomposition::{decompose, extract_straight_part, localize, ExtractionMode, ExtractionSchedule};
use hausstraight::fixtures::{generate, FixtureSpec};
use hausstraight::hausdorff::{capacity_profile, content, ContentMode, ContentOptions, Convention, HausdorffParams};
use hausstraight::measure::{load_measure, save_measure};
use hausstraight::pde::grid::GridDomain;
use hausstraight::pde::residual::Bump;
use hausstraight::pde::scheme::{solve_with_measure, SchemeConfig};
use hausstraight::straightness::{certify, worst_ball_ratio_with, CertRequest, CertStatus};
use hausstraight::verify::{run_all, run_suite, suite_names};
use hausstraight::{CarrierSubset, Error, Measure64, Point};
use serde::Serialize;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_DOMAIN: u8 = 1;
const EXIT_NEGATIVE: u8 = 2;
const EXIT_INCONCLUSIVE: u8 = 3;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "hausstraight", version, about = "Hausdorff content, straight decompositions and measure-data PDE solves")]
struct Cli {
    /// Worker threads (HAUSSTRAIGHT_THREADS overrides).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// JSON file with defaults for any flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write fixture measures as JSON.
    Fixtures(FixturesArgs),
    /// Estimate the Hausdorff content of a measure's carrier.
    Content(ContentArgs),
    /// Certify or refute the ball-density bound.
    StraightCheck(CheckArgs),
    /// Split a measure into certified straight parts.
    Decompose(DecomposeArgs),
    /// Decompose, then keep leading parts per epsilon stage.
    Localize(LocalizeArgs),
    /// Solve -Δu + e^u - 1 = ν on a rectangle.
    PdeSolve(PdeArgs),
    /// Run the acceptance suites.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct Common {
    /// Measure JSON file.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output file (stdout when absent).
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    s: Option<f64>,
    /// Radius cap; omitted means unbounded.
    #[arg(long)]
    delta: Option<f64>,
    /// spherical or diameter.
    #[arg(long)]
    convention: Option<String>,
}

#[derive(Args)]
struct FixturesArgs {
    /// Fixture spec as JSON, e.g. '{"kind":"segment","length":10}'.
    #[arg(long)]
    spec: Option<String>,
    /// Write the standard fixture set into this directory instead.
    #[arg(long)]
    standard: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ContentArgs {
    #[command(flatten)]
    common: Common,
    /// exact or greedy.
    #[arg(long)]
    mode: Option<String>,
    /// Minimal radius charged per ball.
    #[arg(long)]
    floor: Option<f64>,
    /// Sampling pitch along segments.
    #[arg(long)]
    pitch: Option<f64>,
    /// Decreasing scale caps for a capacity profile.
    #[arg(long, value_delimiter = ',')]
    deltas: Option<Vec<f64>>,
    /// CSV file for the capacity profile.
    #[arg(long)]
    profile: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    rmin: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Branch-and-bound node budget.
    #[arg(long)]
    budget: Option<u64>,
    /// CSV file for the worst ratio at each radius.
    #[arg(long)]
    profile: Option<PathBuf>,
}

#[derive(Args)]
struct DecomposeArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    rmin: Option<f64>,
    /// Certification slack.
    #[arg(long)]
    epsilon: Option<f64>,
    /// exact, heuristic or proof-schedule.
    #[arg(long)]
    mode: Option<String>,
    /// Top radius of the proof schedule.
    #[arg(long)]
    r0: Option<f64>,
    /// First slack of the proof schedule.
    #[arg(long)]
    eps0: Option<f64>,
}

#[derive(Args)]
struct LocalizeArgs {
    #[command(flatten)]
    decompose: DecomposeArgs,
    /// Non-increasing mass budgets, one per stage.
    #[arg(long, value_delimiter = ',')]
    epsilons: Option<Vec<f64>>,
}

#[derive(Args)]
struct PdeArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    /// Intervals per unit length on the unit square.
    #[arg(long)]
    n: Option<usize>,
    /// Grid spacing (with --bounds).
    #[arg(long)]
    h: Option<f64>,
    /// Rectangle as x0,y0,x1,y1.
    #[arg(long, value_delimiter = ',')]
    bounds: Option<Vec<f64>>,
    #[arg(long)]
    stages: Option<usize>,
    /// Mollifier width.
    #[arg(long)]
    tau: Option<f64>,
    /// Test bump: `x,y,r`, `center` or `quadrants`. Repeatable.
    #[arg(long = "test")]
    tests: Vec<String>,
    /// CSV output of the solution (x,y,u).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// JSON output of the solver report.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Suite name or number; all suites when absent.
    #[arg(long)]
    suite: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for plot-data CSV files.
    #[arg(long)]
    plot_dir: Option<PathBuf>,
}

type CliResult = Result<u8, Error>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let cfg = match &cli.config {
        Some(p) => match RunConfig::load(p) {
            Ok(c) => c,
            Err(msg) => {
                eprintln!("error: {msg}");
                return ExitCode::from(EXIT_DOMAIN);
            }
        },
        None => RunConfig::default(),
    };
    let threads = std::env::var("HAUSSTRAIGHT_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .or(cli.threads)
        .or(cfg.threads);
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_DOMAIN);
        }
    }
    let result = match cli.command {
        Command::Fixtures(a) => fixtures(a, &cfg),
        Command::Content(a) => content_cmd(a, &cfg),
        Command::StraightCheck(a) => straight_check(a, &cfg),
        Command::Decompose(a) => decompose_cmd(a, &cfg),
        Command::Localize(a) => localize_cmd(a, &cfg),
        Command::PdeSolve(a) => pde_solve(a, &cfg),
        Command::Verify(a) => verify(a, &cfg),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_DOMAIN)
        }
    }
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

fn read_measure(input: Option<&PathBuf>) -> Result<Measure64, Error> {
    let path = input.ok_or_else(|| usage("--input is required"))?;
    let file = File::open(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    load_measure(BufReader::new(file))
}

fn emit<V: Serialize>(value: &V, output: Option<&PathBuf>) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.into()))?;
    match output {
        Some(p) => std::fs::write(p, text + "\n")?,
        None => writeln!(std::io::stdout().lock(), "{text}")?,
    }
    Ok(())
}

fn write_csv(path: &Path, header: &str, rows: &[Vec<f64>]) -> Result<(), Error> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{header}")?;
    for r in rows {
        let line: Vec<String> = r.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

fn params(c: &Common, cfg: &RunConfig) -> Result<HausdorffParams<f64>, Error> {
    let s = c.s.or(cfg.s).ok_or_else(|| usage("--s is required"))?;
    let p = HausdorffParams::new(s, c.delta.or(cfg.delta).unwrap_or(f64::INFINITY))?;
    let conv = match c.convention.as_deref().or(cfg.convention.as_deref()) {
        None | Some("spherical") => Convention::Spherical,
        Some("diameter") => Convention::Diameter,
        Some(other) => return Err(usage(format!("unknown convention {other:?}"))),
    };
    Ok(p.with_convention(conv))
}

fn fixtures(a: FixturesArgs, cfg: &RunConfig) -> CliResult {
    if let Some(dir) = &a.standard {
        std::fs::create_dir_all(dir)?;
        for (name, spec) in standard_fixtures() {
            let mu: Measure64 = generate(&spec)?;
            save_measure(&mu, BufWriter::new(File::create(dir.join(format!("{name}.json")))?))?;
        }
        return Ok(0);
    }
    let spec: FixtureSpec = match (&a.spec, &cfg.spec) {
        (Some(text), _) => serde_json::from_str(text).map_err(|e| usage(format!("bad fixture spec: {e}")))?,
        (None, Some(spec)) => spec.clone(),
        (None, None) => return Err(usage("--spec or --standard is required")),
    };
    let mu: Measure64 = generate(&spec)?;
    match a.output.as_ref().or(cfg.output.as_ref()) {
        Some(p) => save_measure(&mu, BufWriter::new(File::create(p)?))?,
        None => {
            save_measure(&mu, std::io::stdout().lock())?;
            println!();
        }
    }
    Ok(0)
}

fn standard_fixtures() -> Vec<(&'static str, FixtureSpec)> {
    vec![
        ("segment", FixtureSpec::Segment { length: 10.0, density: 1.0 }),
        ("parallel", FixtureSpec::ParallelSegments { length: 10.0, gap: 0.5, density: 1.0 }),
        ("circle", FixtureSpec::CirclePolygon { n: 1024, radius: 1.0, density: 1.0 }),
        ("cantor_segments", FixtureSpec::CantorSegments { depth: 5, density: None }),
        ("cantor_atoms", FixtureSpec::CantorAtoms { depth: 5 }),
        (
            "atom_cloud",
            FixtureSpec::AtomCloud {
                n: 12,
                dimension: 2,
                side: 1.0,
                mass_min: 0.05,
                mass_max: 0.4,
                seed: 7,
            },
        ),
        (
            "atom_clusters",
            FixtureSpec::AtomClusters {
                clusters: 3,
                per_cluster: 5,
                spread: 0.1,
                separation: 1.0,
                mass_min: 0.02,
                mass_max: 0.06,
                seed: 7,
            },
        ),
    ]
}

fn content_cmd(a: ContentArgs, cfg: &RunConfig) -> CliResult {
    let mu = read_measure(a.common.input.as_ref().or(cfg.input.as_ref()))?;
    let p = params(&a.common, cfg)?;
    let mut opts = match a.mode.as_deref().or(cfg.mode.as_deref()) {
        None | Some("greedy") => ContentOptions::greedy(),
        Some("exact") => ContentOptions::exact(),
        Some(other) => return Err(usage(format!("unknown content mode {other:?}"))),
    };
    if let Some(f) = a.floor.or(cfg.floor) {
        opts = opts.with_floor(f);
    }
    if let Some(pitch) = a.pitch.or(cfg.pitch) {
        opts = opts.with_pitch(pitch);
    }
    let full = CarrierSubset::full(&mu);
    let output = a.common.output.as_ref().or(cfg.output.as_ref());
    match a.deltas.or_else(|| cfg.deltas.clone()) {
        Some(deltas) => {
            let prof = capacity_profile(&mu, &full, p.s(), &deltas, &opts)?;
            if let Some(path) = a.profile.as_ref().or(cfg.profile.as_ref()) {
                let rows: Vec<Vec<f64>> = deltas.iter().zip(&prof).map(|(d, e)| vec![*d, e.lower, e.upper]).collect();
                write_csv(path, "delta,lower,upper", &rows)?;
            }
            emit(&prof, output)?;
        }
        None => {
            let est = content(&mu, &full, &p, &opts)?;
            if est.mode == ContentMode::Greedy {
                eprintln!("content in [{}, {}]", est.lower, est.upper);
            }
            emit(&est, output)?;
        }
    }
    Ok(0)
}

fn straight_check(a: CheckArgs, cfg: &RunConfig) -> CliResult {
    let mu = read_measure(a.common.input.as_ref().or(cfg.input.as_ref()))?;
    let p = params(&a.common, cfg)?;
    let mut req = CertRequest::new(p).with_epsilon(a.epsilon.or(cfg.epsilon).unwrap_or(0.0));
    if let Some(r) = a.rmin.or(cfg.rmin) {
        req = req.with_r_min(r);
    }
    if let Some(b) = a.budget.or(cfg.budget) {
        req = req.with_budget(b);
    }
    let cert = certify(&mu, &req)?;
    if let Some(path) = a.profile.as_ref().or(cfg.profile.as_ref()) {
        let r_lo = req.effective_r_min(&mu)?;
        let r_hi = p.delta().min(mu.diameter()).max(r_lo);
        let k = 24;
        let mut rows = Vec::new();
        for i in 0..=k {
            let r = r_lo * (r_hi / r_lo).powf(i as f64 / k as f64);
            let w = worst_ball_ratio_with(&mu, &p.with_delta(r)?, Some(r), 1e-4, req.budget)?;
            rows.push(vec![r, w.lower, w.upper]);
        }
        write_csv(path, "radius,ratio_lower,ratio_upper", &rows)?;
    }
    eprintln!("status: {}", serde_json::to_value(cert.status).map_err(|e| Error::Io(e.into()))?.as_str().unwrap_or("?"));
    emit(&cert, a.common.output.as_ref().or(cfg.output.as_ref()))?;
    Ok(match cert.status {
        CertStatus::Certified => 0,
        CertStatus::Violated => EXIT_NEGATIVE,
        CertStatus::Inconclusive => EXIT_INCONCLUSIVE,
    })
}

fn extraction_mode(name: Option<&str>) -> Result<ExtractionMode, Error> {
    match name {
        None | Some("exact") => Ok(ExtractionMode::Exact),
        Some("heuristic") => Ok(ExtractionMode::Heuristic),
        Some("proof-schedule") | Some("proof_schedule") => Ok(ExtractionMode::ProofSchedule),
        Some(other) => Err(usage(format!("unknown mode {other:?}"))),
    }
}

fn schedule(
    a: &DecomposeArgs,
    cfg: &RunConfig,
    mode: ExtractionMode,
    mu: &Measure64,
    p: &HausdorffParams<f64>,
) -> Result<ExtractionSchedule<f64>, Error> {
    let r_min = match a.rmin.or(cfg.rmin) {
        Some(r) => r,
        // same rule as straight-check: segment-only carriers get the default floor
        None => CertRequest::new(*p).effective_r_min(mu)?,
    };
    let slack = a.epsilon.or(cfg.epsilon).unwrap_or(0.0);
    let sched = if mode == ExtractionMode::ProofSchedule {
        ExtractionSchedule::geometric(p.s(), a.r0.or(cfg.r0).unwrap_or(1.0), r_min, a.eps0.or(cfg.eps0).unwrap_or(0.25))?
    } else {
        ExtractionSchedule::floor(r_min)?
    };
    Ok(sched.with_slack(slack))
}

fn decompose_cmd(a: DecomposeArgs, cfg: &RunConfig) -> CliResult {
    let mu = read_measure(a.common.input.as_ref().or(cfg.input.as_ref()))?;
    let p = params(&a.common, cfg)?;
    let mode = extraction_mode(a.mode.as_deref().or(cfg.mode.as_deref()))?;
    let sched = schedule(&a, cfg, mode, &mu, &p)?;
    let output = a.common.output.as_ref().or(cfg.output.as_ref());
    if mode == ExtractionMode::ProofSchedule {
        let part = extract_straight_part(&mu, &p, &sched, mode)?;
        eprintln!("one part of mass {}", part.mass);
        emit(&part, output)?;
    } else {
        let dec = decompose(&mu, &p, &sched, mode)?;
        eprintln!(
            "{} parts, residual mass {}",
            dec.parts.len(),
            dec.residual.mass(&mu) + 0.0
        );
        emit(&dec, output)?;
    }
    Ok(0)
}

#[derive(Serialize)]
struct Localized<'a> {
    decomposition: &'a hausstraight::decomposition::Decomposition<f64>,
    stages: &'a [hausstraight::decomposition::LocalizationStage<f64>],
}

fn localize_cmd(a: LocalizeArgs, cfg: &RunConfig) -> CliResult {
    let d = &a.decompose;
    let mu = read_measure(d.common.input.as_ref().or(cfg.input.as_ref()))?;
    let p = params(&d.common, cfg)?;
    let mode = extraction_mode(d.mode.as_deref().or(cfg.mode.as_deref()))?;
    let sched = schedule(d, cfg, mode, &mu, &p)?;
    let eps = a
        .epsilons
        .or_else(|| cfg.epsilons.clone())
        .ok_or_else(|| usage("--epsilons is required"))?;
    let dec = decompose(&mu, &p, &sched, mode)?;
    let loc = localize(&mu, &dec, &eps)?;
    let all = loc.stages.iter().all(|s| s.is_certified() && s.meets_target);
    emit(
        &Localized {
            decomposition: &dec,
            stages: &loc.stages,
        },
        d.common.output.as_ref().or(cfg.output.as_ref()),
    )?;
    Ok(if all { 0 } else { EXIT_NEGATIVE })
}

fn bumps(names: &[String], dom: &GridDomain<f64>) -> Result<Vec<Bump<f64>>, Error> {
    let (w, h) = (dom.x1() - dom.x0, dom.y1() - dom.y0);
    let side = w.min(h);
    let mut out = Vec::new();
    for name in names {
        match name.as_str() {
            "center" => out.push(Bump::new(Point::xy(dom.x0 + w / 2.0, dom.y0 + h / 2.0), 0.3 * side)?),
            "quadrants" => {
                for (fx, fy) in [(0.25, 0.25), (0.75, 0.25), (0.25, 0.75), (0.75, 0.75)] {
                    out.push(Bump::new(Point::xy(dom.x0 + fx * w, dom.y0 + fy * h), 0.2 * side)?);
                }
            }
            spec => {
                let v: Vec<f64> = spec
                    .split(',')
                    .map(|t| t.trim().parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| usage(format!("test function {spec:?} is not `center`, `quadrants` or `x,y,r`")))?;
                if v.len() != 3 {
                    return Err(usage(format!("test function {spec:?} needs three numbers")));
                }
                out.push(Bump::new(Point::xy(v[0], v[1]), v[2])?);
            }
        }
    }
    Ok(out)
}

fn pde_solve(a: PdeArgs, cfg: &RunConfig) -> CliResult {
    let nu = read_measure(a.input.as_ref().or(cfg.input.as_ref()))?;
    let dom = match (a.bounds.or_else(|| cfg.bounds.clone()), a.h.or(cfg.h)) {
        (Some(b), Some(h)) if b.len() == 4 => GridDomain::rectangle(b[0], b[1], b[2], b[3], h)?,
        (Some(_), Some(_)) => return Err(usage("--bounds takes x0,y0,x1,y1")),
        (Some(_), None) => return Err(usage("--bounds needs --h")),
        (None, _) => GridDomain::unit_square(a.n.or(cfg.n).unwrap_or(128))?,
    };
    let mut scheme: SchemeConfig<f64> = cfg.scheme.clone().unwrap_or_default();
    if let Some(s) = a.stages {
        scheme.stages = s;
    }
    if let Some(t) = a.tau {
        scheme.tau = Some(t);
    }
    let names = if a.tests.is_empty() {
        cfg.tests.clone().unwrap_or_default()
    } else {
        a.tests
    };
    scheme.test_functions.extend(bumps(&names, &dom)?);
    let (w, rep) = solve_with_measure(dom, &nu, &scheme)?;
    if let Some(p) = a.csv.as_ref().or(cfg.csv.as_ref()) {
        w.write_csv(BufWriter::new(File::create(p)?))?;
    }
    match a.report.as_ref().or(cfg.report.as_ref()) {
        Some(p) => rep.write_json(BufWriter::new(File::create(p)?))?,
        None => emit(&rep, None)?,
    }
    eprintln!(
        "{} stages, checks {}",
        rep.stages.len(),
        if rep.passed { "passed" } else { "FAILED" }
    );
    Ok(if rep.passed { 0 } else { EXIT_NEGATIVE })
}

fn verify(a: VerifyArgs, cfg: &RunConfig) -> CliResult {
    let seed = a.seed.or(cfg.seed).unwrap_or(7);
    let outcomes = match a.suite.as_ref().or(cfg.suite.as_ref()) {
        Some(name) => vec![run_suite(name, seed).map_err(|e| usage(format!("{e} ({})", suite_names().join(", "))))?],
        None => run_all(seed),
    };
    if let Some(dir) = a.plot_dir.as_ref().or(cfg.plot_dir.as_ref()) {
        std::fs::create_dir_all(dir)?;
        for o in &outcomes {
            for p in &o.plots {
                std::fs::write(dir.join(format!("{}.csv", p.name)), p.to_csv())?;
            }
        }
    }
    let mut out = std::io::stdout().lock();
    for o in &outcomes {
        writeln!(out, "{}", o.line())?;
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    writeln!(out, "{} passed, {} failed", outcomes.len() - failed, failed)?;
    Ok(if failed == 0 { 0 } else { EXIT_NEGATIVE })
}
