use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use isolab::document::{GroundTruthDoc, MapDocument, Report};
use isolab::gen::{corner_embedding, perturb_random, random_complete_isometry, random_noncontraction, random_spec, random_triple_morphism, GenSpec};
use isolab::holsztynski::{contractive, extract_certificate, isometry_verdict};
use isolab::matrix::{seeded_rng, Shape};
use isolab::nicex::{self, Mode, NicexConfig};
use isolab::{analyze, AnalyzeOptions, Error, Verdict};

mod render;

const EXIT_USAGE: u8 = 64;
const EXIT_WRONG_KIND: u8 = 65;
const EXIT_REFUSED: u8 = 3;
const EXIT_IO: u8 = 74;

#[derive(Parser)]
#[command(name = "isolab", version, about = "Certify or refute complete isometries between matrix spaces")]
struct Cli {
    /// Numerical tolerance.
    #[arg(long, global = true, env = "ISOLAB_TOL", default_value_t = isolab::DEFAULT_TOL)]
    tol: f64,
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Human)]
    format: Format,
    /// Write the machine-readable result here.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Human,
    Machine,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze one map document, or every `*.json` in `--dir`.
    Analyze(AnalyzeArgs),
    /// Isometry certificate for a commutative map document.
    Holsztynski { input: PathBuf },
    /// Run the truncated no-projection example.
    Nicex(NicexArgs),
    /// Write generated map documents with ground truth.
    Gen(GenArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    input: Option<PathBuf>,
    #[arg(long, conflicts_with = "input")]
    dir: Option<PathBuf>,
    /// Highest amplification level searched; defaults to `min(r, s)`.
    #[arg(long)]
    level: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Diagonal,
    Matrix,
}

#[derive(Args)]
struct NicexArgs {
    #[arg(long, default_value_t = 3)]
    n: usize,
    /// Truncation depth `K`.
    #[arg(long, default_value_t = 4)]
    levels: usize,
    /// Comma-separated epsilons; defaults to `1/(k+2)`.
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = ModeArg::Diagonal)]
    mode: ModeArg,
    /// Use the block map `x -> diag(x, x)` instead.
    #[arg(long)]
    control: bool,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GenKind {
    CompleteIsometry,
    TripleMorphism,
    Noncontraction,
    Perturbed,
    /// `x -> diag(x, 0)`, the identity frame.
    Corner,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum, default_value_t = GenKind::CompleteIsometry)]
    kind: GenKind,
    /// Domain shape `MxN`.
    #[arg(long, value_parser = parse_shape, default_value = "2x2")]
    domain: Shape,
    /// Codomain shape `RxS`.
    #[arg(long, value_parser = parse_shape, default_value = "4x4")]
    codomain: Shape,
    #[arg(long, default_value_t = 1)]
    multiplicity: usize,
    /// cb norm of the complementary block, in `[0, 1)`.
    #[arg(long, default_value_t = 0.5)]
    scale: f64,
    /// Generate this many documents with sampled shapes into `--dir`.
    #[arg(long, requires = "dir")]
    count: Option<usize>,
    #[arg(long)]
    dir: Option<PathBuf>,
}

fn parse_shape(s: &str) -> Result<Shape, String> {
    let (r, c) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected ROWSxCOLS, got {s:?}"))?;
    let r = r.trim().parse().map_err(|e| format!("rows: {e}"))?;
    let c = c.trim().parse().map_err(|e| format!("cols: {e}"))?;
    Shape::new(r, c).map_err(|e| e.to_string())
}

/// A failure with its exit status.
struct Failure(u8, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::WrongKind(_) => EXIT_WRONG_KIND,
            Error::EnumerationRefused(_) => EXIT_REFUSED,
            _ => EXIT_USAGE,
        };
        Failure(code, e.to_string())
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure(EXIT_IO, format!("{}: {e}", path.display()))
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| io_failure(path, e))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| io_failure(path, e))
}

fn parse_document(path: &Path) -> Result<(String, MapDocument), Failure> {
    let text = read(path)?;
    let doc = MapDocument::parse(&text).map_err(|e| Failure(EXIT_USAGE, format!("{}:{e}", path.display())))?;
    Ok((text, doc))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, message)) => {
            eprintln!("isolab: {message}");
            ExitCode::from(code)
        }
    }
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    if !(cli.tol > 0.0 && cli.tol < 1.0) {
        return Err(Failure(EXIT_USAGE, format!("--tol {} outside (0, 1)", cli.tol)));
    }
    match &cli.command {
        Command::Analyze(args) => match (&args.input, &args.dir) {
            (Some(input), None) => cmd_analyze(cli, args, input),
            (None, Some(dir)) => cmd_batch(cli, args, dir),
            _ => Err(Failure(EXIT_USAGE, "analyze needs an input file or --dir".into())),
        },
        Command::Holsztynski { input } => cmd_holsztynski(cli, input),
        Command::Nicex(args) => cmd_nicex(cli, args),
        Command::Gen(args) => cmd_gen(cli, args),
    }
}

fn analyze_options(cli: &Cli, args: &AnalyzeArgs) -> AnalyzeOptions {
    let mut options = AnalyzeOptions::with_tol(cli.tol).seeded(cli.seed);
    options.level = args.level;
    options
}

fn analyze_text(text: &str, doc: &MapDocument, options: &AnalyzeOptions) -> Result<Report, Failure> {
    let map = doc.to_map()?;
    let start = Instant::now();
    let dec = analyze(&map, options);
    let ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(Report::from_decomposition(&dec, text.as_bytes(), doc.name.clone(), ms))
}

fn cmd_analyze(cli: &Cli, args: &AnalyzeArgs, input: &Path) -> Result<u8, Failure> {
    let (text, doc) = parse_document(input)?;
    let report = analyze_text(&text, &doc, &analyze_options(cli, args))?;
    if let Some(out) = &cli.out {
        write(out, &report.to_json())?;
    }
    match cli.format {
        Format::Machine => println!("{}", report.to_json()),
        Format::Human => print!("{}", render::report(&report)),
    }
    Ok(report.verdict.exit_code() as u8)
}

/// A report with the verdict its document expects.
type Analyzed = (Report, Option<Verdict>);

/// Analyzes every `*.json` in `dir` in parallel. Exits 0 when each document
/// parses and matches its `expected_verdict` (if any), 1 on a mismatch, 64
/// if some document fails to parse.
fn cmd_batch(cli: &Cli, args: &AnalyzeArgs, dir: &Path) -> Result<u8, Failure> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| io_failure(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    if let Some(out) = &cli.out {
        std::fs::create_dir_all(out).map_err(|e| io_failure(out, e))?;
    }
    let options = analyze_options(cli, args);
    let results: Vec<(PathBuf, Result<Analyzed, Failure>)> = paths
        .into_par_iter()
        .map(|path| {
            let result = parse_document(&path)
                .and_then(|(text, doc)| Ok((analyze_text(&text, &doc, &options)?, doc.expected_verdict)));
            (path, result)
        })
        .collect();

    let mut code = 0u8;
    let mut machine = Vec::new();
    for (path, result) in &results {
        let name = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
        match result {
            Ok((report, expected)) => {
                let matched = expected.is_none_or(|e| e == report.verdict);
                if !matched {
                    code = code.max(1);
                }
                if let Some(out) = &cli.out {
                    let stem = path.file_stem().map_or_else(|| "report".into(), |s| s.to_string_lossy().into_owned());
                    write(&out.join(format!("{stem}.report.json")), &report.to_json())?;
                }
                match cli.format {
                    Format::Human => println!(
                        "{name}: {}{}",
                        report.verdict,
                        match expected {
                            Some(e) if *e != report.verdict => format!(" (expected {e})"),
                            _ => String::new(),
                        }
                    ),
                    Format::Machine => machine.push(report.clone()),
                }
            }
            Err(Failure(c, message)) => {
                code = code.max(*c);
                eprintln!("{name}: {message}");
            }
        }
    }
    if cli.format == Format::Machine {
        println!("{}", serde_json::to_string_pretty(&machine).expect("reports serialize"));
    }
    Ok(code)
}

fn cmd_holsztynski(cli: &Cli, input: &Path) -> Result<u8, Failure> {
    let (_, doc) = parse_document(input)?;
    let cm = doc.to_commutative()?;
    let cert = extract_certificate(&cm, cli.tol);
    let is_contractive = contractive(&cm, cli.tol);
    let verdict = isometry_verdict(&cm, cli.tol);
    let value = serde_json::json!({
        "k1": cm.k1(),
        "k2": cm.k2(),
        "contractive": is_contractive,
        "e": cert.e,
        "gamma": cert.gamma.iter().map(|g| [g.re, g.im]).collect::<Vec<_>>(),
        "phi": cert.phi,
        "surjective": cert.surjective,
        "uncovered": cert.uncovered,
        "isometry": verdict,
    });
    let json = serde_json::to_string_pretty(&value).expect("certificates serialize");
    if let Some(out) = &cli.out {
        write(out, &json)?;
    }
    match cli.format {
        Format::Machine => println!("{json}"),
        Format::Human => print!("{}", render::holsztynski(&cm, &cert, is_contractive, verdict)),
    }
    Ok(if verdict { 0 } else { 1 })
}

fn cmd_nicex(cli: &Cli, args: &NicexArgs) -> Result<u8, Failure> {
    let mode = match args.mode {
        ModeArg::Diagonal => Mode::Diagonal,
        ModeArg::Matrix => Mode::Matrix,
    };
    let config = match &args.eps {
        Some(eps) => NicexConfig { n: args.n, epsilons: eps.clone() },
        None => NicexConfig::harmonic(args.n, args.levels),
    };
    let maps = if args.control {
        nicex::control(args.n, mode)?
    } else {
        nicex::build(&config, mode)?
    };
    let bounds = nicex::lower_bound_check(&maps, args.samples, cli.seed, 1e-12);
    let commutant = nicex::commutant_check(&maps, cli.tol)?;
    let enumeration = match nicex::no_projection_check(&maps, cli.tol) {
        Ok(report) => Some(report),
        Err(Error::EnumerationRefused(why)) => {
            eprintln!("isolab: enumeration refused: {why}");
            None
        }
        Err(e) => return Err(e.into()),
    };
    let value = serde_json::json!({
        "control": args.control,
        "config": if args.control { serde_json::Value::Null } else { serde_json::to_value(&config).expect("config") },
        "mode": mode,
        "lower_bound": bounds,
        "commutant": commutant,
        "enumeration": enumeration.as_ref().map(|e| serde_json::json!({
            "masks_tried": e.masks_tried,
            "surviving": e.survivors.len(),
            "survivors": e.survivors,
            "only_zero_map": e.only_zero_map(),
        })),
    });
    let json = serde_json::to_string_pretty(&value).expect("reports serialize");
    if let Some(out) = &cli.out {
        write(out, &json)?;
    }
    match cli.format {
        Format::Machine => println!("{json}"),
        Format::Human => print!("{}", render::nicex(args.control, &bounds, &commutant, enumeration.as_ref())),
    }
    let Some(enumeration) = enumeration else {
        return Ok(EXIT_REFUSED);
    };
    let holds = args.control
        || (enumeration.only_zero_map()
            && commutant.diagonal
            && bounds.level_violations == 0
            && bounds.sup_violations == 0
            && bounds.contraction_violations == 0);
    Ok(if holds { 0 } else { 1 })
}

fn generate(kind: GenKind, spec: &GenSpec) -> Result<MapDocument, Failure> {
    let mut doc;
    match kind {
        GenKind::CompleteIsometry | GenKind::TripleMorphism => {
            let (map, truth) = if kind == GenKind::TripleMorphism {
                random_triple_morphism(spec)?
            } else {
                random_complete_isometry(spec)?
            };
            doc = MapDocument::from_map(&map);
            doc.ground_truth = Some(GroundTruthDoc::from(&truth));
            doc.expected_verdict = Some(Verdict::CompleteIsometry);
        }
        GenKind::Noncontraction => {
            let nc = random_noncontraction(spec.domain, spec.codomain, 0.25, spec.seed)?;
            doc = MapDocument::from_map(&nc.map);
            doc.expected_verdict = Some(Verdict::NotCompleteIsometry);
        }
        GenKind::Perturbed => {
            let (map, _) = random_complete_isometry(spec)?;
            doc = MapDocument::from_map(&perturb_random(&map, 0.1, spec.seed)?);
            doc.expected_verdict = Some(Verdict::NotCompleteIsometry);
        }
        GenKind::Corner => {
            doc = MapDocument::from_map(&corner_embedding(spec.domain, spec.codomain)?);
            doc.expected_verdict = Some(Verdict::CompleteIsometry);
        }
    }
    let tag = match kind {
        GenKind::CompleteIsometry => "ci",
        GenKind::TripleMorphism => "tm",
        GenKind::Noncontraction => "nc",
        GenKind::Perturbed => "pert",
        GenKind::Corner => "corner",
    };
    let (d, c) = (spec.domain, spec.codomain);
    doc.name = Some(format!("{tag}-{}x{}-{}x{}-k{}-seed{}", d.rows, d.cols, c.rows, c.cols, spec.multiplicity, spec.seed));
    Ok(doc)
}

fn cmd_gen(cli: &Cli, args: &GenArgs) -> Result<u8, Failure> {
    if let Some(count) = args.count {
        let dir = args.dir.as_ref().expect("clap enforces --dir");
        std::fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
        let mut rng = seeded_rng(cli.seed);
        for i in 0..count {
            let spec = random_spec(&mut rng, cli.seed.wrapping_add(i as u64));
            let doc = generate(args.kind, &spec)?;
            write(&dir.join(format!("{i:04}.json")), &doc.to_json())?;
        }
        return Ok(0);
    }
    let scale = match args.kind {
        GenKind::TripleMorphism => 0.0,
        _ => args.scale,
    };
    let spec = GenSpec {
        domain: args.domain,
        codomain: args.codomain,
        multiplicity: args.multiplicity,
        contraction_scale: scale,
        seed: cli.seed,
    };
    spec.validate()?;
    let json = generate(args.kind, &spec)?.to_json();
    match &cli.out {
        Some(out) => write(out, &json)?,
        None => println!("{json}"),
    }
    Ok(0)
}
