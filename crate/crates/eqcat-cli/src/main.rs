//! `eqcat`: build structures, trace characters, run isomorphism engines and
//! verify maps.  Every command is deterministic and writes JSON.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 audit
//! violation, 4 verification counterexample.

use clap::{Args, Parser, Subcommand, ValueEnum};
use eqcat::analysis::{character_trace, extract_s, extract_s1, s1_range_member};
use eqcat::builders::{opponent_family, s_from_ce_subset, BoundedCharSpec, SFunctionSpec, SKind, SetSpec};
use eqcat::config::BuilderConfig;
use eqcat::iso::{iso_computable, iso_delta2, iso_delta3, verify_partial_iso, CategoricityCertificate, FinSideInfo, IsoApprox, IsoBudget};
use eqcat::manifest::{load_structure, manifest_path, run_build, to_json_text, RunManifest};
use eqcat::{Element, Error, Predicate, Size};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "eqcat", version, about = "Computable equivalence structures, stage by stage")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Global {
    /// Stage budget for engines and analyses.
    #[arg(long, global = true, default_value_t = 1000)]
    budget: u64,
    /// Directory for artifacts; reports are also written here when given.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build a structure and write snapshots, event log and manifest.
    Build(BuildArgs),
    /// Character approximations of a built structure at the given stages.
    Character {
        #[arg(long)]
        structure: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        stages: Vec<u64>,
    },
    /// Run an isomorphism engine between two built structures.
    Iso(IsoArgs),
    /// Check a partial map between two built structures up to a frontier.
    Verify {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// An iso report, a list of `[a, b]` pairs, or an object `{"a": b}`.
        #[arg(long)]
        map: PathBuf,
        #[arg(long, default_value_t = 100)]
        frontier: Element,
    },
    /// Run the diagonalization and print its requirement log.
    Diag {
        /// A `diag` builder config; defaults to the stock construction.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Extract an s- or s₁-function from a built structure.
    Extract {
        #[arg(long)]
        structure: PathBuf,
        #[arg(long, value_enum)]
        mode: ExtractMode,
        /// Elements whose classes are dropped (mode s).
        #[arg(long, value_delimiter = ',')]
        excise: Vec<Element>,
        /// JSON set spec for the c.e. subset (mode ce).
        #[arg(long)]
        set: Option<PathBuf>,
    },
    /// Decide m ∈ range of the s₁-function limits, to the budget.
    Range {
        #[command(flatten)]
        f: FuncArgs,
        #[arg(long)]
        m: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ExtractMode {
    S,
    S1,
    Ce,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Identity,
    Periodic,
    Sigma2Inf,
    Bounded,
    FromS,
    FromS1,
    TestClass,
}

#[derive(Args)]
struct FuncArgs {
    /// s-function term over i, s.
    #[arg(long)]
    f: Option<String>,
    /// s-function as a JSON spec.
    #[arg(long, conflicts_with = "f")]
    f_file: Option<PathBuf>,
}

impl FuncArgs {
    fn get(&self, kind: SKind) -> Result<SFunctionSpec, Error> {
        match (&self.f, &self.f_file) {
            (Some(src), _) => SFunctionSpec::dsl(src, kind),
            (None, Some(p)) => read_json(p),
            (None, None) => Err(Error::InvalidSpec("an s-function is required (--f or --f-file)".into())),
        }
    }
}

#[derive(Args)]
struct BuildArgs {
    /// Full builder config as JSON.
    #[arg(long, conflicts_with = "kind")]
    config: Option<PathBuf>,
    /// Replay a previous run's manifest (config and stages).
    #[arg(long, conflicts_with_all = ["kind", "config"])]
    manifest: Option<PathBuf>,
    #[arg(long, value_enum)]
    kind: Option<Kind>,
    #[arg(long, value_delimiter = ',')]
    stages: Vec<u64>,
    /// Predicate source: R over k, n, w, z, or T over t for test-class.
    #[arg(long)]
    pred: Option<String>,
    #[arg(long, conflicts_with = "pred")]
    pred_file: Option<PathBuf>,
    #[command(flatten)]
    f: FuncArgs,
    /// Class sizes of a periodic structure.
    #[arg(long, value_delimiter = ',')]
    pattern: Vec<u64>,
    /// Sizes repeated infinitely often (bounded).
    #[arg(long, value_delimiter = ',')]
    repeat: Vec<u64>,
    /// `size:count` pairs (bounded).
    #[arg(long, value_delimiter = ',')]
    fixed: Vec<String>,
    /// Number of infinite classes, or `omega`.
    #[arg(long)]
    infinite: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Level {
    Computable,
    Delta2,
    Delta3,
}

#[derive(Args)]
struct IsoArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long, value_enum)]
    level: Level,
    #[arg(long, default_value_t = 100)]
    frontier: Element,
    #[arg(long)]
    cert_a: Option<PathBuf>,
    #[arg(long)]
    cert_b: Option<PathBuf>,
    /// Finite class sizes are at most this (delta2).
    #[arg(long)]
    bound: Option<u64>,
    /// `program`, or a JSON Fin spec file, for A (delta2).
    #[arg(long)]
    fin_a: Option<String>,
    #[arg(long)]
    fin_b: Option<String>,
}

enum Failure {
    Lib(Error),
    Counterexample(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn read_json<T: serde::de::DeserializeOwned>(p: &Path) -> Result<T, Error> {
    let text = fs::read_to_string(p).map_err(|e| Error::InvalidSpec(format!("{}: {e}", p.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::InvalidSpec(format!("{}: {e}", p.display())))
}

fn parse_size(s: &str) -> Result<Size, Error> {
    s.parse()
}

fn predicate(args: &BuildArgs, vars: &[&str]) -> Result<Predicate, Error> {
    let src = match (&args.pred, &args.pred_file) {
        (Some(s), _) => s.clone(),
        (None, Some(p)) => fs::read_to_string(p).map_err(|e| Error::InvalidSpec(format!("{}: {e}", p.display())))?,
        (None, None) => return Err(Error::InvalidSpec("a predicate is required (--pred or --pred-file)".into())),
    };
    Predicate::dsl(src.trim(), vars)
}

const R4: [&str; 4] = ["k", "n", "w", "z"];

fn build_config(args: &BuildArgs) -> Result<BuilderConfig, Error> {
    if let Some(p) = &args.config {
        return read_json(p);
    }
    let kind = args.kind.ok_or_else(|| Error::InvalidSpec("either --config or --kind is required".into()))?;
    let infinite = || -> Result<Size, Error> {
        args.infinite
            .as_deref()
            .map(parse_size)
            .unwrap_or_else(|| Err(Error::InvalidSpec("--infinite is required".into())))
    };
    Ok(match kind {
        Kind::Identity => BuilderConfig::Identity,
        Kind::Periodic => BuilderConfig::Periodic { pattern: args.pattern.clone() },
        Kind::Sigma2Inf => BuilderConfig::Sigma2Inf { r: predicate(args, &R4)? },
        Kind::Bounded => {
            let fixed_sizes = args
                .fixed
                .iter()
                .map(|p| {
                    let bad = || Error::InvalidSpec(format!("--fixed expects size:count, got `{p}`"));
                    let (k, n) = p.split_once(':').ok_or_else(bad)?;
                    Ok((k.trim().parse().map_err(|_| bad())?, n.trim().parse().map_err(|_| bad())?))
                })
                .collect::<Result<Vec<_>, Error>>()?;
            BuilderConfig::Bounded(BoundedCharSpec { repeat_sizes: args.repeat.clone(), fixed_sizes, r: infinite()? })
        }
        Kind::FromS => BuilderConfig::FromS { f: args.f.get(SKind::S)?, r: infinite()? },
        Kind::FromS1 => BuilderConfig::FromS1 { f: args.f.get(SKind::S1)?, r: predicate(args, &R4)? },
        Kind::TestClass => BuilderConfig::TestClass { g: args.f.get(SKind::S)?, t: predicate(args, &["t"])? },
    })
}

fn fin_info(spec: &str) -> Result<FinSideInfo, Error> {
    if spec == "program" {
        Ok(FinSideInfo::Program)
    } else {
        read_json(Path::new(spec))
    }
}

/// Map file: an iso report, `[[a, b], ...]`, or `{"a": b, ...}`.
fn read_map(p: &Path) -> Result<BTreeMap<Element, Element>, Error> {
    let v: serde_json::Value = read_json(p)?;
    if let Ok(r) = serde_json::from_value::<IsoApprox>(v.clone()) {
        return Ok(r.final_map());
    }
    if let Ok(pairs) = serde_json::from_value::<Vec<(Element, Element)>>(v.clone()) {
        return Ok(pairs.into_iter().collect());
    }
    if let Ok(obj) = serde_json::from_value::<BTreeMap<String, Element>>(v) {
        return obj
            .into_iter()
            .map(|(k, y)| {
                k.parse::<Element>()
                    .map(|x| (x, y))
                    .map_err(|_| Error::InvalidSpec(format!("map key `{k}` is not an element")))
            })
            .collect();
    }
    Err(Error::InvalidSpec(format!("{}: not a map file", p.display())))
}

fn emit<T: Serialize>(g: &Global, name: &str, v: &T) -> Result<(), Error> {
    let Format::Json = g.format;
    let text = to_json_text(v)?;
    if let Some(dir) = &g.out_dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(format!("{name}.json")), &text)?;
    }
    print!("{text}");
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let g = &cli.global;
    match cli.cmd {
        Cmd::Build(args) => {
            let (config, stages) = match &args.manifest {
                Some(p) => {
                    let m = RunManifest::load(&manifest_path(p))?;
                    let stages = if args.stages.is_empty() { m.stages } else { args.stages.clone() };
                    (m.config, stages)
                }
                None => (build_config(&args)?, args.stages.clone()),
            };
            let dir = g.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
            let m = run_build(&config, &stages, &dir)?;
            print!("{}", to_json_text(&m)?);
        }
        Cmd::Character { structure, mut stages } => {
            stages.sort_unstable();
            stages.dedup();
            let (_, mut st) = load_structure(&structure)?;
            emit(g, "character", &character_trace(&mut st, &stages)?)?;
        }
        Cmd::Iso(args) => {
            let (_, mut a) = load_structure(&args.a)?;
            let (_, mut b) = load_structure(&args.b)?;
            let budget = IsoBudget::new(g.budget, args.frontier);
            let report = match args.level {
                Level::Computable => {
                    let (Some(ca), Some(cb)) = (&args.cert_a, &args.cert_b) else {
                        return Err(Error::InvalidSpec("--level computable needs --cert-a and --cert-b".into()).into());
                    };
                    let ca: CategoricityCertificate = read_json(ca)?;
                    let cb: CategoricityCertificate = read_json(cb)?;
                    iso_computable(&mut a, &mut b, &ca, &cb, budget)?
                }
                Level::Delta2 => {
                    let fin = match (&args.fin_a, &args.fin_b) {
                        (Some(fa), Some(fb)) => Some((fin_info(fa)?, fin_info(fb)?)),
                        (None, None) => None,
                        _ => return Err(Error::InvalidSpec("--fin-a and --fin-b go together".into()).into()),
                    };
                    iso_delta2(&mut a, &mut b, args.bound, fin, budget)?
                }
                Level::Delta3 => iso_delta3(&mut a, &mut b, budget)?,
            };
            emit(g, "iso", &report)?;
        }
        Cmd::Verify { a, b, map, frontier } => {
            let (ma, mut sa) = load_structure(&a)?;
            let (mb, mut sb) = load_structure(&b)?;
            let h = read_map(&map)?;
            sa.advance_to(ma.last_stage().max(g.budget))?;
            sb.advance_to(mb.last_stage().max(g.budget))?;
            let v = verify_partial_iso(&mut sa, &mut sb, &h, frontier)?;
            emit(g, "verify", &v)?;
            if let Some(cx) = &v.counterexample {
                return Err(Failure::Counterexample(serde_json::to_string(cx).map_err(Error::from)?));
            }
        }
        Cmd::Diag { config } => {
            let config = match config {
                Some(p) => read_json(p.as_path())?,
                None => BuilderConfig::Diag {
                    f: SFunctionSpec::dsl("2 * i + 1", SKind::S1)?,
                    r: Predicate::dsl("w == 0 and n == 1", &R4)?,
                    opponents: opponent_family(),
                    side: Default::default(),
                },
            };
            let BuilderConfig::Diag { f, r, opponents, .. } = config else {
                return Err(Error::InvalidSpec("diag needs a config of kind `diag`".into()).into());
            };
            let mut pair = eqcat::builders::build_diag_pair(f, r, &opponents)?;
            emit(g, "diag", &pair.requirement_log(g.budget)?)?;
        }
        Cmd::Extract { structure, mode, excise, set } => {
            let (_, mut st) = load_structure(&structure)?;
            match mode {
                ExtractMode::S => emit(g, "extract", &extract_s(&mut st, g.budget, &excise)?)?,
                ExtractMode::S1 => emit(g, "extract", &extract_s1(&mut st, g.budget)?)?,
                ExtractMode::Ce => {
                    let set: SetSpec = match set {
                        Some(p) => read_json(&p)?,
                        None => return Err(Error::InvalidSpec("--mode ce needs --set".into()).into()),
                    };
                    emit(g, "extract", &s_from_ce_subset(&mut st, &set, g.budget)?)?
                }
            }
        }
        Cmd::Range { f, m } => {
            let f = f.get(SKind::S1)?;
            emit(g, "range", &s1_range_member(&f, m, g.budget))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Counterexample(w)) => {
            eprintln!("eqcat: counterexample: {w}");
            ExitCode::from(4)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("eqcat: {e}");
            ExitCode::from(if e.is_audit() { 3 } else { 2 })
        }
    }
}
