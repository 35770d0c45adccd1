//! `ppas`: jumping loci, line incidences and singular divisors on a
//! principally polarized abelian surface, from the command line.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use ppas_core::jump::{self, Calibration, JumpOptions, Level};
use ppas_core::ledger::{self, IncidenceProfile};
use ppas_core::linsys::{Engine, SectionL2, TwistParam};
use ppas_core::schemes::ZeroScheme;
use ppas_core::surface::{SurfaceConfig, TorusPoint};
use ppas_core::Error;

#[derive(Parser, Debug)]
#[command(name = "ppas", version, about = "Jumping loci and theta incidences on a principally polarized abelian surface")]
struct Cli {
    /// Surface configuration (JSON); defaults apply when absent.
    #[arg(long, global = true, env = "PPAS_CONFIG")]
    config: Option<PathBuf>,
    /// Include wall-clock timings in the report.
    #[arg(long, global = true)]
    timings: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Discover,
    Confirm,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the default configuration.
    GenConfig {
        /// Target file, or `-` for stdout.
        path: PathBuf,
    },
    /// Jumping locus of a zero-dimensional scheme.
    Jump {
        #[arg(long)]
        scheme: PathBuf,
        #[arg(long = "i", default_value_t = 2, value_parser = clap::value_parser!(u8).range(1..=2))]
        level: u8,
        #[arg(long, value_enum, default_value_t = ModeArg::Discover)]
        mode: ModeArg,
        /// Dual points to confirm (JSON array of 4-vectors), for confirm mode.
        #[arg(long)]
        predictions: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Theta translates containing a scheme.
    Collinear {
        #[arg(long)]
        scheme: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sections of the twisted system vanishing on a scheme.
    H0 {
        #[arg(long)]
        scheme: PathBuf,
        /// Twist as `c1,c2,c3,c4` in lattice coordinates.
        #[arg(long, default_value = "0,0,0,0")]
        twist: String,
        #[arg(long = "i", default_value_t = 2, value_parser = clap::value_parser!(u8).range(1..=2))]
        level: u8,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Singular points of a member of the twisted system.
    Singular {
        /// Section file (coefficients and twist).
        #[arg(long, conflicts_with = "kummer", required_unless_present = "kummer")]
        section: Option<PathBuf>,
        /// Use the symmetric section vanishing on both translates by `x`.
        #[arg(long)]
        kummer: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classification tables, or the row of one incidence profile.
    Ledger {
        #[arg(long)]
        profile: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run verification suites.
    Verify {
        /// Suite name, or `all`.
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// CSV of log10 of the relative singular value over a 2D slice.
    Grid {
        #[arg(long)]
        scheme: PathBuf,
        /// Fixed coordinates, `c3=a,c4=b`.
        #[arg(long, default_value = "c3=0,c4=0")]
        slice: String,
        #[arg(long, default_value_t = 64)]
        res: usize,
        #[arg(long = "i", default_value_t = 2, value_parser = clap::value_parser!(u8).range(1..=2))]
        level: u8,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Failure classes with their exit codes.
enum Failure {
    Numerical(String, String),
    Input(String, String),
    Usage(String, String),
}

impl Failure {
    fn input(msg: impl Into<String>) -> Self {
        Failure::Input("InputError".into(), msg.into())
    }

    fn code(&self) -> u8 {
        match self {
            Failure::Numerical(..) => 1,
            Failure::Input(..) => 2,
            Failure::Usage(..) => 3,
        }
    }

    fn to_json(&self) -> Value {
        let (Failure::Numerical(k, m) | Failure::Input(k, m) | Failure::Usage(k, m)) = self;
        json!({ "error": k, "message": m, "exit_code": self.code() })
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let kind = format!("{e:?}").split(['(', ' ', '{']).next().unwrap_or("Error").to_string();
        let msg = e.to_string();
        match e {
            Error::UnknownSuite(_) => Failure::Usage(kind, msg),
            Error::RankAmbiguous { .. } | Error::NonConvergent(_) | Error::CalibrationInconsistent(_) | Error::BudgetExhausted(_) => {
                Failure::Numerical(kind, msg)
            }
            _ => Failure::Input(kind, msg),
        }
    }
}

type Outcome = Result<Value, Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    serde_json::from_str(&read(path)?).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn load_config(path: Option<&Path>) -> Result<SurfaceConfig, Failure> {
    match path {
        Some(p) => Ok(SurfaceConfig::from_json(&read(p)?)?),
        None => Ok(SurfaceConfig::default()),
    }
}

fn load_scheme(path: &Path) -> Result<ZeroScheme, Failure> {
    Ok(ZeroScheme::from_json(&read(path)?)?)
}

fn parse_point(s: &str) -> Result<TorusPoint, Failure> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| Failure::input(format!("point `{s}`: {e}")))?;
    let c: [f64; 4] = v.try_into().map_err(|_| Failure::input(format!("point `{s}` needs four coordinates")))?;
    Ok(TorusPoint::from_coords(c))
}

fn parse_slice(s: &str) -> Result<(f64, f64), Failure> {
    let mut c3 = None;
    let mut c4 = None;
    for part in s.split(',') {
        let (k, v) = part.split_once('=').ok_or_else(|| Failure::input(format!("slice entry `{part}` is not key=value")))?;
        let v: f64 = v.trim().parse().map_err(|e| Failure::input(format!("slice value `{v}`: {e}")))?;
        match k.trim() {
            "c3" => c3 = Some(v),
            "c4" => c4 = Some(v),
            other => return Err(Failure::input(format!("slice key `{other}` must be c3 or c4"))),
        }
    }
    match (c3, c4) {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => Err(Failure::input("slice needs both c3 and c4")),
    }
}

/// Rounds every float to 15 significant digits so reports are stable.
fn round_floats(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap();
            let r: f64 = format!("{x:.14e}").parse().unwrap_or(x);
            json!(r)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round_floats).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_floats(v))).collect()),
        other => other,
    }
}

fn to_value<T: Serialize>(t: &T) -> Value {
    serde_json::to_value(t).expect("report values serialize")
}

fn write_out(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) if p != Path::new("-") => fs::write(p, text).map_err(|e| Failure::input(format!("{}: {e}", p.display()))),
        _ => {
            // a closed pipe downstream is not our failure
            let mut out = std::io::stdout().lock();
            match writeln!(out, "{text}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Failure::input(format!("stdout: {e}"))),
                _ => Ok(()),
            }
        }
    }
}

struct Report {
    command: &'static str,
    cfg: SurfaceConfig,
    inputs: Value,
    started: Instant,
    timings: Vec<(String, f64)>,
}

impl Report {
    fn new(command: &'static str, cfg: &SurfaceConfig, inputs: Value) -> Self {
        Report { command, cfg: cfg.clone(), inputs, started: Instant::now(), timings: vec![] }
    }

    fn lap(&mut self, what: &str, t: Instant) {
        self.timings.push((what.to_string(), t.elapsed().as_secs_f64()));
    }

    fn finish(self, outputs: Value, passed: bool, with_timings: bool) -> Value {
        let mut v = json!({
            "command": self.command,
            "config": to_value(&self.cfg),
            "inputs": self.inputs,
            "outputs": outputs,
            "summary": { "passed": passed },
        });
        if with_timings {
            let mut t = serde_json::Map::new();
            for (k, s) in self.timings {
                t.insert(k, json!(s));
            }
            t.insert("total".into(), json!(self.started.elapsed().as_secs_f64()));
            v["timings"] = Value::Object(t);
        }
        round_floats(v)
    }
}

fn calibrated(engine: &Engine, report: &mut Report) -> Result<Calibration, Failure> {
    let t = Instant::now();
    let cal = jump::calibrate_with(engine)?;
    report.lap("calibration", t);
    Ok(cal)
}

fn run(cli: Cli) -> Outcome {
    let timings = cli.timings;
    let cfg_path = cli.config.as_deref();
    match cli.command {
        Command::GenConfig { path } => {
            let text = SurfaceConfig::default().to_json();
            write_out(Some(&path), &text)?;
            Ok(Value::Null)
        }
        Command::Jump { scheme, level, mode, predictions, out } => {
            let cfg = load_config(cfg_path)?;
            let x = load_scheme(&scheme)?;
            let mut report = Report::new("jump", &cfg, json!({ "scheme": to_value(&x), "i": level, "mode": format!("{mode:?}").to_lowercase() }));
            let opts = match mode {
                ModeArg::Discover => JumpOptions::default(),
                ModeArg::Confirm => {
                    let path = predictions.ok_or_else(|| Failure::Usage("UsageError".into(), "confirm mode needs --predictions".into()))?;
                    let pts: Vec<TorusPoint> = parse_json(&path)?;
                    JumpOptions::confirm(pts)
                }
            };
            let engine = Engine::new(&cfg)?;
            let cal = calibrated(&engine, &mut report)?;
            let t = Instant::now();
            let locus = jump::jump_locus_with(&engine, &x, Level::from_index(level)?, &cal, &opts)?;
            report.lap("locus", t);
            let v = report.finish(json!({ "calibration": to_value(&cal), "locus": to_value(&locus) }), true, timings);
            write_out(out.as_deref(), &serde_json::to_string_pretty(&v).unwrap())?;
            Ok(v)
        }
        Command::Collinear { scheme, out } => {
            let cfg = load_config(cfg_path)?;
            let x = load_scheme(&scheme)?;
            let mut report = Report::new("collinear", &cfg, json!({ "scheme": to_value(&x) }));
            let engine = Engine::new(&cfg)?;
            let t = Instant::now();
            let lines = engine.lines_through(&x)?;
            report.lap("lines", t);
            let rows: Vec<Value> = lines.iter().map(|(u, m)| json!({ "u": to_value(u), "multiplicity": m })).collect();
            let v = report.finish(json!({ "lines": rows }), true, timings);
            write_out(out.as_deref(), &serde_json::to_string_pretty(&v).unwrap())?;
            Ok(v)
        }
        Command::H0 { scheme, twist, level, out } => {
            let cfg = load_config(cfg_path)?;
            let x = load_scheme(&scheme)?;
            let c = parse_point(&twist)?;
            let report = Report::new("h0", &cfg, json!({ "scheme": to_value(&x), "twist": to_value(&c), "i": level }));
            let engine = Engine::new(&cfg)?;
            let h0 = match Level::from_index(level)? {
                Level::One => engine.h0_l1(&x, &c)?,
                Level::Two => engine.h0(&x, &TwistParam::new(c))?,
            };
            let v = report.finish(json!({ "h0": h0 }), true, timings);
            write_out(out.as_deref(), &serde_json::to_string_pretty(&v).unwrap())?;
            Ok(v)
        }
        Command::Singular { section, kummer, out } => {
            let cfg = load_config(cfg_path)?;
            let engine = Engine::new(&cfg)?;
            let s: SectionL2 = match (section, kummer) {
                (Some(p), _) => {
                    let raw: SectionL2 = parse_json(&p)?;
                    SectionL2::new(raw.lambda, raw.twist)?
                }
                (None, Some(x)) => engine.kummer_section(&parse_point(&x)?),
                (None, None) => unreachable!("clap requires one of them"),
            };
            let mut report = Report::new("singular", &cfg, json!({ "section": to_value(&s) }));
            let t = Instant::now();
            let sing = engine.singular_points(&s)?;
            report.lap("singular", t);
            let v = report.finish(json!({ "singular_points": to_value(&sing) }), true, timings);
            write_out(out.as_deref(), &serde_json::to_string_pretty(&v).unwrap())?;
            Ok(v)
        }
        Command::Ledger { profile, out } => {
            let cfg = load_config(cfg_path)?;
            let (inputs, outputs, passed) = match profile {
                Some(p) => {
                    let prof: IncidenceProfile = parse_json(&p)?;
                    let row = ledger::classify(&prof)?;
                    let ok = ledger::balance_check(&row, row.n, row.i);
                    (json!({ "profile": to_value(&prof) }), json!({ "row": to_value(&row), "balanced": ok }), ok)
                }
                None => {
                    let rows = ledger::appendix_rows();
                    let ok = rows.iter().all(|r| ledger::balance_check(r, r.n, r.i));
                    (Value::Null, json!({ "rows": to_value(&rows), "balanced": ok }), ok)
                }
            };
            let v = Report::new("ledger", &cfg, inputs).finish(outputs, passed, timings);
            write_out(out.as_deref(), &serde_json::to_string_pretty(&v).unwrap())?;
            Ok(v)
        }
        Command::Verify { suite, trials, out } => {
            let cfg = load_config(cfg_path)?;
            let names: Vec<String> = if suite == "all" {
                jump::suite_names().into_iter().map(String::from).collect()
            } else {
                jump::default_trials(&suite)?;
                vec![suite.clone()]
            };
            let mut report = Report::new("verify", &cfg, json!({ "suite": suite, "trials": trials }));
            let engine = Engine::new(&cfg)?;
            let cal = calibrated(&engine, &mut report)?;
            let mut results = Vec::new();
            for name in &names {
                let t = Instant::now();
                results.push(jump::verify_suite_with(&engine, name, &cal, trials)?);
                report.lap(name, t);
            }
            let passed = results.iter().all(|r| r.passed());
            let v = report.finish(json!({ "calibration": to_value(&cal), "suites": to_value(&results) }), passed, timings);
            write_out(out.as_deref(), &serde_json::to_string_pretty(&v).unwrap())?;
            if passed {
                Ok(v)
            } else {
                let failed: Vec<&str> = results.iter().filter(|r| !r.passed()).map(|r| r.suite.as_str()).collect();
                Err(Failure::Numerical("SuiteFailed".into(), format!("failing suites: {}", failed.join(", "))))
            }
        }
        Command::Grid { scheme, slice, res, level, out } => {
            let cfg = load_config(cfg_path)?;
            let x = load_scheme(&scheme)?;
            let (c3, c4) = parse_slice(&slice)?;
            let engine = Engine::new(&cfg)?;
            let mut report = Report::new("grid", &cfg, Value::Null);
            let cal = calibrated(&engine, &mut report)?;
            let rows = jump::grid_slice(&engine, &x, Level::from_index(level)?, &cal, c3, c4, res)?;
            let mut csv = String::from("c1,c2,log10_smin\n");
            for r in rows {
                csv.push_str(&format!("{:.15e},{:.15e},{:.15e}\n", r[0], r[1], r[2]));
            }
            write_out(out.as_deref(), csv.trim_end())?;
            Ok(Value::Null)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 3,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(_) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.to_json());
            ExitCode::from(f.code())
        }
    }
}
