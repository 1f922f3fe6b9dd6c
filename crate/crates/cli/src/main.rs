use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use hybrid_mte::expcalc::{Limits, VarId};
use hybrid_mte::jointree::{build_join_tree, marginal_moments, normalize_marginal, propagate, Evidence, Marginal};
use hybrid_mte::model::{parse_model, validate_model, Network};
use hybrid_mte::Error;

const PIECES_ENV: &str = "HYBRID_MTE_MAX_PIECES";

#[derive(Parser)]
#[command(
    name = "hybrid-mte",
    version,
    about = "Exact inference in hybrid Bayesian networks with MTE densities"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a model file and list its problems.
    Validate { model: PathBuf },
    /// Posterior masses, moments and the evidence likelihood.
    Infer {
        model: PathBuf,
        /// Observation `Name=value`; repeatable.
        #[arg(long, short)]
        evidence: Vec<String>,
        /// Variable to report; repeatable. Defaults to all variables.
        #[arg(long, short)]
        target: Vec<String>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Write the normalized marginal of one variable as CSV.
    Plot {
        model: PathBuf,
        #[arg(long, short)]
        target: String,
        #[arg(long, short)]
        evidence: Vec<String>,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long, default_value_t = 400)]
        points: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

/// What goes to stderr and the exit status.
struct Failure {
    status: u8,
    kind: String,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            status: 1,
            kind: "usage".into(),
            message: message.into(),
        }
    }

    fn input(kind: &str, message: impl Into<String>) -> Self {
        Failure {
            status: 2,
            kind: kind.into(),
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            status: if e.is_input_error() { 2 } else { 3 },
            kind: e.code().into(),
            message: e.to_string(),
        }
    }
}

#[derive(Serialize)]
struct Report {
    evidence_likelihood: f64,
    targets: Vec<TargetReport>,
}

#[derive(Serialize)]
struct TargetReport {
    name: String,
    kind: &'static str,
    masses: Vec<MassEntry>,
    mean: f64,
    variance: f64,
    pieces: usize,
}

#[derive(Serialize)]
struct MassEntry {
    at: Location,
    p: f64,
}

#[derive(Serialize)]
#[serde(untagged)]
enum Location {
    State(String),
    Value(f64),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let first = e.to_string();
            let line = first
                .lines()
                .next()
                .unwrap_or("bad arguments")
                .trim_start_matches("error: ");
            eprintln!("error[usage]: {line}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error[{}]: {}", f.kind, f.message.replace('\n', " "));
            ExitCode::from(f.status)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    install_limits()?;
    match cli.command {
        Command::Validate { model } => {
            let net = load(&model)?;
            let diags = validate_model(&net);
            for d in &diags {
                println!("{d}");
            }
            if diags.is_empty() {
                println!("ok: {} variables", net.len());
                Ok(())
            } else {
                Err(Failure::input(
                    "validation",
                    format!("{} problem(s) in {}", diags.len(), model.display()),
                ))
            }
        }
        Command::Infer {
            model,
            evidence,
            target,
            format,
        } => {
            let net = load_valid(&model)?;
            let report = infer(&net, &evidence, &target)?;
            match format {
                Format::Json => {
                    let text = serde_json::to_string_pretty(&report).expect("report serializes");
                    println!("{text}");
                }
                Format::Text => print!("{}", render_text(&report)),
            }
            Ok(())
        }
        Command::Plot {
            model,
            target,
            evidence,
            out,
            points,
        } => {
            if points == 0 {
                return Err(Failure::usage("--points must be positive"));
            }
            let net = load_valid(&model)?;
            let v = net.id_of(&target)?;
            let (marginal, _) = posterior(&net, &evidence, &[v])?.remove(0);
            let csv = plot_csv(&net, &marginal, points)?;
            std::fs::write(&out, csv).map_err(|e| Failure::usage(format!("cannot write {}: {e}", out.display())))?;
            Ok(())
        }
    }
}

fn install_limits() -> Result<(), Failure> {
    let Ok(raw) = std::env::var(PIECES_ENV) else {
        return Ok(());
    };
    let max_pieces: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::usage(format!("{PIECES_ENV} must be a positive integer, got {raw:?}")))?;
    Limits {
        max_pieces,
        ..Limits::current()
    }
    .install();
    Ok(())
}

fn load(path: &Path) -> Result<Network, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::input("io", format!("cannot read {}: {e}", path.display())))?;
    Ok(parse_model(&text)?)
}

fn load_valid(path: &Path) -> Result<Network, Failure> {
    let net = load(path)?;
    if let Some(d) = validate_model(&net).first() {
        return Err(Failure::input("validation", d.to_string()));
    }
    Ok(net)
}

/// Normalized marginals of `targets` with the evidence likelihood of each.
fn posterior(net: &Network, evidence: &[String], targets: &[VarId]) -> Result<Vec<(Marginal, f64)>, Failure> {
    let ev = Evidence::parse(net, evidence)?;
    let tree = build_join_tree(net, None)?;
    let prop = propagate(net, &tree, &ev)?;
    let mut out = Vec::with_capacity(targets.len());
    for &v in targets {
        out.push(normalize_marginal(&prop.query_marginal(v)?)?);
    }
    Ok(out)
}

fn infer(net: &Network, evidence: &[String], names: &[String]) -> Result<Report, Failure> {
    let targets: Vec<VarId> = if names.is_empty() {
        net.ids().collect()
    } else {
        names.iter().map(|n| net.id_of(n)).collect::<Result<_, _>>()?
    };
    let results = posterior(net, evidence, &targets)?;
    let evidence_likelihood = results.first().map_or(1.0, |r| r.1);
    let targets = results
        .iter()
        .map(|(m, _)| target_report(net, m))
        .collect::<Result<_, _>>()?;
    Ok(Report {
        evidence_likelihood,
        targets,
    })
}

fn target_report(net: &Network, m: &Marginal) -> Result<TargetReport, Failure> {
    let v = m.var();
    let name = net.name(v).to_string();
    Ok(match m {
        Marginal::Discrete { probabilities, .. } => {
            let mean: f64 = probabilities.iter().enumerate().map(|(i, p)| i as f64 * p).sum();
            let second: f64 = probabilities.iter().enumerate().map(|(i, p)| (i * i) as f64 * p).sum();
            TargetReport {
                name,
                kind: "discrete",
                masses: net
                    .variable(v)
                    .states()
                    .iter()
                    .zip(probabilities)
                    .map(|(s, &p)| MassEntry {
                        at: Location::State(s.clone()),
                        p,
                    })
                    .collect(),
                mean,
                variance: (second - mean * mean).max(0.0),
                pieces: 0,
            }
        }
        Marginal::Continuous { masses, density, .. } => {
            let mo = marginal_moments(m)?;
            TargetReport {
                name,
                kind: "continuous",
                masses: masses
                    .iter()
                    .map(|&(x, p)| MassEntry {
                        at: Location::Value(x),
                        p,
                    })
                    .collect(),
                mean: mo.mean,
                variance: mo.variance,
                pieces: density.as_ref().map_or(0, |f| f.piece_count()),
            }
        }
    })
}

fn render_text(r: &Report) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "evidence_likelihood {:.10}", r.evidence_likelihood);
    for t in &r.targets {
        let _ = writeln!(s, "{} ({})", t.name, t.kind);
        for m in &t.masses {
            match &m.at {
                Location::State(label) => {
                    let _ = writeln!(s, "  P({}={label}) = {:.10}", t.name, m.p);
                }
                Location::Value(x) => {
                    let _ = writeln!(s, "  mass at {x} = {:.10}", m.p);
                }
            }
        }
        let _ = writeln!(s, "  density pieces {}", t.pieces);
        let _ = writeln!(s, "  mean {:.10}", t.mean);
        let _ = writeln!(s, "  variance {:.10}", t.variance);
    }
    s
}

/// `x,density` rows over the support of the density part, then the point
/// masses as an `x,mass` table.
fn plot_csv(net: &Network, m: &Marginal, points: usize) -> Result<String, Failure> {
    let mut s = String::from("x,density\n");
    match m {
        Marginal::Discrete { var, probabilities } => {
            s.push_str("\nx,mass\n");
            for (label, p) in net.variable(*var).states().iter().zip(probabilities) {
                let _ = writeln!(s, "{label},{p}");
            }
        }
        Marginal::Continuous { var, masses, density } => {
            if let Some(f) = density {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for p in f.pieces() {
                    if let Some((a, b)) = p.region.interval_of(*var) {
                        lo = lo.min(a);
                        hi = hi.max(b);
                    }
                }
                if !(lo.is_finite() && hi.is_finite()) {
                    return Err(Error::DivergentIntegral(*var).into());
                }
                for i in 0..points {
                    let x = if points == 1 {
                        0.5 * (lo + hi)
                    } else {
                        lo + (hi - lo) * i as f64 / (points - 1) as f64
                    };
                    let y = f.evaluate(&[(*var, x)])?;
                    let _ = writeln!(s, "{x},{y}");
                }
            }
            s.push_str("\nx,mass\n");
            for (x, p) in masses {
                let _ = writeln!(s, "{x},{p}");
            }
        }
    }
    Ok(s)
}
