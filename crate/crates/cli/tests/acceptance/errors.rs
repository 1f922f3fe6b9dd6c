use std::io::Write;
use std::process::Command;

use hybrid_mte::expcalc::{ExpPolyTerm, LinExpr, Piece, PiecewiseFn, Region, VarId};
use hybrid_mte::jointree::{build_join_tree, normalize_marginal, propagate, Evidence};
use hybrid_mte::model::{parse_model, standard_normal_mte};
use hybrid_mte::potential::{marg_density_det, marginalize, Entry, Equation, Factor, MixedPotential};
use hybrid_mte::Error;

use super::support::{det, ensure, eq, MIXED_X};
use super::Outcome;

const Z1: VarId = VarId(0);
const Z2: VarId = VarId(1);
const Z3: VarId = VarId(2);

pub fn criterion() -> Outcome {
    unsupported()?;
    non_invertible()?;
    inconsistent()?;
    let cli = exit_codes()?;
    Ok(format!(
        "UnsupportedElimination, NonInvertibleEquation, InconsistentEvidence raised; CLI {cli}"
    ))
}

fn unsupported() -> Result<(), String> {
    let f = |c: f64| Factor::deterministic(det(&[(1.0, eq(&[(Z1, 1.0), (Z2, c)], 0.0))]));
    let p = MixedPotential::new(
        vec![],
        vec![Z1, Z2],
        vec![Entry::new(vec![], vec![f(1.0), f(2.0), f(3.0)])],
    )
    .unwrap();
    let got = marginalize(&p, Z1);
    ensure(matches!(got, Err(Error::UnsupportedElimination { .. })), || {
        format!("three equations: {got:?}")
    })?;

    let square = PiecewiseFn::new(
        [Z1, Z2],
        vec![Piece::new(
            Region::cube(&[(Z1, 0.0, 1.0), (Z2, 0.0, 1.0)]),
            vec![ExpPolyTerm::constant(1.0)],
        )],
    )
    .unwrap();
    let q = MixedPotential::new(
        vec![],
        vec![Z1, Z2],
        vec![Entry::new(vec![], vec![f(1.0), f(2.0), Factor::density(square)])],
    )
    .unwrap();
    let got = marginalize(&q, Z1);
    ensure(matches!(got, Err(Error::UnsupportedElimination { .. })), || {
        format!("two equations and a density: {got:?}")
    })
}

fn non_invertible() -> Result<(), String> {
    let phi = standard_normal_mte(Z1);
    let without = det(&[(1.0, eq(&[(Z2, 1.0), (Z3, -2.0)], 0.0))]);
    let got = marg_density_det(&phi.extend_vars(&[Z2]).unwrap(), &without, Z1);
    ensure(matches!(got, Err(Error::NonInvertibleEquation(_))), || {
        format!("zero coefficient: {got:?}")
    })?;
    let e = Equation::new(LinExpr::new([(Z2, 1.0)], 1.0), None).unwrap();
    let got = e.solve_for(Z1);
    ensure(matches!(got, Err(Error::NonInvertibleEquation(_))), || {
        format!("solve_for: {got:?}")
    })
}

fn inconsistent() -> Result<(), String> {
    let net = parse_model(MIXED_X).unwrap();
    let tree = build_join_tree(&net, None).unwrap();
    let ev = Evidence::parse(&net, &["Y=1", "X=2"]).unwrap();
    let got = propagate(&net, &tree, &ev).and_then(|p| normalize_marginal(&p.query_marginal(net.id_of("Z").unwrap())?));
    ensure(matches!(got, Err(Error::InconsistentEvidence)), || {
        format!("Y=1, X=2: {got:?}")
    })?;

    let fig = parse_model(super::support::FIGURE3).unwrap();
    let tree = build_join_tree(&fig, None).unwrap();
    let ev = Evidence::parse(&fig, &["X2=40"]).unwrap();
    let got =
        propagate(&fig, &tree, &ev).and_then(|p| normalize_marginal(&p.query_marginal(fig.id_of("Z1").unwrap())?));
    ensure(matches!(got, Err(Error::InconsistentEvidence)), || {
        format!("X2=40: {got:?}")
    })
}

const TWO_POINTS: &str = r#"{
  "variables": [
    { "name": "Z1", "kind": "continuous" },
    { "name": "X1", "kind": "deterministic", "parents": ["Z1"] },
    { "name": "X2", "kind": "deterministic", "parents": ["Z1"] }
  ],
  "cpds": [
    { "var": "Z1", "density": { "template": "normal_mte", "mean": 0, "variance": 1 } },
    { "var": "X1", "equations": "X1 = Z1" },
    { "var": "X2", "equations": "X2 = 2*Z1" }
  ]
}"#;

const BAD_TABLE: &str = r#"{
  "variables": [{ "name": "Y", "kind": "discrete", "states": ["a", "b"] }],
  "cpds": [{ "var": "Y", "table": [0.5, 0.6] }]
}"#;

/// Runs the binary; returns the exit code and the stderr line.
fn run(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_hybrid-mte"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stderr).trim().to_string(),
    )
}

fn exit_codes() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let write = |name: &str, text: &str| {
        let path = dir.path().join(name);
        std::fs::File::create(&path)
            .and_then(|mut f| f.write_all(text.as_bytes()))
            .unwrap();
        path.to_string_lossy().into_owned()
    };
    let fig = write("figure3.json", super::support::FIGURE3);
    let mixed = write("mixed.json", MIXED_X);
    let broken = write("broken.json", "{ \"variables\": [");
    let bad_table = write("bad_table.json", BAD_TABLE);
    let two_points = write("two_points.json", TWO_POINTS);
    let cases: [(&str, Vec<&str>, i32, &str); 8] = [
        ("clean model", vec!["validate", &fig], 0, ""),
        ("unknown flag", vec!["infer", &fig, "--bogus"], 1, "usage"),
        ("missing subcommand", vec![], 1, "usage"),
        ("malformed file", vec!["infer", &broken], 2, "parse"),
        ("invalid table", vec!["validate", &bad_table], 2, "validation"),
        (
            "unknown evidence variable",
            vec!["infer", &fig, "--evidence", "Q=1"],
            2,
            "unknown-variable",
        ),
        (
            "contradictory evidence",
            vec!["infer", &mixed, "-e", "Y=1", "-e", "X=2"],
            3,
            "inconsistent-evidence",
        ),
        (
            "two point constraints",
            vec!["infer", &two_points, "-e", "X1=1", "-e", "X2=2"],
            3,
            "unsupported-elimination",
        ),
    ];
    for (what, args, code, kind) in &cases {
        let (got, stderr) = run(args);
        ensure(got == *code, || {
            format!("{what}: exit {got}, expected {code} ({stderr})")
        })?;
        if *code != 0 {
            ensure(stderr.lines().count() == 1, || {
                format!("{what}: stderr is not one line: {stderr:?}")
            })?;
            ensure(stderr.starts_with(&format!("error[{kind}]")), || {
                format!("{what}: {stderr}")
            })?;
        }
    }
    Ok(format!("exit codes 0/1/2/3 across {} invocations", cases.len()))
}
