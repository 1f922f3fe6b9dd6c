use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use hybrid_mte::expcalc::{
    definite_integral, eliminate_integrate, multiply, substitute_linear, Constraint, ExpPolyTerm, LinExpr, Piece,
    PiecewiseFn, Region, VarId, ZERO_EPS,
};
use hybrid_mte::jointree::{
    build_join_tree, global_marginal, marginal_moments, normalize_marginal, propagate, Evidence, Marginal,
};
use hybrid_mte::model::{parse_model, Network};
use hybrid_mte::oracle::forward_sample;
use hybrid_mte::potential::{
    combine, marg_density_det, marginalize, restrict, DeterministicPotential, Equation, Factor, MixedPotential,
    Observation, WeightedEquation,
};
use hybrid_mte::Error;

use super::support::{close, ensure};
use super::Outcome;

const CASES: usize = 1000;
const NETWORKS: usize = 25;
/// Networks whose join tree would eliminate through two equations and a
/// density are rejected by local propagation; give up after this many.
const MAX_SKIPPED: usize = 100;
const TOL: f64 = 1e-9;
/// Open borders exclude a band of width `ZERO_EPS`.
const INSET: f64 = 4.0 * ZERO_EPS;

const Z1: VarId = VarId(0);
const Z2: VarId = VarId(1);
const Z3: VarId = VarId(2);
const X: VarId = VarId(3);

type Suite = fn(&mut ChaCha8Rng) -> Result<(), String>;

pub fn criterion() -> Outcome {
    let suites: [(&str, Suite); 6] = [
        ("multiplication", multiplication),
        ("substitution", substitution),
        ("integration vs quadrature", integration),
        ("Fubini", fubini),
        ("Jacobian mass", jacobian),
        ("restrict/marginalize", commutation),
    ];
    let mut notes = Vec::new();
    let mut failures = Vec::new();
    for (seed, (name, case)) in suites.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed as u64);
        let mut failed = 0;
        for i in 0..CASES {
            if let Err(e) = case(&mut rng) {
                if failed == 0 {
                    failures.push(format!("{name} case {i}: {e}"));
                }
                failed += 1;
            }
        }
        notes.push(format!("{name} {}/{CASES}", CASES - failed));
        if failed > 0 {
            failures.push(format!("{name}: {failed} of {CASES} failed"));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1000 + suites.len() as u64);
    let (mut compared, mut skipped, mut failed) = (0, 0, 0);
    while compared < NETWORKS && skipped < MAX_SKIPPED {
        match global_vs_local(&mut rng) {
            Ok(true) => compared += 1,
            Ok(false) => skipped += 1,
            Err(e) => {
                if failed == 0 {
                    failures.push(format!("global vs local network {}: {e}", compared + 1));
                }
                compared += 1;
                failed += 1;
            }
        }
    }
    notes.push(format!(
        "global vs local {}/{compared} ({skipped} networks skipped: local elimination unsupported)",
        compared - failed
    ));
    if compared < NETWORKS {
        failures.push(format!("only {compared} comparable networks"));
    } else if failed > 0 {
        failures.push(format!("global vs local: {failed} of {compared} failed"));
    }
    if failures.is_empty() {
        Ok(notes.join(", "))
    } else {
        Err(format!("{}; {}", notes.join(", "), failures.join("; ")))
    }
}

/// A random term in `vars`: coefficient, small powers and exponential rates.
fn term(rng: &mut ChaCha8Rng, vars: &[VarId], positive: bool) -> ExpPolyTerm {
    let coeff = if positive {
        rng.gen_range(0.1..2.0)
    } else {
        rng.gen_range(-2.0..2.0)
    };
    let powers: Vec<(VarId, u32)> = vars
        .iter()
        .filter_map(|&v| {
            let k = if positive { 0 } else { rng.gen_range(0..3) };
            (k > 0).then_some((v, k))
        })
        .collect();
    let rates = LinExpr::new(
        vars.iter().map(|&v| {
            (
                v,
                if rng.gen_bool(0.7) {
                    rng.gen_range(-1.5..1.5)
                } else {
                    0.0
                },
            )
        }),
        0.0,
    );
    ExpPolyTerm::new(coeff, powers, rates)
}

fn terms(rng: &mut ChaCha8Rng, vars: &[VarId], positive: bool) -> Vec<ExpPolyTerm> {
    let n = rng.gen_range(1..=3);
    (0..n).map(|_| term(rng, vars, positive)).collect()
}

/// A univariate function on `[lo, hi)` cut into 1–3 intervals; returns the
/// intervals too.
fn univariate(rng: &mut ChaCha8Rng, v: VarId, positive: bool) -> (PiecewiseFn, Vec<(f64, f64)>) {
    let lo = rng.gen_range(-2.5..0.0);
    let hi = rng.gen_range(0.5..2.5);
    let mut cuts = vec![lo, hi];
    for _ in 0..rng.gen_range(0..3) {
        cuts.push(rng.gen_range(lo..hi));
    }
    cuts.sort_by(f64::total_cmp);
    let spans: Vec<(f64, f64)> = cuts
        .windows(2)
        .map(|w| (w[0], w[1]))
        .filter(|(a, b)| b - a > 1e-3)
        .collect();
    let pieces = spans
        .iter()
        .map(|&(a, b)| Piece::new(Region::interval(v, a, b, true), terms(rng, &[v], positive)))
        .collect();
    (PiecewiseFn::new([v], pieces).unwrap(), spans)
}

/// A function of `Z1, Z2` on a box, either whole, cut along an axis, or cut
/// by a slanted line.
fn bivariate(rng: &mut ChaCha8Rng) -> PiecewiseFn {
    let vars = [Z1, Z2];
    let b = [
        (Z1, rng.gen_range(-2.0..-0.2), rng.gen_range(0.2..2.0)),
        (Z2, rng.gen_range(-2.0..-0.2), rng.gen_range(0.2..2.0)),
    ];
    let cube = Region::cube(&b);
    let pieces = match rng.gen_range(0..3) {
        0 => vec![Piece::new(cube, terms(rng, &vars, false))],
        1 => {
            let c = rng.gen_range(b[0].1 + 0.1..b[0].2 - 0.1);
            vec![
                Piece::new(
                    cube.with(Constraint::le(LinExpr::var(Z1), LinExpr::constant(c), true)),
                    terms(rng, &vars, false),
                ),
                Piece::new(
                    cube.with(Constraint::le(LinExpr::constant(c), LinExpr::var(Z1), false)),
                    terms(rng, &vars, false),
                ),
            ]
        }
        _ => {
            let k = rng.gen_range(-2.0..2.0);
            let c = rng.gen_range(-0.5..0.5);
            let line = LinExpr::new([(Z1, 1.0), (Z2, k)], 0.0);
            vec![
                Piece::new(
                    cube.with(Constraint::le(line.clone(), LinExpr::constant(c), true)),
                    terms(rng, &vars, false),
                ),
                Piece::new(
                    cube.with(Constraint::le(LinExpr::constant(c), line, false)),
                    terms(rng, &vars, false),
                ),
            ]
        }
    };
    PiecewiseFn::new(vars, pieces).unwrap()
}

fn point(rng: &mut ChaCha8Rng, vars: &[VarId]) -> Vec<(VarId, f64)> {
    vars.iter().map(|&v| (v, rng.gen_range(-2.5..2.5))).collect()
}

fn multiplication(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let f = bivariate(rng);
    let g = if rng.gen_bool(0.5) {
        bivariate(rng)
    } else {
        univariate(rng, Z2, false).0
    };
    let fg = multiply(&f, &g).map_err(|e| e.to_string())?;
    for _ in 0..5 {
        let p = point(rng, &[Z1, Z2]);
        let want = f.evaluate(&p).unwrap() * g.evaluate(&p).unwrap();
        let got = fg.evaluate(&p).unwrap();
        ensure(close(got, want, TOL), || format!("at {p:?}: {got} vs {want}"))?;
    }
    Ok(())
}

fn substitution(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let f = bivariate(rng);
    let e = LinExpr::new(
        [(Z2, rng.gen_range(-2.0..2.0)), (Z3, rng.gen_range(-2.0..2.0))],
        rng.gen_range(-1.0..1.0),
    );
    let g = substitute_linear(&f, Z1, &e).map_err(|e| e.to_string())?;
    for _ in 0..5 {
        let p = point(rng, &[Z2, Z3]);
        let z1 = e.eval(p.as_slice()).unwrap();
        let want = f.evaluate(&[(Z1, z1), (Z2, p[0].1)]).unwrap();
        let got = g.evaluate(&p).unwrap();
        ensure(close(got, want, TOL), || format!("at {p:?}: {got} vs {want}"))?;
    }
    Ok(())
}

/// Composite Simpson with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + (b - a) * (i as f64 / n as f64));
    }
    s * h / 3.0
}

fn integration(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let (f, spans) = univariate(rng, Z1, false);
    let got = definite_integral(&f).map_err(|e| e.to_string())?;
    let mut want = 0.0;
    let mut scale = 0.0;
    for &(a, b) in &spans {
        let (a, b) = (a + INSET, b - INSET);
        want += simpson(|x| f.evaluate(&[(Z1, x)]).unwrap(), a, b, 4000);
        scale += simpson(|x| f.evaluate(&[(Z1, x)]).unwrap().abs(), a, b, 200);
    }
    ensure((got - want).abs() <= TOL * scale.max(1.0), || {
        format!("symbolic {got}, quadrature {want}")
    })
}

fn fubini(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let f = bivariate(rng);
    let a = definite_integral(&eliminate_integrate(&f, Z1).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let b = definite_integral(&eliminate_integrate(&f, Z2).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    ensure(close(a, b, TOL), || format!("Z1 first {a}, Z2 first {b}"))
}

/// `a·z1 + b·x + c = 0` with coefficients kept away from zero.
fn random_equation(rng: &mut ChaCha8Rng) -> Equation {
    let mut coeff = || rng.gen_range(0.2..3.0) * if rng.gen_bool(0.5) { -1.0 } else { 1.0 };
    let (a, b) = (coeff(), coeff());
    Equation::new(LinExpr::new([(Z1, a), (X, b)], rng.gen_range(-1.0..1.0)), None).unwrap()
}

fn jacobian(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let (phi, _) = univariate(rng, Z1, true);
    let n = rng.gen_range(1..=2);
    let parts: Vec<WeightedEquation> = (0..n)
        .map(|_| WeightedEquation::new(rng.gen_range(0.1..1.0), random_equation(rng)))
        .collect();
    let want: f64 =
        definite_integral(&phi).unwrap() * parts.iter().map(|p| p.weight / p.equation.coeff(X).abs()).sum::<f64>();
    let d = DeterministicPotential::new(parts).unwrap();
    let out = marg_density_det(&phi, &d, Z1).map_err(|e| e.to_string())?;
    let got = definite_integral(&out).map_err(|e| e.to_string())?;
    ensure(close(got, want, TOL), || {
        format!("mass after change of variables {got}, expected {want}")
    })
}

fn commutation(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let (phi, spans) = univariate(rng, Z1, true);
    let e = random_equation(rng);
    let (a, b, c) = (e.coeff(Z1), e.coeff(X), e.lhs().constant_term());
    // Pick the observation so the implied z1 is inside the support.
    let z = rng.gen_range(spans[0].0..spans[spans.len() - 1].1);
    let x = -(a * z + c) / b;
    let d = DeterministicPotential::single(e);
    let p = MixedPotential::from_factor(vec![], vec![Z1, X], Factor::deterministic(d.clone())).unwrap();
    let density = MixedPotential::from_factor(vec![], vec![Z1], Factor::density(phi.clone())).unwrap();
    let restricted = restrict(&p, X, Observation::Value(x)).map_err(|e| e.to_string())?;
    let first = marginalize(&combine(&restricted, &density).unwrap(), Z1).map_err(|e| e.to_string())?;
    let [entry] = first.entries() else {
        return Err(format!("{first:?}"));
    };
    ensure(entry.factors.is_empty(), || format!("not a mass: {entry:?}"))?;
    let want = marg_density_det(&phi, &d, Z1)
        .map_err(|e| e.to_string())?
        .evaluate(&[(X, x)])
        .unwrap();
    ensure(close(entry.mass(), want, TOL), || {
        format!("restrict first {}, marginalize first {want}", entry.mass())
    })
}

/// A small random network in the shape of the running example, with a
/// random subset of features and random parameters.
fn random_network(rng: &mut ChaCha8Rng) -> Network {
    let r = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| (rng.gen_range(lo..hi) * 100.0_f64).round() / 100.0;
    let p = r(rng, 0.2, 0.8);
    let mut vars = vec![json!({"name": "Y", "kind": "discrete", "states": ["a", "b"]})];
    let mut cpds = vec![json!({"var": "Y", "table": [p, 1.0 - p]})];

    let z1_by_y = rng.gen_bool(0.4);
    vars.push(json!({"name": "Z1", "kind": "continuous", "parents": if z1_by_y { vec!["Y"] } else { vec![] }}));
    let mut z1_density = || json!({"template": "normal_mte", "mean": r(rng, -1.0, 1.0), "variance": r(rng, 0.3, 2.0)});
    cpds.push(if z1_by_y {
        json!({"var": "Z1", "density": {"Y=a": z1_density(), "Y=b": z1_density()}})
    } else {
        json!({"var": "Z1", "density": z1_density()})
    });

    let x1_by_y = rng.gen_bool(0.7);
    vars.push(
        json!({"name": "X1", "kind": "deterministic", "parents": if x1_by_y { vec!["Y", "Z1"] } else { vec!["Z1"] }}),
    );
    let mut x1_eq = || {
        format!(
            "X1 = {}*Z1 + {}",
            r(rng, 0.2, 2.5) * if rng.gen_bool(0.3) { -1.0 } else { 1.0 },
            r(rng, -1.0, 1.0)
        )
    };
    cpds.push(if x1_by_y {
        json!({"var": "X1", "equations": {"Y=a": x1_eq(), "Y=b": x1_eq()}})
    } else {
        json!({"var": "X1", "equations": x1_eq()})
    });

    let parent = if rng.gen_bool(0.6) { "X1" } else { "Z1" };
    vars.push(json!({"name": "Z2", "kind": "continuous", "parents": [parent]}));
    cpds.push(json!({"var": "Z2", "density": {
        "template": "normal_mte",
        "mean": format!("{}*{parent} + {}", r(rng, -1.0, 1.0), r(rng, -0.5, 0.5)),
        "variance": r(rng, 0.3, 2.0),
    }}));

    if rng.gen_bool(0.6) {
        vars.push(json!({"name": "X2", "kind": "deterministic", "parents": ["Z1", "Z2"]}));
        cpds.push(json!({"var": "X2", "equations": format!("X2 = {}*Z1 + {}*Z2", r(rng, 0.2, 1.5), r(rng, 0.2, 1.5))}));
    }
    let text = json!({"variables": vars, "cpds": cpds}).to_string();
    parse_model(&text).expect("generated model parses")
}

fn random_evidence(rng: &mut ChaCha8Rng, net: &Network) -> Evidence {
    let draw = forward_sample(net, 1, rng.gen()).unwrap();
    let row = &draw.rows[0];
    let mut ev = Evidence::new();
    let candidates: Vec<VarId> = net.ids().collect();
    // A state of Y, and at most one real-valued variable: two observed
    // values tied by an equation have zero joint density.
    if rng.gen_bool(0.4) {
        let y = candidates.iter().copied().find(|&v| net.is_discrete(v)).unwrap();
        ev.observe(net, y, Observation::State(row[y.0 as usize] as usize))
            .unwrap();
    }
    let real: Vec<VarId> = candidates.into_iter().filter(|&v| !net.is_discrete(v)).collect();
    if rng.gen_bool(0.7) {
        let v = real[rng.gen_range(0..real.len())];
        ev.observe(
            net,
            v,
            Observation::Value((row[v.0 as usize] * 1000.0).round() / 1000.0),
        )
        .unwrap();
    }
    ev
}

fn summary(m: &Marginal) -> Result<Vec<f64>, String> {
    Ok(match m {
        Marginal::Discrete { probabilities, .. } => probabilities.clone(),
        Marginal::Continuous { masses, .. } => {
            let mo = marginal_moments(m).map_err(|e| e.to_string())?;
            let mut out = vec![mo.mean, mo.variance];
            out.extend(masses.iter().flat_map(|(x, p)| [*x, *p]));
            out
        }
    })
}

/// `Ok(false)` when local propagation refuses the network.
fn global_vs_local(rng: &mut ChaCha8Rng) -> Result<bool, String> {
    let net = random_network(rng);
    let ev = random_evidence(rng, &net);
    let tree = build_join_tree(&net, None).map_err(|e| e.to_string())?;
    let prop = match propagate(&net, &tree, &ev) {
        Ok(p) => p,
        Err(Error::UnsupportedElimination { .. }) => return Ok(false),
        Err(e) => return Err(format!("{e} (evidence {ev:?})")),
    };
    for v in net.ids() {
        let local = prop
            .query_marginal(v)
            .map_err(|e| format!("local {}: {e}", net.name(v)))?;
        let global = global_marginal(&net, &ev, v).map_err(|e| format!("global {}: {e}", net.name(v)))?;
        let (lm, lw) = normalize_marginal(&local).map_err(|e| e.to_string())?;
        let (gm, gw) = normalize_marginal(&global).map_err(|e| e.to_string())?;
        ensure(close(lw, gw, TOL), || {
            format!("{}: likelihood {lw} vs {gw}", net.name(v))
        })?;
        let (a, b) = (summary(&lm)?, summary(&gm)?);
        ensure(
            a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| close(*x, *y, TOL)),
            || format!("{}: local {a:?}, global {b:?}", net.name(v)),
        )?;
    }
    Ok(true)
}
