use hybrid_mte::expcalc::{LinExpr, VarId};
use hybrid_mte::model::{parse_model, Network};
use hybrid_mte::potential::{DeterministicPotential, Entry, Equation, Factor, WeightedEquation};

pub const FIGURE3: &str = include_str!("../../../../models/figure3.json");
pub const MIXED_X: &str = include_str!("../../../../models/mixed_x.json");

pub fn figure3() -> Network {
    parse_model(FIGURE3).expect("figure 3 model parses")
}

pub fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// `|a - b| <= tol · max(1, |b|)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        (a - b).abs() / b.abs()
    }
}

pub fn lin(coeffs: &[(VarId, f64)], c: f64) -> LinExpr {
    LinExpr::new(coeffs.iter().copied(), c)
}

pub fn eq(coeffs: &[(VarId, f64)], c: f64) -> Equation {
    Equation::new(lin(coeffs, c), None).expect("valid equation")
}

pub fn det(parts: &[(f64, Equation)]) -> DeterministicPotential {
    DeterministicPotential::new(
        parts
            .iter()
            .map(|(w, e)| WeightedEquation::new(*w, e.clone()))
            .collect(),
    )
    .expect("valid deterministic potential")
}

/// The two-piece normal approximant with the printed constants, written out
/// independently of the library's template code.
pub fn phi_std(z: f64) -> f64 {
    const A0: f64 = -0.0105929;
    const TERMS: [(f64, f64); 3] = [
        (197.5892111, 2.2568434),
        (-462.6885096, 2.3434117),
        (265.5099139, 2.4043270),
    ];
    if !(-3.0..=3.0).contains(&z) {
        return 0.0;
    }
    let s = if z < 0.0 { 1.0 } else { -1.0 };
    A0 + TERMS.iter().map(|(a, b)| a * (s * b * z).exp()).sum::<f64>()
}

/// Normal approximant with mean `m` and variance `v`.
pub fn phi(x: f64, m: f64, v: f64) -> f64 {
    let s = v.sqrt();
    phi_std((x - m) / s) / s
}

/// `k` with `a = k·b`, if the two expressions are proportional.
pub fn ratio(a: &LinExpr, b: &LinExpr, tol: f64) -> Option<f64> {
    let (v, c) = b
        .coeffs()
        .iter()
        .copied()
        .max_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))?;
    let k = a.coeff(v) / c;
    (k != 0.0 && a.approx_eq(&b.scale(k), tol * k.abs().max(1.0))).then_some(k)
}

/// `(weight, lhs)` of every weighted equation in an entry whose density part
/// is purely deterministic, with the entry's mass folded into the weights.
pub fn equations_of(e: &Entry) -> Result<Vec<(f64, LinExpr)>, String> {
    let mut out = Vec::new();
    for f in &e.factors {
        match f {
            Factor::Deterministic(d) => out.extend(d.factors().iter().map(|w| (e.mass() * w.weight, w.lhs().clone()))),
            Factor::Mixture(m) => {
                for c in m.components() {
                    let [eq] = c.equations.as_slice() else {
                        return Err(format!("mixture component is not a single equation: {c:?}"));
                    };
                    if !c.densities.is_empty() {
                        return Err("mixture component carries a density".into());
                    }
                    out.push((e.mass() * c.weight, eq.lhs().clone()));
                }
            }
            other => return Err(format!("unexpected factor {other:?}")),
        }
    }
    Ok(out)
}

/// Checks `Σ wᵢ·δ(gᵢ)` against the expected weighted equations, as
/// measures: `w·δ(k·g) = (w/|k|)·δ(g)`.
pub fn same_deltas(got: &[(f64, LinExpr)], want: &[(f64, LinExpr)], tol: f64) -> Result<(), String> {
    ensure(got.len() == want.len(), || {
        format!("{} equations, expected {}", got.len(), want.len())
    })?;
    for (w, g) in want {
        let hit = got.iter().any(|(gw, gg)| match ratio(gg, g, tol) {
            Some(k) => close(gw / k.abs(), *w, tol),
            None => false,
        });
        ensure(hit, || format!("no match for {w}·[{g} = 0] in {got:?}"))?;
    }
    Ok(())
}
