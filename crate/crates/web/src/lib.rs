//! Browser bindings: the normal template, posterior marginals and model
//! validation, each returning a JSON document for the page in `www/`.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use hybrid_mte::expcalc::{definite_integral, moment, LinExpr, PiecewiseFn, VarId};
use hybrid_mte::jointree::{build_join_tree, marginal_moments, normalize_marginal, propagate, Evidence, Marginal};
use hybrid_mte::model::{make_normal_mte, parse_model, validate_model};

const MAX_POINTS: usize = 5000;

/// `points` evenly spaced samples of `f` over the hull of its pieces.
fn curve(f: &PiecewiseFn, v: VarId, points: usize) -> Result<Value, String> {
    let points = points.clamp(2, MAX_POINTS);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in f.pieces() {
        if let Some((a, b)) = p.region.interval_of(v) {
            lo = lo.min(a);
            hi = hi.max(b);
        }
    }
    if !(lo.is_finite() && hi.is_finite()) {
        return Err("density has unbounded support".into());
    }
    let mut xs = Vec::with_capacity(points);
    let mut ys = Vec::with_capacity(points);
    for i in 0..points {
        let x = lo + (hi - lo) * i as f64 / (points - 1) as f64;
        xs.push(x);
        ys.push(f.evaluate(&[(v, x)]).map_err(|e| e.to_string())?);
    }
    Ok(json!({ "x": xs, "y": ys }))
}

pub fn template_json(mean: f64, variance: f64, points: usize) -> Result<Value, String> {
    let z = VarId(0);
    let f = make_normal_mte(z, &LinExpr::constant(mean), variance).map_err(|e| e.to_string())?;
    let mass = definite_integral(&f).map_err(|e| e.to_string())?;
    let m1 = moment(&f, z, 1).map_err(|e| e.to_string())?;
    let m2 = moment(&f, z, 2).map_err(|e| e.to_string())?;
    Ok(json!({
        "curve": curve(&f, z, points)?,
        "mass": mass,
        "mean": m1,
        "variance": m2 - m1 * m1,
        "pieces": f.piece_count(),
    }))
}

/// Evidence as `Name=value` items separated by commas or newlines.
fn evidence_items(text: &str) -> Vec<String> {
    text.split([',', '\n'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

pub fn infer_json(model: &str, evidence: &str, target: &str, points: usize) -> Result<Value, String> {
    let net = parse_model(model).map_err(|e| e.to_string())?;
    if let Some(d) = validate_model(&net).first() {
        return Err(d.to_string());
    }
    let ev = Evidence::parse(&net, &evidence_items(evidence)).map_err(|e| e.to_string())?;
    let v = net.id_of(target.trim()).map_err(|e| e.to_string())?;
    let tree = build_join_tree(&net, None).map_err(|e| e.to_string())?;
    let prop = propagate(&net, &tree, &ev).map_err(|e| e.to_string())?;
    let (m, likelihood) =
        normalize_marginal(&prop.query_marginal(v).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    Ok(match &m {
        Marginal::Discrete { probabilities, .. } => json!({
            "target": target.trim(),
            "kind": "discrete",
            "likelihood": likelihood,
            "states": net.variable(v).states(),
            "probabilities": probabilities,
        }),
        Marginal::Continuous { masses, density, .. } => {
            let mo = marginal_moments(&m).map_err(|e| e.to_string())?;
            let curve = match density {
                Some(f) => curve(f, v, points)?,
                None => Value::Null,
            };
            json!({
                "target": target.trim(),
                "kind": "continuous",
                "likelihood": likelihood,
                "mean": mo.mean,
                "variance": mo.variance,
                "masses": masses,
                "curve": curve,
            })
        }
    })
}

pub fn validate_json(model: &str) -> Value {
    match parse_model(model) {
        Err(e) => json!({ "ok": false, "diagnostics": [e.to_string()] }),
        Ok(net) => {
            let diags: Vec<String> = validate_model(&net).iter().map(|d| d.to_string()).collect();
            let names: Vec<&str> = net.ids().map(|v| net.name(v)).collect();
            json!({ "ok": diags.is_empty(), "variables": names, "diagnostics": diags })
        }
    }
}

#[wasm_bindgen(js_name = templateCurve)]
pub fn template_curve(mean: f64, variance: f64, points: usize) -> Result<String, JsError> {
    template_json(mean, variance, points)
        .map(|v| v.to_string())
        .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = inferMarginal)]
pub fn infer_marginal(model: &str, evidence: &str, target: &str, points: usize) -> Result<String, JsError> {
    infer_json(model, evidence, target, points)
        .map(|v| v.to_string())
        .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = validateModel)]
pub fn validate(model: &str) -> String {
    validate_json(model).to_string()
}
