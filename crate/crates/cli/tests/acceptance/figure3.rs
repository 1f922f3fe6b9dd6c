use hybrid_mte::jointree::{build_join_tree, marginal_moments, normalize_marginal, propagate, Evidence, Marginal};
use hybrid_mte::oracle::{quadrature_posterior, QuadratureSpec};

use super::support::{ensure, figure3, rel_err};
use super::Outcome;

const MEAN_TOL: f64 = 1e-6;
const POSTERIOR_TOL: f64 = 1e-5;
const LIKELIHOOD_TOL: f64 = 1e-9;

/// E[X1] = 0.6·(2·0 - 1) + 0.4·(0.25·0 + 1), E[Z2] = 0.6·E[X1] and
/// E[X2] = 0.4·E[Z1] + 0.75·E[Z2]; the approximant is symmetric, so its
/// normalized mean is exactly the location.
const CLOSED_FORM: [(&str, f64); 3] = [("X1", -0.2), ("X2", -0.09), ("Z1", 0.0)];

pub fn prior_means() -> Outcome {
    let net = figure3();
    let tree = build_join_tree(&net, None).map_err(|e| e.to_string())?;
    let prop = propagate(&net, &tree, &Evidence::new()).map_err(|e| e.to_string())?;
    let spec = QuadratureSpec::default();
    let mut notes = Vec::new();
    for (name, want) in CLOSED_FORM {
        let v = net.id_of(name).unwrap();
        let (m, _) =
            normalize_marginal(&prop.query_marginal(v).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let got = marginal_moments(&m).map_err(|e| e.to_string())?.mean;
        let q = quadrature_posterior(&net, &Evidence::new(), v, &spec).map_err(|e| e.to_string())?;
        ensure((got - want).abs() <= MEAN_TOL, || {
            format!("E[{name}] = {got}, closed form {want}")
        })?;
        ensure((got - q.mean).abs() <= MEAN_TOL, || {
            format!("E[{name}] = {got}, oracle {}", q.mean)
        })?;
        ensure((q.mean - want).abs() <= MEAN_TOL, || {
            format!("oracle E[{name}] = {}, closed form {want}", q.mean)
        })?;
        notes.push(format!("E[{name}]={got:.9}"));
    }
    Ok(notes.join(", "))
}

pub fn posteriors() -> Outcome {
    let net = figure3();
    let tree = build_join_tree(&net, None).map_err(|e| e.to_string())?;
    let ev = Evidence::parse(&net, &["X2=1"]).unwrap();
    let prop = propagate(&net, &tree, &ev).map_err(|e| e.to_string())?;
    let spec = QuadratureSpec::default();
    let mut likelihoods = Vec::new();
    let mut worst: f64 = 0.0;
    for name in ["Y1", "Z1", "Z2", "X1"] {
        let v = net.id_of(name).unwrap();
        let (m, w) =
            normalize_marginal(&prop.query_marginal(v).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let (mean, variance) = match &m {
            Marginal::Discrete { probabilities, .. } => {
                let mean = probabilities[1];
                (mean, mean * (1.0 - mean))
            }
            Marginal::Continuous { .. } => {
                let mo = marginal_moments(&m).map_err(|e| e.to_string())?;
                (mo.mean, mo.variance)
            }
        };
        let q = quadrature_posterior(&net, &ev, v, &spec).map_err(|e| e.to_string())?;
        for (what, a, b) in [("mean", mean, q.mean), ("variance", variance, q.variance)] {
            let r = rel_err(a, b);
            worst = worst.max(r);
            ensure(r <= POSTERIOR_TOL, || {
                format!("{what} of {name}: engine {a}, oracle {b} (rel {r:e})")
            })?;
        }
        let r = rel_err(w, q.evidence_weight);
        ensure(r <= POSTERIOR_TOL, || {
            format!("likelihood via {name}: engine {w}, oracle {}", q.evidence_weight)
        })?;
        likelihoods.push(w);
    }
    let spread = likelihoods
        .iter()
        .map(|w| rel_err(*w, likelihoods[0]))
        .fold(0.0, f64::max);
    ensure(spread <= LIKELIHOOD_TOL, || {
        format!("likelihood differs across queries: {likelihoods:?}")
    })?;
    Ok(format!(
        "worst relative moment error {worst:.1e}; likelihood {:.10} identical to {spread:.1e}",
        likelihoods[0]
    ))
}
