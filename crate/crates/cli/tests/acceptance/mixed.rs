use hybrid_mte::expcalc::definite_integral;
use hybrid_mte::jointree::{build_join_tree, normalize_marginal, propagate, Evidence, Marginal};
use hybrid_mte::model::{compile_potential, parse_model};
use hybrid_mte::potential::{combine, restrict, Observation};

use super::support::{ensure, MIXED_X};
use super::Outcome;

const TOTAL_TOL: f64 = 1e-3;
const MASS_TOL: f64 = 1e-12;

pub fn criterion() -> Outcome {
    let net = parse_model(MIXED_X).map_err(|e| e.to_string())?;
    let (x, y) = (net.id_of("X").unwrap(), net.id_of("Y").unwrap());
    let tree = build_join_tree(&net, None).map_err(|e| e.to_string())?;

    let prior = propagate(&net, &tree, &Evidence::new()).map_err(|e| e.to_string())?;
    let (m, w_total) = normalize_marginal(&prior.query_marginal(x).unwrap()).map_err(|e| e.to_string())?;
    let Marginal::Continuous {
        masses,
        density: Some(f),
        ..
    } = &m
    else {
        return Err(format!("X is not a mixed distribution: {m:?}"));
    };
    let dens = definite_integral(f).map_err(|e| e.to_string())?;
    let total = masses.iter().map(|p| p.1).sum::<f64>() + dens;
    ensure((total - 1.0).abs() <= TOTAL_TOL, || format!("normalized total {total}"))?;
    ensure((w_total - 1.0).abs() <= TOTAL_TOL, || {
        format!("unnormalized total {w_total}")
    })?;
    ensure(masses.len() == 2, || format!("masses {masses:?}"))?;
    ensure(masses[0].0 == 1.0 && (masses[0].1 - 0.5).abs() <= MASS_TOL, || {
        format!("mass at 1: {:?}", masses[0])
    })?;
    ensure(masses[1].0 == 2.0 && (masses[1].1 - 0.3).abs() <= MASS_TOL, || {
        format!("mass at 2: {:?}", masses[1])
    })?;
    ensure((dens - 0.2).abs() <= MASS_TOL, || format!("density part {dens}"))?;

    // Restriction of the joint potential of Y and X.
    let joint = combine(
        &compile_potential(&net, y).unwrap(),
        &compile_potential(&net, x).unwrap(),
    )
    .unwrap();
    let r = restrict(&joint, x, Observation::Value(1.0)).map_err(|e| e.to_string())?;
    let e1 = r.entry_at(&[(y, 0)]).unwrap();
    ensure(e1.mass() == 0.5 && e1.factors.is_empty(), || {
        format!("Y=1 entry {e1:?}")
    })?;
    for s in 1..3 {
        ensure(r.entry_at(&[(y, s)]).unwrap().is_zero(), || {
            format!("state {} not zeroed", s + 1)
        })?;
    }

    // The same through propagation, against the prior total.
    let ev = Evidence::parse(&net, &["X=1"]).map_err(|e| e.to_string())?;
    let post = propagate(&net, &tree, &ev).map_err(|e| e.to_string())?;
    let (ym, w_ev) = normalize_marginal(&post.query_marginal(y).unwrap()).map_err(|e| e.to_string())?;
    ensure((w_ev / w_total - 0.5).abs() <= MASS_TOL, || {
        format!("P(X=1) = {}", w_ev / w_total)
    })?;
    let Marginal::Discrete { probabilities, .. } = ym else {
        unreachable!()
    };
    ensure(probabilities == [1.0, 0.0, 0.0], || {
        format!("Y posterior {probabilities:?}")
    })?;
    let (xm, _) = normalize_marginal(&post.query_marginal(x).unwrap()).map_err(|e| e.to_string())?;
    ensure(
        matches!(&xm, Marginal::Continuous { masses, density: None, .. } if masses == &[(1.0, 1.0)]),
        || format!("X posterior {xm:?}"),
    )?;
    Ok(format!(
        "total {total:.12} (unnormalized {w_total:.9}); masses 0.5 at 1, 0.3 at 2, density 0.2; X=1 keeps 0.5/total = {:.12}",
        w_ev / w_total
    ))
}
