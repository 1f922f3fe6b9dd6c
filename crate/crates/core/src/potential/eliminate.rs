use std::sync::Arc;

use super::terms::{expand, partition, product, recollect, Term};
use super::{rank, unrank, DeterministicPotential, Entry, Factor, MixedPotential, WeightedEquation, EQ_TOL};
use crate::expcalc::{eliminate_integrate, substitute_linear, union_vars, weighted_sum, PiecewiseFn, VarId, ZERO_EPS};
use crate::{Error, Result};

/// Removes `v`, dispatching on its kind and on the factors that mention it.
pub fn marginalize(p: &MixedPotential, v: VarId) -> Result<MixedPotential> {
    if p.is_discrete(v) {
        marg_discrete(p, v)
    } else if p.continuous.binary_search(&v).is_ok() {
        eliminate_continuous(p, v)
    } else {
        Err(Error::DomainMismatch(format!("{v} is not in the potential's domain")))
    }
}

/// Sums out a discrete variable, moving the joint masses onto the density
/// part as weights.
pub fn marg_discrete(p: &MixedPotential, y: VarId) -> Result<MixedPotential> {
    let pos = p
        .discrete
        .iter()
        .position(|(w, _)| *w == y)
        .ok_or_else(|| Error::DomainMismatch(format!("{y} is not a discrete variable of the potential")))?;
    let k = p.discrete[pos].1;
    let rest: Vec<(VarId, usize)> = p.discrete.iter().copied().filter(|(w, _)| *w != y).collect();
    let size: usize = rest.iter().map(|(_, c)| *c).product();
    let mut entries = Vec::with_capacity(size);
    for ridx in 0..size {
        let rstates = unrank(ridx, &rest);
        let group: Vec<&Entry> = (0..k)
            .map(|s| {
                let mut states = rstates.clone();
                states.insert(pos, s);
                &p.entries[rank(&states, &p.discrete)]
            })
            .filter(|e| !e.is_zero())
            .collect();
        entries.push(sum_entries(&group)?);
    }
    MixedPotential::new(rest, p.continuous.clone(), entries)
}

fn sum_entries(group: &[&Entry]) -> Result<Entry> {
    match group {
        [] => return Ok(Entry::zero()),
        [one] => return Ok((*one).clone()),
        _ => {}
    }
    // Factors shared by every summand stay outside the sum.
    let mut common: Vec<Factor> = Vec::new();
    let mut varying: Vec<Vec<Factor>> = group.iter().map(|e| e.factors.clone()).collect();
    for f in &group[0].factors {
        let everywhere = varying[1..].iter().all(|fs| fs.iter().any(|g| g.same(f)));
        if everywhere && varying[0].iter().any(|g| g.same(f)) {
            for fs in varying.iter_mut() {
                let i = fs.iter().position(|g| g.same(f)).expect("checked above");
                fs.remove(i);
            }
            common.push(f.clone());
        }
    }
    if varying.iter().all(Vec::is_empty) {
        let total = group.iter().map(|e| e.mass()).sum();
        return Ok(Entry::new(vec![total], common));
    }
    let mut terms = Vec::new();
    for (e, fs) in group.iter().zip(&varying) {
        let w = e.mass();
        for mut t in expand(fs)? {
            t.weight *= w;
            terms.push(t);
        }
    }
    let (scale, mut fs) = recollect(terms)?;
    common.append(&mut fs);
    Ok(Entry::new(vec![scale], common))
}

/// Integrates out a continuous variable that only density factors mention.
pub fn marg_cont_density(p: &MixedPotential, z: VarId) -> Result<MixedPotential> {
    for e in &p.entries {
        for f in &e.factors {
            if f.contains(z) && !matches!(f, Factor::Density(_)) {
                return Err(Error::UnsupportedElimination {
                    var: z.to_string(),
                    reason: "a non-density factor mentions the variable".into(),
                });
            }
        }
    }
    eliminate_continuous(p, z)
}

/// Pairwise substitution between two deterministic potentials: every
/// factor pair `(p, q)` yields `w_p·w_q·[q with z solved from p]`.
pub fn marg_det_pair(
    d1: &DeterministicPotential,
    d2: &DeterministicPotential,
    z: VarId,
) -> Result<DeterministicPotential> {
    let mut out = Vec::with_capacity(d1.factors().len() * d2.factors().len());
    for p in d1.factors() {
        let solved = p.equation.solve_for(z)?;
        for q in d2.factors() {
            if q.equation.coeff(z).abs() < ZERO_EPS {
                return Err(Error::NonInvertibleEquation(format!("{} = 0 in {z}", q.lhs())));
            }
            out.push(WeightedEquation::new(
                p.weight * q.weight,
                q.equation.substitute(z, &solved),
            ));
        }
    }
    DeterministicPotential::new(out)
}

/// Removing a variable from a lone deterministic potential leaves the
/// identity, carrying the total weight as mass.
pub fn marg_single_det(d: &DeterministicPotential, z: VarId) -> Result<(f64, Factor)> {
    if d.vars().binary_search(&z).is_err() {
        return Err(Error::DomainMismatch(format!(
            "{z} is not in the deterministic potential"
        )));
    }
    Ok((d.total_weight(), Factor::Identity))
}

/// `Σ_p w_p/|a_p| · f(z := solution of eq_p)`.
pub fn marg_density_det(f: &PiecewiseFn, d: &DeterministicPotential, z: VarId) -> Result<PiecewiseFn> {
    let mut parts = Vec::with_capacity(d.factors().len());
    for we in d.factors() {
        let a = we.equation.coeff(z);
        let solved = we.equation.solve_for(z)?;
        parts.push((we.weight / a.abs(), substitute_linear(f, z, &solved)?));
    }
    let vars = parts.iter().fold(Vec::new(), |acc, (_, g)| union_vars(&acc, g.vars()));
    let padded: Vec<(f64, PiecewiseFn)> = parts
        .into_iter()
        .map(|(w, g)| Ok((w, g.extend_vars(&vars)?)))
        .collect::<Result<_>>()?;
    let refs: Vec<(f64, &PiecewiseFn)> = padded.iter().map(|(w, g)| (*w, g)).collect();
    weighted_sum(&refs)
}

fn eliminate_continuous(p: &MixedPotential, v: VarId) -> Result<MixedPotential> {
    let entries = p
        .entries
        .iter()
        .map(|e| {
            if e.is_zero() {
                Ok(Entry::zero())
            } else {
                eliminate_entry(e, v)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let continuous = p.continuous.iter().copied().filter(|&w| w != v).collect();
    MixedPotential::new(p.discrete.clone(), continuous, entries)
}

fn eliminate_entry(e: &Entry, v: VarId) -> Result<Entry> {
    let (with, mut without) = partition(&e.factors, v);
    if with.is_empty() {
        return Ok(e.clone());
    }
    let mut out = Vec::new();
    for t in expand(with)? {
        if let Some(t) = eliminate_in_term(t, v)? {
            out.push(t);
        }
    }
    let (scale, mut fs) = recollect(out)?;
    let mut masses = e.masses.clone();
    masses.push(scale);
    without.append(&mut fs);
    Ok(Entry::new(masses, without))
}

fn unsupported(v: VarId, reason: &str) -> Error {
    Error::UnsupportedElimination {
        var: v.to_string(),
        reason: reason.into(),
    }
}

/// Eliminates `v` from one product term; `None` when the term vanishes.
pub(crate) fn eliminate_in_term(t: Term, v: VarId) -> Result<Option<Term>> {
    let (dv, mut densities): (Vec<_>, Vec<_>) = t.densities.into_iter().partition(|d| d.contains_var(v));
    let (ev, mut equations): (Vec<_>, Vec<_>) = t.equations.into_iter().partition(|e| e.contains(v));
    let mut weight = t.weight;
    match (ev.len(), dv.is_empty()) {
        (0, true) => {}
        (0, false) => {
            let g = eliminate_integrate(&product(&dv)?, v)?;
            if !push_density(&mut weight, &mut densities, g) {
                return Ok(None);
            }
        }
        (1, true) => {
            // Lone equation: identity, weight kept.
        }
        (1, false) => {
            let eq = &ev[0];
            let solved = eq.solve_for(v)?;
            weight /= eq.coeff(v).abs();
            for d in dv {
                let g = substitute_linear(&d, v, &solved)?;
                if !push_density(&mut weight, &mut densities, g) {
                    return Ok(None);
                }
            }
        }
        (2, true) => {
            let (solve, into) = if ev[1].head() == Some(v) && ev[0].head() != Some(v) {
                (&ev[1], &ev[0])
            } else {
                (&ev[0], &ev[1])
            };
            let combined = into.substitute(v, &solve.solve_for(v)?);
            if combined.lhs().is_constant() {
                if combined.lhs().constant_term().abs() > EQ_TOL {
                    return Ok(None);
                }
                return Err(unsupported(v, "the two equations are dependent"));
            }
            let we = WeightedEquation::canonical(weight, combined);
            weight = we.weight;
            equations.push(we.equation);
        }
        (2, false) => {
            return Err(unsupported(v, "two deterministic factors together with a density"));
        }
        (n, _) => {
            return Err(unsupported(v, &format!("{n} deterministic factors share the variable")));
        }
    }
    Ok(Some(Term {
        weight,
        densities,
        equations,
    }))
}

/// Adds `g` to the density list, folding scalars into the weight. Returns
/// false if `g` is identically zero.
pub(crate) fn push_density(weight: &mut f64, densities: &mut Vec<Arc<PiecewiseFn>>, g: PiecewiseFn) -> bool {
    if g.is_zero() {
        return false;
    }
    match g.scalar_value() {
        Some(c) => {
            *weight *= c;
            c != 0.0
        }
        None => {
            densities.push(Arc::new(g));
            true
        }
    }
}
