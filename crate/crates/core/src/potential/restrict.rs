use std::sync::Arc;

use super::eliminate::push_density;
use super::terms::{expand, factor_terms, partition, recollect, Term};
use super::{rank, unrank, Entry, Factor, MixedPotential, WeightedEquation, EQ_TOL};
use crate::expcalc::{LinExpr, VarId};
use crate::{Error, Result};

/// An observed value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Observation {
    /// Index into a discrete variable's state list.
    State(usize),
    /// Value of a continuous variable.
    Value(f64),
}

/// Enters evidence `v = value` and drops `v` from the domain.
pub fn restrict(p: &MixedPotential, v: VarId, value: Observation) -> Result<MixedPotential> {
    match value {
        Observation::State(s) => restrict_discrete(p, v, s),
        Observation::Value(c) => {
            if p.is_discrete(v) {
                return Err(Error::DomainMismatch(format!("{v} is discrete; expected a state")));
            }
            if p.continuous.binary_search(&v).is_err() {
                return Err(Error::DomainMismatch(format!("{v} is not in the potential's domain")));
            }
            restrict_continuous(p, v, c)
        }
    }
}

fn restrict_discrete(p: &MixedPotential, v: VarId, s: usize) -> Result<MixedPotential> {
    let Some(pos) = p.discrete.iter().position(|(w, _)| *w == v) else {
        return Err(Error::DomainMismatch(format!(
            "{v} is not a discrete variable of the potential"
        )));
    };
    let k = p.discrete[pos].1;
    if s >= k {
        return Err(Error::UnknownState {
            var: v.to_string(),
            state: s.to_string(),
        });
    }
    let rest: Vec<(VarId, usize)> = p.discrete.iter().copied().filter(|(w, _)| *w != v).collect();
    let size: usize = rest.iter().map(|(_, c)| *c).product();
    let entries = (0..size)
        .map(|ridx| {
            let mut states = unrank(ridx, &rest);
            states.insert(pos, s);
            p.entries[rank(&states, &p.discrete)].clone()
        })
        .collect();
    MixedPotential::new(rest, p.continuous.clone(), entries)
}

fn same_point(a: f64, b: f64) -> bool {
    (a - b).abs() <= EQ_TOL * a.abs().max(b.abs()).max(1.0)
}

fn is_point_at(eq: &super::Equation, v: VarId, c: f64) -> bool {
    matches!(eq.point_value(), Some((w, x)) if w == v && same_point(x, c))
}

fn factor_has_point(f: &Factor, v: VarId, c: f64) -> bool {
    match f {
        Factor::Deterministic(d) => d.factors().iter().any(|we| is_point_at(&we.equation, v, c)),
        Factor::Mixture(m) => m
            .components()
            .iter()
            .any(|comp| comp.equations.iter().any(|e| is_point_at(e, v, c))),
        _ => false,
    }
}

fn restrict_continuous(p: &MixedPotential, v: VarId, c: f64) -> Result<MixedPotential> {
    // The observed value carries positive mass somewhere in this potential:
    // everything that only has density there is zeroed.
    let mass_mode = p
        .entries
        .iter()
        .any(|e| !e.is_zero() && e.factors.iter().any(|f| factor_has_point(f, v, c)));
    let entries = p
        .entries
        .iter()
        .map(|e| {
            if e.is_zero() {
                Ok(Entry::zero())
            } else if mass_mode {
                restrict_entry_mass(e, v, c)
            } else {
                restrict_entry_density(e, v, c)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let continuous = p.continuous.iter().copied().filter(|&w| w != v).collect();
    MixedPotential::new(p.discrete.clone(), continuous, entries)
}

fn restrict_entry_mass(e: &Entry, v: VarId, c: f64) -> Result<Entry> {
    let (with, mut without) = partition(&e.factors, v);
    let mut out = Vec::new();
    for mut t in expand(with)? {
        let Some(i) = t.equations.iter().position(|eq| is_point_at(eq, v, c)) else {
            continue;
        };
        t.equations.remove(i);
        if let Some(t) = substitute_term(t, v, c)? {
            out.push(t);
        }
    }
    if out.is_empty() {
        return Ok(Entry::zero());
    }
    let (scale, mut fs) = recollect(out)?;
    let mut masses = e.masses.clone();
    masses.push(scale);
    without.append(&mut fs);
    Ok(Entry::new(masses, without))
}

fn restrict_entry_density(e: &Entry, v: VarId, c: f64) -> Result<Entry> {
    let mut masses = e.masses.clone();
    let mut factors = Vec::with_capacity(e.factors.len());
    for f in &e.factors {
        if !f.contains(v) {
            factors.push(f.clone());
            continue;
        }
        let mut out = Vec::new();
        for t in factor_terms(f)? {
            if let Some(t) = substitute_term(t, v, c)? {
                out.push(t);
            }
        }
        let (scale, mut fs) = recollect(out)?;
        if scale == 0.0 {
            return Ok(Entry::zero());
        }
        masses.push(scale);
        factors.append(&mut fs);
    }
    Ok(Entry::new(masses, factors))
}

/// Substitutes `v = c` into every atom of a term.
fn substitute_term(t: Term, v: VarId, c: f64) -> Result<Option<Term>> {
    let value = LinExpr::constant(c);
    let mut weight = t.weight;
    let mut densities: Vec<Arc<_>> = Vec::with_capacity(t.densities.len());
    for d in t.densities {
        if !d.contains_var(v) {
            densities.push(d);
            continue;
        }
        if !push_density(&mut weight, &mut densities, d.restrict(v, c)?) {
            return Ok(None);
        }
    }
    let mut equations = Vec::with_capacity(t.equations.len());
    for eq in t.equations {
        if !eq.contains(v) {
            equations.push(eq);
            continue;
        }
        let sub = eq.substitute(v, &value);
        if sub.lhs().is_constant() {
            // A point constraint on v at a different location.
            if sub.lhs().constant_term().abs() > EQ_TOL {
                return Ok(None);
            }
            continue;
        }
        let we = WeightedEquation::canonical(weight, sub);
        weight = we.weight;
        equations.push(we.equation);
    }
    Ok(Some(Term {
        weight,
        densities,
        equations,
    }))
}
