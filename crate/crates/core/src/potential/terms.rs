//! Expansion of factor products into sums of weighted atom lists and the
//! reverse step.

use std::sync::Arc;

use super::{Component, DeterministicPotential, Equation, Factor, Mixture, WeightedEquation};
use crate::expcalc::{multiply, PiecewiseFn, VarId};
use crate::{Error, Result};

/// Upper bound on the number of summands one expansion may produce.
pub const MAX_TERMS: usize = 4096;

/// `weight · Π densities · Π δ(equations)`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Term {
    pub weight: f64,
    pub densities: Vec<Arc<PiecewiseFn>>,
    pub equations: Vec<Equation>,
}

impl Term {
    pub fn one() -> Self {
        Term {
            weight: 1.0,
            densities: Vec::new(),
            equations: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.densities.is_empty() && self.equations.is_empty()
    }

    fn times(&self, other: &Term) -> Term {
        Term {
            weight: self.weight * other.weight,
            densities: self.densities.iter().chain(&other.densities).cloned().collect(),
            equations: self.equations.iter().chain(&other.equations).cloned().collect(),
        }
    }
}

/// The summands of one factor.
pub(crate) fn factor_terms(f: &Factor) -> Result<Vec<Term>> {
    Ok(match f {
        Factor::Identity => vec![Term::one()],
        Factor::Density(d) => vec![Term {
            weight: 1.0,
            densities: vec![d.clone()],
            equations: Vec::new(),
        }],
        Factor::Deterministic(d) => d
            .factors()
            .iter()
            .map(|we| Term {
                weight: we.weight,
                densities: Vec::new(),
                equations: vec![we.equation.clone()],
            })
            .collect(),
        Factor::Mixture(m) => match m.as_density()? {
            Some(d) => vec![Term {
                weight: 1.0,
                densities: vec![d],
                equations: Vec::new(),
            }],
            None => m
                .components()
                .iter()
                .map(|c| Term {
                    weight: c.weight,
                    densities: c.densities.clone(),
                    equations: c.equations.clone(),
                })
                .collect(),
        },
    })
}

/// Distributes a product of factors into a sum of terms.
pub(crate) fn expand<'a>(factors: impl IntoIterator<Item = &'a Factor>) -> Result<Vec<Term>> {
    let mut acc = vec![Term::one()];
    for f in factors {
        let parts = factor_terms(f)?;
        if acc.len() * parts.len() > MAX_TERMS {
            return Err(Error::CapacityExceeded(format!(
                "more than {MAX_TERMS} summands when expanding a factor product"
            )));
        }
        acc = acc
            .iter()
            .flat_map(|a| parts.iter().map(move |p| a.times(p)))
            .filter(|t| t.weight != 0.0)
            .collect();
    }
    Ok(acc)
}

/// Pointwise product of several densities.
pub(crate) fn product(ds: &[Arc<PiecewiseFn>]) -> Result<PiecewiseFn> {
    let mut it = ds.iter();
    let Some(first) = it.next() else {
        return Ok(PiecewiseFn::scalar(1.0));
    };
    let mut acc = (**first).clone();
    for d in it {
        acc = multiply(&acc, d)?;
    }
    Ok(acc)
}

/// Turns a sum of terms back into `(scalar, factors)`.
///
/// A single term keeps its atoms as separate factors; a sum of scalars
/// becomes a scalar; a sum of single equations becomes a deterministic
/// potential; anything else becomes a mixture.
pub(crate) fn recollect(terms: Vec<Term>) -> Result<(f64, Vec<Factor>)> {
    let mut terms: Vec<Term> = terms.into_iter().filter(|t| t.weight != 0.0).collect();
    if terms.is_empty() {
        return Ok((0.0, Vec::new()));
    }
    if terms.len() == 1 {
        let t = terms.pop().expect("one term");
        let mut factors: Vec<Factor> = t.densities.into_iter().map(Factor::Density).collect();
        factors.extend(
            t.equations
                .into_iter()
                .map(|e| Factor::deterministic(DeterministicPotential::single(e))),
        );
        return Ok((t.weight, factors));
    }
    if terms.iter().all(Term::is_empty) {
        return Ok((terms.iter().map(|t| t.weight).sum(), Vec::new()));
    }
    if terms.iter().all(|t| t.densities.is_empty() && t.equations.len() == 1) {
        let eqs = terms
            .into_iter()
            .map(|t| WeightedEquation::new(t.weight, t.equations.into_iter().next().expect("one equation")))
            .collect();
        return Ok((1.0, vec![Factor::deterministic(DeterministicPotential::new(eqs)?)]));
    }
    let components = terms
        .into_iter()
        .map(|t| Component {
            weight: t.weight,
            densities: t.densities,
            equations: t.equations,
        })
        .collect();
    Ok((1.0, vec![Factor::Mixture(Arc::new(Mixture::new(components)))]))
}

/// Splits factors by whether they mention `v`.
pub(crate) fn partition(factors: &[Factor], v: VarId) -> (Vec<&Factor>, Vec<Factor>) {
    let mut with = Vec::new();
    let mut without = Vec::new();
    for f in factors {
        if f.contains(v) {
            with.push(f);
        } else {
            without.push(f.clone());
        }
    }
    (with, without)
}
