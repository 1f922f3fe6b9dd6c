use std::collections::BTreeSet;
use std::sync::Arc;

use crate::expcalc::VarId;
use crate::potential::{combine_all, marginalize, restrict, Factor, MixedPotential, Observation};
use crate::{Error, Result};

/// Element of a message: a potential, or the note that a variable was
/// observed and must be restricted rather than summed out.
#[derive(Debug, Clone, PartialEq)]
pub enum Item {
    Potential(Arc<MixedPotential>),
    Evidence(VarId, Observation),
}

impl Item {
    pub fn potential(p: MixedPotential) -> Self {
        Item::Potential(Arc::new(p))
    }

    pub fn as_potential(&self) -> Option<&MixedPotential> {
        match self {
            Item::Potential(p) => Some(p),
            Item::Evidence(..) => None,
        }
    }
}

/// Elimination steps tried across all orders before giving up.
const MAX_ATTEMPTS: usize = 256;

fn evidence_for(items: &[Item], v: VarId) -> Option<Observation> {
    items.iter().find_map(|it| match it {
        Item::Evidence(w, o) if *w == v => Some(*o),
        _ => None,
    })
}

fn has_equations(p: &MixedPotential) -> bool {
    p.entries().iter().any(|e| {
        e.factors.iter().any(|f| match f {
            Factor::Deterministic(_) => true,
            Factor::Mixture(m) => m.components().iter().any(|c| !c.equations.is_empty()),
            _ => false,
        })
    })
}

/// Removes one variable from a list of items.
pub(crate) fn eliminate_one(items: &[Item], v: VarId) -> Result<Vec<Item>> {
    let obs = evidence_for(items, v);
    let mut bucket = Vec::new();
    let mut out = Vec::with_capacity(items.len());
    for it in items {
        match it {
            Item::Potential(p) if p.contains(v) => bucket.push(p.as_ref()),
            Item::Evidence(w, _) if *w == v => {}
            other => out.push(other.clone()),
        }
    }
    if bucket.is_empty() {
        return Ok(out);
    }
    let joint = combine_all(bucket.iter().copied())?;
    let reduced = match obs {
        Some(o) => restrict(&joint, v, o)?,
        None => marginalize(&joint, v)?,
    };
    if reduced != MixedPotential::vacuous() {
        out.push(Item::potential(reduced));
    }
    Ok(out)
}

fn domain(items: &[Item]) -> BTreeSet<VarId> {
    items
        .iter()
        .filter_map(Item::as_potential)
        .flat_map(|p| p.vars())
        .collect()
}

/// Eliminates every variable outside `keep`. Orders are explored greedily
/// and the search backs up when an elimination step is not supported in
/// closed form; the reported error comes from the longest failed attempt.
pub(crate) fn eliminate_all(items: Vec<Item>, keep: &[VarId]) -> Result<Vec<Item>> {
    let mut search = Search {
        keep,
        attempts: 0,
        best: None,
    };
    match search.run(items, 0)? {
        Some(done) => Ok(done),
        None => Err(search
            .best
            .map(|(_, e)| e)
            .unwrap_or_else(|| Error::UnsupportedElimination {
                var: "?".into(),
                reason: "no elimination order succeeded".into(),
            })),
    }
}

struct Search<'a> {
    keep: &'a [VarId],
    attempts: usize,
    best: Option<(usize, Error)>,
}

impl Search<'_> {
    fn run(&mut self, items: Vec<Item>, depth: usize) -> Result<Option<Vec<Item>>> {
        let mut todo: Vec<VarId> = domain(&items).into_iter().filter(|v| !self.keep.contains(v)).collect();
        if todo.is_empty() {
            let keep = self.keep;
            return Ok(Some(
                items
                    .into_iter()
                    .filter(|it| !matches!(it, Item::Evidence(w, _) if !keep.contains(w)))
                    .collect(),
            ));
        }
        todo.sort_by_cached_key(|&v| order_key(&items, v));
        for v in todo {
            if self.attempts >= MAX_ATTEMPTS {
                break;
            }
            self.attempts += 1;
            match eliminate_one(&items, v) {
                Ok(next) => {
                    if let Some(done) = self.run(next, depth + 1)? {
                        return Ok(Some(done));
                    }
                }
                Err(e @ Error::UnsupportedElimination { .. }) => {
                    if self.best.as_ref().is_none_or(|(d, _)| depth >= *d) {
                        self.best = Some((depth, e));
                    }
                }
                Err(e) => return Err(e),
            }
        }
        Ok(None)
    }
}

/// Observed variables first, then continuous before discrete, then buckets
/// holding fewer equation-carrying potentials, then smaller buckets.
fn order_key(items: &[Item], v: VarId) -> (bool, bool, usize, usize, VarId) {
    let bucket: Vec<&MixedPotential> = items
        .iter()
        .filter_map(Item::as_potential)
        .filter(|p| p.contains(v))
        .collect();
    let discrete = bucket.iter().any(|p| p.is_discrete(v));
    let with_eqs = bucket.iter().filter(|p| has_equations(p)).count();
    let width = bucket.iter().flat_map(|p| p.vars()).collect::<BTreeSet<_>>().len();
    (evidence_for(items, v).is_none(), discrete, with_eqs.min(2), width, v)
}
