//! Binary join trees and Shenoy–Shafer propagation.
//!
//! Messages are lists of [`Item`]s that are never multiplied out unless an
//! elimination needs them together. Evidence travels the same way, as an
//! item naming the observed variable; eliminating an observed variable
//! restricts the potentials that mention it instead of summing it out.

mod build;
mod eliminate;
mod marginal;
mod propagate;

use std::collections::BTreeMap;

use crate::expcalc::VarId;
use crate::model::{Network, VarKind};
use crate::potential::Observation;
use crate::{Error, Result};

pub use build::{build_join_tree, JoinTree, JoinTreeNode};
pub use eliminate::Item;
pub use marginal::{marginal_moments, normalize_marginal, Marginal, Moments};
pub use propagate::{global_marginal, posterior_moments, propagate, propagate_from, query_marginal, Propagation};

/// Observed values keyed by variable.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Evidence {
    items: BTreeMap<VarId, Observation>,
}

impl Evidence {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds an observation after checking it against the variable's kind.
    pub fn observe(&mut self, net: &Network, v: VarId, obs: Observation) -> Result<()> {
        if v.0 as usize >= net.len() {
            return Err(Error::UnknownVariable(v.to_string()));
        }
        let var = net.variable(v);
        match (&var.kind, obs) {
            (VarKind::Discrete { states }, Observation::State(s)) if s < states.len() => {}
            (VarKind::Discrete { .. }, Observation::State(s)) => {
                return Err(Error::UnknownState {
                    var: var.name.clone(),
                    state: s.to_string(),
                })
            }
            (VarKind::Discrete { .. }, Observation::Value(x)) => {
                return Err(Error::UnknownState {
                    var: var.name.clone(),
                    state: x.to_string(),
                })
            }
            (_, Observation::Value(x)) if x.is_finite() => {}
            (_, other) => {
                return Err(Error::UnknownState {
                    var: var.name.clone(),
                    state: format!("{other:?}"),
                })
            }
        }
        self.items.insert(v, obs);
        Ok(())
    }

    /// Reads `Name=value` strings: state labels verbatim for discrete
    /// variables, decimal literals otherwise.
    pub fn parse<S: AsRef<str>>(net: &Network, specs: &[S]) -> Result<Self> {
        let mut ev = Evidence::new();
        for spec in specs {
            let spec = spec.as_ref();
            let Some((name, value)) = spec.split_once('=') else {
                return Err(Error::Parse {
                    line: 1,
                    column: spec.len() + 1,
                    message: format!("evidence {spec:?} is not of the form Name=value"),
                });
            };
            let (name, value) = (name.trim(), value.trim());
            let v = net.id_of(name)?;
            let unknown = || Error::UnknownState {
                var: name.to_string(),
                state: value.to_string(),
            };
            let obs = if net.is_discrete(v) {
                let s = net
                    .variable(v)
                    .states()
                    .iter()
                    .position(|x| x == value)
                    .ok_or_else(unknown)?;
                Observation::State(s)
            } else {
                Observation::Value(value.parse().map_err(|_| unknown())?)
            };
            ev.observe(net, v, obs)?;
        }
        Ok(ev)
    }

    pub fn get(&self, v: VarId) -> Option<Observation> {
        self.items.get(&v).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (VarId, Observation)> + '_ {
        self.items.iter().map(|(v, o)| (*v, *o))
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Replaces raw variable ids in an elimination error with network names and
/// adds where it happened.
pub(crate) fn name_error(net: &Network, e: Error, context: &str) -> Error {
    match e {
        Error::UnsupportedElimination { var, reason } => {
            let var = var
                .strip_prefix('v')
                .and_then(|s| s.parse::<u32>().ok())
                .filter(|&i| (i as usize) < net.len())
                .map_or(var.clone(), |i| net.name(VarId(i)).to_string());
            Error::UnsupportedElimination {
                var,
                reason: if context.is_empty() {
                    reason
                } else {
                    format!("{reason} ({context})")
                },
            }
        }
        other => other,
    }
}
