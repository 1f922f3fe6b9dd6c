//! Closed-form algebra for piecewise exponential-polynomial functions.
//!
//! A [`PiecewiseFn`] is a list of pieces; each piece is a polytope [`Region`]
//! carrying a sum of [`ExpPolyTerm`]s `c · Π zⱼ^kⱼ · exp(b·z)`. Pure MTE
//! potentials are the special case where every term has no monomial factor.
//! The monomial factors are what keeps the class closed under integration
//! with limits that are linear in the remaining variables.

mod dd;
mod integrate;
mod linexpr;
mod lp;
mod piecewise;
mod region;
mod term;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};

pub use integrate::{definite_integral, eliminate_integrate, moment};
pub use linexpr::{LinExpr, LinExprDisplay};
pub use piecewise::{multiply, substitute_linear, weighted_sum, Piece, PiecewiseFn};
pub use region::{Constraint, Region};
pub use term::ExpPolyTerm;

/// Coefficients below this magnitude are treated as zero.
pub const ZERO_EPS: f64 = 1e-12;
/// Slack a region's interior must admit to count as feasible.
pub const FEASIBILITY_TOL: f64 = 1e-9;

pub const DEFAULT_MAX_DEGREE: usize = 8;
pub const DEFAULT_MAX_PIECES: usize = 10_000;
pub const DEFAULT_MAX_VARS: usize = 4;

static MAX_DEGREE: AtomicUsize = AtomicUsize::new(DEFAULT_MAX_DEGREE);
static MAX_PIECES: AtomicUsize = AtomicUsize::new(DEFAULT_MAX_PIECES);
static MAX_VARS: AtomicUsize = AtomicUsize::new(DEFAULT_MAX_VARS);

/// Process-wide capacity caps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub max_degree: usize,
    pub max_pieces: usize,
    pub max_vars: usize,
}

impl Limits {
    pub fn current() -> Self {
        Limits {
            max_degree: MAX_DEGREE.load(Ordering::Relaxed),
            max_pieces: MAX_PIECES.load(Ordering::Relaxed),
            max_vars: MAX_VARS.load(Ordering::Relaxed),
        }
    }

    pub fn install(self) {
        MAX_DEGREE.store(self.max_degree, Ordering::Relaxed);
        MAX_PIECES.store(self.max_pieces, Ordering::Relaxed);
        MAX_VARS.store(self.max_vars, Ordering::Relaxed);
    }
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_degree: DEFAULT_MAX_DEGREE,
            max_pieces: DEFAULT_MAX_PIECES,
            max_vars: DEFAULT_MAX_VARS,
        }
    }
}

/// Opaque variable identifier. The model layer maps names onto these.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub u32);

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

/// Anything that can supply a value per variable.
pub trait Point {
    fn value(&self, v: VarId) -> Option<f64>;
}

impl Point for [(VarId, f64)] {
    fn value(&self, v: VarId) -> Option<f64> {
        self.iter().find(|(w, _)| *w == v).map(|(_, x)| *x)
    }
}

impl<const N: usize> Point for [(VarId, f64); N] {
    fn value(&self, v: VarId) -> Option<f64> {
        self.as_slice().value(v)
    }
}

impl Point for Vec<(VarId, f64)> {
    fn value(&self, v: VarId) -> Option<f64> {
        self.as_slice().value(v)
    }
}

impl Point for BTreeMap<VarId, f64> {
    fn value(&self, v: VarId) -> Option<f64> {
        self.get(&v).copied()
    }
}

impl Point for HashMap<VarId, f64> {
    fn value(&self, v: VarId) -> Option<f64> {
        self.get(&v).copied()
    }
}

/// Merges two sorted, deduplicated variable lists.
pub(crate) fn union_vars(a: &[VarId], b: &[VarId]) -> Vec<VarId> {
    let mut out: Vec<VarId> = a.iter().chain(b).copied().collect();
    out.sort();
    out.dedup();
    out
}
