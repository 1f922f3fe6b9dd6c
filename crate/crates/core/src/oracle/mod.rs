//! Brute-force numerical references: quadrature over the joint density,
//! ancestral sampling and plain Gaussian elimination. None of it goes
//! through the symbolic calculus, so it can be used to check it.

mod linear;
mod quadrature;
mod sample;

use std::collections::BTreeMap;

use crate::expcalc::VarId;
use crate::model::{Cpd, Network};

pub use linear::solve_linear_system;
pub use quadrature::{quadrature_posterior, QuadraturePosterior};
pub use sample::{forward_sample, SampleMatrix};

pub const DEFAULT_POINTS_PER_AXIS: usize = 2001;

/// Resolution and optional bounds of the quadrature grid.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureSpec {
    /// Simpson nodes per axis, spread over the integrand's smooth stretches.
    pub points_per_axis: usize,
    /// Clips the integration range of free continuous variables. Without an
    /// entry the range is the support of the integrand.
    pub bounds: BTreeMap<VarId, (f64, f64)>,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            points_per_axis: DEFAULT_POINTS_PER_AXIS,
            bounds: BTreeMap::new(),
        }
    }
}

impl QuadratureSpec {
    pub fn with_points(points_per_axis: usize) -> Self {
        QuadratureSpec {
            points_per_axis,
            ..Self::default()
        }
    }
}

/// Index of the conditional case for a full discrete assignment (indexed by
/// variable id): row-major over the discrete parents in declared order.
pub(crate) fn case_index(n: &Network, v: VarId, states: &[usize]) -> usize {
    n.discrete_parents(v)
        .iter()
        .fold(0, |acc, &p| acc * n.cardinality(p) + states[p.0 as usize])
}

pub(crate) fn table_row<'a>(n: &'a Network, v: VarId, states: &[usize]) -> &'a [f64] {
    let Cpd::Table(rows) = n.cpd(v) else {
        panic!("{v} has no mass table")
    };
    &rows[case_index(n, v, states)]
}
