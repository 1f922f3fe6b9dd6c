use crate::expcalc::{Constraint, ExpPolyTerm, LinExpr, Piece, PiecewiseFn, Region, VarId};
use crate::{Error, Result};

/// Constant term of the two-piece standard normal approximant.
pub const NORMAL_MTE_CONSTANT: f64 = -0.0105929;

/// `(coefficient, |rate|)` of its three exponential terms. The left piece
/// uses `+rate`, the right piece `-rate`.
pub const NORMAL_MTE_TERMS: [(f64, f64); 3] = [
    (197.5892111, 2.2568434),
    (-462.6885096, 2.3434117),
    (265.5099139, 2.4043270),
];

/// Half-width of the support in standard deviations.
pub const NORMAL_MTE_HALF_WIDTH: f64 = 3.0;

/// The standard normal approximant in `z`.
pub fn standard_normal_mte(z: VarId) -> PiecewiseFn {
    make_normal_mte(z, &LinExpr::zero(), 1.0).expect("standard template is valid")
}

/// `(1/σ)·φ((z − mean)/σ)` where `φ` is the standard approximant. The mean
/// may depend linearly on other variables, which slants the piece borders.
pub fn make_normal_mte(z: VarId, mean: &LinExpr, variance: f64) -> Result<PiecewiseFn> {
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(Error::InvalidModel(format!(
            "variance must be positive, got {variance}"
        )));
    }
    if mean.contains(z) {
        return Err(Error::InvalidModel(format!("mean of {z} refers to {z}")));
    }
    let sigma = variance.sqrt();
    let centered = LinExpr::var(z).sub(mean);
    let width = NORMAL_MTE_HALF_WIDTH * sigma;
    let left = Region::new([
        Constraint::ge(centered.add_constant(width)),
        Constraint::gt(centered.scale(-1.0)),
    ]);
    let right = Region::new([
        Constraint::ge(centered.clone()),
        Constraint::ge(centered.scale(-1.0).add_constant(width)),
    ]);
    let side = |sign: f64| -> Vec<ExpPolyTerm> {
        let mut terms = vec![ExpPolyTerm::constant(NORMAL_MTE_CONSTANT / sigma)];
        for (a, b) in NORMAL_MTE_TERMS {
            terms.push(ExpPolyTerm::new(a / sigma, [], centered.scale(sign * b / sigma)));
        }
        terms
    };
    let mut vars: Vec<VarId> = mean.vars().collect();
    vars.push(z);
    PiecewiseFn::new(vars, vec![Piece::new(left, side(1.0)), Piece::new(right, side(-1.0))])
}
