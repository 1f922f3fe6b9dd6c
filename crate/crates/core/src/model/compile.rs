use super::{make_normal_mte, Cpd, DensitySpec, Network};
use crate::expcalc::{ExpPolyTerm, LinExpr, Piece, PiecewiseFn, Region, VarId};
use crate::potential::{DeterministicPotential, Entry, Equation, Factor, MixedPotential};
use crate::Result;

/// The density of `v` for one parent configuration.
pub fn compile_density(n: &Network, v: VarId, spec: &DensitySpec) -> Result<PiecewiseFn> {
    match spec {
        DensitySpec::Normal { mean, variance } => make_normal_mte(v, mean, *variance),
        DensitySpec::Pieces(pieces) => {
            let mut vars = n.continuous_parents(v);
            vars.push(v);
            let pieces = pieces
                .iter()
                .map(|p| {
                    let region = Region::new(p.region.iter().map(|q| q.to_constraint()));
                    let terms = p
                        .terms
                        .iter()
                        .map(|t| {
                            let exponent = t.exponent.clone().unwrap_or_else(LinExpr::zero);
                            ExpPolyTerm::new(t.coeff, t.powers.iter().copied(), exponent)
                        })
                        .collect();
                    Piece::new(region, terms)
                })
                .collect();
            PiecewiseFn::new(vars, pieces)
        }
    }
}

/// The initial potential of one variable, over the variable and its parents.
pub fn compile_potential(n: &Network, v: VarId) -> Result<MixedPotential> {
    let parents = n.discrete_parents(v);
    let mut discrete: Vec<(VarId, usize)> = parents.iter().map(|&p| (p, n.cardinality(p))).collect();
    let mut continuous = n.continuous_parents(v);
    let entries = match n.cpd(v) {
        Cpd::Table(rows) => {
            discrete.push((v, n.cardinality(v)));
            rows.iter()
                .flatten()
                .map(|&m| Entry::new(vec![m], Vec::new()))
                .collect()
        }
        Cpd::Density(cases) => {
            continuous.push(v);
            cases
                .iter()
                .map(|d| Ok(Entry::new(Vec::new(), vec![Factor::density(compile_density(n, v, d)?)])))
                .collect::<Result<Vec<_>>>()?
        }
        Cpd::Equations(cases) => {
            continuous.push(v);
            cases
                .iter()
                .map(|e| {
                    let eq = Equation::new(e.canonical(), Some(v))?;
                    Ok(Entry::new(
                        Vec::new(),
                        vec![Factor::deterministic(DeterministicPotential::single(eq))],
                    ))
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    MixedPotential::new(discrete, continuous, entries)
}

/// One potential per variable, in declaration order.
pub fn compile_potentials(n: &Network) -> Result<Vec<MixedPotential>> {
    n.ids().map(|v| compile_potential(n, v)).collect()
}
