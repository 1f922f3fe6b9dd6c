use std::collections::BTreeSet;
use std::fmt;

use super::{compile_density, Cpd, DensitySpec, Network, VarKind};
use crate::expcalc::{definite_integral, eliminate_integrate, PiecewiseFn, VarId};

/// Mass tables must sum to one within this.
pub const TABLE_TOL: f64 = 1e-9;
/// Densities must integrate to one within this (the built-in normal
/// approximant is off by about 6e-6).
pub const DENSITY_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DiagnosticKind {
    Cycle,
    StateList,
    MassTable,
    DensityMass,
    Variance,
    HeadCoefficient,
    MissingContinuousParent,
    ParentReference,
    DiscreteChildOfContinuous,
    Compile,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub variable: Option<String>,
    pub kind: DiagnosticKind,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.variable {
            Some(v) => write!(f, "{v}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

struct Sink<'a> {
    net: &'a Network,
    out: Vec<Diagnostic>,
}

impl Sink<'_> {
    fn push(&mut self, v: VarId, kind: DiagnosticKind, message: String) {
        self.out.push(Diagnostic {
            variable: Some(self.net.name(v).to_string()),
            kind,
            message,
        });
    }
}

/// Everything wrong with a network; empty when it can be compiled.
pub fn validate_model(n: &Network) -> Vec<Diagnostic> {
    let mut sink = Sink {
        net: n,
        out: Vec::new(),
    };
    if n.topological_order().is_none() {
        sink.out.push(Diagnostic {
            variable: None,
            kind: DiagnosticKind::Cycle,
            message: "the parent graph has a cycle".into(),
        });
    }
    for v in n.ids() {
        let var = n.variable(v);
        match &var.kind {
            VarKind::Discrete { states } => {
                if states.is_empty() {
                    sink.push(v, DiagnosticKind::StateList, "no states".into());
                }
                let distinct: BTreeSet<&String> = states.iter().collect();
                if distinct.len() != states.len() {
                    sink.push(v, DiagnosticKind::StateList, "duplicate state labels".into());
                }
                if !n.continuous_parents(v).is_empty() {
                    sink.push(
                        v,
                        DiagnosticKind::DiscreteChildOfContinuous,
                        "discrete variables with continuous parents are not supported".into(),
                    );
                }
            }
            VarKind::Deterministic if n.continuous_parents(v).is_empty() => {
                sink.push(
                    v,
                    DiagnosticKind::MissingContinuousParent,
                    "no continuous parent".into(),
                );
            }
            _ => {}
        }
        match n.cpd(v) {
            Cpd::Table(rows) => check_table(&mut sink, v, rows),
            Cpd::Density(cases) => {
                for (i, d) in cases.iter().enumerate() {
                    check_density(&mut sink, v, i, d);
                }
            }
            Cpd::Equations(cases) => {
                let allowed = allowed_vars(n, v);
                for (i, e) in cases.iter().enumerate() {
                    let lhs = e.canonical();
                    let a = lhs.coeff(v);
                    if (a - 1.0).abs() > 1e-12 {
                        sink.push(
                            v,
                            DiagnosticKind::HeadCoefficient,
                            format!("case {i}: {} has coefficient {a} on the head, expected 1", n.show(&lhs)),
                        );
                    }
                    check_refs(&mut sink, v, i, lhs.vars(), &allowed);
                }
            }
        }
    }
    sink.out
}

fn allowed_vars(n: &Network, v: VarId) -> BTreeSet<VarId> {
    n.continuous_parents(v).into_iter().chain([v]).collect()
}

fn check_refs(
    sink: &mut Sink,
    v: VarId,
    case: usize,
    used: impl IntoIterator<Item = VarId>,
    allowed: &BTreeSet<VarId>,
) {
    let bad: BTreeSet<VarId> = used.into_iter().filter(|w| !allowed.contains(w)).collect();
    for w in bad {
        let msg = format!(
            "case {case} refers to {}, which is not a continuous parent",
            sink.net.name(w)
        );
        sink.push(v, DiagnosticKind::ParentReference, msg);
    }
}

fn check_table(sink: &mut Sink, v: VarId, rows: &[Vec<f64>]) {
    for (i, row) in rows.iter().enumerate() {
        if row.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
            sink.push(
                v,
                DiagnosticKind::MassTable,
                format!("row {i} has a negative or non-finite entry"),
            );
        }
        let total: f64 = row.iter().sum();
        if (total - 1.0).abs() > TABLE_TOL {
            sink.push(v, DiagnosticKind::MassTable, format!("row {i} sums to {total}, not 1"));
        }
    }
}

fn check_density(sink: &mut Sink, v: VarId, case: usize, d: &DensitySpec) {
    let n = sink.net;
    let allowed = allowed_vars(n, v);
    let refs_ok = sink.out.len();
    match d {
        DensitySpec::Normal { mean, variance } => {
            if !(*variance > 0.0 && variance.is_finite()) {
                sink.push(
                    v,
                    DiagnosticKind::Variance,
                    format!("case {case}: variance {variance} is not positive"),
                );
                return;
            }
            let parents: BTreeSet<VarId> = n.continuous_parents(v).into_iter().collect();
            check_refs(sink, v, case, mean.vars(), &parents);
        }
        DensitySpec::Pieces(pieces) => {
            for p in pieces {
                for q in &p.region {
                    check_refs(sink, v, case, q.lhs.vars().chain(q.rhs.vars()), &allowed);
                }
                for t in &p.terms {
                    let exp = t.exponent.iter().flat_map(|e| e.vars());
                    check_refs(sink, v, case, t.powers.iter().map(|(w, _)| *w).chain(exp), &allowed);
                }
            }
        }
    }
    if sink.out.len() != refs_ok {
        return;
    }
    let f = match compile_density(n, v, d) {
        Ok(f) => f,
        Err(e) => {
            sink.push(v, DiagnosticKind::Compile, format!("case {case}: {e}"));
            return;
        }
    };
    match conditional_masses(&f, v) {
        Ok(masses) => {
            if let Some(m) = masses.iter().find(|m| (*m - 1.0).abs() > DENSITY_TOL) {
                sink.push(
                    v,
                    DiagnosticKind::DensityMass,
                    format!("case {case}: integrates to {m}, not 1"),
                );
            }
        }
        Err(e) => sink.push(v, DiagnosticKind::DensityMass, format!("case {case}: {e}")),
    }
}

/// `∫ f dv` at representative parent values where it is nonzero.
fn conditional_masses(f: &PiecewiseFn, v: VarId) -> crate::Result<Vec<f64>> {
    if f.vars() == [v] {
        return Ok(vec![definite_integral(f)?]);
    }
    let g = eliminate_integrate(f, v)?;
    let parents = g.vars().to_vec();
    if parents.is_empty() {
        return Ok(vec![g.scalar_value().unwrap_or(0.0)]);
    }
    // Candidate values per parent: a few round numbers plus points between
    // and beside the breakpoints of single-variable piece borders.
    let mut axes: Vec<Vec<f64>> = Vec::with_capacity(parents.len());
    for &p in &parents {
        let mut roots: Vec<f64> = g
            .pieces()
            .iter()
            .flat_map(|piece| piece.region.constraints())
            .filter(|c| c.expr().coeffs().len() == 1 && c.expr().coeff(p) != 0.0)
            .map(|c| -c.expr().constant_term() / c.expr().coeff(p))
            .collect();
        roots.sort_by(f64::total_cmp);
        roots.dedup();
        let mut axis = vec![-2.0, -1.0, 0.0, 0.5, 1.0, 2.0];
        if let (Some(lo), Some(hi)) = (roots.first(), roots.last()) {
            axis.push(lo - 1.0);
            axis.push(hi + 1.0);
        }
        axis.extend(roots.windows(2).map(|w| 0.5 * (w[0] + w[1])));
        axis.truncate(16);
        axes.push(axis);
    }
    let mut out = Vec::new();
    let total: usize = axes.iter().map(Vec::len).product();
    for mut idx in 0..total {
        let mut point = Vec::with_capacity(parents.len());
        for (p, axis) in parents.iter().zip(&axes) {
            point.push((*p, axis[idx % axis.len()]));
            idx /= axis.len();
        }
        let m = g.evaluate(&point)?;
        if m != 0.0 {
            out.push(m);
        }
    }
    Ok(out)
}
