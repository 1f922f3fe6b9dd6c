use crate::expcalc::{definite_integral, moment, weighted_sum, PiecewiseFn, VarId};
use crate::potential::terms::{expand, product};
use crate::potential::MixedPotential;
use crate::{Error, Result};

/// A normalized one-variable posterior.
#[derive(Debug, Clone, PartialEq)]
pub enum Marginal {
    Discrete {
        var: VarId,
        probabilities: Vec<f64>,
    },
    /// Point masses (sorted by location) plus an optional density part;
    /// the masses and the density's integral add up to one.
    Continuous {
        var: VarId,
        masses: Vec<(f64, f64)>,
        density: Option<PiecewiseFn>,
    },
}

impl Marginal {
    pub fn var(&self) -> VarId {
        match self {
            Marginal::Discrete { var, .. } | Marginal::Continuous { var, .. } => *var,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
}

/// Normalizes a potential over a single variable. Returns the marginal and
/// the normalizing constant (the probability of the evidence).
pub fn normalize_marginal(p: &MixedPotential) -> Result<(Marginal, f64)> {
    let vars = p.vars();
    let [v] = vars.as_slice() else {
        return Err(Error::DomainMismatch(format!(
            "expected a potential over one variable, got {vars:?}"
        )));
    };
    let v = *v;
    if p.is_discrete(v) {
        let raw = p
            .entries()
            .iter()
            .map(|e| {
                let mut total = 0.0;
                for t in expand(&e.factors)? {
                    if !t.equations.is_empty() {
                        return Err(Error::DomainMismatch("equation left in a discrete marginal".into()));
                    }
                    total += t.weight * scalar(&product(&t.densities)?)?;
                }
                Ok(e.mass() * total)
            })
            .collect::<Result<Vec<f64>>>()?;
        let w: f64 = raw.iter().sum();
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::InconsistentEvidence);
        }
        let probabilities = raw.iter().map(|x| x / w).collect();
        return Ok((Marginal::Discrete { var: v, probabilities }, w));
    }
    let [entry] = p.entries() else {
        return Err(Error::DomainMismatch(
            "continuous marginal with discrete configurations".into(),
        ));
    };
    if entry.is_zero() {
        return Err(Error::InconsistentEvidence);
    }
    let mut masses: Vec<(f64, f64)> = Vec::new();
    let mut parts: Vec<(f64, PiecewiseFn)> = Vec::new();
    for t in expand(&entry.factors)? {
        let weight = entry.mass() * t.weight;
        let d = product(&t.densities)?;
        match t.equations.as_slice() {
            [] => {
                if !d.contains_var(v) {
                    return Err(Error::DivergentIntegral(v));
                }
                parts.push((weight, d));
            }
            [eq] => {
                let Some((_, c)) = eq.point_value() else {
                    return Err(Error::DomainMismatch(
                        "equation left in a marginal is not a point".into(),
                    ));
                };
                let m = weight * d.evaluate(&[(v, c)])?;
                if m != 0.0 {
                    match masses
                        .iter_mut()
                        .find(|(x, _)| (*x - c).abs() <= 1e-12 * c.abs().max(1.0))
                    {
                        Some((_, acc)) => *acc += m,
                        None => masses.push((c, m)),
                    }
                }
            }
            _ => {
                return Err(Error::UnsupportedElimination {
                    var: v.to_string(),
                    reason: "product of point masses in a marginal".into(),
                })
            }
        }
    }
    let density = if parts.is_empty() {
        None
    } else {
        let refs: Vec<(f64, &PiecewiseFn)> = parts.iter().map(|(w, f)| (*w, f)).collect();
        Some(weighted_sum(&refs)?)
    };
    let dmass = match &density {
        Some(f) => definite_integral(f)?,
        None => 0.0,
    };
    let w = dmass + masses.iter().map(|(_, m)| m).sum::<f64>();
    if !(w > 0.0 && w.is_finite()) {
        return Err(Error::InconsistentEvidence);
    }
    masses.retain(|(_, m)| *m != 0.0);
    masses.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (_, m) in &mut masses {
        *m /= w;
    }
    let density = density.filter(|_| dmass != 0.0).map(|f| f.scale(1.0 / w));
    Ok((
        Marginal::Continuous {
            var: v,
            masses,
            density,
        },
        w,
    ))
}

fn scalar(f: &PiecewiseFn) -> Result<f64> {
    f.scalar_value()
        .ok_or_else(|| Error::DomainMismatch(format!("density over {:?} left in a discrete marginal", f.vars())))
}

/// Mean and variance of a continuous marginal.
pub fn marginal_moments(m: &Marginal) -> Result<Moments> {
    let Marginal::Continuous { var, masses, density } = m else {
        return Err(Error::DomainMismatch("moments of a discrete variable".into()));
    };
    let mut m1: f64 = masses.iter().map(|(x, p)| x * p).sum();
    let mut m2: f64 = masses.iter().map(|(x, p)| x * x * p).sum();
    if let Some(f) = density {
        let mass = definite_integral(f)?;
        m1 += moment(f, *var, 1)? * mass;
        m2 += moment(f, *var, 2)? * mass;
    }
    Ok(Moments {
        mean: m1,
        variance: (m2 - m1 * m1).max(0.0),
    })
}
