use super::dd::Dd;
use super::piecewise::overlay_sum;
use super::term::merge_terms;
use super::{Constraint, ExpPolyTerm, Limits, LinExpr, Piece, PiecewiseFn, Region, VarId, ZERO_EPS};
use crate::{Error, Result};

/// `∫ f dv` over the whole real line, as a function of the other variables.
pub fn eliminate_integrate(f: &PiecewiseFn, v: VarId) -> Result<PiecewiseFn> {
    if !f.contains_var(v) {
        return Err(Error::DomainMismatch(format!("{v} is not a variable of the integrand")));
    }
    let vars: Vec<VarId> = f.vars().iter().copied().filter(|&w| w != v).collect();
    let limit = Limits::current().max_pieces;
    let mut groups = Vec::with_capacity(f.piece_count());
    let mut total = 0usize;
    for piece in f.pieces() {
        let cells = integrate_piece(piece, v)?;
        total += cells.len();
        if total > limit {
            return Err(Error::CapacityExceeded(format!(
                "more than {limit} cells while integrating out {v}"
            )));
        }
        groups.push(cells);
    }
    let pieces = overlay_sum(groups)?;
    PiecewiseFn::from_parts(vars, pieces)
}

/// Integrates out every variable.
pub fn definite_integral(f: &PiecewiseFn) -> Result<f64> {
    let mut g = f.clone();
    // Innermost first: later variables tend to be children, whose bounds
    // depend on earlier ones after substitution.
    for &v in f.vars().iter().rev() {
        g = eliminate_integrate(&g, v)?;
    }
    Ok(g.scalar_value().unwrap_or(0.0))
}

/// `∫ vᵏ f / ∫ f` for a univariate `f`.
pub fn moment(f: &PiecewiseFn, v: VarId, order: u32) -> Result<f64> {
    if f.vars() != [v] {
        return Err(Error::DomainMismatch(format!(
            "moment needs a function of {v} alone, got {:?}",
            f.vars()
        )));
    }
    let mass = definite_integral(f)?;
    if mass.is_nan() || mass.abs() <= ZERO_EPS {
        return Err(Error::DegenerateDensity);
    }
    if order == 0 {
        return Ok(1.0);
    }
    let weighted = PiecewiseFn::from_parts(
        f.vars().to_vec(),
        f.pieces()
            .iter()
            .map(|p| {
                Piece::new(
                    p.region.clone(),
                    p.terms.iter().map(|t| t.times_power(v, order)).collect(),
                )
            })
            .collect(),
    )?;
    Ok(definite_integral(&weighted)? / mass)
}

fn integrate_piece(piece: &Piece, v: VarId) -> Result<Vec<Piece>> {
    let mut base = Vec::new();
    let mut lowers: Vec<LinExpr> = Vec::new();
    let mut uppers: Vec<LinExpr> = Vec::new();
    for c in piece.region.constraints() {
        let e = c.expr();
        let a = e.coeff(v);
        if a == 0.0 {
            base.push(c.clone());
            continue;
        }
        // a·v + r ≥ 0  ->  v ≥ -r/a (a > 0) or v ≤ -r/a (a < 0)
        let bound = e.without(v).scale(-1.0 / a);
        if a > 0.0 {
            lowers.push(bound);
        } else {
            uppers.push(bound);
        }
    }

    let antider: Vec<(Vec<ExpPolyTerm>, f64)> = piece.terms.iter().map(|t| antiderivative(t, v)).collect();
    if lowers.is_empty() && antider.iter().any(|(_, a)| *a <= ZERO_EPS) {
        return Err(Error::DivergentIntegral(v));
    }
    if uppers.is_empty() && antider.iter().any(|(_, a)| *a >= -ZERO_EPS) {
        return Err(Error::DivergentIntegral(v));
    }

    let lower_opts: Vec<Option<usize>> = if lowers.is_empty() {
        vec![None]
    } else {
        (0..lowers.len()).map(Some).collect()
    };
    let upper_opts: Vec<Option<usize>> = if uppers.is_empty() {
        vec![None]
    } else {
        (0..uppers.len()).map(Some).collect()
    };

    let mut cells = Vec::new();
    for &li in &lower_opts {
        for &uj in &upper_opts {
            let mut cons = base.clone();
            if let Some(i) = li {
                push_active(&mut cons, &lowers, i, 1.0);
            }
            if let Some(j) = uj {
                push_active(&mut cons, &uppers, j, -1.0);
            }
            if let (Some(i), Some(j)) = (li, uj) {
                cons.push(Constraint::ge(uppers[j].sub(&lowers[i])));
            }
            let Some(region) = Region::new(cons).simplify() else {
                continue;
            };
            let fixed = match (li, uj) {
                (Some(i), Some(j)) if lowers[i].is_constant() && uppers[j].is_constant() => {
                    Some((lowers[i].constant_term(), uppers[j].constant_term()))
                }
                _ => None,
            };
            let mut terms = Vec::new();
            if let Some((lo, hi)) = fixed {
                terms.extend(piece.terms.iter().map(|t| definite_term(t, v, lo, hi)));
                let terms = merge_terms(terms);
                if !terms.is_empty() {
                    cells.push(Piece::new(region, terms));
                }
                continue;
            }
            for (parts, _) in &antider {
                for t in parts {
                    if let Some(j) = uj {
                        terms.extend(t.substitute(v, &uppers[j]));
                    }
                    if let Some(i) = li {
                        terms.extend(t.substitute(v, &lowers[i]).into_iter().map(|s| s.scale(-1.0)));
                    }
                }
            }
            let terms = merge_terms(terms);
            if !terms.is_empty() {
                cells.push(Piece::new(region, terms));
            }
        }
    }
    Ok(cells)
}

/// Conditions under which bound `k` of `bounds` is the active one (the max
/// for lower bounds, `sign = 1`; the min for upper bounds, `sign = -1`).
/// Ties go to the lowest index so the cells partition the space.
fn push_active(cons: &mut Vec<Constraint>, bounds: &[LinExpr], k: usize, sign: f64) {
    for (m, other) in bounds.iter().enumerate() {
        if m == k {
            continue;
        }
        let diff = bounds[k].sub(other).scale(sign);
        cons.push(if m < k {
            Constraint::gt(diff)
        } else {
            Constraint::ge(diff)
        });
    }
}

/// `∫_lo^hi t dv` for constant bounds. The closed form loses everything to
/// cancellation when the rate is tiny next to the bounds, so small `a·v`
/// goes through the power series of the exponential instead.
fn definite_term(t: &ExpPolyTerm, v: VarId, lo: f64, hi: f64) -> ExpPolyTerm {
    let m = t.power_of(v);
    let a = t.rate_dd(v);
    let rest: Vec<(VarId, u32)> = t.powers().iter().copied().filter(|(w, _)| *w != v).collect();
    let (dlo, dhi) = (Dd::new(lo), Dd::new(hi));
    let reach = lo.abs().max(hi.abs());
    let value = if a.abs().to_f64() * reach <= 1.0 {
        let mut sum = Dd::ZERO;
        let mut scale = Dd::ONE; // aⁿ/n!
        for n in 0..200u32 {
            let k = m + n + 1;
            let part = (scale * (dhi.powi(k) - dlo.powi(k))) / Dd::new(f64::from(k));
            sum = sum + part;
            if n > 0 && part.abs().to_f64() <= 1e-33 * sum.abs().to_f64() || scale.is_zero() {
                break;
            }
            scale = (scale * a) / Dd::new(f64::from(n + 1));
        }
        sum
    } else {
        let inv = a.recip();
        let at = |x: Dd| {
            let mut acc = Dd::ZERO;
            let mut falling = 1.0;
            let mut inv_pow = inv;
            for k in 0..=m {
                if k > 0 {
                    falling *= f64::from(m - k + 1);
                    inv_pow = inv_pow * inv;
                }
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                acc = acc + (x.powi(m - k) * inv_pow).mul_f64(sign * falling);
            }
            acc * (a * x).exp()
        };
        at(dhi) - at(dlo)
    };
    ExpPolyTerm::from_parts(t.coeff_dd() * value, rest, t.rates_without(v))
}

/// Antiderivative in `v` of a single term, together with the term's rate in
/// `v`.
fn antiderivative(t: &ExpPolyTerm, v: VarId) -> (Vec<ExpPolyTerm>, f64) {
    let m = t.power_of(v);
    let a = t.rate_dd(v);
    let rest: Vec<(VarId, u32)> = t.powers().iter().copied().filter(|(w, _)| *w != v).collect();
    if a.abs().to_f64() < ZERO_EPS {
        let term = ExpPolyTerm::from_parts(
            t.coeff_dd() / Dd::new(f64::from(m + 1)),
            rest.into_iter().chain([(v, m + 1)]),
            t.rates_without(v),
        );
        return (vec![term], 0.0);
    }
    // ∫ v^m e^{av} = e^{av} Σ_k (-1)^k m!/(m-k)! v^{m-k} / a^{k+1}
    let inv = a.recip();
    let rates: Vec<(VarId, Dd)> = t.rates_without(v).chain([(v, a)]).collect();
    let mut out = Vec::with_capacity(m as usize + 1);
    let mut falling = 1.0;
    let mut inv_pow = inv;
    for k in 0..=m {
        if k > 0 {
            falling *= f64::from(m - k + 1);
            inv_pow = inv_pow * inv;
        }
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        out.push(ExpPolyTerm::from_parts(
            (t.coeff_dd() * inv_pow).mul_f64(sign * falling),
            rest.iter().copied().chain([(v, m - k)]),
            rates.iter().copied(),
        ));
    }
    (out, a.to_f64())
}
