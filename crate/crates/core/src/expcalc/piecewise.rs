use super::dd::Dd;
use super::term::merge_terms;
use super::{union_vars, ExpPolyTerm, Limits, LinExpr, Point, Region, VarId};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub region: Region,
    pub terms: Vec<ExpPolyTerm>,
}

impl Piece {
    pub fn new(region: Region, terms: Vec<ExpPolyTerm>) -> Self {
        Piece { region, terms }
    }

    /// Sums in doubles first; heavy cancellation between terms triggers a
    /// second pass in double-double.
    fn value<P: Point + ?Sized>(&self, point: &P) -> Result<f64> {
        let mut acc = 0.0;
        let mut magnitude = 0.0;
        for t in &self.terms {
            let x = t.eval_fast(point)?;
            acc += x;
            magnitude += x.abs();
        }
        if magnitude <= 1e3 * acc.abs() || magnitude == 0.0 {
            return Ok(acc);
        }
        let mut acc = Dd::ZERO;
        for t in &self.terms {
            acc = acc + t.eval_dd(point)?;
        }
        Ok(acc.to_f64())
    }
}

/// A function that is a sum of exp-poly terms on each of a list of
/// interior-disjoint polytopes and zero elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseFn {
    vars: Vec<VarId>,
    pieces: Vec<Piece>,
}

impl PiecewiseFn {
    /// Builds a function, dropping pieces with empty interior and checking
    /// the capacity caps. Pieces are assumed interior-disjoint; see
    /// [`PiecewiseFn::check_disjoint`].
    pub fn new(vars: impl IntoIterator<Item = VarId>, pieces: Vec<Piece>) -> Result<Self> {
        let mut vars: Vec<VarId> = vars.into_iter().collect();
        vars.sort();
        vars.dedup();
        for p in &pieces {
            for v in p.region.vars().into_iter().chain(p.terms.iter().flat_map(|t| t.vars())) {
                if vars.binary_search(&v).is_err() {
                    return Err(Error::DomainMismatch(format!(
                        "piece mentions {v}, which is not among the function's variables"
                    )));
                }
            }
        }
        let pieces = pieces
            .into_iter()
            .filter_map(|p| {
                p.region.simplify().map(|region| Piece {
                    region,
                    terms: merge_terms(p.terms),
                })
            })
            .filter(|p| !p.terms.is_empty())
            .collect();
        Self::from_parts(vars, pieces)
    }

    pub(crate) fn from_parts(vars: Vec<VarId>, pieces: Vec<Piece>) -> Result<Self> {
        let f = PiecewiseFn { vars, pieces };
        f.check_caps()?;
        Ok(f)
    }

    /// The constant-one function over `vars`.
    pub fn identity(vars: impl IntoIterator<Item = VarId>) -> Self {
        let mut vars: Vec<VarId> = vars.into_iter().collect();
        vars.sort();
        vars.dedup();
        PiecewiseFn {
            vars,
            pieces: vec![Piece::new(Region::whole(), vec![ExpPolyTerm::constant(1.0)])],
        }
    }

    /// A function of no variables.
    pub fn scalar(c: f64) -> Self {
        let pieces = if c == 0.0 {
            Vec::new()
        } else {
            vec![Piece::new(Region::whole(), vec![ExpPolyTerm::constant(c)])]
        };
        PiecewiseFn {
            vars: Vec::new(),
            pieces,
        }
    }

    pub fn vars(&self) -> &[VarId] {
        &self.vars
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// True when the function has no pieces (identically zero).
    pub fn is_zero(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn piece_count(&self) -> usize {
        self.pieces.len()
    }

    pub fn contains_var(&self, v: VarId) -> bool {
        self.vars.binary_search(&v).is_ok()
    }

    pub fn degree(&self) -> u32 {
        self.pieces
            .iter()
            .flat_map(|p| p.terms.iter().map(|t| t.degree()))
            .max()
            .unwrap_or(0)
    }

    pub fn term_count(&self) -> usize {
        self.pieces.iter().map(|p| p.terms.len()).sum()
    }

    /// True when every term is a plain exponential (no monomial factor).
    pub fn is_pure_mte(&self) -> bool {
        self.pieces
            .iter()
            .all(|p| p.terms.iter().all(|t| t.powers().is_empty()))
    }

    /// Value of a function with no variables.
    pub fn scalar_value(&self) -> Option<f64> {
        if !self.vars.is_empty() {
            return None;
        }
        let sum = self
            .pieces
            .iter()
            .flat_map(|p| p.terms.iter().map(|t| t.coeff_dd()))
            .fold(Dd::ZERO, |a, c| a + c);
        Some(sum.to_f64())
    }

    pub fn evaluate<P: Point + ?Sized>(&self, point: &P) -> Result<f64> {
        if let Some(&v) = self.vars.iter().find(|&&v| point.value(v).is_none()) {
            return Err(Error::InvalidPoint(v));
        }
        for p in &self.pieces {
            if p.region.contains(point)? {
                return p.value(point);
            }
        }
        Ok(0.0)
    }

    pub fn scale(&self, k: f64) -> Self {
        if k == 0.0 {
            return PiecewiseFn {
                vars: self.vars.clone(),
                pieces: Vec::new(),
            };
        }
        PiecewiseFn {
            vars: self.vars.clone(),
            pieces: self
                .pieces
                .iter()
                .map(|p| Piece::new(p.region.clone(), p.terms.iter().map(|t| t.scale(k)).collect()))
                .collect(),
        }
    }

    /// The same function, declared over additional variables it does not
    /// depend on.
    pub fn extend_vars(&self, extra: &[VarId]) -> Result<Self> {
        Self::from_parts(union_vars(&self.vars, extra), self.pieces.clone())
    }

    /// Fixes `v` to a value (substitution of a constant).
    pub fn restrict(&self, v: VarId, value: f64) -> Result<Self> {
        substitute_linear(self, v, &LinExpr::constant(value))
    }

    /// Pairwise check that piece interiors do not overlap.
    pub fn check_disjoint(&self) -> bool {
        for i in 0..self.pieces.len() {
            for j in i + 1..self.pieces.len() {
                if self.pieces[i].region.intersect(&self.pieces[j].region).is_feasible() {
                    return false;
                }
            }
        }
        true
    }

    fn check_caps(&self) -> Result<()> {
        let lim = Limits::current();
        if self.vars.len() > lim.max_vars {
            return Err(Error::CapacityExceeded(format!(
                "{} variables in one function (cap {})",
                self.vars.len(),
                lim.max_vars
            )));
        }
        if self.pieces.len() > lim.max_pieces {
            return Err(Error::CapacityExceeded(format!(
                "{} pieces (cap {})",
                self.pieces.len(),
                lim.max_pieces
            )));
        }
        let deg = self.degree() as usize;
        if deg > lim.max_degree {
            return Err(Error::CapacityExceeded(format!(
                "polynomial degree {deg} (cap {})",
                lim.max_degree
            )));
        }
        Ok(())
    }
}

/// Pointwise product.
pub fn multiply(f: &PiecewiseFn, g: &PiecewiseFn) -> Result<PiecewiseFn> {
    let vars = union_vars(&f.vars, &g.vars);
    let limit = Limits::current().max_pieces;
    let mut pieces = Vec::new();
    for pf in &f.pieces {
        for pg in &g.pieces {
            let Some(region) = intersect_regions(&pf.region, &pg.region) else {
                continue;
            };
            let mut terms = Vec::with_capacity(pf.terms.len() * pg.terms.len());
            for a in &pf.terms {
                for b in &pg.terms {
                    terms.push(a.mul(b));
                }
            }
            let terms = merge_terms(terms);
            if !terms.is_empty() {
                pieces.push(Piece::new(region, terms));
                if pieces.len() > limit {
                    return Err(Error::CapacityExceeded(format!("more than {limit} pieces in product")));
                }
            }
        }
    }
    PiecewiseFn::from_parts(vars, pieces)
}

fn intersect_regions(a: &Region, b: &Region) -> Option<Region> {
    if a.constraints().is_empty() {
        return Some(b.clone());
    }
    if b.constraints().is_empty() || a == b {
        return Some(a.clone());
    }
    a.intersect(b).simplify()
}

/// `Σ wᵢ·fᵢ` on a common interior-disjoint arrangement.
pub fn weighted_sum(terms: &[(f64, &PiecewiseFn)]) -> Result<PiecewiseFn> {
    let Some((_, first)) = terms.first() else {
        return Err(Error::DomainMismatch("empty weighted sum".into()));
    };
    let vars = first.vars.clone();
    if let Some((_, bad)) = terms.iter().find(|(_, f)| f.vars != vars) {
        return Err(Error::DomainMismatch(format!(
            "weighted sum over {:?} and {:?}",
            vars, bad.vars
        )));
    }
    let groups: Vec<Vec<Piece>> = terms
        .iter()
        .filter(|(w, _)| *w != 0.0)
        .map(|(w, f)| f.scale(*w).pieces)
        .collect();
    let pieces = overlay_sum(groups)?;
    PiecewiseFn::from_parts(vars, pieces)
}

/// Sums groups of pieces; pieces within each group must be interior-disjoint.
pub(crate) fn overlay_sum(groups: Vec<Vec<Piece>>) -> Result<Vec<Piece>> {
    let limit = Limits::current().max_pieces;
    let mut iter = groups.into_iter();
    let mut acc = iter.next().unwrap_or_default();
    for group in iter {
        acc = overlay_group(acc, group);
        if acc.len() > limit {
            return Err(Error::CapacityExceeded(format!("more than {limit} pieces in sum")));
        }
    }
    Ok(acc
        .into_iter()
        .map(|p| Piece::new(p.region, merge_terms(p.terms)))
        .filter(|p| !p.terms.is_empty())
        .collect())
}

fn overlay_group(acc: Vec<Piece>, group: Vec<Piece>) -> Vec<Piece> {
    let mut out = Vec::with_capacity(acc.len() + group.len());
    // Parts of each group piece not yet covered by `acc`.
    let mut uncovered: Vec<Vec<Region>> = group.iter().map(|g| vec![g.region.clone()]).collect();
    for a in acc {
        let mut remaining = vec![a.region.clone()];
        for (gi, g) in group.iter().enumerate() {
            if remaining.is_empty() {
                break;
            }
            if a.region == g.region {
                let mut terms = a.terms.clone();
                terms.extend(g.terms.iter().cloned());
                out.push(Piece::new(a.region.clone(), terms));
                remaining.clear();
                uncovered[gi].clear();
                continue;
            }
            let mut next = Vec::new();
            let mut touched = false;
            for r in remaining {
                match intersect_regions(&r, &g.region) {
                    Some(inter) => {
                        touched = true;
                        let mut terms = a.terms.clone();
                        terms.extend(g.terms.iter().cloned());
                        out.push(Piece::new(inter, terms));
                        next.extend(r.subtract(&g.region));
                    }
                    None => next.push(r),
                }
            }
            remaining = next;
            if touched {
                uncovered[gi] = uncovered[gi].iter().flat_map(|u| u.subtract(&a.region)).collect();
            }
        }
        out.extend(remaining.into_iter().map(|r| Piece::new(r, a.terms.clone())));
    }
    for (g, rest) in group.into_iter().zip(uncovered) {
        out.extend(rest.into_iter().map(|r| Piece::new(r, g.terms.clone())));
    }
    out
}

/// Replaces `v` everywhere (regions, rates and monomials) by `e`.
pub fn substitute_linear(f: &PiecewiseFn, v: VarId, e: &LinExpr) -> Result<PiecewiseFn> {
    if e.contains(v) {
        return Err(Error::DomainMismatch(format!(
            "substitution for {v} mentions {v} itself"
        )));
    }
    let mut vars: Vec<VarId> = f.vars.iter().copied().filter(|&w| w != v).collect();
    vars.extend(e.vars());
    vars.sort();
    vars.dedup();
    let mut pieces = Vec::with_capacity(f.pieces.len());
    for p in &f.pieces {
        let Some(region) = p.region.substitute(v, e).simplify() else {
            continue;
        };
        let terms = merge_terms(p.terms.iter().flat_map(|t| t.substitute(v, e)).collect());
        if !terms.is_empty() {
            pieces.push(Piece::new(region, terms));
        }
    }
    PiecewiseFn::from_parts(vars, pieces)
}
