use super::lp::max_slack;
use super::{LinExpr, Point, VarId, FEASIBILITY_TOL, ZERO_EPS};

/// `expr ≥ 0`, or `expr > 0` when `strict`.
///
/// Non-constant constraints are stored with a unit-norm coefficient vector,
/// so `expr(x)` is the signed distance of `x` from the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    expr: LinExpr,
    strict: bool,
}

impl Constraint {
    pub fn ge(expr: LinExpr) -> Self {
        Self::normalized(expr, false)
    }

    pub fn gt(expr: LinExpr) -> Self {
        Self::normalized(expr, true)
    }

    /// `lhs ≤ rhs` (or `<` when `strict`).
    pub fn le(lhs: LinExpr, rhs: LinExpr, strict: bool) -> Self {
        Self::normalized(rhs.sub(&lhs), strict)
    }

    fn normalized(expr: LinExpr, strict: bool) -> Self {
        let n = expr.norm();
        let expr = if n > 0.0 && n != 1.0 { expr.scale(1.0 / n) } else { expr };
        Constraint { expr, strict }
    }

    pub fn expr(&self) -> &LinExpr {
        &self.expr
    }

    pub fn is_strict(&self) -> bool {
        self.strict
    }

    /// The complementary half-space: `¬(e ≥ 0)` is `-e > 0`.
    pub fn negate(&self) -> Self {
        Constraint {
            expr: self.expr.scale(-1.0),
            strict: !self.strict,
        }
    }

    fn holds_at(&self, value: f64) -> bool {
        if self.strict {
            value > ZERO_EPS
        } else {
            value >= -ZERO_EPS
        }
    }

    pub fn holds<P: Point + ?Sized>(&self, point: &P) -> crate::Result<bool> {
        Ok(self.holds_at(self.expr.eval(point)?))
    }

    pub fn substitute(&self, v: VarId, e: &LinExpr) -> Self {
        Self::normalized(self.expr.substitute(v, e), self.strict)
    }

    fn constant_truth(&self) -> Option<bool> {
        self.expr
            .is_constant()
            .then(|| self.holds_at(self.expr.constant_term()))
    }
}

/// Intersection of half-spaces (a possibly unbounded polytope).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Region {
    constraints: Vec<Constraint>,
}

impl Region {
    /// The unconstrained region.
    pub fn whole() -> Self {
        Region::default()
    }

    pub fn new(constraints: impl IntoIterator<Item = Constraint>) -> Self {
        Region {
            constraints: constraints.into_iter().collect(),
        }
    }

    /// `lo ≤ v ≤ hi`, or `lo ≤ v < hi` when `open_upper`.
    pub fn interval(v: VarId, lo: f64, hi: f64, open_upper: bool) -> Self {
        Region::new([
            Constraint::ge(LinExpr::new([(v, 1.0)], -lo)),
            Constraint::normalized(LinExpr::new([(v, -1.0)], hi), open_upper),
        ])
    }

    /// Closed axis-aligned box.
    pub fn cube(bounds: &[(VarId, f64, f64)]) -> Self {
        let mut r = Region::whole();
        for &(v, lo, hi) in bounds {
            r = r.intersect(&Region::interval(v, lo, hi, false));
        }
        r
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn vars(&self) -> Vec<VarId> {
        let mut vs: Vec<VarId> = self.constraints.iter().flat_map(|c| c.expr.vars()).collect();
        vs.sort();
        vs.dedup();
        vs
    }

    pub fn contains<P: Point + ?Sized>(&self, point: &P) -> crate::Result<bool> {
        for c in &self.constraints {
            if !c.holds(point)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn with(&self, c: Constraint) -> Self {
        let mut out = self.clone();
        out.constraints.push(c);
        out
    }

    pub fn intersect(&self, other: &Region) -> Self {
        let mut out = self.clone();
        out.constraints.extend(other.constraints.iter().cloned());
        out
    }

    pub fn substitute(&self, v: VarId, e: &LinExpr) -> Self {
        Region {
            constraints: self.constraints.iter().map(|c| c.substitute(v, e)).collect(),
        }
    }

    /// Radius of the largest ball inside the region (capped at 1); negative
    /// when the region is empty.
    pub fn slack(&self) -> f64 {
        let vars = self.vars();
        let mut rows: Vec<(Vec<f64>, f64)> = Vec::with_capacity(self.constraints.len());
        for c in &self.constraints {
            match c.constant_truth() {
                Some(true) => continue,
                Some(false) => return f64::NEG_INFINITY,
                None => {}
            }
            let mut a = vec![0.0; vars.len()];
            for &(v, k) in c.expr.coeffs() {
                let j = vars.binary_search(&v).expect("var collected above");
                a[j] = k;
            }
            rows.push((a, c.expr.constant_term()));
        }
        if vars.is_empty() {
            return 1.0;
        }
        let view: Vec<(&[f64], f64)> = rows.iter().map(|(a, b)| (a.as_slice(), *b)).collect();
        max_slack(&view, vars.len())
    }

    /// True when the region has a non-empty interior.
    pub fn is_feasible(&self) -> bool {
        self.slack() > FEASIBILITY_TOL
    }

    /// Drops trivially true and redundant constraints; `None` if the region
    /// has empty interior.
    pub fn simplify(&self) -> Option<Region> {
        let mut kept: Vec<Constraint> = Vec::with_capacity(self.constraints.len());
        for c in &self.constraints {
            match c.constant_truth() {
                Some(true) => continue,
                Some(false) => return None,
                None => {}
            }
            // Parallel duplicates: keep the tighter one.
            if let Some(k) = kept.iter_mut().find(|k| same_normal(&k.expr, &c.expr)) {
                let (bk, bc) = (k.expr.constant_term(), c.expr.constant_term());
                if bc < bk - ZERO_EPS || ((bc - bk).abs() <= ZERO_EPS && c.strict) {
                    *k = c.clone();
                }
                continue;
            }
            kept.push(c.clone());
        }
        let region = Region { constraints: kept };
        if !region.is_feasible() {
            return None;
        }
        let nvars = region.vars().len();
        if region.constraints.len() <= nvars + 1 {
            return Some(region);
        }
        let mut cons = region.constraints;
        let mut i = 0;
        while i < cons.len() {
            let mut probe: Vec<Constraint> = Vec::with_capacity(cons.len());
            probe.extend(cons.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, c)| c.clone()));
            probe.push(cons[i].negate());
            if (Region { constraints: probe }).slack() <= FEASIBILITY_TOL {
                cons.remove(i);
            } else {
                i += 1;
            }
        }
        Some(Region { constraints: cons })
    }

    /// `self ∖ other` as a list of interior-disjoint feasible regions.
    pub fn subtract(&self, other: &Region) -> Vec<Region> {
        if !self.intersect(other).is_feasible() {
            return vec![self.clone()];
        }
        let mut out = Vec::new();
        let mut cur = self.clone();
        for c in &other.constraints {
            let outside = cur.with(c.negate());
            if let Some(r) = outside.simplify() {
                out.push(r);
                cur = cur.with(c.clone());
            }
        }
        out
    }

    /// For a region over a single variable `v`, its closed hull `[lo, hi]`
    /// (infinite ends allowed).
    pub fn interval_of(&self, v: VarId) -> Option<(f64, f64)> {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for c in &self.constraints {
            let e = &c.expr;
            if e.coeffs().iter().any(|(w, _)| *w != v) {
                return None;
            }
            let a = e.coeff(v);
            if a == 0.0 {
                if c.constant_truth() == Some(false) {
                    return None;
                }
                continue;
            }
            let root = -e.constant_term() / a;
            if a > 0.0 {
                lo = lo.max(root);
            } else {
                hi = hi.min(root);
            }
        }
        (lo < hi).then_some((lo, hi))
    }
}

fn same_normal(a: &LinExpr, b: &LinExpr) -> bool {
    a.coeffs().len() == b.coeffs().len()
        && a.coeffs()
            .iter()
            .zip(b.coeffs())
            .all(|((va, ca), (vb, cb))| va == vb && (ca - cb).abs() <= 1e-12)
}
