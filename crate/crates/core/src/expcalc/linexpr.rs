use std::fmt;

use super::{Point, VarId, ZERO_EPS};

/// Affine form `Σ cᵢ·vᵢ + constant`.
///
/// Entries are kept sorted by variable and coefficients with magnitude below
/// [`ZERO_EPS`] are dropped, so two forms over the same variables compare
/// structurally.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinExpr {
    coeffs: Vec<(VarId, f64)>,
    constant: f64,
}

impl LinExpr {
    pub fn new(coeffs: impl IntoIterator<Item = (VarId, f64)>, constant: f64) -> Self {
        let mut raw: Vec<(VarId, f64)> = coeffs.into_iter().collect();
        raw.sort_by_key(|(v, _)| *v);
        let mut out: Vec<(VarId, f64)> = Vec::with_capacity(raw.len());
        for (v, c) in raw {
            match out.last_mut() {
                Some((lv, lc)) if *lv == v => *lc += c,
                _ => out.push((v, c)),
            }
        }
        out.retain(|(_, c)| c.abs() >= ZERO_EPS);
        LinExpr { coeffs: out, constant }
    }

    pub fn constant(c: f64) -> Self {
        LinExpr {
            coeffs: Vec::new(),
            constant: c,
        }
    }

    pub fn var(v: VarId) -> Self {
        LinExpr {
            coeffs: vec![(v, 1.0)],
            constant: 0.0,
        }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn coeffs(&self) -> &[(VarId, f64)] {
        &self.coeffs
    }

    pub fn constant_term(&self) -> f64 {
        self.constant
    }

    pub fn coeff(&self, v: VarId) -> f64 {
        self.coeffs
            .binary_search_by_key(&v, |(w, _)| *w)
            .map(|i| self.coeffs[i].1)
            .unwrap_or(0.0)
    }

    pub fn contains(&self, v: VarId) -> bool {
        self.coeffs.binary_search_by_key(&v, |(w, _)| *w).is_ok()
    }

    pub fn vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.coeffs.iter().map(|(v, _)| *v)
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Euclidean norm of the coefficient vector (the constant is ignored).
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|(_, c)| c * c).sum::<f64>().sqrt()
    }

    pub fn eval<P: Point + ?Sized>(&self, point: &P) -> crate::Result<f64> {
        let mut acc = self.constant;
        for &(v, c) in &self.coeffs {
            let x = point.value(v).ok_or(crate::Error::InvalidPoint(v))?;
            acc += c * x;
        }
        Ok(acc)
    }

    pub fn scale(&self, k: f64) -> Self {
        LinExpr::new(self.coeffs.iter().map(|&(v, c)| (v, c * k)), self.constant * k)
    }

    pub fn add(&self, other: &LinExpr) -> Self {
        LinExpr::new(
            self.coeffs.iter().chain(other.coeffs.iter()).copied(),
            self.constant + other.constant,
        )
    }

    pub fn sub(&self, other: &LinExpr) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn add_constant(&self, c: f64) -> Self {
        LinExpr {
            coeffs: self.coeffs.clone(),
            constant: self.constant + c,
        }
    }

    /// The form with `v`'s coefficient removed.
    pub fn without(&self, v: VarId) -> Self {
        LinExpr {
            coeffs: self.coeffs.iter().copied().filter(|(w, _)| *w != v).collect(),
            constant: self.constant,
        }
    }

    /// Replaces `v` by the form `e`.
    pub fn substitute(&self, v: VarId, e: &LinExpr) -> Self {
        let c = self.coeff(v);
        if c == 0.0 {
            return self.clone();
        }
        self.without(v).add(&e.scale(c))
    }

    /// Solves `self = 0` for `v`, returning the form in the remaining
    /// variables. `None` when `v`'s coefficient is below [`ZERO_EPS`].
    pub fn solve_for(&self, v: VarId) -> Option<LinExpr> {
        let c = self.coeff(v);
        if c.abs() < ZERO_EPS {
            return None;
        }
        Some(self.without(v).scale(-1.0 / c))
    }

    /// Renames variables through `f`.
    pub fn map_vars(&self, mut f: impl FnMut(VarId) -> VarId) -> Self {
        LinExpr::new(self.coeffs.iter().map(|&(v, c)| (f(v), c)), self.constant)
    }

    /// True when both forms agree coefficient-wise within `tol`.
    pub fn approx_eq(&self, other: &LinExpr, tol: f64) -> bool {
        let mut vars: Vec<VarId> = self.vars().chain(other.vars()).collect();
        vars.sort();
        vars.dedup();
        vars.iter().all(|&v| (self.coeff(v) - other.coeff(v)).abs() <= tol)
            && (self.constant - other.constant).abs() <= tol
    }

    /// Equality up to a non-zero scalar multiple: both sides are scaled so
    /// their largest-magnitude coefficient is positive one before comparing.
    pub fn proportional_to(&self, other: &LinExpr, tol: f64) -> bool {
        let norm = |e: &LinExpr| {
            let (_, c) = e
                .coeffs
                .iter()
                .copied()
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
                .unwrap_or((VarId(0), if e.constant == 0.0 { 1.0 } else { e.constant }));
            e.scale(1.0 / c)
        };
        norm(self).approx_eq(&norm(other), tol)
    }

    /// Formats with a caller-supplied variable namer.
    pub fn display_with<'a>(&'a self, names: &'a dyn Fn(VarId) -> String) -> LinExprDisplay<'a> {
        LinExprDisplay { expr: self, names }
    }
}

pub struct LinExprDisplay<'a> {
    expr: &'a LinExpr,
    names: &'a dyn Fn(VarId) -> String,
}

impl fmt::Display for LinExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for &(v, c) in &self.expr.coeffs {
            let name = (self.names)(v);
            let (sign, mag) = if c < 0.0 { ("-", -c) } else { ("+", c) };
            if first {
                if sign == "-" {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            if mag == 1.0 {
                write!(f, "{name}")?;
            } else {
                write!(f, "{mag}*{name}")?;
            }
            first = false;
        }
        let k = self.expr.constant;
        if first {
            write!(f, "{k}")?;
        } else if k != 0.0 {
            if k < 0.0 {
                write!(f, " - {}", -k)?;
            } else {
                write!(f, " + {k}")?;
            }
        }
        Ok(())
    }
}

impl fmt::Display for LinExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names = |v: VarId| v.to_string();
        write!(f, "{}", self.display_with(&names))
    }
}
