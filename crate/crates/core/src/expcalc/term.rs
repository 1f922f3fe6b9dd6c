use std::cmp::Ordering;
use std::collections::BTreeMap;

use super::dd::Dd;
use super::{LinExpr, Point, VarId};

/// `coeff · Π vⱼ^kⱼ · exp(Σ rateⱼ·vⱼ)`.
///
/// Coefficient and rates are kept in double-double precision; the public
/// accessors round them. A constant in the exponent is folded into the
/// coefficient on construction, so like terms can be merged by comparing
/// rates only.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpPolyTerm {
    coeff: Dd,
    powers: Monomial,
    rates: Vec<(VarId, Dd)>,
}

type Monomial = Vec<(VarId, u32)>;

/// Rates closer than this (relative) are the same rate reached along
/// different rounding paths.
const RATE_MERGE_TOL: f64 = 1e-26;

fn sorted_powers(powers: impl IntoIterator<Item = (VarId, u32)>) -> Monomial {
    let mut pw: Monomial = powers.into_iter().filter(|(_, k)| *k > 0).collect();
    pw.sort_by_key(|(v, _)| *v);
    let mut merged: Monomial = Vec::with_capacity(pw.len());
    for (v, k) in pw {
        match merged.last_mut() {
            Some((lv, lk)) if *lv == v => *lk += k,
            _ => merged.push((v, k)),
        }
    }
    merged
}

fn sorted_rates(rates: impl IntoIterator<Item = (VarId, Dd)>) -> Vec<(VarId, Dd)> {
    let mut rs: Vec<(VarId, Dd)> = rates.into_iter().collect();
    rs.sort_by_key(|(v, _)| *v);
    let mut merged: Vec<(VarId, Dd)> = Vec::with_capacity(rs.len());
    for (v, r) in rs {
        match merged.last_mut() {
            Some((lv, lr)) if *lv == v => *lr = *lr + r,
            _ => merged.push((v, r)),
        }
    }
    merged.retain(|(_, r)| !r.is_zero());
    merged
}

impl ExpPolyTerm {
    pub fn new(coeff: f64, powers: impl IntoIterator<Item = (VarId, u32)>, exponent: LinExpr) -> Self {
        let k = exponent.constant_term();
        let coeff = if k != 0.0 {
            Dd::new(k).exp().mul_f64(coeff)
        } else {
            Dd::new(coeff)
        };
        ExpPolyTerm {
            coeff,
            powers: sorted_powers(powers),
            rates: sorted_rates(exponent.coeffs().iter().map(|&(v, r)| (v, Dd::new(r)))),
        }
    }

    pub(crate) fn from_parts(
        coeff: Dd,
        powers: impl IntoIterator<Item = (VarId, u32)>,
        rates: impl IntoIterator<Item = (VarId, Dd)>,
    ) -> Self {
        ExpPolyTerm {
            coeff,
            powers: sorted_powers(powers),
            rates: sorted_rates(rates),
        }
    }

    pub fn constant(c: f64) -> Self {
        ExpPolyTerm {
            coeff: Dd::new(c),
            powers: Vec::new(),
            rates: Vec::new(),
        }
    }

    /// `coeff · exp(rate·v)`
    pub fn exp(coeff: f64, v: VarId, rate: f64) -> Self {
        Self::new(coeff, [], LinExpr::new([(v, rate)], 0.0))
    }

    pub fn coeff(&self) -> f64 {
        self.coeff.to_f64()
    }

    pub(crate) fn coeff_dd(&self) -> Dd {
        self.coeff
    }

    pub fn powers(&self) -> &[(VarId, u32)] {
        &self.powers
    }

    /// The exponent, rounded to doubles.
    pub fn exponent(&self) -> LinExpr {
        LinExpr::new(self.rates.iter().map(|(v, r)| (*v, r.to_f64())), 0.0)
    }

    pub fn rate(&self, v: VarId) -> f64 {
        self.rate_dd(v).to_f64()
    }

    pub(crate) fn rate_dd(&self, v: VarId) -> Dd {
        self.rates
            .iter()
            .find(|(w, _)| *w == v)
            .map(|(_, r)| *r)
            .unwrap_or(Dd::ZERO)
    }

    pub(crate) fn rates_without(&self, v: VarId) -> impl Iterator<Item = (VarId, Dd)> + '_ {
        self.rates.iter().copied().filter(move |(w, _)| *w != v)
    }

    pub fn power_of(&self, v: VarId) -> u32 {
        self.powers.iter().find(|(w, _)| *w == v).map(|(_, k)| *k).unwrap_or(0)
    }

    pub fn degree(&self) -> u32 {
        self.powers.iter().map(|(_, k)| k).sum()
    }

    pub fn vars(&self) -> Vec<VarId> {
        let mut vs: Vec<VarId> = self
            .powers
            .iter()
            .map(|(v, _)| *v)
            .chain(self.rates.iter().map(|(v, _)| *v))
            .collect();
        vs.sort();
        vs.dedup();
        vs
    }

    pub fn eval<P: Point + ?Sized>(&self, point: &P) -> crate::Result<f64> {
        Ok(self.eval_dd(point)?.to_f64())
    }

    /// Plain double evaluation; cheap, but only as good as the rounding of
    /// the coefficient and rates.
    pub(crate) fn eval_fast<P: Point + ?Sized>(&self, point: &P) -> crate::Result<f64> {
        let mut acc = self.coeff.hi();
        for &(v, k) in &self.powers {
            acc *= value(point, v)?.powi(k as i32);
        }
        if !self.rates.is_empty() {
            let mut e = 0.0;
            for (v, r) in &self.rates {
                e += r.hi() * value(point, *v)?;
            }
            acc *= e.exp();
        }
        Ok(acc)
    }

    pub(crate) fn eval_dd<P: Point + ?Sized>(&self, point: &P) -> crate::Result<Dd> {
        let mut acc = self.coeff;
        for &(v, k) in &self.powers {
            acc = acc * Dd::new(value(point, v)?).powi(k);
        }
        if !self.rates.is_empty() {
            let mut e = Dd::ZERO;
            for (v, r) in &self.rates {
                e = e + r.mul_f64(value(point, *v)?);
            }
            acc = acc * e.exp();
        }
        Ok(acc)
    }

    pub fn scale(&self, k: f64) -> Self {
        self.scale_dd(Dd::new(k))
    }

    pub(crate) fn scale_dd(&self, k: Dd) -> Self {
        ExpPolyTerm {
            coeff: self.coeff * k,
            powers: self.powers.clone(),
            rates: self.rates.clone(),
        }
    }

    pub fn mul(&self, other: &ExpPolyTerm) -> Self {
        ExpPolyTerm {
            coeff: self.coeff * other.coeff,
            powers: sorted_powers(self.powers.iter().chain(&other.powers).copied()),
            rates: sorted_rates(self.rates.iter().chain(&other.rates).copied()),
        }
    }

    /// Multiplies by `v^k`.
    pub fn times_power(&self, v: VarId, k: u32) -> Self {
        ExpPolyTerm {
            coeff: self.coeff,
            powers: sorted_powers(self.powers.iter().copied().chain([(v, k)])),
            rates: self.rates.clone(),
        }
    }

    /// Replaces `v` by `e`; a monomial power of `v` expands into several
    /// terms.
    pub fn substitute(&self, v: VarId, e: &LinExpr) -> Vec<ExpPolyTerm> {
        let k = self.power_of(v);
        let base_powers: Monomial = self.powers.iter().copied().filter(|(w, _)| *w != v).collect();
        let a = self.rate_dd(v);
        let rates = sorted_rates(
            self.rates_without(v)
                .chain(e.coeffs().iter().map(|&(w, c)| (w, a.mul_f64(c)))),
        );
        let shift = a.mul_f64(e.constant_term());
        let coeff = if shift.is_zero() {
            self.coeff
        } else {
            self.coeff * shift.exp()
        };
        if k == 0 {
            return vec![ExpPolyTerm {
                coeff,
                powers: base_powers,
                rates,
            }];
        }
        linear_power(e, k)
            .into_iter()
            .map(|(mono, c)| ExpPolyTerm {
                coeff: coeff * c,
                powers: sorted_powers(base_powers.iter().copied().chain(mono)),
                rates: rates.clone(),
            })
            .collect()
    }

    fn merge_key_cmp(&self, other: &Self) -> Ordering {
        self.powers.cmp(&other.powers).then_with(|| {
            for (x, y) in self.rates.iter().zip(&other.rates) {
                let o = x.0.cmp(&y.0).then(x.1.hi().total_cmp(&y.1.hi()));
                if o != Ordering::Equal {
                    return o;
                }
            }
            self.rates.len().cmp(&other.rates.len())
        })
    }

    fn mergeable(&self, other: &Self) -> bool {
        self.powers == other.powers
            && self.rates.len() == other.rates.len()
            && self.rates.iter().zip(&other.rates).all(|((v, a), (w, b))| {
                v == w && (*a - *b).abs().to_f64() <= RATE_MERGE_TOL * a.abs().to_f64().max(1.0)
            })
    }
}

fn value<P: Point + ?Sized>(point: &P, v: VarId) -> crate::Result<f64> {
    point.value(v).ok_or(crate::Error::InvalidPoint(v))
}

/// Expands `(e)^k` into monomials.
fn linear_power(e: &LinExpr, k: u32) -> Vec<(Monomial, Dd)> {
    let mut base: Vec<(Monomial, f64)> = e.coeffs().iter().map(|&(v, c)| (vec![(v, 1)], c)).collect();
    if e.constant_term() != 0.0 {
        base.push((Vec::new(), e.constant_term()));
    }
    let mut acc: BTreeMap<Monomial, Dd> = BTreeMap::new();
    acc.insert(Vec::new(), Dd::ONE);
    for _ in 0..k {
        let mut next: BTreeMap<Monomial, Dd> = BTreeMap::new();
        for (m, c) in &acc {
            for (bm, bc) in &base {
                let mut prod = m.clone();
                for &(v, p) in bm {
                    match prod.iter_mut().find(|(w, _)| *w == v) {
                        Some((_, q)) => *q += p,
                        None => prod.push((v, p)),
                    }
                }
                prod.sort_by_key(|(v, _)| *v);
                let slot = next.entry(prod).or_insert(Dd::ZERO);
                *slot = *slot + c.mul_f64(*bc);
            }
        }
        acc = next;
    }
    acc.into_iter().filter(|(_, c)| !c.is_zero()).collect()
}

/// Sums like terms (same monomial and rates) and drops zeros.
pub(crate) fn merge_terms(mut terms: Vec<ExpPolyTerm>) -> Vec<ExpPolyTerm> {
    terms.sort_by(|a, b| a.merge_key_cmp(b));
    let mut out: Vec<ExpPolyTerm> = Vec::with_capacity(terms.len());
    for t in terms {
        if t.coeff.is_zero() {
            continue;
        }
        match out.last_mut() {
            Some(last) if last.mergeable(&t) => last.coeff = last.coeff + t.coeff,
            _ => out.push(t),
        }
    }
    out.retain(|t| !t.coeff.is_zero());
    out
}
