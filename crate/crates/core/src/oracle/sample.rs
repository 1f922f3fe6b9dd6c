use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::expcalc::{ExpPolyTerm, PiecewiseFn, VarId};
use crate::model::{compile_density, Cpd, Network};
use crate::{Error, Result};

use super::{case_index, table_row};

/// One row per draw, one column per variable (by id). Discrete columns hold
/// the state index.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    pub rows: Vec<Vec<f64>>,
}

impl SampleMatrix {
    pub fn column(&self, v: VarId) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(move |r| r[v.0 as usize])
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Ancestral sampling from the prior. Continuous variables are drawn by
/// inverting the piecewise CDF of their conditional density.
pub fn forward_sample(n: &Network, count: usize, seed: u64) -> Result<SampleMatrix> {
    let order = n
        .topological_order()
        .ok_or_else(|| Error::InvalidModel("the parent graph has a cycle".into()))?;
    let compiled: Vec<Vec<PiecewiseFn>> = n
        .ids()
        .map(|w| match n.cpd(w) {
            Cpd::Density(cases) => cases.iter().map(|d| compile_density(n, w, d)).collect(),
            _ => Ok(Vec::new()),
        })
        .collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(count);
    let mut states = vec![0usize; n.len()];
    for _ in 0..count {
        let mut row = vec![0.0; n.len()];
        for &w in &order {
            let i = w.0 as usize;
            match n.cpd(w) {
                Cpd::Table(_) => {
                    let probs = table_row(n, w, &states);
                    let u: f64 = rng.gen();
                    let mut acc = 0.0;
                    let mut s = probs.len() - 1;
                    for (k, p) in probs.iter().enumerate() {
                        acc += p;
                        if u < acc {
                            s = k;
                            break;
                        }
                    }
                    states[i] = s;
                    row[i] = s as f64;
                }
                Cpd::Density(_) => {
                    let mut f = compiled[i][case_index(n, w, &states)].clone();
                    for p in n.continuous_parents(w) {
                        f = f.restrict(p, row[p.0 as usize])?;
                    }
                    row[i] = inverse_cdf(&f, w, rng.gen())?;
                }
                Cpd::Equations(cases) => {
                    let lhs = cases[case_index(n, w, &states)].canonical();
                    let a = lhs.coeff(w);
                    let rest: f64 = lhs
                        .coeffs()
                        .iter()
                        .filter(|(p, _)| *p != w)
                        .map(|(p, c)| c * row[p.0 as usize])
                        .sum();
                    row[i] = -(rest + lhs.constant_term()) / a;
                }
            }
        }
        rows.push(row);
    }
    Ok(SampleMatrix { rows })
}

/// `∫ xᵏ e^{bx} dx` up to a constant.
fn antiderivative(k: u32, b: f64, x: f64) -> f64 {
    if b == 0.0 {
        return x.powi(k as i32 + 1) / (k as f64 + 1.0);
    }
    // e^{bx} Σⱼ (-1)ʲ k!/(k-j)! x^{k-j} / b^{j+1}
    let mut sum = 0.0;
    let mut falling = 1.0;
    for j in 0..=k {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * falling * x.powi((k - j) as i32) / b.powi(j as i32 + 1);
        falling *= (k - j) as f64;
    }
    (b * x).exp() * sum
}

fn term_parts(t: &ExpPolyTerm, v: VarId) -> (u32, f64) {
    (t.power_of(v), t.exponent().coeff(v))
}

fn piece_cdf(terms: &[ExpPolyTerm], v: VarId, lo: f64, x: f64) -> f64 {
    terms
        .iter()
        .map(|t| {
            let (k, b) = term_parts(t, v);
            t.coeff() * (antiderivative(k, b, x) - antiderivative(k, b, lo))
        })
        .sum()
}

fn piece_pdf(terms: &[ExpPolyTerm], v: VarId, x: f64) -> f64 {
    terms
        .iter()
        .map(|t| {
            let (k, b) = term_parts(t, v);
            t.coeff() * x.powi(k as i32) * (b * x).exp()
        })
        .sum()
}

fn inverse_cdf(f: &PiecewiseFn, v: VarId, u: f64) -> Result<f64> {
    let mut pieces: Vec<(f64, f64, f64, &[ExpPolyTerm])> = Vec::new();
    for p in f.pieces() {
        let Some((lo, hi)) = p.region.interval_of(v) else {
            continue;
        };
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::DivergentIntegral(v));
        }
        let mass = piece_cdf(&p.terms, v, lo, hi);
        pieces.push((lo, hi, mass, &p.terms));
    }
    let total: f64 = pieces.iter().map(|p| p.2).sum();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::DegenerateDensity);
    }
    let mut target = u * total;
    let Some(&(lo, hi, mass, terms)) = pieces
        .iter()
        .find(|p| {
            if target < p.2 {
                true
            } else {
                target -= p.2;
                false
            }
        })
        .or(pieces.last())
    else {
        return Err(Error::DegenerateDensity);
    };
    let target = target.min(mass);
    // Safeguarded Newton on the monotone piece CDF.
    let (mut a, mut b) = (lo, hi);
    let mut x = lo + (hi - lo) * (target / mass).clamp(0.0, 1.0);
    for _ in 0..200 {
        let g = piece_cdf(terms, v, lo, x) - target;
        if g.abs() <= 1e-14 * mass.max(1.0) || b - a <= 1e-12 * x.abs().max(1.0) {
            break;
        }
        if g > 0.0 {
            b = x;
        } else {
            a = x;
        }
        let d = piece_pdf(terms, v, x);
        let next = x - g / d;
        x = if d > 0.0 && next > a && next < b {
            next
        } else {
            0.5 * (a + b)
        };
    }
    Ok(x)
}
