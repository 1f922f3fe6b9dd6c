use crate::expcalc::{PiecewiseFn, VarId, ZERO_EPS};
use crate::jointree::Evidence;
use crate::model::{compile_density, Cpd, Network};
use crate::potential::Observation;
use crate::{Error, Result};

use super::{case_index, table_row, QuadratureSpec};

/// Normalized posterior moments and the probability (or density) of the
/// evidence. Discrete variables report moments of the state index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraturePosterior {
    pub mean: f64,
    pub variance: f64,
    pub evidence_weight: f64,
}

/// Free dimensions the oracle will integrate over.
const MAX_DIMS: usize = 3;

/// `c + Σ aᵢ·xᵢ` over the free coordinates.
#[derive(Debug, Clone, PartialEq)]
struct Affine {
    a: Vec<f64>,
    c: f64,
}

impl Affine {
    fn constant(c: f64, n: usize) -> Self {
        Affine { a: vec![0.0; n], c }
    }

    fn axis(i: usize, n: usize) -> Self {
        let mut a = vec![0.0; n];
        a[i] = 1.0;
        Affine { a, c: 0.0 }
    }

    fn add_scaled(&mut self, other: &Affine, k: f64) {
        for (x, y) in self.a.iter_mut().zip(&other.a) {
            *x += k * y;
        }
        self.c += k * other.c;
    }

    /// Replaces coordinate `j` by `e` (which must not mention `j`).
    fn substitute(&mut self, j: usize, e: &Affine) {
        let k = std::mem::replace(&mut self.a[j], 0.0);
        if k != 0.0 {
            self.add_scaled(e, k);
            self.a[j] = 0.0;
        }
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.c + self.a.iter().zip(x).map(|(a, x)| a * x).sum::<f64>()
    }

    fn scale(&self) -> f64 {
        self.a.iter().fold(self.c.abs(), |m, a| m.max(a.abs())).max(1.0)
    }
}

/// One discrete configuration, reduced to an integral over `dims`
/// coordinates.
struct Cell<'a> {
    weight: f64,
    /// Number of observed deterministic variables that are pinned to a
    /// point in this configuration (each contributes mass, not density).
    degree: usize,
    /// Values of the continuous variables.
    values: Vec<(VarId, Affine)>,
    densities: Vec<&'a PiecewiseFn>,
    planes: Vec<Affine>,
    query: Query,
    bounds: Vec<Option<(f64, f64)>>,
    free: Vec<VarId>,
}

#[derive(Clone)]
enum Query {
    Constant(f64),
    Value(Affine),
}

/// Posterior moments of `v` by summing over discrete configurations and
/// integrating the product of the conditional densities with composite
/// Simpson on the remaining free continuous coordinates.
pub fn quadrature_posterior(
    n: &Network,
    evidence: &Evidence,
    v: VarId,
    spec: &QuadratureSpec,
) -> Result<QuadraturePosterior> {
    if spec.points_per_axis < 3 || spec.points_per_axis.is_multiple_of(2) {
        return Err(Error::InvalidModel(format!(
            "points per axis must be odd and at least 3, got {}",
            spec.points_per_axis
        )));
    }
    if v.0 as usize >= n.len() {
        return Err(Error::UnknownVariable(v.to_string()));
    }
    let order = n
        .topological_order()
        .ok_or_else(|| Error::InvalidModel("the parent graph has a cycle".into()))?;
    for w in n.ids() {
        if n.is_discrete(w) && !n.continuous_parents(w).is_empty() {
            return Err(Error::InvalidModel(format!(
                "{} is discrete with a continuous parent",
                n.name(w)
            )));
        }
    }
    let compiled: Vec<Vec<PiecewiseFn>> = n
        .ids()
        .map(|w| match n.cpd(w) {
            Cpd::Density(cases) => cases.iter().map(|d| compile_density(n, w, d)).collect(),
            _ => Ok(Vec::new()),
        })
        .collect::<Result<_>>()?;
    let discrete: Vec<VarId> = n.ids().filter(|&w| n.is_discrete(w)).collect();
    let total: usize = discrete.iter().map(|&w| n.cardinality(w)).product();

    // (degree, weight, ∫q·f, ∫q²·f) per configuration.
    let mut acc: Vec<(usize, f64, f64, f64)> = Vec::new();
    let mut states = vec![0usize; n.len()];
    'configs: for mut idx in 0..total {
        for &w in discrete.iter().rev() {
            let k = n.cardinality(w);
            states[w.0 as usize] = idx % k;
            idx /= k;
        }
        for &w in &discrete {
            if let Some(Observation::State(s)) = evidence.get(w) {
                if states[w.0 as usize] != s {
                    continue 'configs;
                }
            }
        }
        let Some(cell) = build_cell(n, evidence, v, spec, &order, &compiled, &states)? else {
            continue;
        };
        let [i0, i1, i2] = cell.integrate(spec.points_per_axis)?;
        acc.push((cell.degree, cell.weight * i0, cell.weight * i1, cell.weight * i2));
    }
    let top = acc.iter().filter(|a| a.1 != 0.0).map(|a| a.0).max().unwrap_or(0);
    let (w, m1, m2) = acc
        .iter()
        .filter(|a| a.0 == top)
        .fold((0.0, 0.0, 0.0), |(w, m1, m2), a| (w + a.1, m1 + a.2, m2 + a.3));
    if !(w > 0.0 && w.is_finite()) {
        return Err(Error::InconsistentEvidence);
    }
    let mean = m1 / w;
    Ok(QuadraturePosterior {
        mean,
        variance: (m2 / w - mean * mean).max(0.0),
        evidence_weight: w,
    })
}

#[allow(clippy::too_many_arguments)]
fn build_cell<'a>(
    n: &Network,
    evidence: &Evidence,
    query: VarId,
    spec: &QuadratureSpec,
    order: &[VarId],
    compiled: &'a [Vec<PiecewiseFn>],
    states: &[usize],
) -> Result<Option<Cell<'a>>> {
    let free0: Vec<VarId> = order
        .iter()
        .copied()
        .filter(|&w| matches!(n.cpd(w), Cpd::Density(_)) && evidence.get(w).is_none())
        .collect();
    let d0 = free0.len();
    let mut weight = 1.0;
    let mut values: Vec<(VarId, Affine)> = Vec::new();
    let mut densities = Vec::new();
    let value_of = |values: &[(VarId, Affine)], w: VarId| values.iter().find(|(x, _)| *x == w).map(|(_, a)| a.clone());
    for &w in order {
        match n.cpd(w) {
            Cpd::Table(_) => weight *= table_row(n, w, states)[states[w.0 as usize]],
            Cpd::Density(_) => {
                let value = match evidence.get(w) {
                    Some(Observation::Value(c)) => Affine::constant(c, d0),
                    _ => Affine::axis(free0.iter().position(|&x| x == w).expect("free"), d0),
                };
                values.push((w, value));
                densities.push(&compiled[w.0 as usize][case_index(n, w, states)]);
            }
            Cpd::Equations(cases) => {
                let lhs = cases[case_index(n, w, states)].canonical();
                let a = lhs.coeff(w);
                if a.abs() < ZERO_EPS {
                    return Err(Error::NonInvertibleEquation(n.name(w).to_string()));
                }
                // w = -(lhs - a·w)/a
                let mut value = Affine::constant(-lhs.constant_term() / a, d0);
                for (p, c) in lhs.coeffs() {
                    if *p != w {
                        let pv = value_of(&values, *p).ok_or_else(|| {
                            Error::InvalidModel(format!("{} refers to a non-continuous parent", n.name(w)))
                        })?;
                        value.add_scaled(&pv, -c / a);
                    }
                }
                values.push((w, value));
            }
        }
    }
    if weight == 0.0 {
        return Ok(None);
    }

    // Observed deterministic variables become constraints on the free
    // coordinates, each solved for its largest coefficient.
    let mut degree = 0;
    let mut solved = vec![false; d0];
    for (w, obs) in evidence.iter() {
        let (Cpd::Equations(_), Observation::Value(c)) = (n.cpd(w), obs) else {
            continue;
        };
        let mut g = value_of(&values, w).expect("deterministic value");
        g.c -= c;
        let pivot = (0..d0)
            .filter(|&j| !solved[j])
            .max_by(|&i, &j| g.a[i].abs().total_cmp(&g.a[j].abs()));
        match pivot {
            Some(j) if g.a[j].abs() >= ZERO_EPS * g.scale() => {
                let a = g.a[j];
                let mut e = g.clone();
                e.a[j] = 0.0;
                for x in e.a.iter_mut() {
                    *x /= -a;
                }
                e.c /= -a;
                for (_, val) in values.iter_mut() {
                    val.substitute(j, &e);
                }
                solved[j] = true;
                weight /= a.abs();
            }
            _ if g.c.abs() <= 1e-9 * g.scale() => degree += 1,
            _ => return Ok(None),
        }
    }

    let dims: Vec<usize> = (0..d0).filter(|&j| !solved[j]).collect();
    if dims.len() > MAX_DIMS {
        return Err(Error::OracleDimension(dims.len()));
    }
    let compact = |a: &Affine| Affine {
        a: dims.iter().map(|&j| a.a[j]).collect(),
        c: a.c,
    };
    let values: Vec<(VarId, Affine)> = values.iter().map(|(w, a)| (*w, compact(a))).collect();
    let mut planes: Vec<Affine> = Vec::new();
    for f in &densities {
        for piece in f.pieces() {
            for con in piece.region.constraints() {
                let e = con.expr();
                let mut p = Affine::constant(e.constant_term(), dims.len());
                for (w, c) in e.coeffs() {
                    let val = values
                        .iter()
                        .find(|(x, _)| x == w)
                        .map(|(_, a)| a)
                        .expect("continuous value");
                    p.add_scaled(val, *c);
                }
                push_plane(&mut planes, p);
            }
        }
    }
    let query = if n.is_discrete(query) {
        Query::Constant(states[query.0 as usize] as f64)
    } else {
        Query::Value(
            values
                .iter()
                .find(|(x, _)| *x == query)
                .expect("continuous value")
                .1
                .clone(),
        )
    };
    let free: Vec<VarId> = dims.iter().map(|&j| free0[j]).collect();
    let bounds = free.iter().map(|w| spec.bounds.get(w).copied()).collect();
    Ok(Some(Cell {
        weight,
        degree,
        values,
        densities,
        planes,
        query,
        bounds,
        free,
    }))
}

/// Adds a hyperplane unless it is constant or already present.
fn push_plane(planes: &mut Vec<Affine>, mut p: Affine) {
    let Some(lead) = p.a.iter().copied().find(|a| a.abs() >= ZERO_EPS) else {
        return;
    };
    let k = 1.0 / lead;
    for x in p.a.iter_mut() {
        *x *= k;
    }
    p.c *= k;
    let same = |q: &Affine| {
        (q.c - p.c).abs() <= 1e-12 * p.c.abs().max(1.0) && q.a.iter().zip(&p.a).all(|(x, y)| (x - y).abs() <= 1e-12)
    };
    if !planes.iter().any(same) {
        planes.push(p);
    }
}

impl Cell<'_> {
    fn dims(&self) -> usize {
        self.bounds.len()
    }

    fn density(&self, x: &[f64], buf: &mut Vec<(VarId, f64)>) -> Result<f64> {
        buf.clear();
        buf.extend(self.values.iter().map(|(w, a)| (*w, a.eval(x))));
        let mut f = 1.0;
        for d in &self.densities {
            f *= d.evaluate(buf.as_slice())?;
            if f == 0.0 {
                break;
            }
        }
        Ok(f)
    }

    fn integrand(&self, x: &[f64], buf: &mut Vec<(VarId, f64)>) -> Result<[f64; 3]> {
        let f = self.density(x, buf)?;
        let q = match &self.query {
            Query::Constant(c) => *c,
            Query::Value(a) => a.eval(x),
        };
        Ok([f, q * f, q * q * f])
    }

    fn integrate(&self, points: usize) -> Result<[f64; 3]> {
        let mut x = vec![0.0; self.dims()];
        let mut buf = Vec::new();
        self.level(0, &mut x, points, &mut buf)
    }

    /// Values of coordinate `k` where the arrangement of piece borders,
    /// restricted to the fixed outer coordinates, changes shape.
    fn breakpoints(&self, k: usize, x: &[f64]) -> Vec<f64> {
        let d = self.dims();
        let rows: Vec<(Vec<f64>, f64)> = self
            .planes
            .iter()
            .map(|p| {
                let c = p.c + (0..k).map(|i| p.a[i] * x[i]).sum::<f64>();
                (p.a[k..d].to_vec(), c)
            })
            .filter(|(a, _)| a.iter().any(|v| v.abs() >= ZERO_EPS))
            .collect();
        let r = d - k;
        let mut out = Vec::new();
        let mut subset = Vec::with_capacity(r);
        subsets(rows.len(), r, &mut subset, &mut |ix| {
            if let Some(t) = determined(ix.iter().map(|&i| &rows[i])) {
                out.push(t);
            }
        });
        if let Some((lo, hi)) = self.bounds[k] {
            out.retain(|&t| t > lo && t < hi);
            out.push(lo);
            out.push(hi);
        }
        out.sort_by(f64::total_cmp);
        out.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * a.abs().max(1.0));
        out
    }

    fn level(&self, k: usize, x: &mut Vec<f64>, points: usize, buf: &mut Vec<(VarId, f64)>) -> Result<[f64; 3]> {
        if k == self.dims() {
            return self.integrand(x, buf);
        }
        let cuts = self.breakpoints(k, x);
        if self.bounds[k].is_none() {
            let outside = match (cuts.first(), cuts.last()) {
                (Some(lo), Some(hi)) => vec![lo - 1.0, hi + 1.0],
                _ => vec![0.0],
            };
            for t in outside {
                x[k] = t;
                if self.nonzero(k + 1, x, buf)? {
                    return Err(Error::DivergentIntegral(self.free[k]));
                }
            }
        }
        let mut live: Vec<(f64, f64)> = Vec::new();
        for w in cuts.windows(2) {
            x[k] = 0.5 * (w[0] + w[1]);
            if self.nonzero(k + 1, x, buf)? {
                live.push((w[0], w[1]));
            }
        }
        let span: f64 = live.iter().map(|(a, b)| b - a).sum();
        let mut total = [0.0; 3];
        for (a, b) in live {
            let share = ((points as f64) * (b - a) / span).round() as usize;
            let m = (share.max(3) - 1) / 2 * 2 + 1;
            let h = (b - a) / (m - 1) as f64;
            // Borders belong to one side only; step just inside the panel.
            let nudge = ((b - a) * 1e-13).max(8.0 * f64::EPSILON * a.abs().max(b.abs()));
            for i in 0..m {
                x[k] = match i {
                    0 => a + nudge,
                    _ if i == m - 1 => b - nudge,
                    _ => a + h * i as f64,
                };
                let w = if i == 0 || i == m - 1 {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                let v = self.level(k + 1, x, points, buf)?;
                for (t, v) in total.iter_mut().zip(v) {
                    *t += w * h / 3.0 * v;
                }
            }
        }
        Ok(total)
    }

    /// Whether the integrand is nonzero somewhere once coordinates below
    /// `k` are fixed. Exact, since it is either identically zero or not
    /// between consecutive breakpoints.
    fn nonzero(&self, k: usize, x: &mut Vec<f64>, buf: &mut Vec<(VarId, f64)>) -> Result<bool> {
        if k == self.dims() {
            return Ok(self.density(x, buf)? != 0.0);
        }
        let cuts = self.breakpoints(k, x);
        let mut probes: Vec<f64> = cuts.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        if self.bounds[k].is_none() {
            match (cuts.first(), cuts.last()) {
                (Some(lo), Some(hi)) => probes.extend([lo - 1.0, hi + 1.0]),
                _ => probes.push(0.0),
            }
        }
        for t in probes {
            x[k] = t;
            if self.nonzero(k + 1, x, buf)? {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

/// Calls `f` with every subset of `0..n` of size 1 to `max`.
fn subsets(n: usize, max: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
    let start = cur.last().map_or(0, |&i| i + 1);
    for i in start..n {
        cur.push(i);
        f(cur);
        if cur.len() < max {
            subsets(n, max, cur, f);
        }
        cur.pop();
    }
}

/// The value of the first coordinate pinned down by a set of hyperplanes
/// `a·y + c = 0`, if they pin it down.
fn determined<'a>(rows: impl Iterator<Item = &'a (Vec<f64>, f64)>) -> Option<f64> {
    let mut m: Vec<(Vec<f64>, f64)> = rows.cloned().collect();
    let r = m.first()?.0.len();
    let mut used = vec![false; m.len()];
    for col in 1..r {
        let Some(p) = (0..m.len())
            .filter(|&i| !used[i])
            .max_by(|&i, &j| m[i].0[col].abs().total_cmp(&m[j].0[col].abs()))
        else {
            break;
        };
        let a = m[p].0[col];
        if a.abs() < 1e-12 {
            continue;
        }
        used[p] = true;
        let pivot = m[p].clone();
        for (i, row) in m.iter_mut().enumerate() {
            if i != p {
                let k = row.0[col] / a;
                for (x, y) in row.0.iter_mut().zip(&pivot.0) {
                    *x -= k * y;
                }
                row.1 -= k * pivot.1;
            }
        }
    }
    m.iter()
        .zip(&used)
        .filter(|(_, u)| !**u)
        .find(|(row, _)| row.0[0].abs() >= 1e-12 && row.0[1..].iter().all(|v| v.abs() < 1e-12))
        .map(|(row, _)| -row.1 / row.0[0])
}
