//! Mixed potentials: per discrete configuration, a list of mass factors and a
//! list of density-part factors, kept decomposed until an elimination needs
//! them multiplied.
//!
//! Equations are read as Dirac deltas, `w·[g(z) = 0]` standing for
//! `w·δ(g(z))`. A one-variable equation is always stored with coefficient 1
//! on its variable, so it is a point mass of weight `w` at the root.

mod eliminate;
mod restrict;
pub(crate) mod terms;

use std::sync::{Arc, OnceLock};

use crate::expcalc::{union_vars, weighted_sum, LinExpr, PiecewiseFn, Point, VarId, ZERO_EPS};
use crate::{Error, Result};

pub use eliminate::{marg_cont_density, marg_density_det, marg_det_pair, marg_discrete, marg_single_det, marginalize};
pub use restrict::{restrict, Observation};

/// Tolerance for comparing equations and point-mass locations.
pub const EQ_TOL: f64 = 1e-9;

/// `lhs = 0`, optionally tagged with the variable it defines.
#[derive(Debug, Clone, PartialEq)]
pub struct Equation {
    lhs: LinExpr,
    head: Option<VarId>,
}

impl Equation {
    /// Scales `lhs` so the head (if any) has coefficient 1.
    pub fn new(lhs: LinExpr, head: Option<VarId>) -> Result<Self> {
        let lhs = match head {
            Some(h) => {
                let a = lhs.coeff(h);
                if a.abs() < ZERO_EPS {
                    return Err(Error::NonInvertibleEquation(format!("{h} does not occur in {lhs}")));
                }
                if a == 1.0 {
                    lhs
                } else {
                    lhs.scale(1.0 / a)
                }
            }
            None => lhs,
        };
        Ok(Equation { lhs, head })
    }

    /// `head = rhs`, stored as `head - rhs = 0`.
    pub fn defining(head: VarId, rhs: &LinExpr) -> Result<Self> {
        Equation::new(LinExpr::var(head).sub(rhs), Some(head))
    }

    /// The point constraint `v = c`.
    pub fn point(v: VarId, c: f64) -> Self {
        Equation {
            lhs: LinExpr::new([(v, 1.0)], -c),
            head: Some(v),
        }
    }

    pub fn lhs(&self) -> &LinExpr {
        &self.lhs
    }

    pub fn head(&self) -> Option<VarId> {
        self.head
    }

    pub fn vars(&self) -> Vec<VarId> {
        self.lhs.vars().collect()
    }

    pub fn contains(&self, v: VarId) -> bool {
        self.lhs.contains(v)
    }

    pub fn coeff(&self, v: VarId) -> f64 {
        self.lhs.coeff(v)
    }

    /// `(v, c)` when this is the point constraint `v = c`.
    pub fn point_value(&self) -> Option<(VarId, f64)> {
        match self.lhs.coeffs() {
            [(v, a)] => Some((*v, -self.lhs.constant_term() / a)),
            _ => None,
        }
    }

    /// Solves for `v`.
    pub fn solve_for(&self, v: VarId) -> Result<LinExpr> {
        if self.lhs.coeff(v).abs() < ZERO_EPS {
            return Err(Error::NonInvertibleEquation(format!("{} = 0 in {v}", self.lhs)));
        }
        Ok(self.lhs.solve_for(v).expect("coefficient checked"))
    }

    /// Replaces `v` by `e`; the head survives if it is still present.
    pub fn substitute(&self, v: VarId, e: &LinExpr) -> Equation {
        let lhs = self.lhs.substitute(v, e);
        let head = self.head.filter(|&h| h != v && lhs.coeff(h).abs() >= ZERO_EPS);
        match head {
            Some(h) if lhs.coeff(h) != 1.0 => Equation {
                lhs: lhs.scale(1.0 / lhs.coeff(h)),
                head,
            },
            _ => Equation { lhs, head },
        }
    }

    /// Same hyperplane (equal up to a nonzero factor).
    pub fn equivalent(&self, other: &Equation, tol: f64) -> bool {
        self.lhs.proportional_to(&other.lhs, tol)
    }
}

/// `weight · [lhs = 0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedEquation {
    pub weight: f64,
    pub equation: Equation,
}

impl WeightedEquation {
    pub fn new(weight: f64, equation: Equation) -> Self {
        WeightedEquation { weight, equation }
    }

    /// Rescales a one-variable equation to coefficient 1, moving `1/|a|`
    /// into the weight (`δ(a·z + b) = δ(z + b/a) / |a|`).
    pub(crate) fn canonical(weight: f64, equation: Equation) -> Self {
        if let [(v, a)] = equation.lhs.coeffs() {
            if *a != 1.0 {
                let (v, a) = (*v, *a);
                return WeightedEquation {
                    weight: weight / a.abs(),
                    equation: Equation {
                        lhs: equation.lhs.scale(1.0 / a),
                        head: Some(v),
                    },
                };
            }
        }
        WeightedEquation { weight, equation }
    }

    pub fn lhs(&self) -> &LinExpr {
        &self.equation.lhs
    }
}

/// A weighted set of linear equations, read as the sum `Σ w_p·δ(g_p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeterministicPotential {
    vars: Vec<VarId>,
    factors: Vec<WeightedEquation>,
}

impl DeterministicPotential {
    pub fn new(factors: Vec<WeightedEquation>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidModel("deterministic potential with no equations".into()));
        }
        let mut vars: Vec<VarId> = factors.iter().flat_map(|f| f.equation.vars()).collect();
        vars.sort();
        vars.dedup();
        Ok(DeterministicPotential { vars, factors })
    }

    pub fn single(equation: Equation) -> Self {
        DeterministicPotential::new(vec![WeightedEquation::new(1.0, equation)]).expect("non-empty")
    }

    pub fn vars(&self) -> &[VarId] {
        &self.vars
    }

    pub fn factors(&self) -> &[WeightedEquation] {
        &self.factors
    }

    pub fn total_weight(&self) -> f64 {
        self.factors.iter().map(|f| f.weight).sum()
    }
}

/// One summand of a [`Mixture`]: a weight times a product of densities and
/// equations.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub weight: f64,
    pub densities: Vec<Arc<PiecewiseFn>>,
    pub equations: Vec<Equation>,
}

impl Component {
    pub fn vars(&self) -> Vec<VarId> {
        let mut vs: Vec<VarId> = self
            .densities
            .iter()
            .flat_map(|d| d.vars().to_vec())
            .chain(self.equations.iter().flat_map(|e| e.vars()))
            .collect();
        vs.sort();
        vs.dedup();
        vs
    }
}

/// A weighted sum of products, produced when summing out a discrete variable
/// whose states carry different density parts.
#[derive(Debug, Clone)]
pub struct Mixture {
    components: Vec<Component>,
    collapsed: OnceLock<Option<Arc<PiecewiseFn>>>,
}

impl PartialEq for Mixture {
    fn eq(&self, other: &Self) -> bool {
        self.components == other.components
    }
}

impl Mixture {
    pub fn new(components: Vec<Component>) -> Self {
        Mixture {
            components,
            collapsed: OnceLock::new(),
        }
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn vars(&self) -> Vec<VarId> {
        let mut vs: Vec<VarId> = self.components.iter().flat_map(|c| c.vars()).collect();
        vs.sort();
        vs.dedup();
        vs
    }

    /// The mixture as one density, when every component is a density
    /// product over the same variables.
    pub fn as_density(&self) -> Result<Option<Arc<PiecewiseFn>>> {
        if let Some(c) = self.collapsed.get() {
            return Ok(c.clone());
        }
        let value = self.collapse()?;
        Ok(self.collapsed.get_or_init(|| value).clone())
    }

    fn collapse(&self) -> Result<Option<Arc<PiecewiseFn>>> {
        let first_vars = match self.components.first() {
            Some(c) => c.vars(),
            None => return Ok(None),
        };
        if self
            .components
            .iter()
            .any(|c| !c.equations.is_empty() || c.densities.is_empty() || c.vars() != first_vars)
        {
            return Ok(None);
        }
        let products: Vec<PiecewiseFn> = self
            .components
            .iter()
            .map(|c| terms::product(&c.densities))
            .collect::<Result<_>>()?;
        let parts: Vec<(f64, &PiecewiseFn)> = self
            .components
            .iter()
            .zip(&products)
            .map(|(c, f)| (c.weight, f))
            .collect();
        Ok(Some(Arc::new(weighted_sum(&parts)?)))
    }
}

/// One element of a density part.
#[derive(Debug, Clone, PartialEq)]
pub enum Factor {
    Identity,
    Density(Arc<PiecewiseFn>),
    Deterministic(Arc<DeterministicPotential>),
    Mixture(Arc<Mixture>),
}

impl Factor {
    pub fn density(f: PiecewiseFn) -> Self {
        Factor::Density(Arc::new(f))
    }

    pub fn deterministic(d: DeterministicPotential) -> Self {
        Factor::Deterministic(Arc::new(d))
    }

    pub fn vars(&self) -> Vec<VarId> {
        match self {
            Factor::Identity => Vec::new(),
            Factor::Density(f) => f.vars().to_vec(),
            Factor::Deterministic(d) => d.vars().to_vec(),
            Factor::Mixture(m) => m.vars(),
        }
    }

    pub fn contains(&self, v: VarId) -> bool {
        match self {
            Factor::Identity => false,
            Factor::Density(f) => f.contains_var(v),
            Factor::Deterministic(d) => d.vars().binary_search(&v).is_ok(),
            Factor::Mixture(m) => m.vars().binary_search(&v).is_ok(),
        }
    }

    /// Same shared value (used to spot factors common to every state of a
    /// discrete variable).
    pub fn same(&self, other: &Factor) -> bool {
        match (self, other) {
            (Factor::Identity, Factor::Identity) => true,
            (Factor::Density(a), Factor::Density(b)) => Arc::ptr_eq(a, b),
            (Factor::Deterministic(a), Factor::Deterministic(b)) => Arc::ptr_eq(a, b),
            (Factor::Mixture(a), Factor::Mixture(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

fn factor_value<P: Point + ?Sized>(f: &Factor, point: &P) -> Result<f64> {
    let no_value = || Error::DomainMismatch("an equation has no pointwise value".into());
    match f {
        Factor::Identity => Ok(1.0),
        Factor::Density(d) => d.evaluate(point),
        Factor::Deterministic(_) => Err(no_value()),
        Factor::Mixture(m) => {
            let mut sum = 0.0;
            for c in m.components() {
                if !c.equations.is_empty() {
                    return Err(no_value());
                }
                let mut prod = c.weight;
                for d in &c.densities {
                    prod *= d.evaluate(point)?;
                }
                sum += prod;
            }
            Ok(sum)
        }
    }
}

/// The value of a mixed potential at one discrete configuration.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Entry {
    pub masses: Vec<f64>,
    pub factors: Vec<Factor>,
}

impl Entry {
    pub fn new(masses: Vec<f64>, factors: Vec<Factor>) -> Self {
        let mut e = Entry { masses, factors };
        e.tidy();
        e
    }

    pub fn zero() -> Self {
        Entry {
            masses: vec![0.0],
            factors: Vec::new(),
        }
    }

    /// Product of the mass factors.
    pub fn mass(&self) -> f64 {
        self.masses.iter().product()
    }

    pub fn is_zero(&self) -> bool {
        self.masses.contains(&0.0)
    }

    /// `mass · Π factors` at a point. Equations have no pointwise value, so
    /// an entry holding one is an error.
    pub fn density_value<P: Point + ?Sized>(&self, point: &P) -> Result<f64> {
        let mut acc = self.mass();
        for f in &self.factors {
            acc *= factor_value(f, point)?;
        }
        Ok(acc)
    }

    fn tidy(&mut self) {
        if self.is_zero() {
            *self = Entry::zero();
            return;
        }
        self.factors.retain(|f| !matches!(f, Factor::Identity));
        self.masses.retain(|&m| m != 1.0);
    }
}

/// A potential over discrete variables (with their cardinalities) and
/// continuous variables, with one [`Entry`] per discrete configuration.
///
/// Configurations are indexed row-major over `discrete` in id order.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedPotential {
    discrete: Vec<(VarId, usize)>,
    continuous: Vec<VarId>,
    entries: Vec<Entry>,
}

impl MixedPotential {
    pub fn new(discrete: Vec<(VarId, usize)>, continuous: Vec<VarId>, entries: Vec<Entry>) -> Result<Self> {
        let mut order: Vec<usize> = (0..discrete.len()).collect();
        order.sort_by_key(|&i| discrete[i].0);
        let sorted: Vec<(VarId, usize)> = order.iter().map(|&i| discrete[i]).collect();
        if sorted.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::DomainMismatch("duplicate discrete variable".into()));
        }
        let size: usize = sorted.iter().map(|(_, k)| *k).product();
        if entries.len() != size {
            return Err(Error::DomainMismatch(format!(
                "{} entries for {size} configurations",
                entries.len()
            )));
        }
        let mut continuous = continuous;
        continuous.sort();
        continuous.dedup();
        if let Some(&(v, _)) = sorted.iter().find(|(v, _)| continuous.binary_search(v).is_ok()) {
            return Err(Error::DomainMismatch(format!("{v} is both discrete and continuous")));
        }
        // Entries were given in the caller's variable order; permute.
        let entries = if order.iter().enumerate().all(|(i, &j)| i == j) {
            entries
        } else {
            let mut out = vec![Entry::default(); size];
            for (idx, e) in entries.into_iter().enumerate() {
                let states = unrank(idx, &discrete);
                let sorted_states: Vec<usize> = order.iter().map(|&i| states[i]).collect();
                out[rank(&sorted_states, &sorted)] = e;
            }
            out
        };
        let entries = entries
            .into_iter()
            .map(|mut e| {
                e.tidy();
                e
            })
            .collect();
        Ok(MixedPotential {
            discrete: sorted,
            continuous,
            entries,
        })
    }

    /// The potential `(1, ι)` with an empty domain.
    pub fn vacuous() -> Self {
        MixedPotential {
            discrete: Vec::new(),
            continuous: Vec::new(),
            entries: vec![Entry::default()],
        }
    }

    /// A mass table with identity density parts.
    pub fn from_masses(discrete: Vec<(VarId, usize)>, masses: Vec<f64>) -> Result<Self> {
        let entries = masses.into_iter().map(|m| Entry::new(vec![m], Vec::new())).collect();
        MixedPotential::new(discrete, Vec::new(), entries)
    }

    /// Unit mass and the same density part for every configuration.
    pub fn from_factor(discrete: Vec<(VarId, usize)>, continuous: Vec<VarId>, factor: Factor) -> Result<Self> {
        let size = discrete.iter().map(|(_, k)| *k).product();
        let entries = vec![Entry::new(Vec::new(), vec![factor]); size];
        MixedPotential::new(discrete, continuous, entries)
    }

    pub fn discrete(&self) -> &[(VarId, usize)] {
        &self.discrete
    }

    pub fn continuous(&self) -> &[VarId] {
        &self.continuous
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn vars(&self) -> Vec<VarId> {
        let mut vs: Vec<VarId> = self
            .discrete
            .iter()
            .map(|(v, _)| *v)
            .chain(self.continuous.iter().copied())
            .collect();
        vs.sort();
        vs
    }

    pub fn contains(&self, v: VarId) -> bool {
        self.is_discrete(v) || self.continuous.binary_search(&v).is_ok()
    }

    pub fn is_discrete(&self, v: VarId) -> bool {
        self.discrete.iter().any(|(w, _)| *w == v)
    }

    pub fn cardinality(&self, v: VarId) -> Option<usize> {
        self.discrete.iter().find(|(w, _)| *w == v).map(|(_, k)| *k)
    }

    /// Entry for a full assignment of the discrete variables (any order;
    /// extra variables are ignored).
    pub fn entry_at(&self, assignment: &[(VarId, usize)]) -> Option<&Entry> {
        let mut states = Vec::with_capacity(self.discrete.len());
        for (v, k) in &self.discrete {
            let s = assignment.iter().find(|(w, _)| w == v)?.1;
            if s >= *k {
                return None;
            }
            states.push(s);
        }
        Some(&self.entries[rank(&states, &self.discrete)])
    }

    /// Discrete states of configuration `idx`.
    pub fn config(&self, idx: usize) -> Vec<(VarId, usize)> {
        self.discrete
            .iter()
            .zip(unrank(idx, &self.discrete))
            .map(|((v, _), s)| (*v, s))
            .collect()
    }

    /// True when every entry is zero.
    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(Entry::is_zero)
    }
}

pub(crate) fn rank(states: &[usize], discrete: &[(VarId, usize)]) -> usize {
    states.iter().zip(discrete).fold(0, |acc, (s, (_, k))| acc * k + s)
}

pub(crate) fn unrank(mut idx: usize, discrete: &[(VarId, usize)]) -> Vec<usize> {
    let mut states = vec![0; discrete.len()];
    for (i, (_, k)) in discrete.iter().enumerate().rev() {
        states[i] = idx % k;
        idx /= k;
    }
    states
}

/// LAZY combination: factor lists concatenate, nothing is multiplied.
pub fn combine(a: &MixedPotential, b: &MixedPotential) -> Result<MixedPotential> {
    let mut discrete: Vec<(VarId, usize)> = a.discrete.clone();
    for &(v, k) in &b.discrete {
        match a.cardinality(v) {
            Some(ka) if ka != k => {
                return Err(Error::DomainMismatch(format!(
                    "{v} has {ka} states in one potential and {k} in the other"
                )))
            }
            Some(_) => {}
            None => discrete.push((v, k)),
        }
    }
    discrete.sort_by_key(|(v, _)| *v);
    let continuous = union_vars(&a.continuous, &b.continuous);
    let size: usize = discrete.iter().map(|(_, k)| *k).product();
    let pick = |p: &MixedPotential| -> Vec<usize> {
        p.discrete
            .iter()
            .map(|(v, _)| discrete.iter().position(|(w, _)| w == v).expect("subset"))
            .collect()
    };
    let (pa, pb) = (pick(a), pick(b));
    let mut entries = Vec::with_capacity(size);
    for idx in 0..size {
        let states = unrank(idx, &discrete);
        let ea = &a.entries[rank(&pa.iter().map(|&i| states[i]).collect::<Vec<_>>(), &a.discrete)];
        let eb = &b.entries[rank(&pb.iter().map(|&i| states[i]).collect::<Vec<_>>(), &b.discrete)];
        if ea.is_zero() || eb.is_zero() {
            entries.push(Entry::zero());
            continue;
        }
        let masses = ea.masses.iter().chain(&eb.masses).copied().collect();
        let factors = ea.factors.iter().chain(&eb.factors).cloned().collect();
        entries.push(Entry::new(masses, factors));
    }
    MixedPotential::new(discrete, continuous, entries)
}

/// Combines a list of potentials (the vacuous potential for an empty list).
pub fn combine_all<'a>(ps: impl IntoIterator<Item = &'a MixedPotential>) -> Result<MixedPotential> {
    let mut acc = MixedPotential::vacuous();
    for p in ps {
        acc = combine(&acc, p)?;
    }
    Ok(acc)
}
