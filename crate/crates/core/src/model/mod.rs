//! Bayesian-network schema, the JSON model format, validation and
//! compilation into initial mixed potentials.

mod compile;
mod expr;
mod file;
mod template;
mod validate;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::expcalc::{LinExpr, VarId};
use crate::{Error, Result};

pub use compile::{compile_density, compile_potential, compile_potentials};
pub use expr::{CmpOp, Inequality};
pub use file::{parse_model, serialize_model};
pub use template::{
    make_normal_mte, standard_normal_mte, NORMAL_MTE_CONSTANT, NORMAL_MTE_HALF_WIDTH, NORMAL_MTE_TERMS,
};
pub use validate::{validate_model, Diagnostic, DiagnosticKind};

#[derive(Debug, Clone, PartialEq)]
pub enum VarKind {
    Discrete { states: Vec<String> },
    Continuous,
    Deterministic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub parents: Vec<VarId>,
}

impl Variable {
    pub fn is_discrete(&self) -> bool {
        matches!(self.kind, VarKind::Discrete { .. })
    }

    pub fn states(&self) -> &[String] {
        match &self.kind {
            VarKind::Discrete { states } => states,
            _ => &[],
        }
    }
}

/// One additive term `coeff · Π v^k · exp(exponent)` of an explicit density.
#[derive(Debug, Clone, PartialEq)]
pub struct TermSpec {
    pub coeff: f64,
    pub powers: Vec<(VarId, u32)>,
    pub exponent: Option<LinExpr>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PieceSpec {
    pub region: Vec<Inequality>,
    pub terms: Vec<TermSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DensitySpec {
    /// The built-in normal approximant with a mean linear in the parents.
    Normal {
        mean: LinExpr,
        variance: f64,
    },
    Pieces(Vec<PieceSpec>),
}

/// `lhs = rhs` as written; the head is the variable the CPD belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct EquationSpec {
    pub lhs: LinExpr,
    pub rhs: LinExpr,
}

impl EquationSpec {
    /// `lhs − rhs`, which should carry the head with coefficient exactly 1.
    pub fn canonical(&self) -> LinExpr {
        self.lhs.sub(&self.rhs)
    }
}

/// A conditional distribution. Every variant holds one case per
/// configuration of the variable's discrete parents, ordered row-major over
/// the parents as declared.
#[derive(Debug, Clone, PartialEq)]
pub enum Cpd {
    Table(Vec<Vec<f64>>),
    Density(Vec<DensitySpec>),
    Equations(Vec<EquationSpec>),
}

impl Cpd {
    pub fn case_count(&self) -> usize {
        match self {
            Cpd::Table(c) => c.len(),
            Cpd::Density(c) => c.len(),
            Cpd::Equations(c) => c.len(),
        }
    }
}

/// Join-tree node identifiers may be written as numbers or strings.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NodeKey {
    Num(u64),
    Name(String),
}

impl fmt::Display for NodeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeKey::Num(n) => write!(f, "{n}"),
            NodeKey::Name(s) => write!(f, "{s}"),
        }
    }
}

/// A node of an explicit join tree: its label, neighbours, and the
/// variables whose CPDs are placed there.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeNodeSpec {
    pub id: NodeKey,
    pub variables: Vec<VarId>,
    pub neighbors: Vec<NodeKey>,
    pub assigned: Vec<VarId>,
}

/// A hybrid Bayesian network. Variable `i` has id `VarId(i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    variables: Vec<Variable>,
    cpds: Vec<Cpd>,
    join_tree: Option<Vec<TreeNodeSpec>>,
    index: HashMap<String, VarId>,
}

impl Network {
    /// Checks the structure (names, parent ids, one CPD of the right shape
    /// per variable). Semantic checks live in [`validate_model`].
    pub fn new(variables: Vec<Variable>, cpds: Vec<Cpd>, join_tree: Option<Vec<TreeNodeSpec>>) -> Result<Self> {
        let mut index = HashMap::new();
        for (i, v) in variables.iter().enumerate() {
            if v.name.is_empty() || !v.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(Error::InvalidModel(format!(
                    "{:?} is not a valid variable name",
                    v.name
                )));
            }
            if v.name.starts_with(|c: char| c.is_ascii_digit()) {
                return Err(Error::InvalidModel(format!("{:?} starts with a digit", v.name)));
            }
            if index.insert(v.name.clone(), VarId(i as u32)).is_some() {
                return Err(Error::InvalidModel(format!("variable {} declared twice", v.name)));
            }
        }
        if cpds.len() != variables.len() {
            return Err(Error::InvalidModel(format!(
                "{} variables but {} conditional distributions",
                variables.len(),
                cpds.len()
            )));
        }
        let n = Network {
            variables,
            cpds,
            join_tree,
            index,
        };
        for (i, v) in n.variables.iter().enumerate() {
            for p in &v.parents {
                if p.0 as usize >= n.variables.len() {
                    return Err(Error::UnknownVariable(p.to_string()));
                }
            }
            let id = VarId(i as u32);
            let cases = n.parent_configs(id);
            let cpd = &n.cpds[i];
            let shape_ok = matches!(
                (&v.kind, cpd),
                (VarKind::Discrete { .. }, Cpd::Table(_))
                    | (VarKind::Continuous, Cpd::Density(_))
                    | (VarKind::Deterministic, Cpd::Equations(_))
            );
            if !shape_ok {
                return Err(Error::InvalidModel(format!(
                    "{} has the wrong kind of distribution",
                    v.name
                )));
            }
            if cpd.case_count() != cases {
                return Err(Error::InvalidModel(format!(
                    "{} needs {cases} parent configurations, found {}",
                    v.name,
                    cpd.case_count()
                )));
            }
            if let (Cpd::Table(rows), VarKind::Discrete { states }) = (cpd, &v.kind) {
                if let Some(row) = rows.iter().find(|r| r.len() != states.len()) {
                    return Err(Error::InvalidModel(format!(
                        "{} has {} states but a table row of length {}",
                        v.name,
                        states.len(),
                        row.len()
                    )));
                }
            }
        }
        if let Some(nodes) = &n.join_tree {
            for node in nodes {
                if let Some(v) = node
                    .variables
                    .iter()
                    .chain(&node.assigned)
                    .find(|v| v.0 as usize >= n.variables.len())
                {
                    return Err(Error::UnknownVariable(v.to_string()));
                }
            }
        }
        Ok(n)
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = VarId> {
        (0..self.variables.len() as u32).map(VarId)
    }

    pub fn variable(&self, v: VarId) -> &Variable {
        &self.variables[v.0 as usize]
    }

    pub fn name(&self, v: VarId) -> &str {
        &self.variable(v).name
    }

    pub fn id_of(&self, name: &str) -> Result<VarId> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn lookup(&self, name: &str) -> Option<VarId> {
        self.index.get(name).copied()
    }

    pub fn cpd(&self, v: VarId) -> &Cpd {
        &self.cpds[v.0 as usize]
    }

    pub fn join_tree_hint(&self) -> Option<&[TreeNodeSpec]> {
        self.join_tree.as_deref()
    }

    pub fn is_discrete(&self, v: VarId) -> bool {
        self.variable(v).is_discrete()
    }

    pub fn cardinality(&self, v: VarId) -> usize {
        self.variable(v).states().len()
    }

    pub fn discrete_parents(&self, v: VarId) -> Vec<VarId> {
        self.variable(v)
            .parents
            .iter()
            .copied()
            .filter(|&p| self.is_discrete(p))
            .collect()
    }

    pub fn continuous_parents(&self, v: VarId) -> Vec<VarId> {
        self.variable(v)
            .parents
            .iter()
            .copied()
            .filter(|&p| !self.is_discrete(p))
            .collect()
    }

    /// Number of discrete-parent configurations of `v`.
    pub fn parent_configs(&self, v: VarId) -> usize {
        self.discrete_parents(v).iter().map(|&p| self.cardinality(p)).product()
    }

    /// Parents before children, or `None` when the parent graph has a cycle.
    pub fn topological_order(&self) -> Option<Vec<VarId>> {
        let n = self.variables.len();
        let mut indegree: Vec<usize> = self.variables.iter().map(|v| v.parents.len()).collect();
        let mut children = vec![Vec::new(); n];
        for (i, v) in self.variables.iter().enumerate() {
            for p in &v.parents {
                children[p.0 as usize].push(i);
            }
        }
        let mut ready: Vec<usize> = (0..n).rev().filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = ready.pop() {
            order.push(VarId(i as u32));
            for &c in children[i].iter().rev() {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.push(c);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    /// Renders an expression with this network's variable names.
    pub fn show(&self, e: &LinExpr) -> String {
        let names = |v: VarId| {
            self.variables
                .get(v.0 as usize)
                .map_or_else(|| v.to_string(), |x| x.name.clone())
        };
        e.display_with(&names).to_string()
    }
}
