//! JSON model files.
//!
//! ```json
//! {
//!   "variables": [{"name": "Y1", "kind": "discrete", "states": ["0", "1"]},
//!                 {"name": "Z1", "kind": "continuous"},
//!                 {"name": "X1", "kind": "deterministic", "parents": ["Y1", "Z1"]}],
//!   "cpds": [{"var": "Y1", "table": [0.6, 0.4]},
//!            {"var": "Z1", "density": {"template": "normal_mte", "mean": "0", "variance": 1}},
//!            {"var": "X1", "equations": {"Y1=0": "X1 = 2*Z1 - 1", "Y1=1": "X1 = 0.25*Z1 + 1"}}]
//! }
//! ```
//!
//! A CPD whose variable has discrete parents maps configuration keys such
//! as `"Y1=0,Y2=1"` to cases; without discrete parents the case is given
//! directly. Densities and equations may also be given once for every
//! configuration.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::expr::{parse_equation, parse_inequalities, parse_linear, ExprError, ExprErrorKind};
use super::{Cpd, DensitySpec, EquationSpec, Network, NodeKey, PieceSpec, TermSpec, TreeNodeSpec, VarKind, Variable};
use crate::expcalc::{LinExpr, VarId};
use crate::{Error, Result};

pub const NORMAL_TEMPLATE: &str = "normal_mte";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    variables: Vec<VariableFile>,
    cpds: Vec<CpdFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    jointree: Option<Vec<NodeFile>>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum KindFile {
    Discrete,
    Continuous,
    Deterministic,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VariableFile {
    name: String,
    kind: KindFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    states: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    parents: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CpdFile {
    var: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    table: Option<Cases<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    density: Option<Cases<DensityFile>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    equations: Option<Cases<String>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum Cases<T> {
    One(T),
    ByConfig(BTreeMap<String, T>),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum DensityFile {
    Template(TemplateFile),
    Pieces(PiecesFile),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum ExprText {
    Num(f64),
    Text(String),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TemplateFile {
    template: String,
    mean: ExprText,
    variance: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PiecesFile {
    pieces: Vec<PieceFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PieceFile {
    region: Vec<String>,
    terms: Vec<TermFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermFile {
    coeff: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    powers: BTreeMap<String, u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    exp: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeFile {
    id: NodeKey,
    variables: Vec<String>,
    #[serde(default)]
    neighbors: Vec<NodeKey>,
    #[serde(default)]
    assigned: Vec<String>,
}

/// Reads a model file. Syntax errors carry the line and column in `text`.
pub fn parse_model(text: &str) -> Result<Network> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    Reader::new(text, &file.variables)?.network(file)
}

/// Writes a model file that [`parse_model`] reads back to an equal network.
pub fn serialize_model(n: &Network) -> String {
    let variables = n
        .variables()
        .iter()
        .map(|v| VariableFile {
            name: v.name.clone(),
            kind: match v.kind {
                VarKind::Discrete { .. } => KindFile::Discrete,
                VarKind::Continuous => KindFile::Continuous,
                VarKind::Deterministic => KindFile::Deterministic,
            },
            states: v.is_discrete().then(|| v.states().to_vec()),
            parents: v.parents.iter().map(|&p| n.name(p).to_string()).collect(),
        })
        .collect();
    let cpds = n
        .ids()
        .map(|v| {
            let mut out = CpdFile {
                var: n.name(v).to_string(),
                table: None,
                density: None,
                equations: None,
            };
            match n.cpd(v) {
                Cpd::Table(rows) => out.table = Some(cases_out(n, v, rows.iter().cloned())),
                Cpd::Density(ds) => out.density = Some(cases_out(n, v, ds.iter().map(|d| density_out(n, d)))),
                Cpd::Equations(es) => {
                    let text = es.iter().map(|e| format!("{} = {}", n.show(&e.lhs), n.show(&e.rhs)));
                    out.equations = Some(cases_out(n, v, text));
                }
            }
            out
        })
        .collect();
    let jointree = n.join_tree_hint().map(|nodes| {
        nodes
            .iter()
            .map(|node| NodeFile {
                id: node.id.clone(),
                variables: node.variables.iter().map(|&v| n.name(v).to_string()).collect(),
                neighbors: node.neighbors.clone(),
                assigned: node.assigned.iter().map(|&v| n.name(v).to_string()).collect(),
            })
            .collect()
    });
    let file = ModelFile {
        variables,
        cpds,
        jointree,
    };
    serde_json::to_string_pretty(&file).expect("model files serialize")
}

/// `"Y1=0,Y2=1"` labels for every discrete-parent configuration of `v`.
pub(crate) fn config_keys(n: &Network, v: VarId) -> Vec<String> {
    let parents = n.discrete_parents(v);
    let mut keys = vec![String::new()];
    for p in parents {
        let sep = if keys[0].is_empty() { "" } else { "," };
        keys = keys
            .iter()
            .flat_map(|k| {
                n.variable(p)
                    .states()
                    .iter()
                    .map(move |s| format!("{k}{sep}{}={s}", n.name(p)))
            })
            .collect();
    }
    keys
}

fn cases_out<T>(n: &Network, v: VarId, items: impl Iterator<Item = T>) -> Cases<T> {
    let mut items: Vec<T> = items.collect();
    if n.discrete_parents(v).is_empty() && items.len() == 1 {
        return Cases::One(items.remove(0));
    }
    Cases::ByConfig(config_keys(n, v).into_iter().zip(items).collect())
}

fn density_out(n: &Network, d: &DensitySpec) -> DensityFile {
    match d {
        DensitySpec::Normal { mean, variance } => DensityFile::Template(TemplateFile {
            template: NORMAL_TEMPLATE.to_string(),
            mean: ExprText::Text(n.show(mean)),
            variance: *variance,
        }),
        DensitySpec::Pieces(pieces) => DensityFile::Pieces(PiecesFile {
            pieces: pieces
                .iter()
                .map(|p| PieceFile {
                    region: p
                        .region
                        .iter()
                        .map(|q| format!("{} {} {}", n.show(&q.lhs), q.op.symbol(), n.show(&q.rhs)))
                        .collect(),
                    terms: p
                        .terms
                        .iter()
                        .map(|t| TermFile {
                            coeff: t.coeff,
                            powers: t.powers.iter().map(|&(v, k)| (n.name(v).to_string(), k)).collect(),
                            exp: t.exponent.as_ref().map(|e| n.show(e)),
                        })
                        .collect(),
                })
                .collect(),
        }),
    }
}

struct Reader<'a> {
    source: &'a str,
    index: HashMap<String, VarId>,
    kinds: Vec<VarKind>,
    parents: Vec<Vec<VarId>>,
}

impl<'a> Reader<'a> {
    fn new(source: &'a str, vars: &[VariableFile]) -> Result<Self> {
        let mut index = HashMap::new();
        for (i, v) in vars.iter().enumerate() {
            if index.insert(v.name.clone(), VarId(i as u32)).is_some() {
                return Err(Error::InvalidModel(format!("variable {} declared twice", v.name)));
            }
        }
        let mut kinds = Vec::with_capacity(vars.len());
        let mut parents = Vec::with_capacity(vars.len());
        for v in vars {
            kinds.push(match (v.kind, &v.states) {
                (KindFile::Discrete, Some(states)) => VarKind::Discrete { states: states.clone() },
                (KindFile::Discrete, None) => {
                    return Err(Error::InvalidModel(format!(
                        "discrete variable {} lists no states",
                        v.name
                    )))
                }
                (_, Some(_)) => {
                    return Err(Error::InvalidModel(format!(
                        "continuous variable {} lists states",
                        v.name
                    )))
                }
                (KindFile::Continuous, None) => VarKind::Continuous,
                (KindFile::Deterministic, None) => VarKind::Deterministic,
            });
            let ps = v
                .parents
                .iter()
                .map(|p| index.get(p).copied().ok_or_else(|| Error::UnknownVariable(p.clone())))
                .collect::<Result<Vec<_>>>()?;
            parents.push(ps);
        }
        Ok(Reader {
            source,
            index,
            kinds,
            parents,
        })
    }

    fn resolve(&self) -> impl Fn(&str) -> Option<VarId> + '_ {
        |name| self.index.get(name).copied()
    }

    /// Line and column of `offset` inside the string literal `text`, found
    /// by searching the source. Falls back to the offset alone.
    fn locate(&self, text: &str, offset: usize) -> (usize, usize) {
        let quoted = serde_json::to_string(text).unwrap_or_default();
        let Some(start) = self.source.find(&quoted) else {
            return (0, offset + 1);
        };
        let at = start + 1 + offset.min(text.len());
        let before = &self.source[..at];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().map_or(0, |s| s.chars().count()) + 1;
        (line, column)
    }

    fn expr_error(&self, text: &str, e: ExprError) -> Error {
        let (line, column) = self.locate(text, e.offset);
        match e.kind {
            ExprErrorKind::Unknown(name) => Error::UnknownVariable(name),
            ExprErrorKind::Nonlinear(m) => Error::NonlinearExpression(format!("{m} in {text:?} at {line}:{column}")),
            ExprErrorKind::Syntax(m) => Error::Parse {
                line,
                column,
                message: format!("{m} in {text:?}"),
            },
        }
    }

    fn linear(&self, text: &str) -> Result<LinExpr> {
        parse_linear(text, &self.resolve()).map_err(|e| self.expr_error(text, e))
    }

    fn network(&self, file: ModelFile) -> Result<Network> {
        let n = file.variables.len();
        let mut cpds: Vec<Option<Cpd>> = vec![None; n];
        for c in file.cpds {
            let v = *self
                .index
                .get(&c.var)
                .ok_or_else(|| Error::UnknownVariable(c.var.clone()))?;
            if cpds[v.0 as usize].is_some() {
                return Err(Error::InvalidModel(format!("{} has two distributions", c.var)));
            }
            let name = c.var.clone();
            cpds[v.0 as usize] = Some(self.cpd(v, &name, c)?);
        }
        let cpds = cpds
            .into_iter()
            .zip(&file.variables)
            .map(|(c, v)| c.ok_or_else(|| Error::InvalidModel(format!("{} has no distribution", v.name))))
            .collect::<Result<Vec<_>>>()?;
        let variables = file
            .variables
            .into_iter()
            .zip(self.kinds.iter().cloned().zip(self.parents.iter().cloned()))
            .map(|(v, (kind, parents))| Variable {
                name: v.name,
                kind,
                parents,
            })
            .collect();
        let join_tree = file
            .jointree
            .map(|nodes| {
                nodes
                    .into_iter()
                    .map(|node| {
                        let ids = |names: Vec<String>| {
                            names
                                .into_iter()
                                .map(|s| self.index.get(&s).copied().ok_or(Error::UnknownVariable(s)))
                                .collect::<Result<Vec<_>>>()
                        };
                        Ok(TreeNodeSpec {
                            id: node.id,
                            variables: ids(node.variables)?,
                            neighbors: node.neighbors,
                            assigned: ids(node.assigned)?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .transpose()?;
        Network::new(variables, cpds, join_tree)
    }

    fn discrete_parents(&self, v: VarId) -> Vec<VarId> {
        self.parents[v.0 as usize]
            .iter()
            .copied()
            .filter(|p| matches!(self.kinds[p.0 as usize], VarKind::Discrete { .. }))
            .collect()
    }

    fn states(&self, v: VarId) -> &[String] {
        match &self.kinds[v.0 as usize] {
            VarKind::Discrete { states } => states,
            _ => &[],
        }
    }

    /// Index of a configuration key among the parent configurations.
    fn config_index(&self, v: VarId, key: &str) -> Result<usize> {
        let parents = self.discrete_parents(v);
        let mut states: Vec<Option<usize>> = vec![None; parents.len()];
        for part in key.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let Some((name, label)) = part.split_once('=') else {
                return Err(Error::InvalidModel(format!(
                    "configuration {key:?}: expected Name=state"
                )));
            };
            let (name, label) = (name.trim(), label.trim());
            let p = *self
                .index
                .get(name)
                .ok_or_else(|| Error::UnknownVariable(name.to_string()))?;
            let Some(i) = parents.iter().position(|&q| q == p) else {
                return Err(Error::InvalidModel(format!(
                    "configuration {key:?}: {name} is not a discrete parent"
                )));
            };
            let s = self
                .states(p)
                .iter()
                .position(|x| x == label)
                .ok_or_else(|| Error::UnknownState {
                    var: name.to_string(),
                    state: label.to_string(),
                })?;
            if states[i].replace(s).is_some() {
                return Err(Error::InvalidModel(format!("configuration {key:?} names {name} twice")));
            }
        }
        let mut idx = 0;
        for (p, s) in parents.iter().zip(&states) {
            let s = s.ok_or_else(|| {
                Error::InvalidModel(format!(
                    "configuration {key:?} does not give a state for {}",
                    self.name_of(*p)
                ))
            })?;
            idx = idx * self.states(*p).len() + s;
        }
        Ok(idx)
    }

    fn name_of(&self, v: VarId) -> &str {
        self.index
            .iter()
            .find(|(_, &w)| w == v)
            .map(|(k, _)| k.as_str())
            .unwrap_or("?")
    }

    fn cases<T, U>(
        &self,
        v: VarId,
        name: &str,
        cases: Cases<T>,
        broadcast: bool,
        mut convert: impl FnMut(T) -> Result<U>,
    ) -> Result<Vec<U>>
    where
        U: Clone,
    {
        let count: usize = self.discrete_parents(v).iter().map(|&p| self.states(p).len()).product();
        match cases {
            Cases::One(x) => {
                if count != 1 && !broadcast {
                    return Err(Error::InvalidModel(format!(
                        "{name} has discrete parents; give one case per configuration"
                    )));
                }
                Ok(vec![convert(x)?; count])
            }
            Cases::ByConfig(map) => {
                let mut out: Vec<Option<U>> = vec![None; count];
                for (key, x) in map {
                    let i = self.config_index(v, &key)?;
                    if out[i].is_some() {
                        return Err(Error::InvalidModel(format!(
                            "{name}: configuration {key:?} given twice"
                        )));
                    }
                    out[i] = Some(convert(x)?);
                }
                out.into_iter()
                    .enumerate()
                    .map(|(i, x)| {
                        x.ok_or_else(|| Error::InvalidModel(format!("{name}: parent configuration #{i} is missing")))
                    })
                    .collect()
            }
        }
    }

    fn cpd(&self, v: VarId, name: &str, c: CpdFile) -> Result<Cpd> {
        let given = [c.table.is_some(), c.density.is_some(), c.equations.is_some()];
        if given.iter().filter(|&&b| b).count() != 1 {
            return Err(Error::InvalidModel(format!(
                "the distribution of {name} needs exactly one of table, density, equations"
            )));
        }
        let kind = &self.kinds[v.0 as usize];
        if let Some(t) = c.table {
            if !matches!(kind, VarKind::Discrete { .. }) {
                return Err(Error::InvalidModel(format!("{name} is not discrete but has a table")));
            }
            return Ok(Cpd::Table(self.cases(v, name, t, false, Ok)?));
        }
        if let Some(d) = c.density {
            if !matches!(kind, VarKind::Continuous) {
                return Err(Error::InvalidModel(format!(
                    "{name} is not continuous but has a density"
                )));
            }
            return Ok(Cpd::Density(self.cases(v, name, d, true, |d| self.density(d))?));
        }
        let eqs = c.equations.expect("one of three is present");
        if !matches!(kind, VarKind::Deterministic) {
            return Err(Error::InvalidModel(format!(
                "{name} is not deterministic but has equations"
            )));
        }
        Ok(Cpd::Equations(self.cases(v, name, eqs, true, |text| {
            let (lhs, rhs) = parse_equation(&text, &self.resolve()).map_err(|e| self.expr_error(&text, e))?;
            Ok(EquationSpec { lhs, rhs })
        })?))
    }

    fn density(&self, d: DensityFile) -> Result<DensitySpec> {
        match d {
            DensityFile::Template(t) => {
                if t.template != NORMAL_TEMPLATE {
                    return Err(Error::InvalidModel(format!(
                        "unknown density template {:?} (expected {NORMAL_TEMPLATE:?})",
                        t.template
                    )));
                }
                let mean = match t.mean {
                    ExprText::Num(x) => LinExpr::constant(x),
                    ExprText::Text(s) => self.linear(&s)?,
                };
                Ok(DensitySpec::Normal {
                    mean,
                    variance: t.variance,
                })
            }
            DensityFile::Pieces(p) => {
                let pieces = p
                    .pieces
                    .into_iter()
                    .map(|piece| {
                        let mut region = Vec::new();
                        for text in &piece.region {
                            region.extend(
                                parse_inequalities(text, &self.resolve()).map_err(|e| self.expr_error(text, e))?,
                            );
                        }
                        let terms = piece
                            .terms
                            .into_iter()
                            .map(|t| {
                                let powers = t
                                    .powers
                                    .into_iter()
                                    .map(|(name, k)| {
                                        let v = *self.index.get(&name).ok_or(Error::UnknownVariable(name))?;
                                        Ok((v, k))
                                    })
                                    .collect::<Result<Vec<_>>>()?;
                                let exponent = t.exp.as_deref().map(|s| self.linear(s)).transpose()?;
                                Ok(TermSpec {
                                    coeff: t.coeff,
                                    powers,
                                    exponent,
                                })
                            })
                            .collect::<Result<Vec<_>>>()?;
                        Ok(PieceSpec { region, terms })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(DensitySpec::Pieces(pieces))
            }
        }
    }
}
