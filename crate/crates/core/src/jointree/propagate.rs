use std::collections::HashMap;

use super::eliminate::{eliminate_all, Item};
use super::marginal::{marginal_moments, normalize_marginal, Moments};
use super::{name_error, Evidence, JoinTree};
use crate::expcalc::VarId;
use crate::model::{compile_potentials, Network};
use crate::potential::{
    combine_all, restrict, DeterministicPotential, Entry, Equation, Factor, MixedPotential, Observation,
};
use crate::{Error, Result};

/// A join tree after both propagation passes.
#[derive(Debug, Clone)]
pub struct Propagation<'a> {
    net: &'a Network,
    tree: &'a JoinTree,
    evidence: Evidence,
    inputs: Vec<Vec<Item>>,
    messages: HashMap<(usize, usize), Vec<Item>>,
}

/// Runs inward then outward passes rooted at the first node.
pub fn propagate<'a>(net: &'a Network, tree: &'a JoinTree, evidence: &Evidence) -> Result<Propagation<'a>> {
    propagate_from(net, tree, evidence, 0)
}

pub fn propagate_from<'a>(
    net: &'a Network,
    tree: &'a JoinTree,
    evidence: &Evidence,
    root: usize,
) -> Result<Propagation<'a>> {
    if tree.is_empty() {
        return Err(Error::InvalidJoinTree("no nodes".into()));
    }
    if root >= tree.len() {
        return Err(Error::InvalidJoinTree(format!("root {root} is out of range")));
    }
    let potentials = compile_potentials(net)?;
    let mut inputs: Vec<Vec<Item>> = vec![Vec::new(); tree.len()];
    for (i, node) in tree.nodes().iter().enumerate() {
        for v in &node.assigned {
            inputs[i].push(Item::potential(potentials[v.0 as usize].clone()));
        }
    }
    for (v, obs) in evidence.iter() {
        let home = tree
            .home_of(v)
            .ok_or_else(|| Error::InvalidJoinTree(format!("no node contains {}", net.name(v))))?;
        inputs[home].push(Item::Evidence(v, obs));
    }
    let mut prop = Propagation {
        net,
        tree,
        evidence: evidence.clone(),
        inputs,
        messages: HashMap::new(),
    };
    // Parent pointers and a pre-order from the root.
    let mut order = vec![root];
    let mut parent = vec![usize::MAX; tree.len()];
    parent[root] = root;
    let mut i = 0;
    while i < order.len() {
        let a = order[i];
        for &b in &tree.nodes()[a].neighbors {
            if parent[b] == usize::MAX {
                parent[b] = a;
                order.push(b);
            }
        }
        i += 1;
    }
    for &a in order.iter().rev().filter(|&&a| a != root) {
        prop.send(a, parent[a])?;
    }
    for &a in order.iter().filter(|&&a| a != root) {
        prop.send(parent[a], a)?;
    }
    Ok(prop)
}

impl<'a> Propagation<'a> {
    pub fn network(&self) -> &'a Network {
        self.net
    }

    pub fn tree(&self) -> &'a JoinTree {
        self.tree
    }

    pub fn evidence(&self) -> &Evidence {
        &self.evidence
    }

    /// Items assigned to a node before any message arrives.
    pub fn inputs(&self, node: usize) -> &[Item] {
        &self.inputs[node]
    }

    /// The message sent from `from` to its neighbour `to`.
    pub fn message(&self, from: usize, to: usize) -> Option<&[Item]> {
        self.messages.get(&(from, to)).map(Vec::as_slice)
    }

    /// Everything a node holds once all its neighbours have reported.
    pub fn node_items(&self, node: usize) -> Vec<Item> {
        let mut items = self.inputs[node].clone();
        for &k in &self.tree.nodes()[node].neighbors {
            items.extend(self.messages[&(k, node)].iter().cloned());
        }
        items
    }

    fn send(&mut self, from: usize, to: usize) -> Result<()> {
        let mut items = self.inputs[from].clone();
        for &k in &self.tree.nodes()[from].neighbors {
            if k != to {
                items.extend(self.messages[&(k, from)].iter().cloned());
            }
        }
        let sep = self.tree.separator(from, to);
        let nodes = self.tree.nodes();
        let msg = eliminate_all(items, &sep).map_err(|e| {
            name_error(
                self.net,
                e,
                &format!("message from node {} to node {}", nodes[from].id, nodes[to].id),
            )
        })?;
        self.messages.insert((from, to), msg);
        Ok(())
    }

    /// Unnormalized marginal of `v` at the smallest node containing it.
    pub fn query_marginal(&self, v: VarId) -> Result<MixedPotential> {
        let node = self
            .tree
            .home_of(v)
            .ok_or_else(|| Error::InvalidJoinTree(format!("no node contains {}", self.net.name(v))))?;
        let items = eliminate_all(self.node_items(node), &[v]).map_err(|e| {
            name_error(
                self.net,
                e,
                &format!(
                    "marginal of {} at node {}",
                    self.net.name(v),
                    self.tree.nodes()[node].id
                ),
            )
        })?;
        finish(self.net, items, v)
    }
}

/// Unnormalized marginal of `v` from the product of every conditional,
/// without a join tree.
pub fn global_marginal(net: &Network, evidence: &Evidence, v: VarId) -> Result<MixedPotential> {
    let mut items: Vec<Item> = compile_potentials(net)?.into_iter().map(Item::potential).collect();
    items.extend(evidence.iter().map(|(w, o)| Item::Evidence(w, o)));
    let items = eliminate_all(items, &[v]).map_err(|e| name_error(net, e, "global elimination"))?;
    finish(net, items, v)
}

pub fn query_marginal(prop: &Propagation, v: VarId) -> Result<MixedPotential> {
    prop.query_marginal(v)
}

/// Posterior mean and variance of a continuous variable.
pub fn posterior_moments(prop: &Propagation, v: VarId) -> Result<Moments> {
    let (m, _) = normalize_marginal(&prop.query_marginal(v)?)?;
    marginal_moments(&m)
}

/// Combines what is left over `v`. An observed `v` comes back as an
/// indicator (discrete) or a unit point mass (continuous) carrying the
/// probability of the evidence.
fn finish(net: &Network, items: Vec<Item>, v: VarId) -> Result<MixedPotential> {
    let obs = items.iter().find_map(|it| match it {
        Item::Evidence(w, o) if *w == v => Some(*o),
        _ => None,
    });
    let joint = combine_all(items.iter().filter_map(Item::as_potential))?;
    let Some(obs) = obs else {
        return Ok(joint);
    };
    let weight = restrict(&joint, v, obs)?;
    let w: f64 = weight
        .entries()
        .iter()
        .map(|e| {
            if e.is_zero() {
                Ok(0.0)
            } else if e.factors.is_empty() {
                Ok(e.mass())
            } else {
                e.density_value(&[] as &[(VarId, f64)])
            }
        })
        .sum::<Result<f64>>()?;
    match obs {
        Observation::State(s) => {
            let k = net.cardinality(v);
            let masses = (0..k).map(|i| if i == s { w } else { 0.0 }).collect();
            MixedPotential::from_masses(vec![(v, k)], masses)
        }
        Observation::Value(c) => {
            let point = Factor::deterministic(DeterministicPotential::single(Equation::point(v, c)));
            MixedPotential::new(Vec::new(), vec![v], vec![Entry::new(vec![w], vec![point])])
        }
    }
}
