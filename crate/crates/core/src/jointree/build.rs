use std::collections::{BTreeSet, VecDeque};

use crate::expcalc::VarId;
use crate::model::{Network, NodeKey};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct JoinTreeNode {
    pub id: NodeKey,
    /// Sorted.
    pub label: Vec<VarId>,
    /// Indices into [`JoinTree::nodes`].
    pub neighbors: Vec<usize>,
    /// Variables whose conditional distributions live here.
    pub assigned: Vec<VarId>,
}

/// A tree of variable sets with the running-intersection property and at
/// most three neighbours per node.
#[derive(Debug, Clone, PartialEq)]
pub struct JoinTree {
    nodes: Vec<JoinTreeNode>,
}

impl JoinTree {
    /// Checks the tree properties and places any unassigned distribution at
    /// the smallest node that covers its family.
    pub fn from_nodes(net: &Network, mut nodes: Vec<JoinTreeNode>) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidJoinTree(msg));
        for node in &mut nodes {
            node.label.sort();
            node.label.dedup();
        }
        let n = nodes.len();
        if n == 0 {
            return if net.is_empty() {
                Ok(JoinTree { nodes })
            } else {
                bad("no nodes".into())
            };
        }
        let ids: BTreeSet<&NodeKey> = nodes.iter().map(|x| &x.id).collect();
        if ids.len() != n {
            return bad("duplicate node id".into());
        }
        let mut edges = 0;
        for (i, node) in nodes.iter().enumerate() {
            let distinct: BTreeSet<usize> = node.neighbors.iter().copied().collect();
            if distinct.len() != node.neighbors.len() || distinct.contains(&i) {
                return bad(format!("node {} lists a neighbour twice or itself", node.id));
            }
            if node.neighbors.len() > 3 {
                return bad(format!(
                    "node {} has {} neighbours (at most 3)",
                    node.id,
                    node.neighbors.len()
                ));
            }
            for &j in &node.neighbors {
                if j >= n || !nodes[j].neighbors.contains(&i) {
                    return bad(format!("edge at node {} is not symmetric", node.id));
                }
            }
            edges += node.neighbors.len();
        }
        if edges / 2 != n - 1 || reachable(&nodes, 0, |_| true).len() != n {
            return bad("the nodes do not form a tree".into());
        }
        for v in net.ids() {
            let holders: Vec<usize> = (0..n).filter(|&i| nodes[i].label.binary_search(&v).is_ok()).collect();
            let Some(&start) = holders.first() else {
                return bad(format!("no node contains {}", net.name(v)));
            };
            let seen = reachable(&nodes, start, |j| nodes[j].label.binary_search(&v).is_ok());
            if seen.len() != holders.len() {
                return bad(format!("the nodes containing {} are not connected", net.name(v)));
            }
        }
        let mut placed = vec![false; net.len()];
        for node in &nodes {
            for &v in &node.assigned {
                if std::mem::replace(&mut placed[v.0 as usize], true) {
                    return bad(format!("{} is assigned twice", net.name(v)));
                }
                if !family(net, v).iter().all(|w| node.label.binary_search(w).is_ok()) {
                    return bad(format!(
                        "node {} cannot hold the distribution of {}",
                        node.id,
                        net.name(v)
                    ));
                }
            }
        }
        for v in net.ids().filter(|v| !placed[v.0 as usize]) {
            let fam = family(net, v);
            let Some(i) = (0..n)
                .filter(|&i| fam.iter().all(|w| nodes[i].label.binary_search(w).is_ok()))
                .min_by_key(|&i| (nodes[i].label.len(), i))
            else {
                return bad(format!("no node contains {} together with its parents", net.name(v)));
            };
            nodes[i].assigned.push(v);
        }
        for node in &mut nodes {
            node.assigned.sort();
        }
        Ok(JoinTree { nodes })
    }

    pub fn nodes(&self) -> &[JoinTreeNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node_index(&self, id: &NodeKey) -> Option<usize> {
        self.nodes.iter().position(|x| &x.id == id)
    }

    /// The node whose label is exactly `vars` (in any order).
    pub fn find(&self, vars: &[VarId]) -> Option<usize> {
        let mut want = vars.to_vec();
        want.sort();
        self.nodes.iter().position(|x| x.label == want)
    }

    /// The smallest node containing `v`.
    pub fn home_of(&self, v: VarId) -> Option<usize> {
        (0..self.nodes.len())
            .filter(|&i| self.nodes[i].label.binary_search(&v).is_ok())
            .min_by_key(|&i| (self.nodes[i].label.len(), i))
    }

    pub fn separator(&self, a: usize, b: usize) -> Vec<VarId> {
        let other = &self.nodes[b].label;
        self.nodes[a]
            .label
            .iter()
            .copied()
            .filter(|v| other.binary_search(v).is_ok())
            .collect()
    }
}

fn family(net: &Network, v: VarId) -> Vec<VarId> {
    let mut f = net.variable(v).parents.clone();
    f.push(v);
    f
}

fn reachable(nodes: &[JoinTreeNode], start: usize, allowed: impl Fn(usize) -> bool) -> BTreeSet<usize> {
    let mut seen = BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(i) = queue.pop_front() {
        for &j in &nodes[i].neighbors {
            if allowed(j) && seen.insert(j) {
                queue.push_back(j);
            }
        }
    }
    seen
}

/// The tree from the model file's hint when there is one and no order is
/// given; otherwise one built by eliminating variables from the moral graph
/// (min-degree order unless `order` is supplied).
pub fn build_join_tree(net: &Network, order: Option<&[VarId]>) -> Result<JoinTree> {
    if let (None, Some(hint)) = (order, net.join_tree_hint()) {
        let nodes = hint
            .iter()
            .map(|h| {
                let neighbors = h
                    .neighbors
                    .iter()
                    .map(|k| {
                        hint.iter()
                            .position(|x| &x.id == k)
                            .ok_or_else(|| Error::InvalidJoinTree(format!("node {} names unknown neighbour {k}", h.id)))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(JoinTreeNode {
                    id: h.id.clone(),
                    label: h.variables.clone(),
                    neighbors,
                    assigned: h.assigned.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        return JoinTree::from_nodes(net, nodes);
    }
    if let Some(order) = order {
        let distinct: BTreeSet<VarId> = order.iter().copied().collect();
        if distinct.len() != net.len() || order.len() != net.len() || order.iter().any(|v| v.0 as usize >= net.len()) {
            return Err(Error::InvalidJoinTree(
                "the elimination order must list every variable once".into(),
            ));
        }
    }
    let cliques = eliminate_cliques(net, order);
    let nodes = binarize(cliques);
    JoinTree::from_nodes(net, nodes)
}

/// Cliques of the elimination, joined into a tree. Each clique is linked to
/// the clique of the first later-eliminated variable in its separator.
fn eliminate_cliques(net: &Network, order: Option<&[VarId]>) -> Vec<(BTreeSet<VarId>, Option<usize>)> {
    let n = net.len();
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for v in net.ids() {
        let fam: Vec<usize> = family(net, v).iter().map(|w| w.0 as usize).collect();
        for &a in &fam {
            for &b in &fam {
                if a != b {
                    adj[a].insert(b);
                }
            }
        }
    }
    let mut alive: BTreeSet<usize> = (0..n).collect();
    let mut elim_pos = vec![0; n];
    let mut steps: Vec<(usize, BTreeSet<usize>)> = Vec::with_capacity(n);
    for step in 0..n {
        let v = match order {
            Some(o) => o[step].0 as usize,
            None => *alive
                .iter()
                .min_by_key(|&&v| (adj[v].len(), v))
                .expect("alive is non-empty"),
        };
        let nbrs = adj[v].clone();
        for &a in &nbrs {
            for &b in &nbrs {
                if a != b {
                    adj[a].insert(b);
                }
            }
            adj[a].remove(&v);
        }
        alive.remove(&v);
        elim_pos[v] = step;
        let mut clique = nbrs;
        clique.insert(v);
        steps.push((v, clique));
    }
    let mut parent: Vec<Option<usize>> = vec![None; n];
    for (i, (v, clique)) in steps.iter().enumerate() {
        let sep = clique.iter().filter(|&&w| w != *v);
        parent[i] = match sep.map(|&w| elim_pos[w]).min() {
            Some(j) => Some(j),
            None if i + 1 < n => Some(n - 1),
            None => None,
        };
    }
    // Fold cliques contained in their parent into it.
    let mut keep = vec![true; n];
    for i in 0..n {
        let Some(p) = parent[i] else { continue };
        if steps[i].1.is_subset(&steps[p].1) {
            keep[i] = false;
            for q in parent.iter_mut() {
                if *q == Some(i) {
                    *q = Some(p);
                }
            }
        }
    }
    let index: Vec<usize> = keep
        .iter()
        .scan(0, |k, &b| {
            let i = *k;
            if b {
                *k += 1;
            }
            Some(i)
        })
        .collect();
    (0..n)
        .filter(|&i| keep[i])
        .map(|i| {
            let label = steps[i].1.iter().map(|&w| VarId(w as u32)).collect();
            (label, parent[i].map(|p| index[p]))
        })
        .collect()
}

/// Splits nodes with more than three neighbours by chaining copies.
fn binarize(cliques: Vec<(BTreeSet<VarId>, Option<usize>)>) -> Vec<JoinTreeNode> {
    let mut labels: Vec<Vec<VarId>> = cliques.iter().map(|(l, _)| l.iter().copied().collect()).collect();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); cliques.len()];
    for (i, (_, p)) in cliques.iter().enumerate() {
        if let Some(p) = *p {
            adj[i].push(p);
            adj[p].push(i);
        }
    }
    let mut i = 0;
    while i < adj.len() {
        if adj[i].len() > 3 {
            let moved: Vec<usize> = adj[i].split_off(2);
            let w = adj.len();
            labels.push(labels[i].clone());
            adj.push(Vec::new());
            adj[i].push(w);
            adj[w].push(i);
            for m in moved {
                for x in adj[m].iter_mut() {
                    if *x == i {
                        *x = w;
                    }
                }
                adj[w].push(m);
            }
        }
        i += 1;
    }
    labels
        .into_iter()
        .zip(adj)
        .enumerate()
        .map(|(i, (label, neighbors))| JoinTreeNode {
            id: NodeKey::Num(i as u64 + 1),
            label,
            neighbors,
            assigned: Vec::new(),
        })
        .collect()
}
