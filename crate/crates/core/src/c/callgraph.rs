//! Call graph over defined functions, its SCC condensation and the
//! callee-first translation order.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use serde::{Deserialize, Serialize};

use super::structure::FunctionUnit;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallGraph {
    /// Function keys in declaration order.
    pub nodes: Vec<String>,
    /// `(caller, callee)` pairs, including self-calls.
    pub edges: Vec<(String, String)>,
    /// Node key to component id. Components are numbered in callee-first order.
    pub scc: BTreeMap<String, usize>,
}

impl CallGraph {
    pub fn component_count(&self) -> usize {
        self.scc.values().copied().max().map_or(0, |m| m + 1)
    }

    /// Members of each component, in declaration order.
    pub fn components(&self) -> Vec<Vec<String>> {
        let mut out = vec![Vec::new(); self.component_count()];
        for n in &self.nodes {
            out[self.scc[n]].push(n.clone());
        }
        out
    }

    /// Edges between distinct components.
    pub fn condensed_edges(&self) -> BTreeSet<(usize, usize)> {
        self.edges
            .iter()
            .map(|(a, b)| (self.scc[a], self.scc[b]))
            .filter(|(a, b)| a != b)
            .collect()
    }

    pub fn callees<'a>(&'a self, caller: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.edges
            .iter()
            .filter(move |(a, _)| a == caller)
            .map(|(_, b)| b.as_str())
    }
}

/// Build the graph from function units. `fns` must be in declaration order;
/// edges follow each unit's `calls` list.
pub fn build_call_graph(fns: &[FunctionUnit]) -> CallGraph {
    let defined: Vec<&FunctionUnit> = fns.iter().filter(|f| f.body.is_some()).collect();
    let nodes: Vec<String> = defined.iter().map(|f| f.key.clone()).collect();
    let mut edges = Vec::new();
    for f in &defined {
        for c in &f.calls {
            if nodes.contains(c) {
                let e = (f.key.clone(), c.clone());
                if !edges.contains(&e) {
                    edges.push(e);
                }
            }
        }
    }
    let scc = condense(&nodes, &edges);
    CallGraph { nodes, edges, scc }
}

/// Assign component ids so that a callee's component id is never larger
/// than its caller's, breaking ties by earliest member position.
fn condense(nodes: &[String], edges: &[(String, String)]) -> BTreeMap<String, usize> {
    let idx: HashMap<&str, usize> = nodes.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let pairs: Vec<(usize, usize)> = edges.iter().map(|(a, b)| (idx[a.as_str()], idx[b.as_str()])).collect();
    let rank = dependency_first_ranks(nodes.len(), &pairs);
    nodes.iter().cloned().zip(rank).collect()
}

/// Component rank of every node of a directed graph with `n` nodes, where
/// an edge `a -> b` means `a` depends on `b`. Dependencies get smaller ranks;
/// members of a cycle share a rank; independent components are ranked by
/// their smallest node index.
pub fn dependency_first_ranks(n: usize, edges: &[(usize, usize)]) -> Vec<usize> {
    let mut g: DiGraph<usize, ()> = DiGraph::new();
    let ids: Vec<NodeIndex> = (0..n).map(|i| g.add_node(i)).collect();
    for &(a, b) in edges {
        g.add_edge(ids[a], ids[b], ());
    }
    let comps = tarjan_scc(&g);
    let mut comp_of = vec![0usize; n];
    for (c, members) in comps.iter().enumerate() {
        for m in members {
            comp_of[g[*m]] = c;
        }
    }
    let first: Vec<usize> = comps
        .iter()
        .map(|m| m.iter().map(|x| g[*x]).min().unwrap())
        .collect();
    let k = comps.len();
    let mut pending = vec![0usize; k];
    let mut dependents: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); k];
    let mut seen = BTreeSet::new();
    for &(a, b) in edges {
        let (ca, cb) = (comp_of[a], comp_of[b]);
        if ca != cb && seen.insert((ca, cb)) {
            pending[ca] += 1;
            dependents[cb].insert(ca);
        }
    }
    let mut ready: BTreeSet<(usize, usize)> = (0..k)
        .filter(|c| pending[*c] == 0)
        .map(|c| (first[c], c))
        .collect();
    let mut rank = vec![0usize; k];
    let mut next = 0;
    while let Some((_, c)) = ready.pop_first() {
        rank[c] = next;
        next += 1;
        for &d in &dependents[c] {
            pending[d] -= 1;
            if pending[d] == 0 {
                ready.insert((first[d], d));
            }
        }
    }
    (0..n).map(|i| rank[comp_of[i]]).collect()
}

/// Callee-first order; members of one component stay in declaration order.
pub fn topological_order(g: &CallGraph) -> Vec<String> {
    g.components().into_iter().flatten().collect()
}
