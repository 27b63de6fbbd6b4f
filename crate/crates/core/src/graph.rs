//! Model planning graph: construction, small-node merging and serial
//! decomposition into chain components.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

/// Identifier of a (possibly merged) model node.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub String);

impl NodeId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_string())
    }
}

impl From<String> for NodeId {
    fn from(s: String) -> Self {
        NodeId(s)
    }
}

/// One or more fused model layers.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerNode {
    pub id: NodeId,
    pub param_bytes: u64,
    /// Output size for one reference-size microbatch.
    pub activation_bytes: u64,
    /// Source layers fused into this node. Empty only for virtual terminals.
    pub original_ids: Vec<NodeId>,
    /// Zero-cost source/sink added to make decomposition well defined.
    pub is_virtual: bool,
}

impl LayerNode {
    pub fn new(id: impl Into<NodeId>, param_bytes: u64, activation_bytes: u64) -> Self {
        let id = id.into();
        LayerNode {
            original_ids: vec![id.clone()],
            id,
            param_bytes,
            activation_bytes,
            is_virtual: false,
        }
    }

    fn virtual_terminal(id: NodeId) -> Self {
        LayerNode {
            id,
            param_bytes: 0,
            activation_bytes: 0,
            original_ids: Vec::new(),
            is_virtual: true,
        }
    }
}

/// Validated layer DAG.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelGraph {
    nodes: Vec<LayerNode>,
    edges: Vec<(usize, usize)>,
    total_param_bytes: u64,
    index: BTreeMap<NodeId, usize>,
    succ: Vec<Vec<usize>>,
    pred: Vec<Vec<usize>>,
    topo: Vec<usize>,
}

/// Builds and validates a model graph. Duplicate edges are collapsed.
pub fn build_model_graph(layers: Vec<LayerNode>, edges: Vec<(NodeId, NodeId)>) -> Result<ModelGraph> {
    ModelGraph::new(layers, edges)
}

impl ModelGraph {
    pub fn new(layers: Vec<LayerNode>, edges: Vec<(NodeId, NodeId)>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::EmptyGraph);
        }
        let mut index = BTreeMap::new();
        for (i, n) in layers.iter().enumerate() {
            if index.insert(n.id.clone(), i).is_some() {
                return Err(Error::DuplicateId(n.id.0.clone()));
            }
            if n.original_ids.is_empty() && !n.is_virtual {
                return Err(Error::InvalidArgument(alloc::format!(
                    "node `{}` lists no original layers",
                    n.id
                )));
            }
        }
        let mut seen = BTreeSet::new();
        let mut idx_edges = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            let (Some(&ia), Some(&ib)) = (index.get(&a), index.get(&b)) else {
                return Err(Error::DanglingEdge { from: a.0, to: b.0 });
            };
            if ia == ib {
                return Err(Error::CycleDetected);
            }
            if seen.insert((ia, ib)) {
                idx_edges.push((ia, ib));
            }
        }
        Self::from_indexed(layers, idx_edges, index)
    }

    fn from_indexed(
        nodes: Vec<LayerNode>,
        edges: Vec<(usize, usize)>,
        index: BTreeMap<NodeId, usize>,
    ) -> Result<Self> {
        let n = nodes.len();
        let mut succ = vec![Vec::new(); n];
        let mut pred = vec![Vec::new(); n];
        for &(a, b) in &edges {
            succ[a].push(b);
            pred[b].push(a);
        }
        let topo = topo_sort(n, &succ, &pred).ok_or(Error::CycleDetected)?;
        let total_param_bytes = nodes.iter().map(|n| n.param_bytes).sum();
        Ok(ModelGraph {
            nodes,
            edges,
            total_param_bytes,
            index,
            succ,
            pred,
            topo,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[LayerNode] {
        &self.nodes
    }

    pub fn node(&self, idx: usize) -> &LayerNode {
        &self.nodes[idx]
    }

    pub fn index_of(&self, id: &NodeId) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_ids(&self) -> Vec<(NodeId, NodeId)> {
        self.edges
            .iter()
            .map(|&(a, b)| (self.nodes[a].id.clone(), self.nodes[b].id.clone()))
            .collect()
    }

    pub fn successors(&self, idx: usize) -> &[usize] {
        &self.succ[idx]
    }

    pub fn predecessors(&self, idx: usize) -> &[usize] {
        &self.pred[idx]
    }

    /// Kahn order, ties broken by insertion index.
    pub fn topo_order(&self) -> &[usize] {
        &self.topo
    }

    pub fn total_param_bytes(&self) -> u64 {
        self.total_param_bytes
    }

    pub fn sources(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.pred[i].is_empty()).collect()
    }

    pub fn sinks(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.succ[i].is_empty()).collect()
    }

    /// Every original layer id, in node order.
    pub fn original_layers(&self) -> Vec<NodeId> {
        self.nodes.iter().flat_map(|n| n.original_ids.iter().cloned()).collect()
    }
}

fn topo_sort(n: usize, succ: &[Vec<usize>], pred: &[Vec<usize>]) -> Option<Vec<usize>> {
    let mut indeg: Vec<usize> = pred.iter().map(Vec::len).collect();
    let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(v) = ready.pop_first() {
        order.push(v);
        for &w in &succ[v] {
            indeg[w] -= 1;
            if indeg[w] == 0 {
                ready.insert(w);
            }
        }
    }
    (order.len() == n).then_some(order)
}

/// Fuses adjacent nodes along unbranched paths, front to back, while the
/// fused parameter size stays strictly below `delta` of the model total.
pub fn merge_small_nodes(g: &ModelGraph, delta: f64) -> ModelGraph {
    let threshold = delta * g.total_param_bytes as f64;
    let n = g.len();
    let mut group_of = vec![usize::MAX; n];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for &v in g.topo_order() {
        if group_of[v] != usize::MAX {
            continue;
        }
        let gid = groups.len();
        let mut members = vec![v];
        group_of[v] = gid;
        let mut size = g.nodes[v].param_bytes;
        let mut tail = v;
        while !g.nodes[tail].is_virtual && g.succ[tail].len() == 1 {
            let next = g.succ[tail][0];
            if g.pred[next].len() != 1 || g.nodes[next].is_virtual || group_of[next] != usize::MAX {
                break;
            }
            let fused = size + g.nodes[next].param_bytes;
            if (fused as f64) >= threshold {
                break;
            }
            size = fused;
            group_of[next] = gid;
            members.push(next);
            tail = next;
        }
        groups.push(members);
    }

    let mut nodes = Vec::with_capacity(groups.len());
    let mut index = BTreeMap::new();
    for (gid, members) in groups.iter().enumerate() {
        let first = &g.nodes[members[0]];
        let last = &g.nodes[*members.last().unwrap()];
        let node = LayerNode {
            id: first.id.clone(),
            param_bytes: members.iter().map(|&m| g.nodes[m].param_bytes).sum(),
            activation_bytes: last.activation_bytes,
            original_ids: members
                .iter()
                .flat_map(|&m| g.nodes[m].original_ids.iter().cloned())
                .collect(),
            is_virtual: first.is_virtual,
        };
        index.insert(node.id.clone(), gid);
        nodes.push(node);
    }
    let mut seen = BTreeSet::new();
    let mut edges = Vec::new();
    for &(a, b) in &g.edges {
        let (ga, gb) = (group_of[a], group_of[b]);
        if ga != gb && seen.insert((ga, gb)) {
            edges.push((ga, gb));
        }
    }
    ModelGraph::from_indexed(nodes, edges, index).expect("merging unbranched paths keeps the graph acyclic")
}

/// Adds zero-cost virtual terminals when the graph has several entry or exit nodes.
pub fn with_virtual_terminals(g: &ModelGraph) -> ModelGraph {
    let sources = g.sources();
    let sinks = g.sinks();
    if sources.len() <= 1 && sinks.len() <= 1 {
        return g.clone();
    }
    let mut nodes = g.nodes.clone();
    let mut edges = g.edges.clone();
    let mut index = g.index.clone();
    let fresh = |base: &str, nodes: &mut Vec<LayerNode>, index: &mut BTreeMap<NodeId, usize>| {
        let mut name = String::from(base);
        while index.contains_key(&NodeId(name.clone())) {
            name.push('_');
        }
        let id = NodeId(name);
        index.insert(id.clone(), nodes.len());
        nodes.push(LayerNode::virtual_terminal(id));
        nodes.len() - 1
    };
    if sources.len() > 1 {
        let s = fresh("__source", &mut nodes, &mut index);
        edges.extend(sources.iter().map(|&v| (s, v)));
    }
    if sinks.len() > 1 {
        let t = fresh("__sink", &mut nodes, &mut index);
        edges.extend(sinks.iter().map(|&v| (v, t)));
    }
    ModelGraph::from_indexed(nodes, edges, index).expect("virtual terminals cannot close a cycle")
}

/// A serial component: parallel chains executed between two cut nodes, or
/// a single chain of consecutive cut nodes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainComponent {
    pub chains: Vec<Vec<NodeId>>,
}

/// Nodes lying on every source-to-sink path, in topological order.
pub fn cut_nodes(g: &ModelGraph) -> Result<Vec<usize>> {
    let (s, t) = terminals(g)?;
    let mut cuts = Vec::new();
    for &v in g.topo_order() {
        if v == s || v == t || !reaches_avoiding(g, s, t, v) {
            cuts.push(v);
        }
    }
    Ok(cuts)
}

fn terminals(g: &ModelGraph) -> Result<(usize, usize)> {
    let sources = g.sources();
    let sinks = g.sinks();
    if sources.len() != 1 {
        return Err(Error::MultipleSources);
    }
    if sinks.len() != 1 {
        return Err(Error::MultipleSinks);
    }
    Ok((sources[0], sinks[0]))
}

fn reaches_avoiding(g: &ModelGraph, from: usize, to: usize, avoid: usize) -> bool {
    let mut seen = vec![false; g.len()];
    let mut queue = VecDeque::from([from]);
    seen[from] = true;
    while let Some(v) = queue.pop_front() {
        if v == to {
            return true;
        }
        for &w in &g.succ[v] {
            if w != avoid && !seen[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    false
}

fn reachable(g: &ModelGraph, from: usize, forward: bool) -> Vec<bool> {
    let mut seen = vec![false; g.len()];
    let mut queue = VecDeque::from([from]);
    seen[from] = true;
    while let Some(v) = queue.pop_front() {
        let next = if forward { &g.succ[v] } else { &g.pred[v] };
        for &w in next {
            if !seen[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    seen
}

/// Splits the graph at cut nodes. Regions between consecutive cut nodes
/// become multi-chain components; runs of directly connected cut nodes
/// become single-chain components. Virtual terminals are dropped from the
/// output.
pub fn serial_decompose(g: &ModelGraph) -> Result<Vec<ChainComponent>> {
    let cuts = cut_nodes(g)?;
    let mut components: Vec<Vec<Vec<usize>>> = Vec::new();
    let mut run = vec![cuts[0]];
    for pair in cuts.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let down = reachable(g, a, true);
        let up = reachable(g, b, false);
        let region: Vec<usize> = g
            .topo_order()
            .iter()
            .copied()
            .filter(|&v| v != a && v != b && down[v] && up[v])
            .collect();
        if region.is_empty() {
            run.push(b);
            continue;
        }
        components.push(vec![core::mem::take(&mut run)]);
        components.push(region_chains(g, &region));
        run.push(b);
    }
    components.push(vec![run]);

    let out = components
        .into_iter()
        .filter_map(|chains| {
            let chains: Vec<Vec<NodeId>> = chains
                .into_iter()
                .map(|c| {
                    c.into_iter()
                        .filter(|&v| !g.nodes[v].is_virtual)
                        .map(|v| g.nodes[v].id.clone())
                        .collect::<Vec<_>>()
                })
                .filter(|c| !c.is_empty())
                .collect();
            (!chains.is_empty()).then_some(ChainComponent { chains })
        })
        .collect();
    Ok(out)
}

/// Weakly connected pieces of a region, each listed in topological order.
/// Pieces with internal branching are linearised by that order.
fn region_chains(g: &ModelGraph, region: &[usize]) -> Vec<Vec<usize>> {
    let in_region: BTreeSet<usize> = region.iter().copied().collect();
    let mut label: BTreeMap<usize, usize> = BTreeMap::new();
    let mut pieces: Vec<Vec<usize>> = Vec::new();
    for &start in region {
        if label.contains_key(&start) {
            continue;
        }
        let id = pieces.len();
        let mut queue = VecDeque::from([start]);
        label.insert(start, id);
        while let Some(v) = queue.pop_front() {
            for &w in g.succ[v].iter().chain(g.pred[v].iter()) {
                if in_region.contains(&w) && !label.contains_key(&w) {
                    label.insert(w, id);
                    queue.push_back(w);
                }
            }
        }
        pieces.push(Vec::new());
    }
    for &v in region {
        pieces[label[&v]].push(v);
    }
    let weight = |c: &Vec<usize>| c.iter().map(|&v| g.nodes[v].param_bytes).sum::<u64>();
    let min_id = |c: &Vec<usize>| c.iter().map(|&v| g.nodes[v].id.clone()).min();
    pieces.sort_by(|a, b| weight(b).cmp(&weight(a)).then_with(|| min_id(a).cmp(&min_id(b))));
    pieces
}
