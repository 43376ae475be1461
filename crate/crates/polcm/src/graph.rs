//! DAG over latent and observed variables, with the structural queries the
//! identifiability conditions are built from: parents, pure children,
//! neighbours, d-separation, and simple-trek enumeration.
//!
//! Nodes are positional: indices `0..m` are latent, `m..m+n` observed.
//! Names are metadata only.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::PolcmError;
use crate::Result;

/// Index of a variable. Indices `0..m` are latent, `m..m+n` observed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

/// A nonempty set of distinct nodes treated as one unit by the
/// atomic-cover machinery.
pub type Cover = BTreeSet<NodeId>;

/// An ordered pair of directed paths with a common source. Both paths are
/// stored top-first; a simple trek's paths meet only at the top.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Trek {
    pub top: NodeId,
    /// Directed path from `top` to the first endpoint (inclusive on both ends).
    pub path_up: Vec<NodeId>,
    /// Directed path from `top` to the second endpoint.
    pub path_down: Vec<NodeId>,
}

impl Trek {
    /// Product of the edge coefficients along one of the trek's paths.
    pub fn path_monomial(path: &[NodeId], coeff: impl Fn(NodeId, NodeId) -> f64) -> f64 {
        path.windows(2).map(|w| coeff(w[0], w[1])).product()
    }
}

/// On-disk form of a graph:
/// `{"num_latent": m, "num_observed": n, "names": [...], "edges": [[p, c], ...],
///   "coefficients": [[p, c, value], ...]}` with latent-first indices.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphFile {
    pub num_latent: usize,
    pub num_observed: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub names: Option<Vec<String>>,
    pub edges: Vec<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<(usize, usize, f64)>>,
}

/// DAG with `m` latent then `n` observed nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct PolcmGraph {
    num_latent: usize,
    num_observed: usize,
    names: Vec<String>,
    edges: BTreeSet<(usize, usize)>,
    parents: Vec<BTreeSet<usize>>,
    children: Vec<BTreeSet<usize>>,
}

impl PolcmGraph {
    /// Builds a graph from an edge list. Rejects self-loops, out-of-range
    /// indices, and cycles. Duplicate edges collapse silently.
    pub fn new(
        num_latent: usize,
        num_observed: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let d = num_latent + num_observed;
        let mut set = BTreeSet::new();
        let mut parents = vec![BTreeSet::new(); d];
        let mut children = vec![BTreeSet::new(); d];
        for (p, c) in edges {
            if p >= d || c >= d {
                return Err(PolcmError::InvalidNode(p.max(c), d));
            }
            if p == c {
                return Err(PolcmError::MalformedGraph(format!("self-loop at node {p}")));
            }
            if set.insert((p, c)) {
                parents[c].insert(p);
                children[p].insert(c);
            }
        }
        let names = (0..d)
            .map(|i| {
                if i < num_latent {
                    format!("L{}", i + 1)
                } else {
                    format!("X{}", i + 1)
                }
            })
            .collect();
        let g = Self {
            num_latent,
            num_observed,
            names,
            edges: set,
            parents,
            children,
        };
        g.topological_order()?; // cycle check
        Ok(g)
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.num_nodes() {
            return Err(PolcmError::MalformedGraph(format!(
                "expected {} names, got {}",
                self.num_nodes(),
                names.len()
            )));
        }
        self.names = names;
        Ok(self)
    }

    pub fn from_file(file: &GraphFile) -> Result<Self> {
        let g = Self::new(file.num_latent, file.num_observed, file.edges.iter().copied())?;
        match &file.names {
            Some(names) => g.with_names(names.clone()),
            None => Ok(g),
        }
    }

    pub fn to_file(&self) -> GraphFile {
        GraphFile {
            num_latent: self.num_latent,
            num_observed: self.num_observed,
            names: Some(self.names.clone()),
            edges: self.edges.iter().copied().collect(),
            coefficients: None,
        }
    }

    pub fn load(path: &std::path::Path) -> Result<(Self, Option<Vec<(usize, usize, f64)>>)> {
        let file: GraphFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let g = Self::from_file(&file)?;
        Ok((g, file.coefficients))
    }

    pub fn num_latent(&self) -> usize {
        self.num_latent
    }

    pub fn num_observed(&self) -> usize {
        self.num_observed
    }

    pub fn num_nodes(&self) -> usize {
        self.num_latent + self.num_observed
    }

    pub fn is_latent(&self, v: NodeId) -> bool {
        v.0 < self.num_latent
    }

    pub fn is_observed(&self, v: NodeId) -> bool {
        v.0 >= self.num_latent && v.0 < self.num_nodes()
    }

    pub fn name(&self, v: NodeId) -> &str {
        &self.names[v.0]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Resolve a name back to its node, if present.
    pub fn node_by_name(&self, name: &str) -> Option<NodeId> {
        self.names.iter().position(|n| n == name).map(NodeId)
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.num_nodes()).map(NodeId)
    }

    pub fn latents(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.num_latent).map(NodeId)
    }

    pub fn observed(&self) -> impl Iterator<Item = NodeId> + '_ {
        (self.num_latent..self.num_nodes()).map(NodeId)
    }

    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.edges.iter().map(|&(p, c)| (NodeId(p), NodeId(c)))
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, p: NodeId, c: NodeId) -> bool {
        self.edges.contains(&(p.0, c.0))
    }

    pub fn is_adjacent(&self, a: NodeId, b: NodeId) -> bool {
        self.has_edge(a, b) || self.has_edge(b, a)
    }

    fn check_node(&self, v: NodeId) -> Result<()> {
        if v.0 >= self.num_nodes() {
            return Err(PolcmError::InvalidNode(v.0, self.num_nodes()));
        }
        Ok(())
    }

    pub fn parents(&self, v: NodeId) -> Result<Cover> {
        self.check_node(v)?;
        Ok(self.parents[v.0].iter().map(|&p| NodeId(p)).collect())
    }

    pub fn children(&self, v: NodeId) -> Result<Cover> {
        self.check_node(v)?;
        Ok(self.children[v.0].iter().map(|&c| NodeId(c)).collect())
    }

    /// Children of any member of `cover`, members excluded.
    pub fn children_of_set(&self, cover: &Cover) -> Cover {
        let mut out = Cover::new();
        for &v in cover {
            out.extend(self.children[v.0].iter().map(|&c| NodeId(c)));
        }
        out.retain(|v| !cover.contains(v));
        out
    }

    /// The maximal set `Y` disjoint from `cover` whose members' parents all
    /// lie in `cover` and jointly exhaust it. Empty when no such set exists.
    pub fn pure_children(&self, cover: &Cover) -> Cover {
        let mut union = BTreeSet::new();
        let mut out = Cover::new();
        for v in self.nodes() {
            if cover.contains(&v) || self.parents[v.0].is_empty() {
                continue;
            }
            if self.parents[v.0].iter().all(|p| cover.contains(&NodeId(*p))) {
                union.extend(self.parents[v.0].iter().copied());
                out.insert(v);
            }
        }
        if union.len() == cover.len() {
            out
        } else {
            Cover::new()
        }
    }

    /// Nodes adjacent (as parent or child) to any member of `cover`,
    /// members excluded.
    pub fn neighbours(&self, cover: &Cover) -> Cover {
        let mut out = Cover::new();
        for &v in cover {
            out.extend(self.parents[v.0].iter().map(|&p| NodeId(p)));
            out.extend(self.children[v.0].iter().map(|&c| NodeId(c)));
        }
        out.retain(|v| !cover.contains(v));
        out
    }

    /// Topological order with ties broken by index.
    pub fn topological_order(&self) -> Result<Vec<NodeId>> {
        let d = self.num_nodes();
        let mut indeg: Vec<usize> = (0..d).map(|v| self.parents[v].len()).collect();
        let mut ready: BTreeSet<usize> = (0..d).filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(d);
        while let Some(&v) = ready.iter().next() {
            ready.remove(&v);
            order.push(NodeId(v));
            for &c in &self.children[v] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        if order.len() != d {
            let stuck: Vec<usize> = (0..d).filter(|&v| indeg[v] > 0).collect();
            return Err(PolcmError::Cyclic(format!("cycle through nodes {stuck:?}")));
        }
        Ok(order)
    }

    /// All ancestors of the nodes in `seed`, including the seeds themselves.
    pub fn ancestors_of(&self, seed: &Cover) -> Cover {
        let mut out: Cover = seed.clone();
        let mut queue: VecDeque<usize> = seed.iter().map(|v| v.0).collect();
        while let Some(v) = queue.pop_front() {
            for &p in &self.parents[v] {
                if out.insert(NodeId(p)) {
                    queue.push_back(p);
                }
            }
        }
        out
    }

    /// All descendants of `v`, excluding `v`.
    pub fn descendants(&self, v: NodeId) -> Cover {
        let mut out = Cover::new();
        let mut queue: VecDeque<usize> = self.children[v.0].iter().copied().collect();
        while let Some(c) = queue.pop_front() {
            if out.insert(NodeId(c)) {
                queue.extend(self.children[c].iter().copied());
            }
        }
        out
    }

    /// Whether `z` blocks every path between `a` and `b`, under the standard
    /// collider/non-collider rules. Reachability formulation: walk the graph
    /// keeping track of the direction each node was entered from.
    pub fn d_separated(&self, a: &Cover, b: &Cover, z: &Cover) -> Result<bool> {
        for v in a.iter().chain(b).chain(z) {
            self.check_node(*v)?;
        }
        if a.intersection(b).next().is_some()
            || a.intersection(z).next().is_some()
            || b.intersection(z).next().is_some()
        {
            return Err(PolcmError::OverlappingSets(
                "a, b, z must be pairwise disjoint".into(),
            ));
        }
        let anc_z = self.ancestors_of(z);
        // States: (node, entered-via-arrow-into-node?). Seeds behave as if
        // entered from below (tail), so both parents and children open.
        let d = self.num_nodes();
        let mut seen = vec![[false; 2]; d];
        let mut queue: VecDeque<(usize, bool)> = a.iter().map(|v| (v.0, false)).collect();
        for &(v, tail) in &queue {
            seen[v][tail as usize] = true;
        }
        while let Some((v, via_arrow)) = queue.pop_front() {
            if b.contains(&NodeId(v)) {
                return Ok(false);
            }
            let in_z = z.contains(&NodeId(v));
            // Move to parents: allowed when v is an open collider
            // (entered via arrow and v is an ancestor of z) or when v is a
            // non-conditioned node entered from below.
            let to_parents =
                (via_arrow && anc_z.contains(&NodeId(v))) || (!via_arrow && !in_z);
            // Move to children: allowed whenever v itself is not conditioned.
            let to_children = !in_z;
            if to_parents {
                for &p in &self.parents[v] {
                    if !seen[p][0] {
                        seen[p][0] = true;
                        queue.push_back((p, false));
                    }
                }
            }
            if to_children {
                for &c in &self.children[v] {
                    if !seen[c][1] {
                        seen[c][1] = true;
                        queue.push_back((c, true));
                    }
                }
            }
        }
        Ok(true)
    }

    /// All directed paths from `from` to `to`, each top-first and inclusive.
    fn directed_paths(&self, from: NodeId, to: NodeId) -> Vec<Vec<NodeId>> {
        let mut out = Vec::new();
        let mut stack = vec![from];
        self.paths_rec(to, &mut stack, &mut out);
        out
    }

    fn paths_rec(&self, to: NodeId, stack: &mut Vec<NodeId>, out: &mut Vec<Vec<NodeId>>) {
        let v = *stack.last().unwrap();
        if v == to {
            out.push(stack.clone());
            return;
        }
        for &c in &self.children[v.0] {
            stack.push(NodeId(c));
            self.paths_rec(to, stack, out);
            stack.pop();
        }
    }

    /// All simple treks between `i` and `j`, in lexicographic order by
    /// (top, path, path). For `i == j` only the trivial trek at `i` is
    /// simple, which carries the node's own variance.
    pub fn enumerate_simple_treks(&self, i: NodeId, j: NodeId) -> Result<Vec<Trek>> {
        self.check_node(i)?;
        self.check_node(j)?;
        if i == j {
            return Ok(vec![Trek {
                top: i,
                path_up: vec![i],
                path_down: vec![i],
            }]);
        }
        let mut treks = Vec::new();
        for top in self.nodes() {
            let ups = self.directed_paths(top, i);
            if ups.is_empty() {
                continue;
            }
            let downs = self.directed_paths(top, j);
            for up in &ups {
                let up_set: BTreeSet<NodeId> = up.iter().skip(1).copied().collect();
                for down in &downs {
                    if down.iter().skip(1).any(|v| up_set.contains(v)) {
                        continue;
                    }
                    treks.push(Trek {
                        top,
                        path_up: up.clone(),
                        path_down: down.clone(),
                    });
                }
            }
        }
        treks.sort();
        Ok(treks)
    }

    /// Edge-index map in a fixed order, for packing coefficient vectors.
    pub fn edge_index(&self) -> BTreeMap<(usize, usize), usize> {
        self.edges
            .iter()
            .enumerate()
            .map(|(k, &e)| (e, k))
            .collect()
    }
}
