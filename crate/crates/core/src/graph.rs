//! Causal graph data model.
//!
//! A [`CausalGraph`] is a set of named nodes and belief-scored directed edges
//! that is acyclic at all times. Every mutation returns a new value with the
//! version bumped, so older versions stay valid for iteration history.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest belief score an SME can assign.
pub const MAX_BELIEF: u8 = 3;

/// Offset keeping the cost of a zero belief finite.
pub const BELIEF_COST_OFFSET: f64 = 0.0001;

/// Cost used for every hypothesis that has no belief attached (intercepts,
/// the intersection hypothesis, model fit, covariance equivalence).
pub const DEFAULT_COST: f64 = 1.0;

/// FDCR cost of an erroneous discovery for an edge with the given belief:
/// `1 / (belief + 0.0001)`.
pub fn belief_to_cost(belief: i64) -> Result<f64> {
    if !(0..=MAX_BELIEF as i64).contains(&belief) {
        return Err(Error::BeliefOutOfRange(belief));
    }
    Ok(1.0 / (belief as f64 + BELIEF_COST_OFFSET))
}

pub fn is_valid_name(name: &str) -> bool {
    !name.is_empty() && name.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_')
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeRole {
    Exogenous,
    Endogenous,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub name: String,
    pub role: NodeRole,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub parent: String,
    pub child: String,
    pub belief: u8,
}

impl Edge {
    pub fn new(parent: impl Into<String>, child: impl Into<String>, belief: u8) -> Self {
        Self {
            parent: parent.into(),
            child: child.into(),
            belief,
        }
    }

    pub fn cost(&self) -> f64 {
        1.0 / (self.belief as f64 + BELIEF_COST_OFFSET)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "GraphDoc", into = "GraphDoc")]
pub struct CausalGraph {
    nodes: BTreeSet<String>,
    edges: BTreeMap<(String, String), u8>,
    version: u64,
}

impl CausalGraph {
    /// Graph with the given nodes and no edges, at version 0.
    pub fn with_nodes<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut nodes = BTreeSet::new();
        for name in names {
            let name = name.into();
            if !is_valid_name(&name) {
                return Err(Error::InvalidName(name));
            }
            if !nodes.insert(name.clone()) {
                return Err(Error::DuplicateNode(name));
            }
        }
        Ok(Self {
            nodes,
            edges: BTreeMap::new(),
            version: 0,
        })
    }

    /// Builds a graph from a node list and edges in one step, rejecting any
    /// cycle with its path. Belief-0 edges are dropped.
    pub fn from_parts<I, S>(names: I, edges: impl IntoIterator<Item = Edge>, version: u64) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut graph = Self::with_nodes(names)?;
        graph.version = version;
        for edge in edges {
            graph.check_edge(&edge)?;
            if edge.belief == 0 {
                continue;
            }
            let key = (edge.parent, edge.child);
            if graph.edges.contains_key(&key) {
                return Err(Error::DuplicateEdge {
                    parent: key.0,
                    child: key.1,
                });
            }
            graph.edges.insert(key, edge.belief);
        }
        if let Some(path) = graph.find_cycle() {
            return Err(Error::Cycle { path });
        }
        Ok(graph)
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn contains_node(&self, name: &str) -> bool {
        self.nodes.contains(name)
    }

    /// Node names in lexicographic order.
    pub fn node_names(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().map(String::as_str)
    }

    pub fn nodes(&self) -> Vec<NodeSpec> {
        self.nodes
            .iter()
            .map(|name| NodeSpec {
                name: name.clone(),
                role: self.role(name),
            })
            .collect()
    }

    pub fn role(&self, name: &str) -> NodeRole {
        if self.edges.keys().any(|(_, c)| c == name) {
            NodeRole::Endogenous
        } else {
            NodeRole::Exogenous
        }
    }

    /// Edges sorted by (parent, child).
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.edges
            .iter()
            .map(|((p, c), &belief)| Edge::new(p.clone(), c.clone(), belief))
    }

    pub fn belief(&self, parent: &str, child: &str) -> Option<u8> {
        self.edges
            .get(&(parent.to_string(), child.to_string()))
            .copied()
    }

    pub fn has_edge(&self, parent: &str, child: &str) -> bool {
        self.belief(parent, child).is_some()
    }

    /// Parents of `child`, sorted by name.
    pub fn parents(&self, child: &str) -> Vec<&str> {
        self.edges
            .keys()
            .filter(|(_, c)| c == child)
            .map(|(p, _)| p.as_str())
            .collect()
    }

    pub fn children(&self, parent: &str) -> Vec<&str> {
        self.edges
            .keys()
            .filter(|(p, _)| p == parent)
            .map(|(_, c)| c.as_str())
            .collect()
    }

    pub fn add_node(&self, name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        if !is_valid_name(&name) {
            return Err(Error::InvalidName(name));
        }
        if self.nodes.contains(&name) {
            return Err(Error::DuplicateNode(name));
        }
        let mut next = self.bumped();
        next.nodes.insert(name);
        Ok(next)
    }

    pub fn add_edge(&self, edge: Edge) -> Result<Self> {
        self.check_edge(&edge)?;
        if edge.belief == 0 {
            return Err(Error::ZeroBelief);
        }
        if self.has_edge(&edge.parent, &edge.child) {
            return Err(Error::DuplicateEdge {
                parent: edge.parent,
                child: edge.child,
            });
        }
        if let Some(mut path) = self.directed_path(&edge.child, &edge.parent) {
            path.insert(0, edge.parent.clone());
            return Err(Error::Cycle { path });
        }
        let mut next = self.bumped();
        next.edges.insert((edge.parent, edge.child), edge.belief);
        Ok(next)
    }

    pub fn remove_edge(&self, parent: &str, child: &str) -> Result<Self> {
        let key = (parent.to_string(), child.to_string());
        if !self.edges.contains_key(&key) {
            return Err(Error::UnknownEdge {
                parent: key.0,
                child: key.1,
            });
        }
        let mut next = self.bumped();
        next.edges.remove(&key);
        Ok(next)
    }

    /// Updates the belief on an existing edge. Setting 0 removes the edge.
    pub fn set_belief(&self, parent: &str, child: &str, belief: u8) -> Result<Self> {
        if belief > MAX_BELIEF {
            return Err(Error::BeliefOutOfRange(belief as i64));
        }
        if belief == 0 {
            return self.remove_edge(parent, child);
        }
        let key = (parent.to_string(), child.to_string());
        match self.edges.get(&key) {
            None => Err(Error::UnknownEdge {
                parent: key.0,
                child: key.1,
            }),
            Some(_) => {
                let mut next = self.bumped();
                next.edges.insert(key, belief);
                Ok(next)
            }
        }
    }

    /// Kahn's algorithm with a lexicographically ordered ready set, so the
    /// output is deterministic.
    pub fn topological_order(&self) -> Vec<String> {
        let mut indegree: BTreeMap<&str, usize> =
            self.nodes.iter().map(|n| (n.as_str(), 0)).collect();
        for (_, c) in self.edges.keys() {
            *indegree.get_mut(c.as_str()).expect("edge endpoint") += 1;
        }
        let mut ready: BTreeSet<&str> = indegree
            .iter()
            .filter(|(_, &d)| d == 0)
            .map(|(&n, _)| n)
            .collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(next) = ready.pop_first() {
            order.push(next.to_string());
            for child in self.children(next) {
                let d = indegree.get_mut(child).expect("edge endpoint");
                *d -= 1;
                if *d == 0 {
                    ready.insert(child);
                }
            }
        }
        debug_assert_eq!(order.len(), self.nodes.len(), "graph must be acyclic");
        order
    }

    /// Copy of this graph carrying a different version number.
    pub fn with_version(&self, version: u64) -> Self {
        let mut g = self.clone();
        g.version = version;
        g
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: GraphDoc = serde_json::from_str(text)?;
        Self::try_from(doc)
    }

    fn bumped(&self) -> Self {
        let mut next = self.clone();
        next.version += 1;
        next
    }

    fn check_edge(&self, edge: &Edge) -> Result<()> {
        for name in [&edge.parent, &edge.child] {
            if !self.nodes.contains(name) {
                return Err(Error::UnknownNode(name.clone()));
            }
        }
        if edge.parent == edge.child {
            return Err(Error::SelfLoop(edge.parent.clone()));
        }
        if edge.belief > MAX_BELIEF {
            return Err(Error::BeliefOutOfRange(edge.belief as i64));
        }
        Ok(())
    }

    /// Directed path `from -> ... -> to`, if one exists.
    fn directed_path(&self, from: &str, to: &str) -> Option<Vec<String>> {
        let mut stack = vec![vec![from.to_string()]];
        let mut seen = BTreeSet::new();
        while let Some(path) = stack.pop() {
            let last = path.last().expect("non-empty path").clone();
            if last == to {
                return Some(path);
            }
            if !seen.insert(last.clone()) {
                continue;
            }
            for child in self.children(&last).into_iter().rev() {
                let mut next = path.clone();
                next.push(child.to_string());
                stack.push(next);
            }
        }
        None
    }

    fn find_cycle(&self) -> Option<Vec<String>> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            Fresh,
            Open,
            Done,
        }
        let mut marks: BTreeMap<&str, Mark> =
            self.nodes.iter().map(|n| (n.as_str(), Mark::Fresh)).collect();

        fn visit<'a>(
            g: &'a CausalGraph,
            node: &'a str,
            marks: &mut BTreeMap<&'a str, Mark>,
            stack: &mut Vec<&'a str>,
        ) -> Option<Vec<String>> {
            marks.insert(node, Mark::Open);
            stack.push(node);
            for child in g.children(node) {
                match marks[child] {
                    Mark::Open => {
                        let start = stack.iter().position(|&n| n == child).expect("on stack");
                        let mut cycle: Vec<String> =
                            stack[start..].iter().map(|s| s.to_string()).collect();
                        cycle.push(child.to_string());
                        return Some(cycle);
                    }
                    Mark::Fresh => {
                        if let Some(c) = visit(g, child, marks, stack) {
                            return Some(c);
                        }
                    }
                    Mark::Done => {}
                }
            }
            stack.pop();
            marks.insert(node, Mark::Done);
            None
        }

        let names: Vec<&str> = self.nodes.iter().map(String::as_str).collect();
        for name in names {
            if marks[name] == Mark::Fresh {
                let mut stack = Vec::new();
                if let Some(c) = visit(self, name, &mut marks, &mut stack) {
                    return Some(c);
                }
            }
        }
        None
    }
}

/// Wire form of a graph.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphDoc {
    pub nodes: Vec<NodeDoc>,
    #[serde(default)]
    pub edges: Vec<Edge>,
    #[serde(default)]
    pub version: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeDoc {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<NodeRole>,
}

impl TryFrom<GraphDoc> for CausalGraph {
    type Error = Error;

    fn try_from(doc: GraphDoc) -> Result<Self> {
        CausalGraph::from_parts(doc.nodes.into_iter().map(|n| n.name), doc.edges, doc.version)
    }
}

impl From<CausalGraph> for GraphDoc {
    fn from(g: CausalGraph) -> Self {
        GraphDoc {
            nodes: g
                .nodes()
                .into_iter()
                .map(|n| NodeDoc {
                    name: n.name,
                    role: Some(n.role),
                })
                .collect(),
            edges: g.edges().collect(),
            version: g.version,
        }
    }
}
