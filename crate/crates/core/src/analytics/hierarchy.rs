use std::collections::{BTreeMap, BTreeSet};

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use serde::{Deserialize, Serialize};

/// Subclass graph over type ids with strongly connected components collapsed.
///
/// Each component is represented by its lexicographically least member id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TypeHierarchy {
    /// Member id to representative id.
    representative: BTreeMap<String, String>,
    /// Representative to sorted member ids.
    members: BTreeMap<String, Vec<String>>,
    /// Representative to representatives of its direct parents.
    parents: BTreeMap<String, BTreeSet<String>>,
    children: BTreeMap<String, BTreeSet<String>>,
}

impl TypeHierarchy {
    /// `edges` are (child, parent) pairs; every endpoint becomes a node.
    pub fn new<I, E>(nodes: I, edges: E) -> Self
    where
        I: IntoIterator<Item = String>,
        E: IntoIterator<Item = (String, String)>,
    {
        let mut graph: DiGraph<String, ()> = DiGraph::new();
        let mut index: BTreeMap<String, NodeIndex> = BTreeMap::new();
        let mut node = |graph: &mut DiGraph<String, ()>, id: String| {
            *index.entry(id.clone()).or_insert_with(|| graph.add_node(id))
        };
        for id in nodes {
            node(&mut graph, id);
        }
        for (child, parent) in edges {
            let c = node(&mut graph, child);
            let p = node(&mut graph, parent);
            graph.update_edge(c, p, ());
        }

        let mut h = TypeHierarchy::default();
        for component in tarjan_scc(&graph) {
            let mut ids: Vec<String> = component.iter().map(|&i| graph[i].clone()).collect();
            ids.sort();
            let rep = ids[0].clone();
            for id in &ids {
                h.representative.insert(id.clone(), rep.clone());
            }
            h.parents.insert(rep.clone(), BTreeSet::new());
            h.children.insert(rep.clone(), BTreeSet::new());
            h.members.insert(rep, ids);
        }
        for edge in graph.raw_edges() {
            let c = &h.representative[&graph[edge.source()]];
            let p = &h.representative[&graph[edge.target()]];
            if c != p {
                let (c, p) = (c.clone(), p.clone());
                h.parents.get_mut(&c).expect("node").insert(p.clone());
                h.children.get_mut(&p).expect("node").insert(c);
            }
        }
        h
    }

    pub fn representative(&self, id: &str) -> Option<&str> {
        self.representative.get(id).map(String::as_str)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.representative.contains_key(id)
    }

    /// Representatives in id order.
    pub fn nodes(&self) -> impl Iterator<Item = &str> {
        self.members.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self, rep: &str) -> &[String] {
        self.members.get(rep).map_or(&[], Vec::as_slice)
    }

    pub fn parents(&self, rep: &str) -> impl Iterator<Item = &str> {
        self.parents.get(rep).into_iter().flatten().map(String::as_str)
    }

    pub fn children(&self, rep: &str) -> impl Iterator<Item = &str> {
        self.children.get(rep).into_iter().flatten().map(String::as_str)
    }

    /// The node itself plus everything below it, as representatives.
    pub fn descendants_or_self(&self, rep: &str) -> BTreeSet<String> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![rep.to_string()];
        while let Some(n) = stack.pop() {
            if seen.insert(n.clone()) {
                stack.extend(self.children(&n).map(str::to_string));
            }
        }
        seen
    }
}
