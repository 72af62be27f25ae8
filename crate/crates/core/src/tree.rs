//! Hierarchical question decomposition trees.
//!
//! Nodes are stored in BFS order with the root at index 0. Reference tokens
//! inside leaf questions name sibling node indices; atomic representations
//! derived from a subtree use 1-based list positions instead.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::atoms::{AtomicRepresentation, AtomsError};
use crate::question::{distinct_refs, get_ref_tokens, Question, QuestionKind};

#[derive(Clone, Debug, PartialEq)]
pub struct HqdtNode {
    pub index: usize,
    pub question: Question,
    /// Generation certainty `p_g`, in (0, 1].
    pub certainty: f64,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

impl HqdtNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    Empty,
    IndexMismatch { position: usize, index: usize },
    RootNotFirst,
    RootCertainty(f64),
    CertaintyOutOfRange { node: usize, certainty: f64 },
    MissingNode { node: usize, referenced: usize },
    ParentMismatch { node: usize },
    NotBfsOrder { expected: Vec<usize> },
    Unreachable { node: usize },
    ChildCount { node: usize, count: usize },
    AtomicNotLeaf { node: usize },
    NonNaturalChild { node: usize, child: usize },
    LastChildNotAtomicRef { node: usize, child: usize },
    RefNotSibling { node: usize, target: u32 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Empty => write!(f, "tree has no nodes"),
            Violation::IndexMismatch { position, index } => {
                write!(f, "node at position {position} carries index {index}")
            }
            Violation::RootNotFirst => write!(f, "node 0 must be the only parentless node"),
            Violation::RootCertainty(c) => write!(f, "root certainty is {c}, expected 1.0"),
            Violation::CertaintyOutOfRange { node, certainty } => {
                write!(f, "node {node} certainty {certainty} outside (0, 1]")
            }
            Violation::MissingNode { node, referenced } => {
                write!(f, "node {node} links to missing node {referenced}")
            }
            Violation::ParentMismatch { node } => {
                write!(f, "node {node} parent/children links disagree")
            }
            Violation::NotBfsOrder { expected } => write!(f, "indices are not BFS order, expected {expected:?}"),
            Violation::Unreachable { node } => write!(f, "node {node} is unreachable from the root"),
            Violation::ChildCount { node, count } => {
                write!(f, "non-leaf node {node} has {count} children, expected 2 or 3")
            }
            Violation::AtomicNotLeaf { node } => {
                write!(f, "bridge or symbolic question at non-leaf node {node}")
            }
            Violation::NonNaturalChild { node, child } => {
                write!(f, "child {child} of node {node} must be a natural-language question")
            }
            Violation::LastChildNotAtomicRef { node, child } => {
                write!(f, "last child {child} of node {node} must be a bridge or symbolic question")
            }
            Violation::RefNotSibling { node, target } => {
                write!(f, "node {node} references #{target}, which is not an earlier sibling")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TreeError {
    #[error("invalid tree: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("node {node} references #{target} outside the subtree")]
    DanglingRef { node: usize, target: u32 },
    #[error("node index {0} out of range")]
    NoSuchNode(usize),
    #[error("nodes do not form a single rooted tree: {0}")]
    NotATree(String),
    #[error(transparent)]
    Atoms(#[from] AtomsError),
}

/// Checks every structural and semantic invariant and reports all failures.
pub fn validate(nodes: &[HqdtNode]) -> Vec<Violation> {
    let mut out = Vec::new();
    if nodes.is_empty() {
        out.push(Violation::Empty);
        return out;
    }
    let n = nodes.len();
    for (pos, node) in nodes.iter().enumerate() {
        if node.index != pos {
            out.push(Violation::IndexMismatch { position: pos, index: node.index });
        }
        if !(node.certainty > 0.0 && node.certainty <= 1.0) {
            out.push(Violation::CertaintyOutOfRange { node: pos, certainty: node.certainty });
        }
        for &c in &node.children {
            if c >= n {
                out.push(Violation::MissingNode { node: pos, referenced: c });
            } else if nodes[c].parent != Some(pos) {
                out.push(Violation::ParentMismatch { node: c });
            }
        }
        match node.parent {
            Some(p) if p >= n => out.push(Violation::MissingNode { node: pos, referenced: p }),
            Some(p) if !nodes[p].children.contains(&pos) => out.push(Violation::ParentMismatch { node: pos }),
            None if pos != 0 => out.push(Violation::RootNotFirst),
            Some(_) if pos == 0 => out.push(Violation::RootNotFirst),
            _ => {}
        }
    }
    if !out.is_empty() {
        return out;
    }
    if nodes[0].certainty != 1.0 {
        out.push(Violation::RootCertainty(nodes[0].certainty));
    }

    let order = bfs_order(nodes);
    if order.len() != n {
        for i in 0..n {
            if !order.contains(&i) {
                out.push(Violation::Unreachable { node: i });
            }
        }
    } else if order != (0..n).collect::<Vec<_>>() {
        out.push(Violation::NotBfsOrder { expected: order });
    }

    for (i, node) in nodes.iter().enumerate() {
        let kind = node.question.kind();
        if !node.is_leaf() {
            if kind != QuestionKind::NaturalLanguage {
                out.push(Violation::AtomicNotLeaf { node: i });
            }
            if !(2..=3).contains(&node.children.len()) {
                out.push(Violation::ChildCount { node: i, count: node.children.len() });
            }
            let (last, rest) = node.children.split_last().expect("non-leaf");
            for &c in rest {
                if nodes[c].question.kind() != QuestionKind::NaturalLanguage {
                    out.push(Violation::NonNaturalChild { node: i, child: c });
                }
            }
            if nodes[*last].question.kind() == QuestionKind::NaturalLanguage {
                out.push(Violation::LastChildNotAtomicRef { node: i, child: *last });
            }
        }
        // References must point at earlier siblings.
        let siblings: &[usize] = match node.parent {
            Some(p) => &nodes[p].children,
            None => &[],
        };
        let position = siblings.iter().position(|&s| s == i).unwrap_or(0);
        for target in get_ref_tokens(&node.question) {
            if !siblings[..position].contains(&(target as usize)) {
                out.push(Violation::RefNotSibling { node: i, target });
            }
        }
    }
    out
}

fn bfs_order(nodes: &[HqdtNode]) -> Vec<usize> {
    let mut order = Vec::with_capacity(nodes.len());
    let mut seen = vec![false; nodes.len()];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(i) = queue.pop_front() {
        order.push(i);
        for &c in &nodes[i].children {
            if c < nodes.len() && !seen[c] {
                seen[c] = true;
                queue.push_back(c);
            }
        }
    }
    order
}

/// A validated tree.
#[derive(Clone, Debug, PartialEq)]
pub struct Hqdt {
    nodes: Vec<HqdtNode>,
}

impl Hqdt {
    pub fn from_nodes(nodes: Vec<HqdtNode>) -> Result<Self, TreeError> {
        let violations = validate(&nodes);
        if violations.is_empty() {
            Ok(Hqdt { nodes })
        } else {
            Err(TreeError::Invalid(violations))
        }
    }

    /// A one-node tree: the question is answered without decomposition.
    pub fn single(question: Question) -> Self {
        Hqdt { nodes: vec![HqdtNode { index: 0, question, certainty: 1.0, parent: None, children: vec![] }] }
    }

    pub fn nodes(&self) -> &[HqdtNode] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> Option<&HqdtNode> {
        self.nodes.get(i)
    }

    pub fn root(&self) -> &HqdtNode {
        &self.nodes[0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn height(&self) -> usize {
        fn depth(t: &Hqdt, i: usize) -> usize {
            t.nodes[i].children.iter().map(|&c| 1 + depth(t, c)).max().unwrap_or(0)
        }
        depth(self, 0)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("tree serializes")
    }
}

#[derive(Serialize, Deserialize)]
struct NodeJson {
    index: usize,
    kind: QuestionKind,
    text: Question,
    certainty: f64,
    parent: Option<usize>,
    children: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct TreeJson {
    nodes: Vec<NodeJson>,
}

impl Serialize for Hqdt {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        TreeJson {
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeJson {
                    index: n.index,
                    kind: n.question.kind(),
                    text: n.question.clone(),
                    certainty: n.certainty,
                    parent: n.parent,
                    children: n.children.clone(),
                })
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Hqdt {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = TreeJson::deserialize(deserializer)?;
        let mut nodes = Vec::with_capacity(raw.nodes.len());
        for n in raw.nodes {
            if n.kind != n.text.kind() {
                return Err(serde::de::Error::custom(format!(
                    "node {} declares kind {:?} but its text is {:?}",
                    n.index,
                    n.kind,
                    n.text.kind()
                )));
            }
            nodes.push(HqdtNode {
                index: n.index,
                question: n.text,
                certainty: n.certainty,
                parent: n.parent,
                children: n.children,
            });
        }
        Hqdt::from_nodes(nodes).map_err(serde::de::Error::custom)
    }
}

/// Final leaf reached by following last children down from `i`.
fn answering_leaf(tree: &Hqdt, mut i: usize) -> usize {
    while let Some(&last) = tree.nodes[i].children.last() {
        i = last;
    }
    i
}

/// DFS over the subtree rooted at `i`, collecting its leaves in order with
/// node-index references rewritten as positions in the collected list. A
/// reference to a non-leaf node points at that node's answering leaf.
pub fn atoms_from_leaves(tree: &Hqdt, i: usize) -> Result<AtomicRepresentation, TreeError> {
    if i >= tree.len() {
        return Err(TreeError::NoSuchNode(i));
    }
    let mut atoms = Vec::new();
    let mut ids: HashMap<usize, u32> = HashMap::new();
    let mut stack = vec![i];
    while let Some(j) = stack.pop() {
        let node = &tree.nodes[j];
        if node.is_leaf() {
            let position = atoms.len() as u32 + 1;
            ids.insert(j, position);
            let mut mapping = BTreeMap::new();
            for k in distinct_refs(&node.question) {
                let target = answering_leaf(tree, k as usize);
                let mapped = ids.get(&target).copied().ok_or(TreeError::DanglingRef { node: j, target: k })?;
                mapping.insert(k, mapped);
            }
            atoms.push(node.question.remap_refs(|k| mapping.get(&k).copied()));
        } else {
            stack.extend(node.children.iter().rev());
        }
    }
    Ok(AtomicRepresentation::new(atoms)?)
}

/// A node with a provisional identifier, as produced during bottom-up
/// construction. Children order is the order nodes appear in the input list.
#[derive(Clone, Debug, PartialEq)]
pub struct ProvisionalNode {
    pub id: usize,
    pub question: Question,
    pub certainty: f64,
    pub parent: Option<usize>,
}

/// Renumbers nodes in BFS order, rewriting parent/children links and the
/// node-index references inside questions.
pub fn reindex_bfs(nodes: Vec<ProvisionalNode>) -> Result<Hqdt, TreeError> {
    let mut position_of: HashMap<usize, usize> = HashMap::new();
    for (pos, node) in nodes.iter().enumerate() {
        if position_of.insert(node.id, pos).is_some() {
            return Err(TreeError::NotATree(format!("duplicate node id {}", node.id)));
        }
    }
    let roots: Vec<usize> = nodes.iter().filter(|n| n.parent.is_none()).map(|n| n.id).collect();
    if roots.len() != 1 {
        return Err(TreeError::NotATree(format!("expected one root, found {}", roots.len())));
    }
    let mut children: HashMap<usize, Vec<usize>> = HashMap::new();
    for node in &nodes {
        if let Some(p) = node.parent {
            if !position_of.contains_key(&p) {
                return Err(TreeError::NotATree(format!("node {} has unknown parent {p}", node.id)));
            }
            children.entry(p).or_default().push(node.id);
        }
    }

    let mut order = Vec::with_capacity(nodes.len());
    let mut queue = VecDeque::from([roots[0]]);
    while let Some(id) = queue.pop_front() {
        order.push(id);
        if order.len() > nodes.len() {
            break;
        }
        queue.extend(children.get(&id).into_iter().flatten());
    }
    if order.len() != nodes.len() {
        return Err(TreeError::NotATree("cycle or unreachable nodes".into()));
    }
    let new_index: HashMap<usize, usize> = order.iter().enumerate().map(|(new, &id)| (id, new)).collect();

    let out = order
        .iter()
        .enumerate()
        .map(|(new, id)| {
            let node = &nodes[position_of[id]];
            HqdtNode {
                index: new,
                question: node.question.remap_refs(|k| new_index.get(&(k as usize)).map(|&i| i as u32)),
                certainty: node.certainty,
                parent: node.parent.map(|p| new_index[&p]),
                children: children.get(id).into_iter().flatten().map(|c| new_index[c]).collect(),
            }
        })
        .collect();
    Hqdt::from_nodes(out)
}

/// Inverse of `reindex_bfs` for an existing tree.
pub fn to_provisional(tree: &Hqdt) -> Vec<ProvisionalNode> {
    tree.nodes
        .iter()
        .map(|n| ProvisionalNode { id: n.index, question: n.question.clone(), certainty: n.certainty, parent: n.parent })
        .collect()
}
