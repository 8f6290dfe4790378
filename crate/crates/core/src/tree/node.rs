use serde::{Deserialize, Serialize};

use crate::data::Covariates;
use crate::error::{Error, Result};

/// Binary split: rows with `x[variable] <= cutpoint` go left.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitRule {
    pub variable: usize,
    pub cutpoint: f64,
}

impl SplitRule {
    #[inline]
    pub fn goes_left(&self, value: f64) -> bool {
        value <= self.cutpoint
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum NodeKind {
    Leaf { value: f64 },
    Split { rule: SplitRule, left: usize, right: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub depth: u32,
    pub parent: Option<usize>,
    pub kind: NodeKind,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, NodeKind::Leaf { .. })
    }
}

/// A binary regression tree stored as an arena.
///
/// Node 0 is the root. Pruned nodes are put on a free list and reused by later
/// grows, so live node indices stay stable while a tree is being sampled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    #[serde(skip)]
    free: Vec<usize>,
}

/// Preorder serialization entry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PreorderNode {
    Leaf(f64),
    Split(SplitRule),
}

pub const ROOT: usize = 0;

impl DecisionTree {
    pub fn leaf(value: f64) -> Self {
        Self {
            nodes: vec![Node {
                depth: 0,
                parent: None,
                kind: NodeKind::Leaf { value },
            }],
            free: Vec::new(),
        }
    }

    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    pub fn arena_len(&self) -> usize {
        self.nodes.len()
    }

    /// Live node ids in preorder.
    pub fn preorder_ids(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![ROOT];
        while let Some(id) = stack.pop() {
            out.push(id);
            if let NodeKind::Split { left, right, .. } = self.nodes[id].kind {
                stack.push(right);
                stack.push(left);
            }
        }
        out
    }

    pub fn leaf_ids(&self) -> Vec<usize> {
        self.preorder_ids()
            .into_iter()
            .filter(|&id| self.nodes[id].is_leaf())
            .collect()
    }

    pub fn internal_ids(&self) -> Vec<usize> {
        self.preorder_ids()
            .into_iter()
            .filter(|&id| !self.nodes[id].is_leaf())
            .collect()
    }

    /// Internal nodes whose two children are both leaves ("no grandchildren").
    pub fn prunable_ids(&self) -> Vec<usize> {
        self.internal_ids()
            .into_iter()
            .filter(|&id| match self.nodes[id].kind {
                NodeKind::Split { left, right, .. } => {
                    self.nodes[left].is_leaf() && self.nodes[right].is_leaf()
                }
                NodeKind::Leaf { .. } => false,
            })
            .collect()
    }

    pub fn n_leaves(&self) -> usize {
        self.leaf_ids().len()
    }

    pub fn is_root_only(&self) -> bool {
        self.nodes[ROOT].is_leaf()
    }

    pub fn max_variable(&self) -> Option<usize> {
        self.internal_ids()
            .into_iter()
            .filter_map(|id| match self.nodes[id].kind {
                NodeKind::Split { rule, .. } => Some(rule.variable),
                NodeKind::Leaf { .. } => None,
            })
            .max()
    }

    pub fn leaf_value(&self, id: usize) -> f64 {
        match self.nodes[id].kind {
            NodeKind::Leaf { value } => value,
            NodeKind::Split { .. } => panic!("node {id} is not a leaf"),
        }
    }

    /// Fills `buf` with one entry per arena slot: the leaf value for leaves,
    /// zero elsewhere.
    pub fn value_table(&self, buf: &mut Vec<f64>) {
        buf.clear();
        buf.extend(self.nodes.iter().map(|n| match n.kind {
            NodeKind::Leaf { value } => value,
            NodeKind::Split { .. } => 0.0,
        }));
    }

    pub fn set_leaf_value(&mut self, id: usize, value: f64) {
        match &mut self.nodes[id].kind {
            NodeKind::Leaf { value: v } => *v = value,
            NodeKind::Split { .. } => panic!("node {id} is not a leaf"),
        }
    }

    pub fn rule(&self, id: usize) -> Option<SplitRule> {
        match self.nodes[id].kind {
            NodeKind::Split { rule, .. } => Some(rule),
            NodeKind::Leaf { .. } => None,
        }
    }

    pub fn set_rule(&mut self, id: usize, new_rule: SplitRule) {
        match &mut self.nodes[id].kind {
            NodeKind::Split { rule, .. } => *rule = new_rule,
            NodeKind::Leaf { .. } => panic!("node {id} is not internal"),
        }
    }

    pub fn children(&self, id: usize) -> Option<(usize, usize)> {
        match self.nodes[id].kind {
            NodeKind::Split { left, right, .. } => Some((left, right)),
            NodeKind::Leaf { .. } => None,
        }
    }

    fn alloc(&mut self, node: Node) -> usize {
        match self.free.pop() {
            Some(id) => {
                self.nodes[id] = node;
                id
            }
            None => {
                self.nodes.push(node);
                self.nodes.len() - 1
            }
        }
    }

    /// Turns leaf `id` into a split with two fresh leaves; returns (left, right).
    pub fn grow(&mut self, id: usize, rule: SplitRule, left_value: f64, right_value: f64) -> (usize, usize) {
        assert!(self.nodes[id].is_leaf(), "grow on internal node {id}");
        let depth = self.nodes[id].depth + 1;
        let left = self.alloc(Node {
            depth,
            parent: Some(id),
            kind: NodeKind::Leaf { value: left_value },
        });
        let right = self.alloc(Node {
            depth,
            parent: Some(id),
            kind: NodeKind::Leaf { value: right_value },
        });
        self.nodes[id].kind = NodeKind::Split { rule, left, right };
        (left, right)
    }

    /// Collapses a node whose children are leaves back into a leaf.
    pub fn prune(&mut self, id: usize, value: f64) {
        let (left, right) = self.children(id).expect("prune on a leaf");
        assert!(
            self.nodes[left].is_leaf() && self.nodes[right].is_leaf(),
            "prune requires two leaf children"
        );
        self.free.push(right);
        self.free.push(left);
        self.nodes[id].kind = NodeKind::Leaf { value };
    }

    /// Leaf reached by row `i` of `x`.
    #[inline]
    pub fn leaf_for_row(&self, x: &Covariates, i: usize) -> usize {
        self.descend_row(ROOT, x, i)
    }

    /// Leaf reached by row `i` starting from node `start`.
    #[inline]
    pub fn descend_row(&self, start: usize, x: &Covariates, i: usize) -> usize {
        let mut id = start;
        loop {
            match self.nodes[id].kind {
                NodeKind::Leaf { .. } => return id,
                NodeKind::Split { rule, left, right } => {
                    id = if rule.goes_left(x.get(i, rule.variable)) {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    /// Leaf value for a single covariate vector.
    pub fn assign_leaf(&self, x: &[f64]) -> Result<f64> {
        if let Some(v) = self.max_variable() {
            if v >= x.len() {
                return Err(Error::DimensionMismatch {
                    expected: v + 1,
                    got: x.len(),
                });
            }
        }
        let mut id = ROOT;
        loop {
            match self.nodes[id].kind {
                NodeKind::Leaf { value } => return Ok(value),
                NodeKind::Split { rule, left, right } => {
                    id = if rule.goes_left(x[rule.variable]) { left } else { right };
                }
            }
        }
    }

    /// Leaf value for row `i` of a covariate matrix (no dimension check).
    #[inline]
    pub fn value_for_row(&self, x: &Covariates, i: usize) -> f64 {
        self.leaf_value(self.leaf_for_row(x, i))
    }

    pub fn to_preorder(&self) -> Vec<PreorderNode> {
        self.preorder_ids()
            .into_iter()
            .map(|id| match self.nodes[id].kind {
                NodeKind::Leaf { value } => PreorderNode::Leaf(value),
                NodeKind::Split { rule, .. } => PreorderNode::Split(rule),
            })
            .collect()
    }

    /// Rebuilds a compact tree from a preorder list.
    pub fn from_preorder(items: &[PreorderNode]) -> Result<Self> {
        fn build(
            items: &[PreorderNode],
            pos: &mut usize,
            depth: u32,
            parent: Option<usize>,
            nodes: &mut Vec<Node>,
        ) -> Result<usize> {
            let item = *items
                .get(*pos)
                .ok_or_else(|| Error::Format("truncated preorder tree".into()))?;
            *pos += 1;
            let id = nodes.len();
            match item {
                PreorderNode::Leaf(value) => nodes.push(Node {
                    depth,
                    parent,
                    kind: NodeKind::Leaf { value },
                }),
                PreorderNode::Split(rule) => {
                    nodes.push(Node {
                        depth,
                        parent,
                        kind: NodeKind::Leaf { value: 0.0 },
                    });
                    let left = build(items, pos, depth + 1, Some(id), nodes)?;
                    let right = build(items, pos, depth + 1, Some(id), nodes)?;
                    nodes[id].kind = NodeKind::Split { rule, left, right };
                }
            }
            Ok(id)
        }
        let mut nodes = Vec::with_capacity(items.len());
        let mut pos = 0;
        build(items, &mut pos, 0, None, &mut nodes)?;
        if pos != items.len() {
            return Err(Error::Format("trailing nodes after preorder tree".into()));
        }
        Ok(Self {
            nodes,
            free: Vec::new(),
        })
    }

    /// Indented text rendering, one node per line.
    pub fn render(&self, names: &[String]) -> String {
        let mut out = String::new();
        self.render_node(ROOT, names, &mut out);
        out
    }

    fn render_node(&self, id: usize, names: &[String], out: &mut String) {
        let node = &self.nodes[id];
        let pad = "  ".repeat(node.depth as usize);
        match node.kind {
            NodeKind::Leaf { value } => out.push_str(&format!("{pad}leaf: {value:.6}\n")),
            NodeKind::Split { rule, left, right } => {
                let name = names
                    .get(rule.variable)
                    .cloned()
                    .unwrap_or_else(|| format!("x{}", rule.variable + 1));
                out.push_str(&format!("{pad}{name} <= {:.6}\n", rule.cutpoint));
                self.render_node(left, names, out);
                out.push_str(&format!("{pad}{name} > {:.6}\n", rule.cutpoint));
                self.render_node(right, names, out);
            }
        }
    }
}
