//! Greedy least-squares regression tree used as an interpretable projection.

use serde::{Deserialize, Serialize};

use crate::data::Covariates;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CartConfig {
    pub max_depth: usize,
    /// `None` means `max(20, n / 100)`.
    pub min_leaf: Option<usize>,
}

impl Default for CartConfig {
    fn default() -> Self {
        Self {
            max_depth: 3,
            min_leaf: None,
        }
    }
}

impl CartConfig {
    pub fn min_leaf_for(&self, n: usize) -> usize {
        self.min_leaf.unwrap_or_else(|| (n / 100).max(20))
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_depth == 0 || self.min_leaf == Some(0) {
            return Err(Error::InvalidParameter("CART needs max_depth >= 1 and min_leaf >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum CartNodeKind {
    Leaf,
    Split {
        variable: usize,
        cutpoint: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CartNode {
    pub depth: usize,
    /// Mean of the values reaching the node.
    pub value: f64,
    pub n: usize,
    pub kind: CartNodeKind,
}

/// Fitted tree; node 0 is the root, rows with `x <= cutpoint` go left.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CartTree {
    pub nodes: Vec<CartNode>,
}

/// One root-to-leaf path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CartRule {
    /// `(variable, is_left, cutpoint)`: `x[variable] <= cutpoint` when left.
    pub conditions: Vec<(usize, bool, f64)>,
    pub value: f64,
    pub n: usize,
    pub leaf: usize,
}

#[derive(Clone, Copy, Debug)]
struct BestSplit {
    variable: usize,
    cutpoint: f64,
    sse: f64,
}

fn sse_of(sum: f64, sum_sq: f64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        (sum_sq - sum * sum / n as f64).max(0.0)
    }
}

/// Best split of `rows` over all variables. Ties keep the lowest variable and
/// then the lowest cutpoint, since candidates are scanned in that order and
/// only a strictly smaller SSE replaces the incumbent.
fn best_split(values: &[f64], x: &Covariates, rows: &[usize], min_leaf: usize) -> Option<BestSplit> {
    let n = rows.len();
    if n < 2 * min_leaf {
        return None;
    }
    let mut best: Option<BestSplit> = None;
    let mut order: Vec<usize> = rows.to_vec();
    for variable in 0..x.n_cols() {
        let col = x.column(variable);
        order.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
        let total_sum: f64 = order.iter().map(|&i| values[i]).sum();
        let total_sq: f64 = order.iter().map(|&i| values[i] * values[i]).sum();
        let (mut ls, mut lq) = (0.0, 0.0);
        for k in 0..n - 1 {
            let v = values[order[k]];
            ls += v;
            lq += v * v;
            let nl = k + 1;
            let (xa, xb) = (col[order[k]], col[order[k + 1]]);
            if xa == xb || nl < min_leaf || n - nl < min_leaf {
                continue;
            }
            let sse = sse_of(ls, lq, nl) + sse_of(total_sum - ls, total_sq - lq, n - nl);
            if best.is_none_or(|b| sse < b.sse) {
                best = Some(BestSplit {
                    variable,
                    cutpoint: 0.5 * (xa + xb),
                    sse,
                });
            }
        }
    }
    best
}

/// Fits a greedy SSE-minimizing tree of `values` on `x`.
pub fn fit_cart(values: &[f64], x: &Covariates, cfg: &CartConfig) -> Result<CartTree> {
    cfg.validate()?;
    let n = values.len();
    if n == 0 {
        return Err(Error::InvalidData("CART needs at least one observation".into()));
    }
    if x.n_rows() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x.n_rows() });
    }
    let min_leaf = cfg.min_leaf_for(n);
    let mut nodes = Vec::new();
    let mut stack = vec![(None::<(usize, bool)>, 0usize, (0..n).collect::<Vec<usize>>())];
    while let Some((parent, depth, rows)) = stack.pop() {
        let sum: f64 = rows.iter().map(|&i| values[i]).sum();
        let sq: f64 = rows.iter().map(|&i| values[i] * values[i]).sum();
        let id = nodes.len();
        nodes.push(CartNode {
            depth,
            value: sum / rows.len() as f64,
            n: rows.len(),
            kind: CartNodeKind::Leaf,
        });
        if let Some((p, is_left)) = parent {
            if let CartNodeKind::Split { left, right, .. } = &mut nodes[p].kind {
                if is_left {
                    *left = id;
                } else {
                    *right = id;
                }
            }
        }
        if depth >= cfg.max_depth {
            continue;
        }
        let node_sse = sse_of(sum, sq, rows.len());
        let Some(split) = best_split(values, x, &rows, min_leaf) else {
            continue;
        };
        if !(split.sse < node_sse - 1e-12 * node_sse.max(1e-300)) {
            continue;
        }
        let col = x.column(split.variable);
        let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| col[i] <= split.cutpoint);
        nodes[id].kind = CartNodeKind::Split {
            variable: split.variable,
            cutpoint: split.cutpoint,
            left: usize::MAX,
            right: usize::MAX,
        };
        stack.push((Some((id, false)), depth + 1, r));
        stack.push((Some((id, true)), depth + 1, l));
    }
    Ok(CartTree { nodes })
}

impl CartTree {
    pub fn leaf_of(&self, x: &Covariates, i: usize) -> usize {
        let mut id = 0;
        loop {
            match self.nodes[id].kind {
                CartNodeKind::Leaf => return id,
                CartNodeKind::Split {
                    variable,
                    cutpoint,
                    left,
                    right,
                } => id = if x.get(i, variable) <= cutpoint { left } else { right },
            }
        }
    }

    pub fn predict(&self, x: &Covariates) -> Vec<f64> {
        (0..x.n_rows()).map(|i| self.nodes[self.leaf_of(x, i)].value).collect()
    }

    pub fn leaf_ids(&self) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&id| matches!(self.nodes[id].kind, CartNodeKind::Leaf))
            .collect()
    }

    pub fn n_leaves(&self) -> usize {
        self.leaf_ids().len()
    }

    /// Leaf ordinal (position among [`CartTree::leaf_ids`]) for every row,
    /// usable as subgroup labels.
    pub fn leaf_labels(&self, x: &Covariates) -> Vec<usize> {
        let ids = self.leaf_ids();
        (0..x.n_rows())
            .map(|i| {
                let leaf = self.leaf_of(x, i);
                ids.binary_search(&leaf).expect("leaf id")
            })
            .collect()
    }

    pub fn rules(&self) -> Vec<CartRule> {
        let mut out = Vec::new();
        let mut stack = vec![(0usize, Vec::new())];
        while let Some((id, conds)) = stack.pop() {
            let node = &self.nodes[id];
            match node.kind {
                CartNodeKind::Leaf => out.push(CartRule {
                    conditions: conds,
                    value: node.value,
                    n: node.n,
                    leaf: id,
                }),
                CartNodeKind::Split {
                    variable,
                    cutpoint,
                    left,
                    right,
                } => {
                    let mut r = conds.clone();
                    r.push((variable, false, cutpoint));
                    stack.push((right, r));
                    let mut l = conds;
                    l.push((variable, true, cutpoint));
                    stack.push((left, l));
                }
            }
        }
        out
    }

    /// Indented text rendering.
    pub fn render(&self, names: &[String]) -> String {
        let name = |v: usize| names.get(v).cloned().unwrap_or_else(|| format!("x{}", v + 1));
        let mut s = String::new();
        let mut stack = vec![(0usize, String::new())];
        while let Some((id, label)) = stack.pop() {
            let node = &self.nodes[id];
            let indent = "  ".repeat(node.depth);
            match node.kind {
                CartNodeKind::Leaf => {
                    s.push_str(&format!("{indent}{label}value = {:.6} (n = {})\n", node.value, node.n));
                }
                CartNodeKind::Split {
                    variable,
                    cutpoint,
                    left,
                    right,
                } => {
                    s.push_str(&format!("{indent}{label}mean = {:.6} (n = {})\n", node.value, node.n));
                    stack.push((right, format!("{} > {cutpoint:.6}: ", name(variable))));
                    stack.push((left, format!("{} <= {cutpoint:.6}: ", name(variable))));
                }
            }
        }
        s
    }

    pub fn sse(&self, values: &[f64], x: &Covariates) -> f64 {
        self.predict(x).iter().zip(values).map(|(f, v)| (v - f).powi(2)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_values_give_a_root() {
        let x = Covariates::from_rows(&(0..50).map(|i| vec![i as f64]).collect::<Vec<_>>()).unwrap();
        let t = fit_cart(&[2.0; 50], &x, &CartConfig::default()).unwrap();
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.nodes[0].value, 2.0);
    }

    #[test]
    fn midpoint_cutpoint_and_rules() {
        let rows: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64, (i % 3) as f64]).collect();
        let x = Covariates::from_rows(&rows).unwrap();
        let v: Vec<f64> = (0..100).map(|i| if i < 40 { 1.0 } else { 3.0 }).collect();
        let cfg = CartConfig {
            max_depth: 2,
            min_leaf: Some(5),
        };
        let t = fit_cart(&v, &x, &cfg).unwrap();
        match t.nodes[0].kind {
            CartNodeKind::Split { variable, cutpoint, .. } => {
                assert_eq!(variable, 0);
                assert_eq!(cutpoint, 39.5);
            }
            CartNodeKind::Leaf => panic!("expected a split"),
        }
        assert_eq!(t.rules().len(), 2);
        assert!(t.render(&["age".into(), "z".into()]).contains("age <= 39.5"));
        assert_eq!(t.leaf_labels(&x)[0], 0);
        assert_eq!(t.leaf_labels(&x)[99], 1);
    }
}
