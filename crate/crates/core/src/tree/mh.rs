//! Single-tree Metropolis-Hastings over tree structures with the leaf values
//! integrated out, followed by a conjugate redraw of the leaf values.
//!
//! Moves are GROW (0.25), PRUNE (0.25) and CHANGE (0.50). Split rules are
//! proposed from their prior: the variable uniformly over all covariates and
//! the cutpoint uniformly over the distinct values of that variable among the
//! rows reaching the node, excluding the largest so both children are
//! non-empty. Rule probabilities of the proposed node therefore cancel;
//! CHANGE still accounts for the rule probabilities of the nodes below the
//! changed one, whose row sets move.

use rand::Rng;

use super::leaf::{draw_leaf_value, leaf_log_marginal_kernel, LeafStats, ScaledResponse};
use super::node::{DecisionTree, NodeKind, SplitRule};
use super::prior::TreePrior;
use crate::data::Covariates;

pub const P_GROW: f64 = 0.25;
pub const P_PRUNE: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TreeUpdateParams {
    pub prior: TreePrior,
    pub leaf_var: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MoveKind {
    Grow,
    Prune,
    Change,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MoveOutcome {
    pub kind: MoveKind,
    /// False when the proposal could not be formed (nothing to prune, no
    /// available cutpoint, an empty leaf); such moves are rejected.
    pub valid: bool,
    pub accepted: bool,
}

impl MoveOutcome {
    fn invalid(kind: MoveKind) -> Self {
        Self {
            kind,
            valid: false,
            accepted: false,
        }
    }
}

/// Counts of proposals and acceptances per move type.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct MoveCounts {
    pub proposed: [u64; 3],
    pub invalid: [u64; 3],
    pub accepted: [u64; 3],
}

impl MoveCounts {
    pub fn record(&mut self, out: MoveOutcome) {
        let k = out.kind as usize;
        self.proposed[k] += 1;
        if !out.valid {
            self.invalid[k] += 1;
        }
        if out.accepted {
            self.accepted[k] += 1;
        }
    }

    pub fn merge(&mut self, other: &Self) {
        for k in 0..3 {
            self.proposed[k] += other.proposed[k];
            self.invalid[k] += other.invalid[k];
            self.accepted[k] += other.accepted[k];
        }
    }
}

/// Initial routing: every row sits in the root leaf.
pub fn root_routing(n: usize) -> Vec<u32> {
    vec![0; n]
}

/// Recomputes `leaf_of` from scratch.
pub fn route_all(tree: &DecisionTree, x: &Covariates, leaf_of: &mut [u32]) {
    for (i, slot) in leaf_of.iter_mut().enumerate() {
        *slot = tree.leaf_for_row(x, i) as u32;
    }
}

/// Sorted distinct values of `column` over `rows`, minus the largest.
pub fn available_cutpoints(column: &[f64], rows: &[usize]) -> Vec<f64> {
    let mut vals: Vec<f64> = rows.iter().map(|&i| column[i]).collect();
    vals.sort_by(f64::total_cmp);
    vals.dedup();
    vals.pop();
    vals
}

/// Bitmap over the distinct values of one column marking those present
/// among a set of rows.
struct PresentValues {
    words: Vec<u64>,
    count: usize,
}

impl PresentValues {
    fn new(x: &Covariates, variable: usize, rows: &[usize]) -> Self {
        let ranks = x.ranks(variable);
        let mut words = vec![0u64; x.uniques(variable).len().div_ceil(64)];
        for &i in rows {
            let r = ranks[i] as usize;
            words[r / 64] |= 1 << (r % 64);
        }
        let count = words.iter().map(|w| w.count_ones() as usize).sum();
        Self { words, count }
    }

    /// Number of usable cutpoints: present values minus the largest.
    fn n_cuts(&self) -> usize {
        self.count.saturating_sub(1)
    }

    /// Rank of the `k`-th present value, counting from zero.
    fn nth(&self, mut k: usize) -> usize {
        for (w, &word) in self.words.iter().enumerate() {
            let ones = word.count_ones() as usize;
            if k < ones {
                let mut word = word;
                for _ in 0..k {
                    word &= word - 1;
                }
                return w * 64 + word.trailing_zeros() as usize;
            }
            k -= ones;
        }
        unreachable!("k exceeds the number of present values")
    }

    fn contains(&self, r: usize) -> bool {
        self.words[r / 64] >> (r % 64) & 1 == 1
    }

    fn any_above(&self, r: usize) -> bool {
        let w = r / 64;
        let above = if r % 64 == 63 { 0 } else { self.words[w] >> (r % 64 + 1) };
        above != 0 || self.words[w + 1..].iter().any(|&x| x != 0)
    }
}

/// Draws a cutpoint for `variable` uniformly from those available at `rows`.
fn draw_cutpoint<R: Rng + ?Sized>(x: &Covariates, variable: usize, rows: &[usize], rng: &mut R) -> Option<f64> {
    let present = PresentValues::new(x, variable, rows);
    let n = present.n_cuts();
    if n == 0 {
        return None;
    }
    let k = rng.random_range(0..n);
    Some(x.uniques(variable)[present.nth(k)])
}

fn cutpoint_count_if_valid(x: &Covariates, variable: usize, rows: &[usize], cut: f64) -> Option<usize> {
    let r = x.uniques(variable).binary_search_by(|v| v.total_cmp(&cut)).ok()?;
    let present = PresentValues::new(x, variable, rows);
    (present.contains(r) && present.any_above(r)).then(|| present.n_cuts())
}

#[inline]
fn stats_for(rows: &[usize], data: &ScaledResponse) -> LeafStats {
    let mut st = LeafStats::default();
    for &i in rows {
        st.push(data.response[i], data.scale.at(i));
    }
    st
}

#[inline]
fn kernel(st: &LeafStats, data: &ScaledResponse, leaf_var: f64) -> f64 {
    leaf_log_marginal_kernel(st.sum_sr, st.sum_ss, data.noise_var, leaf_var)
}

/// Walk of a subtree with a given set of rows: leaf statistics and the
/// summed log rule probability (`-log #cutpoints`) of the internal nodes
/// strictly below `top`. `None` if a leaf is empty or a rule below `top`
/// is not an available cutpoint for the rows reaching it.
struct SubtreeWalk {
    leaves: Vec<(usize, Vec<usize>, LeafStats)>,
    log_rule_prior: f64,
}

fn walk_subtree(
    tree: &DecisionTree,
    top: usize,
    rows: Vec<usize>,
    x: &Covariates,
    data: &ScaledResponse,
) -> Option<SubtreeWalk> {
    let mut walk = SubtreeWalk {
        leaves: Vec::new(),
        log_rule_prior: 0.0,
    };
    let mut stack = vec![(top, rows)];
    while let Some((id, rows)) = stack.pop() {
        if rows.is_empty() {
            return None;
        }
        match tree.node(id).kind {
            NodeKind::Leaf { .. } => {
                let st = stats_for(&rows, data);
                walk.leaves.push((id, rows, st));
            }
            NodeKind::Split { rule, left, right } => {
                let column = x.column(rule.variable);
                if id != top {
                    let n_cuts = cutpoint_count_if_valid(x, rule.variable, &rows, rule.cutpoint)?;
                    walk.log_rule_prior -= (n_cuts as f64).ln();
                }
                let (l, r) = split_rows(&rows, column, rule);
                stack.push((right, r));
                stack.push((left, l));
            }
        }
    }
    Some(walk)
}

/// One MH structure move followed by a redraw of every leaf value.
///
/// `leaf_of` must hold the current leaf of every row and is kept in sync.
pub fn mh_tree_update<R: Rng + ?Sized>(
    tree: &mut DecisionTree,
    leaf_of: &mut [u32],
    x: &Covariates,
    data: &ScaledResponse,
    params: &TreeUpdateParams,
    rng: &mut R,
) -> MoveOutcome {
    let u: f64 = rng.random();
    let outcome = if u < P_GROW {
        propose_grow(tree, leaf_of, x, data, params, rng)
    } else if u < P_GROW + P_PRUNE {
        propose_prune(tree, leaf_of, data, params, rng)
    } else {
        propose_change(tree, leaf_of, x, data, params, rng)
    };
    sample_leaf_values(tree, leaf_of, data, params.leaf_var, rng);
    outcome
}

fn rows_in(leaf_of: &[u32], id: usize) -> Vec<usize> {
    let id = id as u32;
    let mut rows = Vec::with_capacity(leaf_of.len());
    rows.extend(
        leaf_of
            .iter()
            .enumerate()
            .filter_map(|(i, &l)| (l == id).then_some(i)),
    );
    rows
}

fn split_rows(rows: &[usize], column: &[f64], rule: SplitRule) -> (Vec<usize>, Vec<usize>) {
    let mut left = Vec::with_capacity(rows.len());
    let mut right = Vec::with_capacity(rows.len());
    for &i in rows {
        if rule.goes_left(column[i]) {
            left.push(i);
        } else {
            right.push(i);
        }
    }
    (left, right)
}

#[inline]
fn accept<R: Rng + ?Sized>(log_ratio: f64, rng: &mut R) -> bool {
    let u: f64 = rng.random();
    u.ln() < log_ratio
}

fn propose_grow<R: Rng + ?Sized>(
    tree: &mut DecisionTree,
    leaf_of: &mut [u32],
    x: &Covariates,
    data: &ScaledResponse,
    params: &TreeUpdateParams,
    rng: &mut R,
) -> MoveOutcome {
    let leaves = tree.leaf_ids();
    let leaf = leaves[rng.random_range(0..leaves.len())];
    if x.n_cols() == 0 {
        return MoveOutcome::invalid(MoveKind::Grow);
    }
    let variable = rng.random_range(0..x.n_cols());
    let rows = rows_in(leaf_of, leaf);
    let column = x.column(variable);
    let Some(cutpoint) = draw_cutpoint(x, variable, &rows, rng) else {
        return MoveOutcome::invalid(MoveKind::Grow);
    };
    let rule = SplitRule { variable, cutpoint };
    let (left_rows, right_rows) = split_rows(&rows, column, rule);
    let st_l = stats_for(&left_rows, data);
    let st_r = stats_for(&right_rows, data);
    let st_p = st_l.merged(&st_r);

    let depth = tree.node(leaf).depth;
    let prior = &params.prior;
    let log_prior = prior.log_split(depth) + 2.0 * prior.log_stop(depth + 1) - prior.log_stop(depth);
    let log_lik = kernel(&st_l, data, params.leaf_var) + kernel(&st_r, data, params.leaf_var)
        - kernel(&st_p, data, params.leaf_var);

    // Prunable count after the grow: the new node joins, its parent may leave.
    let mut n_prunable = tree.prunable_ids().len() + 1;
    if let Some(parent) = tree.node(leaf).parent {
        let (a, b) = tree.children(parent).expect("parent is internal");
        let sibling = if a == leaf { b } else { a };
        if tree.node(sibling).is_leaf() {
            n_prunable -= 1;
        }
    }
    let log_proposal = (leaves.len() as f64).ln() - (n_prunable as f64).ln();

    let accepted = accept(log_prior + log_lik + log_proposal, rng);
    if accepted {
        let (l, r) = tree.grow(leaf, rule, 0.0, 0.0);
        for &i in &left_rows {
            leaf_of[i] = l as u32;
        }
        for &i in &right_rows {
            leaf_of[i] = r as u32;
        }
    }
    MoveOutcome {
        kind: MoveKind::Grow,
        valid: true,
        accepted,
    }
}

fn propose_prune<R: Rng + ?Sized>(
    tree: &mut DecisionTree,
    leaf_of: &mut [u32],
    data: &ScaledResponse,
    params: &TreeUpdateParams,
    rng: &mut R,
) -> MoveOutcome {
    if tree.is_root_only() {
        return MoveOutcome::invalid(MoveKind::Prune);
    }
    let prunable = tree.prunable_ids();
    let node = prunable[rng.random_range(0..prunable.len())];
    let (l, r) = tree.children(node).expect("prunable node is internal");
    let (l32, r32) = (l as u32, r as u32);
    let mut st_l = LeafStats::default();
    let mut st_r = LeafStats::default();
    for (i, &leaf) in leaf_of.iter().enumerate() {
        if leaf == l32 {
            st_l.push(data.response[i], data.scale.at(i));
        } else if leaf == r32 {
            st_r.push(data.response[i], data.scale.at(i));
        }
    }
    let st_p = st_l.merged(&st_r);

    let depth = tree.node(node).depth;
    let prior = &params.prior;
    let log_prior = prior.log_stop(depth) - prior.log_split(depth) - 2.0 * prior.log_stop(depth + 1);
    let log_lik = kernel(&st_p, data, params.leaf_var)
        - kernel(&st_l, data, params.leaf_var)
        - kernel(&st_r, data, params.leaf_var);
    let n_leaves_after = tree.n_leaves() - 1;
    let log_proposal = (prunable.len() as f64).ln() - (n_leaves_after as f64).ln();

    let accepted = accept(log_prior + log_lik + log_proposal, rng);
    if accepted {
        tree.prune(node, 0.0);
        for leaf in leaf_of.iter_mut() {
            if *leaf == l32 || *leaf == r32 {
                *leaf = node as u32;
            }
        }
    }
    MoveOutcome {
        kind: MoveKind::Prune,
        valid: true,
        accepted,
    }
}

fn propose_change<R: Rng + ?Sized>(
    tree: &mut DecisionTree,
    leaf_of: &mut [u32],
    x: &Covariates,
    data: &ScaledResponse,
    params: &TreeUpdateParams,
    rng: &mut R,
) -> MoveOutcome {
    let internal = tree.internal_ids();
    if internal.is_empty() {
        return MoveOutcome::invalid(MoveKind::Change);
    }
    let node = internal[rng.random_range(0..internal.len())];

    let mut in_subtree = vec![false; tree.arena_len()];
    let mut stack = vec![node];
    while let Some(id) = stack.pop() {
        in_subtree[id] = true;
        if let Some((l, r)) = tree.children(id) {
            stack.push(l);
            stack.push(r);
        }
    }
    let mut rows = Vec::with_capacity(leaf_of.len());
    rows.extend(
        leaf_of
            .iter()
            .enumerate()
            .filter_map(|(i, &l)| in_subtree[l as usize].then_some(i)),
    );

    let variable = rng.random_range(0..x.n_cols());
    let Some(cutpoint) = draw_cutpoint(x, variable, &rows, rng) else {
        return MoveOutcome::invalid(MoveKind::Change);
    };
    let new_rule = SplitRule { variable, cutpoint };
    let old_rule = tree.rule(node).expect("internal node has a rule");

    let old = walk_subtree(tree, node, rows.clone(), x, data)
        .expect("current tree has non-empty leaves and valid rules");
    tree.set_rule(node, new_rule);
    let Some(new) = walk_subtree(tree, node, rows, x, data) else {
        tree.set_rule(node, old_rule);
        return MoveOutcome::invalid(MoveKind::Change);
    };

    let sum_kernel = |w: &SubtreeWalk| -> f64 {
        w.leaves
            .iter()
            .map(|(_, _, st)| kernel(st, data, params.leaf_var))
            .sum()
    };
    let log_ratio = sum_kernel(&new) - sum_kernel(&old) + new.log_rule_prior - old.log_rule_prior;
    let accepted = accept(log_ratio, rng);
    if accepted {
        for (id, rows, _) in &new.leaves {
            for &i in rows {
                leaf_of[i] = *id as u32;
            }
        }
    } else {
        tree.set_rule(node, old_rule);
    }
    MoveOutcome {
        kind: MoveKind::Change,
        valid: true,
        accepted,
    }
}

/// Redraws every leaf value from its conjugate conditional posterior.
pub fn sample_leaf_values<R: Rng + ?Sized>(
    tree: &mut DecisionTree,
    leaf_of: &[u32],
    data: &ScaledResponse,
    leaf_var: f64,
    rng: &mut R,
) {
    let mut sum_sr = vec![0.0; tree.arena_len()];
    let mut sum_ss = vec![0.0; tree.arena_len()];
    for (i, &l) in leaf_of.iter().enumerate() {
        let s = data.scale.at(i);
        sum_sr[l as usize] += s * data.response[i];
        sum_ss[l as usize] += s * s;
    }
    for id in tree.leaf_ids() {
        let v = draw_leaf_value(sum_sr[id], sum_ss[id], data.noise_var, leaf_var, rng);
        tree.set_leaf_value(id, v);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::leaf::Scales;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params() -> TreeUpdateParams {
        TreeUpdateParams {
            prior: TreePrior::default(),
            leaf_var: 0.25,
        }
    }

    #[test]
    fn cutpoints_exclude_maximum() {
        let col = [3.0, 1.0, 2.0, 3.0, 1.0];
        assert_eq!(available_cutpoints(&col, &[0, 1, 2, 3, 4]), vec![1.0, 2.0]);
        assert!(available_cutpoints(&col, &[0, 3]).is_empty());
    }

    #[test]
    fn bitmap_cutpoints_match_sorted_values() {
        let col: Vec<f64> = (0..300).map(|i| ((i * 37) % 131) as f64).collect();
        let x = Covariates::from_columns(vec![col.clone()], vec!["v".into()]).unwrap();
        let rows: Vec<usize> = (0..300).filter(|i| i % 3 != 0).collect();
        let cuts = available_cutpoints(&col, &rows);
        let present = PresentValues::new(&x, 0, &rows);
        assert_eq!(present.n_cuts(), cuts.len());
        for (k, c) in cuts.iter().enumerate() {
            assert_eq!(x.uniques(0)[present.nth(k)], *c);
            assert_eq!(cutpoint_count_if_valid(&x, 0, &rows, *c), Some(cuts.len()));
        }
        assert_eq!(cutpoint_count_if_valid(&x, 0, &rows, 130.0), None);
        assert_eq!(cutpoint_count_if_valid(&x, 0, &rows, 0.5), None);
    }

    #[test]
    fn prune_at_root_is_rejected_without_change() {
        let _x = Covariates::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let r = [0.1, 0.2];
        let data = ScaledResponse::new(&r, Scales::Unit, 1.0).unwrap();
        let mut tree = DecisionTree::leaf(0.0);
        let mut leaf_of = root_routing(2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let out = propose_prune(&mut tree, &mut leaf_of, &data, &params(), &mut rng);
        assert!(!out.valid && !out.accepted);
        assert!(tree.is_root_only());
    }

    #[test]
    fn routing_stays_consistent() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64 / 40.0, ((i * 7) % 11) as f64]).collect();
        let x = Covariates::from_rows(&rows).unwrap();
        let r: Vec<f64> = (0..40).map(|i| if i < 20 { -1.0 } else { 1.0 }).collect();
        let data = ScaledResponse::new(&r, Scales::Unit, 0.1).unwrap();
        let mut tree = DecisionTree::leaf(0.0);
        let mut leaf_of = root_routing(40);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            mh_tree_update(&mut tree, &mut leaf_of, &x, &data, &params(), &mut rng);
            let mut fresh = vec![0u32; 40];
            route_all(&tree, &x, &mut fresh);
            assert_eq!(fresh, leaf_of);
            for id in tree.leaf_ids() {
                assert!(leaf_of.contains(&(id as u32)), "empty leaf {id}");
            }
        }
    }

    #[test]
    fn seeded_replay_is_identical() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![(i % 7) as f64, (i % 5) as f64]).collect();
        let x = Covariates::from_rows(&rows).unwrap();
        let r: Vec<f64> = (0..30).map(|i| (i % 7) as f64 * 0.3).collect();
        let data = ScaledResponse::new(&r, Scales::Unit, 0.5).unwrap();
        let run = || {
            let mut tree = DecisionTree::leaf(0.0);
            let mut leaf_of = root_routing(30);
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            (0..200)
                .map(|_| {
                    mh_tree_update(&mut tree, &mut leaf_of, &x, &data, &params(), &mut rng);
                    tree.to_preorder()
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }
}
