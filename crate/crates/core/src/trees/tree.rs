//! CART regression trees grown level by level with an exact split scan.
//!
//! Each row carries a gradient `g` and a hessian `h`. A node's value is
//! `G / (H + l2)` and a split's gain is
//! `G_L^2/(H_L+l2) + G_R^2/(H_R+l2) - G^2/(H+l2)`. With `h = 1` and
//! `l2 = 0` this is the least-squares tree: leaf means and SSE reduction.
//!
//! Columns are sorted once per training set ([`SortedColumns`]) and reused
//! by every tree of an ensemble; one pass per feature per level evaluates
//! every candidate threshold of every open node.

use crate::error::{CpdError, Result};
use crate::timeseries::Rows;

/// Growth limits and regularization for a single tree.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    /// L2 penalty on leaf values (0 for plain least squares).
    pub l2: f64,
    /// Minimum hessian sum in each child.
    pub min_child_weight: f64,
}

impl TreeParams {
    pub fn least_squares(max_depth: usize, min_leaf: usize) -> Self {
        Self {
            max_depth,
            min_leaf,
            l2: 0.0,
            min_child_weight: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegressionTree {
    nodes: Vec<Node>,
    n_features: usize,
    max_depth: usize,
    min_leaf: usize,
}

impl RegressionTree {
    /// Tree with a single leaf.
    pub fn constant(value: f64, n_features: usize) -> Self {
        Self {
            nodes: vec![Node::Leaf { value }],
            n_features,
            max_depth: 0,
            min_leaf: 1,
        }
    }

    #[inline]
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn min_leaf(&self) -> usize {
        self.min_leaf
    }

    pub fn num_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// Length of the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Features used by any split.
    pub fn split_features(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .collect()
    }

    /// Sum of squared errors of the tree against `targets`.
    pub fn sse(&self, rows: &Rows, targets: &[f64]) -> f64 {
        rows.iter()
            .zip(targets)
            .map(|(r, t)| (self.predict(r) - t).powi(2))
            .sum()
    }
}

/// Per-feature `(row, value)` pairs sorted by value.
#[derive(Clone, Debug)]
pub struct SortedColumns {
    columns: Vec<Vec<(u32, f64)>>,
    n_rows: usize,
}

impl SortedColumns {
    pub fn new(rows: &Rows) -> Self {
        let columns = (0..rows.ncols())
            .map(|f| {
                let mut col: Vec<(u32, f64)> = (0..rows.nrows()).map(|i| (i as u32, rows.get(i, f))).collect();
                col.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
                col
            })
            .collect();
        Self {
            columns,
            n_rows: rows.nrows(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }
}

#[derive(Clone, Copy, Default)]
struct Stats {
    g: f64,
    h: f64,
    n: usize,
}

impl Stats {
    fn minus(&self, other: &Stats) -> Stats {
        Stats {
            g: self.g - other.g,
            h: self.h - other.h,
            n: self.n - other.n,
        }
    }
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
    /// Position of the first right-hand row within the node's segment of
    /// the split feature.
    cut: usize,
    left: Stats,
}

/// An open node: its id in the tree and its rows, which occupy
/// `start..end` of every feature buffer.
#[derive(Clone, Copy)]
struct Open {
    id: usize,
    start: usize,
    end: usize,
    total: Stats,
}

fn score(s: &Stats, l2: f64) -> f64 {
    s.g * s.g / (s.h + l2)
}

fn leaf_value(s: &Stats, l2: f64) -> f64 {
    let denom = s.h + l2;
    if denom > 0.0 {
        s.g / denom
    } else {
        0.0
    }
}

/// A row's value on one feature with its gradient and hessian.
#[derive(Clone, Copy, Default)]
struct Entry {
    v: f64,
    g: f64,
    h: f64,
    row: u32,
}

/// Best split of one node on one feature, scanning its sorted segment.
fn scan_segment(
    seg: &[Entry],
    total: Stats,
    parent: f64,
    feature: usize,
    params: &TreeParams,
    min_leaf: usize,
    best: &mut Option<Candidate>,
) {
    let l2 = params.l2;
    let mut left = Stats::default();
    let mut last = f64::NAN;
    for (pos, e) in seg.iter().enumerate() {
        let v = e.v;
        if left.n >= min_leaf && v > last {
            let right = total.minus(&left);
            if right.n < min_leaf {
                break;
            }
            if left.h >= params.min_child_weight && right.h >= params.min_child_weight {
                let gain = score(&left, l2) + score(&right, l2) - parent;
                if best.is_none_or(|b| gain > b.gain) {
                    let mid = 0.5 * (last + v);
                    // Adjacent floats can round the midpoint up to `v`.
                    let threshold = if mid < v { mid } else { last };
                    *best = Some(Candidate {
                        gain,
                        feature,
                        threshold,
                        cut: pos,
                        left,
                    });
                }
            }
        }
        left.g += e.g;
        left.h += e.h;
        left.n += 1;
        last = v;
    }
}

/// Grows one tree on the rows with `in_sample[i]` set (all rows when `None`).
pub fn grow_tree(
    rows: &Rows,
    columns: &SortedColumns,
    grad: &[f64],
    hess: &[f64],
    in_sample: Option<&[bool]>,
    params: &TreeParams,
) -> Result<RegressionTree> {
    let n = rows.nrows();
    if n == 0 {
        return Err(CpdError::invalid("cannot grow a tree on zero rows"));
    }
    if grad.len() != n || hess.len() != n || columns.n_rows() != n {
        return Err(CpdError::invalid(format!(
            "tree inputs disagree in length: {n} rows, {} gradients, {} hessians",
            grad.len(),
            hess.len()
        )));
    }
    if in_sample.is_some_and(|m| m.len() != n) {
        return Err(CpdError::invalid("sample mask length differs from row count"));
    }
    let min_leaf = params.min_leaf.max(1);
    let keep = |row: u32| in_sample.is_none_or(|m| m[row as usize]);

    let mut root = Stats::default();
    for i in (0..n).filter(|&i| keep(i as u32)) {
        root.g += grad[i];
        root.h += hess[i];
        root.n += 1;
    }
    if root.n == 0 {
        return Err(CpdError::invalid("tree sample is empty"));
    }

    let mut nodes = vec![Node::Leaf {
        value: leaf_value(&root, params.l2),
    }];
    if params.max_depth == 0 {
        return Ok(RegressionTree {
            nodes,
            n_features: rows.ncols(),
            max_depth: 0,
            min_leaf,
        });
    }
    let mut buffers: Vec<Vec<Entry>> = columns
        .columns
        .iter()
        .map(|col| {
            col.iter()
                .filter(|&&(r, _)| keep(r))
                .map(|&(row, v)| Entry {
                    v,
                    g: grad[row as usize],
                    h: hess[row as usize],
                    row,
                })
                .collect()
        })
        .collect();
    let mut scratch: Vec<Entry> = Vec::with_capacity(root.n);
    let mut frontier = vec![Open {
        id: 0,
        start: 0,
        end: root.n,
        total: root,
    }];
    let mut goes_left = vec![false; n];

    for _depth in 0..params.max_depth {
        if frontier.is_empty() {
            break;
        }
        let mut next = Vec::new();
        let mut splits: Vec<(Open, Candidate)> = Vec::new();
        for open in &frontier {
            if open.total.n < 2 * min_leaf {
                continue;
            }
            let parent = score(&open.total, params.l2);
            let mut best = None;
            for (f, buf) in buffers.iter().enumerate() {
                scan_segment(
                    &buf[open.start..open.end],
                    open.total,
                    parent,
                    f,
                    params,
                    min_leaf,
                    &mut best,
                );
            }
            let Some(c) = best else { continue };
            let tol = 1e-12 * parent.abs();
            if !(c.gain > tol) || c.gain <= 0.0 {
                continue;
            }
            splits.push((*open, c));
        }
        if splits.is_empty() {
            break;
        }

        for (open, c) in &splits {
            for (pos, e) in buffers[c.feature][open.start..open.end].iter().enumerate() {
                goes_left[e.row as usize] = pos < c.cut;
            }
            let left_id = nodes.len();
            let right = open.total.minus(&c.left);
            nodes.push(Node::Leaf {
                value: leaf_value(&c.left, params.l2),
            });
            nodes.push(Node::Leaf {
                value: leaf_value(&right, params.l2),
            });
            nodes[open.id] = Node::Split {
                feature: c.feature,
                threshold: c.threshold,
                left: left_id,
                right: left_id + 1,
            };
            let mid = open.start + c.cut;
            next.push(Open {
                id: left_id,
                start: open.start,
                end: mid,
                total: c.left,
            });
            next.push(Open {
                id: left_id + 1,
                start: mid,
                end: open.end,
                total: right,
            });
        }
        // Stable partition of every feature's segments into left then right.
        for buf in buffers.iter_mut() {
            for (open, c) in &splits {
                let seg = &mut buf[open.start..open.end];
                scratch.clear();
                scratch.resize(seg.len(), Entry::default());
                // Branch-free: every element is written to both sides and
                // only the matching cursor advances.
                let (mut w, mut r) = (0, 0);
                for i in 0..seg.len() {
                    let e = seg[i];
                    let left = goes_left[e.row as usize] as usize;
                    seg[w] = e;
                    scratch[r] = e;
                    w += left;
                    r += 1 - left;
                }
                debug_assert_eq!(w, c.cut);
                seg[w..].copy_from_slice(&scratch[..r]);
            }
        }
        frontier = next;
    }

    Ok(RegressionTree {
        nodes,
        n_features: rows.ncols(),
        max_depth: params.max_depth,
        min_leaf,
    })
}

/// Least-squares regression tree on `targets`.
pub fn fit_tree(rows: &Rows, targets: &[f64], max_depth: usize, min_leaf: usize) -> Result<RegressionTree> {
    if rows.is_empty() {
        return Err(CpdError::invalid("cannot fit a tree on zero rows"));
    }
    if targets.len() != rows.nrows() {
        return Err(CpdError::invalid(format!(
            "{} targets for {} rows",
            targets.len(),
            rows.nrows()
        )));
    }
    if let Some(i) = targets.iter().position(|t| !t.is_finite()) {
        return Err(CpdError::invalid(format!("non-finite target at row {i}")));
    }
    let columns = SortedColumns::new(rows);
    let hess = vec![1.0; rows.nrows()];
    grow_tree(
        rows,
        &columns,
        targets,
        &hess,
        None,
        &TreeParams::least_squares(max_depth, min_leaf),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn constant_targets_make_single_leaf() {
        let rows = Rows::new((0..30).map(|i| (i % 7) as f64).collect(), 1).unwrap();
        let tree = fit_tree(&rows, &[2.5; 30], 6, 1).unwrap();
        assert_eq!(tree.num_leaves(), 1);
        assert_eq!(tree.predict(&[3.0]), 2.5);
    }

    #[test]
    fn separable_pair_fits_exactly() {
        let rows = Rows::new(vec![0.0, 1.0], 1).unwrap();
        let tree = fit_tree(&rows, &[-1.0, 1.0], 1, 1).unwrap();
        assert_eq!(tree.sse(&rows, &[-1.0, 1.0]), 0.0);
        assert_eq!(tree.predict(&[0.0]), -1.0);
        assert_eq!(tree.predict(&[1.0]), 1.0);
    }

    #[test]
    fn empty_and_mismatched_inputs_error() {
        assert!(fit_tree(&Rows::empty(2), &[], 3, 1).is_err());
        let rows = Rows::new(vec![0.0, 1.0], 1).unwrap();
        assert!(fit_tree(&rows, &[1.0], 3, 1).is_err());
    }

    #[test]
    fn min_leaf_is_respected() {
        let rows = Rows::new((0..10).map(f64::from).collect(), 1).unwrap();
        let targets: Vec<f64> = (0..10).map(|i| if i < 2 { 10.0 } else { 0.0 }).collect();
        let tree = fit_tree(&rows, &targets, 3, 3).unwrap();
        for leaf_rows in [0.0, 1.0] {
            // Rows 0 and 1 cannot be isolated: they share a leaf with row 2.
            assert_eq!(tree.predict(&[leaf_rows]), tree.predict(&[2.0]));
        }
    }

    /// Best single split found by trying every threshold on every feature.
    fn best_stump_sse(rows: &Rows, targets: &[f64]) -> f64 {
        let sse = |idx: &[usize]| {
            if idx.is_empty() {
                return 0.0;
            }
            let m = idx.iter().map(|&i| targets[i]).sum::<f64>() / idx.len() as f64;
            idx.iter().map(|&i| (targets[i] - m).powi(2)).sum::<f64>()
        };
        let all: Vec<usize> = (0..rows.nrows()).collect();
        let mut best = sse(&all);
        for f in 0..rows.ncols() {
            for &cut in &all {
                let thr = rows.get(cut, f);
                let (l, r): (Vec<usize>, Vec<usize>) = all.iter().partition(|&&i| rows.get(i, f) <= thr);
                best = best.min(sse(&l) + sse(&r));
            }
        }
        best
    }

    #[test]
    fn depth_two_beats_exhaustive_stump() {
        for seed in 0..20 {
            let mut rng = rng_from_seed(seed);
            let rows = Rows::new((0..60).map(|_| rng.random::<f64>()).collect(), 3).unwrap();
            let targets: Vec<f64> = (0..20).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            let tree = fit_tree(&rows, &targets, 2, 1).unwrap();
            let stump = fit_tree(&rows, &targets, 1, 1).unwrap();
            let oracle = best_stump_sse(&rows, &targets);
            assert!((stump.sse(&rows, &targets) - oracle).abs() < 1e-9);
            assert!(tree.sse(&rows, &targets) <= oracle + 1e-9);
        }
    }

    #[test]
    fn masked_rows_are_ignored() {
        let rows = Rows::new(vec![0.0, 1.0, 2.0, 3.0], 1).unwrap();
        let cols = SortedColumns::new(&rows);
        let grad = [1.0, 1.0, 100.0, 100.0];
        let hess = [1.0; 4];
        let mask = [true, true, false, false];
        let tree = grow_tree(
            &rows,
            &cols,
            &grad,
            &hess,
            Some(&mask),
            &TreeParams::least_squares(3, 1),
        )
        .unwrap();
        assert_eq!(tree.num_leaves(), 1);
        assert_eq!(tree.predict(&[3.0]), 1.0);
    }

    proptest! {
        #[test]
        fn depth_bounded_and_leaves_finite(
            vals in proptest::collection::vec(-5.0f64..5.0, 40),
            depth in 0usize..5,
        ) {
            let rows = Rows::new(vals.clone(), 2).unwrap();
            let targets: Vec<f64> = vals.chunks(2).map(|c| c[0] * c[1]).collect();
            let tree = fit_tree(&rows, &targets, depth, 2).unwrap();
            prop_assert!(tree.depth() <= depth);
            for node in tree.nodes() {
                if let Node::Leaf { value } = node {
                    prop_assert!(value.is_finite());
                }
            }
        }

        #[test]
        fn constant_column_never_used(vals in proptest::collection::vec(-5.0f64..5.0, 30)) {
            let targets: Vec<f64> = vals.iter().map(|v| v.sin()).collect();
            let plain = Rows::new(vals.clone(), 1).unwrap();
            let padded = Rows::new(vals.iter().flat_map(|&v| [v, 7.0]).collect(), 2).unwrap();
            let a = fit_tree(&plain, &targets, 4, 2).unwrap();
            let b = fit_tree(&padded, &targets, 4, 2).unwrap();
            prop_assert!(!b.split_features().contains(&1));
            for &v in &vals {
                prop_assert_eq!(a.predict(&[v]), b.predict(&[v, 7.0]));
            }
        }
    }
}
