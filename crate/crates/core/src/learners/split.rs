//! Shared regression-tree growth for the single tree and the forest.
//!
//! Features are discretized once into their sorted distinct values. Every
//! feature keeps the node's rows ordered by value, and a split partitions
//! all of those lists stably, so scanning a node costs time proportional to
//! its size. Thresholds fall midway between adjacent observed values,
//! exactly as an exhaustive scan would place them.

use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;

const LEAF: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    /// Split feature, or `u32::MAX` for a leaf.
    pub feature: u32,
    pub threshold: f64,
    pub left: u32,
    pub right: u32,
    /// Mean target of the node's training rows.
    pub value: f64,
    /// Training rows reaching the node, bootstrap duplicates included.
    pub count: u32,
    /// Sum-of-squares reduction of the node's split (0 for leaves).
    pub gain: f64,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        self.feature == LEAF
    }

    fn leaf() -> Node {
        Node { feature: LEAF, threshold: 0.0, left: 0, right: 0, value: 0.0, count: 0, gain: 0.0 }
    }
}

/// A fitted regression tree: rows with `x[feature] < threshold` go left.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
}

impl RegressionTree {
    #[inline]
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut k = 0usize;
        loop {
            let node = &self.nodes[k];
            if node.is_leaf() {
                return node.value;
            }
            k = if row[node.feature as usize] < node.threshold { node.left } else { node.right } as usize;
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    pub fn depth(&self) -> usize {
        fn go(t: &RegressionTree, k: usize) -> usize {
            let n = &t.nodes[k];
            if n.is_leaf() { 0 } else { 1 + go(t, n.left as usize).max(go(t, n.right as usize)) }
        }
        go(self, 0)
    }

    /// The tree that growth would have produced had nodes with at most
    /// `min_count` rows not been split.
    pub fn truncated(&self, min_count: u32) -> RegressionTree {
        let mut nodes = vec![Node::leaf()];
        let mut stack = vec![(0usize, 0usize)];
        while let Some((src, dst)) = stack.pop() {
            let node = self.nodes[src];
            if node.is_leaf() || node.count <= min_count {
                nodes[dst] = Node { feature: LEAF, threshold: 0.0, left: 0, right: 0, gain: 0.0, ..node };
                continue;
            }
            let left = nodes.len();
            nodes.push(Node::leaf());
            nodes.push(Node::leaf());
            nodes[dst] = Node { left: left as u32, right: left as u32 + 1, ..node };
            stack.push((node.right as usize, left + 1));
            stack.push((node.left as usize, left));
        }
        RegressionTree { nodes }
    }

    /// Split gains credited to each of `p` features.
    pub fn importance(&self, p: usize) -> Vec<f64> {
        let mut imp = vec![0.0; p];
        for n in self.nodes.iter().filter(|n| !n.is_leaf()) {
            imp[n.feature as usize] += n.gain;
        }
        imp
    }
}

/// Features discretized into ranks of their sorted distinct values.
pub(crate) struct Binned {
    pub levels: Vec<Vec<f64>>,
    /// Per feature, rows ordered by rank (ties by index), each packed as
    /// `rank << 32 | row`.
    sorted: Vec<Vec<u64>>,
}

impl Binned {
    pub fn new(x: &Matrix) -> Self {
        let (n, p) = (x.nrows(), x.ncols());
        let mut levels = Vec::with_capacity(p);
        let mut sorted = Vec::with_capacity(p);
        for j in 0..p {
            let col = x.column(j);
            let mut lv = col.clone();
            lv.sort_by(f64::total_cmp);
            lv.dedup();
            let b: Vec<u32> = (0..n)
                .map(|i| lv.binary_search_by(|v| v.total_cmp(&col[i])).expect("value present") as u32)
                .collect();
            let mut order: Vec<u64> = (0..n).map(|i| u64::from(b[i]) << 32 | i as u64).collect();
            order.sort_unstable();
            levels.push(lv);
            sorted.push(order);
        }
        Binned { levels, sorted }
    }

    pub fn n_features(&self) -> usize {
        self.levels.len()
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct GrowParams {
    /// A node is considered for splitting only with at least this many rows.
    pub min_split: usize,
    pub min_leaf: usize,
    pub max_depth: usize,
    /// Absolute sum-of-squares reduction a split must reach.
    pub min_gain: f64,
    /// Candidate features per node; `None` means all, in index order.
    pub mtry: Option<usize>,
}

#[derive(Clone, Copy, Debug)]
struct Candidate {
    feature: usize,
    /// Rows with bin ≤ `left_bin` go left.
    left_bin: u32,
    right_bin: u32,
    /// Position of the first right-going row in the feature's node order.
    cut: usize,
    gain: f64,
}

#[inline]
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Feature subsets are drawn from a stream keyed by the node's position in
/// the tree, so a node's split depends only on the rows that reach it. This
/// makes a tree grown with a small minimum node size contain, node for node,
/// the trees grown with larger ones.
struct NodeStream(u64);

impl NodeStream {
    #[inline]
    fn below(&mut self, bound: usize) -> usize {
        self.0 = mix(self.0);
        ((u128::from(self.0) * bound as u128) >> 64) as usize
    }
}

#[inline]
fn row(entry: u64) -> usize {
    (entry & 0xffff_ffff) as usize
}

#[inline]
fn rank(entry: u64) -> u32 {
    (entry >> 32) as u32
}

pub(crate) struct Grower<'a> {
    data: &'a Binned,
    y: &'a [f64],
    params: GrowParams,
    center: f64,
    /// Per tree: weight and weighted centred target of each row.
    weight: Vec<u32>,
    weighted: Vec<f64>,
    /// Per feature, the tree's distinct rows packed as in [`Binned`]; each
    /// node owns one range.
    order: Vec<Vec<u64>>,
    goes_left: Vec<bool>,
    buffer: Vec<u64>,
    features: Vec<usize>,
}

impl<'a> Grower<'a> {
    pub fn new(data: &'a Binned, y: &'a [f64], params: GrowParams) -> Self {
        let n = y.len();
        let p = data.n_features();
        Grower {
            data,
            y,
            params,
            center: y.iter().sum::<f64>() / n.max(1) as f64,
            weight: vec![0; n],
            weighted: vec![0.0; n],
            order: vec![Vec::with_capacity(n); p],
            goes_left: vec![false; n],
            buffer: Vec::with_capacity(n),
            features: (0..p).collect(),
        }
    }

    /// Grows a tree in which row `i` appears `weights[i]` times (zero leaves
    /// it out). `key` seeds per-node feature sampling.
    pub fn grow(&mut self, weights: &[u32], key: u64) -> RegressionTree {
        for (i, &w) in weights.iter().enumerate() {
            self.weight[i] = w;
            self.weighted[i] = f64::from(w) * (self.y[i] - self.center);
        }
        let mut distinct = 0;
        for (f, order) in self.order.iter_mut().enumerate() {
            order.clear();
            order.extend(self.data.sorted[f].iter().copied().filter(|&e| weights[row(e)] > 0));
            distinct = order.len();
        }
        let mut nodes = Vec::with_capacity(2 * distinct);
        nodes.push(Node::leaf());
        let mut stack = vec![(0usize, 0usize, distinct, 0usize, key)];
        while let Some((id, start, end, depth, node_key)) = stack.pop() {
            let (m, sum, centred, ss) = self.moments(start, end);
            nodes[id].value = sum / m as f64;
            nodes[id].count = m as u32;
            let splittable = m >= self.params.min_split
                && m >= 2 * self.params.min_leaf
                && depth < self.params.max_depth
                && ss > 1e-12 * (1.0 + sum.abs() / m as f64).powi(2) * m as f64;
            let best = if splittable { self.best_split(start, end, m, centred, node_key) } else { None };
            let Some(best) = best.filter(|b| b.gain > 1e-10 * ss && b.gain >= self.params.min_gain) else {
                continue;
            };
            let cut = self.partition(start, end, &best);
            let f = best.feature;
            let levels = &self.data.levels[f];
            let threshold = 0.5 * (levels[best.left_bin as usize] + levels[best.right_bin as usize]);
            let left = nodes.len();
            nodes.push(Node::leaf());
            nodes.push(Node::leaf());
            nodes[id] = Node { feature: f as u32, threshold, left: left as u32, right: left as u32 + 1, gain: best.gain, ..nodes[id] };
            // right pushed first so the left subtree is numbered first
            stack.push((left + 1, cut, end, depth + 1, mix(node_key ^ 0x5851_f42d_4c95_7f2d)));
            stack.push((left, start, cut, depth + 1, mix(node_key ^ 0x1405_7b7e_f767_814f)));
        }
        RegressionTree { nodes }
    }

    /// Weighted row count, target sum, centred target sum and sum of squares.
    fn moments(&self, start: usize, end: usize) -> (usize, f64, f64, f64) {
        let (mut m, mut sum, mut centred, mut sq) = (0usize, 0.0, 0.0, 0.0);
        for &e in &self.order[0][start..end] {
            let i = row(e);
            let w = self.weight[i];
            m += w as usize;
            sum += f64::from(w) * self.y[i];
            centred += self.weighted[i];
            sq += self.weighted[i] * (self.y[i] - self.center);
        }
        (m, sum, centred, (sq - centred * centred / m as f64).max(0.0))
    }

    fn best_split(&mut self, start: usize, end: usize, m: usize, total: f64, key: u64) -> Option<Candidate> {
        let p = self.data.n_features();
        for (i, f) in self.features.iter_mut().enumerate() {
            *f = i;
        }
        let k = match self.params.mtry {
            Some(mtry) => {
                let mtry = mtry.clamp(1, p);
                let mut stream = NodeStream(key);
                for i in 0..mtry {
                    let j = i + stream.below(p - i);
                    self.features.swap(i, j);
                }
                mtry
            }
            None => p,
        };
        let min_leaf = self.params.min_leaf.max(1);
        let base = total * total / m as f64;
        let mut best: Option<Candidate> = None;
        for &f in &self.features[..k] {
            let rows = &self.order[f][start..end];
            if rank(rows[0]) == rank(rows[rows.len() - 1]) {
                continue;
            }
            let (mut nl, mut sl) = (0usize, 0.0);
            let mut prev = rank(rows[0]);
            for (pos, &e) in rows.iter().enumerate() {
                let (b, i) = (rank(e), row(e));
                if b != prev {
                    let nr = m - nl;
                    if nl >= min_leaf && nr >= min_leaf {
                        let sr = total - sl;
                        let gain = sl * sl / nl as f64 + sr * sr / nr as f64 - base;
                        if best.is_none_or(|c| gain > c.gain) {
                            best = Some(Candidate { feature: f, left_bin: prev, right_bin: b, cut: start + pos, gain });
                        }
                    }
                    prev = b;
                }
                nl += self.weight[i] as usize;
                sl += self.weighted[i];
            }
        }
        best
    }

    /// Stably partitions every feature's node range; returns the first
    /// position of the right child.
    fn partition(&mut self, start: usize, end: usize, best: &Candidate) -> usize {
        let split_order = &self.order[best.feature];
        for &e in &split_order[start..best.cut] {
            self.goes_left[row(e)] = true;
        }
        for &e in &split_order[best.cut..end] {
            self.goes_left[row(e)] = false;
        }
        let n_left = best.cut - start;
        for f in 0..self.order.len() {
            if f == best.feature {
                continue;
            }
            let range = &mut self.order[f][start..end];
            self.buffer.clear();
            self.buffer.extend_from_slice(range);
            let (mut l, mut r) = (0, n_left);
            for &e in &self.buffer {
                let slot = if self.goes_left[row(e)] { &mut l } else { &mut r };
                range[*slot] = e;
                *slot += 1;
            }
        }
        best.cut
    }
}
