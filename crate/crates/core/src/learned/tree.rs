//! Fast incremental regression tree with constant leaves.
//!
//! Leaves keep running mean, variance and outcome extrema. Each leaf also
//! keeps, per input dimension, aggregates of the outcomes seen at every
//! distinct input value; these are the split candidates.

use serde::{Deserialize, Serialize};

use crate::bounds::{BoundingBox, Interval};
use crate::error::{invalid, Result};
use crate::rng::RngStream;
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub max_leaves: usize,
    /// Observations between split checks.
    pub split_interval: usize,
    /// One minus the confidence required to split.
    pub delta: f64,
    /// Hoeffding bound below which the best two candidates count as tied.
    pub tie_threshold: f64,
    /// Distinct values tracked per dimension and leaf; further values merge
    /// into the nearest tracked one.
    pub max_candidates: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self { max_leaves: 100, split_interval: 100, delta: 0.05, tie_threshold: 0.05, max_candidates: 1024 }
    }
}

/// Running statistics of the outcomes routed to a leaf.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeafStats<T> {
    pub count: u64,
    pub mean: T,
    pub m2: T,
    pub min: T,
    pub max: T,
}

impl<T: Real> Default for LeafStats<T> {
    fn default() -> Self {
        Self { count: 0, mean: T::zero(), m2: T::zero(), min: T::infinity(), max: T::neg_infinity() }
    }
}

impl<T: Real> LeafStats<T> {
    pub fn push(&mut self, y: T) {
        self.count += 1;
        let d = y - self.mean;
        self.mean += d / T::lit(self.count as f64);
        self.m2 += d * (y - self.mean);
        self.min = self.min.min(y);
        self.max = self.max.max(y);
    }

    /// Sample variance; zero below two observations.
    pub fn variance(&self) -> T {
        if self.count < 2 {
            T::zero()
        } else {
            (self.m2 / T::lit((self.count - 1) as f64)).max(T::zero())
        }
    }

    /// Observed outcome range; the point 0 before any data.
    pub fn range(&self) -> Interval<T> {
        if self.count == 0 {
            Interval::point(T::zero())
        } else {
            Interval::spanning(self.min, self.max)
        }
    }

    fn from_sums(s: &Agg<T>) -> Self {
        let n = T::lit(s.count as f64);
        let mean = s.sum / n;
        Self { count: s.count, mean, m2: (s.sumsq - s.sum * mean).max(T::zero()), min: s.min, max: s.max }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Agg<T> {
    count: u64,
    sum: T,
    sumsq: T,
    min: T,
    max: T,
}

impl<T: Real> Agg<T> {
    fn empty() -> Self {
        Self { count: 0, sum: T::zero(), sumsq: T::zero(), min: T::infinity(), max: T::neg_infinity() }
    }

    fn push(&mut self, y: T) {
        self.count += 1;
        self.sum += y;
        self.sumsq += y * y;
        self.min = self.min.min(y);
        self.max = self.max.max(y);
    }

    fn merge(&mut self, o: &Self) {
        self.count += o.count;
        self.sum += o.sum;
        self.sumsq += o.sumsq;
        self.min = self.min.min(o.min);
        self.max = self.max.max(o.max);
    }

    /// Sum of squared deviations from the mean.
    fn sse(&self) -> T {
        if self.count == 0 {
            T::zero()
        } else {
            (self.sumsq - self.sum * self.sum / T::lit(self.count as f64)).max(T::zero())
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Leaf<T> {
    pub stats: LeafStats<T>,
    /// Per dimension, sorted `(value, outcome aggregate)` pairs.
    candidates: Vec<Vec<(T, Agg<T>)>>,
    since_check: usize,
}

impl<T: Real> Leaf<T> {
    fn new(dims: usize, stats: LeafStats<T>) -> Self {
        Self { stats, candidates: vec![Vec::new(); dims], since_check: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Node<T> {
    /// Inputs with `x[dim] > threshold` go right.
    Split { dim: usize, threshold: T, left: usize, right: usize },
    Leaf(Leaf<T>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree<T> {
    config: TreeConfig,
    input_dim: usize,
    nodes: Vec<Node<T>>,
    num_leaves: usize,
}

/// Best split of one leaf along one dimension.
#[derive(Clone, Debug, PartialEq)]
struct Candidate<T> {
    dim: usize,
    threshold: T,
    reduction: T,
    left: Agg<T>,
    right: Agg<T>,
}

impl<T: Real> RegressionTree<T> {
    pub fn new(input_dim: usize, config: TreeConfig) -> Result<Self> {
        if input_dim == 0 || config.max_leaves == 0 || config.split_interval == 0 || config.max_candidates < 2 {
            return invalid("tree needs inputs, a positive leaf cap, split interval and at least 2 candidates");
        }
        Ok(Self { config, input_dim, nodes: vec![Node::Leaf(Leaf::new(input_dim, LeafStats::default()))], num_leaves: 1 })
    }

    /// A fixed tree from `(dim, threshold)` splits and leaf statistics, in
    /// the node layout of [`Node`]. Node 0 is the root.
    pub fn from_nodes(input_dim: usize, config: TreeConfig, nodes: Vec<Node<T>>) -> Result<Self> {
        let mut seen = vec![false; nodes.len()];
        let mut stack = vec![0usize];
        let mut leaves = 0;
        while let Some(i) = stack.pop() {
            if i >= nodes.len() || seen[i] {
                return invalid("tree nodes must form a tree rooted at node 0");
            }
            seen[i] = true;
            match &nodes[i] {
                Node::Split { dim, left, right, .. } => {
                    if *dim >= input_dim {
                        return invalid("split dimension out of range");
                    }
                    stack.push(*left);
                    stack.push(*right);
                }
                Node::Leaf(_) => leaves += 1,
            }
        }
        if seen.iter().any(|s| !s) {
            return invalid("unreachable tree node");
        }
        Ok(Self { config, input_dim, nodes, num_leaves: leaves })
    }

    pub fn leaf_node(stats: LeafStats<T>) -> Node<T> {
        Node::Leaf(Leaf { stats, candidates: Vec::new(), since_check: 0 })
    }

    pub fn config(&self) -> &TreeConfig {
        &self.config
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn num_leaves(&self) -> usize {
        self.num_leaves
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[Node<T>] {
        &self.nodes
    }

    fn leaf_index(&self, x: &[T]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split { dim, threshold, left, right } => i = if x[*dim] > *threshold { *right } else { *left },
                Node::Leaf(_) => return i,
            }
        }
    }

    pub fn leaf(&self, x: &[T]) -> &LeafStats<T> {
        match &self.nodes[self.leaf_index(x)] {
            Node::Leaf(l) => &l.stats,
            Node::Split { .. } => unreachable!(),
        }
    }

    pub fn predict(&self, x: &[T]) -> T {
        self.leaf(x).mean
    }

    pub fn variance(&self, x: &[T]) -> T {
        self.leaf(x).variance()
    }

    pub fn range(&self, x: &[T]) -> Interval<T> {
        self.leaf(x).range()
    }

    /// Draw from `N(mean, variance)` of the routed leaf.
    pub fn sample(&self, x: &[T], rng: &mut RngStream) -> T {
        let s = self.leaf(x);
        T::lit(rng.normal(s.mean.to_f64_lossy(), s.variance().sqrt().to_f64_lossy()))
    }

    fn fold_box(&self, b: &BoundingBox<T>, f: &impl Fn(&LeafStats<T>) -> Interval<T>) -> Interval<T> {
        let mut out: Option<Interval<T>> = None;
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            match &self.nodes[i] {
                Node::Split { dim, threshold, left, right } => {
                    if b.lower()[*dim] <= *threshold {
                        stack.push(*left);
                    }
                    if b.upper()[*dim] > *threshold {
                        stack.push(*right);
                    }
                }
                Node::Leaf(l) => {
                    let iv = f(&l.stats);
                    out = Some(out.map_or(iv, |o| o.hull(&iv)));
                }
            }
        }
        out.expect("a box reaches at least one leaf")
    }

    /// Hull of leaf means over the leaves the box reaches.
    pub fn output_bounds(&self, b: &BoundingBox<T>) -> Interval<T> {
        self.fold_box(b, &|s| Interval::point(s.mean))
    }

    /// Hull of observed outcome ranges over the leaves the box reaches.
    pub fn outcome_bounds(&self, b: &BoundingBox<T>) -> Interval<T> {
        self.fold_box(b, &|s| s.range())
    }

    pub fn train(&mut self, x: &[T], y: T) {
        let i = self.leaf_index(x);
        let at_cap = self.num_leaves >= self.config.max_leaves;
        let max_candidates = self.config.max_candidates;
        let check = {
            let Node::Leaf(leaf) = &mut self.nodes[i] else { unreachable!() };
            leaf.stats.push(y);
            if at_cap {
                if !leaf.candidates.is_empty() {
                    leaf.candidates = Vec::new();
                }
                false
            } else {
                if leaf.candidates.is_empty() {
                    leaf.candidates = vec![Vec::new(); x.len()];
                }
                for (d, cands) in leaf.candidates.iter_mut().enumerate() {
                    record_candidate(cands, x[d], y, max_candidates);
                }
                leaf.since_check += 1;
                leaf.since_check >= self.config.split_interval
            }
        };
        if check {
            self.try_split(i);
        }
    }

    fn try_split(&mut self, i: usize) {
        let Node::Leaf(leaf) = &mut self.nodes[i] else { unreachable!() };
        leaf.since_check = 0;
        let n = leaf.stats.count;
        let mut best: Vec<Candidate<T>> = leaf
            .candidates
            .iter()
            .enumerate()
            .filter_map(|(d, c)| best_split(d, c))
            .collect();
        best.sort_by(|a, b| b.reduction.partial_cmp(&a.reduction).expect("finite reductions"));
        let Some(top) = best.first() else { return };
        if !(top.reduction > T::zero()) {
            return;
        }
        let second = best.get(1).map_or(T::zero(), |c| c.reduction);
        let ratio = (second / top.reduction).to_f64_lossy();
        let eps = ((1.0 / self.config.delta).ln() / (2.0 * n as f64)).sqrt();
        if !(ratio + eps < 1.0 || eps < self.config.tie_threshold) {
            return;
        }
        let top = top.clone();
        let dims = self.input_dim;
        let left = self.nodes.len();
        self.nodes.push(Node::Leaf(Leaf::new(dims, LeafStats::from_sums(&top.left))));
        self.nodes.push(Node::Leaf(Leaf::new(dims, LeafStats::from_sums(&top.right))));
        self.nodes[i] = Node::Split { dim: top.dim, threshold: top.threshold, left, right: left + 1 };
        self.num_leaves += 1;
    }
}

fn record_candidate<T: Real>(cands: &mut Vec<(T, Agg<T>)>, x: T, y: T, cap: usize) {
    let pos = cands.partition_point(|(v, _)| *v < x);
    if pos < cands.len() && cands[pos].0 == x {
        cands[pos].1.push(y);
        return;
    }
    if cands.len() < cap {
        let mut a = Agg::empty();
        a.push(y);
        cands.insert(pos, (x, a));
        return;
    }
    // Full: merge into the nearest tracked value.
    let nearest = if pos == 0 {
        0
    } else if pos == cands.len() || x - cands[pos - 1].0 <= cands[pos].0 - x {
        pos - 1
    } else {
        pos
    };
    cands[nearest].1.push(y);
}

/// Highest variance reduction split `x <= v` / `x > v` over tracked values.
fn best_split<T: Real>(dim: usize, cands: &[(T, Agg<T>)]) -> Option<Candidate<T>> {
    if cands.len() < 2 {
        return None;
    }
    let mut total = Agg::empty();
    for (_, a) in cands {
        total.merge(a);
    }
    let n = T::lit(total.count as f64);
    let parent = total.sse() / n;
    let mut suffix = vec![Agg::empty(); cands.len() + 1];
    for k in (0..cands.len()).rev() {
        let mut a = suffix[k + 1].clone();
        a.merge(&cands[k].1);
        suffix[k] = a;
    }
    let mut left = Agg::empty();
    let mut best: Option<Candidate<T>> = None;
    for (k, (v, a)) in cands[..cands.len() - 1].iter().enumerate() {
        left.merge(a);
        let right = &suffix[k + 1];
        let reduction = parent - (left.sse() + right.sse()) / n;
        if best.as_ref().map_or(true, |b| reduction > b.reduction) {
            best = Some(Candidate { dim, threshold: *v, reduction, left: left.clone(), right: right.clone() });
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf(values: &[f64]) -> Node<f64> {
        let mut s = LeafStats::default();
        for &v in values {
            s.push(v);
        }
        RegressionTree::leaf_node(s)
    }

    fn stump() -> RegressionTree<f64> {
        let nodes = vec![Node::Split { dim: 0, threshold: 0.5, left: 1, right: 2 }, leaf(&[0.0, 1.0]), leaf(&[3.0, 4.0])];
        RegressionTree::from_nodes(1, TreeConfig::default(), nodes).unwrap()
    }

    #[test]
    fn straddling_box_hulls_children() {
        let t = stump();
        let b = BoundingBox::new(vec![0.0], vec![1.0]).unwrap();
        assert_eq!(t.outcome_bounds(&b), Interval::spanning(0.0, 4.0));
        assert_eq!(t.output_bounds(&b), Interval::spanning(0.5, 3.5));
        let b = BoundingBox::new(vec![0.6], vec![1.0]).unwrap();
        assert_eq!(t.outcome_bounds(&b), Interval::spanning(3.0, 4.0));
    }

    #[test]
    fn point_box_matches_routed_leaf() {
        let t = stump();
        for x in [0.2, 0.5, 0.7] {
            let b = BoundingBox::from_point(&[x]).unwrap();
            assert_eq!(t.output_bounds(&b), Interval::point(t.predict(&[x])));
            assert_eq!(t.outcome_bounds(&b), t.range(&[x]));
        }
        assert_eq!(t.predict(&[0.5]), 0.5);
        assert_eq!(t.variance(&[0.9]), 0.5);
    }

    #[test]
    fn constant_outcomes_never_split() {
        let mut t = RegressionTree::new(2, TreeConfig::default()).unwrap();
        let mut rng = RngStream::new(0);
        for _ in 0..3000 {
            t.train(&[rng.unit(), rng.unit()], 2.0);
        }
        assert_eq!(t.num_leaves(), 1);
        assert_eq!(t.range(&[0.3, 0.3]), Interval::point(2.0));
    }

    #[test]
    fn leaf_statistics_match_recomputation() {
        let mut t = RegressionTree::<f64>::new(1, TreeConfig { max_leaves: 1, ..TreeConfig::default() }).unwrap();
        let mut rng = RngStream::new(3);
        let ys: Vec<f64> = (0..500).map(|_| rng.normal(3.0, 2.0)).collect();
        for &y in &ys {
            t.train(&[rng.unit()], y);
        }
        let n = ys.len() as f64;
        let mean = ys.iter().sum::<f64>() / n;
        let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let s = t.leaf(&[0.0]);
        assert!(((s.mean - mean) / mean).abs() < 1e-9);
        assert!(((s.variance() - var) / var).abs() < 1e-9);
        assert_eq!(s.min, ys.iter().copied().fold(f64::INFINITY, f64::min));
    }

    #[test]
    fn step_function_splits_near_the_step() {
        let mut t = RegressionTree::new(1, TreeConfig::default()).unwrap();
        let mut rng = RngStream::new(4);
        for _ in 0..100 {
            let x = rng.uniform(0.0, 1.0);
            t.train(&[x], if x > 0.3 { 1.0 } else { 0.0 });
        }
        match &t.nodes()[0] {
            Node::Split { threshold, .. } => assert!((threshold - 0.3).abs() < 0.05),
            Node::Leaf(_) => panic!("expected a split"),
        }
    }

    #[test]
    fn candidate_cap_merges_into_nearest() {
        let mut c: Vec<(f64, Agg<f64>)> = Vec::new();
        for x in [0.0, 1.0, 0.9, 0.2] {
            record_candidate(&mut c, x, 1.0, 2);
        }
        assert_eq!(c.len(), 2);
        assert_eq!((c[0].1.count, c[1].1.count), (2, 2));
    }

    #[test]
    fn rejects_malformed_trees() {
        let nodes = vec![Node::Split { dim: 0, threshold: 0.0, left: 1, right: 1 }, leaf(&[1.0])];
        assert!(RegressionTree::from_nodes(1, TreeConfig::default(), nodes).is_err());
        let nodes = vec![Node::Split { dim: 2, threshold: 0.0, left: 1, right: 2 }, leaf(&[1.0]), leaf(&[1.0])];
        assert!(RegressionTree::from_nodes(1, TreeConfig::default(), nodes).is_err());
    }

    #[test]
    fn works_in_f32() {
        let mut t = RegressionTree::<f32>::new(1, TreeConfig::default()).unwrap();
        for i in 0..200 {
            let x = i as f32 / 200.0;
            t.train(&[x], if x > 0.5 { 2.0 } else { -2.0 });
        }
        assert_eq!(t.num_leaves(), 2);
        assert!(t.predict(&[0.9]) > 1.9);
    }
}
