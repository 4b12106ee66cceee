//! Finite-alphabet code construction by repeated merging of the two lightest
//! items.
//!
//! The merge rule decides the weight of a combined node: `a·(x + y)` for the
//! exponential penalty, `2·max(x, y)` for maximal pointwise redundancy. Keys
//! may live in the log domain when the linear weights would under- or overflow.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap, VecDeque};
use std::f64::consts::LN_2;
use std::fmt;
use std::sync::Arc;

use crate::bits::BitString;
use crate::error::{invalid, Error, Result};
use crate::model::{LengthSeq, Penalty};

/// Arbitrary positive weights; they need not sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSet {
    weights: Vec<f64>,
    sorted: bool,
}

impl WeightSet {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::EmptyInput);
        }
        if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(invalid("weights must be positive and finite"));
        }
        let sorted = weights.windows(2).all(|w| w[0] <= w[1]);
        Ok(Self { weights, sorted })
    }

    /// Like [`WeightSet::new`], but insists on nondecreasing order.
    pub fn sorted(weights: Vec<f64>) -> Result<Self> {
        let set = Self::new(weights)?;
        if !set.sorted {
            return Err(Error::UnsortedInput);
        }
        Ok(set)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_sorted(&self) -> bool {
        self.sorted
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Whether node weights are stored as-is or as natural logarithms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightDomain {
    Linear,
    Log,
}

/// How two node weights combine.
pub trait MergeRule {
    fn merge(&self, x: f64, y: f64) -> f64;
    fn domain(&self) -> WeightDomain {
        WeightDomain::Linear
    }
}

/// `a·(x + y)`.
#[derive(Debug, Clone, Copy)]
pub struct ExponentialMerge(pub f64);

impl MergeRule for ExponentialMerge {
    fn merge(&self, x: f64, y: f64) -> f64 {
        self.0 * (x + y)
    }
}

/// `a·(x + y)` on log weights, carrying `ln a`.
#[derive(Debug, Clone, Copy)]
pub struct LogExponentialMerge(pub f64);

impl MergeRule for LogExponentialMerge {
    fn merge(&self, x: f64, y: f64) -> f64 {
        let (hi, lo) = if x >= y { (x, y) } else { (y, x) };
        self.0 + hi + (lo - hi).exp().ln_1p()
    }

    fn domain(&self) -> WeightDomain {
        WeightDomain::Log
    }
}

/// `2·max(x, y)`.
#[derive(Debug, Clone, Copy)]
pub struct MaxMerge;

impl MergeRule for MaxMerge {
    fn merge(&self, x: f64, y: f64) -> f64 {
        2.0 * x.max(y)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf { symbol: usize, weight: f64 },
    Internal { zero: usize, one: usize, weight: f64 },
}

impl Node {
    fn weight(&self) -> f64 {
        match *self {
            Node::Leaf { weight, .. } | Node::Internal { weight, .. } => weight,
        }
    }
}

/// A full binary code tree over symbols `0..leaf_count`.
#[derive(Clone, PartialEq)]
pub struct CodeTree {
    nodes: Vec<Node>,
    root: usize,
    leaves: usize,
    domain: WeightDomain,
}

impl fmt::Debug for CodeTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CodeTree")
            .field("lengths", &self.lengths())
            .field("root_weight", &self.root_weight())
            .field("domain", &self.domain)
            .finish()
    }
}

impl CodeTree {
    pub fn leaf_count(&self) -> usize {
        self.leaves
    }

    /// Weight of the root in the tree's weight domain. For exponential merges
    /// this is `Σ w(i)·a^n(i)`, for max merges `max w(i)·2^n(i)`.
    pub fn root_weight(&self) -> f64 {
        self.nodes[self.root].weight()
    }

    pub fn domain(&self) -> WeightDomain {
        self.domain
    }

    /// Depth of every leaf, indexed by symbol.
    pub fn lengths(&self) -> Vec<u32> {
        let mut out = vec![0; self.leaves];
        self.walk(|symbol, path| out[symbol] = path.len() as u32);
        out
    }

    pub fn length_seq(&self) -> LengthSeq {
        LengthSeq::finite(self.lengths())
    }

    /// Codeword of every leaf, indexed by symbol.
    pub fn codewords(&self) -> Vec<BitString> {
        let mut out = vec![BitString::new(); self.leaves];
        self.walk(|symbol, path| out[symbol] = BitString::from_bits(path.to_vec()));
        out
    }

    fn walk(&self, mut visit: impl FnMut(usize, &[bool])) {
        let mut stack = vec![(self.root, Vec::new())];
        while let Some((id, path)) = stack.pop() {
            match self.nodes[id] {
                Node::Leaf { symbol, .. } => visit(symbol, &path),
                Node::Internal { zero, one, .. } => {
                    let mut p1 = path.clone();
                    p1.push(true);
                    stack.push((one, p1));
                    let mut p0 = path;
                    p0.push(false);
                    stack.push((zero, p0));
                }
            }
        }
    }

    /// Swaps sibling labels along the root path of `symbol` so that its
    /// codeword becomes all ones. Lengths are unchanged.
    pub fn relabel_all_ones(&mut self, symbol: usize) {
        let Some(path) = self.path_to(self.root, symbol) else {
            return;
        };
        for step in path.windows(2) {
            if let Node::Internal { zero, one, .. } = &mut self.nodes[step[0]] {
                if *zero == step[1] {
                    std::mem::swap(zero, one);
                }
            }
        }
    }

    /// Node ids from `from` down to and including the leaf of `symbol`.
    fn path_to(&self, from: usize, symbol: usize) -> Option<Vec<usize>> {
        match self.nodes[from] {
            Node::Leaf { symbol: s, .. } => (s == symbol).then(|| vec![from]),
            Node::Internal { zero, one, .. } => {
                let rest = self
                    .path_to(zero, symbol)
                    .or_else(|| self.path_to(one, symbol))?;
                let mut path = vec![from];
                path.extend(rest);
                Some(path)
            }
        }
    }

    fn depth_of(&self, target: usize) -> u32 {
        let mut stack = vec![(self.root, 0u32)];
        while let Some((id, depth)) = stack.pop() {
            if id == target {
                return depth;
            }
            if let Node::Internal { zero, one, .. } = self.nodes[id] {
                stack.push((zero, depth + 1));
                stack.push((one, depth + 1));
            }
        }
        unreachable!("node {target} is not in the tree")
    }
}

/// Heap key: lighter first; at equal weight compound nodes before leaves,
/// older compounds before newer ones, and higher-indexed leaves before lower.
#[derive(Debug, Clone, Copy)]
struct Key {
    weight: f64,
    rank: u8,
    seq: usize,
    node: usize,
}

impl PartialEq for Key {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Key {}
impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.weight
            .total_cmp(&other.weight)
            .then(self.rank.cmp(&other.rank))
            .then(self.seq.cmp(&other.seq))
    }
}

fn leaves_of(keys: &[f64]) -> Vec<Node> {
    keys.iter()
        .enumerate()
        .map(|(symbol, &weight)| Node::Leaf { symbol, weight })
        .collect()
}

/// Heap-based construction over arbitrary keys.
pub fn build_with_heap<R: MergeRule + ?Sized>(keys: &[f64], rule: &R) -> Result<CodeTree> {
    if keys.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut nodes = leaves_of(keys);
    let n = keys.len();
    let mut heap: BinaryHeap<Reverse<Key>> = keys
        .iter()
        .enumerate()
        .map(|(i, &weight)| {
            Reverse(Key {
                weight,
                rank: 1,
                seq: n - 1 - i,
                node: i,
            })
        })
        .collect();
    let mut created = 0;
    while heap.len() > 1 {
        let Reverse(x) = heap.pop().unwrap();
        let Reverse(y) = heap.pop().unwrap();
        let weight = rule.merge(x.weight, y.weight);
        nodes.push(Node::Internal {
            zero: x.node,
            one: y.node,
            weight,
        });
        heap.push(Reverse(Key {
            weight,
            rank: 0,
            seq: created,
            node: nodes.len() - 1,
        }));
        created += 1;
    }
    let root = heap.pop().unwrap().0.node;
    Ok(CodeTree {
        nodes,
        root,
        leaves: n,
        domain: rule.domain(),
    })
}

/// Instrumentation collected by the two-queue construction.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TwoQueueTrace {
    /// Largest number of nodes ever waiting in the compound queue.
    pub max_compound_len: usize,
    /// Times a node entered either queue behind a strictly heavier one.
    pub order_violations: usize,
    /// Final depths of the compound nodes left when the leaf queue ran dry,
    /// in queue order (head first).
    pub drained_depths: Vec<u32>,
}

impl TwoQueueTrace {
    /// The compound nodes left over once the leaves run out end up at depths
    /// differing by at most one, with the deeper ones nearer the queue head.
    pub fn complete_tree_holds(&self) -> bool {
        let d = &self.drained_depths;
        match (d.iter().max(), d.iter().min()) {
            (Some(hi), Some(lo)) => hi - lo <= 1 && d.windows(2).all(|w| w[0] >= w[1]),
            _ => true,
        }
    }
}

/// Two-queue construction for keys already in nondecreasing order. Linear in
/// the number of items.
pub fn build_with_two_queues<R: MergeRule + ?Sized>(
    keys: &[f64],
    rule: &R,
) -> Result<(CodeTree, TwoQueueTrace)> {
    if keys.is_empty() {
        return Err(Error::EmptyInput);
    }
    if keys.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::UnsortedInput);
    }
    let mut nodes = leaves_of(keys);
    let mut leaves: VecDeque<usize> = (0..keys.len()).collect();
    let mut compound: VecDeque<usize> = VecDeque::new();
    let mut trace = TwoQueueTrace::default();
    let mut drained: Option<Vec<usize>> = None;

    let weight = |nodes: &[Node], id: usize| nodes[id].weight();
    while leaves.len() + compound.len() > 1 {
        if leaves.is_empty() && drained.is_none() {
            drained = Some(compound.iter().copied().collect());
        }
        let pick = |nodes: &[Node], leaves: &mut VecDeque<usize>, compound: &mut VecDeque<usize>| {
            match (leaves.front(), compound.front()) {
                (Some(&l), Some(&c)) if weight(nodes, c) <= weight(nodes, l) => compound.pop_front(),
                (Some(_), _) => leaves.pop_front(),
                (None, _) => compound.pop_front(),
            }
            .unwrap()
        };
        let x = pick(&nodes, &mut leaves, &mut compound);
        let y = pick(&nodes, &mut leaves, &mut compound);
        let w = rule.merge(weight(&nodes, x), weight(&nodes, y));
        if let Some(&back) = compound.back() {
            if weight(&nodes, back) > w {
                trace.order_violations += 1;
            }
        }
        nodes.push(Node::Internal {
            zero: x,
            one: y,
            weight: w,
        });
        compound.push_back(nodes.len() - 1);
        trace.max_compound_len = trace.max_compound_len.max(compound.len());
    }
    let root = leaves.pop_front().or_else(|| compound.pop_front()).unwrap();
    let tree = CodeTree {
        nodes,
        root,
        leaves: keys.len(),
        domain: rule.domain(),
    };
    if let Some(ids) = drained {
        trace.drained_depths = ids.iter().map(|&id| tree.depth_of(id)).collect();
    }
    Ok((tree, trace))
}

fn check_base(a: f64) -> Result<()> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(invalid(format!("exponential base {a} must be positive")));
    }
    Ok(())
}

/// Tree minimizing `Σ w(i)·a^n(i)`; its root weight is that minimum.
pub fn exp_huffman(weights: &WeightSet, a: f64) -> Result<CodeTree> {
    check_base(a)?;
    build_with_heap(weights.weights(), &ExponentialMerge(a))
}

/// Same optimum as [`exp_huffman`] for nondecreasing weights, using a leaf
/// queue and a FIFO queue of merged nodes instead of a heap.
pub fn exp_huffman_two_queue(weights: &WeightSet, a: f64) -> Result<CodeTree> {
    exp_huffman_two_queue_traced(weights, a).map(|(tree, _)| tree)
}

pub fn exp_huffman_two_queue_traced(weights: &WeightSet, a: f64) -> Result<(CodeTree, TwoQueueTrace)> {
    check_base(a)?;
    if !weights.is_sorted() {
        return Err(Error::UnsortedInput);
    }
    build_with_two_queues(weights.weights(), &ExponentialMerge(a))
}

/// Tree minimizing `max_i [log₂ w(i) + n(i)]`; the root weight is
/// `max_i w(i)·2^n(i)`.
pub fn maxred_huffman(weights: &WeightSet) -> Result<CodeTree> {
    build_with_heap(weights.weights(), &MaxMerge)
}

/// Tree minimizing the `d`-th exponential redundancy, that is exponential
/// merging of `p^(1+d)` with base `2^d`. Large `d` is handled on log weights.
pub fn dth_huffman(probs: &WeightSet, d: f64) -> Result<CodeTree> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(invalid(format!("redundancy order {d} must be positive")));
    }
    let ln_keys: Vec<f64> = probs.weights().iter().map(|p| (1.0 + d) * p.ln()).collect();
    let tiny = ln_keys.iter().any(|&k| k < -650.0);
    if d >= 64.0 || tiny {
        build_with_heap(&ln_keys, &LogExponentialMerge(d * LN_2))
    } else {
        let keys: Vec<f64> = ln_keys.iter().map(|k| k.exp()).collect();
        build_with_heap(&keys, &ExponentialMerge(2f64.powf(d)))
    }
}

/// `Σ w(i)·a^n(i)`.
pub fn exp_cost(weights: &[f64], lengths: &[u32], a: f64) -> f64 {
    weights.iter().zip(lengths).map(|(w, &n)| w * a.powi(n as i32)).sum()
}

/// `max_i w(i)·2^n(i)`.
pub fn max_cost(weights: &[f64], lengths: &[u32]) -> f64 {
    weights
        .iter()
        .zip(lengths)
        .map(|(w, &n)| w * 2f64.powi(n as i32))
        .fold(0.0, f64::max)
}

/// Optimal finite code for `penalty` over probabilities `probs`.
pub fn optimal_finite(probs: &WeightSet, penalty: Penalty) -> Result<CodeTree> {
    match penalty {
        Penalty::Exponential(a) => exp_huffman(probs, a),
        Penalty::Linear => exp_huffman(probs, 1.0),
        Penalty::Dth(d) => dth_huffman(probs, d),
        Penalty::MaxRedundancy => maxred_huffman(probs),
    }
}

/// A named finite-alphabet construction for the exponential penalty.
pub trait FiniteEngine: Send + Sync {
    fn name(&self) -> &'static str;
    fn build(&self, weights: &WeightSet, a: f64) -> Result<CodeTree>;
}

/// Priority-queue engine; accepts any order.
#[derive(Debug, Default)]
pub struct HeapEngine;

impl FiniteEngine for HeapEngine {
    fn name(&self) -> &'static str {
        "heap"
    }

    fn build(&self, weights: &WeightSet, a: f64) -> Result<CodeTree> {
        exp_huffman(weights, a)
    }
}

/// Two-queue engine; sorts first when handed unsorted weights and maps the
/// leaves back to the caller's indices.
#[derive(Debug, Default)]
pub struct TwoQueueEngine;

impl FiniteEngine for TwoQueueEngine {
    fn name(&self) -> &'static str {
        "two-queue"
    }

    fn build(&self, weights: &WeightSet, a: f64) -> Result<CodeTree> {
        if weights.is_sorted() {
            return exp_huffman_two_queue(weights, a);
        }
        let mut order: Vec<usize> = (0..weights.len()).collect();
        order.sort_by(|&i, &j| weights.weights()[i].total_cmp(&weights.weights()[j]));
        let sorted = WeightSet::sorted(order.iter().map(|&i| weights.weights()[i]).collect())?;
        let mut tree = exp_huffman_two_queue(&sorted, a)?;
        for node in &mut tree.nodes {
            if let Node::Leaf { symbol, .. } = node {
                *symbol = order[*symbol];
            }
        }
        Ok(tree)
    }
}

/// Engines selectable by name.
#[derive(Clone)]
pub struct EngineRegistry {
    engines: HashMap<String, Arc<dyn FiniteEngine>>,
}

impl Default for EngineRegistry {
    fn default() -> Self {
        let mut reg = Self {
            engines: HashMap::new(),
        };
        reg.register(Arc::new(HeapEngine));
        reg.register(Arc::new(TwoQueueEngine));
        reg
    }
}

impl EngineRegistry {
    pub fn register(&mut self, engine: Arc<dyn FiniteEngine>) {
        self.engines.insert(engine.name().to_string(), engine);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn FiniteEngine>> {
        self.engines
            .get(name)
            .cloned()
            .ok_or_else(|| invalid(format!("unknown engine {name:?}")))
    }

    pub fn names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.engines.keys().cloned().collect();
        names.sort();
        names
    }
}
