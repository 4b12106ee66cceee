//! Unary-ended codes: an optimal finite code on a reduced alphabet whose
//! all-ones codeword is extended by a unary subtree for every larger symbol.

use crate::bits::BitString;
use crate::codec::{canonical_codewords, check_prefix_free, flip_to_all_ones};
use crate::error::{Error, Result};
use crate::huffman::{exp_huffman, maxred_huffman, WeightSet};
use crate::model::{kraft_exact, Kraft, LengthSeq, SourceModel, DECISION_TOL};

/// Number of indices past a candidate `r` that are checked one by one
/// before a ratio certificate takes over.
pub const CHECK_WINDOW: usize = 128;

/// Largest `r` the searches will consider.
pub const R_MAX: usize = 10_000;

/// The finite weights `p(0), …, p(r)` plus one item standing for the tail.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSource {
    pub r: usize,
    pub weights: Vec<f64>,
}

/// Reduced weights for the exponential penalty: the tail item weighs
/// `Σ_{k>r} p(k) a^(k−r)`.
pub fn reduced_source(model: &SourceModel, r: usize, a: f64) -> Result<ReducedSource> {
    let mut weights = head_masses(model, r)?;
    weights.push(model.tail_weight(r, a)?);
    Ok(ReducedSource { r, weights })
}

/// Reduced weights for maximal pointwise redundancy: the tail item weighs `2·p(r+1)`.
pub fn reduced_source_mmr(model: &SourceModel, r: usize) -> Result<ReducedSource> {
    let mut weights = head_masses(model, r)?;
    weights.push(2.0 * model.point_mass(r + 1)?);
    Ok(ReducedSource { r, weights })
}

fn head_masses(model: &SourceModel, r: usize) -> Result<Vec<f64>> {
    (0..=r).map(|i| model.point_mass(i)).collect()
}

fn require_infinite(model: &SourceModel) -> Result<()> {
    if model.support_len().is_some() {
        return Err(Error::Unsupported(
            "unary-ended codes need an infinite alphabet; use a finite construction".into(),
        ));
    }
    Ok(())
}

fn check_base(a: f64) -> Result<()> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(crate::error::invalid(format!("exponential base {a} must be positive")));
    }
    Ok(())
}

/// Smallest `r` such that every `j > r` has `min_{i<j} p(i) >= p(j)` and
/// `min_{i<j} p(i) >= Σ_{k>j} p(k) a^(k−j)`.
///
/// Poisson sources use `max(⌈2aλ⌉ − 2, ⌈eλ⌉ − 1)`. Other sources are checked
/// index by index over a window and certified beyond it by
/// `p(i) >= a·p(i+1) + a·p(i+2)`, bounded through the model's step ratios.
pub fn find_r_exponential(model: &SourceModel, a: f64) -> Result<usize> {
    check_base(a)?;
    require_infinite(model)?;
    if let SourceModel::Poisson { lambda } = *model {
        let by_tail = (2.0 * a * lambda).ceil() - 2.0;
        let by_order = (std::f64::consts::E * lambda).ceil() - 1.0;
        return Ok(by_tail.max(by_order).max(0.0) as usize);
    }
    if a <= 0.5 && model.is_nonincreasing() {
        return Ok(0);
    }
    let mut floors = Floors::new(model);
    let mut holds = |j: usize| -> bool {
        let floor = floors.at(j);
        let (Ok(p_j), Ok(tail)) = (model.point_mass(j), model.tail_weight(j, a)) else {
            return false;
        };
        floor >= p_j * (1.0 - DECISION_TOL) && floor >= tail * (1.0 - DECISION_TOL)
    };
    let mut cache: Vec<bool> = Vec::new();
    let mut r = 0;
    while r <= R_MAX {
        let end = r + CHECK_WINDOW;
        while cache.len() <= end {
            let j = cache.len();
            cache.push(j == 0 || holds(j));
        }
        if let Some(bad) = (r + 1..=end).rev().find(|&j| !cache[j]) {
            r = bad;
            continue;
        }
        let r1 = model.step_ratio(end, 1);
        let r2 = model.step_ratio(end, 2);
        if r1 <= 1.0 && a * (r1 + r2) <= 1.0 + DECISION_TOL {
            return Ok(r);
        }
        r += 1;
    }
    Err(Error::NotLightTailed { r_max: R_MAX })
}

/// Smallest `r` with `p(i) >= p(r)` for all `i < r` and `p(j) >= 2·p(j+1)`
/// for all `j >= r`; Poisson sources use `⌈eλ⌉ − 1`. When no such `r`
/// exists but `p(i) <= 2^(−i)·p(0)` for every `i > 0`, the unary code is
/// optimal and 0 is returned.
pub fn find_r_mmr(model: &SourceModel) -> Result<usize> {
    require_infinite(model)?;
    if let SourceModel::Poisson { lambda } = *model {
        return Ok(((std::f64::consts::E * lambda).ceil() - 1.0).max(0.0) as usize);
    }
    let halving = |j: usize| -> bool {
        match (model.point_mass(j), model.point_mass(j + 1)) {
            (Ok(p), Ok(q)) => p >= 2.0 * q * (1.0 - DECISION_TOL),
            _ => false,
        }
    };
    let mut floors = Floors::new(model);
    let mut r = 0;
    while r <= R_MAX {
        let p_r = model.point_mass(r)?;
        if r > 0 && floors.at(r) < p_r * (1.0 - DECISION_TOL) {
            r += 1;
            continue;
        }
        let end = r + CHECK_WINDOW;
        if let Some(bad) = (r..end).rev().find(|&j| !halving(j)) {
            r = bad + 1;
            continue;
        }
        if model.step_ratio(end, 1) <= 0.5 + DECISION_TOL {
            return Ok(r);
        }
        r += 1;
    }
    if dyadic_dominated(model)? {
        return Ok(0);
    }
    Err(Error::NotLightTailed { r_max: R_MAX })
}

/// Running minima `min_{i<j} p(i)`.
struct Floors<'a> {
    model: &'a SourceModel,
    mins: Vec<f64>,
}

impl<'a> Floors<'a> {
    fn new(model: &'a SourceModel) -> Self {
        Self {
            model,
            mins: vec![f64::INFINITY],
        }
    }

    fn at(&mut self, j: usize) -> f64 {
        while self.mins.len() <= j {
            let i = self.mins.len() - 1;
            let p = self.model.point_mass(i).unwrap_or(0.0);
            let prev = *self.mins.last().unwrap();
            self.mins.push(prev.min(p));
        }
        self.mins[j]
    }
}

/// `p(i)·2^i <= p(0)` for every `i > 0`, checked over a window and then
/// certified by some step `m <= 8` with ratio at most `2^(−m)`.
fn dyadic_dominated(model: &SourceModel) -> Result<bool> {
    let p0 = model.point_mass(0)?;
    for i in 1..=CHECK_WINDOW {
        let scaled = model.ln_point_mass(i)? + i as f64 * std::f64::consts::LN_2;
        if scaled > p0.ln() + DECISION_TOL {
            return Ok(false);
        }
    }
    Ok((1..=8usize).any(|m| {
        let start = CHECK_WINDOW + 1 - m;
        model.step_ratio(start, m) <= 0.5f64.powi(m as i32) * (1.0 + DECISION_TOL)
    }))
}

/// A prefix code for all nonnegative integers: explicit codewords for
/// `0..=r`, and `tail_prefix · 1^(i−r−1) · 0` for `i > r`, where the
/// tail prefix is all ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnaryEndedCode {
    r: usize,
    head: Vec<BitString>,
}

impl UnaryEndedCode {
    /// `head` holds `r + 2` codewords; the last one is the tail prefix.
    pub fn new(head: Vec<BitString>) -> Result<Self> {
        if head.len() < 2 {
            return Err(Error::InvalidCode("a unary-ended code needs at least two head items".into()));
        }
        check_prefix_free(&head)?;
        if !head.last().unwrap().is_all_ones() {
            return Err(Error::InvalidCode("the tail prefix must be all ones".into()));
        }
        let lengths: Vec<i64> = head.iter().map(|c| c.len() as i64).collect();
        if kraft_exact(&lengths) != Kraft::Complete {
            return Err(Error::InvalidCode("head code is not complete".into()));
        }
        Ok(Self {
            r: head.len() - 2,
            head,
        })
    }

    /// Canonical code for the given head lengths (tail item last), with the
    /// tail item moved onto the all-ones path.
    pub fn from_lengths(lengths: &[u32]) -> Result<Self> {
        let mut words = canonical_codewords(lengths)?;
        let last = words.len().saturating_sub(1);
        flip_to_all_ones(&mut words, last);
        Self::new(words)
    }

    pub fn r(&self) -> usize {
        self.r
    }

    /// Codewords of symbols `0..=r`.
    pub fn head_codewords(&self) -> &[BitString] {
        &self.head[..=self.r]
    }

    pub fn tail_prefix(&self) -> &BitString {
        &self.head[self.r + 1]
    }

    /// Lengths of the `r + 2` head items, tail item last.
    pub fn head_lengths(&self) -> Vec<u32> {
        self.head.iter().map(|c| c.len() as u32).collect()
    }

    pub fn length(&self, i: u64) -> u64 {
        if i <= self.r as u64 {
            self.head[i as usize].len() as u64
        } else {
            self.tail_prefix().len() as u64 + i - self.r as u64
        }
    }

    pub fn codeword(&self, i: u64) -> BitString {
        if i <= self.r as u64 {
            return self.head[i as usize].clone();
        }
        let mut out = self.tail_prefix().clone();
        out.extend_from(&BitString::ones((i - self.r as u64 - 1) as usize));
        out.push(false);
        out
    }

    pub fn length_seq(&self) -> LengthSeq {
        let head = self.head_codewords().iter().map(|c| c.len() as u32).collect();
        LengthSeq::eventually_unary(head, self.tail_prefix().len() as u32 + 1)
    }
}

/// Optimal code for `log_a Σ p(i) a^n(i)` on a light-tailed source.
pub fn build_unary_ended(model: &SourceModel, a: f64) -> Result<UnaryEndedCode> {
    check_base(a)?;
    require_infinite(model)?;
    if a <= 0.5 && model.is_nonincreasing() {
        return UnaryEndedCode::from_lengths(&[1, 1]);
    }
    let r = find_r_exponential(model, a)?;
    let reduced = reduced_source(model, r, a)?;
    let mut tree = exp_huffman(&WeightSet::new(reduced.weights)?, a)?;
    tree.relabel_all_ones(r + 1);
    UnaryEndedCode::new(tree.codewords())
}

/// Optimal code for maximal pointwise redundancy on a source whose masses
/// eventually halve at every step.
pub fn build_unary_ended_mmr(model: &SourceModel) -> Result<UnaryEndedCode> {
    let r = find_r_mmr(model)?;
    let reduced = reduced_source_mmr(model, r)?;
    let mut tree = maxred_huffman(&WeightSet::new(reduced.weights)?)?;
    tree.relabel_all_ones(r + 1);
    UnaryEndedCode::new(tree.codewords())
}
