//! Probability sources over the nonnegative integers, penalty functions, and
//! codeword-length assignments.
//!
//! Infinite sums are evaluated in the log domain. Tails are summed until the
//! remaining mass is bounded by a geometric series whose ratio comes from
//! [`SourceModel::step_ratio`], and divergence is reported when the model
//! certifies that the ratio never drops below one.

use std::f64::consts::LN_2;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use statrs::function::factorial::ln_factorial;

use crate::error::{invalid, Error, Result};

/// Tolerance used whenever a floating comparison decides a discrete outcome.
pub const DECISION_TOL: f64 = 1e-12;

/// Relative remainder below which a tail series is truncated.
const SERIES_REL_TOL: f64 = 1e-15;

/// Hard cap on the number of terms visited by a tail walk.
const SERIES_MAX_TERMS: usize = 1 << 24;

/// Longest block (in periods) used when bounding the remainder of a tail.
const MAX_WINDOW: usize = 8;

/// Tail of a user-supplied source, covering every index at or beyond the
/// end of the explicit head.
pub trait TailOracle: Send + Sync + fmt::Debug {
    /// Probability of symbol `i`; only called for `i` at or beyond the head.
    fn mass(&self, i: usize) -> f64;

    /// `Σ_{k>j} p(k) a^(k−j)`; only called for `j >= head_len − 1`.
    fn tail_sum(&self, j: usize, a: f64) -> Result<f64>;

    /// Upper bound on `p(k + step) / p(k)` over every `k >= j`.
    fn step_ratio(&self, j: usize, step: usize) -> f64;

    /// Whether `p(k + step) / p(k)` equals [`TailOracle::step_ratio`] for every `k >= j`.
    fn exact_ratio(&self, _j: usize, _step: usize) -> bool {
        false
    }
}

/// A tail that repeats a block of masses, scaled by `ratio` every block:
/// `p(start + m·B + t) = block[t] · ratio^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicGeometricTail {
    start: usize,
    block: Vec<f64>,
    ratio: f64,
}

impl PeriodicGeometricTail {
    pub fn new(start: usize, block: Vec<f64>, ratio: f64) -> Result<Self> {
        if block.is_empty() {
            return Err(Error::EmptyInput);
        }
        if block.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(invalid("tail block masses must be positive and finite"));
        }
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(invalid(format!("tail ratio {ratio} must lie in (0,1)")));
        }
        Ok(Self { start, block, ratio })
    }

    /// Geometric tail `p(start + m) = first · ratio^m`.
    pub fn geometric(start: usize, first: f64, ratio: f64) -> Result<Self> {
        Self::new(start, vec![first], ratio)
    }

    fn period(&self) -> usize {
        self.block.len()
    }
}

impl TailOracle for PeriodicGeometricTail {
    fn mass(&self, i: usize) -> f64 {
        let off = i.saturating_sub(self.start);
        let b = self.period();
        self.block[off % b] * self.ratio.powi((off / b) as i32)
    }

    fn tail_sum(&self, j: usize, a: f64) -> Result<f64> {
        let b = self.period();
        let growth = self.ratio * a.powi(b as i32);
        if growth >= 1.0 {
            return Err(Error::Divergent(format!(
                "periodic tail with ratio {} at a={a}",
                self.ratio
            )));
        }
        let first = (j + 1).max(self.start);
        // Leading stretch up to the end of the block containing `first`.
        let off = first - self.start;
        let block_end = self.start + (off / b + 1) * b;
        let mut partial = 0.0;
        for k in first..block_end {
            partial += self.mass(k) * a.powi((k - j) as i32);
        }
        let mut next_block = 0.0;
        for k in block_end..block_end + b {
            next_block += self.mass(k) * a.powi((k - j) as i32);
        }
        // Masses before `start` are not part of this oracle.
        Ok(partial + next_block / (1.0 - growth))
    }

    fn step_ratio(&self, _j: usize, step: usize) -> f64 {
        let b = self.period();
        (0..b)
            .map(|t| {
                let to = t + step;
                self.block[to % b] * self.ratio.powi((to / b) as i32) / self.block[t]
            })
            .fold(0.0, f64::max)
    }

    fn exact_ratio(&self, j: usize, step: usize) -> bool {
        j >= self.start && step.is_multiple_of(self.period())
    }
}

/// A probability measure on the nonnegative integers.
#[derive(Debug, Clone)]
pub enum SourceModel {
    /// `p(i) = (1−θ) θ^i`.
    Geometric { theta: f64 },
    /// `p(i) = λ^i e^(−λ) / i!`.
    Poisson { lambda: f64 },
    /// Finite alphabet `0..probs.len()`.
    ExplicitFinite { probs: Vec<f64> },
    /// Explicit head followed by an oracle-described infinite tail.
    ExplicitTailed {
        head: Vec<f64>,
        tail: Arc<dyn TailOracle>,
    },
}

const SUM_TOL: f64 = 1e-9;

impl SourceModel {
    pub fn geometric(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(invalid(format!("geometric parameter {theta} must lie in (0,1)")));
        }
        Ok(Self::Geometric { theta })
    }

    pub fn poisson(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(invalid(format!("Poisson mean {lambda} must be positive")));
        }
        Ok(Self::Poisson { lambda })
    }

    pub fn finite(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::EmptyInput);
        }
        if probs.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(invalid("probabilities must be strictly positive"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(invalid(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Self::ExplicitFinite { probs })
    }

    pub fn tailed(head: Vec<f64>, tail: Arc<dyn TailOracle>) -> Result<Self> {
        if head.is_empty() {
            return Err(Error::EmptyInput);
        }
        if head.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(invalid("probabilities must be strictly positive"));
        }
        let total = head.iter().sum::<f64>() + tail.tail_sum(head.len() - 1, 1.0)?;
        if (total - 1.0).abs() > SUM_TOL {
            return Err(invalid(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Self::ExplicitTailed { head, tail })
    }

    /// Number of symbols, or `None` for infinite alphabets.
    pub fn support_len(&self) -> Option<usize> {
        match self {
            Self::ExplicitFinite { probs } => Some(probs.len()),
            _ => None,
        }
    }

    pub fn in_support(&self, i: usize) -> bool {
        self.support_len().is_none_or(|n| i < n)
    }

    /// `p(i)`.
    pub fn point_mass(&self, i: usize) -> Result<f64> {
        match self {
            Self::Geometric { theta } => Ok((1.0 - theta) * theta.powi(i as i32)),
            Self::Poisson { lambda } => Ok(poisson_mass(*lambda, i)),
            Self::ExplicitFinite { probs } => probs.get(i).copied().ok_or(Error::IndexOutOfRange {
                index: i,
                len: probs.len(),
            }),
            Self::ExplicitTailed { head, tail } => Ok(match head.get(i) {
                Some(&p) => p,
                None => tail.mass(i),
            }),
        }
    }

    /// `ln p(i)`, accurate where `p(i)` itself would underflow.
    pub fn ln_point_mass(&self, i: usize) -> Result<f64> {
        match self {
            Self::Geometric { theta } => Ok((1.0 - theta).ln() + i as f64 * theta.ln()),
            Self::Poisson { lambda } => {
                Ok(i as f64 * lambda.ln() - lambda - ln_factorial(i as u64))
            }
            _ => self.point_mass(i).map(f64::ln),
        }
    }

    /// Upper bound on `p(k + step) / p(k)` for every `k >= j` in the support.
    pub fn step_ratio(&self, j: usize, step: usize) -> f64 {
        match self {
            Self::Geometric { theta } => theta.powi(step as i32),
            Self::Poisson { lambda } => (1..=step).map(|t| lambda / (j + t) as f64).product(),
            Self::ExplicitFinite { probs } => {
                if j + step >= probs.len() {
                    0.0
                } else {
                    (j..probs.len() - step)
                        .map(|k| probs[k + step] / probs[k])
                        .fold(0.0, f64::max)
                }
            }
            Self::ExplicitTailed { head, tail } => {
                if j >= head.len() {
                    tail.step_ratio(j, step)
                } else {
                    let mut worst = tail.step_ratio(head.len(), step);
                    for k in j..head.len() {
                        let ratio = self.point_mass(k + step).unwrap_or(0.0) / head[k];
                        worst = worst.max(ratio);
                    }
                    worst
                }
            }
        }
    }

    /// Whether [`SourceModel::step_ratio`] is attained exactly at every `k >= j`.
    pub fn exact_ratio(&self, j: usize, step: usize) -> bool {
        match self {
            Self::Geometric { .. } => true,
            Self::Poisson { .. } | Self::ExplicitFinite { .. } => false,
            Self::ExplicitTailed { head, tail } => j >= head.len() && tail.exact_ratio(j, step),
        }
    }

    /// `Σ_{k>j} p(k) a^(k−j)`, the weight of everything past `j` when it is
    /// coded with a unary subtree.
    pub fn tail_weight(&self, j: usize, a: f64) -> Result<f64> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(invalid(format!("exponential base {a} must be positive")));
        }
        match self {
            Self::Geometric { theta } => {
                if a * theta >= 1.0 {
                    return Err(Error::Divergent(format!("geometric tail with aθ = {} >= 1", a * theta)));
                }
                Ok(a * self.point_mass(j + 1)? / (1.0 - a * theta))
            }
            Self::Poisson { lambda } => Ok(poisson_tail(*lambda, j, a)),
            Self::ExplicitFinite { probs } => Ok(probs
                .iter()
                .enumerate()
                .skip(j + 1)
                .map(|(k, p)| p * a.powi((k - j) as i32))
                .sum()),
            Self::ExplicitTailed { head, tail } => {
                let last = head.len() - 1;
                if j >= last {
                    return tail.tail_sum(j, a);
                }
                let inner: f64 = (j + 1..head.len()).map(|k| head[k] * a.powi((k - j) as i32)).sum();
                Ok(inner + a.powi((last - j) as i32) * tail.tail_sum(last, a)?)
            }
        }
    }

    /// Whether `p` is nonincreasing over the whole alphabet, checked over a
    /// window and certified beyond it by the step ratio.
    pub fn is_nonincreasing(&self) -> bool {
        match self {
            Self::Geometric { .. } => true,
            Self::Poisson { lambda } => *lambda <= 1.0,
            Self::ExplicitFinite { probs } => probs.windows(2).all(|w| w[0] >= w[1]),
            Self::ExplicitTailed { head, .. } => {
                let window = head.len() + 128;
                (0..window).all(|i| {
                    self.point_mass(i).unwrap_or(0.0) >= self.point_mass(i + 1).unwrap_or(0.0)
                }) && self.step_ratio(window, 1) <= 1.0
            }
        }
    }
}

/// Poisson mass, computed multiplicatively while it is representable so that
/// equal masses (such as `p(0) = p(1)` at `λ = 1`) compare equal.
fn poisson_mass(lambda: f64, i: usize) -> f64 {
    if i <= 170 && (i as f64) * lambda.ln().max(0.0) < 600.0 {
        let mut factorial = 1.0;
        for k in 2..=i {
            factorial *= k as f64;
        }
        lambda.powi(i as i32) * (-lambda).exp() / factorial
    } else {
        (i as f64 * lambda.ln() - lambda - ln_factorial(i as u64)).exp()
    }
}

/// `Σ_{k>j} p(k) a^(k−j)` for a Poisson source. Uses the closed form
/// `a^(−j) e^(λ(a−1)) − Σ_{k≤j} p(k) a^(k−j)` unless the subtraction would
/// cancel away most of the significant digits.
fn poisson_tail(lambda: f64, j: usize, a: f64) -> f64 {
    let whole = (lambda * (a - 1.0) - j as f64 * a.ln()).exp();
    if whole.is_finite() {
        let head: f64 = (0..=j).map(|k| poisson_mass(lambda, k) * a.powi(k as i32 - j as i32)).sum();
        let closed = whole - head;
        if closed > 1e-4 * whole {
            return closed;
        }
    }
    poisson_tail_direct(lambda, j, a)
}

/// Direct summation of the Poisson tail; the term ratio `aλ/(k+1)` is
/// decreasing, so once it is below one the remainder is a dominated geometric series.
pub(crate) fn poisson_tail_direct(lambda: f64, j: usize, a: f64) -> f64 {
    let mut k = j + 1;
    let mut ln_term = (k as f64) * lambda.ln() - lambda - ln_factorial(k as u64) + a.ln();
    let mut sum = 0.0;
    loop {
        let term = ln_term.exp();
        sum += term;
        let ratio = a * lambda / (k + 1) as f64;
        if ratio < 1.0 && term * ratio / (1.0 - ratio) <= 1e-17 * sum.max(f64::MIN_POSITIVE) {
            return sum;
        }
        if term == 0.0 && ratio < 1.0 {
            return sum;
        }
        ln_term += ratio.ln();
        k += 1;
    }
}

/// The objective a code is chosen to minimize.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Penalty {
    /// `log_a Σ p(i) a^n(i)`.
    Exponential(f64),
    /// `(1/d) log₂ Σ p(i)^(1+d) 2^(d·n(i))`.
    Dth(f64),
    /// `sup_i [n(i) + log₂ p(i)]`.
    MaxRedundancy,
    /// Expected codeword length.
    Linear,
}

impl Penalty {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Exponential(a) if !(a > 0.0 && a.is_finite()) => {
                Err(invalid(format!("exponential base {a} must be positive")))
            }
            Self::Dth(d) if !(d > 0.0 && d.is_finite()) => {
                Err(invalid(format!("redundancy order {d} must be positive")))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Penalty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Exponential(a) => write!(f, "exp:{a}"),
            Self::Dth(d) => write!(f, "dth:{d}"),
            Self::MaxRedundancy => f.write_str("mmr"),
            Self::Linear => f.write_str("linear"),
        }
    }
}

impl FromStr for Penalty {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let number = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| invalid(format!("bad number {v:?} in penalty {s:?}")))
        };
        let penalty = match s.split_once(':') {
            Some(("exp", v)) => Self::Exponential(number(v)?),
            Some(("dth", v)) => Self::Dth(number(v)?),
            None if s == "mmr" => Self::MaxRedundancy,
            None if s == "linear" => Self::Linear,
            _ => return Err(invalid(format!("unknown penalty {s:?}"))),
        };
        penalty.validate()?;
        Ok(penalty)
    }
}

/// Periodic continuation of a length sequence: index `start + q·P + t` has
/// length `pattern[t] + q`, where `P = pattern.len()`. A one-element pattern
/// is a unary tail; a Golomb code is a pattern of `k` lengths starting at 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeriodicTail {
    pub pattern: Vec<u32>,
}

/// Codeword lengths `n(i)`: an explicit head, optionally continued by a
/// periodic tail starting right after it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LengthSeq {
    pub head: Vec<u32>,
    pub tail: Option<PeriodicTail>,
}

impl LengthSeq {
    pub fn finite(head: Vec<u32>) -> Self {
        Self { head, tail: None }
    }

    /// `head` followed by `n(head.len() + m) = start_length + m`.
    pub fn eventually_unary(head: Vec<u32>, start_length: u32) -> Self {
        Self {
            head,
            tail: Some(PeriodicTail {
                pattern: vec![start_length],
            }),
        }
    }

    /// The unary code `n(i) = i + 1`.
    pub fn unary() -> Self {
        Self::eventually_unary(Vec::new(), 1)
    }

    /// Lengths of the Golomb code with parameter `k`.
    pub fn golomb(k: u64) -> Self {
        let pattern = (0..k).map(|j| crate::golomb::golomb_length(j, k) as u32).collect();
        Self {
            head: Vec::new(),
            tail: Some(PeriodicTail { pattern }),
        }
    }

    /// If these are the lengths of a Golomb code, its parameter.
    pub fn as_golomb(&self) -> Option<u64> {
        match &self.tail {
            Some(t) if self.head.is_empty() && *self == Self::golomb(t.pattern.len() as u64) => {
                Some(t.pattern.len() as u64)
            }
            _ => None,
        }
    }

    /// Start index of the tail, if any.
    pub fn tail_start(&self) -> Option<usize> {
        self.tail.as_ref().map(|_| self.head.len())
    }

    pub fn length(&self, i: usize) -> Option<u32> {
        if let Some(&n) = self.head.get(i) {
            return Some(n);
        }
        let tail = self.tail.as_ref()?;
        let off = i - self.head.len();
        let p = tail.pattern.len();
        Some(tail.pattern[off % p] + (off / p) as u32)
    }

    /// The first `count` lengths.
    pub fn prefix(&self, count: usize) -> Vec<u32> {
        (0..count).map_while(|i| self.length(i)).collect()
    }

    /// Exact Kraft test. The tail behaves like one item of length
    /// `pattern[t] − 1` per residue class since `Σ_q 2^(−(l+q)) = 2^(−(l−1))`.
    pub fn kraft(&self) -> Kraft {
        let mut lengths: Vec<i64> = self.head.iter().map(|&n| n as i64).collect();
        if let Some(t) = &self.tail {
            lengths.extend(t.pattern.iter().map(|&n| n as i64 - 1));
        }
        kraft_exact(&lengths)
    }

    /// Kraft sum as a float, for display.
    pub fn kraft_sum(&self) -> f64 {
        let head: f64 = self.head.iter().map(|&n| 0.5f64.powi(n as i32)).sum();
        let tail: f64 = self
            .tail
            .iter()
            .flat_map(|t| t.pattern.iter())
            .map(|&n| 2.0 * 0.5f64.powi(n as i32))
            .sum();
        head + tail
    }
}

impl fmt::Display for LengthSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let head: Vec<String> = self.head.iter().map(u32::to_string).collect();
        f.write_str(&head.join(","))?;
        match &self.tail {
            Some(t) if t.pattern.len() == 1 => write!(f, "+unary@{}", self.head.len()),
            Some(t) => {
                let pat: Vec<String> = t.pattern.iter().map(u32::to_string).collect();
                write!(f, "+periodic@{}[{}]", self.head.len(), pat.join(","))
            }
            None => Ok(()),
        }
    }
}

/// Outcome of an exact Kraft-sum comparison against one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kraft {
    Complete,
    Incomplete,
    Violated,
}

/// Compares `Σ 2^(−l)` with 1 exactly by merging sibling pairs bottom-up.
pub fn kraft_exact(lengths: &[i64]) -> Kraft {
    if lengths.iter().any(|&l| l < 0) {
        return Kraft::Violated;
    }
    let Some(&max) = lengths.iter().max() else {
        return Kraft::Incomplete;
    };
    let mut count = vec![0u128; max as usize + 1];
    for &l in lengths {
        count[l as usize] += 1;
    }
    let mut exact = true;
    for level in (1..=max as usize).rev() {
        let c = count[level];
        if c % 2 == 1 {
            exact = false;
        }
        count[level - 1] += c.div_ceil(2);
    }
    match count[0] {
        0 => Kraft::Incomplete,
        1 if exact => Kraft::Complete,
        1 => Kraft::Incomplete,
        _ => Kraft::Violated,
    }
}

/// `log₂ a`-exponent of the Rényi entropy matched to penalty base `a`.
pub fn renyi_alpha(a: f64) -> f64 {
    1.0 / (1.0 + a.log2())
}

/// Rényi entropy `H_α(a)(P)` of order `α(a) = 1/(1 + log₂ a)`, reducing to
/// Shannon entropy at `a = 1`.
pub fn renyi_entropy(model: &SourceModel, a: f64) -> Result<f64> {
    if !(a > 0.5 && a.is_finite()) {
        return Err(invalid(format!(
            "Rényi entropy needs a > 0.5 for a positive order, got a = {a}"
        )));
    }
    if a == 1.0 {
        return shannon_entropy(model);
    }
    let alpha = renyi_alpha(a);
    if let SourceModel::Geometric { theta } = *model {
        // log_a [ (1−θ) / (1−θ^α)^(1/α) ]
        let inner = (1.0 - theta).ln() - (-(alpha * theta.ln()).exp_m1()).ln() / alpha;
        return Ok(inner / a.ln());
    }
    Ok(ln_power_sum(model, alpha)? / LN_2 / (1.0 - alpha))
}

/// `ln Σ p(i)^α` for `α > 0`.
pub fn ln_power_sum(model: &SourceModel, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(invalid(format!("power {alpha} must be positive")));
    }
    if let SourceModel::Geometric { theta } = *model {
        return Ok(alpha * (1.0 - theta).ln() - (-(alpha * theta.ln()).exp_m1()).ln());
    }
    let sum = index_series(
        model,
        |ln_p, _| alpha * ln_p,
        |ln_ratio, _| alpha * ln_ratio,
    )?;
    Ok(sum.ln_total)
}

/// Shannon entropy in bits.
pub fn shannon_entropy(model: &SourceModel) -> Result<f64> {
    if let SourceModel::Geometric { theta } = *model {
        let h = -(1.0 - theta) * (1.0 - theta).log2() - theta * theta.log2();
        return Ok(h / (1.0 - theta));
    }
    // Terms p·(−ln p); once p < 1/e the map p ↦ −p ln p is increasing, so a
    // mass ratio ρ bounds the term ratio by ρ(1 − ln ρ).
    let sum = index_series(
        model,
        |ln_p, _| if ln_p >= 0.0 { f64::NEG_INFINITY } else { ln_p + (-ln_p).ln() },
        |ln_ratio, ln_p_max| {
            if ln_p_max < -1.0 {
                ln_ratio + (1.0 - ln_ratio).ln()
            } else {
                f64::INFINITY
            }
        },
    )?;
    Ok(sum.ln_total.exp() / LN_2)
}

/// Evaluates `penalty` for a source coded with lengths `lengths`.
pub fn evaluate_penalty(model: &SourceModel, lengths: &LengthSeq, penalty: Penalty) -> Result<f64> {
    penalty.validate()?;
    match penalty {
        Penalty::Exponential(1.0) => evaluate_penalty(model, lengths, Penalty::Linear),
        Penalty::Exponential(a) => {
            let ln_a = a.ln();
            let sum = length_series(
                model,
                lengths,
                |ln_p, n| ln_p + n as f64 * ln_a,
                |ln_ratio, m, _, _| ln_ratio + m as f64 * ln_a,
                true,
            )?;
            Ok(sum.ln_total / ln_a)
        }
        Penalty::Dth(d) => {
            let sum = length_series(
                model,
                lengths,
                |ln_p, n| (1.0 + d) * ln_p + d * n as f64 * LN_2,
                |ln_ratio, m, _, _| (1.0 + d) * ln_ratio + m as f64 * d * LN_2,
                true,
            )?;
            Ok(sum.ln_total / (d * LN_2))
        }
        Penalty::Linear => {
            let sum = length_series(
                model,
                lengths,
                |ln_p, n| ln_p + (n as f64).ln(),
                |ln_ratio, m, n_min, _| ln_ratio + (m as f64 / n_min.max(1) as f64).ln_1p(),
                false,
            )?;
            Ok(sum.ln_total.exp())
        }
        Penalty::MaxRedundancy => max_pointwise_redundancy(model, lengths),
    }
}

/// `Σ_i p(i) a^n(i)` with a certified bound on the truncated remainder.
pub fn exponential_sum(model: &SourceModel, lengths: &LengthSeq, ln_a: f64) -> Result<SeriesSum> {
    length_series(
        model,
        lengths,
        |ln_p, n| ln_p + n as f64 * ln_a,
        |ln_ratio, m, _, _| ln_ratio + m as f64 * ln_a,
        true,
    )
}

/// A truncated series: `ln` of the partial sum and of an upper bound on the
/// part left out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesSum {
    pub ln_total: f64,
    pub ln_remainder: f64,
}

impl SeriesSum {
    pub fn lower(&self) -> f64 {
        self.ln_total.exp()
    }

    pub fn upper(&self) -> f64 {
        self.ln_total.exp() + self.ln_remainder.exp()
    }
}

#[derive(Debug, Clone, Copy)]
struct LogAcc {
    max: f64,
    scaled: f64,
}

impl LogAcc {
    fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            scaled: 0.0,
        }
    }

    fn add(&mut self, ln_x: f64) {
        if ln_x == f64::NEG_INFINITY {
            return;
        }
        if ln_x > self.max {
            self.scaled = self.scaled * (self.max - ln_x).exp() + 1.0;
            self.max = ln_x;
        } else {
            self.scaled += (ln_x - self.max).exp();
        }
    }

    fn ln(&self) -> f64 {
        if self.scaled == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.max + self.scaled.ln()
        }
    }
}

fn ln_add(x: f64, y: f64) -> f64 {
    let mut acc = LogAcc::new();
    acc.add(x);
    acc.add(y);
    acc.ln()
}

/// Sums `exp(term(ln p(i), n(i)))` over the support. `growth(ln ρ, m,
/// n_min, ln p_max)` bounds the log of the factor by which each term can
/// grow when its index advances by `m` periods, given a mass ratio bound `ρ`
/// for that step, the smallest length in the window, and the largest
/// log-mass in it. When `tight` is set and the model's ratio is exact, a
/// nonnegative growth proves divergence.
fn length_series(
    model: &SourceModel,
    lengths: &LengthSeq,
    term: impl Fn(f64, u32) -> f64,
    growth: impl Fn(f64, usize, u32, f64) -> f64,
    tight: bool,
) -> Result<SeriesSum> {
    let mut acc = LogAcc::new();
    let head_len = lengths.head.len();
    if let Some(n) = model.support_len() {
        if lengths.tail.is_none() && head_len < n {
            return Err(invalid(format!(
                "{head_len} lengths given for an alphabet of {n} symbols"
            )));
        }
    }
    for (i, &n) in lengths.head.iter().enumerate() {
        if !model.in_support(i) {
            break;
        }
        acc.add(term(model.ln_point_mass(i)?, n));
    }
    let Some(tail) = &lengths.tail else {
        return Ok(SeriesSum {
            ln_total: acc.ln(),
            ln_remainder: f64::NEG_INFINITY,
        });
    };
    let period = tail.pattern.len();
    // Per-period (log sum, min length, max log-mass) for the most recent periods.
    let mut recent: Vec<(f64, u32, f64)> = Vec::new();
    let mut visited = 0usize;
    for q in 0.. {
        let base = head_len + q * period;
        if !model.in_support(base) {
            break;
        }
        let mut period_acc = LogAcc::new();
        let mut n_min = u32::MAX;
        let mut ln_p_max = f64::NEG_INFINITY;
        for (t, &l) in tail.pattern.iter().enumerate() {
            let i = base + t;
            if !model.in_support(i) {
                break;
            }
            let n = l + q as u32;
            let ln_p = model.ln_point_mass(i)?;
            let x = term(ln_p, n);
            acc.add(x);
            period_acc.add(x);
            n_min = n_min.min(n);
            ln_p_max = ln_p_max.max(ln_p);
        }
        visited += period;
        recent.push((period_acc.ln(), n_min, ln_p_max));
        if recent.len() > MAX_WINDOW {
            recent.remove(0);
        }
        // Try windows of the last m periods: if every term can only shrink by a
        // factor G per m periods, the rest is at most window·G/(1−G).
        for m in 1..=recent.len() {
            let window = &recent[recent.len() - m..];
            let start = base + period - m * period;
            let step = m * period;
            let ln_ratio = model.step_ratio(start, step).ln();
            let n_min = window.iter().map(|w| w.1).min().unwrap_or(0);
            let ln_p_max = window.iter().map(|w| w.2).fold(f64::NEG_INFINITY, f64::max);
            let g = growth(ln_ratio, m, n_min, ln_p_max);
            if g < 0.0 {
                let ln_window = window.iter().fold(f64::NEG_INFINITY, |s, w| ln_add(s, w.0));
                let ln_rem = ln_window + g - (-g.exp_m1()).ln();
                if ln_rem <= acc.ln() + SERIES_REL_TOL.ln() || ln_rem == f64::NEG_INFINITY {
                    return Ok(SeriesSum {
                        ln_total: acc.ln(),
                        ln_remainder: ln_rem,
                    });
                }
            } else if tight && model.exact_ratio(start, step) {
                return Err(Error::Divergent(format!(
                    "terms stop decreasing from index {start} onward"
                )));
            }
        }
        if visited > SERIES_MAX_TERMS {
            return Err(Error::Divergent(format!(
                "no convergence certificate after {visited} terms"
            )));
        }
    }
    Ok(SeriesSum {
        ln_total: acc.ln(),
        ln_remainder: f64::NEG_INFINITY,
    })
}

/// Sums `exp(term(ln p(i), ln p(i)))` over every index of the support.
fn index_series(
    model: &SourceModel,
    term: impl Fn(f64, f64) -> f64,
    growth: impl Fn(f64, f64) -> f64,
) -> Result<SeriesSum> {
    let lengths = match model.support_len() {
        Some(n) => LengthSeq::finite(vec![1; n]),
        None => LengthSeq::unary(),
    };
    length_series(
        model,
        &lengths,
        |ln_p, _| term(ln_p, ln_p),
        |ln_ratio, _, _, ln_p_max| growth(ln_ratio, ln_p_max),
        false,
    )
}

/// `sup_i [n(i) + log₂ p(i)]`. Along the tail, each residue class gains one
/// bit per period; once the mass ratio over a window of `m` periods is at
/// most `2^(−m)`, no later index can exceed the window's maximum.
fn max_pointwise_redundancy(model: &SourceModel, lengths: &LengthSeq) -> Result<f64> {
    let redundancy = |i: usize, n: u32| -> Result<f64> { Ok(n as f64 + model.ln_point_mass(i)? / LN_2) };
    let head_len = lengths.head.len();
    if let Some(n) = model.support_len() {
        if lengths.tail.is_none() && head_len < n {
            return Err(invalid(format!(
                "{head_len} lengths given for an alphabet of {n} symbols"
            )));
        }
    }
    let mut best = f64::NEG_INFINITY;
    for (i, &n) in lengths.head.iter().enumerate() {
        if !model.in_support(i) {
            break;
        }
        best = best.max(redundancy(i, n)?);
    }
    let Some(tail) = &lengths.tail else {
        return Ok(best);
    };
    let period = tail.pattern.len();
    let mut recent: Vec<f64> = Vec::new();
    for q in 0.. {
        let base = head_len + q * period;
        if !model.in_support(base) {
            break;
        }
        let mut period_max = f64::NEG_INFINITY;
        for (t, &l) in tail.pattern.iter().enumerate() {
            let i = base + t;
            if !model.in_support(i) {
                break;
            }
            period_max = period_max.max(redundancy(i, l + q as u32)?);
        }
        best = best.max(period_max);
        recent.push(period_max);
        if recent.len() > MAX_WINDOW {
            recent.remove(0);
        }
        for m in 1..=recent.len() {
            let start = base + period - m * period;
            let step = m * period;
            let gain = m as f64 + model.step_ratio(start, step).log2();
            if gain <= DECISION_TOL {
                return Ok(best);
            }
            if model.exact_ratio(start, step) {
                return Err(Error::UnboundedRedundancy);
            }
        }
        if base > SERIES_MAX_TERMS {
            return Err(Error::UnboundedRedundancy);
        }
    }
    Ok(best)
}

/// Golden-ratio style decay threshold: a source whose masses eventually fall
/// at least as fast as `g^i` with `g = (√(1+4/a) − 1)/2` supports a unary tail.
pub fn decay_threshold(a: f64) -> f64 {
    ((1.0 + 4.0 / a).sqrt() - 1.0) / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn point_masses() {
        assert_eq!(SourceModel::geometric(0.5).unwrap().point_mass(2).unwrap(), 0.125);
        let p = SourceModel::poisson(1.0).unwrap().point_mass(0).unwrap();
        assert!(close(p, (-1.0f64).exp(), 1e-15));
        assert!(close(SourceModel::geometric(0.9).unwrap().point_mass(0).unwrap(), 0.1, 1e-15));
        let finite = SourceModel::finite(vec![0.5, 0.5]).unwrap();
        assert_eq!(
            finite.point_mass(2),
            Err(Error::IndexOutOfRange { index: 2, len: 2 })
        );
    }

    #[test]
    fn poisson_masses_tie_at_unit_mean() {
        let m = SourceModel::poisson(1.0).unwrap();
        assert_eq!(m.point_mass(0).unwrap(), m.point_mass(1).unwrap());
    }

    #[test]
    fn constructors_reject_bad_parameters() {
        assert!(SourceModel::geometric(1.0).is_err());
        assert!(SourceModel::geometric(0.0).is_err());
        assert!(SourceModel::poisson(-1.0).is_err());
        assert!(SourceModel::finite(vec![0.5, 0.4]).is_err());
        assert!(SourceModel::finite(vec![1.0, 0.0]).is_err());
        assert_eq!(SourceModel::finite(vec![]).unwrap_err(), Error::EmptyInput);
    }

    #[test]
    fn tail_weights_from_the_worked_poisson_example() {
        let m = SourceModel::poisson(1.0).unwrap();
        let e = E;
        let w1 = m.tail_weight(2, 1.0).unwrap();
        assert!(close(w1, 1.0 - 2.5 / e, 1e-12));
        assert!(close(w1, 0.0803, 1e-4));
        let w2 = m.tail_weight(2, 2.0).unwrap();
        assert!(close(w2, 0.25 * e - 1.25 / e, 1e-12));
        assert!(close(w2, 0.2197, 1e-4));
        let g = SourceModel::geometric(0.5).unwrap();
        assert!(close(g.tail_weight(0, 1.0).unwrap(), 0.5, 1e-15));
    }

    #[test]
    fn geometric_tail_diverges_when_a_theta_reaches_one() {
        let g = SourceModel::geometric(0.5).unwrap();
        assert!(matches!(g.tail_weight(3, 2.0), Err(Error::Divergent(_))));
    }

    #[test]
    fn poisson_tail_closed_form_matches_direct_sum() {
        for &lambda in &[0.3, 1.0, 4.0, 10.0] {
            for &a in &[0.5, 1.0, 2.0, 4.0] {
                for j in [0usize, 3, 10, 50] {
                    let m = SourceModel::poisson(lambda).unwrap();
                    let direct: f64 = (j + 1..j + 400)
                        .map(|k| m.ln_point_mass(k).unwrap() + (k - j) as f64 * f64::ln(a))
                        .map(f64::exp)
                        .sum();
                    let w = m.tail_weight(j, a).unwrap();
                    let tol = 1e-10 * direct.max(1.0);
                    assert!(close(w, direct, tol), "λ={lambda} a={a} j={j}: {w} vs {direct}");
                }
            }
        }
    }

    #[test]
    fn periodic_tail_sums() {
        let tail = PeriodicGeometricTail::new(1, vec![0.15, 0.15], 0.25).unwrap();
        let direct: f64 = (1..200).map(|k| tail.mass(k)).sum();
        assert!(close(tail.tail_sum(0, 1.0).unwrap(), direct, 1e-15));
        let direct2: f64 = (4..200).map(|k| tail.mass(k) * 1.5f64.powi(k as i32 - 3)).sum();
        assert!(close(tail.tail_sum(3, 1.5).unwrap(), direct2, 1e-14));
        assert_eq!(tail.step_ratio(1, 2), 0.25);
        assert_eq!(tail.step_ratio(1, 1), 1.0);
        assert!(tail.exact_ratio(1, 4));
        assert!(!tail.exact_ratio(1, 3));
    }

    #[test]
    fn kraft_exact_cases() {
        assert_eq!(kraft_exact(&[1, 1]), Kraft::Complete);
        assert_eq!(kraft_exact(&[1, 2, 3, 3]), Kraft::Complete);
        assert_eq!(kraft_exact(&[1, 2, 3]), Kraft::Incomplete);
        assert_eq!(kraft_exact(&[1, 1, 2]), Kraft::Violated);
        assert_eq!(kraft_exact(&[0]), Kraft::Complete);
        assert_eq!(LengthSeq::unary().kraft(), Kraft::Complete);
        assert_eq!(LengthSeq::eventually_unary(vec![2, 2, 2], 3).kraft(), Kraft::Complete);
        for k in 1..=64 {
            assert_eq!(LengthSeq::golomb(k).kraft(), Kraft::Complete, "k={k}");
        }
    }

    #[test]
    fn length_seq_indexing_and_display() {
        let g3 = LengthSeq::golomb(3);
        assert_eq!(g3.prefix(7), vec![2, 3, 3, 3, 4, 4, 4]);
        assert_eq!(g3.as_golomb(), Some(3));
        let ue = LengthSeq::eventually_unary(vec![2, 2, 2], 3);
        assert_eq!(ue.prefix(6), vec![2, 2, 2, 3, 4, 5]);
        assert_eq!(ue.to_string(), "2,2,2+unary@3");
        assert_eq!(ue.as_golomb(), None);
        assert_eq!(LengthSeq::unary().as_golomb(), Some(1));
    }

    #[test]
    fn max_redundancy_examples() {
        let m = SourceModel::finite(vec![0.5, 0.5]).unwrap();
        let r = evaluate_penalty(&m, &LengthSeq::finite(vec![1, 1]), Penalty::MaxRedundancy).unwrap();
        assert_eq!(r, 0.0);

        let tail = PeriodicGeometricTail::new(1, vec![0.15, 0.15], 0.25).unwrap();
        let m = SourceModel::tailed(vec![0.6], Arc::new(tail)).unwrap();
        let r = evaluate_penalty(&m, &LengthSeq::unary(), Penalty::MaxRedundancy).unwrap();
        assert!(close(r, 1.2f64.log2(), 1e-12), "{r}");

        let g = SourceModel::geometric(0.9).unwrap();
        assert_eq!(
            evaluate_penalty(&g, &LengthSeq::unary(), Penalty::MaxRedundancy),
            Err(Error::UnboundedRedundancy)
        );
        let r = evaluate_penalty(&g, &LengthSeq::golomb(7), Penalty::MaxRedundancy).unwrap();
        assert!(close(r, 4.0 + 0.1f64.log2() + 0.9f64.log2(), 1e-12));
    }

    #[test]
    fn exponential_penalty_on_geometric_unary() {
        // Σ (1−θ)θ^i a^(i+1) = a(1−θ)/(1−aθ)
        let g = SourceModel::geometric(0.5).unwrap();
        let a: f64 = 1.2;
        let l = evaluate_penalty(&g, &LengthSeq::unary(), Penalty::Exponential(a)).unwrap();
        let expected = (a * 0.5 / (1.0 - a * 0.5)).ln() / a.ln();
        assert!(close(l, expected, 1e-12));
        assert!(matches!(
            evaluate_penalty(&g, &LengthSeq::unary(), Penalty::Exponential(2.0)),
            Err(Error::Divergent(_))
        ));
        let lin = evaluate_penalty(&g, &LengthSeq::unary(), Penalty::Linear).unwrap();
        assert!(close(lin, 2.0, 1e-12));
    }

    #[test]
    fn renyi_examples() {
        let g = SourceModel::geometric(0.5).unwrap();
        let h = renyi_entropy(&g, 2.0).unwrap();
        let direct = 2.0 * (0.5f64.sqrt() / (1.0 - 0.5f64.sqrt())).log2();
        assert!(close(h, direct, 1e-12));
        assert!(close(h, 2.54311, 1e-5));
        assert!(close(renyi_entropy(&g, 1.0).unwrap(), 2.0, 1e-12));
        assert!(renyi_entropy(&g, 0.5).is_err());

        // Poisson: compare against explicit truncations of different depth.
        let p = SourceModel::poisson(1.0).unwrap();
        let alpha = renyi_alpha(2.0);
        let trunc = |n: usize| {
            let s: f64 = (0..n).map(|i| (alpha * p.ln_point_mass(i).unwrap()).exp()).sum();
            s.log2() / (1.0 - alpha)
        };
        assert!(close(trunc(200), trunc(400), 1e-12));
        assert!(close(renyi_entropy(&p, 2.0).unwrap(), trunc(400), 1e-12));
    }

    #[test]
    fn shannon_entropy_generic_matches_closed_form() {
        let theta: f64 = 0.7;
        let closed = shannon_entropy(&SourceModel::geometric(theta).unwrap()).unwrap();
        let tail = PeriodicGeometricTail::geometric(1, (1.0 - theta) * theta, theta).unwrap();
        let m = SourceModel::tailed(vec![1.0 - theta], Arc::new(tail)).unwrap();
        assert!(close(shannon_entropy(&m).unwrap(), closed, 1e-12));
    }

    #[test]
    fn penalty_grammar() {
        assert_eq!("exp:1.5".parse::<Penalty>().unwrap(), Penalty::Exponential(1.5));
        assert_eq!("dth:4".parse::<Penalty>().unwrap(), Penalty::Dth(4.0));
        assert_eq!("mmr".parse::<Penalty>().unwrap(), Penalty::MaxRedundancy);
        assert_eq!("linear".parse::<Penalty>().unwrap(), Penalty::Linear);
        assert!("exp:-1".parse::<Penalty>().is_err());
        assert!("cubic".parse::<Penalty>().is_err());
    }
}
