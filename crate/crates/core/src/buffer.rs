//! Choosing a code to make buffer overflow as unlikely as possible.
//!
//! Codewords enter a buffer drained by one bit per unit time while symbols
//! arrive after random intermission times `T`. With `A(s) = E[e^(−sT)]`, the
//! overflow probability for a buffer of `b` bits decays like `e^(−s*·b)`,
//! where `s*` is the largest `s` with `f(N, s) = A(s)·Σ p(i) e^(s·n(i)) <= 1`.
//! Both factors are log-convex in `s` and `f(N, 0) = 1`, so `{s : f <= 1}` is
//! an interval `[0, s*]`.

use std::fmt;
use std::str::FromStr;

use crate::codec::CodeSpec;
use crate::error::{invalid, Error, Result};
use crate::golomb::{golomb_exp_penalty, optimal_k_exponential};
use crate::huffman::{exp_huffman, WeightSet};
use crate::light_tail::build_unary_ended;
use crate::model::{exponential_sum, ln_power_sum, LengthSeq, SourceModel};

/// Absolute tolerance on `s*`.
pub const S_TOL: f64 = 1e-10;

/// Beyond this `s` a search gives up and reports no finite bound.
const S_LIMIT: f64 = 1e300;

/// Maximum number of tolerance refinements when two bracketing codes differ.
const MAX_REFINEMENTS: usize = 20;

/// Distribution of the time between symbol arrivals, through its
/// Laplace–Stieltjes transform.
#[derive(Debug, Clone, PartialEq)]
pub enum IntermissionModel {
    /// `T = c` always; `A(s) = e^(−sc)`.
    Deterministic { c: f64 },
    /// Exponential with rate `mu`; `A(s) = mu/(mu + s)`.
    Exponential { mu: f64 },
    /// Gamma with the given shape and rate; `A(s) = (rate/(rate + s))^shape`.
    Gamma { shape: f64, rate: f64 },
    /// Sampled transform `(s, A(s))`, interpolated linearly in `ln A` and
    /// extended past the last sample with the final slope.
    Table { samples: Vec<(f64, f64)> },
}

impl IntermissionModel {
    pub fn deterministic(c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(invalid(format!("intermission time {c} must be positive")));
        }
        Ok(Self::Deterministic { c })
    }

    pub fn exponential(mu: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(invalid(format!("arrival rate {mu} must be positive")));
        }
        Ok(Self::Exponential { mu })
    }

    pub fn gamma(shape: f64, rate: f64) -> Result<Self> {
        if !(shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite()) {
            return Err(invalid("gamma shape and rate must be positive"));
        }
        Ok(Self::Gamma { shape, rate })
    }

    pub fn table(samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(invalid("a transform table needs at least two samples"));
        }
        if samples[0] != (0.0, 1.0) {
            return Err(invalid("a transform table must start at (0, 1)"));
        }
        for w in samples.windows(2) {
            if !(w[1].0 > w[0].0) || !(w[1].1 > 0.0 && w[1].1 <= w[0].1) {
                return Err(invalid(
                    "transform samples need increasing s and positive nonincreasing A(s)",
                ));
            }
        }
        Ok(Self::Table { samples })
    }

    /// `ln A(s)`.
    pub fn ln_transform(&self, s: f64) -> f64 {
        match self {
            Self::Deterministic { c } => -s * c,
            Self::Exponential { mu } => mu.ln() - (mu + s).ln(),
            Self::Gamma { shape, rate } => shape * (rate.ln() - (rate + s).ln()),
            Self::Table { samples } => {
                let idx = samples.partition_point(|&(x, _)| x <= s).clamp(1, samples.len() - 1);
                let (s0, a0) = samples[idx - 1];
                let (s1, a1) = samples[idx];
                let slope = (a1.ln() - a0.ln()) / (s1 - s0);
                a0.ln() + slope * (s - s0)
            }
        }
    }

    pub fn transform(&self, s: f64) -> f64 {
        self.ln_transform(s).exp()
    }

    /// Overflow analysis needs `P[T >= 1] > 0`.
    pub fn check_stability(&self) -> Result<()> {
        match *self {
            Self::Deterministic { c } if c < 1.0 => Err(Error::Stability(format!(
                "deterministic intermission {c} < 1 makes P[T >= 1] = 0"
            ))),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for IntermissionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Deterministic { c } => write!(f, "det:{c}"),
            Self::Exponential { mu } => write!(f, "exp:{mu}"),
            Self::Gamma { shape, rate } => write!(f, "gamma:{shape},{rate}"),
            Self::Table { samples } => write!(f, "table({} samples)", samples.len()),
        }
    }
}

impl FromStr for IntermissionModel {
    type Err = Error;

    /// `det:<c>`, `exp:<mu>` or `gamma:<shape>,<rate>`.
    fn from_str(s: &str) -> Result<Self> {
        let num = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| invalid(format!("bad number {v:?} in arrivals {s:?}")))
        };
        match s.split_once(':') {
            Some(("det", v)) => Self::deterministic(num(v)?),
            Some(("exp", v)) => Self::exponential(num(v)?),
            Some(("gamma", v)) => {
                let (shape, rate) = v
                    .split_once(',')
                    .ok_or_else(|| invalid("gamma arrivals need <shape>,<rate>"))?;
                Self::gamma(num(shape)?, num(rate)?)
            }
            _ => Err(invalid(format!("unknown arrival model {s:?}"))),
        }
    }
}

/// `ln Σ p(i)·e^(s·n(i))`, using the closed form for Golomb codes on
/// geometric sources.
fn ln_moment(model: &SourceModel, lengths: &LengthSeq, s: f64) -> Result<f64> {
    if s == 0.0 {
        return Ok(0.0);
    }
    if let (SourceModel::Geometric { theta }, Some(k)) = (model, lengths.as_golomb()) {
        return Ok(s * golomb_exp_penalty(*theta, s.exp(), k)?);
    }
    Ok(exponential_sum(model, lengths, s)?.ln_total)
}

/// `ln f(N, s)`; `+∞` when the sum diverges.
pub fn ln_overflow_functional(
    model: &SourceModel,
    lengths: &LengthSeq,
    arrivals: &IntermissionModel,
    s: f64,
) -> Result<f64> {
    if s == 0.0 {
        return Ok(0.0);
    }
    match ln_moment(model, lengths, s) {
        Ok(m) => Ok(arrivals.ln_transform(s) + m),
        Err(Error::Divergent(_)) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

/// `f(N, s) = A(s)·Σ p(i)·e^(s·n(i))`. Exactly 1 at `s = 0`.
pub fn overflow_functional(
    model: &SourceModel,
    lengths: &LengthSeq,
    arrivals: &IntermissionModel,
    s: f64,
) -> Result<f64> {
    if !(s >= 0.0 && s.is_finite()) {
        return Err(invalid(format!("s = {s} must be a nonnegative real")));
    }
    if s == 0.0 {
        return Ok(1.0);
    }
    let m = ln_moment(model, lengths, s)?;
    Ok((arrivals.ln_transform(s) + m).exp())
}

/// Largest `s` with `f(N, s) <= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SStar {
    pub s: f64,
    /// True when `f(N, s) > 1` for every `s > 0`, so that `s* = 0`.
    pub boundary: bool,
}

/// Locates `s*` by doubling out from zero until `f > 1` (or the sum
/// diverges), then bisecting to `tol`.
pub fn s_star_with_tol(
    model: &SourceModel,
    lengths: &LengthSeq,
    arrivals: &IntermissionModel,
    tol: f64,
) -> Result<SStar> {
    arrivals.check_stability()?;
    let below = |s: f64| -> Result<bool> { Ok(ln_overflow_functional(model, lengths, arrivals, s)? <= 0.0) };
    let mut lo = 0.0;
    let mut hi = 1e-3;
    while below(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > S_LIMIT {
            return Err(Error::NoFiniteBound(format!(
                "f(N, s) <= 1 up to s = {S_LIMIT:e}; the buffer never overflows"
            )));
        }
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if below(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(SStar {
        s: lo,
        boundary: lo == 0.0,
    })
}

pub fn s_star(model: &SourceModel, lengths: &LengthSeq, arrivals: &IntermissionModel) -> Result<SStar> {
    s_star_with_tol(model, lengths, arrivals, S_TOL)
}

/// Number of leading terms in the first partial-sum fallback.
const PARTIAL_TERMS: usize = 256;

/// `ln Σ_{i<n} p(i)^α`, a lower bound on the full sum.
fn ln_partial_power_sum(model: &SourceModel, alpha: f64, n: usize) -> Result<f64> {
    let mut terms = Vec::with_capacity(n);
    for i in 0..n {
        if !model.in_support(i) {
            break;
        }
        terms.push(alpha * model.ln_point_mass(i)?);
    }
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln())
}

/// Upper bound on `s*` over all codes: the largest `s` with
/// `A(s)·(Σ p(i)^α)^(1/α) <= 1`, `α = 1/(1 + s·log₂e)`. The left side is
/// the smallest value `A(s)·Σ p(i)·e^(s·n(i))` can take over prefix codes.
/// When the full sum cannot be certified, partial sums (which can only
/// enlarge the bound) are used, lengthened until the bound is finite.
pub fn initial_s0(model: &SourceModel, arrivals: &IntermissionModel) -> Result<f64> {
    arrivals.check_stability()?;
    let alpha = |s: f64| 1.0 / (1.0 + s * std::f64::consts::LOG2_E);
    let full = |s: f64| -> Result<f64> {
        let a = alpha(s);
        Ok(arrivals.ln_transform(s) + ln_power_sum(model, a)? / a)
    };
    match largest_nonpositive(full) {
        Ok(Some(s)) => return Ok(s),
        Ok(None) => {
            return Err(Error::NoFiniteBound(
                "the entropy bound stays below one for every s".into(),
            ))
        }
        Err(Error::Divergent(_)) => {}
        Err(e) => return Err(e),
    }
    let mut n = PARTIAL_TERMS;
    while n <= 1 << 16 {
        let partial = |s: f64| -> Result<f64> {
            let a = alpha(s);
            Ok(arrivals.ln_transform(s) + ln_partial_power_sum(model, a, n)? / a)
        };
        if let Some(s) = largest_nonpositive(partial)? {
            return Ok(s);
        }
        n *= 2;
    }
    Err(Error::NoFiniteBound(format!(
        "partial sums of up to {} terms leave the entropy bound below one",
        n / 2
    )))
}

/// Largest `s` with `g(s) <= 0` for a convex `g` with `g(0) = 0`, or `None`
/// if `g` stays nonpositive up to the search limit.
fn largest_nonpositive(g: impl Fn(f64) -> Result<f64>) -> Result<Option<f64>> {
    let mut lo = 0.0;
    let mut hi = 1e-3;
    while g(hi)? <= 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > S_LIMIT {
            return Ok(None);
        }
    }
    while hi - lo > S_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid)? <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Report the upper end so that the result never understates the bound.
    Ok(Some(hi))
}

/// The code minimizing `Σ p(i)·a^n(i)` for this source.
pub fn optimal_code_at(model: &SourceModel, a: f64) -> Result<CodeSpec> {
    match model {
        SourceModel::Geometric { theta } => CodeSpec::golomb(optimal_k_exponential(*theta, a)?),
        SourceModel::ExplicitFinite { probs } => {
            let tree = exp_huffman(&WeightSet::new(probs.clone())?, a)?;
            CodeSpec::explicit(tree.codewords())
        }
        _ => Ok(CodeSpec::UnaryEnded(build_unary_ended(model, a)?)),
    }
}

/// One pass of the fixed-point iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct Iterate {
    /// The `s` the code was optimized for.
    pub s_in: f64,
    pub code: CodeSpec,
    /// `s*` of that code.
    pub s_star: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverflowResult {
    pub code: CodeSpec,
    pub s_star: f64,
    /// The entropy-based starting bound.
    pub s0: f64,
    pub trace: Vec<Iterate>,
    pub iterations: usize,
    /// How many times `s*` had to be recomputed more tightly because the
    /// codes on either side of it disagreed.
    pub refinements: usize,
}

impl OverflowResult {
    /// `e^(−s*·b)`, the decay of the overflow probability for a buffer of `b` bits.
    pub fn overflow_estimate(&self, buffer_bits: f64) -> f64 {
        (-self.s_star * buffer_bits).exp()
    }
}

const MAX_ITERATIONS: usize = 10_000;

/// Starts from the code optimal at `e^(s0)` and repeatedly replaces the code
/// with the one optimal at `e^(s*)` of the previous code, stopping when the
/// code no longer changes.
pub fn optimize_overflow(model: &SourceModel, arrivals: &IntermissionModel) -> Result<OverflowResult> {
    arrivals.check_stability()?;
    let s0 = initial_s0(model, arrivals)?;
    let mut trace = Vec::new();
    let mut refinements = 0;
    let mut s_in = s0;
    let mut code = optimal_code_at(model, s0.exp())?;
    for _ in 0..MAX_ITERATIONS {
        let lengths = code.length_seq();
        let (star, next, refined) = settle(model, &lengths, arrivals)?;
        refinements += refined;
        trace.push(Iterate {
            s_in,
            code: code.clone(),
            s_star: star,
        });
        if next.length_seq() == lengths {
            return Ok(OverflowResult {
                code,
                s_star: star,
                s0,
                iterations: trace.len(),
                trace,
                refinements,
            });
        }
        s_in = star;
        code = next;
    }
    Err(Error::NoFiniteBound(format!(
        "no fixed point after {MAX_ITERATIONS} iterations"
    )))
}

/// `s*` of `lengths` and the code optimal at `e^(s*)`. The true `s*` lies in
/// `[s, s + tol]`; if the codes at both ends differ the bracket is tightened.
fn settle(
    model: &SourceModel,
    lengths: &LengthSeq,
    arrivals: &IntermissionModel,
) -> Result<(f64, CodeSpec, usize)> {
    let mut tol = S_TOL;
    let mut refined = 0;
    loop {
        let star = s_star_with_tol(model, lengths, arrivals, tol)?.s;
        let lo = optimal_code_at(model, star.exp())?;
        let hi = optimal_code_at(model, (star + tol).exp())?;
        if lo.length_seq() == hi.length_seq() || refined == MAX_REFINEMENTS {
            return Ok((star, lo, refined));
        }
        tol /= 16.0;
        refined += 1;
    }
}
