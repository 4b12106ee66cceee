//! Golomb codes and their closed-form behaviour on geometric sources.

use crate::bits::{BitReader, BitString, BitWriter};
use crate::error::{invalid, Error, Result};
use crate::model::DECISION_TOL;

/// Rounds `x` to the nearest integer when it is within [`DECISION_TOL`] of it.
pub fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() < DECISION_TOL {
        r
    } else {
        x
    }
}

pub fn ceil_snap(x: f64) -> f64 {
    snap(x).ceil()
}

/// Fractional part `x − ⌊x⌋`, with near-integers mapped to zero.
pub fn frac_snap(x: f64) -> f64 {
    let s = snap(x);
    s - s.floor()
}

/// `⌈log₂ k⌉` for `k >= 1`.
pub fn ceil_log2(k: u64) -> u32 {
    64 - (k - 1).leading_zeros()
}

/// Golomb code `G_k`: symbol `j` is `⌊j/k⌋` ones, a zero, then the complete
/// binary codeword of `j mod k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GolombCode {
    k: u64,
    c: u32,
    u: u64,
}

impl GolombCode {
    pub fn new(k: u64) -> Result<Self> {
        if k == 0 {
            return Err(invalid("Golomb parameter must be at least 1"));
        }
        let c = ceil_log2(k);
        Ok(Self {
            k,
            c,
            u: (1u64 << c) - k,
        })
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    /// `g = ⌊log₂ k⌋ + 1`.
    pub fn g(&self) -> u32 {
        63 - self.k.leading_zeros() + 1
    }

    /// `z = 2^g − k`.
    pub fn z(&self) -> u64 {
        (1u64 << self.g()) - self.k
    }

    fn suffix_len(&self, x: u64) -> u32 {
        if x < self.u {
            self.c - 1
        } else {
            self.c
        }
    }

    pub fn length(&self, j: u64) -> u64 {
        j / self.k + 1 + self.suffix_len(j % self.k) as u64
    }

    pub fn codeword(&self, j: u64) -> BitString {
        let mut out = BitString::ones((j / self.k) as usize);
        out.push(false);
        out.extend_from(&self.suffix(j % self.k));
        out
    }

    fn suffix(&self, x: u64) -> BitString {
        if x < self.u {
            BitString::from_uint(x, self.c - 1)
        } else {
            BitString::from_uint(x + self.u, self.c)
        }
    }

    pub fn write(&self, w: &mut BitWriter, j: u64) {
        w.write_ones(j / self.k);
        w.write_bit(false);
        let x = j % self.k;
        if x < self.u {
            w.write_uint(x, self.c - 1);
        } else {
            w.write_uint(x + self.u, self.c);
        }
    }

    /// Reads one symbol: count ones up to the terminating zero, then read
    /// `c − 1` suffix bits and one more only if the short value is not below `u`.
    pub fn read(&self, r: &mut BitReader<'_>) -> Result<u64> {
        let mut q = 0u64;
        while r.read_bit()? {
            q += 1;
        }
        let mut x = if self.c == 0 { 0 } else { r.read_uint(self.c - 1)? };
        if self.c > 0 && x >= self.u {
            x = ((x << 1) | r.read_bit()? as u64) - self.u;
        }
        q.checked_mul(self.k)
            .and_then(|v| v.checked_add(x))
            .ok_or_else(|| Error::InvalidCode("decoded symbol overflows 64 bits".into()))
    }
}

/// Codeword `x` of the order-preserving complete code on `k` items: the first
/// `2^⌈log₂k⌉ − k` items get `⌊log₂k⌋` bits, the rest `⌈log₂k⌉` bits.
pub fn complete_binary(x: u64, k: u64) -> Result<BitString> {
    let code = GolombCode::new(k)?;
    if x >= k {
        return Err(invalid(format!("{x} is outside 0..{k}")));
    }
    Ok(code.suffix(x))
}

pub fn golomb_codeword(j: u64, k: u64) -> Result<BitString> {
    Ok(GolombCode::new(k)?.codeword(j))
}

/// Length of codeword `j` in `G_k`; `k` must be positive.
pub fn golomb_length(j: u64, k: u64) -> u64 {
    GolombCode::new(k).expect("k >= 1").length(j)
}

fn check_theta(theta: f64) -> Result<()> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(invalid(format!("geometric parameter {theta} must lie in (0,1)")));
    }
    Ok(())
}

fn k_from(x: f64) -> u64 {
    let k = ceil_snap(x);
    if k <= 1.0 {
        1
    } else {
        k as u64
    }
}

/// Smallest `k >= 1` with `θ^k + θ^(k+1) <= 1/a`; this `G_k` minimizes
/// `log_a Σ p(i) a^n(i)` for the geometric source. Exact ties go to the
/// smaller `k`, and `a <= 0.5` always yields the unary code.
pub fn optimal_k_exponential(theta: f64, a: f64) -> Result<u64> {
    check_theta(theta)?;
    if !(a > 0.0 && a.is_finite()) {
        return Err(invalid(format!("exponential base {a} must be positive")));
    }
    if a <= 0.5 {
        return Ok(1);
    }
    Ok(k_from((a.ln() + theta.ln_1p()) / -theta.ln()))
}

/// Optimal parameter for expected length, the `a → 1` case.
pub fn optimal_k_linear(theta: f64) -> Result<u64> {
    optimal_k_exponential(theta, 1.0)
}

/// `⌈−1/log₂θ⌉`, the parameter minimizing maximal pointwise redundancy.
pub fn optimal_k_mmr(theta: f64) -> Result<u64> {
    check_theta(theta)?;
    Ok(k_from(-1.0 / theta.log2()))
}

/// Smallest `k` with `(θ^(1+d))^k + (θ^(1+d))^(k+1) <= 2^(−d)`, evaluated
/// in logs so that very large `d` stays finite.
pub fn optimal_k_dth(theta: f64, d: f64) -> Result<u64> {
    check_theta(theta)?;
    if !(d > 0.0 && d.is_finite()) {
        return Err(invalid(format!("redundancy order {d} must be positive")));
    }
    let ln_t = (1.0 + d) * theta.ln();
    Ok(k_from((d * std::f64::consts::LN_2 + ln_t.exp().ln_1p()) / -ln_t))
}

/// `log_a Σ p(i) a^n(i)` for `G_k` on a geometric source, in closed form:
/// `g + log_a(1 + (a−1)θ^z / (1 − aθ^k))`.
pub fn golomb_exp_penalty(theta: f64, a: f64, k: u64) -> Result<f64> {
    check_theta(theta)?;
    if !(a > 0.0 && a.is_finite()) {
        return Err(invalid(format!("exponential base {a} must be positive")));
    }
    let code = GolombCode::new(k)?;
    let g = code.g() as f64;
    let theta_z = theta.powf(code.z() as f64);
    let theta_k = theta.powf(k as f64);
    if a * theta_k >= 1.0 {
        return Err(Error::Divergent(format!("aθ^k = {} >= 1", a * theta_k)));
    }
    if a == 1.0 {
        return Ok(g + theta_z / (1.0 - theta_k));
    }
    Ok(g + ((a - 1.0) * theta_z / (1.0 - a * theta_k)).ln_1p() / a.ln())
}

/// Expected length of `G_k` on a geometric source.
pub fn golomb_expected_length(theta: f64, k: u64) -> Result<f64> {
    golomb_exp_penalty(theta, 1.0, k)
}

/// `(1/d)·log₂ Σ p(i)^(1+d)·2^(d·n(i))` for `G_k` on a geometric source.
/// The weights `p(i)^(1+d)` are geometric with ratio `θ^(1+d)`, so this is the
/// exponential closed form at base `2^d` plus a normalizing term, all kept in
/// logs so that `d` in the tens of thousands stays finite.
pub fn golomb_dth_redundancy(theta: f64, d: f64, k: u64) -> Result<f64> {
    check_theta(theta)?;
    if !(d > 0.0 && d.is_finite()) {
        return Err(invalid(format!("redundancy order {d} must be positive")));
    }
    let code = GolombCode::new(k)?;
    let ln_a = d * std::f64::consts::LN_2;
    let ln_t = (1.0 + d) * theta.ln();
    let ln_growth = ln_a + k as f64 * ln_t;
    if ln_growth >= 0.0 {
        return Err(Error::Divergent(format!("2^d·θ^((1+d)k) = e^{ln_growth} >= 1")));
    }
    // ln[(a−1)·t^z / (1 − a·t^k)]
    let ln_ratio = ln_a + (-(-ln_a).exp()).ln_1p() + code.z() as f64 * ln_t - (-ln_growth.exp_m1()).ln();
    let ln_term = if ln_ratio > 0.0 {
        ln_ratio + (-ln_ratio).exp().ln_1p()
    } else {
        ln_ratio.exp().ln_1p()
    };
    let normalizer = ((1.0 + d) * (1.0 - theta).ln() - (-ln_t.exp_m1()).ln()) / ln_a;
    Ok(code.g() as f64 + ln_term / ln_a + normalizer)
}

/// A supremum that may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Redundancy {
    Finite(f64),
    Unbounded,
}

impl Redundancy {
    pub fn value(self) -> Option<f64> {
        match self {
            Self::Finite(v) => Some(v),
            Self::Unbounded => None,
        }
    }
}

/// `sup_i [n(i) + log₂ p(i)]` for `G_k` on a geometric source. Each residue
/// class gains `1 + k·log₂θ` per period, so the supremum is finite exactly
/// when `θ <= 2^(−1/k)`; it is then attained in the first period at either
/// symbol 0 or the first long-suffix symbol `2^⌈log₂k⌉ − k`.
pub fn golomb_mmr(theta: f64, k: u64) -> Result<Redundancy> {
    check_theta(theta)?;
    let code = GolombCode::new(k)?;
    if 1.0 + k as f64 * theta.log2() > DECISION_TOL {
        return Ok(Redundancy::Unbounded);
    }
    let base = (1.0 - theta).log2();
    let at = |i: u64| code.length(i) as f64 + base + i as f64 * theta.log2();
    let mut best = at(0);
    if code.u < k {
        best = best.max(at(code.u));
    }
    Ok(Redundancy::Finite(best))
}
