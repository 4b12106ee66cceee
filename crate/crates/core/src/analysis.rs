//! Redundancy metrics for geometric sources and CSV sweeps of the curves
//! they trace out.

use std::f64::consts::LOG2_E;
use std::fmt;

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::golomb::{
    ceil_snap, frac_snap, golomb_dth_redundancy, golomb_exp_penalty, golomb_mmr, optimal_k_dth,
    optimal_k_exponential, optimal_k_linear, optimal_k_mmr,
};
use crate::model::{decay_threshold, evaluate_penalty, renyi_entropy, LengthSeq, Penalty, SourceModel};

/// `L_a(P, N) − H_α(a)(P)`.
pub fn avg_redundancy(model: &SourceModel, lengths: &LengthSeq, a: f64) -> Result<f64> {
    if !(a > 0.5 && a.is_finite()) {
        return Err(invalid(format!("redundancy is degenerate for a = {a} <= 0.5")));
    }
    let entropy = renyi_entropy(model, a)?;
    Ok(evaluate_penalty(model, lengths, Penalty::Exponential(a))? - entropy)
}

/// `L_a − H_α(a)` for `G_k` on a geometric source, in closed form.
pub fn golomb_avg_redundancy(theta: f64, a: f64, k: u64) -> Result<f64> {
    let model = SourceModel::geometric(theta)?;
    let entropy = renyi_entropy(&model, a)?;
    Ok(golomb_exp_penalty(theta, a, k)? - entropy)
}

/// `log₂(−1/log₂θ)`, the natural coordinate for the periodic behaviour of
/// Golomb redundancy as `θ → 1`.
pub fn log_scale(theta: f64) -> f64 {
    (-1.0 / theta.log2()).log2()
}

fn check_half_open(theta: f64) -> Result<()> {
    if !(0.5..1.0).contains(&theta) {
        return Err(invalid(format!("θ = {theta} must lie in [0.5, 1)")));
    }
    Ok(())
}

/// Maximal pointwise redundancy of the minimax-optimal Golomb code:
/// `2 + log₂((1−θ)/(−log₂θ)) − ⌈−1/log₂θ⌉·log₂θ − 2^(1−⟨x⟩) − ⟨x⟩`
/// with `x = log₂(−1/log₂θ)`.
pub fn mmr_optimal_redundancy(theta: f64) -> Result<f64> {
    check_half_open(theta)?;
    let l = theta.log2();
    let x = frac_snap(log_scale(theta));
    Ok(2.0 + ((1.0 - theta) / -l).log2() - ceil_snap(-1.0 / l) * l - (1.0 - x).exp2() - x)
}

/// Leading term of [`mmr_optimal_redundancy`] as `θ → 1`; oscillates
/// between `1 − log₂log₂e` and `2 − log₂e`. Meaningful for `θ > 0.9`.
pub fn mmr_asymptotic(theta: f64) -> f64 {
    let x = frac_snap(log_scale(theta));
    3.0 - LOG2_E.log2() - (1.0 - x).exp2() - x
}

/// Leading term of the expected-length redundancy of the optimal Golomb
/// code as `θ → 1`.
pub fn avg_redundancy_asymptotic(theta: f64) -> f64 {
    let x = frac_snap(log_scale(theta));
    1.0 - LOG2_E.log2() - LOG2_E + (2.0 - (1.0 - x).exp2()).exp2() - x
}

/// Inclusive arithmetic grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Grid {
    pub fn new(min: f64, max: f64, step: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && step > 0.0 && step.is_finite()) || max < min {
            return Err(invalid(format!("empty or malformed grid {min}..{max} step {step}")));
        }
        Ok(Self { min, max, step })
    }

    /// Grid points, rounded to 12 significant digits so that decimal steps
    /// land on decimal values.
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.max - self.min) / self.step + 1e-9).floor() as usize + 1;
        (0..n)
            .map(|i| round_sig(self.min + i as f64 * self.step))
            .collect()
    }
}

/// What a sweep computes.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepSpec {
    /// Exponential-penalty redundancy of the optimal Golomb code, one row per
    /// `(θ, a)` pair.
    Exponential { theta: Grid, bases: Vec<f64> },
    /// Expected-length redundancy of the optimal Golomb code.
    Linear { theta: Grid },
    /// The decay ratio `g(a)` sufficient for a unary-ended code.
    DecayRatio { a: Grid },
    /// Optimal `d`-th exponential redundancies plus the minimax curve.
    Dth { theta: Grid, orders: Vec<f64> },
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        let thetas = |g: &Grid| -> Result<()> {
            if g.points().iter().any(|&t| !(t > 0.0 && t < 1.0)) {
                return Err(invalid("θ grid must lie inside (0, 1)"));
            }
            Ok(())
        };
        match self {
            Self::Exponential { theta, bases } => {
                thetas(theta)?;
                if bases.is_empty() || bases.iter().any(|&a| !(a > 0.5 && a.is_finite())) {
                    return Err(invalid("exponential sweeps need bases a > 0.5"));
                }
            }
            Self::Linear { theta } => thetas(theta)?,
            Self::DecayRatio { a } => {
                if a.min <= 0.0 {
                    return Err(invalid("decay ratio needs a > 0"));
                }
            }
            Self::Dth { theta, orders } => {
                thetas(theta)?;
                if theta.min < 0.5 {
                    return Err(invalid("the minimax curve needs θ >= 0.5"));
                }
                if orders.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
                    return Err(invalid("redundancy orders must be positive"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Real(f64),
    Text(String),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Real(v) => f.write_str(&format_sig(*v)),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| *h == name)
    }
}

impl fmt::Display for Table {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.header.join(","))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::to_string).collect();
            writeln!(f, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

/// Twelve significant digits, trailing zeros dropped, in the style of `%.12g`.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..12).contains(&exp) {
        let s = format!("{:.*}", (11 - exp).max(0) as usize, x);
        let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.') } else { &s };
        s.to_string()
    } else {
        let s = format!("{x:.11e}");
        let (mantissa, e) = s.split_once('e').expect("scientific format");
        let mantissa = if mantissa.contains('.') {
            mantissa.trim_end_matches('0').trim_end_matches('.')
        } else {
            mantissa
        };
        format!("{mantissa}e{e}")
    }
}

fn round_sig(x: f64) -> f64 {
    format_sig(x).parse().unwrap_or(x)
}

/// Evaluates a sweep. Grid points are computed in parallel; rows come out in
/// grid order.
pub fn sweep(spec: &SweepSpec) -> Result<Table> {
    spec.validate()?;
    match spec {
        SweepSpec::Exponential { theta, bases } => {
            let pairs: Vec<(f64, f64)> = bases
                .iter()
                .flat_map(|&a| theta.points().into_iter().map(move |t| (t, a)))
                .collect();
            let rows = pairs
                .par_iter()
                .map(|&(t, a)| exponential_row(t, a))
                .collect::<Result<Vec<_>>>()?;
            Ok(Table {
                header: vec!["theta", "a", "k", "penalty", "entropy", "redundancy"],
                rows,
            })
        }
        SweepSpec::Linear { theta } => {
            let rows = theta
                .points()
                .par_iter()
                .map(|&t| linear_row(t))
                .collect::<Result<Vec<_>>>()?;
            Ok(Table {
                header: vec!["theta", "k", "expected_length", "entropy", "redundancy"],
                rows,
            })
        }
        SweepSpec::DecayRatio { a } => {
            let rows = a
                .points()
                .into_iter()
                .map(|a| vec![Cell::Real(a), Cell::Real(decay_threshold(a))])
                .collect();
            Ok(Table {
                header: vec!["a", "g"],
                rows,
            })
        }
        SweepSpec::Dth { theta, orders } => {
            let rows = theta
                .points()
                .par_iter()
                .map(|&t| dth_rows(t, orders))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .flatten()
                .collect();
            Ok(Table {
                header: vec!["theta", "log2_scale", "series", "k", "redundancy"],
                rows,
            })
        }
    }
}

fn exponential_row(theta: f64, a: f64) -> Result<Vec<Cell>> {
    let k = optimal_k_exponential(theta, a)?;
    let penalty = golomb_exp_penalty(theta, a, k)?;
    let entropy = renyi_entropy(&SourceModel::geometric(theta)?, a)?;
    Ok(vec![
        Cell::Real(theta),
        Cell::Real(a),
        Cell::Int(k),
        Cell::Real(penalty),
        Cell::Real(entropy),
        Cell::Real(penalty - entropy),
    ])
}

fn linear_row(theta: f64) -> Result<Vec<Cell>> {
    let k = optimal_k_linear(theta)?;
    let len = golomb_exp_penalty(theta, 1.0, k)?;
    let entropy = renyi_entropy(&SourceModel::geometric(theta)?, 1.0)?;
    Ok(vec![
        Cell::Real(theta),
        Cell::Int(k),
        Cell::Real(len),
        Cell::Real(entropy),
        Cell::Real(len - entropy),
    ])
}

fn dth_rows(theta: f64, orders: &[f64]) -> Result<Vec<Vec<Cell>>> {
    let x = log_scale(theta);
    let mut rows = Vec::with_capacity(orders.len() + 1);
    for &d in orders {
        let k = optimal_k_dth(theta, d)?;
        rows.push(vec![
            Cell::Real(theta),
            Cell::Real(x),
            Cell::Text(format!("d={}", format_sig(d))),
            Cell::Int(k),
            Cell::Real(golomb_dth_redundancy(theta, d, k)?),
        ]);
    }
    let k = optimal_k_mmr(theta)?;
    let r = golomb_mmr(theta, k)?
        .value()
        .ok_or_else(|| invalid(format!("G{k} has unbounded redundancy at θ = {theta}")))?;
    rows.push(vec![
        Cell::Real(theta),
        Cell::Real(x),
        Cell::Text("mmr".into()),
        Cell::Int(k),
        Cell::Real(r),
    ]);
    Ok(rows)
}

/// Default orders for the d-th redundancy sweep.
pub const DEFAULT_ORDERS: [f64; 6] = [1.0, 2.0, 4.0, 16.0, 256.0, 65536.0];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mmr_closed_form_values() {
        assert!(mmr_optimal_redundancy(0.5).unwrap().abs() < 1e-12);
        let r = mmr_optimal_redundancy(0.9).unwrap();
        let direct = golomb_mmr(0.9, 7).unwrap().value().unwrap();
        assert!((r - direct).abs() < 1e-12);
        assert!((r - (4.0 + 0.1f64.log2() + 0.9f64.log2())).abs() < 1e-9);
        assert!((r - 0.52607).abs() < 1e-5);
        assert!(mmr_optimal_redundancy(0.4).is_err());
    }

    #[test]
    fn mmr_closed_form_agrees_with_golomb_everywhere() {
        for i in 0..2000 {
            let theta = 0.5 + 0.4999 * i as f64 / 2000.0;
            let k = optimal_k_mmr(theta).unwrap();
            let direct = golomb_mmr(theta, k).unwrap().value().unwrap();
            let closed = mmr_optimal_redundancy(theta).unwrap();
            assert!((direct - closed).abs() < 1e-9, "θ={theta}: {direct} vs {closed}");
        }
    }

    #[test]
    fn mmr_at_integer_boundary_is_left_continuous() {
        let theta = 2f64.powf(-1.0 / 3.0);
        let at = mmr_optimal_redundancy(theta).unwrap();
        let left = mmr_optimal_redundancy(theta - 1e-9).unwrap();
        assert!((at - left).abs() < 1e-6, "{at} vs {left}");
    }

    #[test]
    fn asymptotic_extrema() {
        let lo = 1.0 - LOG2_E.log2();
        let hi = 2.0 - LOG2_E;
        assert!((lo - 0.4712336270).abs() < 1e-10);
        assert!((hi - 0.5573049591).abs() < 1e-10);
        // Over one period of the fractional part.
        let values: Vec<f64> = (0..=100_000)
            .map(|i| {
                let x = i as f64 / 100_000.0;
                3.0 - LOG2_E.log2() - (1.0 - x).exp2() - x
            })
            .collect();
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!((min - lo).abs() < 1e-9);
        assert!((max - hi).abs() < 1e-9);
        // The maximum sits at x = 1 − log₂log₂e.
        let x = 1.0 - LOG2_E.log2();
        assert!((3.0 - LOG2_E.log2() - (1.0 - x).exp2() - x - hi).abs() < 1e-12);
    }

    #[test]
    fn asymptotics_track_exact_values() {
        let theta: f64 = 1.0 - 1e-4;
        assert!((mmr_asymptotic(theta) - mmr_optimal_redundancy(theta).unwrap()).abs() < 5e-4);
        let k = optimal_k_linear(theta).unwrap();
        let exact = golomb_avg_redundancy(theta, 1.0, k).unwrap();
        assert!((avg_redundancy_asymptotic(theta) - exact).abs() < 5e-4, "{exact}");
    }

    #[test]
    fn avg_asymptotic_is_periodic() {
        // θ with log₂(−1/log₂θ) = x and x + 1.
        let theta_at = |x: f64| 2f64.powf(-1.0 / x.exp2());
        for &x in &[10.2, 12.7, 15.05] {
            let a = avg_redundancy_asymptotic(theta_at(x));
            let b = avg_redundancy_asymptotic(theta_at(x + 1.0));
            assert!((a - b).abs() < 1e-9, "x={x}: {a} vs {b}");
        }
        for i in 1..1000 {
            assert!(avg_redundancy_asymptotic(0.99 + 0.01 * i as f64 / 1000.0).is_finite());
        }
    }

    #[test]
    fn dyadic_geometric_has_no_redundancy() {
        let model = SourceModel::geometric(0.5).unwrap();
        let r = avg_redundancy(&model, &LengthSeq::unary(), 1.0).unwrap();
        assert!(r.abs() < 1e-12);
        let near = avg_redundancy(&model, &LengthSeq::unary(), 1.0 + 1e-6).unwrap();
        assert!(near.abs() < 1e-5);
        assert!(avg_redundancy(&model, &LengthSeq::unary(), 0.5).is_err());
    }

    #[test]
    fn linear_redundancy_oracle() {
        let theta: f64 = 0.9;
        let model = SourceModel::geometric(theta).unwrap();
        let k = optimal_k_linear(theta).unwrap();
        let from_series = avg_redundancy(&model, &LengthSeq::golomb(k), 1.0).unwrap();
        // Σ p·n − H computed term by term.
        let mut len = 0.0;
        let mut h = 0.0;
        for i in 0..2000u64 {
            let p = (1.0 - theta) * theta.powi(i as i32);
            len += p * crate::golomb::golomb_length(i, k) as f64;
            h -= p * p.log2();
        }
        assert!((from_series - (len - h)).abs() < 1e-9);
    }

    #[test]
    fn redundancy_is_campbell_bounded() {
        for i in 1..40 {
            let theta = i as f64 / 40.0;
            for &a in &[0.9, 1.1] {
                let k = optimal_k_exponential(theta, a).unwrap();
                let r = golomb_avg_redundancy(theta, a, k).unwrap();
                assert!((-1e-12..1.0).contains(&r), "θ={theta} a={a}: {r}");
            }
        }
    }

    #[test]
    fn sig_formatting() {
        assert_eq!(format_sig(0.6180339887498949), "0.61803398875");
        assert_eq!(format_sig(1.0), "1");
        assert_eq!(format_sig(1.0000000000001), "1");
        assert_eq!(format_sig(123.5), "123.5");
        assert_eq!(format_sig(1e-7), "1e-7");
        assert_eq!(format_sig(0.0), "0");
        assert_eq!(format_sig(-2.5), "-2.5");
    }

    #[test]
    fn decay_ratio_sweep_hits_golden_ratio() {
        let table = sweep(&SweepSpec::DecayRatio {
            a: Grid::new(0.5, 4.0, 0.01).unwrap(),
        })
        .unwrap();
        let row = table
            .rows
            .iter()
            .find(|r| r[0] == Cell::Real(1.0))
            .expect("a = 1 row");
        match row[1] {
            Cell::Real(g) => assert!((g - 0.6180339887).abs() < 1e-9),
            _ => unreachable!(),
        }
        assert_eq!(table.rows.len(), 351);
    }

    #[test]
    fn exponential_sweep_approaches_linear() {
        let grid = Grid::new(0.05, 0.95, 0.05).unwrap();
        let near = sweep(&SweepSpec::Exponential {
            theta: grid,
            bases: vec![1.0001],
        })
        .unwrap();
        let lin = sweep(&SweepSpec::Linear { theta: grid }).unwrap();
        for (a, b) in near.rows.iter().zip(&lin.rows) {
            let (Cell::Real(x), Cell::Real(y)) = (&a[5], &b[4]) else {
                unreachable!()
            };
            assert!((x - y).abs() < 1e-3);
        }
    }

    #[test]
    fn dth_sweep_large_order_matches_minimax_choice() {
        let table = sweep(&SweepSpec::Dth {
            theta: Grid::new(0.5, 0.99, 0.01).unwrap(),
            orders: DEFAULT_ORDERS.to_vec(),
        })
        .unwrap();
        let per_theta = DEFAULT_ORDERS.len() + 1;
        for chunk in table.rows.chunks(per_theta) {
            assert_eq!(chunk[per_theta - 2][3], chunk[per_theta - 1][3]);
        }
    }

    #[test]
    fn sweep_output_is_deterministic() {
        let spec = SweepSpec::Exponential {
            theta: Grid::new(0.1, 0.9, 0.1).unwrap(),
            bases: vec![0.8, 1.5],
        };
        assert_eq!(sweep(&spec).unwrap().to_string(), sweep(&spec).unwrap().to_string());
    }
}
