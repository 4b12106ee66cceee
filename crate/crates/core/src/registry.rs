//! Dispatch from a (source, penalty) pair to the construction that solves it.

use std::fmt;
use std::sync::Arc;

use crate::codec::CodeSpec;
use crate::error::{Error, Result};
use crate::golomb::{
    golomb_dth_redundancy, golomb_exp_penalty, golomb_mmr, optimal_k_dth, optimal_k_exponential,
    optimal_k_linear, optimal_k_mmr, Redundancy,
};
use crate::huffman::{optimal_finite, WeightSet};
use crate::light_tail::{build_unary_ended, build_unary_ended_mmr};
use crate::model::{evaluate_penalty, LengthSeq, Penalty, SourceModel};

/// An optimal code together with its penalty.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalCode {
    pub code: CodeSpec,
    pub penalty: Penalty,
    /// The penalty of `code`; `+∞` for an unbounded redundancy.
    pub value: f64,
    /// Which optimizer produced the code.
    pub method: &'static str,
}

impl OptimalCode {
    pub fn lengths(&self) -> LengthSeq {
        self.code.length_seq()
    }
}

impl fmt::Display for OptimalCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.code {
            CodeSpec::Golomb { k } => writeln!(f, "Golomb k={k}")?,
            CodeSpec::ExplicitFinite { .. } => writeln!(f, "Huffman lengths {}", self.lengths())?,
            CodeSpec::UnaryEnded(c) => writeln!(f, "Unary-ended r={} lengths {}", c.r(), self.lengths())?,
        }
        write!(f, "penalty {} = {}", self.penalty, self.value)
    }
}

/// A strategy for building optimal codes for some family of sources.
pub trait CodeOptimizer: Send + Sync {
    fn name(&self) -> &'static str;
    fn supports(&self, model: &SourceModel, penalty: Penalty) -> bool;
    fn optimize(&self, model: &SourceModel, penalty: Penalty) -> Result<OptimalCode>;
}

/// Golomb codes for geometric sources, all in closed form.
#[derive(Debug, Default)]
pub struct GolombOptimizer;

impl CodeOptimizer for GolombOptimizer {
    fn name(&self) -> &'static str {
        "golomb"
    }

    fn supports(&self, model: &SourceModel, _: Penalty) -> bool {
        matches!(model, SourceModel::Geometric { .. })
    }

    fn optimize(&self, model: &SourceModel, penalty: Penalty) -> Result<OptimalCode> {
        penalty.validate()?;
        let SourceModel::Geometric { theta } = *model else {
            return Err(Error::Unsupported("Golomb codes need a geometric source".into()));
        };
        let (k, value) = match penalty {
            Penalty::Exponential(a) => {
                let k = optimal_k_exponential(theta, a)?;
                (k, golomb_exp_penalty(theta, a, k)?)
            }
            Penalty::Linear => {
                let k = optimal_k_linear(theta)?;
                (k, golomb_exp_penalty(theta, 1.0, k)?)
            }
            Penalty::Dth(d) => {
                let k = optimal_k_dth(theta, d)?;
                (k, golomb_dth_redundancy(theta, d, k)?)
            }
            Penalty::MaxRedundancy => {
                let k = optimal_k_mmr(theta)?;
                let value = match golomb_mmr(theta, k)? {
                    Redundancy::Finite(v) => v,
                    Redundancy::Unbounded => f64::INFINITY,
                };
                (k, value)
            }
        };
        Ok(OptimalCode {
            code: CodeSpec::golomb(k)?,
            penalty,
            value,
            method: self.name(),
        })
    }
}

/// Unary-ended codes for light-tailed infinite sources.
#[derive(Debug, Default)]
pub struct UnaryEndedOptimizer;

impl CodeOptimizer for UnaryEndedOptimizer {
    fn name(&self) -> &'static str {
        "unary-ended"
    }

    fn supports(&self, model: &SourceModel, penalty: Penalty) -> bool {
        model.support_len().is_none() && !matches!(penalty, Penalty::Dth(_))
    }

    fn optimize(&self, model: &SourceModel, penalty: Penalty) -> Result<OptimalCode> {
        penalty.validate()?;
        let code = match penalty {
            Penalty::Exponential(a) => build_unary_ended(model, a)?,
            Penalty::Linear => build_unary_ended(model, 1.0)?,
            Penalty::MaxRedundancy => build_unary_ended_mmr(model)?,
            Penalty::Dth(_) => {
                return Err(Error::Unsupported(
                    "d-th redundancy has no unary-ended construction".into(),
                ))
            }
        };
        let value = match evaluate_penalty(model, &code.length_seq(), penalty) {
            Ok(v) => v,
            Err(Error::UnboundedRedundancy) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        Ok(OptimalCode {
            code: CodeSpec::UnaryEnded(code),
            penalty,
            value,
            method: self.name(),
        })
    }
}

/// Huffman-style merging for finite alphabets.
#[derive(Debug, Default)]
pub struct HuffmanOptimizer;

impl CodeOptimizer for HuffmanOptimizer {
    fn name(&self) -> &'static str {
        "huffman"
    }

    fn supports(&self, model: &SourceModel, _: Penalty) -> bool {
        matches!(model, SourceModel::ExplicitFinite { .. })
    }

    fn optimize(&self, model: &SourceModel, penalty: Penalty) -> Result<OptimalCode> {
        penalty.validate()?;
        let SourceModel::ExplicitFinite { probs } = model else {
            return Err(Error::Unsupported("Huffman coding needs a finite source".into()));
        };
        let tree = optimal_finite(&WeightSet::new(probs.clone())?, penalty)?;
        let value = evaluate_penalty(model, &tree.length_seq(), penalty)?;
        Ok(OptimalCode {
            code: CodeSpec::explicit(tree.codewords())?,
            penalty,
            value,
            method: self.name(),
        })
    }
}

/// Ordered list of optimizers; the first that supports a request handles it.
#[derive(Clone)]
pub struct Registry {
    optimizers: Vec<Arc<dyn CodeOptimizer>>,
}

impl Default for Registry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(GolombOptimizer));
        r.register(Arc::new(HuffmanOptimizer));
        r.register(Arc::new(UnaryEndedOptimizer));
        r
    }
}

impl fmt::Debug for Registry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.names()).finish()
    }
}

impl Registry {
    pub fn empty() -> Self {
        Self { optimizers: Vec::new() }
    }

    pub fn register(&mut self, optimizer: Arc<dyn CodeOptimizer>) {
        self.optimizers.push(optimizer);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.optimizers.iter().map(|o| o.name()).collect()
    }

    pub fn get(&self, name: &str) -> Option<Arc<dyn CodeOptimizer>> {
        self.optimizers.iter().find(|o| o.name() == name).cloned()
    }

    pub fn select(&self, model: &SourceModel, penalty: Penalty) -> Result<Arc<dyn CodeOptimizer>> {
        self.optimizers
            .iter()
            .find(|o| o.supports(model, penalty))
            .cloned()
            .ok_or_else(|| Error::Unsupported(format!("no construction for penalty {penalty} on this source")))
    }

    pub fn optimize(&self, model: &SourceModel, penalty: Penalty) -> Result<OptimalCode> {
        self.select(model, penalty)?.optimize(model, penalty)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_goes_to_golomb() {
        let reg = Registry::default();
        let model = SourceModel::geometric(0.9).unwrap();
        let out = reg.optimize(&model, Penalty::Exponential(1.0)).unwrap();
        assert_eq!(out.code, CodeSpec::Golomb { k: 7 });
        assert_eq!(out.method, "golomb");
        assert!(out.to_string().starts_with("Golomb k=7"));
        let lin = reg.optimize(&model, Penalty::Linear).unwrap();
        assert!((lin.value - out.value).abs() < 1e-12);
    }

    #[test]
    fn poisson_goes_to_unary_ended() {
        let reg = Registry::default();
        let model = SourceModel::poisson(1.0).unwrap();
        let out = reg.optimize(&model, Penalty::Exponential(2.0)).unwrap();
        assert_eq!(out.method, "unary-ended");
        assert_eq!(out.lengths().prefix(6), vec![2, 2, 2, 3, 4, 5]);
        assert!(matches!(
            reg.optimize(&model, Penalty::Dth(1.0)),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn finite_goes_to_huffman() {
        let reg = Registry::default();
        let model = SourceModel::finite(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let out = reg.optimize(&model, Penalty::Exponential(2.0)).unwrap();
        assert_eq!(out.lengths().prefix(4), vec![2, 2, 2, 2]);
        assert!((out.value - 2.0).abs() < 1e-12);
        let mmr = reg.optimize(&model, Penalty::MaxRedundancy).unwrap();
        assert!(mmr.value.is_finite());
    }

    #[test]
    fn registry_lookup() {
        let reg = Registry::default();
        assert_eq!(reg.names(), ["golomb", "huffman", "unary-ended"]);
        assert!(reg.get("huffman").is_some());
        assert!(reg.get("nope").is_none());
        assert!(Registry::empty()
            .select(&SourceModel::geometric(0.5).unwrap(), Penalty::Linear)
            .is_err());
    }
}
