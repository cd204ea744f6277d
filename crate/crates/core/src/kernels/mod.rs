//! Observation kernels acting on configurations and on ordered tuples.

mod oracle;
mod permutation;
mod superposition;
mod thinning;

pub use oracle::conditional_score_oracle;
pub use permutation::{marginal_score_permuted, permuted_log_density, PermutationDist, PermutationKernel};
pub use superposition::{
    apply_superposition, marginal_score_composite, marginal_score_superposed, ClutterSpec, MixtureEval,
    SuperpositionKernel,
};
pub use thinning::{
    apply_thinning, marginal_score_thinned_iid, second_moment_thinned, thinned_cardinality, ThinningKernel,
};

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{ParamValue, ScoreValue};
use crate::pointproc::{dedup, duplicate, CardinalityPmf, Configuration, IIDPointProcess};

/// Caps on exhaustive enumeration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Limits {
    /// Largest `n` for which `Sym(n)` is enumerated.
    pub permutation: usize,
    /// Largest observed size for the clutter subset lattice.
    pub subsets: usize,
    /// Latent configurations visited by the conditional-expectation oracle.
    pub latent: usize,
    /// Observed outcomes visited by exact Fisher enumeration.
    pub outcomes: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { permutation: 8, subsets: 20, latent: 1_000_000, outcomes: 1_000_000 }
    }
}

/// A Markov kernel from configurations to configurations.
pub trait ObservationKernel: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;
    fn describe(&self) -> String;
    fn apply(&self, config: &Configuration, rng: &mut dyn RngCore) -> Configuration;
    /// `Q(x, {y})` on multisets.
    fn transition_prob(&self, x: &Configuration, y: &Configuration) -> Result<f64>;
    /// Every `y` with `Q(x, {y}) > 0`, when finite.
    fn forward_support(&self, _x: &Configuration) -> Option<Vec<Configuration>> {
        None
    }
    /// Every `x` with `Q(x, {y}) > 0`, when finite.
    fn backward_support(&self, _y: &Configuration) -> Option<Vec<Configuration>> {
        None
    }
    /// Push this kernel onto a reduced observed model.
    fn fold_into(&self, model: ObservedModel) -> Result<ObservedModel>;
}

/// `Φ ↦ Φ₂`, every point doubled.
#[derive(Clone, Debug, Default)]
pub struct DuplicationKernel;

impl ObservationKernel for DuplicationKernel {
    fn name(&self) -> &'static str {
        "duplication"
    }

    fn describe(&self) -> String {
        "duplication".into()
    }

    fn apply(&self, config: &Configuration, _rng: &mut dyn RngCore) -> Configuration {
        duplicate(config)
    }

    fn transition_prob(&self, x: &Configuration, y: &Configuration) -> Result<f64> {
        Ok(if duplicate(x) == *y { 1.0 } else { 0.0 })
    }

    fn forward_support(&self, x: &Configuration) -> Option<Vec<Configuration>> {
        Some(vec![duplicate(x)])
    }

    fn backward_support(&self, y: &Configuration) -> Option<Vec<Configuration>> {
        Some(dedup(y).into_iter().collect())
    }

    fn fold_into(&self, mut model: ObservedModel) -> Result<ObservedModel> {
        if model.duplicated {
            return Err(Error::Unsupported("duplication applied twice".into()));
        }
        model.duplicated = true;
        Ok(model)
    }
}

/// Kernels applied in order.
#[derive(Clone, Debug)]
pub struct CompositeKernel {
    stages: Vec<Arc<dyn ObservationKernel>>,
}

impl CompositeKernel {
    pub fn new(stages: Vec<Arc<dyn ObservationKernel>>) -> Self {
        CompositeKernel { stages }
    }

    pub fn stages(&self) -> &[Arc<dyn ObservationKernel>] {
        &self.stages
    }

    fn split_first(&self) -> (Arc<dyn ObservationKernel>, CompositeKernel) {
        (self.stages[0].clone(), CompositeKernel::new(self.stages[1..].to_vec()))
    }

    fn split_last(&self) -> (CompositeKernel, Arc<dyn ObservationKernel>) {
        let n = self.stages.len();
        (CompositeKernel::new(self.stages[..n - 1].to_vec()), self.stages[n - 1].clone())
    }
}

fn unique(configs: impl IntoIterator<Item = Configuration>) -> Vec<Configuration> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for c in configs {
        if seen.insert(c.to_string()) {
            out.push(c);
        }
    }
    out
}

impl ObservationKernel for CompositeKernel {
    fn name(&self) -> &'static str {
        "composite"
    }

    fn describe(&self) -> String {
        if self.stages.is_empty() {
            return "none".into();
        }
        self.stages.iter().map(|s| s.describe()).collect::<Vec<_>>().join(">")
    }

    fn apply(&self, config: &Configuration, rng: &mut dyn RngCore) -> Configuration {
        self.stages.iter().fold(config.clone(), |c, k| k.apply(&c, rng))
    }

    fn transition_prob(&self, x: &Configuration, y: &Configuration) -> Result<f64> {
        match self.stages.len() {
            0 => return Ok(if x == y { 1.0 } else { 0.0 }),
            1 => return self.stages[0].transition_prob(x, y),
            _ => {}
        }
        let (first, rest) = self.split_first();
        if let Some(mids) = first.forward_support(x) {
            let mut total = 0.0;
            for z in unique(mids) {
                let a = first.transition_prob(x, &z)?;
                if a > 0.0 {
                    total += a * rest.transition_prob(&z, y)?;
                }
            }
            return Ok(total);
        }
        let (init, last) = self.split_last();
        if let Some(mids) = last.backward_support(y) {
            let mut total = 0.0;
            for z in unique(mids) {
                let b = last.transition_prob(&z, y)?;
                if b > 0.0 {
                    total += init.transition_prob(x, &z)? * b;
                }
            }
            return Ok(total);
        }
        Err(Error::Unsupported(format!("no finite intermediate support for {}", self.describe())))
    }

    fn forward_support(&self, x: &Configuration) -> Option<Vec<Configuration>> {
        let mut current = vec![x.clone()];
        for k in &self.stages {
            let mut next = Vec::new();
            for c in &current {
                next.extend(k.forward_support(c)?);
            }
            current = unique(next);
        }
        Some(current)
    }

    fn backward_support(&self, y: &Configuration) -> Option<Vec<Configuration>> {
        let mut current = vec![y.clone()];
        for k in self.stages.iter().rev() {
            let mut next = Vec::new();
            for c in &current {
                next.extend(k.backward_support(c)?);
            }
            current = unique(next);
        }
        Some(current)
    }

    fn fold_into(&self, model: ObservedModel) -> Result<ObservedModel> {
        self.stages.iter().try_fold(model, |m, k| k.fold_into(m))
    }
}

/// Reduced form of an i.i.d. process pushed through a kernel chain:
/// thin with retention `alpha`, superpose `clutter`, then optionally duplicate.
#[derive(Clone, Debug)]
pub struct ObservedModel {
    pub source: IIDPointProcess,
    pub alpha: f64,
    pub clutter: Option<ClutterSpec>,
    pub duplicated: bool,
}

impl ObservedModel {
    pub fn new(source: IIDPointProcess) -> Self {
        ObservedModel { source, alpha: 1.0, clutter: None, duplicated: false }
    }

    pub fn from_kernels(source: IIDPointProcess, kernels: &[Arc<dyn ObservationKernel>]) -> Result<Self> {
        kernels.iter().try_fold(Self::new(source), |m, k| k.fold_into(m))
    }

    /// Cardinality law of the retained target points.
    pub fn target_pmf(&self, theta: ParamValue) -> Result<CardinalityPmf> {
        let pmf = self.source.pmf(theta)?;
        if self.alpha == 1.0 {
            Ok(pmf)
        } else {
            thinned_cardinality(&pmf, self.alpha)
        }
    }

    /// Log density of the observed ordered tuple and the score at `y`.
    pub fn evaluate(&self, theta: ParamValue, y: &Configuration, limits: &Limits) -> Result<MixtureEval> {
        let base;
        let y = if self.duplicated {
            match dedup(y) {
                Ok(b) => {
                    base = b;
                    &base
                }
                Err(Error::NotDuplicated) => return Ok(MixtureEval::off_support()),
                Err(e) => return Err(e),
            }
        } else {
            y
        };
        let pmf = self.target_pmf(theta)?;
        let t = theta.value();
        match &self.clutter {
            Some(clutter) => superposition::superposed_eval(&pmf, &self.source.spatial, t, clutter, y, limits),
            None => Ok(superposition::plain_eval(&pmf, &self.source.spatial, t, y)),
        }
    }

    pub fn score(&self, theta: ParamValue, y: &Configuration, limits: &Limits) -> Result<ScoreValue> {
        Ok(self.evaluate(theta, y, limits)?.score)
    }
}
