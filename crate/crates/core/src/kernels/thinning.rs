//! Independent thinning: each point kept with probability α.

use std::sync::Arc;

use rand::{Rng, RngCore};

use super::{ObservationKernel, ObservedModel};
use crate::error::{domain, Error, Result};
use crate::measures::{ParamValue, ScoreValue};
use crate::pointproc::{binomial_coefficients, score_with, CardinalityPmf, Configuration, Fixed, IIDPointProcess, MomentSummary};

#[derive(Clone, Debug)]
pub struct ThinningKernel {
    alpha: f64,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(domain(format!("retention probability alpha = {alpha} outside [0, 1]")));
    }
    Ok(())
}

impl ThinningKernel {
    pub fn new(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(ThinningKernel { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// Keep each point independently with probability α.
pub fn apply_thinning(kernel: &ThinningKernel, config: &Configuration, rng: &mut dyn RngCore) -> Configuration {
    let kept = config
        .points()
        .iter()
        .filter(|_| rng.random::<f64>() < kernel.alpha)
        .cloned()
        .collect();
    Configuration::new(config.dim(), kept).unwrap_or_else(|_| Configuration::empty(config.dim()))
}

impl ObservationKernel for ThinningKernel {
    fn name(&self) -> &'static str {
        "thinning"
    }

    fn describe(&self) -> String {
        format!("thinning(alpha={})", self.alpha)
    }

    fn apply(&self, config: &Configuration, rng: &mut dyn RngCore) -> Configuration {
        apply_thinning(self, config, rng)
    }

    fn transition_prob(&self, x: &Configuration, y: &Configuration) -> Result<f64> {
        if x.difference(y).is_none() {
            return Ok(0.0);
        }
        let mut ways = 1.0;
        let xs = x.multiplicities();
        for (p, d) in y.multiplicities() {
            let c = xs.iter().find(|(q, _)| *q == p).map_or(0, |e| e.1);
            ways *= binomial_coefficients(c)[d];
        }
        let k = y.len() as i32;
        let n = x.len() as i32;
        Ok(ways * self.alpha.powi(k) * (1.0 - self.alpha).powi(n - k))
    }

    fn forward_support(&self, x: &Configuration) -> Option<Vec<Configuration>> {
        Some(x.sub_multisets())
    }

    fn fold_into(&self, mut model: ObservedModel) -> Result<ObservedModel> {
        if model.duplicated {
            return Err(Error::Unsupported("thinning after duplication".into()));
        }
        model.alpha *= self.alpha;
        if let Some(clutter) = model.clutter.take() {
            let thinned = thinned_cardinality(clutter.pmf(), self.alpha)?;
            model.clutter = Some(clutter.with_cardinality(Arc::new(Fixed(thinned)))?);
        }
        Ok(model)
    }
}

/// Binomially thinned cardinality
/// `π_α(n) = Σ_{k≥n} π(k) C(k, n) αⁿ (1 − α)^{k−n}`, with the θ-derivative
/// propagated linearly from `∂θ π`.
pub fn thinned_cardinality(card: &CardinalityPmf, alpha: f64) -> Result<CardinalityPmf> {
    check_alpha(alpha)?;
    let n_max = card.n_max();
    let mut probs = vec![0.0; n_max + 1];
    let mut dprobs = vec![0.0; n_max + 1];
    for k in 0..=n_max {
        let (p, dp) = (card.prob(k), card.dprob(k));
        if p == 0.0 && dp == 0.0 {
            continue;
        }
        let c = binomial_coefficients(k);
        for n in 0..=k {
            let b = c[n] * alpha.powi(n as i32) * (1.0 - alpha).powi((k - n) as i32);
            probs[n] += p * b;
            dprobs[n] += dp * b;
        }
    }
    CardinalityPmf::new(probs, dprobs, card.tail(), card.is_theta_dependent())
}

/// `E(N_α²) = (α − α²) E(N) + α² E(N²)`.
pub fn second_moment_thinned(ms: &MomentSummary, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok((alpha - alpha * alpha) * ms.e_n + alpha * alpha * ms.e_n2)
}

/// Score of the thinned i.i.d. process: the i.i.d. process with cardinality
/// `π_α` and the same spatial law.
pub fn marginal_score_thinned_iid(
    pp: &IIDPointProcess,
    alpha: f64,
    theta: ParamValue,
    y: &Configuration,
) -> Result<ScoreValue> {
    let pmf = thinned_cardinality(&pp.pmf(theta)?, alpha)?;
    Ok(score_with(&pmf, &pp.spatial, theta.value(), y))
}
