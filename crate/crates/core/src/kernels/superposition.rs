//! Superposition with an independent, θ-free clutter process.
//!
//! The observed tuple `y_{1:n}` has density
//!
//! ```text
//! p̂_θ(y) = Σ_k π_θ(k) κ(n−k) C(n,k)⁻¹ Σ_{|I|=k} Π_{i∈I} μ_θ(y_i) Π_{j∉I} c(y_j)
//! ```
//!
//! where `κ`, `c` are the clutter cardinality and spatial law. The inner sums
//! over subsets of each size are elementary symmetric polynomials, built by a
//! dynamic programme over points that carries value and θ-derivative together.

use std::sync::Arc;

use rand::RngCore;

use super::{thinned_cardinality, Limits, ObservationKernel, ObservedModel};
use crate::error::{domain, Error, Result};
use crate::measures::{ParamValue, ScoreValue, SpatialFamily};
use crate::pointproc::{binomial_coefficients, log_density_with, sample_with, score_with, CardinalityLaw, CardinalityPmf, Configuration, IIDPointProcess};

/// Clutter spatial laws are θ-free; samplers receive this placeholder θ.
const CLUTTER_THETA: f64 = 0.0;

/// A θ-free clutter process.
#[derive(Clone, Debug)]
pub struct ClutterSpec {
    cardinality: Arc<dyn CardinalityLaw>,
    spatial: SpatialFamily,
    pmf: CardinalityPmf,
}

impl ClutterSpec {
    pub fn new(cardinality: Arc<dyn CardinalityLaw>, spatial: SpatialFamily) -> Result<Self> {
        if cardinality.theta_dependent() {
            return Err(domain(format!("clutter cardinality {} depends on theta", cardinality.name())));
        }
        if !spatial.theta_free() {
            return Err(domain(format!("clutter spatial family {} depends on theta", spatial.name())));
        }
        let pmf = cardinality.pmf(CLUTTER_THETA)?;
        Ok(ClutterSpec { cardinality, spatial, pmf })
    }

    pub fn cardinality(&self) -> &Arc<dyn CardinalityLaw> {
        &self.cardinality
    }

    pub fn spatial(&self) -> &SpatialFamily {
        &self.spatial
    }

    pub fn pmf(&self) -> &CardinalityPmf {
        &self.pmf
    }

    pub fn with_cardinality(&self, cardinality: Arc<dyn CardinalityLaw>) -> Result<Self> {
        Self::new(cardinality, self.spatial.clone())
    }

    pub fn describe(&self) -> String {
        format!("card={} spatial={}", self.cardinality.describe(), self.spatial.name())
    }

    pub fn sample(&self, dim: usize, rng: &mut dyn RngCore) -> Configuration {
        let c = sample_with(&self.pmf, &self.spatial, CLUTTER_THETA, rng);
        if c.is_empty() {
            Configuration::empty(dim)
        } else {
            c
        }
    }

    /// Probability that the clutter multiset equals `r` (atomic clutter only).
    pub fn multiset_prob(&self, r: &Configuration) -> Result<f64> {
        let fam = self.spatial.as_atomic().ok_or_else(|| {
            Error::Unsupported("exact clutter transition needs an atomic clutter family".into())
        })?;
        let mut p = self.pmf.prob(r.len());
        if p == 0.0 {
            return Ok(0.0);
        }
        // Multinomial: |r|! / Π r_a! · Π c(a)^{r_a}.
        let mut count = 0usize;
        for (pt, m) in r.multiplicities() {
            let Some(i) = fam.atom_index(pt) else {
                return Ok(0.0);
            };
            let c = fam.mass(CLUTTER_THETA, i);
            for j in 1..=m {
                count += 1;
                p *= c * count as f64 / j as f64;
            }
        }
        Ok(p)
    }
}

#[derive(Clone, Debug)]
pub struct SuperpositionKernel {
    clutter: ClutterSpec,
}

impl SuperpositionKernel {
    pub fn new(clutter: ClutterSpec) -> Self {
        SuperpositionKernel { clutter }
    }

    pub fn clutter(&self) -> &ClutterSpec {
        &self.clutter
    }
}

/// Union of `config` with an independent clutter draw.
pub fn apply_superposition(clutter: &ClutterSpec, config: &Configuration, rng: &mut dyn RngCore) -> Configuration {
    config.union(&clutter.sample(config.dim(), rng))
}

impl ObservationKernel for SuperpositionKernel {
    fn name(&self) -> &'static str {
        "superposition"
    }

    fn describe(&self) -> String {
        format!("superposition({})", self.clutter.describe())
    }

    fn apply(&self, config: &Configuration, rng: &mut dyn RngCore) -> Configuration {
        apply_superposition(&self.clutter, config, rng)
    }

    fn transition_prob(&self, x: &Configuration, y: &Configuration) -> Result<f64> {
        match y.difference(x) {
            Some(r) => self.clutter.multiset_prob(&r),
            None => Ok(0.0),
        }
    }

    fn backward_support(&self, y: &Configuration) -> Option<Vec<Configuration>> {
        Some(y.sub_multisets())
    }

    fn fold_into(&self, mut model: ObservedModel) -> Result<ObservedModel> {
        if model.duplicated {
            return Err(Error::Unsupported("superposition after duplication".into()));
        }
        if model.clutter.is_some() {
            return Err(Error::Unsupported("more than one clutter source in a chain".into()));
        }
        let target = &model.source.spatial;
        if target.is_atomic() != self.clutter.spatial.is_atomic() {
            return Err(Error::Unsupported(
                "target and clutter spatial laws must both be atomic or both continuous".into(),
            ));
        }
        if target.dim() != self.clutter.spatial.dim() {
            return Err(domain("clutter and target live in different dimensions"));
        }
        model.clutter = Some(self.clutter.clone());
        Ok(model)
    }
}

/// Log density of the observed ordered tuple together with its score.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixtureEval {
    pub log_density: f64,
    pub score: ScoreValue,
}

impl MixtureEval {
    pub(crate) fn off_support() -> Self {
        MixtureEval { log_density: f64::NEG_INFINITY, score: ScoreValue::undefined() }
    }
}

/// Density and score without clutter.
pub(crate) fn plain_eval(pmf: &CardinalityPmf, spatial: &SpatialFamily, theta: f64, y: &Configuration) -> MixtureEval {
    let log_density = log_density_with(pmf, spatial, theta, y);
    if log_density == f64::NEG_INFINITY {
        return MixtureEval::off_support();
    }
    MixtureEval { log_density, score: score_with(pmf, spatial, theta, y) }
}

/// Density and score of target-plus-clutter at the observed tuple `y`.
pub(crate) fn superposed_eval(
    target_pmf: &CardinalityPmf,
    target: &SpatialFamily,
    theta: f64,
    clutter: &ClutterSpec,
    y: &Configuration,
    limits: &Limits,
) -> Result<MixtureEval> {
    let n = y.len();
    if n > limits.subsets {
        return Err(Error::EnumerationLimit { what: "superposition subset lattice", size: n, limit: limits.subsets });
    }
    if clutter.pmf().n_max() == 0 {
        return Ok(plain_eval(target_pmf, target, theta, y));
    }
    // e[k] = (Σ_{|I|=k} Π μ Π c, its θ-derivative), rescaled per point.
    let mut e = vec![(0.0f64, 0.0f64); n + 1];
    e[0] = (1.0, 0.0);
    let mut log_scale = 0.0;
    for (i, p) in y.points().iter().enumerate() {
        let lt = target.log_density(theta, p);
        let lc = clutter.spatial.log_density(CLUTTER_THETA, p);
        let m = lt.max(lc);
        if m == f64::NEG_INFINITY {
            return Ok(MixtureEval::off_support());
        }
        let (mu, dmu) = if lt == f64::NEG_INFINITY {
            (0.0, 0.0)
        } else {
            let mu = (lt - m).exp();
            let s = target.score(theta, p);
            (mu, mu * s.value())
        };
        let c = if lc == f64::NEG_INFINITY { 0.0 } else { (lc - m).exp() };
        log_scale += m;
        for k in (0..=i + 1).rev() {
            let keep = e[k];
            let take = if k > 0 { e[k - 1] } else { (0.0, 0.0) };
            e[k] = (keep.0 * c + take.0 * mu, keep.1 * c + take.1 * mu + take.0 * dmu);
        }
        let peak = e.iter().map(|v| v.0.abs()).fold(0.0, f64::max);
        if peak > 0.0 {
            for v in e.iter_mut() {
                v.0 /= peak;
                v.1 /= peak;
            }
            log_scale += peak.ln();
        }
    }
    let binom = binomial_coefficients(n);
    let kappa = clutter.pmf();
    let mut density = 0.0;
    let mut derivative = 0.0;
    for (k, (a, b)) in e.iter().enumerate() {
        let w = kappa.prob(n - k) / binom[k];
        if w == 0.0 {
            continue;
        }
        let (pk, dpk) = (target_pmf.prob(k), target_pmf.dprob(k));
        density += w * pk * a;
        derivative += w * (dpk * a + pk * b);
    }
    if !(density > 0.0) {
        return Ok(MixtureEval::off_support());
    }
    Ok(MixtureEval { log_density: density.ln() + log_scale, score: ScoreValue::new(derivative / density) })
}

/// Exact score of `Φ + Φ̃` at `y`, clutter independent of `Φ` and θ.
pub fn marginal_score_superposed(
    pp: &IIDPointProcess,
    clutter: &ClutterSpec,
    theta: ParamValue,
    y: &Configuration,
    limits: &Limits,
) -> Result<ScoreValue> {
    let pmf = pp.pmf(theta)?;
    Ok(superposed_eval(&pmf, &pp.spatial, theta.value(), clutter, y, limits)?.score)
}

/// Thinning with retention α followed by clutter superposition.
pub fn marginal_score_composite(
    pp: &IIDPointProcess,
    alpha: f64,
    clutter: &ClutterSpec,
    theta: ParamValue,
    y: &Configuration,
    limits: &Limits,
) -> Result<ScoreValue> {
    let pmf = thinned_cardinality(&pp.pmf(theta)?, alpha)?;
    Ok(superposed_eval(&pmf, &pp.spatial, theta.value(), clutter, y, limits)?.score)
}
