//! Interchangeable Fisher-information estimators.

use crate::error::{Error, Result};
use crate::fisher::{fisher_enumerate, fisher_mc, CoefficientMode, FisherEstimate, McConfig, Method};
use crate::kernels::Limits;
use crate::model::{Chain, Model, Observed};

/// Everything an estimator may need besides the model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimateContext {
    pub limits: Limits,
    pub samples: u64,
    pub seed: u64,
    pub workers: usize,
    pub mode: CoefficientMode,
}

impl Default for EstimateContext {
    fn default() -> Self {
        EstimateContext { limits: Limits::default(), samples: 100_000, seed: 0, workers: 0, mode: CoefficientMode::default() }
    }
}

pub trait Estimator: Send + Sync {
    fn method(&self) -> Method;
    fn estimate(&self, model: &Model, chain: &Chain, theta: f64, ctx: &EstimateContext) -> Result<FisherEstimate>;
}

/// Closed forms: family information, and `𝓘_N + coef · 𝓘_X` for thinned or
/// duplicated i.i.d. processes.
#[derive(Clone, Copy, Debug, Default)]
pub struct Analytic;

/// Exact sums over the outcome space of atomic models.
#[derive(Clone, Copy, Debug, Default)]
pub struct Enumeration;

/// Forward simulation through the kernels, scored exactly.
#[derive(Clone, Copy, Debug, Default)]
pub struct MonteCarlo;

impl Estimator for Analytic {
    fn method(&self) -> Method {
        Method::Analytic
    }

    fn estimate(&self, model: &Model, chain: &Chain, theta: f64, ctx: &EstimateContext) -> Result<FisherEstimate> {
        let th = model.param(theta)?;
        let value = match Observed::new(model, chain)? {
            Observed::Family(f) => f.fisher_information(th.value()),
            Observed::Vector { family, permutation: None, .. } => family.fisher_information(th.value()),
            Observed::Vector { .. } => None,
            Observed::PointProcess { model, .. } => {
                if model.clutter.is_some() {
                    return Err(Error::Unsupported("no closed form with clutter; use enumeration or monte-carlo".into()));
                }
                let pmf = model.target_pmf(th)?;
                let i_x = model.source.spatial.fisher_information(th.value());
                i_x.map(|i_x| pmf.fisher_information() + ctx.mode.coefficient(&pmf.moments()) * i_x)
            }
        };
        let value = value.ok_or_else(|| Error::Unsupported("no closed form for this model and kernel chain".into()))?;
        Ok(FisherEstimate::exact(value, Method::Analytic))
    }
}

impl Estimator for Enumeration {
    fn method(&self) -> Method {
        Method::Enumeration
    }

    fn estimate(&self, model: &Model, chain: &Chain, theta: f64, ctx: &EstimateContext) -> Result<FisherEstimate> {
        let th = model.param(theta)?;
        match Observed::new(model, chain)? {
            Observed::Family(f) => fisher_enumerate(&f, th, &ctx.limits),
            Observed::PointProcess { model, .. } => fisher_enumerate(&model, th, &ctx.limits),
            Observed::Vector { .. } => Err(Error::Unsupported("vector models have continuous outcome spaces".into())),
        }
    }
}

impl Estimator for MonteCarlo {
    fn method(&self) -> Method {
        Method::MonteCarlo
    }

    fn estimate(&self, model: &Model, chain: &Chain, theta: f64, ctx: &EstimateContext) -> Result<FisherEstimate> {
        let th = model.param(theta)?;
        let observed = Observed::new(model, chain)?;
        let run = fisher_mc(
            |rng| observed.sample(th, rng),
            |draw| observed.score(th, draw, &ctx.limits),
            McConfig { samples: ctx.samples, seed: ctx.seed, workers: ctx.workers },
        )?;
        Ok(run.estimate)
    }
}
