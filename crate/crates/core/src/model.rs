//! Source models and kernel chains as assembled by the scenario runner.

use std::sync::Arc;

use rand::RngCore;

use crate::error::{Error, Result};
use crate::kernels::{marginal_score_permuted, Limits, ObservationKernel, ObservedModel, PermutationKernel};
use crate::measures::{ContinuousFamily, ParamValue, Point, ScoreValue, SpatialFamily};
use crate::pointproc::{Configuration, IIDPointProcess};

#[derive(Clone, Debug)]
pub enum Model {
    /// A single draw from a family.
    Family(SpatialFamily),
    /// One draw from a family on `R^{point_dim · n}`, read as `n` points.
    Vector { family: Arc<dyn ContinuousFamily>, point_dim: usize, n: usize },
    PointProcess(IIDPointProcess),
}

impl Model {
    pub fn vector(family: Arc<dyn ContinuousFamily>, n: usize) -> Result<Self> {
        if n == 0 || family.dim() % n != 0 {
            return Err(Error::Config(format!("family {} of dimension {} cannot be split into {n} points", family.name(), family.dim())));
        }
        Ok(Model::Vector { point_dim: family.dim() / n, family, n })
    }

    pub fn domain(&self) -> (f64, f64) {
        match self {
            Model::Family(f) => f.domain(),
            Model::Vector { family, .. } => family.domain(),
            Model::PointProcess(pp) => {
                let (a, b) = pp.cardinality.domain();
                let (c, d) = pp.spatial.domain();
                (a.max(c), b.min(d))
            }
        }
    }

    pub fn param(&self, theta: f64) -> Result<ParamValue> {
        let (lo, hi) = self.domain();
        ParamValue::new(theta, lo, hi)
    }

    /// Number of points in a vector model.
    pub fn vector_len(&self) -> Option<usize> {
        match self {
            Model::Vector { n, .. } => Some(*n),
            _ => None,
        }
    }
}

/// One stage of a kernel chain.
#[derive(Clone, Debug)]
pub enum KernelStage {
    /// Acts on configurations.
    Point(Arc<dyn ObservationKernel>),
    /// Acts on ordered vectors.
    Permutation(PermutationKernel),
}

impl KernelStage {
    pub fn describe(&self) -> String {
        match self {
            KernelStage::Point(k) => k.describe(),
            KernelStage::Permutation(k) => k.describe(),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Chain {
    stages: Vec<KernelStage>,
}

impl Chain {
    pub fn new(stages: Vec<KernelStage>) -> Self {
        Chain { stages }
    }

    pub fn empty() -> Self {
        Chain::default()
    }

    pub fn stages(&self) -> &[KernelStage] {
        &self.stages
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    /// `none`, or the stage descriptors joined by `>`.
    pub fn describe(&self) -> String {
        if self.stages.is_empty() {
            return "none".into();
        }
        self.stages.iter().map(KernelStage::describe).collect::<Vec<_>>().join(">")
    }

    fn point_kernels(&self) -> Result<Vec<Arc<dyn ObservationKernel>>> {
        self.stages
            .iter()
            .map(|s| match s {
                KernelStage::Point(k) => Ok(k.clone()),
                KernelStage::Permutation(_) => Err(Error::Config("permutation kernels act on vector models only".into())),
            })
            .collect()
    }

    fn permutation(&self) -> Result<Option<&PermutationKernel>> {
        let mut found = None;
        for s in &self.stages {
            match s {
                KernelStage::Permutation(k) if found.is_none() => found = Some(k),
                KernelStage::Permutation(_) => {
                    return Err(Error::Unsupported("at most one permutation kernel per chain".into()))
                }
                KernelStage::Point(k) => {
                    return Err(Error::Config(format!("kernel {} acts on point-process models only", k.name())))
                }
            }
        }
        Ok(found)
    }
}

/// A model pushed through a chain, reduced to what the estimators need.
#[derive(Clone, Debug)]
pub enum Observed {
    Family(SpatialFamily),
    Vector { family: Arc<dyn ContinuousFamily>, point_dim: usize, n: usize, permutation: Option<PermutationKernel> },
    PointProcess { model: ObservedModel, kernels: Vec<Arc<dyn ObservationKernel>> },
}

/// What one forward simulation produces.
#[derive(Clone, Debug)]
pub enum Draw {
    Point(Point),
    Vector(Vec<Point>),
    Config(Configuration),
}

impl Observed {
    pub fn new(model: &Model, chain: &Chain) -> Result<Self> {
        match model {
            Model::Family(f) => {
                if !chain.is_empty() {
                    return Err(Error::Config("kernels need a vector or point-process model".into()));
                }
                Ok(Observed::Family(f.clone()))
            }
            Model::Vector { family, point_dim, n } => {
                let permutation = chain.permutation()?.cloned();
                if let Some(k) = &permutation {
                    if k.n() != *n {
                        return Err(Error::Config(format!("permutation of size {} on a vector of {n} points", k.n())));
                    }
                }
                Ok(Observed::Vector { family: family.clone(), point_dim: *point_dim, n: *n, permutation })
            }
            Model::PointProcess(pp) => {
                let kernels = chain.point_kernels()?;
                let model = ObservedModel::from_kernels(pp.clone(), &kernels)?;
                Ok(Observed::PointProcess { model, kernels })
            }
        }
    }

    /// Forward-simulate the source and every kernel.
    pub fn sample(&self, theta: ParamValue, rng: &mut dyn RngCore) -> Result<Draw> {
        let t = theta.value();
        match self {
            Observed::Family(f) => Ok(Draw::Point(f.sample(t, rng))),
            Observed::Vector { family, point_dim, permutation, .. } => {
                let flat = family.sample(t, rng);
                let points: Vec<Point> = flat.chunks(*point_dim).map(<[f64]>::to_vec).collect();
                Ok(Draw::Vector(match permutation {
                    Some(k) => k.apply(&points, rng)?,
                    None => points,
                }))
            }
            Observed::PointProcess { model, kernels } => {
                let x = model.source.sample(theta, rng)?;
                Ok(Draw::Config(kernels.iter().fold(x, |c, k| k.apply(&c, rng))))
            }
        }
    }

    /// Exact score of the observed law at a draw.
    pub fn score(&self, theta: ParamValue, draw: &Draw, limits: &Limits) -> Result<ScoreValue> {
        let t = theta.value();
        match (self, draw) {
            (Observed::Family(f), Draw::Point(x)) => Ok(f.score(t, x)),
            (Observed::Vector { family, permutation, .. }, Draw::Vector(points)) => match permutation {
                Some(k) => marginal_score_permuted(family.as_ref(), k, theta, points, limits),
                None => {
                    let flat: Vec<f64> = points.iter().flatten().copied().collect();
                    Ok(SpatialFamily::Continuous(family.clone()).score(t, &flat))
                }
            },
            (Observed::PointProcess { model, .. }, Draw::Config(y)) => model.score(theta, y, limits),
            _ => Err(Error::Numeric("draw does not belong to this model".into())),
        }
    }
}
