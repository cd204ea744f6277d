//! Name-keyed factories for every pluggable component.
//!
//! Components are described by a JSON object with a `name` and the
//! component's own parameters, e.g. `{"name": "poisson", "rate": 2}`.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::estimators::{Analytic, Enumeration, Estimator, MonteCarlo};
use crate::kernels::{ClutterSpec, DuplicationKernel, PermutationDist, PermutationKernel, SuperpositionKernel, ThinningKernel};
use crate::measures::{
    Categorical, ContinuousFamily, GaussianLocation, GaussianPair, GaussianScale, GaussianVector, Point, SpatialFamily,
    TwoPoint, UniformBox,
};
use crate::model::{Chain, KernelStage, Model};
use crate::pointproc::{BinomialTheta, CardinalityLaw, Dirac, IIDPointProcess, Poisson, PoissonTheta, Tabulated};

/// A component name with its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentSpec {
    pub name: String,
    #[serde(flatten)]
    pub params: Map<String, Value>,
}

impl ComponentSpec {
    pub fn new(name: &str, params: Value) -> Self {
        let params = match params {
            Value::Object(m) => m,
            _ => Map::new(),
        };
        ComponentSpec { name: name.into(), params }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Family { family: ComponentSpec },
    Vector { family: ComponentSpec },
    IidPp { cardinality: ComponentSpec, spatial: ComponentSpec },
}

/// Parameter access that rejects unknown keys.
struct Params<'a> {
    spec: &'a ComponentSpec,
}

impl<'a> Params<'a> {
    fn new(spec: &'a ComponentSpec, allowed: &[&str]) -> Result<Self> {
        if let Some(k) = spec.params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::Config(format!("`{}` has no parameter `{k}` (allowed: {})", spec.name, allowed.join(", "))));
        }
        Ok(Params { spec })
    }

    fn err(&self, key: &str, what: &str) -> Error {
        Error::Config(format!("`{}` parameter `{key}` must be {what}", self.spec.name))
    }

    fn get(&self, key: &str) -> Option<&'a Value> {
        self.spec.params.get(key)
    }

    fn f64_or(&self, key: &str, default: Option<f64>) -> Result<f64> {
        match self.get(key) {
            Some(v) => v.as_f64().ok_or_else(|| self.err(key, "a number")),
            None => default.ok_or_else(|| self.err(key, "given")),
        }
    }

    fn usize_or(&self, key: &str, default: Option<usize>) -> Result<usize> {
        match self.get(key) {
            Some(v) => v.as_u64().map(|u| u as usize).ok_or_else(|| self.err(key, "a nonnegative integer")),
            None => default.ok_or_else(|| self.err(key, "given")),
        }
    }

    fn f64_list(&self, key: &str) -> Result<Vec<f64>> {
        let arr = self.get(key).and_then(Value::as_array).ok_or_else(|| self.err(key, "an array of numbers"))?;
        arr.iter().map(|v| v.as_f64().ok_or_else(|| self.err(key, "an array of numbers"))).collect()
    }

    fn point(v: &Value) -> Option<Point> {
        match v {
            Value::Number(n) => n.as_f64().map(|x| vec![x]),
            Value::Array(a) => a.iter().map(Value::as_f64).collect(),
            _ => None,
        }
    }

    fn point_at(&self, key: &str) -> Result<Point> {
        self.get(key).and_then(Self::point).ok_or_else(|| self.err(key, "a number or an array of numbers"))
    }

    fn points(&self, key: &str) -> Result<Vec<Point>> {
        let arr = self.get(key).and_then(Value::as_array).ok_or_else(|| self.err(key, "an array of points"))?;
        arr.iter().map(|v| Self::point(v).ok_or_else(|| self.err(key, "an array of points"))).collect()
    }

    fn spec(&self, key: &str) -> Result<ComponentSpec> {
        let v = self.get(key).ok_or_else(|| self.err(key, "given"))?;
        serde_json::from_value(v.clone()).map_err(|_| self.err(key, "an object with a `name`"))
    }

    fn str_or(&self, key: &str, default: &'a str) -> Result<&'a str> {
        match self.get(key) {
            Some(v) => v.as_str().ok_or_else(|| self.err(key, "a string")),
            None => Ok(default),
        }
    }
}

type SpatialFactory = fn(&ComponentSpec) -> Result<SpatialFamily>;
type VectorFactory = fn(&ComponentSpec) -> Result<(Arc<dyn ContinuousFamily>, usize)>;
type CardinalityFactory = fn(&ComponentSpec) -> Result<Arc<dyn CardinalityLaw>>;
type KernelFactory = fn(&Registry, &ComponentSpec, Option<usize>) -> Result<KernelStage>;

pub struct Registry {
    spatial: BTreeMap<&'static str, SpatialFactory>,
    vector: BTreeMap<&'static str, VectorFactory>,
    cardinality: BTreeMap<&'static str, CardinalityFactory>,
    kernels: BTreeMap<&'static str, KernelFactory>,
    estimators: BTreeMap<&'static str, Arc<dyn Estimator>>,
}

fn continuous(f: impl ContinuousFamily + 'static) -> SpatialFamily {
    SpatialFamily::Continuous(Arc::new(f))
}

impl Registry {
    pub fn empty() -> Self {
        Registry {
            spatial: BTreeMap::new(),
            vector: BTreeMap::new(),
            cardinality: BTreeMap::new(),
            kernels: BTreeMap::new(),
            estimators: BTreeMap::new(),
        }
    }

    pub fn builtin() -> Self {
        let mut r = Registry::empty();
        r.register_spatial("bernoulli_dirac", |s| {
            let p = Params::new(s, &["x"])?;
            Ok(SpatialFamily::Atomic(Arc::new(TwoPoint::bernoulli_dirac(p.f64_or("x", Some(1.0))?))))
        });
        r.register_spatial("two_atom", |s| {
            let p = Params::new(s, &["a", "b"])?;
            Ok(SpatialFamily::Atomic(Arc::new(TwoPoint::new(p.point_at("a")?, p.point_at("b")?)?)))
        });
        r.register_spatial("categorical", |s| {
            let p = Params::new(s, &["atoms", "probs"])?;
            Ok(SpatialFamily::Atomic(Arc::new(Categorical::new(p.points("atoms")?, p.f64_list("probs")?)?)))
        });
        r.register_spatial("uniform_atoms", |s| {
            let p = Params::new(s, &["atoms"])?;
            Ok(SpatialFamily::Atomic(Arc::new(Categorical::uniform(p.points("atoms")?)?)))
        });
        r.register_spatial("gaussian_location", |s| {
            let p = Params::new(s, &["sigma"])?;
            Ok(continuous(GaussianLocation::new(p.f64_or("sigma", Some(1.0))?)?))
        });
        r.register_spatial("gaussian_scale", |s| {
            let p = Params::new(s, &["mean"])?;
            Ok(continuous(GaussianScale::new(p.f64_or("mean", Some(0.0))?)))
        });
        r.register_spatial("uniform_box", |s| {
            let p = Params::new(s, &["lo", "hi", "dim"])?;
            Ok(continuous(UniformBox::new(p.f64_or("lo", None)?, p.f64_or("hi", None)?, p.usize_or("dim", Some(1))?)?))
        });

        r.register_vector("gaussian_pair", |s| {
            let p = Params::new(s, &["sigma"])?;
            Ok((Arc::new(GaussianPair::new(p.f64_or("sigma", Some(1.0))?)?), 2))
        });
        r.register_vector("gaussian_vector", |s| {
            let p = Params::new(s, &["n", "sigma"])?;
            let n = p.usize_or("n", None)?;
            Ok((Arc::new(GaussianVector::new(n, p.f64_or("sigma", Some(1.0))?)?), n))
        });

        r.register_cardinality("dirac", |s| {
            let p = Params::new(s, &["n"])?;
            Ok(Arc::new(Dirac(p.usize_or("n", None)?)))
        });
        r.register_cardinality("poisson", |s| {
            let p = Params::new(s, &["rate"])?;
            Ok(Arc::new(Poisson::new(p.f64_or("rate", None)?)?))
        });
        r.register_cardinality("poisson_theta", |s| {
            let p = Params::new(s, &["scale"])?;
            Ok(Arc::new(PoissonTheta::new(p.f64_or("scale", Some(1.0))?)?))
        });
        r.register_cardinality("table", |s| {
            let p = Params::new(s, &["probs"])?;
            Ok(Arc::new(Tabulated::new(p.f64_list("probs")?)?))
        });
        r.register_cardinality("bernoulli", |s| {
            let p = Params::new(s, &["p"])?;
            let q = p.f64_or("p", None)?;
            Ok(Arc::new(Tabulated::new(vec![1.0 - q, q])?))
        });
        r.register_cardinality("binomial_theta", |s| {
            let p = Params::new(s, &["trials"])?;
            Ok(Arc::new(BinomialTheta::new(p.usize_or("trials", None)?)))
        });

        r.register_kernel("thinning", |_, s, _| {
            let p = Params::new(s, &["alpha"])?;
            Ok(KernelStage::Point(Arc::new(ThinningKernel::new(p.f64_or("alpha", None)?)?)))
        });
        r.register_kernel("superposition", |reg, s, _| {
            let p = Params::new(s, &["cardinality", "spatial"])?;
            let card = reg.cardinality(&p.spec("cardinality")?)?;
            let spatial = reg.spatial(&p.spec("spatial")?)?;
            Ok(KernelStage::Point(Arc::new(SuperpositionKernel::new(ClutterSpec::new(card, spatial)?))))
        });
        r.register_kernel("duplication", |_, s, _| {
            Params::new(s, &[])?;
            Ok(KernelStage::Point(Arc::new(DuplicationKernel)))
        });
        r.register_kernel("permutation", |_, s, vector_len| {
            let p = Params::new(s, &["dist", "n"])?;
            let n = p.usize_or("n", vector_len)?;
            let dist = match p.str_or("dist", "uniform")? {
                "uniform" => PermutationDist::Uniform,
                "identity" => PermutationDist::Identity,
                other => return Err(Error::Config(format!("unknown permutation dist `{other}` (uniform, identity)"))),
            };
            Ok(KernelStage::Permutation(PermutationKernel::new(n, dist)?))
        });

        r.register_estimator("analytic", Arc::new(Analytic));
        r.register_estimator("enumeration", Arc::new(Enumeration));
        r.register_estimator("monte-carlo", Arc::new(MonteCarlo));
        r
    }

    pub fn register_spatial(&mut self, name: &'static str, f: SpatialFactory) {
        self.spatial.insert(name, f);
    }

    pub fn register_vector(&mut self, name: &'static str, f: VectorFactory) {
        self.vector.insert(name, f);
    }

    pub fn register_cardinality(&mut self, name: &'static str, f: CardinalityFactory) {
        self.cardinality.insert(name, f);
    }

    pub fn register_kernel(&mut self, name: &'static str, f: KernelFactory) {
        self.kernels.insert(name, f);
    }

    pub fn register_estimator(&mut self, name: &'static str, e: Arc<dyn Estimator>) {
        self.estimators.insert(name, e);
    }

    fn lookup<'m, T>(map: &'m BTreeMap<&'static str, T>, kind: &str, name: &str) -> Result<&'m T> {
        map.get(name).ok_or_else(|| {
            let known: Vec<&str> = map.keys().copied().collect();
            Error::Config(format!("unknown {kind} `{name}` (known: {})", known.join(", ")))
        })
    }

    pub fn spatial(&self, spec: &ComponentSpec) -> Result<SpatialFamily> {
        Self::lookup(&self.spatial, "spatial family", &spec.name)?(spec)
    }

    pub fn vector(&self, spec: &ComponentSpec) -> Result<Model> {
        let (family, n) = Self::lookup(&self.vector, "vector family", &spec.name)?(spec)?;
        Model::vector(family, n)
    }

    pub fn cardinality(&self, spec: &ComponentSpec) -> Result<Arc<dyn CardinalityLaw>> {
        Self::lookup(&self.cardinality, "cardinality law", &spec.name)?(spec)
    }

    pub fn kernel(&self, spec: &ComponentSpec, vector_len: Option<usize>) -> Result<KernelStage> {
        Self::lookup(&self.kernels, "kernel", &spec.name)?(self, spec, vector_len)
    }

    pub fn estimator(&self, name: &str) -> Result<Arc<dyn Estimator>> {
        Self::lookup(&self.estimators, "estimator", name).cloned()
    }

    pub fn model(&self, spec: &ModelSpec) -> Result<Model> {
        match spec {
            ModelSpec::Family { family } => Ok(Model::Family(self.spatial(family)?)),
            ModelSpec::Vector { family } => self.vector(family),
            ModelSpec::IidPp { cardinality, spatial } => {
                Ok(Model::PointProcess(IIDPointProcess::new(self.cardinality(cardinality)?, self.spatial(spatial)?)))
            }
        }
    }

    pub fn chain(&self, specs: &[ComponentSpec], model: &Model) -> Result<Chain> {
        let stages = specs.iter().map(|s| self.kernel(s, model.vector_len())).collect::<Result<_>>()?;
        Ok(Chain::new(stages))
    }

    pub fn names(&self) -> BTreeMap<&'static str, Vec<&'static str>> {
        let mut out = BTreeMap::new();
        out.insert("spatial", self.spatial.keys().copied().collect());
        out.insert("vector", self.vector.keys().copied().collect());
        out.insert("cardinality", self.cardinality.keys().copied().collect());
        out.insert("kernel", self.kernels.keys().copied().collect());
        out.insert("estimator", self.estimators.keys().copied().collect());
        out
    }
}

impl Default for Registry {
    fn default() -> Self {
        Registry::builtin()
    }
}
