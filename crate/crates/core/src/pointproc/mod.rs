//! Point-process configurations and i.i.d. point processes.
//!
//! Densities are taken on ordered tuples, `π_θ(n) Π μ_θ(x_i)`. Configurations
//! are canonicalized (lexicographic order) only for storage and equality; the
//! symmetrization constant relating tuple and multiset densities is θ-free, so
//! it cancels in every score and leaves Fisher information unchanged.

mod cardinality;

pub use cardinality::{
    BinomialTheta, CardinalityLaw, CardinalityPmf, Dirac, Fixed, MomentSummary, Poisson,
    PoissonTheta, Tabulated, TAIL_LIMIT,
};
pub(crate) use cardinality::binomial_coefficients;

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::RngCore;

use crate::error::{domain, Error, Result};
use crate::measures::{ParamValue, Point, ScoreValue, SpatialFamily};

fn lex(a: &Point, b: &Point) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// A finite multiset of points in `R^dim`, kept in canonical order.
#[derive(Clone, Debug, PartialEq)]
pub struct Configuration {
    dim: usize,
    points: Vec<Point>,
}

impl Configuration {
    pub fn empty(dim: usize) -> Self {
        Configuration { dim, points: Vec::new() }
    }

    pub fn new(dim: usize, mut points: Vec<Point>) -> Result<Self> {
        if dim == 0 {
            return Err(domain("configuration dimension must be positive"));
        }
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(domain(format!("point {p:?} is not of dimension {dim}")));
        }
        points.sort_by(lex);
        Ok(Configuration { dim, points })
    }

    /// One-dimensional configuration from scalar coordinates.
    pub fn from_scalars(xs: &[f64]) -> Self {
        let mut points: Vec<Point> = xs.iter().map(|x| vec![*x]).collect();
        points.sort_by(lex);
        Configuration { dim: 1, points }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// Distinct points with their multiplicities, in canonical order.
    pub fn multiplicities(&self) -> Vec<(&Point, usize)> {
        let mut out: Vec<(&Point, usize)> = Vec::new();
        for p in &self.points {
            match out.last_mut() {
                Some((q, c)) if *q == p => *c += 1,
                _ => out.push((p, 1)),
            }
        }
        out
    }

    /// Multiset union.
    pub fn union(&self, other: &Configuration) -> Configuration {
        let mut points = self.points.clone();
        points.extend(other.points.iter().cloned());
        points.sort_by(lex);
        Configuration { dim: self.dim, points }
    }

    /// Multiset difference `self − other`, or `None` if `other ⊄ self`.
    pub fn difference(&self, other: &Configuration) -> Option<Configuration> {
        let mut rest = self.points.clone();
        for p in &other.points {
            let i = rest.iter().position(|q| q == p)?;
            rest.remove(i);
        }
        Some(Configuration { dim: self.dim, points: rest })
    }

    /// All sub-multisets, each listed once.
    pub fn sub_multisets(&self) -> Vec<Configuration> {
        let groups = self.multiplicities();
        let mut out = vec![Vec::<Point>::new()];
        for (p, c) in groups {
            let mut next = Vec::with_capacity(out.len() * (c + 1));
            for base in &out {
                for k in 0..=c {
                    let mut v = base.clone();
                    v.extend(std::iter::repeat_n(p.clone(), k));
                    next.push(v);
                }
            }
            out = next;
        }
        out.into_iter()
            .map(|pts| Configuration::new(self.dim, pts).expect("sub-multiset keeps dimension"))
            .collect()
    }
}

impl fmt::Display for Configuration {
    /// `d;x11,…,x1d;x21,…` with `d;∅` for the empty configuration.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.dim)?;
        if self.points.is_empty() {
            return write!(f, ";∅");
        }
        for p in &self.points {
            let coords: Vec<String> = p.iter().map(|x| x.to_string()).collect();
            write!(f, ";{}", coords.join(","))?;
        }
        Ok(())
    }
}

impl FromStr for Configuration {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.trim().split(';');
        let dim: usize = parts
            .next()
            .and_then(|d| d.trim().parse().ok())
            .ok_or_else(|| domain(format!("configuration {s:?} lacks a dimension prefix")))?;
        let rest: Vec<&str> = parts.collect();
        if rest.len() == 1 && rest[0].trim() == "∅" {
            return if dim == 0 { Err(domain("dimension must be positive")) } else { Ok(Configuration::empty(dim)) };
        }
        if rest.is_empty() {
            return Err(domain(format!("configuration {s:?} has no points; use `{dim};∅`")));
        }
        let points = rest
            .iter()
            .map(|chunk| {
                chunk
                    .split(',')
                    .map(|v| v.trim().parse::<f64>().map_err(|e| domain(format!("{v:?}: {e}"))))
                    .collect::<Result<Point>>()
            })
            .collect::<Result<Vec<Point>>>()?;
        Configuration::new(dim, points)
    }
}

/// An i.i.d. point process: `N ~ π_θ`, then `N` i.i.d. draws from `μ_θ`.
#[derive(Clone, Debug)]
pub struct IIDPointProcess {
    pub cardinality: Arc<dyn CardinalityLaw>,
    pub spatial: SpatialFamily,
}

impl IIDPointProcess {
    pub fn new(cardinality: Arc<dyn CardinalityLaw>, spatial: SpatialFamily) -> Self {
        IIDPointProcess { cardinality, spatial }
    }

    pub fn dim(&self) -> usize {
        self.spatial.dim()
    }

    /// Parameter value restricted to both the cardinality and spatial domains.
    pub fn param(&self, theta: f64) -> Result<ParamValue> {
        let (a, b) = self.cardinality.domain();
        let (c, d) = self.spatial.domain();
        ParamValue::new(theta, a.max(c), b.min(d))
    }

    pub fn pmf(&self, theta: ParamValue) -> Result<CardinalityPmf> {
        self.cardinality.pmf(theta.value())
    }

    pub fn sample(&self, theta: ParamValue, rng: &mut dyn RngCore) -> Result<Configuration> {
        let pmf = self.pmf(theta)?;
        Ok(sample_with(&pmf, &self.spatial, theta.value(), rng))
    }

    /// Score `∂θ log π_θ(n) + Σ ∂θ log μ_θ(x_i)`.
    pub fn score(&self, theta: ParamValue, config: &Configuration) -> Result<ScoreValue> {
        let pmf = self.pmf(theta)?;
        Ok(score_with(&pmf, &self.spatial, theta.value(), config))
    }

    /// Log density of the ordered tuple underlying `config`.
    pub fn log_density(&self, theta: ParamValue, config: &Configuration) -> Result<f64> {
        let pmf = self.pmf(theta)?;
        Ok(log_density_with(&pmf, &self.spatial, theta.value(), config))
    }
}

pub(crate) fn sample_with(
    pmf: &CardinalityPmf,
    spatial: &SpatialFamily,
    theta: f64,
    rng: &mut dyn RngCore,
) -> Configuration {
    let n = pmf.sample(rng);
    let points = (0..n).map(|_| spatial.sample(theta, rng)).collect();
    Configuration::new(spatial.dim(), points).expect("sampled points share the family dimension")
}

pub(crate) fn score_with(
    pmf: &CardinalityPmf,
    spatial: &SpatialFamily,
    theta: f64,
    config: &Configuration,
) -> ScoreValue {
    if config.dim() != spatial.dim() && !config.is_empty() {
        return ScoreValue::undefined();
    }
    let card = pmf.score(config.len());
    if !card.is_defined() {
        return card;
    }
    let mut total = card.value();
    for p in config.points() {
        let s = spatial.score(theta, p);
        if !s.is_defined() {
            return ScoreValue::undefined();
        }
        total += s.value();
    }
    ScoreValue::new(total)
}

pub(crate) fn log_density_with(
    pmf: &CardinalityPmf,
    spatial: &SpatialFamily,
    theta: f64,
    config: &Configuration,
) -> f64 {
    let mut total = pmf.prob(config.len()).ln();
    for p in config.points() {
        total += spatial.log_density(theta, p);
    }
    total
}

/// Count vectors of every multiset of size `n` over `k` atoms, appended to `out`.
pub(crate) fn compositions(n: usize, k: usize, out: &mut Vec<Vec<usize>>) {
    fn rec(left: usize, slot: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if slot + 1 == cur.len() {
            cur[slot] = left;
            out.push(cur.clone());
            return;
        }
        for c in 0..=left {
            cur[slot] = c;
            rec(left - c, slot + 1, cur, out);
        }
    }
    match k {
        0 if n == 0 => out.push(Vec::new()),
        0 => {}
        _ => rec(n, 0, &mut vec![0; k], out),
    }
}

/// Score of an i.i.d. point process at a configuration.
pub fn score_iid_pp(pp: &IIDPointProcess, theta: ParamValue, config: &Configuration) -> Result<ScoreValue> {
    pp.score(theta, config)
}

/// Sample a configuration from an i.i.d. point process.
pub fn sample_iid_pp(pp: &IIDPointProcess, theta: ParamValue, rng: &mut dyn RngCore) -> Result<Configuration> {
    pp.sample(theta, rng)
}

/// Exact `E(N)` and `E(N²)` of a cardinality law at θ.
pub fn moments(card: &dyn CardinalityLaw, theta: f64) -> Result<MomentSummary> {
    Ok(card.pmf(theta)?.moments())
}

/// Each point present twice.
pub fn duplicate(config: &Configuration) -> Configuration {
    let mut points = Vec::with_capacity(2 * config.len());
    for p in config.points() {
        points.push(p.clone());
        points.push(p.clone());
    }
    Configuration { dim: config.dim(), points }
}

/// Inverse of [`duplicate`]: halve every multiplicity.
pub fn dedup(config: &Configuration) -> Result<Configuration> {
    let mut points = Vec::with_capacity(config.len() / 2);
    for (p, c) in config.multiplicities() {
        if c % 2 != 0 {
            return Err(Error::NotDuplicated);
        }
        points.extend(std::iter::repeat_n(p.clone(), c / 2));
    }
    Ok(Configuration { dim: config.dim(), points })
}

/// Score of the duplicated process `Φ₂` at `config2`: the score of the
/// underlying process at `dedup(config2)`, undefined off the diagonal support.
pub fn score_duplicated(pp: &IIDPointProcess, theta: ParamValue, config2: &Configuration) -> Result<ScoreValue> {
    match dedup(config2) {
        Ok(base) => pp.score(theta, &base),
        Err(Error::NotDuplicated) => Ok(ScoreValue::undefined()),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{GaussianLocation, TwoPoint};
    use crate::rng;
    use proptest::prelude::*;

    fn two_atom(card: Arc<dyn CardinalityLaw>) -> IIDPointProcess {
        let spatial = SpatialFamily::Atomic(Arc::new(TwoPoint::new(vec![0.0], vec![1.0]).unwrap()));
        IIDPointProcess::new(card, spatial)
    }

    fn c(xs: &[f64]) -> Configuration {
        Configuration::from_scalars(xs)
    }

    #[test]
    fn text_format() {
        let cfg = Configuration::new(2, vec![vec![1.5, -2.0], vec![0.0, 3.0]]).unwrap();
        assert_eq!(cfg.to_string(), "2;0,3;1.5,-2");
        assert_eq!("2;0,3;1.5,-2".parse::<Configuration>().unwrap(), cfg);
        assert_eq!(Configuration::empty(3).to_string(), "3;∅");
        assert_eq!("3;∅".parse::<Configuration>().unwrap(), Configuration::empty(3));
        assert!("2;1".parse::<Configuration>().is_err());
        assert!("x;1".parse::<Configuration>().is_err());
        assert!("1".parse::<Configuration>().is_err());
    }

    #[test]
    fn iid_scores() {
        let pp = two_atom(Arc::new(Dirac(2)));
        let t = pp.param(0.5).unwrap();
        assert!((pp.score(t, &c(&[0.0, 0.0])).unwrap().value() - 4.0).abs() < 1e-15);
        assert_eq!(pp.score(t, &c(&[0.0, 1.0])).unwrap().value(), 0.0);
        // Wrong count is off-support under δ_2.
        assert!(!pp.score(t, &c(&[0.0])).unwrap().is_defined());
        let free = two_atom(Arc::new(Poisson::new(1.0).unwrap()));
        assert_eq!(free.score(t, &Configuration::empty(1)).unwrap().value(), 0.0);
    }

    #[test]
    fn sampling_cardinalities() {
        let mut rng = rng::stream(9, 0);
        let zero = two_atom(Arc::new(Dirac(0)));
        let three = two_atom(Arc::new(Dirac(3)));
        let t = zero.param(0.4).unwrap();
        for _ in 0..100 {
            assert!(zero.sample(t, &mut rng).unwrap().is_empty());
            assert_eq!(three.sample(t, &mut rng).unwrap().len(), 3);
        }
        let pois = two_atom(Arc::new(Poisson::new(2.0).unwrap()));
        let m = 100_000;
        let total: usize = (0..m).map(|_| pois.sample(t, &mut rng).unwrap().len()).sum();
        let mean = total as f64 / m as f64;
        assert!((mean - 2.0).abs() <= 3.0 * (2.0f64 / m as f64).sqrt());
    }

    #[test]
    fn duplication_roundtrip() {
        let ab = c(&[0.0, 1.0]);
        assert_eq!(duplicate(&ab), c(&[0.0, 0.0, 1.0, 1.0]));
        assert_eq!(duplicate(&Configuration::empty(1)), Configuration::empty(1));
        assert_eq!(duplicate(&c(&[0.0, 0.0])), c(&[0.0; 4]));
        assert_eq!(dedup(&c(&[0.0, 0.0, 1.0, 1.0])).unwrap(), ab);
        assert!(matches!(dedup(&ab), Err(Error::NotDuplicated)));
        assert_eq!(dedup(&Configuration::empty(1)).unwrap(), Configuration::empty(1));
    }

    #[test]
    fn duplicated_scores() {
        let pp = two_atom(Arc::new(Dirac(2)));
        let t = pp.param(0.5).unwrap();
        assert!((score_duplicated(&pp, t, &c(&[0.0; 4])).unwrap().value() - 4.0).abs() < 1e-15);
        assert_eq!(score_duplicated(&pp, t, &c(&[0.0, 0.0, 1.0, 1.0])).unwrap().value(), 0.0);
        let off = score_duplicated(&pp, t, &c(&[0.0, 1.0, 1.0])).unwrap();
        assert!(!off.is_defined() && off.value() == 0.0);
    }

    #[test]
    fn sub_multisets_enumerates_each_once() {
        let cfg = c(&[0.0, 0.0, 1.0]);
        let subs = cfg.sub_multisets();
        assert_eq!(subs.len(), 6);
        assert!(subs.contains(&Configuration::empty(1)));
        assert!(subs.contains(&cfg));
        assert_eq!(cfg.difference(&c(&[0.0, 1.0])).unwrap(), c(&[0.0]));
        assert!(cfg.difference(&c(&[1.0, 1.0])).is_none());
    }

    proptest! {
        #[test]
        fn score_is_order_invariant(xs in proptest::collection::vec(-5.0f64..5.0, 0..8), seed in 0u64..1000) {
            let pp = IIDPointProcess::new(
                Arc::new(Poisson::new(3.0).unwrap()),
                SpatialFamily::Continuous(Arc::new(GaussianLocation::new(1.0).unwrap())),
            );
            let t = pp.param(0.3).unwrap();
            let mut shuffled = xs.clone();
            let mut rng = rng::stream(seed, 0);
            use rand::seq::SliceRandom;
            shuffled.shuffle(&mut rng);
            let a = pp.score(t, &c(&xs)).unwrap();
            let b = pp.score(t, &c(&shuffled)).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn dedup_inverts_duplicate(xs in proptest::collection::vec(0u8..3, 0..6)) {
            let cfg = c(&xs.iter().map(|x| f64::from(*x)).collect::<Vec<_>>());
            prop_assert_eq!(dedup(&duplicate(&cfg)).unwrap(), cfg.clone());
            let text = cfg.to_string();
            prop_assert_eq!(text.parse::<Configuration>().unwrap(), cfg);
        }
    }
}
