//! Exact Fisher information over finite outcome spaces.

use std::sync::Arc;

use serde::Serialize;

use super::{pairwise_sum, FisherEstimate, Method};
use crate::error::{domain, Error, Result};
use crate::kernels::{Limits, ObservedModel};
use crate::measures::{AtomicFamily, ParamValue, Point, ScoreValue, SpatialFamily};
use crate::pointproc::{binomial_coefficients, compositions, duplicate, Configuration, IIDPointProcess};

/// One outcome: its probability and the score there.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Outcome {
    pub prob: f64,
    pub score: ScoreValue,
}

/// A model whose outcome space can be listed exhaustively.
pub trait EnumerableModel {
    fn outcomes(&self, theta: ParamValue, limits: &Limits) -> Result<Vec<Outcome>>;
}

fn check_outcomes(outcomes: &[Outcome]) -> Result<()> {
    if let Some(o) = outcomes.iter().find(|o| o.prob > 0.0 && !o.score.is_defined()) {
        return Err(Error::Numeric(format!("outcome with probability {} has an undefined score", o.prob)));
    }
    Ok(())
}

/// `Σ p(x) S(x)²`.
pub fn fisher_enumerate(model: &dyn EnumerableModel, theta: ParamValue, limits: &Limits) -> Result<FisherEstimate> {
    let outcomes = model.outcomes(theta, limits)?;
    check_outcomes(&outcomes)?;
    let terms: Vec<f64> = outcomes.iter().map(|o| o.prob * o.score.value() * o.score.value()).collect();
    Ok(FisherEstimate { value: pairwise_sum(&terms), std_error: 0.0, samples: outcomes.len() as u64, method: Method::Enumeration })
}

/// `Σ p(x) S(x)`, zero for a valid score.
pub fn mean_score_enumerate(model: &dyn EnumerableModel, theta: ParamValue, limits: &Limits) -> Result<f64> {
    let outcomes = model.outcomes(theta, limits)?;
    check_outcomes(&outcomes)?;
    let terms: Vec<f64> = outcomes.iter().map(|o| o.prob * o.score.value()).collect();
    Ok(pairwise_sum(&terms))
}

impl EnumerableModel for SpatialFamily {
    fn outcomes(&self, theta: ParamValue, _limits: &Limits) -> Result<Vec<Outcome>> {
        let fam = self
            .as_atomic()
            .ok_or_else(|| Error::Unsupported(format!("cannot enumerate continuous family {}", self.name())))?;
        let t = theta.value();
        Ok(fam
            .atoms()
            .iter()
            .enumerate()
            .map(|(i, a)| Outcome { prob: fam.mass(t, i), score: self.score(t, a) })
            .filter(|o| o.prob > 0.0)
            .collect())
    }
}

fn multisets(atoms: &[Point], dim: usize, n_max: usize, limit: usize) -> Result<Vec<Configuration>> {
    let mut counts = Vec::new();
    for n in 0..=n_max {
        compositions(n, atoms.len(), &mut counts);
        if counts.len() > limit {
            return Err(Error::EnumerationLimit { what: "observed outcomes", size: counts.len(), limit });
        }
    }
    counts
        .into_iter()
        .map(|c| {
            let mut pts = Vec::new();
            for (a, m) in atoms.iter().zip(c) {
                pts.extend(std::iter::repeat_n(a.clone(), m));
            }
            Configuration::new(dim, pts)
        })
        .collect()
}

/// `n! / Π m_a!`: ordered tuples behind one multiset.
fn orderings(config: &Configuration) -> f64 {
    let mut placed = 0;
    let mut ways = 1.0;
    for (_, m) in config.multiplicities() {
        placed += m;
        ways *= binomial_coefficients(placed)[m];
    }
    ways
}

fn atomic_of<'a>(spatial: &'a SpatialFamily, role: &str) -> Result<&'a Arc<dyn AtomicFamily>> {
    spatial
        .as_atomic()
        .ok_or_else(|| Error::Unsupported(format!("exact enumeration needs an atomic {role} spatial law")))
}

/// Every observable multiset of a reduced observed model with its probability
/// and score.
pub fn enumerate_observed(model: &ObservedModel, theta: ParamValue, limits: &Limits) -> Result<Vec<(Configuration, Outcome)>> {
    let target = atomic_of(&model.source.spatial, "target")?;
    let mut atoms: Vec<Point> = target.atoms().to_vec();
    let mut n_max = model.target_pmf(theta)?.n_max();
    if let Some(c) = &model.clutter {
        for a in atomic_of(c.spatial(), "clutter")?.atoms() {
            if !atoms.contains(a) {
                atoms.push(a.clone());
            }
        }
        n_max += c.pmf().n_max();
    }
    let mut out = Vec::new();
    for base in multisets(&atoms, model.source.dim(), n_max, limits.outcomes)? {
        let y = if model.duplicated { duplicate(&base) } else { base.clone() };
        let eval = model.evaluate(theta, &y, limits)?;
        if eval.log_density == f64::NEG_INFINITY {
            continue;
        }
        let prob = eval.log_density.exp() * orderings(&base);
        if prob > 0.0 {
            out.push((y, Outcome { prob, score: eval.score }));
        }
    }
    Ok(out)
}

impl EnumerableModel for ObservedModel {
    fn outcomes(&self, theta: ParamValue, limits: &Limits) -> Result<Vec<Outcome>> {
        Ok(enumerate_observed(self, theta, limits)?.into_iter().map(|(_, o)| o).collect())
    }
}

impl EnumerableModel for IIDPointProcess {
    fn outcomes(&self, theta: ParamValue, limits: &Limits) -> Result<Vec<Outcome>> {
        ObservedModel::new(self.clone()).outcomes(theta, limits)
    }
}

/// Hierarchical atomic model: `X ~ μ_θ`, then `Y | X = x_i ~ ν_{θ,i}`.
#[derive(Clone, Debug)]
pub struct AtomicJoint {
    x: Arc<dyn AtomicFamily>,
    y_given_x: Vec<Arc<dyn AtomicFamily>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Additivity {
    pub i_xy: f64,
    pub i_y_given_x: f64,
    pub i_x: f64,
    pub residual: f64,
}

impl AtomicJoint {
    pub fn new(x: Arc<dyn AtomicFamily>, y_given_x: Vec<Arc<dyn AtomicFamily>>) -> Result<Self> {
        if y_given_x.len() != x.atoms().len() {
            return Err(domain(format!(
                "{} conditional families for {} atoms of X",
                y_given_x.len(),
                x.atoms().len()
            )));
        }
        Ok(AtomicJoint { x, y_given_x })
    }

    /// `Y` independent of `X`.
    pub fn independent(x: Arc<dyn AtomicFamily>, y: Arc<dyn AtomicFamily>) -> Self {
        let y_given_x = vec![y; x.atoms().len()];
        AtomicJoint { x, y_given_x }
    }

    fn terms(&self, t: f64) -> Vec<(f64, f64, f64, f64)> {
        let mut out = Vec::new();
        for i in 0..self.x.atoms().len() {
            let px = self.x.mass(t, i);
            if px == 0.0 {
                continue;
            }
            let sx = self.x.dtheta_mass(t, i) / px;
            let y = &self.y_given_x[i];
            for j in 0..y.atoms().len() {
                let q = y.mass(t, j);
                if q > 0.0 {
                    out.push((px, q, sx, y.dtheta_mass(t, j) / q));
                }
            }
        }
        out
    }

    /// `|𝓘_{X,Y} − 𝓘_{Y|X} − 𝓘_X|` with each term summed independently.
    pub fn additivity_residual(&self, theta: ParamValue) -> Additivity {
        let t = theta.value();
        let terms = self.terms(t);
        let joint: Vec<f64> = terms.iter().map(|(p, q, sx, sy)| p * q * (sx + sy) * (sx + sy)).collect();
        let cond: Vec<f64> = terms.iter().map(|(p, q, _, sy)| p * q * sy * sy).collect();
        let marg: Vec<f64> = (0..self.x.atoms().len())
            .map(|i| {
                let p = self.x.mass(t, i);
                if p > 0.0 {
                    let d = self.x.dtheta_mass(t, i);
                    d * d / p
                } else {
                    0.0
                }
            })
            .collect();
        let (i_xy, i_y_given_x, i_x) = (pairwise_sum(&joint), pairwise_sum(&cond), pairwise_sum(&marg));
        Additivity { i_xy, i_y_given_x, i_x, residual: (i_xy - i_y_given_x - i_x).abs() }
    }
}

impl EnumerableModel for AtomicJoint {
    fn outcomes(&self, theta: ParamValue, _limits: &Limits) -> Result<Vec<Outcome>> {
        Ok(self
            .terms(theta.value())
            .into_iter()
            .map(|(p, q, sx, sy)| Outcome { prob: p * q, score: ScoreValue::new(sx + sy) })
            .collect())
    }
}
