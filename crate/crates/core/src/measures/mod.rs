//! Parametric families of probability measures and their scores.
//!
//! A family is either *continuous* (a density with respect to Lebesgue
//! measure, with an analytic `∂θ log p`) or *atomic* (finitely many atoms whose
//! masses depend on θ). In both cases the score is the Radon–Nikodym
//! derivative of the weak derivative `P'_θ` with respect to `P_θ`; for atomic
//! families this is `dtheta_mass / mass` on each atom, and it is set to zero
//! (and flagged undefined) wherever it is not uniquely defined.

mod families;

pub use families::{
    Categorical, GaussianLocation, GaussianPair, GaussianScale, GaussianVector, TwoPoint,
    UniformBox,
};

use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore};

use crate::error::{domain, Error, Result};
use crate::quadrature;

pub type Point = Vec<f64>;

/// A parameter value inside an open interval `(lo, hi)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParamValue {
    theta: f64,
    lo: f64,
    hi: f64,
}

impl ParamValue {
    pub fn new(theta: f64, lo: f64, hi: f64) -> Result<Self> {
        if !theta.is_finite() || !(lo < theta && theta < hi) {
            return Err(domain(format!("theta = {theta} outside ({lo}, {hi})")));
        }
        Ok(ParamValue { theta, lo, hi })
    }

    pub fn unbounded(theta: f64) -> Result<Self> {
        Self::new(theta, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn value(&self) -> f64 {
        self.theta
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// `theta + delta`, required to stay inside the domain.
    pub fn shifted(&self, delta: f64) -> Result<Self> {
        Self::new(self.theta + delta, self.lo, self.hi)
    }

    /// Intersect the domain with another one (e.g. cardinality and spatial parts).
    pub fn restrict(&self, lo: f64, hi: f64) -> Result<Self> {
        Self::new(self.theta, self.lo.max(lo), self.hi.min(hi))
    }
}

/// A score value; `defined == false` forces `value == 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoreValue {
    value: f64,
    defined: bool,
}

impl ScoreValue {
    pub fn new(value: f64) -> Self {
        if value.is_finite() {
            ScoreValue { value, defined: true }
        } else {
            Self::undefined()
        }
    }

    pub fn undefined() -> Self {
        ScoreValue { value: 0.0, defined: false }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn is_defined(&self) -> bool {
        self.defined
    }
}

/// A family with a density on `R^dim`.
pub trait ContinuousFamily: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    /// Open parameter domain.
    fn domain(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }
    fn log_density(&self, theta: f64, x: &[f64]) -> f64;
    fn dtheta_log_density(&self, theta: f64, x: &[f64]) -> f64;
    fn sample(&self, theta: f64, rng: &mut dyn RngCore) -> Point;
    /// Truncated integration window for one-dimensional families.
    fn window(&self, _theta: f64) -> Option<(f64, f64)> {
        None
    }
    /// Closed-form Fisher information, when known.
    fn fisher_information(&self, _theta: f64) -> Option<f64> {
        None
    }
    fn theta_free(&self) -> bool {
        false
    }
}

/// A family supported on finitely many atoms.
pub trait AtomicFamily: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;
    fn domain(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }
    fn atoms(&self) -> &[Point];
    fn mass(&self, theta: f64, atom: usize) -> f64;
    fn dtheta_mass(&self, theta: f64, atom: usize) -> f64;
    fn theta_free(&self) -> bool {
        false
    }

    fn atom_index(&self, x: &[f64]) -> Option<usize> {
        self.atoms().iter().position(|a| a.as_slice() == x)
    }
}

/// The spatial law of a point process: continuous or atomic.
#[derive(Clone, Debug)]
pub enum SpatialFamily {
    Continuous(Arc<dyn ContinuousFamily>),
    Atomic(Arc<dyn AtomicFamily>),
}

impl SpatialFamily {
    pub fn name(&self) -> &str {
        match self {
            SpatialFamily::Continuous(f) => f.name(),
            SpatialFamily::Atomic(f) => f.name(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SpatialFamily::Continuous(f) => f.dim(),
            SpatialFamily::Atomic(f) => f.atoms().first().map_or(1, Vec::len),
        }
    }

    pub fn domain(&self) -> (f64, f64) {
        match self {
            SpatialFamily::Continuous(f) => f.domain(),
            SpatialFamily::Atomic(f) => f.domain(),
        }
    }

    pub fn is_atomic(&self) -> bool {
        matches!(self, SpatialFamily::Atomic(_))
    }

    pub fn as_atomic(&self) -> Option<&Arc<dyn AtomicFamily>> {
        match self {
            SpatialFamily::Atomic(f) => Some(f),
            SpatialFamily::Continuous(_) => None,
        }
    }

    pub fn theta_free(&self) -> bool {
        match self {
            SpatialFamily::Continuous(f) => f.theta_free(),
            SpatialFamily::Atomic(f) => f.theta_free(),
        }
    }

    /// Score at `x`; undefined off the support.
    pub fn score(&self, theta: f64, x: &[f64]) -> ScoreValue {
        match self {
            SpatialFamily::Continuous(f) => continuous_score(f.as_ref(), theta, x),
            SpatialFamily::Atomic(f) => match f.atom_index(x) {
                Some(i) => atomic_score(f.as_ref(), theta, i),
                None => ScoreValue::undefined(),
            },
        }
    }

    /// Log mass (atomic) or log density (continuous); `-inf` off the support.
    pub fn log_density(&self, theta: f64, x: &[f64]) -> f64 {
        match self {
            SpatialFamily::Continuous(f) => f.log_density(theta, x),
            SpatialFamily::Atomic(f) => match f.atom_index(x) {
                Some(i) => f.mass(theta, i).ln(),
                None => f64::NEG_INFINITY,
            },
        }
    }

    pub fn sample(&self, theta: f64, rng: &mut dyn RngCore) -> Point {
        match self {
            SpatialFamily::Continuous(f) => f.sample(theta, rng),
            SpatialFamily::Atomic(f) => {
                let u: f64 = rng.random();
                let atoms = f.atoms();
                let mut acc = 0.0;
                for i in 0..atoms.len() {
                    acc += f.mass(theta, i);
                    if u < acc {
                        return atoms[i].clone();
                    }
                }
                // u landed in the rounding gap above the cumulative sum.
                let last = (0..atoms.len()).rev().find(|&i| f.mass(theta, i) > 0.0);
                atoms[last.unwrap_or(atoms.len() - 1)].clone()
            }
        }
    }

    /// Fisher information of a single draw: exact atom sum, or the family's
    /// closed form for continuous families.
    pub fn fisher_information(&self, theta: f64) -> Option<f64> {
        match self {
            SpatialFamily::Continuous(f) => f.fisher_information(theta),
            SpatialFamily::Atomic(f) => Some(
                (0..f.atoms().len())
                    .map(|i| {
                        let m = f.mass(theta, i);
                        if m > 0.0 {
                            let s = f.dtheta_mass(theta, i) / m;
                            m * s * s
                        } else {
                            0.0
                        }
                    })
                    .sum(),
            ),
        }
    }

    /// Expectation of `f` under `P_θ`: exact atom sum, or quadrature over the
    /// family window for one-dimensional continuous families.
    pub fn expectation(&self, theta: f64, f: &dyn Fn(&[f64]) -> f64) -> Result<f64> {
        match self {
            SpatialFamily::Atomic(fam) => Ok(fam
                .atoms()
                .iter()
                .enumerate()
                .map(|(i, a)| fam.mass(theta, i) * f(a))
                .sum()),
            SpatialFamily::Continuous(fam) => {
                let (lo, hi) = one_d_window(fam.as_ref(), theta)?;
                quadrature::integrate(
                    |x| {
                        let lp = fam.log_density(theta, &[x]);
                        if lp == f64::NEG_INFINITY {
                            0.0
                        } else {
                            lp.exp() * f(&[x])
                        }
                    },
                    lo,
                    hi,
                    QUADRATURE_TOL,
                )
            }
        }
    }
}

pub(crate) const QUADRATURE_TOL: f64 = 1e-13;

fn one_d_window(fam: &dyn ContinuousFamily, theta: f64) -> Result<(f64, f64)> {
    if fam.dim() != 1 {
        return Err(Error::Unsupported(format!(
            "quadrature needs a one-dimensional family, {} has dim {}",
            fam.name(),
            fam.dim()
        )));
    }
    fam.window(theta).ok_or_else(|| {
        Error::Unsupported(format!("family {} has no integration window", fam.name()))
    })
}

fn continuous_score(family: &dyn ContinuousFamily, theta: f64, x: &[f64]) -> ScoreValue {
    let lp = family.log_density(theta, x);
    if !lp.is_finite() {
        return ScoreValue::undefined();
    }
    ScoreValue::new(family.dtheta_log_density(theta, x))
}

fn atomic_score(family: &dyn AtomicFamily, theta: f64, atom: usize) -> ScoreValue {
    let m = family.mass(theta, atom);
    if m > 0.0 {
        ScoreValue::new(family.dtheta_mass(theta, atom) / m)
    } else {
        ScoreValue::undefined()
    }
}

/// Score `∂θ log p_θ(x)` of a continuous family; undefined where `p_θ(x) = 0`.
pub fn score_continuous(family: &dyn ContinuousFamily, theta: ParamValue, x: &[f64]) -> Result<ScoreValue> {
    if x.len() != family.dim() {
        return Err(domain(format!(
            "point of dimension {} for family {} of dimension {}",
            x.len(),
            family.name(),
            family.dim()
        )));
    }
    Ok(continuous_score(family, theta.value(), x))
}

/// Score `dtheta_mass / mass` at an atom of an atomic family.
pub fn score_atomic(family: &dyn AtomicFamily, theta: ParamValue, atom: &[f64]) -> Result<ScoreValue> {
    let i = family
        .atom_index(atom)
        .ok_or_else(|| domain(format!("{atom:?} is not an atom of {}", family.name())))?;
    Ok(atomic_score(family, theta.value(), i))
}

/// Joint score of `(X, Y)` from the score of `X` and the conditional score of `Y | X`.
pub fn product_score(score_x: ScoreValue, score_y_given_x: ScoreValue) -> ScoreValue {
    if score_x.is_defined() && score_y_given_x.is_defined() {
        ScoreValue::new(score_x.value() + score_y_given_x.value())
    } else {
        ScoreValue::undefined()
    }
}

/// Central finite-difference step `1e-6 · max(1, |θ|)`.
pub fn fd_step(theta: f64) -> f64 {
    1e-6 * theta.abs().max(1.0)
}

/// Central finite difference of `log p_θ(x)` in θ.
pub fn fd_log_density(family: &dyn ContinuousFamily, theta: f64, x: &[f64]) -> f64 {
    let h = fd_step(theta);
    (family.log_density(theta + h, x) - family.log_density(theta - h, x)) / (2.0 * h)
}

/// Residual of the weak-differentiability limit against a bounded test function:
/// `| (E_{θ+ε} f − E_{θ−ε} f) / 2ε − E_θ[f · score] |`.
pub fn weak_derivative_residual(
    family: &SpatialFamily,
    theta: ParamValue,
    test_fn: &dyn Fn(&[f64]) -> f64,
    eps: f64,
) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(domain(format!("eps = {eps} must be positive")));
    }
    let up = theta.shifted(eps)?.value();
    let down = theta.shifted(-eps)?.value();
    let t = theta.value();

    let (difference, derivative) = match family {
        SpatialFamily::Atomic(fam) => {
            let mut difference = 0.0;
            let mut derivative = 0.0;
            for (i, a) in fam.atoms().iter().enumerate() {
                let fx = test_fn(a);
                difference += (fam.mass(up, i) - fam.mass(down, i)) * fx;
                let s = atomic_score(fam.as_ref(), t, i);
                derivative += fam.mass(t, i) * fx * s.value();
            }
            (difference, derivative)
        }
        SpatialFamily::Continuous(fam) => {
            // One window covering θ±ε so all three integrals share a partition.
            let (lo_a, hi_a) = one_d_window(fam.as_ref(), down)?;
            let (lo_b, hi_b) = one_d_window(fam.as_ref(), up)?;
            let (lo, hi) = (lo_a.min(lo_b), hi_a.max(hi_b));
            let density = |th: f64, x: f64| {
                let lp = fam.log_density(th, &[x]);
                if lp == f64::NEG_INFINITY {
                    0.0
                } else {
                    lp.exp()
                }
            };
            let difference = quadrature::integrate(
                |x| test_fn(&[x]) * (density(up, x) - density(down, x)),
                lo,
                hi,
                QUADRATURE_TOL,
            )?;
            let derivative = quadrature::integrate(
                |x| {
                    let p = density(t, x);
                    if p == 0.0 {
                        0.0
                    } else {
                        test_fn(&[x]) * p * fam.dtheta_log_density(t, &[x])
                    }
                },
                lo,
                hi,
                QUADRATURE_TOL,
            )?;
            (difference, derivative)
        }
    };
    Ok((difference / (2.0 * eps) - derivative).abs())
}
