//! Shipped parametric families.

use std::f64::consts::PI;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};

use super::{AtomicFamily, ContinuousFamily, Point};
use crate::error::{domain, Result};

const WINDOW_SIGMAS: f64 = 12.0;

fn ln_sqrt_2pi() -> f64 {
    0.5 * (2.0 * PI).ln()
}

fn normal(rng: &mut dyn RngCore) -> f64 {
    StandardNormal.sample(rng)
}

/// Two atoms with mass θ on the first and 1 − θ on the second, θ ∈ (0, 1).
///
/// With atoms `(-x, x)` this is the Bernoulli–Dirac family
/// `θ δ_{-x} + (1 − θ) δ_x`, whose derivative is `δ_{-x} − δ_x`.
#[derive(Debug, Clone)]
pub struct TwoPoint {
    atoms: [Point; 2],
}

impl TwoPoint {
    pub fn new(first: Point, second: Point) -> Result<Self> {
        if first == second || first.len() != second.len() || first.is_empty() {
            return Err(domain("two-point family needs two distinct atoms of equal dimension"));
        }
        Ok(TwoPoint { atoms: [first, second] })
    }

    pub fn bernoulli_dirac(x: f64) -> Self {
        assert!(x != 0.0, "Bernoulli-Dirac atoms -x and x coincide for x = 0");
        TwoPoint { atoms: [vec![-x], vec![x]] }
    }
}

impl AtomicFamily for TwoPoint {
    fn name(&self) -> &str {
        "two_point"
    }

    fn domain(&self) -> (f64, f64) {
        (0.0, 1.0)
    }

    fn atoms(&self) -> &[Point] {
        &self.atoms
    }

    fn mass(&self, theta: f64, atom: usize) -> f64 {
        if atom == 0 {
            theta
        } else {
            1.0 - theta
        }
    }

    fn dtheta_mass(&self, _theta: f64, atom: usize) -> f64 {
        if atom == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// θ-free distribution over a finite set of atoms (clutter, fixed kernels).
#[derive(Debug, Clone)]
pub struct Categorical {
    atoms: Vec<Point>,
    probs: Vec<f64>,
}

impl Categorical {
    pub fn new(atoms: Vec<Point>, probs: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != probs.len() {
            return Err(domain("categorical needs one probability per atom"));
        }
        let d = atoms[0].len();
        if d == 0 || atoms.iter().any(|a| a.len() != d) {
            return Err(domain("categorical atoms must share a positive dimension"));
        }
        for (i, a) in atoms.iter().enumerate() {
            if atoms[..i].contains(a) {
                return Err(domain(format!("duplicate atom {a:?}")));
            }
        }
        if probs.iter().any(|p| !(*p >= 0.0)) {
            return Err(domain("categorical probabilities must be nonnegative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(domain(format!("categorical probabilities sum to {total}")));
        }
        Ok(Categorical { atoms, probs })
    }

    pub fn uniform(atoms: Vec<Point>) -> Result<Self> {
        let n = atoms.len().max(1);
        Self::new(atoms, vec![1.0 / n as f64; n])
    }
}

impl AtomicFamily for Categorical {
    fn name(&self) -> &str {
        "categorical"
    }

    fn atoms(&self) -> &[Point] {
        &self.atoms
    }

    fn mass(&self, _theta: f64, atom: usize) -> f64 {
        self.probs[atom]
    }

    fn dtheta_mass(&self, _theta: f64, _atom: usize) -> f64 {
        0.0
    }

    fn theta_free(&self) -> bool {
        true
    }
}

/// `N(θ, σ²)` on the real line.
#[derive(Debug, Clone)]
pub struct GaussianLocation {
    sigma: f64,
}

impl GaussianLocation {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(domain(format!("sigma = {sigma} must be positive")));
        }
        Ok(GaussianLocation { sigma })
    }
}

impl ContinuousFamily for GaussianLocation {
    fn name(&self) -> &str {
        "gaussian_location"
    }

    fn dim(&self) -> usize {
        1
    }

    fn log_density(&self, theta: f64, x: &[f64]) -> f64 {
        let z = (x[0] - theta) / self.sigma;
        -0.5 * z * z - self.sigma.ln() - ln_sqrt_2pi()
    }

    fn dtheta_log_density(&self, theta: f64, x: &[f64]) -> f64 {
        (x[0] - theta) / (self.sigma * self.sigma)
    }

    fn sample(&self, theta: f64, rng: &mut dyn RngCore) -> Point {
        vec![theta + self.sigma * normal(rng)]
    }

    fn window(&self, theta: f64) -> Option<(f64, f64)> {
        Some((theta - WINDOW_SIGMAS * self.sigma, theta + WINDOW_SIGMAS * self.sigma))
    }

    fn fisher_information(&self, _theta: f64) -> Option<f64> {
        Some(1.0 / (self.sigma * self.sigma))
    }
}

/// `N(m, θ²)` with θ > 0.
#[derive(Debug, Clone)]
pub struct GaussianScale {
    mean: f64,
}

impl GaussianScale {
    pub fn new(mean: f64) -> Self {
        GaussianScale { mean }
    }
}

impl ContinuousFamily for GaussianScale {
    fn name(&self) -> &str {
        "gaussian_scale"
    }

    fn dim(&self) -> usize {
        1
    }

    fn domain(&self) -> (f64, f64) {
        (0.0, f64::INFINITY)
    }

    fn log_density(&self, theta: f64, x: &[f64]) -> f64 {
        let z = (x[0] - self.mean) / theta;
        -0.5 * z * z - theta.ln() - ln_sqrt_2pi()
    }

    fn dtheta_log_density(&self, theta: f64, x: &[f64]) -> f64 {
        let d = x[0] - self.mean;
        -1.0 / theta + d * d / (theta * theta * theta)
    }

    fn sample(&self, theta: f64, rng: &mut dyn RngCore) -> Point {
        vec![self.mean + theta * normal(rng)]
    }

    fn window(&self, theta: f64) -> Option<(f64, f64)> {
        Some((self.mean - WINDOW_SIGMAS * theta, self.mean + WINDOW_SIGMAS * theta))
    }

    fn fisher_information(&self, theta: f64) -> Option<f64> {
        Some(2.0 / (theta * theta))
    }
}

/// Two independent coordinates `X₁ ~ N(θ, σ²)`, `X₂ ~ N(−θ, σ²)`.
///
/// Not exchangeable: permuting the coordinates hides the sign of θ.
#[derive(Debug, Clone)]
pub struct GaussianPair {
    sigma: f64,
}

impl GaussianPair {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(domain(format!("sigma = {sigma} must be positive")));
        }
        Ok(GaussianPair { sigma })
    }
}

impl ContinuousFamily for GaussianPair {
    fn name(&self) -> &str {
        "gaussian_pair"
    }

    fn dim(&self) -> usize {
        2
    }

    fn log_density(&self, theta: f64, x: &[f64]) -> f64 {
        let a = (x[0] - theta) / self.sigma;
        let b = (x[1] + theta) / self.sigma;
        -0.5 * (a * a + b * b) - 2.0 * (self.sigma.ln() + ln_sqrt_2pi())
    }

    fn dtheta_log_density(&self, theta: f64, x: &[f64]) -> f64 {
        ((x[0] - theta) - (x[1] + theta)) / (self.sigma * self.sigma)
    }

    fn sample(&self, theta: f64, rng: &mut dyn RngCore) -> Point {
        vec![theta + self.sigma * normal(rng), -theta + self.sigma * normal(rng)]
    }

    fn fisher_information(&self, _theta: f64) -> Option<f64> {
        Some(2.0 / (self.sigma * self.sigma))
    }
}

/// `n` i.i.d. coordinates `N(θ, σ²)`; exchangeable.
#[derive(Debug, Clone)]
pub struct GaussianVector {
    n: usize,
    sigma: f64,
}

impl GaussianVector {
    pub fn new(n: usize, sigma: f64) -> Result<Self> {
        if n == 0 || !(sigma > 0.0 && sigma.is_finite()) {
            return Err(domain("gaussian vector needs n >= 1 and sigma > 0"));
        }
        Ok(GaussianVector { n, sigma })
    }
}

impl ContinuousFamily for GaussianVector {
    fn name(&self) -> &str {
        "gaussian_vector"
    }

    fn dim(&self) -> usize {
        self.n
    }

    fn log_density(&self, theta: f64, x: &[f64]) -> f64 {
        let q: f64 = x.iter().map(|v| ((v - theta) / self.sigma).powi(2)).sum();
        -0.5 * q - self.n as f64 * (self.sigma.ln() + ln_sqrt_2pi())
    }

    fn dtheta_log_density(&self, theta: f64, x: &[f64]) -> f64 {
        x.iter().map(|v| v - theta).sum::<f64>() / (self.sigma * self.sigma)
    }

    fn sample(&self, theta: f64, rng: &mut dyn RngCore) -> Point {
        (0..self.n).map(|_| theta + self.sigma * normal(rng)).collect()
    }

    fn fisher_information(&self, _theta: f64) -> Option<f64> {
        Some(self.n as f64 / (self.sigma * self.sigma))
    }
}

/// θ-free uniform law on the box `[lo, hi]^dim`.
#[derive(Debug, Clone)]
pub struct UniformBox {
    lo: f64,
    hi: f64,
    dim: usize,
}

impl UniformBox {
    pub fn new(lo: f64, hi: f64, dim: usize) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() || dim == 0 {
            return Err(domain("uniform box needs finite lo < hi and dim >= 1"));
        }
        Ok(UniformBox { lo, hi, dim })
    }
}

impl ContinuousFamily for UniformBox {
    fn name(&self) -> &str {
        "uniform_box"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density(&self, _theta: f64, x: &[f64]) -> f64 {
        if x.iter().all(|v| (self.lo..=self.hi).contains(v)) {
            -(self.dim as f64) * (self.hi - self.lo).ln()
        } else {
            f64::NEG_INFINITY
        }
    }

    fn dtheta_log_density(&self, _theta: f64, _x: &[f64]) -> f64 {
        0.0
    }

    fn sample(&self, _theta: f64, rng: &mut dyn RngCore) -> Point {
        (0..self.dim).map(|_| self.lo + (self.hi - self.lo) * rng.random::<f64>()).collect()
    }

    fn window(&self, _theta: f64) -> Option<(f64, f64)> {
        (self.dim == 1).then_some((self.lo, self.hi))
    }

    fn fisher_information(&self, _theta: f64) -> Option<f64> {
        Some(0.0)
    }

    fn theta_free(&self) -> bool {
        true
    }
}
