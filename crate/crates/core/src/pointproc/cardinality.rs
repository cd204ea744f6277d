//! Cardinality distributions `π_θ(n)` with truncated support.

use std::fmt;

use rand::{Rng, RngCore};
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::measures::ScoreValue;

/// Largest tail mass a truncated cardinality may drop.
pub const TAIL_LIMIT: f64 = 1e-12;

/// `E(N)` and `E(N²)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MomentSummary {
    pub e_n: f64,
    pub e_n2: f64,
}

impl MomentSummary {
    pub fn new(e_n: f64, e_n2: f64) -> Result<Self> {
        if !(e_n >= 0.0) || e_n2 - e_n * e_n < -1e-12 {
            return Err(domain(format!("inconsistent moments E N = {e_n}, E N^2 = {e_n2}")));
        }
        Ok(MomentSummary { e_n, e_n2 })
    }

    pub fn variance(&self) -> f64 {
        self.e_n2 - self.e_n * self.e_n
    }
}

/// A cardinality pmf evaluated at one θ: `probs[n] = π_θ(n)` and
/// `dprobs[n] = ∂θ π_θ(n)` for `n = 0..=n_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct CardinalityPmf {
    probs: Vec<f64>,
    dprobs: Vec<f64>,
    tail: f64,
    theta_dependent: bool,
}

impl CardinalityPmf {
    pub fn new(probs: Vec<f64>, dprobs: Vec<f64>, tail: f64, theta_dependent: bool) -> Result<Self> {
        if probs.is_empty() || probs.len() != dprobs.len() {
            return Err(domain("cardinality pmf needs matching, nonempty probs and dprobs"));
        }
        if probs.iter().any(|p| !(*p >= 0.0)) || dprobs.iter().any(|d| !d.is_finite()) {
            return Err(domain("cardinality probabilities must be finite and nonnegative"));
        }
        if !(tail < TAIL_LIMIT) {
            return Err(Error::Truncation { n_max: probs.len() - 1, tail });
        }
        let total: f64 = probs.iter().sum();
        if (total + tail - 1.0).abs() > 1e-12 {
            return Err(domain(format!("cardinality probabilities sum to {total}")));
        }
        let dprobs = if theta_dependent { dprobs } else { vec![0.0; probs.len()] };
        Ok(CardinalityPmf { probs, dprobs, tail, theta_dependent })
    }

    pub fn theta_free(probs: Vec<f64>) -> Result<Self> {
        let n = probs.len();
        Self::new(probs, vec![0.0; n], 0.0, false)
    }

    pub fn dirac(n: usize) -> Self {
        let mut probs = vec![0.0; n + 1];
        probs[n] = 1.0;
        CardinalityPmf { dprobs: vec![0.0; n + 1], probs, tail: 0.0, theta_dependent: false }
    }

    pub fn n_max(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn prob(&self, n: usize) -> f64 {
        self.probs.get(n).copied().unwrap_or(0.0)
    }

    pub fn dprob(&self, n: usize) -> f64 {
        self.dprobs.get(n).copied().unwrap_or(0.0)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn dprobs(&self) -> &[f64] {
        &self.dprobs
    }

    pub fn tail(&self) -> f64 {
        self.tail
    }

    pub fn is_theta_dependent(&self) -> bool {
        self.theta_dependent
    }

    /// `∂θ log π_θ(n)`; undefined where `π_θ(n) = 0`.
    pub fn score(&self, n: usize) -> ScoreValue {
        let p = self.prob(n);
        if p > 0.0 {
            ScoreValue::new(self.dprob(n) / p)
        } else {
            ScoreValue::undefined()
        }
    }

    /// Fisher information `𝓘_N` of the cardinality alone.
    pub fn fisher_information(&self) -> f64 {
        if !self.theta_dependent {
            return 0.0;
        }
        self.probs
            .iter()
            .zip(&self.dprobs)
            .filter(|(p, _)| **p > 0.0)
            .map(|(p, d)| d * d / p)
            .sum()
    }

    /// Exact `E(N)` and `E(N²)` over the truncated support.
    pub fn moments(&self) -> MomentSummary {
        let mut e_n = 0.0;
        let mut e_n2 = 0.0;
        for (n, p) in self.probs.iter().enumerate() {
            let n = n as f64;
            e_n += n * p;
            e_n2 += n * n * p;
        }
        MomentSummary { e_n, e_n2 }
    }

    /// Inverse-CDF draw on the truncated support.
    pub fn sample(&self, rng: &mut dyn RngCore) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (n, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return n;
            }
        }
        self.probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
    }
}

/// A θ-indexed family of cardinality distributions.
pub trait CardinalityLaw: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;
    fn describe(&self) -> String {
        self.name().to_string()
    }
    fn domain(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }
    fn theta_dependent(&self) -> bool;
    fn pmf(&self, theta: f64) -> Result<CardinalityPmf>;
}

/// `δ_n`.
#[derive(Debug, Clone)]
pub struct Dirac(pub usize);

impl CardinalityLaw for Dirac {
    fn name(&self) -> &str {
        "dirac"
    }

    fn describe(&self) -> String {
        format!("dirac(n={})", self.0)
    }

    fn theta_dependent(&self) -> bool {
        false
    }

    fn pmf(&self, _theta: f64) -> Result<CardinalityPmf> {
        Ok(CardinalityPmf::dirac(self.0))
    }
}

/// θ-free pmf given by a table on `0..len`.
#[derive(Debug, Clone)]
pub struct Tabulated {
    pmf: CardinalityPmf,
}

impl Tabulated {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        Ok(Tabulated { pmf: CardinalityPmf::theta_free(probs)? })
    }
}

impl CardinalityLaw for Tabulated {
    fn name(&self) -> &str {
        "table"
    }

    fn describe(&self) -> String {
        let p: Vec<String> = self.pmf.probs().iter().map(|p| p.to_string()).collect();
        format!("table(probs={})", p.join(" "))
    }

    fn theta_dependent(&self) -> bool {
        false
    }

    fn pmf(&self, _theta: f64) -> Result<CardinalityPmf> {
        Ok(self.pmf.clone())
    }
}

/// Poisson probabilities up to the first `n_max` whose tail is below [`TAIL_LIMIT`].
fn poisson_table(rate: f64) -> (Vec<f64>, f64) {
    if rate == 0.0 {
        return (vec![1.0], 0.0);
    }
    let mut probs = vec![(-rate).exp()];
    loop {
        let n = probs.len();
        // Tail beyond the current table, summed until terms vanish.
        let mut tail = 0.0;
        let mut term = probs[n - 1];
        let mut k = n;
        loop {
            term *= rate / k as f64;
            tail += term;
            if term < 1e-18 * tail.max(1e-300) || term == 0.0 {
                break;
            }
            k += 1;
        }
        if tail < TAIL_LIMIT {
            return (probs, tail);
        }
        let next = probs[n - 1] * rate / n as f64;
        probs.push(next);
    }
}

/// θ-free Poisson(rate), truncated where the tail drops below 1e-12.
#[derive(Debug, Clone)]
pub struct Poisson {
    rate: f64,
}

impl Poisson {
    pub fn new(rate: f64) -> Result<Self> {
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(domain(format!("poisson rate {rate} must be finite and nonnegative")));
        }
        Ok(Poisson { rate })
    }
}

impl CardinalityLaw for Poisson {
    fn name(&self) -> &str {
        "poisson"
    }

    fn describe(&self) -> String {
        format!("poisson(rate={})", self.rate)
    }

    fn theta_dependent(&self) -> bool {
        false
    }

    fn pmf(&self, _theta: f64) -> Result<CardinalityPmf> {
        let (probs, tail) = poisson_table(self.rate);
        let n = probs.len();
        CardinalityPmf::new(probs, vec![0.0; n], tail, false)
    }
}

/// Poisson with rate `scale · θ`, θ > 0.
#[derive(Debug, Clone)]
pub struct PoissonTheta {
    scale: f64,
}

impl PoissonTheta {
    pub fn new(scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(domain(format!("poisson scale {scale} must be positive")));
        }
        Ok(PoissonTheta { scale })
    }
}

impl CardinalityLaw for PoissonTheta {
    fn name(&self) -> &str {
        "poisson_theta"
    }

    fn describe(&self) -> String {
        format!("poisson_theta(scale={})", self.scale)
    }

    fn domain(&self) -> (f64, f64) {
        (0.0, f64::INFINITY)
    }

    fn theta_dependent(&self) -> bool {
        true
    }

    fn pmf(&self, theta: f64) -> Result<CardinalityPmf> {
        let (probs, tail) = poisson_table(self.scale * theta);
        let dprobs = probs
            .iter()
            .enumerate()
            .map(|(n, p)| p * (n as f64 / theta - self.scale))
            .collect();
        CardinalityPmf::new(probs, dprobs, tail, true)
    }
}

/// Binomial(trials, θ), θ ∈ (0, 1).
#[derive(Debug, Clone)]
pub struct BinomialTheta {
    trials: usize,
}

impl BinomialTheta {
    pub fn new(trials: usize) -> Self {
        BinomialTheta { trials }
    }
}

pub(crate) fn binomial_coefficients(n: usize) -> Vec<f64> {
    let mut row = vec![1.0; n + 1];
    for k in 1..n {
        row[k] = row[k - 1] * (n - k + 1) as f64 / k as f64;
    }
    row.iter().map(|c| c.round()).collect()
}

impl CardinalityLaw for BinomialTheta {
    fn name(&self) -> &str {
        "binomial_theta"
    }

    fn describe(&self) -> String {
        format!("binomial_theta(trials={})", self.trials)
    }

    fn domain(&self) -> (f64, f64) {
        (0.0, 1.0)
    }

    fn theta_dependent(&self) -> bool {
        true
    }

    fn pmf(&self, theta: f64) -> Result<CardinalityPmf> {
        let t = self.trials;
        let c = binomial_coefficients(t);
        let probs: Vec<f64> = (0..=t)
            .map(|n| c[n] * theta.powi(n as i32) * (1.0 - theta).powi((t - n) as i32))
            .collect();
        let dprobs = (0..=t)
            .map(|n| {
                let a = if n > 0 { n as f64 * theta.powi(n as i32 - 1) * (1.0 - theta).powi((t - n) as i32) } else { 0.0 };
                let b = if n < t {
                    (t - n) as f64 * theta.powi(n as i32) * (1.0 - theta).powi((t - n) as i32 - 1)
                } else {
                    0.0
                };
                c[n] * (a - b)
            })
            .collect();
        CardinalityPmf::new(probs, dprobs, 0.0, true)
    }
}

/// A cardinality pmf frozen at one θ, exposed through the law interface.
#[derive(Debug, Clone)]
pub struct Fixed(pub CardinalityPmf);

impl CardinalityLaw for Fixed {
    fn name(&self) -> &str {
        "fixed"
    }

    fn theta_dependent(&self) -> bool {
        self.0.is_theta_dependent()
    }

    fn pmf(&self, _theta: f64) -> Result<CardinalityPmf> {
        Ok(self.0.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn moments_examples() {
        let m = Poisson::new(2.0).unwrap().pmf(0.0).unwrap().moments();
        // Truncated tail mass below 1e-12 beyond n = 18 shifts E(N²) by O(1e-10).
        assert!(close(m.e_n, 2.0, 1e-10) && close(m.e_n2, 6.0, 1e-9));
        let m = CardinalityPmf::dirac(2).moments();
        assert_eq!((m.e_n, m.e_n2), (2.0, 4.0));
        let m = Tabulated::new(vec![0.5, 0.5]).unwrap().pmf(0.0).unwrap().moments();
        assert_eq!((m.e_n, m.e_n2), (0.5, 0.5));
    }

    #[test]
    fn poisson_truncation_guard() {
        for rate in [0.0, 0.5, 1.0, 2.0, 5.0, 20.0] {
            let pmf = Poisson::new(rate).unwrap().pmf(0.0).unwrap();
            assert!(pmf.tail() < TAIL_LIMIT);
            assert!(close(pmf.probs().iter().sum::<f64>(), 1.0, 1e-12));
        }
        let short = vec![0.5, 0.3];
        assert!(matches!(CardinalityPmf::new(short, vec![0.0, 0.0], 0.2, false), Err(Error::Truncation { .. })));
    }

    #[test]
    fn theta_dependent_derivatives() {
        let laws: Vec<(Box<dyn CardinalityLaw>, f64)> = vec![
            (Box::new(PoissonTheta::new(2.0).unwrap()), 0.7),
            (Box::new(BinomialTheta::new(4)), 0.3),
        ];
        for (law, t) in laws {
            let pmf = law.pmf(t).unwrap();
            assert!(close(pmf.dprobs().iter().sum::<f64>(), 0.0, 1e-10));
            let h = 1e-6;
            let up = law.pmf(t + h).unwrap();
            let down = law.pmf(t - h).unwrap();
            for n in 0..=pmf.n_max().min(up.n_max()).min(down.n_max()) {
                let fd = (up.prob(n) - down.prob(n)) / (2.0 * h);
                assert!(close(fd, pmf.dprob(n), 1e-8), "{} n={n}", law.name());
            }
        }
    }

    #[test]
    fn binomial_fisher_information() {
        let pmf = BinomialTheta::new(4).pmf(0.3).unwrap();
        assert!(close(pmf.fisher_information(), 4.0 / (0.3 * 0.7), 1e-10));
        assert_eq!(CardinalityPmf::dirac(3).fisher_information(), 0.0);
    }

    #[test]
    fn sampler_matches_pmf() {
        let pmf = Poisson::new(2.0).unwrap().pmf(0.0).unwrap();
        let mut rng = rng::stream(1, 0);
        let m = 100_000;
        let mut counts = vec![0usize; pmf.n_max() + 1];
        for _ in 0..m {
            counts[pmf.sample(&mut rng)] += 1;
        }
        for (n, c) in counts.iter().enumerate() {
            let p = pmf.prob(n);
            let se = (p * (1.0 - p) / m as f64).sqrt();
            assert!((*c as f64 / m as f64 - p).abs() <= 4.0 * se + 1e-12, "bin {n}");
        }
    }
}
