//! Random permutation of an ordered vector of points.

use rand::{Rng, RngCore};

use crate::error::{domain, Error, Result};
use crate::measures::{ContinuousFamily, ParamValue, Point, ScoreValue};

use super::Limits;

/// Distribution of the permutation `σ` over `Sym(n)`.
#[derive(Clone, Debug, PartialEq)]
pub enum PermutationDist {
    Uniform,
    Identity,
    /// Explicit `(σ, π(σ))` pairs, `σ` as a zero-based image vector.
    Table(Vec<(Vec<usize>, f64)>),
}

#[derive(Clone, Debug)]
pub struct PermutationKernel {
    n: usize,
    dist: PermutationDist,
}

fn is_permutation(sigma: &[usize], n: usize) -> bool {
    if sigma.len() != n {
        return false;
    }
    let mut seen = vec![false; n];
    for &i in sigma {
        if i >= n || seen[i] {
            return false;
        }
        seen[i] = true;
    }
    true
}

/// Advance to the next permutation in lexicographic order.
fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

impl PermutationKernel {
    pub fn new(n: usize, dist: PermutationDist) -> Result<Self> {
        if n == 0 {
            return Err(domain("permutation kernel needs n >= 1"));
        }
        if let PermutationDist::Table(rows) = &dist {
            if rows.is_empty() {
                return Err(domain("permutation table is empty"));
            }
            for (sigma, p) in rows {
                if !is_permutation(sigma, n) {
                    return Err(domain(format!("{sigma:?} is not a permutation of 0..{n}")));
                }
                if !(*p >= 0.0) {
                    return Err(domain("permutation probabilities must be nonnegative"));
                }
            }
            let total: f64 = rows.iter().map(|r| r.1).sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(domain(format!("permutation probabilities sum to {total}")));
            }
        }
        Ok(PermutationKernel { n, dist })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dist(&self) -> &PermutationDist {
        &self.dist
    }

    pub fn describe(&self) -> String {
        let d = match &self.dist {
            PermutationDist::Uniform => "uniform".to_string(),
            PermutationDist::Identity => "identity".to_string(),
            PermutationDist::Table(rows) => format!("table[{}]", rows.len()),
        };
        format!("permutation(n={} dist={d})", self.n)
    }

    /// Support of the permutation distribution with its weights.
    pub fn support(&self, limits: &Limits) -> Result<Vec<(Vec<usize>, f64)>> {
        match &self.dist {
            PermutationDist::Identity => Ok(vec![((0..self.n).collect(), 1.0)]),
            PermutationDist::Table(rows) => Ok(rows.clone()),
            PermutationDist::Uniform => {
                if self.n > limits.permutation {
                    return Err(Error::EnumerationLimit {
                        what: "permutation group",
                        size: self.n,
                        limit: limits.permutation,
                    });
                }
                let mut sigma: Vec<usize> = (0..self.n).collect();
                let mut all = vec![sigma.clone()];
                while next_permutation(&mut sigma) {
                    all.push(sigma.clone());
                }
                let w = 1.0 / all.len() as f64;
                Ok(all.into_iter().map(|s| (s, w)).collect())
            }
        }
    }

    fn draw(&self, rng: &mut dyn RngCore) -> Vec<usize> {
        match &self.dist {
            PermutationDist::Identity => (0..self.n).collect(),
            PermutationDist::Uniform => {
                // Fisher–Yates.
                let mut sigma: Vec<usize> = (0..self.n).collect();
                for i in (1..self.n).rev() {
                    let j = rng.random_range(0..=i);
                    sigma.swap(i, j);
                }
                sigma
            }
            PermutationDist::Table(rows) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (sigma, p) in rows {
                    acc += p;
                    if u < acc {
                        return sigma.clone();
                    }
                }
                rows.iter().rev().find(|r| r.1 > 0.0).unwrap_or(&rows[0]).0.clone()
            }
        }
    }

    /// `(x_{σ(1)}, …, x_{σ(n)})` with `σ` drawn from the kernel.
    pub fn apply(&self, x: &[Point], rng: &mut dyn RngCore) -> Result<Vec<Point>> {
        if x.len() != self.n {
            return Err(domain(format!("vector of length {} for permutation kernel of size {}", x.len(), self.n)));
        }
        let sigma = self.draw(rng);
        Ok(sigma.iter().map(|&i| x[i].clone()).collect())
    }
}

/// Pre-image `x` with `x_{σ(i)} = x'_i`, flattened.
fn unpermute(x_obs: &[Point], sigma: &[usize]) -> Vec<f64> {
    let mut x: Vec<&Point> = vec![&x_obs[0]; x_obs.len()];
    for (i, &s) in sigma.iter().enumerate() {
        x[s] = &x_obs[i];
    }
    x.into_iter().flatten().copied().collect()
}

fn check_shape(family: &dyn ContinuousFamily, kernel: &PermutationKernel, x_obs: &[Point]) -> Result<()> {
    if x_obs.len() != kernel.n {
        return Err(domain(format!("observed vector has {} points, kernel expects {}", x_obs.len(), kernel.n)));
    }
    let d = x_obs.first().map_or(0, Vec::len);
    if x_obs.iter().any(|p| p.len() != d) || d * kernel.n != family.dim() {
        return Err(domain(format!(
            "{} points of dimension {d} do not match family {} of dimension {}",
            kernel.n,
            family.name(),
            family.dim()
        )));
    }
    Ok(())
}

/// Log density of the permuted vector: `log Σ_σ π(σ) p_θ(x'∘σ⁻¹)`.
pub fn permuted_log_density(
    family: &dyn ContinuousFamily,
    kernel: &PermutationKernel,
    theta: f64,
    x_obs: &[Point],
    limits: &Limits,
) -> Result<f64> {
    check_shape(family, kernel, x_obs)?;
    let terms: Vec<f64> = kernel
        .support(limits)?
        .iter()
        .map(|(sigma, w)| w.ln() + family.log_density(theta, &unpermute(x_obs, sigma)))
        .collect();
    Ok(log_sum_exp(&terms))
}

pub(crate) fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// Exact score of the permuted vector,
/// `Σ_σ π(σ) ∂θ p_θ(x'∘σ⁻¹) / Σ_σ π(σ) p_θ(x'∘σ⁻¹)`,
/// evaluated as a softmax-weighted average of per-permutation scores.
pub fn marginal_score_permuted(
    family: &dyn ContinuousFamily,
    kernel: &PermutationKernel,
    theta: ParamValue,
    x_obs: &[Point],
    limits: &Limits,
) -> Result<ScoreValue> {
    check_shape(family, kernel, x_obs)?;
    let t = theta.value();
    let mut logs = Vec::new();
    let mut scores = Vec::new();
    for (sigma, w) in kernel.support(limits)? {
        if w <= 0.0 {
            continue;
        }
        let x = unpermute(x_obs, &sigma);
        let lp = family.log_density(t, &x);
        if lp == f64::NEG_INFINITY {
            continue;
        }
        logs.push(w.ln() + lp);
        scores.push(family.dtheta_log_density(t, &x));
    }
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return Ok(ScoreValue::undefined());
    }
    let mut den = 0.0;
    let mut num = 0.0;
    for (l, s) in logs.iter().zip(&scores) {
        let w = (l - m).exp();
        den += w;
        num += w * s;
    }
    Ok(ScoreValue::new(num / den))
}
