//! Brute-force conditional expectation of the latent score.

use super::{Limits, ObservationKernel};
use crate::error::{Error, Result};
use crate::measures::{ParamValue, ScoreValue};
use crate::pointproc::{binomial_coefficients, compositions, score_with, Configuration, IIDPointProcess};

/// `E[S_θ(Φ) | Ψ = y]` by summing over every latent configuration of an
/// i.i.d. process with an atomic spatial law:
///
/// ```text
/// Σ_x P_θ(x) Q(x, y) S_θ(x) / Σ_x P_θ(x) Q(x, y)
/// ```
///
/// Undefined when `y` has zero marginal probability.
pub fn conditional_score_oracle(
    pp: &IIDPointProcess,
    kernel: &dyn ObservationKernel,
    theta: ParamValue,
    y: &Configuration,
    limits: &Limits,
) -> Result<ScoreValue> {
    let family = pp
        .spatial
        .as_atomic()
        .ok_or_else(|| Error::Unsupported("the latent oracle needs an atomic spatial law".into()))?;
    let atoms = family.atoms();
    let pmf = pp.pmf(theta)?;
    let t = theta.value();
    let mut latent = Vec::new();
    for n in 0..=pmf.n_max() {
        if pmf.prob(n) == 0.0 && pmf.dprob(n) == 0.0 {
            continue;
        }
        let before = latent.len();
        compositions(n, atoms.len(), &mut latent);
        for c in &mut latent[before..] {
            c.push(n);
        }
        if latent.len() > limits.latent {
            return Err(Error::EnumerationLimit { what: "latent configurations", size: latent.len(), limit: limits.latent });
        }
    }
    let (mut num, mut den) = (0.0, 0.0);
    for counts in &latent {
        let n = counts[atoms.len()];
        // Multinomial probability of the multiset.
        let mut p = pmf.prob(n);
        let mut placed = 0usize;
        let mut points = Vec::with_capacity(n);
        for (i, &c) in counts[..atoms.len()].iter().enumerate() {
            let m = family.mass(t, i);
            p *= binomial_coefficients(placed + c)[c] * m.powi(c as i32);
            placed += c;
            points.extend(std::iter::repeat_n(atoms[i].clone(), c));
        }
        if p == 0.0 {
            continue;
        }
        let x = Configuration::new(pp.dim(), points)?;
        let q = kernel.transition_prob(&x, y)?;
        if q == 0.0 {
            continue;
        }
        let s = score_with(&pmf, &pp.spatial, t, &x);
        if !s.is_defined() {
            continue;
        }
        num += p * q * s.value();
        den += p * q;
    }
    if den == 0.0 {
        return Ok(ScoreValue::undefined());
    }
    Ok(ScoreValue::new(num / den))
}
