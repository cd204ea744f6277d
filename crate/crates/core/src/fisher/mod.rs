//! Fisher-information estimators and the diagnostics built on them.
//!
//! `𝓘(θ) = E_θ[S_θ²]` for the weak-derivative score `S_θ = dP′_θ/dP_θ`.

mod enumerate;
mod mc;

pub use enumerate::{
    enumerate_observed, fisher_enumerate, mean_score_enumerate, AtomicJoint, EnumerableModel, Outcome,
};
pub use mc::{fisher_mc, McConfig, McRun, BATCHES, CHUNK, MIN_SAMPLES, UNDEFINED_LIMIT};
pub(crate) use mc::pairwise_sum;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::kernels::second_moment_thinned;
use crate::measures::{fd_step, ParamValue, SpatialFamily};
use crate::pointproc::{IIDPointProcess, MomentSummary};

/// Absolute gap above which an exact loss counts as strict.
pub const EXACT_STRICT_MARGIN: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Analytic,
    Enumeration,
    MonteCarlo,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Analytic => "analytic",
            Method::Enumeration => "enumeration",
            Method::MonteCarlo => "monte-carlo",
        }
    }

    pub fn is_exact(&self) -> bool {
        *self != Method::MonteCarlo
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(Method::Analytic),
            "enumeration" => Ok(Method::Enumeration),
            "monte-carlo" => Ok(Method::MonteCarlo),
            other => Err(Error::Config(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FisherEstimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: u64,
    pub method: Method,
}

impl FisherEstimate {
    pub fn exact(value: f64, method: Method) -> Self {
        FisherEstimate { value, std_error: 0.0, samples: 0, method }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LossReport {
    pub before: FisherEstimate,
    pub after: FisherEstimate,
    pub gap: f64,
    pub strict: bool,
}

/// Gap `before − after`, strict when it exceeds 3 combined standard errors,
/// or 1e-10 when both estimates are exact.
pub fn loss_report(before: FisherEstimate, after: FisherEstimate) -> LossReport {
    let gap = before.value - after.value;
    let exact = before.method.is_exact() && after.method.is_exact();
    let strict = if exact {
        gap > EXACT_STRICT_MARGIN
    } else {
        gap > 3.0 * before.std_error.hypot(after.std_error)
    };
    LossReport { before, after, gap, strict }
}

/// Coefficient on `𝓘_X` in the i.i.d. point-process information.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CoefficientMode {
    /// `𝓘_N + E(N) 𝓘_X`.
    #[default]
    #[serde(rename = "E_N")]
    ExpectedCount,
    /// `𝓘_N + E(N²) 𝓘_X`.
    #[serde(rename = "E_N2")]
    ExpectedSquaredCount,
}

impl CoefficientMode {
    pub const ALL: [CoefficientMode; 2] = [CoefficientMode::ExpectedCount, CoefficientMode::ExpectedSquaredCount];

    pub fn as_str(&self) -> &'static str {
        match self {
            CoefficientMode::ExpectedCount => "E_N",
            CoefficientMode::ExpectedSquaredCount => "E_N2",
        }
    }

    pub fn coefficient(&self, ms: &MomentSummary) -> f64 {
        match self {
            CoefficientMode::ExpectedCount => ms.e_n,
            CoefficientMode::ExpectedSquaredCount => ms.e_n2,
        }
    }
}

impl fmt::Display for CoefficientMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CoefficientMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "E_N" => Ok(CoefficientMode::ExpectedCount),
            "E_N2" => Ok(CoefficientMode::ExpectedSquaredCount),
            other => Err(Error::Config(format!("unknown coefficient mode `{other}` (expected E_N or E_N2)"))),
        }
    }
}

/// `𝓘_N + coef · 𝓘_X` for an i.i.d. point process.
pub fn fisher_iid_analytic(pp: &IIDPointProcess, theta: ParamValue, mode: CoefficientMode) -> Result<FisherEstimate> {
    let pmf = pp.pmf(theta)?;
    let i_x = pp.spatial.fisher_information(theta.value()).ok_or_else(|| {
        Error::Unsupported(format!("no closed-form Fisher information for {}", pp.spatial.name()))
    })?;
    let ms = pmf.moments();
    let value = pmf.fisher_information() + mode.coefficient(&ms) * i_x;
    Ok(FisherEstimate::exact(value, Method::Analytic))
}

/// The displayed relative-loss expression for thinning from α to α′ ≤ α:
/// `((α − α′) − (α² − α′²)) E(N) + (α² − α′²) E(N²)`.
pub fn relative_thinning_loss(ms: &MomentSummary, alpha: f64, alpha_prime: f64) -> Result<f64> {
    relative_thinning_loss_mode(ms, alpha, alpha_prime, CoefficientMode::ExpectedSquaredCount)
}

/// Relative loss under either coefficient mode. With `E_N2` this is
/// `E(N_α²) − E(N_α′²)`; with `E_N` it is `E(N_α) − E(N_α′) = (α − α′) E(N)`.
pub fn relative_thinning_loss_mode(
    ms: &MomentSummary,
    alpha: f64,
    alpha_prime: f64,
    mode: CoefficientMode,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) || !(0.0..=1.0).contains(&alpha_prime) {
        return Err(domain(format!("alpha = {alpha}, alpha' = {alpha_prime} must lie in [0, 1]")));
    }
    if alpha_prime > alpha {
        return Err(domain(format!("alpha' = {alpha_prime} exceeds alpha = {alpha}")));
    }
    Ok(match mode {
        CoefficientMode::ExpectedCount => (alpha - alpha_prime) * ms.e_n,
        CoefficientMode::ExpectedSquaredCount => {
            let d1 = alpha - alpha_prime;
            let d2 = alpha * alpha - alpha_prime * alpha_prime;
            (d1 - d2) * ms.e_n + d2 * ms.e_n2
        }
    })
}

/// Thinned moments `(α E N, E(N_α²))`.
pub fn thinned_moments(ms: &MomentSummary, alpha: f64) -> Result<MomentSummary> {
    MomentSummary::new(alpha * ms.e_n, second_moment_thinned(ms, alpha)?)
}

/// Weak and classical Fisher information of one family at θ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Consistency {
    pub weak: f64,
    pub classical: f64,
    pub residual: f64,
}

/// Relative tolerance for the finite-difference check of analytic scores.
const SCORE_FD_TOL: f64 = 1e-5;
/// Quadrature tolerance for the finite-difference integrand, which carries
/// round-off from differencing log densities.
const CLASSICAL_TOL: f64 = 1e-8;

/// Compare `E[S_θ²]` along the score path with the classical
/// `∫ (∂θ p_θ)² / p_θ`, where `∂θ p_θ` is a central difference of the density.
pub fn consistency_residual(family: &SpatialFamily, theta: ParamValue) -> Result<Consistency> {
    let t = theta.value();
    let (weak, classical) = match family {
        SpatialFamily::Atomic(f) => {
            let mut weak = 0.0;
            let mut classical = 0.0;
            for i in 0..f.atoms().len() {
                let m = f.mass(t, i);
                if m > 0.0 {
                    let d = f.dtheta_mass(t, i);
                    let s = d / m;
                    weak += m * s * s;
                    classical += d * d / m;
                }
            }
            (weak, classical)
        }
        SpatialFamily::Continuous(f) => {
            let (lo, hi) = f.window(t).ok_or_else(|| {
                Error::Unsupported(format!("family {} has no integration window", f.name()))
            })?;
            for k in 0..=20 {
                let x = [lo + (hi - lo) * (0.25 + 0.5 * k as f64 / 20.0)];
                let s = f.dtheta_log_density(t, &x);
                let fd = crate::measures::fd_log_density(f.as_ref(), t, &x);
                if (s - fd).abs() > SCORE_FD_TOL * s.abs().max(1.0) {
                    return Err(Error::Numeric(format!(
                        "score of {} disagrees with finite differences at x = {}: {s} vs {fd}",
                        f.name(),
                        x[0]
                    )));
                }
            }
            let weak = family.expectation(t, &|x| {
                let s = f.dtheta_log_density(t, x);
                s * s
            })?;
            let h = fd_step(t);
            let (up, down) = (theta.shifted(h)?.value(), theta.shifted(-h)?.value());
            let classical = crate::quadrature::integrate(
                |x| {
                    let l = f.log_density(t, &[x]);
                    if !l.is_finite() {
                        return 0.0;
                    }
                    // (∂θ p / p) with both densities scaled by p to stay in range.
                    let r = ((f.log_density(up, &[x]) - l).exp() - (f.log_density(down, &[x]) - l).exp()) / (up - down);
                    l.exp() * r * r
                },
                lo,
                hi,
                CLASSICAL_TOL,
            )?;
            (weak, classical)
        }
    };
    Ok(Consistency { weak, classical, residual: (weak - classical).abs() })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::measures::{GaussianLocation, GaussianScale, TwoPoint};
    use crate::pointproc::{Dirac, Poisson, Tabulated};

    fn two_atom(card: Arc<dyn crate::pointproc::CardinalityLaw>) -> IIDPointProcess {
        IIDPointProcess::new(card, SpatialFamily::Atomic(Arc::new(TwoPoint::new(vec![0.0], vec![1.0]).unwrap())))
    }

    #[test]
    fn analytic_modes() {
        let pp = two_atom(Arc::new(Dirac(2)));
        let th = pp.param(0.5).unwrap();
        assert_eq!(fisher_iid_analytic(&pp, th, CoefficientMode::ExpectedCount).unwrap().value, 8.0);
        assert_eq!(fisher_iid_analytic(&pp, th, CoefficientMode::ExpectedSquaredCount).unwrap().value, 16.0);
        let pp1 = two_atom(Arc::new(Dirac(1)));
        for mode in CoefficientMode::ALL {
            assert_eq!(fisher_iid_analytic(&pp1, th, mode).unwrap().value, 4.0);
        }
        let pp0 = two_atom(Arc::new(Dirac(0)));
        assert_eq!(fisher_iid_analytic(&pp0, th, CoefficientMode::ExpectedCount).unwrap().value, 0.0);
    }

    #[test]
    fn relative_loss_examples() {
        let d2 = MomentSummary::new(2.0, 4.0).unwrap();
        let p2 = MomentSummary::new(2.0, 6.0).unwrap();
        assert_eq!(relative_thinning_loss(&d2, 0.4, 0.4).unwrap(), 0.0);
        assert!((relative_thinning_loss(&d2, 1.0, 0.5).unwrap() - 2.5).abs() < 1e-15);
        assert!((relative_thinning_loss(&p2, 1.0, 0.5).unwrap() - 4.0).abs() < 1e-15);
        assert!(relative_thinning_loss(&d2, 0.5, 0.6).is_err());
        assert_eq!(relative_thinning_loss_mode(&d2, 1.0, 0.5, CoefficientMode::ExpectedCount).unwrap(), 1.0);
    }

    #[test]
    fn relative_loss_matches_thinned_moment_difference() {
        let cards: Vec<Arc<dyn crate::pointproc::CardinalityLaw>> = vec![
            Arc::new(Dirac(2)),
            Arc::new(Poisson::new(2.0).unwrap()),
            Arc::new(Tabulated::new(vec![0.2, 0.3, 0.5]).unwrap()),
        ];
        for card in &cards {
            let ms = card.pmf(0.5).unwrap().moments();
            for i in 0..=10 {
                for j in 0..=i {
                    let (a, b) = (i as f64 / 10.0, j as f64 / 10.0);
                    let printed = relative_thinning_loss(&ms, a, b).unwrap();
                    let direct = thinned_moments(&ms, a).unwrap().e_n2 - thinned_moments(&ms, b).unwrap().e_n2;
                    assert!((printed - direct).abs() < 1e-12);
                    assert!(printed >= -1e-15);
                }
            }
        }
    }

    #[test]
    fn loss_report_rules() {
        let r = loss_report(FisherEstimate::exact(8.0, Method::Enumeration), FisherEstimate::exact(4.0, Method::Enumeration));
        assert_eq!(r.gap, 4.0);
        assert!(r.strict);
        let same = FisherEstimate::exact(3.0, Method::Analytic);
        assert!(!loss_report(same, same).strict);
        let mc = |v, se| FisherEstimate { value: v, std_error: se, samples: 1000, method: Method::MonteCarlo };
        assert!(loss_report(mc(2.0, 0.01), mc(0.0, 0.0)).strict);
        assert!(!loss_report(mc(2.0, 0.1), mc(1.9, 0.1)).strict);
    }

    #[test]
    fn consistency_examples() {
        let loc = SpatialFamily::Continuous(Arc::new(GaussianLocation::new(1.0).unwrap()));
        let c = consistency_residual(&loc, ParamValue::unbounded(0.3).unwrap()).unwrap();
        assert!(c.residual <= 1e-6 && (c.weak - 1.0).abs() < 1e-9);
        let scale = SpatialFamily::Continuous(Arc::new(GaussianScale::new(0.0)));
        let c = consistency_residual(&scale, ParamValue::new(1.0, 0.0, f64::INFINITY).unwrap()).unwrap();
        assert!(c.residual <= 1e-6 && (c.weak - 2.0).abs() < 1e-9);
        let bd = SpatialFamily::Atomic(Arc::new(TwoPoint::bernoulli_dirac(1.0)));
        for t in [0.1, 0.25, 0.5, 0.9] {
            let c = consistency_residual(&bd, ParamValue::new(t, 0.0, 1.0).unwrap()).unwrap();
            assert!(c.residual <= 1e-12);
            assert!((c.weak - 1.0 / (t * (1.0 - t))).abs() <= 1e-12);
        }
    }
}
