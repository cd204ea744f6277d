//! Invariant suites run by `fisherloss check`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::estimators::{EstimateContext, Estimator, MonteCarlo};
use crate::fisher::{
    fisher_enumerate, fisher_iid_analytic, fisher_mc, loss_report, mean_score_enumerate, relative_thinning_loss,
    AtomicJoint, CoefficientMode, McConfig,
};
use crate::kernels::{
    conditional_score_oracle, marginal_score_composite, marginal_score_superposed, marginal_score_thinned_iid,
    ClutterSpec, CompositeKernel, DuplicationKernel, Limits, ObservationKernel, ObservedModel, PermutationDist,
    PermutationKernel, SuperpositionKernel, ThinningKernel,
};
use crate::measures::{
    AtomicFamily, Categorical, GaussianLocation, GaussianPair, GaussianScale, GaussianVector, ParamValue, SpatialFamily,
    TwoPoint,
};
use crate::model::{Chain, KernelStage, Model};
use crate::pointproc::{
    duplicate, score_duplicated, BinomialTheta, CardinalityLaw, Configuration, Dirac, IIDPointProcess, Poisson,
    Tabulated,
};

pub const SUITES: [&str; 5] = ["core", "loss", "identity", "adjudication", "all"];

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub suite: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} [{}] {}: {}", self.suite, self.name, self.detail)
    }
}

type CheckFn = fn() -> Result<(bool, String)>;

fn two_atom() -> SpatialFamily {
    SpatialFamily::Atomic(Arc::new(TwoPoint::new(vec![0.0], vec![1.0]).expect("distinct atoms")))
}

fn ab_uniform() -> SpatialFamily {
    SpatialFamily::Atomic(Arc::new(Categorical::uniform(vec![vec![0.0], vec![1.0]]).expect("valid atoms")))
}

fn pp(card: Arc<dyn CardinalityLaw>) -> IIDPointProcess {
    IIDPointProcess::new(card, two_atom())
}

fn clutter(card: Arc<dyn CardinalityLaw>) -> Result<ClutterSpec> {
    ClutterSpec::new(card, ab_uniform())
}

fn unit(t: f64) -> Result<ParamValue> {
    ParamValue::new(t, 0.0, 1.0)
}

/// Enumerable models used by several suites: cardinalities on the two-atom space.
fn cardinalities() -> Result<Vec<(&'static str, Arc<dyn CardinalityLaw>)>> {
    Ok(vec![
        ("dirac1", Arc::new(Dirac(1))),
        ("dirac2", Arc::new(Dirac(2))),
        ("bernoulli_mixture", Arc::new(Tabulated::new(vec![0.0, 0.5, 0.5])?)),
        ("binomial_theta4", Arc::new(BinomialTheta::new(4))),
        ("poisson1.5", Arc::new(Poisson::new(1.5)?)),
    ])
}

fn chains() -> Result<Vec<(&'static str, Vec<Arc<dyn ObservationKernel>>)>> {
    let c = clutter(Arc::new(Tabulated::new(vec![0.5, 0.3, 0.2])?))?;
    Ok(vec![
        ("none", vec![]),
        ("thinning", vec![Arc::new(ThinningKernel::new(0.6)?)]),
        ("superposition", vec![Arc::new(SuperpositionKernel::new(c.clone()))]),
        ("thinning>superposition", vec![Arc::new(ThinningKernel::new(0.6)?), Arc::new(SuperpositionKernel::new(c))]),
        ("duplication", vec![Arc::new(DuplicationKernel)]),
    ])
}

fn verdict(ok: bool, detail: String) -> Result<(bool, String)> {
    Ok((ok, detail))
}

fn bernoulli_dirac_enumeration() -> Result<(bool, String)> {
    let bd = SpatialFamily::Atomic(Arc::new(TwoPoint::bernoulli_dirac(1.0)));
    let mut worst: f64 = 0.0;
    for t in [0.1, 0.25, 0.5, 0.9] {
        let e = fisher_enumerate(&bd, unit(t)?, &Limits::default())?;
        worst = worst.max((e.value - 1.0 / (t * (1.0 - t))).abs());
    }
    verdict(worst <= 1e-12, format!("max |enumerated - 1/(t(1-t))| = {worst:.3e}"))
}

fn bernoulli_dirac_mc() -> Result<(bool, String)> {
    let model = Model::Family(SpatialFamily::Atomic(Arc::new(TwoPoint::bernoulli_dirac(1.0))));
    let mut ok = true;
    let mut detail = Vec::new();
    for (i, t) in [0.25, 0.5].into_iter().enumerate() {
        let ctx = EstimateContext { samples: 100_000, seed: 2024 + i as u64, ..EstimateContext::default() };
        let e = MonteCarlo.estimate(&model, &Chain::empty(), t, &ctx)?;
        let exact = 1.0 / (t * (1.0 - t));
        ok &= (e.value - exact).abs() <= 3.0 * e.std_error;
        detail.push(format!("theta={t}: {:.5} +- {:.5} vs {exact:.5}", e.value, e.std_error));
    }
    verdict(ok, detail.join("; "))
}

fn consistency() -> Result<(bool, String)> {
    let loc = SpatialFamily::Continuous(Arc::new(GaussianLocation::new(1.0)?));
    let scale = SpatialFamily::Continuous(Arc::new(GaussianScale::new(0.0)));
    let a = crate::fisher::consistency_residual(&loc, ParamValue::unbounded(0.0)?)?;
    let b = crate::fisher::consistency_residual(&scale, ParamValue::new(1.0, 0.0, f64::INFINITY)?)?;
    let bd = SpatialFamily::Atomic(Arc::new(TwoPoint::bernoulli_dirac(1.0)));
    let c = crate::fisher::consistency_residual(&bd, unit(0.3)?)?;
    let ok = a.residual <= 1e-6
        && b.residual <= 1e-6
        && c.residual <= 1e-12
        && (a.weak - 1.0).abs() <= 1e-6
        && (b.weak - 2.0).abs() <= 1e-6;
    verdict(
        ok,
        format!(
            "location {:.9} (res {:.1e}), scale {:.9} (res {:.1e}), bernoulli-dirac res {:.1e}",
            a.weak, a.residual, b.weak, b.residual, c.residual
        ),
    )
}

fn mean_score_zero() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for (_, card) in cardinalities()? {
        for (_, kernels) in chains()? {
            let model = ObservedModel::from_kernels(pp(card.clone()), &kernels)?;
            for t in [0.2, 0.5, 0.7] {
                worst = worst.max(mean_score_enumerate(&model, unit(t)?, &Limits::default())?.abs());
            }
        }
    }
    verdict(worst <= 1e-10, format!("max |E score| over enumerated models = {worst:.3e}"))
}

fn duplication() -> Result<(bool, String)> {
    let limits = Limits::default();
    let mut worst: f64 = 0.0;
    let mut identical = true;
    for (_, card) in cardinalities()? {
        let source = pp(card);
        let dup = ObservedModel::from_kernels(source.clone(), &[Arc::new(DuplicationKernel)])?;
        for t in [0.3, 0.5] {
            let th = unit(t)?;
            let a = fisher_enumerate(&source, th, &limits)?.value;
            let b = fisher_enumerate(&dup, th, &limits)?.value;
            worst = worst.max((a - b).abs());
            for y in [vec![], vec![0.0], vec![0.0, 1.0], vec![1.0, 1.0]] {
                let x = Configuration::from_scalars(&y);
                identical &= score_duplicated(&source, th, &duplicate(&x))? == source.score(th, &x)?;
            }
        }
    }
    verdict(worst <= 1e-12 && identical, format!("max |I(dup) - I| = {worst:.3e}, scores identical: {identical}"))
}

fn additivity() -> Result<(bool, String)> {
    let bd: Arc<dyn AtomicFamily> = Arc::new(TwoPoint::bernoulli_dirac(1.0));
    let th = unit(0.5)?;
    let pair = AtomicJoint::independent(bd.clone(), bd.clone()).additivity_residual(th);
    let free: Arc<dyn AtomicFamily> = Arc::new(Categorical::uniform(vec![vec![0.0], vec![1.0]])?);
    let flat = AtomicJoint::independent(bd.clone(), free).additivity_residual(unit(0.3)?);
    let shifted: Vec<Arc<dyn AtomicFamily>> = vec![
        Arc::new(TwoPoint::new(vec![-1.0], vec![0.0])?),
        Arc::new(TwoPoint::new(vec![1.0], vec![2.0])?),
    ];
    let hier = AtomicJoint::new(bd, shifted)?.additivity_residual(unit(0.35)?);
    let worst = pair.residual.max(flat.residual).max(hier.residual);
    let ok = worst <= 1e-12 && (pair.i_xy - 8.0).abs() <= 1e-12 && flat.i_y_given_x == 0.0;
    verdict(ok, format!("pair I_XY = {}, max residual {worst:.3e}", pair.i_xy))
}

fn thinning_monotone() -> Result<(bool, String)> {
    let limits = Limits::default();
    let mut ok = true;
    let mut min_margin = f64::INFINITY;
    for (_, card) in cardinalities()? {
        if card.theta_dependent() {
            continue;
        }
        let source = pp(card);
        let th = unit(0.4)?;
        let full = fisher_enumerate(&source, th, &limits)?.value;
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=10 {
            let a = i as f64 / 10.0;
            let m = ObservedModel::from_kernels(source.clone(), &[Arc::new(ThinningKernel::new(a)?)])?;
            let v = fisher_enumerate(&m, th, &limits)?.value;
            ok &= v >= prev - 1e-12;
            if full > 0.0 && i > 0 {
                ok &= v - prev >= 1e-10;
                min_margin = min_margin.min(v - prev);
            }
            if i < 10 {
                ok &= full - v >= 1e-10;
                min_margin = min_margin.min(full - v);
            }
            prev = v;
        }
    }
    verdict(ok, format!("smallest exact margin {min_margin:.3e}"))
}

fn relative_loss() -> Result<(bool, String)> {
    let mut min = f64::INFINITY;
    for (_, card) in cardinalities()? {
        let ms = card.pmf(0.5)?.moments();
        for i in 0..=10 {
            for j in 0..=i {
                min = min.min(relative_thinning_loss(&ms, i as f64 / 10.0, j as f64 / 10.0)?);
            }
        }
    }
    let d2 = relative_thinning_loss(&crate::pointproc::MomentSummary::new(2.0, 4.0)?, 1.0, 0.5)?;
    let p2 = relative_thinning_loss(&crate::pointproc::MomentSummary::new(2.0, 6.0)?, 1.0, 0.5)?;
    let ok = min >= 0.0 && (d2 - 2.5).abs() <= 1e-15 && (p2 - 4.0).abs() <= 1e-15;
    verdict(ok, format!("min over grid {min:.3e}; printed values {d2}, {p2}"))
}

fn mc_pair(model: &Model, chain: &Chain, theta: f64, seed: u64) -> Result<crate::fisher::FisherEstimate> {
    let ctx = EstimateContext { samples: 100_000, seed, ..EstimateContext::default() };
    MonteCarlo.estimate(model, chain, theta, &ctx)
}

fn permutation_loss() -> Result<(bool, String)> {
    let model = Model::vector(Arc::new(GaussianPair::new(1.0)?), 2)?;
    let chain = Chain::new(vec![KernelStage::Permutation(PermutationKernel::new(2, PermutationDist::Uniform)?)]);
    let mut ok = true;
    let mut at_zero = (0.0, 0.0, 0.0);
    for i in 0..=8 {
        let t = 0.25 * i as f64;
        let before = mc_pair(&model, &Chain::empty(), t, 100 + i)?;
        let after = mc_pair(&model, &chain, t, 200 + i)?;
        ok &= after.value <= before.value + 3.0 * before.std_error.hypot(after.std_error);
        if i == 0 {
            ok &= (before.value - 2.0).abs() <= 3.0 * before.std_error && after.value <= 0.05;
            ok &= loss_report(before, after).strict;
            at_zero = (before.value, before.std_error, after.value);
        }
    }
    verdict(ok, format!("theta=0: I = {:.4} +- {:.4}, I' = {:.2e}", at_zero.0, at_zero.1, at_zero.2))
}

fn exchangeable_control() -> Result<(bool, String)> {
    let model = Model::vector(Arc::new(GaussianVector::new(2, 1.0)?), 2)?;
    let chain = Chain::new(vec![KernelStage::Permutation(PermutationKernel::new(2, PermutationDist::Uniform)?)]);
    let before = mc_pair(&model, &Chain::empty(), 0.7, 31)?;
    let after = mc_pair(&model, &chain, 0.7, 31)?;
    let r = loss_report(before, after);
    let band = 3.0 * before.std_error.hypot(after.std_error);
    verdict(r.gap.abs() <= band, format!("gap {:.3e} within 3 SE band {band:.3e}", r.gap))
}

fn clutter_monotone() -> Result<(bool, String)> {
    let limits = Limits::default();
    let source = pp(Arc::new(Dirac(2)));
    let th = unit(0.4)?;
    let base = fisher_enumerate(&source, th, &limits)?.value;
    let mut values = Vec::new();
    for rate in [0.0, 0.5, 1.0, 2.0] {
        let k: Arc<dyn ObservationKernel> = Arc::new(SuperpositionKernel::new(clutter(Arc::new(Poisson::new(rate)?))?));
        let m = ObservedModel::from_kernels(source.clone(), &[k])?;
        values.push(fisher_enumerate(&m, th, &limits)?.value);
    }
    let ok = (values[0] - base).abs() <= 1e-10 && values.windows(2).all(|w| w[1] <= w[0] + 1e-10);
    verdict(ok, format!("I at rates 0, 0.5, 1, 2: {values:.6?} (no clutter {base:.6})"))
}

fn loss_nonnegative() -> Result<(bool, String)> {
    let limits = Limits::default();
    let mut min = f64::INFINITY;
    for (_, card) in cardinalities()? {
        let source = pp(card);
        for (_, kernels) in chains()? {
            let m = ObservedModel::from_kernels(source.clone(), &kernels)?;
            for t in [0.25, 0.6] {
                let before = fisher_enumerate(&source, unit(t)?, &limits)?;
                let after = fisher_enumerate(&m, unit(t)?, &limits)?;
                min = min.min(loss_report(before, after).gap);
            }
        }
    }
    verdict(min >= -1e-10, format!("smallest exact gap {min:.3e}"))
}

fn oracle_agreement() -> Result<(bool, String)> {
    let limits = Limits::default();
    let small = clutter(Arc::new(Tabulated::new(vec![0.5, 0.3, 0.2])?))?;
    let mut worst: f64 = 0.0;
    let mut count = 0;
    let cards: Vec<Arc<dyn CardinalityLaw>> = vec![
        Arc::new(BinomialTheta::new(4)),
        Arc::new(Tabulated::new(vec![0.1, 0.2, 0.3, 0.2, 0.2])?),
    ];
    for card in cards {
        let source = pp(card);
        for t in [0.25, 0.5, 0.8] {
            let th = unit(t)?;
            for n in 0..=6 {
                for a in 0..=n {
                    let mut pts = vec![0.0; a];
                    pts.extend(std::iter::repeat_n(1.0, n - a));
                    let y = Configuration::from_scalars(&pts);
                    let mut compare = |closed: crate::measures::ScoreValue, k: &dyn ObservationKernel| -> Result<()> {
                        let o = conditional_score_oracle(&source, k, th, &y, &limits)?;
                        if o.is_defined() || closed.is_defined() {
                            worst = worst.max((o.value() - closed.value()).abs());
                            count += 1;
                        }
                        Ok(())
                    };
                    let thin = ThinningKernel::new(0.6)?;
                    if n <= 4 {
                        compare(marginal_score_thinned_iid(&source, 0.6, th, &y)?, &thin)?;
                    }
                    let sup = SuperpositionKernel::new(small.clone());
                    compare(marginal_score_superposed(&source, &small, th, &y, &limits)?, &sup)?;
                    let both = CompositeKernel::new(vec![Arc::new(thin), Arc::new(sup)]);
                    compare(marginal_score_composite(&source, 0.6, &small, th, &y, &limits)?, &both)?;
                }
            }
        }
    }
    verdict(worst <= 1e-10, format!("{count} comparisons, max |oracle - closed form| = {worst:.3e}"))
}

/// Which coefficient modes match enumeration on every model.
pub fn adjudicate() -> Result<(Vec<CoefficientMode>, String)> {
    let limits = Limits::default();
    let mut matches = CoefficientMode::ALL.to_vec();
    let mut detail = Vec::new();
    for (name, card) in cardinalities()? {
        let source = pp(card);
        for t in [0.3, 0.5] {
            let th = unit(t)?;
            let exact = fisher_enumerate(&source, th, &limits)?.value;
            let mut hit = Vec::new();
            for mode in CoefficientMode::ALL {
                let v = fisher_iid_analytic(&source, th, mode)?.value;
                if (v - exact).abs() <= 1e-12 * exact.max(1.0) {
                    hit.push(mode.as_str());
                } else {
                    matches.retain(|m| *m != mode);
                }
            }
            if t == 0.5 {
                detail.push(format!("{name}: {}", hit.join("+")));
            }
        }
    }
    Ok((matches, detail.join("; ")))
}

fn adjudication() -> Result<(bool, String)> {
    let e = fisher_enumerate(&pp(Arc::new(Dirac(2))), unit(0.5)?, &Limits::default())?.value;
    let (modes, detail) = adjudicate()?;
    let mode = match modes.as_slice() {
        [m] => m.as_str().to_string(),
        [] => "none".into(),
        _ => "ambiguous".into(),
    };
    verdict(modes.len() == 1 && (e - 8.0).abs() <= 1e-12, format!("matching mode: {mode}; dirac2 enumeration {e}; {detail}"))
}

fn mc_determinism() -> Result<(bool, String)> {
    let source = pp(Arc::new(Poisson::new(1.5)?));
    let th = unit(0.4)?;
    let run = |workers| {
        fisher_mc(
            |rng| source.sample(th, rng),
            |x| source.score(th, x),
            McConfig { samples: 20_000, seed: 9, workers },
        )
    };
    let (a, b) = (run(1)?, run(3)?);
    let diff = (a.estimate.value - b.estimate.value).abs();
    verdict(diff <= 1e-12, format!("1 vs 3 workers differ by {diff:.3e}"))
}

fn mean_score_mc() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for (_, kernels) in chains()? {
        let m = ObservedModel::from_kernels(pp(Arc::new(Poisson::new(1.5)?)), &kernels)?;
        let th = unit(0.4)?;
        let run = fisher_mc(
            |rng| {
                let x = m.source.sample(th, rng)?;
                Ok(kernels.iter().fold(x, |c, k| k.apply(&c, rng)))
            },
            |y| m.score(th, y, &Limits::default()),
            McConfig { samples: 20_000, seed: 77, workers: 0 },
        )?;
        worst = worst.max(run.mean_score.abs() / run.mean_score_se);
    }
    verdict(worst <= 4.0, format!("largest |mean score| = {worst:.2} SE"))
}

fn registry() -> Vec<(&'static str, &'static str, CheckFn)> {
    vec![
        ("core", "bernoulli_dirac_enumeration", bernoulli_dirac_enumeration),
        ("core", "bernoulli_dirac_monte_carlo", bernoulli_dirac_mc),
        ("core", "weak_classical_consistency", consistency),
        ("core", "mean_score_zero_enumeration", mean_score_zero),
        ("core", "mean_score_zero_monte_carlo", mean_score_mc),
        ("core", "duplication_neutrality", duplication),
        ("core", "additivity", additivity),
        ("core", "monte_carlo_worker_determinism", mc_determinism),
        ("loss", "thinning_monotone_and_strict", thinning_monotone),
        ("loss", "relative_loss_nonnegative", relative_loss),
        ("loss", "permutation_pair_loss", permutation_loss),
        ("loss", "exchangeable_control", exchangeable_control),
        ("loss", "clutter_rate_monotone", clutter_monotone),
        ("loss", "kernel_loss_nonnegative", loss_nonnegative),
        ("identity", "conditional_score_oracle", oracle_agreement),
        ("adjudication", "coefficient_mode", adjudication),
    ]
}

/// Run one suite, or every suite for `all`.
pub fn run_suite(suite: &str) -> Result<Vec<CheckOutcome>> {
    if !SUITES.contains(&suite) {
        return Err(Error::Config(format!("unknown suite `{suite}` (expected one of {})", SUITES.join(", "))));
    }
    Ok(registry()
        .into_iter()
        .filter(|(s, _, _)| suite == "all" || *s == suite)
        .map(|(s, name, f)| {
            let (passed, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
            CheckOutcome { suite: s, name, passed, detail }
        })
        .collect())
}
