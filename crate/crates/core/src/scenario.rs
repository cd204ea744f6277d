//! Declarative scenarios: parse, validate, run estimator grids and sweeps.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::estimators::EstimateContext;
use crate::fisher::{loss_report, CoefficientMode, FisherEstimate, Method, MIN_SAMPLES};
use crate::kernels::Limits;
use crate::model::{Chain, Model};
use crate::registry::{ComponentSpec, ModelSpec, Registry};
use crate::rng::derive_seed;

pub const CSV_HEADER: &str = "scenario,theta,kernels,method,fisher,se,samples,gap,strict,ms";
pub const DEFAULT_SAMPLES: u64 = 100_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSpec {
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[serde(default)]
    pub coefficient_mode: CoefficientMode,
}

impl EstimatorSpec {
    pub fn label(&self) -> String {
        match (self.method, self.coefficient_mode) {
            (Method::Analytic, CoefficientMode::ExpectedSquaredCount) => format!("{}[{}]", self.method, self.coefficient_mode),
            (m, _) => m.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub param: String,
    pub grid: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub id: String,
    pub model: ModelSpec,
    #[serde(default)]
    pub kernels: Vec<ComponentSpec>,
    pub theta: Vec<f64>,
    pub estimators: Vec<EstimatorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub record_timing: bool,
    #[serde(default)]
    pub limits: Limits,
}

/// A parsed config together with its source text, for line-anchored messages.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub config: ScenarioConfig,
    source: String,
    origin: String,
}

/// 1-based line of the first occurrence of `"key"` in `src`.
fn line_of(src: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    src.lines().position(|l| l.contains(&needle)).map(|i| i + 1)
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        let source = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: cannot read config: {e}", path.display())))?;
        Self::parse(&source, &path.display().to_string())
    }

    pub fn parse(source: &str, origin: &str) -> Result<Self> {
        let config: ScenarioConfig = serde_json::from_str(source)
            .map_err(|e| Error::Config(format!("{origin}:{}:{}: {e}", e.line(), e.column())))?;
        Ok(Scenario { config, source: source.to_string(), origin: origin.to_string() })
    }

    pub fn from_config(config: ScenarioConfig) -> Self {
        let source = serde_json::to_string_pretty(&config).unwrap_or_default();
        Scenario { config, source, origin: "<config>".into() }
    }

    fn anchored(&self, key: &str, msg: impl std::fmt::Display) -> Error {
        match line_of(&self.source, key) {
            Some(l) => Error::Config(format!("{}:{l}: {msg}", self.origin)),
            None => Error::Config(format!("{}: {msg}", self.origin)),
        }
    }

    fn anchor(&self, key: &str, e: Error) -> Error {
        match e {
            Error::Config(m) | Error::Domain(m) => self.anchored(key, m),
            other => other,
        }
    }

    /// Apply a seed override and fill every default.
    pub fn resolve(&mut self, seed: Option<u64>) {
        if seed.is_some() {
            self.config.seed = seed;
        }
        for e in &mut self.config.estimators {
            if e.method == Method::MonteCarlo && e.samples.is_none() {
                e.samples = Some(DEFAULT_SAMPLES);
            }
        }
    }

    /// Check the config and build the model and kernel chain.
    pub fn validate(&self, registry: &Registry) -> Result<(Model, Chain)> {
        let c = &self.config;
        if c.id.is_empty() || c.id.contains([',', '"', '\n']) {
            return Err(self.anchored("id", "scenario id must be nonempty and contain no commas, quotes or newlines"));
        }
        if c.theta.is_empty() {
            return Err(self.anchored("theta", "theta grid is empty"));
        }
        if c.estimators.is_empty() {
            return Err(self.anchored("estimators", "no estimators requested"));
        }
        let model = registry.model(&c.model).map_err(|e| self.anchor("model", e))?;
        for &t in &c.theta {
            model.param(t).map_err(|e| self.anchor("theta", e))?;
        }
        let chain = registry.chain(&c.kernels, &model).map_err(|e| self.anchor("kernels", e))?;
        crate::model::Observed::new(&model, &chain).map_err(|e| self.anchor("kernels", e))?;
        for e in &c.estimators {
            if e.method == Method::MonteCarlo {
                if c.seed.is_none() {
                    return Err(self.anchored("estimators", "monte-carlo estimator needs a `seed`"));
                }
                if e.samples.is_some_and(|m| m < MIN_SAMPLES) {
                    return Err(self.anchored("samples", format!("monte-carlo needs at least {MIN_SAMPLES} samples")));
                }
            }
        }
        if let Some(s) = &c.sweep {
            if s.grid.is_empty() {
                return Err(self.anchored("sweep", "sweep grid is empty"));
            }
        }
        Ok((model, chain))
    }

    fn context(&self, e: &EstimatorSpec, label: &str) -> EstimateContext {
        EstimateContext {
            limits: self.config.limits,
            samples: e.samples.unwrap_or(DEFAULT_SAMPLES),
            seed: derive_seed(self.config.seed.unwrap_or(0), label),
            workers: self.config.workers,
            mode: e.coefficient_mode,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRow {
    pub scenario: String,
    pub theta: f64,
    pub kernels: String,
    /// Method tag; analytic rows in `E_N2` mode read `analytic[E_N2]`.
    pub method: String,
    pub fisher: f64,
    pub se: f64,
    pub samples: u64,
    pub gap: f64,
    pub strict: bool,
    pub ms: u64,
}

/// `%.17g`: 17 significant digits, trailing zeros removed.
pub fn fmt_real(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.16e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-4..17).contains(&exp) {
        let decimals = (16 - exp).max(0) as usize;
        let s = format!("{:.*}", decimals, x);
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let m = if mantissa.contains('.') { mantissa.trim_end_matches('0').trim_end_matches('.') } else { mantissa };
        format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

pub fn write_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.scenario,
            fmt_real(r.theta),
            r.kernels,
            r.method,
            fmt_real(r.fisher),
            fmt_real(r.se),
            r.samples,
            fmt_real(r.gap),
            r.strict,
            r.ms
        );
    }
    out
}

struct Cell {
    theta: f64,
    chain: usize,
    estimator: usize,
}

/// Run every (θ, chain, estimator) cell. The baseline chain is the kernel-free
/// model; when the config has kernels, the chain follows it.
pub fn run(scenario: &Scenario, registry: &Registry) -> Result<Vec<ResultRow>> {
    let (model, chain) = scenario.validate(registry)?;
    let c = &scenario.config;
    let chains = if chain.is_empty() { vec![chain] } else { vec![Chain::empty(), chain] };
    let estimators = c
        .estimators
        .iter()
        .map(|e| registry.estimator(e.method.as_str()))
        .collect::<Result<Vec<_>>>()?;
    let mut cells = Vec::new();
    for &theta in &c.theta {
        for chain in 0..chains.len() {
            for estimator in 0..estimators.len() {
                cells.push(Cell { theta, chain, estimator });
            }
        }
    }
    let results: Vec<(FisherEstimate, u64)> = cells
        .par_iter()
        .map(|cell| {
            let spec = &c.estimators[cell.estimator];
            let ch = &chains[cell.chain];
            let label = format!("{}|{}|{}|{}", fmt_real(cell.theta), ch.describe(), spec.method, cell.estimator);
            let ctx = scenario.context(spec, &label);
            let start = Instant::now();
            let est = estimators[cell.estimator].estimate(&model, ch, cell.theta, &ctx)?;
            let ms = if c.record_timing { start.elapsed().as_millis() as u64 } else { 0 };
            Ok((est, ms))
        })
        .collect::<Result<_>>()?;
    let per_theta = chains.len() * estimators.len();
    let mut rows = Vec::with_capacity(cells.len());
    for (i, (cell, (est, ms))) in cells.iter().zip(&results).enumerate() {
        let base = &results[i - i % per_theta + cell.estimator].0;
        let (gap, strict) = if cell.chain == 0 {
            (0.0, false)
        } else {
            let r = loss_report(*base, *est);
            (r.gap, r.strict)
        };
        rows.push(ResultRow {
            scenario: c.id.clone(),
            theta: cell.theta,
            kernels: chains[cell.chain].describe(),
            method: c.estimators[cell.estimator].label(),
            fisher: est.value,
            se: est.std_error,
            samples: est.samples,
            gap,
            strict,
            ms: *ms,
        });
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub theta: f64,
    pub analytic: Option<f64>,
    pub enumeration: Option<f64>,
    pub monte_carlo: Option<(f64, f64)>,
}

/// Replace the first number stored under `key` anywhere in `v`.
fn substitute(v: &mut Value, key: &str, x: f64) -> bool {
    match v {
        Value::Object(m) => {
            if let Some(slot) = m.get_mut(key) {
                if slot.is_number() {
                    *slot = serde_json::json!(x);
                    return true;
                }
            }
            m.iter_mut().any(|(_, child)| substitute(child, key, x))
        }
        Value::Array(a) => a.iter_mut().any(|child| substitute(child, key, x)),
        _ => false,
    }
}

fn with_param(kernels: &[ComponentSpec], param: &str, x: f64) -> Option<Vec<ComponentSpec>> {
    let mut out = kernels.to_vec();
    for k in &mut out {
        let mut v = Value::Object(std::mem::take(&mut k.params));
        let hit = substitute(&mut v, param, x);
        if let Value::Object(m) = v {
            k.params = m;
        }
        if hit {
            return Some(out);
        }
    }
    None
}

/// Fisher information of the full chain as one kernel parameter varies.
pub fn sweep(scenario: &Scenario, registry: &Registry, param: &str, grid: &[f64]) -> Result<Vec<SweepRow>> {
    scenario.validate(registry)?;
    if grid.is_empty() {
        return Err(Error::Config("sweep grid is empty".into()));
    }
    let c = &scenario.config;
    for (i, e) in c.estimators.iter().enumerate() {
        if c.estimators[..i].iter().any(|o| o.method == e.method) {
            return Err(scenario.anchored("estimators", format!("sweep has one column per method; `{}` appears twice", e.method)));
        }
    }
    if with_param(&c.kernels, param, 0.0).is_none() {
        return Err(scenario.anchored("kernels", format!("parameter `{param}` not found in the kernel chain")));
    }
    let mut values = grid.to_vec();
    values.sort_by(f64::total_cmp);
    let model = registry.model(&c.model)?;
    let mut cells = Vec::new();
    for &v in &values {
        let kernels = with_param(&c.kernels, param, v).expect("parameter located above");
        let chain = registry.chain(&kernels, &model).map_err(|e| scenario.anchor("kernels", e))?;
        for &theta in &c.theta {
            cells.push((v, theta, chain.clone()));
        }
    }
    cells
        .par_iter()
        .map(|(v, theta, chain)| {
            let mut row = SweepRow { value: *v, theta: *theta, analytic: None, enumeration: None, monte_carlo: None };
            for (i, spec) in c.estimators.iter().enumerate() {
                let label = format!("sweep|{param}={}|{}|{}|{i}", fmt_real(*v), fmt_real(*theta), spec.method);
                let ctx = scenario.context(spec, &label);
                let est = registry.estimator(spec.method.as_str())?.estimate(&model, chain, *theta, &ctx)?;
                match spec.method {
                    Method::Analytic => row.analytic = Some(est.value),
                    Method::Enumeration => row.enumeration = Some(est.value),
                    Method::MonteCarlo => row.monte_carlo = Some((est.value, est.std_error)),
                }
            }
            Ok(row)
        })
        .collect()
}

pub fn sweep_csv(param: &str, rows: &[SweepRow]) -> String {
    let opt = |x: Option<f64>| x.map(fmt_real).unwrap_or_default();
    let mut out = format!("{param},theta,analytic,enumeration,monte_carlo,monte_carlo_se\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_real(r.value),
            fmt_real(r.theta),
            opt(r.analytic),
            opt(r.enumeration),
            opt(r.monte_carlo.map(|m| m.0)),
            opt(r.monte_carlo.map(|m| m.1)),
        );
    }
    out
}

/// `<out>.resolved.json`.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".resolved.json");
    PathBuf::from(s)
}

/// Write the CSV and its resolved-config sidecar.
pub fn write_outputs(scenario: &Scenario, out: &Path, csv: &str) -> Result<()> {
    std::fs::write(out, csv)?;
    let mut resolved = scenario.config.clone();
    resolved.output = Some(out.display().to_string());
    std::fs::write(sidecar_path(out), serde_json::to_string_pretty(&resolved)? + "\n")?;
    Ok(())
}
