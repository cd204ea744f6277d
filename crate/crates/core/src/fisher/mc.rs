//! Monte Carlo Fisher information with chunked, worker-count-independent streams.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{FisherEstimate, Method};
use crate::error::{domain, Error, Result};
use crate::measures::ScoreValue;
use crate::rng::{self, SeedStream};

/// Samples drawn from one seed stream.
pub const CHUNK: u64 = 1024;
/// Batches for the batch-means standard error.
pub const BATCHES: usize = 20;
/// Smallest accepted sample count.
pub const MIN_SAMPLES: u64 = 100;
/// Largest tolerated fraction of off-support score evaluations.
pub const UNDEFINED_LIMIT: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub samples: u64,
    pub seed: u64,
    /// Worker threads; 0 uses the global pool.
    pub workers: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct McRun {
    pub estimate: FisherEstimate,
    pub undefined: u64,
    pub mean_score: f64,
    pub mean_score_se: f64,
    pub batch_std_error: f64,
}

/// Sum in a fixed binary tree so the result depends only on the slice.
pub(crate) fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs) / n;
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = if xs.len() > 1 { pairwise_sum(&dev) / (n - 1.0) } else { 0.0 };
    (mean, (var / n).sqrt())
}

fn run_chunk<T, S, F>(sampler: &S, score: &F, seed: u64, chunk: u64, len: u64) -> Result<(Vec<f64>, u64)>
where
    S: Fn(&mut SeedStream) -> Result<T> + Sync,
    F: Fn(&T) -> Result<ScoreValue> + Sync,
{
    let mut rng = rng::stream(seed, chunk);
    let mut out = Vec::with_capacity(len as usize);
    let mut undefined = 0;
    for _ in 0..len {
        let x = sampler(&mut rng)?;
        let s = score(&x)?;
        if s.is_defined() {
            out.push(s.value());
        } else {
            undefined += 1;
            out.push(0.0);
        }
    }
    Ok((out, undefined))
}

/// `𝓘 ≈ mean(score²)` over `samples` forward draws.
///
/// Sample `j` is drawn from stream `j / CHUNK` of `seed`, and every reduction
/// runs over the full ordered sample vector, so the estimate is bit-identical
/// for any worker count.
pub fn fisher_mc<T, S, F>(sampler: S, score: F, cfg: McConfig) -> Result<McRun>
where
    S: Fn(&mut SeedStream) -> Result<T> + Sync,
    F: Fn(&T) -> Result<ScoreValue> + Sync,
{
    if cfg.samples < MIN_SAMPLES {
        return Err(domain(format!("monte carlo needs at least {MIN_SAMPLES} samples, got {}", cfg.samples)));
    }
    let m = cfg.samples;
    let chunks: Vec<u64> = (0..m.div_ceil(CHUNK)).collect();
    let work = || -> Result<Vec<(Vec<f64>, u64)>> {
        chunks
            .par_iter()
            .map(|&c| run_chunk(&sampler, &score, cfg.seed, c, CHUNK.min(m - c * CHUNK)))
            .collect()
    };
    let parts = if cfg.workers == 0 {
        work()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {} workers: {e}", cfg.workers)))?
            .install(work)?
    };
    let mut scores = Vec::with_capacity(m as usize);
    let mut undefined = 0;
    for (s, u) in parts {
        scores.extend(s);
        undefined += u;
    }
    if undefined as f64 > UNDEFINED_LIMIT * m as f64 {
        return Err(Error::SupportMismatch { undefined, samples: m });
    }
    let squares: Vec<f64> = scores.iter().map(|s| s * s).collect();
    let (value, std_error) = mean_and_se(&squares);
    let (mean_score, mean_score_se) = mean_and_se(&scores);
    let batch_means: Vec<f64> = (0..BATCHES)
        .map(|b| {
            let lo = b * squares.len() / BATCHES;
            let hi = (b + 1) * squares.len() / BATCHES;
            pairwise_sum(&squares[lo..hi]) / (hi - lo) as f64
        })
        .collect();
    let (_, batch_std_error) = mean_and_se(&batch_means);
    Ok(McRun {
        estimate: FisherEstimate { value, std_error, samples: m, method: Method::MonteCarlo },
        undefined,
        mean_score,
        mean_score_se,
        batch_std_error,
    })
}
