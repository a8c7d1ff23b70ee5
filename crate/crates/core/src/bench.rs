//! Benchmark runs on random 0/1 instances, with predicted-work models.
//!
//! CSV columns, in order, are the fields of [`BenchRow`].

use std::io::Write;
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{generate_random, normalize};
use crate::solver::{solve, SolverConfig, Variant};

/// Predicted basic operations of the randomized solver,
/// `[12 (r+c) + 480 / d] ln(rc) / eps^2`. The constants are kept fixed
/// rather than fitted; the CSV carries raw counters for fitting your own.
pub fn predicted_work(rows: usize, cols: usize, density: f64, eps: f64) -> f64 {
    (12.0 * (rows + cols) as f64 + 480.0 / density) * ((rows * cols) as f64).ln() / (eps * eps)
}

/// Estimated Simplex work `5 min(r,c) r c`.
pub fn simplex_work(rows: usize, cols: usize) -> f64 {
    5.0 * rows.min(cols) as f64 * rows as f64 * cols as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub rows: usize,
    pub cols: usize,
    pub density: f64,
    pub eps: f64,
    pub variant: Variant,
    pub seed: u64,
    pub nnz: usize,
    pub budget: u64,
    pub iterations: u64,
    pub empty_iterations: u64,
    pub increments: u64,
    pub traversed: u64,
    pub deletions: u64,
    pub sampler_updates: u64,
    /// `increments / ((r+c) N)`, never above one.
    pub increments_per_budget: f64,
    pub primal_value: f64,
    pub dual_value: f64,
    pub ratio: f64,
    pub wall_seconds: f64,
    pub predicted_work: f64,
    pub simplex_work: f64,
    /// `simplex_work / predicted_work`.
    pub predicted_speedup: f64,
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub rows: usize,
    pub cols: usize,
    pub density: f64,
    pub eps: f64,
    pub variant: Variant,
    pub seeds: Vec<u64>,
    pub threads: usize,
}

/// Generates, solves and measures one instance.
pub fn bench_one(cfg: &BenchConfig, seed: u64) -> Result<BenchRow> {
    let inst = generate_random(cfg.rows, cfg.cols, cfg.density, seed)?;
    let norm = normalize(&inst)?;
    let start = Instant::now();
    let pair = solve(&norm.matrix, &SolverConfig::new(cfg.eps, cfg.variant, seed))?;
    let wall_seconds = start.elapsed().as_secs_f64();
    let c = pair.counters;
    let (r, k) = (cfg.rows, cfg.cols);
    let predicted = predicted_work(r, k, cfg.density, cfg.eps);
    let simplex = simplex_work(r, k);
    Ok(BenchRow {
        rows: r,
        cols: k,
        density: cfg.density,
        eps: cfg.eps,
        variant: cfg.variant,
        seed,
        nnz: inst.nnz(),
        budget: pair.budget,
        iterations: c.iterations,
        empty_iterations: c.empty_iterations,
        increments: c.increments,
        traversed: c.traversed,
        deletions: c.deletions,
        sampler_updates: c.sampler_updates,
        increments_per_budget: c.increments as f64 / ((r + k) as f64 * pair.budget as f64),
        primal_value: pair.primal_value,
        dual_value: pair.dual_value,
        ratio: pair.ratio,
        wall_seconds,
        predicted_work: predicted,
        simplex_work: simplex,
        predicted_speedup: simplex / predicted,
    })
}

/// Runs every seed, spread over `cfg.threads` workers, and returns rows in
/// seed order.
pub fn run_bench(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    if !(cfg.density > 0.0 && cfg.density <= 1.0) {
        return Err(Error::Precondition(format!("density {} not in (0, 1]", cfg.density)));
    }
    let threads = cfg.threads.max(1).min(cfg.seeds.len().max(1));
    let results: Mutex<Vec<(usize, Result<BenchRow>)>> = Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for w in 0..threads {
            let results = &results;
            scope.spawn(move || {
                for (k, &seed) in cfg.seeds.iter().enumerate().skip(w).step_by(threads) {
                    let row = bench_one(cfg, seed);
                    results.lock().expect("bench sink poisoned").push((k, row));
                }
            });
        }
    });
    let mut results = results.into_inner().map_err(|_| Error::Internal("bench sink poisoned".into()))?;
    results.sort_by_key(|(k, _)| *k);
    results.into_iter().map(|(_, r)| r).collect()
}

pub fn write_csv<W: Write>(w: W, rows: &[BenchRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}
