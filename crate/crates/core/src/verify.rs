//! Certificates for solution pairs and Monte Carlo checks of the solver's
//! probabilistic properties.
//!
//! Every statistical check reports its statistic next to the threshold it
//! was judged against; nothing is compared against a hidden tolerance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::model::SparseNonNegMatrix;
use crate::oracle::{LpStatus, OracleResult};
use crate::scaled::ScaledF64;
use crate::solver::{OpCounters, SolutionPair, SolverState, Variant};

/// Feasibility slack allowed on both sides of a certificate.
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// Fewest Monte Carlo trials accepted by [`drift_test`] and [`tracking_test`].
pub const MIN_TRIALS: usize = 1000;
/// Soft traversal overhead; exceeding it is logged.
pub const TRAVERSAL_SOFT: f64 = 8.0;
/// Hard traversal overhead; exceeding it fails the audit.
pub const TRAVERSAL_HARD: f64 = 32.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// `max_i (M_i x* - 1)`.
    pub max_violation: f64,
    /// `min_j (M_j^T xhat* - 1)`.
    pub min_slack: f64,
    pub primal_value: f64,
    pub dual_value: f64,
    pub ratio: f64,
    /// `1 - k eps` for the variant's `k`.
    pub target: f64,
    pub verdict: Verdict,
    /// `|x*| / OPT` when an oracle value was supplied.
    pub oracle_gap: Option<f64>,
}

impl Certificate {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// Certifies `pair` against `m` by recomputing both products from scratch.
pub fn certify(
    m: &SparseNonNegMatrix,
    pair: &SolutionPair,
    eps: f64,
    variant: Variant,
    oracle: Option<&OracleResult>,
) -> Result<Certificate> {
    certify_vectors(m, &pair.primal, &pair.dual, eps, variant, oracle)
}

pub fn certify_vectors(
    m: &SparseNonNegMatrix,
    primal: &[f64],
    dual: &[f64],
    eps: f64,
    variant: Variant,
    oracle: Option<&OracleResult>,
) -> Result<Certificate> {
    let (mx, mtx) = m.exact_products(primal, dual)?;
    let max_violation = mx.iter().map(|v| v - 1.0).fold(f64::NEG_INFINITY, f64::max);
    let min_slack = mtx.iter().map(|v| v - 1.0).fold(f64::INFINITY, f64::min);
    let primal_value: f64 = primal.iter().sum();
    let dual_value: f64 = dual.iter().sum();
    let ratio = primal_value / dual_value;
    let target = 1.0 - variant.guarantee_factor() * eps;
    let ok = max_violation <= FEASIBILITY_TOL
        && min_slack >= -FEASIBILITY_TOL
        && primal.iter().chain(dual).all(|&v| v >= 0.0)
        && ratio >= target;
    let oracle_gap = oracle
        .filter(|o| o.status == LpStatus::Optimal)
        .map(|o| primal_value / o.value);
    Ok(Certificate {
        max_violation,
        min_slack,
        primal_value,
        dual_value,
        ratio,
        target,
        verdict: if ok { Verdict::Pass } else { Verdict::Fail },
        oracle_gap,
    })
}

/// One checked property.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub name: String,
    pub sample_size: u64,
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StatReport {
    pub properties: Vec<PropertyCheck>,
}

impl StatReport {
    pub fn push(&mut self, name: &str, sample_size: u64, statistic: f64, threshold: f64, pass: bool) {
        self.properties.push(PropertyCheck {
            name: name.to_string(),
            sample_size,
            statistic,
            threshold,
            pass,
        });
    }

    pub fn extend(&mut self, other: StatReport) {
        self.properties.extend(other.properties);
    }

    pub fn passed(&self) -> bool {
        self.properties.iter().all(|p| p.pass)
    }

    pub fn get(&self, name: &str) -> Option<&PropertyCheck> {
        self.properties.iter().find(|p| p.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Checks a run's counters: the increment budget `(r+c) N` (deterministic),
/// the empty-iteration fraction against `3/4 + 5 sigma`, and the traversal
/// overhead `traversed / (increments + 2 iterations)`.
pub fn audit_counters(counters: &OpCounters, rows: usize, cols: usize, budget: u64) -> StatReport {
    let mut report = StatReport::default();
    let cap = (rows + cols) as f64 * budget as f64;
    let inc = counters.increments as f64;
    report.push("increment_budget", counters.iterations, inc, cap, inc <= cap);

    let n = counters.iterations;
    if n > 0 {
        let frac = counters.empty_iterations as f64 / n as f64;
        let threshold = 0.75 + 5.0 * (0.75 * 0.25 / n as f64).sqrt();
        report.push("empty_rate", n, frac, threshold, frac <= threshold);

        let overhead = counters.traversed as f64 / (inc + 2.0 * n as f64);
        if overhead > TRAVERSAL_SOFT {
            log::warn!("traversal overhead {overhead:.2} above {TRAVERSAL_SOFT}");
        }
        report.push("traversal_overhead", n, overhead, TRAVERSAL_HARD, overhead <= TRAVERSAL_HARD);
    }
    report
}

/// Fraction of `successes` out of `runs` against a required rate.
pub fn success_rate(successes: u64, runs: u64, required: f64) -> StatReport {
    let mut report = StatReport::default();
    let rate = if runs == 0 { 0.0 } else { successes as f64 / runs as f64 };
    report.push("approx_success_rate", runs, rate, required, runs > 0 && rate >= required);
    report
}

fn check_frozen(state: &SolverState, trials: usize) -> Result<()> {
    if trials < MIN_TRIALS {
        return Err(Error::Precondition(format!(
            "{trials} trials is underpowered, need at least {MIN_TRIALS}"
        )));
    }
    if state.phat_total().is_zero() {
        return Err(Error::Precondition("no active columns to sample".into()));
    }
    if state.is_done() {
        return Err(Error::Precondition("frozen state has already terminated".into()));
    }
    Ok(())
}

fn trial_state(state: &SolverState, seed: u64, trial: usize) -> SolverState {
    let mut s = state.clone();
    s.reseed(seed, trial as u64);
    s
}

/// Sample mean and standard error.
fn mean_stderr(sum: f64, sum_sq: f64, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let mean = sum / nf;
    let var = ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
    (mean, (var / nf).sqrt())
}

/// Monte Carlo check that `|p| |phat|` does not grow in expectation over one
/// step. Reports the mean of `phi'/phi - 1` (the change relative to the
/// frozen value, so it stays finite whatever the magnitude of the weights);
/// passes iff the mean is at most three standard errors.
pub fn drift_test(state: &SolverState, trials: usize, seed: u64) -> Result<StatReport> {
    check_frozen(state, trials)?;
    let phi = state.p_total() * state.phat_total();
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for t in 0..trials {
        let mut s = trial_state(state, seed, t);
        s.step()?;
        let next: ScaledF64 = s.p_total() * s.phat_total();
        let d = next.ratio(&phi) - 1.0;
        sum += d;
        sum_sq += d * d;
    }
    let (mean, se) = mean_stderr(sum, sum_sq, trials);
    let mut report = StatReport::default();
    // a zero-variance sample passes only if it does not increase
    report.push("lyapunov_drift", trials as u64, mean, 3.0 * se, mean <= 3.0 * se);
    Ok(report)
}

/// Two-sided normal quantile with a Bonferroni correction over `tests`
/// comparisons at family-wise level `alpha`, floored at four.
pub fn corrected_threshold(tests: usize, alpha: f64) -> f64 {
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let q = normal.inverse_cdf(1.0 - alpha / (2.0 * tests.max(1) as f64));
    q.max(4.0)
}

/// Monte Carlo check that the integer counters track the products:
/// per row `E[dy_i] = M_{i j'} delta` and per active column
/// `E[dyhat_j] = M_{i' j} delta`, with `M` the solver's working matrix.
///
/// Each coordinate's mean difference is compared against the corrected
/// threshold (see [`corrected_threshold`], family-wise level `1e-3`) times
/// its standard error. The reported statistic is the largest `|z|`.
pub fn tracking_test(state: &SolverState, trials: usize, seed: u64) -> Result<StatReport> {
    check_frozen(state, trials)?;
    let m = state.matrix();
    let (rows, cols) = (m.rows(), m.cols());
    let active: Vec<usize> = (0..cols).filter(|&j| state.is_active(j)).collect();
    let coords = rows + active.len();
    let mut sum = vec![0.0; coords];
    let mut sum_sq = vec![0.0; coords];
    let mut diff = vec![0.0; coords];
    let mut col_slot = vec![usize::MAX; cols];
    for (k, &j) in active.iter().enumerate() {
        col_slot[j] = rows + k;
    }
    for t in 0..trials {
        let mut s = trial_state(state, seed, t);
        let trace = s.step()?;
        diff.iter_mut().for_each(|d| *d = 0.0);
        for (i, v) in m.col(trace.col) {
            diff[i] -= v * trace.delta;
        }
        for (j, v) in m.row(trace.row) {
            let k = col_slot[j];
            if k != usize::MAX {
                diff[k] -= v * trace.delta;
            }
        }
        for &i in &trace.rows_incremented {
            diff[i] += 1.0;
        }
        for &j in &trace.cols_incremented {
            diff[col_slot[j]] += 1.0;
        }
        for k in 0..coords {
            sum[k] += diff[k];
            sum_sq[k] += diff[k] * diff[k];
        }
    }
    let threshold = corrected_threshold(coords, 1e-3);
    let mut worst: f64 = 0.0;
    let mut pass = true;
    for k in 0..coords {
        let (mean, se) = mean_stderr(sum[k], sum_sq[k], trials);
        let z = if se > 0.0 {
            mean / se
        } else if mean.abs() <= 1e-12 {
            0.0
        } else {
            f64::INFINITY
        };
        worst = worst.max(z.abs());
        pass &= z.abs() <= threshold;
    }
    let mut report = StatReport::default();
    report.push("tracking_unbiased", trials as u64, worst, threshold, pass);
    Ok(report)
}

/// Draws a seed for a derived Monte Carlo stream; handy for callers that
/// want several independent tests from one master seed.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng.random()
}
