//! Replicate studies: mean squared error of occupation estimators, the
//! decay of the time-t law towards the target, and long-run occupation
//! checks with batch-means error bars.

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::estimators::{occupation_curve, occupation_times, positions_at, IndicatorQuery};
use crate::pdmp::{simulate, Skeleton, ZigZagState};
use crate::quadrature::pairwise_sum;
use crate::rng::RngStream;
use crate::targets::{tail_probability_truth, RefreshPolicy, Target};
use crate::theory::LyapunovValue;

/// `n` log-spaced times from `lo` to `hi`, both included.
pub fn log_checkpoints(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && n >= 1) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < lo <= hi and n >= 1, got lo = {lo}, hi = {hi}, n = {n}"
        )));
    }
    if n == 1 {
        return Ok(vec![hi]);
    }
    let ratio = (hi / lo).ln();
    let mut out: Vec<f64> = (0..n)
        .map(|i| lo * (ratio * i as f64 / (n - 1) as f64).exp())
        .collect();
    out[n - 1] = hi;
    Ok(out)
}

/// A Monte Carlo study over independent replicates.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub target_tag: String,
    pub refresh_tag: String,
    pub initial: ZigZagState,
    pub horizon: f64,
    pub replicates: usize,
    pub checkpoints: Vec<f64>,
    pub seed: u64,
    pub query: IndicatorQuery,
}

impl ExperimentConfig {
    /// Resolves the tags and checks the invariants.
    pub fn resolve(&self) -> Result<(Target, RefreshPolicy)> {
        if self.replicates == 0 {
            return Err(Error::InvalidParameter("replicates must be at least 1".to_string()));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!("horizon must be positive, got {}", self.horizon)));
        }
        if self.checkpoints.is_empty()
            || self.checkpoints.iter().any(|&c| !(c > 0.0 && c <= self.horizon))
            || self.checkpoints.windows(2).any(|w| w[1] < w[0])
        {
            return Err(Error::BadCheckpoints);
        }
        Ok((Target::from_tag(&self.target_tag)?, RefreshPolicy::from_tag(&self.refresh_tag)?))
    }

    fn simulate_replicate(&self, r: usize, target: &Target, refresh: &RefreshPolicy) -> Result<Skeleton> {
        let mut rng = RngStream::new(self.seed, r as u64);
        simulate(self.initial, self.horizon, target, refresh, &mut rng)
    }
}

/// Mean squared error of the occupation estimator at each checkpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct MseCurve {
    pub checkpoints: Vec<f64>,
    pub mse: Vec<f64>,
    pub stderr: Vec<f64>,
    pub truth: f64,
}

fn column_mean_and_stderr(rows: &[Vec<f64>], col: usize) -> (f64, f64) {
    let n = rows.len();
    let column: Vec<f64> = rows.iter().map(|r| r[col]).collect();
    let mean = pairwise_sum(&column) / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = column.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Runs every replicate on its own stream (`stream_id = replicate index`)
/// and averages squared errors against the exact tail probability.
pub fn run_mse(config: &ExperimentConfig) -> Result<MseCurve> {
    let (target, refresh) = config.resolve()?;
    let truth = tail_probability_truth(&target, config.query.a)?;
    let squared: Vec<Vec<f64>> = (0..config.replicates)
        .into_par_iter()
        .map(|r| {
            let sk = config.simulate_replicate(r, &target, &refresh)?;
            let curve = occupation_curve(&sk, config.query, &config.checkpoints)?;
            Ok(curve.iter().map(|e| (e - truth) * (e - truth)).collect())
        })
        .collect::<Result<_>>()?;
    let (mse, stderr) = (0..config.checkpoints.len())
        .map(|c| column_mean_and_stderr(&squared, c))
        .unzip();
    Ok(MseCurve {
        checkpoints: config.checkpoints.clone(),
        mse,
        stderr,
        truth,
    })
}

/// Least-squares slope of `log D(t)` against `log t`.
#[derive(Clone, Debug, PartialEq)]
pub enum SlopeFit {
    Fitted {
        slope: f64,
        intercept: f64,
        ci_low: f64,
        ci_high: f64,
        points: usize,
    },
    /// Fewer than four checkpoints in the window sit above the noise floor.
    Inconclusive { points: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateReport {
    pub checkpoints: Vec<f64>,
    /// `D(t) = max_a |P(X_t >= a) - π([a, inf))|` over the thresholds.
    pub discrepancy: Vec<f64>,
    pub noise_floor: f64,
    pub fit: SlopeFit,
}

/// Fits `log y = intercept + slope log t` with a 95% Student-t interval on the slope.
pub fn loglog_fit(t: &[f64], y: &[f64]) -> Result<SlopeFit> {
    let n = t.len();
    if n != y.len() {
        return Err(Error::InvalidParameter("fit inputs differ in length".to_string()));
    }
    if n < 4 {
        return Ok(SlopeFit::Inconclusive { points: n });
    }
    let xs: Vec<f64> = t.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = pairwise_sum(&xs) / n as f64;
    let my = pairwise_sum(&ys) / n as f64;
    let sxx = pairwise_sum(&xs.iter().map(|x| (x - mx) * (x - mx)).collect::<Vec<_>>());
    let sxy = pairwise_sum(&xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).collect::<Vec<_>>());
    if !(sxx > 0.0) {
        return Ok(SlopeFit::Inconclusive { points: n });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss = pairwise_sum(
        &xs.iter()
            .zip(&ys)
            .map(|(x, y)| (y - intercept - slope * x).powi(2))
            .collect::<Vec<_>>(),
    );
    let se = (rss / (n - 2) as f64 / sxx).sqrt();
    let q = StudentsT::new(0.0, 1.0, (n - 2) as f64)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?
        .inverse_cdf(0.975);
    Ok(SlopeFit::Fitted {
        slope,
        intercept,
        ci_low: slope - q * se,
        ci_high: slope + q * se,
        points: n,
    })
}

/// Estimates `D(t)` from the replicate positions and fits its decay over
/// checkpoints in `[window.0, window.1]` where `D(t)` exceeds `2/sqrt(R)`.
pub fn rate_slope(config: &ExperimentConfig, thresholds: &[f64], window: (f64, f64)) -> Result<RateReport> {
    let (target, refresh) = config.resolve()?;
    if thresholds.is_empty() {
        return Err(Error::InvalidParameter("need at least one threshold".to_string()));
    }
    let truths = thresholds
        .iter()
        .map(|&a| tail_probability_truth(&target, a))
        .collect::<Result<Vec<f64>>>()?;
    let positions: Vec<Vec<f64>> = (0..config.replicates)
        .into_par_iter()
        .map(|r| positions_at(&config.simulate_replicate(r, &target, &refresh)?, &config.checkpoints))
        .collect::<Result<_>>()?;
    let reps = config.replicates as f64;
    let discrepancy: Vec<f64> = (0..config.checkpoints.len())
        .map(|c| {
            thresholds
                .iter()
                .zip(&truths)
                .map(|(&a, &truth)| {
                    let above = positions.iter().filter(|p| p[c] >= a).count() as f64;
                    (above / reps - truth).abs()
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let noise_floor = 2.0 / reps.sqrt();
    let (ts, ds): (Vec<f64>, Vec<f64>) = config
        .checkpoints
        .iter()
        .zip(&discrepancy)
        .filter(|(&t, &d)| t >= window.0 && t <= window.1 && d > noise_floor)
        .map(|(&t, &d)| (t, d))
        .unzip();
    Ok(RateReport {
        checkpoints: config.checkpoints.clone(),
        discrepancy,
        noise_floor,
        fit: loglog_fit(&ts, &ds)?,
    })
}

/// Smallest `B` with `B (V / t^{1+k} + 1 / t^k) >= y` at every `(t, y)`.
pub fn fit_b(series: &[(f64, f64)], v: LyapunovValue, k: f64) -> Result<f64> {
    if !(k > 0.0) {
        return Err(Error::InvalidParameter(format!("k must be positive, got {k}")));
    }
    let mut b: f64 = 0.0;
    for &(t, y) in series {
        if !(t > 0.0) || y < 0.0 {
            return Err(Error::InvalidParameter(format!("bad series point ({t}, {y})")));
        }
        let ln_t = t.ln();
        let shape = (v.ln - (1.0 + k) * ln_t).exp() + (-k * ln_t).exp();
        b = b.max(y / shape);
    }
    Ok(b)
}

/// Long-run occupation fraction of `[lo, hi)` with a batch-means standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BatchEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub truth: f64,
}

impl BatchEstimate {
    /// `|estimate - truth|` in units of the standard error.
    pub fn z_score(&self) -> f64 {
        (self.estimate - self.truth).abs() / self.stderr
    }
}

pub fn batch_means(skeleton: &Skeleton, target: &Target, lo: f64, hi: f64, batches: usize) -> Result<BatchEstimate> {
    if !(lo < hi) || batches < 2 {
        return Err(Error::InvalidParameter(format!(
            "need lo < hi and at least 2 batches, got [{lo}, {hi}) with {batches}"
        )));
    }
    let t = skeleton.horizon();
    let width = t / batches as f64;
    let edges: Vec<f64> = (1..=batches).map(|i| if i == batches { t } else { width * i as f64 }).collect();
    let above_lo = occupation_times(skeleton, IndicatorQuery::new(lo), &edges)?;
    let above_hi = if hi.is_finite() {
        occupation_times(skeleton, IndicatorQuery::new(hi), &edges)?
    } else {
        vec![0.0; batches]
    };
    let cumulative: Vec<f64> = above_lo.iter().zip(&above_hi).map(|(a, b)| a - b).collect();
    let fractions: Vec<f64> = (0..batches)
        .map(|i| {
            let prev = if i == 0 { 0.0 } else { cumulative[i - 1] };
            let start = if i == 0 { 0.0 } else { edges[i - 1] };
            (cumulative[i] - prev) / (edges[i] - start)
        })
        .collect();
    let n = batches as f64;
    let mean = pairwise_sum(&fractions) / n;
    let var = pairwise_sum(&fractions.iter().map(|f| (f - mean) * (f - mean)).collect::<Vec<_>>()) / (n - 1.0);
    let truth = tail_probability_truth(target, lo)? - if hi.is_finite() { tail_probability_truth(target, hi)? } else { 0.0 };
    Ok(BatchEstimate {
        estimate: cumulative[batches - 1] / t,
        stderr: (var / n).sqrt(),
        truth,
    })
}

/// Runs `f` on a dedicated pool of `threads` workers, or on the global pool when `None`.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(Error::InvalidParameter("thread count must be positive".to_string())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| Error::InvalidParameter(e.to_string())),
    }
}
