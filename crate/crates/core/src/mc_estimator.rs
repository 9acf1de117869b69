//! Monte-Carlo estimation of `E[sup |B_H|^gamma]` and `E[sup B_H^gamma]`.
//!
//! Replication `r` is the `r % 2`-th path of pair `r / 2`, and pair `p`
//! draws from random stream `p` of the run seed. Pairs are grouped into
//! fixed blocks of [`BLOCK_PAIRS`]; blocks run in parallel and their partial
//! moments are merged in block order, so results do not depend on the
//! number of worker threads.
//!
//! The grid maximum never exceeds the continuous supremum, so every grid
//! estimate is biased low. [`richardson_bias_estimate`] fits
//! `point(n) = K - c n^{-H}` across nested grids sharing the same paths.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closed_form::{BoundsReport, Horizon, HurstExponent, MomentOrder, SupremumKind};
use crate::error::{domain, Error, Result};
use crate::fbm_sampler::{FbmSampler, GridSpec};
use crate::rng::stream_rng;
use crate::stats::Moments;

pub const MIN_REPLICATIONS: u64 = 100;
pub const BLOCK_PAIRS: u64 = 32;
pub const Z95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupMode {
    Reflected,
    OneSided,
}

impl SupMode {
    pub fn supremum_kind(self) -> SupremumKind {
        match self {
            SupMode::Reflected => SupremumKind::Reflected,
            SupMode::OneSided => SupremumKind::OneSided,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub point: f64,
    pub stderr: f64,
    pub ci95: (f64, f64),
    pub n_replications: u64,
    pub grid: GridSpec,
    pub mode: SupMode,
    pub bias_extrapolated: Option<f64>,
    pub seed: u64,
}

impl EstimateReport {
    fn from_mean(
        point: f64,
        stderr: f64,
        n_replications: u64,
        grid: GridSpec,
        mode: SupMode,
        seed: u64,
    ) -> Self {
        Self {
            point,
            stderr,
            ci95: (point - Z95 * stderr, point + Z95 * stderr),
            n_replications,
            grid,
            mode,
            bias_extrapolated: None,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Consistent,
    ViolationLower,
    ViolationUpper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationOutcome {
    pub estimate: EstimateReport,
    pub bounds: BoundsReport,
    pub verdict: Verdict,
    pub slack: f64,
}

/// Supremum of `path[0], path[stride], ..., path[len]` (or of their absolute
/// values).
pub fn grid_sup(path: &[f64], stride: usize, len: usize, mode: SupMode) -> f64 {
    let it = path[..=len].iter().step_by(stride);
    match mode {
        SupMode::Reflected => it.fold(0.0, |m, v| m.max(v.abs())),
        SupMode::OneSided => it.fold(0.0, |m, &v| m.max(v)),
    }
}

fn check_replications(n: u64) -> Result<()> {
    if n < MIN_REPLICATIONS {
        return domain(format!(
            "at least {MIN_REPLICATIONS} replications are required, got {n}"
        ));
    }
    Ok(())
}

/// Runs `block` over consecutive pair ranges in parallel and returns the
/// per-block results in block order.
fn run_blocks<T: Send>(n_reps: u64, block: impl Fn(std::ops::Range<u64>) -> T + Sync) -> Vec<T> {
    let n_pairs = n_reps.div_ceil(2);
    let n_blocks = n_pairs.div_ceil(BLOCK_PAIRS);
    (0..n_blocks)
        .into_par_iter()
        .map(|b| block(b * BLOCK_PAIRS..((b + 1) * BLOCK_PAIRS).min(n_pairs)))
        .collect()
}

/// Calls `visit(replication, path)` for every replication of the pairs in
/// `pairs`.
fn visit_pairs(
    sampler: &FbmSampler,
    seed: u64,
    n_reps: u64,
    pairs: std::ops::Range<u64>,
    mut visit: impl FnMut(u64, &[f64]),
) {
    let n = sampler.grid().n_steps;
    let mut a = vec![0.0; n + 1];
    let mut b = vec![0.0; n + 1];
    for p in pairs {
        sampler.sample_pair_into(&mut stream_rng(seed, p), &mut a, &mut b);
        visit(2 * p, &a);
        if 2 * p + 1 < n_reps {
            visit(2 * p + 1, &b);
        }
    }
}

fn accumulate(
    sampler: &FbmSampler,
    seed: u64,
    n_reps: u64,
    dim: usize,
    features: impl Fn(&[f64], &mut [f64]) + Sync,
) -> Moments {
    let blocks = run_blocks(n_reps, |pairs| {
        let mut m = Moments::new(dim);
        let mut row = vec![0.0; dim];
        visit_pairs(sampler, seed, n_reps, pairs, |_, path| {
            features(path, &mut row);
            m.push(&row);
        });
        m
    });
    blocks.iter().fold(Moments::new(dim), |mut acc, m| {
        acc.merge(m);
        acc
    })
}

/// `f(path)` for every replication, in replication order.
pub fn map_paths<T: Send>(
    sampler: &FbmSampler,
    n_reps: u64,
    seed: u64,
    f: impl Fn(&[f64]) -> T + Sync,
) -> Vec<T> {
    run_blocks(n_reps, |pairs| {
        let mut out = Vec::with_capacity(2 * (pairs.end - pairs.start) as usize);
        visit_pairs(sampler, seed, n_reps, pairs, |_, path| out.push(f(path)));
        out
    })
    .into_iter()
    .flatten()
    .collect()
}

/// Grid suprema of `n_reps` paths, in replication order.
pub fn sup_samples(
    hurst: HurstExponent,
    grid: GridSpec,
    n_reps: u64,
    seed: u64,
    mode: SupMode,
) -> Result<Vec<f64>> {
    let sampler = FbmSampler::new(hurst, grid)?;
    let n = grid.n_steps;
    Ok(map_paths(&sampler, n_reps, seed, |p| {
        grid_sup(p, 1, n, mode)
    }))
}

/// Sample mean of `(grid sup)^gamma` with a 95% normal interval.
pub fn estimate_sup_moment(
    hurst: HurstExponent,
    gamma: MomentOrder,
    grid: GridSpec,
    n_replications: u64,
    seed: u64,
    mode: SupMode,
) -> Result<EstimateReport> {
    check_replications(n_replications)?;
    let sampler = FbmSampler::new(hurst, grid)?;
    let g = gamma.value();
    let n = grid.n_steps;
    let m = accumulate(&sampler, seed, n_replications, 1, |p, row| {
        row[0] = grid_sup(p, 1, n, mode).powf(g);
    });
    Ok(EstimateReport::from_mean(
        m.mean(0),
        m.stderr(0),
        n_replications,
        grid,
        mode,
        seed,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RichardsonReport {
    pub extrapolated: f64,
    pub extrapolated_stderr: f64,
    /// Fitted `c` in `point(n) = K - c n^{-H}`.
    pub coefficient: f64,
    pub grids: Vec<GridSpec>,
    pub points: Vec<f64>,
    pub stderrs: Vec<f64>,
    /// `extrapolated - point(n)` per grid.
    pub bias_per_grid: Vec<f64>,
    /// Set when a finer grid's estimate drops below a coarser one by more
    /// than three standard errors of the difference.
    pub non_monotone: bool,
    /// The finest-grid estimate, with `bias_extrapolated` filled in.
    pub finest: EstimateReport,
}

impl RichardsonReport {
    /// Fitted bias of the finest grid, `c n^{-H}`, floored at zero.
    pub fn bias_allowance(&self, hurst: HurstExponent) -> f64 {
        let n = self.grids.last().map_or(1, |g| g.n_steps) as f64;
        (self.coefficient * n.powf(-hurst.value())).max(0.0)
    }

    /// The extrapolated value presented as an estimate.
    pub fn extrapolated_estimate(&self) -> EstimateReport {
        let mut est = EstimateReport::from_mean(
            self.extrapolated,
            self.extrapolated_stderr,
            self.finest.n_replications,
            self.finest.grid,
            self.finest.mode,
            self.finest.seed,
        );
        est.bias_extrapolated = Some(self.extrapolated);
        est
    }
}

/// Least-squares weights for intercept and slope of `y` on `x`.
fn linear_fit_weights(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let k = x.len() as f64;
    let mean = x.iter().sum::<f64>() / k;
    let sxx: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
    let slope: Vec<f64> = x.iter().map(|v| (v - mean) / sxx).collect();
    let intercept = slope.iter().map(|s| 1.0 / k - mean * s).collect();
    (intercept, slope)
}

/// Grid estimates on nested grids from the same paths (coarser grids are
/// subsamples of the finest) and their `K - c n^{-H}` extrapolation.
pub fn richardson_bias_estimate(
    hurst: HurstExponent,
    gamma: MomentOrder,
    grids: [GridSpec; 3],
    n_replications: u64,
    seed: u64,
    mode: SupMode,
) -> Result<RichardsonReport> {
    check_replications(n_replications)?;
    let finest = grids[2];
    for w in grids.windows(2) {
        if w[0].horizon != w[1].horizon {
            return domain("nested grids must share the horizon");
        }
        if w[1].n_steps <= w[0].n_steps || w[1].n_steps % w[0].n_steps != 0 {
            return domain(format!(
                "grids must be strictly nested, got {} then {}",
                w[0].n_steps, w[1].n_steps
            ));
        }
    }
    let strides: Vec<usize> = grids.iter().map(|g| finest.n_steps / g.n_steps).collect();
    let sampler = FbmSampler::new(hurst, finest)?;
    let g = gamma.value();
    let n = finest.n_steps;
    let m = accumulate(&sampler, seed, n_replications, 3, |p, row| {
        for (j, &s) in strides.iter().enumerate() {
            row[j] = grid_sup(p, s, n, mode).powf(g);
        }
    });

    let x: Vec<f64> = grids
        .iter()
        .map(|gr| (gr.n_steps as f64).powf(-hurst.value()))
        .collect();
    let (w_k, w_slope) = linear_fit_weights(&x);
    let (extrapolated, extrapolated_stderr) = m.linear_combination(&w_k);
    let (slope, _) = m.linear_combination(&w_slope);
    let points: Vec<f64> = (0..3).map(|j| m.mean(j)).collect();
    let stderrs: Vec<f64> = (0..3).map(|j| m.stderr(j)).collect();
    let bias_per_grid = points.iter().map(|p| extrapolated - p).collect();
    let non_monotone = (0..2).any(|j| {
        let mut w = [0.0; 3];
        w[j] = -1.0;
        w[j + 1] = 1.0;
        let (diff, se) = m.linear_combination(&w);
        diff < -3.0 * se
    });
    let mut finest_report =
        EstimateReport::from_mean(points[2], stderrs[2], n_replications, finest, mode, seed);
    finest_report.bias_extrapolated = Some(extrapolated);
    Ok(RichardsonReport {
        extrapolated,
        extrapolated_stderr,
        coefficient: -slope,
        grids: grids.to_vec(),
        points,
        stderrs,
        bias_per_grid,
        non_monotone,
        finest: finest_report,
    })
}

/// `(n/16, n/4, n)`, the default nested triple for a finest grid of `n`.
pub fn default_richardson_grids(finest: GridSpec) -> Result<[GridSpec; 3]> {
    let n = finest.n_steps;
    if n % 16 != 0 {
        return domain(format!("grid {n} is too coarse for a nested triple"));
    }
    Ok([
        GridSpec::new(n / 16, finest.horizon)?,
        GridSpec::new(n / 4, finest.horizon)?,
        finest,
    ])
}

/// Checks whether the interval `[ci_low - bias_allowance, ci_high]` meets
/// `[lower, upper]` (upper = infinity when absent).
pub fn verify_against_bounds(
    estimate: &EstimateReport,
    bounds: &BoundsReport,
    bias_allowance: f64,
) -> Result<VerificationOutcome> {
    if estimate.mode.supremum_kind() != bounds.supremum {
        return Err(Error::ModeMismatch(format!(
            "estimate is {:?} but bounds are for the {:?} supremum",
            estimate.mode, bounds.supremum
        )));
    }
    if !(bias_allowance >= 0.0) {
        return domain(format!("bias allowance must be >= 0, got {bias_allowance}"));
    }
    let lo = estimate.ci95.0 - bias_allowance;
    let hi = estimate.ci95.1;
    let upper = bounds.upper.unwrap_or(f64::INFINITY);
    let (verdict, slack) = if hi < bounds.lower {
        (Verdict::ViolationLower, hi - bounds.lower)
    } else if lo > upper {
        (Verdict::ViolationUpper, upper - lo)
    } else {
        (Verdict::Consistent, (hi - bounds.lower).min(upper - lo))
    };
    Ok(VerificationOutcome {
        estimate: estimate.clone(),
        bounds: bounds.clone(),
        verdict,
        slack,
    })
}

/// Extrapolated reflected estimate on `grids` checked against [`k_bounds`].
///
/// [`k_bounds`]: crate::closed_form::k_bounds
pub fn verify_extrapolated(
    hurst: HurstExponent,
    gamma: MomentOrder,
    grids: [GridSpec; 3],
    n_replications: u64,
    seed: u64,
) -> Result<(RichardsonReport, VerificationOutcome)> {
    let bounds = crate::closed_form::k_bounds(hurst, grids[2].horizon, gamma)?;
    let r = richardson_bias_estimate(
        hurst,
        gamma,
        grids,
        n_replications,
        seed,
        SupMode::Reflected,
    )?;
    let outcome = verify_against_bounds(&r.extrapolated_estimate(), &bounds, 0.0)?;
    Ok((r, outcome))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub point_t1: EstimateReport,
    pub point_t2: EstimateReport,
    /// `(T2/T1)^{gamma H}`.
    pub expected_ratio: f64,
    /// `point(T2) / point(T1)`.
    pub observed_ratio: f64,
    /// `observed_ratio / expected_ratio - 1`.
    pub deviation: f64,
    pub stderr: f64,
    pub passes: bool,
}

/// Floating-point slack added to the `3 SE` acceptance band, which is
/// zero-width when the two horizons see identical randomness (`H = 1`).
const SCALING_FP_SLACK: f64 = 1e-12;

/// Estimates at two horizons with the same step length and the same random
/// streams, compared through self-similarity.
#[allow(clippy::too_many_arguments)]
pub fn scaling_check(
    hurst: HurstExponent,
    gamma: MomentOrder,
    t1: Horizon,
    t2: Horizon,
    steps_t1: usize,
    n_replications: u64,
    seed: u64,
    mode: SupMode,
) -> Result<ScalingReport> {
    check_replications(n_replications)?;
    let exact_steps = steps_t1 as f64 * t2.value() / t1.value();
    let steps_t2 = exact_steps.round() as usize;
    if (exact_steps - steps_t2 as f64).abs() > 1e-9 {
        return domain(format!(
            "horizon ratio {} does not give an integer step count",
            t2.value() / t1.value()
        ));
    }
    let g1 = GridSpec::new(steps_t1, t1)?;
    let g2 = GridSpec::new(steps_t2, t2)?;
    let s1 = FbmSampler::new(hurst, g1)?;
    let s2 = FbmSampler::new(hurst, g2)?;
    let g = gamma.value();
    let blocks = run_blocks(n_replications, |pairs| {
        let mut m = Moments::new(2);
        let mut first = Vec::new();
        visit_pairs(&s1, seed, n_replications, pairs.clone(), |_, p| {
            first.push(grid_sup(p, 1, steps_t1, mode).powf(g));
        });
        let mut k = 0;
        visit_pairs(&s2, seed, n_replications, pairs, |_, p| {
            m.push(&[first[k], grid_sup(p, 1, steps_t2, mode).powf(g)]);
            k += 1;
        });
        m
    });
    let m = blocks.iter().fold(Moments::new(2), |mut acc, b| {
        acc.merge(b);
        acc
    });
    let p1 = m.mean(0);
    let p2 = m.mean(1);
    let expected_ratio = (t2.value() / t1.value()).powf(g * hurst.value());
    let observed_ratio = p2 / p1;
    let deviation = observed_ratio / expected_ratio - 1.0;
    // delta method for p2 / (r p1)
    let nrep = m.count() as f64;
    let d1 = -p2 / (expected_ratio * p1 * p1);
    let d2 = 1.0 / (expected_ratio * p1);
    let var =
        (d1 * d1 * m.variance(0) + d2 * d2 * m.variance(1) + 2.0 * d1 * d2 * m.covariance(0, 1))
            / nrep;
    let stderr = var.max(0.0).sqrt();
    Ok(ScalingReport {
        point_t1: EstimateReport::from_mean(p1, m.stderr(0), n_replications, g1, mode, seed),
        point_t2: EstimateReport::from_mean(p2, m.stderr(1), n_replications, g2, mode, seed),
        expected_ratio,
        observed_ratio,
        deviation,
        stderr,
        passes: deviation.abs() <= 3.0 * stderr + SCALING_FP_SLACK,
    })
}
