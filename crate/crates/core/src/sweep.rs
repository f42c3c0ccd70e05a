//! Distance sweeps and crossing detection.

use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::fixtures::DistanceTable;
use crate::noisy::{realistic_charlie_povm, realistic_key_rate_with, EveAttribution, HeraldingRule};
use crate::optics::{ChannelParams, DetectorParams};
use crate::optimize::{optimize_coefficients, optimize_gamma, ObjectiveKind, OptimizerConfig};
use crate::protocol::{key_rate, BoundCurvePoint, KeyRateBreakdown};
use crate::states::CoefficientVector;

/// `start, start + step, ...` up to `stop` inclusive (within `1e-9 · step`).
pub fn distance_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if step <= 0.0 || !step.is_finite() || !start.is_finite() || !stop.is_finite() {
        return domain("grid step must be positive and bounds finite");
    }
    if stop < start {
        return domain(format!("grid stop {stop} is below start {start}"));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| start + i as f64 * step).collect())
}

/// Where each sweep point gets its source coefficients.
#[derive(Clone, Debug)]
pub enum CoefficientSource {
    Fixed(CoefficientVector),
    /// Interpolated rows of a distance table.
    Table(DistanceTable),
    /// Truncated squeezed vacuum with a fixed `γ`.
    Gamma { gamma: f64, n_max: usize },
    /// Re-optimized at every distance.
    Optimize {
        n_max: usize,
        kind: Option<ObjectiveKind>,
        config: OptimizerConfig,
    },
    /// `γ` re-optimized at every distance.
    OptimizeGamma {
        n_max: usize,
        kind: Option<ObjectiveKind>,
    },
}

#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub grid: Vec<f64>,
    pub loss_db_per_km: f64,
    pub detector: Option<DetectorParams>,
    pub attribution: EveAttribution,
    pub source: CoefficientSource,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub distance_km: f64,
    pub bounds: BoundCurvePoint,
    pub coefficients: CoefficientVector,
    pub gamma: Option<f64>,
    pub breakdown: KeyRateBreakdown,
    /// Set when an optimizer stopped on its iteration budget.
    pub unconverged: bool,
}

impl SweepRow {
    pub fn key_rate(&self) -> f64 {
        self.breakdown.total_key_rate
    }

    pub fn rci(&self) -> f64 {
        self.breakdown.rci
    }
}

fn resolve(source: &CoefficientSource, channel: &ChannelParams, detector: Option<DetectorParams>) -> Result<(CoefficientVector, Option<f64>, bool)> {
    Ok(match source {
        CoefficientSource::Fixed(c) => (c.clone(), None, false),
        CoefficientSource::Table(t) => (t.coefficients(channel.distance_km)?, None, false),
        CoefficientSource::Gamma { gamma, n_max } => (CoefficientVector::squeezed(*gamma, *n_max)?, Some(*gamma), false),
        CoefficientSource::Optimize { n_max, kind, config } => {
            let r = optimize_coefficients(*n_max, channel, detector, *kind, config)?;
            (r.coefficients, None, !r.converged)
        }
        CoefficientSource::OptimizeGamma { n_max, kind } => {
            let r = optimize_gamma(*n_max, channel, *kind)?;
            (r.coefficients, r.gamma, !r.converged)
        }
    })
}

/// Evaluates every grid point in parallel; rows come back in grid order.
/// `workers = None` uses the global thread pool.
pub fn run_sweep(cfg: &SweepConfig, workers: Option<usize>) -> Result<Vec<SweepRow>> {
    let relay = match cfg.detector {
        Some(det) if !det.is_ideal() => Some(realistic_charlie_povm(&det)?),
        _ => None,
    };
    let point = |d: f64| -> Result<SweepRow> {
        let channel = ChannelParams::from_distance_with_loss(d, cfg.loss_db_per_km)?;
        let (coefficients, gamma, unconverged) = resolve(&cfg.source, &channel, cfg.detector)?;
        let breakdown = match &relay {
            Some(povm) => realistic_key_rate_with(
                &coefficients,
                &coefficients,
                &channel,
                povm,
                &HeraldingRule::default(),
                cfg.attribution,
            )?,
            None => key_rate(&coefficients, &coefficients, &channel)?,
        };
        Ok(SweepRow {
            distance_km: d,
            bounds: BoundCurvePoint::at_distance(d, cfg.loss_db_per_km)?,
            coefficients,
            gamma,
            breakdown,
            unconverged,
        })
    };
    let run = || cfg.grid.par_iter().map(|&d| point(d)).collect::<Result<Vec<_>>>();
    match workers {
        None => run(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Domain(e.to_string()))?
            .install(run),
    }
}

/// First `x` where `f − g` turns from nonpositive to positive, linearly
/// interpolated between samples.
pub fn first_crossing(xs: &[f64], f: &[f64], g: &[f64]) -> Option<f64> {
    let diff: Vec<f64> = f.iter().zip(g).map(|(a, b)| a - b).collect();
    for i in 1..xs.len() {
        if diff[i - 1] <= 0.0 && diff[i] > 0.0 {
            let t = diff[i - 1] / (diff[i - 1] - diff[i]);
            return Some(xs[i - 1] + t * (xs[i] - xs[i - 1]));
        }
    }
    None
}

/// Last sample with a strictly positive value.
pub fn last_positive(xs: &[f64], ys: &[f64]) -> Option<f64> {
    xs.iter().zip(ys).rev().find(|(_, y)| **y > 0.0).map(|(x, _)| *x)
}

/// Root of a sign change of `h` in `[lo, hi]` by bisection.
pub fn bisect_crossing(h: impl Fn(f64) -> Result<f64>, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let mut h_lo = h(lo)?;
    if h_lo.signum() == h(hi)?.signum() {
        return domain(format!("no sign change in [{lo}, {hi}]"));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let h_mid = h(mid)?;
        if h_mid.signum() == h_lo.signum() {
            lo = mid;
            h_lo = h_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
