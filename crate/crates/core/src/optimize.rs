//! Derivative-free optimization of the source coefficients and of the
//! squeezing parameter.
//!
//! Coefficients are searched in softmax coordinates `z ∈ R^{n_max}` with
//! `a_0 ∝ 1` and `a_n ∝ exp(z_n)`, so every point is on the simplex. Restart 0
//! starts from the best of a uniform and a squeezed-vacuum warm-start family;
//! later restarts perturb that start with seeded Gaussian noise.

use argmin::core::{CostFunction, Executor, State, TerminationReason, TerminationStatus};
use argmin::solver::neldermead::NelderMead;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::classical::{classical_objective, ClassicalClamp, ClassicalModel};
use crate::error::{domain, Error, Result};
use crate::measurements::PovmSet;
use crate::noisy::{realistic_charlie_povm, realistic_key_rate_with, EveAttribution, HeraldingRule};
use crate::optics::{ChannelParams, DetectorParams};
use crate::protocol::key_rate;
use crate::states::CoefficientVector;

/// Largest squeezing parameter searched.
pub const GAMMA_MAX: f64 = 0.99;

/// Floor applied to coefficients before taking logarithms for a warm start.
const LOG_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObjectiveKind {
    /// Classical photon-counting surrogate.
    Classical(ClassicalClamp),
    /// Full quantum key rate, detector-aware when detectors are given.
    Quantum,
}

impl ObjectiveKind {
    /// Quantum for single-photon encodings, clamped classical otherwise.
    pub fn default_for(n_max: usize) -> Self {
        if n_max == 1 {
            ObjectiveKind::Quantum
        } else {
            ObjectiveKind::Classical(ClassicalClamp::PerOutcome)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub max_iters: u64,
    /// Stop once the standard deviation of the simplex objective values drops
    /// below this.
    pub spread_tol: f64,
    pub seed: u64,
    /// Standard deviation of the restart perturbation in softmax coordinates.
    pub perturbation: f64,
    /// Edge length of the initial simplex in softmax coordinates.
    pub initial_step: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 8,
            max_iters: 2000,
            spread_tol: 1e-9,
            seed: 0,
            perturbation: 0.5,
            initial_step: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizationResult {
    pub coefficients: CoefficientVector,
    /// Set when the search ran over the squeezing parameter.
    pub gamma: Option<f64>,
    pub objective: f64,
    pub iterations: u64,
    pub converged: bool,
    pub restarts: usize,
    pub best_restart: usize,
}

/// Objective over symmetric sources `a = b`.
#[derive(Clone, Debug)]
pub struct CoefficientObjective {
    kind: ObjectiveKind,
    channel: ChannelParams,
    relay: Option<PovmSet<(usize, usize)>>,
}

impl CoefficientObjective {
    pub fn new(kind: ObjectiveKind, channel: ChannelParams, detector: Option<DetectorParams>) -> Result<Self> {
        let relay = match (kind, detector) {
            (ObjectiveKind::Quantum, Some(det)) if !det.is_ideal() => Some(realistic_charlie_povm(&det)?),
            _ => None,
        };
        Ok(Self { kind, channel, relay })
    }

    pub fn kind(&self) -> ObjectiveKind {
        self.kind
    }

    pub fn evaluate(&self, c: &CoefficientVector) -> Result<f64> {
        match self.kind {
            ObjectiveKind::Classical(clamp) => Ok(classical_objective(
                &ClassicalModel::from_channel(c.clone(), c.clone(), &self.channel)?,
                clamp,
            )),
            ObjectiveKind::Quantum => match &self.relay {
                Some(povm) => Ok(realistic_key_rate_with(
                    c,
                    c,
                    &self.channel,
                    povm,
                    &HeraldingRule::default(),
                    EveAttribution::default(),
                )?
                .total_key_rate),
                None => Ok(key_rate(c, c, &self.channel)?.total_key_rate),
            },
        }
    }
}

/// Softmax map with `z_0 = 0` pinned.
pub fn softmax_coefficients(z: &[f64]) -> CoefficientVector {
    let peak = z.iter().copied().fold(0.0, f64::max);
    let mut w: Vec<f64> = std::iter::once(0.0).chain(z.iter().copied()).map(|x| (x - peak).exp()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    CoefficientVector::normalized(w).expect("softmax weights are positive")
}

/// Inverse of [`softmax_coefficients`], flooring zeros.
pub fn softmax_coordinates(c: &CoefficientVector) -> Vec<f64> {
    let a = c.as_slice();
    let base = a[0].max(LOG_FLOOR).ln();
    a[1..].iter().map(|x| x.max(LOG_FLOOR).ln() - base).collect()
}

struct NegatedObjective<'a>(&'a CoefficientObjective);

impl CostFunction for NegatedObjective<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, z: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        Ok(-self.0.evaluate(&softmax_coefficients(z))?)
    }
}

struct RestartOutcome {
    z: Vec<f64>,
    value: f64,
    iterations: u64,
    converged: bool,
}

fn run_restart(objective: &CoefficientObjective, start: Vec<f64>, cfg: &OptimizerConfig) -> Result<RestartOutcome> {
    let mut simplex = vec![start.clone()];
    for i in 0..start.len() {
        let mut v = start.clone();
        v[i] += cfg.initial_step;
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(cfg.spread_tol)
        .map_err(|e| Error::Domain(e.to_string()))?;
    let res = Executor::new(NegatedObjective(objective), solver)
        .configure(|state| state.max_iters(cfg.max_iters))
        .run()
        .map_err(|e| Error::Integrity(format!("optimizer failed: {e}")))?;
    let state = res.state();
    let z = state.get_best_param().cloned().unwrap_or(start);
    let converged = matches!(
        state.get_termination_status(),
        TerminationStatus::Terminated(TerminationReason::SolverConverged)
    );
    Ok(RestartOutcome {
        value: objective.evaluate(&softmax_coefficients(&z))?,
        z,
        iterations: state.get_iter(),
        converged,
    })
}

/// Best of the uniform source and squeezed-vacuum profiles on a coarse grid.
pub fn warm_start(objective: &CoefficientObjective, n_max: usize) -> Result<CoefficientVector> {
    let mut best = CoefficientVector::uniform(n_max);
    let mut best_value = objective.evaluate(&best)?;
    for step in 1..20 {
        let candidate = CoefficientVector::squeezed(step as f64 * 0.05, n_max)?;
        let value = objective.evaluate(&candidate)?;
        if value > best_value {
            best = candidate;
            best_value = value;
        }
    }
    Ok(best)
}

/// Maximizes `objective` over the simplex with seeded restarts run in
/// parallel; ties go to the lowest restart index.
pub fn optimize_with(objective: &CoefficientObjective, n_max: usize, cfg: &OptimizerConfig) -> Result<OptimizationResult> {
    if n_max == 0 {
        return domain("n_max must be at least 1");
    }
    if cfg.restarts == 0 {
        return domain("at least one restart is required");
    }
    let anchor = softmax_coordinates(&warm_start(objective, n_max)?);
    let noise = Normal::new(0.0, cfg.perturbation).map_err(|e| Error::Domain(e.to_string()))?;
    let starts: Vec<Vec<f64>> = (0..cfg.restarts)
        .map(|r| {
            if r == 0 {
                return anchor.clone();
            }
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(r as u64);
            anchor.iter().map(|x| x + noise.sample(&mut rng)).collect()
        })
        .collect();
    let outcomes = starts
        .into_par_iter()
        .map(|z0| run_restart(objective, z0, cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, o) in outcomes.iter().enumerate() {
        if o.value > outcomes[best].value {
            best = i;
        }
    }
    let winner = &outcomes[best];
    Ok(OptimizationResult {
        coefficients: softmax_coefficients(&winner.z),
        gamma: None,
        objective: winner.value,
        iterations: outcomes.iter().map(|o| o.iterations).sum(),
        converged: winner.converged,
        restarts: cfg.restarts,
        best_restart: best,
    })
}

/// Optimizes symmetric source coefficients for `channel`. `kind` defaults to
/// [`ObjectiveKind::default_for`].
pub fn optimize_coefficients(
    n_max: usize,
    channel: &ChannelParams,
    detector: Option<DetectorParams>,
    kind: Option<ObjectiveKind>,
    cfg: &OptimizerConfig,
) -> Result<OptimizationResult> {
    let kind = kind.unwrap_or(ObjectiveKind::default_for(n_max));
    let objective = CoefficientObjective::new(kind, *channel, detector)?;
    optimize_with(&objective, n_max, cfg)
}

/// One-dimensional search over `γ ∈ [0, GAMMA_MAX]` for truncated squeezed
/// vacuum sources: a 0.01 grid, then golden-section refinement around the
/// best grid point. `kind` defaults to the clamped classical objective.
pub fn optimize_gamma(n_max: usize, channel: &ChannelParams, kind: Option<ObjectiveKind>) -> Result<OptimizationResult> {
    let kind = kind.unwrap_or(ObjectiveKind::Classical(ClassicalClamp::PerOutcome));
    let objective = CoefficientObjective::new(kind, *channel, None)?;
    let eval = |g: f64| -> Result<f64> { objective.evaluate(&CoefficientVector::squeezed(g, n_max)?) };
    let grid: Vec<f64> = (0..=99).map(|i| (i as f64 * 0.01).min(GAMMA_MAX)).collect();
    let values = grid.par_iter().map(|&g| eval(g)).collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    let (mut lo, mut hi) = (grid[best.saturating_sub(1)], grid[(best + 1).min(grid.len() - 1)]);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut iterations = grid.len() as u64;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (eval(x1)?, eval(x2)?);
    while hi - lo > 1e-7 {
        iterations += 1;
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = eval(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = eval(x1)?;
        }
    }
    let mut gamma = 0.5 * (lo + hi);
    let mut value = eval(gamma)?;
    if values[best] > value {
        gamma = grid[best];
        value = values[best];
    }
    Ok(OptimizationResult {
        coefficients: CoefficientVector::squeezed(gamma, n_max)?,
        gamma: Some(gamma),
        objective: value,
        iterations,
        converged: true,
        restarts: 1,
        best_restart: 0,
    })
}

/// Optimized source and its quantum key rate for each cutoff.
#[derive(Clone, Debug, PartialEq)]
pub struct PhotonCountPoint {
    pub n_max: usize,
    pub optimization: OptimizationResult,
    pub key_rate: f64,
}

pub fn photon_count_sweep(
    n_max_range: std::ops::RangeInclusive<usize>,
    channel: &ChannelParams,
    cfg: &OptimizerConfig,
) -> Result<Vec<PhotonCountPoint>> {
    n_max_range
        .map(|n_max| {
            let optimization = optimize_coefficients(n_max, channel, None, None, cfg)?;
            let c = &optimization.coefficients;
            let k = key_rate(c, c, channel)?.total_key_rate;
            Ok(PhotonCountPoint {
                n_max,
                optimization,
                key_rate: k,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn softmax_round_trip() {
        let c = CoefficientVector::new(vec![0.2, 0.5, 0.3]).unwrap();
        let back = softmax_coefficients(&softmax_coordinates(&c));
        for (x, y) in back.as_slice().iter().zip(c.as_slice()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-15);
        }
        let extreme = softmax_coefficients(&[800.0, -800.0]);
        assert_abs_diff_eq!(extreme.as_slice()[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn single_photon_long_distance() {
        let ch = ChannelParams::from_distance(200.0).unwrap();
        let res = optimize_coefficients(1, &ch, None, None, &OptimizerConfig::default()).unwrap();
        assert!((res.coefficients.as_slice()[0] - 0.8575).abs() < 0.01);
        let again = CoefficientObjective::new(ObjectiveKind::Quantum, ch, None).unwrap();
        assert_abs_diff_eq!(again.evaluate(&res.coefficients).unwrap(), res.objective, epsilon = 1e-12);
    }

    #[test]
    fn deterministic_under_seed() {
        let ch = ChannelParams::from_distance(30.0).unwrap();
        let cfg = OptimizerConfig {
            seed: 7,
            ..OptimizerConfig::default()
        };
        let a = optimize_coefficients(2, &ch, None, None, &cfg).unwrap();
        let b = optimize_coefficients(2, &ch, None, None, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gamma_long_distance() {
        let ch = ChannelParams::from_distance(100.0).unwrap();
        let res = optimize_gamma(7, &ch, None).unwrap();
        assert!((res.gamma.unwrap() - 0.26).abs() < 0.02);
    }
}
