//! Photon-number encoded source states.

use crate::error::{domain, Result};
use crate::fock::{FockVector, ModeDims, C64};

const SIMPLEX_TOL: f64 = 1e-9;

/// Probability weights `a_0..a_{n_max}` of sending each Fock state.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientVector(Vec<f64>);

impl CoefficientVector {
    /// Requires nonnegative entries summing to one within `1e-9`.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        validate_entries(&weights)?;
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return domain(format!("coefficients sum to {sum}, expected 1"));
        }
        Ok(Self(weights))
    }

    /// Rescales nonnegative weights onto the simplex. Used for transcribed
    /// tables whose rounded rows do not sum exactly to one.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        validate_entries(&weights)?;
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return domain("coefficients are all zero");
        }
        Ok(Self(weights.into_iter().map(|w| w / sum).collect()))
    }

    /// Uniform weights over `0..=n_max`.
    pub fn uniform(n_max: usize) -> Self {
        Self(vec![1.0 / (n_max + 1) as f64; n_max + 1])
    }

    /// `[a_0, 1 - a_0]`.
    pub fn single_photon(a0: f64) -> Result<Self> {
        Self::new(vec![a0, 1.0 - a0])
    }

    /// Truncated two-mode squeezed vacuum weights `∝ γ^{2n}`.
    pub fn squeezed(gamma: f64, n_max: usize) -> Result<Self> {
        if !(0.0..1.0).contains(&gamma) {
            return domain(format!("squeezing parameter {gamma} outside [0, 1)"));
        }
        let raw: Vec<f64> = (0..=n_max)
            .map(|n| (1.0 - gamma * gamma) * gamma.powi(2 * n as i32))
            .collect();
        Self::normalized(raw)
    }

    pub fn n_max(&self) -> usize {
        self.0.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Zero-pads (or errors when truncation would drop weight) to `n_max`.
    pub fn resized(&self, n_max: usize) -> Result<Self> {
        if n_max + 1 >= self.0.len() {
            let mut w = self.0.clone();
            w.resize(n_max + 1, 0.0);
            return Ok(Self(w));
        }
        if self.0[n_max + 1..].iter().any(|&w| w > 0.0) {
            return domain(format!("cannot truncate coefficients to n_max = {n_max} without losing weight"));
        }
        Ok(Self(self.0[..=n_max].to_vec()))
    }
}

fn validate_entries(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return domain("coefficient vector is empty");
    }
    if let Some(bad) = weights.iter().find(|&&w| w < 0.0 || !w.is_finite()) {
        return domain(format!("coefficient {bad} is negative or not finite"));
    }
    Ok(())
}

/// `Σ_n √a_n |n n>` on two modes of dimension `n_max + 1`.
pub fn key_state(coeffs: &CoefficientVector) -> FockVector {
    let m = coeffs.dim();
    let dims = ModeDims::uniform(2, m).expect("coefficient vectors are nonempty");
    let mut amp = vec![C64::new(0.0, 0.0); m * m];
    for (n, &a) in coeffs.as_slice().iter().enumerate() {
        amp[n * m + n] = C64::new(a.sqrt(), 0.0);
    }
    FockVector::from_amplitudes(dims, amp).expect("length matches dims")
}

/// Truncated two-mode squeezed vacuum, renormalized over `0..=n_max`.
pub fn tmsv_truncated(gamma: f64, n_max: usize) -> Result<FockVector> {
    Ok(key_state(&CoefficientVector::squeezed(gamma, n_max)?))
}
