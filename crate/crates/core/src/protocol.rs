//! Entanglement-swapping key rate and reverse coherent information.
//!
//! The production path keeps the channel environments explicitly: the global
//! pure state lives on `(A1, A2, E_A, B1, B2, E_B)`, Charlie's modes `A2, B2`
//! are projected onto `|φ_c^0>` and the environments are traced by a Gram
//! contraction. The density-matrix path of [`conditional_state_mixed`] is an
//! independent oracle for small cutoffs.

use crate::entropy::{von_neumann_entropy, ProbTable};
use crate::error::{domain, Error, Result};
use crate::fock::{DensityOperator, FockVector};
use crate::measurements::{charlie_povm, charlie_vector, pnrd_projector, sector_multiplicity};
use crate::optics::{lossy_channel_kraus, lossy_channel_purified, transmissivity_from_distance, ChannelParams};
use crate::states::{key_state, CoefficientVector};

/// Outcomes below this probability contribute nothing and are not normalized.
pub const MIN_OUTCOME_PROB: f64 = 1e-15;

/// Tolerance on `Σ_c P_c = 1`.
pub const PROBABILITY_SUM_TOL: f64 = 1e-9;

// Charlie's modes in the global layout
const A2: usize = 1;
const B2: usize = 4;

/// Label of a heralding outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Outcome {
    /// Charlie's total photon number `c` (all `j` pooled).
    Total(usize),
    /// Photon counts `(k1, k2)` on the two detectors of the realistic relay.
    Clicks(usize, usize),
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Outcome::Total(c) => write!(f, "c={c}"),
            Outcome::Clicks(a, b) => write!(f, "{a}{b}"),
        }
    }
}

/// Post-selected state of `A1 B1` for one pooled outcome.
#[derive(Clone, Debug)]
pub struct ConditionalState {
    pub outcome: Outcome,
    /// Total probability of the pooled outcome.
    pub probability: f64,
    /// Normalized conditional state; `None` when the outcome has probability
    /// below [`MIN_OUTCOME_PROB`].
    pub state: Option<DensityOperator>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KeyRateRow {
    pub outcome: Outcome,
    pub probability: f64,
    pub i_ab: f64,
    pub i_e: f64,
    /// `P · max(0, I_AB − I_E)`.
    pub contribution: f64,
    /// `P · max(0, S(A) − S(AB))`.
    pub rci_contribution: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KeyRateBreakdown {
    pub rows: Vec<KeyRateRow>,
    pub total_key_rate: f64,
    pub rci: f64,
}

impl KeyRateBreakdown {
    pub fn from_rows(rows: Vec<KeyRateRow>) -> Self {
        let total_key_rate = rows.iter().map(|r| r.contribution).sum();
        let rci = rows.iter().map(|r| r.rci_contribution).sum();
        Self {
            rows,
            total_key_rate,
            rci,
        }
    }

    pub fn probability_sum(&self) -> f64 {
        self.rows.iter().map(|r| r.probability).sum()
    }

    pub fn row(&self, outcome: Outcome) -> Option<&KeyRateRow> {
        self.rows.iter().find(|r| r.outcome == outcome)
    }
}

fn check_pair(a: &CoefficientVector, b: &CoefficientVector) -> Result<usize> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    if a.n_max() == 0 {
        return domain("n_max must be at least 1");
    }
    Ok(a.n_max())
}

/// Purified global state for one choice of coefficients and channel.
#[derive(Clone, Debug)]
pub struct SwapSetup {
    n_max: usize,
    psi: FockVector,
}

impl SwapSetup {
    pub fn new(a: &CoefficientVector, b: &CoefficientVector, channel: &ChannelParams) -> Result<Self> {
        let n_max = check_pair(a, b)?;
        let alice = lossy_channel_purified(&key_state(a), channel.tau_a, 1)?;
        let bob = lossy_channel_purified(&key_state(b), channel.tau_b, 1)?;
        Ok(Self {
            n_max,
            psi: alice.tensor(&bob),
        })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Global pure state on `(A1, A2, E_A, B1, B2, E_B)`.
    pub fn global_state(&self) -> &FockVector {
        &self.psi
    }

    /// Subnormalized pure state on `(A1, E_A, B1, E_B)` after `|φ_c^j>`.
    pub fn projected(&self, c: usize, j: usize) -> Result<FockVector> {
        let phi = charlie_vector(self.n_max, c, j)?;
        self.psi.project(&[A2, B2], &phi)
    }

    /// Subnormalized `A1 B1` operator for outcome `(c, j)` and its probability.
    pub fn conditional_unnormalized(&self, c: usize, j: usize) -> Result<(DensityOperator, f64)> {
        // projected layout (A1, E_A, B1, E_B)
        let rho = self.projected(c, j)?.reduced_density(&[0, 2])?;
        let p = rho.trace();
        Ok((rho, p))
    }

    /// Outcome `c` pooled over `j`: `P_c = k · P_c^{j=0}` with `k` elements.
    pub fn conditional_state(&self, c: usize) -> Result<ConditionalState> {
        let (rho, p0) = self.conditional_unnormalized(c, 0)?;
        let probability = sector_multiplicity(self.n_max, c) as f64 * p0;
        let state = if probability < MIN_OUTCOME_PROB {
            None
        } else {
            Some(rho.normalized()?)
        };
        Ok(ConditionalState {
            outcome: Outcome::Total(c),
            probability,
            state,
        })
    }

    pub fn conditional_states(&self) -> Result<Vec<ConditionalState>> {
        (0..=2 * self.n_max).map(|c| self.conditional_state(c)).collect()
    }

    pub fn key_rate(&self) -> Result<KeyRateBreakdown> {
        let rows = self
            .conditional_states()?
            .iter()
            .map(evaluate_outcome)
            .collect::<Result<Vec<_>>>()?;
        let out = KeyRateBreakdown::from_rows(rows);
        check_probability_sum(out.probability_sum())?;
        Ok(out)
    }
}

pub(crate) fn check_probability_sum(total: f64) -> Result<()> {
    if (total - 1.0).abs() > PROBABILITY_SUM_TOL {
        return Err(Error::Integrity(format!("outcome probabilities sum to {total}")));
    }
    Ok(())
}

/// Conditional state and pooled probability for outcome `c`, purified path.
pub fn conditional_state(
    a: &CoefficientVector,
    b: &CoefficientVector,
    channel: &ChannelParams,
    c: usize,
) -> Result<ConditionalState> {
    SwapSetup::new(a, b, channel)?.conditional_state(c)
}

/// Explicit density-matrix path: lossy key states on `(A1, C_A)` and
/// `(C_B, B1)`, the POVM element on Charlie's modes, then the partial trace.
/// Returns the subnormalized `A1 B1` operator for `(c, j)` and its trace.
pub fn conditional_state_mixed(
    a: &CoefficientVector,
    b: &CoefficientVector,
    channel: &ChannelParams,
    c: usize,
    j: usize,
) -> Result<(DensityOperator, f64)> {
    let n_max = check_pair(a, b)?;
    let rho_a = lossy_channel_kraus(&key_state(a).to_density(), channel.tau_a, 1)?;
    let rho_b = lossy_channel_kraus(&key_state(b).to_density(), channel.tau_b, 1)?;
    let joint = rho_a.tensor(&rho_b);
    let povm = charlie_povm(n_max)?;
    let element = povm
        .element(c, j)
        .ok_or_else(|| Error::Domain(format!("no POVM element ({c}, {j})")))?;
    let (post, p) = joint.apply_measurement(&element.projector(), &[1, 3])?;
    Ok((post.partial_trace(&[0, 2])?, p))
}

/// Shannon mutual information of the photon-number statistics of `ρ_AB`.
pub fn mutual_information_ab(rho_ab: &DensityOperator) -> Result<f64> {
    ProbTable::from_density_diagonal(rho_ab, &["a", "b"])?.mutual_information(&[0], &[1])
}

/// Subnormalized `ρ_{A|b} = <b|ρ_AB|b>` and its weight.
pub fn condition_on_bob(rho_ab: &DensityOperator, n_b: usize) -> Result<(DensityOperator, f64)> {
    let dim_b = rho_ab.dims().dim(1);
    let (post, p) = rho_ab.apply_measurement(&pnrd_projector(n_b, dim_b)?, &[1])?;
    Ok((post.partial_trace(&[0])?, p))
}

/// Holevo quantity between Bob's photon number and the purification of
/// `ρ_AB`: `S(ρ_AB) − Σ_b P_b S(ρ_{A|b})`.
pub fn holevo_eve(rho_ab: &DensityOperator) -> Result<f64> {
    let mut conditional = 0.0;
    for n_b in 0..rho_ab.dims().dim(1) {
        let (rho_a, p) = condition_on_bob(rho_ab, n_b)?;
        if p > MIN_OUTCOME_PROB {
            conditional += p * von_neumann_entropy(&rho_a.normalized()?)?;
        }
    }
    Ok(von_neumann_entropy(rho_ab)? - conditional)
}

/// `S(ρ_A) − S(ρ_AB)`.
pub fn coherent_information_reverse(rho_ab: &DensityOperator) -> Result<f64> {
    Ok(von_neumann_entropy(&rho_ab.partial_trace(&[0])?)? - von_neumann_entropy(rho_ab)?)
}

/// Key-rate and RCI terms of one pooled outcome.
pub fn evaluate_outcome(cond: &ConditionalState) -> Result<KeyRateRow> {
    let Some(rho) = &cond.state else {
        return Ok(KeyRateRow {
            outcome: cond.outcome,
            probability: cond.probability,
            i_ab: 0.0,
            i_e: 0.0,
            contribution: 0.0,
            rci_contribution: 0.0,
        });
    };
    let i_ab = mutual_information_ab(rho)?;
    let i_e = holevo_eve(rho)?;
    let rci = coherent_information_reverse(rho)?;
    Ok(KeyRateRow {
        outcome: cond.outcome,
        probability: cond.probability,
        i_ab,
        i_e,
        contribution: cond.probability * (i_ab - i_e).max(0.0),
        rci_contribution: cond.probability * rci.max(0.0),
    })
}

/// `K = Σ_c P_c max(0, I_AB|c − I_E|c)`, with RCI alongside.
pub fn key_rate(a: &CoefficientVector, b: &CoefficientVector, channel: &ChannelParams) -> Result<KeyRateBreakdown> {
    SwapSetup::new(a, b, channel)?.key_rate()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RciMode {
    /// Alice's mode sent straight to Bob through the full channel.
    PointToPoint,
    /// Charlie in the middle, pooled over his outcomes.
    SingleRepeater,
}

pub fn reverse_coherent_information(
    a: &CoefficientVector,
    b: &CoefficientVector,
    channel: &ChannelParams,
    mode: RciMode,
) -> Result<f64> {
    match mode {
        RciMode::SingleRepeater => Ok(key_rate(a, b, channel)?.rci),
        RciMode::PointToPoint => point_to_point_rci(a, channel.tau_total()),
    }
}

/// RCI of `Σ √a_n |n n>` with the second mode through a pure-loss channel.
pub fn point_to_point_rci(a: &CoefficientVector, tau: f64) -> Result<f64> {
    let out = lossy_channel_purified(&key_state(a), tau, 1)?;
    let rho_ab = out.reduced_density(&[0, 1])?;
    Ok(coherent_information_reverse(&rho_ab)?.max(0.0))
}

fn check_tau(tau: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&tau) {
        return domain(format!("transmissivity {tau} outside [0, 1]"));
    }
    Ok(())
}

/// `−log2(1 − τ)`; infinite at `τ = 1`.
pub fn plob_bound(tau: f64) -> Result<f64> {
    check_tau(tau)?;
    Ok(if tau == 1.0 { f64::INFINITY } else { -(-tau).ln_1p() / std::f64::consts::LN_2 })
}

/// `−log2(1 − √τ)`; infinite at `τ = 1`.
pub fn single_repeater_bound(tau: f64) -> Result<f64> {
    check_tau(tau)?;
    plob_bound(tau.sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundCurvePoint {
    pub distance_km: f64,
    pub tau_total: f64,
    pub plob: f64,
    pub single_repeater: f64,
}

impl BoundCurvePoint {
    pub fn at_distance(distance_km: f64, loss_db_per_km: f64) -> Result<Self> {
        let tau_total = transmissivity_from_distance(distance_km, loss_db_per_km);
        Ok(Self {
            distance_km,
            tau_total,
            plob: plob_bound(tau_total)?,
            single_repeater: single_repeater_bound(tau_total)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn lossless_squeezed_sources_are_maximally_entangled_per_sector() {
        // Equal products a_n a_{c-n} within a sector give log2(k_c) bits.
        let n_max = 7;
        for gamma in [0.06, 0.3, 0.36, 0.84, 0.99] {
            let a = CoefficientVector::squeezed(gamma, n_max).unwrap();
            let w = a.as_slice();
            let mut oracle = 0.0;
            for c in 0..=2 * n_max {
                let (lo, hi) = (c.saturating_sub(n_max), c.min(n_max));
                let p: f64 = (lo..=hi).map(|n| w[n] * w[c - n]).sum();
                oracle += p * ((hi - lo + 1) as f64).log2();
            }
            let k = key_rate(&a, &a, &ChannelParams::from_distance(0.0).unwrap()).unwrap();
            assert!(k.total_key_rate.is_finite());
            assert_abs_diff_eq!(k.total_key_rate, oracle, epsilon = 1e-9);
        }
    }

    fn half() -> CoefficientVector {
        CoefficientVector::new(vec![0.5, 0.5]).unwrap()
    }

    fn lossless() -> ChannelParams {
        ChannelParams::from_distance(0.0).unwrap()
    }

    #[test]
    fn lossless_single_photon_baseline() {
        let out = key_rate(&half(), &half(), &lossless()).unwrap();
        assert_abs_diff_eq!(out.total_key_rate, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(out.rci, 0.5, epsilon = 1e-12);
        let one = out.row(Outcome::Total(1)).unwrap();
        assert_abs_diff_eq!(one.probability, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(one.i_ab, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(one.i_e, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn lossless_c1_state_is_bell_like() {
        let cond = conditional_state(&half(), &half(), &lossless(), 1).unwrap();
        let rho = cond.state.unwrap();
        let s = crate::fock::C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let zero = crate::fock::C64::new(0.0, 0.0);
        let bell = FockVector::from_amplitudes(rho.dims().clone(), vec![zero, s, s, zero]).unwrap();
        assert_abs_diff_eq!(rho.trace_distance(&bell.to_density()).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn top_sector_is_product() {
        let a = CoefficientVector::new(vec![0.3, 0.3, 0.4]).unwrap();
        let cond = conditional_state(&a, &a, &lossless(), 4).unwrap();
        let rho = cond.state.unwrap();
        assert_abs_diff_eq!(rho.element(&[2, 2], &[2, 2]).unwrap().re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(mutual_information_ab(&rho).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn full_loss_leaves_vacuum_outcome() {
        let a = CoefficientVector::new(vec![0.6, 0.4]).unwrap();
        let ch = ChannelParams::from_links(0.0, 0.0).unwrap();
        let out = key_rate(&a, &a, &ch).unwrap();
        assert_abs_diff_eq!(out.row(Outcome::Total(0)).unwrap().probability, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.total_key_rate, 0.0);
        let rho = conditional_state(&a, &a, &ch, 0).unwrap().state.unwrap();
        assert_abs_diff_eq!(rho.element(&[1, 0], &[1, 0]).unwrap().re, 0.24, epsilon = 1e-12);
        assert_abs_diff_eq!(rho.element(&[0, 1], &[1, 0]).unwrap().norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn holevo_examples() {
        let mixed = crate::fock::DensityOperator::new(
            crate::fock::ModeDims::new(vec![2, 2]).unwrap(),
            crate::fock::CMatrix::identity(4, 4) * crate::fock::C64::new(0.25, 0.0),
        )
        .unwrap();
        assert_abs_diff_eq!(holevo_eve(&mixed).unwrap(), 1.0, epsilon = 1e-12);
        let pure = key_state(&half()).to_density();
        assert_abs_diff_eq!(holevo_eve(&pure).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn mixed_path_matches_purified() {
        let a = CoefficientVector::new(vec![0.5, 0.3, 0.2]).unwrap();
        let b = CoefficientVector::new(vec![0.6, 0.1, 0.3]).unwrap();
        let ch = ChannelParams::from_links(0.7, 0.4).unwrap();
        let setup = SwapSetup::new(&a, &b, &ch).unwrap();
        for c in 0..=4 {
            for j in 0..sector_multiplicity(2, c) {
                let (pure, p) = setup.conditional_unnormalized(c, j).unwrap();
                let (mixed, q) = conditional_state_mixed(&a, &b, &ch, c, j).unwrap();
                assert_abs_diff_eq!(p, q, epsilon = 1e-12);
                assert!((pure.matrix() - mixed.matrix()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn bounds() {
        assert_abs_diff_eq!(plob_bound(0.5).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(single_repeater_bound(0.25).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(plob_bound(1e-2).unwrap(), -(0.99f64).log2(), epsilon = 1e-15);
        assert!(plob_bound(1.0).unwrap().is_infinite());
        assert!(plob_bound(1.5).is_err());
        let p = BoundCurvePoint::at_distance(100.0, 0.2).unwrap();
        assert_abs_diff_eq!(p.plob, 0.0145, epsilon = 1e-4);
    }

    #[test]
    fn point_to_point_lossless() {
        assert_abs_diff_eq!(point_to_point_rci(&half(), 1.0).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(point_to_point_rci(&half(), 0.0).unwrap(), 0.0, epsilon = 1e-12);
    }
}
