//! Single-photon protocol with a realistic relay: Charlie interferes `A2` and
//! `B2` on a 50:50 beamsplitter and counts photons with two noisy detectors.
//! Only exactly one click across both detectors heralds a key round.

use crate::entropy::von_neumann_entropy;
use crate::error::{domain, Result};
use crate::fock::{hermitian_eigen, CMatrix, DensityOperator, FockVector, ModeDims, C64};
use crate::measurements::{pnrd_projector, PovmSet};
use crate::optics::{beamsplitter_unitary, thermal_environment, ChannelParams, DetectorParams};
use crate::protocol::{
    check_probability_sum, coherent_information_reverse, holevo_eve, mutual_information_ab, KeyRateBreakdown,
    KeyRateRow, Outcome, SwapSetup, MIN_OUTCOME_PROB,
};
use crate::states::CoefficientVector;

/// Photons per input mode of the relay.
const INPUT_DIM: usize = 2;

/// Which click patterns count as a successful swap.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HeraldingRule {
    pub accepted: Vec<(usize, usize)>,
}

impl Default for HeraldingRule {
    fn default() -> Self {
        Self {
            accepted: vec![(1, 0), (0, 1)],
        }
    }
}

impl HeraldingRule {
    pub fn accepts(&self, clicks: (usize, usize)) -> bool {
        self.accepted.contains(&clicks)
    }
}

/// Who is credited with the photons that never produce a click.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EveAttribution {
    /// Eve holds the purification of `ρ_AB`: fibre loss, detector loss and
    /// dark-count randomness alike.
    #[default]
    FullPurification,
    /// Eve holds only the photons lost in the two fibre links.
    FibreOnly,
}

/// Detector count dimension per mode: room for both input photons, extended
/// when the thermal cutoff asks for more.
fn detection_dim(det: &DetectorParams) -> usize {
    (2 * (INPUT_DIM - 1) + 1).max(det.thermal_cutoff + 1)
}

/// `q[i][j][k] = <k| N(|i><j|) |k>` for the single-mode detector channel `N`,
/// where `N` mixes the mode with a thermal state at transmissivity `η` and
/// discards the reflected port.
fn detector_response(det: &DetectorParams, dim: usize) -> Result<Vec<Vec<Vec<C64>>>> {
    let mut q = vec![vec![vec![C64::new(0.0, 0.0); dim]; dim]; dim];
    if det.is_ideal() {
        for (i, qi) in q.iter_mut().enumerate() {
            qi[i][i] = C64::new(1.0, 0.0);
        }
        return Ok(q);
    }
    let env = thermal_environment(det, dim)?;
    let u = beamsplitter_unitary(det.efficiency, dim, dim)?;
    for (i, qi) in q.iter_mut().enumerate() {
        for (j, qij) in qi.iter_mut().enumerate() {
            for (k, slot) in qij.iter_mut().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for (n, &w) in env.iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    for e in 0..dim {
                        let row = k * dim + e;
                        acc += u[(row, i * dim + n)] * u[(row, j * dim + n)].conj() * w;
                    }
                }
                *slot = acc;
            }
        }
    }
    Ok(q)
}

/// Effects on `(A2, B2)` labeled by detector counts `(k1, k2)`.
pub fn realistic_charlie_povm(det: &DetectorParams) -> Result<PovmSet<(usize, usize)>> {
    let d = detection_dim(det);
    let u = beamsplitter_unitary(0.5, d, d)?;
    let q = detector_response(det, d)?;
    let n_in = INPUT_DIM * INPUT_DIM;
    let embed = |x: usize| (x / INPUT_DIM) * d + x % INPUT_DIM;
    let mut outcomes = Vec::with_capacity(d * d);
    for k1 in 0..d {
        for k2 in 0..d {
            let mut effect = CMatrix::zeros(n_in, n_in);
            for x in 0..n_in {
                for y in 0..n_in {
                    let (xe, ye) = (embed(x), embed(y));
                    let mut acc = C64::new(0.0, 0.0);
                    for big_i in 0..d * d {
                        let ux = u[(big_i, xe)];
                        if ux.norm_sqr() == 0.0 {
                            continue;
                        }
                        let (i1, i2) = (big_i / d, big_i % d);
                        for big_j in 0..d * d {
                            let uy = u[(big_j, ye)];
                            if uy.norm_sqr() == 0.0 {
                                continue;
                            }
                            let (j1, j2) = (big_j / d, big_j % d);
                            acc += ux * uy.conj() * q[i1][j1][k1] * q[i2][j2][k2];
                        }
                    }
                    effect[(y, x)] = acc;
                }
            }
            outcomes.push(((k1, k2), effect));
        }
    }
    PovmSet::new(ModeDims::uniform(2, INPUT_DIM)?, outcomes)
}

/// Unnormalized state on `(A1, E_A, B1, E_B)` after the effect `E` on Charlie's
/// modes, as `Σ λ_i |ψ_i><ψ_i|` over the eigen-decomposition of `E`.
fn heralded_state(setup: &SwapSetup, effect: &CMatrix) -> Result<DensityOperator> {
    let psi = setup.global_state();
    let eig = hermitian_eigen(effect);
    let dims = ModeDims::uniform(2, INPUT_DIM)?;
    let mut acc: Option<CMatrix> = None;
    let mut rest = None;
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda <= 0.0 {
            continue;
        }
        let v = FockVector::from_amplitudes(dims.clone(), eig.eigenvectors.column(i).iter().copied().collect())?;
        let projected = psi.project(&[1, 4], &v)?;
        let rho = projected.to_density();
        rest.get_or_insert_with(|| rho.dims().clone());
        let term = rho.matrix() * C64::new(lambda, 0.0);
        acc = Some(match acc {
            Some(m) => m + term,
            None => term,
        });
    }
    match (acc, rest) {
        (Some(m), Some(dims)) => Ok(DensityOperator::from_parts(dims, m)),
        _ => domain("effect has no positive part"),
    }
}

/// `χ(b : E_A E_B)` for a normalized state on `(A1, E_A, B1, E_B)`.
fn holevo_fibre_environment(rho: &DensityOperator) -> Result<f64> {
    let eve = rho.partial_trace(&[1, 3])?;
    let mut conditional = 0.0;
    for n_b in 0..rho.dims().dim(2) {
        let (post, p) = rho.apply_measurement(&pnrd_projector(n_b, rho.dims().dim(2))?, &[2])?;
        if p > MIN_OUTCOME_PROB {
            conditional += p * von_neumann_entropy(&post.partial_trace(&[1, 3])?.normalized()?)?;
        }
    }
    Ok(von_neumann_entropy(&eve)? - conditional)
}

/// Key rate of the single-photon protocol through the realistic relay.
pub fn realistic_key_rate(
    a: &CoefficientVector,
    b: &CoefficientVector,
    channel: &ChannelParams,
    det: &DetectorParams,
    attribution: EveAttribution,
) -> Result<KeyRateBreakdown> {
    let povm = realistic_charlie_povm(det)?;
    realistic_key_rate_with(a, b, channel, &povm, &HeraldingRule::default(), attribution)
}

/// As [`realistic_key_rate`] with a prebuilt relay POVM.
pub fn realistic_key_rate_with(
    a: &CoefficientVector,
    b: &CoefficientVector,
    channel: &ChannelParams,
    povm: &PovmSet<(usize, usize)>,
    rule: &HeraldingRule,
    attribution: EveAttribution,
) -> Result<KeyRateBreakdown> {
    if a.n_max() != 1 || b.n_max() != 1 {
        return domain("the realistic relay supports n_max = 1 only");
    }
    let setup = SwapSetup::new(a, b, channel)?;
    let charlie = setup.global_state().reduced_density(&[1, 4])?;
    let mut rows = Vec::with_capacity(povm.len());
    for (clicks, effect) in povm.outcomes() {
        let outcome = Outcome::Clicks(clicks.0, clicks.1);
        let probability = charlie.expectation_local(effect, &[0, 1])?;
        let mut row = KeyRateRow {
            outcome,
            probability,
            i_ab: 0.0,
            i_e: 0.0,
            contribution: 0.0,
            rci_contribution: 0.0,
        };
        if rule.accepts(*clicks) && probability >= MIN_OUTCOME_PROB {
            let joint = heralded_state(&setup, effect)?.normalized()?;
            let rho_ab = joint.partial_trace(&[0, 2])?;
            row.i_ab = mutual_information_ab(&rho_ab)?;
            row.i_e = match attribution {
                EveAttribution::FullPurification => holevo_eve(&rho_ab)?,
                EveAttribution::FibreOnly => holevo_fibre_environment(&joint)?,
            };
            row.contribution = probability * (row.i_ab - row.i_e).max(0.0);
            row.rci_contribution = probability * coherent_information_reverse(&rho_ab)?.max(0.0);
        }
        rows.push(row);
    }
    let out = KeyRateBreakdown::from_rows(rows);
    check_probability_sum(out.probability_sum())?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::key_rate;
    use approx::assert_abs_diff_eq;

    fn noisy() -> DetectorParams {
        DetectorParams::new(0.85, 5e-8).unwrap()
    }

    fn effect(povm: &PovmSet<(usize, usize)>, k: (usize, usize)) -> CMatrix {
        povm.outcomes().iter().find(|(l, _)| *l == k).unwrap().1.clone()
    }

    #[test]
    fn completeness() {
        for det in [DetectorParams::ideal(), noisy()] {
            assert!(realistic_charlie_povm(&det).unwrap().completeness_defect() < 1e-10);
        }
    }

    #[test]
    fn ideal_single_click_is_bell_projector() {
        let povm = realistic_charlie_povm(&DetectorParams::ideal()).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for k in [(1, 0), (0, 1)] {
            let e = effect(&povm, k);
            // rank one, weight on |01>, |10> only, equal magnitudes
            assert!((&e * &e - &e).norm() < 1e-12);
            assert_abs_diff_eq!(e[(1, 1)].re, 0.5, epsilon = 1e-12);
            assert_abs_diff_eq!(e[(2, 2)].re, 0.5, epsilon = 1e-12);
            assert_abs_diff_eq!(e[(1, 2)].norm(), s * s, epsilon = 1e-12);
        }
    }

    #[test]
    fn vacuum_dark_clicks() {
        let povm = realistic_charlie_povm(&noisy()).unwrap();
        let p = effect(&povm, (1, 0))[(0, 0)].re + effect(&povm, (0, 1))[(0, 0)].re;
        assert_abs_diff_eq!(p, 1e-7, epsilon = 1e-12);
    }

    #[test]
    fn hong_ou_mandel() {
        let povm = realistic_charlie_povm(&DetectorParams::ideal()).unwrap();
        for k in [(1, 0), (0, 1)] {
            assert_abs_diff_eq!(effect(&povm, k)[(3, 3)].re, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn ideal_detectors_reduce_to_key_rate() {
        let a = CoefficientVector::new(vec![0.8483, 0.1517]).unwrap();
        let ch = ChannelParams::from_distance(100.0).unwrap();
        let want = key_rate(&a, &a, &ch).unwrap().total_key_rate;
        for attribution in [EveAttribution::FullPurification, EveAttribution::FibreOnly] {
            let got = realistic_key_rate(&a, &a, &ch, &DetectorParams::ideal(), attribution).unwrap();
            assert_abs_diff_eq!(got.total_key_rate, want, epsilon = 1e-9);
        }
    }

    #[test]
    fn symmetric_heralding() {
        let a = CoefficientVector::new(vec![0.85, 0.15]).unwrap();
        let ch = ChannelParams::from_distance(50.0).unwrap();
        let out = realistic_key_rate(&a, &a, &ch, &noisy(), EveAttribution::default()).unwrap();
        let p10 = out.row(Outcome::Clicks(1, 0)).unwrap().probability;
        let p01 = out.row(Outcome::Clicks(0, 1)).unwrap().probability;
        assert_abs_diff_eq!(p10, p01, epsilon = 1e-12);
    }

    #[test]
    fn heavy_dark_noise_kills_key() {
        let a = CoefficientVector::new(vec![0.85, 0.15]).unwrap();
        let ch = ChannelParams::from_distance(100.0).unwrap();
        let det = DetectorParams::new(0.5, 0.05).unwrap().with_thermal_cutoff(10).unwrap();
        let out = realistic_key_rate(&a, &a, &ch, &det, EveAttribution::default()).unwrap();
        assert_abs_diff_eq!(out.total_key_rate, 0.0, epsilon = 1e-12);
    }
}
