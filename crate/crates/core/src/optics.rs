//! Optical channel primitives in the truncated Fock basis.
//!
//! The beamsplitter is `exp[θ (a†b − a b†)]` with `cos θ = √τ`, so a photon in
//! mode `a` stays in `a` with amplitude `√τ` and moves to `b` with amplitude
//! `−√(1−τ)`. Loss couples the lossy mode (`a`) to a vacuum environment (`b`).

use nalgebra::DMatrix;

use crate::error::{domain, Error, Result};
use crate::fock::{hermitian_eigen, CMatrix, DensityOperator, FockVector, ModeDims, C64};

pub const DEFAULT_LOSS_DB_PER_KM: f64 = 0.2;

/// Relative truncation defect tolerated by [`thermal_state`].
pub const THERMAL_DEFECT_TOL: f64 = 1e-9;

/// `10^(−loss · d / 10)`.
pub fn transmissivity_from_distance(distance_km: f64, loss_db_per_km: f64) -> f64 {
    10f64.powf(-loss_db_per_km * distance_km / 10.0)
}

/// Alice→Charlie and Charlie→Bob link transmissivities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelParams {
    pub tau_a: f64,
    pub tau_b: f64,
    pub distance_km: f64,
    pub loss_db_per_km: f64,
}

impl ChannelParams {
    /// Charlie at the midpoint of a fibre of total length `distance_km`.
    pub fn from_distance(distance_km: f64) -> Result<Self> {
        Self::from_distance_with_loss(distance_km, DEFAULT_LOSS_DB_PER_KM)
    }

    pub fn from_distance_with_loss(distance_km: f64, loss_db_per_km: f64) -> Result<Self> {
        if distance_km < 0.0 || !distance_km.is_finite() {
            return domain(format!("distance {distance_km} km must be a nonnegative number"));
        }
        if loss_db_per_km < 0.0 || !loss_db_per_km.is_finite() {
            return domain(format!("loss {loss_db_per_km} dB/km must be a nonnegative number"));
        }
        let link = transmissivity_from_distance(distance_km, loss_db_per_km).sqrt();
        Ok(Self {
            tau_a: link,
            tau_b: link,
            distance_km,
            loss_db_per_km,
        })
    }

    /// Explicit, possibly asymmetric, link transmissivities.
    pub fn from_links(tau_a: f64, tau_b: f64) -> Result<Self> {
        for t in [tau_a, tau_b] {
            if !(0.0..=1.0).contains(&t) {
                return domain(format!("transmissivity {t} outside [0, 1]"));
            }
        }
        let total = tau_a * tau_b;
        let distance_km = if total > 0.0 {
            -10.0 * total.log10() / DEFAULT_LOSS_DB_PER_KM
        } else {
            f64::INFINITY
        };
        Ok(Self {
            tau_a,
            tau_b,
            distance_km,
            loss_db_per_km: DEFAULT_LOSS_DB_PER_KM,
        })
    }

    pub fn tau_total(&self) -> f64 {
        self.tau_a * self.tau_b
    }
}

/// Charlie's detector efficiency and dark-count probability.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectorParams {
    pub efficiency: f64,
    pub dark_count: f64,
    pub thermal_cutoff: usize,
}

impl DetectorParams {
    pub fn new(efficiency: f64, dark_count: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&efficiency) {
            return domain(format!("detector efficiency {efficiency} outside [0, 1]"));
        }
        if dark_count < 0.0 || !dark_count.is_finite() {
            return domain(format!("dark count {dark_count} must be nonnegative"));
        }
        if efficiency == 1.0 && dark_count > 0.0 {
            return domain("a unit-efficiency detector cannot carry thermal dark noise");
        }
        Ok(Self {
            efficiency,
            dark_count,
            thermal_cutoff: 2,
        })
    }

    pub fn ideal() -> Self {
        Self {
            efficiency: 1.0,
            dark_count: 0.0,
            thermal_cutoff: 2,
        }
    }

    pub fn with_thermal_cutoff(mut self, cutoff: usize) -> Result<Self> {
        if cutoff == 0 {
            return domain("thermal cutoff must be at least 1");
        }
        self.thermal_cutoff = cutoff;
        Ok(self)
    }

    /// Mean photon number `n̄` of the injected thermal state, `dark / (1 − η)`.
    pub fn mean_thermal_photons(&self) -> f64 {
        if self.dark_count == 0.0 {
            0.0
        } else {
            self.dark_count / (1.0 - self.efficiency)
        }
    }

    pub fn is_ideal(&self) -> bool {
        self.efficiency == 1.0 && self.dark_count == 0.0
    }
}

/// Beamsplitter on two modes of dimensions `dim_a`, `dim_b` (mode `a` most
/// significant). Built by exponentiating the generator inside each
/// total-photon-number sector, so it is exactly unitary on the truncated space.
pub fn beamsplitter_unitary(tau: f64, dim_a: usize, dim_b: usize) -> Result<CMatrix> {
    if !(0.0..=1.0).contains(&tau) {
        return domain(format!("transmissivity {tau} outside [0, 1]"));
    }
    let theta = tau.sqrt().acos();
    let n = dim_a * dim_b;
    let mut u = CMatrix::zeros(n, n);
    for total in 0..(dim_a + dim_b - 1) {
        // sector basis |k, total-k>
        let ks: Vec<usize> = (0..dim_a).filter(|&k| k <= total && total - k < dim_b).collect();
        let size = ks.len();
        let index = |k: usize| k * dim_b + (total - k);
        // Hermitian H = i·G, where G = θ(a†b − ab†) is real antisymmetric.
        let mut h = DMatrix::<C64>::zeros(size, size);
        for (p, &k) in ks.iter().enumerate() {
            for (q, &l) in ks.iter().enumerate() {
                // <k, total-k| a†b |l, total-l> nonzero for k = l + 1
                let mut g = 0.0;
                if k == l + 1 {
                    g += ((l + 1) as f64).sqrt() * ((total - l) as f64).sqrt();
                }
                // <k, total-k| a b† |l, total-l> nonzero for k = l - 1
                if k + 1 == l {
                    g -= (l as f64).sqrt() * ((total - l + 1) as f64).sqrt();
                }
                h[(p, q)] = C64::new(0.0, theta * g);
            }
        }
        let eig = hermitian_eigen(&h);
        let phases = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| C64::new(0.0, -l).exp()));
        let block = &eig.eigenvectors * phases * eig.eigenvectors.adjoint();
        for (p, &k) in ks.iter().enumerate() {
            for (q, &l) in ks.iter().enumerate() {
                u[(index(k), index(l))] = block[(p, q)];
            }
        }
    }
    Ok(u)
}

fn vacuum(dim: usize) -> Result<FockVector> {
    crate::fock::fock_basis_vector(&ModeDims::new(vec![dim])?, &[0])
}

/// Pure-loss channel on `mode`: vacuum environment, beamsplitter, trace out.
pub fn lossy_channel_kraus(rho: &DensityOperator, tau: f64, mode: usize) -> Result<DensityOperator> {
    let n = rho.dims().len();
    if mode >= n {
        return domain(format!("mode {mode} out of range"));
    }
    let d = rho.dims().dim(mode);
    let env = vacuum(d)?.to_density();
    let joint = rho.tensor(&env);
    let u = beamsplitter_unitary(tau, d, d)?;
    let mixed = joint.conjugate_local(&u, &[mode, n])?;
    mixed.partial_trace(&(0..n).collect::<Vec<_>>())
}

/// Purified pure-loss channel: appends an environment mode (same dimension as
/// `mode`) holding the lost photons.
pub fn lossy_channel_purified(psi: &FockVector, tau: f64, mode: usize) -> Result<FockVector> {
    let n = psi.dims().len();
    if mode >= n {
        return domain(format!("mode {mode} out of range"));
    }
    let d = psi.dims().dim(mode);
    let joint = psi.tensor(&vacuum(d)?);
    let u = beamsplitter_unitary(tau, d, d)?;
    joint.apply_local(&u, &[mode, n])
}

/// Thermal state truncated at `cutoff` photons and renormalized; also returns
/// the discarded tail weight `(n̄/(1+n̄))^{cutoff+1}`.
pub fn thermal_state(n_bar: f64, cutoff: usize) -> Result<(DensityOperator, f64)> {
    if n_bar < 0.0 || !n_bar.is_finite() {
        return domain(format!("mean photon number {n_bar} must be nonnegative"));
    }
    let ratio = n_bar / (1.0 + n_bar);
    let defect = ratio.powi(cutoff as i32 + 1);
    if defect > THERMAL_DEFECT_TOL {
        return Err(Error::CutoffTooSmall { cutoff, defect });
    }
    let weights: Vec<f64> = (0..=cutoff)
        .map(|n| ratio.powi(n as i32) / (1.0 + n_bar))
        .collect();
    let total: f64 = weights.iter().sum();
    let rho = DensityOperator::diagonal(&weights.iter().map(|w| w / total).collect::<Vec<_>>())?;
    Ok((rho, defect))
}

/// Detector inefficiency plus dark noise on `mode`: the mode meets a thermal
/// state at a beamsplitter of transmissivity `η_d` and the reflected port is
/// discarded.
pub fn noisy_detection_transform(rho: &DensityOperator, mode: usize, det: &DetectorParams) -> Result<DensityOperator> {
    let n = rho.dims().len();
    if mode >= n {
        return domain(format!("mode {mode} out of range"));
    }
    if det.is_ideal() {
        return Ok(rho.clone());
    }
    let d = rho.dims().dim(mode);
    let env = DensityOperator::diagonal(&thermal_environment(det, d)?)?;
    let joint = rho.tensor(&env);
    let u = beamsplitter_unitary(det.efficiency, d, d)?;
    joint.conjugate_local(&u, &[mode, n])?.partial_trace(&(0..n).collect::<Vec<_>>())
}

/// Thermal state for the detector's `n̄`, zero-padded or truncated to `dim`.
pub(crate) fn thermal_environment(det: &DetectorParams, dim: usize) -> Result<Vec<f64>> {
    let cutoff = det.thermal_cutoff.min(dim - 1);
    let (thermal, _) = thermal_state(det.mean_thermal_photons(), cutoff)?;
    let mut w = thermal.diagonal_probabilities();
    w.resize(dim, 0.0);
    Ok(w)
}
