//! Measurements used by the protocol: Charlie's coherent total-photon-number
//! POVM, local photon-number projectors, the separable cheating measurement,
//! check states and the qubit mutually unbiased bases.
//!
//! Sector `c` of Charlie's POVM keeps the occupations `|n, c−n>` with both
//! entries at most `n_max`, i.e. `n ∈ lo..=hi` with `lo = max(0, c − n_max)` and
//! `hi = min(c, n_max)`. Its `k = hi − lo + 1` elements are the discrete
//! Fourier basis of those terms, `|φ_c^j> = Σ_n ω^{(n−lo) j} |n, c−n> / √k` with
//! `ω = exp(2πi/k)`. For `c ≤ n_max` this is exactly the untruncated definition.

use std::f64::consts::PI;

use crate::error::{domain, Error, Result};
use crate::fock::{fock_basis_vector, CMatrix, DensityOperator, FockVector, ModeDims, C64};

const COMPLETENESS_TOL: f64 = 1e-12;

/// Labeled measurement operators acting on a fixed set of modes. The operators
/// are effects (positive, not necessarily rank one) that sum to the identity.
#[derive(Clone, Debug)]
pub struct PovmSet<L> {
    dims: ModeDims,
    outcomes: Vec<(L, CMatrix)>,
}

impl<L: Clone> PovmSet<L> {
    pub fn new(dims: ModeDims, outcomes: Vec<(L, CMatrix)>) -> Result<Self> {
        let n = dims.total();
        for (_, op) in &outcomes {
            if op.nrows() != n || op.ncols() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: op.nrows(),
                });
            }
        }
        Ok(Self { dims, outcomes })
    }

    pub fn dims(&self) -> &ModeDims {
        &self.dims
    }

    pub fn outcomes(&self) -> &[(L, CMatrix)] {
        &self.outcomes
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    /// Largest entrywise deviation of `Σ E` from the identity.
    pub fn completeness_defect(&self) -> f64 {
        let n = self.dims.total();
        let mut sum = CMatrix::zeros(n, n);
        for (_, op) in &self.outcomes {
            sum += op;
        }
        sum -= CMatrix::identity(n, n);
        sum.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Outcome probabilities `Tr[(E ⊗ I) ρ]` with the effects on `modes`.
    pub fn probabilities(&self, rho: &DensityOperator, modes: &[usize]) -> Result<Vec<(L, f64)>> {
        self.outcomes
            .iter()
            .map(|(l, op)| Ok((l.clone(), rho.expectation_local(op, modes)?)))
            .collect()
    }
}

/// One rank-one element `|φ_c^j><φ_c^j|` of Charlie's POVM.
#[derive(Clone, Debug, PartialEq)]
pub struct PovmElement {
    pub c: usize,
    pub j: usize,
    pub vector: FockVector,
}

impl PovmElement {
    pub fn projector(&self) -> CMatrix {
        self.vector.to_density().matrix().clone()
    }
}

#[derive(Clone, Debug)]
pub struct CharliePovm {
    n_max: usize,
    sectors: Vec<Vec<PovmElement>>,
}

/// Range of `n` (photons on the first mode) kept in sector `c`.
pub fn sector_range(n_max: usize, c: usize) -> (usize, usize) {
    (c.saturating_sub(n_max), c.min(n_max))
}

/// `|φ_c^j>` on two modes of dimension `n_max + 1`.
pub fn charlie_vector(n_max: usize, c: usize, j: usize) -> Result<FockVector> {
    if c > 2 * n_max {
        return domain(format!("outcome c = {c} exceeds 2 n_max = {}", 2 * n_max));
    }
    let (lo, hi) = sector_range(n_max, c);
    let k = hi - lo + 1;
    if j >= k {
        return domain(format!("outcome index j = {j} outside 0..{k} for c = {c}"));
    }
    let dims = ModeDims::uniform(2, n_max + 1)?;
    let mut amp = vec![C64::new(0.0, 0.0); dims.total()];
    let norm = 1.0 / (k as f64).sqrt();
    for n in lo..=hi {
        let phase = 2.0 * PI * (((n - lo) * j) % k) as f64 / k as f64;
        amp[dims.index_of(&[n, c - n])?] = C64::from_polar(norm, phase);
    }
    FockVector::from_amplitudes(dims, amp)
}

/// Full POVM `{Π_c^j}` for outcomes `c ∈ 0..=2 n_max`.
pub fn charlie_povm(n_max: usize) -> Result<CharliePovm> {
    if n_max == 0 {
        return domain("n_max must be at least 1");
    }
    let sectors = (0..=2 * n_max)
        .map(|c| {
            (0..sector_multiplicity(n_max, c))
                .map(|j| {
                    Ok(PovmElement {
                        c,
                        j,
                        vector: charlie_vector(n_max, c, j)?,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CharliePovm { n_max, sectors })
}

/// Number of POVM elements in sector `c`.
pub fn sector_multiplicity(n_max: usize, c: usize) -> usize {
    let (lo, hi) = sector_range(n_max, c);
    hi - lo + 1
}

impl CharliePovm {
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn sector(&self, c: usize) -> &[PovmElement] {
        &self.sectors[c]
    }

    pub fn multiplicity(&self, c: usize) -> usize {
        self.sectors[c].len()
    }

    pub fn elements(&self) -> impl Iterator<Item = &PovmElement> {
        self.sectors.iter().flatten()
    }

    pub fn element(&self, c: usize, j: usize) -> Option<&PovmElement> {
        self.sectors.get(c).and_then(|s| s.get(j))
    }

    pub fn to_povm_set(&self) -> PovmSet<(usize, usize)> {
        let dims = ModeDims::uniform(2, self.n_max + 1).expect("n_max >= 1");
        let outcomes = self.elements().map(|e| ((e.c, e.j), e.projector())).collect();
        PovmSet { dims, outcomes }
    }

    pub fn completeness_defect(&self) -> f64 {
        self.to_povm_set().completeness_defect()
    }

    pub fn is_complete(&self) -> bool {
        self.completeness_defect() <= COMPLETENESS_TOL
    }
}

/// `|n><n|` on a mode of dimension `dim`.
pub fn pnrd_projector(n: usize, dim: usize) -> Result<CMatrix> {
    if n >= dim {
        return Err(Error::CutoffExceeded {
            mode: 0,
            occupation: n,
            dim,
        });
    }
    let mut p = CMatrix::zeros(dim, dim);
    p[(n, n)] = C64::new(1.0, 0.0);
    Ok(p)
}

/// Local photon counting on both modes, labeled `(n_a, n_b)`.
pub fn separable_measurement(n_max: usize) -> Result<PovmSet<(usize, usize)>> {
    let m = n_max + 1;
    let dims = ModeDims::uniform(2, m)?;
    let mut outcomes = Vec::with_capacity(m * m);
    for na in 0..m {
        for nb in 0..m {
            let v = fock_basis_vector(&dims, &[na, nb])?;
            outcomes.push(((na, nb), v.to_density().matrix().clone()));
        }
    }
    PovmSet::new(dims, outcomes)
}

/// `Σ_n |n> / √(n_max + 1)`.
pub fn diagonal_check_state(n_max: usize) -> FockVector {
    let m = n_max + 1;
    FockVector::from_real(&vec![1.0 / (m as f64).sqrt(); m]).expect("nonempty")
}

/// What a sender injects into Charlie's input mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SenderState {
    /// Uniform photon-number mixture, the reduced key state.
    Key,
    /// The diagonal check state `|+>`.
    Check,
}

impl SenderState {
    pub fn symbol(self) -> char {
        match self {
            SenderState::Key => 'K',
            SenderState::Check => '+',
        }
    }

    fn density(self, n_max: usize) -> DensityOperator {
        match self {
            SenderState::Key => {
                let m = n_max + 1;
                DensityOperator::diagonal(&vec![1.0 / m as f64; m]).expect("valid weights")
            }
            SenderState::Check => diagonal_check_state(n_max).to_density(),
        }
    }
}

/// Charlie's statistics for one sender configuration and total photon number.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckStatistics {
    pub alice: SenderState,
    pub bob: SenderState,
    pub c: usize,
    /// `P(Π_c^j)` for `j = 0..k`.
    pub non_separable: Vec<f64>,
    /// `P(n_a, n_b)` over pairs with `n_a + n_b = c`, in increasing `n_a`.
    pub separable: Vec<((usize, usize), f64)>,
}

pub fn check_state_statistics(n_max: usize, alice: SenderState, bob: SenderState, c: usize) -> Result<CheckStatistics> {
    if c > 2 * n_max {
        return domain(format!("outcome c = {c} exceeds 2 n_max"));
    }
    let rho = alice.density(n_max).tensor(&bob.density(n_max));
    let povm = charlie_povm(n_max)?;
    let non_separable = povm
        .sector(c)
        .iter()
        .map(|e| rho.expectation_local(&e.projector(), &[0, 1]))
        .collect::<Result<Vec<_>>>()?;
    let (lo, hi) = sector_range(n_max, c);
    let separable = (lo..=hi)
        .map(|na| Ok(((na, c - na), rho.element(&[na, c - na], &[na, c - na])?.re)))
        .collect::<Result<Vec<_>>>()?;
    Ok(CheckStatistics {
        alice,
        bob,
        c,
        non_separable,
        separable,
    })
}

/// The four sender configurations `KK, K+, +K, ++`.
pub fn sender_configurations() -> [(SenderState, SenderState); 4] {
    use SenderState::*;
    [(Key, Key), (Key, Check), (Check, Key), (Check, Check)]
}

/// Basis labels for the qubit mutually unbiased bases.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PauliBasis {
    X,
    Y,
    Z,
}

impl PauliBasis {
    pub const ALL: [PauliBasis; 3] = [PauliBasis::X, PauliBasis::Y, PauliBasis::Z];

    pub fn index(self) -> usize {
        match self {
            PauliBasis::X => 0,
            PauliBasis::Y => 1,
            PauliBasis::Z => 2,
        }
    }

    /// Eigenvectors `[|+j>, |−j>]`.
    pub fn vectors(self) -> [FockVector; 2] {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mk = |a: C64, b: C64| {
            FockVector::from_amplitudes(ModeDims::new(vec![2]).expect("qubit"), vec![a, b]).expect("qubit")
        };
        let (one, zero) = (C64::new(1.0, 0.0), C64::new(0.0, 0.0));
        match self {
            PauliBasis::X => [mk(one * s, one * s), mk(one * s, -one * s)],
            PauliBasis::Y => [mk(one * s, C64::new(0.0, s)), mk(one * s, C64::new(0.0, -s))],
            PauliBasis::Z => [mk(one, zero), mk(zero, one)],
        }
    }

    /// Pauli matrix with the eigenvectors above for eigenvalues `+1, −1`.
    pub fn pauli(self) -> CMatrix {
        let [p, m] = self.vectors();
        p.to_density().matrix() - m.to_density().matrix()
    }
}

/// Complete set of mutually unbiased bases on dimension `m`.
#[derive(Clone, Debug)]
pub struct MubSet {
    pub dimension: usize,
    pub bases: Vec<Vec<FockVector>>,
}

impl MubSet {
    /// Largest deviation of `|<e|h>|²` from `1/m` across distinct bases.
    pub fn unbiasedness_defect(&self) -> f64 {
        let target = 1.0 / self.dimension as f64;
        let mut worst: f64 = 0.0;
        for (i, bi) in self.bases.iter().enumerate() {
            for bj in &self.bases[i + 1..] {
                for e in bi {
                    for h in bj {
                        let o = e.inner(h).expect("same dims").norm_sqr();
                        worst = worst.max((o - target).abs());
                    }
                }
            }
        }
        worst
    }
}

/// X, Y and Z eigenbases. Only `m = 2` is available.
pub fn mub_bases(m: usize) -> Result<MubSet> {
    if m != 2 {
        return Err(Error::UnsupportedDimension(m));
    }
    Ok(MubSet {
        dimension: 2,
        bases: PauliBasis::ALL.iter().map(|b| b.vectors().to_vec()).collect(),
    })
}

/// Sender-side states prepared when projecting the key-state partner mode
/// onto each MUB vector.
#[derive(Clone, Debug, PartialEq)]
pub struct PreparedCheckStates {
    pub plus_x: FockVector,
    pub minus_x: FockVector,
    pub plus_y: FockVector,
    pub minus_y: FockVector,
    pub plus_z: FockVector,
    pub minus_z: FockVector,
}

pub fn prepared_check_states(eps0: f64, eps1: f64) -> Result<PreparedCheckStates> {
    if eps0 < 0.0 || eps1 < 0.0 || ((eps0 + eps1) - 1.0).abs() > 1e-9 {
        return domain(format!("check weights ({eps0}, {eps1}) must be a point of the simplex"));
    }
    let (s0, s1) = (eps0.sqrt(), eps1.sqrt());
    let qubit = |a: C64, b: C64| FockVector::from_amplitudes(ModeDims::new(vec![2]).expect("qubit"), vec![a, b]);
    let r = |x: f64| C64::new(x, 0.0);
    let i = |x: f64| C64::new(0.0, x);
    Ok(PreparedCheckStates {
        plus_x: qubit(r(s0), r(s1))?,
        minus_x: qubit(r(s0), r(-s1))?,
        plus_y: qubit(r(s0), i(-s1))?,
        minus_y: qubit(r(s0), i(s1))?,
        plus_z: qubit(r(1.0), r(0.0))?,
        minus_z: qubit(r(0.0), r(1.0))?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{key_state, CoefficientVector};
    use approx::assert_abs_diff_eq;

    #[test]
    fn completeness_all_cutoffs() {
        for n_max in 1..=7 {
            let povm = charlie_povm(n_max).unwrap();
            assert!(povm.completeness_defect() < 1e-12, "n_max = {n_max}");
            let count: usize = (0..=2 * n_max).map(|c| povm.multiplicity(c)).sum();
            assert_eq!(count, (n_max + 1) * (n_max + 1));
        }
    }

    #[test]
    fn idempotent_projectors() {
        let povm = charlie_povm(3).unwrap();
        for e in povm.elements() {
            let p = e.projector();
            assert!((&p * &p - &p).norm() < 1e-12);
        }
    }

    #[test]
    fn single_photon_sector() {
        let v = charlie_vector(1, 1, 0).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(v.amplitude(&[0, 1]).unwrap().re, s, epsilon = 1e-15);
        assert_abs_diff_eq!(v.amplitude(&[1, 0]).unwrap().re, s, epsilon = 1e-15);
    }

    #[test]
    fn two_photon_sector_phases() {
        let v = charlie_vector(2, 2, 1).unwrap();
        let w = C64::from_polar(1.0 / 3f64.sqrt(), 2.0 * PI / 3.0);
        assert_abs_diff_eq!((v.amplitude(&[0, 2]).unwrap() - C64::new(1.0 / 3f64.sqrt(), 0.0)).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((v.amplitude(&[1, 1]).unwrap() - w).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((v.amplitude(&[2, 0]).unwrap() - w.conj()).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn upper_sectors_are_truncated() {
        assert_eq!(sector_multiplicity(2, 3), 2);
        assert_eq!(sector_multiplicity(2, 4), 1);
        let v = charlie_vector(2, 4, 0).unwrap();
        assert_abs_diff_eq!(v.amplitude(&[2, 2]).unwrap().re, 1.0);
    }

    #[test]
    fn pnrd_on_plus_and_completeness() {
        let plus = diagonal_check_state(1).to_density();
        assert_abs_diff_eq!(plus.expectation_local(&pnrd_projector(0, 2).unwrap(), &[0]).unwrap(), 0.5, epsilon = 1e-15);
        let sum = (0..4).fold(CMatrix::zeros(4, 4), |acc, n| acc + pnrd_projector(n, 4).unwrap());
        assert_abs_diff_eq!((sum - CMatrix::identity(4, 4)).norm(), 0.0);
        assert!(pnrd_projector(2, 2).is_err());
    }

    #[test]
    fn pnrd_on_reduced_key_state() {
        let v = key_state(&CoefficientVector::new(vec![0.8575, 0.1425]).unwrap());
        let reduced = v.reduced_density(&[0]).unwrap();
        let p = reduced.expectation_local(&pnrd_projector(1, 2).unwrap(), &[0]).unwrap();
        assert_abs_diff_eq!(p, 0.1425, epsilon = 1e-15);
    }

    #[test]
    fn separable_on_plus_plus() {
        let sep = separable_measurement(2).unwrap();
        assert!(sep.completeness_defect() < 1e-15);
        let plus = diagonal_check_state(2).to_density();
        for (_, p) in sep.probabilities(&plus.tensor(&plus), &[0, 1]).unwrap() {
            assert_abs_diff_eq!(p, 1.0 / 9.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn table_one_cells() {
        for (a, b) in sender_configurations() {
            let s = check_state_statistics(2, a, b, 2).unwrap();
            for (_, p) in &s.separable {
                assert_abs_diff_eq!(*p, 1.0 / 9.0, epsilon = 1e-12);
            }
            if (a, b) == (SenderState::Check, SenderState::Check) {
                assert_abs_diff_eq!(s.non_separable[0], 1.0 / 3.0, epsilon = 1e-12);
                assert_abs_diff_eq!(s.non_separable[1], 0.0, epsilon = 1e-12);
                assert_abs_diff_eq!(s.non_separable[2], 0.0, epsilon = 1e-12);
            } else {
                for p in &s.non_separable {
                    assert_abs_diff_eq!(*p, 1.0 / 9.0, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn qubit_mubs() {
        let set = mub_bases(2).unwrap();
        assert!(set.unbiasedness_defect() < 1e-12);
        for basis in &set.bases {
            assert_abs_diff_eq!(basis[0].inner(&basis[1]).unwrap().norm(), 0.0, epsilon = 1e-15);
        }
        assert!(matches!(mub_bases(3), Err(Error::UnsupportedDimension(3))));
    }

    #[test]
    fn check_states_from_key_state_projection() {
        let (e0, e1) = (0.7, 0.3);
        let prepared = prepared_check_states(e0, e1).unwrap();
        let key = key_state(&CoefficientVector::new(vec![e0, e1]).unwrap());
        let [plus_x, _] = PauliBasis::X.vectors();
        let [plus_y, _] = PauliBasis::Y.vectors();
        for (bra, want) in [(plus_x, &prepared.plus_x), (plus_y, &prepared.plus_y)] {
            let got = key.project(&[0], &bra).unwrap().normalized().unwrap();
            assert_abs_diff_eq!(got.inner(want).unwrap().norm(), 1.0, epsilon = 1e-12);
        }
        let degenerate = prepared_check_states(1.0, 0.0).unwrap();
        assert_eq!(degenerate.plus_x, degenerate.plus_z);
    }
}
