//! Two-qubit state tomography from Pauli-basis statistics.
//!
//! The state is written `ρ = (I + Σ a_j σ_j⊗I + Σ b_k I⊗σ_k + Σ r_jk σ_j⊗σ_k) / 4`
//! with singles and correlations read off the `±1` outcome tables.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::entropy::ProbTable;
use crate::error::{domain, Error, Result};
use crate::fock::{hermitian_eigen, CMatrix, DensityOperator, ModeDims, C64};
use crate::measurements::PauliBasis;
use crate::protocol::holevo_eve;

/// Tolerated negative eigenvalue of a reconstruction from exact statistics.
pub const EXACT_POSITIVITY_TOL: f64 = 1e-6;

/// Outcome tables for every basis pair, indexed `[alice][bob]` by
/// [`PauliBasis::index`]; within a table index 0 is `+`, 1 is `−`.
pub type BasisTables = [[ProbTable; 3]; 3];

#[derive(Clone, Debug, PartialEq)]
pub struct TomographyRecord {
    pub singles_a: [f64; 3],
    pub singles_b: [f64; 3],
    pub correlations: [[f64; 3]; 3],
    /// Shots per basis pair, `None` for exact statistics.
    pub shots: Option<u64>,
}

fn check_two_qubit(rho: &DensityOperator) -> Result<()> {
    if rho.dims().as_slice() != [2, 2] {
        return domain(format!("tomography needs a two-qubit state, got dims {:?}", rho.dims().as_slice()));
    }
    Ok(())
}

/// `P(±j, ±k)` for Alice measuring `basis_a` and Bob `basis_b`.
pub fn measurement_probabilities(rho: &DensityOperator, basis_a: PauliBasis, basis_b: PauliBasis) -> Result<ProbTable> {
    check_two_qubit(rho)?;
    let va = basis_a.vectors();
    let vb = basis_b.vectors();
    let mut p = Vec::with_capacity(4);
    for x in &va {
        for y in &vb {
            let effect = x.tensor(y).to_density();
            p.push(rho.expectation_local(effect.matrix(), &[0, 1])?.max(0.0));
        }
    }
    ProbTable::new(vec![("a".into(), 2), ("b".into(), 2)], p)
}

pub fn all_basis_tables(rho: &DensityOperator) -> Result<BasisTables> {
    let table = |a: PauliBasis, b: PauliBasis| measurement_probabilities(rho, a, b);
    use PauliBasis::*;
    Ok([
        [table(X, X)?, table(X, Y)?, table(X, Z)?],
        [table(Y, X)?, table(Y, Y)?, table(Y, Z)?],
        [table(Z, X)?, table(Z, Y)?, table(Z, Z)?],
    ])
}

fn normalized_values(t: &ProbTable) -> Result<Vec<f64>> {
    let total = t.total();
    if total <= 0.0 {
        return domain("empty outcome table");
    }
    Ok(t.values().iter().map(|v| v / total).collect())
}

/// `a_j = P_A(+j) − P_A(−j)` and `b_j` likewise, read from the `(j, j)` tables.
pub fn singles_coefficients(tables: &BasisTables) -> Result<([f64; 3], [f64; 3])> {
    let mut a = [0.0; 3];
    let mut b = [0.0; 3];
    for j in 0..3 {
        let p = normalized_values(&tables[j][j])?;
        a[j] = (p[0] + p[1]) - (p[2] + p[3]);
        b[j] = (p[0] + p[2]) - (p[1] + p[3]);
    }
    Ok((a, b))
}

/// `r_jk = P(++) + P(−−) − P(+−) − P(−+)`.
pub fn correlation_coefficients(tables: &BasisTables) -> Result<[[f64; 3]; 3]> {
    let mut r = [[0.0; 3]; 3];
    for (j, row) in tables.iter().enumerate() {
        for (k, t) in row.iter().enumerate() {
            let p = normalized_values(t)?;
            r[j][k] = p[0] + p[3] - p[1] - p[2];
        }
    }
    Ok(r)
}

/// Record built from exact outcome probabilities.
pub fn exact_record(rho: &DensityOperator) -> Result<TomographyRecord> {
    let tables = all_basis_tables(rho)?;
    let (singles_a, singles_b) = singles_coefficients(&tables)?;
    Ok(TomographyRecord {
        singles_a,
        singles_b,
        correlations: correlation_coefficients(&tables)?,
        shots: None,
    })
}

/// Finite-shot record: `shots` multinomial draws per basis pair from one
/// seeded stream, basis pairs in row-major order.
pub fn sample_statistics(rho: &DensityOperator, shots: u64, seed: u64) -> Result<TomographyRecord> {
    if shots == 0 {
        return domain("at least one shot per basis pair is required");
    }
    let tables = all_basis_tables(rho)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sampled: Vec<ProbTable> = Vec::with_capacity(9);
    for row in &tables {
        for t in row {
            let p = normalized_values(t)?;
            let mut counts = [0u64; 4];
            let mut left = shots;
            let mut mass = 1.0;
            for i in 0..3 {
                let q = if mass > 0.0 { (p[i] / mass).clamp(0.0, 1.0) } else { 0.0 };
                let draw = Binomial::new(left, q).map_err(|e| Error::Domain(e.to_string()))?;
                counts[i] = draw.sample(&mut rng);
                left -= counts[i];
                mass -= p[i];
            }
            counts[3] = left;
            sampled.push(ProbTable::new(
                t.axes().to_vec(),
                counts.iter().map(|&c| c as f64 / shots as f64).collect(),
            )?);
        }
    }
    let mut it = sampled.into_iter();
    let mut next_row = || -> [ProbTable; 3] { [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()] };
    let tables: BasisTables = [next_row(), next_row(), next_row()];
    let (singles_a, singles_b) = singles_coefficients(&tables)?;
    Ok(TomographyRecord {
        singles_a,
        singles_b,
        correlations: correlation_coefficients(&tables)?,
        shots: Some(shots),
    })
}

/// Reconstructed operator and its smallest eigenvalue.
#[derive(Clone, Debug)]
pub struct Reconstruction {
    /// Unit-trace Hermitian operator; may be non-positive for sampled records.
    pub state: DensityOperator,
    pub min_eigenvalue: f64,
}

/// Linear inversion of the Fano form. Exact records must reconstruct a
/// positive operator within [`EXACT_POSITIVITY_TOL`].
pub fn reconstruct_state(record: &TomographyRecord) -> Result<Reconstruction> {
    let id = CMatrix::identity(2, 2);
    let paulis: Vec<CMatrix> = PauliBasis::ALL.iter().map(|b| b.pauli()).collect();
    let scale = |m: CMatrix, x: f64| m * C64::new(x, 0.0);
    let mut mat = CMatrix::identity(4, 4);
    for j in 0..3 {
        mat += scale(paulis[j].kronecker(&id), record.singles_a[j]);
        mat += scale(id.kronecker(&paulis[j]), record.singles_b[j]);
        for k in 0..3 {
            mat += scale(paulis[j].kronecker(&paulis[k]), record.correlations[j][k]);
        }
    }
    mat *= C64::new(0.25, 0.0);
    let state = DensityOperator::new(ModeDims::new(vec![2, 2])?, mat)?;
    let min_eigenvalue = state.eigenvalues()[0];
    if record.shots.is_none() && min_eigenvalue < -EXACT_POSITIVITY_TOL {
        return Err(Error::Integrity(format!(
            "exact tomography produced eigenvalue {min_eigenvalue:e}"
        )));
    }
    Ok(Reconstruction { state, min_eigenvalue })
}

/// Nearest positive operator in Frobenius norm with unit trace: negative
/// eigenvalues are clipped and the spectrum renormalized.
pub fn nearest_psd(rho: &DensityOperator) -> Result<DensityOperator> {
    let eig = hermitian_eigen(rho.matrix());
    let clipped: Vec<f64> = eig.eigenvalues.iter().map(|l| l.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if total <= 0.0 {
        return domain("operator has no positive part");
    }
    let d = nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        clipped.len(),
        clipped.iter().map(|l| C64::new(l / total, 0.0)),
    ));
    let mat = &eig.eigenvectors * d * eig.eigenvectors.adjoint();
    let herm = (&mat + mat.adjoint()) * C64::new(0.5, 0.0);
    DensityOperator::new(rho.dims().clone(), herm)
}

/// Eve's Holevo bound evaluated on the (positive-projected) reconstruction.
pub fn eve_bound_from_tomography(record: &TomographyRecord) -> Result<f64> {
    let rec = reconstruct_state(record)?;
    holevo_eve(&nearest_psd(&rec.state)?)
}
