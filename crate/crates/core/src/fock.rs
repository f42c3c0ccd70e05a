//! Dense truncated Fock-space linear algebra.
//!
//! Multi-mode objects are stored as flat arrays indexed in mixed radix with
//! mode 0 most significant: for dimensions `[d0, d1, d2]` the occupation
//! tuple `(n0, n1, n2)` lives at `n0 * d1 * d2 + n1 * d2 + n2`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{domain, Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

const HERMITIAN_TOL: f64 = 1e-10;

/// Entries below this fraction of the largest magnitude are zeroed before an
/// eigen-decomposition; subnormal products otherwise make the solver return
/// non-finite eigenvalues.
const EIGEN_FLUSH: f64 = 1e-100;

fn flushed(m: &CMatrix) -> CMatrix {
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let floor = scale * EIGEN_FLUSH;
    m.map(|z| if z.norm() < floor { C64::new(0.0, 0.0) } else { z })
}

// Default eigen solve iterates unbounded at machine epsilon and can diverge to
// NaN on nearly rank-deficient inputs; relax the tolerance until the output is finite.
const EIGEN_TOLERANCES: [f64; 4] = [f64::EPSILON, 1e-14, 1e-13, 1e-12];
const EIGEN_MAX_ITER: usize = 10_000;
const EIGEN_SHIFTS: [f64; 3] = [0.5, 1.0, 0.25];

/// Eigen-decomposition of a Hermitian matrix.
pub(crate) fn hermitian_eigen(m: &CMatrix) -> SymmetricEigen<C64, nalgebra::Dyn> {
    let m = flushed(m);
    let finite = |e: &SymmetricEigen<C64, nalgebra::Dyn>| e.eigenvalues.iter().all(|x| x.is_finite());
    for eps in EIGEN_TOLERANCES {
        if let Some(e) = m.clone().try_symmetric_eigen(eps, EIGEN_MAX_ITER) {
            if finite(&e) {
                return e;
            }
        }
    }
    // A diagonal shift leaves eigenvectors unchanged and breaks the exact degeneracy at zero.
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    for factor in EIGEN_SHIFTS {
        let shift = scale * factor;
        let shifted = &m + CMatrix::identity(m.nrows(), m.ncols()) * C64::new(shift, 0.0);
        if let Some(mut e) = shifted.try_symmetric_eigen(f64::EPSILON, EIGEN_MAX_ITER) {
            if finite(&e) {
                e.eigenvalues.iter_mut().for_each(|x| *x -= shift);
                return e;
            }
        }
    }
    m.symmetric_eigen()
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub(crate) fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = hermitian_eigen(m).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Per-mode Hilbert-space dimensions (photon cutoff + 1 for each mode).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ModeDims(Vec<usize>);

impl ModeDims {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return domain("a state needs at least one mode");
        }
        if dims.contains(&0) {
            return domain(format!("mode dimensions must be >= 1, got {dims:?}"));
        }
        Ok(Self(dims))
    }

    pub fn uniform(modes: usize, dim: usize) -> Result<Self> {
        Self::new(vec![dim; modes])
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> usize {
        self.0.iter().product()
    }

    pub fn dim(&self, mode: usize) -> usize {
        self.0[mode]
    }

    /// Flat-index stride of each mode.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.0.len()];
        for k in (0..self.0.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.0[k + 1];
        }
        strides
    }

    pub fn index_of(&self, occupations: &[usize]) -> Result<usize> {
        if occupations.len() != self.0.len() {
            return Err(Error::DimensionMismatch {
                expected: self.0.len(),
                found: occupations.len(),
            });
        }
        let mut idx = 0;
        for (mode, (&n, &d)) in occupations.iter().zip(&self.0).enumerate() {
            if n >= d {
                return Err(Error::CutoffExceeded {
                    mode,
                    occupation: n,
                    dim: d,
                });
            }
            idx = idx * d + n;
        }
        Ok(idx)
    }

    pub fn occupations(&self, mut index: usize) -> Vec<usize> {
        let mut occ = vec![0; self.0.len()];
        for k in (0..self.0.len()).rev() {
            occ[k] = index % self.0[k];
            index /= self.0[k];
        }
        occ
    }

    pub fn concat(&self, other: &ModeDims) -> ModeDims {
        let mut dims = self.0.clone();
        dims.extend_from_slice(&other.0);
        ModeDims(dims)
    }

    /// Dimensions of the listed modes, in the listed order.
    pub fn select(&self, modes: &[usize]) -> ModeDims {
        ModeDims(modes.iter().map(|&m| self.0[m]).collect())
    }

    fn check_modes(&self, modes: &[usize]) -> Result<()> {
        for (i, &m) in modes.iter().enumerate() {
            if m >= self.0.len() {
                return domain(format!("mode {m} out of range for {} modes", self.0.len()));
            }
            if modes[..i].contains(&m) {
                return domain(format!("mode {m} listed twice"));
            }
        }
        Ok(())
    }

    fn complement(&self, modes: &[usize]) -> Vec<usize> {
        (0..self.0.len()).filter(|m| !modes.contains(m)).collect()
    }

    /// Flat-index offsets contributed by each joint configuration of `modes`
    /// (enumerated in mixed radix over `modes` in the given order).
    fn offsets(&self, modes: &[usize]) -> Vec<usize> {
        let strides = self.strides();
        let mut offsets = vec![0usize];
        for &m in modes {
            let mut next = Vec::with_capacity(offsets.len() * self.0[m]);
            for &o in &offsets {
                for n in 0..self.0[m] {
                    next.push(o + n * strides[m]);
                }
            }
            offsets = next;
        }
        offsets
    }
}

/// Pure (possibly subnormalized) multi-mode state.
#[derive(Clone, Debug, PartialEq)]
pub struct FockVector {
    dims: ModeDims,
    amp: Vec<C64>,
}

impl FockVector {
    pub fn from_amplitudes(dims: ModeDims, amp: Vec<C64>) -> Result<Self> {
        if amp.len() != dims.total() {
            return Err(Error::DimensionMismatch {
                expected: dims.total(),
                found: amp.len(),
            });
        }
        Ok(Self { dims, amp })
    }

    pub fn zeros(dims: ModeDims) -> Self {
        let amp = vec![C64::new(0.0, 0.0); dims.total()];
        Self { dims, amp }
    }

    /// Single-mode vector from real amplitudes.
    pub fn from_real(amps: &[f64]) -> Result<Self> {
        let dims = ModeDims::new(vec![amps.len()])?;
        Self::from_amplitudes(dims, amps.iter().map(|&a| C64::new(a, 0.0)).collect())
    }

    pub fn dims(&self) -> &ModeDims {
        &self.dims
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amp
    }

    pub fn amplitude(&self, occupations: &[usize]) -> Result<C64> {
        Ok(self.amp[self.dims.index_of(occupations)?])
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amp.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= 1e-12
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_sqr();
        if n <= 0.0 {
            return domain("cannot normalize the zero vector");
        }
        let s = 1.0 / n.sqrt();
        Ok(Self {
            dims: self.dims.clone(),
            amp: self.amp.iter().map(|a| a * s).collect(),
        })
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &FockVector) -> Result<C64> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch {
                expected: self.dims.total(),
                found: other.dims.total(),
            });
        }
        Ok(self
            .amp
            .iter()
            .zip(&other.amp)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn tensor(&self, other: &FockVector) -> FockVector {
        let mut amp = Vec::with_capacity(self.amp.len() * other.amp.len());
        for a in &self.amp {
            for b in &other.amp {
                amp.push(a * b);
            }
        }
        FockVector {
            dims: self.dims.concat(&other.dims),
            amp,
        }
    }

    /// `|psi><psi|` with trace equal to the squared norm.
    pub fn to_density(&self) -> DensityOperator {
        let v = nalgebra::DVector::from_column_slice(&self.amp);
        let mat = &v * v.adjoint();
        DensityOperator {
            dims: self.dims.clone(),
            trace_norm: self.norm_sqr(),
            mat,
        }
    }

    /// Applies `op` to the listed modes (in the listed order), identity elsewhere.
    pub fn apply_local(&self, op: &CMatrix, modes: &[usize]) -> Result<FockVector> {
        let amp = apply_local_vec(&self.dims, op, modes, &self.amp)?;
        Ok(FockVector {
            dims: self.dims.clone(),
            amp,
        })
    }

    /// Contracts the listed modes with `<bra|`, leaving the remaining modes in
    /// their original order. The result is subnormalized.
    pub fn project(&self, modes: &[usize], bra: &FockVector) -> Result<FockVector> {
        self.dims.check_modes(modes)?;
        let target = self.dims.select(modes);
        if target != bra.dims {
            return Err(Error::DimensionMismatch {
                expected: target.total(),
                found: bra.dims.total(),
            });
        }
        let rest = self.dims.complement(modes);
        if rest.is_empty() {
            return domain("projection would consume every mode");
        }
        let off_t = self.dims.offsets(modes);
        let off_r = self.dims.offsets(&rest);
        let weights: Vec<(usize, C64)> = off_t
            .iter()
            .zip(&bra.amp)
            .filter(|(_, b)| b.norm_sqr() > 0.0)
            .map(|(&o, b)| (o, b.conj()))
            .collect();
        let amp = off_r
            .iter()
            .map(|&r| weights.iter().map(|&(o, w)| w * self.amp[r + o]).sum())
            .collect();
        Ok(FockVector {
            dims: self.dims.select(&rest),
            amp,
        })
    }

    /// Reduced operator on `keep` (in the listed order) of this pure state,
    /// computed as a Gram contraction over the discarded modes.
    pub fn reduced_density(&self, keep: &[usize]) -> Result<DensityOperator> {
        if keep.is_empty() {
            return domain("partial trace needs a nonempty set of kept modes");
        }
        self.dims.check_modes(keep)?;
        let traced = self.dims.complement(keep);
        let off_k = self.dims.offsets(keep);
        let off_t = self.dims.offsets(&traced);
        let m = CMatrix::from_fn(off_k.len(), off_t.len(), |k, t| self.amp[off_k[k] + off_t[t]]);
        let mat = &m * m.adjoint();
        Ok(DensityOperator {
            dims: self.dims.select(keep),
            trace_norm: self.norm_sqr(),
            mat,
        })
    }
}

/// `|n0, n1, ...>` on the given modes.
pub fn fock_basis_vector(dims: &ModeDims, occupations: &[usize]) -> Result<FockVector> {
    let idx = dims.index_of(occupations)?;
    let mut v = FockVector::zeros(dims.clone());
    v.amp[idx] = C64::new(1.0, 0.0);
    Ok(v)
}

/// Hermitian positive semidefinite operator with explicit trace bookkeeping.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    dims: ModeDims,
    mat: CMatrix,
    trace_norm: f64,
}

impl DensityOperator {
    /// Validates shape, Hermiticity and trace; positivity is checked separately
    /// by [`DensityOperator::check_positive`] since it needs a diagonalization.
    pub fn new(dims: ModeDims, mat: CMatrix) -> Result<Self> {
        let n = dims.total();
        if mat.nrows() != n || mat.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: mat.nrows().max(mat.ncols()),
            });
        }
        let herm_err = hermitian_defect(&mat);
        if herm_err > HERMITIAN_TOL {
            return domain(format!("operator is not Hermitian (defect {herm_err:e})"));
        }
        let trace_norm = mat.trace().re;
        if !(-HERMITIAN_TOL..=1.0 + HERMITIAN_TOL).contains(&trace_norm) {
            return domain(format!("trace {trace_norm} outside [0, 1]"));
        }
        Ok(Self {
            dims,
            mat,
            trace_norm: trace_norm.clamp(0.0, 1.0 + HERMITIAN_TOL),
        })
    }

    /// Diagonal operator from real weights on a single mode.
    pub fn diagonal(weights: &[f64]) -> Result<Self> {
        let dims = ModeDims::new(vec![weights.len()])?;
        let mat = CMatrix::from_fn(weights.len(), weights.len(), |i, j| {
            if i == j {
                C64::new(weights[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        Self::new(dims, mat)
    }

    pub(crate) fn from_parts(dims: ModeDims, mat: CMatrix) -> Self {
        let trace_norm = mat.trace().re;
        Self {
            dims,
            mat,
            trace_norm,
        }
    }

    pub fn dims(&self) -> &ModeDims {
        &self.dims
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn trace_norm(&self) -> f64 {
        self.trace_norm
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    pub fn element(&self, row: &[usize], col: &[usize]) -> Result<C64> {
        Ok(self.mat[(self.dims.index_of(row)?, self.dims.index_of(col)?)])
    }

    /// Real diagonal `<i|rho|i>` in flat index order.
    pub fn diagonal_probabilities(&self) -> Vec<f64> {
        (0..self.mat.nrows()).map(|i| self.mat[(i, i)].re).collect()
    }

    pub fn normalized(&self) -> Result<Self> {
        let t = self.trace();
        if t <= 0.0 {
            return domain("cannot normalize a zero-trace operator");
        }
        Ok(Self {
            dims: self.dims.clone(),
            mat: self.mat.map(|z| z / t),
            trace_norm: 1.0,
        })
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dims: self.dims.clone(),
            mat: self.mat.map(|z| z * factor),
            trace_norm: self.trace_norm * factor,
        }
    }

    pub fn tensor(&self, other: &DensityOperator) -> DensityOperator {
        DensityOperator {
            dims: self.dims.concat(&other.dims),
            mat: self.mat.kronecker(&other.mat),
            trace_norm: self.trace_norm * other.trace_norm,
        }
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.mat)
    }

    pub fn check_positive(&self, tol: f64) -> Result<()> {
        let min = self.eigenvalues().first().copied().unwrap_or(0.0);
        if min < -tol {
            return Err(Error::Integrity(format!("negative eigenvalue {min:e}")));
        }
        Ok(())
    }

    /// Reduced operator on `keep` (in the listed order); trace preserving.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityOperator> {
        if keep.is_empty() {
            return domain("partial trace needs a nonempty set of kept modes");
        }
        self.dims.check_modes(keep)?;
        let traced = self.dims.complement(keep);
        let off_k = self.dims.offsets(keep);
        let off_t = self.dims.offsets(&traced);
        let mat = CMatrix::from_fn(off_k.len(), off_k.len(), |i, j| {
            off_t
                .iter()
                .map(|&t| self.mat[(off_k[i] + t, off_k[j] + t)])
                .sum()
        });
        Ok(DensityOperator {
            dims: self.dims.select(keep),
            mat,
            trace_norm: self.trace_norm,
        })
    }

    /// `(U ⊗ I) rho (U ⊗ I)†` with `U` acting on the listed modes.
    pub fn conjugate_local(&self, op: &CMatrix, modes: &[usize]) -> Result<DensityOperator> {
        let left = apply_local_cols(&self.dims, op, modes, &self.mat)?;
        let both = apply_local_cols(&self.dims, op, modes, &left.adjoint())?.adjoint();
        Ok(DensityOperator::from_parts(self.dims.clone(), both))
    }

    /// Returns the subnormalized post-measurement operator `(Π ⊗ I) rho (Π ⊗ I)†`
    /// and its trace (the outcome probability).
    pub fn apply_measurement(&self, op: &CMatrix, modes: &[usize]) -> Result<(DensityOperator, f64)> {
        let out = self.conjugate_local(op, modes)?;
        let p = out.trace();
        Ok((out, p))
    }

    /// `Tr[(E ⊗ I) rho]` for a (not necessarily rank-one) effect `E`.
    pub fn expectation_local(&self, effect: &CMatrix, modes: &[usize]) -> Result<f64> {
        let applied = apply_local_cols(&self.dims, effect, modes, &self.mat)?;
        Ok(applied.trace().re)
    }

    /// Half the trace norm of the difference.
    pub fn trace_distance(&self, other: &DensityOperator) -> Result<f64> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch {
                expected: self.dims.total(),
                found: other.dims.total(),
            });
        }
        let diff = &self.mat - &other.mat;
        Ok(0.5 * hermitian_eigenvalues(&diff).iter().map(|l| l.abs()).sum::<f64>())
    }
}

pub(crate) fn hermitian_defect(mat: &CMatrix) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..mat.nrows() {
        for j in i..mat.ncols() {
            worst = worst.max((mat[(i, j)] - mat[(j, i)].conj()).norm());
        }
    }
    worst
}

fn local_layout(dims: &ModeDims, op: &CMatrix, modes: &[usize]) -> Result<(Vec<usize>, Vec<usize>)> {
    dims.check_modes(modes)?;
    let tdim = dims.select(modes).total();
    if op.nrows() != tdim || op.ncols() != tdim {
        return Err(Error::DimensionMismatch {
            expected: tdim,
            found: op.nrows(),
        });
    }
    let rest = dims.complement(modes);
    Ok((dims.offsets(modes), dims.offsets(&rest)))
}

fn apply_local_vec(dims: &ModeDims, op: &CMatrix, modes: &[usize], v: &[C64]) -> Result<Vec<C64>> {
    let (off_t, off_r) = local_layout(dims, op, modes)?;
    let mut out = vec![C64::new(0.0, 0.0); v.len()];
    let mut gathered = vec![C64::new(0.0, 0.0); off_t.len()];
    for &base in &off_r {
        for (g, &o) in gathered.iter_mut().zip(&off_t) {
            *g = v[base + o];
        }
        if gathered.iter().all(|g| g.norm_sqr() == 0.0) {
            continue;
        }
        for (to, &o) in off_t.iter().enumerate() {
            out[base + o] = (0..off_t.len()).map(|ti| op[(to, ti)] * gathered[ti]).sum();
        }
    }
    Ok(out)
}

/// `(op ⊗ I) * mat`, i.e. the local operator applied to every column.
fn apply_local_cols(dims: &ModeDims, op: &CMatrix, modes: &[usize], mat: &CMatrix) -> Result<CMatrix> {
    let mut out = CMatrix::zeros(mat.nrows(), mat.ncols());
    for (j, col) in mat.column_iter().enumerate() {
        let v: Vec<C64> = col.iter().copied().collect();
        let w = apply_local_vec(dims, op, modes, &v)?;
        out.set_column(j, &nalgebra::DVector::from_vec(w));
    }
    Ok(out)
}
