//! Shannon and von Neumann entropies (base 2) and labeled probability tables.

use crate::error::{domain, Error, Result};
use crate::fock::DensityOperator;

/// Eigenvalues below this are treated as exact zeros before taking logarithms.
pub const EIGENVALUE_CLAMP: f64 = 1e-12;

const NORMALIZATION_TOL: f64 = 1e-10;

/// Joint distribution over labeled discrete axes, stored row-major with the
/// first axis most significant.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbTable {
    axes: Vec<(String, usize)>,
    p: Vec<f64>,
}

impl ProbTable {
    pub fn new(axes: Vec<(String, usize)>, p: Vec<f64>) -> Result<Self> {
        let size: usize = axes.iter().map(|(_, n)| n).product();
        if size != p.len() {
            return Err(Error::DimensionMismatch {
                expected: size,
                found: p.len(),
            });
        }
        if let Some(bad) = p.iter().find(|&&x| x < 0.0 || !x.is_finite()) {
            return domain(format!("probability entry {bad} is not a nonnegative number"));
        }
        Ok(Self { axes, p })
    }

    /// Photon-number statistics `<n_0 n_1 ..|rho|n_0 n_1 ..>` of a density operator.
    /// Round-off negatives above `-1e-12` are clipped to zero.
    pub fn from_density_diagonal(rho: &DensityOperator, labels: &[&str]) -> Result<Self> {
        let dims = rho.dims().as_slice();
        if labels.len() != dims.len() {
            return Err(Error::DimensionMismatch {
                expected: dims.len(),
                found: labels.len(),
            });
        }
        let mut p = rho.diagonal_probabilities();
        for x in &mut p {
            if *x < 0.0 {
                if *x < -EIGENVALUE_CLAMP {
                    return Err(Error::Integrity(format!("negative diagonal entry {x:e}")));
                }
                *x = 0.0;
            }
        }
        let axes = labels.iter().zip(dims).map(|(l, &d)| (l.to_string(), d)).collect();
        Self::new(axes, p)
    }

    pub fn axes(&self) -> &[(String, usize)] {
        &self.axes
    }

    pub fn values(&self) -> &[f64] {
        &self.p
    }

    pub fn total(&self) -> f64 {
        self.p.iter().sum()
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        let mut flat = 0;
        for (&i, (_, n)) in index.iter().zip(&self.axes) {
            flat = flat * n + i;
        }
        self.p[flat]
    }

    pub fn normalized(&self) -> Result<Self> {
        let t = self.total();
        if t <= 0.0 {
            return domain("cannot normalize an all-zero table");
        }
        Ok(Self {
            axes: self.axes.clone(),
            p: self.p.iter().map(|x| x / t).collect(),
        })
    }

    pub fn is_normalized(&self) -> bool {
        (self.total() - 1.0).abs() <= NORMALIZATION_TOL
    }

    /// Marginal over the listed axes (in the listed order).
    pub fn marginal(&self, keep: &[usize]) -> Result<ProbTable> {
        for &k in keep {
            if k >= self.axes.len() {
                return domain(format!("axis {k} out of range"));
            }
        }
        let sizes: Vec<usize> = self.axes.iter().map(|(_, n)| *n).collect();
        let out_axes: Vec<(String, usize)> = keep.iter().map(|&k| self.axes[k].clone()).collect();
        let mut out = vec![0.0; out_axes.iter().map(|(_, n)| n).product()];
        let mut idx = vec![0usize; sizes.len()];
        for &v in &self.p {
            let mut flat = 0;
            for &k in keep {
                flat = flat * sizes[k] + idx[k];
            }
            out[flat] += v;
            for a in (0..sizes.len()).rev() {
                idx[a] += 1;
                if idx[a] < sizes[a] {
                    break;
                }
                idx[a] = 0;
            }
        }
        Ok(ProbTable { axes: out_axes, p: out })
    }

    pub fn entropy(&self) -> Result<f64> {
        shannon_entropy(&self.p)
    }

    /// `H(X) + H(Y) - H(XY)` between two groups of axes.
    pub fn mutual_information(&self, x: &[usize], y: &[usize]) -> Result<f64> {
        let joint: Vec<usize> = x.iter().chain(y).copied().collect();
        Ok(self.marginal(x)?.entropy()? + self.marginal(y)?.entropy()? - self.marginal(&joint)?.entropy()?)
    }
}

/// `-Σ p log2 p` with `0 log 0 = 0`.
pub fn shannon_entropy(p: &[f64]) -> Result<f64> {
    if let Some(bad) = p.iter().find(|&&x| x < 0.0 || !x.is_finite()) {
        return domain(format!("probability entry {bad} is not a nonnegative number"));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::NotNormalized(total));
    }
    Ok(p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.log2()).sum())
}

/// `-Σ λ log2 λ` over the spectrum of a normalized operator.
pub fn von_neumann_entropy(rho: &DensityOperator) -> Result<f64> {
    let t = rho.trace();
    if (t - 1.0).abs() > NORMALIZATION_TOL || (rho.trace_norm() - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::NotNormalized(t));
    }
    let spectrum = rho.eigenvalues();
    if spectrum.iter().any(|l| !l.is_finite()) {
        return Err(Error::Integrity("eigen-decomposition returned a non-finite eigenvalue".into()));
    }
    Ok(spectrum_entropy(&spectrum))
}

pub(crate) fn spectrum_entropy(eigenvalues: &[f64]) -> f64 {
    eigenvalues
        .iter()
        .filter(|&&l| l > EIGENVALUE_CLAMP)
        .map(|&l| -l * l.log2())
        .sum()
}
