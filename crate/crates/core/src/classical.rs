//! Classical photon-counting surrogate of the protocol, used as the
//! optimization objective for multi-photon encodings.
//!
//! Each sent photon independently survives its link with probability `τ`; the
//! lost photons are Eve's. Charlie announces the total number of arrivals.

use crate::entropy::ProbTable;
use crate::error::{domain, Error, Result};
use crate::optics::ChannelParams;
use crate::states::CoefficientVector;

/// Conditional tables are not formed for outcomes rarer than this.
const MIN_CLASSICAL_PROB: f64 = 1e-15;

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `P(k of n survive)` for survival probability `tau`.
fn thinning(n: usize, k: usize, tau: f64) -> f64 {
    binomial(n, k) * tau.powi(k as i32) * (1.0 - tau).powi((n - k) as i32)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalModel {
    pub p_a: CoefficientVector,
    pub p_b: CoefficientVector,
    pub tau_a: f64,
    pub tau_b: f64,
}

impl ClassicalModel {
    /// Symmetric model with per-link transmissivity `tau_link`.
    pub fn new(p_a: CoefficientVector, p_b: CoefficientVector, tau_link: f64) -> Result<Self> {
        Self::asymmetric(p_a, p_b, tau_link, tau_link)
    }

    pub fn asymmetric(p_a: CoefficientVector, p_b: CoefficientVector, tau_a: f64, tau_b: f64) -> Result<Self> {
        if p_a.dim() != p_b.dim() {
            return Err(Error::DimensionMismatch {
                expected: p_a.dim(),
                found: p_b.dim(),
            });
        }
        for t in [tau_a, tau_b] {
            if !(0.0..=1.0).contains(&t) {
                return domain(format!("transmissivity {t} outside [0, 1]"));
            }
        }
        Ok(Self { p_a, p_b, tau_a, tau_b })
    }

    pub fn from_channel(p_a: CoefficientVector, p_b: CoefficientVector, channel: &ChannelParams) -> Result<Self> {
        Self::asymmetric(p_a, p_b, channel.tau_a, channel.tau_b)
    }

    pub fn n_max(&self) -> usize {
        self.p_a.n_max()
    }

    /// `m⁴` weights `P(n_a, n_b, e_a, e_b, n_c)` for fixed `n_c`, unnormalized,
    /// laid out `[n_a][n_b][e_a][e_b]`.
    fn joint_weights(&self, n_c: usize) -> Vec<f64> {
        let m = self.p_a.dim();
        let (pa, pb) = (self.p_a.as_slice(), self.p_b.as_slice());
        let mut w = vec![0.0; m * m * m * m];
        for na in 0..m {
            for nb in 0..m {
                let weight = pa[na] * pb[nb];
                if weight == 0.0 || na + nb < n_c {
                    continue;
                }
                for ea in 0..=na {
                    let ca = na - ea;
                    if ca > n_c {
                        continue;
                    }
                    let cb = n_c - ca;
                    if cb > nb {
                        continue;
                    }
                    let eb = nb - cb;
                    w[((na * m + nb) * m + ea) * m + eb] =
                        weight * thinning(na, ca, self.tau_a) * thinning(nb, cb, self.tau_b);
                }
            }
        }
        w
    }

    fn conditional_weights(&self, n_c: usize) -> Result<(Vec<f64>, f64)> {
        if n_c > 2 * self.n_max() {
            return domain(format!("n_c = {n_c} exceeds 2 n_max"));
        }
        let w = self.joint_weights(n_c);
        let p: f64 = w.iter().sum();
        if p < MIN_CLASSICAL_PROB {
            return domain(format!("outcome n_c = {n_c} has zero probability"));
        }
        Ok((w.into_iter().map(|x| x / p).collect(), p))
    }
}

/// Distribution of photons reaching Charlie from one sender.
pub fn classical_arrival_prob(p_n: &CoefficientVector, tau_link: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&tau_link) {
        return domain(format!("transmissivity {tau_link} outside [0, 1]"));
    }
    let p = p_n.as_slice();
    Ok((0..p.len())
        .map(|k| (k..p.len()).map(|n| thinning(n, k, tau_link) * p[n]).sum())
        .collect())
}

/// Distribution of Charlie's total count `n_c ∈ 0..=2 n_max`.
pub fn classical_charlie_prob(model: &ClassicalModel) -> Result<Vec<f64>> {
    let ca = classical_arrival_prob(&model.p_a, model.tau_a)?;
    let cb = classical_arrival_prob(&model.p_b, model.tau_b)?;
    let mut out = vec![0.0; ca.len() + cb.len() - 1];
    for (i, x) in ca.iter().enumerate() {
        for (j, y) in cb.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    Ok(out)
}

/// `P(n_a, n_b | n_c)`.
pub fn classical_ab_table(model: &ClassicalModel, n_c: usize) -> Result<ProbTable> {
    let m = model.p_a.dim();
    let (w, _) = model.conditional_weights(n_c)?;
    let p = w.chunks(m * m).map(|block| block.iter().sum()).collect();
    ProbTable::new(vec![("a".into(), m), ("b".into(), m)], p)
}

/// `P(n_a, n_b, n_ea, n_eb | n_c)`.
pub fn classical_abe_table(model: &ClassicalModel, n_c: usize) -> Result<ProbTable> {
    let m = model.p_a.dim();
    let (w, _) = model.conditional_weights(n_c)?;
    ProbTable::new(
        vec![("a".into(), m), ("b".into(), m), ("ea".into(), m), ("eb".into(), m)],
        w,
    )
}

/// Whether each outcome's information advantage is clamped at zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ClassicalClamp {
    /// `Σ P_c max(0, I_AB − I_AE)`.
    #[default]
    PerOutcome,
    /// `Σ P_c (I_AB − I_AE)`.
    None,
}

fn entropy_of(weights: impl Iterator<Item = f64>) -> f64 {
    weights.filter(|&p| p > 0.0).map(|p| -p * p.log2()).sum()
}

/// Per-outcome `(n_c, P_c, I_AB|c, I_AE|c)`, skipping impossible outcomes.
pub fn classical_breakdown(model: &ClassicalModel) -> Vec<(usize, f64, f64, f64)> {
    let m = model.p_a.dim();
    let mut rows = Vec::new();
    for n_c in 0..=2 * model.n_max() {
        let Ok((w, p)) = model.conditional_weights(n_c) else {
            continue;
        };
        let idx = |na: usize, nb: usize, ea: usize, eb: usize| ((na * m + nb) * m + ea) * m + eb;
        let mut p_a = vec![0.0; m];
        let mut p_b = vec![0.0; m];
        let mut p_ab = vec![0.0; m * m];
        let mut p_e = vec![0.0; m * m];
        let mut p_ae = vec![0.0; m * m * m];
        for na in 0..m {
            for nb in 0..m {
                for ea in 0..m {
                    for eb in 0..m {
                        let x = w[idx(na, nb, ea, eb)];
                        if x == 0.0 {
                            continue;
                        }
                        p_a[na] += x;
                        p_b[nb] += x;
                        p_ab[na * m + nb] += x;
                        p_e[ea * m + eb] += x;
                        p_ae[(na * m + ea) * m + eb] += x;
                    }
                }
            }
        }
        let h_a = entropy_of(p_a.into_iter());
        let i_ab = h_a + entropy_of(p_b.into_iter()) - entropy_of(p_ab.into_iter());
        let i_ae = h_a + entropy_of(p_e.into_iter()) - entropy_of(p_ae.into_iter());
        rows.push((n_c, p, i_ab, i_ae));
    }
    rows
}

/// Average information advantage of Alice–Bob over Alice–Eve.
pub fn classical_objective(model: &ClassicalModel, clamp: ClassicalClamp) -> f64 {
    classical_breakdown(model)
        .into_iter()
        .map(|(_, p, i_ab, i_ae)| match clamp {
            ClassicalClamp::PerOutcome => p * (i_ab - i_ae).max(0.0),
            ClassicalClamp::None => p * (i_ab - i_ae),
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cv(w: &[f64]) -> CoefficientVector {
        CoefficientVector::new(w.to_vec()).unwrap()
    }

    #[test]
    fn arrival_examples() {
        let p = cv(&[0.5, 0.5]);
        assert_eq!(classical_arrival_prob(&p, 1.0).unwrap(), vec![0.5, 0.5]);
        let thin = classical_arrival_prob(&p, 0.6).unwrap();
        assert_abs_diff_eq!(thin[0], 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(thin[1], 0.3, epsilon = 1e-15);
        let lost = classical_arrival_prob(&cv(&[0.2, 0.3, 0.5]), 0.0).unwrap();
        assert_eq!(lost, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn charlie_examples() {
        let one = cv(&[0.0, 1.0]);
        let m = ClassicalModel::new(one.clone(), one.clone(), 1.0).unwrap();
        assert_eq!(classical_charlie_prob(&m).unwrap(), vec![0.0, 0.0, 1.0]);
        let m = ClassicalModel::new(one.clone(), one, 0.0).unwrap();
        assert_eq!(classical_charlie_prob(&m).unwrap()[0], 1.0);
    }

    #[test]
    fn ab_table_hand_values() {
        // weights ∝ C(n_a + n_b, 1) 0.5^{n_a + n_b} / 4 over pairs that can leave one photon
        let u = cv(&[0.5, 0.5]);
        let m = ClassicalModel::new(u.clone(), u, 0.5).unwrap();
        let t = classical_ab_table(&m, 1).unwrap();
        let raw = [0.0, 0.5 / 4.0, 0.5 / 4.0, 2.0 * 0.25 / 4.0];
        let total: f64 = raw.iter().sum();
        for (got, want) in t.values().iter().zip(raw) {
            assert_abs_diff_eq!(*got, want / total, epsilon = 1e-15);
        }
        assert!(t.is_normalized());
    }

    #[test]
    fn abe_marginal_and_support() {
        let a = cv(&[0.5, 0.3, 0.2]);
        let b = cv(&[0.1, 0.6, 0.3]);
        let m = ClassicalModel::asymmetric(a, b, 0.7, 0.4).unwrap();
        for n_c in 0..=4 {
            let abe = classical_abe_table(&m, n_c).unwrap();
            let ab = classical_ab_table(&m, n_c).unwrap();
            let marg = abe.marginal(&[0, 1]).unwrap();
            for (x, y) in marg.values().iter().zip(ab.values()) {
                assert_abs_diff_eq!(x, y, epsilon = 1e-12);
            }
        }
        let u = cv(&[0.5, 0.5]);
        let lost = ClassicalModel::new(u.clone(), u, 0.5).unwrap();
        let t = classical_abe_table(&lost, 0).unwrap();
        for na in 0..2 {
            for nb in 0..2 {
                for ea in 0..2 {
                    for eb in 0..2 {
                        if ea != na || eb != nb {
                            assert_eq!(t.get(&[na, nb, ea, eb]), 0.0);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn objective_limits() {
        let a = cv(&[0.4, 0.35, 0.25]);
        let perfect = ClassicalModel::new(a.clone(), a.clone(), 1.0).unwrap();
        let direct: f64 = classical_breakdown(&perfect).iter().map(|(_, p, i_ab, _)| p * i_ab).sum();
        for (_, _, _, i_ae) in classical_breakdown(&perfect) {
            assert_abs_diff_eq!(i_ae, 0.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(classical_objective(&perfect, ClassicalClamp::None), direct, epsilon = 1e-12);
        let dark = ClassicalModel::new(a.clone(), a, 0.0).unwrap();
        assert!(classical_objective(&dark, ClassicalClamp::None) <= 1e-12);
    }

    #[test]
    fn table_three_beats_uniform() {
        let t = 0.1;
        let opt = cv(&[0.8483, 0.1517]);
        let uni = cv(&[0.5, 0.5]);
        for clamp in [ClassicalClamp::PerOutcome, ClassicalClamp::None] {
            let o = classical_objective(&ClassicalModel::new(opt.clone(), opt.clone(), t).unwrap(), clamp);
            let u = classical_objective(&ClassicalModel::new(uni.clone(), uni.clone(), t).unwrap(), clamp);
            assert!(o >= u);
        }
    }
}
