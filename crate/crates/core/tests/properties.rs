//! Property tests for structural invariants of the simulator.

use approx::assert_abs_diff_eq;
use pnqkd::classical::{classical_charlie_prob, classical_objective, ClassicalClamp, ClassicalModel};
use pnqkd::fock::{CMatrix, DensityOperator, FockVector, ModeDims, C64};
use pnqkd::measurements::charlie_povm;
use pnqkd::noisy::{realistic_key_rate, EveAttribution};
use pnqkd::optics::{beamsplitter_unitary, lossy_channel_kraus, lossy_channel_purified, ChannelParams, DetectorParams};
use pnqkd::optimize::{optimize_coefficients, softmax_coefficients, ObjectiveKind, OptimizerConfig};
use pnqkd::protocol::{conditional_state, holevo_eve, key_rate, Outcome, SwapSetup};
use pnqkd::states::{key_state, CoefficientVector};
use pnqkd::tomography::{exact_record, reconstruct_state};
use proptest::prelude::*;

fn coeffs(n_max: usize) -> impl Strategy<Value = CoefficientVector> {
    prop::collection::vec(0.05f64..1.0, n_max + 1).prop_map(|w| CoefficientVector::normalized(w).unwrap())
}

fn complex_vec(len: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), len)
        .prop_filter("nonzero", |v| v.iter().map(|(a, b)| a * a + b * b).sum::<f64>() > 1e-3)
        .prop_map(|v| v.into_iter().map(|(a, b)| C64::new(a, b)).collect())
}

fn pure_state(dims: Vec<usize>) -> impl Strategy<Value = FockVector> {
    let total = dims.iter().product();
    complex_vec(total).prop_map(move |amp| {
        FockVector::from_amplitudes(ModeDims::new(dims.clone()).unwrap(), amp)
            .unwrap()
            .normalized()
            .unwrap()
    })
}

/// Mixture of two random pure states.
fn mixed_state(dims: Vec<usize>) -> impl Strategy<Value = DensityOperator> {
    (pure_state(dims.clone()), pure_state(dims), 0.0f64..=1.0).prop_map(|(x, y, w)| {
        let m = x.to_density().matrix() * C64::new(w, 0.0) + y.to_density().matrix() * C64::new(1.0 - w, 0.0);
        DensityOperator::new(x.dims().clone(), m).unwrap()
    })
}

/// Exchanges the two modes of a bipartite operator with equal local dimensions.
fn mode_swap(rho: &DensityOperator) -> DensityOperator {
    let d = rho.dims().dim(0);
    let flip = |i: usize| (i % d) * d + i / d;
    let m = CMatrix::from_fn(d * d, d * d, |r, c| rho.matrix()[(flip(r), flip(c))]);
    DensityOperator::new(rho.dims().clone(), m).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn partial_traces_preserve_trace_and_positivity(psi in pure_state(vec![2, 3, 2])) {
        let rho = psi.to_density();
        for keep in [vec![0], vec![1], vec![0, 2], vec![1, 2]] {
            let r = rho.partial_trace(&keep).unwrap();
            assert_abs_diff_eq!(r.trace(), 1.0, epsilon = 1e-12);
            prop_assert!(r.check_positive(1e-12).is_ok());
            let direct = psi.reduced_density(&keep).unwrap();
            prop_assert!(r.trace_distance(&direct).unwrap() < 1e-12);
        }
    }

    #[test]
    fn tensor_then_trace_recovers_factors(x in pure_state(vec![3]), y in pure_state(vec![2])) {
        let joint = x.to_density().tensor(&y.to_density());
        prop_assert!(joint.partial_trace(&[0]).unwrap().trace_distance(&x.to_density()).unwrap() < 1e-12);
        prop_assert!(joint.partial_trace(&[1]).unwrap().trace_distance(&y.to_density()).unwrap() < 1e-12);
    }

    #[test]
    fn loss_channels_compose(rho in mixed_state(vec![3, 3]), t1 in 0.0f64..=1.0, t2 in 0.0f64..=1.0) {
        let twice = lossy_channel_kraus(&lossy_channel_kraus(&rho, t1, 1).unwrap(), t2, 1).unwrap();
        let once = lossy_channel_kraus(&rho, t1 * t2, 1).unwrap();
        prop_assert!(twice.trace_distance(&once).unwrap() < 1e-10);
        assert_abs_diff_eq!(once.trace(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn purified_loss_matches_kraus(psi in pure_state(vec![3, 3]), tau in 0.0f64..=1.0) {
        let purified = lossy_channel_purified(&psi, tau, 1).unwrap().reduced_density(&[0, 1]).unwrap();
        let kraus = lossy_channel_kraus(&psi.to_density(), tau, 1).unwrap();
        prop_assert!(purified.trace_distance(&kraus).unwrap() < 1e-10);
    }

    #[test]
    fn beamsplitter_is_unitary_and_number_conserving(tau in 0.0f64..=1.0, da in 1usize..5, db in 1usize..5) {
        let u = beamsplitter_unitary(tau, da, db).unwrap();
        let defect = (u.adjoint() * &u - CMatrix::identity(da * db, da * db)).norm();
        prop_assert!(defect < 1e-10);
        for row in 0..da * db {
            for col in 0..da * db {
                let (n_in, n_out) = (col / db + col % db, row / db + row % db);
                if n_in != n_out {
                    prop_assert!(u[(row, col)].norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn outcome_statistics_are_j_independent(a in coeffs(2), b in coeffs(2), ta in 0.0f64..=1.0, tb in 0.0f64..=1.0) {
        let setup = SwapSetup::new(&a, &b, &ChannelParams::from_links(ta, tb).unwrap()).unwrap();
        let povm = charlie_povm(2).unwrap();
        for c in 0..=4 {
            let (rho0, p0) = setup.conditional_unnormalized(c, 0).unwrap();
            for j in 1..povm.multiplicity(c) {
                let (rho, p) = setup.conditional_unnormalized(c, j).unwrap();
                assert_abs_diff_eq!(p, p0, epsilon = 1e-12);
                if p0 > 1e-12 {
                    // Different j differ by a local phase, so spectra agree.
                    let (e0, e) = (rho0.normalized().unwrap().eigenvalues(), rho.normalized().unwrap().eigenvalues());
                    for (x, y) in e0.iter().zip(&e) {
                        assert_abs_diff_eq!(x, y, epsilon = 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn swapping_senders_mirrors_the_conditional_states(a in coeffs(2), b in coeffs(2), d in 0.0f64..150.0) {
        // With equal links the mirrored setup yields SWAP ρ SWAP, so Eve's
        // term becomes the Alice-side Holevo quantity of the original state.
        let ch = ChannelParams::from_distance(d).unwrap();
        let ab = key_rate(&a, &b, &ch).unwrap();
        let ba = key_rate(&b, &a, &ch).unwrap();
        assert_abs_diff_eq!(ab.probability_sum(), 1.0, epsilon = 1e-9);
        prop_assert!(ab.total_key_rate >= 0.0);
        for (c, (x, y)) in ab.rows.iter().zip(&ba.rows).enumerate() {
            assert_abs_diff_eq!(x.probability, y.probability, epsilon = 1e-12);
            assert_abs_diff_eq!(x.i_ab, y.i_ab, epsilon = 1e-9);
            if let Some(rho) = conditional_state(&a, &b, &ch, c).unwrap().state {
                assert_abs_diff_eq!(holevo_eve(&mode_swap(&rho)).unwrap(), y.i_e, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn classical_outcome_law_matches_quantum(a in coeffs(3), b in coeffs(3), ta in 0.0f64..=1.0, tb in 0.0f64..=1.0) {
        let classical = classical_charlie_prob(&ClassicalModel::asymmetric(a.clone(), b.clone(), ta, tb).unwrap()).unwrap();
        let quantum = key_rate(&a, &b, &ChannelParams::from_links(ta, tb).unwrap()).unwrap();
        for (c, p) in classical.iter().enumerate() {
            let q = quantum.row(Outcome::Total(c)).map_or(0.0, |r| r.probability);
            assert_abs_diff_eq!(*p, q, epsilon = 1e-10);
        }
    }

    #[test]
    fn tomography_round_trips(rho in mixed_state(vec![2, 2])) {
        let rec = reconstruct_state(&exact_record(&rho).unwrap()).unwrap();
        prop_assert!(rec.state.trace_distance(&rho).unwrap() < 1e-10);
    }

    #[test]
    fn softmax_stays_on_the_simplex(z in prop::collection::vec(-50.0f64..50.0, 1..8)) {
        let c = softmax_coefficients(&z);
        prop_assert_eq!(c.dim(), z.len() + 1);
        prop_assert!(c.as_slice().iter().all(|x| *x >= 0.0));
        assert_abs_diff_eq!(c.as_slice().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn optimum_is_a_local_maximum(d in 0.0f64..200.0, dir in prop::collection::vec(-1.0f64..1.0, 3)) {
        let ch = ChannelParams::from_distance(d).unwrap();
        let cfg = OptimizerConfig { restarts: 2, ..OptimizerConfig::default() };
        let r = optimize_coefficients(2, &ch, None, None, &cfg).unwrap();
        let model = |c: &CoefficientVector| classical_objective(&ClassicalModel::from_channel(c.clone(), c.clone(), &ch).unwrap(), ClassicalClamp::PerOutcome);
        let best = model(&r.coefficients);
        assert_abs_diff_eq!(best, r.objective, epsilon = 1e-12);
        let moved: Vec<f64> = r.coefficients.as_slice().iter().zip(&dir).map(|(a, e)| (a + 1e-3 * e).max(0.0)).collect();
        let nearby = CoefficientVector::normalized(moved).unwrap();
        prop_assert!(model(&nearby) <= best + 1e-9);
    }

    #[test]
    fn dark_counts_never_help(d in 0.0f64..300.0, a0 in 0.5f64..0.95, dark in 1e-8f64..1e-3) {
        let a = CoefficientVector::new(vec![a0, 1.0 - a0]).unwrap();
        let ch = ChannelParams::from_distance(d).unwrap();
        let rate = |p: f64| {
            let det = DetectorParams::new(0.85, p).unwrap().with_thermal_cutoff(8).unwrap();
            realistic_key_rate(&a, &a, &ch, &det, EveAttribution::FullPurification).unwrap().total_key_rate
        };
        prop_assert!(rate(10.0 * dark) <= rate(dark) + 1e-12);
    }
}

#[test]
fn quantum_objective_is_default_for_single_photon() {
    assert_eq!(ObjectiveKind::default_for(1), ObjectiveKind::Quantum);
    let state = key_state(&CoefficientVector::uniform(2));
    assert_abs_diff_eq!(state.norm_sqr(), 1.0, epsilon = 1e-12);
}
