//! Property tests for metrics, bound formulas and fluctuation terms.

use std::collections::BTreeMap;

use proptest::prelude::*;
use symrec::bounds::{bound_terms, ek17, evaluate_formula, imbalance, imbalance_operator, AChoice, BoundKind, FluctuationStrategy};
use symrec::channel::{Instance, B_OUT};
use symrec::instances::{random_conserving_instance, random_small_instance, QubitShape, StateKind};
use symrec::linalg::{haar_unitary, kron, random_density, random_hermitian, rng_from_seed, CMat, CVec};
use symrec::metrics::{fidelity, purified_distance, qfi, variance};
use symrec::recovery::{final_b_out, implementation_error, optimize_recovery, RecoveryMode, SeesawOptions};

fn inputs(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn state_pair(seed: u64, d: usize) -> (CMat, CMat, CMat) {
    let mut rng = rng_from_seed(seed);
    let r1 = 1 + (seed as usize) % d;
    let rho = random_density(&mut rng, d, r1);
    let sigma = random_density(&mut rng, d, d);
    let tau = random_density(&mut rng, d, 1 + (seed as usize / 3) % d);
    (rho, sigma, tau)
}

/// Apply a unitary on the reference factor of a `system ⊗ reference` vector.
fn rotate_reference(v: &CVec, sys: usize, w: &CMat) -> CVec {
    kron(&CMat::identity(sys, sys), w) * v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn siq_forms_weaken_as_fluctuations_grow(a in 0.0..2.0f64, f in 0.0..5.0f64, extra in 0.0..5.0f64, dp in 0.01..2.0f64) {
        for kind in [BoundKind::Siq1, BoundKind::Siq1Prime, BoundKind::Rsiq1] {
            let lo = evaluate_formula(kind, &inputs(&[("a", a), ("a2", a), ("f", f), ("f_b", f), ("delta_plus", dp)])).unwrap();
            let hi = evaluate_formula(kind, &inputs(&[("a", a), ("a2", a), ("f", f + extra), ("f_b", f + extra), ("delta_plus", dp)])).unwrap();
            prop_assert!(hi <= lo + 1e-15);
        }
    }

    #[test]
    fn ek17_grows_with_logical_spread_and_shrinks_with_n(dxl in 0.0..4.0f64, dmax in 0.1..4.0f64, n in 1.0..50.0f64, step in 0.0..3.0f64) {
        prop_assert!(ek17(dxl + step, dmax, n) >= ek17(dxl, dmax, n) - 1e-15);
        prop_assert!(ek17(dxl, dmax, n + step) <= ek17(dxl, dmax, n) + 1e-15);
        prop_assert!(ek17(dxl, dmax, n) < 1.0);
    }

    #[test]
    fn fidelity_is_symmetric_and_bounded(seed in 0u64..10_000, d in 2usize..5) {
        let (rho, sigma, _) = state_pair(seed, d);
        let f1 = fidelity(&rho, &sigma).unwrap();
        let f2 = fidelity(&sigma, &rho).unwrap();
        prop_assert!((0.0..=1.0).contains(&f1));
        prop_assert!((f1 - f2).abs() < 1e-8);
        prop_assert!((fidelity(&rho, &rho).unwrap() - 1.0).abs() < 1e-7);
    }

    #[test]
    fn purified_distance_obeys_triangle_inequality(seed in 0u64..10_000, d in 2usize..4) {
        let (rho, sigma, tau) = state_pair(seed, d);
        let ab = purified_distance(&rho, &sigma).unwrap();
        let bc = purified_distance(&sigma, &tau).unwrap();
        let ac = purified_distance(&rho, &tau).unwrap();
        prop_assert!(ac <= ab + bc + 1e-7);
    }

    #[test]
    fn qfi_is_unitarily_invariant_and_below_four_variances(seed in 0u64..10_000, d in 2usize..5) {
        let mut rng = rng_from_seed(seed);
        let rho = random_density(&mut rng, d, 1 + seed as usize % d);
        let x = random_hermitian(&mut rng, d);
        let u = haar_unitary(&mut rng, d);
        let f = qfi(&rho, &x).unwrap();
        let g = qfi(&(&u * &rho * u.adjoint()), &(&u * &x * u.adjoint())).unwrap();
        prop_assert!((f - g).abs() < 1e-7 * (1.0 + f));
        prop_assert!(f <= 4.0 * variance(&rho, &x) + 1e-9);
        prop_assert!(f >= -1e-12);
    }

    #[test]
    fn qfi_is_convex(seed in 0u64..10_000, d in 2usize..4, p in 0.0..1.0f64) {
        let mut rng = rng_from_seed(seed);
        let r1 = random_density(&mut rng, d, d);
        let r2 = random_density(&mut rng, d, d);
        let x = random_hermitian(&mut rng, d);
        let mix = r1.scale(p) + r2.scale(1.0 - p);
        let lhs = qfi(&mix, &x).unwrap();
        let rhs = p * qfi(&r1, &x).unwrap() + (1.0 - p) * qfi(&r2, &x).unwrap();
        prop_assert!(lhs <= rhs + 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fluctuation_orderings(seed in 0u64..100_000) {
        let inst = random_small_instance(seed).unwrap();
        let fl = bound_terms(&inst, FluctuationStrategy::Exact).unwrap().fluctuation;
        prop_assert!(fl.a_single <= fl.a_sum + 1e-12);
        prop_assert!(fl.a_two <= fl.a_sum + 1e-9, "a2 {} > a_sum {}", fl.a_two, fl.a_sum);
        if let Some(up) = fl.a_two_upper {
            prop_assert!(fl.a_two <= up + 1e-9);
        }
        let g = imbalance_operator(&inst, inst.charge()).unwrap();
        for (_, rho_j) in fl.witness.iter().chain(fl.two_term_witness.iter()) {
            prop_assert!(imbalance(&g, rho_j).abs() <= fl.delta_max + 1e-9);
        }
    }

    #[test]
    fn pairwise_form_is_at_most_twice_the_summed_form(seed in 0u64..100_000) {
        let inst = random_small_instance(seed).unwrap();
        let terms = bound_terms(&inst, FluctuationStrategy::Exact).unwrap().with_a_choice(AChoice::Sum);
        let r = terms.lhs(BoundKind::Rsiq1).unwrap();
        let s = terms.lhs(BoundKind::Siq1).unwrap();
        prop_assert!(r <= 2.0 * s + 1e-9, "{r} > 2·{s}");
    }

    #[test]
    fn final_b_variance_is_independent_of_the_purification(seed in 0u64..100_000) {
        let inst = random_small_instance(seed).unwrap();
        let mut rng = rng_from_seed(seed ^ 0xabcd);
        let wa = haar_unitary(&mut rng, inst.dims.ra);
        let wb = haar_unitary(&mut rng, inst.dims.rb);
        let other = Instance {
            psi: rotate_reference(&inst.psi, inst.dims.a, &wa),
            phi: rotate_reference(&inst.phi, inst.dims.b, &wb),
            ..inst.clone()
        };
        let direct = final_b_out(&inst).unwrap();
        let via_state = other.scramble().unwrap().reduced(&[B_OUT]).unwrap();
        let x = &inst.charge().x_b_out;
        let f1 = 4.0 * variance(&direct, x);
        let f2 = 4.0 * variance(&via_state, x);
        prop_assert!((f1 - f2).abs() < 1e-9);
        prop_assert!((bound_terms(&inst, FluctuationStrategy::Exact).unwrap().f_f - f1).abs() < 1e-9);
    }
}

#[test]
fn reference_free_bound_is_below_the_implementation_error() {
    let opts = SeesawOptions::default();
    for seed in 0..12u64 {
        let qa = 1 + (seed % 2) as usize;
        let shape = QubitShape { qa, qb: 1 + (seed / 2 % 2) as usize, l: qa };
        let inst = random_conserving_instance(300 + seed, shape, StateKind::Random).unwrap();
        let terms = bound_terms(&inst, FluctuationStrategy::Exact).unwrap();
        let lhs = terms.lhs(BoundKind::Siq1Prime).unwrap();
        let e = inst.channel_e().unwrap();
        let imp = implementation_error(&e, &CMat::identity(inst.dims.a, inst.dims.a), &[inst.psi_matrix()], seed).unwrap();
        let delta_tilde = optimize_recovery(&inst, RecoveryMode::WithoutRb, &opts).unwrap().achieved_error;
        assert!(lhs <= delta_tilde + 1e-6, "seed {seed}: {lhs} > δ̃ {delta_tilde}");
        assert!(lhs <= imp.estimate + 1e-6, "seed {seed}: {lhs} > {}", imp.estimate);
    }
}
