//! Property tests for structural invariants: quantities that must hold for
//! every valid input, fuzzed over randomized models and matrices.

use proptest::prelude::*;

use qmq_core::analytics::{modified_bessel_i0, modified_bessel_i1, normal_cdf};
use qmq_core::engine::{
    aggregate_operations, evolve_count_resolved, step_operators, InferenceRule, Outcome,
};
use qmq_core::linalg::{
    c64, hermitian_propagator, unvectorize, vectorize, ComplexMatrix, DensityMatrix,
};
use qmq_core::metrics::{leakage, spin_leakage_projector};
use qmq_core::models::{
    build_charge_total_hamiltonian, build_spin_total_hamiltonian, calibrate_timestep, spin_basis,
    ChargeQubitParams, SpinQubitParams,
};
use qmq_core::sweetspot::{decompose_delta, sweet_spot_directions, FieldConfig, GTensorPair};

fn hermitian_from(entries: &[f64], dim: usize) -> ComplexMatrix {
    let raw = ComplexMatrix::from_fn(dim, dim, |r, c| {
        let base = 2 * (r * dim + c);
        c64(entries[base], entries[base + 1])
    });
    raw.add(&raw.dagger()).scale(c64(0.5, 0.0))
}

fn charge_params(epsilon: f64, t: f64, gamma: f64, dg_frac: f64) -> ChargeQubitParams {
    ChargeQubitParams {
        epsilon,
        t,
        gamma,
        delta_gamma: dg_frac * gamma,
    }
}

proptest! {
    #[test]
    fn vectorization_round_trips(entries in proptest::collection::vec(-5.0f64..5.0, 2 * 6 * 6),
                                 dim in 2usize..=6) {
        let m = ComplexMatrix::from_fn(dim, dim, |r, c| {
            let base = 2 * (r * 6 + c);
            c64(entries[base], entries[base + 1])
        });
        let back = unvectorize(&vectorize(&m)).unwrap();
        prop_assert!(m.max_abs_diff(&back) == 0.0);
    }

    #[test]
    fn propagators_are_unitary_and_compose(entries in proptest::collection::vec(-4.0f64..4.0, 2 * 4 * 4),
                                           a in 0.01f64..0.6, b in 0.01f64..0.6) {
        let h = hermitian_from(&entries, 4);
        let u_a = hermitian_propagator(&h, a).unwrap();
        let u_b = hermitian_propagator(&h, b).unwrap();
        let u_ab = hermitian_propagator(&h, a + b).unwrap();
        let identity = ComplexMatrix::identity(4);
        prop_assert!(u_a.dagger().matmul(&u_a).max_abs_diff(&identity) < 1e-12);
        prop_assert!(u_a.matmul(&u_b).max_abs_diff(&u_ab) < 1e-11);
    }

    #[test]
    fn count_channels_preserve_trace_and_probability(
        epsilon in 4.0f64..25.0,
        t in 0.0f64..4.0,
        gamma in 2.0f64..9.0,
        dg_frac in 0.05f64..0.7,
        n in 2usize..=12,
    ) {
        let params = charge_params(epsilon, t, gamma, dg_frac);
        let dt = calibrate_timestep(params.gamma, params.delta_gamma, 0.0).unwrap();
        let step = step_operators(&build_charge_total_hamiltonian(&params), dt).unwrap();
        let channels = evolve_count_resolved(&step, n).unwrap();
        prop_assert!(channels.trace_preservation_error() < 1e-10);
        let dist = channels.distribution(&DensityMatrix::maximally_mixed(2));
        prop_assert!(dist.iter().all(|&p| p >= -1e-14));
        let total: f64 = dist.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn inference_assignment_is_monotone_in_the_count(
        threshold in -1i64..=40, n in 1usize..=40, k_critical in 0.0f64..1.0,
    ) {
        let rule = InferenceRule { threshold_count: threshold, k_critical, monotone: true, n_steps: n };
        let mut seen_high = false;
        for count in 0..=n {
            match rule.assign(count) {
                Outcome::HighTransmission => seen_high = true,
                Outcome::LowTransmission => prop_assert!(!seen_high, "low outcome after high"),
            }
        }
    }

    #[test]
    fn leakage_is_independent_of_the_inference_split(
        delta_x in 0.0f64..0.3,
        threshold_a in 0i64..=6,
        threshold_b in 0i64..=6,
    ) {
        let params = SpinQubitParams::reference().with_delta(delta_x, 0.0, 0.0);
        let dt = calibrate_timestep(params.gamma, params.delta_gamma, params.delta_vec[2]).unwrap();
        let step = step_operators(&build_spin_total_hamiltonian(&params), dt).unwrap();
        let n = 6;
        let channels = evolve_count_resolved(&step, n).unwrap();
        let rho = DensityMatrix::basis_state(spin_basis::DIM, spin_basis::DOWN_DOWN);
        let projector = spin_leakage_projector();
        let rule = |threshold| InferenceRule {
            threshold_count: threshold, k_critical: 0.5, monotone: true, n_steps: n,
        };
        let (low_a, high_a) = aggregate_operations(&channels, &rule(threshold_a));
        let (low_b, high_b) = aggregate_operations(&channels, &rule(threshold_b));
        let l_a = leakage(&low_a, &high_a, &rho, &projector).unwrap();
        let l_b = leakage(&low_b, &high_b, &rho, &projector).unwrap();
        prop_assert!((l_a - l_b).abs() < 1e-12, "{l_a} vs {l_b}");
    }

    #[test]
    fn normal_cdf_is_a_symmetric_distribution_function(x in -8.0f64..8.0, y in -8.0f64..8.0) {
        let phi_x = normal_cdf(x);
        prop_assert!((0.0..=1.0).contains(&phi_x));
        prop_assert!((phi_x + normal_cdf(-x) - 1.0).abs() < 1e-13);
        if x < y {
            prop_assert!(phi_x <= normal_cdf(y));
        }
    }

    #[test]
    fn bessel_functions_are_ordered_and_positive(x in 0.0f64..29.0) {
        let i0 = modified_bessel_i0(x);
        let i1 = modified_bessel_i1(x);
        prop_assert!(i0 >= 1.0);
        prop_assert!(i1 >= 0.0);
        prop_assert!(i1 <= i0);
    }

    #[test]
    fn purity_stays_within_physical_bounds(entries in proptest::collection::vec(-2.0f64..2.0, 2 * 4 * 4)) {
        let a = hermitian_from(&entries, 4);
        let psd = a.matmul(&a.dagger());
        let trace = psd.trace().re;
        prop_assume!(trace > 1e-6);
        let rho = DensityMatrix::new(psd.scale(c64(1.0 / trace, 0.0))).unwrap();
        let purity = rho.purity();
        prop_assert!(purity <= 1.0 + 1e-12);
        prop_assert!(purity >= 1.0 / 4.0 - 1e-12);
    }

    #[test]
    fn reported_sweet_spots_null_the_transverse_coupling(
        g_entries in proptest::collection::vec(-3.0f64..3.0, 9),
        gp_entries in proptest::collection::vec(-3.0f64..3.0, 9),
    ) {
        let to_mat = |v: &[f64]| [[v[0], v[1], v[2]], [v[3], v[4], v[5]], [v[6], v[7], v[8]]];
        let pair = match GTensorPair::new(to_mat(&g_entries), to_mat(&gp_entries)) {
            Ok(pair) => pair,
            Err(_) => return Ok(()), // singular g, rejected upstream
        };
        let report = sweet_spot_directions(&pair).unwrap();
        prop_assume!(!report.degenerate && !report.defective);
        for spot in &report.spots {
            let field = FieldConfig::new(spot.direction, 1.0).unwrap();
            let decomposition = decompose_delta(&pair, &field).unwrap();
            let total = (decomposition.delta_x.powi(2) + decomposition.delta_z.powi(2)).sqrt();
            if total > 1e-9 {
                prop_assert!(
                    decomposition.delta_x / total < 1e-8,
                    "direction {:?} leaves transverse fraction {}",
                    spot.direction,
                    decomposition.delta_x / total
                );
            }
        }
    }
}
