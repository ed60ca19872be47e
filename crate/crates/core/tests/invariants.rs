mod common;

use common::{amplitude, detector, dimension};
use harvest_core::kernel::{cross_overlap, kernel_functionals, CoherentAmplitude, DetectorParams, GaussianPacket};
use harvest_core::pipeline::{evolve_pair, evolve_single};
use harvest_core::quadrature::QuadratureConfig;
use harvest_core::spectra::{eig_hermitian4, gamma_diagnostics, physicality_bound};
use harvest_core::state::{hermiticity_residual, max_abs_diff, partial_transpose_a};
use proptest::prelude::*;

fn cfg() -> QuadratureConfig {
    QuadratureConfig::default()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

fn pair_case() -> impl Strategy<Value = (usize, DetectorParams, DetectorParams, CoherentAmplitude, CoherentAmplitude)> {
    dimension().prop_flat_map(|n| (Just(n), detector(n), detector(n), amplitude(n), amplitude(n)))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn single_spectrum_is_independent_of_the_field_state(
        (n, det, a1, a2) in dimension().prop_flat_map(|n| (Just(n), detector(n), amplitude(n), amplitude(n)))
    ) {
        let x = evolve_single(&det, &a1, n, &cfg()).unwrap();
        let y = evolve_single(&det, &a2, n, &cfg()).unwrap();
        prop_assert!(close(x.report.eig_single.0, y.report.eig_single.0, 1e-12));
        prop_assert!(close(x.report.eig_single.1, y.report.eig_single.1, 1e-12));
        prop_assert!(close(x.report.entropy_single, y.report.entropy_single, 1e-12));
        prop_assert_eq!(x.kf.i_a, y.kf.i_a);
    }

    #[test]
    fn pair_spectra_are_independent_of_the_field_state((n, a, b, a1, a2) in pair_case()) {
        let x = evolve_pair(&a, &b, &a1, n, &cfg()).unwrap();
        let y = evolve_pair(&a, &b, &a2, n, &cfg()).unwrap();
        prop_assert_eq!((x.kf.theta, x.kf.omega), (y.kf.theta, y.kf.omega));
        let (ex, ey) = (x.report.eig_pair.unwrap(), y.report.eig_pair.unwrap());
        let (px, py) = (x.report.eig_pt.unwrap(), y.report.eig_pt.unwrap());
        prop_assert!((x.report.entropy_pair.unwrap() - y.report.entropy_pair.unwrap()).abs() < 1e-10);
        for i in 0..4 {
            prop_assert!((ex[i] - ey[i]).abs() < 1e-11);
            prop_assert!((px[i] - py[i]).abs() < 1e-11);
        }
    }

    #[test]
    fn pair_states_are_physical_and_separable((n, a, b, alpha, _x) in pair_case()) {
        let out = evolve_pair(&a, &b, &alpha, n, &cfg()).unwrap();
        prop_assert!(hermiticity_residual(&out.rho) < 1e-14);
        prop_assert!((out.rho.trace().re - 1.0).abs() < 1e-12);
        let eig = out.report.eig_pair.unwrap();
        prop_assert!(eig[3] > -1e-11);
        let pt = eig_hermitian4(&partial_transpose_a(&out.rho)).unwrap();
        prop_assert!(pt[3] > -1e-11);
        prop_assert!(out.report.negativity.unwrap() < 1e-10);
        // ρ_AB and its partial transpose share one spectrum
        for i in 0..4 {
            prop_assert!((eig[i] - pt[i]).abs() < 1e-10);
        }
        prop_assert!(out.report.residual_closed_vs_numeric < 1e-10);
        let (gm, gp) = gamma_diagnostics(&out.kf);
        prop_assert!(gm > -1e-12 && gp >= gm);
        prop_assert!(physicality_bound(&out.kf) <= 1.0 + 1e-12);
    }

    #[test]
    fn gap_does_not_enter_tilde_basis_matrices((n, a, b, alpha, _x) in pair_case(), ga in -5.0..5.0f64, gb in -5.0..5.0f64) {
        let x = evolve_pair(&a, &b, &alpha, n, &cfg()).unwrap();
        let y = evolve_pair(&a.clone().with_gap(ga), &b.clone().with_gap(gb), &alpha, n, &cfg()).unwrap();
        prop_assert_eq!(x.rho, y.rho);
    }

    #[test]
    fn cross_overlap_is_hermitian_under_exchange((n, a, b, _y, _z) in pair_case()) {
        let ab = cross_overlap(&a, &b, n, &cfg()).unwrap().value;
        let ba = cross_overlap(&b, &a, n, &cfg()).unwrap().value;
        prop_assert!((ab - ba.conj()).norm() < 1e-10 * (1.0 + ab.norm()));
    }

    #[test]
    fn functionals_scale_with_couplings((n, a, b, alpha, _z) in pair_case(), s in 0.2..4.0f64, t in 0.2..4.0f64) {
        let base = kernel_functionals(&a, Some(&b), &alpha, n, &cfg()).unwrap();
        let sa = a.clone().with_coupling(a.coupling * s);
        let sb = b.clone().with_coupling(b.coupling * t);
        let scaled = kernel_functionals(&sa, Some(&sb), &alpha, n, &cfg()).unwrap();
        let expect = base.rescaled(s, t);
        prop_assert!(close(scaled.i_a, expect.i_a, 1e-12));
        prop_assert!(close(scaled.i_b, expect.i_b, 1e-12));
        prop_assert!((scaled.cross() - expect.cross()).norm() < 1e-10 * (1.0 + expect.cross().norm()));
        prop_assert!(close(scaled.c_a, expect.c_a, 1e-10));
        prop_assert!(close(scaled.c_b, expect.c_b, 1e-10));
    }

    #[test]
    fn joint_translation_leaves_functionals_unchanged(
        (n, a, b, p, shift) in dimension().prop_flat_map(|n| (Just(n), detector(n), detector(n), common::packet(n), common::vector(n, 4.0)))
    ) {
        let move_by = |x: &[f64]| x.iter().zip(&shift).map(|(u, v)| u + v).collect::<Vec<f64>>();
        let origin = vec![0.0; n];
        let packet_at = p.position.clone().unwrap_or(origin);
        let alpha = CoherentAmplitude::GaussianPacket(p.clone());
        let moved_alpha = CoherentAmplitude::GaussianPacket(GaussianPacket { position: Some(move_by(&packet_at)), ..p });
        let x = kernel_functionals(&a, Some(&b), &alpha, n, &cfg()).unwrap();
        let y = kernel_functionals(
            &a.clone().at(&move_by(&a.position)),
            Some(&b.clone().at(&move_by(&b.position))),
            &moved_alpha,
            n,
            &cfg(),
        )
        .unwrap();
        prop_assert!(close(x.theta, y.theta, 1e-10) && close(x.omega, y.omega, 1e-10));
        prop_assert!(close(x.c_a, y.c_a, 1e-9) && close(x.c_b, y.c_b, 1e-9));
    }
}

#[test]
fn single_and_pair_reduced_states_agree() {
    let alpha = CoherentAmplitude::GaussianPacket(GaussianPacket::new(1.0, &[1.0, 0.0, 0.0], 0.5, 0.0));
    let a = DetectorParams::gaussian(3, 1.0).with_coupling(1.5);
    let b = DetectorParams::gaussian(3, 1.0).with_coupling(0.7).with_switch(1.0, 1.0).at(&[2.0, 0.0, 0.0]);
    let pair = evolve_pair(&a, &b, &alpha, 3, &cfg()).unwrap();
    let single = evolve_single(&a, &alpha, 3, &cfg()).unwrap();
    // trace over B of ρ_AB with the A index slowest
    let reduced = nalgebra::Matrix2::from_fn(|r, c| pair.rho[(2 * r, 2 * c)] + pair.rho[(2 * r + 1, 2 * c + 1)]);
    assert!(max_abs_diff(&reduced, &single.rho) < 1e-12);
}
