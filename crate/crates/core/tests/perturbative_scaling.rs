use harvest_core::kernel::{CoherentAmplitude, DetectorParams, GaussianPacket};
use harvest_core::perturbative::{residual_scaling_check, ScalingScenario, ScalingStatus};
use harvest_core::quadrature::QuadratureConfig;

const LAMBDAS: [f64; 4] = [0.2, 0.1, 0.05, 0.025];

fn scenario(det_b: Option<DetectorParams>, alpha: CoherentAmplitude) -> ScalingScenario {
    ScalingScenario {
        det_a: DetectorParams::gaussian(3, 1.0).with_gap(1.5),
        det_b,
        alpha,
        n: 3,
        cfg: QuadratureConfig::default(),
    }
}

#[test]
fn single_vacuum_residual_decays_quartically() {
    let report = residual_scaling_check(&scenario(None, CoherentAmplitude::Vacuum), &LAMBDAS).unwrap();
    println!("{report:?}");
    assert_eq!(report.status, ScalingStatus::Pass);
    assert!((report.slope - 4.0).abs() < 0.2, "slope {}", report.slope);
}

#[test]
fn single_packet_residual_decays_cubically() {
    let alpha = CoherentAmplitude::GaussianPacket(GaussianPacket::new(1.0, &[1.0, 0.0, 0.0], 0.5, 0.3));
    let report = residual_scaling_check(&scenario(None, alpha), &LAMBDAS).unwrap();
    println!("{report:?}");
    assert_eq!(report.status, ScalingStatus::Pass);
    assert!(report.slope > 2.8, "slope {}", report.slope);
}

#[test]
fn pair_residual_passes_slope_threshold() {
    let b = DetectorParams::gaussian(3, 1.0).with_gap(0.8).with_switch(1.0, 1.0).at(&[2.0, 0.0, 0.0]);
    for alpha in [
        CoherentAmplitude::Vacuum,
        CoherentAmplitude::GaussianPacket(GaussianPacket::new(0.7, &[0.5, 0.5, 0.0], 0.6, 1.1)),
    ] {
        let report = residual_scaling_check(&scenario(Some(b.clone()), alpha), &LAMBDAS).unwrap();
        println!("{report:?}");
        assert_eq!(report.status, ScalingStatus::Pass);
        assert!(!report.informational);
    }
}

#[test]
fn coincident_pair_is_informational() {
    let b = DetectorParams::gaussian(3, 1.0).at(&[3.0, 0.0, 0.0]);
    let report = residual_scaling_check(&scenario(Some(b), CoherentAmplitude::Vacuum), &LAMBDAS).unwrap();
    assert!(report.informational);
}
