#![allow(dead_code)]

use harvest_core::kernel::{CoherentAmplitude, DetectorParams, GaussianPacket, SmearingProfile};
use proptest::prelude::*;

pub fn smearing() -> impl Strategy<Value = SmearingProfile> {
    prop_oneof![
        (0.5..2.0f64).prop_map(|sigma| SmearingProfile::Gaussian { sigma }),
        (0.5..2.0f64).prop_map(|radius| SmearingProfile::Tophat { radius }),
    ]
}

pub fn vector(n: usize, bound: f64) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-bound..bound, n)
}

pub fn detector(n: usize) -> impl Strategy<Value = DetectorParams> {
    (smearing(), 0.1..3.0f64, 0.0..3.0f64, -2.0..4.0f64, vector(n, 3.0)).prop_map(
        move |(s, coupling, time, gap, position)| {
            DetectorParams::new(n, s)
                .with_coupling(coupling)
                .with_switch(time, 1.0)
                .with_gap(gap)
                .at(&position)
        },
    )
}

pub fn packet(n: usize) -> impl Strategy<Value = GaussianPacket> {
    (0.0..2.0f64, vector(n, 2.0), 0.3..1.5f64, -3.2..3.2f64, proptest::option::of(vector(n, 2.0))).prop_map(
        |(peak, center, spread, phase, position)| {
            let p = GaussianPacket::new(peak, &center, spread, phase);
            match position {
                Some(x) => p.at(&x),
                None => p,
            }
        },
    )
}

pub fn amplitude(n: usize) -> impl Strategy<Value = CoherentAmplitude> {
    prop_oneof![
        Just(CoherentAmplitude::Vacuum),
        packet(n).prop_map(CoherentAmplitude::GaussianPacket),
        proptest::collection::vec(packet(n), 2..4).prop_map(|packets| CoherentAmplitude::Superposition { packets }),
    ]
}

pub fn dimension() -> impl Strategy<Value = usize> {
    prop_oneof![Just(2usize), Just(3usize)]
}
