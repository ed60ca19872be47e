//! Detectors, smearing profiles, coherent amplitudes and the scalar kernel
//! functionals `{I_A, I_B, f_A, f_B, θ, ω, C_A, C_B}`.
//!
//! Conventions: `F̃(k) = (2π)^{-n/2} ∫ dⁿx F(x) e^{ik·x}` with `∫F = 1`, and
//! `β_ν(k) = -2i λ_ν η_ν (2|k|)^{-1/2} F̃_ν(k) e^{i(|k| t_ν - k·x_ν)}`.
//! Every functional is a radial integral after the angular average has been
//! taken analytically.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quadrature::{
    angular_reduce_with_power, check_dimension, exp_sphere_average, integrate_radial,
    plane_wave_average, bessel_j1, QuadratureConfig, QuadratureError, RadialKernel,
};

/// Below this value `f_ν` is flushed to zero and flagged.
pub const UNDERFLOW_THRESHOLD: f64 = 1e-300;

/// `F̃` of a Gaussian is below `e^{-72}` past `GAUSSIAN_REACH / σ`.
const GAUSSIAN_REACH: f64 = 12.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("{functional}: {source}")]
    Quadrature {
        functional: &'static str,
        #[source]
        source: QuadratureError,
    },
    #[error("invalid detector: {0}")]
    InvalidDetector(String),
    #[error("invalid coherent amplitude: {0}")]
    InvalidAmplitude(String),
    #[error(transparent)]
    Dimension(QuadratureError),
}

impl KernelError {
    fn labelled(functional: &'static str) -> impl FnOnce(QuadratureError) -> KernelError {
        move |source| KernelError::Quadrature { functional, source }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SmearingProfile {
    Pointlike,
    Gaussian { sigma: f64 },
    Tophat { radius: f64 },
}

impl SmearingProfile {
    pub fn validate(&self) -> Result<(), KernelError> {
        match *self {
            SmearingProfile::Pointlike => Ok(()),
            SmearingProfile::Gaussian { sigma } if sigma > 0.0 && sigma.is_finite() => Ok(()),
            SmearingProfile::Tophat { radius } if radius > 0.0 && radius.is_finite() => Ok(()),
            other => Err(KernelError::InvalidDetector(format!(
                "smearing width must be positive and finite, got {other:?}"
            ))),
        }
    }

    /// Wavenumber past which `F̃` is negligible, when it decays that fast.
    pub fn extent(&self) -> Option<f64> {
        match *self {
            SmearingProfile::Gaussian { sigma } => Some(GAUSSIAN_REACH / sigma),
            _ => None,
        }
    }

    /// Oscillation frequency of `F̃` in k.
    fn oscillation(&self) -> f64 {
        match *self {
            SmearingProfile::Tophat { radius } => radius,
            _ => 0.0,
        }
    }
}

/// `F̃(|k|)` for a normalized isotropic profile.
pub fn fourier_smearing(profile: &SmearingProfile, n: usize, k: f64) -> f64 {
    let norm = (2.0 * PI).powf(-(n as f64) / 2.0);
    match *profile {
        SmearingProfile::Pointlike => norm,
        SmearingProfile::Gaussian { sigma } => norm * (-0.5 * sigma * sigma * k * k).exp(),
        SmearingProfile::Tophat { radius } => norm * ball_transform(n, k * radius),
    }
}

/// Fourier transform of the normalized indicator of the unit ball, without
/// the `(2π)^{-n/2}` prefactor.
fn ball_transform(n: usize, x: f64) -> f64 {
    let x = x.abs();
    let x2 = x * x;
    match n {
        1 => {
            if x < 1e-3 {
                1.0 - x2 / 6.0 * (1.0 - x2 / 20.0)
            } else {
                x.sin() / x
            }
        }
        2 => {
            if x < 0.1 {
                1.0 - x2 / 8.0 * (1.0 - x2 / 24.0 * (1.0 - x2 / 48.0 * (1.0 - x2 / 80.0)))
            } else {
                2.0 * bessel_j1(x) / x
            }
        }
        3 => {
            if x < 0.1 {
                1.0 - x2 / 10.0 + x2 * x2 / 280.0 - x2 * x2 * x2 / 15120.0 + x2 * x2 * x2 * x2 / 1_330_560.0
            } else {
                3.0 * (x.sin() - x * x.cos()) / (x2 * x)
            }
        }
        _ => f64::NAN,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorParams {
    /// λ, in length^{(n-3)/2}.
    pub coupling: f64,
    /// η, the area of the delta switching (a time).
    pub switch_weight: f64,
    pub switch_time: f64,
    /// Ω. Carried for the explicit phases of the perturbative entries only.
    #[serde(default)]
    pub gap: f64,
    pub position: Vec<f64>,
    pub smearing: SmearingProfile,
}

impl DetectorParams {
    /// Unit coupling and weight, switched at `t = 0` at the origin.
    pub fn new(n: usize, smearing: SmearingProfile) -> Self {
        Self {
            coupling: 1.0,
            switch_weight: 1.0,
            switch_time: 0.0,
            gap: 1.0,
            position: vec![0.0; n],
            smearing,
        }
    }

    pub fn gaussian(n: usize, sigma: f64) -> Self {
        Self::new(n, SmearingProfile::Gaussian { sigma })
    }

    pub fn with_coupling(mut self, coupling: f64) -> Self {
        self.coupling = coupling;
        self
    }

    pub fn with_switch(mut self, time: f64, weight: f64) -> Self {
        self.switch_time = time;
        self.switch_weight = weight;
        self
    }

    pub fn with_gap(mut self, gap: f64) -> Self {
        self.gap = gap;
        self
    }

    pub fn at(mut self, position: &[f64]) -> Self {
        self.position = position.to_vec();
        self
    }

    /// λη, the only combination of coupling and weight that enters.
    pub fn strength(&self) -> f64 {
        self.coupling * self.switch_weight
    }

    pub fn validate(&self, n: usize) -> Result<(), KernelError> {
        check_dimension(n).map_err(KernelError::Dimension)?;
        if self.position.len() != n {
            return Err(KernelError::Dimension(QuadratureError::DimensionMismatch {
                expected: n,
                got: self.position.len(),
            }));
        }
        if !(self.switch_weight > 0.0 && self.switch_weight.is_finite()) {
            return Err(KernelError::InvalidDetector("switch_weight must be positive and finite".into()));
        }
        let finite = [self.coupling, self.switch_time, self.gap]
            .iter()
            .chain(&self.position)
            .all(|v| v.is_finite());
        if !finite {
            return Err(KernelError::InvalidDetector("parameters must be finite".into()));
        }
        self.smearing.validate()
    }
}

/// `α(k) = a₀ e^{iφ} exp(-|k - k₀|²/(2s²)) e^{-ik·x₀}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianPacket {
    pub peak: f64,
    pub center: Vec<f64>,
    pub spread: f64,
    #[serde(default)]
    pub phase: f64,
    /// Position the packet is centered on in real space; the origin if unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<Vec<f64>>,
}

impl GaussianPacket {
    pub fn new(peak: f64, center: &[f64], spread: f64, phase: f64) -> Self {
        Self {
            peak,
            center: center.to_vec(),
            spread,
            phase,
            position: None,
        }
    }

    pub fn at(mut self, position: &[f64]) -> Self {
        self.position = Some(position.to_vec());
        self
    }

    fn position_or_origin(&self, n: usize) -> Vec<f64> {
        self.position.clone().unwrap_or_else(|| vec![0.0; n])
    }

    pub fn evaluate(&self, k: &[f64]) -> Complex64 {
        let x0 = self.position_or_origin(k.len());
        let dist2: f64 = k.iter().zip(&self.center).map(|(a, b)| (a - b) * (a - b)).sum();
        let kx: f64 = k.iter().zip(&x0).map(|(a, b)| a * b).sum();
        Complex64::from_polar(self.peak * (-dist2 / (2.0 * self.spread * self.spread)).exp(), self.phase - kx)
    }

    fn validate(&self, n: usize) -> Result<(), KernelError> {
        if self.center.len() != n || self.position.as_ref().is_some_and(|p| p.len() != n) {
            return Err(KernelError::Dimension(QuadratureError::DimensionMismatch {
                expected: n,
                got: self.center.len(),
            }));
        }
        if !(self.spread > 0.0 && self.spread.is_finite()) {
            return Err(KernelError::InvalidAmplitude("packet spread must be positive and finite".into()));
        }
        let finite = [self.peak, self.phase]
            .iter()
            .chain(&self.center)
            .chain(self.position.iter().flatten())
            .all(|v| v.is_finite());
        if !finite {
            return Err(KernelError::InvalidAmplitude("packet parameters must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CoherentAmplitude {
    #[default]
    Vacuum,
    GaussianPacket(GaussianPacket),
    Superposition { packets: Vec<GaussianPacket> },
}

impl CoherentAmplitude {
    pub fn packets(&self) -> &[GaussianPacket] {
        match self {
            CoherentAmplitude::Vacuum => &[],
            CoherentAmplitude::GaussianPacket(p) => std::slice::from_ref(p),
            CoherentAmplitude::Superposition { packets } => packets,
        }
    }

    pub fn evaluate(&self, k: &[f64]) -> Complex64 {
        self.packets().iter().map(|p| p.evaluate(k)).sum()
    }

    pub fn validate(&self, n: usize) -> Result<(), KernelError> {
        self.packets().iter().try_for_each(|p| p.validate(n))
    }
}

/// `β_ν(k)` at a wavevector with `|k| > 0`.
pub fn beta(det: &DetectorParams, k: &[f64]) -> Complex64 {
    let norm = k.iter().map(|x| x * x).sum::<f64>().sqrt();
    let ft = fourier_smearing(&det.smearing, k.len(), norm);
    let kx: f64 = k.iter().zip(&det.position).map(|(a, b)| a * b).sum();
    let modulus = 2.0 * det.strength() * ft / (2.0 * norm).sqrt();
    Complex64::new(0.0, -modulus) * Complex64::from_polar(1.0, norm * det.switch_time - kx)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Overlap<T> {
    pub value: T,
    pub error: f64,
}

impl<T> Overlap<T> {
    fn exact(value: T) -> Self {
        Self { value, error: 0.0 }
    }
}

fn min_extent(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

/// `I_ν = ∫ dⁿk |β_ν(k)|²`.
pub fn self_overlap(det: &DetectorParams, n: usize, cfg: &QuadratureConfig) -> Result<Overlap<f64>, KernelError> {
    det.validate(n)?;
    let s = det.strength();
    if s == 0.0 {
        return Ok(Overlap::exact(0.0));
    }
    let profile = det.smearing;
    let prefactor = 2.0 * s * s;
    let kernel = angular_reduce_with_power(n, &vec![0.0; n], -1.0, move |k| {
        let ft = fourier_smearing(&profile, n, k);
        Complex64::new(prefactor * ft * ft, 0.0)
    })
    .map_err(KernelError::Dimension)?;
    let kernel = with_hints(kernel, profile.extent(), 2.0 * profile.oscillation());
    let r = integrate_radial(&kernel, cfg).map_err(KernelError::labelled("I"))?;
    Ok(Overlap {
        value: r.value.re,
        error: r.error,
    })
}

fn with_hints(kernel: RadialKernel, extent: Option<f64>, oscillation: f64) -> RadialKernel {
    let kernel = kernel.with_oscillation(oscillation);
    match extent {
        Some(e) => kernel.with_extent(e),
        None => kernel,
    }
}

/// `Z = ∫ dⁿk β_A(k)* β_B(k)`; `θ = -Im Z / 2` and `ω = -Re Z`.
pub fn cross_overlap(
    det_a: &DetectorParams,
    det_b: &DetectorParams,
    n: usize,
    cfg: &QuadratureConfig,
) -> Result<Overlap<Complex64>, KernelError> {
    det_a.validate(n)?;
    det_b.validate(n)?;
    let s = det_a.strength() * det_b.strength();
    if s == 0.0 {
        return Ok(Overlap::exact(Complex64::new(0.0, 0.0)));
    }
    let (pa, pb) = (det_a.smearing, det_b.smearing);
    let dt = det_b.switch_time - det_a.switch_time;
    let dx: Vec<f64> = det_a.position.iter().zip(&det_b.position).map(|(a, b)| a - b).collect();
    let r = dx.iter().map(|v| v * v).sum::<f64>().sqrt();
    let prefactor = 2.0 * s;
    let kernel = angular_reduce_with_power(n, &dx, -1.0, move |k| {
        let amp = prefactor * fourier_smearing(&pa, n, k) * fourier_smearing(&pb, n, k);
        Complex64::from_polar(amp, k * dt)
    })
    .map_err(KernelError::Dimension)?;
    let oscillation = r + dt.abs() + pa.oscillation() + pb.oscillation();
    let kernel = with_hints(kernel, min_extent(pa.extent(), pb.extent()), oscillation);
    let res = integrate_radial(&kernel, cfg).map_err(KernelError::labelled("Z"))?;
    Ok(Overlap {
        value: res.value,
        error: res.error,
    })
}

/// `C_ν = -λη ∫ dⁿk (2|k|)^{-1/2} (F̃ α e^{-i(|k|t - k·x)} + c.c.)`, which
/// equals `Im ∫ β_ν α*`.
pub fn coherent_shift(
    det: &DetectorParams,
    alpha: &CoherentAmplitude,
    n: usize,
    cfg: &QuadratureConfig,
) -> Result<Overlap<f64>, KernelError> {
    det.validate(n)?;
    alpha.validate(n)?;
    let s = det.strength();
    if s == 0.0 || alpha.packets().is_empty() {
        return Ok(Overlap::exact(0.0));
    }
    let mut value = 0.0;
    let mut error = 0.0;
    for packet in alpha.packets() {
        if packet.peak == 0.0 {
            continue;
        }
        let part = packet_shift(det, packet, n, cfg)?;
        value += part.value;
        error += part.error;
    }
    Ok(Overlap { value, error })
}

fn packet_shift(
    det: &DetectorParams,
    packet: &GaussianPacket,
    n: usize,
    cfg: &QuadratureConfig,
) -> Result<Overlap<f64>, KernelError> {
    let x0 = packet.position_or_origin(n);
    let inv_s2 = 1.0 / (packet.spread * packet.spread);
    // α(k) e^{ik·x} = a₀ e^{iφ} exp(-(k² + k₀²)/(2s²)) exp(k·c)
    let c: Vec<Complex64> = packet
        .center
        .iter()
        .zip(det.position.iter().zip(&x0))
        .map(|(k0, (x, x0))| Complex64::new(k0 * inv_s2, x - x0))
        .collect();
    let k0_sq: f64 = packet.center.iter().map(|v| v * v).sum();
    let offset: f64 = c.iter().map(|z| z.im * z.im).sum::<f64>().sqrt();
    let profile = det.smearing;
    let t = det.switch_time;
    let power = n as f64 - 1.5;
    let kernel = RadialKernel::new(move |k: f64| {
        if k == 0.0 && power < 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let shift = 0.5 * (k * k + k0_sq) * inv_s2;
        let ang = exp_sphere_average(n, k, &c, shift);
        let radial = k.powf(power) / std::f64::consts::SQRT_2 * fourier_smearing(&profile, n, k);
        ang * Complex64::from_polar(radial, -k * t)
    });
    let reach = k0_sq.sqrt() + GAUSSIAN_REACH * packet.spread;
    let kernel = with_hints(
        kernel,
        min_extent(profile.extent(), Some(reach)),
        t.abs() + offset + profile.oscillation(),
    );
    let res = integrate_radial(&kernel, cfg).map_err(KernelError::labelled("C"))?;
    let weight = Complex64::from_polar(packet.peak, packet.phase);
    let scale = -2.0 * det.strength();
    Ok(Overlap {
        value: scale * (weight * res.value).re,
        error: scale.abs() * packet.peak.abs() * res.error,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionalMode {
    Single,
    Pair,
}

/// Achieved absolute quadrature error per integral; zero marks an exact value.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FunctionalErrors {
    pub i_a: f64,
    pub i_b: f64,
    pub cross: f64,
    pub c_a: f64,
    pub c_b: f64,
}

impl FunctionalErrors {
    pub fn max(&self) -> f64 {
        [self.i_a, self.i_b, self.cross, self.c_a, self.c_b]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

/// The scalars that determine every evolved matrix. A single-detector set
/// behaves as a pair whose second detector is uncoupled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelFunctionals {
    pub mode: FunctionalMode,
    pub i_a: f64,
    pub i_b: f64,
    pub f_a: f64,
    pub f_b: f64,
    pub theta: f64,
    pub omega: f64,
    pub c_a: f64,
    pub c_b: f64,
    pub errors: FunctionalErrors,
    /// Set when some `f_ν` was flushed to zero.
    pub underflow: bool,
}

fn vacuum_overlap(i: f64) -> (f64, bool) {
    let f = (-0.5 * i).exp();
    if f < UNDERFLOW_THRESHOLD {
        (0.0, true)
    } else {
        (f, false)
    }
}

impl KernelFunctionals {
    pub fn single(i_a: f64, c_a: f64) -> Self {
        let (f_a, underflow) = vacuum_overlap(i_a);
        Self {
            mode: FunctionalMode::Single,
            i_a,
            i_b: 0.0,
            f_a,
            f_b: 1.0,
            theta: 0.0,
            omega: 0.0,
            c_a,
            c_b: 0.0,
            errors: FunctionalErrors::default(),
            underflow,
        }
    }

    /// Pair functionals from the overlaps `I_A`, `I_B` and `Z = ∫β_A*β_B`.
    pub fn pair(i_a: f64, i_b: f64, cross: Complex64, c_a: f64, c_b: f64) -> Self {
        let (f_a, ua) = vacuum_overlap(i_a);
        let (f_b, ub) = vacuum_overlap(i_b);
        Self {
            mode: FunctionalMode::Pair,
            i_a,
            i_b,
            f_a,
            f_b,
            theta: -0.5 * cross.im,
            omega: -cross.re,
            c_a,
            c_b,
            errors: FunctionalErrors::default(),
            underflow: ua || ub,
        }
    }

    pub fn with_errors(mut self, errors: FunctionalErrors) -> Self {
        self.errors = errors;
        self
    }

    /// The cross overlap `Z` reassembled from `θ` and `ω`.
    pub fn cross(&self) -> Complex64 {
        Complex64::new(-self.omega, -2.0 * self.theta)
    }

    /// `e^{sω} f_A f_B` for `s = ±1`, evaluated as one exponential so that
    /// large `I` and large `|ω|` cannot overflow separately.
    pub fn product_exp(&self, sign: f64) -> f64 {
        if self.underflow {
            return if self.f_a == 0.0 || self.f_b == 0.0 {
                0.0
            } else {
                self.f_a * self.f_b * (sign * self.omega).exp()
            };
        }
        (sign * self.omega - 0.5 * (self.i_a + self.i_b)).exp()
    }

    /// Exchange the roles of the two detectors: `Z → Z*`.
    pub fn swapped(&self) -> Self {
        Self {
            i_a: self.i_b,
            i_b: self.i_a,
            f_a: self.f_b,
            f_b: self.f_a,
            theta: -self.theta,
            c_a: self.c_b,
            c_b: self.c_a,
            errors: FunctionalErrors {
                i_a: self.errors.i_b,
                i_b: self.errors.i_a,
                c_a: self.errors.c_b,
                c_b: self.errors.c_a,
                ..self.errors
            },
            ..*self
        }
    }

    /// Multiply detector A's coupling by `a` and B's by `b`.
    pub fn rescaled(&self, a: f64, b: f64) -> Self {
        let mut out = Self::pair(a * a * self.i_a, b * b * self.i_b, self.cross() * (a * b), a * self.c_a, b * self.c_b);
        out.mode = self.mode;
        out.errors = FunctionalErrors {
            i_a: a * a * self.errors.i_a,
            i_b: b * b * self.errors.i_b,
            cross: (a * b).abs() * self.errors.cross,
            c_a: a.abs() * self.errors.c_a,
            c_b: b.abs() * self.errors.c_b,
        };
        out
    }
}

/// Evaluate the functionals for one detector, or for a pair when `det_b` is
/// given. Only `C_A` and `C_B` depend on `alpha`.
pub fn kernel_functionals(
    det_a: &DetectorParams,
    det_b: Option<&DetectorParams>,
    alpha: &CoherentAmplitude,
    n: usize,
    cfg: &QuadratureConfig,
) -> Result<KernelFunctionals, KernelError> {
    cfg.validate().map_err(KernelError::Dimension)?;
    let label = |name: &'static str| {
        move |e: KernelError| match e {
            KernelError::Quadrature { source, .. } => KernelError::Quadrature { functional: name, source },
            other => other,
        }
    };
    let ia = self_overlap(det_a, n, cfg).map_err(label("I_A"))?;
    let ca = coherent_shift(det_a, alpha, n, cfg).map_err(label("C_A"))?;
    match det_b {
        None => Ok(KernelFunctionals::single(ia.value, ca.value).with_errors(FunctionalErrors {
            i_a: ia.error,
            c_a: ca.error,
            ..Default::default()
        })),
        Some(det_b) => {
            let ib = self_overlap(det_b, n, cfg).map_err(label("I_B"))?;
            let z = cross_overlap(det_a, det_b, n, cfg).map_err(label("Z"))?;
            let cb = coherent_shift(det_b, alpha, n, cfg).map_err(label("C_B"))?;
            Ok(KernelFunctionals::pair(ia.value, ib.value, z.value, ca.value, cb.value).with_errors(
                FunctionalErrors {
                    i_a: ia.error,
                    i_b: ib.error,
                    cross: z.error,
                    c_a: ca.error,
                    c_b: cb.error,
                },
            ))
        }
    }
}

/// `∫ dⁿk F̃_A F̃_B e^{i|k|Δt} e^{ik·Δx} |k|^{p}` as a radial integral; the
/// building block shared with the perturbative coefficients.
pub(crate) fn profile_product_integral(
    pa: SmearingProfile,
    pb: SmearingProfile,
    n: usize,
    dt: f64,
    dx: &[f64],
    power: f64,
    cfg: &QuadratureConfig,
    functional: &'static str,
) -> Result<Overlap<Complex64>, KernelError> {
    let r = dx.iter().map(|v| v * v).sum::<f64>().sqrt();
    let kernel = RadialKernel::new(move |k: f64| {
        let measure = k.powf(n as f64 - 1.0 + power);
        let amp = measure * plane_wave_average(n, k, r) * fourier_smearing(&pa, n, k) * fourier_smearing(&pb, n, k);
        Complex64::from_polar(amp, k * dt)
    });
    let oscillation = r + dt.abs() + pa.oscillation() + pb.oscillation();
    let kernel = with_hints(kernel, min_extent(pa.extent(), pb.extent()), oscillation);
    let res = integrate_radial(&kernel, cfg).map_err(KernelError::labelled(functional))?;
    Ok(Overlap {
        value: res.value,
        error: res.error,
    })
}
