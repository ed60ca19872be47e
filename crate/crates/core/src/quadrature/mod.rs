//! Radial momentum-space quadrature.
//!
//! Every integrand handled by this crate is isotropic in |k| once the plane
//! wave factors are averaged over directions, so an n-dimensional integral
//! reduces to `∫_0^∞ dk K(k)` with the measure `k^{n-1}` folded into `K`.
//! The half-line is compactified with `k = a + L t / (1 - t)` and integrated
//! with an adaptive 21-point Gauss-Kronrod rule.

pub mod angular;
mod gauss_kronrod;

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use angular::{bessel_j0, bessel_j01, bessel_j1, exp_sphere_average, plane_wave_average, sinc, solid_angle};
pub use gauss_kronrod::kronrod_nodes;
pub(crate) use gauss_kronrod::compensated_sum;

/// Most panels placed ahead of adaptive refinement when an oscillation hint is
/// available.
const MAX_PANELS: usize = 600;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadratureError {
    #[error("quadrature did not converge after {subdivisions} subdivisions (value {value}, error estimate {error:e})")]
    NonConvergence {
        value: Complex64,
        error: f64,
        subdivisions: usize,
    },
    #[error("divergent integral: {reason}")]
    DivergenceDetected { reason: String },
    #[error("unsupported spatial dimension {0} (expected 1, 2 or 3)")]
    UnsupportedDimension(usize),
    #[error("vector has {got} components but the spatial dimension is {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid quadrature configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    /// Scale `L` of the map from `[0, 1)` onto the half-line, in inverse length.
    pub radial_map_scale: f64,
    pub ir_cutoff: Option<f64>,
    pub uv_cutoff: Option<f64>,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            max_subdivisions: 50_000,
            radial_map_scale: 1.0,
            ir_cutoff: None,
            uv_cutoff: None,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<(), QuadratureError> {
        let bad = |msg: &str| Err(QuadratureError::InvalidConfig(msg.to_string()));
        if !(self.rel_tol > 0.0) {
            return bad("rel_tol must be positive");
        }
        if !(self.abs_tol > 0.0) {
            return bad("abs_tol must be positive");
        }
        if self.max_subdivisions < 1 {
            return bad("max_subdivisions must be at least 1");
        }
        if !(self.radial_map_scale > 0.0 && self.radial_map_scale.is_finite()) {
            return bad("radial_map_scale must be positive and finite");
        }
        if let Some(kmin) = self.ir_cutoff {
            if !(kmin >= 0.0 && kmin.is_finite()) {
                return bad("ir_cutoff must be a finite non-negative wavenumber");
            }
        }
        if let Some(kmax) = self.uv_cutoff {
            if !(kmax > 0.0 && kmax.is_finite()) {
                return bad("uv_cutoff must be a finite positive wavenumber");
            }
        }
        if let (Some(kmin), Some(kmax)) = (self.ir_cutoff, self.uv_cutoff) {
            if kmin >= kmax {
                return bad("ir_cutoff must be smaller than uv_cutoff");
            }
        }
        Ok(())
    }

    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }
}

/// A complex function of the wavenumber |k| with hints for subdivision.
#[derive(Clone)]
pub struct RadialKernel {
    eval: Arc<dyn Fn(f64) -> Complex64 + Send + Sync>,
    oscillation: f64,
    extent: Option<f64>,
}

impl fmt::Debug for RadialKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RadialKernel")
            .field("oscillation", &self.oscillation)
            .field("extent", &self.extent)
            .finish_non_exhaustive()
    }
}

impl RadialKernel {
    pub fn new<F>(eval: F) -> Self
    where
        F: Fn(f64) -> Complex64 + Send + Sync + 'static,
    {
        Self {
            eval: Arc::new(eval),
            oscillation: 0.0,
            extent: None,
        }
    }

    /// Largest angular frequency (in length units) of oscillatory factors
    /// such as `e^{i k r}`; panels are laid at multiples of `π / oscillation`.
    pub fn with_oscillation(mut self, frequency: f64) -> Self {
        self.oscillation = frequency.abs();
        self
    }

    /// Wavenumber beyond which the kernel is negligible.
    pub fn with_extent(mut self, extent: f64) -> Self {
        self.extent = (extent.is_finite() && extent > 0.0).then_some(extent);
        self
    }

    pub fn oscillation(&self) -> f64 {
        self.oscillation
    }

    pub fn extent(&self) -> Option<f64> {
        self.extent
    }

    #[inline]
    pub fn evaluate(&self, k: f64) -> Complex64 {
        (self.eval)(k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialIntegral {
    pub value: Complex64,
    /// Achieved absolute error estimate.
    pub error: f64,
    pub subdivisions: usize,
}

/// Integrate `kernel` over `[k_min, k_max]`, with the bounds defaulting to the
/// whole half-line when the corresponding cutoff is unset.
pub fn integrate_radial(
    kernel: &RadialKernel,
    cfg: &QuadratureConfig,
) -> Result<RadialIntegral, QuadratureError> {
    cfg.validate()?;
    let lower = cfg.ir_cutoff.unwrap_or(0.0);
    let scale = cfg.radial_map_scale;

    if lower == 0.0 {
        probe_infrared(kernel, scale)?;
    }
    if cfg.uv_cutoff.is_none() {
        probe_ultraviolet(kernel, scale)?;
    }

    let k_breaks = radial_breakpoints(kernel, lower, cfg.uv_cutoff, scale);
    let result = match cfg.uv_cutoff {
        Some(_) => {
            let f = |k: f64| kernel.evaluate(k);
            gauss_kronrod::adaptive(&f, &k_breaks, cfg.abs_tol, cfg.rel_tol, cfg.max_subdivisions)?
        }
        None => {
            let mut t_breaks: Vec<f64> = k_breaks
                .iter()
                .map(|&k| {
                    let d = k - lower;
                    d / (d + scale)
                })
                .collect();
            t_breaks.push(1.0);
            let f = |t: f64| {
                let one_minus = 1.0 - t;
                let k = lower + scale * t / one_minus;
                if !k.is_finite() {
                    return Complex64::new(0.0, 0.0);
                }
                let jac = scale / (one_minus * one_minus);
                let v = kernel.evaluate(k);
                if v.re == 0.0 && v.im == 0.0 {
                    v
                } else {
                    v * jac
                }
            };
            gauss_kronrod::adaptive(&f, &t_breaks, cfg.abs_tol, cfg.rel_tol, cfg.max_subdivisions)?
        }
    };
    Ok(RadialIntegral {
        value: result.value,
        error: result.error,
        subdivisions: result.segments,
    })
}

/// Panel edges in k: half-periods of the oscillation hint up to the kernel's
/// extent, or a handful of uniform panels otherwise. The upper edge is only
/// included when it is finite.
fn radial_breakpoints(kernel: &RadialKernel, lower: f64, upper: Option<f64>, scale: f64) -> Vec<f64> {
    let reach = kernel.extent().unwrap_or(40.0 * scale);
    let end = match upper {
        Some(u) => u.min(lower + reach),
        None => lower + reach,
    };
    let mut breaks = vec![lower];
    let span = end - lower;
    if span > 0.0 {
        let panels = if kernel.oscillation() > 0.0 {
            let half_period = std::f64::consts::PI / kernel.oscillation();
            ((span / half_period).ceil() as usize).clamp(8, MAX_PANELS)
        } else {
            8
        };
        let width = span / panels as f64;
        breaks.extend((1..=panels).map(|j| lower + j as f64 * width));
    }
    if let Some(u) = upper {
        if *breaks.last().unwrap() < u {
            breaks.push(u);
        }
    }
    breaks
}

fn probe_infrared(kernel: &RadialKernel, scale: f64) -> Result<(), QuadratureError> {
    let near = 1e-6 * scale;
    let nearer = 1e-12 * scale;
    let g_near = near * kernel.evaluate(near).norm();
    let g_nearer = nearer * kernel.evaluate(nearer).norm();
    if !g_nearer.is_finite() || (g_nearer > 1e-300 && g_nearer > 0.5 * g_near) {
        return Err(QuadratureError::DivergenceDetected {
            reason: "integrand does not vanish faster than 1/k at k -> 0 (infrared); set ir_cutoff or use an IR-safe profile".into(),
        });
    }
    Ok(())
}

fn probe_ultraviolet(kernel: &RadialKernel, scale: f64) -> Result<(), QuadratureError> {
    let envelope = |base: f64| {
        (0..16)
            .map(|j| {
                let k = base * (1.0 + j as f64 / 15.0);
                k * kernel.evaluate(k).norm()
            })
            .fold(0.0_f64, f64::max)
    };
    let far = envelope(1e5 * scale);
    let farther = envelope(1e10 * scale);
    if !farther.is_finite() || (farther > 1e-300 && farther > 0.5 * far) {
        return Err(QuadratureError::DivergenceDetected {
            reason: "integrand does not decay faster than 1/k as k -> infinity (ultraviolet); set uv_cutoff or use a smeared profile".into(),
        });
    }
    Ok(())
}

/// Fold the angular integral of `e^{i k·Δx}` into a radial kernel:
/// `K(k) = k^{n-1} S_n(k|Δx|) profile(k)` with `S_3 = 4π sinc`, `S_2 = 2π J₀`
/// and `S_1 = 2 cos`.
pub fn angular_reduce<F>(n: usize, displacement: &[f64], profile: F) -> Result<RadialKernel, QuadratureError>
where
    F: Fn(f64) -> Complex64 + Send + Sync + 'static,
{
    angular_reduce_with_power(n, displacement, 0.0, profile)
}

/// As [`angular_reduce`], with an extra factor `k^{extra_power}` merged into
/// the measure as a single power so that cancelling `1/|k|` factors are never
/// evaluated as `0/0`.
pub fn angular_reduce_with_power<F>(
    n: usize,
    displacement: &[f64],
    extra_power: f64,
    profile: F,
) -> Result<RadialKernel, QuadratureError>
where
    F: Fn(f64) -> Complex64 + Send + Sync + 'static,
{
    check_dimension(n)?;
    if displacement.len() != n {
        return Err(QuadratureError::DimensionMismatch {
            expected: n,
            got: displacement.len(),
        });
    }
    let r = displacement.iter().map(|x| x * x).sum::<f64>().sqrt();
    let power = (n as f64 - 1.0) + extra_power;
    let kernel = RadialKernel::new(move |k: f64| {
        let measure = if power == 0.0 { 1.0 } else { k.powf(power) };
        profile(k) * (measure * plane_wave_average(n, k, r))
    });
    Ok(kernel.with_oscillation(r))
}

pub fn check_dimension(n: usize) -> Result<(), QuadratureError> {
    if (1..=3).contains(&n) {
        Ok(())
    } else {
        Err(QuadratureError::UnsupportedDimension(n))
    }
}
