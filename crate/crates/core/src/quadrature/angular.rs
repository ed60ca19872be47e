//! Angular integrals over the unit sphere S^{n-1} for n = 1, 2, 3 and the
//! integer-order Bessel functions they need.

use std::f64::consts::{FRAC_PI_4, PI, TAU};

use num_complex::Complex64;

/// Bessel function of the first kind, orders 0 and 1, for real argument.
///
/// Power series below 2, Miller backward recurrence up to 25, and the Hankel
/// asymptotic expansion beyond.
pub fn bessel_j01(x: f64) -> (f64, f64) {
    let ax = x.abs();
    let (j0, j1) = if ax < 2.0 {
        series_j01(ax)
    } else if ax <= 25.0 {
        miller_j01(ax)
    } else {
        (hankel(0, ax), hankel(1, ax))
    };
    (j0, if x < 0.0 { -j1 } else { j1 })
}

pub fn bessel_j0(x: f64) -> f64 {
    bessel_j01(x).0
}

pub fn bessel_j1(x: f64) -> f64 {
    bessel_j01(x).1
}

fn series_j01(x: f64) -> (f64, f64) {
    let q = -0.25 * x * x;
    let (mut t0, mut s0) = (1.0, 1.0);
    let (mut t1, mut s1) = (0.5 * x, 0.5 * x);
    for m in 1..40 {
        let m = m as f64;
        t0 *= q / (m * m);
        t1 *= q / (m * (m + 1.0));
        s0 += t0;
        s1 += t1;
        if t0.abs() < 1e-18 * s0.abs() && t1.abs() <= 1e-18 * s1.abs() {
            break;
        }
    }
    (s0, s1)
}

fn miller_j01(x: f64) -> (f64, f64) {
    let start = 2 * ((x as usize + 40) / 2 + 10);
    let mut j_next = 0.0_f64; // J_{k+1}
    let mut j_cur = 1e-30_f64; // J_k
    let mut norm = 0.0_f64;
    let mut j1 = 0.0_f64;
    let mut k = start;
    while k > 0 {
        let j_prev = (2.0 * k as f64 / x) * j_cur - j_next;
        j_next = j_cur;
        j_cur = j_prev;
        k -= 1;
        if k.is_multiple_of(2) && k > 0 {
            norm += 2.0 * j_cur;
        }
        if k == 1 {
            j1 = j_cur;
        }
        if j_cur.abs() > 1e200 {
            j_cur *= 1e-200;
            j_next *= 1e-200;
            norm *= 1e-200;
            j1 *= 1e-200;
        }
    }
    norm += j_cur;
    (j_cur / norm, j1 / norm)
}

fn hankel(order: u32, x: f64) -> f64 {
    let mu = 4.0 * (order * order) as f64;
    let eight_x = 8.0 * x;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0_f64;
    let mut last = f64::INFINITY;
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) / (k as f64 * eight_x);
        if term.abs() >= last || term == 0.0 {
            break;
        }
        last = term.abs();
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 1 {
            q += sign * term;
        } else {
            p += sign * term;
        }
        if term.abs() < 1e-18 {
            break;
        }
    }
    let chi = x - order as f64 * 0.5 * PI - FRAC_PI_4;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// Solid angle of S^{n-1}.
pub fn solid_angle(n: usize) -> f64 {
    match n {
        1 => 2.0,
        2 => TAU,
        3 => 4.0 * PI,
        _ => f64::NAN,
    }
}

/// ∫ dΩ e^{i k ω̂·Δx} over S^{n-1} for real |Δx| = r.
pub fn plane_wave_average(n: usize, k: f64, r: f64) -> f64 {
    let z = k * r;
    match n {
        1 => 2.0 * z.cos(),
        2 => TAU * bessel_j0(z),
        3 => 4.0 * PI * sinc(z),
        _ => f64::NAN,
    }
}

/// sin(z)/z with the removable singularity filled in.
pub fn sinc(z: f64) -> f64 {
    if z.abs() < 1e-3 {
        let z2 = z * z;
        1.0 - z2 / 6.0 * (1.0 - z2 / 20.0 * (1.0 - z2 / 42.0))
    } else {
        z.sin() / z
    }
}

/// ∫ dΩ exp(k ω̂·c − shift) over S^{n-1} for a complex vector `c`.
///
/// `shift` is subtracted inside the exponential so that callers can fold a
/// large decaying Gaussian envelope into the angular factor without overflow;
/// the result is finite whenever `k |Re c| − shift` is.
pub fn exp_sphere_average(n: usize, k: f64, c: &[Complex64], shift: f64) -> Complex64 {
    let re_norm = c.iter().map(|z| z.re * z.re).sum::<f64>().sqrt();
    if k * re_norm - shift < -745.0 {
        return Complex64::new(0.0, 0.0);
    }
    match n {
        1 => {
            let z = c[0] * k;
            (z - shift).exp() + (-z - shift).exp()
        }
        3 => {
            let q = c.iter().map(|z| z * z).sum::<Complex64>().sqrt();
            let z = q * k;
            let value = if z.norm() < 0.1 {
                let z2 = z * z;
                let series = Complex64::new(1.0, 0.0)
                    + z2 / 6.0
                        * (Complex64::new(1.0, 0.0)
                            + z2 / 20.0
                                * (Complex64::new(1.0, 0.0)
                                    + z2 / 42.0 * (Complex64::new(1.0, 0.0) + z2 / 72.0)));
                series * (-shift).exp()
            } else {
                ((z - shift).exp() - (-z - shift).exp()) / (z * 2.0)
            };
            value * (4.0 * PI)
        }
        2 => {
            // Periodic trapezoid rule: exponentially convergent for this
            // entire integrand once the node count exceeds k|c|.
            let scale = k * c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let nodes = ((1.3 * scale) as usize + 64).min(1 << 20);
            let step = TAU / nodes as f64;
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..nodes {
                let (s, co) = (j as f64 * step).sin_cos();
                let arg = (c[0] * co + c[1] * s) * k;
                acc += (arg - shift).exp();
            }
            acc * step
        }
        _ => Complex64::new(f64::NAN, f64::NAN),
    }
}
