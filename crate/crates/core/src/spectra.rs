//! Closed-form and numeric spectra, negativity, entropy and the Γ± bounds.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{FunctionalMode, KernelFunctionals};
use crate::state::{self, DensityMatrix2, DensityMatrix4, StateError};

pub const HERMITIAN_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectraError {
    #[error("matrix is not Hermitian (max |M - M†| = {residual:e})")]
    NotHermitian { residual: f64 },
    #[error(transparent)]
    State(#[from] StateError),
}

/// `((1 + f_A)/2, (1 - f_A)/2)`.
pub fn eig_single_closed(kf: &KernelFunctionals) -> (f64, f64) {
    (0.5 * (1.0 + kf.f_a), 0.5 * (1.0 - kf.f_a))
}

/// The four partial-transpose eigenvalues in their closed form, in the order
/// `(-, -), (-, +), (+, -), (+, +)` of (cosh-term sign, root sign) paired with
/// the relative sign inside `|f_A e^{iθ} ∓ f_B e^{-iθ}|`.
pub fn eig_pt_closed(kf: &KernelFunctionals) -> [f64; 4] {
    let (fa, fb) = (kf.f_a, kf.f_b);
    let p = kf.product_exp(1.0);
    let m = kf.product_exp(-1.0);
    let cosh_term = p + m;
    let sinh_sq = (p - m) * (p - m);
    let cos2 = (2.0 * kf.theta).cos();
    let minus = (4.0 * (fa * fa + fb * fb - 2.0 * fa * fb * cos2)).max(0.0);
    let plus = (4.0 * (fa * fa + fb * fb + 2.0 * fa * fb * cos2)).max(0.0);
    let root_minus = (minus + sinh_sq).sqrt();
    let root_plus = (plus + sinh_sq).sqrt();
    [
        (2.0 - cosh_term + root_minus) / 8.0,
        (2.0 - cosh_term - root_minus) / 8.0,
        (2.0 + cosh_term + root_plus) / 8.0,
        (2.0 + cosh_term - root_plus) / 8.0,
    ]
}

/// Sort descending; ties keep their input order.
pub fn sorted_descending<const N: usize>(mut values: [f64; N]) -> [f64; N] {
    values.sort_by(|a, b| b.total_cmp(a));
    values
}

/// Eigenvalues of a Hermitian matrix, descending.
pub fn eig_hermitian(m: &DMatrix<Complex64>) -> Result<Vec<f64>, SpectraError> {
    assert!(m.is_square(), "eigenvalues need a square matrix");
    let residual = m
        .iter()
        .zip(m.adjoint().iter())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    let scale = m.iter().map(|z| z.norm()).fold(1.0, f64::max);
    if !(residual <= HERMITIAN_TOLERANCE * scale) {
        return Err(SpectraError::NotHermitian { residual });
    }
    let symmetric = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let mut values: Vec<f64> = SymmetricEigen::new(symmetric).eigenvalues.iter().copied().collect();
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(values)
}

pub fn eig_hermitian2(m: &DensityMatrix2) -> Result<[f64; 2], SpectraError> {
    let v = eig_hermitian(&DMatrix::from_iterator(2, 2, m.iter().copied()))?;
    Ok([v[0], v[1]])
}

pub fn eig_hermitian4(m: &DensityMatrix4) -> Result<[f64; 4], SpectraError> {
    let v = eig_hermitian(&DMatrix::from_iterator(4, 4, m.iter().copied()))?;
    Ok([v[0], v[1], v[2], v[3]])
}

/// `Σ max(0, -e)`.
pub fn negativity(eig_pt: &[f64]) -> f64 {
    eig_pt.iter().map(|&e| (-e).max(0.0)).sum()
}

/// Von Neumann entropy `-Σ e ln e` in nats; non-positive eigenvalues
/// contribute nothing.
pub fn entropy(eigs: &[f64]) -> f64 {
    eigs.iter()
        .filter(|&&e| e > 0.0)
        .map(|&e| -e * e.ln())
        .sum::<f64>()
        .max(0.0)
}

/// `Γ± = (1 - f_A²)(1 - f_B²) ± 4 f_A f_B [sinh²(ω/2) + sin²θ]`, which equals
/// `1 + f_A²f_B² - f_A² - f_B² ± 2(cosh ω - cos 2θ) f_A f_B` without the
/// cancellation at weak coupling.
pub fn gamma_diagnostics(kf: &KernelFunctionals) -> (f64, f64) {
    let one_minus_sq = |i: f64, f: f64| if f == 0.0 { 1.0 } else { -(-i).exp_m1() };
    let base = one_minus_sq(kf.i_a, kf.f_a) * one_minus_sq(kf.i_b, kf.f_b);
    let fafb = kf.f_a * kf.f_b;
    let sinh_half_sq = if kf.omega.abs() < 1.0 {
        fafb * (0.5 * kf.omega).sinh().powi(2)
    } else {
        0.25 * (kf.product_exp(1.0) + kf.product_exp(-1.0) - 2.0 * fafb)
    };
    let spread = 4.0 * (sinh_half_sq + fafb * kf.theta.sin().powi(2));
    (base - spread, base + spread)
}

/// `max(e^{ω} f_A f_B, e^{-ω} f_A f_B)`, bounded by one for physical inputs.
pub fn physicality_bound(kf: &KernelFunctionals) -> f64 {
    kf.product_exp(1.0).max(kf.product_exp(-1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub eig_single: (f64, f64),
    /// Numeric eigenvalues of `ρ_AB`, descending, taken from its amplitude-free
    /// factor `Q` so that they are bitwise identical across coherent states.
    pub eig_pair: Option<[f64; 4]>,
    /// Closed-form eigenvalues of `ρ_AB^{tA}`, descending.
    pub eig_pt: Option<[f64; 4]>,
    pub negativity: Option<f64>,
    /// Entropy of detector A's reduced state.
    pub entropy_single: f64,
    /// Entropy of the two-detector state.
    pub entropy_pair: Option<f64>,
    pub gamma_minus: Option<f64>,
    pub gamma_plus: Option<f64>,
    /// Largest gap between a closed-form eigenvalue and its numeric partner.
    pub residual_closed_vs_numeric: f64,
    pub underflow: bool,
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Spectra of the matrices built from `kf`. A pair report compares the
/// closed forms against the numeric spectra of `ρ_AB`, `ρ_AB^{tA}`, `Q` and
/// `Q^{tA}`.
pub fn spectral_report(kf: &KernelFunctionals) -> Result<SpectralReport, SpectraError> {
    let closed_single = eig_single_closed(kf);
    let numeric_single = eig_hermitian2(&state::rho_single(kf))?;
    let single_gap = max_gap(&[closed_single.0, closed_single.1], &numeric_single);
    if kf.mode == FunctionalMode::Single {
        return Ok(SpectralReport {
            eig_single: closed_single,
            eig_pair: None,
            eig_pt: None,
            negativity: None,
            entropy_single: entropy(&[closed_single.0, closed_single.1]),
            entropy_pair: None,
            gamma_minus: None,
            gamma_plus: None,
            residual_closed_vs_numeric: single_gap,
            underflow: kf.underflow,
        });
    }
    let rho = state::rho_pair(kf)?;
    let pt = state::partial_transpose_a(&rho);
    let bundle = state::build_factorization_unchecked(kf);
    let closed = sorted_descending(eig_pt_closed(kf));
    let eig_rho = eig_hermitian4(&rho)?;
    let eig_pt_numeric = eig_hermitian4(&pt)?;
    let eig_q = eig_hermitian4(&bundle.q)?;
    let eig_q_pt = eig_hermitian4(&bundle.q_pt)?;
    let residual = single_gap
        .max(max_gap(&closed, &eig_rho))
        .max(max_gap(&closed, &eig_q))
        .max(max_gap(&closed, &eig_pt_numeric))
        .max(max_gap(&closed, &eig_q_pt));
    let (gm, gp) = gamma_diagnostics(kf);
    Ok(SpectralReport {
        eig_single: closed_single,
        eig_pair: Some(eig_q),
        eig_pt: Some(closed),
        negativity: Some(negativity(&closed)),
        entropy_single: entropy(&[closed_single.0, closed_single.1]),
        entropy_pair: Some(entropy(&eig_q)),
        gamma_minus: Some(gm),
        gamma_plus: Some(gp),
        residual_closed_vs_numeric: residual,
        underflow: kf.underflow,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix4;
    use std::f64::consts::{LN_2, PI};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn single_closed_examples() {
        assert_eq!(eig_single_closed(&KernelFunctionals::single(0.0, 0.0)), (1.0, 0.0));
        let kf = KernelFunctionals::single(1.0 / (2.0 * PI * PI), 0.3);
        let (a, b) = eig_single_closed(&kf);
        assert!((a - 0.987_493_9).abs() < 1e-7 && (b - 0.012_506_1).abs() < 1e-7);
    }

    #[test]
    fn pt_closed_for_decoupled_pair() {
        let kf = KernelFunctionals::pair(0.0, 0.0, Complex64::new(0.0, 0.0), 0.0, 0.0);
        let e = eig_pt_closed(&kf);
        assert_eq!(e, [0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn pt_closed_invariant_under_omega_flip() {
        let kf = KernelFunctionals::pair(0.5, 0.9, Complex64::new(-0.4, 0.3), 0.0, 0.0);
        let flipped = KernelFunctionals { omega: -kf.omega, ..kf };
        let (a, b) = (eig_pt_closed(&kf), eig_pt_closed(&flipped));
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-16);
        }
    }

    #[test]
    fn numeric_eigenvalue_examples() {
        let quarter = DMatrix::from_diagonal_element(4, 4, c(0.25));
        assert_eq!(eig_hermitian(&quarter).unwrap(), vec![0.25; 4]);
        let mut diag = Matrix4::<Complex64>::zeros();
        diag[(0, 0)] = c(1.0);
        assert_eq!(eig_hermitian4(&diag).unwrap(), [1.0, 0.0, 0.0, 0.0]);
        let mut skew = DMatrix::from_element(2, 2, c(0.0));
        skew[(0, 1)] = c(1.0);
        assert!(matches!(eig_hermitian(&skew), Err(SpectraError::NotHermitian { .. })));
    }

    #[test]
    fn closed_form_matches_numeric_q_pt() {
        let kf = KernelFunctionals::pair(0.8, 0.3, Complex64::new(-0.2, 0.35), 1.2, 0.4);
        let bundle = crate::state::build_factorization(&kf).unwrap();
        let numeric = eig_hermitian4(&bundle.q_pt).unwrap();
        let closed = sorted_descending(eig_pt_closed(&kf));
        for (x, y) in closed.iter().zip(&numeric) {
            assert!((x - y).abs() < 1e-14, "{closed:?} vs {numeric:?}");
        }
    }

    #[test]
    fn negativity_examples() {
        assert_eq!(negativity(&[0.5, 0.3, 0.2, 0.0]), 0.0);
        assert!((negativity(&[0.6, 0.5, 0.1, -0.2]) - 0.2).abs() < 1e-16);
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(&[1.0, 0.0]), 0.0);
        assert!((entropy(&[0.5, 0.5]) - LN_2).abs() < 1e-15);
        assert_eq!(entropy(&[1.0, -1e-17]), 0.0);
    }

    #[test]
    fn gamma_examples() {
        let kf = KernelFunctionals::pair(0.0, 0.0, Complex64::new(0.0, 0.0), 0.0, 0.0);
        assert_eq!(gamma_diagnostics(&kf), (0.0, 0.0));
        let kf = KernelFunctionals::pair(0.6, 0.2, Complex64::new(-0.3, 0.25), 0.0, 0.0);
        let (gm, gp) = gamma_diagnostics(&kf);
        let (fa, fb) = (kf.f_a, kf.f_b);
        let direct = |s: f64| {
            1.0 + fa * fa * fb * fb - fa * fa - fb * fb
                + s * 2.0 * (kf.omega.cosh() - (2.0 * kf.theta).cos()) * fa * fb
        };
        assert!((gm - direct(-1.0)).abs() < 1e-15 && (gp - direct(1.0)).abs() < 1e-15);
        let identity = 4.0 * (kf.omega.cosh() - (2.0 * kf.theta).cos()) * fa * fb;
        assert!((gp - gm - identity).abs() < 1e-15);
    }

    #[test]
    fn report_single_and_pair() {
        let single = spectral_report(&KernelFunctionals::single(0.4, 0.7)).unwrap();
        assert!(single.eig_pair.is_none() && single.negativity.is_none());
        assert!(single.residual_closed_vs_numeric < 1e-15);
        let pair = spectral_report(&KernelFunctionals::pair(0.4, 0.9, Complex64::new(-0.3, 0.2), 0.7, -0.2)).unwrap();
        assert!(pair.residual_closed_vs_numeric < 1e-13);
        assert!(pair.negativity.unwrap() < 1e-15);
        let sum: f64 = pair.eig_pt.unwrap().iter().sum();
        assert!((sum - 1.0).abs() < 1e-14);
        assert!(pair.gamma_minus.unwrap() <= pair.gamma_plus.unwrap());
    }
}
