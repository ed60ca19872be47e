//! Evolved detector density matrices in the gap-free tilde bases.
//!
//! Single detector basis: `{|g̃⟩, |ẽ⟩}`. Pair basis: `{|g̃g̃⟩, |g̃ẽ⟩, |ẽg̃⟩, |ẽẽ⟩}`
//! with detector A's index varying slowest, so basis index `2a + b`.
//! The pair formulas assume detector A is switched no later than B.

use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64;
use thiserror::Error;

use crate::kernel::KernelFunctionals;
use crate::quadrature::compensated_sum;

pub type DensityMatrix2 = Matrix2<Complex64>;
pub type DensityMatrix4 = Matrix4<Complex64>;

pub const TRACE_TOLERANCE: f64 = 1e-9;
pub const FACTORIZATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StateError {
    #[error("trace of the assembled density matrix is {trace}, off by more than {TRACE_TOLERANCE:e}")]
    TraceViolation { trace: Complex64 },
    #[error("factorization residual {residual:e} exceeds {FACTORIZATION_TOLERANCE:e}")]
    FactorizationMismatch { residual: f64 },
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn phase(angle: f64) -> Complex64 {
    Complex64::from_polar(1.0, angle)
}

/// `ρ_A = ½ [[1 + f cos 2C, -i f sin 2C], [i f sin 2C, 1 - f cos 2C]]`.
pub fn rho_single(kf: &KernelFunctionals) -> DensityMatrix2 {
    let (s, co) = (2.0 * kf.c_a).sin_cos();
    let f = kf.f_a;
    Matrix2::new(
        c(0.5 * (1.0 + f * co), 0.0),
        c(0.0, -0.5 * f * s),
        c(0.0, 0.5 * f * s),
        c(0.5 * (1.0 - f * co), 0.0),
    )
}

/// Matrix element `f2^{(jklm)}` for signs `j, k, l, m ∈ {+1, -1}`; `j`, `l`
/// flip detector B and `k`, `m` flip detector A.
pub fn f2_element(j: i8, k: i8, l: i8, m: i8, kf: &KernelFunctionals) -> Complex64 {
    let (j, k, l, m) = (j as f64, k as f64, l as f64, m as f64);
    let (fa, fb) = (kf.f_a, kf.f_b);
    // f_p e^{2iθ} and f_m e^{-2iθ}
    let p = kf.product_exp(1.0);
    let q = kf.product_exp(-1.0);
    let th = phase(2.0 * kf.theta);
    let ca = phase(2.0 * kf.c_a);
    let cb = phase(2.0 * kf.c_b);
    let terms = [
        c(1.0 + j * l + k * m + j * k * l * m, 0.0),
        (th.conj() * (k * m) + th) * cb.conj() * (l * fb),
        ca.conj() * (m * fa * (1.0 + j * l)),
        (th.conj() + th * (k * m)) * cb * (j * fb),
        ca * (k * fa * (1.0 + j * l)),
        ca * cb * (j * k * p),
        (ca * cb).conj() * (m * l * p),
        ca.conj() * cb * (j * m * q),
        ca * cb.conj() * (k * l * q),
    ];
    compensated_sum(terms) / 16.0
}

/// Signs `(B flip, A flip)` labelling basis index `i`.
pub fn index_signs(i: usize) -> (i8, i8) {
    match i {
        0 => (1, 1),
        1 => (-1, 1),
        2 => (1, -1),
        3 => (-1, -1),
        _ => panic!("basis index {i} out of range"),
    }
}

/// Assemble `ρ_AB` without checking the trace.
pub fn rho_pair_unchecked(kf: &KernelFunctionals) -> DensityMatrix4 {
    Matrix4::from_fn(|r, col| {
        let (j, k) = index_signs(col);
        let (l, m) = index_signs(r);
        f2_element(j, k, l, m, kf)
    })
}

pub fn rho_pair(kf: &KernelFunctionals) -> Result<DensityMatrix4, StateError> {
    let rho = rho_pair_unchecked(kf);
    let trace = rho.trace();
    if !((trace - 1.0).norm() <= TRACE_TOLERANCE) {
        return Err(StateError::TraceViolation { trace });
    }
    Ok(rho)
}

/// Partial transpose over detector A: `ρ^{tA}[(a,b),(a',b')] = ρ[(a',b),(a,b')]`.
pub fn partial_transpose_a(rho: &DensityMatrix4) -> DensityMatrix4 {
    Matrix4::from_fn(|r, col| {
        let (a, b) = (r / 2, r % 2);
        let (a2, b2) = (col / 2, col % 2);
        rho[(2 * a2 + b, 2 * a + b2)]
    })
}

/// Relabel detectors: conjugate by the swap of the two tensor factors.
pub fn swap_detectors(rho: &DensityMatrix4) -> DensityMatrix4 {
    let perm = [0, 2, 1, 3];
    Matrix4::from_fn(|r, col| rho[(perm[r], perm[col])])
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorizationBundle {
    pub w: Matrix4<Complex64>,
    pub q: Matrix4<Complex64>,
    pub v: Matrix4<Complex64>,
    pub q_pt: Matrix4<Complex64>,
}

impl FactorizationBundle {
    /// `W†QW`.
    pub fn reconstruct(&self) -> Matrix4<Complex64> {
        self.w.adjoint() * self.q * self.w
    }

    /// `V†Q^{tA}V`.
    pub fn reconstruct_pt(&self) -> Matrix4<Complex64> {
        self.v.adjoint() * self.q_pt * self.v
    }
}

const SIGN_PATTERN: [[f64; 4]; 4] = [
    [1.0, 1.0, 1.0, 1.0],
    [1.0, -1.0, 1.0, -1.0],
    [1.0, 1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0, 1.0],
];

fn phased_pattern(row_phase: [Complex64; 4]) -> Matrix4<Complex64> {
    Matrix4::from_fn(|r, col| row_phase[r] * (0.5 * SIGN_PATTERN[r][col]))
}

/// `Q` with `e^{sω}` in the anti-diagonal corners and `e^{-sω}` in the
/// inner anti-diagonal; `s = 1` gives `Q`, `s = -1` gives `Q^{tA}`.
fn q_matrix(kf: &KernelFunctionals, sign: f64) -> Matrix4<Complex64> {
    let one = c(1.0, 0.0);
    let fa = c(kf.f_a, 0.0);
    let th = phase(2.0 * kf.theta);
    let fb_minus = th.conj() * kf.f_b;
    let fb_plus = th * kf.f_b;
    let outer = c(kf.product_exp(sign), 0.0);
    let inner = c(kf.product_exp(-sign), 0.0);
    Matrix4::new(
        one, fb_minus, fa, outer, //
        fb_plus, one, inner, fa, //
        fa, inner, one, fb_plus, //
        outer, fa, fb_minus, one,
    ) * c(0.25, 0.0)
}

pub fn build_factorization_unchecked(kf: &KernelFunctionals) -> FactorizationBundle {
    let (a, b) = (kf.c_a, kf.c_b);
    let w = phased_pattern([phase(-a - b), phase(-a + b), phase(a - b), phase(a + b)]);
    let v = phased_pattern([phase(a - b), phase(a + b), phase(-a - b), phase(-a + b)]);
    FactorizationBundle {
        w,
        q: q_matrix(kf, 1.0),
        v,
        q_pt: q_matrix(kf, -1.0),
    }
}

/// The unitaries `W`, `V` and the amplitude-free `Q`, `Q^{tA}`, checked to
/// reproduce `ρ_AB` and its partial transpose.
pub fn build_factorization(kf: &KernelFunctionals) -> Result<FactorizationBundle, StateError> {
    let bundle = build_factorization_unchecked(kf);
    let rho = rho_pair_unchecked(kf);
    let residual = max_abs_diff(&bundle.reconstruct(), &rho)
        .max(max_abs_diff(&bundle.reconstruct_pt(), &partial_transpose_a(&rho)));
    if !(residual <= FACTORIZATION_TOLERANCE) {
        return Err(StateError::FactorizationMismatch { residual });
    }
    Ok(bundle)
}

/// Largest elementwise modulus of `a - b`.
pub fn max_abs_diff<const N: usize>(
    a: &nalgebra::SMatrix<Complex64, N, N>,
    b: &nalgebra::SMatrix<Complex64, N, N>,
) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// `max |M - M†|`.
pub fn hermiticity_residual<const N: usize>(m: &nalgebra::SMatrix<Complex64, N, N>) -> f64 {
    max_abs_diff(m, &m.adjoint())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix4;

    fn sample() -> KernelFunctionals {
        KernelFunctionals::pair(0.7, 0.4, Complex64::new(-0.25, 0.31), 0.9, -1.7)
    }

    fn kron2(a: &DensityMatrix2, b: &DensityMatrix2) -> DensityMatrix4 {
        Matrix4::from_fn(|r, col| a[(r / 2, col / 2)] * b[(r % 2, col % 2)])
    }

    #[test]
    fn single_examples() {
        let ground = rho_single(&KernelFunctionals::single(0.0, 0.0));
        assert_eq!(ground, Matrix2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)));
        let kf = KernelFunctionals::single(0.8, 0.0);
        let rho = rho_single(&kf);
        assert_eq!(rho[(0, 0)].re, 0.5 * (1.0 + kf.f_a));
        assert_eq!(rho[(1, 1)].re, 0.5 * (1.0 - kf.f_a));
        assert_eq!(rho[(0, 1)].norm(), 0.0);
    }

    #[test]
    fn decoupled_pair_is_ground_state() {
        let kf = KernelFunctionals::pair(0.0, 0.0, Complex64::new(0.0, 0.0), 0.0, 0.0);
        assert_eq!(f2_element(1, 1, 1, 1, &kf), c(1.0, 0.0));
        let rho = rho_pair(&kf).unwrap();
        let mut expect = Matrix4::zeros();
        expect[(0, 0)] = c(1.0, 0.0);
        assert!(max_abs_diff(&rho, &expect) < 1e-16);
    }

    #[test]
    fn uncoupled_b_factorizes() {
        let single = KernelFunctionals::single(0.6, 0.45);
        let pair = KernelFunctionals::pair(0.6, 0.0, Complex64::new(0.0, 0.0), 0.45, 0.0);
        let ground = Matrix2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0));
        let expect = kron2(&rho_single(&single), &ground);
        assert!(max_abs_diff(&rho_pair(&pair).unwrap(), &expect) < 1e-15);
        assert!(max_abs_diff(&rho_pair(&single).unwrap(), &expect) < 1e-15);
    }

    #[test]
    fn f2_hermiticity_over_all_index_pairs() {
        let kf = sample();
        let signs = [1i8, -1];
        for &j in &signs {
            for &k in &signs {
                for &l in &signs {
                    for &m in &signs {
                        let lhs = f2_element(j, k, l, m, &kf);
                        let rhs = f2_element(l, m, j, k, &kf).conj();
                        assert!((lhs - rhs).norm() < 1e-16);
                    }
                }
            }
        }
    }

    #[test]
    fn bottom_right_matches_direct_bracket() {
        // f2^{(----)} written out by hand from the bracket with f_p, f_m
        // built directly from their definitions
        let kf = sample();
        let (fa, fb, th) = (kf.f_a, kf.f_b, kf.theta);
        let i = Complex64::i();
        let fp = fa * fb * (kf.omega - 2.0 * i * th).exp();
        let fm = fa * fb * (-kf.omega + 2.0 * i * th).exp();
        let e = |x: Complex64| x.exp();
        let (ca, cb) = (kf.c_a, kf.c_b);
        let bracket = 4.0
            - fb * (e(-2.0 * i * th) + e(2.0 * i * th)) * e(-2.0 * i * cb)
            - 2.0 * fa * e(-2.0 * i * ca)
            - fb * (e(-2.0 * i * th) + e(2.0 * i * th)) * e(2.0 * i * cb)
            - 2.0 * fa * e(2.0 * i * ca)
            + fp * e(2.0 * i * th) * e(2.0 * i * (ca + cb))
            + fp.conj() * e(-2.0 * i * th) * e(-2.0 * i * (ca + cb))
            + fm * e(-2.0 * i * th) * e(2.0 * i * (cb - ca))
            + fm.conj() * e(2.0 * i * th) * e(2.0 * i * (ca - cb));
        let got = rho_pair(&kf).unwrap()[(3, 3)];
        assert!((got - bracket / 16.0).norm() < 1e-15);
    }

    #[test]
    fn partial_transpose_examples() {
        let rho = rho_pair(&sample()).unwrap();
        assert_eq!(partial_transpose_a(&partial_transpose_a(&rho)), rho);
        let mut diag = Matrix4::zeros();
        diag[(0, 0)] = c(1.0, 0.0);
        assert_eq!(partial_transpose_a(&diag), diag);
        let pt = partial_transpose_a(&rho);
        assert!((pt.trace() - rho.trace()).norm() < 1e-15);
        assert!(hermiticity_residual(&pt) < 1e-15);
        // layout: row 0 of ρ^{tA} is (f2(++++), f2(-+++), f2(+++-), f2(-++-))
        let kf = sample();
        assert_eq!(pt[(0, 2)], f2_element(1, 1, 1, -1, &kf));
        assert_eq!(pt[(1, 2)], f2_element(1, 1, -1, -1, &kf));
        assert_eq!(pt[(3, 0)], f2_element(1, -1, -1, 1, &kf));
    }

    #[test]
    fn factorization_reconstructs_both_matrices() {
        let kf = sample();
        let bundle = build_factorization(&kf).unwrap();
        let rho = rho_pair(&kf).unwrap();
        assert!(max_abs_diff(&bundle.reconstruct(), &rho) < 1e-15);
        assert!(max_abs_diff(&bundle.reconstruct_pt(), &partial_transpose_a(&rho)) < 1e-15);
        let id = Matrix4::<Complex64>::identity();
        assert!(max_abs_diff(&(bundle.w.adjoint() * bundle.w), &id) < 1e-15);
        assert!(max_abs_diff(&(bundle.v.adjoint() * bundle.v), &id) < 1e-15);
    }

    #[test]
    fn q_and_q_pt_differ_only_by_sign_of_omega() {
        let kf = sample();
        let flipped = KernelFunctionals { omega: -kf.omega, ..kf };
        let a = build_factorization_unchecked(&kf);
        let b = build_factorization_unchecked(&flipped);
        assert_eq!(a.q, b.q_pt);
        assert_eq!(a.q_pt, b.q);
    }

    #[test]
    fn vanishing_shifts_give_real_half_entries() {
        let kf = KernelFunctionals::pair(0.7, 0.4, Complex64::new(-0.25, 0.31), 0.0, 0.0);
        let b = build_factorization(&kf).unwrap();
        for z in b.w.iter() {
            assert_eq!(z.im, 0.0);
            assert_eq!(z.re.abs(), 0.5);
        }
    }

    #[test]
    fn trace_violation_is_reported() {
        let mut kf = sample();
        kf.f_a = f64::NAN;
        assert!(matches!(rho_pair(&kf), Err(StateError::TraceViolation { .. })));
    }

    #[test]
    fn swap_exchanges_tensor_factors() {
        let a = rho_single(&KernelFunctionals::single(0.3, 0.2));
        let b = rho_single(&KernelFunctionals::single(1.1, -0.7));
        assert_eq!(swap_detectors(&kron2(&a, &b)), kron2(&b, &a));
    }
}
