//! Brute-force check of the closed forms: the field is replaced by a finite
//! set of modes, each truncated at occupation `N`, and the detector unitaries
//! are applied to explicit state vectors.
//!
//! Every operator here is a sum of single-mode terms, so its exponential is a
//! Kronecker product of single-mode exponentials. Those are formed as dense
//! `(N+1)×(N+1)` matrices and applied axis by axis to tensor-shaped vectors,
//! which keeps memory linear in the total dimension `(N+1)^M`.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{beta, CoherentAmplitude, DetectorParams, FunctionalMode, KernelError, KernelFunctionals};
use crate::quadrature::solid_angle;

pub const DEFAULT_BUDGET: usize = 4096;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("truncated dimension {dimension:?} exceeds the budget of {budget}")]
    BudgetExceeded { dimension: Option<usize>, budget: usize },
    #[error("invalid mode grid: {0}")]
    InvalidGrid(String),
    #[error("{0}")]
    InvalidSystem(&'static str),
    #[error("functionals admit no mode realization: {0}")]
    NotRealizable(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub k: Vec<f64>,
    /// Measure volume represented by this mode.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeGrid {
    pub modes: Vec<Mode>,
    /// Maximum occupation kept per mode.
    pub truncation: usize,
    pub budget: usize,
}

impl ModeGrid {
    pub fn new(modes: Vec<Mode>, truncation: usize) -> Result<Self, OracleError> {
        let Some(first) = modes.first() else {
            return Err(OracleError::InvalidGrid("no modes".into()));
        };
        let n = first.k.len();
        for m in &modes {
            if m.k.len() != n {
                return Err(OracleError::InvalidGrid("modes of mixed dimension".into()));
            }
            if !(m.weight > 0.0 && m.weight.is_finite()) || m.k.iter().any(|x| !x.is_finite()) {
                return Err(OracleError::InvalidGrid("weights must be positive and finite".into()));
            }
            if m.k.iter().all(|&x| x == 0.0) {
                return Err(OracleError::InvalidGrid("the zero mode is excluded".into()));
            }
        }
        if truncation == 0 {
            return Err(OracleError::InvalidGrid("truncation must be at least 1".into()));
        }
        Ok(Self {
            modes,
            truncation,
            budget: DEFAULT_BUDGET,
        })
    }

    /// `count` midpoint nodes on `(0, k_max)` along `direction`, each carrying
    /// the full spherical shell `S_n k^{n-1} Δk`. For co-located, isotropic
    /// detectors and vacuum, its grid functionals are midpoint quadratures of
    /// the continuum integrals.
    pub fn radial(direction: &[f64], k_max: f64, count: usize, truncation: usize) -> Result<Self, OracleError> {
        let n = direction.len();
        let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) || !(k_max > 0.0 && k_max.is_finite()) || count == 0 {
            return Err(OracleError::InvalidGrid("need a nonzero direction, k_max > 0 and count > 0".into()));
        }
        let shell = solid_angle(n);
        let dk = k_max / count as f64;
        let modes = (0..count)
            .map(|j| {
                let k = (j as f64 + 0.5) * dk;
                Mode {
                    k: direction.iter().map(|d| d / norm * k).collect(),
                    weight: shell * k.powi(n as i32 - 1) * dk,
                }
            })
            .collect();
        Self::new(modes, truncation)
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    pub fn dimension(&self) -> Option<usize> {
        (self.truncation + 1).checked_pow(self.modes.len() as u32)
    }

    pub fn check_budget(&self) -> Result<usize, OracleError> {
        match self.dimension() {
            Some(d) if d <= self.budget => Ok(d),
            dimension => Err(OracleError::BudgetExceeded {
                dimension,
                budget: self.budget,
            }),
        }
    }

    /// `f(k_j) √w_j` for every mode.
    pub fn amplitudes(&self, f: impl Fn(&[f64]) -> Complex64) -> Vec<Complex64> {
        self.modes.iter().map(|m| f(&m.k) * m.weight.sqrt()).collect()
    }
}

/// Which detector unitary acts first in the pair evolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApplicationOrder {
    /// Earlier switching time first; A first on ties.
    #[default]
    ByTime,
    AFirst,
    BFirst,
}

/// `exp(±Y)` for one detector, per mode.
#[derive(Debug, Clone)]
struct ModeExponentials {
    plus: Vec<DMatrix<Complex64>>,
    minus: Vec<DMatrix<Complex64>>,
}

#[derive(Debug, Clone)]
pub struct OracleSystem {
    pub truncation: usize,
    pub b_a: Vec<Complex64>,
    pub b_b: Option<Vec<Complex64>>,
    pub alpha: Vec<Complex64>,
    /// Per-mode factors of `Y_A`, `Y_B` and `D_α`; the full operators are
    /// their Kronecker sums (for `Y`) or products (for `D_α`).
    pub y_a: Vec<DMatrix<Complex64>>,
    pub y_b: Option<Vec<DMatrix<Complex64>>>,
    pub displacement: Vec<DMatrix<Complex64>>,
    pub order: ApplicationOrder,
    a_first: bool,
    exp_a: ModeExponentials,
    exp_b: Option<ModeExponentials>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleResult<M> {
    pub rho: M,
    /// Norm of the evolved state's components with some mode at the
    /// truncation level.
    pub truncation_tail: f64,
}

fn creation(levels: usize) -> DMatrix<Complex64> {
    let mut a = DMatrix::zeros(levels, levels);
    for n in 0..levels - 1 {
        a[(n + 1, n)] = Complex64::new(((n + 1) as f64).sqrt(), 0.0);
    }
    a
}

/// `(b/2) a† − (b*/2) a` on one truncated mode.
fn mode_generator(b: Complex64, levels: usize) -> DMatrix<Complex64> {
    let up = creation(levels);
    let down = up.adjoint();
    up * (b * 0.5) - down * (b.conj() * 0.5)
}

fn exponentials(gens: &[DMatrix<Complex64>]) -> ModeExponentials {
    ModeExponentials {
        plus: gens.iter().map(|y| y.exp()).collect(),
        minus: gens.iter().map(|y| (-y).exp()).collect(),
    }
}

fn apply_axis(op: &DMatrix<Complex64>, axis: usize, modes: usize, levels: usize, v: &mut [Complex64]) {
    let stride = levels.pow((modes - 1 - axis) as u32);
    let outer = v.len() / (stride * levels);
    let mut x = DVector::zeros(levels);
    for o in 0..outer {
        let base = o * stride * levels;
        for s in 0..stride {
            for i in 0..levels {
                x[i] = v[base + i * stride + s];
            }
            let y = op * &x;
            for i in 0..levels {
                v[base + i * stride + s] = y[i];
            }
        }
    }
}

fn apply_product(ops: &[DMatrix<Complex64>], levels: usize, v: &[Complex64]) -> Vec<Complex64> {
    let mut out = v.to_vec();
    for (axis, op) in ops.iter().enumerate() {
        apply_axis(op, axis, ops.len(), levels, &mut out);
    }
    out
}

fn inner(u: &[Complex64], v: &[Complex64]) -> Complex64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

fn tail_norm_sq(v: &[Complex64], modes: usize, levels: usize) -> f64 {
    v.iter()
        .enumerate()
        .filter(|(idx, _)| {
            let mut rest = *idx;
            (0..modes).any(|_| {
                let digit = rest % levels;
                rest /= levels;
                digit == levels - 1
            })
        })
        .map(|(_, c)| c.norm_sqr())
        .sum()
}

impl OracleSystem {
    /// Build from per-mode amplitudes `β_ν(k_j)√w_j` and `α(k_j)√w_j`.
    pub fn from_amplitudes(
        b_a: Vec<Complex64>,
        b_b: Option<Vec<Complex64>>,
        alpha: Vec<Complex64>,
        truncation: usize,
        budget: usize,
    ) -> Result<Self, OracleError> {
        let m = b_a.len();
        if m == 0 || alpha.len() != m || b_b.as_ref().is_some_and(|b| b.len() != m) {
            return Err(OracleError::InvalidGrid("amplitude vectors must share one nonempty grid".into()));
        }
        if truncation == 0 {
            return Err(OracleError::InvalidGrid("truncation must be at least 1".into()));
        }
        match (truncation + 1).checked_pow(m as u32) {
            Some(d) if d <= budget => {}
            dimension => return Err(OracleError::BudgetExceeded { dimension, budget }),
        }
        let levels = truncation + 1;
        let y_a: Vec<_> = b_a.iter().map(|&b| mode_generator(b, levels)).collect();
        let y_b: Option<Vec<_>> = b_b.as_ref().map(|bs| bs.iter().map(|&b| mode_generator(b, levels)).collect());
        let displacement = alpha.iter().map(|&a| mode_generator(a * 2.0, levels).exp()).collect();
        let exp_a = exponentials(&y_a);
        let exp_b = y_b.as_deref().map(exponentials);
        Ok(Self {
            truncation,
            b_a,
            b_b,
            alpha,
            y_a,
            y_b,
            displacement,
            order: ApplicationOrder::AFirst,
            a_first: true,
            exp_a,
            exp_b,
        })
    }

    pub fn with_order(mut self, order: ApplicationOrder) -> Self {
        self.order = order;
        match order {
            ApplicationOrder::AFirst => self.a_first = true,
            ApplicationOrder::BFirst => self.a_first = false,
            ApplicationOrder::ByTime => {}
        }
        self
    }

    fn levels(&self) -> usize {
        self.truncation + 1
    }

    fn modes(&self) -> usize {
        self.b_a.len()
    }

    pub fn dimension(&self) -> usize {
        self.levels().pow(self.modes() as u32)
    }

    /// Max over modes of `‖Y_j† + Y_j‖`, elementwise.
    pub fn anti_hermiticity_residual(&self) -> f64 {
        self.y_a
            .iter()
            .chain(self.y_b.iter().flatten())
            .map(|y| (y.adjoint() + y).iter().map(|c| c.norm()).fold(0.0, f64::max))
            .fold(0.0, f64::max)
    }

    /// Max over modes of `‖D_j† D_j − 1‖`, elementwise.
    pub fn displacement_unitarity_residual(&self) -> f64 {
        let id = DMatrix::<Complex64>::identity(self.levels(), self.levels());
        self.displacement
            .iter()
            .map(|d| (d.adjoint() * d - &id).iter().map(|c| c.norm()).fold(0.0, f64::max))
            .fold(0.0, f64::max)
    }

    /// `D_α|0⟩`.
    pub fn field_state(&self) -> Vec<Complex64> {
        let mut v = vec![Complex64::new(0.0, 0.0); self.dimension()];
        v[0] = Complex64::new(1.0, 0.0);
        apply_product(&self.displacement, self.levels(), &v)
    }

    /// `(cosh Y ψ, sinh Y ψ)`.
    fn cosh_sinh(&self, exps: &ModeExponentials, v: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let p = apply_product(&exps.plus, self.levels(), v);
        let m = apply_product(&exps.minus, self.levels(), v);
        let cosh = p.iter().zip(&m).map(|(a, b)| (a + b) * 0.5).collect();
        let sinh = p.iter().zip(&m).map(|(a, b)| (a - b) * 0.5).collect();
        (cosh, sinh)
    }

    /// Apply `exp(m ⊗ Y)` with `m = σ_x` on the qubit `slot` (0 for A, 1 for B)
    /// of the branch vectors `ψ_{2a+b}`.
    fn apply_detector(&self, exps: &ModeExponentials, slot: usize, branches: &mut [Vec<Complex64>; 4]) {
        let zero = vec![Complex64::new(0.0, 0.0); self.dimension()];
        let flip = if slot == 0 { 2 } else { 1 };
        let mut out: [Vec<Complex64>; 4] = std::array::from_fn(|_| zero.clone());
        for i in 0..4 {
            if branches[i].iter().all(|c| *c == Complex64::new(0.0, 0.0)) {
                continue;
            }
            let (c, s) = self.cosh_sinh(exps, &branches[i]);
            for (o, x) in out[i].iter_mut().zip(&c) {
                *o += x;
            }
            for (o, x) in out[i ^ flip].iter_mut().zip(&s) {
                *o += x;
            }
        }
        *branches = out;
    }

    fn tail(&self, branches: &[Vec<Complex64>]) -> f64 {
        branches
            .iter()
            .map(|v| tail_norm_sq(v, self.modes(), self.levels()))
            .sum::<f64>()
            .sqrt()
    }

    /// `e^{Y_A}e^{Y_B}` against `e^{iθ}e^{Y_B}e^{Y_A}` on every basis vector
    /// whose occupations are all at most `probe_occupation`; returns the
    /// largest vector-norm discrepancy.
    pub fn bch_residual(&self, theta: f64, probe_occupation: usize) -> Result<f64, OracleError> {
        let exp_b = self.exp_b.as_ref().ok_or(OracleError::InvalidSystem("BCH check needs two detectors"))?;
        let levels = self.levels();
        let phase = Complex64::from_polar(1.0, theta);
        let mut worst: f64 = 0.0;
        for idx in 0..self.dimension() {
            let mut rest = idx;
            let low = (0..self.modes()).all(|_| {
                let d = rest % levels;
                rest /= levels;
                d <= probe_occupation
            });
            if !low {
                continue;
            }
            let mut v = vec![Complex64::new(0.0, 0.0); self.dimension()];
            v[idx] = Complex64::new(1.0, 0.0);
            let ab = apply_product(&self.exp_a.plus, levels, &apply_product(&exp_b.plus, levels, &v));
            let ba = apply_product(&exp_b.plus, levels, &apply_product(&self.exp_a.plus, levels, &v));
            let diff: f64 = ab.iter().zip(&ba).map(|(x, y)| (x - phase * y).norm_sqr()).sum();
            worst = worst.max(diff.sqrt());
        }
        Ok(worst)
    }
}

/// Discretize detectors and coherent amplitude on `grid`.
pub fn discretize(
    det_a: &DetectorParams,
    det_b: Option<&DetectorParams>,
    alpha: &CoherentAmplitude,
    n: usize,
    grid: &ModeGrid,
) -> Result<OracleSystem, OracleError> {
    det_a.validate(n)?;
    if let Some(b) = det_b {
        b.validate(n)?;
    }
    alpha.validate(n)?;
    if grid.modes[0].k.len() != n {
        return Err(OracleError::InvalidGrid(format!("grid is not {n}-dimensional")));
    }
    grid.check_budget()?;
    let b_a = grid.amplitudes(|k| beta(det_a, k));
    let b_b = det_b.map(|d| grid.amplitudes(|k| beta(d, k)));
    let a = grid.amplitudes(|k| alpha.evaluate(k));
    let mut sys = OracleSystem::from_amplitudes(b_a, b_b, a, grid.truncation, grid.budget)?;
    sys.a_first = det_b.is_none_or(|b| det_a.switch_time <= b.switch_time);
    sys.order = ApplicationOrder::ByTime;
    Ok(sys)
}

/// `I`, `Z`, `C` as grid sums, packaged like the continuum functionals.
pub fn functionals_from_amplitudes(
    b_a: &[Complex64],
    b_b: Option<&[Complex64]>,
    alpha: &[Complex64],
) -> KernelFunctionals {
    let norm = |b: &[Complex64]| b.iter().map(|x| x.norm_sqr()).sum::<f64>();
    let shift = |b: &[Complex64]| b.iter().zip(alpha).map(|(x, a)| x * a.conj()).sum::<Complex64>().im;
    match b_b {
        None => KernelFunctionals::single(norm(b_a), shift(b_a)),
        Some(b_b) => {
            let z: Complex64 = b_a.iter().zip(b_b).map(|(a, b)| a.conj() * b).sum();
            KernelFunctionals::pair(norm(b_a), norm(b_b), z, shift(b_a), shift(b_b))
        }
    }
}

pub fn grid_functionals(
    det_a: &DetectorParams,
    det_b: Option<&DetectorParams>,
    alpha: &CoherentAmplitude,
    grid: &ModeGrid,
) -> KernelFunctionals {
    let b_a = grid.amplitudes(|k| beta(det_a, k));
    let b_b = det_b.map(|d| grid.amplitudes(|k| beta(d, k)));
    let a = grid.amplitudes(|k| alpha.evaluate(k));
    functionals_from_amplitudes(&b_a, b_b.as_deref(), &a)
}

impl OracleSystem {
    pub fn functionals(&self) -> KernelFunctionals {
        functionals_from_amplitudes(&self.b_a, self.b_b.as_deref(), &self.alpha)
    }
}

/// `⟨β₂|β₁⟩` for coherent states `|β⟩ = D(β)|0⟩`, as an explicit inner
/// product of truncated vectors. The states are mode products, so the
/// overlap factorizes and no tensor-space budget applies.
pub fn oracle_overlap(b1: &[Complex64], b2: &[Complex64], truncation: usize) -> Complex64 {
    assert_eq!(b1.len(), b2.len(), "amplitudes must share a grid");
    let levels = truncation + 1;
    let column = |b: Complex64| mode_generator(b * 2.0, levels).exp().column(0).into_owned();
    b1.iter()
        .zip(b2)
        .map(|(&x, &y)| column(y).dotc(&column(x)))
        .product()
}

/// Mode amplitudes `b_A`, `b_B` (pairs only) and `α`.
pub type Realization = (Vec<Complex64>, Option<Vec<Complex64>>, Vec<Complex64>);

/// Amplitudes on at most two modes whose grid functionals equal `kf`:
/// `b_A = (√I_A, 0)`, `b_B = (Z/√I_A, r)` with `r² = I_B - |Z|²/I_A`, and
/// the least-norm `α` that reproduces `C_A`, `C_B`. A single detector needs
/// one mode.
pub fn minimal_realization(kf: &KernelFunctionals) -> Result<Realization, OracleError> {
    let zero = Complex64::new(0.0, 0.0);
    let (b_a, b_b) = if kf.mode == FunctionalMode::Single {
        (vec![Complex64::new(kf.i_a.sqrt(), 0.0)], None)
    } else if kf.i_a > 0.0 {
        let root = kf.i_a.sqrt();
        let z = kf.cross();
        let r = (kf.i_b - z.norm_sqr() / kf.i_a).max(0.0).sqrt();
        (
            vec![Complex64::new(root, 0.0), zero],
            Some(vec![z / root, Complex64::new(r, 0.0)]),
        )
    } else {
        (vec![zero, zero], Some(vec![Complex64::new(kf.i_b.sqrt(), 0.0), zero]))
    };
    // Im(b α*) = Im(b) Re(α) - Re(b) Im(α), linear in (Re α_j, Im α_j)
    let row = |b: &[Complex64]| b.iter().flat_map(|x| [x.im, -x.re]).collect::<Vec<f64>>();
    let mut rows = vec![row(&b_a)];
    let mut rhs = vec![kf.c_a];
    if let Some(b) = &b_b {
        rows.push(row(b));
        rhs.push(kf.c_b);
    }
    let m = DMatrix::from_fn(rows.len(), 2 * b_a.len(), |i, j| rows[i][j]);
    let target = DVector::from_vec(rhs);
    let pinv = m
        .clone()
        .pseudo_inverse(1e-14)
        .map_err(|e| OracleError::NotRealizable(e.to_string()))?;
    let x = &pinv * &target;
    let miss = (&m * &x - &target).amax();
    if miss > 1e-12 * (1.0 + target.amax()) {
        return Err(OracleError::NotRealizable(format!("coherent shifts missed by {miss:e}")));
    }
    let alpha = (0..b_a.len()).map(|j| Complex64::new(x[2 * j], x[2 * j + 1])).collect();
    Ok((b_a, b_b, alpha))
}

impl OracleSystem {
    /// Oracle system realizing `kf` exactly on one or two modes.
    pub fn realize(kf: &KernelFunctionals, truncation: usize, budget: usize) -> Result<Self, OracleError> {
        let (b_a, b_b, alpha) = minimal_realization(kf)?;
        Self::from_amplitudes(b_a, b_b, alpha, truncation, budget)
    }
}

/// `(f_p, f_m) = (⟨−β_B|β_A⟩, ⟨β_B|β_A⟩)` as direct truncated overlaps.
pub fn direct_fp_fm(b_a: &[Complex64], b_b: &[Complex64], truncation: usize) -> (Complex64, Complex64) {
    let neg: Vec<Complex64> = b_b.iter().map(|b| -b).collect();
    (oracle_overlap(b_a, &neg, truncation), oracle_overlap(b_a, b_b, truncation))
}

pub fn oracle_evolve_single(sys: &OracleSystem) -> Result<OracleResult<Matrix2<Complex64>>, OracleError> {
    if sys.exp_b.is_some() {
        return Err(OracleError::InvalidSystem("single evolution needs a one-detector system"));
    }
    let psi = sys.field_state();
    let (g, e) = sys.cosh_sinh(&sys.exp_a, &psi);
    let branches = [g, e];
    let rho = Matrix2::from_fn(|r, c| inner(&branches[c], &branches[r]));
    Ok(OracleResult {
        rho,
        truncation_tail: sys.tail(&branches),
    })
}

pub fn oracle_evolve_pair(sys: &OracleSystem) -> Result<OracleResult<Matrix4<Complex64>>, OracleError> {
    let exp_b = sys.exp_b.as_ref().ok_or(OracleError::InvalidSystem("pair evolution needs two detectors"))?;
    let zero = vec![Complex64::new(0.0, 0.0); sys.dimension()];
    let mut branches: [Vec<Complex64>; 4] = std::array::from_fn(|_| zero.clone());
    branches[0] = sys.field_state();
    if sys.a_first {
        sys.apply_detector(&sys.exp_a, 0, &mut branches);
        sys.apply_detector(exp_b, 1, &mut branches);
    } else {
        sys.apply_detector(exp_b, 1, &mut branches);
        sys.apply_detector(&sys.exp_a, 0, &mut branches);
    }
    let rho = Matrix4::from_fn(|r, c| inner(&branches[c], &branches[r]));
    Ok(OracleResult {
        rho,
        truncation_tail: sys.tail(&branches),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{max_abs_diff, rho_pair, rho_single, swap_detectors};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn vacuum_component_of_single_mode() {
        let sys = OracleSystem::from_amplitudes(vec![c(0.6, 0.8)], None, vec![c(0.0, 0.0)], 40, DEFAULT_BUDGET).unwrap();
        let mut v = vec![c(0.0, 0.0); 41];
        v[0] = c(1.0, 0.0);
        let once = apply_product(&sys.exp_a.plus, 41, &v);
        let twice = apply_product(&sys.exp_a.plus, 41, &once);
        assert!((twice[0] - c((-0.5f64).exp(), 0.0)).norm() < 1e-14);
        assert!((twice[0].re - 0.606531).abs() < 1e-6);
    }

    #[test]
    fn vacuum_displacement_is_identity() {
        let sys = OracleSystem::from_amplitudes(vec![c(0.3, 0.0); 2], None, vec![c(0.0, 0.0); 2], 6, DEFAULT_BUDGET).unwrap();
        for d in &sys.displacement {
            assert_eq!(d, &DMatrix::identity(7, 7));
        }
        assert!(sys.anti_hermiticity_residual() < 1e-12);
        assert!(sys.displacement_unitarity_residual() < 1e-12);
    }

    #[test]
    fn overlap_closed_form_values() {
        let one = [c(1.0, 0.0)];
        assert!((oracle_overlap(&one, &[c(0.0, 0.0)], 40) - c((-0.5f64).exp(), 0.0)).norm() < 1e-13);
        let v = oracle_overlap(&one, &[c(-1.0, 0.0)], 40);
        assert!((v.re - 0.135335).abs() < 1e-6 && (v.re - (-2f64).exp()).abs() < 1e-13);
        let b = [c(0.3, -0.4), c(-0.2, 0.9)];
        assert!((oracle_overlap(&b, &b, 40) - 1.0).norm() < 1e-13);
    }

    #[test]
    fn direct_fp_fm_match_phase_identities() {
        let b_a = [c(0.3, -0.2), c(0.1, 0.25)];
        let b_b = [c(-0.2, 0.1), c(0.35, 0.3)];
        let kf = functionals_from_amplitudes(&b_a, Some(&b_b), &[c(0.0, 0.0); 2]);
        let (fp, fm) = direct_fp_fm(&b_a, &b_b, 40);
        let fafb = kf.f_a * kf.f_b;
        let expect_p = Complex64::from_polar(fafb * kf.omega.exp(), -2.0 * kf.theta);
        let expect_m = Complex64::from_polar(fafb * (-kf.omega).exp(), 2.0 * kf.theta);
        assert!((fp - expect_p).norm() < 1e-13 && (fm - expect_m).norm() < 1e-13);
    }

    #[test]
    fn realization_reproduces_functionals() {
        let kf = KernelFunctionals::pair(0.8, 1.3, c(-0.3, 0.5), 0.4, -0.7);
        let (b_a, b_b, alpha) = minimal_realization(&kf).unwrap();
        let back = functionals_from_amplitudes(&b_a, b_b.as_deref(), &alpha);
        for (x, y) in [
            (back.i_a, kf.i_a),
            (back.i_b, kf.i_b),
            (back.theta, kf.theta),
            (back.omega, kf.omega),
            (back.c_a, kf.c_a),
            (back.c_b, kf.c_b),
        ] {
            assert!((x - y).abs() < 1e-14, "{x} vs {y}");
        }
        let single = KernelFunctionals::single(0.05, 0.2);
        let (b, none, a) = minimal_realization(&single).unwrap();
        assert!(none.is_none());
        let back = functionals_from_amplitudes(&b, None, &a);
        assert!((back.c_a - 0.2).abs() < 1e-15);
        assert!(matches!(
            minimal_realization(&KernelFunctionals::single(0.0, 0.1)),
            Err(OracleError::NotRealizable(_))
        ));
    }

    #[test]
    fn budget_is_enforced() {
        let err = OracleSystem::from_amplitudes(vec![c(0.1, 0.0); 3], None, vec![c(0.0, 0.0); 3], 20, DEFAULT_BUDGET);
        assert!(matches!(err, Err(OracleError::BudgetExceeded { dimension: Some(9261), .. })));
        let grid = ModeGrid::radial(&[1.0, 0.0, 0.0], 4.0, 64, 2).unwrap();
        assert!(matches!(grid.check_budget(), Err(OracleError::BudgetExceeded { dimension: None, .. })));
    }

    #[test]
    fn zero_coupling_single_stays_ground() {
        let sys = OracleSystem::from_amplitudes(vec![c(0.0, 0.0)], None, vec![c(0.5, 0.1)], 10, DEFAULT_BUDGET).unwrap();
        let out = oracle_evolve_single(&sys).unwrap();
        assert!(max_abs_diff(&out.rho, &Matrix2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0))) < 1e-14);
    }

    #[test]
    fn single_mode_matches_closed_form() {
        let b = vec![c(0.3, -0.5)];
        let a = vec![c(0.4, 0.2)];
        let sys = OracleSystem::from_amplitudes(b, None, a, 60, DEFAULT_BUDGET).unwrap();
        let out = oracle_evolve_single(&sys).unwrap();
        let kf = sys.functionals();
        assert!(kf.c_a.abs() > 0.05);
        assert!(max_abs_diff(&out.rho, &rho_single(&kf)) < 1e-8);
        assert!(out.truncation_tail < 1e-20);
    }

    #[test]
    fn two_mode_pair_matches_closed_form() {
        let b_a = vec![c(0.3, -0.2), c(0.1, 0.25)];
        let b_b = vec![c(-0.2, 0.1), c(0.35, 0.3)];
        let alpha = vec![c(0.2, 0.1), c(-0.3, 0.2)];
        let sys = OracleSystem::from_amplitudes(b_a, Some(b_b), alpha, 25, DEFAULT_BUDGET).unwrap();
        let kf = sys.functionals();
        assert!(kf.theta.abs() > 0.01);
        let out = oracle_evolve_pair(&sys).unwrap();
        assert!(max_abs_diff(&out.rho, &rho_pair(&kf).unwrap()) < 1e-8);
    }

    #[test]
    fn disjoint_supports_commute() {
        let b_a = vec![c(0.4, 0.1), c(0.0, 0.0)];
        let b_b = vec![c(0.0, 0.0), c(-0.2, 0.3)];
        let sys = OracleSystem::from_amplitudes(b_a, Some(b_b), vec![c(0.0, 0.0); 2], 12, DEFAULT_BUDGET).unwrap();
        let kf = sys.functionals();
        assert_eq!((kf.theta, kf.omega), (0.0, 0.0));
        let ab = oracle_evolve_pair(&sys).unwrap().rho;
        let ba = oracle_evolve_pair(&sys.clone().with_order(ApplicationOrder::BFirst)).unwrap().rho;
        assert!(max_abs_diff(&ab, &ba) < 1e-12);
    }

    #[test]
    fn application_order_matters_when_theta_nonzero() {
        let b_a = vec![c(0.5, 0.0)];
        let b_b = vec![c(0.0, 0.5)];
        let sys = OracleSystem::from_amplitudes(b_a, Some(b_b), vec![c(0.0, 0.0)], 30, DEFAULT_BUDGET).unwrap();
        let theta = sys.functionals().theta;
        assert!(theta.abs() > 0.1);
        let ab = oracle_evolve_pair(&sys).unwrap().rho;
        let ba = oracle_evolve_pair(&sys.clone().with_order(ApplicationOrder::BFirst)).unwrap().rho;
        let change = max_abs_diff(&ab, &ba);
        assert!(change > 1e-3 && change <= 2.0 * theta.abs());
        // reversed order is the closed form with the detectors relabelled
        let swapped = swap_detectors(&rho_pair(&sys.functionals().swapped()).unwrap());
        assert!(max_abs_diff(&ba, &swapped) < 1e-10);
    }

    #[test]
    fn bch_phase_holds_on_low_occupations() {
        let sys = OracleSystem::from_amplitudes(
            vec![c(0.4, 0.1), c(-0.2, 0.3)],
            Some(vec![c(0.1, -0.3), c(0.25, 0.2)]),
            vec![c(0.0, 0.0); 2],
            30,
            DEFAULT_BUDGET,
        )
        .unwrap();
        let theta = sys.functionals().theta;
        assert!(sys.bch_residual(theta, 4).unwrap() < 1e-12);
        assert!(sys.bch_residual(theta + 0.05, 4).unwrap() > 1e-3);
    }

    #[test]
    fn error_shrinks_with_truncation() {
        let b_a = vec![c(1.0, 0.5)];
        let alpha = vec![c(0.8, -0.4)];
        let mut last = f64::INFINITY;
        for n in [4, 8, 12, 16, 24] {
            let sys = OracleSystem::from_amplitudes(b_a.clone(), None, alpha.clone(), n, DEFAULT_BUDGET).unwrap();
            let out = oracle_evolve_single(&sys).unwrap();
            let err = max_abs_diff(&out.rho, &rho_single(&sys.functionals()));
            assert!(err <= last * 1.01 + 1e-15, "N={n}: {err} vs {last}");
            last = err;
        }
        assert!(last < 1e-8);
    }

    #[test]
    fn radial_grid_weights() {
        let grid = ModeGrid::radial(&[0.0, 2.0], 1.0, 4, 3).unwrap();
        let total: f64 = grid.modes.iter().map(|m| m.weight).sum();
        assert!((total - std::f64::consts::PI).abs() < 1e-12);
        assert_eq!(grid.modes[1].k, vec![0.0, 0.375]);
        assert_eq!(grid.dimension(), Some(256));
    }
}
