//! 21-point Gauss-Kronrod rule and a globally adaptive bisection driver for
//! complex-valued integrands on finite intervals.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;

use super::QuadratureError;

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_643_474_262,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for the odd-indexed Kronrod nodes XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Nodes of the rule mapped onto `[a, b]`, in ascending order, together with
/// their Kronrod weights. Exposed so that fixed grids can reuse the rule.
pub fn kronrod_nodes(a: f64, b: f64) -> Vec<(f64, f64)> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut nodes = Vec::with_capacity(21);
    for j in 0..10 {
        nodes.push((center - half * XGK[j], half * WGK[j]));
    }
    nodes.push((center, half * WGK[10]));
    for j in (0..10).rev() {
        nodes.push((center + half * XGK[j], half * WGK[j]));
    }
    nodes
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut scaled = err.abs();
    if res_asc != 0.0 && scaled != 0.0 {
        let scale = (200.0 * scaled / res_asc).powf(1.5);
        scaled = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        let min_err = 50.0 * f64::EPSILON * res_abs;
        if min_err > scaled {
            scaled = min_err;
        }
    }
    scaled
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Segment {
    pub a: f64,
    pub b: f64,
    pub value: Complex64,
    pub error: f64,
    pub splittable: bool,
}

/// Apply the 21-point rule on `[a, b]`.
pub(crate) fn qk21<F>(f: &F, a: f64, b: f64) -> Segment
where
    F: Fn(f64) -> Complex64 + ?Sized,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let abs_half = half.abs();

    let fc = f(center);
    let mut res_k = fc * WGK[10];
    let mut res_g = Complex64::new(0.0, 0.0);
    let mut abs_k = [fc.re.abs() * WGK[10], fc.im.abs() * WGK[10]];

    let mut fv1 = [Complex64::new(0.0, 0.0); 10];
    let mut fv2 = [Complex64::new(0.0, 0.0); 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        let sum = f1 + f2;
        res_k += sum * WGK[j];
        abs_k[0] += WGK[j] * (f1.re.abs() + f2.re.abs());
        abs_k[1] += WGK[j] * (f1.im.abs() + f2.im.abs());
        if j % 2 == 1 {
            res_g += sum * WG[j / 2];
        }
    }

    let mean = res_k * 0.5;
    let mut asc = [WGK[10] * (fc.re - mean.re).abs(), WGK[10] * (fc.im - mean.im).abs()];
    for j in 0..10 {
        asc[0] += WGK[j] * ((fv1[j].re - mean.re).abs() + (fv2[j].re - mean.re).abs());
        asc[1] += WGK[j] * ((fv1[j].im - mean.im).abs() + (fv2[j].im - mean.im).abs());
    }

    let diff = (res_k - res_g) * half;
    let err_re = rescale_error(diff.re, abs_k[0] * abs_half, asc[0] * abs_half);
    let err_im = rescale_error(diff.im, abs_k[1] * abs_half, asc[1] * abs_half);

    let value = res_k * half;
    let mid = center.abs().max(f64::MIN_POSITIVE);
    let splittable = abs_half > 4.0 * f64::EPSILON * mid && abs_half > f64::MIN_POSITIVE * 1e3;
    Segment {
        a,
        b,
        value,
        error: err_re.hypot(err_im),
        splittable,
    }
}

/// Neumaier-compensated sum of complex values.
pub(crate) fn compensated_sum<I: IntoIterator<Item = Complex64>>(values: I) -> Complex64 {
    let (mut sum_re, mut c_re) = (0.0_f64, 0.0_f64);
    let (mut sum_im, mut c_im) = (0.0_f64, 0.0_f64);
    for v in values {
        neumaier_step(&mut sum_re, &mut c_re, v.re);
        neumaier_step(&mut sum_im, &mut c_im, v.im);
    }
    Complex64::new(sum_re + c_re, sum_im + c_im)
}

#[inline]
fn neumaier_step(sum: &mut f64, comp: &mut f64, x: f64) {
    let t = *sum + x;
    if sum.abs() >= x.abs() {
        *comp += (*sum - t) + x;
    } else {
        *comp += (x - t) + *sum;
    }
    *sum = t;
}

pub(crate) struct Adaptive {
    pub value: Complex64,
    pub error: f64,
    pub segments: usize,
}

/// Globally adaptive bisection over the partition given by `breakpoints`
/// (ascending, at least two entries). Always refines the segment carrying the
/// largest error estimate.
pub(crate) fn adaptive<F>(
    f: &F,
    breakpoints: &[f64],
    abs_tol: f64,
    rel_tol: f64,
    max_segments: usize,
) -> Result<Adaptive, QuadratureError>
where
    F: Fn(f64) -> Complex64 + ?Sized,
{
    debug_assert!(breakpoints.len() >= 2);
    let mut segments: Vec<Segment> = breakpoints
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| qk21(f, w[0], w[1]))
        .collect();
    let mut heap: BinaryHeap<(ByError, usize)> = segments
        .iter()
        .enumerate()
        .filter(|(_, s)| s.splittable)
        .map(|(i, s)| (ByError(s.error), i))
        .collect();
    // running totals steer the loop; the result is re-summed with compensation
    let mut total: Complex64 = segments.iter().map(|s| s.value).sum();
    let mut error: f64 = segments.iter().map(|s| s.error).sum();

    loop {
        if !total.re.is_finite() || !total.im.is_finite() || !error.is_finite() {
            return Err(QuadratureError::DivergenceDetected {
                reason: "partial sums are no longer finite".into(),
            });
        }
        if error <= abs_tol.max(rel_tol * total.norm()) {
            let value = compensated_sum(segments.iter().map(|s| s.value));
            let error: f64 = segments.iter().map(|s| s.error).sum();
            if error <= abs_tol.max(rel_tol * value.norm()) {
                return Ok(Adaptive {
                    value,
                    error,
                    segments: segments.len(),
                });
            }
        }
        let exhausted = |segments: &[Segment]| QuadratureError::NonConvergence {
            value: compensated_sum(segments.iter().map(|s| s.value)),
            error: segments.iter().map(|s| s.error).sum(),
            subdivisions: segments.len(),
        };
        if segments.len() >= max_segments {
            return Err(exhausted(&segments));
        }
        // an empty heap means every segment is roundoff limited
        let Some((_, idx)) = heap.pop() else {
            return Err(exhausted(&segments));
        };
        let seg = segments[idx];
        let mid = 0.5 * (seg.a + seg.b);
        let left = qk21(f, seg.a, mid);
        let right = qk21(f, mid, seg.b);
        total += left.value + right.value - seg.value;
        error += left.error + right.error - seg.error;
        segments[idx] = left;
        segments.push(right);
        for i in [idx, segments.len() - 1] {
            if segments[i].splittable {
                heap.push((ByError(segments[i].error), i));
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct ByError(f64);

impl Eq for ByError {}

impl PartialOrd for ByError {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ByError {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}
