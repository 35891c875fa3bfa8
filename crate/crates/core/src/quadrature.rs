//! Adaptive Gauss–Kronrod (7/15) quadrature for complex integrands.

#![allow(clippy::excessive_precision)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd Kronrod nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl QuadConfig {
    pub fn new(rel_tol: f64) -> Self {
        QuadConfig { rel_tol, abs_tol: 1e-15, max_subdivisions: 2000 }
    }
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self::new(1e-9)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOutput {
    pub value: Complex64,
    pub est_error: f64,
    pub evaluations: usize,
    pub subdivisions: usize,
}

struct Segment {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut fv = [Complex64::new(0.0, 0.0); 14];
    for j in 0..7 {
        let dx = h * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        fv[2 * j] = f1;
        fv[2 * j + 1] = f2;
        kron += (f1 + f2) * WGK[j];
        if j % 2 == 1 {
            gauss += (f1 + f2) * WG[j / 2];
        }
    }
    // QUADPACK error heuristic, using moduli for the complex case.
    let mean = kron * 0.5;
    let mut resasc = WGK[7] * (fc - mean).norm();
    for j in 0..7 {
        resasc += WGK[j] * ((fv[2 * j] - mean).norm() + (fv[2 * j + 1] - mean).norm());
    }
    resasc *= h.abs();
    let mut err = ((kron - gauss) * h).norm();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    (kron * h, err)
}

/// ∫_a^b f(x) dx, subdividing the worst interval until the summed error
/// estimate is below `max(abs_tol, rel_tol·|I|)`.
///
/// ```
/// use num_complex::Complex64;
/// use spdc_core::quadrature::{integrate, QuadConfig};
/// let out = integrate(|x| Complex64::new(0.0, x).exp(), 0.0, std::f64::consts::PI, &QuadConfig::default()).unwrap();
/// assert!((out.value - Complex64::new(0.0, 2.0)).norm() < 1e-12);
/// ```
pub fn integrate<F: Fn(f64) -> Complex64>(f: F, a: f64, b: f64, cfg: &QuadConfig) -> Result<QuadOutput> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::invalid("integration limits must be finite"));
    }
    if a == b {
        return Ok(QuadOutput { value: Complex64::new(0.0, 0.0), est_error: 0.0, evaluations: 0, subdivisions: 0 });
    }
    let (v, e) = gk15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value: v, error: e });
    let mut total = v;
    let mut total_err = e;
    let mut evaluations = 15;
    let mut subdivisions = 0;
    loop {
        if !total.re.is_finite() || !total.im.is_finite() {
            return Err(Error::NonConvergence("integrand produced a non-finite value".into()));
        }
        if total_err <= cfg.abs_tol.max(cfg.rel_tol * total.norm()) {
            break;
        }
        if subdivisions >= cfg.max_subdivisions {
            return Err(Error::NonConvergence(format!(
                "{subdivisions} subdivisions exhausted, error estimate {total_err:e} for |I| = {:e}",
                total.norm()
            )));
        }
        let seg = heap.pop().expect("heap never empty");
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a.min(seg.b) || mid >= seg.a.max(seg.b) {
            return Err(Error::NonConvergence("interval width reached machine precision".into()));
        }
        let (v1, e1) = gk15(&f, seg.a, mid);
        let (v2, e2) = gk15(&f, mid, seg.b);
        evaluations += 30;
        subdivisions += 1;
        total += v1 + v2 - seg.value;
        total_err += e1 + e2 - seg.error;
        heap.push(Segment { a: seg.a, b: mid, value: v1, error: e1 });
        heap.push(Segment { a: mid, b: seg.b, value: v2, error: e2 });
        // Recompute the sums now and then to stop drift from the running updates.
        if subdivisions % 64 == 0 {
            total = heap.iter().map(|s| s.value).sum();
            total_err = heap.iter().map(|s| s.error).sum();
        }
    }
    let value: Complex64 = heap.iter().map(|s| s.value).sum();
    let est_error = heap.iter().map(|s| s.error).sum();
    Ok(QuadOutput { value, est_error, evaluations, subdivisions })
}

/// ∫ over the whole real line via x = t/(1 − t²).
pub fn integrate_real_line<F: Fn(f64) -> Complex64>(f: F, cfg: &QuadConfig) -> Result<QuadOutput> {
    integrate(
        |t| {
            let d = 1.0 - t * t;
            if d <= 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            f(t / d) * ((1.0 + t * t) / (d * d))
        },
        -1.0,
        1.0,
        cfg,
    )
}

/// Nodes and weights of the n-point Gauss–Legendre rule on [−1, 1]
/// (Newton iteration on the Legendre recurrence).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "need at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            if n == 1 {
                p1 = z;
                p0 = 1.0;
            } else {
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
            }
            // p1 = P_n(z), p0 = P_{n-1}(z)
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}
