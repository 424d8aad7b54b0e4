//! Globally adaptive Gauss-Kronrod 15/7 quadrature over values that can be
//! scalars, fixed arrays or vectors of complex numbers.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Error level, relative to `int |f|`, below which bisection only chases roundoff.
const ROUNDOFF_FLOOR: f64 = 50.0 * f64::EPSILON;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
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

/// Gauss weights for the odd Kronrod nodes `XGK[1], XGK[3], XGK[5], XGK[7]`.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Values that can be integrated: a linear space with a max-norm.
pub trait QuadValue: Clone {
    fn zero_like(&self) -> Self;
    fn add_scaled(&mut self, other: &Self, w: f64);
    fn scaled(&self, c: Complex64) -> Self;
    fn max_norm(&self) -> f64;
    fn dist(&self, other: &Self) -> f64;
}

impl QuadValue for Complex64 {
    fn zero_like(&self) -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn add_scaled(&mut self, other: &Self, w: f64) {
        *self += other * w;
    }
    fn scaled(&self, c: Complex64) -> Self {
        self * c
    }
    fn max_norm(&self) -> f64 {
        self.norm()
    }
    fn dist(&self, other: &Self) -> f64 {
        (self - other).norm()
    }
}

impl<const N: usize> QuadValue for [Complex64; N] {
    fn zero_like(&self) -> Self {
        [Complex64::new(0.0, 0.0); N]
    }
    fn add_scaled(&mut self, other: &Self, w: f64) {
        for (s, o) in self.iter_mut().zip(other) {
            *s += o * w;
        }
    }
    fn scaled(&self, c: Complex64) -> Self {
        let mut out = *self;
        for v in out.iter_mut() {
            *v *= c;
        }
        out
    }
    fn max_norm(&self) -> f64 {
        self.iter().fold(0.0, |m, v| m.max(v.norm()))
    }
    fn dist(&self, other: &Self) -> f64 {
        self.iter().zip(other).fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }
}

impl QuadValue for Vec<Complex64> {
    fn zero_like(&self) -> Self {
        vec![Complex64::new(0.0, 0.0); self.len()]
    }
    fn add_scaled(&mut self, other: &Self, w: f64) {
        for (s, o) in self.iter_mut().zip(other) {
            *s += o * w;
        }
    }
    fn scaled(&self, c: Complex64) -> Self {
        let mut out = self.clone();
        for v in out.iter_mut() {
            *v *= c;
        }
        out
    }
    fn max_norm(&self) -> f64 {
        self.iter().fold(0.0, |m, v| m.max(v.norm()))
    }
    fn dist(&self, other: &Self) -> f64 {
        self.iter().zip(other).fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_depth: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self { rel_tol: 1e-10, abs_tol: 1e-14, max_depth: 30 }
    }
}

impl QuadratureConfig {
    pub fn new(rel_tol: f64, abs_tol: f64, max_depth: usize) -> Result<Self> {
        let q = Self { rel_tol, abs_tol, max_depth };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite() && self.abs_tol > 0.0 && self.abs_tol.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "quadrature tolerances must be positive (rel_tol = {}, abs_tol = {})",
                self.rel_tol, self.abs_tol
            )));
        }
        if self.max_depth == 0 || self.max_depth > 60 {
            return Err(Error::InvalidParameter(format!("quadrature max_depth = {} outside 1..=60", self.max_depth)));
        }
        Ok(())
    }

    /// Same configuration with both tolerances divided by `factor`.
    pub fn tightened(&self, factor: f64) -> Self {
        Self { rel_tol: self.rel_tol / factor, abs_tol: self.abs_tol / factor, max_depth: self.max_depth }
    }
}

#[derive(Debug, Clone)]
pub struct Quadrature<V> {
    pub value: V,
    pub error: f64,
    pub evaluations: usize,
    pub intervals: usize,
}

struct Segment<V> {
    a: f64,
    b: f64,
    depth: usize,
    value: V,
    error: f64,
    // integral of |f| over the segment, for the roundoff floor
    magnitude: f64,
    id: usize,
}

impl<V> PartialEq for Segment<V> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<V> Eq for Segment<V> {}
impl<V> PartialOrd for Segment<V> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<V> Ord for Segment<V> {
    fn cmp(&self, other: &Self) -> Ordering {
        // largest error first; earlier segments win ties
        self.error.total_cmp(&other.error).then_with(|| other.id.cmp(&self.id))
    }
}

fn gk15<V, F>(f: &mut F, a: f64, b: f64) -> Result<(V, f64, f64)>
where
    V: QuadValue,
    F: FnMut(f64) -> Result<V>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center)?;
    let mut kronrod = fc.zero_like();
    let mut gauss = fc.zero_like();
    kronrod.add_scaled(&fc, WGK[7]);
    gauss.add_scaled(&fc, WG[3]);
    let mut magnitude = WGK[7] * fc.max_norm();
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx)?;
        let f2 = f(center + dx)?;
        kronrod.add_scaled(&f1, WGK[j]);
        kronrod.add_scaled(&f2, WGK[j]);
        magnitude += WGK[j] * (f1.max_norm() + f2.max_norm());
        if j % 2 == 1 {
            gauss.add_scaled(&f1, WG[j / 2]);
            gauss.add_scaled(&f2, WG[j / 2]);
        }
    }
    let mut value = kronrod.zero_like();
    value.add_scaled(&kronrod, half);
    let error = kronrod.dist(&gauss) * half.abs();
    if !error.is_finite() {
        return Err(Error::NonFinite(format!("integrand on [{a}, {b}]")));
    }
    Ok((value, error, magnitude * half.abs()))
}

/// Integrates `f` over `[a, b]` until the summed local error estimate is below
/// `max(abs_tol, rel_tol |I|)`, bisecting the segment with the largest error.
/// Refinement also stops once the error estimate reaches the roundoff floor
/// `ROUNDOFF_FLOOR * int |f|`, where further bisection cannot help.
pub fn integrate<V, F>(mut f: F, a: f64, b: f64, q: &QuadratureConfig) -> Result<Quadrature<V>>
where
    V: QuadValue,
    F: FnMut(f64) -> Result<V>,
{
    if !(a <= b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::Ordering(format!("integration limits must satisfy a <= b, got [{a}, {b}]")));
    }
    if a == b {
        let v = f(a)?;
        return Ok(Quadrature { value: v.zero_like(), error: 0.0, evaluations: 1, intervals: 0 });
    }
    let (value, error, magnitude) = gk15(&mut f, a, b)?;
    let mut total = value.clone();
    let mut total_error = error;
    let mut total_magnitude = magnitude;
    let mut evaluations = 15;
    let mut next_id = 1;
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, depth: 0, value, error, magnitude, id: 0 });
    loop {
        let tol = q.abs_tol.max(q.rel_tol * total.max_norm()).max(ROUNDOFF_FLOOR * total_magnitude);
        if total_error <= tol {
            break;
        }
        let seg = heap.pop().expect("segment heap is never empty");
        if seg.depth >= q.max_depth {
            return Err(Error::QuadratureDepth { depth: q.max_depth, a: seg.a, b: seg.b });
        }
        let mid = 0.5 * (seg.a + seg.b);
        let (lv, le, lm) = gk15(&mut f, seg.a, mid)?;
        let (rv, re, rm) = gk15(&mut f, mid, seg.b)?;
        evaluations += 30;
        total.add_scaled(&seg.value, -1.0);
        total.add_scaled(&lv, 1.0);
        total.add_scaled(&rv, 1.0);
        total_error += le + re - seg.error;
        total_magnitude += lm + rm - seg.magnitude;
        heap.push(Segment { a: seg.a, b: mid, depth: seg.depth + 1, value: lv, error: le, magnitude: lm, id: next_id });
        heap.push(Segment {
            a: mid,
            b: seg.b,
            depth: seg.depth + 1,
            value: rv,
            error: re,
            magnitude: rm,
            id: next_id + 1,
        });
        next_id += 2;
    }
    // re-sum in left-to-right order to shed the running-sum drift
    let mut segments = heap.into_vec();
    segments.sort_by(|x, y| x.a.total_cmp(&y.a));
    let mut value = segments[0].value.zero_like();
    let mut error = 0.0;
    for s in &segments {
        value.add_scaled(&s.value, 1.0);
        error += s.error;
    }
    Ok(Quadrature { value, error, evaluations, intervals: segments.len() })
}

/// Iterated integral `int_a^b dx int_{lo(x)}^{hi(x)} f(x, y) dy`, with the
/// inner integrals run at a tolerance ten times tighter than the outer one.
pub fn integrate_iterated<V, L, F>(a: f64, b: f64, limits: L, mut f: F, q: &QuadratureConfig) -> Result<Quadrature<V>>
where
    V: QuadValue,
    L: Fn(f64) -> Result<(f64, f64)>,
    F: FnMut(f64, f64) -> Result<V>,
{
    let inner_q = q.tightened(10.0);
    let mut inner_evals = 0;
    let mut out = integrate(
        |x| {
            let (lo, hi) = limits(x)?;
            let inner = integrate(|y| f(x, y), lo, hi, &inner_q)?;
            inner_evals += inner.evaluations;
            Ok(inner.value)
        },
        a,
        b,
        q,
    )?;
    out.evaluations += inner_evals;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::EpdKernels;
    use std::f64::consts::PI;

    #[test]
    fn constant_and_sine() {
        let q = QuadratureConfig::default();
        let one = integrate(|_| Ok(Complex64::new(1.0, 0.0)), 0.0, 1.0, &q).unwrap();
        assert!((one.value - 1.0).norm() < 1e-15);
        let s = integrate(|x: f64| Ok(Complex64::new(x.sin(), 0.0)), 0.0, PI, &q).unwrap();
        assert!((s.value - 2.0).norm() < 1e-13);
        let empty = integrate(|_| Ok(Complex64::new(5.0, 0.0)), 1.0, 1.0, &q).unwrap();
        assert_eq!(empty.value, Complex64::new(0.0, 0.0));
        assert!(integrate(|_| Ok(Complex64::new(1.0, 0.0)), 1.0, 0.0, &q).is_err());
    }

    #[test]
    fn k1_integral_fixture() {
        // mpmath.quad of K1(r, 1; 0.5) over [0, 1]
        let k = EpdKernels::new(Complex64::new(0.5, 0.0)).unwrap();
        let q = QuadratureConfig::new(1e-13, 1e-15, 30).unwrap();
        let v = integrate(|r| Ok(k.k1_tau(r, 1.0)?.value), 0.0, 1.0, &q).unwrap().value;
        let want = Complex64::new(0.908_200_177_677_606_927_73, -0.369_722_374_949_662_674_57);
        assert!((v - want).norm() < 1e-13, "{v}");
    }

    #[test]
    fn vector_values_and_oscillation() {
        let q = QuadratureConfig::new(1e-12, 1e-15, 30).unwrap();
        let ks = [1.0, 10.0, 50.0];
        let v = integrate(
            |x: f64| Ok(ks.iter().map(|k| Complex64::new((k * x).cos(), 0.0)).collect::<Vec<_>>()),
            0.0,
            2.0,
            &q,
        )
        .unwrap();
        for (k, got) in ks.iter().zip(&v.value) {
            let want = (2.0 * k).sin() / k;
            assert!((got.re - want).abs() < 1e-12, "{k}: {} vs {want}", got.re);
        }
        let arr = integrate(|x: f64| Ok([Complex64::new(x, 0.0), Complex64::new(0.0, x * x)]), 0.0, 3.0, &q).unwrap();
        assert!((arr.value[0].re - 4.5).abs() < 1e-13 && (arr.value[1].im - 9.0).abs() < 1e-13);
    }

    #[test]
    fn depth_exceeded() {
        let q = QuadratureConfig::new(1e-12, 1e-15, 3).unwrap();
        let r = integrate(|x: f64| Ok(Complex64::new((x - 0.3).abs().powf(-0.9), 0.0)), 0.0, 1.0, &q);
        assert!(matches!(r, Err(Error::QuadratureDepth { .. })));
    }

    #[test]
    fn iterated_triangle() {
        // int_0^1 dx int_0^x xy dy = 1/8
        let q = QuadratureConfig::default();
        let v = integrate_iterated(0.0, 1.0, |x| Ok((0.0, x)), |x, y| Ok(Complex64::new(x * y, 0.0)), &q).unwrap();
        assert!((v.value.re - 0.125).abs() < 1e-14);
    }

    #[test]
    fn invalid_config() {
        assert!(QuadratureConfig::new(0.0, 1e-14, 30).is_err());
        assert!(QuadratureConfig::new(1e-10, -1.0, 30).is_err());
        assert!(QuadratureConfig::new(1e-10, 1e-14, 0).is_err());
    }
}
