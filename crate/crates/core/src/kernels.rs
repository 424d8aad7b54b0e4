//! The kernels `E`, `K0`, `K1` of the EPD representation, in proper-time
//! coordinates `(r, tau)` and in the original time `t`.
//!
//! All six share one geometric core. With `p` the "current" radius (`tau + 1`
//! or `phi(t)`), `q` the "initial" radius (`b + 1`, `1`, `phi(t0)` or
//! `phi(eps)`), `D = (p + q)^2 - r^2` and `z = ((p - q)^2 - r^2) / D`:
//!
//! ```text
//! G(p, q, r)  = (4 q^2 / D)^(i m~) F(i m~, i m~; 1; z)
//! E_tau       = G(tau + 1, b + 1, r)
//! K1_tau      = G(tau + 1, 1, r)
//! E_t         = t0^ell / 2 * G(phi(t), phi(t0), r)
//! K1_t        = G(phi(t), phi(eps), r) / phi(eps)
//! ```
//!
//! `K0` is evaluated either from the two-term hypergeometric formula or, close
//! to the light cone where that formula cancels catastrophically, from an
//! exact rewrite using `F(a, a; 1; z) - F(a + 1, a; 1; z) = -a z F(a + 1, a + 1; 2; z)`:
//!
//! ```text
//! K0 = -m~ (4 q^2 / D)^a { 2i F(a, a; 1; z) + (2i q / D) [ -a (p - q) F(a+1, a+1; 2; z) - (p + q) F(a+1, a; 1; z) ] }
//! ```
//!
//! which has no `1 / ((p - q)^2 - r^2)` factor and is regular on the cone.

use num_complex::Complex64;
use serde::Serialize;

use crate::cosmology::CosmologyParams;
use crate::error::{Error, Result};
use crate::special_functions::{cpow, Hyp2F1};

/// Below this value of `z` the near-cone form of `K0` is used.
pub const DELTA_SWITCH: f64 = 1e-3;
/// In `[DELTA_SWITCH, 2 DELTA_SWITCH)` both `K0` forms are evaluated and compared.
const OVERLAP_TOL: f64 = 1e-8;
/// Rounding slack on the cone condition, relative to `p + q`.
const CONE_SLACK: f64 = 8.0 * f64::EPSILON;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelBranch {
    Regular,
    NearDiagonalExpansion,
}

impl KernelBranch {
    pub fn as_str(self) -> &'static str {
        match self {
            KernelBranch::Regular => "regular",
            KernelBranch::NearDiagonalExpansion => "near-diagonal-expansion",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    pub value: Complex64,
    pub branch: KernelBranch,
}

impl KernelValue {
    fn regular(value: Complex64) -> Self {
        Self { value, branch: KernelBranch::Regular }
    }
}

#[derive(Debug, Clone, Copy)]
struct Geometry {
    d: f64,
    z: f64,
}

/// Kernels for one reduced mass `m~`, with the hypergeometric functions prepared.
#[derive(Debug, Clone)]
pub struct EpdKernels {
    mt: Complex64,
    a: Complex64,
    f_aa1: Hyp2F1,
    f_a1a1: Hyp2F1,
    f_a1a12: Hyp2F1,
}

impl EpdKernels {
    pub fn new(mt: Complex64) -> Result<Self> {
        if !mt.re.is_finite() || !mt.im.is_finite() {
            return Err(Error::NonFinite("reduced mass".into()));
        }
        let a = Complex64::i() * mt;
        Ok(Self {
            mt,
            a,
            f_aa1: Hyp2F1::new(a, a, 1)?,
            f_a1a1: Hyp2F1::new(a + 1.0, a, 1)?,
            f_a1a12: Hyp2F1::new(a + 1.0, a + 1.0, 2)?,
        })
    }

    pub fn reduced_mass(&self) -> Complex64 {
        self.mt
    }

    fn geometry(&self, p: f64, q: f64, r: f64) -> Result<Geometry> {
        let radius = p - q;
        if !(r >= 0.0) || !r.is_finite() {
            return Err(Error::Domain(format!("kernel radius r = {r} must be non-negative")));
        }
        if r > radius + CONE_SLACK * (p + q) {
            return Err(Error::ConeViolation { r, radius });
        }
        let d = (p + q - r) * (p + q + r);
        let delta = ((radius - r) * (radius + r)).max(0.0);
        Ok(Geometry { d, z: delta / d })
    }

    /// `G(p, q, r)`.
    pub(crate) fn g_core(&self, p: f64, q: f64, r: f64) -> Result<Complex64> {
        let g = self.geometry(p, q, r)?;
        self.g_at(p, q, &g)
    }

    fn g_at(&self, _p: f64, q: f64, g: &Geometry) -> Result<Complex64> {
        let f = self.f_aa1.eval(g.z)?.value;
        Ok(cpow(4.0 * q * q / g.d, self.a)? * f)
    }

    /// `K0` in the `(p, q)` geometry, optionally fused with `2 i m~ G`.
    pub(crate) fn k0_core(&self, p: f64, q: f64, r: f64, add_2im_g: bool) -> Result<KernelValue> {
        let g = self.geometry(p, q, r)?;
        let near = g.z < DELTA_SWITCH;
        let branch = if near { KernelBranch::NearDiagonalExpansion } else { KernelBranch::Regular };
        if self.mt == Complex64::new(0.0, 0.0) {
            return Ok(KernelValue { value: Complex64::new(0.0, 0.0), branch });
        }
        let i = Complex64::i();
        let pre = cpow(4.0 * q * q / g.d, self.a)?;
        let f1 = self.f_aa1.eval(g.z)?.value;
        let f2 = self.f_a1a1.eval(g.z)?.value;
        let bracket = if near {
            self.k0_bracket_near(p, q, &g, f1, f2)?
        } else {
            let regular = k0_bracket_regular(p, q, r, &g, f1, f2);
            if g.z < 2.0 * DELTA_SWITCH {
                let near = self.k0_bracket_near(p, q, &g, f1, f2)?;
                let diff = (regular - near).norm() / near.norm().max(f64::MIN_POSITIVE);
                if diff > OVERLAP_TOL {
                    return Err(Error::StabilizationFailure(diff));
                }
            }
            regular
        };
        let mut value = -self.mt * pre * bracket;
        if add_2im_g {
            value += 2.0 * i * self.mt * pre * f1;
        }
        Ok(KernelValue { value, branch })
    }

    fn k0_bracket_near(&self, p: f64, q: f64, g: &Geometry, f1: Complex64, f2: Complex64) -> Result<Complex64> {
        let i = Complex64::i();
        let f3 = self.f_a1a12.eval(g.z)?.value;
        Ok(2.0 * i * f1 + (2.0 * i * q / g.d) * (-self.a * (p - q) * f3 - (p + q) * f2))
    }

    fn check_tau(tau: f64, b: f64) -> Result<()> {
        if !(tau >= 0.0) || !tau.is_finite() {
            return Err(Error::Domain(format!("tau = {tau} must be non-negative")));
        }
        if !(b >= 0.0) || b > tau {
            return Err(Error::Domain(format!("b = {b} must lie in [0, tau = {tau}]")));
        }
        Ok(())
    }

    pub fn e_tau(&self, r: f64, tau: f64, b: f64) -> Result<KernelValue> {
        Self::check_tau(tau, b)?;
        Ok(KernelValue::regular(self.g_core(tau + 1.0, b + 1.0, r)?))
    }

    pub fn k1_tau(&self, r: f64, tau: f64) -> Result<KernelValue> {
        self.e_tau(r, tau, 0.0)
    }

    pub fn k0_tau(&self, r: f64, tau: f64) -> Result<KernelValue> {
        Self::check_tau(tau, 0.0)?;
        self.k0_core(tau + 1.0, 1.0, r, false)
    }

    /// `K0 + 2 i m~ K1`, the combination integrated against the `phi0` data.
    pub fn k0_plus_2im_k1_tau(&self, r: f64, tau: f64) -> Result<KernelValue> {
        Self::check_tau(tau, 0.0)?;
        self.k0_core(tau + 1.0, 1.0, r, true)
    }
}

fn k0_bracket_regular(p: f64, q: f64, r: f64, g: &Geometry, f1: Complex64, f2: Complex64) -> Complex64 {
    let i = Complex64::i();
    let delta = g.z * g.d;
    let t1 = 2.0 * i * (p * (p - q) - r * r) / delta * f1;
    let t2 = -4.0 * i * p * q * ((p - q) * (p + q) - r * r) / (delta * g.d) * f2;
    t1 + t2
}

/// Kernels in the original time variable for fixed cosmology parameters.
#[derive(Debug, Clone)]
pub struct TimeKernels {
    params: CosmologyParams,
    phi_eps: f64,
    base: EpdKernels,
}

impl TimeKernels {
    pub fn new(params: &CosmologyParams) -> Result<Self> {
        Ok(Self { params: *params, phi_eps: params.phi_eps(), base: EpdKernels::new(params.reduced_mass().value())? })
    }

    pub fn params(&self) -> &CosmologyParams {
        &self.params
    }

    pub fn phi_eps(&self) -> f64 {
        self.phi_eps
    }

    pub fn tau_kernels(&self) -> &EpdKernels {
        &self.base
    }

    fn check_times(&self, t: f64, t0: f64) -> Result<()> {
        let eps = self.params.epsilon();
        if !(t0 >= eps) || !(t >= t0) || !t.is_finite() {
            return Err(Error::Domain(format!("kernel times must satisfy eps = {eps} <= t0 = {t0} <= t = {t}")));
        }
        Ok(())
    }

    pub fn e_t(&self, r: f64, t: f64, t0: f64) -> Result<KernelValue> {
        self.check_times(t, t0)?;
        let p = self.params.phi(t)?;
        let q = self.params.phi(t0)?;
        Ok(KernelValue::regular(0.5 * t0.powf(self.params.ell()) * self.base.g_core(p, q, r)?))
    }

    pub fn k1_t(&self, r: f64, t: f64) -> Result<KernelValue> {
        self.check_times(t, self.params.epsilon())?;
        let p = self.params.phi(t)?;
        Ok(KernelValue::regular(self.base.g_core(p, self.phi_eps, r)? / self.phi_eps))
    }

    pub fn k0_t(&self, r: f64, t: f64) -> Result<KernelValue> {
        self.check_times(t, self.params.epsilon())?;
        let p = self.params.phi(t)?;
        self.base.k0_core(p, self.phi_eps, r, false)
    }

    /// `K0_t / phi(eps) + 2 i m~ K1_t`.
    pub fn k0_fused_t(&self, r: f64, t: f64) -> Result<KernelValue> {
        self.check_times(t, self.params.epsilon())?;
        let p = self.params.phi(t)?;
        let v = self.base.k0_core(p, self.phi_eps, r, true)?;
        Ok(KernelValue { value: v.value / self.phi_eps, branch: v.branch })
    }
}

pub fn kernel_e_tau(r: f64, tau: f64, b: f64, mt: Complex64) -> Result<KernelValue> {
    EpdKernels::new(mt)?.e_tau(r, tau, b)
}

pub fn kernel_k1_tau(r: f64, tau: f64, mt: Complex64) -> Result<KernelValue> {
    EpdKernels::new(mt)?.k1_tau(r, tau)
}

pub fn kernel_k0_tau(r: f64, tau: f64, mt: Complex64) -> Result<KernelValue> {
    EpdKernels::new(mt)?.k0_tau(r, tau)
}

pub fn kernel_e_t(r: f64, t: f64, t0: f64, p: &CosmologyParams) -> Result<KernelValue> {
    TimeKernels::new(p)?.e_t(r, t, t0)
}

pub fn kernel_k1_t(r: f64, t: f64, p: &CosmologyParams) -> Result<KernelValue> {
    TimeKernels::new(p)?.k1_t(r, t)
}

pub fn kernel_k0_t(r: f64, t: f64, p: &CosmologyParams) -> Result<KernelValue> {
    TimeKernels::new(p)?.k0_t(r, t)
}
