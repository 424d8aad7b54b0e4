//! Per-mode solutions of the generalized Euler-Poisson-Darboux Cauchy problem
//!
//! ```text
//! u_tt - t^(-2 ell) lambda u + (ell + 2 i m) u_t / t = f,   u(eps) = phi0,  u_t(eps) = phi1
//! ```
//!
//! and of its proper-time form `u'' - lambda u + 2 i m~ u' / (tau + 1) = f`,
//! by integral transforms of the plane-wave solution `cosh(r sqrt(lambda))`
//! against the kernels `E`, `K0`, `K1`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::cosmology::CosmologyParams;
use crate::error::{Error, Result};
use crate::kernels::{EpdKernels, TimeKernels};
use crate::quadrature::{integrate, integrate_iterated, QuadValue, QuadratureConfig};
use crate::special_functions::cpow;

/// Value of the spatial symbol on a Fourier mode; `-|k|^2` for the Laplacian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeSymbol {
    pub lambda: Complex64,
}

impl ModeSymbol {
    pub fn new(lambda: Complex64) -> Self {
        Self { lambda }
    }

    pub fn laplacian(k: [f64; 3]) -> Self {
        Self { lambda: Complex64::new(-(k[0] * k[0] + k[1] * k[1] + k[2] * k[2]), 0.0) }
    }
}

/// `cosh(r sqrt(lambda))`: the mode image of the wave solution with data `(1, 0)`.
pub fn wave_mode_propagator(sym: ModeSymbol, r: f64) -> Complex64 {
    if sym.lambda == Complex64::new(0.0, 0.0) {
        return Complex64::new(1.0, 0.0);
    }
    (sym.lambda.sqrt() * r).cosh()
}

pub type SourceFn<V> = Arc<dyn Fn(f64) -> V + Send + Sync>;

/// Source history with an optional support interval outside which it vanishes.
#[derive(Clone)]
pub struct ModeSource<V> {
    pub f: SourceFn<V>,
    pub support: Option<(f64, f64)>,
}

impl<V> ModeSource<V> {
    pub fn new(f: impl Fn(f64) -> V + Send + Sync + 'static) -> Self {
        Self { f: Arc::new(f), support: None }
    }

    pub fn with_support(mut self, lo: f64, hi: f64) -> Self {
        self.support = Some((lo, hi));
        self
    }

    /// Intersection of `[lo, hi]` with the support, if nonempty.
    fn clip(&self, lo: f64, hi: f64) -> Option<(f64, f64)> {
        let (a, b) = match self.support {
            Some((s0, s1)) => (lo.max(s0), hi.min(s1)),
            None => (lo, hi),
        };
        (a < b).then_some((a, b))
    }
}

/// Cauchy data `(phi0, phi1)` at the initial time plus an optional source.
#[derive(Clone)]
pub struct ModeCauchyData<V = Complex64> {
    pub phi0: V,
    pub phi1: V,
    pub source: Option<ModeSource<V>>,
}

impl<V: QuadValue> ModeCauchyData<V> {
    pub fn new(phi0: V, phi1: V) -> Self {
        Self { phi0, phi1, source: None }
    }

    pub fn with_source(mut self, source: ModeSource<V>) -> Self {
        self.source = Some(source);
        self
    }
}

/// Integrand of the `phi1` term, evaluated by both coordinate systems.
fn nonzero<V: QuadValue>(v: &V) -> bool {
    v.max_norm() > 0.0
}

/// Solver in the original time `t` for fixed cosmology parameters.
#[derive(Debug, Clone)]
pub struct EpdTimeSolver {
    kernels: TimeKernels,
    q: QuadratureConfig,
}

impl EpdTimeSolver {
    pub fn new(p: &CosmologyParams, q: &QuadratureConfig) -> Result<Self> {
        q.validate()?;
        Ok(Self { kernels: TimeKernels::new(p)?, q: *q })
    }

    pub fn params(&self) -> &CosmologyParams {
        self.kernels.params()
    }

    pub fn solve<V: QuadValue>(&self, sym: ModeSymbol, data: &ModeCauchyData<V>, t: f64) -> Result<V> {
        let wave = |r: f64, v: &V| v.scaled(wave_mode_propagator(sym, r));
        self.represent(t, &wave, data)
    }

    /// The four-term representation at time `t`, with `wave(r, data)` giving
    /// the mode image of the wave solution with Cauchy data `(data, 0)` at `r`.
    pub(crate) fn represent<V, W>(&self, t: f64, wave: &W, data: &ModeCauchyData<V>) -> Result<V>
    where
        V: QuadValue,
        W: Fn(f64, &V) -> V,
    {
        let p = self.kernels.params();
        let eps = p.epsilon();
        if !(t >= eps) || !t.is_finite() {
            return Err(Error::Domain(format!("EPD solve requires t >= eps = {eps}, got {t}")));
        }
        let pe = self.kernels.phi_eps();
        let pt = p.phi(t)?;
        let radius = (pt - pe).max(0.0);
        let mt = p.reduced_mass().value();
        let tau_kernels = self.kernels.tau_kernels();
        let mut out = data.phi0.zero_like();

        if nonzero(&data.phi1) {
            let scale = eps / (1.0 - p.ell()) / pe;
            let integral =
                integrate(|r| Ok(wave(r, &data.phi1).scaled(tau_kernels.g_core(pt, pe, r)?)), 0.0, radius, &self.q)?;
            out.add_scaled(&integral.value, scale);
        }

        if nonzero(&data.phi0) {
            let boundary = cpow(pt / pe, -Complex64::i() * mt)?;
            out.add_scaled(&wave(radius, &data.phi0).scaled(boundary), 1.0);
            let integral = integrate(
                |r| Ok(wave(r, &data.phi0).scaled(tau_kernels.k0_core(pt, pe, r, true)?.value)),
                0.0,
                radius,
                &self.q,
            )?;
            out.add_scaled(&integral.value, 1.0 / pe);
        }

        if let Some(src) = &data.source {
            if let Some((lo, hi)) = src.clip(eps, t) {
                let ell = p.ell();
                let limits = |b: f64| Ok((0.0, (pt - p.phi(b)?).max(0.0)));
                let integral = integrate_iterated(
                    lo,
                    hi,
                    limits,
                    |b, r| {
                        let fb = (src.f)(b);
                        let e = b.powf(ell) * tau_kernels.g_core(pt, p.phi(b)?, r)?;
                        Ok(wave(r, &fb).scaled(e))
                    },
                    &self.q,
                )?;
                // 2 * (1/2) from the E_t prefactor
                out.add_scaled(&integral.value, 1.0);
            }
        }
        Ok(out)
    }
}

/// Solver in proper time `tau` for a fixed reduced mass.
#[derive(Debug, Clone)]
pub struct EpdTauSolver {
    kernels: EpdKernels,
    q: QuadratureConfig,
}

impl EpdTauSolver {
    pub fn new(mt: Complex64, q: &QuadratureConfig) -> Result<Self> {
        q.validate()?;
        Ok(Self { kernels: EpdKernels::new(mt)?, q: *q })
    }

    pub fn solve<V: QuadValue>(&self, sym: ModeSymbol, data: &ModeCauchyData<V>, tau: f64) -> Result<V> {
        if !(tau >= 0.0) || !tau.is_finite() {
            return Err(Error::Domain(format!("EPD solve requires tau >= 0, got {tau}")));
        }
        let k = &self.kernels;
        let wave = |r: f64, v: &V| v.scaled(wave_mode_propagator(sym, r));
        let mut out = data.phi0.zero_like();
        if nonzero(&data.phi1) {
            let integral = integrate(|r| Ok(wave(r, &data.phi1).scaled(k.k1_tau(r, tau)?.value)), 0.0, tau, &self.q)?;
            out.add_scaled(&integral.value, 1.0);
        }
        if nonzero(&data.phi0) {
            let boundary = cpow(tau + 1.0, -Complex64::i() * k.reduced_mass())?;
            out.add_scaled(&wave(tau, &data.phi0).scaled(boundary), 1.0);
            let integral =
                integrate(|r| Ok(wave(r, &data.phi0).scaled(k.k0_plus_2im_k1_tau(r, tau)?.value)), 0.0, tau, &self.q)?;
            out.add_scaled(&integral.value, 1.0);
        }
        if let Some(src) = &data.source {
            if let Some((lo, hi)) = src.clip(0.0, tau) {
                let integral = integrate_iterated(
                    lo,
                    hi,
                    |b| Ok((0.0, (tau - b).max(0.0))),
                    |b, r| Ok(wave(r, &(src.f)(b)).scaled(k.e_tau(r, tau, b)?.value)),
                    &self.q,
                )?;
                out.add_scaled(&integral.value, 1.0);
            }
        }
        Ok(out)
    }

    pub fn retarded(&self, sym: ModeSymbol, tau: f64, tau0: f64) -> Result<Complex64> {
        if !(tau0 >= 0.0) || !(tau > tau0) {
            return Err(Error::Ordering(format!("retarded mode requires tau = {tau} > tau0 = {tau0} >= 0")));
        }
        let k = &self.kernels;
        Ok(integrate(|r| Ok(k.e_tau(r, tau, tau0)?.value * wave_mode_propagator(sym, r)), 0.0, tau - tau0, &self.q)?
            .value)
    }
}

/// Solution in proper time of `u'' - lambda u + 2 i m~ u' / (tau + 1) = f`.
pub fn solve_epd_tau(
    sym: ModeSymbol,
    mt: Complex64,
    data: &ModeCauchyData,
    tau: f64,
    q: &QuadratureConfig,
) -> Result<Complex64> {
    EpdTauSolver::new(mt, q)?.solve(sym, data, tau)
}

/// Solution in the original time, data given at `t = eps`.
pub fn solve_epd_t(
    sym: ModeSymbol,
    p: &CosmologyParams,
    data: &ModeCauchyData,
    t: f64,
    q: &QuadratureConfig,
) -> Result<Complex64> {
    EpdTimeSolver::new(p, q)?.solve(sym, data, t)
}

/// Mode image of the retarded fundamental solution with pole at `tau0`.
pub fn epd_retarded_mode(
    sym: ModeSymbol,
    mt: Complex64,
    tau: f64,
    tau0: f64,
    q: &QuadratureConfig,
) -> Result<Complex64> {
    EpdTauSolver::new(mt, q)?.retarded(sym, tau, tau0)
}

/// Mode images `(E0, E1)` of the fundamental solutions of the Cauchy problem,
/// i.e. the solutions with data `(1, 0)` and `(0, 1)` at `tau = 0`.
pub fn epd_fundamental_modes(
    sym: ModeSymbol,
    mt: Complex64,
    tau: f64,
    q: &QuadratureConfig,
) -> Result<(Complex64, Complex64)> {
    let solver = EpdTauSolver::new(mt, q)?;
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let e0 = solver.solve(sym, &ModeCauchyData::new(one, zero), tau)?;
    let e1 = solver.solve(sym, &ModeCauchyData::new(zero, one), tau)?;
    Ok((e0, e1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn tight() -> QuadratureConfig {
        QuadratureConfig::new(1e-12, 1e-15, 30).unwrap()
    }

    #[test]
    fn wave_propagator_examples() {
        let sym = ModeSymbol::new(c(-4.0, 0.0));
        assert_eq!(wave_mode_propagator(sym, 0.0), c(1.0, 0.0));
        assert_eq!(wave_mode_propagator(ModeSymbol::new(c(0.0, 0.0)), 3.0), c(1.0, 0.0));
        assert!((wave_mode_propagator(sym, PI / 2.0) - c(-1.0, 0.0)).norm() < 1e-15);
        assert_eq!(ModeSymbol::laplacian([1.0, 2.0, 2.0]).lambda, c(-9.0, 0.0));
    }

    #[test]
    fn massless_tau_closed_forms() {
        let q = tight();
        let kappa: f64 = 1.7;
        let sym = ModeSymbol::new(c(-kappa * kappa, 0.0));
        let zero = c(0.0, 0.0);
        for tau in [0.0, 0.5, 2.0, 5.0] {
            let u = solve_epd_tau(sym, zero, &ModeCauchyData::new(zero, c(1.0, 0.0)), tau, &q).unwrap();
            assert!((u - (kappa * tau).sin() / kappa).norm() < 1e-10);
            let u = solve_epd_tau(sym, zero, &ModeCauchyData::new(c(1.0, 0.0), zero), tau, &q).unwrap();
            assert!((u - (kappa * tau).cos()).norm() < 1e-10);
        }
        let (e0, e1) = epd_fundamental_modes(sym, zero, 0.0, &q).unwrap();
        assert_eq!((e0, e1), (c(1.0, 0.0), zero));
        let v = epd_retarded_mode(sym, zero, 3.0, 1.0, &q).unwrap();
        assert!((v - (2.0 * kappa).sin() / kappa).norm() < 1e-10);
        assert!(epd_retarded_mode(sym, zero, 1.0, 1.0, &q).is_err());
    }

    // scipy solve_ivp (rtol 1e-12) on u'' + 2 i m~ u'/(tau + 1) + u = f
    #[test]
    fn tau_oracle_fixture() {
        let data =
            ModeCauchyData::new(c(1.0, 0.0), c(0.0, 0.5)).with_source(ModeSource::new(|t: f64| c((-t).exp(), 0.0)));
        let u = solve_epd_tau(ModeSymbol::new(c(-1.0, 0.0)), c(0.8, 0.0), &data, 2.0, &tight()).unwrap();
        let want = c(0.741_734_665_611_174_423_1, 0.406_728_948_921_713_203_06);
        assert!((u - want).norm() < 1e-9, "{u}");
        let (e0, e1) = epd_fundamental_modes(ModeSymbol::new(c(-1.0, 0.0)), c(0.5, 0.0), 1.0, &tight()).unwrap();
        assert!((e0 - c(0.557_669_506_306_359_757_52, 0.100_266_478_737_839_307_39)).norm() < 1e-9, "{e0}");
        assert!((e1 - c(0.762_254_437_539_487_395_45, -0.312_920_960_354_040_684_16)).norm() < 1e-9, "{e1}");
    }

    #[test]
    fn time_oracle_fixture() {
        let p = CosmologyParams::new(2.0 / 3.0, c(0.3, 0.0), 1.0).unwrap();
        let data =
            ModeCauchyData::new(c(0.5, -0.25), c(0.0, 0.75)).with_source(ModeSource::new(|t: f64| c(t.cos(), 0.0)));
        let u = solve_epd_t(ModeSymbol::new(c(-1.0, 0.0)), &p, &data, 3.0, &tight()).unwrap();
        let want = c(0.188_014_215_755_995_395_74, 0.668_007_755_262_648_429_26);
        assert!((u - want).norm() < 1e-9, "{u}");
    }

    #[test]
    fn euler_case_closed_form() {
        for (ell, m) in [(0.5, c(0.3, 0.0)), (-1.0, c(1.0, 0.5)), (2.0 / 3.0, c(0.7, 0.0))] {
            let p = CosmologyParams::new(ell, m, 1.3).unwrap();
            let phi1 = c(0.2, -0.7);
            let data = ModeCauchyData::new(c(0.0, 0.0), phi1);
            let i = Complex64::i();
            for t in [1.3, 2.0, 6.5] {
                let u = solve_epd_t(ModeSymbol::new(c(0.0, 0.0)), &p, &data, t, &tight()).unwrap();
                let e = 1.0 - ell - 2.0 * i * m;
                let eps: f64 = 1.3;
                let want =
                    phi1 * cpow(eps, ell + 2.0 * i * m).unwrap() * (cpow(t, e).unwrap() - cpow(eps, e).unwrap()) / e;
                assert!((u - want).norm() < 1e-10 * (1.0 + want.norm()), "{ell} {t}: {u} vs {want}");
            }
        }
    }

    #[test]
    fn flat_time_matches_tau() {
        let m = c(0.6, 0.2);
        let p = CosmologyParams::new(0.0, m, 1.0).unwrap();
        let sym = ModeSymbol::new(c(-2.0, 0.0));
        let data =
            ModeCauchyData::new(c(0.3, 0.1), c(-0.4, 0.9)).with_source(ModeSource::new(|t: f64| c(t.sin(), 0.5)));
        let shifted = ModeCauchyData::new(data.phi0, data.phi1)
            .with_source(ModeSource::new(|tau: f64| c((tau + 1.0).sin(), 0.5)));
        for t in [1.0, 1.5, 3.0] {
            let a = solve_epd_t(sym, &p, &data, t, &tight()).unwrap();
            let b = solve_epd_tau(sym, m, &shifted, t - 1.0, &tight()).unwrap();
            assert!((a - b).norm() < 1e-10, "{t}: {a} vs {b}");
        }
    }

    #[test]
    fn source_support_is_respected() {
        let p = CosmologyParams::new(0.5, c(0.4, 0.0), 1.0).unwrap();
        let solver = EpdTimeSolver::new(&p, &tight()).unwrap();
        let sym = ModeSymbol::new(c(-1.0, 0.0));
        let bump = |t: f64| if (2.0..3.0).contains(&t) { c(((t - 2.0) * PI).sin().powi(4), 0.0) } else { c(0.0, 0.0) };
        let clipped =
            ModeCauchyData::new(c(0.0, 0.0), c(0.0, 0.0)).with_source(ModeSource::new(bump).with_support(2.0, 3.0));
        assert_eq!(solver.solve(sym, &clipped, 1.9).unwrap(), c(0.0, 0.0));
        let full = ModeCauchyData::new(c(0.0, 0.0), c(0.0, 0.0)).with_source(ModeSource::new(bump));
        let a = solver.solve(sym, &clipped, 4.0).unwrap();
        let b = solver.solve(sym, &full, 4.0).unwrap();
        assert!((a - b).norm() < 1e-9);
    }
}
