//! Dirac Cauchy problem on Fourier modes, reduced to two EPD problems.
//!
//! The spinor is written `Psi = Dco Phi`, where `Dco` is the complementary
//! operator. The upper half `Phi_U` solves the EPD equation with mass `m` and
//! the lower half `Phi_L` solves it with mass `-m`. Their data is
//! `Phi(eps) = 0`, `Phi_U'(eps) = -i eps^a Psi_U(eps)` and
//! `Phi_L'(eps) = i eps^omega Psi_L(eps)`, with sources `-t^a F_U` and
//! `-t^omega F_L`, where `a = ell/2 - im` and `omega = ell/2 + im`.
//! `Phi'` is taken by Richardson-extrapolated finite differences.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cosmology::CosmologyParams;
use crate::dirac_algebra::{apply_symbol, dco_symbol, dirac_symbol, Spinor};
use crate::epd_solver::{EpdTimeSolver, ModeCauchyData, ModeSource, ModeSymbol};
use crate::error::{Error, Result};
use crate::quadrature::{QuadValue, QuadratureConfig};
use crate::special_functions::cpow;

pub use crate::propagator::{
    sample_cauchy_propagator, sample_retarded_propagator, CauchyPropagator, KGrid, PropagatorSample,
    RetardedPropagator, TemporalMollifier,
};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Scalar time dependence of a mode source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TimeProfile {
    Constant,
    /// `exp(-rate (t - origin))`.
    Exponential {
        rate: f64,
        origin: f64,
    },
    /// `cos(omega t + phase)`.
    Cosine {
        omega: f64,
        phase: f64,
    },
    /// `(35/32) (1 - s^2)^3 / width` with `s = (t - center) / width`, zero for `|s| >= 1`.
    Bump {
        center: f64,
        width: f64,
    },
}

impl TimeProfile {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            TimeProfile::Constant => 1.0,
            TimeProfile::Exponential { rate, origin } => (-rate * (t - origin)).exp(),
            TimeProfile::Cosine { omega, phase } => (omega * t + phase).cos(),
            TimeProfile::Bump { center, width } => {
                let s = (t - center) / width;
                if s.abs() >= 1.0 {
                    0.0
                } else {
                    let u = 1.0 - s * s;
                    35.0 / 32.0 * u * u * u / width
                }
            }
        }
    }

    /// Interval outside which the profile vanishes, if bounded.
    pub fn support(&self) -> Option<(f64, f64)> {
        match *self {
            TimeProfile::Bump { center, width } => Some((center - width, center + width)),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            TimeProfile::Constant => true,
            TimeProfile::Exponential { rate, origin } => rate.is_finite() && origin.is_finite(),
            TimeProfile::Cosine { omega, phase } => omega.is_finite() && phase.is_finite(),
            TimeProfile::Bump { center, width } => center.is_finite() && width.is_finite() && width > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid time profile {self:?}")))
        }
    }
}

/// Mode source `F(t) = amplitude * profile(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinorSource {
    pub amplitude: Spinor,
    pub profile: TimeProfile,
}

impl SpinorSource {
    pub fn new(amplitude: Spinor, profile: TimeProfile) -> Self {
        Self { amplitude, profile }
    }

    pub fn eval(&self, t: f64) -> Spinor {
        let s = self.profile.value(t);
        self.amplitude.map(|a| a * s)
    }
}

/// One Fourier mode `e^{ik.x}` of the Cauchy data and source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinorMode {
    pub k: [f64; 3],
    pub amplitude: Spinor,
    pub source: Option<SpinorSource>,
}

impl SpinorMode {
    pub fn new(k: [f64; 3], amplitude: Spinor) -> Self {
        Self { k, amplitude, source: None }
    }

    pub fn with_source(mut self, source: SpinorSource) -> Self {
        self.source = Some(source);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.k.iter().all(|v| v.is_finite())
            && self.amplitude.iter().all(|c| c.is_finite())
            && self.source.is_none_or(|s| s.amplitude.iter().all(|c| c.is_finite()));
        if !finite {
            return Err(Error::NonFinite(format!("spinor mode {self:?}")));
        }
        if let Some(s) = &self.source {
            s.profile.validate()?;
        }
        Ok(())
    }
}

/// Finite superposition of modes with distinct wave vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierField {
    pub modes: Vec<SpinorMode>,
}

impl FourierField {
    pub fn new(modes: Vec<SpinorMode>) -> Result<Self> {
        let field = Self { modes };
        field.validate()?;
        Ok(field)
    }

    pub fn validate(&self) -> Result<()> {
        if self.modes.is_empty() {
            return Err(Error::InvalidParameter("Fourier field has no modes".into()));
        }
        for (i, m) in self.modes.iter().enumerate() {
            m.validate()?;
            if self.modes[..i].iter().any(|o| o.k == m.k) {
                return Err(Error::InvalidParameter(format!("duplicate wave vector {:?}", m.k)));
            }
        }
        Ok(())
    }

    /// Gaussian packet `amplitude * (dk/2pi)^3 exp(-sigma^2 |k - k0|^2 / 2)` on the
    /// `(2n+1)^3` lattice `k = k0 + dk (i, j, l)`, ordered lexicographically.
    pub fn gaussian_packet(k0: [f64; 3], dk: f64, n: u32, sigma: f64, amplitude: Spinor) -> Result<Self> {
        if !(dk > 0.0 && sigma > 0.0 && dk.is_finite() && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("packet needs dk > 0 and sigma > 0, got {dk}, {sigma}")));
        }
        let n = n as i64;
        let norm = (dk / (2.0 * std::f64::consts::PI)).powi(3);
        let mut modes = Vec::new();
        for i in -n..=n {
            for j in -n..=n {
                for l in -n..=n {
                    let d = [i as f64 * dk, j as f64 * dk, l as f64 * dk];
                    let w = norm * (-0.5 * sigma * sigma * (d[0] * d[0] + d[1] * d[1] + d[2] * d[2])).exp();
                    let k = [k0[0] + d[0], k0[1] + d[1], k0[2] + d[2]];
                    modes.push(SpinorMode::new(k, amplitude.map(|a| a * w)));
                }
            }
        }
        Self::new(modes)
    }
}

/// Quadrature settings for Dirac solves. The tolerance is tighter than the
/// EPD default because `Phi'` is formed by finite differences.
pub fn default_dirac_quadrature() -> QuadratureConfig {
    QuadratureConfig { rel_tol: 1e-12, abs_tol: 1e-15, max_depth: 40 }
}

/// Finite-difference step at `t`: cube root of machine epsilon times `t`.
pub(crate) fn fd_step(t: f64) -> f64 {
    f64::EPSILON.cbrt() * t
}

/// Richardson-extrapolated derivative of `f` at `t` from steps `h` and `h/2`.
/// Central differences are used unless `t` is within `10h` of `t_min`, where
/// second-order forward differences take over.
pub(crate) fn richardson_derivative<V, F>(f: F, t: f64, t_min: f64, f_t: &V) -> Result<V>
where
    V: QuadValue,
    F: Fn(f64) -> Result<V>,
{
    let h = fd_step(t);
    if !(h > 0.0) || t + 0.5 * h == t {
        return Err(Error::StepUnderflow { t, h });
    }
    let combine = |terms: &[(f64, &V)]| {
        let mut out = f_t.zero_like();
        for (w, v) in terms {
            out.add_scaled(v, *w);
        }
        out
    };
    let (coarse, fine) = if t - t_min < 10.0 * h {
        let (f1, f2, f4) = (f(t + 0.5 * h)?, f(t + h)?, f(t + 2.0 * h)?);
        let coarse = combine(&[(-3.0 / (2.0 * h), f_t), (4.0 / (2.0 * h), &f2), (-1.0 / (2.0 * h), &f4)]);
        let fine = combine(&[(-3.0 / h, f_t), (4.0 / h, &f1), (-1.0 / h, &f2)]);
        (coarse, fine)
    } else {
        let (m2, m1, p1, p2) = (f(t - h)?, f(t - 0.5 * h)?, f(t + 0.5 * h)?, f(t + h)?);
        let coarse = combine(&[(1.0 / (2.0 * h), &p2), (-1.0 / (2.0 * h), &m2)]);
        let fine = combine(&[(1.0 / h, &p1), (-1.0 / h, &m1)]);
        (coarse, fine)
    };
    let mut out = fine.scaled(Complex64::new(4.0 / 3.0, 0.0));
    out.add_scaled(&coarse, -1.0 / 3.0);
    Ok(out)
}

/// Solver for single Dirac modes at fixed cosmology parameters.
#[derive(Debug, Clone)]
pub struct DiracModeSolver {
    params: CosmologyParams,
    upper: EpdTimeSolver,
    lower: EpdTimeSolver,
}

/// EPD data for one spinor half.
type HalfData = ModeCauchyData<[Complex64; 2]>;

impl DiracModeSolver {
    pub fn new(p: &CosmologyParams, q: &QuadratureConfig) -> Result<Self> {
        let m = p.mass();
        Ok(Self {
            params: *p,
            upper: EpdTimeSolver::new(&p.with_mass(m), q)?,
            lower: EpdTimeSolver::new(&p.with_mass(-m), q)?,
        })
    }

    pub fn params(&self) -> &CosmologyParams {
        &self.params
    }

    /// `a = ell/2 - im` and `omega = ell/2 + im`.
    pub fn exponents(&self) -> (Complex64, Complex64) {
        let half = Complex64::new(0.5 * self.params.ell(), 0.0);
        let im = Complex64::i() * self.params.mass();
        (half - im, half + im)
    }

    fn half_data(&self, mode: &SpinorMode) -> Result<(HalfData, HalfData)> {
        let eps = self.params.epsilon();
        let (a, omega) = self.exponents();
        let i = Complex64::i();
        let ca = -i * cpow(eps, a)?;
        let cw = i * cpow(eps, omega)?;
        let psi = mode.amplitude;
        let mut up = HalfData::new([ZERO; 2], [ca * psi[0], ca * psi[1]]);
        let mut lo = HalfData::new([ZERO; 2], [cw * psi[2], cw * psi[3]]);
        if let Some(src) = mode.source {
            let support = src.profile.support();
            let make = |offset: usize, exponent: Complex64| {
                let s = ModeSource::new(move |b: f64| {
                    let f = src.eval(b);
                    let w = -(exponent * b.ln()).exp();
                    [w * f[offset], w * f[offset + 1]]
                });
                match support {
                    Some((lo, hi)) => s.with_support(lo, hi),
                    None => s,
                }
            };
            up = up.with_source(make(0, a));
            lo = lo.with_source(make(2, omega));
        }
        Ok((up, lo))
    }

    fn phi(&self, sym: ModeSymbol, data: &(HalfData, HalfData), t: f64) -> Result<Spinor> {
        let u = self.upper.solve(sym, &data.0, t)?;
        let l = self.lower.solve(sym, &data.1, t)?;
        Ok([u[0], u[1], l[0], l[1]])
    }

    /// `(Psi(t), Phi(t), Phi'(t))` for one mode.
    pub fn solve_with_potential(&self, mode: &SpinorMode, t: f64) -> Result<(Spinor, Spinor, Spinor)> {
        mode.validate()?;
        let eps = self.params.epsilon();
        if !(t >= eps) || !t.is_finite() {
            return Err(Error::Domain(format!("Dirac solve requires t >= eps = {eps}, got {t}")));
        }
        let sym = ModeSymbol::laplacian(mode.k);
        let data = self.half_data(mode)?;
        let phi = self.phi(sym, &data, t)?;
        let dphi = richardson_derivative(|s| self.phi(sym, &data, s), t, eps, &phi)?;
        let psi = apply_symbol(&dco_symbol(t, mode.k, &self.params), &phi, &dphi);
        if psi.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite(format!("Dirac mode solution at t = {t}")));
        }
        Ok((psi, phi, dphi))
    }

    pub fn solve(&self, mode: &SpinorMode, t: f64) -> Result<Spinor> {
        Ok(self.solve_with_potential(mode, t)?.0)
    }
}

pub fn solve_dirac_mode(mode: &SpinorMode, p: &CosmologyParams, t: f64, q: &QuadratureConfig) -> Result<Spinor> {
    DiracModeSolver::new(p, q)?.solve(mode, t)
}

/// Max-norm of `D Psi - F` at `t`, with `Psi'` from finite differences of `psi_at`.
pub fn dirac_residual<F>(mode: &SpinorMode, p: &CosmologyParams, t: f64, psi_at: F) -> Result<f64>
where
    F: Fn(f64) -> Result<Spinor>,
{
    let psi = psi_at(t)?;
    let dpsi = richardson_derivative(&psi_at, t, p.epsilon(), &psi)?;
    let lhs = apply_symbol(&dirac_symbol(t, mode.k, p), &psi, &dpsi);
    let f = mode.source.map_or([ZERO; 4], |s| s.eval(t));
    Ok((0..4).fold(0.0, |m: f64, i| m.max((lhs[i] - f[i]).norm())))
}

/// `t^(3 ell) |Psi|^2`, conserved for real mass and no source.
pub fn charge(psi: &Spinor, t: f64, ell: f64) -> f64 {
    t.powf(3.0 * ell) * psi.iter().map(|c| c.norm_sqr()).sum::<f64>()
}

/// `Psi(x, t) = sum_modes e^{ik.x} Psi_k(t)` at every `(time, point)` pair,
/// indexed `[time][point]`. Modes are solved in parallel and summed in field order.
pub fn solve_dirac_field(
    field: &FourierField,
    p: &CosmologyParams,
    times: &[f64],
    points: &[[f64; 3]],
    q: &QuadratureConfig,
) -> Result<Vec<Vec<Spinor>>> {
    field.validate()?;
    let solver = DiracModeSolver::new(p, q)?;
    let per_mode: Vec<Vec<Spinor>> = field
        .modes
        .par_iter()
        .map(|m| times.iter().map(|&t| solver.solve(m, t)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let mut out = vec![vec![[ZERO; 4]; points.len()]; times.len()];
    for (mode, values) in field.modes.iter().zip(&per_mode) {
        for (x_idx, x) in points.iter().enumerate() {
            let phase = Complex64::from_polar(1.0, mode.k[0] * x[0] + mode.k[1] * x[1] + mode.k[2] * x[2]);
            for (t_idx, v) in values.iter().enumerate() {
                let slot = &mut out[t_idx][x_idx];
                for c in 0..4 {
                    slot[c] += phase * v[c];
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{oracle_dirac_mode, ORACLE_ABS_TOL, ORACLE_REL_TOL};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn rel_err(a: &Spinor, b: &Spinor) -> f64 {
        let d = (0..4).fold(0.0, |m: f64, i| m.max((a[i] - b[i]).norm()));
        let s = b.iter().fold(0.0, |m: f64, z| m.max(z.norm()));
        d / (1.0 + s)
    }

    fn q() -> QuadratureConfig {
        default_dirac_quadrature()
    }

    #[test]
    fn oracle_fixture_matter_era() {
        // adaptive ODE oracle on the first-order system: ell = 2/3, m = 1, k = (1,0,0), t = 3
        let p = CosmologyParams::new(2.0 / 3.0, c(1.0, 0.0), 1.0).unwrap();
        let mode = SpinorMode::new([1.0, 0.0, 0.0], [c(1.0, 0.0), ZERO, ZERO, ZERO]);
        let got = solve_dirac_mode(&mode, &p, 3.0, &q()).unwrap();
        let want = [
            c(-0.050182169365871866951, -0.20941536273923949173),
            ZERO,
            ZERO,
            c(-0.021671777912445392558, -0.25351213162243823909),
        ];
        assert!(rel_err(&got, &want) <= 1e-7, "{got:?}");
    }

    #[test]
    fn zero_wavevector_power_law() {
        let p = CosmologyParams::new(0.5, c(0.7, 0.0), 1.0).unwrap();
        let amp = [c(1.0, 0.5), c(-0.3, 0.0), c(0.0, 2.0), c(0.4, -0.1)];
        let mode = SpinorMode::new([0.0; 3], amp);
        let solver = DiracModeSolver::new(&p, &q()).unwrap();
        for t in [1.0, 1.5, 4.0] {
            let got = solver.solve(&mode, t).unwrap();
            let up = cpow(t, c(-0.75, -0.7)).unwrap();
            let lo = cpow(t, c(-0.75, 0.7)).unwrap();
            let want = [amp[0] * up, amp[1] * up, amp[2] * lo, amp[3] * lo];
            assert!(rel_err(&got, &want) <= 1e-8, "t={t}: {got:?} vs {want:?}");
        }
    }

    #[test]
    fn initial_data_recovered() {
        let p = CosmologyParams::new(-1.0, c(1.0, 0.5), 1.0).unwrap();
        let amp = [c(1.0, 0.0), c(0.0, 0.2), c(0.3, 0.0), c(-0.5, 0.1)];
        let mode = SpinorMode::new([1.0, 1.0, 1.0], amp);
        let got = solve_dirac_mode(&mode, &p, 1.0, &q()).unwrap();
        assert!(rel_err(&got, &amp) <= 1e-8, "{got:?}");
    }

    #[test]
    fn flat_massless_and_sourced_match_oracle() {
        let cases = [(0.0, c(0.0, 0.0), [0.0, 2.0, 0.0]), (2.0 / 3.0, c(1.0, 0.0), [1.0, 0.5, 0.0])];
        for (ell, m, k) in cases {
            let p = CosmologyParams::new(ell, m, 1.0).unwrap();
            let src = SpinorSource::new(
                [c(0.2, 0.0), ZERO, c(0.0, -0.1), c(0.3, 0.0)],
                TimeProfile::Exponential { rate: 1.0, origin: 1.0 },
            );
            let mode = SpinorMode::new(k, [c(1.0, 0.0), c(0.0, 0.2), c(0.3, 0.0), c(-0.5, 0.1)]).with_source(src);
            let want = oracle_dirac_mode(&mode, &p, &[1.0, 2.0], ORACLE_REL_TOL, ORACLE_ABS_TOL).unwrap();
            let got = solve_dirac_mode(&mode, &p, 2.0, &q()).unwrap();
            assert!(rel_err(&got, &want[1]) <= 1e-6, "ell={ell}: {got:?} vs {:?}", want[1]);
        }
    }

    #[test]
    fn residual_and_charge() {
        let p = CosmologyParams::new(0.5, c(0.5, 0.0), 1.0).unwrap();
        let mode = SpinorMode::new([1.0, 0.0, 1.0], [c(1.0, 0.0), c(0.5, 0.5), ZERO, c(0.0, 1.0)]);
        let solver = DiracModeSolver::new(&p, &q()).unwrap();
        let r = dirac_residual(&mode, &p, 2.5, |t| solver.solve(&mode, t)).unwrap();
        assert!(r <= 1e-5, "residual {r}");
        let q0 = charge(&mode.amplitude, 1.0, 0.5);
        for t in [2.0, 4.0] {
            let q1 = charge(&solver.solve(&mode, t).unwrap(), t, 0.5);
            assert!((q1 / q0 - 1.0).abs() <= 1e-6, "t={t}: {q1} vs {q0}");
        }
    }

    #[test]
    fn linear_in_data_and_source() {
        let p = CosmologyParams::new(0.5, c(0.3, 0.0), 1.0).unwrap();
        let solver = DiracModeSolver::new(&p, &q()).unwrap();
        let profile = TimeProfile::Cosine { omega: 2.0, phase: 0.1 };
        let a = SpinorMode::new([0.5, 0.0, 0.0], [c(1.0, 0.0), ZERO, ZERO, ZERO])
            .with_source(SpinorSource::new([ZERO, c(1.0, 0.0), ZERO, ZERO], profile));
        let b = SpinorMode::new([0.5, 0.0, 0.0], [ZERO, ZERO, c(0.0, 1.0), ZERO])
            .with_source(SpinorSource::new([ZERO, ZERO, ZERO, c(0.5, 0.0)], profile));
        let mut sum = a;
        sum.amplitude = [a.amplitude, b.amplitude]
            .iter()
            .fold([ZERO; 4], |s, v| [s[0] + v[0], s[1] + v[1], s[2] + v[2], s[3] + v[3]]);
        sum.source = Some(SpinorSource::new([ZERO, c(1.0, 0.0), ZERO, c(0.5, 0.0)], profile));
        let (ya, yb, ys) =
            (solver.solve(&a, 2.0).unwrap(), solver.solve(&b, 2.0).unwrap(), solver.solve(&sum, 2.0).unwrap());
        let comb = [ya[0] + yb[0], ya[1] + yb[1], ya[2] + yb[2], ya[3] + yb[3]];
        assert!(rel_err(&ys, &comb) <= 1e-11);
    }

    #[test]
    fn field_superposition() {
        let p = CosmologyParams::new(0.5, c(0.4, 0.0), 1.0).unwrap();
        let m1 = SpinorMode::new([1.0, 0.0, 0.0], [c(1.0, 0.0), ZERO, ZERO, ZERO]);
        let m2 = SpinorMode::new([0.0, -1.0, 0.0], [ZERO, ZERO, c(0.0, 1.0), ZERO]);
        let x = [[0.3, -0.2, 0.1]];
        let one = solve_dirac_field(&FourierField::new(vec![m1]).unwrap(), &p, &[2.0], &x, &q()).unwrap();
        let direct = solve_dirac_mode(&m1, &p, 2.0, &q()).unwrap();
        let phase = Complex64::from_polar(1.0, 0.3);
        for i in 0..4 {
            assert!((one[0][0][i] - phase * direct[i]).norm() <= 1e-15);
        }
        let two = solve_dirac_field(&FourierField::new(vec![m1, m2]).unwrap(), &p, &[2.0], &x, &q()).unwrap();
        let other = solve_dirac_field(&FourierField::new(vec![m2]).unwrap(), &p, &[2.0], &x, &q()).unwrap();
        for i in 0..4 {
            assert!((two[0][0][i] - one[0][0][i] - other[0][0][i]).norm() <= 1e-14);
        }
        assert!(FourierField::new(vec![m1, m1]).is_err());
        assert!(FourierField::new(vec![]).is_err());
    }

    #[test]
    fn profiles() {
        let b = TimeProfile::Bump { center: 2.0, width: 0.5 };
        assert_eq!(b.value(2.6), 0.0);
        assert_eq!(b.support(), Some((1.5, 2.5)));
        assert!((b.value(2.0) - 35.0 / 16.0).abs() < 1e-15);
        assert!(TimeProfile::Bump { center: 1.0, width: 0.0 }.validate().is_err());
        assert_eq!(TimeProfile::Constant.support(), None);
    }

    #[test]
    fn rejects_early_time() {
        let p = CosmologyParams::new(0.5, c(0.4, 0.0), 1.0).unwrap();
        let m1 = SpinorMode::new([1.0, 0.0, 0.0], [c(1.0, 0.0), ZERO, ZERO, ZERO]);
        assert!(matches!(solve_dirac_mode(&m1, &p, 0.5, &q()), Err(Error::Domain(_))));
    }
}
