//! Mollified samples of the retarded and Cauchy fundamental solutions of the
//! Dirac operator on a band-limited cubic k-lattice.
//!
//! The point source is replaced by `g(x) = (2 pi sigma^2)^(-3/2) exp(-|x - x0|^2 / 2 sigma^2)`,
//! represented by its Fourier coefficients on the lattice `k = dk n`, `|n_i| <= K/dk`.
//! Column `c` of the matrix is the solution whose source (retarded) or initial
//! value (Cauchy) is `g e_c`. Every mode only needs the scalar EPD solution
//! `S(|k|, t)` of each spinor half, so one quadrature per time handles all
//! lattice shells `|n|^2 = const` at once.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::cosmology::CosmologyParams;
use crate::dirac_algebra::{Matrix4c, ProjectorPair};
use crate::dirac_solver::{fd_step, richardson_derivative, TimeProfile};
use crate::epd_solver::{EpdTimeSolver, ModeCauchyData, ModeSource};
use crate::error::{Error, Result};
use crate::kernels::TimeKernels;
use crate::quadrature::{integrate, QuadratureConfig};
use crate::special_functions::cpow;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Gaussian tail `exp(-sigma^2 K^2 / 2)` above which the cutoff is flagged.
const BAND_TAIL: f64 = 1e-6;

/// Cubic lattice `k = spacing * n` with `|k_i| <= cutoff`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KGrid {
    pub spacing: f64,
    pub cutoff: f64,
}

impl KGrid {
    pub fn new(spacing: f64, cutoff: f64) -> Result<Self> {
        let g = Self { spacing, cutoff };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.spacing > 0.0 && self.cutoff >= self.spacing && self.cutoff.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "k-grid needs 0 < spacing <= cutoff, got spacing {} cutoff {}",
                self.spacing, self.cutoff
            )));
        }
        if self.n_max() > 400 {
            return Err(Error::InvalidParameter(format!(
                "k-grid with {} points per axis is too large",
                2 * self.n_max() + 1
            )));
        }
        Ok(())
    }

    /// Grid that resolves a mollifier of width `sigma` (cutoff `6/sigma`) in
    /// a periodic box wide enough that images stay beyond `reach`.
    pub fn for_mollifier(sigma: f64, reach: f64) -> Result<Self> {
        let length = 2.0 * reach + 10.0 * sigma;
        Self::new(2.0 * PI / length, 6.0 / sigma)
    }

    pub fn n_max(&self) -> usize {
        (self.cutoff / self.spacing + 1e-9).floor() as usize
    }

    /// Period of the lattice sum in each direction.
    pub fn box_length(&self) -> f64 {
        2.0 * PI / self.spacing
    }

    pub fn mode_count(&self) -> usize {
        (2 * self.n_max() + 1).pow(3)
    }
}

/// Time dependence of the mollified point source of the retarded propagator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TemporalMollifier {
    /// C^2 bump of half-width `sigma` centred on `t0`.
    #[default]
    Bump,
    /// Exact delta in time: the source integral collapses onto `b = t0`.
    Delta,
}

/// One sample of a mollified propagator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropagatorSample {
    pub x: [f64; 3],
    pub t: f64,
    pub x0: [f64; 3],
    pub t0: f64,
    pub value: Matrix4c,
    pub mollifier_sigma: f64,
    /// `|x - x0| - (phi(t) - phi(t0))`: positive outside the light cone.
    pub cone_distance: f64,
    pub warnings: Vec<String>,
}

/// Lattice shells `|n|^2 = s`, each with its `|k|` and Gaussian weight.
#[derive(Debug, Clone)]
struct Shells {
    n_max: usize,
    spacing: f64,
    /// Shell index for each `|n|^2`, `usize::MAX` if no lattice point has it.
    index: Vec<usize>,
    kappa: Vec<f64>,
    weight: Vec<f64>,
}

impl Shells {
    fn new(grid: &KGrid, sigma: f64) -> Self {
        let n = grid.n_max();
        let mut present = vec![false; 3 * n * n + 1];
        for i in 0..=n {
            for j in 0..=n {
                for l in 0..=n {
                    present[i * i + j * j + l * l] = true;
                }
            }
        }
        let norm = (grid.spacing / (2.0 * PI)).powi(3);
        let mut index = vec![usize::MAX; present.len()];
        let (mut kappa, mut weight) = (Vec::new(), Vec::new());
        for (s, &p) in present.iter().enumerate() {
            if p {
                index[s] = kappa.len();
                let k = grid.spacing * (s as f64).sqrt();
                kappa.push(k);
                weight.push(norm * (-0.5 * sigma * sigma * k * k).exp());
            }
        }
        Self { n_max: n, spacing: grid.spacing, index, kappa, weight }
    }

    fn len(&self) -> usize {
        self.kappa.len()
    }

    fn kappa_max(&self) -> f64 {
        self.kappa.last().copied().unwrap_or(0.0)
    }
}

/// `v_i cos(kappa_i r)`: the wave solution at every sampled `|k|`.
fn wave(kappa: &[f64], r: f64, v: &[Complex64]) -> Vec<Complex64> {
    v.iter().zip(kappa).map(|(x, k)| x * (k * r).cos()).collect()
}

/// Where the per-shell functions `S(|k|, t)` are evaluated. `S` is entire in
/// `|k|` with exponential type at most the largest cone radius `R`, so when
/// the lattice has many shells it is sampled at Chebyshev points on
/// `[0, kappa_max]` and interpolated barycentrically.
#[derive(Debug, Clone)]
enum KappaSampling {
    Direct,
    Chebyshev { nodes: Vec<f64>, weights: Vec<f64> },
}

impl KappaSampling {
    fn new(shells: &Shells, radius: f64) -> Self {
        let kmax = shells.kappa_max();
        let n = (1.5 * kmax * radius).ceil() as usize + 32;
        if n >= shells.len() || kmax == 0.0 {
            return KappaSampling::Direct;
        }
        let nodes = (0..=n).map(|j| 0.5 * kmax * (1.0 - (PI * j as f64 / n as f64).cos())).collect();
        let weights = (0..=n)
            .map(|j| {
                let w = if j % 2 == 0 { 1.0 } else { -1.0 };
                if j == 0 || j == n {
                    0.5 * w
                } else {
                    w
                }
            })
            .collect();
        KappaSampling::Chebyshev { nodes, weights }
    }

    fn points<'a>(&'a self, shells: &'a Shells) -> &'a [f64] {
        match self {
            KappaSampling::Direct => &shells.kappa,
            KappaSampling::Chebyshev { nodes, .. } => nodes,
        }
    }

    /// Values on every shell from values at `points`.
    fn expand(&self, shells: &Shells, values: &[Complex64]) -> Vec<Complex64> {
        let (nodes, weights) = match self {
            KappaSampling::Direct => return values.to_vec(),
            KappaSampling::Chebyshev { nodes, weights } => (nodes, weights),
        };
        shells
            .kappa
            .iter()
            .map(|&k| {
                if let Some(j) = nodes.iter().position(|&x| x == k) {
                    return values[j];
                }
                let (mut num, mut den) = (ZERO, 0.0);
                for ((x, w), v) in nodes.iter().zip(weights).zip(values) {
                    let c = w / (k - x);
                    num += v * c;
                    den += c;
                }
                num / den
            })
            .collect()
    }
}

/// Per-shell `S` and `S'` for both spinor halves at one time.
#[derive(Debug, Clone)]
struct ShellValues {
    upper: Vec<Complex64>,
    lower: Vec<Complex64>,
    d_upper: Vec<Complex64>,
    d_lower: Vec<Complex64>,
}

/// Everything needed to sample a propagator at one time for any `x`.
#[derive(Debug, Clone)]
pub struct PropagatorSlice {
    t: f64,
    t0: f64,
    x0: [f64; 3],
    sigma: f64,
    cone_radius: f64,
    coeff_dt: Matrix4c,
    coeff_spatial: [Matrix4c; 3],
    values: ShellValues,
    shells: Shells,
    warnings: Vec<String>,
}

impl PropagatorSlice {
    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn cone_radius(&self) -> f64 {
        self.cone_radius
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Matrix value at `x`, summed over the lattice in a fixed order.
    pub fn sample(&self, x: [f64; 3]) -> PropagatorSample {
        let y = [x[0] - self.x0[0], x[1] - self.x0[1], x[2] - self.x0[2]];
        let n = self.shells.n_max as i64;
        let dk = self.shells.spacing;
        let axis: Vec<Vec<Complex64>> =
            y.iter().map(|&ya| (-n..=n).map(|i| Complex64::from_polar(1.0, dk * i as f64 * ya)).collect()).collect();
        let v = &self.values;
        let (mut au, mut al) = (ZERO, ZERO);
        let (mut bu, mut bl) = ([ZERO; 3], [ZERO; 3]);
        for (a, ea) in axis[0].iter().enumerate() {
            let i = a as i64 - n;
            for (b, eb) in axis[1].iter().enumerate() {
                let j = b as i64 - n;
                let eab = ea * eb;
                for (c, ec) in axis[2].iter().enumerate() {
                    let l = c as i64 - n;
                    let idx = self.shells.index[(i * i + j * j + l * l) as usize];
                    let w = eab * ec * self.shells.weight[idx];
                    au += w * v.d_upper[idx];
                    al += w * v.d_lower[idx];
                    let (su, sl) = (w * v.upper[idx], w * v.lower[idx]);
                    for (d, nd) in [i, j, l].into_iter().enumerate() {
                        let ik = Complex64::new(0.0, dk * nd as f64);
                        bu[d] += ik * su;
                        bl[d] += ik * sl;
                    }
                }
            }
        }
        let diag = |u: Complex64, l: Complex64| Matrix4c::diag([u, u, l, l]);
        let mut value = self.coeff_dt * diag(au, al);
        for d in 0..3 {
            value = value + self.coeff_spatial[d] * diag(bu[d], bl[d]);
        }
        let dist = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
        PropagatorSample {
            x,
            t: self.t,
            x0: self.x0,
            t0: self.t0,
            value,
            mollifier_sigma: self.sigma,
            cone_distance: dist - self.cone_radius,
            warnings: self.warnings.clone(),
        }
    }
}

/// Shared setup of the two propagators.
#[derive(Debug, Clone)]
struct Common {
    params: CosmologyParams,
    x0: [f64; 3],
    sigma: f64,
    grid: KGrid,
    q: QuadratureConfig,
    shells: Shells,
}

impl Common {
    fn new(p: &CosmologyParams, x0: [f64; 3], sigma: f64, grid: &KGrid, q: &QuadratureConfig) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("mollifier width must be positive, got {sigma}")));
        }
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("source point {x0:?}")));
        }
        grid.validate()?;
        q.validate()?;
        Ok(Self { params: *p, x0, sigma, grid: *grid, q: *q, shells: Shells::new(grid, sigma) })
    }

    fn exponents(&self) -> (Complex64, Complex64) {
        let half = Complex64::new(0.5 * self.params.ell(), 0.0);
        let im = Complex64::i() * self.params.mass();
        (half - im, half + im)
    }

    fn warnings(&self, reach: f64) -> Vec<String> {
        let mut w = Vec::new();
        let tail = (-0.5 * (self.sigma * self.grid.cutoff).powi(2)).exp();
        if tail > BAND_TAIL {
            w.push(format!(
                "k-grid cutoff {} under-resolves the mollifier: exp(-sigma^2 K^2 / 2) = {tail:.1e} for sigma = {}",
                self.grid.cutoff, self.sigma
            ));
        }
        let half_box = 0.5 * self.grid.box_length();
        if half_box < reach {
            w.push(format!(
                "periodic images: half box length {half_box:.4} is below the support reach {reach:.4}; decrease the k spacing"
            ));
        }
        for msg in &w {
            log::warn!("{msg}");
        }
        w
    }

    /// Assembles the slice from per-time shell values of both halves.
    /// `radius` bounds every `r` the kernels are integrated over, and
    /// `shell_values(s, kappa)` returns `S` at time `s` for each `kappa`,
    /// upper half first.
    fn slice<F>(&self, t: f64, t0: f64, t_min: f64, radius: f64, reach: f64, shell_values: F) -> Result<PropagatorSlice>
    where
        F: Fn(f64, &[f64]) -> Result<Vec<Complex64>>,
    {
        let sampling = KappaSampling::new(&self.shells, radius);
        let kappa = sampling.points(&self.shells);
        let d = kappa.len();
        let at = |s: f64| shell_values(s, kappa);
        let both = at(t)?;
        let dboth = richardson_derivative(at, t, t_min, &both)?;
        let expand = |v: &[Complex64]| sampling.expand(&self.shells, v);
        let values = ShellValues {
            upper: expand(&both[..d]),
            lower: expand(&both[d..]),
            d_upper: expand(&dboth[..d]),
            d_lower: expand(&dboth[d..]),
        };
        let p = &self.params;
        let im = Complex64::i() * p.mass();
        let proj = ProjectorPair::new();
        let lt = t.ln();
        let s = proj.gamma_u.scale((im * lt).exp()) + proj.gamma_l.scale((-im * lt).exp());
        let i = Complex64::i();
        let coeff_dt = Matrix4c::gamma(0).scale(i * t.powf(-0.5 * p.ell())) * s;
        let spatial = |j: usize| Matrix4c::gamma(j + 1).scale(i * t.powf(-1.5 * p.ell())) * s;
        Ok(PropagatorSlice {
            t,
            t0,
            x0: self.x0,
            sigma: self.sigma,
            cone_radius: p.phi(t)? - p.phi(t0)?,
            coeff_dt,
            coeff_spatial: [spatial(0), spatial(1), spatial(2)],
            values,
            shells: self.shells.clone(),
            warnings: self.warnings(reach),
        })
    }
}

/// Mollified retarded fundamental solution `D E = delta(x - x0) delta(t - t0) I`,
/// with zero data at `eps` and per-half source prefactors `t^a`, `t^omega`.
#[derive(Debug, Clone)]
pub struct RetardedPropagator {
    common: Common,
    t0: f64,
    temporal: TemporalMollifier,
    upper: EpdTimeSolver,
    lower: EpdTimeSolver,
    upper_kernels: TimeKernels,
    lower_kernels: TimeKernels,
}

impl RetardedPropagator {
    pub fn new(
        p: &CosmologyParams,
        x0: [f64; 3],
        t0: f64,
        sigma: f64,
        grid: &KGrid,
        temporal: TemporalMollifier,
        q: &QuadratureConfig,
    ) -> Result<Self> {
        let common = Common::new(p, x0, sigma, grid, q)?;
        let eps = p.epsilon();
        let earliest = match temporal {
            TemporalMollifier::Bump => t0 - sigma,
            TemporalMollifier::Delta => t0,
        };
        if !(earliest >= eps) || !t0.is_finite() {
            return Err(Error::Domain(format!(
                "retarded propagator needs the source to start after eps = {eps}; source starts at {earliest}"
            )));
        }
        let m = p.mass();
        let (pu, pl) = (p.with_mass(m), p.with_mass(-m));
        Ok(Self {
            common,
            t0,
            temporal,
            upper: EpdTimeSolver::new(&pu, q)?,
            lower: EpdTimeSolver::new(&pl, q)?,
            upper_kernels: TimeKernels::new(&pu)?,
            lower_kernels: TimeKernels::new(&pl)?,
        })
    }

    /// Spatial width plus the cone spread from the temporal bump.
    pub fn effective_sigma(&self) -> Result<f64> {
        let p = &self.common.params;
        Ok(match self.temporal {
            TemporalMollifier::Bump => {
                let s = self.common.sigma;
                s + p.phi(self.t0)? - p.phi(self.t0 - s)?
            }
            TemporalMollifier::Delta => self.common.sigma,
        })
    }

    fn shell_values(&self, s: f64, kappa: &[f64]) -> Result<Vec<Complex64>> {
        let d = kappa.len();
        let (a, omega) = self.common.exponents();
        let p = &self.common.params;
        let on_shells = |r: f64, v: &Vec<Complex64>| wave(kappa, r, v);
        let mut out = Vec::with_capacity(2 * d);
        let halves = [(&self.upper, &self.upper_kernels, a), (&self.lower, &self.lower_kernels, omega)];
        for (solver, kernels, exponent) in halves {
            let half = match self.temporal {
                TemporalMollifier::Bump => {
                    let profile = TimeProfile::Bump { center: self.t0, width: self.common.sigma };
                    let src = ModeSource::new(move |b: f64| vec![-(exponent * b.ln()).exp() * profile.value(b); d])
                        .with_support(self.t0 - self.common.sigma, self.t0 + self.common.sigma);
                    let data = ModeCauchyData::new(vec![ZERO; d], vec![ZERO; d]).with_source(src);
                    solver.represent(s, &on_shells, &data)?
                }
                TemporalMollifier::Delta => {
                    let (ps, p0) = (p.phi(s)?, p.phi(self.t0)?);
                    let pref = -cpow(self.t0, exponent + p.ell())?;
                    let tk = kernels.tau_kernels();
                    let ones = vec![Complex64::new(1.0, 0.0); d];
                    let integral = integrate(
                        |r| {
                            let g = tk.g_core(ps, p0, r)?;
                            Ok(wave(kappa, r, &ones).into_iter().map(|w| w * g).collect::<Vec<_>>())
                        },
                        0.0,
                        (ps - p0).max(0.0),
                        &self.common.q,
                    )?;
                    integral.value.into_iter().map(|v| v * pref).collect()
                }
            };
            out.extend(half);
        }
        Ok(out)
    }

    pub fn at_time(&self, t: f64) -> Result<PropagatorSlice> {
        if !(t > self.t0) || !t.is_finite() {
            return Err(Error::Domain(format!("retarded samples need t > t0 = {}, got {t}", self.t0)));
        }
        let p = &self.common.params;
        let t_min = match self.temporal {
            TemporalMollifier::Bump => p.epsilon(),
            TemporalMollifier::Delta => self.t0,
        };
        if self.temporal == TemporalMollifier::Delta && t - self.t0 < 2.0 * fd_step(t) {
            return Err(Error::StepUnderflow { t, h: fd_step(t) });
        }
        let earliest = match self.temporal {
            TemporalMollifier::Bump => self.t0 - self.common.sigma,
            TemporalMollifier::Delta => self.t0,
        };
        let radius = p.phi(t + 2.0 * fd_step(t))? - p.phi(earliest)?;
        let reach = p.phi(t)? - p.phi(self.t0)? + 5.0 * self.effective_sigma()? + 5.0 * self.common.sigma;
        self.common.slice(t, self.t0, t_min, radius, reach, |s, k| self.shell_values(s, k))
    }
}

/// Mollified Cauchy fundamental solution with `E(x, eps) = g(x) I` and no source.
#[derive(Debug, Clone)]
pub struct CauchyPropagator {
    common: Common,
    upper: EpdTimeSolver,
    lower: EpdTimeSolver,
}

impl CauchyPropagator {
    pub fn new(p: &CosmologyParams, x0: [f64; 3], sigma: f64, grid: &KGrid, q: &QuadratureConfig) -> Result<Self> {
        let common = Common::new(p, x0, sigma, grid, q)?;
        let m = p.mass();
        Ok(Self {
            common,
            upper: EpdTimeSolver::new(&p.with_mass(m), q)?,
            lower: EpdTimeSolver::new(&p.with_mass(-m), q)?,
        })
    }

    fn shell_values(&self, s: f64, kappa: &[f64]) -> Result<Vec<Complex64>> {
        let d = kappa.len();
        let (a, omega) = self.common.exponents();
        let eps = self.common.params.epsilon();
        let i = Complex64::i();
        let on_shells = |r: f64, v: &Vec<Complex64>| wave(kappa, r, v);
        let up = ModeCauchyData::new(vec![ZERO; d], vec![-i * cpow(eps, a)?; d]);
        let lo = ModeCauchyData::new(vec![ZERO; d], vec![i * cpow(eps, omega)?; d]);
        let mut out = self.upper.represent(s, &on_shells, &up)?;
        out.extend(self.lower.represent(s, &on_shells, &lo)?);
        Ok(out)
    }

    pub fn at_time(&self, t: f64) -> Result<PropagatorSlice> {
        let p = &self.common.params;
        let eps = p.epsilon();
        if !(t >= eps) || !t.is_finite() {
            return Err(Error::Domain(format!("Cauchy samples need t >= eps = {eps}, got {t}")));
        }
        let radius = p.phi(t + 2.0 * fd_step(t))? - p.phi(eps)?;
        let reach = radius + 10.0 * self.common.sigma;
        self.common.slice(t, eps, eps, radius, reach, |s, k| self.shell_values(s, k))
    }
}

/// Single retarded sample with the default bump in time.
#[allow(clippy::too_many_arguments)]
pub fn sample_retarded_propagator(
    x: [f64; 3],
    t: f64,
    x0: [f64; 3],
    t0: f64,
    p: &CosmologyParams,
    sigma: f64,
    grid: &KGrid,
    q: &QuadratureConfig,
) -> Result<PropagatorSample> {
    Ok(RetardedPropagator::new(p, x0, t0, sigma, grid, TemporalMollifier::Bump, q)?.at_time(t)?.sample(x))
}

pub fn sample_cauchy_propagator(
    x: [f64; 3],
    t: f64,
    x0: [f64; 3],
    p: &CosmologyParams,
    sigma: f64,
    grid: &KGrid,
    q: &QuadratureConfig,
) -> Result<PropagatorSample> {
    Ok(CauchyPropagator::new(p, x0, sigma, grid, q)?.at_time(t)?.sample(x))
}

/// Quadrature settings for propagator samples.
pub fn default_propagator_quadrature() -> QuadratureConfig {
    QuadratureConfig { rel_tol: 1e-10, abs_tol: 1e-13, max_depth: 40 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dirac_solver::{SpinorMode, SpinorSource};
    use crate::oracle::oracle_dirac_mode;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Brute force: per-mode ODE with the mollified source, summed over the lattice.
    fn brute_force(
        p: &CosmologyParams,
        grid: &KGrid,
        sigma: f64,
        x: [f64; 3],
        t: f64,
        t0: f64,
        cauchy: bool,
    ) -> Matrix4c {
        let n = grid.n_max() as i64;
        let dk = grid.spacing;
        let norm = (dk / (2.0 * PI)).powi(3);
        let mut out = Matrix4c::zero();
        for i in -n..=n {
            for j in -n..=n {
                for l in -n..=n {
                    let k = [dk * i as f64, dk * j as f64, dk * l as f64];
                    let g = norm * (-0.5 * sigma * sigma * (k[0] * k[0] + k[1] * k[1] + k[2] * k[2])).exp();
                    let phase = Complex64::from_polar(g, k[0] * x[0] + k[1] * x[1] + k[2] * x[2]);
                    for col in 0..4 {
                        let mut e = [ZERO; 4];
                        e[col] = c(1.0, 0.0);
                        let mode = if cauchy {
                            SpinorMode::new(k, e)
                        } else {
                            SpinorMode::new(k, [ZERO; 4])
                                .with_source(SpinorSource::new(e, TimeProfile::Bump { center: t0, width: sigma }))
                        };
                        let y = oracle_dirac_mode(&mode, p, &[p.epsilon(), t], 1e-11, 1e-14).unwrap();
                        for row in 0..4 {
                            out.0[row][col] += phase * y[1][row];
                        }
                    }
                }
            }
        }
        out
    }

    #[test]
    fn retarded_matches_per_mode_oracle() {
        let grid = KGrid::new(1.0, 2.0).unwrap();
        let sigma = 0.3;
        let q = default_propagator_quadrature();
        for (ell, m) in [(0.0, 0.0), (2.0 / 3.0, 1.0)] {
            let p = CosmologyParams::new(ell, c(m, 0.0), 1.0).unwrap();
            let x = [0.2, -0.1, 0.3];
            let got = sample_retarded_propagator(x, 2.2, [0.0; 3], 1.5, &p, sigma, &grid, &q).unwrap();
            let want = brute_force(&p, &grid, sigma, x, 2.2, 1.5, false);
            let err = (got.value - want).max_norm() / want.max_norm();
            assert!(err <= 1e-6, "ell={ell} m={m}: rel err {err}");
            assert!(!got.warnings.is_empty());
        }
    }

    #[test]
    fn cauchy_matches_per_mode_oracle() {
        let grid = KGrid::new(1.0, 2.0).unwrap();
        let p = CosmologyParams::new(0.5, c(0.5, 0.0), 1.0).unwrap();
        let q = default_propagator_quadrature();
        let x = [0.1, 0.4, -0.2];
        let got = sample_cauchy_propagator(x, 1.8, [0.0; 3], &p, 0.4, &grid, &q).unwrap();
        let want = brute_force(&p, &grid, 0.4, x, 1.8, 1.0, true);
        let err = (got.value - want).max_norm() / want.max_norm();
        assert!(err <= 1e-6, "rel err {err}");
    }

    #[test]
    fn cauchy_at_initial_time_is_mollifier() {
        let sigma = 0.5;
        let grid = KGrid::new(0.6, 12.0).unwrap();
        let p = CosmologyParams::new(0.5, c(0.5, 0.0), 1.0).unwrap();
        let prop = CauchyPropagator::new(&p, [0.0; 3], sigma, &grid, &default_propagator_quadrature()).unwrap();
        let slice = prop.at_time(1.0).unwrap();
        for x in [[0.0, 0.0, 0.0], [0.3, 0.2, -0.4]] {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            let g = (2.0 * PI * sigma * sigma).powf(-1.5) * (-r2 / (2.0 * sigma * sigma)).exp();
            let want = Matrix4c::identity().scale(c(g, 0.0));
            let err = (slice.sample(x).value - want).max_norm();
            assert!(err <= 1e-7 * g.max(1.0), "x={x:?}: err {err}");
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = CosmologyParams::new(0.5, c(0.5, 0.0), 1.0).unwrap();
        let grid = KGrid::new(1.0, 2.0).unwrap();
        let q = default_propagator_quadrature();
        assert!(RetardedPropagator::new(&p, [0.0; 3], 1.1, 0.3, &grid, TemporalMollifier::Bump, &q).is_err());
        assert!(RetardedPropagator::new(&p, [0.0; 3], 1.5, -0.3, &grid, TemporalMollifier::Bump, &q).is_err());
        let r = RetardedPropagator::new(&p, [0.0; 3], 1.5, 0.3, &grid, TemporalMollifier::Delta, &q).unwrap();
        assert!(r.at_time(1.4).is_err());
        assert!(KGrid::new(0.0, 1.0).is_err());
        assert!(KGrid::new(1.0, 0.5).is_err());
    }

    #[test]
    fn grid_helpers() {
        let g = KGrid::new(0.5, 2.0).unwrap();
        assert_eq!(g.n_max(), 4);
        assert_eq!(g.mode_count(), 729);
        let s = Shells::new(&g, 1.0);
        // 7 = not a sum of three squares
        assert_eq!(s.index[7], usize::MAX);
        assert_eq!(s.kappa[s.index[9]], 1.5);
    }

    #[test]
    fn chebyshev_sampling_matches_direct() {
        let p = CosmologyParams::new(0.5, c(0.5, 0.0), 1.0).unwrap();
        let grid = KGrid::new(0.8, 12.0).unwrap();
        let q = default_propagator_quadrature();
        let prop = RetardedPropagator::new(&p, [0.0; 3], 1.3, 0.2, &grid, TemporalMollifier::Delta, &q).unwrap();
        let shells = &prop.common.shells;
        let sampling = KappaSampling::new(shells, 1.0);
        assert!(matches!(sampling, KappaSampling::Chebyshev { .. }));
        let direct = prop.shell_values(2.0, &shells.kappa).unwrap();
        let nodes = prop.shell_values(2.0, sampling.points(shells)).unwrap();
        let n = sampling.points(shells).len();
        let interp = sampling.expand(shells, &nodes[..n]);
        let err = interp.iter().zip(&direct).fold(0.0, |m: f64, (a, b)| m.max((a - b).norm()));
        let scale = direct.iter().fold(0.0, |m: f64, v| m.max(v.norm()));
        assert!(err <= 1e-9 * scale, "interpolation error {err} of {scale}");
    }
}
