//! Independent brute-force reference: adaptive Dormand-Prince 5(4)
//! integration of the per-mode equations, used to check every closed-form
//! representation in this crate.

use num_complex::Complex64;

use crate::cosmology::CosmologyParams;
use crate::dirac_algebra::{dirac_symbol, Matrix4c, Spinor};
use crate::dirac_solver::SpinorMode;
use crate::epd_solver::{ModeCauchyData, ModeSymbol};
use crate::error::{Error, Result};

pub type Rhs<'a> = Box<dyn Fn(f64, &[Complex64], &mut [Complex64]) + 'a>;

/// First-order system `y' = rhs(t, y)` with initial state `y(t0) = y0`.
pub struct OdeProblem<'a> {
    pub dimension: usize,
    pub rhs: Rhs<'a>,
    pub t0: f64,
    pub y0: Vec<Complex64>,
    pub rel_tol: f64,
    pub abs_tol: f64,
}

#[derive(Debug, Clone)]
pub struct OdeSolution {
    pub times: Vec<f64>,
    pub states: Vec<Vec<Complex64>>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

/// Default oracle tolerances.
pub const ORACLE_REL_TOL: f64 = 1e-12;
pub const ORACLE_ABS_TOL: f64 = 1e-14;

const MAX_STEPS: usize = 5_000_000;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Weighted RMS norm over the `2n` real components.
fn error_norm(err: &[Complex64], y: &[Complex64], y_new: &[Complex64], rtol: f64, atol: f64) -> f64 {
    let mut acc = 0.0;
    for ((e, a), b) in err.iter().zip(y).zip(y_new) {
        let sr = atol + rtol * a.re.abs().max(b.re.abs());
        let si = atol + rtol * a.im.abs().max(b.im.abs());
        acc += (e.re / sr).powi(2) + (e.im / si).powi(2);
    }
    (acc / (2 * err.len()).max(1) as f64).sqrt()
}

fn combine(out: &mut [Complex64], y: &[Complex64], h: f64, terms: &[(f64, &[Complex64])]) {
    for i in 0..out.len() {
        let mut s = Complex64::new(0.0, 0.0);
        for (w, k) in terms {
            s += k[i] * *w;
        }
        out[i] = y[i] + s * h;
    }
}

/// Integrates `prob` and records the state at each time of `t_grid`
/// (non-decreasing, all `>= t0`). Steps are shortened to land on grid times.
pub fn integrate(prob: &OdeProblem, t_grid: &[f64]) -> Result<OdeSolution> {
    let n = prob.dimension;
    if prob.y0.len() != n {
        return Err(Error::InvalidParameter(format!("initial state has {} entries, expected {n}", prob.y0.len())));
    }
    if !(prob.rel_tol > 0.0 && prob.abs_tol > 0.0) {
        return Err(Error::InvalidParameter("ODE tolerances must be positive".into()));
    }
    let mut prev = prob.t0;
    for &t in t_grid {
        if !(t >= prev) || !t.is_finite() {
            return Err(Error::Ordering(format!("output times must be non-decreasing from t0 = {}", prob.t0)));
        }
        prev = t;
    }
    let zero = Complex64::new(0.0, 0.0);
    let f = &prob.rhs;
    let mut t = prob.t0;
    let mut y = prob.y0.clone();
    let mut k1 = vec![zero; n];
    let mut k2 = vec![zero; n];
    let mut k3 = vec![zero; n];
    let mut k4 = vec![zero; n];
    let mut k5 = vec![zero; n];
    let mut k6 = vec![zero; n];
    let mut k7 = vec![zero; n];
    let mut tmp = vec![zero; n];
    let mut y_new = vec![zero; n];
    let mut err = vec![zero; n];
    f(t, &y, &mut k1);

    let t_end = t_grid.last().copied().unwrap_or(t);
    let mut h = initial_step(prob, &y, &k1, t_end - t);
    let mut err_old: f64 = 1e-4;
    let mut accepted = 0;
    let mut rejected = 0;
    let mut states = Vec::with_capacity(t_grid.len());
    let mut times = Vec::with_capacity(t_grid.len());

    for &target in t_grid {
        while t < target {
            if accepted + rejected > MAX_STEPS {
                return Err(Error::StepUnderflow { t, h });
            }
            let remaining = target - t;
            let last = h >= remaining;
            let step = if last { remaining } else { h };
            if step < 1e-14 * t.abs().max(1.0) && !last {
                return Err(Error::StepUnderflow { t, h: step });
            }
            combine(&mut tmp, &y, step, &[(A21, &k1)]);
            f(t + C2 * step, &tmp, &mut k2);
            combine(&mut tmp, &y, step, &[(A31, &k1), (A32, &k2)]);
            f(t + C3 * step, &tmp, &mut k3);
            combine(&mut tmp, &y, step, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
            f(t + C4 * step, &tmp, &mut k4);
            combine(&mut tmp, &y, step, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
            f(t + C5 * step, &tmp, &mut k5);
            combine(&mut tmp, &y, step, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]);
            let t_next = if last { target } else { t + step };
            f(t_next, &tmp, &mut k6);
            combine(&mut y_new, &y, step, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
            f(t_next, &y_new, &mut k7);
            for i in 0..n {
                err[i] = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * step;
            }
            let e = error_norm(&err, &y, &y_new, prob.rel_tol, prob.abs_tol);
            if !e.is_finite() {
                return Err(Error::NonFinite(format!("ODE state near t = {t}")));
            }
            // PI step-size control
            let expo = 0.2 - 0.04 * 0.75;
            if e <= 1.0 {
                let fac = (e.powf(expo) / err_old.powf(0.04) / 0.9).clamp(0.2, 10.0);
                err_old = e.max(1e-4);
                t = t_next;
                std::mem::swap(&mut y, &mut y_new);
                std::mem::swap(&mut k1, &mut k7);
                accepted += 1;
                if !last {
                    h = step / fac;
                }
            } else {
                let fac = (e.powf(expo) / 0.9).min(5.0);
                h = step / fac;
                rejected += 1;
            }
        }
        times.push(target);
        states.push(y.clone());
    }
    Ok(OdeSolution { times, states, accepted_steps: accepted, rejected_steps: rejected })
}

fn initial_step(prob: &OdeProblem, y: &[Complex64], f0: &[Complex64], span: f64) -> f64 {
    let scale = |v: &[Complex64]| {
        let s: f64 = v.iter().zip(y).map(|(a, b)| (a.norm() / (prob.abs_tol + prob.rel_tol * b.norm())).powi(2)).sum();
        (s / v.len().max(1) as f64).sqrt()
    };
    let d0 = scale(y);
    let d1 = scale(f0);
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h = h.min(1e-3 * span.abs().max(1e-300)).max(1e-12 * prob.t0.abs().max(1.0));
    if span > 0.0 {
        h.min(span)
    } else {
        h
    }
}

/// Oracle for `u'' + (ell + 2 i m) u' / t - lambda t^(-2 ell) u = f`, from `(phi0, phi1)` at `eps`.
pub fn oracle_epd_mode_t(
    sym: ModeSymbol,
    p: &CosmologyParams,
    data: &ModeCauchyData,
    t_grid: &[f64],
    rel_tol: f64,
    abs_tol: f64,
) -> Result<Vec<Complex64>> {
    let ell = p.ell();
    let damping = ell + 2.0 * Complex64::i() * p.mass();
    let lambda = sym.lambda;
    let source = data.source.clone();
    let rhs = move |t: f64, y: &[Complex64], dy: &mut [Complex64]| {
        let f = source.as_ref().map_or(Complex64::new(0.0, 0.0), |s| (s.f)(t));
        dy[0] = y[1];
        dy[1] = f + lambda * t.powf(-2.0 * ell) * y[0] - damping * y[1] / t;
    };
    let prob = OdeProblem {
        dimension: 2,
        rhs: Box::new(rhs),
        t0: p.epsilon(),
        y0: vec![data.phi0, data.phi1],
        rel_tol,
        abs_tol,
    };
    Ok(integrate(&prob, t_grid)?.states.into_iter().map(|s| s[0]).collect())
}

/// Oracle for `u'' + 2 i m~ u' / (tau + 1) - lambda u = f`, from `(phi0, phi1)` at `tau = 0`.
pub fn oracle_epd_mode_tau(
    sym: ModeSymbol,
    mt: Complex64,
    data: &ModeCauchyData,
    tau_grid: &[f64],
    rel_tol: f64,
    abs_tol: f64,
) -> Result<Vec<Complex64>> {
    let lambda = sym.lambda;
    let damping = 2.0 * Complex64::i() * mt;
    let source = data.source.clone();
    let rhs = move |tau: f64, y: &[Complex64], dy: &mut [Complex64]| {
        let f = source.as_ref().map_or(Complex64::new(0.0, 0.0), |s| (s.f)(tau));
        dy[0] = y[1];
        dy[1] = f + lambda * y[0] - damping * y[1] / (tau + 1.0);
    };
    let prob =
        OdeProblem { dimension: 2, rhs: Box::new(rhs), t0: 0.0, y0: vec![data.phi0, data.phi1], rel_tol, abs_tol };
    Ok(integrate(&prob, tau_grid)?.states.into_iter().map(|s| s[0]).collect())
}

/// Oracle for the first-order Dirac mode system
/// `psi' = -i gamma0 (F - C0(t) psi)` with `C0` the zeroth-order Dirac symbol.
pub fn oracle_dirac_mode(
    mode: &SpinorMode,
    p: &CosmologyParams,
    t_grid: &[f64],
    rel_tol: f64,
    abs_tol: f64,
) -> Result<Vec<Spinor>> {
    let k = mode.k;
    let params = *p;
    let source = mode.source;
    let g0 = Matrix4c::gamma(0);
    let mi = -Complex64::i();
    let rhs = move |t: f64, y: &[Complex64], dy: &mut [Complex64]| {
        let sym = dirac_symbol(t, k, &params);
        let psi: Spinor = [y[0], y[1], y[2], y[3]];
        let c0psi = sym.coeff_0.mul_vec(&psi);
        let f = source.as_ref().map_or([Complex64::new(0.0, 0.0); 4], |s| s.eval(t));
        let mut w = [Complex64::new(0.0, 0.0); 4];
        for i in 0..4 {
            w[i] = f[i] - c0psi[i];
        }
        let out = g0.mul_vec(&w);
        for i in 0..4 {
            dy[i] = mi * out[i];
        }
    };
    let prob =
        OdeProblem { dimension: 4, rhs: Box::new(rhs), t0: p.epsilon(), y0: mode.amplitude.to_vec(), rel_tol, abs_tol };
    Ok(integrate(&prob, t_grid)?.states.into_iter().map(|s| [s[0], s[1], s[2], s[3]]).collect())
}
