//! 4x4 gamma-matrix algebra in the Dirac representation, the Dirac operator
//! symbol on a Fourier mode, the symbol of its complementary (right co-factor)
//! operator, and exact checks of the factorization identities.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Neg, Sub};

use crate::cosmology::CosmologyParams;

pub type Spinor = [Complex64; 4];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Row-major 4x4 complex matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Matrix4c(pub [[Complex64; 4]; 4]);

impl Matrix4c {
    pub fn zero() -> Self {
        Self([[ZERO; 4]; 4])
    }

    pub fn identity() -> Self {
        Self::diag([ONE; 4])
    }

    pub fn diag(d: [Complex64; 4]) -> Self {
        let mut m = Self::zero();
        for i in 0..4 {
            m.0[i][i] = d[i];
        }
        m
    }

    /// `gamma^mu`: `gamma^0 = diag(I2, -I2)`, `gamma^k = [[0, sigma^k], [-sigma^k, 0]]`.
    pub fn gamma(mu: usize) -> Self {
        let sigma = match mu {
            0 => return Self::diag([ONE, ONE, -ONE, -ONE]),
            1 => [[ZERO, ONE], [ONE, ZERO]],
            2 => [[ZERO, -I], [I, ZERO]],
            3 => [[ONE, ZERO], [ZERO, -ONE]],
            _ => panic!("gamma index {mu} out of range 0..=3"),
        };
        let mut m = Self::zero();
        for r in 0..2 {
            for c in 0..2 {
                m.0[r][c + 2] = sigma[r][c];
                m.0[r + 2][c] = -sigma[r][c];
            }
        }
        m
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut m = *self;
        for row in m.0.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        m
    }

    pub fn mul_vec(&self, v: &Spinor) -> Spinor {
        let mut out = [ZERO; 4];
        for (o, row) in out.iter_mut().zip(&self.0) {
            *o = row[0] * v[0] + row[1] * v[1] + row[2] * v[2] + row[3] * v[3];
        }
        out
    }

    pub fn max_norm(&self) -> f64 {
        self.0.iter().flatten().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// Frobenius norm.
    pub fn frobenius(&self) -> f64 {
        self.0.iter().flatten().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn column(&self, c: usize) -> Spinor {
        [self.0[0][c], self.0[1][c], self.0[2][c], self.0[3][c]]
    }

    pub fn set_column(&mut self, c: usize, v: &Spinor) {
        for r in 0..4 {
            self.0[r][c] = v[r];
        }
    }
}

impl Add for Matrix4c {
    type Output = Matrix4c;
    fn add(self, rhs: Matrix4c) -> Matrix4c {
        let mut m = self;
        for r in 0..4 {
            for c in 0..4 {
                m.0[r][c] += rhs.0[r][c];
            }
        }
        m
    }
}

impl Sub for Matrix4c {
    type Output = Matrix4c;
    fn sub(self, rhs: Matrix4c) -> Matrix4c {
        self + (-rhs)
    }
}

impl Neg for Matrix4c {
    type Output = Matrix4c;
    fn neg(self) -> Matrix4c {
        self.scale(-ONE)
    }
}

impl Mul for Matrix4c {
    type Output = Matrix4c;
    fn mul(self, rhs: Matrix4c) -> Matrix4c {
        let mut m = Matrix4c::zero();
        for r in 0..4 {
            for c in 0..4 {
                let mut s = ZERO;
                for k in 0..4 {
                    s += self.0[r][k] * rhs.0[k][c];
                }
                m.0[r][c] = s;
            }
        }
        m
    }
}

/// `gamma_U = (I + gamma^0)/2` and `gamma_L = (I - gamma^0)/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectorPair {
    pub gamma_u: Matrix4c,
    pub gamma_l: Matrix4c,
}

impl ProjectorPair {
    pub fn new() -> Self {
        let half = Complex64::new(0.5, 0.0);
        let g0 = Matrix4c::gamma(0);
        let id = Matrix4c::identity();
        Self { gamma_u: (id + g0).scale(half), gamma_l: (id - g0).scale(half) }
    }
}

impl Default for ProjectorPair {
    fn default() -> Self {
        Self::new()
    }
}

/// First-order operator `coeff_dt d/dt + coeff_0` evaluated at one `(t, k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorSymbol {
    pub coeff_dt: Matrix4c,
    pub coeff_0: Matrix4c,
}

/// `sum_j M_j t^(e_j)`: matrices whose `t`-dependence is a sum of powers, so
/// that values and derivatives are exact.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerLawMatrix {
    pub terms: Vec<(Matrix4c, Complex64)>,
}

impl PowerLawMatrix {
    pub fn constant(m: Matrix4c) -> Self {
        Self { terms: vec![(m, ZERO)] }
    }

    pub fn power(m: Matrix4c, exponent: Complex64) -> Self {
        Self { terms: vec![(m, exponent)] }
    }

    pub fn plus(mut self, other: PowerLawMatrix) -> Self {
        self.terms.extend(other.terms);
        self
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self { terms: self.terms.iter().map(|(m, e)| (m.scale(s), *e)).collect() }
    }

    /// Product; exponents add.
    pub fn times(&self, other: &PowerLawMatrix) -> Self {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for (a, ea) in &self.terms {
            for (b, eb) in &other.terms {
                terms.push((*a * *b, ea + eb));
            }
        }
        Self { terms }
    }

    pub fn eval(&self, t: f64) -> Matrix4c {
        let lt = t.ln();
        self.terms.iter().fold(Matrix4c::zero(), |acc, (m, e)| acc + m.scale(t_pow(lt, *e)))
    }

    pub fn derivative(&self, t: f64) -> Matrix4c {
        let lt = t.ln();
        self.terms.iter().fold(Matrix4c::zero(), |acc, (m, e)| acc + m.scale(*e * t_pow(lt, *e - 1.0)))
    }
}

fn t_pow(ln_t: f64, e: Complex64) -> Complex64 {
    if e == ZERO {
        ONE
    } else {
        (e * ln_t).exp()
    }
}

/// Operator symbol with power-law coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerLawSymbol {
    pub coeff_dt: PowerLawMatrix,
    pub coeff_0: PowerLawMatrix,
}

impl PowerLawSymbol {
    pub fn at(&self, t: f64) -> OperatorSymbol {
        OperatorSymbol { coeff_dt: self.coeff_dt.eval(t), coeff_0: self.coeff_0.eval(t) }
    }
}

/// `sum_j gamma^j (i k_j)`.
fn spatial_sum(k: [f64; 3], gammas: impl Fn(usize) -> Matrix4c) -> Matrix4c {
    (0..3).fold(Matrix4c::zero(), |acc, j| acc + gammas(j + 1).scale(I * k[j]))
}

/// Dirac operator on the mode `e^{ik.x}`:
/// `i gamma^0 d/dt + i t^(-ell) sum gamma^j (i k_j) + (3 ell / 2t) i gamma^0 - (m/t) I`.
pub fn dirac_symbol_powerlaw(k: [f64; 3], p: &CosmologyParams) -> PowerLawSymbol {
    let ell = p.ell();
    let g0 = Matrix4c::gamma(0);
    let spatial = spatial_sum(k, Matrix4c::gamma).scale(I);
    let friction = g0.scale(I * (1.5 * ell)) - Matrix4c::identity().scale(p.mass());
    PowerLawSymbol {
        coeff_dt: PowerLawMatrix::constant(g0.scale(I)),
        coeff_0: PowerLawMatrix::power(spatial, Complex64::new(-ell, 0.0))
            .plus(PowerLawMatrix::power(friction, Complex64::new(-1.0, 0.0))),
    }
}

/// Complementary operator on the mode `e^{ik.x}`:
/// `i t^(-ell/2) gamma^0 S d/dt + i t^(-3ell/2) sum gamma^k S (i k_k)` with
/// `S = t^(im) gamma_U + t^(-im) gamma_L`.
pub fn dco_symbol_powerlaw(k: [f64; 3], p: &CosmologyParams) -> PowerLawSymbol {
    let ell = p.ell();
    let m = p.mass();
    let proj = ProjectorPair::new();
    let s = PowerLawMatrix::power(proj.gamma_u, I * m).plus(PowerLawMatrix::power(proj.gamma_l, -I * m));
    let dt = PowerLawMatrix::power(Matrix4c::gamma(0).scale(I), Complex64::new(-0.5 * ell, 0.0)).times(&s);
    let spatial = spatial_sum(k, Matrix4c::gamma).scale(I);
    let zeroth = PowerLawMatrix::power(spatial, Complex64::new(-1.5 * ell, 0.0)).times(&s);
    PowerLawSymbol { coeff_dt: dt, coeff_0: zeroth }
}

pub fn dirac_symbol(t: f64, k: [f64; 3], p: &CosmologyParams) -> OperatorSymbol {
    dirac_symbol_powerlaw(k, p).at(t)
}

pub fn dco_symbol(t: f64, k: [f64; 3], p: &CosmologyParams) -> OperatorSymbol {
    dco_symbol_powerlaw(k, p).at(t)
}

/// `coeff_dt psi' + coeff_0 psi`.
pub fn apply_symbol(sym: &OperatorSymbol, psi: &Spinor, dpsi: &Spinor) -> Spinor {
    let a = sym.coeff_dt.mul_vec(dpsi);
    let b = sym.coeff_0.mul_vec(psi);
    [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]
}

/// Spinor with polynomial entries `psi(t) = sum_n c_n t^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolySpinor {
    pub coeffs: Vec<Spinor>,
}

impl PolySpinor {
    /// `d^order psi / dt^order` at `t`.
    pub fn derivative(&self, t: f64, order: usize) -> Spinor {
        let mut out = [ZERO; 4];
        for (n, c) in self.coeffs.iter().enumerate() {
            if n < order {
                continue;
            }
            let falling: f64 = (0..order).map(|j| (n - j) as f64).product();
            let w = falling * t.powi((n - order) as i32);
            for i in 0..4 {
                out[i] += c[i] * w;
            }
        }
        out
    }
}

fn add(a: Spinor, b: Spinor) -> Spinor {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]
}

/// Residual of `D (Dco psi) = -diag(t^(-a) P(m), t^(-omega) P(-m)) psi` with
/// `a = ell/2 - im`, `omega = ell/2 + im` and
/// `P(m) u = u'' + t^(-2 ell) |k|^2 u + (ell + 2im) u' / t`, using exact
/// derivatives throughout. Normalized by `1 + |rhs|`.
pub fn verify_composition(t: f64, k: [f64; 3], p: &CosmologyParams, psi: &PolySpinor) -> f64 {
    let ell = p.ell();
    let m = p.mass();
    let d = dirac_symbol_powerlaw(k, p);
    let dco = dco_symbol_powerlaw(k, p);
    let (y0, y1, y2) = (psi.derivative(t, 0), psi.derivative(t, 1), psi.derivative(t, 2));

    let cdt = dco.coeff_dt.eval(t);
    let c0 = dco.coeff_0.eval(t);
    let chi = add(cdt.mul_vec(&y1), c0.mul_vec(&y0));
    let dchi = add(
        add(dco.coeff_dt.derivative(t).mul_vec(&y1), cdt.mul_vec(&y2)),
        add(dco.coeff_0.derivative(t).mul_vec(&y0), c0.mul_vec(&y1)),
    );
    let lhs = apply_symbol(&d.at(t), &chi, &dchi);

    let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
    let a = Complex64::new(0.5 * ell, 0.0) - I * m;
    let omega = Complex64::new(0.5 * ell, 0.0) + I * m;
    let lt = t.ln();
    let scalar_p =
        |mass: Complex64, i: usize| y2[i] + t.powf(-2.0 * ell) * k2 * y0[i] + (ell + 2.0 * I * mass) * y1[i] / t;
    let mut rhs = [ZERO; 4];
    for i in 0..2 {
        rhs[i] = -t_pow(lt, -a) * scalar_p(m, i);
        rhs[i + 2] = -t_pow(lt, -omega) * scalar_p(-m, i + 2);
    }
    let mut resid: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for i in 0..4 {
        resid = resid.max((lhs[i] - rhs[i]).norm());
        scale = scale.max(rhs[i].norm());
    }
    resid / (1.0 + scale)
}

/// Deviation of `sum_{k,j} (t^(-im) gU + t^(im) gL) g^k g^j (t^(im) gU + t^(-im) gL) (i k_k)(i k_j)`
/// from `|k|^2 I`, normalized by `max(1, |k|^2)`.
pub fn verify_commuting_condition(k: [f64; 3], t: f64, m: Complex64) -> f64 {
    let proj = ProjectorPair::new();
    let lt = t.ln();
    let left = proj.gamma_u.scale(t_pow(lt, -I * m)) + proj.gamma_l.scale(t_pow(lt, I * m));
    let right = proj.gamma_u.scale(t_pow(lt, I * m)) + proj.gamma_l.scale(t_pow(lt, -I * m));
    let mut sum = Matrix4c::zero();
    for a in 0..3 {
        for b in 0..3 {
            let w = (I * k[a]) * (I * k[b]);
            sum = sum + (left * Matrix4c::gamma(a + 1) * Matrix4c::gamma(b + 1) * right).scale(w);
        }
    }
    let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
    (sum - Matrix4c::identity().scale(Complex64::new(k2, 0.0))).max_norm() / k2.max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn eta(mu: usize, nu: usize) -> f64 {
        match (mu, nu) {
            (0, 0) => 1.0,
            (a, b) if a == b => -1.0,
            _ => 0.0,
        }
    }

    #[test]
    fn clifford_algebra() {
        for mu in 0..4 {
            for nu in 0..4 {
                let (g, h) = (Matrix4c::gamma(mu), Matrix4c::gamma(nu));
                let anti = g * h + h * g;
                let want = Matrix4c::identity().scale(c(2.0 * eta(mu, nu), 0.0));
                assert!((anti - want).max_norm() <= 1e-15, "{mu}{nu}");
            }
        }
    }

    #[test]
    fn projectors() {
        let p = ProjectorPair::new();
        assert_eq!(p.gamma_u * p.gamma_l, Matrix4c::zero());
        assert_eq!(p.gamma_u * p.gamma_u, p.gamma_u);
        assert_eq!(p.gamma_l * p.gamma_l, p.gamma_l);
        assert_eq!(p.gamma_u + p.gamma_l, Matrix4c::identity());
        assert_eq!(p.gamma_u, Matrix4c::diag([c(1.0, 0.0), c(1.0, 0.0), ZERO, ZERO]));
    }

    #[test]
    fn dirac_symbol_examples() {
        let p = CosmologyParams::new(0.0, c(0.7, 0.1), 1.0).unwrap();
        let s = dirac_symbol(2.0, [0.0; 3], &p);
        assert!((s.coeff_0 - Matrix4c::identity().scale(-c(0.7, 0.1) / 2.0)).max_norm() < 1e-16);
        assert_eq!(s.coeff_dt, Matrix4c::gamma(0).scale(I));
        // k = (1,0,0), ell = 1/2, t = 1, m = 0: i gamma^1 (i) + (3/4) i gamma^0, built entry by entry
        let p = CosmologyParams::new(0.5, ZERO, 1.0).unwrap();
        let s = dirac_symbol(1.0, [1.0, 0.0, 0.0], &p);
        let mut want = Matrix4c::zero();
        want.0[0][0] = c(0.0, 0.75);
        want.0[1][1] = c(0.0, 0.75);
        want.0[2][2] = c(0.0, -0.75);
        want.0[3][3] = c(0.0, -0.75);
        want.0[0][3] = c(-1.0, 0.0);
        want.0[1][2] = c(-1.0, 0.0);
        want.0[2][1] = c(1.0, 0.0);
        want.0[3][0] = c(1.0, 0.0);
        assert!((s.coeff_0 - want).max_norm() < 1e-16);
    }

    #[test]
    fn dco_symbol_examples() {
        let p = CosmologyParams::new(0.0, ZERO, 1.0).unwrap();
        let s = dco_symbol(3.0, [0.0; 3], &p);
        assert_eq!(s.coeff_dt, Matrix4c::gamma(0).scale(I));
        assert_eq!(s.coeff_0, Matrix4c::zero());
        let p = CosmologyParams::new(0.5, c(1.3, -0.4), 1.0).unwrap();
        let s = dco_symbol(1.0, [0.5, -1.0, 2.0], &p);
        let q = CosmologyParams::new(0.5, ZERO, 1.0).unwrap();
        let s0 = dco_symbol(1.0, [0.5, -1.0, 2.0], &q);
        assert!((s.coeff_dt - s0.coeff_dt).max_norm() < 1e-15);
        assert!((s.coeff_0 - s0.coeff_0).max_norm() < 1e-15);
    }

    #[test]
    fn dco_cross_check_against_block_form() {
        // upper-left block of i gamma^0 S is i t^(im) I2, lower-right is -i t^(-im) I2
        let p = CosmologyParams::new(2.0 / 3.0, c(0.8, 0.3), 1.0).unwrap();
        let t: f64 = 2.7;
        let s = dco_symbol(t, [0.0; 3], &p);
        let up = I * t.powf(-1.0 / 3.0) * (I * p.mass() * t.ln()).exp();
        let lo = -I * t.powf(-1.0 / 3.0) * (-I * p.mass() * t.ln()).exp();
        let want = Matrix4c::diag([up, up, lo, lo]);
        assert!((s.coeff_dt - want).max_norm() < 1e-14);
    }

    #[test]
    fn apply_symbol_examples() {
        let p = CosmologyParams::new(0.3, c(0.5, 0.0), 1.0).unwrap();
        let mut sym = dirac_symbol(1.5, [1.0, 2.0, 0.0], &p);
        sym.coeff_0 = Matrix4c::zero();
        let psi = [c(1.0, 2.0), c(0.0, 1.0), c(3.0, 0.0), c(-1.0, 0.0)];
        assert_eq!(apply_symbol(&sym, &psi, &[ZERO; 4]), [ZERO; 4]);
        let sym = dirac_symbol(1.5, [1.0, 2.0, 0.0], &p);
        let slope = [c(0.5, 0.0), ZERO, c(0.0, -1.0), ZERO];
        let got = apply_symbol(&sym, &psi, &slope);
        let want = add(sym.coeff_dt.mul_vec(&slope), sym.coeff_0.mul_vec(&psi));
        assert_eq!(got, want);
    }

    #[test]
    fn composition_zero_spinor() {
        let p = CosmologyParams::new(0.5, c(1.0, 0.0), 1.0).unwrap();
        let zero = PolySpinor { coeffs: vec![[ZERO; 4]; 3] };
        assert_eq!(verify_composition(1.7, [1.0, 0.0, 0.0], &p, &zero), 0.0);
    }

    #[test]
    fn commuting_condition_examples() {
        assert_eq!(verify_commuting_condition([0.0; 3], 2.0, c(0.3, 0.1)), 0.0);
        for t in [0.1, 1.0, 7.0] {
            assert!(verify_commuting_condition([1.0, 0.0, 0.0], t, c(1.5, -0.5)) <= 1e-14);
        }
    }

    fn spinor_strategy() -> impl Strategy<Value = Spinor> {
        proptest::array::uniform4((-1.0f64..1.0, -1.0f64..1.0).prop_map(|(a, b)| c(a, b)))
    }

    proptest! {
        #[test]
        fn composition_identity(t in 0.1f64..10.0, ell in -1.0f64..0.95,
                                mre in -2.0f64..2.0, mim in -1.0f64..1.0,
                                k in proptest::array::uniform3(-5.0f64..5.0),
                                coeffs in proptest::collection::vec(spinor_strategy(), 4)) {
            let p = CosmologyParams::new(ell, c(mre, mim), 1.0).unwrap();
            let r = verify_composition(t, k, &p, &PolySpinor { coeffs });
            prop_assert!(r <= 1e-12, "residual {r}");
        }

        #[test]
        fn commuting_condition(t in 0.1f64..10.0, mre in -2.0f64..2.0, mim in -2.0f64..2.0,
                       k in proptest::array::uniform3(-2.9f64..2.9)) {
            let r = verify_commuting_condition(k, t, c(mre, mim) * (2.0 / c(mre, mim).norm().max(2.0)));
            prop_assert!(r <= 1e-14, "residual {r}");
        }
    }
}
