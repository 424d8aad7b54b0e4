//! Power-law FLRW background `a(t) = a0 t^ell`: the parameter record, the
//! distance function `phi(t) = t^(1-ell)/(1-ell)` and the proper-time map
//! `tau = (phi(t) - phi(eps)) / phi(eps)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The triple `(ell, m, eps)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCosmology", into = "RawCosmology")]
pub struct CosmologyParams {
    ell: f64,
    mass: Complex64,
    epsilon: f64,
}

/// Serialized form with the complex mass split into real and imaginary parts.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawCosmology {
    pub ell: f64,
    #[serde(default)]
    pub mass_re: f64,
    #[serde(default)]
    pub mass_im: f64,
    pub epsilon: f64,
}

impl TryFrom<RawCosmology> for CosmologyParams {
    type Error = Error;

    fn try_from(raw: RawCosmology) -> Result<Self> {
        CosmologyParams::new(raw.ell, Complex64::new(raw.mass_re, raw.mass_im), raw.epsilon)
    }
}

impl From<CosmologyParams> for RawCosmology {
    fn from(p: CosmologyParams) -> Self {
        RawCosmology { ell: p.ell, mass_re: p.mass.re, mass_im: p.mass.im, epsilon: p.epsilon }
    }
}

/// `m~ = m / (1 - ell)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedMass(pub Complex64);

impl ReducedMass {
    pub fn value(self) -> Complex64 {
        self.0
    }
}

impl CosmologyParams {
    pub fn new(ell: f64, mass: Complex64, epsilon: f64) -> Result<Self> {
        if !ell.is_finite() || !mass.re.is_finite() || !mass.im.is_finite() || !epsilon.is_finite() {
            return Err(Error::NonFinite("cosmology parameters".into()));
        }
        if ell == 1.0 {
            return Err(Error::UnsupportedExponent);
        }
        if ell > 1.0 {
            return Err(Error::UnsupportedExtension(ell));
        }
        if epsilon <= 0.0 {
            return Err(Error::Domain(format!("initial time epsilon = {epsilon} must be positive")));
        }
        Ok(Self { ell, mass, epsilon })
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    pub fn mass(&self) -> Complex64 {
        self.mass
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Same background with the mass replaced (the lower spinor block uses `-m`).
    pub fn with_mass(&self, mass: Complex64) -> Self {
        Self { mass, ..*self }
    }

    pub fn reduced_mass(&self) -> ReducedMass {
        ReducedMass(self.mass / (1.0 - self.ell))
    }

    pub fn phi(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::Domain(format!("phi requires t > 0, got {t}")));
        }
        let q = 1.0 - self.ell;
        Ok(t.powf(q) / q)
    }

    pub fn phi_inv(&self, s: f64) -> Result<f64> {
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::Domain(format!("phi_inv requires s > 0, got {s}")));
        }
        let q = 1.0 - self.ell;
        Ok((q * s).powf(1.0 / q))
    }

    pub fn phi_eps(&self) -> f64 {
        let q = 1.0 - self.ell;
        self.epsilon.powf(q) / q
    }

    pub fn tau_of_t(&self, t: f64) -> Result<f64> {
        if !(t >= self.epsilon) {
            return Err(Error::Domain(format!("tau_of_t requires t >= eps = {}, got {t}", self.epsilon)));
        }
        // (t/eps)^(1-ell) - 1, written to be exact at t = eps
        Ok(((1.0 - self.ell) * (t / self.epsilon).ln()).exp_m1())
    }

    pub fn t_of_tau(&self, tau: f64) -> Result<f64> {
        if !(tau >= 0.0) || !tau.is_finite() {
            return Err(Error::Domain(format!("t_of_tau requires tau >= 0, got {tau}")));
        }
        Ok(self.epsilon * (tau + 1.0).powf(1.0 / (1.0 - self.ell)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(ell: f64, eps: f64) -> CosmologyParams {
        CosmologyParams::new(ell, Complex64::new(0.3, 0.0), eps).unwrap()
    }

    #[test]
    fn phi_examples() {
        assert!((params(0.0, 1.0).phi(1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((params(0.5, 1.0).phi(4.0).unwrap() - 4.0).abs() < 1e-15);
        assert!((params(2.0 / 3.0, 1.0).phi(8.0).unwrap() - 6.0).abs() < 1e-14);
        assert!(params(0.5, 1.0).phi(0.0).is_err());
        assert!(params(0.5, 1.0).phi(-1.0).is_err());
    }

    #[test]
    fn phi_inv_examples() {
        assert!((params(0.0, 1.0).phi_inv(1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((params(2.0 / 3.0, 1.0).phi_inv(6.0).unwrap() - 8.0).abs() < 1e-13);
        // root of 2 sqrt(t) = 0.37
        assert!((params(0.5, 1.0).phi_inv(0.37).unwrap() - 0.034_225).abs() < 1e-16);
        assert!(params(0.5, 1.0).phi_inv(0.0).is_err());
    }

    #[test]
    fn tau_examples() {
        let p = params(0.0, 1.0);
        assert_eq!(p.tau_of_t(1.0).unwrap(), 0.0);
        assert!((p.tau_of_t(3.0).unwrap() - 2.0).abs() < 1e-15);
        let p = params(0.5, 1.0);
        assert!((p.tau_of_t(4.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(p.tau_of_t(0.5).is_err());
        assert!(p.t_of_tau(-0.1).is_err());
        assert_eq!(params(0.7, 2.5).tau_of_t(2.5).unwrap(), 0.0);
    }

    #[test]
    fn rejected_exponents() {
        let m = Complex64::new(1.0, 0.0);
        assert_eq!(CosmologyParams::new(1.0, m, 1.0), Err(Error::UnsupportedExponent));
        assert_eq!(CosmologyParams::new(1.5, m, 1.0), Err(Error::UnsupportedExtension(1.5)));
        assert!(matches!(CosmologyParams::new(0.5, m, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn reduced_mass_round_trip() {
        let p = CosmologyParams::new(2.0 / 3.0, Complex64::new(1.0, 0.5), 1.0).unwrap();
        let back = p.reduced_mass().value() * (1.0 - p.ell());
        assert!((back - p.mass()).norm() < 1e-14);
    }

    #[test]
    fn serde_keys() {
        let p: CosmologyParams =
            serde_json::from_str(r#"{"ell":0.5,"mass_re":0.3,"mass_im":-0.1,"epsilon":2.0}"#).unwrap();
        assert_eq!(p.mass(), Complex64::new(0.3, -0.1));
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(json, r#"{"ell":0.5,"mass_re":0.3,"mass_im":-0.1,"epsilon":2.0}"#);
        assert!(serde_json::from_str::<CosmologyParams>(r#"{"ell":1.0,"epsilon":1.0}"#).is_err());
        assert!(serde_json::from_str::<CosmologyParams>(r#"{"ell":0.5,"epsilon":1.0,"mass":1}"#).is_err());
    }

    proptest! {
        #[test]
        fn round_trips(ell_idx in 0usize..6, eps in 0.1f64..5.0, s in 0.0f64..1.0) {
            let ell = [-1.0, 0.0, 0.25, 0.5, 2.0 / 3.0, 0.9][ell_idx];
            let p = params(ell, eps);
            let t = eps * (1.0 + 99.0 * s);
            let back = p.t_of_tau(p.tau_of_t(t).unwrap()).unwrap();
            prop_assert!((back - t).abs() <= 1e-12 * t);
            let back = p.phi_inv(p.phi(t).unwrap()).unwrap();
            prop_assert!((back - t).abs() <= 1e-12 * t);
        }

        #[test]
        fn phi_increasing(ell in -2.0f64..0.99, t in 0.01f64..100.0) {
            let p = params(ell, 1.0);
            prop_assert!(p.phi(t * 1.001).unwrap() > p.phi(t).unwrap());
        }
    }
}
