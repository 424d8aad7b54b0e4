//! Run configuration: one TOML file with a block per subcommand, dotted-key
//! overrides from the command line, and validation before any computation.

use std::fmt;
use std::path::{Path, PathBuf};

use flrw_core::dirac_solver::TimeProfile;
use flrw_core::propagator::TemporalMollifier;
use flrw_core::quadrature::QuadratureConfig;
use flrw_core::{Complex64, CosmologyParams};
use serde::Deserialize;

/// A configuration problem; maps to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Config error naming the offending key.
pub fn invalid(key: &str, msg: impl fmt::Display) -> anyhow::Error {
    ConfigError(format!("{key}: {msg}")).into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub cosmology: CosmologyBlock,
    /// Output file; stdout when absent.
    pub output: Option<PathBuf>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub quadrature: QuadratureBlock,
    #[serde(default)]
    pub kernel: KernelBlock,
    #[serde(default)]
    pub epd: EpdBlock,
    #[serde(default)]
    pub dirac: DiracBlock,
    #[serde(default)]
    pub propagator: PropagatorBlock,
    #[serde(default)]
    pub verify: VerifyBlock,
}

fn default_seed() -> u64 {
    flrw_core::verify::VerifyConfig::default().seed
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CosmologyBlock {
    pub ell: f64,
    pub mass_re: f64,
    pub mass_im: f64,
    pub epsilon: f64,
}

impl Default for CosmologyBlock {
    fn default() -> Self {
        Self { ell: 0.5, mass_re: 1.0, mass_im: 0.0, epsilon: 1.0 }
    }
}

impl CosmologyBlock {
    pub fn params(&self) -> anyhow::Result<CosmologyParams> {
        CosmologyParams::new(self.ell, Complex64::new(self.mass_re, self.mass_im), self.epsilon)
            .map_err(|e| invalid("cosmology", e))
    }
}

/// Partial quadrature settings layered over each command's defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureBlock {
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    pub max_depth: Option<usize>,
}

impl QuadratureBlock {
    pub fn over(&self, base: QuadratureConfig) -> anyhow::Result<QuadratureConfig> {
        let q = QuadratureConfig {
            rel_tol: self.rel_tol.unwrap_or(base.rel_tol),
            abs_tol: self.abs_tol.unwrap_or(base.abs_tol),
            max_depth: self.max_depth.unwrap_or(base.max_depth),
        };
        q.validate().map_err(|e| invalid("quadrature", e))?;
        Ok(q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    E,
    K1,
    K0,
    K0Fused,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coordinate {
    Tau,
    T,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelBlock {
    pub kind: KernelKind,
    pub coordinate: Coordinate,
    /// Values of `tau` or `t`, depending on `coordinate`.
    pub times: Vec<f64>,
    /// Radii per time, spread evenly from 0 to the cone radius.
    pub r_count: usize,
    /// Source time `b` (`tau`) or `t0` (`t`) of the `e` kernel.
    pub source_time: Option<f64>,
}

impl Default for KernelBlock {
    fn default() -> Self {
        Self {
            kind: KernelKind::K1,
            coordinate: Coordinate::Tau,
            times: vec![0.5, 1.0, 2.0],
            r_count: 5,
            source_time: None,
        }
    }
}

/// Spinor or scalar amplitude split into real and imaginary parts.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceBlock {
    pub amplitude_re: Vec<f64>,
    #[serde(default)]
    pub amplitude_im: Vec<f64>,
    pub profile: TimeProfile,
}

impl SourceBlock {
    pub fn amplitude<const N: usize>(&self, key: &str) -> anyhow::Result<[Complex64; N]> {
        complex_array(&self.amplitude_re, &self.amplitude_im, key)
    }

    pub fn profile(&self, key: &str) -> anyhow::Result<TimeProfile> {
        self.profile.validate().map_err(|e| invalid(&format!("{key}.profile"), e))?;
        Ok(self.profile)
    }
}

/// `[re; N]` and `[im; N]` (empty imaginary part means zero) as complex values.
pub fn complex_array<const N: usize>(re: &[f64], im: &[f64], key: &str) -> anyhow::Result<[Complex64; N]> {
    if re.len() != N || !(im.is_empty() || im.len() == N) {
        return Err(invalid(
            key,
            format!("expected {N} real and {N} (or no) imaginary parts, got {} and {}", re.len(), im.len()),
        ));
    }
    let mut out = [Complex64::new(0.0, 0.0); N];
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = Complex64::new(re[i], im.get(i).copied().unwrap_or(0.0));
        if !slot.is_finite() {
            return Err(invalid(key, "non-finite amplitude"));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpdBlock {
    /// Mode symbol; `-|k|^2` for a Laplacian mode.
    pub lambda_re: f64,
    pub lambda_im: f64,
    pub phi0_re: f64,
    pub phi0_im: f64,
    pub phi1_re: f64,
    pub phi1_im: f64,
    /// Output times; `eps * [1, 2, 5, 10]` when absent.
    pub times: Option<Vec<f64>>,
    pub oracle: bool,
    pub source: Option<SourceBlock>,
}

impl Default for EpdBlock {
    fn default() -> Self {
        Self {
            lambda_re: -1.0,
            lambda_im: 0.0,
            phi0_re: 1.0,
            phi0_im: 0.0,
            phi1_re: 0.0,
            phi1_im: 0.0,
            times: None,
            oracle: true,
            source: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeBlock {
    pub k: [f64; 3],
    pub amplitude_re: Vec<f64>,
    #[serde(default)]
    pub amplitude_im: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketBlock {
    pub k0: [f64; 3],
    pub dk: f64,
    /// Lattice half-width: `(2n+1)^3` modes.
    pub n: u32,
    pub sigma: f64,
    pub amplitude_re: Vec<f64>,
    #[serde(default)]
    pub amplitude_im: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiracBlock {
    pub modes: Vec<ModeBlock>,
    pub packet: Option<PacketBlock>,
    /// Applied to every mode.
    pub source: Option<SourceBlock>,
    /// Output times; `eps * [1, 2, 5, 10]` when absent.
    pub times: Option<Vec<f64>>,
    pub points: Vec<[f64; 3]>,
    /// Compare every mode with the ODE oracle.
    pub oracle: bool,
    /// Relative bound on residuals and oracle errors.
    pub tolerance: f64,
    /// JSON verification report path.
    pub report: Option<PathBuf>,
}

impl Default for DiracBlock {
    fn default() -> Self {
        Self {
            modes: Vec::new(),
            packet: None,
            source: None,
            times: None,
            points: vec![[0.0; 3]],
            oracle: true,
            tolerance: 1e-5,
            report: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PropagatorKind {
    Retarded,
    Cauchy,
}

/// Sample points `x0 + r * direction` for `count` radii in `[r_min, r_max]`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineBlock {
    pub direction: [f64; 3],
    pub r_min: f64,
    pub r_max: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PropagatorBlock {
    pub kind: PropagatorKind,
    pub x0: [f64; 3],
    /// Source time of the retarded propagator; `1.5 eps` when absent.
    pub t0: Option<f64>,
    pub sigma: f64,
    pub temporal: TemporalMollifier,
    /// Lattice spacing and cutoff; sized from `sigma` and the cone when absent.
    pub k_spacing: Option<f64>,
    pub k_cutoff: Option<f64>,
    /// Sample times; `3 eps` when absent.
    pub times: Option<Vec<f64>>,
    pub points: Vec<[f64; 3]>,
    /// Used when `points` is empty; defaults to the x axis out past the cone.
    pub line: Option<LineBlock>,
}

impl Default for PropagatorBlock {
    fn default() -> Self {
        Self {
            kind: PropagatorKind::Retarded,
            x0: [0.0; 3],
            t0: None,
            sigma: 0.2,
            temporal: TemporalMollifier::Bump,
            k_spacing: None,
            k_cutoff: None,
            times: None,
            points: Vec::new(),
            line: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyBlock {
    pub suites: Vec<String>,
    pub draws: usize,
}

impl Default for VerifyBlock {
    fn default() -> Self {
        let d = flrw_core::verify::VerifyConfig::default();
        Self { suites: d.suites.iter().map(|s| s.to_string()).collect(), draws: d.draws }
    }
}

/// Dotted key path and value applied on top of the config file.
#[derive(Debug, Clone)]
pub struct Override {
    pub key: String,
    pub value: toml::Value,
}

impl Override {
    pub fn new(key: &str, value: impl Into<toml::Value>) -> Self {
        Self { key: key.to_string(), value: value.into() }
    }

    /// Parses `key=value`; the value is read as TOML, falling back to a bare string.
    pub fn parse(spec: &str) -> anyhow::Result<Self> {
        let (key, raw) = spec
            .split_once('=')
            .ok_or_else(|| ConfigError(format!("override `{spec}` is not of the form key=value")))?;
        let key = key.trim();
        if key.is_empty() || key.split('.').any(str::is_empty) {
            return Err(ConfigError(format!("override `{spec}` has an empty key segment")).into());
        }
        let raw = raw.trim();
        let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.to_string()));
        Ok(Self::new(key, value))
    }

    fn apply(&self, table: &mut toml::Table) -> anyhow::Result<()> {
        let mut parts: Vec<&str> = self.key.split('.').collect();
        let last = parts.pop().expect("split yields at least one segment");
        let mut cur = table;
        for part in parts {
            let entry = cur.entry(part).or_insert_with(|| toml::Value::Table(toml::Table::new()));
            cur = entry.as_table_mut().ok_or_else(|| ConfigError(format!("{}: `{part}` is not a table", self.key)))?;
        }
        cur.insert(last.to_string(), self.value.clone());
        Ok(())
    }
}

impl RunConfig {
    /// Reads `path` (if any), applies `overrides` in order and deserializes.
    pub fn load(path: Option<&Path>, overrides: &[Override]) -> anyhow::Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| ConfigError(format!("cannot read config {}: {e}", p.display())))?,
            None => String::new(),
        };
        let origin = path.map_or_else(|| "<defaults>".to_string(), |p| p.display().to_string());
        // Parse the file on its own first so diagnostics carry its line numbers.
        let parsed: RunConfig =
            toml::from_str(&text).map_err(|e| ConfigError(format!("invalid config {origin}: {e}")))?;
        if overrides.is_empty() {
            return Ok(parsed);
        }
        let mut table: toml::Table = toml::from_str(&text).expect("config parsed above");
        for o in overrides {
            o.apply(&mut table)?;
        }
        let merged = toml::to_string(&table).map_err(|e| ConfigError(format!("cannot merge overrides: {e}")))?;
        toml::from_str(&merged).map_err(|e| ConfigError(format!("invalid config after overrides: {e}")).into())
    }
}

/// Checks that every time is finite, at least `eps`, and that the list is
/// nonempty and nondecreasing.
pub fn check_times(times: &[f64], eps: f64, key: &str) -> anyhow::Result<()> {
    if times.is_empty() {
        return Err(invalid(key, "no times given"));
    }
    if let Some(t) = times.iter().find(|t| !(t.is_finite() && **t >= eps)) {
        return Err(invalid(key, format!("time {t} is not a finite value >= epsilon = {eps}")));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid(key, "times must be nondecreasing"));
    }
    Ok(())
}

pub fn default_times(eps: f64) -> Vec<f64> {
    [1.0, 2.0, 5.0, 10.0].iter().map(|f| f * eps).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let cfg = RunConfig::load(None, &[]).unwrap();
        assert_eq!(cfg.cosmology.ell, 0.5);
        assert!(cfg.output.is_none());
        let o = [Override::parse("cosmology.ell=0.25").unwrap(), Override::parse("epd.times=[1, 3]").unwrap()];
        let cfg = RunConfig::load(None, &o).unwrap();
        assert_eq!(cfg.cosmology.ell, 0.25);
        assert_eq!(cfg.epd.times, Some(vec![1.0, 3.0]));
        let cfg = RunConfig::load(None, &[Override::parse("output=out.csv").unwrap()]).unwrap();
        assert_eq!(cfg.output, Some(PathBuf::from("out.csv")));
    }

    #[test]
    fn unknown_keys_rejected() {
        let e = RunConfig::load(None, &[Override::parse("cosmology.elll=0.25").unwrap()]).unwrap_err();
        assert!(e.to_string().contains("elll"), "{e}");
        assert!(e.downcast_ref::<ConfigError>().is_some());
        assert!(Override::parse("no-equals").is_err());
        assert!(Override::parse("a..b=1").is_err());
    }

    #[test]
    fn quadrature_layering() {
        let base = QuadratureConfig { rel_tol: 1e-10, abs_tol: 1e-14, max_depth: 30 };
        let q = QuadratureBlock { rel_tol: Some(1e-8), ..Default::default() }.over(base).unwrap();
        assert_eq!(q.rel_tol, 1e-8);
        assert_eq!(q.abs_tol, 1e-14);
        assert!(QuadratureBlock { rel_tol: Some(-1.0), ..Default::default() }.over(base).is_err());
    }

    #[test]
    fn time_checks() {
        assert!(check_times(&[1.0, 2.0], 1.0, "t").is_ok());
        assert!(check_times(&[], 1.0, "t").is_err());
        assert!(check_times(&[0.5], 1.0, "t").is_err());
        assert!(check_times(&[2.0, 1.5], 1.0, "t").is_err());
        assert!(complex_array::<2>(&[1.0, 2.0], &[], "a").is_ok());
        assert!(complex_array::<2>(&[1.0], &[], "a").is_err());
    }
}
