//! The five subcommands. Each validates its block into a plan, reporting
//! problems as config errors, then computes and writes through one writer.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::Context;
use flrw_core::cosmology::RawCosmology;
use flrw_core::dirac_algebra::Spinor;
use flrw_core::dirac_solver::{
    default_dirac_quadrature, dirac_residual, solve_dirac_field, DiracModeSolver, FourierField, SpinorMode,
    SpinorSource,
};
use flrw_core::epd_solver::{EpdTimeSolver, ModeCauchyData, ModeSource, ModeSymbol};
use flrw_core::kernels::{EpdKernels, KernelValue, TimeKernels};
use flrw_core::oracle::{oracle_dirac_mode, oracle_epd_mode_t, ORACLE_ABS_TOL, ORACLE_REL_TOL};
use flrw_core::propagator::{
    default_propagator_quadrature, CauchyPropagator, KGrid, PropagatorSlice, RetardedPropagator, TemporalMollifier,
};
use flrw_core::quadrature::QuadratureConfig;
use flrw_core::verify::{self, Suite, VerifyConfig, SCHEMA_VERSION};
use flrw_core::{Complex64, CosmologyParams};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{
    check_times, complex_array, default_times, invalid, Coordinate, KernelKind, PropagatorKind, RunConfig, SourceBlock,
};

/// How a successful run ended; a failed check maps to exit code 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    VerificationFailed,
}

/// 17 significant digits.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn open_output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn csv_writer(path: Option<&Path>, header: &[String]) -> anyhow::Result<csv::Writer<Box<dyn Write>>> {
    let mut w = csv::WriterBuilder::new().from_writer(open_output(path)?);
    w.write_record(header)?;
    Ok(w)
}

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|s| s.to_string()).collect()
}

fn spinor_columns(prefix: &str) -> Vec<String> {
    (0..4).flat_map(|i| [format!("{prefix}{i}_re"), format!("{prefix}{i}_im")]).collect()
}

fn push_complex(row: &mut Vec<String>, z: Complex64) {
    row.push(num(z.re));
    row.push(num(z.im));
}

fn check_points(points: &[[f64; 3]], key: &str) -> anyhow::Result<()> {
    if points.is_empty() {
        return Err(invalid(key, "no sample points given"));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(invalid(key, "non-finite coordinate"));
    }
    Ok(())
}

pub fn cmd_kernel(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let p = cfg.cosmology.params()?;
    let b = &cfg.kernel;
    if b.r_count == 0 {
        return Err(invalid("kernel.r_count", "must be at least 1"));
    }
    let (lower, coord) = match b.coordinate {
        Coordinate::Tau => (0.0, "tau"),
        Coordinate::T => (p.epsilon(), "t"),
    };
    let source_time = match b.kind {
        KernelKind::E => b.source_time.unwrap_or(lower),
        _ if b.source_time.is_some() => return Err(invalid("kernel.source_time", "only used by the `e` kernel")),
        _ => lower,
    };
    if !(source_time >= lower && source_time.is_finite()) {
        return Err(invalid("kernel.source_time", format!("must be a finite value >= {lower}")));
    }
    check_times(&b.times, source_time, "kernel.times")?;

    enum Family {
        Tau(EpdKernels),
        T(TimeKernels),
    }
    let family = match b.coordinate {
        Coordinate::Tau => Family::Tau(EpdKernels::new(p.reduced_mass().value()).map_err(|e| invalid("cosmology", e))?),
        Coordinate::T => Family::T(TimeKernels::new(&p).map_err(|e| invalid("cosmology", e))?),
    };
    let radius = |time: f64| -> flrw_core::Result<f64> {
        Ok(match b.coordinate {
            Coordinate::Tau => time - source_time,
            Coordinate::T => p.phi(time)? - p.phi(source_time)?,
        })
    };
    let eval = |r: f64, time: f64| -> flrw_core::Result<KernelValue> {
        match (&family, b.kind) {
            (Family::Tau(k), KernelKind::E) => k.e_tau(r, time, source_time),
            (Family::Tau(k), KernelKind::K1) => k.k1_tau(r, time),
            (Family::Tau(k), KernelKind::K0) => k.k0_tau(r, time),
            (Family::Tau(k), KernelKind::K0Fused) => k.k0_plus_2im_k1_tau(r, time),
            (Family::T(k), KernelKind::E) => k.e_t(r, time, source_time),
            (Family::T(k), KernelKind::K1) => k.k1_t(r, time),
            (Family::T(k), KernelKind::K0) => k.k0_t(r, time),
            (Family::T(k), KernelKind::K0Fused) => k.k0_fused_t(r, time),
        }
    };

    let mut w = csv_writer(cfg.output.as_deref(), &header(&["r", coord, "value_re", "value_im", "branch"]))?;
    for &time in &b.times {
        let radius = radius(time)?;
        for j in 0..b.r_count {
            let r = if b.r_count == 1 { 0.0 } else { radius * j as f64 / (b.r_count - 1) as f64 };
            let v = eval(r, time).with_context(|| format!("kernel at r = {r}, {coord} = {time}"))?;
            w.write_record([num(r), num(time), num(v.value.re), num(v.value.im), v.branch.as_str().to_string()])?;
        }
    }
    w.flush()?;
    Ok(Outcome::Success)
}

fn scalar_source(s: &SourceBlock, key: &str) -> anyhow::Result<ModeSource<Complex64>> {
    let [amp] = s.amplitude::<1>(key)?;
    let profile = s.profile(key)?;
    let src = ModeSource::new(move |t| amp * profile.value(t));
    Ok(match profile.support() {
        Some((lo, hi)) => src.with_support(lo, hi),
        None => src,
    })
}

pub fn cmd_epd(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let p = cfg.cosmology.params()?;
    let b = &cfg.epd;
    let q = cfg.quadrature.over(QuadratureConfig::default())?;
    let times = b.times.clone().unwrap_or_else(|| default_times(p.epsilon()));
    check_times(&times, p.epsilon(), "epd.times")?;
    let lambda = Complex64::new(b.lambda_re, b.lambda_im);
    let [phi0, phi1] = complex_array::<2>(&[b.phi0_re, b.phi1_re], &[b.phi0_im, b.phi1_im], "epd.phi")?;
    if !lambda.is_finite() {
        return Err(invalid("epd.lambda", "non-finite symbol"));
    }
    let sym = ModeSymbol::new(lambda);
    let mut data = ModeCauchyData::new(phi0, phi1);
    if let Some(s) = &b.source {
        data = data.with_source(scalar_source(s, "epd.source")?);
    }
    let solver = EpdTimeSolver::new(&p, &q).map_err(|e| invalid("epd", e))?;

    let values = times.par_iter().map(|&t| solver.solve(sym, &data, t)).collect::<flrw_core::Result<Vec<_>>>()?;
    let oracle =
        if b.oracle { Some(oracle_epd_mode_t(sym, &p, &data, &times, ORACLE_REL_TOL, ORACLE_ABS_TOL)?) } else { None };

    let mut cols = header(&["t", "u_re", "u_im"]);
    if oracle.is_some() {
        cols.extend(header(&["oracle_re", "oracle_im", "abs_err"]));
    }
    let mut w = csv_writer(cfg.output.as_deref(), &cols)?;
    for (i, (&t, u)) in times.iter().zip(&values).enumerate() {
        let mut row = vec![num(t)];
        push_complex(&mut row, *u);
        if let Some(o) = &oracle {
            push_complex(&mut row, o[i]);
            row.push(num((u - o[i]).norm()));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(Outcome::Success)
}

#[derive(Debug, Serialize)]
struct DiracModeReport {
    k: [f64; 3],
    /// `max_t |D Psi - F| / (1 + |F|)` over times after epsilon.
    max_residual: f64,
    oracle_max_abs_error: Option<f64>,
    /// `max_t |Psi - oracle| / (1 + |oracle|)`.
    oracle_max_rel_error: Option<f64>,
    pass: bool,
}

#[derive(Debug, Serialize)]
struct DiracReport {
    schema_version: u32,
    cosmology: RawCosmology,
    times: Vec<f64>,
    tolerance: f64,
    passed: usize,
    failed: usize,
    modes: Vec<DiracModeReport>,
}

fn max_abs(s: &Spinor) -> f64 {
    s.iter().fold(0.0, |m, c| m.max(c.norm()))
}

fn max_diff(a: &Spinor, b: &Spinor) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).norm()))
}

fn check_mode(
    mode: &SpinorMode,
    p: &CosmologyParams,
    solver: &DiracModeSolver,
    times: &[f64],
    oracle: bool,
    tolerance: f64,
) -> flrw_core::Result<DiracModeReport> {
    let mut max_residual: f64 = 0.0;
    // interior times only: at eps the one-sided difference of Psi is noise-dominated
    for &t in times.iter().filter(|&&t| t > p.epsilon()) {
        let res = dirac_residual(mode, p, t, |s| solver.solve(mode, s))?;
        let f = mode.source.map_or(0.0, |s| max_abs(&s.eval(t)));
        max_residual = max_residual.max(res / (1.0 + f));
    }
    let (mut abs, mut rel) = (None, None);
    if oracle {
        let reference = oracle_dirac_mode(mode, p, times, ORACLE_REL_TOL, ORACLE_ABS_TOL)?;
        let (mut a, mut r): (f64, f64) = (0.0, 0.0);
        for (&t, o) in times.iter().zip(&reference) {
            let d = max_diff(&solver.solve(mode, t)?, o);
            a = a.max(d);
            r = r.max(d / (1.0 + max_abs(o)));
        }
        abs = Some(a);
        rel = Some(r);
    }
    let pass = max_residual <= tolerance && rel.is_none_or(|r| r <= tolerance);
    Ok(DiracModeReport { k: mode.k, max_residual, oracle_max_abs_error: abs, oracle_max_rel_error: rel, pass })
}

pub fn cmd_dirac(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let p = cfg.cosmology.params()?;
    let b = &cfg.dirac;
    let q = cfg.quadrature.over(default_dirac_quadrature())?;
    let times = b.times.clone().unwrap_or_else(|| default_times(p.epsilon()));
    check_times(&times, p.epsilon(), "dirac.times")?;
    check_points(&b.points, "dirac.points")?;
    if !(b.tolerance > 0.0 && b.tolerance.is_finite()) {
        return Err(invalid("dirac.tolerance", "must be positive"));
    }
    let source = match &b.source {
        Some(s) => Some(SpinorSource::new(s.amplitude::<4>("dirac.source")?, s.profile("dirac.source")?)),
        None => None,
    };
    let mut modes = match (&b.packet, b.modes.is_empty()) {
        (Some(_), false) => return Err(invalid("dirac", "give either `modes` or `packet`, not both")),
        (None, true) => return Err(invalid("dirac", "no modes: give `modes` or `packet`")),
        (Some(pk), true) => {
            let amp = complex_array::<4>(&pk.amplitude_re, &pk.amplitude_im, "dirac.packet")?;
            FourierField::gaussian_packet(pk.k0, pk.dk, pk.n, pk.sigma, amp)
                .map_err(|e| invalid("dirac.packet", e))?
                .modes
        }
        (None, false) => b
            .modes
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let amp = complex_array::<4>(&m.amplitude_re, &m.amplitude_im, &format!("dirac.modes[{i}]"))?;
                Ok(SpinorMode::new(m.k, amp))
            })
            .collect::<anyhow::Result<Vec<_>>>()?,
    };
    if let Some(s) = source {
        modes = modes.into_iter().map(|m| m.with_source(s)).collect();
    }
    let field = FourierField::new(modes).map_err(|e| invalid("dirac.modes", e))?;
    let solver = DiracModeSolver::new(&p, &q).map_err(|e| invalid("dirac", e))?;

    let values = solve_dirac_field(&field, &p, &times, &b.points, &q)?;
    let mut cols = header(&["t", "x", "y", "z"]);
    cols.extend(spinor_columns("psi"));
    let mut w = csv_writer(cfg.output.as_deref(), &cols)?;
    for (&t, row_values) in times.iter().zip(&values) {
        for (x, psi) in b.points.iter().zip(row_values) {
            let mut row = vec![num(t), num(x[0]), num(x[1]), num(x[2])];
            for c in psi {
                push_complex(&mut row, *c);
            }
            w.write_record(&row)?;
        }
    }
    w.flush()?;

    let reports = field
        .modes
        .par_iter()
        .map(|m| check_mode(m, &p, &solver, &times, b.oracle, b.tolerance))
        .collect::<flrw_core::Result<Vec<_>>>()?;
    let passed = reports.iter().filter(|r| r.pass).count();
    let report = DiracReport {
        schema_version: SCHEMA_VERSION,
        cosmology: p.into(),
        times: times.clone(),
        tolerance: b.tolerance,
        passed,
        failed: reports.len() - passed,
        modes: reports,
    };
    match &b.report {
        Some(path) => {
            let mut out = open_output(Some(path))?;
            writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
            out.flush()?;
        }
        None => log::info!("dirac check: {} of {} modes passed", report.passed, report.passed + report.failed),
    }
    Ok(if report.failed == 0 { Outcome::Success } else { Outcome::VerificationFailed })
}

pub fn cmd_propagator(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let p = cfg.cosmology.params()?;
    let b = &cfg.propagator;
    let q = cfg.quadrature.over(default_propagator_quadrature())?;
    let eps = p.epsilon();
    if !(b.sigma > 0.0 && b.sigma.is_finite()) {
        return Err(invalid("propagator.sigma", "must be positive"));
    }
    check_points(&[b.x0], "propagator.x0")?;
    let t0 = match b.kind {
        PropagatorKind::Retarded => b.t0.unwrap_or(1.5 * eps),
        PropagatorKind::Cauchy if b.t0.is_some() => {
            return Err(invalid("propagator.t0", "the Cauchy propagator starts at epsilon"))
        }
        PropagatorKind::Cauchy => eps,
    };
    if b.kind == PropagatorKind::Cauchy && b.temporal != TemporalMollifier::default() {
        return Err(invalid("propagator.temporal", "only used by the retarded propagator"));
    }
    let times = b.times.clone().unwrap_or_else(|| vec![3.0 * eps]);
    check_times(&times, t0, "propagator.times")?;

    // widest cone plus the spread of the temporal bump
    let last = *times.last().expect("times checked nonempty");
    let cone = p.phi(last)? - p.phi(t0)?;
    let sigma_eff = match (b.kind, b.temporal) {
        (PropagatorKind::Retarded, TemporalMollifier::Bump) if t0 - b.sigma >= eps => {
            b.sigma + p.phi(t0)? - p.phi(t0 - b.sigma)?
        }
        _ => b.sigma,
    };
    let points: Vec<[f64; 3]> = if !b.points.is_empty() {
        b.points.clone()
    } else {
        let (dir, r_min, r_max, count) = match &b.line {
            Some(l) => (l.direction, l.r_min, l.r_max, l.count),
            None => ([1.0, 0.0, 0.0], 0.0, cone + 5.0 * sigma_eff, 21),
        };
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) || count == 0 || r_min > r_max || !r_min.is_finite() || !r_max.is_finite()
        {
            return Err(invalid("propagator.line", "needs a nonzero direction, count >= 1 and r_min <= r_max"));
        }
        (0..count)
            .map(|j| {
                let r = if count == 1 { r_min } else { r_min + (r_max - r_min) * j as f64 / (count - 1) as f64 };
                [0, 1, 2].map(|i| b.x0[i] + r * dir[i] / norm)
            })
            .collect()
    };
    check_points(&points, "propagator.points")?;
    let farthest =
        points.iter().map(|x| (0..3).map(|i| (x[i] - b.x0[i]).powi(2)).sum::<f64>().sqrt()).fold(0.0, f64::max);
    let reach = (cone + 5.0 * sigma_eff + 5.0 * b.sigma).max(farthest + 5.0 * b.sigma);
    let auto = KGrid::for_mollifier(b.sigma, reach).map_err(|e| invalid("propagator", e))?;
    let grid = KGrid::new(b.k_spacing.unwrap_or(auto.spacing), b.k_cutoff.unwrap_or(auto.cutoff))
        .map_err(|e| invalid("propagator.k_spacing", e))?;

    let slice_at: Box<dyn Fn(f64) -> flrw_core::Result<PropagatorSlice>> = match b.kind {
        PropagatorKind::Retarded => {
            let prop = RetardedPropagator::new(&p, b.x0, t0, b.sigma, &grid, b.temporal, &q)
                .map_err(|e| invalid("propagator", e))?;
            Box::new(move |t| prop.at_time(t))
        }
        PropagatorKind::Cauchy => {
            let prop = CauchyPropagator::new(&p, b.x0, b.sigma, &grid, &q).map_err(|e| invalid("propagator", e))?;
            Box::new(move |t| prop.at_time(t))
        }
    };

    let mut cols = header(&["t", "x", "y", "z", "cone_distance", "norm"]);
    for r in 0..4 {
        for c in 0..4 {
            cols.push(format!("g{r}{c}_re"));
            cols.push(format!("g{r}{c}_im"));
        }
    }
    let mut w = csv_writer(cfg.output.as_deref(), &cols)?;
    for &t in &times {
        let slice = slice_at(t)?;
        let samples: Vec<_> = points.par_iter().map(|x| slice.sample(*x)).collect();
        for s in samples {
            let mut row =
                vec![num(t), num(s.x[0]), num(s.x[1]), num(s.x[2]), num(s.cone_distance), num(s.value.frobenius())];
            for r in 0..4 {
                for c in 0..4 {
                    push_complex(&mut row, s.value.0[r][c]);
                }
            }
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(Outcome::Success)
}

pub fn cmd_verify(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let suites = cfg
        .verify
        .suites
        .iter()
        .map(|s| s.parse::<Suite>().map_err(|e| invalid("verify.suites", e)))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let vc = VerifyConfig { suites, seed: cfg.seed, draws: cfg.verify.draws };
    vc.validate().map_err(|e| invalid("verify", e))?;
    let report = verify::run(&vc)?;
    let mut out = open_output(cfg.output.as_deref())?;
    writeln!(out, "{}", report.to_json())?;
    out.flush()?;
    for c in report.cases.iter().filter(|c| !c.pass) {
        log::warn!("failed: {} (rel {:e}, tol {:e})", c.id, c.max_rel_error, c.tolerance);
    }
    Ok(if report.all_passed() { Outcome::Success } else { Outcome::VerificationFailed })
}
