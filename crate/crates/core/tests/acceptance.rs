//! Acceptance criteria, one pass/fail line each. Runs as a plain binary
//! (`harness = false`) and exits nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use flrw_core::verify::{self, CaseResult, Suite, VerifyConfig};

struct Criterion {
    number: u32,
    name: &'static str,
    run: fn() -> Vec<CaseResult>,
}

fn kernel_pde() -> Vec<CaseResult> {
    verify::kernel_pde_cases()
}

fn diagonal() -> Vec<CaseResult> {
    verify::kernel_diagonal_cases()
}

fn limits() -> Vec<CaseResult> {
    verify::kernel_limit_cases()
}

fn epd_matrix() -> Vec<CaseResult> {
    verify::epd_oracle_cases()
}

fn dirac_matrix() -> Vec<CaseResult> {
    verify::dirac_oracle_cases()
}

fn composition() -> Vec<CaseResult> {
    verify::composition_cases(VerifyConfig::default().seed, 100)
}

fn condition() -> Vec<CaseResult> {
    verify::commuting_condition_cases(VerifyConfig::default().seed, 100)
}

fn charge_law() -> Vec<CaseResult> {
    verify::charge_cases()
}

fn cone_support() -> Vec<CaseResult> {
    verify::cone_support_cases()
}

fn massless() -> Vec<CaseResult> {
    let mut v = verify::massless_kernel_cases();
    v.extend(verify::massless_epd_cases());
    v
}

/// Two runs in a single-thread pool and one in an eight-thread pool must
/// produce byte-identical JSON.
fn determinism() -> Vec<CaseResult> {
    let cfg = VerifyConfig {
        suites: vec![Suite::Special, Suite::Cosmology, Suite::Kernels, Suite::Algebra, Suite::Epd],
        ..VerifyConfig::default()
    };
    let in_pool = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool")
            .install(|| verify::run(&cfg).map(|r| r.to_json()))
    };
    let runs: Vec<_> = [1, 1, 8].into_iter().map(in_pool).collect();
    let ok = match (&runs[0], &runs[1], &runs[2]) {
        (Ok(a), Ok(b), Ok(c)) => a == b && a == c,
        _ => false,
    };
    let mismatch = if ok { 0.0 } else { 1.0 };
    vec![CaseResult {
        id: "verify/determinism/threads=1,1,8".into(),
        suite: Suite::Algebra,
        max_abs_error: mismatch,
        max_rel_error: mismatch,
        tolerance: 0.0,
        pass: ok,
        detail: None,
    }]
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { number: 1, name: "kernel PDE residuals", run: kernel_pde },
        Criterion { number: 2, name: "diagonal identities", run: diagonal },
        Criterion { number: 3, name: "small-tau limits decay linearly", run: limits },
        Criterion { number: 4, name: "EPD oracle matrix", run: epd_matrix },
        Criterion { number: 5, name: "Dirac oracle matrix", run: dirac_matrix },
        Criterion { number: 6, name: "composition identity", run: composition },
        Criterion { number: 7, name: "commuting condition", run: condition },
        Criterion { number: 8, name: "charge law", run: charge_law },
        Criterion { number: 9, name: "cone support", run: cone_support },
        Criterion { number: 10, name: "zero-mass reductions", run: massless },
        Criterion { number: 11, name: "determinism", run: determinism },
    ];
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let verbose = std::env::var_os("ACCEPTANCE_VERBOSE").is_some();
    let mut failures = 0;
    for c in criteria.iter().filter(|c| filter.is_empty() || filter.contains(&c.number)) {
        let start = Instant::now();
        let cases = (c.run)();
        let secs = start.elapsed().as_secs_f64();
        let failed: Vec<&CaseResult> = cases.iter().filter(|r| !r.pass).collect();
        let worst = cases.iter().map(|r| r.max_rel_error).fold(0.0, f64::max);
        let status = if failed.is_empty() { "PASS" } else { "FAIL" };
        println!(
            "criterion {:>2} {status}: {} ({} cases, worst metric {worst:.3e}, {secs:.1} s)",
            c.number,
            c.name,
            cases.len()
        );
        for r in if verbose { cases.iter().collect() } else { failed.clone() } {
            println!(
                "    {} {}: abs {:.3e} metric {:.3e} tol {:.1e}{}",
                if r.pass { "ok  " } else { "FAIL" },
                r.id,
                r.max_abs_error,
                r.max_rel_error,
                r.tolerance,
                r.detail.as_deref().map(|d| format!(" ({d})")).unwrap_or_default()
            );
        }
        if !failed.is_empty() {
            failures += 1;
        }
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
