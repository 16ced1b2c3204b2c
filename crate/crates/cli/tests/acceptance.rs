//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Runs at the full sample sizes, so expect tens of minutes on a
//! single core. Set PERCOLAB_WORKERS to bound the thread count.

use std::f64::consts::PI;
use std::process::{Command, ExitCode};
use std::time::Instant;

use percolab::audit::{audit, AuditConfig};
use percolab::estimators::{
    anchored_profile, arm_sweep, gasket_profile, images_check, mc_probability, multipoint_covariance, multipoint_target,
    Check, GasketRoute, Runner, Tolerances,
};
use percolab::oracle;
use percolab::{Domain, Point};

const SEED: u64 = 42;
const EPS: [f64; 4] = [1.0 / 16.0, 1.0 / 8.0, 1.0 / 4.0, 1.0 / 2.0];

struct Verdict {
    passed: bool,
    detail: String,
}

impl Verdict {
    fn from_checks(checks: &[Check]) -> Self {
        let detail = checks.iter().map(|c| c.to_string()).collect::<Vec<_>>().join("; ");
        Verdict { passed: checks.iter().all(|c| c.passed), detail }
    }

    fn error(e: impl std::fmt::Display) -> Self {
        Verdict { passed: false, detail: format!("error: {e}") }
    }
}

type Outcome = Result<Verdict, Box<dyn std::error::Error>>;

fn bulk_exponent(r: &Runner, tol: &Tolerances) -> Outcome {
    let s = arm_sweep(false, 1.0 / 512.0, &EPS, 200_000, SEED, r)?;
    Ok(Verdict::from_checks(&[s.check(tol)]))
}

fn boundary_exponent(r: &Runner, tol: &Tolerances) -> Outcome {
    let s = arm_sweep(true, 1.0 / 512.0, &EPS, 200_000, SEED, r)?;
    Ok(Verdict::from_checks(&[s.check(tol)]))
}

fn anchored(r: &Runner, tol: &Tolerances) -> Result<(Verdict, Verdict), Box<dyn std::error::Error>> {
    let pts = [Point::new(0.0, 0.5), Point::polar(0.5, PI / 6.0), Point::new(0.0, 0.25)];
    let p = anchored_profile(&pts, 1.0 / 128.0, 4.0, false, 1_000_000, SEED, r)?;
    let angular = p.ratio(0, 1)?;
    let radial = p.ratio(2, 0)?;
    let a = Check::new("rho(pi/2)/rho(pi/6) at r=1/2", angular.ratio, angular.stderr, 2f64.powf(11.0 / 48.0), tol.sigmas, tol.anchored_rel);
    let b = Check::new("rho(i/4)/rho(i/2)", radial.ratio, radial.stderr, 2f64.powf(7.0 / 16.0), tol.sigmas, tol.anchored_rel);
    Ok((Verdict::from_checks(&[a]), Verdict::from_checks(&[b])))
}

fn gasket(r: &Runner, tol: &Tolerances) -> Outcome {
    let pts = [Point::new(0.0, 0.0), Point::new(0.9, 0.0)];
    let p = gasket_profile(&Domain::unit_disk(), &pts, 1.0 / 128.0, GasketRoute::Collar, false, 100_000, SEED, r)?;
    let q = p.ratio(1, 0)?;
    let target = 0.19f64.powf(-5.0 / 48.0);
    Ok(Verdict::from_checks(&[Check::new("p(0.9)/p(0) in the unit disk", q.ratio, q.stderr, target, tol.sigmas, tol.gasket_rel)]))
}

fn images(r: &Runner, tol: &Tolerances) -> Outcome {
    let rep = images_check(Point::new(0.0, 1.0), 1.0 / 64.0, 4.0, 1_000_000, SEED, r)?;
    let mut checks = rep.checks(tol).to_vec();
    checks.push(Check::absolute("identity violations", rep.violations as f64, 0.0, 0.0, 0.0));
    Ok(Verdict::from_checks(&checks))
}

fn multipoint(r: &Runner, tol: &Tolerances) -> Outcome {
    let rep = multipoint_covariance(&[Point::new(0.0, 0.25)], &[-0.125, 0.125], 2.0, 1.0 / 128.0, 4.0, 1_000_000, SEED, r)?;
    debug_assert!((rep.target - multipoint_target(1, 2, 2.0)).abs() < 1e-15);
    Ok(Verdict::from_checks(&[rep.check(tol)]))
}

fn oracles(r: &Runner, tol: &Tolerances) -> Outcome {
    let cases = oracle::catalog();
    let mut checks = Vec::new();
    for c in &cases {
        let e = mc_probability(&c.spec, 1_000_000, SEED, r)?;
        checks.push(Check::z_bound(c.name(), e.z_score(c.exact.value()), tol.sigmas));
    }
    let events: std::collections::BTreeSet<_> = cases.iter().map(|c| c.event).collect();
    let covered = ["one-arm", "anchored", "multipoint", "gasket"].iter().all(|e| events.contains(e));
    let small = cases.iter().all(|c| c.enumerated <= 20);
    let mut v = Verdict::from_checks(&checks);
    v.passed &= cases.len() >= 5 && covered && small;
    v.detail = format!("{} patches, events {:?}, max {} sites; {}", cases.len(), events, cases.iter().map(|c| c.enumerated).max().unwrap_or(0), v.detail);
    Ok(v)
}

fn invariants(r: &Runner) -> Outcome {
    let rep = audit(&AuditConfig::default(), 10_000, SEED, r)?;
    let detail = rep.invariants.iter().map(|i| format!("{} {}/{}", i.name, i.violations, i.premise)).collect::<Vec<_>>().join(", ");
    Ok(Verdict { passed: rep.violations() == 0, detail: format!("{} samples; {}", rep.samples, detail) })
}

fn cli_csv(args: &[&str], workers: usize) -> Result<Vec<u8>, Box<dyn std::error::Error>> {
    let out = Command::new(env!("CARGO_BIN_EXE_percolab"))
        .args(args)
        .args(["--workers", &workers.to_string()])
        .output()?;
    match out.status.code() {
        Some(0) | Some(2) => Ok(out.stdout),
        _ => Err(String::from_utf8_lossy(&out.stderr).into_owned().into()),
    }
}

fn determinism() -> Outcome {
    let runs: [&[&str]; 2] = [
        &["anchored", "--mesh", "1/64", "--n", "6000", "--seed", "7"],
        &["gasket", "--mesh", "1/64", "--n", "6000", "--seed", "7"],
    ];
    let mut details = Vec::new();
    let mut passed = true;
    for args in runs {
        let base = cli_csv(args, 1)?;
        let same = [4, 16].iter().map(|&w| cli_csv(args, w)).collect::<Result<Vec<_>, _>>()?.iter().all(|c| *c == base);
        passed &= same && !base.is_empty();
        details.push(format!("{} {} bytes identical={}", args[0], base.len(), same));
    }
    Ok(Verdict { passed, detail: format!("workers 1/4/16: {}", details.join(", ")) })
}

fn mesh_stability(r: &Runner, tol: &Tolerances) -> Outcome {
    let disk = Domain::unit_disk();
    let at = |mesh: f64, pts: &[Point]| gasket_profile(&disk, pts, mesh, GasketRoute::PerPoint, true, 20_000, SEED, r);
    let origin = [Point::new(0.0, 0.0)];
    let coarse = at(1.0 / 128.0, &origin)?.vs_normalizer.ok_or("missing normalizer")?;
    let fine = at(1.0 / 256.0, &origin)?.vs_normalizer.ok_or("missing normalizer")?;
    let change = (fine.ratio / coarse.ratio - 1.0).abs();
    let off = [Point::new(0.5, 0.0)];
    let c5 = at(1.0 / 128.0, &off)?.vs_normalizer.ok_or("missing normalizer")?;
    let f5 = at(1.0 / 256.0, &off)?.vs_normalizer.ok_or("missing normalizer")?;
    Ok(Verdict {
        passed: change < tol.mesh_stability_rel,
        detail: format!(
            "z=0: {:.6} at 1/128, {:.6} at 1/256, change {:.4} (limit {}); info z=0.5: {:.4} -> {:.4}",
            coarse.ratio, fine.ratio, change, tol.mesh_stability_rel, c5.ratio, f5.ratio
        ),
    })
}

fn main() -> ExitCode {
    let runner = Runner::default();
    let tol = Tolerances::default();
    println!("acceptance: {} worker(s), seed {SEED}", runner.workers);
    let mut failed = 0;
    let mut report = |id: &str, name: &str, start: Instant, v: Verdict| {
        let tag = if v.passed { "PASS" } else { "FAIL" };
        failed += usize::from(!v.passed);
        println!("{tag} {id:>2} {name} ({:.1}s): {}", start.elapsed().as_secs_f64(), v.detail);
    };
    let t = Instant::now();
    report("1", "bulk one-arm exponent", t, bulk_exponent(&runner, &tol).unwrap_or_else(Verdict::error));
    let t = Instant::now();
    report("2", "boundary one-arm exponent", t, boundary_exponent(&runner, &tol).unwrap_or_else(Verdict::error));
    let t = Instant::now();
    match anchored(&runner, &tol) {
        Ok((a, b)) => {
            report("3", "anchored angular law", t, a);
            report("4", "anchored radial covariance", t, b);
        }
        Err(e) => {
            report("3", "anchored angular law", t, Verdict::error(&e));
            report("4", "anchored radial covariance", t, Verdict::error(&e));
        }
    }
    let t = Instant::now();
    report("5", "gasket density ratio", t, gasket(&runner, &tol).unwrap_or_else(Verdict::error));
    let t = Instant::now();
    report("6", "method of images", t, images(&runner, &tol).unwrap_or_else(Verdict::error));
    let t = Instant::now();
    report("7", "multipoint scale covariance", t, multipoint(&runner, &tol).unwrap_or_else(Verdict::error));
    let t = Instant::now();
    report("8", "oracle equivalence", t, oracles(&runner, &tol).unwrap_or_else(Verdict::error));
    let t = Instant::now();
    report("9", "invariant suite", t, invariants(&runner).unwrap_or_else(Verdict::error));
    let t = Instant::now();
    report("10", "determinism across workers", t, determinism().unwrap_or_else(Verdict::error));
    let t = Instant::now();
    report("11", "mesh stability", t, mesh_stability(&runner, &tol).unwrap_or_else(Verdict::error));
    if failed == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criterion/criteria failed");
        ExitCode::FAILURE
    }
}
