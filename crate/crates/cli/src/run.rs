//! Executes a [`RunConfig`] and renders its CSV table.

use anyhow::{bail, Context, Result};
use percolab::audit::{audit, AuditConfig};
use percolab::estimators::{
    anchored_profile, arm_sweep, gasket_profile, images_check, mc_probability, multipoint_covariance, Check, Estimate,
    Runner,
};
use percolab::oracle;
use percolab::{Domain, Point};
use serde_json::{json, Value};

use crate::config::{Experiment, RunConfig};

pub struct Outcome {
    pub csv: Vec<u8>,
    pub summary: Value,
    pub checks: Vec<Check>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

const ESTIMATE_HEADER: [&str; 7] = ["successes", "n", "p_hat", "stderr", "ci_low", "ci_high", "truncated"];

fn estimate_fields(e: &Estimate) -> Vec<String> {
    vec![
        e.successes.to_string(),
        e.n.to_string(),
        e.p_hat.to_string(),
        e.stderr.to_string(),
        e.ci95.0.to_string(),
        e.ci95.1.to_string(),
        e.truncated.to_string(),
    ]
}

/// CSV table whose columns are `lead`, then the estimate columns, then `tail`.
struct Table {
    w: csv::Writer<Vec<u8>>,
}

impl Table {
    fn new(lead: &[&str], tail: &[&str]) -> Result<Self> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(lead.iter().chain(&ESTIMATE_HEADER).chain(tail))?;
        Ok(Table { w })
    }

    fn row(&mut self, lead: &[String], e: &Estimate, tail: &[String]) -> Result<()> {
        self.w.write_record(lead.iter().chain(&estimate_fields(e)).chain(tail))?;
        Ok(())
    }

    fn finish(self) -> Result<Vec<u8>> {
        self.w.into_inner().context("flushing CSV")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn points(p: &[crate::config::PointArg]) -> Vec<Point> {
    p.iter().map(|p| p.value()).collect()
}

pub fn execute(cfg: &RunConfig) -> Result<Outcome> {
    let runner = Runner::new(cfg.workers);
    let tol = &cfg.tolerances;
    let (n, seed) = (cfg.n, cfg.seed);
    match &cfg.experiment {
        Experiment::OneArm { mesh, eps } | Experiment::BoundaryArm { mesh, eps } => {
            let boundary = matches!(cfg.experiment, Experiment::BoundaryArm { .. });
            let eps: Vec<f64> = eps.iter().map(|e| e.value()).collect();
            let s = arm_sweep(boundary, mesh.value(), &eps, n, seed, &runner)?;
            let mut t = Table::new(&["eps"], &["ratio", "ratio_stderr", "target"])?;
            for p in &s.points {
                let tail = [p.ratio.ratio.to_string(), p.ratio.stderr.to_string(), p.target.to_string()];
                t.row(&[p.eps.to_string()], &p.estimate, &tail)?;
            }
            let csv = t.finish()?;
            let checks = vec![s.check(tol)];
            let summary = json!({
                "slope": s.fit.slope,
                "slope_stderr": s.fit.stderr,
                "r_squared": s.fit.r_squared,
                "target_exponent": s.target_exponent,
                "normalizer": s.normalizer,
            });
            Ok(Outcome { csv, summary, checks })
        }
        Experiment::Anchored { mesh, points: pts, box_factor, normalizers } => {
            let p = anchored_profile(&points(pts), mesh.value(), box_factor.value(), *normalizers, n, seed, &runner)?;
            let mut t = Table::new(
                &["x", "y", "r", "theta"],
                &["vs_first", "vs_first_stderr", "first_target", "vs_vertical", "vs_vertical_stderr", "vertical_target", "c_h"],
            )?;
            for r in &p.rows {
                let lead = [r.z.x, r.z.y, r.r, r.theta].map(|v| v.to_string());
                let tail = [
                    r.vs_first.ratio.to_string(),
                    r.vs_first.stderr.to_string(),
                    r.first_target.to_string(),
                    r.vs_vertical.ratio.to_string(),
                    r.vs_vertical.stderr.to_string(),
                    r.vertical_target.to_string(),
                    opt(r.c_h),
                ];
                t.row(&lead, &r.estimate, &tail)?;
            }
            let csv = t.finish()?;
            let mut checks = Vec::new();
            for (k, r) in p.rows.iter().enumerate().skip(1) {
                let name = format!("anchored ratio {} / {}", pts[k], pts[0]);
                checks.push(Check::new(name, r.vs_first.ratio, r.vs_first.stderr, r.first_target, tol.sigmas, tol.anchored_rel));
            }
            let summary = json!({ "box_radius": p.box_radius, "normalizers": p.normalizers });
            Ok(Outcome { csv, summary, checks })
        }
        Experiment::Gasket { mesh, domain, points: pts, route, normalizer } => {
            let dom: Domain = domain.parse().with_context(|| format!("invalid domain {domain:?}"))?;
            let p = gasket_profile(&dom, &points(pts), mesh.value(), *route, *normalizer, n, seed, &runner)?;
            let mut t = Table::new(&["x", "y", "rad"], &["vs_first", "vs_first_stderr", "target", "c_g"])?;
            for r in &p.rows {
                let lead = [r.z.x, r.z.y, r.rad].map(|v| v.to_string());
                let tail = [r.vs_first.ratio.to_string(), r.vs_first.stderr.to_string(), r.target.to_string(), opt(r.c_g)];
                t.row(&lead, &r.estimate, &tail)?;
            }
            let csv = t.finish()?;
            let mut checks = Vec::new();
            for (k, r) in p.rows.iter().enumerate().skip(1) {
                let name = format!("gasket ratio {} / {}", pts[k], pts[0]);
                checks.push(Check::new(name, r.vs_first.ratio, r.vs_first.stderr, r.target, tol.sigmas, tol.gasket_rel));
            }
            let summary = json!({ "normalizer": p.normalizer, "vs_normalizer": p.vs_normalizer });
            Ok(Outcome { csv, summary, checks })
        }
        Experiment::Images { mesh, z, box_factor } => {
            let r = images_check(z.value(), mesh.value(), box_factor.value(), n, seed, &runner)?;
            let mut t = Table::new(&["event"], &[])?;
            for (event, e) in [("upper", &r.upper), ("lower", &r.lower), ("both", &r.both)] {
                t.row(&[event.to_string()], e, &[])?;
            }
            let csv = t.finish()?;
            let mut checks = r.checks(tol).to_vec();
            checks.push(Check::absolute("images per-sample identity violations", r.violations as f64, 0.0, 0.0, 0.0));
            let summary = json!({
                "product_gap": r.product_gap,
                "product_stderr": r.product_stderr,
                "z_product": r.z_product,
                "symmetry_gap": r.symmetry_gap,
                "symmetry_stderr": r.symmetry_stderr,
                "z_symmetry": r.z_symmetry,
            });
            Ok(Outcome { csv, summary, checks })
        }
        Experiment::Multipoint { mesh, bulk, boundary, scale, box_factor } => {
            let xs: Vec<f64> = boundary.iter().map(|x| x.value()).collect();
            let r = multipoint_covariance(&points(bulk), &xs, scale.value(), mesh.value(), box_factor.value(), n, seed, &runner)?;
            let mut t = Table::new(&["set", "scale"], &["ratio", "ratio_stderr", "target"])?;
            t.row(&["original".into(), "1".into()], &r.original, &[String::new(), String::new(), String::new()])?;
            let tail = [r.ratio.ratio.to_string(), r.ratio.stderr.to_string(), r.target.to_string()];
            t.row(&["scaled".into(), r.scale.to_string()], &r.scaled, &tail)?;
            let csv = t.finish()?;
            let summary = json!({ "ratio": r.ratio, "target": r.target });
            Ok(Outcome { csv, summary, checks: vec![r.check(tol)] })
        }
        Experiment::Oracle { event, patch } => {
            let cases = match event {
                Some(e) => oracle::find(e, patch.as_deref()),
                None => oracle::catalog().into_iter().filter(|c| patch.as_ref().is_none_or(|p| c.patch == p)).collect(),
            };
            if cases.is_empty() {
                bail!("no oracle patch matches event {:?} and patch {:?}", event, patch);
            }
            let mut t = Table::new(&["event", "patch", "enumerated", "exact", "exact_dyadic"], &["z"])?;
            let mut checks = Vec::new();
            for c in &cases {
                let e = mc_probability(&c.spec, n, seed, &runner)?;
                let exact = c.exact.value();
                let z = e.z_score(exact);
                checks.push(Check::z_bound(format!("oracle {}", c.name()), z, tol.sigmas));
                let lead = [c.event.to_string(), c.patch.to_string(), c.enumerated.to_string(), exact.to_string(), c.exact.to_string()];
                t.row(&lead, &e, &[z.to_string()])?;
            }
            Ok(Outcome { csv: t.finish()?, summary: json!({ "cases": cases.len() }), checks })
        }
        Experiment::Selftest { mesh } => {
            let acfg = AuditConfig { mesh: mesh.value(), ..AuditConfig::default() };
            let r = audit(&acfg, n, seed, &runner)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["invariant", "samples", "premise", "violations"])?;
            for i in &r.invariants {
                w.write_record([i.name.clone(), r.samples.to_string(), i.premise.to_string(), i.violations.to_string()])?;
            }
            let csv = w.into_inner().context("flushing CSV")?;
            let checks = r
                .invariants
                .iter()
                .map(|i| Check::absolute(format!("invariant: {}", i.name), i.violations as f64, 0.0, 0.0, 0.0))
                .collect();
            Ok(Outcome { csv, summary: json!({ "audit": acfg, "violations": r.violations() }), checks })
        }
    }
}
