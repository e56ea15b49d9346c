//! Subcommand execution: configuration loading, scans, checks and artifacts.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use lrlab::lab::cauchy::{cauchy_scan, CauchyResult, CauchySpec};
use lrlab::lab::cone::{cone_scan, ConeScanResult, ConeSpec};
use lrlab::lab::config::{PlotFormat, RadiusExpect, RunConfig, Subcommand, System, TauValue};
use lrlab::lab::growth::{nu_norm_growth_scan, GrowthResult, GrowthSpec};
use lrlab::lab::radius::{support_radius_scan, RadiusResult, RadiusSpec};
use lrlab::lab::suites::{run_algebra_suite, run_lemma_suite, Check};
use lrlab::lab::check_nu;
use lrlab::linalg::spectral_norm;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::output::{num, write_file, FileEntry, Plot, Table};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{path}:{line}:{column}: {message}")]
    Schema { path: String, line: usize, column: usize, message: String },
    #[error("{0}: {1}")]
    Io(String, std::io::Error),
    #[error(transparent)]
    Lab(#[from] lrlab::Error),
}

pub struct Options {
    pub command: Subcommand,
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub threads: usize,
    pub tolerance: Option<f64>,
    pub seed: Option<u64>,
}

pub struct Outcome {
    pub checks: Vec<Check>,
}

/// Result of one scan before it is written out.
struct Artifacts {
    checks: Vec<Check>,
    summary: Value,
    tables: Vec<Table>,
    plots: Vec<Plot>,
    /// Truncation and engine details for the manifest.
    integrator: Value,
}

pub fn load_config(path: &Path) -> Result<RunConfig, RunError> {
    let text = fs::read_to_string(path).map_err(|e| RunError::Io(path.display().to_string(), e))?;
    serde_json::from_str(&text).map_err(|e| {
        let message = e.to_string();
        // serde_json appends " at line L column C"; the prefix carries it instead
        let message = match message.rfind(" at line ") {
            Some(i) => message[..i].to_string(),
            None => message,
        };
        RunError::Schema { path: path.display().to_string(), line: e.line(), column: e.column(), message }
    })
}

pub fn execute(opts: &Options) -> Result<Outcome, RunError> {
    let started = Instant::now();
    let (mut cfg, base) = match &opts.config {
        Some(p) => (load_config(p)?, p.parent().map(Path::to_path_buf).unwrap_or_default()),
        None => (RunConfig::empty(), PathBuf::from(".")),
    };
    if let Some(t) = opts.tolerance {
        cfg.tolerance = t;
    }
    if let Some(s) = opts.seed {
        cfg.seed = s;
    }
    cfg.check_sections(opts.command)?;
    match opts.command {
        Subcommand::VerifyAlgebra => {
            cfg.verify_algebra.get_or_insert_with(Default::default);
        }
        Subcommand::VerifyLemmas => {
            cfg.verify_lemmas.get_or_insert_with(Default::default);
        }
        _ => {}
    }
    fs::create_dir_all(&opts.out).map_err(|e| RunError::Io(opts.out.display().to_string(), e))?;

    let artifacts = match opts.command {
        Subcommand::VerifyAlgebra => verify_algebra(&cfg)?,
        Subcommand::VerifyLemmas => verify_lemmas(&cfg)?,
        Subcommand::Cone => cone(&cfg, &base)?,
        Subcommand::Cauchy => cauchy(&cfg, &base)?,
        Subcommand::Growth => growth(&cfg, &base)?,
        Subcommand::Radius => radius(&cfg, &base)?,
    };

    let io = |e| RunError::Io(opts.out.display().to_string(), e);
    let mut files: Vec<FileEntry> = Vec::new();
    if cfg.formats.contains(&PlotFormat::Csv) {
        for t in &artifacts.tables {
            files.push(write_file(&opts.out, &t.file, &t.render()).map_err(io)?);
        }
    }
    if cfg.formats.contains(&PlotFormat::Svg) {
        for p in &artifacts.plots {
            files.push(write_file(&opts.out, &p.file, &p.render()).map_err(io)?);
        }
    }
    let passed = artifacts.checks.iter().all(|c| c.passed);
    let mut summary = json!({
        "subcommand": opts.command,
        "passed": passed,
        "checks": artifacts.checks,
        "runtime_seconds": started.elapsed().as_secs_f64(),
    });
    merge(&mut summary, artifacts.summary);
    let summary_text = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
    files.push(write_file(&opts.out, "summary.json", &summary_text).map_err(io)?);

    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        timestamp: chrono::Utc::now().to_rfc3339(),
        subcommand: opts.command,
        threads: opts.threads,
        seed: cfg.seed,
        integrator: json!({ "tolerance": cfg.tolerance, "method": "adaptive second-order Magnus", "scan": artifacts.integrator }),
        config: serde_json::to_value(&cfg).expect("config serializes"),
        files,
    };
    let manifest_text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    fs::write(opts.out.join("manifest.json"), manifest_text).map_err(io)?;
    Ok(Outcome { checks: artifacts.checks })
}

#[derive(Serialize)]
struct Manifest {
    version: &'static str,
    timestamp: String,
    subcommand: Subcommand,
    threads: usize,
    seed: u64,
    integrator: Value,
    config: Value,
    files: Vec<FileEntry>,
}

fn merge(into: &mut Value, from: Value) {
    if let (Value::Object(a), Value::Object(b)) = (into, from) {
        a.extend(b);
    }
}

fn suite_artifacts(checks: Vec<Check>, extra: Value) -> Artifacts {
    let mut table = Table { file: "checks.csv".into(), header: vec!["name", "passed", "value"], rows: Vec::new() };
    for c in &checks {
        table.rows.push(vec![c.name.clone(), c.passed.to_string(), num(c.value)]);
    }
    Artifacts { checks, summary: extra, tables: vec![table], plots: Vec::new(), integrator: Value::Null }
}

fn verify_algebra(cfg: &RunConfig) -> Result<Artifacts, RunError> {
    let mut suite = cfg.verify_algebra.clone().unwrap_or_default();
    suite.tolerance = cfg.tolerance;
    let report = run_algebra_suite(&suite, cfg.seed)?;
    Ok(suite_artifacts(report.checks, json!({ "parameters": suite })))
}

fn verify_lemmas(cfg: &RunConfig) -> Result<Artifacts, RunError> {
    let suite = cfg.verify_lemmas.clone().unwrap_or_default();
    let report = run_lemma_suite(&suite, cfg.seed)?;
    Ok(suite_artifacts(report.checks, json!({ "parameters": suite })))
}

fn system(cfg: &RunConfig, base: &Path) -> Result<System, RunError> {
    Ok(cfg.system.as_ref().expect("checked by check_sections").build(base)?)
}

/// `max |a − b|` over paired values, or `None` when the lengths differ.
fn max_shift(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn refine_check(shift: f64, residual: Option<f64>, floor: f64) -> Check {
    let bound = residual.unwrap_or(0.0).max(floor);
    let mut c = Check::at_most("refine_shift", shift, bound);
    c.detail = format!("tolerance/10 rerun shifts values by {shift:.3e}, bound {bound:.3e}");
    c
}

fn cone(cfg: &RunConfig, base: &Path) -> Result<Artifacts, RunError> {
    let sec = cfg.cone.as_ref().expect("checked by check_sections");
    let sys_cfg = cfg.system.as_ref().expect("checked by check_sections");
    let sys = system(cfg, base)?;
    let times = sec.times.resolve(None)?;
    let spec_for = |sys: &System, tolerance: f64| ConeSpec {
        s: sec.s,
        times: times.clone(),
        k: sec.k,
        x0: sys.x0,
        distances: sec.distances.clone(),
        delta: sec.delta,
        tolerance,
        engine: cfg.engine,
    };
    let probe = sys.probe_matrix(&sec.probe)?;
    let res = cone_scan(&sys.chain, &sys.observable, &probe, &spec_for(&sys, cfg.tolerance))?;
    let norm_a = sys.observable.op_norm();
    let norm_b = spectral_norm(&probe);

    let mut runs: Vec<(usize, ConeScanResult)> = Vec::new();
    for &length in &sec.compare_lengths {
        let other = sys_cfg.build_chain(length)?;
        let probe = other.probe_matrix(&sec.probe)?;
        runs.push((length, cone_scan(&other.chain, &other.observable, &probe, &spec_for(&other, cfg.tolerance))?));
    }

    let mut checks = Vec::new();
    let ratio = res.max_entry() / (2.0 * norm_a * norm_b).max(f64::MIN_POSITIVE);
    checks.push(Check::at_most("entries_bounded", ratio, 1.0 + 1e-9));
    let start = res.entries.iter().filter(|e| e.t == sec.s).map(|e| e.value).fold(0.0, f64::max);
    checks.push(Check::at_most("zero_at_start", start, 1e-12));

    let velocities: Vec<(usize, Option<f64>)> = std::iter::once((sys.graph().len(), res.velocity()))
        .chain(runs.iter().map(|(l, r)| (*l, r.velocity())))
        .collect();
    let residual_ratio = match (&res.linear, &res.exponential) {
        (Some(l), Some(e)) if e.residual > 0.0 => Some(l.residual / e.residual),
        (Some(l), Some(_)) if l.residual == 0.0 => Some(0.0),
        _ => None,
    };
    let spread = velocity_spread(&velocities);
    if let Some(expect) = &sec.expect {
        checks.push(match residual_ratio {
            Some(r) => Check::at_most("linear_vs_exponential", r, expect.max_residual_ratio),
            None => Check::flag("linear_vs_exponential", false, "fits unavailable"),
        });
        checks.push(match spread {
            Some(s) => Check::at_most("velocity_stability", s, expect.max_velocity_spread),
            None => Check::flag("velocity_stability", false, "velocities unavailable"),
        });
    }

    let psi_g = sys.uniform_norm()?;
    let c_lr = res.velocity().filter(|_| psi_g > 0.0).map(|v| v / psi_g);

    if cfg.refine {
        let fine = cone_scan(&sys.chain, &sys.observable, &probe, &spec_for(&sys, cfg.tolerance / 10.0))?;
        let a: Vec<f64> = res.radii.iter().map(|r| r.r).collect();
        let b: Vec<f64> = fine.radii.iter().map(|r| r.r).collect();
        checks.push(refine_check(max_shift(&a, &b), res.linear.as_ref().map(|f| f.residual), 0.0));
    }

    let mut tables = vec![cone_table("cone.csv", &res)];
    let mut series = vec![(format!("L = {}", sys.graph().len()), res.radii.iter().map(|r| (r.t, r.r)).collect())];
    for (l, r) in &runs {
        tables.push(cone_table(&format!("cone_L{l}.csv"), r));
        series.push((format!("L = {l}"), r.radii.iter().map(|q| (q.t, q.r)).collect()));
    }
    let plots = vec![Plot {
        file: "cone.svg".into(),
        title: format!("threshold radius, δ = {}", sec.delta),
        x_label: "t".into(),
        y_label: "r*(t)".into(),
        series,
    }];
    let summary = json!({
        "velocity": res.velocity(),
        "psi_G": psi_g,
        "c_lr": c_lr,
        "linear": res.linear,
        "exponential": res.exponential,
        "residual_ratio": residual_ratio,
        "front": res.front,
        "radii": res.radii,
        "threshold": res.threshold,
        "velocities": velocities.iter().map(|(l, v)| json!({"length": l, "velocity": v})).collect::<Vec<_>>(),
        "velocity_spread": spread,
        "engine": res.engine,
        "k": res.k,
    });
    let integrator = json!({ "engine": res.engine, "k": res.k, "largest_feasible_k": res.k });
    Ok(Artifacts { checks, summary, tables, plots, integrator })
}

/// `(max − min)/max` over the available velocities.
fn velocity_spread(vs: &[(usize, Option<f64>)]) -> Option<f64> {
    let vals: Option<Vec<f64>> = vs.iter().map(|(_, v)| *v).collect();
    let vals = vals?;
    if vals.len() < 2 {
        return None;
    }
    let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    (hi > 0.0).then(|| (hi - lo) / hi)
}

fn cone_table(file: &str, res: &ConeScanResult) -> Table {
    let mut t = Table::new(file, ["t", "r", "value"]);
    for e in &res.entries {
        t.push(e.t, e.r, e.value);
    }
    t
}

fn tau_json(tau: &Option<TauValue>) -> Value {
    serde_json::to_value(tau).expect("tau serializes")
}

fn cauchy(cfg: &RunConfig, base: &Path) -> Result<Artifacts, RunError> {
    let sec = cfg.cauchy.as_ref().expect("checked by check_sections");
    let sys = system(cfg, base)?;
    check_nu(sec.nu, sys.mu()?)?;
    let tau = sys.tau(&sec.tau, base)?;
    let spec = |tolerance: f64| -> Result<CauchySpec, RunError> {
        Ok(CauchySpec {
            s: sec.s.resolve(Some(tau.tau))?,
            t: sec.t.resolve(Some(tau.tau))?,
            x0: sys.x0,
            k_list: sec.k_list.clone(),
            l_ref: sec.l_ref,
            nu: sec.nu,
            tau: tau.tau,
            tolerance,
            engine: cfg.engine,
        })
    };
    let main = spec(cfg.tolerance)?;
    let res = cauchy_scan(&sys.chain, &sys.observable, &main)?;
    let mut checks = vec![Check::flag(
        "monotone_in_k",
        res.monotone,
        "differences are non-increasing in k up to integrator slack",
    )];
    let bound = -sec.nu + sec.slope_margin;
    checks.push(match res.slope() {
        Some(s) => Check::at_most("log_log_slope", s, bound),
        None if res.rows.iter().all(|r| r.value == 0.0) => {
            Check::flag("log_log_slope", true, "every difference is exactly zero")
        }
        None => Check::flag("log_log_slope", false, "too few nonzero differences for a fit"),
    });
    if cfg.refine {
        let fine = cauchy_scan(&sys.chain, &sys.observable, &spec(cfg.tolerance / 10.0)?)?;
        checks.push(refine_check(ln_shift(&res, &fine), res.fit.as_ref().map(|f| f.residual), 0.0));
    }
    let mut table = Table::new("cauchy.csv", ["t", "k", "value"]);
    for r in &res.rows {
        table.push(main.t, r.k, r.value);
    }
    let points = res.rows.iter().filter(|r| r.value > 0.0).map(|r| ((1.0 + r.k).ln(), r.value.ln())).collect();
    let plots = vec![Plot {
        file: "cauchy.svg".into(),
        title: format!("truncation differences at t = {:.4}", main.t),
        x_label: "ln(1 + k)".into(),
        y_label: "ln difference".into(),
        series: vec![("difference".into(), points)],
    }];
    let summary = json!({
        "tau": tau_json(&Some(tau)),
        "s": main.s,
        "t": main.t,
        "slope": res.slope(),
        "slope_bound": bound,
        "fit": res.fit,
        "monotone": res.monotone,
        "zero_ks": res.zero_ks,
        "l_ref": res.l_ref,
        "a_nu_norm": res.a_nu_norm,
        "engine": res.engine,
        "rows": res.rows,
    });
    let integrator = json!({ "engine": res.engine, "k_list": sec.k_list, "l_ref": res.l_ref });
    Ok(Artifacts { checks, summary, tables: vec![table], plots, integrator })
}

fn ln_shift(a: &CauchyResult, b: &CauchyResult) -> f64 {
    a.rows
        .iter()
        .zip(&b.rows)
        .map(|(x, y)| match (x.value > 0.0, y.value > 0.0) {
            (true, true) => (x.value.ln() - y.value.ln()).abs(),
            (false, false) => 0.0,
            _ => f64::INFINITY,
        })
        .fold(0.0, f64::max)
}

fn growth(cfg: &RunConfig, base: &Path) -> Result<Artifacts, RunError> {
    let sec = cfg.growth.as_ref().expect("checked by check_sections");
    let sys = system(cfg, base)?;
    let tau = sec.tau.as_ref().map(|t| sys.tau(t, base)).transpose()?;
    let c_phi = match tau {
        Some(t) => t.c_phi,
        None => sys.c_phi()?,
    };
    let tau_v = tau.map(|t| t.tau);
    let spec = |tolerance: f64| -> Result<GrowthSpec, RunError> {
        Ok(GrowthSpec {
            s: sec.s.resolve(tau_v)?,
            times: sec.times.resolve(tau_v)?,
            x0: sys.x0,
            nu: sec.nu,
            mu: sys.mu()?,
            c_phi,
            tolerance,
            engine: cfg.engine,
        })
    };
    let main = spec(cfg.tolerance)?;
    let res = nu_norm_growth_scan(&sys.chain, &sys.observable, &main)?;
    let mut checks = vec![match res.anchor_error {
        Some(e) => Check::at_most("anchor", e, sec.anchor_tolerance),
        None => Check::flag("anchor", false, "s is not on the time grid"),
    }];
    checks.push(match &res.fit {
        Some(f) => Check::at_most("envelope_residual", f.residual, sec.max_envelope_residual),
        None => Check::flag("envelope_residual", false, "too few points for a fit"),
    });
    if cfg.refine {
        let fine = nu_norm_growth_scan(&sys.chain, &sys.observable, &spec(cfg.tolerance / 10.0)?)?;
        let a: Vec<f64> = res.rows.iter().map(|r| r.value.ln()).collect();
        let b: Vec<f64> = fine.rows.iter().map(|r| r.value.ln()).collect();
        checks.push(refine_check(max_shift(&a, &b), res.fit.as_ref().map(|f| f.residual), 0.0));
    }
    let mut table = Table::new("growth.csv", ["t", "k", "value"]);
    for r in &res.rows {
        table.push(r.t, res.k, r.value);
    }
    let plots = vec![growth_plot(&res, sec.nu)];
    let summary = json!({
        "tau": tau_json(&tau),
        "c_phi": c_phi,
        "mu": main.mu,
        "anchor": res.anchor,
        "anchor_error": res.anchor_error,
        "fit": res.fit,
        "gamma_proxy": res.fit.as_ref().map(|f| f.slope),
        "envelope": res.envelope,
        "engine": res.engine,
        "k": res.k,
        "rows": res.rows,
    });
    let integrator = json!({ "engine": res.engine, "k": res.k, "largest_feasible_k": res.k });
    Ok(Artifacts { checks, summary, tables: vec![table], plots, integrator })
}

fn growth_plot(res: &GrowthResult, nu: f64) -> Plot {
    Plot {
        file: "growth.svg".into(),
        title: format!("localized norm growth, ν = {nu}"),
        x_label: "t".into(),
        y_label: "ln ‖α A‖_ν".into(),
        series: vec![(
            "ln norm".into(),
            res.rows.iter().filter(|r| r.value > 0.0).map(|r| (r.t, r.value.ln())).collect(),
        )],
    }
}

fn radius(cfg: &RunConfig, base: &Path) -> Result<Artifacts, RunError> {
    let sec = cfg.radius.as_ref().expect("checked by check_sections");
    let sys = system(cfg, base)?;
    let spec = |tolerance: f64| -> Result<RadiusSpec, RunError> {
        Ok(RadiusSpec {
            s: sec.s,
            times: sec.times.resolve(None)?,
            x0: sys.x0,
            delta: sec.delta,
            tolerance,
            engine: cfg.engine,
            trend_window: sec.trend_window,
        })
    };
    let res = support_radius_scan(&sys.chain, &sys.observable, &spec(cfg.tolerance)?)?;
    let mut checks = vec![Check::flag(
        "monotone_in_delta",
        res.monotone_in_delta,
        "r(t) at δ/10 is never below r(t) at δ",
    )];
    match sec.expect {
        Some(RadiusExpect::Linear) => checks.push(match (res.linear_preferred(), &res.linear, &res.exponential) {
            (Some(ok), Some(l), Some(e)) => Check::flag(
                "linear_preferred",
                ok,
                format!("linear residual {:.4} vs exponential {:.4}", l.residual, e.residual),
            ),
            _ => Check::flag("linear_preferred", false, "fits unavailable"),
        }),
        Some(RadiusExpect::Superlinear) => checks.push(Check::flag(
            "superlinear",
            res.superlinear,
            format!("r/(t − s) over {:?}: {:?}", res.trend_window, res.speed_ratios),
        )),
        None => {}
    }
    if cfg.refine {
        let fine = support_radius_scan(&sys.chain, &sys.observable, &spec(cfg.tolerance / 10.0)?)?;
        let a: Vec<f64> = res.rows.iter().map(|r| r.r).collect();
        let b: Vec<f64> = fine.rows.iter().map(|r| r.r).collect();
        checks.push(refine_check(max_shift(&a, &b), res.linear.as_ref().map(|f| f.residual), 0.0));
    }
    let mut table = Table::new("radius.csv", ["t", "r", "value"]);
    for r in &res.rows {
        table.push(r.t, r.r, r.tail);
    }
    let plots = vec![radius_plot(&res, sec.delta)];
    let summary = json!({
        "linear": res.linear,
        "exponential": res.exponential,
        "linear_preferred": res.linear_preferred(),
        "front": res.front,
        "trend_window": res.trend_window,
        "speed_ratios": res.speed_ratios,
        "superlinear": res.superlinear,
        "degenerate": res.degenerate,
        "monotone_in_delta": res.monotone_in_delta,
        "engine": res.engine,
        "k": res.k,
        "rows": res.rows,
    });
    let integrator = json!({ "engine": res.engine, "k": res.k, "largest_feasible_k": res.k });
    Ok(Artifacts { checks, summary, tables: vec![table], plots, integrator })
}

fn radius_plot(res: &RadiusResult, delta: f64) -> Plot {
    Plot {
        file: "radius.svg".into(),
        title: format!("support radius, δ = {delta}"),
        x_label: "t".into(),
        y_label: "r(t)".into(),
        series: vec![
            ("δ".into(), res.rows.iter().map(|r| (r.t, r.r)).collect()),
            ("δ/10".into(), res.rows.iter().map(|r| (r.t, r.r_fine)).collect()),
        ],
    }
}
