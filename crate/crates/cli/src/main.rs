mod config;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use soliton_core::center_manifold::{biaxial_expansion_check, invariance_defect, solve_center_poly, VALIDITY_RADIUS};
use soliton_core::classifier::{classify, f_sign, ClassifyConfig};
use soliton_core::geometry::{reconstruct_profile, reference_profile, soliton_residual, Reference};
use soliton_core::integrator::{shoot, ShootConfig, Trajectory};
use soliton_core::io::{fmt_sci, trajectory_meta, write_json, write_profile_csv, write_trajectory_csv};
use soliton_core::search::{
    arc_point, find_critical, sweep_gamma, verify_soliton_candidate, CriticalBracket, SearchConfig, SearchError,
    VerifyConfig,
};
use soliton_core::state::ShootParams;

use config::{Defaults, FileConfig, Overrides, Resolved};
use manifest::RunManifest;

#[derive(Parser)]
#[command(name = "soliton", version, about = "Shoot and classify cohomogeneity-one steady Ricci solitons")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Global {
    /// Relative integrator tolerance.
    #[arg(long, global = true)]
    rtol: Option<f64>,
    /// Absolute integrator tolerance.
    #[arg(long, global = true)]
    atol: Option<f64>,
    /// Compact-chart horizon in s (first horizon for searches).
    #[arg(long, global = true)]
    horizon: Option<f64>,
    /// Launch radius.
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// TOML file with defaults for the flags above (and tol, horizon_cap).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate one trajectory and classify it.
    Shoot {
        #[arg(long)]
        n: u32,
        #[arg(long, default_value_t = 0.0)]
        lambda: f64,
        #[arg(long, allow_negative_numbers = true)]
        alpha: f64,
        #[arg(long, allow_negative_numbers = true)]
        beta: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        gamma: f64,
        /// Record compact samples every this much s.
        #[arg(long)]
        s_spacing: Option<f64>,
    },
    /// Bisect for the critical point on one arc.
    FindCritical {
        #[arg(long)]
        n: u32,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        gamma: f64,
        #[arg(long)]
        tol: Option<f64>,
        /// Also integrate the midpoint far out and report its asymptotics.
        #[arg(long)]
        verify: bool,
    },
    /// find-critical over a list of gamma slices.
    Sweep {
        #[arg(long, default_value_t = 4)]
        n: u32,
        /// Comma-separated gamma values.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        gammas: Vec<f64>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Self-checks: reference metrics, conserved quantities, center manifold.
    Validate,
    /// Center-manifold polynomial coefficients.
    CenterPoly {
        #[arg(long, default_value_t = 4)]
        degree: u32,
    },
}

#[derive(Debug)]
enum Failure {
    BadInput(String),
    Search(String),
    Validation(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::BadInput(_) => 2,
            Failure::Search(_) => 3,
            Failure::Validation(_) => 4,
        }
    }
}

impl From<soliton_core::io::IoError> for Failure {
    fn from(e: soliton_core::io::IoError) -> Self {
        Failure::Io(e.to_string())
    }
}

fn bad<E: std::fmt::Display>(e: E) -> Failure {
    Failure::BadInput(e.to_string())
}

fn search_failure(e: SearchError) -> Failure {
    match e {
        SearchError::Domain(d) => bad(d),
        e => Failure::Search(e.to_string()),
    }
}

const DEFAULT_TOL: f64 = 1e-10;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let msg = match &f {
                Failure::BadInput(m) | Failure::Search(m) | Failure::Validation(m) | Failure::Io(m) => m,
            };
            eprintln!("error: {msg}");
            ExitCode::from(f.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let file = match &cli.global.config {
        Some(p) => FileConfig::load(p).map_err(Failure::BadInput)?,
        None => FileConfig::default(),
    };
    let g = &cli.global;
    let over = Overrides { rtol: g.rtol, atol: g.atol, horizon: g.horizon, epsilon: g.epsilon, out: g.out.clone() };
    let shot_d = ShootConfig::default();
    let search_d = SearchConfig::default();
    let defaults = |search: bool| Defaults {
        rtol: shot_d.rtol,
        atol: shot_d.atol,
        horizon: if search { search_d.shot.horizon } else { shot_d.horizon },
        epsilon: if search { search_d.shot.epsilon } else { shot_d.epsilon },
    };
    let start = Instant::now();
    match cli.cmd {
        Cmd::Shoot { n, lambda, alpha, beta, gamma, s_spacing } => {
            let r = config::resolve(&over, &file, defaults(false)).map_err(Failure::BadInput)?;
            cmd_shoot(&r, n, lambda, alpha, beta, gamma, s_spacing, start)
        }
        Cmd::FindCritical { n, gamma, tol, verify } => {
            let r = config::resolve(&over, &file, defaults(true)).map_err(Failure::BadInput)?;
            let tol = check_tol(tol.or(file.tol).unwrap_or(DEFAULT_TOL))?;
            cmd_find(&r, &file, n, gamma, tol, verify, start)
        }
        Cmd::Sweep { n, gammas, tol } => {
            let r = config::resolve(&over, &file, defaults(true)).map_err(Failure::BadInput)?;
            let tol = check_tol(tol.or(file.tol).unwrap_or(DEFAULT_TOL))?;
            cmd_sweep(&r, &file, n, &gammas, tol, start)
        }
        Cmd::Validate => {
            let r = config::resolve(&over, &file, defaults(false)).map_err(Failure::BadInput)?;
            cmd_validate(&r, start)
        }
        Cmd::CenterPoly { degree } => {
            let r = config::resolve(&over, &file, defaults(false)).map_err(Failure::BadInput)?;
            cmd_center(&r, degree, start)
        }
    }
}

fn check_tol(tol: f64) -> Result<f64, Failure> {
    if tol.is_finite() && tol > 0.0 {
        Ok(tol)
    } else {
        Err(Failure::BadInput(format!("tol must be positive, got {tol}")))
    }
}

fn out_dir(r: &Resolved) -> Result<&Path, Failure> {
    std::fs::create_dir_all(&r.out).map_err(|e| Failure::Io(format!("{}: {e}", r.out.display())))?;
    Ok(&r.out)
}

fn shot_config(r: &Resolved) -> ShootConfig {
    ShootConfig { rtol: r.rtol, atol: r.atol, horizon: r.horizon, epsilon: r.epsilon, ..Default::default() }
}

fn search_config(r: &Resolved, file: &FileConfig) -> SearchConfig {
    let mut c = SearchConfig { shot: shot_config(r), ..Default::default() };
    if let Some(cap) = file.horizon_cap {
        c.horizon_cap = cap;
    }
    c
}

/// Trajectory CSVs plus a profile CSV when the primal part allows one.
fn write_run(traj: &Trajectory, dir: &Path, stem: &str) -> Result<Vec<PathBuf>, Failure> {
    let mut outs = write_trajectory_csv(traj, &dir.join(stem))?;
    if let Ok(profile) = reconstruct_profile(traj) {
        let p = dir.join(format!("{stem}_profile.csv"));
        write_profile_csv(&profile, &p)?;
        outs.push(p);
    }
    Ok(outs)
}

#[allow(clippy::too_many_arguments)]
fn cmd_shoot(
    r: &Resolved,
    n: u32,
    lambda: f64,
    alpha: f64,
    beta: f64,
    gamma: f64,
    s_spacing: Option<f64>,
    start: Instant,
) -> Result<(), Failure> {
    let params = ShootParams::new(n, alpha, beta, gamma).and_then(|p| p.with_lambda(lambda)).map_err(bad)?;
    let cfg = ShootConfig { s_spacing, ..shot_config(r) };
    let traj = shoot(&params, &cfg).map_err(bad)?;
    let class = classify(&traj, &ClassifyConfig::default());
    let dir = out_dir(r)?;
    let mut m = RunManifest::new("shoot", serde_json::to_value(params).unwrap(), r.into());
    m.outputs = write_run(&traj, dir, "shoot")?;
    let meta = dir.join("shoot_meta.json");
    write_json(&trajectory_meta(&traj), &meta)?;
    m.outputs.push(meta);
    let sign = f_sign(&traj);
    println!("verdict: {:?}", class.verdict);
    println!("pattern: {:?} ({})", class.pattern, fmt_sci(class.pattern_metric));
    println!("f_sign: {sign}");
    m.classifications = json!({ "classification": class, "f_sign": sign, "termination": traj.termination });
    m.regression = json!({ "s_end": traj.s_end(), "y_final": traj.last().y_like(), "c_drift": traj.c_drift(0.0, f64::INFINITY) });
    m.wall_seconds = start.elapsed().as_secs_f64();
    m.write(dir)?;
    Ok(())
}

fn bracket_json(b: &CriticalBracket) -> serde_json::Value {
    let mid = b.midpoint_params().ok();
    json!({
        "n": b.n,
        "gamma": b.gamma,
        "lo": b.lo,
        "hi": b.hi,
        "width": b.width,
        "midpoint": b.midpoint(),
        "alpha": mid.map(|p| p.alpha),
        "beta": mid.map(|p| p.beta),
        "iterations": b.iterations,
        "horizon_used": b.horizon_used,
        "unresolved": b.unresolved,
    })
}

fn cmd_find(r: &Resolved, file: &FileConfig, n: u32, gamma: f64, tol: f64, verify: bool, start: Instant) -> Result<(), Failure> {
    let cfg = search_config(r, file);
    let params = json!({ "n": n, "gamma": gamma, "tol": tol, "horizon_cap": cfg.horizon_cap, "verify": verify });
    let b = find_critical(n, gamma, tol, &cfg).map_err(search_failure)?;
    let dir = out_dir(r)?;
    let mut m = RunManifest::new("find-critical", params, r.into());
    let mid = b.midpoint_params().map_err(bad)?;
    let traj = shoot(&mid, &cfg.shot).map_err(bad)?;
    m.outputs = write_run(&traj, dir, "midpoint")?;
    let mut classes = json!({ "lo": b.lo_class, "hi": b.hi_class });
    if verify {
        let rep = verify_soliton_candidate(&b, &cfg, &VerifyConfig::default()).map_err(search_failure)?;
        m.outputs.extend(write_run(&rep.trajectory, dir, "verified")?);
        println!("midpoint pattern: {:?} ({})", rep.pattern, fmt_sci(rep.pattern_metric));
        classes["verified"] = json!({
            "classification": rep.classification,
            "pattern": rep.pattern,
            "pattern_metric": rep.pattern_metric,
            "pattern_s": rep.pattern_s,
            "xi_limit": rep.xi_limit,
            "c_drift": rep.c_drift,
            "unresolved": rep.unresolved,
        });
    }
    println!("t* in [{}, {}]", fmt_sci(b.lo), fmt_sci(b.hi));
    println!("alpha* = {}, beta* = {}", fmt_sci(mid.alpha), fmt_sci(mid.beta));
    m.classifications = classes;
    m.regression = bracket_json(&b);
    m.wall_seconds = start.elapsed().as_secs_f64();
    m.write(dir)?;
    if b.unresolved {
        return Err(Failure::Search("bisection stopped on an undecided midpoint".into()));
    }
    Ok(())
}

fn cmd_sweep(r: &Resolved, file: &FileConfig, n: u32, gammas: &[f64], tol: f64, start: Instant) -> Result<(), Failure> {
    for g in gammas {
        // reject malformed slices up front; search-level refusals count as failures
        arc_point(n, *g, 0.5).map_err(bad)?;
    }
    let cfg = search_config(r, file);
    let dir = out_dir(r)?;
    let results = sweep_gamma(n, gammas, tol, &cfg);
    let mut m = RunManifest::new("sweep", json!({ "n": n, "gammas": gammas, "tol": tol }), r.into());
    let table = dir.join("sweep.csv");
    let mut w: Vec<Vec<String>> = Vec::new();
    let mut rows = Vec::new();
    let mut failed = Vec::new();
    for (k, (g, res)) in gammas.iter().zip(results).enumerate() {
        match res {
            Ok(b) => {
                let mid = b.midpoint_params().map_err(bad)?;
                let traj = shoot(&mid, &cfg.shot).map_err(bad)?;
                m.outputs.extend(write_run(&traj, dir, &format!("sweep_{k:03}"))?);
                w.push(vec![
                    fmt_sci(*g),
                    fmt_sci(b.lo),
                    fmt_sci(b.hi),
                    fmt_sci(b.width),
                    fmt_sci(mid.alpha),
                    fmt_sci(mid.beta),
                    (b.unresolved as u8).to_string(),
                ]);
                println!("gamma {}: t* = {}", fmt_sci(*g), fmt_sci(b.midpoint()));
                rows.push(bracket_json(&b));
            }
            Err(e) => {
                eprintln!("gamma {}: {e}", fmt_sci(*g));
                failed.push(json!({ "gamma": g, "error": e.to_string() }));
            }
        }
    }
    write_table(&table, &["gamma", "lo", "hi", "width", "alpha", "beta", "unresolved"], &w)?;
    m.outputs.push(table);
    m.regression = json!(rows);
    m.classifications = json!({ "failed": failed });
    m.wall_seconds = start.elapsed().as_secs_f64();
    if !failed.is_empty() {
        m.exit_code = 3;
    }
    m.write(dir)?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Search(format!("{} of {} slices failed", failed.len(), gammas.len())))
    }
}

fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), Failure> {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    std::fs::write(path, s).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

#[derive(serde::Serialize)]
struct Check {
    name: &'static str,
    pass: bool,
    detail: serde_json::Value,
}

fn cmd_validate(r: &Resolved, start: Instant) -> Result<(), Failure> {
    let mut checks = Vec::new();

    for (kind, r0, h) in [(Reference::TaubBolt, 2.02, 0.04), (Reference::EguchiHanson, 0.2, 0.005)] {
        let m = (3.0 / h) as usize;
        let res = |h: f64, m: usize| reference_profile(kind, r0, h, m).and_then(|p| soliton_residual(&p, 0.0));
        let (a, b) = (res(h, m).map_err(bad)?, res(h / 2.0, 2 * m).map_err(bad)?);
        let ratio = a / b;
        checks.push(Check {
            name: kind.name(),
            pass: a < 1e-6 && (12.0..=20.0).contains(&ratio),
            detail: json!({ "residual": a, "residual_half_step": b, "ratio": ratio }),
        });
    }

    let cfg = ShootConfig { horizon: 50.0, ..shot_config(r) };
    let p = arc_point(3, 0.0, 0.2).map_err(bad)?;
    let traj = shoot(&p, &cfg).map_err(bad)?;
    let drift = traj.c_drift(0.0, 50.0).unwrap_or(f64::INFINITY);
    checks.push(Check { name: "C conservation", pass: drift < 1e-8, detail: json!({ "drift": drift }) });

    let p = ShootParams::new(4, 0.0, 0.6, 0.8).map_err(bad)?;
    let traj = shoot(&p, &ShootConfig { horizon: 20.0, ..cfg.clone() }).map_err(bad)?;
    let z = traj.conserved_log.iter().map(|c| c.z_scaled.abs()).fold(0.0, f64::max);
    checks.push(Check { name: "Z constraint", pass: z < 1e-8, detail: json!({ "max_z_scaled": z }) });

    let poly = solve_center_poly(4).map_err(bad)?;
    let y = [0.02, 0.03, 0.05];
    let d = |k: f64| invariance_defect(&poly, &[y[0] * k, y[1] * k, y[2] * k]);
    let order = (d(1.0) / d(0.5)).log2();
    let bx = biaxial_expansion_check(&poly);
    let sym = poly.symmetry_defect();
    checks.push(Check {
        name: "center manifold",
        pass: order > 4.5 && sym < 1e-14 && bx.ci_quadratic_deviation < 1e-14 && bx.cj_quadratic_deviation < 1e-14,
        detail: json!({ "defect_order": order, "symmetry_defect": sym, "slice": bx, "radius": VALIDITY_RADIUS }),
    });

    let dir = out_dir(r)?;
    let report = dir.join("validate.json");
    write_json(&checks, &report)?;
    for c in &checks {
        println!("{} {}", if c.pass { "PASS" } else { "FAIL" }, c.name);
    }
    let failed: Vec<_> = checks.iter().filter(|c| !c.pass).map(|c| c.name).collect();
    let mut m = RunManifest::new("validate", json!({}), r.into());
    m.outputs.push(report);
    m.classifications = json!(checks);
    m.wall_seconds = start.elapsed().as_secs_f64();
    m.exit_code = if failed.is_empty() { 0 } else { 4 };
    m.write(dir)?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Validation(format!("failed: {}", failed.join(", "))))
    }
}

fn cmd_center(r: &Resolved, degree: u32, start: Instant) -> Result<(), Failure> {
    let poly = solve_center_poly(degree).map_err(bad)?;
    let dir = out_dir(r)?;
    let p = dir.join("center_poly.json");
    write_json(&poly, &p)?;
    for (e, c) in poly.coefficients() {
        println!("{}{}{} {}", e[0], e[1], e[2], fmt_sci(c));
    }
    let mut m = RunManifest::new("center-poly", json!({ "degree": degree }), r.into());
    m.outputs.push(p);
    m.regression = json!({ "symmetry_defect": poly.symmetry_defect(), "terms": poly.coefficients().len() });
    m.wall_seconds = start.elapsed().as_secs_f64();
    m.write(dir)?;
    Ok(())
}
