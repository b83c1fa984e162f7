//! Command implementations.

use crate::config::ConfigFile;
use crate::csvout::{fmt_float, CsvBuilder};
use crate::manifest::{manifest_path, RunManifest};
use anyhow::{anyhow, Context, Result};
use clap::Args;
use scalflow_core::deform::{deform as run_deform, DeformConfig};
use scalflow_core::field::{MetricField, ScalarField};
use scalflow_core::geometry::FdOrder;
use scalflow_core::neck::{
    approx_error_decay, build_neck, glued_volume, semilog_fit, solve_neck, NeckConfig,
};
use scalflow_core::vstatic::{kernel_report, verify_catalogue, VstaticConfig};
use scalflow_core::weights::{build_weights, default_d0, WeightProfile};
use scalflow_core::{convex, io, models};
use std::path::{Path, PathBuf};

/// Errors mapped to exit codes: configuration problems exit 2, numerical
/// failures exit 1 (with a diagnostic file when an output path is known).
#[derive(Debug)]
pub enum AppError {
    Config(String),
    Numerical(String),
}

pub struct Common {
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub seed: u64,
}

fn cfg_err<E: std::fmt::Display>(e: E) -> AppError {
    AppError::Config(e.to_string())
}

fn order_from(p: usize) -> Result<FdOrder> {
    match p {
        2 => Ok(FdOrder::Two),
        4 => Ok(FdOrder::Four),
        _ => Err(anyhow!("stencil order must be 2 or 4, got {p}")),
    }
}

/// Load a metric (with optional stored weights) from a container file, or
/// build one of the named model metrics.
fn resolve_metric(
    metric: &Option<PathBuf>,
    model: &Option<String>,
    nodes: usize,
) -> Result<(MetricField, Option<WeightProfile>)> {
    match (metric, model) {
        (Some(path), None) => {
            let container = io::load(path)
                .with_context(|| format!("loading metric {}", path.display()))?;
            Ok((container.metric, container.weights))
        }
        (None, Some(name)) => {
            let g = match name.as_str() {
                "flat-box-2d" => models::flat_box(2, nodes, 1.0),
                "flat-box-3d" => models::flat_box(3, nodes, 1.0),
                "flat-torus-2d" => models::flat_torus(2, nodes, 1.0),
                "flat-torus-3d" => models::flat_torus(3, nodes, 1.0),
                "bump-2d" => models::bump_metric(
                    &scalflow_core::chart::uniform_chart(2, nodes, 0.0, 1.0, false)
                        .map_err(|e| anyhow!(e.to_string()))?,
                    0.2,
                    0.5,
                ),
                "bump-2d-strong" => models::bump_metric(
                    &scalflow_core::chart::uniform_chart(2, nodes, 0.0, 1.0, false)
                        .map_err(|e| anyhow!(e.to_string()))?,
                    0.4,
                    0.5,
                ),
                other => {
                    return Err(anyhow!(
                        "unknown model '{other}' (flat-box-2d, flat-box-3d, flat-torus-2d, \
                         flat-torus-3d, bump-2d, bump-2d-strong)"
                    ))
                }
            };
            Ok((g, None))
        }
        _ => Err(anyhow!("exactly one of --metric or --model is required")),
    }
}

fn out_path(common: &Common, default: &str) -> PathBuf {
    common.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

/// Write a numerical-failure diagnostic next to the intended output.
fn write_diagnostic(manifest: &mut RunManifest, out: &Path, message: &str) {
    let diag = serde_json::json!({ "error": message });
    let mut path = out.as_os_str().to_owned();
    path.push(".diagnostic.json");
    let _ = manifest.write_output(
        Path::new(&path),
        &serde_json::to_vec_pretty(&diag).unwrap_or_default(),
    );
}

// ---------------------------------------------------------------- kernel

#[derive(Args)]
pub struct KernelArgs {
    /// Metric container file (.json or binary).
    #[arg(long)]
    metric: Option<PathBuf>,
    /// Built-in model metric instead of a file.
    #[arg(long)]
    model: Option<String>,
    /// Nodes per axis for model metrics.
    #[arg(long)]
    nodes: Option<usize>,
    /// Weight transition distance (box charts; default: shortest
    /// half-width / 8).
    #[arg(long)]
    d0: Option<f64>,
    /// Kernel threshold relative to the largest singular value.
    #[arg(long)]
    threshold: Option<f64>,
    /// Stencil order (2 or 4).
    #[arg(long)]
    order: Option<usize>,
}

pub fn kernel(args: &KernelArgs, common: &Common) -> Result<(), AppError> {
    let started = std::time::Instant::now();
    let file = ConfigFile::load(common.config.as_deref()).map_err(cfg_err)?;
    file.check_known(&[
        "kernel.nodes",
        "kernel.d0",
        "kernel.threshold",
        "kernel.order",
    ])
    .map_err(cfg_err)?;
    let nodes = file.integer("kernel.nodes", args.nodes, 24, 8, 128).map_err(cfg_err)?;
    let threshold = file
        .number("kernel.threshold", args.threshold, 1e-6, 1e-15, 1e-1)
        .map_err(cfg_err)?;
    let order = order_from(
        file.integer("kernel.order", args.order, 4, 2, 4).map_err(cfg_err)?,
    )
    .map_err(cfg_err)?;

    let (g, stored) = resolve_metric(&args.metric, &args.model, nodes).map_err(cfg_err)?;
    let out = out_path(common, "kernel-report.json");
    let mut manifest = RunManifest::new("kernel", file.echo(), common.seed);
    manifest.record("nodes_per_axis", g.chart().axes()[0].nodes);
    manifest.record("threshold_rel", threshold);

    let profile = if g.chart().is_periodic() {
        None
    } else if let Some(p) = stored {
        Some(p)
    } else {
        let d0_default = default_d0(g.chart()).unwrap_or(0.1);
        let d0 = file.number("kernel.d0", args.d0, d0_default, 1e-6, 10.0).map_err(cfg_err)?;
        Some(build_weights(&g, d0, 1e-300).map_err(|e| AppError::Config(e.to_string()))?)
    };

    let cfg = VstaticConfig { order, threshold_rel: threshold, ..VstaticConfig::default() };
    let result = kernel_report(&g, profile.as_ref(), &cfg);
    let success = match result {
        Ok(report) => {
            // basis elements go to sidecar files referenced by the report
            let mut basis_refs = Vec::new();
            for (k, el) in report.basis.iter().enumerate() {
                let mut path = out.as_os_str().to_owned();
                path.push(format!(".basis{k}.json"));
                let path = PathBuf::from(path);
                let body = serde_json::json!({ "f": el.f, "a": el.a });
                manifest
                    .write_output(&path, &serde_json::to_vec_pretty(&body).unwrap())
                    .map_err(cfg_err)?;
                basis_refs.push(path.display().to_string());
            }
            let body = serde_json::json!({
                "singular_values": report.singular_values,
                "kernel_dim": report.kernel_dim,
                "basis_refs": basis_refs,
                "residuals": report.residuals,
                "threshold": report.threshold,
                "sigma_max": report.sigma_max,
                "gap": report.gap,
                "verdict": report.verdict,
            });
            manifest
                .write_output(&out, &serde_json::to_vec_pretty(&body).unwrap())
                .map_err(cfg_err)?;
            Ok(())
        }
        Err(e) => {
            write_diagnostic(&mut manifest, &out, &e.to_string());
            Err(AppError::Numerical(e.to_string()))
        }
    };
    manifest
        .finish(&manifest_path(&out), started, success.is_ok())
        .map_err(cfg_err)?;
    success
}

// ---------------------------------------------------------------- deform

#[derive(Args)]
pub struct DeformArgs {
    #[arg(long)]
    metric: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    nodes: Option<usize>,
    /// Scalar-curvature target field (ScalarField JSON); "bump:AMP" scales
    /// an interior bump to b0-norm AMP; omitted means zero.
    #[arg(long)]
    sigma: Option<String>,
    /// Volume change target.
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    d0: Option<f64>,
    #[arg(long)]
    order: Option<usize>,
    /// Save the deformed metric container here.
    #[arg(long)]
    out_metric: Option<PathBuf>,
}

pub fn deform_cmd(args: &DeformArgs, common: &Common) -> Result<(), AppError> {
    let started = std::time::Instant::now();
    let file = ConfigFile::load(common.config.as_deref()).map_err(cfg_err)?;
    file.check_known(&[
        "deform.nodes",
        "deform.tau",
        "deform.tol",
        "deform.max_iter",
        "deform.d0",
        "deform.order",
    ])
    .map_err(cfg_err)?;
    let nodes = file.integer("deform.nodes", args.nodes, 32, 8, 128).map_err(cfg_err)?;
    let tau = file.number("deform.tau", args.tau, 0.0, -1.0, 1.0).map_err(cfg_err)?;
    let tol = file.number("deform.tol", args.tol, 1e-8, 1e-14, 1e-2).map_err(cfg_err)?;
    let max_iter = file
        .integer("deform.max_iter", args.max_iter, 12, 1, 200)
        .map_err(cfg_err)?;
    let order = order_from(file.integer("deform.order", args.order, 4, 2, 4).map_err(cfg_err)?)
        .map_err(cfg_err)?;

    let (g, stored) = resolve_metric(&args.metric, &args.model, nodes).map_err(cfg_err)?;
    if g.chart().is_periodic() {
        return Err(AppError::Config(
            "deformation needs a box chart with boundary weights".into(),
        ));
    }
    let profile = if let Some(p) = stored {
        p
    } else {
        let d0_default = default_d0(g.chart()).unwrap_or(0.1);
        let d0 = file.number("deform.d0", args.d0, d0_default, 1e-6, 10.0).map_err(cfg_err)?;
        build_weights(&g, d0, 1e-300).map_err(|e| AppError::Config(e.to_string()))?
    };

    let sigma = match &args.sigma {
        None => ScalarField::zeros(g.chart()),
        Some(spec) if spec.starts_with("bump:") => {
            let amp: f64 = spec[5..]
                .parse()
                .map_err(|_| AppError::Config(format!("bad bump amplitude in '{spec}'")))?;
            let mut s = models::bump_scalar(g.chart(), 0.35);
            let b0 = scalflow_core::weights::b0_norm(&s, 0.0, &profile, &g)
                .map_err(|e| AppError::Config(e.to_string()))?;
            for v in s.data.iter_mut() {
                *v *= amp / b0;
            }
            s
        }
        Some(path) => {
            let bytes = std::fs::read(path).map_err(cfg_err)?;
            serde_json::from_slice(&bytes).map_err(cfg_err)?
        }
    };

    let out = out_path(common, "deform-report.json");
    let mut manifest = RunManifest::new("deform", file.echo(), common.seed);
    manifest.record("nodes_per_axis", g.chart().axes()[0].nodes);
    manifest.record("tol", tol);
    manifest.record("order", order.value());

    let cfg = DeformConfig { order, ..DeformConfig::default() };
    let result = run_deform(&g, &profile, &sigma, tau, tol, max_iter, &cfg);
    let success = match result {
        Ok(report) => {
            if let Some(trace) = &common.trace {
                let mut csvb = CsvBuilder::new(&[
                    "iter",
                    "residual_b0",
                    "correction_b2",
                    "volume",
                    "min_eig_metric",
                ])
                .map_err(cfg_err)?;
                for (i, it) in report.iterates.iter().enumerate() {
                    csvb.row(&[
                        i.to_string(),
                        fmt_float(it.residual_b0),
                        fmt_float(it.correction_b2),
                        fmt_float(it.volume),
                        fmt_float(it.min_eig_metric),
                    ])
                    .map_err(cfg_err)?;
                }
                manifest
                    .write_output(trace, &csvb.finish().map_err(cfg_err)?)
                    .map_err(cfg_err)?;
            }
            if let Some(path) = &args.out_metric {
                let container = io::MetricContainer {
                    metric: report.final_metric.clone(),
                    weights: Some(profile.clone()),
                };
                let json = path.extension().is_some_and(|e| e == "json");
                let bytes = io::to_bytes(&container, json).map_err(cfg_err)?;
                manifest.write_output(path, &bytes).map_err(cfg_err)?;
            }
            let body = serde_json::json!({
                "converged": report.converged,
                "iterations": report.iterates.len(),
                "c_probe": report.c_probe,
                "gate": report.gate,
                "sup_scalar_residual": report.sup_scalar_residual,
                "volume_residual": report.volume_residual,
                "delta_fitted": report.delta_fitted,
            });
            manifest
                .write_output(&out, &serde_json::to_vec_pretty(&body).unwrap())
                .map_err(cfg_err)?;
            if report.converged {
                Ok(())
            } else {
                Err(AppError::Numerical(format!(
                    "not converged after {} iterations (sup residual {:e})",
                    report.iterates.len(),
                    report.sup_scalar_residual
                )))
            }
        }
        Err(e) => {
            write_diagnostic(&mut manifest, &out, &e.to_string());
            Err(AppError::Numerical(e.to_string()))
        }
    };
    manifest
        .finish(&manifest_path(&out), started, success.is_ok())
        .map_err(cfg_err)?;
    success
}


// ------------------------------------------------------------------ glue

#[derive(Args)]
pub struct GlueArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    sigma_n: Option<f64>,
    #[arg(long = "R")]
    big_r: Option<f64>,
    /// Sweep specification lo:hi:step (inclusive); overrides --t.
    #[arg(long = "T-sweep")]
    t_sweep: Option<String>,
    #[arg(long = "T")]
    t: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    ds: Option<f64>,
}

pub fn glue(args: &GlueArgs, common: &Common) -> Result<(), AppError> {
    let started = std::time::Instant::now();
    let file = ConfigFile::load(common.config.as_deref()).map_err(cfg_err)?;
    file.check_known(&["glue.n", "glue.sigma_n", "glue.R", "glue.T", "glue.beta", "glue.ds"])
        .map_err(cfg_err)?;
    let n = file.integer("glue.n", args.n, 3, 3, 8).map_err(cfg_err)?;
    let pm = (n * (n - 1)) as f64;
    let sigma_n = file
        .number("glue.sigma_n", args.sigma_n, pm, -pm, pm)
        .map_err(cfg_err)?;
    if sigma_n != 0.0 && sigma_n != pm && sigma_n != -pm {
        return Err(AppError::Config(format!(
            "sigma_n = {sigma_n} not admissible for n = {n}: must be one of {{-{pm}, 0, {pm}}}"
        )));
    }
    let big_r = file.number("glue.R", args.big_r, 0.1, 1e-6, 0.3333).map_err(cfg_err)?;
    let ds = file.number("glue.ds", args.ds, 1.0 / 32.0, 1e-4, 1.0 / 32.0).map_err(cfg_err)?;
    let beta_default = match n {
        3..=6 => 0.375 * (n as f64 - 2.0),
        _ => 0.25 * n as f64,
    };
    let beta = file.number("glue.beta", args.beta, beta_default, 1e-3, 10.0).map_err(cfg_err)?;

    let t_values: Vec<f64> = if let Some(spec) = &args.t_sweep {
        parse_sweep(spec).map_err(cfg_err)?
    } else {
        let t = file
            .number("glue.T", args.t, NeckConfig::default_t(big_r), 1.0, 100.0)
            .map_err(cfg_err)?;
        vec![t]
    };

    let out = out_path(common, "neck.json");
    let mut manifest = RunManifest::new("glue", file.echo(), common.seed);
    manifest.record("n", n);
    manifest.record("sigma_n", sigma_n);
    manifest.record("R", big_r);
    manifest.record("ds", ds);

    // a failed fixed point at small T is a sweep observation (the
    // contraction factor crosses below 1 as T grows), not a run failure;
    // the whole run fails only when every point does
    let run = || -> Result<serde_json::Value, scalflow_core::error::NeckError> {
        let mut rows: Vec<Vec<Option<f64>>> = Vec::new();
        let mut summaries = Vec::new();
        let mut any_solved = false;
        let mut fit_pts = Vec::new();
        for &t in &t_values {
            let cfg = NeckConfig::new(n, sigma_n, big_r, t, ds, (0.0, 0.0))?;
            let mut state = build_neck(&cfg)?;
            let defect_sup = state
                .defect()
                .iter()
                .fold(0.0_f64, |m, v| m.max(v.abs()));
            fit_pts.push((t, defect_sup.ln()));
            match solve_neck(&mut state, beta, 1e-9) {
                Ok(rep) => {
                    any_solved = true;
                    let gv = glued_volume(&state)?;
                    rows.push(vec![
                        Some(t),
                        Some(defect_sup),
                        Some(rep.contraction_factor),
                        Some(rep.eta_sup),
                        Some(gv.neck_contribution),
                        Some(gv.total - gv.cap_sum),
                    ]);
                    summaries.push(serde_json::json!({
                        "T": t,
                        "sup_defect": defect_sup,
                        "contraction_factor": rep.contraction_factor,
                        "eta_sup": rep.eta_sup,
                        "eta_bound": rep.eta_bound,
                        "scalar_residual_sup": rep.scalar_residual_sup,
                        "neck_volume": gv.neck_contribution,
                        "total_volume_gap": gv.total - gv.cap_sum,
                        "neck_mass_closed_form": state.neck_mass().0,
                    }));
                }
                Err(e) => {
                    rows.push(vec![Some(t), Some(defect_sup), None, None, None, None]);
                    summaries.push(serde_json::json!({
                        "T": t,
                        "sup_defect": defect_sup,
                        "solve_error": e.to_string(),
                    }));
                }
            }
        }
        if !any_solved {
            return Err(scalflow_core::error::NeckError::TTooSmall {
                t: t_values[0],
                factor: f64::NAN,
            });
        }
        let fit = if fit_pts.len() >= 4 {
            Some(semilog_fit(&fit_pts))
        } else {
            None
        };
        Ok(serde_json::json!({ "points": summaries, "defect_slope": fit.map(|f| f.0),
            "defect_fit_r2": fit.map(|f| f.1), "rows": rows }))
    };

    let success = match run() {
        Ok(body) => {
            if let Some(trace) = &common.trace {
                let mut csvb = CsvBuilder::new(&[
                    "T",
                    "sup_NT_psi",
                    "contraction_factor",
                    "eta_sup",
                    "neck_volume",
                    "total_volume_gap",
                ])
                .map_err(cfg_err)?;
                for r in body["rows"].as_array().unwrap() {
                    let r = r.as_array().unwrap();
                    csvb.row(
                        &r.iter()
                            .map(|v| v.as_f64().map(fmt_float).unwrap_or_default())
                            .collect::<Vec<_>>(),
                    )
                    .map_err(cfg_err)?;
                }
                manifest
                    .write_output(trace, &csvb.finish().map_err(cfg_err)?)
                    .map_err(cfg_err)?;
            }
            let mut body = body;
            body.as_object_mut().unwrap().remove("rows");
            manifest
                .write_output(&out, &serde_json::to_vec_pretty(&body).unwrap())
                .map_err(cfg_err)?;
            Ok(())
        }
        Err(e) => {
            write_diagnostic(&mut manifest, &out, &e.to_string());
            Err(AppError::Numerical(e.to_string()))
        }
    };
    manifest
        .finish(&manifest_path(&out), started, success.is_ok())
        .map_err(cfg_err)?;
    success
}

fn parse_sweep(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(anyhow!("sweep spec must be lo:hi:step, got '{spec}'"));
    }
    let lo: f64 = parts[0].parse()?;
    let hi: f64 = parts[1].parse()?;
    let step: f64 = parts[2].parse()?;
    if !(step > 0.0 && hi >= lo) {
        return Err(anyhow!("sweep spec must satisfy hi >= lo, step > 0"));
    }
    let mut out = Vec::new();
    let mut t = lo;
    while t <= hi + 1e-9 {
        out.push(t);
        t += step;
    }
    Ok(out)
}

// ---------------------------------------------------------------- volcmp

#[derive(Args)]
pub struct VolcmpArgs {
    /// Body spec: `ball:R`, `ellipsoid:a,b,c`, or `mesh:path.json`.
    #[arg(long)]
    body: String,
    #[arg(long)]
    n: Option<usize>,
}

pub fn volcmp(args: &VolcmpArgs, common: &Common) -> Result<(), AppError> {
    let started = std::time::Instant::now();
    let file = ConfigFile::load(common.config.as_deref()).map_err(cfg_err)?;
    file.check_known(&["volcmp.n"]).map_err(cfg_err)?;
    let n = file.integer("volcmp.n", args.n, 3, 3, 8).map_err(cfg_err)?;

    let body = parse_body(&args.body, n).map_err(cfg_err)?;
    let out = out_path(common, "volcmp.json");
    let mut manifest = RunManifest::new("volcmp", file.echo(), common.seed);
    manifest.record("n", n);

    let run = || -> Result<serde_json::Value, scalflow_core::error::ConvexError> {
        let ints = convex::surface_integrals(&body)?;
        let mink = convex::minkowski_check(&body)?;
        let bounds = convex::vstatic_volume_bound(&ints, body.dim())?;
        Ok(serde_json::json!({
            "integrals": ints,
            "quermassintegrals": mink.w,
            "slack_w1": mink.slack1,
            "slack_w2": mink.slack2,
            "curvature_bound_slack": mink.curvature_bound_slack,
            "volume_bound_b": bounds.0,
            "volume_bound_c": bounds.1,
        }))
    };
    let success = match run() {
        Ok(body) => {
            manifest
                .write_output(&out, &serde_json::to_vec_pretty(&body).unwrap())
                .map_err(cfg_err)?;
            Ok(())
        }
        Err(e) => {
            write_diagnostic(&mut manifest, &out, &e.to_string());
            Err(AppError::Numerical(e.to_string()))
        }
    };
    manifest
        .finish(&manifest_path(&out), started, success.is_ok())
        .map_err(cfg_err)?;
    success
}

fn parse_body(spec: &str, n: usize) -> Result<convex::ConvexBody> {
    if let Some(r) = spec.strip_prefix("ball:") {
        let radius: f64 = r.parse().context("ball radius")?;
        return Ok(convex::ConvexBody::RoundBall { n, radius });
    }
    if let Some(axes) = spec.strip_prefix("ellipsoid:") {
        let semi: Result<Vec<f64>, _> = axes.split(',').map(str::parse::<f64>).collect();
        let semi = semi.context("ellipsoid semi-axes")?;
        return Ok(convex::ConvexBody::Ellipsoid { semi_axes: semi });
    }
    if let Some(path) = spec.strip_prefix("mesh:") {
        #[derive(serde::Deserialize)]
        struct MeshFile {
            vertices: Vec<[f64; 3]>,
            faces: Vec<[usize; 3]>,
        }
        let bytes = std::fs::read(path).with_context(|| format!("reading mesh {path}"))?;
        let mesh: MeshFile = serde_json::from_slice(&bytes).context("parsing mesh JSON")?;
        return Ok(convex::ConvexBody::Mesh { vertices: mesh.vertices, faces: mesh.faces });
    }
    Err(anyhow!("body spec must be ball:R, ellipsoid:a,b,..., or mesh:path.json"))
}

// ----------------------------------------------------------------- sweep

#[derive(Args)]
pub struct SweepArgs {
    /// One of: curvature-convergence, quadratic-remainder, neck-decay.
    #[arg(long)]
    kind: String,
}

pub fn sweep(args: &SweepArgs, common: &Common) -> Result<(), AppError> {
    let started = std::time::Instant::now();
    let file = ConfigFile::load(common.config.as_deref()).map_err(cfg_err)?;
    file.check_known(&["sweep.n", "sweep.sigma_n", "sweep.R", "sweep.ds"]).map_err(cfg_err)?;
    let out = out_path(common, "sweep.csv");
    let mut manifest = RunManifest::new("sweep", file.echo(), common.seed);
    manifest.record("kind", args.kind.clone());

    let result: Result<Vec<u8>, AppError> = match args.kind.as_str() {
        "curvature-convergence" => curvature_convergence_csv().map_err(cfg_err),
        "quadratic-remainder" => quadratic_remainder_csv(common.seed).map_err(cfg_err),
        "neck-decay" => {
            let n = file.integer("sweep.n", None, 3, 3, 8).map_err(cfg_err)?;
            let pm = (n * (n - 1)) as f64;
            let sigma_n = file.number("sweep.sigma_n", None, pm, -pm, pm).map_err(cfg_err)?;
            let big_r = file.number("sweep.R", None, 0.1, 1e-6, 0.3333).map_err(cfg_err)?;
            neck_decay_csv(n, sigma_n, big_r).map_err(|e| AppError::Numerical(e.to_string()))
        }
        other => Err(AppError::Config(format!(
            "unknown sweep kind '{other}' (curvature-convergence, quadratic-remainder, neck-decay)"
        ))),
    };

    let success = match result {
        Ok(bytes) => {
            manifest.write_output(&out, &bytes).map_err(cfg_err)?;
            Ok(())
        }
        Err(AppError::Numerical(msg)) => {
            write_diagnostic(&mut manifest, &out, &msg);
            Err(AppError::Numerical(msg))
        }
        Err(e) => Err(e),
    };
    manifest
        .finish(&manifest_path(&out), started, success.is_ok())
        .map_err(cfg_err)?;
    success
}

fn fit_footer(csvb: &mut CsvBuilder, pts: &[(f64, f64)], cols: usize) -> Result<()> {
    if pts.len() < 4 {
        let mut row = vec!["fit-refused".to_string()];
        row.resize(cols, String::new());
        csvb.row(&row)?;
        return Ok(());
    }
    let (slope, r2) = semilog_fit(pts);
    let mut row = vec!["fit".to_string(), fmt_float(slope), fmt_float(r2)];
    row.resize(cols, String::new());
    csvb.row(&row)?;
    Ok(())
}

fn curvature_convergence_csv() -> Result<Vec<u8>> {
    let mut csvb = CsvBuilder::new(&["record", "nodes", "max_error"])?;
    let mut pts = Vec::new();
    for &nodes in &[16usize, 24, 32, 48] {
        let chart = models::sphere_chart(2, nodes, 0.15 * std::f64::consts::PI, 0.85 * std::f64::consts::PI);
        let g = models::sphere_metric(&chart);
        let curv = scalflow_core::geometry::curvature(&g, FdOrder::Four)
            .map_err(|e| anyhow!(e.to_string()))?;
        let err = curv
            .scalar
            .data
            .iter()
            .map(|r| (r - 2.0).abs())
            .fold(0.0_f64, f64::max);
        csvb.row(&["point".into(), nodes.to_string(), fmt_float(err)])?;
        pts.push(((nodes as f64).ln(), err.ln()));
    }
    fit_footer(&mut csvb, &pts, 3)?;
    csvb.finish()
}

fn quadratic_remainder_csv(seed: u64) -> Result<Vec<u8>> {
    use rand::{Rng, SeedableRng};
    let chart = scalflow_core::chart::uniform_chart(2, 24, 0.0, 1.0, true)
        .map_err(|e| anyhow!(e.to_string()))?;
    let g = MetricField::flat(&chart);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let (ax, ay, phase) = (
        1.0 + rng.random::<f64>(),
        0.5 + rng.random::<f64>(),
        rng.random::<f64>(),
    );
    let h = scalflow_core::field::SymTensorField::from_fn(&chart, |x, out| {
        let s = (2.0 * std::f64::consts::PI * (x[0] + phase)).sin()
            * (2.0 * std::f64::consts::PI * x[1]).cos();
        out[0] = 0.4 * ax * s;
        out[1] = 0.15 * s;
        out[2] = -0.3 * ay * s;
    });
    let mut csvb = CsvBuilder::new(&["record", "t", "q_norm"])?;
    let mut pts = Vec::new();
    for k in 0..7 {
        let t = 10f64.powf(-4.0 + 3.0 * k as f64 / 6.0);
        let (qs, qv) = scalflow_core::geometry::quadratic_remainder(&g, &h.scaled(t), FdOrder::Four)
            .map_err(|e| anyhow!(e.to_string()))?;
        let norm = qs.sup_norm() + qv.abs();
        csvb.row(&["point".into(), fmt_float(t), fmt_float(norm)])?;
        pts.push((t.ln(), norm.ln()));
    }
    fit_footer(&mut csvb, &pts, 3)?;
    csvb.finish()
}

fn neck_decay_csv(n: usize, sigma_n: f64, big_r: f64) -> Result<Vec<u8>, scalflow_core::error::NeckError> {
    let base = NeckConfig::new(n, sigma_n, big_r, 12.0, 1.0 / 32.0, (0.0, 0.0))?;
    let ts: Vec<f64> = (0..9).map(|k| 8.0 + 2.0 * k as f64).collect();
    let rep = approx_error_decay(&base, &ts, None)?;
    let mut csvb = CsvBuilder::new(&["record", "T", "sup_defect", "middle", "bulk", "ends"])
        .expect("csv header");
    for p in &rep.points {
        csvb.row(&[
            "point".into(),
            fmt_float(p.t),
            fmt_float(p.sup_defect),
            fmt_float(p.middle),
            fmt_float(p.bulk),
            fmt_float(p.ends),
        ])
        .expect("csv row");
    }
    csvb.row(&[
        "fit".into(),
        fmt_float(rep.slope),
        fmt_float(rep.r_squared),
        fmt_float(rep.interior_slope),
        fmt_float(rep.interior_r_squared),
        String::new(),
    ])
    .expect("csv fit row");
    Ok(csvb.finish().expect("csv finish"))
}

// ------------------------------------------------------------- catalogue

#[derive(Args)]
pub struct CatalogueArgs {
    /// Nodes per axis of the model charts.
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    order: Option<usize>,
}

pub fn catalogue(args: &CatalogueArgs, common: &Common) -> Result<(), AppError> {
    let started = std::time::Instant::now();
    let file = ConfigFile::load(common.config.as_deref()).map_err(cfg_err)?;
    file.check_known(&["catalogue.nodes", "catalogue.order"]).map_err(cfg_err)?;
    let nodes = file
        .integer("catalogue.nodes", args.nodes, 48, 12, 128)
        .map_err(cfg_err)?;
    let order = order_from(
        file.integer("catalogue.order", args.order, 4, 2, 4).map_err(cfg_err)?,
    )
    .map_err(cfg_err)?;

    let out = out_path(common, "catalogue.json");
    let mut manifest = RunManifest::new("catalogue", file.echo(), common.seed);
    manifest.record("nodes_per_axis", nodes);
    manifest.record("order", order.value());

    let report = verify_catalogue(nodes, order);
    manifest
        .write_output(&out, &serde_json::to_vec_pretty(&report).unwrap())
        .map_err(cfg_err)?;
    let success = if report.all_passed {
        Ok(())
    } else {
        let failed: Vec<&str> = report
            .entries
            .iter()
            .filter(|e| !e.passed)
            .map(|e| e.name.as_str())
            .collect();
        Err(AppError::Numerical(format!("catalogue entries failed: {}", failed.join(", "))))
    };
    manifest
        .finish(&manifest_path(&out), started, success.is_ok())
        .map_err(cfg_err)?;
    success
}
