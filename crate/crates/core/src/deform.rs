//! Prescribing small changes of scalar curvature and volume: the weighted
//! variational linear solve and the fixed-base Picard iteration built on it.
//!
//! The linear stage solves the normal equations
//! `S_g(rho S_g^*(u, a)) = (sigma, tau)` by preconditioned conjugate
//! gradients; `S_g^*` is the exact transpose of the assembled `S_g` under
//! the discrete weighted pairings, so the normal operator is symmetric by
//! construction. The nonlinear stage repeatedly solves the linearization at
//! the FIXED base metric with the residual right-hand side; re-linearizing
//! at the current iterate is available as an opt-in extension.

use crate::eigen::pcg;
use crate::error::{FieldError, SolveError};
use crate::field::{MetricField, ScalarField, SymTensorField};
use crate::geometry::operators::ScalarVolumeOps;
use crate::geometry::{theta, FdOrder};
use crate::vstatic::{coercivity_probe, VstaticConfig};
use crate::weights::{b0_norm, b2_norm, WeightProfile};

#[derive(Debug, Clone)]
pub struct DeformConfig {
    pub order: FdOrder,
    /// Relative CG tolerance on the preconditioned normal equations.
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    /// Smallness gate: targets with `||(sigma,tau)||_0 > gate_factor /
    /// C_probe` are refused.
    pub gate_factor: f64,
    /// Re-linearize at the current iterate instead of the fixed base
    /// metric (extension; the fixed-base scheme is the default).
    pub newton_mode: bool,
    pub max_backoff: usize,
    /// The `rho^{-1}`-weighted parts of the residual norm are measured over
    /// `rho >= residual_rho_floor` only. Below that the weight amplifies the
    /// f64 round-off of evaluating the discrete curvature past any
    /// meaningful tolerance, so the weighted residual carries no
    /// information there; the unweighted node-wise residual check still
    /// covers every node.
    pub residual_rho_floor: f64,
    pub vstatic: VstaticConfig,
}

impl Default for DeformConfig {
    fn default() -> Self {
        DeformConfig {
            order: FdOrder::Four,
            cg_tol: 1e-12,
            cg_max_iter: 20_000,
            gate_factor: 0.1,
            newton_mode: false,
            max_backoff: 5,
            residual_rho_floor: 1e-9,
            vstatic: VstaticConfig::default(),
        }
    }
}

/// Outcome of one weighted linear solve.
#[derive(Debug, Clone)]
pub struct LinearSolveResult {
    pub u: ScalarField,
    pub a: f64,
    /// `h = rho S_g^*(u, a)`; identically zero on the clamped band.
    pub h: SymTensorField,
    /// `||S_g(h) - (sigma, tau)||_0` over the weighted region.
    pub residual: f64,
    pub cg_iterations: usize,
}

/// The assembled normal problem at one base metric.
pub struct NormalProblem {
    pub ops: ScalarVolumeOps,
    rho: Vec<f64>,
    clamped: Vec<bool>,
    diag: Vec<f64>,
}

impl NormalProblem {
    pub fn build(
        g: &MetricField,
        profile: &WeightProfile,
        order: FdOrder,
    ) -> Result<Self, SolveError> {
        crate::field::ensure_same_chart(g.chart(), &profile.rho.chart, "normal problem")
            .map_err(SolveError::Field)?;
        let ops = ScalarVolumeOps::assemble(g, order).map_err(SolveError::Field)?;
        let rho = profile.rho.data.clone();
        let clamped = profile.clamped.clone();
        let nn = ops.n_nodes();
        let m = ops.n_comp();
        // exact diagonal of K = Ms A rho Mh^{-1} A^T Ms
        let mut diag = vec![0.0; nn + 1];
        for i in 0..=nn {
            let ms_i = if i < nn { ops.ms[i] } else { 1.0 };
            if i < nn && clamped[i] {
                diag[i] = 1.0;
                continue;
            }
            let (cols, vals) = ops.a.row(i);
            let mut d = 0.0;
            let mut k = 0;
            while k < cols.len() {
                let node = cols[k] as usize / m;
                let mut v = [0.0; 16];
                let mut cnt = 0;
                while k < cols.len() && (cols[k] as usize) / m == node {
                    v[cols[k] as usize % m] = vals[k];
                    cnt += 1;
                    k += 1;
                }
                let _ = cnt;
                if self_rho(&rho, node) == 0.0 {
                    continue;
                }
                // v^T Mh_inv v
                let mut q = 0.0;
                let mhi = ops.mh_inv_block(node);
                for r in 0..m {
                    for c in 0..m {
                        q += v[r] * mhi[r * m + c] * v[c];
                    }
                }
                d += rho[node] * q;
            }
            diag[i] = (ms_i * ms_i * d).max(f64::MIN_POSITIVE);
        }
        Ok(NormalProblem { ops, rho, clamped, diag })
    }

    fn n_nodes(&self) -> usize {
        self.ops.n_nodes()
    }

    /// `h = rho S_g^*(u, a)` from a packed dof vector.
    fn deformation(&self, x: &[f64]) -> Vec<f64> {
        let nn = self.n_nodes();
        let m = self.ops.n_comp();
        let mut y = vec![0.0; nn + 1];
        for i in 0..nn {
            y[i] = self.ops.ms[i] * x[i];
        }
        y[nn] = x[nn];
        let z = self.ops.apply_at(&y);
        let mut h = self.ops.apply_mh_inv(&z);
        for node in 0..nn {
            let r = self.rho[node];
            for c in 0..m {
                h[node * m + c] = if r == 0.0 { 0.0 } else { r * h[node * m + c] };
            }
        }
        h
    }

    /// Apply the masked normal operator `P Ms A rho Mh^{-1} A^T Ms P`.
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let nn = self.n_nodes();
        let h = self.deformation(x);
        let mut out = self.ops.apply_a(&h);
        for i in 0..nn {
            if self.clamped[i] {
                out[i] = 0.0;
            } else {
                out[i] *= self.ops.ms[i];
            }
        }
        out
    }

    /// Deformation as a field (probe/diagnostic helper).
    pub fn deformation_field(&self, g: &MetricField, x: &[f64]) -> SymTensorField {
        SymTensorField { chart: g.chart().clone(), data: self.deformation(x) }
    }

    /// Solve `S_g(rho S_g^*(u, a)) = (sigma, tau)` for the masked dofs.
    pub fn solve(
        &self,
        sigma: &ScalarField,
        tau: f64,
        cfg: &DeformConfig,
    ) -> Result<(Vec<f64>, usize), SolveError> {
        let nn = self.n_nodes();
        for i in 0..nn {
            if self.clamped[i] && sigma.data[i] != 0.0 {
                return Err(SolveError::SupportViolation { node: i });
            }
        }
        let mut b = vec![0.0; nn + 1];
        for i in 0..nn {
            if !self.clamped[i] {
                b[i] = self.ops.ms[i] * sigma.data[i];
            }
        }
        b[nn] = tau;
        let precond = |r: &[f64]| -> Vec<f64> {
            r.iter().zip(self.diag.iter()).map(|(v, d)| v / d).collect()
        };
        match pcg(|x| self.apply(x), precond, &b, cfg.cg_tol, cfg.cg_max_iter) {
            Ok(res) => Ok((res.x, res.iterations)),
            Err(res) => {
                // accept a stall only when close to the requested tolerance
                if res.rel_residual <= 1e3 * cfg.cg_tol {
                    Ok((res.x, res.iterations))
                } else {
                    Err(SolveError::CgStalled {
                        iters: res.iterations,
                        residual: res.rel_residual,
                        curve: res.curve.iter().rev().take(10).rev().copied().collect(),
                    })
                }
            }
        }
    }
}

/// Residual of `S_g(h) = (sigma, tau)` in the weighted L2 norm the solver
/// minimizes (clamped rows excluded; their spillover is round-off sized).
fn linear_residual(
    problem: &NormalProblem,
    h: &SymTensorField,
    sigma: &ScalarField,
    tau: f64,
) -> Result<f64, SolveError> {
    let (ls, dv) = problem.ops.s_op(h).map_err(SolveError::Field)?;
    let mut total = 0.0;
    for i in 0..problem.n_nodes() {
        if !problem.clamped[i] {
            let r = ls.data[i] - sigma.data[i];
            total += r * r * problem.ops.ms[i];
        }
    }
    total += (dv - tau) * (dv - tau);
    Ok(total.sqrt())
}

/// Profile copy whose clamped set is extended to `rho < floor`, used for
/// residual measurement.
fn measurement_profile(profile: &WeightProfile, floor: f64) -> WeightProfile {
    let mut meas = profile.clone();
    for i in 0..meas.rho.data.len() {
        if meas.rho.data[i] < floor {
            meas.rho.data[i] = 0.0;
            meas.clamped[i] = true;
        }
    }
    meas.any_clamped = meas.clamped.iter().any(|&c| c);
    meas
}

/// Variational linear solve `S_g(rho S_g^*(u,a)) = (sigma, tau)`.
pub fn solve_linearized(
    g: &MetricField,
    profile: &WeightProfile,
    sigma: &ScalarField,
    tau: f64,
    cfg: &DeformConfig,
) -> Result<LinearSolveResult, SolveError> {
    // refuse V-static metrics with kernel diagnostics
    let report = crate::vstatic::kernel_report(g, Some(profile), &cfg.vstatic)?;
    if report.kernel_dim > 0 {
        return Err(SolveError::VStatic {
            sigma_min: report.singular_values[0],
            kernel_dim: report.kernel_dim,
        });
    }
    let problem = NormalProblem::build(g, profile, cfg.order)?;
    solve_linearized_with(&problem, g, profile, sigma, tau, cfg)
}

fn solve_linearized_with(
    problem: &NormalProblem,
    g: &MetricField,
    profile: &WeightProfile,
    sigma: &ScalarField,
    tau: f64,
    cfg: &DeformConfig,
) -> Result<LinearSolveResult, SolveError> {
    let (x, iters) = problem.solve(sigma, tau, cfg)?;
    let nn = problem.n_nodes();
    let h = SymTensorField {
        chart: g.chart().clone(),
        data: problem.deformation(&x),
    };
    let _ = profile;
    let residual = linear_residual(problem, &h, sigma, tau)?;
    Ok(LinearSolveResult {
        u: ScalarField { chart: g.chart().clone(), data: x[..nn].to_vec() },
        a: x[nn],
        h,
        residual,
        cg_iterations: iters,
    })
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct DeformIterate {
    pub residual_b0: f64,
    pub correction_b2: f64,
    pub volume: f64,
    pub min_eig_metric: f64,
}

#[derive(Debug)]
pub struct DeformReport {
    pub iterates: Vec<DeformIterate>,
    pub final_metric: MetricField,
    pub converged: bool,
    pub target_sigma: ScalarField,
    pub target_tau: f64,
    /// Measured coercivity constant of the base metric.
    pub c_probe: f64,
    /// Smallness gate that was enforced.
    pub gate: f64,
    /// Exponent fitted from the residual sequence
    /// `r_j ~ ||(sigma,tau)||^(1 + j delta)`; `None` with fewer than 3
    /// accepted iterations.
    pub delta_fitted: Option<f64>,
    /// Final node-wise scalar-curvature residual over the weighted region.
    pub sup_scalar_residual: f64,
    /// Final volume defect.
    pub volume_residual: f64,
}

/// Fixed-base iteration for `R(gamma) = R(g) + sigma`,
/// `V(gamma) = V(g) + tau`.
pub fn deform(
    g: &MetricField,
    profile: &WeightProfile,
    sigma: &ScalarField,
    tau: f64,
    tol: f64,
    max_iter: usize,
    cfg: &DeformConfig,
) -> Result<DeformReport, SolveError> {
    let c_probe = coercivity_probe(g, Some(profile), &cfg.vstatic)?;
    deform_with_probe(g, profile, sigma, tau, tol, max_iter, cfg, c_probe)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn deform_with_probe(
    g: &MetricField,
    profile: &WeightProfile,
    sigma: &ScalarField,
    tau: f64,
    tol: f64,
    max_iter: usize,
    cfg: &DeformConfig,
    c_probe: f64,
) -> Result<DeformReport, SolveError> {
    let target_b0 = b0_norm(sigma, tau, profile, g).map_err(SolveError::Weight)?;
    let gate = cfg.gate_factor / c_probe;
    if target_b0 > gate {
        return Err(SolveError::GateExceeded { norm: target_b0, gate });
    }

    let base = theta(g, cfg.order).map_err(SolveError::Field)?;
    let target_r: Vec<f64> = base
        .scalar_curvature
        .data
        .iter()
        .zip(sigma.data.iter())
        .map(|(r, s)| r + s)
        .collect();
    let target_v = base.volume + tau;

    let mut problem = NormalProblem::build(g, profile, cfg.order)?;
    let meas = measurement_profile(profile, cfg.residual_rho_floor);
    let mut gamma = g.clone();
    let mut iterates: Vec<DeformIterate> = Vec::new();
    let mut prev_b0 = f64::INFINITY;
    let mut increases = 0usize;
    let mut converged = false;
    let mut sup_scalar_residual = f64::INFINITY;
    let mut volume_residual = f64::INFINITY;

    for _m in 0..max_iter {
        let th = theta(&gamma, cfg.order).map_err(SolveError::Field)?;
        let mut res_sigma = ScalarField::zeros(g.chart());
        let mut meas_sigma = ScalarField::zeros(g.chart());
        let mut sup_res: f64 = 0.0;
        for i in 0..g.chart().n_nodes() {
            let r = target_r[i] - th.scalar_curvature.data[i];
            if !profile.clamped[i] {
                res_sigma.data[i] = r;
                sup_res = sup_res.max(r.abs());
            }
            if !meas.clamped[i] {
                meas_sigma.data[i] = r;
            }
        }
        let res_tau = target_v - th.volume;
        let r_b0 = b0_norm(&meas_sigma, res_tau, &meas, g).map_err(SolveError::Weight)?;
        sup_scalar_residual = sup_res;
        volume_residual = res_tau.abs();

        if r_b0 <= tol && sup_res <= tol && res_tau.abs() <= tol {
            converged = true;
            break;
        }
        if r_b0 >= prev_b0 {
            increases += 1;
            if increases >= 3 {
                return Err(SolveError::Diverging {
                    count: increases,
                    trace: iterates.iter().map(|it| it.residual_b0).collect(),
                });
            }
        } else {
            increases = 0;
        }
        prev_b0 = r_b0;

        if cfg.newton_mode {
            problem = NormalProblem::build(&gamma, profile, cfg.order)?;
        }
        let step = solve_linearized_with(&problem, g, profile, &res_sigma, res_tau, cfg)?;

        // positivity safeguard with halving
        let mut scale = 1.0;
        let mut accepted = None;
        for _try in 0..=cfg.max_backoff {
            match gamma.add_scaled(&step.h, scale) {
                Ok(next) => {
                    accepted = Some(next);
                    break;
                }
                Err(_) => scale *= 0.5,
            }
        }
        let next = accepted.ok_or_else(|| {
            let node = gamma
                .add_scaled(&step.h, 1.0)
                .err()
                .and_then(|e| match e {
                    FieldError::DegenerateMetric { node, .. } => Some(node),
                    _ => None,
                })
                .unwrap_or(0);
            SolveError::PositivityLoss { node }
        })?;
        let correction_b2 = b2_norm(&step.h.scaled(scale), profile, g, cfg.order)
            .map_err(SolveError::Weight)?;
        iterates.push(DeformIterate {
            residual_b0: r_b0,
            correction_b2,
            volume: th.volume,
            min_eig_metric: next.min_eigenvalue(),
        });
        gamma = next;
    }

    // fit delta from r_j ~ target_b0^(1 + j delta)
    let delta_fitted = if iterates.len() >= 3 && target_b0 > 0.0 && target_b0 < 1.0 {
        let lt = target_b0.ln();
        let pts: Vec<(f64, f64)> = iterates
            .iter()
            .enumerate()
            .filter(|(_, it)| it.residual_b0 > 0.0)
            .map(|(j, it)| (j as f64, it.residual_b0.ln() / lt - 1.0))
            .collect();
        fit_slope(&pts)
    } else {
        None
    };

    Ok(DeformReport {
        iterates,
        final_metric: gamma,
        converged,
        target_sigma: sigma.clone(),
        target_tau: tau,
        c_probe,
        gate,
        delta_fitted,
        sup_scalar_residual,
        volume_residual,
    })
}

fn fit_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-30 {
        return None;
    }
    Some((n * sxy - sx * sy) / denom)
}

/// Ratio `||gamma_1 - gamma_2||_2 / ||(s1,t1) - (s2,t2)||_0` from two
/// deformation runs at the same base metric.
#[allow(clippy::too_many_arguments)]
pub fn lipschitz_dependence(
    g: &MetricField,
    profile: &WeightProfile,
    target1: (&ScalarField, f64),
    target2: (&ScalarField, f64),
    tol: f64,
    max_iter: usize,
    cfg: &DeformConfig,
) -> Result<f64, SolveError> {
    let c_probe = coercivity_probe(g, Some(profile), &cfg.vstatic)?;
    let r1 = deform_with_probe(g, profile, target1.0, target1.1, tol, max_iter, cfg, c_probe)?;
    let r2 = deform_with_probe(g, profile, target2.0, target2.1, tol, max_iter, cfg, c_probe)?;
    let diff = SymTensorField {
        chart: g.chart().clone(),
        data: r1
            .final_metric
            .data()
            .iter()
            .zip(r2.final_metric.data().iter())
            .map(|(a, b)| a - b)
            .collect(),
    };
    let num = b2_norm(&diff, profile, g, cfg.order).map_err(SolveError::Weight)?;
    let dsig = ScalarField {
        chart: g.chart().clone(),
        data: target1
            .0
            .data
            .iter()
            .zip(target2.0.data.iter())
            .map(|(a, b)| a - b)
            .collect(),
    };
    let den = b0_norm(&dsig, target1.1 - target2.1, profile, g).map_err(SolveError::Weight)?;
    if den == 0.0 {
        return Ok(0.0);
    }
    Ok(num / den)
}

fn self_rho(rho: &[f64], node: usize) -> f64 {
    rho[node]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::uniform_chart;
    use crate::models;
    use crate::weights::{build_weights, default_d0};

    fn setup(nodes: usize) -> (MetricField, WeightProfile) {
        let chart = uniform_chart(2, nodes, 0.0, 1.0, false).unwrap();
        let g = models::bump_metric(&chart, 0.2, 0.5);
        let profile = build_weights(&g, default_d0(&chart).unwrap(), 1e-300).unwrap();
        (g, profile)
    }

    #[test]
    fn zero_target_returns_zero_solution() {
        let (g, profile) = setup(16);
        let sigma = ScalarField::zeros(g.chart());
        let cfg = DeformConfig::default();
        let problem = NormalProblem::build(&g, &profile, cfg.order).unwrap();
        let res = solve_linearized_with(&problem, &g, &profile, &sigma, 0.0, &cfg).unwrap();
        assert_eq!(res.cg_iterations, 0);
        assert!(res.h.data.iter().all(|&v| v == 0.0));
        assert_eq!(res.a, 0.0);
    }

    #[test]
    fn linear_solve_is_linear_and_accurate() {
        let (g, profile) = setup(16);
        let cfg = DeformConfig::default();
        let problem = NormalProblem::build(&g, &profile, cfg.order).unwrap();
        let sigma = {
            let mut s = models::bump_scalar(g.chart(), 0.4);
            for v in s.data.iter_mut() {
                *v *= 1e-3;
            }
            s
        };
        let r1 = solve_linearized_with(&problem, &g, &profile, &sigma, 5e-4, &cfg).unwrap();
        let sigma2 = ScalarField {
            chart: g.chart().clone(),
            data: sigma.data.iter().map(|v| 2.0 * v).collect(),
        };
        let r2 = solve_linearized_with(&problem, &g, &profile, &sigma2, 1e-3, &cfg).unwrap();
        let scale = r1.h.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for (a, b) in r1.h.data.iter().zip(r2.h.data.iter()) {
            assert!((2.0 * a - b).abs() <= 1e-6 * scale, "{a} vs {b}");
        }
        // solver hits the requested residual
        let b0 = b0_norm(&sigma, 5e-4, &profile, &g).unwrap();
        assert!(r1.residual <= 1e-9 * b0, "residual {} vs b0 {}", r1.residual, b0);
        // compact support: h vanishes identically on the clamped band
        for i in 0..g.chart().n_nodes() {
            if profile.clamped[i] {
                for c in 0..3 {
                    assert_eq!(r1.h.data[i * 3 + c], 0.0);
                }
            }
        }
    }

    #[test]
    fn linear_solve_matches_dense_direct_oracle() {
        // dense solve of the same masked normal system at a small grid
        let (g, profile) = setup(12);
        let cfg = DeformConfig::default();
        let problem = NormalProblem::build(&g, &profile, cfg.order).unwrap();
        let sigma = {
            let mut s = models::bump_scalar(g.chart(), 0.4);
            for v in s.data.iter_mut() {
                *v *= 1e-4;
            }
            s
        };
        let tau = 1e-4;
        let (x, _) = problem.solve(&sigma, tau, &cfg).unwrap();

        let nn = g.chart().n_nodes();
        let dim = nn + 1;
        let mut kmat = nalgebra::DMatrix::<f64>::zeros(dim, dim);
        for j in 0..dim {
            let mut e = vec![0.0; dim];
            e[j] = 1.0;
            if j < nn && problem.clamped[j] {
                kmat[(j, j)] = 1.0;
                continue;
            }
            let col = problem.apply(&e);
            for i in 0..dim {
                if i < nn && problem.clamped[i] {
                    continue;
                }
                kmat[(i, j)] = col[i];
            }
        }
        let mut b = vec![0.0; dim];
        for i in 0..nn {
            if !problem.clamped[i] {
                b[i] = problem.ops.ms[i] * sigma.data[i];
            }
        }
        b[nn] = tau;
        let bvec = nalgebra::DVector::from_column_slice(&b);
        let xd = kmat.lu().solve(&bvec).expect("dense solve");
        let scale = xd.amax();
        for i in 0..dim {
            if i < nn && problem.clamped[i] {
                continue;
            }
            assert!(
                (x[i] - xd[i]).abs() < 1e-6 * scale,
                "dof {i}: {} vs {}",
                x[i],
                xd[i]
            );
        }
    }

    #[test]
    fn volume_only_deformation() {
        let (g, profile) = setup(24);
        let cfg = DeformConfig::default();
        let sigma = ScalarField::zeros(g.chart());
        let tau = 1e-4;
        let report = deform(&g, &profile, &sigma, tau, 1e-9, 12, &cfg).unwrap();
        assert!(report.converged, "residuals {:?}", report.iterates);
        let v0 = crate::geometry::volume(&g);
        let v1 = crate::geometry::volume(&report.final_metric);
        assert!(((v1 - v0) - tau).abs() <= 1e-9, "dV = {}", v1 - v0);
        assert!(report.sup_scalar_residual <= 1e-9);
        // compact support of the total deformation
        for i in 0..g.chart().n_nodes() {
            if profile.clamped[i] {
                for c in 0..3 {
                    assert_eq!(report.final_metric.at(i)[c], g.at(i)[c]);
                }
            }
        }
    }

    #[test]
    fn zero_target_converges_immediately() {
        let (g, profile) = setup(16);
        let cfg = DeformConfig::default();
        let sigma = ScalarField::zeros(g.chart());
        let report = deform(&g, &profile, &sigma, 0.0, 1e-10, 5, &cfg).unwrap();
        assert!(report.converged);
        assert!(report.iterates.is_empty());
        assert_eq!(report.final_metric.data(), g.data());
    }

    #[test]
    fn gate_refuses_large_targets() {
        let (g, profile) = setup(16);
        let cfg = DeformConfig::default();
        let sigma = models::bump_scalar(g.chart(), 0.4);
        let err = deform(&g, &profile, &sigma, 0.0, 1e-8, 5, &cfg).unwrap_err();
        assert!(matches!(err, SolveError::GateExceeded { .. }));
    }

    #[test]
    fn vstatic_base_is_refused_with_kernel_diagnostics() {
        let g = models::flat_box(2, 16, 1.0);
        let profile = build_weights(&g, default_d0(g.chart()).unwrap(), 1e-300).unwrap();
        let sigma = ScalarField::zeros(g.chart());
        let cfg = DeformConfig::default();
        let err = solve_linearized(&g, &profile, &sigma, 1e-6, &cfg).unwrap_err();
        match err {
            SolveError::VStatic { kernel_dim, .. } => assert_eq!(kernel_dim, 4),
            other => panic!("unexpected {other:?}"),
        }
    }
}
