//! Boundary weight `rho`, scale function `phi`, and the weighted norms used
//! by the linear solve and the deformation diagnostics.
//!
//! `rho = exp(-1/d)` within `d0` of the boundary, reaches 1 at `2 d0`, and
//! is glued by a fixed quintic step so the profile is smooth, monotone, and
//! reproducible. `phi = d^2` near the boundary and flattens to a plateau.

use crate::chart::ChartSpec;
use crate::error::{FieldError, WeightError};
use crate::field::{sym_index, sym_len, MetricField, ScalarField, SymTensorField};
use crate::geometry::{christoffel_with, hessian, DiffOps, FdOrder};
use serde::{Deserialize, Serialize};

/// Quintic smoothstep: 0 for s <= 0, 1 for s >= 1, C^2 at both ends.
#[inline]
pub fn quintic_step(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if s >= 1.0 {
        1.0
    } else {
        s * s * s * (10.0 + s * (-15.0 + 6.0 * s))
    }
}

/// `rho` profile as a function of boundary distance.
fn rho_of_dist(d: f64, d0: f64, floor: f64) -> (f64, bool) {
    if d <= 0.0 {
        return (0.0, true);
    }
    if d >= 2.0 * d0 {
        return (1.0, false);
    }
    let chi = quintic_step((2.0 * d0 - d) / d0);
    let v = (-chi / d).exp();
    if v < floor {
        (0.0, true)
    } else {
        (v, false)
    }
}

/// `phi = psi(d)^2` where `psi` follows `d` up to `d0` and flattens smoothly
/// to `1.5 d0` by `2 d0`.
fn phi_of_dist(d: f64, d0: f64) -> f64 {
    let psi = if d <= d0 {
        d
    } else if d >= 2.0 * d0 {
        1.5 * d0
    } else {
        let s = (d - d0) / d0;
        // integral of 1 - quintic_step over [d0, d]
        let istep = s.powi(4) * (2.5 + s * (-3.0 + s));
        d0 + d0 * (s - istep)
    };
    psi * psi
}

/// The weight data attached to one box chart.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightProfile {
    pub d0: f64,
    pub rho_floor: f64,
    pub rho: ScalarField,
    pub phi: ScalarField,
    /// Distance to the box boundary, measured along coordinate lines in the
    /// chart metric (line integral of sqrt(g_aa)).
    pub dist: ScalarField,
    /// Nodes where `rho` fell below the floor and was clamped to exactly 0.
    pub clamped: Vec<bool>,
    pub any_clamped: bool,
}

/// Default transition distance: 1/8 of the shortest box half-width.
pub fn default_d0(chart: &ChartSpec) -> Option<f64> {
    chart.min_half_width().map(|w| w / 8.0)
}

/// Distance to the boundary along coordinate lines in the metric `g`:
/// per non-periodic axis, the trapezoid line integral of `sqrt(g_aa)` to
/// both ends, minimized over axes and ends.
fn boundary_distance_field(g: &MetricField) -> ScalarField {
    let chart = g.chart();
    let n = chart.dim();
    let m = sym_len(n);
    let nn = chart.n_nodes();
    let strides = chart.strides();
    let mut dist = vec![f64::INFINITY; nn];
    for a in 0..n {
        let ax = chart.axis(a);
        if ax.periodic {
            continue;
        }
        let stride = strides[a];
        let nodes_a = ax.nodes;
        let h = ax.spacing;
        let caa = sym_index(a, a, n);
        // iterate over all lines along axis a
        for base in 0..nn {
            if (base / stride) % nodes_a != 0 {
                continue;
            }
            // cumulative distance from the low end
            let mut cum = vec![0.0; nodes_a];
            for i in 1..nodes_a {
                let p = base + (i - 1) * stride;
                let q = base + i * stride;
                let sp = g.data()[p * m + caa].sqrt();
                let sq = g.data()[q * m + caa].sqrt();
                cum[i] = cum[i - 1] + 0.5 * (sp + sq) * h;
            }
            let total = cum[nodes_a - 1];
            for i in 0..nodes_a {
                let node = base + i * stride;
                let d = cum[i].min(total - cum[i]);
                if d < dist[node] {
                    dist[node] = d;
                }
            }
        }
    }
    ScalarField { chart: chart.clone(), data: dist }
}

/// Build the weight profile for a box chart. Errors on periodic charts.
pub fn build_weights(
    g: &MetricField,
    d0: f64,
    rho_floor: f64,
) -> Result<WeightProfile, WeightError> {
    let chart = g.chart();
    if chart.is_periodic() {
        return Err(WeightError::PeriodicChart);
    }
    assert!(d0 > 0.0, "transition distance must be positive");
    let dist = boundary_distance_field(g);
    let nn = chart.n_nodes();
    let mut rho = vec![0.0; nn];
    let mut phi = vec![0.0; nn];
    let mut clamped = vec![false; nn];
    let mut any = false;
    for i in 0..nn {
        let (r, c) = rho_of_dist(dist.data[i], d0, rho_floor);
        rho[i] = r;
        clamped[i] = c;
        any |= c;
        phi[i] = phi_of_dist(dist.data[i], d0);
    }
    Ok(WeightProfile {
        d0,
        rho_floor,
        rho: ScalarField { chart: chart.clone(), data: rho },
        phi: ScalarField { chart: chart.clone(), data: phi },
        dist,
        clamped,
        any_clamped: any,
    })
}

/// Trivial weights for periodic charts: `rho = 1`, `phi = 1`, no boundary.
pub fn trivial_weights(chart: &ChartSpec) -> WeightProfile {
    let nn = chart.n_nodes();
    WeightProfile {
        d0: f64::INFINITY,
        rho_floor: 0.0,
        rho: ScalarField { chart: chart.clone(), data: vec![1.0; nn] },
        phi: ScalarField { chart: chart.clone(), data: vec![1.0; nn] },
        dist: ScalarField { chart: chart.clone(), data: vec![f64::INFINITY; nn] },
        clamped: vec![false; nn],
        any_clamped: false,
    }
}

fn check_weight(w: &ScalarField) -> Result<(), WeightError> {
    for (node, &v) in w.data.iter().enumerate() {
        if v < 0.0 {
            return Err(WeightError::NegativeWeight { node, value: v });
        }
    }
    Ok(())
}

/// Weighted L2 norm of a scalar field: `(sum u^2 w sqrt(det g) cellvol)^(1/2)`.
pub fn weighted_l2_scalar(
    u: &ScalarField,
    w: &ScalarField,
    g: &MetricField,
) -> Result<f64, WeightError> {
    check_weight(w)?;
    let cw = g.chart().cell_weights();
    let sq = g.sqrt_dets();
    let mut s = 0.0;
    for i in 0..u.data.len() {
        s += u.data[i] * u.data[i] * w.data[i] * sq[i] * cw[i];
    }
    Ok(s.sqrt())
}

/// Weighted L2 norm of a symmetric tensor field with the `g`-tensor norm.
pub fn weighted_l2_tensor(
    h: &SymTensorField,
    w: &ScalarField,
    g: &MetricField,
) -> Result<f64, WeightError> {
    check_weight(w)?;
    let chart = g.chart();
    let n = chart.dim();
    let m = sym_len(n);
    let ginv = g.inverses().map_err(|_| WeightError::NegativeWeight { node: 0, value: -1.0 })?;
    let cw = chart.cell_weights();
    let sq = g.sqrt_dets();
    let mut s = 0.0;
    for node in 0..chart.n_nodes() {
        let gi = &ginv[node * m..(node + 1) * m];
        let hv = h.at(node);
        let mut norm2 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for a in 0..n {
                    for b in 0..n {
                        norm2 += gi[sym_index(i, a, n)]
                            * gi[sym_index(j, b, n)]
                            * hv[sym_index(i, j, n)]
                            * hv[sym_index(a, b, n)];
                    }
                }
            }
        }
        s += norm2 * w.data[node] * sq[node] * cw[node];
    }
    Ok(s.sqrt())
}

/// `L2_{rho^{-1}}` norm of a scalar field; errors when the field is nonzero
/// on the clamped band.
pub fn l2_rho_inv_scalar(
    u: &ScalarField,
    profile: &WeightProfile,
    g: &MetricField,
) -> Result<f64, WeightError> {
    let cw = g.chart().cell_weights();
    let sq = g.sqrt_dets();
    let mut s = 0.0;
    for i in 0..u.data.len() {
        if profile.clamped[i] {
            if u.data[i] != 0.0 {
                return Err(WeightError::SupportViolation { node: i });
            }
            continue;
        }
        s += u.data[i] * u.data[i] / profile.rho.data[i] * sq[i] * cw[i];
    }
    Ok(s.sqrt())
}

fn l2_rho_inv_tensor(
    h: &SymTensorField,
    profile: &WeightProfile,
    g: &MetricField,
    ginv: &[f64],
) -> Result<f64, WeightError> {
    let chart = g.chart();
    let n = chart.dim();
    let m = sym_len(n);
    let cw = chart.cell_weights();
    let sq = g.sqrt_dets();
    let mut s = 0.0;
    for node in 0..chart.n_nodes() {
        let hv = h.at(node);
        if profile.clamped[node] {
            if hv.iter().any(|&v| v != 0.0) {
                return Err(WeightError::SupportViolation { node });
            }
            continue;
        }
        let gi = &ginv[node * m..(node + 1) * m];
        let mut norm2 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for a in 0..n {
                    for b in 0..n {
                        norm2 += gi[sym_index(i, a, n)]
                            * gi[sym_index(j, b, n)]
                            * hv[sym_index(i, j, n)]
                            * hv[sym_index(a, b, n)];
                    }
                }
            }
        }
        s += norm2 / profile.rho.data[node] * sq[node] * cw[node];
    }
    Ok(s.sqrt())
}

/// Discrete `H^2_rho` norm of a scalar field: weighted L2 of the value, the
/// gradient (g-norm), and the covariant Hessian (g-norm).
pub fn h2_rho_norm(
    u: &ScalarField,
    profile: &WeightProfile,
    g: &MetricField,
    order: FdOrder,
) -> Result<f64, FieldError> {
    let chart = g.chart();
    let n = chart.dim();
    let m = sym_len(n);
    let ops = DiffOps::new(chart, order);
    let ginv = g.inverses()?;
    let gamma = christoffel_with(g, &ops)?;
    let du: Vec<Vec<f64>> = (0..n).map(|a| ops.d1(&u.data, 1, a)).collect();
    let hess = hessian(&u.data, &gamma, &ops);
    let cw = chart.cell_weights();
    let sq = g.sqrt_dets();
    let mut total = 0.0;
    for node in 0..chart.n_nodes() {
        let w = profile.rho.data[node] * sq[node] * cw[node];
        if w == 0.0 {
            continue;
        }
        let gi = &ginv[node * m..(node + 1) * m];
        let mut grad2 = 0.0;
        for a in 0..n {
            for b in 0..n {
                grad2 += gi[sym_index(a, b, n)] * du[a][node] * du[b][node];
            }
        }
        let hs = &hess[node * m..(node + 1) * m];
        let mut hess2 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for a in 0..n {
                    for b in 0..n {
                        hess2 += gi[sym_index(i, a, n)]
                            * gi[sym_index(j, b, n)]
                            * hs[sym_index(i, j, n)]
                            * hs[sym_index(a, b, n)];
                    }
                }
            }
        }
        total += (u.data[node] * u.data[node] + grad2 + hess2) * w;
    }
    Ok(total.sqrt())
}

/// The three solver norms evaluated together.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WeightedNormReport {
    /// `||(sigma, tau)||_0`
    pub b0: f64,
    /// `||h||_2`
    pub b2: f64,
    /// `||(u, a)||_4`
    pub b4: f64,
}

/// Iterated finite-difference sup stack: `levels[j][node]` is the max of
/// `|D^alpha f|` over multi-indices `alpha` of length `j`.
fn derivative_stack(
    data: &[f64],
    ncomp: usize,
    ops: &DiffOps,
    max_order: usize,
) -> Vec<Vec<f64>> {
    let n = ops.chart.dim();
    let nn = ops.chart.n_nodes();
    let mut current: Vec<Vec<f64>> = vec![data.to_vec()];
    let mut levels = Vec::with_capacity(max_order + 1);
    let reduce = |arrays: &[Vec<f64>]| -> Vec<f64> {
        (0..nn)
            .map(|node| {
                let mut mx: f64 = 0.0;
                for arr in arrays {
                    for c in 0..ncomp {
                        mx = mx.max(arr[node * ncomp + c].abs());
                    }
                }
                mx
            })
            .collect()
    };
    levels.push(reduce(&current));
    for _ in 1..=max_order {
        let mut next = Vec::with_capacity(current.len() * n);
        for arr in &current {
            for a in 0..n {
                next.push(ops.d1(arr, ncomp, a));
            }
        }
        levels.push(reduce(&next));
        current = next;
    }
    levels
}

/// Max of `values` over the coordinate ball of radius `phi(x)/2` around each
/// node (periodic axes wrap).
fn ball_max(chart: &ChartSpec, values: &[f64], radius: &[f64]) -> Vec<f64> {
    let n = chart.dim();
    let strides = chart.strides();
    let nn = chart.n_nodes();
    crate::exec::map_collect(nn, |node| {
        let r = radius[node];
        let mut multi = vec![0usize; n];
        chart.multi_index(node, &mut multi);
        // axis index windows
        let windows: Vec<(i64, i64)> = (0..n)
            .map(|a| {
                let k = (r / chart.axis(a).spacing).floor() as i64;
                (-k, k)
            })
            .collect();
        let mut mx: f64 = 0.0;
        let mut offset = vec![0i64; n];
        fn rec(
            a: usize,
            n: usize,
            windows: &[(i64, i64)],
            offset: &mut Vec<i64>,
            chart: &ChartSpec,
            multi: &[usize],
            strides: &[usize],
            values: &[f64],
            r: f64,
            mx: &mut f64,
        ) {
            if a == n {
                // coordinate distance check
                let mut d2 = 0.0;
                for b in 0..n {
                    let dx = offset[b] as f64 * chart.axis(b).spacing;
                    d2 += dx * dx;
                }
                if d2 > r * r {
                    return;
                }
                let mut node = 0usize;
                for b in 0..n {
                    let ax = chart.axis(b);
                    let i = multi[b] as i64 + offset[b];
                    let i = if ax.periodic {
                        i.rem_euclid(ax.nodes as i64) as usize
                    } else if i < 0 || i >= ax.nodes as i64 {
                        return;
                    } else {
                        i as usize
                    };
                    node += i * strides[b];
                }
                *mx = mx.max(values[node].abs());
                return;
            }
            for o in windows[a].0..=windows[a].1 {
                offset[a] = o;
                rec(a + 1, n, windows, offset, chart, multi, strides, values, r, mx);
            }
        }
        rec(0, n, &windows, &mut offset, chart, &multi, &strides, values, r, &mut mx);
        mx
    })
}

/// Evaluate the discrete `b0`, `b2`, `b4` norms of a target `(sigma, tau)`,
/// a deformation `h`, and a potential pair `(u, a)`.
#[allow(clippy::too_many_arguments)]
pub fn weighted_norm_report(
    sigma: &ScalarField,
    tau: f64,
    h: &SymTensorField,
    u: &ScalarField,
    a: f64,
    profile: &WeightProfile,
    g: &MetricField,
    order: FdOrder,
) -> Result<WeightedNormReport, WeightError> {
    let chart = g.chart();
    let n = chart.dim();
    let half_n = n as f64 / 2.0;
    let ops = DiffOps::new(chart, order);
    let ginv = g.inverses().map_err(|_| WeightError::NegativeWeight { node: 0, value: -1.0 })?;
    let nn = chart.n_nodes();
    let radius: Vec<f64> = profile.phi.data.iter().map(|p| 0.5 * p).collect();

    // b0: |tau| + L2_{rho^{-1}}(sigma) + sup phi^{4+n/2} rho^{-1/2} |sigma|_ball
    let sup_weight = |exponent: f64, node: usize| -> f64 {
        let rho = profile.rho.data[node];
        if rho == 0.0 {
            0.0
        } else {
            profile.phi.data[node].powf(exponent) / rho.sqrt()
        }
    };
    // support check for sigma on the clamped band happens inside the rho^{-1} norm
    let l2_sigma = l2_rho_inv_scalar(sigma, profile, g)?;
    let sigma_ball = ball_max(chart, &sigma.data, &radius);
    let mut sup0: f64 = 0.0;
    for node in 0..nn {
        sup0 = sup0.max(sup_weight(4.0 + half_n, node) * sigma_ball[node]);
    }
    let b0 = tau.abs() + l2_sigma + sup0;

    // b2: L2_{rho^{-1}}(h) + sup phi^{2+n/2} rho^{-1/2} sum_j phi^j |D^j h|_ball
    let l2_h = l2_rho_inv_tensor(h, profile, g, &ginv)?;
    let m = sym_len(n);
    let h_stack = derivative_stack(&h.data, m, &ops, 2);
    let h_balls: Vec<Vec<f64>> = h_stack.iter().map(|lvl| ball_max(chart, lvl, &radius)).collect();
    let mut sup2: f64 = 0.0;
    for node in 0..nn {
        let mut stack = 0.0;
        let mut phi_pow = 1.0;
        for level in &h_balls {
            stack += phi_pow * level[node];
            phi_pow *= profile.phi.data[node];
        }
        sup2 = sup2.max(sup_weight(2.0 + half_n, node) * stack);
    }
    let b2 = l2_h + sup2;

    // b4: |a| + H2_rho(u) + sup phi^{n/2} rho^{1/2} sum_j phi^j |D^j u|_ball
    let h2 = h2_rho_norm(u, profile, g, ops.order)
        .map_err(|_| WeightError::NegativeWeight { node: 0, value: -1.0 })?;
    let u_stack = derivative_stack(&u.data, 1, &ops, 4);
    let u_balls: Vec<Vec<f64>> = u_stack.iter().map(|lvl| ball_max(chart, lvl, &radius)).collect();
    let mut sup4: f64 = 0.0;
    for node in 0..nn {
        let rho = profile.rho.data[node];
        if rho == 0.0 {
            continue;
        }
        let w = profile.phi.data[node].powf(half_n) * rho.sqrt();
        let mut stack = 0.0;
        let mut phi_pow = 1.0;
        for level in &u_balls {
            stack += phi_pow * level[node];
            phi_pow *= profile.phi.data[node];
        }
        sup4 = sup4.max(w * stack);
    }
    let b4 = a.abs() + h2 + sup4;

    Ok(WeightedNormReport { b0, b2, b4 })
}

/// The `b0` norm of a target alone.
pub fn b0_norm(
    sigma: &ScalarField,
    tau: f64,
    profile: &WeightProfile,
    g: &MetricField,
) -> Result<f64, WeightError> {
    let chart = g.chart();
    let half_n = chart.dim() as f64 / 2.0;
    let l2_sigma = l2_rho_inv_scalar(sigma, profile, g)?;
    let radius: Vec<f64> = profile.phi.data.iter().map(|p| 0.5 * p).collect();
    let sigma_ball = ball_max(chart, &sigma.data, &radius);
    let mut sup0: f64 = 0.0;
    for node in 0..chart.n_nodes() {
        let rho = profile.rho.data[node];
        if rho == 0.0 {
            continue;
        }
        let w = profile.phi.data[node].powf(4.0 + half_n) / rho.sqrt();
        sup0 = sup0.max(w * sigma_ball[node]);
    }
    Ok(tau.abs() + l2_sigma + sup0)
}

/// The `b2` norm of a deformation alone.
pub fn b2_norm(
    h: &SymTensorField,
    profile: &WeightProfile,
    g: &MetricField,
    order: FdOrder,
) -> Result<f64, WeightError> {
    let chart = g.chart();
    let n = chart.dim();
    let half_n = n as f64 / 2.0;
    let ops = DiffOps::new(chart, order);
    let ginv = g.inverses().map_err(|_| WeightError::NegativeWeight { node: 0, value: -1.0 })?;
    let l2_h = l2_rho_inv_tensor(h, profile, g, &ginv)?;
    let radius: Vec<f64> = profile.phi.data.iter().map(|p| 0.5 * p).collect();
    let m = sym_len(n);
    let h_stack = derivative_stack(&h.data, m, &ops, 2);
    let h_balls: Vec<Vec<f64>> = h_stack.iter().map(|lvl| ball_max(chart, lvl, &radius)).collect();
    let mut sup2: f64 = 0.0;
    for node in 0..chart.n_nodes() {
        let rho = profile.rho.data[node];
        if rho == 0.0 {
            continue;
        }
        let w = profile.phi.data[node].powf(2.0 + half_n) / rho.sqrt();
        let mut stack = 0.0;
        let mut phi_pow = 1.0;
        for level in &h_balls {
            stack += phi_pow * level[node];
            phi_pow *= profile.phi.data[node];
        }
        sup2 = sup2.max(w * stack);
    }
    Ok(l2_h + sup2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::uniform_chart;

    fn setup() -> (MetricField, WeightProfile) {
        let chart = uniform_chart(2, 33, 0.0, 1.0, false).unwrap();
        let g = MetricField::flat(&chart);
        let d0 = default_d0(&chart).unwrap();
        let profile = build_weights(&g, d0, 1e-300).unwrap();
        (g, profile)
    }

    #[test]
    fn rho_formula_and_plateau_regions() {
        let d0 = 0.1;
        let (r, c) = rho_of_dist(d0 / 2.0, d0, 1e-300);
        assert!(!c);
        assert!((r - (-2.0 / d0).exp()).abs() < 1e-15);
        let (r, _) = rho_of_dist(2.0 * d0, d0, 1e-300);
        assert_eq!(r, 1.0);
        let (r, _) = rho_of_dist(5.0 * d0, d0, 1e-300);
        assert_eq!(r, 1.0);
    }

    #[test]
    fn rho_clamps_below_floor_with_flag() {
        // dist = 0.01 with d0 = 0.1: rho = e^{-100} ~ 3.7e-44
        let (r, clamped) = rho_of_dist(0.01, 0.1, 1e-40);
        assert_eq!(r, 0.0);
        assert!(clamped);
        // with the default floor the same node is kept
        let (r, clamped) = rho_of_dist(0.01, 0.1, 1e-300);
        assert!(!clamped);
        assert!((r - (-100.0_f64).exp()).abs() < 1e-50);
    }

    #[test]
    fn rho_monotone_in_distance() {
        let d0 = 0.08;
        let mut prev = -1.0;
        for k in 0..400 {
            let d = k as f64 * 0.001;
            let (r, _) = rho_of_dist(d, d0, 1e-300);
            assert!(r >= prev, "rho not monotone at d={d}");
            prev = r;
        }
    }

    #[test]
    fn rho_beats_every_polynomial_at_boundary() {
        // rho / d^8 -> 0 at the three nodes nearest the boundary; the bound
        // 1e-6 needs the node spacing to resolve the essential zero, so use
        // a fine axis
        let chart = crate::chart::ChartSpec::new(vec![
            crate::chart::AxisSpec { nodes: 176, spacing: 1.0 / 175.0, periodic: false, origin: 0.0 },
            crate::chart::AxisSpec { nodes: 8, spacing: 0.125, periodic: true, origin: 0.0 },
        ])
        .unwrap();
        let g = MetricField::flat(&chart);
        let profile = build_weights(&g, default_d0(&chart).unwrap(), 1e-300).unwrap();
        let h = 1.0 / 175.0;
        let mut checked = 0;
        for i in 0..profile.rho.data.len() {
            let d = profile.dist.data[i];
            if d > 0.0 && d <= 3.5 * h {
                let ratio = profile.rho.data[i] / d.powi(8);
                assert!(ratio < 1e-6, "ratio {ratio:e} at d={d}");
                checked += 1;
            }
        }
        assert!(checked >= 3);
    }

    #[test]
    fn phi_matches_square_near_boundary_and_plateaus() {
        let d0 = 0.1;
        assert!((phi_of_dist(0.05, d0) - 0.0025).abs() < 1e-15);
        assert!((phi_of_dist(0.3, d0) - (1.5 * d0).powi(2)).abs() < 1e-15);
        // bounded above and below on d >= d0
        for k in 0..100 {
            let d = d0 + k as f64 * 0.01;
            let p = phi_of_dist(d, d0);
            assert!(p >= d0 * d0 - 1e-15 && p <= (1.5 * d0).powi(2) + 1e-15);
        }
    }

    #[test]
    fn profile_c2_across_transitions_under_refinement() {
        // second differences of rho(d) stay bounded as the sample spacing
        // shrinks near d0 and 2 d0
        let d0 = 0.1;
        for &hh in &[1e-3, 1e-4, 1e-5] {
            for &center in &[d0, 2.0 * d0] {
                let f = |d: f64| rho_of_dist(d, d0, 1e-300).0;
                let second = (f(center + hh) - 2.0 * f(center) + f(center - hh)) / (hh * hh);
                assert!(second.abs() < 1e4, "second difference {second:e} at {center}");
            }
        }
    }

    #[test]
    fn periodic_chart_rejected() {
        let chart = uniform_chart(2, 16, 0.0, 1.0, true).unwrap();
        let g = MetricField::flat(&chart);
        assert!(matches!(build_weights(&g, 0.1, 1e-300), Err(WeightError::PeriodicChart)));
    }

    #[test]
    fn weighted_l2_of_unit_field_is_sqrt_volume() {
        let chart = uniform_chart(2, 17, 0.0, 1.0, false).unwrap();
        let g = MetricField::flat(&chart);
        let u = ScalarField::from_fn(&chart, |_| 1.0);
        let w = ScalarField::from_fn(&chart, |_| 1.0);
        let norm = weighted_l2_scalar(&u, &w, &g).unwrap();
        assert!((norm - 1.0).abs() < 1e-12);

        let zero = ScalarField::zeros(&chart);
        assert_eq!(weighted_l2_scalar(&zero, &w, &g).unwrap(), 0.0);
    }

    #[test]
    fn two_path_weighted_summation_agrees() {
        // || rho^{1/2} ||_{L2_{rho^{-1}}} equals the plain L2 norm of 1 on
        // the support
        let (g, profile) = setup();
        let chart = g.chart().clone();
        let u = ScalarField {
            chart: chart.clone(),
            data: profile.rho.data.iter().map(|r| r.sqrt()).collect(),
        };
        let lhs = l2_rho_inv_scalar(&u, &profile, &g).unwrap();
        // direct: sum over unclamped nodes of cellvol
        let cw = chart.cell_weights();
        let mut direct = 0.0;
        for i in 0..chart.n_nodes() {
            if !profile.clamped[i] {
                direct += cw[i];
            }
        }
        assert!((lhs - direct.sqrt()).abs() < 1e-12, "{lhs} vs {}", direct.sqrt());
    }

    #[test]
    fn support_violation_detected() {
        let (g, profile) = setup();
        // boundary nodes are clamped (dist = 0); a field supported there errors
        let mut u = ScalarField::zeros(g.chart());
        let idx = profile.clamped.iter().position(|&c| c).unwrap();
        u.data[idx] = 1.0;
        assert!(matches!(
            l2_rho_inv_scalar(&u, &profile, &g),
            Err(WeightError::SupportViolation { .. })
        ));
    }

    #[test]
    fn norm_report_trivial_and_homogeneous() {
        let (g, profile) = setup();
        let chart = g.chart().clone();
        let zero_s = ScalarField::zeros(&chart);
        let zero_t = SymTensorField::zeros(&chart);
        let rep = weighted_norm_report(
            &zero_s, 0.0, &zero_t, &zero_s, 0.0, &profile, &g, FdOrder::Four,
        )
        .unwrap();
        assert_eq!((rep.b0, rep.b2, rep.b4), (0.0, 0.0, 0.0));

        // tau alone: b0 = |tau|
        let rep = weighted_norm_report(
            &zero_s, 1.0, &zero_t, &zero_s, 0.0, &profile, &g, FdOrder::Four,
        )
        .unwrap();
        assert_eq!(rep.b0, 1.0);

        // homogeneity: scaling inputs scales the norms exactly
        let bump = ScalarField::from_fn(&chart, |x| {
            let r2 = (x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2);
            if r2 < 0.04 { (1.0 - r2 / 0.04).powi(3) } else { 0.0 }
        });
        let h = SymTensorField::from_fn(&chart, |x, out| {
            let r2 = (x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2);
            let b = if r2 < 0.09 { (1.0 - r2 / 0.09).powi(3) } else { 0.0 };
            out[0] = b;
            out[1] = 0.3 * b;
            out[2] = -0.5 * b;
        });
        let r1 = weighted_norm_report(&bump, 0.7, &h, &bump, 0.2, &profile, &g, FdOrder::Four)
            .unwrap();
        let bump3 = ScalarField { chart: chart.clone(), data: bump.data.iter().map(|v| 3.0 * v).collect() };
        let r3 = weighted_norm_report(
            &bump3,
            2.1,
            &h.scaled(3.0),
            &bump3,
            0.6,
            &profile,
            &g,
            FdOrder::Four,
        )
        .unwrap();
        assert!((r3.b0 - 3.0 * r1.b0).abs() < 1e-12 * r1.b0.max(1.0));
        assert!((r3.b2 - 3.0 * r1.b2).abs() < 1e-12 * r1.b2.max(1.0));
        assert!((r3.b4 - 3.0 * r1.b4).abs() < 1e-12 * r1.b4.max(1.0));
    }
}
