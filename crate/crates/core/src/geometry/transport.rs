//! Geodesic tracing and the second-order transport ODE satisfied by static
//! potentials along unit-speed geodesics:
//! `f'' = f (Ric(c', c') - R/(n-1)) - kappa/(n-1)`.
//!
//! The coefficient uses the general scalar-curvature form obtained by
//! retracing the equation `L_g^* f = kappa g`; for R = 1 it reduces to the
//! constant-coefficient special case.

use super::{christoffel_with, curvature_with, DiffOps, FdOrder};
use crate::error::FieldError;
use crate::field::{sym_index, sym_len, MetricField};

/// Result of integrating the transport ODE along a traced geodesic.
#[derive(Debug, Clone)]
pub struct TransportResult {
    /// Arc-length samples from the starting point.
    pub t: Vec<f64>,
    /// Potential values along the curve.
    pub f: Vec<f64>,
    /// Chart coordinates of the curve samples.
    pub points: Vec<Vec<f64>>,
    /// True when the geodesic left the chart before covering the requested
    /// length; the samples are then truncated.
    pub truncated: bool,
}

/// Multilinear interpolation of node-major data with `ncomp` components.
fn interpolate(
    chart: &crate::chart::ChartSpec,
    data: &[f64],
    ncomp: usize,
    x: &[f64],
    out: &mut [f64],
) -> bool {
    let n = chart.dim();
    let mut base = vec![0usize; n];
    let mut frac = vec![0.0; n];
    for a in 0..n {
        let ax = chart.axis(a);
        let u = (x[a] - ax.origin) / ax.spacing;
        if ax.periodic {
            let len = ax.nodes as f64;
            let wrapped = u.rem_euclid(len);
            base[a] = wrapped.floor() as usize % ax.nodes;
            frac[a] = wrapped - wrapped.floor();
        } else {
            if u < 0.0 || u > (ax.nodes - 1) as f64 {
                return false;
            }
            let i = (u.floor() as usize).min(ax.nodes - 2);
            base[a] = i;
            frac[a] = u - i as f64;
        }
    }
    out.fill(0.0);
    let corners = 1usize << n;
    let strides = chart.strides();
    for corner in 0..corners {
        let mut w = 1.0;
        let mut node = 0usize;
        for a in 0..n {
            let up = (corner >> a) & 1 == 1;
            let ax = chart.axis(a);
            let ia = if up { (base[a] + 1) % ax.nodes } else { base[a] };
            w *= if up { frac[a] } else { 1.0 - frac[a] };
            node += ia * strides[a];
        }
        if w == 0.0 {
            continue;
        }
        for c in 0..ncomp {
            out[c] += w * data[node * ncomp + c];
        }
    }
    true
}

/// Integrate the potential transport ODE along a numerically traced
/// unit-speed geodesic from `start` in direction `dir` (normalized
/// internally), for arc length `length`. `kappa` is the V-static constant.
///
/// Requires the metric to have (numerically) constant scalar curvature along
/// the traced curve for the transported values to solve the original system;
/// the ODE itself is integrated as stated regardless.
pub fn potential_transport_ode(
    g: &MetricField,
    kappa: f64,
    start: &[f64],
    f0: f64,
    df0: &[f64],
    dir: &[f64],
    length: f64,
    order: FdOrder,
) -> Result<TransportResult, FieldError> {
    let chart = g.chart().clone();
    let n = chart.dim();
    let m = sym_len(n);
    assert_eq!(start.len(), n);
    assert_eq!(dir.len(), n);
    assert_eq!(df0.len(), n);
    let ops = DiffOps::new(&chart, order);
    let gamma = christoffel_with(g, &ops)?;
    let curv = curvature_with(g, &ops)?;

    // interpolation tables
    let gamma_data = &gamma.data;
    let ricci = &curv.ricci.data;
    let scalar = &curv.scalar.data;
    let metric = g.data();

    let mut gbuf = vec![0.0; m];
    // normalize dir to unit speed at the start
    if !interpolate(&chart, metric, m, start, &mut gbuf) {
        return Err(FieldError::InvalidChart { reason: "start point outside chart".into() });
    }
    let mut speed2 = 0.0;
    for i in 0..n {
        for j in 0..n {
            speed2 += gbuf[sym_index(i, j, n)] * dir[i] * dir[j];
        }
    }
    let speed = speed2.sqrt();
    let v0: Vec<f64> = dir.iter().map(|d| d / speed).collect();

    // initial df/dt = df0(c'(0))
    let fdot0: f64 = df0.iter().zip(v0.iter()).map(|(a, b)| a * b).sum();

    // state: position (n), velocity (n), f, fdot
    let dim_state = 2 * n + 2;
    let mut state = vec![0.0; dim_state];
    state[..n].copy_from_slice(start);
    state[n..2 * n].copy_from_slice(&v0);
    state[2 * n] = f0;
    state[2 * n + 1] = fdot0;

    let step = chart.min_spacing() / 4.0;
    let n_steps = (length / step).ceil() as usize;
    let dt = length / n_steps as f64;

    let mut t = vec![0.0];
    let mut f = vec![f0];
    let mut points = vec![start.to_vec()];
    let mut truncated = false;

    let mut gam = vec![0.0; n * m];
    let mut ric = vec![0.0; m];
    let mut rr = [0.0];

    let deriv = |state: &[f64],
                 gam: &mut Vec<f64>,
                 ric: &mut Vec<f64>,
                 rr: &mut [f64; 1],
                 out: &mut Vec<f64>|
     -> bool {
        let pos = &state[..n];
        let vel = &state[n..2 * n];
        if !interpolate(&chart, gamma_data, n * m, pos, gam)
            || !interpolate(&chart, ricci, m, pos, ric)
            || !interpolate(&chart, scalar, 1, pos, &mut rr[..])
        {
            return false;
        }
        out.resize(2 * n + 2, 0.0);
        for a in 0..n {
            out[a] = vel[a];
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    acc -= gam[a * m + sym_index(i, j, n)] * vel[i] * vel[j];
                }
            }
            out[n + a] = acc;
        }
        let mut ric_vv = 0.0;
        for i in 0..n {
            for j in 0..n {
                ric_vv += ric[sym_index(i, j, n)] * vel[i] * vel[j];
            }
        }
        let fv = state[2 * n];
        out[2 * n] = state[2 * n + 1];
        out[2 * n + 1] = fv * (ric_vv - rr[0] / (n as f64 - 1.0)) - kappa / (n as f64 - 1.0);
        true
    };

    let mut k1 = Vec::new();
    let mut k2 = Vec::new();
    let mut k3 = Vec::new();
    let mut k4 = Vec::new();
    let mut tmp = vec![0.0; dim_state];
    'outer: for s in 0..n_steps {
        let ok = deriv(&state, &mut gam, &mut ric, &mut rr, &mut k1);
        if !ok {
            truncated = true;
            break 'outer;
        }
        for i in 0..dim_state {
            tmp[i] = state[i] + 0.5 * dt * k1[i];
        }
        if !deriv(&tmp, &mut gam, &mut ric, &mut rr, &mut k2) {
            truncated = true;
            break 'outer;
        }
        for i in 0..dim_state {
            tmp[i] = state[i] + 0.5 * dt * k2[i];
        }
        if !deriv(&tmp, &mut gam, &mut ric, &mut rr, &mut k3) {
            truncated = true;
            break 'outer;
        }
        for i in 0..dim_state {
            tmp[i] = state[i] + dt * k3[i];
        }
        if !deriv(&tmp, &mut gam, &mut ric, &mut rr, &mut k4) {
            truncated = true;
            break 'outer;
        }
        for i in 0..dim_state {
            state[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        t.push((s + 1) as f64 * dt);
        f.push(state[2 * n]);
        points.push(state[..n].to_vec());
    }

    Ok(TransportResult { t, f, points, truncated })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{uniform_chart, AxisSpec, ChartSpec};

    #[test]
    fn flat_constant_solution() {
        let chart = uniform_chart(2, 16, 0.0, 1.0, false).unwrap();
        let g = MetricField::flat(&chart);
        let res = potential_transport_ode(
            &g,
            0.0,
            &[0.1, 0.5],
            1.0,
            &[0.0, 0.0],
            &[1.0, 0.0],
            0.7,
            FdOrder::Four,
        )
        .unwrap();
        assert!(!res.truncated);
        for v in &res.f {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn flat_inhomogeneous_quadratic_solution() {
        // kappa = -2(n-1)c gives f(t) = c t^2 + f0 along a straight line
        let chart = uniform_chart(2, 16, 0.0, 2.0, false).unwrap();
        let g = MetricField::flat(&chart);
        let c = 0.3;
        let kappa = -2.0 * (2.0 - 1.0) * c;
        let res = potential_transport_ode(
            &g,
            kappa,
            &[0.1, 1.0],
            0.25,
            &[0.0, 0.0],
            &[1.0, 0.0],
            1.5,
            FdOrder::Four,
        )
        .unwrap();
        assert!(!res.truncated);
        for (t, f) in res.t.iter().zip(res.f.iter()) {
            let want = c * t * t + 0.25;
            assert!((f - want).abs() < 1e-10, "t={t}: {f} vs {want}");
        }
    }

    #[test]
    fn product_chart_sine_potential() {
        // dt^2 + g_{S^2}: along the t-direction f'' = -f, so f = sin(t)
        let pi = std::f64::consts::PI;
        let chart = ChartSpec::new(vec![
            AxisSpec { nodes: 32, spacing: 2.0 * pi / 32.0, periodic: true, origin: 0.0 },
            AxisSpec { nodes: 32, spacing: 0.5 * pi / 31.0, periodic: false, origin: 0.25 * pi },
            AxisSpec { nodes: 16, spacing: 2.0 * pi / 16.0, periodic: true, origin: 0.0 },
        ])
        .unwrap();
        let g = MetricField::from_fn(&chart, |x, out| {
            out.fill(0.0);
            out[0] = 1.0;
            out[3] = 1.0;
            out[5] = x[1].sin().powi(2);
        })
        .unwrap();
        let res = potential_transport_ode(
            &g,
            0.0,
            &[0.0, 0.5 * pi, 0.0],
            0.0,
            &[1.0, 0.0, 0.0],
            &[1.0, 0.0, 0.0],
            2.0,
            FdOrder::Four,
        )
        .unwrap();
        assert!(!res.truncated);
        for (t, f) in res.t.iter().zip(res.f.iter()) {
            assert!((f - t.sin()).abs() < 1e-5, "t={t}: {f} vs {}", t.sin());
        }
    }

    #[test]
    fn geodesic_exit_sets_truncation_flag() {
        let chart = uniform_chart(2, 12, 0.0, 1.0, false).unwrap();
        let g = MetricField::flat(&chart);
        let res = potential_transport_ode(
            &g,
            0.0,
            &[0.9, 0.5],
            1.0,
            &[0.0, 0.0],
            &[1.0, 0.0],
            5.0,
            FdOrder::Four,
        )
        .unwrap();
        assert!(res.truncated);
        assert!(res.f.len() < 100);
    }
}
