//! Model charts and metrics used by the kernel catalogue, the solver tests,
//! and the CLI fixtures.

use crate::chart::{AxisSpec, ChartSpec};
use crate::field::{sym_index, MetricField, ScalarField};

/// Smooth compactly supported bump: `exp(1 - 1/(1 - r^2))` for `r < 1`,
/// zero outside, normalized to 1 at the center.
#[inline]
pub fn bump(r: f64) -> f64 {
    if r.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - r * r)).exp()
    }
}

/// Flat metric on a box chart `[0, width]^n`.
pub fn flat_box(n: usize, nodes: usize, width: f64) -> MetricField {
    let chart = crate::chart::uniform_chart(n, nodes, 0.0, width, false).unwrap();
    MetricField::flat(&chart)
}

/// Flat metric on a torus `[0, length)^n`.
pub fn flat_torus(n: usize, nodes: usize, length: f64) -> MetricField {
    let chart = crate::chart::uniform_chart(n, nodes, 0.0, length, true).unwrap();
    MetricField::flat(&chart)
}

/// `delta + amplitude * bump * M` with a fixed symmetric direction `M`;
/// the bump is centered in the chart with radius `radius_frac` of the
/// smallest half-extent.
pub fn bump_metric(chart: &ChartSpec, amplitude: f64, radius_frac: f64) -> MetricField {
    let n = chart.dim();
    let (center, radius) = chart_center_radius(chart, radius_frac);
    MetricField::from_fn(chart, |x, out| {
        let mut r2 = 0.0;
        for a in 0..n {
            r2 += (x[a] - center[a]).powi(2);
        }
        let b = amplitude * bump(r2.sqrt() / radius);
        for i in 0..n {
            for j in i..n {
                let dir = match (i, j) {
                    (0, 0) => 1.0,
                    (1, 1) => -0.5,
                    (0, 1) => 0.3,
                    (2, 2) => 0.25,
                    (1, 2) => -0.2,
                    _ => 0.1,
                };
                out[sym_index(i, j, n)] = if i == j { 1.0 + b * dir } else { b * dir };
            }
        }
    })
    .expect("bump amplitude keeps the metric positive definite")
}

/// Interior scalar bump with unit peak (deformation targets).
pub fn bump_scalar(chart: &ChartSpec, radius_frac: f64) -> ScalarField {
    let n = chart.dim();
    let (center, radius) = chart_center_radius(chart, radius_frac);
    ScalarField::from_fn(chart, |x| {
        let mut r2 = 0.0;
        for a in 0..n {
            r2 += (x[a] - center[a]).powi(2);
        }
        bump(r2.sqrt() / radius)
    })
}

fn chart_center_radius(chart: &ChartSpec, radius_frac: f64) -> (Vec<f64>, f64) {
    let n = chart.dim();
    let mut center = vec![0.0; n];
    let mut half = f64::INFINITY;
    for a in 0..n {
        let ax = chart.axis(a);
        let extent = if ax.periodic {
            ax.nodes as f64 * ax.spacing
        } else {
            (ax.nodes - 1) as f64 * ax.spacing
        };
        center[a] = ax.origin + 0.5 * extent;
        half = half.min(0.5 * extent);
    }
    (center, half * radius_frac)
}

/// Polar-cap chart of the unit round sphere `S^n` for `n` in {2, 3}:
/// colatitudes restricted to `[theta_lo, theta_hi]` (box axes), the last
/// angle periodic.
pub fn sphere_chart(n: usize, nodes: usize, theta_lo: f64, theta_hi: f64) -> ChartSpec {
    let pi = std::f64::consts::PI;
    let box_axis = |lo: f64, hi: f64| AxisSpec {
        nodes,
        spacing: (hi - lo) / (nodes - 1) as f64,
        periodic: false,
        origin: lo,
    };
    let periodic_axis = AxisSpec {
        nodes,
        spacing: 2.0 * pi / nodes as f64,
        periodic: true,
        origin: 0.0,
    };
    let axes = match n {
        2 => vec![box_axis(theta_lo, theta_hi), periodic_axis],
        3 => vec![
            box_axis(theta_lo, theta_hi),
            box_axis(0.3 * pi, 0.7 * pi),
            periodic_axis,
        ],
        _ => panic!("sphere chart implemented for n in {{2, 3}}"),
    };
    ChartSpec::new(axes).unwrap()
}

/// Unit round metric on the sphere chart.
pub fn sphere_metric(chart: &ChartSpec) -> MetricField {
    let n = chart.dim();
    MetricField::from_fn(chart, |x, out| {
        out.fill(0.0);
        match n {
            2 => {
                out[sym_index(0, 0, 2)] = 1.0;
                out[sym_index(1, 1, 2)] = x[0].sin().powi(2);
            }
            3 => {
                out[sym_index(0, 0, 3)] = 1.0;
                out[sym_index(1, 1, 3)] = x[0].sin().powi(2);
                out[sym_index(2, 2, 3)] = x[0].sin().powi(2) * x[1].sin().powi(2);
            }
            _ => unreachable!(),
        }
    })
    .unwrap()
}

/// Ambient-coordinate restrictions spanning the sphere's static kernel:
/// the `n+1` coordinate functions of `S^n` in `R^{n+1}`.
pub fn sphere_coordinate_functions(chart: &ChartSpec) -> Vec<ScalarField> {
    let n = chart.dim();
    let mut out = Vec::with_capacity(n + 1);
    match n {
        2 => {
            out.push(ScalarField::from_fn(chart, |x| x[0].cos()));
            out.push(ScalarField::from_fn(chart, |x| x[0].sin() * x[1].cos()));
            out.push(ScalarField::from_fn(chart, |x| x[0].sin() * x[1].sin()));
        }
        3 => {
            out.push(ScalarField::from_fn(chart, |x| x[0].cos()));
            out.push(ScalarField::from_fn(chart, |x| x[0].sin() * x[1].cos()));
            out.push(ScalarField::from_fn(chart, |x| {
                x[0].sin() * x[1].sin() * x[2].cos()
            }));
            out.push(ScalarField::from_fn(chart, |x| {
                x[0].sin() * x[1].sin() * x[2].sin()
            }));
        }
        _ => panic!("sphere kernel functions implemented for n in {{2, 3}}"),
    }
    out
}

/// The product `S^1 x S^2` with `g = dt^2 + g_{S^2}` (n = 3, scalar
/// curvature 2): `t` periodic, colatitude boxed away from the poles.
pub fn product_s1_s2(nodes: usize) -> MetricField {
    let pi = std::f64::consts::PI;
    let chart = ChartSpec::new(vec![
        AxisSpec { nodes, spacing: 2.0 * pi / nodes as f64, periodic: true, origin: 0.0 },
        AxisSpec {
            nodes,
            spacing: 0.7 * pi / (nodes - 1) as f64,
            periodic: false,
            origin: 0.15 * pi,
        },
        AxisSpec { nodes, spacing: 2.0 * pi / nodes as f64, periodic: true, origin: 0.0 },
    ])
    .unwrap();
    MetricField::from_fn(&chart, |x, out| {
        out.fill(0.0);
        out[sym_index(0, 0, 3)] = 1.0;
        out[sym_index(1, 1, 3)] = 1.0;
        out[sym_index(2, 2, 3)] = x[1].sin().powi(2);
    })
    .unwrap()
}

/// Hyperbolic slab scaled to `R = -1`: `g = n(n-1) delta / z^2` on a box
/// with `z` in `[1, 2]` as the last coordinate. Einstein with
/// `Ric = -(1/n) g`... scaled so the scalar curvature is exactly -1.
pub fn hyperbolic_slab(n: usize, nodes: usize) -> MetricField {
    let mut axes = vec![
        AxisSpec {
            nodes,
            spacing: 1.0 / (nodes - 1) as f64,
            periodic: false,
            origin: 0.0,
        };
        n
    ];
    axes[n - 1].origin = 1.0;
    let chart = ChartSpec::new(axes).unwrap();
    let scale = (n * (n - 1)) as f64;
    MetricField::from_fn(&chart, |x, out| {
        let z = x[n - 1];
        let c = scale / (z * z);
        for i in 0..n {
            for j in i..n {
                out[sym_index(i, j, n)] = if i == j { c } else { 0.0 };
            }
        }
    })
    .unwrap()
}

/// A gluing cap for the connected-sum pipeline: flat inside the ball
/// `|x - c| <= 2 R` around the chart center (where the neck attaches), with
/// a symmetric bump in a surrounding collar so the chart is not V-static.
pub fn glue_cap(n: usize, nodes: usize, big_r: f64, amplitude: f64) -> MetricField {
    let chart = crate::chart::uniform_chart(n, nodes, -1.0, 1.0, false).unwrap();
    let r_in = 2.6 * big_r;
    let r_out = 0.72;
    let mid = 0.5 * (r_in + r_out);
    let halfwidth = 0.5 * (r_out - r_in);
    MetricField::from_fn(&chart, |x, out| {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let b = amplitude * bump((r - mid) / halfwidth);
        for i in 0..n {
            for j in i..n {
                let dir = match (i, j) {
                    (0, 0) => 1.0,
                    (1, 1) => -0.5,
                    (0, 1) => 0.3,
                    (2, 2) => 0.25,
                    (1, 2) => -0.2,
                    _ => 0.1,
                };
                out[sym_index(i, j, n)] = if i == j { 1.0 + b * dir } else { b * dir };
            }
        }
    })
    .expect("cap bump keeps the metric positive definite")
}

/// Weight profile for an annulus: the distance function is the minimum of
/// the box-boundary distance and the distance to the sphere `|x - c| =
/// hole_radius`, so the weight vanishes on the inner hole (where the neck
/// replaces the material) as well as at the outer boundary.
pub fn annulus_profile(
    g: &MetricField,
    hole_radius: f64,
    d0: f64,
    rho_floor: f64,
) -> crate::weights::WeightProfile {
    let base = crate::weights::build_weights(g, d0, rho_floor)
        .expect("annulus profile needs a box chart");
    let chart = g.chart();
    let n = chart.dim();
    let mut center = vec![0.0; n];
    for a in 0..n {
        let ax = chart.axis(a);
        center[a] = ax.origin + 0.5 * (ax.nodes - 1) as f64 * ax.spacing;
    }
    let mut profile = base;
    let mut x = vec![0.0; n];
    for node in 0..chart.n_nodes() {
        chart.coords(node, &mut x);
        let r = x
            .iter()
            .zip(center.iter())
            .map(|(v, c)| (v - c) * (v - c))
            .sum::<f64>()
            .sqrt();
        let d_inner = r - hole_radius;
        let d = profile.dist.data[node].min(d_inner);
        profile.dist.data[node] = d;
        let (rho, clamped) = if d <= 0.0 {
            (0.0, true)
        } else {
            let chi = crate::weights::quintic_step((2.0 * d0 - d) / d0);
            let v = (-chi / d).exp();
            if v < rho_floor { (0.0, true) } else { (v, false) }
        };
        profile.rho.data[node] = rho;
        profile.clamped[node] = clamped;
        // phi follows the same distance
        profile.phi.data[node] = {
            let psi = if d <= 0.0 {
                0.0
            } else if d <= d0 {
                d
            } else if d >= 2.0 * d0 {
                1.5 * d0
            } else {
                let sfrac = (d - d0) / d0;
                let istep = sfrac.powi(4) * (2.5 + sfrac * (-3.0 + sfrac));
                d0 + d0 * (sfrac - istep)
            };
            psi * psi
        };
    }
    profile.any_clamped = profile.clamped.iter().any(|&c| c);
    profile
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{curvature, FdOrder};

    #[test]
    fn hyperbolic_slab_has_unit_negative_scalar_curvature() {
        let g = hyperbolic_slab(3, 16);
        let curv = curvature(&g, FdOrder::Four).unwrap();
        let max_err = curv
            .scalar
            .data
            .iter()
            .map(|r| (r + 1.0).abs())
            .fold(0.0_f64, f64::max);
        assert!(max_err < 5e-3, "max err {max_err:e}");
    }

    #[test]
    fn bump_metric_reduces_to_flat_outside_support() {
        let chart = crate::chart::uniform_chart(2, 17, 0.0, 1.0, false).unwrap();
        let g = bump_metric(&chart, 0.2, 0.4);
        // corner node is outside the bump
        assert_eq!(g.at(0), &[1.0, 0.0, 1.0]);
        // center node is perturbed
        let center = chart.n_nodes() / 2;
        assert!((g.at(center)[0] - 1.2).abs() < 1e-12);
    }

    #[test]
    fn sphere_s3_scalar_curvature() {
        let chart = sphere_chart(3, 20, 0.3 * std::f64::consts::PI, 0.7 * std::f64::consts::PI);
        let g = sphere_metric(&chart);
        let curv = curvature(&g, FdOrder::Four).unwrap();
        let max_err = curv
            .scalar
            .data
            .iter()
            .map(|r| (r - 6.0).abs())
            .fold(0.0_f64, f64::max);
        assert!(max_err < 2e-3, "max err {max_err:e}");
    }
}
