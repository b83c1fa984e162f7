//! Convex volume comparison: surface integrals, quermassintegrals, the
//! Minkowski inequality slacks, the closed-form V-static volume bounds, and
//! the flat-ball potential checks.

use crate::error::ConvexError;
use crate::neck::unit_sphere_area;
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub enum ConvexBody {
    RoundBall { n: usize, radius: f64 },
    Ellipsoid { semi_axes: Vec<f64> },
    /// Closed oriented triangle mesh in R^3.
    Mesh { vertices: Vec<[f64; 3]>, faces: Vec<[usize; 3]> },
}

impl ConvexBody {
    pub fn dim(&self) -> usize {
        match self {
            ConvexBody::RoundBall { n, .. } => *n,
            ConvexBody::Ellipsoid { semi_axes } => semi_axes.len(),
            ConvexBody::Mesh { .. } => 3,
        }
    }
}

/// The four surface quantities of a convex body.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct SurfaceIntegrals {
    pub area: f64,
    pub mean_curv_integral: f64,
    pub intrinsic_scalar_integral: f64,
    pub enclosed_volume: f64,
}

/// Gauss-Legendre nodes and weights on [-1, 1].
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    // Newton iteration on Legendre polynomials
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0, x);
        for k in 2..=n {
            let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        xs[i] = x;
        ws[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (xs, ws)
}

/// Pointwise curvature data of the ellipsoid level set at a surface point.
fn ellipsoid_point(semi: &[f64], u: &[f64]) -> (f64, f64) {
    // returns (H, R_gamma) at x = diag(semi) u for |u| = 1
    let n = semi.len();
    let x: Vec<f64> = semi.iter().zip(u.iter()).map(|(a, v)| a * v).collect();
    let grad: Vec<f64> = x
        .iter()
        .zip(semi.iter())
        .map(|(xi, a)| 2.0 * xi / (a * a))
        .collect();
    let gnorm = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nu: Vec<f64> = grad.iter().map(|v| v / gnorm).collect();
    // M = P Hess(F) P / |grad F| with Hess = 2 diag(1/a^2)
    let mut mfull = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        mfull[(i, i)] = 2.0 / (semi[i] * semi[i]) / gnorm;
    }
    let nu_v = DVector::from_column_slice(&nu);
    let p = DMatrix::identity(n, n) - &nu_v * nu_v.transpose();
    let m = &p * mfull * &p;
    let h = m.trace();
    let m2 = (&m * &m).trace();
    let r_gamma = h * h - m2;
    (h, r_gamma)
}

/// Surface measure factor of the map `angles -> diag(semi) u(angles)`.
fn sphere_param(angles: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    // u in S^{n-1} from n-1 angles (last periodic), plus partials du/dangle
    let k = angles.len();
    let n = k + 1;
    let mut u = vec![0.0; n];
    let mut du = vec![vec![0.0; n]; k];
    // u_i = cos(t_i) prod_{j<i} sin(t_j), u_{n-1} = prod sin
    for i in 0..n {
        let mut v = 1.0;
        for j in 0..i.min(k) {
            v *= angles[j].sin();
        }
        if i < k {
            v *= angles[i].cos();
        }
        u[i] = v;
        for (a, dua) in du.iter_mut().enumerate() {
            // derivative wrt angle a
            if a > i || (a == i && i == k) {
                dua[i] = 0.0;
                continue;
            }
            let mut d = 1.0;
            for j in 0..i.min(k) {
                d *= if j == a { angles[j].cos() } else { angles[j].sin() };
            }
            if i < k {
                d *= if a == i { -angles[i].sin() } else { angles[i].cos() };
            }
            dua[i] = d;
        }
    }
    (u, du)
}

fn ellipsoid_integrals_quadrature(semi: &[f64], n_theta: usize, n_phi: usize) -> (f64, f64, f64) {
    let n = semi.len();
    let k = n - 1;
    let (gl_x, gl_w) = gauss_legendre(n_theta);
    // product rule: angles t_1..t_{k-1} in [0, pi] (Gauss-Legendre mapped),
    // t_k in [0, 2 pi) (trapezoid)
    let mut area = 0.0;
    let mut int_h = 0.0;
    let mut int_r = 0.0;
    let mut idx = vec![0usize; k];
    let total: usize = n_theta.pow((k - 1) as u32) * n_phi;
    for flat in 0..total {
        let mut rem = flat;
        for slot in idx.iter_mut().take(k - 1) {
            *slot = rem % n_theta;
            rem /= n_theta;
        }
        let phi_idx = rem;
        let mut angles = vec![0.0; k];
        let mut weight = 1.0;
        for a in 0..k - 1 {
            angles[a] = 0.5 * std::f64::consts::PI * (gl_x[idx[a]] + 1.0);
            weight *= 0.5 * std::f64::consts::PI * gl_w[idx[a]];
        }
        angles[k - 1] = 2.0 * std::f64::consts::PI * phi_idx as f64 / n_phi as f64;
        weight *= 2.0 * std::f64::consts::PI / n_phi as f64;
        let (u, du) = sphere_param(&angles);
        // Jacobian of x = diag(semi) u
        let mut jt_j = DMatrix::<f64>::zeros(k, k);
        for a in 0..k {
            for b in 0..k {
                let mut sdot = 0.0;
                for i in 0..n {
                    sdot += semi[i] * du[a][i] * semi[i] * du[b][i];
                }
                jt_j[(a, b)] = sdot;
            }
        }
        let da = jt_j.determinant().max(0.0).sqrt() * weight;
        let (h, r) = ellipsoid_point(semi, &u);
        area += da;
        int_h += h * da;
        int_r += r * da;
    }
    (area, int_h, int_r)
}

/// Independent adaptive-Simpson path for the n = 3 ellipsoid area
/// (cross-check oracle for the fixed-order quadrature).
pub fn ellipsoid_area_adaptive(semi: &[f64; 3], tol: f64) -> f64 {
    let inner = |theta: f64| -> f64 {
        // trapezoid in phi (periodic, spectrally accurate)
        let m = 512;
        let mut s = 0.0;
        for j in 0..m {
            let phi = 2.0 * std::f64::consts::PI * j as f64 / m as f64;
            let u = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
            let du_t = [theta.cos() * phi.cos(), theta.cos() * phi.sin(), -theta.sin()];
            let du_p = [-theta.sin() * phi.sin(), theta.sin() * phi.cos(), 0.0];
            let _ = u;
            let a = [semi[0] * du_t[0], semi[1] * du_t[1], semi[2] * du_t[2]];
            let b = [semi[0] * du_p[0], semi[1] * du_p[1], semi[2] * du_p[2]];
            let cross = [
                a[1] * b[2] - a[2] * b[1],
                a[2] * b[0] - a[0] * b[2],
                a[0] * b[1] - a[1] * b[0],
            ];
            s += (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
        }
        s * 2.0 * std::f64::consts::PI / m as f64
    };
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, tol: f64, depth: usize) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() < 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            simpson(f, a, m, fa, flm, fm, 0.5 * tol, depth - 1)
                + simpson(f, m, b, fm, frm, fb, 0.5 * tol, depth - 1)
        }
    }
    let a = 0.0;
    let b = std::f64::consts::PI;
    let fa = inner(a);
    let fm = inner(0.5 * (a + b));
    let fb = inner(b);
    simpson(&inner, a, b, fa, fm, fb, tol, 20)
}

fn mesh_check_convex(vertices: &[[f64; 3]], faces: &[[usize; 3]]) -> Result<(), ConvexError> {
    if faces.len() < 4 {
        return Err(ConvexError::NonConvexMesh { reason: "fewer than 4 faces".into() });
    }
    let scale = vertices
        .iter()
        .map(|v| v.iter().map(|c| c.abs()).fold(0.0_f64, f64::max))
        .fold(0.0_f64, f64::max);
    for (fi, f) in faces.iter().enumerate() {
        let (a, b, c) = (vertices[f[0]], vertices[f[1]], vertices[f[2]]);
        let ab = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        let ac = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
        let nrm = [
            ab[1] * ac[2] - ab[2] * ac[1],
            ab[2] * ac[0] - ab[0] * ac[2],
            ab[0] * ac[1] - ab[1] * ac[0],
        ];
        let len = (nrm[0] * nrm[0] + nrm[1] * nrm[1] + nrm[2] * nrm[2]).sqrt();
        if len == 0.0 {
            return Err(ConvexError::NonConvexMesh { reason: format!("degenerate face {fi}") });
        }
        for (vi, v) in vertices.iter().enumerate() {
            if f.contains(&vi) {
                continue;
            }
            let d = (v[0] - a[0]) * nrm[0] + (v[1] - a[1]) * nrm[1] + (v[2] - a[2]) * nrm[2];
            if d / len > -1e-10 * scale {
                return Err(ConvexError::NonConvexMesh {
                    reason: format!("vertex {vi} not strictly inside face {fi} plane"),
                });
            }
        }
    }
    Ok(())
}

fn mesh_integrals(
    vertices: &[[f64; 3]],
    faces: &[[usize; 3]],
) -> Result<SurfaceIntegrals, ConvexError> {
    mesh_check_convex(vertices, faces)?;
    mesh_integrals_unchecked(vertices, faces)
}

/// Discrete integrals without the strict-convexity gate (polytopes with
/// flat faces are rejected by the gate but still have exact Steiner-formula
/// quermassintegrals; used as an oracle in tests).
pub(crate) fn mesh_integrals_unchecked(
    vertices: &[[f64; 3]],
    faces: &[[usize; 3]],
) -> Result<SurfaceIntegrals, ConvexError> {
    let mut area = 0.0;
    let mut volume = 0.0;
    // face normals for the dihedral sum
    let mut normals = Vec::with_capacity(faces.len());
    for f in faces {
        let (a, b, c) = (vertices[f[0]], vertices[f[1]], vertices[f[2]]);
        let ab = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        let ac = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
        let nrm = [
            ab[1] * ac[2] - ab[2] * ac[1],
            ab[2] * ac[0] - ab[0] * ac[2],
            ab[0] * ac[1] - ab[1] * ac[0],
        ];
        let len = (nrm[0] * nrm[0] + nrm[1] * nrm[1] + nrm[2] * nrm[2]).sqrt();
        area += 0.5 * len;
        volume += (a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
            + a[2] * (b[0] * c[1] - b[1] * c[0]))
            / 6.0;
        normals.push([nrm[0] / len, nrm[1] / len, nrm[2] / len]);
    }
    if volume <= 0.0 {
        return Err(ConvexError::NonConvexMesh { reason: "faces not outward oriented".into() });
    }
    // total mean curvature: sum over edges of length * exterior dihedral
    use std::collections::HashMap;
    let mut edge_faces: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (fi, f) in faces.iter().enumerate() {
        for e in 0..3 {
            let (p, q) = (f[e], f[(e + 1) % 3]);
            let key = (p.min(q), p.max(q));
            edge_faces.entry(key).or_default().push(fi);
        }
    }
    let mut int_h = 0.0;
    for (&(p, q), fs) in edge_faces.iter() {
        if fs.len() != 2 {
            return Err(ConvexError::NonConvexMesh {
                reason: format!("edge ({p},{q}) on {} faces; mesh not closed", fs.len()),
            });
        }
        let (n1, n2) = (normals[fs[0]], normals[fs[1]]);
        let dot = (n1[0] * n2[0] + n1[1] * n2[1] + n1[2] * n2[2]).clamp(-1.0, 1.0);
        let angle = dot.acos();
        let e = [
            vertices[q][0] - vertices[p][0],
            vertices[q][1] - vertices[p][1],
            vertices[q][2] - vertices[p][2],
        ];
        let elen = (e[0] * e[0] + e[1] * e[1] + e[2] * e[2]).sqrt();
        int_h += elen * angle;
    }
    // intrinsic scalar curvature by angle defects (Gauss-Bonnet route)
    let mut angle_sums = vec![0.0; vertices.len()];
    for f in faces {
        for e in 0..3 {
            let v = vertices[f[e]];
            let a = vertices[f[(e + 1) % 3]];
            let b = vertices[f[(e + 2) % 3]];
            let va = [a[0] - v[0], a[1] - v[1], a[2] - v[2]];
            let vb = [b[0] - v[0], b[1] - v[1], b[2] - v[2]];
            let na = (va[0] * va[0] + va[1] * va[1] + va[2] * va[2]).sqrt();
            let nb = (vb[0] * vb[0] + vb[1] * vb[1] + vb[2] * vb[2]).sqrt();
            let cosang =
                ((va[0] * vb[0] + va[1] * vb[1] + va[2] * vb[2]) / (na * nb)).clamp(-1.0, 1.0);
            angle_sums[f[e]] += cosang.acos();
        }
    }
    let int_r: f64 = angle_sums
        .iter()
        .map(|&s| 2.0 * (2.0 * std::f64::consts::PI - s))
        .sum();
    Ok(SurfaceIntegrals {
        area,
        mean_curv_integral: int_h,
        intrinsic_scalar_integral: int_r,
        enclosed_volume: volume,
    })
}

/// Surface integrals of a convex body: closed forms for balls, fixed-order
/// quadrature for ellipsoids, discrete curvature sums for meshes.
pub fn surface_integrals(body: &ConvexBody) -> Result<SurfaceIntegrals, ConvexError> {
    match body {
        ConvexBody::RoundBall { n, radius } => {
            let n = *n;
            if n < 3 {
                return Err(ConvexError::UnsupportedDim {
                    n,
                    reason: "volume comparison needs n >= 3".into(),
                });
            }
            let r = *radius;
            if !(r > 0.0) {
                return Err(ConvexError::InvalidBody { reason: "radius must be positive".into() });
            }
            let omega = unit_sphere_area(n);
            let nf = n as f64;
            Ok(SurfaceIntegrals {
                area: omega * r.powi(n as i32 - 1),
                mean_curv_integral: (nf - 1.0) / r * omega * r.powi(n as i32 - 1),
                intrinsic_scalar_integral: (nf - 1.0) * (nf - 2.0) / (r * r)
                    * omega
                    * r.powi(n as i32 - 1),
                enclosed_volume: omega * r.powi(n as i32) / nf,
            })
        }
        ConvexBody::Ellipsoid { semi_axes } => {
            let n = semi_axes.len();
            if n < 3 {
                return Err(ConvexError::UnsupportedDim {
                    n,
                    reason: "volume comparison needs n >= 3".into(),
                });
            }
            if semi_axes.iter().any(|&a| !(a > 0.0)) {
                return Err(ConvexError::InvalidBody {
                    reason: "semi-axes must be positive".into(),
                });
            }
            let (n_theta, n_phi) = if n == 3 { (128, 256) } else { (48, 96) };
            let (area, int_h, int_r) = ellipsoid_integrals_quadrature(semi_axes, n_theta, n_phi);
            let omega = unit_sphere_area(n);
            let vol = omega / n as f64 * semi_axes.iter().product::<f64>();
            Ok(SurfaceIntegrals {
                area,
                mean_curv_integral: int_h,
                intrinsic_scalar_integral: int_r,
                enclosed_volume: vol,
            })
        }
        ConvexBody::Mesh { vertices, faces } => mesh_integrals(vertices, faces),
    }
}

/// Quermassintegrals `(W0, W1, W2, W3)`.
pub fn quermassintegrals(body: &ConvexBody) -> Result<(f64, f64, f64, f64), ConvexError> {
    let n = body.dim();
    if n < 3 {
        return Err(ConvexError::UnsupportedDim { n, reason: "W3 undefined below n = 3".into() });
    }
    let ints = surface_integrals(body)?;
    let nf = n as f64;
    Ok((
        ints.enclosed_volume,
        ints.area / nf,
        ints.mean_curv_integral / (nf * (nf - 1.0)),
        ints.intrinsic_scalar_integral / (nf * (nf - 1.0) * (nf - 2.0)),
    ))
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct MinkowskiReport {
    pub w: (f64, f64, f64, f64),
    /// `W1^2 - W0 W2`
    pub slack1: f64,
    /// `W2^2 - W1 W3`
    pub slack2: f64,
    /// Slack of the scalar-curvature bound
    /// `(n-1)(n-2)|Sigma|^3 / (n^2 V^2) - int R_gamma`.
    pub curvature_bound_slack: f64,
}

/// Both Minkowski inequality slacks and the derived curvature bound.
pub fn minkowski_check(body: &ConvexBody) -> Result<MinkowskiReport, ConvexError> {
    let n = body.dim() as f64;
    let ints = surface_integrals(body)?;
    let (w0, w1, w2, w3) = quermassintegrals(body)?;
    let slack1 = w1 * w1 - w0 * w2;
    let slack2 = w2 * w2 - w1 * w3;
    let curvature_bound_slack = (n - 1.0) * (n - 2.0) * ints.area.powi(3)
        / (n * n * ints.enclosed_volume * ints.enclosed_volume)
        - ints.intrinsic_scalar_integral;
    Ok(MinkowskiReport { w: (w0, w1, w2, w3), slack1, slack2, curvature_bound_slack })
}

/// The closed-form V-static volume lower bounds: part (b) for any `n >= 3`
/// and part (c) for `n = 3`. Requires `int R_gamma > 0`.
pub fn vstatic_volume_bound(
    integrals: &SurfaceIntegrals,
    n: usize,
) -> Result<(f64, Option<f64>), ConvexError> {
    if integrals.intrinsic_scalar_integral <= 0.0 {
        return Err(ConvexError::NonPositiveCurvatureIntegral {
            value: integrals.intrinsic_scalar_integral,
        });
    }
    let nf = n as f64;
    let bound_b = ((nf - 2.0) * (nf - 1.0)).sqrt() / nf
        * integrals.intrinsic_scalar_integral.powf(-0.5)
        * integrals.area.powf(1.5);
    let bound_c = if n == 3 {
        Some(integrals.area.powf(1.5) / (6.0 * std::f64::consts::PI.sqrt()))
    } else {
        None
    };
    Ok((bound_b, bound_c))
}

/// Closed-form flat-ball potential `f(x) = (r^2 - |x|^2) / (2(n-1))` with
/// its node-wise and boundary checks.
#[derive(Debug, Clone, serde::Serialize)]
pub struct FlatBallReport {
    pub n: usize,
    pub radius: f64,
    /// Max node residual of `L_g^* f = g` on an interior chart.
    pub adjoint_residual: f64,
    /// `H * df/dnu + 1` (must vanish).
    pub neumann_product_defect: f64,
    /// `|Sigma| / ((n/(n-1)) H V) - 1` (must vanish).
    pub area_identity_defect: f64,
    pub f_center: f64,
}

pub fn flat_ball_potential(n: usize, radius: f64) -> Result<FlatBallReport, ConvexError> {
    if n < 3 || !(radius > 0.0) {
        return Err(ConvexError::UnsupportedDim { n, reason: "need n >= 3 and r > 0".into() });
    }
    let nf = n as f64;
    // node-wise check of L_g^* f = g on a flat interior chart: the
    // potential is quadratic, so the stencils reproduce it to round-off
    let half = 0.6 * radius / (nf).sqrt();
    let chart = crate::chart::uniform_chart(n.min(3), 12, -half, half, false)
        .expect("interior chart is valid");
    let dim = chart.dim() as f64;
    let g = crate::field::MetricField::flat(&chart);
    let f = crate::field::ScalarField::from_fn(&chart, |x| {
        (radius * radius - x.iter().map(|v| v * v).sum::<f64>()) / (2.0 * (dim - 1.0))
    });
    let lstar = crate::geometry::adjoint_linearized_scalar(&g, &f, crate::geometry::FdOrder::Four)
        .expect("flat chart");
    let mut residual = 0.0_f64;
    let m = crate::field::sym_len(chart.dim());
    let pairs = crate::field::sym_pairs(chart.dim());
    for node in 0..chart.n_nodes() {
        for (c, &(i, j)) in pairs.iter().enumerate() {
            let want = if i == j { 1.0 } else { 0.0 };
            residual = residual.max((lstar.at(node)[c] - want).abs());
        }
    }
    let _ = m;

    // closed-form boundary facts for the actual dimension n
    let h = (nf - 1.0) / radius;
    let dfdnu = -radius / (nf - 1.0);
    let neumann_product_defect = h * dfdnu + 1.0;
    let omega = unit_sphere_area(n);
    let ball = omega * radius.powi(n as i32) / nf;
    let sphere = omega * radius.powi(n as i32 - 1);
    let area_identity_defect = sphere / (nf / (nf - 1.0) * h * ball) - 1.0;
    Ok(FlatBallReport {
        n,
        radius,
        adjoint_residual: residual,
        neumann_product_defect,
        area_identity_defect,
        f_center: radius * radius / (2.0 * (nf - 1.0)),
    })
}

/// Icosphere mesh: subdivided icosahedron projected to the unit sphere,
/// optionally radially perturbed by a smooth low-degree polynomial field.
pub fn perturbed_icosphere(subdivisions: usize, amplitude: f64, seed: u64) -> ConvexBody {
    use rand::{Rng, SeedableRng};
    let phi = (1.0 + 5.0_f64.sqrt()) / 2.0;
    let mut vertices: Vec<[f64; 3]> = vec![
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ];
    for v in vertices.iter_mut() {
        let len = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        *v = [v[0] / len, v[1] / len, v[2] / len];
    }
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    use std::collections::HashMap;
    for _ in 0..subdivisions {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut new_faces = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let mut mid = [0usize; 3];
            for e in 0..3 {
                let (p, q) = (f[e], f[(e + 1) % 3]);
                let key = (p.min(q), p.max(q));
                mid[e] = *midpoint.entry(key).or_insert_with(|| {
                    let a = vertices[p];
                    let b = vertices[q];
                    let mut v = [
                        0.5 * (a[0] + b[0]),
                        0.5 * (a[1] + b[1]),
                        0.5 * (a[2] + b[2]),
                    ];
                    let len = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                    v = [v[0] / len, v[1] / len, v[2] / len];
                    vertices.push(v);
                    vertices.len() - 1
                });
            }
            new_faces.push([f[0], mid[0], mid[2]]);
            new_faces.push([f[1], mid[1], mid[0]]);
            new_faces.push([f[2], mid[2], mid[1]]);
            new_faces.push([mid[0], mid[1], mid[2]]);
        }
        faces = new_faces;
    }
    if amplitude != 0.0 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let coeff: Vec<f64> = (0..8).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
        for v in vertices.iter_mut() {
            let (x, y, z) = (v[0], v[1], v[2]);
            let p = coeff[0] * x
                + coeff[1] * y
                + coeff[2] * z
                + coeff[3] * x * y
                + coeff[4] * y * z
                + coeff[5] * z * x
                + coeff[6] * (x * x - y * y)
                + coeff[7] * (2.0 * z * z - x * x - y * y);
            let r = 1.0 + amplitude * p / 3.0;
            *v = [x * r, y * r, z * r];
        }
    }
    ConvexBody::Mesh { vertices, faces }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn unit_ball_closed_forms() {
        let ints = surface_integrals(&ConvexBody::RoundBall { n: 3, radius: 1.0 }).unwrap();
        assert_relative_eq!(ints.area, 4.0 * PI, epsilon = 1e-14);
        assert_relative_eq!(ints.mean_curv_integral, 8.0 * PI, epsilon = 1e-13);
        assert_relative_eq!(ints.intrinsic_scalar_integral, 8.0 * PI, epsilon = 1e-13);
        assert_relative_eq!(ints.enclosed_volume, 4.0 * PI / 3.0, epsilon = 1e-14);
        // radius scaling: r^2, r, r^0, r^3 relative to the sphere area factor
        let r = 1.7;
        let s = surface_integrals(&ConvexBody::RoundBall { n: 3, radius: r }).unwrap();
        assert_relative_eq!(s.area, 4.0 * PI * r * r, epsilon = 1e-12);
        assert_relative_eq!(s.mean_curv_integral, 8.0 * PI * r, epsilon = 1e-12);
        assert_relative_eq!(s.intrinsic_scalar_integral, 8.0 * PI, epsilon = 1e-12);
        assert_relative_eq!(s.enclosed_volume, 4.0 * PI / 3.0 * r.powi(3), epsilon = 1e-12);
    }

    #[test]
    fn unit_ball_quermassintegrals_and_equality() {
        let ball = ConvexBody::RoundBall { n: 3, radius: 1.0 };
        let (w0, w1, w2, w3) = quermassintegrals(&ball).unwrap();
        for w in [w0, w1, w2, w3] {
            assert_relative_eq!(w, 4.0 * PI / 3.0, epsilon = 1e-13);
        }
        let rep = minkowski_check(&ball).unwrap();
        assert!(rep.slack1.abs() < 1e-12);
        assert!(rep.slack2.abs() < 1e-12);
        assert!(rep.curvature_bound_slack.abs() < 1e-10);
        // radius-r ball: W_i = (4 pi / 3) r^{3-i}
        let r = 2.2;
        let (w0, w1, w2, w3) = quermassintegrals(&ConvexBody::RoundBall { n: 3, radius: r }).unwrap();
        assert_relative_eq!(w0, 4.0 * PI / 3.0 * r.powi(3), epsilon = 1e-12);
        assert_relative_eq!(w1, 4.0 * PI / 3.0 * r.powi(2), epsilon = 1e-12);
        assert_relative_eq!(w2, 4.0 * PI / 3.0 * r, epsilon = 1e-12);
        assert_relative_eq!(w3, 4.0 * PI / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn ellipsoid_volume_and_area_cross_check() {
        let semi = [1.0, 1.0, 2.0];
        let body = ConvexBody::Ellipsoid { semi_axes: semi.to_vec() };
        let ints = surface_integrals(&body).unwrap();
        assert_relative_eq!(ints.enclosed_volume, 8.0 * PI / 3.0, epsilon = 1e-14);
        let independent = ellipsoid_area_adaptive(&semi, 1e-10);
        assert!(
            (ints.area - independent).abs() < 1e-6 * independent,
            "{} vs {}",
            ints.area,
            independent
        );
        // Gauss-Bonnet: int R = 8 pi for any convex surface
        assert_relative_eq!(ints.intrinsic_scalar_integral, 8.0 * PI, epsilon = 1e-6);
    }

    #[test]
    fn ellipsoid_minkowski_strict() {
        let rep = minkowski_check(&ConvexBody::Ellipsoid { semi_axes: vec![1.0, 1.0, 2.0] })
            .unwrap();
        assert!(rep.slack1 > 1e-3, "slack1 {}", rep.slack1);
        assert!(rep.slack2 > 1e-3, "slack2 {}", rep.slack2);
        // interpolating family approaches equality continuously
        let mut prev1 = rep.slack1;
        for &t in &[0.5, 0.25, 0.1] {
            let rep = minkowski_check(&ConvexBody::Ellipsoid {
                semi_axes: vec![1.0, 1.0, 1.0 + t],
            })
            .unwrap();
            assert!(rep.slack1 < prev1);
            assert!(rep.slack1 >= -1e-10);
            prev1 = rep.slack1;
        }
    }

    #[test]
    fn four_dimensional_ellipsoid_slacks() {
        let rep = minkowski_check(&ConvexBody::Ellipsoid {
            semi_axes: vec![1.0, 1.0, 1.0, 1.6],
        })
        .unwrap();
        assert!(rep.slack1 > 0.0 && rep.slack2 > 0.0);
        let ball = minkowski_check(&ConvexBody::RoundBall { n: 4, radius: 1.3 }).unwrap();
        assert!(ball.slack1.abs() < 1e-10 * ball.w.1 * ball.w.1);
    }

    #[test]
    fn mesh_cube_quermassintegrals() {
        // unit cube: W0 = 1, W1 = 2, W2 = pi/... total mean curvature
        // sum(edge * pi/2) = 12 * pi/2, W2 = 6 pi / 6 = pi; W3 = 8 pi / 6
        let a = 1.0;
        let vertices: Vec<[f64; 3]> = (0..8)
            .map(|k| {
                [
                    a * ((k & 1) as f64 - 0.5),
                    a * (((k >> 1) & 1) as f64 - 0.5),
                    a * (((k >> 2) & 1) as f64 - 0.5),
                ]
            })
            .collect();
        // 12 triangles, outward oriented
        let quads = [
            [0, 2, 3, 1], // z = -1/2 (normal -z)
            [4, 5, 7, 6], // z = +1/2
            [0, 1, 5, 4], // y = -1/2
            [2, 6, 7, 3], // y = +1/2
            [0, 4, 6, 2], // x = -1/2
            [1, 3, 7, 5], // x = +1/2
        ];
        let mut faces = Vec::new();
        for q in quads {
            faces.push([q[0], q[1], q[2]]);
            faces.push([q[0], q[2], q[3]]);
        }
        // the cube is convex but not STRICTLY convex: the gate must reject
        // it as borderline
        let gated = ConvexBody::Mesh { vertices: vertices.clone(), faces: faces.clone() };
        assert!(matches!(surface_integrals(&gated), Err(ConvexError::NonConvexMesh { .. })));
        // Steiner-formula oracle through the ungated path:
        // W = (a^3, 2a^2, pi a, 4 pi/3) for side a = 1
        let ints = mesh_integrals_unchecked(&vertices, &faces).unwrap();
        assert_relative_eq!(ints.enclosed_volume, 1.0, epsilon = 1e-12);
        assert_relative_eq!(ints.area / 3.0, 2.0, epsilon = 1e-12);
        // coplanar triangle pairs contribute zero dihedral angle
        assert_relative_eq!(ints.mean_curv_integral / 6.0, PI, epsilon = 1e-10);
        assert_relative_eq!(ints.intrinsic_scalar_integral / 6.0, 8.0 * PI / 6.0, epsilon = 1e-10);
        // Minkowski inequalities hold for the polytope quermassintegrals
        let (w0, w1, w2, w3) = (1.0, 2.0, PI, 4.0 * PI / 3.0);
        assert!(w1 * w1 - w0 * w2 > 0.0);
        assert!(w2 * w2 - w1 * w3 > 0.0);
    }

    #[test]
    fn perturbed_icospheres_stay_convex_with_nonnegative_slacks() {
        for seed in 0..6 {
            let body = perturbed_icosphere(2, 0.05, seed);
            let rep = minkowski_check(&body).unwrap();
            let scale1 = rep.w.1 * rep.w.1;
            let scale2 = rep.w.2 * rep.w.2;
            assert!(rep.slack1 >= -1e-6 * scale1, "seed {seed}: slack1 {}", rep.slack1);
            assert!(rep.slack2 >= -1e-6 * scale2, "seed {seed}: slack2 {}", rep.slack2);
        }
    }

    #[test]
    fn nonconvex_mesh_rejected() {
        let mut body = perturbed_icosphere(1, 0.0, 0);
        if let ConvexBody::Mesh { vertices, .. } = &mut body {
            // dent one vertex inward
            let v = vertices[5];
            vertices[5] = [0.3 * v[0], 0.3 * v[1], 0.3 * v[2]];
        }
        assert!(matches!(
            minkowski_check(&body),
            Err(ConvexError::NonConvexMesh { .. })
        ));
    }

    #[test]
    fn vstatic_bounds_equality_on_balls() {
        let ints = surface_integrals(&ConvexBody::RoundBall { n: 3, radius: 1.0 }).unwrap();
        let (b, c) = vstatic_volume_bound(&ints, 3).unwrap();
        assert_relative_eq!(b, 4.0 * PI / 3.0, epsilon = 1e-12);
        assert_relative_eq!(c.unwrap(), 4.0 * PI / 3.0, epsilon = 1e-12);
        // ellipsoid data as a would-be scalar-flat filling boundary: the
        // bound strictly exceeds the Euclidean volume away from roundness
        // (that is the curvature-bound inequality read backwards, with
        // equality exactly for the ball)
        let ints = surface_integrals(&ConvexBody::Ellipsoid {
            semi_axes: vec![1.0, 1.0, 1.5],
        })
        .unwrap();
        let (b, _) = vstatic_volume_bound(&ints, 3).unwrap();
        assert!(b > ints.enclosed_volume * 1.01, "{b} vs {}", ints.enclosed_volume);
        // non-positive integral refused
        let bad = SurfaceIntegrals {
            area: 1.0,
            mean_curv_integral: 1.0,
            intrinsic_scalar_integral: -0.1,
            enclosed_volume: 1.0,
        };
        assert!(vstatic_volume_bound(&bad, 3).is_err());
    }

    #[test]
    fn flat_ball_potential_checks() {
        let rep = flat_ball_potential(3, 1.0).unwrap();
        assert_relative_eq!(rep.f_center, 0.25, epsilon = 1e-15);
        assert!(rep.adjoint_residual < 1e-10, "residual {:e}", rep.adjoint_residual);
        assert!(rep.neumann_product_defect.abs() < 1e-14);
        assert!(rep.area_identity_defect.abs() < 1e-14);
        // any n: the identities are exact
        for n in [4usize, 5, 7] {
            let rep = flat_ball_potential(n, 0.8).unwrap();
            assert!(rep.neumann_product_defect.abs() < 1e-14);
            assert!(rep.area_identity_defect.abs() < 1e-14);
        }
    }
}
