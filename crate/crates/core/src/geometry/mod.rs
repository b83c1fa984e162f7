//! Finite-difference tensor calculus on a chart: Christoffel symbols,
//! Ricci and scalar curvature, volume and its first variation, the joint
//! map `Theta(g) = (R(g), V(g))`, and its quadratic remainder.

pub mod jacobian;
pub mod operators;
pub mod transport;

use crate::chart::ChartSpec;
use crate::error::FieldError;
use crate::exec;
use crate::fd::AxisOp;
use crate::field::{
    ensure_same_chart, sym_index, sym_len, sym_pairs, MetricField, ScalarField, SymTensorField,
    ThetaValue,
};

/// Stencil accuracy order for all derivative operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdOrder {
    Two,
    Four,
}

impl FdOrder {
    #[inline]
    pub fn value(self) -> usize {
        match self {
            FdOrder::Two => 2,
            FdOrder::Four => 4,
        }
    }
}

impl Default for FdOrder {
    fn default() -> Self {
        FdOrder::Four
    }
}

/// Cached per-axis derivative stencils for one chart.
pub struct DiffOps {
    pub chart: ChartSpec,
    pub order: FdOrder,
    d1: Vec<AxisOp>,
    d2: Vec<AxisOp>,
    strides: Vec<usize>,
}

impl DiffOps {
    pub fn new(chart: &ChartSpec, order: FdOrder) -> Self {
        let d1 = chart
            .axes()
            .iter()
            .map(|a| AxisOp::new(a.nodes, a.spacing, a.periodic, 1, order.value()))
            .collect();
        let d2 = chart
            .axes()
            .iter()
            .map(|a| AxisOp::new(a.nodes, a.spacing, a.periodic, 2, order.value()))
            .collect();
        DiffOps { chart: chart.clone(), order, d1, d2, strides: chart.strides() }
    }

    pub fn d1_op(&self, axis: usize) -> &AxisOp {
        &self.d1[axis]
    }

    pub fn d2_op(&self, axis: usize) -> &AxisOp {
        &self.d2[axis]
    }

    /// Apply a 1-D operator along `axis` to node-major data with `ncomp`
    /// interleaved components.
    fn apply_axis(&self, op: &AxisOp, data: &[f64], ncomp: usize, axis: usize) -> Vec<f64> {
        let stride = self.strides[axis];
        let nodes_a = self.chart.axis(axis).nodes;
        exec::map_collect(data.len(), |k| {
            let node = k / ncomp;
            let c = k % ncomp;
            let ia = (node / stride) % nodes_a;
            let base = node - ia * stride;
            op.row(ia)
                .iter()
                .map(|&(j, w)| w * data[(base + j as usize * stride) * ncomp + c])
                .sum()
        })
    }

    /// First derivative along `axis` of every component.
    pub fn d1(&self, data: &[f64], ncomp: usize, axis: usize) -> Vec<f64> {
        self.apply_axis(&self.d1[axis], data, ncomp, axis)
    }

    /// Fused second derivative along `axis`.
    pub fn d2(&self, data: &[f64], ncomp: usize, axis: usize) -> Vec<f64> {
        self.apply_axis(&self.d2[axis], data, ncomp, axis)
    }

    /// Mixed or pure second derivative: fused stencil when `a == b`,
    /// composition otherwise.
    pub fn d2_mixed(&self, data: &[f64], ncomp: usize, a: usize, b: usize) -> Vec<f64> {
        if a == b {
            self.d2(data, ncomp, a)
        } else {
            let first = self.d1(data, ncomp, b);
            self.d1(&first, ncomp, a)
        }
    }
}

/// Christoffel symbols, `gamma[k][(i,j) packed]` per node.
pub struct Christoffel {
    pub chart: ChartSpec,
    pub data: Vec<f64>,
}

impl Christoffel {
    #[inline]
    pub fn at(&self, node: usize) -> &[f64] {
        let n = self.chart.dim();
        let len = n * sym_len(n);
        &self.data[node * len..(node + 1) * len]
    }

    #[inline]
    pub fn gamma(&self, node: usize, k: usize, i: usize, j: usize) -> f64 {
        let n = self.chart.dim();
        let m = sym_len(n);
        self.at(node)[k * m + sym_index(i, j, n)]
    }
}

/// Levi-Civita connection coefficients of `g`.
pub fn christoffel(g: &MetricField, order: FdOrder) -> Result<Christoffel, FieldError> {
    let ops = DiffOps::new(g.chart(), order);
    christoffel_with(g, &ops)
}

pub(crate) fn christoffel_with(g: &MetricField, ops: &DiffOps) -> Result<Christoffel, FieldError> {
    let chart = g.chart();
    let n = chart.dim();
    let m = sym_len(n);
    let nn = chart.n_nodes();
    let ginv = g.inverses()?;

    // dg[a]: derivative of all packed metric components along axis a
    let dg: Vec<Vec<f64>> = (0..n).map(|a| ops.d1(g.data(), m, a)).collect();

    let mut data = vec![0.0; nn * n * m];
    exec::for_each_node_chunk(&mut data, n * m, |node, out| {
        let gi = &ginv[node * m..(node + 1) * m];
        for k in 0..n {
            for i in 0..n {
                for j in i..n {
                    let mut s = 0.0;
                    for l in 0..n {
                        let dig_jl = dg[i][node * m + sym_index(j, l, n)];
                        let djg_il = dg[j][node * m + sym_index(i, l, n)];
                        let dlg_ij = dg[l][node * m + sym_index(i, j, n)];
                        s += gi[sym_index(k, l, n)] * (dig_jl + djg_il - dlg_ij);
                    }
                    out[k * m + sym_index(i, j, n)] = 0.5 * s;
                }
            }
        }
    });
    Ok(Christoffel { chart: chart.clone(), data })
}

pub struct Curvature {
    pub ricci: SymTensorField,
    pub scalar: ScalarField,
}

/// Ricci tensor and scalar curvature.
///
/// Uses the all-lower Riemann form
/// `R_{mijk} = (d2_{ik} g_{jm} + d2_{jm} g_{ik} - d2_{im} g_{jk}
///             - d2_{jk} g_{im}) / 2
///           - (d_i g_{ml}) G^l_{jk} + (d_j g_{ml}) G^l_{ik}
///           + G_{mip} G^p_{jk} - G_{mjp} G^p_{ik}`
/// so every stencil is applied to the metric itself (one composition level);
/// differentiating the Christoffel field instead compounds the one-sided
/// closure error at box boundaries.
pub fn curvature(g: &MetricField, order: FdOrder) -> Result<Curvature, FieldError> {
    let ops = DiffOps::new(g.chart(), order);
    curvature_with(g, &ops)
}

/// Shared precomputation for the curvature pipeline and its linearization.
pub(crate) struct CurvaturePipeline {
    pub ginv: Vec<f64>,
    /// dg[a][node * m + c]
    pub dg: Vec<Vec<f64>>,
    /// d2g[pair(a,b)][node * m + c], pairs in packed (a <= b) order
    pub d2g: Vec<Vec<f64>>,
    /// all-lower Christoffel: gl[node * n * m + l * m + (jk)]
    pub gl: Vec<f64>,
    /// upper Christoffel: gu[node * n * m + l * m + (jk)]
    pub gu: Vec<f64>,
    pub ricci: Vec<f64>,
    pub scalar: Vec<f64>,
}

impl CurvaturePipeline {
    pub(crate) fn build(g: &MetricField, ops: &DiffOps) -> Result<Self, FieldError> {
        let chart = g.chart();
        let n = chart.dim();
        let m = sym_len(n);
        let nn = chart.n_nodes();
        let ginv = g.inverses()?;
        let pairs = sym_pairs(n);
        let dg: Vec<Vec<f64>> = (0..n).map(|a| ops.d1(g.data(), m, a)).collect();
        let d2g: Vec<Vec<f64>> = pairs
            .iter()
            .map(|&(a, b)| ops.d2_mixed(g.data(), m, a, b))
            .collect();

        let width = n * m;
        let mut gl = vec![0.0; nn * width];
        exec::for_each_node_chunk(&mut gl, width, |node, out| {
            for l in 0..n {
                for j in 0..n {
                    for k in j..n {
                        out[l * m + sym_index(j, k, n)] = 0.5
                            * (dg[j][node * m + sym_index(k, l, n)]
                                + dg[k][node * m + sym_index(j, l, n)]
                                - dg[l][node * m + sym_index(j, k, n)]);
                    }
                }
            }
        });
        let mut gu = vec![0.0; nn * width];
        exec::for_each_node_chunk(&mut gu, width, |node, out| {
            let gi = &ginv[node * m..(node + 1) * m];
            let glv = &gl[node * width..(node + 1) * width];
            for l in 0..n {
                for c in 0..m {
                    let mut s = 0.0;
                    for p in 0..n {
                        s += gi[sym_index(l, p, n)] * glv[p * m + c];
                    }
                    out[l * m + c] = s;
                }
            }
        });

        // Ricci via Ric_{jk} = g^{mi} R_{mijk}
        let d2 = |pair_a: usize, pair_b: usize, comp: usize, node: usize| -> f64 {
            d2g[sym_index(pair_a, pair_b, n)][node * m + comp]
        };
        let mut ricci = vec![0.0; nn * m];
        exec::for_each_node_chunk(&mut ricci, m, |node, out| {
            let gi = &ginv[node * m..(node + 1) * m];
            let glv = &gl[node * width..(node + 1) * width];
            let guv = &gu[node * width..(node + 1) * width];
            for j in 0..n {
                for k in j..n {
                    let mut s = 0.0;
                    for mm in 0..n {
                        for i in 0..n {
                            let gmi = gi[sym_index(mm, i, n)];
                            if gmi == 0.0 {
                                continue;
                            }
                            let mut br = 0.5
                                * (d2(i, k, sym_index(j, mm, n), node)
                                    + d2(j, mm, sym_index(i, k, n), node)
                                    - d2(i, mm, sym_index(j, k, n), node)
                                    - d2(j, k, sym_index(i, mm, n), node));
                            for l in 0..n {
                                br -= dg[i][node * m + sym_index(mm, l, n)]
                                    * guv[l * m + sym_index(j, k, n)];
                                br += dg[j][node * m + sym_index(mm, l, n)]
                                    * guv[l * m + sym_index(i, k, n)];
                            }
                            for p in 0..n {
                                br += glv[mm * m + sym_index(i, p, n)]
                                    * guv[p * m + sym_index(j, k, n)];
                                br -= glv[mm * m + sym_index(j, p, n)]
                                    * guv[p * m + sym_index(i, k, n)];
                            }
                            s += gmi * br;
                        }
                    }
                    out[sym_index(j, k, n)] = s;
                }
            }
        });

        let scalar = exec::map_collect(nn, |node| {
            let gi = &ginv[node * m..(node + 1) * m];
            let ric = &ricci[node * m..(node + 1) * m];
            pairs
                .iter()
                .enumerate()
                .map(|(c, &(i, j))| crate::field::sym_mult(i, j) * gi[c] * ric[c])
                .sum()
        });

        Ok(CurvaturePipeline { ginv, dg, d2g, gl, gu, ricci, scalar })
    }
}

pub(crate) fn curvature_with(g: &MetricField, ops: &DiffOps) -> Result<Curvature, FieldError> {
    let chart = g.chart();
    let pipe = CurvaturePipeline::build(g, ops)?;
    Ok(Curvature {
        ricci: SymTensorField { chart: chart.clone(), data: pipe.ricci },
        scalar: ScalarField { chart: chart.clone(), data: pipe.scalar },
    })
}

/// Chart-coordinate volume: nodal quadrature of `sqrt(det g)`.
pub fn volume(g: &MetricField) -> f64 {
    let w = g.chart().cell_weights();
    let sq = g.sqrt_dets();
    // sequential reduction keeps the result independent of thread count
    sq.iter().zip(w.iter()).map(|(s, w)| s * w).sum()
}

/// First variation of the volume: `1/2 * integral of tr_g(h)`.
pub fn dvolume(g: &MetricField, h: &SymTensorField) -> Result<f64, FieldError> {
    ensure_same_chart(g.chart(), &h.chart, "dvolume")?;
    let n = g.chart().dim();
    let m = sym_len(n);
    let ginv = g.inverses()?;
    let w = g.chart().cell_weights();
    let sq = g.sqrt_dets();
    let pairs = sym_pairs(n);
    let mut total = 0.0;
    for node in 0..g.chart().n_nodes() {
        let gi = &ginv[node * m..(node + 1) * m];
        let hv = h.at(node);
        let tr: f64 = pairs
            .iter()
            .enumerate()
            .map(|(c, &(i, j))| crate::field::sym_mult(i, j) * gi[c] * hv[c])
            .sum();
        total += 0.5 * tr * sq[node] * w[node];
    }
    Ok(total)
}

/// The joint scalar-curvature-and-volume map.
pub fn theta(g: &MetricField, order: FdOrder) -> Result<ThetaValue, FieldError> {
    let curv = curvature(g, order)?;
    let vol = volume(g);
    if !(vol > 0.0) {
        // cannot happen for a valid metric, but keep the invariant explicit
        return Err(FieldError::NonFinite { node: 0 });
    }
    Ok(ThetaValue { scalar_curvature: curv.scalar, volume: vol })
}

/// Formula-path evaluation of the linearized scalar curvature
/// `L_g(h) = -Lap_g(tr_g h) + div_g div_g h - <h, Ric(g)>_g`.
///
/// This discretizes the displayed continuum formula and therefore differs
/// from the exact discrete Jacobian ([`jacobian::linearized_theta_direct`])
/// at stencil order; it is kept as an independent consistency oracle.
pub fn linearized_scalar_formula(
    g: &MetricField,
    h: &SymTensorField,
    order: FdOrder,
) -> Result<ScalarField, FieldError> {
    ensure_same_chart(g.chart(), &h.chart, "linearized_scalar")?;
    let ops = DiffOps::new(g.chart(), order);
    let chart = g.chart();
    let n = chart.dim();
    let m = sym_len(n);
    let nn = chart.n_nodes();
    let ginv = g.inverses()?;
    let gamma = christoffel_with(g, &ops)?;
    let curv = curvature_with(g, &ops)?;
    let pairs = sym_pairs(n);

    // tr_g h per node
    let tr: Vec<f64> = exec::map_collect(nn, |node| {
        let gi = &ginv[node * m..(node + 1) * m];
        let hv = h.at(node);
        pairs
            .iter()
            .enumerate()
            .map(|(c, &(i, j))| crate::field::sym_mult(i, j) * gi[c] * hv[c])
            .sum()
    });
    let lap_tr = laplace_beltrami(&tr, &ginv, &gamma, &ops);

    // vector V_j = g^{ab} (d_a h_{bj} - Gamma^c_{ab} h_{cj} - Gamma^c_{aj} h_{bc})
    let dh: Vec<Vec<f64>> = (0..n).map(|a| ops.d1(&h.data, m, a)).collect();
    let mut v = vec![0.0; nn * n];
    exec::for_each_node_chunk(&mut v, n, |node, out| {
        let gi = &ginv[node * m..(node + 1) * m];
        let ga = gamma.at(node);
        let hv = h.at(node);
        for j in 0..n {
            let mut s = 0.0;
            for a in 0..n {
                for b in 0..n {
                    let gab = gi[sym_index(a, b, n)];
                    if gab == 0.0 {
                        continue;
                    }
                    let mut t = dh[a][node * m + sym_index(b, j, n)];
                    for c in 0..n {
                        t -= ga[c * m + sym_index(a, b, n)] * hv[sym_index(c, j, n)];
                        t -= ga[c * m + sym_index(a, j, n)] * hv[sym_index(b, c, n)];
                    }
                    s += gab * t;
                }
            }
            out[j] = s;
        }
    });

    // divergence of the one-form V: g^{jk}(d_j V_k - Gamma^c_{jk} V_c)
    let dv: Vec<Vec<f64>> = (0..n).map(|a| ops.d1(&v, n, a)).collect();
    let divdiv: Vec<f64> = exec::map_collect(nn, |node| {
        let gi = &ginv[node * m..(node + 1) * m];
        let ga = gamma.at(node);
        let mut s = 0.0;
        for j in 0..n {
            for k in 0..n {
                let gjk = gi[sym_index(j, k, n)];
                if gjk == 0.0 {
                    continue;
                }
                let mut t = dv[j][node * n + k];
                for c in 0..n {
                    t -= ga[c * m + sym_index(j, k, n)] * v[node * n + c];
                }
                s += gjk * t;
            }
        }
        s
    });

    let data: Vec<f64> = exec::map_collect(nn, |node| {
        let gi = &ginv[node * m..(node + 1) * m];
        let hv = h.at(node);
        let ric = curv.ricci.at(node);
        // <h, Ric> with both indices raised on one factor
        let mut hdotric = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut up = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        up += gi[sym_index(i, a, n)] * gi[sym_index(j, b, n)]
                            * ric[sym_index(a, b, n)];
                    }
                }
                hdotric += up * hv[sym_index(i, j, n)];
            }
        }
        -lap_tr[node] + divdiv[node] - hdotric
    });
    Ok(ScalarField { chart: chart.clone(), data })
}

/// `Lap_g u = g^{ab} (d2_ab u - Gamma^c_{ab} d_c u)` for a scalar sample
/// vector; helper shared by the direct evaluators.
pub(crate) fn laplace_beltrami(
    u: &[f64],
    ginv: &[f64],
    gamma: &Christoffel,
    ops: &DiffOps,
) -> Vec<f64> {
    let chart = &gamma.chart;
    let n = chart.dim();
    let m = sym_len(n);
    let nn = chart.n_nodes();
    let du: Vec<Vec<f64>> = (0..n).map(|a| ops.d1(u, 1, a)).collect();
    let d2u: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|a| {
            (a..n)
                .map(|b| ops.d2_mixed(u, 1, a, b))
                .collect()
        })
        .collect();
    exec::map_collect(nn, |node| {
        let gi = &ginv[node * m..(node + 1) * m];
        let ga = gamma.at(node);
        let mut s = 0.0;
        for a in 0..n {
            for b in 0..n {
                let gab = gi[sym_index(a, b, n)];
                if gab == 0.0 {
                    continue;
                }
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                let mut t = d2u[lo][hi - lo][node];
                for c in 0..n {
                    t -= ga[c * m + sym_index(a, b, n)] * du[c][node];
                }
                s += gab * t;
            }
        }
        s
    })
}

/// Covariant Hessian of a scalar sample vector, packed per node.
pub(crate) fn hessian(
    u: &[f64],
    gamma: &Christoffel,
    ops: &DiffOps,
) -> Vec<f64> {
    let chart = &gamma.chart;
    let n = chart.dim();
    let m = sym_len(n);
    let nn = chart.n_nodes();
    let du: Vec<Vec<f64>> = (0..n).map(|a| ops.d1(u, 1, a)).collect();
    let pairs = sym_pairs(n);
    let d2: Vec<Vec<f64>> = pairs.iter().map(|&(a, b)| ops.d2_mixed(u, 1, a, b)).collect();
    let mut out = vec![0.0; nn * m];
    exec::for_each_node_chunk(&mut out, m, |node, chunk| {
        let ga = gamma.at(node);
        for (c, &(_a, _b)) in pairs.iter().enumerate() {
            let mut t = d2[c][node];
            for k in 0..n {
                t -= ga[k * m + c] * du[k][node];
            }
            chunk[c] = t;
        }
    });
    out
}

/// Formula-path adjoint `L_g^* f = -(Lap_g f) g + Hess_g f - f Ric(g)`,
/// discretized directly. Kept independent of the transpose-built adjoint as
/// a consistency oracle and as the operator whose kernel defines V-static
/// detection.
pub fn adjoint_linearized_scalar(
    g: &MetricField,
    f: &ScalarField,
    order: FdOrder,
) -> Result<SymTensorField, FieldError> {
    ensure_same_chart(g.chart(), &f.chart, "adjoint_linearized_scalar")?;
    let ops = DiffOps::new(g.chart(), order);
    let chart = g.chart();
    let n = chart.dim();
    let m = sym_len(n);
    let nn = chart.n_nodes();
    let ginv = g.inverses()?;
    let gamma = christoffel_with(g, &ops)?;
    let curv = curvature_with(g, &ops)?;
    let hess = hessian(&f.data, &gamma, &ops);
    let pairs = sym_pairs(n);
    let lap: Vec<f64> = exec::map_collect(nn, |node| {
        let gi = &ginv[node * m..(node + 1) * m];
        let hs = &hess[node * m..(node + 1) * m];
        pairs
            .iter()
            .enumerate()
            .map(|(c, &(i, j))| crate::field::sym_mult(i, j) * gi[c] * hs[c])
            .sum()
    });
    let mut data = vec![0.0; nn * m];
    exec::for_each_node_chunk(&mut data, m, |node, out| {
        let gv = g.at(node);
        let hs = &hess[node * m..(node + 1) * m];
        let ric = curv.ricci.at(node);
        let fv = f.data[node];
        for c in 0..m {
            out[c] = -lap[node] * gv[c] + hs[c] - fv * ric[c];
        }
    });
    Ok(SymTensorField { chart: chart.clone(), data })
}

/// `S_g^*(f, a) = L_g^* f + (a/2) g` on the formula path.
pub fn s_adjoint_formula(
    g: &MetricField,
    f: &ScalarField,
    a: f64,
    order: FdOrder,
) -> Result<SymTensorField, FieldError> {
    let mut l = adjoint_linearized_scalar(g, f, order)?;
    for (out, gv) in l.data.iter_mut().zip(g.data().iter()) {
        *out += 0.5 * a * gv;
    }
    Ok(l)
}

/// Quadratic remainder `Q_g(h) = Theta(g+h) - Theta(g) - S_g(h)`, evaluated
/// as the exact discrete difference.
pub fn quadratic_remainder(
    g: &MetricField,
    h: &SymTensorField,
    order: FdOrder,
) -> Result<(ScalarField, f64), FieldError> {
    ensure_same_chart(g.chart(), &h.chart, "quadratic_remainder")?;
    let perturbed = g.add_scaled(h, 1.0)?;
    let theta_g = theta(g, order)?;
    let theta_gh = theta(&perturbed, order)?;
    let ops = DiffOps::new(g.chart(), order);
    let (lin, dvol) = jacobian::linearized_theta_direct(g, h, &ops)?;
    let data: Vec<f64> = theta_gh
        .scalar_curvature
        .data
        .iter()
        .zip(theta_g.scalar_curvature.data.iter())
        .zip(lin.data.iter())
        .map(|((a, b), l)| a - b - l)
        .collect();
    Ok((
        ScalarField { chart: g.chart().clone(), data },
        theta_gh.volume - theta_g.volume - dvol,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{uniform_chart, AxisSpec, ChartSpec};
    use approx::assert_relative_eq;

    fn sphere_chart(nodes: usize) -> ChartSpec {
        // theta in [0.15 pi, 0.85 pi] box, phi periodic
        let lo = 0.15 * std::f64::consts::PI;
        let hi = 0.85 * std::f64::consts::PI;
        ChartSpec::new(vec![
            AxisSpec {
                nodes,
                spacing: (hi - lo) / (nodes - 1) as f64,
                periodic: false,
                origin: lo,
            },
            AxisSpec {
                nodes,
                spacing: 2.0 * std::f64::consts::PI / nodes as f64,
                periodic: true,
                origin: 0.0,
            },
        ])
        .unwrap()
    }

    fn sphere_metric(chart: &ChartSpec) -> MetricField {
        MetricField::from_fn(chart, |x, g| {
            g[0] = 1.0;
            g[1] = 0.0;
            g[2] = x[0].sin().powi(2);
        })
        .unwrap()
    }

    #[test]
    fn flat_christoffels_vanish() {
        let chart = uniform_chart(2, 16, 0.0, 1.0, true).unwrap();
        let g = MetricField::flat(&chart);
        let gamma = christoffel(&g, FdOrder::Four).unwrap();
        assert!(gamma.data.iter().all(|v| v.abs() < 1e-13));

        // constant scaling leaves the symbols unchanged
        let g2 = MetricField::from_fn(&chart, |_, out| {
            out[0] = 4.0;
            out[1] = 0.0;
            out[2] = 4.0;
        })
        .unwrap();
        let gamma2 = christoffel(&g2, FdOrder::Four).unwrap();
        assert!(gamma2.data.iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn sphere_christoffels_match_closed_form() {
        let chart = sphere_chart(48);
        let g = sphere_metric(&chart);
        let gamma = christoffel(&g, FdOrder::Four).unwrap();
        let mut multi = [0usize; 2];
        let mut max_err: f64 = 0.0;
        for node in 0..chart.n_nodes() {
            chart.multi_index(node, &mut multi);
            let th = chart.coord(0, multi[0]);
            // Gamma^theta_{phi phi} = -sin(th) cos(th); Gamma^phi_{theta phi} = cot(th)
            let e1 = gamma.gamma(node, 0, 1, 1) + th.sin() * th.cos();
            let e2 = gamma.gamma(node, 1, 0, 1) - th.cos() / th.sin();
            max_err = max_err.max(e1.abs()).max(e2.abs());
        }
        assert!(max_err < 1e-5, "max err {max_err:e}");
    }

    #[test]
    fn flat_torus_curvature_zero() {
        let chart = uniform_chart(3, 10, 0.0, 1.0, true).unwrap();
        let g = MetricField::flat(&chart);
        let curv = curvature(&g, FdOrder::Four).unwrap();
        assert!(curv.scalar.sup_norm() < 1e-12);
        assert!(curv.ricci.data.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn sphere_curvature_matches_identity() {
        let chart = sphere_chart(48);
        let g = sphere_metric(&chart);
        let curv = curvature(&g, FdOrder::Four).unwrap();
        let mut max_r: f64 = 0.0;
        let mut max_ric: f64 = 0.0;
        for node in 0..chart.n_nodes() {
            max_r = max_r.max((curv.scalar.data[node] - 2.0).abs());
            // Ric = (n-1) g = g for n = 2
            for c in 0..3 {
                max_ric = max_ric.max((curv.ricci.at(node)[c] - g.at(node)[c]).abs());
            }
        }
        assert!(max_r < 1e-4, "scalar curvature err {max_r:e}");
        assert!(max_ric < 1e-4, "ricci err {max_ric:e}");
    }

    #[test]
    fn sphere_curvature_grid_convergence_order_four() {
        let err = |nodes: usize| {
            let chart = sphere_chart(nodes);
            let g = sphere_metric(&chart);
            let curv = curvature(&g, FdOrder::Four).unwrap();
            curv.scalar
                .data
                .iter()
                .map(|r| (r - 2.0).abs())
                .fold(0.0_f64, f64::max)
        };
        let e1 = err(24);
        let e2 = err(48);
        let ratio = e1 / e2;
        // spacing halves: at least 2^4, up to 2^5 where the higher-order
        // boundary closures dominate the max error
        assert!(ratio > 10.0 && ratio < 45.0, "ratio {ratio}");
    }

    #[test]
    fn product_chart_scalar_curvature_is_two() {
        // dt^2 + dtheta^2 + sin^2 theta dphi^2 on S^1 x S^2 (n = 3)
        let pi = std::f64::consts::PI;
        let chart = ChartSpec::new(vec![
            AxisSpec { nodes: 24, spacing: 2.0 * pi / 24.0, periodic: true, origin: 0.0 },
            AxisSpec {
                nodes: 24,
                spacing: 0.7 * pi / 23.0,
                periodic: false,
                origin: 0.15 * pi,
            },
            AxisSpec { nodes: 24, spacing: 2.0 * pi / 24.0, periodic: true, origin: 0.0 },
        ])
        .unwrap();
        let g = MetricField::from_fn(&chart, |x, out| {
            out.fill(0.0);
            out[0] = 1.0; // tt
            out[3] = 1.0; // theta theta
            out[5] = x[1].sin().powi(2); // phi phi
        })
        .unwrap();
        let curv = curvature(&g, FdOrder::Four).unwrap();
        let max_err = curv
            .scalar
            .data
            .iter()
            .map(|r| (r - 2.0).abs())
            .fold(0.0_f64, f64::max);
        assert!(max_err < 5e-3, "max err {max_err:e}");
    }

    #[test]
    fn volume_closed_forms() {
        let chart = uniform_chart(2, 16, 0.0, 1.0, true).unwrap();
        let g = MetricField::flat(&chart);
        assert_relative_eq!(volume(&g), 1.0, epsilon = 1e-12);

        // scaling law: volume(c^2 g) = c^n volume(g)
        let c2 = 2.25;
        let scaled = MetricField::from_fn(&chart, |_, out| {
            out[0] = c2;
            out[1] = 0.0;
            out[2] = c2;
        })
        .unwrap();
        assert_relative_eq!(volume(&scaled), c2.sqrt().powi(2), epsilon = 1e-12);
    }

    #[test]
    fn dvolume_of_conformal_direction() {
        let chart = uniform_chart(3, 8, 0.0, 1.0, true).unwrap();
        let g = MetricField::flat(&chart);
        let eps = 0.37;
        let h = g.as_sym_tensor().scaled(eps);
        // dvolume = (eps n / 2) volume
        let dv = dvolume(&g, &h).unwrap();
        assert_relative_eq!(dv, eps * 3.0 / 2.0 * volume(&g), epsilon = 1e-12);
    }

    #[test]
    fn linearized_scalar_of_one_dimensional_profile() {
        // flat periodic chart, h = diag(u(x2), 0): L_g(h) = -u''(x2)
        let chart = uniform_chart(2, 48, 0.0, 1.0, true).unwrap();
        let g = MetricField::flat(&chart);
        let two_pi = 2.0 * std::f64::consts::PI;
        let h = SymTensorField::from_fn(&chart, |x, out| {
            out[0] = (two_pi * x[1]).sin();
            out[1] = 0.0;
            out[2] = 0.0;
        });
        let l = linearized_scalar_formula(&g, &h, FdOrder::Four).unwrap();
        let ops = DiffOps::new(&chart, FdOrder::Four);
        let (lj, _) = jacobian::linearized_theta_direct(&g, &h, &ops).unwrap();
        let mut multi = [0usize; 2];
        for node in 0..chart.n_nodes() {
            chart.multi_index(node, &mut multi);
            let x2 = chart.coord(1, multi[1]);
            let want = two_pi.powi(2) * (two_pi * x2).sin();
            // formula path: stencil-order agreement with the closed form
            assert!((l.data[node] - want).abs() < 2e-4, "formula node {node}: {} vs {want}", l.data[node]);
            // exact-Jacobian path agrees at the same order
            assert!((lj.data[node] - want).abs() < 2e-4, "jacobian node {node}: {} vs {want}", lj.data[node]);
        }
    }

    #[test]
    fn linearized_scalar_matches_difference_quotient() {
        // oracle: centered difference of t -> R(g + t h) at t = 0
        let chart = uniform_chart(2, 32, 0.0, 1.0, true).unwrap();
        let g = MetricField::from_fn(&chart, |x, out| {
            let b = 0.08 * (2.0 * std::f64::consts::PI * x[0]).sin();
            out[0] = 1.0 + b;
            out[1] = 0.3 * b;
            out[2] = 1.0 - 0.5 * b;
        })
        .unwrap();
        let h = SymTensorField::from_fn(&chart, |x, out| {
            let s = (2.0 * std::f64::consts::PI * x[1]).cos();
            out[0] = 0.4 * s;
            out[1] = 0.1 * s;
            out[2] = -0.2 * s;
        });
        let l = linearized_scalar_formula(&g, &h, FdOrder::Four).unwrap();
        let t = 1e-5;
        let rp = theta(&g.add_scaled(&h, t).unwrap(), FdOrder::Four).unwrap();
        let rm = theta(&g.add_scaled(&h, -t).unwrap(), FdOrder::Four).unwrap();
        for node in (0..chart.n_nodes()).step_by(97) {
            let fd = (rp.scalar_curvature.data[node] - rm.scalar_curvature.data[node]) / (2.0 * t);
            // the formula discretization meets the discrete derivative only
            // to stencil order
            assert!(
                (l.data[node] - fd).abs() < 1e-3 * (1.0 + fd.abs()),
                "node {node}: {} vs {}",
                l.data[node],
                fd
            );
        }
    }

    #[test]
    fn trace_identity_for_formula_adjoint() {
        // tr_g(L_g^* f) = -(n-1) Lap f - f R
        let chart = sphere_chart(40);
        let g = sphere_metric(&chart);
        let f = ScalarField::from_fn(&chart, |x| x[0].cos());
        let lstar = adjoint_linearized_scalar(&g, &f, FdOrder::Four).unwrap();
        let ops = DiffOps::new(&chart, FdOrder::Four);
        let ginv = g.inverses().unwrap();
        let gamma = christoffel_with(&g, &ops).unwrap();
        let lap = laplace_beltrami(&f.data, &ginv, &gamma, &ops);
        let curv = curvature_with(&g, &ops).unwrap();
        for node in (0..chart.n_nodes()).step_by(53) {
            let gi = &ginv[node * 3..node * 3 + 3];
            let lv = lstar.at(node);
            let tr = gi[0] * lv[0] + 2.0 * gi[1] * lv[1] + gi[2] * lv[2];
            let want = -(2.0 - 1.0) * lap[node] - f.data[node] * curv.scalar.data[node];
            assert!((tr - want).abs() < 1e-5, "node {node}: {tr} vs {want}");
        }
    }

    #[test]
    fn quadratic_remainder_conformal_volume_closed_form() {
        let chart = uniform_chart(2, 12, 0.0, 1.0, true).unwrap();
        let g = MetricField::flat(&chart);
        let eps = 0.02;
        let h = g.as_sym_tensor().scaled(eps);
        let (qs, qv) = quadratic_remainder(&g, &h, FdOrder::Four).unwrap();
        assert!(qs.sup_norm() < 1e-12);
        let n = 2.0;
        let want = volume(&g) * ((1.0 + eps).powf(n / 2.0) - 1.0 - n * eps / 2.0);
        assert_relative_eq!(qv, want, epsilon = 1e-12);
    }

    #[test]
    fn quadratic_remainder_scales_quadratically() {
        let chart = uniform_chart(2, 24, 0.0, 1.0, true).unwrap();
        let g = MetricField::flat(&chart);
        let h = SymTensorField::from_fn(&chart, |x, out| {
            let s = (2.0 * std::f64::consts::PI * x[0]).sin()
                * (2.0 * std::f64::consts::PI * x[1]).cos();
            out[0] = 0.5 * s;
            out[1] = 0.2 * s;
            out[2] = -0.3 * s;
        });
        // ||Q(t h)|| ~ t^2: fit the slope over a decade
        let mut logs = Vec::new();
        for &t in &[1e-4, 1e-3, 1e-2, 1e-1] {
            let (qs, qv) = quadratic_remainder(&g, &h.scaled(t), FdOrder::Four).unwrap();
            let norm = qs.sup_norm() + qv.abs();
            logs.push((t.ln(), norm.ln()));
        }
        let slope = (logs.last().unwrap().1 - logs[0].1) / (logs.last().unwrap().0 - logs[0].0);
        assert!((slope - 2.0).abs() < 0.05, "slope {slope}");
    }
}
