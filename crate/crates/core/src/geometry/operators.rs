//! Assembled sparse forms of the linearized operators.
//!
//! `S_g` is assembled once as a sparse matrix; the adjoint used by the solver
//! is its exact transpose under the discrete weighted L2 pairings, so the
//! normal operator of the linearized problem is symmetric by construction.
//! The formula-path discretization of `L_g^*` (see
//! [`crate::geometry::adjoint_linearized_scalar`]) stays around as an
//! independent consistency oracle and as the kernel-detection operator.

use super::{christoffel_with, curvature_with, DiffOps, FdOrder};
use crate::chart::ChartSpec;
use crate::error::FieldError;
use crate::field::{
    ensure_same_chart, sym_index, sym_len, sym_mult, sym_pairs, MetricField, ScalarField,
    SymTensorField,
};
use crate::sparse::Csr;
use nalgebra::DMatrix;

/// First-derivative matrix along one axis over flat node indices.
pub(crate) fn axis_matrix(chart: &ChartSpec, ops: &DiffOps, axis: usize, second: bool) -> Csr {
    let n_nodes = chart.n_nodes();
    let strides = chart.strides();
    let stride = strides[axis];
    let nodes_a = chart.axis(axis).nodes;
    let op = if second { ops.d2_op(axis) } else { ops.d1_op(axis) };
    let mut triplets = Vec::new();
    for node in 0..n_nodes {
        let ia = (node / stride) % nodes_a;
        let base = node - ia * stride;
        for &(j, w) in op.row(ia) {
            triplets.push((node, base + j as usize * stride, w));
        }
    }
    Csr::from_triplets(n_nodes, n_nodes, &triplets)
}

pub(crate) struct GeometryData {
    pub(crate) ginv: Vec<f64>,
    pub(crate) sqrt_det: Vec<f64>,
    pub(crate) gamma_data: Vec<f64>,
    #[allow(dead_code)]
    pub(crate) ricci: Vec<f64>,
    /// contracted drift beta^c = g^{ab} Gamma^c_{ab}
    pub(crate) beta: Vec<f64>,
}

pub(crate) fn geometry_data(g: &MetricField, ops: &DiffOps) -> Result<GeometryData, FieldError> {
    let n = g.chart().dim();
    let m = sym_len(n);
    let nn = g.chart().n_nodes();
    let ginv = g.inverses()?;
    let sqrt_det = g.sqrt_dets();
    let gamma = christoffel_with(g, ops)?;
    let curv = curvature_with(g, ops)?;
    let mut beta = vec![0.0; nn * n];
    for node in 0..nn {
        let gi = &ginv[node * m..(node + 1) * m];
        let ga = gamma.at(node);
        for c in 0..n {
            let mut s = 0.0;
            for a in 0..n {
                for b in 0..n {
                    s += gi[sym_index(a, b, n)] * ga[c * m + sym_index(a, b, n)];
                }
            }
            beta[node * n + c] = s;
        }
    }
    Ok(GeometryData {
        ginv,
        sqrt_det,
        gamma_data: gamma.data,
        ricci: curv.ricci.data,
        beta,
    })
}

/// Scalar Laplace-Beltrami operator as a matrix.
pub(crate) fn laplacian_matrix(
    chart: &ChartSpec,
    ops: &DiffOps,
    geo: &GeometryData,
    d1: &[Csr],
    d2: &[Csr],
) -> Csr {
    let n = chart.dim();
    let m = sym_len(n);
    let nn = chart.n_nodes();
    let comp = |c: usize| -> Vec<f64> { (0..nn).map(|i| geo.ginv[i * m + c]).collect() };
    let mut lap = Csr::zeros(nn, nn);
    for a in 0..n {
        lap = lap.add_scaled(1.0, &d2[a].scale_rows(&comp(sym_index(a, a, n))), 1.0);
    }
    for a in 0..n {
        for b in a + 1..n {
            let mixed = d1[a].matmul(&d1[b]);
            let coeff: Vec<f64> = (0..nn).map(|i| 2.0 * geo.ginv[i * m + sym_index(a, b, n)]).collect();
            lap = lap.add_scaled(1.0, &mixed.scale_rows(&coeff), 1.0);
        }
    }
    for c in 0..n {
        let bc: Vec<f64> = (0..nn).map(|i| geo.beta[i * n + c]).collect();
        lap = lap.add_scaled(1.0, &d1[c].scale_rows(&bc), -1.0);
    }
    let _ = ops;
    lap
}

/// The assembled `S_g = (L_g, DV_g)` with its exact-transpose adjoint.
pub struct ScalarVolumeOps {
    pub chart: ChartSpec,
    pub order: FdOrder,
    /// `(N+1) x (N m)`; rows `0..N` are `L_g`, the last row is `DV_g`.
    pub a: Csr,
    at: Csr,
    /// Scalar-slot L2 weights `sqrt(det g) * cellvol`; the volume slot has
    /// weight 1.
    pub ms: Vec<f64>,
    /// Per-node `m x m` tensor Gram blocks (weighted), flattened.
    mh: Vec<f64>,
    mh_inv: Vec<f64>,
    dim: usize,
}

impl ScalarVolumeOps {
    pub fn assemble(g: &MetricField, order: FdOrder) -> Result<Self, FieldError> {
        let chart = g.chart().clone();
        let n = chart.dim();
        let m = sym_len(n);
        let nn = chart.n_nodes();
        let ops = DiffOps::new(&chart, order);
        let geo = geometry_data(g, &ops)?;
        let d1: Vec<Csr> = (0..n).map(|a| axis_matrix(&chart, &ops, a, false)).collect();
        let pairs = sym_pairs(n);
        let d2mix: Vec<Csr> = pairs
            .iter()
            .map(|&(a, b)| {
                if a == b {
                    axis_matrix(&chart, &ops, a, true)
                } else {
                    d1[a].matmul(&d1[b])
                }
            })
            .collect();

        // exact Jacobian of the discrete scalar curvature
        let a_scal = super::jacobian::scalar_jacobian_matrix(g, &ops, &d1, &d2mix)?;

        // volume variation row
        let weights = chart.cell_weights();
        let mut vol_triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(nn * m);
        for node in 0..nn {
            let w = 0.5 * geo.sqrt_det[node] * weights[node];
            for (c, &(i, j)) in pairs.iter().enumerate() {
                vol_triplets.push((0, node * m + c, w * sym_mult(i, j) * geo.ginv[node * m + c]));
            }
        }
        let vol_row = Csr::from_triplets(1, nn * m, &vol_triplets);
        let a = a_scal.vstack(&vol_row);
        let at = a.transpose();

        let ms: Vec<f64> = (0..nn).map(|i| geo.sqrt_det[i] * weights[i]).collect();

        // weighted tensor Gram per node:
        // G[p][q] = mult_p mult_q (g^{ia}g^{jb} + g^{ib}g^{ja})/2 * w sqrt(det)
        let mut mh = vec![0.0; nn * m * m];
        let mut mh_inv = vec![0.0; nn * m * m];
        for node in 0..nn {
            let gi = &geo.ginv[node * m..(node + 1) * m];
            let w = geo.sqrt_det[node] * weights[node];
            let mut block = DMatrix::<f64>::zeros(m, m);
            for (p, &(i, j)) in pairs.iter().enumerate() {
                for (q, &(aa, bb)) in pairs.iter().enumerate() {
                    let v = 0.5
                        * (gi[sym_index(i, aa, n)] * gi[sym_index(j, bb, n)]
                            + gi[sym_index(i, bb, n)] * gi[sym_index(j, aa, n)]);
                    block[(p, q)] = sym_mult(i, j) * sym_mult(aa, bb) * v * w;
                }
            }
            mh[node * m * m..(node + 1) * m * m].copy_from_slice(block.transpose().as_slice());
            let inv = block
                .clone()
                .try_inverse()
                .ok_or(FieldError::DegenerateMetric { node, min_eig: 0.0 })?;
            mh_inv[node * m * m..(node + 1) * m * m].copy_from_slice(inv.transpose().as_slice());
        }

        Ok(ScalarVolumeOps { chart, order, a, at, ms, mh, mh_inv, dim: n })
    }

    #[inline]
    pub fn n_nodes(&self) -> usize {
        self.ms.len()
    }

    #[inline]
    pub fn n_comp(&self) -> usize {
        sym_len(self.dim)
    }

    /// `S_g(h) = (L_g(h), DV_g(h))`, exactly linear in `h`.
    pub fn s_op(&self, h: &SymTensorField) -> Result<(ScalarField, f64), FieldError> {
        ensure_same_chart(&self.chart, &h.chart, "s_op")?;
        let out = self.a.matvec(&h.data);
        let nn = self.n_nodes();
        Ok((
            ScalarField { chart: self.chart.clone(), data: out[..nn].to_vec() },
            out[nn],
        ))
    }

    /// Scalar part of `S_g`.
    pub fn linearized_scalar(&self, h: &SymTensorField) -> Result<ScalarField, FieldError> {
        Ok(self.s_op(h)?.0)
    }

    /// Apply the raw transpose `A^T y` (no mass matrices).
    pub fn apply_at(&self, y: &[f64]) -> Vec<f64> {
        self.at.matvec(y)
    }

    /// Apply `A x` for a packed tensor coefficient vector.
    pub fn apply_a(&self, x: &[f64]) -> Vec<f64> {
        self.a.matvec(x)
    }

    /// One `m x m` inverse Gram block (row-major).
    #[inline]
    pub fn mh_inv_block(&self, node: usize) -> &[f64] {
        let m = self.n_comp();
        &self.mh_inv[node * m * m..(node + 1) * m * m]
    }

    /// Per-node solve with the weighted tensor Gram blocks: `M_h^{-1} v`.
    pub fn apply_mh_inv(&self, v: &[f64]) -> Vec<f64> {
        let m = self.n_comp();
        let mut out = vec![0.0; v.len()];
        crate::exec::for_each_node_chunk(&mut out, m, |node, chunk| {
            let block = &self.mh_inv[node * m * m..(node + 1) * m * m];
            let vin = &v[node * m..(node + 1) * m];
            for r in 0..m {
                let mut s = 0.0;
                for c in 0..m {
                    s += block[r * m + c] * vin[c];
                }
                chunk[r] = s;
            }
        });
        out
    }

    /// Per-node multiply by the weighted tensor Gram blocks: `M_h v`.
    pub fn apply_mh(&self, v: &[f64]) -> Vec<f64> {
        let m = self.n_comp();
        let mut out = vec![0.0; v.len()];
        crate::exec::for_each_node_chunk(&mut out, m, |node, chunk| {
            let block = &self.mh[node * m * m..(node + 1) * m * m];
            let vin = &v[node * m..(node + 1) * m];
            for r in 0..m {
                let mut s = 0.0;
                for c in 0..m {
                    s += block[r * m + c] * vin[c];
                }
                chunk[r] = s;
            }
        });
        out
    }

    /// Transpose-built adjoint `S_g^*(f, a) = M_h^{-1} A^T M_s (f, a)`:
    /// the exact adjoint of `s_op` under the discrete pairings.
    pub fn s_adjoint(&self, f: &ScalarField, a: f64) -> Result<SymTensorField, FieldError> {
        ensure_same_chart(&self.chart, &f.chart, "s_adjoint")?;
        let nn = self.n_nodes();
        let mut y = vec![0.0; nn + 1];
        for i in 0..nn {
            y[i] = self.ms[i] * f.data[i];
        }
        y[nn] = a;
        let z = self.at.matvec(&y);
        let data = self.apply_mh_inv(&z);
        Ok(SymTensorField { chart: self.chart.clone(), data })
    }

    /// Discrete pairing on the scalar-and-volume side:
    /// `<(sigma, tau), (f, a)> = sum sigma f w + tau a`.
    pub fn pair_scalar(&self, sigma: &ScalarField, tau: f64, f: &ScalarField, a: f64) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n_nodes() {
            s += sigma.data[i] * f.data[i] * self.ms[i];
        }
        s + tau * a
    }

    /// Discrete pairing on the tensor side with the weighted Gram blocks.
    pub fn pair_tensor(&self, h: &SymTensorField, k: &SymTensorField) -> f64 {
        let mk = self.apply_mh(&k.data);
        h.data.iter().zip(mk.iter()).map(|(a, b)| a * b).sum()
    }

    /// Weighted L2 norm of a tensor field under the Gram blocks.
    pub fn tensor_l2(&self, h: &SymTensorField) -> f64 {
        self.pair_tensor(h, h).sqrt()
    }
}

/// Covariant Hessian component matrices `d2_pq - Gamma^k_pq d_k`, one
/// `N x N` block per packed component.
pub(crate) fn covariant_hessian_blocks(
    chart: &ChartSpec,
    geo: &GeometryData,
    d1: &[Csr],
    d2: &[Csr],
) -> Vec<Csr> {
    let n = chart.dim();
    let m = sym_len(n);
    let nn = chart.n_nodes();
    sym_pairs(n)
        .iter()
        .enumerate()
        .map(|(c, &(p, q))| {
            let mut hess_c = if p == q {
                d2[p].clone()
            } else {
                d1[p].matmul(&d1[q])
            };
            for k in 0..n {
                let coeff: Vec<f64> = (0..nn)
                    .map(|node| geo.gamma_data[node * n * m + k * m + c])
                    .collect();
                hess_c = hess_c.add_scaled(1.0, &d1[k].scale_rows(&coeff), -1.0);
            }
            hess_c
        })
        .collect()
}

/// Formula-path matrix of `(f, a) -> S_g^*(f, a)`, shape `(N m) x (N + 1)`.
/// Rows are packed tensor components; the final column is the `a` direction
/// `(1/2) g`.
pub fn s_star_formula_matrix(g: &MetricField, order: FdOrder) -> Result<Csr, FieldError> {
    let chart = g.chart().clone();
    let n = chart.dim();
    let m = sym_len(n);
    let nn = chart.n_nodes();
    let ops = DiffOps::new(&chart, order);
    let geo = geometry_data(g, &ops)?;
    let d1: Vec<Csr> = (0..n).map(|a| axis_matrix(&chart, &ops, a, false)).collect();
    let d2: Vec<Csr> = (0..n).map(|a| axis_matrix(&chart, &ops, a, true)).collect();
    let lap = laplacian_matrix(&chart, &ops, &geo, &d1, &d2);
    let pairs = sym_pairs(n);

    let hess = covariant_hessian_blocks(&chart, &geo, &d1, &d2);
    let mut blocks = Csr::zeros(nn * m, nn);
    for (c, _) in pairs.iter().enumerate() {
        // -(Lap f) g_c
        let gc: Vec<f64> = (0..nn).map(|node| g.at(node)[c]).collect();
        let mut row = hess[c].add_scaled(1.0, &lap.scale_rows(&gc), -1.0);
        // -f Ric_c
        let ric_c: Vec<f64> = (0..nn).map(|node| geo.ricci[node * m + c]).collect();
        row = row.add_scaled(1.0, &Csr::from_diag(&ric_c), -1.0);
        blocks = blocks.add_scaled(1.0, &row.expand_rows(m, c), 1.0);
    }
    // append the a-column: (1/2) g packed
    let a_col: Vec<(usize, usize, f64)> = (0..nn)
        .flat_map(|node| {
            (0..m)
                .map(move |c| (node * m + c, 0usize, 0.5 * g.at(node)[c]))
                .collect::<Vec<_>>()
        })
        .collect();
    let a_col = Csr::from_triplets(nn * m, 1, &a_col);
    // widen and merge
    let widened = blocks.pad_cols(1);
    let mut shift = a_col; // column 0 -> column nn
    shift = shift.expand_cols(1, 0); // no-op, keeps types uniform
    let shifted = {
        // move the single column to index nn
        let mut triplets = Vec::new();
        for r in 0..shift.rows {
            let (cols, vals) = shift.row(r);
            for (&_c, &v) in cols.iter().zip(vals.iter()) {
                triplets.push((r, nn, v));
            }
        }
        Csr::from_triplets(nn * m, nn + 1, &triplets)
    };
    Ok(widened.add_scaled(1.0, &shifted, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::uniform_chart;
    use crate::geometry::s_adjoint_formula;
    use rand::{Rng, SeedableRng};

    fn wavy_metric(chart: &ChartSpec) -> MetricField {
        MetricField::from_fn(chart, |x, out| {
            let b = 0.1 * (2.0 * std::f64::consts::PI * x[0]).sin()
                * (2.0 * std::f64::consts::PI * x[1]).cos();
            out[0] = 1.0 + b;
            out[1] = 0.25 * b;
            out[2] = 1.0 - 0.5 * b;
        })
        .unwrap()
    }

    fn random_tensor(chart: &ChartSpec, seed: u64) -> SymTensorField {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut t = SymTensorField::zeros(chart);
        for v in t.data.iter_mut() {
            *v = rng.random::<f64>() - 0.5;
        }
        t
    }

    fn random_scalar(chart: &ChartSpec, seed: u64) -> ScalarField {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut f = ScalarField::zeros(chart);
        for v in f.data.iter_mut() {
            *v = rng.random::<f64>() - 0.5;
        }
        f
    }

    #[test]
    fn matrix_matches_direct_jacobian() {
        for periodic in [true, false] {
            let chart = uniform_chart(2, 16, 0.0, 1.0, periodic).unwrap();
            let g = wavy_metric(&chart);
            let ops = ScalarVolumeOps::assemble(&g, FdOrder::Four).unwrap();
            let h = random_tensor(&chart, 3);
            let (ls, dv) = ops.s_op(&h).unwrap();
            let diff_ops = DiffOps::new(&chart, FdOrder::Four);
            let (direct, dv_direct) =
                crate::geometry::jacobian::linearized_theta_direct(&g, &h, &diff_ops).unwrap();
            let scale = direct.sup_norm().max(1.0);
            for node in 0..chart.n_nodes() {
                assert!(
                    (ls.data[node] - direct.data[node]).abs() < 1e-9 * scale,
                    "periodic={periodic} node {node}: {} vs {}",
                    ls.data[node],
                    direct.data[node]
                );
            }
            assert!((dv - dv_direct).abs() < 1e-12 * dv_direct.abs().max(1.0));
        }
    }

    #[test]
    fn adjoint_pairing_is_exact() {
        let chart = uniform_chart(2, 12, 0.0, 1.0, true).unwrap();
        let g = wavy_metric(&chart);
        let ops = ScalarVolumeOps::assemble(&g, FdOrder::Four).unwrap();
        for seed in 0..3 {
            let h = random_tensor(&chart, seed);
            let f = random_scalar(&chart, seed + 100);
            let a = 0.7 - seed as f64;
            let (sh, dv) = ops.s_op(&h).unwrap();
            let adj = ops.s_adjoint(&f, a).unwrap();
            let lhs = ops.pair_scalar(&sh, dv, &f, a);
            let rhs = ops.pair_tensor(&h, &adj);
            let scale = lhs.abs().max(rhs.abs()).max(1e-30);
            assert!(
                ((lhs - rhs) / scale).abs() < 1e-12,
                "pairing mismatch {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn transpose_adjoint_consistent_with_formula_on_periodic_chart() {
        // on a periodic chart the two discretizations agree to stencil order;
        // the two-grid error ratio confirms O(h^4)
        let err_at = |nodes: usize| {
            let chart = uniform_chart(2, nodes, 0.0, 1.0, true).unwrap();
            let g = wavy_metric(&chart);
            let ops = ScalarVolumeOps::assemble(&g, FdOrder::Four).unwrap();
            let f = ScalarField::from_fn(&chart, |x| {
                (2.0 * std::f64::consts::PI * x[0]).cos()
                    * (2.0 * std::f64::consts::PI * x[1]).sin()
            });
            let a = 0.4;
            let transpose = ops.s_adjoint(&f, a).unwrap();
            let formula = s_adjoint_formula(&g, &f, a, FdOrder::Four).unwrap();
            transpose
                .data
                .iter()
                .zip(formula.data.iter())
                .map(|(x, y)| (x - y).abs())
                .fold(0.0_f64, f64::max)
        };
        let e1 = err_at(16);
        let e2 = err_at(32);
        let ratio = e1 / e2;
        assert!(ratio > 12.0 && ratio < 20.0, "two-grid ratio {ratio}");
    }

    #[test]
    fn formula_matrix_matches_formula_evaluation() {
        let chart = uniform_chart(2, 12, 0.0, 1.0, false).unwrap();
        let g = wavy_metric(&chart);
        let mat = s_star_formula_matrix(&g, FdOrder::Four).unwrap();
        let f = random_scalar(&chart, 9);
        let a = -0.3;
        let mut x = f.data.clone();
        x.push(a);
        let got = mat.matvec(&x);
        let want = s_adjoint_formula(&g, &f, a, FdOrder::Four).unwrap();
        let scale = want.data.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        for (k, (a, b)) in got.iter().zip(want.data.iter()).enumerate() {
            assert!((a - b).abs() < 1e-9 * scale, "entry {k}: {a} vs {b}");
        }
    }
}
