//! Exact linearization of the discrete curvature map.
//!
//! The scalar-curvature pipeline (metric -> inverse -> metric derivatives ->
//! lower/upper Christoffel -> Ricci -> trace) is differentiated stage by
//! stage, so the resulting operator is the derivative of the discrete
//! `Theta` to round-off. That exactness is what makes the quadratic
//! remainder genuinely quadratic and the fixed-base iteration contract
//! cleanly; an independent discretization of the displayed continuum formula
//! would differ from the discrete derivative at stencil order and leak a
//! linear term into both.

use super::{CurvaturePipeline, DiffOps};
use crate::error::FieldError;
use crate::exec;
use crate::field::{
    ensure_same_chart, sym_index, sym_len, sym_mult, sym_pairs, MetricField, ScalarField,
    SymTensorField,
};
use crate::sparse::Csr;

/// Forward-mode derivative of the discrete `(R, V)` in direction `h`.
pub fn linearized_theta_direct(
    g: &MetricField,
    h: &SymTensorField,
    ops: &DiffOps,
) -> Result<(ScalarField, f64), FieldError> {
    ensure_same_chart(g.chart(), &h.chart, "linearized_theta")?;
    let chart = g.chart();
    let n = chart.dim();
    let m = sym_len(n);
    let nn = chart.n_nodes();
    let width = n * m;
    let pipe = CurvaturePipeline::build(g, ops)?;
    let pairs = sym_pairs(n);

    let dh: Vec<Vec<f64>> = (0..n).map(|a| ops.d1(&h.data, m, a)).collect();
    let d2h: Vec<Vec<f64>> = pairs
        .iter()
        .map(|&(a, b)| ops.d2_mixed(&h.data, m, a, b))
        .collect();

    // delta(g^{-1}) = -g^{-1} h g^{-1}
    let mut dginv = vec![0.0; nn * m];
    exec::for_each_node_chunk(&mut dginv, m, |node, out| {
        let gi = &pipe.ginv[node * m..(node + 1) * m];
        let hv = h.at(node);
        for p in 0..n {
            for q in p..n {
                let mut s = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        s += gi[sym_index(p, a, n)] * gi[sym_index(q, b, n)]
                            * hv[sym_index(a, b, n)];
                    }
                }
                out[sym_index(p, q, n)] = -s;
            }
        }
    });

    // delta of lower and upper Christoffel fields
    let mut dgl = vec![0.0; nn * width];
    exec::for_each_node_chunk(&mut dgl, width, |node, out| {
        for l in 0..n {
            for j in 0..n {
                for k in j..n {
                    out[l * m + sym_index(j, k, n)] = 0.5
                        * (dh[j][node * m + sym_index(k, l, n)]
                            + dh[k][node * m + sym_index(j, l, n)]
                            - dh[l][node * m + sym_index(j, k, n)]);
                }
            }
        }
    });
    let mut dgu = vec![0.0; nn * width];
    exec::for_each_node_chunk(&mut dgu, width, |node, out| {
        let gi = &pipe.ginv[node * m..(node + 1) * m];
        let dgi = &dginv[node * m..(node + 1) * m];
        let glv = &pipe.gl[node * width..(node + 1) * width];
        let dglv = &dgl[node * width..(node + 1) * width];
        for l in 0..n {
            for c in 0..m {
                let mut s = 0.0;
                for p in 0..n {
                    s += dgi[sym_index(l, p, n)] * glv[p * m + c]
                        + gi[sym_index(l, p, n)] * dglv[p * m + c];
                }
                out[l * m + c] = s;
            }
        }
    });

    let d2 = |pa: usize, pb: usize, comp: usize, node: usize| -> f64 {
        pipe.d2g[sym_index(pa, pb, n)][node * m + comp]
    };
    let dd2 = |pa: usize, pb: usize, comp: usize, node: usize| -> f64 {
        d2h[sym_index(pa, pb, n)][node * m + comp]
    };

    let data: Vec<f64> = exec::map_collect(nn, |node| {
        let gi = &pipe.ginv[node * m..(node + 1) * m];
        let dgi = &dginv[node * m..(node + 1) * m];
        let glv = &pipe.gl[node * width..(node + 1) * width];
        let guv = &pipe.gu[node * width..(node + 1) * width];
        let dglv = &dgl[node * width..(node + 1) * width];
        let dguv = &dgu[node * width..(node + 1) * width];
        let ric = &pipe.ricci[node * m..(node + 1) * m];
        let mut dr = 0.0;
        for j in 0..n {
            for k in 0..n {
                // delta Ric_{jk}
                let mut dric = 0.0;
                for mm in 0..n {
                    for i in 0..n {
                        let gmi = gi[sym_index(mm, i, n)];
                        let dgmi = dgi[sym_index(mm, i, n)];
                        // bracket value (for the delta g^{mi} term)
                        let mut br = 0.5
                            * (d2(i, k, sym_index(j, mm, n), node)
                                + d2(j, mm, sym_index(i, k, n), node)
                                - d2(i, mm, sym_index(j, k, n), node)
                                - d2(j, k, sym_index(i, mm, n), node));
                        let mut dbr = 0.5
                            * (dd2(i, k, sym_index(j, mm, n), node)
                                + dd2(j, mm, sym_index(i, k, n), node)
                                - dd2(i, mm, sym_index(j, k, n), node)
                                - dd2(j, k, sym_index(i, mm, n), node));
                        for l in 0..n {
                            let cml = sym_index(mm, l, n);
                            let cjk = sym_index(j, k, n);
                            let cik = sym_index(i, k, n);
                            br -= pipe.dg[i][node * m + cml] * guv[l * m + cjk];
                            br += pipe.dg[j][node * m + cml] * guv[l * m + cik];
                            dbr -= dh[i][node * m + cml] * guv[l * m + cjk]
                                + pipe.dg[i][node * m + cml] * dguv[l * m + cjk];
                            dbr += dh[j][node * m + cml] * guv[l * m + cik]
                                + pipe.dg[j][node * m + cml] * dguv[l * m + cik];
                        }
                        for p in 0..n {
                            let cip = sym_index(i, p, n);
                            let cjp = sym_index(j, p, n);
                            let cjk = sym_index(j, k, n);
                            let cik = sym_index(i, k, n);
                            br += glv[mm * m + cip] * guv[p * m + cjk]
                                - glv[mm * m + cjp] * guv[p * m + cik];
                            dbr += dglv[mm * m + cip] * guv[p * m + cjk]
                                + glv[mm * m + cip] * dguv[p * m + cjk]
                                - dglv[mm * m + cjp] * guv[p * m + cik]
                                - glv[mm * m + cjp] * dguv[p * m + cik];
                        }
                        dric += dgmi * br + gmi * dbr;
                    }
                }
                let c = sym_index(j, k, n);
                dr += dgi[c] * ric[c] + gi[c] * dric;
            }
        }
        dr
    });

    let dvol = super::dvolume(g, h)?;
    Ok((ScalarField { chart: chart.clone(), data }, dvol))
}

/// Assemble the exact Jacobian of the discrete scalar curvature as a sparse
/// matrix `(N x N m)`.
pub(crate) fn scalar_jacobian_matrix(
    g: &MetricField,
    ops: &DiffOps,
    d1: &[Csr],
    d2mix: &[Csr],
) -> Result<Csr, FieldError> {
    let chart = g.chart();
    let n = chart.dim();
    let m = sym_len(n);
    let nn = chart.n_nodes();
    let pairs = sym_pairs(n);
    let pipe = CurvaturePipeline::build(g, ops)?;
    let width = n * m;

    let ginv_at = |node: usize, a: usize, b: usize| pipe.ginv[node * m + sym_index(a, b, n)];
    let gl_at = |node: usize, l: usize, c: usize| pipe.gl[node * width + l * m + c];
    let gu_at = |node: usize, l: usize, c: usize| pipe.gu[node * width + l * m + c];

    // per-component rows of delta(g^{-1}) as N x Nm matrices
    let binv: Vec<Csr> = pairs
        .iter()
        .map(|&(p, q)| {
            let mut triplets = Vec::with_capacity(nn * m);
            for node in 0..nn {
                for (cab, &(a, b)) in pairs.iter().enumerate() {
                    let mut v = ginv_at(node, p, a) * ginv_at(node, q, b);
                    if a != b {
                        v += ginv_at(node, p, b) * ginv_at(node, q, a);
                    }
                    triplets.push((node, node * m + cab, -v));
                }
            }
            Csr::from_triplets(nn, nn * m, &triplets)
        })
        .collect();

    // delta(Gamma_lower)[l][(jk)]: pure stencil blocks, node independent
    let glj: Vec<Vec<Csr>> = (0..n)
        .map(|l| {
            pairs
                .iter()
                .map(|&(j, k)| {
                    let mut acc = d1[j].expand_cols(m, sym_index(k, l, n));
                    acc = acc.add_scaled(1.0, &d1[k].expand_cols(m, sym_index(j, l, n)), 1.0);
                    acc = acc.add_scaled(1.0, &d1[l].expand_cols(m, sym_index(j, k, n)), -1.0);
                    acc.scaled(0.5)
                })
                .collect()
        })
        .collect();

    // delta(Gamma_upper)[l][(jk)]
    let guj: Vec<Vec<Csr>> = (0..n)
        .map(|l| {
            pairs
                .iter()
                .enumerate()
                .map(|(c, _)| {
                    let mut acc = Csr::zeros(nn, nn * m);
                    for p in 0..n {
                        let coeff: Vec<f64> = (0..nn).map(|t| gl_at(t, p, c)).collect();
                        acc = acc.add_scaled(
                            1.0,
                            &binv[sym_index(l, p, n)].scale_rows(&coeff),
                            1.0,
                        );
                        let gup: Vec<f64> = (0..nn).map(|t| ginv_at(t, l, p)).collect();
                        acc = acc.add_scaled(1.0, &glj[p][c].scale_rows(&gup), 1.0);
                    }
                    acc
                })
                .collect()
        })
        .collect();

    // bracket value for the delta g^{mi} term
    let bracket = |node: usize, mm: usize, i: usize, j: usize, k: usize| -> f64 {
        let d2v = |pa: usize, pb: usize, comp: usize| {
            pipe.d2g[sym_index(pa, pb, n)][node * m + comp]
        };
        let mut br = 0.5
            * (d2v(i, k, sym_index(j, mm, n)) + d2v(j, mm, sym_index(i, k, n))
                - d2v(i, mm, sym_index(j, k, n))
                - d2v(j, k, sym_index(i, mm, n)));
        for l in 0..n {
            br -= pipe.dg[i][node * m + sym_index(mm, l, n)] * gu_at(node, l, sym_index(j, k, n));
            br += pipe.dg[j][node * m + sym_index(mm, l, n)] * gu_at(node, l, sym_index(i, k, n));
        }
        for p in 0..n {
            br += gl_at(node, mm, sym_index(i, p, n)) * gu_at(node, p, sym_index(j, k, n));
            br -= gl_at(node, mm, sym_index(j, p, n)) * gu_at(node, p, sym_index(i, k, n));
        }
        br
    };

    // Ricci Jacobian blocks per packed component
    let d2m = |a: usize, b: usize| -> &Csr { &d2mix[sym_index(a, b, n)] };
    let mut ricj: Vec<Csr> = Vec::with_capacity(m);
    for &(j, k) in &pairs {
        let mut acc = Csr::zeros(nn, nn * m);
        for mm in 0..n {
            for i in 0..n {
                let gmi: Vec<f64> = (0..nn).map(|t| ginv_at(t, mm, i)).collect();
                if gmi.iter().all(|&v| v == 0.0) {
                    continue;
                }
                // delta g^{mi} bracket term
                let coeff: Vec<f64> = (0..nn).map(|t| bracket(t, mm, i, j, k)).collect();
                acc = acc.add_scaled(1.0, &binv[sym_index(mm, i, n)].scale_rows(&coeff), 1.0);
                // second-derivative terms
                let half_gmi: Vec<f64> = gmi.iter().map(|v| 0.5 * v).collect();
                let mut d2part = d2m(i, k).expand_cols(m, sym_index(j, mm, n));
                d2part = d2part.add_scaled(
                    1.0,
                    &d2m(j, mm).expand_cols(m, sym_index(i, k, n)),
                    1.0,
                );
                d2part = d2part.add_scaled(
                    1.0,
                    &d2m(i, mm).expand_cols(m, sym_index(j, k, n)),
                    -1.0,
                );
                d2part = d2part.add_scaled(
                    1.0,
                    &d2m(j, k).expand_cols(m, sym_index(i, mm, n)),
                    -1.0,
                );
                acc = acc.add_scaled(1.0, &d2part.scale_rows(&half_gmi), 1.0);
                // first-derivative-of-h terms and chained Christoffel terms
                for l in 0..n {
                    let cml = sym_index(mm, l, n);
                    let cjk = sym_index(j, k, n);
                    let cik = sym_index(i, k, n);
                    let cu1: Vec<f64> =
                        (0..nn).map(|t| -ginv_at(t, mm, i) * gu_at(t, l, cjk)).collect();
                    acc = acc.add_scaled(1.0, &d1[i].expand_cols(m, cml).scale_rows(&cu1), 1.0);
                    let cu2: Vec<f64> = (0..nn)
                        .map(|t| -ginv_at(t, mm, i) * pipe.dg[i][t * m + cml])
                        .collect();
                    acc = acc.add_scaled(1.0, &guj[l][cjk].scale_rows(&cu2), 1.0);
                    let cu3: Vec<f64> =
                        (0..nn).map(|t| ginv_at(t, mm, i) * gu_at(t, l, cik)).collect();
                    acc = acc.add_scaled(1.0, &d1[j].expand_cols(m, cml).scale_rows(&cu3), 1.0);
                    let cu4: Vec<f64> = (0..nn)
                        .map(|t| ginv_at(t, mm, i) * pipe.dg[j][t * m + cml])
                        .collect();
                    acc = acc.add_scaled(1.0, &guj[l][cik].scale_rows(&cu4), 1.0);
                }
                for p in 0..n {
                    let cip = sym_index(i, p, n);
                    let cjp = sym_index(j, p, n);
                    let cjk = sym_index(j, k, n);
                    let cik = sym_index(i, k, n);
                    let q1: Vec<f64> =
                        (0..nn).map(|t| ginv_at(t, mm, i) * gu_at(t, p, cjk)).collect();
                    acc = acc.add_scaled(1.0, &glj[mm][cip].scale_rows(&q1), 1.0);
                    let q2: Vec<f64> =
                        (0..nn).map(|t| ginv_at(t, mm, i) * gl_at(t, mm, cip)).collect();
                    acc = acc.add_scaled(1.0, &guj[p][cjk].scale_rows(&q2), 1.0);
                    let q3: Vec<f64> =
                        (0..nn).map(|t| -ginv_at(t, mm, i) * gu_at(t, p, cik)).collect();
                    acc = acc.add_scaled(1.0, &glj[mm][cjp].scale_rows(&q3), 1.0);
                    let q4: Vec<f64> =
                        (0..nn).map(|t| -ginv_at(t, mm, i) * gl_at(t, mm, cjp)).collect();
                    acc = acc.add_scaled(1.0, &guj[p][cik].scale_rows(&q4), 1.0);
                }
            }
        }
        ricj.push(acc);
    }

    // delta R = mult_c (dginv_c Ric_c + ginv_c dRic_c)
    let mut rj = Csr::zeros(nn, nn * m);
    for (c, &(i, j)) in pairs.iter().enumerate() {
        let mu = sym_mult(i, j);
        let ric_c: Vec<f64> = (0..nn).map(|t| mu * pipe.ricci[t * m + c]).collect();
        rj = rj.add_scaled(1.0, &binv[c].scale_rows(&ric_c), 1.0);
        let gi_c: Vec<f64> = (0..nn).map(|t| mu * pipe.ginv[t * m + c]).collect();
        rj = rj.add_scaled(1.0, &ricj[c].scale_rows(&gi_c), 1.0);
    }
    Ok(rj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::uniform_chart;
    use crate::geometry::{theta, FdOrder};

    #[test]
    fn direct_jacobian_matches_difference_quotient_to_round_off() {
        for periodic in [true, false] {
            let chart = uniform_chart(2, 16, 0.0, 1.0, periodic).unwrap();
            let g = MetricField::from_fn(&chart, |x, out| {
                let b = 0.1 * (2.0 * std::f64::consts::PI * x[0]).sin()
                    * (2.0 * std::f64::consts::PI * x[1]).cos();
                out[0] = 1.0 + b;
                out[1] = 0.3 * b;
                out[2] = 1.0 - 0.4 * b;
            })
            .unwrap();
            let h = SymTensorField::from_fn(&chart, |x, out| {
                let s = (2.0 * std::f64::consts::PI * (x[0] + 0.3 * x[1])).cos();
                out[0] = 0.5 * s;
                out[1] = -0.2 * s;
                out[2] = 0.3 * s;
            });
            let ops = DiffOps::new(&chart, FdOrder::Four);
            let (lin, dvol) = linearized_theta_direct(&g, &h, &ops).unwrap();
            // symmetric quotient with Richardson extrapolation: kills the
            // cubic term; the remaining error is O(t^4) + round-off
            let t = 1e-4;
            let quot = |t: f64| -> (Vec<f64>, f64) {
                let p = theta(&g.add_scaled(&h, t).unwrap(), FdOrder::Four).unwrap();
                let mm = theta(&g.add_scaled(&h, -t).unwrap(), FdOrder::Four).unwrap();
                (
                    p.scalar_curvature
                        .data
                        .iter()
                        .zip(mm.scalar_curvature.data.iter())
                        .map(|(a, b)| (a - b) / (2.0 * t))
                        .collect(),
                    (p.volume - mm.volume) / (2.0 * t),
                )
            };
            let (q1, v1) = quot(t);
            let (q2, v2) = quot(t / 2.0);
            for node in (0..chart.n_nodes()).step_by(7) {
                let extrap = (4.0 * q2[node] - q1[node]) / 3.0;
                assert!(
                    (lin.data[node] - extrap).abs() < 1e-6 * (1.0 + extrap.abs()),
                    "periodic={periodic} node {node}: {} vs {}",
                    lin.data[node],
                    extrap
                );
            }
            let vextrap = (4.0 * v2 - v1) / 3.0;
            assert!((dvol - vextrap).abs() < 1e-9);
        }
    }
}
