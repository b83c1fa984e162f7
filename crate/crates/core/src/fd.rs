//! Finite-difference stencils on uniform 1-D axes.
//!
//! Weights come from Fornberg's recurrence, so any derivative order, accuracy
//! order, and window placement (centered or one-sided at a box boundary) is
//! generated from one routine instead of hard-coded tables.

/// Interpolation-based weights for the `m`-th derivative at `z` from samples
/// at `xs`. Exact for polynomials of degree `xs.len() - 1`.
pub fn fornberg_weights(z: f64, xs: &[f64], m: usize) -> Vec<f64> {
    let n = xs.len();
    assert!(n > m, "need more than {m} points for derivative order {m}");
    let mut c = vec![vec![0.0_f64; n]; m + 1];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - z;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c.swap_remove(m)
}

/// Sparse 1-D derivative operator on one axis: per node, a window of source
/// nodes and weights. Periodic axes share one centered stencil with wrapped
/// indices; box axes switch to one-sided windows of the same accuracy order
/// near the ends.
#[derive(Debug, Clone)]
pub struct AxisOp {
    pub nodes: usize,
    entries: Vec<(u32, f64)>,
    offsets: Vec<u32>,
}

impl AxisOp {
    /// Build the `m`-th derivative operator of accuracy order `order` on an
    /// axis with `nodes` points, spacing `h`.
    pub fn new(nodes: usize, h: f64, periodic: bool, m: usize, order: usize) -> Self {
        assert!(m >= 1 && m <= 4);
        assert!(order == 2 || order == 4);
        // Centered window: odd size, accuracy >= order.
        let centered = if m % 2 == 1 { m + order } else { m + order - 1 };
        let centered = if centered % 2 == 0 { centered + 1 } else { centered };
        // One extra order at the one-sided closures: composed operators
        // (curvature differentiates its own output) lose one order where the
        // inner stencil error varies on the grid scale, and the extra order
        // restores uniform accuracy up to the boundary.
        let boundary = m + order + 1;
        assert!(
            nodes >= boundary && nodes >= centered,
            "axis with {nodes} nodes too short for derivative {m} at order {order}"
        );
        let r = (centered - 1) / 2;

        let mut entries = Vec::new();
        let mut offsets = Vec::with_capacity(nodes + 1);
        offsets.push(0u32);

        if periodic {
            let xs: Vec<f64> = (0..centered).map(|k| (k as f64 - r as f64) * h).collect();
            let w = fornberg_weights(0.0, &xs, m);
            for i in 0..nodes {
                for (k, &wk) in w.iter().enumerate() {
                    let j = (i + nodes + k - r) % nodes;
                    entries.push((j as u32, wk));
                }
                offsets.push(entries.len() as u32);
            }
        } else {
            for i in 0..nodes {
                let (start, len) = if i >= r && i + r < nodes {
                    (i - r, centered)
                } else if i < r {
                    (0, boundary)
                } else {
                    (nodes - boundary, boundary)
                };
                let xs: Vec<f64> = (0..len).map(|k| ((start + k) as f64 - i as f64) * h).collect();
                let w = fornberg_weights(0.0, &xs, m);
                for (k, &wk) in w.iter().enumerate() {
                    entries.push(((start + k) as u32, wk));
                }
                offsets.push(entries.len() as u32);
            }
        }
        AxisOp { nodes, entries, offsets }
    }

    /// Stencil row at node `i`: pairs of (source node, weight).
    #[inline]
    pub fn row(&self, i: usize) -> &[(u32, f64)] {
        &self.entries[self.offsets[i] as usize..self.offsets[i + 1] as usize]
    }

    /// Apply the stencil at node `i` to samples indexed along the axis.
    #[inline]
    pub fn apply_at<F: Fn(usize) -> f64>(&self, i: usize, sample: F) -> f64 {
        self.row(i).iter().map(|&(j, w)| w * sample(j as usize)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn classic_central_coefficients() {
        let xs: Vec<f64> = (-2..=2).map(|k| k as f64).collect();
        let d1 = fornberg_weights(0.0, &xs, 1);
        let want1 = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
        for (a, b) in d1.iter().zip(want1.iter()) {
            assert_relative_eq!(a, b, epsilon = 1e-14);
        }
        let d2 = fornberg_weights(0.0, &xs, 2);
        let want2 = [-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0];
        for (a, b) in d2.iter().zip(want2.iter()) {
            assert_relative_eq!(a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn box_axis_exact_on_polynomials() {
        // One-sided 4th-order windows are exact up to degree 4, including at
        // the boundary nodes.
        let n = 12;
        let h = 0.17;
        for m in 1..=2 {
            let op = AxisOp::new(n, h, false, m, 4);
            for i in 0..n {
                let x = |j: usize| j as f64 * h;
                let f = |j: usize| {
                    let t = x(j);
                    0.3 + 2.0 * t - t.powi(2) + 0.25 * t.powi(3) + 0.125 * t.powi(4)
                };
                let got = op.apply_at(i, f);
                let t = x(i);
                let want = match m {
                    1 => 2.0 - 2.0 * t + 0.75 * t.powi(2) + 0.5 * t.powi(3),
                    2 => -2.0 + 1.5 * t + 1.5 * t.powi(2),
                    _ => unreachable!(),
                };
                assert_relative_eq!(got, want, epsilon = 1e-10, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn periodic_axis_fourth_order_on_sine() {
        let n = 64;
        let h = 2.0 * std::f64::consts::PI / n as f64;
        let op = AxisOp::new(n, h, true, 1, 4);
        let f = |j: usize| (j as f64 * h).sin();
        let mut max_err: f64 = 0.0;
        for i in 0..n {
            let got = op.apply_at(i, f);
            max_err = max_err.max((got - (i as f64 * h).cos()).abs());
        }
        // h^4 scale for the 4th-order stencil
        assert!(max_err < 5.0 * h.powi(4), "err {max_err:e} vs h^4 {:e}", h.powi(4));
    }

    #[test]
    fn convergence_order_two_grid() {
        // Error ratio between h and h/2 should approach 2^order.
        let err = |n: usize, order: usize| {
            let h = 1.0 / (n - 1) as f64;
            let op = AxisOp::new(n, h, false, 2, order);
            let f = |j: usize| (2.5 * (j as f64 * h)).sin();
            (0..n)
                .map(|i| (op.apply_at(i, f) + 6.25 * (2.5 * (i as f64 * h)).sin()).abs())
                .fold(0.0_f64, f64::max)
        };
        for &order in &[2usize, 4] {
            let e1 = err(33, order);
            let e2 = err(65, order);
            let ratio = e1 / e2;
            let want = 2.0_f64.powi(order as i32);
            // boundary closures carry one extra order, so the max-error node
            // may decay at 2^(order+1)
            assert!(
                ratio > want * 0.6 && ratio < want * 2.6,
                "order {order}: ratio {ratio}, want in [{want}, {}]",
                2.0 * want
            );
        }
    }
}
