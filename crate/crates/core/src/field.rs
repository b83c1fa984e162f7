//! Fields sampled on a chart: scalars, symmetric 2-tensors, and metrics.
//!
//! Symmetric tensors are stored packed: per node the upper triangle in
//! row-lexicographic order, `m = n(n+1)/2` entries. All fields are node-major
//! with the chart's row-major flat ordering.

use crate::chart::ChartSpec;
use crate::error::FieldError;
use serde::{Deserialize, Serialize};

#[inline]
pub fn sym_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Packed index of component `(i, j)`; order of the pair does not matter.
#[inline]
pub fn sym_index(i: usize, j: usize, n: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * (2 * n - i + 1) / 2 + (j - i)
}

/// The `(i <= j)` pairs in packed order.
pub fn sym_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut v = Vec::with_capacity(sym_len(n));
    for i in 0..n {
        for j in i..n {
            v.push((i, j));
        }
    }
    v
}

/// Multiplicity of a packed component in full-index sums (1 diagonal, 2 off).
#[inline]
pub fn sym_mult(i: usize, j: usize) -> f64 {
    if i == j {
        1.0
    } else {
        2.0
    }
}

/// Unpack a packed symmetric matrix into a full row-major `n x n` buffer.
pub fn sym_unpack(packed: &[f64], n: usize, out: &mut [f64]) {
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = packed[sym_index(i, j, n)];
        }
    }
}

/// Determinant of a packed symmetric matrix.
pub fn sym_det(packed: &[f64], n: usize) -> f64 {
    match n {
        2 => packed[0] * packed[2] - packed[1] * packed[1],
        3 => {
            let (a, b, c, d, e, f) =
                (packed[0], packed[1], packed[2], packed[3], packed[4], packed[5]);
            a * (d * f - e * e) - b * (b * f - e * c) + c * (b * e - d * c)
        }
        _ => {
            let mut full = vec![0.0; n * n];
            sym_unpack(packed, n, &mut full);
            nalgebra::DMatrix::from_row_slice(n, n, &full).determinant()
        }
    }
}

/// Inverse of a packed symmetric matrix, packed. Returns `None` when the
/// determinant vanishes.
pub fn sym_inv(packed: &[f64], n: usize) -> Option<Vec<f64>> {
    let det = sym_det(packed, n);
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    match n {
        2 => {
            let (a, b, c) = (packed[0], packed[1], packed[2]);
            Some(vec![c / det, -b / det, a / det])
        }
        3 => {
            let (a, b, c, d, e, f) =
                (packed[0], packed[1], packed[2], packed[3], packed[4], packed[5]);
            // cofactors of [[a,b,c],[b,d,e],[c,e,f]]
            Some(vec![
                (d * f - e * e) / det,
                (c * e - b * f) / det,
                (b * e - c * d) / det,
                (a * f - c * c) / det,
                (b * c - a * e) / det,
                (a * d - b * b) / det,
            ])
        }
        _ => {
            let mut full = vec![0.0; n * n];
            sym_unpack(packed, n, &mut full);
            let m = nalgebra::DMatrix::from_row_slice(n, n, &full);
            let inv = m.try_inverse()?;
            let mut out = Vec::with_capacity(sym_len(n));
            for (i, j) in sym_pairs(n) {
                out.push(inv[(i, j)]);
            }
            Some(out)
        }
    }
}

/// Positive definiteness via Sylvester's criterion (leading minors).
pub fn sym_is_positive_definite(packed: &[f64], n: usize) -> bool {
    let mut full = vec![0.0; n * n];
    sym_unpack(packed, n, &mut full);
    // in-place Cholesky attempt
    for k in 0..n {
        let mut pivot = full[k * n + k];
        for r in 0..k {
            pivot -= full[k * n + r] * full[k * n + r];
        }
        if !(pivot > 0.0) {
            return false;
        }
        let s = pivot.sqrt();
        full[k * n + k] = s;
        for i in k + 1..n {
            let mut v = full[i * n + k];
            for r in 0..k {
                v -= full[i * n + r] * full[k * n + r];
            }
            full[i * n + k] = v / s;
        }
    }
    true
}

/// Smallest eigenvalue of a packed symmetric matrix (diagnostics only).
pub fn sym_min_eigenvalue(packed: &[f64], n: usize) -> f64 {
    let mut full = vec![0.0; n * n];
    sym_unpack(packed, n, &mut full);
    let m = nalgebra::DMatrix::from_row_slice(n, n, &full);
    nalgebra::SymmetricEigen::new(m)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub(crate) fn ensure_same_chart(
    a: &ChartSpec,
    b: &ChartSpec,
    context: &'static str,
) -> Result<(), FieldError> {
    if a != b {
        return Err(FieldError::ChartMismatch { context });
    }
    Ok(())
}

/// A real-valued field, one sample per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    pub chart: ChartSpec,
    pub data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(chart: &ChartSpec) -> Self {
        ScalarField { chart: chart.clone(), data: vec![0.0; chart.n_nodes()] }
    }

    pub fn from_fn<F: Fn(&[f64]) -> f64>(chart: &ChartSpec, f: F) -> Self {
        let dim = chart.dim();
        let mut data = vec![0.0; chart.n_nodes()];
        let mut x = vec![0.0; dim];
        for (flat, v) in data.iter_mut().enumerate() {
            chart.coords(flat, &mut x);
            *v = f(&x);
        }
        ScalarField { chart: chart.clone(), data }
    }

    pub fn validate_finite(&self) -> Result<(), FieldError> {
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(node) => Err(FieldError::NonFinite { node }),
            None => Ok(()),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// A symmetric (0,2)-tensor field, packed per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymTensorField {
    pub chart: ChartSpec,
    pub data: Vec<f64>,
}

impl SymTensorField {
    pub fn zeros(chart: &ChartSpec) -> Self {
        let m = sym_len(chart.dim());
        SymTensorField { chart: chart.clone(), data: vec![0.0; chart.n_nodes() * m] }
    }

    /// Build from a per-node closure producing packed components.
    pub fn from_fn<F: Fn(&[f64], &mut [f64])>(chart: &ChartSpec, f: F) -> Self {
        let dim = chart.dim();
        let m = sym_len(dim);
        let mut data = vec![0.0; chart.n_nodes() * m];
        let mut x = vec![0.0; dim];
        for flat in 0..chart.n_nodes() {
            chart.coords(flat, &mut x);
            f(&x, &mut data[flat * m..(flat + 1) * m]);
        }
        SymTensorField { chart: chart.clone(), data }
    }

    #[inline]
    pub fn n_comp(&self) -> usize {
        sym_len(self.chart.dim())
    }

    #[inline]
    pub fn at(&self, node: usize) -> &[f64] {
        let m = self.n_comp();
        &self.data[node * m..(node + 1) * m]
    }

    pub fn scaled(&self, t: f64) -> Self {
        SymTensorField {
            chart: self.chart.clone(),
            data: self.data.iter().map(|v| t * v).collect(),
        }
    }

    pub fn validate_finite(&self) -> Result<(), FieldError> {
        let m = self.n_comp();
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(k) => Err(FieldError::NonFinite { node: k / m }),
            None => Ok(()),
        }
    }
}

/// A Riemannian metric: symmetric and positive definite at every node,
/// checked eagerly at construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricField {
    chart: ChartSpec,
    data: Vec<f64>,
}

impl MetricField {
    pub fn new(chart: ChartSpec, data: Vec<f64>) -> Result<Self, FieldError> {
        let n = chart.dim();
        let m = sym_len(n);
        assert_eq!(data.len(), chart.n_nodes() * m, "metric data length mismatch");
        for node in 0..chart.n_nodes() {
            let packed = &data[node * m..(node + 1) * m];
            if packed.iter().any(|v| !v.is_finite()) {
                return Err(FieldError::NonFinite { node });
            }
            if !sym_is_positive_definite(packed, n) {
                let min_eig = sym_min_eigenvalue(packed, n);
                return Err(FieldError::DegenerateMetric { node, min_eig });
            }
        }
        Ok(MetricField { chart, data })
    }

    pub fn from_fn<F: Fn(&[f64], &mut [f64])>(chart: &ChartSpec, f: F) -> Result<Self, FieldError> {
        let t = SymTensorField::from_fn(chart, f);
        MetricField::new(t.chart, t.data)
    }

    pub fn flat(chart: &ChartSpec) -> Self {
        let n = chart.dim();
        let pairs = sym_pairs(n);
        MetricField::from_fn(chart, |_, g| {
            for (c, &(i, j)) in pairs.iter().enumerate() {
                g[c] = if i == j { 1.0 } else { 0.0 };
            }
        })
        .expect("flat metric is positive definite")
    }

    #[inline]
    pub fn chart(&self) -> &ChartSpec {
        &self.chart
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn n_comp(&self) -> usize {
        sym_len(self.chart.dim())
    }

    #[inline]
    pub fn at(&self, node: usize) -> &[f64] {
        let m = self.n_comp();
        &self.data[node * m..(node + 1) * m]
    }

    pub fn as_sym_tensor(&self) -> SymTensorField {
        SymTensorField { chart: self.chart.clone(), data: self.data.clone() }
    }

    /// `g + t h`, revalidated for positive definiteness. Entries with a
    /// vanishing increment keep their exact bit pattern, so compactly
    /// supported deformations leave the complement bit-identical.
    pub fn add_scaled(&self, h: &SymTensorField, t: f64) -> Result<Self, FieldError> {
        ensure_same_chart(&self.chart, &h.chart, "metric + tensor")?;
        let data: Vec<f64> = self
            .data
            .iter()
            .zip(h.data.iter())
            .map(|(g, hv)| if *hv == 0.0 { *g } else { g + t * hv })
            .collect();
        MetricField::new(self.chart.clone(), data)
    }

    /// Re-run the construction checks (after deserialization).
    pub fn revalidate(&self) -> Result<(), FieldError> {
        MetricField::new(self.chart.clone(), self.data.clone()).map(|_| ())
    }

    /// Per-node packed inverse metrics, precomputed for the operators.
    pub fn inverses(&self) -> Result<Vec<f64>, FieldError> {
        let n = self.chart.dim();
        let m = self.n_comp();
        let nn = self.chart.n_nodes();
        let mut out = vec![0.0; nn * m];
        let chunks = crate::exec::map_collect(nn, |node| {
            sym_inv(self.at(node), n)
        });
        for (node, inv) in chunks.into_iter().enumerate() {
            match inv {
                Some(v) => out[node * m..(node + 1) * m].copy_from_slice(&v),
                None => {
                    return Err(FieldError::DegenerateMetric {
                        node,
                        min_eig: sym_min_eigenvalue(self.at(node), n),
                    })
                }
            }
        }
        Ok(out)
    }

    /// Per-node `sqrt(det g)`.
    pub fn sqrt_dets(&self) -> Vec<f64> {
        let n = self.chart.dim();
        let nn = self.chart.n_nodes();
        crate::exec::map_collect(nn, |node| sym_det(self.at(node), n).sqrt())
    }

    /// Smallest metric eigenvalue over all nodes (positivity diagnostics).
    pub fn min_eigenvalue(&self) -> f64 {
        let n = self.chart.dim();
        (0..self.chart.n_nodes())
            .map(|node| sym_min_eigenvalue(self.at(node), n))
            .fold(f64::INFINITY, f64::min)
    }
}

/// The joint scalar-curvature-and-volume value of a metric.
#[derive(Debug, Clone)]
pub struct ThetaValue {
    pub scalar_curvature: ScalarField,
    pub volume: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::uniform_chart;

    #[test]
    fn sym_index_order() {
        let pairs = sym_pairs(3);
        assert_eq!(pairs, vec![(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]);
        for (c, &(i, j)) in pairs.iter().enumerate() {
            assert_eq!(sym_index(i, j, 3), c);
            assert_eq!(sym_index(j, i, 3), c);
        }
    }

    #[test]
    fn inverse_of_known_matrix() {
        // [[2,1],[1,3]] -> inverse [[3,-1],[-1,2]]/5
        let inv = sym_inv(&[2.0, 1.0, 3.0], 2).unwrap();
        assert!((inv[0] - 0.6).abs() < 1e-15);
        assert!((inv[1] + 0.2).abs() < 1e-15);
        assert!((inv[2] - 0.4).abs() < 1e-15);

        let g3 = [2.0, 0.3, -0.1, 1.5, 0.2, 3.0];
        let inv3 = sym_inv(&g3, 3).unwrap();
        // check g * g^-1 = id
        let mut full = [0.0; 9];
        let mut fullinv = [0.0; 9];
        sym_unpack(&g3, 3, &mut full);
        sym_unpack(&inv3, 3, &mut fullinv);
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for k in 0..3 {
                    s += full[i * 3 + k] * fullinv[k * 3 + j];
                }
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((s - want).abs() < 1e-14, "prod[{i}{j}] = {s}");
            }
        }
    }

    #[test]
    fn degenerate_metric_rejected() {
        let chart = uniform_chart(2, 8, 0.0, 1.0, true).unwrap();
        let mut data = MetricField::flat(&chart).data().to_vec();
        // make one node indefinite
        data[3 * 3] = -1.0;
        let err = MetricField::new(chart, data).unwrap_err();
        match err {
            FieldError::DegenerateMetric { node, .. } => assert_eq!(node, 3),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn positive_definite_check_catches_off_diagonal() {
        assert!(sym_is_positive_definite(&[1.0, 0.99, 1.0], 2));
        assert!(!sym_is_positive_definite(&[1.0, 1.01, 1.0], 2));
    }
}
