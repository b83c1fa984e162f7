//! Minimal CSR sparse matrices: enough for operator assembly (sums, products,
//! diagonal scalings, transpose) and the solver matvecs.

use crate::exec;

#[derive(Debug, Clone)]
pub struct Csr {
    pub rows: usize,
    pub cols: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl Csr {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Csr { rows, cols, indptr: vec![0; rows + 1], indices: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Csr {
            rows: n,
            cols: n,
            indptr: (0..=n).collect(),
            indices: (0..n as u32).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        Csr {
            rows: n,
            cols: n,
            indptr: (0..=n).collect(),
            indices: (0..n as u32).collect(),
            values: diag.to_vec(),
        }
    }

    /// Build from unsorted triplets; duplicate entries are summed.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; rows + 1];
        for &(r, _, _) in triplets {
            counts[r + 1] += 1;
        }
        for r in 0..rows {
            counts[r + 1] += counts[r];
        }
        let mut order: Vec<usize> = counts[..rows].to_vec();
        let mut indices = vec![0u32; triplets.len()];
        let mut values = vec![0.0; triplets.len()];
        for &(r, c, v) in triplets {
            let k = order[r];
            indices[k] = c as u32;
            values[k] = v;
            order[r] += 1;
        }
        let mut m = Csr { rows, cols, indptr: counts, indices, values };
        m.sort_and_merge();
        m
    }

    fn sort_and_merge(&mut self) {
        let mut new_indptr = Vec::with_capacity(self.rows + 1);
        let mut new_indices = Vec::with_capacity(self.indices.len());
        let mut new_values = Vec::with_capacity(self.values.len());
        new_indptr.push(0);
        let mut row: Vec<(u32, f64)> = Vec::new();
        for r in 0..self.rows {
            row.clear();
            for k in self.indptr[r]..self.indptr[r + 1] {
                row.push((self.indices[k], self.values[k]));
            }
            row.sort_by_key(|e| e.0);
            let mut i = 0;
            while i < row.len() {
                let col = row[i].0;
                let mut v = row[i].1;
                let mut j = i + 1;
                while j < row.len() && row[j].0 == col {
                    v += row[j].1;
                    j += 1;
                }
                if v != 0.0 {
                    new_indices.push(col);
                    new_values.push(v);
                }
                i = j;
            }
            new_indptr.push(new_indices.len());
        }
        self.indptr = new_indptr;
        self.indices = new_indices;
        self.values = new_values;
    }

    #[inline]
    pub fn row(&self, r: usize) -> (&[u32], &[f64]) {
        let lo = self.indptr[r];
        let hi = self.indptr[r + 1];
        (&self.indices[lo..hi], &self.values[lo..hi])
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        exec::map_collect(self.rows, |r| {
            let (cols, vals) = self.row(r);
            cols.iter()
                .zip(vals.iter())
                .map(|(&c, &v)| v * x[c as usize])
                .sum()
        })
    }

    pub fn transpose(&self) -> Csr {
        let mut counts = vec![0usize; self.cols + 1];
        for &c in &self.indices {
            counts[c as usize + 1] += 1;
        }
        for c in 0..self.cols {
            counts[c + 1] += counts[c];
        }
        let mut cursor = counts[..self.cols].to_vec();
        let mut indices = vec![0u32; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for r in 0..self.rows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                let c = self.indices[k] as usize;
                let pos = cursor[c];
                indices[pos] = r as u32;
                values[pos] = self.values[k];
                cursor[c] += 1;
            }
        }
        Csr { rows: self.cols, cols: self.rows, indptr: counts, indices, values }
    }

    /// `alpha * self + beta * other`.
    pub fn add_scaled(&self, alpha: f64, other: &Csr, beta: f64) -> Csr {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut indptr = Vec::with_capacity(self.rows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0usize);
        for r in 0..self.rows {
            let (ca, va) = self.row(r);
            let (cb, vb) = other.row(r);
            let (mut i, mut j) = (0usize, 0usize);
            while i < ca.len() || j < cb.len() {
                let (col, v) = if j >= cb.len() || (i < ca.len() && ca[i] < cb[j]) {
                    let e = (ca[i], alpha * va[i]);
                    i += 1;
                    e
                } else if i >= ca.len() || cb[j] < ca[i] {
                    let e = (cb[j], beta * vb[j]);
                    j += 1;
                    e
                } else {
                    let e = (ca[i], alpha * va[i] + beta * vb[j]);
                    i += 1;
                    j += 1;
                    e
                };
                if v != 0.0 {
                    indices.push(col);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Csr { rows: self.rows, cols: self.cols, indptr, indices, values }
    }

    /// Multiply every entry by `s`.
    pub fn scaled(&self, s: f64) -> Csr {
        let mut out = self.clone();
        for v in out.values.iter_mut() {
            *v *= s;
        }
        out
    }

    /// Left-multiply by a diagonal: `diag(d) * self`.
    pub fn scale_rows(&self, d: &[f64]) -> Csr {
        assert_eq!(d.len(), self.rows);
        let mut out = self.clone();
        for r in 0..self.rows {
            for k in out.indptr[r]..out.indptr[r + 1] {
                out.values[k] *= d[r];
            }
        }
        out
    }

    /// Right-multiply by a diagonal: `self * diag(d)`.
    pub fn scale_cols(&self, d: &[f64]) -> Csr {
        assert_eq!(d.len(), self.cols);
        let mut out = self.clone();
        for k in 0..out.values.len() {
            out.values[k] *= d[out.indices[k] as usize];
        }
        out
    }

    /// Sparse product `self * other` with a dense accumulator per row.
    pub fn matmul(&self, other: &Csr) -> Csr {
        assert_eq!(self.cols, other.rows);
        let rows: Vec<(Vec<u32>, Vec<f64>)> = exec::map_collect(self.rows, |r| {
            let mut accum: Vec<f64> = vec![0.0; other.cols];
            let mut touched: Vec<u32> = Vec::new();
            let (ca, va) = self.row(r);
            for (&mid, &vmid) in ca.iter().zip(va.iter()) {
                let (cb, vb) = other.row(mid as usize);
                for (&c, &v) in cb.iter().zip(vb.iter()) {
                    if accum[c as usize] == 0.0 {
                        touched.push(c);
                    }
                    accum[c as usize] += vmid * v;
                }
            }
            touched.sort_unstable();
            let vals: Vec<f64> = touched.iter().map(|&c| accum[c as usize]).collect();
            (touched, vals)
        });
        let mut indptr = Vec::with_capacity(self.rows + 1);
        indptr.push(0usize);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for (cols, vals) in rows {
            for (c, v) in cols.into_iter().zip(vals.into_iter()) {
                if v != 0.0 {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Csr { rows: self.rows, cols: other.cols, indptr, indices, values }
    }

    /// Re-index columns `j -> j * factor + offset` (embed into an
    /// interleaved component layout with `factor` components).
    pub fn expand_cols(&self, factor: usize, offset: usize) -> Csr {
        debug_assert!(offset < factor);
        let mut out = self.clone();
        out.cols = self.cols * factor;
        for idx in out.indices.iter_mut() {
            *idx = *idx * factor as u32 + offset as u32;
        }
        out
    }

    /// Re-index rows `i -> i * factor + offset`.
    pub fn expand_rows(&self, factor: usize, offset: usize) -> Csr {
        debug_assert!(offset < factor);
        let rows = self.rows * factor;
        let mut indptr = vec![0usize; rows + 1];
        for r in 0..self.rows {
            let len = self.indptr[r + 1] - self.indptr[r];
            indptr[r * factor + offset + 1] = len;
        }
        for k in 0..rows {
            indptr[k + 1] += indptr[k];
        }
        Csr {
            rows,
            cols: self.cols,
            indptr,
            indices: self.indices.clone(),
            values: self.values.clone(),
        }
    }

    /// Stack vertically: `[self; other]`.
    pub fn vstack(&self, other: &Csr) -> Csr {
        assert_eq!(self.cols, other.cols);
        let mut indptr = self.indptr.clone();
        let base = *indptr.last().unwrap();
        indptr.extend(other.indptr[1..].iter().map(|&p| p + base));
        let mut indices = self.indices.clone();
        indices.extend_from_slice(&other.indices);
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        Csr { rows: self.rows + other.rows, cols: self.cols, indptr, indices, values }
    }

    /// Pad with extra (empty) columns on the right.
    pub fn pad_cols(&self, extra: usize) -> Csr {
        let mut out = self.clone();
        out.cols += extra;
        out
    }

    /// Extract the diagonal (for preconditioning).
    pub fn diagonal(&self) -> Vec<f64> {
        assert_eq!(self.rows, self.cols);
        (0..self.rows)
            .map(|r| {
                let (cols, vals) = self.row(r);
                cols.iter()
                    .zip(vals.iter())
                    .find(|(&c, _)| c as usize == r)
                    .map(|(_, &v)| v)
                    .unwrap_or(0.0)
            })
            .collect()
    }

    /// Dense symmetric Gram accumulation `self^T * diag(w) * self` into a
    /// dense column-major buffer of size `cols x cols`.
    pub fn gram_weighted_dense(&self, w: &[f64]) -> nalgebra::DMatrix<f64> {
        assert_eq!(w.len(), self.rows);
        let n = self.cols;
        let mut out = nalgebra::DMatrix::<f64>::zeros(n, n);
        for r in 0..self.rows {
            let (cols, vals) = self.row(r);
            let wr = w[r];
            if wr == 0.0 {
                continue;
            }
            for (ki, (&ci, &vi)) in cols.iter().zip(vals.iter()).enumerate() {
                let s = wr * vi;
                for (&cj, &vj) in cols[ki..].iter().zip(vals[ki..].iter()) {
                    out[(ci as usize, cj as usize)] += s * vj;
                }
            }
        }
        // mirror upper to lower
        for i in 0..n {
            for j in 0..i {
                out[(i, j)] = out[(j, i)];
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(m: &Csr) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; m.cols]; m.rows];
        for r in 0..m.rows {
            let (cols, vals) = m.row(r);
            for (&c, &v) in cols.iter().zip(vals.iter()) {
                d[r][c as usize] += v;
            }
        }
        d
    }

    #[test]
    fn triplets_merge_duplicates() {
        let m = Csr::from_triplets(2, 3, &[(0, 1, 2.0), (0, 1, 3.0), (1, 0, 1.0), (0, 2, -1.0)]);
        let d = dense(&m);
        assert_eq!(d[0], vec![0.0, 5.0, -1.0]);
        assert_eq!(d[1], vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn matmul_matches_dense() {
        let a = Csr::from_triplets(2, 3, &[(0, 0, 1.0), (0, 2, 2.0), (1, 1, -1.0)]);
        let b = Csr::from_triplets(3, 2, &[(0, 0, 3.0), (1, 0, 1.0), (2, 1, 4.0)]);
        let c = a.matmul(&b);
        let d = dense(&c);
        assert_eq!(d[0], vec![3.0, 8.0]);
        assert_eq!(d[1], vec![-1.0, 0.0]);
    }

    #[test]
    fn transpose_round_trip() {
        let a = Csr::from_triplets(3, 4, &[(0, 3, 1.5), (2, 1, -2.0), (1, 0, 0.5)]);
        let att = a.transpose().transpose();
        assert_eq!(dense(&a), dense(&att));
    }

    #[test]
    fn embed_and_stack() {
        let a = Csr::from_triplets(2, 2, &[(0, 0, 1.0), (1, 1, 2.0)]);
        let e = a.expand_cols(3, 1);
        let d = dense(&e);
        assert_eq!(d[0], vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(d[1], vec![0.0, 0.0, 0.0, 0.0, 2.0, 0.0]);
        let r = a.expand_rows(2, 1);
        let d = dense(&r);
        assert_eq!(d[1], vec![1.0, 0.0]);
        assert_eq!(d[3], vec![0.0, 2.0]);
        let s = a.vstack(&a);
        assert_eq!(s.rows, 4);
        assert_eq!(dense(&s)[2], vec![1.0, 0.0]);
    }

    #[test]
    fn gram_matches_explicit_product() {
        let a = Csr::from_triplets(
            3,
            2,
            &[(0, 0, 1.0), (0, 1, 2.0), (1, 0, -1.0), (2, 1, 3.0)],
        );
        let w = vec![2.0, 1.0, 0.5];
        let g = a.gram_weighted_dense(&w);
        // explicit: A^T W A
        let at = a.transpose();
        let wa = a.scale_rows(&w);
        let expect = at.matmul(&wa);
        let de = dense(&expect);
        for i in 0..2 {
            for j in 0..2 {
                assert!((g[(i, j)] - de[i][j]).abs() < 1e-14);
            }
        }
    }
}
