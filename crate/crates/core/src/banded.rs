//! Banded LU with partial pivoting (LAPACK band storage), for the 1-D neck
//! operators.

#[derive(Debug, Clone)]
pub struct BandMatrix {
    pub n: usize,
    pub kl: usize,
    pub ku: usize,
    width: usize,
    /// Column-major band storage with `kl` extra super-diagonals for pivot
    /// fill-in: `A(i, j)` lives at `ab[j * width + (kl + ku + i - j)]`.
    ab: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        BandMatrix { n, kl, ku, width, ab: vec![0.0; n * width] }
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(i + self.ku + self.kl >= j && j + self.kl >= i, "({i},{j}) outside band");
        j * self.width + (self.kl + self.ku + i - j)
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j);
        self.ab[s] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j);
        self.ab[s] += v;
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i + self.ku + self.kl >= j && j + self.kl >= i {
            self.ab[j * self.width + (self.kl + self.ku + i - j)]
        } else {
            0.0
        }
    }

    /// Factor in place with partial pivoting. Fails on a zero pivot.
    pub fn factor(mut self) -> Result<BandLu, String> {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let mut ipiv = vec![0usize; n];
        for j in 0..n {
            let imax = (j + kl).min(n - 1);
            let mut p = j;
            let mut best = self.get(j, j).abs();
            for i in j + 1..=imax {
                let v = self.get(i, j).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            ipiv[j] = p;
            if best == 0.0 {
                return Err(format!("zero pivot at column {j}"));
            }
            if p != j {
                let cmax = (j + kl + ku).min(n - 1);
                for c in j..=cmax {
                    let a = self.get(j, c);
                    let b = self.get(p, c);
                    self.set(j, c, b);
                    self.set(p, c, a);
                }
            }
            let pivot = self.get(j, j);
            for i in j + 1..=imax {
                let m = self.get(i, j) / pivot;
                self.set(i, j, m);
            }
            let cmax = (j + kl + ku).min(n - 1);
            for c in j + 1..=cmax {
                let ajc = self.get(j, c);
                if ajc != 0.0 {
                    for i in j + 1..=imax {
                        let m = self.get(i, j);
                        if m != 0.0 {
                            self.add(i, c, -m * ajc);
                        }
                    }
                }
            }
        }
        Ok(BandLu { mat: self, ipiv })
    }
}

#[derive(Debug, Clone)]
pub struct BandLu {
    mat: BandMatrix,
    ipiv: Vec<usize>,
}

impl BandLu {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.mat.n;
        assert_eq!(b.len(), n);
        let mut x = b.to_vec();
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                x.swap(p, j);
            }
            let imax = (j + self.mat.kl).min(n - 1);
            for i in j + 1..=imax {
                let m = self.mat.get(i, j);
                if m != 0.0 {
                    x[i] -= m * x[j];
                }
            }
        }
        for j in (0..n).rev() {
            x[j] /= self.mat.get(j, j);
            let imin = j.saturating_sub(self.mat.ku + self.mat.kl);
            for i in imin..j {
                let u = self.mat.get(i, j);
                if u != 0.0 {
                    x[i] -= u * x[j];
                }
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn matches_dense_solve() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..5 {
            let n = 40;
            let (kl, ku) = (2, 2);
            let mut band = BandMatrix::zeros(n, kl, ku);
            let mut dense = nalgebra::DMatrix::<f64>::zeros(n, n);
            for i in 0..n {
                for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                    let v: f64 = rng.random::<f64>() - 0.5;
                    let v = if i == j { v + 4.0 } else { v };
                    band.set(i, j, v);
                    dense[(i, j)] = v;
                }
            }
            let b: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
            let lu = band.factor().unwrap();
            let x = lu.solve(&b);
            let xd = dense
                .lu()
                .solve(&nalgebra::DVector::from_column_slice(&b))
                .unwrap();
            for i in 0..n {
                assert!((x[i] - xd[i]).abs() < 1e-10, "i={i}: {} vs {}", x[i], xd[i]);
            }
        }
    }

    #[test]
    fn pivoting_handles_weak_diagonal() {
        // leading diagonal entry much smaller than sub-diagonal forces a swap
        let mut band = BandMatrix::zeros(3, 1, 1);
        band.set(0, 0, 1e-14);
        band.set(0, 1, 1.0);
        band.set(1, 0, 1.0);
        band.set(1, 1, 1.0);
        band.set(1, 2, 1.0);
        band.set(2, 1, 1.0);
        band.set(2, 2, 2.0);
        let lu = band.clone().factor().unwrap();
        let b = vec![1.0, 2.0, 3.0];
        let x = lu.solve(&b);
        // verify A x = b
        for i in 0..3 {
            let mut s = 0.0;
            for j in 0..3 {
                s += band.get(i, j) * x[j];
            }
            assert!((s - b[i]).abs() < 1e-12);
        }
    }
}
