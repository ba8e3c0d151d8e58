//! Cholesky factorisation of symmetric positive-definite band matrices.

/// Lower factor `L` of `A = L Lᵀ`, stored row by row: row `k` holds columns
/// `k - b ..= k` (entries left of column 0 are zero).
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    b: usize,
    data: Vec<f64>,
}

/// Symmetric band matrix assembled by lower-triangle entries.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    b: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, b: usize) -> Self {
        Self { n, b, data: vec![0.0; n * (b + 1)] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.b
    }

    /// Add `v` to entry `(r, c)` with `c <= r <= c + b`.
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(c <= r && r - c <= self.b);
        self.data[r * (self.b + 1) + c + self.b - r] += v;
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (r, c) = if r >= c { (r, c) } else { (c, r) };
        if r - c > self.b {
            0.0
        } else {
            self.data[r * (self.b + 1) + c + self.b - r]
        }
    }

    /// `y = A x`
    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let (n, b) = (self.n, self.b);
        let mut y = vec![0.0; n];
        for r in 0..n {
            let row = &self.data[r * (b + 1)..(r + 1) * (b + 1)];
            let c0 = r.saturating_sub(b);
            for c in c0..r {
                let a = row[c + b - r];
                y[r] += a * x[c];
                y[c] += a * x[r];
            }
            y[r] += row[b] * x[r];
        }
        y
    }

    /// Factorise; `None` if the matrix is not positive definite.
    pub fn cholesky(mut self) -> Option<BandCholesky> {
        let (n, b) = (self.n, self.b);
        let w = b + 1;
        for k in 0..n {
            let c0 = k.saturating_sub(b);
            for c in c0..=k {
                let lo = c.saturating_sub(b).max(c0);
                let len = c - lo;
                let s = if len > 0 {
                    let rk = &self.data[k * w + lo + b - k..k * w + c + b - k];
                    let rc = &self.data[c * w + lo + b - c..c * w + b];
                    dot(rk, rc)
                } else {
                    0.0
                };
                let idx = k * w + c + b - k;
                let v = self.data[idx] - s;
                if c < k {
                    self.data[idx] = v / self.data[c * w + b];
                } else {
                    if !(v > 0.0) {
                        return None;
                    }
                    self.data[idx] = v.sqrt();
                }
            }
        }
        Some(BandCholesky { n, b, data: self.data })
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        for l in 0..4 {
            acc[l] += a[4 * i + l] * b[4 * i + l];
        }
    }
    let mut s = acc[0] + acc[1] + acc[2] + acc[3];
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

impl BandCholesky {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Solve `A x = rhs` in place.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, b) = (self.n, self.b);
        let w = b + 1;
        for k in 0..n {
            let c0 = k.saturating_sub(b);
            let row = &self.data[k * w + c0 + b - k..k * w + b];
            let s = dot(row, &x[c0..k]);
            x[k] = (x[k] - s) / self.data[k * w + b];
        }
        for k in (0..n).rev() {
            x[k] /= self.data[k * w + b];
            let xk = x[k];
            let c0 = k.saturating_sub(b);
            let row = &self.data[k * w + c0 + b - k..k * w + b];
            for (xm, l) in x[c0..k].iter_mut().zip(row) {
                *xm -= l * xk;
            }
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_dense_solve() {
        let n = 40;
        let b = 5;
        let mut m = BandMatrix::zeros(n, b);
        let mut dense = nalgebra::DMatrix::<f64>::zeros(n, n);
        for r in 0..n {
            for c in r.saturating_sub(b)..=r {
                let v = if r == c { 10.0 + r as f64 * 0.1 } else { -0.5 / (1.0 + (r - c) as f64) + 0.01 * c as f64 };
                m.add(r, c, v);
                dense[(r, c)] = v;
                dense[(c, r)] = v;
            }
        }
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let y = m.mul(&rhs);
        let yd = &dense * nalgebra::DVector::from_vec(rhs.clone());
        for i in 0..n {
            assert!((y[i] - yd[i]).abs() < 1e-12);
        }
        let x = m.cholesky().unwrap().solve(&rhs);
        let xd = dense.cholesky().unwrap().solve(&nalgebra::DVector::from_vec(rhs));
        for i in 0..n {
            assert!((x[i] - xd[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn indefinite_rejected() {
        let mut m = BandMatrix::zeros(2, 1);
        m.add(0, 0, 1.0);
        m.add(1, 0, 2.0);
        m.add(1, 1, 1.0);
        assert!(m.cholesky().is_none());
    }
}
