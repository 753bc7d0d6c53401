use crate::error::{Error, Result};

/// Square matrix with `w` sub- and super-diagonals, stored row-major.
#[derive(Debug, Clone)]
pub struct Banded {
    n: usize,
    w: usize,
    data: Vec<f64>,
}

impl Banded {
    pub fn zeros(n: usize, w: usize) -> Self {
        Self {
            n,
            w,
            data: vec![0.0; n * (2 * w + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i.abs_diff(j) <= self.w);
        i * (2 * self.w + 1) + j + self.w - i
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i.abs_diff(j) > self.w {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &Banded, b: f64) -> Banded {
        assert_eq!((self.n, self.w), (other.n, other.w));
        Banded {
            n: self.n,
            w: self.w,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let (n, w) = (self.n, self.w);
        for i in 0..n {
            let lo = i.saturating_sub(w);
            let hi = (i + w).min(n - 1);
            let row = &self.data[i * (2 * w + 1)..];
            let mut s = 0.0;
            for j in lo..=hi {
                s += row[j + w - i] * x[j];
            }
            y[i] = s;
        }
    }

    /// `x^T A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut tmp = vec![0.0; self.n];
        self.matvec(y, &mut tmp);
        x.iter().zip(&tmp).map(|(a, b)| a * b).sum()
    }

    /// LU factorization without pivoting. Safe for matrices whose symmetric
    /// part is positive definite, which covers every system assembled here.
    pub fn lu(&self) -> Result<BandedLu> {
        let (n, w) = (self.n, self.w);
        let mut a = self.clone();
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..n {
            let piv = a.data[a.idx(k, k)];
            if !(piv.abs() > 1e-14 * scale) {
                return Err(Error::SolverFailure(format!("zero pivot at row {k}")));
            }
            let hi = (k + w).min(n - 1);
            for i in k + 1..=hi {
                let l = a.data[a.idx(i, k)] / piv;
                let ik = a.idx(i, k);
                a.data[ik] = l;
                for j in k + 1..=hi {
                    let kj = a.data[a.idx(k, j)];
                    let ij = a.idx(i, j);
                    a.data[ij] -= l * kj;
                }
            }
        }
        Ok(BandedLu { a })
    }

    /// Cholesky factor of a symmetric positive definite band matrix.
    pub fn cholesky(&self) -> Result<BandedCholesky> {
        let (n, w) = (self.n, self.w);
        let mut l = Banded::zeros(n, w);
        for j in 0..n {
            let lo = j.saturating_sub(w);
            let mut d = self.get(j, j);
            for k in lo..j {
                d -= l.get(j, k).powi(2);
            }
            if !(d > 0.0) {
                return Err(Error::SolverFailure(format!(
                    "matrix not positive definite at row {j}"
                )));
            }
            let d = d.sqrt();
            l.add(j, j, d);
            for i in j + 1..=(j + w).min(n - 1) {
                let mut s = self.get(i, j);
                for k in i.saturating_sub(w).max(lo)..j {
                    s -= l.get(i, k) * l.get(j, k);
                }
                l.add(i, j, s / d);
            }
        }
        Ok(BandedCholesky { l })
    }
}

#[derive(Debug, Clone)]
pub struct BandedLu {
    a: Banded,
}

impl BandedLu {
    pub fn dim(&self) -> usize {
        self.a.n
    }

    pub fn solve(&self, x: &mut [f64]) {
        let (n, w) = (self.a.n, self.a.w);
        let stride = 2 * w + 1;
        let d = &self.a.data;
        for i in 0..n {
            let row = &d[i * stride..];
            let mut s = x[i];
            for j in i.saturating_sub(w)..i {
                s -= row[j + w - i] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let row = &d[i * stride..];
            let mut s = x[i];
            for j in i + 1..=(i + w).min(n - 1) {
                s -= row[j + w - i] * x[j];
            }
            x[i] = s / row[w];
        }
    }
}

/// Lower factor `L` with `A = L L^T`.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    l: Banded,
}

impl BandedCholesky {
    /// `y = L^T x`.
    pub fn apply_lt(&self, x: &[f64]) -> Vec<f64> {
        let (n, w) = (self.l.n, self.l.w);
        (0..n)
            .map(|i| {
                (i..=(i + w).min(n - 1))
                    .map(|j| self.l.get(j, i) * x[j])
                    .sum()
            })
            .collect()
    }

    /// Solve `L^T y = x` in place.
    pub fn solve_lt(&self, x: &mut [f64]) {
        let (n, w) = (self.l.n, self.l.w);
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..=(i + w).min(n - 1) {
                s -= self.l.get(j, i) * x[j];
            }
            x[i] = s / self.l.get(i, i);
        }
    }
}
