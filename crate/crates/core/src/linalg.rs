//! Dense complex matrices small enough (a few rows) that a hand-rolled
//! Jacobi eigen-solver beats pulling in a general linear-algebra crate.

use num_complex::Complex64 as C64;

/// Column-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMat {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    /// Takes ownership of column-major data.
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<C64>) -> Self {
        assert_eq!(data.len(), rows * cols, "shape mismatch");
        CMat { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn col(&self, j: usize) -> &[C64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [C64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn adjoint(&self) -> CMat {
        let mut out = CMat::zeros(self.cols, self.rows);
        for j in 0..self.cols {
            for i in 0..self.rows {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn mul(&self, other: &CMat) -> CMat {
        assert_eq!(self.cols, other.rows, "inner dimension mismatch");
        let mut out = CMat::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            for l in 0..self.cols {
                let b = other[(l, j)];
                if b == C64::new(0.0, 0.0) {
                    continue;
                }
                for i in 0..self.rows {
                    out.data[j * self.rows + i] += self.data[l * self.rows + i] * b;
                }
            }
        }
        out
    }

    /// `self^H * other`.
    pub fn adj_mul(&self, other: &CMat) -> CMat {
        assert_eq!(self.rows, other.rows, "row mismatch");
        let mut out = CMat::zeros(self.cols, other.cols);
        for j in 0..other.cols {
            for i in 0..self.cols {
                out[(i, j)] = dot(self.col(i), other.col(j));
            }
        }
        out
    }

    /// Keeps the columns listed in `idx`, in that order.
    pub fn select_cols(&self, idx: &[usize]) -> CMat {
        let mut data = Vec::with_capacity(self.rows * idx.len());
        for &j in idx {
            data.extend_from_slice(self.col(j));
        }
        CMat::from_col_major(self.rows, idx.len(), data)
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `self += scale * a a^H` for a column vector `a`.
    pub fn add_outer(&mut self, a: &[C64], scale: f64) {
        debug_assert_eq!(self.rows, a.len());
        for j in 0..self.cols {
            let aj = a[j].conj() * scale;
            for i in 0..self.rows {
                self.data[j * self.rows + i] += a[i] * aj;
            }
        }
    }
}

impl std::ops::Index<(usize, usize)> for CMat {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[j * self.rows + i]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[j * self.rows + i]
    }
}

/// `a^H b`.
pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm_sq(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

pub fn normalize(a: &mut [C64]) -> f64 {
    let n = norm_sq(a).sqrt();
    for z in a.iter_mut() {
        *z /= n;
    }
    n
}

/// Eigen-decomposition of a Hermitian matrix by cyclic complex Jacobi.
/// Eigenvalues come back ascending, eigenvectors as matching columns.
pub fn hermitian_eigen(a: &CMat) -> (Vec<f64>, CMat) {
    let n = a.rows;
    assert_eq!(n, a.cols, "matrix must be square");
    let mut m = a.clone();
    let mut v = CMat::identity(n);
    let scale = m.frobenius_sq().max(f64::MIN_POSITIVE);
    for _sweep in 0..60 {
        let mut off = 0.0;
        for q in 1..n {
            for p in 0..q {
                off += m[(p, q)].norm_sqr();
            }
        }
        if off <= 1e-32 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                let r = apq.norm();
                if r == 0.0 {
                    continue;
                }
                let phase = apq / r;
                let theta = (m[(q, q)].re - m[(p, p)].re) / (2.0 * r);
                let t = if theta == 0.0 {
                    1.0
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // R = diag(1, conj(phase)) * [[c, s], [-s, c]] on the (p, q) plane
                let rpp = C64::new(c, 0.0);
                let rpq = C64::new(s, 0.0);
                let rqp = -phase.conj() * s;
                let rqq = phase.conj() * c;
                for i in 0..n {
                    let mp = m[(i, p)];
                    let mq = m[(i, q)];
                    m[(i, p)] = mp * rpp + mq * rqp;
                    m[(i, q)] = mp * rpq + mq * rqq;
                    let vp = v[(i, p)];
                    let vq = v[(i, q)];
                    v[(i, p)] = vp * rpp + vq * rqp;
                    v[(i, q)] = vp * rpq + vq * rqq;
                }
                for j in 0..n {
                    let mp = m[(p, j)];
                    let mq = m[(q, j)];
                    m[(p, j)] = rpp.conj() * mp + rqp.conj() * mq;
                    m[(q, j)] = rpq.conj() * mp + rqq.conj() * mq;
                }
                m[(p, q)] = C64::new(0.0, 0.0);
                m[(q, p)] = C64::new(0.0, 0.0);
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| m[(x, x)].re.total_cmp(&m[(y, y)].re));
    let values = order.iter().map(|&i| m[(i, i)].re).collect();
    (values, v.select_cols(&order))
}

/// Orthonormal basis of the `d`-dimensional eigenspace with the smallest
/// eigenvalues.
pub fn min_eigenvectors(a: &CMat, d: usize) -> CMat {
    let (_, vecs) = hermitian_eigen(a);
    vecs.select_cols(&(0..d).collect::<Vec<_>>())
}

/// Singular value decomposition `m = u diag(s) w^H` of a small square matrix,
/// singular values descending.
pub fn svd_square(m: &CMat) -> (CMat, Vec<f64>, CMat) {
    let n = m.cols;
    assert_eq!(m.rows, n, "matrix must be square");
    let gram = m.adj_mul(m);
    let (vals, vecs) = hermitian_eigen(&gram);
    let order: Vec<usize> = (0..n).rev().collect();
    let w = vecs.select_cols(&order);
    let s: Vec<f64> = order.iter().map(|&i| vals[i].max(0.0).sqrt()).collect();
    let mut u = m.mul(&w);
    for j in 0..n {
        // a fresh Gram-Schmidt pass covers zero or repeated singular values
        for l in 0..j {
            let proj = dot(&u.col(l).to_vec(), u.col(j));
            let ul = u.col(l).to_vec();
            for (x, y) in u.col_mut(j).iter_mut().zip(&ul) {
                *x -= proj * y;
            }
        }
        if normalize(u.col_mut(j)) < 1e-300 {
            let mut e = vec![C64::new(0.0, 0.0); n];
            e[j] = C64::new(1.0, 0.0);
            u.col_mut(j).copy_from_slice(&e);
        }
    }
    (u, s, w)
}
