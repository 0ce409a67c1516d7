//! Dense matrices and Householder-QR based projections.
//!
//! Projectors `M_A` onto `range(A)` are never formed explicitly. A [`Qr`]
//! factor keeps the thin orthonormal basis `Q` and applies `Q(Qᵀv)` in
//! `O(np)` per vector.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance on the diagonal of `R` below which a design is
/// treated as rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Row-major dense matrix with finite entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix")]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Deserialize)]
struct RawMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TryFrom<RawMatrix> for Matrix {
    type Error = Error;

    fn try_from(raw: RawMatrix) -> Result<Self> {
        Matrix::new(raw.rows, raw.cols, raw.data)
    }
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::DimMismatch(format!(
                "matrix must be at least 1x1, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("matrix"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimMismatch("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::DimMismatch("ragged columns".into()));
        }
        let cols = columns.len();
        let mut data = vec![0.0; rows * cols];
        for (j, c) in columns.iter().enumerate() {
            for (i, &x) in c.iter().enumerate() {
                data[i * cols + j] = x;
            }
        }
        Self::new(rows, cols, data)
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self {
            rows: n,
            cols: n,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// Entries in row-major order.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.cols, v.len())?;
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    pub fn transpose_mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.rows, v.len())?;
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a * vi;
            }
        }
        Ok(out)
    }

    /// `AᵀA`.
    pub fn gram(&self) -> Matrix {
        let p = self.cols;
        let mut data = vec![0.0; p * p];
        for i in 0..self.rows {
            let r = self.row(i);
            for a in 0..p {
                for b in a..p {
                    data[a * p + b] += r[a] * r[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                data[a * p + b] = data[b * p + a];
            }
        }
        Matrix {
            rows: p,
            cols: p,
            data,
        }
    }

    /// `vᵀ A v` for a square matrix.
    pub fn quad_form(&self, v: &[f64]) -> Result<f64> {
        if self.rows != self.cols {
            return Err(Error::DimMismatch(
                "quadratic form needs a square matrix".into(),
            ));
        }
        Ok(dot(v, &self.mul_vec(v)?))
    }

    /// Horizontal concatenation `[self | other]`.
    pub fn hstack(&self, other: &Matrix) -> Result<Matrix> {
        check_len(self.rows, other.rows)?;
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            data.extend_from_slice(self.row(i));
            data.extend_from_slice(other.row(i));
        }
        Ok(Matrix {
            rows: self.rows,
            cols,
            data,
        })
    }

    /// Vertical concatenation.
    pub fn vstack(&self, other: &Matrix) -> Result<Matrix> {
        check_len(self.cols, other.cols)?;
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Matrix {
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        })
    }

    /// `[self | column]`.
    pub fn with_column(&self, column: &[f64]) -> Result<Matrix> {
        check_len(self.rows, column.len())?;
        if column.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("column"));
        }
        let cols = self.cols + 1;
        let mut data = Vec::with_capacity(self.rows * cols);
        for (i, &c) in column.iter().enumerate() {
            data.extend_from_slice(self.row(i));
            data.push(c);
        }
        Ok(Matrix {
            rows: self.rows,
            cols,
            data,
        })
    }

    /// New matrix whose row `i` is `self.row(source[i])`.
    pub fn select_rows(&self, source: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(source.len() * self.cols);
        for &s in source {
            data.extend_from_slice(self.row(s));
        }
        Matrix {
            rows: source.len(),
            cols: self.cols,
            data,
        }
    }

    /// Column-major copy, the layout used by [`Qr`].
    fn to_column_major(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.rows * self.cols];
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// Inverse of a symmetric positive definite matrix via Cholesky.
    pub fn spd_inverse(&self) -> Result<Matrix> {
        let p = self.rows;
        if p != self.cols {
            return Err(Error::DimMismatch("inverse needs a square matrix".into()));
        }
        let mut l = vec![0.0; p * p];
        for i in 0..p {
            for j in 0..=i {
                let mut s = self.get(i, j);
                for t in 0..j {
                    s -= l[i * p + t] * l[j * p + t];
                }
                if i == j {
                    if s <= 0.0 {
                        return Err(Error::RankDeficient {
                            min_diag: s,
                            max_diag: self.get(i, i),
                        });
                    }
                    l[i * p + i] = s.sqrt();
                } else {
                    l[i * p + j] = s / l[j * p + j];
                }
            }
        }
        let mut inv = vec![0.0; p * p];
        for c in 0..p {
            // solve L y = e_c, then Lᵀ x = y
            let mut y = vec![0.0; p];
            for i in 0..p {
                let mut s = if i == c { 1.0 } else { 0.0 };
                for t in 0..i {
                    s -= l[i * p + t] * y[t];
                }
                y[i] = s / l[i * p + i];
            }
            for i in (0..p).rev() {
                let mut s = y[i];
                for t in i + 1..p {
                    s -= l[t * p + i] * inv[t * p + c];
                }
                inv[i * p + c] = s / l[i * p + i];
            }
        }
        Matrix::new(p, p, inv)
    }
}

/// Thin Householder QR of an `n × p` matrix with `n ≥ p`.
#[derive(Clone, Debug)]
pub struct Qr {
    n: usize,
    p: usize,
    /// Orthonormal basis, column-major `n × p`.
    q: Vec<f64>,
    /// Upper triangular factor, row-major `p × p`.
    r: Vec<f64>,
}

impl Qr {
    pub fn factor(a: &Matrix) -> Result<Self> {
        let (n, p) = (a.rows, a.cols);
        if p > n {
            return Err(Error::RankDeficient {
                min_diag: 0.0,
                max_diag: 0.0,
            });
        }
        let mut work = a.to_column_major();
        let mut reflectors: Vec<Option<Vec<f64>>> = Vec::with_capacity(p);
        for j in 0..p {
            let norm = work[j * n + j..(j + 1) * n]
                .iter()
                .map(|x| x * x)
                .sum::<f64>()
                .sqrt();
            if norm == 0.0 {
                reflectors.push(None);
                continue;
            }
            let head = work[j * n + j];
            let alpha = if head > 0.0 { -norm } else { norm };
            let mut v = work[j * n + j..(j + 1) * n].to_vec();
            v[0] -= alpha;
            let vnorm2: f64 = v.iter().map(|x| x * x).sum();
            if vnorm2 == 0.0 {
                reflectors.push(None);
                continue;
            }
            for c in j..p {
                let col = &mut work[c * n + j..(c + 1) * n];
                let s = 2.0 * dot(&v, col) / vnorm2;
                for (x, &vi) in col.iter_mut().zip(&v) {
                    *x -= s * vi;
                }
            }
            let scale = vnorm2.sqrt();
            v.iter_mut().for_each(|x| *x /= scale);
            reflectors.push(Some(v));
        }

        let mut r = vec![0.0; p * p];
        for i in 0..p {
            for j in i..p {
                r[i * p + j] = work[j * n + i];
            }
        }
        let diag: Vec<f64> = (0..p).map(|i| r[i * p + i].abs()).collect();
        let max_diag = diag.iter().cloned().fold(0.0, f64::max);
        let min_diag = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        if max_diag == 0.0 || min_diag <= RANK_TOLERANCE * max_diag {
            return Err(Error::RankDeficient { min_diag, max_diag });
        }

        let mut q = vec![0.0; n * p];
        for c in 0..p {
            q[c * n + c] = 1.0;
        }
        for (j, v) in reflectors.iter().enumerate().rev() {
            let Some(v) = v else { continue };
            for c in 0..p {
                let col = &mut q[c * n + j..(c + 1) * n];
                let s = 2.0 * dot(v, col);
                for (x, &vi) in col.iter_mut().zip(v) {
                    *x -= s * vi;
                }
            }
        }
        Ok(Self { n, p, q, r })
    }

    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn ncols(&self) -> usize {
        self.p
    }

    fn q_col(&self, c: usize) -> &[f64] {
        &self.q[c * self.n..(c + 1) * self.n]
    }

    pub fn q_matrix(&self) -> Matrix {
        let cols: Vec<Vec<f64>> = (0..self.p).map(|c| self.q_col(c).to_vec()).collect();
        Matrix::from_columns(&cols).expect("orthonormal basis is finite")
    }

    /// `Qᵀv`.
    pub fn coords(&self, v: &[f64]) -> Vec<f64> {
        (0..self.p).map(|c| dot(self.q_col(c), v)).collect()
    }

    /// `Q(Qᵀv)`, the orthogonal projection of `v` onto the column space.
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        let coords = self.coords(v);
        let mut out = vec![0.0; self.n];
        for (c, &w) in coords.iter().enumerate() {
            for (o, &qi) in out.iter_mut().zip(self.q_col(c)) {
                *o += w * qi;
            }
        }
        out
    }

    /// `v − Q(Qᵀv)`.
    pub fn residual(&self, v: &[f64]) -> Vec<f64> {
        let proj = self.project(v);
        v.iter().zip(&proj).map(|(a, b)| a - b).collect()
    }

    pub fn residual_norm_sq(&self, v: &[f64]) -> f64 {
        norm_sq(&self.residual(v))
    }

    /// Least-squares coefficients `R⁻¹Qᵀv`.
    pub fn solve(&self, v: &[f64]) -> Vec<f64> {
        let mut x = self.coords(v);
        let p = self.p;
        for i in (0..p).rev() {
            let mut s = x[i];
            for j in i + 1..p {
                s -= self.r[i * p + j] * x[j];
            }
            x[i] = s / self.r[i * p + i];
        }
        x
    }
}

pub fn orthonormal_basis(a: &Matrix) -> Result<Matrix> {
    Ok(Qr::factor(a)?.q_matrix())
}

/// `‖(I − M_A) v‖²`.
pub fn residual_norm_sq(a: &Matrix, v: &[f64]) -> Result<f64> {
    check_len(a.rows(), v.len())?;
    Ok(Qr::factor(a)?.residual_norm_sq(v))
}

#[derive(Clone, Debug, PartialEq)]
pub struct OlsFit {
    pub coef: Vec<f64>,
    pub rss: f64,
}

pub fn ols_fit(a: &Matrix, v: &[f64]) -> Result<OlsFit> {
    check_len(a.rows(), v.len())?;
    let qr = Qr::factor(a)?;
    Ok(OlsFit {
        coef: qr.solve(v),
        rss: qr.residual_norm_sq(v),
    })
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, actual })
    }
}

pub(crate) fn check_finite(v: &[f64], what: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}
