//! Dense complex linear algebra.
//!
//! Everything here works on small row-major matrices (a few hundred rows at
//! most): products, Kronecker products, Householder QR, a Hermitian
//! eigensolver (Householder tridiagonalization followed by implicit-shift QL)
//! and the PSD square root built on top of it.

use std::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

const HERMITIAN_TOL: f64 = 1e-10;
const RANK_TOL: f64 = 1e-12;
const PSD_CLAMP_TOL: f64 = 1e-6;
const QL_MAX_ITER: usize = 64;

/// Row-major dense complex matrix with finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidArgument(
                "matrix has non-finite entries".into(),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        m
    }

    /// Builds a matrix from rows of complex entries; panics on ragged input.
    pub fn from_rows(rows: &[&[C64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[C64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<C64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entrywise modulus of `self - other`; infinite on shape mismatch.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.rows != other.rows || self.cols != other.cols {
            return f64::INFINITY;
        }
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(C64, C64) -> C64) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Dimension(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// Matrix-vector product `self * v`.
    pub fn matvec(&self, v: &[C64]) -> Result<Vec<C64>> {
        if v.len() != self.cols {
            return Err(Error::Dimension(format!(
                "matrix has {} columns, vector has {} entries",
                self.cols,
                v.len()
            )));
        }
        Ok(self
            .data
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Largest entrywise deviation of `self` from its conjugate transpose.
    pub fn hermitian_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut dev: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                dev = dev.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        dev
    }

    /// Largest entrywise deviation of `self† self` from the identity.
    pub fn unitary_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let prod = matmul(&dagger(self), self).expect("square");
        prod.max_abs_diff(&Self::identity(self.rows))
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.cols + c]
    }
}

/// Finite complex vector.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexVector(Vec<C64>);

impl ComplexVector {
    pub fn new(entries: Vec<C64>) -> Result<Self> {
        if entries
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::InvalidArgument(
                "vector has non-finite entries".into(),
            ));
        }
        Ok(Self(entries))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<C64> {
        self.0
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `<self|other>`, conjugating `self`.
    pub fn inner(&self, other: &Self) -> C64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a.conj() * b).sum()
    }
}

pub fn matmul(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    if a.cols != b.rows {
        return Err(Error::Dimension(format!(
            "cannot multiply {}x{} by {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let mut out = ComplexMatrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        let out_row = &mut out.data[i * b.cols..(i + 1) * b.cols];
        for k in 0..a.cols {
            let aik = a.data[i * a.cols + k];
            if aik == ZERO {
                continue;
            }
            let b_row = &b.data[k * b.cols..(k + 1) * b.cols];
            for (o, &bkj) in out_row.iter_mut().zip(b_row) {
                *o += aik * bkj;
            }
        }
    }
    Ok(out)
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let rows = a.rows * b.rows;
    let cols = a.cols * b.cols;
    let mut out = ComplexMatrix::zeros(rows, cols);
    for i in 0..a.rows {
        for j in 0..a.cols {
            let aij = a[(i, j)];
            for k in 0..b.rows {
                for l in 0..b.cols {
                    out[(i * b.rows + k, j * b.cols + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Conjugate transpose.
pub fn dagger(a: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix::from_fn(a.cols, a.rows, |r, c| a[(c, r)].conj())
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Returns eigenvalues in ascending order and a unitary matrix whose columns
/// are the matching eigenvectors.
pub fn herm_eig(m: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            m.rows, m.cols
        )));
    }
    let dev = m.hermitian_deviation();
    if dev > HERMITIAN_TOL * m.max_abs().max(1.0) {
        return Err(Error::NotHermitian(dev));
    }
    let n = m.rows;
    if n == 0 {
        return Ok((Vec::new(), ComplexMatrix::zeros(0, 0)));
    }

    // Work on the exactly Hermitian part.
    let mut a = ComplexMatrix::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)].conj()));
    let mut q = ComplexMatrix::identity(n);
    tridiagonalize(&mut a, Some(&mut q));

    let mut diag: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    let mut off = vec![0.0; n];
    // Rotate the complex subdiagonal onto the positive reals: T = D T' D†.
    let mut phase = vec![ONE; n];
    for k in 0..n.saturating_sub(1) {
        let e = a[(k + 1, k)];
        let r = e.norm();
        off[k] = r;
        phase[k + 1] = if r > 0.0 {
            phase[k] * (e / r)
        } else {
            phase[k]
        };
    }

    // Rows of `z` are the eigenvectors of the real tridiagonal matrix.
    let mut z = vec![vec![0.0; n]; n];
    for (i, row) in z.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    tql2(&mut diag, &mut off, &mut z)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diag[i].total_cmp(&diag[j]));

    let values: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let qd = ComplexMatrix::from_fn(n, n, |r, c| q[(r, c)] * phase[c]);
    let mut vecs = ComplexMatrix::zeros(n, n);
    for r in 0..n {
        let qd_row = qd.row(r);
        for (col, &src) in order.iter().enumerate() {
            let zk = &z[src];
            vecs[(r, col)] = qd_row.iter().zip(zk).map(|(a, &b)| a * b).sum();
        }
    }
    Ok((values, vecs))
}

/// Eigenvalues only, ascending. Skips all eigenvector accumulation.
pub fn herm_eigvals(m: &ComplexMatrix) -> Result<Vec<f64>> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            m.rows, m.cols
        )));
    }
    let dev = m.hermitian_deviation();
    if dev > HERMITIAN_TOL * m.max_abs().max(1.0) {
        return Err(Error::NotHermitian(dev));
    }
    let n = m.rows;
    let mut a = ComplexMatrix::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)].conj()));
    tridiagonalize(&mut a, None);
    let mut diag: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    // Only the moduli of the subdiagonal matter for the spectrum.
    let mut off: Vec<f64> = (0..n)
        .map(|k| if k + 1 < n { a[(k + 1, k)].norm() } else { 0.0 })
        .collect();
    let mut z = vec![Vec::new(); n];
    tql2(&mut diag, &mut off, &mut z)?;
    diag.sort_by(f64::total_cmp);
    Ok(diag)
}

/// Eigenvalues of a real symmetric `n×n` matrix (row-major), ascending.
///
/// Same QL iteration as [`herm_eig`] after a real Householder reduction;
/// roughly four times cheaper than going through complex arithmetic.
pub fn sym_eigvals(n: usize, m: &[f64]) -> Result<Vec<f64>> {
    if m.len() != n * n {
        return Err(Error::Dimension(format!(
            "expected {} entries, got {}",
            n * n,
            m.len()
        )));
    }
    let scale = m.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    let mut a = m.to_vec();
    for i in 0..n {
        for j in 0..i {
            let (x, y) = (a[i * n + j], a[j * n + i]);
            if !x.is_finite() || (x - y).abs() > HERMITIAN_TOL * scale {
                return Err(Error::NotHermitian((x - y).abs()));
            }
            let avg = 0.5 * (x + y);
            a[i * n + j] = avg;
            a[j * n + i] = avg;
        }
    }

    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    for k in 0..n.saturating_sub(2) {
        let tail: f64 = (k + 2..n).map(|i| a[i * n + k].powi(2)).sum();
        if tail == 0.0 {
            continue;
        }
        let x0 = a[(k + 1) * n + k];
        let norm = (x0 * x0 + tail).sqrt();
        let alpha = if x0 >= 0.0 { -norm } else { norm };
        v[k + 1] = x0 - alpha;
        for i in k + 2..n {
            v[i] = a[i * n + k];
        }
        let tau = 2.0 / v[k + 1..].iter().map(|x| x * x).sum::<f64>();
        for i in k + 1..n {
            let row = &a[i * n..(i + 1) * n];
            p[i] = tau * (k + 1..n).map(|j| row[j] * v[j]).sum::<f64>();
        }
        let kappa = 0.5 * tau * (k + 1..n).map(|i| v[i] * p[i]).sum::<f64>();
        for i in k + 1..n {
            p[i] -= kappa * v[i];
        }
        for i in k + 1..n {
            let (vi, pi) = (v[i], p[i]);
            let row = &mut a[i * n..(i + 1) * n];
            for j in k + 1..n {
                row[j] -= vi * p[j] + pi * v[j];
            }
        }
        a[(k + 1) * n + k] = alpha;
    }

    let mut diag: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    let mut off: Vec<f64> = (0..n)
        .map(|k| if k + 1 < n { a[(k + 1) * n + k] } else { 0.0 })
        .collect();
    let mut z = vec![Vec::new(); n];
    tql2(&mut diag, &mut off, &mut z)?;
    diag.sort_by(f64::total_cmp);
    Ok(diag)
}

/// Householder reduction of a Hermitian matrix to tridiagonal form,
/// `a_in = q * a_out * q†`, accumulated into `q`.
fn tridiagonalize(a: &mut ComplexMatrix, mut q: Option<&mut ComplexMatrix>) {
    let n = a.rows;
    let mut w = vec![ZERO; n];
    let mut p = vec![ZERO; n];
    for k in 0..n.saturating_sub(2) {
        let tail: f64 = (k + 2..n).map(|i| a[(i, k)].norm_sqr()).sum();
        if tail == 0.0 {
            continue;
        }
        let x0 = a[(k + 1, k)];
        let norm = (x0.norm_sqr() + tail).sqrt();
        let ph = if x0.norm() > 0.0 { x0 / x0.norm() } else { ONE };
        let alpha = -ph * norm;

        w.iter_mut().for_each(|z| *z = ZERO);
        w[k + 1] = x0 - alpha;
        for i in k + 2..n {
            w[i] = a[(i, k)];
        }
        let wnorm: f64 = w[k + 1..].iter().map(|z| z.norm_sqr()).sum();
        let tau = 2.0 / wnorm;

        // p = tau * A w over the active block (rows/cols >= k).
        for i in k..n {
            let row = &a.data[i * n..(i + 1) * n];
            let s: C64 = (k + 1..n).map(|j| row[j] * w[j]).sum();
            p[i] = s * tau;
        }
        let kappa = 0.5 * tau * (k + 1..n).map(|i| w[i].conj() * p[i]).sum::<C64>().re;
        for i in k..n {
            p[i] -= w[i] * kappa;
        }
        for i in k..n {
            let (wi, pi) = (w[i], p[i]);
            let row = &mut a.data[i * n..(i + 1) * n];
            for j in k..n {
                row[j] -= wi * p[j].conj() + pi * w[j].conj();
            }
        }
        // Exact zeros below the subdiagonal.
        a[(k + 1, k)] = alpha;
        a[(k, k + 1)] = alpha.conj();
        for i in k + 2..n {
            a[(i, k)] = ZERO;
            a[(k, i)] = ZERO;
        }

        let Some(q) = q.as_deref_mut() else { continue };
        for r in 0..n {
            let row = &mut q.data[r * n..(r + 1) * n];
            let s: C64 = (k + 1..n).map(|j| row[j] * w[j]).sum::<C64>() * tau;
            for j in k + 1..n {
                row[j] -= s * w[j].conj();
            }
        }
    }
}

/// Implicit-shift QL on a real symmetric tridiagonal matrix.
///
/// `d` holds the diagonal, `e[i]` couples `i` and `i + 1` (last entry ignored).
/// Rows of `z` are rotated alongside, so on exit row `i` is the eigenvector
/// belonging to `d[i]`.
fn tql2(d: &mut [f64], e: &mut [f64], z: &mut [Vec<f64>]) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    e[n - 1] = 0.0;
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > QL_MAX_ITER {
                    return Err(Error::NoConvergence(l));
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    let h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);

                    let (lo, hi) = z.split_at_mut(i + 1);
                    let zi = &mut lo[i];
                    let zi1 = &mut hi[0];
                    for (a, b) in zi.iter_mut().zip(zi1.iter_mut()) {
                        let h = *b;
                        *b = s * *a + c * h;
                        *a = c * *a - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Householder QR of a square full-rank matrix, `m = q * r`.
///
/// Columns that are already upper triangular are left untouched, so
/// triangular input yields `q = I`.
pub fn qr_decompose(m: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "QR needs a square matrix, got {}x{}",
            m.rows, m.cols
        )));
    }
    let n = m.rows;
    let mut r = m.clone();
    let mut q = ComplexMatrix::identity(n);
    let mut v = vec![ZERO; n];
    for k in 0..n {
        let tail: f64 = (k + 1..n).map(|i| r[(i, k)].norm_sqr()).sum();
        if tail > 0.0 {
            let x0 = r[(k, k)];
            let norm = (x0.norm_sqr() + tail).sqrt();
            let ph = if x0.norm() > 0.0 { x0 / x0.norm() } else { ONE };
            let alpha = -ph * norm;
            v[k] = x0 - alpha;
            for i in k + 1..n {
                v[i] = r[(i, k)];
            }
            let vnorm: f64 = v[k..].iter().map(|z| z.norm_sqr()).sum();
            let tau = 2.0 / vnorm;

            for j in k..n {
                let s: C64 = (k..n).map(|i| v[i].conj() * r[(i, j)]).sum::<C64>() * tau;
                for i in k..n {
                    r[(i, j)] -= v[i] * s;
                }
            }
            r[(k, k)] = alpha;
            for i in k + 1..n {
                r[(i, k)] = ZERO;
            }
            for row in 0..n {
                let qrow = &mut q.data[row * n..(row + 1) * n];
                let s: C64 = (k..n).map(|j| qrow[j] * v[j]).sum::<C64>() * tau;
                for j in k..n {
                    qrow[j] -= s * v[j].conj();
                }
            }
        }
        let rkk = r[(k, k)].norm();
        if rkk < RANK_TOL {
            return Err(Error::RankDeficient {
                index: k,
                value: rkk,
            });
        }
    }
    Ok((q, r))
}

/// Principal square root of a Hermitian positive semidefinite matrix.
///
/// Eigenvalues down to `-1e-6` are treated as rounding noise and clamped to
/// zero; anything more negative is rejected.
pub fn sqrtm_psd(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let (values, vecs) = herm_eig(m)?;
    if let Some(&min) = values.first() {
        if min < -PSD_CLAMP_TOL {
            return Err(Error::NotPsd(min));
        }
    }
    let roots: Vec<f64> = values.iter().map(|&l| l.max(0.0).sqrt()).collect();
    Ok(reassemble(&vecs, &roots))
}

/// `v * diag(values) * v†` for real `values`.
pub(crate) fn reassemble(v: &ComplexMatrix, values: &[f64]) -> ComplexMatrix {
    let n = v.rows;
    let k = values.len();
    let mut out = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let s: C64 = (0..k)
                .map(|c| v[(i, c)] * values[c] * v[(j, c)].conj())
                .sum();
            out[(i, j)] = s;
            out[(j, i)] = s.conj();
        }
        out[(i, i)] = C64::new(out[(i, i)].re, 0.0);
    }
    out
}
