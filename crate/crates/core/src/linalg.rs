//! Small dense linear algebra: Lyapunov solve, symmetric eigenvalues,
//! spectral norm and spectral abscissa.
//!
//! Everything here is sized for the finite-dimensional model (d ≤ 64). The
//! Lyapunov equation is solved through its Kronecker form, which is O(d⁶).

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::num::Real;

/// Largest supported matrix dimension.
pub const MAX_DIM: usize = 64;

/// Row-major dense matrix.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> DenseMatrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(d: usize) -> Self {
        Self::from_diag(&vec![T::one(); d])
    }

    pub fn from_diag(diag: &[T]) -> Self {
        let d = diag.len();
        let mut m = Self::zeros(d, d);
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Self::new(r, c, rows.iter().flatten().copied().collect())
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

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        self.data.chunks(self.cols.max(1)).map(<[T]>::to_vec).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| v * s).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|v| v.is_zero())
    }

    /// `y = self · x`, written into `out`.
    #[inline]
    pub fn mul_vec_into(&self, x: &[T], out: &mut [T]) {
        debug_assert_eq!(x.len(), self.cols);
        for (i, o) in out.iter_mut().enumerate().take(self.rows) {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            *o = row.iter().zip(x).map(|(&a, &b)| a * b).sum();
        }
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] = out[(i, j)] + a * rhs[(k, j)];
                }
            }
        }
        out
    }

    /// Largest absolute entry of `self - selfᵀ`.
    pub fn asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    fn symmetrized(&self) -> Self {
        let half = T::lit(0.5);
        let mut s = self.clone();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let v = (self[(i, j)] + self[(j, i)]) * half;
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        s
    }
}

impl<T> Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for DenseMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

impl<T: Real> Add for &DenseMatrix<T> {
    type Output = DenseMatrix<T>;
    fn add(self, rhs: Self) -> DenseMatrix<T> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a + b).collect(),
        }
    }
}

impl<T: Real> Sub for &DenseMatrix<T> {
    type Output = DenseMatrix<T>;
    fn sub(self, rhs: Self) -> DenseMatrix<T> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a - b).collect(),
        }
    }
}

impl<T: Real> Mul for &DenseMatrix<T> {
    type Output = DenseMatrix<T>;
    fn mul(self, rhs: Self) -> DenseMatrix<T> {
        self.matmul(rhs)
    }
}

impl<T: fmt::Debug> fmt::Debug for DenseMatrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.data.chunks(self.cols.max(1))).finish()
    }
}

impl<T: Real> Serialize for DenseMatrix<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de, T: Real> Deserialize<'de> for DenseMatrix<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<T>>::deserialize(d)?;
        Self::from_rows(&rows).map_err(D::Error::custom)
    }
}

fn check_square<T: Real>(m: &DenseMatrix<T>) -> Result<usize> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            m.rows, m.cols
        )));
    }
    if m.rows > MAX_DIM {
        return Err(Error::DimensionTooLarge(m.rows));
    }
    Ok(m.rows)
}

/// Solves the dense system `a · x = b` by LU with partial pivoting.
/// `a` is row-major `n × n` and is overwritten.
pub(crate) fn lu_solve<T: Real>(a: &mut [T], b: &mut [T], n: usize) -> Result<()> {
    let scale = a.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let tiny = T::epsilon() * scale.max(T::min_positive_value());
    for k in 0..n {
        let (piv, pmax) = (k..n)
            .map(|i| (i, a[i * n + k].abs()))
            .fold((k, -T::one()), |acc, x| if x.1 > acc.1 { x } else { acc });
        if pmax <= tiny {
            return Err(Error::SingularSystem);
        }
        if piv != k {
            for j in 0..n {
                a.swap(k * n + j, piv * n + j);
            }
            b.swap(k, piv);
        }
        let akk = a[k * n + k];
        for i in (k + 1)..n {
            let f = a[i * n + k] / akk;
            if f.is_zero() {
                continue;
            }
            a[i * n + k] = f;
            for j in (k + 1)..n {
                let v = a[k * n + j];
                a[i * n + j] = a[i * n + j] - f * v;
            }
            b[i] = b[i] - f * b[k];
        }
    }
    for k in (0..n).rev() {
        let mut s = b[k];
        for j in (k + 1)..n {
            s = s - a[k * n + j] * b[j];
        }
        b[k] = s / a[k * n + k];
    }
    Ok(())
}

/// Solves `AᵀC + CA = -I` for the symmetric matrix `C`.
///
/// The Kronecker system `(I⊗Aᵀ + Aᵀ⊗I) vec(C) = -vec(I)` is solved densely,
/// then `C` is symmetrised and the residual is checked.
pub fn solve_lyapunov<T: Real>(a: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    let d = check_square(a)?;
    let abscissa = spectral_abscissa(a)?;
    if abscissa >= T::zero() {
        return Err(Error::Spectrum(abscissa.as_f64()));
    }
    let n = d * d;
    let mut k = vec![T::zero(); n * n];
    let mut rhs = vec![T::zero(); n];
    // vec index of C_{ij} is i + j·d (column-major)
    for i in 0..d {
        for j in 0..d {
            let row = i + j * d;
            for l in 0..d {
                // (AᵀC)_{ij} = Σ_l A_{li} C_{lj}
                k[row * n + (l + j * d)] = k[row * n + (l + j * d)] + a[(l, i)];
                // (CA)_{ij} = Σ_l C_{il} A_{lj}
                k[row * n + (i + l * d)] = k[row * n + (i + l * d)] + a[(l, j)];
            }
            if i == j {
                rhs[row] = -T::one();
            }
        }
    }
    lu_solve(&mut k, &mut rhs, n)?;
    let mut c = DenseMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            c[(i, j)] = rhs[i + j * d];
        }
    }
    let c = c.symmetrized();
    let rel = lyapunov_residual(a, &c);
    if !(rel <= T::tol(1e-10)) {
        return Err(Error::LyapunovFailure(rel.as_f64()));
    }
    Ok(c)
}

/// `‖AᵀC + CA + I‖_F / ‖C‖_F`.
pub fn lyapunov_residual<T: Real>(a: &DenseMatrix<T>, c: &DenseMatrix<T>) -> T {
    let at = a.transpose();
    let r = &(&(&at * c) + &(c * a)) + &DenseMatrix::identity(a.rows);
    r.frobenius_norm() / c.frobenius_norm()
}

/// All eigenvalues of a symmetric matrix by cyclic Jacobi rotations, sorted
/// ascending.
pub fn sym_eigenvalues<T: Real>(c: &DenseMatrix<T>) -> Result<Vec<T>> {
    let d = check_square(c)?;
    let fro = c.frobenius_norm();
    let asym = c.asymmetry();
    if asym > T::hybrid_tol(1e-12, fro) {
        return Err(Error::NotSymmetric(asym.as_f64()));
    }
    let mut a = c.symmetrized();
    let target = T::tol(1e-13) * fro;
    let off = |a: &DenseMatrix<T>| {
        let mut s = T::zero();
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    s = s + a[(i, j)] * a[(i, j)];
                }
            }
        }
        s.sqrt()
    };
    let mut sweeps = 0;
    while off(&a) > target {
        sweeps += 1;
        if sweeps > 100 {
            return Err(Error::ConvergenceFailure("Jacobi sweeps exhausted".into()));
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a[(p, q)];
                if apq.is_zero() {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let cs = T::one() / (t * t + T::one()).sqrt();
                let sn = t * cs;
                for k in 0..d {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = cs * akp - sn * akq;
                    a[(k, q)] = sn * akp + cs * akq;
                }
                for k in 0..d {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = cs * apk - sn * aqk;
                    a[(q, k)] = sn * apk + cs * aqk;
                }
            }
        }
    }
    let mut ev: Vec<T> = (0..d).map(|i| a[(i, i)]).collect();
    ev.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalues"));
    Ok(ev)
}

/// Minimum and maximum eigenvalue of a symmetric matrix.
pub fn sym_eig_extremes<T: Real>(c: &DenseMatrix<T>) -> Result<(T, T)> {
    let ev = sym_eigenvalues(c)?;
    match (ev.first(), ev.last()) {
        (Some(&lo), Some(&hi)) => Ok((lo, hi)),
        _ => Err(Error::DimensionMismatch("empty matrix".into())),
    }
}

/// Operator 2-norm `√λ_max(MᵀM)`.
pub fn spectral_norm<T: Real>(m: &DenseMatrix<T>) -> Result<T> {
    if m.rows > MAX_DIM || m.cols > MAX_DIM {
        return Err(Error::DimensionTooLarge(m.rows.max(m.cols)));
    }
    if m.is_zero() {
        return Ok(T::zero());
    }
    let gram = (&m.transpose() * m).symmetrized();
    let (_, hi) = sym_eig_extremes(&gram)?;
    Ok(hi.max(T::zero()).sqrt())
}

/// Largest real part over the spectrum of a general square matrix.
///
/// Reduces to upper Hessenberg form by stabilised elimination, then runs the
/// Francis double-shift QR iteration. Only eigenvalues are produced.
pub fn spectral_abscissa<T: Real>(a: &DenseMatrix<T>) -> Result<T> {
    let re = eigenvalues_real_parts(a)?;
    Ok(re.into_iter().fold(T::neg_infinity(), T::max))
}

fn eigenvalues_real_parts<T: Real>(m: &DenseMatrix<T>) -> Result<Vec<T>> {
    let n = check_square(m)?;
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut a = m.clone();
    to_hessenberg(&mut a);
    hessenberg_qr(&mut a)
}

fn to_hessenberg<T: Real>(a: &mut DenseMatrix<T>) {
    let n = a.rows;
    for m in 1..n.saturating_sub(1) {
        let mut x = T::zero();
        let mut piv = m;
        for j in m..n {
            if a[(j, m - 1)].abs() > x.abs() {
                x = a[(j, m - 1)];
                piv = j;
            }
        }
        if piv != m {
            for j in (m - 1)..n {
                let tmp = a[(piv, j)];
                a[(piv, j)] = a[(m, j)];
                a[(m, j)] = tmp;
            }
            for j in 0..n {
                let tmp = a[(j, piv)];
                a[(j, piv)] = a[(j, m)];
                a[(j, m)] = tmp;
            }
        }
        if !x.is_zero() {
            for i in (m + 1)..n {
                let mut y = a[(i, m - 1)];
                if !y.is_zero() {
                    y = y / x;
                    a[(i, m - 1)] = T::zero();
                    for j in m..n {
                        let v = a[(m, j)];
                        a[(i, j)] = a[(i, j)] - y * v;
                    }
                    for j in 0..n {
                        let v = a[(j, i)];
                        a[(j, m)] = a[(j, m)] + y * v;
                    }
                }
            }
        }
    }
    for i in 2..n {
        for j in 0..(i - 1) {
            a[(i, j)] = T::zero();
        }
    }
}

fn hessenberg_qr<T: Real>(a: &mut DenseMatrix<T>) -> Result<Vec<T>> {
    let n = a.rows;
    let eps = T::epsilon();
    let mut wr = vec![T::zero(); n];
    let mut anorm = T::zero();
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm = anorm + a[(i, j)].abs();
        }
    }
    let max_iter = 500 * n;
    let mut total_iter = 0usize;
    let mut nn = n as isize - 1;
    let mut t = T::zero();
    while nn >= 0 {
        let mut its = 0usize;
        loop {
            let nu = nn as usize;
            let mut l = nu;
            while l > 0 {
                let mut s = a[(l - 1, l - 1)].abs() + a[(l, l)].abs();
                if s.is_zero() {
                    s = anorm;
                }
                if a[(l, l - 1)].abs() <= eps * s {
                    a[(l, l - 1)] = T::zero();
                    break;
                }
                l -= 1;
            }
            let mut x = a[(nu, nu)];
            if l == nu {
                wr[nu] = x + t;
                nn -= 1;
            } else {
                let mut y = a[(nu - 1, nu - 1)];
                let mut w = a[(nu, nu - 1)] * a[(nu - 1, nu)];
                if l == nu - 1 {
                    let p = T::lit(0.5) * (y - x);
                    let q = p * p + w;
                    let z = q.abs().sqrt();
                    x = x + t;
                    if q >= T::zero() {
                        let z = p + z.copysign(p);
                        wr[nu - 1] = x + z;
                        wr[nu] = if z.is_zero() { x + z } else { x - w / z };
                    } else {
                        wr[nu - 1] = x + p;
                        wr[nu] = x + p;
                    }
                    nn -= 2;
                } else {
                    if total_iter >= max_iter {
                        return Err(Error::ConvergenceFailure(
                            "QR iteration cap reached".into(),
                        ));
                    }
                    if its > 0 && its.is_multiple_of(10) {
                        // exceptional shift
                        t = t + x;
                        for i in 0..=nu {
                            a[(i, i)] = a[(i, i)] - x;
                        }
                        let s = a[(nu, nu - 1)].abs() + a[(nu - 1, nu - 2)].abs();
                        x = T::lit(0.75) * s;
                        y = x;
                        w = T::lit(-0.4375) * s * s;
                    }
                    its += 1;
                    total_iter += 1;
                    let (mut p, mut q, mut r, mut z);
                    let mut m = nu - 2;
                    loop {
                        z = a[(m, m)];
                        r = x - z;
                        let s = y - z;
                        p = (r * s - w) / a[(m + 1, m)] + a[(m, m + 1)];
                        q = a[(m + 1, m + 1)] - z - r - s;
                        r = a[(m + 2, m + 1)];
                        let s = p.abs() + q.abs() + r.abs();
                        p = p / s;
                        q = q / s;
                        r = r / s;
                        if m == l {
                            break;
                        }
                        let u = a[(m, m - 1)].abs() * (q.abs() + r.abs());
                        let v = p.abs() * (a[(m - 1, m - 1)].abs() + z.abs() + a[(m + 1, m + 1)].abs());
                        if u <= eps * v {
                            break;
                        }
                        m -= 1;
                    }
                    for i in m..(nu - 1) {
                        a[(i + 2, i)] = T::zero();
                        if i != m {
                            a[(i + 2, i - 1)] = T::zero();
                        }
                    }
                    let mut k = m;
                    while k < nu {
                        if k != m {
                            p = a[(k, k - 1)];
                            q = a[(k + 1, k - 1)];
                            r = T::zero();
                            if k + 1 != nu {
                                r = a[(k + 2, k - 1)];
                            }
                            x = p.abs() + q.abs() + r.abs();
                            if !x.is_zero() {
                                p = p / x;
                                q = q / x;
                                r = r / x;
                            }
                        }
                        let s = (p * p + q * q + r * r).sqrt().copysign(p);
                        if !s.is_zero() {
                            if k == m {
                                if l != m {
                                    a[(k, k - 1)] = -a[(k, k - 1)];
                                }
                            } else {
                                a[(k, k - 1)] = -s * x;
                            }
                            p = p + s;
                            x = p / s;
                            y = q / s;
                            z = r / s;
                            q = q / p;
                            r = r / p;
                            for j in k..=nu {
                                let mut pp = a[(k, j)] + q * a[(k + 1, j)];
                                if k + 1 != nu {
                                    pp = pp + r * a[(k + 2, j)];
                                    a[(k + 2, j)] = a[(k + 2, j)] - pp * z;
                                }
                                a[(k + 1, j)] = a[(k + 1, j)] - pp * y;
                                a[(k, j)] = a[(k, j)] - pp * x;
                            }
                            let mmin = nu.min(k + 3);
                            for i in l..=mmin {
                                let mut pp = x * a[(i, k)] + y * a[(i, k + 1)];
                                if k + 1 != nu {
                                    pp = pp + z * a[(i, k + 2)];
                                    a[(i, k + 2)] = a[(i, k + 2)] - pp * r;
                                }
                                a[(i, k + 1)] = a[(i, k + 1)] - pp * q;
                                a[(i, k)] = a[(i, k)] - pp;
                            }
                        }
                        k += 1;
                    }
                }
            }
            if nn < 0 || l as isize >= nn - 1 {
                break;
            }
        }
    }
    Ok(wr)
}
