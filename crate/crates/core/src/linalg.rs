//! Dense complex linear-algebra helpers on top of `faer`.

use faer::linalg::solvers::DenseSolveCore;
use faer::prelude::*;
use faer::{Mat, Side};

use crate::error::{Error, Result};

pub type C64 = faer::c64;
pub type CMat = Mat<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn zeros(rows: usize, cols: usize) -> CMat {
    Mat::zeros(rows, cols)
}

pub fn identity(n: usize) -> CMat {
    Mat::identity(n, n)
}

pub fn adjoint(a: &CMat) -> CMat {
    a.adjoint().to_owned()
}

pub fn matmul(a: &CMat, b: &CMat) -> CMat {
    a * b
}

pub fn scaled(a: &CMat, s: C64) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s)
}

pub fn trace(a: &CMat) -> C64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)]).sum()
}

/// Frobenius norm.
pub fn fro_norm(a: &CMat) -> f64 {
    a.norm_l2()
}

/// Maximum column sum (induced 1-norm).
pub fn one_norm(a: &CMat) -> f64 {
    (0..a.ncols())
        .map(|j| (0..a.nrows()).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!(a.nrows(), b.nrows());
    assert_eq!(a.ncols(), b.ncols());
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    m
}

/// Kronecker product `a ⊗ b`, skipping structural zeros of `a`.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = (a.nrows(), a.ncols());
    let (br, bc) = (b.nrows(), b.ncols());
    let mut out = Mat::zeros(ar * br, ac * bc);
    for j in 0..ac {
        for i in 0..ar {
            let x = a[(i, j)];
            if x == ZERO {
                continue;
            }
            for q in 0..bc {
                for p in 0..br {
                    let y = b[(p, q)];
                    if y != ZERO {
                        out[(i * br + p, j * bc + q)] = x * y;
                    }
                }
            }
        }
    }
    out
}

/// `(m + m†)/2`.
pub fn hermitian_part(m: &CMat) -> CMat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5)
}

pub fn hermiticity_defect(m: &CMat) -> f64 {
    let mut d = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..=j.min(m.nrows() - 1) {
            d = d.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    d
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(m: &CMat) -> Result<(Vec<f64>, CMat)> {
    let e = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("hermitian eigensolver failed: {e:?}")))?;
    let s = e.S();
    let vals = (0..m.nrows()).map(|i| s[i].re).collect();
    Ok((vals, e.U().to_owned()))
}

pub fn hermitian_eigenvalues(m: &CMat) -> Result<Vec<f64>> {
    m.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Numerical(format!("hermitian eigensolver failed: {e:?}")))
}

pub fn eigenvalues(m: &CMat) -> Result<Vec<C64>> {
    m.eigenvalues()
        .map_err(|e| Error::Numerical(format!("eigensolver failed: {e:?}")))
}

/// Solve `a x = b` with partial-pivoting LU.
pub fn solve(a: &CMat, b: &CMat) -> CMat {
    a.partial_piv_lu().solve(b)
}

pub fn inverse(a: &CMat) -> CMat {
    a.partial_piv_lu().inverse()
}

/// Diagonalization `m = R diag(λ) R⁻¹` of a general complex matrix.
#[derive(Clone, Debug)]
pub struct Spectral {
    pub values: Vec<C64>,
    pub right: CMat,
    pub right_inv: CMat,
}

impl Spectral {
    pub fn new(m: &CMat) -> Result<Self> {
        let n = m.nrows();
        let e = m
            .eigen()
            .map_err(|e| Error::Numerical(format!("eigensolver failed: {e:?}")))?;
        let s = e.S();
        let values: Vec<C64> = (0..n).map(|i| s[i]).collect();
        let right = e.U().to_owned();
        let right_inv = right.partial_piv_lu().inverse();
        let bad = right_inv.as_ref().col_iter().any(|col| {
            col.iter().any(|z| !z.re.is_finite() || !z.im.is_finite())
        });
        if bad {
            return Err(Error::Numerical(
                "eigenvector matrix is singular (defective operator)".into(),
            ));
        }
        Ok(Self {
            values,
            right,
            right_inv,
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Relative reconstruction error ‖R Λ R⁻¹ − m‖ / ‖m‖.
    pub fn reconstruction_error(&self, m: &CMat) -> f64 {
        let n = self.dim();
        let rl = Mat::from_fn(n, n, |i, j| self.right[(i, j)] * self.values[j]);
        let rec = &rl * &self.right_inv;
        fro_norm(&(&rec - m)) / fro_norm(m).max(f64::MIN_POSITIVE)
    }

    /// Expansion coefficients `R⁻¹ v`.
    pub fn coefficients(&self, v: &[C64]) -> Vec<C64> {
        apply(&self.right_inv, v)
    }

    /// `R diag(f(λ)) c'.
    pub fn synthesize(&self, coeffs: &[C64], f: impl Fn(C64) -> C64) -> Vec<C64> {
        let n = self.dim();
        let scaled: Vec<C64> = (0..n).map(|k| coeffs[k] * f(self.values[k])).collect();
        apply(&self.right, &scaled)
    }
}

/// Matrix-vector product.
pub fn apply(m: &CMat, v: &[C64]) -> Vec<C64> {
    assert_eq!(m.ncols(), v.len());
    let mut out = vec![ZERO; m.nrows()];
    for (j, &x) in v.iter().enumerate() {
        if x == ZERO {
            continue;
        }
        let col = m.col_as_slice(j);
        for (o, &a) in out.iter_mut().zip(col) {
            *o += a * x;
        }
    }
    out
}

/// Row vector times matrix: `wᵀ m`.
pub fn apply_left(w: &[C64], m: &CMat) -> Vec<C64> {
    assert_eq!(m.nrows(), w.len());
    (0..m.ncols())
        .map(|j| {
            m.col_as_slice(j)
                .iter()
                .zip(w)
                .map(|(&a, &b)| a * b)
                .sum()
        })
        .collect()
}

pub fn col_to_vec(m: &CMat) -> Vec<C64> {
    (0..m.nrows()).map(|i| m[(i, 0)]).collect()
}

pub fn vec_to_col(v: &[C64]) -> CMat {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Matrix exponential by scaling and squaring with a degree-13 Padé
/// approximant (Higham 2005).
pub fn expm(a: &CMat) -> CMat {
    let n = a.nrows();
    let norm = one_norm(a);
    let theta13 = 5.371920351148152;
    let s = if norm > theta13 {
        (norm / theta13).log2().ceil() as i32
    } else {
        0
    };
    let a = scaled(a, re(0.5f64.powi(s)));
    let b = PADE13;
    let id = identity(n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let lin = |c6: f64, c4: f64, c2: f64, c0: f64| -> CMat {
        Mat::from_fn(n, n, |i, j| {
            a6[(i, j)] * c6 + a4[(i, j)] * c4 + a2[(i, j)] * c2 + id[(i, j)] * c0
        })
    };
    let u_inner = &a6 * &lin(b[13], b[11], b[9], 0.0);
    let u_inner = &u_inner + &lin(b[7], b[5], b[3], b[1]);
    let u = &a * &u_inner;
    let v_inner = &a6 * &lin(b[12], b[10], b[8], 0.0);
    let v = &v_inner + &lin(b[6], b[4], b[2], b[0]);
    let num = &v + &u;
    let den = &v - &u;
    let mut r = solve(&den, &num);
    for _ in 0..s {
        r = &r * &r;
    }
    r
}
