//! Flat residual vectors and the small amount of linear algebra the residual
//! set operations need: inner products, projections and the top principal
//! direction of an uncentered residual stack.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Norms at or below this are treated as the zero vector.
pub const EPS_ZERO: f64 = 1e-12;

const POWER_MAX_ITERS: usize = 200;
const POWER_ANGLE_TOL: f64 = 1e-10;
/// Number of Gram-matrix squarings applied before power iteration.
const GRAM_SQUARINGS: usize = 6;

/// A finite vector in prediction space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Residual {
    data: Vec<f64>,
}

impl Residual {
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Empty("residual"));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("residual"));
        }
        Ok(Self { data })
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "residual dimension must be positive");
        Self { data: vec![0.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn scale(&self, c: f64) -> Residual {
        Residual { data: self.data.iter().map(|v| v * c).collect() }
    }

    /// `self + c * other`.
    pub fn add_scaled(&self, c: f64, other: &Residual) -> Result<Residual> {
        check_dims(self, other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + c * b).collect();
        Ok(Residual { data })
    }

    pub fn checked_add(&self, other: &Residual) -> Result<Residual> {
        check_dims(self, other)?;
        Ok(Residual { data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect() })
    }

    pub fn checked_sub(&self, other: &Residual) -> Result<Residual> {
        check_dims(self, other)?;
        Ok(Residual { data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect() })
    }
}

impl TryFrom<Vec<f64>> for Residual {
    type Error = Error;

    fn try_from(data: Vec<f64>) -> Result<Self> {
        Residual::new(data)
    }
}

impl From<Residual> for Vec<f64> {
    fn from(r: Residual) -> Self {
        r.data
    }
}

impl AsRef<[f64]> for Residual {
    fn as_ref(&self) -> &[f64] {
        &self.data
    }
}

// Operator forms panic on dimension mismatch; use the checked_* methods where
// dimensions are not already known to agree.
impl Add for &Residual {
    type Output = Residual;
    fn add(self, rhs: &Residual) -> Residual {
        self.checked_add(rhs).expect("residual dimensions differ")
    }
}

impl Sub for &Residual {
    type Output = Residual;
    fn sub(self, rhs: &Residual) -> Residual {
        self.checked_sub(rhs).expect("residual dimensions differ")
    }
}

impl Mul<&Residual> for f64 {
    type Output = Residual;
    fn mul(self, rhs: &Residual) -> Residual {
        rhs.scale(self)
    }
}

impl Neg for &Residual {
    type Output = Residual;
    fn neg(self) -> Residual {
        Residual { data: self.data.iter().map(|v| -v).collect() }
    }
}

fn check_dims(a: &Residual, b: &Residual) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), actual: b.dim() });
    }
    Ok(())
}

pub fn dot(a: &Residual, b: &Residual) -> Result<f64> {
    check_dims(a, b)?;
    Ok(a.data.iter().zip(&b.data).map(|(x, y)| x * y).sum())
}

pub fn norm2(a: &Residual) -> Result<f64> {
    if !a.is_finite() {
        return Err(Error::NonFinite("norm2 input"));
    }
    let n = a.data.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !n.is_finite() {
        return Err(Error::NonFinite("norm2 result"));
    }
    Ok(n)
}

/// Component of `a` along `b`: `(<a,b> / |b|^2) b`.
pub fn project_onto(a: &Residual, b: &Residual) -> Result<Residual> {
    check_dims(a, b)?;
    let nb = norm2(b)?;
    if nb <= EPS_ZERO {
        return Err(Error::ZeroDirection);
    }
    let coef = dot(a, b)? / (nb * nb);
    Ok(b.scale(coef))
}

/// Non-empty list of residuals sharing one dimension (the matrix `M`).
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualStack {
    rows: Vec<Residual>,
}

impl ResidualStack {
    pub fn new(rows: Vec<Residual>) -> Result<Self> {
        let first = rows.first().ok_or(Error::Empty("residual stack"))?;
        let dim = first.dim();
        if let Some(bad) = rows.iter().find(|r| r.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, actual: bad.dim() });
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[Residual] {
        &self.rows
    }

    pub fn count(&self) -> usize {
        self.rows.len()
    }

    pub fn dim(&self) -> usize {
        self.rows[0].dim()
    }

    fn times(&self, v: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| r.data.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    fn transpose_times(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (row, &c) in self.rows.iter().zip(u) {
            for (o, v) in out.iter_mut().zip(&row.data) {
                *o += c * v;
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrincipalDirection {
    /// Unit vector; the entry of largest magnitude is non-negative.
    pub direction: Residual,
    pub singular_value: f64,
}

/// First right-singular vector of the (uncentered) stack, i.e. the unit `v`
/// maximizing `|Mv|^2`.
///
/// Power iteration runs in row space on the Gram matrix `G = M M^T`, which is
/// first raised to the power `2^6` by repeated squaring so that close
/// singular values still separate within the iteration budget. The start
/// vector is `M 1` (all-ones in column space), falling back to `M e_k` for the
/// first basis vector not in the null space. A few plain iterations on
/// `M^T M` polish the result.
pub fn top_principal_direction(m: &ResidualStack) -> Result<PrincipalDirection> {
    let dim = m.dim();
    let k = m.count();
    if m.rows.iter().all(|r| r.data.iter().all(|&v| v == 0.0)) {
        return Err(Error::DegenerateStack);
    }

    let ones = vec![1.0 / (dim as f64).sqrt(); dim];
    let mut start = m.times(&ones);
    if vec_norm(&start) <= EPS_ZERO {
        start = (0..dim)
            .map(|j| {
                let mut e = vec![0.0; dim];
                e[j] = 1.0;
                m.times(&e)
            })
            .find(|u| vec_norm(u) > EPS_ZERO)
            .ok_or(Error::DegenerateStack)?;
    }

    // Gram matrix, row-major k x k.
    let mut gram = vec![0.0; k * k];
    for i in 0..k {
        for j in i..k {
            let g: f64 = m.rows[i].data.iter().zip(&m.rows[j].data).map(|(a, b)| a * b).sum();
            gram[i * k + j] = g;
            gram[j * k + i] = g;
        }
    }
    let mut op = gram.clone();
    for _ in 0..GRAM_SQUARINGS {
        op = square_normalized(&op, k);
    }

    let mut u = normalized(start).ok_or(Error::DegenerateStack)?;
    for _ in 0..POWER_MAX_ITERS {
        let next = match normalized(mat_vec(&op, k, &u)) {
            Some(n) => n,
            // start orthogonal to every dominant direction of the powered
            // operator; fall back to the unpowered Gram matrix
            None => break,
        };
        let delta = aligned_distance(&u, &next);
        u = next;
        if delta < POWER_ANGLE_TOL {
            break;
        }
    }

    let mut v = normalized(m.transpose_times(&u)).ok_or(Error::DegenerateStack)?;
    for _ in 0..POWER_MAX_ITERS {
        let next = match normalized(m.transpose_times(&m.times(&v))) {
            Some(n) => n,
            None => break,
        };
        let delta = aligned_distance(&v, &next);
        v = next;
        if delta < POWER_ANGLE_TOL {
            break;
        }
    }

    fix_sign(&mut v);
    let singular_value = vec_norm(&m.times(&v));
    Ok(PrincipalDirection { direction: Residual::new(v)?, singular_value })
}

fn vec_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn normalized(mut v: Vec<f64>) -> Option<Vec<f64>> {
    let n = vec_norm(&v);
    if !(n > EPS_ZERO) || !n.is_finite() {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= n);
    Some(v)
}

fn mat_vec(a: &[f64], k: usize, v: &[f64]) -> Vec<f64> {
    (0..k).map(|i| a[i * k..(i + 1) * k].iter().zip(v).map(|(x, y)| x * y).sum()).collect()
}

fn square_normalized(a: &[f64], k: usize) -> Vec<f64> {
    let mut out = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            out[i * k + j] = (0..k).map(|l| a[i * k + l] * a[l * k + j]).sum();
        }
    }
    let frob = vec_norm(&out);
    if frob > 0.0 && frob.is_finite() {
        out.iter_mut().for_each(|x| *x /= frob);
    }
    out
}

/// Distance between two unit vectors after aligning signs (~ angle for small angles).
fn aligned_distance(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let s = if d < 0.0 { -1.0 } else { 1.0 };
    a.iter().zip(b).map(|(x, y)| (x - s * y).powi(2)).sum::<f64>().sqrt()
}

fn fix_sign(v: &mut [f64]) {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}
