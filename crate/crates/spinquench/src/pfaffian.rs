//! Pfaffians by Parlett-Reid elimination with partial pivoting.
//!
//! Only the strict upper triangle is stored and updated, row-major, so the
//! elimination costs about `n^3 / 3` multiply-adds.

use nalgebra::{ComplexField, DMatrix};

use crate::error::{Error, Result};

/// Element types accepted by the Pfaffian routines (`f64` and `Complex64`).
pub trait PfScalar: ComplexField<RealField = f64> + Copy {}
impl<T: ComplexField<RealField = f64> + Copy> PfScalar for T {}

/// Relative antisymmetry tolerance used by the checked entry points.
pub const ANTISYMMETRY_TOL: f64 = 1e-10;

/// Pfaffian in log form: `Pf = phase * exp(log_abs)`. For a singular matrix
/// `phase` is zero and `log_abs` is `-inf`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogPf<T> {
    pub phase: T,
    pub log_abs: f64,
}

impl<T: PfScalar> LogPf<T> {
    pub fn value(&self) -> T {
        self.phase.scale(self.log_abs.exp())
    }
}

fn check<T: PfScalar>(m: &DMatrix<T>) -> Result<()> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: m.ncols() });
    }
    if n % 2 == 1 {
        return Err(Error::OddDimension(n));
    }
    let scale = m.iter().map(|v| v.modulus()).fold(1.0, f64::max);
    let mut dev: f64 = 0.0;
    for j in 0..n {
        for i in j..n {
            dev = dev.max((m[(i, j)] + m[(j, i)]).modulus());
        }
    }
    if dev > ANTISYMMETRY_TOL * scale {
        return Err(Error::NotAntisymmetric(dev));
    }
    Ok(())
}

/// `Pf(m)`, after validating shape and antisymmetry.
pub fn pfaffian<T: PfScalar>(m: &DMatrix<T>) -> Result<T> {
    Ok(log_pfaffian(m)?.value())
}

/// `Pf(m)` in log form, after validating shape and antisymmetry.
pub fn log_pfaffian<T: PfScalar>(m: &DMatrix<T>) -> Result<LogPf<T>> {
    check(m)?;
    Ok(log_pfaffian_unchecked(m))
}

/// `Pf(m)` in log form; only the strict upper triangle of `m` is read.
pub fn log_pfaffian_unchecked<T: PfScalar>(m: &DMatrix<T>) -> LogPf<T> {
    let n = m.nrows();
    let mut u = vec![T::zero(); n * n];
    for i in 0..n {
        for j in i + 1..n {
            u[i * n + j] = m[(i, j)];
        }
    }
    eliminate(&mut u, n)
}

/// Swap indices `p < q` of the antisymmetric matrix held in the upper triangle.
fn swap_upper<T: PfScalar>(u: &mut [T], n: usize, p: usize, q: usize) {
    for r in 0..p {
        u.swap(r * n + p, r * n + q);
    }
    for r in p + 1..q {
        let a = u[p * n + r];
        u[p * n + r] = -u[r * n + q];
        u[r * n + q] = -a;
    }
    for r in q + 1..n {
        u.swap(p * n + r, q * n + r);
    }
    u[p * n + q] = -u[p * n + q];
}

fn eliminate<T: PfScalar>(u: &mut [T], n: usize) -> LogPf<T> {
    let mut phase = T::one();
    let mut log_abs = 0.0;
    let mut tau = vec![T::zero(); n];
    let mut v = vec![T::zero(); n];
    let mut k = 0;
    while k + 1 < n {
        let row = k * n;
        let (mut kp, mut best) = (k + 1, u[row + k + 1].modulus());
        for i in k + 2..n {
            let a = u[row + i].modulus();
            if a > best {
                best = a;
                kp = i;
            }
        }
        if best == 0.0 {
            return LogPf { phase: T::zero(), log_abs: f64::NEG_INFINITY };
        }
        if kp != k + 1 {
            swap_upper(u, n, k + 1, kp);
            phase = -phase;
        }
        let piv = u[row + k + 1];
        log_abs += piv.modulus().ln();
        phase *= piv.scale(1.0 / piv.modulus());
        if k + 2 < n {
            let inv = T::one() / piv;
            let r1 = (k + 1) * n;
            for j in k + 2..n {
                tau[j] = u[row + j] * inv;
                v[j] = -u[r1 + j];
            }
            for i in k + 2..n {
                let (ti, vi) = (tau[i], v[i]);
                let ri = &mut u[i * n + i + 1..i * n + n];
                for (x, j) in ri.iter_mut().zip(i + 1..n) {
                    *x += ti * v[j] - vi * tau[j];
                }
            }
        }
        k += 2;
    }
    LogPf { phase, log_abs }
}
