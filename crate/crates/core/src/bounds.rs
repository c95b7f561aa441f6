//! Concave prototype functions and their first-order convex majorants.
//!
//! Every `F*` function is an upper bound of the matching `f*` function that
//! touches it at the expansion point. The successive convex approximation
//! steps in [`crate::static_opt`] and [`crate::mobile_opt`] are built from
//! these, so the property tests in this module and in the oracle carry most
//! of the weight for the monotonicity of both algorithms.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use thiserror::Error;

/// Expansion points are pushed at least this far away from zero.
pub const DOMAIN_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundError {
    #[error("argument `{name}` must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("power exponent c = {0} is outside (-inf, 0) U (1, inf)")]
    BadExponent(f64),
    #[error("dimension mismatch: {left} vs {right}")]
    Dimension { left: usize, right: usize },
    #[error("matrix is not positive semidefinite (min eigenvalue {0})")]
    NotPsd(f64),
    #[error("matrix must be square with side {expected}, got {rows}x{cols}")]
    Shape { expected: usize, rows: usize, cols: usize },
}

pub type Result<T> = std::result::Result<T, BoundError>;

/// Sign of the bilinear prototype `sign * x * y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BilSign {
    Plus,
    Minus,
}

impl BilSign {
    pub fn of(value: f64) -> Self {
        if value > 0.0 {
            BilSign::Plus
        } else {
            BilSign::Minus
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            BilSign::Plus => 1.0,
            BilSign::Minus => -1.0,
        }
    }
}

fn positive(name: &'static str, value: f64) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(BoundError::NonPositive { name, value })
    }
}

fn floor(x0: f64) -> f64 {
    x0.max(DOMAIN_FLOOR)
}

fn check_exponent(c: f64) -> Result<()> {
    if (c > 1.0 || c < 0.0) && c.is_finite() {
        Ok(())
    } else {
        Err(BoundError::BadExponent(c))
    }
}

/// `-x^c`, concave for `c > 1` or `c < 0`.
pub fn f_pow(x: f64, c: f64) -> Result<f64> {
    check_exponent(c)?;
    Ok(-positive("x", x)?.powf(c))
}

/// `(c-1) x0^c - c x0^(c-1) x`, affine in `x`.
pub fn big_f_pow(x: f64, c: f64, x0: f64) -> Result<f64> {
    check_exponent(c)?;
    positive("x", x)?;
    let x0 = floor(positive("x0", x0)?);
    Ok((c - 1.0) * x0.powf(c) - c * x0.powf(c - 1.0) * x)
}

/// Slope of [`big_f_pow`] with respect to `x`.
pub fn big_f_pow_slope(c: f64, x0: f64) -> f64 {
    -c * floor(x0).powf(c - 1.0)
}

fn same_len(a: usize, b: usize) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(BoundError::Dimension { left: a, right: b })
    }
}

/// `-||x - c||^2`.
pub fn f_qua(x: &[f64], c: &[f64]) -> Result<f64> {
    same_len(x.len(), c.len())?;
    Ok(-x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
}

/// `2 (c - x0)^T (x - x0) - ||x0 - c||^2`, affine in `x`.
pub fn big_f_qua(x: &[f64], c: &[f64], x0: &[f64]) -> Result<f64> {
    same_len(x.len(), c.len())?;
    same_len(x.len(), x0.len())?;
    let mut lin = 0.0;
    let mut sq = 0.0;
    for i in 0..x.len() {
        lin += 2.0 * (c[i] - x0[i]) * (x[i] - x0[i]);
        sq += (x0[i] - c[i]) * (x0[i] - c[i]);
    }
    Ok(lin - sq)
}

/// `sign * x * y` on the positive orthant.
pub fn f_bil(x: f64, y: f64, sign: BilSign) -> Result<f64> {
    Ok(sign.as_f64() * positive("x", x)? * positive("y", y)?)
}

/// Convex majorant of `sign * x * y` around `(x0, y0)`.
pub fn big_f_bil(x: f64, y: f64, sign: BilSign, x0: f64, y0: f64) -> Result<f64> {
    positive("x", x)?;
    positive("y", y)?;
    let x0 = floor(positive("x0", x0)?);
    let y0 = floor(positive("y0", y0)?);
    Ok(match sign {
        BilSign::Plus => 0.5 * ((y0 / x0) * x * x + (x0 / y0) * y * y),
        BilSign::Minus => {
            0.25 * (x - y) * (x - y) + 0.25 * (x0 + y0) * (x0 + y0) - 0.5 * (x0 + y0) * (x + y)
        }
    })
}

/// Gradient of [`big_f_bil`] at `(x, y)`.
pub fn big_f_bil_grad(x: f64, y: f64, sign: BilSign, x0: f64, y0: f64) -> [f64; 2] {
    let x0 = floor(x0);
    let y0 = floor(y0);
    match sign {
        BilSign::Plus => [(y0 / x0) * x, (x0 / y0) * y],
        BilSign::Minus => [0.5 * (x - y) - 0.5 * (x0 + y0), -0.5 * (x - y) - 0.5 * (x0 + y0)],
    }
}

fn check_square(c: &DMatrix<C64>, n: usize) -> Result<()> {
    if c.nrows() != n || c.ncols() != n {
        return Err(BoundError::Shape {
            expected: n,
            rows: c.nrows(),
            cols: c.ncols(),
        });
    }
    Ok(())
}

/// Rejects matrices whose Hermitian part has an eigenvalue below `-1e-9`.
pub fn check_psd(c: &DMatrix<C64>) -> Result<()> {
    let n = c.nrows();
    check_square(c, n)?;
    if n == 0 {
        return Ok(());
    }
    let herm = (c + c.adjoint()) * C64::new(0.5, 0.0);
    let min = herm
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if min < -1e-9 {
        return Err(BoundError::NotPsd(min));
    }
    Ok(())
}

fn quad(c: &DMatrix<C64>, a: &[C64], b: &[C64]) -> C64 {
    // a^H C b
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..a.len() {
        let mut row = C64::new(0.0, 0.0);
        for j in 0..b.len() {
            row += c[(i, j)] * b[j];
        }
        acc += a[i].conj() * row;
    }
    acc
}

/// `-x^H C x / y`.
pub fn f_qol(x: &[C64], y: f64, c: &DMatrix<C64>) -> Result<f64> {
    check_square(c, x.len())?;
    check_psd(c)?;
    let y = positive("y", y)?;
    Ok(-quad(c, x, x).re / y)
}

/// `(x0^H C x0 / y0^2) y - 2 Re{x0^H C x} / y0`, affine in `(x, y)`.
pub fn big_f_qol(x: &[C64], y: f64, c: &DMatrix<C64>, x0: &[C64], y0: f64) -> Result<f64> {
    check_square(c, x.len())?;
    same_len(x.len(), x0.len())?;
    check_psd(c)?;
    positive("y", y)?;
    let y0 = floor(positive("y0", y0)?);
    Ok(quad(c, x0, x0).re / (y0 * y0) * y - 2.0 * quad(c, x0, x).re / y0)
}

/// First-order upper bound of `log(u + offset)` around `u0`.
pub fn log_upper_bound(u: f64, u0: f64, offset: f64) -> Result<f64> {
    let base = positive("u0 + offset", u0 + offset)?;
    Ok(base.ln() + (u - u0) / base)
}

/// Slope and intercept of [`log_upper_bound`] as `intercept + slope * u`.
pub fn log_upper_bound_coeffs(u0: f64, offset: f64) -> Result<(f64, f64)> {
    let base = positive("u0 + offset", u0 + offset)?;
    Ok((base.ln() - u0 / base, 1.0 / base))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn pow_examples() {
        assert_abs_diff_eq!(f_pow(1.0, 2.0).unwrap(), -1.0);
        assert_abs_diff_eq!(big_f_pow(1.0, 2.0, 1.0).unwrap(), -1.0);
        assert_abs_diff_eq!(big_f_pow(2.0, 2.0, 1.0).unwrap(), -3.0);
        assert_abs_diff_eq!(f_pow(2.0, 2.0).unwrap(), -4.0);
        // (c-1) x0^c - c x0^(c-1) x with c=-1, x0=2, x=4: -2*0.5 + 0.25*4 = 0
        assert_abs_diff_eq!(big_f_pow(4.0, -1.0, 2.0).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f_pow(4.0, -1.0).unwrap(), -0.25);
    }

    #[test]
    fn pow_domain_errors() {
        assert!(matches!(f_pow(0.0, 2.0), Err(BoundError::NonPositive { .. })));
        assert!(matches!(big_f_pow(1.0, 0.5, 1.0), Err(BoundError::BadExponent(_))));
        assert!(matches!(big_f_pow(1.0, 2.0, -1.0), Err(BoundError::NonPositive { .. })));
    }

    #[test]
    fn qua_examples() {
        let x0 = [0.3, -1.2];
        let c = [1.0, 2.0];
        assert_abs_diff_eq!(big_f_qua(&x0, &c, &x0).unwrap(), -(0.7f64.powi(2) + 3.2f64.powi(2)));
        assert_abs_diff_eq!(big_f_qua(&c, &c, &c).unwrap(), 0.0);
        let v = big_f_qua(&[2.0, 0.0], &[1.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(v, 3.0);
        assert!(v >= f_qua(&[2.0, 0.0], &[1.0, 0.0]).unwrap());
        assert!(big_f_qua(&[1.0], &[1.0, 2.0], &[0.0]).is_err());
    }

    #[test]
    fn bil_examples() {
        assert_abs_diff_eq!(big_f_bil(1.0, 1.0, BilSign::Plus, 1.0, 1.0).unwrap(), 1.0);
        assert_abs_diff_eq!(big_f_bil(2.0, 3.0, BilSign::Plus, 1.0, 1.0).unwrap(), 6.5);
        assert_abs_diff_eq!(big_f_bil(1.0, 1.0, BilSign::Minus, 1.0, 1.0).unwrap(), -1.0);
        assert!(f_bil(-1.0, 1.0, BilSign::Plus).is_err());
    }

    #[test]
    fn qol_examples() {
        let c = DMatrix::from_element(1, 1, C64::new(1.0, 0.0));
        let one = [C64::new(1.0, 0.0)];
        let two = [C64::new(2.0, 0.0)];
        assert_abs_diff_eq!(big_f_qol(&two, 4.0, &c, &one, 1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(f_qol(&two, 4.0, &c).unwrap(), -1.0);
        let zero = [C64::new(0.0, 0.0)];
        assert_abs_diff_eq!(big_f_qol(&two, 4.0, &c, &zero, 1.0).unwrap(), 0.0);
        let bad = DMatrix::from_element(1, 1, C64::new(-1.0, 0.0));
        assert!(matches!(f_qol(&one, 1.0, &bad), Err(BoundError::NotPsd(_))));
        assert!(f_qol(&one, 0.0, &c).is_err());
    }

    #[test]
    fn log_bound_examples() {
        assert_abs_diff_eq!(log_upper_bound(3.0, 3.0, 1.0).unwrap(), 4f64.ln());
        assert_abs_diff_eq!(log_upper_bound(1.0, 0.0, 1.0).unwrap(), 1.0);
        let e = std::f64::consts::E;
        assert_abs_diff_eq!(log_upper_bound(e, 1.0, 0.0).unwrap(), e - 1.0, epsilon = 1e-15);
        assert!(log_upper_bound(1.0, -2.0, 1.0).is_err());
        let (a, b) = log_upper_bound_coeffs(2.0, 0.5).unwrap();
        assert_abs_diff_eq!(a + b * 7.0, log_upper_bound(7.0, 2.0, 0.5).unwrap(), epsilon = 1e-14);
    }
}
