//! Special functions used by the collapsed block marginals.
//!
//! Everything here works in `f64`. The incomplete beta and gamma functions
//! are evaluated with the usual region split (continued fraction on one side,
//! symmetry or power series on the other) and are also available in log form
//! so that deep tail masses never underflow before they are combined.

use crate::error::{Error, Result};

const EPS: f64 = 1e-15;
const FPMIN: f64 = 1e-300;
const BASE_ITER_CAP: usize = 500;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Iteration cap for the continued fractions and series.
///
/// The base cap is 500; convergence near the distribution centre needs on the
/// order of `sqrt(shape)` terms, so the cap grows with the larger shape.
fn iter_cap(shape: f64) -> usize {
    BASE_ITER_CAP.max((20.0 * shape.sqrt()) as usize)
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

/// Stirling series for ln Γ(x), valid for x >= 10 to full double precision.
fn stirling(x: f64) -> f64 {
    const C: [f64; 8] = [
        1.0 / 12.0,
        -1.0 / 360.0,
        1.0 / 1260.0,
        -1.0 / 1680.0,
        1.0 / 1188.0,
        -691.0 / 360_360.0,
        1.0 / 156.0,
        -3617.0 / 122_400.0,
    ];
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut series = 0.0;
    let mut p = inv;
    for c in C {
        series += c * p;
        p *= inv2;
    }
    (x - 0.5) * x.ln() - x + HALF_LN_2PI + series
}

/// ln Γ(x) without argument checks. Callers guarantee `x > 0`.
pub(crate) fn lgamma(x: f64) -> f64 {
    if x <= 23.0 && x.fract() == 0.0 {
        // (x-1)! is exact in f64 here
        let mut f = 1.0;
        let mut k = 2.0;
        while k < x {
            f *= k;
            k += 1.0;
        }
        return f.ln();
    }
    if x >= 10.0 {
        return stirling(x);
    }
    // shift up with Γ(x) = Γ(x + m) / (x (x+1) ... (x+m-1))
    let mut prod = 1.0;
    let mut y = x;
    while y < 10.0 {
        prod *= y;
        y += 1.0;
    }
    stirling(y) - prod.ln()
}

/// ln B(a, b) without argument checks.
pub(crate) fn lbeta(a: f64, b: f64) -> f64 {
    lgamma(a) + lgamma(b) - lgamma(a + b)
}

/// Natural log of the gamma function.
pub fn log_gamma(x: f64) -> Result<f64> {
    check_positive("x", x)?;
    Ok(lgamma(x))
}

/// Natural log of the beta function B(a, b).
pub fn log_beta(a: f64, b: f64) -> Result<f64> {
    check_positive("a", a)?;
    check_positive("b", b)?;
    Ok(lbeta(a, b))
}

/// Modified Lentz evaluation of the incomplete beta continued fraction.
fn beta_cf(x: f64, a: f64, b: f64) -> Result<f64> {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    let cap = iter_cap(a.max(b));
    for m in 1..=cap {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            return Ok(h);
        }
    }
    Err(Error::numeric(format!(
        "incomplete beta continued fraction did not converge in {cap} iterations (x={x}, a={a}, b={b})"
    )))
}

/// Log of the incomplete-beta "front factor" x^a (1-x)^b / (a B(a,b)).
fn ln_beta_front(x: f64, a: f64, b: f64) -> f64 {
    a * x.ln() + b * (-x).ln_1p() - lbeta(a, b) - a.ln()
}

fn check_beta_args(x: f64, a: f64, b: f64) -> Result<()> {
    check_positive("a", a)?;
    check_positive("b", b)?;
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain(format!("x must lie in [0, 1], got {x}")));
    }
    Ok(())
}

/// Either `ln I_x(a,b)` directly, or `ln (1 - I_x(a,b))` when the symmetric
/// branch is the convergent one. The flag says which.
fn beta_tail(x: f64, a: f64, b: f64) -> Result<(f64, bool)> {
    if x < (a + 1.0) / (a + b + 2.0) {
        let cf = beta_cf(x, a, b)?;
        Ok((ln_beta_front(x, a, b) + cf.ln(), false))
    } else {
        let y = 1.0 - x;
        let cf = beta_cf(y, b, a)?;
        Ok((ln_beta_front(y, b, a) + cf.ln(), true))
    }
}

/// Natural log of the regularized incomplete beta function, ln I_x(a, b).
///
/// Stays finite for masses far below the smallest normal double.
pub fn ln_reg_inc_beta(x: f64, a: f64, b: f64) -> Result<f64> {
    check_beta_args(x, a, b)?;
    if x == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if x == 1.0 {
        return Ok(0.0);
    }
    let (ln_v, complement) = beta_tail(x, a, b)?;
    if complement {
        Ok((-ln_v.exp()).ln_1p())
    } else {
        Ok(ln_v)
    }
}

/// Regularized incomplete beta function I_x(a, b).
pub fn reg_inc_beta(x: f64, a: f64, b: f64) -> Result<f64> {
    check_beta_args(x, a, b)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let (ln_v, complement) = beta_tail(x, a, b)?;
    let v = ln_v.exp();
    Ok(if complement { 1.0 - v } else { v }.clamp(0.0, 1.0))
}

/// ln(1 - I_x(a, b)) = ln I_{1-x}(b, a), accurate in the upper tail.
fn ln_reg_inc_beta_upper(x: f64, a: f64, b: f64) -> Result<f64> {
    ln_reg_inc_beta(1.0 - x, b, a)
}

/// Bisection for x with I_x(a,b) = p, comparing in log space so that tiny
/// lower-tail targets keep their relative precision.
///
/// `ln_p` is ln p; `upper_hint` bounds the search from above (1 for the plain
/// quantile, x_max for truncated ones).
pub(crate) fn inv_reg_inc_beta_ln(ln_p: f64, a: f64, b: f64, upper: f64) -> Result<f64> {
    if ln_p == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    if ln_p >= 0.0 {
        return Ok(upper);
    }
    let p = ln_p.exp();
    let use_upper = p > 0.5;
    let ln_q = (-p).ln_1p();
    let mut lo = 0.0_f64;
    let mut hi = upper;
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let below = if use_upper {
            // I_mid < p  <=>  1 - I_mid > 1 - p
            ln_reg_inc_beta_upper(mid, a, b)? > ln_q
        } else {
            ln_reg_inc_beta(mid, a, b)? < ln_p
        };
        if below {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Inverse of the regularized incomplete beta function in its first argument.
pub fn inv_reg_inc_beta(p: f64, a: f64, b: f64) -> Result<f64> {
    check_positive("a", a)?;
    check_positive("b", b)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(format!("p must lie in [0, 1], got {p}")));
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    if p == 1.0 {
        return Ok(1.0);
    }
    inv_reg_inc_beta_ln(p.ln(), a, b, 1.0)
}

fn gamma_series(a: f64, x: f64) -> Result<f64> {
    let mut ap = a;
    let mut del = 1.0 / a;
    let mut sum = del;
    let cap = iter_cap(a.max(x));
    for _ in 0..cap {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * EPS {
            return Ok(sum);
        }
    }
    Err(Error::numeric(format!(
        "incomplete gamma series did not converge in {cap} iterations (a={a}, x={x})"
    )))
}

fn gamma_cf(a: f64, x: f64) -> Result<f64> {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / FPMIN;
    let mut d = 1.0 / b;
    let mut h = d;
    let cap = iter_cap(a.max(x));
    for i in 1..=cap {
        let i = i as f64;
        let an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = b + an / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            return Ok(h);
        }
    }
    Err(Error::numeric(format!(
        "incomplete gamma continued fraction did not converge in {cap} iterations (a={a}, x={x})"
    )))
}

fn check_gamma_args(a: f64, x: f64) -> Result<()> {
    check_positive("a", a)?;
    if !(x >= 0.0) || x.is_nan() {
        return Err(Error::domain(format!("x must be nonnegative, got {x}")));
    }
    Ok(())
}

/// Natural log of the regularized lower incomplete gamma function, ln P(a, x).
pub fn ln_reg_lower_inc_gamma(a: f64, x: f64) -> Result<f64> {
    check_gamma_args(a, x)?;
    if x == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    let ln_front = -x + a * x.ln() - lgamma(a);
    if x < a + 1.0 {
        Ok(ln_front + gamma_series(a, x)?.ln())
    } else {
        let q = (ln_front + gamma_cf(a, x)?.ln()).exp();
        Ok((-q).ln_1p())
    }
}

/// Regularized lower incomplete gamma function P(a, x) = γ(a, x) / Γ(a).
pub fn reg_lower_inc_gamma(a: f64, x: f64) -> Result<f64> {
    check_gamma_args(a, x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    let ln_front = -x + a * x.ln() - lgamma(a);
    if x < a + 1.0 {
        Ok((ln_front + gamma_series(a, x)?.ln()).exp().clamp(0.0, 1.0))
    } else {
        let q = (ln_front + gamma_cf(a, x)?.ln()).exp();
        Ok((1.0 - q).clamp(0.0, 1.0))
    }
}

/// ln Q(a, x) = ln(1 - P(a, x)), accurate in the upper tail.
fn ln_reg_upper_inc_gamma(a: f64, x: f64) -> Result<f64> {
    if x == 0.0 {
        return Ok(0.0);
    }
    let ln_front = -x + a * x.ln() - lgamma(a);
    if x < a + 1.0 {
        let p = (ln_front + gamma_series(a, x)?.ln()).exp();
        Ok((-p).ln_1p())
    } else {
        Ok(ln_front + gamma_cf(a, x)?.ln())
    }
}

/// Bisection for x with P(a, x) = p, restricted to [0, upper].
pub(crate) fn inv_reg_lower_inc_gamma_ln(ln_p: f64, a: f64, upper: f64) -> Result<f64> {
    if ln_p == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    let mut hi = upper;
    if hi.is_infinite() {
        // grow a bracket from the mean outwards
        hi = a.max(1.0);
        while ln_reg_lower_inc_gamma(a, hi)? < ln_p {
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(Error::numeric("gamma quantile bracket overflowed"));
            }
        }
    }
    let p = ln_p.exp();
    let use_upper = p > 0.5;
    let ln_q = (-p).ln_1p();
    let mut lo = 0.0_f64;
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let below = if use_upper {
            ln_reg_upper_inc_gamma(a, mid)? > ln_q
        } else {
            ln_reg_lower_inc_gamma(a, mid)? < ln_p
        };
        if below {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Inverse of P(a, ·): the x with P(a, x) = p.
pub fn inv_reg_lower_inc_gamma(p: f64, a: f64) -> Result<f64> {
    check_positive("a", a)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(format!("p must lie in [0, 1], got {p}")));
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    if p == 1.0 {
        return Ok(f64::INFINITY);
    }
    inv_reg_lower_inc_gamma_ln(p.ln(), a, f64::INFINITY)
}

/// Quantile of a Student-t distribution with `nu` degrees of freedom.
pub fn student_t_quantile(p: f64, nu: f64) -> Result<f64> {
    check_positive("nu", nu)?;
    if !(0.0 < p && p < 1.0) {
        return Err(Error::domain(format!("p must lie in (0, 1), got {p}")));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    // F(t) = I_{nu/(nu+t^2)}(nu/2, 1/2) / 2 for t < 0
    let tail = if p < 0.5 { p } else { 1.0 - p };
    let x = inv_reg_inc_beta(2.0 * tail, 0.5 * nu, 0.5)?;
    let t = (nu * (1.0 - x) / x).sqrt();
    Ok(if p < 0.5 { -t } else { t })
}

/// ln Σ exp(v_i), shifted by the maximum.
pub fn log_sum_exp(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::usage("log_sum_exp of an empty list"));
    }
    if values.len() == 1 {
        return Ok(values[0]);
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::usage("log_sum_exp needs at least one finite entry"));
    }
    if max.is_infinite() {
        return Ok(max);
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    Ok(max + sum.ln())
}
