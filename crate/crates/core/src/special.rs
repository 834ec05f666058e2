//! Integer-order Bessel functions `J_m`, `Y_m`, the Hankel function
//! `H_m^{(1)} = J_m + i Y_m`, and positive zeros of `J_m`.
//!
//! `J` comes from Miller's downward recurrence with the even-order
//! normalization sum, which is accurate for every order at once in the
//! working range `x <= ~100`. `Y_0` uses the Neumann expansion in `J_{2k}`,
//! `Y_1 = -Y_0'`, and higher orders follow the (upward-stable) recurrence.

use crate::error::{CoreError, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Euler-Mascheroni constant.
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `J_m(x)` and `Y_m(x)` bundled with `H_m^{(1)} = J_m + i Y_m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CylFunValue {
    pub j: f64,
    pub y: f64,
}

impl CylFunValue {
    pub fn h1(&self) -> Complex64 {
        Complex64::new(self.j, self.y)
    }
}

/// All of `J_0(x) .. J_{m_max}(x)` by Miller's algorithm.
pub fn bessel_j_all(m_max: usize, x: f64) -> Vec<f64> {
    assert!(x >= 0.0 && x.is_finite(), "bessel_j_all needs finite x >= 0");
    if x == 0.0 {
        let mut out = vec![0.0; m_max + 1];
        out[0] = 1.0;
        return out;
    }
    // start well above both the order and the argument
    let start = m_max + (x.ceil() as usize) + 16 + (x.sqrt() as usize) * 2;
    let start = if start % 2 == 0 { start } else { start + 1 };
    let mut f_next = 0.0_f64;
    let mut f_cur = 1e-300_f64;
    let mut out = vec![0.0; m_max + 1];
    let mut norm = 0.0_f64;
    for m in (0..=start).rev() {
        let f_prev = (2.0 * (m + 1) as f64 / x) * f_cur - f_next;
        f_next = f_cur;
        f_cur = f_prev;
        // f_cur now holds the unnormalized J_m
        if m <= m_max {
            out[m] = f_cur;
        }
        if m % 2 == 0 {
            norm += if m == 0 { f_cur } else { 2.0 * f_cur };
        }
        if f_cur.abs() > 1e250 {
            f_cur *= 1e-250;
            f_next *= 1e-250;
            norm *= 1e-250;
            for v in out.iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    for v in out.iter_mut() {
        *v /= norm;
    }
    out
}

/// `J_m(x)` for integer `m >= 0` and `x >= 0`.
pub fn bessel_j(m: usize, x: f64) -> f64 {
    bessel_j_all(m, x)[m]
}

/// `J_m'(x)`.
pub fn bessel_j_deriv(m: usize, x: f64) -> f64 {
    if m == 0 {
        return -bessel_j(1, x);
    }
    let j = bessel_j_all(m + 1, x);
    0.5 * (j[m - 1] - j[m + 1])
}

/// `Y_0(x)` and `Y_1(x)` via the Neumann expansion
/// `Y_0 = (2/pi)(ln(x/2)+gamma) J_0 + (4/pi) sum (-1)^{k+1} J_{2k}/k`
/// and `Y_1 = -Y_0'`.
fn bessel_y01(x: f64, j: &[f64]) -> (f64, f64) {
    let lg = (x / 2.0).ln() + EULER_GAMMA;
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut sign = 1.0;
    let mut k = 1usize;
    while 2 * k + 1 < j.len() {
        s0 += sign * j[2 * k] / k as f64;
        s1 += sign * (j[2 * k - 1] - j[2 * k + 1]) / (2.0 * k as f64);
        sign = -sign;
        k += 1;
    }
    let y0 = (2.0 / PI) * lg * j[0] + (4.0 / PI) * s0;
    let y0p = (2.0 / PI) * (j[0] / x - lg * j[1]) + (4.0 / PI) * s1;
    (y0, -y0p)
}

/// All of `Y_0(x) .. Y_{m_max}(x)` for `x > 0` (upward recurrence).
pub fn bessel_y_all(m_max: usize, x: f64) -> Result<Vec<f64>> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(CoreError::Domain(format!(
            "Y_m and H_m^(1) require x > 0, got {x}"
        )));
    }
    // J values padded high enough that the Neumann tail is below round-off
    let j = bessel_j_all(m_max.max(2) + (x.ceil() as usize) + 40, x);
    let (y0, y1) = bessel_y01(x, &j);
    let mut out = vec![0.0; m_max + 1];
    out[0] = y0;
    if m_max >= 1 {
        out[1] = y1;
    }
    for m in 1..m_max {
        out[m + 1] = (2.0 * m as f64 / x) * out[m] - out[m - 1];
    }
    Ok(out)
}

/// `Y_m(x)` for `x > 0`.
pub fn bessel_y(m: usize, x: f64) -> Result<f64> {
    Ok(bessel_y_all(m, x)?[m])
}

/// `H_m^{(1)}(x) = J_m(x) + i Y_m(x)` for `x > 0`.
pub fn hankel1(m: usize, x: f64) -> Result<Complex64> {
    Ok(cyl_fun(m, x)?.h1())
}

/// `J_m` and `Y_m` together.
pub fn cyl_fun(m: usize, x: f64) -> Result<CylFunValue> {
    let y = bessel_y(m, x)?;
    Ok(CylFunValue {
        j: bessel_j(m, x),
        y,
    })
}

/// `J_m` and `Y_m` for all orders `0..=m_max` at once.
pub fn cyl_fun_all(m_max: usize, x: f64) -> Result<Vec<CylFunValue>> {
    let y = bessel_y_all(m_max, x)?;
    let j = bessel_j_all(m_max, x);
    Ok((0..=m_max)
        .map(|m| CylFunValue { j: j[m], y: y[m] })
        .collect())
}

/// `d/dx H_m^{(1)}(x)`.
pub fn hankel1_deriv(m: usize, x: f64) -> Result<Complex64> {
    let top = m + 1;
    let h = cyl_fun_all(top, x)?;
    if m == 0 {
        Ok(-h[1].h1())
    } else {
        Ok(0.5 * (h[m - 1].h1() - h[m + 1].h1()))
    }
}

/// Bisection to a root of `f` inside a bracket with a sign change.
///
/// Shared by the Bessel-zero search, the analytic buckling reference and the
/// Robin cavity roots.
pub fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> f64 {
    let mut fa = f(a);
    debug_assert!(fa * f(b) <= 0.0, "bisect called without a sign change");
    for _ in 0..iters {
        let mid = 0.5 * (a + b);
        let fm = f(mid);
        if fa * fm <= 0.0 {
            b = mid;
        } else {
            a = mid;
            fa = fm;
        }
    }
    0.5 * (a + b)
}

/// Scan `f` on `[start, inf)` with step `step` and return the `s`-th root
/// (1-based), refined by bisection.
pub fn scan_roots(f: impl Fn(f64) -> f64, start: f64, step: f64, s: usize) -> f64 {
    assert!(s >= 1);
    let mut found = 0usize;
    let mut a = start;
    let mut fa = f(a);
    loop {
        let b = a + step;
        let fb = f(b);
        if fa == 0.0 {
            found += 1;
            if found == s {
                return a;
            }
        } else if fa * fb < 0.0 {
            found += 1;
            if found == s {
                return bisect(&f, a, b, 120);
            }
        }
        a = b;
        fa = fb;
    }
}

/// `s`-th positive zero of `J_m` (1-based).
///
/// Consecutive zeros of `J_m` are more than 3 apart in the working range, so
/// a unit-step scan cannot skip one.
pub fn bessel_j_zero(m: usize, s: usize) -> f64 {
    assert!(s >= 1, "zero index is 1-based");
    scan_roots(|x| bessel_j(m, x), m as f64 + 1e-3, 1.0, s)
}
