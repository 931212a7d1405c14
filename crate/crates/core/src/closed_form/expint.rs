//! Generalized exponential integral `E_h(x) = ∫_1^∞ e^{-xt} t^{-h} dt`.
//!
//! Power series for `x <= 1`, modified Lentz continued fraction above. The
//! scaled form `e^x E_h(x)` is what the completely-overlapped SE needs and it
//! stays finite for the very large `x = 1/(β p_u)` produced at low SNR.

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const EPS: f64 = 1e-16;
const MAX_ITER: usize = 10_000;
const TINY: f64 = 1e-300;

pub fn exp_integral(h: u32, x: f64) -> Result<f64> {
    check(h, x)?;
    if x <= 1.0 {
        Ok(series(h, x))
    } else {
        Ok(continued_fraction_scaled(h, x) * (-x).exp())
    }
}

/// `e^x E_h(x)`.
pub fn exp_integral_scaled(h: u32, x: f64) -> Result<f64> {
    check(h, x)?;
    if x <= 1.0 {
        Ok(series(h, x) * x.exp())
    } else {
        Ok(continued_fraction_scaled(h, x))
    }
}

fn check(h: u32, x: f64) -> Result<()> {
    if h == 0 {
        return Err(Error::Domain("exponential integral order must be >= 1".into()));
    }
    if !(x.is_finite() && x > 0.0) {
        return Err(Error::Domain(format!("exponential integral needs x > 0, got {x}")));
    }
    Ok(())
}

fn series(h: u32, x: f64) -> f64 {
    let nm1 = h as i64 - 1;
    let mut ans = if nm1 != 0 {
        1.0 / nm1 as f64
    } else {
        -x.ln() - EULER_GAMMA
    };
    let mut fact = 1.0;
    for i in 1..MAX_ITER as i64 {
        fact *= -x / i as f64;
        let del = if i != nm1 {
            -fact / (i - nm1) as f64
        } else {
            let psi = -EULER_GAMMA + (1..=nm1).map(|k| 1.0 / k as f64).sum::<f64>();
            fact * (-x.ln() + psi)
        };
        ans += del;
        if del.abs() < ans.abs() * EPS {
            break;
        }
    }
    ans
}

fn continued_fraction_scaled(h: u32, x: f64) -> f64 {
    let n = h as f64;
    let mut b = x + n;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut acc = d;
    for i in 1..MAX_ITER {
        let i = i as f64;
        let a = -i * (n - 1.0 + i);
        b += 2.0;
        d = 1.0 / (a * d + b);
        c = b + a / c;
        let del = c * d;
        acc *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Adaptive Simpson on t ∈ [1, ∞) after substituting t = 1/u, which maps
    /// the integral to ∫_0^1 e^{-x/u} u^{h-2} du.
    fn quadrature(h: u32, x: f64) -> f64 {
        let f = move |u: f64| {
            if u <= 0.0 {
                0.0
            } else {
                (-x / u).exp() * u.powi(h as i32 - 2)
            }
        };
        // E_h(x) is of order e^{-x}/(x+h); ask for 1e-13 of that
        let scale = (-x).exp() / (x + h as f64);
        adaptive_simpson(&f, 0.0, 1.0, 1e-13 * scale, 50)
    }

    fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let c = 0.5 * (a + b);
        let (fa, fb, fc) = (f(a), f(b), f(c));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fc + fb);
        recurse(f, a, b, fa, fb, fc, whole, tol, depth)
    }

    #[allow(clippy::too_many_arguments)]
    fn recurse(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fb: f64, fc: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let c = 0.5 * (a + b);
        let (d, e) = (0.5 * (a + c), 0.5 * (c + b));
        let (fd, fe) = (f(d), f(e));
        let left = (c - a) / 6.0 * (fa + 4.0 * fd + fc);
        let right = (b - c) / 6.0 * (fc + 4.0 * fe + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            recurse(f, a, c, fa, fc, fd, left, tol / 2.0, depth - 1)
                + recurse(f, c, b, fc, fb, fe, right, tol / 2.0, depth - 1)
        }
    }

    #[test]
    fn e1_at_one_matches_quadrature() {
        let q = quadrature(1, 1.0);
        assert!((q - 0.219_383_934_395_520_3).abs() < 1e-12);
        let v = exp_integral(1, 1.0).unwrap();
        assert!((v - q).abs() / q < 1e-10);
    }

    #[test]
    fn matches_quadrature_on_grid() {
        for h in 1..=6 {
            for &x in &[0.01, 0.1, 0.5, 0.999, 1.001, 2.0, 5.0, 12.0, 30.0] {
                let q = quadrature(h, x);
                let v = exp_integral(h, x).unwrap();
                assert!((v - q).abs() / q < 1e-10, "E_{h}({x}): {v} vs {q}");
            }
        }
    }

    #[test]
    fn small_argument_limit() {
        let v = exp_integral(2, 1e-12).unwrap();
        assert!((v - 1.0).abs() < 1e-9);
        let v = exp_integral(4, 1e-12).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn recurrence_holds() {
        for h in 1..8 {
            for i in 1..60 {
                let x = 0.05 * i as f64 + 0.01 * (i * i) as f64;
                let lhs = exp_integral(h + 1, x).unwrap();
                let rhs = ((-x).exp() - x * exp_integral(h, x).unwrap()) / h as f64;
                assert!((lhs - rhs).abs() <= 1e-9 * lhs.abs().max(1e-300), "h={h} x={x}");
            }
        }
    }

    #[test]
    fn scaled_form_stays_finite_for_huge_x() {
        // e^x E_h(x) ~ 1/(x + h) for large x
        let x = 1e9;
        for h in 1..4 {
            let v = exp_integral_scaled(h, x).unwrap();
            assert!((v * (x + h as f64) - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_bad_domain() {
        assert!(exp_integral(1, 0.0).is_err());
        assert!(exp_integral(1, -1.0).is_err());
        assert!(exp_integral(0, 1.0).is_err());
    }
}
