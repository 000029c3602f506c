//! Double-double division, `exp`, `ln` and real powers.
//!
//! In `twofloat` 0.8 the quotient of two `TwoFloat`s, `hypot` and the
//! transcendental functions are only accurate to `f64` level or worse.

use twofloat::TwoFloat;

// ln 2 to 106 bits.
const LN2_HI: f64 = 6.931_471_805_599_453e-1;
const LN2_LO: f64 = 2.319_046_813_846_299_6e-17;

fn ln2() -> TwoFloat {
    TwoFloat::new_add(LN2_HI, LN2_LO)
}

/// `a / b` by long division with two correction terms.
pub(crate) fn div(a: TwoFloat, b: TwoFloat) -> TwoFloat {
    let q1 = a.hi() / b.hi();
    let r = a - b * q1;
    let q2 = r.hi() / b.hi();
    let r = r - b * q2;
    let q3 = r.hi() / b.hi();
    TwoFloat::new_add(q1, q2) + q3
}

/// `1 / b` by one Newton step from the `f64` reciprocal.
pub(crate) fn recip(b: TwoFloat) -> TwoFloat {
    let r0 = 1.0 / b.hi();
    let e = 1.0 - b * r0;
    TwoFloat::from(r0) + e * r0
}

/// `e^x` to about 28 significant digits for `|x| < 700`.
pub(crate) fn exp(x: TwoFloat) -> TwoFloat {
    let k = (x.hi() / LN2_HI).round();
    // r = (x - k ln2) / 1024, |r| < 3.4e-4
    let r = (x - ln2() * k) / 1024.0;
    let mut term = TwoFloat::from(1.0);
    let mut sum = TwoFloat::from(1.0);
    for i in 1..=14 {
        term = term * r / i as f64;
        sum += term;
    }
    for _ in 0..10 {
        sum = sum * sum;
    }
    sum * 2f64.powi(k as i32)
}

/// Natural log of a positive double-double.
pub(crate) fn ln(x: TwoFloat) -> TwoFloat {
    let y = TwoFloat::from(x.hi().ln());
    // Newton on e^y = x converges quadratically from the f64 start.
    y + x * exp(-y) - 1.0
}

/// `x^s` for `x > 0`.
pub(crate) fn powf(x: TwoFloat, s: f64) -> TwoFloat {
    if s == s.round() && s.abs() <= 64.0 {
        return x.powi(s as i32);
    }
    exp(ln(x) * s)
}
