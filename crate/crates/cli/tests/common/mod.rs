//! Independent reference computations for the acceptance suite.

use num_bigint::BigInt;

use nll_core::classifier::MlpParams;
use nll_core::data::LabeledDataset;

/// Decimal digits carried by the fixed-point oracle.
const DIGITS: u32 = 60;

fn scale() -> BigInt {
    BigInt::from(10u32).pow(DIGITS)
}

/// Exact fixed-point image of a finite, positive f64.
fn fixed(x: f64) -> BigInt {
    assert!(x.is_finite() && x > 0.0);
    let bits = x.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (mant, e) = if exp == 0 {
        (frac, -1074)
    } else {
        (frac | (1 << 52), exp - 1075)
    };
    let v = BigInt::from(mant) * scale();
    if e >= 0 {
        v << e as usize
    } else {
        v >> (-e) as usize
    }
}

fn mul(a: &BigInt, b: &BigInt) -> BigInt {
    a * b / scale()
}

fn div(a: &BigInt, b: &BigInt) -> BigInt {
    a * scale() / b
}

/// `2 atanh(z) = ln((1 + z) / (1 - z))` by its power series, |z| <= 1/3.
fn two_atanh(z: &BigInt) -> BigInt {
    let z2 = mul(z, z);
    let mut term = z.clone();
    let mut sum = BigInt::from(0);
    let mut n = 1u32;
    while term != BigInt::from(0) {
        sum += &term / n;
        term = mul(&term, &z2);
        n += 2;
    }
    sum * 2
}

fn ln(x: &BigInt) -> BigInt {
    let one = scale();
    let two = &one * 2;
    let ln2 = two_atanh(&div(&one, &(&one * 3)));
    let (mut y, mut k) = (x.clone(), 0i64);
    while y >= two {
        y >>= 1;
        k += 1;
    }
    while y < one {
        y <<= 1;
        k -= 1;
    }
    // y in [1, 2): z = (y - 1) / (y + 1) <= 1/3
    let z = div(&(&y - &one), &(&y + &one));
    two_atanh(&z) + ln2 * k
}

fn sqrt(x: &BigInt) -> BigInt {
    (x * scale()).sqrt()
}

fn to_f64(x: &BigInt) -> f64 {
    // Keep 30 digits; the comparison tolerance is 1e-10.
    let shifted = x / BigInt::from(10u32).pow(DIGITS - 30);
    shifted.to_string().parse::<f64>().unwrap() / 1e30
}

/// `sqrt(8 (d (ln(2m / d) + 1) + ln(4 / delta)) / m)` in fixed point.
pub fn vc_bound_reference(m: u64, d_vc: f64, delta: f64) -> f64 {
    let one = scale();
    let m_fx = BigInt::from(m) * &one;
    let d = fixed(d_vc);
    let inner = mul(&d, &(ln(&div(&(&m_fx * 2), &d)) + &one)) + ln(&div(&(&one * 4), &fixed(delta)));
    to_f64(&sqrt(&div(&(inner * 8), &m_fx)))
}

/// Largest entrywise `|analytic - numeric| / max(|analytic|, |numeric|, floor)`
/// between backprop and central differences of the mean loss.
pub fn gradient_relative_error(params: &MlpParams, ds: &LabeledDataset, h: f64, floor: f64) -> f64 {
    let (_, grads) = params.loss_and_grad(ds).unwrap();
    let analytic = grads.flat();
    let base = params.flat();
    let mut probe = params.clone();
    let mut worst: f64 = 0.0;
    for (i, &a) in analytic.iter().enumerate() {
        let mut v = base.clone();
        v[i] = base[i] + h;
        probe.set_flat(&v).unwrap();
        let up = probe.loss(ds).unwrap();
        v[i] = base[i] - h;
        probe.set_flat(&v).unwrap();
        let down = probe.loss(ds).unwrap();
        let numeric = (up - down) / (2.0 * h);
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
        worst = worst.max(err);
    }
    worst
}

/// Spot values of the fixed-point primitives against libm.
pub fn self_check() -> bool {
    let e = ln(&fixed(std::f64::consts::E));
    (to_f64(&e) - 1.0).abs() < 1e-15
        && (to_f64(&ln(&fixed(1e6))) - 6.0 * std::f64::consts::LN_10).abs() < 1e-13
        && (to_f64(&ln(&fixed(0.01))) + 2.0 * std::f64::consts::LN_10).abs() < 1e-14
        && (to_f64(&sqrt(&fixed(2.0))) - std::f64::consts::SQRT_2).abs() < 1e-15
}
