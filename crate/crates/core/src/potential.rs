//! Exact comparison of sums `sum_i a_i * n^{e_i}` with rational `a_i >= 0`
//! and rational exponents.
//!
//! Such sums are irrational in general. [`compare`] first tries `f64` with a
//! relative safety margin, then bounds both sides with fixed-point interval
//! arithmetic (outward rounding, precision doubled until the intervals
//! separate). Sums that agree term by term compare equal without any
//! numerics; sums that still overlap at the top precision are declared equal.

use std::cmp::Ordering;

use num::bigint::BigInt;
use num::{Integer, One, Signed, ToPrimitive, Zero};

use crate::rational::{to_f64, Rational};

const FAST_MARGIN: f64 = 1e-9;
const START_BITS: u64 = 64;
const MAX_BITS: u64 = 4096;
const GUARD_BITS: u64 = 64;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Term {
    pub exponent: Rational,
    pub coeff: Rational,
}

impl Term {
    pub fn new(coeff: Rational, exponent: Rational) -> Self {
        Self { exponent, coeff }
    }
}

/// Sorted by exponent, equal exponents merged, zero coefficients dropped.
pub fn canonical(terms: &[Term]) -> Vec<Term> {
    let mut sorted: Vec<Term> = terms.iter().filter(|t| !t.coeff.is_zero()).cloned().collect();
    sorted.sort();
    let mut out: Vec<Term> = Vec::with_capacity(sorted.len());
    for t in sorted {
        match out.last_mut() {
            Some(last) if last.exponent == t.exponent => last.coeff += t.coeff,
            _ => out.push(t),
        }
    }
    out
}

/// `f64` estimate, `None` when a term over- or underflows.
pub fn eval_f64(terms: &[Term], n: u64) -> Option<f64> {
    let log2n = (n as f64).log2();
    let mut total = 0.0;
    for t in terms {
        let e = to_f64(&t.exponent) * log2n;
        if !(-1000.0..=1000.0).contains(&e) {
            return None;
        }
        total += to_f64(&t.coeff) * e.exp2();
    }
    total.is_finite().then_some(total)
}

fn pow_int(n: u64, e: &BigInt) -> Rational {
    let base = Rational::from_integer(BigInt::from(n));
    let k = e.abs().to_u32().expect("exponent fits in u32");
    let p = num::pow(base, k as usize);
    if e.is_negative() {
        p.recip()
    } else {
        p
    }
}

fn floor_mul(x: &BigInt, r: &Rational) -> BigInt {
    (x * r.numer()).div_floor(r.denom())
}

fn ceil_mul(x: &BigInt, r: &Rational) -> BigInt {
    -((-(x * r.numer())).div_floor(r.denom()))
}

fn ceil_div(a: &BigInt, b: &BigInt) -> BigInt {
    -((-a).div_floor(b))
}

/// `atanh(y) * 2^q` bounds for rational `0 <= y <= 1/3`.
fn atanh_fixed(y: &Rational, q: u64) -> (BigInt, BigInt) {
    if y.is_zero() {
        return (BigInt::zero(), BigInt::zero());
    }
    let one = BigInt::one() << q;
    let y2 = y * y;
    let mut pw_lo = floor_mul(&one, y);
    let mut pw_hi = ceil_mul(&one, y);
    let mut lo = BigInt::zero();
    let mut hi = BigInt::zero();
    let mut k = BigInt::one();
    loop {
        lo += &pw_lo / &k;
        hi += ceil_div(&pw_hi, &k);
        pw_lo = floor_mul(&pw_lo, &y2);
        pw_hi = ceil_mul(&pw_hi, &y2);
        k += 2;
        if pw_hi <= BigInt::one() {
            // tail <= pw_hi / (1 - y^2) <= 9/8 pw_hi
            hi += ceil_div(&(&pw_hi * 9), &BigInt::from(8)) + 1;
            return (lo, hi);
        }
    }
}

/// `ln(n) * 2^q` bounds, `n >= 1`.
fn ln_fixed(n: u64, q: u64) -> (BigInt, BigInt) {
    let k = 63 - n.leading_zeros() as u64;
    let (l2_lo, l2_hi) = atanh_fixed(&Rational::new(1.into(), 3.into()), q);
    let p = BigInt::one() << k;
    let nb = BigInt::from(n);
    let y = Rational::new(&nb - &p, &nb + &p);
    let (a_lo, a_hi) = atanh_fixed(&y, q);
    let kb = BigInt::from(k);
    ((&kb * l2_lo + a_lo) * 2, (&kb * l2_hi + a_hi) * 2)
}

/// `exp(x) * 2^q` bounds for fixed-point `0 <= x_lo <= x_hi`.
fn exp_fixed(x_lo: &BigInt, x_hi: &BigInt, q: u64) -> (BigInt, BigInt) {
    let bits = x_hi.bits();
    let s = bits.saturating_sub(q - 1);
    let r_lo: BigInt = x_lo >> s;
    let r_hi: BigInt = ceil_div(x_hi, &(BigInt::one() << s));
    let one = BigInt::one() << q;

    let mut lo = one.clone();
    let mut t = one.clone();
    let mut k = 1u64;
    loop {
        t = (&t * &r_lo) / (&one * k);
        if t.is_zero() {
            break;
        }
        lo += &t;
        k += 1;
    }
    let mut hi = one.clone();
    let mut t = one.clone();
    let mut k = 1u64;
    loop {
        t = ceil_div(&(&t * &r_hi), &(&one * k));
        hi += &t;
        k += 1;
        if t <= BigInt::one() && k > 2 {
            // remaining terms shrink by at least half each
            hi += &t * 2 + 1;
            break;
        }
    }
    for _ in 0..s {
        lo = (&lo * &lo) >> q;
        hi = ceil_div(&(&hi * &hi), &one);
    }
    (lo, hi)
}

/// Rational bounds on `n^e`.
fn pow_interval(n: u64, e: &Rational, q: u64) -> (Rational, Rational) {
    let fl = e.floor().to_integer();
    let base = pow_int(n, &fl);
    let fr = e - Rational::from_integer(fl);
    if fr.is_zero() || n == 1 {
        return (base.clone(), base);
    }
    let (ln_lo, ln_hi) = ln_fixed(n, q);
    let x_lo = floor_mul(&ln_lo, &fr);
    let x_hi = ceil_mul(&ln_hi, &fr);
    let (e_lo, e_hi) = exp_fixed(&x_lo, &x_hi, q);
    let scale = BigInt::one() << q;
    (
        &base * Rational::new(e_lo, scale.clone()),
        &base * Rational::new(e_hi, scale),
    )
}

pub fn eval_interval(terms: &[Term], n: u64, bits: u64) -> (Rational, Rational) {
    let mut lo = Rational::zero();
    let mut hi = Rational::zero();
    for t in terms {
        let (a, b) = pow_interval(n, &t.exponent, bits + GUARD_BITS);
        lo += &t.coeff * a;
        hi += &t.coeff * b;
    }
    (lo, hi)
}

fn all_integral(terms: &[Term]) -> bool {
    terms.iter().all(|t| t.exponent.is_integer())
}

/// Compares `sum a_i n^{e_i}` against `sum b_i n^{f_i}`.
pub fn compare(a: &[Term], b: &[Term], n: u64) -> Ordering {
    let ca = canonical(a);
    let cb = canonical(b);
    if ca == cb {
        return Ordering::Equal;
    }
    if all_integral(&ca) && all_integral(&cb) {
        let (x, _) = eval_interval(&ca, n, 0);
        let (y, _) = eval_interval(&cb, n, 0);
        return x.cmp(&y);
    }
    if let (Some(x), Some(y)) = (eval_f64(&ca, n), eval_f64(&cb, n)) {
        let scale = x.abs().max(y.abs());
        if (x - y).abs() > FAST_MARGIN * scale && scale > 1e-280 {
            return x.partial_cmp(&y).expect("finite");
        }
    }
    let mut bits = START_BITS;
    loop {
        let (alo, ahi) = eval_interval(&ca, n, bits);
        let (blo, bhi) = eval_interval(&cb, n, bits);
        if ahi < blo {
            return Ordering::Less;
        }
        if alo > bhi {
            return Ordering::Greater;
        }
        if bits >= MAX_BITS {
            return Ordering::Equal;
        }
        bits *= 2;
    }
}
