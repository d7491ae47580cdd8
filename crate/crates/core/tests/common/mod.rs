//! Exact big-integer oracle, written from the defining formulas only.
#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use logdm_core::{AElement, AMonomial, TDOperator};

pub const GRID: [(u32, u32, usize); 7] = [(2, 0, 1), (2, 1, 1), (2, 0, 2), (3, 0, 1), (3, 1, 1), (2, 2, 1), (5, 0, 1)];

pub fn fact(n: u64) -> BigInt {
    (1..=n).fold(BigInt::one(), |a, i| a * BigInt::from(i))
}

/// C(n, k) for any integer n as the falling factorial over k!.
pub fn binom(n: i64, k: u64) -> BigInt {
    let mut num = BigInt::one();
    for i in 0..k as i64 {
        num *= BigInt::from(n - i);
    }
    num / fact(k)
}

pub fn q(k: u64, p: u32, m: u32) -> u64 {
    k / (p as u64).pow(m)
}

pub fn ratio(num: BigInt, den: BigInt) -> BigRational {
    BigRational::new(num, den)
}

pub fn brace(k: u64, k1: u64, p: u32, m: u32) -> BigRational {
    ratio(fact(q(k, p, m)), fact(q(k1, p, m)) * fact(q(k - k1, p, m)))
}

pub fn angle(k: u64, k1: u64, p: u32, m: u32) -> BigRational {
    BigRational::from_integer(binom(k as i64, k1)) / brace(k, k1, p, m)
}

/// Coefficient of ∂_{<k>} in ∂_{<k1>}·∂_{<k2>}.
pub fn mul_coeff(k: u64, k1: u64, k2: u64, p: u32, m: u32) -> BigRational {
    let multinomial = ratio(fact(k), fact(k1 + k2 - k) * fact(k - k1) * fact(k - k2));
    multinomial * ratio(fact(q(k1, p, m)) * fact(q(k2, p, m)), fact(q(k, p, m)))
}

/// p-adic valuation of a nonzero integer.
pub fn vp(x: &BigInt, p: u32) -> u64 {
    let pb = BigInt::from(p);
    let mut x = x.abs();
    let mut v = 0;
    while !x.is_zero() && (&x % &pb).is_zero() {
        x /= &pb;
        v += 1;
    }
    v
}

pub fn mod_p(x: &BigInt, p: u32) -> u32 {
    let pb = BigInt::from(p);
    (((x % &pb) + &pb) % &pb).to_u32().unwrap()
}

/// Reduction of a p-integral rational; `None` if p divides the denominator.
pub fn reduce(x: &BigRational, p: u32) -> Option<u32> {
    let den = mod_p(x.denom(), p);
    if den == 0 {
        return None;
    }
    let inv = (1..p).find(|i| (i * den) % p == 1).unwrap();
    Some((mod_p(x.numer(), p) as u64 * inv as u64 % p as u64) as u32)
}

pub fn red(x: &BigRational, p: u32) -> u32 {
    reduce(x, p).expect("p-integral")
}

/// λ(k, e) = q_k!·C(e, k): eigenvalue of ∂_{<k>} on a monomial of exponent e.
pub fn lambda(k: u64, e: i64, p: u32, m: u32) -> BigInt {
    fact(q(k, p, m)) * binom(e, k)
}

/// Action on a base-chart monomial computed from the eigenvalue formula.
pub fn act_on_monomial(op: &TDOperator, x: &AMonomial) -> AElement {
    let ctx = op.ctx();
    let (p, m) = (ctx.p(), ctx.m());
    let e = x.exponent();
    let mut out = AElement::zero(p, ctx.r());
    for (f, k, c) in op.terms() {
        let mut v = BigInt::from(c);
        for i in 0..ctx.r() {
            v *= lambda(k.get(i) as u64, e.get(i), p, m);
        }
        out.add_term(f.mul(x), mod_p(&v, p));
    }
    out
}

pub fn act(op: &TDOperator, x: &AElement) -> AElement {
    let ctx = op.ctx();
    let mut out = AElement::zero(ctx.p(), ctx.r());
    for (mono, c) in x.terms() {
        out = out.add(&act_on_monomial(op, mono).scale(c));
    }
    out
}
