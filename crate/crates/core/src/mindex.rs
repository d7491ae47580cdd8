//! Multi-indices and the combinatorial coefficients built from q_k.
//!
//! Every coefficient has a mod-p fast path (Lucas digits, factorial
//! valuation/unit decomposition) and an exact path in [`exact`].

use std::fmt;

use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::fault::Fault;
use crate::fp::{is_prime, Fp};

pub const MAX_P: u32 = 13;
pub const MAX_M: u32 = 3;
pub const MAX_R: usize = 3;

/// Element of N^r.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Default)]
pub struct MultiIndex(SmallVec<[u32; 4]>);

impl MultiIndex {
    pub fn new(entries: &[u32]) -> Self {
        MultiIndex(SmallVec::from_slice(entries))
    }

    pub fn zeros(r: usize) -> Self {
        MultiIndex(SmallVec::from_elem(0, r))
    }

    /// `v·ε_i`.
    pub fn unit(r: usize, i: usize, v: u32) -> Self {
        let mut k = Self::zeros(r);
        k.0[i] = v;
        k
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn get(&self, i: usize) -> u32 {
        self.0[i]
    }

    pub fn set(&mut self, i: usize, v: u32) {
        self.0[i] = v;
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.0.iter().copied()
    }

    /// |k|.
    pub fn total(&self) -> u64 {
        self.0.iter().map(|&x| x as u64).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0)
    }

    /// Componentwise k ≤ other.
    pub fn le(&self, other: &MultiIndex) -> bool {
        self.0.iter().zip(other.0.iter()).all(|(a, b)| a <= b)
    }

    pub fn sup(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(other.0.iter()).map(|(a, b)| *a.max(b)).collect())
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(other.0.iter()).map(|(a, b)| a + b).collect())
    }

    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        let mut out = SmallVec::new();
        for (a, b) in self.0.iter().zip(other.0.iter()) {
            out.push(a.checked_sub(*b)?);
        }
        Some(MultiIndex(out))
    }

    pub fn scale(&self, c: u32) -> MultiIndex {
        MultiIndex(self.0.iter().map(|a| a * c).collect())
    }

    pub fn to_signed(&self) -> SignedMultiIndex {
        SignedMultiIndex(self.0.iter().map(|&a| a as i64).collect())
    }

    /// All k with 0 ≤ k_i < bound, in lexicographic order.
    pub fn all_below(r: usize, bound: u32) -> Vec<MultiIndex> {
        let mut out = vec![MultiIndex::zeros(r)];
        for i in 0..r {
            let mut next = Vec::with_capacity(out.len() * bound as usize);
            for k in &out {
                for v in 0..bound {
                    let mut kk = k.clone();
                    kk.0[i] = v;
                    next.push(kk);
                }
            }
            out = next;
        }
        out.sort();
        out
    }

    /// All k with |k| ≤ n.
    pub fn all_with_total_at_most(r: usize, n: u32) -> Vec<MultiIndex> {
        Self::all_below(r, n + 1)
            .into_iter()
            .filter(|k| k.total() <= n as u64)
            .collect()
    }

    /// All i with i ≤ self componentwise.
    pub fn below(&self) -> Vec<MultiIndex> {
        let mut out = vec![MultiIndex::zeros(self.len())];
        for (c, &top) in self.0.iter().enumerate() {
            let mut next = Vec::with_capacity(out.len() * (top as usize + 1));
            for k in &out {
                for v in 0..=top {
                    let mut kk = k.clone();
                    kk.0[c] = v;
                    next.push(kk);
                }
            }
            out = next;
        }
        out
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "]")
    }
}

/// Element of Z^r, used for θ-exponents.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Default)]
pub struct SignedMultiIndex(SmallVec<[i64; 4]>);

impl SignedMultiIndex {
    pub fn new(entries: &[i64]) -> Self {
        SignedMultiIndex(SmallVec::from_slice(entries))
    }

    pub fn zeros(r: usize) -> Self {
        SignedMultiIndex(SmallVec::from_elem(0, r))
    }

    pub fn unit(r: usize, i: usize, v: i64) -> Self {
        let mut k = Self::zeros(r);
        k.0[i] = v;
        k
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[i64] {
        &self.0
    }

    pub fn get(&self, i: usize) -> i64 {
        self.0[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = i64> + '_ {
        self.0.iter().copied()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0)
    }

    pub fn add(&self, other: &SignedMultiIndex) -> SignedMultiIndex {
        SignedMultiIndex(self.0.iter().zip(other.0.iter()).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &SignedMultiIndex) -> SignedMultiIndex {
        SignedMultiIndex(self.0.iter().zip(other.0.iter()).map(|(a, b)| a - b).collect())
    }

    pub fn neg(&self) -> SignedMultiIndex {
        SignedMultiIndex(self.0.iter().map(|a| -a).collect())
    }

    pub fn scale(&self, c: i64) -> SignedMultiIndex {
        SignedMultiIndex(self.0.iter().map(|a| a * c).collect())
    }
}

impl fmt::Display for SignedMultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "]")
    }
}

/// The cell (p, m, r) every computation runs in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LevelContext {
    p: u32,
    m: u32,
    r: usize,
    fault: Fault,
}

impl LevelContext {
    pub fn new(p: u32, m: u32, r: usize) -> Result<Self> {
        if !is_prime(p) || p > MAX_P {
            return Err(Error::UnsupportedContext(format!(
                "p = {p} must be a prime at most {MAX_P}"
            )));
        }
        if m > MAX_M {
            return Err(Error::UnsupportedContext(format!("m = {m} exceeds {MAX_M}")));
        }
        if r == 0 || r > MAX_R {
            return Err(Error::UnsupportedContext(format!("r = {r} must lie in 1..={MAX_R}")));
        }
        Ok(LevelContext { p, m, r, fault: Fault::None })
    }

    /// Context with more coordinates than the public limit, for internal jet rings.
    pub(crate) fn with_r(self, r: usize) -> Self {
        LevelContext { r, ..self }
    }

    pub fn with_fault(self, fault: Fault) -> Self {
        LevelContext { fault, ..self }
    }

    /// This context moved to level m.
    pub fn at_level(self, m: u32) -> Result<Self> {
        if m > MAX_M {
            return Err(Error::UnsupportedContext(format!("m = {m} exceeds {MAX_M}")));
        }
        Ok(LevelContext { m, ..self })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn fault(&self) -> Fault {
        self.fault
    }

    pub fn fp(&self) -> Fp {
        Fp::new(self.p)
    }

    /// p^m.
    pub fn pm(&self) -> u64 {
        (self.p as u64).pow(self.m)
    }

    /// p^{m+1}.
    pub fn period(&self) -> u64 {
        (self.p as u64).pow(self.m + 1)
    }
}

impl fmt::Display for LevelContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(p={}, m={}, r={})", self.p, self.m, self.r)
    }
}

/// q with k = q·p^m + s, 0 ≤ s < p^m.
pub fn q_of(k: u64, ctx: &LevelContext) -> u64 {
    k / ctx.pm()
}

pub fn q_vec(k: &MultiIndex, ctx: &LevelContext) -> Vec<u64> {
    k.iter().map(|v| q_of(v as u64, ctx)).collect()
}

pub fn digit_sum(mut n: u64, p: u32) -> u64 {
    let mut s = 0;
    while n > 0 {
        s += n % p as u64;
        n /= p as u64;
    }
    s
}

fn small_factorial(n: u64, f: Fp) -> u32 {
    (1..=n).fold(1 % f.p(), |acc, i| f.mul(acc, (i % f.p() as u64) as u32))
}

/// (v_p(n!), n!/p^v mod p).
pub fn factorial_val_unit(n: u64, p: u32) -> (u64, u32) {
    let f = Fp::new(p);
    let v = (n - digit_sum(n, p)) / (p as u64 - 1);
    let mut unit = 1 % p;
    let mut rest = n;
    while rest > 0 {
        let blocks = rest / p as u64;
        let mut term = small_factorial(rest % p as u64, f);
        if blocks % 2 == 1 {
            term = f.neg(term);
        }
        unit = f.mul(unit, term);
        rest = blocks;
    }
    (v, unit)
}

fn small_binomial(n: u64, k: u64, f: Fp) -> u32 {
    if k > n {
        return 0;
    }
    let num = small_factorial(n, f);
    let den = f.mul(small_factorial(k, f), small_factorial(n - k, f));
    f.mul(num, f.inv(den).expect("factorials below p are units"))
}

/// C(n,k) mod p for any integer n (generalized binomial for n < 0).
pub fn binom_mod_p(n: i64, k: u64, p: u32) -> u32 {
    let f = Fp::new(p);
    if n < 0 {
        let top = (k as i64 - n - 1) as u64;
        let v = binom_mod_p(top as i64, k, p);
        return if k % 2 == 1 { f.neg(v) } else { v };
    }
    let (mut n, mut k) = (n as u64, k);
    let mut acc = 1 % p;
    while k > 0 {
        let (nd, kd) = (n % p as u64, k % p as u64);
        if kd > nd {
            return 0;
        }
        acc = f.mul(acc, small_binomial(nd, kd, f));
        n /= p as u64;
        k /= p as u64;
    }
    acc
}

/// Π num_i! / Π den_i! mod p, asserting p-integrality.
pub(crate) fn factorial_ratio(num: &[u64], den: &[u64], p: u32) -> Result<u32> {
    let f = Fp::new(p);
    let mut val: i64 = 0;
    let mut unit = 1 % p;
    for &n in num {
        let (v, u) = factorial_val_unit(n, p);
        val += v as i64;
        unit = f.mul(unit, u);
    }
    let mut den_unit = 1 % p;
    for &n in den {
        let (v, u) = factorial_val_unit(n, p);
        val -= v as i64;
        den_unit = f.mul(den_unit, u);
    }
    if val < 0 {
        return Err(Error::IntegralityViolation(format!(
            "ratio of factorials {num:?}/{den:?} has p-adic valuation {val}"
        )));
    }
    if val > 0 {
        return Ok(0);
    }
    Ok(f.mul(unit, f.inv(den_unit).expect("unit part is invertible")))
}

/// q_k! mod p.
pub fn q_factorial_mod(k: u64, ctx: &LevelContext) -> u32 {
    let (v, u) = factorial_val_unit(q_of(k, ctx), ctx.p());
    if v > 0 {
        0
    } else {
        u
    }
}

fn check_range(k: u64, k1: u64) -> Result<()> {
    if k1 > k {
        return Err(Error::IntegralityViolation(format!("lower index {k1} exceeds {k}")));
    }
    Ok(())
}

/// {k, k1} = q_k! / (q_{k1}! q_{k2}!) mod p.
pub fn brace(k: u64, k1: u64, ctx: &LevelContext) -> Result<u32> {
    check_range(k, k1)?;
    let (q, q1, q2) = (q_of(k, ctx), q_of(k1, ctx), q_of(k - k1, ctx));
    let v = factorial_ratio(&[q], &[q1, q2], ctx.p())?;
    if ctx.fault() == Fault::PerturbBrace && k == ctx.period() && (k1 == 1 || k1 == k - 1) {
        return Ok(ctx.fp().add(v, 1));
    }
    Ok(v)
}

/// ⟨k, k1⟩ = C(k,k1) / {k,k1} mod p.
pub fn angle(k: u64, k1: u64, ctx: &LevelContext) -> Result<u32> {
    check_range(k, k1)?;
    let k2 = k - k1;
    let (q, q1, q2) = (q_of(k, ctx), q_of(k1, ctx), q_of(k2, ctx));
    factorial_ratio(&[k, q1, q2], &[k1, k2, q], ctx.p())
}

/// Coefficient of ∂_{<k>} in ∂_{<k1>}·∂_{<k2>}; zero outside sup(k1,k2) ≤ k ≤ k1+k2.
pub fn mul_coeff(k: u64, k1: u64, k2: u64, ctx: &LevelContext) -> Result<u32> {
    if k < k1.max(k2) || k > k1 + k2 {
        return Ok(0);
    }
    let (q, q1, q2) = (q_of(k, ctx), q_of(k1, ctx), q_of(k2, ctx));
    let v = factorial_ratio(&[k, q1, q2], &[k1 + k2 - k, k - k1, k - k2, q], ctx.p())?;
    let top = ctx.period();
    if ctx.fault() == Fault::PerturbMulCoeff && k1 == top && k2 == 1 && k == top + 1 {
        return Ok(ctx.fp().add(v, 1));
    }
    Ok(v)
}

/// q!/q′! where q, q′ are the quotients of k at levels m and m′ ≥ m.
pub fn level_ratio(k: u64, m: u32, m2: u32, p: u32) -> Result<u32> {
    let q = k / (p as u64).pow(m);
    let q2 = k / (p as u64).pow(m2);
    factorial_ratio(&[q], &[q2], p)
}

fn check_arity(a: &MultiIndex, b: &MultiIndex) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::ArityError { expected: a.len(), found: b.len() });
    }
    Ok(())
}

pub fn brace_multi(k: &MultiIndex, k1: &MultiIndex, ctx: &LevelContext) -> Result<u32> {
    check_arity(k, k1)?;
    let f = ctx.fp();
    let mut acc = 1;
    for (a, b) in k.iter().zip(k1.iter()) {
        acc = f.mul(acc, brace(a as u64, b as u64, ctx)?);
    }
    Ok(acc)
}

pub fn angle_multi(k: &MultiIndex, k1: &MultiIndex, ctx: &LevelContext) -> Result<u32> {
    check_arity(k, k1)?;
    let f = ctx.fp();
    let mut acc = 1;
    for (a, b) in k.iter().zip(k1.iter()) {
        acc = f.mul(acc, angle(a as u64, b as u64, ctx)?);
    }
    Ok(acc)
}

pub fn mul_coeff_multi(
    k: &MultiIndex,
    k1: &MultiIndex,
    k2: &MultiIndex,
    ctx: &LevelContext,
) -> Result<u32> {
    check_arity(k, k1)?;
    check_arity(k, k2)?;
    let f = ctx.fp();
    let mut acc = 1;
    for c in 0..k.len() {
        acc = f.mul(acc, mul_coeff(k.get(c) as u64, k1.get(c) as u64, k2.get(c) as u64, ctx)?);
        if acc == 0 {
            break;
        }
    }
    Ok(acc)
}

/// Exact arbitrary-precision evaluation of the same coefficients.
pub mod exact {
    use std::cell::RefCell;

    use num_bigint::BigInt;
    use num_rational::BigRational;
    use num_traits::{One, Signed, ToPrimitive, Zero};

    use super::LevelContext;
    use crate::error::{Error, Result};
    use crate::fp::Fp;

    /// An exact rational structure constant.
    #[derive(Clone, Debug, PartialEq, Eq)]
    pub struct ExactCoeff(pub BigRational);

    impl ExactCoeff {
        pub fn from_ratio(num: BigInt, den: BigInt) -> Self {
            if (&num % &den).is_zero() {
                return ExactCoeff(BigRational::from_integer(num / den));
            }
            ExactCoeff(BigRational::new(num, den))
        }

        pub fn is_integer(&self) -> bool {
            self.0.is_integer()
        }

        /// Reduction to F_p; defined only when the denominator is prime to p.
        pub fn reduce(&self, p: u32) -> Result<u32> {
            let pb = BigInt::from(p);
            let den = self.0.denom();
            if (den % &pb).is_zero() {
                return Err(Error::IntegralityViolation(format!(
                    "{} is not {p}-integral",
                    self.0
                )));
            }
            let f = Fp::new(p);
            let n = residue(self.0.numer(), p);
            let d = residue(den, p);
            Ok(f.mul(n, f.inv(d).expect("denominator prime to p")))
        }
    }

    fn residue(x: &BigInt, p: u32) -> u32 {
        let pb = BigInt::from(p);
        let mut r = x % &pb;
        if r.is_negative() {
            r += &pb;
        }
        r.to_u32().expect("residue fits")
    }

    thread_local! {
        static FACTORIALS: RefCell<Vec<BigInt>> = RefCell::new(vec![BigInt::one()]);
        static PASCAL: RefCell<Vec<Vec<BigInt>>> = RefCell::new(vec![vec![BigInt::one()]]);
    }

    pub fn factorial(n: u64) -> BigInt {
        FACTORIALS.with(|cell| {
            let mut table = cell.borrow_mut();
            while table.len() as u64 <= n {
                let next = table.last().unwrap() * BigInt::from(table.len());
                table.push(next);
            }
            table[n as usize].clone()
        })
    }

    /// Exact C(n,k) for n ≥ 0, via a cached Pascal triangle.
    fn binomial_nonneg(n: u64, k: u64) -> BigInt {
        if k > n {
            return BigInt::zero();
        }
        if n > 600 {
            return factorial(n) / (factorial(k) * factorial(n - k));
        }
        PASCAL.with(|cell| {
            let mut rows = cell.borrow_mut();
            while rows.len() as u64 <= n {
                let prev = rows.last().unwrap();
                let len = prev.len();
                let mut row = Vec::with_capacity(len + 1);
                row.push(BigInt::one());
                for i in 1..len {
                    row.push(&prev[i - 1] + &prev[i]);
                }
                row.push(BigInt::one());
                rows.push(row);
            }
            rows[n as usize][k as usize].clone()
        })
    }

    /// Generalized binomial C(n,k) for any integer n.
    pub fn binomial(n: i64, k: u64) -> BigInt {
        if n >= 0 {
            return binomial_nonneg(n as u64, k);
        }
        let v = binomial_nonneg((k as i64 - n - 1) as u64, k);
        if k % 2 == 1 {
            -v
        } else {
            v
        }
    }

    fn q(k: u64, ctx: &LevelContext) -> u64 {
        super::q_of(k, ctx)
    }

    pub fn brace(k: u64, k1: u64, ctx: &LevelContext) -> ExactCoeff {
        let k2 = k - k1;
        ExactCoeff::from_ratio(
            factorial(q(k, ctx)),
            factorial(q(k1, ctx)) * factorial(q(k2, ctx)),
        )
    }

    pub fn angle(k: u64, k1: u64, ctx: &LevelContext) -> ExactCoeff {
        let k2 = k - k1;
        ExactCoeff::from_ratio(
            binomial(k as i64, k1) * factorial(q(k1, ctx)) * factorial(q(k2, ctx)),
            factorial(q(k, ctx)),
        )
    }

    pub fn mul_coeff(k: u64, k1: u64, k2: u64, ctx: &LevelContext) -> ExactCoeff {
        if k < k1.max(k2) || k > k1 + k2 {
            return ExactCoeff(BigRational::zero());
        }
        let multinomial = binomial(k as i64, k1) * binomial(k1 as i64, k - k2);
        ExactCoeff::from_ratio(
            multinomial * factorial(q(k1, ctx)) * factorial(q(k2, ctx)),
            factorial(q(k, ctx)),
        )
    }

    pub fn level_ratio(k: u64, m: u32, m2: u32, p: u32) -> ExactCoeff {
        let q = k / (p as u64).pow(m);
        let q2 = k / (p as u64).pow(m2);
        ExactCoeff::from_ratio(factorial(q), factorial(q2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(p: u32, m: u32) -> LevelContext {
        LevelContext::new(p, m, 1).unwrap()
    }

    #[test]
    fn q_values() {
        assert_eq!(q_of(5, &ctx(2, 1)), 2);
        assert_eq!(q_of(3, &ctx(2, 2)), 0);
        let c = ctx(3, 1);
        assert_eq!(q_of(c.period(), &c), 3);
    }

    #[test]
    fn factorial_decomposition() {
        assert_eq!(factorial_val_unit(4, 2), (3, 1));
        assert_eq!(factorial_val_unit(0, 7), (0, 1));
        assert_eq!(factorial_val_unit(4, 5), (0, 4));
    }

    #[test]
    fn generalized_binomials() {
        assert_eq!(binom_mod_p(6, 2, 2), 1);
        assert_eq!(binom_mod_p(3, 2, 2), 1);
        assert_eq!(binom_mod_p(-1, 2, 3), 1);
        assert_eq!(binom_mod_p(-1, 3, 3), 2);
    }

    #[test]
    fn braces_and_angles() {
        let c = ctx(2, 1);
        assert_eq!(brace(5, 3, &c).unwrap(), 0);
        assert_eq!(brace(4, 3, &c).unwrap(), 0);
        assert_eq!(brace(3, 2, &c).unwrap(), 1);
        assert_eq!(angle(5, 3, &c).unwrap(), 1);
        assert_eq!(angle(2, 1, &ctx(2, 0)).unwrap(), 1);
        assert!(brace(1, 2, &c).is_err());
    }

    #[test]
    fn product_constants() {
        assert_eq!(mul_coeff(1, 1, 1, &ctx(2, 1)).unwrap(), 1);
        assert_eq!(mul_coeff(2, 1, 1, &ctx(2, 1)).unwrap(), 0);
        assert_eq!(mul_coeff(2, 1, 1, &ctx(2, 0)).unwrap(), 1);
        assert_eq!(mul_coeff(5, 1, 1, &ctx(2, 0)).unwrap(), 0);
    }

    #[test]
    fn exact_paths_reduce_to_fast_paths() {
        let c = ctx(3, 1);
        for k in 0..40 {
            for k1 in 0..=k {
                assert_eq!(exact::brace(k, k1, &c).reduce(3).unwrap(), brace(k, k1, &c).unwrap());
                assert_eq!(exact::angle(k, k1, &c).reduce(3).unwrap(), angle(k, k1, &c).unwrap());
            }
        }
    }

    #[test]
    fn context_limits() {
        assert!(LevelContext::new(4, 0, 1).is_err());
        assert!(LevelContext::new(17, 0, 1).is_err());
        assert!(LevelContext::new(2, 4, 1).is_err());
        assert!(LevelContext::new(2, 0, 4).is_err());
        assert!(LevelContext::new(13, 3, 3).is_ok());
    }

    #[test]
    fn multi_index_enumeration() {
        assert_eq!(MultiIndex::all_below(2, 2).len(), 4);
        assert_eq!(MultiIndex::all_with_total_at_most(2, 2).len(), 6);
        assert_eq!(MultiIndex::new(&[1, 2]).below().len(), 6);
    }
}
