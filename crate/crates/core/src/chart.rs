//! The monomial chart Spec F_p[N^r] with its indexed coefficient algebra of
//! sections u^a θ^j.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;

use crate::error::{invalid, Error, Result};
use crate::fp::Fp;
use crate::mindex::{binom_mod_p, q_factorial_mod, LevelContext, MultiIndex, SignedMultiIndex};

/// u^a θ^j. Its index is j and its eigen-exponent is a + j.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct AMonomial {
    pub a: MultiIndex,
    pub j: SignedMultiIndex,
}

impl AMonomial {
    pub fn one(r: usize) -> Self {
        AMonomial { a: MultiIndex::zeros(r), j: SignedMultiIndex::zeros(r) }
    }

    pub fn new(a: MultiIndex, j: SignedMultiIndex) -> Self {
        assert_eq!(a.len(), j.len(), "exponent vectors must have equal length");
        AMonomial { a, j }
    }

    pub fn theta(j: SignedMultiIndex) -> Self {
        AMonomial { a: MultiIndex::zeros(j.len()), j }
    }

    pub fn u(a: MultiIndex) -> Self {
        let r = a.len();
        AMonomial { a, j: SignedMultiIndex::zeros(r) }
    }

    pub fn r(&self) -> usize {
        self.a.len()
    }

    pub fn is_one(&self) -> bool {
        self.a.is_zero() && self.j.is_zero()
    }

    pub fn mul(&self, other: &AMonomial) -> AMonomial {
        AMonomial { a: self.a.add(&other.a), j: self.j.add(&other.j) }
    }

    pub fn pow(&self, n: u32) -> AMonomial {
        AMonomial { a: self.a.scale(n), j: self.j.scale(n as i64) }
    }

    /// a + j.
    pub fn exponent(&self) -> SignedMultiIndex {
        self.a.to_signed().add(&self.j)
    }
}

impl fmt::Display for AMonomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if !self.a.is_zero() {
            parts.push(format!("u^{}", self.a));
        }
        if !self.j.is_zero() {
            parts.push(format!("th^{}", self.j));
        }
        if parts.is_empty() {
            write!(f, "1")
        } else {
            write!(f, "{}", parts.join("*"))
        }
    }
}

/// Finite F_p-combination of chart monomials, kept in normal form.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct AElement {
    p: u32,
    r: usize,
    terms: BTreeMap<AMonomial, u32>,
}

impl AElement {
    pub fn zero(p: u32, r: usize) -> Self {
        AElement { p, r, terms: BTreeMap::new() }
    }

    pub fn one(p: u32, r: usize) -> Self {
        Self::monomial(p, AMonomial::one(r), 1)
    }

    pub fn monomial(p: u32, mono: AMonomial, c: u32) -> Self {
        let mut x = Self::zero(p, mono.r());
        x.add_term(mono, c);
        x
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn r(&self) -> usize {
        self.r
    }

    fn fp(&self) -> Fp {
        Fp::new(self.p)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&AMonomial, u32)> {
        self.terms.iter().map(|(m, c)| (m, *c))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, mono: &AMonomial) -> u32 {
        self.terms.get(mono).copied().unwrap_or(0)
    }

    pub fn add_term(&mut self, mono: AMonomial, c: u32) {
        let f = self.fp();
        let c = c % self.p;
        if c == 0 {
            return;
        }
        match self.terms.entry(mono) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                let s = f.add(*o.get(), c);
                if s == 0 {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    pub fn add(&self, other: &AElement) -> AElement {
        let mut out = self.clone();
        for (m, c) in other.terms() {
            out.add_term(m.clone(), c);
        }
        out
    }

    pub fn neg(&self) -> AElement {
        self.scale(self.p - 1)
    }

    pub fn sub(&self, other: &AElement) -> AElement {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: u32) -> AElement {
        let f = self.fp();
        let mut out = AElement::zero(self.p, self.r);
        for (m, v) in self.terms() {
            out.add_term(m.clone(), f.mul(v, c % self.p));
        }
        out
    }

    /// Bilinear extension of (u^a θ^j)(u^a′ θ^j′) = u^{a+a′} θ^{j+j′}.
    pub fn mul(&self, other: &AElement) -> AElement {
        assert_eq!((self.p, self.r), (other.p, other.r), "operands from different charts");
        let f = self.fp();
        let mut out = AElement::zero(self.p, self.r);
        for (m1, c1) in self.terms() {
            for (m2, c2) in other.terms() {
                out.add_term(m1.mul(m2), f.mul(c1, c2));
            }
        }
        out
    }

    pub fn mul_monomial(&self, mono: &AMonomial, c: u32) -> AElement {
        let f = self.fp();
        let mut out = AElement::zero(self.p, self.r);
        for (m, v) in self.terms() {
            out.add_term(m.mul(mono), f.mul(v, c));
        }
        out
    }

    pub fn pow(&self, n: u32) -> AElement {
        let mut acc = AElement::one(self.p, self.r);
        for _ in 0..n {
            acc = acc.mul(self);
        }
        acc
    }
}

impl fmt::Display for AElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in self.terms() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match (c, m.is_one()) {
                (1, _) => write!(f, "{m}")?,
                (_, true) => write!(f, "{c}")?,
                _ => write!(f, "{c}*{m}")?,
            }
        }
        Ok(())
    }
}

/// Which chart the combinatorial data describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ChartRole {
    /// The chart of X with operators of level m.
    Base,
    /// The chart of X^{(m)}: coefficients in B^{(m)}, level-0 operators.
    FrobeniusTarget { m: u32 },
}

/// A monomial chart together with the level of its operator ring.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Chart {
    ctx: LevelContext,
    role: ChartRole,
}

impl Chart {
    pub fn base(ctx: LevelContext) -> Self {
        Chart { ctx, role: ChartRole::Base }
    }

    /// The X^{(m)}-chart attached to a level-m context.
    pub fn frobenius_target(ctx: LevelContext) -> Self {
        let m = ctx.m();
        Chart {
            ctx: ctx.at_level(0).expect("level 0 is always supported"),
            role: ChartRole::FrobeniusTarget { m },
        }
    }

    /// Context of the operator ring on this chart.
    pub fn ctx(&self) -> &LevelContext {
        &self.ctx
    }

    pub fn role(&self) -> ChartRole {
        self.role
    }

    pub fn p(&self) -> u32 {
        self.ctx.p()
    }

    pub fn r(&self) -> usize {
        self.ctx.r()
    }

    pub fn fp(&self) -> Fp {
        self.ctx.fp()
    }

    /// θ-exponent of one chart coordinate θ′ in units of θ.
    pub fn step(&self) -> u64 {
        match self.role {
            ChartRole::Base => 1,
            ChartRole::FrobeniusTarget { m } => (self.ctx.p() as u64).pow(m),
        }
    }

    /// p^{m+1} of the base chart, in units of θ.
    pub fn period(&self) -> u64 {
        self.step() * self.ctx.period()
    }

    pub fn zero(&self) -> AElement {
        AElement::zero(self.p(), self.r())
    }

    pub fn one(&self) -> AElement {
        AElement::one(self.p(), self.r())
    }

    /// θ′^j, written in base units.
    pub fn theta(&self, j: &SignedMultiIndex) -> AMonomial {
        AMonomial::theta(j.scale(self.step() as i64))
    }

    /// True when the monomial is a section of this chart's coefficient ring.
    pub fn admits(&self, mono: &AMonomial) -> bool {
        let s = self.step() as i64;
        mono.exponent().iter().all(|e| e.rem_euclid(s) == 0)
    }

    /// Eigen-exponent in chart units.
    pub fn eigen(&self, mono: &AMonomial) -> SignedMultiIndex {
        let s = self.step() as i64;
        SignedMultiIndex::new(&mono.exponent().iter().map(|e| e.div_euclid(s)).collect::<Vec<_>>())
    }

    /// q_k!·C(e,k) mod p: eigenvalue of ∂_{<k>} on a monomial with exponent e.
    pub fn lambda(&self, k: u64, e: i64) -> u32 {
        if k == 0 {
            return 1 % self.p();
        }
        let q = q_factorial_mod(k, &self.ctx);
        if q == 0 {
            return 0;
        }
        self.fp().mul(q, binom_mod_p(e, k, self.p()))
    }

    pub fn lambda_multi(&self, k: &MultiIndex, mono: &AMonomial) -> u32 {
        let f = self.fp();
        let e = self.eigen(mono);
        let mut acc = 1 % self.p();
        for c in 0..k.len() {
            acc = f.mul(acc, self.lambda(k.get(c) as u64, e.get(c)));
            if acc == 0 {
                break;
            }
        }
        acc
    }

    /// ∂_{<k>} applied to x.
    pub fn d_action(&self, k: &MultiIndex, x: &AElement) -> AElement {
        let mut out = self.zero();
        for (m, c) in x.terms() {
            let l = self.lambda_multi(k, m);
            out.add_term(m.clone(), self.fp().mul(l, c));
        }
        out
    }

    /// Largest l ≤ level+1 with p^l dividing every eigen-exponent entry.
    pub fn b_level(&self, mono: &AMonomial) -> u32 {
        let cap = self.ctx.m() + 1;
        let p = self.p() as i64;
        let mut level = cap;
        for e in self.eigen(mono).iter() {
            let mut l = 0;
            let mut v = e;
            while l < cap && v % p == 0 {
                v /= p;
                l += 1;
            }
            level = level.min(l);
        }
        level
    }

    /// Residues in chart units j ∈ [0, p^{level+1})^r and the B^{(level+1)} parts b_j with x = Σ b_j θ′^j.
    pub fn b_decompose(&self, x: &AElement) -> Result<BTreeMap<MultiIndex, AElement>> {
        let modulus = self.ctx.period() as i64;
        let mut out: BTreeMap<MultiIndex, AElement> = BTreeMap::new();
        for (m, c) in x.terms() {
            if !self.admits(m) {
                return Err(invalid(format!("{m} is not a section of the chart")));
            }
            let e = self.eigen(m);
            let res: Vec<u32> = e.iter().map(|v| v.rem_euclid(modulus) as u32).collect();
            let res = MultiIndex::new(&res);
            let shift = self.theta(&res.to_signed()).pow(1);
            let b = AMonomial::new(m.a.clone(), m.j.sub(&shift.j));
            out.entry(res)
                .or_insert_with(|| self.zero())
                .add_term(b, c);
        }
        Ok(out)
    }

    /// Inverse of [`Chart::b_decompose`].
    pub fn b_reassemble(&self, parts: &BTreeMap<MultiIndex, AElement>) -> AElement {
        let mut out = self.zero();
        for (j, b) in parts {
            let t = self.theta(&j.to_signed());
            out = out.add(&b.mul_monomial(&t, 1));
        }
        out
    }

    /// The p^r monomials θ^{p^m j}, j ∈ [0,p)^r: a basis of B^{(m)} over B^{(m+1)}.
    pub fn b_basis_over_higher(&self) -> Vec<AMonomial> {
        let pm = self.ctx.pm() as u32;
        MultiIndex::all_below(self.r(), self.p())
            .into_iter()
            .map(|j| self.theta(&j.scale(pm).to_signed()))
            .collect()
    }

    /// Decomposition of x ∈ B^{(m)} over B^{(m+1)} in the basis of [`Chart::b_basis_over_higher`].
    pub fn b_decompose_over_higher(&self, x: &AElement) -> Result<BTreeMap<MultiIndex, AElement>> {
        let pm = self.ctx.pm() as i64;
        let p = self.p() as i64;
        let mut out: BTreeMap<MultiIndex, AElement> = BTreeMap::new();
        for (m, c) in x.terms() {
            let e = self.eigen(m);
            if e.iter().any(|v| v.rem_euclid(pm) != 0) {
                return Err(Error::IntegralityViolation(format!("{m} does not lie in B^(m)")));
            }
            let res: Vec<u32> = e.iter().map(|v| (v / pm).rem_euclid(p) as u32).collect();
            let res = MultiIndex::new(&res);
            let shift = self.theta(&res.scale(pm as u32).to_signed());
            let b = AMonomial::new(m.a.clone(), m.j.sub(&shift.j));
            out.entry(res).or_insert_with(|| self.zero()).add_term(b, c);
        }
        Ok(out)
    }
}

/// ∂_{<k>} on the base chart of `ctx`.
pub fn d_action(k: &MultiIndex, x: &AElement, ctx: &LevelContext) -> AElement {
    Chart::base(*ctx).d_action(k, x)
}

pub fn b_level(mono: &AMonomial, ctx: &LevelContext) -> u32 {
    Chart::base(*ctx).b_level(mono)
}

pub fn a_mul(x: &AElement, y: &AElement) -> AElement {
    x.mul(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(p: u32, m: u32, r: usize) -> LevelContext {
        LevelContext::new(p, m, r).unwrap()
    }

    fn th(j: i64) -> AMonomial {
        AMonomial::theta(SignedMultiIndex::new(&[j]))
    }

    fn ua(a: u32, j: i64) -> AMonomial {
        AMonomial::new(MultiIndex::new(&[a]), SignedMultiIndex::new(&[j]))
    }

    #[test]
    fn products() {
        let x = AElement::monomial(3, th(1), 1);
        let y = AElement::monomial(3, th(-1), 1);
        assert_eq!(x.mul(&y), AElement::one(3, 1));
        let s = AElement::monomial(3, th(1), 1).add(&AElement::monomial(3, th(2), 1));
        assert_eq!(s.mul(&x).to_string(), "th^[2] + th^[3]");
        let z = AElement::monomial(3, ua(1, 2), 1).mul(&AElement::monomial(3, ua(1, 1), 1));
        assert_eq!(z, AElement::monomial(3, ua(2, 3), 1));
    }

    #[test]
    fn diagonal_action() {
        let c = ctx(2, 1, 1);
        let x = AElement::monomial(2, th(3), 1);
        assert_eq!(d_action(&MultiIndex::new(&[2]), &x, &c), x);
        let y = AElement::monomial(2, ua(1, 3), 1);
        assert!(d_action(&MultiIndex::new(&[1]), &y, &c).is_zero());
    }

    #[test]
    fn levels() {
        let c = ctx(2, 1, 1);
        assert_eq!(b_level(&ua(1, 3), &c), 2);
        assert_eq!(b_level(&th(0), &c), 2);
        assert_eq!(b_level(&th(1), &c), 0);
    }

    #[test]
    fn decomposition() {
        let ch = Chart::base(ctx(2, 1, 1));
        let x = AElement::monomial(2, th(5), 1);
        let d = ch.b_decompose(&x).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d[&MultiIndex::new(&[1])], AElement::monomial(2, th(4), 1));
        let y = AElement::monomial(2, ua(3, -1), 1);
        let d = ch.b_decompose(&y).unwrap();
        assert_eq!(d[&MultiIndex::new(&[2])], AElement::monomial(2, ua(3, -3), 1));
        assert_eq!(ch.b_reassemble(&d), y);
    }

    #[test]
    fn basis_over_higher() {
        let ch = Chart::base(ctx(2, 1, 2));
        let b = ch.b_basis_over_higher();
        assert_eq!(b.len(), 4);
        assert!(b.iter().all(|m| ch.b_level(m) >= 1));
    }

    #[test]
    fn target_chart_units() {
        let ch = Chart::frobenius_target(ctx(2, 1, 1));
        assert_eq!(ch.step(), 2);
        assert!(ch.admits(&th(4)));
        assert!(!ch.admits(&th(1)));
        assert_eq!(ch.eigen(&ua(1, 1)).get(0), 1);
        assert_eq!(ch.period(), 4);
    }
}
