//! The truncated m-PD envelope of the diagonal: sums of (u^a θ^j)·η^{{k}}
//! with |k| ≤ order, and their pairing with operators.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;

use crate::chart::{AElement, AMonomial, Chart};
use crate::error::{Error, Result};
use crate::mindex::{angle, brace_multi, factorial_ratio, q_of, LevelContext, MultiIndex};
use crate::operator::TDOperator;

type Key = (AMonomial, MultiIndex);

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PDJet {
    chart: Chart,
    order: u32,
    terms: BTreeMap<Key, u32>,
}

impl PDJet {
    pub fn zero(chart: Chart, order: u32) -> Self {
        PDJet { chart, order, terms: BTreeMap::new() }
    }

    pub fn one(chart: Chart, order: u32) -> Self {
        Self::eta_pd(chart, order, &MultiIndex::zeros(chart.r()))
    }

    /// η^{{k}}.
    pub fn eta_pd(chart: Chart, order: u32, k: &MultiIndex) -> Self {
        Self::term(chart, order, AMonomial::one(chart.r()), k.clone(), 1)
    }

    /// η_i.
    pub fn eta(chart: Chart, order: u32, i: usize) -> Self {
        Self::eta_pd(chart, order, &MultiIndex::unit(chart.r(), i, 1))
    }

    pub fn term(chart: Chart, order: u32, mono: AMonomial, k: MultiIndex, c: u32) -> Self {
        let mut x = Self::zero(chart, order);
        x.add_term(mono, k, c);
        x
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&AMonomial, &MultiIndex, u32)> {
        self.terms.iter().map(|((m, k), c)| (m, k, *c))
    }

    /// Terms above the order are dropped.
    pub fn add_term(&mut self, mono: AMonomial, k: MultiIndex, c: u32) {
        let f = self.chart.fp();
        let c = c % self.chart.p();
        if c == 0 || k.total() > self.order as u64 {
            return;
        }
        match self.terms.entry((mono, k)) {
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

    /// Coefficient of η^{{k}}.
    pub fn coefficient(&self, k: &MultiIndex) -> AElement {
        let mut out = self.chart.zero();
        for ((m, kk), c) in &self.terms {
            if kk == k {
                out.add_term(m.clone(), *c);
            }
        }
        out
    }

    pub fn in_ideal(&self) -> bool {
        self.terms.keys().all(|(_, k)| !k.is_zero())
    }

    fn check(&self, other: &PDJet) -> Result<()> {
        if self.chart != other.chart || self.order != other.order {
            return Err(Error::ContextMismatch);
        }
        Ok(())
    }

    pub fn add(&self, other: &PDJet) -> Result<PDJet> {
        self.check(other)?;
        let mut out = self.clone();
        for ((m, k), c) in &other.terms {
            out.add_term(m.clone(), k.clone(), *c);
        }
        Ok(out)
    }

    pub fn scale(&self, c: u32) -> PDJet {
        let f = self.chart.fp();
        let mut out = PDJet::zero(self.chart, self.order);
        for ((m, k), v) in &self.terms {
            out.add_term(m.clone(), k.clone(), f.mul(*v, c % self.chart.p()));
        }
        out
    }

    pub fn sub(&self, other: &PDJet) -> Result<PDJet> {
        self.add(&other.scale(self.chart.p() - 1))
    }

    /// Multiplication by a coefficient a ∈ A.
    pub fn scale_by(&self, a: &AElement) -> PDJet {
        let f = self.chart.fp();
        let mut out = PDJet::zero(self.chart, self.order);
        for ((m, k), v) in &self.terms {
            for (g, c) in a.terms() {
                out.add_term(m.mul(g), k.clone(), f.mul(*v, c));
            }
        }
        out
    }

    /// η^{{k}}·η^{{k′}} = {k+k′, k}·η^{{k+k′}}.
    pub fn mul(&self, other: &PDJet) -> Result<PDJet> {
        self.check(other)?;
        let f = self.chart.fp();
        let ctx = self.chart.ctx();
        let mut out = PDJet::zero(self.chart, self.order);
        for ((m1, k1), c1) in &self.terms {
            for ((m2, k2), c2) in &other.terms {
                let k = k1.add(k2);
                if k.total() > self.order as u64 {
                    continue;
                }
                let b = brace_multi(&k, k1, ctx)?;
                out.add_term(m1.mul(m2), k, f.mul(b, f.mul(*c1, *c2)));
            }
        }
        Ok(out)
    }

    /// Ordinary power xⁿ.
    pub fn pow(&self, n: u32) -> Result<PDJet> {
        let mut acc = PDJet::one(self.chart, self.order);
        for _ in 0..n {
            acc = acc.mul(self)?;
        }
        Ok(acc)
    }

    /// Divided powers x^{{0}}, …, x^{{n}} of a single term c·f·η^{{k}}.
    fn term_pd_powers(&self, mono: &AMonomial, k: &MultiIndex, c: u32, n: u32) -> Result<Vec<PDJet>> {
        let ctx = self.chart.ctx();
        let f = self.chart.fp();
        let p = ctx.p();
        let mut out = Vec::with_capacity(n as usize + 1);
        for l in 0..=n {
            let kl = k.scale(l);
            let mut x = PDJet::zero(self.chart, self.order);
            if kl.total() <= self.order as u64 {
                let mut num = Vec::new();
                let mut den = vec![q_of(l as u64, ctx)];
                for v in k.iter() {
                    num.push(q_of(v as u64 * l as u64, ctx));
                    den.extend(std::iter::repeat_n(q_of(v as u64, ctx), l as usize));
                }
                let ratio = factorial_ratio(&num, &den, p)?;
                x.add_term(mono.pow(l), kl, f.mul(ratio, f.pow(c, l as u64)));
            }
            out.push(x);
        }
        Ok(out)
    }

    /// x^{{n}} for x in the augmentation ideal.
    pub fn pd_power(&self, n: u32) -> Result<PDJet> {
        Ok(self.pd_powers(n)?.pop().expect("at least x^{{0}}"))
    }

    /// x^{{0}}, …, x^{{n}}.
    pub fn pd_powers(&self, n: u32) -> Result<Vec<PDJet>> {
        if !self.in_ideal() {
            return Err(Error::NotInIdeal);
        }
        let ctx = self.chart.ctx();
        let mut acc: Vec<PDJet> = (0..=n)
            .map(|l| if l == 0 { PDJet::one(self.chart, self.order) } else { PDJet::zero(self.chart, self.order) })
            .collect();
        for ((m, k), c) in &self.terms {
            let y = self.term_pd_powers(m, k, *c, n)?;
            let mut next = Vec::with_capacity(acc.len());
            for total in 0..=n {
                let mut s = PDJet::zero(self.chart, self.order);
                for i in 0..=total {
                    let w = angle(total as u64, i as u64, ctx)?;
                    if w == 0 || acc[i as usize].is_zero() || y[(total - i) as usize].is_zero() {
                        continue;
                    }
                    s = s.add(&acc[i as usize].mul(&y[(total - i) as usize])?.scale(w))?;
                }
                next.push(s);
            }
            acc = next;
        }
        Ok(acc)
    }

    /// Same element viewed with a smaller truncation.
    pub fn truncate(&self, order: u32) -> PDJet {
        let mut out = PDJet::zero(self.chart, order.min(self.order));
        for ((m, k), c) in &self.terms {
            out.add_term(m.clone(), k.clone(), *c);
        }
        out
    }
}

impl fmt::Display for PDJet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for ((m, k), c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            let mut parts = Vec::new();
            if *c != 1 {
                parts.push(c.to_string());
            }
            if !m.is_one() {
                parts.push(m.to_string());
            }
            if !k.is_zero() {
                parts.push(format!("eta{{{k}}}"));
            }
            if parts.is_empty() {
                parts.push("1".into());
            }
            write!(f, "{}", parts.join("*"))?;
        }
        Ok(())
    }
}

/// ⟨∂_{<k>}, η^{{k′}}⟩ = δ_{k,k′}, extended over the coefficients.
pub fn pairing(a: &TDOperator, x: &PDJet) -> Result<AElement> {
    if a.chart() != x.chart() {
        return Err(Error::ContextMismatch);
    }
    let need = a.terms().map(|(_, k, _)| k.total()).max().unwrap_or(0) as u32;
    if x.order() < need {
        return Err(Error::TruncationTooLow { have: x.order(), need });
    }
    let f = x.chart().fp();
    let mut out = x.chart().zero();
    for (m, k, c) in a.terms() {
        for (g, kk, cg) in x.terms() {
            if kk == k {
                out.add_term(m.mul(g), f.mul(c, cg));
            }
        }
    }
    Ok(out)
}

/// Image of η^{{n}} under the comultiplication η ↦ η⊗1 + 1⊗η + η⊗η, as a
/// jet in 2r variables whose first r are the left factor.
pub fn comultiply(n: &MultiIndex, ctx: &LevelContext) -> Result<PDJet> {
    let r = n.len();
    let wide = Chart::base(ctx.with_r(2 * r));
    let order = 2 * n.total() as u32;
    let mut out = PDJet::one(wide, order);
    for i in 0..r {
        let e1 = PDJet::eta(wide, order, i);
        let e2 = PDJet::eta(wide, order, r + i);
        let x = e1.add(&e2)?.add(&e1.mul(&e2)?)?;
        out = out.mul(&x.pd_power(n.get(i))?)?;
    }
    Ok(out)
}

/// Basis indices of Ī/(Ī^{{P+1}} + I·P) for P = p^{m+1}: the k with 1 ≤ |k| ≤ P
/// not reached by any product η_j·η^{{i}} with |i| < P.
pub fn mochizuki_basis(chart: Chart) -> Result<Vec<MultiIndex>> {
    let r = chart.r();
    let top = chart.ctx().period() as u32;
    let mut hit = std::collections::BTreeSet::new();
    for i in MultiIndex::all_with_total_at_most(r, top - 1) {
        let x = PDJet::eta_pd(chart, top, &i);
        for j in 0..r {
            for (_, k, _) in PDJet::eta(chart, top, j).mul(&x)?.terms() {
                hit.insert(k.clone());
            }
        }
    }
    Ok(MultiIndex::all_with_total_at_most(r, top)
        .into_iter()
        .filter(|k| !k.is_zero() && !hit.contains(k))
        .collect())
}

/// Coordinates of the class of x in the quotient of [`mochizuki_basis`].
pub fn mochizuki_class(x: &PDJet, basis: &[MultiIndex]) -> Vec<AElement> {
    basis.iter().map(|k| x.coefficient(k)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chart(p: u32, m: u32, r: usize) -> Chart {
        Chart::base(LevelContext::new(p, m, r).unwrap())
    }

    #[test]
    fn products() {
        let ch = chart(2, 1, 1);
        let a = PDJet::eta_pd(ch, 6, &MultiIndex::new(&[3]));
        let b = PDJet::eta_pd(ch, 6, &MultiIndex::new(&[2]));
        assert!(a.mul(&b).unwrap().is_zero());
        let e = PDJet::eta(ch, 6, 0);
        assert_eq!(e.mul(&e).unwrap(), PDJet::eta_pd(ch, 6, &MultiIndex::new(&[2])));
        assert_eq!(a.mul(&PDJet::one(ch, 6)).unwrap(), a);
    }

    #[test]
    fn divided_powers() {
        let ch = chart(2, 1, 1);
        let e = PDJet::eta(ch, 8, 0);
        let e2 = e.pd_power(2).unwrap();
        assert_eq!(e2, PDJet::eta_pd(ch, 8, &MultiIndex::new(&[2])));
        assert_eq!(e.pd_power(1).unwrap(), e);
        assert!(matches!(PDJet::one(ch, 8).pd_power(2), Err(Error::NotInIdeal)));
    }

    #[test]
    fn mochizuki_quotient_has_rank_r() {
        for (p, m, r) in [(2, 0, 1), (2, 1, 2), (3, 0, 2)] {
            let ch = chart(p, m, r);
            let top = ch.ctx().period() as u32;
            let want: Vec<MultiIndex> = (0..r).rev().map(|i| MultiIndex::unit(r, i, top)).collect();
            let mut got = mochizuki_basis(ch).unwrap();
            got.sort();
            let mut want = want;
            want.sort();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn pairing_values() {
        let ch = chart(2, 1, 1);
        let d2 = TDOperator::d(ch, &MultiIndex::new(&[2]));
        let x = PDJet::eta_pd(ch, 3, &MultiIndex::new(&[2]));
        assert_eq!(pairing(&d2, &x).unwrap(), ch.one());
        let y = PDJet::eta_pd(ch, 3, &MultiIndex::new(&[1]));
        assert!(pairing(&d2, &y).unwrap().is_zero());
        let short = PDJet::eta(ch, 1, 0);
        assert!(matches!(pairing(&d2, &short), Err(Error::TruncationTooLow { .. })));
    }
}
