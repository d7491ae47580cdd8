//! Operators Σ (u^a θ^j)·∂_{<k>} in left normal form and their product through
//! the Leibniz rewrite.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;

use crate::chart::{AElement, AMonomial, Chart, ChartRole};
use crate::error::{invalid, Error, Result};
use crate::mindex::{brace, level_ratio, mul_coeff, LevelContext, MultiIndex, SignedMultiIndex};

type Key = (AMonomial, MultiIndex);

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TDOperator {
    chart: Chart,
    terms: BTreeMap<Key, u32>,
}

impl TDOperator {
    pub fn zero(chart: Chart) -> Self {
        TDOperator { chart, terms: BTreeMap::new() }
    }

    pub fn one(chart: Chart) -> Self {
        Self::d(chart, &MultiIndex::zeros(chart.r()))
    }

    /// ∂_{<k>}.
    pub fn d(chart: Chart, k: &MultiIndex) -> Self {
        Self::term(chart, AMonomial::one(chart.r()), k.clone(), 1)
    }

    /// c·mono·∂_{<k>}.
    pub fn term(chart: Chart, mono: AMonomial, k: MultiIndex, c: u32) -> Self {
        let mut op = Self::zero(chart);
        op.add_term(mono, k, c);
        op
    }

    /// Left multiplication by a coefficient.
    pub fn coeff(chart: Chart, x: &AElement) -> Self {
        let mut op = Self::zero(chart);
        let zero = MultiIndex::zeros(chart.r());
        for (m, c) in x.terms() {
            op.add_term(m.clone(), zero.clone(), c);
        }
        op
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn ctx(&self) -> &LevelContext {
        self.chart.ctx()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&AMonomial, &MultiIndex, u32)> {
        self.terms.iter().map(|((m, k), c)| (m, k, *c))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, mono: AMonomial, k: MultiIndex, c: u32) {
        let f = self.chart.fp();
        let c = c % self.chart.p();
        if c == 0 {
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

    fn check(&self, other: &TDOperator) -> Result<()> {
        if self.chart != other.chart {
            return Err(Error::ContextMismatch);
        }
        Ok(())
    }

    pub fn add(&self, other: &TDOperator) -> Result<TDOperator> {
        self.check(other)?;
        let mut out = self.clone();
        for ((m, k), c) in &other.terms {
            out.add_term(m.clone(), k.clone(), *c);
        }
        Ok(out)
    }

    pub fn scale(&self, c: u32) -> TDOperator {
        let f = self.chart.fp();
        let mut out = TDOperator::zero(self.chart);
        for ((m, k), v) in &self.terms {
            out.add_term(m.clone(), k.clone(), f.mul(*v, c % self.chart.p()));
        }
        out
    }

    pub fn neg(&self) -> TDOperator {
        self.scale(self.chart.p() - 1)
    }

    pub fn sub(&self, other: &TDOperator) -> Result<TDOperator> {
        self.add(&other.neg())
    }

    /// Product in normal form.
    pub fn mul(&self, other: &TDOperator) -> Result<TDOperator> {
        self.check(other)?;
        let mut out = TDOperator::zero(self.chart);
        for ((f, k), c1) in &self.terms {
            for ((g, l), c2) in &other.terms {
                let coeff = self.chart.fp().mul(*c1, *c2);
                let fg = f.mul(g);
                for (n, v) in term_product(&self.chart, k, g, l)? {
                    out.add_term(fg.clone(), n, self.chart.fp().mul(coeff, v));
                }
            }
        }
        Ok(out)
    }

    pub fn commutator(&self, other: &TDOperator) -> Result<TDOperator> {
        self.mul(other)?.sub(&other.mul(self)?)
    }

    /// Evaluation on a coefficient.
    pub fn act(&self, x: &AElement) -> AElement {
        let f = self.chart.fp();
        let mut out = self.chart.zero();
        for ((m, k), c) in &self.terms {
            for (g, cg) in x.terms() {
                let l = self.chart.lambda_multi(k, g);
                out.add_term(m.mul(g), f.mul(f.mul(*c, cg), l));
            }
        }
        out
    }

    /// Image under the natural map to level m2 ≥ m.
    pub fn level_map(&self, m2: u32) -> Result<TDOperator> {
        if self.chart.role() != ChartRole::Base {
            return Err(Error::UnsupportedContext("level change is defined on the base chart".into()));
        }
        let ctx = *self.ctx();
        if m2 < ctx.m() {
            return Err(Error::UnsupportedContext(format!(
                "target level {m2} is below the source level {}",
                ctx.m()
            )));
        }
        let target = Chart::base(ctx.at_level(m2)?);
        let f = ctx.fp();
        let mut out = TDOperator::zero(target);
        for ((m, k), c) in &self.terms {
            let mut v = *c;
            for e in k.iter() {
                v = f.mul(v, level_ratio(e as u64, ctx.m(), m2, ctx.p())?);
            }
            out.add_term(m.clone(), k.clone(), v);
        }
        Ok(out)
    }

    /// Leading term under the graded-lexicographic order on k.
    fn leading(&self) -> Option<(AMonomial, MultiIndex, u32)> {
        self.terms
            .iter()
            .max_by(|((_, k1), _), ((_, k2), _)| (k1.total(), k1).cmp(&(k2.total(), k2)))
            .map(|((m, k), c)| (m.clone(), k.clone(), *c))
    }
}

/// Σ_n coefficient of ∂_{<n>} in ∂_{<k>}·g·∂_{<l>} after moving g left (g is factored out).
fn term_product(
    chart: &Chart,
    k: &MultiIndex,
    g: &AMonomial,
    l: &MultiIndex,
) -> Result<Vec<(MultiIndex, u32)>> {
    let ctx = chart.ctx();
    let f = chart.fp();
    let e = chart.eigen(g);
    let mut per_coord: Vec<Vec<(u32, u32)>> = Vec::with_capacity(k.len());
    for c in 0..k.len() {
        let (kc, lc) = (k.get(c) as u64, l.get(c) as u64);
        let mut acc = vec![0u32; (kc + lc + 1) as usize];
        for i in 0..=kc {
            if ctx.fault().skips_leibniz(c, i, kc) {
                continue;
            }
            let b = brace(kc, i, ctx)?;
            if b == 0 {
                continue;
            }
            let lam = chart.lambda(kc - i, e.get(c));
            if lam == 0 {
                continue;
            }
            let w = f.mul(b, lam);
            for n in i.max(lc)..=i + lc {
                let mc = mul_coeff(n, i, lc, ctx)?;
                if mc != 0 {
                    acc[n as usize] = f.add(acc[n as usize], f.mul(w, mc));
                }
            }
        }
        let nz: Vec<(u32, u32)> =
            acc.iter().enumerate().filter(|(_, v)| **v != 0).map(|(n, v)| (n as u32, *v)).collect();
        if nz.is_empty() {
            return Ok(Vec::new());
        }
        per_coord.push(nz);
    }
    let mut out: Vec<(Vec<u32>, u32)> = vec![(Vec::new(), 1 % chart.p())];
    for options in &per_coord {
        let mut next = Vec::with_capacity(out.len() * options.len());
        for (prefix, v) in &out {
            for (n, w) in options {
                let mut idx = prefix.clone();
                idx.push(*n);
                next.push((idx, f.mul(*v, *w)));
            }
        }
        out = next;
    }
    Ok(out.into_iter().map(|(n, v)| (MultiIndex::new(&n), v)).collect())
}

impl fmt::Display for TDOperator {
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
                parts.push(format!("d{k}"));
            }
            if parts.is_empty() {
                parts.push("1".into());
            }
            write!(f, "{}", parts.join("*"))?;
        }
        Ok(())
    }
}

/// β(ε_i) = ∂_{<p^{m+1} ε_i>}.
pub fn curvature_beta(i: usize, ctx: &LevelContext) -> Result<TDOperator> {
    if i >= ctx.r() {
        return Err(Error::ArityError { expected: ctx.r(), found: i + 1 });
    }
    let k = MultiIndex::unit(ctx.r(), i, ctx.period() as u32);
    Ok(TDOperator::d(Chart::base(*ctx), &k))
}

/// Image of ξ′^b: ∂_{<p^{m+1} b>}.
pub fn xi_power(b: &MultiIndex, ctx: &LevelContext) -> TDOperator {
    TDOperator::d(Chart::base(*ctx), &b.scale(ctx.period() as u32))
}

fn mono_op(chart: Chart, a: &[u32], j: &[i64]) -> TDOperator {
    TDOperator::term(
        chart,
        AMonomial::new(MultiIndex::new(a), SignedMultiIndex::new(j)),
        MultiIndex::zeros(chart.r()),
        1,
    )
}

/// Generators of the coefficient ring: θ^{±1} and u on the base chart;
/// θ′^{±1}, u_iθ_i^{-1} and u_i^{p^m} on the Frobenius target.
pub fn coefficient_generators(chart: &Chart) -> Vec<TDOperator> {
    let r = chart.r();
    let s = chart.step() as i64;
    let mut out = Vec::new();
    for i in 0..r {
        let mut j = vec![0i64; r];
        j[i] = s;
        out.push(mono_op(*chart, &vec![0; r], &j));
        j[i] = -s;
        out.push(mono_op(*chart, &vec![0; r], &j));
        let mut a = vec![0u32; r];
        match chart.role() {
            ChartRole::Base => {
                a[i] = 1;
                out.push(mono_op(*chart, &a, &vec![0; r]));
            }
            ChartRole::FrobeniusTarget { .. } => {
                a[i] = 1;
                j[i] = -1;
                out.push(mono_op(*chart, &a, &j));
                a[i] = s as u32;
                out.push(mono_op(*chart, &a, &vec![0; r]));
            }
        }
    }
    out
}

/// ∂_{<p^s ε_i>} for s ≤ level.
pub fn derivation_generators(chart: &Chart) -> Vec<TDOperator> {
    let ctx = chart.ctx();
    let mut out = Vec::new();
    for i in 0..chart.r() {
        for s in 0..=ctx.m() {
            out.push(TDOperator::d(*chart, &MultiIndex::unit(chart.r(), i, ctx.p().pow(s))));
        }
    }
    out
}

fn commutes_with_all(a: &TDOperator, gens: &[TDOperator]) -> Result<bool> {
    for g in gens {
        if !a.commutator(g)?.is_zero() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Vanishing commutators with every ring generator.
pub fn center_test(a: &TDOperator) -> Result<bool> {
    let mut gens = coefficient_generators(a.chart());
    gens.extend(derivation_generators(a.chart()));
    commutes_with_all(a, &gens)
}

/// Every term has k ≡ 0 mod p^{m+1} and a coefficient in B^{(m+1)}.
pub fn center_structural(a: &TDOperator) -> bool {
    let chart = a.chart();
    let period = chart.ctx().period() as u32;
    let top = chart.ctx().m() + 1;
    a.terms().all(|(m, k, _)| k.iter().all(|v| v % period == 0) && chart.b_level(m) >= top)
}

/// Vanishing commutators with the coefficient generators.
pub fn centralizer_test(a: &TDOperator) -> Result<bool> {
    commutes_with_all(a, &coefficient_generators(a.chart()))
}

/// Every term has k ≡ 0 mod p^{m+1}.
pub fn centralizer_structural(a: &TDOperator) -> bool {
    let period = a.chart().ctx().period() as u32;
    a.terms().all(|(_, k, _)| k.iter().all(|v| v % period == 0))
}

/// Writes A = Σ_i ∂_{<i>}·c_i with i ∈ [0,p^{m+1})^r and each c_i a sum of f·∂_{<p^{m+1}b>}.
pub fn right_decompose(a: &TDOperator) -> Result<BTreeMap<MultiIndex, TDOperator>> {
    let chart = *a.chart();
    let period = chart.ctx().period() as u32;
    let mut rest = a.clone();
    let mut out: BTreeMap<MultiIndex, TDOperator> = BTreeMap::new();
    let limit = 64 * (a.len() + 1) * (period as usize).pow(chart.r() as u32 + 1);
    let mut steps = 0;
    while let Some((m, k, c)) = rest.leading() {
        steps += 1;
        if steps > limit {
            return Err(invalid(format!("right decomposition of {a} does not terminate")));
        }
        let i = MultiIndex::new(&k.iter().map(|v| v % period).collect::<Vec<_>>());
        let b = MultiIndex::new(&k.iter().map(|v| v - v % period).collect::<Vec<_>>());
        let piece = TDOperator::term(chart, m, b, c);
        let image = TDOperator::d(chart, &i).mul(&piece)?;
        let before = rest.clone();
        rest = rest.sub(&image)?;
        if rest == before {
            return Err(invalid(format!("right decomposition of {a} stalls")));
        }
        let slot = out.entry(i).or_insert_with(|| TDOperator::zero(chart));
        *slot = slot.add(&piece)?;
    }
    out.retain(|_, v| !v.is_zero());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chart(p: u32, m: u32, r: usize) -> Chart {
        Chart::base(LevelContext::new(p, m, r).unwrap())
    }

    fn d(ch: Chart, k: u32) -> TDOperator {
        TDOperator::d(ch, &MultiIndex::new(&[k]))
    }

    fn th(ch: Chart, j: i64) -> TDOperator {
        mono_op(ch, &[0], &[j])
    }

    #[test]
    fn small_products() {
        let ch = chart(2, 1, 1);
        assert_eq!(d(ch, 1).mul(&d(ch, 1)).unwrap(), d(ch, 1));
        assert_eq!(d(ch, 4).mul(&d(ch, 3)).unwrap(), d(ch, 7));
        let lhs = d(ch, 1).mul(&th(ch, 1)).unwrap();
        let rhs = th(ch, 1).mul(&d(ch, 1)).unwrap().add(&th(ch, 1)).unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn commutators() {
        let ch = chart(2, 1, 1);
        assert!(d(ch, 4).commutator(&th(ch, 1)).unwrap().is_zero());
        assert!(d(ch, 1).commutator(&d(ch, 2)).unwrap().is_zero());
        let c = d(ch, 2).commutator(&th(ch, 1)).unwrap();
        assert_eq!(c, th(ch, 1).mul(&d(ch, 1)).unwrap());
    }

    #[test]
    fn level_change() {
        let ch = chart(2, 0, 1);
        assert!(d(ch, 2).level_map(1).unwrap().is_zero());
        assert_eq!(d(ch, 1).level_map(1).unwrap().to_string(), "d[1]");
    }

    #[test]
    fn center_examples() {
        let ch = chart(2, 1, 1);
        let z = mono_op(ch, &[0], &[4]).mul(&d(ch, 4)).unwrap();
        assert!(center_test(&z).unwrap() && center_structural(&z));
        let nz = th(ch, 1).mul(&d(ch, 4)).unwrap();
        assert!(!center_test(&nz).unwrap() && !center_structural(&nz));
        assert!(center_test(&TDOperator::one(ch)).unwrap());
    }

    #[test]
    fn right_decomposition_reassembles() {
        let ch = chart(2, 1, 1);
        let a = th(ch, 1).mul(&d(ch, 9)).unwrap();
        let parts = right_decompose(&a).unwrap();
        let mut back = TDOperator::zero(ch);
        for (i, c) in &parts {
            back = back.add(&TDOperator::d(ch, i).mul(c).unwrap()).unwrap();
        }
        assert_eq!(back, a);
    }
}
