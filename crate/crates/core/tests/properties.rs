mod common;

use common::*;
use logdm_core::mindex::{self, LevelContext};
use logdm_core::{AElement, AMonomial, Chart, MultiIndex, PDJet, SignedMultiIndex, TDOperator};
use proptest::prelude::*;

fn cell() -> impl Strategy<Value = LevelContext> {
    (0..GRID.len()).prop_map(|i| {
        let (p, m, r) = GRID[i];
        LevelContext::new(p, m, r).unwrap()
    })
}

type RawTerm = (Vec<u32>, Vec<i64>, Vec<u32>, u32);

fn raw_op(r: usize, kmax: u32) -> impl Strategy<Value = Vec<RawTerm>> {
    prop::collection::vec(
        (
            prop::collection::vec(0u32..3, r),
            prop::collection::vec(-3i64..4, r),
            prop::collection::vec(0..=kmax, r),
            1u32..5,
        ),
        1..4,
    )
}

fn build(chart: Chart, raw: &[RawTerm]) -> TDOperator {
    let mut op = TDOperator::zero(chart);
    for (a, j, k, c) in raw {
        op.add_term(AMonomial::new(MultiIndex::new(a), SignedMultiIndex::new(j)), MultiIndex::new(k), *c);
    }
    op
}

fn with_ops(n: usize) -> impl Strategy<Value = (LevelContext, Vec<Vec<RawTerm>>)> {
    cell().prop_flat_map(move |c| {
        let kmax = c.period() as u32 + 1;
        (Just(c), prop::collection::vec(raw_op(c.r(), kmax), n))
    })
}

fn probes(chart: Chart) -> Vec<AElement> {
    let r = chart.r();
    let exps: Vec<i64> = (-3..=9).collect();
    let mut out = Vec::new();
    for e in &exps {
        let mut j = vec![0i64; r];
        j[0] = *e;
        if r > 1 {
            j[1] = 2 - e;
        }
        out.push(AElement::monomial(chart.p(), AMonomial::theta(SignedMultiIndex::new(&j)), 1));
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn angle_times_brace_is_binomial(c in cell(), k in 0u64..200, t in 0u64..200) {
        let k1 = t % (k + 1);
        let p = c.p();
        let lhs = (mindex::angle(k, k1, &c).unwrap() as u64 * mindex::brace(k, k1, &c).unwrap() as u64) % p as u64;
        prop_assert_eq!(lhs as u32, mod_p(&binom(k as i64, k1), p));
        prop_assert_eq!(mindex::brace(k, k1, &c).unwrap(), mindex::brace(k, k - k1, &c).unwrap());
    }

    #[test]
    fn product_constants_are_symmetric(c in cell(), k in 0u64..60, a in 0u64..60, b in 0u64..60) {
        let k1 = a % (k + 1);
        let k2 = k - k1 + b % (k1 + 1);
        prop_assert_eq!(mindex::mul_coeff(k, k1, k2, &c).unwrap(), mindex::mul_coeff(k, k2, k1, &c).unwrap());
        prop_assert_eq!(mindex::mul_coeff(k, k1, k2, &c).unwrap(), red(&common::mul_coeff(k, k1, k2, c.p(), c.m()), c.p()));
    }

    #[test]
    fn products_match_the_action_oracle((c, ops) in with_ops(2)) {
        let chart = Chart::base(c);
        let a = build(chart, &ops[0]);
        let b = build(chart, &ops[1]);
        let ab = a.mul(&b).unwrap();
        for x in probes(chart) {
            prop_assert_eq!(act(&ab, &x), act(&a, &act(&b, &x)));
            prop_assert_eq!(ab.act(&x), act(&ab, &x));
        }
    }

    #[test]
    fn products_are_associative((c, ops) in with_ops(3)) {
        let chart = Chart::base(c);
        let (a, b, d) = (build(chart, &ops[0]), build(chart, &ops[1]), build(chart, &ops[2]));
        prop_assert_eq!(a.mul(&b).unwrap().mul(&d).unwrap(), a.mul(&b.mul(&d).unwrap()).unwrap());
    }

    #[test]
    fn decomposition_reassembles((c, ops) in with_ops(1)) {
        let chart = Chart::base(c);
        let mut x = chart.zero();
        for (a, j, _, k) in &ops[0] {
            x.add_term(AMonomial::new(MultiIndex::new(a), SignedMultiIndex::new(j)), *k);
        }
        let parts = chart.b_decompose(&x).unwrap();
        for (j, b) in &parts {
            prop_assert!(j.iter().all(|v| (v as u64) < c.period()));
            prop_assert!(b.terms().all(|(m, _)| chart.b_level(m) > c.m()));
        }
        prop_assert_eq!(chart.b_reassemble(&parts), x);
    }

    #[test]
    fn divided_powers_scale_to_powers(c in cell(), k in 1u32..9, i in 0usize..2) {
        let chart = Chart::base(c);
        let i = i % c.r();
        let x = PDJet::eta(chart, 9, i).add(&PDJet::eta(chart, 9, 0).pow(2).unwrap()).unwrap();
        let q = mindex::q_factorial_mod(k as u64, &c);
        prop_assert_eq!(x.pd_power(k).unwrap().scale(q), x.pow(k).unwrap());
    }
}
