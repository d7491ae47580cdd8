//! Worked examples with frozen values; each derived value is also recomputed by the oracle.

mod common;

use common::*;
use logdm_core::azumaya::{a_basis_over_center, end_iso_rank, t1_is_unitriangular};
use logdm_core::cartier::{export_k, k_constants, splitting_ranks, KModule};
use logdm_core::chart::b_level;
use logdm_core::jet::{mochizuki_basis, pairing};
use logdm_core::mindex::{
    angle, binom_mod_p, brace, factorial_val_unit, level_ratio, mul_coeff, q_of,
};
use logdm_core::operator::{center_structural, center_test, curvature_beta, xi_power};
use logdm_core::{AElement, AMonomial, Chart, Fault, LevelContext, MultiIndex, PDJet, SignedMultiIndex, TDOperator};

fn ctx(p: u32, m: u32, r: usize) -> LevelContext {
    LevelContext::new(p, m, r).unwrap()
}

fn base(p: u32, m: u32, r: usize) -> Chart {
    Chart::base(ctx(p, m, r))
}

fn mi(v: &[u32]) -> MultiIndex {
    MultiIndex::new(v)
}

fn th(j: &[i64]) -> AMonomial {
    AMonomial::theta(SignedMultiIndex::new(j))
}

fn mono(a: &[u32], j: &[i64]) -> AMonomial {
    AMonomial::new(mi(a), SignedMultiIndex::new(j))
}

fn el(c: Chart, m: AMonomial) -> AElement {
    AElement::monomial(c.p(), m, 1)
}

fn d(c: Chart, k: &[u32]) -> TDOperator {
    TDOperator::d(c, &mi(k))
}

fn op(c: Chart, m: AMonomial, k: &[u32]) -> TDOperator {
    TDOperator::term(c, m, mi(k), 1)
}

#[test]
fn q_values() {
    assert_eq!(q_of(5, &ctx(2, 1, 1)), 2);
    assert_eq!(q(5, 2, 1), 2);
    assert_eq!(q_of(3, &ctx(2, 2, 1)), 0);
    for (p, m, r) in GRID {
        let c = ctx(p, m, r);
        assert_eq!(q_of(c.period(), &c), p as u64);
    }
}

#[test]
fn binomials() {
    assert_eq!(binom_mod_p(6, 2, 2), 1);
    assert_eq!(mod_p(&binom(6, 2), 2), 1);
    assert_eq!(binom_mod_p(3, 2, 2), 1);
    assert_eq!(binom_mod_p(-1, 2, 3), 1);
    assert_eq!(mod_p(&binom(-1, 2), 3), 1);
}

#[test]
fn braces_and_angles() {
    let c = ctx(2, 1, 1);
    assert_eq!(brace(5, 3, &c).unwrap(), 0);
    assert_eq!(red(&brace_o(5, 3, 2, 1), 2), 0);
    assert_eq!(brace(7, 7, &c).unwrap(), 1);
    assert_eq!(brace(4, 3, &c).unwrap(), 0);
    assert_eq!(red(&brace_o(4, 3, 2, 1), 2), 0);
    assert_eq!(angle(5, 3, &c).unwrap(), 1);
    assert_eq!(red(&angle_o(5, 3, 2, 1), 2), 1);
    assert_eq!(angle(6, 0, &c).unwrap(), 1);
    // ⟨2,1⟩ at p = 2, m = 0: C(2,1) = 2 over {2,1} = 2.
    assert_eq!(angle(2, 1, &ctx(2, 0, 1)).unwrap(), 1);
    assert_eq!(red(&angle_o(2, 1, 2, 0), 2), 1);
}

fn brace_o(k: u64, k1: u64, p: u32, m: u32) -> num_rational::BigRational {
    common::brace(k, k1, p, m)
}

fn angle_o(k: u64, k1: u64, p: u32, m: u32) -> num_rational::BigRational {
    common::angle(k, k1, p, m)
}

#[test]
fn product_constants() {
    assert_eq!(mul_coeff(1, 1, 1, &ctx(2, 1, 1)).unwrap(), 1);
    assert_eq!(mul_coeff(2, 1, 1, &ctx(2, 1, 1)).unwrap(), 0);
    assert_eq!(mul_coeff(2, 1, 1, &ctx(2, 0, 1)).unwrap(), 1);
    assert_eq!(common::mul_coeff(1, 1, 1, 2, 1), ratio(1.into(), 1.into()));
    assert_eq!(common::mul_coeff(2, 1, 1, 2, 1), ratio(2.into(), 1.into()));
    assert_eq!(common::mul_coeff(2, 1, 1, 2, 0), ratio(1.into(), 1.into()));
}

#[test]
fn factorial_parts() {
    assert_eq!(factorial_val_unit(4, 2), (3, 1));
    assert_eq!(vp(&fact(4), 2), 3);
    assert_eq!(factorial_val_unit(0, 7), (0, 1));
    assert_eq!(factorial_val_unit(4, 5), (0, 4));
    assert_eq!(mod_p(&fact(4), 5), 4);
}

#[test]
fn coefficient_action() {
    let c = base(2, 1, 1);
    assert_eq!(c.d_action(&mi(&[2]), &el(c, th(&[3]))), el(c, th(&[3])));
    assert_eq!(mod_p(&lambda(2, 3, 2, 1), 2), 1);
    let x = el(c, mono(&[1], &[3]));
    assert_eq!(c.d_action(&mi(&[0]), &x), x);
    assert!(c.d_action(&mi(&[1]), &x).is_zero());
    assert_eq!(mod_p(&lambda(1, 4, 2, 1), 2), 0);
}

#[test]
fn b_levels_and_decompositions() {
    let c = ctx(2, 1, 1);
    let ch = Chart::base(c);
    assert_eq!(b_level(&mono(&[1], &[3]), &c), 2);
    for s in [1, 2] {
        assert!(ch.d_action(&mi(&[s]), &el(ch, mono(&[1], &[3]))).is_zero());
    }
    assert_eq!(b_level(&th(&[0]), &c), 2);
    assert_eq!(b_level(&th(&[1]), &c), 0);

    let parts = ch.b_decompose(&el(ch, th(&[5]))).unwrap();
    assert_eq!(parts.into_iter().collect::<Vec<_>>(), vec![(mi(&[1]), el(ch, th(&[4])))]);
    let parts = ch.b_decompose(&ch.one()).unwrap();
    assert_eq!(parts.into_iter().collect::<Vec<_>>(), vec![(mi(&[0]), ch.one())]);
    // u^3 θ^{-1} has eigen-exponent 2, so it sits entirely at residue 2.
    let x = el(ch, mono(&[3], &[-1]));
    let parts = ch.b_decompose(&x).unwrap();
    assert_eq!(parts.clone().into_iter().collect::<Vec<_>>(), vec![(mi(&[2]), el(ch, mono(&[3], &[-3])))]);
    assert_eq!(ch.b_reassemble(&parts), x);
}

#[test]
fn bases_over_the_next_level() {
    assert_eq!(base(2, 1, 1).b_basis_over_higher(), vec![th(&[0]), th(&[2])]);
    assert_eq!(base(3, 0, 1).b_basis_over_higher(), vec![th(&[0]), th(&[1]), th(&[2])]);
    let mut got = base(2, 1, 2).b_basis_over_higher();
    got.sort();
    let mut want = vec![th(&[0, 0]), th(&[2, 0]), th(&[0, 2]), th(&[2, 2])];
    want.sort();
    assert_eq!(got, want);
    for m in &got {
        assert!(b_level(m, &ctx(2, 1, 2)) >= 1);
    }
}

#[test]
fn operator_products() {
    let c = base(2, 1, 1);
    assert_eq!(d(c, &[1]).mul(&d(c, &[1])).unwrap(), d(c, &[1]));
    assert_eq!(d(c, &[4]).mul(&d(c, &[3])).unwrap(), d(c, &[7]));
    let t = op(c, th(&[1]), &[0]);
    let want = op(c, th(&[1]), &[1]).add(&t).unwrap();
    let got = d(c, &[1]).mul(&t).unwrap();
    assert_eq!(got, want);
    for j in -3..6 {
        let x = el(c, th(&[j]));
        assert_eq!(act(&got, &x), act(&d(c, &[1]), &act(&t, &x)));
    }
}

#[test]
fn commutators() {
    let c = base(2, 1, 1);
    let t = op(c, th(&[1]), &[0]);
    assert!(d(c, &[4]).commutator(&t).unwrap().is_zero());
    assert!(d(c, &[1]).commutator(&d(c, &[2])).unwrap().is_zero());
    // {2,1} = 1 at (p, m) = (2, 1), so [∂_<2>, θ] = θ·∂_<1>.
    assert_eq!(d(c, &[2]).commutator(&t).unwrap(), op(c, th(&[1]), &[1]));
    assert_eq!(red(&common::brace(2, 1, 2, 1), 2), 1);
}

#[test]
fn level_maps() {
    let c0 = base(2, 0, 1);
    assert!(d(c0, &[2]).level_map(1).unwrap().is_zero());
    assert_eq!(red(&ratio(fact(2), fact(1)), 2), 0);
    assert_eq!(level_ratio(2, 0, 1, 2).unwrap(), 0);
    let c1 = base(3, 1, 1);
    assert_eq!(d(c1, &[1]).level_map(2).unwrap(), d(base(3, 2, 1), &[1]));
    assert!(d(c1, &[9]).level_map(2).unwrap().is_zero());
    assert_eq!(level_ratio(9, 1, 2, 3).unwrap(), 0);
}

#[test]
fn jet_products_and_powers() {
    let c = base(2, 1, 1);
    let e3 = PDJet::eta_pd(c, 6, &mi(&[3]));
    let e2 = PDJet::eta_pd(c, 6, &mi(&[2]));
    assert!(e3.mul(&e2).unwrap().is_zero());
    assert_eq!(red(&common::brace(5, 3, 2, 1), 2), 0);
    assert_eq!(e3.mul(&PDJet::one(c, 6)).unwrap(), e3);
    // {2,1} = 1 at (2, 1), so η·η = η^{{2}}.
    let e = PDJet::eta(c, 6, 0);
    assert_eq!(e.mul(&e).unwrap(), e2);
    assert_eq!(e.pd_power(2).unwrap(), e2);
    assert_eq!(e.pd_power(1).unwrap(), e);
    // q_2! = 1, so η^2 = η^{{2}}.
    assert_eq!(e.pow(2).unwrap(), e2);
}

#[test]
fn sum_of_top_powers() {
    for (p, m) in [(2, 0), (2, 1), (3, 0)] {
        let c = base(p, m, 2);
        let top = c.ctx().period() as u32;
        let order = top + 1;
        let x = PDJet::eta(c, order, 0).add(&PDJet::eta(c, order, 1)).unwrap();
        let lhs = x.pd_power(top).unwrap();
        let rhs = PDJet::eta_pd(c, order, &MultiIndex::unit(2, 0, top))
            .add(&PDJet::eta_pd(c, order, &MultiIndex::unit(2, 1, top)))
            .unwrap();
        let diff = lhs.sub(&rhs).unwrap();
        for (_, k, _) in diff.terms() {
            assert!(k.get(0) > 0 && k.get(1) > 0 && k.get(0) < top && k.get(1) < top, "{k}");
        }
    }
}

#[test]
fn dual_pairing() {
    let c = base(2, 1, 1);
    assert_eq!(pairing(&d(c, &[2]), &PDJet::eta_pd(c, 3, &mi(&[2]))).unwrap(), c.one());
    assert!(pairing(&d(c, &[2]), &PDJet::eta_pd(c, 3, &mi(&[1]))).unwrap().is_zero());
    let a = d(c, &[1]).add(&d(c, &[3])).unwrap();
    assert_eq!(pairing(&a, &PDJet::eta_pd(c, 3, &mi(&[3]))).unwrap(), c.one());
}

#[test]
fn curvature_images() {
    let cx = ctx(2, 1, 1);
    let c = Chart::base(cx);
    assert_eq!(curvature_beta(0, &cx).unwrap(), d(c, &[4]));
    assert_eq!(xi_power(&mi(&[2]), &cx), d(c, &[8]));
    let b = curvature_beta(0, &cx).unwrap();
    assert_eq!(b.mul(&b).unwrap(), d(c, &[8]));
    for g in [d(c, &[2]), op(c, th(&[1]), &[0]), op(c, mono(&[1], &[0]), &[0])] {
        assert!(b.commutator(&g).unwrap().is_zero());
    }
}

#[test]
fn mochizuki_examples() {
    for (p, m, r) in GRID {
        let c = base(p, m, r);
        assert_eq!(mochizuki_basis(c).unwrap().len(), r);
    }
    let c = base(2, 1, 1);
    let top = 4;
    let u = el(c, mono(&[1], &[0]));
    let x = PDJet::eta(c, top + 1, 0).scale_by(&u);
    let want = PDJet::eta_pd(c, top + 1, &mi(&[top])).scale_by(&u.pow(top));
    assert_eq!(x.pd_power(top).unwrap(), want);
}

#[test]
fn center_examples() {
    let c = base(2, 1, 1);
    let a = op(c, th(&[4]), &[4]);
    assert!(center_test(&a).unwrap() && center_structural(&a));
    let b = op(c, th(&[1]), &[4]);
    assert!(!center_test(&b).unwrap() && !center_structural(&b));
    let one = TDOperator::one(c);
    assert!(center_test(&one).unwrap() && center_structural(&one));
}

#[test]
fn azumaya_ranks() {
    let c = base(2, 1, 1);
    let (rank, want) = end_iso_rank(c, 1).unwrap();
    assert_eq!(rank, want);
    assert!(t1_is_unitriangular(c));
    let (rank, want) = end_iso_rank(base(2, 0, 1), 2).unwrap();
    assert_eq!(rank, want);
    assert_eq!(a_basis_over_center(c).len().pow(2), 16);
    assert_eq!(a_basis_over_center(base(3, 0, 1)).len().pow(2), 9);
    let target = Chart::frobenius_target(ctx(2, 1, 2));
    assert_eq!(a_basis_over_center(target).len().pow(2), 16);
}

#[test]
fn k_structure_constants() {
    assert_eq!(k_constants(&ctx(2, 0, 1))[1..], [1, 1]);
    assert_eq!(k_constants(&ctx(3, 0, 1))[1..], [2, 1, 1]);
    for (p, m, r) in GRID {
        let c = ctx(p, m, r);
        let l = c.period();
        let got = k_constants(&c);
        for k in 1..=l {
            let v = -(binom(l as i64, k) * fact(q(k, p, m))) / BigInt::from(p);
            assert_eq!(got[k as usize], mod_p(&v, p), "{c} k={k}");
        }
        assert_eq!(got[l as usize], 1);
    }
}

use num_bigint::BigInt;

#[test]
fn k_modules_and_exports() {
    let e = export_k(ctx(2, 0, 1), 2).unwrap();
    assert_eq!(e.c, [1, 1]);
    let e = export_k(ctx(3, 0, 1), 1).unwrap();
    assert_eq!(e.c[2], 1);
    for (p, m, r) in GRID {
        let k = KModule::build(ctx(p, m, r), 2).unwrap();
        assert_eq!(k.sign, 1);
        k.check_curvature_forms().unwrap();
        if p > 2 {
            let negated = k_constants(&ctx(p, m, r)).iter().map(|c| (p - c) % p).collect();
            let other = KModule::build_with(ctx(p, m, r), 2, negated, -1).unwrap();
            assert!(other.check_curvature_forms().is_err(), "({p},{m},{r})");
        }
    }
    let bad = KModule::build(ctx(3, 0, 1).with_fault(Fault::FlipKConstant), 2).unwrap();
    assert!(bad.check_curvature_forms().is_err());
}

#[test]
fn splitting_is_bijective() {
    for (p, m, n) in [(2, 0, 2), (2, 1, 2)] {
        for (rank, want) in splitting_ranks(ctx(p, m, 1), n).unwrap() {
            assert_eq!(rank, want);
        }
    }
}
