//! Azumaya structure of the operator ring over its center, and Morita
//! equivalence along the coefficient algebra.

use std::collections::BTreeMap;

use crate::chart::{AMonomial, Chart};
use crate::error::{invalid, Result};
use crate::linalg::Mat;
use crate::mindex::{binom_mod_p, factorial_ratio, q_of, MultiIndex, SignedMultiIndex};
use crate::module::{
    hom_from_cyclic, joint_kernel, restrict, tensor_with_a, CyclicSource, Fiber, HomSpace, IndexedModule, ModuleMap,
    Tensor,
};
use crate::operator::{right_decompose, TDOperator};

fn theta_op(chart: Chart, j: &SignedMultiIndex) -> TDOperator {
    TDOperator::term(chart, chart.theta(j), MultiIndex::zeros(chart.r()), 1)
}

/// β^j(X) = Σ_{i≤j} (-1)^{|j-i|} C(j,i) θ^{-i} X θ^{i}.
pub fn beta(j: &MultiIndex, x: &TDOperator) -> Result<TDOperator> {
    let chart = *x.chart();
    let f = chart.fp();
    let mut out = TDOperator::zero(chart);
    for i in j.below() {
        let sign = (j.total() - i.total()) % 2 == 1;
        let mut c = 1 % chart.p();
        for (a, b) in j.iter().zip(i.iter()) {
            c = f.mul(c, binom_mod_p(a as i64, b as u64, chart.p()));
        }
        if sign {
            c = f.neg(c);
        }
        if c == 0 {
            continue;
        }
        let conj = theta_op(chart, &i.to_signed().neg()).mul(x)?.mul(&theta_op(chart, &i.to_signed()))?;
        out = out.add(&conj.scale(c))?;
    }
    Ok(out)
}

/// Expected value of β^j(∂_{<k>}): (q_k!/q_{k-j}!) ∂_{<k-j>} for j ≤ k, else 0.
pub fn beta_on_d_expected(chart: Chart, j: &MultiIndex, k: &MultiIndex) -> Result<TDOperator> {
    let Some(rest) = k.checked_sub(j) else {
        return Ok(TDOperator::zero(chart));
    };
    let ctx = chart.ctx();
    let num: Vec<u64> = k.iter().map(|v| q_of(v as u64, ctx)).collect();
    let den: Vec<u64> = rest.iter().map(|v| q_of(v as u64, ctx)).collect();
    let c = factorial_ratio(&num, &den, chart.p())?;
    Ok(TDOperator::d(chart, &rest).scale(c))
}

/// Mismatches between β^j(∂_{<k>}) and its closed form for j, k ∈ [0,P)^r.
pub fn end_iso_triangular_failures(chart: Chart) -> Result<Vec<(MultiIndex, MultiIndex, String, String)>> {
    let period = chart.ctx().period() as u32;
    let grid = MultiIndex::all_below(chart.r(), period);
    let mut out = Vec::new();
    for j in &grid {
        for k in &grid {
            let got = beta(j, &TDOperator::d(chart, k))?;
            let want = beta_on_d_expected(chart, j, k)?;
            if got != want {
                out.push((j.clone(), k.clone(), want.to_string(), got.to_string()));
            }
        }
    }
    Ok(out)
}

/// The θ-coefficient matrix T1 (i ≤ j entries (-1)^{|j-i|}C(j,i)θ^{-i}) is
/// triangular with unit diagonal θ^{-j}.
pub fn t1_is_unitriangular(chart: Chart) -> bool {
    let period = chart.ctx().period() as u32;
    let grid = MultiIndex::all_below(chart.r(), period);
    let f = chart.fp();
    let n = grid.len();
    let mut m = Mat::zeros(chart.p(), n, n);
    for (x, i) in grid.iter().enumerate() {
        for (y, j) in grid.iter().enumerate() {
            if i.le(j) {
                let c = i
                    .iter()
                    .zip(j.iter())
                    .fold(1 % chart.p(), |acc, (a, b)| f.mul(acc, binom_mod_p(b as i64, a as u64, chart.p())));
                let sign = (j.total() - i.total()) % 2 == 1;
                m.set(x, y, if sign { f.neg(c) } else { c });
            } else if m.get(x, y) != 0 {
                return false;
            }
        }
    }
    (0..n).all(|x| m.get(x, x) == 1 % chart.p()) && m.is_invertible()
}

/// F_p-rank of left multiplication by θ^a ∂_{<b>} ∂_{<Pc>} (a,b ∈ [0,P)^r, |c| ≤ N)
/// on the right-module basis ∂_{<k>}, after factoring θ^a out of every entry and
/// truncating the central variables at total degree N. Returns (rank, expected).
pub fn end_iso_rank(chart: Chart, n_trunc: u32) -> Result<(usize, usize)> {
    let r = chart.r();
    let period = chart.ctx().period() as u32;
    let grid = MultiIndex::all_below(r, period);
    let zs = MultiIndex::all_with_total_at_most(r, n_trunc);
    let n = grid.len();
    let z_pos: BTreeMap<MultiIndex, usize> = zs.iter().cloned().enumerate().map(|(i, z)| (z, i)).collect();
    let grid_pos: BTreeMap<MultiIndex, usize> = grid.iter().cloned().enumerate().map(|(i, z)| (z, i)).collect();
    let width = n * n * zs.len();
    let mut rows: Vec<Vec<u32>> = Vec::new();
    for a in &grid {
        let th = theta_op(chart, &a.to_signed());
        for b in &grid {
            for c in &zs {
                let x = th.mul(&TDOperator::d(chart, b))?.mul(&TDOperator::d(chart, &c.scale(period)))?;
                let mut v = vec![0u32; width];
                for (kcol, k) in grid.iter().enumerate() {
                    let parts = right_decompose(&x.mul(&TDOperator::d(chart, k))?)?;
                    for (i, piece) in parts {
                        let irow = grid_pos[&i];
                        for (mono, kk, coef) in piece.terms() {
                            if chart.eigen(mono) != a.to_signed() || !mono.a.is_zero() {
                                return Err(invalid(format!("entry {mono} is not in θ^{a}·F_p[z]")));
                            }
                            let z = MultiIndex::new(&kk.iter().map(|v| v / period).collect::<Vec<_>>());
                            if let Some(&zp) = z_pos.get(&z) {
                                let idx = (irow * n + kcol) * zs.len() + zp;
                                v[idx] = chart.fp().add(v[idx], coef);
                            }
                        }
                    }
                }
                rows.push(v);
            }
        }
    }
    let m = Mat::from_rows(chart.p(), &rows);
    Ok((m.rank(), width))
}

/// The coefficient algebra as a module over the differential operators.
pub fn coefficient_module(chart: Chart) -> Result<CyclicSource> {
    let ctx = *chart.ctx();
    let step = chart.step();
    let shell = IndexedModule::new(ctx, step, vec![0; ((step * ctx.period()) as usize).pow(ctx.r() as u32)]);
    let mut dims = vec![0; shell.num_degrees()];
    dims[0] = 1;
    let point = IndexedModule::new(ctx, step, dims);
    let t = tensor_with_a(ctx, step, &Fiber::trivial(&point))?;
    let words = t
        .basis
        .iter()
        .map(|v| v.iter().map(|(j, _)| (j.clone(), MultiIndex::zeros(ctx.r()))).collect())
        .collect();
    Ok(CyclicSource { module: t.module, words })
}

/// A ⊗ E′ for a graded module E′.
pub fn induce(e: &IndexedModule) -> Result<Tensor> {
    tensor_with_a(*e.ctx(), e.step(), &Fiber::trivial(e))
}

/// E^∇ with its inclusion; requires vanishing curvature.
pub fn nabla_invariants(e: &IndexedModule) -> Result<(IndexedModule, Vec<Vec<Vec<u32>>>)> {
    if !e.curvature_vanishes()? {
        return Err(crate::error::Error::NonzeroCurvature);
    }
    let basis = joint_kernel(e, &e.d_gens())?;
    let dims = basis.iter().map(|b| b.len()).collect();
    let mut out = IndexedModule::new(*e.ctx(), e.step(), dims);
    if e.higgs_order().is_some() {
        out.set_higgs_order(e.higgs_order());
        for b in e.higgs_indices() {
            let g = crate::module::Gen::Higgs(b);
            let h = e.op(&g).expect("validated");
            let mats = (0..e.num_degrees())
                .map(|id| restrict(e.p(), &h[id], &basis[id], &basis[id], e.dim(id)))
                .collect::<Result<Vec<_>>>()?;
            out.set_op(g, mats);
        }
    }
    Ok((out, basis))
}

/// Evaluation T → Y with (j, w) ↦ θ^j·y_w, where T is A ⊗ H for a Hom space H.
pub fn evaluation_map(t: &Tensor, hom: &HomSpace, y: &IndexedModule) -> Result<ModuleMap> {
    let mut blocks = Vec::with_capacity(y.num_degrees());
    for id in 0..y.num_degrees() {
        let mut cols = Vec::with_capacity(t.basis[id].len());
        for (j, w) in &t.basis[id] {
            let mut back = id;
            for i in 0..y.r() {
                back = y.shift(back, i, -(y.step() as i64) * j.get(i) as i64);
            }
            let (dst, v) = y.apply_theta_power(j, back, &hom.images[back][*w])?;
            debug_assert_eq!(dst, id);
            cols.push(v);
        }
        blocks.push(Mat::from_columns(y.p(), y.dim(id), &cols));
    }
    Ok(ModuleMap { offset: 0, blocks })
}

/// Unit E′ → Hom(X, T): e ↦ the vector (0, e) of T, expressed in the Hom basis.
pub fn unit_map(e: &IndexedModule, t: &Tensor, hom: &HomSpace) -> Result<ModuleMap> {
    let r = e.r();
    let zero = MultiIndex::zeros(r);
    let mut blocks = Vec::with_capacity(e.num_degrees());
    for id in 0..e.num_degrees() {
        let mut cols = Vec::with_capacity(e.dim(id));
        for x in 0..e.dim(id) {
            let mut v = vec![0; t.module.dim(id)];
            let pos = t.position(id, &zero, x).ok_or_else(|| invalid("missing basis vector"))?;
            v[pos] = 1;
            cols.push(
                hom.coordinates(id, &v)
                    .ok_or_else(|| invalid(format!("image of a basis vector in degree {} is not a homomorphism", e.degree(id))))?,
            );
        }
        blocks.push(Mat::from_columns(e.p(), hom.module.dim(id), &cols));
    }
    Ok(ModuleMap { offset: 0, blocks })
}

/// E′ ≅ (A ⊗ E′)^∇ through e ↦ 1 ⊗ e.
pub fn check_invariants_of_induced(e: &IndexedModule) -> Result<()> {
    let t = induce(e)?;
    t.module.validate()?;
    let (inv, basis) = nabla_invariants(&t.module)?;
    let hom = HomSpace { module: inv, images: basis };
    unit_map(e, &t, &hom)?.check_iso(e, &hom.module)
}

/// A ⊗ E^∇ ≅ E through the evaluation map.
pub fn check_induced_of_invariants(e: &IndexedModule) -> Result<()> {
    e.validate()?;
    let (inv, basis) = nabla_invariants(e)?;
    let hom = HomSpace { module: inv.clone(), images: basis };
    let t = induce(&inv)?;
    evaluation_map(&t, &hom, e)?.check_iso(&t.module, e)
}

/// Morita round trips along M = A: M ⊗ Hom(M, F) ≅ F and Hom(M, M ⊗ E) ≅ E.
pub fn check_morita(f: &IndexedModule, e: &IndexedModule) -> Result<()> {
    let m = coefficient_module(f.chart())?;
    m.module.validate()?;
    let hom = hom_from_cyclic(&m, f)?;
    let t = induce(&hom.module)?;
    evaluation_map(&t, &hom, f)?.check_iso(&t.module, f)?;
    let te = induce(e)?;
    let back = hom_from_cyclic(&m, &te.module)?;
    unit_map(e, &te, &back)?.check_iso(e, &back.module)
}

/// End(A) is one-dimensional, in degree 0.
pub fn check_endomorphisms_of_a(chart: Chart) -> Result<()> {
    let m = coefficient_module(chart)?;
    let hom = hom_from_cyclic(&m, &m.module)?;
    let dims = hom.module.dims();
    if dims[0] != 1 || dims.iter().sum::<usize>() != 1 {
        return Err(invalid(format!("End(A) has dimensions {dims:?}")));
    }
    Ok(())
}

/// Monomials θ^a with a ∈ [0,P)^r: the degree-0 generators over B^{(m+1)}.
pub fn a_basis_over_center(chart: Chart) -> Vec<AMonomial> {
    MultiIndex::all_below(chart.r(), chart.ctx().period() as u32)
        .into_iter()
        .map(|a| chart.theta(&a.to_signed()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mindex::LevelContext;

    #[test]
    fn beta_closed_form() {
        for (p, m, r) in [(2, 0, 1), (2, 1, 1), (3, 0, 1), (2, 0, 2)] {
            let chart = Chart::base(LevelContext::new(p, m, r).unwrap());
            assert!(end_iso_triangular_failures(chart).unwrap().is_empty());
            assert!(t1_is_unitriangular(chart));
        }
    }

    #[test]
    fn rank_is_full() {
        for (p, m, r) in [(2, 0, 1), (2, 1, 1), (3, 0, 1), (2, 0, 2)] {
            let chart = Chart::base(LevelContext::new(p, m, r).unwrap());
            let (rank, want) = end_iso_rank(chart, 1).unwrap();
            assert_eq!(rank, want);
        }
    }

    #[test]
    fn end_of_a_is_scalar() {
        let chart = Chart::base(LevelContext::new(3, 1, 1).unwrap());
        check_endomorphisms_of_a(chart).unwrap();
    }

    #[test]
    fn invariants_and_morita() {
        let mut g = crate::corpus::rng(5);
        for (p, m, r) in [(2, 0, 1), (2, 1, 1), (3, 0, 2)] {
            let ctx = LevelContext::new(p, m, r).unwrap();
            let v = crate::corpus::random_graded(ctx, &mut g, 4);
            check_invariants_of_induced(&v).unwrap();
            let e = crate::corpus::random_flat(ctx, &mut g, 4).unwrap();
            check_induced_of_invariants(&e).unwrap();
            check_morita(&e, &v).unwrap();
        }
    }
}
