//! The splitting module K, the Cartier transform it induces, and Frobenius
//! descent.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::chart::Chart;
use crate::error::{invalid, Result};
use crate::fault::Fault;
use crate::jet::PDJet;
use crate::linalg::Mat;
use crate::mindex::{brace, exact, q_of, LevelContext, MultiIndex};
use crate::module::{
    hom_from_cyclic, joint_kernel, multi_binomial, restrict, tensor_with_a, CyclicSource, Fiber, Gen, HomSpace,
    IndexedModule, ModuleMap, Tensor,
};

/// Γ truncated at total degree N: γ^[a]·γ^[b] = C(a+b,a)·γ^[a+b].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GammaTrunc {
    pub p: u32,
    pub r: usize,
    pub n: u32,
    pub fault: Fault,
}

impl GammaTrunc {
    pub fn new(ctx: &LevelContext, n: u32) -> Self {
        GammaTrunc { p: ctx.p(), r: ctx.r(), n, fault: ctx.fault() }
    }

    pub fn basis(&self) -> Vec<MultiIndex> {
        MultiIndex::all_with_total_at_most(self.r, self.n)
    }

    /// Coefficient of γ^[a+b] in γ^[a]·γ^[b]; `None` past the truncation.
    pub fn mul(&self, a: &MultiIndex, b: &MultiIndex) -> Option<(MultiIndex, u32)> {
        let s = a.add(b);
        if s.total() > self.n as u64 {
            return None;
        }
        let mut c = multi_binomial(&s, a, self.p);
        let e1 = MultiIndex::unit(self.r, 0, 1);
        if self.fault == Fault::PerturbGammaProduct && *a == e1 && *b == e1 {
            c = (c + 1) % self.p;
        }
        Some((s, c))
    }
}

/// c_1, …, c_P (index 0 unused): c_k = -C(P,k)·q_k!/p mod p.
pub fn k_constants(ctx: &LevelContext) -> Vec<u32> {
    let period = ctx.period();
    let p = ctx.p();
    let f = ctx.fp();
    let mut out = vec![0u32; period as usize + 1];
    for k in 1..=period {
        let v: BigInt = exact::binomial(period as i64, k) * exact::factorial(q_of(k, ctx)) / BigInt::from(p);
        let a = (v % BigInt::from(p)).to_u32().expect("residue fits");
        out[k as usize] = f.neg(a);
    }
    out
}

fn flip_top(ctx: &LevelContext, constants: &mut [u32]) {
    let top = constants.len() - 1;
    constants[top] = if ctx.p() == 2 { (constants[top] + 1) % 2 } else { ctx.fp().neg(constants[top]) };
}

/// K with basis σ^b (|b| ≤ N) and its dual Ǩ in the basis e′_b = (-1)^{|b|}e_b.
#[derive(Clone, Debug)]
pub struct KModule {
    pub ctx: LevelContext,
    pub n: u32,
    /// Global sign applied to the constants -C(P,k)q_k!/p.
    pub sign: i32,
    pub basis: Vec<MultiIndex>,
    pub constants: Vec<u32>,
    /// ∂_{<tε_c>} on K, for 0 ≤ t ≤ p^{m+1}.
    pub d: BTreeMap<(usize, u64), Mat>,
    /// ∂_{<tε_c>} on Ǩ.
    pub dual: BTreeMap<(usize, u64), Mat>,
    /// γ^[a] on Ǩ for 0 < |a| ≤ N.
    pub higgs: BTreeMap<MultiIndex, Mat>,
}

impl KModule {
    /// Builds K for both global signs of the constants and keeps the one whose
    /// top operators satisfy [`KModule::check_curvature_forms`].
    pub fn build(ctx: LevelContext, n: u32) -> Result<KModule> {
        let base = k_constants(&ctx);
        let f = ctx.fp();
        let mut last = None;
        for sign in [1i32, -1] {
            let constants: Vec<u32> = base.iter().map(|&c| if sign == 1 { c } else { f.neg(c) }).collect();
            let k = Self::build_with(ctx, n, constants, sign)?;
            match k.check_curvature_forms() {
                Ok(()) if ctx.fault() == Fault::FlipKConstant => {
                    let mut constants = k.constants;
                    flip_top(&ctx, &mut constants);
                    return Self::build_with(ctx, n, constants, sign);
                }
                Ok(()) => return Ok(k),
                Err(e) => last = Some(e),
            }
            if ctx.p() == 2 {
                break;
            }
        }
        Err(last.expect("at least one attempt"))
    }

    /// K for explicit constants c_1..c_P (index 0 unused), without checks.
    pub fn build_with(ctx: LevelContext, n: u32, constants: Vec<u32>, sign: i32) -> Result<KModule> {
        let r = ctx.r();
        let p = ctx.p();
        let f = ctx.fp();
        let period = ctx.period();
        let basis = MultiIndex::all_with_total_at_most(r, n);
        let pos: BTreeMap<MultiIndex, usize> = basis.iter().cloned().enumerate().map(|(i, b)| (b, i)).collect();
        let dim = basis.len();
        let line = Chart::base(ctx.with_r(1));
        let mut series = PDJet::zero(line, period as u32);
        for (k, c) in constants.iter().enumerate().skip(1) {
            let term = PDJet::eta_pd(line, period as u32, &MultiIndex::new(&[k as u32])).scale(*c);
            series = series.add(&term)?;
        }
        // powers[s][t] = η^{{t}}-coefficient of c(η)^s
        let mut powers = Vec::with_capacity(n as usize + 1);
        let mut cur = PDJet::one(line, period as u32);
        for _ in 0..=n {
            let row: Vec<u32> = (0..=period)
                .map(|t| {
                    let coef = cur.coefficient(&MultiIndex::new(&[t as u32]));
                    coef.coeff(&crate::chart::AMonomial::one(1))
                })
                .collect();
            powers.push(row);
            cur = cur.mul(&series)?;
        }
        let mut d = BTreeMap::new();
        for c in 0..r {
            for t in 0..=period {
                let mut m = Mat::zeros(p, dim, dim);
                for (col, b) in basis.iter().enumerate() {
                    for s in 0..=b.get(c) {
                        let w = powers[s as usize][t as usize];
                        if w == 0 {
                            continue;
                        }
                        let mut target = b.clone();
                        target.set(c, b.get(c) - s);
                        let bin = crate::mindex::binom_mod_p(b.get(c) as i64, s as u64, p);
                        m.add_at(pos[&target], col, f.mul(bin, w));
                    }
                }
                d.insert((c, t), m);
            }
        }
        let conj = Mat::from_rows(
            p,
            &basis
                .iter()
                .enumerate()
                .map(|(i, b)| {
                    let mut row = vec![0; dim];
                    row[i] = if b.total() % 2 == 1 { f.neg(1) } else { 1 % p };
                    row
                })
                .collect::<Vec<_>>(),
        );
        let mut dual = BTreeMap::new();
        for c in 0..r {
            let mut transposed: Vec<Mat> = vec![Mat::identity(p, dim)];
            for t in 1..=period {
                let mut acc = Mat::zeros(p, dim, dim);
                for i in 1..=t {
                    let w = brace(t, i, &ctx)?;
                    if w != 0 {
                        acc = acc.add(&transposed[(t - i) as usize].mul(&d[&(c, i)]).scale(w));
                    }
                }
                transposed.push(acc.neg());
            }
            for (t, tr) in transposed.iter().enumerate() {
                dual.insert((c, t as u64), conj.mul(&tr.transpose()).mul(&conj));
            }
        }
        let gamma = GammaTrunc::new(&ctx, n);
        let mut higgs = BTreeMap::new();
        for a in basis.iter().filter(|a| !a.is_zero()) {
            let mut m = Mat::zeros(p, dim, dim);
            for (col, b) in basis.iter().enumerate() {
                if let Some((s, c)) = gamma.mul(a, b) {
                    m.add_at(pos[&s], col, c);
                }
            }
            higgs.insert(a.clone(), m);
        }
        Ok(KModule { ctx, n, sign, basis, constants, d, dual, higgs })
    }

    /// Checks that ∂_{<p^{m+1}ε_c>} is ∂/∂σ_c on K and γ^[ε_c] on Ǩ.
    pub fn check_curvature_forms(&self) -> Result<()> {
        let p = self.ctx.p();
        let period = self.ctx.period();
        let dim = self.basis.len();
        let pos: BTreeMap<&MultiIndex, usize> = self.basis.iter().enumerate().map(|(i, b)| (b, i)).collect();
        for c in 0..self.ctx.r() {
            let mut deriv = Mat::zeros(p, dim, dim);
            for (col, b) in self.basis.iter().enumerate() {
                if b.get(c) > 0 {
                    let mut t = b.clone();
                    t.set(c, b.get(c) - 1);
                    deriv.add_at(pos[&t], col, b.get(c) % p);
                }
            }
            if self.d[&(c, period)] != deriv {
                return Err(invalid(format!("top operator on K in coordinate {c} is not the σ-derivative")));
            }
            let e = MultiIndex::unit(self.ctx.r(), c, 1);
            if self.n > 0 && self.dual[&(c, period)] != self.higgs[&e] {
                return Err(invalid(format!("top operator on the dual in coordinate {c} is not gamma{e}")));
            }
        }
        Ok(())
    }

    /// Ǩ as a tensor fiber on a frame with `num_degrees` degrees, concentrated in degree 0.
    pub fn fiber(&self, num_degrees: usize) -> Fiber {
        let dim = self.basis.len();
        let mut dims = vec![0; num_degrees];
        dims[0] = dim;
        let p = self.ctx.p();
        let spread = |m: &Mat| -> Vec<Mat> {
            (0..num_degrees).map(|id| if id == 0 { m.clone() } else { Mat::zeros(p, 0, 0) }).collect()
        };
        let d = self.dual.iter().filter(|((_, t), _)| *t > 0).map(|(k, m)| (*k, spread(m))).collect();
        let higgs = self.higgs.iter().map(|(k, m)| (k.clone(), spread(m))).collect();
        Fiber { dims, d, higgs_order: Some(self.n), higgs }
    }
}

/// Ǩ^A on the frame (ctx, step) as a cyclic source on e′_0.
pub fn k_tensor(ctx: LevelContext, step: u64, n: u32) -> Result<(KModule, Tensor, CyclicSource)> {
    let k = KModule::build(ctx, n)?;
    let num = ((step * ctx.period()) as usize).pow(ctx.r() as u32);
    let t = tensor_with_a(ctx, step, &k.fiber(num))?;
    let words = t
        .basis
        .iter()
        .map(|v| v.iter().map(|(j, w)| (j.clone(), k.basis[*w].clone())).collect())
        .collect();
    let src = CyclicSource { module: t.module.clone(), words };
    Ok((k, t, src))
}

/// Ǩ^A on the base chart.
pub fn k_a(ctx: LevelContext, n: u32) -> Result<(KModule, Tensor, CyclicSource)> {
    k_tensor(ctx, 1, n)
}

/// Ǩ^{(0),B}: the level-0 construction on the Frobenius target.
pub fn k0_b(ctx: LevelContext, n: u32) -> Result<(KModule, Tensor, CyclicSource)> {
    k_tensor(ctx.at_level(0)?, ctx.pm(), n)
}

/// F_p-rank of ⊕_e (θ^d ∂_{<b>} γ̃^[c]) applied to θ^e ⊗ e′_0, per degree d, against n·dim R_N.
pub fn splitting_ranks(ctx: LevelContext, n: u32) -> Result<Vec<(usize, usize)>> {
    let (k, t, _) = k_a(ctx, n)?;
    let module = &t.module;
    module.validate()?;
    let r = ctx.r();
    let grid = MultiIndex::all_below(r, ctx.period() as u32);
    let zero_b = 0usize;
    let mut der = module.derived();
    let mut out = Vec::new();
    for d in &grid {
        let mut columns: Vec<Vec<u32>> = Vec::new();
        for b in &grid {
            for c in &k.basis {
                let mut col = Vec::new();
                for e in &grid {
                    let eid = module.degree_id(e);
                    let mut v = vec![0u32; module.dim(eid)];
                    v[t.position(eid, e, zero_b).ok_or_else(|| invalid("missing generator"))?] = 1;
                    let v = module.apply_higgs(c, eid, &v)?;
                    let v = der.multi(b, eid)?.apply(&v);
                    let (_, v) = module.apply_theta_power(d, eid, &v)?;
                    col.extend(v);
                }
                columns.push(col);
            }
        }
        let rows = columns.first().map_or(0, |c| c.len());
        let m = Mat::from_columns(ctx.p(), rows, &columns);
        out.push((m.rank(), grid.len() * k.basis.len()));
    }
    Ok(out)
}

/// C(E) = Hom(Ǩ^A, E).
pub fn cartier_transform(e: &IndexedModule, n: u32) -> Result<HomSpace> {
    let (_, _, src) = k_a(*e.ctx(), n)?;
    hom_from_cyclic(&src, e)
}

/// C^{-1}(E′) = Ǩ^A ⊗_R E′.
pub fn inverse_cartier(e: &IndexedModule, n: u32) -> Result<Tensor> {
    let ctx = *e.ctx();
    let k = KModule::build(ctx, n)?;
    twisted_tensor(ctx, e.step(), &k, e)
}

/// A ⊗ W with W = Ǩ ⊗_R E′ ≅ E′ and ∂_{<t>} acting as Σ_b [∂_{<t>} e′_0]_b γ^[b].
fn twisted_tensor(ctx: LevelContext, step: u64, k: &KModule, e: &IndexedModule) -> Result<Tensor> {
    let p = ctx.p();
    let mut d = BTreeMap::new();
    for ((c, t), m) in &k.dual {
        if *t == 0 {
            continue;
        }
        let mut mats = Vec::with_capacity(e.num_degrees());
        for id in 0..e.num_degrees() {
            let mut acc = Mat::zeros(p, e.dim(id), e.dim(id));
            for (row, b) in k.basis.iter().enumerate() {
                let w = m.get(row, 0);
                if w == 0 {
                    continue;
                }
                let h = if b.is_zero() {
                    Mat::identity(p, e.dim(id))
                } else {
                    e.op(&Gen::Higgs(b.clone()))
                        .map(|v| v[id].clone())
                        .unwrap_or_else(|| Mat::zeros(p, e.dim(id), e.dim(id)))
                };
                acc = acc.add(&h.scale(w));
            }
            mats.push(acc);
        }
        d.insert((*c, *t), mats);
    }
    let mut fiber = Fiber::trivial(e);
    fiber.d = d;
    fiber.higgs_order = Some(k.n);
    for b in k.higgs.keys() {
        fiber.higgs.entry(b.clone()).or_insert_with(|| {
            (0..e.num_degrees()).map(|id| Mat::zeros(p, e.dim(id), e.dim(id))).collect()
        });
    }
    tensor_with_a(ctx, step, &fiber)
}

/// E′ ≅ C(C^{-1}(E′)).
pub fn check_transform_of_inverse(e: &IndexedModule, n: u32) -> Result<()> {
    let t = inverse_cartier(e, n)?;
    t.module.validate()?;
    let hom = cartier_transform(&t.module, n)?;
    crate::azumaya::unit_map(e, &t, &hom)?.check_iso(e, &hom.module)
}

/// C^{-1}(C(E)) ≅ E through the evaluation map.
pub fn check_inverse_of_transform(e: &IndexedModule, n: u32) -> Result<()> {
    e.validate()?;
    let hom = cartier_transform(e, n)?;
    let k = KModule::build(*e.ctx(), n)?;
    let t = twisted_tensor(*e.ctx(), e.step(), &k, &hom.module)?;
    crate::azumaya::evaluation_map(&t, &hom, e)?.check_iso(&t.module, e)
}

/// F(E): joint kernel of ∂_{<p^s ε_i>} (s < m) with θ′ = θ^{p^m}, ∂′ = ∂_{<p^m>}.
pub fn frobenius_descend(e: &IndexedModule) -> Result<(IndexedModule, Vec<Vec<Vec<u32>>>)> {
    let ctx = *e.ctx();
    if e.step() != 1 {
        return Err(invalid("Frobenius descent starts on the base chart"));
    }
    let m = ctx.m();
    let gens: Vec<Gen> = (0..ctx.r()).flat_map(|i| (0..m).map(move |s| Gen::D { s, i })).collect();
    let basis = joint_kernel(e, &gens)?;
    let ctx0 = ctx.at_level(0)?;
    let pm = ctx.pm();
    let dims: Vec<usize> = basis.iter().map(|b| b.len()).collect();
    let mut out = IndexedModule::new(ctx0, pm, dims);
    let p = ctx.p();
    let n_deg = e.num_degrees();
    for i in 0..ctx.r() {
        let th = e.op(&Gen::Theta(i)).ok_or_else(|| invalid("module has no theta action"))?;
        let mut mats = Vec::with_capacity(n_deg);
        for id in 0..n_deg {
            let mut acc = Mat::identity(p, e.dim(id));
            let mut cur = id;
            for _ in 0..pm {
                acc = th[cur].mul(&acc);
                cur = e.gen_target(&Gen::Theta(i), cur);
            }
            mats.push(restrict(p, &acc, &basis[id], &basis[cur], e.dim(cur))?);
        }
        out.set_op(Gen::Theta(i), mats);
        if let Some(u) = e.op(&Gen::U(i)) {
            let mats = (0..n_deg)
                .map(|id| restrict(p, &u[id], &basis[id], &basis[id], e.dim(id)))
                .collect::<Result<Vec<_>>>()?;
            out.set_op(Gen::U(i), mats);
        }
    }
    let mut der = e.derived();
    for i in 0..ctx.r() {
        let mut mats = Vec::with_capacity(n_deg);
        for id in 0..n_deg {
            let dm = der.scalar(i, pm, id)?;
            mats.push(restrict(p, &dm, &basis[id], &basis[id], e.dim(id))?);
        }
        out.set_op(Gen::D { s: 0, i }, mats);
    }
    if e.higgs_order().is_some() {
        out.set_higgs_order(e.higgs_order());
        for b in e.higgs_indices() {
            let g = Gen::Higgs(b);
            let h = e.op(&g).expect("validated");
            let mats = (0..n_deg)
                .map(|id| restrict(p, &h[id], &basis[id], &basis[id], e.dim(id)))
                .collect::<Result<Vec<_>>>()?;
            out.set_op(g, mats);
        }
    }
    Ok((out, basis))
}

/// G(F) = A ⊗_{B^{(m)}} F with basis (j ∈ [0,p^m)^r, f ∈ F_{d-j}).
pub fn frobenius_ascend(fm: &IndexedModule) -> Result<Tensor> {
    let ctx0 = *fm.ctx();
    let pm = fm.step();
    let mut m = 0u32;
    while (ctx0.p() as u64).pow(m) < pm {
        m += 1;
    }
    let ctx = ctx0.at_level(m)?;
    let p = ctx.p();
    let r = ctx.r();
    let shell = IndexedModule::new(ctx, 1, vec![0; fm.num_degrees()]);
    let n_deg = shell.num_degrees();
    let js = MultiIndex::all_below(r, pm as u32);
    let source_degree = |id: usize, j: &MultiIndex| {
        let mut cur = id;
        for i in 0..r {
            cur = shell.shift(cur, i, -(j.get(i) as i64));
        }
        cur
    };
    let mut basis: Vec<Vec<(MultiIndex, usize)>> = vec![Vec::new(); n_deg];
    for (id, slot) in basis.iter_mut().enumerate() {
        for j in &js {
            for x in 0..fm.dim(source_degree(id, j)) {
                slot.push((j.clone(), x));
            }
        }
    }
    let dims: Vec<usize> = basis.iter().map(|b| b.len()).collect();
    let mut module = IndexedModule::new(ctx, 1, dims);
    let t0 = Tensor { module: module.clone(), basis: basis.clone() };
    for i in 0..r {
        let th = fm.op(&Gen::Theta(i)).ok_or_else(|| invalid("module has no theta action"))?;
        let mut mats = Vec::with_capacity(n_deg);
        for id in 0..n_deg {
            let tgt = module.shift(id, i, 1);
            let mut mat = Mat::zeros(p, module.dim(tgt), module.dim(id));
            for (col, (j, x)) in basis[id].iter().enumerate() {
                let mut jj = j.clone();
                if j.get(i) + 1 < pm as u32 {
                    jj.set(i, j.get(i) + 1);
                    mat.set(t0.position(tgt, &jj, *x).expect("basis vector"), col, 1);
                } else {
                    jj.set(i, 0);
                    let fid = source_degree(id, j);
                    let block = &th[fid];
                    for y in 0..block.rows() {
                        let v = block.get(y, *x);
                        if v != 0 {
                            mat.add_at(t0.position(tgt, &jj, y).expect("basis vector"), col, v);
                        }
                    }
                }
            }
            mats.push(mat);
        }
        module.set_op(Gen::Theta(i), mats);
        module.set_op(Gen::U(i), (0..n_deg).map(|id| Mat::zeros(p, module.dim(id), module.dim(id))).collect());
    }
    let chart = Chart::base(ctx);
    for c in 0..r {
        for s in 0..=m {
            let mut mats = Vec::with_capacity(n_deg);
            for id in 0..n_deg {
                let mut mat = Mat::zeros(p, module.dim(id), module.dim(id));
                for (col, (j, x)) in basis[id].iter().enumerate() {
                    if s < m {
                        mat.add_at(col, col, chart.lambda((p as u64).pow(s), j.get(c) as i64));
                    } else {
                        let fid = source_degree(id, j);
                        let block = &fm.op(&Gen::D { s: 0, i: c }).ok_or_else(|| invalid("missing d'"))?[fid];
                        for y in 0..block.rows() {
                            let v = block.get(y, *x);
                            if v != 0 {
                                mat.add_at(t0.position(id, j, y).expect("basis vector"), col, v);
                            }
                        }
                    }
                }
                mats.push(mat);
            }
            module.set_op(Gen::D { s, i: c }, mats);
        }
    }
    if fm.higgs_order().is_some() {
        module.set_higgs_order(fm.higgs_order());
        for b in fm.higgs_indices() {
            let h = &fm.op(&Gen::Higgs(b.clone())).expect("validated");
            let mut mats = Vec::with_capacity(n_deg);
            for id in 0..n_deg {
                let mut mat = Mat::zeros(p, module.dim(id), module.dim(id));
                for (col, (j, x)) in basis[id].iter().enumerate() {
                    let block = &h[source_degree(id, j)];
                    for y in 0..block.rows() {
                        let v = block.get(y, *x);
                        if v != 0 {
                            mat.add_at(t0.position(id, j, y).expect("basis vector"), col, v);
                        }
                    }
                }
                mats.push(mat);
            }
            module.set_op(Gen::Higgs(b), mats);
        }
    }
    Ok(Tensor { module, basis })
}

/// F ≅ F(G(F)) through f ↦ 1 ⊗ f.
pub fn check_descend_of_ascend(fm: &IndexedModule) -> Result<()> {
    fm.validate()?;
    let g = frobenius_ascend(fm)?;
    g.module.validate()?;
    let (back, basis) = frobenius_descend(&g.module)?;
    back.validate()?;
    let zero = MultiIndex::zeros(fm.r());
    let mut blocks = Vec::with_capacity(fm.num_degrees());
    for id in 0..fm.num_degrees() {
        let amb = Mat::from_columns(fm.p(), g.module.dim(id), &basis[id]);
        let mut cols = Vec::new();
        for x in 0..fm.dim(id) {
            let mut v = vec![0; g.module.dim(id)];
            v[g.position(id, &zero, x).expect("basis vector")] = 1;
            cols.push(amb.solve(&v).ok_or_else(|| invalid("1 ⊗ f is not horizontal"))?);
        }
        blocks.push(Mat::from_columns(fm.p(), back.dim(id), &cols));
    }
    ModuleMap { offset: 0, blocks }.check_iso(fm, &back)
}

/// G(F(E)) ≅ E through θ^j ⊗ f ↦ θ^j f.
pub fn check_ascend_of_descend(e: &IndexedModule) -> Result<()> {
    e.validate()?;
    let (fm, basis) = frobenius_descend(e)?;
    fm.validate()?;
    let g = frobenius_ascend(&fm)?;
    let r = e.r();
    let mut blocks = Vec::with_capacity(e.num_degrees());
    for id in 0..e.num_degrees() {
        let mut cols = Vec::new();
        for (j, x) in &g.basis[id] {
            let mut src = id;
            for i in 0..r {
                src = e.shift(src, i, -(j.get(i) as i64));
            }
            let (_, v) = e.apply_theta_power(j, src, &basis[src][*x])?;
            cols.push(v);
        }
        blocks.push(Mat::from_columns(e.p(), e.dim(id), &cols));
    }
    ModuleMap { offset: 0, blocks }.check_iso(&g.module, e)
}

/// An isomorphism Ǩ^{(0),B} → F(Ǩ^A): its degree and the image of e′_0 in F(Ǩ^A).
pub fn frobenius_of_k(ctx: LevelContext, n: u32) -> Result<(usize, Vec<u32>, IndexedModule, Vec<Vec<Vec<u32>>>)> {
    let (_, ka, _) = k_a(ctx, n)?;
    let (fk, fbasis) = frobenius_descend(&ka.module)?;
    fk.validate()?;
    let (_, _, src) = k0_b(ctx, n)?;
    src.module.validate()?;
    let hom = hom_from_cyclic(&src, &fk)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
    for d in 0..fk.num_degrees() {
        let gens = &hom.images[d];
        if gens.is_empty() {
            continue;
        }
        let mut candidates: Vec<Vec<u32>> = gens.clone();
        for _ in 0..8 {
            let mut y = vec![0u32; fk.dim(d)];
            for g in gens {
                let c = rng.gen_range(0..ctx.p());
                for (a, b) in y.iter_mut().zip(g) {
                    *a = (*a + c * b) % ctx.p();
                }
            }
            candidates.push(y);
        }
        for y in candidates {
            let map = cyclic_map(&src, &fk, d, &y)?;
            if map.check_iso(&src.module, &fk).is_ok() {
                return Ok((d, y, fk, fbasis));
            }
        }
    }
    Err(invalid("no isomorphism between the level-0 splitting module and the descent of the level-m one"))
}

/// Blocks of f_y: X → Y for y ∈ Y_d.
pub fn cyclic_map(src: &CyclicSource, y: &IndexedModule, d: usize, yv: &[u32]) -> Result<ModuleMap> {
    let x = &src.module;
    let mut blocks = Vec::with_capacity(x.num_degrees());
    for xid in 0..x.num_degrees() {
        let cols = (0..x.dim(xid))
            .map(|c| Ok(src.word_matrix(y, d, xid, c)?.apply(yv)))
            .collect::<Result<Vec<_>>>()?;
        blocks.push(Mat::from_columns(y.p(), y.dim(y.add_degrees(d, xid)), &cols));
    }
    Ok(ModuleMap { offset: d, blocks })
}

/// C(E) ≅ C^{(0)}(F(E)) via y ↦ f_y ∘ ι.
pub fn check_compatibility(e: &IndexedModule, n: u32) -> Result<()> {
    let ctx = *e.ctx();
    e.validate()?;
    let (d_iota, z, _, k_fbasis) = frobenius_of_k(ctx, n)?;
    let (_, ka, src) = k_a(ctx, n)?;
    let ambient = Mat::from_columns(ctx.p(), ka.module.dim(d_iota), &k_fbasis[d_iota]).apply(&z);
    let c = hom_from_cyclic(&src, e)?;
    let (fe, fe_basis) = frobenius_descend(e)?;
    fe.validate()?;
    let (_, _, src0) = k0_b(ctx, n)?;
    let c0 = hom_from_cyclic(&src0, &fe)?;
    let mut blocks = Vec::with_capacity(e.num_degrees());
    for d in 0..e.num_degrees() {
        let t = e.add_degrees(d, d_iota);
        let fe_amb = Mat::from_columns(ctx.p(), e.dim(t), &fe_basis[t]);
        let mut cols = Vec::new();
        for y in &c.images[d] {
            let (_, img) = src.eval(e, d, y, d_iota, &ambient)?;
            let in_fe = fe_amb.solve(&img).ok_or_else(|| invalid("f_y∘ι leaves F(E)"))?;
            cols.push(c0.coordinates(t, &in_fe).ok_or_else(|| invalid("f_y∘ι is not a homomorphism"))?);
        }
        blocks.push(Mat::from_columns(ctx.p(), c0.module.dim(t), &cols));
    }
    ModuleMap { offset: d_iota, blocks }.check_iso(&c.module, &c0.module)
}

/// JSON form of Ǩ^A: basis labels and full action tables.
#[derive(Clone, Debug, Serialize)]
pub struct KExport {
    pub ctx: ExportCtx,
    #[serde(rename = "N")]
    pub n: u32,
    pub sign: i32,
    pub c: Vec<u32>,
    pub basis: Vec<String>,
    pub ops: BTreeMap<String, Vec<Vec<u32>>>,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ExportCtx {
    pub p: u32,
    pub m: u32,
    pub r: usize,
}

pub fn export_k(ctx: LevelContext, n: u32) -> Result<KExport> {
    let (k, t, _) = k_a(ctx, n)?;
    let module = &t.module;
    let mut offsets = Vec::with_capacity(module.num_degrees());
    let mut basis = Vec::new();
    let mut total = 0;
    for id in 0..module.num_degrees() {
        offsets.push(total);
        total += module.dim(id);
        for (j, w) in &t.basis[id] {
            basis.push(format!("th^{j}*g{}", k.basis[*w]));
        }
    }
    let assemble = |blocks: &dyn Fn(usize) -> Result<Mat>| -> Result<Vec<Vec<u32>>> {
        let mut full = vec![vec![0u32; total]; total];
        for id in 0..module.num_degrees() {
            let b = blocks(id)?;
            for x in 0..b.rows() {
                for y in 0..b.cols() {
                    full[offsets[id] + x][offsets[id] + y] = b.get(x, y);
                }
            }
        }
        Ok(full)
    };
    let mut ops = BTreeMap::new();
    let der = std::cell::RefCell::new(module.derived());
    for kk in MultiIndex::all_with_total_at_most(ctx.r(), ctx.period() as u32) {
        let table = assemble(&|id| der.borrow_mut().multi(&kk, id))?;
        ops.insert(format!("d{kk}"), table);
    }
    for b in module.higgs_indices() {
        let h = module.op(&Gen::Higgs(b.clone())).expect("built");
        ops.insert(format!("gamma{b}"), assemble(&|id| Ok(h[id].clone()))?);
    }
    let sign = k.sign;
    Ok(KExport {
        ctx: ExportCtx { p: ctx.p(), m: ctx.m(), r: ctx.r() },
        n,
        sign,
        c: k.constants[1..].to_vec(),
        basis,
        ops,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_small() {
        let ctx = LevelContext::new(3, 0, 1).unwrap();
        assert_eq!(k_constants(&ctx)[1..], [2, 1, 1]);
        for (p, m) in [(2, 0), (2, 1), (3, 1), (5, 0), (2, 2)] {
            let ctx = LevelContext::new(p, m, 1).unwrap();
            assert_eq!(*k_constants(&ctx).last().unwrap(), 1);
        }
    }

    #[test]
    fn k_modules_are_consistent() {
        for (p, m, r) in [(2, 0, 1), (2, 1, 1), (3, 0, 1), (2, 0, 2), (3, 1, 1)] {
            let ctx = LevelContext::new(p, m, r).unwrap();
            let (k, t, _) = k_a(ctx, 2).unwrap();
            k.check_curvature_forms().unwrap();
            t.module.validate().unwrap();
            let (_, t0, _) = k0_b(ctx, 2).unwrap();
            t0.module.validate().unwrap();
        }
    }

    #[test]
    fn flipped_constant_is_caught() {
        let ctx = LevelContext::new(3, 0, 1).unwrap().with_fault(Fault::FlipKConstant);
        let k = KModule::build(ctx, 2).unwrap();
        assert!(k.check_curvature_forms().is_err());
    }

    #[test]
    fn splitting_full_rank() {
        let ctx = LevelContext::new(2, 1, 1).unwrap();
        for (rank, want) in splitting_ranks(ctx, 2).unwrap() {
            assert_eq!(rank, want);
        }
    }

    #[test]
    fn frobenius_of_k_exists() {
        let ctx = LevelContext::new(2, 1, 1).unwrap();
        frobenius_of_k(ctx, 2).unwrap();
    }

    #[test]
    fn round_trips_on_random_modules() {
        let mut g = crate::corpus::rng(3);
        for (p, m, r) in [(2, 0, 1), (2, 1, 1), (3, 0, 1), (2, 0, 2)] {
            let ctx = LevelContext::new(p, m, r).unwrap();
            for _ in 0..2 {
                let e = crate::corpus::random_higgs(ctx, 2, &mut g, 4);
                check_transform_of_inverse(&e, 2).unwrap();
                let mic = crate::corpus::random_mic(ctx, 2, &mut g, 4).unwrap();
                check_inverse_of_transform(&mic, 2).unwrap();
                check_ascend_of_descend(&mic).unwrap();
                check_compatibility(&mic, 2).unwrap();
                let f = crate::corpus::random_target(ctx, &mut g, 3).unwrap();
                check_descend_of_ascend(&f).unwrap();
            }
        }
    }
}
