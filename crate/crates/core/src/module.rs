//! Finite graded modules at the log point, given by action tables.
//!
//! Degrees live in (Z/P)^r with P = p^{m+1} of the base chart; θ_i moves a
//! degree by `step`·ε_i, where `step` is 1 on the base chart and p^m on the
//! Frobenius target.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;

use crate::chart::Chart;
use crate::error::{invalid, Result};
use crate::linalg::Mat;
use crate::mindex::{angle, binom_mod_p, brace, mul_coeff, LevelContext, MultiIndex};

/// Action generators.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Gen {
    Theta(usize),
    U(usize),
    /// ∂_{<p^s ε_i>}.
    D { s: u32, i: usize },
    /// Divided-power Higgs field γ^[b].
    Higgs(MultiIndex),
}

impl std::fmt::Display for Gen {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Gen::Theta(i) => write!(f, "theta_{i}"),
            Gen::U(i) => write!(f, "u_{i}"),
            Gen::D { s, i } => write!(f, "d[p^{s} e_{i}]"),
            Gen::Higgs(b) => write!(f, "gamma{b}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexedModule {
    ctx: LevelContext,
    step: u64,
    higgs_order: Option<u32>,
    dims: Vec<usize>,
    ops: BTreeMap<Gen, Vec<Mat>>,
}

impl IndexedModule {
    /// Module with the given per-degree dimensions and no actions.
    pub fn new(ctx: LevelContext, step: u64, dims: Vec<usize>) -> Self {
        let m = IndexedModule { ctx, step, higgs_order: None, dims, ops: BTreeMap::new() };
        assert_eq!(m.dims.len(), m.num_degrees(), "one dimension per degree");
        m
    }

    /// Empty module on the base chart of `ctx`.
    pub fn empty_base(ctx: LevelContext) -> Self {
        let n = (ctx.period() as usize).pow(ctx.r() as u32);
        Self::new(ctx, 1, vec![0; n])
    }

    pub fn ctx(&self) -> &LevelContext {
        &self.ctx
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn chart(&self) -> Chart {
        if self.step == 1 {
            Chart::base(self.ctx)
        } else {
            let m = (self.step as f64).log(self.ctx.p() as f64).round() as u32;
            Chart::frobenius_target(self.ctx.at_level(m).expect("step encodes a supported level"))
        }
    }

    pub fn r(&self) -> usize {
        self.ctx.r()
    }

    pub fn p(&self) -> u32 {
        self.ctx.p()
    }

    /// P = step·p^{level+1}.
    pub fn period(&self) -> u64 {
        self.step * self.ctx.period()
    }

    pub fn num_degrees(&self) -> usize {
        (self.period() as usize).pow(self.r() as u32)
    }

    pub fn degree(&self, id: usize) -> MultiIndex {
        let p = self.period() as usize;
        let mut rest = id;
        let mut out = Vec::with_capacity(self.r());
        for _ in 0..self.r() {
            out.push((rest % p) as u32);
            rest /= p;
        }
        MultiIndex::new(&out)
    }

    pub fn degree_id(&self, d: &MultiIndex) -> usize {
        let p = self.period();
        let mut id = 0usize;
        for i in (0..self.r()).rev() {
            id = id * p as usize + (d.get(i) as u64 % p) as usize;
        }
        id
    }

    /// id of d + by·ε_i.
    pub fn shift(&self, id: usize, i: usize, by: i64) -> usize {
        let p = self.period() as i64;
        let mut d = self.degree(id);
        d.set(i, (d.get(i) as i64 + by).rem_euclid(p) as u32);
        self.degree_id(&d)
    }

    pub fn add_degrees(&self, a: usize, b: usize) -> usize {
        let (da, db) = (self.degree(a), self.degree(b));
        self.degree_id(&da.add(&db))
    }

    pub fn dim(&self, id: usize) -> usize {
        self.dims[id]
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().sum()
    }

    pub fn higgs_order(&self) -> Option<u32> {
        self.higgs_order
    }

    pub fn set_higgs_order(&mut self, n: Option<u32>) {
        self.higgs_order = n;
    }

    pub fn set_op(&mut self, g: Gen, mats: Vec<Mat>) {
        assert_eq!(mats.len(), self.num_degrees(), "one block per degree");
        self.ops.insert(g, mats);
    }

    pub fn op(&self, g: &Gen) -> Option<&Vec<Mat>> {
        self.ops.get(g)
    }

    pub fn gens(&self) -> impl Iterator<Item = &Gen> {
        self.ops.keys()
    }

    pub fn has_theta(&self) -> bool {
        self.ops.contains_key(&Gen::Theta(0))
    }

    pub fn has_d(&self) -> bool {
        self.ops.contains_key(&Gen::D { s: 0, i: 0 })
    }

    /// Target degree of a generator applied in degree `id`.
    pub fn gen_target(&self, g: &Gen, id: usize) -> usize {
        match g {
            Gen::Theta(i) => self.shift(id, *i, self.step as i64),
            _ => id,
        }
    }

    pub fn d_gens(&self) -> Vec<Gen> {
        let mut out = Vec::new();
        for i in 0..self.r() {
            for s in 0..=self.ctx.m() {
                out.push(Gen::D { s, i });
            }
        }
        out
    }

    pub fn higgs_indices(&self) -> Vec<MultiIndex> {
        match self.higgs_order {
            None => Vec::new(),
            Some(n) => MultiIndex::all_with_total_at_most(self.r(), n)
                .into_iter()
                .filter(|b| !b.is_zero())
                .collect(),
        }
    }

    /// θ^j applied to v ∈ M_id (j counts θ-generator steps).
    pub fn apply_theta_power(&self, j: &MultiIndex, id: usize, v: &[u32]) -> Result<(usize, Vec<u32>)> {
        let mut cur = id;
        let mut vec = v.to_vec();
        for i in 0..self.r() {
            let th = self.op(&Gen::Theta(i)).ok_or_else(|| invalid("module has no theta action"))?;
            for _ in 0..j.get(i) {
                vec = th[cur].apply(&vec);
                cur = self.gen_target(&Gen::Theta(i), cur);
            }
        }
        Ok((cur, vec))
    }

    /// Applies a Higgs generator (identity for b = 0).
    pub fn apply_higgs(&self, b: &MultiIndex, id: usize, v: &[u32]) -> Result<Vec<u32>> {
        if b.is_zero() {
            return Ok(v.to_vec());
        }
        let h = self.op(&Gen::Higgs(b.clone())).ok_or_else(|| invalid(format!("no Higgs action for {b}")))?;
        Ok(h[id].apply(v))
    }

    /// Replaces every block by P_target·g·P_source^{-1} for random invertible P per degree.
    pub fn disguise<R: Rng>(&self, rng: &mut R) -> (IndexedModule, ModuleMap) {
        let p = self.p();
        let changes: Vec<Mat> = self.dims.iter().map(|&n| random_invertible(p, n, rng)).collect();
        let inverses: Vec<Mat> = changes.iter().map(|m| m.inverse().expect("invertible")).collect();
        let mut out = self.clone();
        for (g, mats) in &self.ops {
            let new: Vec<Mat> = mats
                .iter()
                .enumerate()
                .map(|(id, m)| changes[self.gen_target(g, id)].mul(m).mul(&inverses[id]))
                .collect();
            out.ops.insert(g.clone(), new);
        }
        (out, ModuleMap { offset: 0, blocks: changes })
    }

    /// Derived-operator evaluator with memoization.
    pub fn derived(&self) -> Derived<'_> {
        Derived { module: self, cache: HashMap::new() }
    }

    /// Checks every defining relation; the error names the first violated one.
    pub fn validate(&self) -> Result<()> {
        let p = self.p();
        let ctx = self.ctx;
        for (g, mats) in &self.ops {
            for (id, m) in mats.iter().enumerate() {
                let want = (self.dim(self.gen_target(g, id)), self.dim(id));
                if m.shape() != want {
                    return Err(invalid(format!("{g} has shape {:?} in degree {}", m.shape(), self.degree(id))));
                }
            }
        }
        let has_theta = self.has_theta();
        if has_theta {
            for i in 0..self.r() {
                let th = &self.ops[&Gen::Theta(i)];
                for (id, m) in th.iter().enumerate() {
                    if !m.is_invertible() {
                        return Err(invalid(format!("theta_{i} is not invertible in degree {}", self.degree(id))));
                    }
                }
                for id in 0..self.num_degrees() {
                    let v = Mat::identity(p, self.dim(id));
                    let mut cur = id;
                    let mut acc = v;
                    for _ in 0..ctx.period() {
                        acc = th[cur].mul(&acc);
                        cur = self.gen_target(&Gen::Theta(i), cur);
                    }
                    if !acc.is_identity() {
                        return Err(invalid(format!("theta_{i}^{} is not the identity", ctx.period())));
                    }
                }
                for i2 in 0..i {
                    let th2 = &self.ops[&Gen::Theta(i2)];
                    for id in 0..self.num_degrees() {
                        let a = th[self.gen_target(&Gen::Theta(i2), id)].mul(&th2[id]);
                        let b = th2[self.gen_target(&Gen::Theta(i), id)].mul(&th[id]);
                        if a != b {
                            return Err(invalid(format!("theta_{i} and theta_{i2} do not commute")));
                        }
                    }
                }
            }
        }
        if self.has_d() {
            let gens = self.d_gens();
            for g in &gens {
                if !self.ops.contains_key(g) {
                    return Err(invalid(format!("missing generator {g}")));
                }
            }
            for (x, g1) in gens.iter().enumerate() {
                for g2 in &gens[..x] {
                    for id in 0..self.num_degrees() {
                        let a = self.ops[g1][id].mul(&self.ops[g2][id]);
                        let b = self.ops[g2][id].mul(&self.ops[g1][id]);
                        if a != b {
                            return Err(invalid(format!("{g1} and {g2} do not commute")));
                        }
                    }
                }
            }
            let mut der = self.derived();
            let top = ctx.period();
            for c in 0..self.r() {
                for id in 0..self.num_degrees() {
                    for k1 in 1..=top {
                        for k2 in 1..=k1 {
                            let lhs = der.scalar(c, k1, id)?.mul(&der.scalar(c, k2, id)?);
                            let mut rhs = Mat::zeros(p, self.dim(id), self.dim(id));
                            for n in k1.max(k2)..=k1 + k2 {
                                let w = mul_coeff(n, k1, k2, &ctx)?;
                                if w != 0 {
                                    rhs = rhs.add(&der.scalar(c, n, id)?.scale(w));
                                }
                            }
                            if lhs != rhs {
                                return Err(invalid(format!(
                                    "product d[{k1}]d[{k2}] in coordinate {c} disagrees with the structure constants"
                                )));
                            }
                        }
                    }
                }
            }
            if has_theta {
                for c in 0..self.r() {
                    for i in 0..self.r() {
                        let th = &self.ops[&Gen::Theta(i)];
                        for id in 0..self.num_degrees() {
                            let up = self.gen_target(&Gen::Theta(i), id);
                            for k in 1..=top {
                                let lhs = der.scalar(c, k, up)?.mul(&th[id]);
                                let mut rhs = th[id].mul(&der.scalar(c, k, id)?);
                                if c == i {
                                    let b = brace(k, k - 1, &ctx)?;
                                    rhs = rhs.add(&th[id].mul(&der.scalar(c, k - 1, id)?).scale(b));
                                }
                                if lhs != rhs {
                                    return Err(invalid(format!(
                                        "Leibniz rule for d[{k}] in coordinate {c} against theta_{i} fails in degree {}",
                                        self.degree(id)
                                    )));
                                }
                            }
                        }
                    }
                }
            }
            for i in 0..self.r() {
                if let Some(u) = self.ops.get(&Gen::U(i)) {
                    for c in 0..self.r() {
                        for id in 0..self.num_degrees() {
                            for k in 1..=top {
                                let lhs = der.scalar(c, k, id)?.mul(&u[id]);
                                let mut rhs = u[id].mul(&der.scalar(c, k, id)?);
                                if c == i {
                                    let b = brace(k, k - 1, &ctx)?;
                                    rhs = rhs.add(&u[id].mul(&der.scalar(c, k - 1, id)?).scale(b));
                                }
                                if lhs != rhs {
                                    return Err(invalid(format!("Leibniz rule for d[{k}] against u_{i} fails")));
                                }
                            }
                        }
                    }
                }
            }
            if self.higgs_order.is_some() {
                for c in 0..self.r() {
                    let h = self
                        .ops
                        .get(&Gen::Higgs(MultiIndex::unit(self.r(), c, 1)))
                        .ok_or_else(|| invalid("missing degree-one Higgs generator"))?;
                    for id in 0..self.num_degrees() {
                        if der.scalar(c, top, id)? != h[id] {
                            return Err(invalid(format!(
                                "p^(m+1)-curvature in coordinate {c} differs from the Higgs field in degree {}",
                                self.degree(id)
                            )));
                        }
                    }
                }
            }
        }
        if let Some(n) = self.higgs_order {
            let idx = self.higgs_indices();
            for b in &idx {
                if !self.ops.contains_key(&Gen::Higgs(b.clone())) {
                    return Err(invalid(format!("missing Higgs generator {b}")));
                }
            }
            for a in &idx {
                for b in &idx {
                    let ab = a.add(b);
                    for id in 0..self.num_degrees() {
                        let lhs = self.ops[&Gen::Higgs(a.clone())][id].mul(&self.ops[&Gen::Higgs(b.clone())][id]);
                        let rhs = if ab.total() > n as u64 {
                            Mat::zeros(p, self.dim(id), self.dim(id))
                        } else {
                            let w = multi_binomial(&ab, a, p);
                            self.ops[&Gen::Higgs(ab.clone())][id].scale(w)
                        };
                        if lhs != rhs {
                            return Err(invalid(format!("divided-power law fails for gamma{a}·gamma{b}")));
                        }
                    }
                }
                for g in self.ops.keys() {
                    if matches!(g, Gen::Higgs(_)) {
                        continue;
                    }
                    let h = &self.ops[&Gen::Higgs(a.clone())];
                    let gm = &self.ops[g];
                    for id in 0..self.num_degrees() {
                        let t = self.gen_target(g, id);
                        if h[t].mul(&gm[id]) != gm[id].mul(&h[id]) {
                            return Err(invalid(format!("gamma{a} does not commute with {g}")));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// ∂_{<p^{m+1}ε_i>} vanishes for every i.
    pub fn curvature_vanishes(&self) -> Result<bool> {
        let mut der = self.derived();
        for c in 0..self.r() {
            for id in 0..self.num_degrees() {
                if !der.scalar(c, self.ctx.period(), id)?.is_zero() {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

/// Π C(n_i, k_i) mod p.
pub fn multi_binomial(n: &MultiIndex, k: &MultiIndex, p: u32) -> u32 {
    let f = crate::fp::Fp::new(p);
    n.iter().zip(k.iter()).fold(1 % p, |acc, (a, b)| f.mul(acc, binom_mod_p(a as i64, b as u64, p)))
}

pub fn random_invertible<R: Rng>(p: u32, n: usize, rng: &mut R) -> Mat {
    loop {
        let mut m = Mat::zeros(p, n, n);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, rng.gen_range(0..p));
            }
        }
        if m.is_invertible() {
            return m;
        }
    }
}

/// Memoized ∂_{<k>} computed from the stored generators.
pub struct Derived<'a> {
    module: &'a IndexedModule,
    cache: HashMap<(usize, u64, usize), Mat>,
}

impl Derived<'_> {
    /// ∂_{<k ε_c>} in degree `id`.
    pub fn scalar(&mut self, c: usize, k: u64, id: usize) -> Result<Mat> {
        if let Some(m) = self.cache.get(&(c, k, id)) {
            return Ok(m.clone());
        }
        let module = self.module;
        let ctx = module.ctx;
        let p = ctx.p() as u64;
        let n = module.dim(id);
        let out = if k == 0 {
            Mat::identity(ctx.p(), n)
        } else {
            let mut v = 0;
            while k % p.pow(v + 1) == 0 {
                v += 1;
            }
            let kp = if v < ctx.m() { p.pow(v) } else { ctx.pm() };
            if kp == k {
                let s = if v < ctx.m() { v } else { ctx.m() };
                module
                    .op(&Gen::D { s, i: c })
                    .ok_or_else(|| invalid("module has no differential action"))?[id]
                    .clone()
            } else {
                let rest = k - kp;
                let mut acc = self.scalar(c, kp, id)?.mul(&self.scalar(c, rest, id)?);
                for m in kp.max(rest)..k {
                    let w = mul_coeff(m, kp, rest, &ctx)?;
                    if w != 0 {
                        acc = acc.sub(&self.scalar(c, m, id)?.scale(w));
                    }
                }
                let top = angle(k, kp, &ctx)?;
                let inv = ctx.fp().inv(top).ok_or_else(|| invalid(format!("angle({k},{kp}) is not a unit")))?;
                acc.scale(inv)
            }
        };
        self.cache.insert((c, k, id), out.clone());
        Ok(out)
    }

    /// ∂_{<k>} in degree `id`.
    pub fn multi(&mut self, k: &MultiIndex, id: usize) -> Result<Mat> {
        let mut acc = Mat::identity(self.module.p(), self.module.dim(id));
        for c in 0..k.len() {
            if k.get(c) > 0 {
                acc = self.scalar(c, k.get(c) as u64, id)?.mul(&acc);
            }
        }
        Ok(acc)
    }
}

/// Degree-wise linear map X_d → Y_{d+offset}.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModuleMap {
    pub offset: usize,
    pub blocks: Vec<Mat>,
}

impl ModuleMap {
    /// Checks bijectivity and compatibility with every generator both modules carry.
    pub fn check_iso(&self, x: &IndexedModule, y: &IndexedModule) -> Result<()> {
        let same_frame = x.step() == y.step() && x.ctx().m() == y.ctx().m();
        if x.num_degrees() != y.num_degrees() || x.p() != y.p() || ((x.has_theta() || x.has_d()) && !same_frame) {
            return Err(invalid("modules live on different frames"));
        }
        for id in 0..x.num_degrees() {
            let t = x.add_degrees(id, self.offset);
            let b = &self.blocks[id];
            if b.shape() != (y.dim(t), x.dim(id)) {
                return Err(invalid(format!("map block in degree {} has the wrong shape", x.degree(id))));
            }
            if !b.is_invertible() {
                return Err(invalid(format!("map is not bijective in degree {}", x.degree(id))));
            }
        }
        self.check_equivariant(x, y)
    }

    pub fn check_equivariant(&self, x: &IndexedModule, y: &IndexedModule) -> Result<()> {
        for g in x.gens() {
            let Some(gy) = y.op(g) else {
                if matches!(g, Gen::U(_)) {
                    continue;
                }
                return Err(invalid(format!("target lacks generator {g}")));
            };
            let gx = x.op(g).expect("listed generator");
            for id in 0..x.num_degrees() {
                let xt = x.gen_target(g, id);
                let src = x.add_degrees(id, self.offset);
                let lhs = self.blocks[xt].mul(&gx[id]);
                let rhs = gy[src].mul(&self.blocks[id]);
                if lhs != rhs {
                    return Err(invalid(format!("map does not commute with {g} in degree {}", x.degree(id))));
                }
            }
        }
        Ok(())
    }
}

/// Fiber data W for a tensor product A ⊗ W: graded pieces, single-coordinate
/// operators ∂_{<tε_c>} for 0 < t ≤ p^level, and a Higgs field.
#[derive(Clone, Debug)]
pub struct Fiber {
    pub dims: Vec<usize>,
    pub d: BTreeMap<(usize, u64), Vec<Mat>>,
    pub higgs_order: Option<u32>,
    pub higgs: BTreeMap<MultiIndex, Vec<Mat>>,
}

impl Fiber {
    /// Fiber with trivial differential action, taken from a graded module (its Higgs field is kept).
    pub fn trivial(w: &IndexedModule) -> Fiber {
        let mut higgs = BTreeMap::new();
        for b in w.higgs_indices() {
            higgs.insert(b.clone(), w.op(&Gen::Higgs(b)).expect("validated Higgs field").clone());
        }
        Fiber { dims: w.dims().to_vec(), d: BTreeMap::new(), higgs_order: w.higgs_order(), higgs }
    }
}

/// A ⊗ W together with the basis labels (j, index in W_{d − step·j}).
#[derive(Clone, Debug)]
pub struct Tensor {
    pub module: IndexedModule,
    pub basis: Vec<Vec<(MultiIndex, usize)>>,
}

impl Tensor {
    /// Position of (j, w) in degree `id`.
    pub fn position(&self, id: usize, j: &MultiIndex, w: usize) -> Option<usize> {
        self.basis[id].iter().position(|(jj, ww)| jj == j && *ww == w)
    }
}

/// A ⊗ W on the frame (ctx, step), with θ^{p^{level+1}} acting as the identity
/// and ∂ acting through the Leibniz rule.
pub fn tensor_with_a(ctx: LevelContext, step: u64, w: &Fiber) -> Result<Tensor> {
    let mut module = IndexedModule::new(ctx, step, vec![0; w.dims.len()]);
    let r = ctx.r();
    let grid = ctx.period() as u32;
    let chart = module.chart();
    let js = MultiIndex::all_below(r, grid);
    let n = module.num_degrees();
    let mut basis: Vec<Vec<(MultiIndex, usize)>> = vec![Vec::new(); n];
    for (id, slot) in basis.iter_mut().enumerate() {
        for j in &js {
            let wd = offset_degree(&module, id, j, -1);
            for x in 0..w.dims[wd] {
                slot.push((j.clone(), x));
            }
        }
    }
    module.dims = basis.iter().map(|b| b.len()).collect();
    let tensor = Tensor { module: module.clone(), basis: basis.clone() };
    let p = ctx.p();
    let f = ctx.fp();
    for i in 0..r {
        let mut mats = Vec::with_capacity(n);
        for id in 0..n {
            let t = module.shift(id, i, step as i64);
            let mut m = Mat::zeros(p, module.dims[t], module.dims[id]);
            for (col, (j, x)) in basis[id].iter().enumerate() {
                let mut jj = j.clone();
                jj.set(i, (j.get(i) + 1) % grid);
                let row = tensor.position(t, &jj, *x).expect("shifted basis vector exists");
                m.set(row, col, 1);
            }
            mats.push(m);
        }
        module.set_op(Gen::Theta(i), mats);
        let zero: Vec<Mat> = (0..n).map(|id| Mat::zeros(p, module.dims[id], module.dims[id])).collect();
        module.set_op(Gen::U(i), zero);
    }
    for c in 0..r {
        for s in 0..=ctx.m() {
            let k = (p as u64).pow(s);
            let mut mats = Vec::with_capacity(n);
            for id in 0..n {
                let mut m = Mat::zeros(p, module.dims[id], module.dims[id]);
                for (col, (j, x)) in basis[id].iter().enumerate() {
                    let wd = offset_degree(&module, id, j, -1);
                    for t in 0..=k {
                        if ctx.fault().skips_leibniz(c, t, k) {
                            continue;
                        }
                        let b = brace(k, t, &ctx)?;
                        let lam = chart.lambda(k - t, j.get(c) as i64);
                        let w_coef = f.mul(b, lam);
                        if w_coef == 0 {
                            continue;
                        }
                        if t == 0 {
                            m.add_at(col, col, w_coef);
                            continue;
                        }
                        let Some(dm) = w.d.get(&(c, t)) else { continue };
                        let block = &dm[wd];
                        for y in 0..w.dims[wd] {
                            let v = block.get(y, *x);
                            if v != 0 {
                                let row = tensor.position(id, j, y).expect("same fiber degree");
                                m.add_at(row, col, f.mul(w_coef, v));
                            }
                        }
                    }
                }
                mats.push(m);
            }
            module.set_op(Gen::D { s, i: c }, mats);
        }
    }
    module.higgs_order = w.higgs_order;
    for (b, hm) in &w.higgs {
        let mut mats = Vec::with_capacity(n);
        for id in 0..n {
            let mut m = Mat::zeros(p, module.dims[id], module.dims[id]);
            for (col, (j, x)) in basis[id].iter().enumerate() {
                let wd = offset_degree(&module, id, j, -1);
                for y in 0..w.dims[wd] {
                    let v = hm[wd].get(y, *x);
                    if v != 0 {
                        let row = tensor.position(id, j, y).expect("same fiber degree");
                        m.add_at(row, col, v);
                    }
                }
            }
            mats.push(m);
        }
        module.set_op(Gen::Higgs(b.clone()), mats);
    }
    Ok(Tensor { module, basis })
}

/// id + sign·step·j.
fn offset_degree(module: &IndexedModule, id: usize, j: &MultiIndex, sign: i64) -> usize {
    let mut cur = id;
    for i in 0..module.r() {
        cur = module.shift(cur, i, sign * module.step() as i64 * j.get(i) as i64);
    }
    cur
}

/// A module that is free of rank one over F_p[θ-grid] ⊗ (Higgs algebra) on a
/// generator x0 of degree 0; `words[id][x] = (j, b)` says basis vector x of degree id is θ^j γ^[b] x0.
#[derive(Clone, Debug)]
pub struct CyclicSource {
    pub module: IndexedModule,
    pub words: Vec<Vec<(MultiIndex, MultiIndex)>>,
}

impl CyclicSource {
    /// Degree-0 basis position of x0.
    pub fn generator(&self) -> usize {
        let r = self.module.r();
        self.words[0]
            .iter()
            .position(|(j, b)| j.is_zero() && b.is_zero())
            .unwrap_or_else(|| panic!("cyclic source lacks a generator word in rank {r}"))
    }

    /// Matrix of y ↦ f_y(x) for basis vector x of degree `xid`, from Y_d to Y_{d+xid}.
    pub fn word_matrix(&self, y: &IndexedModule, d: usize, xid: usize, x: usize) -> Result<Mat> {
        let (j, b) = &self.words[xid][x];
        let n = y.dim(d);
        let mut cols = Vec::with_capacity(n);
        let mut target = d;
        for e in 0..n {
            let mut v = vec![0; n];
            v[e] = 1;
            let v = y.apply_higgs(b, d, &v)?;
            let (t, v) = y.apply_theta_power(j, d, &v)?;
            target = t;
            cols.push(v);
        }
        if n == 0 {
            target = offset_degree(y, d, j, 1);
        }
        Ok(Mat::from_columns(y.p(), y.dim(target), &cols))
    }

    /// Image of an arbitrary source vector v ∈ X_{xid} under f_y, y ∈ Y_d.
    pub fn eval(&self, y: &IndexedModule, d: usize, yv: &[u32], xid: usize, v: &[u32]) -> Result<(usize, Vec<u32>)> {
        let f = y.ctx().fp();
        let mut acc: Option<(usize, Vec<u32>)> = None;
        for (x, c) in v.iter().enumerate() {
            let wm = self.word_matrix(y, d, xid, x)?;
            let img = wm.apply(yv);
            let t = y.add_degrees(d, xid);
            let entry = acc.get_or_insert_with(|| (t, vec![0; img.len()]));
            for (a, b) in entry.1.iter_mut().zip(img) {
                *a = f.add(*a, f.mul(*c, b));
            }
        }
        Ok(acc.unwrap_or((y.add_degrees(d, xid), vec![0; y.dim(y.add_degrees(d, xid))])))
    }
}

/// Hom from a cyclic source, degree by degree.
#[derive(Clone, Debug)]
pub struct HomSpace {
    /// Graded module of homomorphisms, carrying the Higgs field when both sides do.
    pub module: IndexedModule,
    /// `images[d][t]` = f_t(x0) ∈ Y_d for basis element t.
    pub images: Vec<Vec<Vec<u32>>>,
}

impl HomSpace {
    /// Coordinates of y ∈ Y_d in the Hom basis, if f_y is a homomorphism.
    pub fn coordinates(&self, d: usize, y: &[u32]) -> Option<Vec<u32>> {
        let p = self.module.p();
        let cols = &self.images[d];
        let m = Mat::from_columns(p, y.len(), cols);
        m.solve(y)
    }
}

/// Hom_D(X, Y) for X cyclic: y ∈ Y_d with f_y commuting with the differential generators.
pub fn hom_from_cyclic(src: &CyclicSource, y: &IndexedModule) -> Result<HomSpace> {
    let x = &src.module;
    if x.num_degrees() != y.num_degrees() || x.step() != y.step() {
        return Err(invalid("source and target live on different frames"));
    }
    let p = y.p();
    let n_deg = y.num_degrees();
    let mut images = Vec::with_capacity(n_deg);
    let gens: Vec<Gen> = if x.has_d() { x.d_gens() } else { Vec::new() };
    for d in 0..n_deg {
        let n = y.dim(d);
        let mut words: HashMap<(usize, usize), Mat> = HashMap::new();
        let mut blocks: Vec<Mat> = Vec::new();
        for g in &gens {
            let gx = x.op(g).ok_or_else(|| invalid(format!("source lacks {g}")))?;
            let gy = y.op(g).ok_or_else(|| invalid(format!("target lacks {g}")))?;
            for xid in 0..x.num_degrees() {
                let t = y.add_degrees(d, xid);
                for col in 0..x.dim(xid) {
                    let wx = match words.get(&(xid, col)) {
                        Some(m) => m.clone(),
                        None => {
                            let m = src.word_matrix(y, d, xid, col)?;
                            words.insert((xid, col), m.clone());
                            m
                        }
                    };
                    let mut lhs = Mat::zeros(p, y.dim(t), n);
                    for row in 0..x.dim(xid) {
                        let c = gx[xid].get(row, col);
                        if c == 0 {
                            continue;
                        }
                        let wr = match words.get(&(xid, row)) {
                            Some(m) => m.clone(),
                            None => {
                                let m = src.word_matrix(y, d, xid, row)?;
                                words.insert((xid, row), m.clone());
                                m
                            }
                        };
                        lhs = lhs.add(&wr.scale(c));
                    }
                    blocks.push(lhs.sub(&gy[t].mul(&wx)));
                }
            }
        }
        let kernel = if blocks.is_empty() {
            Mat::identity(p, n).kernel_complement_basis()
        } else {
            let refs: Vec<&Mat> = blocks.iter().collect();
            Mat::vstack(p, n, &refs).kernel()
        };
        images.push(kernel);
    }
    let dims = images.iter().map(|v| v.len()).collect();
    let mut module = IndexedModule::new(*y.ctx(), y.step(), dims);
    if x.higgs_order().is_some() && y.higgs_order().is_some() {
        module.higgs_order = y.higgs_order();
        let space = HomSpace { module: module.clone(), images: images.clone() };
        for b in y.higgs_indices() {
            let hy = y.op(&Gen::Higgs(b.clone())).expect("validated");
            let mut mats = Vec::with_capacity(n_deg);
            for d in 0..n_deg {
                let mut cols = Vec::new();
                for img in &images[d] {
                    let moved = hy[d].apply(img);
                    let c = space
                        .coordinates(d, &moved)
                        .ok_or_else(|| invalid("Higgs field does not preserve the Hom space"))?;
                    cols.push(c);
                }
                mats.push(Mat::from_columns(p, images[d].len(), &cols));
            }
            module.set_op(Gen::Higgs(b), mats);
        }
    }
    Ok(HomSpace { module, images })
}

impl Mat {
    /// Standard basis of the domain, i.e. the kernel of the empty constraint set.
    fn kernel_complement_basis(&self) -> Vec<Vec<u32>> {
        (0..self.cols())
            .map(|i| {
                let mut v = vec![0; self.cols()];
                v[i] = 1;
                v
            })
            .collect()
    }
}

/// Joint kernel of the given generators, degree by degree.
pub fn joint_kernel(module: &IndexedModule, gens: &[Gen]) -> Result<Vec<Vec<Vec<u32>>>> {
    let p = module.p();
    let mut out = Vec::with_capacity(module.num_degrees());
    for id in 0..module.num_degrees() {
        let n = module.dim(id);
        let blocks: Vec<&Mat> = gens
            .iter()
            .map(|g| module.op(g).map(|m| &m[id]).ok_or_else(|| invalid(format!("missing {g}"))))
            .collect::<Result<_>>()?;
        if blocks.is_empty() {
            out.push(Mat::identity(p, n).kernel_complement_basis());
        } else {
            out.push(Mat::vstack(p, n, &blocks).kernel());
        }
    }
    Ok(out)
}

/// Restriction of an operator to invariant subspaces given by column bases.
pub fn restrict(
    p: u32,
    op: &Mat,
    src_basis: &[Vec<u32>],
    dst_basis: &[Vec<u32>],
    dst_ambient: usize,
) -> Result<Mat> {
    let dst = Mat::from_columns(p, dst_ambient, dst_basis);
    let mut cols = Vec::with_capacity(src_basis.len());
    for v in src_basis {
        let img = op.apply(v);
        cols.push(dst.solve(&img).ok_or_else(|| invalid("subspace is not stable"))?);
    }
    Ok(Mat::from_columns(p, dst_basis.len(), &cols))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(ctx: LevelContext) -> IndexedModule {
        let mut dims = vec![0; (ctx.period() as usize).pow(ctx.r() as u32)];
        dims[0] = 1;
        IndexedModule::new(ctx, 1, dims)
    }

    #[test]
    fn coefficient_algebra_validates() {
        for (p, m, r) in [(2, 0, 1), (2, 1, 1), (3, 0, 2), (2, 2, 1)] {
            let ctx = LevelContext::new(p, m, r).unwrap();
            let a = tensor_with_a(ctx, 1, &Fiber::trivial(&point(ctx))).unwrap();
            a.module.validate().unwrap();
            assert!(a.module.curvature_vanishes().unwrap());
            assert_eq!(a.module.total_dim(), (ctx.period() as usize).pow(r as u32));
        }
    }

    #[test]
    fn dropped_leibniz_term_is_caught() {
        let ctx = LevelContext::new(2, 1, 1).unwrap().with_fault(crate::fault::Fault::DropLeibnizTerm);
        let a = tensor_with_a(ctx, 1, &Fiber::trivial(&point(ctx))).unwrap();
        assert!(a.module.validate().is_err());
    }

    #[test]
    fn disguise_is_an_isomorphism() {
        use rand::SeedableRng;
        let ctx = LevelContext::new(3, 0, 1).unwrap();
        let a = tensor_with_a(ctx, 1, &Fiber::trivial(&point(ctx))).unwrap().module;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let (b, map) = a.disguise(&mut rng);
        b.validate().unwrap();
        map.check_iso(&a, &b).unwrap();
    }
}
