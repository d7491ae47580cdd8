//! Seeded random modules. Every generator hides its structure behind a
//! random basis change per degree.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::cartier::{inverse_cartier, GammaTrunc};
use crate::error::Result;
use crate::linalg::Mat;
use crate::mindex::{LevelContext, MultiIndex};
use crate::module::{Gen, IndexedModule};

pub type Rng8 = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng8 {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

fn base_shell(ctx: LevelContext) -> IndexedModule {
    IndexedModule::empty_base(ctx)
}

/// Graded space of total dimension 1..=max_dim in random degrees.
pub fn random_graded(ctx: LevelContext, rng: &mut Rng8, max_dim: usize) -> IndexedModule {
    let shell = base_shell(ctx);
    let mut dims = vec![0; shell.num_degrees()];
    let total = rng.gen_range(1..=max_dim);
    let n = dims.len();
    for _ in 0..total {
        dims[rng.gen_range(0..n)] += 1;
    }
    IndexedModule::new(ctx, 1, dims)
}

/// ⊕ R_{≤t}(d) with t ≤ N, total dimension at most `max_dim`, disguised.
pub fn random_higgs(ctx: LevelContext, n: u32, rng: &mut Rng8, max_dim: usize) -> IndexedModule {
    let shell = base_shell(ctx);
    let p = ctx.p();
    let r = ctx.r();
    let mut blocks: Vec<(usize, u32)> = Vec::new();
    let mut used = 0;
    loop {
        let t = rng.gen_range(0..=n);
        let size = MultiIndex::all_with_total_at_most(r, t).len();
        if used + size > max_dim {
            if blocks.is_empty() {
                continue;
            }
            break;
        }
        used += size;
        blocks.push((rng.gen_range(0..shell.num_degrees()), t));
        if rng.gen_bool(0.4) {
            break;
        }
    }
    let mut dims = vec![0; shell.num_degrees()];
    // per degree: list of (t, basis of R_{≤t}) blocks in order
    let mut layout: Vec<Vec<(u32, Vec<MultiIndex>)>> = vec![Vec::new(); shell.num_degrees()];
    for (d, t) in &blocks {
        let b = MultiIndex::all_with_total_at_most(r, *t);
        dims[*d] += b.len();
        layout[*d].push((*t, b));
    }
    let mut module = IndexedModule::new(ctx, 1, dims.clone());
    module.set_higgs_order(Some(n));
    for a in module.higgs_indices() {
        let mut mats = Vec::with_capacity(dims.len());
        for (id, blocks) in layout.iter().enumerate() {
            let mut m = Mat::zeros(p, dims[id], dims[id]);
            let mut off = 0;
            for (t, basis) in blocks {
                let g = GammaTrunc { p, r, n: *t, fault: ctx.fault() };
                for (col, b) in basis.iter().enumerate() {
                    if let Some((s, c)) = g.mul(&a, b) {
                        let row = basis.iter().position(|x| *x == s).expect("closed under truncation");
                        m.add_at(off + row, off + col, c);
                    }
                }
                off += basis.len();
            }
            mats.push(m);
        }
        module.set_op(Gen::Higgs(a), mats);
    }
    module.disguise(rng).0
}

/// C^{-1}(E′) for a random nilpotent Higgs module E′, disguised.
pub fn random_mic(ctx: LevelContext, n: u32, rng: &mut Rng8, max_dim: usize) -> Result<IndexedModule> {
    let e = random_higgs(ctx, n, rng, max_dim);
    Ok(inverse_cartier(&e, n)?.module.disguise(rng).0)
}

/// A ⊗ V for a random graded space V, disguised.
pub fn random_flat(ctx: LevelContext, rng: &mut Rng8, max_dim: usize) -> Result<IndexedModule> {
    let v = random_graded(ctx, rng, max_dim);
    Ok(crate::azumaya::induce(&v)?.module.disguise(rng).0)
}

/// Level-0 module on the Frobenius target of `ctx`: on each chosen coset of
/// p^m-multiples, ∂′_i = λ_i + c_i·N with N nilpotent, shifted by one per θ′ step.
pub fn random_target(ctx: LevelContext, rng: &mut Rng8, max_coset_dim: usize) -> Result<IndexedModule> {
    let p = ctx.p();
    let r = ctx.r();
    let pm = ctx.pm();
    let ctx0 = ctx.at_level(0)?;
    let shell = IndexedModule::new(ctx0, pm, vec![0; (ctx.period() as usize).pow(r as u32)]);
    let mut cosets = MultiIndex::all_below(r, pm as u32);
    cosets.shuffle(rng);
    let count = rng.gen_range(1..=cosets.len().min(2));
    let mut dims = vec![0; shell.num_degrees()];
    let mut local: Vec<Option<Vec<Mat>>> = vec![None; shell.num_degrees()];
    let grid = MultiIndex::all_below(r, p);
    for coset in cosets.into_iter().take(count) {
        let n = rng.gen_range(1..=max_coset_dim);
        let mut nil = Mat::zeros(p, n, n);
        for i in 0..n {
            for j in i + 1..n {
                nil.set(i, j, rng.gen_range(0..p));
            }
        }
        let base: Vec<Mat> = (0..r)
            .map(|_| {
                let lam = rng.gen_range(0..p);
                Mat::identity(p, n).scale(lam).add(&nil.scale(rng.gen_range(0..p)))
            })
            .collect();
        for j in &grid {
            let deg: Vec<u32> = (0..r).map(|i| coset.get(i) + pm as u32 * j.get(i)).collect();
            let id = shell.degree_id(&MultiIndex::new(&deg));
            dims[id] = n;
            local[id] = Some(
                base.iter()
                    .enumerate()
                    .map(|(i, b)| b.add(&Mat::identity(p, n).scale(j.get(i))))
                    .collect(),
            );
        }
    }
    let mut module = IndexedModule::new(ctx0, pm, dims.clone());
    let n_deg = dims.len();
    for i in 0..r {
        let th = (0..n_deg)
            .map(|id| Mat::identity(p, dims[id]))
            .collect::<Vec<_>>();
        module.set_op(Gen::Theta(i), th);
        let d = (0..n_deg)
            .map(|id| local[id].as_ref().map_or_else(|| Mat::zeros(p, 0, 0), |v| v[i].clone()))
            .collect();
        module.set_op(Gen::D { s: 0, i }, d);
    }
    Ok(module.disguise(rng).0)
}
