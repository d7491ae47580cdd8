//! Named verification suites and a parallel runner over (suite, context) cells.

use num_bigint::BigInt;
use num_traits::{One, Pow, ToPrimitive, Zero};
use rand::Rng;

use crate::azumaya::{
    a_basis_over_center, beta, beta_on_d_expected, check_endomorphisms_of_a, check_induced_of_invariants,
    check_invariants_of_induced, check_morita, coefficient_module, end_iso_rank, nabla_invariants, t1_is_unitriangular,
};
use crate::cartier::{
    check_ascend_of_descend, check_compatibility, check_descend_of_ascend, check_inverse_of_transform,
    check_transform_of_inverse, frobenius_of_k, inverse_cartier, k0_b, k_a, splitting_ranks, GammaTrunc, KModule,
};
use crate::chart::{AElement, AMonomial, Chart};
use crate::corpus::{random_flat, random_graded, random_higgs, random_mic, random_target, rng, Rng8};
use crate::error::{Error, Result};
use crate::fault::Fault;
use crate::jet::{comultiply, mochizuki_basis, mochizuki_class, PDJet};
use crate::mindex::{
    angle, angle_multi, binom_mod_p, brace, brace_multi, exact, factorial_val_unit, level_ratio, mul_coeff,
    mul_coeff_multi, q_factorial_mod, q_of, LevelContext, MultiIndex, SignedMultiIndex,
};
use crate::module::Gen;
use crate::operator::{center_structural, center_test, centralizer_structural, centralizer_test, TDOperator};
use crate::report::{Cases, SuiteParams, SuiteReport};

pub const SUITES: [&str; 17] = [
    "mindex-identities",
    "mpd-identities",
    "operator-ring",
    "lemma-p^{m+1}",
    "mochizuki",
    "center",
    "centralizer",
    "end-iso",
    "azumaya-rank",
    "cartier-descent",
    "morita",
    "pd-gamma",
    "k-module",
    "splitting-AA",
    "transform-roundtrip",
    "frobenius-descent",
    "compatibility",
];

/// The default (p, m, r) grid.
pub const DEFAULT_GRID: [(u32, u32, usize); 7] =
    [(2, 0, 1), (2, 1, 1), (2, 0, 2), (3, 0, 1), (3, 1, 1), (2, 2, 1), (5, 0, 1)];

/// The perturbation each suite must detect.
pub fn control_fault(name: &str) -> Result<Fault> {
    Ok(match name {
        "mindex-identities" | "mpd-identities" | "mochizuki" => Fault::PerturbBrace,
        "lemma-p^{m+1}" => Fault::PerturbMulCoeff,
        "operator-ring" | "center" | "centralizer" | "end-iso" | "azumaya-rank" | "cartier-descent" | "morita" => {
            Fault::DropLeibnizTerm
        }
        "pd-gamma" => Fault::PerturbGammaProduct,
        "k-module" | "splitting-AA" | "transform-roundtrip" | "frobenius-descent" | "compatibility" => {
            Fault::FlipKConstant
        }
        other => return Err(Error::UnknownSuite(other.to_string())),
    })
}

fn cell_seed(seed: u64, name: &str, ctx: &LevelContext) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let bytes = name.bytes().chain(format!("/{}/{}/{}", ctx.p(), ctx.m(), ctx.r()).into_bytes());
    for b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h ^ seed
}

/// Runs one suite on one context. The fault of `ctx` selects a negative control.
pub fn run_suite(name: &str, ctx: LevelContext, params: &SuiteParams) -> Result<SuiteReport> {
    control_fault(name)?;
    let mut cases = Cases::new();
    let mut g = rng(cell_seed(params.seed, name, &ctx));
    let mut params = params.clone();
    let outcome = match name {
        "mindex-identities" => mindex_identities(ctx, &mut cases),
        "mpd-identities" => mpd_identities(ctx, &mut cases, &mut g),
        "operator-ring" => operator_ring(ctx, &params, &mut cases, &mut g),
        "lemma-p^{m+1}" => lemma(ctx, &mut cases),
        "mochizuki" => mochizuki(ctx, &mut cases, &mut g),
        "center" => center(ctx, &params, &mut cases, &mut g, false),
        "centralizer" => center(ctx, &params, &mut cases, &mut g, true),
        "end-iso" => end_iso(ctx, &params, &mut cases),
        "azumaya-rank" => azumaya_rank(ctx, &mut cases),
        "cartier-descent" => cartier_descent(ctx, &params, &mut cases, &mut g),
        "morita" => morita(ctx, &mut cases, &mut g),
        "pd-gamma" => pd_gamma(ctx, &params, &mut cases),
        "k-module" => k_module(ctx, &params, &mut cases).map(|s| params.sign = s),
        "splitting-AA" => splitting(ctx, &params, &mut cases).map(|s| params.sign = s),
        "transform-roundtrip" => transform(ctx, &params, &mut cases, &mut g).map(|s| params.sign = s),
        "frobenius-descent" => frobenius(ctx, &params, &mut cases, &mut g),
        "compatibility" => compatibility(ctx, &params, &mut cases, &mut g),
        _ => unreachable!("names are checked by control_fault"),
    };
    match outcome {
        Ok(()) => {}
        Err(e @ Error::UnsupportedContext(_)) => return Err(e),
        Err(e) => cases.fail(format!("{name} on {ctx}"), "suite completes", e),
    }
    Ok(cases.finish(name, &ctx, params))
}

/// Runs every (suite, cell) pair on up to `max_threads` threads; reports are
/// sorted by suite name, then cell.
pub fn run_cells(
    names: &[&str],
    cells: &[LevelContext],
    params: impl Fn(&LevelContext) -> SuiteParams + Sync,
    max_threads: usize,
) -> Result<Vec<SuiteReport>> {
    for n in names {
        control_fault(n)?;
    }
    let jobs: Vec<(&str, LevelContext)> =
        names.iter().flat_map(|n| cells.iter().map(move |c| (*n, *c))).collect();
    let next = std::sync::atomic::AtomicUsize::new(0);
    let results = std::sync::Mutex::new(Vec::with_capacity(jobs.len()));
    std::thread::scope(|s| {
        for _ in 0..max_threads.max(1).min(jobs.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                let Some((name, ctx)) = jobs.get(i) else { break };
                let r = run_suite(name, *ctx, &params(ctx));
                results.lock().expect("no poisoned workers").push((i, r));
            });
        }
    });
    let mut results = results.into_inner().expect("no poisoned workers");
    results.sort_by_key(|(i, _)| *i);
    let mut out = results.into_iter().map(|(_, r)| r).collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| (&a.suite, a.ctx).cmp(&(&b.suite, b.ctx)));
    Ok(out)
}

fn show<T: std::fmt::Display>(r: &Result<T>) -> String {
    match r {
        Ok(v) => v.to_string(),
        Err(e) => e.to_string(),
    }
}

fn big_mod(x: &BigInt, p: u32) -> u32 {
    let pb = BigInt::from(p);
    (((x % &pb) + &pb) % &pb).to_u32().expect("residue fits")
}

// ---------------------------------------------------------------- samplers

fn rand_mono(chart: &Chart, g: &mut Rng8, amax: u32, jmax: i64) -> AMonomial {
    let r = chart.r();
    let s = chart.step() as i64;
    let a: Vec<u32> = (0..r).map(|_| g.gen_range(0..=amax)).collect();
    let j: Vec<i64> = a
        .iter()
        .map(|&ai| {
            let e = g.gen_range(-jmax..=jmax) * s;
            e - ai as i64
        })
        .collect();
    AMonomial::new(MultiIndex::new(&a), SignedMultiIndex::new(&j))
}

fn rand_elem(chart: &Chart, g: &mut Rng8, terms: usize, amax: u32, jmax: i64) -> AElement {
    let mut x = chart.zero();
    for _ in 0..terms {
        x.add_term(rand_mono(chart, g, amax, jmax), g.gen_range(1..chart.p().max(2)));
    }
    x
}

fn rand_index(g: &mut Rng8, r: usize, lo: u64, hi: u64) -> MultiIndex {
    loop {
        let k = MultiIndex::new(&(0..r).map(|_| g.gen_range(0..=hi) as u32).collect::<Vec<_>>());
        if (lo..=hi).contains(&k.total()) {
            return k;
        }
    }
}

fn rand_op(chart: &Chart, g: &mut Rng8, terms: usize, kmax: u64) -> TDOperator {
    let mut x = TDOperator::zero(*chart);
    for _ in 0..terms {
        let k = rand_index(g, chart.r(), 0, kmax);
        x.add_term(rand_mono(chart, g, 1, 2), k, g.gen_range(1..chart.p().max(2)));
    }
    x
}

fn rand_ideal_jet(chart: &Chart, order: u32, g: &mut Rng8, terms: usize, kmax: u64) -> PDJet {
    let mut x = PDJet::zero(*chart, order);
    for _ in 0..terms {
        let k = rand_index(g, chart.r(), 1, kmax);
        x.add_term(rand_mono(chart, g, 1, 2), k, g.gen_range(1..chart.p().max(2)));
    }
    x
}

// ------------------------------------------------------------------ suites

fn mindex_identities(ctx: LevelContext, cases: &mut Cases) -> Result<()> {
    let p = ctx.p();
    let f = ctx.fp();
    for k in 0..=200u64 {
        for k1 in 0..=k {
            let b = brace(k, k1, &ctx);
            cases.same(exact::brace(k, k1, &ctx).reduce(p), b.clone(), || format!("brace k={k} k1={k1}"));
            let a = angle(k, k1, &ctx);
            cases.same(exact::angle(k, k1, &ctx).reduce(p), a.clone(), || format!("angle k={k} k1={k1}"));
            let c = big_mod(&exact::binomial(k as i64, k1), p);
            let prod = a.and_then(|a| b.map(|b| f.mul(a, b)));
            cases.same(Ok(c), prod, || format!("angle*brace k={k} k1={k1}"));
        }
        let q = exact::factorial(q_of(k, &ctx));
        cases.same(big_mod(&q, p), q_factorial_mod(k, &ctx), || format!("q_k! k={k}"));
        for m2 in ctx.m()..=ctx.m() + 2 {
            let want = exact::level_ratio(k, ctx.m(), m2, p).reduce(p);
            cases.same(want, level_ratio(k, ctx.m(), m2, p), || format!("level_ratio k={k} m2={m2}"));
        }
    }
    for k in 0..=200u64 {
        for k1 in 0..=k {
            for k2 in k1.max(k - k1)..=k {
                let got = mul_coeff(k, k1, k2, &ctx);
                cases.same(exact::mul_coeff(k, k1, k2, &ctx).reduce(p), got.clone(), || {
                    format!("mul_coeff k={k} k1={k1} k2={k2}")
                });
                if k1 != k2 {
                    cases.same(got, mul_coeff(k, k2, k1, &ctx), || format!("mul_coeff symmetry k={k} k1={k1} k2={k2}"));
                }
            }
        }
    }
    for n in -60i64..=300 {
        let top = if n >= 0 { n as u64 } else { 80 };
        for k in 0..=top {
            cases.same(big_mod(&exact::binomial(n, k), p), binom_mod_p(n, k, p), || format!("binom n={n} k={k}"));
        }
    }
    let (mut val, mut unit) = (0u64, 1 % p);
    for n in 0..=10_000u64 {
        if n > 0 {
            let mut x = n;
            while x % p as u64 == 0 {
                x /= p as u64;
                val += 1;
            }
            unit = f.mul(unit, (x % p as u64) as u32);
        }
        cases.same((val, unit), factorial_val_unit(n, p), || format!("v_p and unit of {n}!"));
    }
    let bound = 2 * ctx.period() as u32;
    let product = |parts: Vec<exact::ExactCoeff>| exact::ExactCoeff(parts.into_iter().map(|e| e.0).product());
    for k in MultiIndex::all_with_total_at_most(ctx.r(), bound) {
        let below = k.below();
        let coords = 0..k.len();
        for k1 in &below {
            let at = |c: usize| (k.get(c) as u64, k1.get(c) as u64);
            let wb = product(coords.clone().map(|c| exact::brace(at(c).0, at(c).1, &ctx)).collect());
            let wa = product(coords.clone().map(|c| exact::angle(at(c).0, at(c).1, &ctx)).collect());
            cases.same(wb.reduce(p), brace_multi(&k, k1, &ctx), || format!("brace_multi {k} {k1}"));
            cases.same(wa.reduce(p), angle_multi(&k, k1, &ctx), || format!("angle_multi {k} {k1}"));
            for k2 in &below {
                if coords.clone().any(|c| k.get(c) > k1.get(c) + k2.get(c)) {
                    continue;
                }
                let w = product(
                    coords
                        .clone()
                        .map(|c| exact::mul_coeff(k.get(c) as u64, k1.get(c) as u64, k2.get(c) as u64, &ctx))
                        .collect(),
                );
                cases.same(w.reduce(p), mul_coeff_multi(&k, k1, k2, &ctx), || format!("mul_coeff_multi {k} {k1} {k2}"));
            }
        }
    }
    Ok(())
}

/// Every term η^{{k}} has some coordinate k_i ≥ p^m.
fn in_pd_ideal(x: &PDJet, ctx: &LevelContext) -> bool {
    x.terms().all(|(_, k, _)| k.iter().any(|v| v as u64 >= ctx.pm()))
}

fn mpd_identities(ctx: LevelContext, cases: &mut Cases, g: &mut Rng8) -> Result<()> {
    let chart = Chart::base(ctx);
    let p = ctx.p();
    let ord = ctx.period() as u32 + 2;
    for sample in 0..10 {
        let x = rand_ideal_jet(&chart, ord, g, 2, 2);
        let y = rand_ideal_jet(&chart, ord, g, 2, 2);
        let a = rand_elem(&chart, g, 2, 1, 2);
        let tag = |s: &str| format!("sample {sample}: {s} x={x} y={y}");
        let px = x.pd_powers(ord)?;
        let py = y.pd_powers(ord)?;
        let pxy = x.add(&y)?.pd_powers(ord)?;
        let pax = x.scale_by(&a).pd_powers(ord)?;
        cases.eq(tag("x^{{0}}"), &PDJet::one(chart, ord), &px[0]);
        cases.eq(tag("x^{{1}}"), &x, &px[1]);
        let mut power = PDJet::one(chart, ord);
        for k in 0..=ord {
            let xk = &px[k as usize];
            if k >= 1 {
                cases.check(xk.in_ideal(), tag(&format!("x^{{{{{k}}}}} in I")), "in I", xk);
            }
            if k as u64 >= ctx.pm() {
                cases.check(in_pd_ideal(xk, &ctx), tag(&format!("x^{{{{{k}}}}} in J")), "in J", xk);
            }
            let want = xk.scale_by(&a.pow(k));
            cases.eq(tag(&format!("(ax)^{{{{{k}}}}} a={a}")), &want, &pax[k as usize]);
            let mut sum = PDJet::zero(chart, ord);
            for k1 in 0..=k {
                let w = angle(k as u64, k1 as u64, &ctx)?;
                if w != 0 {
                    sum = sum.add(&px[k1 as usize].mul(&py[(k - k1) as usize])?.scale(w))?;
                }
            }
            cases.eq(tag(&format!("(x+y)^{{{{{k}}}}}")), &sum, &pxy[k as usize]);
            let qk = big_mod(&exact::factorial(q_of(k as u64, &ctx)), p);
            cases.eq(tag(&format!("q_k! x^{{{{{k}}}}} = x^{k}")), &power, &xk.scale(qk));
            power = power.mul(&x)?;
        }
        for k in 1..=ord {
            let inner = px[k as usize].pd_powers(ord)?;
            for l in 0..=ord {
                let kl = k as u64 * l as u64;
                let num = exact::factorial(q_of(kl, &ctx));
                let den = Pow::pow(exact::factorial(q_of(k as u64, &ctx)), l) * exact::factorial(q_of(l as u64, &ctx));
                let coeff = exact::ExactCoeff::from_ratio(num, den);
                let want = match coeff.reduce(p) {
                    Ok(c) if kl <= ord as u64 => px[kl as usize].scale(c),
                    Ok(_) => PDJet::zero(chart, ord),
                    Err(e) => {
                        cases.fail(tag(&format!("(x^{{{{{k}}}}})^{{{{{l}}}}}")), "integral coefficient", e);
                        continue;
                    }
                };
                cases.eq(tag(&format!("(x^{{{{{k}}}}})^{{{{{l}}}}}")), &want, &inner[l as usize]);
            }
        }
    }
    for n in MultiIndex::all_with_total_at_most(ctx.r(), ord) {
        let delta = comultiply(&n, &ctx)?;
        let below = n.below();
        for k1 in &below {
            for k2 in &below {
                let wide: Vec<u32> = k1.iter().chain(k2.iter()).collect();
                let got = delta.coefficient(&MultiIndex::new(&wide)).coeff(&AMonomial::one(2 * ctx.r()));
                let want = mul_coeff_multi(&n, k1, k2, &ctx)?;
                cases.eq(format!("comultiply {n} at ({k1},{k2})"), &want, &got);
            }
        }
    }
    Ok(())
}

fn operator_ring(ctx: LevelContext, params: &SuiteParams, cases: &mut Cases, g: &mut Rng8) -> Result<()> {
    let chart = Chart::base(ctx);
    let period = ctx.period();
    for _ in 0..500 {
        let a = rand_op(&chart, g, 2, period);
        let b = rand_op(&chart, g, 2, period);
        let c = rand_op(&chart, g, 2, period);
        let lhs = a.mul(&b)?.mul(&c)?;
        let rhs = a.mul(&b.mul(&c)?)?;
        cases.eq(format!("associativity a={a} b={b} c={c}"), &lhs, &rhs);
    }
    let ks = MultiIndex::all_with_total_at_most(ctx.r(), params.deg as u32);
    for k in &ks {
        for l in &ks {
            let dk = TDOperator::d(chart, k);
            let dl = TDOperator::d(chart, l);
            cases.eq(format!("[d{k}, d{l}] = 0"), &dk.mul(&dl)?, &dl.mul(&dk)?);
        }
    }
    for _ in 0..200 {
        let a = rand_op(&chart, g, 2, period);
        let b = rand_op(&chart, g, 2, period);
        let x = rand_elem(&chart, g, 3, 2, period as i64);
        cases.eq(format!("action a={a} b={b} x={x}"), &a.act(&b.act(&x)), &a.mul(&b)?.act(&x));
    }
    for _ in 0..200 {
        let x = rand_elem(&chart, g, 2, 2, period as i64);
        let y = rand_elem(&chart, g, 2, 2, period as i64);
        let k = rand_index(g, ctx.r(), 0, params.deg);
        let mut sum = chart.zero();
        for i in k.below() {
            let w = brace_multi(&k, &i, &ctx)?;
            let rest = k.checked_sub(&i).expect("i below k");
            sum = sum.add(&chart.d_action(&i, &x).mul(&chart.d_action(&rest, &y)).scale(w));
        }
        cases.eq(format!("Leibniz on coefficients d{k} x={x} y={y}"), &sum, &chart.d_action(&k, &x.mul(&y)));
        cases.eq(format!("d_action vs act d{k} x={x}"), &chart.d_action(&k, &x), &TDOperator::d(chart, &k).act(&x));
    }
    let p = ctx.p();
    for a in MultiIndex::all_below(ctx.r(), 3) {
        for j in box_exponents(ctx.r(), period as i64) {
            let mono = AMonomial::new(a.clone(), j.clone());
            for s in 0..=ctx.m() + 1 {
                let killed = (0..s).all(|t| {
                    (0..ctx.r()).all(|i| chart.d_action(&MultiIndex::unit(ctx.r(), i, p.pow(t)), &AElement::monomial(p, mono.clone(), 1)).is_zero())
                });
                cases.eq(format!("B-level {mono} >= {s}"), &killed, &(chart.b_level(&mono) >= s));
            }
        }
    }
    for ch in [chart, Chart::frobenius_target(ctx)] {
        for _ in 0..100 {
            let x = rand_elem(&ch, g, 4, 2, 2 * period as i64);
            let parts = ch.b_decompose(&x)?;
            let top = ch.ctx().m() + 1;
            let ok = parts.iter().all(|(j, b)| {
                j.iter().all(|v| (v as u64) < ch.ctx().period()) && b.terms().all(|(m, _)| ch.b_level(m) >= top)
            });
            cases.check(ok, format!("b_decompose parts of {x}"), "residues and B-parts", format!("{parts:?}"));
            cases.eq(format!("b_reassemble {x}"), &x, &ch.b_reassemble(&parts));
        }
    }
    Ok(())
}

fn box_exponents(r: usize, bound: i64) -> Vec<SignedMultiIndex> {
    MultiIndex::all_below(r, (2 * bound + 1) as u32)
        .into_iter()
        .map(|v| SignedMultiIndex::new(&v.iter().map(|x| x as i64 - bound).collect::<Vec<_>>()))
        .collect()
}

fn lemma(ctx: LevelContext, cases: &mut Cases) -> Result<()> {
    let chart = Chart::base(ctx);
    let top = ctx.period() as u32;
    for k in MultiIndex::all_with_total_at_most(ctx.r(), 2) {
        let big = k.scale(top);
        for i in 0..ctx.r() {
            for l in 1..=top {
                let e = MultiIndex::unit(ctx.r(), i, l);
                let got = TDOperator::d(chart, &big).mul(&TDOperator::d(chart, &e))?;
                cases.eq(format!("d{big} * d{e}"), &TDOperator::d(chart, &big.add(&e)), &got);
            }
        }
    }
    Ok(())
}

fn mochizuki(ctx: LevelContext, cases: &mut Cases, g: &mut Rng8) -> Result<()> {
    let chart = Chart::base(ctx);
    let r = ctx.r();
    let top = ctx.period() as u32;
    let basis = mochizuki_basis(chart)?;
    cases.eq("quotient dimension", &r, &basis.len());
    let mut want: Vec<MultiIndex> = (0..r).map(|i| MultiIndex::unit(r, i, top)).collect();
    want.sort();
    let mut got = basis.clone();
    got.sort();
    cases.check(got == want, "quotient basis", format!("{want:?}"), format!("{got:?}"));
    let basis = want;
    let class = |x: &PDJet| -> Result<Vec<AElement>> { Ok(mochizuki_class(&x.pd_power(top)?, &basis)) };
    let fmt = |v: &[AElement]| v.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(", ");
    if r >= 2 {
        let e1 = PDJet::eta(chart, top, 0);
        let e2 = PDJet::eta(chart, top, 1);
        let sum = e1.add(&e2)?.pd_power(top)?;
        let exact_sum = PDJet::eta_pd(chart, top, &basis[0]).add(&PDJet::eta_pd(chart, top, &basis[1]))?;
        let cross: PDJet = sum.sub(&exact_sum)?;
        let ok = cross.terms().all(|(_, k, _)| !basis.contains(k));
        cases.check(ok, "(eta_1 + eta_2)^{{P}}", "eta_1^{{P}} + eta_2^{{P}} + I.P", &sum);
    }
    let u = AElement::monomial(ctx.p(), AMonomial::u(MultiIndex::unit(r, 0, 1)), 1);
    let ue = PDJet::eta(chart, top, 0).scale_by(&u).pd_power(top)?;
    let want_ue = PDJet::eta_pd(chart, top, &MultiIndex::unit(r, 0, top)).scale_by(&u.pow(top));
    cases.eq("(u eta_1)^{{P}}", &want_ue, &ue);
    for s in 0..200 {
        let xi = rand_ideal_jet(&chart, top, g, 3, 2);
        let tau = rand_ideal_jet(&chart, top, g, 3, 2);
        let a = rand_elem(&chart, g, 2, 1, 2);
        let cx = class(&xi)?;
        let ct = class(&tau)?;
        let sum: Vec<AElement> = cx.iter().zip(&ct).map(|(a, b)| a.add(b)).collect();
        let cs = class(&xi.add(&tau)?)?;
        cases.check(cs == sum, format!("sample {s}: additivity xi={xi} tau={tau}"), fmt(&sum), fmt(&cs));
        let ap = a.pow(top);
        let scaled: Vec<AElement> = cx.iter().map(|c| c.mul(&ap)).collect();
        let ca = class(&xi.scale_by(&a))?;
        cases.check(ca == scaled, format!("sample {s}: semilinearity a={a} xi={xi}"), fmt(&scaled), fmt(&ca));
        let cp = class(&xi.mul(&tau)?)?;
        cases.check(cp.iter().all(|c| c.is_zero()), format!("sample {s}: zero on I^2"), "0", fmt(&cp));
        if s < 20 {
            let wide = 2 * top;
            let lift = |x: &PDJet| {
                let mut y = PDJet::zero(chart, wide);
                for (m, k, c) in x.terms() {
                    y.add_term(m.clone(), k.clone(), c);
                }
                y
            };
            let (xw, tw) = (lift(&xi), lift(&tau));
            let px = xw.pd_powers(top)?;
            let pt = tw.pd_powers(top)?;
            let (mut xpow, mut tpows) = (PDJet::one(chart, wide), vec![PDJet::one(chart, wide)]);
            for _ in 0..top {
                let next = tpows.last().expect("nonempty").mul(&tw)?;
                tpows.push(next);
            }
            for i in 1..top {
                xpow = xpow.mul(&xw)?;
                let j = top - i;
                let qi = q_factorial_mod(i as u64, &ctx);
                let qj = q_factorial_mod(j as u64, &ctx);
                let cross = px[i as usize].mul(&pt[j as usize])?;
                let ordinary = xpow.mul(&tpows[j as usize])?;
                cases.eq(
                    format!("sample {s}: q_{i}!q_{j}! xi^{{{{{i}}}}} tau^{{{{{j}}}}} = xi^{i} tau^{j}"),
                    &ordinary,
                    &cross.scale(ctx.fp().mul(qi, qj)),
                );
                let c = mochizuki_class(&cross.truncate(top), &basis);
                cases.check(c.iter().all(|x| x.is_zero()), format!("sample {s}: cross term {i},{j} in I.P"), "0", fmt(&c));
            }
        }
        let lin: Vec<AElement> = basis
            .iter()
            .map(|k| {
                let i = (0..r).find(|&i| k.get(i) > 0).expect("nonzero basis index");
                xi.coefficient(&MultiIndex::unit(r, i, 1)).pow(top)
            })
            .collect();
        cases.check(cx == lin, format!("sample {s}: class of xi={xi}"), fmt(&lin), fmt(&cx));
    }
    Ok(())
}

fn center(ctx: LevelContext, params: &SuiteParams, cases: &mut Cases, g: &mut Rng8, centralizer: bool) -> Result<()> {
    let (test, structural): (fn(&TDOperator) -> Result<bool>, fn(&TDOperator) -> bool) = if centralizer {
        (centralizer_test, centralizer_structural)
    } else {
        (center_test, center_structural)
    };
    let period = ctx.period() as i64;
    let r = ctx.r();
    for chart in [Chart::base(ctx), Chart::frobenius_target(ctx)] {
        let cp = chart.ctx().period() as i64;
        let s = chart.step() as i64;
        let kbound = if chart == Chart::base(ctx) { params.deg as u32 } else { 2 * cp as u32 };
        let ks = MultiIndex::all_with_total_at_most(r, kbound);
        for a in MultiIndex::all_below(r, period as u32 + 1) {
            for e in box_exponents(r, cp) {
                let j = SignedMultiIndex::new(
                    &e.iter().zip(a.iter()).map(|(x, ai)| x * s - ai as i64).collect::<Vec<_>>(),
                );
                let mono = AMonomial::new(a.clone(), j);
                for k in &ks {
                    let op = TDOperator::term(chart, mono.clone(), k.clone(), 1);
                    let got = test(&op)?;
                    cases.eq(format!("{op} on {:?}", chart.role()), &structural(&op), &got);
                }
            }
        }
        for _ in 0..100 {
            let op = rand_op(&chart, g, 2, kbound as u64);
            let got = test(&op)?;
            cases.eq(format!("{op} on {:?}", chart.role()), &structural(&op), &got);
        }
    }
    Ok(())
}

fn end_iso(ctx: LevelContext, params: &SuiteParams, cases: &mut Cases) -> Result<()> {
    for chart in [Chart::base(ctx), Chart::frobenius_target(ctx)] {
        let grid = MultiIndex::all_below(ctx.r(), chart.ctx().period() as u32);
        for j in &grid {
            for k in &grid {
                let got = beta(j, &TDOperator::d(chart, k))?;
                let want = beta_on_d_expected(chart, j, k)?;
                cases.eq(format!("beta^{j}(d{k}) on {:?}", chart.role()), &want, &got);
            }
        }
        cases.check(t1_is_unitriangular(chart), format!("T1 on {:?}", chart.role()), "unitriangular", "not");
        for n in 0..=params.n.min(2) {
            let (rank, width) = end_iso_rank(chart, n)?;
            cases.eq(format!("end-iso rank N={n} on {:?}", chart.role()), &width, &rank);
        }
    }
    Ok(())
}

fn azumaya_rank(ctx: LevelContext, cases: &mut Cases) -> Result<()> {
    let p = ctx.p() as usize;
    let r = ctx.r() as u32;
    let (rank, _) = end_iso_rank(Chart::base(ctx), 0)?;
    cases.eq("rank over the center", &p.pow(2 * (ctx.m() + 1) * r), &rank);
    let (rank0, _) = end_iso_rank(Chart::frobenius_target(ctx), 0)?;
    cases.eq("level-0 rank over the center", &p.pow(2 * r), &rank0);
    cases.ok("End(A) = scalars", check_endomorphisms_of_a(Chart::base(ctx)));
    let basis = a_basis_over_center(Chart::base(ctx));
    cases.eq("A basis over B^(m+1)", &p.pow((ctx.m() + 1) * r), &basis.len());
    let chart = Chart::base(ctx);
    let grid = MultiIndex::all_below(ctx.r(), ctx.period() as u32);
    for j in &grid {
        let got = beta(j, &TDOperator::d(chart, j))?;
        let want = beta_on_d_expected(chart, j, j)?;
        cases.eq(format!("T2 diagonal beta^{j}(d{j})"), &want, &got);
    }
    Ok(())
}

fn cartier_descent(ctx: LevelContext, params: &SuiteParams, cases: &mut Cases, g: &mut Rng8) -> Result<()> {
    for s in 0..20 {
        let v = random_graded(ctx, g, 4);
        cases.ok(format!("seed {s}: (A (x) V)^nabla = V, dims {:?}", v.dims()), check_invariants_of_induced(&v));
        let e = random_flat(ctx, g, 4)?;
        cases.ok(format!("seed {s}: A (x) E^nabla = E, dims {:?}", e.dims()), check_induced_of_invariants(&e));
    }
    for s in 0..10 {
        let e = random_mic(ctx, params.n.max(1), g, 4)?;
        let flat = e.curvature_vanishes()?;
        let got = match nabla_invariants(&e) {
            Err(Error::NonzeroCurvature) => "rejected",
            Ok(_) => "accepted",
            Err(_) => "error",
        };
        cases.eq(format!("seed {s}: admissibility of a module with Higgs field"), &if flat { "accepted" } else { "rejected" }, &got);
        let mut bad = random_flat(ctx, g, 4)?;
        let ids: Vec<usize> = (0..bad.num_degrees()).filter(|&i| bad.dim(i) > 0).collect();
        let id = ids[g.gen_range(0..ids.len())];
        let gen = Gen::D { s: 0, i: 0 };
        let mut mats = bad.op(&gen).expect("flat modules carry D").clone();
        let (x, y) = (g.gen_range(0..bad.dim(id)), g.gen_range(0..bad.dim(id)));
        mats[id].add_at(x, y, 1);
        bad.set_op(gen, mats);
        cases.check(bad.validate().is_err(), format!("seed {s}: corrupted d table at degree {id}"), "rejected", "accepted");
    }
    let a = coefficient_module(Chart::base(ctx))?;
    let dim = nabla_invariants(&a.module).map(|(m, _)| m.total_dim());
    cases.eq("dim A^nabla", &"1".to_string(), &show(&dim));
    Ok(())
}

fn morita(ctx: LevelContext, cases: &mut Cases, g: &mut Rng8) -> Result<()> {
    for s in 0..20 {
        let f = random_flat(ctx, g, 4)?;
        let e = random_graded(ctx, g, 4);
        cases.ok(format!("seed {s}: Morita round trips, dims {:?} / {:?}", f.dims(), e.dims()), check_morita(&f, &e));
    }
    cases.ok("End(A) = scalars", check_endomorphisms_of_a(Chart::base(ctx)));
    Ok(())
}

fn pd_gamma(ctx: LevelContext, params: &SuiteParams, cases: &mut Cases) -> Result<()> {
    let n = params.deg as u32;
    let gamma = GammaTrunc::new(&ctx, n);
    let basis = gamma.basis();
    let p = ctx.p();
    for a in &basis {
        for b in &basis {
            let s = a.add(b);
            let got = gamma.mul(a, b);
            let want = if s.total() > n as u64 {
                None
            } else {
                let mut c = BigInt::one();
                for i in 0..ctx.r() {
                    c *= exact::binomial(s.get(i) as i64, a.get(i) as u64);
                }
                Some((s.clone(), big_mod(&c, p)))
            };
            cases.eq(format!("gamma{a} * gamma{b}"), &format!("{want:?}"), &format!("{got:?}"));
            cases.eq(format!("commutativity {a} {b}"), &format!("{:?}", gamma.mul(b, a)), &format!("{got:?}"));
            for c in &basis {
                if s.add(c).total() > n as u64 {
                    continue;
                }
                let f = ctx.fp();
                let left = gamma.mul(a, b).and_then(|(ab, x)| gamma.mul(&ab, c).map(|(t, y)| (t, f.mul(x, y))));
                let right = gamma.mul(b, c).and_then(|(bc, x)| gamma.mul(a, &bc).map(|(t, y)| (t, f.mul(x, y))));
                cases.eq(format!("associativity {a} {b} {c}"), &format!("{left:?}"), &format!("{right:?}"));
            }
        }
    }
    Ok(())
}

/// c_k oracle: -C(P,k)·q_k!/p mod p.
fn k_oracle(ctx: &LevelContext) -> Vec<u32> {
    let period = ctx.period();
    let p = ctx.p();
    let mut out = vec![0u32; period as usize + 1];
    for k in 1..=period {
        let v: BigInt = exact::binomial(period as i64, k) * exact::factorial(q_of(k, ctx));
        let pb = BigInt::from(p);
        debug_assert!((&v % &pb).is_zero());
        out[k as usize] = ctx.fp().neg(big_mod(&(v / pb), p));
    }
    out
}

fn check_k(ctx: LevelContext, n: u32, cases: &mut Cases) -> Result<i32> {
    let k = KModule::build(ctx, n)?;
    let oracle = k_oracle(&ctx);
    let f = ctx.fp();
    for (i, (&got, &want)) in k.constants.iter().zip(&oracle).enumerate().skip(1) {
        let want = if k.sign == 1 { want } else { f.neg(want) };
        cases.eq(format!("c_{i} (sign {})", k.sign), &want, &got);
    }
    cases.ok(format!("K curvature forms (A)=(B), N={n}"), k.check_curvature_forms());
    Ok(k.sign)
}

fn k_module(ctx: LevelContext, params: &SuiteParams, cases: &mut Cases) -> Result<Option<i32>> {
    let sign = check_k(ctx, params.n, cases)?;
    for n in 1..=3 {
        check_k(ctx, n, cases)?;
    }
    cases.eq("c_P for the chosen sign", &(1 % ctx.p()), &{
        let k = KModule::build(ctx, params.n)?;
        k.constants[ctx.period() as usize]
    });
    let (_, t, _) = k_a(ctx, params.n)?;
    cases.ok("K^A is a module", t.module.validate());
    let (_, t0, _) = k0_b(ctx, params.n)?;
    cases.ok("K^(0),B is a module", t0.module.validate());
    Ok(Some(sign))
}

fn splitting(ctx: LevelContext, params: &SuiteParams, cases: &mut Cases) -> Result<Option<i32>> {
    let sign = check_k(ctx, params.n, cases)?;
    for (d, (rank, want)) in splitting_ranks(ctx, params.n)?.into_iter().enumerate() {
        cases.eq(format!("splitting map rank in degree {d}"), &want, &rank);
    }
    let (k, t, _) = k_a(ctx, params.n)?;
    let p = ctx.p() as usize;
    cases.eq("rank of K over R_N", &p.pow((ctx.m() + 1) * ctx.r() as u32), &(t.module.total_dim() / k.basis.len()));
    Ok(Some(sign))
}

fn transform(ctx: LevelContext, params: &SuiteParams, cases: &mut Cases, g: &mut Rng8) -> Result<Option<i32>> {
    let n = params.n;
    let sign = check_k(ctx, n, cases)?;
    let top = ctx.period() as u32;
    for s in 0..20 {
        let e = random_higgs(ctx, n, g, 6);
        cases.ok(format!("seed {s}: C(C^-1(E')) = E', dims {:?}", e.dims()), check_transform_of_inverse(&e, n));
        let t = inverse_cartier(&e, n)?;
        let mut der = t.module.derived();
        for b in t.module.higgs_indices() {
            let mut fact = 1 % ctx.p();
            for v in b.iter() {
                let (val, unit) = factorial_val_unit(v as u64, ctx.p());
                fact = ctx.fp().mul(fact, if val > 0 { 0 } else { unit });
            }
            let h = t.module.op(&Gen::Higgs(b.clone())).expect("built");
            let mut ok = true;
            for id in 0..t.module.num_degrees() {
                ok &= der.multi(&b.scale(top), id)? == h[id].scale(fact);
            }
            cases.check(ok, format!("seed {s}: d[P b] = b! gamma[b] for b={b}"), "equal", "different");
        }
        let m = random_mic(ctx, n, g, 4)?;
        cases.ok(format!("seed {s}: C^-1(C(E)) = E, dims {:?}", m.dims()), check_inverse_of_transform(&m, n));
    }
    Ok(Some(sign))
}

fn frobenius(ctx: LevelContext, params: &SuiteParams, cases: &mut Cases, g: &mut Rng8) -> Result<()> {
    check_k(ctx, params.n, cases)?;
    for s in 0..10 {
        let fm = random_target(ctx, g, 3)?;
        cases.ok(format!("seed {s}: F(G(E')) = E', dims {:?}", fm.dims()), check_descend_of_ascend(&fm));
        let e = if s % 2 == 0 { random_mic(ctx, params.n, g, 4)? } else { random_flat(ctx, g, 4)? };
        cases.ok(format!("seed {s}: G(F(E)) = E, dims {:?}", e.dims()), check_ascend_of_descend(&e));
    }
    cases.ok("F(K^A) = K^(0),B", frobenius_of_k(ctx, params.n).map(|_| ()));
    let base = Chart::base(ctx);
    let target = Chart::frobenius_target(ctx);
    let pm = ctx.pm() as u32;
    for k in MultiIndex::all_with_total_at_most(ctx.r(), 2 * ctx.p()) {
        for _ in 0..10 {
            let x = rand_elem(&target, g, 3, 2, 2 * ctx.p() as i64);
            cases.eq(format!("d'{k} vs d{} on {x}", k.scale(pm)), &base.d_action(&k.scale(pm), &x), &target.d_action(&k, &x));
        }
    }
    Ok(())
}

fn compatibility(ctx: LevelContext, params: &SuiteParams, cases: &mut Cases, g: &mut Rng8) -> Result<()> {
    check_k(ctx, params.n, cases)?;
    for s in 0..10 {
        let e = random_mic(ctx, params.n, g, 4)?;
        cases.ok(format!("seed {s}: C(E) = C'(F(E)), dims {:?}", e.dims()), check_compatibility(&e, params.n));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_names() {
        let ctx = LevelContext::new(2, 0, 1).unwrap();
        assert!(matches!(run_suite("nope", ctx, &SuiteParams::defaults(&ctx)), Err(Error::UnknownSuite(_))));
        assert!(control_fault("nope").is_err());
        assert!(SUITES.iter().all(|s| control_fault(s).is_ok()));
    }

    #[test]
    fn lemma_passes_and_its_control_fails() {
        let ctx = LevelContext::new(2, 1, 1).unwrap();
        let params = SuiteParams::defaults(&ctx);
        assert!(run_suite("lemma-p^{m+1}", ctx, &params).unwrap().passed());
        let bad = ctx.with_fault(control_fault("lemma-p^{m+1}").unwrap());
        let r = run_suite("lemma-p^{m+1}", bad, &params).unwrap();
        assert!(r.cases_failed > 0);
        assert_eq!(r.params.fault.as_deref(), Some("perturb-mul-coeff"));
    }
}
