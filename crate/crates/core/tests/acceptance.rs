//! Acceptance suite: one test per top-level claim, each printing a single
//! PASS/FAIL line. Run with `cargo test --test acceptance -- --nocapture`
//! to see the lines on success.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use zplie_core::families::{construct, recognize, FamilyTag};
use zplie_core::lie_core::new_lie;
use zplie_core::metabelian::good_basis_from_parts;
use zplie_core::oracle;
use zplie_core::padic::{PContext, PScalar, Val};
use zplie_core::selfsim::{
    certify, char_poly, decide_ss_index_3dim, hereditary_3dim, make_endo, shss_classify,
    simplicity, witness_nonss, SimplicityConfig, SimplicityVerdict,
};
use zplie_core::zmodlin::Mat;
use zplie_core::LieLattice;

fn report(name: &str, result: Result<(), String>) {
    match result {
        Ok(()) => println!("ACCEPTANCE {name}: PASS"),
        Err(msg) => {
            println!("ACCEPTANCE {name}: FAIL — {msg}");
            panic!("{name}: {msg}");
        }
    }
}

/// All rank-3 tags with parameters in the agreed sweep, for one prime.
fn sweep_tags(ctx: &PContext) -> Vec<FamilyTag> {
    let p = ctx.p() as i64;
    let unit = PScalar::from_int(2); // non-square unit at p = 3, 5
    let mut tags = vec![FamilyTag::L0];
    for s in 0..3u32 {
        tags.push(FamilyTag::L1 { s });
        tags.push(FamilyTag::L3 { s });
    }
    for s in 0..3u32 {
        for r in 1..3u32 {
            for c in [
                PScalar::one(),
                unit.clone(),
                PScalar::from_int(p),
                &PScalar::from_int(p) * &unit,
                PScalar::from_int(p * p),
            ] {
                tags.push(FamilyTag::L2 { s, r, c });
            }
        }
    }
    for s in 0..3u32 {
        for t in 0..3u32 {
            for eps in 0..2u8 {
                tags.push(FamilyTag::l4(ctx, s, t, eps).unwrap());
            }
        }
    }
    for s in 0..2u32 {
        for r in 0..3u32 {
            for c in [
                PScalar::one(),
                unit.clone(),
                PScalar::from_int(p),
                PScalar::from_int(p * p),
                // residues that move val(4c+1) through 0, 1, 2
                PScalar::from_int(5),
                PScalar::from_int((p - 1) / 2),
                PScalar::from_int((p * p - 1) / 4 * if p == 3 { 2 } else { 1 }),
            ] {
                tags.push(FamilyTag::L5 { s, r, c });
            }
        }
    }
    for a in [PScalar::zero(), PScalar::one(), PScalar::from_int(p)] {
        tags.push(FamilyTag::L6 { a });
    }
    for s in 0..2u32 {
        for a in [PScalar::zero(), PScalar::one(), PScalar::from_int(p)] {
            for c in [PScalar::one(), unit.clone(), PScalar::from_int(p)] {
                tags.push(FamilyTag::L7 {
                    s,
                    a: a.clone(),
                    c,
                });
            }
        }
    }
    tags
}

/// Criterion 1: the decision procedure and the certificate constructions
/// agree on the whole parameter sweep, with zero inconclusive outcomes.
#[test]
fn acceptance_1_decision_vs_certificates() {
    report("1 decision-vs-certificates", (|| {
        for p in [3u64, 5] {
            let ctx = PContext::new(p).unwrap();
            for tag in sweep_tags(&ctx) {
                let l = construct(&ctx, &tag)
                    .map_err(|e| format!("construct {tag:?}: {e}"))?;
                let d = decide_ss_index_3dim(&l)
                    .map_err(|e| format!("decide {tag:?}: {e}"))?;
                let verdict = simplicity(&d.endo, SimplicityConfig::default());
                if !verdict.is_simple() {
                    return Err(format!(
                        "certificate for {tag:?} (index exp {}) not simple: {:?}",
                        d.index_exp, verdict
                    ));
                }
                match d.index_exp {
                    1 => {
                        if d.obstruction.is_some() {
                            return Err(format!("{tag:?}: index p with an obstruction"));
                        }
                    }
                    2 => {
                        if d.obstruction.is_none() {
                            return Err(format!("{tag:?}: index p^2 without obstruction"));
                        }
                        // no index-p certificate may exist for these
                        if certify(&ctx, &d.tag, 1).is_ok() {
                            return Err(format!(
                                "{tag:?}: decision p^2 but an index-p certificate exists"
                            ));
                        }
                    }
                    other => return Err(format!("{tag:?}: unexpected index exp {other}")),
                }
            }
        }
        Ok(())
    })());
}

/// Representative p = 3 tags for the coverage runs, with the decided index.
fn oracle_tags(ctx: &PContext) -> Vec<(FamilyTag, u32)> {
    let p3 = PScalar::from_int(3);
    let mut out: Vec<(FamilyTag, u32)> = vec![
        (FamilyTag::L0, 1),
        (FamilyTag::L1 { s: 0 }, 1),
        (FamilyTag::L1 { s: 1 }, 1),
        (FamilyTag::L2 { s: 0, r: 1, c: p3.clone() }, 1),
        (FamilyTag::L2 { s: 1, r: 1, c: p3.clone() }, 1),
        (FamilyTag::l4(ctx, 0, 1, 0).unwrap(), 1),
        (FamilyTag::l4(ctx, 0, 0, 0).unwrap(), 1),
        (FamilyTag::L5 { s: 0, r: 1, c: p3.clone() }, 1),
        (FamilyTag::L5 { s: 0, r: 0, c: PScalar::from_int(5) }, 1),
        (FamilyTag::L3 { s: 0 }, 2),
        (FamilyTag::L3 { s: 1 }, 2),
        (FamilyTag::L2 { s: 0, r: 1, c: PScalar::one() }, 2),
        (FamilyTag::L2 { s: 0, r: 1, c: PScalar::from_int(9) }, 2),
        (FamilyTag::l4(ctx, 0, 0, 1).unwrap(), 2),
        (FamilyTag::l4(ctx, 0, 2, 0).unwrap(), 2),
        (FamilyTag::L5 { s: 0, r: 1, c: PScalar::one() }, 2),
        (FamilyTag::L5 { s: 0, r: 0, c: PScalar::one() }, 2),
    ];
    // sanity: the declared indices match the decision procedure
    for (tag, exp) in &mut out {
        let l = construct(ctx, tag).unwrap();
        assert_eq!(
            decide_ss_index_3dim(&l).unwrap().index_exp,
            *exp,
            "decided index changed for {tag:?}"
        );
    }
    out
}

/// Criterion 2: the level-2 coverage search corroborates every decision at
/// p = 3 — full coverage for the p^2 verdicts, a refutation for the rest.
#[test]
fn acceptance_2_oracle_corroboration() {
    report("2 oracle-corroboration", (|| {
        let ctx = PContext::new(3).unwrap();
        for (tag, exp) in oracle_tags(&ctx) {
            let l = construct(&ctx, &tag).unwrap();
            let rep = oracle::exhaust(&l, 2, &[])
                .map_err(|e| format!("exhaust {tag:?}: {e}"))?;
            if exp == 2 {
                if !rep.covered || rep.refuted {
                    return Err(format!(
                        "{tag:?}: expected full coverage, got covered={} refuted={}",
                        rep.covered, rep.refuted
                    ));
                }
            } else if rep.covered || !rep.refuted {
                return Err(format!(
                    "{tag:?}: expected a lifted refutation, got covered={} refuted={}",
                    rep.covered, rep.refuted
                ));
            }
        }
        Ok(())
    })());
}

/// Criterion 3: the explicit certificate constructions all validate and are
/// certified simple without hitting the fixpoint budget.
#[test]
fn acceptance_3_certificate_suite() {
    report("3 certificate-suite", (|| {
        let mut cases: Vec<(u64, FamilyTag, i64)> = Vec::new();
        for p in [3u64, 5] {
            let pp = PScalar::from_int(p as i64);
            // rank-3 constructions at several index exponents
            for k in 1..=3i64 {
                cases.push((p, FamilyTag::L6 { a: PScalar::zero() }, k));
                cases.push((p, FamilyTag::L6 { a: PScalar::one() }, k));
                cases.push((p, FamilyTag::L2 { s: 0, r: 1, c: pp.clone() }, k));
                cases.push((p, FamilyTag::L7 { s: 0, a: pp.clone(), c: pp.clone() }, k));
                cases.push((p, FamilyTag::L7 { s: 1, a: PScalar::zero(), c: PScalar::one() }, k));
                // a unit a with val(4c + a^2) = 1, the split-eigenline case
                let c = if p == 3 { 5 } else { 1 };
                cases.push((
                    p,
                    FamilyTag::L7 { s: 0, a: PScalar::one(), c: PScalar::from_int(c) },
                    k,
                ));
            }
            // codimension-one abelian chains, d <= 4, k <= 2
            for d in 2..=4usize {
                for k in 1..=2i64 {
                    let a: Vec<PScalar> =
                        (0..d).map(|i| if i + 1 == d { pp.clone() } else { PScalar::zero() }).collect();
                    let b = vec![PScalar::one(); d - 1];
                    cases.push((p, FamilyTag::LinChain { a, b }, k));
                }
            }
            // homothety lattices, d <= 5, k <= 3
            for d in 2..=5u32 {
                for k in 1..=3i64 {
                    for a in [PScalar::zero(), PScalar::one(), pp.clone()] {
                        cases.push((p, FamilyTag::Homothety { d, a }, k));
                    }
                }
            }
        }
        for (p, tag, k) in cases {
            let ctx = PContext::new(p).unwrap();
            let endo = certify(&ctx, &tag, k)
                .map_err(|e| format!("certify {tag:?} k={k} p={p}: {e}"))?;
            match simplicity(&endo, SimplicityConfig::default()) {
                SimplicityVerdict::Simple { .. } => {}
                other => {
                    return Err(format!(
                        "{tag:?} k={k} p={p}: verdict {other:?}"
                    ))
                }
            }
        }
        Ok(())
    })());
}

fn random_tag(rng: &mut ChaCha8Rng, ctx: &PContext) -> FamilyTag {
    let p = ctx.p() as i64;
    let unit = |rng: &mut ChaCha8Rng| loop {
        let x = rng.gen_range(-9i64..10);
        if x != 0 && x % p != 0 {
            return PScalar::from_int(x);
        }
    };
    let zp = |rng: &mut ChaCha8Rng| PScalar::from_int(rng.gen_range(-9i64..10));
    match rng.gen_range(0..8) {
        0 => FamilyTag::L0,
        1 => FamilyTag::L1 { s: rng.gen_range(0..3) },
        2 => FamilyTag::L2 { s: rng.gen_range(0..3), r: rng.gen_range(1..3), c: zp(rng) },
        3 => FamilyTag::L3 { s: rng.gen_range(0..3) },
        4 => FamilyTag::l4(ctx, rng.gen_range(0..3), rng.gen_range(0..3), rng.gen_range(0..2))
            .unwrap(),
        5 => FamilyTag::L5 { s: rng.gen_range(0..3), r: rng.gen_range(0..3), c: zp(rng) },
        6 => FamilyTag::L6 { a: zp(rng) },
        _ => FamilyTag::L7 { s: rng.gen_range(0..3), a: zp(rng), c: unit(rng) },
    }
}

/// Random basis-change matrix in GL_3(Zp): integral entries with valuation
/// up to 2, unit determinant.
fn random_basis_change(rng: &mut ChaCha8Rng, ctx: &PContext, n: usize) -> Mat {
    let p = ctx.p() as i64;
    loop {
        let m = Mat::from_rows(
            (0..n)
                .map(|_| {
                    (0..n)
                        .map(|_| {
                            let u = PScalar::from_int(rng.gen_range(-6i64..7));
                            let v = [0, 0, 0, 1, 2][rng.gen_range(0..5)];
                            &u * &PScalar::from_int(p.pow(v))
                        })
                        .collect()
                })
                .collect(),
        )
        .unwrap();
        if let Ok(d) = m.det() {
            if ctx.val(&d) == Val::Finite(0) {
                return m;
            }
        }
    }
}

fn conjugate(l: &LieLattice, t: &Mat) -> LieLattice {
    let n = l.rank();
    let tinv = t.inverse().unwrap();
    let mut sc = vec![vec![vec![PScalar::zero(); n]; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let br = l.bracket(&t.col(i), &t.col(j)).unwrap();
            sc[i][j] = tinv.mul_vec(&br).unwrap();
        }
    }
    new_lie(l.ctx().clone(), sc).unwrap()
}

/// Criterion 4: classification round-trip under random basis changes, with
/// an explicitly verified isomorphism every time.
#[test]
fn acceptance_4_classification_round_trip() {
    report("4 classification-round-trip", (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(401);
        let mut count = 0usize;
        while count < 100 {
            let p = if count % 2 == 0 { 3u64 } else { 5 };
            let ctx = PContext::new(p).unwrap();
            let tag = random_tag(&mut rng, &ctx);
            let l = match construct(&ctx, &tag) {
                Ok(l) => l,
                Err(_) => continue,
            };
            for _ in 0..10 {
                let t = random_basis_change(&mut rng, &ctx, 3);
                let moved = conjugate(&l, &t);
                let rec = recognize(&moved)
                    .map_err(|e| format!("recognize {tag:?}: {e}"))?;
                let model = construct(&ctx, &rec.tag).unwrap();
                if !model.is_isomorphism_to(&moved, &rec.iso) {
                    return Err(format!(
                        "{tag:?}: recognized {:?} but the isomorphism does not verify",
                        rec.tag
                    ));
                }
            }
            count += 1;
        }
        Ok(())
    })());
}

/// Criterion 5: the strong-hereditary classification and the hereditary
/// decision procedure.
#[test]
fn acceptance_5_hereditary_classification() {
    report("5 hereditary-classification", (|| {
        let ctx = PContext::new(3).unwrap();
        // positive side: homothety lattices for d <= 6, s <= 3
        for d in 2..=6u32 {
            for s in 0..=3i64 {
                let tag = FamilyTag::Homothety { d, a: ctx.p_scalar(s) };
                let l = construct(&ctx, &tag).unwrap();
                let rep = shss_classify(&l).map_err(|e| format!("shss {tag:?}: {e}"))?;
                if rep.s != Some(Val::Finite(s)) {
                    return Err(format!("{tag:?}: shss returned {:?}", rep.s));
                }
            }
        }
        // negative side: random non-homothety metabelian lattices with a
        // verified witness subalgebra
        let mut rng = ChaCha8Rng::seed_from_u64(505);
        let mut count = 0usize;
        while count < 50 {
            let tag = random_tag(&mut rng, &ctx);
            // keep only invertible non-scalar actions (s = 0, unit c):
            // those always admit a realigned chain witness
            let ok = match &tag {
                FamilyTag::L2 { s: 0, c, .. } | FamilyTag::L5 { s: 0, r: 0, c } => {
                    ctx.val(c) == Val::Finite(0)
                }
                FamilyTag::L7 { s: 0, c, .. } => ctx.val(c) == Val::Finite(0),
                FamilyTag::L4 { s: 0, t: 0, .. } => true,
                _ => false,
            };
            if !ok {
                continue;
            }
            let l = conjugate(
                &construct(&ctx, &tag).unwrap(),
                &random_basis_change(&mut rng, &ctx, 3),
            );
            let rep = shss_classify(&l).map_err(|e| format!("shss {tag:?}: {e}"))?;
            if rep.s.is_some() {
                return Err(format!("{tag:?}: classified as strongly hereditary"));
            }
            let w = rep
                .witness
                .ok_or_else(|| format!("{tag:?}: no witness returned"))?;
            let (sub, _) = l.restrict(&w).map_err(|e| format!("restrict: {e}"))?;
            let d = decide_ss_index_3dim(&sub)
                .map_err(|e| format!("decide witness of {tag:?}: {e}"))?;
            if d.index_exp != 2 {
                return Err(format!(
                    "{tag:?}: witness subalgebra still has index-p self-similarity"
                ));
            }
            count += 1;
        }
        // hereditary is exactly L0 and L1
        for p in [3u64, 5] {
            let ctx = PContext::new(p).unwrap();
            for tag in sweep_tags(&ctx) {
                let l = construct(&ctx, &tag).unwrap();
                let rep = hereditary_3dim(&l)
                    .map_err(|e| format!("hereditary {tag:?}: {e}"))?;
                let expect = matches!(rep.tag, FamilyTag::L0 | FamilyTag::L1 { .. });
                if rep.hereditary != expect {
                    return Err(format!(
                        "{tag:?}: hereditary={} but recognized family is {:?}",
                        rep.hereditary, rep.tag
                    ));
                }
                if !rep.hereditary && rep.witness.is_none() {
                    return Err(format!("{tag:?}: non-hereditary without witness"));
                }
            }
        }
        Ok(())
    })());
}

/// Criterion 6: the chain-witness construction — exponent inequalities,
/// mechanically re-checked hypotheses, and coverage of the witness.
#[test]
fn acceptance_6_chain_witness() {
    report("6 chain-witness", (|| {
        let ctx = PContext::new(3).unwrap();
        for d in [3usize, 4] {
            let a: Vec<PScalar> = (0..d)
                .map(|i| if i + 1 == d { ctx.p_scalar(1) } else { PScalar::zero() })
                .collect();
            let b = vec![PScalar::one(); d - 1];
            let tag = FamilyTag::LinChain { a, b };
            let l = construct(&ctx, &tag).unwrap();
            let w = witness_nonss(&l).map_err(|e| format!("witness d={d}: {e}"))?;
            // exponents: k_0 on x_0, k_i on x_i
            let exps = w.pivot_exps().to_vec();
            let k0 = exps[0];
            let k1 = exps[1];
            for (i, &ki) in exps.iter().enumerate().skip(1) {
                if k0 + k1 - ki <= (i as i64) - 1 {
                    return Err(format!(
                        "d={d}: exponent inequality fails at i={i}: {exps:?}"
                    ));
                }
            }
            // re-derive the induced chain on the witness basis and re-check
            // the hypotheses it must satisfy
            let (sub, _) = l.restrict(&w).map_err(|e| format!("restrict: {e}"))?;
            let gb = good_basis_from_parts(&sub, Mat::identity(d + 1))
                .map_err(|e| format!("good basis: {e}"))?;
            let bmat = gb.a();
            let v = |x: &PScalar| ctx.val(x);
            for i in 0..d - 1 {
                // subdiagonal of the chain and the first column
                let bi = v(&bmat[(i, i + 1)]);
                let ai = v(&bmat[(i, 0)]);
                if i + 1 < d - 1 {
                    let bnext = v(&bmat[(i + 1, i + 2)]);
                    if bi >= bnext {
                        return Err(format!("d={d}: v(b_{}) >= v(b_{})", i + 1, i + 2));
                    }
                }
                if i >= 1 && bi >= ai {
                    return Err(format!("d={d}: v(b_{0}) >= v(a_{0})", i + 1));
                }
            }
            let blast = v(&bmat[(d - 2, d - 1)]);
            let alast = v(&bmat[(d - 1, 0)]);
            match (blast, alast) {
                (Val::Finite(bv), Val::Finite(av)) if bv + 1 < av => {}
                (Val::Finite(bv), Val::Infinity) => {
                    let _ = bv;
                }
                other => return Err(format!("d={d}: tail hypothesis fails: {other:?}")),
            }
            // the witness is not self-similar of index p: full coverage by
            // stabilized ideals. The witness subalgebras are abelian to
            // high depth, so almost every matrix solves the level-2
            // congruences and the level-2 walk space is astronomically
            // large; level 1 is the deepest exhaustive check that
            // completes, and it already separates these from the refuted
            // families above.
            let rep = oracle::exhaust(&sub, 1, &[])
                .map_err(|e| format!("exhaust witness d={d}: {e}"))?;
            if !rep.covered || rep.refuted {
                return Err(format!(
                    "d={d}: witness coverage failed: covered={} refuted={}",
                    rep.covered, rep.refuted
                ));
            }
        }
        Ok(())
    })());
}

/// Criterion 7: counting identities and the abelian simplicity criterion
/// against an independent slope computation plus witness validation.
#[test]
fn acceptance_7_counting_and_abelian() {
    report("7 counting-and-abelian", (|| {
        for p in [3u64, 5] {
            let ctx = PContext::new(p).unwrap();
            for n in 1..=5usize {
                let got = oracle::enum_index_p(&ctx, n).len() as u64;
                let want = (p.pow(n as u32) - 1) / (p - 1);
                if got != want {
                    return Err(format!("p={p} n={n}: {got} shapes, expected {want}"));
                }
            }
        }
        // abelian endos of rank <= 2: the engine's verdict must agree with
        // a hand-rolled Newton-hull slope test, and every not-simple verdict
        // must carry a mechanically valid witness
        let mut rng = ChaCha8Rng::seed_from_u64(707);
        let mut done = 0usize;
        while done < 200 {
            let p = if done % 2 == 0 { 3u64 } else { 5 };
            let ctx = PContext::new(p).unwrap();
            let n = 1 + done % 2; // ranks 1 and 2
            let l = new_lie(ctx.clone(), vec![vec![vec![PScalar::zero(); n]; n]; n]).unwrap();
            let mut u = Mat::zero(n, n);
            let mut f = Mat::zero(n, n);
            for i in 0..n {
                for j in 0..n {
                    u[(i, j)] = PScalar::from_int(rng.gen_range(-8i64..9));
                    f[(i, j)] = PScalar::from_int(rng.gen_range(-8i64..9));
                }
            }
            let endo = match make_endo(&l, u, f) {
                Ok(e) => e,
                Err(_) => continue, // singular U: resample
            };
            let verdict = simplicity(&endo, SimplicityConfig::default());
            let slopes_nonneg = hull_has_nonneg_slope(&ctx, &endo.phi())?;
            match verdict {
                SimplicityVerdict::Simple { .. } => {
                    if slopes_nonneg {
                        return Err(format!(
                            "rank {n} p={p}: simple verdict but a slope >= 0 exists"
                        ));
                    }
                }
                SimplicityVerdict::NotSimple { witness } => {
                    if !slopes_nonneg {
                        return Err(format!(
                            "rank {n} p={p}: not-simple verdict with all slopes < 0"
                        ));
                    }
                    // mechanical witness validation
                    let ctxr = l.ctx();
                    if witness.is_zero()
                        || !witness.is_subset(ctxr, endo.domain())
                        || !phi_stabilizes(&endo.phi(), &witness, ctxr)
                    {
                        return Err(format!("rank {n} p={p}: invalid witness"));
                    }
                }
                SimplicityVerdict::Inconclusive { reason } => {
                    // the one legitimate inconclusive case: a nonnegative
                    // slope whose eigenvalue is irrational over Q, so no
                    // invariant lattice has rational coordinates at all
                    let poly = char_poly(&endo.phi()).map_err(|e| e.to_string())?;
                    let cs = poly.coeffs();
                    let representable = n == 2
                        && is_rational_square(&(&(&cs[1] * &cs[1]) - &(&PScalar::from_int(4) * &cs[0])));
                    if !slopes_nonneg || n != 2 || representable {
                        return Err(format!("rank {n} p={p}: inconclusive ({reason})"));
                    }
                }
            }
            done += 1;
        }
        Ok(())
    })());
}

/// Independent check for an eigenvalue of nonnegative valuation: on the
/// points (i, val c_i) of the characteristic polynomial, such a root exists
/// exactly when some later point sits at or below the constant term.
fn hull_has_nonneg_slope(ctx: &PContext, phi: &Mat) -> Result<bool, String> {
    let poly = char_poly(phi).map_err(|e| e.to_string())?;
    let coeffs = poly.coeffs();
    let v0 = ctx.val(&coeffs[0]);
    Ok(coeffs.iter().skip(1).any(|c| ctx.val(c) <= v0))
}

/// Whether a rational number is the square of a rational.
fn is_rational_square(x: &PScalar) -> bool {
    use num::Signed;
    if x.numer().is_negative() {
        return false;
    }
    let (n, d) = (x.numer().magnitude(), x.denom().magnitude());
    &n.sqrt() * &n.sqrt() == *n && &d.sqrt() * &d.sqrt() == *d
}

fn phi_stabilizes(
    phi: &Mat,
    w: &zplie_core::zmodlin::Submodule,
    ctx: &PContext,
) -> bool {
    let img = phi * w.basis();
    let cols: Vec<Vec<PScalar>> = (0..img.cols()).map(|j| img.col(j)).collect();
    cols.iter()
        .all(|c| zplie_core::zmodlin::member(ctx, c, w))
}
