//! The named solvable lattice families: constructors from parameter tags
//! and a recognizer assigning any 3-dimensional solvable lattice over Zp
//! (p odd) its family, parameters, and an explicit isomorphism.

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::lie_core::{metabelian_from_matrix, LieLattice};
use crate::metabelian::{find_good_basis, GoodBasis};
use crate::padic::{PContext, PScalar, Val};
use crate::zmodlin::Mat;

/// Parameter tag naming a lattice presentation.
///
/// The rank-3 families are presented by their action matrix A on the
/// abelian ideal <x_1, x_2>, with [x_0, x_i] = sum_l A_{li} x_l:
/// L0: 0; L1(s): p^s I; L2(s,r,c): p^s [[1, p^r],[p^r c, 1]];
/// L3(s): [[0, p^s],[0, 0]]; L4(s,t,eps): p^s [[0, 1],[c, 0]] with
/// val(c) = t and square class eps; L5(s,r,c): p^s [[p^r, 1],[c, 0]];
/// L6(a): a I; L7(s,a,c): p^s [[a, 1],[c, 0]].
///
/// `LinChain` covers the higher-rank chains [x_0, x_{i+1}] = b_i x_i,
/// [x_0, x_1] = sum a_i x_i; `Homothety` the rank-d lattices with
/// [x_0, x_i] = a x_i.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FamilyTag {
    L0,
    L1 { s: u32 },
    L2 { s: u32, r: u32, c: PScalar },
    L3 { s: u32 },
    /// `c` is the exact antidiagonal scalar; t = val(c) and eps (0 square,
    /// 1 non-square unit part) are its classifying invariants.
    L4 { s: u32, t: u32, eps: u8, c: PScalar },
    L5 { s: u32, r: u32, c: PScalar },
    L6 { a: PScalar },
    L7 { s: u32, a: PScalar, c: PScalar },
    LinChain { a: Vec<PScalar>, b: Vec<PScalar> },
    Homothety { d: u32, a: PScalar },
}

impl FamilyTag {
    /// Canonical L4 tag with c = p^t rho^eps.
    pub fn l4(ctx: &PContext, s: u32, t: u32, eps: u8) -> Result<FamilyTag> {
        let rho = ctx.rho()?;
        let mut c = ctx.p_scalar(t as i64);
        if eps % 2 == 1 {
            c = &c * &rho;
        }
        Ok(FamilyTag::L4 { s, t, eps: eps % 2, c })
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            FamilyTag::L0 => "L0",
            FamilyTag::L1 { .. } => "L1",
            FamilyTag::L2 { .. } => "L2",
            FamilyTag::L3 { .. } => "L3",
            FamilyTag::L4 { .. } => "L4",
            FamilyTag::L5 { .. } => "L5",
            FamilyTag::L6 { .. } => "L6",
            FamilyTag::L7 { .. } => "L7",
            FamilyTag::LinChain { .. } => "Lab",
            FamilyTag::Homothety { .. } => "Ld",
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            FamilyTag::L0 => json!({"family": "L0"}),
            FamilyTag::L1 { s } => json!({"family": "L1", "s": s}),
            FamilyTag::L2 { s, r, c } => {
                json!({"family": "L2", "s": s, "r": r, "c": c.to_string()})
            }
            FamilyTag::L3 { s } => json!({"family": "L3", "s": s}),
            FamilyTag::L4 { s, t, eps, c } => {
                json!({"family": "L4", "s": s, "t": t, "eps": eps, "c": c.to_string()})
            }
            FamilyTag::L5 { s, r, c } => {
                json!({"family": "L5", "s": s, "r": r, "c": c.to_string()})
            }
            FamilyTag::L6 { a } => json!({"family": "L6", "a": a.to_string()}),
            FamilyTag::L7 { s, a, c } => {
                json!({"family": "L7", "s": s, "a": a.to_string(), "c": c.to_string()})
            }
            FamilyTag::LinChain { a, b } => json!({
                "family": "Lab",
                "a": a.iter().map(|x| x.to_string()).collect::<Vec<_>>(),
                "b": b.iter().map(|x| x.to_string()).collect::<Vec<_>>(),
            }),
            FamilyTag::Homothety { d, a } => {
                json!({"family": "Ld", "d": d, "a": a.to_string()})
            }
        }
    }

    pub fn from_json(ctx: &PContext, v: &Value) -> Result<FamilyTag> {
        let fam = v
            .get("family")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Parse("tag needs a \"family\" field".into()))?;
        let nat = |key: &str| -> Result<u32> {
            v.get(key)
                .and_then(Value::as_u64)
                .map(|x| x as u32)
                .ok_or_else(|| Error::Parse(format!("tag field {key:?} missing or not a number")))
        };
        let scalar = |key: &str| -> Result<PScalar> {
            v.get(key)
                .and_then(Value::as_str)
                .ok_or_else(|| Error::Parse(format!("tag field {key:?} missing or not a string")))?
                .parse()
        };
        Ok(match fam {
            "L0" => FamilyTag::L0,
            "L1" => FamilyTag::L1 { s: nat("s")? },
            "L2" => FamilyTag::L2 {
                s: nat("s")?,
                r: nat("r")?,
                c: scalar("c")?,
            },
            "L3" => FamilyTag::L3 { s: nat("s")? },
            "L4" => {
                let s = nat("s")?;
                let t = nat("t")?;
                let eps = nat("eps")? as u8;
                match scalar("c") {
                    Ok(c) => FamilyTag::L4 { s, t, eps, c },
                    Err(_) => FamilyTag::l4(ctx, s, t, eps)?,
                }
            }
            "L5" => FamilyTag::L5 {
                s: nat("s")?,
                r: nat("r")?,
                c: scalar("c")?,
            },
            "L6" => FamilyTag::L6 { a: scalar("a")? },
            "L7" => FamilyTag::L7 {
                s: nat("s")?,
                a: scalar("a")?,
                c: scalar("c")?,
            },
            "Lab" => {
                let list = |key: &str| -> Result<Vec<PScalar>> {
                    v.get(key)
                        .and_then(Value::as_array)
                        .ok_or_else(|| Error::Parse(format!("tag field {key:?} must be a list")))?
                        .iter()
                        .map(|e| {
                            e.as_str()
                                .ok_or_else(|| Error::Parse("list entries must be strings".into()))?
                                .parse()
                        })
                        .collect()
                };
                FamilyTag::LinChain {
                    a: list("a")?,
                    b: list("b")?,
                }
            }
            "Ld" => FamilyTag::Homothety {
                d: nat("d")?,
                a: scalar("a")?,
            },
            other => return Err(Error::UnknownFamily(other.to_string())),
        })
    }
}

/// The action matrix of a rank-3 tag.
pub fn action_matrix(ctx: &PContext, tag: &FamilyTag) -> Result<Mat> {
    let ps = |s: u32| ctx.p_scalar(s as i64);
    let require_zp = |x: &PScalar, name: &str| -> Result<()> {
        if ctx.val(x).is_integral() {
            Ok(())
        } else {
            Err(Error::OutOfDomain(format!("{name} = {x} is not in Zp")))
        }
    };
    let m = match tag {
        FamilyTag::L0 => Mat::zero(2, 2),
        FamilyTag::L1 { s } => Mat::identity(2).scale(&ps(*s)),
        FamilyTag::L2 { s, r, c } => {
            if *r < 1 {
                return Err(Error::OutOfDomain("L2 requires r >= 1".into()));
            }
            require_zp(c, "c")?;
            let pr = ps(*r);
            let rows = vec![
                vec![PScalar::one(), pr.clone()],
                vec![&pr * c, PScalar::one()],
            ];
            Mat::from_rows(rows)?.scale(&ps(*s))
        }
        FamilyTag::L3 { s } => {
            let mut m = Mat::zero(2, 2);
            m[(0, 1)] = ps(*s);
            m
        }
        FamilyTag::L4 { s, t, eps, c } => {
            ctx.require_odd()?;
            require_zp(c, "c")?;
            if ctx.val(c) != Val::Finite(*t as i64) {
                return Err(Error::OutOfDomain(format!("val(c) != t for c = {c}")));
            }
            let unit = ctx.unit_part(c)?;
            let square = ctx.is_square_unit(&unit)?;
            if square != (*eps == 0) {
                return Err(Error::OutOfDomain("square class of c disagrees with eps".into()));
            }
            let rows = vec![
                vec![PScalar::zero(), PScalar::one()],
                vec![c.clone(), PScalar::zero()],
            ];
            Mat::from_rows(rows)?.scale(&ps(*s))
        }
        FamilyTag::L5 { s, r, c } => {
            require_zp(c, "c")?;
            let rows = vec![
                vec![ps(*r), PScalar::one()],
                vec![c.clone(), PScalar::zero()],
            ];
            Mat::from_rows(rows)?.scale(&ps(*s))
        }
        FamilyTag::L6 { a } => {
            require_zp(a, "a")?;
            Mat::identity(2).scale(a)
        }
        FamilyTag::L7 { s, a, c } => {
            require_zp(a, "a")?;
            require_zp(c, "c")?;
            let rows = vec![
                vec![a.clone(), PScalar::one()],
                vec![c.clone(), PScalar::zero()],
            ];
            Mat::from_rows(rows)?.scale(&ps(*s))
        }
        _ => {
            return Err(Error::OutOfDomain(
                "higher-rank tag has no 2x2 action matrix".into(),
            ))
        }
    };
    Ok(m)
}

/// Builds the lattice a tag presents.
pub fn construct(ctx: &PContext, tag: &FamilyTag) -> Result<LieLattice> {
    match tag {
        FamilyTag::LinChain { a, b } => {
            let d = a.len();
            if d < 2 || b.len() + 1 != d {
                return Err(Error::OutOfDomain(format!(
                    "chain tag needs |a| = d >= 2 and |b| = d - 1, got {} and {}",
                    d,
                    b.len()
                )));
            }
            let mut m = Mat::zero(d, d);
            for (i, ai) in a.iter().enumerate() {
                if !ctx.val(ai).is_integral() {
                    return Err(Error::OutOfDomain(format!("a_{} = {ai} not in Zp", i + 1)));
                }
                m[(i, 0)] = ai.clone();
            }
            for (i, bi) in b.iter().enumerate() {
                if !ctx.val(bi).is_integral() {
                    return Err(Error::OutOfDomain(format!("b_{} = {bi} not in Zp", i + 1)));
                }
                m[(i, i + 1)] = bi.clone();
            }
            metabelian_from_matrix(ctx.clone(), &m)
        }
        FamilyTag::Homothety { d, a } => {
            if *d < 2 {
                return Err(Error::OutOfDomain("homothety tag needs d >= 2".into()));
            }
            if !ctx.val(a).is_integral() {
                return Err(Error::OutOfDomain(format!("a = {a} not in Zp")));
            }
            let m = Mat::identity(*d as usize - 1).scale(a);
            metabelian_from_matrix(ctx.clone(), &m)
        }
        _ => metabelian_from_matrix(ctx.clone(), &action_matrix(ctx, tag)?),
    }
}

/// Result of recognizing a rank-3 solvable lattice: the tag and an explicit
/// isomorphism T with construct(tag) -> L, column i the image of basis
/// vector i.
#[derive(Debug, Clone)]
pub struct Recognition {
    pub tag: FamilyTag,
    pub iso: Mat,
}

/// A vector v whose pair (v, Mv) is unimodular; exists whenever M is not
/// scalar modulo p.
fn cyclic_vector(ctx: &PContext, m: &Mat) -> Option<Vec<PScalar>> {
    let p = ctx.p();
    let mut candidates: Vec<Vec<PScalar>> = vec![
        vec![PScalar::one(), PScalar::zero()],
        vec![PScalar::zero(), PScalar::one()],
    ];
    for t in 1..p {
        candidates.push(vec![PScalar::one(), PScalar::from_int(t as i64)]);
    }
    for v in candidates {
        let mv = m.mul_vec(&v).ok()?;
        let det = &(&v[0] * &mv[1]) - &(&v[1] * &mv[0]);
        if ctx.val(&det) == Val::Finite(0) {
            return Some(v);
        }
    }
    None
}

/// Assigns a rank-3 solvable lattice its family tag, with an explicit
/// isomorphism from the constructed presentation onto L.
pub fn recognize(l: &LieLattice) -> Result<Recognition> {
    let ctx = l.ctx().clone();
    ctx.require_odd()?;
    if l.rank() != 3 {
        return Err(Error::OutOfDomain(format!(
            "recognizer handles rank 3, got {}",
            l.rank()
        )));
    }
    if !l.is_solvable() {
        return Err(Error::Unsolvable);
    }
    let gb = find_good_basis(l).ok_or(Error::Unsolvable)?;
    let a = gb.a().clone();
    if a.is_zero() {
        return finish(&ctx, &gb, FamilyTag::L0, PScalar::one(), Mat::identity(2));
    }
    let s = match a.min_val(&ctx) {
        Val::Finite(v) => v,
        Val::Infinity => unreachable!("nonzero matrix"),
    };
    let ap = a.scale(&ctx.p_scalar(-s));
    let s = s as u32;
    // exact scalar matrix: unit multiple of the identity
    if ap[(0, 1)].is_zero() && ap[(1, 0)].is_zero() && ap[(0, 0)] == ap[(1, 1)] {
        let alpha = ap[(0, 0)].clone();
        return finish(
            &ctx,
            &gb,
            FamilyTag::L1 { s },
            alpha.inv()?,
            Mat::identity(2),
        );
    }
    let tau = ap.trace();
    let delta = ap.det()?;
    match ctx.val(&tau) {
        Val::Infinity => {
            // traceless: companion form [[0,1],[-delta,0]]
            let v = cyclic_vector(&ctx, &ap).expect("non-scalar mod p");
            let pmat = companion_basis(&ap, &v)?;
            if delta.is_zero() {
                finish(&ctx, &gb, FamilyTag::L3 { s }, PScalar::one(), pmat)
            } else {
                let c = -&delta;
                let t = ctx.val(&c).finite().expect("nonzero") as u32;
                let eps = if ctx.is_square_unit(&ctx.unit_part(&c)?)? {
                    0
                } else {
                    1
                };
                finish(
                    &ctx,
                    &gb,
                    FamilyTag::L4 { s, t, eps, c },
                    PScalar::one(),
                    pmat,
                )
            }
        }
        Val::Finite(rtau) if rtau >= 1 => {
            // positive-valuation trace: rescale x0 so the trace is p^r
            let u = ctx.unit_part(&tau)?;
            let lambda = u.inv()?;
            let b = ap.scale(&lambda);
            let v = cyclic_vector(&ctx, &b).expect("traceless mod p, nonzero");
            let pmat = companion_basis(&b, &v)?;
            let c = -&b.det()?;
            finish(
                &ctx,
                &gb,
                FamilyTag::L5 {
                    s,
                    r: rtau as u32,
                    c,
                },
                lambda,
                pmat,
            )
        }
        Val::Finite(_) => {
            // unit trace: decide between the unipotent-perturbation family
            // and the r = 0 chain by how close A' is to scalar
            let half_tau = &tau * &PScalar::ratio(1, 2);
            let nmat = &ap - &Mat::identity(2).scale(&half_tau);
            let rstar = nmat.min_val(&ctx);
            match rstar {
                Val::Finite(0) => {
                    let lambda = tau.inv()?;
                    let b = ap.scale(&lambda);
                    let v = cyclic_vector(&ctx, &b).expect("min val 0 off scalar");
                    let pmat = companion_basis(&b, &v)?;
                    let c = -&b.det()?;
                    finish(&ctx, &gb, FamilyTag::L5 { s, r: 0, c }, lambda, pmat)
                }
                Val::Finite(rstar) => {
                    // B = (2/tau) A' = I + p^r M' with M' traceless of
                    // minimal valuation 0
                    let lambda = &PScalar::from_int(2) * &tau.inv()?;
                    let b = ap.scale(&lambda);
                    let mprime =
                        (&b - &Mat::identity(2)).scale(&ctx.p_scalar(-rstar));
                    let v = cyclic_vector(&ctx, &mprime).expect("traceless nonzero mod p");
                    let pmat = companion_basis(&mprime, &v)?;
                    let c = -&mprime.det()?;
                    finish(
                        &ctx,
                        &gb,
                        FamilyTag::L2 {
                            s,
                            r: rstar as u32,
                            c,
                        },
                        lambda,
                        pmat,
                    )
                }
                Val::Infinity => unreachable!("exact scalar handled above"),
            }
        }
    }
}

/// Columns (Mv, v): the basis in which M becomes [[tr, 1],[-det, 0]].
fn companion_basis(m: &Mat, v: &[PScalar]) -> Result<Mat> {
    let mv = m.mul_vec(v)?;
    Mat::from_columns(2, vec![mv, v.to_vec()])
}

/// Assembles the recognition: T = basis * blockdiag(lambda, P) and a final
/// exactness check that T intertwines the presentations.
fn finish(
    ctx: &PContext,
    gb: &GoodBasis,
    tag: FamilyTag,
    lambda: PScalar,
    pmat: Mat,
) -> Result<Recognition> {
    let mut block = Mat::zero(3, 3);
    block[(0, 0)] = lambda;
    for i in 0..2 {
        for j in 0..2 {
            block[(i + 1, j + 1)] = pmat[(i, j)].clone();
        }
    }
    let iso = gb.basis() * &block;
    let model = construct(ctx, &tag)?;
    if !model.is_isomorphism_to(gb.lattice(), &iso) {
        return Err(Error::ShapeMismatch(format!(
            "internal: recognized tag {tag:?} but the alignment map fails"
        )));
    }
    Ok(Recognition { tag, iso })
}

/// The residual-nilpotency table for the classification families.
pub fn residually_nilpotent(ctx: &PContext, tag: &FamilyTag) -> Result<bool> {
    Ok(match tag {
        FamilyTag::L0 => true,
        FamilyTag::L1 { s } => *s >= 1,
        FamilyTag::L2 { s, .. } => *s >= 1,
        FamilyTag::L3 { .. } => true,
        FamilyTag::L4 { s, t, .. } => *s >= 1 || *t >= 1,
        FamilyTag::L5 { s, r, c } => {
            *s >= 1 || (*r >= 1 && ctx.val(c) >= Val::Finite(1))
        }
        other => {
            return Err(Error::OutOfDomain(format!(
                "residual nilpotency table covers the classification families, got {}",
                other.family_name()
            )))
        }
    })
}
