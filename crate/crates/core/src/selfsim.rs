//! Virtual endomorphisms of Lie lattices, the simplicity engine, explicit
//! self-similarity certificates, and the decision procedures built on them.

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::families::{construct, recognize, FamilyTag};
use crate::lie_core::LieLattice;
use crate::metabelian::{find_good_basis, GoodBasis};
use crate::padic::{
    has_monic_integral_irreducible_factor, FactorVerdict, PContext, PPoly, PScalar, Val,
};
use crate::zmodlin::{self, Mat, Submodule};

/// A homomorphism of algebras phi: M -> L defined on a finite-index
/// subalgebra M. U's columns are the chosen basis of M; F's column j is
/// phi of U's column j, in ambient coordinates.
#[derive(Debug, Clone)]
pub struct VirtualEndo {
    l: LieLattice,
    m: Submodule,
    u: Mat,
    f: Mat,
    index_exp: i64,
}

impl VirtualEndo {
    pub fn lattice(&self) -> &LieLattice {
        &self.l
    }

    pub fn domain(&self) -> &Submodule {
        &self.m
    }

    pub fn u(&self) -> &Mat {
        &self.u
    }

    pub fn f(&self) -> &Mat {
        &self.f
    }

    /// log_p of the index of M in L.
    pub fn index_exp(&self) -> i64 {
        self.index_exp
    }

    /// The rational matrix of phi on ambient coordinates.
    pub fn phi(&self) -> Mat {
        &self.f * &self.u.inverse().expect("U validated invertible")
    }

    pub fn to_json(&self) -> Value {
        json!({"U": self.u.to_json_columns(), "F": self.f.to_json_columns()})
    }

    pub fn from_json(l: &LieLattice, v: &Value) -> Result<VirtualEndo> {
        let n = l.rank();
        let u = Mat::from_json_columns(
            n,
            v.get("U")
                .ok_or_else(|| Error::Parse("endo needs \"U\"".into()))?,
        )?;
        let f = Mat::from_json_columns(
            n,
            v.get("F")
                .ok_or_else(|| Error::Parse("endo needs \"F\"".into()))?,
        )?;
        make_endo(l, u, f)
    }
}

/// Validates (L, U, F) as a virtual endomorphism.
pub fn make_endo(l: &LieLattice, u: Mat, f: Mat) -> Result<VirtualEndo> {
    let n = l.rank();
    let ctx = l.ctx();
    if u.rows() != n || u.cols() != n || f.rows() != n || f.cols() != n {
        return Err(Error::RankMismatch(u.rows(), n));
    }
    if !f.is_integral(ctx) {
        return Err(Error::MalformedMatrix("image entry outside Zp".into()));
    }
    let m = zmodlin::hnf(ctx, &u)?;
    if m.rank() != n {
        return Err(Error::Singular);
    }
    // subalgebra check on the generator pairs, reporting the offending pair
    for i in 0..n {
        for j in i + 1..n {
            let br = l.bracket(&u.col(i), &u.col(j))?;
            if !m.contains(ctx, &br) {
                return Err(Error::NotSubalgebra(i, j));
            }
        }
    }
    // homomorphism: [phi(u_i), phi(u_j)] = phi([u_i, u_j])
    let uinv = u.inverse()?;
    let phi = &f * &uinv;
    for i in 0..n {
        for j in i + 1..n {
            let br = l.bracket(&u.col(i), &u.col(j))?;
            let lhs = phi.mul_vec(&br)?;
            let rhs = l.bracket(&f.col(i), &f.col(j))?;
            if lhs != rhs {
                return Err(Error::NotHomomorphism(i, j));
            }
        }
    }
    let index_exp = match zmodlin::index(ctx, &m) {
        Val::Finite(e) => e,
        Val::Infinity => return Err(Error::Singular),
    };
    Ok(VirtualEndo {
        l: l.clone(),
        m,
        u,
        f,
        index_exp,
    })
}

/// The chain D_0 = M, D_{k+1} = {x in M : phi(x) in D_k}.
#[derive(Debug, Clone)]
pub struct DomainChain {
    pub chain: Vec<Submodule>,
    /// set when iso(D_k) repeats on two consecutive steps
    pub stabilized_isolator: Option<Submodule>,
}

pub fn domain_chain(endo: &VirtualEndo, n: usize) -> Result<DomainChain> {
    let ctx = endo.l.ctx();
    let phi = endo.phi();
    let mut chain = vec![endo.m.clone()];
    let mut stabilized = None;
    for _ in 0..n {
        let last = chain.last().expect("nonempty");
        let next = zmodlin::preimage(ctx, &phi, last, &endo.m)?;
        if stabilized.is_none() {
            let a = zmodlin::isolator(ctx, last);
            let b = zmodlin::isolator(ctx, &next);
            if a == b {
                stabilized = Some(a);
            }
        }
        chain.push(next);
    }
    Ok(DomainChain {
        chain,
        stabilized_isolator: stabilized,
    })
}

/// Outcome of the simplicity analysis: simple means no nonzero ideal I of L
/// with I contained in M and phi(I) contained in I.
#[derive(Debug, Clone)]
pub enum SimplicityVerdict {
    Simple { strategy: &'static str },
    NotSimple { witness: Submodule },
    Inconclusive { reason: String },
}

impl SimplicityVerdict {
    pub fn is_simple(&self) -> bool {
        matches!(self, SimplicityVerdict::Simple { .. })
    }

    pub fn to_json(&self) -> Value {
        match self {
            SimplicityVerdict::Simple { strategy } => {
                json!({"status": "simple", "strategy": strategy})
            }
            SimplicityVerdict::NotSimple { witness } => json!({
                "status": "not-simple",
                "witness": witness.basis().to_json_columns(),
            }),
            SimplicityVerdict::Inconclusive { reason } => {
                json!({"status": "inconclusive", "reason": reason})
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SimplicityConfig {
    /// step budget for the integral fixpoint strategy
    pub cap: usize,
}

impl Default for SimplicityConfig {
    fn default() -> Self {
        SimplicityConfig { cap: 40 }
    }
}

/// Characteristic polynomial of a rational square matrix, coefficients in
/// ascending degree order (Faddeev-LeVerrier, exact arithmetic).
pub fn char_poly(m: &Mat) -> Result<PPoly> {
    let n = m.rows();
    if m.cols() != n {
        return Err(Error::MalformedMatrix("characteristic of non-square".into()));
    }
    let mut coeffs = vec![PScalar::zero(); n + 1];
    coeffs[n] = PScalar::one();
    let mut w = Mat::identity(n);
    for k in 1..=n {
        w = m * &w;
        let c = -&(&w.trace() * &PScalar::ratio(1, k as i64));
        for i in 0..n {
            w[(i, i)] += &c;
        }
        coeffs[n - k] = c;
    }
    PPoly::new(coeffs)
}

fn validate_witness(endo: &VirtualEndo, w: &Submodule) -> bool {
    let ctx = endo.l.ctx();
    if w.is_zero() || !w.is_subset(ctx, &endo.m) {
        return false;
    }
    let lw = match endo.l.bracket_modules(&endo.l.full_module(), w) {
        Ok(x) => x,
        Err(_) => return false,
    };
    if !lw.is_subset(ctx, w) {
        return false;
    }
    let phi = endo.phi();
    (0..w.rank()).all(|j| {
        phi.mul_vec(&w.basis().col(j))
            .map(|img| w.contains(ctx, &img))
            .unwrap_or(false)
    })
}

/// Whether a monic rational polynomial has all Newton slopes negative
/// (equivalently, no monic irreducible factor with Zp coefficients).
fn no_nonneg_slope(ctx: &PContext, poly: &PPoly) -> Result<bool> {
    Ok(matches!(
        has_monic_integral_irreducible_factor(ctx, poly)?,
        FactorVerdict::Absent
    ))
}

/// Greatest phi- and ad-invariant saturated submodule (the Qp-obstruction
/// space); zero means no nonzero invariant ideal subspace exists.
fn rational_core(endo: &VirtualEndo) -> Result<Submodule> {
    let ctx = endo.l.ctx();
    let n = endo.l.rank();
    let phi = endo.phi();
    // clear denominators: invariance of a saturated module is unchanged
    let e = match phi.min_val(ctx) {
        Val::Finite(v) if v < 0 => -v,
        _ => 0,
    };
    let phi_int = phi.scale(&ctx.p_scalar(e));
    let mut v = Submodule::full(ctx, n);
    loop {
        if v.is_zero() {
            return Ok(v);
        }
        let mut next = zmodlin::preimage(ctx, &phi_int, &v, &v)?;
        for i in 0..n {
            let mut ei = vec![PScalar::zero(); n];
            ei[i] = PScalar::one();
            let ad = endo.l.adjoint(&ei)?;
            next = zmodlin::intersect(ctx, &next, &zmodlin::preimage(ctx, &ad, &v, &v)?)?;
        }
        let next = zmodlin::isolator(ctx, &next);
        if next == v {
            return Ok(v);
        }
        v = next;
    }
}

/// NotSimple witness for an abelian lattice whose phi has a nonnegative
/// Newton slope: a finitely generated Zp[phi]-lattice inside M.
fn abelian_witness(endo: &VirtualEndo) -> Option<Submodule> {
    let ctx = endo.l.ctx();
    let n = endo.l.rank();
    let phi = endo.phi();
    let chain = domain_chain(endo, 2 * n + 6).ok()?;
    let v = zmodlin::isolator(ctx, chain.chain.last()?);
    if v.is_zero() {
        return None;
    }
    let w = zmodlin::intersect(ctx, &v, &endo.m).ok()?;
    // span of w, phi w, ..., phi^{r-1} w; closed under phi up to the
    // integral characteristic polynomial of phi on the invariant space
    let mut gens: Vec<Vec<PScalar>> = Vec::new();
    let mut block = w.basis().clone();
    for _ in 0..v.rank() {
        for j in 0..block.cols() {
            gens.push(block.col(j));
        }
        block = &phi * &block;
    }
    // clear denominators and scale inside M
    let g = Mat::from_columns(n, gens).ok()?;
    let e = match g.min_val(ctx) {
        Val::Finite(val) if val < 0 => -val,
        _ => 0,
    };
    let g = g.scale(&ctx.p_scalar(e));
    let mut k = zmodlin::hnf(ctx, &g).ok()?;
    for _ in 0..(2 * n as i64 + 8) {
        if k.is_subset(ctx, &endo.m) && validate_witness(endo, &k) {
            return Some(k);
        }
        k = k.scaled(ctx, 1).ok()?;
    }
    None
}

/// Rational roots of a monic polynomial with rational coefficients, via
/// the rational root theorem on the denominator-cleared integer form.
/// Gives up (empty) when the cleared coefficients overflow i128.
fn rational_roots(poly: &PPoly) -> Vec<PScalar> {
    use num::{BigInt, Integer, Signed, ToPrimitive, Zero};
    let coeffs = poly.coeffs();
    let mut lcm = BigInt::from(1);
    for c in coeffs {
        lcm = lcm.lcm(c.denom());
    }
    let ints: Vec<BigInt> = coeffs
        .iter()
        .map(|c| c.numer() * (&lcm / c.denom()))
        .collect();
    let mut roots = Vec::new();
    // strip the power of x first: zero is a root iff the constant term is
    let k = ints.iter().position(|c| !c.is_zero()).unwrap_or(0);
    if k > 0 {
        roots.push(PScalar::zero());
    }
    let (a0, an) = match (ints[k].abs().to_i128(), ints.last().unwrap().abs().to_i128()) {
        (Some(a), Some(b)) => (a, b),
        _ => return roots,
    };
    let divisors = |n: i128| -> Vec<i128> {
        let mut out = Vec::new();
        let mut i = 1i128;
        while i * i <= n {
            if n % i == 0 {
                out.push(i);
                out.push(n / i);
            }
            i += 1;
        }
        out
    };
    for u in divisors(a0) {
        for v in divisors(an) {
            for sign in [1i128, -1] {
                let cand = PScalar::ratio((sign * u) as i64, v as i64);
                if poly.eval(&cand).is_zero() && !roots.contains(&cand) {
                    roots.push(cand);
                }
            }
        }
    }
    roots
}

/// NotSimple witness from an eigenline: a rational eigenvalue of
/// nonnegative valuation gives the exactly representable invariant lattice
/// ker(phi - lambda), scaled into M. (Eigenvalues that are p-adically
/// integral but irrational over Q have no rational eigenline at all, and
/// no witness submodule is representable in exact arithmetic.)
fn eigen_witness(endo: &VirtualEndo) -> Option<Submodule> {
    let ctx = endo.l.ctx();
    let n = endo.l.rank();
    let phi = endo.phi();
    let poly = char_poly(&phi).ok()?;
    for lam in rational_roots(&poly) {
        if ctx.val(&lam) < Val::Finite(0) {
            continue;
        }
        let mut shift = phi.clone();
        for i in 0..n {
            shift[(i, i)] = &shift[(i, i)] - &lam;
        }
        let mut k = zmodlin::kernel(ctx, &shift);
        if k.is_zero() {
            continue;
        }
        // phi acts on the eigenline as the integral scalar lambda, so any
        // scaling deep enough to land inside M is a valid witness
        for _ in 0..(2 * n as i64 + 8) {
            if k.is_subset(ctx, &endo.m) && validate_witness(endo, &k) {
                return Some(k);
            }
            k = k.scaled(ctx, 1).ok()?;
        }
    }
    None
}

/// Metabelian-split strategy: phi fixes the line of x_0 and the abelian
/// ideal; conclude simplicity from the slopes of phi on the ideal.
fn metabelian_split(endo: &VirtualEndo, gb: &GoodBasis) -> Result<Option<&'static str>> {
    let ctx = endo.l.ctx();
    let n = endo.l.rank();
    let phi = endo.phi();
    let x0 = gb.basis().col(0);
    let x0_line = zmodlin::isolator(
        ctx,
        &zmodlin::hnf(ctx, &Mat::from_columns(n, vec![x0.clone()])?)?,
    );
    let j = zmodlin::isolator(ctx, &gb.ideal());
    // phi(<x0> cap M) inside <x0>
    let x0m = zmodlin::intersect(ctx, &x0_line, &endo.m)?;
    for jj in 0..x0m.rank() {
        let img = phi.mul_vec(&x0m.basis().col(jj))?;
        if !x0_line.contains(ctx, &img) {
            return Ok(None);
        }
    }
    // phi(J cap M) inside J
    let jm = zmodlin::intersect(ctx, &j, &endo.m)?;
    let img = &phi * &jm.basis();
    for col in 0..img.cols() {
        let scaled: Vec<PScalar> = {
            // membership in the Qp-span with integral entries equals
            // membership in the saturated module
            let v = img.col(col);
            if !v.iter().all(|x| ctx.val(x).is_integral()) {
                return Ok(None);
            }
            v
        };
        if !j.contains(ctx, &scaled) {
            return Ok(None);
        }
    }
    // no nonzero ideal subspace inside the x0 line
    let lx0 = endo.l.bracket_modules(&endo.l.full_module(), &x0_line)?;
    if !lx0.is_subset(ctx, &x0_line) || lx0.is_zero() {
        // [L, x0] leaves the line (good) or x0 is central (bad unless the
        // lattice is abelian, which this strategy does not treat)
        if lx0.is_zero() {
            return Ok(None);
        }
    } else {
        return Ok(None);
    }
    // slopes of phi restricted to J, in J-coordinates
    let full_basis = gb.basis();
    let inv = full_basis.inverse()?;
    let mut psi = Mat::zero(n - 1, n - 1);
    // coordinates of phi(j-basis) and of the j-basis itself
    let jm_coords = &inv * &(&phi * &j.basis());
    for c in 0..n - 1 {
        if !jm_coords[(0, c)].is_zero() {
            return Ok(None);
        }
        for r in 1..n {
            psi[(r - 1, c)] = jm_coords[(r, c)].clone();
        }
    }
    let poly = char_poly(&psi)?;
    if no_nonneg_slope(ctx, &poly)? {
        Ok(Some("metabelian-split"))
    } else {
        Ok(None)
    }
}

/// Runs the simplicity strategy stack.
pub fn simplicity(endo: &VirtualEndo, config: SimplicityConfig) -> SimplicityVerdict {
    let ctx = endo.l.ctx().clone();
    // (i) rational core
    match rational_core(endo) {
        Ok(v) if v.is_zero() => {
            return SimplicityVerdict::Simple {
                strategy: "rational-core",
            }
        }
        Ok(_) => {}
        Err(e) => {
            return SimplicityVerdict::Inconclusive {
                reason: format!("rational core failed: {e}"),
            }
        }
    }
    // (ii) abelian characteristic polynomial criterion
    if endo.l.derived().is_zero() {
        let phi = endo.phi();
        match char_poly(&phi).and_then(|p| no_nonneg_slope(&ctx, &p)) {
            Ok(true) => {
                return SimplicityVerdict::Simple {
                    strategy: "abelian-slopes",
                }
            }
            Ok(false) => {
                if let Some(w) = abelian_witness(endo).or_else(|| eigen_witness(endo)) {
                    return SimplicityVerdict::NotSimple { witness: w };
                }
                return SimplicityVerdict::Inconclusive {
                    reason: "nonnegative slope found but witness construction failed".into(),
                };
            }
            Err(e) => {
                return SimplicityVerdict::Inconclusive {
                    reason: format!("slope analysis failed: {e}"),
                }
            }
        }
    }
    // (iii) metabelian split
    if let Some(gb) = find_good_basis(&endo.l) {
        match metabelian_split(endo, &gb) {
            Ok(Some(strategy)) => return SimplicityVerdict::Simple { strategy },
            Ok(None) => {}
            Err(e) => {
                return SimplicityVerdict::Inconclusive {
                    reason: format!("split strategy failed: {e}"),
                }
            }
        }
    }
    // (iv) integral fixpoint
    let phi = endo.phi();
    let n = endo.l.rank();
    let mut s = endo.m.clone();
    for _ in 0..config.cap {
        if s.is_zero() {
            return SimplicityVerdict::Simple {
                strategy: "integral-fixpoint",
            };
        }
        let mut next = match zmodlin::preimage(&ctx, &phi, &s, &s) {
            Ok(x) => x,
            Err(e) => {
                return SimplicityVerdict::Inconclusive {
                    reason: format!("fixpoint step failed: {e}"),
                }
            }
        };
        for i in 0..n {
            let mut ei = vec![PScalar::zero(); n];
            ei[i] = PScalar::one();
            let ad = endo.l.adjoint(&ei).expect("rank matches");
            next = match zmodlin::preimage(&ctx, &ad, &s, &next) {
                Ok(x) => x,
                Err(e) => {
                    return SimplicityVerdict::Inconclusive {
                        reason: format!("fixpoint step failed: {e}"),
                    }
                }
            };
        }
        if next == s {
            if validate_witness(endo, &s) {
                return SimplicityVerdict::NotSimple { witness: s };
            }
            return SimplicityVerdict::Inconclusive {
                reason: "fixpoint reached but witness validation failed".into(),
            };
        }
        s = next;
    }
    SimplicityVerdict::Inconclusive {
        reason: format!("fixpoint cap of {} steps exhausted", config.cap),
    }
}

fn diag_u(ctx: &PContext, exps: &[i64]) -> Mat {
    let n = exps.len();
    let mut u = Mat::zero(n, n);
    for (i, &e) in exps.iter().enumerate() {
        u[(i, i)] = ctx.p_scalar(e);
    }
    u
}

/// Cyclic-shift endomorphism for an abelian lattice of rank n at index
/// exponent k: M = <x_0, ..., x_{n-2}, p^k x_{n-1}>, phi the cyclic shift.
fn cyclic_endo(l: &LieLattice, k: i64) -> Result<VirtualEndo> {
    let ctx = l.ctx();
    let n = l.rank();
    let mut exps = vec![0i64; n];
    exps[n - 1] = k;
    let u = diag_u(ctx, &exps);
    let mut f = Mat::zero(n, n);
    for j in 0..n {
        f[((j + 1) % n, j)] = PScalar::one();
    }
    make_endo(l, u, f)
}

/// Index p^{d m} endomorphism of a metabelian lattice in good-basis shape:
/// M = <x_0, p^m x_1, ..., p^m x_d>, phi(x_0) = x_0, phi(p^m x_i) = x_i.
fn descent_endo(l: &LieLattice, m: i64) -> Result<VirtualEndo> {
    let ctx = l.ctx();
    let n = l.rank();
    let mut exps = vec![m; n];
    exps[0] = 0;
    let u = diag_u(ctx, &exps);
    let f = Mat::identity(n);
    make_endo(l, u, f)
}

fn col3(a: (i64, i64, i64)) -> Vec<PScalar> {
    vec![
        PScalar::from_int(a.0),
        PScalar::from_int(a.1),
        PScalar::from_int(a.2),
    ]
}

/// L7-shaped odd-index certificates, parameterized by (a, c) with the
/// lattice built as p^s [[a, 1],[c, 0]].
fn l7_odd_certificate(
    l: &LieLattice,
    a: &PScalar,
    c: &PScalar,
    k: i64,
) -> Result<VirtualEndo> {
    let ctx = l.ctx().clone();
    let lv = (k - 1) / 2; // k = 2 lv + 1
    let va = ctx.val(a);
    let vc = ctx.val(c);
    let half = PScalar::ratio(1, 2);
    if vc == Val::Finite(1) && va >= Val::Finite(1) {
        // M = <x0, p^l x1, p^{l+1} x2>
        let u = diag_u(&ctx, &[0, lv, lv + 1]);
        let mut f = Mat::zero(3, 3);
        f[(0, 0)] = PScalar::one();
        // phi(p^l x1) = (c/p) x2; phi(p^{l+1} x2) = x1 - a x2
        f[(2, 1)] = c * &ctx.p_scalar(-1);
        f[(1, 2)] = PScalar::one();
        f[(2, 2)] = -a;
        return make_endo(l, u, f);
    }
    let disc = &(&PScalar::from_int(4) * c) + &(a * a);
    if va == Val::Finite(0) && ctx.val(&disc) == Val::Finite(1) {
        // M = <x0, p^l (x1 - a/2 x2), p^{l+1} x2>
        let y1 = vec![
            PScalar::zero(),
            ctx.p_scalar(lv),
            -&(&(&half * a) * &ctx.p_scalar(lv)),
        ];
        let u = Mat::from_columns(3, vec![col3((1, 0, 0)), y1, vec![
            PScalar::zero(),
            PScalar::zero(),
            ctx.p_scalar(lv + 1),
        ]])?;
        let mut f = Mat::zero(3, 3);
        f[(0, 0)] = PScalar::one();
        // phi(p^l y1) = p^{-1}(c + a^2/4) x2
        f[(2, 1)] = &(&disc * &PScalar::ratio(1, 4)) * &ctx.p_scalar(-1);
        // phi(p^{l+1} x2) = x1 - a/2 x2
        f[(1, 2)] = PScalar::one();
        f[(2, 2)] = -&(&half * a);
        return make_endo(l, u, f);
    }
    if a.is_zero() && vc == Val::Finite(0) {
        // c a unit: need an integer w with w^2 = c mod p but not mod p^2
        let unit = ctx.unit_part(c)?;
        if !ctx.is_square_unit(&unit)? {
            return Err(Error::NoCertificate);
        }
        let p = ctx.p();
        let root = (1..p)
            .find(|w| {
                let diff = c - &PScalar::from_int((w * w) as i64);
                ctx.val(&diff) >= Val::Finite(1)
            })
            .expect("square class checked");
        let mut w = PScalar::from_int(root as i64);
        let e_val = ctx.val(&(c - &(&w * &w)));
        if e_val >= Val::Finite(2) {
            // shift the root so c - w^2 has valuation exactly 1
            w = &w + &ctx.p_scalar(1);
        }
        let e = &(c - &(&w * &w)) * &ctx.p_scalar(-1);
        debug_assert_eq!(ctx.val(&e), Val::Finite(0));
        // M = <x0, p^l (x1 + w x2), p^{l+1} x2>
        let v1 = vec![PScalar::zero(), ctx.p_scalar(lv), &w * &ctx.p_scalar(lv)];
        let u = Mat::from_columns(3, vec![col3((1, 0, 0)), v1, vec![
            PScalar::zero(),
            PScalar::zero(),
            ctx.p_scalar(lv + 1),
        ]])?;
        let mut f = Mat::zero(3, 3);
        // phi(x0) = -x0; phi(p^l v1) = -e x2; phi(p^{l+1} x2) = x1 + w x2
        f[(0, 0)] = PScalar::from_int(-1);
        f[(2, 1)] = -&e;
        f[(1, 2)] = PScalar::one();
        f[(2, 2)] = w;
        return make_endo(l, u, f);
    }
    Err(Error::NoCertificate)
}

/// Builds the explicit self-similarity certificate of index exponent k for
/// a family tag, when one of the covered constructions applies.
///
/// For chain tags the returned index exponent is d*k (the descent endo
/// scales all abelian generators by p^k).
pub fn certify(ctx: &PContext, tag: &FamilyTag, k: i64) -> Result<VirtualEndo> {
    if k < 1 {
        return Err(Error::OutOfDomain("index exponent must be >= 1".into()));
    }
    let l = construct(ctx, tag)?;
    match tag {
        FamilyTag::L0 => cyclic_endo(&l, k),
        FamilyTag::L6 { a } if a.is_zero() => cyclic_endo(&l, k),
        FamilyTag::L1 { .. } | FamilyTag::L6 { .. } => {
            if k % 2 == 0 {
                return descent_endo(&l, k / 2);
            }
            // M = <x0, x1, p^k x2>; phi fixes x0 and swaps the eigenlines
            let u = diag_u(ctx, &[0, 0, k]);
            let f = Mat::from_columns(
                3,
                vec![col3((1, 0, 0)), col3((0, 0, 1)), col3((0, 1, 0))],
            )?;
            make_endo(&l, u, f)
        }
        FamilyTag::L2 { c, .. } => {
            if k % 2 == 0 {
                return descent_endo(&l, k / 2);
            }
            if ctx.val(c) != Val::Finite(1) {
                return Err(Error::NoCertificate);
            }
            let lv = (k - 1) / 2;
            let u = diag_u(ctx, &[0, lv, lv + 1]);
            let mut f = Mat::zero(3, 3);
            f[(0, 0)] = PScalar::one();
            // phi(p^l x1) = x1 + (c/p) x2; phi(p^{l+1} x2) = x1 + p x2
            f[(1, 1)] = PScalar::one();
            f[(2, 1)] = c * &ctx.p_scalar(-1);
            f[(1, 2)] = PScalar::one();
            f[(2, 2)] = ctx.p_scalar(1);
            make_endo(&l, u, f)
        }
        FamilyTag::L3 { .. } => {
            if k % 2 == 0 {
                descent_endo(&l, k / 2)
            } else {
                Err(Error::NoCertificate)
            }
        }
        FamilyTag::L4 { c, .. } => {
            if k % 2 == 0 {
                descent_endo(&l, k / 2)
            } else {
                l7_odd_certificate(&l, &PScalar::zero(), c, k)
            }
        }
        FamilyTag::L5 { r, c, .. } => {
            if k % 2 == 0 {
                descent_endo(&l, k / 2)
            } else {
                l7_odd_certificate(&l, &ctx.p_scalar(*r as i64), c, k)
            }
        }
        FamilyTag::L7 { a, c, .. } => {
            if k % 2 == 0 {
                descent_endo(&l, k / 2)
            } else {
                l7_odd_certificate(&l, a, c, k)
            }
        }
        FamilyTag::Homothety { d, a } => {
            if a.is_zero() {
                return cyclic_endo(&l, k);
            }
            // M = <x0, p^k x1, x2, ..., x_{d-1}>, phi cycles the abelian part
            let n = *d as usize;
            let mut exps = vec![0i64; n];
            exps[1] = k;
            let u = diag_u(ctx, &exps);
            let mut f = Mat::zero(n, n);
            f[(0, 0)] = PScalar::one();
            for i in 1..n {
                let target = if i == n - 1 { 1 } else { i + 1 };
                f[(target, i)] = PScalar::one();
            }
            make_endo(&l, u, f)
        }
        FamilyTag::LinChain { a, b } => {
            if a.iter().all(PScalar::is_zero) && b.iter().all(PScalar::is_zero) {
                return cyclic_endo(&l, k);
            }
            descent_endo(&l, k)
        }
    }
}

/// Decision for a rank-3 solvable lattice: the minimal self-similarity
/// index exponent (1 or 2), the recognized tag, a certificate endo on L
/// itself, and a reason when the exponent is 2.
#[derive(Debug, Clone)]
pub struct SsDecision {
    pub index_exp: u32,
    pub tag: FamilyTag,
    pub endo: VirtualEndo,
    pub obstruction: Option<String>,
}

/// Whether a recognized tag admits index-p self-similarity.
pub fn tag_has_index_p(ctx: &PContext, tag: &FamilyTag) -> Result<bool> {
    Ok(match tag {
        FamilyTag::L0 | FamilyTag::L1 { .. } => true,
        FamilyTag::L2 { c, .. } => ctx.val(c) == Val::Finite(1),
        FamilyTag::L3 { .. } => false,
        FamilyTag::L4 { t, eps, .. } => *t == 1 || (*t == 0 && *eps == 0),
        FamilyTag::L5 { r, c, .. } => {
            if *r >= 1 {
                ctx.val(c) == Val::Finite(1)
            } else {
                let disc = &(&PScalar::from_int(4) * c) + &PScalar::one();
                ctx.val(&disc) == Val::Finite(1)
            }
        }
        other => {
            return Err(Error::OutOfDomain(format!(
                "decision table covers recognized rank-3 tags, got {}",
                other.family_name()
            )))
        }
    })
}

fn obstruction_reason(ctx: &PContext, tag: &FamilyTag) -> Option<String> {
    if tag_has_index_p(ctx, tag).ok()? {
        return None;
    }
    Some(match tag {
        FamilyTag::L3 { .. } => "derived subalgebra has rank 1".into(),
        FamilyTag::L2 { c, .. } => {
            format!("near-identity action with val(c) = {} != 1", ctx.val(c))
        }
        FamilyTag::L4 { t, eps, .. } => format!(
            "antidiagonal action with t = {t}, square class {eps}: \
             the p-divisibility pattern blocks an index-p subalgebra map"
        ),
        FamilyTag::L5 { r, c, .. } => {
            if *r >= 1 {
                format!("chain action with r = {r} and val(c) = {} != 1", ctx.val(c))
            } else {
                format!(
                    "chain action with r = 0 and val(4c+1) = {} != 1",
                    ctx.val(&(&(&PScalar::from_int(4) * c) + &PScalar::one()))
                )
            }
        }
        _ => "no index-p construction".into(),
    })
}

/// Transports an endo along an isomorphism T: model -> L.
fn transport_endo(l: &LieLattice, t: &Mat, endo: &VirtualEndo) -> Result<VirtualEndo> {
    make_endo(l, t * &endo.u, t * &endo.f)
}

pub fn decide_ss_index_3dim(l: &LieLattice) -> Result<SsDecision> {
    let ctx = l.ctx().clone();
    let rec = recognize(l)?;
    let index_exp = if tag_has_index_p(&ctx, &rec.tag)? { 1 } else { 2 };
    let model_endo = certify(&ctx, &rec.tag, index_exp as i64)?;
    let endo = transport_endo(l, &rec.iso, &model_endo)?;
    Ok(SsDecision {
        index_exp,
        tag: rec.tag.clone(),
        endo,
        obstruction: obstruction_reason(&ctx, &rec.tag),
    })
}

/// Hereditary self-similarity report for rank-3 solvable lattices.
#[derive(Debug, Clone)]
pub struct HereditaryReport {
    pub hereditary: bool,
    pub tag: FamilyTag,
    /// a finite-index subalgebra of L that is not self-similar of index p
    pub witness: Option<Submodule>,
}

pub fn hereditary_3dim(l: &LieLattice) -> Result<HereditaryReport> {
    let ctx = l.ctx().clone();
    let rec = recognize(l)?;
    if matches!(rec.tag, FamilyTag::L0 | FamilyTag::L1 { .. }) {
        return Ok(HereditaryReport {
            hereditary: true,
            tag: rec.tag,
            witness: None,
        });
    }
    // if L itself needs index p^2 it is its own witness
    if !tag_has_index_p(&ctx, &rec.tag)? {
        return Ok(HereditaryReport {
            hereditary: false,
            tag: rec.tag,
            witness: Some(Submodule::full(&ctx, 3)),
        });
    }
    // otherwise shift parameters once: the subalgebra below is isomorphic
    // to the same family with a -> pa and c -> p^2 c, which falls outside
    // every index-p condition
    let s = match &rec.tag {
        FamilyTag::L2 { s, .. }
        | FamilyTag::L4 { s, .. }
        | FamilyTag::L5 { s, .. } => *s,
        _ => unreachable!("recognized tags with index p"),
    };
    let u_model = if matches!(rec.tag, FamilyTag::L2 { .. }) || s >= 1 {
        diag_u(&ctx, &[0, 1, 0])
    } else {
        diag_u(&ctx, &[1, 2, 1])
    };
    let witness_basis = &rec.iso * &u_model;
    let witness = zmodlin::hnf(&ctx, &witness_basis)?;
    // verify by restricting and re-deciding
    let (sub, _) = l.restrict(&witness)?;
    let sub_decision = decide_ss_index_3dim(&sub)?;
    if sub_decision.index_exp != 2 {
        return Err(Error::ShapeMismatch(
            "internal: parameter-shift witness is still index p".into(),
        ));
    }
    Ok(HereditaryReport {
        hereditary: false,
        tag: rec.tag,
        witness: Some(witness),
    })
}

/// Outcome of the scalar-action classification for strong hereditary
/// self-similarity of index p.
#[derive(Debug, Clone)]
pub struct ShssReport {
    /// Some(s): L is the rank-d lattice with action p^s (infinity: abelian)
    pub s: Option<Val>,
    /// when s is None: a candidate finite-index subalgebra expected not to
    /// be self-similar of index p
    pub witness: Option<Submodule>,
}

pub fn shss_classify(l: &LieLattice) -> Result<ShssReport> {
    let ctx = l.ctx().clone();
    ctx.require_odd()?;
    if !l.is_solvable() {
        return Err(Error::Unsolvable);
    }
    if l.derived().is_zero() {
        return Ok(ShssReport {
            s: Some(Val::Infinity),
            witness: None,
        });
    }
    let gb = match find_good_basis(l) {
        Some(gb) => gb,
        None => {
            return Ok(ShssReport {
                s: None,
                witness: None,
            })
        }
    };
    let a = gb.a();
    let d = a.rows();
    let scalar = (0..d).all(|i| {
        (0..d).all(|j| {
            if i == j {
                a[(i, i)] == a[(0, 0)]
            } else {
                a[(i, j)].is_zero()
            }
        })
    });
    if scalar {
        let s = ctx.val(&a[(0, 0)]);
        return Ok(ShssReport {
            s: Some(s),
            witness: None,
        });
    }
    // a rank-3 lattice that already fails index-p self-similarity is its
    // own witness; near-identity actions (which admit no unit-coefficient
    // chain realignment) always land here
    if l.rank() == 3 {
        if let Ok(rec) = recognize(l) {
            if matches!(tag_has_index_p(&ctx, &rec.tag), Ok(false)) {
                return Ok(ShssReport {
                    s: None,
                    witness: Some(Submodule::full(&ctx, 3)),
                });
            }
        }
    }
    // not a homothety lattice; try to realign the action to a cyclic chain
    // with unit chain coefficients and hand the chain witness back
    let witness = chain_realignment(&ctx, &gb)
        .and_then(|(chain_basis, chain_a)| {
            let tagged = FamilyTag::LinChain {
                a: chain_a,
                b: vec![PScalar::one(); d - 1],
            };
            let model = construct(&ctx, &tagged).ok()?;
            let w_model = witness_nonss(&model).ok()?;
            // transport: chain basis columns are the model's basis in L
            let w = &chain_basis * w_model.basis();
            zmodlin::hnf(&ctx, &w).ok()
        });
    Ok(ShssReport { s: None, witness })
}

/// Searches a cyclic vector for the action matrix and returns the full
/// lattice basis (x_0, A^{d-1}v, ..., Av, v) realizing the chain shape,
/// together with the chain coefficients a_i, when a_d != 0.
fn chain_realignment(ctx: &PContext, gb: &GoodBasis) -> Option<(Mat, Vec<PScalar>)> {
    let a = gb.a();
    let d = a.rows();
    let p = ctx.p();
    let mut candidates: Vec<Vec<PScalar>> = Vec::new();
    for i in 0..d {
        let mut v = vec![PScalar::zero(); d];
        v[i] = PScalar::one();
        candidates.push(v);
    }
    for i in 0..d {
        for j in i + 1..d {
            for t in 1..p.min(4) {
                let mut v = vec![PScalar::zero(); d];
                v[i] = PScalar::one();
                v[j] = PScalar::from_int(t as i64);
                candidates.push(v);
            }
        }
    }
    for v in candidates {
        // powers v, Av, ..., A^{d-1} v
        let mut pows = vec![v.clone()];
        for _ in 1..d {
            pows.push(a.mul_vec(pows.last().unwrap()).ok()?);
        }
        let mut cols = pows.clone();
        cols.reverse(); // y_1 = A^{d-1} v, ..., y_d = v
        let m = Mat::from_columns(d, cols.clone()).ok()?;
        let det = m.det().ok()?;
        if ctx.val(&det) != Val::Finite(0) {
            continue;
        }
        // chain coefficients from A y_1 = sum a_i y_i
        let top = a.mul_vec(&cols[0]).ok()?;
        let coeffs = m.inverse().ok()?.mul_vec(&top).ok()?;
        if coeffs[d - 1].is_zero() {
            continue;
        }
        if !coeffs.iter().all(|x| ctx.val(x).is_integral()) {
            continue;
        }
        // embed into the full lattice basis
        let n = d + 1;
        let mut full_cols = vec![gb.basis().col(0)];
        for c in &cols {
            let mut amb = vec![PScalar::zero(); n];
            for (i, x) in c.iter().enumerate() {
                // abelian part columns 1..n of the good basis
                for r in 0..n {
                    let delta = x * &gb.basis()[(r, i + 1)];
                    amb[r] = &amb[r] + &delta;
                }
            }
            full_cols.push(amb);
        }
        let full = Mat::from_columns(n, full_cols).ok()?;
        return Some((full, coeffs));
    }
    None
}

/// For a chain lattice with unit chain coefficients ([x_0, x_{i+1}] = x_i)
/// and a_d != 0, the finite-index subalgebra M = <p^{k_0} x_0, p^{k_i} x_i>
/// whose induced presentation violates every index-p condition.
pub fn witness_nonss(l: &LieLattice) -> Result<Submodule> {
    let ctx = l.ctx().clone();
    let n = l.rank();
    if n < 3 {
        return Err(Error::ShapeMismatch("chain witness needs rank >= 3".into()));
    }
    let d = n - 1;
    // validate the shape and read off a
    let mut a = Vec::with_capacity(d);
    for i in 1..n {
        a.push(l.sc(0, 1)[i].clone());
    }
    if a[d - 1].is_zero() {
        return Err(Error::ShapeMismatch("last chain coefficient must be nonzero".into()));
    }
    for i in 1..d {
        // [x_0, x_{i+1}] = x_i exactly
        let row = l.sc(0, i + 1);
        for k in 0..n {
            let expect = if k == i { PScalar::one() } else { PScalar::zero() };
            if row[k] != expect {
                return Err(Error::ShapeMismatch(format!(
                    "bracket [x0, x{}] is not x{}",
                    i + 1,
                    i
                )));
            }
        }
    }
    for i in 1..n {
        for j in i + 1..n {
            if l.sc(i, j).iter().any(|x| !x.is_zero()) {
                return Err(Error::ShapeMismatch("abelian part is not abelian".into()));
            }
        }
    }
    let di = d as i64;
    // try the shallowest scaling first and deepen only while the induced
    // coefficients miss their bounds (unit a_i need one extra digit)
    'depth: for k0 in (di - 1) / 2 + 1..=(di - 1) / 2 + 2 {
        let k1 = (1..=di)
            .map(|i| (i - 1) * k0 - (i - 1) * (i - 2) / 2)
            .max()
            .expect("nonempty");
        let mut exps = vec![k0];
        for i in 1..=di {
            let ki = k1 - (i - 1) * k0 + (i - 1) * (i - 2) / 2;
            // the scaled coefficients must remain integral and deepen with i
            if k0 + k1 - ki <= i - 1 {
                continue 'depth;
            }
            exps.push(ki);
        }
        // verify the induced presentation against the four hypotheses that
        // force the p^2 index: b'_i = p^{i-1}, a'_i = p^{k0+k1-k_i} a_i
        for i in 1..=di {
            let ai = &a[(i - 1) as usize];
            let bi_val = i - 1;
            if i < di {
                let vai = ctx.val(&(&ctx.p_scalar(k0 + k1 - exps[i as usize]) * ai));
                if Val::Finite(bi_val) >= vai {
                    continue 'depth;
                }
            } else {
                let vad = ctx.val(&(&ctx.p_scalar(k0 + k1 - exps[di as usize]) * ai));
                if Val::Finite(di - 1 + 1) >= vad {
                    continue 'depth;
                }
            }
        }
        let u = diag_u(&ctx, &exps);
        return zmodlin::hnf(&ctx, &u);
    }
    Err(Error::ShapeMismatch(
        "scaling exponents fail the depth inequalities".into(),
    ))
}
