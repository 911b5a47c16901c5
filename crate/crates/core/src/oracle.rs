//! Finite-level brute force: enumerate index-p submodules, solve the
//! homomorphism congruences mod p^N, and check that every finite-level
//! solution stabilizes a known ideal ("coverage").

use num::ToPrimitive;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::lie_core::{LieLattice, StructureKind};
use crate::metabelian::{good_basis_from_parts, induced_b};
use crate::padic::{PContext, PScalar, Val};
use crate::selfsim::{make_endo, simplicity, SimplicityConfig, VirtualEndo};
use crate::zmodlin::{self, Mat, Submodule};

/// Normal form of an index-p submodule of Zp^n: the basis
/// x_j + f_j x_{i0} (j < i0), p x_{i0}, x_j (j > i0).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubmoduleShape {
    pub i0: usize,
    pub f: Vec<u64>,
}

impl SubmoduleShape {
    pub fn matrix(&self, ctx: &PContext, n: usize) -> Mat {
        let mut u = Mat::identity(n);
        u[(self.i0, self.i0)] = ctx.p_scalar(1);
        for (j, &fj) in self.f.iter().enumerate() {
            u[(self.i0, j)] = PScalar::from_int(fj as i64);
        }
        u
    }

    pub fn submodule(&self, ctx: &PContext, n: usize) -> Result<Submodule> {
        zmodlin::hnf(ctx, &self.matrix(ctx, n))
    }

    pub fn to_json(&self) -> Value {
        json!({"i0": self.i0, "f": self.f})
    }
}

/// All index-p submodules of Zp^n, each exactly once
/// ((p^n - 1)/(p - 1) shapes).
pub fn enum_index_p(ctx: &PContext, n: usize) -> Vec<SubmoduleShape> {
    let p = ctx.p();
    let mut out = Vec::new();
    for i0 in 0..n {
        let mut f = vec![0u64; i0];
        loop {
            out.push(SubmoduleShape { i0, f: f.clone() });
            // next residue tuple
            let mut carry = true;
            for slot in f.iter_mut() {
                if *slot + 1 < p {
                    *slot += 1;
                    carry = false;
                    break;
                }
                *slot = 0;
            }
            if carry {
                break;
            }
        }
    }
    out
}

/// Keeps the shapes whose submodule is closed under the bracket. Uses the
/// induced-matrix integrality test when L is in good-basis coordinates,
/// and the generic closure test otherwise.
pub fn subalgebra_filter(l: &LieLattice, shapes: &[SubmoduleShape]) -> Result<Vec<SubmoduleShape>> {
    let ctx = l.ctx();
    let n = l.rank();
    let gb = good_basis_from_parts(l, Mat::identity(n)).ok();
    let mut out = Vec::new();
    for shape in shapes {
        let keep = match &gb {
            Some(gb) => induced_b(gb, &shape.matrix(ctx, n))?.1,
            None => {
                let m = shape.submodule(ctx, n)?;
                !matches!(l.substructure_kind(&m)?, StructureKind::ModuleOnly)
            }
        };
        if keep {
            out.push(shape.clone());
        }
    }
    Ok(out)
}

fn residue_u64(ctx: &PContext, x: &PScalar, level: u32) -> Result<u64> {
    Ok(ctx
        .residue(x, level)?
        .to_u64()
        .expect("residue below p^level"))
}

/// Basis vector of a homogeneous solution subgroup mod p^N with its order
/// exponent: multiples 0..p^order_exp of the vector are distinct solutions.
#[derive(Debug, Clone)]
struct SolutionGen {
    vector: Vec<u64>,
    order_exp: u32,
}

/// Solves S x = 0 mod p^N for an integral matrix S by exact
/// diagonalization with tracked column operations; returns independent
/// generators of the solution subgroup.
fn solve_homogeneous(ctx: &PContext, s: &Mat, level: u32) -> Result<Vec<SolutionGen>> {
    if let Some(gens) = solve_homogeneous_fast(ctx, s, level) {
        return Ok(gens);
    }
    let m = s.rows();
    let u = s.cols();
    let mut w = s.clone();
    let mut q = Mat::identity(u);
    let mut exps: Vec<i64> = Vec::new();
    let mut k = 0usize;
    while k < m.min(u) {
        // pivot of minimal valuation in the remaining block
        let mut best: Option<(usize, usize, i64)> = None;
        for i in k..m {
            for j in k..u {
                if let Val::Finite(v) = ctx.val(&w[(i, j)]) {
                    if best.map(|(_, _, bv)| v < bv).unwrap_or(true) {
                        best = Some((i, j, v));
                    }
                }
            }
        }
        let (pi, pj, pv) = match best {
            Some(b) => b,
            None => break,
        };
        w.swap_rows(k, pi);
        swap_cols_tracked(&mut w, &mut q, k, pj);
        let unit_inv = ctx.unit_part(&w[(k, k)])?.inv()?;
        for j in 0..u {
            w[(k, j)] = &w[(k, j)] * &unit_inv;
        }
        let piv_inv = ctx.p_scalar(-pv);
        for i in 0..m {
            if i == k {
                continue;
            }
            let factor = &w[(i, k)] * &piv_inv;
            for j in 0..u {
                let delta = &factor * &w[(k, j)];
                w[(i, j)] = &w[(i, j)] - &delta;
            }
        }
        for j in 0..u {
            if j == k {
                continue;
            }
            let factor = &w[(k, j)] * &piv_inv;
            axpy_col_tracked(&mut w, &mut q, j, k, &factor);
        }
        exps.push(pv);
        k += 1;
    }
    let mut gens = Vec::new();
    for (i, &a) in exps.iter().enumerate() {
        let a = a.max(0) as u32;
        if a == 0 {
            continue; // unit pivot: coordinate forced to zero
        }
        let order = a.min(level);
        // y_i in p^{level - order} Z / p^level Z
        let mut x = vec![PScalar::zero(); u];
        x[i] = ctx.p_scalar((level - order) as i64);
        gens.push(make_gen(ctx, &q, &x, order, level)?);
    }
    for j in k..u {
        let mut x = vec![PScalar::zero(); u];
        x[j] = PScalar::one();
        gens.push(make_gen(ctx, &q, &x, level, level)?);
    }
    Ok(gens)
}

/// Fast path for solve_homogeneous: the same elimination carried out on
/// u64 residues mod p^K, with K comfortably above the requested level so
/// the exact divisions by pivot p-powers keep enough correct digits in the
/// tracked column operations. Returns None (caller falls back to the exact
/// path) when an entry is non-integral or the pivot valuations eat the
/// spare digits.
fn solve_homogeneous_fast(ctx: &PContext, s: &Mat, level: u32) -> Option<Vec<SolutionGen>> {
    let p = ctx.p();
    // largest K with p^K representable and products safe in u128
    let mut kk = 0u32;
    let mut pk: u64 = 1;
    while pk <= u64::MAX / p / 2 {
        pk *= p;
        kk += 1;
    }
    if kk <= level + 2 {
        return None;
    }
    let modk = pk;
    let mulm = |a: u64, b: u64| ((a as u128 * b as u128) % modk as u128) as u64;
    let val_of = |x: u64| -> u32 {
        let mut v = 0;
        let mut y = x;
        while y % p == 0 {
            y /= p;
            v += 1;
        }
        v
    };
    // residues mod p^K; bail on non-integral entries
    let m = s.rows();
    let u = s.cols();
    let mut w = vec![vec![0u64; u]; m];
    for i in 0..m {
        for j in 0..u {
            if ctx.val(&s[(i, j)]) < Val::Finite(0) {
                return None;
            }
            w[i][j] = ctx.residue(&s[(i, j)], kk).ok()?.to_u64()?;
        }
    }
    let mut q = vec![vec![0u64; u]; u];
    for (i, row) in q.iter_mut().enumerate() {
        row[i] = 1;
    }
    let mut exps: Vec<u32> = Vec::new();
    let mut spare = kk - level - 2;
    let mut k = 0usize;
    while k < m.min(u) {
        let mut best: Option<(usize, usize, u32)> = None;
        for i in k..m {
            for j in k..u {
                if w[i][j] != 0 {
                    let v = val_of(w[i][j]);
                    if best.map(|(_, _, bv)| v < bv).unwrap_or(true) {
                        best = Some((i, j, v));
                    }
                }
            }
        }
        let (pi, pj, pv) = match best {
            Some(b) => b,
            None => break,
        };
        if pv > spare {
            return None;
        }
        spare -= pv;
        w.swap(k, pi);
        for row in w.iter_mut() {
            row.swap(k, pj);
        }
        for row in q.iter_mut() {
            row.swap(k, pj);
        }
        let ppv = p.pow(pv);
        let unit = w[k][k] / ppv;
        let unit_inv = mod_inverse(unit % modk, modk, p)?;
        for j in 0..u {
            w[k][j] = mulm(w[k][j], unit_inv);
        }
        for i in 0..m {
            if i == k || w[i][k] == 0 {
                continue;
            }
            let factor = w[i][k] / ppv;
            for j in 0..u {
                let delta = mulm(factor, w[k][j]);
                w[i][j] = (w[i][j] + modk - delta) % modk;
            }
        }
        for j in 0..u {
            if j == k || w[k][j] == 0 {
                continue;
            }
            let factor = w[k][j] / ppv;
            for i in 0..m {
                let delta = mulm(factor, w[i][k]);
                w[i][j] = (w[i][j] + modk - delta) % modk;
            }
            for row in q.iter_mut() {
                let delta = mulm(factor, row[k]);
                row[j] = (row[j] + modk - delta) % modk;
            }
        }
        exps.push(pv);
        k += 1;
    }
    let pn = p.pow(level);
    let mut gens = Vec::new();
    let mut emit = |col: usize, order: u32| {
        let shift = p.pow(level - order);
        let vector: Vec<u64> = q
            .iter()
            .map(|row| mulm(row[col], shift) % pn)
            .collect();
        gens.push(SolutionGen {
            vector,
            order_exp: order,
        });
    };
    for (i, &a) in exps.iter().enumerate() {
        if a == 0 {
            continue; // unit pivot: coordinate forced to zero
        }
        emit(i, a.min(level));
    }
    for j in k..u {
        emit(j, level);
    }
    Some(gens)
}

/// Inverse of a unit mod p^K by Hensel-style Newton iteration.
fn mod_inverse(a: u64, modk: u64, p: u64) -> Option<u64> {
    if a % p == 0 {
        return None;
    }
    // invert mod p by Fermat, then lift: x -> x(2 - ax)
    let mut x = {
        let mut acc: u64 = 1;
        let mut base = a % p;
        let mut e = p - 2;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base % p;
            }
            base = base * base % p;
            e >>= 1;
        }
        acc
    };
    let mulm = |a: u64, b: u64| ((a as u128 * b as u128) % modk as u128) as u64;
    for _ in 0..7 {
        let ax = mulm(a % modk, x);
        let two_minus = (2 + modk - ax % modk) % modk;
        x = mulm(x, two_minus);
    }
    (mulm(a % modk, x) == 1).then_some(x)
}

fn make_gen(ctx: &PContext, q: &Mat, y: &[PScalar], order: u32, level: u32) -> Result<SolutionGen> {
    let x = q.mul_vec(y)?;
    let vector = x
        .iter()
        .map(|v| residue_u64(ctx, v, level))
        .collect::<Result<Vec<_>>>()?;
    Ok(SolutionGen {
        vector,
        order_exp: order,
    })
}

fn swap_cols_tracked(w: &mut Mat, q: &mut Mat, a: usize, b: usize) {
    if a == b {
        return;
    }
    for i in 0..w.rows() {
        let tmp = w[(i, a)].clone();
        w[(i, a)] = w[(i, b)].clone();
        w[(i, b)] = tmp;
    }
    for i in 0..q.rows() {
        let tmp = q[(i, a)].clone();
        q[(i, a)] = q[(i, b)].clone();
        q[(i, b)] = tmp;
    }
}

fn axpy_col_tracked(w: &mut Mat, q: &mut Mat, dst: usize, src: usize, factor: &PScalar) {
    for i in 0..w.rows() {
        let delta = factor * &w[(i, src)];
        w[(i, dst)] = &w[(i, dst)] - &delta;
    }
    for i in 0..q.rows() {
        let delta = factor * &q[(i, src)];
        q[(i, dst)] = &q[(i, dst)] - &delta;
    }
}

/// Affine description of the homomorphism matrices mod p^N for one
/// admissible top row of F.
#[derive(Debug, Clone)]
pub struct HomBranch {
    /// residues of F_{0,1}, ..., F_{0,d}
    pub top_row: Vec<u64>,
    gens: Vec<SolutionGen>,
}

impl HomBranch {
    /// log_p of the number of solutions in this branch.
    pub fn log_size(&self) -> u32 {
        self.gens.iter().map(|g| g.order_exp).sum()
    }
}

/// All homomorphism matrices F mod p^N for phi: M -> L with the given
/// corner residue F_{00}, grouped by the top-row branch.
#[derive(Debug, Clone)]
pub struct HomSolutions {
    pub f00: u64,
    pub level: u32,
    pub branches: Vec<HomBranch>,
    n: usize,
    p: u64,
}

impl HomSolutions {
    /// Total solution count as log_p per branch.
    pub fn branch_log_sizes(&self) -> Vec<u32> {
        self.branches.iter().map(HomBranch::log_size).collect()
    }

    /// Whether the given full matrix of residues mod p^N is a solution.
    pub fn contains(&self, pn: u64, f: &[Vec<u64>]) -> bool {
        let n = self.n;
        let d = n - 1;
        if f.len() != n || f[0][0] != self.f00 {
            return false;
        }
        for branch in &self.branches {
            if (0..d).any(|j| f[0][j + 1] != branch.top_row[j]) {
                continue;
            }
            let target: Vec<u64> = unknown_layout(n)
                .into_iter()
                .map(|(r, c)| f[r][c])
                .collect();
            if walk_contains(self.p, pn, &branch.gens, &target) {
                return true;
            }
        }
        false
    }
}

/// The unknown ordering used for the linear system: the column under
/// F_{00}, then the lower-right block row-major.
fn unknown_layout(n: usize) -> Vec<(usize, usize)> {
    let d = n - 1;
    let mut out = Vec::with_capacity(d + d * d);
    for i in 1..n {
        out.push((i, 0));
    }
    for k in 1..n {
        for j in 1..n {
            out.push((k, j));
        }
    }
    out
}

fn walk_contains(p: u64, pn: u64, gens: &[SolutionGen], target: &[u64]) -> bool {
    // membership in the subgroup generated by gens: brute walk (branch
    // sizes are small whenever this is used)
    let mut found = false;
    walk_solutions(p, pn, gens, &vec![0u64; target.len()], &mut |x| {
        if x == target {
            found = true;
            false
        } else {
            true
        }
    });
    found
}

/// Invokes visit on every point particular + Z-span(gens) mod p^N;
/// a false return aborts the walk.
fn walk_solutions(
    p: u64,
    pn: u64,
    gens: &[SolutionGen],
    particular: &[u64],
    visit: &mut dyn FnMut(&[u64]) -> bool,
) {
    let radices: Vec<u64> = gens.iter().map(|g| p.pow(g.order_exp)).collect();
    let mut counters = vec![0u64; gens.len()];
    let mut current = particular.to_vec();
    loop {
        if !visit(&current) {
            return;
        }
        // odometer increment; on digit rollover recompute the point
        let mut pos = 0;
        loop {
            if pos == gens.len() {
                return;
            }
            counters[pos] += 1;
            if counters[pos] < radices[pos] {
                break;
            }
            counters[pos] = 0;
            pos += 1;
        }
        for (slot, &base) in current.iter_mut().zip(particular) {
            *slot = base;
        }
        for (g, &c) in gens.iter().zip(&counters) {
            if c == 0 {
                continue;
            }
            for (slot, &v) in current.iter_mut().zip(&g.vector) {
                *slot = (*slot + (c % pn) * v) % pn;
            }
        }
    }
}

/// Solves the homomorphism congruences for the subalgebra given by a
/// shape, at level N, with fixed corner residue.
pub fn hom_solutions_mod(
    l: &LieLattice,
    shape: &SubmoduleShape,
    level: u32,
    f00: u64,
) -> Result<HomSolutions> {
    let ctx = l.ctx().clone();
    let n = l.rank();
    let d = n - 1;
    let gb = good_basis_from_parts(l, Mat::identity(n)).map_err(|_| {
        Error::OutOfDomain(
            "the congruence solver needs a lattice in good-basis coordinates".into(),
        )
    })?;
    let u = shape.matrix(&ctx, n);
    let (b, integral) = induced_b(&gb, &u)?;
    if !integral {
        return Err(Error::NotSubalgebra(0, shape.i0));
    }
    let a = gb.a();
    let pn_big = ctx.p().pow(level);
    if f00 >= pn_big {
        return Err(Error::OutOfDomain("corner residue above p^N".into()));
    }
    let f00s = PScalar::from_int(f00 as i64);
    // admissible top rows: t B = 0 mod p^N
    let bt = b.transpose();
    let top_gens = solve_homogeneous(&ctx, &bt, level)?;
    let mut branches = Vec::new();
    let mut tops: Vec<Vec<u64>> = Vec::new();
    walk_solutions(ctx.p(), pn_big, &top_gens, &vec![0u64; d], &mut |t| {
        tops.push(t.to_vec());
        true
    });
    for t in tops {
        let ts: Vec<PScalar> = t.iter().map(|&x| PScalar::from_int(x as i64)).collect();
        // unknowns: f_{i0} (d entries), then G row-major (d x d)
        let nu = d + d * d;
        let gidx = |k: usize, j: usize| d + k * d + j;
        let mut rows: Vec<Vec<PScalar>> = Vec::new();
        // abelian-pair condition: t_{i} (A G)_{k j} = t_{j} (A G)_{k i}
        for i in 0..d {
            for j in i + 1..d {
                for k in 0..d {
                    let mut row = vec![PScalar::zero(); nu];
                    for ll in 0..d {
                        row[gidx(ll, j)] = &row[gidx(ll, j)] + &(&ts[i] * &a[(k, ll)]);
                        row[gidx(ll, i)] = &row[gidx(ll, i)] - &(&ts[j] * &a[(k, ll)]);
                    }
                    rows.push(row);
                }
            }
        }
        // corner condition: G B - F00 A G + t_j (A f0) = 0 entrywise
        for k in 0..d {
            for j in 0..d {
                let mut row = vec![PScalar::zero(); nu];
                for ll in 0..d {
                    row[gidx(k, ll)] = &row[gidx(k, ll)] + &b[(ll, j)];
                    row[gidx(ll, j)] = &row[gidx(ll, j)] - &(&f00s * &a[(k, ll)]);
                    row[ll] = &row[ll] + &(&ts[j] * &a[(k, ll)]);
                }
                rows.push(row);
            }
        }
        let s = Mat::from_rows(rows)?;
        let gens = solve_homogeneous(&ctx, &s, level)?;
        branches.push(HomBranch { top_row: t, gens });
    }
    Ok(HomSolutions {
        f00,
        level,
        branches,
        n,
        p: ctx.p(),
    })
}

/// Fast membership test for the subgroup I + p^N Zp^n of (Z/p^N)^n,
/// precomputed from the inverse of a full-rank basis.
struct CandidateTester {
    /// rows (coefficients mod p^{e}, e) of the scaled inverse; a vector v
    /// belongs iff row . v = 0 mod p^{e} for every row
    rows: Vec<(Vec<u64>, u64)>,
}

impl CandidateTester {
    fn new(ctx: &PContext, group: &Submodule, level: u32) -> Result<CandidateTester> {
        let h = group.basis();
        let inv = h.inverse()?;
        let mut rows = Vec::new();
        for i in 0..inv.rows() {
            let mut e = 0i64;
            for j in 0..inv.cols() {
                if let Val::Finite(v) = ctx.val(&inv[(i, j)]) {
                    if v < -e {
                        e = -v;
                    }
                }
            }
            if e == 0 {
                continue;
            }
            let e = (e as u32).min(level);
            let modulus = ctx.p().pow(e);
            let scaled = ctx.p_scalar(e as i64);
            let mut coeffs = Vec::with_capacity(inv.cols());
            for j in 0..inv.cols() {
                let x = &inv[(i, j)] * &scaled;
                coeffs.push(residue_u64(ctx, &x, e)?);
            }
            rows.push((coeffs, modulus));
        }
        Ok(CandidateTester { rows })
    }

    fn contains(&self, v: &[u64]) -> bool {
        self.rows.iter().all(|(coeffs, modulus)| {
            let mut acc: u64 = 0;
            for (c, x) in coeffs.iter().zip(v) {
                acc = (acc + c * (x % modulus)) % modulus;
            }
            acc == 0
        })
    }
}

/// A candidate ideal prepared for one shape: generator coordinates in the
/// shape basis, and the finite-level membership tester.
struct PreparedCandidate {
    coords: Vec<Vec<u64>>, // columns: U^{-1} g mod p^N
    tester: CandidateTester,
}

#[derive(Debug, Clone)]
pub struct UncoveredSample {
    pub f00: u64,
    /// full residue matrix of F, row-major
    pub f: Vec<Vec<u64>>,
    /// set when the sample lifted to an exact simple virtual endomorphism
    pub lifted_simple: bool,
}

#[derive(Debug, Clone)]
pub struct ShapeRecord {
    pub shape: SubmoduleShape,
    /// per F00 residue: branch solution sizes as log_p
    pub dims_per_f00: Vec<(u64, Vec<u32>)>,
    pub covered: bool,
    pub uncovered_samples: Vec<UncoveredSample>,
}

#[derive(Debug, Clone)]
pub struct ExhaustReport {
    pub p: u64,
    pub level: u32,
    pub covered: bool,
    /// an uncovered solution lifted to an exact simple endo
    pub refuted: bool,
    pub shapes: Vec<ShapeRecord>,
}

impl ExhaustReport {
    pub fn to_json(&self) -> Value {
        json!({
            "p": self.p,
            "level": self.level,
            "covered": self.covered,
            "refuted": self.refuted,
            "shapes": self.shapes.iter().map(|s| json!({
                "shape": s.shape.to_json(),
                "dims_per_f00": s.dims_per_f00.iter()
                    .map(|(f00, dims)| json!({"f00": f00, "log_sizes": dims}))
                    .collect::<Vec<_>>(),
                "covered": s.covered,
                "uncovered_samples": s.uncovered_samples.iter().map(|u| json!({
                    "f00": u.f00,
                    "f": u.f,
                    "lifted_simple": u.lifted_simple,
                })).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
        })
    }
}

/// Default candidate ideals for the coverage check: the abelian ideal and
/// its scalings, plus every line of the abelian part that is invariant at
/// the chosen level.
pub fn default_candidates(l: &LieLattice, level: u32) -> Result<Vec<Submodule>> {
    let ctx = l.ctx().clone();
    let n = l.rank();
    let mut cands: Vec<Submodule> = Vec::new();
    let full_rank_proper = |m: &Submodule| m.pivot_exps().iter().any(|&e| e > 0);
    let mut push = |m: Submodule| {
        if !m.is_zero() && (m.rank() < n || full_rank_proper(&m)) && !cands.contains(&m) {
            cands.push(m);
        }
    };
    // p times the whole lattice: invariant under any map that kills the
    // residue quotient, so it mops up the solutions that vanish mod p
    push(Submodule::full(&ctx, n).scaled(&ctx, 1)?);
    let der = l.derived();
    push(der.clone());
    push(zmodlin::isolator(&ctx, &der));
    if good_basis_from_parts(l, Mat::identity(n)).is_ok() {
        let d = n - 1;
        let mut jgens = Vec::new();
        for i in 1..n {
            let mut e = vec![PScalar::zero(); n];
            e[i] = PScalar::one();
            jgens.push(e);
        }
        let j = zmodlin::hnf(&ctx, &Mat::from_columns(n, jgens)?)?;
        push(j.clone());
        push(j.scaled(&ctx, 1)?);
        if d == 2 {
            for exps in [[0i64, 1], [1, 0]] {
                let mut cols = Vec::new();
                for (i, &e) in exps.iter().enumerate() {
                    let mut v = vec![PScalar::zero(); n];
                    v[i + 1] = ctx.p_scalar(e);
                    cols.push(v);
                }
                push(zmodlin::hnf(&ctx, &Mat::from_columns(n, cols)?)?);
            }
            // lines x1 + m x2 and m x1 + x2; m runs over centered
            // representatives one digit deeper than the requested level, so
            // that a line fixed by some exact map (an eigenvector of the
            // action, say) has a nearby integral stand-in in the list
            let deep = ctx.p().pow(level + 1) as i64;
            for m in 0..deep {
                let m = if m > deep / 2 { m - deep } else { m };
                for flip in [false, true] {
                    let mut v = vec![PScalar::zero(); n];
                    if flip {
                        v[1] = PScalar::from_int(m);
                        v[2] = PScalar::one();
                    } else {
                        v[1] = PScalar::one();
                        v[2] = PScalar::from_int(m);
                    }
                    let line = zmodlin::hnf(&ctx, &Mat::from_columns(n, vec![v.clone()])?)?;
                    push(line);
                    // the line together with p times a complementary vector
                    let mut w = vec![PScalar::zero(); n];
                    w[if flip { 1 } else { 2 }] = ctx.p_scalar(1);
                    push(zmodlin::hnf(&ctx, &Mat::from_columns(n, vec![v, w])?)?);
                }
            }
        } else {
            // suffix chains of the abelian part and their scalings
            for start in 1..n {
                let mut cols = Vec::new();
                for i in start..n {
                    let mut v = vec![PScalar::zero(); n];
                    v[i] = PScalar::one();
                    cols.push(v);
                }
                let m = zmodlin::hnf(&ctx, &Mat::from_columns(n, cols)?)?;
                push(m.scaled(&ctx, 1)?);
                push(m);
            }
        }
    }
    // keep only candidates that are ideals at the chosen level
    let full = l.full_module();
    let mut out = Vec::new();
    for c in cands {
        if ideal_mod(l, &c, level)? && c.is_subset(&ctx, &full) {
            out.push(c);
        }
    }
    Ok(out)
}

fn ideal_mod(l: &LieLattice, i: &Submodule, level: u32) -> Result<bool> {
    let ctx = l.ctx();
    let group = zmodlin::msum(
        ctx,
        i,
        &Submodule::full(ctx, l.rank()).scaled(ctx, level as i64)?,
    )?;
    let li = l.bracket_modules(&l.full_module(), i)?;
    Ok(li.is_subset(ctx, &group))
}

/// Total budget for walked solutions per shape before bailing out.
const WALK_BUDGET: u64 = 40_000_000;
const PROBE_STEP_CAP: u128 = 1 << 15;
const SAMPLE_CAP: usize = 5;
const LIFT_CAP: usize = 24;
/// Extra p-digits used internally when solving the congruences during a
/// coverage run. Solutions are projected back down to the requested level;
/// residue matrices that satisfy the system mod p^N but cannot survive one
/// more digit (the equations pick up factors of p) are discarded, which is
/// exactly the set of reductions the exact homomorphisms can produce.
const GUARD_LEVELS: u32 = 2;

/// Reduces a solution generator mod p^level; returns None when it projects
/// to zero.
fn project_gen(gen: &SolutionGen, p: u64, level: u32) -> Option<SolutionGen> {
    let pn = p.pow(level);
    let vector: Vec<u64> = gen.vector.iter().map(|&v| v % pn).collect();
    let mut order_exp = 0u32;
    for &v in &vector {
        if v == 0 {
            continue;
        }
        let mut val = 0u32;
        let mut x = v;
        while x % p == 0 {
            x /= p;
            val += 1;
        }
        order_exp = order_exp.max(level - val);
    }
    if order_exp == 0 {
        None
    } else {
        Some(SolutionGen { vector, order_exp })
    }
}

/// Runs the coverage check: for every index-p subalgebra shape, every
/// corner residue and every finite-level homomorphism solution, verify
/// that some candidate ideal is stabilized. Deterministic output.
pub fn exhaust(
    l: &LieLattice,
    level: u32,
    extra_candidates: &[Submodule],
) -> Result<ExhaustReport> {
    let ctx = l.ctx().clone();
    let n = l.rank();
    let pn = ctx.p().pow(level);
    let mut candidates = default_candidates(l, level)?;
    for c in extra_candidates {
        if !ideal_mod(l, c, level)? {
            return Err(Error::CandidateNotIdeal(level));
        }
        if !candidates.contains(c) {
            candidates.push(c.clone());
        }
    }
    let shapes = subalgebra_filter(l, &enum_index_p(&ctx, n))?;
    let scale = Submodule::full(&ctx, n).scaled(&ctx, level as i64)?;
    let trace = std::env::var_os("ZPLIE_ORACLE_TRACE").is_some();
    let records: Vec<Result<ShapeRecord>> = shapes
        .par_iter()
        .map(|shape| {
            let t0 = std::time::Instant::now();
            let rec = exhaust_shape(l, shape, level, pn, &candidates, &scale);
            if trace {
                eprintln!(
                    "trace: shape i0={} f={:?} done in {:.1}s",
                    shape.i0,
                    shape.f,
                    t0.elapsed().as_secs_f64()
                );
            }
            rec
        })
        .collect();
    let mut out_shapes = Vec::with_capacity(records.len());
    for r in records {
        out_shapes.push(r?);
    }
    let covered = out_shapes.iter().all(|s| s.covered);
    let refuted = out_shapes
        .iter()
        .any(|s| s.uncovered_samples.iter().any(|u| u.lifted_simple));
    Ok(ExhaustReport {
        p: ctx.p(),
        level,
        covered,
        refuted,
        shapes: out_shapes,
    })
}

fn exhaust_shape(
    l: &LieLattice,
    shape: &SubmoduleShape,
    level: u32,
    pn: u64,
    candidates: &[Submodule],
    scale: &Submodule,
) -> Result<ShapeRecord> {
    let ctx = l.ctx().clone();
    let n = l.rank();
    let u = shape.matrix(&ctx, n);
    let m = shape.submodule(&ctx, n)?;
    let uinv = u.inverse()?;
    // prepare the candidates applicable to this shape
    let mut prepared = Vec::new();
    for cand in candidates {
        if !cand.is_subset(&ctx, &m) {
            continue;
        }
        let group = zmodlin::msum(&ctx, cand, scale)?;
        let tester = CandidateTester::new(&ctx, &group, level)?;
        let mut coords = Vec::new();
        for g in 0..cand.rank() {
            let w = uinv.mul_vec(&cand.basis().col(g))?;
            coords.push(
                w.iter()
                    .map(|x| residue_u64(&ctx, x, level))
                    .collect::<Result<Vec<u64>>>()?,
            );
        }
        prepared.push(PreparedCandidate { coords, tester });
    }
    let layout = unknown_layout(n);
    let glevel = level + GUARD_LEVELS;
    let pg = ctx.p().pow(glevel);
    let mut dims_per_f00 = Vec::new();
    let mut st = WalkState {
        covered: true,
        samples: Vec::new(),
        lift_attempts: 0,
        lifted_found: false,
        budget: WALK_BUDGET,
    };
    'all: for f00 in 0..pn {
        // optimistic pass at the requested level only: the guard digits
        // can only remove solutions, so full coverage here is already
        // authoritative and skips the guard-level work entirely
        let plain = hom_solutions_mod(l, shape, level, f00)?;
        let mut any_uncovered = false;
        for branch in &plain.branches {
            if walk_branch(l, shape, level, pn, &prepared, &layout, f00, branch, true, &mut st)? {
                any_uncovered = true;
                break;
            }
        }
        if !any_uncovered {
            dims_per_f00.push((f00, plain.branches.iter().map(HomBranch::log_size).collect()));
            continue;
        }
        // authoritative pass: project every guard-level lift of this corner
        // residue down; identical projected branches are walked once
        let mut branches: Vec<HomBranch> = Vec::new();
        for k in 0..pg / pn {
            let sols = hom_solutions_mod(l, shape, glevel, f00 + k * pn)?;
            for branch in &sols.branches {
                let mut gens: Vec<SolutionGen> = Vec::new();
                for g in &branch.gens {
                    if let Some(pg) = project_gen(g, ctx.p(), level) {
                        if !gens
                            .iter()
                            .any(|h| h.vector == pg.vector && h.order_exp >= pg.order_exp)
                        {
                            gens.push(pg);
                        }
                    }
                }
                let top_row: Vec<u64> = branch.top_row.iter().map(|&t| t % pn).collect();
                let cand = HomBranch { top_row, gens };
                let dup = branches.iter().any(|b| {
                    b.top_row == cand.top_row
                        && b.gens.len() == cand.gens.len()
                        && b.gens.iter().zip(&cand.gens).all(|(x, y)| {
                            x.vector == y.vector && x.order_exp == y.order_exp
                        })
                });
                if !dup {
                    branches.push(cand);
                }
            }
        }
        if std::env::var_os("ZPLIE_ORACLE_TRACE").is_some() {
            eprintln!(
                "trace: shape i0={} f={:?} f00={f00} branches={} log_sizes={:?}",
                shape.i0,
                shape.f,
                branches.len(),
                branches.iter().map(HomBranch::log_size).collect::<Vec<_>>()
            );
        }
        dims_per_f00.push((f00, branches.iter().map(HomBranch::log_size).collect()));
        for branch in &branches {
            if walk_done(&st) {
                break 'all;
            }
            walk_branch(l, shape, level, pn, &prepared, &layout, f00, branch, false, &mut st)?;
        }
    }
    Ok(ShapeRecord {
        shape: shape.clone(),
        dims_per_f00,
        covered: st.covered,
        uncovered_samples: st.samples,
    })
}

struct WalkState {
    covered: bool,
    samples: Vec<UncoveredSample>,
    lift_attempts: usize,
    lifted_found: bool,
    budget: u64,
}

/// Once coverage has failed, a sample has lifted to a simple endo and the
/// sample list is full, walking further adds nothing.
fn walk_done(st: &WalkState) -> bool {
    !st.covered && st.lifted_found && st.samples.len() >= SAMPLE_CAP
}

/// Walks one solution branch against the candidate list. In probe mode it
/// only reports whether an uncovered point exists — nothing is recorded,
/// and a budget shortage counts as "uncovered" so the caller falls back to
/// the authoritative pass.
#[allow(clippy::too_many_arguments)]
fn walk_branch(
    l: &LieLattice,
    shape: &SubmoduleShape,
    level: u32,
    pn: u64,
    prepared: &[PreparedCandidate],
    layout: &[(usize, usize)],
    f00: u64,
    branch: &HomBranch,
    probe: bool,
    st: &mut WalkState,
) -> Result<bool> {
    let p = l.ctx().p();
    let n = l.rank();
    // a candidate that absorbs the branch's base point and every generator
    // direction covers the whole branch at once: the stabilization
    // condition is linear in the solution entries
    let apply = |x: &[u64], with_top: bool, w: &[u64]| -> Vec<u64> {
        let mut f = vec![vec![0u64; n]; n];
        if with_top {
            f[0][0] = f00;
            for (j, &t) in branch.top_row.iter().enumerate() {
                f[0][j + 1] = t;
            }
        }
        for (&(r, c), &v) in layout.iter().zip(x) {
            f[r][c] = v;
        }
        let mut img = vec![0u64; n];
        for (row, slot) in img.iter_mut().enumerate() {
            let mut acc = 0u64;
            for (col, &wv) in w.iter().enumerate() {
                acc = (acc + f[row][col] * wv) % pn;
            }
            *slot = acc;
        }
        img
    };
    let base = vec![0u64; layout.len()];
    let wholesale = prepared.iter().any(|cand| {
        cand.coords
            .iter()
            .all(|w| cand.tester.contains(&apply(&base, true, w)))
            && branch.gens.iter().all(|g| {
                cand.coords
                    .iter()
                    .all(|w| cand.tester.contains(&apply(&g.vector, false, w)))
            })
    });
    if wholesale {
        return Ok(false);
    }
    // directions that keep every candidate's verdict unchanged can be
    // modded out of the walk: adding such a generator moves every image
    // inside the same candidate group it was in
    let effective: Vec<SolutionGen> = branch
        .gens
        .iter()
        .filter(|g| {
            !prepared.iter().all(|cand| {
                cand.coords
                    .iter()
                    .all(|w| cand.tester.contains(&apply(&g.vector, false, w)))
            })
        })
        .cloned()
        .collect();
    let log_size: u32 = effective.iter().map(|g| g.order_exp).sum();
    let size = (p as u128).pow(log_size);
    if probe {
        // probing is only worthwhile while it is cheap; a big branch goes
        // straight to the authoritative pass
        if size > PROBE_STEP_CAP {
            return Ok(true);
        }
    } else {
        if size > st.budget as u128 {
            return Err(Error::OutOfDomain(format!(
                "solution walk needs {size} steps, budget is {}",
                st.budget
            )));
        }
        st.budget -= size as u64;
    }
    let zero = vec![0u64; layout.len()];
    let mut any_uncovered = false;
    walk_solutions(p, pn, &effective, &zero, &mut |x| {
        // assemble the full residue matrix
        let mut f = vec![vec![0u64; n]; n];
        f[0][0] = f00;
        for (j, &t) in branch.top_row.iter().enumerate() {
            f[0][j + 1] = t;
        }
        for (&(r, c), &v) in layout.iter().zip(x) {
            f[r][c] = v;
        }
        let is_covered = prepared.iter().any(|cand| {
            cand.coords.iter().all(|w| {
                let mut img = vec![0u64; n];
                for (row, slot) in img.iter_mut().enumerate() {
                    let mut acc = 0u64;
                    for (col, &wv) in w.iter().enumerate() {
                        acc = (acc + f[row][col] * wv) % pn;
                    }
                    *slot = acc;
                }
                cand.tester.contains(&img)
            })
        });
        if !is_covered {
            any_uncovered = true;
            if probe {
                return false;
            }
            st.covered = false;
            let lifted = if st.lift_attempts < LIFT_CAP {
                st.lift_attempts += 1;
                lift_uncovered(l, shape, level, &f).is_some()
            } else {
                false
            };
            if lifted {
                st.lifted_found = true;
            }
            if st.samples.len() < SAMPLE_CAP || lifted {
                st.samples.push(UncoveredSample {
                    f00,
                    f: f.clone(),
                    lifted_simple: lifted,
                });
            }
        }
        !walk_done(st)
    });
    Ok(any_uncovered)
}

/// Attempts to lift a finite-level solution to an exact simple virtual
/// endomorphism, via centered and small-rational interpretations of the
/// residues.
pub fn lift_uncovered(
    l: &LieLattice,
    shape: &SubmoduleShape,
    level: u32,
    f: &[Vec<u64>],
) -> Option<VirtualEndo> {
    let ctx = l.ctx();
    let n = l.rank();
    let pn = ctx.p().pow(level);
    let u = shape.matrix(ctx, n);
    let lifts = [lift_centered, lift_rational];
    for lift in lifts {
        let mut fm = Mat::zero(n, n);
        let mut ok = true;
        'fill: for i in 0..n {
            for j in 0..n {
                match lift(f[i][j], pn, ctx.p()) {
                    Some(x) => fm[(i, j)] = x,
                    None => {
                        ok = false;
                        break 'fill;
                    }
                }
            }
        }
        if !ok {
            continue;
        }
        if let Ok(endo) = make_endo(l, u.clone(), fm) {
            if simplicity(&endo, SimplicityConfig::default()).is_simple() {
                return Some(endo);
            }
        }
    }
    lift_exact(l, shape, level, f)
}

/// Rational points v with M v = 0, v integral and v = x0 mod p^N: the
/// kernel of [p^N M | M x0] restricted to unit last coordinate gives
/// v = x0 + p^N y / w. Yields one point per admissible kernel generator.
fn exact_points(ctx: &PContext, m: &Mat, x0: &[PScalar], level: u32) -> Vec<Vec<PScalar>> {
    let pl = ctx.p_scalar(level as i64);
    let mx0 = match m.mul_vec(x0) {
        Ok(v) => v,
        Err(_) => return Vec::new(),
    };
    let last = match Mat::from_columns(m.rows(), vec![mx0]) {
        Ok(c) => c,
        Err(_) => return Vec::new(),
    };
    let aug = match m.scale(&pl).hstack(&last) {
        Ok(a) => a,
        Err(_) => return Vec::new(),
    };
    let ker = zmodlin::kernel(ctx, &aug);
    let mut out = Vec::new();
    for j in 0..ker.rank() {
        let g = ker.basis().col(j);
        let w = &g[x0.len()];
        if ctx.val(w) != Val::Finite(0) {
            continue;
        }
        let winv = match w.inv() {
            Ok(x) => x,
            Err(_) => continue,
        };
        let v: Vec<PScalar> = x0
            .iter()
            .zip(&g[..x0.len()])
            .map(|(x, y)| x + &(&(&pl * y) * &winv))
            .collect();
        out.push(v);
    }
    out
}

/// Exact lift of an uncovered residue: adjust the top row inside its
/// residue class so the top-row kernel condition holds exactly, then solve
/// the (now linear) homomorphism system exactly in the residue class of
/// the remaining entries.
fn lift_exact(
    l: &LieLattice,
    shape: &SubmoduleShape,
    level: u32,
    f: &[Vec<u64>],
) -> Option<VirtualEndo> {
    let ctx = l.ctx();
    let n = l.rank();
    let d = n - 1;
    let pn = ctx.p().pow(level);
    let gb = good_basis_from_parts(l, Mat::identity(n)).ok()?;
    let u = shape.matrix(ctx, n);
    let (b, integral) = induced_b(&gb, &u).ok()?;
    if !integral {
        return None;
    }
    let a = gb.a();
    let t0: Vec<PScalar> = (0..d).map(|j| lift_centered(f[0][j + 1], pn, ctx.p()).unwrap()).collect();
    let f00s = lift_centered(f[0][0], pn, ctx.p()).unwrap();
    let bt = b.transpose();
    for ts in exact_points(ctx, &bt, &t0, level) {
        // the same linear system as the finite-level solver, with the
        // exact top row substituted in
        let nu = d + d * d;
        let gidx = |k: usize, j: usize| d + k * d + j;
        let mut rows: Vec<Vec<PScalar>> = Vec::new();
        for i in 0..d {
            for j in i + 1..d {
                for k in 0..d {
                    let mut row = vec![PScalar::zero(); nu];
                    for ll in 0..d {
                        row[gidx(ll, j)] = &row[gidx(ll, j)] + &(&ts[i] * &a[(k, ll)]);
                        row[gidx(ll, i)] = &row[gidx(ll, i)] - &(&ts[j] * &a[(k, ll)]);
                    }
                    rows.push(row);
                }
            }
        }
        for k in 0..d {
            for j in 0..d {
                let mut row = vec![PScalar::zero(); nu];
                for ll in 0..d {
                    row[gidx(k, ll)] = &row[gidx(k, ll)] + &b[(ll, j)];
                    row[gidx(ll, j)] = &row[gidx(ll, j)] - &(&f00s * &a[(k, ll)]);
                    row[ll] = &row[ll] + &(&ts[j] * &a[(k, ll)]);
                }
                rows.push(row);
            }
        }
        let s = Mat::from_rows(rows).ok()?;
        let mut x0 = vec![PScalar::zero(); nu];
        for i in 0..d {
            x0[i] = lift_centered(f[i + 1][0], pn, ctx.p()).unwrap();
        }
        for k in 0..d {
            for j in 0..d {
                x0[gidx(k, j)] = lift_centered(f[k + 1][j + 1], pn, ctx.p()).unwrap();
            }
        }
        for xs in exact_points(ctx, &s, &x0, level) {
            let mut fm = Mat::zero(n, n);
            fm[(0, 0)] = f00s.clone();
            for j in 0..d {
                fm[(0, j + 1)] = ts[j].clone();
            }
            for i in 0..d {
                fm[(i + 1, 0)] = xs[i].clone();
            }
            for k in 0..d {
                for j in 0..d {
                    fm[(k + 1, j + 1)] = xs[gidx(k, j)].clone();
                }
            }
            if let Ok(endo) = make_endo(l, u.clone(), fm) {
                if simplicity(&endo, SimplicityConfig::default()).is_simple() {
                    return Some(endo);
                }
            }
        }
    }
    None
}

fn lift_centered(r: u64, pn: u64, _p: u64) -> Option<PScalar> {
    let x = if r > pn / 2 {
        r as i64 - pn as i64
    } else {
        r as i64
    };
    Some(PScalar::from_int(x))
}

fn lift_rational(r: u64, pn: u64, p: u64) -> Option<PScalar> {
    // smallest a/b with b coprime to p and a = r b mod pn
    let mut best: Option<(i64, i64, i64)> = None;
    for b in 1..pn as i64 {
        if b as u64 % p == 0 {
            continue;
        }
        let raw = (r as i64 * b) % pn as i64;
        let a = if raw > pn as i64 / 2 {
            raw - pn as i64
        } else {
            raw
        };
        let h = a.abs().max(b);
        if best.map(|(_, _, bh)| h < bh).unwrap_or(true) {
            best = Some((a, b, h));
        }
    }
    best.map(|(a, b, _)| PScalar::ratio(a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{construct, FamilyTag};
    use crate::selfsim::certify;

    fn ctx(p: u64) -> PContext {
        PContext::new(p).unwrap()
    }

    #[test]
    fn enum_counts() {
        for (p, n, want) in [(3u64, 3usize, 13usize), (5, 3, 31), (3, 4, 40), (3, 5, 121), (5, 5, 781)] {
            let c = ctx(p);
            let shapes = enum_index_p(&c, n);
            assert_eq!(shapes.len(), want, "p={p} n={n}");
            // duplicate-free and index p
            for (i, s) in shapes.iter().enumerate() {
                assert!(!shapes[..i].contains(s));
                let m = s.submodule(&c, n).unwrap();
                assert_eq!(zmodlin::index(&c, &m), Val::Finite(1));
            }
        }
    }

    #[test]
    fn subalgebra_filter_examples() {
        let c = ctx(3);
        let shapes = enum_index_p(&c, 3);
        // abelian: everything closes
        let l0 = construct(&c, &FamilyTag::L0).unwrap();
        assert_eq!(subalgebra_filter(&l0, &shapes).unwrap().len(), 13);
        // scalar action: the induced matrix stays integral for every shape
        let l1 = construct(&c, &FamilyTag::L1 { s: 1 }).unwrap();
        assert_eq!(subalgebra_filter(&l1, &shapes).unwrap().len(), 13);
        // nilpotent action: only p x0 and the f1 = 0 slices close
        let l3 = construct(&c, &FamilyTag::L3 { s: 0 }).unwrap();
        let kept = subalgebra_filter(&l3, &shapes).unwrap();
        assert_eq!(kept.len(), 4);
        assert!(kept.iter().any(|s| s.i0 == 0));
        assert!(kept
            .iter()
            .filter(|s| s.i0 == 2)
            .all(|s| s.f[1] == 0));
    }

    #[test]
    fn hom_solutions_zero_map() {
        // F00 = 0 always admits the zero block solution
        let c = ctx(3);
        let l2 = construct(
            &c,
            &FamilyTag::L2 {
                s: 1,
                r: 1,
                c: PScalar::one(),
            },
        )
        .unwrap();
        let shapes = subalgebra_filter(&l2, &enum_index_p(&c, 3)).unwrap();
        let sols = hom_solutions_mod(&l2, &shapes[0], 1, 0).unwrap();
        let zero = vec![vec![0u64; 3]; 3];
        assert!(sols.contains(3, &zero));
    }

    #[test]
    fn certificate_reduces_to_solution() {
        // congruence consistency for an index-p certificate
        let c = ctx(3);
        let tag = FamilyTag::L2 {
            s: 1,
            r: 1,
            c: PScalar::from_int(3),
        };
        let endo = certify(&c, &tag, 1).unwrap();
        let l = construct(&c, &tag).unwrap();
        let level = 2u32;
        let pn = 9u64;
        // locate the matching shape
        let shapes = enum_index_p(&c, 3);
        let m = endo.domain();
        let shape = shapes
            .iter()
            .find(|s| &s.submodule(&c, 3).unwrap() == m)
            .expect("index-p domain matches a shape");
        // residues of F in the shape basis: F columns are images of U's
        // columns; re-express against the shape matrix
        let transfer = endo.f() * &(&shape.matrix(&c, 3).inverse().unwrap() * endo.u()).inverse().unwrap();
        let mut f = vec![vec![0u64; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                f[i][j] = residue_u64(&c, &transfer[(i, j)], level).unwrap();
            }
        }
        let sols = hom_solutions_mod(&l, shape, level, f[0][0]).unwrap();
        assert!(sols.contains(pn, &f));
    }

    #[test]
    fn exhaust_derived_rank_one() {
        // nilpotent action at level 1: everything is covered
        let c = ctx(3);
        let l3 = construct(&c, &FamilyTag::L3 { s: 0 }).unwrap();
        let report = exhaust(&l3, 1, &[]).unwrap();
        assert!(report.covered, "{}", report.to_json());
        assert!(!report.refuted);
    }

    #[test]
    fn exhaust_unipotent_family() {
        let c = ctx(3);
        // val(c) = 0: not self-similar of index p, the oracle covers it
        let l = construct(
            &c,
            &FamilyTag::L2 {
                s: 1,
                r: 1,
                c: PScalar::one(),
            },
        )
        .unwrap();
        let report = exhaust(&l, 2, &[]).unwrap();
        assert!(report.covered, "{}", report.to_json());
        assert!(!report.refuted);
        // val(c) = 1: self-similar of index p, so coverage must fail and
        // an uncovered solution lifts to an exact simple endo
        let l = construct(
            &c,
            &FamilyTag::L2 {
                s: 1,
                r: 1,
                c: PScalar::from_int(3),
            },
        )
        .unwrap();
        let report = exhaust(&l, 2, &[]).unwrap();
        assert!(!report.covered);
    }

    #[test]
    fn exhaust_deterministic() {
        let c = ctx(3);
        let l3 = construct(&c, &FamilyTag::L3 { s: 1 }).unwrap();
        let a = exhaust(&l3, 1, &[]).unwrap().to_json().to_string();
        let b = exhaust(&l3, 1, &[]).unwrap().to_json().to_string();
        assert_eq!(a, b);
    }

    #[test]
    fn exhaust_rejects_non_ideal() {
        let c = ctx(3);
        let l3 = construct(&c, &FamilyTag::L3 { s: 0 }).unwrap();
        // <x0> is not an ideal of the nilpotent-action lattice
        let line = zmodlin::hnf(
            &c,
            &Mat::from_columns(
                3,
                vec![vec![PScalar::one(), PScalar::zero(), PScalar::zero()]],
            )
            .unwrap(),
        )
        .unwrap();
        assert!(matches!(
            exhaust(&l3, 1, &[line]),
            Err(Error::CandidateNotIdeal(_))
        ));
    }

    #[test]
    fn lift_finds_certificate() {
        let c = ctx(3);
        let tag = FamilyTag::L2 {
            s: 1,
            r: 1,
            c: PScalar::from_int(3),
        };
        let l = construct(&c, &tag).unwrap();
        let endo = certify(&c, &tag, 1).unwrap();
        let shapes = enum_index_p(&c, 3);
        let shape = shapes
            .iter()
            .find(|s| &s.submodule(&c, 3).unwrap() == endo.domain())
            .unwrap();
        let transfer = endo.f() * &(&shape.matrix(&c, 3).inverse().unwrap() * endo.u()).inverse().unwrap();
        let mut f = vec![vec![0u64; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                f[i][j] = residue_u64(&c, &transfer[(i, j)], 2).unwrap();
            }
        }
        let lifted = lift_uncovered(&l, shape, 2, &f).expect("certificate lifts");
        assert_eq!(lifted.index_exp(), 1);
    }
}
