//! Lie lattices over Zp given by structure constants: brackets, adjoints,
//! derived and lower central series, centers, and restriction to
//! subalgebras.

use std::collections::BTreeMap;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::padic::{PContext, PScalar};
use crate::zmodlin::{self, Mat, Submodule};

/// A Lie lattice of finite rank over Zp. Structure constants satisfy
/// antisymmetry and the Jacobi identity, checked at construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LieLattice {
    ctx: PContext,
    n: usize,
    /// sc[i][j] = coordinates of [e_i, e_j]
    sc: Vec<Vec<Vec<PScalar>>>,
}

/// How a submodule sits inside a lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StructureKind {
    ModuleOnly,
    Subalgebra,
    Ideal,
}

/// Which descending series to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesKind {
    Derived,
    LowerCentral,
}

/// A computed series chain with resolution flags.
#[derive(Debug, Clone)]
pub struct Series {
    pub chain: Vec<Submodule>,
    /// chain reached the zero module within the step budget
    pub reaches_zero: bool,
    /// chain stabilized at a nonzero module
    pub stabilized: bool,
}

pub fn new_lie(ctx: PContext, sc: Vec<Vec<Vec<PScalar>>>) -> Result<LieLattice> {
    let n = sc.len();
    for (i, row) in sc.iter().enumerate() {
        if row.len() != n {
            return Err(Error::MalformedMatrix(format!(
                "structure constants row {i} has length {}",
                row.len()
            )));
        }
        for (j, v) in row.iter().enumerate() {
            if v.len() != n {
                return Err(Error::MalformedMatrix(format!(
                    "structure constant vector ({i},{j}) has length {}",
                    v.len()
                )));
            }
            for x in v {
                if !ctx.val(x).is_integral() {
                    return Err(Error::NonIntegralConstant(i, j));
                }
            }
        }
    }
    let lat = LieLattice { ctx, n, sc };
    // antisymmetry
    for i in 0..n {
        for j in i..n {
            for k in 0..n {
                let sum = &lat.sc[i][j][k] + &lat.sc[j][i][k];
                if !sum.is_zero() {
                    return Err(Error::Antisymmetry(i, j));
                }
            }
        }
    }
    // Jacobi on basis triples
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let a = lat.bracket(&lat.sc[j][k], &basis_vec(n, i))?;
                let b = lat.bracket(&lat.sc[k][i], &basis_vec(n, j))?;
                let c = lat.bracket(&lat.sc[i][j], &basis_vec(n, k))?;
                let mut bad = false;
                for t in 0..n {
                    let s = &(&a[t] + &b[t]) + &c[t];
                    if !s.is_zero() {
                        bad = true;
                    }
                }
                if bad {
                    return Err(Error::Jacobi(i, j, k));
                }
            }
        }
    }
    Ok(lat)
}

fn basis_vec(n: usize, i: usize) -> Vec<PScalar> {
    let mut v = vec![PScalar::zero(); n];
    v[i] = PScalar::one();
    v
}

impl LieLattice {
    pub fn ctx(&self) -> &PContext {
        &self.ctx
    }

    pub fn rank(&self) -> usize {
        self.n
    }

    pub fn sc(&self, i: usize, j: usize) -> &[PScalar] {
        &self.sc[i][j]
    }

    pub fn full_module(&self) -> Submodule {
        Submodule::full(&self.ctx, self.n)
    }

    /// Bilinear bracket of two coordinate vectors. Note [e_i, x] is linear
    /// in x, so rational coordinates are accepted; the result may then be
    /// rational too.
    pub fn bracket(&self, x: &[PScalar], y: &[PScalar]) -> Result<Vec<PScalar>> {
        if x.len() != self.n || y.len() != self.n {
            return Err(Error::RankMismatch(x.len(), y.len()));
        }
        let mut out = vec![PScalar::zero(); self.n];
        for i in 0..self.n {
            if x[i].is_zero() {
                continue;
            }
            for j in 0..self.n {
                if y[j].is_zero() {
                    continue;
                }
                let coeff = &x[i] * &y[j];
                for k in 0..self.n {
                    if self.sc[i][j][k].is_zero() {
                        continue;
                    }
                    let delta = &coeff * &self.sc[i][j][k];
                    out[k] += &delta;
                }
            }
        }
        Ok(out)
    }

    /// Matrix of ad(x): y -> [x, y].
    pub fn adjoint(&self, x: &[PScalar]) -> Result<Mat> {
        let mut cols = Vec::with_capacity(self.n);
        for j in 0..self.n {
            cols.push(self.bracket(x, &basis_vec(self.n, j))?);
        }
        Mat::from_columns(self.n, cols)
    }

    /// Submodule generated by brackets of generators, [M, N].
    pub fn bracket_modules(&self, m: &Submodule, nn: &Submodule) -> Result<Submodule> {
        let mut cols = Vec::new();
        for a in m.gens() {
            for b in nn.gens() {
                cols.push(self.bracket(&a, &b)?);
            }
        }
        zmodlin::hnf(&self.ctx, &Mat::from_columns(self.n, cols)?)
    }

    /// The derived submodule [L, L].
    pub fn derived(&self) -> Submodule {
        let full = self.full_module();
        self.bracket_modules(&full, &full).expect("rank matches")
    }

    /// iso_L([L, L]): the isolator of the derived submodule.
    pub fn iso_derived(&self) -> Submodule {
        zmodlin::isolator(&self.ctx, &self.derived())
    }

    /// Descending series starting at L itself. `isolated` takes isolators
    /// at each step.
    pub fn series(&self, kind: SeriesKind, max_steps: usize, isolated: bool) -> Series {
        let full = self.full_module();
        let mut chain = vec![full.clone()];
        let mut reaches_zero = false;
        let mut stabilized = false;
        for _ in 0..max_steps {
            let last = chain.last().expect("nonempty");
            if last.is_zero() {
                reaches_zero = true;
                break;
            }
            let other = match kind {
                SeriesKind::Derived => last,
                SeriesKind::LowerCentral => &full,
            };
            let mut next = self.bracket_modules(last, other).expect("rank matches");
            if isolated {
                next = zmodlin::isolator(&self.ctx, &next);
            }
            if &next == last {
                stabilized = true;
                break;
            }
            chain.push(next);
        }
        if chain.last().map(Submodule::is_zero).unwrap_or(false) {
            reaches_zero = true;
        }
        Series {
            chain,
            reaches_zero,
            stabilized,
        }
    }

    pub fn default_max_steps(&self) -> usize {
        2 * self.n + 2
    }

    pub fn is_solvable(&self) -> bool {
        self.series(SeriesKind::Derived, self.default_max_steps(), false)
            .reaches_zero
    }

    pub fn is_nilpotent(&self) -> bool {
        self.series(SeriesKind::LowerCentral, self.default_max_steps(), false)
            .reaches_zero
    }

    /// Z(L) as the kernel of the stacked adjoint maps.
    pub fn center(&self) -> Submodule {
        let mut stacked = Mat::zero(0, self.n);
        for i in 0..self.n {
            let ad = self.adjoint(&basis_vec(self.n, i)).expect("rank matches");
            // rows of ad(e_i) applied to x give [e_i, x]
            stacked = if stacked.rows() == 0 {
                ad
            } else {
                stack_vertical(&stacked, &ad)
            };
        }
        zmodlin::kernel(&self.ctx, &stacked)
    }

    /// Classifies M as ideal / subalgebra / plain submodule.
    pub fn substructure_kind(&self, m: &Submodule) -> Result<StructureKind> {
        if m.ambient() != self.n {
            return Err(Error::RankMismatch(m.ambient(), self.n));
        }
        let lm = self.bracket_modules(&self.full_module(), m)?;
        if lm.is_subset(&self.ctx, m) {
            return Ok(StructureKind::Ideal);
        }
        let mm = self.bracket_modules(m, m)?;
        if mm.is_subset(&self.ctx, m) {
            return Ok(StructureKind::Subalgebra);
        }
        Ok(StructureKind::ModuleOnly)
    }

    /// Structure constants of a subalgebra M in its canonical basis. Returns
    /// the restricted lattice and the basis matrix embedding it back into L.
    pub fn restrict(&self, m: &Submodule) -> Result<(LieLattice, Mat)> {
        let kind = self.substructure_kind(m)?;
        if kind == StructureKind::ModuleOnly {
            return Err(Error::NotClosed);
        }
        let r = m.rank();
        let mut sc = vec![vec![vec![PScalar::zero(); r]; r]; r];
        let gens = m.gens();
        for i in 0..r {
            for j in 0..r {
                if i == j {
                    continue;
                }
                let br = self.bracket(&gens[i], &gens[j])?;
                let coords = m.coordinates(&self.ctx, &br).ok_or(Error::NotClosed)?;
                sc[i][j] = coords;
            }
        }
        let lat = new_lie(self.ctx.clone(), sc)?;
        Ok((lat, m.basis().clone()))
    }

    /// Whether T is a Lie-lattice isomorphism from `self` onto `other`:
    /// unimodular over Zp and bracket-preserving on basis pairs.
    pub fn is_isomorphism_to(&self, other: &LieLattice, t: &Mat) -> bool {
        if self.n != other.n || t.rows() != self.n || t.cols() != self.n {
            return false;
        }
        if !t.is_integral(&self.ctx) {
            return false;
        }
        match t.det() {
            Ok(d) => {
                if self.ctx.val(&d) != crate::padic::Val::Finite(0) {
                    return false;
                }
            }
            Err(_) => return false,
        }
        for i in 0..self.n {
            for j in i + 1..self.n {
                let lhs = match other.bracket(&t.col(i), &t.col(j)) {
                    Ok(v) => v,
                    Err(_) => return false,
                };
                let rhs = match t.mul_vec(&self.sc[i][j]) {
                    Ok(v) => v,
                    Err(_) => return false,
                };
                if lhs != rhs {
                    return false;
                }
            }
        }
        true
    }

    /// Lattice JSON: {"p", "rank", "brackets": {"i,j": [[k, "scalar"], ...]}}
    /// listing only i < j pairs; omitted pairs are zero.
    pub fn to_json(&self) -> Value {
        let mut brackets = BTreeMap::new();
        for i in 0..self.n {
            for j in i + 1..self.n {
                let terms: Vec<Value> = self.sc[i][j]
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| !c.is_zero())
                    .map(|(k, c)| json!([k, c.to_string()]))
                    .collect();
                if !terms.is_empty() {
                    brackets.insert(format!("{i},{j}"), Value::Array(terms));
                }
            }
        }
        json!({
            "p": self.ctx.p(),
            "rank": self.n,
            "brackets": brackets,
        })
    }

    pub fn from_json(v: &Value) -> Result<LieLattice> {
        let p = v
            .get("p")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::Parse("missing prime field \"p\"".into()))?;
        let n = v
            .get("rank")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::Parse("missing \"rank\"".into()))? as usize;
        let ctx = PContext::new(p)?;
        let mut sc = vec![vec![vec![PScalar::zero(); n]; n]; n];
        if let Some(br) = v.get("brackets") {
            let map = br
                .as_object()
                .ok_or_else(|| Error::Parse("\"brackets\" must be an object".into()))?;
            for (key, terms) in map {
                let (i, j) = key
                    .split_once(',')
                    .ok_or_else(|| Error::Parse(format!("bad bracket key {key:?}")))?;
                let i: usize = i
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad bracket key {key:?}")))?;
                let j: usize = j
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad bracket key {key:?}")))?;
                if i >= j || j >= n {
                    return Err(Error::Parse(format!(
                        "bracket key {key:?} must satisfy i < j < rank"
                    )));
                }
                let terms = terms
                    .as_array()
                    .ok_or_else(|| Error::Parse("bracket terms must be an array".into()))?;
                for t in terms {
                    let pair = t
                        .as_array()
                        .filter(|a| a.len() == 2)
                        .ok_or_else(|| Error::Parse("bracket term must be [k, scalar]".into()))?;
                    let k = pair[0]
                        .as_u64()
                        .ok_or_else(|| Error::Parse("bracket term index must be an int".into()))?
                        as usize;
                    if k >= n {
                        return Err(Error::Parse(format!("bracket term index {k} out of range")));
                    }
                    let s = pair[1]
                        .as_str()
                        .ok_or_else(|| Error::Parse("bracket scalar must be a string".into()))?;
                    let c: PScalar = s.parse()?;
                    sc[i][j][k] = c.clone();
                    sc[j][i][k] = -c;
                }
            }
        }
        new_lie(ctx, sc)
    }
}

fn stack_vertical(a: &Mat, b: &Mat) -> Mat {
    assert_eq!(a.cols(), b.cols());
    let mut rows = Vec::with_capacity(a.rows() + b.rows());
    for i in 0..a.rows() {
        rows.push((0..a.cols()).map(|j| a[(i, j)].clone()).collect());
    }
    for i in 0..b.rows() {
        rows.push((0..b.cols()).map(|j| b[(i, j)].clone()).collect());
    }
    Mat::from_rows(rows).expect("rectangular")
}

/// Builds a metabelian lattice of rank d+1 from the bracket data
/// [x_0, x_i] = sum_k A_{ki} x_k (columns of A over the abelian part
/// x_1..x_d) with [x_i, x_j] = 0 for i, j >= 1. This shape always satisfies
/// the Jacobi identity.
pub fn metabelian_from_matrix(ctx: PContext, a: &Mat) -> Result<LieLattice> {
    let d = a.rows();
    if a.cols() != d {
        return Err(Error::MalformedMatrix("action matrix must be square".into()));
    }
    let n = d + 1;
    let mut sc = vec![vec![vec![PScalar::zero(); n]; n]; n];
    for i in 1..n {
        for k in 1..n {
            sc[0][i][k] = a[(k - 1, i - 1)].clone();
            sc[i][0][k] = -&a[(k - 1, i - 1)];
        }
    }
    new_lie(ctx, sc)
}
