//! Exact arithmetic in the subring of Q of fractions with p-regular
//! denominator, together with valuation, residue, square-class, Hensel and
//! Newton-polygon services.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{BigUint, Integer, One, Signed, Zero};

use crate::error::{Error, Result};

/// p-adic valuation value: an integer or infinity (valuation of zero).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Val {
    Finite(i64),
    Infinity,
}

impl Val {
    pub fn is_finite(self) -> bool {
        matches!(self, Val::Finite(_))
    }

    pub fn finite(self) -> Option<i64> {
        match self {
            Val::Finite(v) => Some(v),
            Val::Infinity => None,
        }
    }

    /// Nonnegative or infinite, i.e. the valuation of a Zp element.
    pub fn is_integral(self) -> bool {
        match self {
            Val::Finite(v) => v >= 0,
            Val::Infinity => true,
        }
    }
}

impl PartialOrd for Val {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Val {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Val::Infinity, Val::Infinity) => Ordering::Equal,
            (Val::Infinity, Val::Finite(_)) => Ordering::Greater,
            (Val::Finite(_), Val::Infinity) => Ordering::Less,
            (Val::Finite(a), Val::Finite(b)) => a.cmp(b),
        }
    }
}

impl Add for Val {
    type Output = Val;
    fn add(self, rhs: Val) -> Val {
        match (self, rhs) {
            (Val::Finite(a), Val::Finite(b)) => Val::Finite(a + b),
            _ => Val::Infinity,
        }
    }
}

impl fmt::Display for Val {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Val::Finite(v) => write!(f, "{v}"),
            Val::Infinity => write!(f, "inf"),
        }
    }
}

/// An exact rational scalar. Elements of Zp are represented by the scalars
/// with p-regular denominator (valuation >= 0); general rationals are allowed
/// where Qp-polynomials need them.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PScalar(BigRational);

impl PScalar {
    pub fn zero() -> Self {
        PScalar(BigRational::zero())
    }

    pub fn one() -> Self {
        PScalar(BigRational::one())
    }

    pub fn from_int(n: i64) -> Self {
        PScalar(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn from_bigint(n: BigInt) -> Self {
        PScalar(BigRational::from_integer(n))
    }

    pub fn ratio(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        PScalar(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn from_rational(r: BigRational) -> Self {
        PScalar(r)
    }

    pub fn rational(&self) -> &BigRational {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.0.is_one()
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn inv(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::Singular);
        }
        Ok(PScalar(self.0.recip()))
    }

    /// p^k for k possibly negative.
    pub fn p_pow(p: u64, k: i64) -> Self {
        let base = BigInt::from(p);
        if k >= 0 {
            PScalar(BigRational::from_integer(base.pow(k as u32)))
        } else {
            PScalar(BigRational::new(BigInt::one(), base.pow((-k) as u32)))
        }
    }
}

impl fmt::Display for PScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.denom().is_one() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl FromStr for PScalar {
    type Err = Error;

    /// Parses "num" or "num/den" in decimal.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (n, d) = match s.split_once('/') {
            Some((n, d)) => (n, d),
            None => (s, "1"),
        };
        let num = BigInt::from_str(n.trim())
            .map_err(|_| Error::Parse(format!("bad scalar numerator {n:?}")))?;
        let den = BigInt::from_str(d.trim())
            .map_err(|_| Error::Parse(format!("bad scalar denominator {d:?}")))?;
        if den.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        Ok(PScalar(BigRational::new(num, den)))
    }
}

macro_rules! scalar_binop {
    ($trait:ident, $method:ident) => {
        impl $trait for PScalar {
            type Output = PScalar;
            fn $method(self, rhs: PScalar) -> PScalar {
                PScalar((self.0).$method(rhs.0))
            }
        }
        impl<'a> $trait<&'a PScalar> for &'a PScalar {
            type Output = PScalar;
            fn $method(self, rhs: &'a PScalar) -> PScalar {
                PScalar((&self.0).$method(&rhs.0))
            }
        }
    };
}

scalar_binop!(Add, add);
scalar_binop!(Sub, sub);
scalar_binop!(Mul, mul);

impl AddAssign<&PScalar> for PScalar {
    fn add_assign(&mut self, rhs: &PScalar) {
        self.0 += &rhs.0;
    }
}

impl SubAssign<&PScalar> for PScalar {
    fn sub_assign(&mut self, rhs: &PScalar) {
        self.0 -= &rhs.0;
    }
}

impl MulAssign<&PScalar> for PScalar {
    fn mul_assign(&mut self, rhs: &PScalar) {
        self.0 *= &rhs.0;
    }
}

impl Neg for PScalar {
    type Output = PScalar;
    fn neg(self) -> PScalar {
        PScalar(-self.0)
    }
}

impl Neg for &PScalar {
    type Output = PScalar;
    fn neg(self) -> PScalar {
        PScalar(-&self.0)
    }
}

fn int_valuation(n: &BigInt, p: u64) -> Val {
    if n.is_zero() {
        return Val::Infinity;
    }
    let p = BigInt::from(p);
    let mut v = 0i64;
    let mut cur = n.abs();
    loop {
        let (q, r) = cur.div_rem(&p);
        if r.is_zero() {
            v += 1;
            cur = q;
        } else {
            return Val::Finite(v);
        }
    }
}

/// Arithmetic context: the prime, the fixed quadratic non-residue, and a
/// default precision for residue computations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PContext {
    p: u64,
    rho: Option<u64>,
    default_precision: u32,
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

fn modpow(base: u64, mut exp: u64, modulus: u64) -> u64 {
    let mut acc: u128 = 1;
    let m = modulus as u128;
    let mut b = (base % modulus) as u128;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * b % m;
        }
        b = b * b % m;
        exp >>= 1;
    }
    acc as u64
}

impl PContext {
    pub fn new(p: u64) -> Result<Self> {
        Self::with_precision(p, 2)
    }

    pub fn with_precision(p: u64, default_precision: u32) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::OutOfDomain(format!("{p} is not prime")));
        }
        if default_precision == 0 {
            return Err(Error::EmptyModulus);
        }
        let rho = if p >= 3 {
            // smallest positive non-residue mod p
            let mut r = 2u64;
            loop {
                if modpow(r, (p - 1) / 2, p) == p - 1 {
                    break Some(r);
                }
                r += 1;
            }
        } else {
            None
        };
        Ok(PContext {
            p,
            rho,
            default_precision,
        })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn default_precision(&self) -> u32 {
        self.default_precision
    }

    /// The fixed quadratic non-residue, defined for p >= 3.
    pub fn rho(&self) -> Result<PScalar> {
        self.rho
            .map(|r| PScalar::from_int(r as i64))
            .ok_or(Error::UnsupportedPrime(self.p))
    }

    pub fn require_odd(&self) -> Result<()> {
        if self.p < 3 {
            Err(Error::UnsupportedPrime(self.p))
        } else {
            Ok(())
        }
    }

    /// p-adic valuation of an arbitrary rational scalar.
    pub fn val(&self, x: &PScalar) -> Val {
        match (int_valuation(x.numer(), self.p), int_valuation(x.denom(), self.p)) {
            (Val::Infinity, _) => Val::Infinity,
            (Val::Finite(a), Val::Finite(b)) => Val::Finite(a - b),
            (_, Val::Infinity) => unreachable!("zero denominator"),
        }
    }

    /// Checks that x is a Zp element (valuation >= 0).
    pub fn require_integral(&self, x: &PScalar) -> Result<()> {
        if self.val(x).is_integral() {
            Ok(())
        } else {
            Err(Error::MalformedScalar(x.to_string(), self.p))
        }
    }

    /// The unit part u with x = p^v * u, for nonzero x.
    pub fn unit_part(&self, x: &PScalar) -> Result<PScalar> {
        match self.val(x) {
            Val::Infinity => Err(Error::NonUnit(x.to_string())),
            Val::Finite(v) => Ok(&PScalar::p_pow(self.p, -v) * x),
        }
    }

    pub fn p_scalar(&self, k: i64) -> PScalar {
        PScalar::p_pow(self.p, k)
    }

    /// x mod p^n as an integer in [0, p^n), via the modular inverse of the
    /// denominator.
    pub fn residue(&self, x: &PScalar, n: u32) -> Result<BigUint> {
        if n == 0 {
            return Err(Error::EmptyModulus);
        }
        self.require_integral(x)?;
        let modulus = BigInt::from(self.p).pow(n);
        let den = x.denom().mod_floor(&modulus);
        let den_inv = mod_inverse(&den, &modulus)
            .ok_or_else(|| Error::MalformedScalar(x.to_string(), self.p))?;
        let r = (x.numer().mod_floor(&modulus) * den_inv).mod_floor(&modulus);
        Ok(r.to_biguint().expect("mod_floor of positive modulus"))
    }

    /// Whether the unit u is a square in Zp^*, by the Euler criterion.
    pub fn is_square_unit(&self, u: &PScalar) -> Result<bool> {
        self.require_odd()?;
        if self.val(u) != Val::Finite(0) {
            return Err(Error::NonUnit(u.to_string()));
        }
        let r = self.residue(u, 1)?;
        let r: u64 = r.try_into().expect("residue below p fits in u64");
        Ok(modpow(r, (self.p - 1) / 2, self.p) == 1)
    }

    /// Lifts a simple root f0 of P(k) = k^2 + a k - c modulo p to a root
    /// modulo p^n, by Newton iteration. Returns the lift in [0, p^n).
    pub fn hensel_quadratic(&self, a: &PScalar, c: &PScalar, f0: u64, n: u32) -> Result<PScalar> {
        if n == 0 {
            return Err(Error::EmptyModulus);
        }
        self.require_integral(a)?;
        self.require_integral(c)?;
        let p = BigInt::from(self.p);
        let a0 = BigInt::from(self.residue(a, n)?);
        let c0 = BigInt::from(self.residue(c, n)?);
        let modulus = p.pow(n);
        let f0 = BigInt::from(f0);
        let value = (&f0 * &f0 + &a0 * &f0 - &c0).mod_floor(&p);
        if !value.is_zero() {
            return Err(Error::NoRoot);
        }
        let deriv = (BigInt::from(2) * &f0 + &a0).mod_floor(&p);
        if deriv.is_zero() {
            return Err(Error::HenselFailure);
        }
        let mut f = f0;
        // quadratic convergence; n doublings more than suffice
        for _ in 0..n {
            let value = (&f * &f + &a0 * &f - &c0).mod_floor(&modulus);
            let deriv = (BigInt::from(2) * &f + &a0).mod_floor(&modulus);
            let dinv = mod_inverse(&deriv, &modulus).ok_or(Error::HenselFailure)?;
            f = (&f - value * dinv).mod_floor(&modulus);
        }
        debug_assert!((&f * &f + &a0 * &f - &c0).mod_floor(&modulus).is_zero());
        Ok(PScalar::from_bigint(f))
    }
}

/// Inverse of a modulo m, when gcd(a, m) = 1.
pub(crate) fn mod_inverse(a: &BigInt, m: &BigInt) -> Option<BigInt> {
    let e = a.extended_gcd(m);
    if e.gcd.is_one() {
        Some(e.x.mod_floor(m))
    } else {
        None
    }
}

/// A polynomial over the rationals, coefficients in ascending degree order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PPoly {
    coeffs: Vec<PScalar>,
}

impl PPoly {
    /// Builds a polynomial from ascending coefficients; trailing zeros are
    /// stripped. The zero polynomial is rejected.
    pub fn new(coeffs: Vec<PScalar>) -> Result<Self> {
        let mut coeffs = coeffs;
        while coeffs.len() > 1 && coeffs.last().map(PScalar::is_zero).unwrap_or(false) {
            coeffs.pop();
        }
        if coeffs.is_empty() || (coeffs.len() == 1 && coeffs[0].is_zero()) {
            return Err(Error::MalformedPolynomial("zero polynomial".into()));
        }
        Ok(PPoly { coeffs })
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, i: usize) -> PScalar {
        self.coeffs.get(i).cloned().unwrap_or_else(PScalar::zero)
    }

    pub fn coeffs(&self) -> &[PScalar] {
        &self.coeffs
    }

    pub fn leading(&self) -> &PScalar {
        self.coeffs.last().expect("nonempty")
    }

    pub fn is_monic(&self) -> bool {
        self.leading().is_one()
    }

    pub fn eval(&self, x: &PScalar) -> PScalar {
        let mut acc = PScalar::zero();
        for c in self.coeffs.iter().rev() {
            acc = &(&acc * x) + c;
        }
        acc
    }
}

/// One segment of a Newton polygon. The slope equals the common valuation of
/// the roots attached to the segment; `None` encodes infinite slope (roots
/// at zero, i.e. a power of the variable divides the polynomial).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NewtonSlope {
    pub slope: Option<BigRational>,
    pub length: usize,
}

/// Newton-polygon slopes: lower convex hull of the points
/// (i, val(coefficient of x^(deg - i))), slopes ascending, lengths summing
/// to the degree. With this indexing each slope is the valuation of the
/// roots it accounts for.
pub fn newton_slopes(ctx: &PContext, poly: &PPoly) -> Result<Vec<NewtonSlope>> {
    let deg = poly.degree();
    if deg == 0 {
        return Ok(vec![]);
    }
    // points (i, v(c_{deg - i})); zero coefficients are skipped
    let mut pts: Vec<(i64, BigRational)> = Vec::new();
    for i in 0..=deg {
        let c = poly.coeff(deg - i);
        if let Val::Finite(v) = ctx.val(&c) {
            pts.push((i as i64, BigRational::from_integer(BigInt::from(v))));
        }
    }
    // leading coefficient is nonzero, so pts starts at x = 0
    debug_assert_eq!(pts[0].0, 0);
    let last_x = pts.last().expect("nonzero polynomial").0;
    // lower convex hull, monotone chain over x-sorted points
    let mut hull: Vec<(i64, BigRational)> = Vec::new();
    for pt in pts {
        while hull.len() >= 2 {
            let a = &hull[hull.len() - 2];
            let b = &hull[hull.len() - 1];
            // keep b only if it lies strictly below segment a--pt
            let lhs = (&b.1 - &a.1) * BigRational::from_integer(BigInt::from(pt.0 - a.0));
            let rhs = (&pt.1 - &a.1) * BigRational::from_integer(BigInt::from(b.0 - a.0));
            if lhs >= rhs {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(pt);
    }
    let mut slopes: Vec<NewtonSlope> = Vec::new();
    for w in hull.windows(2) {
        let dx = w[1].0 - w[0].0;
        let slope = (&w[1].1 - &w[0].1) / BigRational::from_integer(BigInt::from(dx));
        slopes.push(NewtonSlope {
            slope: Some(slope),
            length: dx as usize,
        });
    }
    // trailing zero coefficients: roots at zero, infinite slope
    if (last_x as usize) < deg {
        slopes.push(NewtonSlope {
            slope: None,
            length: deg - last_x as usize,
        });
    }
    Ok(slopes)
}

/// Verdict of the integral-irreducible-factor test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorVerdict {
    Present,
    Absent,
    /// Reserved for inputs the slope analysis cannot settle; the current
    /// analysis is exact for all degrees, so this is never produced.
    Inconclusive,
}

/// Whether a monic polynomial over Qp has a monic irreducible factor with
/// Zp coefficients.
///
/// Over Qp a monic polynomial splits into factors of pure Newton slope, and
/// every monic irreducible factor has all roots of a single valuation. A
/// monic irreducible integral factor therefore exists exactly when some
/// slope is nonnegative (infinite slopes, from roots at zero, count).
pub fn has_monic_integral_irreducible_factor(ctx: &PContext, poly: &PPoly) -> Result<FactorVerdict> {
    if !poly.is_monic() {
        return Err(Error::MalformedPolynomial("polynomial is not monic".into()));
    }
    if poly.degree() == 0 {
        return Err(Error::MalformedPolynomial("degree must be >= 1".into()));
    }
    let slopes = newton_slopes(ctx, poly)?;
    let present = slopes.iter().any(|s| match &s.slope {
        None => true,
        Some(m) => !m.is_negative(),
    });
    Ok(if present {
        FactorVerdict::Present
    } else {
        FactorVerdict::Absent
    })
}
