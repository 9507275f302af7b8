//! Finite-field arithmetic over prime fields and binary extension fields.
//!
//! Elements are carried as integer representatives in `[0, order)`. Binary
//! extension fields use carry-less multiplication followed by reduction
//! modulo the defining polynomial; no lookup tables are kept.

use std::fmt;

use thiserror::Error;

/// Largest supported field order is `2^MAX_DEGREE` for binary fields and
/// below `2^MAX_DEGREE` for prime fields.
pub const MAX_DEGREE: u32 = 31;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FieldError {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("polynomial {0:#x} is reducible over GF(2)")]
    Reducible(u64),
    #[error("polynomial {0:#x} has degree outside 1..={MAX_DEGREE}")]
    BadDegree(u64),
    #[error("order {0} is too large")]
    TooLarge(u64),
    #[error("value {value} is not an element of a field of order {order}")]
    NotAnElement { value: u64, order: u64 },
    #[error("subgroup order {sub} does not divide {group}")]
    NotADivisor { sub: u64, group: u64 },
    #[error("requested {wanted} coset representatives but only {available} cosets exist")]
    TooFewCosets { wanted: usize, available: u64 },
    #[error("generator {gen} does not have multiplicative order {expected}")]
    NotAGenerator { gen: u64, expected: u64 },
}

/// Description used to construct a field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldDesc {
    /// The prime field `GF(p)`.
    Prime(u64),
    /// `GF(2^deg)` defined by an irreducible polynomial given as a bit mask
    /// (bit `i` is the coefficient of `x^i`, leading term included).
    Binary(u64),
}

/// A field element: an integer representative in `[0, order)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Fe(pub u32);

impl Fe {
    pub const ZERO: Fe = Fe(0);
    pub const ONE: Fe = Fe(1);

    pub fn value(self) -> u32 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for Fe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Repr {
    Prime { p: u64 },
    Binary { poly: u64, degree: u32 },
}

/// An immutable finite-field description.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldSpec {
    order: u64,
    repr: Repr,
    generator: Fe,
    // distinct prime factors of order - 1
    unit_factors: Vec<u64>,
}

impl FieldSpec {
    pub fn new(desc: FieldDesc) -> Result<Self, FieldError> {
        let (order, repr) = match desc {
            FieldDesc::Prime(p) => {
                if p >= 1 << MAX_DEGREE {
                    return Err(FieldError::TooLarge(p));
                }
                if !is_prime(p) {
                    return Err(FieldError::NotPrime(p));
                }
                (p, Repr::Prime { p })
            }
            FieldDesc::Binary(poly) => {
                let degree = poly_degree(poly);
                if degree == 0 || degree > MAX_DEGREE {
                    return Err(FieldError::BadDegree(poly));
                }
                if !is_irreducible_gf2(poly) {
                    return Err(FieldError::Reducible(poly));
                }
                (1u64 << degree, Repr::Binary { poly, degree })
            }
        };
        let unit_factors = distinct_prime_factors(order - 1);
        let mut field = FieldSpec {
            order,
            repr,
            generator: Fe::ONE,
            unit_factors,
        };
        field.generator = field.find_generator();
        Ok(field)
    }

    pub fn prime(p: u64) -> Result<Self, FieldError> {
        Self::new(FieldDesc::Prime(p))
    }

    pub fn binary(poly: u64) -> Result<Self, FieldError> {
        Self::new(FieldDesc::Binary(poly))
    }

    /// Rebuilds a field from its serialized triple, checking that the stored
    /// generator matches the canonical one.
    pub fn from_parts(order: u64, poly: u64, generator: u64) -> Result<Self, FieldError> {
        let field = if poly == 0 {
            Self::prime(order)?
        } else {
            let f = Self::binary(poly)?;
            if f.order != order {
                return Err(FieldError::BadDegree(poly));
            }
            f
        };
        if u64::from(field.generator.0) != generator {
            return Err(FieldError::NotAGenerator {
                gen: generator,
                expected: order - 1,
            });
        }
        Ok(field)
    }

    pub fn desc(&self) -> FieldDesc {
        match self.repr {
            Repr::Prime { p } => FieldDesc::Prime(p),
            Repr::Binary { poly, .. } => FieldDesc::Binary(poly),
        }
    }

    pub fn order(&self) -> u64 {
        self.order
    }

    /// The defining polynomial mask, or 0 for prime fields.
    pub fn poly_mask(&self) -> u64 {
        match self.repr {
            Repr::Prime { .. } => 0,
            Repr::Binary { poly, .. } => poly,
        }
    }

    pub fn characteristic(&self) -> u64 {
        match self.repr {
            Repr::Prime { p } => p,
            Repr::Binary { .. } => 2,
        }
    }

    pub fn generator(&self) -> Fe {
        self.generator
    }

    pub fn elem(&self, value: u64) -> Result<Fe, FieldError> {
        if value >= self.order {
            return Err(FieldError::NotAnElement {
                value,
                order: self.order,
            });
        }
        Ok(Fe(value as u32))
    }

    /// Reduces an arbitrary integer into the field. For binary fields the
    /// integer is taken modulo the order (bit truncation), not interpreted as
    /// a polynomial.
    pub fn elem_mod(&self, value: u64) -> Fe {
        Fe((value % self.order) as u32)
    }

    pub fn contains(&self, a: Fe) -> bool {
        u64::from(a.0) < self.order
    }

    pub fn add(&self, a: Fe, b: Fe) -> Fe {
        match self.repr {
            Repr::Prime { p } => Fe(((u64::from(a.0) + u64::from(b.0)) % p) as u32),
            Repr::Binary { .. } => Fe(a.0 ^ b.0),
        }
    }

    pub fn neg(&self, a: Fe) -> Fe {
        match self.repr {
            Repr::Prime { p } => {
                if a.0 == 0 {
                    a
                } else {
                    Fe((p - u64::from(a.0)) as u32)
                }
            }
            Repr::Binary { .. } => a,
        }
    }

    pub fn sub(&self, a: Fe, b: Fe) -> Fe {
        self.add(a, self.neg(b))
    }

    pub fn mul(&self, a: Fe, b: Fe) -> Fe {
        match self.repr {
            Repr::Prime { p } => Fe(((u64::from(a.0) * u64::from(b.0)) % p) as u32),
            Repr::Binary { poly, degree } => {
                Fe(gf2_reduce(clmul(u64::from(a.0), u64::from(b.0)), poly, degree) as u32)
            }
        }
    }

    pub fn pow(&self, a: Fe, mut e: u64) -> Fe {
        let mut base = a;
        let mut acc = Fe::ONE;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn inv(&self, a: Fe) -> Option<Fe> {
        if a.is_zero() {
            None
        } else {
            Some(self.pow(a, self.order - 2))
        }
    }

    pub fn div(&self, a: Fe, b: Fe) -> Option<Fe> {
        self.inv(b).map(|bi| self.mul(a, bi))
    }

    /// Sum of `coeffs[i] * x^i`.
    pub fn eval_poly(&self, coeffs: &[Fe], x: Fe) -> Fe {
        coeffs
            .iter()
            .rev()
            .fold(Fe::ZERO, |acc, &c| self.add(self.mul(acc, x), c))
    }

    /// `(1, x, x^2, ..., x^(len-1))`.
    pub fn powers(&self, x: Fe, len: usize) -> Vec<Fe> {
        let mut out = Vec::with_capacity(len);
        let mut acc = Fe::ONE;
        for _ in 0..len {
            out.push(acc);
            acc = self.mul(acc, x);
        }
        out
    }

    pub fn multiplicative_order(&self, a: Fe) -> Option<u64> {
        if a.is_zero() || !self.contains(a) {
            return None;
        }
        let mut ord = self.order - 1;
        for &p in &self.unit_factors {
            while ord.is_multiple_of(p) && self.pow(a, ord / p) == Fe::ONE {
                ord /= p;
            }
        }
        Some(ord)
    }

    fn find_generator(&self) -> Fe {
        if self.order == 2 {
            return Fe::ONE;
        }
        let n = self.order - 1;
        (2..self.order)
            .map(|v| Fe(v as u32))
            .find(|&g| self.unit_factors.iter().all(|&p| self.pow(g, n / p) != Fe::ONE))
            .expect("multiplicative group of a finite field is cyclic")
    }

    /// The unique subgroup of order `s` in the multiplicative group.
    pub fn subgroup_of_order(&self, s: u64) -> Result<Subgroup, FieldError> {
        let group = self.order - 1;
        if s == 0 || !group.is_multiple_of(s) {
            return Err(FieldError::NotADivisor { sub: s, group });
        }
        let generator = self.pow(self.generator, group / s);
        let elements = self.powers(generator, s as usize);
        Ok(Subgroup {
            order: s,
            elements,
            generator,
        })
    }

    /// Picks `count` elements lying in pairwise distinct cosets of `sub`.
    ///
    /// Cosets are visited in increasing order of their smallest integer
    /// representative, and that representative is returned. Two nonzero
    /// elements share a coset exactly when their `s`-th powers agree.
    pub fn coset_representatives(&self, sub: &Subgroup, count: usize) -> Result<Vec<Fe>, FieldError> {
        let available = (self.order - 1) / sub.order;
        if count as u64 > available {
            return Err(FieldError::TooFewCosets {
                wanted: count,
                available,
            });
        }
        let mut seen = std::collections::HashSet::new();
        let mut reps = Vec::with_capacity(count);
        for v in 1..self.order {
            if reps.len() == count {
                break;
            }
            let x = Fe(v as u32);
            if seen.insert(self.pow(x, sub.order)) {
                reps.push(x);
            }
        }
        Ok(reps)
    }
}

/// A multiplicative subgroup, with elements listed as consecutive powers of
/// its generator starting at 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subgroup {
    pub order: u64,
    pub elements: Vec<Fe>,
    pub generator: Fe,
}

impl Subgroup {
    pub fn contains(&self, x: Fe) -> bool {
        self.elements.contains(&x)
    }
}

fn poly_degree(p: u64) -> u32 {
    if p == 0 {
        0
    } else {
        63 - p.leading_zeros()
    }
}

fn clmul(a: u64, b: u64) -> u64 {
    let mut acc = 0u64;
    let mut b = b;
    let mut shift = 0;
    while b != 0 {
        if b & 1 == 1 {
            acc ^= a << shift;
        }
        b >>= 1;
        shift += 1;
    }
    acc
}

fn gf2_reduce(mut a: u64, poly: u64, degree: u32) -> u64 {
    while a != 0 && poly_degree(a) >= degree {
        a ^= poly << (poly_degree(a) - degree);
    }
    a
}

fn gf2_mod(a: u64, b: u64) -> u64 {
    gf2_reduce(a, b, poly_degree(b))
}

fn is_irreducible_gf2(poly: u64) -> bool {
    let deg = poly_degree(poly);
    if deg == 1 {
        return true;
    }
    // a reducible polynomial has a factor of degree <= deg / 2
    let max_div = 1u64 << (deg / 2 + 1);
    (2..max_div).all(|d| gf2_mod(poly, d) != 0)
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

fn distinct_prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            out.push(d);
            while n.is_multiple_of(d) {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// Smallest irreducible polynomial of the given degree over GF(2).
pub fn default_binary_poly(degree: u32) -> Option<u64> {
    if degree == 0 || degree > MAX_DEGREE {
        return None;
    }
    ((1u64 << degree)..(1u64 << (degree + 1))).find(|&p| is_irreducible_gf2(p))
}
