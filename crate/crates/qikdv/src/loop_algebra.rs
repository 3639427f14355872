//! Sparse sl(2) loop algebra over a generic scalar ring.
//!
//! Generators are b^n, F1^n, F2^n with the bracket
//!   [b^n, F1^m] = 2 F2^{m+n}
//!   [b^n, F2^m] = 2 F1^{m+n}
//!   [F1^n, F2^m] = b^{m+n+1}
//! where the grade bump on the last rule absorbs the spectral-parameter
//! factor lambda. Grades live in a finite window; leaving it is an error,
//! never a silent drop.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::collections::BTreeMap;

use crate::error::{QiError, Result};

/// Scalar ring abstraction: exact rationals for identity tests, f64 for
/// physics-valued checks.
pub trait Scalar: Clone + PartialEq + std::fmt::Debug {
    fn zero() -> Self;
    fn one() -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    /// Division by a positive integer (used for the 1/k! BCH weights).
    fn div_nat(&self, n: u64) -> Self;
    fn scale_int(&self, k: i64) -> Self;
    fn is_zero(&self) -> bool;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn div_nat(&self, n: u64) -> Self {
        self / n as f64
    }
    fn scale_int(&self, k: i64) -> Self {
        self * k as f64
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
}

impl Scalar for BigRational {
    fn zero() -> Self {
        <BigRational as Zero>::zero()
    }
    fn one() -> Self {
        <BigRational as One>::one()
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn div_nat(&self, n: u64) -> Self {
        self / BigRational::from_integer(BigInt::from(n))
    }
    fn scale_int(&self, k: i64) -> Self {
        self * BigRational::from_integer(BigInt::from(k))
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
}

/// Rational from a (numerator, denominator) pair, for concise test data.
pub fn rat(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GenKind {
    B,
    F1,
    F2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Generator {
    pub kind: GenKind,
    pub power: i64,
}

impl Generator {
    pub fn b(n: i64) -> Self {
        Generator {
            kind: GenKind::B,
            power: n,
        }
    }
    pub fn f1(n: i64) -> Self {
        Generator {
            kind: GenKind::F1,
            power: n,
        }
    }
    pub fn f2(n: i64) -> Self {
        Generator {
            kind: GenKind::F2,
            power: n,
        }
    }
}

/// Inclusive grade window for a computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GradeWindow {
    pub min: i64,
    pub max: i64,
}

impl Default for GradeWindow {
    fn default() -> Self {
        GradeWindow { min: -2, max: 8 }
    }
}

impl GradeWindow {
    pub fn new(min: i64, max: i64) -> Self {
        assert!(min <= max);
        GradeWindow { min, max }
    }
    pub fn contains(&self, g: i64) -> bool {
        g >= self.min && g <= self.max
    }
}

/// Finite linear combination of generators, canonical sparse form (no stored
/// zeros). BTreeMap keeps term order deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopElement<S: Scalar> {
    pub terms: BTreeMap<Generator, S>,
}

impl<S: Scalar> Default for LoopElement<S> {
    fn default() -> Self {
        LoopElement {
            terms: BTreeMap::new(),
        }
    }
}

impl<S: Scalar> LoopElement<S> {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn term(gen: Generator, coef: S) -> Self {
        let mut e = Self::zero();
        e.add_term(gen, coef);
        e
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (Generator, S)>) -> Self {
        let mut e = Self::zero();
        for (g, c) in terms {
            e.add_term(g, c);
        }
        e
    }

    pub fn add_term(&mut self, gen: Generator, coef: S) {
        if coef.is_zero() {
            return;
        }
        let entry = self.terms.entry(gen);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(coef);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let sum = o.get().add(&coef);
                if sum.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (g, c) in &other.terms {
            out.add_term(*g, c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (g, c) in &other.terms {
            out.add_term(*g, c.neg());
        }
        out
    }

    pub fn scale(&self, s: &S) -> Self {
        let mut out = Self::zero();
        for (g, c) in &self.terms {
            out.add_term(*g, c.mul(s));
        }
        out
    }

    pub fn coeff(&self, gen: Generator) -> S {
        self.terms.get(&gen).cloned().unwrap_or_else(S::zero)
    }

    /// Restriction to one generator kind. The three projections partition
    /// the element.
    pub fn project(&self, kind: GenKind) -> Self {
        let mut out = Self::zero();
        for (g, c) in &self.terms {
            if g.kind == kind {
                out.add_term(*g, c.clone());
            }
        }
        out
    }
}

/// Lie bracket. Errors if any produced grade leaves the window.
pub fn commutator<S: Scalar>(
    x: &LoopElement<S>,
    y: &LoopElement<S>,
    window: GradeWindow,
) -> Result<LoopElement<S>> {
    let (out, overflow) = commutator_inner(x, y, window);
    if let Some(grade) = overflow {
        return Err(QiError::GradeOverflow {
            grade,
            min: window.min,
            max: window.max,
        });
    }
    Ok(out)
}

/// Bracket that drops out-of-window terms and reports whether any were
/// dropped. Diagnostic use only; the public bracket never truncates silently.
pub fn commutator_clipped<S: Scalar>(
    x: &LoopElement<S>,
    y: &LoopElement<S>,
    window: GradeWindow,
) -> (LoopElement<S>, bool) {
    let (out, overflow) = commutator_inner(x, y, window);
    (out, overflow.is_some())
}

fn commutator_inner<S: Scalar>(
    x: &LoopElement<S>,
    y: &LoopElement<S>,
    window: GradeWindow,
) -> (LoopElement<S>, Option<i64>) {
    let mut out = LoopElement::zero();
    let mut overflow = None;
    for (gx, cx) in &x.terms {
        for (gy, cy) in &y.terms {
            let c = cx.mul(cy);
            let produced: Option<(Generator, S)> = match (gx.kind, gy.kind) {
                (GenKind::B, GenKind::F1) => {
                    Some((Generator::f2(gx.power + gy.power), c.scale_int(2)))
                }
                (GenKind::B, GenKind::F2) => {
                    Some((Generator::f1(gx.power + gy.power), c.scale_int(2)))
                }
                (GenKind::F1, GenKind::B) => {
                    Some((Generator::f2(gx.power + gy.power), c.scale_int(-2)))
                }
                (GenKind::F2, GenKind::B) => {
                    Some((Generator::f1(gx.power + gy.power), c.scale_int(-2)))
                }
                (GenKind::F1, GenKind::F2) => {
                    Some((Generator::b(gx.power + gy.power + 1), c))
                }
                (GenKind::F2, GenKind::F1) => {
                    Some((Generator::b(gx.power + gy.power + 1), c.neg()))
                }
                _ => None,
            };
            if let Some((gen, coef)) = produced {
                if window.contains(gen.power) {
                    out.add_term(gen, coef);
                } else if overflow.is_none() {
                    overflow = Some(gen.power);
                }
            }
        }
    }
    (out, overflow)
}

/// Truncated BCH conjugation series: term k is ad_X^k(Y)/k!.
#[derive(Debug, Clone)]
pub struct BchSeries<S: Scalar> {
    pub depth: usize,
    pub terms: Vec<LoopElement<S>>,
}

impl<S: Scalar> BchSeries<S> {
    pub fn sum(&self) -> LoopElement<S> {
        let mut out = LoopElement::zero();
        for t in &self.terms {
            out = out.add(t);
        }
        out
    }
}

/// e^X Y e^{-X} truncated at `depth` nested commutators.
pub fn bch_conjugate<S: Scalar>(
    x: &LoopElement<S>,
    y: &LoopElement<S>,
    depth: usize,
    window: GradeWindow,
) -> Result<BchSeries<S>> {
    assert!(depth >= 1);
    let mut terms = Vec::with_capacity(depth + 1);
    terms.push(y.clone());
    let mut nested = y.clone();
    let mut fact: u64 = 1;
    for k in 1..=depth {
        nested = commutator(x, &nested, window)?;
        fact *= k as u64;
        let mut scaled = LoopElement::zero();
        for (g, c) in &nested.terms {
            scaled.add_term(*g, c.div_nat(fact));
        }
        terms.push(scaled);
    }
    Ok(BchSeries { depth, terms })
}

/// Clipped variant for diagnostics: returns the summed series and whether
/// any term fell outside the window.
pub fn bch_conjugate_clipped<S: Scalar>(
    x: &LoopElement<S>,
    y: &LoopElement<S>,
    depth: usize,
    window: GradeWindow,
) -> (LoopElement<S>, bool) {
    let mut out = y.clone();
    let mut nested = y.clone();
    let mut truncated = false;
    let mut fact: u64 = 1;
    for k in 1..=depth {
        let (next, clip) = commutator_clipped(x, &nested, window);
        truncated |= clip;
        nested = next;
        fact *= k as u64;
        for (g, c) in &nested.terms {
            out.add_term(*g, c.div_nat(fact));
        }
    }
    (out, truncated)
}

// ---------------------------------------------------------------------------
// Dense 2x2 representation at a fixed numeric spectral parameter, used to
// cross-check the sparse algebra against honest matrix arithmetic.
// ---------------------------------------------------------------------------

pub type Mat2 = [[f64; 2]; 2];

pub const SIGMA3: Mat2 = [[1.0, 0.0], [0.0, -1.0]];
pub const SIGMA_PLUS: Mat2 = [[0.0, 1.0], [0.0, 0.0]];
pub const SIGMA_MINUS: Mat2 = [[0.0, 0.0], [1.0, 0.0]];

pub fn mat_add(a: Mat2, b: Mat2) -> Mat2 {
    [
        [a[0][0] + b[0][0], a[0][1] + b[0][1]],
        [a[1][0] + b[1][0], a[1][1] + b[1][1]],
    ]
}

pub fn mat_scale(a: Mat2, s: f64) -> Mat2 {
    [[a[0][0] * s, a[0][1] * s], [a[1][0] * s, a[1][1] * s]]
}

pub fn mat_mul(a: Mat2, b: Mat2) -> Mat2 {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub fn mat_norm(a: Mat2) -> f64 {
    a.iter()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Matrix image of one generator at spectral parameter `lambda`:
/// b^n = lambda^n sigma3, F1^n = lambda^n (lambda sigma+ - sigma-)/sqrt2,
/// F2^n = lambda^n (lambda sigma+ + sigma-)/sqrt2.
pub fn generator_matrix(gen: Generator, lambda: f64) -> Mat2 {
    let ln = lambda.powi(gen.power as i32);
    let s2 = std::f64::consts::SQRT_2;
    match gen.kind {
        GenKind::B => mat_scale(SIGMA3, ln),
        GenKind::F1 => mat_scale(
            mat_add(mat_scale(SIGMA_PLUS, lambda), mat_scale(SIGMA_MINUS, -1.0)),
            ln / s2,
        ),
        GenKind::F2 => mat_scale(
            mat_add(mat_scale(SIGMA_PLUS, lambda), SIGMA_MINUS),
            ln / s2,
        ),
    }
}

pub fn element_matrix(e: &LoopElement<f64>, lambda: f64) -> Mat2 {
    let mut out = [[0.0; 2]; 2];
    for (g, c) in &e.terms {
        out = mat_add(out, mat_scale(generator_matrix(*g, lambda), *c));
    }
    out
}

/// Matrix exponential by scaling and squaring with a Taylor core.
pub fn mat_exp(a: Mat2) -> Mat2 {
    let norm = mat_norm(a);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scaled = mat_scale(a, 0.5f64.powi(squarings as i32));
    let mut term = [[1.0, 0.0], [0.0, 1.0]];
    let mut sum = term;
    for k in 1..30 {
        term = mat_scale(mat_mul(term, scaled), 1.0 / k as f64);
        sum = mat_add(sum, term);
        if mat_norm(term) < 1e-18 {
            break;
        }
    }
    let mut out = sum;
    for _ in 0..squarings {
        out = mat_mul(out, out);
    }
    out
}

pub fn mat_inv(a: Mat2) -> Mat2 {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    mat_scale([[a[1][1], -a[0][1]], [-a[1][0], a[0][0]]], 1.0 / det)
}

// ---------------------------------------------------------------------------
// Symbolic front-end: the diagonalizing rotation as pure algebra. The field
// and gauge data enter as opaque scalars (c1 stands for u over sqrt2 e, c2
// for e over sqrt2, the pairs for the order-by-order rotation
// coefficients), so over rationals the engine output can be compared with
// the hand-derived polynomials with zero tolerance.

/// Off-diagonal spatial connection: c1 (F1^-1 + F2^-1) + c2 (F1^0 - F2^0).
pub fn spatial_connection<S: Scalar>(c1: &S, c2: &S) -> LoopElement<S> {
    LoopElement::from_terms([
        (Generator::f1(-1), c1.clone()),
        (Generator::f2(-1), c1.clone()),
        (Generator::f1(0), c2.clone()),
        (Generator::f2(0), c2.neg()),
    ])
}

/// Rotation generator: sum over orders n of a1^n F1^n + a2^n F2^n.
pub fn gauge_generator<S: Scalar>(orders: &[(S, S)]) -> LoopElement<S> {
    let mut g = LoopElement::zero();
    for (n, (a1, a2)) in orders.iter().enumerate() {
        g.add_term(Generator::f1(n as i64), a1.clone());
        g.add_term(Generator::f2(n as i64), a2.clone());
    }
    g
}

/// Summed conjugation series exp(ad_x) y through `depth` nested brackets.
pub fn conjugate_sum<S: Scalar>(
    x: &LoopElement<S>,
    y: &LoopElement<S>,
    depth: usize,
    window: GradeWindow,
) -> Result<LoopElement<S>> {
    Ok(bch_conjugate(x, y, depth, window)?.sum())
}

/// Hand-derived diagonal coefficients of the rotated connection at grades
/// zero and one, as polynomials in the same scalars.
pub fn displayed_diagonal<S: Scalar>(c1: &S, c2: &S, orders: &[(S, S)]) -> [S; 2] {
    let (a10, a20) = (&orders[0].0, &orders[0].1);
    let (a11, a21) = (&orders[1].0, &orders[1].1);
    let dm0 = a10.sub(a20);
    let sp0 = a10.add(a20);
    let dm1 = a11.sub(a21);
    let d00 = a10.mul(a10).sub(&a20.mul(a20));
    let b0 = c1.mul(&dm0);
    let b1 = c1
        .mul(&dm1)
        .sub(&c2.mul(&sp0))
        .sub(&c1.mul(&d00).mul(&dm0).div_nat(3));
    [b0, b1]
}

/// Hand-derived curvature coefficients: the diagonal grade-one entry and
/// the grade-zero off-diagonal pair of the conjugated b^0.
pub fn displayed_curvature<S: Scalar>(orders: &[(S, S)]) -> (S, (S, S)) {
    let (a10, a20) = (&orders[0].0, &orders[0].1);
    let d00 = a10.mul(a10).sub(&a20.mul(a20));
    (
        d00.neg(),
        (a20.scale_int(-2), a10.scale_int(-2)),
    )
}
