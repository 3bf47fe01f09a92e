//! Exact algebra of differential polynomials.
//!
//! A differential polynomial is a finite sum of monomials in two dependent
//! variables and their x-derivatives, with [`GaussianRational`] coefficients.
//! Two alphabets share the machinery:
//!
//! * `q`/`r` — the two independent potentials of the zero-curvature recursion;
//! * `u`/`ubar` — the single complex field and its conjugate, obtained from
//!   the first alphabet by the substitution `r ↦ ±conj(q)`.
//!
//! Values are canonical by construction (terms keyed by their power maps,
//! zero coefficients dropped), immutable after construction, and cheap to
//! share between threads. The module also provides the Euler operator
//! (variational derivative), which characterizes total x-derivatives exactly
//! and is the backbone of equality-up-to-partial-integration testing.

mod json;
mod text;

pub use text::parse_in_alphabet;

use crate::rational::GaussianRational;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

/// The two dependent variables of either alphabet.
///
/// In the [`Alphabet::QR`] picture these render as `q` and `r`; after a
/// conjugation substitution ([`Alphabet::U`]) they render as `u` and `ubar`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    Q,
    R,
}

/// Which variable naming a polynomial lives in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Alphabet {
    /// Two independent potentials `q`, `r`.
    QR,
    /// One complex field and its conjugate, `u`, `ubar`.
    U,
}

impl Alphabet {
    /// Variable name used by the text form.
    pub fn var_name(self, var: Var) -> &'static str {
        match (self, var) {
            (Alphabet::QR, Var::Q) => "q",
            (Alphabet::QR, Var::R) => "r",
            (Alphabet::U, Var::Q) => "u",
            (Alphabet::U, Var::R) => "ubar",
        }
    }
}

/// One symbol of the alphabet: a variable differentiated `order` times.
///
/// `(Q, 0)` is the plain variable; `(R, 2)` renders as `r_xx`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DerivativeSlot {
    pub var: Var,
    pub order: u32,
}

impl DerivativeSlot {
    pub fn new(var: Var, order: u32) -> Self {
        Self { var, order }
    }
}

/// The power map of a monomial: slot → positive multiplicity, kept sorted.
///
/// The empty map is the constant monomial. Ordering is lexicographic over the
/// sorted `(slot, multiplicity)` pairs, giving every polynomial a single
/// canonical term order used for display and serialization.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct MonomialKey(BTreeMap<DerivativeSlot, u32>);

impl MonomialKey {
    /// The constant monomial (no factors).
    pub fn one() -> Self {
        Self::default()
    }

    /// A single factor `var` differentiated `order` times.
    pub fn slot(var: Var, order: u32) -> Self {
        let mut m = BTreeMap::new();
        m.insert(DerivativeSlot::new(var, order), 1);
        Self(m)
    }

    pub(crate) fn insert(&mut self, slot: DerivativeSlot, mult: u32) {
        if mult == 0 {
            return;
        }
        *self.0.entry(slot).or_insert(0) += mult;
    }

    pub fn iter(&self) -> impl Iterator<Item = (&DerivativeSlot, &u32)> {
        self.0.iter()
    }

    pub fn is_constant(&self) -> bool {
        self.0.is_empty()
    }

    pub fn multiplicity(&self, slot: DerivativeSlot) -> u32 {
        self.0.get(&slot).copied().unwrap_or(0)
    }

    /// Number of factors, counted with multiplicity.
    pub fn degree(&self) -> u32 {
        self.0.values().sum()
    }

    /// Number of factors of one variable, counted with multiplicity.
    pub fn var_degree(&self, var: Var) -> u32 {
        self.0
            .iter()
            .filter(|(s, _)| s.var == var)
            .map(|(_, m)| *m)
            .sum()
    }

    /// Total number of x-derivatives across all factors.
    pub fn derivative_count(&self) -> u32 {
        self.0.iter().map(|(s, m)| s.order * m).sum()
    }

    /// Homogeneity order: factors plus derivatives,
    /// `Σ multiplicity · (1 + order)`.
    pub fn order_weight(&self) -> u32 {
        self.degree() + self.derivative_count()
    }

    pub fn max_order(&self) -> u32 {
        self.0.keys().map(|s| s.order).max().unwrap_or(0)
    }

    /// Product of two power maps (multiplicities add on shared slots).
    fn product(&self, rhs: &Self) -> Self {
        let mut out = self.clone();
        for (slot, mult) in rhs.0.iter() {
            out.insert(*slot, *mult);
        }
        out
    }
}

/// A coefficient together with its power map — one term of a polynomial.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiffMonomial {
    pub coeff: GaussianRational,
    pub key: MonomialKey,
}

/// How to eliminate `r` from a `q`/`r` polynomial.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SubstitutionRule {
    /// `r ↦ conj(q)`: the result lives in the `u`/`ubar` alphabet.
    ConjugateQ,
    /// `r ↦ −conj(q)`: as above, with one sign per `r`-type factor.
    MinusConjugateQ,
    /// `r ↦ q`: real reduction; stays in the `q`/`r` alphabet (but is `q`-only).
    ToQ,
    /// `r ↦ c` for a constant `c`: derivatives of `r` vanish.
    Constant(GaussianRational),
}

/// Errors from parsing or user-driven transformations.
#[derive(Debug, thiserror::Error)]
pub enum DiffPolyError {
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("expected a polynomial in the {expected:?} alphabet, found {found:?}")]
    AlphabetMismatch { expected: Alphabet, found: Alphabet },
}

/// Canonical sum of differential monomials over one alphabet.
#[derive(Clone, PartialEq, Eq)]
pub struct DiffPolynomial {
    alphabet: Alphabet,
    terms: BTreeMap<MonomialKey, GaussianRational>,
}

impl DiffPolynomial {
    pub fn zero(alphabet: Alphabet) -> Self {
        Self {
            alphabet,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(alphabet: Alphabet, c: GaussianRational) -> Self {
        let mut p = Self::zero(alphabet);
        p.add_term(MonomialKey::one(), c);
        p
    }

    /// The single symbol `var` differentiated `order` times, coefficient 1.
    pub fn variable(alphabet: Alphabet, var: Var, order: u32) -> Self {
        let mut p = Self::zero(alphabet);
        p.add_term(MonomialKey::slot(var, order), GaussianRational::one());
        p
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Terms in canonical key order.
    pub fn monomials(&self) -> impl Iterator<Item = DiffMonomial> + '_ {
        self.terms.iter().map(|(k, c)| DiffMonomial {
            coeff: c.clone(),
            key: k.clone(),
        })
    }

    /// Coefficient of a given power map (zero when absent).
    pub fn coeff_of(&self, key: &MonomialKey) -> GaussianRational {
        self.terms
            .get(key)
            .cloned()
            .unwrap_or_else(GaussianRational::zero)
    }

    pub fn constant_term(&self) -> GaussianRational {
        self.coeff_of(&MonomialKey::one())
    }

    /// Highest derivative order appearing in any factor.
    pub fn max_derivative_order(&self) -> u32 {
        self.terms.keys().map(|k| k.max_order()).max().unwrap_or(0)
    }

    /// Largest factor count over all monomials.
    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(|k| k.degree()).max().unwrap_or(0)
    }

    pub(crate) fn add_term(&mut self, key: MonomialKey, coeff: GaussianRational) {
        if coeff.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(key) {
            Entry::Vacant(e) => {
                e.insert(coeff);
            }
            Entry::Occupied(mut e) => {
                *e.get_mut() += &coeff;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    fn assert_same_alphabet(&self, rhs: &Self, op: &str) {
        assert_eq!(
            self.alphabet, rhs.alphabet,
            "cannot {op} polynomials over different alphabets"
        );
    }

    pub fn scale(&self, c: &GaussianRational) -> Self {
        let mut out = Self::zero(self.alphabet);
        if c.is_zero() {
            return out;
        }
        for (k, v) in &self.terms {
            out.add_term(k.clone(), v * c);
        }
        out
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut out = Self::constant(self.alphabet, GaussianRational::one());
        for _ in 0..n {
            out = &out * self;
        }
        out
    }

    /// Total x-derivative via the Leibniz rule: every factor's order is
    /// raised by one in turn.
    pub fn derive_x(&self) -> Self {
        let mut out = Self::zero(self.alphabet);
        for (key, coeff) in &self.terms {
            for (slot, mult) in key.iter() {
                // d/dx of slot^mult = mult * slot^(mult-1) * slot' * rest.
                let mut new_key = key.clone();
                let m = new_key.0.get_mut(slot).expect("slot present");
                if *m == 1 {
                    new_key.0.remove(slot);
                } else {
                    *m -= 1;
                }
                new_key.insert(DerivativeSlot::new(slot.var, slot.order + 1), 1);
                out.add_term(new_key, coeff * &GaussianRational::from_int(*mult as i64));
            }
        }
        out
    }

    /// Formal partial derivative with respect to one slot, treating every
    /// slot as an independent symbol.
    pub fn partial_wrt(&self, slot: DerivativeSlot) -> Self {
        let mut out = Self::zero(self.alphabet);
        for (key, coeff) in &self.terms {
            let mult = key.multiplicity(slot);
            if mult == 0 {
                continue;
            }
            let mut new_key = key.clone();
            if mult == 1 {
                new_key.0.remove(&slot);
            } else {
                *new_key.0.get_mut(&slot).expect("slot present") -= 1;
            }
            out.add_term(new_key, coeff * &GaussianRational::from_int(mult as i64));
        }
        out
    }

    /// Euler operator (variational derivative) with respect to one variable:
    /// `Σ_k (−1)^k ∂_x^k [∂f/∂(∂_x^k φ)]`.
    ///
    /// Vanishes identically exactly on constants plus total x-derivatives,
    /// which is what makes [`DiffPolynomial::is_total_derivative`] a decision
    /// procedure rather than a heuristic.
    pub fn euler(&self, var: Var) -> Self {
        let mut out = Self::zero(self.alphabet);
        let max_order = self
            .terms
            .keys()
            .flat_map(|k| k.iter())
            .filter(|(s, _)| s.var == var)
            .map(|(s, _)| s.order)
            .max();
        let Some(max_order) = max_order else {
            return out;
        };
        for k in 0..=max_order {
            let mut term = self.partial_wrt(DerivativeSlot::new(var, k));
            for _ in 0..k {
                term = term.derive_x();
            }
            if k % 2 == 0 {
                out = &out + &term;
            } else {
                out = &out - &term;
            }
        }
        out
    }

    /// True iff the polynomial is a total x-derivative of another
    /// differential polynomial: both Euler operators annihilate it and it has
    /// no constant term.
    pub fn is_total_derivative(&self) -> bool {
        self.constant_term().is_zero()
            && self.euler(Var::Q).is_zero()
            && self.euler(Var::R).is_zero()
    }

    /// Eliminate `r` according to the rule. The conjugation rules move the
    /// result to the `u`/`ubar` alphabet (x-derivatives commute with
    /// conjugation, so slot orders carry over unchanged).
    pub fn substitute(&self, rule: &SubstitutionRule) -> Result<Self, DiffPolyError> {
        if self.alphabet != Alphabet::QR {
            return Err(DiffPolyError::AlphabetMismatch {
                expected: Alphabet::QR,
                found: self.alphabet,
            });
        }
        let target = match rule {
            SubstitutionRule::ConjugateQ | SubstitutionRule::MinusConjugateQ => Alphabet::U,
            _ => Alphabet::QR,
        };
        let mut out = Self::zero(target);
        'term: for (key, coeff) in &self.terms {
            let mut new_key = MonomialKey::one();
            let mut new_coeff = coeff.clone();
            for (slot, mult) in key.iter() {
                match (rule, slot.var) {
                    (_, Var::Q) => new_key.insert(*slot, *mult),
                    (SubstitutionRule::ConjugateQ, Var::R) => new_key.insert(*slot, *mult),
                    (SubstitutionRule::MinusConjugateQ, Var::R) => {
                        new_key.insert(*slot, *mult);
                        if mult % 2 == 1 {
                            new_coeff = -new_coeff;
                        }
                    }
                    (SubstitutionRule::ToQ, Var::R) => {
                        new_key.insert(DerivativeSlot::new(Var::Q, slot.order), *mult)
                    }
                    (SubstitutionRule::Constant(c), Var::R) => {
                        if slot.order > 0 {
                            continue 'term; // derivative of a constant
                        }
                        new_coeff *= &c.pow(*mult);
                    }
                }
            }
            out.add_term(new_key, new_coeff);
        }
        Ok(out)
    }

    /// Formal complex conjugation: swap the two variables of the alphabet and
    /// conjugate every coefficient. Over `u`/`ubar` (where the second variable
    /// *is* the conjugate of the first) this is pointwise conjugation of the
    /// expression; over `q`/`r` it is the reality involution of the two-field
    /// system.
    pub fn formal_conjugate(&self) -> Self {
        let mut out = Self::zero(self.alphabet);
        for (key, coeff) in &self.terms {
            let mut new_key = MonomialKey::one();
            for (slot, mult) in key.iter() {
                let swapped = match slot.var {
                    Var::Q => Var::R,
                    Var::R => Var::Q,
                };
                new_key.insert(DerivativeSlot::new(swapped, slot.order), *mult);
            }
            out.add_term(new_key, coeff.conj());
        }
        out
    }
}

impl fmt::Debug for DiffPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl Add<&DiffPolynomial> for &DiffPolynomial {
    type Output = DiffPolynomial;
    fn add(self, rhs: &DiffPolynomial) -> DiffPolynomial {
        self.assert_same_alphabet(rhs, "add");
        let mut out = self.clone();
        for (k, v) in &rhs.terms {
            out.add_term(k.clone(), v.clone());
        }
        out
    }
}

impl Sub<&DiffPolynomial> for &DiffPolynomial {
    type Output = DiffPolynomial;
    fn sub(self, rhs: &DiffPolynomial) -> DiffPolynomial {
        self.assert_same_alphabet(rhs, "subtract");
        let mut out = self.clone();
        for (k, v) in &rhs.terms {
            out.add_term(k.clone(), -v);
        }
        out
    }
}

impl Mul<&DiffPolynomial> for &DiffPolynomial {
    type Output = DiffPolynomial;
    fn mul(self, rhs: &DiffPolynomial) -> DiffPolynomial {
        self.assert_same_alphabet(rhs, "multiply");
        let mut out = DiffPolynomial::zero(self.alphabet);
        for (ka, ca) in &self.terms {
            for (kb, cb) in &rhs.terms {
                out.add_term(ka.product(kb), ca * cb);
            }
        }
        out
    }
}

impl Neg for &DiffPolynomial {
    type Output = DiffPolynomial;
    fn neg(self) -> DiffPolynomial {
        let mut out = DiffPolynomial::zero(self.alphabet);
        for (k, v) in &self.terms {
            out.add_term(k.clone(), -v);
        }
        out
    }
}

macro_rules! forward_owned {
    ($trait:ident, $method:ident) => {
        impl $trait<DiffPolynomial> for DiffPolynomial {
            type Output = DiffPolynomial;
            fn $method(self, rhs: DiffPolynomial) -> DiffPolynomial {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&DiffPolynomial> for DiffPolynomial {
            type Output = DiffPolynomial;
            fn $method(self, rhs: &DiffPolynomial) -> DiffPolynomial {
                (&self).$method(rhs)
            }
        }
        impl $trait<DiffPolynomial> for &DiffPolynomial {
            type Output = DiffPolynomial;
            fn $method(self, rhs: DiffPolynomial) -> DiffPolynomial {
                self.$method(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for DiffPolynomial {
    type Output = DiffPolynomial;
    fn neg(self) -> DiffPolynomial {
        -&self
    }
}
