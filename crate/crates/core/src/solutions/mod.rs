//! Closed-form solution families and the equations they solve.
//!
//! Two explicit families drive the test surface of this crate: a traveling
//! sech profile `e^{i(Nx + δ₀t)} sech(x − c₀t)` whose phase and speed are
//! finite binomial sums in the carrier frequency, and a torus plane wave
//! `N^{−s} a e^{i(Nx − N^{2j}t + N^{2j−2−2s}|a|²t)}`.  This module evaluates
//! both (values and exact time derivatives), *fits* the affine family of
//! single-field equations the sech profile solves — symbolically, over exact
//! Gaussian rationals — and provides the small pieces of resonance
//! arithmetic used by the low-regularity demonstrations.

mod residual;
mod sech;

pub use residual::{residual_norm, residual_report, ResidualReport};

use std::collections::BTreeSet;
use std::fmt;

use num::{BigInt, BigRational};
use num_complex::Complex64;
use serde::de::Error as DeError;
use serde::ser::Error as SerError;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::hierarchy::{
    pair_to_ratio, ratio_to_pair, CoefficientTable, ConjFlag, HierarchyError, TableEntry,
    WireRatio,
};
use crate::rational::GaussianRational;
use sech::{invert_matrix, solve_linear_system, CarrierPoly, SechExpr};

/// Errors from solution-family construction and fitting.
#[derive(Debug, Error)]
pub enum SolutionsError {
    /// The reduced linear system has no solution at all.  The sech ansatz
    /// provably solves an equation built from the candidate monomials, so
    /// this can only mean the reduction algebra is broken.
    #[error(
        "the sech reduction at level {j} produced an inconsistent linear system; \
         this indicates an algebra bug, not a property of the equations"
    )]
    InconsistentFit { j: u32 },
    /// A family was instantiated with the wrong number of parameters.
    #[error("family at level {j} takes {expected} free parameter(s), got {got}")]
    ParameterCount { j: u32, expected: usize, got: usize },
    /// A serialized family failed validation.
    #[error("invalid fitted family: {0}")]
    InvalidFamily(String),
    /// Table-shape errors bubbling up from instantiation.
    #[error(transparent)]
    Table(#[from] HierarchyError),
    /// Grid or evaluation errors bubbling up from the numeric residual oracle.
    #[error(transparent)]
    Numeric(#[from] crate::spectral::SpectralError),
}

// ---------------------------------------------------------------------------
// Soliton parameters
// ---------------------------------------------------------------------------

/// Phase shift and traveling speed of the sech profile at dispersion level
/// `j` and carrier frequency `N`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolitonParams {
    pub j: u32,
    /// Carrier frequency of the oscillating prefactor.
    pub carrier: f64,
    /// Phase speed: coefficient of `t` in the carrier exponent.
    pub delta0: f64,
    /// Translation speed of the sech envelope.
    pub c0: f64,
}

fn binomial(n: u32, k: u32) -> i64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: i128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as i128 / (i + 1) as i128;
    }
    i64::try_from(acc).expect("binomial coefficient fits in 64 bits")
}

/// Exact phase shift and envelope speed for the traveling sech profile:
///
/// ```text
/// δ₀ = Σ_{n=0}^{j}   (−1)^{n+1} N^{2(j−n)}   C(2j, 2n)
/// c₀ = Σ_{n=0}^{j−1} (−1)^{n}   N^{2(j−n)−1} C(2j, 2n+1)
/// ```
///
/// The family is stated for `j ≥ 2`; `j = 1` is permitted as a sanity
/// anchor, where the sums degenerate to the classical cubic-equation
/// soliton values `δ₀ = 1 − N²`, `c₀ = 2N`.
pub fn soliton_params(j: u32, carrier: f64) -> SolitonParams {
    assert!(j >= 1, "dispersion level must be positive");
    let mut delta0 = 0.0;
    for n in 0..=j {
        let sign = if n % 2 == 0 { -1.0 } else { 1.0 };
        delta0 += sign * carrier.powi(2 * (j - n) as i32) * binomial(2 * j, 2 * n) as f64;
    }
    let mut c0 = 0.0;
    for n in 0..j {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        c0 += sign * carrier.powi((2 * (j - n) - 1) as i32) * binomial(2 * j, 2 * n + 1) as f64;
    }
    SolitonParams {
        j,
        carrier,
        delta0,
        c0,
    }
}

/// The same two sums as exact integer polynomials in the carrier, used by
/// the symbolic fitter.
fn phase_speed_polynomials(j: u32) -> (CarrierPoly, CarrierPoly) {
    let mut delta0 = CarrierPoly::zero();
    for n in 0..=j {
        let sign = if n % 2 == 0 { -1 } else { 1 };
        delta0.add_term(
            2 * (j - n),
            GaussianRational::from_int(sign * binomial(2 * j, 2 * n)),
        );
    }
    let mut c0 = CarrierPoly::zero();
    for n in 0..j {
        let sign = if n % 2 == 0 { 1 } else { -1 };
        c0.add_term(
            2 * (j - n) - 1,
            GaussianRational::from_int(sign * binomial(2 * j, 2 * n + 1)),
        );
    }
    (delta0, c0)
}

// ---------------------------------------------------------------------------
// Ansatz fields
// ---------------------------------------------------------------------------

/// A closed-form field, evaluable (with its exact time derivative) at any
/// point of space-time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AnsatzField {
    /// Scaled traveling sech profile `ω · u_{N/ω}(ωx, ω^{2j} t)` where
    /// `u_N(x, t) = e^{i(Nx + δ₀t)} sech(x − c₀t)`.
    Soliton { j: u32, carrier: f64, omega: f64 },
    /// Torus plane wave `N^{−s} a e^{i(Nx − N^{2j}t + N^{2j−2−2s}|a|²t)}`.
    PlaneWave {
        j: u32,
        s: f64,
        carrier: f64,
        amplitude: Complex64,
    },
}

fn sech(y: f64) -> f64 {
    1.0 / y.cosh()
}

impl AnsatzField {
    pub fn j(&self) -> u32 {
        match *self {
            AnsatzField::Soliton { j, .. } | AnsatzField::PlaneWave { j, .. } => j,
        }
    }

    /// Pointwise value at `(x, t)`.
    pub fn eval(&self, x: f64, t: f64) -> Complex64 {
        match *self {
            AnsatzField::Soliton { j, carrier, omega } => {
                let base = soliton_params(j, carrier / omega);
                let (xs, ts) = (omega * x, omega.powi(2 * j as i32) * t);
                let phase = Complex64::new(0.0, base.carrier * xs + base.delta0 * ts).exp();
                omega * phase * sech(xs - base.c0 * ts)
            }
            AnsatzField::PlaneWave {
                j,
                s,
                carrier,
                amplitude,
            } => {
                let exponent = carrier * x - carrier.powi(2 * j as i32) * t
                    + carrier.powf(2.0 * j as f64 - 2.0 - 2.0 * s) * amplitude.norm_sqr() * t;
                carrier.powf(-s) * amplitude * Complex64::new(0.0, exponent).exp()
            }
        }
    }

    /// Exact time derivative at `(x, t)`, from the closed form.
    pub fn time_derivative(&self, x: f64, t: f64) -> Complex64 {
        match *self {
            AnsatzField::Soliton { j, carrier, omega } => {
                let base = soliton_params(j, carrier / omega);
                let (xs, ts) = (omega * x, omega.powi(2 * j as i32) * t);
                let y = xs - base.c0 * ts;
                let phase = Complex64::new(0.0, base.carrier * xs + base.delta0 * ts).exp();
                let envelope = Complex64::new(0.0, base.delta0) * sech(y)
                    + base.c0 * sech(y) * y.tanh();
                omega.powi(2 * j as i32 + 1) * phase * envelope
            }
            AnsatzField::PlaneWave {
                j, s, carrier, amplitude, ..
            } => {
                let rate = -carrier.powi(2 * j as i32)
                    + carrier.powf(2.0 * j as f64 - 2.0 - 2.0 * s) * amplitude.norm_sqr();
                Complex64::new(0.0, rate) * self.eval(x, t)
            }
        }
    }
}

/// Free-function form of [`AnsatzField::eval`].
pub fn eval_ansatz(a: &AnsatzField, x: f64, t: f64) -> Complex64 {
    a.eval(x, t)
}

// ---------------------------------------------------------------------------
// Equation fitting
// ---------------------------------------------------------------------------

/// A coefficient that depends affinely on the family's free parameters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AffineCoeff {
    pub constant: GaussianRational,
    /// One slope per free parameter, in `free_params` order.
    pub gradient: Vec<GaussianRational>,
}

impl AffineCoeff {
    pub fn at(&self, params: &[GaussianRational]) -> GaussianRational {
        let mut v = self.constant.clone();
        for (g, p) in self.gradient.iter().zip(params) {
            v = &v + &(g * p);
        }
        v
    }

    fn is_identically_zero(&self) -> bool {
        self.constant.is_zero() && self.gradient.iter().all(GaussianRational::is_zero)
    }
}

impl fmt::Display for AffineCoeff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let live: Vec<usize> = (0..self.gradient.len())
            .filter(|&m| !self.gradient[m].is_zero())
            .collect();
        if live.is_empty() {
            return write!(f, "{}", self.constant);
        }
        // Single real slope with a real offset reads like a familiar
        // affine expression: "14 - lambda", "lambda - 2", "2 lambda + 3".
        let name = |m: usize| {
            if self.gradient.len() == 1 {
                "lambda".to_owned()
            } else {
                format!("lambda_{}", m + 1)
            }
        };
        let mut pieces: Vec<(GaussianRational, Option<String>)> = Vec::new();
        let lead_with_constant = live.len() == 1
            && self.gradient[live[0]].is_real()
            && self.gradient[live[0]].re() < &num::BigRational::from_integer(0.into())
            && !self.constant.is_zero();
        if lead_with_constant && !self.constant.is_zero() {
            pieces.push((self.constant.clone(), None));
        }
        for &m in &live {
            pieces.push((self.gradient[m].clone(), Some(name(m))));
        }
        if !lead_with_constant && !self.constant.is_zero() {
            pieces.push((self.constant.clone(), None));
        }
        for (i, (coeff, name)) in pieces.iter().enumerate() {
            let (mag, negative) = if coeff.is_real() && coeff.re() < &num::BigRational::from_integer(0.into())
            {
                (-coeff.clone(), true)
            } else {
                (coeff.clone(), false)
            };
            if i == 0 {
                if negative {
                    write!(f, "-")?;
                }
            } else if negative {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            match name {
                None => write!(f, "{mag}")?,
                Some(n) => {
                    if mag.is_one() {
                        write!(f, "{n}")?;
                    } else if mag.is_real() || mag.is_imaginary() {
                        write!(f, "{mag} {n}")?;
                    } else {
                        write!(f, "({mag}) {n}")?;
                    }
                }
            }
        }
        Ok(())
    }
}

/// One monomial of a fitted family, with an affine coefficient.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FamilyEntry {
    pub k: u32,
    pub alpha: Vec<u32>,
    pub conj: Vec<ConjFlag>,
    pub coeff: AffineCoeff,
}

/// The affine family of single-field equations solved by the traveling sech
/// profile at one dispersion level — every member, for every value of the
/// free parameters, has the profile as an exact solution for every carrier
/// frequency.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FittedFamily {
    j: u32,
    free_params: Vec<String>,
    entries: Vec<FamilyEntry>,
}

impl FittedFamily {
    pub fn j(&self) -> u32 {
        self.j
    }

    pub fn dimension(&self) -> usize {
        self.free_params.len()
    }

    pub fn free_params(&self) -> &[String] {
        &self.free_params
    }

    pub fn entries(&self) -> &[FamilyEntry] {
        &self.entries
    }

    /// Instantiate the family at concrete parameter values.
    pub fn at(&self, params: &[GaussianRational]) -> Result<CoefficientTable, SolutionsError> {
        if params.len() != self.free_params.len() {
            return Err(SolutionsError::ParameterCount {
                j: self.j,
                expected: self.free_params.len(),
                got: params.len(),
            });
        }
        let entries = self
            .entries
            .iter()
            .map(|e| TableEntry {
                k: e.k,
                alpha: e.alpha.clone(),
                conj: e.conj.clone(),
                coeff: e.coeff.at(params),
            })
            .collect();
        Ok(CoefficientTable::new(self.j, entries)?)
    }

    /// The monomial whose coefficient *is* the `m`-th free parameter.
    fn coordinate_entry(&self, m: usize) -> Option<&FamilyEntry> {
        self.entries.iter().find(|e| {
            e.coeff.constant.is_zero()
                && e.coeff
                    .gradient
                    .iter()
                    .enumerate()
                    .all(|(i, g)| if i == m { g.is_one() } else { g.is_zero() })
        })
    }

    /// Read off the parameter values that would reproduce `table`'s
    /// coordinate coefficients.  The result instantiates back to `table`
    /// exactly when the table belongs to the family.
    pub fn coordinates_of(&self, table: &CoefficientTable) -> Option<Vec<GaussianRational>> {
        (0..self.dimension())
            .map(|m| {
                let coord = self.coordinate_entry(m)?;
                Some(
                    table
                        .entries()
                        .iter()
                        .find(|e| {
                            e.k == coord.k && e.alpha == coord.alpha && e.conj == coord.conj
                        })
                        .map(|e| e.coeff.clone())
                        .unwrap_or_else(GaussianRational::zero),
                )
            })
            .collect()
    }

    /// Exact membership test.
    pub fn contains(&self, table: &CoefficientTable) -> bool {
        if table.j() != self.j {
            return false;
        }
        match self.coordinates_of(table) {
            Some(coords) => self.at(&coords).map(|t| &t == table).unwrap_or(false),
            None => false,
        }
    }
}

impl fmt::Display for FittedFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.j % 2 == 1 { '+' } else { '-' };
        write!(f, "i u_t {sign} u_{} = ", "x".repeat(2 * self.j as usize))?;
        for (i, e) in self.entries.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            let coeff = e.coeff.to_string();
            let unit = coeff == "1";
            if !unit {
                if e.coeff.gradient.iter().all(GaussianRational::is_zero)
                    && !coeff.contains(' ')
                    && !coeff.starts_with('(')
                {
                    write!(f, "{coeff} ")?;
                } else {
                    write!(f, "({coeff}) ")?;
                }
            }
            // Factors sorted by derivative order with powers collected; a
            // conjugated factor ranks just above the plain factor of the
            // same order, so pairings read conventionally ("u ubar u_xx",
            // "u_x^2 ubar").
            let mut factors: Vec<(u32, ConjFlag)> = e
                .alpha
                .iter()
                .zip(&e.conj)
                .map(|(a, c)| (*a, *c))
                .collect();
            factors.sort_by_key(|&(order, flag)| {
                2 * order + if flag == ConjFlag::Conjugated { 3 } else { 0 }
            });
            let mut pos = 0;
            let mut first = true;
            while pos < factors.len() {
                let (order, flag) = factors[pos];
                let mut mult = 1;
                while pos + mult < factors.len() && factors[pos + mult] == (order, flag) {
                    mult += 1;
                }
                pos += mult;
                if !first {
                    write!(f, " ")?;
                }
                first = false;
                let base = match flag {
                    ConjFlag::Plain => "u",
                    ConjFlag::Conjugated => "ubar",
                };
                write!(f, "{base}")?;
                if order > 0 {
                    write!(f, "_{}", "x".repeat(order as usize))?;
                }
                if mult > 1 {
                    write!(f, "^{mult}")?;
                }
            }
        }
        Ok(())
    }
}

/// Candidate monomial in the fitter's basis: derivative-order multisets for
/// the plain and conjugated factor classes, stored descending.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Candidate {
    k: u32,
    plain: Vec<u32>,
    conj: Vec<u32>,
}

impl Candidate {
    /// Canonical interleaving: plain orders at even positions, conjugated
    /// at odd, matching the alternating flag pattern of a balanced product.
    fn alpha(&self) -> Vec<u32> {
        let mut alpha = vec![0; self.plain.len() + self.conj.len()];
        for (i, a) in self.plain.iter().enumerate() {
            alpha[2 * i] = *a;
        }
        for (i, a) in self.conj.iter().enumerate() {
            alpha[2 * i + 1] = *a;
        }
        alpha
    }

    fn flags(&self) -> Vec<ConjFlag> {
        (0..self.plain.len() + self.conj.len())
            .map(|i| {
                if i % 2 == 0 {
                    ConjFlag::Plain
                } else {
                    ConjFlag::Conjugated
                }
            })
            .collect()
    }

    fn envelope(&self, derivatives: &[SechExpr]) -> SechExpr {
        let mut prod = SechExpr::one();
        for &a in &self.plain {
            prod = prod.mul(&derivatives[a as usize]);
        }
        for &a in &self.conj {
            prod = prod.mul(&derivatives[a as usize].conj());
        }
        prod
    }
}

/// All weakly decreasing sequences of the given length summing to `total`.
fn descending_sequences(len: usize, total: u32, cap: u32) -> Vec<Vec<u32>> {
    if len == 0 {
        return if total == 0 { vec![Vec::new()] } else { Vec::new() };
    }
    let mut out = Vec::new();
    let lo = total.div_ceil(len as u32);
    for first in (lo..=total.min(cap)).rev() {
        for mut rest in descending_sequences(len - 1, total - first, first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn candidate_monomials(j: u32) -> Vec<Candidate> {
    let mut out = Vec::new();
    for k in 1..=j {
        let total = 2 * (j - k);
        for split in 0..=total {
            for plain in descending_sequences(k as usize + 1, split, split) {
                for conj in descending_sequences(k as usize, total - split, total - split) {
                    out.push(Candidate {
                        k,
                        plain: plain.clone(),
                        conj,
                    });
                }
            }
        }
    }
    out.sort();
    out
}

/// Envelope of the equation's left-hand side `i∂_t u + (−1)^{j+1}∂_x^{2j} u`
/// on the traveling profile.  Its first-degree terms cancel exactly —
/// that cancellation is the closed-form phase/speed statement.
fn lhs_envelope(j: u32, derivatives: &[SechExpr]) -> SechExpr {
    let (delta0, c0) = phase_speed_polynomials(j);
    let mut lhs = SechExpr::zero();
    // i ∂_t (e^{iφ} g) has envelope −δ₀ g − i c₀ gp.
    lhs.add_term(1, 0, delta0.scale(&-GaussianRational::one()));
    lhs.add_term(0, 1, c0.scale(&-GaussianRational::i()));
    let sign = if j % 2 == 1 {
        GaussianRational::one()
    } else {
        -GaussianRational::one()
    };
    lhs.add_assign(&derivatives[2 * j as usize].scale(&sign));
    lhs
}

fn carrier_derivatives(j: u32) -> Vec<SechExpr> {
    let mut derivatives = vec![SechExpr::profile()];
    for a in 1..=2 * j as usize {
        derivatives.push(derivatives[a - 1].dx());
    }
    derivatives
}

/// Add `v` to an incrementally reduced spanning set; reports whether it was
/// independent of the rows already present.
fn extend_independent(reduced: &mut Vec<Vec<GaussianRational>>, mut v: Vec<GaussianRational>) -> bool {
    for row in reduced.iter() {
        let lead = row
            .iter()
            .position(|x| !x.is_zero())
            .expect("reduced rows are nonzero");
        if !v[lead].is_zero() {
            let f = &v[lead] / &row[lead];
            for (x, r) in v.iter_mut().zip(row) {
                let delta = &f * r;
                *x = &*x - &delta;
            }
        }
    }
    if v.iter().all(GaussianRational::is_zero) {
        false
    } else {
        reduced.push(v);
        true
    }
}

/// Fit the affine family of NLS-like equations solved by the traveling sech
/// profile at level `j`, identically in the carrier frequency.
///
/// The profile is substituted with indeterminate coefficients on every
/// admissible monomial (`2k+1` factors, `2(j−k)` derivatives); the sech
/// identities close the result over the basis `{g^a, g^a g′}`, and the
/// resulting exact linear system is solved outright.  Free coordinates are
/// chosen greedily among the monomial coefficients — fewest factors first,
/// highest derivative concentration first — so the quartic-level family is
/// parametrized by the coefficient of `u ū u_xx`, reported as `lambda`.
///
/// Levels `j ≥ 2` carry free parameters; `j = 1` is admitted and pins the
/// classical cubic equation (a zero-dimensional family).
pub fn fit_equation_for_ansatz(j: u32) -> Result<FittedFamily, SolutionsError> {
    assert!(j >= 1, "dispersion level must be positive");
    let derivatives = carrier_derivatives(j);
    let candidates = candidate_monomials(j);
    let envelopes: Vec<SechExpr> = candidates
        .iter()
        .map(|c| c.envelope(&derivatives))
        .collect();
    let lhs = lhs_envelope(j, &derivatives);

    let mut keys: BTreeSet<(u32, u8, u32)> = lhs.keys().into_iter().collect();
    for e in &envelopes {
        keys.extend(e.keys());
    }
    let rows: Vec<Vec<GaussianRational>> = keys
        .iter()
        .map(|&key| envelopes.iter().map(|e| e.coeff_at(key)).collect())
        .collect();
    let rhs: Vec<GaussianRational> = keys.iter().map(|&key| lhs.coeff_at(key)).collect();

    let solution =
        solve_linear_system(&rows, &rhs).ok_or(SolutionsError::InconsistentFit { j })?;
    let dim = solution.directions.len();

    // Pick coordinate monomials: order candidates by factor count, then by
    // derivative concentration (descending interleaved orders), and keep
    // those whose coefficient functionals are independent on the family's
    // direction space.
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| {
        (candidates[a].k, std::cmp::Reverse(candidates[a].alpha()))
            .cmp(&(candidates[b].k, std::cmp::Reverse(candidates[b].alpha())))
    });
    let mut chosen = Vec::new();
    let mut reduced = Vec::new();
    for &idx in &order {
        if chosen.len() == dim {
            break;
        }
        let restriction: Vec<GaussianRational> = solution
            .directions
            .iter()
            .map(|dir| dir[idx].clone())
            .collect();
        if extend_independent(&mut reduced, restriction) {
            chosen.push(idx);
        }
    }
    assert_eq!(
        chosen.len(),
        dim,
        "coordinate projections span the direction space by construction"
    );

    // Re-parametrize so the chosen coefficients *are* the parameters:
    // with B[m][t] = directions[t][chosen[m]], the gradient matrix is
    // G = directionsᵀ · B⁻¹ and the offset is particular − G · particular|chosen.
    let b: Vec<Vec<GaussianRational>> = chosen
        .iter()
        .map(|&i| {
            solution
                .directions
                .iter()
                .map(|dir| dir[i].clone())
                .collect()
        })
        .collect();
    let b_inv = invert_matrix(&b).expect("coordinate matrix is invertible by construction");

    let gradient_of = |idx: usize| -> Vec<GaussianRational> {
        (0..dim)
            .map(|m| {
                let mut acc = GaussianRational::zero();
                for t in 0..dim {
                    acc = &acc + &(&solution.directions[t][idx] * &b_inv[t][m]);
                }
                acc
            })
            .collect()
    };

    let mut entries = Vec::new();
    for (idx, cand) in candidates.iter().enumerate() {
        let gradient = gradient_of(idx);
        let mut constant = solution.particular[idx].clone();
        for (m, g) in gradient.iter().enumerate() {
            let offset = g * &solution.particular[chosen[m]];
            constant = &constant - &offset;
        }
        let coeff = AffineCoeff { constant, gradient };
        if coeff.is_identically_zero() {
            continue;
        }
        entries.push(FamilyEntry {
            k: cand.k,
            alpha: cand.alpha(),
            conj: cand.flags(),
            coeff,
        });
    }
    entries.sort_by(|a, b| (a.k, &a.alpha, &a.conj).cmp(&(b.k, &b.alpha, &b.conj)));

    let free_params = match dim {
        1 => vec!["lambda".to_owned()],
        _ => (1..=dim).map(|m| format!("lambda_{m}")).collect(),
    };
    Ok(FittedFamily {
        j,
        free_params,
        entries,
    })
}

/// Symbolic residual of a concrete equation on the traveling sech profile:
/// reduces `i∂_t u + (−1)^{j+1}∂^{2j}u − RHS(u)` over the sech basis,
/// identically in the carrier frequency, and reports whether everything
/// cancelled.
pub fn symbolic_residual_is_zero(table: &CoefficientTable) -> bool {
    let j = table.j();
    let derivatives = carrier_derivatives(j);
    let mut res = lhs_envelope(j, &derivatives);
    for entry in table.entries() {
        let mut prod = SechExpr::one();
        for (order, flag) in entry.alpha.iter().zip(&entry.conj) {
            let factor = match flag {
                ConjFlag::Plain => derivatives[*order as usize].clone(),
                ConjFlag::Conjugated => derivatives[*order as usize].conj(),
            };
            prod = prod.mul(&factor);
        }
        res.sub_assign(&prod.scale(&entry.coeff));
    }
    res.is_zero()
}

/// Verify the defining property of a fitted family: the symbolic residual
/// vanishes for *every* parameter value.  The residual is affine in the
/// parameters, so vanishing at the origin and at each unit vector is
/// equivalent to vanishing identically.
pub fn family_residual_is_zero(family: &FittedFamily) -> Result<bool, SolutionsError> {
    let dim = family.dimension();
    let mut points = vec![vec![GaussianRational::zero(); dim]];
    for m in 0..dim {
        let mut p = vec![GaussianRational::zero(); dim];
        p[m] = GaussianRational::one();
        points.push(p);
    }
    for p in points {
        if !symbolic_residual_is_zero(&family.at(&p)?) {
            return Ok(false);
        }
    }
    Ok(true)
}

// ---------------------------------------------------------------------------
// Fitted-family serialization
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct WireAffine {
    #[serde(rename = "const")]
    constant: WireRatio,
    linear: Vec<WireRatio>,
}

#[derive(Serialize, Deserialize)]
struct WireFamilyTerm {
    k: u32,
    alpha: Vec<u32>,
    conj: Vec<String>,
    coeff: WireAffine,
}

#[derive(Serialize, Deserialize)]
struct WireFamily {
    j: u32,
    free_params: Vec<String>,
    terms: Vec<WireFamilyTerm>,
}

fn rational_to_wire<E: SerError>(x: &GaussianRational) -> Result<WireRatio, E> {
    Ok(WireRatio {
        re: ratio_to_pair(x.re(), "real").map_err(E::custom)?,
        im: ratio_to_pair(x.im(), "imaginary").map_err(E::custom)?,
    })
}

fn wire_to_rational<E: DeError>(w: &WireRatio) -> Result<GaussianRational, E> {
    Ok(GaussianRational::new(
        pair_to_ratio(w.re, "real").map_err(E::custom)?,
        pair_to_ratio(w.im, "imaginary").map_err(E::custom)?,
    ))
}

impl Serialize for FittedFamily {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let terms = self
            .entries
            .iter()
            .map(|e| {
                Ok(WireFamilyTerm {
                    k: e.k,
                    alpha: e.alpha.clone(),
                    conj: e.conj.iter().map(|c| c.as_str().to_owned()).collect(),
                    coeff: WireAffine {
                        constant: rational_to_wire(&e.coeff.constant)?,
                        linear: e
                            .coeff
                            .gradient
                            .iter()
                            .map(rational_to_wire)
                            .collect::<Result<_, S::Error>>()?,
                    },
                })
            })
            .collect::<Result<Vec<_>, S::Error>>()?;
        WireFamily {
            j: self.j,
            free_params: self.free_params.clone(),
            terms,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for FittedFamily {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let wire = WireFamily::deserialize(deserializer)?;
        let dim = wire.free_params.len();
        let mut entries = Vec::new();
        for (index, term) in wire.terms.into_iter().enumerate() {
            let count = 2 * term.k as usize + 1;
            if term.alpha.len() != count || term.conj.len() != count {
                return Err(D::Error::custom(format!(
                    "family term {index}: expected {count} orders and flags"
                )));
            }
            if term.coeff.linear.len() != dim {
                return Err(D::Error::custom(format!(
                    "family term {index}: expected {dim} slope(s)"
                )));
            }
            let conj = term
                .conj
                .iter()
                .map(|s| {
                    ConjFlag::from_str(s).ok_or_else(|| {
                        D::Error::custom(format!(
                            "family term {index}: unknown conjugation flag {s:?}"
                        ))
                    })
                })
                .collect::<Result<Vec<_>, D::Error>>()?;
            entries.push(FamilyEntry {
                k: term.k,
                alpha: term.alpha,
                conj,
                coeff: AffineCoeff {
                    constant: wire_to_rational(&term.coeff.constant)?,
                    gradient: term
                        .coeff
                        .linear
                        .iter()
                        .map(wire_to_rational)
                        .collect::<Result<_, D::Error>>()?,
                },
            });
        }
        let family = FittedFamily {
            j: wire.j,
            free_params: wire.free_params,
            entries,
        };
        // The instantiation at the origin revalidates all entry shapes.
        family
            .at(&vec![GaussianRational::zero(); dim])
            .map_err(|e| D::Error::custom(e.to_string()))?;
        Ok(family)
    }
}

// ---------------------------------------------------------------------------
// Torus plane-wave family
// ---------------------------------------------------------------------------

/// The power nonlinearity solved by the torus plane-wave family:
/// `i u_t + (−1)^{j+1} ∂_x^{2j} u = σ_j |u|² ∂_x^{2j−2} u` with
/// `σ_j = (−1)^j`.
///
/// For even levels the sign is `+1` and the equation reads as usually
/// displayed; for odd levels the plane wave forces the flipped sign — the
/// mismatch is surfaced by [`torus_sign_flipped`] rather than silently
/// absorbed, and the residual oracle demonstrates it.
pub fn torus_equation(j: u32) -> CoefficientTable {
    assert!(j >= 1, "dispersion level must be positive");
    let coeff = if j % 2 == 0 {
        GaussianRational::one()
    } else {
        -GaussianRational::one()
    };
    let entry = TableEntry {
        k: 1,
        alpha: vec![2 * j - 2, 0, 0],
        conj: vec![ConjFlag::Plain, ConjFlag::Conjugated, ConjFlag::Plain],
        coeff,
    };
    CoefficientTable::new(j, vec![entry]).expect("fixed shape is always valid")
}

/// Whether [`torus_equation`] had to flip the nonlinearity's sign relative
/// to the plain `+|u|² ∂_x^{2j−2} u` form for the plane wave to solve it.
pub fn torus_sign_flipped(j: u32) -> bool {
    j % 2 == 1
}

/// One row of the norm-separation demonstration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SeparationRow {
    /// Family index `n`; the two compared amplitudes are `1` and `1 + 1/n`.
    pub index: u32,
    /// First time the phase gap between the two plane waves reaches π.
    pub t_n: f64,
    /// Norm of the difference at time zero.
    pub norm_at_0: f64,
    /// Norm of the difference at `t_n`.
    pub norm_at_tn: f64,
}

/// Exact separation data for the pair of plane waves with amplitudes `1`
/// and `1 + 1/n`: initial distance `⟨N⟩^s N^{−s} / n`, distance
/// `⟨N⟩^s N^{−s} (2 + 1/n)` at
/// `t_n = π N^{2s+2−2j} / ((1 + 1/n)² − 1)`.
///
/// The interesting regime is `s < j − 1` (separation time shrinking in the
/// carrier); the numbers are computed regardless.  All three quantities
/// are evaluated in factored form, so at `s = 0`, `N = 1` the separated
/// norm is the literal floating-point value of `2 + 1/n`.
pub fn illposedness_separation(j: u32, s: f64, index: u32, carrier: f64) -> SeparationRow {
    assert!(j >= 1 && index >= 1 && carrier > 0.0);
    let n = index as f64;
    let bracket = {
        let r = 1.0 + 1.0 / n;
        r * r - 1.0
    };
    let t_n = std::f64::consts::PI * carrier.powf(2.0 * s + 2.0 - 2.0 * j as f64) / bracket;
    let scale = (1.0 + carrier * carrier).sqrt().powf(s) * carrier.powf(-s);
    SeparationRow {
        index,
        t_n,
        norm_at_0: scale / n,
        norm_at_tn: scale * (2.0 + 1.0 / n),
    }
}

/// The two plane waves compared by [`illposedness_separation`].
pub fn separation_pair(j: u32, s: f64, index: u32, carrier: f64) -> (AnsatzField, AnsatzField) {
    let wave = |amplitude: f64| AnsatzField::PlaneWave {
        j,
        s,
        carrier,
        amplitude: Complex64::new(amplitude, 0.0),
    };
    (wave(1.0), wave(1.0 + 1.0 / index as f64))
}

// ---------------------------------------------------------------------------
// Cubic-interaction resonance arithmetic
// ---------------------------------------------------------------------------

/// The quadratic symbol `(k₁ + k₂)² + (3/2)(k₁ + k₃)²` whose growth along
/// resonant frequency triples obstructs smooth (C³) dependence on the data
/// at quartic dispersion.
pub fn c3_resonant_symbol(k1: i64, k2: i64, k3: i64) -> BigRational {
    let a = BigInt::from(k1 + k2);
    let b = BigInt::from(k1 + k3);
    BigRational::new(2 * &a * &a + 3 * &b * &b, BigInt::from(2))
}

/// The quartic resonance function `k⁴ − k₁⁴ + k₂⁴ − k₃⁴` at the output
/// frequency `k = k₁ + k₂ + k₃`.
pub fn c3_resonance(k1: i64, k2: i64, k3: i64) -> i128 {
    let fourth = |v: i64| {
        let v = v as i128;
        v * v * v * v
    };
    fourth(k1 + k2 + k3) - fourth(k1) + fourth(k2) - fourth(k3)
}

/// One frequency triple of the cubic interaction, with its resonance value
/// and symbol size.
#[derive(Clone, Debug, PartialEq)]
pub struct Constellation {
    pub frequencies: (i64, i64, i64),
    pub resonance: i128,
    pub symbol: BigRational,
}

/// Frequency triples compatible with data supported on `{base, carrier}`:
/// the conjugated (middle) slot ranges over the negated support, the outer
/// slots over the support itself, and the output frequency must equal
/// `carrier`.  For `carrier > base ≥ 1` these are exactly the three
/// resonant constellations `(base, −base, carrier)`,
/// `(carrier, −base, base)`, `(carrier, −carrier, carrier)`.
pub fn resonant_constellations(carrier: i64, base: i64) -> Vec<Constellation> {
    assert!(carrier >= base && base >= 1);
    let support = [base, carrier];
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for &k1 in &support {
        for &neg_k2 in &support {
            for &k3 in &support {
                let triple = (k1, -neg_k2, k3);
                if k1 - neg_k2 + k3 == carrier && seen.insert(triple) {
                    out.push(Constellation {
                        frequencies: triple,
                        resonance: c3_resonance(triple.0, triple.1, triple.2),
                        symbol: c3_resonant_symbol(triple.0, triple.1, triple.2),
                    });
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffpoly::SubstitutionRule;
    use crate::hierarchy::{extract_coefficients, nls_hierarchy_equation_substituted};

    fn int(v: i64) -> GaussianRational {
        GaussianRational::from_int(v)
    }

    fn ratio(n: i64, d: i64) -> GaussianRational {
        GaussianRational::ratio(n, d)
    }

    #[test]
    fn soliton_parameters_match_hand_evaluations() {
        let p = soliton_params(2, 1.0);
        assert_eq!((p.delta0, p.c0), (4.0, 0.0));
        let p = soliton_params(2, 2.0);
        assert_eq!((p.delta0, p.c0), (7.0, 24.0));
        // The first level degenerates to the classical values.
        for carrier in [0.5, 1.0, 3.0] {
            let p = soliton_params(1, carrier);
            assert_eq!(p.delta0, 1.0 - carrier * carrier);
            assert_eq!(p.c0, 2.0 * carrier);
        }
    }

    #[test]
    fn ansatz_evaluation_matches_closed_forms() {
        let soliton = AnsatzField::Soliton {
            j: 2,
            carrier: 1.0,
            omega: 1.0,
        };
        let v = soliton.eval(0.0, 0.0);
        assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-15);

        // Written-out reference at a generic point.
        let (x, t) = (0.7, 0.3);
        let expect = Complex64::new(0.0, x + 4.0 * t).exp() * sech(x);
        assert!((soliton.eval(x, t) - expect).norm() < 1e-15);

        // Plane wave with cancelling phases is time-independent.
        let wave = AnsatzField::PlaneWave {
            j: 2,
            s: 0.0,
            carrier: 1.0,
            amplitude: Complex64::new(1.0, 0.0),
        };
        let still = wave.eval(0.9, 0.0);
        assert!((wave.eval(0.9, 5.3) - still).norm() < 1e-15);
        assert!((still - Complex64::new(0.0, 0.9).exp()).norm() < 1e-15);
        assert!(wave.time_derivative(0.9, 5.3).norm() < 1e-15);
    }

    #[test]
    fn scaled_soliton_follows_the_dilation_law() {
        let scaled = AnsatzField::Soliton {
            j: 2,
            carrier: 1.0,
            omega: 2.0,
        };
        let base = AnsatzField::Soliton {
            j: 2,
            carrier: 0.5,
            omega: 1.0,
        };
        for (x, t) in [(0.0, 0.0), (0.3, 0.01), (-1.2, 0.002)] {
            let lhs = scaled.eval(x, t);
            let rhs = 2.0 * base.eval(2.0 * x, 16.0 * t);
            assert!((lhs - rhs).norm() < 1e-13, "mismatch at ({x}, {t})");
            let lhs_t = scaled.time_derivative(x, t);
            let rhs_t = 32.0 * base.time_derivative(2.0 * x, 16.0 * t);
            assert!((lhs_t - rhs_t).norm() < 1e-11);
        }
    }

    #[test]
    fn soliton_time_derivative_agrees_with_finite_differences() {
        let field = AnsatzField::Soliton {
            j: 2,
            carrier: 2.0,
            omega: 1.0,
        };
        let (x, t, h) = (0.4, 0.2, 1e-6);
        let numeric = (field.eval(x, t + h) - field.eval(x, t - h)) / (2.0 * h);
        let exact = field.time_derivative(x, t);
        assert!(
            (numeric - exact).norm() < 1e-6 * exact.norm().max(1.0),
            "finite difference {numeric} vs closed form {exact}"
        );
    }

    #[test]
    fn linear_part_of_the_profile_equation_cancels() {
        // The g and gp rows of the reduced left-hand side vanish identically
        // in the carrier — this *is* the phase/speed closed form.
        for j in 1..=4 {
            let derivatives = carrier_derivatives(j);
            let lhs = lhs_envelope(j, &derivatives);
            assert!(lhs.coeff(1, 0).is_zero(), "g row at level {j}");
            assert!(lhs.coeff(0, 1).is_zero(), "gp row at level {j}");
        }
    }

    #[test]
    fn quartic_family_is_one_dimensional_with_the_expected_coefficients() {
        let family = fit_equation_for_ansatz(2).unwrap();
        assert_eq!(family.j(), 2);
        assert_eq!(family.free_params(), ["lambda".to_owned()]);
        assert_eq!(family.entries().len(), 5);

        let by_alpha: Vec<(&[u32], &AffineCoeff)> = family
            .entries()
            .iter()
            .map(|e| (e.alpha.as_slice(), &e.coeff))
            .collect();
        let affine = |c: i64, g: i64| AffineCoeff {
            constant: int(c),
            gradient: vec![int(g)],
        };
        assert_eq!(
            by_alpha,
            vec![
                (&[0, 2, 0][..], &affine(2, 0)),  // u² ū_xx
                (&[1, 0, 1][..], &affine(14, -1)), // u_x² ū
                (&[1, 1, 0][..], &affine(4, 0)),  // u u_x ū_x
                (&[2, 0, 0][..], &affine(0, 1)),  // u ū u_xx — the coordinate
                (&[0, 0, 0, 0, 0][..], &affine(-2, 1)), // u³ ū²
            ]
        );
    }

    #[test]
    fn quartic_family_members_check_out() {
        let family = fit_equation_for_ansatz(2).unwrap();
        assert!(family_residual_is_zero(&family).unwrap());

        // The member at 8 is the focusing fourth-order hierarchy equation.
        let focusing = extract_coefficients(
            &nls_hierarchy_equation_substituted(2, &SubstitutionRule::MinusConjugateQ).unwrap(),
        )
        .unwrap();
        assert_eq!(family.at(&[int(8)]).unwrap(), focusing);
        assert!(family.contains(&focusing));

        // The defocusing table differs in the cubic signs and is *not* in
        // the family.
        let defocusing = extract_coefficients(
            &nls_hierarchy_equation_substituted(2, &SubstitutionRule::ConjugateQ).unwrap(),
        )
        .unwrap();
        assert!(!family.contains(&defocusing));
        assert!(!symbolic_residual_is_zero(&defocusing));

        // At 14 the tabulated-agreement member: (14, 2, 4, 0, 12).
        let at14 = family.at(&[int(14)]).unwrap();
        let coeffs: Vec<(u32, GaussianRational)> = at14
            .entries()
            .iter()
            .map(|e| (e.alpha.iter().sum::<u32>(), e.coeff.clone()))
            .collect();
        // Entry (1,0,1) vanished at 14; four entries remain.
        assert_eq!(at14.entries().len(), 4);
        assert_eq!(
            coeffs,
            vec![(2, int(2)), (2, int(4)), (2, int(14)), (0, int(12))]
        );

        // Fractional members are members too.
        let member = family.at(&[ratio(7, 3)]).unwrap();
        assert!(symbolic_residual_is_zero(&member));
        assert_eq!(family.coordinates_of(&member), Some(vec![ratio(7, 3)]));
    }

    #[test]
    fn first_level_family_is_the_classical_cubic() {
        let family = fit_equation_for_ansatz(1).unwrap();
        assert_eq!(family.dimension(), 0);
        assert_eq!(family.entries().len(), 1);
        assert_eq!(family.entries()[0].coeff.constant, int(-2));
        // ... which is the focusing cubic equation.
        let focusing = extract_coefficients(
            &nls_hierarchy_equation_substituted(1, &SubstitutionRule::MinusConjugateQ).unwrap(),
        )
        .unwrap();
        assert_eq!(family.at(&[]).unwrap(), focusing);
    }

    #[test]
    fn sixth_order_family_has_six_parameters_and_contains_the_hierarchy_member() {
        let family = fit_equation_for_ansatz(3).unwrap();
        assert_eq!(family.dimension(), 6);
        assert_eq!(family.entries().len(), 15);

        // Two coefficients are pinned across the whole family.
        let pinned = |alpha: &[u32]| {
            family
                .entries()
                .iter()
                .find(|e| e.alpha == alpha)
                .expect("entry present")
                .coeff
                .clone()
        };
        let constant = |c: i64| AffineCoeff {
            constant: int(c),
            gradient: vec![GaussianRational::zero(); 6],
        };
        assert_eq!(pinned(&[0, 4, 0]), constant(-2)); // u² ū_xxxx
        assert_eq!(pinned(&[1, 3, 0]), constant(-8)); // u u_x ū_xxx

        let focusing = extract_coefficients(
            &nls_hierarchy_equation_substituted(3, &SubstitutionRule::MinusConjugateQ).unwrap(),
        )
        .unwrap();
        assert!(family.contains(&focusing));
        assert!(symbolic_residual_is_zero(&focusing));
        assert!(family_residual_is_zero(&family).unwrap());
    }

    #[test]
    fn family_serialization_round_trips() {
        let family = fit_equation_for_ansatz(2).unwrap();
        let json = serde_json::to_string_pretty(&family).unwrap();
        assert!(json.contains("\"free_params\""));
        assert!(json.contains("lambda"));
        let back: FittedFamily = serde_json::from_str(&json).unwrap();
        assert_eq!(back, family);

        // Wrong slope count is rejected.
        let broken = json.replace("\"free_params\": [\n    \"lambda\"\n  ]", "\"free_params\": []");
        assert!(serde_json::from_str::<FittedFamily>(&broken).is_err());
    }

    #[test]
    fn family_display_reads_like_an_equation() {
        let family = fit_equation_for_ansatz(2).unwrap();
        let text = family.to_string();
        assert!(text.starts_with("i u_t - u_xxxx = "), "{text}");
        assert!(text.contains("2 u^2 ubar_xx"), "{text}");
        assert!(text.contains("(14 - lambda) u_x^2 ubar"), "{text}");
        assert!(text.contains("4 u u_x ubar_x"), "{text}");
        assert!(text.contains("(lambda) u ubar u_xx"), "{text}");
        assert!(text.contains("(lambda - 2) u^3 ubar^2"), "{text}");
    }

    #[test]
    fn torus_equation_signs_follow_the_parity_rule() {
        let even = torus_equation(2);
        assert_eq!(even.entries().len(), 1);
        assert_eq!(even.entries()[0].alpha, vec![2, 0, 0]);
        assert_eq!(even.entries()[0].coeff, int(1));
        assert!(!torus_sign_flipped(2));

        let odd = torus_equation(3);
        assert_eq!(odd.entries()[0].alpha, vec![4, 0, 0]);
        assert_eq!(odd.entries()[0].coeff, int(-1));
        assert!(torus_sign_flipped(3));
    }

    #[test]
    fn separation_rows_match_the_exact_formulas() {
        // s = 0, N = 1: the separated norm is bitwise 2 + 1/n.
        for n in 1..=8 {
            let row = illposedness_separation(2, 0.0, n, 1.0);
            assert_eq!(row.norm_at_tn, 2.0 + 1.0 / n as f64);
            assert_eq!(row.norm_at_0, 1.0 / n as f64);
        }
        // n = 1: π N^{2s+2−2j} / 3.
        let row = illposedness_separation(2, 0.0, 1, 2.0);
        assert!((row.t_n - std::f64::consts::PI * 2.0f64.powi(-2) / 3.0).abs() < 1e-15);
        assert_eq!(row.norm_at_tn / row.norm_at_0, 3.0);

        // The pair's initial distance matches the row.
        let (a, b) = separation_pair(2, 0.0, 4, 1.0);
        let diff = (b.eval(0.0, 0.0) - a.eval(0.0, 0.0)).norm();
        assert!((diff - illposedness_separation(2, 0.0, 4, 1.0).norm_at_0).abs() < 1e-15);
    }

    #[test]
    fn resonance_arithmetic_matches_hand_values() {
        assert_eq!(c3_resonant_symbol(0, 0, 0), BigRational::from_integer(0.into()));
        for carrier in [2i64, 5, 100] {
            // (N, −N, N): symbol 6N², resonance 0.
            assert_eq!(
                c3_resonant_symbol(carrier, -carrier, carrier),
                BigRational::from_integer((6 * carrier * carrier).into())
            );
            assert_eq!(c3_resonance(carrier, -carrier, carrier), 0);
            // (N, −1, 1): (N−1)² + (3/2)(N+1)², resonance 0.
            let expect = BigRational::from_integer(((carrier - 1) * (carrier - 1)).into())
                + BigRational::new((3 * (carrier + 1) * (carrier + 1)).into(), 2.into());
            assert_eq!(c3_resonant_symbol(carrier, -1, 1), expect);
            assert_eq!(c3_resonance(carrier, -1, 1), 0);
        }
        // A non-resonant triple for contrast.
        assert_ne!(c3_resonance(1, 8, -1), 0);
    }

    #[test]
    fn admissible_triples_are_exactly_the_three_constellations() {
        let cs = resonant_constellations(8, 1);
        let triples: Vec<(i64, i64, i64)> = cs.iter().map(|c| c.frequencies).collect();
        assert_eq!(triples, vec![(1, -1, 8), (8, -1, 1), (8, -8, 8)]);
        for c in &cs {
            assert_eq!(c.resonance, 0);
        }
        assert_eq!(cs[2].symbol, BigRational::from_integer((6 * 64).into()));

        // Degenerate support collapses to a single triple.
        assert_eq!(resonant_constellations(3, 3).len(), 1);
    }
}
