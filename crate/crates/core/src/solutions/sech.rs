//! Exact symbolic algebra for traveling sech profiles.
//!
//! A field of the form `e^{i(Nx + d0 t)} sech(x - c0 t)` turns every
//! NLS-like monomial into a polynomial in three commuting symbols: the
//! profile `g = sech(y)`, its derivative `gp = g'`, and the carrier
//! frequency `N`.  Closure comes from the two sech identities
//!
//! ```text
//! gp' = g - 2 g^3        gp^2 = g^2 - g^4
//! ```
//!
//! so after reduction every expression is a sum of `g^a` and `g^a gp`
//! terms with coefficients polynomial in `N` over the Gaussian rationals.
//! Equating such expressions is exact, which is what lets the equation
//! fitter solve for monomial coefficients with no numerics involved.

use std::collections::BTreeMap;

use crate::rational::GaussianRational;

/// Polynomial in the carrier frequency `N` with Gaussian-rational
/// coefficients, keyed by exponent.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub(crate) struct CarrierPoly {
    coeffs: BTreeMap<u32, GaussianRational>,
}

impl CarrierPoly {
    pub(crate) fn zero() -> Self {
        CarrierPoly::default()
    }

    pub(crate) fn constant(c: GaussianRational) -> Self {
        let mut p = CarrierPoly::zero();
        p.add_term(0, c);
        p
    }

    #[cfg(test)]
    pub(crate) fn term(power: u32, c: GaussianRational) -> Self {
        let mut p = CarrierPoly::zero();
        p.add_term(power, c);
        p
    }

    pub(crate) fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub(crate) fn add_term(&mut self, power: u32, c: GaussianRational) {
        if c.is_zero() {
            return;
        }
        let slot = self.coeffs.entry(power).or_insert_with(GaussianRational::zero);
        *slot = &*slot + &c;
        if slot.is_zero() {
            self.coeffs.remove(&power);
        }
    }

    pub(crate) fn add_assign(&mut self, other: &CarrierPoly) {
        for (p, c) in &other.coeffs {
            self.add_term(*p, c.clone());
        }
    }

    pub(crate) fn scale(&self, c: &GaussianRational) -> CarrierPoly {
        let mut out = CarrierPoly::zero();
        for (p, v) in &self.coeffs {
            out.add_term(*p, v * c);
        }
        out
    }

    pub(crate) fn mul(&self, other: &CarrierPoly) -> CarrierPoly {
        let mut out = CarrierPoly::zero();
        for (p1, c1) in &self.coeffs {
            for (p2, c2) in &other.coeffs {
                out.add_term(p1 + p2, c1 * c2);
            }
        }
        out
    }

    /// Multiply by `i N` (one power of the carrier, one quarter turn).
    pub(crate) fn times_i_carrier(&self) -> CarrierPoly {
        let i = GaussianRational::i();
        let mut out = CarrierPoly::zero();
        for (p, c) in &self.coeffs {
            out.add_term(p + 1, c * &i);
        }
        out
    }

    /// Coefficient-wise complex conjugation (the carrier is real).
    pub(crate) fn conj(&self) -> CarrierPoly {
        let mut out = CarrierPoly::zero();
        for (p, c) in &self.coeffs {
            out.add_term(*p, c.conj());
        }
        out
    }

    pub(crate) fn powers(&self) -> impl Iterator<Item = (&u32, &GaussianRational)> {
        self.coeffs.iter()
    }

}

/// Reduced sech expression: sum of `g^a gp^e` terms with `e <= 1`,
/// coefficients polynomial in the carrier frequency.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub(crate) struct SechExpr {
    terms: BTreeMap<(u32, u8), CarrierPoly>,
}

impl SechExpr {
    pub(crate) fn zero() -> Self {
        SechExpr::default()
    }

    /// The bare profile `g`.
    pub(crate) fn profile() -> Self {
        let mut e = SechExpr::zero();
        e.add_term(1, 0, CarrierPoly::constant(GaussianRational::one()));
        e
    }

    /// The multiplicative unit `g^0 gp^0` (seed for products).
    pub(crate) fn one() -> Self {
        let mut e = SechExpr::zero();
        e.add_term(0, 0, CarrierPoly::constant(GaussianRational::one()));
        e
    }

    pub(crate) fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub(crate) fn add_term(&mut self, g_pow: u32, gp_pow: u8, coeff: CarrierPoly) {
        if coeff.is_zero() {
            return;
        }
        debug_assert!(gp_pow <= 1, "gp powers must be reduced before storage");
        let slot = self
            .terms
            .entry((g_pow, gp_pow))
            .or_insert_with(CarrierPoly::zero);
        slot.add_assign(&coeff);
        if slot.is_zero() {
            self.terms.remove(&(g_pow, gp_pow));
        }
    }

    pub(crate) fn add_assign(&mut self, other: &SechExpr) {
        for ((a, e), c) in &other.terms {
            self.add_term(*a, *e, c.clone());
        }
    }

    pub(crate) fn sub_assign(&mut self, other: &SechExpr) {
        for ((a, e), c) in &other.terms {
            self.add_term(*a, *e, c.scale(&-GaussianRational::one()));
        }
    }

    pub(crate) fn scale(&self, c: &GaussianRational) -> SechExpr {
        let mut out = SechExpr::zero();
        for ((a, e), p) in &self.terms {
            out.add_term(*a, *e, p.scale(c));
        }
        out
    }

    /// Product with the `gp^2 = g^2 - g^4` reduction applied.
    pub(crate) fn mul(&self, other: &SechExpr) -> SechExpr {
        let mut out = SechExpr::zero();
        for ((a1, e1), c1) in &self.terms {
            for ((a2, e2), c2) in &other.terms {
                let coeff = c1.mul(c2);
                let a = a1 + a2;
                match e1 + e2 {
                    0 | 1 => out.add_term(a, e1 + e2, coeff),
                    2 => {
                        // gp^2 = g^2 - g^4
                        out.add_term(a + 2, 0, coeff.clone());
                        out.add_term(a + 4, 0, coeff.scale(&-GaussianRational::one()));
                    }
                    _ => unreachable!("stored gp powers never exceed one"),
                }
            }
        }
        out
    }

    /// Derivative in the co-moving coordinate: `g' = gp`, `gp' = g - 2 g^3`.
    pub(crate) fn ddy(&self) -> SechExpr {
        let mut out = SechExpr::zero();
        for ((a, e), c) in &self.terms {
            if *a > 0 {
                // d/dy g^a = a g^{a-1} gp; combined with an existing gp the
                // square reduces immediately.
                let ac = c.scale(&GaussianRational::from_int(*a as i64));
                match e {
                    0 => out.add_term(a - 1, 1, ac),
                    1 => {
                        out.add_term(a + 1, 0, ac.clone());
                        out.add_term(a + 3, 0, ac.scale(&-GaussianRational::one()));
                    }
                    _ => unreachable!(),
                }
            }
            if *e == 1 {
                // g^a gp' = g^{a+1} - 2 g^{a+3}
                out.add_term(a + 1, 0, c.clone());
                out.add_term(a + 3, 0, c.scale(&-GaussianRational::from_int(2)));
            }
        }
        out
    }

    /// Full spatial derivative of a factor riding the carrier `e^{iNx}`:
    /// the envelope picks up `iN * self + d/dy self`.
    pub(crate) fn dx(&self) -> SechExpr {
        let mut out = self.ddy();
        for ((a, e), c) in &self.terms {
            out.add_term(*a, *e, c.times_i_carrier());
        }
        out
    }

    /// Envelope of the conjugated factor (profile symbols are real).
    pub(crate) fn conj(&self) -> SechExpr {
        let mut out = SechExpr::zero();
        for ((a, e), c) in &self.terms {
            out.add_term(*a, *e, c.conj());
        }
        out
    }

    /// Coefficient of `g^a gp^e`, as a carrier polynomial.
    #[cfg(test)]
    pub(crate) fn coeff(&self, g_pow: u32, gp_pow: u8) -> CarrierPoly {
        self.terms
            .get(&(g_pow, gp_pow))
            .cloned()
            .unwrap_or_else(CarrierPoly::zero)
    }

    /// All `(g_pow, gp_pow, carrier_pow)` keys with a nonzero coefficient.
    pub(crate) fn keys(&self) -> Vec<(u32, u8, u32)> {
        let mut out = Vec::new();
        for ((a, e), c) in &self.terms {
            for (p, _) in c.powers() {
                out.push((*a, *e, *p));
            }
        }
        out
    }

    pub(crate) fn coeff_at(&self, key: (u32, u8, u32)) -> GaussianRational {
        self.terms
            .get(&(key.0, key.1))
            .and_then(|c| c.powers().find(|(p, _)| **p == key.2).map(|(_, v)| v.clone()))
        .unwrap_or_else(GaussianRational::zero)
    }
}

/// `(d/dy)^k sech`, reduced to the closed basis.
#[cfg(test)]
pub(crate) fn sech_derivative(k: u32) -> SechExpr {
    let mut e = SechExpr::profile();
    for _ in 0..k {
        e = e.ddy();
    }
    e
}

/// Affine solution set of an exact linear system: `particular + span(directions)`.
#[derive(Debug, Clone)]
pub(crate) struct AffineSolutionSet {
    pub(crate) particular: Vec<GaussianRational>,
    pub(crate) directions: Vec<Vec<GaussianRational>>,
}

/// Gauss-Jordan over the Gaussian rationals.  Returns `None` when the
/// system `a x = b` is inconsistent.
pub(crate) fn solve_linear_system(
    a: &[Vec<GaussianRational>],
    b: &[GaussianRational],
) -> Option<AffineSolutionSet> {
    let rows = a.len();
    assert_eq!(rows, b.len());
    let cols = a.first().map_or(0, |r| r.len());
    let mut m: Vec<Vec<GaussianRational>> = a
        .iter()
        .zip(b)
        .map(|(row, rhs)| {
            assert_eq!(row.len(), cols);
            let mut r = row.clone();
            r.push(rhs.clone());
            r
        })
        .collect();

    let mut pivot_col = Vec::new();
    let mut rank = 0;
    for c in 0..cols {
        let Some(pr) = (rank..rows).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(rank, pr);
        let inv = m[rank][c].inv();
        for x in c..=cols {
            m[rank][x] = &m[rank][x] * &inv;
        }
        for i in 0..rows {
            if i != rank && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                for x in c..=cols {
                    let delta = &f * &m[rank][x];
                    m[i][x] = &m[i][x] - &delta;
                }
            }
        }
        pivot_col.push(c);
        rank += 1;
        if rank == rows {
            break;
        }
    }

    for row in m.iter().take(rows).skip(rank) {
        if !row[cols].is_zero() {
            return None;
        }
    }

    let mut particular = vec![GaussianRational::zero(); cols];
    for (r, &c) in pivot_col.iter().enumerate() {
        particular[c] = m[r][cols].clone();
    }

    let mut directions = Vec::new();
    for free in 0..cols {
        if pivot_col.contains(&free) {
            continue;
        }
        let mut dir = vec![GaussianRational::zero(); cols];
        dir[free] = GaussianRational::one();
        for (r, &c) in pivot_col.iter().enumerate() {
            dir[c] = -m[r][free].clone();
        }
        directions.push(dir);
    }

    Some(AffineSolutionSet {
        particular,
        directions,
    })
}

/// Inverse of a square exact matrix, or `None` if singular.
pub(crate) fn invert_matrix(
    mat: &[Vec<GaussianRational>],
) -> Option<Vec<Vec<GaussianRational>>> {
    let n = mat.len();
    let mut m: Vec<Vec<GaussianRational>> = mat
        .iter()
        .enumerate()
        .map(|(i, row)| {
            assert_eq!(row.len(), n);
            let mut r = row.clone();
            for k in 0..n {
                r.push(if k == i {
                    GaussianRational::one()
                } else {
                    GaussianRational::zero()
                });
            }
            r
        })
        .collect();

    for c in 0..n {
        let pr = (c..n).find(|&i| !m[i][c].is_zero())?;
        m.swap(c, pr);
        let inv = m[c][c].inv();
        for x in c..2 * n {
            m[c][x] = &m[c][x] * &inv;
        }
        for i in 0..n {
            if i != c && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                for x in c..2 * n {
                    let delta = &f * &m[c][x];
                    m[i][x] = &m[i][x] - &delta;
                }
            }
        }
    }

    Some(m.into_iter().map(|row| row[n..].to_vec()).collect())
}
