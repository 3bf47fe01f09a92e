//! Discrete Fourier–Lebesgue, Sobolev, and modulation norms on periodic
//! fields, plus empirical ratio probes for the smoothing estimates behind
//! the local theory (see [`probe`] items re-exported here).
//!
//! All families are evaluated on the coefficient side with counting
//! measure over the grid's frequency lattice `ξ_m = 2πm/L`:
//!
//! * Fourier–Lebesgue `Ĥ^s_r`: the `ℓ^{r′}` norm of `⟨ξ⟩^s |û|`, with
//!   `r′` the Hölder conjugate of `r` and `⟨ξ⟩ = (1 + ξ²)^{1/2}`.
//! * Sobolev `H^s`: the `r = 2` member of the same scale.
//! * Modulation `M^s_{2,p}`: the `ℓ^p` norm over integer translates `n`
//!   of the `H^s` norms of the band pieces cut by a raised-cosine window.
//!
//! With counting measure, the `s = 0`, `r = 2` member is the plain `ℓ²`
//! norm of the coefficients — the root-mean-square of the field, i.e. the
//! box `L²` norm divided by `√L`.  The window family is calibrated (once,
//! see [`NormSpec::Modulation`]) so that `M^0_{2,2}` coincides with that
//! `ℓ²` norm exactly rather than up to an overlap constant.

mod probe;

pub use probe::{
    bilinear_apply, bilinear_symbol, probe_estimate, probe_estimate_with, probe_sample,
    BilinearSign, EstimateId, ProbeConfig, ProbeReport, SpaceTimeField, SweepPoint, TimeWindow,
};

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::spectral::FieldState;

/// Which norm to evaluate.  Exponents `r` and `p` live in `[1, ∞]`
/// (`f64::INFINITY` is the supremum member); anything else is a caller
/// error and panics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NormSpec {
    /// Sobolev `H^s`: `ℓ²` of `⟨ξ⟩^s |û|`.
    Sobolev { s: f64 },
    /// Fourier–Lebesgue `Ĥ^s_r`: `ℓ^{r′}` of `⟨ξ⟩^s |û|`.
    FourierLebesgue { s: f64, r: f64 },
    /// Modulation `M^s_{2,p}`: `ℓ^p` over window indices of the `H^s`
    /// norms of the windowed pieces.
    ///
    /// The window is the raised cosine `ψ` (identically one on `[0, 1]`,
    /// `cos²` tapers on `[−1/4, 0]` and `[1, 5/4]`, zero elsewhere),
    /// normalized by the square root of its own squared-overlap function
    /// `W(ξ) = Σ_n ψ(ξ−n)²`.  That normalization is the one fixed
    /// calibration of the family: it makes `Σ_n ψ̃_n(ξ)² ≡ 1`, so
    /// `M^0_{2,2}` agrees with `Ĥ^0_2` exactly instead of up to an
    /// equivalence constant, while every support property of `ψ` is kept.
    Modulation { s: f64, p: f64 },
}

/// Japanese bracket `⟨ξ⟩ = (1 + ξ²)^{1/2}`.
fn bracket(xi: f64) -> f64 {
    xi.mul_add(xi, 1.0).sqrt()
}

/// Hölder conjugate on `[1, ∞]`.
fn conjugate_exponent(r: f64) -> f64 {
    assert!(
        r >= 1.0,
        "Lebesgue exponent must lie in [1, ∞], got {r}"
    );
    if r == 1.0 {
        f64::INFINITY
    } else if r.is_infinite() {
        1.0
    } else {
        r / (r - 1.0)
    }
}

/// `ℓ^p` norm of a nonnegative sequence, `p ∈ [1, ∞]`.
fn sequence_norm(items: impl Iterator<Item = f64>, p: f64) -> f64 {
    if p.is_infinite() {
        items.fold(0.0, f64::max)
    } else if p == 1.0 {
        items.sum()
    } else if p == 2.0 {
        items.map(|x| x * x).sum::<f64>().sqrt()
    } else {
        items.map(|x| x.powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// Evaluate `spec` on a field.  Always finite and nonnegative; the zero
/// field scores zero in every family.
pub fn norm(state: &FieldState, spec: &NormSpec) -> f64 {
    match *spec {
        NormSpec::Sobolev { s } => fourier_lebesgue(state, s, 2.0),
        NormSpec::FourierLebesgue { s, r } => fourier_lebesgue(state, s, r),
        NormSpec::Modulation { s, p } => {
            assert!(
                p >= 1.0,
                "modulation exponent must lie in [1, ∞], got {p}"
            );
            modulation(state, s, p)
        }
    }
}

fn fourier_lebesgue(state: &FieldState, s: f64, r: f64) -> f64 {
    let dual = conjugate_exponent(r);
    let grid = state.grid();
    let coeffs = state.coefficients();
    sequence_norm(
        coeffs
            .iter()
            .enumerate()
            .map(|(bin, c)| bracket(grid.wavenumber(bin)).powf(s) * c.norm()),
        dual,
    )
}

/// Raised-cosine window profile: `1` on `[0, 1]`, `cos²` tapers on
/// `[−1/4, 0]` and `[1, 5/4]`, zero outside.
fn window_profile(eta: f64) -> f64 {
    if !(-0.25..=1.25).contains(&eta) {
        0.0
    } else if eta < 0.0 {
        let c = (2.0 * PI * eta).cos();
        c * c
    } else if eta <= 1.0 {
        1.0
    } else {
        let c = (2.0 * PI * (eta - 1.0)).cos();
        c * c
    }
}

/// Squared overlap `W(ξ) = Σ_n ψ(ξ − n)²`.  At most two translates are
/// alive at any `ξ`, and the plateau of at least one of them always
/// covers `ξ`, so `W ∈ [1, 2]`.
fn squared_overlap(xi: f64) -> f64 {
    let lo = (xi - 1.25).floor() as i64;
    let hi = (xi + 0.25).ceil() as i64;
    (lo..=hi)
        .map(|n| {
            let w = window_profile(xi - n as f64);
            w * w
        })
        .sum()
}

fn modulation(state: &FieldState, s: f64, p: f64) -> f64 {
    let grid = state.grid();
    let coeffs = state.coefficients();
    // Squared H^s content per window index, accumulated mode by mode:
    // each lattice frequency meets at most two translates of ψ.
    let mut pieces: BTreeMap<i64, f64> = BTreeMap::new();
    for (bin, c) in coeffs.iter().enumerate() {
        let xi = grid.wavenumber(bin);
        let amplitude = bracket(xi).powf(s) * c.norm();
        if amplitude == 0.0 {
            continue;
        }
        let calibration = squared_overlap(xi).sqrt();
        let lo = (xi - 1.25).floor() as i64;
        let hi = (xi + 0.25).ceil() as i64;
        for n in lo..=hi {
            let w = window_profile(xi - n as f64);
            if w > 0.0 {
                let contribution = amplitude * w / calibration;
                *pieces.entry(n).or_insert(0.0) += contribution * contribution;
            }
        }
    }
    sequence_norm(pieces.values().map(|sq| sq.sqrt()), p)
}
