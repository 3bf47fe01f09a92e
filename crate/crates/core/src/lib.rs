//! Symbolic recursion, exact solution families, pseudospectral integration,
//! and norm probes for the NLS hierarchy.
//!
//! The crate is organized in layers:
//!
//! * [`rational`] — exact Gaussian-rational coefficients.
//! * [`diffpoly`] — differential polynomials in `q, r` (or `u, ū`) and their
//!   x-derivatives: arithmetic, the total derivative, variational derivatives,
//!   substitutions, and text/JSON forms.
//!
//! Higher layers (the hierarchy recursion, exact solution families, the
//! pseudospectral integrator, and the norm probes) build on these.

pub mod diffpoly;
pub mod hierarchy;
pub mod norms;
pub mod rational;
pub mod reference;
pub mod solutions;
pub mod spectral;

pub use diffpoly::{
    parse_in_alphabet, Alphabet, DerivativeSlot, DiffMonomial, DiffPolyError, DiffPolynomial,
    MonomialKey, SubstitutionRule, Var,
};
pub use hierarchy::{
    canonical_alpha, compute_y, conserved_density, critical_regularity, expand_table,
    extract_coefficients, flow_component_r, flow_display_parts, flow_equation,
    functional_derivative, nls_hierarchy_equation, nls_hierarchy_equation_substituted,
    nls_hierarchy_rhs_qr, validate_y_structure, AlphaWeight, CoefficientTable, ConjFlag,
    EquationForm, EvolutionEquation, FlowParts, FlowSpec, HierarchyError, StructureCheck,
    StructureReport, TableEntry,
};
pub use norms::{
    bilinear_apply, bilinear_symbol, norm, probe_estimate, probe_estimate_with, probe_sample,
    BilinearSign, EstimateId, NormSpec, ProbeConfig, ProbeReport, SpaceTimeField, SweepPoint,
    TimeWindow,
};
pub use rational::GaussianRational;
pub use reference::{verify_reference_densities, verify_reference_flows, ReferenceCheck};
pub use solutions::{
    c3_resonance, c3_resonant_symbol, eval_ansatz, family_residual_is_zero,
    fit_equation_for_ansatz, illposedness_separation, residual_norm, residual_report,
    resonant_constellations, separation_pair, soliton_params, symbolic_residual_is_zero,
    torus_equation, torus_sign_flipped, AffineCoeff, AnsatzField, Constellation, FamilyEntry,
    FittedFamily, ResidualReport, SeparationRow, SolitonParams, SolutionsError,
};
pub use spectral::{
    conserved_scan, convergence_study, eval_rhs, integrate, linear_phase, required_pad,
    ConservedSeries, ConvergenceStudy, DriftTable, FieldState, Grid, SimConfig, SpectralError,
    Trajectory,
};
