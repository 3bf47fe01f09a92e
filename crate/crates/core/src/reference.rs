//! Tabulated reference data for the low levels of the hierarchy — the
//! classical table of conserved densities and flow equations — and the checks
//! that compare freshly generated algebra against it.
//!
//! The table ships as a text fixture in the polynomial text format, so the
//! golden data reads the way the literature prints it. Each density line
//! states the integrand core of `I_n = (2i)^{-n} ∫ core` up to total
//! x-derivatives; each flow line states `q_t = phase · prefactor · α_m ·
//! core` with an integer-coefficient core.

use crate::diffpoly::{parse_in_alphabet, Alphabet, DiffPolyError, DiffPolynomial, Var};
use crate::hierarchy::{conserved_density, flow_equation, FlowSpec};
use crate::rational::GaussianRational;
use std::sync::OnceLock;

/// The bundled reference table, embedded at build time.
pub const REFERENCE_TABLE_TEXT: &str = include_str!("../fixtures/hierarchy_reference.txt");

/// One tabulated density line: the integrand core of
/// `I_n = (2i)^{-n} ∫ core`, stated up to total x-derivatives.
#[derive(Clone, Debug)]
pub struct DensityLine {
    pub n: u32,
    pub core: DiffPolynomial,
}

/// One tabulated flow line: `q_t = phase · prefactor · α_m · core`.
#[derive(Clone, Debug)]
pub struct FlowLine {
    pub m: u32,
    pub prefactor: GaussianRational,
    pub core: DiffPolynomial,
    pub phase: GaussianRational,
}

#[derive(Clone, Debug, Default)]
pub struct ReferenceTable {
    pub densities: Vec<DensityLine>,
    pub flows: Vec<FlowLine>,
}

/// Parse a reference table in the fixture format: `#` comment lines,
/// `density <n> ; <core>` and `flow <m> ; (<prefactor>) ; <core> ; (<phase>)`.
pub fn parse_reference_table(text: &str) -> Result<ReferenceTable, DiffPolyError> {
    let mut table = ReferenceTable::default();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |msg: &str| DiffPolyError::Parse {
            pos: lineno + 1,
            msg: format!("reference table line {}: {msg}", lineno + 1),
        };
        let fields: Vec<&str> = line.split(';').map(str::trim).collect();
        let mut head = fields[0].split_whitespace();
        let kind = head.next().ok_or_else(|| bad("missing line kind"))?;
        let level: u32 = head
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("missing level"))?;
        let constant = |s: &str| -> Result<GaussianRational, DiffPolyError> {
            let p = parse_in_alphabet(s, Alphabet::QR)?;
            let c = p.constant_term();
            if p != DiffPolynomial::constant(Alphabet::QR, c.clone()) {
                return Err(bad("expected a constant"));
            }
            Ok(c)
        };
        match (kind, fields.len()) {
            ("density", 2) => table.densities.push(DensityLine {
                n: level,
                core: parse_in_alphabet(fields[1], Alphabet::QR)?,
            }),
            ("flow", 4) => table.flows.push(FlowLine {
                m: level,
                prefactor: constant(fields[1])?,
                core: parse_in_alphabet(fields[2], Alphabet::QR)?,
                phase: constant(fields[3])?,
            }),
            _ => return Err(bad("unrecognized line shape")),
        }
    }
    Ok(table)
}

/// The bundled table, parsed once.
pub fn reference_table() -> &'static ReferenceTable {
    static TABLE: OnceLock<ReferenceTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        parse_reference_table(REFERENCE_TABLE_TEXT).expect("bundled reference table parses")
    })
}

/// Outcome of one golden-data comparison.
#[derive(Clone, Debug)]
pub struct ReferenceCheck {
    pub label: String,
    pub passed: bool,
    /// What differed, when the check failed.
    pub detail: Option<String>,
}

/// Compare every generated conserved density against its tabulated core:
/// `q·Y_n − (2i)^{-n}·core` must be a total x-derivative.
pub fn verify_reference_densities() -> Vec<ReferenceCheck> {
    reference_table()
        .densities
        .iter()
        .map(|line| {
            let scaled = line.core.scale(&GaussianRational::two_i_pow(-(line.n as i32)));
            let diff = &conserved_density(line.n) - &scaled;
            let passed = diff.is_total_derivative();
            ReferenceCheck {
                label: format!("density {}", line.n),
                passed,
                detail: (!passed).then(|| {
                    format!(
                        "difference fails the divergence test: delta/delta q -> {}, delta/delta r -> {}",
                        diff.euler(Var::Q),
                        diff.euler(Var::R)
                    )
                }),
            }
        })
        .collect()
}

/// Compare generated flows (symbolic weight) against the tabulated lines
/// `m = 2..6`: the right-hand side must equal `phase · prefactor · core`
/// exactly, coefficient for coefficient.
pub fn verify_reference_flows() -> Vec<ReferenceCheck> {
    reference_table()
        .flows
        .iter()
        .filter(|line| line.m >= 2)
        .map(|line| check_flow_line(line))
        .collect()
}

/// Check a single tabulated flow line against the generated flow.
pub fn check_flow_line(line: &FlowLine) -> ReferenceCheck {
    let generated = flow_equation(&FlowSpec::symbolic(line.m)).rhs;
    let tabulated = line.core.scale(&(&line.phase * &line.prefactor));
    let passed = generated == tabulated;
    ReferenceCheck {
        label: format!("flow {}", line.m),
        passed,
        detail: (!passed).then(|| {
            format!(
                "generated minus tabulated: {}",
                &generated - &tabulated
            )
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_table_parses_with_expected_shape() {
        let table = reference_table();
        assert_eq!(
            table.densities.iter().map(|d| d.n).collect::<Vec<_>>(),
            vec![1, 2, 3, 4, 5, 6, 7]
        );
        assert_eq!(
            table.flows.iter().map(|f| f.m).collect::<Vec<_>>(),
            vec![0, 1, 2, 3, 4, 5, 6]
        );
        // Every flow phase is a unit and every core has integer coefficients.
        for flow in &table.flows {
            assert!(flow.phase.is_one() || flow.phase == GaussianRational::i());
            for m in flow.core.monomials() {
                assert!(m.coeff.is_real() && m.coeff.is_gaussian_integer());
            }
        }
    }

    #[test]
    fn malformed_lines_are_rejected() {
        assert!(parse_reference_table("density x ; q r").is_err());
        assert!(parse_reference_table("flow 2 ; (1/2)").is_err());
        assert!(parse_reference_table("junk 3 ; q").is_err());
        assert!(parse_reference_table("# comment only\n").is_ok());
    }
}
