//! The six subcommands.  Each one resolves its parameters (flags override
//! the optional config file, which overrides built-in defaults), does its
//! work through the library crate, writes reproducible artifacts, and
//! finishes by recording a run manifest.

use std::f64::consts::TAU;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::Context;
use clap::builder::ArgGroup;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use nls_hierarchy::{
    canonical_alpha, conserved_density, extract_coefficients, fit_equation_for_ansatz,
    flow_equation, illposedness_separation, integrate, nls_hierarchy_equation_substituted,
    nls_hierarchy_rhs_qr, norm, probe_estimate_with, required_pad, resonant_constellations,
    residual_report, separation_pair, torus_equation, validate_y_structure,
    verify_reference_densities, verify_reference_flows, AnsatzField, CoefficientTable,
    DiffPolynomial, EstimateId, EvolutionEquation, FieldState, FlowSpec, GaussianRational, Grid,
    NormSpec, ProbeConfig, ReferenceCheck, SimConfig, SpectralError, SubstitutionRule,
};

use crate::artifacts::{float_cell, write_csv, write_json, write_text};
use crate::manifest::{load_manifest, sha256_hex, RunRecorder};
use crate::{plot, CliError, Config};

fn usage(err: impl Display) -> CliError {
    CliError::Usage(err.to_string())
}

fn tool(err: impl Display) -> CliError {
    CliError::Tool(anyhow::anyhow!("{err}"))
}

fn ensure_out_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating {}", dir.display()))
        .map_err(CliError::Tool)
}

fn push_arg(argv: &mut Vec<String>, flag: &str, value: impl Display) {
    argv.push(flag.to_owned());
    argv.push(value.to_string());
}

/// Run `integrate`, mapping a numeric abort to the dedicated exit code.
fn integrate_checked(
    table: &CoefficientTable,
    u0: &FieldState,
    cfg: &SimConfig,
) -> Result<nls_hierarchy::Trajectory, CliError> {
    integrate(table, u0, cfg).map_err(|err| match err {
        SpectralError::NumericAbort { step, time } => CliError::Numeric(format!(
            "integration aborted at step {step} (t = {time:.6e}): non-finite values"
        )),
        other => usage(other),
    })
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum SubstituteMode {
    /// `r -> conj(q)`: the defocusing single-field reduction.
    Conj,
    /// `r -> -conj(q)`: the focusing single-field reduction.
    MinusConj,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum AlphaMode {
    /// Keep the Hamiltonian weight as a formal symbol.
    Symbolic,
    /// Fold in the weight that normalizes the even flow to `i q_t = ...`.
    Canonical,
}

#[derive(Debug, clap::Args)]
#[command(group(ArgGroup::new("target").required(true).multiple(false)))]
pub struct GenerateArgs {
    /// Dispersion level: the single-field equation with 2j spatial orders
    #[arg(long, group = "target")]
    pub j: Option<u32>,
    /// Raw flow index: the two-field tabulated form q_t = ...
    #[arg(long, group = "target")]
    pub flow: Option<u32>,
    /// Plane-wave steady-state equation at this level
    #[arg(long, group = "target")]
    pub torus: Option<u32>,
    /// Weight handling for --flow
    #[arg(long, value_enum, default_value_t = AlphaMode::Symbolic)]
    pub alpha: AlphaMode,
    /// Conjugation reduction controlling the text rendering of --j output
    #[arg(long, value_enum)]
    pub substitute: Option<SubstituteMode>,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Serialize)]
struct FlowArtifact {
    n: u32,
    weight: String,
    rhs: DiffPolynomial,
}

pub fn generate(args: &GenerateArgs) -> Result<(), CliError> {
    ensure_out_dir(&args.out_dir)?;
    let mut argv = Vec::new();
    let mut recorder_outputs: Vec<PathBuf> = Vec::new();

    let text;
    if let Some(j) = args.j {
        push_arg(&mut argv, "--j", j);
        let rule = match args.substitute {
            None | Some(SubstituteMode::Conj) => SubstitutionRule::ConjugateQ,
            Some(SubstituteMode::MinusConj) => SubstitutionRule::MinusConjugateQ,
        };
        let equation = nls_hierarchy_equation_substituted(j, &rule).map_err(usage)?;
        let table = extract_coefficients(&equation).map_err(tool)?;
        let stem = match args.substitute {
            None => format!("equation_j{j}"),
            Some(SubstituteMode::Conj) => {
                push_arg(&mut argv, "--substitute", "conj");
                format!("equation_j{j}_conj")
            }
            Some(SubstituteMode::MinusConj) => {
                push_arg(&mut argv, "--substitute", "minus-conj");
                format!("equation_j{j}_focusing")
            }
        };
        // Default rendering is the two-field form the tabulation uses;
        // an explicit substitution renders the single-field equation.
        text = match args.substitute {
            None => format!("i q_t = {}", nls_hierarchy_rhs_qr(j).pretty()),
            Some(_) => equation.to_string(),
        };
        let json_path = args.out_dir.join(format!("{stem}.json"));
        write_json(&json_path, &table)?;
        recorder_outputs.push(json_path);
        let text_path = args.out_dir.join(format!("{stem}.txt"));
        write_text(&text_path, &text)?;
        recorder_outputs.push(text_path);
    } else if let Some(n) = args.flow {
        push_arg(&mut argv, "--flow", n);
        let spec = match args.alpha {
            AlphaMode::Symbolic => {
                push_arg(&mut argv, "--alpha", "symbolic");
                FlowSpec::symbolic(n)
            }
            AlphaMode::Canonical => {
                push_arg(&mut argv, "--alpha", "canonical");
                if n % 2 != 0 {
                    return Err(CliError::Usage(format!(
                        "canonical weights are defined for even flow indices (n = 2j), got {n}"
                    )));
                }
                FlowSpec::concrete(n, canonical_alpha(n / 2))
            }
        };
        if let Some(warning) = spec.parity_warning() {
            eprintln!("warning: {warning}");
        }
        let equation = flow_equation(&spec);
        text = equation.to_string();
        let weight = match args.alpha {
            AlphaMode::Symbolic => format!("alpha_{n} (symbolic)"),
            AlphaMode::Canonical => canonical_alpha(n / 2).to_string(),
        };
        let artifact = FlowArtifact {
            n,
            weight,
            rhs: equation.rhs.clone(),
        };
        let stem = format!("flow_n{n}");
        let json_path = args.out_dir.join(format!("{stem}.json"));
        write_json(&json_path, &artifact)?;
        recorder_outputs.push(json_path);
        let text_path = args.out_dir.join(format!("{stem}.txt"));
        write_text(&text_path, &text)?;
        recorder_outputs.push(text_path);
    } else {
        let j = args.torus.expect("clap group guarantees one target");
        push_arg(&mut argv, "--torus", j);
        let table = torus_equation(j);
        let rendered = EvolutionEquation::nls_like(j, nls_hierarchy::expand_table(&table))
            .map_err(tool)?;
        text = rendered.to_string();
        let json_path = args.out_dir.join(format!("torus_j{j}.json"));
        write_json(&json_path, &table)?;
        recorder_outputs.push(json_path);
        let text_path = args.out_dir.join(format!("torus_j{j}.txt"));
        write_text(&text_path, &text)?;
        recorder_outputs.push(text_path);
    }

    println!("{text}");
    let mut recorder = RunRecorder::new("generate", argv);
    for path in &recorder_outputs {
        recorder.output(path);
    }
    recorder.finish(&args.out_dir)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

#[derive(Debug, clap::Args)]
pub struct VerifyArgs {
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    #[command(subcommand)]
    pub scope: VerifyScope,
}

#[derive(Debug, clap::Subcommand)]
pub enum VerifyScope {
    /// Conserved densities and the tabulated flow lines
    Appendix,
    /// Structural claims of the recursion, plus form constraints of the
    /// generated equations
    Structure {
        #[arg(long, default_value_t = 12)]
        max_n: u32,
    },
    /// Fitted traveling-wave family: symbolic residual, family membership,
    /// and the numeric residual oracle
    Soliton {
        #[arg(long, default_value_t = 2)]
        j: u32,
    },
}

#[derive(Serialize)]
struct CheckRow {
    label: String,
    passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    detail: Option<String>,
}

impl From<ReferenceCheck> for CheckRow {
    fn from(check: ReferenceCheck) -> Self {
        CheckRow {
            label: check.label,
            passed: check.passed,
            detail: check.detail,
        }
    }
}

#[derive(Serialize)]
struct VerifyArtifact {
    scope: String,
    checks: Vec<CheckRow>,
    passed: usize,
    failed: usize,
}

fn soliton_checks(j: u32) -> Result<Vec<CheckRow>, CliError> {
    let mut rows = Vec::new();
    let family = fit_equation_for_ansatz(j).map_err(usage)?;
    rows.push(CheckRow {
        label: format!(
            "family fit at level {j}: {} free parameter(s)",
            family.dimension()
        ),
        passed: true,
        detail: None,
    });

    let symbolic = nls_hierarchy::family_residual_is_zero(&family).map_err(tool)?;
    rows.push(CheckRow {
        label: "symbolic residual vanishes across the family".to_owned(),
        passed: symbolic,
        detail: None,
    });

    let focusing = nls_hierarchy_equation_substituted(j, &SubstitutionRule::MinusConjugateQ)
        .map_err(usage)?;
    let member = extract_coefficients(&focusing).map_err(tool)?;
    rows.push(CheckRow {
        label: "focusing hierarchy member belongs to the family".to_owned(),
        passed: family.contains(&member),
        detail: None,
    });

    let grid = Grid::new(80.0, 2048).map_err(tool)?;
    let ansatz = AnsatzField::Soliton {
        j,
        carrier: 1.0,
        omega: 1.0,
    };
    let generic: Vec<GaussianRational> = (0..family.dimension())
        .map(|_| GaussianRational::from_int(-3))
        .collect();
    let members = [("hierarchy member", member), {
        ("generic member", family.at(&generic).map_err(tool)?)
    }];
    for (label, table) in members {
        let report = residual_report(&table, &ansatz, grid, 0.1).map_err(tool)?;
        let passed = report.relative <= 1e-8 && !report.boundary_warning;
        rows.push(CheckRow {
            label: format!("numeric residual ({label}) <= 1e-8"),
            passed,
            detail: (!passed).then(|| {
                format!(
                    "relative residual {:.3e}, boundary tail {:.3e}",
                    report.relative, report.boundary_tail
                )
            }),
        });
    }
    Ok(rows)
}

pub fn verify(args: &VerifyArgs) -> Result<(), CliError> {
    ensure_out_dir(&args.out_dir)?;
    let (scope_name, argv, rows) = match &args.scope {
        VerifyScope::Appendix => {
            let mut rows: Vec<CheckRow> = Vec::new();
            rows.extend(verify_reference_densities().into_iter().map(CheckRow::from));
            rows.extend(verify_reference_flows().into_iter().map(CheckRow::from));
            ("appendix", vec!["appendix".to_owned()], rows)
        }
        VerifyScope::Structure { max_n } => {
            let mut argv = vec!["structure".to_owned()];
            push_arg(&mut argv, "--max-n", max_n);
            let mut rows = Vec::new();
            for n in 1..=*max_n {
                let report = validate_y_structure(n);
                for check in report.checks {
                    rows.push(CheckRow {
                        label: format!("level {n}: {}", check.name),
                        passed: check.passed,
                        detail: check.counterexample,
                    });
                }
            }
            for j in 1..=4u32 {
                let equation =
                    nls_hierarchy_equation_substituted(j, &SubstitutionRule::ConjugateQ)
                        .map_err(tool)?;
                let table = extract_coefficients(&equation).map_err(tool)?;
                let ok = table.entries().iter().all(|entry| {
                    entry.alpha.len() == 2 * entry.k as usize + 1
                        && entry.alpha.iter().sum::<u32>() == 2 * (j - entry.k)
                });
                rows.push(CheckRow {
                    label: format!("equation j={j}: 2k+1 factors with |alpha| = 2(j-k)"),
                    passed: ok,
                    detail: None,
                });
            }
            ("structure", argv, rows)
        }
        VerifyScope::Soliton { j } => {
            let mut argv = vec!["soliton".to_owned()];
            push_arg(&mut argv, "--j", j);
            ("soliton", argv, soliton_checks(*j)?)
        }
    };

    let failed = rows.iter().filter(|r| !r.passed).count();
    for row in &rows {
        println!(
            "  {:<58} {}",
            row.label,
            if row.passed { "PASS" } else { "FAIL" }
        );
        if let Some(detail) = &row.detail {
            println!("      {detail}");
        }
    }
    println!("{} checks, {} failed", rows.len(), failed);

    let artifact = VerifyArtifact {
        scope: scope_name.to_owned(),
        passed: rows.len() - failed,
        failed,
        checks: rows,
    };
    let report_path = args.out_dir.join(format!("verify_{scope_name}.json"));
    write_json(&report_path, &artifact)?;
    let mut recorder = RunRecorder::new("verify", argv);
    recorder.output(&report_path);
    recorder.finish(&args.out_dir)?;

    if failed > 0 {
        return Err(CliError::Mismatch(format!(
            "{failed} of {} checks failed",
            artifact.passed + failed
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum IcKind {
    /// Traveling sech profile (carrier, scale from --omega)
    Soliton,
    /// Single-mode plane wave (integer --carrier, --amplitude, --s)
    PlaneWave,
    /// Band-limited random data with a Gaussian spectral envelope
    Random,
}

#[derive(Debug, clap::Args)]
#[command(group(ArgGroup::new("equation").required(true).multiple(false)))]
pub struct SimulateArgs {
    /// Coefficient-table JSON produced by generate
    #[arg(long, group = "equation")]
    pub table: Option<PathBuf>,
    /// Generate the hierarchy equation at this level instead
    #[arg(long, group = "equation")]
    pub j: Option<u32>,
    /// Integrate the plane-wave steady-state equation at this level
    #[arg(long, group = "equation")]
    pub torus: Option<u32>,
    /// Conjugation reduction used with --j (default: conj, the defocusing
    /// sign; a soliton follows the minus-conj equation)
    #[arg(long, value_enum)]
    pub substitute: Option<SubstituteMode>,
    #[arg(long, value_enum)]
    pub ic: IcKind,
    #[arg(long, default_value_t = 1.0)]
    pub carrier: f64,
    /// Soliton scale parameter
    #[arg(long, default_value_t = 1.0)]
    pub omega: f64,
    /// Plane-wave or random-data amplitude
    #[arg(long)]
    pub amplitude: Option<f64>,
    /// Regularity weight of the plane-wave normalization
    #[arg(long, default_value_t = 0.0)]
    pub s: f64,
    /// Seed for --ic random
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Band limit for --ic random
    #[arg(long, default_value_t = 6)]
    pub band: u32,
    #[arg(long)]
    pub length: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub t_final: Option<f64>,
    /// Record every k-th step (default: about sixteen snapshots)
    #[arg(long)]
    pub stride: Option<usize>,
    /// Conservation-law levels to monitor, comma separated (e.g. 1,3,5)
    #[arg(long, value_delimiter = ',')]
    pub conserved: Vec<u32>,
    /// Also write SVG plots (field modulus heatmap, drift curves)
    #[arg(long)]
    pub plot: bool,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Serialize)]
struct DriftSummary {
    level: u32,
    relative_drift: f64,
}

#[derive(Serialize)]
struct SimulateSummary {
    equation: String,
    j: u32,
    ic: String,
    length: f64,
    points: usize,
    dt: f64,
    t_final: f64,
    steps: u64,
    l2_initial: f64,
    l2_final: f64,
    /// Relative L2 distance from the initial condition's own closed-form
    /// evolution; absent for random data.
    #[serde(skip_serializing_if = "Option::is_none")]
    relative_l2_error_vs_closed_form: Option<f64>,
    drift: Vec<DriftSummary>,
}

fn random_smooth_state(
    grid: Grid,
    seed: u64,
    band: u32,
    amplitude: f64,
) -> Result<FieldState, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = TAU / grid.length();
    let modes: Vec<(f64, Complex64)> = (-(band as i64)..=band as i64)
        .map(|m| {
            let envelope = (-2.0 * (m as f64 / band as f64).powi(2)).exp();
            let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            (scale * m as f64, amplitude * envelope * c)
        })
        .collect();
    let values = grid
        .nodes()
        .iter()
        .map(|&x| {
            modes
                .iter()
                .map(|&(xi, c)| c * Complex64::from_polar(1.0, xi * x))
                .sum()
        })
        .collect();
    FieldState::new(grid, values, 0.0).map_err(usage)
}

pub fn simulate(args: &SimulateArgs, config: &Config) -> Result<(), CliError> {
    ensure_out_dir(&args.out_dir)?;
    let mut argv = Vec::new();

    let (table, equation_label) = if let Some(path) = &args.table {
        push_arg(&mut argv, "--table", path.display());
        let bytes = std::fs::read(path)
            .with_context(|| format!("reading {}", path.display()))
            .map_err(CliError::Tool)?;
        let table: CoefficientTable = serde_json::from_slice(&bytes)
            .with_context(|| format!("parsing coefficient table {}", path.display()))
            .map_err(|e| CliError::Usage(format!("{e:#}")))?;
        (table, path.display().to_string())
    } else if let Some(j) = args.torus {
        push_arg(&mut argv, "--torus", j);
        (torus_equation(j), format!("torus j={j}"))
    } else {
        let j = args.j.expect("clap group guarantees one equation source");
        push_arg(&mut argv, "--j", j);
        let (rule, label) = match args.substitute {
            None | Some(SubstituteMode::Conj) => {
                (SubstitutionRule::ConjugateQ, format!("hierarchy j={j}"))
            }
            Some(SubstituteMode::MinusConj) => (
                SubstitutionRule::MinusConjugateQ,
                format!("focusing hierarchy j={j}"),
            ),
        };
        if let Some(mode) = args.substitute {
            let value = match mode {
                SubstituteMode::Conj => "conj",
                SubstituteMode::MinusConj => "minus-conj",
            };
            push_arg(&mut argv, "--substitute", value);
        }
        let equation = nls_hierarchy_equation_substituted(j, &rule).map_err(usage)?;
        (extract_coefficients(&equation).map_err(tool)?, label)
    };
    let j = table.j();

    // Per-kind defaults, overridable by config file and flags.
    let (default_length, default_points, default_dt) = match args.ic {
        IcKind::Soliton => (80.0, 1024, 1e-4),
        IcKind::PlaneWave => (TAU, 16, 1e-3),
        IcKind::Random => (TAU, 256, 1e-4),
    };
    let sim_defaults = &config.simulate;
    let length = args.length.or(sim_defaults.length).unwrap_or(default_length);
    let points = args.points.or(sim_defaults.points).unwrap_or(default_points);
    let dt = args.dt.or(sim_defaults.dt).unwrap_or(default_dt);
    let t_final = args.t_final.or(sim_defaults.t_final).unwrap_or(0.1);
    let steps = (t_final / dt).round().max(1.0) as u64;
    let stride = args
        .stride
        .or(sim_defaults.stride)
        .unwrap_or_else(|| (steps as usize / 16).max(1));

    let grid = Grid::new(length, points).map_err(usage)?;
    let amplitude = args.amplitude.unwrap_or(match args.ic {
        IcKind::Random => 0.1,
        _ => 1.0,
    });

    let (ansatz, ic_label) = match args.ic {
        IcKind::Soliton => {
            push_arg(&mut argv, "--ic", "soliton");
            push_arg(&mut argv, "--carrier", args.carrier);
            push_arg(&mut argv, "--omega", args.omega);
            (
                Some(AnsatzField::Soliton {
                    j,
                    carrier: args.carrier,
                    omega: args.omega,
                }),
                "soliton".to_owned(),
            )
        }
        IcKind::PlaneWave => {
            push_arg(&mut argv, "--ic", "plane-wave");
            push_arg(&mut argv, "--carrier", args.carrier);
            push_arg(&mut argv, "--amplitude", amplitude);
            push_arg(&mut argv, "--s", args.s);
            let cycles = args.carrier * length / TAU;
            if (cycles - cycles.round()).abs() > 1e-9 {
                eprintln!(
                    "warning: carrier {} is not commensurate with the box (needs \
                     carrier * length / 2pi integral)",
                    args.carrier
                );
            }
            (
                Some(AnsatzField::PlaneWave {
                    j,
                    s: args.s,
                    carrier: args.carrier,
                    amplitude: Complex64::new(amplitude, 0.0),
                }),
                "plane-wave".to_owned(),
            )
        }
        IcKind::Random => {
            push_arg(&mut argv, "--ic", "random");
            push_arg(&mut argv, "--seed", args.seed);
            push_arg(&mut argv, "--band", args.band);
            push_arg(&mut argv, "--amplitude", amplitude);
            (None, "random".to_owned())
        }
    };
    push_arg(&mut argv, "--length", length);
    push_arg(&mut argv, "--points", points);
    push_arg(&mut argv, "--dt", dt);
    push_arg(&mut argv, "--t-final", t_final);
    push_arg(&mut argv, "--stride", stride);
    if !args.conserved.is_empty() {
        let list: Vec<String> = args.conserved.iter().map(u32::to_string).collect();
        push_arg(&mut argv, "--conserved", list.join(","));
    }
    if args.plot {
        argv.push("--plot".to_owned());
    }

    let u0 = match &ansatz {
        Some(field) => FieldState::sample(grid, field, 0.0).map_err(usage)?,
        None => random_smooth_state(grid, args.seed, args.band, amplitude)?,
    };

    let mut sim = SimConfig::new(dt, t_final);
    sim.dealias_pad = required_pad(&table);
    sim.snapshot_stride = stride;
    let trajectory = integrate_checked(&table, &u0, &sim)?;

    let mut recorder = RunRecorder::new("simulate", argv);
    if let Some(path) = &args.table {
        recorder.input(path);
    }

    // Snapshot table.
    let nodes = grid.nodes();
    let mut rows = Vec::new();
    for (index, state) in trajectory.snapshots().iter().enumerate() {
        for (node, value) in nodes.iter().zip(state.values()) {
            rows.push(vec![
                index.to_string(),
                float_cell(state.time()),
                float_cell(*node),
                float_cell(value.re),
                float_cell(value.im),
            ]);
        }
    }
    let snapshot_path = args.out_dir.join("snapshots.csv");
    write_csv(
        &snapshot_path,
        &["snapshot", "time", "x", "re", "im"],
        &rows,
    )?;
    recorder.output(&snapshot_path);

    // Conserved-quantity drift.
    let mut drift_rows = Vec::new();
    let drift = if args.conserved.is_empty() {
        None
    } else {
        let densities: Vec<DiffPolynomial> = args
            .conserved
            .iter()
            .map(|&n| {
                conserved_density(n)
                    .substitute(&SubstitutionRule::ConjugateQ)
                    .map_err(tool)
            })
            .collect::<Result<_, _>>()?;
        let drift = nls_hierarchy::conserved_scan(&densities, &trajectory).map_err(usage)?;
        let mut header = vec!["time".to_owned()];
        for level in &args.conserved {
            header.push(format!("I{level}_re"));
            header.push(format!("I{level}_im"));
        }
        for (row_index, time) in drift.times.iter().enumerate() {
            let mut row = vec![float_cell(*time)];
            for series in &drift.series {
                row.push(float_cell(series.values[row_index].re));
                row.push(float_cell(series.values[row_index].im));
            }
            drift_rows.push(row);
        }
        let drift_path = args.out_dir.join("drift.csv");
        let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
        write_csv(&drift_path, &header_refs, &drift_rows)?;
        recorder.output(&drift_path);
        Some(drift)
    };

    // Summary.
    let final_state = trajectory.final_state();
    let error = match &ansatz {
        Some(field) => {
            let exact = FieldState::sample(grid, field, t_final).map_err(tool)?;
            let scale = exact.l2_norm().max(f64::MIN_POSITIVE);
            Some(final_state.l2_distance(&exact) / scale)
        }
        None => None,
    };
    let summary = SimulateSummary {
        equation: equation_label,
        j,
        ic: ic_label,
        length,
        points,
        dt,
        t_final,
        steps,
        l2_initial: u0.l2_norm(),
        l2_final: final_state.l2_norm(),
        relative_l2_error_vs_closed_form: error,
        drift: args
            .conserved
            .iter()
            .zip(drift.iter().flat_map(|d| &d.series))
            .map(|(&level, series)| DriftSummary {
                level,
                relative_drift: series.relative_drift,
            })
            .collect(),
    };
    let summary_path = args.out_dir.join("summary.json");
    write_json(&summary_path, &summary)?;
    recorder.output(&summary_path);

    if args.plot {
        let moduli: Vec<Vec<f64>> = trajectory
            .snapshots()
            .iter()
            .map(|s| s.values().iter().map(|v| v.norm()).collect())
            .collect();
        let field_path = args.out_dir.join("field.svg");
        plot::heatmap(&field_path, (0.0, length), (0.0, t_final), &moduli)?;
        recorder.output(&field_path);
        if let Some(drift) = &drift {
            let series: Vec<(String, Vec<f64>)> = args
                .conserved
                .iter()
                .zip(&drift.series)
                .map(|(&level, series)| {
                    let base = series.values[0];
                    let floor = base.norm().max(f64::MIN_POSITIVE);
                    let curve = series
                        .values
                        .iter()
                        .map(|v| ((v - base).norm() / floor).max(1e-18).log10())
                        .collect();
                    (format!("I{level}"), curve)
                })
                .collect();
            let drift_path = args.out_dir.join("drift.svg");
            plot::curves(&drift_path, &drift.times, &series, "log10 drift")?;
            recorder.output(&drift_path);
        }
    }

    recorder.finish(&args.out_dir)?;

    println!(
        "integrated {steps} steps to t = {t_final}; L2 {:.6e} -> {:.6e}",
        summary.l2_initial, summary.l2_final
    );
    if let Some(error) = error {
        println!("relative L2 error vs closed form: {error:.6e}");
    }
    for entry in &summary.drift {
        println!(
            "I_{} relative drift: {:.6e}",
            entry.level, entry.relative_drift
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// illposed
// ---------------------------------------------------------------------------

#[derive(Debug, clap::Args)]
pub struct IllposedArgs {
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    #[command(subcommand)]
    pub kind: IllposedKind,
}

fn parse_index_range(text: &str) -> Result<(u32, u32), String> {
    let parse = |s: &str| {
        s.parse::<u32>()
            .map_err(|_| format!("invalid index '{s}' in range"))
    };
    if let Some((lo, hi)) = text.split_once("..") {
        let (lo, hi) = (parse(lo)?, parse(hi)?);
        if lo == 0 || hi < lo {
            return Err(format!("range '{text}' must be nonempty with 1-based indices"));
        }
        Ok((lo, hi))
    } else {
        let k = parse(text)?;
        if k == 0 {
            return Err("indices are 1-based".to_owned());
        }
        Ok((k, k))
    }
}

#[derive(Debug, clap::Subcommand)]
pub enum IllposedKind {
    /// Separation of nearby plane waves below the critical regularity
    TorusPlaneWave {
        #[arg(long, default_value_t = 2)]
        j: u32,
        /// Sobolev index of the measuring norm
        #[arg(long, default_value_t = 0.0)]
        s: f64,
        /// Family indices, e.g. 4 or 1..8 (inclusive)
        #[arg(long, default_value = "1..8", value_parser = parse_index_range)]
        n: (u32, u32),
        #[arg(long, default_value_t = 1.0)]
        carrier: f64,
        /// Also integrate both waves and tabulate the measured separation
        #[arg(long)]
        simulate: bool,
        #[arg(long, default_value_t = 16)]
        points: usize,
        /// Target step size for the simulated column
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
    },
    /// Growth of the resonant quadratic symbol along the three
    /// constellations that obstruct smooth data-to-solution maps
    C3Symbol {
        #[arg(long, default_value_t = 1024)]
        max_carrier: i64,
        #[arg(long, default_value_t = 1)]
        base: i64,
    },
}

fn simulated_separation(
    j: u32,
    s: f64,
    index: u32,
    carrier: f64,
    points: usize,
    dt_target: f64,
) -> Result<f64, CliError> {
    let table = torus_equation(j);
    let grid = Grid::new(TAU, points).map_err(usage)?;
    let row = illposedness_separation(j, s, index, carrier);
    let steps = (row.t_n / dt_target).ceil().max(1.0);
    let mut sim = SimConfig::new(row.t_n / steps, row.t_n);
    sim.dealias_pad = required_pad(&table);
    sim.snapshot_stride = steps as usize;

    let (first, second) = separation_pair(j, s, index, carrier);
    let mut finals = Vec::new();
    for wave in [first, second] {
        let u0 = FieldState::sample(grid, &wave, 0.0).map_err(usage)?;
        finals.push(integrate_checked(&table, &u0, &sim)?.final_state().clone());
    }
    let difference: Vec<Complex64> = finals[0]
        .values()
        .iter()
        .zip(finals[1].values())
        .map(|(a, b)| a - b)
        .collect();
    let diff_state = FieldState::new(grid, difference, row.t_n).map_err(tool)?;
    Ok(norm(&diff_state, &NormSpec::Sobolev { s }))
}

pub fn illposed(args: &IllposedArgs) -> Result<(), CliError> {
    ensure_out_dir(&args.out_dir)?;
    match &args.kind {
        IllposedKind::TorusPlaneWave {
            j,
            s,
            n,
            carrier,
            simulate,
            points,
            dt,
        } => {
            let mut argv = vec!["torus-plane-wave".to_owned()];
            push_arg(&mut argv, "--j", j);
            push_arg(&mut argv, "--s", s);
            push_arg(&mut argv, "--n", format!("{}..{}", n.0, n.1));
            push_arg(&mut argv, "--carrier", carrier);
            if *simulate {
                argv.push("--simulate".to_owned());
                push_arg(&mut argv, "--points", points);
                push_arg(&mut argv, "--dt", dt);
            }

            let mut header = vec!["n", "t_n", "norm_at_0", "norm_at_tn"];
            if *simulate {
                header.push("simulated_norm_at_tn");
                header.push("abs_error");
            }
            let mut rows = Vec::new();
            let mut worst_error = 0.0f64;
            for index in n.0..=n.1 {
                let row = illposedness_separation(*j, *s, index, *carrier);
                let mut cells = vec![
                    index.to_string(),
                    float_cell(row.t_n),
                    float_cell(row.norm_at_0),
                    float_cell(row.norm_at_tn),
                ];
                if *simulate {
                    let measured =
                        simulated_separation(*j, *s, index, *carrier, *points, *dt)?;
                    let error = (measured - row.norm_at_tn).abs();
                    worst_error = worst_error.max(error);
                    cells.push(float_cell(measured));
                    cells.push(float_cell(error));
                }
                rows.push(cells);
            }
            let csv_path = args.out_dir.join(format!("separation_j{j}.csv"));
            write_csv(&csv_path, &header, &rows)?;

            println!(
                "wrote {} rows of plane-wave separation data to {}",
                rows.len(),
                csv_path.display()
            );
            if *simulate {
                println!("largest |analytic - simulated| separation: {worst_error:.3e}");
            }
            let mut recorder = RunRecorder::new("illposed", argv);
            recorder.output(&csv_path);
            recorder.finish(&args.out_dir)?;
        }
        IllposedKind::C3Symbol { max_carrier, base } => {
            let mut argv = vec!["c3-symbol".to_owned()];
            push_arg(&mut argv, "--max-carrier", max_carrier);
            push_arg(&mut argv, "--base", base);
            if *base < 1 || *max_carrier < *base {
                return Err(CliError::Usage(
                    "need 1 <= base <= max-carrier".to_owned(),
                ));
            }

            let mut rows = Vec::new();
            let mut carrier = *base * 2;
            while carrier <= *max_carrier {
                for constellation in resonant_constellations(carrier, *base) {
                    let (k1, k2, k3) = constellation.frequencies;
                    rows.push(vec![
                        carrier.to_string(),
                        k1.to_string(),
                        k2.to_string(),
                        k3.to_string(),
                        constellation.resonance.to_string(),
                        constellation.symbol.to_string(),
                    ]);
                }
                carrier *= 2;
            }
            let csv_path = args.out_dir.join("c3_symbol.csv");
            write_csv(
                &csv_path,
                &["carrier", "k1", "k2", "k3", "resonance", "n3"],
                &rows,
            )?;
            println!(
                "wrote {} resonant constellations to {}",
                rows.len(),
                csv_path.display()
            );
            let mut recorder = RunRecorder::new("illposed", argv);
            recorder.output(&csv_path);
            recorder.finish(&args.out_dir)?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// probe
// ---------------------------------------------------------------------------

#[derive(Debug, clap::Args)]
pub struct ProbeArgs {
    /// bilinear-L2 | fefferman-stein-diag | trilinear-L2
    #[arg(value_parser = EstimateId::from_str)]
    pub estimate: EstimateId,
    #[arg(long)]
    pub j: u32,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Base band limit (default: a per-level choice)
    #[arg(long)]
    pub band: Option<u32>,
    #[arg(long)]
    pub window_cycles: Option<f64>,
    #[arg(long)]
    pub time_samples: Option<usize>,
    /// Dilation sweep, comma separated
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<u32>>,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

pub fn probe(args: &ProbeArgs, config: &Config) -> Result<(), CliError> {
    ensure_out_dir(&args.out_dir)?;
    let defaults = ProbeConfig::default();
    let probe_defaults = &config.probe;
    let cfg = ProbeConfig {
        band: args.band.or(probe_defaults.band),
        window_cycles: args
            .window_cycles
            .or(probe_defaults.window_cycles)
            .unwrap_or(defaults.window_cycles),
        time_samples: args
            .time_samples
            .or(probe_defaults.time_samples)
            .unwrap_or(defaults.time_samples),
        lambdas: args
            .lambdas
            .clone()
            .or_else(|| probe_defaults.lambdas.clone())
            .unwrap_or(defaults.lambdas),
    };
    if cfg.lambdas.is_empty() {
        return Err(CliError::Usage("the dilation sweep must be nonempty".into()));
    }
    let samples = args.samples.or(probe_defaults.samples).unwrap_or(100);
    if samples == 0 || args.j == 0 {
        return Err(CliError::Usage(
            "need at least one sample and a positive level".into(),
        ));
    }

    let mut argv = vec![args.estimate.to_string()];
    push_arg(&mut argv, "--j", args.j);
    push_arg(&mut argv, "--samples", samples);
    push_arg(&mut argv, "--seed", args.seed);
    if let Some(band) = cfg.band {
        push_arg(&mut argv, "--band", band);
    }
    push_arg(&mut argv, "--window-cycles", cfg.window_cycles);
    push_arg(&mut argv, "--time-samples", cfg.time_samples);
    let lambda_list: Vec<String> = cfg.lambdas.iter().map(u32::to_string).collect();
    push_arg(&mut argv, "--lambdas", lambda_list.join(","));

    let report = probe_estimate_with(args.estimate, args.j, samples, args.seed, &cfg);
    let first = report.lambda_sweep.first().expect("nonempty sweep");
    let last = report.lambda_sweep.last().expect("nonempty sweep");
    let sweep_factor = if first.max_ratio > 0.0 {
        last.max_ratio / first.max_ratio
    } else {
        1.0
    };
    let verdict = if sweep_factor <= 2.0 { "bounded" } else { "growth" };

    let mut artifact = serde_json::to_value(&report)
        .context("encoding probe report")
        .map_err(CliError::Tool)?;
    let object = artifact.as_object_mut().expect("report is an object");
    object.insert("sweep_factor".to_owned(), sweep_factor.into());
    object.insert("sweep_verdict".to_owned(), verdict.into());

    let report_path = args
        .out_dir
        .join(format!("probe_{}_j{}.json", report.estimate, report.j));
    write_json(&report_path, &artifact)?;

    println!(
        "{} j={} samples={} seed={}",
        report.estimate, report.j, report.samples, args.seed
    );
    println!(
        "max ratio {:.6} (seed {})  median {:.6}  window bias {:.3}",
        report.max_ratio, report.worst_case_seed, report.median_ratio, report.window_bias
    );
    let sweep: Vec<String> = report
        .lambda_sweep
        .iter()
        .map(|p| format!("lambda={} -> {:.6}", p.lambda, p.max_ratio))
        .collect();
    println!("sweep: {}", sweep.join(", "));
    println!(
        "verdict: {verdict} (max ratio at lambda={} is {:.3}x the lambda={} value)",
        last.lambda, sweep_factor, first.lambda
    );

    let mut recorder = RunRecorder::new("probe", argv);
    recorder.output(&report_path);
    recorder.finish(&args.out_dir)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// rerun
// ---------------------------------------------------------------------------

#[derive(Debug, clap::Args)]
pub struct RerunArgs {
    /// Manifest written by a previous run
    #[arg(long)]
    pub manifest: PathBuf,
    /// Where to re-execute (default: the manifest's directory)
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Re-execute into a scratch directory and only compare digests
    #[arg(long)]
    pub check: bool,
}

pub fn rerun(
    args: &RerunArgs,
    dispatch: impl Fn(crate::Command) -> Result<(), CliError>,
) -> Result<(), CliError> {
    let recorded = load_manifest(&args.manifest).map_err(CliError::Tool)?;
    if recorded.command == "rerun" {
        return Err(CliError::Usage(
            "manifests of rerun itself cannot be re-executed".to_owned(),
        ));
    }

    for input in &recorded.inputs {
        let current = sha256_hex(Path::new(&input.path)).map_err(CliError::Tool)?;
        if current != input.sha256 {
            return Err(CliError::Mismatch(format!(
                "input {} changed since the recorded run",
                input.path
            )));
        }
    }

    let scratch;
    let out_dir = if args.check {
        scratch = tempfile::tempdir()
            .context("creating scratch directory")
            .map_err(CliError::Tool)?;
        scratch.path().to_owned()
    } else {
        args.out_dir.clone().unwrap_or_else(|| {
            args.manifest
                .parent()
                .unwrap_or(Path::new("."))
                .to_owned()
        })
    };

    let mut full = vec!["nlsh".to_owned(), recorded.command.clone()];
    full.extend(recorded.argv.iter().cloned());
    full.push("--out-dir".to_owned());
    full.push(out_dir.display().to_string());
    let cli = <crate::Cli as clap::Parser>::try_parse_from(&full)
        .map_err(|err| CliError::Usage(format!("recorded argv does not parse: {err}")))?;
    dispatch(cli.command)?;

    let mut mismatched = Vec::new();
    for output in &recorded.outputs {
        let produced = out_dir.join(&output.path);
        match sha256_hex(&produced) {
            Ok(digest) if digest == output.sha256 => {
                println!("  {:<40} identical", output.path);
            }
            Ok(_) => {
                println!("  {:<40} DIFFERS", output.path);
                mismatched.push(output.path.clone());
            }
            Err(err) => {
                println!("  {:<40} MISSING ({err})", output.path);
                mismatched.push(output.path.clone());
            }
        }
    }
    if mismatched.is_empty() {
        println!(
            "rerun of '{}' reproduced {} output file(s) byte-identically",
            recorded.command,
            recorded.outputs.len()
        );
        Ok(())
    } else {
        Err(CliError::Mismatch(format!(
            "{} of {} outputs differ after rerun: {}",
            mismatched.len(),
            recorded.outputs.len(),
            mismatched.join(", ")
        )))
    }
}
