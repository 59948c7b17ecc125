//! Scenario file schema (JSON, version 1) and its validation.
//!
//! Top level:
//! ```json
//! {
//!   "schema_version": 1,
//!   "kind": "tasaki",
//!   "parameters": { ... },
//!   "f_families": [{"kind": "log", "parameter": 1.0}],
//!   "merge_tol": 1e-9,
//!   "seed": 7
//! }
//! ```
//! Complex numbers are `[re, im]` pairs; matrices are nested row-major
//! arrays. Unknown fields are rejected everywhere; unknown kinds name the
//! offending value.

use std::path::Path;

use nalgebra::{Complex, DMatrix};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::Value;

use retrodiction::fluctuation::FFamily;

use crate::error::{io_err, CliError, CliResult};

pub const SCHEMA_VERSION: u64 = 1;
/// Hilbert-space cap keeping eigendecompositions cheap.
pub const MAX_QUANTUM_DIM: usize = 64;
/// Classical alphabet cap.
pub const MAX_CLASSICAL_DIM: usize = 4096;

/// `[re, im]`.
#[derive(Debug, Clone, Copy, Deserialize)]
pub struct Cpx(pub f64, pub f64);

pub type ComplexMatrixSpec = Vec<Vec<Cpx>>;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub kind: String,
    pub parameter: f64,
}

impl FamilySpec {
    pub fn to_family(&self) -> CliResult<FFamily<f64>> {
        let build = match self.kind.as_str() {
            "log" => FFamily::log(self.parameter),
            "power" => FFamily::power(self.parameter),
            "exp" => FFamily::exp(self.parameter),
            other => {
                return Err(CliError::Schema {
                    message: format!(
                        "f_families: unknown kind `{other}` (expected log, power or exp)"
                    ),
                })
            }
        };
        build.map_err(CliError::Core)
    }

    /// Parse the canonical display label written into reports,
    /// e.g. `log(z=0.5)`.
    pub fn from_label(label: &str) -> CliResult<FFamily<f64>> {
        let bad = || CliError::Schema {
            message: format!("unparseable family label `{label}`"),
        };
        let open = label.find('(').ok_or_else(bad)?;
        let close = label.rfind(')').ok_or_else(bad)?;
        let kind = &label[..open];
        let inner = &label[open + 1..close];
        let eq = inner.find('=').ok_or_else(bad)?;
        let parameter: f64 = inner[eq + 1..].parse().map_err(|_| bad())?;
        FamilySpec {
            kind: kind.to_string(),
            parameter,
        }
        .to_family()
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TasakiParams {
    pub eps: Vec<f64>,
    pub eta: Vec<f64>,
    pub beta: f64,
    #[serde(default)]
    pub unitary: Option<ComplexMatrixSpec>,
    #[serde(default)]
    pub haar_seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub enum PriorsSpec {
    Thermal {
        energies: Vec<f64>,
        beta: f64,
    },
    Microcanonical {
        initial_energies: Vec<f64>,
        final_energies: Vec<f64>,
        initial_shell: f64,
        final_shell: f64,
    },
}

#[derive(Debug, Clone)]
pub struct DeterministicHamiltonianParams {
    pub permutation: Vec<usize>,
    pub priors: PriorsSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Jarz2000Params {
    pub system_size: usize,
    pub permutation: Vec<usize>,
    pub reservoir_energies: Vec<f64>,
    pub beta: f64,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

#[derive(Debug, Clone)]
pub enum RelaxationSpec {
    LambdaThermalization { lambda: f64 },
    Matrix { rows: Vec<Vec<f64>> },
}

#[derive(Debug, Clone)]
pub struct CrooksParams {
    pub pre_energies: Vec<f64>,
    pub post_energies: Vec<f64>,
    pub beta: f64,
    pub relaxation: RelaxationSpec,
}

#[derive(Debug, Clone)]
pub enum ChannelSpec {
    Kraus { operators: Vec<ComplexMatrixSpec> },
    HaarUnitary { seed: u64 },
    Depolarizing { strength: f64 },
    /// Amplitude damping toward the thermal state of the scenario's level
    /// pair at the scenario's β.
    ThermalAmplitudeDamping { eta: f64 },
    GeneralizedAmplitudeDamping { eta: f64, ground_population: f64 },
}

#[derive(Debug, Clone)]
pub struct TwoMeasurementParams {
    pub eps: Vec<f64>,
    pub eta: Vec<f64>,
    pub beta: f64,
    pub channel: ChannelSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomClassicalParams {
    pub dimension: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomQuantumParams {
    pub dimension: usize,
    #[serde(default = "default_kraus_rank")]
    pub kraus_rank: usize,
}

fn default_kraus_rank() -> usize {
    2
}

#[derive(Debug, Clone)]
pub enum ScenarioSpec {
    Tasaki(TasakiParams),
    DeterministicHamiltonian(DeterministicHamiltonianParams),
    Jarz2000(Jarz2000Params),
    CrooksWorkRelaxation(CrooksParams),
    GeneralTwoMeasurement(TwoMeasurementParams),
    RandomClassical(RandomClassicalParams),
    RandomQuantum(RandomQuantumParams),
}

impl ScenarioSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ScenarioSpec::Tasaki(_) => "tasaki",
            ScenarioSpec::DeterministicHamiltonian(_) => "deterministic_hamiltonian",
            ScenarioSpec::Jarz2000(_) => "jarz2000",
            ScenarioSpec::CrooksWorkRelaxation(_) => "crooks_work_relaxation",
            ScenarioSpec::GeneralTwoMeasurement(_) => "general_two_measurement",
            ScenarioSpec::RandomClassical(_) => "random_classical",
            ScenarioSpec::RandomQuantum(_) => "random_quantum",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioFile {
    pub schema_version: u64,
    pub spec: ScenarioSpec,
    pub f_families: Vec<FamilySpec>,
    pub merge_tol: Option<f64>,
    pub seed: Option<u64>,
}

/// Top-level shape used only to reject unknown fields before dispatching on
/// `kind`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    #[allow(dead_code)]
    schema_version: u64,
    kind: String,
    parameters: Value,
    f_families: Vec<FamilySpec>,
    #[serde(default)]
    merge_tol: Option<f64>,
    #[serde(default)]
    seed: Option<u64>,
}

pub fn parse_scenario_file(path: &Path) -> CliResult<ScenarioFile> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_scenario_str(&text)
}

pub fn parse_scenario_str(text: &str) -> CliResult<ScenarioFile> {
    let value: Value = serde_json::from_str(text).map_err(|e| CliError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let version = value
        .get("schema_version")
        .and_then(Value::as_i64)
        .ok_or_else(|| CliError::Schema {
            message: "missing or non-integer schema_version".into(),
        })?;
    if version != SCHEMA_VERSION as i64 {
        return Err(CliError::Version { found: version });
    }
    let raw: RawFile = from_value(value, "scenario file")?;
    let spec = parse_spec(&raw.kind, raw.parameters)?;
    let file = ScenarioFile {
        schema_version: SCHEMA_VERSION,
        spec,
        f_families: raw.f_families,
        merge_tol: raw.merge_tol,
        seed: raw.seed,
    };
    validate(&file)?;
    Ok(file)
}

fn from_value<T: DeserializeOwned>(value: Value, context: &str) -> CliResult<T> {
    serde_json::from_value(value).map_err(|e| CliError::Schema {
        message: format!("{context}: {e}"),
    })
}

/// Pull a `"type"` discriminator out of an object, leaving the payload.
fn take_type(value: Value, context: &str) -> CliResult<(String, Value)> {
    let mut object = match value {
        Value::Object(map) => map,
        other => {
            return Err(CliError::Schema {
                message: format!("{context}: expected an object, found {other}"),
            })
        }
    };
    let tag = object
        .remove("type")
        .and_then(|v| v.as_str().map(str::to_string))
        .ok_or_else(|| CliError::Schema {
            message: format!("{context}: missing string field `type`"),
        })?;
    Ok((tag, Value::Object(object)))
}

fn parse_spec(kind: &str, parameters: Value) -> CliResult<ScenarioSpec> {
    match kind {
        "tasaki" => Ok(ScenarioSpec::Tasaki(from_value(
            parameters,
            "tasaki parameters",
        )?)),
        "deterministic_hamiltonian" => {
            #[derive(Deserialize)]
            #[serde(deny_unknown_fields)]
            struct Outer {
                permutation: Vec<usize>,
                priors: Value,
            }
            let outer: Outer = from_value(parameters, "deterministic_hamiltonian parameters")?;
            let (tag, payload) = take_type(outer.priors, "priors")?;
            let priors = match tag.as_str() {
                "thermal" => {
                    #[derive(Deserialize)]
                    #[serde(deny_unknown_fields)]
                    struct P {
                        energies: Vec<f64>,
                        beta: f64,
                    }
                    let p: P = from_value(payload, "thermal priors")?;
                    PriorsSpec::Thermal {
                        energies: p.energies,
                        beta: p.beta,
                    }
                }
                "microcanonical" => {
                    #[derive(Deserialize)]
                    #[serde(deny_unknown_fields)]
                    struct P {
                        initial_energies: Vec<f64>,
                        final_energies: Vec<f64>,
                        initial_shell: f64,
                        final_shell: f64,
                    }
                    let p: P = from_value(payload, "microcanonical priors")?;
                    PriorsSpec::Microcanonical {
                        initial_energies: p.initial_energies,
                        final_energies: p.final_energies,
                        initial_shell: p.initial_shell,
                        final_shell: p.final_shell,
                    }
                }
                other => {
                    return Err(CliError::Schema {
                        message: format!("priors: unknown type `{other}`"),
                    })
                }
            };
            Ok(ScenarioSpec::DeterministicHamiltonian(
                DeterministicHamiltonianParams {
                    permutation: outer.permutation,
                    priors,
                },
            ))
        }
        "jarz2000" => Ok(ScenarioSpec::Jarz2000(from_value(
            parameters,
            "jarz2000 parameters",
        )?)),
        "crooks_work_relaxation" => {
            #[derive(Deserialize)]
            #[serde(deny_unknown_fields)]
            struct Outer {
                pre_energies: Vec<f64>,
                post_energies: Vec<f64>,
                beta: f64,
                relaxation: Value,
            }
            let outer: Outer = from_value(parameters, "crooks_work_relaxation parameters")?;
            let (tag, payload) = take_type(outer.relaxation, "relaxation")?;
            let relaxation = match tag.as_str() {
                "lambda_thermalization" => {
                    #[derive(Deserialize)]
                    #[serde(deny_unknown_fields)]
                    struct P {
                        lambda: f64,
                    }
                    let p: P = from_value(payload, "lambda_thermalization")?;
                    RelaxationSpec::LambdaThermalization { lambda: p.lambda }
                }
                "matrix" => {
                    #[derive(Deserialize)]
                    #[serde(deny_unknown_fields)]
                    struct P {
                        rows: Vec<Vec<f64>>,
                    }
                    let p: P = from_value(payload, "relaxation matrix")?;
                    RelaxationSpec::Matrix { rows: p.rows }
                }
                other => {
                    return Err(CliError::Schema {
                        message: format!("relaxation: unknown type `{other}`"),
                    })
                }
            };
            Ok(ScenarioSpec::CrooksWorkRelaxation(CrooksParams {
                pre_energies: outer.pre_energies,
                post_energies: outer.post_energies,
                beta: outer.beta,
                relaxation,
            }))
        }
        "general_two_measurement" => {
            #[derive(Deserialize)]
            #[serde(deny_unknown_fields)]
            struct Outer {
                eps: Vec<f64>,
                eta: Vec<f64>,
                beta: f64,
                channel: Value,
            }
            let outer: Outer = from_value(parameters, "general_two_measurement parameters")?;
            let (tag, payload) = take_type(outer.channel, "channel")?;
            let channel = match tag.as_str() {
                "kraus" => {
                    #[derive(Deserialize)]
                    #[serde(deny_unknown_fields)]
                    struct P {
                        operators: Vec<ComplexMatrixSpec>,
                    }
                    let p: P = from_value(payload, "kraus channel")?;
                    ChannelSpec::Kraus {
                        operators: p.operators,
                    }
                }
                "haar_unitary" => {
                    #[derive(Deserialize)]
                    #[serde(deny_unknown_fields)]
                    struct P {
                        seed: u64,
                    }
                    let p: P = from_value(payload, "haar_unitary channel")?;
                    ChannelSpec::HaarUnitary { seed: p.seed }
                }
                "depolarizing" => {
                    #[derive(Deserialize)]
                    #[serde(deny_unknown_fields)]
                    struct P {
                        strength: f64,
                    }
                    let p: P = from_value(payload, "depolarizing channel")?;
                    ChannelSpec::Depolarizing {
                        strength: p.strength,
                    }
                }
                "thermal_amplitude_damping" => {
                    #[derive(Deserialize)]
                    #[serde(deny_unknown_fields)]
                    struct P {
                        eta: f64,
                    }
                    let p: P = from_value(payload, "thermal_amplitude_damping channel")?;
                    ChannelSpec::ThermalAmplitudeDamping { eta: p.eta }
                }
                "generalized_amplitude_damping" => {
                    #[derive(Deserialize)]
                    #[serde(deny_unknown_fields)]
                    struct P {
                        eta: f64,
                        ground_population: f64,
                    }
                    let p: P = from_value(payload, "generalized_amplitude_damping channel")?;
                    ChannelSpec::GeneralizedAmplitudeDamping {
                        eta: p.eta,
                        ground_population: p.ground_population,
                    }
                }
                other => {
                    return Err(CliError::Schema {
                        message: format!("channel: unknown type `{other}`"),
                    })
                }
            };
            Ok(ScenarioSpec::GeneralTwoMeasurement(TwoMeasurementParams {
                eps: outer.eps,
                eta: outer.eta,
                beta: outer.beta,
                channel,
            }))
        }
        "random_classical" => Ok(ScenarioSpec::RandomClassical(from_value(
            parameters,
            "random_classical parameters",
        )?)),
        "random_quantum" => Ok(ScenarioSpec::RandomQuantum(from_value(
            parameters,
            "random_quantum parameters",
        )?)),
        other => Err(CliError::Schema {
            message: format!("unknown scenario kind `{other}`"),
        }),
    }
}

fn check_stochastic_rows(rows: &[Vec<f64>], what: &str) -> CliResult<()> {
    let width = rows.first().map(Vec::len).unwrap_or(0);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != width {
            return Err(CliError::Schema {
                message: format!("{what}: row {i} has {} entries, expected {width}", row.len()),
            });
        }
        if let Some(v) = row.iter().find(|&&v| v < 0.0) {
            return Err(CliError::Schema {
                message: format!("{what}: row {i} contains negative entry {v}"),
            });
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(CliError::Schema {
                message: format!("{what}: row {i} sums to {sum:.17}, not 1"),
            });
        }
    }
    Ok(())
}

fn check_permutation(perm: &[usize], what: &str) -> CliResult<()> {
    let n = perm.len();
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || seen[p] {
            return Err(CliError::Schema {
                message: format!("{what}: not a permutation of 0..{n}"),
            });
        }
        seen[p] = true;
    }
    Ok(())
}

fn check_positive(value: f64, what: &str) -> CliResult<()> {
    if value <= 0.0 || value.is_nan() || !value.is_finite() {
        return Err(CliError::Schema {
            message: format!("{what} must be a positive finite number, got {value}"),
        });
    }
    Ok(())
}

fn validate(file: &ScenarioFile) -> CliResult<()> {
    if file.f_families.is_empty() {
        return Err(CliError::Schema {
            message: "f_families must list at least one family".into(),
        });
    }
    for family in &file.f_families {
        family.to_family()?;
    }
    if let Some(tol) = file.merge_tol {
        check_positive(tol, "merge_tol")?;
    }
    match &file.spec {
        ScenarioSpec::Tasaki(p) => {
            check_positive(p.beta, "beta")?;
            if p.eps.is_empty() || p.eps.len() != p.eta.len() {
                return Err(CliError::Schema {
                    message: "eps and eta must be nonempty lists of equal length".into(),
                });
            }
            if p.eps.len() > MAX_QUANTUM_DIM {
                return Err(CliError::Schema {
                    message: format!("dimension exceeds cap {MAX_QUANTUM_DIM}"),
                });
            }
            match (&p.unitary, p.haar_seed) {
                (Some(u), None) => {
                    if u.len() != p.eps.len() || u.iter().any(|r| r.len() != p.eps.len()) {
                        return Err(CliError::Schema {
                            message: "unitary must be a square matrix matching eps".into(),
                        });
                    }
                }
                (None, Some(_)) => {}
                _ => {
                    return Err(CliError::Schema {
                        message: "exactly one of `unitary` or `haar_seed` is required".into(),
                    })
                }
            }
        }
        ScenarioSpec::DeterministicHamiltonian(p) => {
            check_permutation(&p.permutation, "permutation")?;
            let n = p.permutation.len();
            match &p.priors {
                PriorsSpec::Thermal { energies, beta } => {
                    check_positive(*beta, "beta")?;
                    if energies.len() != n {
                        return Err(CliError::Schema {
                            message: format!("{} energies for {} states", energies.len(), n),
                        });
                    }
                }
                PriorsSpec::Microcanonical {
                    initial_energies,
                    final_energies,
                    ..
                } => {
                    if initial_energies.len() != n || final_energies.len() != n {
                        return Err(CliError::Schema {
                            message: "shell energy lists must match the permutation length"
                                .into(),
                        });
                    }
                }
            }
        }
        ScenarioSpec::Jarz2000(p) => {
            check_positive(p.beta, "beta")?;
            check_permutation(&p.permutation, "permutation")?;
            if p.system_size == 0 || p.reservoir_energies.is_empty() {
                return Err(CliError::Schema {
                    message: "system_size and reservoir_energies must be nonempty".into(),
                });
            }
            if p.permutation.len() != p.system_size * p.reservoir_energies.len() {
                return Err(CliError::Schema {
                    message: "permutation must act on system_size * |reservoir| pairs".into(),
                });
            }
            check_stochastic_rows(std::slice::from_ref(&p.p), "system prior p")?;
            check_stochastic_rows(std::slice::from_ref(&p.q), "system prior q")?;
            if p.p.len() != p.system_size || p.q.len() != p.system_size {
                return Err(CliError::Schema {
                    message: "p and q must live on the system alphabet".into(),
                });
            }
        }
        ScenarioSpec::CrooksWorkRelaxation(p) => {
            check_positive(p.beta, "beta")?;
            let n = p.pre_energies.len();
            if n == 0 || p.post_energies.len() != n {
                return Err(CliError::Schema {
                    message: "pre_energies and post_energies must be nonempty, equal length"
                        .into(),
                });
            }
            match &p.relaxation {
                RelaxationSpec::LambdaThermalization { lambda } => {
                    if !(0.0..=1.0).contains(lambda) {
                        return Err(CliError::Schema {
                            message: format!("lambda must be in [0, 1], got {lambda}"),
                        });
                    }
                }
                RelaxationSpec::Matrix { rows } => {
                    if rows.len() != n {
                        return Err(CliError::Schema {
                            message: format!("relaxation matrix has {} rows for {n} states", rows.len()),
                        });
                    }
                    check_stochastic_rows(rows, "relaxation matrix")?;
                }
            }
        }
        ScenarioSpec::GeneralTwoMeasurement(p) => {
            check_positive(p.beta, "beta")?;
            let d = p.eps.len();
            if d == 0 || p.eta.len() != d {
                return Err(CliError::Schema {
                    message: "eps and eta must be nonempty lists of equal length".into(),
                });
            }
            if d > MAX_QUANTUM_DIM {
                return Err(CliError::Schema {
                    message: format!("dimension exceeds cap {MAX_QUANTUM_DIM}"),
                });
            }
            match &p.channel {
                ChannelSpec::Kraus { operators } => {
                    if operators.is_empty()
                        || operators
                            .iter()
                            .any(|k| k.len() != d || k.iter().any(|row| row.len() != d))
                    {
                        return Err(CliError::Schema {
                            message: "kraus operators must be square matrices matching eps"
                                .into(),
                        });
                    }
                }
                ChannelSpec::Depolarizing { strength } => {
                    if !(0.0..=1.0).contains(strength) {
                        return Err(CliError::Schema {
                            message: format!("depolarizing strength must be in [0, 1], got {strength}"),
                        });
                    }
                }
                ChannelSpec::ThermalAmplitudeDamping { eta }
                | ChannelSpec::GeneralizedAmplitudeDamping { eta, .. } => {
                    if d != 2 {
                        return Err(CliError::Schema {
                            message: "amplitude damping channels are qubit channels (eps of length 2)"
                                .into(),
                        });
                    }
                    if !(0.0..=1.0).contains(eta) {
                        return Err(CliError::Schema {
                            message: format!("damping eta must be in [0, 1], got {eta}"),
                        });
                    }
                    if let ChannelSpec::GeneralizedAmplitudeDamping {
                        ground_population, ..
                    } = &p.channel
                    {
                        if !(0.0..=1.0).contains(ground_population) {
                            return Err(CliError::Schema {
                                message: format!(
                                    "ground_population must be in [0, 1], got {ground_population}"
                                ),
                            });
                        }
                    }
                }
                ChannelSpec::HaarUnitary { .. } => {}
            }
        }
        ScenarioSpec::RandomClassical(p) => {
            if p.dimension == 0 || p.dimension > MAX_CLASSICAL_DIM {
                return Err(CliError::Schema {
                    message: format!("dimension must be in 1..={MAX_CLASSICAL_DIM}"),
                });
            }
        }
        ScenarioSpec::RandomQuantum(p) => {
            if p.dimension == 0 || p.dimension > MAX_QUANTUM_DIM {
                return Err(CliError::Schema {
                    message: format!("dimension must be in 1..={MAX_QUANTUM_DIM}"),
                });
            }
            if p.kraus_rank == 0 || p.dimension * p.kraus_rank > 4 * MAX_QUANTUM_DIM {
                return Err(CliError::Schema {
                    message: "kraus_rank out of range".into(),
                });
            }
        }
    }
    Ok(())
}

pub fn complex_matrix(spec: &ComplexMatrixSpec) -> CliResult<DMatrix<Complex<f64>>> {
    let rows = spec.len();
    let cols = spec.first().map(Vec::len).unwrap_or(0);
    if rows == 0 || cols == 0 || spec.iter().any(|r| r.len() != cols) {
        return Err(CliError::Schema {
            message: "complex matrix must be rectangular and nonempty".into(),
        });
    }
    Ok(DMatrix::from_fn(rows, cols, |i, j| {
        Complex::new(spec[i][j].0, spec[i][j].1)
    }))
}
