//! Scenario files: a generator, a time grid, initial states and the analyses
//! to run on them.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{diagonal_projector, unitary_conjugation, Superoperator};
use crate::closed_forms::{
    blp_counterexample_scenario, pump_cool_spec, pure_decoherence_spec, random_unitary_spec, PumpCoolParams,
    WilcoxPair,
};
use crate::error::{Error, Result};
use crate::evolution::TimeGrid;
use crate::generator::{Constant, GkslSpec, Jump, TimeLocalGenerator};
use crate::linalg::{pauli, ComplexMatrix};
use crate::rates::RateFunction;
use crate::state::{bloch_to_state, BlochVector, DensityMatrix};

pub const SCHEMA_VERSION: u32 = 1;

/// Preset names with a one-line description.
pub const PRESETS: &[(&str, &str)] = &[
    ("example5_projector", "semigroup L = γ(Φ - 1) with Φ the diagonal projector"),
    ("example6_sigma_z", "semigroup L = γ(Φ - 1) with Φ(ρ) = σz ρ σz"),
    ("example7_pump_cool", "qubit pumping, cooling and dephasing with H = ωσz/2"),
    ("example9_random_unitary", "commutative Pauli dephasing with three rate functions"),
    ("example10_pure_decoherence", "σz dephasing with a time-dependent rate γ(t)"),
    ("remark6_counterexample", "BLP-monotone dynamics that is not CP-divisible"),
    ("wilcox_l1l2", "noncommutative b1 L1 + b2 L2 built from rates a1, a2"),
];

/// A complex matrix as nested real and (optional) imaginary rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    pub re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
}

impl MatrixSpec {
    pub fn to_matrix(&self) -> Result<ComplexMatrix> {
        match &self.im {
            Some(im) => ComplexMatrix::from_re_im(&self.re, im),
            None => {
                let zeros: Vec<Vec<f64>> = self.re.iter().map(|r| vec![0.0; r.len()]).collect();
                ComplexMatrix::from_re_im(&self.re, &zeros)
            }
        }
    }

    pub fn from_matrix(m: &ComplexMatrix) -> Self {
        let (re, im) = m.re_im();
        let im = im.iter().flatten().any(|x| *x != 0.0).then_some(im);
        Self { re, im }
    }

    fn square_of(&self, dim: usize) -> std::result::Result<ComplexMatrix, String> {
        let m = self.to_matrix().map_err(|e| e.to_string())?;
        if m.rows() != dim || m.cols() != dim {
            return Err(format!("expected a {dim}x{dim} matrix, got {}x{}", m.rows(), m.cols()));
        }
        if !m.is_finite() {
            return Err("matrix has non-finite entries".into());
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpSpec {
    pub operator: MatrixSpec,
    pub rate: RateFunction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GkslDoc {
    pub hamiltonian: MatrixSpec,
    #[serde(default)]
    pub jumps: Vec<JumpSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SemigroupParams {
    pub gamma: f64,
}

impl Default for SemigroupParams {
    fn default() -> Self {
        Self { gamma: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomUnitaryParams {
    pub rates: [RateFunction; 3],
}

impl Default for RandomUnitaryParams {
    fn default() -> Self {
        Self {
            rates: [
                RateFunction::constant(0.5),
                RateFunction::exponential(1.0, 0.5),
                RateFunction::sinusoidal(1.0, 1.0, 0.0),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecoherenceParams {
    pub gamma: RateFunction,
}

impl Default for DecoherenceParams {
    fn default() -> Self {
        Self {
            gamma: RateFunction::sinusoidal(1.0, 1.0, 0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WilcoxParams {
    pub a1: RateFunction,
    pub a2: RateFunction,
}

impl Default for WilcoxParams {
    fn default() -> Self {
        Self {
            a1: RateFunction::constant(1.0),
            a2: RateFunction::polynomial(vec![0.0, 1.0]),
        }
    }
}

fn default_pump_cool() -> PumpCoolParams {
    PumpCoolParams {
        omega: 1.0,
        gamma1: 0.3,
        gamma2: 0.7,
        gamma: 0.1,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "params", deny_unknown_fields)]
pub enum Preset {
    #[serde(rename = "example5_projector")]
    Projector(SemigroupParams),
    #[serde(rename = "example6_sigma_z")]
    SigmaZ(SemigroupParams),
    #[serde(rename = "example7_pump_cool")]
    PumpCool(PumpCoolParams),
    #[serde(rename = "example9_random_unitary")]
    RandomUnitary(RandomUnitaryParams),
    #[serde(rename = "example10_pure_decoherence")]
    PureDecoherence(DecoherenceParams),
    #[serde(rename = "remark6_counterexample")]
    Remark6Counterexample,
    #[serde(rename = "wilcox_l1l2")]
    Wilcox(WilcoxParams),
}

impl Preset {
    /// The preset with default parameters.
    pub fn by_name(name: &str) -> Option<Self> {
        Some(match name {
            "example5_projector" => Self::Projector(SemigroupParams::default()),
            "example6_sigma_z" => Self::SigmaZ(SemigroupParams::default()),
            "example7_pump_cool" => Self::PumpCool(default_pump_cool()),
            "example9_random_unitary" => Self::RandomUnitary(RandomUnitaryParams::default()),
            "example10_pure_decoherence" => Self::PureDecoherence(DecoherenceParams::default()),
            "remark6_counterexample" => Self::Remark6Counterexample,
            "wilcox_l1l2" => Self::Wilcox(WilcoxParams::default()),
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Projector(_) => "example5_projector",
            Self::SigmaZ(_) => "example6_sigma_z",
            Self::PumpCool(_) => "example7_pump_cool",
            Self::RandomUnitary(_) => "example9_random_unitary",
            Self::PureDecoherence(_) => "example10_pure_decoherence",
            Self::Remark6Counterexample => "remark6_counterexample",
            Self::Wilcox(_) => "wilcox_l1l2",
        }
    }

    /// Every preset acts on a qubit.
    pub fn dim(&self) -> usize {
        2
    }

    fn rates(&self) -> Vec<(&'static str, &RateFunction)> {
        match self {
            Self::RandomUnitary(p) => vec![("rates[0]", &p.rates[0]), ("rates[1]", &p.rates[1]), ("rates[2]", &p.rates[2])],
            Self::PureDecoherence(p) => vec![("gamma", &p.gamma)],
            Self::Wilcox(p) => vec![("a1", &p.a1), ("a2", &p.a2)],
            _ => Vec::new(),
        }
    }

    pub fn check(&self) -> Vec<Diagnostic> {
        let at = |field: &str| format!("generator.preset.params.{field}");
        let mut out = Vec::new();
        let mut finite = |field: &str, x: f64| {
            if !x.is_finite() {
                out.push(Diagnostic::new(at(field), format!("{field} must be finite")));
            }
        };
        match self {
            Self::Projector(p) | Self::SigmaZ(p) => finite("gamma", p.gamma),
            Self::PumpCool(p) => {
                finite("omega", p.omega);
                finite("gamma1", p.gamma1);
                finite("gamma2", p.gamma2);
                finite("gamma", p.gamma);
            }
            _ => {}
        }
        for (field, rate) in self.rates() {
            if let Err(e) = rate.validate() {
                out.push(Diagnostic::new(at(field), e.to_string()));
            }
        }
        out
    }

    pub fn build(&self) -> Result<Box<dyn TimeLocalGenerator>> {
        let semigroup = |phi: Superoperator, gamma: f64| {
            let n = phi.dim();
            Box::new(Constant((&phi - &Superoperator::identity(n)).scale(gamma))) as Box<dyn TimeLocalGenerator>
        };
        Ok(match self {
            Self::Projector(p) => semigroup(diagonal_projector(2), p.gamma),
            Self::SigmaZ(p) => semigroup(unitary_conjugation(&pauli::z())?, p.gamma),
            Self::PumpCool(p) => Box::new(pump_cool_spec(p)),
            Self::RandomUnitary(p) => Box::new(random_unitary_spec(&p.rates)),
            Self::PureDecoherence(p) => Box::new(pure_decoherence_spec(&p.gamma)),
            Self::Remark6Counterexample => Box::new(blp_counterexample_scenario()?.0),
            Self::Wilcox(p) => Box::new(WilcoxPair::new(p.a1.clone(), p.a2.clone()).local_generator()),
        })
    }

    /// A runnable scenario around this preset.
    pub fn template(&self) -> Scenario {
        let (t_end, steps, analyses, blp_pairs) = match self {
            Self::Remark6Counterexample => (2.0, 2000, Analysis::ALL.to_vec(), Some(1000)),
            Self::PureDecoherence(_) => (2.0 * std::f64::consts::PI, 1000, Analysis::ALL.to_vec(), None),
            Self::PumpCool(_) => (20.0, 2000, Analysis::ALL.to_vec(), None),
            Self::Wilcox(_) => (2.0, 2000, Analysis::ALL.to_vec(), None),
            _ => (5.0, 500, Analysis::ALL.to_vec(), None),
        };
        Scenario {
            schema_version: SCHEMA_VERSION,
            name: self.name().to_string(),
            dim: self.dim(),
            generator: GeneratorSpec::Preset(self.clone()),
            grid: GridSpec { t_end, steps },
            initial_states: vec![
                StateSpec::Named(NamedState::PlusZ),
                StateSpec::Named(NamedState::PlusX),
                StateSpec::Bloch([0.3, -0.2, 0.5]),
            ],
            analyses,
            seed: None,
            blp_pairs,
            tolerances: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSpec {
    Preset(Preset),
    Gksl(GkslDoc),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub t_end: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedState {
    MaximallyMixed,
    PlusX,
    MinusX,
    PlusY,
    MinusY,
    PlusZ,
    MinusZ,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    Matrix(MatrixSpec),
    Bloch([f64; 3]),
    Named(NamedState),
}

impl StateSpec {
    pub fn label(&self) -> String {
        match self {
            Self::Matrix(_) => "matrix".into(),
            Self::Bloch([x, y, z]) => format!("bloch({x},{y},{z})"),
            Self::Named(n) => serde_json::to_value(n)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default(),
        }
    }

    pub fn to_state(&self, dim: usize) -> std::result::Result<DensityMatrix, String> {
        let qubit = |v: [f64; 3]| {
            if dim != 2 {
                return Err(format!("Bloch states need dim 2, scenario has dim {dim}"));
            }
            bloch_to_state(BlochVector::new(v[0], v[1], v[2])).map_err(|e| e.to_string())
        };
        match self {
            Self::Matrix(m) => DensityMatrix::new(m.square_of(dim)?).map_err(|e| e.to_string()),
            Self::Bloch(v) => qubit(*v),
            Self::Named(NamedState::MaximallyMixed) => Ok(DensityMatrix::maximally_mixed(dim)),
            Self::Named(n) => qubit(match n {
                NamedState::PlusX => [1.0, 0.0, 0.0],
                NamedState::MinusX => [-1.0, 0.0, 0.0],
                NamedState::PlusY => [0.0, 1.0, 0.0],
                NamedState::MinusY => [0.0, -1.0, 0.0],
                NamedState::PlusZ => [0.0, 0.0, 1.0],
                NamedState::MinusZ => [0.0, 0.0, -1.0],
                NamedState::MaximallyMixed => unreachable!(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    Evolve,
    Legitimacy,
    Divisibility,
    Blp,
    Classify,
}

impl Analysis {
    pub const ALL: [Analysis; 5] = [
        Analysis::Evolve,
        Analysis::Legitimacy,
        Analysis::Divisibility,
        Analysis::Blp,
        Analysis::Classify,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub legitimacy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub divisibility: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blp: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    pub dim: usize,
    pub generator: GeneratorSpec,
    pub grid: GridSpec,
    pub initial_states: Vec<StateSpec>,
    pub analyses: Vec<Analysis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blp_pairs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<ToleranceSpec>,
}

/// A problem located by a dotted path into the scenario document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub path: String,
    pub message: String,
}

impl Diagnostic {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Parses a scenario document, reporting the path of the first bad field.
pub fn parse(text: &str) -> std::result::Result<Scenario, Diagnostic> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Diagnostic::new(if path == "." { String::new() } else { path }, e.into_inner().to_string())
    })
}

/// Reads, parses and validates. Never runs any evolution.
pub fn load(path: &Path) -> std::result::Result<Scenario, Vec<Diagnostic>> {
    let text = std::fs::read_to_string(path).map_err(|e| vec![Diagnostic::new("", e.to_string())])?;
    let scenario = parse(&text).map_err(|d| vec![d])?;
    let diagnostics = scenario.validate();
    if diagnostics.is_empty() {
        Ok(scenario)
    } else {
        Err(diagnostics)
    }
}

/// A scenario turned into numerical objects.
pub struct Built {
    pub generator: Box<dyn TimeLocalGenerator>,
    pub grid: TimeGrid,
    pub states: Vec<(String, DensityMatrix)>,
}

impl Scenario {
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        if self.schema_version != SCHEMA_VERSION {
            out.push(Diagnostic::new(
                "schema_version",
                format!("unsupported schema version {} (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        if self.dim == 0 {
            out.push(Diagnostic::new("dim", "dim must be ≥ 1"));
        }
        if self.grid.steps < 1 {
            out.push(Diagnostic::new("grid.steps", "grid.steps must be ≥ 1"));
        }
        if !(self.grid.t_end.is_finite() && self.grid.t_end > 0.0) {
            out.push(Diagnostic::new("grid.t_end", "grid.t_end must be a positive number"));
        }
        match &self.generator {
            GeneratorSpec::Preset(p) => {
                if p.dim() != self.dim {
                    out.push(Diagnostic::new(
                        "dim",
                        format!("preset {} acts on dim {}, scenario has dim {}", p.name(), p.dim(), self.dim),
                    ));
                }
                out.extend(p.check());
            }
            GeneratorSpec::Gksl(doc) if self.dim > 0 => out.extend(self.check_gksl(doc)),
            GeneratorSpec::Gksl(_) => {}
        }
        if self.dim > 0 {
            for (i, s) in self.initial_states.iter().enumerate() {
                if let Err(msg) = s.to_state(self.dim) {
                    out.push(Diagnostic::new(format!("initial_states[{i}]"), msg));
                }
            }
        }
        if self.analyses.is_empty() {
            out.push(Diagnostic::new("analyses", "at least one analysis is required"));
        }
        if self.analyses.contains(&Analysis::Evolve) && self.initial_states.is_empty() {
            out.push(Diagnostic::new("initial_states", "evolve needs at least one initial state"));
        }
        if self.blp_pairs == Some(0) {
            out.push(Diagnostic::new("blp_pairs", "blp_pairs must be ≥ 1"));
        }
        if let Some(t) = &self.tolerances {
            for (field, v) in [("legitimacy", t.legitimacy), ("divisibility", t.divisibility), ("blp", t.blp)] {
                if let Some(v) = v.filter(|v| !(v.is_finite() && *v >= 0.0)) {
                    out.push(Diagnostic::new(format!("tolerances.{field}"), format!("tolerance {v} must be ≥ 0")));
                }
            }
        }
        out
    }

    fn check_gksl(&self, doc: &GkslDoc) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        match doc.hamiltonian.square_of(self.dim) {
            Ok(h) if !h.is_hermitian(crate::linalg::tol::HERM) => out.push(Diagnostic::new(
                "generator.gksl.hamiltonian",
                format!("not Hermitian (defect {:e})", h.hermitian_defect()),
            )),
            Ok(_) => {}
            Err(msg) => out.push(Diagnostic::new("generator.gksl.hamiltonian", msg)),
        }
        for (k, j) in doc.jumps.iter().enumerate() {
            if let Err(msg) = j.operator.square_of(self.dim) {
                out.push(Diagnostic::new(format!("generator.gksl.jumps[{k}].operator"), msg));
            }
            if let Err(e) = j.rate.validate() {
                out.push(Diagnostic::new(format!("generator.gksl.jumps[{k}].rate"), e.to_string()));
            }
        }
        out
    }

    pub fn build(&self) -> Result<Built> {
        let generator: Box<dyn TimeLocalGenerator> = match &self.generator {
            GeneratorSpec::Preset(p) => p.build()?,
            GeneratorSpec::Gksl(doc) => {
                let jumps = doc
                    .jumps
                    .iter()
                    .map(|j| {
                        Ok(Jump {
                            operator: j.operator.to_matrix()?,
                            rate: j.rate.clone(),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Box::new(GkslSpec::new(doc.hamiltonian.to_matrix()?, jumps)?)
            }
        };
        let grid = TimeGrid::new(self.grid.t_end, self.grid.steps)?;
        let states = self
            .initial_states
            .iter()
            .map(|s| Ok((s.label(), s.to_state(self.dim).map_err(Error::NotAState)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Built { generator, grid, states })
    }
}
