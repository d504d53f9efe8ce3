//! Running a scenario and rendering its JSON report and CSV table.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::channel::choi_of;
use crate::error::Error;
use crate::evolution::{
    commutation_defect, commutative_evolve, semigroup_evolve, t_ordered_evolve, TimeGrid, Trajectory, TOL_COMMUTE,
};
use crate::generator::TimeLocalGenerator;
use crate::linalg::{pauli, ComplexMatrix};
use crate::markovianity::{
    blp_report, classify_trajectory, divisibility_report, legitimacy_report, Blp, Divisibility, DivisibilityReport,
    Legitimacy, Tier, Tolerances, BLP_PAIRS, TOL_BLP,
};
use crate::scenario::{Analysis, Diagnostic, MatrixSpec, Scenario, ToleranceSpec};
use crate::state::{bloch_of, trace_distance, DensityMatrix};

pub const DEFAULT_SEED: u64 = 42;
pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Upper bound on trajectory samples per state in the report.
const MAX_SAMPLES: usize = 200;

/// Command-line overrides applied on top of the scenario file.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub steps: Option<usize>,
    pub tol_div: Option<f64>,
}

/// Folds overrides into the scenario and pins the seed, so the result is
/// self-contained.
pub fn apply_overrides(mut scenario: Scenario, opts: &RunOptions) -> Scenario {
    if let Some(steps) = opts.steps {
        scenario.grid.steps = steps;
    }
    scenario.seed = Some(opts.seed.or(scenario.seed).unwrap_or(DEFAULT_SEED));
    if let Some(tol) = opts.tol_div {
        let t = scenario.tolerances.get_or_insert(ToleranceSpec {
            legitimacy: None,
            divisibility: None,
            blp: None,
        });
        t.divisibility = Some(tol);
    }
    scenario
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid scenario ({} problem(s))", .0.len())]
    Invalid(Vec<Diagnostic>),
    #[error(transparent)]
    Numerical(Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Invalid(_) => EXIT_INVALID,
            Self::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        if e.is_input_error() {
            Self::Invalid(vec![Diagnostic::new("", e.to_string())])
        } else {
            Self::Numerical(e)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EvolutionMethod {
    Semigroup,
    Commutative,
    TimeOrdered,
}

#[derive(Debug, Clone, Serialize)]
pub struct ToolInfo {
    pub name: &'static str,
    pub version: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvolutionInfo {
    pub method: EvolutionMethod,
    pub t_end: f64,
    pub steps: usize,
    pub h: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Sample {
    pub t: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bloch: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrix: Option<MatrixSpec>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StateSeries {
    pub label: String,
    pub samples: Vec<Sample>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FailurePoint {
    pub t: f64,
    pub status: Legitimacy,
}

#[derive(Debug, Clone, Serialize)]
pub struct LegitimacySummary {
    pub legitimate: bool,
    pub first_failure: Option<FailurePoint>,
    pub times: Vec<f64>,
    pub min_choi_eigs: Vec<f64>,
    pub trace_defects: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BlpSummary {
    pub pairs: usize,
    pub tolerance: f64,
    pub verdict: Blp,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassifySummary {
    pub tier: Tier,
    pub first_illegitimate: Option<FailurePoint>,
    pub divisibility: Divisibility,
    pub constancy_defect: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Results {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub evolve: Option<Vec<StateSeries>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub legitimacy: Option<LegitimacySummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub divisibility: Option<DivisibilityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blp: Option<BlpSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classify: Option<ClassifySummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub tool: ToolInfo,
    pub seed: u64,
    pub scenario: Scenario,
    pub evolution: EvolutionInfo,
    pub results: Results,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

pub struct RunOutput {
    pub report: RunReport,
    pub csv: String,
}

fn tolerances(s: &Scenario) -> (Tolerances, f64) {
    let mut tols = Tolerances::default();
    let mut blp = TOL_BLP;
    if let Some(t) = &s.tolerances {
        tols.legitimacy = t.legitimacy.unwrap_or(tols.legitimacy);
        tols.divisibility = t.divisibility.unwrap_or(tols.divisibility);
        blp = t.blp.unwrap_or(blp);
    }
    (tols, blp)
}

/// Picks the cheapest exact method the generator allows.
pub fn evolve(generator: &dyn TimeLocalGenerator, grid: TimeGrid) -> crate::Result<(EvolutionMethod, Trajectory)> {
    let (method, traj) = if generator.is_constant() {
        (EvolutionMethod::Semigroup, semigroup_evolve(&generator.at(0.0), grid))
    } else if generator.integral(0.0).is_some() && commutation_defect(generator, &grid, 64) <= TOL_COMMUTE {
        (EvolutionMethod::Commutative, commutative_evolve(generator, grid, None)?)
    } else {
        (EvolutionMethod::TimeOrdered, t_ordered_evolve(generator, grid))
    };
    if let Some(k) = traj.maps().iter().position(|m| !m.matrix().is_finite()) {
        return Err(Error::NonFinite { time: traj.grid().t(k) });
    }
    Ok((method, traj))
}

/// Validates, builds and runs every requested analysis.
pub fn run(scenario: &Scenario) -> Result<RunOutput, RunError> {
    let diagnostics = scenario.validate();
    if !diagnostics.is_empty() {
        return Err(RunError::Invalid(diagnostics));
    }
    let seed = scenario.seed.unwrap_or(DEFAULT_SEED);
    let built = scenario.build()?;
    let (method, traj) = evolve(built.generator.as_ref(), built.grid)?;
    let (tols, tol_blp) = tolerances(scenario);
    let grid = *traj.grid();

    let mut results = Results::default();
    let mut analyses = scenario.analyses.clone();
    analyses.sort();
    analyses.dedup();
    for analysis in analyses {
        match analysis {
            Analysis::Evolve => results.evolve = Some(sample_states(&traj, &built.states)?),
            Analysis::Legitimacy => {
                let r = legitimacy_report(&traj, tols.legitimacy);
                results.legitimacy = Some(LegitimacySummary {
                    legitimate: r.is_legitimate(),
                    first_failure: r.first_failure.map(|(t, status)| FailurePoint { t, status }),
                    times: r.times,
                    min_choi_eigs: r.min_choi_eigs,
                    trace_defects: r.trace_defects,
                });
            }
            Analysis::Divisibility => results.divisibility = Some(divisibility_report(&traj, tols.divisibility)),
            Analysis::Blp => {
                let r = blp_report(&traj, scenario.blp_pairs.unwrap_or(BLP_PAIRS), seed, tol_blp);
                results.blp = Some(BlpSummary {
                    pairs: r.pairs,
                    tolerance: tol_blp,
                    verdict: r.verdict,
                });
            }
            Analysis::Classify => {
                let c = classify_trajectory(built.generator.as_ref(), &traj, tols);
                results.classify = Some(ClassifySummary {
                    tier: c.tier,
                    first_illegitimate: c.legitimacy.first_failure.map(|(t, status)| FailurePoint { t, status }),
                    divisibility: c.divisibility.verdict,
                    constancy_defect: c.constancy_defect,
                });
            }
        }
    }

    let csv = csv_table(&traj, &built.states)?;
    let report = RunReport {
        tool: ToolInfo {
            name: "qdyn",
            version: env!("CARGO_PKG_VERSION"),
        },
        seed,
        scenario: scenario.clone(),
        evolution: EvolutionInfo {
            method,
            t_end: grid.t_end(),
            steps: grid.steps(),
            h: grid.h(),
        },
        results,
    };
    Ok(RunOutput { report, csv })
}

fn sample_indices(steps: usize) -> Vec<usize> {
    let stride = steps.div_ceil(MAX_SAMPLES).max(1);
    let mut idx: Vec<usize> = (0..=steps).step_by(stride).collect();
    if idx.last() != Some(&steps) {
        idx.push(steps);
    }
    idx
}

fn sample_states(traj: &Trajectory, states: &[(String, DensityMatrix)]) -> crate::Result<Vec<StateSeries>> {
    let idx = sample_indices(traj.grid().steps());
    states
        .iter()
        .map(|(label, rho)| {
            let samples = idx
                .iter()
                .map(|&k| {
                    let m = traj.map(k).apply(rho.matrix())?;
                    let (bloch, matrix) = if m.rows() == 2 {
                        (Some(bloch_of(&m).to_array()), None)
                    } else {
                        (None, Some(MatrixSpec::from_matrix(&m)))
                    };
                    Ok(Sample {
                        t: traj.grid().t(k),
                        bloch,
                        matrix,
                    })
                })
                .collect::<crate::Result<Vec<_>>>()?;
            Ok(StateSeries {
                label: label.clone(),
                samples,
            })
        })
        .collect()
}

/// Column names of the CSV table for `n_states` initial states of dimension `dim`.
pub fn csv_header(n_states: usize, dim: usize) -> Vec<String> {
    let mut cols = vec!["t".to_string(), "min_choi_eig_step".to_string()];
    for i in 0..n_states {
        for j in i + 1..n_states {
            cols.push(format!("d_{i}_{j}"));
        }
    }
    if dim == 2 {
        cols.extend(["lambda_1", "lambda_2", "lambda_3"].map(String::from));
    }
    cols
}

/// One row per grid point: time, the minimum Choi eigenvalue of the step
/// propagator ending there (empty at `t = 0`), trace distances between every
/// pair of evolved initial states and, for qubits, the Pauli eigenvalues
/// `λ_k = ½ Tr(σ_k Λ_t(σ_k))`.
pub fn csv_table(traj: &Trajectory, states: &[(String, DensityMatrix)]) -> crate::Result<String> {
    let dim = traj.dim();
    let step_eigs: Vec<f64> = traj
        .step_propagators()
        .iter()
        .map(|v| choi_of(v).min_eigenvalue())
        .collect();
    let mut out = csv_header(states.len(), dim).join(",");
    out.push('\n');
    let paulis = [pauli::x(), pauli::y(), pauli::z()];
    for (k, map) in traj.maps().iter().enumerate() {
        let mut row = vec![traj.grid().t(k).to_string()];
        row.push(if k == 0 { String::new() } else { step_eigs[k - 1].to_string() });
        let evolved = states
            .iter()
            .map(|(_, rho)| DensityMatrix::with_tolerance(map.apply(rho.matrix())?, f64::INFINITY, f64::INFINITY, f64::INFINITY))
            .collect::<crate::Result<Vec<_>>>()?;
        for i in 0..evolved.len() {
            for j in i + 1..evolved.len() {
                row.push(trace_distance(&evolved[i], &evolved[j])?.to_string());
            }
        }
        if dim == 2 {
            for s in &paulis {
                let image: ComplexMatrix = map.apply(s)?;
                row.push((0.5 * (s * &image).trace().re).to_string());
            }
        }
        let _ = writeln!(out, "{}", row.join(","));
    }
    Ok(out)
}

/// Writes `<stem>.report.json` and, if asked, `<stem>.csv` into `out_dir`.
pub fn write_outputs(out_dir: &Path, stem: &str, output: &RunOutput, csv: bool) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let report_path = out_dir.join(format!("{stem}.report.json"));
    std::fs::write(&report_path, output.report.to_json())?;
    let mut written = vec![report_path];
    if csv {
        let csv_path = out_dir.join(format!("{stem}.csv"));
        std::fs::write(&csv_path, &output.csv)?;
        written.push(csv_path);
    }
    Ok(written)
}
