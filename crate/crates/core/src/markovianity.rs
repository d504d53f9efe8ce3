//! Audits of a dynamical map: legitimacy, CP-divisibility, trace-distance
//! monotonicity and the combined four-tier classification.

use rand::SeedableRng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{self, choi_of};
use crate::error::{Error, Result};
use crate::evolution::{t_ordered_evolve, TimeGrid, Trajectory, COND_MAX};
use crate::generator::{conditional_cp_min_eig, is_gksl, TimeLocalGenerator};
use crate::linalg::{self, ComplexMatrix};
use crate::random::{random_density_matrix, random_pure_state, SeededRng};
use crate::state::{bloch_to_state, BlochVector, DensityMatrix};

pub const TOL_DIV: f64 = 1e-7;
pub const TOL_BLP: f64 = 1e-7;
pub const TOL_LEGIT: f64 = 1e-9;
pub const TOL_CONST: f64 = 1e-10;
pub const BLP_PAIRS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DivisibilityMethod {
    StepPropagators,
    Inversion,
    Generator,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "verdict")]
pub enum Divisibility {
    Divisible,
    /// `time` is the end of the first step whose propagator fails.
    NotDivisible { time: f64, min_eig: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivisibilityReport {
    pub method: DivisibilityMethod,
    /// End time of each step.
    pub times: Vec<f64>,
    /// Minimum Choi eigenvalue of each step propagator (for the generator
    /// method: of the compressed Choi matrix of `L` at the step midpoint).
    pub min_eigs: Vec<f64>,
    pub verdict: Divisibility,
}

impl DivisibilityReport {
    pub fn is_divisible(&self) -> bool {
        matches!(self.verdict, Divisibility::Divisible)
    }

    fn from_eigs(method: DivisibilityMethod, times: Vec<f64>, min_eigs: Vec<f64>, tol: f64) -> Self {
        let verdict = min_eigs
            .iter()
            .position(|e| *e < -tol)
            .map(|k| Divisibility::NotDivisible {
                time: times[k],
                min_eig: min_eigs[k],
            })
            .unwrap_or(Divisibility::Divisible);
        Self {
            method,
            times,
            min_eigs,
            verdict,
        }
    }
}

fn step_end_times(grid: &TimeGrid) -> Vec<f64> {
    grid.times()[1..].to_vec()
}

/// CP test of every stored step propagator.
pub fn divisibility_report(traj: &Trajectory, tol: f64) -> DivisibilityReport {
    let eigs: Vec<f64> = traj
        .step_propagators()
        .par_iter()
        .map(|v| choi_of(v).min_eigenvalue())
        .collect();
    DivisibilityReport::from_eigs(DivisibilityMethod::StepPropagators, step_end_times(traj.grid()), eigs, tol)
}

/// CP test of `Λ_{t_{k+1}} Λ_{t_k}⁻¹`; fails on maps with condition number
/// above `COND_MAX`.
pub fn divisibility_by_inversion(traj: &Trajectory, tol: f64) -> Result<DivisibilityReport> {
    let eigs: Result<Vec<f64>> = (0..traj.grid().steps())
        .into_par_iter()
        .map(|k| {
            let (inv, cond) = traj.map(k).inverse()?;
            if cond > COND_MAX {
                return Err(Error::SingularMap { condition_number: cond });
            }
            Ok(choi_of(&traj.map(k + 1).compose(&inv)).min_eigenvalue())
        })
        .collect();
    Ok(DivisibilityReport::from_eigs(
        DivisibilityMethod::Inversion,
        step_end_times(traj.grid()),
        eigs?,
        tol,
    ))
}

/// GKSL test of the generator at each step midpoint.
pub fn divisibility_by_generator(generator: &dyn TimeLocalGenerator, grid: &TimeGrid, tol: f64) -> DivisibilityReport {
    let times = grid.times();
    let eigs: Vec<f64> = (0..grid.steps())
        .into_par_iter()
        .map(|k| {
            let l = generator.at(0.5 * (times[k] + times[k + 1]));
            match is_gksl(&l, tol) {
                crate::generator::GkslVerdict::Fails { condition, value }
                    if condition != crate::generator::GkslCondition::ConditionalCp =>
                {
                    -value.abs()
                }
                _ => conditional_cp_min_eig(&l),
            }
        })
        .collect();
    DivisibilityReport::from_eigs(DivisibilityMethod::Generator, step_end_times(grid), eigs, tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "verdict")]
pub enum Blp {
    Monotone { max_slope: f64 },
    /// First grid interval where some pair's trace distance grows faster
    /// than the tolerance; `time` is the interval end.
    Backflow { time: f64, pair: usize, rate: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlpReport {
    pub pairs: usize,
    /// Largest forward-difference slope of `D[Λ_t ρ, Λ_t σ]` for each pair.
    pub max_slopes: Vec<f64>,
    pub verdict: Blp,
}

impl BlpReport {
    pub fn is_monotone(&self) -> bool {
        matches!(self.verdict, Blp::Monotone { .. })
    }
}

/// `D[Λ_{t_k} ρ, Λ_{t_k} σ]` along the grid.
pub fn trace_distance_series(traj: &Trajectory, rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<Vec<f64>> {
    let diff = rho.matrix() - sigma.matrix();
    traj.maps()
        .iter()
        .map(|m| Ok(0.5 * linalg::trace_norm(&m.apply(&diff)?)?))
        .collect()
}

/// Sampled state pairs: the first half (random pure, random mixed), the second
/// half (random mixed, maximally mixed), and for qubits the antipodal pair
/// `±x̂` at the end.
pub fn blp_pairs(dim: usize, pairs: usize, seed: u64) -> Vec<(DensityMatrix, DensityMatrix)> {
    let mut rng = SeededRng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(pairs + 1);
    let half = pairs / 2;
    for _ in 0..half {
        out.push((random_pure_state(dim, &mut rng), random_density_matrix(dim, &mut rng)));
    }
    for _ in half..pairs {
        out.push((random_density_matrix(dim, &mut rng), DensityMatrix::maximally_mixed(dim)));
    }
    if dim == 2 {
        out.push((
            bloch_to_state(BlochVector::new(1.0, 0.0, 0.0)).expect("unit vector"),
            bloch_to_state(BlochVector::new(-1.0, 0.0, 0.0)).expect("unit vector"),
        ));
    }
    out
}

pub fn blp_report(traj: &Trajectory, pairs: usize, seed: u64, tol: f64) -> BlpReport {
    let sampled = blp_pairs(traj.dim(), pairs, seed);
    let h = traj.grid().h();
    let times = traj.grid().times();
    // (max slope, first violating interval) per pair
    let per_pair: Vec<(f64, Option<(usize, f64)>)> = sampled
        .par_iter()
        .map(|(rho, sigma)| {
            let d = trace_distance_series(traj, rho, sigma).expect("dimensions match trajectory");
            let mut max_slope = f64::NEG_INFINITY;
            let mut first = None;
            for (k, w) in d.windows(2).enumerate() {
                let slope = (w[1] - w[0]) / h;
                max_slope = max_slope.max(slope);
                if first.is_none() && slope > tol {
                    first = Some((k, slope));
                }
            }
            (max_slope, first)
        })
        .collect();
    let verdict = per_pair
        .iter()
        .enumerate()
        .filter_map(|(i, (_, first))| first.map(|(k, rate)| (k, i, rate)))
        .min_by_key(|(k, i, _)| (*k, *i))
        .map(|(k, pair, rate)| Blp::Backflow {
            time: times[k + 1],
            pair,
            rate,
        })
        .unwrap_or_else(|| Blp::Monotone {
            max_slope: per_pair.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max),
        });
    BlpReport {
        pairs: sampled.len(),
        max_slopes: per_pair.into_iter().map(|p| p.0).collect(),
        verdict,
    }
}

/// `‖(1_k ⊗ Λ_{t_j})(X)‖₁` along the grid.
pub fn extended_trace_norm_series(traj: &Trajectory, x: &ComplexMatrix, k: usize) -> Result<Vec<f64>> {
    traj.maps()
        .iter()
        .map(|m| linalg::trace_norm(&channel::apply_extended(m, k, x)?))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status")]
pub enum Legitimacy {
    Cptp,
    NotCp { min_eig: f64 },
    NotTp { defect: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LegitimacyReport {
    pub times: Vec<f64>,
    pub min_choi_eigs: Vec<f64>,
    pub trace_defects: Vec<f64>,
    pub points: Vec<Legitimacy>,
    /// Earliest failing grid point.
    pub first_failure: Option<(f64, Legitimacy)>,
}

impl LegitimacyReport {
    pub fn is_legitimate(&self) -> bool {
        self.first_failure.is_none()
    }
}

/// CP and TP test of every `Λ_{t_k}`.
pub fn legitimacy_report(traj: &Trajectory, tol: f64) -> LegitimacyReport {
    let checks: Vec<(f64, f64)> = traj
        .maps()
        .par_iter()
        .map(|m| (choi_of(m).min_eigenvalue(), channel::trace_defect(m)))
        .collect();
    let times = traj.grid().times();
    let points: Vec<Legitimacy> = checks
        .iter()
        .map(|&(min_eig, defect)| {
            if min_eig < -tol {
                Legitimacy::NotCp { min_eig }
            } else if defect > tol {
                Legitimacy::NotTp { defect }
            } else {
                Legitimacy::Cptp
            }
        })
        .collect();
    let first_failure = points
        .iter()
        .position(|p| *p != Legitimacy::Cptp)
        .map(|k| (times[k], points[k]));
    LegitimacyReport {
        times,
        min_choi_eigs: checks.iter().map(|c| c.0).collect(),
        trace_defects: checks.iter().map(|c| c.1).collect(),
        points,
        first_failure,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Tier {
    Illegitimate,
    LegitimateNonMarkovian,
    MarkovianDivisible,
    MarkovianSemigroup,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    pub legitimacy: f64,
    pub divisibility: f64,
    pub constancy: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            legitimacy: TOL_LEGIT,
            divisibility: TOL_DIV,
            constancy: TOL_CONST,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub tier: Tier,
    pub legitimacy: LegitimacyReport,
    pub divisibility: DivisibilityReport,
    /// `max_k max|L_{t_k} - L_0|`
    pub constancy_defect: f64,
}

pub fn classify(generator: &dyn TimeLocalGenerator, grid: TimeGrid, tols: Tolerances) -> Classification {
    let traj = t_ordered_evolve(generator, grid);
    classify_trajectory(generator, &traj, tols)
}

/// The deepest tier whose tests pass. Each tier requires all shallower ones.
pub fn classify_trajectory(generator: &dyn TimeLocalGenerator, traj: &Trajectory, tols: Tolerances) -> Classification {
    let legitimacy = legitimacy_report(traj, tols.legitimacy);
    let divisibility = divisibility_report(traj, tols.divisibility);
    let l0 = generator.at(0.0);
    let constancy_defect = traj
        .grid()
        .times()
        .par_iter()
        .map(|&t| generator.at(t).distance(&l0))
        .reduce(|| 0.0, f64::max);
    let tier = if !legitimacy.is_legitimate() {
        Tier::Illegitimate
    } else if !divisibility.is_divisible() {
        Tier::LegitimateNonMarkovian
    } else if constancy_defect >= tols.constancy {
        Tier::MarkovianDivisible
    } else {
        Tier::MarkovianSemigroup
    };
    Classification {
        tier,
        legitimacy,
        divisibility,
        constancy_defect,
    }
}
