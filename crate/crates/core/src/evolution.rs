//! Dynamical maps from time-local generators: semigroup exponential,
//! commutative `exp(∫L)` and the time-ordered midpoint-exponential product.

use serde::{Deserialize, Serialize};

use crate::channel::Superoperator;
use crate::error::{Error, Result};
use crate::generator::TimeLocalGenerator;
use crate::linalg;
use crate::quadrature::{integrate, TOL_QUAD};

/// Above this condition number a map is treated as singular when inverted.
pub const COND_MAX: f64 = 1e12;

/// Default commutation defect accepted by `commutative_evolve`.
pub const TOL_COMMUTE: f64 = 1e-10;

/// Uniform grid on `[0, t_end]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t_end: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(t_end: f64, steps: usize) -> Result<Self> {
        if steps < 1 {
            return Err(Error::InvalidGrid("grid.steps must be ≥ 1".into()));
        }
        if !(t_end.is_finite() && t_end > 0.0) {
            return Err(Error::InvalidGrid(format!("grid.t_end must be > 0, got {t_end}")));
        }
        Ok(Self { t_end, steps })
    }

    /// 1000 steps per unit time, at least one.
    pub fn with_default_resolution(t_end: f64) -> Result<Self> {
        Self::new(t_end, ((1000.0 * t_end).ceil() as usize).max(1))
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn h(&self) -> f64 {
        self.t_end / self.steps as f64
    }

    pub fn t(&self, k: usize) -> f64 {
        if k == self.steps {
            self.t_end
        } else {
            k as f64 * self.h()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.t(k)).collect()
    }
}

/// `Λ_{t_k}` on the grid together with the step propagators
/// `V_{t_{k+1}, t_k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    grid: TimeGrid,
    maps: Vec<Superoperator>,
    step_propagators: Vec<Superoperator>,
}

impl Trajectory {
    pub fn new(grid: TimeGrid, maps: Vec<Superoperator>, step_propagators: Vec<Superoperator>) -> Result<Self> {
        if maps.len() != grid.steps + 1 || step_propagators.len() != grid.steps {
            return Err(Error::InvalidGrid(format!(
                "{} maps and {} propagators for {} steps",
                maps.len(),
                step_propagators.len(),
                grid.steps
            )));
        }
        Ok(Self {
            grid,
            maps,
            step_propagators,
        })
    }

    /// Builds the propagators from consecutive maps, `V_k = Λ_{k+1} Λ_k⁻¹`.
    pub fn from_maps(grid: TimeGrid, maps: Vec<Superoperator>) -> Result<Self> {
        let mut props = Vec::with_capacity(grid.steps);
        for k in 0..grid.steps {
            let (inv, cond) = maps[k].inverse()?;
            if cond > COND_MAX {
                return Err(Error::SingularMap { condition_number: cond });
            }
            props.push(maps[k + 1].compose(&inv));
        }
        Self::new(grid, maps, props)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.maps[0].dim()
    }

    pub fn maps(&self) -> &[Superoperator] {
        &self.maps
    }

    pub fn map(&self, k: usize) -> &Superoperator {
        &self.maps[k]
    }

    pub fn step_propagators(&self) -> &[Superoperator] {
        &self.step_propagators
    }

    pub fn last(&self) -> &Superoperator {
        &self.maps[self.grid.steps]
    }
}

/// `Λ_t = e^{tL}`. Each map is its own exponential; propagators are `e^{hL}`.
pub fn semigroup_evolve(l: &Superoperator, grid: TimeGrid) -> Trajectory {
    let maps = grid.times().into_iter().map(|t| l.scale(t).exp()).collect();
    let step = l.scale(grid.h()).exp();
    let props = vec![step; grid.steps];
    Trajectory::new(grid, maps, props).expect("sizes match grid")
}

/// Largest operator norm of `[L_t, L_u]` over `pairs` deterministic
/// low-discrepancy samples `(t, u)` of the grid interval.
pub fn commutation_defect(generator: &dyn TimeLocalGenerator, grid: &TimeGrid, pairs: usize) -> f64 {
    const G1: f64 = 0.618_033_988_749_894_9;
    const G2: f64 = 0.754_877_666_246_692_7;
    let mut worst: f64 = 0.0;
    for i in 1..=pairs.max(1) {
        let t = (i as f64 * G1).fract() * grid.t_end;
        let u = (i as f64 * G2).fract() * grid.t_end;
        let c = Superoperator::commutator(&generator.at(t), &generator.at(u));
        worst = worst.max(linalg::operator_norm(c.matrix()));
    }
    worst
}

/// `Λ_t = exp(∫₀ᵗ L_u du)`. With `check = Some(tol)` the family is first
/// tested for commutativity on 64 sampled pairs.
pub fn commutative_evolve(
    generator: &dyn TimeLocalGenerator,
    grid: TimeGrid,
    check: Option<f64>,
) -> Result<Trajectory> {
    if let Some(tol) = check {
        let defect = commutation_defect(generator, &grid, 64);
        if defect > tol {
            return Err(Error::NotCommutative { defect });
        }
    }
    let times = grid.times();
    let integrals: Vec<Superoperator> = if generator.integral(0.0).is_some() {
        times
            .iter()
            .map(|&t| generator.integral(t).expect("closed form"))
            .collect()
    } else {
        let n = generator.dim();
        let f = |t: f64| generator.at(t).matrix().clone();
        let mut acc = Superoperator::zero(n);
        let mut out = vec![acc.clone()];
        for w in times.windows(2) {
            let piece = integrate(&f, w[0], w[1], TOL_QUAD);
            acc = &acc + &Superoperator::from_matrix(n, piece)?;
            out.push(acc.clone());
        }
        out
    };
    let maps = integrals.iter().map(Superoperator::exp).collect();
    let props = integrals.windows(2).map(|w| (&w[1] - &w[0]).exp()).collect();
    Trajectory::new(grid, maps, props)
}

/// Time-ordered product of `exp(h L_{t + h/2})` steps. Second order in `h`
/// and exact for constant generators.
pub fn t_ordered_evolve(generator: &dyn TimeLocalGenerator, grid: TimeGrid) -> Trajectory {
    let n = generator.dim();
    let mut maps = Vec::with_capacity(grid.steps + 1);
    let mut props = Vec::with_capacity(grid.steps);
    let mut current = Superoperator::identity(n);
    maps.push(current.clone());
    for k in 0..grid.steps {
        let mid = grid.t(k) + 0.5 * (grid.t(k + 1) - grid.t(k));
        let step = generator.at(mid).scale(grid.t(k + 1) - grid.t(k)).exp();
        current = step.compose(&current);
        maps.push(current.clone());
        props.push(step);
    }
    Trajectory::new(grid, maps, props).expect("sizes match grid")
}

/// `L_{t_k} = Λ̇_{t_k} Λ_{t_k}⁻¹` with a second-order finite difference
/// (central inside the grid, one-sided at the ends).
pub fn local_generator_from_trajectory(traj: &Trajectory, k: usize) -> Result<Superoperator> {
    let steps = traj.grid.steps;
    if steps < 2 {
        return Err(Error::InvalidGrid("local generator needs at least two steps".into()));
    }
    if k > steps {
        return Err(Error::InvalidGrid(format!("index {k} beyond {steps} steps")));
    }
    let h = traj.grid.h();
    let m = |i: usize| traj.maps[i].matrix();
    let deriv = if k == 0 {
        (&(&m(1).scale_re(4.0) - &m(0).scale_re(3.0)) - m(2)).scale_re(0.5 / h)
    } else if k == steps {
        (&(&m(k).scale_re(3.0) - &m(k - 1).scale_re(4.0)) + m(k - 2)).scale_re(0.5 / h)
    } else {
        (m(k + 1) - m(k - 1)).scale_re(0.5 / h)
    };
    let (inv, cond) = linalg::inverse_with_condition(m(k))?;
    if cond > COND_MAX {
        return Err(Error::SingularMap { condition_number: cond });
    }
    Superoperator::from_matrix(traj.dim(), &deriv * &inv)
}
