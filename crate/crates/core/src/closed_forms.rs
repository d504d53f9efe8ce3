//! Exact solutions of the worked qubit models, used as oracles for the
//! generic integrators.
//!
//! Prefactor convention: `L1 = D[σ₊]`, `L2 = D[σ₋]`, `L3(ρ) = σ_zρσ_z - ρ`
//! with `σ₊ = |2><1|`, `σ₋ = |1><2|` and `D[V]ρ = VρV^† - ½{V^†V, ρ}`. This
//! is the normalization in which `[L1, L2] = L1 - L2`; the commutator form
//! `[σ₊, ρσ₋] + [σ₊ρ, σ₋]` equals `2 L1`. Any other factor belongs to the
//! rate: `(γ/2) L3` is a `σ_z` jump with rate `γ/2`, and `γ₁ L1` is a `σ₊`
//! jump with rate `γ₁`.

use std::sync::Arc;

use crate::channel::{ChoiMatrix, Superoperator};
use crate::error::{Error, Result};
use crate::evolution::TimeGrid;
use crate::generator::{dissipator, hamiltonian_superop, Combination, GkslSpec, Jump, ScalarFn, TimeLocalGenerator};
use crate::linalg::{self, pauli, tol, ComplexMatrix, C64, ONE};
use crate::quadrature::integrate;
use crate::rates::RateFunction;
use crate::state::DensityMatrix;

const TOL_DEGENERATE: f64 = 1e-12;
const TOL_QUAD_FINE: f64 = 1e-13;

/// The four qubit superoperators `L0 = -i[σ_z, ·]`, `L1`, `L2`, `L3`.
#[derive(Debug, Clone, PartialEq)]
pub struct QubitDissipators {
    pub l0: Superoperator,
    pub l1: Superoperator,
    pub l2: Superoperator,
    pub l3: Superoperator,
}

pub fn qubit_dissipators() -> QubitDissipators {
    QubitDissipators {
        l0: hamiltonian_superop(&pauli::z()),
        l1: dissipator(&pauli::plus()),
        l2: dissipator(&pauli::minus()),
        l3: &Superoperator::conjugation(&pauli::z()) - &Superoperator::identity(2),
    }
}

/// `L_t = (γ(t)/2) L3`, whose map is [`pure_decoherence_map`].
pub fn pure_decoherence_spec(gamma: &RateFunction) -> GkslSpec {
    GkslSpec::dissipative(2, vec![(pauli::z(), gamma.scaled(0.5))]).expect("qubit spec")
}

/// `½(1 + e^{-Γ}) ρ + ½(1 - e^{-Γ}) σ_zρσ_z`: off-diagonals scale by `e^{-Γ(t)}`.
pub fn pure_decoherence_map(gamma: &RateFunction, t: f64) -> Superoperator {
    let e = (-gamma.primitive(t)).exp();
    &Superoperator::identity(2).scale(0.5 * (1.0 + e)) + &Superoperator::conjugation(&pauli::z()).scale(0.5 * (1.0 - e))
}

/// Qubit with `H = ω σ_z / 2`, pumping `σ₊` at `γ₁`, cooling `σ₋` at `γ₂` and
/// dephasing `(γ/2) L3`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PumpCoolParams {
    pub omega: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma: f64,
}

impl PumpCoolParams {
    /// Coherence damping rate `η = (γ₁ + γ₂)/2 + γ`.
    pub fn eta(&self) -> f64 {
        0.5 * (self.gamma1 + self.gamma2) + self.gamma
    }

    /// Stationary populations `(p₁*, p₂*)`. Pumping moves weight from `|1>`
    /// to `|2>`, so `p₁* = γ₂/(γ₁+γ₂)`.
    pub fn equilibrium(&self) -> Option<(f64, f64)> {
        let s = self.gamma1 + self.gamma2;
        (s > 0.0).then(|| (self.gamma2 / s, self.gamma1 / s))
    }
}

pub fn pump_cool_spec(p: &PumpCoolParams) -> GkslSpec {
    GkslSpec::new(
        pauli::z().scale_re(0.5 * p.omega),
        vec![
            Jump {
                operator: pauli::plus(),
                rate: RateFunction::constant(p.gamma1),
            },
            Jump {
                operator: pauli::minus(),
                rate: RateFunction::constant(p.gamma2),
            },
            Jump {
                operator: pauli::z(),
                rate: RateFunction::constant(0.5 * p.gamma),
            },
        ],
    )
    .expect("qubit spec")
}

/// Populations relax at rate `γ₁+γ₂`; the `σ₊` coefficient `α = ρ₂₁` evolves
/// as `e^{(iω - η)t}`.
pub fn pump_cool_solution(p: &PumpCoolParams, rho0: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
    if rho0.dim() != 2 {
        return Err(Error::Dimension("pump/cool model is a qubit".into()));
    }
    let r = rho0.matrix();
    let s = p.gamma1 + p.gamma2;
    let decay = (-s * t).exp();
    let p1_0 = r[(0, 0)].re;
    let p1 = match p.equilibrium() {
        Some((p1s, _)) => p1_0 * decay + p1s * (1.0 - decay),
        None => p1_0,
    };
    let alpha = r[(1, 0)] * (C64::new(-p.eta(), p.omega) * t).exp();
    let m = ComplexMatrix::from_fn(2, 2, |i, j| match (i, j) {
        (0, 0) => C64::new(p1, 0.0),
        (1, 1) => C64::new(1.0 - p1, 0.0),
        (1, 0) => alpha,
        _ => alpha.conj(),
    });
    DensityMatrix::with_tolerance(m, tol::HERM, tol::TRACE, 1e-8)
}

/// `L_t = ½ Σ_k γ_k(t)(σ_kρσ_k - ρ)`
pub fn random_unitary_spec(rates: &[RateFunction; 3]) -> GkslSpec {
    let [_, x, y, z] = pauli::all();
    GkslSpec::dissipative(
        2,
        vec![
            (x, rates[0].scaled(0.5)),
            (y, rates[1].scaled(0.5)),
            (z, rates[2].scaled(0.5)),
        ],
    )
    .expect("qubit spec")
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomUnitaryMap {
    pub map: Superoperator,
    /// `p₀..p₃`, weights of `σ_α · σ_α`.
    pub probabilities: [f64; 4],
    /// `λ_k` with `Λ_t(σ_k) = λ_k σ_k`.
    pub eigenvalues: [f64; 3],
}

pub fn random_unitary_map(rates: &[RateFunction; 3], t: f64) -> RandomUnitaryMap {
    let g = [rates[0].primitive(t), rates[1].primitive(t), rates[2].primitive(t)];
    let l = [(-g[1] - g[2]).exp(), (-g[0] - g[2]).exp(), (-g[0] - g[1]).exp()];
    let p = [
        0.25 * (1.0 + l[2] + l[1] + l[0]),
        0.25 * (1.0 - l[2] - l[1] + l[0]),
        0.25 * (1.0 - l[2] + l[1] - l[0]),
        0.25 * (1.0 + l[2] - l[1] - l[0]),
    ];
    let map = pauli::all()
        .iter()
        .zip(p)
        .fold(Superoperator::zero(2), |acc, (s, w)| &acc + &Superoperator::conjugation(s).scale(w));
    RandomUnitaryMap {
        map,
        probabilities: p,
        eigenvalues: l,
    }
}

/// A family `t -> ω_t` of Hermitian unit-trace matrices.
#[derive(Debug, Clone, PartialEq)]
pub enum OmegaFamily {
    Constant(ComplexMatrix),
    /// Linear interpolation between `(t_k, ω_k)`, held constant outside.
    Table(Vec<(f64, ComplexMatrix)>),
    /// `base + amplitude · sin^power(frequency · t) · direction`
    Pulse {
        base: ComplexMatrix,
        direction: ComplexMatrix,
        amplitude: f64,
        frequency: f64,
        power: i32,
    },
}

impl OmegaFamily {
    pub fn at(&self, t: f64) -> ComplexMatrix {
        match self {
            Self::Constant(w) => w.clone(),
            Self::Table(knots) => {
                let first = &knots[0];
                let last = &knots[knots.len() - 1];
                if t <= first.0 {
                    return first.1.clone();
                }
                if t >= last.0 {
                    return last.1.clone();
                }
                let i = knots.partition_point(|k| k.0 <= t) - 1;
                let (t0, w0) = &knots[i];
                let (t1, w1) = &knots[i + 1];
                let s = (t - t0) / (t1 - t0);
                &w0.scale_re(1.0 - s) + &w1.scale_re(s)
            }
            Self::Pulse {
                base,
                direction,
                amplitude,
                frequency,
                power,
            } => base + &direction.scale_re(amplitude * (frequency * t).sin().powi(*power)),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Constant(w) => w.rows(),
            Self::Table(knots) => knots.first().map(|k| k.1.rows()).unwrap_or(0),
            Self::Pulse { base, .. } => base.rows(),
        }
    }
}

/// `L_t(ρ) = γ(t)(ω_t Tr ρ - ρ)`
#[derive(Debug, Clone, PartialEq)]
pub struct TraceGenParams {
    pub gamma: RateFunction,
    pub omega: OmegaFamily,
}

impl TraceGenParams {
    /// Checks Hermiticity and unit trace of `ω_t` at the grid times.
    pub fn new(gamma: RateFunction, omega: OmegaFamily, check_grid: &TimeGrid) -> Result<Self> {
        gamma.validate()?;
        if let OmegaFamily::Table(knots) = &omega {
            if knots.is_empty() || knots.windows(2).any(|w| w[1].0 <= w[0].0) {
                return Err(Error::InvalidRate("omega table needs increasing times".into()));
            }
        }
        let n = omega.dim();
        for t in check_grid.times() {
            let w = omega.at(t);
            if w.rows() != n || !w.is_square() {
                return Err(Error::Dimension("omega family changes shape".into()));
            }
            let defect = w.hermitian_defect();
            if defect > tol::HERM {
                return Err(Error::NotHermitian(defect));
            }
            if (w.trace() - ONE).norm() > tol::TRACE {
                return Err(Error::NotAState(format!("Tr ω_t = {} at t = {t}", w.trace())));
            }
        }
        Ok(Self { gamma, omega })
    }

    /// `∫_a^b γ(τ) e^{Γ(τ)} ω_τ dτ`
    fn weighted_integral(&self, a: f64, b: f64) -> ComplexMatrix {
        let f = |s: f64| self.omega.at(s).scale_re(self.gamma.eval(s) * self.gamma.primitive(s).exp());
        integrate(&f, a, b, TOL_QUAD_FINE)
    }

    /// `Λ_t = e^{-Γ} 𝟙 + e^{-Γ}(∫₀ᵗ γ e^{Γ} ω) Tr`
    pub fn map(&self, t: f64) -> Superoperator {
        self.map_from_integral(t, &self.weighted_integral(0.0, t))
    }

    fn map_from_integral(&self, t: f64, m: &ComplexMatrix) -> Superoperator {
        let n = self.omega.dim();
        let e = (-self.gamma.primitive(t)).exp();
        let mm = m.scale_re(e);
        &Superoperator::identity(n).scale(e) + &Superoperator::from_fn(n, |x| mm.scale(x.trace()))
    }

    /// `Ω_t = (e^{Γ(t)} - 1)⁻¹ ∫₀ᵗ γ e^{Γ} ω`
    pub fn omega_bar(&self, t: f64) -> Result<ComplexMatrix> {
        self.omega_bar_from_integral(t, &self.weighted_integral(0.0, t))
    }

    fn omega_bar_from_integral(&self, t: f64, m: &ComplexMatrix) -> Result<ComplexMatrix> {
        let d = self.gamma.primitive(t).exp_m1();
        if d.abs() < TOL_DEGENERATE {
            return Err(Error::DegenerateTime { t });
        }
        Ok(m.scale_re(1.0 / d))
    }

    /// `Ω_{t_k}` on a grid, accumulating the integral interval by interval.
    /// Degenerate times give `None`.
    pub fn omega_bar_series(&self, grid: &TimeGrid) -> Vec<Option<ComplexMatrix>> {
        let times = grid.times();
        let n = self.omega.dim();
        let mut acc = ComplexMatrix::zeros(n, n);
        let mut out = Vec::with_capacity(times.len());
        out.push(self.omega_bar_from_integral(times[0], &acc).ok());
        for w in times.windows(2) {
            acc = &acc + &self.weighted_integral(w[0], w[1]);
            out.push(self.omega_bar_from_integral(w[1], &acc).ok());
        }
        out
    }

    /// `Λ_{t_k}` on a grid from the cumulative integral.
    pub fn map_series(&self, grid: &TimeGrid) -> Vec<Superoperator> {
        let times = grid.times();
        let n = self.omega.dim();
        let mut acc = ComplexMatrix::zeros(n, n);
        let mut out = vec![self.map_from_integral(0.0, &acc)];
        for w in times.windows(2) {
            acc = &acc + &self.weighted_integral(w[0], w[1]);
            out.push(self.map_from_integral(w[1], &acc));
        }
        out
    }
}

impl TimeLocalGenerator for TraceGenParams {
    fn dim(&self) -> usize {
        self.omega.dim()
    }

    fn at(&self, t: f64) -> Superoperator {
        let n = self.omega.dim();
        let w = self.omega.at(t);
        let l = &Superoperator::from_fn(n, |x| w.scale(x.trace())) - &Superoperator::identity(n);
        l.scale(self.gamma.eval(t))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceGenSolution {
    /// `Λ_t(ρ₀)`; a state whenever the map is legitimate at `t`.
    pub rho: ComplexMatrix,
    /// `Ω_t`, absent where `e^{Γ(t)} - 1` vanishes.
    pub omega_bar: Option<ComplexMatrix>,
}

/// `ρ_t = e^{-Γ}ρ + [1 - e^{-Γ}] Ω_t Tr ρ`
pub fn trace_gen_solution(p: &TraceGenParams, rho0: &DensityMatrix, t: f64) -> Result<TraceGenSolution> {
    if rho0.dim() != p.omega.dim() {
        return Err(Error::Dimension("initial state and omega family differ in dimension".into()));
    }
    let m = p.weighted_integral(0.0, t);
    let rho = p.map_from_integral(t, &m).apply(rho0.matrix())?;
    let omega_bar = match p.omega_bar_from_integral(t, &m) {
        Ok(w) => Some(w),
        Err(Error::DegenerateTime { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(TraceGenSolution { rho, omega_bar })
}

/// Time inside the window where the counterexample's `ω_t` is not a state.
pub const COUNTEREXAMPLE_T_STAR: f64 = 0.5;

/// `γ = 1`, `ω_t = ½I + ¾ sin³(πt) σ_x` on `[0, 2]` with 2000 steps. The
/// instantaneous `ω_t` leaves the state space around `t = ½` (eigenvalue
/// `-¼` there) while the running average `Ω_t` stays positive. The
/// constructor verifies both properties.
pub fn blp_counterexample_scenario() -> Result<(TraceGenParams, TimeGrid)> {
    let grid = TimeGrid::new(2.0, 2000)?;
    let omega = OmegaFamily::Pulse {
        base: ComplexMatrix::identity(2).scale_re(0.5),
        direction: pauli::x(),
        amplitude: 0.75,
        frequency: std::f64::consts::PI,
        power: 3,
    };
    let params = TraceGenParams::new(RateFunction::constant(1.0), omega, &grid)?;
    let star = linalg::min_eigenvalue(&params.omega.at(COUNTEREXAMPLE_T_STAR));
    if star >= 0.0 {
        return Err(Error::ConstructionFailed(format!(
            "ω_t* has min eigenvalue {star}, expected negative"
        )));
    }
    for (k, w) in params.omega_bar_series(&grid).into_iter().enumerate().skip(1) {
        let w = w.ok_or(Error::DegenerateTime { t: grid.t(k) })?;
        let min = linalg::min_eigenvalue(&w);
        if min < -tol::PSD {
            return Err(Error::ConstructionFailed(format!(
                "Ω_t has min eigenvalue {min} at t = {}",
                grid.t(k)
            )));
        }
    }
    Ok((params, grid))
}

/// Rates `a₁, a₂` of `X_t = a₁(t) L1 + a₂(t) L2` and the derived local
/// generator `L_t = b₁ L1 + b₂ L2` of `Λ_t = exp(A₁ L1 + A₂ L2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WilcoxPair {
    pub a1: RateFunction,
    pub a2: RateFunction,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct WilcoxValues {
    pub f: f64,
    pub b1: f64,
    pub b2: f64,
    pub big_b1: f64,
    pub big_b2: f64,
}

const SMALL_A: f64 = 1e-3;

/// `(A - 1 + e^{-A}) / A²`, by Taylor series near 0.
fn wilcox_kernel(a: f64) -> f64 {
    if a.abs() < SMALL_A {
        0.5 - a / 6.0 + a * a / 24.0 - a * a * a / 120.0
    } else {
        (a + (-a).exp_m1()) / (a * a)
    }
}

impl WilcoxPair {
    pub fn new(a1: RateFunction, a2: RateFunction) -> Self {
        Self { a1, a2 }
    }

    pub fn big_a1(&self, t: f64) -> f64 {
        self.a1.primitive(t)
    }

    pub fn big_a2(&self, t: f64) -> f64 {
        self.a2.primitive(t)
    }

    pub fn big_a(&self, t: f64) -> f64 {
        self.big_a1(t) + self.big_a2(t)
    }

    /// `W = a₁A₂ - a₂A₁`
    pub fn wronskian(&self, t: f64) -> f64 {
        self.a1.eval(t) * self.big_a2(t) - self.a2.eval(t) * self.big_a1(t)
    }

    /// Coefficient in `L_t = X_t - f (L1 - L2)`, from the Wilcox integral
    /// `L_t = ∫₀¹ e^{sZ} Ż e^{-sZ} ds`: `f = W (A - 1 + e^{-A}) / A²`.
    pub fn f(&self, t: f64) -> f64 {
        self.wronskian(t) * wilcox_kernel(self.big_a(t))
    }

    /// The closed form `e^{-A} W / A` quoted with the derivation. It does not
    /// reproduce `Λ̇_t Λ_t⁻¹`; kept for comparison.
    pub fn f_displayed(&self, t: f64) -> f64 {
        let a = self.big_a(t);
        if a == 0.0 {
            return 0.0;
        }
        (-a).exp() * self.wronskian(t) / a
    }

    pub fn b1(&self, t: f64) -> f64 {
        self.a1.eval(t) - self.f(t)
    }

    pub fn b2(&self, t: f64) -> f64 {
        self.a2.eval(t) + self.f(t)
    }

    /// `F(t) = ∫₀ᵗ f`
    pub fn big_f(&self, t: f64) -> f64 {
        integrate(&|s| self.f(s), 0.0, t, TOL_QUAD_FINE)
    }

    pub fn values(&self, t: f64) -> WilcoxValues {
        let f = self.f(t);
        let big_f = self.big_f(t);
        WilcoxValues {
            f,
            b1: self.a1.eval(t) - f,
            b2: self.a2.eval(t) + f,
            big_b1: self.big_a1(t) - big_f,
            big_b2: self.big_a2(t) + big_f,
        }
    }

    /// Values on every grid point, integrating `f` cumulatively.
    pub fn values_on(&self, grid: &TimeGrid) -> Vec<WilcoxValues> {
        let times = grid.times();
        let mut big_f = 0.0;
        let mut out = Vec::with_capacity(times.len());
        for (k, &t) in times.iter().enumerate() {
            if k > 0 {
                big_f += integrate(&|s| self.f(s), times[k - 1], t, TOL_QUAD_FINE);
            }
            let f = self.f(t);
            out.push(WilcoxValues {
                f,
                b1: self.a1.eval(t) - f,
                b2: self.a2.eval(t) + f,
                big_b1: self.big_a1(t) - big_f,
                big_b2: self.big_a2(t) + big_f,
            });
        }
        out
    }

    /// `Z_t = A₁(t) L1 + A₂(t) L2`
    pub fn exponent(&self, t: f64) -> Superoperator {
        let d = qubit_dissipators();
        &d.l1.scale(self.big_a1(t)) + &d.l2.scale(self.big_a2(t))
    }

    /// `X_t = a₁ L1 + a₂ L2` with closed-form integral `Z_t`.
    pub fn x_generator(&self) -> Combination {
        let d = qubit_dissipators();
        let (a1, a2) = (self.a1.clone(), self.a2.clone());
        let (p1, p2) = (self.a1.clone(), self.a2.clone());
        Combination::new(vec![
            (d.l1, Arc::new(move |t| a1.eval(t)) as ScalarFn),
            (d.l2, Arc::new(move |t| a2.eval(t)) as ScalarFn),
        ])
        .and_then(|c| {
            c.with_primitives(vec![
                Arc::new(move |t| p1.primitive(t)) as ScalarFn,
                Arc::new(move |t| p2.primitive(t)) as ScalarFn,
            ])
        })
        .expect("two qubit terms")
    }

    /// The local generator `L_t = b₁ L1 + b₂ L2 = X_t - f(t)[L1 - L2]`.
    pub fn local_generator(&self) -> Combination {
        let d = qubit_dissipators();
        let (s1, s2) = (self.clone(), self.clone());
        Combination::new(vec![
            (d.l1, Arc::new(move |t| s1.b1(t)) as ScalarFn),
            (d.l2, Arc::new(move |t| s2.b2(t)) as ScalarFn),
        ])
        .expect("two qubit terms")
    }
}

/// `(ν₁, ν₂)` with `exp(A₁L1 + A₂L2) = exp(ν₁L1) exp(ν₂L2)`.
pub fn lie_split(a1: f64, a2: f64) -> Result<(f64, f64)> {
    if a1 < 0.0 || a2 < 0.0 || !a1.is_finite() || !a2.is_finite() {
        return Err(Error::NegativeInput(format!("A1 = {a1}, A2 = {a2}")));
    }
    let a = a1 + a2;
    if a == 0.0 {
        return Ok((0.0, 0.0));
    }
    let nu1 = (a / (a1 * (-a).exp() + a2)).ln();
    let nu2 = ((a1 + a2 * a.exp()) / a).ln();
    Ok((nu1, nu2))
}

/// Solution of `L_t = b₁(t) L1 + b₂(t) L2`.
#[derive(Debug, Clone, PartialEq)]
pub struct FinalMap {
    pub map: Superoperator,
    /// `B(t) = ∫₀ᵗ (b₁ + b₂)`
    pub big_b: f64,
    /// Choi matrix assembled from its block form, independent of `map`.
    pub choi: ChoiMatrix,
    /// `Ω_t`, absent where `e^{2B} - 1` vanishes.
    pub omega_bar: Option<ComplexMatrix>,
}

/// Uses `b₁L1 + b₂L2 = b[ω_t Tr - 𝟙] - ¼ b L3` with `b = b₁ + b₂` and
/// `ω_t = diag(b₂, b₁)/b`. With `B = ∫b`:
///
/// `Λ_t(ρ) = ½e^{-B}[(1 + e^{B/2})ρ + (1 - e^{B/2})σ_zρσ_z] + e^{-B} M_t Tr ρ`,
/// `M_t = ∫₀ᵗ e^{B(τ)} diag(b₂, b₁) dτ = (e^B - 1) Ω_t`.
pub fn wilcox_final_map(b1: &dyn Fn(f64) -> f64, b2: &dyn Fn(f64) -> f64, t: f64) -> FinalMap {
    let big_b_at = |s: f64| integrate(&|u| b1(u) + b2(u), 0.0, s, TOL_QUAD_FINE);
    let big_b = big_b_at(t);
    // B(τ) inside the integrand needs its own quadrature.
    let m11 = integrate(&|tau| big_b_at(tau).exp() * b2(tau), 0.0, t, 1e-11);
    let m22 = integrate(&|tau| big_b_at(tau).exp() * b1(tau), 0.0, t, 1e-11);
    final_map_from_parts(big_b, m11, m22)
}

fn final_map_from_parts(big_b: f64, m11: f64, m22: f64) -> FinalMap {
    let e = (-big_b).exp();
    let e_half = (-0.5 * big_b).exp();
    let m = ComplexMatrix::diag(&[C64::new(e * m11, 0.0), C64::new(e * m22, 0.0)]);
    let map = &(&Superoperator::identity(2).scale(0.5 * (e + e_half))
        + &Superoperator::conjugation(&pauli::z()).scale(0.5 * (e - e_half)))
        + &Superoperator::from_fn(2, |x| m.scale(x.trace()));
    let mut c = ComplexMatrix::zeros(4, 4);
    c[(0, 0)] = C64::new(e + e * m11, 0.0);
    c[(1, 1)] = C64::new(e * m22, 0.0);
    c[(2, 2)] = C64::new(e * m11, 0.0);
    c[(3, 3)] = C64::new(e + e * m22, 0.0);
    c[(0, 3)] = C64::new(e_half, 0.0);
    c[(3, 0)] = C64::new(e_half, 0.0);
    let choi = ChoiMatrix::from_matrix(2, c.scale_re(0.5)).expect("4x4");
    let d = big_b.exp_m1();
    let omega_bar = (d.abs() >= TOL_DEGENERATE).then(|| m.scale_re(1.0 / (e * d)));
    FinalMap {
        map,
        big_b,
        choi,
        omega_bar,
    }
}

/// `Λ_{t_k}` of `b₁L1 + b₂L2` on a grid, with cumulative quadrature.
pub fn wilcox_final_series(b1: &dyn Fn(f64) -> f64, b2: &dyn Fn(f64) -> f64, grid: &TimeGrid) -> Vec<FinalMap> {
    let times = grid.times();
    let mut big_b = 0.0;
    let (mut m11, mut m22) = (0.0, 0.0);
    let mut out = vec![final_map_from_parts(0.0, 0.0, 0.0)];
    for w in times.windows(2) {
        let b_start = big_b;
        let t0 = w[0];
        let local_b = |tau: f64| b_start + integrate(&|u| b1(u) + b2(u), t0, tau, TOL_QUAD_FINE);
        m11 += integrate(&|tau| local_b(tau).exp() * b2(tau), w[0], w[1], 1e-12);
        m22 += integrate(&|tau| local_b(tau).exp() * b1(tau), w[0], w[1], 1e-12);
        big_b = local_b(w[1]);
        out.push(final_map_from_parts(big_b, m11, m22));
    }
    out
}

/// Rates `a₁, a₂` recovered from given `b₁, b₂ ≥ 0` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct InvertedPair {
    pub times: Vec<f64>,
    pub a1: Vec<f64>,
    pub a2: Vec<f64>,
    pub big_a1: Vec<f64>,
    pub big_a2: Vec<f64>,
    /// Largest fixed-point iteration count used at any grid point.
    pub max_iterations: usize,
}

pub const INVERSION_TOL: f64 = 1e-10;
pub const INVERSION_MAX_ITER: usize = 100;

/// Inverts `b₁ = a₁ - f[a]`, `b₂ = a₂ + f[a]` on the grid. Since
/// `a₁ + a₂ = b₁ + b₂`, `A = B` is known; at each grid point `a₁` is the
/// fixed point of `a₁ ← b₁ + f(a₁)` with `A₁` advanced by the trapezoid
/// rule. Iterates are Aitken-accelerated.
pub fn invert_wilcox(b1: &dyn Fn(f64) -> f64, b2: &dyn Fn(f64) -> f64, grid: &TimeGrid) -> Result<InvertedPair> {
    let times = grid.times();
    let n = times.len();
    let b = |t: f64| b1(t) + b2(t);
    let mut big_a = vec![0.0; n];
    for k in 1..n {
        big_a[k] = big_a[k - 1] + integrate(&|s| b(s), times[k - 1], times[k], TOL_QUAD_FINE);
    }
    let mut a1 = vec![b1(0.0); n];
    let mut big_a1 = vec![0.0; n];
    let mut max_iterations = 0;
    for k in 1..n {
        let h = times[k] - times[k - 1];
        let (ak, bk) = (big_a[k], b(times[k]));
        let step = |x: f64| -> f64 {
            let a1_int = big_a1[k - 1] + 0.5 * h * (a1[k - 1] + x);
            // W = a₁A - bA₁ once a₂ = b - a₁ and A₂ = A - A₁.
            let f = wilcox_kernel(ak) * (x * ak - bk * a1_int);
            b1(times[k]) + f
        };
        let mut x = a1[k - 1];
        let mut converged = false;
        let mut it = 0;
        while it < INVERSION_MAX_ITER {
            it += 1;
            let x1 = step(x);
            let x2 = step(x1);
            let denom = x2 - 2.0 * x1 + x;
            let next = if denom.abs() > 1e-300 {
                x - (x1 - x) * (x1 - x) / denom
            } else {
                x2
            };
            let done = (next - x).abs() <= INVERSION_TOL * (1.0 + next.abs());
            x = next;
            if done || (step(x) - x).abs() <= INVERSION_TOL {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::ConstructionFailed(format!(
                "b -> a inversion did not converge at t = {}",
                times[k]
            )));
        }
        max_iterations = max_iterations.max(it);
        a1[k] = x;
        big_a1[k] = big_a1[k - 1] + 0.5 * h * (a1[k - 1] + x);
    }
    let a2: Vec<f64> = times.iter().zip(&a1).map(|(&t, x)| b(t) - x).collect();
    let big_a2: Vec<f64> = big_a.iter().zip(&big_a1).map(|(a, x)| a - x).collect();
    Ok(InvertedPair {
        times,
        a1,
        a2,
        big_a1,
        big_a2,
        max_iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{choi_of, is_cp, is_tp};
    use crate::evolution::{semigroup_evolve, t_ordered_evolve};
    use crate::generator::gksl_build;
    use crate::state::{bloch_to_state, trace_distance, BlochVector};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn dissipator_algebra() {
        let d = qubit_dissipators();
        let c12 = Superoperator::commutator(&d.l1, &d.l2);
        assert!(c12.distance(&(&d.l1 - &d.l2)) < 1e-13);
        for la in [&d.l1, &d.l2, &d.l3] {
            assert!(Superoperator::commutator(&d.l0, la).distance(&Superoperator::zero(2)) < 1e-13);
            assert!(Superoperator::commutator(&d.l3, la).distance(&Superoperator::zero(2)) < 1e-13);
        }
        let sp = pauli::plus();
        assert!((&d.l3.apply(&sp).unwrap() - &sp.scale_re(-2.0)).max_abs() < 1e-15);
        let (p1, p2) = (ComplexMatrix::unit(2, 0, 0), ComplexMatrix::unit(2, 1, 1));
        assert!((&d.l1.apply(&p1).unwrap() - &(&p2 - &p1)).max_abs() < 1e-15);
    }

    #[test]
    fn pure_decoherence_cases() {
        let zero = RateFunction::constant(0.0);
        assert!(pure_decoherence_map(&zero, 3.0).distance(&Superoperator::identity(2)) < 1e-15);

        let g = RateFunction::constant(0.8);
        let l = gksl_build(&pure_decoherence_spec(&g), 0.0);
        let traj = semigroup_evolve(&l, TimeGrid::new(2.0, 4).unwrap());
        assert!(traj.last().distance(&pure_decoherence_map(&g, 2.0)) < 1e-12);

        let s = RateFunction::sinusoidal(1.0, 1.0, 0.0);
        let m = pure_decoherence_map(&s, PI);
        let out = m.apply(&pauli::x()).unwrap();
        assert_abs_diff_eq!(out[(0, 1)].re, (-2.0f64).exp(), epsilon = 1e-14);
    }

    #[test]
    fn pump_cool_solution_cases() {
        let p = PumpCoolParams {
            omega: 1.1,
            gamma1: 0.3,
            gamma2: 0.9,
            gamma: 0.2,
        };
        let rho0 = bloch_to_state(BlochVector::new(0.3, -0.4, 0.5)).unwrap();
        assert_eq!(pump_cool_solution(&p, &rho0, 0.0).unwrap(), rho0);

        let late = pump_cool_solution(&p, &rho0, 80.0).unwrap();
        assert_abs_diff_eq!(late.matrix()[(0, 0)].re, 0.75, epsilon = 1e-12);
        assert!(late.matrix()[(0, 1)].norm() < 1e-12);

        let sym = PumpCoolParams { gamma2: 0.3, ..p };
        let late = pump_cool_solution(&sym, &rho0, 80.0).unwrap();
        assert!((late.matrix() - DensityMatrix::maximally_mixed(2).matrix()).max_abs() < 1e-12);

        let l = gksl_build(&pump_cool_spec(&p), 0.0);
        let t = 1.7;
        let numeric = l.scale(t).exp().apply(rho0.matrix()).unwrap();
        let closed = pump_cool_solution(&p, &rho0, t).unwrap();
        assert!((&numeric - closed.matrix()).max_abs() < 1e-12);
    }

    #[test]
    fn random_unitary_cases() {
        let zero = [RateFunction::constant(0.0), RateFunction::constant(0.0), RateFunction::constant(0.0)];
        let r = random_unitary_map(&zero, 1.0);
        assert_eq!(r.probabilities, [1.0, 0.0, 0.0, 0.0]);
        assert!(r.map.distance(&Superoperator::identity(2)) < 1e-15);

        let big = [RateFunction::constant(50.0), RateFunction::constant(50.0), RateFunction::constant(50.0)];
        let r = random_unitary_map(&big, 1.0);
        for p in r.probabilities {
            assert_abs_diff_eq!(p, 0.25, epsilon = 1e-15);
        }

        let rates = [
            RateFunction::constant(0.4),
            RateFunction::exponential(1.0, 0.5),
            RateFunction::sinusoidal(0.3, 2.0, 0.1),
        ];
        let r = random_unitary_map(&rates, 1.3);
        let [_, x, ..] = pauli::all();
        assert!((&r.map.apply(&x).unwrap() - &x.scale_re(r.eigenvalues[0])).max_abs() < 1e-14);
        assert_abs_diff_eq!(r.probabilities.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
    }

    fn constant_trace_gen() -> TraceGenParams {
        let w = bloch_to_state(BlochVector::new(0.2, 0.1, -0.6)).unwrap();
        TraceGenParams::new(
            RateFunction::exponential(1.5, 0.4),
            OmegaFamily::Constant(w.into_matrix()),
            &TimeGrid::new(1.0, 4).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn trace_generator_with_constant_omega() {
        let p = constant_trace_gen();
        let rho = bloch_to_state(BlochVector::new(0.0, 0.7, 0.1)).unwrap();
        let t = 1.2;
        let sol = trace_gen_solution(&p, &rho, t).unwrap();
        let e = (-p.gamma.primitive(t)).exp();
        let w = p.omega.at(0.0);
        let expect = &rho.matrix().scale_re(e) + &w.scale_re(1.0 - e);
        assert!((&sol.rho - &expect).max_abs() < 1e-12);
        assert!((&sol.omega_bar.unwrap() - &w).max_abs() < 1e-12);

        let at_zero = trace_gen_solution(&p, &rho, 0.0).unwrap();
        assert!((&at_zero.rho - rho.matrix()).max_abs() < 1e-15);
        assert!(at_zero.omega_bar.is_none());
        assert!(matches!(p.omega_bar(0.0), Err(Error::DegenerateTime { .. })));
    }

    #[test]
    fn trace_generator_contracts_distances_uniformly() {
        let (p, _) = blp_counterexample_scenario().unwrap();
        let rho = bloch_to_state(BlochVector::new(0.5, 0.0, 0.5)).unwrap();
        let sigma = bloch_to_state(BlochVector::new(-0.3, 0.2, 0.0)).unwrap();
        let d0 = trace_distance(&rho, &sigma).unwrap();
        let t = 0.9;
        let m = p.map(t);
        let d = 0.5 * linalg::trace_norm(&m.apply(&(rho.matrix() - sigma.matrix())).unwrap()).unwrap();
        assert_abs_diff_eq!(d, (-t).exp() * d0, epsilon = 1e-12);
    }

    #[test]
    fn counterexample_properties() {
        let (p, grid) = blp_counterexample_scenario().unwrap();
        assert!(linalg::min_eigenvalue(&p.omega.at(COUNTEREXAMPLE_T_STAR)) < 0.0);
        for w in p.omega_bar_series(&grid).into_iter().skip(1) {
            let w = w.unwrap();
            assert!(linalg::min_eigenvalue(&w) >= -1e-9);
            assert_abs_diff_eq!(w.trace().re, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn trace_generator_map_matches_t_ordered() {
        let (p, _) = blp_counterexample_scenario().unwrap();
        let grid = TimeGrid::new(1.0, 400).unwrap();
        let traj = t_ordered_evolve(&p, grid);
        let series = p.map_series(&grid);
        assert!(traj.last().distance(&series[400]) < 1e-5);
        assert!(series[400].distance(&p.map(1.0)) < 1e-12);
    }

    #[test]
    fn proportional_rates_have_no_wronskian() {
        let w = WilcoxPair::new(RateFunction::exponential(1.0, 0.3), RateFunction::exponential(2.5, 0.3));
        for t in [0.0, 0.5, 1.7] {
            assert!(w.f(t).abs() < 1e-15);
            assert_abs_diff_eq!(w.b1(t), w.a1.eval(t), epsilon = 1e-15);
        }
    }

    #[test]
    fn linear_pair_plug_in_value() {
        let w = WilcoxPair::new(RateFunction::constant(1.0), RateFunction::polynomial(vec![0.0, 1.0]));
        assert_abs_diff_eq!(w.wronskian(1.0), -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(w.big_a(1.0), 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(w.f_displayed(1.0), (-1.5f64).exp() * (-1.0 / 3.0), epsilon = 1e-15);
        let kernel = (0.5 + (-1.5f64).exp()) / 2.25;
        assert_abs_diff_eq!(w.f(1.0), -0.5 * kernel, epsilon = 1e-15);
        let grid = TimeGrid::new(2.0, 20).unwrap();
        for (k, v) in w.values_on(&grid).into_iter().enumerate() {
            let t = grid.t(k);
            assert_abs_diff_eq!(v.big_b1 + v.big_b2, w.big_a(t), epsilon = 1e-13);
        }
    }

    #[test]
    fn local_generator_is_log_derivative() {
        let w = WilcoxPair::new(RateFunction::constant(1.0), RateFunction::polynomial(vec![0.0, 1.0]));
        let d = qubit_dissipators();
        let h = 1e-5;
        for t in [0.5, 1.0, 1.5] {
            let dl = (&w.exponent(t + h).exp() - &w.exponent(t - h).exp()).scale(0.5 / h);
            let (inv, _) = w.exponent(t).exp().inverse().unwrap();
            let l = dl.compose(&inv);
            let derived = &d.l1.scale(w.b1(t)) + &d.l2.scale(w.b2(t));
            assert!(l.distance(&derived) < 1e-8, "t={t}: {}", l.distance(&derived));
            let fd = w.f_displayed(t);
            let displayed = &d.l1.scale(w.a1.eval(t) - fd) + &d.l2.scale(w.a2.eval(t) + fd);
            assert!(l.distance(&displayed) > 1e-2);
        }
    }

    #[test]
    fn small_a_series_is_continuous() {
        for a in [1e-12f64, 1e-6, 0.999e-3, -0.5e-3] {
            let direct = (a - 1.0 + (-a).exp()) / (a * a);
            assert!((wilcox_kernel(a) - direct).abs() < 1e-16 / (a * a) + 1e-14);
        }
        assert!((wilcox_kernel(0.999e-3) - wilcox_kernel(1.001e-3)).abs() < 1e-6);
        let w = WilcoxPair::new(RateFunction::exponential(1.0, 2.0), RateFunction::sinusoidal(1.0, 3.0, 0.2));
        assert_eq!(w.f(0.0), 0.0);
    }

    #[test]
    fn lie_split_cases() {
        assert_eq!(lie_split(0.0, 0.0).unwrap(), (0.0, 0.0));
        let (n1, n2) = lie_split(1.3, 0.0).unwrap();
        assert_abs_diff_eq!(n1, 1.3, epsilon = 1e-15);
        assert_abs_diff_eq!(n2, 0.0, epsilon = 1e-15);
        let (n1, n2) = lie_split(0.0, 0.8).unwrap();
        assert_abs_diff_eq!(n1, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(n2, 0.8, epsilon = 1e-15);
        let (n1, n2) = lie_split(1.0, 1.0).unwrap();
        assert_abs_diff_eq!(n1, (2.0 / ((-2.0f64).exp() + 1.0)).ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(n2, ((1.0 + 2.0f64.exp()) / 2.0).ln(), epsilon = 1e-15);
        let d = qubit_dissipators();
        let lhs = (&d.l1 + &d.l2).exp();
        let rhs = d.l1.scale(n1).exp().compose(&d.l2.scale(n2).exp());
        assert!(lhs.distance(&rhs) < 1e-10);
        assert!(matches!(lie_split(-0.1, 1.0), Err(Error::NegativeInput(_))));
    }

    #[test]
    fn final_map_cases() {
        let zero = |_: f64| 0.0;
        assert!(wilcox_final_map(&zero, &zero, 1.0).map.distance(&Superoperator::identity(2)) < 1e-15);

        let (c1, c2) = (0.4, 0.7);
        let b1 = move |_: f64| c1;
        let b2 = move |_: f64| c2;
        let fm = wilcox_final_map(&b1, &b2, 1.5);
        assert!(fm.choi.min_eigenvalue() >= -1e-9);
        assert!((choi_of(&fm.map).matrix() - fm.choi.matrix()).max_abs() < 1e-14);
        assert!(is_cp(&fm.map, 1e-9).unwrap().is_cp());
        assert!(is_tp(&fm.map, 1e-12));
        let d = qubit_dissipators();
        let semigroup = (&d.l1.scale(c1) + &d.l2.scale(c2)).scale(1.5).exp();
        assert!(fm.map.distance(&semigroup) < 1e-10);
    }

    #[test]
    fn inversion_reproduces_rates() {
        let w = WilcoxPair::new(RateFunction::constant(1.0), RateFunction::polynomial(vec![0.0, 1.0]));
        let grid = TimeGrid::new(2.0, 400).unwrap();
        let (s1, s2) = (w.clone(), w.clone());
        let inv = invert_wilcox(&|t| s1.b1(t), &|t| s2.b2(t), &grid).unwrap();
        for (k, t) in grid.times().into_iter().enumerate() {
            assert!((inv.big_a1[k] - w.big_a1(t)).abs() < 1e-4, "t={t}");
            assert!((inv.big_a2[k] - w.big_a2(t)).abs() < 1e-4, "t={t}");
        }
    }
}
