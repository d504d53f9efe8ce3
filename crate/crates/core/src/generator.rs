//! GKSL generators: construction from a Hamiltonian and weighted jump
//! operators, the semigroup legitimacy test, and time-local generator families.

use std::sync::Arc;

use crate::channel::{self, max_entangled_projector, Superoperator};
use crate::error::{Error, Result};
use crate::linalg::{self, tol, ComplexMatrix, C64};
use crate::rates::RateFunction;

/// One dissipative channel `γ(t) (V · V^† - ½{V^†V, ·})`.
#[derive(Debug, Clone, PartialEq)]
pub struct Jump {
    pub operator: ComplexMatrix,
    pub rate: RateFunction,
}

/// Hamiltonian plus rate-weighted jump operators. Rates may take negative
/// values; legitimacy is judged on the resulting dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct GkslSpec {
    hamiltonian: ComplexMatrix,
    jumps: Vec<Jump>,
}

impl GkslSpec {
    pub fn new(hamiltonian: ComplexMatrix, jumps: Vec<Jump>) -> Result<Self> {
        if !hamiltonian.is_square() {
            return Err(Error::Dimension("Hamiltonian must be square".into()));
        }
        let defect = hamiltonian.hermitian_defect();
        if defect > tol::HERM {
            return Err(Error::NotHermitian(defect));
        }
        let n = hamiltonian.rows();
        for j in &jumps {
            if j.operator.rows() != n || j.operator.cols() != n {
                return Err(Error::Dimension(format!(
                    "jump operator {}x{} in a dimension-{n} spec",
                    j.operator.rows(),
                    j.operator.cols()
                )));
            }
            j.rate.validate()?;
        }
        Ok(Self { hamiltonian, jumps })
    }

    /// Von Neumann generator only.
    pub fn hamiltonian_only(hamiltonian: ComplexMatrix) -> Result<Self> {
        Self::new(hamiltonian, Vec::new())
    }

    pub fn dissipative(n: usize, jumps: Vec<(ComplexMatrix, RateFunction)>) -> Result<Self> {
        Self::new(
            ComplexMatrix::zeros(n, n),
            jumps
                .into_iter()
                .map(|(operator, rate)| Jump { operator, rate })
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.rows()
    }

    pub fn hamiltonian(&self) -> &ComplexMatrix {
        &self.hamiltonian
    }

    pub fn jumps(&self) -> &[Jump] {
        &self.jumps
    }

    pub fn rates_at(&self, t: f64) -> Vec<f64> {
        self.jumps.iter().map(|j| j.rate.eval(t)).collect()
    }

    pub fn is_time_independent(&self) -> bool {
        self.jumps.iter().all(|j| j.rate.is_constant())
    }
}

/// `ρ -> -i[H, ρ]`
pub fn hamiltonian_superop(h: &ComplexMatrix) -> Superoperator {
    let n = h.rows();
    let id = ComplexMatrix::identity(n);
    let m = &linalg::tensor(&id, h) - &linalg::tensor(&h.transpose(), &id);
    Superoperator::from_matrix(n, m.scale(C64::new(0.0, -1.0))).expect("square Hamiltonian")
}

/// `ρ -> VρV^† - ½{V^†V, ρ}`
pub fn dissipator(v: &ComplexMatrix) -> Superoperator {
    let vv = &v.adjoint() * v;
    let anti = &Superoperator::left(&vv) + &Superoperator::right(&vv);
    &Superoperator::conjugation(v) - &anti.scale(0.5)
}

/// Superoperator of `L_t` for the given spec.
pub fn gksl_build(spec: &GkslSpec, t: f64) -> Superoperator {
    spec.jumps.iter().fold(hamiltonian_superop(&spec.hamiltonian), |acc, j| {
        &acc + &dissipator(&j.operator).scale(j.rate.eval(t))
    })
}

/// Which of the three semigroup-generator conditions failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GkslCondition {
    HermiticityPreserving,
    TraceAnnihilating,
    ConditionalCp,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GkslVerdict {
    Gksl,
    Fails { condition: GkslCondition, value: f64 },
}

impl GkslVerdict {
    pub fn is_gksl(&self) -> bool {
        matches!(self, GkslVerdict::Gksl)
    }
}

/// Semigroup-generator test: Hermiticity preservation, `L*(I) = 0`, and
/// positivity of the Choi matrix compressed by `Q = I - P⁺`. On conditional
/// CP failure `value` is the offending eigenvalue.
pub fn is_gksl(l: &Superoperator, tol: f64) -> GkslVerdict {
    let n = l.dim();
    let herm = l.hermiticity_defect();
    if herm > tol {
        return GkslVerdict::Fails {
            condition: GkslCondition::HermiticityPreserving,
            value: herm,
        };
    }
    let id = ComplexMatrix::identity(n);
    let tr = channel::dual(l).apply(&id).expect("dims").max_abs();
    if tr > tol {
        return GkslVerdict::Fails {
            condition: GkslCondition::TraceAnnihilating,
            value: tr,
        };
    }
    let min = conditional_cp_min_eig(l);
    if min < -tol {
        return GkslVerdict::Fails {
            condition: GkslCondition::ConditionalCp,
            value: min,
        };
    }
    GkslVerdict::Gksl
}

/// Smallest eigenvalue of `Q (1 ⊗ L)(P⁺) Q` with `Q = I - P⁺`.
pub fn conditional_cp_min_eig(l: &Superoperator) -> f64 {
    let n = l.dim();
    let q = &ComplexMatrix::identity(n * n) - &max_entangled_projector(n);
    let c = channel::choi_of(l);
    linalg::min_eigenvalue(&(&(&q * c.matrix()) * &q))
}

/// Heisenberg-picture generator.
pub fn dual_generator(l: &Superoperator) -> Superoperator {
    channel::dual(l)
}

/// A family `t -> L_t` of generators on `M_n`.
pub trait TimeLocalGenerator: Send + Sync {
    fn dim(&self) -> usize;

    fn at(&self, t: f64) -> Superoperator;

    /// `∫₀ᵗ L_u du` when it has a closed form.
    fn integral(&self, _t: f64) -> Option<Superoperator> {
        None
    }

    /// Whether `L_t` is known to be constant in time.
    fn is_constant(&self) -> bool {
        false
    }
}

impl TimeLocalGenerator for GkslSpec {
    fn dim(&self) -> usize {
        GkslSpec::dim(self)
    }

    fn at(&self, t: f64) -> Superoperator {
        gksl_build(self, t)
    }

    fn integral(&self, t: f64) -> Option<Superoperator> {
        if !self.jumps.iter().all(|j| j.rate.has_analytic_primitive()) {
            return None;
        }
        Some(self.jumps.iter().fold(hamiltonian_superop(&self.hamiltonian).scale(t), |acc, j| {
            &acc + &dissipator(&j.operator).scale(j.rate.primitive(t))
        }))
    }

    fn is_constant(&self) -> bool {
        self.is_time_independent()
    }
}

/// A time-independent generator.
#[derive(Debug, Clone, PartialEq)]
pub struct Constant(pub Superoperator);

impl TimeLocalGenerator for Constant {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn at(&self, _t: f64) -> Superoperator {
        self.0.clone()
    }

    fn integral(&self, t: f64) -> Option<Superoperator> {
        Some(self.0.scale(t))
    }

    fn is_constant(&self) -> bool {
        true
    }
}

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// `L_t = Σ_k c_k(t) L_k` for fixed superoperators `L_k`.
#[derive(Clone)]
pub struct Combination {
    terms: Vec<(Superoperator, ScalarFn)>,
    primitives: Option<Vec<ScalarFn>>,
}

impl Combination {
    pub fn new(terms: Vec<(Superoperator, ScalarFn)>) -> Result<Self> {
        let Some(n) = terms.first().map(|t| t.0.dim()) else {
            return Err(Error::Dimension("empty generator combination".into()));
        };
        if terms.iter().any(|t| t.0.dim() != n) {
            return Err(Error::Dimension("generator terms of different dimension".into()));
        }
        Ok(Self { terms, primitives: None })
    }

    /// Attaches `C_k(t) = ∫₀ᵗ c_k` so `integral` is available.
    pub fn with_primitives(mut self, primitives: Vec<ScalarFn>) -> Result<Self> {
        if primitives.len() != self.terms.len() {
            return Err(Error::Dimension("one primitive per term required".into()));
        }
        self.primitives = Some(primitives);
        Ok(self)
    }

    fn weighted(&self, weights: impl Iterator<Item = f64>) -> Superoperator {
        let n = self.terms[0].0.dim();
        self.terms
            .iter()
            .zip(weights)
            .fold(Superoperator::zero(n), |acc, ((l, _), w)| &acc + &l.scale(w))
    }
}

impl std::fmt::Debug for Combination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Combination")
            .field("terms", &self.terms.len())
            .field("has_primitives", &self.primitives.is_some())
            .finish()
    }
}

impl TimeLocalGenerator for Combination {
    fn dim(&self) -> usize {
        self.terms[0].0.dim()
    }

    fn at(&self, t: f64) -> Superoperator {
        self.weighted(self.terms.iter().map(|(_, c)| c(t)))
    }

    fn integral(&self, t: f64) -> Option<Superoperator> {
        self.primitives.as_ref().map(|ps| self.weighted(ps.iter().map(|p| p(t))))
    }
}
