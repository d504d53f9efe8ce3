//! Linear maps on `M_n` and their Choi, Kraus and dilation representations.

use std::ops::{Add, Sub};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{self, tol, ComplexMatrix, C64, ONE, ZERO};
use crate::state::DensityMatrix;

/// A linear map on `M_n`, stored as its `n² x n²` matrix on column-stacked
/// operators.
#[derive(Debug, Clone, PartialEq)]
pub struct Superoperator {
    dim: usize,
    matrix: ComplexMatrix,
}

impl Superoperator {
    pub fn from_matrix(dim: usize, matrix: ComplexMatrix) -> Result<Self> {
        if matrix.rows() != dim * dim || matrix.cols() != dim * dim {
            return Err(Error::Dimension(format!(
                "superoperator on M_{dim} needs a {0}x{0} matrix, got {1}x{2}",
                dim * dim,
                matrix.rows(),
                matrix.cols()
            )));
        }
        Ok(Self { dim, matrix })
    }

    /// Tabulates an arbitrary linear action by evaluating it on the `e_ij` basis.
    pub fn from_fn(dim: usize, f: impl Fn(&ComplexMatrix) -> ComplexMatrix) -> Self {
        let n2 = dim * dim;
        let mut m = ComplexMatrix::zeros(n2, n2);
        for j in 0..dim {
            for i in 0..dim {
                let col = linalg::vectorize(&f(&ComplexMatrix::unit(dim, i, j)));
                let c = j * dim + i;
                for (r, v) in col.into_iter().enumerate() {
                    m[(r, c)] = v;
                }
            }
        }
        Self { dim, matrix: m }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            matrix: ComplexMatrix::identity(dim * dim),
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            matrix: ComplexMatrix::zeros(dim * dim, dim * dim),
        }
    }

    /// `X -> A X B`
    pub fn sandwich(a: &ComplexMatrix, b: &ComplexMatrix) -> Self {
        Self {
            dim: a.rows(),
            matrix: linalg::tensor(&b.transpose(), a),
        }
    }

    /// `X -> K X K^†`
    pub fn conjugation(k: &ComplexMatrix) -> Self {
        Self::sandwich(k, &k.adjoint())
    }

    /// `X -> A X`
    pub fn left(a: &ComplexMatrix) -> Self {
        Self::sandwich(a, &ComplexMatrix::identity(a.rows()))
    }

    /// `X -> X B`
    pub fn right(b: &ComplexMatrix) -> Self {
        Self::sandwich(&ComplexMatrix::identity(b.rows()), b)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn apply(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        if x.rows() != self.dim || x.cols() != self.dim {
            return Err(Error::Dimension(format!(
                "map on M_{} applied to {}x{} matrix",
                self.dim,
                x.rows(),
                x.cols()
            )));
        }
        linalg::devectorize(&self.matrix.matvec(&linalg::vectorize(x)))
    }

    /// `self ∘ other`
    pub fn compose(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "composing maps of different dimension");
        Self {
            dim: self.dim,
            matrix: &self.matrix * &other.matrix,
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            matrix: self.matrix.scale_re(s),
        }
    }

    /// `[A, B] = A∘B - B∘A`
    pub fn commutator(a: &Self, b: &Self) -> Self {
        &a.compose(b) - &b.compose(a)
    }

    pub fn exp(&self) -> Self {
        Self {
            dim: self.dim,
            matrix: linalg::matrix_exp(&self.matrix).expect("superoperator matrix is square"),
        }
    }

    pub fn inverse(&self) -> Result<(Self, f64)> {
        let (inv, cond) = linalg::inverse_with_condition(&self.matrix)?;
        Ok((Self { dim: self.dim, matrix: inv }, cond))
    }

    /// Max-norm distance between the matrices of two maps.
    pub fn distance(&self, other: &Self) -> f64 {
        (&self.matrix - &other.matrix).max_abs()
    }

    /// Largest `|Φ(e_ij)^† - Φ(e_ji)|`; zero for Hermiticity-preserving maps.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim;
        let mut d: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                // Φ(e_ij) is column j*n+i; Φ(e_ji) is column i*n+j.
                for a in 0..n {
                    for b in 0..n {
                        let lhs = self.matrix[(b * n + a, j * n + i)].conj();
                        let rhs = self.matrix[(a * n + b, i * n + j)];
                        d = d.max((lhs - rhs).norm());
                    }
                }
            }
        }
        d
    }

    pub fn is_hermiticity_preserving(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }
}

impl Add for &Superoperator {
    type Output = Superoperator;
    fn add(self, rhs: Self) -> Superoperator {
        assert_eq!(self.dim, rhs.dim);
        Superoperator {
            dim: self.dim,
            matrix: &self.matrix + &rhs.matrix,
        }
    }
}

impl Sub for &Superoperator {
    type Output = Superoperator;
    fn sub(self, rhs: Self) -> Superoperator {
        assert_eq!(self.dim, rhs.dim);
        Superoperator {
            dim: self.dim,
            matrix: &self.matrix - &rhs.matrix,
        }
    }
}

/// `(1_n ⊗ Φ)(P⁺_n)` with `Tr P⁺_n = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiMatrix {
    dim: usize,
    matrix: ComplexMatrix,
}

impl ChoiMatrix {
    pub fn from_matrix(dim: usize, matrix: ComplexMatrix) -> Result<Self> {
        if matrix.rows() != dim * dim || !matrix.is_square() {
            return Err(Error::Dimension(format!(
                "Choi matrix for M_{dim} must be {0}x{0}",
                dim * dim
            )));
        }
        Ok(Self { dim, matrix })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// Spectrum of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::hermitian_eigs(&self.matrix.hermitian_part(), f64::INFINITY)
            .expect("Hermitian part")
            .values
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::min_eigenvalue(&self.matrix)
    }
}

/// Maximally entangled projector `P⁺_n = |ψ⁺><ψ⁺|`, `ψ⁺ = Σ e_k ⊗ e_k / √n`.
pub fn max_entangled_projector(n: usize) -> ComplexMatrix {
    let mut p = ComplexMatrix::zeros(n * n, n * n);
    for a in 0..n {
        for b in 0..n {
            p[(a * n + a, b * n + b)] = C64::new(1.0 / n as f64, 0.0);
        }
    }
    p
}

pub fn choi_of(phi: &Superoperator) -> ChoiMatrix {
    let n = phi.dim;
    let mut c = ComplexMatrix::zeros(n * n, n * n);
    let w = 1.0 / n as f64;
    for i in 0..n {
        for j in 0..n {
            // block (i, j) = Φ(e_ij) / n; Φ(e_ij)[a, b] = matrix[b*n + a, j*n + i]
            for a in 0..n {
                for b in 0..n {
                    c[(i * n + a, j * n + b)] = phi.matrix[(b * n + a, j * n + i)] * w;
                }
            }
        }
    }
    ChoiMatrix { dim: n, matrix: c }
}

pub fn superop_from_choi(c: &ChoiMatrix) -> Superoperator {
    let n = c.dim;
    let mut m = ComplexMatrix::zeros(n * n, n * n);
    let w = n as f64;
    for i in 0..n {
        for j in 0..n {
            for a in 0..n {
                for b in 0..n {
                    m[(b * n + a, j * n + i)] = c.matrix[(i * n + a, j * n + b)] * w;
                }
            }
        }
    }
    Superoperator { dim: n, matrix: m }
}

/// Outcome of the Choi positivity test. Both arms carry the minimum Choi
/// eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CpVerdict {
    Cp { min_eig: f64 },
    NotCp { min_eig: f64 },
}

impl CpVerdict {
    pub fn is_cp(&self) -> bool {
        matches!(self, CpVerdict::Cp { .. })
    }

    pub fn min_eig(&self) -> f64 {
        match *self {
            CpVerdict::Cp { min_eig } | CpVerdict::NotCp { min_eig } => min_eig,
        }
    }
}

fn require_hermiticity_preserving(phi: &Superoperator) -> Result<()> {
    let defect = phi.hermiticity_defect();
    if defect > tol::HERM * phi.matrix.max_abs().max(1.0) {
        return Err(Error::NotHermiticityPreserving(defect));
    }
    Ok(())
}

/// Complete positivity via the minimum eigenvalue of the Choi matrix.
pub fn is_cp(phi: &Superoperator, tol: f64) -> Result<CpVerdict> {
    require_hermiticity_preserving(phi)?;
    let min_eig = choi_of(phi).min_eigenvalue();
    Ok(if min_eig >= -tol {
        CpVerdict::Cp { min_eig }
    } else {
        CpVerdict::NotCp { min_eig }
    })
}

/// Largest deviation of `Tr Φ(e_ij)` from `δ_ij`.
pub fn trace_defect(phi: &Superoperator) -> f64 {
    let n = phi.dim;
    let mut d: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let tr: C64 = (0..n).map(|a| phi.matrix[(a * n + a, j * n + i)]).sum();
            let expect = if i == j { ONE } else { ZERO };
            d = d.max((tr - expect).norm());
        }
    }
    d
}

pub fn is_tp(phi: &Superoperator, tol: f64) -> bool {
    trace_defect(phi) <= tol
}

pub fn unitality_defect(phi: &Superoperator) -> f64 {
    let n = phi.dim;
    let id = ComplexMatrix::identity(n);
    (&phi.apply(&id).expect("dims match") - &id).max_abs()
}

pub fn is_unital(phi: &Superoperator, tol: f64) -> bool {
    unitality_defect(phi) <= tol
}

/// Hilbert–Schmidt adjoint: the matrix adjoint of the superoperator matrix.
pub fn dual(phi: &Superoperator) -> Superoperator {
    Superoperator {
        dim: phi.dim,
        matrix: phi.matrix.adjoint(),
    }
}

/// Operators `K_α` of `Φ(X) = Σ K_α X K_α^†`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausSet {
    pub operators: Vec<ComplexMatrix>,
}

impl KrausSet {
    pub fn new(operators: Vec<ComplexMatrix>) -> Result<Self> {
        let n = operators.first().map(|k| k.rows()).unwrap_or(0);
        if operators.iter().any(|k| k.rows() != n || k.cols() != n) {
            return Err(Error::Dimension("Kraus operators must share one square shape".into()));
        }
        Ok(Self { operators })
    }

    pub fn rank(&self) -> usize {
        self.operators.len()
    }

    pub fn to_superop(&self, dim: usize) -> Superoperator {
        self.operators
            .iter()
            .fold(Superoperator::zero(dim), |acc, k| &acc + &Superoperator::conjugation(k))
    }

    /// `max |Σ K^† K - I|`
    pub fn completeness_defect(&self) -> f64 {
        let Some(first) = self.operators.first() else {
            return f64::INFINITY;
        };
        let n = first.rows();
        let sum = self
            .operators
            .iter()
            .fold(ComplexMatrix::zeros(n, n), |acc, k| &acc + &(&k.adjoint() * k));
        (&sum - &ComplexMatrix::identity(n)).max_abs()
    }

    pub fn is_trace_preserving(&self, tol: f64) -> bool {
        self.completeness_defect() <= tol
    }
}

/// Spectral Kraus decomposition `K_α = √(n λ_α) devec(v_α)`. Eigenvalues at
/// or below `tol` are dropped, so the retained count is the numerical rank.
pub fn kraus_from_choi(c: &ChoiMatrix, tol: f64) -> Result<KrausSet> {
    let n = c.dim;
    let eig = linalg::hermitian_eigs(&c.matrix.hermitian_part(), f64::INFINITY)?;
    if eig.min() < -tol {
        return Err(Error::NotCp { min_eig: eig.min() });
    }
    let mut ops = Vec::new();
    for (k, &lambda) in eig.values.iter().enumerate().rev() {
        if lambda <= tol {
            continue;
        }
        let s = (n as f64 * lambda).sqrt();
        let v: Vec<C64> = eig.vector(k).iter().map(|z| z * s).collect();
        ops.push(linalg::devectorize(&v)?);
    }
    Ok(KrausSet { operators: ops })
}

pub fn choi_from_kraus(k: &KrausSet) -> ChoiMatrix {
    let n = k.operators.first().map(|m| m.rows()).unwrap_or(0);
    let mut c = ComplexMatrix::zeros(n * n, n * n);
    for op in &k.operators {
        let v = linalg::vectorize(op);
        c = &c + &ComplexMatrix::outer(&v, &v);
    }
    ChoiMatrix {
        dim: n,
        matrix: c.scale_re(1.0 / n as f64),
    }
}

/// `ρ -> Tr_E[U (ρ ⊗ ω) U^†]` with `U` on `C^n ⊗ C^m` (system first).
pub fn dilation_channel(u: &ComplexMatrix, omega: &DensityMatrix) -> Result<Superoperator> {
    let m = omega.dim();
    if !u.is_square() || u.rows() % m != 0 {
        return Err(Error::Dimension(format!(
            "dilation unitary {}x{} incompatible with environment dim {m}",
            u.rows(),
            u.cols()
        )));
    }
    let defect = linalg::unitarity_defect(u);
    if defect > 1e-10 {
        return Err(Error::NotUnitary(defect));
    }
    let n = u.rows() / m;
    let ud = u.adjoint();
    Ok(Superoperator::from_fn(n, |x| {
        let joint = &(u * &linalg::tensor(x, omega.matrix())) * &ud;
        linalg::partial_trace_second(&joint, n, m).expect("dims checked")
    }))
}

/// Kraus operators `K_{ab} = √λ_b <E_a| U |E_b>` of a dilation, with `{E_b}`
/// the eigenbasis of the environment state.
pub fn dilation_kraus(u: &ComplexMatrix, omega: &DensityMatrix) -> Result<KrausSet> {
    let m = omega.dim();
    let n = u.rows() / m;
    let eig = linalg::hermitian_eigs(omega.matrix(), f64::INFINITY)?;
    let mut ops = Vec::new();
    for b in 0..m {
        let lambda = eig.values[b].max(0.0);
        if lambda == 0.0 {
            continue;
        }
        let eb = eig.vector(b);
        for a in 0..m {
            let ea = eig.vector(a);
            let k = ComplexMatrix::from_fn(n, n, |i, j| {
                let mut s = ZERO;
                for p in 0..m {
                    for q in 0..m {
                        s += ea[p].conj() * u[(i * m + p, j * m + q)] * eb[q];
                    }
                }
                s * lambda.sqrt()
            });
            ops.push(k);
        }
    }
    KrausSet::new(ops)
}

/// `1_k ⊗ Φ` applied to an operator on `C^k ⊗ C^n`, block by block.
pub fn apply_extended(phi: &Superoperator, k: usize, x: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = phi.dim;
    if x.rows() != k * n || !x.is_square() {
        return Err(Error::Dimension(format!(
            "1_{k} ⊗ Φ on M_{n} applied to {}x{}",
            x.rows(),
            x.cols()
        )));
    }
    let mut out = ComplexMatrix::zeros(k * n, k * n);
    for bi in 0..k {
        for bj in 0..k {
            let block = ComplexMatrix::from_fn(n, n, |a, b| x[(bi * n + a, bj * n + b)]);
            let img = phi.apply(&block)?;
            for a in 0..n {
                for b in 0..n {
                    out[(bi * n + a, bj * n + b)] = img[(a, b)];
                }
            }
        }
    }
    Ok(out)
}

/// `Φ₁ ⊗ Φ₂` on `M_{n1 n2}`.
pub fn tensor_superop(phi1: &Superoperator, phi2: &Superoperator) -> Superoperator {
    let (n1, n2) = (phi1.dim, phi2.dim);
    Superoperator::from_fn(n1 * n2, |e| {
        // e is a single elementary matrix of M_{n1 n2}
        let (mut r, mut c) = (0, 0);
        for i in 0..n1 * n2 {
            for j in 0..n1 * n2 {
                if e[(i, j)] != ZERO {
                    r = i;
                    c = j;
                }
            }
        }
        let a = ComplexMatrix::unit(n1, r / n2, c / n2);
        let b = ComplexMatrix::unit(n2, r % n2, c % n2);
        linalg::tensor(
            &phi1.apply(&a).expect("dims"),
            &phi2.apply(&b).expect("dims"),
        )
    })
}

/// `T_n(X) = X^T`
pub fn transpose_map(n: usize) -> Superoperator {
    Superoperator::from_fn(n, ComplexMatrix::transpose)
}

/// `R_n(X) = (I Tr X - X) / (n - 1)`
pub fn reduction_map(n: usize) -> Result<Superoperator> {
    if n < 2 {
        return Err(Error::Dimension("reduction map needs n >= 2".into()));
    }
    let id = ComplexMatrix::identity(n);
    Ok(Superoperator::from_fn(n, |x| {
        (&id.scale(x.trace()) - x).scale_re(1.0 / (n as f64 - 1.0))
    }))
}

/// `X -> Σ_k P_k X P_k`, projection onto the diagonal.
pub fn diagonal_projector(n: usize) -> Superoperator {
    Superoperator::from_fn(n, |x| {
        ComplexMatrix::from_fn(n, n, |i, j| if i == j { x[(i, i)] } else { ZERO })
    })
}

pub fn unitary_conjugation(u: &ComplexMatrix) -> Result<Superoperator> {
    let defect = linalg::unitarity_defect(u);
    if defect > 1e-10 {
        return Err(Error::NotUnitary(defect));
    }
    Ok(Superoperator::conjugation(u))
}

/// `X -> Σ p_k U_k X U_k^†`
pub fn random_unitary_mix(probabilities: &[f64], unitaries: &[ComplexMatrix]) -> Result<Superoperator> {
    if probabilities.len() != unitaries.len() || probabilities.is_empty() {
        return Err(Error::BadProbabilityVector(format!(
            "{} probabilities for {} unitaries",
            probabilities.len(),
            unitaries.len()
        )));
    }
    if let Some(p) = probabilities.iter().find(|p| **p < 0.0 || !p.is_finite()) {
        return Err(Error::BadProbabilityVector(format!("entry {p} is not a probability")));
    }
    let total: f64 = probabilities.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::BadProbabilityVector(format!("sums to {total}")));
    }
    let n = unitaries[0].rows();
    let mut acc = Superoperator::zero(n);
    for (p, u) in probabilities.iter().zip(unitaries) {
        if u.rows() != n {
            return Err(Error::Dimension("unitaries of different sizes".into()));
        }
        acc = &acc + &unitary_conjugation(u)?.scale(*p);
    }
    Ok(acc)
}

/// Result of the randomized search for a state that `Φ` maps outside the
/// positive cone.
#[derive(Debug, Clone, PartialEq)]
pub enum PositivityVerdict {
    /// The search found nothing. This does not certify positivity.
    NoCounterexampleFound { best_min_eig: f64 },
    NotPositive { witness: ComplexMatrix, min_eig: f64 },
}

fn random_vector<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..2 * n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn pure_from_params(p: &[f64]) -> ComplexMatrix {
    let n = p.len() / 2;
    let v: Vec<C64> = (0..n).map(|k| C64::new(p[2 * k], p[2 * k + 1])).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(1e-300);
    let v: Vec<C64> = v.iter().map(|z| z / norm).collect();
    ComplexMatrix::outer(&v, &v)
}

/// Searches pure states `|x><x|` for one whose image has a negative
/// eigenvalue below `-tol`: `10 * samples` Gaussian restarts, each refined by
/// Nelder–Mead on the real and imaginary parts of `x`.
pub fn positivity_refute<R: Rng>(
    phi: &Superoperator,
    samples: usize,
    rng: &mut R,
    tol: f64,
) -> Result<PositivityVerdict> {
    require_hermiticity_preserving(phi)?;
    let n = phi.dim;
    let objective = |p: &[f64]| -> f64 {
        let img = phi.apply(&pure_from_params(p)).expect("dims");
        linalg::min_eigenvalue(&img)
    };
    let mut best = f64::INFINITY;
    for _ in 0..10 * samples.max(1) {
        let start = random_vector(n, rng);
        let (p, val) = nelder_mead(&objective, &start, 0.25, 60 * n, tol * 1e-3);
        best = best.min(val);
        if val < -tol {
            return Ok(PositivityVerdict::NotPositive {
                witness: pure_from_params(&p),
                min_eig: val,
            });
        }
    }
    Ok(PositivityVerdict::NoCounterexampleFound { best_min_eig: best })
}

fn nelder_mead(f: &impl Fn(&[f64]) -> f64, start: &[f64], step: f64, max_iter: usize, ftol: f64) -> (Vec<f64>, f64) {
    let d = start.len();
    let mut simplex: Vec<Vec<f64>> = vec![start.to_vec()];
    for i in 0..d {
        let mut p = start.to_vec();
        p[i] += step;
        simplex.push(p);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| f(p)).collect();

    for _ in 0..max_iter {
        let mut order: Vec<usize> = (0..=d).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        if (values[d] - values[0]).abs() <= ftol {
            break;
        }
        let centroid: Vec<f64> = (0..d)
            .map(|k| simplex[..d].iter().map(|p| p[k]).sum::<f64>() / d as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[d])
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };
        let xr = along(-1.0);
        let fr = f(&xr);
        if fr < values[0] {
            let xe = along(-2.0);
            let fe = f(&xe);
            if fe < fr {
                simplex[d] = xe;
                values[d] = fe;
            } else {
                simplex[d] = xr;
                values[d] = fr;
            }
        } else if fr < values[d - 1] {
            simplex[d] = xr;
            values[d] = fr;
        } else {
            let xc = if fr < values[d] { along(-0.5) } else { along(0.5) };
            let fc = f(&xc);
            if fc < values[d].min(fr) {
                simplex[d] = xc;
                values[d] = fc;
            } else {
                let best = simplex[0].clone();
                for i in 1..=d {
                    simplex[i] = best
                        .iter()
                        .zip(&simplex[i])
                        .map(|(b, p)| b + 0.5 * (p - b))
                        .collect();
                    values[i] = f(&simplex[i]);
                }
            }
        }
    }
    let (i, v) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, v)| (i, *v))
        .unwrap_or((0, f64::INFINITY));
    (simplex[i].clone(), v)
}
