//! Seeded random matrices, states and channels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::channel::{dilation_channel, Superoperator};
use crate::linalg::{ComplexMatrix, C64};
use crate::state::DensityMatrix;

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian<R: Rng>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn ginibre<R: Rng>(n: usize, rng: &mut R) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, n, |_, _| gaussian(rng))
}

/// Haar-distributed unitary: Gram–Schmidt QR of a Ginibre matrix with the
/// phases of `R`'s diagonal absorbed into `Q`.
pub fn haar_unitary<R: Rng>(n: usize, rng: &mut R) -> ComplexMatrix {
    let g = ginibre(n, rng);
    let mut q: Vec<Vec<C64>> = Vec::with_capacity(n);
    for j in 0..n {
        let mut v = g.column(j);
        for _ in 0..2 {
            for u in &q {
                let proj: C64 = u.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                for (vi, ui) in v.iter_mut().zip(u) {
                    *vi -= proj * ui;
                }
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        // r_jj = <q_j, g_j> is real and positive for this construction.
        q.push(v.into_iter().map(|z| z / norm).collect());
    }
    ComplexMatrix::from_fn(n, n, |i, j| q[j][i])
}

pub fn random_pure_vector<R: Rng>(n: usize, rng: &mut R) -> Vec<C64> {
    let v: Vec<C64> = (0..n).map(|_| gaussian(rng)).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / norm).collect()
}

pub fn random_pure_state<R: Rng>(n: usize, rng: &mut R) -> DensityMatrix {
    DensityMatrix::pure(&random_pure_vector(n, rng)).expect("nonzero vector")
}

/// Reduced state of a random pure state on `C^n ⊗ C^n` (Hilbert–Schmidt measure).
pub fn random_density_matrix<R: Rng>(n: usize, rng: &mut R) -> DensityMatrix {
    let g = ginibre(n, rng);
    let m = &g * &g.adjoint();
    let tr = m.trace().re;
    DensityMatrix::new(m.scale_re(1.0 / tr).hermitian_part()).expect("Wishart matrix is a state")
}

pub fn random_hermitian<R: Rng>(n: usize, rng: &mut R) -> ComplexMatrix {
    ginibre(n, rng).hermitian_part()
}

/// CPTP map from a Haar unitary on `C^n ⊗ C^n` with environment in `|0><0|`.
pub fn random_cptp<R: Rng>(n: usize, rng: &mut R) -> Superoperator {
    let u = haar_unitary(n * n, rng);
    dilation_channel(&u, &DensityMatrix::basis(n, 0)).expect("Haar unitary")
}

/// Completely positive (not trace-preserving) map with `rank` random Kraus operators.
pub fn random_cp<R: Rng>(n: usize, rank: usize, rng: &mut R) -> Superoperator {
    (0..rank).fold(Superoperator::zero(n), |acc, _| {
        &acc + &Superoperator::conjugation(&ginibre(n, rng).scale_re(0.5))
    })
}
