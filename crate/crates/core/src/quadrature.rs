//! Adaptive Simpson quadrature for scalar and matrix-valued integrands.

use crate::linalg::ComplexMatrix;

pub const TOL_QUAD: f64 = 1e-10;
const MAX_DEPTH: u32 = 48;

/// Values that can be integrated: closed under real linear combinations, with a size for error control.
pub trait Integrand: Clone {
    fn combine(terms: &[(f64, &Self)]) -> Self;
    fn size(&self) -> f64;
}

impl Integrand for f64 {
    fn combine(terms: &[(f64, &Self)]) -> Self {
        terms.iter().map(|(w, x)| w * **x).sum()
    }

    fn size(&self) -> f64 {
        self.abs()
    }
}

impl Integrand for ComplexMatrix {
    fn combine(terms: &[(f64, &Self)]) -> Self {
        let (w0, x0) = terms[0];
        terms[1..]
            .iter()
            .fold(x0.scale_re(w0), |acc, (w, x)| &acc + &x.scale_re(*w))
    }

    fn size(&self) -> f64 {
        self.max_abs()
    }
}

/// `∫_a^b f` to absolute tolerance `tol`.
pub fn integrate<T: Integrand>(f: &impl Fn(f64) -> T, a: f64, b: f64, tol: f64) -> T {
    let fa = f(a);
    if a == b {
        return T::combine(&[(0.0, &fa)]);
    }
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, b, &fa, &fm, &fb);
    recurse(f, a, b, &fa, &fm, &fb, whole, tol, MAX_DEPTH)
}

fn simpson<T: Integrand>(a: f64, b: f64, fa: &T, fm: &T, fb: &T) -> T {
    let w = (b - a) / 6.0;
    T::combine(&[(w, fa), (4.0 * w, fm), (w, fb)])
}

#[allow(clippy::too_many_arguments)]
fn recurse<T: Integrand>(f: &impl Fn(f64) -> T, a: f64, b: f64, fa: &T, fm: &T, fb: &T, whole: T, tol: f64, depth: u32) -> T {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, &flm, fm);
    let right = simpson(m, b, fm, &frm, fb);
    let both = T::combine(&[(1.0, &left), (1.0, &right)]);
    let err = T::combine(&[(1.0, &both), (-1.0, &whole)]);
    if depth == 0 || err.size() <= 15.0 * tol {
        return T::combine(&[(1.0, &both), (1.0 / 15.0, &err)]);
    }
    let l = recurse(f, a, m, fa, &flm, fm, left, 0.5 * tol, depth - 1);
    let r = recurse(f, m, b, fm, &frm, fb, right, 0.5 * tol, depth - 1);
    T::combine(&[(1.0, &l), (1.0, &r)])
}
