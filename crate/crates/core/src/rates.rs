//! Scalar rate families `γ(t)` with their primitives `Γ(t) = ∫₀ᵗ γ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum RateFunction {
    /// `c`
    Constant { c: f64 },
    /// `c e^{-rt}`
    Exponential { c: f64, r: f64 },
    /// `c sin(ωt + φ)`
    Sinusoidal {
        c: f64,
        omega: f64,
        #[serde(default)]
        phi: f64,
    },
    /// `Σ coeffs[k] t^k`
    Polynomial { coeffs: Vec<f64> },
    /// Piecewise linear through `(t, γ)` knots, held constant outside them.
    Table { knots: Vec<(f64, f64)> },
}

impl RateFunction {
    pub fn constant(c: f64) -> Self {
        Self::Constant { c }
    }

    pub fn exponential(c: f64, r: f64) -> Self {
        Self::Exponential { c, r }
    }

    pub fn sinusoidal(c: f64, omega: f64, phi: f64) -> Self {
        Self::Sinusoidal { c, omega, phi }
    }

    pub fn polynomial(coeffs: Vec<f64>) -> Self {
        Self::Polynomial { coeffs }
    }

    pub fn table(knots: Vec<(f64, f64)>) -> Result<Self> {
        let r = Self::Table { knots };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        let ok = match self {
            Self::Constant { c } => finite(&[*c]),
            Self::Exponential { c, r } => finite(&[*c, *r]),
            Self::Sinusoidal { c, omega, phi } => finite(&[*c, *omega, *phi]),
            Self::Polynomial { coeffs } => {
                if coeffs.is_empty() {
                    return Err(Error::InvalidRate("polynomial needs at least one coefficient".into()));
                }
                finite(coeffs)
            }
            Self::Table { knots } => {
                if knots.is_empty() {
                    return Err(Error::InvalidRate("table needs at least one knot".into()));
                }
                if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(Error::InvalidRate("table knots must have strictly increasing times".into()));
                }
                knots.iter().all(|(t, g)| t.is_finite() && g.is_finite())
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidRate("non-finite parameter".into()))
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Self::Constant { c } => *c,
            Self::Exponential { c, r } => c * (-r * t).exp(),
            Self::Sinusoidal { c, omega, phi } => c * (omega * t + phi).sin(),
            Self::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, a| acc * t + a),
            Self::Table { knots } => table_eval(knots, t),
        }
    }

    /// `Γ(t) = ∫₀ᵗ γ(u) du`
    pub fn primitive(&self, t: f64) -> f64 {
        match self {
            Self::Constant { c } => c * t,
            Self::Exponential { c, r } => {
                if *r == 0.0 {
                    c * t
                } else {
                    -c * (-r * t).exp_m1() / r
                }
            }
            Self::Sinusoidal { c, omega, phi } => {
                if *omega == 0.0 {
                    c * phi.sin() * t
                } else {
                    c * (phi.cos() - (omega * t + phi).cos()) / omega
                }
            }
            Self::Polynomial { coeffs } => {
                coeffs
                    .iter()
                    .enumerate()
                    .rev()
                    .fold(0.0, |acc, (k, a)| acc * t + a / (k + 1) as f64)
                    * t
            }
            Self::Table { knots } => table_antiderivative(knots, t) - table_antiderivative(knots, 0.0),
        }
    }

    /// `γ'(t)`; one-sided slope at table knots.
    pub fn derivative(&self, t: f64) -> f64 {
        match self {
            Self::Constant { .. } => 0.0,
            Self::Exponential { c, r } => -r * c * (-r * t).exp(),
            Self::Sinusoidal { c, omega, phi } => c * omega * (omega * t + phi).cos(),
            Self::Polynomial { coeffs } => coeffs
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (k, a)| acc * t + k as f64 * a),
            Self::Table { knots } => {
                if knots.len() < 2 || t < knots[0].0 || t >= knots[knots.len() - 1].0 {
                    return 0.0;
                }
                let i = knots.partition_point(|k| k.0 <= t) - 1;
                let (t0, g0) = knots[i];
                let (t1, g1) = knots[i + 1];
                (g1 - g0) / (t1 - t0)
            }
        }
    }

    /// Whether `primitive` is a closed-form expression (tables use the exact
    /// trapezoid sum instead).
    pub fn has_analytic_primitive(&self) -> bool {
        !matches!(self, Self::Table { .. })
    }

    /// `k γ(t)` in the same family.
    pub fn scaled(&self, k: f64) -> Self {
        match self {
            Self::Constant { c } => Self::Constant { c: k * c },
            Self::Exponential { c, r } => Self::Exponential { c: k * c, r: *r },
            Self::Sinusoidal { c, omega, phi } => Self::Sinusoidal {
                c: k * c,
                omega: *omega,
                phi: *phi,
            },
            Self::Polynomial { coeffs } => Self::Polynomial {
                coeffs: coeffs.iter().map(|a| k * a).collect(),
            },
            Self::Table { knots } => Self::Table {
                knots: knots.iter().map(|(t, g)| (*t, k * g)).collect(),
            },
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Self::Constant { .. } => true,
            Self::Exponential { c, r } => *c == 0.0 || *r == 0.0,
            Self::Sinusoidal { c, omega, .. } => *c == 0.0 || *omega == 0.0,
            Self::Polynomial { coeffs } => coeffs.iter().skip(1).all(|a| *a == 0.0),
            Self::Table { knots } => knots.iter().all(|k| k.1 == knots[0].1),
        }
    }
}

fn table_eval(knots: &[(f64, f64)], t: f64) -> f64 {
    let (first, last) = (knots[0], knots[knots.len() - 1]);
    if t <= first.0 {
        return first.1;
    }
    if t >= last.0 {
        return last.1;
    }
    let i = knots.partition_point(|k| k.0 <= t) - 1;
    let (t0, g0) = knots[i];
    let (t1, g1) = knots[i + 1];
    g0 + (g1 - g0) * (t - t0) / (t1 - t0)
}

/// Antiderivative anchored at the first knot.
fn table_antiderivative(knots: &[(f64, f64)], t: f64) -> f64 {
    let first = knots[0];
    if t <= first.0 {
        return first.1 * (t - first.0);
    }
    let mut acc = 0.0;
    for w in knots.windows(2) {
        let ((t0, g0), (t1, g1)) = (w[0], w[1]);
        if t <= t1 {
            let g = g0 + (g1 - g0) * (t - t0) / (t1 - t0);
            return acc + 0.5 * (g0 + g) * (t - t0);
        }
        acc += 0.5 * (g0 + g1) * (t1 - t0);
    }
    let last = knots[knots.len() - 1];
    acc + last.1 * (t - last.0)
}
