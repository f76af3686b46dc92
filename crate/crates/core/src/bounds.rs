//! Finite-sample DKW radii and the probability bounds built from them.
//!
//! One-sample bounds use the constant 2 (`P(||F - F_N|| > d) <= 2 exp(-2 N d^2)`).
//! The two-sample bound `C exp(-N d^2)` uses `C = e` in general and `C = 2`
//! once `N >= 458`.

use serde::Serialize;

use crate::{Error, Result};

/// Smallest `N` for which the two-sample constant may be taken as 2.
pub const TWO_SAMPLE_C2_MIN_N: usize = 458;

/// Sample size, model count, and target failure probability for a DKW bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DkwConfig {
    pub n_samples: usize,
    pub n_models: usize,
    pub epsilon: f64,
}

impl DkwConfig {
    pub fn new(n_samples: usize, n_models: usize, epsilon: f64) -> Result<Self> {
        check_n(n_samples)?;
        if n_models == 0 {
            return Err(Error::domain("model count must be at least 1"));
        }
        check_prob(epsilon, "epsilon")?;
        Ok(DkwConfig {
            n_samples,
            n_models,
            epsilon,
        })
    }

    pub fn two_sample_constant(&self) -> f64 {
        two_sample_constant(self.n_samples)
    }

    pub fn two_sample_threshold(&self) -> f64 {
        radius(self.n_samples, self.epsilon, self.two_sample_constant(), 1.0)
    }
}

/// A probability bound before and after clamping to `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Bound {
    pub raw: f64,
    pub reported: f64,
}

impl Bound {
    fn clamped(raw: f64) -> Self {
        Bound {
            raw,
            reported: raw.clamp(0.0, 1.0),
        }
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::domain("sample size must be at least 1"))
    } else {
        Ok(())
    }
}

fn check_prob(p: f64, name: &str) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must lie in (0, 1), got {p}")))
    }
}

fn check_positive(x: f64, name: &str) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be positive, got {x}")))
    }
}

fn radius(n: usize, eps: f64, constant: f64, exponent_scale: f64) -> f64 {
    ((constant / eps).ln() / (exponent_scale * n as f64)).sqrt()
}

pub fn two_sample_constant(n: usize) -> f64 {
    if n >= TWO_SAMPLE_C2_MIN_N {
        2.0
    } else {
        std::f64::consts::E
    }
}

/// `delta_a = sqrt(ln(C / eps_a) / N)`.
pub fn two_sample_threshold(n: usize, eps_a: f64) -> Result<f64> {
    check_n(n)?;
    check_prob(eps_a, "eps_a")?;
    Ok(radius(n, eps_a, two_sample_constant(n), 1.0))
}

/// `C exp(-N delta^2)`, the inverse of [`two_sample_threshold`].
pub fn two_sample_epsilon(n: usize, delta: f64) -> Result<Bound> {
    check_n(n)?;
    check_positive(delta, "delta")?;
    Ok(Bound::clamped(
        two_sample_constant(n) * (-(n as f64) * delta * delta).exp(),
    ))
}

/// `sqrt(ln(2 / eps) / (2N))`.
pub fn one_sample_radius(n: usize, eps: f64) -> Result<f64> {
    check_n(n)?;
    check_prob(eps, "eps")?;
    Ok(radius(n, eps, 2.0, 2.0))
}

/// `2 exp(-2 N delta^2)`.
pub fn one_sample_epsilon(n: usize, delta: f64) -> Result<Bound> {
    check_n(n)?;
    check_positive(delta, "delta")?;
    Ok(Bound::clamped(2.0 * (-2.0 * n as f64 * delta * delta).exp()))
}

/// Union bound for the averaged reference: `2 M exp(-2 N delta_b^2)`.
pub fn union_bound_epsilon(m: usize, n: usize, delta_b: f64) -> Result<Bound> {
    if m == 0 {
        return Err(Error::domain("model count must be at least 1"));
    }
    check_n(n)?;
    check_positive(delta_b, "delta_b")?;
    Ok(Bound::clamped(
        2.0 * m as f64 * (-2.0 * n as f64 * delta_b * delta_b).exp(),
    ))
}

/// Lower bound on `P(||F_bar - G0_hat|| <= delta_a + delta_b)`:
/// `1 - 2 M exp(-2 N delta_b^2) - 2 exp(-N delta_a^2)`, valid for `N >= 458`.
pub fn band_coverage_bound(m: usize, n: usize, delta_a: f64, delta_b: f64) -> Result<Bound> {
    if n < TWO_SAMPLE_C2_MIN_N {
        return Err(Error::domain(format!(
            "bound requires N >= {TWO_SAMPLE_C2_MIN_N}, got {n}"
        )));
    }
    check_positive(delta_a, "delta_a")?;
    let union = union_bound_epsilon(m, n, delta_b)?.raw;
    let two_sample = 2.0 * (-(n as f64) * delta_a * delta_a).exp();
    Ok(Bound::clamped(1.0 - union - two_sample))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct L1BoundInputs {
    pub alpha: f64,
    pub gamma: f64,
    pub delta_b: f64,
    pub delta_c: f64,
    pub support_len: f64,
    pub n_samples: usize,
    pub n_models: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct L1Bound {
    /// Contamination radius `nu = alpha + |S| (gamma + delta_b + delta_c)`.
    pub nu: f64,
    /// `2 exp(-2 N delta_c^2) + 2 M exp(-2 N delta_b^2)`.
    pub failure_prob: Bound,
}

pub fn l1_bound(inputs: &L1BoundInputs) -> Result<L1Bound> {
    let L1BoundInputs {
        alpha,
        gamma,
        delta_b,
        delta_c,
        support_len,
        n_samples,
        n_models,
    } = *inputs;
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::domain(format!("alpha must lie in [0, 1), got {alpha}")));
    }
    for (v, name) in [(gamma, "gamma"), (delta_b, "delta_b"), (delta_c, "delta_c")] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::domain(format!("{name} must be nonnegative, got {v}")));
        }
    }
    check_positive(support_len, "support length")?;
    check_n(n_samples)?;
    if n_models == 0 {
        return Err(Error::domain("model count must be at least 1"));
    }
    let n = n_samples as f64;
    let nu = alpha + support_len * (gamma + delta_b + delta_c);
    let raw = 2.0 * (-2.0 * n * delta_c * delta_c).exp() + 2.0 * n_models as f64 * (-2.0 * n * delta_b * delta_b).exp();
    Ok(L1Bound {
        nu,
        failure_prob: Bound::clamped(raw),
    })
}
