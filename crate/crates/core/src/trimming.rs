//! Impartially trimmed Kolmogorov–Smirnov distance and the robust
//! two-sample test built on it.
//!
//! An α-trimming of the candidate eCDF `G` reweights each sample point by a
//! factor in `[0, 1/(1-α)]` while keeping total mass 1. Every trimming has
//! the form `h ∘ G` with `h` in the class `C_α` of absolutely continuous maps
//! `[0,1] -> [0,1]`, `h(0) = 0`, `h(1) = 1`, `0 <= h' <= 1/(1-α)`. The
//! statistic is the smallest distance, over pooled sample points `z`, between
//! `h(G(z))` and the reference `R(z)`, minimised over `h`.
//!
//! Writing `u = G(z)`, `Γ = R(z)` and `g(u) = h(u) - u/(1-α)`, the problem
//! becomes fitting a nonincreasing `g` with slope at least `-1/(1-α)` and
//! range `[-α/(1-α), 0]` to `B = Γ - u/(1-α)` in sup norm. The optimum is the
//! clamped midpoint of the running upper envelope `U(k) = max_{j>=k} B(j)` and
//! lower envelope `L(k) = min_{j<=k} B(j)`:
//!
//! ```text
//! h̃(k) = max(min((U(k) + L(k)) / 2, 0), -α/(1-α))
//! h(k)  = h̃(k) + u(k)/(1-α)
//! ```
//!
//! The grid is anchored with `(u, Γ) = (0, 0)` and `(1, 1)`, which pins
//! `h(0) = 0` and `h(1) = 1`.
//!
//! Some terms of the maximum do not depend on α: half the spread of `Γ` over
//! points sharing one candidate level, `Γ` at level 0 and `1 - Γ` at level 1.
//! Their maximum is computed once per grid, and for α > 0 a scan result
//! within rounding distance of it is replaced by it, so the statistic is
//! exactly nonincreasing in α in floating point as well.

use std::io::Write;

use serde::Serialize;

use crate::bounds::two_sample_threshold;
use crate::ecdf::{interpolate, merged_points, Ecdf, InterpolatedCdf};
use crate::numfmt::format_f64;
use crate::{Error, Result};

/// Slack on the weight bounds in [`trimming_membership`].
pub const MEMBERSHIP_TOL: f64 = 1e-12;

/// One evaluation point: abscissa `z`, candidate level `u = G(z)`, reference
/// level `gamma = R(z)`. Anchors use `z = ±inf`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridPoint {
    pub z: f64,
    pub level: f64,
    pub gamma: f64,
}

/// Pooled evaluation points of a (candidate, reference) pair, sorted by `z`.
/// Both `level` and `gamma` are nondecreasing along the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvelopeGrid {
    points: Vec<GridPoint>,
    degenerate_reference: bool,
    alpha_free: f64,
}

impl EnvelopeGrid {
    /// Every pooled breakpoint of candidate and reference, plus the anchors.
    pub fn pooled(candidate: &Ecdf, reference: &InterpolatedCdf) -> Self {
        let mut points = vec![anchor_low()];
        points.extend(
            merged_points(candidate.support(), reference.knots())
                .into_iter()
                .map(|z| GridPoint {
                    z,
                    level: candidate.eval(z),
                    gamma: reference.eval(z),
                }),
        );
        points.push(anchor_high());
        EnvelopeGrid::from_points(points, reference.is_degenerate())
    }

    /// Same statistic as [`EnvelopeGrid::pooled`] with at most two points per
    /// candidate level. Inside a run of points sharing one level `u`, `B` is
    /// nondecreasing and the fitted `h̃` is constant, so only the first point
    /// (the candidate atom) and the last reference knot before the next atom
    /// can attain the maximum. Costs `O(m log K)` for `m` candidate atoms and
    /// `K` reference knots.
    pub fn compact(candidate: &Ecdf, reference: &InterpolatedCdf) -> Self {
        let support = candidate.support();
        let cum = candidate.cum();
        let knots = reference.knots();
        let values = reference.values();
        let mut points = Vec::with_capacity(2 * support.len() + 3);

        points.push(anchor_low());
        if let Some(k) = reference.last_knot_below(support[0]) {
            points.push(GridPoint {
                z: knots[k],
                level: 0.0,
                gamma: values[k],
            });
        }
        for (i, (&t, &u)) in support.iter().zip(cum).enumerate() {
            points.push(GridPoint {
                z: t,
                level: u,
                gamma: reference.eval(t),
            });
            let next = support.get(i + 1).copied().unwrap_or(f64::INFINITY);
            if let Some(k) = reference.last_knot_below(next) {
                if knots[k] > t {
                    points.push(GridPoint {
                        z: knots[k],
                        level: u,
                        gamma: values[k],
                    });
                }
            }
        }
        points.push(anchor_high());
        EnvelopeGrid::from_points(points, reference.is_degenerate())
    }

    fn from_points(points: Vec<GridPoint>, degenerate_reference: bool) -> Self {
        let alpha_free = alpha_free_max(&points);
        EnvelopeGrid {
            points,
            degenerate_reference,
            alpha_free,
        }
    }

    pub fn points(&self) -> &[GridPoint] {
        &self.points
    }

    pub fn degenerate_reference(&self) -> bool {
        self.degenerate_reference
    }

    /// Trimmed distance at `alpha` and the index of the maximising point.
    pub fn statistic(&self, alpha: f64) -> Result<(f64, usize)> {
        check_alpha(alpha)?;
        let slope = 1.0 / (1.0 - alpha);
        let floor = 1.0 - slope;
        let pts = &self.points;

        let mut upper = vec![0.0; pts.len()];
        let mut running = f64::NEG_INFINITY;
        for (k, p) in pts.iter().enumerate().rev() {
            running = running.max(p.gamma - p.level * slope);
            upper[k] = running;
        }

        let mut lower = f64::INFINITY;
        let mut best = (0.0, 0);
        for (k, p) in pts.iter().enumerate() {
            let b = p.gamma - p.level * slope;
            lower = lower.min(b);
            // |h - Γ| written as |h̃ - B|, which is exact when h̃ = B.
            let err = (clamp_mid(upper[k], lower, floor) - b).abs();
            if err > best.0 {
                best = (err, k);
            }
        }
        Ok((settle(best.0, self.alpha_free, slope), best.1))
    }
}

fn anchor_low() -> GridPoint {
    GridPoint {
        z: f64::NEG_INFINITY,
        level: 0.0,
        gamma: 0.0,
    }
}

fn anchor_high() -> GridPoint {
    GridPoint {
        z: f64::INFINITY,
        level: 1.0,
        gamma: 1.0,
    }
}

/// Largest α-independent term over the grid.
fn alpha_free_max(points: &[GridPoint]) -> f64 {
    let mut best = 0.0f64;
    let mut run_start = 0;
    for (k, p) in points.iter().enumerate() {
        if p.level == 0.0 {
            best = best.max(p.gamma);
        }
        if p.level == 1.0 {
            best = best.max(1.0 - p.gamma);
        }
        if p.level != points[run_start].level {
            run_start = k;
        }
        best = best.max((p.gamma - points[run_start].gamma) / 2.0);
    }
    best
}

/// Rounding in `B = Γ - u·slope` stays below a few ulps of `1 + slope`. At
/// slope 1 the scan is a single rounding of `|Γ - u|` and is kept as is.
fn settle(scan: f64, alpha_free: f64, slope: f64) -> f64 {
    let tol = 64.0 * f64::EPSILON * (1.0 + slope);
    if slope > 1.0 && scan <= alpha_free + tol {
        alpha_free
    } else {
        scan
    }
}

fn clamp_mid(upper: f64, lower: f64, floor: f64) -> f64 {
    ((upper + lower) / 2.0).min(0.0).max(floor)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::domain(format!("trimming level must lie in [0, 1), got {alpha}")))
    }
}

/// The full envelope on a grid: `Γ`, `B`, `U`, `L`, `h̃_α`, `h_α`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrimmingEnvelope {
    pub alpha: f64,
    pub abscissa: Vec<f64>,
    pub levels: Vec<f64>,
    pub gamma: Vec<f64>,
    pub slack: Vec<f64>,
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
    pub h_tilde: Vec<f64>,
    pub h_alpha: Vec<f64>,
    pub degenerate_reference: bool,
    alpha_free: f64,
}

impl TrimmingEnvelope {
    pub fn from_grid(grid: &EnvelopeGrid, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        let slope = 1.0 / (1.0 - alpha);
        let floor = 1.0 - slope;
        let pts = grid.points();
        let slack: Vec<f64> = pts.iter().map(|p| p.gamma - p.level * slope).collect();

        let mut upper = slack.clone();
        for k in (0..upper.len().saturating_sub(1)).rev() {
            upper[k] = upper[k].max(upper[k + 1]);
        }
        let mut lower = slack.clone();
        for k in 1..lower.len() {
            lower[k] = lower[k].min(lower[k - 1]);
        }
        let h_tilde: Vec<f64> = upper
            .iter()
            .zip(&lower)
            .map(|(&u, &l)| clamp_mid(u, l, floor))
            .collect();
        let h_alpha = h_tilde.iter().zip(pts).map(|(&g, p)| g + p.level * slope).collect();

        Ok(TrimmingEnvelope {
            alpha,
            abscissa: pts.iter().map(|p| p.z).collect(),
            levels: pts.iter().map(|p| p.level).collect(),
            gamma: pts.iter().map(|p| p.gamma).collect(),
            slack,
            upper,
            lower,
            h_tilde,
            h_alpha,
            degenerate_reference: grid.degenerate_reference(),
            alpha_free: grid.alpha_free,
        })
    }

    /// `(max_k |h_α(k) - Γ(k)|, argmax)`, computed as `|h̃_α - B|`.
    pub fn statistic(&self) -> (f64, usize) {
        let (err, k) = self
            .h_tilde
            .iter()
            .zip(&self.slack)
            .map(|(h, g)| (h - g).abs())
            .enumerate()
            .fold((0.0, 0), |best, (k, e)| if e > best.0 { (e, k) } else { best });
        (settle(err, self.alpha_free, 1.0 / (1.0 - self.alpha)), k)
    }

    /// Per-atom weights of the optimal trimming: atom `i` of the candidate
    /// gets `(h(c_i) - h(c_{i-1})) / (c_i - c_{i-1})`, where `c` are the
    /// candidate's cumulative levels.
    pub fn implied_weights(&self) -> Vec<f64> {
        let mut weights = Vec::new();
        let (mut prev_u, mut prev_h) = (0.0, 0.0);
        for (&u, &h) in self.levels.iter().zip(&self.h_alpha) {
            if u > prev_u {
                weights.push((h - prev_h) / (u - prev_u));
                prev_u = u;
                prev_h = h;
            }
        }
        weights
    }

    /// `z,u,gamma,B,U,L,h_tilde,h_alpha` rows for diagnostics.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "z,u,gamma,B,U,L,h_tilde,h_alpha")?;
        for k in 0..self.levels.len() {
            let row = [
                self.abscissa[k],
                self.levels[k],
                self.gamma[k],
                self.slack[k],
                self.upper[k],
                self.lower[k],
                self.h_tilde[k],
                self.h_alpha[k],
            ];
            let cells: Vec<String> = row.iter().map(|v| format_f64(*v)).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

/// Envelope over the full pooled grid.
pub fn build_envelope(candidate: &Ecdf, reference: &InterpolatedCdf, alpha: f64) -> Result<TrimmingEnvelope> {
    TrimmingEnvelope::from_grid(&EnvelopeGrid::pooled(candidate, reference), alpha)
}

/// Minimal distance from `reference` to the α-trimmings of `candidate`,
/// evaluated at the pooled sample points.
pub fn trimmed_ks(candidate: &Ecdf, reference: &InterpolatedCdf, alpha: f64) -> Result<f64> {
    Ok(EnvelopeGrid::compact(candidate, reference).statistic(alpha)?.0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RobustTestResult {
    pub statistic: f64,
    /// `delta_a + 1/N`.
    pub threshold: f64,
    pub delta_a: f64,
    pub accept: bool,
    pub alpha: f64,
    /// Abscissa where the statistic is attained; `None` at the grid anchors.
    pub witness: Option<f64>,
    pub degenerate_reference: bool,
}

/// Precomputed grid and threshold for testing one (candidate, reference)
/// pair at many trimming levels.
#[derive(Clone, Debug)]
pub struct RobustTester {
    grid: EnvelopeGrid,
    delta_a: f64,
    threshold: f64,
}

impl RobustTester {
    /// `n` is the candidate sample size used for the DKW threshold.
    pub fn new(candidate: &Ecdf, reference: &InterpolatedCdf, eps_a: f64, n: usize) -> Result<Self> {
        let delta_a = two_sample_threshold(n, eps_a)?;
        Ok(RobustTester {
            grid: EnvelopeGrid::compact(candidate, reference),
            delta_a,
            threshold: delta_a + 1.0 / n as f64,
        })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn test(&self, alpha: f64) -> Result<RobustTestResult> {
        let (statistic, k) = self.grid.statistic(alpha)?;
        let z = self.grid.points()[k].z;
        Ok(RobustTestResult {
            statistic,
            threshold: self.threshold,
            delta_a: self.delta_a,
            accept: statistic <= self.threshold,
            alpha,
            witness: z.is_finite().then_some(z),
            degenerate_reference: self.grid.degenerate_reference(),
        })
    }

    /// Index of the first level in `alphas` at which the test accepts. The
    /// statistic is nonincreasing in α, so stopping at the first accept is
    /// equivalent to testing every level.
    pub fn first_accepting(&self, alphas: &[f64]) -> Result<Option<usize>> {
        for (t, &alpha) in alphas.iter().enumerate() {
            if self.grid.statistic(alpha)?.0 <= self.threshold {
                return Ok(Some(t));
            }
        }
        Ok(None)
    }
}

/// Robust two-sample test of `candidate` (built from `n` points) against the
/// linear interpolation of `reference`, threshold `delta_a(n, eps_a) + 1/n`.
pub fn robust_test(candidate: &Ecdf, reference: &Ecdf, alpha: f64, eps_a: f64, n: usize) -> Result<RobustTestResult> {
    if n != candidate.n_obs() {
        return Err(Error::domain(format!(
            "N = {n} does not match the candidate sample size {}",
            candidate.n_obs()
        )));
    }
    RobustTester::new(candidate, &interpolate(reference), eps_a, n)?.test(alpha)
}

/// Whether per-point weights define an α-trimming of an `n`-point empirical
/// measure: `0 <= w_i <= 1/(1-α)` and `(1/n) Σ w_i = 1`, within 1e-12.
pub fn trimming_membership(weights: &[f64], alpha: f64, n: usize) -> bool {
    if n == 0 || weights.len() != n || !(0.0..=1.0).contains(&alpha) {
        return false;
    }
    let cap = if alpha < 1.0 {
        1.0 / (1.0 - alpha)
    } else {
        f64::INFINITY
    };
    let in_bounds = weights
        .iter()
        .all(|&w| w >= -MEMBERSHIP_TOL && w <= cap + MEMBERSHIP_TOL);
    let mean = weights.iter().sum::<f64>() / n as f64;
    in_bounds && (mean - 1.0).abs() <= MEMBERSHIP_TOL
}
