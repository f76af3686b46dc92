//! Empirical CDFs, their linear interpolation, and exact sup-norm distances.

use std::io::Write;

use crate::numfmt::format_f64;
use crate::pool::{ModelPool, ScoreVector};
use crate::{Error, Result};

/// Right-continuous step CDF. `cum[i]` is the value on `[support[i], support[i + 1])`;
/// the value below `support[0]` is 0 and `cum` ends at exactly 1.
#[derive(Clone, Debug, PartialEq)]
pub struct Ecdf {
    support: Vec<f64>,
    cum: Vec<f64>,
    n_obs: usize,
}

impl Ecdf {
    /// Equal-mass eCDF of a sample. Ties merge into one breakpoint.
    pub fn from_sample(sample: &[f64]) -> Result<Self> {
        let mut sorted = sample.to_vec();
        Self::from_unsorted_owned(&mut sorted)
    }

    /// eCDF of `values` after sorting them in place.
    pub fn from_unsorted_owned(values: &mut [f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("eCDF of an empty sample"));
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite {
                model_id: String::from("<sample>"),
                index,
                value,
            });
        }
        values.sort_unstable_by(f64::total_cmp);
        Ok(Self::from_sorted(values))
    }

    /// Caller guarantees `sorted` is nonempty, finite, and ascending.
    pub(crate) fn from_sorted(sorted: &[f64]) -> Self {
        let n = sorted.len();
        let total = n as f64;
        let mut support = Vec::with_capacity(n);
        let mut cum = Vec::with_capacity(n);
        for (i, &x) in sorted.iter().enumerate() {
            if i + 1 < n && sorted[i + 1] == x {
                continue;
            }
            support.push(x);
            cum.push((i + 1) as f64 / total);
        }
        Ecdf { support, cum, n_obs: n }
    }

    /// Build from explicit breakpoints and cumulative levels. The final level
    /// must be within 1e-12 of 1 and is then set to exactly 1.
    pub fn from_parts(support: Vec<f64>, mut cum: Vec<f64>, n_obs: usize) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::Empty("eCDF with no breakpoints"));
        }
        if support.len() != cum.len() {
            return Err(Error::DimensionMismatch {
                what: "eCDF levels".into(),
                expected: support.len(),
                found: cum.len(),
            });
        }
        if support.windows(2).any(|w| w[0] >= w[1]) || support.iter().any(|t| !t.is_finite()) {
            return Err(Error::domain("eCDF breakpoints must be finite and strictly increasing"));
        }
        if cum.windows(2).any(|w| w[0] > w[1]) || cum.iter().any(|c| !(0.0..=1.0 + 1e-12).contains(c)) {
            return Err(Error::domain("eCDF levels must be nondecreasing in [0, 1]"));
        }
        let last = cum.last_mut().expect("nonempty");
        if (*last - 1.0).abs() > 1e-12 {
            return Err(Error::domain(format!("eCDF must end at 1, ends at {last}")));
        }
        *last = 1.0;
        Ok(Ecdf { support, cum, n_obs })
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn cum(&self) -> &[f64] {
        &self.cum
    }

    /// Number of observations the eCDF was built from.
    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self.support.partition_point(|&s| s <= t) {
            0 => 0.0,
            k => self.cum[k - 1],
        }
    }

    /// `lim_{s -> t-} F(s)`.
    pub fn left_limit(&self, t: f64) -> f64 {
        match self.support.partition_point(|&s| s < t) {
            0 => 0.0,
            k => self.cum[k - 1],
        }
    }

    /// Largest jump, including the first one from 0.
    pub fn max_jump(&self) -> f64 {
        let mut prev = 0.0;
        let mut best: f64 = 0.0;
        for &c in &self.cum {
            best = best.max(c - prev);
            prev = c;
        }
        best
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,value")?;
        for (t, c) in self.support.iter().zip(&self.cum) {
            writeln!(out, "{},{}", format_f64(*t), format_f64(*c))?;
        }
        Ok(())
    }
}

pub fn ecdf_of(sample: &ScoreVector) -> Result<Ecdf> {
    Ecdf::from_sample(&sample.gaps)
}

/// Pooled eCDF of `members` over the given test indices (repeats count with
/// multiplicity): each of the `M * N` values carries mass `1 / (M * N)`, which
/// is the equal-weight average of the member eCDFs.
pub fn pooled_ecdf(members: &[&[f64]], indices: &[usize]) -> Result<Ecdf> {
    if members.is_empty() {
        return Err(Error::Empty("reference has no members"));
    }
    if indices.is_empty() {
        return Err(Error::Empty("reference has no test indices"));
    }
    let mut values = Vec::with_capacity(members.len() * indices.len());
    for member in members {
        for &j in indices {
            let g = *member.get(j).ok_or_else(|| Error::DimensionMismatch {
                what: "test index".into(),
                expected: member.len(),
                found: j + 1,
            })?;
            values.push(g);
        }
    }
    Ecdf::from_unsorted_owned(&mut values)
}

pub fn reference_of<S: AsRef<str>>(pool: &ModelPool, member_ids: &[S], indices: &[usize]) -> Result<Ecdf> {
    let members = pool.select(member_ids)?;
    let slices: Vec<&[f64]> = members.iter().map(|m| m.gaps.as_slice()).collect();
    pooled_ecdf(&slices, indices)
}

/// Continuous-inside, piecewise-linear CDF through the eCDF's breakpoints.
///
/// The value is 0 below the first knot, `values[i]` at `knots[i]`, linear in
/// between, and 1 at and above the last knot. The single jump (at the first
/// knot) keeps the sup distance to the step eCDF at most its largest jump.
#[derive(Clone, Debug, PartialEq)]
pub struct InterpolatedCdf {
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl InterpolatedCdf {
    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_degenerate(&self) -> bool {
        self.knots.len() == 1
    }

    pub fn eval(&self, t: f64) -> f64 {
        let k = self.knots.partition_point(|&s| s <= t);
        if k == 0 {
            return 0.0;
        }
        let i = k - 1;
        if i + 1 == self.knots.len() || self.knots[i] == t {
            return self.values[i];
        }
        let (t0, t1) = (self.knots[i], self.knots[i + 1]);
        let (v0, v1) = (self.values[i], self.values[i + 1]);
        v0 + (v1 - v0) * ((t - t0) / (t1 - t0))
    }

    /// Index of the last knot strictly below `t`, if any.
    pub(crate) fn last_knot_below(&self, t: f64) -> Option<usize> {
        self.knots.partition_point(|&s| s < t).checked_sub(1)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,value")?;
        for (t, v) in self.knots.iter().zip(&self.values) {
            writeln!(out, "{},{}", format_f64(*t), format_f64(*v))?;
        }
        Ok(())
    }
}

pub fn interpolate(reference: &Ecdf) -> InterpolatedCdf {
    InterpolatedCdf {
        knots: reference.support.clone(),
        values: reference.cum.clone(),
    }
}

/// Exact `sup_t |a(t) - b(t)|` for two step CDFs. Both are constant between
/// consecutive breakpoints of the merged support, so checking the value right
/// after each breakpoint (the left limit is the previous value) is exact.
pub fn sup_distance(a: &Ecdf, b: &Ecdf) -> f64 {
    let (mut i, mut j) = (0, 0);
    let (mut va, mut vb) = (0.0f64, 0.0f64);
    let mut best: f64 = 0.0;
    while i < a.support.len() || j < b.support.len() {
        let ta = a.support.get(i).copied().unwrap_or(f64::INFINITY);
        let tb = b.support.get(j).copied().unwrap_or(f64::INFINITY);
        let z = ta.min(tb);
        if ta == z {
            va = a.cum[i];
            i += 1;
        }
        if tb == z {
            vb = b.cum[j];
            j += 1;
        }
        best = best.max((va - vb).abs());
    }
    best
}

/// Exact `sup_t |step(t) - interp(t)|`, checking values and left limits at
/// every breakpoint of either function.
pub fn sup_distance_interpolated(step: &Ecdf, interp: &InterpolatedCdf) -> f64 {
    merged_points(step.support(), interp.knots())
        .into_iter()
        .map(|z| {
            let at = (step.eval(z) - interp.eval(z)).abs();
            let before = (step.left_limit(z) - interp_left_limit(interp, z)).abs();
            at.max(before)
        })
        .fold(0.0, f64::max)
}

fn interp_left_limit(interp: &InterpolatedCdf, t: f64) -> f64 {
    match interp.last_knot_below(t) {
        None => 0.0,
        Some(i) if i + 1 == interp.knots.len() => interp.values[i],
        Some(_) => interp.eval(t),
    }
}

/// Classical two-sample statistic on the pooled sample points:
/// `max_z |candidate(z) - reference(z)|` over breakpoints of either CDF.
pub fn pooled_grid_distance(candidate: &Ecdf, reference: &InterpolatedCdf) -> f64 {
    merged_points(candidate.support(), reference.knots())
        .into_iter()
        .map(|z| (candidate.eval(z) - reference.eval(z)).abs())
        .fold(0.0, f64::max)
}

pub(crate) fn merged_points(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let x = a.get(i).copied().unwrap_or(f64::INFINITY);
        let y = b.get(j).copied().unwrap_or(f64::INFINITY);
        let z = x.min(y);
        if x == z {
            i += 1;
        }
        if y == z {
            j += 1;
        }
        out.push(z);
    }
    out
}
