//! Brute-force oracles for the trimmed KS statistic. Deliberately independent
//! of the library: they rebuild the reference interpolation from the raw
//! reference sample and solve the trimming problem as a small LP.
//!
//! Problem: over cumulative values `v_0 = 0 <= v_1 <= ... <= v_n = 1` of the
//! sorted candidate sample with increments in `[0, 1/(n(1-α))]`, minimise `s`
//! subject to `|v_{c(z)} - R(z)| <= s` at every pooled sample point `z`, where
//! `c(z) = #{x_i <= z}`.

#![allow(dead_code)]

pub struct Instance {
    pub n: usize,
    /// (c(z), R(z)) for every distinct pooled point.
    pub constraints: Vec<(usize, f64)>,
}

fn distinct_sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v.dedup();
    v
}

/// Linear interpolation through (distinct value, eCDF level), 0 below the
/// first value and 1 from the last value on.
pub fn interp_reference(reference: &[f64], z: f64) -> f64 {
    let total = reference.len() as f64;
    let knots = distinct_sorted(reference);
    let level = |t: f64| reference.iter().filter(|&&r| r <= t).count() as f64 / total;
    if z < knots[0] {
        return 0.0;
    }
    if z >= *knots.last().unwrap() {
        return 1.0;
    }
    let k = knots.iter().rposition(|&t| t <= z).unwrap();
    if knots[k] == z {
        return level(z);
    }
    let (t0, t1) = (knots[k], knots[k + 1]);
    let (v0, v1) = (level(t0), level(t1));
    v0 + (v1 - v0) * (z - t0) / (t1 - t0)
}

pub fn instance(candidate: &[f64], reference: &[f64]) -> Instance {
    let mut pooled = candidate.to_vec();
    pooled.extend_from_slice(reference);
    let constraints = distinct_sorted(&pooled)
        .into_iter()
        .map(|z| {
            let c = candidate.iter().filter(|&&x| x <= z).count();
            (c, interp_reference(reference, z))
        })
        .collect();
    Instance {
        n: candidate.len(),
        constraints,
    }
}

fn feasible(inst: &Instance, cap: f64, s: f64) -> bool {
    let n = inst.n;
    let mut lo_bound = vec![f64::NEG_INFINITY; n + 1];
    let mut hi_bound = vec![f64::INFINITY; n + 1];
    for &(c, r) in &inst.constraints {
        lo_bound[c] = lo_bound[c].max(r - s);
        hi_bound[c] = hi_bound[c].min(r + s);
    }
    // v_0 = 0
    if lo_bound[0] > 0.0 || hi_bound[0] < 0.0 {
        return false;
    }
    let (mut lo, mut hi) = (0.0f64, 0.0f64);
    for i in 1..=n {
        lo = lo.max(lo_bound[i]);
        hi = (hi + cap).min(hi_bound[i]);
        if lo > hi + 1e-14 {
            return false;
        }
    }
    lo <= 1.0 + 1e-14 && 1.0 <= hi + 1e-14
}

/// Bisection on `s` with a greedy reachable-interval sweep.
pub fn bisection(candidate: &[f64], reference: &[f64], alpha: f64) -> f64 {
    let inst = instance(candidate, reference);
    let cap = 1.0 / (inst.n as f64 * (1.0 - alpha));
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    if feasible(&inst, cap, 0.0) {
        return 0.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if feasible(&inst, cap, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in 0..n {
            if row != col {
                let f = a[row][col] / a[col][col];
                let pivot_row = a[col].clone();
                for (x, p) in a[row][col..].iter_mut().zip(&pivot_row[col..]) {
                    *x -= f * p;
                }
                b[row] -= f * b[col];
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// Exact LP optimum by enumerating every vertex of the feasible polytope in
/// `(v_1, ..., v_{n-1}, s)`. Only for small `n`.
pub fn vertex_enumeration(candidate: &[f64], reference: &[f64], alpha: f64) -> f64 {
    let inst = instance(candidate, reference);
    let n = inst.n;
    let dim = n; // v_1..v_{n-1} and s
    let cap = 1.0 / (n as f64 * (1.0 - alpha));
    // Rows a.x <= b, x = (v_1..v_{n-1}, s); v_0 = 0 and v_n = 1 are constants.
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    let var = |i: usize| -> Option<usize> { (1..n).contains(&i).then(|| i - 1) };
    let konst = |i: usize| -> f64 {
        if i == n {
            1.0
        } else {
            0.0
        }
    };
    for &(c, r) in &inst.constraints {
        // v_c - s <= r   and   -v_c - s <= -r
        let mut up = vec![0.0; dim];
        let mut dn = vec![0.0; dim];
        up[dim - 1] = -1.0;
        dn[dim - 1] = -1.0;
        match var(c) {
            Some(j) => {
                up[j] = 1.0;
                dn[j] = -1.0;
                rows.push((up, r));
                rows.push((dn, -r));
            }
            None => {
                rows.push((up, r - konst(c)));
                rows.push((dn, -r + konst(c)));
            }
        }
    }
    for i in 1..=n {
        // 0 <= v_i - v_{i-1} <= cap
        let mut inc = vec![0.0; dim];
        let mut rhs_shift = 0.0;
        match var(i) {
            Some(j) => inc[j] += 1.0,
            None => rhs_shift -= konst(i),
        }
        match var(i - 1) {
            Some(j) => inc[j] -= 1.0,
            None => rhs_shift += konst(i - 1),
        }
        let neg: Vec<f64> = inc.iter().map(|x| -x).collect();
        rows.push((inc, cap + rhs_shift));
        rows.push((neg, -rhs_shift));
    }
    let mut s_row = vec![0.0; dim];
    s_row[dim - 1] = -1.0;
    rows.push((s_row, 0.0));

    let mut best = f64::INFINITY;
    let m = rows.len();
    let mut pick = (0..dim).collect::<Vec<_>>();
    loop {
        let a: Vec<Vec<f64>> = pick.iter().map(|&r| rows[r].0.clone()).collect();
        let b: Vec<f64> = pick.iter().map(|&r| rows[r].1).collect();
        if let Some(x) = solve(a, b) {
            let ok = rows
                .iter()
                .all(|(a, b)| a.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() <= b + 1e-11);
            if ok {
                best = best.min(x[dim - 1]);
            }
        }
        // next combination
        let mut k = dim;
        loop {
            if k == 0 {
                return best.max(0.0);
            }
            k -= 1;
            if pick[k] < m - dim + k {
                pick[k] += 1;
                for j in k + 1..dim {
                    pick[j] = pick[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Literal grid search over cumulative values with step `1/steps`: an upper
/// bound on the optimum for sorted samples of size 4.
pub fn grid_search_upper(candidate: &[f64], reference: &[f64], alpha: f64, steps: usize) -> f64 {
    let inst = instance(candidate, reference);
    assert_eq!(inst.n, 4);
    let cap = 1.0 / (4.0 * (1.0 - alpha)) + 1e-15;
    let h = 1.0 / steps as f64;
    let mut best = f64::INFINITY;
    for a in 0..=steps {
        for b in a..=steps {
            for c in b..=steps {
                let v = [0.0, a as f64 * h, b as f64 * h, c as f64 * h, 1.0];
                if v.windows(2).any(|w| w[1] - w[0] > cap) {
                    continue;
                }
                let s = inst
                    .constraints
                    .iter()
                    .map(|&(k, r)| (v[k] - r).abs())
                    .fold(0.0, f64::max);
                best = best.min(s);
            }
        }
    }
    best
}
