//! B-spline basis on equidistant knots with linear extrapolation.

use nalgebra::DMatrix;

/// Equidistant knot vector over `[lo, hi]` with `inner` interior knots,
/// extended by `degree` knots beyond each boundary.
pub fn equidistant_knots(lo: f64, hi: f64, inner: usize, degree: usize) -> Vec<f64> {
    let step = (hi - lo) / (inner + 1) as f64;
    let total = inner + 2 + 2 * degree;
    (0..total)
        .map(|i| {
            let offset = i as isize - degree as isize;
            if offset == 0 {
                lo
            } else if offset == inner as isize + 1 {
                hi
            } else {
                lo + offset as f64 * step
            }
        })
        .collect()
}

pub fn n_basis(knots: &[f64], degree: usize) -> usize {
    knots.len() - degree - 1
}

/// Index `s` of the knot span containing `x`, restricted to the interior
/// spans `[degree, n_basis - 1]`.
fn span(knots: &[f64], degree: usize, x: f64) -> usize {
    let last = n_basis(knots, degree) - 1;
    if x >= knots[last + 1] {
        return last;
    }
    if x <= knots[degree] {
        return degree;
    }
    // largest s with knots[s] <= x
    let s = knots.partition_point(|&t| t <= x) - 1;
    s.clamp(degree, last)
}

/// Nonzero basis values of the given degree at `x` within span `s`;
/// the values belong to basis functions `s - degree ..= s`.
fn basis_in_span(knots: &[f64], degree: usize, s: usize, x: f64, out: &mut [f64]) {
    let mut left = vec![0.0; degree + 1];
    let mut right = vec![0.0; degree + 1];
    out[0] = 1.0;
    for j in 1..=degree {
        left[j] = x - knots[s + 1 - j];
        right[j] = knots[s + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            let temp = out[r] / (right[r + 1] + left[j - r]);
            out[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        out[j] = saved;
    }
}

/// First derivatives of the nonzero basis functions `s - degree ..= s`.
fn derivative_in_span(knots: &[f64], degree: usize, s: usize, x: f64, out: &mut [f64]) {
    if degree == 0 {
        out[0] = 0.0;
        return;
    }
    let mut lower = vec![0.0; degree];
    basis_in_span(knots, degree - 1, s, x, &mut lower);
    // lower[r] belongs to function s - degree + 1 + r
    let d = degree as f64;
    for (r, o) in out.iter_mut().enumerate().take(degree + 1) {
        let i = s - degree + r;
        let mut v = 0.0;
        if r >= 1 {
            let denom = knots[i + degree] - knots[i];
            if denom > 0.0 {
                v += d * lower[r - 1] / denom;
            }
        }
        if r < degree {
            let denom = knots[i + degree + 1] - knots[i + 1];
            if denom > 0.0 {
                v -= d * lower[r] / denom;
            }
        }
        *o = v;
    }
}

/// Nonzero basis values at `x`: returns the index of the first nonzero
/// function and writes `degree + 1` values. Outside `[lo, hi]` the basis
/// is extended linearly from the nearest boundary.
pub fn eval(knots: &[f64], degree: usize, x: f64, out: &mut [f64]) -> usize {
    let lo = knots[degree];
    let hi = knots[n_basis(knots, degree)];
    let anchor = x.clamp(lo, hi);
    let s = span(knots, degree, anchor);
    basis_in_span(knots, degree, s, anchor, out);
    if x != anchor {
        let mut deriv = vec![0.0; degree + 1];
        derivative_in_span(knots, degree, s, anchor, &mut deriv);
        for (o, dv) in out.iter_mut().zip(&deriv) {
            *o += (x - anchor) * dv;
        }
    }
    s - degree
}

/// Dense basis matrix, one row per point.
pub fn basis_matrix(knots: &[f64], degree: usize, x: &[f64]) -> DMatrix<f64> {
    let p = n_basis(knots, degree);
    let mut m = DMatrix::zeros(x.len(), p);
    let mut vals = vec![0.0; degree + 1];
    for (row, &xi) in x.iter().enumerate() {
        let first = eval(knots, degree, xi, &mut vals);
        for (r, v) in vals.iter().enumerate() {
            m[(row, first + r)] = *v;
        }
    }
    m
}

/// Difference matrix of the given order, (p - order) × p.
pub fn difference_matrix(p: usize, order: usize) -> DMatrix<f64> {
    let mut d = DMatrix::<f64>::identity(p, p);
    for _ in 0..order {
        let rows = d.nrows() - 1;
        let mut next = DMatrix::zeros(rows, p);
        for r in 0..rows {
            for c in 0..p {
                next[(r, c)] = d[(r + 1, c)] - d[(r, c)];
            }
        }
        d = next;
    }
    d
}
