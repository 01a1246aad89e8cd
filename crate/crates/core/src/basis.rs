//! Cubic B-spline bases with a second-derivative roughness penalty and
//! penalized least-squares smoothing with GCV-selected smoothing parameter.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ORDER: usize = 4;
const DEGREE: usize = ORDER - 1;

/// Gauss-Legendre 4-point rule on (-1, 1); exact for polynomials up to degree 7,
/// which covers both the Gram integrand (degree 6) and the penalty integrand
/// (degree 2) on each knot span.
const GL4_NODES: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const GL4_WEIGHTS: [f64; 4] = [
    0.347_854_845_137_453_86,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_86,
];

/// Clamped cubic B-spline basis with equally spaced interior knots.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BSplineBasis {
    lo: f64,
    hi: f64,
    n_basis: usize,
    /// Full knot vector of length n_basis + ORDER (end knots repeated ORDER times).
    knots: Vec<f64>,
}

impl PartialEq for BSplineBasis {
    fn eq(&self, other: &Self) -> bool {
        self.n_basis == other.n_basis
            && (self.lo - other.lo).abs() <= 1e-12 * self.span().abs().max(1.0)
            && (self.hi - other.hi).abs() <= 1e-12 * self.span().abs().max(1.0)
    }
}

impl BSplineBasis {
    pub fn new(lo: f64, hi: f64, n_basis: usize) -> Result<Self> {
        if !(hi > lo) {
            return Err(Error::InvalidDomain { lo, hi });
        }
        if n_basis < ORDER {
            return Err(Error::TooFewBasis(n_basis));
        }
        let n_spans = n_basis - DEGREE;
        let mut knots = Vec::with_capacity(n_basis + ORDER);
        for _ in 0..ORDER {
            knots.push(lo);
        }
        for i in 1..n_spans {
            knots.push(lo + (hi - lo) * i as f64 / n_spans as f64);
        }
        for _ in 0..ORDER {
            knots.push(hi);
        }
        Ok(BSplineBasis {
            lo,
            hi,
            n_basis,
            knots,
        })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn span(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn n_basis(&self) -> usize {
        self.n_basis
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Interior knots, excluding the clamped end knots.
    pub fn interior_knots(&self) -> &[f64] {
        &self.knots[ORDER..self.n_basis]
    }

    fn contains(&self, t: f64) -> bool {
        let tol = 1e-12 * self.span().max(1.0);
        t >= self.lo - tol && t <= self.hi + tol
    }

    /// Knot span index i such that knots[i] <= t < knots[i+1],
    /// with t == hi mapped to the last non-empty span.
    fn find_span(&self, t: f64) -> usize {
        let last = self.n_basis - 1;
        if t >= self.knots[self.n_basis] {
            return last;
        }
        let mut lo = DEGREE;
        let mut hi = self.n_basis;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if t < self.knots[mid] {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    }

    /// The four non-zero basis values at t; basis indices are span - 3 ..= span.
    fn basis_funs(&self, span: usize, t: f64) -> [f64; ORDER] {
        let u = &self.knots;
        let mut n = [0.0; ORDER];
        let mut left = [0.0; ORDER];
        let mut right = [0.0; ORDER];
        n[0] = 1.0;
        for j in 1..=DEGREE {
            left[j] = t - u[span + 1 - j];
            right[j] = u[span + j] - t;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = n[r] / (right[r + 1] + left[j - r]);
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        n
    }

    /// Non-zero basis values and derivatives up to order `nd` at t
    /// (algorithm A2.3 of Piegl & Tiller). Row k holds the k-th derivative.
    fn ders_basis_funs(&self, span: usize, t: f64, nd: usize) -> Vec<[f64; ORDER]> {
        let u = &self.knots;
        let p = DEGREE;
        let mut ndu = [[0.0; ORDER]; ORDER];
        let mut left = [0.0; ORDER];
        let mut right = [0.0; ORDER];
        ndu[0][0] = 1.0;
        for j in 1..=p {
            left[j] = t - u[span + 1 - j];
            right[j] = u[span + j] - t;
            let mut saved = 0.0;
            for r in 0..j {
                ndu[j][r] = right[r + 1] + left[j - r];
                let temp = ndu[r][j - 1] / ndu[j][r];
                ndu[r][j] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            ndu[j][j] = saved;
        }
        let mut ders = vec![[0.0; ORDER]; nd + 1];
        for j in 0..=p {
            ders[0][j] = ndu[j][p];
        }
        let mut a = [[0.0; ORDER]; 2];
        for r in 0..=p {
            let mut s1 = 0usize;
            let mut s2 = 1usize;
            a[0] = [0.0; ORDER];
            a[0][0] = 1.0;
            for k in 1..=nd.min(p) {
                let mut d = 0.0;
                let rk = r as isize - k as isize;
                let pk = p - k;
                if r >= k {
                    a[s2][0] = a[s1][0] / ndu[pk + 1][rk as usize];
                    d = a[s2][0] * ndu[rk as usize][pk];
                }
                let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
                let j2 = if r as isize - 1 <= pk as isize {
                    k - 1
                } else {
                    p - r
                };
                for j in j1..=j2 {
                    a[s2][j] =
                        (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][(rk + j as isize) as usize];
                    d += a[s2][j] * ndu[(rk + j as isize) as usize][pk];
                }
                if r <= pk {
                    a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                    d += a[s2][k] * ndu[r][pk];
                }
                ders[k][r] = d;
                std::mem::swap(&mut s1, &mut s2);
            }
        }
        let mut r = p as f64;
        for k in 1..=nd.min(p) {
            for j in 0..=p {
                ders[k][j] *= r;
            }
            r *= (p - k) as f64;
        }
        ders
    }

    /// All K basis values at t.
    pub fn eval_point(&self, t: f64) -> Result<DVector<f64>> {
        if !self.contains(t) {
            return Err(Error::PointOutOfDomain(t));
        }
        let t = t.clamp(self.lo, self.hi);
        let span = self.find_span(t);
        let vals = self.basis_funs(span, t);
        let mut row = DVector::zeros(self.n_basis);
        for (r, &v) in vals.iter().enumerate() {
            row[span - DEGREE + r] = v;
        }
        Ok(row)
    }

    /// Design matrix Z with Z[j, k] = B_k(t_j).
    pub fn eval_matrix(&self, grid: &[f64]) -> Result<DMatrix<f64>> {
        let mut z = DMatrix::zeros(grid.len(), self.n_basis);
        for (j, &t) in grid.iter().enumerate() {
            if !self.contains(t) {
                return Err(Error::PointOutOfDomain(t));
            }
            let t = t.clamp(self.lo, self.hi);
            let span = self.find_span(t);
            let vals = self.basis_funs(span, t);
            for (r, &v) in vals.iter().enumerate() {
                z[(j, span - DEGREE + r)] = v;
            }
        }
        Ok(z)
    }

    /// Second-derivative values of the four basis functions active on `span` at t.
    fn d2_on_span(&self, span: usize, t: f64) -> [f64; ORDER] {
        let ders = self.ders_basis_funs(span, t, 2);
        ders[2]
    }

    /// Roughness penalty S with S[i, j] = integral of B_i'' B_j''.
    ///
    /// Second derivatives of cubic splines are piecewise linear, so the
    /// per-span integrand is quadratic and the GL4 rule integrates it exactly.
    pub fn penalty_matrix(&self) -> DMatrix<f64> {
        self.quadrature_matrix(|span, t| self.d2_on_span(span, t))
    }

    /// Gram matrix W with W[i, j] = integral of B_i B_j (degree-6 integrand).
    pub fn gram_matrix(&self) -> DMatrix<f64> {
        self.quadrature_matrix(|span, t| self.basis_funs(span, t))
    }

    fn quadrature_matrix<F>(&self, f: F) -> DMatrix<f64>
    where
        F: Fn(usize, f64) -> [f64; ORDER],
    {
        let mut s = DMatrix::zeros(self.n_basis, self.n_basis);
        for span in DEGREE..self.n_basis {
            let a = self.knots[span];
            let b = self.knots[span + 1];
            if b <= a {
                continue;
            }
            let half = (b - a) / 2.0;
            let mid = (a + b) / 2.0;
            for (q, &x) in GL4_NODES.iter().enumerate() {
                let t = mid + half * x;
                let w = half * GL4_WEIGHTS[q];
                let vals = f(span, t);
                for i in 0..ORDER {
                    for j in 0..ORDER {
                        s[(span - DEGREE + i, span - DEGREE + j)] += w * vals[i] * vals[j];
                    }
                }
            }
        }
        // symmetrize away quadrature round-off
        for i in 0..self.n_basis {
            for j in 0..i {
                let v = (s[(i, j)] + s[(j, i)]) / 2.0;
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        s
    }
}

/// Result of a penalized least-squares smooth.
#[derive(Debug, Clone)]
pub struct SmoothFit {
    /// K x n_curves coefficient matrix (one column per data column).
    pub coefficients: DMatrix<f64>,
    pub lambda: f64,
    /// GCV score per data column.
    pub gcv: Vec<f64>,
    /// Trace of the hat matrix (shared across columns of a common-grid batch).
    pub degrees_of_freedom: f64,
}

/// Cholesky solve of (Z'Z + lambda S) B = Z'Y with an explicit singularity guard.
fn penalized_solve(
    z: &DMatrix<f64>,
    s: &DMatrix<f64>,
    lambda: f64,
    y: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, f64)> {
    let ztz = z.transpose() * z;
    let a = &ztz + s * lambda;
    let chol = a.clone().cholesky().ok_or(Error::SingularSystem)?;
    let l = chol.l();
    let mut dmin = f64::INFINITY;
    let mut dmax = 0.0f64;
    for i in 0..l.nrows() {
        let d = l[(i, i)] * l[(i, i)];
        dmin = dmin.min(d);
        dmax = dmax.max(d);
    }
    // Threshold near machine precision: for very large lambda the penalty
    // null-space pivots legitimately sit many orders below the largest pivot
    // while the solve is still well determined.
    if dmin < 1e-15 * dmax {
        return Err(Error::SingularSystem);
    }
    let coef = chol.solve(&(z.transpose() * y));
    // df = trace((Z'Z + lambda S)^{-1} Z'Z)
    let df = chol.solve(&ztz).trace();
    Ok((coef, df))
}

/// Penalized least-squares smooth of one or more curves observed on a shared grid.
///
/// A single factorization is shared across all columns of `values`.
pub fn smooth_penalized(
    grid: &[f64],
    values: &DMatrix<f64>,
    basis: &BSplineBasis,
    lambda: f64,
) -> Result<SmoothFit> {
    if grid.len() != values.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "grid has {} points but values has {} rows",
            grid.len(),
            values.nrows()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) || !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::NonFiniteInput);
    }
    let z = basis.eval_matrix(grid)?;
    let s = basis.penalty_matrix();
    let (coefficients, df) = penalized_solve(&z, &s, lambda, values)?;
    let g = grid.len() as f64;
    let fitted = &z * &coefficients;
    let gcv = (0..values.ncols())
        .map(|c| {
            let sse: f64 = (values.column(c) - fitted.column(c)).norm_squared();
            let denom = 1.0 - df / g;
            (sse / g) / (denom * denom)
        })
        .collect();
    Ok(SmoothFit {
        coefficients,
        lambda,
        gcv,
        degrees_of_freedom: df,
    })
}

/// Smooth a single curve, choosing lambda over `lambda_grid` by GCV.
/// Ties break toward the larger (smoother) lambda.
pub fn select_lambda_gcv(
    grid: &[f64],
    values: &DVector<f64>,
    basis: &BSplineBasis,
    lambda_grid: &[f64],
) -> Result<SmoothFit> {
    if lambda_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let y = DMatrix::from_column_slice(values.len(), 1, values.as_slice());
    let mut best: Option<SmoothFit> = None;
    for &lambda in lambda_grid {
        let fit = match smooth_penalized(grid, &y, basis, lambda) {
            Ok(f) => f,
            Err(Error::SingularSystem) => continue,
            Err(e) => return Err(e),
        };
        if !fit.gcv[0].is_finite() {
            continue;
        }
        best = match best {
            None => Some(fit),
            Some(b) => {
                if fit.gcv[0] < b.gcv[0] || (fit.gcv[0] == b.gcv[0] && fit.lambda > b.lambda) {
                    Some(fit)
                } else {
                    Some(b)
                }
            }
        };
    }
    best.ok_or(Error::AllGcvNonFinite)
}

/// The default lambda grid: 10 log-spaced values from 1e-10 to 1e2.
pub fn default_lambda_grid() -> Vec<f64> {
    log_spaced(1e-10, 1e2, 10)
}

pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (llo, lhi) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (llo + (lhi - llo) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Equally spaced grid of n points spanning [lo, hi] inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}
