//! Dense linear-algebra facade and the exact primitives shared by the other
//! modules. Everything here is a pure function of its inputs.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Largest condition number (estimated from the Cholesky diagonal) accepted
/// by [`spd_inverse`] and [`spd_solve`].
pub const MAX_CONDITION: f64 = 1e12;

const SYMMETRY_RTOL: f64 = 1e-12;

pub fn ensure_finite(v: &[f64], what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} contains NaN or Inf")))
    }
}

/// `sign(x)·max(|x| − τ, 0)` with `sign(0) = 0`.
#[inline]
pub fn soft_threshold_scalar(x: f64, tau: f64) -> f64 {
    let mag = x.abs() - tau;
    if mag > 0.0 {
        mag.copysign(x)
    } else {
        0.0
    }
}

pub fn soft_threshold(v: &Vector, tau: f64) -> Result<Vector> {
    if !(tau >= 0.0) {
        return Err(Error::invalid(format!("threshold must be nonnegative, got {tau}")));
    }
    Ok(v.map(|x| soft_threshold_scalar(x, tau)))
}

/// The threshold `ν ≥ 0` such that `‖S_ν(v)‖₁ = radius`, or 0 when `v`
/// already lies in the ball.
pub fn l1_ball_threshold(v: &Vector, radius: f64) -> f64 {
    if !radius.is_finite() || v.lp_norm(1) <= radius {
        return 0.0;
    }
    let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    mags.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in mags.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - radius) / (j + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        } else {
            break;
        }
    }
    theta.max(0.0)
}

/// Euclidean projection onto `{u : ‖u‖₁ ≤ radius}`. An infinite radius is the
/// identity map.
pub fn project_l1_ball(v: &Vector, radius: f64) -> Result<Vector> {
    if !(radius > 0.0) {
        return Err(Error::invalid(format!("l1 radius must be positive, got {radius}")));
    }
    let nu = l1_ball_threshold(v, radius);
    if nu == 0.0 {
        return Ok(v.clone());
    }
    soft_threshold(v, nu)
}

/// `|||M|||∞`: the largest absolute row sum.
pub fn linf_operator_norm(m: &Matrix) -> f64 {
    m.row_iter()
        .map(|row| row.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

pub fn is_symmetric(m: &Matrix) -> bool {
    if !m.is_square() {
        return false;
    }
    let scale = max_abs(m).max(1.0);
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_RTOL * scale {
                return false;
            }
        }
    }
    true
}

pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Eigen-decomposition with eigenvalues sorted ascending; columns of
/// `vectors` are the matching orthonormal eigenvectors.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub values: Vector,
    pub vectors: Matrix,
}

impl SymEig {
    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// `V·diag(f(λ))·Vᵀ`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let scaled = Matrix::from_fn(self.vectors.nrows(), self.vectors.ncols(), |i, j| {
            self.vectors[(i, j)] * f(self.values[j])
        });
        let out = &scaled * self.vectors.transpose();
        symmetrize(&out)
    }
}

pub fn sym_eig(m: &Matrix) -> Result<SymEig> {
    if !m.is_square() {
        return Err(Error::invalid("eigendecomposition needs a square matrix"));
    }
    ensure_finite(m.as_slice(), "matrix")?;
    if !is_symmetric(m) {
        return Err(Error::invalid("matrix is not symmetric"));
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = Vector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = Matrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(SymEig { values, vectors })
}

/// Central differences `(f(x+he_j) − f(x−he_j)) / 2h`.
pub fn fd_gradient(f: impl Fn(&Vector) -> f64, x: &Vector, h: f64) -> Vector {
    let mut probe = x.clone();
    Vector::from_fn(x.len(), |j, _| {
        let orig = probe[j];
        probe[j] = orig + h;
        let fp = f(&probe);
        probe[j] = orig - h;
        let fm = f(&probe);
        probe[j] = orig;
        (fp - fm) / (2.0 * h)
    })
}

/// Central-difference Jacobian of a vector field; column `j` is `∂g/∂x_j`.
pub fn fd_jacobian(g: impl Fn(&Vector) -> Vector, x: &Vector, h: f64) -> Matrix {
    let mut probe = x.clone();
    let cols: Vec<Vector> = (0..x.len())
        .map(|j| {
            let orig = probe[j];
            probe[j] = orig + h;
            let gp = g(&probe);
            probe[j] = orig - h;
            let gm = g(&probe);
            probe[j] = orig;
            (gp - gm) / (2.0 * h)
        })
        .collect();
    Matrix::from_columns(&cols)
}

fn guarded_cholesky(m: &Matrix) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    if !m.is_square() {
        return Err(Error::invalid("Cholesky needs a square matrix"));
    }
    let chol = Cholesky::new(symmetrize(m))
        .ok_or_else(|| Error::Domain("matrix is not positive definite".into()))?;
    let diag = chol.l_dirty().diagonal();
    let (lo, hi) = diag
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(lo, hi), &d| (lo.min(d), hi.max(d)));
    let cond = (hi / lo).powi(2);
    if !(cond <= MAX_CONDITION) {
        return Err(Error::Domain(format!(
            "matrix is too ill-conditioned (estimated condition {cond:.3e})"
        )));
    }
    Ok(chol)
}

/// Lower Cholesky factor `L` with `M = LLᵀ`.
pub fn cholesky_factor(m: &Matrix) -> Result<Matrix> {
    Ok(guarded_cholesky(m)?.l())
}

/// Inverse of a symmetric positive definite matrix via Cholesky.
pub fn spd_inverse(m: &Matrix) -> Result<Matrix> {
    Ok(symmetrize(&guarded_cholesky(m)?.inverse()))
}

pub fn spd_solve(m: &Matrix, b: &Vector) -> Result<Vector> {
    Ok(guarded_cholesky(m)?.solve(b))
}

/// `log det M` for SPD `M`; `None` when the factorization fails.
pub fn spd_logdet(m: &Matrix) -> Option<f64> {
    let chol = Cholesky::new(symmetrize(m))?;
    Some(2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

/// Cholesky-based inverse and log-determinant in one factorization, without
/// the condition guard. Used inside iterative solvers where the iterate is
/// kept away from the boundary by a projection.
pub fn spd_inverse_logdet(m: &Matrix) -> Option<(Matrix, f64)> {
    let chol = Cholesky::new(symmetrize(m))?;
    let logdet = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    Some((symmetrize(&chol.inverse()), logdet))
}

/// General square inverse via LU; rejects numerically singular input.
pub fn general_inverse(m: &Matrix) -> Result<Matrix> {
    let inv = m
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::DegenerateDesign("matrix is singular".into()))?;
    let cond = linf_operator_norm(m) * linf_operator_norm(&inv);
    if !(cond.is_finite() && cond <= MAX_CONDITION) {
        return Err(Error::DegenerateDesign(format!(
            "matrix is numerically singular (condition {cond:.3e})"
        )));
    }
    Ok(inv)
}

/// Dominant eigenvalue magnitude of a symmetric linear map by power
/// iteration from the normalized all-ones vector.
pub fn power_iteration(matvec: impl Fn(&Vector) -> Vector, dim: usize, iters: usize) -> f64 {
    if dim == 0 {
        return 0.0;
    }
    let mut v = Vector::from_element(dim, 1.0 / (dim as f64).sqrt());
    for _ in 0..iters {
        let w = matvec(&v);
        let norm = w.norm();
        if norm == 0.0 || !norm.is_finite() {
            return 0.0;
        }
        v = w / norm;
    }
    // Rayleigh quotient at the final unit vector
    v.dot(&matvec(&v)).abs()
}

pub fn submatrix(m: &Matrix, rows: &[usize], cols: &[usize]) -> Matrix {
    Matrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

pub fn subvector(v: &Vector, idx: &[usize]) -> Vector {
    Vector::from_iterator(idx.len(), idx.iter().map(|&i| v[i]))
}

/// Indices in `0..p` not contained in `set` (which must be sorted).
pub fn complement(set: &[usize], p: usize) -> Vec<usize> {
    (0..p).filter(|i| set.binary_search(i).is_err()).collect()
}
