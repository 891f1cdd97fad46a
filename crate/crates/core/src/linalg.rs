//! Small complex linear-algebra helpers shared across the crate.

use crate::error::SecError;
use crate::{C64, CMatrix, CVector};

/// Orthonormal basis of the orthogonal complement of `g`, as the trailing
/// columns of a Householder reflector mapping `g` onto the first axis.
///
/// Returns an `n x (n-1)` matrix `Q` with `Q^H Q = I` and `g^H Q = 0`.
pub fn householder_null_basis(g: &CVector) -> Result<CMatrix, SecError> {
    let n = g.len();
    if n < 2 {
        return Err(SecError::Domain("null basis needs dimension >= 2".into()));
    }
    let norm = g.norm();
    if norm < 1e-300 {
        return Err(SecError::Domain("null basis of zero vector".into()));
    }
    // alpha = -e^{j arg(g_0)} ||g|| avoids cancellation in u = g - alpha e_0.
    let phase = if g[0].norm() > 0.0 {
        g[0] / C64::new(g[0].norm(), 0.0)
    } else {
        C64::new(1.0, 0.0)
    };
    let alpha = -phase * C64::new(norm, 0.0);
    let mut u = g.clone();
    u[0] -= alpha;
    let un = u.norm();
    // g already along e_0: complement is the remaining identity columns,
    // rotated so that column signs stay consistent with the reflector.
    if un < 1e-14 * norm {
        let mut q = CMatrix::zeros(n, n - 1);
        for j in 0..n - 1 {
            q[(j + 1, j)] = C64::new(1.0, 0.0);
        }
        return Ok(q);
    }
    let u = u / C64::new(un, 0.0);
    // P = I - 2 u u^H is unitary and maps g to alpha e_0; its columns 1..n
    // are orthonormal and orthogonal to g.
    let mut q = CMatrix::zeros(n, n - 1);
    for j in 1..n {
        for i in 0..n {
            let delta = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            q[(i, j - 1)] = delta - u[i] * u[j].conj() * C64::new(2.0, 0.0);
        }
    }
    Ok(q)
}

/// Eigendecomposition of a Hermitian matrix (symmetrized first to shed
/// round-off). Returns `(eigenvalues, eigenvectors)` with columns matching
/// the eigenvalue order.
pub fn hermitian_eig(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    let h = hermitize(a);
    let eig = h.symmetric_eigen();
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

/// `(A + A^H)/2`.
pub fn hermitize(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * C64::new(0.5, 0.0)
}

/// Largest eigenvalue of a Hermitian matrix.
pub fn lambda_max(a: &CMatrix) -> f64 {
    let (vals, _) = hermitian_eig(a);
    vals.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Largest eigenvalue and a corresponding unit eigenvector.
pub fn top_eigpair(a: &CMatrix) -> (f64, CVector) {
    let (vals, vecs) = hermitian_eig(a);
    let (idx, &val) = vals
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap();
    (val, vecs.column(idx).into_owned())
}

/// Hermitian PSD square root; small negative eigenvalues are clamped to 0.
pub fn psd_sqrt(a: &CMatrix) -> CMatrix {
    let (vals, vecs) = hermitian_eig(a);
    let d = CMatrix::from_diagonal(&CVector::from_iterator(
        vals.len(),
        vals.iter().map(|&l| C64::new(l.max(0.0).sqrt(), 0.0)),
    ));
    &vecs * d * vecs.adjoint()
}

/// Column-major vectorization.
pub fn vec_col_major(m: &CMatrix) -> CVector {
    CVector::from_column_slice(m.as_slice())
}

/// Per-entry phase alignment `exp(j arg(d_m))`; entries with |d_m| below
/// `tol` inherit the phase of `prev` so a zero coefficient never scrambles
/// the incumbent.
pub fn unit_phases_of(d: &CVector, prev: &CVector, tol: f64) -> CVector {
    CVector::from_iterator(
        d.len(),
        d.iter().enumerate().map(|(m, &dm)| {
            if dm.norm() > tol {
                dm / C64::new(dm.norm(), 0.0)
            } else {
                let p = prev[m];
                if p.norm() > 0.0 { p / C64::new(p.norm(), 0.0) } else { C64::new(1.0, 0.0) }
            }
        }),
    )
}
