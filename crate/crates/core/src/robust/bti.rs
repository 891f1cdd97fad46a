//! Bernstein-type-inequality machinery: per-user outage rates are recast as
//! Gaussian quadratic chance constraints, whose deterministic safe
//! approximation needs four scalars per constraint (trace, Frobenius norm,
//! linear-term norm and top eigenvalue of the quadratic form).
//!
//! The quadratic forms live on the stacked CSI error vector. With isotropic
//! per-helper covariances they collapse to small expressions in the
//! `(K-1) x (K-1)` beamformer Gram matrix `W`, which is what the cone
//! subproblems consume.

use crate::error::SecError;
use crate::linalg;
use crate::{C64, CMatrix, CVector};

/// Per-user outage budget: `1 - (1 - rho)^{1/K}`.
pub fn rho_bar(rho: f64, k: usize) -> f64 {
    1.0 - (1.0 - rho).powf(1.0 / k as f64)
}

/// The four deterministic scalars of one Bernstein constraint plus its
/// constant term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BtiTerms {
    /// `Tr(U)`.
    pub trace_u: f64,
    /// `||U||_F`.
    pub frob_u: f64,
    /// `||u||_2`.
    pub norm_u: f64,
    /// `lambda_max(U)`, clamped at zero.
    pub lambda_max_u: f64,
    /// Constant term of the quadratic (everything not involving the error).
    pub u_const: f64,
}

/// Concave lower bound on the helper rate, expanded at `(z_prev, t_prev)`:
/// the quadratic-over-linear term `t |g^H Q z|^2` is replaced by its
/// first-order model. Touches the true rate at the expansion point.
pub fn surrogate_rk_tilde(
    z: &CVector,
    t_k: f64,
    g_k: &CVector,
    q: &CMatrix,
    sigma2_k: f64,
    z_prev: &CVector,
    t_k_prev: f64,
) -> f64 {
    let p_prev = (g_k.adjoint() * q * z_prev)[(0, 0)];
    let p_cur = (g_k.adjoint() * q * z)[(0, 0)];
    let cross = (p_prev.conj() * p_cur).re;
    let arg = 1.0 - t_k_prev * t_k_prev * p_prev.norm_sqr() / (sigma2_k * t_k)
        + 2.0 * t_k_prev * cross / sigma2_k;
    if arg <= 0.0 {
        return f64::NEG_INFINITY;
    }
    0.5 * arg.log2()
}

/// Linear lower bound on the harvestable power `(1 - t_k) |g_k^H Q z|^2`
/// at the expansion point.
pub fn harvest_lower_bound(
    z: &CVector,
    t_k: f64,
    g_k: &CVector,
    q: &CMatrix,
    z_prev: &CVector,
    t_k_prev: f64,
) -> f64 {
    let p_prev = (g_k.adjoint() * q * z_prev)[(0, 0)];
    let p_cur = (g_k.adjoint() * q * z)[(0, 0)];
    let cross = (p_prev.conj() * p_cur).re;
    2.0 * (1.0 - t_k_prev) * cross
        - (1.0 - t_k_prev).powi(2) * p_prev.norm_sqr() / (1.0 - t_k)
}

/// Scalars of the helper-k constraint (eavesdropper-side error only).
///
/// `u_const` carries the deterministic part
/// `a_E e^H H_E W H_E^H e - [(R~_k - R_sec) 2 ln 2 - a_E + ln a_E + 1] sigma_E^2`.
#[allow(clippy::too_many_arguments)]
pub fn bti_terms_helper_k(
    w_mat: &CMatrix,
    e: &CVector,
    h_hat_e: &CMatrix,
    lambda_e: &[f64],
    a_e: f64,
    sigma2_e: f64,
    r_tilde_k: f64,
    r_sec: f64,
) -> BtiTerms {
    let m = e.len() as f64;
    let kh = lambda_e.len();
    let trace_u = a_e * m * weighted_trace(w_mat, lambda_e);
    let frob_u = a_e * m * sym_weighted_frob(w_mat, lambda_e);
    let f = h_hat_e.adjoint() * e;
    let wf = w_mat * &f;
    let sqrt_lam_wf: f64 = (0..kh).map(|i| lambda_e[i] * wf[i].norm_sqr()).sum();
    let norm_u = a_e * (m * sqrt_lam_wf).sqrt();
    let lambda_max_u = (a_e * m * lambda_weighted_top(w_mat, lambda_e)).max(0.0);
    let qf = (e.adjoint() * h_hat_e * w_mat * h_hat_e.adjoint() * e)[(0, 0)].re;
    let ln2 = std::f64::consts::LN_2;
    let u_const = a_e * qf - ((r_tilde_k - r_sec) * 2.0 * ln2 - a_e + a_e.ln() + 1.0) * sigma2_e;
    BtiTerms { trace_u, frob_u, norm_u, lambda_max_u, u_const }
}

/// `lambda_max(Lambda^{1/2} W Lambda^{1/2})`, which for `W = w w^H` is
/// exactly `w^H Lambda w`.
fn lambda_weighted_top(w_mat: &CMatrix, lambda: &[f64]) -> f64 {
    linalg::lambda_max(&sym_weighted(w_mat, lambda))
}

/// `Lambda^{1/2} W Lambda^{1/2}` for a diagonal weight vector.
fn sym_weighted(w_mat: &CMatrix, lambda: &[f64]) -> CMatrix {
    let kh = lambda.len();
    CMatrix::from_fn(kh, kh, |i, j| {
        w_mat[(i, j)] * C64::new((lambda[i] * lambda[j]).sqrt(), 0.0)
    })
}

/// Frobenius norm of `Lambda^{1/2} W Lambda^{1/2}` (the exact norm of the
/// stacked-error quadratic form; it collapses to `||Lambda W||_F` only for
/// rank-one `W`).
fn sym_weighted_frob(w_mat: &CMatrix, lambda: &[f64]) -> f64 {
    sym_weighted(w_mat, lambda).norm()
}

fn weighted_trace(w_mat: &CMatrix, lambda: &[f64]) -> f64 {
    lambda.iter().enumerate().map(|(i, &l)| l * w_mat[(i, i)].re).sum()
}

/// Scalars of the user-K constraint (both error blocks).
#[allow(clippy::too_many_arguments)]
pub fn bti_terms_user_big_k(
    w_mat: &CMatrix,
    w: &CVector,
    e: &CVector,
    h_hat_k: &CMatrix,
    h_hat_e: &CMatrix,
    lambda_k: &[f64],
    lambda_e: &[f64],
    a_k: f64,
    a_e: f64,
    v: C64,
    sigma2_k: f64,
    sigma2_e: f64,
    r_sec: f64,
) -> BtiTerms {
    let m = e.len() as f64;
    let kh = lambda_k.len();
    let av2 = a_k * v.norm_sqr();
    let ae_s = a_e / sigma2_e;

    let trace_u = av2 * m * weighted_trace(w_mat, lambda_k)
        + ae_s * m * weighted_trace(w_mat, lambda_e);
    let frob_k = sym_weighted_frob(w_mat, lambda_k);
    let frob_e = sym_weighted_frob(w_mat, lambda_e);
    let frob_sq = av2 * av2 * m * m * frob_k * frob_k + ae_s * ae_s * m * m * frob_e * frob_e;
    let frob_u = frob_sq.sqrt();

    // K-side linear term: Lambda_K^{1/2} (a_K |v|^2 W H_K^H e - a_K v w).
    let fk = h_hat_k.adjoint() * e;
    let wfk = w_mat * &fk;
    let mut norm_sq_k = 0.0;
    for i in 0..kh {
        let inner = wfk[i] * C64::new(av2, 0.0) - w[i] * v * C64::new(a_k, 0.0);
        norm_sq_k += lambda_k[i] * inner.norm_sqr();
    }
    // E-side linear term: (a_E / sigma_E^2) Lambda_E^{1/2} W H_E^H e.
    let fe = h_hat_e.adjoint() * e;
    let wfe = w_mat * &fe;
    let mut norm_sq_e = 0.0;
    for i in 0..kh {
        norm_sq_e += lambda_e[i] * (wfe[i] * C64::new(ae_s, 0.0)).norm_sqr();
    }
    let norm_u = (m * (norm_sq_k + norm_sq_e)).sqrt();

    let lambda_max_u = (av2 * m * lambda_weighted_top(w_mat, lambda_k))
        .max(ae_s * m * lambda_weighted_top(w_mat, lambda_e))
        .max(0.0);

    let qf_k = (e.adjoint() * h_hat_k * w_mat * h_hat_k.adjoint() * e)[(0, 0)].re;
    let qf_e = (e.adjoint() * h_hat_e * w_mat * h_hat_e.adjoint() * e)[(0, 0)].re;
    let lin = (v * (e.adjoint() * h_hat_k * w)[(0, 0)]).re;
    let ln2 = std::f64::consts::LN_2;
    let c = a_e.ln() + a_k.ln() - a_e - a_k - 2.0 * r_sec * ln2 - sigma2_k * av2 + 2.0;
    let u_const = av2 * qf_k + ae_s * qf_e - 2.0 * a_k * lin - c;
    BtiTerms { trace_u, frob_u, norm_u, lambda_max_u, u_const }
}

impl BtiTerms {
    /// Tight slack values `(x, y)` of the deterministic form.
    pub fn tight_slacks(&self) -> (f64, f64) {
        let x = (self.frob_u * self.frob_u + 2.0 * self.norm_u * self.norm_u).sqrt();
        (x, self.lambda_max_u)
    }

    /// Left-hand side of the deterministic constraint at tight slacks.
    pub fn lhs(&self, rho_bar: f64) -> f64 {
        let (x, y) = self.tight_slacks();
        self.trace_u + (2.0 * (1.0 / rho_bar).ln()).sqrt() * x - rho_bar.ln() * y + self.u_const
    }
}

/// Deterministic sufficient condition for
/// `Pr{ i^H U i + 2 Re(u^H i) + u_const <= 0 } >= 1 - rho_bar`.
pub fn bti_deterministic_check(terms: &BtiTerms, rho_bar: f64) -> bool {
    terms.lhs(rho_bar) <= 0.0
}

/// Dense reference construction of one Bernstein constraint on the stacked
/// error vector: `U = scale * Sigma^{1/2} (W^T ⊗ E) Sigma^{1/2}` plus the
/// matching linear term. Used as the oracle the fast scalar formulas are
/// checked against, and by the Monte Carlo audit.
pub struct DenseQuadratic {
    pub u_mat: CMatrix,
    pub u_vec: CVector,
    pub u_const: f64,
}

impl DenseQuadratic {
    pub fn eval(&self, i: &CVector) -> f64 {
        let quad = (i.adjoint() * &self.u_mat * i)[(0, 0)].re;
        let lin = (self.u_vec.adjoint() * i)[(0, 0)].re;
        quad + 2.0 * lin + self.u_const
    }
}

/// Helper-k constraint in dense form (error space dimension `M (K-1)`).
#[allow(clippy::too_many_arguments)]
pub fn dense_quadratic_helper_k(
    w_mat: &CMatrix,
    e: &CVector,
    h_hat_e: &CMatrix,
    lambda_e: &[f64],
    a_e: f64,
    sigma2_e: f64,
    r_tilde_k: f64,
    r_sec: f64,
) -> DenseQuadratic {
    let m = e.len();
    let e_mat = e * e.adjoint();
    let sqrt_sigma = kron_sqrt_sigma(lambda_e, m);
    let kron = w_mat.transpose().kronecker(&e_mat);
    let u_mat = (&sqrt_sigma * kron * &sqrt_sigma) * C64::new(a_e, 0.0);
    let ehw = &e_mat * h_hat_e * w_mat;
    let u_vec = &sqrt_sigma * linalg::vec_col_major(&ehw) * C64::new(a_e, 0.0);
    let qf = (e.adjoint() * h_hat_e * w_mat * h_hat_e.adjoint() * e)[(0, 0)].re;
    let ln2 = std::f64::consts::LN_2;
    let u_const =
        a_e * qf - ((r_tilde_k - r_sec) * 2.0 * ln2 - a_e + a_e.ln() + 1.0) * sigma2_e;
    DenseQuadratic { u_mat, u_vec, u_const }
}

/// User-K constraint in dense form (error space dimension `2 M (K-1)`).
#[allow(clippy::too_many_arguments)]
pub fn dense_quadratic_user_big_k(
    w_mat: &CMatrix,
    w: &CVector,
    e: &CVector,
    h_hat_k: &CMatrix,
    h_hat_e: &CMatrix,
    lambda_k: &[f64],
    lambda_e: &[f64],
    a_k: f64,
    a_e: f64,
    v: C64,
    sigma2_k: f64,
    sigma2_e: f64,
    r_sec: f64,
) -> DenseQuadratic {
    let m = e.len();
    let kh = lambda_k.len();
    let n_half = m * kh;
    let e_mat = e * e.adjoint();
    let av2 = a_k * v.norm_sqr();
    let ae_s = a_e / sigma2_e;

    let sq_k = kron_sqrt_sigma(lambda_k, m);
    let sq_e = kron_sqrt_sigma(lambda_e, m);
    let kron = w_mat.transpose().kronecker(&e_mat);
    let block_k = (&sq_k * &kron * &sq_k) * C64::new(av2, 0.0);
    let block_e = (&sq_e * &kron * &sq_e) * C64::new(ae_s, 0.0);
    let mut u_mat = CMatrix::zeros(2 * n_half, 2 * n_half);
    u_mat.view_mut((0, 0), (n_half, n_half)).copy_from(&block_k);
    u_mat.view_mut((n_half, n_half), (n_half, n_half)).copy_from(&block_e);

    // u_K = [ Sigma_K^{1/2} (a_K|v|^2 vec(E H_K W) - a_K conj(v) vec(e w^H));
    //         (a_E / sigma_E^2) Sigma_E^{1/2} vec(E H_E W) ].
    let vec_k = linalg::vec_col_major(&(&e_mat * h_hat_k * w_mat)) * C64::new(av2, 0.0)
        - linalg::vec_col_major(&(e * w.adjoint())) * (v.conj() * C64::new(a_k, 0.0));
    let top = &sq_k * vec_k;
    let bottom = &sq_e * linalg::vec_col_major(&(&e_mat * h_hat_e * w_mat)) * C64::new(ae_s, 0.0);
    let mut u_vec = CVector::zeros(2 * n_half);
    u_vec.rows_mut(0, n_half).copy_from(&top);
    u_vec.rows_mut(n_half, n_half).copy_from(&bottom);

    let qf_k = (e.adjoint() * h_hat_k * w_mat * h_hat_k.adjoint() * e)[(0, 0)].re;
    let qf_e = (e.adjoint() * h_hat_e * w_mat * h_hat_e.adjoint() * e)[(0, 0)].re;
    let lin = (v * (e.adjoint() * h_hat_k * w)[(0, 0)]).re;
    let ln2 = std::f64::consts::LN_2;
    let c = a_e.ln() + a_k.ln() - a_e - a_k - 2.0 * r_sec * ln2 - sigma2_k * av2 + 2.0;
    let u_const = av2 * qf_k + ae_s * qf_e - 2.0 * a_k * lin - c;
    DenseQuadratic { u_mat, u_vec, u_const }
}

fn kron_sqrt_sigma(lambda: &[f64], m: usize) -> CMatrix {
    let kh = lambda.len();
    let lam_sqrt = CMatrix::from_fn(kh, kh, |i, j| {
        if i == j { C64::new(lambda[i].sqrt(), 0.0) } else { C64::new(0.0, 0.0) }
    });
    lam_sqrt.kronecker(&CMatrix::identity(m, m))
}

/// Summary scalars of a dense constraint, for cross-checking the fast path.
pub fn dense_terms(q: &DenseQuadratic) -> BtiTerms {
    let trace_u = q.u_mat.diagonal().iter().map(|x| x.re).sum();
    let frob_u = q.u_mat.norm();
    let norm_u = q.u_vec.norm();
    let lambda_max_u = linalg::lambda_max(&q.u_mat).max(0.0);
    BtiTerms { trace_u, frob_u, norm_u, lambda_max_u, u_const: q.u_const }
}

/// Empirical violation probability of a dense quadratic constraint under
/// `i ~ CN(0, I)`, evaluated in the eigenbasis so each sample is O(n).
pub fn monte_carlo_violation(
    q: &DenseQuadratic,
    samples: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> f64 {
    use rand::RngExt;
    use rand_distr::StandardNormal;
    let n = q.u_mat.nrows();
    let (vals, vecs) = linalg::hermitian_eig(&q.u_mat);
    let u_rot = vecs.adjoint() * &q.u_vec;
    let mut violations = 0usize;
    let s = (0.5f64).sqrt();
    for _ in 0..samples {
        let xi = CVector::from_fn(n, |_, _| {
            C64::new(
                s * rng.sample::<f64, _>(StandardNormal),
                s * rng.sample::<f64, _>(StandardNormal),
            )
        });
        let quad: f64 = (0..n).map(|i| vals[i] * xi[i].norm_sqr()).sum();
        let lin = (u_rot.adjoint() * &xi)[(0, 0)].re;
        if quad + 2.0 * lin + q.u_const > 0.0 {
            violations += 1;
        }
    }
    violations as f64 / samples as f64
}

/// Validates that an error-model slice matches the helper count.
pub fn check_helper_count(lambda: &[f64], kh: usize) -> Result<(), SecError> {
    if lambda.len() != kh {
        return Err(SecError::ShapeMismatch {
            expected: format!("{kh} helper variances"),
            got: format!("{}", lambda.len()),
        });
    }
    Ok(())
}
