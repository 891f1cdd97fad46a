//! Cone-program builders for the two heavy blocks of the robust design:
//! the `{z, w, W, t}` subproblem and the penalty-CCP reflection subproblem.

use rand_chacha::ChaCha8Rng;

use super::{random_phases, ActiveSolution, EstimatedChannels, PccpParams};
use crate::channel::{CsiErrorModel, SystemConfig};
use crate::conic::{CLinExpr, Cone, ConeProgram, LinExpr, SolveStatus};
use crate::error::SecError;
use crate::linalg;
use crate::rates::rate_helper;
use crate::robust::bti::rho_bar;
use crate::{C64, CMatrix, CVector};

const LN2: f64 = std::f64::consts::LN_2;
const SUBPROBLEM_TOL: f64 = 1e-8;

struct BtiWeights {
    c_x: f64,
    big_l: f64,
}

fn bti_weights(config: &SystemConfig) -> BtiWeights {
    let rb = rho_bar(config.rho_outage, config.k);
    BtiWeights { c_x: (2.0 * (1.0 / rb).ln()).sqrt(), big_l: -rb.ln() }
}

/// Rank-one tolerance, scaled to the live magnitudes of `W`: the larger of
/// the current trace and the harvest power that bounds `||w||^2`.
fn rank_epsilon(state: &ActiveSolution, est: &EstimatedChannels, config: &SystemConfig) -> f64 {
    let tr: f64 = state.w_mat.diagonal().iter().map(|x| x.re).sum();
    let harvest = est.base.g_users[..config.k - 1]
        .iter()
        .zip(&state.t)
        .map(|(g, &t)| (1.0 - t) * (g.adjoint() * &est.base.q * &state.z)[(0, 0)].norm_sqr())
        .fold(0.0f64, f64::max);
    1e-4 * tr.max(harvest)
}

fn re_of_conj_inner(expr: &CLinExpr, scale: C64) -> LinExpr {
    expr.scaled(scale).re.clone()
}

/// One solve of the convex `{R_sec, z, w, W, t, x, y}` subproblem at the
/// expansion point carried by `state` (reflection and auxiliaries fixed).
pub fn solve_subproblem_zwwt(
    state: &ActiveSolution,
    est: &EstimatedChannels,
    errors: &CsiErrorModel,
    config: &SystemConfig,
) -> Result<ActiveSolution, SecError> {
    let n = config.n;
    let kh = config.k - 1;
    let m = config.m() as f64;
    let sigma2_e = config.noise.eve;
    let sigma2_kk = *config.noise.users.last().unwrap();
    let w8 = bti_weights(config);
    let a_e = state.a_e;
    let a_k = state.a_k;
    let v = state.v;
    let av2 = a_k * v.norm_sqr();
    let ae_s = a_e / sigma2_e;
    let eps = rank_epsilon(state, est, config);

    let mut p = ConeProgram::new();
    let r_sec = p.add_var();
    let z = p.add_cvec(n - 1);
    let w = p.add_cvec(kh);
    let w_mat = p.add_hermitian(kh);
    let t: Vec<_> = p.add_vars(kh);
    let x_e = p.add_var();
    let x_k = p.add_var();
    let y_e = p.add_var();
    let y_k = p.add_var();
    p.add_objective(r_sec, -1.0);

    let f_e = est.h_e_hat.adjoint() * &state.e;
    let f_k = est.h_k_hat.adjoint() * &state.e;
    let qf_e = w_mat.quad_form(&f_e);
    let qf_k = w_mat.quad_form(&f_k);
    let tr_lam_e = w_mat.weighted_trace(&errors.lambda_e);
    let tr_lam_k = w_mat.weighted_trace(&errors.lambda_k);

    // Helper-side rows: surrogate rate hypograph plus the Bernstein first row.
    for idx in 0..kh {
        let g_k = &est.base.g_users[idx];
        let sigma2_k = config.noise.users[idx];
        let qg = est.base.q.adjoint() * g_k;
        let p_prev = (g_k.adjoint() * &est.base.q * &state.z)[(0, 0)];
        let t_prev = state.t[idx];
        let p_expr = z.inner_with(&qg); // g_k^H Q z

        // u_qol >= c1 / t with c1 = t_prev^2 |p_prev|^2 / sigma_k^2.
        let c1 = t_prev * t_prev * p_prev.norm_sqr() / sigma2_k;
        let u_qol = p.add_var();
        p.add_block(
            vec![
                LinExpr::var(u_qol).scaled(0.5),
                LinExpr::var(t[idx]),
                LinExpr::constant(c1.sqrt()),
            ],
            Cone::RotatedSecondOrder,
        );

        // r_ln <= ln(1 + (2 t_prev / sigma_k^2) Re{conj(p_prev) p(z)} - u_qol).
        let cross = re_of_conj_inner(&p_expr, p_prev.conj());
        let s_expr = LinExpr::constant(1.0) + cross.scaled(2.0 * t_prev / sigma2_k)
            - LinExpr::var(u_qol);
        let r_ln = p.add_var();
        p.add_log_hypograph(LinExpr::var(r_ln), s_expr);

        // a_E M Tr(L_E W) + c_x x_E + L y_E + a_E e^H He W He^H e
        //   + 2 ln2 s_E^2 R_sec - s_E^2 r_ln + s_E^2 (a_E - ln a_E - 1) <= 0.
        let row = tr_lam_e.scaled(a_e * m)
            + LinExpr::var(x_e).scaled(w8.c_x)
            + LinExpr::var(y_e).scaled(w8.big_l)
            + qf_e.scaled(a_e)
            + LinExpr::var(r_sec).scaled(2.0 * LN2 * sigma2_e)
            - LinExpr::var(r_ln).scaled(sigma2_e)
            + LinExpr::constant(sigma2_e * (a_e - a_e.ln() - 1.0));
        p.add_nonneg(-row);

        // Harvesting: |w_k|^2 <= Xi(z, t_k) via an epigraph on the
        // quadratic-over-linear tail of Xi.
        let d_k = (1.0 - t_prev).powi(2) * p_prev.norm_sqr();
        let h_harv = p.add_var();
        p.add_block(
            vec![
                LinExpr::var(h_harv).scaled(0.5),
                LinExpr::constant(1.0) - LinExpr::var(t[idx]),
                LinExpr::constant(d_k.sqrt()),
            ],
            Cone::RotatedSecondOrder,
        );
        let lin = cross.scaled(2.0 * (1.0 - t_prev));
        let budget = lin - LinExpr::var(h_harv);
        let wk = w.entry(idx);
        p.add_quad_over_lin(budget, LinExpr::constant(1.0), &[wk.re.clone(), wk.im.clone()]);

        // 0 <= t <= 1.
        p.add_nonneg(LinExpr::var(t[idx]));
        p.add_nonneg(LinExpr::constant(1.0) - LinExpr::var(t[idx]));
    }

    let sqrt_lambda_e: Vec<f64> = errors.lambda_e.iter().map(|l| l.sqrt()).collect();
    let sqrt_lambda_k: Vec<f64> = errors.lambda_k.iter().map(|l| l.sqrt()).collect();

    // Bernstein second row for the helpers: x_E bounds the stacked norm.
    {
        let mut tail = Vec::new();
        for entry in w_mat.vec_sym_scaled(&sqrt_lambda_e) {
            let scaled = entry.scaled(C64::new(a_e * m, 0.0));
            tail.push(scaled.re.clone());
            tail.push(scaled.im);
        }
        let wf = w_mat.mat_vec(&f_e);
        for (i, entry) in wf.iter().enumerate() {
            let c = (2.0 * m).sqrt() * a_e * errors.lambda_e[i].sqrt();
            let scaled = entry.scaled(C64::new(c, 0.0));
            tail.push(scaled.re.clone());
            tail.push(scaled.im);
        }
        p.add_soc(LinExpr::var(x_e), tail);
        p.add_nonneg(LinExpr::var(y_e) - tr_lam_e.scaled(a_e * m));
        p.add_nonneg(LinExpr::var(y_e));
    }

    // User-K first row.
    {
        let w_inner = w.inner_with(&f_k); // e^H Hk_hat w
        let lin = re_of_conj_inner(&w_inner, v);
        let c0 = a_e.ln() + a_k.ln() - a_e - a_k - sigma2_kk * av2 + 2.0;
        let row = tr_lam_k.scaled(av2 * m)
            + tr_lam_e.scaled(ae_s * m)
            + LinExpr::var(x_k).scaled(w8.c_x)
            + LinExpr::var(y_k).scaled(w8.big_l)
            + qf_k.scaled(av2)
            + qf_e.scaled(ae_s)
            - lin.scaled(2.0 * a_k)
            + LinExpr::var(r_sec).scaled(2.0 * LN2)
            - LinExpr::constant(c0);
        p.add_nonneg(-row);
    }

    // User-K second row.
    {
        let mut tail = Vec::new();
        for entry in w_mat.vec_sym_scaled(&sqrt_lambda_k) {
            let scaled = entry.scaled(C64::new(av2 * m, 0.0));
            tail.push(scaled.re.clone());
            tail.push(scaled.im);
        }
        for entry in w_mat.vec_sym_scaled(&sqrt_lambda_e) {
            let scaled = entry.scaled(C64::new(ae_s * m, 0.0));
            tail.push(scaled.re.clone());
            tail.push(scaled.im);
        }
        let wfk = w_mat.mat_vec(&f_k);
        for (i, entry) in wfk.iter().enumerate() {
            let root = (2.0 * m).sqrt() * errors.lambda_k[i].sqrt();
            let combo = entry.scaled(C64::new(av2, 0.0))
                - w.entry(i).scaled(v * C64::new(a_k, 0.0));
            let scaled = combo.scaled(C64::new(root, 0.0));
            tail.push(scaled.re.clone());
            tail.push(scaled.im);
        }
        let wfe = w_mat.mat_vec(&f_e);
        for (i, entry) in wfe.iter().enumerate() {
            let c = (2.0 * m).sqrt() * ae_s * errors.lambda_e[i].sqrt();
            let scaled = entry.scaled(C64::new(c, 0.0));
            tail.push(scaled.re.clone());
            tail.push(scaled.im);
        }
        p.add_soc(LinExpr::var(x_k), tail);
        p.add_nonneg(LinExpr::var(y_k) - tr_lam_k.scaled(av2 * m));
        p.add_nonneg(LinExpr::var(y_k) - tr_lam_e.scaled(ae_s * m));
        p.add_nonneg(LinExpr::var(y_k));
    }

    // Power budget.
    p.add_soc(LinExpr::constant(config.p_max.sqrt()), z.scalar_exprs());

    // Rank-one surrogates tying w and W together.
    {
        let (_, d) = linalg::top_eigpair(&state.w_mat);
        p.add_nonneg(
            LinExpr::constant(eps) + w_mat.quad_form(&d) - w_mat.trace(),
        );
        p.add_quad_over_lin(
            w_mat.trace() + LinExpr::constant(eps),
            LinExpr::constant(1.0),
            &w.scalar_exprs(),
        );
        let w_inner_prev = w.inner_with(&state.w); // w_prev^H w
        p.add_nonneg(
            w_inner_prev.re.clone().scaled(2.0)
                - LinExpr::constant(state.w.norm_squared())
                - w_mat.trace()
                + LinExpr::constant(eps),
        );
    }

    p.embed_hermitian_psd(&w_mat.entries())?;

    let sol = p.solve(SUBPROBLEM_TOL);
    match sol.status {
        SolveStatus::Optimal => {
            let mut next = state.clone();
            // The program's rate variable is free; the reported secrecy
            // rate is clamped like everywhere else.
            next.r_sec = sol.x[r_sec].max(0.0);
            next.z = z.read(&sol.x);
            next.w = w.read(&sol.x);
            next.w_mat = linalg::hermitize(&w_mat.read(&sol.x));
            next.t = t.iter().map(|&id| sol.x[id].clamp(0.0, 1.0)).collect();
            next.x = [sol.x[x_e], sol.x[x_k]];
            next.y = [sol.x[y_e], sol.x[y_k]];
            next.feasible = true;
            Ok(next)
        }
        SolveStatus::Infeasible => {
            let mut next = state.clone();
            next.feasible = false;
            Ok(next)
        }
        status => Err(SecError::Solver(format!(
            "{{z,w,W,t}} subproblem ended with {status:?}"
        ))),
    }
}

/// Builds and solves one penalty-CCP inner problem at iterate `e_prev` and
/// penalty `lambda`, returning the new reflection vector and `||b||_1`.
#[allow(clippy::too_many_arguments)]
fn pccp_inner(
    state: &ActiveSolution,
    est: &EstimatedChannels,
    errors: &CsiErrorModel,
    config: &SystemConfig,
    e_prev: &CVector,
    lambda: f64,
) -> Result<(CVector, f64), SecError> {
    let m_usize = config.m();
    let m = m_usize as f64;
    let kh = config.k - 1;
    let sigma2_e = config.noise.eve;
    let sigma2_kk = *config.noise.users.last().unwrap();
    let w8 = bti_weights(config);
    let a_e = state.a_e;
    let a_k = state.a_k;
    let v = state.v;
    let av2 = a_k * v.norm_sqr();
    let ae_s = a_e / sigma2_e;

    // Constant pieces at fixed {z, w, W, t}.
    let tr_lam_e: f64 = errors
        .lambda_e
        .iter()
        .enumerate()
        .map(|(i, &l)| l * state.w_mat[(i, i)].re)
        .sum();
    let tr_lam_k: f64 = errors
        .lambda_k
        .iter()
        .enumerate()
        .map(|(i, &l)| l * state.w_mat[(i, i)].re)
        .sum();
    let lam_w_e = CMatrix::from_fn(kh, kh, |i, j| {
        state.w_mat[(i, j)] * C64::new((errors.lambda_e[i] * errors.lambda_e[j]).sqrt(), 0.0)
    });
    let lam_w_k = CMatrix::from_fn(kh, kh, |i, j| {
        state.w_mat[(i, j)] * C64::new((errors.lambda_k[i] * errors.lambda_k[j]).sqrt(), 0.0)
    });
    let w_psd = psd_part(&state.w_mat);
    let c_e = &est.h_e_hat * &w_psd * est.h_e_hat.adjoint();
    let c_k = &est.h_k_hat * &w_psd * est.h_k_hat.adjoint();
    let s_e_half = linalg::psd_sqrt(&c_e);
    let s_k_half = linalg::psd_sqrt(&c_k);
    let hk_w = &est.h_k_hat * &state.w;

    let r_tilde: Vec<f64> = (0..kh)
        .map(|idx| {
            rate_helper(
                &state.z,
                state.t[idx],
                &est.base.g_users[idx],
                &est.base.q,
                config.noise.users[idx],
            )
        })
        .collect();

    let mut p = ConeProgram::new();
    let r_sec = p.add_var();
    let e = p.add_cvec(m_usize);
    let b: Vec<_> = p.add_vars(2 * m_usize);
    let x_e = p.add_var();
    let x_k = p.add_var();
    let y_e = p.add_var();
    let y_k = p.add_var();
    let s_ee = p.add_var(); // epigraph of e^H C_E e
    let s_kk = p.add_var(); // epigraph of e^H C_K e
    p.add_objective(r_sec, -1.0);
    for &bi in &b {
        p.add_objective(bi, lambda);
        p.add_nonneg(LinExpr::var(bi));
    }

    // Epigraphs of the two convex quadratics in e.
    for (var, half) in [(s_ee, &s_e_half), (s_kk, &s_k_half)] {
        let mut tail = Vec::new();
        for i in 0..m_usize {
            let mut acc = CLinExpr::zero();
            for j in 0..m_usize {
                acc = acc + e.entry(j).scaled(half[(i, j)]);
            }
            tail.push(acc.re.clone());
            tail.push(acc.im);
        }
        p.add_quad_over_lin(LinExpr::var(var), LinExpr::constant(1.0), &tail);
    }

    // Helper rows.
    for idx in 0..kh {
        let row = LinExpr::constant(a_e * m * tr_lam_e)
            + LinExpr::var(x_e).scaled(w8.c_x)
            + LinExpr::var(y_e).scaled(w8.big_l)
            + LinExpr::var(s_ee).scaled(a_e)
            + LinExpr::var(r_sec).scaled(2.0 * LN2 * sigma2_e)
            + LinExpr::constant(
                -2.0 * LN2 * sigma2_e * r_tilde[idx] + sigma2_e * (a_e - a_e.ln() - 1.0),
            );
        p.add_nonneg(-row);
    }
    {
        let mut tail = Vec::new();
        for j in 0..kh {
            for i in 0..kh {
                let c = lam_w_e[(i, j)] * C64::new(a_e * m, 0.0);
                tail.push(LinExpr::constant(c.re));
                tail.push(LinExpr::constant(c.im));
            }
        }
        // sqrt(2M) a_E Lambda_E^{1/2} W He^H e, affine in e.
        let g_mat = &w_psd * est.h_e_hat.adjoint();
        for i in 0..kh {
            let scale = (2.0 * m).sqrt() * a_e * errors.lambda_e[i].sqrt();
            let mut acc = CLinExpr::zero();
            for j in 0..m_usize {
                acc = acc + e.entry(j).scaled(g_mat[(i, j)] * C64::new(scale, 0.0));
            }
            tail.push(acc.re.clone());
            tail.push(acc.im);
        }
        p.add_soc(LinExpr::var(x_e), tail);
        p.add_nonneg(LinExpr::var(y_e) - LinExpr::constant(a_e * m * tr_lam_e));
        p.add_nonneg(LinExpr::var(y_e));
    }

    // User-K rows.
    {
        let inner = e.inner_with(&hk_w).conj(); // e^H (Hk_hat w)
        let lin = re_of_conj_inner(&inner, v);
        let c0 = a_e.ln() + a_k.ln() - a_e - a_k - sigma2_kk * av2 + 2.0;
        let row = LinExpr::constant(av2 * m * tr_lam_k + ae_s * m * tr_lam_e)
            + LinExpr::var(x_k).scaled(w8.c_x)
            + LinExpr::var(y_k).scaled(w8.big_l)
            + LinExpr::var(s_kk).scaled(av2)
            + LinExpr::var(s_ee).scaled(ae_s)
            - lin.scaled(2.0 * a_k)
            + LinExpr::var(r_sec).scaled(2.0 * LN2)
            - LinExpr::constant(c0);
        p.add_nonneg(-row);

        let mut tail = Vec::new();
        for j in 0..kh {
            for i in 0..kh {
                let c = lam_w_k[(i, j)] * C64::new(av2 * m, 0.0);
                tail.push(LinExpr::constant(c.re));
                tail.push(LinExpr::constant(c.im));
            }
        }
        for j in 0..kh {
            for i in 0..kh {
                let c = lam_w_e[(i, j)] * C64::new(ae_s * m, 0.0);
                tail.push(LinExpr::constant(c.re));
                tail.push(LinExpr::constant(c.im));
            }
        }
        let gk_mat = &w_psd * est.h_k_hat.adjoint();
        for i in 0..kh {
            let root = (2.0 * m).sqrt() * errors.lambda_k[i].sqrt();
            let mut acc = CLinExpr::zero();
            for j in 0..m_usize {
                acc = acc + e.entry(j).scaled(gk_mat[(i, j)] * C64::new(av2 * root, 0.0));
            }
            let offset = state.w[i] * v * C64::new(a_k * root, 0.0);
            acc = acc - crate::conic::cconst(offset);
            tail.push(acc.re.clone());
            tail.push(acc.im);
        }
        let ge_mat = &w_psd * est.h_e_hat.adjoint();
        for i in 0..kh {
            let scale = (2.0 * m).sqrt() * ae_s * errors.lambda_e[i].sqrt();
            let mut acc = CLinExpr::zero();
            for j in 0..m_usize {
                acc = acc + e.entry(j).scaled(ge_mat[(i, j)] * C64::new(scale, 0.0));
            }
            tail.push(acc.re.clone());
            tail.push(acc.im);
        }
        p.add_soc(LinExpr::var(x_k), tail);
        p.add_nonneg(LinExpr::var(y_k) - LinExpr::constant(av2 * m * tr_lam_k));
        p.add_nonneg(LinExpr::var(y_k) - LinExpr::constant(ae_s * m * tr_lam_e));
        p.add_nonneg(LinExpr::var(y_k));
    }

    // Relaxed unit-modulus rows with nonnegative slack b.
    for mm in 0..m_usize {
        let em = e.entry(mm);
        let cross = re_of_conj_inner(&em.conj(), e_prev[mm]); // Re{conj(e_m) e_prev_m}
        p.add_nonneg(
            LinExpr::var(b[mm]) - LinExpr::constant(1.0 + e_prev[mm].norm_sqr())
                + cross.scaled(2.0),
        );
        p.add_quad_over_lin(
            LinExpr::constant(1.0) + LinExpr::var(b[m_usize + mm]),
            LinExpr::constant(1.0),
            &[em.re.clone(), em.im.clone()],
        );
    }

    let sol = p.solve(1e-7);
    if sol.status != SolveStatus::Optimal {
        return Err(SecError::Solver(format!(
            "penalty-CCP inner problem ended with {:?}",
            sol.status
        )));
    }
    let e_new = e.read(&sol.x);
    let b_norm: f64 = b.iter().map(|&bi| sol.x[bi].max(0.0)).sum();
    Ok((e_new, b_norm))
}

fn psd_part(w: &CMatrix) -> CMatrix {
    let (vals, vecs) = linalg::hermitian_eig(w);
    let d = CMatrix::from_diagonal(&CVector::from_iterator(
        vals.len(),
        vals.iter().map(|&l| C64::new(l.max(0.0), 0.0)),
    ));
    &vecs * d * vecs.adjoint()
}

/// Penalty-CCP pass over the reflection coefficients: escalates the slack
/// penalty until the relaxed unit-modulus constraints close, restarting
/// from fresh random phases when an attempt stalls. The returned vector is
/// normalized entrywise.
pub fn solve_subproblem_e_pccp(
    state: &ActiveSolution,
    est: &EstimatedChannels,
    errors: &CsiErrorModel,
    config: &SystemConfig,
    pccp: PccpParams,
    rng: &mut ChaCha8Rng,
) -> Result<CVector, SecError> {
    let m = config.m();
    let mut e_cur = state.e.clone();
    for _attempt in 0..=pccp.restarts {
        let mut lambda = pccp.lambda0;
        let mut failed = false;
        for _j in 0..pccp.j_max {
            let (e_next, b_norm) = match pccp_inner(state, est, errors, config, &e_cur, lambda) {
                Ok(out) => out,
                Err(_) => {
                    failed = true;
                    break;
                }
            };
            let delta: f64 = (0..m).map(|i| (e_next[i] - e_cur[i]).norm()).sum();
            e_cur = e_next;
            lambda = (pccp.gamma * lambda).min(pccp.lambda_max);
            if b_norm <= pccp.chi && delta <= pccp.nu {
                return Ok(linalg::unit_phases_of(&e_cur, &state.e, 1e-12));
            }
        }
        let _ = failed;
        e_cur = random_phases(m, rng);
    }
    Err(SecError::PccpNonConvergence(format!(
        "no unit-modulus solution after {} restarts",
        pccp.restarts
    )))
}
