//! Outage-constrained secrecy-rate maximization against an active
//! eavesdropper under statistical cascaded-CSI errors.
//!
//! The design alternates four blocks: closed-form auxiliary updates, a cone
//! subproblem in the multicast beamformer / forwarding weights / power
//! splits `{z, w, W, t}`, and a penalty-CCP pass over the reflection
//! coefficients `e`. Every outage constraint is enforced through the
//! Bernstein-type deterministic form built in [`bti`].

pub mod bti;
mod subproblems;

pub use bti::{
    bti_deterministic_check, bti_terms_helper_k, bti_terms_user_big_k, dense_quadratic_helper_k,
    dense_quadratic_user_big_k, dense_terms, monte_carlo_violation, rho_bar, surrogate_rk_tilde,
    BtiTerms, DenseQuadratic,
};
pub use subproblems::{solve_subproblem_e_pccp, solve_subproblem_zwwt};

use rand::RngExt;
use rand_chacha::ChaCha8Rng;

use crate::channel::{estimated_channels, sample_csi_errors, ChannelSet, CsiErrorModel, SystemConfig};
use crate::error::SecError;
use crate::linalg;
use crate::rates::{rate_helper, rate_reflect, tight_aux};
use crate::{C64, CMatrix, CVector};

/// True channels plus the estimated cascades the transmitters design on.
#[derive(Debug, Clone)]
pub struct EstimatedChannels {
    pub base: ChannelSet,
    pub h_k_hat: CMatrix,
    pub h_e_hat: CMatrix,
}

impl EstimatedChannels {
    /// Perfect-CSI view: estimates equal the true cascades.
    pub fn perfect(base: ChannelSet) -> Self {
        let h_k_hat = base.h_cascade_k.clone();
        let h_e_hat = base.h_cascade_e.clone();
        Self { base, h_k_hat, h_e_hat }
    }

    /// Estimates from sampled errors: `H_hat = H - Delta`.
    pub fn from_errors(
        base: ChannelSet,
        delta_k: &CMatrix,
        delta_e: &CMatrix,
    ) -> Result<Self, SecError> {
        let h_k_hat = estimated_channels(&base.h_cascade_k, delta_k)?;
        let h_e_hat = estimated_channels(&base.h_cascade_e, delta_e)?;
        Ok(Self { base, h_k_hat, h_e_hat })
    }
}

/// Penalty-CCP knobs (escalation factor, slack tolerance, restart budget).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct PccpParams {
    pub lambda0: f64,
    pub gamma: f64,
    pub lambda_max: f64,
    pub j_max: usize,
    pub chi: f64,
    pub nu: f64,
    pub restarts: usize,
}

impl Default for PccpParams {
    fn default() -> Self {
        Self {
            lambda0: 10.0,
            gamma: 3.0,
            lambda_max: 1e4,
            j_max: 30,
            chi: 1e-5,
            nu: 1e-4,
            restarts: 3,
        }
    }
}

/// Outer-loop stopping rule of the alternating optimization.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct ActiveStop {
    pub tol: f64,
    pub max_outer: usize,
}

impl Default for ActiveStop {
    fn default() -> Self {
        Self { tol: 1e-3, max_outer: 30 }
    }
}

/// Full decision state of the robust design.
#[derive(Debug, Clone)]
pub struct ActiveSolution {
    pub r_sec: f64,
    /// Reduced multicast beamformer; the physical one is `f = Q z`.
    pub z: CVector,
    /// Helper forwarding weights.
    pub w: CVector,
    /// Gram-matrix lift of `w` (kept near rank one by surrogate constraints).
    pub w_mat: CMatrix,
    /// IRS reflection coefficients, unit modulus.
    pub e: CVector,
    /// Power-splitting ratios in [0, 1].
    pub t: Vec<f64>,
    pub a_k: f64,
    pub a_e: f64,
    pub v: C64,
    /// Bernstein slacks (x_E, x_K).
    pub x: [f64; 2],
    /// Bernstein slacks (y_E, y_K).
    pub y: [f64; 2],
    pub feasible: bool,
    pub iterations: usize,
}

fn sigma2_k_big(config: &SystemConfig) -> f64 {
    *config.noise.users.last().unwrap()
}

/// Largest secrecy rate keeping every Bernstein first row nonpositive at
/// the given decision variables and auxiliaries, together with the tight
/// slack values. The bound is evaluated both at the lifted `W` and at the
/// exact rank-one `w w^H` and the smaller value is kept, so the certificate
/// also holds for the beamformer that is actually transmitted.
#[allow(clippy::too_many_arguments)]
fn closed_form_rsec(
    z: &CVector,
    w: &CVector,
    w_mat: &CMatrix,
    t: &[f64],
    e: &CVector,
    a_k: f64,
    a_e: f64,
    v: C64,
    est: &EstimatedChannels,
    errors: &CsiErrorModel,
    config: &SystemConfig,
) -> (f64, [f64; 2], [f64; 2]) {
    let rb = rho_bar(config.rho_outage, config.k);
    let ln2 = std::f64::consts::LN_2;
    let sigma2_e = config.noise.eve;
    let sigma2_kk = sigma2_k_big(config);
    let rank_one = w * w.adjoint();

    let mut best = f64::INFINITY;
    let mut x = [0.0; 2];
    let mut y = [0.0; 2];
    for (which, wm) in [w_mat, &rank_one].iter().enumerate() {
        for (idx, gk) in est.base.g_users[..config.k - 1].iter().enumerate() {
            let r_k = rate_helper(z, t[idx], gk, &est.base.q, config.noise.users[idx]);
            let terms = bti_terms_helper_k(
                wm,
                e,
                &est.h_e_hat,
                &errors.lambda_e,
                a_e,
                sigma2_e,
                r_k,
                0.0,
            );
            // u_const is affine in R_sec with slope 2 ln2 sigma_E^2.
            let cap = -terms.lhs(rb) / (2.0 * ln2 * sigma2_e);
            best = best.min(cap);
            if which == 0 && idx == 0 {
                let (xs, ys) = terms.tight_slacks();
                x[0] = xs;
                y[0] = ys;
            }
        }
        let terms = bti_terms_user_big_k(
            wm,
            w,
            e,
            &est.h_k_hat,
            &est.h_e_hat,
            &errors.lambda_k,
            &errors.lambda_e,
            a_k,
            a_e,
            v,
            sigma2_kk,
            sigma2_e,
            0.0,
        );
        let cap = -terms.lhs(rb) / (2.0 * ln2);
        best = best.min(cap);
        if which == 0 {
            let (xs, ys) = terms.tight_slacks();
            x[1] = xs;
            y[1] = ys;
        }
    }
    (best.max(0.0), x, y)
}

/// Feasible starting point: random reflection phases, even power splits,
/// the multicast beamformer along the dominant helper direction inside the
/// null space, and forwarding weights phase-aligned to the estimated
/// cascade at full harvested power.
pub fn init_active(
    est: &EstimatedChannels,
    errors: &CsiErrorModel,
    config: &SystemConfig,
    rng: &mut ChaCha8Rng,
) -> ActiveSolution {
    let m = config.m();
    let kh = config.k - 1;
    let e = random_phases(m, rng);
    let t = vec![0.5; kh];

    let mut acc = CMatrix::zeros(config.n - 1, config.n - 1);
    for gk in &est.base.g_users[..kh] {
        let qg = est.base.q.adjoint() * gk;
        acc += &qg * qg.adjoint();
    }
    let (_, zdir) = linalg::top_eigpair(&acc);
    let z = zdir * C64::new(config.p_max.sqrt(), 0.0);

    let cascade_gain = est.h_k_hat.adjoint() * &e;
    let mut w = CVector::zeros(kh);
    for (idx, gk) in est.base.g_users[..kh].iter().enumerate() {
        let p = (gk.adjoint() * &est.base.q * &z)[(0, 0)].norm_sqr();
        let mag = ((1.0 - t[idx]) * p).sqrt();
        let gain = cascade_gain[idx];
        let phase = if gain.norm() > 0.0 { gain / C64::new(gain.norm(), 0.0) } else { C64::new(1.0, 0.0) };
        w[idx] = phase * C64::new(mag, 0.0);
    }
    let w_mat = &w * w.adjoint();

    let q_k = (e.adjoint() * &est.h_k_hat * &w)[(0, 0)];
    let q_e = (e.adjoint() * &est.h_e_hat * &w)[(0, 0)];
    let (a_k, v) = tight_aux(q_k, sigma2_k_big(config));
    let a_e = 1.0 / (1.0 + q_e.norm_sqr() / config.noise.eve);
    let (r_sec, x, y) =
        closed_form_rsec(&z, &w, &w_mat, &t, &e, a_k, a_e, v, est, errors, config);
    ActiveSolution {
        r_sec,
        z,
        w,
        w_mat,
        e,
        t,
        a_k,
        a_e,
        v,
        x,
        y,
        feasible: false,
        iterations: 0,
    }
}

pub(crate) fn random_phases(m: usize, rng: &mut ChaCha8Rng) -> CVector {
    CVector::from_fn(m, |_, _| {
        C64::from_polar(1.0, rng.random_range(0.0..2.0 * std::f64::consts::PI))
    })
}

/// Closed-form refresh of the auxiliaries at the current point, tight
/// slacks, and the recovered secrecy rate; reverts to the incoming state if
/// the refresh would lower the objective.
pub fn update_aux_and_rsec(
    state: &ActiveSolution,
    est: &EstimatedChannels,
    errors: &CsiErrorModel,
    config: &SystemConfig,
) -> ActiveSolution {
    let q_k = (state.e.adjoint() * &est.h_k_hat * &state.w)[(0, 0)];
    let q_e = (state.e.adjoint() * &est.h_e_hat * &state.w)[(0, 0)];
    let (a_k, v) = tight_aux(q_k, sigma2_k_big(config));
    let a_e = 1.0 / (1.0 + q_e.norm_sqr() / config.noise.eve);
    let (r_sec, x, y) = closed_form_rsec(
        &state.z, &state.w, &state.w_mat, &state.t, &state.e, a_k, a_e, v, est, errors, config,
    );
    if r_sec < state.r_sec {
        return state.clone();
    }
    let mut next = state.clone();
    next.a_k = a_k;
    next.a_e = a_e;
    next.v = v;
    next.r_sec = r_sec;
    next.x = x;
    next.y = y;
    next
}

/// Alternating optimization driver: auxiliary refresh, `{z, w, W, t}` cone
/// solve, penalty-CCP reflection update, until the secrecy rate settles.
pub fn ao_active(
    est: &EstimatedChannels,
    errors: &CsiErrorModel,
    config: &SystemConfig,
    stop: ActiveStop,
    pccp: PccpParams,
    rng: &mut ChaCha8Rng,
) -> ActiveSolution {
    let mut state = init_active(est, errors, config, rng);
    let mut healthy = true;
    let mut iterations = 0;
    for _ in 0..stop.max_outer {
        iterations += 1;
        let prev = state.r_sec;
        state = update_aux_and_rsec(&state, est, errors, config);
        match solve_subproblem_zwwt(&state, est, errors, config) {
            Ok(next) => {
                if !next.feasible {
                    healthy = false;
                    state = next;
                    break;
                }
                state = next;
            }
            Err(_) => {
                healthy = false;
                break;
            }
        }
        match solve_subproblem_e_pccp(&state, est, errors, config, pccp, rng) {
            Ok(e_new) => {
                // Keep the candidate only if the recovered rate improves.
                let mut cand = state.clone();
                cand.e = e_new;
                let cand = update_aux_and_rsec(&cand, est, errors, config);
                if cand.r_sec >= state.r_sec {
                    state = cand;
                }
            }
            Err(SecError::PccpNonConvergence(_)) => {
                healthy = false;
                break;
            }
            Err(_) => {
                healthy = false;
                break;
            }
        }
        if (state.r_sec - prev).abs() < stop.tol {
            break;
        }
    }
    state.iterations = iterations;
    state.feasible = healthy && state.r_sec > 0.0;
    state
}

/// Empirical secrecy-outage probability of a fixed design: errors are
/// redrawn around the estimated cascades and the fraction of draws with
/// `min_k R_k - R_E < R_sec` is reported.
pub fn validate_outage(
    solution: &ActiveSolution,
    est: &EstimatedChannels,
    errors: &CsiErrorModel,
    n_mc: usize,
    rng: &mut ChaCha8Rng,
    config: &SystemConfig,
) -> f64 {
    let kh = config.k - 1;
    let min_helper = (0..kh)
        .map(|idx| {
            rate_helper(
                &solution.z,
                solution.t[idx],
                &est.base.g_users[idx],
                &est.base.q,
                config.noise.users[idx],
            )
        })
        .fold(f64::INFINITY, f64::min);
    let sigma2_kk = sigma2_k_big(config);
    let m = config.m();
    let mut violations = 0usize;
    for _ in 0..n_mc {
        let (dk, de) = sample_csi_errors(errors, m, rng);
        let h_k = &est.h_k_hat + dk;
        let h_e = &est.h_e_hat + de;
        let r_big_k = rate_reflect(&solution.w, &solution.e, &h_k, sigma2_kk);
        let r_e = rate_reflect(&solution.w, &solution.e, &h_e, config.noise.eve);
        if min_helper.min(r_big_k) - r_e < solution.r_sec {
            violations += 1;
        }
    }
    violations as f64 / n_mc as f64
}

#[cfg(test)]
mod tests;
