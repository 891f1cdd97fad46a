//! Average-secrecy-rate maximization against a passive eavesdropper.
//!
//! The eavesdropper hides somewhere on the BS-user-K segment, so only the
//! position-and-fading averaged correlation of its IRS channel enters the
//! design (through the Jensen upper bound on the average eavesdropping
//! rate). The optimizer alternates a convex `{z, w, t}` subproblem with a
//! closed-form reflection update built from two majorized subproblems and
//! a price bisection; the same machinery doubles as the non-robust
//! baseline when the averaged correlation is swapped for an estimated
//! cascade taken at face value.

use rand_chacha::ChaCha8Rng;

use crate::channel::SystemConfig;
use crate::conic::{CLinExpr, Cone, ConeProgram, LinExpr, SolveStatus};
use crate::error::SecError;
use crate::linalg;
pub use crate::rates::ErgodicEveStats;
use crate::rates::{half_log2_1p, rate_e_jensen, rate_helper, rate_reflect};
use crate::robust::{random_phases, EstimatedChannels, PccpParams};
use crate::{C64, CMatrix, CVector};

const LN2: f64 = std::f64::consts::LN_2;
const PRICE_CAP: f64 = 1e6;

/// Eavesdropper knowledge available to the passive design.
#[derive(Debug, Clone, Copy)]
pub enum EveModel<'a> {
    /// Averaged correlation of the unknown eavesdropper channel.
    Ergodic(&'a ErgodicEveStats),
    /// Estimated cascade treated as exact (non-robust baseline).
    Deterministic(&'a CMatrix),
}

/// One passive design instance: helper channels, cascaded user-K channel
/// (true or estimated) and the eavesdropper model.
#[derive(Debug, Clone)]
pub struct PassiveProblem<'a> {
    pub g_helpers: &'a [CVector],
    pub q: &'a CMatrix,
    pub h_irs: &'a CMatrix,
    pub h_k: &'a CMatrix,
    pub eve: EveModel<'a>,
    pub config: &'a SystemConfig,
}

impl<'a> PassiveProblem<'a> {
    pub fn ergodic(
        channels: &'a crate::channel::ChannelSet,
        stats: &'a ErgodicEveStats,
        config: &'a SystemConfig,
    ) -> Self {
        Self {
            g_helpers: &channels.g_users[..config.k - 1],
            q: &channels.q,
            h_irs: &channels.h_irs,
            h_k: &channels.h_cascade_k,
            eve: EveModel::Ergodic(stats),
            config,
        }
    }

    /// Non-robust view: estimated cascades naively regarded as perfect.
    pub fn nonrobust(est: &'a EstimatedChannels, config: &'a SystemConfig) -> Self {
        Self {
            g_helpers: &est.base.g_users[..config.k - 1],
            q: &est.base.q,
            h_irs: &est.base.h_irs,
            h_k: &est.h_k_hat,
            eve: EveModel::Deterministic(&est.h_e_hat),
            config,
        }
    }

    fn sigma2_kk(&self) -> f64 {
        *self.config.noise.users.last().unwrap()
    }

    /// Eavesdropper-side rate (Jensen bound or deterministic rate).
    pub fn eve_rate(&self, w: &CVector, e: &CVector) -> f64 {
        match self.eve {
            EveModel::Ergodic(stats) => {
                rate_e_jensen(w, e, self.h_irs, &stats.r_e_mat, self.config.noise.eve)
            }
            EveModel::Deterministic(h_e) => rate_reflect(w, e, h_e, self.config.noise.eve),
        }
    }

    /// PSD matrix `B` with `q_E = w^H B w` at fixed reflection `e`.
    pub fn eve_quad_w(&self, e: &CVector) -> CMatrix {
        match self.eve {
            EveModel::Ergodic(stats) => {
                let de = CMatrix::from_diagonal(e);
                let de_conj = CMatrix::from_diagonal(&e.map(|x| x.conj()));
                self.h_irs.adjoint() * de * &stats.r_e_mat * de_conj * self.h_irs
            }
            EveModel::Deterministic(h_e) => {
                let f = h_e.adjoint() * e;
                &f * f.adjoint()
            }
        }
    }

    /// PSD matrix `A_E` with `e^H A_E e = q_E / sigma_E^2` at fixed `w`.
    pub fn eve_quad_e(&self, w: &CVector) -> CMatrix {
        let s = C64::new(1.0 / self.config.noise.eve, 0.0);
        match self.eve {
            EveModel::Ergodic(stats) => {
                let hw = self.h_irs * w;
                let outer = &hw * hw.adjoint();
                CMatrix::from_fn(outer.nrows(), outer.ncols(), |i, j| {
                    outer[(i, j)] * stats.r_e_mat[(j, i)]
                }) * s
            }
            EveModel::Deterministic(h_e) => {
                let hw = h_e * w;
                (&hw * hw.adjoint()) * s
            }
        }
    }

    pub fn helper_rates(&self, z: &CVector, t: &[f64]) -> Vec<f64> {
        self.g_helpers
            .iter()
            .enumerate()
            .map(|(i, g)| rate_helper(z, t[i], g, self.q, self.config.noise.users[i]))
            .collect()
    }

    /// True objective `min(min_k R_k, R_K) - R_E^up`.
    pub fn objective(&self, z: &CVector, w: &CVector, t: &[f64], e: &CVector) -> f64 {
        let helper_min = self
            .helper_rates(z, t)
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        let r_k = rate_reflect(w, e, self.h_k, self.sigma2_kk());
        helper_min.min(r_k) - self.eve_rate(w, e)
    }
}

/// Decision state of the passive design.
#[derive(Debug, Clone)]
pub struct PassiveSolution {
    pub z: CVector,
    pub w: CVector,
    pub e: CVector,
    pub t: Vec<f64>,
    /// `[min_k rates - eavesdropper bound]^+` at the final iterate.
    pub achieved_rate: f64,
    pub iterations: usize,
    pub objective_trace: Vec<f64>,
}

/// Quadratic data of the reflection subproblem.
#[derive(Debug, Clone)]
pub struct QuadraticPair {
    /// Eavesdropper-side quadratic (divided by sigma_E^2), Hermitian PSD.
    pub a_e: CMatrix,
    /// User-K quadratic (divided by sigma_K^2), rank one PSD.
    pub a_k: CMatrix,
    /// Smallest helper rate (bits/s/Hz), the constant of the max-min.
    pub r_bar: f64,
}

/// Assembles the two reflection-space quadratics and the helper-rate floor.
pub fn build_quadratics(
    problem: &PassiveProblem<'_>,
    w: &CVector,
    z: &CVector,
    t: &[f64],
) -> QuadraticPair {
    let a_e = linalg::hermitize(&problem.eve_quad_e(w));
    let hw = problem.h_k * w;
    let a_k = (&hw * hw.adjoint()) * C64::new(1.0 / problem.sigma2_kk(), 0.0);
    let r_bar = problem
        .helper_rates(z, t)
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    QuadraticPair { a_e, a_k, r_bar }
}

/// Concave surrogate of the user-K rate at expansion `(w_prev, e_prev)`:
/// `1/2 log2(1 - q_K^n / sigma^2 + 2 Re{q_K} / sigma^2)`. The argument can
/// leave the log domain far from the expansion point; that is reported as
/// a domain error and the caller keeps its incumbent.
pub fn surrogate_rk_hat(
    w: &CVector,
    e: &CVector,
    h_k: &CMatrix,
    sigma2_k: f64,
    w_prev: &CVector,
    e_prev: &CVector,
) -> Result<f64, SecError> {
    let phi_prev = (e_prev.adjoint() * h_k * w_prev)[(0, 0)];
    let q_cur = phi_prev * (w.adjoint() * h_k.adjoint() * e)[(0, 0)];
    let arg = 1.0 - phi_prev.norm_sqr() / sigma2_k + 2.0 * q_cur.re / sigma2_k;
    if arg <= 1e-12 {
        return Err(SecError::Domain("surrogate left the log domain".into()));
    }
    Ok(0.5 * arg.log2())
}

/// Convex surrogate (first-order upper bound) of the Jensen eavesdropping
/// rate at expansion `(w_prev, e_prev)`.
pub fn surrogate_re_up_hat(
    w: &CVector,
    e: &CVector,
    h_irs: &CMatrix,
    r_e_mat: &CMatrix,
    sigma2_e: f64,
    w_prev: &CVector,
    e_prev: &CVector,
) -> f64 {
    let quad = |wv: &CVector, ev: &CVector| -> f64 {
        let de = CMatrix::from_diagonal(ev);
        let de_conj = CMatrix::from_diagonal(&ev.map(|x| x.conj()));
        (wv.adjoint() * h_irs.adjoint() * de * r_e_mat * de_conj * h_irs * wv)[(0, 0)].re
    };
    let q_prev = quad(w_prev, e_prev);
    let q_cur = quad(w, e);
    half_log2_1p(q_prev / sigma2_e) + (q_cur - q_prev) / (2.0 * (sigma2_e + q_prev) * LN2)
}

/// Majorization direction `(lambda_max(A) I - A) e_prev` shared by both
/// closed-form reflection updates.
pub fn majorize_quadratic(a: &CMatrix, e_prev: &CVector) -> CVector {
    let lmax = linalg::lambda_max(a);
    let shifted = CMatrix::identity(a.nrows(), a.ncols()) * C64::new(lmax, 0.0) - a;
    &shifted * e_prev
}

/// `exp(2 R ln 2) - 1`: SNR threshold equivalent to a rate floor of
/// `r_bits` (rates carry the 1/2 pre-log, hence the factor 2 in nats).
fn snr_threshold(r_bits: f64) -> f64 {
    (2.0 * LN2 * r_bits).exp() - 1.0
}

fn price_search<F>(feasible: F) -> Option<f64>
where
    F: Fn(f64) -> bool,
{
    if feasible(0.0) {
        return Some(0.0);
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while !feasible(hi) {
        lo = hi;
        hi *= 2.0;
        if hi > PRICE_CAP {
            return None;
        }
    }
    for _ in 0..50 {
        if hi - lo <= 1e-6 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Reflection update minimizing the eavesdropper quadratic subject to the
/// linearized user-K rate floor; `None` when even the price cap cannot
/// satisfy the floor.
pub fn solve_p1(e_prev: &CVector, quad: &QuadraticPair) -> Option<CVector> {
    let m = e_prev.len();
    let lmax_e = linalg::lambda_max(&quad.a_e);
    let shifted_e = CMatrix::identity(m, m) * C64::new(lmax_e, 0.0) - &quad.a_e;
    let ak_eprev = &quad.a_k * e_prev;
    let base = &shifted_e * e_prev;
    let d_k = (e_prev.adjoint() * &quad.a_k * e_prev)[(0, 0)].re;
    let rhs = snr_threshold(quad.r_bar) + d_k;
    let candidate = |price: f64| -> CVector {
        let dir = &base + &ak_eprev * C64::new(price, 0.0);
        linalg::unit_phases_of(&dir, e_prev, 1e-300)
    };
    let feasible = |price: f64| -> bool {
        let e = candidate(price);
        2.0 * (e_prev.adjoint() * &quad.a_k * &e)[(0, 0)].re >= rhs - 1e-8
    };
    let price = price_search(feasible)?;
    let e = candidate(price);
    debug_assert!(feasible(price));
    Some(e)
}

/// Reflection update maximizing the linearized rate ratio under the
/// majorized `R_K <= r_bar` side; always returns a vector (the relaxed
/// constraint is satisfiable at the price cap).
pub fn solve_p2(e_prev: &CVector, quad: &QuadraticPair) -> CVector {
    let m = e_prev.len();
    let lmax_e = linalg::lambda_max(&quad.a_e);
    let lmax_k = linalg::lambda_max(&quad.a_k);
    let shifted_e = CMatrix::identity(m, m) * C64::new(lmax_e, 0.0) - &quad.a_e;
    let shifted_k = CMatrix::identity(m, m) * C64::new(lmax_k, 0.0) - &quad.a_k;
    let d_k = (e_prev.adjoint() * &quad.a_k * e_prev)[(0, 0)].re;
    let d_e = (e_prev.adjoint() * &quad.a_e * e_prev)[(0, 0)].re;
    let c = (&shifted_e * e_prev) * C64::new((1.0 + d_k) / (1.0 + d_e).powi(2), 0.0)
        + (&quad.a_k * e_prev) * C64::new(1.0 / (1.0 + d_e), 0.0);
    let majorized_dir = &shifted_k * e_prev;
    let rhs = -2.0 * lmax_k * m as f64 - snr_threshold(quad.r_bar) - d_k;
    let candidate = |price: f64| -> CVector {
        let dir = &c + &majorized_dir * C64::new(price, 0.0);
        linalg::unit_phases_of(&dir, e_prev, 1e-300)
    };
    let feasible = |price: f64| -> bool {
        let e = candidate(price);
        2.0 * (e_prev.adjoint() * &shifted_k * &e)[(0, 0)].re >= rhs - 1e-8
    };
    match price_search(feasible) {
        Some(price) => candidate(price),
        // Cap behavior: the majorized direction dominates at large prices.
        None => candidate(PRICE_CAP),
    }
}

/// One majorization step on the reflection vector: picks the best of the
/// two candidate updates and the incumbent under the true objective.
pub fn update_e_passive(
    problem: &PassiveProblem<'_>,
    w: &CVector,
    e_prev: &CVector,
    quad: &QuadraticPair,
) -> CVector {
    let score = |e: &CVector| -> f64 {
        let r_k = rate_reflect(w, e, problem.h_k, problem.sigma2_kk());
        quad.r_bar.min(r_k) - problem.eve_rate(w, e)
    };
    let mut best = e_prev.clone();
    let mut best_val = score(e_prev);
    if let Some(e1) = solve_p1(e_prev, quad) {
        let v = score(&e1);
        if v > best_val {
            best_val = v;
            best = e1;
        }
    }
    let e2 = solve_p2(e_prev, quad);
    if score(&e2) > best_val {
        best = e2;
    }
    best
}

/// Convex `{z, w, t}` subproblem at fixed reflection: maximizes the common
/// rate floor minus the linearized eavesdropper surrogate.
pub fn solve_subproblem_zwt_passive(
    problem: &PassiveProblem<'_>,
    z_prev: &CVector,
    w_prev: &CVector,
    t_prev: &[f64],
    e: &CVector,
) -> Result<(CVector, CVector, Vec<f64>), SecError> {
    let config = problem.config;
    let n = config.n;
    let kh = config.k - 1;
    let sigma2_kk = problem.sigma2_kk();
    let sigma2_e = config.noise.eve;

    let b_mat = linalg::hermitize(&problem.eve_quad_w(e));
    let b_half = linalg::psd_sqrt(&b_mat);
    let q_e_prev = (w_prev.adjoint() * &b_mat * w_prev)[(0, 0)].re;
    let kappa = 1.0 / (2.0 * (sigma2_e + q_e_prev) * LN2);

    let phi_prev = (e.adjoint() * problem.h_k * w_prev)[(0, 0)];
    let hk_e = problem.h_k.adjoint() * e;

    let mut p = ConeProgram::new();
    let r = p.add_var();
    let z = p.add_cvec(n - 1);
    let w = p.add_cvec(kh);
    let t: Vec<_> = p.add_vars(kh);
    let s_e = p.add_var();
    p.add_objective(r, -1.0);
    p.add_objective(s_e, kappa);

    // s_e >= w^H B w.
    {
        let mut tail = Vec::new();
        for i in 0..kh {
            let mut acc = CLinExpr::zero();
            for j in 0..kh {
                acc = acc + w.entry(j).scaled(b_half[(i, j)]);
            }
            tail.push(acc.re.clone());
            tail.push(acc.im);
        }
        p.add_quad_over_lin(LinExpr::var(s_e), LinExpr::constant(1.0), &tail);
    }

    // Helper rate floors through the quadratic-over-linear surrogate.
    for idx in 0..kh {
        let g_k = &problem.g_helpers[idx];
        let sigma2_k = config.noise.users[idx];
        let qg = problem.q.adjoint() * g_k;
        let p_prev = (g_k.adjoint() * problem.q * z_prev)[(0, 0)];
        let tp = t_prev[idx];
        let p_expr = z.inner_with(&qg);
        let c1 = tp * tp * p_prev.norm_sqr() / sigma2_k;
        let u_qol = p.add_var();
        p.add_block(
            vec![
                LinExpr::var(u_qol).scaled(0.5),
                LinExpr::var(t[idx]),
                LinExpr::constant(c1.sqrt()),
            ],
            Cone::RotatedSecondOrder,
        );
        let cross = p_expr.scaled(p_prev.conj()).re.clone();
        let s_expr = LinExpr::constant(1.0) + cross.scaled(2.0 * tp / sigma2_k)
            - LinExpr::var(u_qol);
        // 2 ln2 r <= ln(arg).
        p.add_log_hypograph(LinExpr::var(r).scaled(2.0 * LN2), s_expr);

        // Harvest constraint, identical to the robust block.
        let d_k = (1.0 - tp).powi(2) * p_prev.norm_sqr();
        let h_harv = p.add_var();
        p.add_block(
            vec![
                LinExpr::var(h_harv).scaled(0.5),
                LinExpr::constant(1.0) - LinExpr::var(t[idx]),
                LinExpr::constant(d_k.sqrt()),
            ],
            Cone::RotatedSecondOrder,
        );
        let budget = cross.scaled(2.0 * (1.0 - tp)) - LinExpr::var(h_harv);
        let wk = w.entry(idx);
        p.add_quad_over_lin(budget, LinExpr::constant(1.0), &[wk.re.clone(), wk.im.clone()]);

        p.add_nonneg(LinExpr::var(t[idx]));
        p.add_nonneg(LinExpr::constant(1.0) - LinExpr::var(t[idx]));
    }

    // User-K floor: 2 ln2 r <= ln(1 - |phi|^2/s2 + 2 Re{phi conj(psi(w))}/s2).
    {
        let psi = w.inner_with(&hk_e).conj(); // psi(w) = e^H H_K w
        let q_cur = psi.conj().scaled(phi_prev); // phi_prev * conj(psi)
        let arg = LinExpr::constant(1.0 - phi_prev.norm_sqr() / sigma2_kk)
            + q_cur.re.clone().scaled(2.0 / sigma2_kk);
        p.add_log_hypograph(LinExpr::var(r).scaled(2.0 * LN2), arg);
    }

    p.add_soc(LinExpr::constant(config.p_max.sqrt()), z.scalar_exprs());

    let sol = p.solve(1e-8);
    if sol.status != SolveStatus::Optimal {
        return Err(SecError::Solver(format!(
            "{{z,w,t}} subproblem ended with {:?}",
            sol.status
        )));
    }
    Ok((
        z.read(&sol.x),
        w.read(&sol.x),
        t.iter().map(|&id| sol.x[id].clamp(0.0, 1.0)).collect(),
    ))
}

/// Reflection-update strategy inside the alternating loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EUpdate {
    /// Closed-form majorized updates with price bisection.
    ClosedForm,
    /// Penalty-CCP cone-program reference (the expensive benchmark).
    SocpReference(PccpParams),
    /// Keep the initial reflection (random-phase baseline).
    Frozen,
}

/// Stopping rule of the passive alternating loop.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct PassiveStop {
    pub rel_tol: f64,
    pub max_outer: usize,
}

impl Default for PassiveStop {
    fn default() -> Self {
        Self { rel_tol: 1e-4, max_outer: 50 }
    }
}

fn init_passive(
    problem: &PassiveProblem<'_>,
    rng: &mut ChaCha8Rng,
) -> (CVector, CVector, Vec<f64>, CVector) {
    let config = problem.config;
    let kh = config.k - 1;
    let e = random_phases(config.m(), rng);
    let t = vec![0.5; kh];
    let mut acc = CMatrix::zeros(config.n - 1, config.n - 1);
    for g in problem.g_helpers {
        let qg = problem.q.adjoint() * g;
        acc += &qg * qg.adjoint();
    }
    let (_, zdir) = linalg::top_eigpair(&acc);
    let z = zdir * C64::new(config.p_max.sqrt(), 0.0);
    let gain = problem.h_k.adjoint() * &e;
    let mut w = CVector::zeros(kh);
    for (idx, g) in problem.g_helpers.iter().enumerate() {
        let pwr = (g.adjoint() * problem.q * &z)[(0, 0)].norm_sqr();
        let mag = ((1.0 - t[idx]) * pwr).sqrt();
        let ph = if gain[idx].norm() > 0.0 {
            gain[idx] / C64::new(gain[idx].norm(), 0.0)
        } else {
            C64::new(1.0, 0.0)
        };
        w[idx] = ph * C64::new(mag, 0.0);
    }
    (z, w, t, e)
}

/// MM-based alternating optimization: one `{z, w, t}` solve and one
/// reflection step per outer iteration; the objective trace is
/// nondecreasing and the loop stops on relative stagnation.
pub fn ao_passive(
    problem: &PassiveProblem<'_>,
    stop: PassiveStop,
    e_update: EUpdate,
    rng: &mut ChaCha8Rng,
) -> PassiveSolution {
    let (mut z, mut w, mut t, mut e) = init_passive(problem, rng);
    let mut trace = vec![problem.objective(&z, &w, &t, &e)];
    let mut iterations = 0;
    for _ in 0..stop.max_outer {
        iterations += 1;
        match solve_subproblem_zwt_passive(problem, &z, &w, &t, &e) {
            Ok((z2, w2, t2)) => {
                // The solver maximizes a touching surrogate; keep the
                // incumbent if numerics ever drift the true objective down.
                if problem.objective(&z2, &w2, &t2, &e) >= problem.objective(&z, &w, &t, &e) {
                    z = z2;
                    w = w2;
                    t = t2;
                }
            }
            Err(_) => break,
        }
        match e_update {
            EUpdate::ClosedForm => {
                let quad = build_quadratics(problem, &w, &z, &t);
                e = update_e_passive(problem, &w, &e, &quad);
            }
            EUpdate::SocpReference(pccp) => {
                if let Ok(e2) = solve_e_socp_reference(problem, &z, &w, &t, &e, pccp, rng) {
                    let quad = build_quadratics(problem, &w, &z, &t);
                    let score = |ev: &CVector| {
                        let r_k = rate_reflect(&w, ev, problem.h_k, problem.sigma2_kk());
                        quad.r_bar.min(r_k) - problem.eve_rate(&w, ev)
                    };
                    if score(&e2) >= score(&e) {
                        e = e2;
                    }
                }
            }
            EUpdate::Frozen => {}
        }
        let obj = problem.objective(&z, &w, &t, &e);
        let prev = *trace.last().unwrap();
        trace.push(obj);
        if (obj - prev).abs() <= stop.rel_tol * prev.abs().max(1e-9) {
            break;
        }
    }
    let achieved = trace.last().unwrap().max(0.0);
    PassiveSolution {
        z,
        w,
        e,
        t,
        achieved_rate: achieved,
        iterations,
        objective_trace: trace,
    }
}

/// Penalty-CCP reference for the reflection subproblem (the cone-program
/// benchmark): maximizes `min(r_bar, R_K-hat(e)) - R_E-hat(e)` under the
/// relaxed unit-modulus constraints, re-expanding the surrogates at every
/// inner iterate.
pub fn solve_e_socp_reference(
    problem: &PassiveProblem<'_>,
    z: &CVector,
    w: &CVector,
    t: &[f64],
    e_prev: &CVector,
    pccp: PccpParams,
    rng: &mut ChaCha8Rng,
) -> Result<CVector, SecError> {
    let m = problem.config.m();
    let quad = build_quadratics(problem, w, z, t);
    let a_half = linalg::psd_sqrt(&quad.a_e);
    let sigma2_kk = problem.sigma2_kk();
    let hk_w = problem.h_k * w;

    let mut e_cur = e_prev.clone();
    for _attempt in 0..=pccp.restarts {
        let mut lambda = pccp.lambda0;
        for _j in 0..pccp.j_max {
            let phi_prev = (e_cur.adjoint() * &hk_w)[(0, 0)];
            let d_e_prev = (e_cur.adjoint() * &quad.a_e * &e_cur)[(0, 0)].re;
            let kappa = 1.0 / (2.0 * (1.0 + d_e_prev) * LN2);

            let mut p = ConeProgram::new();
            let r = p.add_var();
            let e = p.add_cvec(m);
            let b: Vec<_> = p.add_vars(2 * m);
            let s_e = p.add_var();
            p.add_objective(r, -1.0);
            p.add_objective(s_e, kappa);
            for &bi in &b {
                p.add_objective(bi, lambda);
                p.add_nonneg(LinExpr::var(bi));
            }
            // s_e >= e^H A_E e.
            let mut tail = Vec::new();
            for i in 0..m {
                let mut acc = CLinExpr::zero();
                for j in 0..m {
                    acc = acc + e.entry(j).scaled(a_half[(i, j)]);
                }
                tail.push(acc.re.clone());
                tail.push(acc.im);
            }
            p.add_quad_over_lin(LinExpr::var(s_e), LinExpr::constant(1.0), &tail);

            // r <= r_bar and r <= R_K-hat(e).
            p.add_nonneg(LinExpr::constant(quad.r_bar) - LinExpr::var(r));
            let psi = e.inner_with(&hk_w).conj(); // e^H H_K w
            let q_cur = psi.conj().scaled(phi_prev);
            let arg = LinExpr::constant(1.0 - phi_prev.norm_sqr() / sigma2_kk)
                + q_cur.re.clone().scaled(2.0 / sigma2_kk);
            p.add_log_hypograph(LinExpr::var(r).scaled(2.0 * LN2), arg);

            for mm in 0..m {
                let em = e.entry(mm);
                let cross = em.conj().scaled(e_cur[mm]).re.clone();
                p.add_nonneg(
                    LinExpr::var(b[mm]) - LinExpr::constant(1.0 + e_cur[mm].norm_sqr())
                        + cross.scaled(2.0),
                );
                p.add_quad_over_lin(
                    LinExpr::constant(1.0) + LinExpr::var(b[m + mm]),
                    LinExpr::constant(1.0),
                    &[em.re.clone(), em.im.clone()],
                );
            }

            let sol = p.solve(1e-7);
            if sol.status != SolveStatus::Optimal {
                break;
            }
            let e_next = e.read(&sol.x);
            let b_norm: f64 = b.iter().map(|&bi| sol.x[bi].max(0.0)).sum();
            let delta: f64 = (0..m).map(|i| (e_next[i] - e_cur[i]).norm()).sum();
            e_cur = e_next;
            lambda = (pccp.gamma * lambda).min(pccp.lambda_max);
            if b_norm <= pccp.chi && delta <= pccp.nu {
                return Ok(linalg::unit_phases_of(&e_cur, e_prev, 1e-12));
            }
        }
        e_cur = random_phases(m, rng);
    }
    Err(SecError::PccpNonConvergence(
        "reflection reference solver exhausted its restarts".into(),
    ))
}

/// Non-robust baseline: runs the passive machinery on estimated cascades
/// treated as exact.
pub fn nonrobust_baseline(
    est: &EstimatedChannels,
    config: &SystemConfig,
    stop: PassiveStop,
    rng: &mut ChaCha8Rng,
) -> PassiveSolution {
    let problem = PassiveProblem::nonrobust(est, config);
    ao_passive(&problem, stop, EUpdate::ClosedForm, rng)
}
