use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::bti::*;
use super::subproblems::{solve_subproblem_e_pccp, solve_subproblem_zwwt};
use super::*;
use crate::channel::{ChannelSet, NoisePowers};
use crate::diagnostics::{random_cmatrix, random_cvector};
use crate::linalg;
use crate::rates::{bound_re_upper, bound_rk_lower, rate_helper, rate_reflect};

/// Synthetic O(1)-scale instance: unit noise, unit power budget, Gaussian
/// channels. Keeps the oracle comparisons meaningful at bit-scale rates.
fn synthetic_config(n: usize, k: usize, mx: usize, my: usize, delta: f64) -> SystemConfig {
    let mut cfg = SystemConfig::defaults(n, k, mx, my);
    cfg.p_max = 1.0;
    cfg.noise = NoisePowers::uniform(k, 1.0);
    cfg.delta_k = delta;
    cfg.delta_e = delta;
    cfg
}

fn synthetic_channels(cfg: &SystemConfig, rng: &mut ChaCha8Rng) -> ChannelSet {
    let m = cfg.m();
    let g_users: Vec<_> = (0..cfg.k).map(|_| random_cvector(rng, cfg.n)).collect();
    let h_users: Vec<_> = (0..cfg.k).map(|_| random_cvector(rng, m)).collect();
    let g_eve = random_cvector(rng, cfg.n);
    let h_eve = random_cvector(rng, m);
    let kh = cfg.k - 1;
    let mut h_irs = crate::CMatrix::zeros(m, kh);
    for j in 0..kh {
        h_irs.set_column(j, &h_users[j]);
    }
    let h_cascade_k = crate::channel::cascade(h_users.last().unwrap(), &h_irs);
    let h_cascade_e = crate::channel::cascade(&h_eve, &h_irs);
    let q = linalg::householder_null_basis(g_users.last().unwrap()).unwrap();
    ChannelSet { g_users, g_eve, h_users, h_eve, h_irs, h_cascade_k, h_cascade_e, q }
}

/// Synthetic estimated-channel instance with the config's error level.
fn synthetic_instance(
    cfg: &SystemConfig,
    rng: &mut ChaCha8Rng,
) -> (EstimatedChannels, CsiErrorModel) {
    let set = synthetic_channels(cfg, rng);
    let errors = CsiErrorModel::from_channels(cfg, &set);
    let (dk, de) = crate::channel::sample_csi_errors(&errors, cfg.m(), rng);
    let est = EstimatedChannels::from_errors(set, &dk, &de).unwrap();
    (est, errors)
}

#[test]
fn rho_bar_examples() {
    assert!((rho_bar(0.05, 1) - 0.05).abs() < 1e-15);
    assert_eq!(rho_bar(0.0, 4), 0.0);
    assert!((rho_bar(0.05, 5) - 0.010206).abs() < 1e-6);
}

#[test]
fn surrogate_rk_tilde_touch_and_dominance() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let g = random_cvector(&mut rng, 3);
        let q = linalg::householder_null_basis(&random_cvector(&mut rng, 3)).unwrap();
        let z_prev = random_cvector(&mut rng, 2);
        let t_prev = rng.random_range(0.05..1.0);
        let sigma2 = rng.random_range(0.2..2.0);
        let touch = surrogate_rk_tilde(&z_prev, t_prev, &g, &q, sigma2, &z_prev, t_prev);
        let exact = rate_helper(&z_prev, t_prev, &g, &q, sigma2);
        assert!((touch - exact).abs() <= 1e-12 * exact.max(1.0));
        let z = random_cvector(&mut rng, 2);
        let t = rng.random_range(0.05..1.0);
        let sur = surrogate_rk_tilde(&z, t, &g, &q, sigma2, &z_prev, t_prev);
        let truth = rate_helper(&z, t, &g, &q, sigma2);
        assert!(sur <= truth + 1e-10, "surrogate {sur} above rate {truth}");
    }
    // Zero expansion point collapses the surrogate to zero rate.
    let g = random_cvector(&mut rng, 3);
    let q = linalg::householder_null_basis(&random_cvector(&mut rng, 3)).unwrap();
    let z0 = crate::CVector::zeros(2);
    let z = random_cvector(&mut rng, 2);
    assert_eq!(surrogate_rk_tilde(&z, 0.5, &g, &q, 1.0, &z0, 0.5), 0.0);
}

#[test]
fn harvest_lower_bound_touch_and_dominance() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..1000 {
        let g = random_cvector(&mut rng, 3);
        let q = linalg::householder_null_basis(&random_cvector(&mut rng, 3)).unwrap();
        let z_prev = random_cvector(&mut rng, 2);
        let t_prev = rng.random_range(0.0..0.95);
        let touch = harvest_lower_bound(&z_prev, t_prev, &g, &q, &z_prev, t_prev);
        let exact = crate::rates::harvested_power(&z_prev, t_prev, &g, &q);
        assert!((touch - exact).abs() <= 1e-12 * exact.max(1.0));
        let z = random_cvector(&mut rng, 2);
        let t = rng.random_range(0.0..0.95);
        let bound = harvest_lower_bound(&z, t, &g, &q, &z_prev, t_prev);
        let truth = crate::rates::harvested_power(&z, t, &g, &q);
        assert!(bound <= truth + 1e-10);
    }
}

#[test]
fn bti_terms_trivial_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let kh = 2;
    let m = 3;
    let e = linalg::unit_phases_of(
        &random_cvector(&mut rng, m),
        &crate::CVector::from_element(m, crate::C64::new(1.0, 0.0)),
        0.0,
    );
    let h_e = random_cmatrix(&mut rng, m, kh);
    // W = 0 kills everything except the constant.
    let w0 = crate::CMatrix::zeros(kh, kh);
    let terms = bti_terms_helper_k(&w0, &e, &h_e, &[0.3, 0.4], 0.8, 1.0, 0.5, 0.1);
    assert_eq!(terms.trace_u, 0.0);
    assert_eq!(terms.frob_u, 0.0);
    assert_eq!(terms.norm_u, 0.0);
    assert_eq!(terms.lambda_max_u, 0.0);
    assert!(terms.u_const != 0.0);
    // Lambda = I, W = I: trace is a_E * M * (K-1).
    let eye = crate::CMatrix::identity(kh, kh);
    let terms = bti_terms_helper_k(&eye, &e, &h_e, &[1.0, 1.0], 0.7, 1.0, 0.5, 0.0);
    assert!((terms.trace_u - 0.7 * m as f64 * kh as f64).abs() < 1e-12);
}

#[test]
fn bti_check_scalar_cases() {
    // U = 0, u = 0, constant -1: trivially safe.
    let t = BtiTerms { trace_u: 0.0, frob_u: 0.0, norm_u: 0.0, lambda_max_u: 0.0, u_const: -1.0 };
    assert!(bti_deterministic_check(&t, 0.05));
    // Scalar case at rho_bar 0.05: threshold -(1 + 2.4477 + 2.9957).
    let boundary = -(1.0 + (2.0 * 20f64.ln()).sqrt() - 0.05f64.ln());
    let t = BtiTerms {
        trace_u: 1.0,
        frob_u: 1.0,
        norm_u: 0.0,
        lambda_max_u: 1.0,
        u_const: boundary + 1e-9,
    };
    assert!(!bti_deterministic_check(&t, 0.05));
    let t = BtiTerms { u_const: boundary - 1e-9, ..t };
    assert!(bti_deterministic_check(&t, 0.05));
    assert!((boundary + 6.4434).abs() < 1e-3);
    // The boundary case is still safe: Pr{|i|^2 <= 6.4434} = 1 - e^{-6.4434}.
    let safe = 1.0 - (-6.4434f64).exp();
    assert!(safe >= 0.95);
}

#[test]
fn dense_quadratic_direct_evaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let inst = crate::diagnostics::random_bti_instance(&mut rng, 2, 2);
    let dense = dense_quadratic_helper_k(
        &inst.w_mat, &inst.e, &inst.h_e, &inst.lambda_e, inst.a_e, inst.sigma2_e, 0.4, 0.2,
    );
    let i = random_cvector(&mut rng, dense.u_mat.nrows());
    let direct = dense.eval(&i);
    let quad = (i.adjoint() * &dense.u_mat * &i)[(0, 0)].re
        + 2.0 * (dense.u_vec.adjoint() * &i)[(0, 0)].re
        + dense.u_const;
    assert!((direct - quad).abs() < 1e-10 * quad.abs().max(1.0));
}

fn desk_state(
    cfg: &SystemConfig,
    est: &EstimatedChannels,
    errors: &CsiErrorModel,
    rng: &mut ChaCha8Rng,
) -> ActiveSolution {
    let state = init_active(est, errors, cfg, rng);
    update_aux_and_rsec(&state, est, errors, cfg)
}

#[test]
fn zwwt_zero_channels_yield_zero_rate() {
    let cfg = synthetic_config(3, 3, 1, 2, 0.0);
    let kh = cfg.k - 1;
    let m = cfg.m();
    let e1 = crate::CVector::from_fn(cfg.n, |i, _| {
        if i == 0 { crate::C64::new(1.0, 0.0) } else { crate::C64::new(0.0, 0.0) }
    });
    let zero_set = ChannelSet {
        g_users: vec![crate::CVector::zeros(cfg.n); cfg.k],
        g_eve: crate::CVector::zeros(cfg.n),
        h_users: vec![crate::CVector::zeros(m); cfg.k],
        h_eve: crate::CVector::zeros(m),
        h_irs: crate::CMatrix::zeros(m, kh),
        h_cascade_k: crate::CMatrix::zeros(m, kh),
        h_cascade_e: crate::CMatrix::zeros(m, kh),
        q: linalg::householder_null_basis(&e1).unwrap(),
    };
    let est = EstimatedChannels::perfect(zero_set);
    let errors = CsiErrorModel::new(vec![0.0; kh], vec![0.0; kh]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let state = desk_state(&cfg, &est, &errors, &mut rng);
    let next = solve_subproblem_zwwt(&state, &est, &errors, &cfg).unwrap();
    assert!(next.feasible);
    assert!(next.r_sec.abs() < 1e-6);
    assert!(next.w.norm() < 1e-4);
}

#[test]
fn zwwt_resolve_is_a_fixed_point() {
    let cfg = synthetic_config(3, 3, 2, 2, 0.05);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (est, errors) = synthetic_instance(&cfg, &mut rng);
    let state = desk_state(&cfg, &est, &errors, &mut rng);
    let once = solve_subproblem_zwwt(&state, &est, &errors, &cfg).unwrap();
    assert!(once.feasible);
    assert!(once.r_sec >= state.r_sec - 1e-7);
    let twice = solve_subproblem_zwwt(&once, &est, &errors, &cfg).unwrap();
    assert!(
        (twice.r_sec - once.r_sec).abs() <= 1e-5 * once.r_sec.max(1.0),
        "{} vs {}",
        twice.r_sec,
        once.r_sec
    );
}

/// Closed-form secrecy cap at fixed auxiliaries as a function of the
/// reflection vector; the oracle for the reflection subproblem.
fn rsec_cap_fixed_aux(
    state: &ActiveSolution,
    est: &EstimatedChannels,
    errors: &CsiErrorModel,
    cfg: &SystemConfig,
    e: &crate::CVector,
) -> f64 {
    let rb = rho_bar(cfg.rho_outage, cfg.k);
    let ln2 = std::f64::consts::LN_2;
    let sigma2_e = cfg.noise.eve;
    let mut best = f64::INFINITY;
    for idx in 0..cfg.k - 1 {
        let r_k = rate_helper(
            &state.z,
            state.t[idx],
            &est.base.g_users[idx],
            &est.base.q,
            cfg.noise.users[idx],
        );
        let terms = bti_terms_helper_k(
            &state.w_mat, e, &est.h_e_hat, &errors.lambda_e, state.a_e, sigma2_e, r_k, 0.0,
        );
        best = best.min(-terms.lhs(rb) / (2.0 * ln2 * sigma2_e));
    }
    let terms = bti_terms_user_big_k(
        &state.w_mat,
        &state.w,
        e,
        &est.h_k_hat,
        &est.h_e_hat,
        &errors.lambda_k,
        &errors.lambda_e,
        state.a_k,
        state.a_e,
        state.v,
        *cfg.noise.users.last().unwrap(),
        sigma2_e,
        0.0,
    );
    best.min(-terms.lhs(rb) / (2.0 * ln2))
}

#[test]
fn pccp_single_element_matches_phase_grid() {
    let cfg = synthetic_config(3, 3, 1, 1, 0.05);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (est, errors) = synthetic_instance(&cfg, &mut rng);
    let state = desk_state(&cfg, &est, &errors, &mut rng);
    let e_new =
        solve_subproblem_e_pccp(&state, &est, &errors, &cfg, PccpParams::default(), &mut rng)
            .unwrap();
    assert!((e_new[0].norm() - 1.0).abs() <= 1e-6);

    let cap_at = |theta: f64| {
        let e = crate::CVector::from_element(1, crate::C64::from_polar(1.0, theta));
        rsec_cap_fixed_aux(&state, &est, &errors, &cfg, &e)
    };
    // 360-point grid, then golden-section refinement around the best cell.
    let mut best_theta = 0.0;
    let mut best = f64::NEG_INFINITY;
    for i in 0..360 {
        let th = i as f64 * std::f64::consts::TAU / 360.0;
        let v = cap_at(th);
        if v > best {
            best = v;
            best_theta = th;
        }
    }
    let (mut lo, mut hi) = (
        best_theta - std::f64::consts::TAU / 360.0,
        best_theta + std::f64::consts::TAU / 360.0,
    );
    for _ in 0..60 {
        let m1 = lo + (hi - lo) * 0.382;
        let m2 = lo + (hi - lo) * 0.618;
        if cap_at(m1) < cap_at(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    let theta_star = 0.5 * (lo + hi);
    let theta_pccp = e_new[0].arg().rem_euclid(std::f64::consts::TAU);
    let mut diff = (theta_pccp - theta_star.rem_euclid(std::f64::consts::TAU)).abs();
    if diff > std::f64::consts::PI {
        diff = std::f64::consts::TAU - diff;
    }
    assert!(diff <= 1e-2, "pccp phase {theta_pccp} vs oracle {theta_star}");
}

#[test]
fn pccp_converges_on_desk_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for trial in 0..50 {
        let cfg = synthetic_config(3, 3, 2, 1 + (trial % 2), 0.05);
        let (est, errors) = synthetic_instance(&cfg, &mut rng);
        let state = desk_state(&cfg, &est, &errors, &mut rng);
        let e_new =
            solve_subproblem_e_pccp(&state, &est, &errors, &cfg, PccpParams::default(), &mut rng)
                .unwrap_or_else(|e| panic!("trial {trial}: {e}"));
        for x in e_new.iter() {
            assert!((x.norm() - 1.0).abs() <= 1e-6);
        }
    }
}

#[test]
fn update_aux_examples() {
    let cfg = synthetic_config(3, 3, 2, 2, 0.05);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (est, errors) = synthetic_instance(&cfg, &mut rng);
    let state = init_active(&est, &errors, &cfg, &mut rng);
    let updated = update_aux_and_rsec(&state, &est, &errors, &cfg);
    let sigma2_kk = *cfg.noise.users.last().unwrap();
    // Tightness of both bounds at the refreshed auxiliaries.
    let r_e = rate_reflect(&updated.w, &updated.e, &est.h_e_hat, cfg.noise.eve);
    let up = bound_re_upper(&updated.w, &updated.e, &est.h_e_hat, cfg.noise.eve, updated.a_e)
        .unwrap();
    assert!((up - r_e).abs() <= 1e-12 * r_e.max(1.0));
    let r_k = rate_reflect(&updated.w, &updated.e, &est.h_k_hat, sigma2_kk);
    let lo =
        bound_rk_lower(&updated.w, &updated.e, &est.h_k_hat, sigma2_kk, updated.a_k, updated.v)
            .unwrap();
    assert!((lo - r_k).abs() <= 1e-12 * r_k.max(1.0));

    // q_E = 0 gives a_E = 1.
    let zero_w = ActiveSolution { w: crate::CVector::zeros(cfg.k - 1), ..state.clone() };
    let up2 = update_aux_and_rsec(&zero_w, &est, &errors, &cfg);
    assert!((up2.a_e - 1.0).abs() < 1e-12);

    // Safeguard: an artificially inflated incumbent rate is kept.
    let inflated = ActiveSolution { r_sec: updated.r_sec + 1.0, ..updated.clone() };
    let kept = update_aux_and_rsec(&inflated, &est, &errors, &cfg);
    assert_eq!(kept.r_sec, inflated.r_sec);
    assert_eq!(kept.a_e, inflated.a_e);
}

#[test]
fn ao_monotone_on_desk_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for trial in 0..20 {
        let cfg = synthetic_config(3, 3, 2, 1, 0.05);
        let (est, errors) = synthetic_instance(&cfg, &mut rng);
        let mut state = desk_state(&cfg, &est, &errors, &mut rng);
        for step in 0..4 {
            let before = state.r_sec;
            state = update_aux_and_rsec(&state, &est, &errors, &cfg);
            assert!(state.r_sec >= before - 1e-9, "aux step lowered the rate");
            let next = solve_subproblem_zwwt(&state, &est, &errors, &cfg).unwrap();
            assert!(next.feasible, "trial {trial} step {step} infeasible");
            assert!(
                next.r_sec >= state.r_sec - 1e-5 * state.r_sec.max(1.0),
                "trial {trial} step {step}: {} -> {}",
                state.r_sec,
                next.r_sec
            );
            state = next;
            let e_new = solve_subproblem_e_pccp(
                &state,
                &est,
                &errors,
                &cfg,
                PccpParams::default(),
                &mut rng,
            )
            .unwrap();
            let mut cand = state.clone();
            cand.e = e_new;
            let cand = update_aux_and_rsec(&cand, &est, &errors, &cfg);
            if cand.r_sec >= state.r_sec {
                state = cand;
            }
        }
    }
}

#[test]
fn ao_active_tiny_instance_matches_grid_oracle() {
    // K = 2 keeps w scalar (its phase is immaterial) and N = 2 keeps z
    // scalar, so exhaustive search over (t, |w|, e-phase) is the truth.
    let cfg = synthetic_config(2, 2, 2, 1, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let set = synthetic_channels(&cfg, &mut rng);
    let est = EstimatedChannels::perfect(set);
    let errors = CsiErrorModel::new(vec![0.0], vec![0.0]).unwrap();
    let sol = ao_active(
        &est,
        &errors,
        &cfg,
        ActiveStop { tol: 1e-6, max_outer: 40 },
        PccpParams::default(),
        &mut rng,
    );
    assert!(sol.feasible);

    let g1 = &est.base.g_users[0];
    let gain_z = (g1.adjoint() * &est.base.q)[(0, 0)].norm();
    let sigma2 = cfg.noise.users[0];
    let mut best = 0.0f64;
    let grid = 160;
    for ti in 1..grid {
        let t = ti as f64 / grid as f64;
        let p = gain_z * gain_z * cfg.p_max;
        let r1 = crate::rates::half_log2_1p(t * p / sigma2);
        let wmax = ((1.0 - t) * p).sqrt();
        for wi in 0..=grid {
            let wmag = wmax * wi as f64 / grid as f64;
            for pi in 0..72 {
                let theta = pi as f64 * std::f64::consts::TAU / 72.0;
                let e = crate::CVector::from_vec(vec![
                    crate::C64::new(1.0, 0.0),
                    crate::C64::from_polar(1.0, theta),
                ]);
                let w = crate::CVector::from_element(1, crate::C64::new(wmag, 0.0));
                let r_k = rate_reflect(&w, &e, &est.h_k_hat, sigma2);
                let r_e = rate_reflect(&w, &e, &est.h_e_hat, cfg.noise.eve);
                best = best.max((r1.min(r_k) - r_e).max(0.0));
            }
        }
    }
    assert!(
        (sol.r_sec - best).abs() <= 5e-2,
        "solver {} vs grid oracle {}",
        sol.r_sec,
        best
    );
}

#[test]
fn perfect_csi_dominates_erroneous_runs() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut wins = 0;
    let pairs = 10;
    for _ in 0..pairs {
        let cfg0 = synthetic_config(3, 3, 2, 1, 0.0);
        let set = synthetic_channels(&cfg0, &mut rng);
        let seed = rng.random_range(0..u64::MAX);

        let est0 = EstimatedChannels::perfect(set.clone());
        let errors0 = CsiErrorModel::from_channels(&cfg0, &set);
        let mut r0 = ChaCha8Rng::seed_from_u64(seed);
        let sol0 =
            ao_active(&est0, &errors0, &cfg0, ActiveStop::default(), PccpParams::default(), &mut r0);

        let cfg1 = synthetic_config(3, 3, 2, 1, 0.10);
        let errors1 = CsiErrorModel::from_channels(&cfg1, &set);
        let mut r1 = ChaCha8Rng::seed_from_u64(seed);
        let (dk, de) = crate::channel::sample_csi_errors(&errors1, cfg1.m(), &mut r1);
        let est1 = EstimatedChannels::from_errors(set, &dk, &de).unwrap();
        let sol1 =
            ao_active(&est1, &errors1, &cfg1, ActiveStop::default(), PccpParams::default(), &mut r1);

        let v0 = if sol0.feasible { sol0.r_sec } else { 0.0 };
        let v1 = if sol1.feasible { sol1.r_sec } else { 0.0 };
        if v0 >= v1 - 1e-3 {
            wins += 1;
        }
    }
    assert!(wins >= (pairs * 9) / 10, "perfect CSI won only {wins}/{pairs}");
}

#[test]
fn validate_outage_trivial_and_safe() {
    let cfg = synthetic_config(3, 3, 2, 1, 0.1);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let (est, errors) = synthetic_instance(&cfg, &mut rng);

    // R_sec = 0 with w = 0 never violates.
    let mut idle = init_active(&est, &errors, &cfg, &mut rng);
    idle.w = crate::CVector::zeros(cfg.k - 1);
    idle.r_sec = 0.0;
    let outage = validate_outage(&idle, &est, &errors, 1000, &mut rng, &cfg);
    assert_eq!(outage, 0.0);

    // Zero error variances make the outcome deterministic.
    let zero = CsiErrorModel::new(vec![0.0; 2], vec![0.0; 2]).unwrap();
    let sol =
        ao_active(&est, &zero, &cfg, ActiveStop::default(), PccpParams::default(), &mut rng);
    let out = validate_outage(&sol, &est, &zero, 100, &mut rng, &cfg);
    assert!(out == 0.0 || out == 1.0);

    // Feasible robust designs meet the outage budget with slack.
    for _ in 0..5 {
        let (est, errors) = synthetic_instance(&cfg, &mut rng);
        let sol =
            ao_active(&est, &errors, &cfg, ActiveStop::default(), PccpParams::default(), &mut rng);
        if !sol.feasible {
            continue;
        }
        let n_mc = 2000;
        let outage = validate_outage(&sol, &est, &errors, n_mc, &mut rng, &cfg);
        let se = (cfg.rho_outage * (1.0 - cfg.rho_outage) / n_mc as f64).sqrt();
        assert!(outage <= cfg.rho_outage + 3.0 * se, "outage {outage} exceeds budget");
    }
}

#[test]
fn rank_one_control_at_output() {
    let cfg = synthetic_config(3, 4, 2, 1, 0.05);
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let (est, errors) = synthetic_instance(&cfg, &mut rng);
    let sol =
        ao_active(&est, &errors, &cfg, ActiveStop::default(), PccpParams::default(), &mut rng);
    if sol.feasible {
        let tr: f64 = sol.w_mat.diagonal().iter().map(|x| x.re).sum();
        let harvest = est.base.g_users[..cfg.k - 1]
            .iter()
            .zip(&sol.t)
            .map(|(g, &t)| (1.0 - t) * (g.adjoint() * &est.base.q * &sol.z)[(0, 0)].norm_sqr())
            .fold(0.0f64, f64::max);
        let eps = 1e-4 * tr.max(harvest);
        let lmax = linalg::lambda_max(&sol.w_mat);
        let slack = eps * (1.0 + 1e-4) + 1e-9 * tr.max(1e-12);
        assert!(tr - lmax <= slack, "trace gap {} above {slack}", tr - lmax);
        assert!(
            (sol.w.norm_squared() - tr).abs() <= slack,
            "|w|^2 {} vs trace {}",
            sol.w.norm_squared(),
            tr
        );
    }
}
