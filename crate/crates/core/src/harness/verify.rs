//! The verification suite behind `wcxopt verify`: projection oracles,
//! prox closed forms, lemma identities and bounds, trajectory invariants,
//! and theorem bounds at small presets. Fault injection exists solely to
//! prove the suite is sensitive to the mutations it claims to guard.

use serde::Serialize;

use super::config::{preset, resolve_constants};
use super::run::run_all_seeds;
use crate::analysis::{
    adagrad_sum_bound, lemma4_bound, momentum_decomposition_check, theorem_bound_check,
    theorem_constants, Theorem, TheoremInputs,
};
use crate::error::{Error, Result};
use crate::geometry::{project_weighted, weighted_norm_sq, ConvexSet, Weights};
use crate::linalg;
use crate::moreau::{prox_point, MoreauConfig};
use crate::optimizers::{
    step_with_fault, update_moments, FaultInjection, MomentState, OptimizerConfig, Variant,
};
use crate::problems::{check_weak_convexity, make_problem, ProblemInstance, ProblemKind, Sample};
use crate::rng::RngStream;

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub pass: bool,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn failing(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.name.as_str())
            .collect()
    }
}

fn check(name: &str, pass: bool, lhs: f64, rhs: f64, detail: impl Into<String>) -> CheckResult {
    CheckResult {
        name: name.to_string(),
        pass,
        lhs,
        rhs,
        detail: detail.into(),
    }
}

fn sample_sets(dim: usize) -> Vec<ConvexSet> {
    vec![
        ConvexSet::free(dim),
        ConvexSet::boxed(vec![-0.7; dim], vec![0.4; dim]).unwrap(),
        ConvexSet::ball(vec![0.1; dim], 0.9).unwrap(),
        ConvexSet::simplex(dim, 1.0).unwrap(),
    ]
}

fn random_weights(rng: &mut RngStream, dim: usize) -> Weights {
    Weights::new((0..dim).map(|_| rng.gen_range(0.05..8.0)).collect()).unwrap()
}

fn random_point(rng: &mut RngStream, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-scale..scale)).collect()
}

pub fn projection_idempotence_check(trials: usize, seed: u64) -> CheckResult {
    let mut rng = RngStream::check(seed);
    let mut worst = 0.0f64;
    let mut failures = 0usize;
    for _ in 0..trials {
        for set in sample_sets(4) {
            let w = random_weights(&mut rng, 4);
            let y = random_point(&mut rng, 4, 3.0);
            let p1 = project_weighted(&set, &w, &y).unwrap();
            let p2 = project_weighted(&set, &w, &p1).unwrap();
            let diff = linalg::dist_sq(&p1, &p2).sqrt();
            worst = worst.max(diff);
            if p1 != p2 {
                failures += 1;
            }
        }
    }
    check(
        "projection_idempotence",
        failures == 0,
        worst,
        0.0,
        format!("{failures} non-idempotent projections"),
    )
}

pub fn projection_nonexpansiveness_check(trials: usize, seed: u64) -> CheckResult {
    let mut rng = RngStream::check(seed);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..trials {
        for set in sample_sets(4) {
            let w = random_weights(&mut rng, 4);
            let y1 = random_point(&mut rng, 4, 3.0);
            let y2 = random_point(&mut rng, 4, 3.0);
            let p1 = project_weighted(&set, &w, &y1).unwrap();
            let p2 = project_weighted(&set, &w, &y2).unwrap();
            let lhs = weighted_norm_sq(&linalg::sub(&p1, &p2), &w).unwrap().sqrt();
            let rhs = weighted_norm_sq(&linalg::sub(&y1, &y2), &w).unwrap().sqrt();
            worst = worst.max(lhs - rhs);
        }
    }
    check(
        "projection_nonexpansiveness",
        worst <= 1e-10,
        worst,
        1e-10,
        "max ||Py1-Py2||_w - ||y1-y2||_w over random pairs",
    )
}

pub fn projection_grid_oracle_check() -> CheckResult {
    // 2-D brute force on a fine grid of the feasible set.
    let w = Weights::new(vec![4.0, 1.0]).unwrap();
    let mut worst = 0.0f64;
    for (set, y) in [
        (ConvexSet::ball(vec![0.0, 0.0], 1.0).unwrap(), vec![2.0, 2.0]),
        (ConvexSet::simplex(2, 1.0).unwrap(), vec![1.5, -0.4]),
    ] {
        let p = project_weighted(&set, &w, &y).unwrap();
        let n = 4000;
        let mut best = f64::INFINITY;
        let mut best_pt = vec![0.0, 0.0];
        for i in 0..=n {
            for j in 0..=n {
                let cand = [
                    -1.0 + 2.0 * i as f64 / n as f64,
                    -1.0 + 2.0 * j as f64 / n as f64,
                ];
                if !set.contains(&cand, 1e-9) {
                    continue;
                }
                let d = weighted_norm_sq(&linalg::sub(&cand, &y), &w).unwrap();
                if d < best {
                    best = d;
                    best_pt = cand.to_vec();
                }
            }
        }
        worst = worst.max(linalg::dist_sq(&p, &best_pt).sqrt());
    }
    check(
        "projection_grid_oracle",
        worst <= 1e-3,
        worst,
        1e-3,
        "distance between solver output and 4000^2 grid argmin",
    )
}

pub fn prox_closed_forms_check() -> CheckResult {
    // Quadratic instance with separable closed form.
    let quad = ProblemInstance {
        kind: ProblemKind::ConstrainedQuadratic,
        dim: 2,
        samples: vec![
            Sample { a: vec![1.0, 0.0], b: 0.0 },
            Sample { a: vec![0.0, 1.0], b: 0.0 },
        ],
        set: ConvexSet::free(2),
        rho: 0.5,
        g_bound: 100.0,
        f_star: 0.0,
        l_smooth: Some(0.5),
        region_radius: 50.0,
        x_planted: vec![0.0, 0.0],
    };
    let cfg = MoreauConfig::with_rho_bar(2.0).unwrap();
    let w = Weights::new(vec![1.5, 0.7]).unwrap();
    let x = [0.9, -1.1];
    let mut worst = 0.0f64;
    match prox_point(&quad, &x, &w, &cfg, None) {
        Ok(out) => {
            for i in 0..2 {
                // min (1/4)y^2 + w_i (y - x_i)^2 at y = 2 w_i x_i/(1/2 + 2 w_i)
                let expected = 2.0 * w.as_slice()[i] * x[i] / (0.5 + 2.0 * w.as_slice()[i]);
                worst = worst.max((out.point[i] - expected).abs());
            }
        }
        Err(_) => worst = f64::INFINITY,
    }

    // Soft threshold: f = |x|, prox at x=2 with rho_bar=1 is 1.
    let abs = ProblemInstance {
        kind: ProblemKind::RobustRegression,
        dim: 1,
        samples: vec![Sample { a: vec![1.0], b: 0.0 }],
        set: ConvexSet::free(1),
        rho: 0.0,
        g_bound: 1.0,
        f_star: 0.0,
        l_smooth: None,
        region_radius: 100.0,
        x_planted: vec![0.0],
    };
    let cfg1 = MoreauConfig::with_rho_bar(1.0).unwrap();
    match prox_point(&abs, &[2.0], &Weights::ones(1), &cfg1, None) {
        Ok(out) => worst = worst.max((out.point[0] - 1.0).abs()),
        Err(_) => worst = f64::INFINITY,
    }
    check(
        "prox_closed_forms",
        worst <= 1e-6,
        worst,
        1e-6,
        "max deviation from analytic proximal points",
    )
}

pub fn weak_convexity_check(quick: bool) -> CheckResult {
    let trials = if quick { 200 } else { 2000 };
    let mut worst = f64::NEG_INFINITY;
    let mut pass = true;
    for name in ["robust-reg-small", "phase-ret-small", "quadratic-small"] {
        let cfg = preset(name).unwrap();
        let instance = cfg.problem.build().unwrap();
        let rho = cfg.problem.effective_rho(&instance).unwrap();
        let res =
            check_weak_convexity(&instance, rho, trials, instance.region_radius, 31).unwrap();
        worst = worst.max(res.worst_violation);
        pass &= res.pass;
    }
    check(
        "weak_convexity",
        pass,
        worst,
        1e-9,
        "worst midpoint-convexity violation of f + (rho/2)||.||^2",
    )
}

pub fn lemma3_identity_check(trials: usize, seed: u64) -> CheckResult {
    let mut rng = RngStream::check(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        for &b1 in &[0.0, 0.5, 0.9, 0.99] {
            let a: Vec<Vec<f64>> = (0..40).map(|_| random_point(&mut rng, 6, 2.0)).collect();
            let g: Vec<Vec<f64>> = (0..40).map(|_| random_point(&mut rng, 6, 2.0)).collect();
            worst = worst.max(momentum_decomposition_check(&a, &g, b1).unwrap());
        }
    }
    // Scale: entries up to 2, dimension 6, so inner products are O(24).
    check(
        "lemma3_identity",
        worst <= 1e-10 * 24.0,
        worst,
        1e-10 * 24.0,
        "max residual of the momentum decomposition",
    )
}

/// Trajectory invariants of the diagonal path: delta <= vhat <= G^2 and
/// monotone vhat, read off checkpoint records of a (possibly faulted) run.
pub fn vhat_bounds_check(fault: FaultInjection, quick: bool) -> Result<CheckResult> {
    let mut cfg = preset("robust-reg-small")?;
    cfg.optimizer.delta = 0.01; // gradients are below 1; keep vhat active
    cfg.horizon = if quick { 200 } else { 1000 };
    cfg.seeds = vec![0, 1, 2];
    let instance = cfg.problem.build()?;
    let outputs = run_all_seeds(&cfg, Some(0), true, fault)?;
    let mut pass = true;
    let mut worst = 0.0f64;
    for (_, out) in &outputs {
        let mut prev_min = 0.0;
        let mut prev_max = 0.0;
        for r in &out.records {
            let below = cfg.optimizer.delta - r.vhat_min;
            let above = r.vhat_max - instance.g_bound * instance.g_bound;
            worst = worst.max(below).max(above);
            pass &= below <= 0.0 && above <= 0.0;
            pass &= r.vhat_min >= prev_min && r.vhat_max >= prev_max;
            prev_min = r.vhat_min;
            prev_max = r.vhat_max;
        }
    }
    Ok(check(
        "vhat_bounds",
        pass,
        worst,
        0.0,
        "delta <= vhat <= G^2 and monotone vhat at every checkpoint",
    ))
}

/// Variational-inequality test of the production update: for the step
/// x+ = P^w(y), every feasible u must satisfy <w (y - x+), u - x+> <= 0
/// with w = vhat^{1/2}. Run against the real stepping code so a wrong
/// projection metric is caught.
pub fn projection_vi_check(fault: FaultInjection, quick: bool) -> Result<CheckResult> {
    let set = ConvexSet::ball(vec![0.0; 4], 0.25)?;
    let instance = make_problem(ProblemKind::RobustRegression, 4, 20, set.clone(), 17)?;
    let cfg = OptimizerConfig {
        variant: Variant::AmsGrad,
        alpha: 0.5,
        beta1: 0.9,
        beta2: 0.99,
        delta: 0.01,
        ..OptimizerConfig::benchmark(Variant::AmsGrad)
    };
    let steps = if quick { 120 } else { 400 };
    let mut state = MomentState::new(&cfg, vec![0.0; 4]);
    let mut rng = RngStream::sampling(99);
    let mut urng = RngStream::check(23);
    let mut worst = f64::NEG_INFINITY;
    for t in 1..=steps {
        let sample = instance.sample(&mut rng).clone();
        let g = instance.stoch_subgrad(&state.x, &sample)?;
        // Recompute the pre-projection point from a peeked moment update.
        let mut peek = state.clone();
        update_moments(&mut peek, &g, &cfg, fault)?;
        let alpha_t = cfg.alpha / (t as f64).sqrt();
        let y: Vec<f64> = (0..4)
            .map(|i| peek.x[i] - alpha_t * peek.m[i] / peek.v_hat[i].sqrt())
            .collect();
        let w = peek.report_weights(&cfg);

        step_with_fault(&mut state, &g, &cfg, &set, fault)?;
        let z = &state.x;
        // Candidate u's: random feasible points plus the exact weighted
        // projection of y, which maximizes the VI residual when the step
        // projected in the wrong metric.
        let mut candidates: Vec<Vec<f64>> = (0..10)
            .map(|_| {
                let raw = random_point(&mut urng, 4, 0.3);
                project_weighted(&set, &Weights::ones(4), &raw)
            })
            .collect::<Result<_>>()?;
        candidates.push(project_weighted(&set, &w, &y)?);
        for u in &candidates {
            let vi: f64 = (0..4)
                .map(|i| w.as_slice()[i] * (y[i] - z[i]) * (u[i] - z[i]))
                .sum();
            worst = worst.max(vi);
        }
    }
    let tol = 1e-8;
    Ok(check(
        "projection_vi",
        worst <= tol,
        worst,
        tol,
        "max <w(y - x+), u - x+> over feasible u along a real trajectory",
    ))
}

pub fn lemma4_runs_check(fault: FaultInjection, quick: bool) -> Result<CheckResult> {
    let mut cfg = preset("robust-reg-small")?;
    cfg.horizon = if quick { 500 } else { 5000 };
    cfg.seeds = (0..if quick { 5 } else { 20 }).collect();
    let instance = cfg.problem.build()?;
    let outputs = run_all_seeds(&cfg, Some(0), false, fault)?;
    let mut pass = true;
    let mut worst_ratio = 0.0f64;
    for (_, out) in &outputs {
        let bc = lemma4_bound(
            out.lemma_lhs_total,
            &cfg.optimizer,
            instance.g_bound,
            instance.dim,
            cfg.horizon,
        )?;
        pass &= bc.holds;
        worst_ratio = worst_ratio.max(bc.lhs / bc.rhs);
    }
    Ok(check(
        "lemma4_bound",
        pass,
        worst_ratio,
        1.0,
        "max lhs/rhs of the step-size summation bound over seeds",
    ))
}

pub fn adagrad_runs_check(quick: bool) -> Result<CheckResult> {
    let mut cfg = preset("adagrad-robust-reg")?;
    cfg.horizon = if quick { 500 } else { 5000 };
    cfg.seeds = (0..if quick { 5 } else { 20 }).collect();
    let instance = cfg.problem.build()?;
    let outputs = run_all_seeds(&cfg, Some(0), false, FaultInjection::None)?;
    let mut pass = true;
    let mut worst_ratio = 0.0f64;
    for (_, out) in &outputs {
        let bc = adagrad_sum_bound(
            out.lemma_lhs_total,
            cfg.optimizer.alpha,
            instance.dim,
            cfg.optimizer.delta,
            instance.g_bound,
            cfg.horizon,
        )?;
        pass &= bc.holds;
        worst_ratio = worst_ratio.max(bc.lhs / bc.rhs);
    }
    Ok(check(
        "adagrad_sum_bound",
        pass,
        worst_ratio,
        1.0,
        "max lhs/rhs of the scalar-AdaGrad summation bound over seeds",
    ))
}

/// Checkpoint-level stationarity invariants: the proximal point does not
/// increase the objective (up to inner tolerance), the envelope-gradient
/// identity holds exactly, and the distance bound D_hat is respected.
pub fn stationarity_triple_check(quick: bool) -> Result<CheckResult> {
    let mut worst = f64::NEG_INFINITY;
    let mut pass = true;
    for name in ["robust-reg-small", "adagrad-robust-reg"] {
        let mut cfg = preset(name)?;
        cfg.horizon = if quick { 200 } else { 1000 };
        cfg.seeds = vec![0, 1];
        let instance = cfg.problem.build()?;
        let constants = resolve_constants(&cfg, &instance)?;
        let outputs = run_all_seeds(&cfg, Some(0), true, FaultInjection::None)?;
        let descent_slack = 10.0 * cfg.inner.tol * constants.rho_bar * instance.g_bound;
        for (_, out) in &outputs {
            for r in &out.records {
                let descent = r.phi_x_hat - r.phi_x - descent_slack;
                worst = worst.max(descent);
                pass &= descent <= 0.0;
                let identity =
                    r.moreau_grad_sq - constants.rho_bar * constants.rho_bar * r.dist_sq_weighted;
                pass &= identity == 0.0;
                // ||x - x_hat||^2 <= dist_sq_weighted / min_i w_i.
                let dist = (r.dist_sq_weighted / r.vhat_min.sqrt()).sqrt();
                let excess = dist - constants.d_hat - 10.0 * cfg.inner.tol;
                worst = worst.max(excess);
                pass &= excess <= 0.0;
            }
        }
    }
    Ok(check(
        "stationarity_triple",
        pass,
        worst,
        0.0,
        "objective descent at x_hat, exact gradient identity, D_hat bound",
    ))
}

pub fn theorem_checks(workers: Option<usize>) -> Result<Vec<CheckResult>> {
    let mut results = Vec::new();
    // Diagonal-path bound protocol (Theorem::One).
    {
        let mut cfg = preset("robust-reg-small")?;
        cfg.horizon = 2000;
        cfg.checkpoints = vec![1];
        let instance = cfg.problem.build()?;
        let constants = resolve_constants(&cfg, &instance)?;
        let outputs = run_all_seeds(&cfg, workers, true, FaultInjection::None)?;
        let phi1 = outputs
            .iter()
            .filter_map(|(_, o)| o.phi1)
            .sum::<f64>()
            / outputs.len() as f64;
        let vhat_sum = outputs.iter().map(|(_, o)| o.vhat_sqrt_sum_final).sum::<f64>()
            / outputs.len() as f64;
        let inputs = TheoremInputs {
            rho: constants.rho_effective,
            g_bound: instance.g_bound,
            dim: instance.dim,
            delta: cfg.optimizer.delta,
            alpha: cfg.optimizer.alpha,
            beta1: cfg.optimizer.beta1,
            beta2: cfg.optimizer.beta2,
            phi1,
            f_star: instance.f_star,
            vhat_sqrt_sum: Some(vhat_sum),
            rho_bar: Some(constants.rho_bar),
        };
        let consts = theorem_constants(Theorem::One, &inputs)?;
        let per_seed: Vec<Option<f64>> = outputs
            .iter()
            .map(|(_, o)| o.star_report.as_ref().map(|r| r.moreau_grad_sq))
            .collect();
        let tc = theorem_bound_check(&per_seed, &consts, cfg.horizon)?;
        results.push(check(
            "theorem1_bound",
            tc.holds,
            tc.measured,
            tc.bound,
            format!("{} seeds used, {} excluded", tc.seeds_used, tc.seeds_excluded),
        ));
    }
    // Scalar-path bound protocol (Theorem::Two).
    {
        let mut cfg = preset("adagrad-robust-reg")?;
        cfg.horizon = 2000;
        cfg.checkpoints = vec![1];
        let instance = cfg.problem.build()?;
        let constants = resolve_constants(&cfg, &instance)?;
        let outputs = run_all_seeds(&cfg, workers, true, FaultInjection::None)?;
        let phi1 = outputs.iter().filter_map(|(_, o)| o.phi1).sum::<f64>()
            / outputs.len() as f64;
        let inputs = TheoremInputs {
            rho: constants.rho_effective,
            g_bound: instance.g_bound,
            dim: instance.dim,
            delta: cfg.optimizer.delta,
            alpha: cfg.optimizer.alpha,
            beta1: cfg.optimizer.beta1,
            beta2: cfg.optimizer.beta2,
            phi1,
            f_star: instance.f_star,
            vhat_sqrt_sum: None,
            rho_bar: Some(constants.rho_bar),
        };
        let consts = theorem_constants(Theorem::Two, &inputs)?;
        let per_seed: Vec<Option<f64>> = outputs
            .iter()
            .map(|(_, o)| o.star_report.as_ref().map(|r| r.moreau_grad_sq))
            .collect();
        let tc = theorem_bound_check(&per_seed, &consts, cfg.horizon)?;
        results.push(check(
            "theorem2_bound",
            tc.holds,
            tc.measured,
            tc.bound,
            format!("{} seeds used, {} excluded", tc.seeds_used, tc.seeds_excluded),
        ));
    }
    Ok(results)
}

/// Runs the full suite. `quick` shrinks trial counts and skips the
/// theorem protocols (used by the mutation-sensitivity tests).
pub fn verify(fault: FaultInjection, workers: Option<usize>, quick: bool) -> Result<VerifyReport> {
    let trials = if quick { 100 } else { 1000 };
    let mut checks = vec![
        projection_idempotence_check(trials, 41),
        projection_nonexpansiveness_check(trials, 42),
        prox_closed_forms_check(),
        weak_convexity_check(quick),
        lemma3_identity_check(if quick { 20 } else { 250 }, 43),
        vhat_bounds_check(fault, quick)?,
        projection_vi_check(fault, quick)?,
        lemma4_runs_check(fault, quick)?,
        adagrad_runs_check(quick)?,
        stationarity_triple_check(quick)?,
    ];
    if !quick {
        checks.push(projection_grid_oracle_check());
        checks.extend(theorem_checks(workers)?);
    }
    let pass = checks.iter().all(|c| c.pass);
    Ok(VerifyReport { pass, checks })
}

/// Parse the fault name used by the CLI.
pub fn parse_fault(name: &str) -> Result<FaultInjection> {
    match name {
        "none" => Ok(FaultInjection::None),
        "skip-vhat-max" => Ok(FaultInjection::SkipVhatMax),
        "unweighted-projection" => Ok(FaultInjection::UnweightedProjection),
        other => Err(Error::invalid(format!(
            "unknown fault '{other}' (expected none, skip-vhat-max, unweighted-projection)"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_quick_suite_passes() {
        let report = verify(FaultInjection::None, Some(0), true).unwrap();
        assert!(report.pass, "failing checks: {:?}", report.failing());
    }

    #[test]
    fn skip_vhat_max_is_detected() {
        let report = verify(FaultInjection::SkipVhatMax, Some(0), true).unwrap();
        assert!(!report.pass);
        assert!(
            report.failing().contains(&"vhat_bounds"),
            "failing checks: {:?}",
            report.failing()
        );
    }

    #[test]
    fn unweighted_projection_is_detected() {
        let report = verify(FaultInjection::UnweightedProjection, Some(0), true).unwrap();
        assert!(!report.pass);
        assert!(
            report.failing().contains(&"projection_vi"),
            "failing checks: {:?}",
            report.failing()
        );
    }

    #[test]
    fn fault_names_parse() {
        assert!(matches!(parse_fault("none"), Ok(FaultInjection::None)));
        assert!(matches!(
            parse_fault("skip-vhat-max"),
            Ok(FaultInjection::SkipVhatMax)
        ));
        assert!(parse_fault("bogus").is_err());
    }
}
