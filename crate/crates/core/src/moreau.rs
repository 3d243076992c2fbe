//! Numerical oracle for the proximal point, the Moreau-envelope gradient,
//! the near-stationarity triple, and the gradient mapping.
//!
//! The inner problem min_{y in X} f(y) + (rho_bar/2)||y - x||_w^2 is
//! strongly convex and solved with projected subgradient descent on the
//! exact finite-sum objective, with iterate averaging. The residual
//! estimate comes from a strong-convexity lower bound on the optimal
//! value, so it certifies the distance to the true proximal point.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{project_weighted, Point, Weights};
use crate::linalg;
use crate::problems::{ProblemInstance, ProblemKind};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MoreauConfig {
    /// Envelope parameter; must exceed the weak convexity constant in the
    /// metric used (rho/sqrt(delta) for the weighted path, rho for the
    /// Euclidean path).
    pub rho_bar: f64,
    pub inner_max_iters: usize,
    pub inner_tol: f64,
    pub inner_restarts: usize,
}

impl MoreauConfig {
    /// Default configuration for the weighted path: rho_bar = 2 rho / sqrt(delta).
    pub fn weighted(rho: f64, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::invalid("delta must be in (0, 1]"));
        }
        Self::with_rho_bar(2.0 * rho / delta.sqrt())
    }

    /// Default configuration for the Euclidean path: rho_bar = 2 rho.
    pub fn euclidean(rho: f64) -> Result<Self> {
        Self::with_rho_bar(2.0 * rho)
    }

    pub fn with_rho_bar(rho_bar: f64) -> Result<Self> {
        if !(rho_bar > 0.0) {
            return Err(Error::invalid("rho_bar must be positive"));
        }
        Ok(MoreauConfig {
            rho_bar,
            inner_max_iters: 5_000,
            inner_tol: 1e-6,
            inner_restarts: 3,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProxOutcome {
    pub point: Point,
    /// Certified upper bound on the distance to the true proximal point.
    pub residual: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Upper bound on the envelope value phi_{1/rho_bar}(x).
    pub envelope_value: f64,
}

/// Near-stationarity quantities at one iterate.
#[derive(Debug, Clone, Serialize)]
pub struct StationarityReport {
    pub x_hat: Point,
    pub dist_sq_weighted: f64,
    pub moreau_grad_sq: f64,
    pub subdiff_dist_sq_bound: f64,
    pub phi_x: f64,
    pub phi_x_hat: f64,
    pub inner_residual: f64,
}

/// Approximately solves min_{y in X} f(y) + (rho_bar/2)||y - x||_w^2.
///
/// `w` plays the role of vhat_t^{1/2}; pass unit weights for the Euclidean
/// path. A warm start (e.g. the previous checkpoint's proximal point) cuts
/// inner iterations materially.
pub fn prox_point(
    problem: &ProblemInstance,
    x: &[f64],
    w: &Weights,
    cfg: &MoreauConfig,
    warm: Option<&[f64]>,
) -> Result<ProxOutcome> {
    let d = problem.dim;
    if x.len() != d || w.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: if x.len() != d { x.len() } else { w.dim() },
        });
    }
    let mu = cfg.rho_bar * w.min() - problem.rho;
    if !(mu > 0.0) {
        return Err(Error::invalid(format!(
            "inner problem not strongly convex: rho_bar * min(w) = {} <= rho = {}",
            cfg.rho_bar * w.min(),
            problem.rho
        )));
    }
    let ws = w.as_slice();
    let ones = Weights::ones(d);
    let objective = |y: &[f64]| -> f64 {
        problem.full_objective(y)
            + 0.5 * cfg.rho_bar * y.iter().zip(x).zip(ws).map(|((yi, xi), wi)| wi * (yi - xi) * (yi - xi)).sum::<f64>()
    };
    let subgrad = |y: &[f64]| -> Result<Vec<f64>> {
        let mut g = problem.full_subgrad(y)?;
        for i in 0..d {
            g[i] += cfg.rho_bar * ws[i] * (y[i] - x[i]);
        }
        Ok(g)
    };

    // Candidate set always contains the (feasible) base point, so the
    // returned point never increases the composite objective.
    let base = project_weighted(&problem.set, &ones, x)?;
    let mut best_val = objective(&base);
    let mut best = base;
    let mut lower_bound = f64::NEG_INFINITY;

    // Step cap against the transient blowup of 2/(mu k) on curved objectives.
    let step_cap = 1.0 / (cfg.rho_bar * w.max() + problem.l_smooth.unwrap_or(0.0));

    let mut y = match warm {
        Some(p) if p.len() == d => project_weighted(&problem.set, &ones, p)?,
        _ => best.clone(),
    };
    let mut avg = vec![0.0; d];
    let mut avg_weight = 0.0;
    let mut k = 0usize;
    let mut residual;
    let rounds = cfg.inner_restarts.max(1);

    'outer: for _ in 0..rounds {
        for _ in 0..cfg.inner_max_iters {
            k += 1;
            let val = objective(&y);
            let s = subgrad(&y)?;
            // Strong convexity over the feasible set:
            // F* >= min_{z in X} F(y) + <s, z-y> + (mu/2)||z-y||^2
            //     = F(y) - ||s||^2/(2 mu) + (mu/2) dist(y - s/mu, X)^2.
            let shifted: Vec<f64> = y.iter().zip(&s).map(|(yi, si)| yi - si / mu).collect();
            let nearest = project_weighted(&problem.set, &ones, &shifted)?;
            lower_bound = lower_bound.max(
                val - linalg::norm_sq(&s) / (2.0 * mu)
                    + 0.5 * mu * linalg::dist_sq(&shifted, &nearest),
            );
            if val < best_val {
                best_val = val;
                best = y.clone();
            }
            let step = (2.0 / (mu * (k as f64 + 1.0))).min(step_cap);
            let trial: Vec<f64> = y.iter().zip(&s).map(|(yi, si)| yi - step * si).collect();
            y = project_weighted(&problem.set, &ones, &trial)?;
            avg_weight += k as f64;
            for i in 0..d {
                avg[i] += (y[i] - avg[i]) * k as f64 / avg_weight;
            }
            if k % 50 == 0 {
                let avg_val = objective(&avg);
                if avg_val < best_val {
                    best_val = avg_val;
                    best = avg.clone();
                }
                residual = gap_residual(best_val, lower_bound, mu);
                if residual <= cfg.inner_tol {
                    break 'outer;
                }
            }
        }
        let avg_val = objective(&avg);
        if avg_val < best_val {
            best_val = avg_val;
            best = avg.clone();
        }
        residual = gap_residual(best_val, lower_bound, mu);
        if residual <= cfg.inner_tol {
            break;
        }
        y = best.clone();
    }
    residual = gap_residual(best_val, lower_bound, mu);

    Ok(ProxOutcome {
        envelope_value: best_val,
        converged: residual <= cfg.inner_tol,
        residual,
        iterations: k,
        point: best,
    })
}

fn gap_residual(upper: f64, lower: f64, mu: f64) -> f64 {
    (2.0 * (upper - lower).max(0.0) / mu).sqrt()
}

/// Gradient of the Moreau envelope: rho_bar * w * (x - x_hat) elementwise,
/// with `w` in the role of vhat^{1/2}.
pub fn moreau_grad(x: &[f64], x_hat: &[f64], w: &Weights, rho_bar: f64) -> Point {
    x.iter()
        .zip(x_hat)
        .zip(w.as_slice())
        .map(|((xi, hi), wi)| rho_bar * wi * (xi - hi))
        .collect()
}

/// Computes the proximal point and fills the near-stationarity triple.
///
/// `moreau_grad_sq` is the squared w^{-1}-weighted norm of the envelope
/// gradient, equal to rho_bar^2 * dist_sq_weighted by construction.
pub fn stationarity_report(
    problem: &ProblemInstance,
    x: &[f64],
    w: &Weights,
    cfg: &MoreauConfig,
    warm: Option<&[f64]>,
) -> Result<StationarityReport> {
    let prox = prox_point(problem, x, w, cfg, warm)?;
    let dist_sq_weighted = x
        .iter()
        .zip(&prox.point)
        .zip(w.as_slice())
        .map(|((xi, hi), wi)| wi * (xi - hi) * (xi - hi))
        .sum::<f64>();
    let moreau_grad_sq = cfg.rho_bar * cfg.rho_bar * dist_sq_weighted;
    Ok(StationarityReport {
        phi_x: problem.full_objective(x),
        phi_x_hat: problem.full_objective(&prox.point),
        subdiff_dist_sq_bound: problem.g_bound * moreau_grad_sq,
        dist_sq_weighted,
        moreau_grad_sq,
        inner_residual: prox.residual,
        x_hat: prox.point,
    })
}

/// Per-trajectory warm-start cache for checkpoint reports.
#[derive(Debug, Default, Clone)]
pub struct MoreauTracker {
    warm: Option<Vec<f64>>,
}

impl MoreauTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn report(
        &mut self,
        problem: &ProblemInstance,
        x: &[f64],
        w: &Weights,
        cfg: &MoreauConfig,
    ) -> Result<StationarityReport> {
        let report = stationarity_report(problem, x, w, cfg, self.warm.as_deref())?;
        self.warm = Some(report.x_hat.clone());
        Ok(report)
    }
}

/// Gradient mapping for smooth problems. `vhat` is the raw second-moment
/// vector (not its square root).
pub fn gradient_mapping(
    problem: &ProblemInstance,
    x: &[f64],
    vhat: &Weights,
    lambda: f64,
) -> Result<Point> {
    if problem.kind != ProblemKind::ConstrainedQuadratic {
        return Err(Error::invalid(
            "gradient mapping requires a differentiable objective",
        ));
    }
    if !(lambda > 0.0) {
        return Err(Error::invalid("lambda must be positive"));
    }
    let d = problem.dim;
    if x.len() != d || vhat.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: if x.len() != d { x.len() } else { vhat.dim() },
        });
    }
    let grad = problem.full_subgrad(x)?;
    let w_half = vhat.sqrt();
    let trial: Vec<f64> = x
        .iter()
        .zip(&grad)
        .zip(w_half.as_slice())
        .map(|((xi, gi), wi)| xi - lambda * gi / wi)
        .collect();
    let projected = project_weighted(&problem.set, &w_half, &trial)?;
    Ok(x.iter()
        .zip(&projected)
        .zip(vhat.as_slice())
        .map(|((xi, pi), vi)| vi.powf(0.25) * (xi - pi) / lambda)
        .collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct MappingComparison {
    pub mapping_norm: f64,
    pub moreau_grad_norm: f64,
    /// (1 + L_hat / rho_bar), the comparability constant.
    pub constant: f64,
    pub ratio: f64,
    pub holds: bool,
    pub inner_residual: f64,
}

/// Evaluates both stationarity measures at lambda = 1/rho_bar and checks
/// ||G|| <= (1 + L_hat/rho_bar) ||grad phi||_{vhat^{-1/2}} with
/// L_hat = L/sqrt(delta_eff), delta_eff = min(vhat).
pub fn compare_mapping_vs_moreau(
    problem: &ProblemInstance,
    x: &[f64],
    vhat: &Weights,
    cfg: &MoreauConfig,
) -> Result<MappingComparison> {
    let l = problem
        .l_smooth
        .ok_or_else(|| Error::invalid("comparison requires a smooth problem"))?;
    let mapping = gradient_mapping(problem, x, vhat, 1.0 / cfg.rho_bar)?;
    let mapping_norm = linalg::norm(&mapping);
    let w_half = vhat.sqrt();
    let report = stationarity_report(problem, x, &w_half, cfg, None)?;
    let moreau_grad_norm = report.moreau_grad_sq.sqrt();
    let l_hat = l / vhat.min().sqrt();
    let constant = 1.0 + l_hat / cfg.rho_bar;
    // Slack for the inexact proximal point: the envelope gradient moves by
    // at most rho_bar * max(w) * residual per unit of inner error.
    let slack = 2.0 * constant * cfg.rho_bar * w_half.max() * report.inner_residual + 1e-9;
    let rhs = constant * moreau_grad_norm + slack;
    Ok(MappingComparison {
        mapping_norm,
        moreau_grad_norm,
        constant,
        ratio: if moreau_grad_norm > 0.0 {
            mapping_norm / moreau_grad_norm
        } else {
            f64::NAN
        },
        holds: mapping_norm <= rhs,
        inner_residual: report.inner_residual,
    })
}
