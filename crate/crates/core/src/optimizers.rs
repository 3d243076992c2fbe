//! The four algorithm variants behind one stepping interface: AMSGrad,
//! the RMSprop variant (beta1 = 0), momentum SGD (vhat = 1), and scalar
//! AdaGrad with momentum.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{project_weighted, ConvexSet, Weights};
use crate::linalg;
use crate::moreau::{MoreauConfig, MoreauTracker, StationarityReport};
use crate::problems::{ProblemInstance, ProblemKind};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    AmsGrad,
    RmsPropVariant,
    MomentumSgd,
    ScalarAdaGrad,
}

impl Variant {
    /// Whether the variant runs the diagonal (vhat-weighted) path.
    pub fn is_weighted(self) -> bool {
        matches!(self, Variant::AmsGrad | Variant::RmsPropVariant)
    }
}

/// Fault-injection switches for mutation-sensitivity checks. Production
/// paths always use `None`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FaultInjection {
    #[default]
    None,
    /// Drop the max step: vhat follows the raw exponential average.
    SkipVhatMax,
    /// Project with unit weights regardless of vhat.
    UnweightedProjection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub variant: Variant,
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub delta: f64,
}

impl OptimizerConfig {
    /// Practice-standard benchmark parameters.
    pub fn benchmark(variant: Variant) -> Self {
        OptimizerConfig {
            variant,
            alpha: 0.1,
            beta1: if variant == Variant::RmsPropVariant { 0.0 } else { 0.9 },
            beta2: 0.999,
            delta: 1e-8,
        }
    }

    /// Parameters for lemma verification runs; delta = 1 keeps the
    /// 1/delta-dependent bounds tight.
    pub fn lemma_preset(variant: Variant) -> Self {
        OptimizerConfig {
            delta: 1.0,
            ..Self::benchmark(variant)
        }
    }

    pub fn gamma(&self) -> f64 {
        if self.beta2 > 0.0 {
            self.beta1 * self.beta1 / self.beta2
        } else if self.beta1 == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::invalid("alpha must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta1) {
            return Err(Error::invalid("beta1 must be in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::invalid("beta2 must be in [0, 1)"));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::invalid("delta must be in (0, 1]"));
        }
        if self.variant == Variant::RmsPropVariant && self.beta1 != 0.0 {
            return Err(Error::invalid("the RMSprop variant requires beta1 = 0"));
        }
        if self.variant.is_weighted() && !(self.gamma() < 1.0) {
            return Err(Error::invalid("beta1^2 / beta2 must be below 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentState {
    pub t: usize,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub v_hat: Vec<f64>,
    /// Running sum of squared gradient norms (scalar AdaGrad only).
    pub grad_norm_sq_sum: f64,
    /// The scalar v_t of the AdaGrad recursion.
    pub scalar_v: f64,
    pub x: Vec<f64>,
}

impl MomentState {
    pub fn new(config: &OptimizerConfig, x0: Vec<f64>) -> Self {
        let d = x0.len();
        let v_hat = if config.variant.is_weighted() {
            vec![config.delta; d]
        } else {
            vec![1.0; d]
        };
        MomentState {
            t: 0,
            m: vec![0.0; d],
            v: vec![0.0; d],
            v_hat,
            grad_norm_sq_sum: 0.0,
            scalar_v: config.delta,
            x: x0,
        }
    }

    pub fn alpha_t(&self, config: &OptimizerConfig) -> f64 {
        config.alpha / (self.t as f64).sqrt()
    }

    /// Weights under which the current iterate's stationarity is measured:
    /// vhat^{1/2} on the diagonal path, unit weights otherwise.
    pub fn report_weights(&self, config: &OptimizerConfig) -> Weights {
        if config.variant.is_weighted() {
            Weights::new(self.v_hat.iter().map(|v| v.sqrt()).collect()).expect("vhat positive")
        } else {
            Weights::ones(self.x.len())
        }
    }

    /// The running left-hand side of the step-size/moment summation lemma
    /// appropriate to the variant, for the step just taken.
    fn lemma_term(&self, config: &OptimizerConfig) -> f64 {
        let alpha_t = self.alpha_t(config);
        match config.variant {
            Variant::AmsGrad | Variant::RmsPropVariant => {
                alpha_t * alpha_t
                    * self
                        .m
                        .iter()
                        .zip(&self.v_hat)
                        .map(|(mi, vi)| mi * mi / vi.sqrt())
                        .sum::<f64>()
            }
            Variant::MomentumSgd => alpha_t * alpha_t * linalg::norm_sq(&self.m),
            Variant::ScalarAdaGrad => {
                alpha_t * alpha_t / self.scalar_v * linalg::norm_sq(&self.m)
            }
        }
    }
}

/// One step of the selected variant: moment updates followed by the
/// projected iterate update.
pub fn step(
    state: &mut MomentState,
    g: &[f64],
    config: &OptimizerConfig,
    set: &ConvexSet,
) -> Result<()> {
    step_with_fault(state, g, config, set, FaultInjection::None)
}

pub fn step_with_fault(
    state: &mut MomentState,
    g: &[f64],
    config: &OptimizerConfig,
    set: &ConvexSet,
    fault: FaultInjection,
) -> Result<()> {
    update_moments(state, g, config, fault)?;
    apply_iterate_update(state, config, set, fault)
}

/// Moment recursions only; exposed separately so the run loop can evaluate
/// stationarity at (x_t, vhat_t) before moving the iterate.
pub fn update_moments(
    state: &mut MomentState,
    g: &[f64],
    config: &OptimizerConfig,
    fault: FaultInjection,
) -> Result<()> {
    let d = state.x.len();
    if g.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: g.len() });
    }
    if !linalg::all_finite(g) {
        return Err(Error::Numerical {
            what: "gradient entries".into(),
            residual: f64::NAN,
        });
    }
    state.t += 1;
    let (b1, b2) = (config.beta1, config.beta2);
    for i in 0..d {
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g[i];
    }
    match config.variant {
        Variant::AmsGrad | Variant::RmsPropVariant => {
            for i in 0..d {
                state.v[i] = b2 * state.v[i] + (1.0 - b2) * g[i] * g[i];
                state.v_hat[i] = if fault == FaultInjection::SkipVhatMax {
                    state.v[i]
                } else {
                    state.v_hat[i].max(state.v[i])
                };
            }
        }
        Variant::MomentumSgd => {}
        Variant::ScalarAdaGrad => {
            state.grad_norm_sq_sum += linalg::norm_sq(g);
            state.scalar_v = (config.delta + state.grad_norm_sq_sum / d as f64) / state.t as f64;
        }
    }
    Ok(())
}

fn apply_iterate_update(
    state: &mut MomentState,
    config: &OptimizerConfig,
    set: &ConvexSet,
    fault: FaultInjection,
) -> Result<()> {
    let d = state.x.len();
    let alpha_t = state.alpha_t(config);
    let trial: Vec<f64> = match config.variant {
        Variant::AmsGrad | Variant::RmsPropVariant => (0..d)
            .map(|i| state.x[i] - alpha_t * state.m[i] / state.v_hat[i].sqrt())
            .collect(),
        Variant::MomentumSgd => (0..d).map(|i| state.x[i] - alpha_t * state.m[i]).collect(),
        Variant::ScalarAdaGrad => {
            let scale = alpha_t / state.scalar_v.sqrt();
            (0..d).map(|i| state.x[i] - scale * state.m[i]).collect()
        }
    };
    let weights = if fault == FaultInjection::UnweightedProjection || !config.variant.is_weighted()
    {
        Weights::ones(d)
    } else {
        state.report_weights(config)
    };
    state.x = project_weighted(set, &weights, &trial)?;
    Ok(())
}

/// One checkpoint row of a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub t: usize,
    pub alpha_t: f64,
    pub f_x: f64,
    pub phi_x: f64,
    pub phi_x_hat: f64,
    pub dist_sq_weighted: f64,
    pub moreau_grad_sq: f64,
    pub subdiff_dist_sq_bound: f64,
    pub vhat_min: f64,
    pub vhat_max: f64,
    pub vhat_sqrt_sum: f64,
    pub lemma_lhs_running: f64,
}

#[derive(Debug, Clone)]
pub struct RunSeeds {
    pub sampling: u64,
    pub output: u64,
}

impl RunSeeds {
    /// Both streams keyed off one seed; they stay independent through
    /// domain separation.
    pub fn from_single(seed: u64) -> Self {
        RunSeeds { sampling: seed, output: seed }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub horizon: usize,
    pub checkpoints: Vec<usize>,
    /// When false, no stationarity reports are computed (cheap bulk runs
    /// for lemma bounds).
    pub eval_reports: bool,
    pub x_init: Option<Vec<f64>>,
    pub fault: FaultInjection,
}

impl RunOptions {
    pub fn new(horizon: usize) -> Self {
        RunOptions {
            horizon,
            checkpoints: log_spaced_checkpoints(horizon, 30),
            eval_reports: true,
            x_init: None,
            fault: FaultInjection::None,
        }
    }

    pub fn without_reports(horizon: usize) -> Self {
        RunOptions {
            checkpoints: Vec::new(),
            eval_reports: false,
            ..Self::new(horizon)
        }
    }
}

/// Log-spaced checkpoint schedule over {1..T}, always containing 1 and T.
pub fn log_spaced_checkpoints(horizon: usize, count: usize) -> Vec<usize> {
    if horizon == 0 {
        return Vec::new();
    }
    let count = count.max(2);
    let mut set = BTreeSet::new();
    let log_t = (horizon as f64).ln();
    for i in 0..count {
        let frac = i as f64 / (count - 1) as f64;
        let t = (frac * log_t).exp().round() as usize;
        set.insert(t.clamp(1, horizon));
    }
    set.into_iter().collect()
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<TrajectoryRecord>,
    pub t_star: usize,
    pub x_star: Vec<f64>,
    pub star_weights: Weights,
    pub star_report: Option<StationarityReport>,
    /// Envelope value at the first iterate, phi^1_{1/rho_bar}(x_1).
    pub phi1: Option<f64>,
    /// sum_i vhat_{T+1,i}^{1/2}, measured with one extra moment update.
    pub vhat_sqrt_sum_final: f64,
    pub lemma_lhs_total: f64,
    pub x_final: Vec<f64>,
}

/// Runs T steps with mini-batch size 1, logging a row per checkpoint and
/// returning the uniformly drawn output iterate with its report.
pub fn run(
    problem: &ProblemInstance,
    config: &OptimizerConfig,
    options: &RunOptions,
    seeds: &RunSeeds,
    moreau_cfg: Option<&MoreauConfig>,
) -> Result<RunOutput> {
    config.validate()?;
    let horizon = options.horizon;
    if horizon == 0 {
        return Err(Error::invalid("horizon must be at least 1"));
    }
    if options.eval_reports && moreau_cfg.is_none() {
        return Err(Error::invalid("stationarity reports need a Moreau config"));
    }
    if config.variant.is_weighted() && config.delta > problem.g_bound * problem.g_bound {
        return Err(Error::invalid("delta exceeds G^2; vhat bounds would fail"));
    }
    let d = problem.dim;
    let checkpoints: BTreeSet<usize> = options.checkpoints.iter().copied().collect();
    if checkpoints.iter().any(|&t| t == 0 || t > horizon) {
        return Err(Error::invalid("checkpoints must lie in {1..T}"));
    }

    let ones = Weights::ones(d);
    let x0 = match &options.x_init {
        Some(x) => {
            if x.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: x.len() });
            }
            if !problem.set.contains(x, 1e-12) {
                return Err(Error::invalid("initial iterate is infeasible"));
            }
            x.clone()
        }
        None => project_weighted(&problem.set, &ones, &vec![1.0; d])?,
    };

    let mut rng_sampling = RngStream::sampling(seeds.sampling);
    let mut rng_output = RngStream::output(seeds.output);
    let t_star = rng_output.gen_range(1..=horizon);

    let mut state = MomentState::new(config, x0);
    let mut tracker = MoreauTracker::new();
    let mut records = Vec::with_capacity(checkpoints.len());
    let mut lemma_lhs = 0.0;
    let mut phi1 = None;
    let mut x_star = Vec::new();
    let mut star_weights = ones.clone();
    let mut star_report = None;

    let check_region =
        matches!(problem.kind, ProblemKind::PhaseRetrieval | ProblemKind::ConstrainedQuadratic);

    for t in 1..=horizon {
        let sample = problem.sample(&mut rng_sampling).clone();
        let g = problem
            .stoch_subgrad(&state.x, &sample)
            .map_err(|e| e.at_step(t))?;
        if linalg::inf_norm(&g) > problem.g_bound * (1.0 + 1e-9) {
            return Err(Error::Numerical {
                what: "subgradient bound G".into(),
                residual: linalg::inf_norm(&g) - problem.g_bound,
            }
            .at_step(t));
        }
        update_moments(&mut state, &g, config, options.fault).map_err(|e| e.at_step(t))?;
        lemma_lhs += state.lemma_term(config);

        let at_checkpoint = checkpoints.contains(&t);
        if options.eval_reports && (at_checkpoint || t == 1 || t == t_star) {
            let weights = state.report_weights(config);
            let cfg = moreau_cfg.expect("checked above");
            let report = tracker
                .report(problem, &state.x, &weights, cfg)
                .map_err(|e| e.at_step(t))?;
            if t == 1 {
                phi1 = Some(report.phi_x_hat + 0.5 * cfg.rho_bar * report.dist_sq_weighted);
            }
            if t == t_star {
                star_report = Some(report.clone());
            }
            if at_checkpoint {
                let vhat_min = state.v_hat.iter().cloned().fold(f64::INFINITY, f64::min);
                let vhat_max = state.v_hat.iter().cloned().fold(0.0, f64::max);
                records.push(TrajectoryRecord {
                    t,
                    alpha_t: state.alpha_t(config),
                    f_x: problem.full_objective(&state.x),
                    phi_x: report.phi_x,
                    phi_x_hat: report.phi_x_hat,
                    dist_sq_weighted: report.dist_sq_weighted,
                    moreau_grad_sq: report.moreau_grad_sq,
                    subdiff_dist_sq_bound: report.subdiff_dist_sq_bound,
                    vhat_min,
                    vhat_max,
                    vhat_sqrt_sum: state.v_hat.iter().map(|v| v.sqrt()).sum(),
                    lemma_lhs_running: lemma_lhs,
                });
            }
        }
        if t == t_star {
            x_star = state.x.clone();
            star_weights = state.report_weights(config);
        }

        apply_iterate_update(&mut state, config, &problem.set, options.fault)
            .map_err(|e| e.at_step(t))?;
        if !problem.set.contains(&state.x, 1e-12) {
            return Err(Error::Numerical {
                what: "iterate feasibility".into(),
                residual: f64::NAN,
            }
            .at_step(t));
        }
        if check_region && linalg::norm(&state.x) > problem.region_radius * (1.0 + 1e-9) {
            return Err(Error::Numerical {
                what: "iterate left the operating region".into(),
                residual: linalg::norm(&state.x) - problem.region_radius,
            }
            .at_step(t));
        }
    }

    // One extra moment update yields vhat_{T+1} for the theorem's C3 term.
    let vhat_sqrt_sum_final = {
        let sample = problem.sample(&mut rng_sampling).clone();
        let g = problem.stoch_subgrad(&state.x, &sample)?;
        let mut peek = state.clone();
        update_moments(&mut peek, &g, config, options.fault)?;
        peek.v_hat.iter().map(|v| v.sqrt()).sum()
    };

    Ok(RunOutput {
        records,
        t_star,
        x_star,
        star_weights,
        star_report,
        phi1,
        vhat_sqrt_sum_final,
        lemma_lhs_total: lemma_lhs,
        x_final: state.x,
    })
}
