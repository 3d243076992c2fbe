//! Lemma identity checks, theorem-constant evaluation, bound verification,
//! and convergence-rate fitting over immutable trajectory data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::optimizers::OptimizerConfig;

/// Both sides of a deterministic inequality check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl BoundCheck {
    fn new(lhs: f64, rhs: f64) -> Self {
        BoundCheck { lhs, rhs, holds: lhs <= rhs }
    }
}

/// Verifies the per-step momentum decomposition
///   <A_t, g_t> = (1/(1-b1)) (<A_t, m_t> - <A_{t-1}, m_{t-1}>)
///              + <A_{t-1}, m_{t-1}> + (b1/(1-b1)) <A_{t-1} - A_t, m_{t-1}>
/// with m_0 = 0 and A_0 arbitrary (taken as A_1). Returns the largest
/// absolute difference between the two sides.
pub fn momentum_decomposition_check(
    a_seq: &[Vec<f64>],
    g_seq: &[Vec<f64>],
    beta1: f64,
) -> Result<f64> {
    if a_seq.len() != g_seq.len() || a_seq.is_empty() {
        return Err(Error::invalid("sequences must be nonempty and equal length"));
    }
    if !(0.0..1.0).contains(&beta1) {
        return Err(Error::invalid("beta1 must be in [0, 1)"));
    }
    let d = a_seq[0].len();
    if a_seq.iter().chain(g_seq).any(|v| v.len() != d) {
        return Err(Error::DimensionMismatch { expected: d, got: 0 });
    }
    let r = 1.0 / (1.0 - beta1);
    let mut m_prev = vec![0.0; d];
    let mut a_prev = a_seq[0].clone();
    let mut worst: f64 = 0.0;
    for (a, g) in a_seq.iter().zip(g_seq) {
        let m: Vec<f64> = m_prev
            .iter()
            .zip(g)
            .map(|(mi, gi)| beta1 * mi + (1.0 - beta1) * gi)
            .collect();
        let lhs = linalg::dot(a, g);
        let rhs = r * (linalg::dot(a, &m) - linalg::dot(&a_prev, &m_prev))
            + linalg::dot(&a_prev, &m_prev)
            + beta1 * r * (linalg::dot(&a_prev, &m_prev) - linalg::dot(a, &m_prev));
        worst = worst.max((lhs - rhs).abs());
        m_prev = m;
        a_prev = a.clone();
    }
    Ok(worst)
}

/// Step-size/moment summation bound for the diagonal variants:
///   sum_t alpha_t^2 ||m_t||^2_{vhat_t^{-1/2}}
///     <= (1-b1)/sqrt((1-b2)(1-gamma)) * d G (1 + log T).
/// `lemma_lhs_total` is the online-accumulated left side from a run.
/// The right side is as stated, which requires alpha <= 1.
pub fn lemma4_bound(
    lemma_lhs_total: f64,
    config: &OptimizerConfig,
    g_bound: f64,
    dim: usize,
    horizon: usize,
) -> Result<BoundCheck> {
    let gamma = config.gamma();
    if !(gamma < 1.0) {
        return Err(Error::invalid("beta1^2 / beta2 must be below 1"));
    }
    if config.alpha > 1.0 {
        return Err(Error::invalid("bound as stated requires alpha <= 1"));
    }
    let rhs = (1.0 - config.beta1) / ((1.0 - config.beta2) * (1.0 - gamma)).sqrt()
        * dim as f64
        * g_bound
        * (1.0 + (horizon as f64).ln());
    Ok(BoundCheck::new(lemma_lhs_total, rhs))
}

/// Scalar-AdaGrad analog:
///   sum_t (alpha_t^2 / v_t) ||m_t||^2 <= alpha d (1 + log(T G^2/delta + 1)),
/// again requiring alpha <= 1 for the stated right side.
pub fn adagrad_sum_bound(
    lemma_lhs_total: f64,
    alpha: f64,
    dim: usize,
    delta: f64,
    g_bound: f64,
    horizon: usize,
) -> Result<BoundCheck> {
    if alpha > 1.0 {
        return Err(Error::invalid("bound as stated requires alpha <= 1"));
    }
    if !(delta > 0.0) {
        return Err(Error::invalid("delta must be positive"));
    }
    let rhs = alpha
        * dim as f64
        * (1.0 + (horizon as f64 * g_bound * g_bound / delta + 1.0).ln());
    Ok(BoundCheck::new(lemma_lhs_total, rhs))
}

/// Uniform proximal-distance bound for the weighted path:
/// D_hat^2 = 4 d G^2 / (delta (rho_bar - rho_hat)^2).
pub fn d_hat_weighted(
    dim: usize,
    g_bound: f64,
    delta: f64,
    rho_bar: f64,
    rho_hat: f64,
) -> Result<f64> {
    if !(rho_bar > rho_hat) {
        return Err(Error::invalid("rho_bar must exceed rho_hat"));
    }
    if !(delta > 0.0) {
        return Err(Error::invalid("delta must be positive"));
    }
    Ok(2.0 * (dim as f64).sqrt() * g_bound / (delta.sqrt() * (rho_bar - rho_hat)))
}

/// Euclidean-path counterpart: D_hat = 2 sqrt(d) G / sqrt(rho).
pub fn d_hat_euclidean(dim: usize, g_bound: f64, rho: f64) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::invalid("rho must be positive"));
    }
    Ok(2.0 * (dim as f64).sqrt() * g_bound / rho.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Theorem {
    One,
    Two,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TheoremInputs {
    pub rho: f64,
    pub g_bound: f64,
    pub dim: usize,
    pub delta: f64,
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Envelope value at the first iterate.
    pub phi1: f64,
    pub f_star: f64,
    /// Measured sum_i E vhat_{T+1,i}^{1/2}; None falls back to the d*G
    /// worst case (vhat <= G^2 elementwise).
    pub vhat_sqrt_sum: Option<f64>,
    /// When supplied, validated against the envelope parameter the
    /// formulas assume (2 rho/sqrt(delta) resp. 2 rho).
    pub rho_bar: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TheoremConstants {
    pub theorem: Theorem,
    pub c1: f64,
    pub c2: f64,
    /// C3 with the measured vhat sum (zero for the scalar variant).
    pub c3: f64,
    /// C3 with the d*G worst case, reported alongside.
    pub c3_worst_case: f64,
    pub d_hat: f64,
    alpha: f64,
    g_bound: f64,
    delta: f64,
}

impl TheoremConstants {
    /// Full right-hand side of the bound at horizon T.
    pub fn bound(&self, horizon: usize) -> f64 {
        let t = horizon as f64;
        match self.theorem {
            Theorem::One => {
                2.0 / (self.alpha * t.sqrt())
                    * (self.c1 + (1.0 + t.ln()) * self.c2 + self.c3)
            }
            Theorem::Two => {
                let log_factor =
                    1.0 + (t * self.g_bound * self.g_bound / self.delta + 1.0).ln();
                2.0 * self.g_bound / (self.alpha * t.sqrt())
                    * (self.c1 + log_factor * self.c2)
            }
        }
    }
}

pub fn theorem_constants(theorem: Theorem, inp: &TheoremInputs) -> Result<TheoremConstants> {
    if !(inp.rho > 0.0) {
        return Err(Error::invalid("rho must be positive"));
    }
    if !(inp.delta > 0.0 && inp.delta <= 1.0) {
        return Err(Error::invalid("delta must be in (0, 1]"));
    }
    if !(0.0..1.0).contains(&inp.beta1) {
        return Err(Error::invalid("beta1 must be in [0, 1)"));
    }
    let d = inp.dim as f64;
    let (g, a, b1) = (inp.g_bound, inp.alpha, inp.beta1);
    let b1r = b1 / (1.0 - b1);
    match theorem {
        Theorem::One => {
            let gamma = if inp.beta2 > 0.0 { b1 * b1 / inp.beta2 } else if b1 == 0.0 { 0.0 } else { f64::INFINITY };
            if !(gamma < 1.0) {
                return Err(Error::invalid("beta1^2 / beta2 must be below 1"));
            }
            let expected_rho_bar = 2.0 * inp.rho / inp.delta.sqrt();
            if let Some(rb) = inp.rho_bar {
                if (rb - expected_rho_bar).abs() > 1e-12 * expected_rho_bar.max(1.0) {
                    return Err(Error::invalid("formulas assume rho_bar = 2 rho / sqrt(delta)"));
                }
            }
            let d_hat = 2.0 * d.sqrt() * g / inp.rho;
            let c1 = 4.0 * inp.rho * b1 * a / (inp.delta.sqrt() * (1.0 - b1)) * d.sqrt() * d_hat * g
                + inp.phi1
                - inp.f_star;
            let c2 = 5.0 * inp.rho / inp.delta * d * g * g
                + 2.0 * inp.rho / inp.delta.sqrt()
                    * (1.0 + g / inp.delta.sqrt() + b1r + 2.0 * b1r * b1r)
                    * (1.0 - b1)
                    / ((1.0 - inp.beta2) * (1.0 - gamma)).sqrt()
                    * d
                    * g;
            let c3_of = |vhat_sum: f64| 2.0 * inp.rho / inp.delta.sqrt() * d_hat * d_hat * vhat_sum;
            let c3_worst_case = c3_of(d * g);
            let c3 = inp.vhat_sqrt_sum.map(c3_of).unwrap_or(c3_worst_case);
            Ok(TheoremConstants {
                theorem,
                c1,
                c2,
                c3,
                c3_worst_case,
                d_hat,
                alpha: a,
                g_bound: g,
                delta: inp.delta,
            })
        }
        Theorem::Two => {
            if let Some(rb) = inp.rho_bar {
                let expected = 2.0 * inp.rho;
                if (rb - expected).abs() > 1e-12 * expected.max(1.0) {
                    return Err(Error::invalid("formulas assume rho_bar = 2 rho"));
                }
            }
            let d_hat = 2.0 * d.sqrt() * g / inp.rho.sqrt();
            let c1 = inp.phi1 - inp.f_star
                + 2.0 * inp.rho * (2.0 * b1r + 1.0) * a * d_hat * d.sqrt() * g / inp.delta.sqrt();
            let c2 = 2.0 * inp.rho * a * d * (0.5 + b1r + 2.0 * b1r * b1r);
            Ok(TheoremConstants {
                theorem,
                c1,
                c2,
                c3: 0.0,
                c3_worst_case: 0.0,
                d_hat,
                alpha: a,
                g_bound: g,
                delta: inp.delta,
            })
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TheoremCheck {
    pub measured: f64,
    pub bound: f64,
    pub holds: bool,
    pub seeds_used: usize,
    pub seeds_excluded: usize,
}

/// Seed-averaged stationarity at the output iterate against the theorem
/// bound. `per_seed` holds moreau_grad_sq at x_{t*}; `None` marks a seed
/// whose inner solve failed (excluded).
pub fn theorem_bound_check(
    per_seed: &[Option<f64>],
    constants: &TheoremConstants,
    horizon: usize,
) -> Result<TheoremCheck> {
    if per_seed.len() < 20 {
        return Err(Error::invalid("need at least 20 seeds"));
    }
    let valid: Vec<f64> = per_seed.iter().flatten().copied().collect();
    if valid.len() < 10 {
        return Err(Error::invalid("fewer than 10 seeds produced valid reports"));
    }
    let measured = valid.iter().sum::<f64>() / valid.len() as f64;
    let bound = constants.bound(horizon);
    Ok(TheoremCheck {
        measured,
        bound,
        holds: measured <= bound,
        seeds_used: valid.len(),
        seeds_excluded: per_seed.len() - valid.len(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

/// Least squares on (log t, log y) after replacing y with its running
/// minimum (single-draw stationarity values are noisy; the minimum curve
/// decays with the same exponent). Nonpositive values are dropped.
pub fn rate_fit(points: &[(f64, f64)], min_points: usize) -> Result<RateFit> {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut running = f64::INFINITY;
    let mut logs = Vec::with_capacity(sorted.len());
    for (t, y) in sorted {
        if !(t > 0.0) || !y.is_finite() {
            return Err(Error::invalid("checkpoints must have positive t and finite y"));
        }
        if y > 0.0 {
            running = running.min(y);
        }
        if running.is_finite() && running > 0.0 {
            logs.push((t.ln(), running.ln()));
        }
    }
    let n = logs.len();
    if n < min_points.max(2) {
        return Err(Error::invalid(format!(
            "rate fit needs at least {} usable points, got {}",
            min_points.max(2),
            n
        )));
    }
    let nf = n as f64;
    let mean_x = logs.iter().map(|p| p.0).sum::<f64>() / nf;
    let mean_y = logs.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("all checkpoints share the same t"));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_tot: f64 = logs.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let ss_res: f64 = logs
        .iter()
        .map(|p| (p.1 - (intercept + slope * p.0)).powi(2))
        .sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(RateFit { slope, intercept, r_squared, n_points: n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizers::Variant;
    use crate::rng::RngStream;
    use approx::assert_abs_diff_eq;

    fn random_seq(rng: &mut RngStream, len: usize, d: usize, scale: f64) -> Vec<Vec<f64>> {
        (0..len)
            .map(|_| (0..d).map(|_| rng.gen_range(-scale..scale)).collect())
            .collect()
    }

    #[test]
    fn momentum_identity_beta1_zero() {
        let mut rng = RngStream::check(11);
        let a = random_seq(&mut rng, 50, 4, 1.0);
        let g = random_seq(&mut rng, 50, 4, 1.0);
        let r = momentum_decomposition_check(&a, &g, 0.0).unwrap();
        assert!(r <= 1e-14, "residual {r}");
    }

    #[test]
    fn momentum_identity_random() {
        let mut rng = RngStream::check(12);
        for &b1 in &[0.0, 0.5, 0.9, 0.99] {
            let a = random_seq(&mut rng, 100, 8, 3.0);
            let g = random_seq(&mut rng, 100, 8, 3.0);
            let r = momentum_decomposition_check(&a, &g, b1).unwrap();
            assert!(r <= 1e-10 * 9.0, "beta1={b1}, residual {r}");
        }
    }

    #[test]
    fn momentum_identity_constant_a() {
        let mut rng = RngStream::check(13);
        let a = vec![vec![1.0, -2.0, 0.5]; 60];
        let g = random_seq(&mut rng, 60, 3, 1.0);
        let r = momentum_decomposition_check(&a, &g, 0.9).unwrap();
        assert!(r <= 1e-12, "residual {r}");
    }

    #[test]
    fn momentum_identity_rejects_bad_beta() {
        let a = vec![vec![1.0]];
        assert!(momentum_decomposition_check(&a, &a, 1.0).is_err());
    }

    #[test]
    fn lemma4_single_step() {
        // T=1, beta1=0: lhs = alpha^2 ||g_1||^2_{vhat^{-1/2}} with
        // vhat_1 = max(delta, (1-beta2) g^2) elementwise.
        let cfg = OptimizerConfig {
            variant: Variant::AmsGrad,
            alpha: 0.1,
            beta1: 0.0,
            beta2: 0.999,
            delta: 1.0,
        };
        let (d, g_bound) = (10, 1.0);
        let g = vec![1.0; d];
        let lhs: f64 = g
            .iter()
            .map(|gi| {
                let vhat = cfg.delta.max((1.0 - cfg.beta2) * gi * gi);
                cfg.alpha * cfg.alpha * gi * gi / vhat.sqrt()
            })
            .sum();
        let check = lemma4_bound(lhs, &cfg, g_bound, d, 1).unwrap();
        assert!(check.holds, "lhs {} rhs {}", check.lhs, check.rhs);
        assert_abs_diff_eq!(
            check.rhs,
            d as f64 * g_bound / (1.0 - cfg.beta2).sqrt(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn lemma4_zero_gradients() {
        let cfg = OptimizerConfig::lemma_preset(Variant::AmsGrad);
        let check = lemma4_bound(0.0, &cfg, 1.0, 5, 100).unwrap();
        assert!(check.holds);
        assert_eq!(check.lhs, 0.0);
    }

    #[test]
    fn lemma4_rejects_bad_gamma() {
        let cfg = OptimizerConfig {
            variant: Variant::AmsGrad,
            alpha: 0.1,
            beta1: 0.99,
            beta2: 0.5,
            delta: 1.0,
        };
        assert!(lemma4_bound(0.0, &cfg, 1.0, 5, 100).is_err());
    }

    #[test]
    fn adagrad_single_step() {
        // d=1, T=1, beta1=0, g_1 = G: v_1 = delta + G^2,
        // lhs = alpha^2 G^2 / (delta + G^2).
        let (alpha, delta, g) = (0.1, 1.0, 2.0);
        let lhs = alpha * alpha * g * g / (delta + g * g);
        let check = adagrad_sum_bound(lhs, alpha, 1, delta, g, 1).unwrap();
        assert!(check.holds);
        assert_abs_diff_eq!(
            check.rhs,
            alpha * (1.0 + (g * g / delta + 1.0_f64).ln()),
            epsilon = 1e-12
        );
    }

    fn sample_inputs() -> TheoremInputs {
        TheoremInputs {
            rho: 2.0,
            g_bound: 1.0,
            dim: 2,
            delta: 1.0,
            alpha: 0.1,
            beta1: 0.9,
            beta2: 0.999,
            phi1: 3.0,
            f_star: 0.0,
            vhat_sqrt_sum: None,
            rho_bar: None,
        }
    }

    #[test]
    fn constants_beta1_zero_collapse() {
        let inp = TheoremInputs { beta1: 0.0, ..sample_inputs() };
        let c = theorem_constants(Theorem::One, &inp).unwrap();
        assert_abs_diff_eq!(c.c1, inp.phi1 - inp.f_star, epsilon = 1e-15);
    }

    #[test]
    fn constants_worst_case_c3() {
        let inp = sample_inputs();
        let c = theorem_constants(Theorem::One, &inp).unwrap();
        let d_hat = 2.0 * 2.0_f64.sqrt() * 1.0 / 2.0;
        assert_abs_diff_eq!(c.d_hat, d_hat, epsilon = 1e-15);
        assert_abs_diff_eq!(
            c.c3_worst_case,
            2.0 * 2.0 / 1.0 * d_hat * d_hat * 2.0 * 1.0,
            epsilon = 1e-12
        );
        assert_eq!(c.c3, c.c3_worst_case);
    }

    #[test]
    fn constants_independent_reevaluation() {
        // Direct transcription of the stated formulas with different
        // grouping, as an independent numeric oracle.
        let inp = sample_inputs();
        let c = theorem_constants(Theorem::One, &inp).unwrap();
        let (rho, g, d, delta, alpha, b1, b2) =
            (2.0f64, 1.0f64, 2.0f64, 1.0f64, 0.1f64, 0.9f64, 0.999f64);
        let gamma = b1 * b1 / b2;
        let d_hat = 2.0 * d.sqrt() * g / rho;
        let c1 = (4.0 * rho * b1 * alpha) / (delta.sqrt() * (1.0 - b1)) * (d.sqrt() * d_hat * g)
            + (3.0 - 0.0);
        let c2 = (5.0 * rho / delta) * (d * g * g)
            + (2.0 * rho / delta.sqrt())
                * (1.0 + g / delta.sqrt() + b1 / (1.0 - b1)
                    + 2.0 * b1 * b1 / ((1.0 - b1) * (1.0 - b1)))
                * ((1.0 - b1) / ((1.0 - b2) * (1.0 - gamma)).sqrt())
                * (d * g);
        assert_abs_diff_eq!(c.c1, c1, epsilon = 1e-10 * c1.abs());
        assert_abs_diff_eq!(c.c2, c2, epsilon = 1e-10 * c2.abs());
        let t = 10_000;
        let bound = 2.0 / (alpha * (t as f64).sqrt())
            * (c1 + (1.0 + (t as f64).ln()) * c2 + c.c3_worst_case);
        assert_abs_diff_eq!(c.bound(t), bound, epsilon = 1e-10 * bound);
    }

    #[test]
    fn constants_theorem2_reevaluation() {
        let inp = TheoremInputs { rho_bar: Some(4.0), ..sample_inputs() };
        let c = theorem_constants(Theorem::Two, &inp).unwrap();
        let (rho, g, d, delta, alpha, b1) = (2.0f64, 1.0f64, 2.0f64, 1.0f64, 0.1f64, 0.9f64);
        let d_hat = 2.0 * d.sqrt() * g / rho.sqrt();
        let c1 = (3.0 - 0.0)
            + 2.0 * rho * (2.0 * b1 / (1.0 - b1) + 1.0) * (alpha * d_hat * d.sqrt() * g)
                / delta.sqrt();
        let c2 = 2.0 * rho * alpha * d
            * (0.5 + b1 / (1.0 - b1) + 2.0 * b1 * b1 / ((1.0 - b1) * (1.0 - b1)));
        assert_abs_diff_eq!(c.c1, c1, epsilon = 1e-10 * c1.abs());
        assert_abs_diff_eq!(c.c2, c2, epsilon = 1e-10 * c2.abs());
        let t = 400;
        let bound = 2.0 * g / (alpha * (t as f64).sqrt())
            * (c1 + (1.0 + ((t as f64) * g * g / delta + 1.0).ln()) * c2);
        assert_abs_diff_eq!(c.bound(t), bound, epsilon = 1e-10 * bound);
    }

    #[test]
    fn constants_reject_mismatched_rho_bar() {
        let inp = TheoremInputs { rho_bar: Some(1.0), ..sample_inputs() };
        assert!(theorem_constants(Theorem::One, &inp).is_err());
        assert!(theorem_constants(Theorem::Two, &inp).is_err());
    }

    #[test]
    fn constants_nonnegative_across_configs() {
        for &b1 in &[0.0, 0.5, 0.9] {
            for &delta in &[1e-4, 0.1, 1.0] {
                let inp = TheoremInputs { beta1: b1, delta, phi1: 5.0, ..sample_inputs() };
                let c = theorem_constants(Theorem::One, &inp).unwrap();
                assert!(c.c1 >= 0.0 && c.c2 >= 0.0 && c.c3 >= 0.0);
            }
        }
    }

    #[test]
    fn bound_check_protocol() {
        let c = theorem_constants(Theorem::One, &sample_inputs()).unwrap();
        let seeds: Vec<Option<f64>> = vec![Some(0.0); 20];
        let check = theorem_bound_check(&seeds, &c, 100).unwrap();
        assert!(check.holds);
        assert_eq!(check.measured, 0.0);

        assert!(theorem_bound_check(&vec![Some(0.0); 19], &c, 100).is_err());
        let mut mostly_failed = vec![None; 11];
        mostly_failed.extend(vec![Some(0.0); 9]);
        assert!(theorem_bound_check(&mostly_failed, &c, 100).is_err());
    }

    #[test]
    fn rate_fit_exact_power_law() {
        let pts: Vec<(f64, f64)> = (1..=6)
            .map(|k| {
                let t = 10f64.powi(k);
                (t, 7.0 * t.powf(-0.5))
            })
            .collect();
        let fit = rate_fit(&pts, 5).unwrap();
        assert_abs_diff_eq!(fit.slope, -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.r_squared, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.intercept, 7.0f64.ln(), epsilon = 1e-10);
    }

    #[test]
    fn rate_fit_log_corrected_curve() {
        // y = c t^{-1/2} (1 + log t) over t in [1e2, 1e5] fits shallower
        // than -1/2 but clearly negative.
        let pts: Vec<(f64, f64)> = (0..=30)
            .map(|k| {
                let t = 100.0 * 10f64.powf(k as f64 / 10.0);
                (t, 0.3 * t.powf(-0.5) * (1.0 + t.ln()))
            })
            .collect();
        let fit = rate_fit(&pts, 5).unwrap();
        assert!(fit.slope > -0.5 && fit.slope < -0.3, "slope {}", fit.slope);
    }

    #[test]
    fn rate_fit_constant_is_flat() {
        let pts: Vec<(f64, f64)> = (1..=8).map(|k| (k as f64 * 10.0, 2.5)).collect();
        let fit = rate_fit(&pts, 5).unwrap();
        assert_abs_diff_eq!(fit.slope, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn rate_fit_scale_equivariant() {
        let mut rng = RngStream::check(14);
        let pts: Vec<(f64, f64)> = (1..=12)
            .map(|k| {
                let t = 2f64.powi(k);
                (t, t.powf(-0.4) * rng.gen_range(0.5..1.5))
            })
            .collect();
        let scaled: Vec<(f64, f64)> = pts.iter().map(|&(t, y)| (t, 37.0 * y)).collect();
        let a = rate_fit(&pts, 5).unwrap();
        let b = rate_fit(&scaled, 5).unwrap();
        assert_abs_diff_eq!(a.slope, b.slope, epsilon = 1e-12);
        assert_abs_diff_eq!(b.intercept - a.intercept, 37.0f64.ln(), epsilon = 1e-10);
    }

    #[test]
    fn rate_fit_filters_nonpositive() {
        let pts = vec![(1.0, -1.0), (2.0, 0.0), (4.0, 1.0), (8.0, 0.5)];
        assert!(rate_fit(&pts, 5).is_err());
        let fit = rate_fit(&pts, 2).unwrap();
        assert_eq!(fit.n_points, 2);
    }
}
