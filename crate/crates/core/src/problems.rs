//! Finite-sum stochastic weakly convex test problems.
//!
//! Each problem has a finite dataset as the support of the sampling
//! distribution, so the population objective and the exact average
//! subgradient are computable as finite sums. Constants (weak convexity
//! rho, subgradient bound G) are derived from the realized dataset.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{project_weighted, ConvexSet, Point, Weights};
use crate::linalg;
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    /// f(x; (a,b)) = |<a,x> - b|, convex and nonsmooth.
    RobustRegression,
    /// f(x; (a,b)) = |<a,x>^2 - b|, weakly convex and nonsmooth.
    PhaseRetrieval,
    /// f(x) = (1/2N) sum (<a_s,x> - b_s)^2, smooth.
    ConstrainedQuadratic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub a: Vec<f64>,
    pub b: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub kind: ProblemKind,
    pub dim: usize,
    pub samples: Vec<Sample>,
    pub set: ConvexSet,
    /// Weak convexity constant of f w.r.t. the Euclidean norm.
    pub rho: f64,
    /// Uniform bound on the infinity norm of stochastic subgradients over
    /// the operating region.
    pub g_bound: f64,
    /// Lower bound on f over the feasible set.
    pub f_star: f64,
    /// Smoothness constant; present for the quadratic kind only.
    pub l_smooth: Option<f64>,
    /// Radius of the ball on which `g_bound` is valid; iterates must stay
    /// inside it.
    pub region_radius: f64,
    /// Planted feasible point used to generate the targets.
    pub x_planted: Vec<f64>,
}

/// Builds a problem with features uniform on [-1,1] and targets generated
/// from a planted feasible point plus bounded uniform noise on [-0.1, 0.1].
pub fn make_problem(
    kind: ProblemKind,
    dim: usize,
    n_samples: usize,
    set: ConvexSet,
    rng_seed: u64,
) -> Result<ProblemInstance> {
    if dim == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    if n_samples == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    if set.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: set.dim(),
        });
    }
    let mut rng = RngStream::problem(rng_seed);
    let raw: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let x_planted = project_weighted(&set, &Weights::ones(dim), &raw)?;

    let mut samples = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let a: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let noise = rng.gen_range(-0.1..0.1);
        let pred = linalg::dot(&a, &x_planted);
        let b = match kind {
            ProblemKind::RobustRegression | ProblemKind::ConstrainedQuadratic => pred + noise,
            ProblemKind::PhaseRetrieval => pred * pred + noise,
        };
        samples.push(Sample { a, b });
    }

    // Operating region: for bounded sets every iterate is feasible, so the
    // set's own norm radius is the exact region. Unbounded sets fall back
    // to a ball around the planted point, asserted at runtime.
    let region_radius = set
        .norm_radius()
        .unwrap_or_else(|| 4.0 * (linalg::norm(&x_planted) + 1.0));

    let (rho, g_bound, l_smooth) = match kind {
        ProblemKind::RobustRegression => {
            let g = samples.iter().map(|s| linalg::inf_norm(&s.a)).fold(0.0, f64::max);
            (0.0, g, None)
        }
        ProblemKind::PhaseRetrieval => {
            let rho = samples
                .iter()
                .map(|s| 2.0 * linalg::norm_sq(&s.a))
                .fold(0.0, f64::max);
            let g = samples
                .iter()
                .map(|s| 2.0 * linalg::norm(&s.a) * region_radius * linalg::inf_norm(&s.a))
                .fold(0.0, f64::max);
            (rho, g, None)
        }
        ProblemKind::ConstrainedQuadratic => {
            let l = gram_top_eigenvalue(&samples, dim);
            let g = samples
                .iter()
                .map(|s| linalg::inf_norm(&s.a) * (linalg::norm(&s.a) * region_radius + s.b.abs()))
                .fold(0.0, f64::max);
            (l, g, Some(l))
        }
    };

    // Any constant dominating the true subgradient bound is admissible;
    // flooring at 1 keeps delta in (0, 1] compatible with vhat <= G^2.
    let g_bound = g_bound.max(1.0);

    Ok(ProblemInstance {
        kind,
        dim,
        samples,
        set,
        rho,
        g_bound,
        f_star: 0.0,
        l_smooth,
        region_radius,
        x_planted,
    })
}

/// Largest eigenvalue of the averaged Gram matrix (1/N) sum a a^T via
/// power iteration.
fn gram_top_eigenvalue(samples: &[Sample], dim: usize) -> f64 {
    let n = samples.len() as f64;
    let apply = |v: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for s in samples {
            let c = linalg::dot(&s.a, v) / n;
            for i in 0..dim {
                out[i] += c * s.a[i];
            }
        }
        out
    };
    let mut v = vec![1.0 / (dim as f64).sqrt(); dim];
    let mut lambda = 0.0;
    for _ in 0..10_000 {
        let av = apply(&v);
        let norm = linalg::norm(&av);
        if norm == 0.0 {
            return 0.0;
        }
        let next: Vec<f64> = av.iter().map(|x| x / norm).collect();
        let new_lambda = linalg::dot(&next, &apply(&next));
        let done = (new_lambda - lambda).abs() <= 1e-10 * new_lambda.abs().max(1.0);
        v = next;
        lambda = new_lambda;
        if done {
            break;
        }
    }
    lambda
}

impl ProblemInstance {
    /// Uniform draw from the finite dataset.
    pub fn sample<'a>(&'a self, rng: &mut RngStream) -> &'a Sample {
        &self.samples[rng.gen_range(0..self.samples.len())]
    }

    pub fn per_sample_loss(&self, x: &[f64], s: &Sample) -> f64 {
        let pred = linalg::dot(&s.a, x);
        match self.kind {
            ProblemKind::RobustRegression => (pred - s.b).abs(),
            ProblemKind::PhaseRetrieval => (pred * pred - s.b).abs(),
            ProblemKind::ConstrainedQuadratic => 0.5 * (pred - s.b) * (pred - s.b),
        }
    }

    /// One element of the regular subdifferential of f(.; s) at x, with
    /// sign(0) := 0 at kinks.
    pub fn stoch_subgrad(&self, x: &[f64], s: &Sample) -> Result<Point> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let pred = linalg::dot(&s.a, x);
        let coeff = match self.kind {
            ProblemKind::RobustRegression => sign0(pred - s.b),
            ProblemKind::PhaseRetrieval => sign0(pred * pred - s.b) * 2.0 * pred,
            ProblemKind::ConstrainedQuadratic => pred - s.b,
        };
        let g: Point = s.a.iter().map(|ai| coeff * ai).collect();
        debug_assert!(
            linalg::norm(x) > self.region_radius + 1e-9
                || linalg::inf_norm(&g) <= self.g_bound * (1.0 + 1e-12),
            "subgradient bound violated inside operating region"
        );
        Ok(g)
    }

    /// Exact dataset average of the per-sample losses.
    pub fn full_objective(&self, x: &[f64]) -> f64 {
        let n = self.samples.len() as f64;
        self.samples.iter().map(|s| self.per_sample_loss(x, s)).sum::<f64>() / n
    }

    /// Exact dataset average of the chosen stochastic subgradients.
    pub fn full_subgrad(&self, x: &[f64]) -> Result<Point> {
        let n = self.samples.len() as f64;
        let mut out = vec![0.0; self.dim];
        for s in &self.samples {
            let g = self.stoch_subgrad(x, s)?;
            for i in 0..self.dim {
                out[i] += g[i] / n;
            }
        }
        Ok(out)
    }
}

fn sign0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WeakConvexityCheck {
    pub pass: bool,
    pub worst_violation: f64,
}

/// Samples random segments in the ball of `region_radius` and checks the
/// convexity inequality for h = full_objective + (rho/2)||.||^2.
pub fn check_weak_convexity(
    problem: &ProblemInstance,
    rho_claimed: f64,
    trials: usize,
    region_radius: f64,
    rng_seed: u64,
) -> Result<WeakConvexityCheck> {
    if trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    let mut rng = RngStream::check(rng_seed);
    let d = problem.dim;
    let h = |x: &[f64]| problem.full_objective(x) + 0.5 * rho_claimed * linalg::norm_sq(x);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..trials {
        let x = random_in_ball(&mut rng, d, region_radius);
        let y = random_in_ball(&mut rng, d, region_radius);
        let lam: f64 = rng.gen_range(0.0..1.0);
        let mid: Vec<f64> = x
            .iter()
            .zip(&y)
            .map(|(xi, yi)| lam * xi + (1.0 - lam) * yi)
            .collect();
        let violation = h(&mid) - (lam * h(&x) + (1.0 - lam) * h(&y));
        worst = worst.max(violation);
    }
    Ok(WeakConvexityCheck {
        pass: worst <= 1e-9,
        worst_violation: worst,
    })
}

fn random_in_ball(rng: &mut RngStream, dim: usize, radius: f64) -> Vec<f64> {
    loop {
        let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if linalg::norm_sq(&x) <= 1.0 {
            return x.iter().map(|xi| xi * radius).collect();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn abs_value_problem() -> ProblemInstance {
        // f(x) = |x| on R, built by hand so constants are exact.
        ProblemInstance {
            kind: ProblemKind::RobustRegression,
            dim: 1,
            samples: vec![Sample { a: vec![1.0], b: 0.0 }],
            set: ConvexSet::free(1),
            rho: 0.0,
            g_bound: 1.0,
            f_star: 0.0,
            l_smooth: None,
            region_radius: 10.0,
            x_planted: vec![0.0],
        }
    }

    fn phase_1d() -> ProblemInstance {
        // f(x) = |x^2 - 1|.
        ProblemInstance {
            kind: ProblemKind::PhaseRetrieval,
            dim: 1,
            samples: vec![Sample { a: vec![1.0], b: 1.0 }],
            set: ConvexSet::free(1),
            rho: 2.0,
            g_bound: 20.0,
            f_star: 0.0,
            l_smooth: None,
            region_radius: 10.0,
            x_planted: vec![1.0],
        }
    }

    #[test]
    fn single_abs_sample_constants() {
        let p = abs_value_problem();
        assert_eq!(p.full_objective(&[2.0]), 2.0);
        assert_eq!(p.full_objective(&[-0.5]), 0.5);
        assert_eq!(p.rho, 0.0);
        assert_eq!(p.f_star, 0.0);
    }

    #[test]
    fn robust_regression_subgradients() {
        let p = ProblemInstance {
            kind: ProblemKind::RobustRegression,
            dim: 2,
            samples: vec![Sample { a: vec![1.0, 0.0], b: 0.0 }],
            set: ConvexSet::free(2),
            rho: 0.0,
            g_bound: 1.0,
            f_star: 0.0,
            l_smooth: None,
            region_radius: 100.0,
            x_planted: vec![0.0, 0.0],
        };
        let s = p.samples[0].clone();
        assert_eq!(p.stoch_subgrad(&[2.0, 5.0], &s).unwrap(), vec![1.0, 0.0]);
        // Residual exactly zero: the chosen subgradient at the kink is 0.
        assert_eq!(p.stoch_subgrad(&[0.0, 7.0], &s).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn phase_retrieval_chain_rule() {
        let p = phase_1d();
        let s = p.samples[0].clone();
        // sign(4 - 1) * 2 * 2 * 1 = 4
        assert_eq!(p.stoch_subgrad(&[2.0], &s).unwrap(), vec![4.0]);
    }

    #[test]
    fn full_objective_symmetry() {
        let p = ProblemInstance {
            kind: ProblemKind::RobustRegression,
            dim: 1,
            samples: vec![
                Sample { a: vec![1.0], b: 1.0 },
                Sample { a: vec![1.0], b: -1.0 },
            ],
            set: ConvexSet::free(1),
            rho: 0.0,
            g_bound: 1.0,
            f_star: 0.0,
            l_smooth: None,
            region_radius: 10.0,
            x_planted: vec![0.0],
        };
        assert_eq!(p.full_objective(&[0.0]), 1.0);
        assert_eq!(p.full_subgrad(&[0.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn full_subgrad_matches_direct_average() {
        let set = ConvexSet::boxed(vec![-1.0; 3], vec![1.0; 3]).unwrap();
        let p = make_problem(ProblemKind::PhaseRetrieval, 3, 7, set, 11).unwrap();
        let x = [0.3, -0.2, 0.9];
        let full = p.full_subgrad(&x).unwrap();
        let mut avg = vec![0.0; 3];
        for s in &p.samples {
            let g = p.stoch_subgrad(&x, s).unwrap();
            for i in 0..3 {
                avg[i] += g[i] / p.samples.len() as f64;
            }
        }
        for i in 0..3 {
            assert_abs_diff_eq!(full[i], avg[i], epsilon = 1e-14);
        }
    }

    #[test]
    fn sampler_is_deterministic_and_uniform() {
        let set = ConvexSet::boxed(vec![-1.0; 2], vec![1.0; 2]).unwrap();
        let p = make_problem(ProblemKind::RobustRegression, 2, 4, set, 3).unwrap();
        let mut r1 = RngStream::sampling(42);
        let mut r2 = RngStream::sampling(42);
        for _ in 0..100 {
            assert_eq!(p.sample(&mut r1), p.sample(&mut r2));
        }
        let mut counts = [0usize; 4];
        let mut rng = RngStream::sampling(7);
        let draws = 1_000_000;
        for _ in 0..draws {
            let s = p.sample(&mut rng);
            let idx = p.samples.iter().position(|t| t == s).unwrap();
            counts[idx] += 1;
        }
        for c in counts {
            let freq = c as f64 / draws as f64;
            assert!((0.24..=0.26).contains(&freq), "frequency {freq}");
        }
    }

    #[test]
    fn singleton_dataset_always_returned() {
        let p = abs_value_problem();
        let mut rng = RngStream::sampling(0);
        for _ in 0..10 {
            assert_eq!(p.sample(&mut rng), &p.samples[0]);
        }
    }

    #[test]
    fn weak_convexity_of_phase_1d() {
        let p = phase_1d();
        // Midpoint convexity of |x^2-1| + ||x||^2 over [-3,3].
        let check = check_weak_convexity(&p, 2.0, 10_000, 3.0, 5).unwrap();
        assert!(check.pass, "violation {}", check.worst_violation);
        // With rho = 0 claimed the same function fails: at x=-1, y=1,
        // lambda=1/2 we get h(0)=1 > 0.
        let bad = check_weak_convexity(&p, 0.0, 10_000, 3.0, 5).unwrap();
        assert!(!bad.pass);
        assert!(bad.worst_violation > 0.5);
    }

    #[test]
    fn robust_regression_is_convex() {
        let set = ConvexSet::boxed(vec![-1.0; 4], vec![1.0; 4]).unwrap();
        let p = make_problem(ProblemKind::RobustRegression, 4, 10, set, 9).unwrap();
        let check = check_weak_convexity(&p, 0.0, 2_000, 2.0, 1).unwrap();
        assert!(check.pass);
    }

    #[test]
    fn quadratic_identity_rows() {
        let p = ProblemInstance {
            kind: ProblemKind::ConstrainedQuadratic,
            dim: 2,
            samples: vec![
                Sample { a: vec![1.0, 0.0], b: 0.0 },
                Sample { a: vec![0.0, 1.0], b: 0.0 },
            ],
            set: ConvexSet::free(2),
            rho: 0.5,
            g_bound: 10.0,
            f_star: 0.0,
            l_smooth: Some(0.5),
            region_radius: 5.0,
            x_planted: vec![0.0, 0.0],
        };
        // Averaged Gram matrix is I/2.
        assert_abs_diff_eq!(gram_top_eigenvalue(&p.samples, 2), 0.5, epsilon = 1e-9);
        assert_eq!(p.full_objective(&[0.0, 0.0]), 0.0);
    }

    #[test]
    fn quadratic_is_l_smooth() {
        let set = ConvexSet::boxed(vec![-1.0; 3], vec![1.0; 3]).unwrap();
        let p = make_problem(ProblemKind::ConstrainedQuadratic, 3, 12, set, 21).unwrap();
        let l = p.l_smooth.unwrap();
        let mut rng = RngStream::check(13);
        for _ in 0..200 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let gx = p.full_subgrad(&x).unwrap();
            let gy = p.full_subgrad(&y).unwrap();
            let lhs = linalg::norm(&linalg::sub(&gx, &gy));
            let rhs = l * linalg::norm(&linalg::sub(&x, &y)) + 1e-9;
            assert!(lhs <= rhs, "lhs {lhs} rhs {rhs}");
        }
    }

    #[test]
    fn objective_lower_bounded_and_subgrads_bounded() {
        let set = ConvexSet::ball(vec![0.0; 3], 1.5).unwrap();
        for kind in [
            ProblemKind::RobustRegression,
            ProblemKind::PhaseRetrieval,
            ProblemKind::ConstrainedQuadratic,
        ] {
            let p = make_problem(kind, 3, 20, set.clone(), 77).unwrap();
            let mut rng = RngStream::check(3);
            for _ in 0..500 {
                let x = super::random_in_ball(&mut rng, 3, 1.5);
                assert!(p.full_objective(&x) >= p.f_star);
                for s in &p.samples {
                    let g = p.stoch_subgrad(&x, s).unwrap();
                    assert!(linalg::inf_norm(&g) <= p.g_bound * (1.0 + 1e-12));
                }
            }
        }
    }

    #[test]
    fn make_problem_rejects_bad_inputs() {
        assert!(make_problem(ProblemKind::RobustRegression, 0, 5, ConvexSet::free(0), 0).is_err());
        assert!(make_problem(ProblemKind::RobustRegression, 2, 0, ConvexSet::free(2), 0).is_err());
        assert!(make_problem(ProblemKind::RobustRegression, 2, 5, ConvexSet::free(3), 0).is_err());
    }
}
