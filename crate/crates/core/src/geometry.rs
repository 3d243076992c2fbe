//! Weighted norms and exact weighted projections onto the feasible sets
//! used by the problem zoo.
//!
//! The projection minimizes the diag(w)-weighted squared distance. Boxes
//! separate coordinatewise; balls and simplices are solved by bisection on
//! the scalar KKT multiplier.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

pub type Point = Vec<f64>;

/// Strictly positive diagonal metric vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weights(Vec<f64>);

impl Weights {
    pub fn new(v: Vec<f64>) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::invalid("weights must be nonempty"));
        }
        if v.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
            return Err(Error::invalid("weights must be strictly positive and finite"));
        }
        Ok(Weights(v))
    }

    pub fn ones(dim: usize) -> Self {
        Weights(vec![1.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn min(&self) -> f64 {
        self.0.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().cloned().fold(0.0, f64::max)
    }

    /// Elementwise square root, e.g. to turn a raw second-moment vector
    /// into projection weights.
    pub fn sqrt(&self) -> Weights {
        Weights(self.0.iter().map(|x| x.sqrt()).collect())
    }
}

/// Closed convex feasible sets with exactly solvable weighted projections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ConvexSet {
    FreeSpace { dim: usize },
    Box { lower: Vec<f64>, upper: Vec<f64> },
    EuclideanBall { center: Vec<f64>, radius: f64 },
    Simplex { dim: usize, scale: f64 },
}

/// Unbounded box coordinates are stored as this sentinel; clipping against
/// it is a no-op.
pub const BOX_UNBOUNDED: f64 = f64::MAX;

const MULTIPLIER_TOL: f64 = 1e-12;
const BISECT_MAX_ITERS: usize = 200;

impl ConvexSet {
    /// Full space in `dim` dimensions.
    pub fn free(dim: usize) -> Self {
        ConvexSet::FreeSpace { dim }
    }

    /// Box with the given bounds; infinite entries are replaced by the
    /// finite sentinel.
    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        let lower: Vec<f64> = lower
            .into_iter()
            .map(|x| if x == f64::NEG_INFINITY { -BOX_UNBOUNDED } else { x })
            .collect();
        let upper: Vec<f64> = upper
            .into_iter()
            .map(|x| if x == f64::INFINITY { BOX_UNBOUNDED } else { x })
            .collect();
        if lower.iter().zip(&upper).any(|(l, u)| l > u) {
            return Err(Error::invalid("box lower bound exceeds upper bound"));
        }
        Ok(ConvexSet::Box { lower, upper })
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::invalid("ball radius must be positive"));
        }
        Ok(ConvexSet::EuclideanBall { center, radius })
    }

    pub fn simplex(dim: usize, scale: f64) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(Error::invalid("simplex scale must be positive"));
        }
        Ok(ConvexSet::Simplex { dim, scale })
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexSet::FreeSpace { dim } => *dim,
            ConvexSet::Box { lower, .. } => lower.len(),
            ConvexSet::EuclideanBall { center, .. } => center.len(),
            ConvexSet::Simplex { dim, .. } => *dim,
        }
    }

    /// Membership test with an absolute tolerance per constraint.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        match self {
            ConvexSet::FreeSpace { .. } => true,
            ConvexSet::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(xi, (l, u))| *xi >= l - tol && *xi <= u + tol),
            ConvexSet::EuclideanBall { center, radius } => {
                linalg::dist_sq(x, center).sqrt() <= radius + tol
            }
            ConvexSet::Simplex { scale, .. } => {
                x.iter().all(|xi| *xi >= -tol)
                    && (x.iter().sum::<f64>() - scale).abs() <= tol * x.len() as f64
            }
        }
    }

    /// Supremum of the Euclidean norm over the set, if the set is bounded.
    pub fn norm_radius(&self) -> Option<f64> {
        match self {
            ConvexSet::FreeSpace { .. } => None,
            ConvexSet::Box { lower, upper } => {
                let mut sq = 0.0;
                for (l, u) in lower.iter().zip(upper) {
                    if l.abs() >= BOX_UNBOUNDED / 2.0 || u.abs() >= BOX_UNBOUNDED / 2.0 {
                        return None;
                    }
                    sq += l.abs().max(u.abs()).powi(2);
                }
                Some(sq.sqrt())
            }
            ConvexSet::EuclideanBall { center, radius } => Some(linalg::norm(center) + radius),
            ConvexSet::Simplex { scale, .. } => Some(*scale),
        }
    }
}

/// Squared weighted norm `sum_i w_i x_i^2`.
pub fn weighted_norm_sq(x: &[f64], w: &Weights) -> Result<f64> {
    if x.len() != w.dim() {
        return Err(Error::DimensionMismatch {
            expected: w.dim(),
            got: x.len(),
        });
    }
    Ok(x.iter().zip(w.as_slice()).map(|(xi, wi)| wi * xi * xi).sum())
}

/// Weighted projection of `y` onto `set`: the unique minimizer of
/// `||z - y||_w^2` over the set.
pub fn project_weighted(set: &ConvexSet, w: &Weights, y: &[f64]) -> Result<Point> {
    let d = set.dim();
    if y.len() != d || w.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: if y.len() != d { y.len() } else { w.dim() },
        });
    }
    match set {
        ConvexSet::FreeSpace { .. } => Ok(y.to_vec()),
        // Separable, so the clip is weight-independent.
        ConvexSet::Box { lower, upper } => Ok(y
            .iter()
            .zip(lower.iter().zip(upper))
            .map(|(yi, (l, u))| yi.max(*l).min(*u))
            .collect()),
        ConvexSet::EuclideanBall { center, radius } => project_ball(center, *radius, w, y),
        ConvexSet::Simplex { scale, .. } => project_simplex(*scale, w, y),
    }
}

/// Ball case. KKT stationarity gives `z_i = (w_i y_i + lam c_i) / (w_i + lam)`
/// with `lam >= 0` and `||z - c|| = r` when y is outside; the constraint
/// residual is strictly decreasing in `lam`, so bisection applies.
fn project_ball(center: &[f64], radius: f64, w: &Weights, y: &[f64]) -> Result<Point> {
    let r_sq = radius * radius;
    // Points already inside (to rounding) project to themselves; this also
    // makes repeated projection a fixed point.
    if linalg::dist_sq(y, center) <= r_sq * (1.0 + 1e-13) {
        return Ok(y.to_vec());
    }
    let ws = w.as_slice();
    let constraint = |lam: f64| -> f64 {
        let mut s = 0.0;
        for i in 0..y.len() {
            let num = ws[i] * (y[i] - center[i]);
            let t = num / (ws[i] + lam);
            s += t * t;
        }
        s - r_sq
    };
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut grow = 0;
    while constraint(hi) > 0.0 {
        hi *= 2.0;
        grow += 1;
        if grow > 200 {
            return Err(Error::Numerical {
                what: "ball projection bracket".into(),
                residual: constraint(hi),
            });
        }
    }
    for _ in 0..BISECT_MAX_ITERS {
        let mid = 0.5 * (lo + hi);
        if constraint(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= MULTIPLIER_TOL * (1.0 + hi) {
            break;
        }
    }
    let lam = 0.5 * (lo + hi);
    let mut z: Vec<f64> = (0..y.len())
        .map(|i| (ws[i] * y[i] + lam * center[i]) / (ws[i] + lam))
        .collect();
    // Snap onto the sphere; the active constraint holds exactly at the optimum.
    let dist = linalg::dist_sq(&z, center).sqrt();
    if dist > 0.0 {
        let scale = radius / dist;
        for i in 0..z.len() {
            z[i] = center[i] + (z[i] - center[i]) * scale;
        }
    }
    let residual = (linalg::dist_sq(&z, center).sqrt() - radius).abs();
    if residual > 1e-9 * radius.max(1.0) {
        return Err(Error::Numerical {
            what: "ball projection".into(),
            residual,
        });
    }
    Ok(z)
}

/// Simplex case. With multiplier `mu` for the sum constraint,
/// `z_i(mu) = max(0, y_i - mu / (2 w_i))` and `sum_i z_i(mu)` is decreasing
/// in `mu`. After bisection the active support is known and `mu` is
/// recomputed in closed form.
fn project_simplex(scale: f64, w: &Weights, y: &[f64]) -> Result<Point> {
    let sum: f64 = y.iter().sum();
    if y.iter().all(|yi| *yi >= 0.0) && (sum - scale).abs() <= 1e-12 * scale.max(1.0) {
        return Ok(y.to_vec());
    }
    let ws = w.as_slice();
    let excess = |mu: f64| -> f64 {
        y.iter()
            .zip(ws)
            .map(|(yi, wi)| (yi - mu / (2.0 * wi)).max(0.0))
            .sum::<f64>()
            - scale
    };
    let mut lo = -1.0;
    let mut hi = 1.0;
    let mut grow = 0;
    while excess(lo) < 0.0 {
        lo *= 2.0;
        grow += 1;
        if grow > 200 {
            return Err(Error::Numerical {
                what: "simplex projection bracket".into(),
                residual: excess(lo),
            });
        }
    }
    grow = 0;
    while excess(hi) > 0.0 {
        hi *= 2.0;
        grow += 1;
        if grow > 200 {
            return Err(Error::Numerical {
                what: "simplex projection bracket".into(),
                residual: excess(hi),
            });
        }
    }
    for _ in 0..BISECT_MAX_ITERS {
        let mid = 0.5 * (lo + hi);
        if excess(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= MULTIPLIER_TOL * (1.0 + hi.abs()) {
            break;
        }
    }
    let mu0 = 0.5 * (lo + hi);
    // Closed-form multiplier on the identified support.
    let support: Vec<usize> = (0..y.len())
        .filter(|&i| y[i] - mu0 / (2.0 * ws[i]) > 0.0)
        .collect();
    if support.is_empty() {
        return Err(Error::Numerical {
            what: "simplex projection support".into(),
            residual: excess(mu0),
        });
    }
    let num: f64 = support.iter().map(|&i| y[i]).sum::<f64>() - scale;
    let den: f64 = support.iter().map(|&i| 1.0 / (2.0 * ws[i])).sum();
    let mu = num / den;
    Ok(y
        .iter()
        .zip(ws)
        .map(|(yi, wi)| (yi - mu / (2.0 * wi)).max(0.0))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn wts(v: &[f64]) -> Weights {
        Weights::new(v.to_vec()).unwrap()
    }

    #[test]
    fn weighted_norm_sq_direct() {
        assert_eq!(weighted_norm_sq(&[1.0, 2.0], &wts(&[3.0, 1.0])).unwrap(), 7.0);
        assert_eq!(weighted_norm_sq(&[0.0, 0.0, 0.0], &wts(&[2.0, 5.0, 9.0])).unwrap(), 0.0);
        assert_eq!(weighted_norm_sq(&[1.0, 1.0, 1.0], &wts(&[1.0, 1.0, 1.0])).unwrap(), 3.0);
    }

    #[test]
    fn weighted_norm_sq_dim_mismatch() {
        assert!(weighted_norm_sq(&[1.0], &wts(&[1.0, 1.0])).is_err());
    }

    #[test]
    fn weights_reject_nonpositive() {
        assert!(Weights::new(vec![1.0, 0.0]).is_err());
        assert!(Weights::new(vec![1.0, -2.0]).is_err());
        assert!(Weights::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn box_clip_is_weight_independent() {
        let set = ConvexSet::boxed(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let z = project_weighted(&set, &wts(&[4.0, 1.0]), &[2.0, -0.5]).unwrap();
        assert_eq!(z, vec![1.0, 0.0]);
    }

    #[test]
    fn unit_ball_unweighted_is_radial() {
        let set = ConvexSet::ball(vec![0.0, 0.0], 1.0).unwrap();
        let z = project_weighted(&set, &Weights::ones(2), &[3.0, 4.0]).unwrap();
        assert_abs_diff_eq!(z[0], 0.6, epsilon = 1e-10);
        assert_abs_diff_eq!(z[1], 0.8, epsilon = 1e-10);
    }

    #[test]
    fn weighted_ball_axis_case() {
        let set = ConvexSet::ball(vec![0.0, 0.0], 1.0).unwrap();
        let z = project_weighted(&set, &wts(&[4.0, 1.0]), &[2.0, 0.0]).unwrap();
        assert_abs_diff_eq!(z[0], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(z[1], 0.0, epsilon = 1e-10);
    }

    /// Brute-force oracle: grid search over the 2-D set for the weighted
    /// nearest point.
    fn grid_oracle_ball(w: &Weights, y: &[f64], n: usize) -> Vec<f64> {
        let mut best = (f64::INFINITY, vec![0.0, 0.0]);
        for i in 0..=n {
            for j in 0..=n {
                let z = [
                    -1.0 + 2.0 * i as f64 / n as f64,
                    -1.0 + 2.0 * j as f64 / n as f64,
                ];
                if linalg::norm_sq(&z) > 1.0 {
                    continue;
                }
                let d: f64 = z
                    .iter()
                    .zip(y)
                    .zip(w.as_slice())
                    .map(|((zi, yi), wi)| wi * (zi - yi) * (zi - yi))
                    .sum();
                if d < best.0 {
                    best = (d, z.to_vec());
                }
            }
        }
        best.1
    }

    #[test]
    fn weighted_ball_matches_grid_search() {
        let set = ConvexSet::ball(vec![0.0, 0.0], 1.0).unwrap();
        let w = wts(&[4.0, 1.0]);
        let z = project_weighted(&set, &w, &[2.0, 2.0]).unwrap();
        let oracle = grid_oracle_ball(&w, &[2.0, 2.0], 4000);
        assert!((z[0] - oracle[0]).abs() < 1e-3, "{z:?} vs {oracle:?}");
        assert!((z[1] - oracle[1]).abs() < 1e-3, "{z:?} vs {oracle:?}");
    }

    #[test]
    fn simplex_symmetric_point() {
        let set = ConvexSet::simplex(3, 1.0).unwrap();
        let z = project_weighted(&set, &Weights::ones(3), &[0.5, 0.5, 0.5]).unwrap();
        for zi in &z {
            assert_abs_diff_eq!(*zi, 1.0 / 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn simplex_feasible_and_idempotent() {
        let set = ConvexSet::simplex(4, 2.0).unwrap();
        let w = wts(&[1.0, 3.0, 0.5, 2.0]);
        let y = [1.5, -0.3, 0.9, 0.1];
        let z = project_weighted(&set, &w, &y).unwrap();
        assert!(set.contains(&z, 1e-12));
        let z2 = project_weighted(&set, &w, &z).unwrap();
        assert_eq!(z, z2);
    }

    #[test]
    fn ball_idempotent() {
        let set = ConvexSet::ball(vec![0.5, -0.5], 2.0).unwrap();
        let w = wts(&[2.0, 0.7]);
        let z = project_weighted(&set, &w, &[5.0, 3.0]).unwrap();
        let z2 = project_weighted(&set, &w, &z).unwrap();
        assert_eq!(z, z2);
    }

    #[test]
    fn unbounded_box_clip_is_noop_on_free_side() {
        let set = ConvexSet::boxed(vec![0.0, f64::NEG_INFINITY], vec![f64::INFINITY, 1.0]).unwrap();
        let z = project_weighted(&set, &Weights::ones(2), &[1e100, -1e100]).unwrap();
        assert_eq!(z, vec![1e100, -1e100]);
        assert!(set.norm_radius().is_none());
    }

    #[test]
    fn rejects_bad_sets() {
        assert!(ConvexSet::boxed(vec![1.0], vec![0.0]).is_err());
        assert!(ConvexSet::ball(vec![0.0], 0.0).is_err());
        assert!(ConvexSet::simplex(2, -1.0).is_err());
    }
}
