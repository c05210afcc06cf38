//! Empirical measures on phase space, recentering, and exact Wasserstein-2
//! distances between equal-weight point clouds.
//!
//! For clouds of equal size n the squared distance is the minimum over
//! matchings of the mean squared point distance, solved exactly as a dense
//! linear assignment problem. Clouds of different sizes are first cloned to
//! lcm(n, m) points, which leaves the distance unchanged.

use crate::assignment;
use crate::dynamics::ParticleEnsemble;
use crate::error::{Error, Result};

/// Default ceiling on the common size produced by lcm cloning.
pub const DEFAULT_SIZE_CAP: usize = 4096;

/// Largest size accepted by the factorial-time reference matcher.
pub const BRUTE_FORCE_MAX: usize = 8;

/// Equal-weight point cloud in R^dim, stored flat, point-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    dim: usize,
    points: Vec<f64>,
}

impl EmpiricalMeasure {
    pub fn new(dim: usize, points: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be positive"));
        }
        if points.is_empty() || points.len() % dim != 0 {
            return Err(Error::invalid(
                "points",
                format!("{} coordinates is not a positive multiple of dim = {dim}", points.len()),
            ));
        }
        if !points.iter().all(|c| c.is_finite()) {
            return Err(Error::invalid("points", "must all be finite"));
        }
        Ok(EmpiricalMeasure { dim, points })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of support points; each carries weight 1/count.
    pub fn count(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn mean_point(&self) -> Vec<f64> {
        let n = self.count();
        let mut mean = vec![0.0; self.dim];
        for i in 0..n {
            for (m, c) in mean.iter_mut().zip(self.point(i)) {
                *m += c;
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        mean
    }

    /// The measure with every point repeated `copies` times consecutively.
    pub fn cloned_points(&self, copies: usize) -> Self {
        let n = self.count();
        let mut points = Vec::with_capacity(n * copies * self.dim);
        for i in 0..n {
            for _ in 0..copies {
                points.extend_from_slice(self.point(i));
            }
        }
        EmpiricalMeasure {
            dim: self.dim,
            points,
        }
    }
}

/// The empirical measure of an ensemble: one phase-space point (x_j, v_j)
/// in R^(2d) per particle, each of weight 1/J.
pub fn empirical(state: &ParticleEnsemble) -> EmpiricalMeasure {
    let d = state.dim();
    let mut points = Vec::with_capacity(state.count() * 2 * d);
    for j in 0..state.count() {
        points.extend_from_slice(state.position(j));
        points.extend_from_slice(state.velocity(j));
    }
    EmpiricalMeasure {
        dim: 2 * d,
        points,
    }
}

/// Translates every point by minus the mean point, so the recentered
/// measure has zero barycenter.
pub fn recenter_measure(mu: &EmpiricalMeasure) -> EmpiricalMeasure {
    let mean = mu.mean_point();
    let dim = mu.dim;
    let points = mu
        .points
        .iter()
        .enumerate()
        .map(|(i, c)| c - mean[i % dim])
        .collect();
    EmpiricalMeasure { dim, points }
}

/// Shifts positions and velocities by their ensemble means. Commutes with
/// taking the empirical measure: recentering the configuration and then
/// taking the measure equals recentering the measure of the original
/// configuration, because the joint mean of the (x, v) points is exactly
/// the pair of block means.
pub fn recenter_config(state: &ParticleEnsemble) -> ParticleEnsemble {
    let d = state.dim();
    let xbar = state.barycenter();
    let vbar = state.mean_velocity();
    let positions = state
        .positions()
        .iter()
        .enumerate()
        .map(|(i, c)| c - xbar[i % d])
        .collect();
    let velocities = state
        .velocities()
        .iter()
        .enumerate()
        .map(|(i, c)| c - vbar[i % d])
        .collect();
    state.with_coordinates(positions, velocities, state.time())
}

/// An optimal matching between two equal-size clouds: the minimizing
/// permutation and the mean squared point distance it attains. The
/// Wasserstein-2 distance is `cost.sqrt()`.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentResult {
    pub cost: f64,
    pub permutation: Vec<usize>,
}

impl AssignmentResult {
    pub fn distance(&self) -> f64 {
        self.cost.sqrt()
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let e = x - y;
            e * e
        })
        .sum()
}

fn kahan_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for x in values {
        let y = x - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}

fn cost_matrix(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Vec<f64> {
    let n = mu.count();
    let mut cost = vec![0.0; n * n];
    for i in 0..n {
        let p = mu.point(i);
        for j in 0..n {
            cost[i * n + j] = squared_distance(p, nu.point(j));
        }
    }
    cost
}

fn mean_matched_cost(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, perm: &[usize]) -> f64 {
    let n = mu.count();
    kahan_sum((0..n).map(|i| squared_distance(mu.point(i), nu.point(perm[i])))) / n as f64
}

/// Exact squared Wasserstein-2 distance with the default cloning cap.
pub fn w2(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<AssignmentResult> {
    w2_with_cap(mu, nu, DEFAULT_SIZE_CAP)
}

/// Exact squared Wasserstein-2 distance. Unequal sizes are cloned to their
/// lcm first; if that exceeds `size_cap` the call fails rather than
/// silently subsampling.
pub fn w2_with_cap(
    mu: &EmpiricalMeasure,
    nu: &EmpiricalMeasure,
    size_cap: usize,
) -> Result<AssignmentResult> {
    if mu.dim != nu.dim {
        return Err(Error::DimensionMismatch {
            left: mu.dim,
            right: nu.dim,
        });
    }
    let (n, m) = (mu.count(), nu.count());
    if n == m {
        let perm = assignment::solve_dense(n, &cost_matrix(mu, nu));
        let cost = mean_matched_cost(mu, nu, &perm);
        return Ok(AssignmentResult {
            cost,
            permutation: perm,
        });
    }
    let lcm = n / gcd(n, m) * m;
    if lcm > size_cap {
        return Err(Error::SizeCapExceeded {
            n,
            m,
            lcm,
            cap: size_cap,
        });
    }
    let mu_big = mu.cloned_points(lcm / n);
    let nu_big = nu.cloned_points(lcm / m);
    let perm = assignment::solve_dense(lcm, &cost_matrix(&mu_big, &nu_big));
    let cost = mean_matched_cost(&mu_big, &nu_big, &perm);
    Ok(AssignmentResult {
        cost,
        permutation: perm,
    })
}

/// Exhaustive minimum over all n! matchings; the reference for `w2`.
/// Equal sizes with n <= BRUTE_FORCE_MAX only.
pub fn w2_bruteforce(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<AssignmentResult> {
    if mu.dim != nu.dim {
        return Err(Error::DimensionMismatch {
            left: mu.dim,
            right: nu.dim,
        });
    }
    if mu.count() != nu.count() {
        return Err(Error::LengthMismatch {
            left: mu.count(),
            right: nu.count(),
        });
    }
    let n = mu.count();
    if n > BRUTE_FORCE_MAX {
        return Err(Error::BruteForceTooLarge {
            n,
            max: BRUTE_FORCE_MAX,
        });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best_cost = f64::INFINITY;
    let mut best_perm = perm.clone();
    heap_permutations(&mut perm, n, &mut |p| {
        let cost: f64 = (0..n)
            .map(|i| squared_distance(mu.point(i), nu.point(p[i])))
            .sum::<f64>()
            / n as f64;
        if cost < best_cost {
            best_cost = cost;
            best_perm.copy_from_slice(p);
        }
    });
    Ok(AssignmentResult {
        cost: best_cost,
        permutation: best_perm,
    })
}

fn heap_permutations(items: &mut [usize], k: usize, visit: &mut impl FnMut(&[usize])) {
    if k <= 1 {
        visit(items);
        return;
    }
    for i in 0..k {
        heap_permutations(items, k - 1, visit);
        if k % 2 == 0 {
            items.swap(i, k - 1);
        } else {
            items.swap(0, k - 1);
        }
    }
}

/// How to normalize the distance between two paired configurations of n
/// vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// (sum |a_j - b_j|^2 / n)^(1/2): root mean square.
    #[default]
    Rms,
    /// (sum |a_j - b_j|^2)^(1/2) / n: Euclidean norm divided by the count.
    NormOverCount,
}

/// Distance between two paired lists of n vectors of dimension `dim`,
/// matched index to index (no optimization over matchings).
pub fn normalized_config_distance(
    a: &[f64],
    b: &[f64],
    dim: usize,
    normalization: Normalization,
) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if dim == 0 || a.is_empty() || a.len() % dim != 0 {
        return Err(Error::invalid(
            "dim",
            format!("{} coordinates is not a positive multiple of dim = {dim}", a.len()),
        ));
    }
    let n = (a.len() / dim) as f64;
    let sum_sq = kahan_sum(a.iter().zip(b).map(|(x, y)| {
        let e = x - y;
        e * e
    }));
    Ok(match normalization {
        Normalization::Rms => (sum_sq / n).sqrt(),
        Normalization::NormOverCount => sum_sq.sqrt() / n,
    })
}
