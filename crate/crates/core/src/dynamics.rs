//! Particle states and the explicit Euler integration of the alignment
//! dynamics.
//!
//! Each of J particles carries a position and a velocity in R^d. The
//! velocity of particle j relaxes toward the others' velocities at rate
//! -(K/J) sum_k psi(|x_j - x_k|) (v_j - v_k). The pairwise kernel evaluates
//! each unordered pair once and applies the antisymmetric contribution to
//! both rows, which halves the work and conserves the mean velocity to
//! rounding.

use rand::distributions::{Distribution, Uniform};
use rand::Rng;

use crate::error::{Error, Result};
use crate::theory::CommunicationRate;

/// Positions and velocities of J particles in dimension d at a given time.
/// Coordinates are stored flat, particle-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    dim: usize,
    positions: Vec<f64>,
    velocities: Vec<f64>,
    time: f64,
}

impl ParticleEnsemble {
    pub fn new(dim: usize, positions: Vec<f64>, velocities: Vec<f64>, time: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be positive"));
        }
        if positions.is_empty() || positions.len() % dim != 0 {
            return Err(Error::invalid(
                "positions",
                format!("{} coordinates is not a positive multiple of dim = {dim}", positions.len()),
            ));
        }
        if velocities.len() != positions.len() {
            return Err(Error::LengthMismatch {
                left: positions.len(),
                right: velocities.len(),
            });
        }
        if !positions.iter().chain(&velocities).all(|c| c.is_finite()) || !time.is_finite() {
            return Err(Error::invalid("coordinates", "must all be finite"));
        }
        Ok(ParticleEnsemble {
            dim,
            positions,
            velocities,
            time,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of particles J.
    pub fn count(&self) -> usize {
        self.positions.len() / self.dim
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn velocities(&self) -> &[f64] {
        &self.velocities
    }

    pub fn position(&self, j: usize) -> &[f64] {
        &self.positions[j * self.dim..(j + 1) * self.dim]
    }

    pub fn velocity(&self, j: usize) -> &[f64] {
        &self.velocities[j * self.dim..(j + 1) * self.dim]
    }

    /// Largest pairwise distances in position and velocity space; (0, 0)
    /// for a single particle.
    pub fn diameters(&self) -> (f64, f64) {
        let n = self.count();
        let d = self.dim;
        let mut dx2 = 0.0f64;
        let mut dv2 = 0.0f64;
        for j in 0..n {
            for k in (j + 1)..n {
                let mut rx = 0.0;
                let mut rv = 0.0;
                for c in 0..d {
                    let ex = self.positions[j * d + c] - self.positions[k * d + c];
                    let ev = self.velocities[j * d + c] - self.velocities[k * d + c];
                    rx += ex * ex;
                    rv += ev * ev;
                }
                dx2 = dx2.max(rx);
                dv2 = dv2.max(rv);
            }
        }
        (dx2.sqrt(), dv2.sqrt())
    }

    /// Arithmetic mean of the velocities (conserved by the dynamics).
    pub fn mean_velocity(&self) -> Vec<f64> {
        mean_rows(&self.velocities, self.dim)
    }

    /// Arithmetic mean of the positions (drifts linearly in time).
    pub fn barycenter(&self) -> Vec<f64> {
        mean_rows(&self.positions, self.dim)
    }

    /// The ensemble whose particles are each repeated `copies` times
    /// consecutively. Leaves the associated empirical measure unchanged.
    pub fn duplicate(&self, copies: usize) -> Result<Self> {
        if copies == 0 {
            return Err(Error::invalid("copies", "must be positive"));
        }
        let n = self.count();
        let d = self.dim;
        let mut positions = Vec::with_capacity(n * copies * d);
        let mut velocities = Vec::with_capacity(n * copies * d);
        for j in 0..n {
            for _ in 0..copies {
                positions.extend_from_slice(self.position(j));
                velocities.extend_from_slice(self.velocity(j));
            }
        }
        Ok(ParticleEnsemble {
            dim: d,
            positions,
            velocities,
            time: self.time,
        })
    }

    /// The sub-ensemble made of the first `count` particles.
    pub fn leading(&self, count: usize) -> Result<Self> {
        if count == 0 || count > self.count() {
            return Err(Error::invalid(
                "count",
                format!("must be in 1..={}, got {count}", self.count()),
            ));
        }
        Ok(ParticleEnsemble {
            dim: self.dim,
            positions: self.positions[..count * self.dim].to_vec(),
            velocities: self.velocities[..count * self.dim].to_vec(),
            time: self.time,
        })
    }

    pub(crate) fn with_coordinates(&self, positions: Vec<f64>, velocities: Vec<f64>, time: f64) -> Self {
        ParticleEnsemble {
            dim: self.dim,
            positions,
            velocities,
            time,
        }
    }
}

fn mean_rows(flat: &[f64], dim: usize) -> Vec<f64> {
    let n = flat.len() / dim;
    let mut mean = vec![0.0; dim];
    for j in 0..n {
        for c in 0..dim {
            mean[c] += flat[j * dim + c];
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    mean
}

/// Communication strength and rate of the alignment force.
#[derive(Debug, Clone)]
pub struct ModelParams {
    strength: f64,
    rate: CommunicationRate,
}

impl ModelParams {
    pub fn new(strength: f64, rate: CommunicationRate) -> Result<Self> {
        if !(strength > 0.0) || !strength.is_finite() {
            return Err(Error::invalid("strength", format!("must be positive, got {strength}")));
        }
        Ok(ModelParams { strength, rate })
    }

    pub fn strength(&self) -> f64 {
        self.strength
    }

    pub fn rate(&self) -> &CommunicationRate {
        &self.rate
    }

    /// Below this step size every Euler velocity update is a convex
    /// combination of the current velocities, so the velocity diameter
    /// cannot grow.
    pub fn contractive_step_limit(&self) -> f64 {
        1.0 / self.strength
    }
}

/// Time derivative of the state: dx_j = v_j and
/// dv_j = -(K/J) sum_k psi(|x_j - x_k|) (v_j - v_k).
/// The k = j term vanishes identically and the per-pair contributions are
/// exact negatives, so the dv rows sum to zero up to rounding.
pub fn rhs(state: &ParticleEnsemble, params: &ModelParams) -> (Vec<f64>, Vec<f64>) {
    let n = state.count();
    let d = state.dim();
    let x = state.positions();
    let v = state.velocities();
    let dx = v.to_vec();
    let mut dv = vec![0.0; n * d];
    for j in 0..n {
        for k in (j + 1)..n {
            let mut r2 = 0.0;
            for c in 0..d {
                let e = x[j * d + c] - x[k * d + c];
                r2 += e * e;
            }
            let w = params.rate.eval(r2.sqrt());
            for c in 0..d {
                let f = w * (v[j * d + c] - v[k * d + c]);
                dv[j * d + c] -= f;
                dv[k * d + c] += f;
            }
        }
    }
    let scale = params.strength / n as f64;
    for e in &mut dv {
        *e *= scale;
    }
    (dx, dv)
}

/// One explicit Euler step of size `dt`. Fails with the offending step index
/// (inferred from the state clock) if any updated coordinate is non-finite.
pub fn step(state: &ParticleEnsemble, params: &ModelParams, dt: f64) -> Result<ParticleEnsemble> {
    assert!(dt > 0.0, "dt must be positive");
    let (dx, dv) = rhs(state, params);
    let positions: Vec<f64> = state
        .positions()
        .iter()
        .zip(&dx)
        .map(|(x, d)| x + dt * d)
        .collect();
    let velocities: Vec<f64> = state
        .velocities()
        .iter()
        .zip(&dv)
        .map(|(v, d)| v + dt * d)
        .collect();
    if !positions.iter().chain(&velocities).all(|c| c.is_finite()) {
        return Err(Error::BlowUp {
            step: (state.time / dt).round() as usize,
        });
    }
    Ok(state.with_coordinates(positions, velocities, state.time + dt))
}

/// Diameters and conserved quantities sampled at the recorded times of a
/// trajectory.
#[derive(Debug, Clone, Default)]
pub struct RecordedObservables {
    pub times: Vec<f64>,
    pub position_diameter: Vec<f64>,
    pub velocity_diameter: Vec<f64>,
    pub mean_velocity: Vec<Vec<f64>>,
    pub barycenter: Vec<Vec<f64>>,
}

impl RecordedObservables {
    fn push(&mut self, state: &ParticleEnsemble) {
        let (dx, dv) = state.diameters();
        self.times.push(state.time());
        self.position_diameter.push(dx);
        self.velocity_diameter.push(dv);
        self.mean_velocity.push(state.mean_velocity());
        self.barycenter.push(state.barycenter());
    }
}

/// Snapshots of one simulation at times k dt, together with the recorded
/// observables at those times.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub params: ModelParams,
    pub dt: f64,
    pub states: Vec<ParticleEnsemble>,
    pub observables: RecordedObservables,
}

impl Trajectory {
    pub fn initial(&self) -> &ParticleEnsemble {
        &self.states[0]
    }

    pub fn last(&self) -> &ParticleEnsemble {
        self.states.last().expect("at least the initial state")
    }
}

/// Applies `step` `n_steps` times, retaining the initial state, every
/// `record_every`-th state, and the final one.
pub fn simulate(
    init: &ParticleEnsemble,
    params: &ModelParams,
    dt: f64,
    n_steps: usize,
    record_every: usize,
) -> Result<Trajectory> {
    assert!(dt > 0.0, "dt must be positive");
    assert!(record_every > 0, "record_every must be positive");
    if dt > params.contractive_step_limit() {
        log::warn!(
            "dt * K = {} > 1: velocity-diameter monotonicity is not guaranteed",
            dt * params.strength()
        );
    }
    let mut observables = RecordedObservables::default();
    observables.push(init);
    let mut states = vec![init.clone()];
    let mut current = init.clone();
    for k in 0..n_steps {
        current = step(&current, params, dt).map_err(|e| match e {
            Error::BlowUp { .. } => Error::BlowUp { step: k },
            other => other,
        })?;
        if (k + 1) % record_every == 0 || k + 1 == n_steps {
            observables.push(&current);
            states.push(current.clone());
        }
    }
    Ok(Trajectory {
        params: params.clone(),
        dt,
        states,
        observables,
    })
}

/// Product of coordinate-wise uniform distributions: positions on
/// [-a_i, a_i], velocities on [-b_i, b_i].
#[derive(Debug, Clone, PartialEq)]
pub struct InitialLaw {
    x_halfwidths: Vec<f64>,
    v_halfwidths: Vec<f64>,
}

impl InitialLaw {
    pub fn new(x_halfwidths: Vec<f64>, v_halfwidths: Vec<f64>) -> Result<Self> {
        if x_halfwidths.is_empty() || x_halfwidths.len() != v_halfwidths.len() {
            return Err(Error::LengthMismatch {
                left: x_halfwidths.len(),
                right: v_halfwidths.len(),
            });
        }
        if !x_halfwidths
            .iter()
            .chain(&v_halfwidths)
            .all(|h| h.is_finite() && *h > 0.0)
        {
            return Err(Error::invalid("halfwidths", "must all be positive and finite"));
        }
        Ok(InitialLaw {
            x_halfwidths,
            v_halfwidths,
        })
    }

    pub fn dim(&self) -> usize {
        self.x_halfwidths.len()
    }

    pub fn x_halfwidths(&self) -> &[f64] {
        &self.x_halfwidths
    }

    pub fn v_halfwidths(&self) -> &[f64] {
        &self.v_halfwidths
    }

    /// Diameters of the support: twice the Euclidean norm of each halfwidth
    /// vector.
    pub fn support_diameters(&self) -> (f64, f64) {
        let norm = |h: &[f64]| h.iter().map(|a| a * a).sum::<f64>().sqrt();
        (
            2.0 * norm(&self.x_halfwidths),
            2.0 * norm(&self.v_halfwidths),
        )
    }
}

/// I.i.d. draws from the law; deterministic given the rng stream. Draw
/// order is fixed: per particle, position coordinates then velocity
/// coordinates.
pub fn sample_initial<R: Rng + ?Sized>(
    law: &InitialLaw,
    count: usize,
    dim: usize,
    rng: &mut R,
) -> Result<ParticleEnsemble> {
    if count == 0 {
        return Err(Error::invalid("count", "must be positive"));
    }
    if dim != law.dim() {
        return Err(Error::DimensionMismatch {
            left: dim,
            right: law.dim(),
        });
    }
    let x_dists: Vec<Uniform<f64>> = law
        .x_halfwidths
        .iter()
        .map(|&h| Uniform::new_inclusive(-h, h))
        .collect();
    let v_dists: Vec<Uniform<f64>> = law
        .v_halfwidths
        .iter()
        .map(|&h| Uniform::new_inclusive(-h, h))
        .collect();
    let mut positions = Vec::with_capacity(count * dim);
    let mut velocities = Vec::with_capacity(count * dim);
    for _ in 0..count {
        for dist in &x_dists {
            positions.push(dist.sample(rng));
        }
        for dist in &v_dists {
            velocities.push(dist.sample(rng));
        }
    }
    ParticleEnsemble::new(dim, positions, velocities, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theory::{validate_rate, RateSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn constant_rate_params(strength: f64) -> ModelParams {
        ModelParams::new(strength, validate_rate(&RateSpec::algebraic(0.0)).unwrap()).unwrap()
    }

    fn params_gamma_half(strength: f64) -> ModelParams {
        ModelParams::new(strength, validate_rate(&RateSpec::algebraic(0.5)).unwrap()).unwrap()
    }

    /// Literal transcription of the interaction sum, one row at a time.
    /// Reference for the pair-symmetric kernel.
    fn rhs_naive(state: &ParticleEnsemble, params: &ModelParams) -> Vec<f64> {
        let n = state.count();
        let d = state.dim();
        let mut dv = vec![0.0; n * d];
        for j in 0..n {
            for k in 0..n {
                let mut r2 = 0.0;
                for c in 0..d {
                    let e = state.position(j)[c] - state.position(k)[c];
                    r2 += e * e;
                }
                let w = params.rate().eval(r2.sqrt());
                for c in 0..d {
                    dv[j * d + c] -=
                        params.strength() / n as f64 * w * (state.velocity(j)[c] - state.velocity(k)[c]);
                }
            }
        }
        dv
    }

    #[test]
    fn single_particle_feels_nothing() {
        let state = ParticleEnsemble::new(3, vec![1.0, -2.0, 0.5], vec![0.1, 0.2, 0.3], 0.0).unwrap();
        let (dx, dv) = rhs(&state, &params_gamma_half(5.0));
        assert_eq!(dx, vec![0.1, 0.2, 0.3]);
        assert_eq!(dv, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn equal_velocities_give_zero_force() {
        let state = ParticleEnsemble::new(
            2,
            vec![0.0, 0.0, 3.0, 1.0, -2.0, 0.4],
            vec![0.5, -1.0, 0.5, -1.0, 0.5, -1.0],
            0.0,
        )
        .unwrap();
        let (_, dv) = rhs(&state, &params_gamma_half(5.0));
        assert!(dv.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn two_particle_closed_form() {
        // constant rate, K = 1, v = (1, -1): d(v1 - v2)/dt = -(v1 - v2)
        let state =
            ParticleEnsemble::new(1, vec![0.0, 1.0], vec![1.0, -1.0], 0.0).unwrap();
        let (_, dv) = rhs(&state, &constant_rate_params(1.0));
        assert!((dv[0] - (-1.0)).abs() < 1e-15);
        assert!((dv[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn kernel_matches_naive_row_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let law = InitialLaw::new(vec![3.0, 3.0], vec![1.0, 1.0]).unwrap();
        for &n in &[2usize, 3, 7, 20] {
            let state = sample_initial(&law, n, 2, &mut rng).unwrap();
            let params = params_gamma_half(5.0);
            let (_, dv) = rhs(&state, &params);
            let naive = rhs_naive(&state, &params);
            for (a, b) in dv.iter().zip(&naive) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn step_translates_equal_velocities() {
        let state = ParticleEnsemble::new(
            2,
            vec![0.0, 0.0, 1.0, 1.0],
            vec![2.0, -3.0, 2.0, -3.0],
            0.0,
        )
        .unwrap();
        let next = step(&state, &params_gamma_half(5.0), 0.1).unwrap();
        assert_eq!(next.velocities(), state.velocities());
        assert!((next.position(0)[0] - 0.2).abs() < 1e-15);
        assert!((next.position(1)[1] - (1.0 - 0.3)).abs() < 1e-15);
        assert!((next.time() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn two_particle_euler_contraction_factor() {
        // v1 - v2 scales by exactly 1 - K dt per step
        let state = ParticleEnsemble::new(1, vec![0.0, 1.0], vec![1.0, -1.0], 0.0).unwrap();
        let params = constant_rate_params(1.0);
        let next = step(&state, &params, 0.05).unwrap();
        let diff = next.velocity(0)[0] - next.velocity(1)[0];
        assert!((diff - 2.0 * 0.95).abs() < 1e-15);

        let traj = simulate(&state, &params, 0.05, 10, 1).unwrap();
        let last = traj.last();
        let diff10 = last.velocity(0)[0] - last.velocity(1)[0];
        assert!((diff10 - 2.0 * 0.95f64.powi(10)).abs() < 1e-12);
    }

    #[test]
    fn coincident_particles_stay_coincident() {
        let state = ParticleEnsemble::new(
            2,
            vec![0.3, -0.1, 0.3, -0.1, 2.0, 2.0],
            vec![0.7, 0.2, 0.7, 0.2, -1.0, 0.5],
            0.0,
        )
        .unwrap();
        let traj = simulate(&state, &params_gamma_half(5.0), 0.05, 40, 40).unwrap();
        let last = traj.last();
        assert_eq!(last.position(0), last.position(1));
        assert_eq!(last.velocity(0), last.velocity(1));
    }

    #[test]
    fn blow_up_reports_step_index() {
        let state =
            ParticleEnsemble::new(1, vec![0.0, 1.0], vec![1e155, -1e155], 0.0).unwrap();
        // dt K = 2e150: the Euler update squares the scale past f64 range
        let err = simulate(&state, &constant_rate_params(1e150), 1.0, 5, 1).unwrap_err();
        match err {
            Error::BlowUp { step } => assert!(step <= 1, "blew up at step {step}"),
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn simulate_zero_steps_keeps_only_init() {
        let state = ParticleEnsemble::new(1, vec![0.0], vec![1.0], 0.0).unwrap();
        let traj = simulate(&state, &constant_rate_params(1.0), 0.1, 0, 1).unwrap();
        assert_eq!(traj.states.len(), 1);
        assert_eq!(traj.observables.times, vec![0.0]);
    }

    #[test]
    fn single_particle_moves_linearly() {
        let state = ParticleEnsemble::new(2, vec![1.0, 2.0], vec![0.5, -0.25], 0.0).unwrap();
        let traj = simulate(&state, &params_gamma_half(5.0), 0.1, 50, 10).unwrap();
        let last = traj.last();
        assert_eq!(last.velocities(), state.velocities());
        assert!((last.position(0)[0] - (1.0 + 5.0 * 0.5)).abs() < 1e-12);
        assert!((last.position(0)[1] - (2.0 - 5.0 * 0.25)).abs() < 1e-12);
    }

    #[test]
    fn diameters_examples() {
        let single = ParticleEnsemble::new(2, vec![4.0, 5.0], vec![1.0, 1.0], 0.0).unwrap();
        assert_eq!(single.diameters(), (0.0, 0.0));

        let pair = ParticleEnsemble::new(1, vec![0.0, 3.0], vec![0.0, 0.0], 0.0).unwrap();
        assert_eq!(pair.diameters().0, 3.0);

        // 3-4-5 triangle dominates the three pairs
        let triple = ParticleEnsemble::new(
            2,
            vec![0.0, 0.0, 3.0, 4.0, 1.0, 0.0],
            vec![0.0; 6],
            0.0,
        )
        .unwrap();
        assert!((triple.diameters().0 - 5.0).abs() < 1e-15);
    }

    #[test]
    fn conserved_quantities() {
        let state = ParticleEnsemble::new(
            2,
            vec![0.0, 0.0, 2.0, 2.0],
            vec![1.0, 0.0, -1.0, 0.0],
            0.0,
        )
        .unwrap();
        assert_eq!(state.mean_velocity(), vec![0.0, 0.0]);
        assert_eq!(state.barycenter(), vec![1.0, 1.0]);

        let single = ParticleEnsemble::new(2, vec![3.0, -1.0], vec![0.5, 0.25], 0.0).unwrap();
        assert_eq!(single.mean_velocity(), vec![0.5, 0.25]);
        assert_eq!(single.barycenter(), vec![3.0, -1.0]);
    }

    #[test]
    fn barycenter_moves_with_initial_mean_velocity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let law = InitialLaw::new(vec![3.0, 3.0], vec![1.0, 1.0]).unwrap();
        let state = sample_initial(&law, 30, 2, &mut rng).unwrap();
        let params = params_gamma_half(5.0);
        let n_steps = 80;
        let dt = 0.05;
        let traj = simulate(&state, &params, dt, n_steps, n_steps).unwrap();
        let expected: Vec<f64> = state
            .barycenter()
            .iter()
            .zip(state.mean_velocity())
            .map(|(x, v)| x + n_steps as f64 * dt * v)
            .collect();
        for (got, want) in traj.last().barycenter().iter().zip(&expected) {
            assert!((got - want).abs() < 1e-10);
        }
    }

    #[test]
    fn duplicate_layout_and_identity() {
        let state =
            ParticleEnsemble::new(1, vec![1.0, 2.0], vec![-1.0, 3.0], 0.5).unwrap();
        assert_eq!(state.duplicate(1).unwrap(), state);
        let tripled = state.duplicate(3).unwrap();
        assert_eq!(tripled.count(), 6);
        assert_eq!(tripled.positions(), &[1.0, 1.0, 1.0, 2.0, 2.0, 2.0]);
        assert_eq!(tripled.velocities(), &[-1.0, -1.0, -1.0, 3.0, 3.0, 3.0]);
    }

    #[test]
    fn law_rejects_nonpositive_halfwidths() {
        assert!(InitialLaw::new(vec![0.0, 1.0], vec![1.0, 1.0]).is_err());
        assert!(InitialLaw::new(vec![1.0], vec![-2.0]).is_err());
    }

    #[test]
    fn samples_stay_in_the_box() {
        let law = InitialLaw::new(vec![3.0, 0.5], vec![1.0, 2.0]).unwrap();
        for seed in 0..4 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let state = sample_initial(&law, 200, 2, &mut rng).unwrap();
            for j in 0..state.count() {
                assert!(state.position(j)[0].abs() <= 3.0);
                assert!(state.position(j)[1].abs() <= 0.5);
                assert!(state.velocity(j)[0].abs() <= 1.0);
                assert!(state.velocity(j)[1].abs() <= 2.0);
            }
        }
    }

    #[test]
    fn sample_mean_velocity_is_near_zero() {
        // standard error of U[-b, b] is b / sqrt(3 J)
        let law = InitialLaw::new(vec![3.0, 3.0], vec![1.0, 1.0]).unwrap();
        let count = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let state = sample_initial(&law, count, 2, &mut rng).unwrap();
        let bound = 4.0 * 1.0 / (3.0 * count as f64).sqrt();
        for m in state.mean_velocity() {
            assert!(m.abs() < bound, "{m} vs {bound}");
        }
    }
}
