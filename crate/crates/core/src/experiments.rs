//! The numerical studies: synchronous coupling against a large-ensemble
//! mean-field proxy, the Wasserstein rate in the ensemble size, paired
//! stability runs, and the restart decomposition of the coupling error.
//!
//! Every study is a deterministic parallel Monte Carlo: replicate r draws
//! its own substream from (master seed, r, study label), replicates run
//! independently under rayon, and aggregation folds in replicate order, so
//! a report depends only on the configuration and the master seed -- never
//! on scheduling or thread count.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dynamics::{
    sample_initial, simulate, InitialLaw, ModelParams, ParticleEnsemble, Trajectory,
};
use crate::error::{Error, Result};
use crate::measures::{
    empirical, normalized_config_distance, recenter_config, recenter_measure, w2, Normalization,
};
use crate::rng::{replicate_rng, substream_seed, GENERATOR_FAMILY};
use crate::theory::{validate_rate, RateSpec, StabilityVariant, TheoryConstants};

/// Configuration shared by all studies.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dim: usize,
    /// Communication strength K.
    pub strength: f64,
    pub rate: RateSpec,
    pub initial_law: InitialLaw,
    pub dt: f64,
    /// Final time T.
    pub horizon: f64,
    /// Ensemble sizes J to study. Studies that work with a single size
    /// (stability, telescope) use the first entry.
    pub ensemble_sizes: Vec<usize>,
    /// Size of the mean-field proxy / reference ensemble.
    pub proxy_size: usize,
    /// Monte Carlo replicate count M.
    pub replicates: usize,
    pub master_seed: u64,
    /// Snapshots are kept every this many steps (plus the final one).
    pub record_every: usize,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::invalid("dim", "must be positive"));
        }
        if self.initial_law.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: self.initial_law.dim(),
            });
        }
        if !(self.strength > 0.0) {
            return Err(Error::invalid("K", format!("must be positive, got {}", self.strength)));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::invalid("dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::invalid("T", format!("must be positive, got {}", self.horizon)));
        }
        if self.ensemble_sizes.is_empty() {
            return Err(Error::invalid("J_list", "must not be empty"));
        }
        if self.ensemble_sizes.iter().any(|&j| j == 0) {
            return Err(Error::invalid("J_list", "entries must be positive"));
        }
        let max_j = *self.ensemble_sizes.iter().max().unwrap();
        if self.proxy_size < max_j {
            return Err(Error::invalid(
                "J_inf",
                format!("must be at least max(J_list) = {max_j}, got {}", self.proxy_size),
            ));
        }
        if self.replicates == 0 {
            return Err(Error::invalid("M", "must be positive"));
        }
        if self.record_every == 0 {
            return Err(Error::invalid("record_every", "must be positive"));
        }
        Ok(())
    }

    fn step_count(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    fn params(&self) -> Result<ModelParams> {
        ModelParams::new(self.strength, validate_rate(&self.rate)?)
    }
}

/// Per-time mean and standard error of one named statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesStats {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

/// Pathwise Lyapunov quantities of one paired run:
/// L_X(t) = (1/2J) sum_j |x_j - x~_j|^2 and the velocity analogue.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityDiagnostics {
    pub l_x: Vec<f64>,
    pub l_v: Vec<f64>,
}

/// Outcome of one study: configuration echo, per-replicate seeds, named
/// series with Monte Carlo statistics, derived scalars, and metadata.
/// Everything except `wall_time_secs` is bit-deterministic in
/// (config, master_seed).
#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub replicate_seeds: Vec<u64>,
    pub series: BTreeMap<String, SeriesStats>,
    pub scalars: BTreeMap<String, f64>,
    pub notes: Vec<String>,
    pub generator: String,
    pub code_version: String,
    pub wall_time_secs: f64,
}

impl ExperimentReport {
    fn new(config: &ExperimentConfig, label: &str, started: Instant) -> Self {
        ExperimentReport {
            config: config.clone(),
            replicate_seeds: (0..config.replicates)
                .map(|r| substream_seed(config.master_seed, r as u64, label))
                .collect(),
            series: BTreeMap::new(),
            scalars: BTreeMap::new(),
            notes: Vec::new(),
            generator: GENERATOR_FAMILY.to_string(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_secs: started.elapsed().as_secs_f64(),
        }
    }
}

/// Mean and standard error per index over replicate sample vectors, folded
/// in replicate order. The standard error is sample std / sqrt(M), zero by
/// convention for a single replicate.
pub fn aggregate(samples: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = samples.len();
    assert!(m >= 1, "at least one replicate");
    let len = samples[0].len();
    for s in samples {
        if s.len() != len {
            return Err(Error::LengthMismatch {
                left: len,
                right: s.len(),
            });
        }
    }
    let mut mean = vec![0.0; len];
    for s in samples {
        for (acc, x) in mean.iter_mut().zip(s) {
            *acc += x;
        }
    }
    for acc in &mut mean {
        *acc /= m as f64;
    }
    let mut stderr = vec![0.0; len];
    if m > 1 {
        for s in samples {
            for ((acc, x), mu) in stderr.iter_mut().zip(s).zip(&mean) {
                let e = x - mu;
                *acc += e * e;
            }
        }
        for acc in &mut stderr {
            *acc = (*acc / (m - 1) as f64).sqrt() / (m as f64).sqrt();
        }
    }
    Ok((mean, stderr))
}

/// Runs `replicates` independent copies of `task` on substreams derived
/// from `(master_seed, replicate index, label)` and collects the outputs in
/// replicate order. The first failing replicate (by index) aborts the whole
/// run; completed replicates are never silently dropped.
fn run_replicates<T, F>(replicates: usize, master_seed: u64, label: &str, task: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, ChaCha8Rng) -> Result<T> + Sync,
{
    assert!(replicates >= 1, "at least one replicate");
    let results: Vec<Result<T>> = (0..replicates)
        .into_par_iter()
        .map(|r| task(r, replicate_rng(master_seed, r as u64, label)))
        .collect();
    results.into_iter().collect()
}

/// Monte Carlo estimation of a vector statistic: runs M replicates of
/// `task` on derived substreams and returns per-index mean and standard
/// error together with the seeds used.
pub struct MonteCarloStats {
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub replicate_seeds: Vec<u64>,
}

pub fn monte_carlo<F>(
    task: F,
    replicates: usize,
    master_seed: u64,
    label: &str,
) -> Result<MonteCarloStats>
where
    F: Fn(usize, ChaCha8Rng) -> Result<Vec<f64>> + Sync,
{
    let samples = run_replicates(replicates, master_seed, label, task)?;
    let (mean, stderr) = aggregate(&samples)?;
    Ok(MonteCarloStats {
        mean,
        stderr,
        replicate_seeds: (0..replicates)
            .map(|r| substream_seed(master_seed, r as u64, label))
            .collect(),
    })
}

/// Sum over the first `count` vectors of the squared distance between the
/// recentered rows of `a` and `b` (each recentered by its own mean over
/// those `count` vectors).
fn recentered_sq_diff(a: &[f64], b: &[f64], count: usize, dim: usize) -> f64 {
    let mut mean_a = vec![0.0; dim];
    let mut mean_b = vec![0.0; dim];
    for i in 0..count {
        for c in 0..dim {
            mean_a[c] += a[i * dim + c];
            mean_b[c] += b[i * dim + c];
        }
    }
    for c in 0..dim {
        mean_a[c] /= count as f64;
        mean_b[c] /= count as f64;
    }
    let mut acc = 0.0;
    for i in 0..count {
        for c in 0..dim {
            let e = (a[i * dim + c] - mean_a[c]) - (b[i * dim + c] - mean_b[c]);
            acc += e * e;
        }
    }
    acc
}

fn flocking_note(config: &ExperimentConfig) -> Result<Option<String>> {
    let rate = validate_rate(&config.rate)?;
    let (dx0, dv0) = config.initial_law.support_diameters();
    if crate::theory::flocking_condition(config.strength, dx0, dv0, &rate) {
        Ok(None)
    } else {
        let msg = format!(
            "flocking condition fails for K = {} with support diameters ({dx0:.6}, {dv0:.6}); \
             uniform-in-time behavior is not guaranteed",
            config.strength
        );
        log::warn!("{msg}");
        Ok(Some(msg))
    }
}

fn fit_log_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() < 2 || ys.iter().any(|&y| y <= 0.0) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

struct CouplingSample {
    times: Vec<f64>,
    /// indexed like config.ensemble_sizes, then time
    err_x: Vec<Vec<f64>>,
    err_v: Vec<Vec<f64>>,
}

/// Synchronous-coupling study: evolve one large proxy ensemble per
/// replicate, re-evolve its leading J particles as a J-particle system for
/// each requested J, and track the summed squared differences of the
/// recentered positions (`errX`) and velocities (`errV`). At t = 0 both
/// vanish identically because the subsystem copies the proxy's particles.
pub fn run_coupling(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let started = Instant::now();
    config.validate()?;
    let params = config.params()?;
    let note = flocking_note(config)?;
    let n_steps = config.step_count();
    let d = config.dim;

    let samples = run_replicates(
        config.replicates,
        config.master_seed,
        "coupling",
        |r, mut rng| {
            let proxy0 = sample_initial(&config.initial_law, config.proxy_size, d, &mut rng)
                .map_err(|e| e.in_replicate(r, config.proxy_size))?;
            let proxy = simulate(&proxy0, &params, config.dt, n_steps, config.record_every)
                .map_err(|e| e.in_replicate(r, config.proxy_size))?;
            let mut err_x = Vec::with_capacity(config.ensemble_sizes.len());
            let mut err_v = Vec::with_capacity(config.ensemble_sizes.len());
            for &j in &config.ensemble_sizes {
                let sub0 = proxy0.leading(j).map_err(|e| e.in_replicate(r, j))?;
                let sub = simulate(&sub0, &params, config.dt, n_steps, config.record_every)
                    .map_err(|e| e.in_replicate(r, j))?;
                let mut ex = Vec::with_capacity(sub.states.len());
                let mut ev = Vec::with_capacity(sub.states.len());
                for (s, p) in sub.states.iter().zip(&proxy.states) {
                    ex.push(recentered_sq_diff(s.positions(), p.positions(), j, d));
                    ev.push(recentered_sq_diff(s.velocities(), p.velocities(), j, d));
                }
                err_x.push(ex);
                err_v.push(ev);
            }
            Ok(CouplingSample {
                times: proxy.observables.times.clone(),
                err_x,
                err_v,
            })
        },
    )?;

    let mut report = ExperimentReport::new(config, "coupling", started);
    if let Some(msg) = note {
        report.notes.push(msg);
    }
    let times = samples[0].times.clone();
    for (ji, &j) in config.ensemble_sizes.iter().enumerate() {
        let per_rep_x: Vec<Vec<f64>> = samples.iter().map(|s| s.err_x[ji].clone()).collect();
        let per_rep_v: Vec<Vec<f64>> = samples.iter().map(|s| s.err_v[ji].clone()).collect();
        let (mx, sx) = aggregate(&per_rep_x)?;
        let (mv, sv) = aggregate(&per_rep_v)?;
        report.series.insert(
            format!("errX[J={j}]"),
            SeriesStats {
                times: times.clone(),
                mean: mx,
                stderr: sx,
            },
        );
        report.series.insert(
            format!("errV[J={j}]"),
            SeriesStats {
                times: times.clone(),
                mean: mv,
                stderr: sv,
            },
        );
    }
    report.wall_time_secs = started.elapsed().as_secs_f64();
    Ok(report)
}

struct W2RateSample {
    times: Vec<f64>,
    /// indexed like config.ensemble_sizes, then time
    w2sq: Vec<Vec<f64>>,
}

/// Wasserstein-rate study: per replicate, one independent reference sample
/// of `proxy_size` particles stands in for the mean-field law; each
/// requested J gets its own fresh sample, and the recentered empirical
/// measures are compared in squared W2 at every recorded time. Reports the
/// fitted log-log slope of E[W2^2] against J at t = 0 under `slope_t0`.
pub fn run_w2_rate(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let started = Instant::now();
    config.validate()?;
    let params = config.params()?;
    let note = flocking_note(config)?;
    let n_steps = config.step_count();
    let d = config.dim;

    let samples = run_replicates(
        config.replicates,
        config.master_seed,
        "w2rate",
        |r, mut rng| {
            let ref0 = sample_initial(&config.initial_law, config.proxy_size, d, &mut rng)
                .map_err(|e| e.in_replicate(r, config.proxy_size))?;
            let reference = simulate(&ref0, &params, config.dt, n_steps, config.record_every)
                .map_err(|e| e.in_replicate(r, config.proxy_size))?;
            let ref_measures: Vec<_> = reference
                .states
                .iter()
                .map(|s| recenter_measure(&empirical(s)))
                .collect();
            let mut w2sq = Vec::with_capacity(config.ensemble_sizes.len());
            for &j in &config.ensemble_sizes {
                let sub0 = sample_initial(&config.initial_law, j, d, &mut rng)
                    .map_err(|e| e.in_replicate(r, j))?;
                let sub = simulate(&sub0, &params, config.dt, n_steps, config.record_every)
                    .map_err(|e| e.in_replicate(r, j))?;
                let mut row = Vec::with_capacity(sub.states.len());
                for (s, reference_measure) in sub.states.iter().zip(&ref_measures) {
                    let mu = recenter_measure(&empirical(s));
                    let matched = w2(&mu, reference_measure).map_err(|e| e.in_replicate(r, j))?;
                    row.push(matched.cost);
                }
                w2sq.push(row);
            }
            Ok(W2RateSample {
                times: reference.observables.times.clone(),
                w2sq,
            })
        },
    )?;

    let mut report = ExperimentReport::new(config, "w2rate", started);
    if let Some(msg) = note {
        report.notes.push(msg);
    }
    let max_j = *config.ensemble_sizes.iter().max().unwrap();
    report.notes.push(format!(
        "W2 is measured against a finite reference sample of size {}, which biases \
         the values upward; a reference of at least 8 x max(J_list) = {} is recommended{}",
        config.proxy_size,
        8 * max_j,
        if config.proxy_size >= 8 * max_j {
            " (satisfied)"
        } else {
            " (not satisfied here)"
        }
    ));
    let times = samples[0].times.clone();
    let mut t0_means = Vec::with_capacity(config.ensemble_sizes.len());
    for (ji, &j) in config.ensemble_sizes.iter().enumerate() {
        let per_rep: Vec<Vec<f64>> = samples.iter().map(|s| s.w2sq[ji].clone()).collect();
        let (mean, stderr) = aggregate(&per_rep)?;
        t0_means.push(mean[0]);
        report.series.insert(
            format!("w2sq[J={j}]"),
            SeriesStats {
                times: times.clone(),
                mean,
                stderr,
            },
        );
    }
    let sizes: Vec<f64> = config.ensemble_sizes.iter().map(|&j| j as f64).collect();
    if let Some(slope) = fit_log_slope(&sizes, &t0_means) {
        report.scalars.insert("slope_t0".to_string(), slope);
    }
    let (dx0, dv0) = config.initial_law.support_diameters();
    let constants = TheoryConstants::evaluate(
        config.strength,
        dx0,
        dv0,
        &validate_rate(&config.rate)?,
    );
    report
        .scalars
        .insert("c_stab".to_string(), constants.c_stab);
    report.wall_time_secs = started.elapsed().as_secs_f64();
    Ok(report)
}

struct StabilitySample {
    times: Vec<f64>,
    distance: Vec<f64>,
    diagnostics: StabilityDiagnostics,
    ratio: f64,
    c_stab: f64,
}

fn zero_mean_velocities(state: &ParticleEnsemble) -> ParticleEnsemble {
    let d = state.dim();
    let mean = state.mean_velocity();
    let velocities = state
        .velocities()
        .iter()
        .enumerate()
        .map(|(i, v)| v - mean[i % d])
        .collect();
    state.with_coordinates(state.positions().to_vec(), velocities, state.time())
}

/// Paired-trajectory stability study on J = ensemble_sizes[0] particles:
/// a base ensemble (velocities recentered to zero mean) against a uniformly
/// perturbed copy, tracking the unnormalized configuration distance
/// sqrt(sum |x - x~|^2 + sum |v - v~|^2), the Lyapunov pair, and the ratio
/// of the running supremum to the initial distance, which the stability
/// constant must dominate in every replicate.
pub fn run_stability(
    config: &ExperimentConfig,
    perturbation_scale: f64,
) -> Result<ExperimentReport> {
    let started = Instant::now();
    config.validate()?;
    if !(perturbation_scale >= 0.0) || !perturbation_scale.is_finite() {
        return Err(Error::invalid(
            "perturbation_scale",
            format!("must be nonnegative, got {perturbation_scale}"),
        ));
    }
    let params = config.params()?;
    let rate = validate_rate(&config.rate)?;
    let note = flocking_note(config)?;
    let n_steps = config.step_count();
    let d = config.dim;
    let j = config.ensemble_sizes[0];

    let samples = run_replicates(
        config.replicates,
        config.master_seed,
        "stability",
        |r, mut rng| {
            let base0 = zero_mean_velocities(
                &sample_initial(&config.initial_law, j, d, &mut rng)
                    .map_err(|e| e.in_replicate(r, j))?,
            );
            // Perturb every coordinate by U[-s, s] (positions first), then
            // restore the zero-mean velocity hypothesis.
            let s = perturbation_scale;
            let perturb = |flat: &[f64], rng: &mut ChaCha8Rng| -> Vec<f64> {
                flat.iter().map(|c| c + rng.gen_range(-s..=s)).collect()
            };
            let p_positions = perturb(base0.positions(), &mut rng);
            let p_velocities = perturb(base0.velocities(), &mut rng);
            let other0 = zero_mean_velocities(&base0.with_coordinates(
                p_positions,
                p_velocities,
                base0.time(),
            ));

            let (bx, bv) = base0.diameters();
            let (ox, ov) = other0.diameters();
            let c_stab = crate::theory::c_stab(
                config.strength,
                bx.max(ox),
                bv.max(ov),
                bv.max(ov),
                &rate,
                StabilityVariant::Conservative,
            )
            .map_err(|e| e.in_replicate(r, j))?;

            let base = simulate(&base0, &params, config.dt, n_steps, config.record_every)
                .map_err(|e| e.in_replicate(r, j))?;
            let other = simulate(&other0, &params, config.dt, n_steps, config.record_every)
                .map_err(|e| e.in_replicate(r, j))?;

            let mut distance = Vec::with_capacity(base.states.len());
            let mut l_x = Vec::with_capacity(base.states.len());
            let mut l_v = Vec::with_capacity(base.states.len());
            for (a, b) in base.states.iter().zip(&other.states) {
                let sq = |u: &[f64], w: &[f64]| -> f64 {
                    u.iter()
                        .zip(w)
                        .map(|(p, q)| {
                            let e = p - q;
                            e * e
                        })
                        .sum()
                };
                let sx = sq(a.positions(), b.positions());
                let sv = sq(a.velocities(), b.velocities());
                distance.push((sx + sv).sqrt());
                l_x.push(sx / (2.0 * j as f64));
                l_v.push(sv / (2.0 * j as f64));
            }
            let initial = distance[0];
            let supremum = distance.iter().cloned().fold(0.0f64, f64::max);
            let ratio = if initial > 0.0 { supremum / initial } else { 0.0 };
            Ok(StabilitySample {
                times: base.observables.times.clone(),
                distance,
                diagnostics: StabilityDiagnostics { l_x, l_v },
                ratio,
                c_stab,
            })
        },
    )?;

    let mut report = ExperimentReport::new(config, "stability", started);
    if let Some(msg) = note {
        report.notes.push(msg);
    }
    let times = samples[0].times.clone();
    let dist: Vec<Vec<f64>> = samples.iter().map(|s| s.distance.clone()).collect();
    let lx: Vec<Vec<f64>> = samples.iter().map(|s| s.diagnostics.l_x.clone()).collect();
    let lv: Vec<Vec<f64>> = samples.iter().map(|s| s.diagnostics.l_v.clone()).collect();
    for (name, per_rep) in [("distance", dist), ("L_X", lx), ("L_V", lv)] {
        let (mean, stderr) = aggregate(&per_rep)?;
        report.series.insert(
            name.to_string(),
            SeriesStats {
                times: times.clone(),
                mean,
                stderr,
            },
        );
    }
    let ratio_max = samples.iter().map(|s| s.ratio).fold(0.0f64, f64::max);
    let c_stab_max = samples.iter().map(|s| s.c_stab).fold(0.0f64, f64::max);
    let violations = samples.iter().filter(|s| s.ratio > s.c_stab).count();
    report.scalars.insert("ratio_max".to_string(), ratio_max);
    report
        .scalars
        .insert("cstab_bound".to_string(), c_stab_max);
    report
        .scalars
        .insert("bound_violations".to_string(), violations as f64);
    report.wall_time_secs = started.elapsed().as_secs_f64();
    Ok(report)
}

struct TelescopeSample {
    increments: Vec<f64>,
    residual: f64,
    monotone_after_two: bool,
}

/// Restart decomposition of the coupling error: evolve the proxy over unit
/// intervals; at every integer time spawn a J-particle system from the
/// proxy's recentered leading-J state and evolve it to the horizon. The
/// signed increments between consecutive spawned endpoints telescope
/// exactly to the difference between the first spawn's endpoint and the
/// recentered proxy endpoint; their norms decay with the flocking rate.
pub fn run_telescope(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let started = Instant::now();
    config.validate()?;
    let params = config.params()?;
    let note = flocking_note(config)?;
    let d = config.dim;
    let j = config.ensemble_sizes[0];

    let segments = config.horizon.round();
    if (config.horizon - segments).abs() > 1e-9 || segments < 1.0 {
        return Err(Error::invalid(
            "T",
            format!(
                "restart decomposition needs a whole number of unit intervals, got {}",
                config.horizon
            ),
        ));
    }
    let segments = segments as usize;
    let steps_per_unit = (1.0 / config.dt).round();
    if (steps_per_unit * config.dt - 1.0).abs() > 1e-9 || steps_per_unit < 1.0 {
        return Err(Error::invalid(
            "dt",
            format!("must divide the unit interval, got {}", config.dt),
        ));
    }
    let steps_per_unit = steps_per_unit as usize;

    let samples = run_replicates(
        config.replicates,
        config.master_seed,
        "telescope",
        |r, mut rng| {
            let proxy0 = sample_initial(&config.initial_law, config.proxy_size, d, &mut rng)
                .map_err(|e| e.in_replicate(r, config.proxy_size))?;
            let proxy = simulate(
                &proxy0,
                &params,
                config.dt,
                segments * steps_per_unit,
                steps_per_unit,
            )
            .map_err(|e| e.in_replicate(r, config.proxy_size))?;
            debug_assert_eq!(proxy.states.len(), segments + 1);

            let flatten = |state: &ParticleEnsemble| -> Vec<f64> {
                let mut flat = Vec::with_capacity(j * 2 * d);
                for i in 0..j {
                    flat.extend_from_slice(state.position(i));
                    flat.extend_from_slice(state.velocity(i));
                }
                flat
            };
            let mut endpoints = Vec::with_capacity(segments + 1);
            for (n, snapshot) in proxy.states.iter().enumerate() {
                let spawn = recenter_config(&snapshot.leading(j).map_err(|e| e.in_replicate(r, j))?);
                let end = if n == segments {
                    spawn
                } else {
                    simulate(
                        &spawn,
                        &params,
                        config.dt,
                        (segments - n) * steps_per_unit,
                        (segments - n) * steps_per_unit,
                    )
                    .map_err(|e| e.in_replicate(r, j))?
                    .last()
                    .clone()
                };
                endpoints.push(flatten(&end));
            }

            let mut increments = Vec::with_capacity(segments);
            for n in 1..=segments {
                increments.push(
                    normalized_config_distance(
                        &endpoints[n - 1],
                        &endpoints[n],
                        2 * d,
                        Normalization::Rms,
                    )
                    .map_err(|e| e.in_replicate(r, j))?,
                );
            }
            // Telescoping check: the summed signed increments must
            // reproduce the total endpoint discrepancy.
            let len = endpoints[0].len();
            let mut summed = vec![0.0; len];
            for n in 1..=segments {
                for i in 0..len {
                    summed[i] += endpoints[n - 1][i] - endpoints[n][i];
                }
            }
            let total: Vec<f64> = endpoints[0]
                .iter()
                .zip(&endpoints[segments])
                .map(|(a, b)| a - b)
                .collect();
            let residual =
                normalized_config_distance(&summed, &total, 2 * d, Normalization::Rms)
                    .map_err(|e| e.in_replicate(r, j))?;
            let monotone_after_two = increments
                .windows(2)
                .skip(1)
                .all(|w| w[1] <= w[0]);
            Ok(TelescopeSample {
                increments,
                residual,
                monotone_after_two,
            })
        },
    )?;

    let mut report = ExperimentReport::new(config, "telescope", started);
    if let Some(msg) = note {
        report.notes.push(msg);
    }
    let times: Vec<f64> = (1..=segments).map(|n| n as f64).collect();
    let per_rep: Vec<Vec<f64>> = samples.iter().map(|s| s.increments.clone()).collect();
    let (mean, stderr) = aggregate(&per_rep)?;
    if segments >= 3 {
        if let Some(slope) = fit_log_slope(&times[1..], &mean[1..]) {
            report
                .scalars
                .insert("increment_log_slope".to_string(), slope);
        }
    }
    report.series.insert(
        "increment".to_string(),
        SeriesStats {
            times,
            mean,
            stderr,
        },
    );
    let residual_max = samples.iter().map(|s| s.residual).fold(0.0f64, f64::max);
    let monotone = samples.iter().filter(|s| s.monotone_after_two).count();
    report
        .scalars
        .insert("residual_max".to_string(), residual_max);
    report.scalars.insert(
        "monotone_fraction".to_string(),
        monotone as f64 / samples.len() as f64,
    );
    report.wall_time_secs = started.elapsed().as_secs_f64();
    Ok(report)
}

/// One seeded simulation of `count` particles under the configuration's
/// physics (used by the command-line `simulate` front end).
pub fn run_simulation(config: &ExperimentConfig, count: usize) -> Result<Trajectory> {
    config.validate()?;
    let params = config.params()?;
    let mut rng = replicate_rng(config.master_seed, 0, "simulate");
    let init = sample_initial(&config.initial_law, count, config.dim, &mut rng)?;
    simulate(
        &init,
        &params,
        config.dt,
        config.step_count(),
        config.record_every,
    )
}
