//! Communication rates and the closed-form constants of the flocking regime.
//!
//! A communication rate is a positive, non-increasing, Lipschitz function
//! bounded by 1. Two families are supported: the algebraic family
//! psi(r) = (1 + r^2)^(-gamma) with gamma >= 0, and tabulated rates given by
//! samples on a radius grid with linear interpolation (constant extension
//! beyond the grid ends).
//!
//! From a validated rate this module computes tail integrals, the flocking
//! condition, the asymptotic position diameter `x_inf`, the contraction
//! exponent `alpha`, and the mean-field and stability constants.

use crate::error::{Error, Result};
use crate::quadrature;

/// Absolute tolerance for the bisection that inverts the tail integral.
const BISECTION_TOL: f64 = 1e-10;
/// Relative tolerance for adaptive quadrature.
const QUAD_REL_TOL: f64 = 1e-10;

/// Unvalidated description of a communication rate.
#[derive(Debug, Clone, PartialEq)]
pub enum RateSpec {
    /// psi(r) = (1 + r^2)^(-gamma), gamma >= 0.
    Algebraic { gamma: f64 },
    /// Samples (r_i, psi(r_i)) on a strictly increasing radius grid,
    /// linearly interpolated, constant beyond the ends.
    Tabulated { samples: Vec<(f64, f64)> },
}

impl RateSpec {
    pub fn algebraic(gamma: f64) -> Self {
        RateSpec::Algebraic { gamma }
    }
}

#[derive(Debug, Clone)]
enum RateKind {
    Algebraic { gamma: f64 },
    Tabulated { radii: Vec<f64>, values: Vec<f64> },
}

/// A validated communication rate with its cached Lipschitz constant.
#[derive(Debug, Clone)]
pub struct CommunicationRate {
    kind: RateKind,
    lipschitz: f64,
}

/// Checks the four structural assumptions (positive, bounded by 1,
/// non-increasing, Lipschitz) and returns the rate with its cached
/// Lipschitz constant. Violations are reported by assumption name.
pub fn validate_rate(spec: &RateSpec) -> Result<CommunicationRate> {
    match spec {
        RateSpec::Algebraic { gamma } => {
            let g = *gamma;
            if !g.is_finite() {
                return Err(Error::invalid("gamma", format!("must be finite, got {g}")));
            }
            if g < 0.0 {
                // (1 + r^2)^(-gamma) with gamma < 0 exceeds 1 away from 0.
                return Err(Error::RateAssumption {
                    assumption: "bounded by one",
                    detail: format!("gamma = {g} < 0 makes the rate unbounded"),
                });
            }
            Ok(CommunicationRate {
                kind: RateKind::Algebraic { gamma: g },
                lipschitz: algebraic_lipschitz(g),
            })
        }
        RateSpec::Tabulated { samples } => {
            if samples.is_empty() {
                return Err(Error::invalid("rate table", "must contain at least one sample"));
            }
            let mut radii = Vec::with_capacity(samples.len());
            let mut values = Vec::with_capacity(samples.len());
            for &(r, v) in samples {
                if !r.is_finite() || !v.is_finite() {
                    return Err(Error::invalid("rate table", "samples must be finite"));
                }
                if r < 0.0 {
                    return Err(Error::invalid("rate table", format!("radius {r} < 0")));
                }
                if let Some(&prev) = radii.last() {
                    if r <= prev {
                        return Err(Error::invalid(
                            "rate table",
                            format!("radius grid must be strictly increasing ({prev} then {r})"),
                        ));
                    }
                }
                radii.push(r);
                values.push(v);
            }
            if let Some((i, &v)) = values.iter().enumerate().find(|(_, v)| **v <= 0.0) {
                return Err(Error::RateAssumption {
                    assumption: "positive",
                    detail: format!("psi(r_{i}) = {v} <= 0"),
                });
            }
            if let Some((i, &v)) = values.iter().enumerate().find(|(_, v)| **v > 1.0) {
                return Err(Error::RateAssumption {
                    assumption: "bounded by one",
                    detail: format!("psi(r_{i}) = {v} > 1"),
                });
            }
            if let Some(i) = (1..values.len()).find(|&i| values[i] > values[i - 1]) {
                return Err(Error::RateAssumption {
                    assumption: "non-increasing",
                    detail: format!(
                        "psi rises from {} to {} between r = {} and r = {}",
                        values[i - 1],
                        values[i],
                        radii[i - 1],
                        radii[i]
                    ),
                });
            }
            // Exact for the piecewise-linear interpolant.
            let lipschitz = radii
                .windows(2)
                .zip(values.windows(2))
                .map(|(r, v)| ((v[1] - v[0]) / (r[1] - r[0])).abs())
                .fold(0.0f64, f64::max);
            Ok(CommunicationRate {
                kind: RateKind::Tabulated { radii, values },
                lipschitz,
            })
        }
    }
}

/// max |psi'| for the algebraic family, attained at r = 1/sqrt(2 gamma + 1).
fn algebraic_lipschitz(gamma: f64) -> f64 {
    if gamma == 0.0 {
        return 0.0;
    }
    let r = 1.0 / (2.0 * gamma + 1.0).sqrt();
    2.0 * gamma * r * (1.0 + r * r).powf(-gamma - 1.0)
}

impl CommunicationRate {
    /// psi(r). Defined at r = 0 by the limit from the right (the self
    /// interaction term multiplies a zero relative velocity, so this value
    /// never affects the dynamics).
    pub fn eval(&self, r: f64) -> f64 {
        match &self.kind {
            RateKind::Algebraic { gamma } => {
                if *gamma == 0.0 {
                    1.0
                } else if *gamma == 0.5 {
                    1.0 / (1.0 + r * r).sqrt()
                } else if *gamma == 1.0 {
                    1.0 / (1.0 + r * r)
                } else {
                    (1.0 + r * r).powf(-gamma)
                }
            }
            RateKind::Tabulated { radii, values } => {
                if r <= radii[0] {
                    return values[0];
                }
                if r >= *radii.last().unwrap() {
                    return *values.last().unwrap();
                }
                let i = radii.partition_point(|&g| g <= r);
                let (r0, r1) = (radii[i - 1], radii[i]);
                let (v0, v1) = (values[i - 1], values[i]);
                v0 + (v1 - v0) * (r - r0) / (r1 - r0)
            }
        }
    }

    /// Cached Lipschitz constant of psi.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// The spec this rate validates as.
    pub fn spec(&self) -> RateSpec {
        match &self.kind {
            RateKind::Algebraic { gamma } => RateSpec::Algebraic { gamma: *gamma },
            RateKind::Tabulated { radii, values } => RateSpec::Tabulated {
                samples: radii.iter().copied().zip(values.iter().copied()).collect(),
            },
        }
    }

    fn gamma(&self) -> Option<f64> {
        match &self.kind {
            RateKind::Algebraic { gamma } => Some(*gamma),
            RateKind::Tabulated { .. } => None,
        }
    }

    /// Exact integral of the piecewise-linear interpolant over [a, b],
    /// b finite, for tabulated rates.
    fn tabulated_integral(&self, a: f64, b: f64) -> f64 {
        let radii = match &self.kind {
            RateKind::Tabulated { radii, .. } => radii,
            RateKind::Algebraic { .. } => unreachable!("tabulated path"),
        };
        // Integrate the interpolant segment by segment via the trapezoid
        // rule, which is exact here.
        let eval = |r: f64| self.eval(r);
        let mut knots = vec![a];
        for &r in radii {
            if r > a && r < b {
                knots.push(r);
            }
        }
        knots.push(b);
        let mut acc = 0.0;
        for w in knots.windows(2) {
            acc += 0.5 * (eval(w[0]) + eval(w[1])) * (w[1] - w[0]);
        }
        acc
    }
}

/// Integral of psi over [a, b]; `b` may be `f64::INFINITY`, in which case
/// the result is `+inf` exactly when the tail diverges (algebraic family
/// with gamma <= 1/2, or a tabulated rate, whose constant extension keeps
/// psi bounded away from zero).
pub fn tail_integral(rate: &CommunicationRate, a: f64, b: f64) -> Result<f64> {
    if !(a >= 0.0) || a > b {
        return Err(Error::InvalidInterval { a, b });
    }
    if a == b {
        return Ok(0.0);
    }
    if b.is_infinite() {
        return match rate.gamma() {
            Some(g) if g > 0.5 => Ok(algebraic_infinite_tail(rate, g, a)),
            Some(_) => Ok(f64::INFINITY),
            None => {
                // Growth heuristic: if the integral is still growing at the
                // 10^8 horizon, declare divergence.
                let i7 = tail_integral(rate, a, a.max(1e7))?;
                let i8 = tail_integral(rate, a, a.max(1e8))?;
                if i8 - i7 > 1e-12 * (1.0 + i7) {
                    Ok(f64::INFINITY)
                } else {
                    Ok(i8)
                }
            }
        };
    }
    match rate.gamma() {
        Some(g) if g == 0.0 => Ok(b - a),
        Some(g) if g == 0.5 => Ok(b.asinh() - a.asinh()),
        Some(g) if g == 1.0 => Ok(b.atan() - a.atan()),
        Some(_) => Ok(quadrature::integrate(&|s| rate.eval(s), a, b, QUAD_REL_TOL)),
        None => Ok(rate.tabulated_integral(a, b)),
    }
}

/// Numerical-only route for the same integral (finite `b`), kept separate
/// so the closed forms above can be cross-checked against it.
pub fn tail_integral_numeric(rate: &CommunicationRate, a: f64, b: f64) -> Result<f64> {
    if !(a >= 0.0) || a > b || b.is_infinite() {
        return Err(Error::InvalidInterval { a, b });
    }
    Ok(quadrature::integrate(&|s| rate.eval(s), a, b, QUAD_REL_TOL))
}

/// Convergent tail of the algebraic family (gamma > 1/2): quadrature up to a
/// large split point, then the asymptotic series of (1 + s^2)^(-gamma), whose
/// first neglected term is below 1e-12 relative at the chosen split.
fn algebraic_infinite_tail(rate: &CommunicationRate, gamma: f64, a: f64) -> f64 {
    let split = a.max(1e4);
    let head = if split > a {
        tail_integral(rate, a, split).expect("finite bounds")
    } else {
        0.0
    };
    let s = split;
    let t0 = s.powf(1.0 - 2.0 * gamma) / (2.0 * gamma - 1.0);
    let t1 = -gamma * s.powf(-1.0 - 2.0 * gamma) / (2.0 * gamma + 1.0);
    let t2 = 0.5 * gamma * (gamma + 1.0) * s.powf(-3.0 - 2.0 * gamma) / (2.0 * gamma + 3.0);
    head + t0 + t1 + t2
}

/// True iff K exceeds the flocking threshold D_V(0) / integral of psi over
/// [D_X(0), inf). A divergent tail makes the condition hold for every K > 0.
pub fn flocking_condition(strength: f64, dx0: f64, dv0: f64, rate: &CommunicationRate) -> bool {
    assert!(strength > 0.0 && dx0 >= 0.0 && dv0 >= 0.0);
    if dv0 == 0.0 {
        return true;
    }
    let tail = tail_integral(rate, dx0, f64::INFINITY).expect("valid bounds");
    if tail.is_infinite() {
        return true;
    }
    strength > dv0 / tail
}

fn flocking_threshold(dx0: f64, dv0: f64, rate: &CommunicationRate) -> f64 {
    let tail = tail_integral(rate, dx0, f64::INFINITY).expect("valid bounds");
    if tail.is_infinite() {
        0.0
    } else {
        dv0 / tail
    }
}

/// The unique x >= D_X(0) with integral of psi over [D_X(0), x] equal to
/// D_V(0)/K. Closed forms where the family admits them, bisection otherwise.
pub fn x_infinity(strength: f64, dx0: f64, dv0: f64, rate: &CommunicationRate) -> Result<f64> {
    check_flocking(strength, dx0, dv0, rate)?;
    if dv0 == 0.0 {
        return Ok(dx0);
    }
    let target = dv0 / strength;
    match rate.gamma() {
        Some(g) if g == 0.0 => Ok(dx0 + target),
        Some(g) if g == 0.5 => Ok((dx0.asinh() + target).sinh()),
        Some(g) if g == 1.0 => Ok((dx0.atan() + target).tan()),
        _ => x_infinity_bisection(strength, dx0, dv0, rate),
    }
}

/// Root-finding route for the same equation, exposed so the closed forms can
/// be checked against it.
pub fn x_infinity_bisection(
    strength: f64,
    dx0: f64,
    dv0: f64,
    rate: &CommunicationRate,
) -> Result<f64> {
    check_flocking(strength, dx0, dv0, rate)?;
    if dv0 == 0.0 {
        return Ok(dx0);
    }
    let target = dv0 / strength;
    // Grow the bracket geometrically until the integral exceeds the target.
    let mut width = target / rate.eval(dx0).max(1e-300);
    let mut hi = dx0 + width;
    while tail_integral(rate, dx0, hi)? < target {
        width *= 2.0;
        hi = dx0 + width;
        if !hi.is_finite() {
            return Err(Error::FlockingViolated {
                strength,
                threshold: flocking_threshold(dx0, dv0, rate),
            });
        }
    }
    let mut lo = dx0;
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if tail_integral(rate, dx0, mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn check_flocking(strength: f64, dx0: f64, dv0: f64, rate: &CommunicationRate) -> Result<()> {
    if flocking_condition(strength, dx0, dv0, rate) {
        Ok(())
    } else {
        Err(Error::FlockingViolated {
            strength,
            threshold: flocking_threshold(dx0, dv0, rate),
        })
    }
}

/// Growth constant of the finite-time coupling bound:
/// exp(1 + 2 K L_psi D_V(0) + K).
pub fn c_mf(strength: f64, lipschitz: f64, dv0: f64) -> f64 {
    assert!(strength > 0.0 && lipschitz >= 0.0 && dv0 >= 0.0);
    (1.0 + 2.0 * strength * lipschitz * dv0 + strength).exp()
}

/// Which form of the stability constant to evaluate.
///
/// Both share the factor sqrt(2) exp(gamma / alpha^2) with
/// gamma = sqrt(2) K L_psi D_V~(0); `Conservative` multiplies by
/// max(K, 1/alpha) and `Tight` by max(alpha, 1/alpha). Since
/// alpha = K psi(x_inf) <= K, Tight never exceeds Conservative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StabilityVariant {
    #[default]
    Conservative,
    Tight,
}

/// Uniform-in-time stability constant for two trajectories with zero mean
/// velocity. `dx0`/`dv0` are the first system's initial diameters (callers
/// comparing two different ensembles should pass the pair of maxima),
/// `dv0_other` the second system's initial velocity diameter.
pub fn c_stab(
    strength: f64,
    dx0: f64,
    dv0: f64,
    dv0_other: f64,
    rate: &CommunicationRate,
    variant: StabilityVariant,
) -> Result<f64> {
    let x_inf = x_infinity(strength, dx0, dv0, rate)?;
    let alpha = strength * rate.eval(x_inf);
    let gamma_stab = std::f64::consts::SQRT_2 * strength * rate.lipschitz() * dv0_other;
    let lead = match variant {
        StabilityVariant::Conservative => strength.max(1.0 / alpha),
        StabilityVariant::Tight => alpha.max(1.0 / alpha),
    };
    Ok(std::f64::consts::SQRT_2 * lead * (gamma_stab / (alpha * alpha)).exp())
}

/// The closed-form constants attached to one (K, initial diameters, rate)
/// setup. When the flocking condition fails, `x_inf` and `c_stab` are
/// infinite and `alpha`/`decay_rate` are zero.
#[derive(Debug, Clone, Copy)]
pub struct TheoryConstants {
    pub x_inf: f64,
    pub alpha: f64,
    pub c_mf: f64,
    pub c_stab: f64,
    pub decay_rate: f64,
    pub flocking_holds: bool,
}

impl TheoryConstants {
    /// Evaluates every constant for a pair of systems sharing the same
    /// initial diameters (so the second velocity diameter equals `dv0`).
    pub fn evaluate(strength: f64, dx0: f64, dv0: f64, rate: &CommunicationRate) -> Self {
        let flocking_holds = flocking_condition(strength, dx0, dv0, rate);
        let c_mf_value = c_mf(strength, rate.lipschitz(), dv0);
        if !flocking_holds {
            return TheoryConstants {
                x_inf: f64::INFINITY,
                alpha: 0.0,
                c_mf: c_mf_value,
                c_stab: f64::INFINITY,
                decay_rate: 0.0,
                flocking_holds,
            };
        }
        let x_inf = x_infinity(strength, dx0, dv0, rate).expect("flocking checked");
        let alpha = strength * rate.eval(x_inf);
        let c_stab_value = c_stab(strength, dx0, dv0, dv0, rate, StabilityVariant::Conservative)
            .expect("flocking checked");
        TheoryConstants {
            x_inf,
            alpha,
            c_mf: c_mf_value,
            c_stab: c_stab_value,
            // Velocity-concentration proxy: unit prefactor, exponent alpha.
            decay_rate: alpha,
            flocking_holds,
        }
    }

    /// Flocking envelope D_V(0) exp(-alpha t), also used as the conjectured
    /// decay proxy for the mean-field velocity spread.
    pub fn decay_envelope(&self, dv0: f64, t: f64) -> f64 {
        assert!(t >= 0.0);
        dv0 * (-self.decay_rate * t).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn algebraic(gamma: f64) -> CommunicationRate {
        validate_rate(&RateSpec::Algebraic { gamma }).unwrap()
    }

    #[test]
    fn constant_rate_has_zero_lipschitz() {
        let rate = algebraic(0.0);
        assert_eq!(rate.lipschitz(), 0.0);
        assert_eq!(rate.eval(0.0), 1.0);
        assert_eq!(rate.eval(123.0), 1.0);
    }

    #[test]
    fn inverse_sqrt_lipschitz_matches_closed_form() {
        // max |psi'| = max s (1+s^2)^(-3/2), attained at s = 1/sqrt(2).
        let rate = algebraic(0.5);
        let expected = 2.0 / (3.0 * 3.0f64.sqrt());
        assert!((rate.lipschitz() - expected).abs() < 1e-12);
    }

    #[test]
    fn lipschitz_matches_dense_grid_search() {
        for gamma in [0.25, 0.5, 1.0, 2.0] {
            let rate = algebraic(gamma);
            let h = 2e-6;
            let mut max_slope = 0.0f64;
            let mut s = 0.0;
            while s < 4.0 {
                let slope = (rate.eval(s + h) - rate.eval(s)).abs() / h;
                max_slope = max_slope.max(slope);
                s += h;
            }
            assert!(
                (rate.lipschitz() - max_slope).abs() < 1e-5,
                "gamma={gamma}: cached {} vs grid {max_slope}",
                rate.lipschitz()
            );
        }
    }

    #[test]
    fn increasing_table_is_rejected() {
        let spec = RateSpec::Tabulated {
            samples: vec![(0.0, 0.5), (1.0, 0.9)],
        };
        match validate_rate(&spec) {
            Err(Error::RateAssumption { assumption, .. }) => {
                assert_eq!(assumption, "non-increasing")
            }
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn table_above_one_is_rejected() {
        let spec = RateSpec::Tabulated {
            samples: vec![(0.0, 1.2), (1.0, 0.9)],
        };
        match validate_rate(&spec) {
            Err(Error::RateAssumption { assumption, .. }) => {
                assert_eq!(assumption, "bounded by one")
            }
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn negative_gamma_is_rejected() {
        assert!(validate_rate(&RateSpec::Algebraic { gamma: -0.1 }).is_err());
    }

    #[test]
    fn tabulated_eval_interpolates() {
        let rate = validate_rate(&RateSpec::Tabulated {
            samples: vec![(0.0, 1.0), (2.0, 0.5), (4.0, 0.25)],
        })
        .unwrap();
        assert!((rate.eval(1.0) - 0.75).abs() < 1e-15);
        assert!((rate.eval(3.0) - 0.375).abs() < 1e-15);
        // constant extension
        assert_eq!(rate.eval(10.0), 0.25);
        assert!((rate.lipschitz() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn tail_integral_degenerate_interval_is_zero() {
        let rate = algebraic(0.5);
        assert_eq!(tail_integral(&rate, 2.0, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn tail_integral_closed_forms() {
        let one = algebraic(1.0);
        let got = tail_integral(&one, 0.0, f64::INFINITY).unwrap();
        assert!((got - std::f64::consts::FRAC_PI_2).abs() < 1e-12);

        let half = algebraic(0.5);
        assert!(tail_integral(&half, 0.0, f64::INFINITY)
            .unwrap()
            .is_infinite());
        assert!(tail_integral(&algebraic(0.0), 1.0, f64::INFINITY)
            .unwrap()
            .is_infinite());

        let finite = tail_integral(&half, 1.0, 3.0).unwrap();
        assert!((finite - (3.0f64.asinh() - 1.0f64.asinh())).abs() < 1e-12);
    }

    #[test]
    fn tail_integral_quadrature_cross_check() {
        // closed form vs the numerical-only route
        let one = algebraic(1.0);
        let wide = tail_integral_numeric(&one, 0.0, 1e6).unwrap();
        assert!((wide - 1e6f64.atan()).abs() <= 1e-10 * wide);

        // generic gamma vs a fixed-step Simpson oracle
        let rate = algebraic(0.8);
        let (a, b) = (0.3, 7.0);
        let n = 200_000;
        let h = (b - a) / n as f64;
        let mut oracle = rate.eval(a) + rate.eval(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            oracle += w * rate.eval(a + i as f64 * h);
        }
        oracle *= h / 3.0;
        let got = tail_integral(&rate, a, b).unwrap();
        assert!((got - oracle).abs() < 1e-9, "got {got}, oracle {oracle}");
    }

    #[test]
    fn tail_integral_infinite_for_heavy_algebraic_matches_series() {
        // gamma = 1 has the arctangent closed form; the generic
        // quadrature+series path must agree with it.
        let rate = algebraic(1.0);
        let closed = std::f64::consts::FRAC_PI_2 - 2.0f64.atan();
        let series = algebraic_infinite_tail(&rate, 1.0, 2.0);
        assert!((series - closed).abs() < 1e-11, "series {series} vs {closed}");
    }

    #[test]
    fn tail_integral_additivity() {
        let rate = algebraic(0.8);
        let whole = tail_integral(&rate, 0.5, 9.0).unwrap();
        let parts =
            tail_integral(&rate, 0.5, 3.0).unwrap() + tail_integral(&rate, 3.0, 9.0).unwrap();
        assert!((whole - parts).abs() < 1e-9);
    }

    #[test]
    fn tabulated_tail_is_divergent_under_constant_extension() {
        let rate = validate_rate(&RateSpec::Tabulated {
            samples: vec![(0.0, 1.0), (1.0, 0.5)],
        })
        .unwrap();
        assert!(tail_integral(&rate, 0.0, f64::INFINITY)
            .unwrap()
            .is_infinite());
    }

    #[test]
    fn invalid_interval_is_rejected() {
        let rate = algebraic(0.5);
        assert!(matches!(
            tail_integral(&rate, 2.0, 1.0),
            Err(Error::InvalidInterval { .. })
        ));
    }

    #[test]
    fn flocking_condition_cases() {
        // divergent tail: any strength works
        assert!(flocking_condition(1e-9, 5.0, 100.0, &algebraic(0.5)));
        // zero velocity diameter: any strength works
        assert!(flocking_condition(1e-9, 5.0, 0.0, &algebraic(1.0)));
        // gamma = 1 from dx0 = 0: threshold is 2/pi
        let one = algebraic(1.0);
        let threshold = 2.0 / std::f64::consts::PI;
        assert!(flocking_condition(threshold * 1.01, 0.0, 1.0, &one));
        assert!(!flocking_condition(threshold * 0.99, 0.0, 1.0, &one));
    }

    #[test]
    fn x_infinity_closed_forms() {
        // zero velocity diameter
        assert_eq!(x_infinity(2.0, 3.0, 0.0, &algebraic(1.0)).unwrap(), 3.0);
        // constant rate: the integral is the length
        let got = x_infinity(1.0, 2.0, 3.0, &algebraic(0.0)).unwrap();
        assert!((got - 5.0).abs() < 1e-12);
        // inverse-sqrt rate from 0 with target 1
        let got = x_infinity(1.0, 0.0, 1.0, &algebraic(0.5)).unwrap();
        assert!((got - 1.0f64.sinh()).abs() < 1e-12);
    }

    #[test]
    fn x_infinity_bisection_agrees_with_closed_form() {
        let half = algebraic(0.5);
        let direct = x_infinity(1.0, 0.0, 1.0, &half).unwrap();
        let bisect = x_infinity_bisection(1.0, 0.0, 1.0, &half).unwrap();
        assert!((direct - bisect).abs() < 1e-10);
    }

    #[test]
    fn x_infinity_rejects_without_flocking() {
        let one = algebraic(1.0);
        assert!(matches!(
            x_infinity(0.1, 0.0, 1.0, &one),
            Err(Error::FlockingViolated { .. })
        ));
    }

    #[test]
    fn c_mf_values() {
        // vanishing strength with zero Lipschitz constant: exp(1)
        assert!((c_mf(1e-13, 0.0, 7.0) - 1.0f64.exp()).abs() < 1e-9);
        assert!((c_mf(1.0, 0.0, 123.0) - 2.0f64.exp()).abs() < 1e-12);
        // the composed case: exponent 1 + 2*5*(2/(3 sqrt 3))*(2 sqrt 2) + 5
        let l = 2.0 / (3.0 * 3.0f64.sqrt());
        let d = 2.0 * 2.0f64.sqrt();
        let exponent = 1.0 + 10.0 * l * d + 5.0;
        assert!((exponent - 16.886621079036347).abs() < 1e-12);
        assert!((c_mf(5.0, l, d) - exponent.exp()).abs() < 1e-6 * exponent.exp());
    }

    #[test]
    fn c_stab_degenerate_and_ordering() {
        // zero second diameter and alpha = K = 1 (constant rate):
        // sqrt(2) * max(1, 1) * exp(0)
        let got = c_stab(1.0, 2.0, 0.5, 0.0, &algebraic(0.0), StabilityVariant::Conservative)
            .unwrap();
        assert!((got - std::f64::consts::SQRT_2).abs() < 1e-12);

        let half = algebraic(0.5);
        let tight = c_stab(5.0, 8.0, 2.0, 2.0, &half, StabilityVariant::Tight).unwrap();
        let cons = c_stab(5.0, 8.0, 2.0, 2.0, &half, StabilityVariant::Conservative).unwrap();
        assert!(tight <= cons);
    }

    #[test]
    fn c_stab_composed_chain() {
        let half = algebraic(0.5);
        let dx0 = 6.0 * 2.0f64.sqrt();
        let dv0 = 2.0 * 2.0f64.sqrt();
        let x_inf = (dx0.asinh() + dv0 / 5.0).sinh();
        let alpha = 5.0 / (1.0 + x_inf * x_inf).sqrt();
        let gamma_stab = 2.0f64.sqrt() * 5.0 * (2.0 / (3.0 * 3.0f64.sqrt())) * dv0;
        let expected =
            2.0f64.sqrt() * 5.0f64.max(1.0 / alpha) * (gamma_stab / (alpha * alpha)).exp();
        let got =
            c_stab(5.0, dx0, dv0, dv0, &half, StabilityVariant::Conservative).unwrap();
        assert!((got - expected).abs() <= 1e-10 * expected);

        // monotone in each diameter argument
        for (bump_x, bump_v, bump_w) in [(0.5, 0.0, 0.0), (0.0, 0.5, 0.0), (0.0, 0.0, 0.5)] {
            let bigger = c_stab(
                5.0,
                dx0 + bump_x,
                dv0 + bump_v,
                dv0 + bump_w,
                &half,
                StabilityVariant::Conservative,
            )
            .unwrap();
            assert!(bigger >= got);
        }
    }

    #[test]
    fn decay_envelope_values() {
        let mut constants = TheoryConstants::evaluate(5.0, 8.0, 2.0, &algebraic(0.5));
        assert!((constants.decay_envelope(3.0, 0.0) - 3.0).abs() < 1e-15);
        assert_eq!(constants.decay_envelope(0.0, 17.0), 0.0);
        constants.decay_rate = 2.0f64.ln();
        assert!((constants.decay_envelope(4.0, 1.0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn constants_without_flocking_are_marked() {
        let constants = TheoryConstants::evaluate(0.1, 0.0, 1.0, &algebraic(1.0));
        assert!(!constants.flocking_holds);
        assert!(constants.x_inf.is_infinite());
        assert!(constants.c_stab.is_infinite());
        assert!(constants.c_mf.is_finite());
    }
}
