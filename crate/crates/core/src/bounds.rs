//! Closed-form deviation bounds.
//!
//! For a martingale difference sequence `Z_1..Z_T` whose conditional tails
//! satisfy `max(Pr(Z_t > a | past), Pr(Z_t < -a | past)) <= b exp(-c a^2)`,
//! the Chernoff method with the per-step MGF bound `E[e^{sZ}] <= e^{7bs^2/c}`
//! gives
//!
//! ```text
//! Pr( (1/T) sum Z_t > eps ) <= exp(-s T eps + 7 T b s^2 / c)
//! ```
//!
//! for every `s >= 0`. The exponent is minimized at `s = c eps / (14 b)`, where
//! it equals `-c T eps^2 / (28 b)`. Inverting gives the deviation
//!
//! ```text
//! eps = sqrt(28 b ln(1/delta) / (c T))
//! ```
//!
//! The bounded-increment case `|Z_t| <= B` has the classical form
//! `B sqrt(2 ln(1/delta) / T)`.
//!
//! All logarithms are natural.

use crate::error::{check_delta, check_horizon, check_nonnegative, check_positive, Error, Result};
use crate::params::SubgaussianParams;

/// Constant in the per-step MGF exponent `K b s^2 / c`.
pub const MGF_CONSTANT: f64 = 7.0;
/// Constant of the small-s regime (`s <= sqrt(c)/2`).
pub const MGF_CONSTANT_SMALL_S: f64 = 6.0;
/// `4 * MGF_CONSTANT`, the constant under the square root of the deviation.
pub const DEVIATION_CONSTANT: f64 = 4.0 * MGF_CONSTANT;

/// Classical Azuma deviation for increments bounded by `bound` almost surely.
pub fn classic_azuma_epsilon(bound: f64, horizon: u64, delta: f64) -> Result<f64> {
    check_positive("bound_B", bound)?;
    check_horizon(horizon)?;
    check_delta(delta)?;
    Ok(bound * (2.0 * (1.0 / delta).ln() / horizon as f64).sqrt())
}

/// Deviation `eps` such that the time average exceeds it with probability at most `delta`.
pub fn subgaussian_epsilon(params: &SubgaussianParams, horizon: u64, delta: f64) -> Result<f64> {
    check_horizon(horizon)?;
    check_delta(delta)?;
    Ok(epsilon_with_constant(
        DEVIATION_CONSTANT,
        params,
        horizon as f64,
        -delta.ln(),
    ))
}

/// `sqrt(k b L / (c T))` with `L = ln(1/delta)`; shared with constant-tightening reports.
pub fn epsilon_with_constant(
    k: f64,
    params: &SubgaussianParams,
    horizon: f64,
    log_inv_delta: f64,
) -> f64 {
    (k * params.b() * log_inv_delta / (params.c() * horizon)).sqrt()
}

/// Probability bound `exp(-c T eps^2 / (28 b))` for a given deviation.
pub fn subgaussian_delta(params: &SubgaussianParams, horizon: u64, epsilon: f64) -> Result<f64> {
    check_horizon(horizon)?;
    check_nonnegative("epsilon", epsilon)?;
    if epsilon == 0.0 {
        return Ok(1.0);
    }
    Ok(
        (-params.c() * horizon as f64 * epsilon * epsilon / (DEVIATION_CONSTANT * params.b()))
            .exp(),
    )
}

/// Smallest horizon whose deviation at `delta` is at most `epsilon`.
pub fn required_horizon(params: &SubgaussianParams, epsilon: f64, delta: f64) -> Result<u64> {
    check_positive("epsilon", epsilon)?;
    check_delta(delta)?;
    let raw = DEVIATION_CONSTANT * params.b() * (-delta.ln()) / (params.c() * epsilon * epsilon);
    // The f64 ceiling can sit one step off the exact answer; settle it against
    // the forward formula, which is what callers compare with.
    let limit = u64::MAX / 2;
    let ceil = raw.ceil();
    if !ceil.is_finite() || ceil >= limit as f64 {
        return Err(Error::Overflow {
            what: "required horizon",
            value: raw,
            limit,
        });
    }
    let mut horizon = (ceil as u64).max(1);
    while subgaussian_epsilon(params, horizon, delta)? > epsilon {
        horizon += 1;
    }
    while horizon > 1 && subgaussian_epsilon(params, horizon - 1, delta)? <= epsilon {
        horizon -= 1;
    }
    Ok(horizon)
}

/// Exponent of the MGF envelope, i.e. `ln` of the bound on `E[e^{sX}]`.
///
/// With `piecewise` set, the small-s regime `s <= sqrt(c)/2` (boundary
/// included) uses the constant 6 instead of 7.
pub fn mgf_envelope(s: f64, params: &SubgaussianParams, piecewise: bool) -> Result<f64> {
    check_nonnegative("s", s)?;
    let quad = params.b() * s * s / params.c();
    let k = if piecewise && s * s <= params.c() / 4.0 {
        MGF_CONSTANT_SMALL_S
    } else {
        MGF_CONSTANT
    };
    Ok(k * quad)
}

/// `2b/c`, an upper bound on `E[X^2]` under the tail envelope.
pub fn second_moment_envelope(params: &SubgaussianParams) -> f64 {
    2.0 * params.b() / params.c()
}

/// Minimizer `c eps / (14 b)` of [`chernoff_exponent`].
pub fn optimal_s(epsilon: f64, params: &SubgaussianParams) -> Result<f64> {
    check_positive("epsilon", epsilon)?;
    Ok(params.c() * epsilon / (2.0 * MGF_CONSTANT * params.b()))
}

/// `-s T eps + 7 T b s^2 / c`.
pub fn chernoff_exponent(
    s: f64,
    epsilon: f64,
    horizon: u64,
    params: &SubgaussianParams,
) -> Result<f64> {
    check_nonnegative("s", s)?;
    check_horizon(horizon)?;
    if !epsilon.is_finite() {
        return Err(Error::domain("epsilon", epsilon, "a finite value"));
    }
    let t = horizon as f64;
    Ok(-s * t * epsilon + MGF_CONSTANT * t * params.b() * s * s / params.c())
}

/// Envelope parameters `(e, 1/B^2)` for increments bounded by `B`.
///
/// `Pr(|X| > a) = 0 <= e exp(-a^2/B^2)` for `a >= B`, and the envelope is at
/// least `e * e^{-1} = 1` for `a < B`. Among valid `(b, c)` with `c B^2 = x`,
/// `b = e^x` is the least and the resulting deviation scales as
/// `sqrt(e^x / x)`, minimized at `x = 1`.
pub fn params_from_bound(bound: f64) -> Result<SubgaussianParams> {
    check_positive("bound_B", bound)?;
    SubgaussianParams::new(std::f64::consts::E, 1.0 / (bound * bound))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::E;

    fn p(b: f64, c: f64) -> SubgaussianParams {
        SubgaussianParams::new(b, c).unwrap()
    }

    #[test]
    fn classic_examples() {
        let d = (-1.0f64).exp();
        assert_relative_eq!(
            classic_azuma_epsilon(1.0, 2, d).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            classic_azuma_epsilon(1.0, 8, d).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        // mpmath, 30 digits: 0.643789807886804171890855071087
        assert!((classic_azuma_epsilon(3.0, 200, 0.01).unwrap() - 0.643_790).abs() < 1e-6);
        assert_relative_eq!(
            classic_azuma_epsilon(3.0, 200, 0.01).unwrap(),
            0.643_789_807_886_804_2,
            max_relative = 1e-14
        );
    }

    #[test]
    fn classic_domain_errors() {
        assert!(classic_azuma_epsilon(0.0, 2, 0.1).is_err());
        assert!(classic_azuma_epsilon(1.0, 0, 0.1).is_err());
        assert!(classic_azuma_epsilon(1.0, 2, 0.0).is_err());
        assert!(classic_azuma_epsilon(1.0, 2, 1.0).is_err());
    }

    #[test]
    fn subgaussian_epsilon_examples() {
        let d = (-1.0f64).exp();
        assert_relative_eq!(
            subgaussian_epsilon(&p(1.0, 1.0), 28, d).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            subgaussian_epsilon(&p(2.0, 1.0), 28, d).unwrap(),
            2f64.sqrt(),
            epsilon = 1e-12
        );
        // mpmath: 1.29522587728559336266339961097
        assert_relative_eq!(
            subgaussian_epsilon(&p(1.0, 0.5), 100, 0.05).unwrap(),
            1.295_225_877_285_593_4,
            max_relative = 1e-14
        );
    }

    #[test]
    fn subgaussian_delta_examples() {
        assert_relative_eq!(
            subgaussian_delta(&p(1.0, 1.0), 28, 1.0).unwrap(),
            (-1.0f64).exp(),
            max_relative = 1e-15
        );
        assert_eq!(subgaussian_delta(&p(5.0, 0.1), 7, 0.0).unwrap(), 1.0);
        // mpmath: 0.0499999716173504625656145508157
        assert!((subgaussian_delta(&p(1.0, 0.5), 100, 1.295_226).unwrap() - 0.05).abs() < 1e-6);
        assert!(subgaussian_delta(&p(1.0, 1.0), 28, -0.1).is_err());
    }

    #[test]
    fn required_horizon_examples() {
        let one = p(1.0, 1.0);
        assert_eq!(required_horizon(&one, 1.0, (-1.0f64).exp()).unwrap(), 28);
        assert_eq!(required_horizon(&one, 1.0, (-2.0f64).exp()).unwrap(), 56);
        // mpmath: 28 ln 20 / (0.5 * 1.69) = 99.2668682361...
        assert_eq!(required_horizon(&p(1.0, 0.5), 1.3, 0.05).unwrap(), 100);
    }

    #[test]
    fn required_horizon_overflow() {
        let err = required_horizon(&p(1.0, 1.0), 1e-12, 0.01).unwrap_err();
        assert!(matches!(err, Error::Overflow { .. }));
        assert!(required_horizon(&p(1.0, 1.0), 0.0, 0.01).is_err());
    }

    #[test]
    fn mgf_envelope_examples() {
        assert_eq!(mgf_envelope(1.0, &p(1.0, 1.0), false).unwrap(), 7.0);
        assert_eq!(mgf_envelope(0.5, &p(1.0, 1.0), true).unwrap(), 1.5);
        assert_relative_eq!(
            mgf_envelope(0.1, &p(2.0, 4.0), true).unwrap(),
            0.03,
            max_relative = 1e-14
        );
        // just past the breakpoint takes the 7 branch
        assert_relative_eq!(
            mgf_envelope(0.500_001, &p(1.0, 1.0), true).unwrap(),
            7.0 * 0.500_001f64.powi(2),
            max_relative = 1e-15
        );
        assert!(mgf_envelope(-0.1, &p(1.0, 1.0), true).is_err());
    }

    #[test]
    fn second_moment_examples() {
        assert_eq!(second_moment_envelope(&p(1.0, 1.0)), 2.0);
        assert_eq!(second_moment_envelope(&p(3.0, 2.0)), 3.0);
        // N(0,1) meets the envelope with (1, 0.5); its variance is 1.
        assert!(second_moment_envelope(&p(1.0, 0.5)) >= 1.0);
        assert_eq!(second_moment_envelope(&p(1.0, 0.5)), 4.0);
    }

    #[test]
    fn optimal_s_examples() {
        assert_relative_eq!(optimal_s(14.0, &p(1.0, 1.0)).unwrap(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(
            optimal_s(1.0, &p(1.0, 1.0)).unwrap(),
            1.0 / 14.0,
            epsilon = 1e-15
        );
        assert!(optimal_s(0.0, &p(1.0, 1.0)).is_err());
    }

    #[test]
    fn optimal_s_matches_grid_argmin() {
        let params = p(1.0, 1.0);
        let step = 1e-4;
        let (best_s, _) = (0..=10_000)
            .map(|i| i as f64 * step)
            .map(|s| (s, chernoff_exponent(s, 1.0, 10, &params).unwrap()))
            .fold(
                (0.0, f64::INFINITY),
                |acc, x| if x.1 < acc.1 { x } else { acc },
            );
        assert!((best_s - 1.0 / 14.0).abs() <= step);
    }

    #[test]
    fn chernoff_exponent_examples() {
        assert_eq!(chernoff_exponent(0.0, 3.0, 9, &p(2.0, 0.3)).unwrap(), 0.0);
        assert_relative_eq!(
            chernoff_exponent(1.0 / 14.0, 1.0, 28, &p(1.0, 1.0)).unwrap(),
            -1.0,
            epsilon = 1e-14
        );
        assert_relative_eq!(
            chernoff_exponent(1.0, 1.0, 1, &p(1.0, 7.0)).unwrap(),
            0.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn params_from_bound_examples() {
        let q = params_from_bound(1.0).unwrap();
        assert_eq!(q.b(), E);
        assert_eq!(q.c(), 1.0);
        let q = params_from_bound(2.0).unwrap();
        assert_eq!(q.c(), 0.25);
        assert!(q.envelope(1.0) >= 1.0);
        assert!(params_from_bound(-1.0).is_err());
    }

    #[test]
    fn params_from_bound_minimizes_deviation_on_grid() {
        // For |X| <= B the tightest admissible b at c is e^{c B^2}; the
        // deviation is proportional to sqrt(b / c).
        for bound in [1.0, 2.0] {
            let (best_c, _) = (1..=40_000)
                .map(|i| i as f64 * 1e-4 / (bound * bound))
                .map(|c: f64| (c, (c * bound * bound).exp() / c))
                .fold(
                    (0.0, f64::INFINITY),
                    |acc, x| if x.1 < acc.1 { x } else { acc },
                );
            let q = params_from_bound(bound).unwrap();
            assert!((best_c - q.c()).abs() <= 1e-4 / (bound * bound));
            assert_relative_eq!((best_c * bound * bound).exp(), q.b(), max_relative = 1e-3);
        }
    }

    #[test]
    fn envelope_valid_below_bound() {
        let q = params_from_bound(1.0).unwrap();
        assert!((q.envelope(0.5) - E * (-0.25f64).exp()).abs() < 1e-15);
        assert!(q.envelope(0.5) > 2.117 && q.envelope(0.5) < 2.118);
    }
}
