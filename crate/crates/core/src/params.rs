//! Parameter types shared by the bound calculators, verifiers and simulator.

use serde::{Deserialize, Serialize};

use crate::error::{check_delta, check_horizon, check_nonnegative, check_positive, Error, Result};

/// Envelope `(b, c)` for two-sided conditional tails:
/// `max(Pr(Z > a), Pr(Z < -a)) <= b * exp(-c * a^2)` for every `a > 0`.
///
/// `b >= 1` and `c > 0` are enforced at construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct SubgaussianParams {
    b: f64,
    c: f64,
}

#[derive(Deserialize)]
struct RawParams {
    b: f64,
    c: f64,
}

impl TryFrom<RawParams> for SubgaussianParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        SubgaussianParams::new(raw.b, raw.c)
    }
}

impl SubgaussianParams {
    pub fn new(b: f64, c: f64) -> Result<Self> {
        if !(b >= 1.0 && b.is_finite()) {
            return Err(Error::domain("b", b, "a finite value >= 1"));
        }
        check_positive("c", c)?;
        Ok(Self { b, c })
    }

    #[inline]
    pub fn b(&self) -> f64 {
        self.b
    }

    #[inline]
    pub fn c(&self) -> f64 {
        self.c
    }

    /// `b * exp(-c a^2)`.
    pub fn envelope(&self, a: f64) -> f64 {
        self.b * (-self.c * a * a).exp()
    }

    /// `ln b - c a^2`, the envelope in log-space.
    pub fn log_envelope(&self, a: f64) -> f64 {
        self.b.ln() - self.c * a * a
    }

    /// Breakpoint `sqrt(c)/2` between the two regimes of the MGF argument.
    pub fn small_s_limit(&self) -> f64 {
        0.5 * self.c.sqrt()
    }
}

/// Horizon, confidence and threshold of a deviation statement, with at most
/// one of the three left unknown.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DeviationQuery {
    pub horizon: Option<u64>,
    pub delta: Option<f64>,
    pub epsilon: Option<f64>,
}

/// A fully determined deviation statement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub horizon: u64,
    pub delta: f64,
    pub epsilon: f64,
}

impl DeviationQuery {
    pub fn new(horizon: Option<u64>, delta: Option<f64>, epsilon: Option<f64>) -> Result<Self> {
        if let Some(t) = horizon {
            check_horizon(t)?;
        }
        if let Some(d) = delta {
            check_delta(d)?;
        }
        if let Some(e) = epsilon {
            check_nonnegative("epsilon", e)?;
        }
        let unknowns = [horizon.is_none(), delta.is_none(), epsilon.is_none()]
            .iter()
            .filter(|u| **u)
            .count();
        if unknowns > 1 {
            return Err(Error::Precondition(
                "at most one of T, delta, epsilon may be left unknown".into(),
            ));
        }
        Ok(Self {
            horizon,
            delta,
            epsilon,
        })
    }

    /// Fill in the unknown under the subgaussian bound. When nothing is
    /// unknown the query is returned as given.
    pub fn solve(&self, params: &SubgaussianParams) -> Result<Deviation> {
        use crate::bounds::{required_horizon, subgaussian_delta, subgaussian_epsilon};
        match (self.horizon, self.delta, self.epsilon) {
            (Some(horizon), Some(delta), None) => Ok(Deviation {
                horizon,
                delta,
                epsilon: subgaussian_epsilon(params, horizon, delta)?,
            }),
            (Some(horizon), None, Some(epsilon)) => Ok(Deviation {
                horizon,
                delta: subgaussian_delta(params, horizon, epsilon)?,
                epsilon,
            }),
            (None, Some(delta), Some(epsilon)) => Ok(Deviation {
                horizon: required_horizon(params, epsilon, delta)?,
                delta,
                epsilon,
            }),
            (Some(horizon), Some(delta), Some(epsilon)) => Ok(Deviation {
                horizon,
                delta,
                epsilon,
            }),
            _ => Err(Error::Precondition(
                "at most one of T, delta, epsilon may be left unknown".into(),
            )),
        }
    }
}

/// A point on the Chernoff exponent curve `s -> -s T eps + 7 T b s^2 / c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChernoffPoint {
    pub multiplier: f64,
    pub exponent: f64,
}

impl ChernoffPoint {
    pub fn at(s: f64, epsilon: f64, horizon: u64, params: &SubgaussianParams) -> Result<Self> {
        Ok(Self {
            multiplier: s,
            exponent: crate::bounds::chernoff_exponent(s, epsilon, horizon, params)?,
        })
    }

    /// The minimizing point `s = c eps / (14 b)`.
    pub fn optimal(epsilon: f64, horizon: u64, params: &SubgaussianParams) -> Result<Self> {
        let s = crate::bounds::optimal_s(epsilon, params)?;
        Self::at(s, epsilon, horizon, params)
    }

    /// Upper bound on the deviation probability implied by this point.
    pub fn probability_bound(&self) -> f64 {
        self.exponent.exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_b_below_one() {
        assert!(matches!(
            SubgaussianParams::new(0.999, 1.0),
            Err(Error::Domain { name: "b", .. })
        ));
        assert!(SubgaussianParams::new(1.0, 1.0).is_ok());
    }

    #[test]
    fn rejects_nonpositive_c() {
        for c in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(SubgaussianParams::new(2.0, c).is_err(), "c = {c}");
        }
    }

    #[test]
    fn deserialization_validates() {
        let ok: SubgaussianParams = serde_json::from_str(r#"{"b":2.0,"c":0.5}"#).unwrap();
        assert_eq!(ok.b(), 2.0);
        assert!(serde_json::from_str::<SubgaussianParams>(r#"{"b":0.5,"c":0.5}"#).is_err());
    }

    #[test]
    fn query_allows_at_most_one_unknown() {
        assert!(DeviationQuery::new(Some(10), None, None).is_err());
        assert!(DeviationQuery::new(Some(10), Some(0.1), None).is_ok());
        assert!(DeviationQuery::new(Some(0), Some(0.1), None).is_err());
        assert!(DeviationQuery::new(Some(10), Some(1.0), None).is_err());
    }

    #[test]
    fn query_solves_each_unknown() {
        let p = SubgaussianParams::new(1.0, 1.0).unwrap();
        let e1 = (-1.0f64).exp();
        let d = DeviationQuery::new(Some(28), Some(e1), None)
            .unwrap()
            .solve(&p)
            .unwrap();
        assert!((d.epsilon - 1.0).abs() < 1e-12);
        let d = DeviationQuery::new(Some(28), None, Some(1.0))
            .unwrap()
            .solve(&p)
            .unwrap();
        assert!((d.delta - e1).abs() < 1e-15);
        let d = DeviationQuery::new(None, Some((-2.0f64).exp()), Some(1.0))
            .unwrap()
            .solve(&p)
            .unwrap();
        assert_eq!(d.horizon, 56);
    }

    #[test]
    fn chernoff_point_at_zero() {
        let p = SubgaussianParams::new(3.0, 0.2).unwrap();
        let pt = ChernoffPoint::at(0.0, 0.7, 40, &p).unwrap();
        assert_eq!(pt.exponent, 0.0);
        assert_eq!(pt.probability_bound(), 1.0);
    }
}
