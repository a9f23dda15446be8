//! Martingale difference generators with declared conditional envelopes.
//!
//! A generator keeps its history in a fixed-size [`MarkovState`]; every
//! shipped rule is Markov in that state. Each step draws `Z_t` from a
//! conditional law that has mean zero and meets the declared `(b, c)`
//! envelope for every state:
//!
//! | family            | conditional law                       | declared `(b, c)`        |
//! |-------------------|---------------------------------------|--------------------------|
//! | `IidStep`         | the wrapped distribution              | the distribution's       |
//! | `ScaledGaussian`  | `N(0, sigma_t^2)`, `sigma_t` in range | `(1, 1/(2 sigma_max^2))` |
//! | `BoundedSignFlip` | `+-m_t`, `0 < m_t <= max_magnitude`   | `(e, 1/max_magnitude^2)` |
//! | `ConstantZero`    | point mass at 0                       | any                      |

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bounds::params_from_bound;
use crate::distribution::DistributionSpec;
use crate::error::{check_positive, Error, Result};
use crate::params::SubgaussianParams;

/// Switch probability of the default two-regime scale rule.
pub const DEFAULT_SWITCH_PROB: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleRule {
    /// Alternate between `sigma_min` and `sigma_max`, switching after each
    /// step with probability `switch_prob`. Starts at `sigma_min`.
    MarkovSwitch { switch_prob: f64 },
}

impl Default for ScaleRule {
    fn default() -> Self {
        ScaleRule::MarkovSwitch {
            switch_prob: DEFAULT_SWITCH_PROB,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MagnitudeRule {
    /// `m_t = max_magnitude`.
    #[default]
    Constant,
    /// `m_t = max_magnitude` after a non-negative step, `factor * max_magnitude`
    /// after a negative one.
    ShrinkAfterDown { factor: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorFamily {
    IidStep {
        dist: DistributionSpec,
    },
    ScaledGaussian {
        sigma_min: f64,
        sigma_max: f64,
        #[serde(default)]
        rule: ScaleRule,
    },
    BoundedSignFlip {
        max_magnitude: f64,
        #[serde(default)]
        rule: MagnitudeRule,
    },
    ConstantZero,
}

/// Generator state. Slot 0 holds the current scale (`ScaledGaussian`) or the
/// previous step (`BoundedSignFlip`); slot 1 is unused by the shipped rules.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MarkovState(pub [f64; 2]);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGenerator")]
pub struct GeneratorSpec {
    family: GeneratorFamily,
    declared_params: SubgaussianParams,
}

#[derive(Deserialize)]
struct RawGenerator {
    family: GeneratorFamily,
    #[serde(default)]
    declared_params: Option<SubgaussianParams>,
}

impl TryFrom<RawGenerator> for GeneratorSpec {
    type Error = Error;

    fn try_from(raw: RawGenerator) -> Result<Self> {
        let spec = GeneratorSpec::new(raw.family)?;
        match raw.declared_params {
            None => Ok(spec),
            Some(p) if p == spec.declared_params => Ok(spec),
            Some(p) if matches!(raw.family, GeneratorFamily::ConstantZero) => spec.with_params(p),
            Some(p) => Err(Error::Precondition(format!(
                "declared_params of {} are fixed by construction to (b={}, c={}), got (b={}, c={})",
                spec.label(),
                spec.declared_params.b(),
                spec.declared_params.c(),
                p.b(),
                p.c()
            ))),
        }
    }
}

impl GeneratorSpec {
    pub fn new(family: GeneratorFamily) -> Result<Self> {
        let declared_params = match family {
            GeneratorFamily::IidStep { dist } => *dist.declared_params().ok_or_else(|| {
                Error::Precondition(format!(
                    "{} has no subgaussian envelope and cannot drive a generator",
                    dist.family().name()
                ))
            })?,
            GeneratorFamily::ScaledGaussian {
                sigma_min,
                sigma_max,
                rule,
            } => {
                check_positive("sigma_min", sigma_min)?;
                check_positive("sigma_max", sigma_max)?;
                if sigma_min > sigma_max {
                    return Err(Error::domain(
                        "sigma_min",
                        sigma_min,
                        "sigma_min <= sigma_max",
                    ));
                }
                let ScaleRule::MarkovSwitch { switch_prob } = rule;
                if !(0.0..=1.0).contains(&switch_prob) {
                    return Err(Error::domain(
                        "switch_prob",
                        switch_prob,
                        "a probability in [0, 1]",
                    ));
                }
                SubgaussianParams::new(1.0, 1.0 / (2.0 * sigma_max * sigma_max))?
            }
            GeneratorFamily::BoundedSignFlip {
                max_magnitude,
                rule,
            } => {
                check_positive("max_magnitude", max_magnitude)?;
                if let MagnitudeRule::ShrinkAfterDown { factor } = rule {
                    if !(factor > 0.0 && factor <= 1.0) {
                        return Err(Error::domain("factor", factor, "0 < factor <= 1"));
                    }
                }
                params_from_bound(max_magnitude)?
            }
            GeneratorFamily::ConstantZero => SubgaussianParams::new(1.0, 1.0)?,
        };
        Ok(Self {
            family,
            declared_params,
        })
    }

    pub fn iid(dist: DistributionSpec) -> Result<Self> {
        Self::new(GeneratorFamily::IidStep { dist })
    }

    pub fn scaled_gaussian(sigma_min: f64, sigma_max: f64) -> Result<Self> {
        Self::new(GeneratorFamily::ScaledGaussian {
            sigma_min,
            sigma_max,
            rule: ScaleRule::default(),
        })
    }

    pub fn sign_flip(max_magnitude: f64, rule: MagnitudeRule) -> Result<Self> {
        Self::new(GeneratorFamily::BoundedSignFlip {
            max_magnitude,
            rule,
        })
    }

    pub fn constant_zero() -> Self {
        Self::new(GeneratorFamily::ConstantZero).expect("valid")
    }

    /// Only `ConstantZero` accepts arbitrary declared parameters.
    pub fn with_params(mut self, params: SubgaussianParams) -> Result<Self> {
        if !matches!(self.family, GeneratorFamily::ConstantZero) {
            return Err(Error::Precondition(format!(
                "declared_params of {} are fixed by construction",
                self.label()
            )));
        }
        self.declared_params = params;
        Ok(self)
    }

    pub fn family(&self) -> &GeneratorFamily {
        &self.family
    }

    pub fn declared_params(&self) -> &SubgaussianParams {
        &self.declared_params
    }

    pub fn is_degenerate(&self) -> bool {
        matches!(self.family, GeneratorFamily::ConstantZero)
    }

    /// Almost-sure bound on `|Z_t|`, when the family has one.
    pub fn hard_bound(&self) -> Option<f64> {
        match self.family {
            GeneratorFamily::IidStep { dist } => dist.hard_bound(),
            GeneratorFamily::BoundedSignFlip { max_magnitude, .. } => Some(max_magnitude),
            _ => None,
        }
    }

    pub fn label(&self) -> String {
        match self.family {
            GeneratorFamily::IidStep { dist } => {
                format!("iid-{}(scale={})", dist.family().name(), dist.scale())
            }
            GeneratorFamily::ScaledGaussian {
                sigma_min,
                sigma_max,
                ..
            } => {
                format!("scaled-gaussian(sigma={sigma_min}..{sigma_max})")
            }
            GeneratorFamily::BoundedSignFlip { max_magnitude, .. } => {
                format!("sign-flip(m={max_magnitude})")
            }
            GeneratorFamily::ConstantZero => "constant-zero".into(),
        }
    }

    pub fn initial_state(&self) -> MarkovState {
        match self.family {
            GeneratorFamily::ScaledGaussian { sigma_min, .. } => MarkovState([sigma_min, 0.0]),
            _ => MarkovState::default(),
        }
    }

    /// Reject states the generator could never reach.
    pub fn check_state(&self, state: &MarkovState) -> Result<()> {
        match self.family {
            GeneratorFamily::ScaledGaussian {
                sigma_min,
                sigma_max,
                ..
            } if state.0[0] != sigma_min && state.0[0] != sigma_max => {
                Err(Error::domain("state", state.0[0], "sigma_min or sigma_max"))
            }
            GeneratorFamily::BoundedSignFlip { max_magnitude, .. }
                if state.0[0].abs() > max_magnitude =>
            {
                Err(Error::domain(
                    "state",
                    state.0[0],
                    "|previous step| <= max_magnitude",
                ))
            }
            _ if !state.0.iter().all(|v| v.is_finite()) => {
                Err(Error::domain("state", f64::NAN, "finite entries"))
            }
            _ => Ok(()),
        }
    }

    /// State after observing the step values `prefix`, for rules whose state
    /// is a function of the path. `ScaledGaussian` regimes are latent and
    /// cannot be recovered this way.
    pub fn replay(&self, prefix: &[f64]) -> Result<MarkovState> {
        let state = match self.family {
            GeneratorFamily::ScaledGaussian { .. } if !prefix.is_empty() => {
                return Err(Error::Precondition(
                    "scaled-gaussian regimes are not determined by the path; pass a state".into(),
                ))
            }
            GeneratorFamily::BoundedSignFlip { .. } => {
                MarkovState([prefix.last().copied().unwrap_or(0.0), 0.0])
            }
            _ => self.initial_state(),
        };
        self.check_state(&state)?;
        Ok(state)
    }

    /// Draw `Z_t` given `state`, then advance `state`.
    pub fn step<R: Rng + ?Sized>(&self, state: &mut MarkovState, rng: &mut R) -> f64 {
        match self.family {
            GeneratorFamily::IidStep { dist } => dist.sample(rng),
            GeneratorFamily::ScaledGaussian {
                sigma_min,
                sigma_max,
                rule: ScaleRule::MarkovSwitch { switch_prob },
            } => {
                let sigma = state.0[0];
                let z: f64 = rng.sample(StandardNormal);
                if rng.random::<f64>() < switch_prob {
                    state.0[0] = if sigma == sigma_min {
                        sigma_max
                    } else {
                        sigma_min
                    };
                }
                sigma * z
            }
            GeneratorFamily::BoundedSignFlip {
                max_magnitude,
                rule,
            } => {
                let magnitude = match rule {
                    MagnitudeRule::Constant => max_magnitude,
                    MagnitudeRule::ShrinkAfterDown { factor } => {
                        if state.0[0] < 0.0 {
                            factor * max_magnitude
                        } else {
                            max_magnitude
                        }
                    }
                };
                let z = if rng.random::<bool>() {
                    magnitude
                } else {
                    -magnitude
                };
                state.0[0] = z;
                z
            }
            GeneratorFamily::ConstantZero => 0.0,
        }
    }
}
