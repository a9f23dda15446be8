//! Zero-mean reference distributions with closed-form tails and MGFs.
//!
//! These are the oracles the verifiers test the MGF argument against. All
//! four families are symmetric about zero. Laplace is the odd one out: its
//! tail decays only exponentially, so no `(b, c)` envelope holds for every
//! `a`, and it ships without declared parameters as a negative control.

use std::f64::consts::{LN_2, PI, SQRT_2};

use libm::erfc;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bounds::params_from_bound;
use crate::error::{check_positive, Error, Result};
use crate::params::SubgaussianParams;
use crate::quadrature;

/// Relative tolerance of the quadrature fallback for `ln E[e^{sX}]`.
pub const QUADRATURE_REL_TOL: f64 = 1e-9;
/// Half-width of the Gaussian integration window, in standard deviations.
pub const GAUSSIAN_WINDOW_SIGMAS: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    CenteredGaussian { sigma: f64 },
    UniformSymmetric { half_width: f64 },
    Rademacher { magnitude: f64 },
    Laplace { rate: f64 },
}

impl Family {
    fn validate(&self) -> Result<()> {
        match *self {
            Family::CenteredGaussian { sigma } => check_positive("sigma", sigma),
            Family::UniformSymmetric { half_width } => check_positive("half_width", half_width),
            Family::Rademacher { magnitude } => check_positive("magnitude", magnitude),
            Family::Laplace { rate } => check_positive("rate", rate),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::CenteredGaussian { .. } => "gaussian",
            Family::UniformSymmetric { .. } => "uniform",
            Family::Rademacher { .. } => "rademacher",
            Family::Laplace { .. } => "laplace",
        }
    }
}

/// A zero-mean distribution plus the tail envelope it is declared to meet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec")]
pub struct DistributionSpec {
    family: Family,
    declared_params: Option<SubgaussianParams>,
}

#[derive(Deserialize)]
struct RawSpec {
    family: Family,
    #[serde(default)]
    declared_params: Option<SubgaussianParams>,
}

impl TryFrom<RawSpec> for DistributionSpec {
    type Error = Error;

    fn try_from(raw: RawSpec) -> Result<Self> {
        let spec = DistributionSpec::new(raw.family)?;
        match raw.declared_params {
            Some(p) => spec.with_params(p),
            None => Ok(spec),
        }
    }
}

impl DistributionSpec {
    /// Build a spec with the family's default declared parameters.
    pub fn new(family: Family) -> Result<Self> {
        family.validate()?;
        let declared_params = match family {
            Family::CenteredGaussian { sigma } => {
                Some(SubgaussianParams::new(1.0, 1.0 / (2.0 * sigma * sigma))?)
            }
            Family::UniformSymmetric { half_width: bound }
            | Family::Rademacher { magnitude: bound } => Some(params_from_bound(bound)?),
            Family::Laplace { .. } => None,
        };
        Ok(Self {
            family,
            declared_params,
        })
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        Self::new(Family::CenteredGaussian { sigma })
    }

    pub fn uniform(half_width: f64) -> Result<Self> {
        Self::new(Family::UniformSymmetric { half_width })
    }

    pub fn rademacher(magnitude: f64) -> Result<Self> {
        Self::new(Family::Rademacher { magnitude })
    }

    pub fn laplace(rate: f64) -> Result<Self> {
        Self::new(Family::Laplace { rate })
    }

    /// Replace the declared envelope. Not checked against the tails here;
    /// that is what [`crate::verify::tail_envelope_check`] is for.
    pub fn with_params(mut self, params: SubgaussianParams) -> Result<Self> {
        if !self.is_subgaussian() {
            return Err(Error::Precondition(format!(
                "{} tails are not subgaussian; it cannot carry declared params",
                self.family.name()
            )));
        }
        self.declared_params = Some(params);
        Ok(self)
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn declared_params(&self) -> Option<&SubgaussianParams> {
        self.declared_params.as_ref()
    }

    pub fn is_subgaussian(&self) -> bool {
        !matches!(self.family, Family::Laplace { .. })
    }

    pub fn is_continuous(&self) -> bool {
        !matches!(self.family, Family::Rademacher { .. })
    }

    /// Natural length scale: sigma, half-width, magnitude or `1/rate`.
    pub fn scale(&self) -> f64 {
        match self.family {
            Family::CenteredGaussian { sigma } => sigma,
            Family::UniformSymmetric { half_width } => half_width,
            Family::Rademacher { magnitude } => magnitude,
            Family::Laplace { rate } => 1.0 / rate,
        }
    }

    /// Hard bound on `|X|`, if any.
    pub fn hard_bound(&self) -> Option<f64> {
        match self.family {
            Family::UniformSymmetric { half_width } => Some(half_width),
            Family::Rademacher { magnitude } => Some(magnitude),
            _ => None,
        }
    }

    /// `Pr(X >= t)`.
    pub fn upper_tail(&self, t: f64) -> f64 {
        match self.family {
            Family::CenteredGaussian { sigma } => 0.5 * erfc(t / (sigma * SQRT_2)),
            Family::UniformSymmetric { half_width } => {
                ((half_width - t) / (2.0 * half_width)).clamp(0.0, 1.0)
            }
            Family::Rademacher { magnitude } => {
                if t <= -magnitude {
                    1.0
                } else if t <= magnitude {
                    0.5
                } else {
                    0.0
                }
            }
            Family::Laplace { rate } => {
                if t >= 0.0 {
                    0.5 * (-rate * t).exp()
                } else {
                    1.0 - 0.5 * (rate * t).exp()
                }
            }
        }
    }

    /// `ln Pr(X >= t)`, accurate far into the Gaussian tail.
    pub fn ln_upper_tail(&self, t: f64) -> f64 {
        match self.family {
            Family::CenteredGaussian { sigma } if t / sigma > 30.0 => {
                let z = t / sigma;
                let z2 = z * z;
                -0.5 * z2 - z.ln() - 0.5 * (2.0 * PI).ln()
                    + (1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2)).ln()
            }
            Family::Laplace { rate } if t >= 0.0 => -LN_2 - rate * t,
            _ => self.upper_tail(t).ln(),
        }
    }

    /// `Pr(X <= -t)`; equal to the upper tail since every family is symmetric.
    pub fn lower_tail(&self, t: f64) -> f64 {
        self.upper_tail(t)
    }

    pub fn ln_lower_tail(&self, t: f64) -> f64 {
        self.ln_upper_tail(t)
    }

    /// Exact `E[X^2]`.
    pub fn second_moment(&self) -> f64 {
        match self.family {
            Family::CenteredGaussian { sigma } => sigma * sigma,
            Family::UniformSymmetric { half_width } => half_width * half_width / 3.0,
            Family::Rademacher { magnitude } => magnitude * magnitude,
            Family::Laplace { rate } => 2.0 / (rate * rate),
        }
    }

    /// Open bound on `|s|` for a finite MGF, if any.
    pub fn mgf_radius(&self) -> Option<f64> {
        match self.family {
            Family::Laplace { rate } => Some(rate),
            _ => None,
        }
    }

    fn check_mgf_domain(&self, s: f64) -> Result<()> {
        if !s.is_finite() {
            return Err(Error::domain("s", s, "a finite value"));
        }
        match self.mgf_radius() {
            Some(r) if s.abs() >= r => Err(Error::domain("s", s, "|s| < rate for Laplace")),
            _ => Ok(()),
        }
    }

    /// `ln E[e^{sX}]` from the family's closed form.
    pub fn log_mgf(&self, s: f64) -> Result<f64> {
        self.check_mgf_domain(s)?;
        Ok(match self.family {
            Family::CenteredGaussian { sigma } => 0.5 * sigma * sigma * s * s,
            Family::UniformSymmetric { half_width } => ln_sinhc(s * half_width),
            Family::Rademacher { magnitude } => ln_cosh(s * magnitude),
            Family::Laplace { rate } => -(-(s / rate).powi(2)).ln_1p(),
        })
    }

    /// `ln E[e^{sX}]` by adaptive quadrature of the density.
    ///
    /// Integrates `f(x) (e^{sx} - 1 - sx)`, which is `E[e^{sX}] - 1` for a
    /// zero-mean law, so the logarithm keeps relative accuracy as `s -> 0`.
    /// Only continuous families have a density.
    pub fn log_mgf_quadrature(&self, s: f64) -> Result<f64> {
        self.check_mgf_domain(s)?;
        if !self.is_continuous() {
            return Err(Error::Precondition(format!(
                "{} has no density; quadrature is undefined",
                self.family.name()
            )));
        }
        if s == 0.0 {
            return Ok(0.0);
        }
        let points = self.quadrature_points(s);
        let (lo, hi) = (points[0], points[points.len() - 1]);
        let peak_exponent = (s * lo).max(s * hi);
        if peak_exponent <= 600.0 {
            let integrand = |x: f64| (self.ln_density(x)).exp() * exp_minus_linear(s * x);
            let r = quadrature::integrate(integrand, &points, QUADRATURE_REL_TOL, 0.0);
            Ok(r.value.ln_1p())
        } else {
            // Large s: the "-1 - sx" terms are negligible; integrate the
            // tilted density shifted by its largest log value.
            let shift = points
                .iter()
                .map(|&x| s * x + self.ln_density(x))
                .filter(|v| v.is_finite())
                .fold(f64::NEG_INFINITY, f64::max);
            let integrand = |x: f64| (s * x + self.ln_density(x) - shift).exp();
            let r = quadrature::integrate(integrand, &points, QUADRATURE_REL_TOL, 0.0);
            Ok(shift + r.value.ln())
        }
    }

    fn ln_density(&self, x: f64) -> f64 {
        match self.family {
            Family::CenteredGaussian { sigma } => {
                let z = x / sigma;
                -0.5 * z * z - sigma.ln() - 0.5 * (2.0 * PI).ln()
            }
            Family::UniformSymmetric { half_width } => {
                if x.abs() <= half_width {
                    -(2.0 * half_width).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Family::Laplace { rate } => (0.5 * rate).ln() - rate * x.abs(),
            Family::Rademacher { .. } => f64::NEG_INFINITY,
        }
    }

    /// Integration window and interior breakpoints (kinks, tilted mode).
    fn quadrature_points(&self, s: f64) -> Vec<f64> {
        let mut points = match self.family {
            Family::CenteredGaussian { sigma } => {
                let mode = s * sigma * sigma;
                let w = GAUSSIAN_WINDOW_SIGMAS * sigma;
                vec![(-w).min(mode - w), 0.0, mode, w.max(mode + w)]
            }
            Family::UniformSymmetric { half_width } => vec![-half_width, 0.0, half_width],
            Family::Laplace { rate } => {
                // Log integrand falls by 60 at the window edges.
                let right = rate - s;
                let left = rate + s;
                let mut v = vec![-60.0 / left, 0.0, 60.0 / right];
                for k in -2..6 {
                    let f = 2f64.powi(k);
                    v.push(f / right);
                    v.push(-f / left);
                }
                v
            }
            Family::Rademacher { .. } => unreachable!("no density"),
        };
        points.sort_by(f64::total_cmp);
        points.dedup();
        let (lo, hi) = (points[0], points[points.len() - 1]);
        points.retain(|&x| x >= lo && x <= hi);
        points
    }

    /// Draw one variate.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.family {
            Family::CenteredGaussian { sigma } => {
                let z: f64 = rng.sample(StandardNormal);
                sigma * z
            }
            Family::UniformSymmetric { half_width } => rng.random_range(-half_width..=half_width),
            Family::Rademacher { magnitude } => {
                if rng.random::<bool>() {
                    magnitude
                } else {
                    -magnitude
                }
            }
            Family::Laplace { rate } => {
                let u: f64 = rng.random::<f64>() - 0.5;
                -u.signum() * (1.0 - 2.0 * u.abs()).ln() / rate
            }
        }
    }
}

/// `ln cosh x` without overflow or cancellation.
pub(crate) fn ln_cosh(x: f64) -> f64 {
    let x = x.abs();
    if x < 20.0 {
        // cosh x - 1 = 2 sinh^2(x/2)
        let h = (0.5 * x).sinh();
        (2.0 * h * h).ln_1p()
    } else {
        x - LN_2 + (-2.0 * x).exp().ln_1p()
    }
}

/// `ln(sinh x / x)`, with the removable singularity at 0 filled in.
pub(crate) fn ln_sinhc(x: f64) -> f64 {
    let x = x.abs();
    if x < 1e-2 {
        let x2 = x * x;
        x2 / 6.0 - x2 * x2 / 180.0 + x2 * x2 * x2 / 2835.0
    } else if x < 20.0 {
        (x.sinh() / x).ln()
    } else {
        x - LN_2 + (-(-2.0 * x).exp()).ln_1p() - x.ln()
    }
}

/// `e^u - 1 - u`.
fn exp_minus_linear(u: f64) -> f64 {
    if u.abs() < 1e-2 {
        let u2 = u * u;
        u2 * (0.5 + u / 6.0 + u2 / 24.0 + u2 * u / 120.0 + u2 * u2 / 720.0 + u2 * u2 * u / 5040.0)
    } else {
        u.exp_m1() - u
    }
}
