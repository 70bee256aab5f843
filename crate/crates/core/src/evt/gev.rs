use core::str::FromStr;

use crate::error::{Error, Result};
use crate::prelude::*;
use crate::special::{box_cox, box_cox_neg, normal_pdf, normal_quantile};

/// Loading-magnitude distribution families, used to pick norming constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Uniform,
    StandardNormal,
    /// |Z| for standard normal Z.
    FoldedNormal,
    /// F(x) = exp(−1/x).
    Frechet,
    /// Exponential(1).
    Exponential,
    Gumbel,
    Weibull,
    Custom,
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "uniform" => Family::Uniform,
            "standard_normal" | "normal" => Family::StandardNormal,
            "folded_normal" => Family::FoldedNormal,
            "frechet" => Family::Frechet,
            "exponential" => Family::Exponential,
            "gumbel" => Family::Gumbel,
            "weibull" => Family::Weibull,
            "custom" => Family::Custom,
            _ => return Err(Error::UnknownFamily(s.into())),
        })
    }
}

/// Affine norming (a_N, b_N) of the sample maximum: (max − b_N)/a_N
/// converges to a GEV law.
pub fn norming_constants(family: Family, n: usize) -> Result<(f64, f64)> {
    if n < 2 {
        return Err(Error::invalid("N", format!("norming constants need N >= 2, got {n}")));
    }
    let nf = n as f64;
    Ok(match family {
        Family::Uniform => (1.0 / nf, 1.0),
        Family::StandardNormal => {
            let b = normal_quantile(1.0 - 1.0 / nf);
            (1.0 / (nf * normal_pdf(b)), b)
        }
        Family::FoldedNormal => {
            let b = normal_quantile(1.0 - 1.0 / (2.0 * nf));
            (1.0 / (2.0 * nf * normal_pdf(b)), b)
        }
        Family::Frechet => (nf, 0.0),
        // The maximum of N unit exponentials sits near ln N, not N.
        Family::Exponential => (1.0, nf.ln()),
        Family::Gumbel | Family::Weibull | Family::Custom => {
            return Err(Error::invalid(
                "family",
                format!("{family:?} has no built-in norming constants; supply a_N and b_N"),
            ))
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Norming {
    /// Use [`norming_constants`] for the spec's family.
    Family,
    Fixed {
        a: f64,
        b: f64,
    },
}

/// GEV description of the normalized maximum loading magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GevSpec {
    pub mu: f64,
    pub sigma: f64,
    pub xi: f64,
    /// Extremal index in (0, 1].
    pub theta: f64,
    pub family: Family,
    pub norming: Norming,
}

impl GevSpec {
    fn gumbel(family: Family) -> Self {
        GevSpec {
            mu: 0.0,
            sigma: 1.0,
            xi: 0.0,
            theta: 1.0,
            family,
            norming: Norming::Family,
        }
    }

    /// |λ| with λ standard normal: Gumbel limit.
    pub fn folded_normal() -> Self {
        Self::gumbel(Family::FoldedNormal)
    }

    pub fn standard_normal() -> Self {
        Self::gumbel(Family::StandardNormal)
    }

    pub fn exponential() -> Self {
        Self::gumbel(Family::Exponential)
    }

    /// Uniform(0, 1): N(max − 1) → −Exp(1), a GEV with ξ = −1.
    pub fn uniform() -> Self {
        GevSpec {
            mu: -1.0,
            sigma: 1.0,
            xi: -1.0,
            theta: 1.0,
            family: Family::Uniform,
            norming: Norming::Family,
        }
    }

    /// F(x) = exp(−1/x): max/N is exactly Fréchet, a GEV with ξ = 1.
    pub fn frechet() -> Self {
        GevSpec {
            mu: 1.0,
            sigma: 1.0,
            xi: 1.0,
            theta: 1.0,
            family: Family::Frechet,
            norming: Norming::Family,
        }
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(Error::invalid("sigma", format!("{} must be positive", self.sigma)));
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::invalid("theta", format!("{} is not in (0, 1]", self.theta)));
        }
        if !self.mu.is_finite() || !self.xi.is_finite() {
            return Err(Error::invalid("GEV parameters", "must be finite"));
        }
        if let Norming::Fixed { a, b } = self.norming {
            if !(a > 0.0) || !b.is_finite() {
                return Err(Error::invalid(
                    "norming",
                    format!("need a > 0 and finite b, got ({a}, {b})"),
                ));
            }
        }
        Ok(())
    }

    pub fn norming_at(&self, n: usize) -> Result<(f64, f64)> {
        match self.norming {
            Norming::Family => norming_constants(self.family, n),
            Norming::Fixed { a, b } => Ok((a, b)),
        }
    }
}

/// GEV cdf exp(−(1 + ξz)^{−1/ξ}), z = (x − μ)/σ, with the Gumbel limit at
/// ξ = 0.
pub fn gev_cdf(x: f64, mu: f64, sigma: f64, xi: f64) -> f64 {
    let z = (x - mu) / sigma;
    if xi.abs() < 1e-12 {
        return (-(-z).exp()).exp();
    }
    let arg = 1.0 + xi * z;
    if arg <= 0.0 {
        return if xi > 0.0 { 0.0 } else { 1.0 };
    }
    (-arg.powf(-1.0 / xi)).exp()
}

/// Location and scale of G^θ, which is again GEV with the same shape:
/// σ* = σθ^ξ and μ* = μ + σ(θ^ξ − 1)/ξ (μ + σ ln θ at ξ = 0).
pub fn gev_starred(spec: &GevSpec) -> Result<(f64, f64)> {
    if !(spec.theta > 0.0) {
        return Err(Error::invalid("theta", format!("{} must be positive", spec.theta)));
    }
    let sigma_star = spec.sigma * spec.theta.powf(spec.xi);
    let mu_star = spec.mu + spec.sigma * box_cox(spec.theta, spec.xi);
    Ok((mu_star, sigma_star))
}

/// Threshold u_N(τ) = a_N(μ* + σ*(τ^{−ξ} − 1)/ξ) + b_N, at which the
/// normalized maximum has limiting exceedance intensity τ.
pub fn u_quantile(spec: &GevSpec, n: usize, tau: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::invalid("tau", format!("{tau} must be positive")));
    }
    spec.validate()?;
    let (a, b) = spec.norming_at(n)?;
    let (mu_star, sigma_star) = gev_starred(spec)?;
    Ok(a * (mu_star + sigma_star * box_cox_neg(tau, spec.xi)) + b)
}
