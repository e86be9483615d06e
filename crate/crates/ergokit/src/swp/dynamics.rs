//! Descriptions of stochastic wealth processes: continuous Itô dynamics
//! dx = a(x) dt + b(x) dW and discrete per-step gamble dynamics.

use crate::error::{Error, Result};
use crate::expr::{CompiledExpr, Shape};
use serde::{Deserialize, Serialize};

/// An open interval (lo, hi); either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    /// (0, ∞), the natural domain of multiplicative wealth.
    pub const POSITIVE: Interval = Interval {
        lo: 0.0,
        hi: f64::INFINITY,
    };

    /// (−∞, ∞), the natural domain of additive wealth.
    pub const REAL: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(Error::Config(format!(
                "domain ({lo}, {hi}) is empty or malformed"
            )));
        }
        Ok(Interval { lo, hi })
    }

    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }

    /// Evenly sampled points strictly inside the interval, used for
    /// validation and for default derivative grids. Infinite ends are
    /// truncated to ±1e6; a positive interval spanning several decades is
    /// sampled logarithmically so small-x behavior is not missed.
    pub fn sample_grid(&self, n: usize) -> Vec<f64> {
        assert!(n >= 2);
        let lo_eff = if self.lo.is_finite() {
            self.lo + 1e-9 * (1.0 + self.lo.abs())
        } else {
            -1e6
        };
        let hi_eff = if self.hi.is_finite() {
            self.hi - 1e-9 * (1.0 + self.hi.abs())
        } else {
            1e6
        };
        let log_spaced = lo_eff > 0.0 && hi_eff / lo_eff > 1e3;
        (0..n)
            .map(|i| {
                let s = i as f64 / (n - 1) as f64;
                if log_spaced {
                    (lo_eff.ln() + s * (hi_eff.ln() - lo_eff.ln())).exp()
                } else {
                    lo_eff + s * (hi_eff - lo_eff)
                }
            })
            .collect()
    }
}

/// Recognized coefficient family, keyed on the diffusion template.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Family {
    /// b(x) = sigma
    Additive { sigma: f64 },
    /// b(x) = sigma * x
    Multiplicative { sigma: f64 },
    /// b(x) = sigma * x^gamma, gamma not in {0, 1}
    Power { sigma: f64, gamma: f64 },
    Custom,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Additive { .. } => "additive",
            Family::Multiplicative { .. } => "multiplicative",
            Family::Power { .. } => "power",
            Family::Custom => "custom",
        }
    }
}

/// A validated Itô dynamic dx = a(x) dt + b(x) dW on an open domain.
#[derive(Debug, Clone)]
pub struct ItoDynamics {
    drift: CompiledExpr,
    diffusion: CompiledExpr,
    domain: Interval,
    family: Family,
}

const VALIDATION_GRID: usize = 201;

/// Parse and validate an Itô dynamic from coefficient expressions.
///
/// Both coefficients must be finite on a 201-point sample of the domain and
/// the diffusion strictly positive there. The family tag is detected from
/// the diffusion's shape: constant, linear, and pure-power diffusions map
/// to the additive, multiplicative, and power families.
pub fn build_ito(drift: &str, diffusion: &str, domain: Interval) -> Result<ItoDynamics> {
    let drift = CompiledExpr::parse(drift)?;
    let diffusion = CompiledExpr::parse(diffusion)?;

    for &x in &domain.sample_grid(VALIDATION_GRID) {
        let a = drift.eval(x);
        if !a.is_finite() {
            return Err(Error::InvalidDynamics(format!(
                "drift '{drift}' is not finite at x = {x} (value {a})"
            )));
        }
        let b = diffusion.eval(x);
        if !b.is_finite() {
            return Err(Error::InvalidDynamics(format!(
                "diffusion '{diffusion}' is not finite at x = {x} (value {b})"
            )));
        }
        if b <= 0.0 {
            return Err(Error::NonPositiveDiffusion { x, value: b });
        }
    }

    let family = match *diffusion.shape() {
        Shape::Const(sigma) if sigma > 0.0 => Family::Additive { sigma },
        Shape::Linear(sigma) if sigma > 0.0 => Family::Multiplicative { sigma },
        Shape::Power { coeff, gamma } if coeff > 0.0 => Family::Power {
            sigma: coeff,
            gamma,
        },
        _ => Family::Custom,
    };

    Ok(ItoDynamics {
        drift,
        diffusion,
        domain,
        family,
    })
}

impl ItoDynamics {
    #[inline]
    pub fn drift(&self, x: f64) -> f64 {
        self.drift.eval(x)
    }

    #[inline]
    pub fn diffusion(&self, x: f64) -> f64 {
        self.diffusion.eval(x)
    }

    pub fn drift_expr(&self) -> &CompiledExpr {
        &self.drift
    }

    pub fn diffusion_expr(&self) -> &CompiledExpr {
        &self.diffusion
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// Canonical description string, the basis of ensemble fingerprints.
    pub fn describe(&self) -> String {
        format!(
            "ito|a={}|b={}|domain=({},{})",
            self.drift.source(),
            self.diffusion.source(),
            self.domain.lo,
            self.domain.hi
        )
    }
}

/// Whether discrete outcomes shift wealth or scale it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GambleMode {
    Additive,
    Multiplicative,
}

impl GambleMode {
    /// Apply one outcome to a wealth level.
    #[inline]
    pub fn apply(&self, wealth: f64, effect: f64) -> f64 {
        match self {
            GambleMode::Additive => wealth + effect,
            GambleMode::Multiplicative => wealth * effect,
        }
    }
}

/// A discrete per-step gamble: one outcome drawn per step from a fixed menu.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiscreteDynamics {
    mode: GambleMode,
    outcomes: Vec<f64>,
    probabilities: Vec<f64>,
}

impl DiscreteDynamics {
    pub fn new(mode: GambleMode, outcomes: Vec<f64>, probabilities: Vec<f64>) -> Result<Self> {
        if outcomes.is_empty() || outcomes.len() != probabilities.len() {
            return Err(Error::InvalidDynamics(
                "outcomes and probabilities must be non-empty and the same length".into(),
            ));
        }
        if outcomes.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDynamics("non-finite outcome".into()));
        }
        if mode == GambleMode::Multiplicative && outcomes.iter().any(|&m| m <= 0.0) {
            return Err(Error::InvalidDynamics(
                "multiplicative factors must be strictly positive".into(),
            ));
        }
        if probabilities.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::InvalidDynamics(
                "probabilities must lie in [0, 1]".into(),
            ));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDynamics(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        Ok(DiscreteDynamics {
            mode,
            outcomes,
            probabilities,
        })
    }

    /// Equal-probability outcomes.
    pub fn uniform(mode: GambleMode, outcomes: Vec<f64>) -> Result<Self> {
        let n = outcomes.len();
        if n == 0 {
            return Err(Error::InvalidDynamics("empty outcome list".into()));
        }
        let p = 1.0 / n as f64;
        DiscreteDynamics::new(mode, outcomes, vec![p; n])
    }

    pub fn mode(&self) -> GambleMode {
        self.mode
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.outcomes
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn describe(&self) -> String {
        format!(
            "discrete|mode={:?}|outcomes={:?}|probs={:?}",
            self.mode, self.outcomes, self.probabilities
        )
    }
}
