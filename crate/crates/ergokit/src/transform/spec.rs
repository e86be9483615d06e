//! Monotone wealth transformations: closed forms and numeric tables.

use crate::error::{Error, Result};
use crate::transform::interp::NumericTable;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Closed-form families, plus the numeric-table fallback.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransformForm {
    /// base(x) = x − x_ref
    Identity,
    /// base(x) = ln(x / x_ref)
    Log,
    /// base(x) = (x^{1−γ} − x_ref^{1−γ}) / (1−γ), γ ≠ 1
    Crra { gamma: f64 },
    /// base(x) = e^{−rate·x_ref} − e^{−rate·x}, increasing for rate > 0
    Exponential { rate: f64 },
    /// base(x) interpolated from a monotone table
    Table,
}

/// Whether a spec arose as an ergodic transformation of a dynamic or as a
/// utility function layered on top of one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformRole {
    ErgodicTransform,
    Utility,
}

/// A monotone transformation f(x) = scale·base(x) + offset with
/// f(x_ref) = offset.
///
/// For transforms derived from a dynamic, `alpha` and `beta` carry the
/// drift and diffusion constants of the transformed process (with the
/// normalization beta = 1 at derivation time).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformSpec {
    form: TransformForm,
    scale: f64,
    offset: f64,
    x_ref: f64,
    role: TransformRole,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    table: Option<NumericTable>,
}

/// CRRA exponents this close to 1 collapse onto the log form.
const GAMMA_LOG_TOL: f64 = 1e-9;

impl TransformSpec {
    fn base_spec(form: TransformForm, x_ref: f64) -> Self {
        TransformSpec {
            form,
            scale: 1.0,
            offset: 0.0,
            x_ref,
            role: TransformRole::ErgodicTransform,
            alpha: None,
            beta: None,
            table: None,
        }
    }

    /// The plain identity f(x) = x.
    pub fn identity() -> Self {
        Self::base_spec(TransformForm::Identity, 0.0)
    }

    /// Affine f(x) = c·x + d with c > 0.
    pub fn affine(c: f64, d: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() || !d.is_finite() {
            return Err(Error::Precondition(format!(
                "affine transform needs finite c > 0, got c = {c}, d = {d}"
            )));
        }
        let mut spec = Self::base_spec(TransformForm::Identity, 0.0);
        spec.scale = c;
        spec.offset = d;
        Ok(spec)
    }

    /// Natural log anchored at x_ref: f(x) = ln(x / x_ref).
    pub fn log(x_ref: f64) -> Result<Self> {
        if !(x_ref > 0.0) || !x_ref.is_finite() {
            return Err(Error::Precondition(format!(
                "log transform needs x_ref > 0, got {x_ref}"
            )));
        }
        Ok(Self::base_spec(TransformForm::Log, x_ref))
    }

    /// Isoelastic power transform anchored at x_ref. Exponents within 1e-9
    /// of 1 dispatch to the log form (the limit of the family).
    pub fn crra(gamma: f64, x_ref: f64) -> Result<Self> {
        if !gamma.is_finite() {
            return Err(Error::Precondition("crra exponent must be finite".into()));
        }
        if (gamma - 1.0).abs() <= GAMMA_LOG_TOL {
            return Self::log(x_ref);
        }
        if !(x_ref > 0.0) || !x_ref.is_finite() {
            return Err(Error::Precondition(format!(
                "crra transform needs x_ref > 0, got {x_ref}"
            )));
        }
        Ok(Self::base_spec(TransformForm::Crra { gamma }, x_ref))
    }

    /// Bounded exponential form, increasing for rate > 0.
    pub fn exponential(rate: f64, x_ref: f64) -> Result<Self> {
        if !(rate > 0.0) || !rate.is_finite() || !x_ref.is_finite() {
            return Err(Error::Precondition(format!(
                "exponential transform needs finite rate > 0, got {rate}"
            )));
        }
        Ok(Self::base_spec(TransformForm::Exponential { rate }, x_ref))
    }

    /// Numeric-table transform. The table's y values must already satisfy
    /// f(x_ref) = 0.
    pub fn from_table(table: NumericTable, x_ref: f64) -> Self {
        let mut spec = Self::base_spec(TransformForm::Table, x_ref);
        spec.table = Some(table);
        spec
    }

    pub(crate) fn with_constants(mut self, scale: f64, alpha: f64, beta: f64) -> Self {
        self.scale = scale;
        self.alpha = Some(alpha);
        self.beta = Some(beta);
        self
    }

    pub(crate) fn with_table(mut self, table: NumericTable) -> Self {
        self.table = Some(table);
        self
    }

    pub(crate) fn into_utility(mut self) -> Self {
        self.role = TransformRole::Utility;
        self
    }

    /// Positive affine rescaling c·f + d. Rates computed through the result
    /// are exactly c times the originals; rank verdicts are unchanged.
    pub fn scaled_by(&self, c: f64, d: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() || !d.is_finite() {
            return Err(Error::Precondition(format!(
                "rescaling needs finite c > 0, got c = {c}, d = {d}"
            )));
        }
        let mut spec = self.clone();
        spec.scale = c * self.scale;
        spec.offset = c * self.offset + d;
        spec.alpha = self.alpha.map(|a| c * a);
        spec.beta = self.beta.map(|b| c * b);
        Ok(spec)
    }

    pub fn form(&self) -> &TransformForm {
        &self.form
    }

    pub fn role(&self) -> TransformRole {
        self.role
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn x_ref(&self) -> f64 {
        self.x_ref
    }

    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }

    pub fn beta(&self) -> Option<f64> {
        self.beta
    }

    pub fn table(&self) -> Option<&NumericTable> {
        self.table.as_ref()
    }

    /// Display name of the recognized form.
    pub fn form_name(&self) -> &'static str {
        match self.form {
            TransformForm::Identity => {
                if self.scale == 1.0 && self.offset == 0.0 && self.x_ref == 0.0 {
                    "identity"
                } else {
                    "affine"
                }
            }
            TransformForm::Log => "log",
            TransformForm::Crra { .. } => "crra",
            TransformForm::Exponential { .. } => "exponential",
            TransformForm::Table => "numeric_table",
        }
    }

    /// Evaluate f at x, or report why x is outside f's domain.
    pub fn eval(&self, x: f64) -> Result<f64> {
        let base = match &self.form {
            TransformForm::Identity => x - self.x_ref,
            TransformForm::Log => {
                if x <= 0.0 {
                    return Err(Error::Precondition(format!(
                        "log transform undefined at x = {x}"
                    )));
                }
                (x / self.x_ref).ln()
            }
            TransformForm::Crra { gamma } => {
                let p = 1.0 - gamma;
                if x < 0.0 || (x == 0.0 && p <= 0.0) {
                    return Err(Error::Precondition(format!(
                        "crra transform undefined at x = {x}"
                    )));
                }
                (x.powf(p) - self.x_ref.powf(p)) / p
            }
            TransformForm::Exponential { rate } => {
                (-rate * self.x_ref).exp() - (-rate * x).exp()
            }
            TransformForm::Table => {
                let table = self.table.as_ref().ok_or_else(|| {
                    Error::Precondition("table transform without a table".into())
                })?;
                table.eval(x).0
            }
        };
        Ok(self.scale * base + self.offset)
    }

    /// Like `eval`, also reporting whether a table query extrapolated.
    pub fn eval_extrapolation(&self, x: f64) -> Result<(f64, bool)> {
        if let TransformForm::Table = self.form {
            let table = self
                .table
                .as_ref()
                .ok_or_else(|| Error::Precondition("table transform without a table".into()))?;
            let (base, extrapolated) = table.eval(x);
            Ok((self.scale * base + self.offset, extrapolated))
        } else {
            Ok((self.eval(x)?, false))
        }
    }

    /// Human-readable closed form, e.g. `ln(x/1) / 0.2`.
    pub fn render(&self) -> String {
        let base = match &self.form {
            TransformForm::Identity => {
                if self.x_ref == 0.0 {
                    "x".to_string()
                } else {
                    format!("(x - {})", self.x_ref)
                }
            }
            TransformForm::Log => format!("ln(x/{})", self.x_ref),
            TransformForm::Crra { gamma } => {
                let p = 1.0 - gamma;
                format!("(x^{p} - {}^{p})/{p}", self.x_ref)
            }
            TransformForm::Exponential { rate } => {
                format!("(exp(-{rate}*{}) - exp(-{rate}*x))", self.x_ref)
            }
            TransformForm::Table => format!(
                "table[{} nodes on ({:.6e}, {:.6e})]",
                self.table.as_ref().map_or(0, |t| t.len()),
                self.table.as_ref().map_or(f64::NAN, |t| t.x_range().0),
                self.table.as_ref().map_or(f64::NAN, |t| t.x_range().1),
            ),
        };
        let mut out = if self.scale == 1.0 {
            base
        } else {
            format!("{base} * {}", self.scale)
        };
        if self.offset != 0.0 {
            out = format!("{out} + {}", self.offset);
        }
        out
    }
}

impl fmt::Display for TransformSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}
