//! Ranking, mixing, and calibration of wealth processes.
//!
//! A process is ranked by the long-run growth rate of its transformed
//! wealth. On top of that ordering sit the mixture operator, a
//! normalized value scale calibrated against two anchor processes, a
//! risk-aversion adjustment for power-law transforms, the certainty
//! growth equivalent, and an exponential discount fit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::growth::{time_average_rate, TimeAverageEstimate};
use crate::swp::Ensemble;
use crate::transform::{apply_transform, TransformForm, TransformSpec};

/// Agreement / disagreement thresholds in pooled standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankThresholds {
    pub agree_se: f64,
    pub disagree_se: f64,
}

impl Default for RankThresholds {
    fn default() -> Self {
        RankThresholds { agree_se: 3.0, disagree_se: 5.0 }
    }
}

/// Outcome of comparing two processes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Preference {
    LeftPreferred,
    RightPreferred,
    Indifferent,
    Inconclusive,
}

impl std::fmt::Display for Preference {
    fn fmt(&self, out: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Preference::LeftPreferred => "LEFT_PREFERRED",
            Preference::RightPreferred => "RIGHT_PREFERRED",
            Preference::Indifferent => "INDIFFERENT",
            Preference::Inconclusive => "INCONCLUSIVE",
        };
        out.write_str(s)
    }
}

/// Full record of one ranking decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingResult {
    pub verdict: Preference,
    pub reason: String,
    pub left_growth: Option<TimeAverageEstimate>,
    pub right_growth: Option<TimeAverageEstimate>,
    pub difference: Option<f64>,
    pub pooled_se: Option<f64>,
}

impl RankingResult {
    fn inconclusive(reason: String) -> Self {
        RankingResult {
            verdict: Preference::Inconclusive,
            reason,
            left_growth: None,
            right_growth: None,
            difference: None,
            pooled_se: None,
        }
    }
}

/// Rank two processes by the time-average growth of their transformed
/// wealth.
///
/// A side is preferred only when the growth gap exceeds the
/// disagreement threshold; gaps inside the agreement threshold count
/// as indifference, and the band between the two (or a non-converged
/// estimate) yields no verdict.
pub fn rank(
    left: &Ensemble,
    right: &Ensemble,
    f: &TransformSpec,
    thresholds: &RankThresholds,
) -> RankingResult {
    let lg = match time_average_rate(left, f) {
        Ok(v) => v,
        Err(err) => {
            return RankingResult::inconclusive(format!("left growth unavailable: {err}"))
        }
    };
    let rg = match time_average_rate(right, f) {
        Ok(v) => v,
        Err(err) => {
            let mut r =
                RankingResult::inconclusive(format!("right growth unavailable: {err}"));
            r.left_growth = Some(lg);
            return r;
        }
    };

    let signed = lg.rate - rg.rate;
    let difference = signed.abs();
    let pooled = (lg.se.powi(2) + rg.se.powi(2)).sqrt();
    let (verdict, reason) = if !lg.converged || !rg.converged {
        (
            Preference::Inconclusive,
            "time-average growth did not converge on at least one side".to_string(),
        )
    } else if difference <= thresholds.agree_se * pooled {
        (
            Preference::Indifferent,
            format!("growth rates agree within {} pooled standard errors", thresholds.agree_se),
        )
    } else if difference > thresholds.disagree_se * pooled {
        let v = if signed > 0.0 {
            Preference::LeftPreferred
        } else {
            Preference::RightPreferred
        };
        (
            v,
            format!(
                "growth gap exceeds {} pooled standard errors",
                thresholds.disagree_se
            ),
        )
    } else {
        (
            Preference::Inconclusive,
            format!(
                "growth gap falls between the {} and {} pooled standard-error thresholds",
                thresholds.agree_se, thresholds.disagree_se
            ),
        )
    };

    RankingResult {
        verdict,
        reason,
        left_growth: Some(lg),
        right_growth: Some(rg),
        difference: Some(difference),
        pooled_se: Some(pooled),
    }
}

/// Statewise convex combination of two ensembles: paths are paired by
/// index, so mixtures share the underlying noise.
pub fn mixture(x: &Ensemble, x2: &Ensemble, alpha: f64) -> Result<Ensemble> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Precondition(format!(
            "mixture weight must lie strictly between 0 and 1, got {alpha}"
        )));
    }
    if x.times() != x2.times() {
        return Err(Error::EnsembleMismatch(
            "mixture needs identical time grids".into(),
        ));
    }
    if x.n_paths() != x2.n_paths() {
        return Err(Error::EnsembleMismatch(
            "mixture needs identical path counts".into(),
        ));
    }
    let n_paths = x.n_paths();
    let n_times = x.n_times();
    let mut values = Vec::with_capacity(n_paths * n_times);
    for p in 0..n_paths {
        for k in 0..n_times {
            values.push(alpha * x.value(p, k) + (1.0 - alpha) * x2.value(p, k));
        }
    }
    let clipped = (0..n_paths).map(|p| x.is_clipped(p) || x2.is_clipped(p)).collect();
    let fingerprint = crate::swp::fingerprint_hex(&format!(
        "mixture|alpha={alpha}|{}|{}",
        x.fingerprint(),
        x2.fingerprint()
    ));
    Ok(Ensemble::from_parts(
        x.times().to_vec(),
        values,
        n_paths,
        alpha * x.x0() + (1.0 - alpha) * x2.x0(),
        x.seed(),
        fingerprint,
        clipped,
    ))
}

/// Two anchor processes spanning the value scale: the high anchor is
/// assigned value 1 and the low anchor value 0.
#[derive(Debug, Clone)]
pub struct RepresentationFrame {
    pub anchor_high: Ensemble,
    pub anchor_low: Ensemble,
    pub thresholds: RankThresholds,
}

/// Where the query process sits relative to the two anchors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryPosition {
    AboveBothAnchors,
    BetweenAnchors,
    BelowBothAnchors,
}

/// Calibrated value of a process on the anchor scale.
///
/// The value is located by bisecting a mixture weight until the
/// mixture is indifferent to a reference process, so it always comes
/// with the final bracketing interval. An inconclusive ranking during
/// the search aborts it and reports the bracket reached so far.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RepresentationValue {
    Determined {
        value: f64,
        alpha_star: f64,
        position: QueryPosition,
        bracket: [f64; 2],
    },
    Inconclusive {
        position: QueryPosition,
        bracket: [f64; 2],
        reason: String,
    },
}

/// Result of locating the indifference weight between two processes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaStarResult {
    pub alpha_star: f64,
    pub bracket: [f64; 2],
    /// False when an inconclusive ranking interrupted the search.
    pub conclusive: bool,
    /// Ranking of the final mixture against the reference.
    pub certificate: RankingResult,
}

const BISECT_ITERATIONS: u32 = 16;

/// Bisect the mixture weight between `upper` and `lower` until the
/// mixture h(upper, lower; alpha) is indifferent to `reference`.
/// Works in transformed space with an identity ranking, where mixture
/// weight moves growth monotonically.
fn bisect_mixture_weight(
    upper: &Ensemble,
    lower: &Ensemble,
    reference: &Ensemble,
    thresholds: &RankThresholds,
) -> Result<AlphaStarResult> {
    let identity = TransformSpec::identity();
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    for _ in 0..BISECT_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        let mix = mixture(upper, lower, mid)?;
        let verdict = rank(&mix, reference, &identity, thresholds);
        match verdict.verdict {
            Preference::LeftPreferred => hi = mid,
            Preference::RightPreferred => lo = mid,
            Preference::Indifferent => {
                return Ok(AlphaStarResult {
                    alpha_star: mid,
                    bracket: [lo, hi],
                    conclusive: true,
                    certificate: verdict,
                });
            }
            Preference::Inconclusive => {
                return Ok(AlphaStarResult {
                    alpha_star: mid,
                    bracket: [lo, hi],
                    conclusive: false,
                    certificate: verdict,
                });
            }
        }
    }
    let alpha_star = 0.5 * (lo + hi);
    let mix = mixture(upper, lower, alpha_star)?;
    let certificate = rank(&mix, reference, &identity, thresholds);
    Ok(AlphaStarResult { alpha_star, bracket: [lo, hi], conclusive: true, certificate })
}

fn transformed(f: &TransformSpec, ens: &Ensemble) -> Result<Ensemble> {
    apply_transform(f, ens)
}

/// Value of `query` on the scale fixed by the frame's anchors (high
/// anchor 1, low anchor 0), under the transform `f`.
///
/// The query is first placed relative to the anchors, then the
/// matching mixture relation is solved for its weight:
/// above both anchors, mixing the query toward the low anchor until
/// it matches the high anchor gives value 1/alpha; between the
/// anchors, mixing high toward low until it matches the query gives
/// alpha; below both, mixing high toward the query until it matches
/// the low anchor gives alpha/(alpha-1).
pub fn representation_value(
    query: &Ensemble,
    frame: &RepresentationFrame,
    f: &TransformSpec,
) -> Result<RepresentationValue> {
    let th = &frame.thresholds;
    let y_high = transformed(f, &frame.anchor_high)?;
    let y_low = transformed(f, &frame.anchor_low)?;
    let y_query = transformed(f, query)?;
    let identity = TransformSpec::identity();

    let frame_rank = rank(&y_high, &y_low, &identity, th);
    if frame_rank.verdict != Preference::LeftPreferred {
        return Err(Error::Precondition(format!(
            "frame is degenerate: high anchor is not strictly preferred to low ({})",
            frame_rank.verdict
        )));
    }
    let vs_high = rank(&y_query, &y_high, &identity, th).verdict;
    let vs_low = rank(&y_query, &y_low, &identity, th).verdict;
    if vs_high == Preference::Inconclusive || vs_low == Preference::Inconclusive {
        return Err(Error::Precondition(
            "query cannot be ordered against both anchors".into(),
        ));
    }

    let (position, search) = if vs_high == Preference::LeftPreferred {
        (
            QueryPosition::AboveBothAnchors,
            bisect_mixture_weight(&y_query, &y_low, &y_high, th)?,
        )
    } else if vs_low == Preference::RightPreferred {
        (
            QueryPosition::BelowBothAnchors,
            bisect_mixture_weight(&y_high, &y_query, &y_low, th)?,
        )
    } else {
        (
            QueryPosition::BetweenAnchors,
            bisect_mixture_weight(&y_high, &y_low, &y_query, th)?,
        )
    };

    if !search.conclusive {
        return Ok(RepresentationValue::Inconclusive {
            position,
            bracket: search.bracket,
            reason: search.certificate.reason,
        });
    }
    let a = search.alpha_star;
    let value = match position {
        QueryPosition::AboveBothAnchors => 1.0 / a,
        QueryPosition::BetweenAnchors => a,
        QueryPosition::BelowBothAnchors => a / (a - 1.0),
    };
    Ok(RepresentationValue::Determined {
        value,
        alpha_star: a,
        position,
        bracket: search.bracket,
    })
}

/// Weight alpha* at which the middle process is indifferent to the
/// mixture h(best, worst; alpha*). Preconditions: best is at least as
/// good as mid, mid at least as good as worst, and best strictly
/// better than worst.
pub fn unique_alpha_star(
    best: &Ensemble,
    mid: &Ensemble,
    worst: &Ensemble,
    f: &TransformSpec,
    thresholds: &RankThresholds,
) -> Result<AlphaStarResult> {
    let y_best = transformed(f, best)?;
    let y_mid = transformed(f, mid)?;
    let y_worst = transformed(f, worst)?;
    let identity = TransformSpec::identity();

    let top = rank(&y_best, &y_mid, &identity, thresholds).verdict;
    let bottom = rank(&y_mid, &y_worst, &identity, thresholds).verdict;
    let span = rank(&y_best, &y_worst, &identity, thresholds).verdict;
    let ordered = matches!(top, Preference::LeftPreferred | Preference::Indifferent)
        && matches!(bottom, Preference::LeftPreferred | Preference::Indifferent)
        && span == Preference::LeftPreferred;
    if !ordered {
        return Err(Error::Precondition(format!(
            "processes are not ordered best >= mid >= worst with best > worst \
             (got {top}, {bottom}, {span})"
        )));
    }
    bisect_mixture_weight(&y_best, &y_worst, &y_mid, thresholds)
}

/// Raise the risk aversion of a power-law transform by the multiplier
/// `lambda`: exponent gamma becomes lambda*gamma, collapsing to the
/// log at lambda*gamma = 1. The result is tagged as a utility, not an
/// ergodic transform. Other functional forms are refused because the
/// adjustment is specific to the power family.
pub fn risk_adjusted_transform(f: &TransformSpec, lambda: f64) -> Result<TransformSpec> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Precondition(format!(
            "risk multiplier must be positive and finite, got {lambda}"
        )));
    }
    let gamma = match f.form() {
        TransformForm::Crra { gamma } => *gamma,
        TransformForm::Log => 1.0,
        other => {
            return Err(Error::UnsupportedForm(format!(
                "risk adjustment is defined for power-law and log transforms only, \
                 not {other:?}"
            )))
        }
    };
    let adjusted = TransformSpec::crra(lambda * gamma, f.x_ref())?
        .scaled_by(f.scale(), f.offset())?;
    Ok(adjusted.into_utility())
}

/// Constant growth rate whose deterministic process ranks indifferent
/// to `x` under `f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CertaintyEquivalent {
    Rate { rate: f64, se: f64 },
    Inconclusive { reason: String },
}

/// The certainty growth equivalent is the converged time-average
/// growth rate itself: a deterministic process growing at that rate
/// in f-space is indifferent to `x` by construction.
pub fn certainty_growth_equivalent(x: &Ensemble, f: &TransformSpec) -> Result<CertaintyEquivalent> {
    let est = time_average_rate(x, f)?;
    if !est.converged {
        return Ok(CertaintyEquivalent::Inconclusive {
            reason: "time-average growth did not converge".into(),
        });
    }
    Ok(CertaintyEquivalent::Rate { rate: est.rate, se: est.se })
}

/// Exponential discount fit V = beta * exp(-alpha * dt).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscountFit {
    pub alpha: f64,
    pub beta: f64,
    pub alpha_se: f64,
    pub residual_rms: f64,
    pub n_points: usize,
}

/// Least-squares fit of ln V = ln beta - alpha * dt over (dt, V)
/// pairs. Needs at least two distinct dt values and positive V.
pub fn fit_discount(pairs: &[(f64, f64)]) -> Result<DiscountFit> {
    if pairs.len() < 2 {
        return Err(Error::Precondition(
            "discount fit needs at least 2 points".into(),
        ));
    }
    for &(dt, v) in pairs {
        if !dt.is_finite() || !v.is_finite() {
            return Err(Error::Precondition(
                "discount fit needs finite inputs".into(),
            ));
        }
        if v <= 0.0 {
            return Err(Error::Precondition(format!(
                "discount fit needs positive values, got {v} at dt={dt}"
            )));
        }
    }
    let n = pairs.len() as f64;
    let xs: Vec<f64> = pairs.iter().map(|&(dt, _)| dt).collect();
    let ys: Vec<f64> = pairs.iter().map(|&(_, v)| v.ln()).collect();
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - x_mean).powi(2);
        sxy += (x - x_mean) * (y - y_mean);
    }
    if sxx == 0.0 {
        return Err(Error::Precondition(
            "discount fit needs at least 2 distinct dt values".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let mut ssr = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        ssr += (y - (intercept + slope * x)).powi(2);
    }
    let residual_rms = (ssr / n).sqrt();
    // With exactly two points the fit is exact and the slope has no
    // sampling error to report.
    let alpha_se = if pairs.len() > 2 {
        (ssr / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(DiscountFit {
        alpha: -slope,
        beta: intercept.exp(),
        alpha_se,
        residual_rms,
        n_points: pairs.len(),
    })
}
