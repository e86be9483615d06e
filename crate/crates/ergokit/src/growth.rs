//! Growth-rate estimators over simulated ensembles.
//!
//! Four related notions live here: the per-path rate of change over a
//! finite window, its sample average across paths, the long-horizon
//! time-average rate with a convergence diagnostic, and the ensemble
//! (expected) rate with a stability-under-doubling diagnostic. The
//! ergodicity diagnostic compares the last two and returns a verdict.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::swp::{simulate_ito, Ensemble, ItoDynamics};
use crate::transform::TransformSpec;

/// Simulation budget for diagnostics driven from a dynamics spec.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub n_paths: usize,
    pub dt: f64,
    pub t_max: f64,
    pub seed: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { n_paths: 256, dt: 1e-3, t_max: 120.0, seed: 0 }
    }
}

/// A rate with its standard error and the number of paths that fed it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub rate: f64,
    pub se: f64,
    pub n_used: usize,
}

/// One geometric checkpoint of the time-average sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub t: f64,
    pub rate: f64,
}

/// Time-average rate at the horizon, with the convergence diagnostic.
///
/// `rate` is the median across paths at the final time; `se` is a
/// robust standard error for that median. `transient_slope` is the
/// slope of the checkpoint rates against 1/t, which estimates the
/// decaying start-up term. `converged` is false when the checkpoint
/// sequence fails the Cauchy criterion (successive deltas not
/// shrinking), which is the signature of a divergent time average.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeAverageEstimate {
    pub rate: f64,
    pub se: f64,
    pub converged: bool,
    pub transient_slope: f64,
    pub checkpoints: Vec<Checkpoint>,
}

/// Sample-average rate at one prefix size of the path array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsetEstimate {
    pub n_prefix: usize,
    pub n_used: usize,
    pub rate: f64,
    pub se: f64,
}

/// Ensemble (expected) rate with the stability-in-N diagnostic.
///
/// `consistent` is true when the estimates at N/4, N/2 and N agree
/// pairwise within three pooled standard errors. The prefixes are
/// nested, so this checks stability of the running estimate rather
/// than independence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRateEstimate {
    pub rate: f64,
    pub se: f64,
    pub consistent: bool,
    pub subsets: Vec<SubsetEstimate>,
}

/// Verdict of the ergodicity diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Ergodic,
    NonErgodic,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, out: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Verdict::Ergodic => "ERGODIC",
            Verdict::NonErgodic => "NON_ERGODIC",
            Verdict::Inconclusive => "INCONCLUSIVE",
        };
        out.write_str(s)
    }
}

/// Full output of the ergodicity diagnostic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub verdict: Verdict,
    pub reason: String,
    pub transform: String,
    pub t_used: f64,
    pub n_paths: usize,
    pub time_average: Option<TimeAverageEstimate>,
    pub ensemble: Option<EnsembleRateEstimate>,
    pub difference: Option<f64>,
    pub pooled_se: Option<f64>,
}

/// Everything the batch runner wants in one record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub transform_id: String,
    pub t_used: f64,
    pub n_used: usize,
    /// Per-path finite-window rate, one entry per path in path order.
    pub finite_t_rate: Vec<f64>,
    /// Paths excluded from the averages because they hit the domain edge.
    pub excluded_paths: Vec<usize>,
    pub sample_avg_rate: RateEstimate,
    pub time_avg_rate_estimate: TimeAverageEstimate,
    pub ensemble_rate_estimate: EnsembleRateEstimate,
}

impl GrowthReport {
    pub fn csv_header() -> &'static str {
        "transform_id,t_used,n_used,n_excluded,sample_rate,sample_se,\
         time_avg_rate,time_avg_se,time_avg_converged,transient_slope,\
         ensemble_rate,ensemble_se,ensemble_consistent"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.transform_id,
            self.t_used,
            self.n_used,
            self.excluded_paths.len(),
            self.sample_avg_rate.rate,
            self.sample_avg_rate.se,
            self.time_avg_rate_estimate.rate,
            self.time_avg_rate_estimate.se,
            self.time_avg_rate_estimate.converged,
            self.time_avg_rate_estimate.transient_slope,
            self.ensemble_rate_estimate.rate,
            self.ensemble_rate_estimate.se,
            self.ensemble_rate_estimate.consistent,
        )
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serialize(e.to_string()))
    }
}

/// Agreement threshold, in pooled standard errors, below which two
/// estimates count as consistent.
const AGREE_SE: f64 = 3.0;
/// Disagreement threshold above which consistency is ruled out.
const DISAGREE_SE: f64 = 5.0;
/// Minimum number of distinct geometric checkpoints for a time average.
const MIN_CHECKPOINTS: usize = 10;
/// The checkpoint-delta sequence must shrink by at least this factor
/// (last third vs first third) to count as converged.
const CAUCHY_SHRINK: f64 = 0.7;
/// sqrt(pi/2): inflation of the median's standard error relative to
/// the mean's under approximately normal sampling.
const MEDIAN_SE_INFLATION: f64 = 1.253_314_137_315_500_3;
/// Scale factor turning a median absolute deviation into a normal
/// standard deviation estimate.
const MAD_TO_SIGMA: f64 = 1.482_602_218_505_602;

/// Rate of change of one path over [0, t] through the lens of `f`:
/// (f(x_t) - f(x_0)) / t.
pub fn rate_of_change(ens: &Ensemble, path: usize, t: f64, f: &TransformSpec) -> Result<f64> {
    if path >= ens.n_paths() {
        return Err(Error::Precondition(format!(
            "path index {} out of range (ensemble has {})",
            path,
            ens.n_paths()
        )));
    }
    if t == 0.0 {
        return Err(Error::UndefinedRate);
    }
    let k = grid_index(ens, t)?;
    let start = f.eval(ens.x0())?;
    let end = f.eval(ens.value(path, k))?;
    Ok((end - start) / t)
}

fn grid_index(ens: &Ensemble, t: f64) -> Result<usize> {
    ens.index_of_time(t).ok_or_else(|| {
        Error::Precondition(format!("time {t} is not on the recorded grid"))
    })
}

/// Mean of the per-path rates at time `t`, with its standard error.
///
/// Paths flagged as having hit the domain edge are excluded; at least
/// two unflagged paths must remain.
pub fn sample_average_rate(ens: &Ensemble, t: f64, f: &TransformSpec) -> Result<RateEstimate> {
    prefix_average_rate(ens, t, f, ens.n_paths())
}

fn prefix_average_rate(
    ens: &Ensemble,
    t: f64,
    f: &TransformSpec,
    prefix: usize,
) -> Result<RateEstimate> {
    if t == 0.0 {
        return Err(Error::UndefinedRate);
    }
    let k = grid_index(ens, t)?;
    let start = f.eval(ens.x0())?;
    let mut rates = Vec::with_capacity(prefix);
    for path in 0..prefix {
        if ens.is_clipped(path) {
            continue;
        }
        let end = f.eval(ens.value(path, k))?;
        rates.push((end - start) / t);
    }
    if rates.len() < 2 {
        return Err(Error::InsufficientData(
            "fewer than 2 unflagged paths at the requested time".into(),
        ));
    }
    let n = rates.len();
    let mean = rates.iter().sum::<f64>() / n as f64;
    let var = rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok(RateEstimate { rate: mean, se: (var / n as f64).sqrt(), n_used: n })
}

/// Geometric checkpoint indices t_max, t_max/2, t_max/4, ... snapped
/// to the recorded grid, deduplicated, in ascending time order.
fn checkpoint_indices(ens: &Ensemble) -> Vec<usize> {
    let mut indices: Vec<usize> = Vec::new();
    let mut target = ens.t_max();
    for _ in 0..64 {
        let i = ens.nearest_index(target);
        if i == 0 {
            break;
        }
        if !indices.contains(&i) {
            indices.push(i);
        }
        target /= 2.0;
    }
    indices.reverse();
    indices
}

/// Time-average rate: the median across paths of the per-path rate at
/// the horizon, plus a convergence diagnostic over geometrically
/// spaced checkpoints.
///
/// Non-convergence is reported through the `converged` flag rather
/// than an error, because a divergent time average is an answer, not
/// a failure.
pub fn time_average_rate(ens: &Ensemble, f: &TransformSpec) -> Result<TimeAverageEstimate> {
    let indices = checkpoint_indices(ens);
    if indices.len() < MIN_CHECKPOINTS {
        return Err(Error::Precondition(format!(
            "time horizon too short: {} distinct checkpoints, need at least {}",
            indices.len(),
            MIN_CHECKPOINTS
        )));
    }
    let active: Vec<usize> = (0..ens.n_paths()).filter(|&p| !ens.is_clipped(p)).collect();
    if active.is_empty() {
        return Err(Error::InsufficientData(
            "every path was flagged as having hit the domain edge".into(),
        ));
    }
    let start = f.eval(ens.x0())?;

    let mut checkpoints = Vec::with_capacity(indices.len());
    let mut rates_at_horizon = Vec::new();
    for (pos, &k) in indices.iter().enumerate() {
        let t = ens.times()[k];
        let mut rates = Vec::with_capacity(active.len());
        for &path in &active {
            let end = f.eval(ens.value(path, k))?;
            rates.push((end - start) / t);
        }
        let med = median(&mut rates);
        checkpoints.push(Checkpoint { t, rate: med });
        if pos == indices.len() - 1 {
            rates_at_horizon = rates;
        }
    }

    let horizon = checkpoints.last().expect("at least MIN_CHECKPOINTS entries");
    let med = horizon.rate;
    let spread = mad(&rates_at_horizon, med);
    let se =
        MEDIAN_SE_INFLATION * MAD_TO_SIGMA * spread / (rates_at_horizon.len() as f64).sqrt();

    Ok(TimeAverageEstimate {
        rate: med,
        se,
        converged: cauchy_converged(&checkpoints),
        transient_slope: slope_against_inverse_time(&checkpoints),
        checkpoints,
    })
}

/// Cauchy criterion on the checkpoint medians: deltas between
/// successive checkpoints must shrink from the early third to the
/// late third, or already be at rounding level.
fn cauchy_converged(checkpoints: &[Checkpoint]) -> bool {
    let deltas: Vec<f64> = checkpoints
        .windows(2)
        .map(|w| (w[1].rate - w[0].rate).abs())
        .collect();
    let scale = 1e-12 * (1.0 + checkpoints.last().map_or(0.0, |c| c.rate.abs()));
    if deltas.iter().all(|&d| d <= scale) {
        return true;
    }
    let third = deltas.len() / 3;
    let early: f64 = deltas[..third].iter().sum::<f64>() / third as f64;
    let late: f64 = deltas[deltas.len() - third..].iter().sum::<f64>() / third as f64;
    late <= CAUCHY_SHRINK * early
}

/// Least-squares slope of checkpoint rate against 1/t. For a rate
/// sequence r(t) = r_inf + c/t this recovers c, the transient term.
fn slope_against_inverse_time(checkpoints: &[Checkpoint]) -> f64 {
    let n = checkpoints.len() as f64;
    let us: Vec<f64> = checkpoints.iter().map(|c| 1.0 / c.t).collect();
    let u_mean = us.iter().sum::<f64>() / n;
    let v_mean = checkpoints.iter().map(|c| c.rate).sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var = 0.0;
    for (u, c) in us.iter().zip(checkpoints) {
        cov += (u - u_mean) * (c.rate - v_mean);
        var += (u - u_mean).powi(2);
    }
    if var == 0.0 {
        0.0
    } else {
        cov / var
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn mad(values: &[f64], center: f64) -> f64 {
    let mut dev: Vec<f64> = values.iter().map(|v| (v - center).abs()).collect();
    median(&mut dev)
}

/// Sample-average rate with a stability diagnostic: the estimate is
/// recomputed on the first quarter and first half of the path array,
/// and all three values must agree within three pooled standard
/// errors for `consistent` to hold.
pub fn ensemble_rate(ens: &Ensemble, t: f64, f: &TransformSpec) -> Result<EnsembleRateEstimate> {
    let n = ens.n_paths();
    if n < 8 {
        return Err(Error::InsufficientData(
            "stability diagnostic needs at least 8 paths".into(),
        ));
    }
    let prefixes = [n / 4, n / 2, n];
    let mut subsets = Vec::with_capacity(3);
    for &prefix in &prefixes {
        let est = prefix_average_rate(ens, t, f, prefix)?;
        subsets.push(SubsetEstimate {
            n_prefix: prefix,
            n_used: est.n_used,
            rate: est.rate,
            se: est.se,
        });
    }
    let consistent = subsets.windows(2).all(|w| {
        let pooled = (w[0].se.powi(2) + w[1].se.powi(2)).sqrt();
        (w[1].rate - w[0].rate).abs() <= AGREE_SE * pooled
    });
    let full = subsets[2];
    Ok(EnsembleRateEstimate { rate: full.rate, se: full.se, consistent, subsets })
}

/// Simulate the dynamics under the given budget and classify it as
/// ergodic, non-ergodic, or inconclusive under the transform `f`.
pub fn ergodicity_diagnostic(
    dynamics: &ItoDynamics,
    f: &TransformSpec,
    x0: f64,
    budget: &Budget,
) -> Result<DiagnosticReport> {
    let ens = simulate_ito(dynamics, x0, budget.dt, budget.t_max, budget.n_paths, budget.seed)?;
    Ok(diagnose_ensemble(&ens, f))
}

/// Classification logic shared by the simulating entry point and
/// callers that already hold an ensemble.
///
/// The order matters: a divergent time average settles the question
/// (non-ergodic) before the ensemble-side diagnostic is consulted,
/// because the comparison is meaningless when one side has no limit.
pub fn diagnose_ensemble(ens: &Ensemble, f: &TransformSpec) -> DiagnosticReport {
    let transform = f.render();
    let t_used = ens.t_max();
    let n_paths = ens.n_paths();
    let blank = |reason: String| DiagnosticReport {
        verdict: Verdict::Inconclusive,
        reason,
        transform: transform.clone(),
        t_used,
        n_paths,
        time_average: None,
        ensemble: None,
        difference: None,
        pooled_se: None,
    };

    let ta = match time_average_rate(ens, f) {
        Ok(ta) => ta,
        Err(err) => return blank(format!("time-average rate unavailable: {err}")),
    };
    let er = match ensemble_rate(ens, t_used, f) {
        Ok(er) => er,
        Err(err) => {
            let mut report = blank(format!("ensemble rate unavailable: {err}"));
            report.time_average = Some(ta);
            return report;
        }
    };

    let difference = (ta.rate - er.rate).abs();
    let pooled = (ta.se.powi(2) + er.se.powi(2)).sqrt();
    let (verdict, reason) = if !ta.converged {
        (
            Verdict::NonErgodic,
            "time-average rate diverges: checkpoint deltas are not shrinking".to_string(),
        )
    } else if !er.consistent {
        (
            Verdict::Inconclusive,
            "ensemble rate is not stable under sample-size doubling".to_string(),
        )
    } else if difference <= AGREE_SE * pooled {
        (
            Verdict::Ergodic,
            format!(
                "time-average and ensemble rates agree within {AGREE_SE} pooled standard errors"
            ),
        )
    } else if difference > DISAGREE_SE * pooled {
        (
            Verdict::NonErgodic,
            format!(
                "time-average and ensemble rates differ by more than {DISAGREE_SE} pooled \
                 standard errors"
            ),
        )
    } else {
        (
            Verdict::Inconclusive,
            format!(
                "rate difference falls between the {AGREE_SE} and {DISAGREE_SE} pooled \
                 standard-error thresholds"
            ),
        )
    };

    DiagnosticReport {
        verdict,
        reason,
        transform,
        t_used,
        n_paths,
        time_average: Some(ta),
        ensemble: Some(er),
        difference: Some(difference),
        pooled_se: Some(pooled),
    }
}

/// Assemble the full growth record at time `t`.
pub fn growth_report(ens: &Ensemble, t: f64, f: &TransformSpec) -> Result<GrowthReport> {
    let mut finite_t_rate = Vec::with_capacity(ens.n_paths());
    for path in 0..ens.n_paths() {
        finite_t_rate.push(rate_of_change(ens, path, t, f)?);
    }
    let excluded_paths: Vec<usize> =
        (0..ens.n_paths()).filter(|&p| ens.is_clipped(p)).collect();
    let sample = sample_average_rate(ens, t, f)?;
    Ok(GrowthReport {
        transform_id: f.form_name().to_string(),
        t_used: t,
        n_used: sample.n_used,
        finite_t_rate,
        excluded_paths,
        sample_avg_rate: sample,
        time_avg_rate_estimate: time_average_rate(ens, f)?,
        ensemble_rate_estimate: ensemble_rate(ens, t, f)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::swp::{build_ito, Interval};

    fn grid(n: usize, dt: f64) -> Vec<f64> {
        (0..=n).map(|k| k as f64 * dt).collect()
    }

    fn identity() -> TransformSpec {
        TransformSpec::identity()
    }

    #[test]
    fn constant_path_has_zero_rate() {
        let times = grid(7, 1.0);
        let values = vec![vec![5.0; 8]];
        let ens = Ensemble::from_paths(times, values, 99, "test").unwrap();
        let r = rate_of_change(&ens, 0, 7.0, &identity()).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn log_rate_is_exact_log_arithmetic() {
        let times = grid(10, 1.0);
        let mut values = vec![1.0; 11];
        values[10] = 0.5f64.exp();
        let ens = Ensemble::from_paths(times, vec![values], 0, "test").unwrap();
        let f = TransformSpec::log(1.0).unwrap();
        let r = rate_of_change(&ens, 0, 10.0, &f).unwrap();
        assert!((r - 0.05).abs() < 1e-15, "r = {r}");
    }

    #[test]
    fn single_shock_exponential_matches_formula() {
        // Terminal value e^{g t + sigma eps} with one draw of eps.
        let (g, sigma, eps, t) = (0.05f64, 0.2, -0.731, 10.0);
        let terminal = (g * t + sigma * eps).exp();
        let mut values = vec![1.0; 11];
        values[10] = terminal;
        let ens = Ensemble::from_paths(grid(10, 1.0), vec![values], 0, "test").unwrap();
        let r = rate_of_change(&ens, 0, t, &identity()).unwrap();
        assert_eq!(r, (terminal - 1.0) / t);
    }

    #[test]
    fn zero_time_is_refused() {
        let ens = Ensemble::from_paths(grid(4, 1.0), vec![vec![1.0; 5]], 0, "test").unwrap();
        assert!(matches!(
            rate_of_change(&ens, 0, 0.0, &identity()),
            Err(Error::UndefinedRate)
        ));
        assert!(matches!(
            sample_average_rate(&ens, 0.0, &identity()),
            Err(Error::UndefinedRate)
        ));
    }

    #[test]
    fn off_grid_time_is_refused() {
        let ens = Ensemble::from_paths(grid(4, 1.0), vec![vec![1.0; 5]], 0, "test").unwrap();
        assert!(matches!(
            rate_of_change(&ens, 0, 2.5, &identity()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn two_path_mean_is_exact() {
        let times = vec![0.0, 1.0];
        let values = vec![vec![0.0, 0.1], vec![0.0, 0.3]];
        let ens = Ensemble::from_paths(times, values, 0, "test").unwrap();
        let est = sample_average_rate(&ens, 1.0, &identity()).unwrap();
        assert!((est.rate - 0.2).abs() < 1e-16);
        // Sample std of {0.1, 0.3} is 0.1*sqrt(2); se divides by sqrt(2).
        assert!((est.se - 0.1).abs() < 1e-15);
        assert_eq!(est.n_used, 2);
    }

    #[test]
    fn sample_average_is_mean_of_per_path_rates() {
        let dyn_ = build_ito("0.07*x", "0.2*x", Interval::POSITIVE).unwrap();
        let ens = simulate_ito(&dyn_, 1.0, 1e-2, 2.0, 64, 5).unwrap();
        let f = TransformSpec::crra(0.5, 1.0).unwrap();
        let est = sample_average_rate(&ens, 2.0, &f).unwrap();
        let rates: Vec<f64> = (0..ens.n_paths())
            .filter(|&p| !ens.is_clipped(p))
            .map(|p| rate_of_change(&ens, p, 2.0, &f).unwrap())
            .collect();
        let mean = rates.iter().sum::<f64>() / rates.len() as f64;
        assert_eq!(est.rate, mean);
    }

    #[test]
    fn flagged_paths_are_excluded_from_the_average() {
        let times = vec![0.0, 1.0];
        let values = vec![0.0, 0.1, 0.0, 99.0, 0.0, 0.3, 0.0, 99.0];
        let ens = Ensemble::from_parts(
            times,
            values,
            4,
            0.0,
            0,
            "test".into(),
            vec![false, true, false, true],
        );
        let est = sample_average_rate(&ens, 1.0, &identity()).unwrap();
        assert!((est.rate - 0.2).abs() < 1e-16);
        assert_eq!(est.n_used, 2);
    }

    #[test]
    fn all_paths_flagged_is_an_error() {
        let ens = Ensemble::from_parts(
            vec![0.0, 1.0],
            vec![0.0, 0.1, 0.0, 0.3],
            2,
            0.0,
            0,
            "test".into(),
            vec![true, true],
        );
        assert!(matches!(
            sample_average_rate(&ens, 1.0, &identity()),
            Err(Error::InsufficientData(_))
        ));
    }

    // Multiplicative dynamics dx = 0.07 x dt + 0.2 x dW: the plain
    // growth rate at t=10 centers on (e^{0.7}-1)/10 and the log rate
    // on 0.07 - 0.2^2/2 = 0.05.
    #[test]
    fn multiplicative_identity_rate_matches_closed_form() {
        let dyn_ = build_ito("0.07*x", "0.2*x", Interval::POSITIVE).unwrap();
        let ens = simulate_ito(&dyn_, 1.0, 1e-3, 10.0, 4000, 11).unwrap();
        let est = sample_average_rate(&ens, 10.0, &identity()).unwrap();
        let oracle = (0.7f64.exp() - 1.0) / 10.0;
        assert!(
            (est.rate - oracle).abs() <= 3.0 * est.se,
            "rate {} vs oracle {} (se {})",
            est.rate,
            oracle,
            est.se
        );
    }

    #[test]
    fn multiplicative_log_rate_matches_closed_form() {
        let dyn_ = build_ito("0.07*x", "0.2*x", Interval::POSITIVE).unwrap();
        let ens = simulate_ito(&dyn_, 1.0, 1e-3, 10.0, 4000, 11).unwrap();
        let est = sample_average_rate(&ens, 10.0, &TransformSpec::log(1.0).unwrap()).unwrap();
        assert!(
            (est.rate - 0.05).abs() <= 3.0 * est.se,
            "rate {} vs 0.05 (se {})",
            est.rate,
            est.se
        );
    }

    #[test]
    fn time_average_of_log_multiplicative_converges_to_drift() {
        let dyn_ = build_ito("0.07*x", "0.2*x", Interval::POSITIVE).unwrap();
        let ens = simulate_ito(&dyn_, 1.0, 1e-3, 120.0, 256, 3).unwrap();
        let est = time_average_rate(&ens, &TransformSpec::log(1.0).unwrap()).unwrap();
        assert!(est.converged, "checkpoints: {:?}", est.checkpoints);
        assert!(
            (est.rate - 0.05).abs() <= 2.0 * est.se,
            "rate {} vs 0.05 (se {})",
            est.rate,
            est.se
        );
    }

    #[test]
    fn time_average_of_raw_multiplicative_diverges() {
        let dyn_ = build_ito("0.07*x", "0.2*x", Interval::POSITIVE).unwrap();
        let ens = simulate_ito(&dyn_, 1.0, 1e-3, 120.0, 128, 3).unwrap();
        let est = time_average_rate(&ens, &identity()).unwrap();
        assert!(!est.converged, "checkpoints: {:?}", est.checkpoints);
    }

    #[test]
    fn time_average_of_drifting_brownian_motion() {
        let dyn_ = build_ito("1", "0.5", Interval::REAL).unwrap();
        let ens = simulate_ito(&dyn_, 0.0, 1e-3, 120.0, 128, 7).unwrap();
        let est = time_average_rate(&ens, &identity()).unwrap();
        assert!(est.converged);
        assert!(
            (est.rate - 1.0).abs() <= 2.0 * est.se,
            "rate {} vs 1.0 (se {})",
            est.rate,
            est.se
        );
    }

    // A path that jumps to 3 + 2t after the first step has rate
    // exactly 2 + 3/t at every checkpoint, so the slope against 1/t
    // is exactly the jump size.
    #[test]
    fn transient_slope_recovers_the_start_up_term() {
        let times = grid(1024, 1.0);
        let mut values = vec![0.0; 1025];
        for (k, v) in values.iter_mut().enumerate().skip(1) {
            *v = 3.0 + 2.0 * k as f64;
        }
        let ens =
            Ensemble::from_paths(times, vec![values.clone(), values], 0, "test").unwrap();
        let est = time_average_rate(&ens, &identity()).unwrap();
        assert!(est.converged);
        assert!((est.transient_slope - 3.0).abs() < 1e-9, "slope {}", est.transient_slope);
        assert!((est.rate - (2.0 + 3.0 / 1024.0)).abs() < 1e-12);
        assert_eq!(est.se, 0.0);
    }

    #[test]
    fn short_horizon_is_refused() {
        let ens = Ensemble::from_paths(grid(8, 1.0), vec![vec![1.0; 9]; 2], 0, "test").unwrap();
        assert!(matches!(
            time_average_rate(&ens, &identity()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn ensemble_rate_agrees_with_sample_average_and_is_consistent() {
        let dyn_ = build_ito("0.07*x", "0.2*x", Interval::POSITIVE).unwrap();
        let ens = simulate_ito(&dyn_, 1.0, 1e-3, 10.0, 4000, 11).unwrap();
        let sample = sample_average_rate(&ens, 10.0, &identity()).unwrap();
        let est = ensemble_rate(&ens, 10.0, &identity()).unwrap();
        assert_eq!(est.rate, sample.rate);
        assert_eq!(est.se, sample.se);
        assert!(est.consistent, "subsets: {:?}", est.subsets);
        assert_eq!(est.subsets.len(), 3);
        assert_eq!(est.subsets[0].n_prefix, 1000);
        assert_eq!(est.subsets[1].n_prefix, 2000);
        let oracle = (0.7f64.exp() - 1.0) / 10.0;
        assert!((est.rate - oracle).abs() <= 3.0 * est.se);
    }

    #[test]
    fn ensemble_rate_needs_enough_paths() {
        let ens = Ensemble::from_paths(vec![0.0, 1.0], vec![vec![0.0, 0.1]; 4], 0, "test").unwrap();
        assert!(matches!(
            ensemble_rate(&ens, 1.0, &identity()),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn rates_scale_exactly_under_doubling_of_the_transform() {
        let dyn_ = build_ito("0.07*x", "0.2*x", Interval::POSITIVE).unwrap();
        let ens = simulate_ito(&dyn_, 1.0, 1e-2, 4.0, 32, 19).unwrap();
        let f = TransformSpec::log(1.0).unwrap();
        // Power-of-two scale keeps every product exact, so the scaled
        // rate is bit-identical to 4x the original.
        let scaled = f.scaled_by(4.0, 0.0).unwrap();
        let base = sample_average_rate(&ens, 4.0, &f).unwrap();
        let big = sample_average_rate(&ens, 4.0, &scaled).unwrap();
        assert_eq!(big.rate, 4.0 * base.rate);
        assert_eq!(big.se, 4.0 * base.se);
    }

    #[test]
    fn offset_cancels_in_every_rate() {
        let dyn_ = build_ito("0.07*x", "0.2*x", Interval::POSITIVE).unwrap();
        let ens = simulate_ito(&dyn_, 1.0, 1e-2, 4.0, 32, 19).unwrap();
        let f = TransformSpec::log(1.0).unwrap();
        let shifted = f.scaled_by(1.0, 7.0).unwrap();
        let base = sample_average_rate(&ens, 4.0, &f).unwrap();
        let moved = sample_average_rate(&ens, 4.0, &shifted).unwrap();
        assert!((moved.rate - base.rate).abs() < 1e-12);
    }

    #[test]
    fn diagnostic_verdicts_for_the_three_reference_setups() {
        let budget = Budget { n_paths: 256, dt: 1e-3, t_max: 120.0, seed: 5 };

        let gbm = build_ito("0.07*x", "0.2*x", Interval::POSITIVE).unwrap();
        let log = TransformSpec::log(1.0).unwrap();
        let report = ergodicity_diagnostic(&gbm, &log, 1.0, &budget).unwrap();
        assert_eq!(report.verdict, Verdict::Ergodic, "reason: {}", report.reason);

        let report = ergodicity_diagnostic(&gbm, &identity(), 1.0, &budget).unwrap();
        assert_eq!(report.verdict, Verdict::NonErgodic, "reason: {}", report.reason);

        let additive = build_ito("1", "0.5", Interval::REAL).unwrap();
        let report = ergodicity_diagnostic(&additive, &identity(), 0.0, &budget).unwrap();
        assert_eq!(report.verdict, Verdict::Ergodic, "reason: {}", report.reason);
    }

    #[test]
    fn diagnostic_turns_missing_data_into_inconclusive() {
        // Too few paths for the ensemble-side diagnostic.
        let dyn_ = build_ito("1", "0.5", Interval::REAL).unwrap();
        let ens = simulate_ito(&dyn_, 0.0, 1e-2, 60.0, 4, 0).unwrap();
        let report = diagnose_ensemble(&ens, &identity());
        assert_eq!(report.verdict, Verdict::Inconclusive);
        assert!(report.reason.contains("ensemble rate unavailable"));
    }

    #[test]
    fn growth_report_round_trips_and_keeps_the_mean_identity() {
        let dyn_ = build_ito("0.07*x", "0.2*x", Interval::POSITIVE).unwrap();
        let ens = simulate_ito(&dyn_, 1.0, 1e-3, 60.0, 64, 2).unwrap();
        let report = growth_report(&ens, 60.0, &TransformSpec::log(1.0).unwrap()).unwrap();

        let mean =
            report.finite_t_rate.iter().sum::<f64>() / report.finite_t_rate.len() as f64;
        assert_eq!(report.sample_avg_rate.rate, mean);
        assert_eq!(report.n_used, 64);
        assert!(report.excluded_paths.is_empty());

        let json = report.to_json().unwrap();
        let back: GrowthReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);

        let header_cols = GrowthReport::csv_header().split(',').count();
        let row_cols = report.csv_row().split(',').count();
        assert_eq!(header_cols, row_cols);
    }
}
