//! Ergodic transformations of Itô dynamics: admissibility check, transform
//! derivation (closed form or quadrature table), ensemble mapping, and
//! verification that the transformed process has stationary independent
//! increments.

mod interp;
mod quad;
mod spec;

pub use interp::NumericTable;
pub use quad::integrate;
pub use spec::{TransformForm, TransformRole, TransformSpec};

use crate::error::{Error, Result};
use crate::swp::{Ensemble, Family, ItoDynamics};

/// Relative residual tolerance for the admissibility condition.
pub const ERGODIZABLE_TOL: f64 = 1e-6;

/// Outcome of the admissibility check: a dynamic admits an ergodic
/// transformation exactly when q(x) = (a − b·b′/2)/b is constant.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct ErgodizabilityReport {
    pub admits: bool,
    /// Median of q over the grid; the drift/diffusion ratio of the
    /// transformed process.
    pub alpha_over_beta: f64,
    /// Max deviation of q from its median.
    pub residual: f64,
    pub tolerance: f64,
    pub points_used: usize,
}

/// Decide whether `dynamics` admits an ergodic transformation by testing
/// constancy of q(x) = (a(x) − b(x)·b′(x)/2) / b(x) on the grid. b′ is a
/// central finite difference with step h = 1e-6·max(|x|, 1); grid points
/// whose stencil would leave the domain are dropped with a warning.
pub fn check_ergodizable(dynamics: &ItoDynamics, grid: &[f64]) -> Result<ErgodizabilityReport> {
    if grid.len() < 51 {
        return Err(Error::Precondition(format!(
            "admissibility grid needs at least 51 points, got {}",
            grid.len()
        )));
    }
    let domain = dynamics.domain();
    if let Some(&x) = grid.iter().find(|&&x| !domain.contains(x)) {
        return Err(Error::Precondition(format!(
            "grid point {x} lies outside the domain"
        )));
    }

    let mut qs = Vec::with_capacity(grid.len());
    let mut dropped = 0usize;
    for &x in grid {
        let h = 1e-6 * x.abs().max(1.0);
        if !(domain.contains(x - h) && domain.contains(x + h)) {
            dropped += 1;
            continue;
        }
        let b = dynamics.diffusion(x);
        let b_prime = (dynamics.diffusion(x + h) - dynamics.diffusion(x - h)) / (2.0 * h);
        let q = (dynamics.drift(x) - b * b_prime / 2.0) / b;
        if !q.is_finite() {
            return Err(Error::InvalidDynamics(format!(
                "admissibility ratio not finite at x = {x}"
            )));
        }
        qs.push(q);
    }
    if dropped > 0 {
        log::warn!("admissibility check: dropped {dropped} grid points whose derivative stencil leaves the domain");
    }
    if qs.len() < 3 {
        return Err(Error::Precondition(
            "too few usable grid points after edge shrinking".into(),
        ));
    }

    let med = median(&mut qs.clone());
    let residual = qs
        .iter()
        .map(|q| (q - med).abs())
        .fold(0.0f64, f64::max);
    let tolerance = ERGODIZABLE_TOL;
    Ok(ErgodizabilityReport {
        admits: residual <= tolerance * (1.0 + med.abs()),
        alpha_over_beta: med,
        residual,
        tolerance,
        points_used: qs.len(),
    })
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Default grid for the admissibility check: 201 points spanning [0.01, 100]
/// (log-spaced) on nonnegative domains, [−100, 100] otherwise, clipped to
/// the domain.
///
/// The window is deliberately narrower than the validation grid: the
/// finite-difference step h = 1e-6·max(|x|, 1) is effectively absolute for
/// x below 1, and for curved diffusions the O(h²) derivative error at very
/// small x would swamp the 1e-6 residual tolerance.
pub fn default_check_grid(dynamics: &ItoDynamics) -> Vec<f64> {
    let domain = dynamics.domain();
    let n = 201;
    let inset = |bound: f64, sign: f64| bound + sign * 1e-6 * (1.0 + bound.abs());
    if domain.lo >= 0.0 {
        let lo = if domain.lo > 0.0 {
            inset(domain.lo, 1.0).max(0.01)
        } else {
            0.01
        };
        let hi = if domain.hi.is_finite() {
            inset(domain.hi, -1.0).min(100.0)
        } else {
            100.0
        };
        if lo < hi {
            return (0..n)
                .map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64))
                .collect();
        }
    }
    let lo = if domain.lo.is_finite() {
        inset(domain.lo, 1.0).max(-100.0)
    } else {
        -100.0
    };
    let hi = if domain.hi.is_finite() {
        inset(domain.hi, -1.0).min(100.0)
    } else {
        100.0
    };
    (0..n)
        .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
        .collect()
}

/// Nodes for the quadrature table: 256 per side around x_ref, geometric on
/// positive domains and linear otherwise, clipped to the domain.
const TABLE_HALF_NODES: usize = 256;
const TABLE_SPAN: f64 = 1024.0;

fn table_nodes(dynamics: &ItoDynamics, x_ref: f64) -> Vec<f64> {
    let domain = dynamics.domain();
    let log_spaced = domain.lo >= 0.0;
    let (lo, hi) = if log_spaced {
        let lo_bound = if domain.lo > 0.0 {
            (domain.lo + 1e-9 * (1.0 + domain.lo)).max(x_ref / TABLE_SPAN)
        } else {
            x_ref / TABLE_SPAN
        };
        let hi_bound = if domain.hi.is_finite() {
            (domain.hi - 1e-9 * (1.0 + domain.hi)).min(x_ref * TABLE_SPAN)
        } else {
            x_ref * TABLE_SPAN
        };
        (lo_bound, hi_bound)
    } else {
        let lo_bound = if domain.lo.is_finite() {
            (domain.lo + 1e-9 * (1.0 + domain.lo.abs())).max(x_ref - TABLE_SPAN)
        } else {
            x_ref - TABLE_SPAN
        };
        let hi_bound = if domain.hi.is_finite() {
            (domain.hi - 1e-9 * (1.0 + domain.hi.abs())).min(x_ref + TABLE_SPAN)
        } else {
            x_ref + TABLE_SPAN
        };
        (lo_bound, hi_bound)
    };

    let mut nodes = Vec::with_capacity(2 * TABLE_HALF_NODES + 1);
    for k in 0..TABLE_HALF_NODES {
        let s = k as f64 / TABLE_HALF_NODES as f64;
        if log_spaced {
            nodes.push(lo * (x_ref / lo).powf(s));
        } else {
            nodes.push(lo + s * (x_ref - lo));
        }
    }
    nodes.push(x_ref);
    for k in 1..=TABLE_HALF_NODES {
        let s = k as f64 / TABLE_HALF_NODES as f64;
        if log_spaced {
            nodes.push(x_ref * (hi / x_ref).powf(s));
        } else {
            nodes.push(x_ref + s * (hi - x_ref));
        }
    }
    nodes
}

/// Derive the ergodic transformation of an admitting dynamic by solving
/// f′(x) = 1/b(x) with f(x_ref) = 0 and the normalization beta = 1.
///
/// A closed form is recognized from the diffusion template (constant →
/// affine, linear → log, power → isoelastic with the γ = 1 case dispatching
/// to log); otherwise the transform is a 513-node quadrature table. The
/// table is attached in every case as a cross-check of the closed form.
pub fn derive_transform(dynamics: &ItoDynamics, x_ref: f64) -> Result<TransformSpec> {
    if !dynamics.domain().contains(x_ref) {
        return Err(Error::Precondition(format!(
            "x_ref = {x_ref} lies outside the domain"
        )));
    }
    let grid = default_check_grid(dynamics);
    let report = check_ergodizable(dynamics, &grid)?;
    if !report.admits {
        return Err(Error::NotErgodizable {
            residual: report.residual,
            tolerance: report.tolerance * (1.0 + report.alpha_over_beta.abs()),
        });
    }
    let beta = 1.0;
    let alpha = report.alpha_over_beta * beta;

    // Cumulative quadrature of 1/b from x_ref outward, one segment per
    // node gap so the table error stays below the cross-check tolerance.
    let nodes = table_nodes(dynamics, x_ref);
    let integrand = |x: f64| 1.0 / dynamics.diffusion(x);
    let center = nodes
        .iter()
        .position(|&x| x == x_ref)
        .expect("x_ref is a node by construction");
    let mut ys = vec![0.0; nodes.len()];
    for k in center..nodes.len() - 1 {
        let seg = integrate(&integrand, nodes[k], nodes[k + 1], 1e-12)?;
        ys[k + 1] = ys[k] + seg;
    }
    for k in (0..center).rev() {
        let seg = integrate(&integrand, nodes[k], nodes[k + 1], 1e-12)?;
        ys[k] = ys[k + 1] - seg;
    }
    let table = NumericTable::new(nodes, ys)?;

    let spec = match dynamics.family() {
        Family::Additive { sigma } => {
            // f(x) = (x − x_ref)/σ
            TransformSpec::affine(1.0 / sigma, -x_ref / sigma)?
        }
        Family::Multiplicative { sigma } => {
            // f(x) = ln(x/x_ref)/σ
            TransformSpec::log(x_ref)?
                .scaled_by(1.0 / sigma, 0.0)?
        }
        Family::Power { sigma, gamma } => {
            // f(x) = (x^{1−γ} − x_ref^{1−γ})/(σ(1−γ)), log when γ = 1.
            TransformSpec::crra(gamma, x_ref)?.scaled_by(1.0 / sigma, 0.0)?
        }
        Family::Custom => TransformSpec::from_table(table.clone(), x_ref),
    };
    let scale = spec.scale();
    Ok(spec.with_constants(scale, alpha, beta).with_table(table))
}

/// Map every ensemble value through `f`. Out-of-domain values fail with
/// the offending path and step; numeric-table extrapolations are counted
/// and reported as a warning.
pub fn apply_transform(f: &TransformSpec, ens: &Ensemble) -> Result<Ensemble> {
    let mut extrapolated = 0usize;
    let label = format!("transform:{}", f.render());
    let out = ens.map_values(&label, |path, step, x| {
        let (y, extr) = f.eval_extrapolation(x).map_err(|e| Error::TransformDomain {
            x,
            path,
            step,
            reason: e.to_string(),
        })?;
        if extr {
            extrapolated += 1;
        }
        Ok(y)
    })?;
    if extrapolated > 0 {
        log::warn!("apply_transform: {extrapolated} values fell outside the numeric table and used linear extension");
    }
    Ok(out)
}

/// Stationarity/independence verdict for an (already transformed) ensemble.
#[derive(Debug, Clone, serde::Serialize)]
pub struct LevyReport {
    pub stationary: bool,
    pub independent: bool,
    /// Mean increment per unit time.
    pub drift_hat: f64,
    pub drift_se: f64,
    /// Increment standard deviation per sqrt unit time.
    pub vol_hat: f64,
    /// Lag-1 autocorrelation of increments.
    pub lag1_autocorr: f64,
    pub n_increments: usize,
}

const LEVY_WINDOWS: usize = 10;
const LEVY_SE_FACTOR: f64 = 4.0;

/// Check that per-step increments look like a Lévy process: means and
/// variances agree across 10 time windows (pairwise within 4 pooled s.e.)
/// and the lag-1 autocorrelation is within ±4/√n.
pub fn verify_levy(ens: &Ensemble) -> Result<LevyReport> {
    if ens.n_paths() < 100 {
        return Err(Error::InsufficientData(format!(
            "need at least 100 paths, got {}",
            ens.n_paths()
        )));
    }
    let n_steps = ens.n_times() - 1;
    if n_steps < 100 {
        return Err(Error::InsufficientData(format!(
            "need at least 100 recorded steps, got {n_steps}"
        )));
    }
    let times = ens.times();
    let dt = times[1] - times[0];
    if times
        .windows(2)
        .any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * (1.0 + dt))
    {
        return Err(Error::Precondition(
            "increment analysis needs a uniform time grid".into(),
        ));
    }

    // Pooled window statistics over all paths.
    let per_window = n_steps / LEVY_WINDOWS;
    let used_steps = per_window * LEVY_WINDOWS;
    let mut win_sum = [0.0f64; LEVY_WINDOWS];
    let mut win_sum2 = [0.0f64; LEVY_WINDOWS];
    let mut lag_num = 0.0f64;
    let mut total_sum = 0.0f64;
    let mut total_sum2 = 0.0f64;
    let mut lag_pairs = 0usize;
    for i in 0..ens.n_paths() {
        let row = ens.path(i);
        let mut prev_inc = f64::NAN;
        for k in 0..used_steps {
            let inc = row[k + 1] - row[k];
            let w = k / per_window;
            win_sum[w] += inc;
            win_sum2[w] += inc * inc;
            total_sum += inc;
            total_sum2 += inc * inc;
            if k > 0 {
                lag_num += prev_inc * inc;
                lag_pairs += 1;
            }
            prev_inc = inc;
        }
    }
    let n_inc = ens.n_paths() * used_steps;
    let n_w = (ens.n_paths() * per_window) as f64;
    let means: Vec<f64> = win_sum.iter().map(|s| s / n_w).collect();
    let vars: Vec<f64> = win_sum
        .iter()
        .zip(win_sum2.iter())
        .map(|(&s, &s2)| (s2 - s * s / n_w) / (n_w - 1.0))
        .collect();

    let mut stationary = true;
    for a in 0..LEVY_WINDOWS {
        for b in a + 1..LEVY_WINDOWS {
            let se_mean = (vars[a] / n_w + vars[b] / n_w).sqrt();
            if (means[a] - means[b]).abs() > LEVY_SE_FACTOR * se_mean {
                stationary = false;
            }
            // Gaussian-increment approximation for the variance of a
            // sample variance: 2·var²/(n−1).
            let se_var =
                ((2.0 * vars[a] * vars[a] + 2.0 * vars[b] * vars[b]) / (n_w - 1.0)).sqrt();
            if (vars[a] - vars[b]).abs() > LEVY_SE_FACTOR * se_var {
                stationary = false;
            }
        }
    }

    let grand_mean = total_sum / n_inc as f64;
    let grand_var = (total_sum2 - total_sum * total_sum / n_inc as f64) / (n_inc as f64 - 1.0);
    // Centered lag-1 autocorrelation pooled over paths.
    let lag1 = (lag_num / lag_pairs as f64 - grand_mean * grand_mean) / grand_var;
    let independent = lag1.abs() <= LEVY_SE_FACTOR / (lag_pairs as f64).sqrt();

    Ok(LevyReport {
        stationary,
        independent,
        drift_hat: grand_mean / dt,
        drift_se: (grand_var / n_inc as f64).sqrt() / dt,
        vol_hat: grand_var.sqrt() / dt.sqrt(),
        lag1_autocorr: lag1,
        n_increments: n_inc,
    })
}
