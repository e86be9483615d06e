//! Ensemble simulation: Euler–Maruyama for Itô dynamics and exact stepping
//! for discrete gambles. Deterministic per (spec, seed) regardless of how
//! the work is scheduled across threads.

use crate::error::{Error, Result};
use crate::rng::derive_rng;
use crate::swp::dynamics::{DiscreteDynamics, GambleMode, ItoDynamics};
use crate::swp::ensemble::{fingerprint_hex, Ensemble};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// Distance a clipped path is pushed back inside the domain.
const CLIP_EPS: f64 = 1e-9;

/// Recorded points per path are capped; long simulations keep every
/// stride-th step. The stride is drawn from the 1-2-5 ladder so that
/// round times stay on the recorded grid.
const MAX_RECORDED_STEPS: usize = 4096;

fn choose_stride(n_steps: usize) -> usize {
    if n_steps <= MAX_RECORDED_STEPS {
        return 1;
    }
    let mut decade = 1usize;
    loop {
        for multiplier in [1, 2, 5] {
            let stride = decade * multiplier;
            if n_steps.div_ceil(stride) <= MAX_RECORDED_STEPS {
                return stride;
            }
        }
        decade *= 10;
    }
}

/// Step indices that get recorded: 0, stride, 2·stride, ..., plus the final
/// step if the stride does not divide evenly.
fn recorded_steps(n_steps: usize, stride: usize) -> Vec<usize> {
    let mut steps: Vec<usize> = (0..=n_steps).step_by(stride).collect();
    if *steps.last().unwrap() != n_steps {
        steps.push(n_steps);
    }
    steps
}

/// Simulate an Itô dynamic with the Euler–Maruyama scheme
/// x_{k+1} = x_k + a(x_k)·dt + b(x_k)·√dt·Z.
///
/// Each path draws from its own RNG stream keyed by (seed, path index), so
/// path i is bit-identical whether simulated alone, in a batch, or across
/// any number of worker threads. Paths that leave the domain are clipped
/// just inside the boundary and flagged; non-finite values abort with the
/// offending path and step.
pub fn simulate_ito(
    dynamics: &ItoDynamics,
    x0: f64,
    dt: f64,
    t_max: f64,
    n_paths: usize,
    seed: u64,
) -> Result<Ensemble> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Precondition(format!("dt must be positive, got {dt}")));
    }
    if !(t_max >= dt) || !t_max.is_finite() {
        return Err(Error::Precondition(format!(
            "t_max must be at least dt, got t_max = {t_max}, dt = {dt}"
        )));
    }
    if n_paths == 0 {
        return Err(Error::Precondition("n_paths must be at least 1".into()));
    }
    if !dynamics.domain().contains(x0) {
        return Err(Error::Precondition(format!(
            "x0 = {x0} lies outside the domain ({}, {})",
            dynamics.domain().lo,
            dynamics.domain().hi
        )));
    }

    let n_steps = (t_max / dt).round() as usize;
    let stride = choose_stride(n_steps);
    let steps = recorded_steps(n_steps, stride);
    let time_grid: Vec<f64> = steps.iter().map(|&k| k as f64 * dt).collect();
    let n_rec = time_grid.len();

    let fingerprint = fingerprint_hex(&format!(
        "{}|x0={x0}|dt={dt}|t_max={t_max}|n_paths={n_paths}|seed={seed}|stride={stride}",
        dynamics.describe()
    ));

    let mut values = vec![0.0f64; n_paths * n_rec];
    let clipped: Vec<bool> = values
        .par_chunks_mut(n_rec)
        .enumerate()
        .map(|(i, row)| euler_path(dynamics, x0, dt, n_steps, stride, seed, i, row))
        .collect::<Result<Vec<bool>>>()?;

    Ok(Ensemble::from_parts(
        time_grid,
        values,
        n_paths,
        x0,
        seed,
        fingerprint,
        clipped,
    ))
}

#[allow(clippy::too_many_arguments)]
fn euler_path(
    dynamics: &ItoDynamics,
    x0: f64,
    dt: f64,
    n_steps: usize,
    stride: usize,
    seed: u64,
    index: usize,
    row: &mut [f64],
) -> Result<bool> {
    let mut rng = derive_rng(seed, "ito-path", index as u64);
    let sqrt_dt = dt.sqrt();
    let (lo, hi) = (dynamics.domain().lo, dynamics.domain().hi);
    let drift = dynamics.drift_expr();
    let diffusion = dynamics.diffusion_expr();

    let mut x = x0;
    let mut clipped = false;
    row[0] = x0;
    let mut next_rec = 1usize;
    for step in 1..=n_steps {
        let z: f64 = rng.sample(StandardNormal);
        x += drift.eval(x) * dt + diffusion.eval(x) * sqrt_dt * z;
        if !x.is_finite() {
            return Err(Error::NonFinite {
                path: index,
                step,
                t: step as f64 * dt,
            });
        }
        // Comparisons with infinite bounds are always false, so open
        // domains cost nothing here.
        if x <= lo {
            x = lo + CLIP_EPS;
            clipped = true;
        } else if x >= hi {
            x = hi - CLIP_EPS;
            clipped = true;
        }
        if step % stride == 0 {
            row[next_rec] = x;
            next_rec += 1;
        }
    }
    if next_rec < row.len() {
        row[next_rec] = x;
    }
    Ok(clipped)
}

/// Simulate a discrete gamble dynamic: one outcome drawn per step, applied
/// additively or multiplicatively. The time grid counts steps.
pub fn simulate_discrete(
    dynamics: &DiscreteDynamics,
    x0: f64,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
) -> Result<Ensemble> {
    if n_steps == 0 {
        return Err(Error::Precondition("n_steps must be at least 1".into()));
    }
    if n_paths == 0 {
        return Err(Error::Precondition("n_paths must be at least 1".into()));
    }
    if !x0.is_finite() {
        return Err(Error::Precondition("x0 must be finite".into()));
    }
    if dynamics.mode() == GambleMode::Multiplicative && x0 <= 0.0 {
        return Err(Error::Precondition(
            "multiplicative dynamics need x0 > 0".into(),
        ));
    }

    let stride = choose_stride(n_steps);
    let steps = recorded_steps(n_steps, stride);
    let time_grid: Vec<f64> = steps.iter().map(|&k| k as f64).collect();
    let n_rec = time_grid.len();

    let fingerprint = fingerprint_hex(&format!(
        "{}|x0={x0}|n_steps={n_steps}|n_paths={n_paths}|seed={seed}|stride={stride}",
        dynamics.describe()
    ));

    let cumulative: Vec<f64> = dynamics
        .probabilities()
        .iter()
        .scan(0.0, |acc, &p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    let outcomes = dynamics.outcomes();
    let mode = dynamics.mode();

    let mut values = vec![0.0f64; n_paths * n_rec];
    values
        .par_chunks_mut(n_rec)
        .enumerate()
        .for_each(|(i, row)| {
            let mut rng = derive_rng(seed, "discrete-path", i as u64);
            let mut x = x0;
            row[0] = x0;
            let mut next_rec = 1usize;
            for step in 1..=n_steps {
                let u: f64 = rng.gen();
                let mut idx = cumulative.partition_point(|&c| c <= u);
                if idx >= outcomes.len() {
                    idx = outcomes.len() - 1;
                }
                x = mode.apply(x, outcomes[idx]);
                if step % stride == 0 {
                    row[next_rec] = x;
                    next_rec += 1;
                }
            }
            if next_rec < row.len() {
                row[next_rec] = x;
            }
        });

    Ok(Ensemble::from_parts(
        time_grid,
        values,
        n_paths,
        x0,
        seed,
        fingerprint,
        vec![false; n_paths],
    ))
}
