//! Acceptance gate: ten end-to-end checks, each printing a single
//! PASS/FAIL line (visible with --nocapture) before asserting. Every
//! tolerance is pinned here; a failing check means the library broke
//! its contract, not that the gate needs loosening.

use std::time::Instant;

use rand::Rng;

use ergokit::ce::{
    decide_backward_induction, decide_ergodicity, decide_static_exponential, run_game, AgentSpec,
    CEConfig, Choice, Gamble, Trial, WealthUpdate,
};
use ergokit::growth::{diagnose_ensemble, ensemble_rate, time_average_rate, Verdict};
use ergokit::preference::{
    fit_discount, mixture, rank, representation_value, unique_alpha_star, Preference,
    QueryPosition, RankThresholds, RepresentationFrame, RepresentationValue,
};
use ergokit::rng::derive_rng;
use ergokit::swp::{
    build_ito, simulate_discrete, simulate_ito, DiscreteDynamics, Ensemble, GambleMode, Interval,
};
use ergokit::transform::{
    apply_transform, check_ergodizable, default_check_grid, derive_transform, verify_levy,
    TransformSpec,
};

/// Print the verdict line for one criterion, then enforce it.
fn report(number: u32, name: &str, failures: &[String]) {
    let ok = failures.is_empty();
    println!(
        "acceptance {number:02} {name}: {}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "acceptance {number:02} {name}:\n  {}", failures.join("\n  "));
}

fn check(failures: &mut Vec<String>, ok: bool, detail: String) {
    if !ok {
        failures.push(detail);
    }
}

/// Two identical straight-line paths on an integer grid; the smallest
/// ensemble on which every growth estimator is exact.
fn det(rate: f64, n: usize, label: &str) -> Ensemble {
    let times: Vec<f64> = (0..=n).map(|k| k as f64).collect();
    let path: Vec<f64> = times.iter().map(|&t| rate * t).collect();
    Ensemble::from_paths(times, vec![path.clone(), path], 0, label).unwrap()
}

#[test]
fn acceptance_01_gbm_growth_rates_and_verdicts() {
    let mut failures = Vec::new();
    let started = Instant::now();

    // Log growth 0.05 and volatility 0.2 mean the state itself drifts
    // at 0.05 + 0.2^2/2 = 0.07.
    let gbm = build_ito("0.07*x", "0.2*x", Interval::POSITIVE).unwrap();
    let ens = simulate_ito(&gbm, 1.0, 1e-3, 200.0, 10_000, 1).unwrap();
    let identity = TransformSpec::identity();
    let log = TransformSpec::log(1.0).unwrap();

    let er = ensemble_rate(&ens, 10.0, &identity).unwrap();
    let oracle = (0.7f64.exp() - 1.0) / 10.0;
    check(
        &mut failures,
        (er.rate - oracle).abs() <= 3.0 * er.se,
        format!(
            "ensemble rate {} vs oracle {oracle}, 3se = {}",
            er.rate,
            3.0 * er.se
        ),
    );

    let ta = time_average_rate(&ens, &log).unwrap();
    check(&mut failures, ta.converged, "time average did not converge".into());
    check(
        &mut failures,
        (ta.rate - 0.05).abs() <= 2.0 * ta.se,
        format!("time-average rate {} vs 0.05, 2se = {}", ta.rate, 2.0 * ta.se),
    );

    let under_identity = diagnose_ensemble(&ens, &identity);
    check(
        &mut failures,
        under_identity.verdict == Verdict::NonErgodic,
        format!("identity verdict {} ({})", under_identity.verdict, under_identity.reason),
    );
    let under_log = diagnose_ensemble(&ens, &log);
    check(
        &mut failures,
        under_log.verdict == Verdict::Ergodic,
        format!("log verdict {} ({})", under_log.verdict, under_log.reason),
    );

    let elapsed = started.elapsed().as_secs_f64();
    check(
        &mut failures,
        elapsed < 60.0,
        format!("took {elapsed:.1}s, budget 60s"),
    );
    report(1, "gbm growth rates and verdicts", &failures);
}

#[test]
fn acceptance_02_admissibility_trichotomy() {
    let mut failures = Vec::new();
    let started = Instant::now();

    let gbm = build_ito("0.05*x", "0.2*x", Interval::POSITIVE).unwrap();
    let report_gbm = check_ergodizable(&gbm, &default_check_grid(&gbm)).unwrap();
    check(&mut failures, report_gbm.admits, "gbm should admit".into());
    check(
        &mut failures,
        report_gbm.tolerance == 1e-6,
        format!("tolerance {} is not the pinned 1e-6", report_gbm.tolerance),
    );
    check(
        &mut failures,
        (report_gbm.alpha_over_beta - 0.15).abs() <= 1e-6,
        format!("gbm ratio {} vs 0.15", report_gbm.alpha_over_beta),
    );

    // b = x^0.7 with drift b·b'/2 + b: the transformed process has
    // drift/diffusion ratio exactly 1.
    let power = build_ito("0.35*x^0.4 + x^0.7", "x^0.7", Interval::POSITIVE).unwrap();
    let report_power = check_ergodizable(&power, &default_check_grid(&power)).unwrap();
    check(&mut failures, report_power.admits, "power dynamic should admit".into());
    check(
        &mut failures,
        (report_power.alpha_over_beta - 1.0).abs() <= 1e-6,
        format!("power ratio {} vs 1", report_power.alpha_over_beta),
    );

    let mixed = build_ito("0.05", "0.2*x", Interval::POSITIVE).unwrap();
    let report_mixed = check_ergodizable(&mixed, &default_check_grid(&mixed)).unwrap();
    check(
        &mut failures,
        !report_mixed.admits,
        format!(
            "constant drift with proportional noise admitted (residual {})",
            report_mixed.residual
        ),
    );

    let elapsed = started.elapsed().as_secs_f64();
    check(&mut failures, elapsed < 1.0, format!("took {elapsed:.2}s, budget 1s"));
    report(2, "admissibility trichotomy", &failures);
}

#[test]
fn acceptance_03_power_transform_tables() {
    let mut failures = Vec::new();

    for gamma in [0.25, 0.5, 0.75, 1.5] {
        // Unit-scale power diffusion; drift b·b'/2 + 0.1·b keeps the
        // dynamic admissible without changing the transform.
        let drift = format!("{}*x^{} + 0.1*x^{}", gamma / 2.0, 2.0 * gamma - 1.0, gamma);
        let diffusion = format!("x^{gamma}");
        let dynamics = build_ito(&drift, &diffusion, Interval::POSITIVE).unwrap();
        let spec = derive_transform(&dynamics, 1.0).unwrap();
        check(
            &mut failures,
            spec.form_name() == "crra",
            format!("gamma {gamma}: recognized {}", spec.form_name()),
        );
        let table = spec.table().expect("derived transforms carry their table");
        let p = 1.0 - gamma;
        let mut worst = 0.0f64;
        for (&x, &y) in table.xs().iter().zip(table.ys()) {
            let oracle = (x.powf(p) - 1.0) / p;
            worst = worst.max((spec.scale() * y + spec.offset() - oracle).abs());
        }
        check(
            &mut failures,
            worst <= 1e-8,
            format!("gamma {gamma}: max node error {worst:.3e} > 1e-8"),
        );
    }

    let linear = build_ito("0.6*x", "x", Interval::POSITIVE).unwrap();
    let spec = derive_transform(&linear, 1.0).unwrap();
    check(
        &mut failures,
        spec.form_name() == "log",
        format!("unit power should dispatch to log, got {}", spec.form_name()),
    );
    report(3, "power transform tables", &failures);
}

#[test]
fn acceptance_04_levy_increment_checks() {
    let mut failures = Vec::new();

    let gbm = build_ito("0.05*x", "0.2*x", Interval::POSITIVE).unwrap();
    let log = TransformSpec::log(1.0).unwrap();
    let mut levy_passes = 0;
    let mut drift_hits = 0;
    for seed in 0..10 {
        let ens = simulate_ito(&gbm, 1.0, 0.01, 20.0, 128, seed).unwrap();
        let y = apply_transform(&log, &ens).unwrap();
        let rep = verify_levy(&y).unwrap();
        if rep.stationary && rep.independent {
            levy_passes += 1;
        }
        // Arithmetic drift 0.05 less half the squared volatility.
        if (rep.drift_hat - 0.03).abs() <= 3.0 * rep.drift_se {
            drift_hits += 1;
        }
    }
    check(
        &mut failures,
        levy_passes >= 9,
        format!("stationarity+independence passed {levy_passes}/10, need 9"),
    );
    check(
        &mut failures,
        drift_hits >= 9,
        format!("drift within 3se on {drift_hits}/10 seeds, need 9"),
    );
    report(4, "levy increment checks", &failures);
}

#[test]
fn acceptance_05_representation_value_affine_in_rate() {
    let mut failures = Vec::new();

    let frame = RepresentationFrame {
        anchor_high: det(1.0, 1024, "rep-high"),
        anchor_low: det(0.0, 1024, "rep-low"),
        thresholds: RankThresholds::default(),
    };
    let f = TransformSpec::identity();
    let tol = 2f64.powi(-16) + 1e-12;
    let cases = [
        (-1.0, QueryPosition::BelowBothAnchors),
        (0.25, QueryPosition::BetweenAnchors),
        (0.5, QueryPosition::BetweenAnchors),
        (2.0, QueryPosition::AboveBothAnchors),
    ];
    for (r, expected_position) in cases {
        let query = det(r, 1024, "rep-query");
        match representation_value(&query, &frame, &f).unwrap() {
            RepresentationValue::Determined {
                value, position, ..
            } => {
                check(
                    &mut failures,
                    (value - r).abs() <= tol,
                    format!("rate {r}: value {value}, error {:.3e}", (value - r).abs()),
                );
                check(
                    &mut failures,
                    position == expected_position,
                    format!("rate {r}: position {position:?}"),
                );
            }
            RepresentationValue::Inconclusive { reason, .. } => {
                check(&mut failures, false, format!("rate {r}: inconclusive ({reason})"));
            }
        }
    }
    report(5, "representation value affine in rate", &failures);
}

#[test]
fn acceptance_06_mixture_monotonicity_and_bracket_width() {
    let mut failures = Vec::new();

    let high = det(1.0, 1024, "mix-high");
    let low = det(0.0, 1024, "mix-low");
    let f = TransformSpec::identity();
    let thresholds = RankThresholds::default();

    let alphas: Vec<f64> = (1..=9).map(|k| k as f64 / 10.0).collect();
    let rates: Vec<f64> = alphas
        .iter()
        .map(|&a| {
            let mix = mixture(&high, &low, a).unwrap();
            time_average_rate(&mix, &f).unwrap().rate
        })
        .collect();
    for w in rates.windows(2) {
        check(
            &mut failures,
            w[1] > w[0],
            format!("mixture rates not strictly increasing: {rates:?}"),
        );
    }
    for pair in alphas.windows(2) {
        let lighter = mixture(&high, &low, pair[0]).unwrap();
        let heavier = mixture(&high, &low, pair[1]).unwrap();
        let verdict = rank(&heavier, &lighter, &f, &thresholds).verdict;
        check(
            &mut failures,
            verdict == Preference::LeftPreferred,
            format!("alpha {} vs {}: verdict {verdict}", pair[1], pair[0]),
        );
    }

    let mid = det(0.3, 1024, "mix-mid");
    let result = unique_alpha_star(&high, &mid, &low, &f, &thresholds).unwrap();
    let width = result.bracket[1] - result.bracket[0];
    check(&mut failures, result.conclusive, "alpha* search was inconclusive".into());
    check(
        &mut failures,
        width <= 2f64.powi(-16),
        format!("bracket width {width:.3e} > 2^-16"),
    );
    check(
        &mut failures,
        (result.alpha_star - 0.3).abs() <= 2f64.powi(-16) + 1e-12,
        format!("alpha* {} vs 0.3", result.alpha_star),
    );
    report(6, "mixture monotonicity and bracket width", &failures);
}

#[test]
fn acceptance_07_discount_fit_recovery() {
    let mut failures = Vec::new();

    let exact: Vec<(f64, f64)> = [0.5f64, 1.0, 2.0, 4.0, 8.0]
        .iter()
        .map(|&t| (t, 2.0 * (-0.25 * t).exp()))
        .collect();
    let fit = fit_discount(&exact).unwrap();
    check(
        &mut failures,
        (fit.alpha - 0.25).abs() <= 1e-12,
        format!("noiseless alpha {} vs 0.25", fit.alpha),
    );
    check(
        &mut failures,
        (fit.beta - 2.0).abs() <= 1e-12,
        format!("noiseless beta {} vs 2", fit.beta),
    );

    let mut within = 0;
    for rep in 0..100 {
        let mut rng = derive_rng(8, "acceptance-discount", rep);
        let noise = 0.05;
        let pairs: Vec<(f64, f64)> = (1..=12)
            .map(|k| {
                let t = k as f64;
                let eps: f64 = rng.sample(rand_distr::StandardNormal);
                (t, (-0.1 * t).exp() * (noise * eps).exp())
            })
            .collect();
        let fit = fit_discount(&pairs).unwrap();
        if (fit.alpha - 0.1).abs() <= 3.0 * fit.alpha_se {
            within += 1;
        }
    }
    check(
        &mut failures,
        within >= 99,
        format!("noisy recovery within 3se on {within}/100 replications, need 99"),
    );
    report(7, "discount fit recovery", &failures);
}

#[test]
fn acceptance_08_choice_experiment_protocol() {
    let mut failures = Vec::new();
    let started = Instant::now();

    let additive = CEConfig::default_additive();
    let result = run_game(
        &additive,
        &[
            AgentSpec::Ergodicity,
            AgentSpec::StaticExponential { lambda: 1e-9 },
        ],
    )
    .unwrap();
    check(
        &mut failures,
        result.trials.len() == 312,
        format!("{} trials, expected 312", result.trials.len()),
    );
    check(
        &mut failures,
        result.passive_exposures.len() == 9 * 37,
        format!("{} passive exposures, expected 333", result.passive_exposures.len()),
    );
    check(
        &mut failures,
        result.agents.iter().all(|a| a.settled_trials.len() == 10),
        "settlement draw count is not 10".into(),
    );
    check(
        &mut failures,
        result.agreement[0][1] == 1.0,
        format!(
            "additive agreement with the vanishing-risk-aversion agent: {}",
            result.agreement[0][1]
        ),
    );

    let multiplicative = CEConfig::default_multiplicative();
    let result = run_game(
        &multiplicative,
        &[
            AgentSpec::Ergodicity,
            AgentSpec::BackwardInduction {
                horizon: 1,
                utility: TransformSpec::log(1.0).unwrap(),
            },
        ],
    )
    .unwrap();
    check(
        &mut failures,
        result.agreement[0][1] == 1.0,
        format!(
            "multiplicative agreement with horizon-1 log induction: {}",
            result.agreement[0][1]
        ),
    );

    // Pinned menu where maximizing the mean outcome and maximizing the
    // growth rate disagree: means 1.25 vs 1.2, mean logs 0 vs 0.168.
    let fixture = CEConfig {
        n_images: 4,
        images_per_game: 4,
        passive_repetitions: 1,
        n_trials: 1,
        settlement_draws: 1,
        mode: GambleMode::Multiplicative,
        image_effects: vec![2.0, 0.5, 1.4, 1.0],
        initial_endowment: 1000.0,
        seed: 0,
        wealth_update: WealthUpdate::SettlementOnly,
    };
    let menu = Trial {
        trial_id: 0,
        left: Gamble::new(0, 1).unwrap(),
        right: Gamble::new(2, 3).unwrap(),
    };
    let growth_choice = decide_ergodicity(&menu, &fixture, 1000.0).unwrap();
    let mean_choice = decide_static_exponential(&menu, &fixture, 1000.0, 1e-9).unwrap();
    check(
        &mut failures,
        growth_choice == Choice::Right && mean_choice == Choice::Left,
        format!("pinned disagreement: growth {growth_choice}, expected-wealth {mean_choice}"),
    );

    let elapsed = started.elapsed().as_secs_f64();
    check(&mut failures, elapsed < 10.0, format!("took {elapsed:.1}s, budget 10s"));
    report(8, "choice experiment protocol", &failures);
}

/// Expected utility of a fully specified contingent strategy, walking
/// every outcome path.
fn strategy_value(
    trials: &[Trial],
    cfg: &CEConfig,
    utility: &TransformSpec,
    strategy: &[Vec<Choice>],
    wealth: f64,
) -> f64 {
    let horizon = trials.len();
    let mut total = 0.0;
    for leaf in 0..(1usize << horizon) {
        let mut w = wealth;
        let mut node = 0usize;
        for (k, trial) in trials.iter().enumerate() {
            let gamble = match strategy[k][node] {
                Choice::Left => trial.left,
                Choice::Right => trial.right,
            };
            let bit = (leaf >> (horizon - 1 - k)) & 1;
            let (a, b) = gamble.images();
            let image = if bit == 0 { a } else { b };
            w = cfg.mode.apply(w, cfg.image_effects[image]);
            node = node * 2 + bit;
        }
        total += utility.eval(w).unwrap();
    }
    total / (1u64 << horizon) as f64
}

/// Brute-force maximum expected utility over every contingent strategy.
fn best_by_enumeration(
    trials: &[Trial],
    cfg: &CEConfig,
    utility: &TransformSpec,
    wealth: f64,
) -> f64 {
    let horizon = trials.len();
    let n_nodes: usize = (1usize << horizon) - 1;
    let mut best = f64::NEG_INFINITY;
    for mask in 0..(1u64 << n_nodes) {
        let mut strategy = Vec::with_capacity(horizon);
        let mut bit = 0;
        for k in 0..horizon {
            let level: Vec<Choice> = (0..(1usize << k))
                .map(|_| {
                    let choice = if (mask >> bit) & 1 == 0 {
                        Choice::Left
                    } else {
                        Choice::Right
                    };
                    bit += 1;
                    choice
                })
                .collect();
            strategy.push(level);
        }
        best = best.max(strategy_value(trials, cfg, utility, &strategy, wealth));
    }
    best
}

#[test]
fn acceptance_09_backward_induction_matches_enumeration() {
    let mut failures = Vec::new();

    // The three ways to split four images into two disjoint pairs.
    const SPLITS: [[usize; 4]; 3] = [[0, 1, 2, 3], [0, 2, 1, 3], [0, 3, 1, 2]];
    for horizon in 1..=3usize {
        for rep in 0..50u64 {
            let mut rng = derive_rng(11, "acceptance-bi", horizon as u64 * 100 + rep);
            let multiplicative = rep % 2 == 1;
            let (mode, effects, utility) = if multiplicative {
                let effects: Vec<f64> = (0..4).map(|_| rng.gen_range(0.5..2.0)).collect();
                (
                    GambleMode::Multiplicative,
                    effects,
                    TransformSpec::crra(0.5, 1.0).unwrap(),
                )
            } else {
                let effects: Vec<f64> = (0..4).map(|_| rng.gen_range(-50.0..50.0)).collect();
                (
                    GambleMode::Additive,
                    effects,
                    TransformSpec::exponential(0.002, 0.0).unwrap(),
                )
            };
            let cfg = CEConfig {
                n_images: 4,
                images_per_game: 4,
                passive_repetitions: 1,
                n_trials: horizon,
                settlement_draws: 1,
                mode,
                image_effects: effects,
                initial_endowment: 1000.0,
                seed: 0,
                wealth_update: WealthUpdate::SettlementOnly,
            };
            let trials: Vec<Trial> = (0..horizon)
                .map(|t| {
                    let split = SPLITS[rng.gen_range(0..3)];
                    let g1 = Gamble::new(split[0], split[1]).unwrap();
                    let g2 = Gamble::new(split[2], split[3]).unwrap();
                    let (left, right) = if rng.gen_bool(0.5) { (g1, g2) } else { (g2, g1) };
                    Trial { trial_id: t, left, right }
                })
                .collect();
            let plan =
                decide_backward_induction(&trials, &cfg, horizon, &utility, 1000.0).unwrap();
            let best = best_by_enumeration(&trials, &cfg, &utility, 1000.0);
            let err = (plan.expected_utility - best).abs();
            check(
                &mut failures,
                err <= 1e-12 * (1.0 + best.abs()),
                format!("horizon {horizon} rep {rep}: recursion {} vs enumeration {best}",
                    plan.expected_utility),
            );
        }
    }
    report(9, "backward induction matches enumeration", &failures);
}

#[test]
fn acceptance_10_rank_verdicts_affine_invariant() {
    let mut failures = Vec::new();

    let sigma = "0.2*x";
    let fast = build_ito("0.08*x", sigma, Interval::POSITIVE).unwrap();
    let slow = build_ito("0.03*x", sigma, Interval::POSITIVE).unwrap();
    let fast_ens = simulate_ito(&fast, 1.0, 0.01, 120.0, 64, 3).unwrap();
    let slow_ens = simulate_ito(&slow, 1.0, 0.01, 120.0, 64, 3).unwrap();

    let favorable =
        DiscreteDynamics::uniform(GambleMode::Multiplicative, vec![1.05, 0.95]).unwrap();
    let ruinous = DiscreteDynamics::uniform(GambleMode::Multiplicative, vec![1.5, 0.6]).unwrap();
    let favorable_ens = simulate_discrete(&favorable, 1.0, 1024, 256, 9).unwrap();
    let ruinous_ens = simulate_discrete(&ruinous, 1.0, 1024, 256, 9).unwrap();

    let det_fast = det(0.3, 1024, "affine-fast");
    let det_slow = det(0.1, 1024, "affine-slow");
    let det_even = det(0.2, 1024, "affine-even");

    let log = TransformSpec::log(1.0).unwrap();
    let identity = TransformSpec::identity();
    let thresholds = RankThresholds::default();

    let matrix: [(&str, &Ensemble, &Ensemble, &TransformSpec, Option<Preference>); 6] = [
        ("gbm fast vs slow", &fast_ens, &slow_ens, &log, Some(Preference::LeftPreferred)),
        ("gbm vs itself", &fast_ens, &fast_ens, &log, Some(Preference::Indifferent)),
        ("ruinous vs favorable gamble", &ruinous_ens, &favorable_ens, &log,
            Some(Preference::RightPreferred)),
        ("deterministic fast vs slow", &det_fast, &det_slow, &identity,
            Some(Preference::LeftPreferred)),
        ("deterministic even pair", &det_even, &det_even, &identity,
            Some(Preference::Indifferent)),
        ("gamble vs itself", &ruinous_ens, &ruinous_ens, &log, Some(Preference::Indifferent)),
    ];

    for (name, left, right, f, expected) in matrix {
        let rescaled = f.scaled_by(3.0, 7.0).unwrap();
        let base = rank(left, right, f, &thresholds).verdict;
        let shifted = rank(left, right, &rescaled, &thresholds).verdict;
        check(
            &mut failures,
            base == shifted,
            format!("{name}: verdict {base} under f but {shifted} under 3f+7"),
        );
        if let Some(expected) = expected {
            check(
                &mut failures,
                base == expected,
                format!("{name}: verdict {base}, expected {expected}"),
            );
        }
    }
    report(10, "rank verdicts affine invariant", &failures);
}
