//! Command-line front end: reads a TOML run configuration, dispatches
//! to the library, and writes machine-readable artifacts plus a run
//! manifest into the output directory.
//!
//! Exit codes are stable: 0 success, 2 configuration error, 3 domain
//! refusal (a dynamic that admits no ergodic transformation), 4 numeric
//! failure.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use ergokit::growth::{diagnose_ensemble, growth_report, Budget};
use ergokit::preference::{
    fit_discount, rank, representation_value, RankThresholds, RepresentationFrame,
    RepresentationValue,
};
use ergokit::swp::Ensemble;
use ergokit::transform::{derive_transform, TransformSpec};
use ergokit::{ce, Error, Result, RunConfig};

#[derive(Parser)]
#[command(
    name = "ergokit",
    version,
    about = "Simulate stochastic wealth processes, diagnose ergodicity, \
             derive growth transforms, and rank gambles by time-average growth"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate an ensemble; writes ensemble.csv and a binary cache
    Simulate(CommonArgs),
    /// Estimate growth rates and issue an ergodicity verdict
    Diagnose(CommonArgs),
    /// Derive the ergodic transformation of an Ito dynamic
    Derive(CommonArgs),
    /// Rank the [dynamics.left] and [dynamics.right] processes
    Rank(CommonArgs),
    /// Run the synthetic gamble-choice experiment
    Ce(CommonArgs),
    /// Place a deterministic growth rate on an anchored scale
    Calibrate(CommonArgs),
    /// Fit exponential decay to horizon/value discounting data
    DiscountFit(DiscountArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// TOML run configuration
    #[arg(long)]
    config: Option<PathBuf>,

    /// Master seed; overrides the config file
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory, created if absent
    #[arg(long, default_value = ".")]
    out: PathBuf,

    /// Budget override: "n_paths=256,dt=0.001,t_max=120" or "256,0.001,120"
    #[arg(long)]
    budget: Option<String>,
}

#[derive(Args)]
struct DiscountArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// CSV of horizon,value rows (a header line is allowed)
    #[arg(long)]
    data: PathBuf,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => Runner::new("simulate", args)?.simulate(),
        Command::Diagnose(args) => Runner::new("diagnose", args)?.diagnose(),
        Command::Derive(args) => Runner::new("derive", args)?.derive(),
        Command::Rank(args) => Runner::new("rank", args)?.rank(),
        Command::Ce(args) => Runner::new("ce", args)?.ce(),
        Command::Calibrate(args) => Runner::new("calibrate", args)?.calibrate(),
        Command::DiscountFit(args) => {
            Runner::new("discount-fit", args.common)?.discount_fit(&args.data)
        }
    }
}

/// Partial budget override parsed from the --budget flag.
#[derive(Default)]
struct BudgetOverride {
    n_paths: Option<usize>,
    dt: Option<f64>,
    t_max: Option<f64>,
}

impl BudgetOverride {
    fn parse(text: &str) -> Result<Self> {
        let bad = |detail: &str| {
            Error::Config(format!(
                "--budget expects \"n_paths=N,dt=DT,t_max=T\" (any subset) \
                 or the positional form \"N,DT,T\"; {detail}"
            ))
        };
        let parts: Vec<&str> = text.split(',').map(str::trim).collect();
        let mut over = BudgetOverride::default();
        if parts.iter().any(|p| p.contains('=')) {
            for part in parts {
                let (key, value) = part
                    .split_once('=')
                    .ok_or_else(|| bad(&format!("got bare value \"{part}\" among named ones")))?;
                match key.trim() {
                    "n_paths" => {
                        over.n_paths = Some(value.trim().parse().map_err(|_| {
                            bad(&format!("n_paths must be an integer, got \"{value}\""))
                        })?)
                    }
                    "dt" => {
                        over.dt = Some(value.trim().parse().map_err(|_| {
                            bad(&format!("dt must be a number, got \"{value}\""))
                        })?)
                    }
                    "t_max" => {
                        over.t_max = Some(value.trim().parse().map_err(|_| {
                            bad(&format!("t_max must be a number, got \"{value}\""))
                        })?)
                    }
                    other => return Err(bad(&format!("unknown key \"{other}\""))),
                }
            }
        } else {
            if parts.len() != 3 {
                return Err(bad(&format!("got {} positional values", parts.len())));
            }
            over.n_paths = Some(parts[0].parse().map_err(|_| {
                bad(&format!("n_paths must be an integer, got \"{}\"", parts[0]))
            })?);
            over.dt = Some(
                parts[1]
                    .parse()
                    .map_err(|_| bad(&format!("dt must be a number, got \"{}\"", parts[1])))?,
            );
            over.t_max = Some(
                parts[2]
                    .parse()
                    .map_err(|_| bad(&format!("t_max must be a number, got \"{}\"", parts[2])))?,
            );
        }
        Ok(over)
    }
}

#[derive(Serialize)]
struct RunManifest {
    subcommand: String,
    config_path: Option<String>,
    config_sha256: Option<String>,
    data_path: Option<String>,
    data_sha256: Option<String>,
    seed: u64,
    out_dir: String,
    tool_version: String,
    started_unix_ms: u128,
    wall_clock_ms: u128,
    outputs: Vec<String>,
}

struct Runner {
    subcommand: &'static str,
    config: RunConfig,
    config_path: Option<PathBuf>,
    seed_flag: Option<u64>,
    budget_flag: BudgetOverride,
    out: PathBuf,
    started: Instant,
    outputs: Vec<String>,
    data_path: Option<PathBuf>,
}

impl Runner {
    fn new(subcommand: &'static str, args: CommonArgs) -> Result<Self> {
        let config = match &args.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let budget_flag = match &args.budget {
            Some(text) => BudgetOverride::parse(text)?,
            None => BudgetOverride::default(),
        };
        std::fs::create_dir_all(&args.out)?;
        Ok(Runner {
            subcommand,
            config,
            config_path: args.config,
            seed_flag: args.seed,
            budget_flag,
            out: args.out,
            started: Instant::now(),
            outputs: Vec::new(),
            data_path: None,
        })
    }

    /// Effective budget: crate defaults, then the config file, then flags.
    fn budget(&self) -> Budget {
        let mut budget = self.config.budget(self.seed_flag);
        if let Some(n) = self.budget_flag.n_paths {
            budget.n_paths = n;
        }
        if let Some(dt) = self.budget_flag.dt {
            budget.dt = dt;
        }
        if let Some(t_max) = self.budget_flag.t_max {
            budget.t_max = t_max;
        }
        budget
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        let mut file = BufWriter::new(File::create(self.path(name))?);
        file.write_all(text.as_bytes())?;
        if !text.ends_with('\n') {
            file.write_all(b"\n")?;
        }
        file.flush()?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value)
            .map_err(|e| Error::Serialize(e.to_string()))?;
        self.write_text(name, &text)
    }

    fn finish(&mut self, seed: u64) -> Result<()> {
        let manifest = RunManifest {
            subcommand: self.subcommand.to_string(),
            config_path: self.config_path.as_ref().map(|p| p.display().to_string()),
            config_sha256: match &self.config_path {
                Some(path) => Some(sha256_file(path)?),
                None => None,
            },
            data_path: self.data_path.as_ref().map(|p| p.display().to_string()),
            data_sha256: match &self.data_path {
                Some(path) => Some(sha256_file(path)?),
                None => None,
            },
            seed,
            out_dir: self.out.display().to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix_ms: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis().saturating_sub(self.started.elapsed().as_millis()))
                .unwrap_or(0),
            wall_clock_ms: self.started.elapsed().as_millis(),
            outputs: std::mem::take(&mut self.outputs),
        };
        let text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::Serialize(e.to_string()))?;
        let mut file = BufWriter::new(File::create(self.path("manifest.json"))?);
        file.write_all(text.as_bytes())?;
        file.write_all(b"\n")?;
        file.flush()?;
        Ok(())
    }

    fn simulate(mut self) -> Result<()> {
        let process = self.config.single_process()?;
        let budget = self.budget();
        let ens = process.simulate(&budget)?;
        let mut csv = Vec::new();
        ens.write_csv(&mut csv)?;
        let text = String::from_utf8(csv).expect("csv output is ascii");
        self.write_text("ensemble.csv", &text)?;
        ens.write_cache(&self.path("ensemble.bin"))?;
        self.outputs.push("ensemble.bin".to_string());
        println!(
            "simulate: {} paths, {} samples each, {} clipped, fingerprint {}",
            ens.n_paths(),
            ens.n_times(),
            ens.n_clipped(),
            ens.fingerprint()
        );
        self.finish(budget.seed)
    }

    fn diagnose(mut self) -> Result<()> {
        let process = self.config.single_process()?;
        let budget = self.budget();
        let f = self.config.transform(process.ito())?;
        let ens = process.simulate(&budget)?;
        let report = diagnose_ensemble(&ens, &f);

        let mut trace = String::from("t,time_avg_rate\n");
        if let Some(ta) = &report.time_average {
            for cp in &ta.checkpoints {
                trace.push_str(&format!("{},{}\n", cp.t, cp.rate));
            }
        }
        self.write_text("trace.csv", &trace)?;
        // The growth summary needs more data than the verdict does; on
        // starved budgets the verdict report stands alone.
        match growth_report(&ens, ens.t_max(), &f) {
            Ok(growth) => self.write_text("growth.json", &growth.to_json()?)?,
            Err(e) => eprintln!("note: growth summary unavailable: {e}"),
        }
        self.write_json("report.json", &report)?;
        println!("diagnose: {} ({})", report.verdict, report.reason);
        self.finish(budget.seed)
    }

    fn derive(mut self) -> Result<()> {
        let process = self.config.single_process()?;
        let dynamics = process.ito().ok_or_else(|| {
            Error::Config("derive needs an ito [dynamics] section".into())
        })?;
        let x_ref = self
            .config
            .transform
            .as_ref()
            .and_then(|t| t.x_ref)
            .unwrap_or(1.0);
        let spec = derive_transform(dynamics, x_ref)?;
        self.write_json("transform.json", &spec)?;
        println!("derive: {} for {}", spec.render(), dynamics.describe());
        self.finish(self.config.budget(self.seed_flag).seed)
    }

    fn rank(mut self) -> Result<()> {
        let (left, right) = self.config.process_pair()?;
        let budget = self.budget();
        // Both sides share the seed, so paired noise cancels from the
        // growth-rate difference.
        let f = self.config.transform(left.ito())?;
        let left_ens = left.simulate(&budget)?;
        let right_ens = right.simulate(&budget)?;
        let result = rank(&left_ens, &right_ens, &f, &RankThresholds::default());
        self.write_json("ranking.json", &result)?;
        println!("rank: {} ({})", result.verdict, result.reason);
        self.finish(budget.seed)
    }

    fn ce(mut self) -> Result<()> {
        let seed = self.budget().seed;
        let (cfg, agents) = self.config.ce(seed)?;
        let result = ce::run_game(&cfg, &agents)?;
        let mut csv = Vec::new();
        result.write_csv(&mut csv)?;
        let text = String::from_utf8(csv).expect("csv output is ascii");
        self.write_text("trials.csv", &text)?;
        self.write_text("summary.json", &result.summary_json()?)?;
        for agent in &result.agents {
            println!(
                "ce: {} terminal wealth {}{}",
                agent.name,
                agent.terminal_wealth,
                if agent.clipped { " (clipped)" } else { "" }
            );
        }
        self.finish(seed)
    }

    fn calibrate(mut self) -> Result<()> {
        let (high, low, query) = self.config.calibrate().rates()?;
        let budget = self.budget();
        let make = |rate: f64, label: &str| -> Result<Ensemble> {
            deterministic_growth(rate, &budget, label)
        };
        let frame = RepresentationFrame {
            anchor_high: make(high, "calibrate-high")?,
            anchor_low: make(low, "calibrate-low")?,
            thresholds: RankThresholds::default(),
        };
        let query_ens = make(query, "calibrate-query")?;
        let result = representation_value(&query_ens, &frame, &TransformSpec::identity())?;

        #[derive(Serialize)]
        struct Calibration {
            high_rate: f64,
            low_rate: f64,
            query_rate: f64,
            #[serde(flatten)]
            result: RepresentationValue,
        }
        let report = Calibration {
            high_rate: high,
            low_rate: low,
            query_rate: query,
            result: result.clone(),
        };
        self.write_json("calibration.json", &report)?;
        match &result {
            RepresentationValue::Determined {
                value, alpha_star, ..
            } => println!("calibrate: value {value}, alpha* {alpha_star}"),
            RepresentationValue::Inconclusive { reason, .. } => {
                println!("calibrate: inconclusive ({reason})")
            }
        }
        self.finish(budget.seed)
    }

    fn discount_fit(mut self, data: &Path) -> Result<()> {
        self.data_path = Some(data.to_path_buf());
        let pairs = read_discount_csv(data)?;
        let fit = fit_discount(&pairs)?;
        self.write_json("discount.json", &fit)?;
        println!(
            "discount-fit: alpha {} (se {}), beta {}, {} points",
            fit.alpha, fit.alpha_se, fit.beta, fit.n_points
        );
        self.finish(self.config.budget(self.seed_flag).seed)
    }
}

/// Two identical straight-line paths at the given rate: the smallest
/// ensemble on which the growth estimators are exact.
fn deterministic_growth(rate: f64, budget: &Budget, label: &str) -> Result<Ensemble> {
    let n = ((budget.t_max / budget.dt).round() as usize).clamp(1024, 4096);
    let times: Vec<f64> = (0..=n)
        .map(|k| k as f64 * budget.t_max / n as f64)
        .collect();
    let path: Vec<f64> = times.iter().map(|&t| rate * t).collect();
    Ensemble::from_paths(times, vec![path.clone(), path], budget.seed, label)
}

fn read_discount_csv(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut pairs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',').map(str::trim);
        let parsed = match (fields.next(), fields.next(), fields.next()) {
            (Some(a), Some(b), None) => a
                .parse::<f64>()
                .and_then(|x| b.parse::<f64>().map(|y| (x, y)))
                .ok(),
            _ => None,
        };
        match parsed {
            Some(pair) => pairs.push(pair),
            // A single non-numeric leading line is a header.
            None if lineno == 0 => continue,
            None => {
                return Err(Error::Config(format!(
                    "{}:{}: expected \"horizon,value\", got \"{line}\"",
                    path.display(),
                    lineno + 1
                )))
            }
        }
    }
    Ok(pairs)
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}
