//! Command-line workbench: dataset generation, training, evaluation,
//! single-scenario simulation, and team-size sweeps.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pdsim_core::dataset::{
    dataset_from_text, dataset_to_text, generate_dataset, generate_scenario, oversample, split,
    DatasetConfig, Sample,
};
use pdsim_core::encoding::SpikePattern;
use pdsim_core::evaluation::{
    self, comparison_report, dsl_successes_paired, evaluate_test_set, expert_successes,
    learning_efficiency, naive_successes, scalability_sweep, summarize, summary_report,
    sweep_report, zone_metrics_report, Mode, Observation,
};
use pdsim_core::expert::prune_infeasible;
use pdsim_core::runner::scenario_rng;
use pdsim_core::sefron::{SefronNetwork, TrainingConfig};
use pdsim_core::world::{simulate_episode, Scenario};
use pdsim_core::{Error, LabelVector, Result};

#[derive(Parser)]
#[command(name = "pdsim", version, about = "Perimeter-defense simulation and learning workbench")]
struct CliArgs {
    /// Worker threads for scenario-parallel stages.
    #[arg(long, global = true, default_value_t = 2)]
    jobs: usize,
    /// Output directory (overridable via the PDSIM_OUT_DIR environment variable).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Run-configuration file (key = value lines); flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigOverrides {
    /// Monte-Carlo runs (scenarios).
    #[arg(long)]
    runs: Option<usize>,
    /// Observation mode: full (36 zones) or partial (15 zones).
    #[arg(long)]
    observation: Option<String>,
    /// Defender team size.
    #[arg(long)]
    team_size: Option<usize>,
    /// Neighbor-smoothing factor used by the consensus step.
    #[arg(long)]
    alpha: Option<f64>,
    /// Training epochs.
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled dataset: full sample set plus balanced train and
    /// test splits, with a manifest of the resolved configuration.
    GenData {
        #[command(flatten)]
        overrides: ConfigOverrides,
    },
    /// Train a classifier on a dataset file and persist the model.
    Train {
        /// Training split produced by gen-data.
        #[arg(long)]
        train_file: PathBuf,
        /// Model output path (default: <out-dir>/model.txt).
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: ConfigOverrides,
    },
    /// Evaluate: zone metrics on a test file and/or success-rate suites on
    /// fresh scenarios, writing tab-separated reports.
    Eval {
        /// Trained model file.
        #[arg(long)]
        model: PathBuf,
        /// Test split for per-zone metrics.
        #[arg(long)]
        test_file: Option<PathBuf>,
        /// Suite mode: all | expert | dsl | naive.
        #[arg(long, default_value = "all")]
        mode: String,
        /// Evaluate the neighbor effect (emits both DSL columns when on).
        #[arg(long, default_value = "on")]
        neighbors: String,
        #[command(flatten)]
        overrides: ConfigOverrides,
    },
    /// Simulate one scenario end to end and dump chains, trajectories, and
    /// capture reports.
    Simulate {
        /// Scenario file (one scenario per line); generated when absent.
        #[arg(long)]
        scenario_file: Option<PathBuf>,
        /// Line index into the scenario file.
        #[arg(long, default_value_t = 0)]
        index: usize,
        /// Optional model for the learned policy.
        #[arg(long)]
        model: Option<PathBuf>,
        #[command(flatten)]
        overrides: ConfigOverrides,
    },
    /// Expert-vs-learned success across team sizes with a fixed network.
    Sweep {
        #[arg(long)]
        model: PathBuf,
        /// Comma-separated team sizes, e.g. 2,3,4,5,6,7,8.
        #[arg(long, default_value = "2,3,4,5,6,7,8")]
        team_sizes: String,
        #[command(flatten)]
        overrides: ConfigOverrides,
    },
}

/// Resolved run configuration: dataset, training, and consensus settings.
#[derive(Clone, Debug)]
struct RunConfig {
    dataset: DatasetConfig<f64>,
    training: TrainingConfig<f64>,
    alpha: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: DatasetConfig::paper_default(),
            training: TrainingConfig::default(),
            alpha: 0.5,
        }
    }
}

impl RunConfig {
    fn to_text(&self) -> String {
        let d = &self.dataset;
        let t = &self.training;
        format!(
            "# pdsim run configuration\n\
             num_segments = {}\nteam_size = {}\npoisson_rate = {}\nhorizon = {}\n\
             t_interval = {}\nruns = {}\nseed = {}\ntrain_fraction = {}\n\
             observed_zones = {}\ndefender_speed = {}\nintruder_speed = {}\n\
             oversample_factor = {}\nalpha = {}\n\
             t_ideal = {}\nt_margin = {}\ntau = {}\nsigma = {}\na_plus = {}\na_minus = {}\n\
             tau_plus = {}\ntau_minus = {}\nlearning_rate = {}\nepochs = {}\ngrid_points = {}\n",
            d.num_segments,
            d.team_size,
            d.poisson_rate,
            d.horizon,
            d.t_interval,
            d.runs,
            d.seed,
            d.train_fraction,
            d.observed_zones,
            d.defender_speed,
            d.intruder_speed,
            d.oversample_factor,
            self.alpha,
            t.t_ideal,
            t.t_margin,
            t.tau,
            t.sigma,
            t.a_plus,
            t.a_minus,
            t.tau_plus,
            t.tau_minus,
            t.learning_rate,
            t.epochs,
            t.grid_points,
        )
    }

    fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "{}:{}: expected 'key = value', got {raw:?}",
                    path.display(),
                    lineno + 1
                ))
            })?;
            let key = key.trim();
            let value = value.trim();
            cfg.set(key, value).map_err(|e| {
                Error::Config(format!("{}:{}: {e}", path.display(), lineno + 1))
            })?;
        }
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::Config(format!("bad {what} value {value:?}"));
        let d = &mut self.dataset;
        let t = &mut self.training;
        match key {
            "num_segments" => d.num_segments = value.parse().map_err(|_| bad(key))?,
            "team_size" => d.team_size = value.parse().map_err(|_| bad(key))?,
            "poisson_rate" => d.poisson_rate = value.parse().map_err(|_| bad(key))?,
            "horizon" => d.horizon = value.parse().map_err(|_| bad(key))?,
            "t_interval" => {
                d.t_interval = value.parse().map_err(|_| bad(key))?;
                t.t_interval = d.t_interval;
            }
            "runs" => d.runs = value.parse().map_err(|_| bad(key))?,
            "seed" => d.seed = value.parse().map_err(|_| bad(key))?,
            "train_fraction" => d.train_fraction = value.parse().map_err(|_| bad(key))?,
            "observed_zones" => d.observed_zones = value.parse().map_err(|_| bad(key))?,
            "defender_speed" => d.defender_speed = value.parse().map_err(|_| bad(key))?,
            "intruder_speed" => d.intruder_speed = value.parse().map_err(|_| bad(key))?,
            "oversample_factor" => d.oversample_factor = value.parse().map_err(|_| bad(key))?,
            "alpha" => self.alpha = value.parse().map_err(|_| bad(key))?,
            "t_ideal" => t.t_ideal = value.parse().map_err(|_| bad(key))?,
            "t_margin" => t.t_margin = value.parse().map_err(|_| bad(key))?,
            "tau" => t.tau = value.parse().map_err(|_| bad(key))?,
            "sigma" => t.sigma = value.parse().map_err(|_| bad(key))?,
            "a_plus" => t.a_plus = value.parse().map_err(|_| bad(key))?,
            "a_minus" => t.a_minus = value.parse().map_err(|_| bad(key))?,
            "tau_plus" => t.tau_plus = value.parse().map_err(|_| bad(key))?,
            "tau_minus" => t.tau_minus = value.parse().map_err(|_| bad(key))?,
            "learning_rate" => t.learning_rate = value.parse().map_err(|_| bad(key))?,
            "epochs" => t.epochs = value.parse().map_err(|_| bad(key))?,
            "grid_points" => t.grid_points = value.parse().map_err(|_| bad(key))?,
            other => return Err(Error::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    fn apply(&mut self, seed: Option<u64>, overrides: &ConfigOverrides) -> Result<()> {
        if let Some(seed) = seed {
            self.dataset.seed = seed;
        }
        if let Some(runs) = overrides.runs {
            self.dataset.runs = runs;
        }
        if let Some(team) = overrides.team_size {
            self.dataset.team_size = team;
        }
        if let Some(alpha) = overrides.alpha {
            self.alpha = alpha;
        }
        if let Some(epochs) = overrides.epochs {
            self.training.epochs = epochs;
        }
        if let Some(obs) = &overrides.observation {
            self.dataset.observed_zones = match obs.as_str() {
                "full" => self.dataset.num_segments,
                "partial" => 15.min(self.dataset.num_segments),
                other => {
                    return Err(Error::Config(format!(
                        "observation must be 'full' or 'partial', got {other:?}"
                    )))
                }
            };
        }
        self.dataset.validate()?;
        self.training.validate()?;
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        Ok(())
    }

    fn observation(&self) -> Observation {
        if self.dataset.observed_zones == self.dataset.num_segments {
            Observation::Full
        } else {
            Observation::Partial
        }
    }
}

fn main() -> ExitCode {
    let args = CliArgs::parse();
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(args: CliArgs) -> Result<()> {
    let out_dir = args
        .out_dir
        .clone()
        .or_else(|| std::env::var_os("PDSIM_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out_dir)?;

    let mut cfg = match &args.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };

    match &args.command {
        Command::GenData { overrides } => {
            cfg.apply(args.seed, overrides)?;
            write_resolved(&out_dir, &cfg)?;
            cmd_gen_data(&cfg, &out_dir, args.jobs)
        }
        Command::Train {
            train_file,
            out,
            overrides,
        } => {
            cfg.apply(args.seed, overrides)?;
            write_resolved(&out_dir, &cfg)?;
            let model_path = out.clone().unwrap_or_else(|| out_dir.join("model.txt"));
            cmd_train(&cfg, train_file, &model_path, &out_dir)
        }
        Command::Eval {
            model,
            test_file,
            mode,
            neighbors,
            overrides,
        } => {
            cfg.apply(args.seed, overrides)?;
            write_resolved(&out_dir, &cfg)?;
            cmd_eval(
                &cfg,
                model,
                test_file.as_deref(),
                mode,
                neighbors == "on",
                &out_dir,
                args.jobs,
            )
        }
        Command::Simulate {
            scenario_file,
            index,
            model,
            overrides,
        } => {
            cfg.apply(args.seed, overrides)?;
            cmd_simulate(&cfg, scenario_file.as_deref(), *index, model.as_deref(), &out_dir)
        }
        Command::Sweep {
            model,
            team_sizes,
            overrides,
        } => {
            cfg.apply(args.seed, overrides)?;
            write_resolved(&out_dir, &cfg)?;
            cmd_sweep(&cfg, model, team_sizes, &out_dir, args.jobs)
        }
    }
}

fn write_resolved(out_dir: &Path, cfg: &RunConfig) -> Result<()> {
    fs::write(out_dir.join("run-config.txt"), cfg.to_text())?;
    Ok(())
}

fn cmd_gen_data(cfg: &RunConfig, out_dir: &Path, jobs: usize) -> Result<()> {
    let samples = generate_dataset(&cfg.dataset, jobs)?;
    fs::write(
        out_dir.join("dataset.txt"),
        dataset_to_text(&cfg.dataset, &samples),
    )?;
    let total = samples.len();
    let (train, test) = split(samples, cfg.dataset.train_fraction, cfg.dataset.seed)?;
    let mut rng = scenario_rng(cfg.dataset.seed, u64::MAX - 1);
    let balanced = oversample(&train, &mut rng, cfg.dataset.oversample_factor);
    fs::write(
        out_dir.join("train.txt"),
        dataset_to_text(&cfg.dataset, &balanced),
    )?;
    fs::write(
        out_dir.join("test.txt"),
        dataset_to_text(&cfg.dataset, &test),
    )?;
    fs::write(
        out_dir.join("manifest.txt"),
        format!(
            "samples = {total}\ntrain_raw = {}\ntrain_balanced = {}\ntest = {}\n\
             files = dataset.txt train.txt test.txt\nseed = {}\n",
            train.len(),
            balanced.len(),
            test.len(),
            cfg.dataset.seed
        ),
    )?;
    println!(
        "wrote {total} samples ({} balanced train, {} test) to {}",
        balanced.len(),
        test.len(),
        out_dir.display()
    );
    Ok(())
}

fn load_samples(path: &Path) -> Result<(DatasetConfig<f64>, Vec<Sample<f64>>)> {
    let text = fs::read_to_string(path)?;
    dataset_from_text(&text)
}

fn cmd_train(cfg: &RunConfig, train_file: &Path, model_path: &Path, out_dir: &Path) -> Result<()> {
    let (data_cfg, samples) = load_samples(train_file)?;
    if samples.is_empty() {
        return Err(Error::Config(format!(
            "training file {} holds no samples",
            train_file.display()
        )));
    }
    let m = data_cfg.observed_zones;
    let mut training = cfg.training.clone();
    training.t_interval = data_cfg.t_interval;
    let refs: Vec<(&SpikePattern<f64>, &LabelVector)> =
        samples.iter().map(|s| (&s.pattern, &s.labels)).collect();
    for gap in pdsim_core::sefron::coverage_gaps(m, &refs, &training) {
        eprintln!(
            "warning: zone {} has no usable sample with label {}; its {} neuron stays silent",
            gap.zone,
            gap.label as u8,
            if gap.label { "assigned" } else { "unassigned" }
        );
    }
    let mut net = SefronNetwork::initialize(m, &refs, training)?;
    let trace = net.train(&refs)?;
    fs::write(model_path, net.to_text())?;
    let mut trace_text = String::from("epoch\thamming_error\n");
    for (epoch, err) in trace.epoch_errors.iter().enumerate() {
        trace_text.push_str(&format!("{epoch}\t{err}\n"));
    }
    fs::write(out_dir.join("train-trace.txt"), trace_text)?;
    println!(
        "trained {} zones on {} samples for {} epochs ({} degenerate updates skipped); model at {}",
        m,
        samples.len(),
        trace.epoch_errors.len(),
        trace.skipped_updates,
        model_path.display()
    );
    Ok(())
}

fn cmd_eval(
    cfg: &RunConfig,
    model_path: &Path,
    test_file: Option<&Path>,
    mode: &str,
    neighbors: bool,
    out_dir: &Path,
    jobs: usize,
) -> Result<()> {
    let net = SefronNetwork::<f64>::from_text(&fs::read_to_string(model_path)?)?;
    if net.num_zones() != cfg.dataset.observed_zones {
        return Err(Error::Shape(format!(
            "model predicts {} zones but the configuration observes {}",
            net.num_zones(),
            cfg.dataset.observed_zones
        )));
    }
    let observation = cfg.observation();

    if let Some(test_file) = test_file {
        let (data_cfg, samples) = load_samples(test_file)?;
        if data_cfg.observed_zones != net.num_zones() {
            return Err(Error::Shape(format!(
                "model predicts {} zones but {} holds {}-zone samples",
                net.num_zones(),
                test_file.display(),
                data_cfg.observed_zones
            )));
        }
        let metrics = evaluate_test_set(&net, &samples, jobs)?;
        fs::write(out_dir.join("zone-metrics.tsv"), zone_metrics_report(&metrics))?;
        println!("zone metrics over {} samples -> zone-metrics.tsv", samples.len());
    }

    let run_expert = matches!(mode, "all" | "expert");
    let run_dsl = matches!(mode, "all" | "dsl");
    let run_naive = matches!(mode, "all" | "naive");
    let mut summaries = Vec::new();
    let mut expert_summary = None;
    if run_expert {
        let s = summarize(&expert_successes(&cfg.dataset, jobs)?, Mode::Expert, observation);
        println!("expert success: {:.4} over {} runs", s.mean, s.runs);
        expert_summary = Some(s.clone());
        summaries.push(s);
    }
    if run_dsl {
        let (with_n, without_n) =
            dsl_successes_paired(&net, &cfg.dataset, cfg.alpha, jobs)?;
        let dsl = summarize(&without_n, Mode::Dsl, observation);
        println!("dsl success: {:.4}", dsl.mean);
        let dsl_n = neighbors.then(|| {
            let s = summarize(&with_n, Mode::DslNeighbors, observation);
            println!("dsl+neighbors success: {:.4}", s.mean);
            s
        });
        if let (Some(expert), Some(dsl_n)) = (&expert_summary, &dsl_n) {
            let eff = learning_efficiency(dsl_n, expert)?;
            println!("learning efficiency: {eff:.2}%");
            let table = comparison_report(&[(
                observation,
                expert.clone(),
                dsl.clone(),
                dsl_n.clone(),
            )])?;
            fs::write(out_dir.join("comparison.tsv"), table)?;
        }
        summaries.push(dsl);
        summaries.extend(dsl_n);
    }
    if run_naive {
        let s = summarize(&naive_successes(&cfg.dataset, jobs)?, Mode::Naive, observation);
        println!("naive success: {:.4}", s.mean);
        summaries.push(s);
    }
    if !summaries.is_empty() {
        fs::write(out_dir.join("summaries.tsv"), summary_report(&summaries))?;
    }
    Ok(())
}

fn cmd_simulate(
    cfg: &RunConfig,
    scenario_file: Option<&Path>,
    index: usize,
    model_path: Option<&Path>,
    out_dir: &Path,
) -> Result<()> {
    let scenario: Scenario<f64> = match scenario_file {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            let line = text.lines().nth(index).ok_or_else(|| {
                Error::Config(format!("{} has no line {index}", path.display()))
            })?;
            Scenario::from_line(line)?
        }
        None => {
            let mut rng = scenario_rng(cfg.dataset.seed, index as u64);
            generate_scenario(&cfg.dataset, &mut rng)
        }
    };
    let mut out = String::new();
    out.push_str(&format!("scenario: {}\n\n", scenario.to_line()));

    let solution = prune_infeasible(&scenario, cfg.dataset.kappa())?;
    out.push_str("expert solution:\n");
    out.push_str(&solution.dump());
    let expert_report = simulate_episode(&scenario, &solution.trajectories())?;
    out.push_str(&format!(
        "expert success: {:.2}% ({} captured, {} escaped)\n",
        expert_report.success_percentage,
        expert_report.captured.len(),
        expert_report.escaped.len()
    ));

    if let Some(model_path) = model_path {
        let net = SefronNetwork::<f64>::from_text(&fs::read_to_string(model_path)?)?;
        let predictions = evaluation::network_predictions(&net, &scenario, &cfg.dataset)?;
        let (trajectories, dropped) =
            pdsim_core::consensus::dsl_trajectories(&scenario, &predictions, cfg.alpha)?;
        out.push_str("\nlearned trajectories:\n");
        for (d, t) in scenario.defenders.iter().zip(&trajectories) {
            out.push_str(&format!("chain defender={} visits=[", d.id));
            for (k, v) in t.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                out.push_str(&format!("{}:{}", v.segment.index(), v.time));
            }
            out.push_str("]\n");
        }
        if !dropped.is_empty() {
            out.push_str(&format!("dropped visits: {}\n", dropped.len()));
        }
        let report = simulate_episode(&scenario, &trajectories)?;
        out.push_str(&format!(
            "dsl success: {:.2}% ({} captured, {} escaped)\n",
            report.success_percentage,
            report.captured.len(),
            report.escaped.len()
        ));
    }
    print!("{out}");
    fs::write(out_dir.join("simulation.txt"), out)?;
    Ok(())
}

fn cmd_sweep(
    cfg: &RunConfig,
    model_path: &Path,
    team_sizes: &str,
    out_dir: &Path,
    jobs: usize,
) -> Result<()> {
    let net = SefronNetwork::<f64>::from_text(&fs::read_to_string(model_path)?)?;
    if net.num_zones() != cfg.dataset.observed_zones {
        return Err(Error::Shape(format!(
            "model predicts {} zones but the configuration observes {}",
            net.num_zones(),
            cfg.dataset.observed_zones
        )));
    }
    let sizes: Vec<usize> = team_sizes
        .split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad team size {s:?}")))
        })
        .collect::<Result<_>>()?;
    let points = scalability_sweep(
        &net,
        &cfg.dataset,
        &sizes,
        cfg.alpha,
        cfg.observation(),
        jobs,
    )?;
    let report = sweep_report(&points);
    print!("{report}");
    fs::write(out_dir.join("sweep.tsv"), report)?;
    Ok(())
}
