use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use crowdplan::ddgnn::ModelParams;
use crowdplan::engine::{Models, Strategy};
use crowdplan::harness::{
    emit_report, fit_demand, gather_experience, load_reports, load_stream, run_bench, run_experiment, synth_workload, Axes, ExperimentConfig,
};
use crowdplan::search::{train_tvf, Experience, ValueFunction, ValueParams};

#[derive(Parser)]
#[command(name = "crowdplan", version, about = "Demand-aware adaptive task assignment for spatial crowdsourcing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Settings file, JSON or TOML by extension. Defaults apply without one.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override one setting by dotted path, e.g. `workload.tasks=800`.
    /// Values parse as JSON and fall back to plain strings.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    sets: Vec<String>,
    /// Master seed; overrides the file.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the effective settings.
    Config {
        #[command(flatten)]
        common: Common,
        /// Write here instead of stdout; `.toml` selects TOML.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic stream as CSV.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the demand model.
    TrainDemand {
        #[command(flatten)]
        common: Common,
        /// Stream to learn from; a task-only stream is generated otherwise.
        #[arg(long)]
        stream: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Learning curve CSV.
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// Solve planning problems exactly and store every explored action.
    CollectExperience {
        #[command(flatten)]
        common: Common,
        /// Demand model, needed to record a prediction-driven strategy.
        #[arg(long)]
        demand: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the value function to stored experience.
    TrainTvf {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        experience: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Learning curve CSV.
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// Run one strategy over one stream and write its report as JSON.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        strategy: Strategy,
        /// Stream CSV; generated from the workload settings otherwise.
        #[arg(long)]
        stream: Option<PathBuf>,
        #[arg(long)]
        demand: Option<PathBuf>,
        #[arg(long)]
        tvf: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every configured strategy over seeded streams and write reports.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        demand: Option<PathBuf>,
        #[arg(long)]
        tvf: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rebuild summary and per-axis aggregates from saved reports.
    Report {
        /// `summary.json` files or single-run report files.
        #[arg(long, required = true, num_args = 1..)]
        input: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn is_toml(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"))
}

fn set_path(root: &mut serde_json::Value, path: &str, value: serde_json::Value) -> Result<()> {
    let mut cur = root;
    let keys: Vec<&str> = path.split('.').collect();
    for (i, key) in keys.iter().enumerate() {
        let obj = cur.as_object_mut().ok_or_else(|| anyhow!("{path}: {} is not a table", keys[..i].join(".")))?;
        if i + 1 == keys.len() {
            if !obj.contains_key(*key) {
                bail!("{path}: unknown setting {key:?}");
            }
            obj.insert(key.to_string(), value);
            return Ok(());
        }
        cur = obj.get_mut(*key).ok_or_else(|| anyhow!("{path}: unknown setting {key:?}"))?;
    }
    bail!("empty setting path")
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg: ExperimentConfig = match &common.config {
        None => ExperimentConfig::default(),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            if is_toml(p) {
                toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
            } else {
                serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
            }
        }
    };
    if !common.sets.is_empty() {
        let mut v = serde_json::to_value(&cfg)?;
        for s in &common.sets {
            let (path, raw) = s.split_once('=').ok_or_else(|| anyhow!("--set expects PATH=VALUE, got {s:?}"))?;
            let value = serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
            set_path(&mut v, path.trim(), value)?;
        }
        cfg = serde_json::from_value(v).context("applying --set overrides")?;
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.check()?;
    Ok(cfg)
}

fn load_demand(path: Option<&PathBuf>) -> Result<Option<ModelParams>> {
    path.map(|p| ModelParams::load(p).with_context(|| format!("loading demand model {}", p.display()))).transpose()
}

fn load_tvf(path: Option<&PathBuf>) -> Result<Option<ValueParams>> {
    path.map(|p| ValueParams::load(p).with_context(|| format!("loading value function {}", p.display()))).transpose()
}

fn write_json<T: serde::Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Config { common, out } => {
            let cfg = load_config(&common)?;
            match out {
                Some(p) if is_toml(&p) => fs::write(&p, toml::to_string_pretty(&cfg)?).with_context(|| format!("writing {}", p.display()))?,
                other => write_json(&cfg, other.as_deref())?,
            }
        }
        Command::Synth { common, out } => {
            let cfg = load_config(&common)?;
            let stream = synth_workload(&cfg.seeded_workload())?;
            stream.save(&out)?;
            println!("{} events ({} workers, {} tasks) -> {}", stream.len(), stream.workers().count(), stream.tasks().count(), out.display());
        }
        Command::TrainDemand { common, stream, out, curve } => {
            let cfg = load_config(&common)?;
            let stream = stream.map(|p| load_stream(&p)).transpose()?;
            let fit = fit_demand(&cfg, stream.as_ref())?;
            let outcome = &fit.outcome;
            outcome.params.save(&out)?;
            if let Some(c) = curve {
                let f = fs::File::create(&c).with_context(|| format!("creating {}", c.display()))?;
                outcome.write_curve(f)?;
            }
            let fmt = |v: Option<f64>| v.map_or("undefined".to_string(), |v| format!("{v:.4}"));
            let ap = outcome.curve.get(outcome.best_epoch.wrapping_sub(1)).and_then(|e| e.val_ap);
            println!(
                "best epoch {} of {} samples: validation AP {} (persistence {}) -> {}",
                outcome.best_epoch,
                fit.train_samples,
                fmt(ap),
                fmt(fit.persistence_ap),
                out.display()
            );
        }
        Command::CollectExperience { common, demand, out } => {
            let cfg = load_config(&common)?;
            let demand = load_demand(demand.as_ref())?;
            let (exp, total) = gather_experience(&cfg, demand.as_ref())?;
            exp.save(&out)?;
            println!("{} records (optimum {total}) -> {}", exp.len(), out.display());
        }
        Command::TrainTvf { common, experience, out, curve } => {
            let cfg = load_config(&common)?;
            let exp = Experience::load(&experience)?;
            let outcome = train_tvf(&exp, &cfg.tvf_hyper(), cfg.engine.scales)?;
            outcome.params.save(&out)?;
            if let Some(c) = curve {
                let mut w = csv::Writer::from_path(&c).with_context(|| format!("creating {}", c.display()))?;
                w.write_record(["epoch", "train_mse", "holdout_mse"])?;
                for (e, tr, ho) in &outcome.curve {
                    w.write_record([e.to_string(), tr.to_string(), ho.to_string()])?;
                }
                w.flush()?;
            }
            match outcome.curve.get(outcome.best_epoch.wrapping_sub(1)) {
                Some((_, tr, ho)) => println!("best epoch {}: train MSE {tr:.4}, held-out MSE {ho:.4} -> {}", outcome.best_epoch, out.display()),
                None => println!("no epochs run -> {}", out.display()),
            }
        }
        Command::Simulate { common, strategy, stream, demand, tvf, out } => {
            let cfg = load_config(&common)?;
            let workload = cfg.seeded_workload();
            let (stream, axes) = match stream {
                Some(p) => (load_stream(&p)?, None),
                None => (synth_workload(&workload)?, Some(Axes::of_workload(&workload))),
            };
            let demand = load_demand(demand.as_ref())?;
            let tvf = load_tvf(tvf.as_ref())?;
            let models = Models {
                demand: demand.as_ref(),
                value: tvf.as_ref().map(|v| v as &dyn ValueFunction),
            };
            let engine = cfg.engine_config(&workload)?;
            let mut report = run_experiment(strategy, &stream, &engine, models, cfg.seed, cfg.to_json())?;
            if let Some(a) = axes {
                report.axes = a;
            }
            eprintln!("{strategy}: {} assigned over {} planning events", report.assigned, report.planning_events);
            write_json(&report, out.as_deref())?;
        }
        Command::Bench { common, demand, tvf, out } => {
            let cfg = load_config(&common)?;
            let demand = load_demand(demand.as_ref())?;
            let tvf = load_tvf(tvf.as_ref())?;
            let reports = run_bench(&cfg, demand.as_ref(), tvf.as_ref().map(|v| v as &dyn ValueFunction))?;
            let written = emit_report(&reports, &out)?;
            print_means(&reports);
            println!("{} reports -> {} files in {}", reports.len(), written.len(), out.display());
        }
        Command::Report { input, out } => {
            let mut reports = Vec::new();
            for p in &input {
                match load_reports(p) {
                    Ok(r) => reports.extend(r),
                    Err(_) => {
                        let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                        reports.push(serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?);
                    }
                }
            }
            let written = emit_report(&reports, &out)?;
            print_means(&reports);
            println!("{} reports -> {} files in {}", reports.len(), written.len(), out.display());
        }
    }
    Ok(())
}

fn print_means(reports: &[crowdplan::harness::RunReport]) {
    let mut by: std::collections::BTreeMap<Strategy, (usize, usize)> = Default::default();
    for r in reports {
        let e = by.entry(r.strategy).or_default();
        e.0 += r.assigned;
        e.1 += 1;
    }
    for (s, (sum, n)) in by {
        println!("{s:>9}: mean assigned {:.2} over {n} runs", sum as f64 / n as f64);
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
