//! Command-line front end.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::agent::Mode;
use crate::calib::{self, Axis, GridCell, HyperGrid};
use crate::error::{Error, Result};
use crate::fundamentals::{self, JumpParams};
use crate::par::{self, Execution};
use crate::sim::{self, MarketConfig};
use crate::stats::{self, Calendar, StylizedStatsReport};

#[derive(Debug, Parser)]
#[command(name = "cryptosim", version, about = "Agent-based crypto market simulator and calibration harness")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Master seed; overrides `master_seed` from the config
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for all outputs
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads for ensembles and grid cells
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Flat key = value market config
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Small preset (100 agents, 400 steps, 3 runs) in place of the defaults
    #[arg(long, global = true)]
    smoke: bool,
    /// Run everything on the calling thread
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the market and write prices.csv, equity.csv and meta.json
    Simulate {
        /// Number of runs; more than one writes run_NNN subdirectories
        #[arg(long, default_value_t = 1)]
        runs: usize,
        /// Use noise agents instead of learning agents
        #[arg(long)]
        noise: bool,
    },
    /// Build a stylized-facts report from prices.csv, an OHLCV file, or a directory of either
    Analyze {
        /// prices.csv, OHLCV file, or directory
        input: PathBuf,
    },
    /// Grid search against a directory of OHLCV files
    Calibrate {
        /// Directory of OHLCV csv files, one per asset
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = GridChoice::Full)]
        grid: GridChoice,
        /// Maximum number of cells to score
        #[arg(long)]
        budget: Option<usize>,
        /// Runs per cell; defaults to the config's ensemble_size
        #[arg(long)]
        runs: Option<usize>,
    },
    /// One-axis sensitivity scan around the configured cell
    Sensitivity {
        /// I, zeta, nu or L
        #[arg(long)]
        axis: Axis,
        /// Comma-separated axis values
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Runs per value; defaults to the config's ensemble_size
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Histogram distances between two report.json files
    Compare {
        a: PathBuf,
        b: PathBuf,
    },
    /// Jump and disparity statistics of the fundamental process
    FundamentalsStats {
        /// TOML file with jump-process parameters
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, default_value_t = 1453)]
        horizon: usize,
        /// Independent fundamental series
        #[arg(long, default_value_t = 20)]
        runs: u64,
        #[arg(long, default_value_t = 10)]
        accuracy: u32,
        /// Agent views per series
        #[arg(long, default_value_t = 10)]
        views: usize,
        /// Also write the first fundamental series as fundamental.csv
        #[arg(long)]
        dump: bool,
    },
    /// Noise-agent run plus a paired learning vs noise comparison
    Baseline {
        /// Paired seeds; defaults to the config's ensemble_size
        #[arg(long)]
        runs: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GridChoice {
    Full,
    Smoke,
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit status: 0 success, 1 invalid input, 2 runtime failure.
pub fn cli_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}

fn load_config(g: &Global) -> Result<MarketConfig> {
    let mut cfg = match &g.config {
        Some(path) => MarketConfig::load(path)?,
        None if g.smoke => MarketConfig::smoke(),
        None => MarketConfig::default(),
    };
    if let Some(seed) = g.seed {
        cfg.master_seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n").map_err(|e| Error::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn execute(cli: Cli) -> Result<()> {
    let g = &cli.global;
    if let Some(t) = g.threads {
        if t == 0 {
            return Err(Error::arg("threads", "must be >= 1"));
        }
        par::configure_threads(t);
    }
    let exec = if g.sequential { Execution::Sequential } else { Execution::default() };
    match cli.command {
        Command::Simulate { runs, noise } => simulate(g, exec, runs, noise),
        Command::Analyze { input } => analyze(g, &input),
        Command::Calibrate { data, grid, budget, runs } => calibrate(g, exec, &data, grid, budget, runs),
        Command::Sensitivity { axis, values, runs } => sensitivity(g, exec, axis, &values, runs),
        Command::Compare { a, b } => compare(g, &a, &b),
        Command::FundamentalsStats { params, horizon, runs, accuracy, views, dump } => {
            fundamentals_stats(g, params.as_deref(), horizon, runs, accuracy, views, dump)
        }
        Command::Baseline { runs } => baseline(g, exec, runs),
    }
}

fn simulate(g: &Global, exec: Execution, runs: usize, noise: bool) -> Result<()> {
    let cfg = load_config(g)?;
    let mode = if noise { Mode::Noise } else { Mode::Learning };
    if runs == 1 {
        let out = sim::run_with_seed(&cfg, cfg.master_seed, mode)?;
        out.export(&g.out_dir)?;
        println!("{} steps, {} trades, fees {:.2} -> {}", out.horizon(), out.trade_count, out.total_fees, g.out_dir.display());
        return Ok(());
    }
    let outs = sim::run_ensemble(&cfg, runs, mode, exec)?;
    for (s, out) in outs.iter().enumerate() {
        out.export(&g.out_dir.join(format!("run_{s:03}")))?;
    }
    println!("{runs} runs -> {}", g.out_dir.display());
    Ok(())
}

fn first_line(path: &Path) -> Result<String> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut line = String::new();
    BufReader::new(f).read_line(&mut line).map_err(|e| Error::io(path, e))?;
    Ok(line.trim().to_string())
}

fn prices_csv_reports(path: &Path, calendar: Calendar) -> Result<Vec<StylizedStatsReport>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut series: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let line = i + 2;
        let bad = |reason: &str| Error::MalformedRow { path: path.to_path_buf(), line, reason: reason.to_string() };
        if row.len() != 5 {
            return Err(bad("expected t,asset,P,V,W"));
        }
        let asset: usize = row[1].parse().map_err(|_| bad("asset is not an integer"))?;
        let p: f64 = row[2].parse().map_err(|_| bad("P is not a number"))?;
        let v: f64 = row[3].parse().map_err(|_| bad("V is not a number"))?;
        if series.len() <= asset {
            series.resize(asset + 1, (Vec::new(), Vec::new()));
        }
        series[asset].0.push(p);
        series[asset].1.push(v);
    }
    series.iter().filter(|s| !s.0.is_empty()).map(|(p, v)| stats::build_report(p, v, calendar)).collect()
}

fn reports_for(path: &Path, calendar: Calendar) -> Result<Vec<StylizedStatsReport>> {
    if path.is_dir() {
        let prices = path.join("prices.csv");
        if prices.is_file() {
            return prices_csv_reports(&prices, calendar);
        }
        let assets = calib::load_dir(path)?;
        if assets.is_empty() {
            return Err(Error::arg("input", format!("no csv files in {}", path.display())));
        }
        return assets.iter().map(|a| stats::build_report(&a.closes(), &a.volumes(), calendar)).collect();
    }
    let header = first_line(path)?;
    if header == calib::OHLCV_HEADER.join(",") {
        let a = calib::load_ohlcv(path)?;
        Ok(vec![stats::build_report(&a.closes(), &a.volumes(), calendar)?])
    } else if header == "t,asset,P,V,W" {
        prices_csv_reports(path, calendar)
    } else {
        Err(Error::MalformedRow {
            path: path.to_path_buf(),
            line: 1,
            reason: "unrecognised header; expected OHLCV or t,asset,P,V,W".into(),
        })
    }
}

fn calendar_of(cfg: &MarketConfig) -> Calendar {
    Calendar { week: cfg.week_days, month: cfg.month_days, year: cfg.year_days }
}

fn analyze(g: &Global, input: &Path) -> Result<()> {
    let calendar = calendar_of(&load_config(g)?);
    let report = stats::pool_reports(&reports_for(input, calendar)?)?;
    create_dir(&g.out_dir)?;
    report.write_json(&g.out_dir.join("report.json"))?;
    report.write_tables(&g.out_dir)?;
    let m = &report.moments;
    println!(
        "{} series, {} returns: std {:.5}, skew {:.3}, excess kurtosis {:.3}",
        report.series,
        report.returns.len(),
        m.std,
        m.skewness,
        m.excess_kurtosis
    );
    if !report.omitted.is_empty() {
        println!("omitted (series too short): {}", report.omitted.join(", "));
    }
    Ok(())
}

fn calibrate(
    g: &Global,
    exec: Execution,
    data: &Path,
    grid: GridChoice,
    budget: Option<usize>,
    runs: Option<usize>,
) -> Result<()> {
    let cfg = load_config(g)?;
    let calendar = calendar_of(&cfg);
    let assets = calib::filter_continuous(calib::load_dir(data)?);
    let (train, test) = calib::split_train_test(assets, cfg.master_seed)?;
    let grid = match grid {
        GridChoice::Full => HyperGrid::default(),
        GridChoice::Smoke => HyperGrid::smoke(),
    };
    let budget = budget.unwrap_or(grid.len());
    let runs = runs.unwrap_or(cfg.ensemble_size);

    create_dir(&g.out_dir)?;
    let mut w = csv::Writer::from_path(g.out_dir.join("split.csv"))?;
    w.write_record(["symbol", "set"])?;
    for (set, assets) in [("train", &train), ("test", &test)] {
        for a in assets {
            w.write_record([a.symbol.as_str(), set])?;
        }
    }
    w.flush().map_err(|e| Error::io(&g.out_dir, e))?;

    let train_report = calib::real_report(&train, calendar)?;
    train_report.write_json(&g.out_dir.join("train_report.json"))?;
    calib::real_report(&test, calendar)?.write_json(&g.out_dir.join("test_report.json"))?;

    let records = calib::grid_search(&grid, &cfg, &train_report, runs, budget, exec)?;
    calib::write_records(&g.out_dir.join("records.csv"), &records)?;
    calib::write_timing(&g.out_dir.join("timing.csv"), &records)?;
    if let Some(best) = records.first() {
        let c = best.cell;
        println!(
            "{} cells scored; best I={} zeta={} nu={} L={} score {:.4}",
            records.len(),
            c.agent_count,
            c.gesture_scalar,
            c.cointegration_accuracy,
            c.drawdown_level,
            best.aggregate
        );
    }
    Ok(())
}

fn sensitivity(g: &Global, exec: Execution, axis: Axis, values: &[f64], runs: Option<usize>) -> Result<()> {
    let cfg = load_config(g)?;
    let runs = runs.unwrap_or(cfg.ensemble_size);
    let points = calib::sensitivity_scan(axis, values, &GridCell::from_config(&cfg), &cfg, runs, exec)?;
    create_dir(&g.out_dir)?;
    let path = g.out_dir.join("sensitivity.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["value", axis.metric_name()])?;
    for p in &points {
        w.write_record([p.value.to_string(), p.metric.to_string()])?;
        println!("{} {}", p.value, p.metric);
    }
    w.flush().map_err(|e| Error::io(&path, e))
}

fn compare(g: &Global, a: &Path, b: &Path) -> Result<()> {
    let c = stats::compare_reports(&StylizedStatsReport::read_json(a)?, &StylizedStatsReport::read_json(b)?)?;
    create_dir(&g.out_dir)?;
    write_json(&g.out_dir.join("comparison.json"), &c)?;
    for f in &c.families {
        match f.distance {
            Some(d) => println!("{:32} {d:.6}", f.family),
            None => println!("{:32} -", f.family),
        }
    }
    println!("{:32} {:.6}", "aggregate", c.aggregate);
    Ok(())
}

fn fundamentals_stats(
    g: &Global,
    params: Option<&Path>,
    horizon: usize,
    runs: u64,
    accuracy: u32,
    views: usize,
    dump: bool,
) -> Result<()> {
    let params = match params {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            toml::from_str::<JumpParams>(&text).map_err(|e| Error::InvalidConfig(e.to_string()))?
        }
        None => JumpParams::default(),
    };
    let seed = g.seed.unwrap_or(0);
    let per_seed = fundamentals::ensemble_stats(horizon, &params, accuracy, views, runs, seed)?;
    let mean = fundamentals::mean_stats(&per_seed);
    create_dir(&g.out_dir)?;
    write_json(&g.out_dir.join("fundamentals_stats.json"), &mean)?;
    if dump {
        let series = fundamentals::generate_fundamental(0, 100.0, horizon, &params, crate::rng::derive_seed(seed, 0))?;
        fundamentals::write_series_csv(&g.out_dir.join("fundamental.csv"), &series.values)?;
    }
    println!("{}", serde_json::to_string_pretty(&mean)?);
    Ok(())
}

#[derive(Serialize)]
struct BaselineSummary {
    runs: usize,
    learning_wins: usize,
    mean_learning_top_decile: f64,
    mean_noise_top_decile: f64,
}

fn baseline(g: &Global, exec: Execution, runs: Option<usize>) -> Result<()> {
    let cfg = load_config(g)?;
    let runs = runs.unwrap_or(cfg.ensemble_size);
    create_dir(&g.out_dir)?;
    sim::run_noise_baseline(&cfg)?.export(&g.out_dir.join("noise"))?;

    let pairs = sim::compare_with_noise(&cfg, runs, exec)?;
    let path = g.out_dir.join("baseline.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["seed", "learning_top_decile", "noise_top_decile"])?;
    for p in &pairs {
        w.write_record([p.seed.to_string(), p.learning_top_decile.to_string(), p.noise_top_decile.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    let learning: Vec<f64> = pairs.iter().map(|p| p.learning_top_decile).collect();
    let noise: Vec<f64> = pairs.iter().map(|p| p.noise_top_decile).collect();
    let summary = BaselineSummary {
        runs,
        learning_wins: pairs.iter().filter(|p| p.learning_wins()).count(),
        mean_learning_top_decile: stats::mean(&learning),
        mean_noise_top_decile: stats::mean(&noise),
    };
    write_json(&g.out_dir.join("baseline_summary.json"), &summary)?;
    println!(
        "learning top decile beat noise in {}/{} runs (mean {:.4} vs {:.4})",
        summary.learning_wins, runs, summary.mean_learning_top_decile, summary.mean_noise_top_decile
    );
    Ok(())
}
