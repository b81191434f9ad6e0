use std::cmp::Ordering;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::AssetSeries;
use crate::agent::Mode;
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::rng;
use crate::sim::{self, MarketConfig, SimOutput};
use crate::stats::{self, Calendar, FamilyDistance, StylizedStatsReport};

/// One combination of the calibrated hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub agent_count: usize,
    pub gesture_scalar: f64,
    pub cointegration_accuracy: u32,
    pub drawdown_level: f64,
}

impl GridCell {
    pub fn from_config(cfg: &MarketConfig) -> Self {
        Self {
            agent_count: cfg.agent_count,
            gesture_scalar: cfg.gesture_scalar,
            cointegration_accuracy: cfg.cointegration_accuracy,
            drawdown_level: cfg.drawdown_level,
        }
    }

    pub fn apply(&self, base: &MarketConfig) -> MarketConfig {
        MarketConfig {
            agent_count: self.agent_count,
            gesture_scalar: self.gesture_scalar,
            cointegration_accuracy: self.cointegration_accuracy,
            drawdown_level: self.drawdown_level,
            ..base.clone()
        }
    }

    /// Lexicographic order on (I, zeta, nu, L).
    pub fn lex_cmp(&self, other: &Self) -> Ordering {
        self.agent_count
            .cmp(&other.agent_count)
            .then(self.gesture_scalar.total_cmp(&other.gesture_scalar))
            .then(self.cointegration_accuracy.cmp(&other.cointegration_accuracy))
            .then(self.drawdown_level.total_cmp(&other.drawdown_level))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperGrid {
    pub agent_counts: Vec<usize>,
    pub gesture_scalars: Vec<f64>,
    pub accuracies: Vec<u32>,
    pub drawdown_levels: Vec<f64>,
}

impl Default for HyperGrid {
    /// The full 600-cell grid.
    fn default() -> Self {
        Self {
            agent_counts: (500..=5500).step_by(1000).collect(),
            gesture_scalars: vec![1.0, 1.5, 2.0, 2.5, 3.0],
            accuracies: (9..=12).collect(),
            drawdown_levels: vec![10.0, 30.0, 50.0, 70.0, 90.0],
        }
    }
}

impl HyperGrid {
    /// Two agent counts by two gestures, one accuracy and one drawdown level.
    pub fn smoke() -> Self {
        Self { agent_counts: vec![500, 1500], gesture_scalars: vec![1.0, 2.0], accuracies: vec![10], drawdown_levels: vec![50.0] }
    }

    pub fn len(&self) -> usize {
        self.agent_counts.len() * self.gesture_scalars.len() * self.accuracies.len() * self.drawdown_levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All cells in lexicographic order.
    pub fn cells(&self) -> Vec<GridCell> {
        let mut out = Vec::with_capacity(self.len());
        for &agent_count in &self.agent_counts {
            for &gesture_scalar in &self.gesture_scalars {
                for &cointegration_accuracy in &self.accuracies {
                    for &drawdown_level in &self.drawdown_levels {
                        out.push(GridCell { agent_count, gesture_scalar, cointegration_accuracy, drawdown_level });
                    }
                }
            }
        }
        out.sort_by(GridCell::lex_cmp);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub cell: GridCell,
    pub distances: Vec<FamilyDistance>,
    /// equal-weight mean distance; infinite when the cell failed
    pub aggregate: f64,
    pub seeds: Vec<u64>,
    pub error: Option<String>,
    #[serde(skip)]
    pub wall_seconds: f64,
}

/// Pools the reports of every training asset through the same pipeline as
/// simulated data.
pub fn real_report(assets: &[AssetSeries], calendar: Calendar) -> Result<StylizedStatsReport> {
    let reports = assets
        .iter()
        .map(|a| stats::build_report(&a.closes(), &a.volumes(), calendar))
        .collect::<Result<Vec<_>>>()?;
    stats::pool_reports(&reports)
}

pub fn simulated_report(outputs: &[SimOutput], calendar: Calendar) -> Result<StylizedStatsReport> {
    let mut reports = Vec::new();
    for o in outputs {
        for m in &o.markets {
            let volumes: Vec<f64> = m.volumes.iter().map(|&v| v as f64).collect();
            reports.push(stats::build_report(&m.prices, &volumes, calendar)?);
        }
    }
    stats::pool_reports(&reports)
}

fn calendar_of(cfg: &MarketConfig) -> Calendar {
    Calendar { week: cfg.week_days, month: cfg.month_days, year: cfg.year_days }
}

/// Runs the cell's ensemble and measures its distance to `target`.
pub fn score_cell(
    cell: &GridCell,
    base: &MarketConfig,
    target: &StylizedStatsReport,
    runs: usize,
    exec: Execution,
) -> CalibrationRecord {
    let start = Instant::now();
    let cfg = cell.apply(base);
    let seeds: Vec<u64> = (0..runs).map(|s| sim::member_seed(cfg.master_seed, s)).collect();
    let outcome = sim::run_ensemble(&cfg, runs, Mode::Learning, exec)
        .and_then(|outs| simulated_report(&outs, calendar_of(&cfg)))
        .and_then(|report| stats::compare_reports(&report, target));
    let wall_seconds = start.elapsed().as_secs_f64();
    match outcome {
        Ok(c) => CalibrationRecord { cell: *cell, distances: c.families, aggregate: c.aggregate, seeds, error: None, wall_seconds },
        Err(e) => CalibrationRecord {
            cell: *cell,
            distances: Vec::new(),
            aggregate: f64::INFINITY,
            seeds,
            error: Some(e.to_string()),
            wall_seconds,
        },
    }
}

/// Ascending aggregate score, ties broken by cell order.
pub fn rank_records(records: &mut [CalibrationRecord]) {
    records.sort_by(|a, b| a.aggregate.total_cmp(&b.aggregate).then_with(|| a.cell.lex_cmp(&b.cell)));
}

/// Scores up to `budget` cells and returns them ranked. Below the full grid,
/// the visited cells are a seeded shuffle of the grid.
pub fn grid_search(
    grid: &HyperGrid,
    base: &MarketConfig,
    target: &StylizedStatsReport,
    runs: usize,
    budget: usize,
    exec: Execution,
) -> Result<Vec<CalibrationRecord>> {
    if budget < 1 {
        return Err(Error::arg("budget", "must be >= 1"));
    }
    if runs < 1 {
        return Err(Error::arg("runs", "must be >= 1"));
    }
    base.validate()?;
    let mut cells = grid.cells();
    if budget < cells.len() {
        cells.shuffle(&mut rng::stream(base.master_seed, 300));
        cells.truncate(budget);
    }
    // cells run in parallel; each ensemble stays on its worker
    let mut records = par::map_range(cells.len(), exec, |i| score_cell(&cells[i], base, target, runs, Execution::Sequential));
    rank_records(&mut records);
    Ok(records)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    AgentCount,
    GestureScalar,
    CointegrationAccuracy,
    DrawdownLevel,
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "I" | "agents" | "agent_count" => Ok(Axis::AgentCount),
            "zeta" | "gesture" | "gesture_scalar" => Ok(Axis::GestureScalar),
            "nu" | "accuracy" | "cointegration_accuracy" => Ok(Axis::CointegrationAccuracy),
            "L" | "drawdown" | "drawdown_level" => Ok(Axis::DrawdownLevel),
            _ => Err(Error::arg("axis", format!("unknown axis `{s}`; expected I, zeta, nu or L"))),
        }
    }
}

impl Axis {
    pub fn metric_name(&self) -> &'static str {
        match self {
            Axis::AgentCount => "mean_two_week_volatility",
            Axis::GestureScalar | Axis::CointegrationAccuracy => "mean_abs_daily_return",
            Axis::DrawdownLevel => "bankrupt_fraction",
        }
    }

    fn set(&self, cell: &GridCell, value: f64) -> Result<GridCell> {
        let mut c = *cell;
        let whole = |name: &'static str| {
            if value >= 0.0 && value.fract() == 0.0 {
                Ok(value)
            } else {
                Err(Error::arg(name, format!("{value} is not a whole number")))
            }
        };
        match self {
            Axis::AgentCount => c.agent_count = whole("agent_count")? as usize,
            Axis::GestureScalar => c.gesture_scalar = value,
            Axis::CointegrationAccuracy => c.cointegration_accuracy = whole("cointegration_accuracy")? as u32,
            Axis::DrawdownLevel => c.drawdown_level = value,
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityPoint {
    pub value: f64,
    pub metric: f64,
}

fn axis_metric(axis: Axis, outputs: &[SimOutput], cfg: &MarketConfig) -> Result<f64> {
    let mut values = Vec::new();
    for o in outputs {
        match axis {
            Axis::AgentCount => {
                for m in &o.markets {
                    values.push(stats::mean(&stats::windowed_volatility(&m.prices, 2 * cfg.week_days)?));
                }
            }
            Axis::GestureScalar | Axis::CointegrationAccuracy => {
                for m in &o.markets {
                    let r = stats::log_returns(&m.prices)?;
                    values.push(r.iter().map(|x| x.abs()).sum::<f64>() / r.len() as f64);
                }
            }
            Axis::DrawdownLevel => values.push(o.bankrupt_fraction()),
        }
    }
    Ok(stats::mean(&values))
}

/// Ensemble metric of `axis` at each value, other hyperparameters fixed.
pub fn sensitivity_scan(
    axis: Axis,
    values: &[f64],
    fixed: &GridCell,
    base: &MarketConfig,
    runs: usize,
    exec: Execution,
) -> Result<Vec<SensitivityPoint>> {
    values
        .iter()
        .map(|&value| {
            let cfg = axis.set(fixed, value)?.apply(base);
            let outputs = sim::run_ensemble(&cfg, runs, Mode::Learning, exec)?;
            Ok(SensitivityPoint { value, metric: axis_metric(axis, &outputs, &cfg)? })
        })
        .collect()
}

/// One row per record, in rank order. Contains no timing data, so equal
/// inputs give byte-identical files.
pub fn write_records(path: &Path, records: &[CalibrationRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let families: Vec<String> = records
        .iter()
        .find(|r| !r.distances.is_empty())
        .map(|r| r.distances.iter().map(|d| d.family.clone()).collect())
        .unwrap_or_default();
    let mut header: Vec<String> =
        ["rank", "agent_count", "gesture_scalar", "cointegration_accuracy", "drawdown_level", "aggregate"]
            .map(String::from)
            .to_vec();
    header.extend(families.iter().cloned());
    header.extend(["seeds".to_string(), "error".to_string()]);
    w.write_record(&header)?;
    for (rank, r) in records.iter().enumerate() {
        let mut row = vec![
            (rank + 1).to_string(),
            r.cell.agent_count.to_string(),
            r.cell.gesture_scalar.to_string(),
            r.cell.cointegration_accuracy.to_string(),
            r.cell.drawdown_level.to_string(),
            r.aggregate.to_string(),
        ];
        for f in &families {
            let d = r.distances.iter().find(|d| &d.family == f).and_then(|d| d.distance);
            row.push(d.map(|v| v.to_string()).unwrap_or_default());
        }
        row.push(r.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(";"));
        row.push(r.error.clone().unwrap_or_default());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Wall-clock seconds per cell, kept apart from the deterministic records.
pub fn write_timing(path: &Path, records: &[CalibrationRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["agent_count", "gesture_scalar", "cointegration_accuracy", "drawdown_level", "wall_seconds"])?;
    for r in records {
        w.write_record([
            r.cell.agent_count.to_string(),
            r.cell.gesture_scalar.to_string(),
            r.cell.cointegration_accuracy.to_string(),
            r.cell.drawdown_level.to_string(),
            format!("{:.3}", r.wall_seconds),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> MarketConfig {
        MarketConfig { agent_count: 20, horizon: 60, master_seed: 5, ..MarketConfig::default() }
    }

    fn tiny_grid() -> HyperGrid {
        HyperGrid { agent_counts: vec![10, 20], gesture_scalars: vec![1.0, 2.0], accuracies: vec![10], drawdown_levels: vec![50.0] }
    }

    fn target() -> StylizedStatsReport {
        let outs = sim::run_ensemble(&base(), 1, Mode::Noise, Execution::Sequential).unwrap();
        simulated_report(&outs, Calendar::default()).unwrap()
    }

    #[test]
    fn full_grid_size() {
        let g = HyperGrid::default();
        assert_eq!(g.len(), 600);
        let cells = g.cells();
        assert_eq!(cells.len(), 600);
        assert!(cells.windows(2).all(|w| w[0].lex_cmp(&w[1]) == Ordering::Less));
        assert_eq!(HyperGrid::smoke().len(), 4);
    }

    #[test]
    fn self_comparison_scores_zero() {
        let t = target();
        let c = stats::compare_reports(&t, &t).unwrap();
        assert_eq!(c.aggregate, 0.0);
    }

    #[test]
    fn scores_reproducible() {
        let t = target();
        let cell = GridCell::from_config(&base());
        let a = score_cell(&cell, &base(), &t, 2, Execution::Sequential);
        let b = score_cell(&cell, &base(), &t, 2, Execution::Parallel);
        assert_eq!(a.aggregate, b.aggregate);
        assert_eq!(a.distances, b.distances);
        assert!(a.aggregate >= 0.0 && a.error.is_none());
    }

    #[test]
    fn budget_and_ranking() {
        let t = target();
        let one = grid_search(&tiny_grid(), &base(), &t, 1, 1, Execution::default()).unwrap();
        assert_eq!(one.len(), 1);
        let all = grid_search(&tiny_grid(), &base(), &t, 1, 100, Execution::default()).unwrap();
        assert_eq!(all.len(), 4);
        assert!(all.windows(2).all(|w| w[0].aggregate <= w[1].aggregate));
        let key = |r: &[CalibrationRecord]| r.iter().map(|r| (r.cell, r.aggregate, r.distances.clone())).collect::<Vec<_>>();
        assert_eq!(key(&all), key(&grid_search(&tiny_grid(), &base(), &t, 1, 100, Execution::Sequential).unwrap()));
    }

    #[test]
    fn ties_break_by_cell() {
        let cell = |i| GridCell { agent_count: i, gesture_scalar: 1.0, cointegration_accuracy: 10, drawdown_level: 50.0 };
        let rec = |i, s| CalibrationRecord { cell: cell(i), distances: vec![], aggregate: s, seeds: vec![], error: None, wall_seconds: 0.0 };
        let mut r = vec![rec(30, 0.5), rec(20, 0.5), rec(10, 0.7), rec(40, f64::INFINITY), rec(5, 0.5)];
        rank_records(&mut r);
        let order: Vec<usize> = r.iter().map(|r| r.cell.agent_count).collect();
        assert_eq!(order, vec![5, 20, 30, 10, 40]);
    }

    #[test]
    fn failed_cell_recorded() {
        let t = target();
        let bad = GridCell { agent_count: 1, ..GridCell::from_config(&base()) };
        let r = score_cell(&bad, &base(), &t, 1, Execution::Sequential);
        assert!(r.error.as_deref().unwrap().contains("agent_count"));
        assert!(r.aggregate.is_infinite());
    }

    #[test]
    fn scan_shapes() {
        let pts = sensitivity_scan(Axis::DrawdownLevel, &[30.0, 90.0], &GridCell::from_config(&base()), &base(), 1, Execution::Sequential)
            .unwrap();
        assert_eq!(pts.len(), 2);
        assert!(pts.iter().all(|p| (0.0..=1.0).contains(&p.metric)));
        assert!("zeta".parse::<Axis>().is_ok());
        assert!("q".parse::<Axis>().is_err());
        assert!(Axis::AgentCount.set(&GridCell::from_config(&base()), 1.5).is_err());
    }

    #[test]
    fn records_file_is_deterministic() {
        let t = target();
        let dir = tempfile::tempdir().unwrap();
        let run = |name: &str| {
            let recs = grid_search(&tiny_grid(), &base(), &t, 1, 2, Execution::default()).unwrap();
            let p = dir.path().join(name);
            write_records(&p, &recs).unwrap();
            std::fs::read(p).unwrap()
        };
        let a = run("a.csv");
        assert_eq!(a, run("b.csv"));
        let text = String::from_utf8(a).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("rank,agent_count,gesture_scalar,cointegration_accuracy,drawdown_level,aggregate,returns,"));
    }
}
