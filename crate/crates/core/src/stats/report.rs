use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::histogram::{histogram_distance, shared_edges, Histogram, HISTOGRAM_BINS};
use super::{
    adjacent_window_correlation, default_tail_size, log_returns, mean, moments, shifted_window_mean_correlation,
    tail_index, windowed_volatility, Moments,
};
use crate::error::{Error, Result};

/// Number of histogram families entering the aggregate distance.
pub const FAMILY_COUNT: usize = 11;
const SHIFTS: std::ops::RangeInclusive<usize> = 1..=5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Calendar {
    pub week: usize,
    pub month: usize,
    pub year: usize,
}

impl Default for Calendar {
    fn default() -> Self {
        Self { week: 7, month: 30, year: 365 }
    }
}

impl Calendar {
    /// Two weeks, a quarter, a year.
    pub fn lags(&self) -> [usize; 3] {
        [2 * self.week, 3 * self.month, self.year]
    }

    pub fn windows(&self) -> [usize; 2] {
        [self.week, 2 * self.week]
    }
}

/// Samples of one metric at one lag; `None` when the series was too short.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagSeries {
    pub lag: usize,
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftedCorrelation {
    pub window: usize,
    pub shift: usize,
    pub mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StylizedStatsReport {
    pub calendar: Calendar,
    /// number of series pooled into this report
    pub series: usize,
    pub returns: Vec<f64>,
    pub volatility: Vec<LagSeries>,
    pub return_autocorrelation: Vec<LagSeries>,
    pub volume_autocorrelation: Vec<LagSeries>,
    pub volatility_autocorrelation: LagSeries,
    pub shifted_correlation: Vec<ShiftedCorrelation>,
    pub moments: Moments,
    pub tail_index: Option<f64>,
    /// names of metrics left out because the input was too short
    pub omitted: Vec<String>,
}

fn optional<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::WindowTooLarge { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Assembles every metric from aligned price and volume series.
pub fn build_report(prices: &[f64], volumes: &[f64], calendar: Calendar) -> Result<StylizedStatsReport> {
    if prices.len() != volumes.len() {
        return Err(Error::arg("volumes", format!("length {} differs from prices {}", volumes.len(), prices.len())));
    }
    let returns = log_returns(prices)?;
    let lags = calendar.lags();
    let mut omitted = Vec::new();
    let mut lag_family = |name: &str, f: &dyn Fn(usize) -> Result<Vec<f64>>| -> Result<Vec<LagSeries>> {
        lags.iter()
            .map(|&lag| {
                let values = optional(f(lag))?;
                if values.is_none() {
                    omitted.push(format!("{name}_{lag}"));
                }
                Ok(LagSeries { lag, values })
            })
            .collect()
    };
    let volatility = lag_family("volatility", &|lag| windowed_volatility(prices, lag))?;
    let return_autocorrelation = lag_family("return_autocorrelation", &|lag| adjacent_window_correlation(&returns, lag))?;
    let volume_autocorrelation = lag_family("volume_autocorrelation", &|lag| adjacent_window_correlation(volumes, lag))?;

    let lag = lags[0];
    let vol_ac = match &volatility[0].values {
        Some(v) => optional(adjacent_window_correlation(v, lag))?,
        None => None,
    };
    if vol_ac.is_none() {
        omitted.push(format!("volatility_autocorrelation_{lag}"));
    }

    let mut shifted_correlation = Vec::new();
    for window in calendar.windows() {
        for shift in SHIFTS {
            let mean = optional(shifted_window_mean_correlation(&returns, window, shift))?;
            if mean.is_none() {
                omitted.push(format!("shifted_correlation_{window}_{shift}"));
            }
            shifted_correlation.push(ShiftedCorrelation { window, shift, mean });
        }
    }

    let moments = if returns.len() >= 4 {
        moments(&returns)?
    } else {
        omitted.push("moments".into());
        Moments { mean: mean(&returns), std: 0.0, skewness: 0.0, excess_kurtosis: 0.0, degenerate: true }
    };
    let tail_index = default_tail_size(returns.len()).and_then(|k| tail_index(&returns, k).ok());

    Ok(StylizedStatsReport {
        calendar,
        series: 1,
        returns,
        volatility,
        return_autocorrelation,
        volume_autocorrelation,
        volatility_autocorrelation: LagSeries { lag, values: vol_ac },
        shifted_correlation,
        moments,
        tail_index,
        omitted,
    })
}

fn pool_lag(series: &[&LagSeries]) -> LagSeries {
    let lag = series[0].lag;
    let present: Vec<&Vec<f64>> = series.iter().filter_map(|s| s.values.as_ref()).collect();
    let values = (!present.is_empty()).then(|| present.into_iter().flatten().copied().collect());
    LagSeries { lag, values }
}

/// Pools reports by concatenating their samples; shifted correlations are
/// averaged over the reports that have them.
pub fn pool_reports(reports: &[StylizedStatsReport]) -> Result<StylizedStatsReport> {
    let first = reports.first().ok_or_else(|| Error::arg("reports", "nothing to pool"))?;
    if reports.iter().any(|r| r.calendar != first.calendar) {
        return Err(Error::arg("reports", "calendars differ"));
    }
    let family = |pick: fn(&StylizedStatsReport) -> &Vec<LagSeries>| -> Vec<LagSeries> {
        (0..pick(first).len()).map(|i| pool_lag(&reports.iter().map(|r| &pick(r)[i]).collect::<Vec<_>>())).collect()
    };
    let volatility = family(|r| &r.volatility);
    let return_autocorrelation = family(|r| &r.return_autocorrelation);
    let volume_autocorrelation = family(|r| &r.volume_autocorrelation);
    let volatility_autocorrelation =
        pool_lag(&reports.iter().map(|r| &r.volatility_autocorrelation).collect::<Vec<_>>());
    let shifted_correlation = first
        .shifted_correlation
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let vals: Vec<f64> = reports.iter().filter_map(|r| r.shifted_correlation[i].mean).collect();
            ShiftedCorrelation { window: s.window, shift: s.shift, mean: (!vals.is_empty()).then(|| mean(&vals)) }
        })
        .collect::<Vec<_>>();

    let returns: Vec<f64> = reports.iter().flat_map(|r| r.returns.iter().copied()).collect();
    let moments = moments(&returns).unwrap_or(first.moments);
    let tail_index = default_tail_size(returns.len()).and_then(|k| tail_index(&returns, k).ok());

    let mut omitted = Vec::new();
    for (name, fam) in [
        ("volatility", &volatility),
        ("return_autocorrelation", &return_autocorrelation),
        ("volume_autocorrelation", &volume_autocorrelation),
    ] {
        for s in fam.iter().filter(|s| s.values.is_none()) {
            omitted.push(format!("{name}_{}", s.lag));
        }
    }
    if volatility_autocorrelation.values.is_none() {
        omitted.push(format!("volatility_autocorrelation_{}", volatility_autocorrelation.lag));
    }
    for s in shifted_correlation.iter().filter(|s| s.mean.is_none()) {
        omitted.push(format!("shifted_correlation_{}_{}", s.window, s.shift));
    }

    Ok(StylizedStatsReport {
        calendar: first.calendar,
        series: reports.iter().map(|r| r.series).sum(),
        returns,
        volatility,
        return_autocorrelation,
        volume_autocorrelation,
        volatility_autocorrelation,
        shifted_correlation,
        moments,
        tail_index,
        omitted,
    })
}

impl StylizedStatsReport {
    /// The histogram families, in a fixed order.
    pub fn families(&self) -> Vec<(String, Option<&[f64]>)> {
        let mut out = vec![("returns".to_string(), Some(self.returns.as_slice()))];
        for (name, fam) in [
            ("volatility", &self.volatility),
            ("return_autocorrelation", &self.return_autocorrelation),
            ("volume_autocorrelation", &self.volume_autocorrelation),
        ] {
            for s in fam {
                out.push((format!("{name}_{}", s.lag), s.values.as_deref()));
            }
        }
        let v = &self.volatility_autocorrelation;
        out.push((format!("volatility_autocorrelation_{}", v.lag), v.values.as_deref()));
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Writes plot-ready tables under `dir`: one histogram table per metric
    /// family, the shifted-window correlations and a summary.
    pub fn write_tables(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let hist_rows = |w: &mut csv::Writer<fs::File>, lag: Option<usize>, sample: &[f64]| -> Result<()> {
            let h = Histogram::from_sample(sample, &shared_edges(&[sample], HISTOGRAM_BINS))?;
            for (x, m) in h.centers().iter().zip(&h.masses) {
                let mut row = Vec::with_capacity(3);
                if let Some(lag) = lag {
                    row.push(lag.to_string());
                }
                row.push(x.to_string());
                row.push(m.to_string());
                w.write_record(&row)?;
            }
            Ok(())
        };

        let mut w = csv::Writer::from_path(dir.join("returns_histogram.csv"))?;
        w.write_record(["x", "mass"])?;
        hist_rows(&mut w, None, &self.returns)?;
        w.flush().map_err(|e| Error::io(dir, e))?;

        let lagged: [(&str, Vec<&LagSeries>); 4] = [
            ("volatility_histogram.csv", self.volatility.iter().collect()),
            ("return_autocorrelation_histogram.csv", self.return_autocorrelation.iter().collect()),
            ("volume_autocorrelation_histogram.csv", self.volume_autocorrelation.iter().collect()),
            ("volatility_autocorrelation_histogram.csv", vec![&self.volatility_autocorrelation]),
        ];
        for (file, fam) in lagged {
            let mut w = csv::Writer::from_path(dir.join(file))?;
            w.write_record(["lag", "x", "mass"])?;
            for s in fam {
                if let Some(v) = &s.values {
                    hist_rows(&mut w, Some(s.lag), v)?;
                }
            }
            w.flush().map_err(|e| Error::io(dir, e))?;
        }

        let mut w = csv::Writer::from_path(dir.join("shifted_correlation.csv"))?;
        w.write_record(["window", "shift", "mean_correlation"])?;
        for s in &self.shifted_correlation {
            if let Some(m) = s.mean {
                w.write_record([s.window.to_string(), s.shift.to_string(), m.to_string()])?;
            }
        }
        w.flush().map_err(|e| Error::io(dir, e))?;

        let mut w = csv::Writer::from_path(dir.join("summary.csv"))?;
        w.write_record(["metric", "value"])?;
        let m = &self.moments;
        for (k, v) in [
            ("mean", m.mean),
            ("std", m.std),
            ("skewness", m.skewness),
            ("excess_kurtosis", m.excess_kurtosis),
            ("tail_index", self.tail_index.unwrap_or(f64::NAN)),
        ] {
            w.write_record([k.to_string(), v.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(dir, e))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyDistance {
    pub family: String,
    /// `None` when either report lacks the metric
    pub distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub families: Vec<FamilyDistance>,
    /// equal-weight mean of the available family distances
    pub aggregate: f64,
}

/// L1 histogram distance per family on edges shared by both reports.
pub fn compare_reports(a: &StylizedStatsReport, b: &StylizedStatsReport) -> Result<Comparison> {
    let mut families = Vec::with_capacity(FAMILY_COUNT);
    for ((name, sa), (_, sb)) in a.families().into_iter().zip(b.families()) {
        let distance = match (sa, sb) {
            (Some(sa), Some(sb)) => {
                let edges = shared_edges(&[sa, sb], HISTOGRAM_BINS);
                Some(histogram_distance(&Histogram::from_sample(sa, &edges)?, &Histogram::from_sample(sb, &edges)?)?)
            }
            _ => None,
        };
        families.push(FamilyDistance { family: name, distance });
    }
    let present: Vec<f64> = families.iter().filter_map(|f| f.distance).collect();
    Ok(Comparison { aggregate: mean(&present), families })
}
