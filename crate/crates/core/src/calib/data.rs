use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng;

pub const OHLCV_HEADER: [&str; 6] = ["date", "open", "high", "low", "close", "volume"];

#[derive(Debug, Clone, PartialEq)]
pub struct OhlcvRow {
    pub date: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
}

/// Daily bars of one asset.
#[derive(Debug, Clone, PartialEq)]
pub struct AssetSeries {
    pub symbol: String,
    pub rows: Vec<OhlcvRow>,
    /// no calendar day is missing between the first and last row
    pub continuous: bool,
}

impl AssetSeries {
    pub fn closes(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.close).collect()
    }

    pub fn volumes(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.volume).collect()
    }
}

fn parse_real(field: &str, name: &str, path: &Path, line: usize) -> Result<f64> {
    let malformed = |reason: String| Error::MalformedRow { path: path.to_path_buf(), line, reason };
    let v: f64 = field.trim().parse().map_err(|_| malformed(format!("{name} `{field}` is not a number")))?;
    if !v.is_finite() {
        return Err(malformed(format!("{name} `{field}` is not finite")));
    }
    Ok(v)
}

/// Reads a daily OHLCV file. The symbol is the file stem.
pub fn load_ohlcv(path: &Path) -> Result<AssetSeries> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file);
    let header = reader.headers()?.clone();
    if header.iter().ne(OHLCV_HEADER) {
        return Err(Error::MalformedRow {
            path: path.to_path_buf(),
            line: 1,
            reason: format!("expected header `{}`", OHLCV_HEADER.join(",")),
        });
    }

    let mut rows: Vec<OhlcvRow> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let malformed = |reason: String| Error::MalformedRow { path: path.to_path_buf(), line, reason };
        if record.len() != OHLCV_HEADER.len() {
            return Err(malformed(format!("expected 6 fields, found {}", record.len())));
        }
        let date = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d")
            .map_err(|_| malformed(format!("date `{}` is not YYYY-MM-DD", &record[0])))?;
        let mut v = [0.0; 5];
        for (i, slot) in v.iter_mut().enumerate() {
            *slot = parse_real(&record[i + 1], OHLCV_HEADER[i + 1], path, line)?;
        }
        let [open, high, low, close, volume] = v;
        for (name, value) in [("open", open), ("high", high), ("low", low), ("close", close)] {
            if value <= 0.0 {
                return Err(malformed(format!("{name} must be positive, got {value}")));
            }
        }
        if volume < 0.0 {
            return Err(malformed(format!("volume must be non-negative, got {volume}")));
        }
        if rows.last().is_some_and(|prev| prev.date >= date) {
            return Err(Error::NonIncreasingDates { path: path.to_path_buf(), line, date: date.to_string() });
        }
        rows.push(OhlcvRow { date, open, high, low, close, volume });
    }

    let continuous = rows.windows(2).all(|w| (w[1].date - w[0].date).num_days() == 1);
    let symbol = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(AssetSeries { symbol, rows, continuous })
}

/// Loads every `*.csv` under `dir`, in file-name order.
pub fn load_dir(dir: &Path) -> Result<Vec<AssetSeries>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    paths.iter().map(|p| load_ohlcv(p)).collect()
}

pub fn filter_continuous(assets: Vec<AssetSeries>) -> Vec<AssetSeries> {
    assets.into_iter().filter(|a| a.continuous).collect()
}

/// Random halves; with an odd count the training side gets the extra asset.
pub fn split_train_test(assets: Vec<AssetSeries>, seed: u64) -> Result<(Vec<AssetSeries>, Vec<AssetSeries>)> {
    if assets.len() < 2 {
        return Err(Error::arg("assets", format!("need at least 2 assets to split, got {}", assets.len())));
    }
    let mut order: Vec<usize> = (0..assets.len()).collect();
    order.shuffle(&mut rng::stream(seed, 400));
    let n_train = assets.len().div_ceil(2);
    let mut in_train = vec![false; assets.len()];
    for &i in &order[..n_train] {
        in_train[i] = true;
    }
    let (mut train, mut test) = (Vec::with_capacity(n_train), Vec::new());
    for (a, t) in assets.into_iter().zip(in_train) {
        if t {
            train.push(a);
        } else {
            test.push(a);
        }
    }
    Ok((train, test))
}
