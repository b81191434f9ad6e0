//! Real-data ingestion and hyperparameter calibration against it.

mod data;
mod grid;

pub use data::{filter_continuous, load_dir, load_ohlcv, split_train_test, AssetSeries, OhlcvRow, OHLCV_HEADER};
pub use grid::{
    grid_search, rank_records, real_report, score_cell, sensitivity_scan, simulated_report, write_records,
    write_timing, Axis, CalibrationRecord, GridCell, HyperGrid, SensitivityPoint,
};
