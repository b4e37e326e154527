//! Scenario configs, Monte Carlo runs over `(N, SNR)` grids and CSV output.

mod config;
mod csvio;
mod run;

pub use config::{
    Axis, BaselineSettings, DetectionSettings, FunctionKind, RangeSpec, RequestSettings, ScenarioConfig, MAX_SENSORS,
};
pub use csvio::{
    emit_csv, read_csv, read_gain_table, write_depth_table, write_gain_table, write_runs, ScenarioRows, TrialRow,
    DEPTH_COLUMNS, GAIN_COLUMNS, RUN_COLUMNS,
};
pub use run::{
    error_bits, gain_table, oracle, rms, run_point, run_scenario, run_sweep, trial_inputs, DepthStat, GainRow,
    RunRecord, Summary, TrialInputs, TrialOutcome, READING_POWER,
};
