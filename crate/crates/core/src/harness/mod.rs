//! Scenario configuration, execution, trace files and monitor verdicts.

pub mod config;
pub mod monitors;
pub mod reference;
pub mod run;
pub mod trace;

pub use config::{load_config, parse_config, ScenarioConfig};
pub use monitors::{evaluate_monitors, MonitorReport, Verdict};
pub use run::run_scenario;
pub use trace::{export_trace, load_trace, Trace, TraceFormat, TraceRow};
