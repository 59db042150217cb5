//! Stream ingestion, synthetic workloads, experiment runs and reports.

pub mod config;
pub mod fixtures;
pub mod pipeline;
pub mod report;
pub mod stream;
pub mod synth;

pub use config::{apply_axis, BenchSection, DemandSection, EngineSection, ExperienceSection, ExperienceSource, ExperimentConfig, Sweep};
pub use pipeline::{chronological_split, DemandFit, demand_stream, experience_instances, fit_demand, gather_experience, run_bench, stream_samples};
pub use report::{aggregate, emit_report, load_reports, run_experiment, Axes, RunReport};
pub use stream::{load_stream, Event, EventStream};
pub use synth::{lag_coupled_config, synth_workload, Cycle, Hotspot, HotspotLink, WorkloadConfig};
