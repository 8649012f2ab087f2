//! Orchestration of the two analysis workflows over joined student
//! profiles, plus report serialization.

pub mod config;
pub mod error;
pub mod profile;
pub mod report;
pub mod rq1;
pub mod rq2;

pub use config::AnalysisConfig;
pub use error::PipelineError;
pub use profile::{build_profiles, join_profiles, Attrition, CohortData, Sources};
pub use report::{emit_report, Report, ReportFormat};
pub use rq1::{run_rq1, Rq1Report};
pub use rq2::{run_rq2, Rq2Report};
