//! Two-station Bell/CHSH experiment simulator and offline tag analysis.
//!
//! The crate simulates a complete Einstein-locality Bell experiment:
//! * a cw-pumped entangled-pair source ([`quantum`]),
//! * pluggable outcome models, quantum and local-hidden-variable ([`models`]),
//! * two independent observer stations with fast random analyzer switching,
//!   finite efficiency, dark counts, dead time and free-running local clocks
//!   ([`station`]),
//! * a bit-exact binary time-tag stream format ([`tagstream`]),
//!
//! and analyzes the two recorded streams strictly offline:
//! * clock-offset recovery and coincidence matching ([`coincidence`]),
//! * correlation functions, the CHSH statistic, sinusoid fits and
//!   no-signaling checks ([`analysis`]),
//! * the space-like-separation timing audit ([`locality`]).
//!
//! [`experiment`] wires the simulation side together end to end.

pub mod analysis;
pub mod coincidence;
pub mod error;
pub mod experiment;
pub mod locality;
pub mod models;
pub mod quantum;
pub mod rng;
pub mod serde_util;
pub mod station;
pub mod tagstream;
pub mod time;

pub use analysis::{
    chsh, chsh_all_forms, chsh_form, chsh_max, correlation, correlations, fit_sinusoid,
    no_signaling_check, ChshForm, ChshResult, CorrelationResult, NoSignalingReport, SinusoidFit,
};
pub use coincidence::{
    match_coincidences, offset_histogram, recover_offset, CoincidenceTable, MatchMode,
    MatchResult, MatchedPair, OffsetEstimate, RecoverParams,
};
pub use error::{Error, Result};
pub use experiment::{
    run_experiment, run_scan, AnalysisParams, ExperimentConfig, GroundTruth, RunManifest,
    RunOutput, ScanParams, ScanPoint,
};
pub use locality::{
    audit, audit_streams, Geometry, LocalityReport, MeasurementBudget, StreamAuditReport,
    StreamAuditStatus,
};
pub use models::{
    DetectionLoopholeLhv, DeterministicLhv, HiddenVariable, LocalModel, LocalResponse, ModelKind,
    OutcomeModel, PairContext, Side,
};
pub use quantum::{
    emit_pairs, outcome_probabilities, sample_joint_outcome, EmissionConfig,
    EntangledStateParams, JointOutcome, Outcome, OutcomeProbabilities,
};
pub use station::{dark_arrivals, Arrival, ClockModel, Station, StationConfig, TimeTag};
pub use tagstream::{records_to_tags, tags_to_records, StreamHeader, StreamReader, TagRecord};
