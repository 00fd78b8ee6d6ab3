//! Scenario generation, session orchestration and replicated experiments.

mod experiments;
mod scenario;
mod session;

pub use experiments::{
    baseline_comparison, calibrate_gamma, gamma_sweep, mean_coalition_count, paired, relation_sweep, rows_csv,
    run_arms, seeds, summarize, summary_csv, weight_promotion, Arm, ArmSummary, ExperimentRow, Paired,
};
pub use scenario::{
    community_profiles, generate_scenario, neighborhood_profiles, Profile, RelationMix, ScenarioSpec, SpecError,
    DEFAULT_DELTA_RANGE, DEFAULT_PRICE_RANGE, MIX_TOLERANCE,
};
pub use session::{
    audit_coalition, run_baseline, run_session, scenario_digest, social_index_from_ledger, AuditRow, HourOutcome,
    RunOptions, SessionError, SessionMetrics, SessionOutcome,
};
