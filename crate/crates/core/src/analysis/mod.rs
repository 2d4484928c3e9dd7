//! Questionnaire scoring and the statistics used to compare conditions.

mod questionnaire;
mod report;
mod stats;

use thiserror::Error;

pub use questionnaire::{
    score_nasa_tlx, score_ssq, score_ues_sf, QuestionnaireScores, RatingPair, SsqScores, UesScores,
};
pub use report::{
    observations_from_log, read_questionnaires, study_report, Instrument, QuestionnaireEntry, ReportRow, StudyReport,
    TrialObservation, REPORT_HEADER,
};
pub use stats::{
    eta_p2_ci, fdr_adjust, fisher_z_compare, mid_ranks, noncentral_f_cdf, pearson, rm_anova_2x2, spearman,
    AnovaResult, AnovaTable, CorrelationResult, SubjectCells, ZCompareResult,
};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("validation: {0}")]
    Validation(String),
    #[error("undefined: {0}")]
    Undefined(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
