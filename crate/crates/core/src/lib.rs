//! Small-sample adaptive choice-based conjoint (ACBC) analysis.
//!
//! The crate covers the whole analysis path for a study where only a small
//! sample `n` can be drawn from a small known population `N`:
//!
//! * [`model`]: survey designs, profiles, choice tasks and respondent records.
//! * [`survey`]: Build-Your-Own candidate generation and the single-elimination
//!   choice-task tournament.
//! * [`paprika`]: feasible-ranking elimination and Most Ideal level extraction.
//! * [`partworth`]: a pairwise-logit part-worth baseline.
//! * [`estimation`]: maximum-likelihood and WMAE-minimizing estimates of a
//!   population frequency distribution under a multivariate hypergeometric
//!   sampling model.
//! * [`simulation`]: Monte Carlo recovery rates of Most Ideal levels.
//! * [`io`]: design files, respondent JSON Lines, audit CSV exports.
//! * [`report`]: the batch study report.

pub mod error;
pub mod estimation;
pub mod io;
pub mod model;
pub mod paprika;
pub mod partworth;
pub mod report;
pub mod simulation;
pub mod survey;

pub use error::{Error, Result};
pub use model::{
    Attribute, ChoiceTask, CountKind, FrequencyDistribution, PopulationEstimate, Profile,
    RespondentRecord, Side, SurveyDesign,
};
