//! Wire types. Every request and response body carries `schemaVersion`.

use acbc_core::{Profile, Side, SurveyDesign};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;

pub const API_SCHEMA_VERSION: u32 = 1;

const MAX_TAG_LEN: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CreateSessionRequest {
    pub schema_version: u32,
    pub population_tag: String,
    /// Fixes candidate generation and field selection; random when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum Answer {
    /// One 0-based level index per attribute.
    Byo { levels: Vec<usize> },
    /// `task` is the 1-based number of the task being answered.
    Choice { task: usize, winner: Side },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ResponseRequest {
    pub schema_version: u32,
    #[serde(flatten)]
    pub answer: Answer,
}

fn check_version(v: u32) -> Result<(), ApiError> {
    if v != API_SCHEMA_VERSION {
        return Err(ApiError::BadRequest(format!(
            "unsupported schemaVersion {v} (expected {API_SCHEMA_VERSION})"
        )));
    }
    Ok(())
}

pub fn parse_create_request(body: &[u8]) -> Result<CreateSessionRequest, ApiError> {
    let req: CreateSessionRequest =
        serde_json::from_slice(body).map_err(|e| ApiError::BadRequest(format!("invalid session request: {e}")))?;
    check_version(req.schema_version)?;
    let tag = req.population_tag.trim();
    if tag.is_empty() || tag.len() > MAX_TAG_LEN || tag.chars().any(char::is_control) {
        return Err(ApiError::Validation(format!(
            "populationTag must be 1-{MAX_TAG_LEN} printable characters"
        )));
    }
    Ok(req)
}

pub fn parse_response_request(body: &[u8]) -> Result<ResponseRequest, ApiError> {
    let req: ResponseRequest =
        serde_json::from_slice(body).map_err(|e| ApiError::BadRequest(format!("invalid response payload: {e}")))?;
    check_version(req.schema_version)?;
    Ok(req)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Phase {
    AwaitingByo,
    InTournament,
    Complete,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AttributeView {
    pub label: String,
    pub levels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProfileView {
    pub levels: Vec<usize>,
    pub labels: Vec<String>,
    pub code: String,
}

impl ProfileView {
    pub fn new(design: &SurveyDesign, p: &Profile) -> Self {
        ProfileView {
            levels: p.levels().iter().map(|&l| l as usize).collect(),
            labels: (0..p.len()).map(|a| design.level_label(a, p.level(a)).to_string()).collect(),
            code: p.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum Question {
    Byo {
        prompt: String,
        attributes: Vec<AttributeView>,
    },
    Choice {
        task: usize,
        total: usize,
        round: usize,
        prompt: String,
        left: ProfileView,
        right: ProfileView,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Summary {
    pub byo: ProfileView,
    pub champion: ProfileView,
    pub tasks: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Progress {
    pub answered: usize,
    pub total: usize,
}

/// What the respondent sees next.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionView {
    pub schema_version: u32,
    pub session_id: String,
    pub study_id: String,
    pub phase: Phase,
    pub progress: Progress,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question: Option<Question>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<Summary>,
}

pub const BYO_PROMPT: &str =
    "Build the profile you most typically encounter: for each attribute, choose the most typical level.";
pub const CHOICE_PROMPT: &str = "Which of these two profiles is closer to your ideal?";
