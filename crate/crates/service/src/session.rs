//! Session state machine. State changes only through [`Step`]s, which are
//! exactly what the event log stores, so replaying the log rebuilds every
//! session.

use std::collections::HashMap;

use acbc_core::survey::{generate_candidate_profiles, select_tournament_field, Bracket};
use acbc_core::{Profile, RespondentRecord, Side, SurveyDesign};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::api::{
    Answer, AttributeView, Phase, ProfileView, Progress, Question, ResponseRequest, SessionView, Summary,
    API_SCHEMA_VERSION, BYO_PROMPT, CHOICE_PROMPT,
};
use crate::error::ApiError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum Step {
    /// The field is stored so replay never depends on the generator.
    Byo { byo: Profile, field: Vec<Profile> },
    Choice { task: usize, winner: Side },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase", rename_all_fields = "camelCase")]
pub enum Event {
    SessionCreated {
        population_tag: String,
        seed: u64,
        created_at: String,
    },
    Answered {
        step: Step,
        idempotency_key: String,
        request: ResponseRequest,
        response: SessionView,
    },
}

#[derive(Debug, Clone)]
struct Stored {
    request: ResponseRequest,
    response: SessionView,
}

#[derive(Debug, Clone)]
pub struct Session {
    pub id: String,
    pub study_id: String,
    pub population_tag: String,
    pub seed: u64,
    pub created_at: String,
    byo: Option<Profile>,
    bracket: Option<Bracket>,
    seen: HashMap<String, Stored>,
}

/// Outcome of checking a submission against the current state.
pub enum Prepared {
    /// Same idempotency key and payload as an earlier submission.
    Repeat(SessionView),
    Advance { event: Event, next: Box<Session> },
}

impl Session {
    pub fn new(id: String, study_id: String, population_tag: String, seed: u64, created_at: String) -> Self {
        Session {
            id,
            study_id,
            population_tag,
            seed,
            created_at,
            byo: None,
            bracket: None,
            seen: HashMap::new(),
        }
    }

    pub fn phase(&self) -> Phase {
        match &self.bracket {
            None => Phase::AwaitingByo,
            Some(b) if b.is_complete() => Phase::Complete,
            Some(_) => Phase::InTournament,
        }
    }

    pub fn bracket(&self) -> Option<&Bracket> {
        self.bracket.as_ref()
    }

    pub fn view(&self, design: &SurveyDesign) -> SessionView {
        let total = design.field_size() - 1;
        let answered = self.bracket.as_ref().map_or(0, Bracket::answered);
        let (question, summary) = match (self.phase(), &self.bracket) {
            (Phase::AwaitingByo, _) => (
                Some(Question::Byo {
                    prompt: BYO_PROMPT.to_string(),
                    attributes: design
                        .attributes
                        .iter()
                        .map(|a| AttributeView {
                            label: a.label.clone(),
                            levels: a.levels.clone(),
                        })
                        .collect(),
                }),
                None,
            ),
            (Phase::InTournament, Some(b)) => {
                let task = b.pending().expect("tournament in progress");
                (
                    Some(Question::Choice {
                        task: answered + 1,
                        total,
                        round: b.current_round(),
                        prompt: CHOICE_PROMPT.to_string(),
                        left: ProfileView::new(design, &task.left),
                        right: ProfileView::new(design, &task.right),
                    }),
                    None,
                )
            }
            (_, Some(b)) => (
                None,
                Some(Summary {
                    byo: ProfileView::new(design, self.byo.as_ref().expect("byo precedes bracket")),
                    champion: ProfileView::new(design, b.champion().expect("complete")),
                    tasks: b.answered(),
                }),
            ),
            (_, None) => unreachable!("phase derives from the bracket"),
        };
        SessionView {
            schema_version: API_SCHEMA_VERSION,
            session_id: self.id.clone(),
            study_id: self.study_id.clone(),
            phase: self.phase(),
            progress: Progress { answered, total },
            question,
            summary,
        }
    }

    /// Applies one step. Used both live and on replay.
    pub fn transition(&mut self, step: &Step) -> Result<(), String> {
        match (step, self.phase()) {
            (Step::Byo { byo, field }, Phase::AwaitingByo) => {
                let bracket = Bracket::new(field.clone()).map_err(|e| e.to_string())?;
                self.byo = Some(byo.clone());
                self.bracket = Some(bracket);
                Ok(())
            }
            (Step::Choice { task, winner }, Phase::InTournament) => {
                let bracket = self.bracket.as_mut().expect("in tournament");
                if *task != bracket.answered() + 1 {
                    return Err(format!("task {task} is not the pending task {}", bracket.answered() + 1));
                }
                bracket.record_choice(*winner).map_err(|e| e.to_string())?;
                Ok(())
            }
            (_, phase) => Err(format!("step does not apply in phase {phase:?}")),
        }
    }

    pub fn remember(&mut self, key: String, request: ResponseRequest, response: SessionView) {
        self.seen.insert(key, Stored { request, response });
    }

    /// Validates a submission and computes the event and resulting state
    /// without touching `self`.
    pub fn prepare(
        &self,
        design: &SurveyDesign,
        key: &str,
        request: &ResponseRequest,
    ) -> Result<Prepared, ApiError> {
        if let Some(prev) = self.seen.get(key) {
            if prev.request == *request {
                return Ok(Prepared::Repeat(prev.response.clone()));
            }
            return Err(ApiError::Validation(format!(
                "idempotency key {key:?} was already used with a different payload"
            )));
        }
        let step = match (&request.answer, self.phase()) {
            (Answer::Byo { levels }, Phase::AwaitingByo) => {
                let counts = design.level_counts();
                if levels.len() != counts.len() {
                    return Err(ApiError::Validation(format!(
                        "BYO answer has {} levels, design has {} attributes",
                        levels.len(),
                        counts.len()
                    )));
                }
                if let Some((a, (&l, &m))) = levels.iter().zip(&counts).enumerate().find(|(_, (&l, &m))| l >= m) {
                    return Err(ApiError::Validation(format!(
                        "attribute {} level {l} out of range (0..{m})",
                        a + 1
                    )));
                }
                let byo = Profile::from_indices(levels);
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let candidates = generate_candidate_profiles(&byo, design, &mut rng)
                    .map_err(|e| ApiError::Validation(e.to_string()))?;
                let field = select_tournament_field(&candidates, design.field_size(), &mut rng)
                    .map_err(|e| ApiError::Internal(e.to_string()))?;
                Step::Byo { byo, field }
            }
            (Answer::Choice { task, winner }, Phase::InTournament) => {
                let pending = self.bracket.as_ref().map_or(0, Bracket::answered) + 1;
                if *task != pending {
                    return Err(ApiError::Conflict(format!(
                        "task {task} is not the pending task {pending}"
                    )));
                }
                Step::Choice { task: *task, winner: *winner }
            }
            (answer, phase) => {
                let kind = match answer {
                    Answer::Byo { .. } => "BYO answer",
                    Answer::Choice { .. } => "choice",
                };
                return Err(ApiError::Conflict(format!(
                    "a {kind} does not fit a session in phase {}",
                    phase_name(phase)
                )));
            }
        };
        let mut next = self.clone();
        next.transition(&step).map_err(ApiError::Internal)?;
        let response = next.view(design);
        next.remember(key.to_string(), request.clone(), response.clone());
        Ok(Prepared::Advance {
            event: Event::Answered {
                step,
                idempotency_key: key.to_string(),
                request: request.clone(),
                response,
            },
            next: Box::new(next),
        })
    }

    /// The analysis record for a completed session.
    pub fn record(&self) -> Option<RespondentRecord> {
        let bracket = self.bracket.as_ref().filter(|b| b.is_complete())?;
        Some(RespondentRecord {
            id: self.id.clone(),
            population_tag: self.population_tag.clone(),
            byo: self.byo.clone()?,
            field: bracket.field().to_vec(),
            tasks: bracket.tasks(),
            seed: Some(self.seed),
        })
    }
}

fn phase_name(p: Phase) -> &'static str {
    match p {
        Phase::AwaitingByo => "awaitingByo",
        Phase::InTournament => "inTournament",
        Phase::Complete => "complete",
    }
}
