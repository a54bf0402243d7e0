//! Domain vocabulary shared by the survey engine and the analysis modules.
//!
//! Levels are 0-based indices everywhere in code; display labels live only in
//! [`SurveyDesign`]. Level `0` of an attribute is the first level listed in the
//! design file.

use std::fmt;

use num_rational::Ratio;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exact rational count. Per-respondent tie shares only produce halves and
/// thirds, so `i64` numerators never come close to overflowing.
pub type Count = Ratio<i64>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribute {
    pub label: String,
    pub levels: Vec<String>,
}

impl Attribute {
    pub fn new(label: impl Into<String>, levels: &[&str]) -> Self {
        Attribute {
            label: label.into(),
            levels: levels.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }
}

/// Attributes with ordered levels plus the tournament parameters.
///
/// `alternatives_per_task` is `a`, `choice_tasks` is `t`. A single-elimination
/// tournament with `t` tasks starts from a field of `t + 1` profiles, which must
/// be a power of two.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SurveyDesign {
    pub attributes: Vec<Attribute>,
    pub alternatives_per_task: usize,
    pub choice_tasks: usize,
}

/// Outcome of the small-study check `n < N < (c / (a t)) * 1000`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SmallStudyReport {
    pub sample_size: u64,
    pub population_size: u64,
    pub bound: f64,
    pub holds: bool,
}

impl SurveyDesign {
    pub fn new(
        attributes: Vec<Attribute>,
        alternatives_per_task: usize,
        choice_tasks: usize,
    ) -> Result<Self> {
        let design = SurveyDesign {
            attributes,
            alternatives_per_task,
            choice_tasks,
        };
        design.validate()?;
        Ok(design)
    }

    /// Four attributes with three levels each, binary tasks, 15 tasks
    /// (a round-of-16 tournament). Labels follow the disaster-relief study.
    pub fn four_by_three() -> Self {
        SurveyDesign {
            attributes: vec![
                Attribute::new("Funding", &[">=75%", "~50%", "<25%"]),
                Attribute::new(
                    "Disaster Response Type",
                    &["IASC 3", "IASC 2", "IASC 1 or undeclared"],
                ),
                Attribute::new("Assessed Need", &["clear", "optional", "unknown"]),
                Attribute::new("Community Access", &["none", "local", "outside"]),
            ],
            alternatives_per_task: 2,
            choice_tasks: 15,
        }
    }

    /// Generic design with the given level counts and labels `A`, `B`, ...
    /// with levels `A1`, `A2`, ...
    pub fn with_level_counts(level_counts: &[usize], choice_tasks: usize) -> Result<Self> {
        let attributes = level_counts
            .iter()
            .enumerate()
            .map(|(i, &m)| {
                let label = attribute_letter(i);
                Attribute {
                    levels: (1..=m).map(|l| format!("{label}{l}")).collect(),
                    label,
                }
            })
            .collect();
        SurveyDesign::new(attributes, 2, choice_tasks)
    }

    pub fn validate(&self) -> Result<()> {
        if self.attributes.len() < 2 {
            return Err(Error::InvalidDesign(format!(
                "need at least 2 attributes, got {}",
                self.attributes.len()
            )));
        }
        for attr in &self.attributes {
            if attr.level_count() < 2 {
                return Err(Error::InvalidDesign(format!(
                    "attribute {:?} has {} level(s), need at least 2",
                    attr.label,
                    attr.level_count()
                )));
            }
            if attr.level_count() > u8::MAX as usize {
                return Err(Error::InvalidDesign(format!(
                    "attribute {:?} has too many levels ({})",
                    attr.label,
                    attr.level_count()
                )));
            }
        }
        if self.alternatives_per_task != 2 {
            return Err(Error::InvalidDesign(format!(
                "only binary choice tasks are supported (a = 2), got a = {}",
                self.alternatives_per_task
            )));
        }
        let field = self.choice_tasks + 1;
        if self.choice_tasks == 0 || !field.is_power_of_two() {
            return Err(Error::InvalidDesign(format!(
                "t = {} tasks implies a tournament field of {field}, which is not a power of two",
                self.choice_tasks
            )));
        }
        Ok(())
    }

    /// `k`
    pub fn attribute_count(&self) -> usize {
        self.attributes.len()
    }

    /// `c`: the largest level count over all attributes.
    pub fn max_levels(&self) -> usize {
        self.attributes.iter().map(Attribute::level_count).max().unwrap_or(0)
    }

    pub fn level_counts(&self) -> Vec<usize> {
        self.attributes.iter().map(Attribute::level_count).collect()
    }

    pub fn field_size(&self) -> usize {
        self.choice_tasks + 1
    }

    /// Short shape string such as `4x3` or `3+2`.
    pub fn shape(&self) -> String {
        let counts = self.level_counts();
        if counts.windows(2).all(|w| w[0] == w[1]) {
            format!("{}x{}", counts.len(), counts[0])
        } else {
            counts.iter().map(|c| c.to_string()).collect::<Vec<_>>().join("+")
        }
    }

    /// Checks `n < N < (c / (a t)) * 10^3`.
    pub fn small_study(&self, n: u64, population: u64) -> Result<SmallStudyReport> {
        self.validate()?;
        if n < 1 {
            return Err(Error::InvalidInput("sample size n must be at least 1".into()));
        }
        if population < n {
            return Err(Error::InvalidInput(format!(
                "population size N = {population} is smaller than sample size n = {n}"
            )));
        }
        let bound = self.max_levels() as f64
            / (self.alternatives_per_task * self.choice_tasks) as f64
            * 1000.0;
        Ok(SmallStudyReport {
            sample_size: n,
            population_size: population,
            bound,
            holds: n < population && (population as f64) < bound,
        })
    }

    pub fn level_label(&self, attribute: usize, level: usize) -> &str {
        &self.attributes[attribute].levels[level]
    }

    /// Compact profile string like `A1B2C1D3`, using 1-based level numbers.
    pub fn profile_code(&self, profile: &Profile) -> String {
        profile
            .levels()
            .iter()
            .enumerate()
            .map(|(a, &l)| format!("{}{}", attribute_letter(a), l + 1))
            .collect()
    }
}

pub(crate) fn attribute_letter(index: usize) -> String {
    let mut s = String::new();
    let mut i = index;
    loop {
        s.insert(0, (b'A' + (i % 26) as u8) as char);
        if i < 26 {
            break;
        }
        i = i / 26 - 1;
    }
    s
}

/// One level index per attribute.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Profile(Vec<u8>);

impl Profile {
    pub fn new(levels: Vec<u8>) -> Self {
        Profile(levels)
    }

    pub fn from_indices(levels: &[usize]) -> Self {
        Profile(levels.iter().map(|&l| l as u8).collect())
    }

    pub fn levels(&self) -> &[u8] {
        &self.0
    }

    pub fn level(&self, attribute: usize) -> usize {
        self.0[attribute] as usize
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn with_level(&self, attribute: usize, level: usize) -> Profile {
        let mut levels = self.0.clone();
        levels[attribute] = level as u8;
        Profile(levels)
    }

    /// Number of attributes in which the two profiles differ.
    pub fn distance(&self, other: &Profile) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
    }

    pub fn validate(&self, design: &SurveyDesign) -> Result<()> {
        if self.0.len() != design.attribute_count() {
            return Err(Error::InvalidProfile(format!(
                "profile has {} levels, design has {} attributes",
                self.0.len(),
                design.attribute_count()
            )));
        }
        for (a, (&level, attr)) in self.0.iter().zip(&design.attributes).enumerate() {
            if level as usize >= attr.level_count() {
                return Err(Error::InvalidProfile(format!(
                    "attribute {a} ({:?}) has {} levels, got level index {level}",
                    attr.label,
                    attr.level_count()
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (a, &l) in self.0.iter().enumerate() {
            write!(f, "{}{}", attribute_letter(a), l + 1)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// A pair of profiles shown together, with the respondent's pick once answered.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChoiceTask {
    pub left: Profile,
    pub right: Profile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub winner: Option<Side>,
}

impl ChoiceTask {
    pub fn new(left: Profile, right: Profile) -> Result<Self> {
        if left == right {
            return Err(Error::InvalidInput(format!(
                "choice task pairs identical profiles {left}"
            )));
        }
        if left.len() != right.len() {
            return Err(Error::InvalidInput(
                "choice task profiles have different attribute counts".into(),
            ));
        }
        Ok(ChoiceTask {
            left,
            right,
            winner: None,
        })
    }

    pub fn answered(left: Profile, right: Profile, winner: Side) -> Result<Self> {
        let mut task = ChoiceTask::new(left, right)?;
        task.winner = Some(winner);
        Ok(task)
    }

    pub fn profile(&self, side: Side) -> &Profile {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    /// `(winner, loser)` once answered.
    pub fn outcome(&self) -> Option<(&Profile, &Profile)> {
        match self.winner? {
            Side::Left => Some((&self.left, &self.right)),
            Side::Right => Some((&self.right, &self.left)),
        }
    }
}

/// Everything collected from one respondent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RespondentRecord {
    pub id: String,
    pub population_tag: String,
    /// Most Typical levels from the Build-Your-Own question.
    pub byo: Profile,
    /// Tournament field in bracket order; empty when not recorded.
    #[serde(default)]
    pub field: Vec<Profile>,
    pub tasks: Vec<ChoiceTask>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl RespondentRecord {
    pub fn validate(&self, design: &SurveyDesign) -> Result<()> {
        self.byo.validate(design)?;
        if self.tasks.len() > design.choice_tasks {
            return Err(Error::InvalidInput(format!(
                "respondent {:?} answered {} tasks, design allows {}",
                self.id,
                self.tasks.len(),
                design.choice_tasks
            )));
        }
        for p in &self.field {
            p.validate(design)?;
        }
        for (i, task) in self.tasks.iter().enumerate() {
            task.left.validate(design)?;
            task.right.validate(design)?;
            if task.left == task.right {
                return Err(Error::InvalidInput(format!(
                    "respondent {:?} task {} pairs identical profiles",
                    self.id,
                    i + 1
                )));
            }
            if !self.field.is_empty()
                && !(self.field.contains(&task.left) && self.field.contains(&task.right))
            {
                return Err(Error::InvalidInput(format!(
                    "respondent {:?} task {} uses a profile outside the tournament field",
                    self.id,
                    i + 1
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CountKind {
    Mt,
    MiPartworth,
    MiPaprika,
}

impl fmt::Display for CountKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CountKind::Mt => "MT",
            CountKind::MiPartworth => "MI-partworth",
            CountKind::MiPaprika => "MI-paprika",
        })
    }
}

/// Per-level sample counts `n_i` for one attribute.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyDistribution {
    pub attribute: usize,
    pub kind: CountKind,
    pub counts: Vec<Count>,
}

impl FrequencyDistribution {
    pub fn from_integers(attribute: usize, kind: CountKind, counts: &[u64]) -> Self {
        FrequencyDistribution {
            attribute,
            kind,
            counts: counts.iter().map(|&c| Count::from_integer(c as i64)).collect(),
        }
    }

    pub fn n(&self) -> Count {
        self.counts.iter().fold(Count::zero(), |acc, c| acc + c)
    }

    /// The counts as integers, if none are fractional.
    pub fn integer_counts(&self) -> Option<Vec<u64>> {
        self.counts
            .iter()
            .map(|c| c.is_integer().then(|| c.to_integer() as u64))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimationMethod {
    Mle,
    WmaeMin,
}

/// Estimated population counts `N̂_i` for one attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PopulationEstimate {
    pub counts: Vec<u64>,
    pub population: u64,
    pub method: EstimationMethod,
    pub wmae: f64,
    pub non_unique: bool,
}
