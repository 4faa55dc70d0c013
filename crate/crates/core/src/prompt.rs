//! Annotation prompt definition and rendering.
//!
//! A [`PromptSpec`] lists the variables to rate, the attitude scale and the
//! no-information rule. Rendering is a pure function of the spec and the
//! review: the instructions always come first and the review text is fenced
//! between marker lines that cannot occur inside it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Review, VariableSet, MAX_SCALE_POINTS};

pub const REVIEW_BEGIN: &str = "-----BEGIN REVIEW-----";
pub const REVIEW_END: &str = "-----END REVIEW-----";

const DEFAULT_TASK: &str = "Your task is to evaluate customer reviews of products based on specific variables that influence technology acceptance.";
const DEFAULT_SCALE_INTRO: &str =
    "You will use a {points}-point Likert scale to rate each variable in the review.";
const DEFAULT_NO_INFO: &str = "If the review does not provide enough information to assess this factor, or the factor is irrelevant to the context of the review, will assign {code} to the respective variable.";
const DEFAULT_OUTPUT_FORMAT: &str = "Respond with exactly one line per variable in the form `<Variable name>: <integer>` and nothing else.";
const DEFAULT_LEVELS: [&str; 5] = [
    "The review clearly expresses a negative perception of the factor.",
    "The review suggests some negative aspects regarding the factor.",
    "The review does not lean clearly towards a positive or negative perception.",
    "The review suggests a positive perception of the factor.",
    "The review clearly expresses a positive perception of the factor.",
];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PromptError {
    #[error("scale must have between 1 and {MAX_SCALE_POINTS} levels, got {0}")]
    ScaleSize(usize),
    #[error("scale level #{position} has code {code}; codes must run 1, 2, 3, ...")]
    ScaleCodes { position: usize, code: u8 },
    #[error("scale level {0} has an empty description")]
    EmptyDescription(u8),
    #[error("no-information code {0} collides with a scale level")]
    NoInfoCollision(u8),
    #[error("no-information rule text is empty")]
    EmptyNoInfoText,
    #[error("review {0:?} has empty text")]
    EmptyReview(String),
    #[error(transparent)]
    Variables(#[from] crate::model::ModelError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaleLevel {
    pub code: u8,
    pub description: String,
}

/// Rule telling the model which code to use when a review says nothing about
/// a variable. `{code}` in `text` is replaced by the code.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoInfoRule {
    #[serde(default)]
    pub code: u8,
    #[serde(default = "default_no_info_text")]
    pub text: String,
}

fn default_no_info_text() -> String {
    DEFAULT_NO_INFO.to_string()
}

impl Default for NoInfoRule {
    fn default() -> Self {
        NoInfoRule {
            code: 0,
            text: default_no_info_text(),
        }
    }
}

/// Where the instructions go when talking to a chat backend.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MessagePlacement {
    /// Instructions as the system message, fenced review as the user message.
    #[default]
    SystemAndUser,
    /// Everything in a single user message.
    UserOnly,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PromptSpecRepr", into = "PromptSpecRepr")]
pub struct PromptSpec {
    task: String,
    scale_intro: String,
    variables: VariableSet,
    scale_levels: Vec<ScaleLevel>,
    no_info: Option<NoInfoRule>,
    output_format: String,
    placement: MessagePlacement,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PromptSpecRepr {
    #[serde(default)]
    task: Option<String>,
    #[serde(default)]
    scale_intro: Option<String>,
    #[serde(default)]
    variables: Option<VariableSet>,
    #[serde(default)]
    scale: Option<Vec<ScaleLevel>>,
    /// Absent: the default rule. `false`: no such rule.
    #[serde(default)]
    no_information: Option<NoInfoSetting>,
    #[serde(default)]
    output_format: Option<String>,
    #[serde(default)]
    placement: MessagePlacement,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum NoInfoSetting {
    Enabled(bool),
    Rule(NoInfoRule),
}

impl TryFrom<PromptSpecRepr> for PromptSpec {
    type Error = PromptError;
    fn try_from(r: PromptSpecRepr) -> Result<Self, Self::Error> {
        let d = PromptSpec::default_utaut();
        let no_info = match r.no_information {
            None | Some(NoInfoSetting::Enabled(true)) => d.no_info,
            Some(NoInfoSetting::Enabled(false)) => None,
            Some(NoInfoSetting::Rule(rule)) => Some(rule),
        };
        PromptSpec::new(
            r.task.unwrap_or(d.task),
            r.scale_intro.unwrap_or(d.scale_intro),
            r.variables.unwrap_or(d.variables),
            r.scale.unwrap_or(d.scale_levels),
            no_info,
            r.output_format.unwrap_or(d.output_format),
            r.placement,
        )
    }
}

impl From<PromptSpec> for PromptSpecRepr {
    fn from(s: PromptSpec) -> Self {
        PromptSpecRepr {
            task: Some(s.task),
            scale_intro: Some(s.scale_intro),
            variables: Some(s.variables),
            scale: Some(s.scale_levels),
            no_information: Some(match s.no_info {
                Some(rule) => NoInfoSetting::Rule(rule),
                None => NoInfoSetting::Enabled(false),
            }),
            output_format: Some(s.output_format),
            placement: s.placement,
        }
    }
}

/// A prompt split into chat messages.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RenderedPrompt {
    pub system: Option<String>,
    pub user: String,
}

impl PromptSpec {
    pub fn new(
        task: String,
        scale_intro: String,
        variables: VariableSet,
        scale_levels: Vec<ScaleLevel>,
        no_info: Option<NoInfoRule>,
        output_format: String,
        placement: MessagePlacement,
    ) -> Result<Self, PromptError> {
        let spec = PromptSpec {
            task,
            scale_intro,
            variables,
            scale_levels,
            no_info,
            output_format,
            placement,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The four UTAUT variables on a 5-point scale with a no-information
    /// code of 0.
    pub fn default_utaut() -> Self {
        PromptSpec {
            task: DEFAULT_TASK.to_string(),
            scale_intro: DEFAULT_SCALE_INTRO.to_string(),
            variables: VariableSet::utaut(),
            scale_levels: DEFAULT_LEVELS
                .iter()
                .enumerate()
                .map(|(i, d)| ScaleLevel {
                    code: i as u8 + 1,
                    description: d.to_string(),
                })
                .collect(),
            no_info: Some(NoInfoRule::default()),
            output_format: DEFAULT_OUTPUT_FORMAT.to_string(),
            placement: MessagePlacement::SystemAndUser,
        }
    }

    pub fn with_variables(mut self, variables: VariableSet) -> Self {
        self.variables = variables;
        self
    }

    pub fn with_scale(mut self, levels: Vec<ScaleLevel>) -> Result<Self, PromptError> {
        self.scale_levels = levels;
        self.validate()?;
        Ok(self)
    }

    pub fn with_placement(mut self, placement: MessagePlacement) -> Self {
        self.placement = placement;
        self
    }

    pub fn validate(&self) -> Result<(), PromptError> {
        let k = self.scale_levels.len();
        if k == 0 || k > MAX_SCALE_POINTS as usize {
            return Err(PromptError::ScaleSize(k));
        }
        for (i, level) in self.scale_levels.iter().enumerate() {
            if level.code as usize != i + 1 {
                return Err(PromptError::ScaleCodes {
                    position: i,
                    code: level.code,
                });
            }
            if level.description.trim().is_empty() {
                return Err(PromptError::EmptyDescription(level.code));
            }
        }
        if let Some(rule) = &self.no_info {
            if (1..=k as u8).contains(&rule.code) || rule.code > MAX_SCALE_POINTS {
                return Err(PromptError::NoInfoCollision(rule.code));
            }
            if rule.text.trim().is_empty() {
                return Err(PromptError::EmptyNoInfoText);
            }
        }
        Ok(())
    }

    pub fn variables(&self) -> &VariableSet {
        &self.variables
    }

    pub fn scale_levels(&self) -> &[ScaleLevel] {
        &self.scale_levels
    }

    pub fn scale_points(&self) -> u8 {
        self.scale_levels.len() as u8
    }

    pub fn no_info_code(&self) -> Option<u8> {
        self.no_info.as_ref().map(|r| r.code)
    }

    pub fn placement(&self) -> MessagePlacement {
        self.placement
    }

    /// Whether `code` is a rating the model may legitimately answer with.
    pub fn accepts_code(&self, code: i64) -> bool {
        (1..=self.scale_points() as i64).contains(&code)
            || self.no_info_code().is_some_and(|c| c as i64 == code)
    }

    /// The instruction block: task, scale, variables, levels, rule, format.
    pub fn instructions(&self) -> String {
        let mut out = String::new();
        out.push_str(self.task.trim());
        out.push_str("\n\n");
        out.push_str(
            self.scale_intro
                .replace("{points}", &self.scale_points().to_string())
                .trim(),
        );
        out.push_str("\n\nVariables:\n");
        for v in self.variables.iter() {
            match &v.definition {
                Some(def) => out.push_str(&format!("- {}: {}\n", v.name, def.trim())),
                None => out.push_str(&format!("- {}\n", v.name)),
            }
        }
        out.push_str("\nLikert Scale:\n");
        for level in &self.scale_levels {
            out.push_str(&format!("- {}: {}\n", level.code, level.description.trim()));
        }
        if let Some(rule) = &self.no_info {
            out.push('\n');
            out.push_str(rule.text.replace("{code}", &rule.code.to_string()).trim());
            out.push('\n');
        }
        out.push('\n');
        out.push_str(self.output_format.trim());
        out
    }
}

impl Default for PromptSpec {
    fn default() -> Self {
        PromptSpec::default_utaut()
    }
}

/// Rewrites any occurrence of the fence markers so the review cannot close
/// its own fence.
pub fn escape_review_text(text: &str) -> String {
    let mut out = text.to_string();
    loop {
        let next = out
            .replace(REVIEW_BEGIN, "- - - - -BEGIN REVIEW- - - - -")
            .replace(REVIEW_END, "- - - - -END REVIEW- - - - -");
        if next == out {
            return out;
        }
        out = next;
    }
}

fn fenced_review(review: &Review) -> String {
    format!(
        "Review:\n{REVIEW_BEGIN}\n{}\n{REVIEW_END}",
        escape_review_text(review.text.trim())
    )
}

/// Renders the spec and review as chat messages according to the spec's
/// placement.
pub fn render_messages(spec: &PromptSpec, review: &Review) -> Result<RenderedPrompt, PromptError> {
    if review.text.trim().is_empty() {
        return Err(PromptError::EmptyReview(review.id.clone()));
    }
    let instructions = spec.instructions();
    let fenced = fenced_review(review);
    Ok(match spec.placement {
        MessagePlacement::SystemAndUser => RenderedPrompt {
            system: Some(instructions),
            user: fenced,
        },
        MessagePlacement::UserOnly => RenderedPrompt {
            system: None,
            user: format!("{instructions}\n\n{fenced}"),
        },
    })
}

/// The full prompt as one string: instructions, then the fenced review.
pub fn render_prompt(spec: &PromptSpec, review: &Review) -> Result<String, PromptError> {
    if review.text.trim().is_empty() {
        return Err(PromptError::EmptyReview(review.id.clone()));
    }
    Ok(format!("{}\n\n{}", spec.instructions(), fenced_review(review)))
}
