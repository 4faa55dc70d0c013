//! Extraction of ratings from free-form model output.
//!
//! Each configured variable must appear on a line of the form
//! `<variable name>: <integer>`. Matching ignores case, punctuation, list
//! bullets and emphasis markers; any other prose in the response is skipped.
//! The first integer after the separator is the rating, so `4/5` and
//! `4 out of 5` both read as 4.

use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{normalize_name, AnnotationVector, Rating, MAX_SCALE_POINTS};
use crate::prompt::PromptSpec;

static LEADER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*(?:(?:[-*+•>#]+|\d{1,2}[.)])\s*)*").unwrap());
static TRAILING_PAREN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\([^()]*\)\s*$").unwrap());
static INTEGER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"-?\d+").unwrap());

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ParseIssue {
    Missing,
    Conflicting { first: String, second: String },
    OutOfRange { value: i64, line: String },
    NoInteger { line: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseDiagnostic {
    pub variable: String,
    #[serde(flatten)]
    pub issue: ParseIssue,
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = &self.variable;
        match &self.issue {
            ParseIssue::Missing => write!(f, "{v}: no rating line found"),
            ParseIssue::Conflicting { first, second } => {
                write!(f, "{v}: conflicting ratings in {first:?} and {second:?}")
            }
            ParseIssue::OutOfRange { value, line } => {
                write!(f, "{v}: rating {value} out of range in {line:?}")
            }
            ParseIssue::NoInteger { line } => write!(f, "{v}: no integer in {line:?}"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unparseable response for review {review_id:?}: {}", render(.diagnostics))]
pub struct ParseError {
    pub review_id: String,
    pub diagnostics: Vec<ParseDiagnostic>,
}

fn render(d: &[ParseDiagnostic]) -> String {
    d.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// Result of parsing one response. Variables that parsed cleanly keep their
/// rating even when others failed, so callers can salvage partial answers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseOutcome {
    pub review_id: String,
    pub raw_text: String,
    pub ratings: Vec<Option<Rating>>,
    pub diagnostics: Vec<ParseDiagnostic>,
}

impl ParseOutcome {
    pub fn is_success(&self) -> bool {
        self.diagnostics.is_empty()
    }

    /// The full vector on success.
    pub fn vector(&self, spec: &PromptSpec) -> Result<AnnotationVector, ParseError> {
        if !self.is_success() {
            return Err(ParseError {
                review_id: self.review_id.clone(),
                diagnostics: self.diagnostics.clone(),
            });
        }
        Ok(AnnotationVector::new(&self.review_id, spec.variables(), self.ratings.clone())
            .expect("one rating per variable"))
    }

    /// The vector with failed variables marked missing.
    pub fn partial_vector(&self, spec: &PromptSpec) -> AnnotationVector {
        AnnotationVector::new(&self.review_id, spec.variables(), self.ratings.clone())
            .expect("one rating per variable")
    }
}

struct Hit {
    line: String,
    value: Result<i64, ParseIssue>,
}

fn split_rating_line(line: &str) -> Option<(String, &str)> {
    let sep = line.find([':', '='])?;
    let (name, rest) = line.split_at(sep);
    let name = TRAILING_PAREN.replace(name, "");
    Some((normalize_name(&name), &rest[1..]))
}

pub fn parse_annotation_response(raw: &str, spec: &PromptSpec, review_id: &str) -> ParseOutcome {
    let variables = spec.variables();
    let keys: Vec<Vec<String>> = variables
        .iter()
        .map(|v| {
            std::iter::once(&v.name)
                .chain(&v.aliases)
                .map(|n| normalize_name(n))
                .collect()
        })
        .collect();

    let mut hits: Vec<Vec<Hit>> = (0..variables.len()).map(|_| Vec::new()).collect();
    for original in raw.lines() {
        let stripped = LEADER.replace(original, "");
        let cleaned: String = stripped.chars().filter(|c| !matches!(c, '*' | '_' | '`')).collect();
        let Some((name, value_part)) = split_rating_line(&cleaned) else {
            continue;
        };
        let Some(idx) = keys.iter().position(|k| k.contains(&name)) else {
            continue;
        };
        let line = original.trim().to_string();
        let value = match INTEGER.find(value_part) {
            None => Err(ParseIssue::NoInteger { line: line.clone() }),
            Some(m) => match m.as_str().parse::<i64>() {
                Ok(v) if spec.accepts_code(v) => Ok(v),
                Ok(v) => Err(ParseIssue::OutOfRange {
                    value: v,
                    line: line.clone(),
                }),
                Err(_) => Err(ParseIssue::OutOfRange {
                    value: i64::MAX,
                    line: line.clone(),
                }),
            },
        };
        hits[idx].push(Hit { line, value });
    }

    let mut ratings = vec![None; variables.len()];
    let mut diagnostics = Vec::new();
    for (idx, var_hits) in hits.into_iter().enumerate() {
        let variable = variables.get(idx).expect("index in range").name.clone();
        match resolve(var_hits) {
            Ok(code) => {
                ratings[idx] = Some(
                    Rating::on_scale(code, MAX_SCALE_POINTS).expect("accepted codes fit the scale"),
                )
            }
            Err(issue) => diagnostics.push(ParseDiagnostic { variable, issue }),
        }
    }
    ParseOutcome {
        review_id: review_id.to_string(),
        raw_text: raw.to_string(),
        ratings,
        diagnostics,
    }
}

fn resolve(hits: Vec<Hit>) -> Result<i64, ParseIssue> {
    let mut chosen: Option<(i64, String)> = None;
    for hit in hits {
        let value = hit.value?;
        match &chosen {
            None => chosen = Some((value, hit.line)),
            Some((v, first)) if *v != value => {
                return Err(ParseIssue::Conflicting {
                    first: first.clone(),
                    second: hit.line,
                })
            }
            Some(_) => {}
        }
    }
    chosen.map(|(v, _)| v).ok_or(ParseIssue::Missing)
}

/// Renders ratings in the format the default prompt asks for, one
/// `Name: code` line per observed rating.
pub fn format_response(vector: &AnnotationVector, spec: &PromptSpec) -> String {
    spec.variables()
        .iter()
        .zip(vector.ratings())
        .filter_map(|(v, r)| r.map(|r| format!("{}: {}\n", v.name, r)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Variable, VariableSet};

    fn spec() -> PromptSpec {
        PromptSpec::default_utaut()
    }

    fn codes(o: &ParseOutcome) -> Vec<Option<u8>> {
        o.ratings.iter().map(|r| r.map(Rating::code)).collect()
    }

    #[test]
    fn plain_format() {
        let raw = "Performance expectancy: 2\nEffort expectancy: 4\nSocial influence: 0\nFacilitating conditions: 3";
        let o = parse_annotation_response(raw, &spec(), "1");
        assert!(o.is_success());
        assert_eq!(codes(&o), vec![Some(2), Some(4), Some(0), Some(3)]);
        assert_eq!(o.vector(&spec()).unwrap().review_id, "1");
    }

    #[test]
    fn markdown_bullets_and_bold() {
        let raw = "- **Performance Expectancy:** 5\n- **Effort Expectancy:** 5\n- **Social Influence:** 0\n- **Facilitating Conditions:** 5";
        let o = parse_annotation_response(raw, &spec(), "x");
        assert_eq!(codes(&o), vec![Some(5), Some(5), Some(0), Some(5)]);
    }

    #[test]
    fn prose_and_rating_phrases() {
        let raw = "Sure! Here is my assessment of the review.\n\n1. Performance expectancy (PE): 4/5\n2. Effort expectancy: 3 out of 5\n3. Social influence: 0 - not mentioned\n4. _Facilitating conditions_ = 2\n\nNote: the review is short.";
        let o = parse_annotation_response(raw, &spec(), "x");
        assert!(o.is_success(), "{:?}", o.diagnostics);
        assert_eq!(codes(&o), vec![Some(4), Some(3), Some(0), Some(2)]);
    }

    #[test]
    fn out_of_range_names_the_variable() {
        let raw = "Performance expectancy: 7\nEffort expectancy: 4\nSocial influence: 0\nFacilitating conditions: 3";
        let o = parse_annotation_response(raw, &spec(), "x");
        assert_eq!(
            o.diagnostics,
            vec![ParseDiagnostic {
                variable: "Performance expectancy".into(),
                issue: ParseIssue::OutOfRange {
                    value: 7,
                    line: "Performance expectancy: 7".into()
                }
            }]
        );
        assert_eq!(codes(&o)[1], Some(4));
        assert!(o.vector(&spec()).is_err());
        assert_eq!(o.partial_vector(&spec()).get(0), None);
    }

    #[test]
    fn negative_and_missing_integer() {
        let raw = "Performance expectancy: -1\nEffort expectancy: n/a\nSocial influence: 0\nFacilitating conditions: 3";
        let o = parse_annotation_response(raw, &spec(), "x");
        assert!(matches!(o.diagnostics[0].issue, ParseIssue::OutOfRange { value: -1, .. }));
        assert!(matches!(o.diagnostics[1].issue, ParseIssue::NoInteger { .. }));
    }

    #[test]
    fn missing_variable() {
        let raw = "Performance expectancy: 2\nEffort expectancy: 4\nSocial influence: 0";
        let o = parse_annotation_response(raw, &spec(), "x");
        assert_eq!(
            o.diagnostics,
            vec![ParseDiagnostic {
                variable: "Facilitating conditions".into(),
                issue: ParseIssue::Missing
            }]
        );
        let err = o.vector(&spec()).unwrap_err();
        assert!(err.to_string().contains("Facilitating conditions"));
    }

    #[test]
    fn duplicates_agree_or_conflict() {
        let base = "Performance expectancy: 2\nEffort expectancy: 4\nSocial influence: 0\nFacilitating conditions: 3\n";
        let same = format!("{base}To summarise, Performance expectancy: 2");
        assert!(parse_annotation_response(&same, &spec(), "x").is_success());
        let diff = format!("{base}Performance expectancy: 3");
        let o = parse_annotation_response(&diff, &spec(), "x");
        assert_eq!(
            o.diagnostics[0].issue,
            ParseIssue::Conflicting {
                first: "Performance expectancy: 2".into(),
                second: "Performance expectancy: 3".into()
            }
        );
    }

    #[test]
    fn abbreviations_need_aliases() {
        let raw = "PE: 2\nEE: 4\nSI: 0\nFC: 3";
        assert_eq!(parse_annotation_response(raw, &spec(), "x").diagnostics.len(), 4);
        let vars = VariableSet::new(vec![Variable {
            name: "Performance expectancy".into(),
            definition: None,
            aliases: vec!["PE".into()],
        }])
        .unwrap();
        let s = spec().with_variables(vars);
        assert!(parse_annotation_response(raw, &s, "x").is_success());
    }

    #[test]
    fn no_info_code_only_when_enabled() {
        let s: PromptSpec = toml::from_str("variables = [{ name = \"Trust\" }]\nno_information = false").unwrap();
        let o = parse_annotation_response("Trust: 0", &s, "x");
        assert!(matches!(o.diagnostics[0].issue, ParseIssue::OutOfRange { value: 0, .. }));
    }

    #[test]
    fn format_then_parse() {
        let s = spec();
        let v = AnnotationVector::new(
            "r",
            s.variables(),
            vec![
                Some(Rating::new(1).unwrap()),
                Some(Rating::new(0).unwrap()),
                Some(Rating::new(5).unwrap()),
                Some(Rating::new(3).unwrap()),
            ],
        )
        .unwrap();
        let text = format_response(&v, &s);
        assert_eq!(
            text,
            "Performance expectancy: 1\nEffort expectancy: 0\nSocial influence: 5\nFacilitating conditions: 3\n"
        );
        assert_eq!(parse_annotation_response(&text, &s, "r").vector(&s).unwrap(), v);
    }
}
