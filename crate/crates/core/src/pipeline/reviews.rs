use std::path::Path;

use serde::Deserialize;

use super::{read_text, PipelineError};
use crate::model::{Review, ReviewSet};

#[derive(Deserialize)]
#[serde(untagged)]
enum Id {
    Text(String),
    Number(serde_json::Number),
}

#[derive(Deserialize)]
struct JsonReview {
    id: Id,
    text: String,
    #[serde(default)]
    source: Option<String>,
}

#[derive(Deserialize)]
struct CsvReview {
    id: String,
    text: String,
    #[serde(default)]
    source: Option<String>,
}

/// Loads reviews from a `.jsonl` file (one `{"id", "text", "source"}` object
/// per line) or otherwise from delimited text with an `id,text[,source]`
/// header.
pub fn load_reviews(path: &Path) -> Result<ReviewSet, PipelineError> {
    let text = read_text(path)?;
    let is_jsonl = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("jsonl"));
    let reviews = if is_jsonl { parse_jsonl(&text, path)? } else { parse_csv(&text, path)? };
    if reviews.is_empty() {
        return Err(PipelineError::format(path, "no reviews"));
    }
    ReviewSet::new(reviews).map_err(|e| PipelineError::format(path, e))
}

fn parse_jsonl(text: &str, path: &Path) -> Result<Vec<Review>, PipelineError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: JsonReview =
            serde_json::from_str(line).map_err(|e| PipelineError::format(path, format!("line {}: {e}", i + 1)))?;
        let id = match row.id {
            Id::Text(s) => s,
            Id::Number(n) => n.to_string(),
        };
        out.push(Review {
            id,
            text: row.text,
            source: row.source.filter(|s| !s.is_empty()),
        });
    }
    Ok(out)
}

fn parse_csv(text: &str, path: &Path) -> Result<Vec<Review>, PipelineError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::Headers).from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, row) in reader.deserialize::<CsvReview>().enumerate() {
        let row = row.map_err(|e| PipelineError::format(path, format!("record {}: {e}", i + 1)))?;
        out.push(Review {
            id: row.id.trim().to_string(),
            text: row.text,
            source: row.source.filter(|s| !s.is_empty()),
        });
    }
    Ok(out)
}
