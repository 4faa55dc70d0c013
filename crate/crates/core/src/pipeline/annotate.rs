use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::SystemTime;

use log::{info, warn};
use tokio::task::JoinSet;

use super::records::{write_run_records, Manifest, RawResponse, RunRecord, MANIFEST_FILE, RECORDS_FILE, RESPONSES_FILE};
use super::reviews::load_reviews;
use super::{exit, write_text, ExperimentConfig, PipelineError};
use crate::gateway::{CompletionRequest, Gateway, GatewayError, ProviderKind};
use crate::model::{AnnotationMatrix, AnnotationVector, Rating, Review, ReviewSet, Run, RunMetadata};
use crate::parse::parse_annotation_response;
use crate::prompt::{render_messages, PromptSpec, RenderedPrompt};

/// Source of record timestamps.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Clock {
    System,
    /// Always returns the given RFC 3339 text.
    Fixed(String),
}

impl Clock {
    pub const EPOCH: &'static str = "1970-01-01T00:00:00Z";

    /// Wall time for hosted providers; the epoch for the mock so that its
    /// output files are reproducible byte for byte.
    pub fn for_provider(kind: ProviderKind) -> Self {
        match kind {
            ProviderKind::HostedChat => Clock::System,
            ProviderKind::Mock => Clock::Fixed(Self::EPOCH.into()),
        }
    }

    pub fn now(&self) -> String {
        match self {
            Clock::System => humantime::format_rfc3339_millis(SystemTime::now()).to_string(),
            Clock::Fixed(s) => s.clone(),
        }
    }
}

/// Draw index for a (run, parse attempt) pair. Distinct pairs never collide
/// and the first attempt of a run does not depend on the retry limit.
pub fn draw_index(run_id: u32, attempt: u32) -> u64 {
    ((run_id as u64) << 16) | attempt as u64
}

/// Everything an annotation experiment produced.
#[derive(Clone, Debug, PartialEq)]
pub struct AnnotateOutcome {
    /// Fully annotated runs only.
    pub matrix: AnnotationMatrix,
    /// One per (run, review, variable) that was attempted to completion,
    /// ordered by run, review order, variable order.
    pub records: Vec<RunRecord>,
    pub responses: Vec<RawResponse>,
    pub manifest: Manifest,
    /// The provider failure that aborted the experiment.
    pub error: Option<GatewayError>,
}

impl AnnotateOutcome {
    /// 0 on a clean, complete experiment; 2 after a provider failure; 3 when
    /// some cells are missing.
    pub fn exit_code(&self) -> i32 {
        if self.error.is_some() {
            exit::PROVIDER
        } else if self.manifest.missing_cells > 0 {
            exit::INCOMPLETE
        } else {
            exit::SUCCESS
        }
    }
}

struct CellResult {
    run_id: u32,
    review: usize,
    started_at: String,
    finished_at: String,
    ratings: Vec<Option<Rating>>,
    responses: Vec<RawResponse>,
}

#[allow(clippy::too_many_arguments)]
async fn annotate_cell(
    gateway: Gateway,
    spec: Arc<PromptSpec>,
    prompt: Arc<RenderedPrompt>,
    review_id: String,
    review: usize,
    run_id: u32,
    retry_limit: u32,
    clock: Clock,
    abort: Arc<AtomicBool>,
) -> Result<Option<CellResult>, GatewayError> {
    let started_at = clock.now();
    let mut responses = Vec::new();
    let mut ratings = Vec::new();
    for attempt in 0..=retry_limit {
        if abort.load(Ordering::SeqCst) {
            return Ok(None);
        }
        let request = CompletionRequest {
            system: prompt.system.clone(),
            user: prompt.user.clone(),
            review_id: review_id.clone(),
            draw_index: draw_index(run_id, attempt),
        };
        let result = match gateway.complete(&request).await {
            Ok(r) => r,
            Err(e) => {
                abort.store(true, Ordering::SeqCst);
                return Err(e);
            }
        };
        let outcome = parse_annotation_response(&result.raw_text, &spec, &review_id);
        let diagnostics: Vec<String> = outcome.diagnostics.iter().map(ToString::to_string).collect();
        if !diagnostics.is_empty() {
            warn!(
                "run {run_id}, review {review_id:?}, attempt {attempt}: {}",
                diagnostics.join("; ")
            );
        }
        responses.push(RawResponse {
            run_id,
            review_id: review_id.clone(),
            attempt,
            request_id: result.request_id,
            model: result.model,
            transport_attempts: result.attempt_count,
            latency_ms: result.latency.as_millis() as u64,
            raw_text: result.raw_text,
            diagnostics,
        });
        ratings = outcome.ratings;
        if outcome.diagnostics.is_empty() {
            break;
        }
    }
    Ok(Some(CellResult {
        run_id,
        review,
        started_at,
        finished_at: clock.now(),
        ratings,
        responses,
    }))
}

/// Runs `cfg.runs` passes over `reviews` through `gateway`.
///
/// Requests run concurrently; results are ordered by run and review before
/// anything is assembled, so completion order never shows in the output. A
/// response that fails to parse is re-queried up to `cfg.parse_retry_limit`
/// times, after which its unparsed variables are recorded as missing. The
/// first provider failure cancels outstanding work; cells finished before it
/// are kept and the manifest is marked incomplete.
pub async fn annotate_reviews(
    cfg: &ExperimentConfig,
    reviews: &ReviewSet,
    gateway: &Gateway,
    clock: &Clock,
) -> Result<AnnotateOutcome, PipelineError> {
    let spec = Arc::new(cfg.prompt.clone());
    let prompts = reviews
        .iter()
        .map(|r: &Review| render_messages(&spec, r).map(Arc::new))
        .collect::<Result<Vec<_>, _>>()?;

    let abort = Arc::new(AtomicBool::new(false));
    let mut tasks = JoinSet::new();
    for run_id in 1..=cfg.runs {
        for (i, review) in reviews.iter().enumerate() {
            tasks.spawn(annotate_cell(
                gateway.clone(),
                spec.clone(),
                prompts[i].clone(),
                review.id.clone(),
                i,
                run_id,
                cfg.parse_retry_limit,
                clock.clone(),
                abort.clone(),
            ));
        }
    }

    let mut cells = Vec::new();
    let mut error = None;
    while let Some(joined) = tasks.join_next().await {
        match joined {
            Ok(Ok(Some(cell))) => cells.push(cell),
            Ok(Ok(None)) => {}
            Ok(Err(e)) => {
                if error.is_none() {
                    warn!("aborting: {e}");
                    tasks.abort_all();
                    error = Some(e);
                }
            }
            Err(e) if e.is_cancelled() => {}
            Err(e) => std::panic::resume_unwind(e.into_panic()),
        }
    }
    cells.sort_by_key(|c| (c.run_id, c.review));
    Ok(assemble(cfg, reviews, cells, error))
}

fn assemble(
    cfg: &ExperimentConfig,
    reviews: &ReviewSet,
    cells: Vec<CellResult>,
    error: Option<GatewayError>,
) -> AnnotateOutcome {
    let variables = cfg.prompt.variables();
    let review_ids = reviews.ids();
    let model = cfg.provider.model.clone();
    let temperature = cfg.provider.temperature;

    let mut records = Vec::with_capacity(cells.len() * variables.len());
    let mut responses = Vec::new();
    let mut matrix = AnnotationMatrix::new(variables.clone(), review_ids.clone());
    let mut pending: Vec<AnnotationVector> = Vec::new();
    let mut run_start: Option<String> = None;

    let mut cells = cells.into_iter().peekable();
    while let Some(cell) = cells.next() {
        responses.extend(cell.responses);
        let raw_ref = format!("{RESPONSES_FILE}:{}", responses.len());
        for (var, rating) in variables.iter().zip(&cell.ratings) {
            records.push(RunRecord {
                run_id: cell.run_id,
                review_id: review_ids[cell.review].clone(),
                variable: var.name.clone(),
                rating: *rating,
                raw_ref: raw_ref.clone(),
                started_at: cell.started_at.clone(),
                finished_at: cell.finished_at.clone(),
                model: model.clone(),
                temperature,
            });
        }
        // a run enters the matrix only if every review in it completed
        if cell.review == pending.len() {
            pending.push(
                AnnotationVector::new(&review_ids[cell.review], variables, cell.ratings)
                    .expect("parser yields one rating per variable"),
            );
            run_start = Some(match run_start {
                Some(s) if s <= cell.started_at => s,
                _ => cell.started_at,
            });
        }
        let run_ends = cells.peek().is_none_or(|next| next.run_id != cell.run_id);
        if run_ends {
            if pending.len() == review_ids.len() {
                matrix
                    .push_run(Run {
                        id: cell.run_id,
                        metadata: RunMetadata {
                            model: model.clone(),
                            temperature,
                            timestamp: run_start.take().unwrap_or_default(),
                        },
                        vectors: std::mem::take(&mut pending),
                    })
                    .expect("runs are assembled in review order");
            }
            pending.clear();
            run_start = None;
        }
    }

    let mut manifest = Manifest::new(review_ids, variables.clone(), model, temperature);
    manifest.complete = error.is_none();
    manifest.runs_requested = cfg.runs;
    manifest.runs_completed = matrix.n_runs() as u32;
    manifest.provider = cfg.provider.kind;
    manifest.seed = (cfg.provider.kind == ProviderKind::Mock).then_some(cfg.provider.seed);
    manifest.parse_retry_limit = cfg.parse_retry_limit;
    manifest.missing_cells = records.iter().filter(|r| r.rating.is_none()).count();
    manifest.error = error.as_ref().map(ToString::to_string);
    AnnotateOutcome {
        matrix,
        records,
        responses,
        manifest,
        error,
    }
}

/// Writes records, raw responses and manifest into `dir`.
pub fn persist_outcome(dir: &Path, outcome: &AnnotateOutcome) -> Result<(), PipelineError> {
    write_run_records(&dir.join(RECORDS_FILE), &outcome.records)?;
    let mut jsonl = String::new();
    for r in &outcome.responses {
        jsonl.push_str(&serde_json::to_string(r).expect("responses serialize"));
        jsonl.push('\n');
    }
    write_text(&dir.join(RESPONSES_FILE), &jsonl)?;
    outcome.manifest.write(&dir.join(MANIFEST_FILE))
}

/// Loads the reviews, runs the experiment described by `cfg` and persists it
/// under `cfg.out`. Provider failures do not make this return `Err`; they are
/// reported in [`AnnotateOutcome::error`] after the partial data is saved.
pub async fn annotate(cfg: &ExperimentConfig, clock: &Clock) -> Result<AnnotateOutcome, PipelineError> {
    cfg.validate()?;
    let reviews = load_reviews(&cfg.reviews)?;
    let gateway =
        Gateway::from_config(&cfg.provider, &cfg.prompt).map_err(|e| PipelineError::Config(e.to_string()))?;
    info!(
        "annotating {} reviews x {} runs via {}",
        reviews.len(),
        cfg.runs,
        gateway.backend().endpoint()
    );
    let outcome = annotate_reviews(cfg, &reviews, &gateway, clock).await?;
    persist_outcome(&cfg.out, &outcome)?;
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{CompletionBackend, CompletionResult, MockAnnotatorProfile, MockBackend, RateLimiter};
    use crate::pipeline::records::{load_matrix, read_run_records};
    use async_trait::async_trait;
    use std::sync::atomic::AtomicU32;
    use std::time::Duration;

    fn reviews(n: usize) -> ReviewSet {
        ReviewSet::new(
            (1..=n)
                .map(|i| Review::new(i.to_string(), format!("review number {i}"), None).unwrap())
                .collect(),
        )
        .unwrap()
    }

    fn mock_cfg(runs: u32, seed: u64) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new("unused.csv", "unused");
        cfg.runs = runs;
        cfg.provider = crate::gateway::ProviderConfig::mock(seed, 1.0);
        cfg
    }

    fn mock_gateway(cfg: &ExperimentConfig) -> Gateway {
        Gateway::from_config(&cfg.provider, &cfg.prompt).unwrap()
    }

    #[tokio::test]
    async fn shape_and_order() {
        let cfg = mock_cfg(3, 5);
        let out = annotate_reviews(&cfg, &reviews(4), &mock_gateway(&cfg), &Clock::for_provider(ProviderKind::Mock))
            .await
            .unwrap();
        assert_eq!(out.records.len(), 3 * 4 * 4);
        assert_eq!(out.matrix.n_runs(), 3);
        assert_eq!(out.responses.len(), 12);
        assert_eq!(out.exit_code(), 0);
        let keys: Vec<(u32, String)> = out.records.iter().map(|r| (r.run_id, r.review_id.clone())).collect();
        let mut sorted = keys.clone();
        sorted.sort_by_key(|(run, id)| (*run, id.parse::<u32>().unwrap()));
        assert_eq!(keys, sorted);
        assert_eq!(out.records[4].raw_ref, "responses.jsonl:2");
        assert!(out.manifest.complete);
        assert_eq!(out.manifest.seed, Some(5));
    }

    /// Answers after a delay that shrinks with the review number, so later
    /// reviews finish first.
    struct Reversed(MockBackend);

    #[async_trait]
    impl CompletionBackend for Reversed {
        fn endpoint(&self) -> String {
            self.0.endpoint()
        }
        fn model(&self) -> &str {
            self.0.model()
        }
        fn temperature(&self) -> f64 {
            self.0.temperature()
        }
        async fn complete(&self, r: &CompletionRequest) -> Result<CompletionResult, GatewayError> {
            let n: u64 = r.review_id.parse().unwrap();
            tokio::time::sleep(Duration::from_millis(50 - n * 5)).await;
            self.0.complete(r).await
        }
    }

    #[tokio::test(start_paused = true)]
    async fn completion_order_does_not_matter() {
        let cfg = mock_cfg(2, 9);
        let set = reviews(6);
        let clock = Clock::for_provider(ProviderKind::Mock);
        let plain = annotate_reviews(&cfg, &set, &mock_gateway(&cfg), &clock).await.unwrap();
        let backend = MockBackend::new(
            MockAnnotatorProfile::synthetic(9, 1.0),
            cfg.prompt.clone(),
            cfg.provider.model.clone(),
            1.0,
        );
        let shuffled_gateway = Gateway::new(Arc::new(Reversed(backend)), RateLimiter::unpaced(16));
        let shuffled = annotate_reviews(&cfg, &set, &shuffled_gateway, &clock).await.unwrap();
        assert_eq!(plain, shuffled);
    }

    /// Replies with garbage for the first `bad` attempts of every cell.
    struct Flaky {
        inner: MockBackend,
        bad: u64,
        calls: AtomicU32,
    }

    #[async_trait]
    impl CompletionBackend for Flaky {
        fn endpoint(&self) -> String {
            "flaky://".into()
        }
        fn model(&self) -> &str {
            "flaky"
        }
        fn temperature(&self) -> f64 {
            1.0
        }
        async fn complete(&self, r: &CompletionRequest) -> Result<CompletionResult, GatewayError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            let mut res = self.inner.complete(r).await?;
            if (r.draw_index & 0xffff) < self.bad {
                res.raw_text = "I would rather not say.".into();
            }
            Ok(res)
        }
    }

    fn flaky(bad: u64) -> Arc<Flaky> {
        Arc::new(Flaky {
            inner: MockBackend::new(
                MockAnnotatorProfile::synthetic(1, 1.0),
                PromptSpec::default_utaut(),
                "m".into(),
                1.0,
            ),
            bad,
            calls: AtomicU32::new(0),
        })
    }

    #[tokio::test]
    async fn parse_failures_are_retried_then_missing() {
        let cfg = mock_cfg(1, 1);
        let clock = Clock::Fixed("t".into());

        let backend = flaky(2);
        let gw = Gateway::new(backend.clone(), RateLimiter::unpaced(4));
        let out = annotate_reviews(&cfg, &reviews(2), &gw, &clock).await.unwrap();
        assert_eq!(backend.calls.load(Ordering::SeqCst), 6);
        assert_eq!(out.manifest.missing_cells, 0);
        assert_eq!(out.responses.len(), 6);
        assert_eq!(out.records[0].raw_ref, "responses.jsonl:3");

        let backend = flaky(3);
        let gw = Gateway::new(backend.clone(), RateLimiter::unpaced(4));
        let out = annotate_reviews(&cfg, &reviews(2), &gw, &clock).await.unwrap();
        assert_eq!(backend.calls.load(Ordering::SeqCst), 6);
        assert_eq!(out.manifest.missing_cells, 8);
        assert!(out.records.iter().all(|r| r.rating.is_none()));
        assert_eq!(out.matrix.n_runs(), 1);
        assert_eq!(out.exit_code(), 3);
    }

    struct Denied;

    #[async_trait]
    impl CompletionBackend for Denied {
        fn endpoint(&self) -> String {
            "https://example.invalid/v1/chat/completions".into()
        }
        fn model(&self) -> &str {
            "m"
        }
        fn temperature(&self) -> f64 {
            1.0
        }
        async fn complete(&self, _: &CompletionRequest) -> Result<CompletionResult, GatewayError> {
            Err(GatewayError::Auth {
                status: 401,
                endpoint: self.endpoint(),
            })
        }
    }

    #[tokio::test]
    async fn auth_failure_aborts_with_nothing_recorded() {
        let cfg = mock_cfg(5, 1);
        let gw = Gateway::new(Arc::new(Denied), RateLimiter::unpaced(2));
        let out = annotate_reviews(&cfg, &reviews(3), &gw, &Clock::System).await.unwrap();
        assert!(out.records.is_empty());
        assert_eq!(out.exit_code(), 2);
        assert!(!out.manifest.complete);
        assert!(out.manifest.error.as_deref().unwrap().contains("example.invalid"));
        assert!(gw.request_count() < 15);
    }

    #[tokio::test]
    async fn persisted_output_reloads() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = mock_cfg(2, 3);
        let out = annotate_reviews(&cfg, &reviews(3), &mock_gateway(&cfg), &Clock::Fixed(Clock::EPOCH.into()))
            .await
            .unwrap();
        persist_outcome(dir.path(), &out).unwrap();
        assert_eq!(read_run_records(&dir.path().join(RECORDS_FILE)).unwrap(), out.records);
        assert_eq!(load_matrix(dir.path()).unwrap(), out.matrix);
        let lines = std::fs::read_to_string(dir.path().join(RESPONSES_FILE)).unwrap();
        assert_eq!(lines.lines().count(), 6);
    }

    #[test]
    fn draw_indices_are_distinct() {
        assert_ne!(draw_index(1, 0), draw_index(0, 1));
        assert_eq!(draw_index(2, 0) & 0xffff, 0);
        assert_eq!(draw_index(2, 5) >> 16, 2);
    }
}
