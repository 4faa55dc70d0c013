//! Talking to a chat-completion endpoint, with transient failures retried.
//!
//! By default this starts a local stand-in server that rejects the first two
//! requests with HTTP 429 before answering. Pass `--live` to send one real
//! request to the endpoint configured through `OPENAI_API_KEY` instead.
//!
//! Run with `cargo run --example hosted_provider [-- --live]`.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use axum::http::StatusCode;
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};
use tam_annotate::gateway::{Gateway, ProviderConfig, ProviderKind};
use tam_annotate::model::Review;
use tam_annotate::parse::parse_annotation_response;
use tam_annotate::pipeline::draw_index;
use tam_annotate::prompt::{render_messages, PromptSpec};

async fn stand_in() -> String {
    let calls = Arc::new(AtomicUsize::new(0));
    let app = Router::new().route(
        "/v1/chat/completions",
        post(move |Json(body): Json<Value>| {
            let calls = calls.clone();
            async move {
                if calls.fetch_add(1, Ordering::SeqCst) < 2 {
                    return (StatusCode::TOO_MANY_REQUESTS, Json(json!({"error": "slow down"})));
                }
                let content = "Performance expectancy: 4\nEffort expectancy: 5\nSocial influence: 0\nFacilitating conditions: 3";
                (
                    StatusCode::OK,
                    Json(json!({
                        "id": "chatcmpl-local",
                        "model": body["model"],
                        "choices": [{"message": {"role": "assistant", "content": content}}]
                    })),
                )
            }
        }),
    );
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    format!("http://{addr}/v1")
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let live = std::env::args().any(|a| a == "--live");
    let mut cfg = ProviderConfig {
        kind: ProviderKind::HostedChat,
        temperature: 0.25,
        backoff_ms: vec![100, 200],
        ..Default::default()
    };
    if !live {
        cfg.base_url = stand_in().await;
        cfg.api_key_env = "TAM_ANNOTATE_EXAMPLE_KEY".into();
    }

    let spec = PromptSpec::default_utaut();
    let gateway = Gateway::from_config(&cfg, &spec)?;
    let review = Review::new("1", "Fast, simple, and my whole team switched to it.", None)?;
    let prompt = render_messages(&spec, &review)?;
    let result = gateway
        .complete(&tam_annotate::gateway::CompletionRequest {
            system: prompt.system,
            user: prompt.user,
            review_id: review.id.clone(),
            draw_index: draw_index(1, 0),
        })
        .await?;
    println!(
        "{} answered after {} attempts in {:?} (request {})",
        gateway.backend().endpoint(),
        result.attempt_count,
        result.latency,
        result.request_id
    );
    let parsed = parse_annotation_response(&result.raw_text, &spec, &review.id);
    println!("ratings: {:?}", parsed.partial_vector(&spec).to_map(spec.variables()));
    Ok(())
}
