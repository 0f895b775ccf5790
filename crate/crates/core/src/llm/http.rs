use async_trait::async_trait;
use futures::StreamExt;
use serde_json::{json, Value};

use super::sse::SseDecoder;
use super::{Completion, CompletionDelta, CompletionRequest, DeltaSink, FinishReason, GatewayConfig, GatewayError, LlmGateway};

const BODY_EXCERPT: usize = 500;

/// Adapter for HTTP chat-completions endpoints (`POST {base}/chat/completions`).
#[derive(Debug, Clone)]
pub struct HttpGateway {
    config: GatewayConfig,
    client: reqwest::Client,
}

impl HttpGateway {
    pub fn new(config: GatewayConfig) -> Self {
        Self {
            config,
            client: reqwest::Client::new(),
        }
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    fn body(&self, req: &CompletionRequest) -> Value {
        json!({
            "model": self.config.model,
            "messages": req.messages,
            "max_tokens": req.max_output_tokens,
            "temperature": req.temperature,
            "stream": req.stream,
        })
    }

    async fn run(&self, req: &CompletionRequest, sink: &mut DeltaSink<'_>) -> Result<Completion, GatewayError> {
        let mut builder = self.client.post(self.endpoint()).json(&self.body(req));
        if let Some(key) = &self.config.api_key {
            builder = builder.bearer_auth(key);
        }
        let response = builder
            .send()
            .await
            .map_err(|e| GatewayError::ProviderUnreachable(e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            let body = response.text().await.unwrap_or_default();
            return Err(GatewayError::ProviderError {
                status: status.as_u16(),
                body: body.chars().take(BODY_EXCERPT).collect(),
            });
        }

        if !req.stream {
            let value: Value = response
                .json()
                .await
                .map_err(|e| GatewayError::ProviderError { status: status.as_u16(), body: e.to_string() })?;
            let choice = &value["choices"][0];
            let text = choice["message"]["content"].as_str().unwrap_or_default().to_string();
            let reason = finish_reason(choice["finish_reason"].as_str());
            sink(&CompletionDelta::fragment(text.clone()));
            sink(&CompletionDelta::last("", reason));
            return Ok(Completion { text, finish_reason: reason });
        }

        let mut stream = response.bytes_stream();
        let mut decoder = SseDecoder::new();
        let mut text = String::new();
        let mut reason = None;
        let mut handle = |data: &str, text: &mut String, reason: &mut Option<FinishReason>| -> bool {
            if data.trim() == "[DONE]" {
                return true;
            }
            let Ok(value) = serde_json::from_str::<Value>(data) else {
                return false;
            };
            let choice = &value["choices"][0];
            if let Some(fragment) = choice["delta"]["content"].as_str() {
                if !fragment.is_empty() {
                    sink(&CompletionDelta::fragment(fragment));
                    text.push_str(fragment);
                }
            }
            if let Some(r) = choice["finish_reason"].as_str() {
                *reason = Some(finish_reason(Some(r)));
            }
            false
        };
        'read: while let Some(chunk) = stream.next().await {
            let bytes = chunk.map_err(|e| GatewayError::ProviderUnreachable(e.to_string()))?;
            for event in decoder.push(&bytes) {
                if handle(&event.data, &mut text, &mut reason) {
                    break 'read;
                }
            }
        }
        if let Some(event) = decoder.finish() {
            handle(&event.data, &mut text, &mut reason);
        }
        let reason = reason.unwrap_or(FinishReason::Stop);
        sink(&CompletionDelta::last("", reason));
        Ok(Completion { text, finish_reason: reason })
    }
}

fn finish_reason(raw: Option<&str>) -> FinishReason {
    match raw {
        Some("length") => FinishReason::Length,
        Some("stop") | None => FinishReason::Stop,
        Some(_) => FinishReason::Stop,
    }
}

#[async_trait]
impl LlmGateway for HttpGateway {
    async fn complete(&self, req: &CompletionRequest, sink: &mut DeltaSink<'_>) -> Result<Completion, GatewayError> {
        req.validate()?;
        tokio::time::timeout(self.config.timeout, self.run(req, sink))
            .await
            .map_err(|_| GatewayError::Timeout(self.config.timeout))?
    }
}
