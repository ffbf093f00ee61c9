//! The model gateway: token budget enforcement and retries with backoff on
//! transient provider failures.
//!
//! `cargo run -p dir-core --example gateway`

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use dir_core::llm::{estimate_tokens, Gateway, Provider, ProviderConfig, ProviderFailure, RetryPolicy};

/// Fails twice with a transient error, then answers.
#[derive(Default)]
struct Flaky {
    calls: AtomicUsize,
}

impl Provider for Flaky {
    fn complete(&self, prompt: &str, _: &ProviderConfig) -> Result<String, ProviderFailure> {
        match self.calls.fetch_add(1, Ordering::SeqCst) {
            0 | 1 => Err(ProviderFailure::Transient("503 service unavailable".into())),
            _ => Ok(format!("echo: {prompt}")),
        }
    }
}

fn main() -> dir_core::Result<()> {
    let flaky = Arc::new(Flaky::default());
    let gateway = Gateway::new(flaky.clone(), ProviderConfig::mock(16))
        .with_retry(RetryPolicy { max_retries: 3, base_backoff_ms: 10 });
    println!("{} after {} calls", gateway.complete("hello")?, flaky.calls.load(Ordering::SeqCst));

    let long = "a fairly long prompt that will not fit into sixteen tokens at four characters each";
    println!("estimate for the long prompt: {} tokens", estimate_tokens(long));
    match gateway.complete(long) {
        Err(e) => println!("refused: {e}"),
        Ok(_) => unreachable!("the budget is 16 tokens"),
    }
    Ok(())
}
