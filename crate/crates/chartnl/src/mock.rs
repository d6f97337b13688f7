use std::collections::BTreeMap;
use std::sync::Mutex;

use chartnl_core::gateway::{ChatBackend, Completion, GatewayError, MockBackend, ModelConfig};
use chartnl_core::promptforge::{PromptTask, RenderedPrompt};

/// Offline gateway: deterministic replies plus a log of every prompt it
/// was asked to complete. Never touches the network.
#[derive(Debug, Default)]
pub struct MockGateway {
    backend: MockBackend,
    calls: Mutex<Vec<(PromptTask, String)>>,
}

impl MockGateway {
    pub fn new() -> Self {
        MockGateway::default()
    }

    /// Exact prompt text → reply; other prompts get the synthesized reply.
    pub fn with_canned(canned: BTreeMap<String, String>) -> Self {
        MockGateway {
            backend: MockBackend { canned },
            calls: Mutex::default(),
        }
    }

    pub fn calls(&self) -> Vec<(PromptTask, String)> {
        self.calls.lock().expect("call log poisoned").clone()
    }

    pub fn call_count(&self) -> usize {
        self.calls.lock().expect("call log poisoned").len()
    }
}

impl ChatBackend for MockGateway {
    fn complete(&self, prompt: &RenderedPrompt, cfg: &ModelConfig) -> Result<Completion, GatewayError> {
        self.calls
            .lock()
            .expect("call log poisoned")
            .push((prompt.task, prompt.text.clone()));
        self.backend.complete(prompt, cfg)
    }
}
