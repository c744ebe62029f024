use std::collections::VecDeque;
use std::sync::{Arc, Mutex};

/// An external input waiting to enter the event queue.
#[derive(Debug)]
pub struct Injected<P> {
    pub target: String,
    pub payload: P,
    /// Caller-chosen correlation id, echoed back by `Kernel::drain_inbox`.
    pub ticket: u64,
}

/// Thread-safe queue feeding the kernel from outside the event loop.
pub struct Inbox<P> {
    queue: Arc<Mutex<VecDeque<Injected<P>>>>,
}

impl<P> Clone for Inbox<P> {
    fn clone(&self) -> Self {
        Inbox {
            queue: Arc::clone(&self.queue),
        }
    }
}

impl<P> Default for Inbox<P> {
    fn default() -> Self {
        Inbox {
            queue: Arc::new(Mutex::new(VecDeque::new())),
        }
    }
}

impl<P> Inbox<P> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&self, target: impl Into<String>, payload: P, ticket: u64) {
        self.queue
            .lock()
            .expect("inbox lock poisoned")
            .push_back(Injected {
                target: target.into(),
                payload,
                ticket,
            });
    }

    pub fn len(&self) -> usize {
        self.queue.lock().expect("inbox lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub(crate) fn take_all(&self) -> Vec<Injected<P>> {
        self.queue
            .lock()
            .expect("inbox lock poisoned")
            .drain(..)
            .collect()
    }
}
