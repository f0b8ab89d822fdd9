//! Wall-clock accounting per labeled section, for measuring explanation
//! overhead against plain training.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::time::Instant;

/// Accumulates elapsed seconds per label. Scopes with the same label add
/// up; distinct labels, nested or not, are independent.
#[derive(Debug, Default)]
pub struct Stopwatch {
    totals: RefCell<BTreeMap<String, f64>>,
}

impl Stopwatch {
    pub fn new() -> Self {
        Stopwatch::default()
    }

    /// Times everything until the returned guard drops.
    #[must_use = "the scope ends when the guard drops"]
    pub fn scope(&self, label: &str) -> ScopeGuard<'_> {
        ScopeGuard {
            watch: self,
            label: label.to_string(),
            start: Instant::now(),
        }
    }

    pub fn add(&self, label: &str, seconds: f64) {
        *self.totals.borrow_mut().entry(label.to_string()).or_insert(0.0) += seconds;
    }

    /// Accumulated seconds for one label; 0 if never timed.
    pub fn seconds(&self, label: &str) -> f64 {
        self.totals.borrow().get(label).copied().unwrap_or(0.0)
    }

    pub fn totals(&self) -> BTreeMap<String, f64> {
        self.totals.borrow().clone()
    }
}

pub struct ScopeGuard<'a> {
    watch: &'a Stopwatch,
    label: String,
    start: Instant,
}

impl Drop for ScopeGuard<'_> {
    fn drop(&mut self) {
        self.watch.add(&self.label, self.start.elapsed().as_secs_f64());
    }
}
