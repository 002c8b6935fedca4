use std::sync::{Arc, Condvar, Mutex};
use std::time::Instant;

use super::{BuildJob, BuildReport, LeanBackend, LeanError};

struct Tickets {
    next: u64,
    serving: u64,
    running: usize,
}

/// Caps concurrent builds at `capacity`. Waiters are admitted strictly in
/// arrival order.
pub struct BuildPool {
    backend: Arc<dyn LeanBackend>,
    capacity: usize,
    state: Mutex<Tickets>,
    cv: Condvar,
}

impl BuildPool {
    pub fn new(backend: Arc<dyn LeanBackend>, capacity: usize) -> Self {
        BuildPool {
            backend,
            capacity: capacity.max(1),
            state: Mutex::new(Tickets {
                next: 0,
                serving: 0,
                running: 0,
            }),
            cv: Condvar::new(),
        }
    }

    /// Half the available cores, at least one.
    pub fn default_capacity() -> usize {
        std::thread::available_parallelism().map_or(1, |n| (n.get() / 2).max(1))
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    fn acquire(&self) {
        let mut s = self.state.lock().unwrap();
        let ticket = s.next;
        s.next += 1;
        while !(s.serving == ticket && s.running < self.capacity) {
            s = self.cv.wait(s).unwrap();
        }
        s.serving += 1;
        s.running += 1;
        self.cv.notify_all();
    }

    fn release(&self) {
        let mut s = self.state.lock().unwrap();
        s.running -= 1;
        self.cv.notify_all();
    }
}

struct Slot<'a>(&'a BuildPool);

impl Drop for Slot<'_> {
    fn drop(&mut self) {
        self.0.release();
    }
}

impl LeanBackend for BuildPool {
    fn build(&self, job: &BuildJob<'_>) -> Result<BuildReport, LeanError> {
        let queued = Instant::now();
        self.acquire();
        let _slot = Slot(self);
        let wait = queued.elapsed().as_secs_f64();
        let mut report = self.backend.build(job)?;
        report.queue_wait += wait;
        Ok(report)
    }
}
