use std::time::Instant;

use serde::Serialize;

/// Wall-clock seconds per pipeline phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct PhaseTimings {
    pub configure_s: f64,
    pub train_s: f64,
    pub evaluate_s: f64,
}

impl PhaseTimings {
    pub fn total(&self) -> f64 {
        self.configure_s + self.train_s + self.evaluate_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Configure,
    Train,
    Evaluate,
}

#[derive(Debug, Default)]
pub struct PhaseTimer {
    timings: PhaseTimings,
}

impl PhaseTimer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Runs `f`, adding its wall time to `phase`.
    pub fn time<R>(&mut self, phase: Phase, f: impl FnOnce() -> R) -> R {
        let start = Instant::now();
        let out = f();
        let secs = start.elapsed().as_secs_f64();
        let slot = match phase {
            Phase::Configure => &mut self.timings.configure_s,
            Phase::Train => &mut self.timings.train_s,
            Phase::Evaluate => &mut self.timings.evaluate_s,
        };
        *slot += secs;
        out
    }

    pub fn timings(&self) -> PhaseTimings {
        self.timings
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phases_accumulate() {
        let mut t = PhaseTimer::new();
        let v = t.time(Phase::Train, || 5);
        t.time(Phase::Train, || std::thread::sleep(std::time::Duration::from_millis(2)));
        assert_eq!(v, 5);
        let p = t.timings();
        assert!(p.train_s >= 0.002);
        assert_eq!(p.configure_s, 0.0);
        assert!((p.total() - p.train_s).abs() < 1e-15);
    }
}
