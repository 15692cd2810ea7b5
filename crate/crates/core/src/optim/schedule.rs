//! Learning-rate schedules and the sign-oscillation detector that drives the
//! event-based decay.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Constant,
    StepDecay,
    OscillationDecay,
}

impl FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(Self::Constant),
            "step_decay" => Ok(Self::StepDecay),
            "oscillation_decay" => Ok(Self::OscillationDecay),
            other => Err(Error::domain(format!("unknown schedule {other:?}"))),
        }
    }
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Constant => "constant",
            Self::StepDecay => "step_decay",
            Self::OscillationDecay => "oscillation_decay",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub kind: ScheduleKind,
    /// Divisor applied at each step-decay milestone.
    pub decay_factor: f64,
    /// Milestones as fractions of the total epoch count.
    pub milestone_fractions: Vec<f64>,
    /// Multiplier applied per oscillation event.
    pub shrink_factor: f64,
}

impl Default for LrSchedule {
    fn default() -> Self {
        Self::constant()
    }
}

impl LrSchedule {
    pub fn constant() -> Self {
        Self {
            kind: ScheduleKind::Constant,
            decay_factor: 10.0,
            milestone_fractions: vec![1.0 / 3.0, 2.0 / 3.0],
            shrink_factor: 0.5,
        }
    }

    /// Divide by 10 after one third and two thirds of training.
    pub fn step_decay() -> Self {
        Self {
            kind: ScheduleKind::StepDecay,
            ..Self::constant()
        }
    }

    pub fn oscillation_decay(shrink_factor: f64) -> Self {
        Self {
            kind: ScheduleKind::OscillationDecay,
            shrink_factor,
            ..Self::constant()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.decay_factor >= 1.0) {
            return Err(Error::domain("decay_factor must be >= 1"));
        }
        if !(self.shrink_factor > 0.0 && self.shrink_factor <= 1.0) {
            return Err(Error::domain("shrink_factor must lie in (0, 1]"));
        }
        if self
            .milestone_fractions
            .iter()
            .any(|f| !(*f > 0.0 && *f < 1.0))
        {
            return Err(Error::domain("milestone fractions must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Epoch indices at which the step-decay divisor kicks in: `⌊E·f⌋`.
    pub fn milestones(&self, total_epochs: usize) -> Vec<usize> {
        self.milestone_fractions
            .iter()
            // The nudge keeps e.g. 3·(1/3) from landing just below 1.
            .map(|f| (total_epochs as f64 * f + 1e-9).floor() as usize)
            .collect()
    }

    /// Learning rate in effect during `epoch` (0-based). `decay_events` counts
    /// the oscillation events signalled so far and is ignored by other kinds.
    pub fn lr_at(&self, base_lr: f64, epoch: usize, total_epochs: usize, decay_events: u32) -> f64 {
        match self.kind {
            ScheduleKind::Constant => base_lr,
            ScheduleKind::StepDecay => {
                let passed = self
                    .milestones(total_epochs)
                    .into_iter()
                    .filter(|&m| epoch >= m)
                    .count();
                base_lr / self.decay_factor.powi(passed as i32)
            }
            ScheduleKind::OscillationDecay => {
                base_lr * self.shrink_factor.powi(decay_events as i32)
            }
        }
    }
}

/// A schedule bound to a base rate, counting decay events as they arrive.
#[derive(Debug, Clone)]
pub struct LrScheduler {
    pub schedule: LrSchedule,
    pub base_lr: f64,
    decay_events: u32,
}

impl LrScheduler {
    pub fn new(schedule: LrSchedule, base_lr: f64) -> Self {
        Self {
            schedule,
            base_lr,
            decay_events: 0,
        }
    }

    pub fn lr_at(&self, epoch: usize, total_epochs: usize) -> f64 {
        self.schedule
            .lr_at(self.base_lr, epoch, total_epochs, self.decay_events)
    }

    pub fn signal_decay(&mut self) {
        self.decay_events += 1;
    }

    pub fn decay_events(&self) -> u32 {
        self.decay_events
    }
}

/// Fires once every coordinate of the watched sign pattern has flipped within
/// the last `window` observations, then forgets its history.
#[derive(Debug, Clone)]
pub struct OscillationDetector {
    window: usize,
    history: Vec<Vec<f64>>,
}

pub const DEFAULT_OSCILLATION_WINDOW: usize = 4;

impl Default for OscillationDetector {
    fn default() -> Self {
        Self::new(DEFAULT_OSCILLATION_WINDOW)
    }
}

impl OscillationDetector {
    pub fn new(window: usize) -> Self {
        assert!(window >= 2, "oscillation window needs at least two steps");
        Self {
            window,
            history: Vec::with_capacity(window),
        }
    }

    /// Records `sign(argument)` and reports whether an oscillation event fired.
    pub fn observe(&mut self, argument: &DenseMatrix) -> bool {
        let signs = argument.as_slice().iter().map(|&x| super::sign(x)).collect();
        self.observe_signs(signs)
    }

    pub fn observe_signs(&mut self, signs: Vec<f64>) -> bool {
        if self.history.first().is_some_and(|h| h.len() != signs.len()) {
            self.history.clear();
        }
        if self.history.len() == self.window {
            self.history.remove(0);
        }
        self.history.push(signs);
        let n = self.history[0].len();
        let all_flipped = self.history.len() >= 2
            && (0..n).all(|i| self.history.windows(2).any(|w| w[0][i] != w[1][i]));
        if all_flipped {
            self.history.clear();
        }
        all_flipped
    }

    pub fn reset(&mut self) {
        self.history.clear();
    }
}
