//! Optimizers with explicit weight-decay placement.
//!
//! "Coupled" weight decay adds `λW` to the gradient before the optimizer sees
//! it; "decoupled" decay shrinks the weights directly. The split matters for
//! every sign-based method and for momentum, which is the whole point of
//! keeping both forms side by side.

mod rules;
mod schedule;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::DenseMatrix;

pub use rules::{
    sign, step_adam_family, step_sgd_coupled, step_sgd_decoupled, step_signgd_coupled,
    step_signgd_decoupled, step_signum, AdamParams, OptimizerState,
};
pub use schedule::{
    LrSchedule, LrScheduler, OscillationDetector, ScheduleKind, DEFAULT_OSCILLATION_WINDOW,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    SgdCoupled,
    SgdDecoupled,
    SignGdCoupled,
    SignGdDecoupled,
    Signum,
    SignumW,
    Adam,
    AdamW,
    AdamInterpolated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coupling {
    Coupled,
    Decoupled,
    Both,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 9] = [
        Self::SgdCoupled,
        Self::SgdDecoupled,
        Self::SignGdCoupled,
        Self::SignGdDecoupled,
        Self::Signum,
        Self::SignumW,
        Self::Adam,
        Self::AdamW,
        Self::AdamInterpolated,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::SgdCoupled => "sgd_coupled",
            Self::SgdDecoupled => "sgd_decoupled",
            Self::SignGdCoupled => "signgd_coupled",
            Self::SignGdDecoupled => "signgd_decoupled",
            Self::Signum => "signum",
            Self::SignumW => "signum_w",
            Self::Adam => "adam",
            Self::AdamW => "adam_w",
            Self::AdamInterpolated => "adam_interpolated",
        }
    }

    pub fn coupling(self) -> Coupling {
        match self {
            Self::SgdCoupled | Self::SignGdCoupled | Self::Signum | Self::Adam => Coupling::Coupled,
            Self::SgdDecoupled | Self::SignGdDecoupled | Self::SignumW | Self::AdamW => {
                Coupling::Decoupled
            }
            Self::AdamInterpolated => Coupling::Both,
        }
    }

    pub fn is_adam(self) -> bool {
        matches!(self, Self::Adam | Self::AdamW | Self::AdamInterpolated)
    }

    pub fn is_sign_based(self) -> bool {
        matches!(
            self,
            Self::SignGdCoupled | Self::SignGdDecoupled | Self::Signum | Self::SignumW
        )
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::domain(format!("unknown optimizer kind {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    /// `β` for SGD/Signum, `β₁` for the Adam family.
    pub momentum: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub coupled_wd: f64,
    pub decoupled_wd: f64,
    pub schedule: LrSchedule,
}

impl OptimizerConfig {
    /// Puts `weight_decay` in the slot the kind uses. For `adam_interpolated`
    /// it is split evenly; use [`OptimizerConfig::interpolated`] to choose.
    pub fn new(kind: OptimizerKind, learning_rate: f64, weight_decay: f64) -> Self {
        let (coupled_wd, decoupled_wd) = match kind.coupling() {
            Coupling::Coupled => (weight_decay, 0.0),
            Coupling::Decoupled => (0.0, weight_decay),
            Coupling::Both => (weight_decay / 2.0, weight_decay / 2.0),
        };
        let momentum = if kind.is_adam() { 0.9 } else { 0.0 };
        let (beta2, epsilon) = if kind.is_adam() { (0.999, 1e-8) } else { (0.0, 0.0) };
        Self {
            kind,
            learning_rate,
            momentum,
            beta2,
            epsilon,
            coupled_wd,
            decoupled_wd,
            schedule: LrSchedule::constant(),
        }
    }

    /// Adam with `coupled_fraction` of `total_wd` applied to the gradient and
    /// the rest applied to the weights.
    pub fn interpolated(learning_rate: f64, total_wd: f64, coupled_fraction: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&coupled_fraction) {
            return Err(Error::domain("coupled_fraction must lie in [0, 1]"));
        }
        let mut cfg = Self::new(OptimizerKind::AdamInterpolated, learning_rate, 0.0);
        cfg.coupled_wd = total_wd * coupled_fraction;
        cfg.decoupled_wd = total_wd - cfg.coupled_wd;
        Ok(cfg)
    }

    pub fn with_momentum(mut self, momentum: f64) -> Self {
        self.momentum = momentum;
        self
    }

    pub fn with_schedule(mut self, schedule: LrSchedule) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn total_weight_decay(&self) -> f64 {
        self.coupled_wd + self.decoupled_wd
    }

    pub fn validate(&self) -> Result<()> {
        let name = self.kind.name();
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::domain(format!("{name}: learning rate must be positive")));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::domain(format!("{name}: momentum must lie in [0, 1)")));
        }
        if !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::domain(format!("{name}: beta2 must lie in [0, 1)")));
        }
        if !(self.epsilon >= 0.0) || !(self.coupled_wd >= 0.0) || !(self.decoupled_wd >= 0.0) {
            return Err(Error::domain(format!(
                "{name}: epsilon and weight decays must be non-negative"
            )));
        }
        match self.kind.coupling() {
            Coupling::Coupled if self.decoupled_wd != 0.0 => {
                return Err(Error::domain(format!("{name} takes no decoupled weight decay")))
            }
            Coupling::Decoupled if self.coupled_wd != 0.0 => {
                return Err(Error::domain(format!("{name} takes no coupled weight decay")))
            }
            _ => {}
        }
        if self.kind.is_adam() && self.epsilon == 0.0 && self.beta2 != 0.0 {
            return Err(Error::domain(format!(
                "{name}: epsilon = 0 is only allowed in the beta2 = 0 sign limit"
            )));
        }
        self.schedule.validate()
    }

    /// Messages for hyperparameters outside the ranges where the NC0 decay
    /// guarantees hold. These are advisory.
    pub fn stability_warnings(&self) -> Vec<String> {
        let eta = self.learning_rate;
        let mut out = Vec::new();
        match self.kind {
            OptimizerKind::SgdDecoupled => {
                let x = eta * self.decoupled_wd;
                if x >= 2.0 {
                    out.push(format!("sgd_decoupled: eta*lambda = {x} >= 2, row sums will not decay"));
                }
            }
            OptimizerKind::SgdCoupled => {
                let x = eta * self.coupled_wd;
                let bound = 2.0 * (1.0 + self.momentum);
                if x >= bound {
                    out.push(format!(
                        "sgd_coupled: eta*lambda = {x} >= 2(1+beta) = {bound}, row sums will not decay"
                    ));
                }
            }
            OptimizerKind::SignGdDecoupled | OptimizerKind::SignumW => {
                let x = eta * self.decoupled_wd;
                if x >= 1.0 {
                    out.push(format!("{}: eta*lambda = {x} >= 1", self.kind));
                }
            }
            _ => {}
        }
        out
    }
}

/// Steps an ordered list of parameters with one configuration.
#[derive(Debug, Clone)]
pub struct Optimizer {
    config: OptimizerConfig,
    states: Vec<OptimizerState>,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig, params: &[&DenseMatrix]) -> Result<Self> {
        config.validate()?;
        for w in config.stability_warnings() {
            log::warn!("{w}");
        }
        let states = params.iter().map(|p| OptimizerState::for_param(p)).collect();
        Ok(Self { config, states })
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn states(&self) -> &[OptimizerState] {
        &self.states
    }

    /// One update of every parameter at learning rate `lr`.
    pub fn step(&mut self, lr: f64, params: &mut [&mut DenseMatrix], grads: &[&DenseMatrix]) -> Result<()> {
        if params.len() != self.states.len() || grads.len() != self.states.len() {
            return Err(Error::shape(
                "Optimizer::step",
                format!(
                    "{} states, {} params, {} grads",
                    self.states.len(),
                    params.len(),
                    grads.len()
                ),
            ));
        }
        let c = &self.config;
        for ((p, g), s) in params.iter_mut().zip(grads).zip(&mut self.states) {
            match c.kind {
                OptimizerKind::SgdCoupled => step_sgd_coupled(p, g, s, lr, c.momentum, c.coupled_wd)?,
                OptimizerKind::SgdDecoupled => {
                    step_sgd_decoupled(p, g, s, lr, c.momentum, c.decoupled_wd)?
                }
                OptimizerKind::SignGdCoupled => {
                    step_signgd_coupled(p, g, lr, c.coupled_wd)?;
                    s.step += 1;
                }
                OptimizerKind::SignGdDecoupled => {
                    step_signgd_decoupled(p, g, lr, c.decoupled_wd)?;
                    s.step += 1;
                }
                OptimizerKind::Signum => step_signum(p, g, s, lr, c.momentum, c.coupled_wd, true)?,
                OptimizerKind::SignumW => {
                    step_signum(p, g, s, lr, c.momentum, c.decoupled_wd, false)?
                }
                OptimizerKind::Adam | OptimizerKind::AdamW | OptimizerKind::AdamInterpolated => {
                    let hp = AdamParams {
                        lr,
                        beta1: c.momentum,
                        beta2: c.beta2,
                        eps: c.epsilon,
                        coupled_wd: c.coupled_wd,
                        decoupled_wd: c.decoupled_wd,
                    };
                    step_adam_family(p, g, s, &hp)?
                }
            }
        }
        Ok(())
    }

    /// The quantity whose sign a sign-based step follows for parameter `i`:
    /// `g + λ_c W`, or the momentum buffer for Signum kinds.
    pub fn sign_argument(&self, index: usize, param: &DenseMatrix, grad: &DenseMatrix) -> Result<DenseMatrix> {
        match self.config.kind {
            OptimizerKind::Signum | OptimizerKind::SignumW => Ok(self.states[index].momentum.clone()),
            _ => grad.add(&param.scale(self.config.coupled_wd)),
        }
    }
}
