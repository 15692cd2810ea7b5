//! SignGD on the unconstrained feature model with `H = M*`, `P = N = K` and
//! `W₀ = 0`.
//!
//! Decoupled decay keeps `W_t = w_t(J − 2I)`; coupled decay keeps
//! `W_t = (a_t + b_t)I − b_tJ`. Both reduce the matrix dynamics to scalars.

use serde::Serialize;

use super::{OracleKind, OracleParams, OracleTrajectory};
use crate::error::{Error, Result};
use crate::optim::{sign, OscillationDetector, DEFAULT_OSCILLATION_WINDOW};

/// `α_t = ((K−2)²/λ²)·[1 − (1 − ηλ)ᵗ]²`.
pub fn alpha_signgd_decoupled(t: u64, k: usize, eta: f64, lambda: f64) -> Result<f64> {
    let w = signgd_decoupled_weight(t, eta, lambda)?;
    let km2 = k as f64 - 2.0;
    Ok(km2 * km2 * w * w)
}

/// `w_t = −(1/λ)[1 − (1 − ηλ)ᵗ]`, the common off-pattern scale of `W_t`.
fn signgd_decoupled_weight(t: u64, eta: f64, lambda: f64) -> Result<f64> {
    if lambda == 0.0 {
        return Err(Error::domain("decoupled SignGD oracle needs lambda > 0"));
    }
    Ok(-(1.0 - (1.0 - eta * lambda).powi(t as i32)) / lambda)
}

/// `(K−2)²/λ²`.
pub fn alpha_signgd_decoupled_limit(k: usize, lambda: f64) -> Result<f64> {
    if lambda == 0.0 {
        return Err(Error::domain("decoupled SignGD limit needs lambda > 0"));
    }
    let km2 = k as f64 - 2.0;
    Ok(km2 * km2 / (lambda * lambda))
}

/// `ψ = (1/(N√(K−1)))·1/(e^{(a+b)/√(K−1)} + K − 1)`: the off-diagonal entry of
/// the cross-entropy gradient when `W = (a+b)I − bJ` and `H = M*`.
pub fn psi(a: f64, b: f64, k: usize, n: usize) -> f64 {
    let s = ((k - 1) as f64).sqrt();
    1.0 / (n as f64 * s) / (((a + b) / s).exp() + (k - 1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Phase {
    /// Both coefficients still growing.
    Growth = 1,
    /// `b` has started to oscillate.
    Settling = 2,
    /// Both oscillate.
    Oscillating = 3,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoupledSignState {
    pub t: u64,
    pub a: f64,
    pub b: f64,
    /// `ψ` at the current `(a, b)`.
    pub psi: f64,
    /// Highest phase reached so far.
    pub phase: Phase,
    pub eta: f64,
    /// Signs used by the most recent step, `(a, b)`.
    pub last_signs: Option<(f64, f64)>,
}

impl CoupledSignState {
    pub fn initial(k: usize, n: usize, eta: f64) -> Self {
        Self {
            t: 0,
            a: 0.0,
            b: 0.0,
            psi: psi(0.0, 0.0, k, n),
            phase: Phase::Growth,
            eta,
            last_signs: None,
        }
    }

    /// `α = (a − (K−1)b)²`.
    pub fn alpha(&self, k: usize) -> f64 {
        let d = self.a - (k - 1) as f64 * self.b;
        d * d
    }

    /// Sign arguments `((K−1)ψ − λa, ψ − λb)`.
    pub fn arguments(&self, k: usize, lambda: f64) -> (f64, f64) {
        ((k - 1) as f64 * self.psi - lambda * self.a, self.psi - lambda * self.b)
    }

    /// Diagonal `a` and off-diagonal `−b` of `W = (a+b)I − bJ`.
    pub fn weight_entries(&self) -> (f64, f64) {
        (self.a, -self.b)
    }
}

/// `a ← a + η·sign((K−1)ψ − λa)`, `b ← b + η·sign(ψ − λb)`.
pub fn coupled_signgd_scalar_step(
    state: &CoupledSignState,
    k: usize,
    n: usize,
    lambda: f64,
) -> CoupledSignState {
    let (arg_a, arg_b) = state.arguments(k, lambda);
    let (sa, sb) = (sign(arg_a), sign(arg_b));
    let a = state.a + state.eta * sa;
    let b = state.b + state.eta * sb;
    let (flip_a, flip_b) = match state.last_signs {
        Some((pa, pb)) => (pa != sa, pb != sb),
        None => (false, false),
    };
    let now = if flip_a && flip_b {
        Phase::Oscillating
    } else if flip_b {
        Phase::Settling
    } else {
        Phase::Growth
    };
    CoupledSignState {
        t: state.t + 1,
        a,
        b,
        psi: psi(a, b, k, n),
        phase: state.phase.max(now),
        eta: state.eta,
        last_signs: Some((sa, sb)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoupledDecayRun {
    pub trajectory: OracleTrajectory,
    pub peak_alpha: f64,
    pub peak_step: u64,
    pub decay_events: u32,
    pub final_state: CoupledSignState,
    /// Learning rate before each step, aligned with `trajectory.points[1..]`.
    pub etas: Vec<f64>,
}

/// Runs the scalar recursion, multiplying `η` by `shrink` every time both
/// sign arguments have flipped within the detector window. Stops once every
/// `α` in the trailing window is at most `tol·α_peak`.
pub fn coupled_signgd_run_with_decay(
    k: usize,
    n: usize,
    eta0: f64,
    lambda: f64,
    shrink: f64,
    tol: f64,
    max_steps: usize,
) -> Result<CoupledDecayRun> {
    if k < 2 || n == 0 {
        return Err(Error::domain("need K >= 2 and N >= 1"));
    }
    if !(shrink > 0.0 && shrink < 1.0) || !(tol > 0.0) || !(eta0 > 0.0) || !(lambda > 0.0) {
        return Err(Error::domain(
            "need shrink in (0, 1) and positive tol, eta0, lambda",
        ));
    }
    let window = DEFAULT_OSCILLATION_WINDOW;
    let mut detector = OscillationDetector::new(window);
    let mut state = CoupledSignState::initial(k, n, eta0);
    let mut tr = OracleTrajectory::new(
        OracleKind::SignGdCoupled,
        OracleParams {
            eta: Some(eta0),
            lambda: Some(lambda),
            k: Some(k),
            alpha0: Some(0.0),
            ..Default::default()
        },
    );
    tr.points.push((0.0, 0.0));
    let (mut peak, mut peak_step, mut events) = (0.0_f64, 0_u64, 0_u32);
    let mut etas = Vec::new();

    for _ in 0..max_steps {
        etas.push(state.eta);
        state = coupled_signgd_scalar_step(&state, k, n, lambda);
        let alpha = state.alpha(k);
        tr.points.push((state.t as f64, alpha));
        if alpha > peak {
            peak = alpha;
            peak_step = state.t;
        }
        let (sa, sb) = state.last_signs.expect("set by step");
        if detector.observe_signs(vec![sa, sb]) {
            state.eta *= shrink;
            events += 1;
        }
        let recent = &tr.points[tr.points.len().saturating_sub(window)..];
        if peak > 0.0
            && tr.points.len() > window
            && recent.iter().all(|&(_, a)| a <= tol * peak)
        {
            return Ok(CoupledDecayRun {
                trajectory: tr,
                peak_alpha: peak,
                peak_step,
                decay_events: events,
                final_state: state,
                etas,
            });
        }
    }
    Err(Error::Timeout {
        budget: max_steps,
        partial: Box::new(tr),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decoupled_values() {
        assert_eq!(alpha_signgd_decoupled(0, 10, 0.1, 0.5).unwrap(), 0.0);
        assert!((alpha_signgd_decoupled(1, 10, 0.1, 0.5).unwrap() - 0.64).abs() < 1e-13);
        assert_eq!(alpha_signgd_decoupled_limit(10, 0.5).unwrap(), 256.0);
        assert!(matches!(alpha_signgd_decoupled(3, 10, 0.1, 0.0), Err(Error::Domain(_))));
        assert!(alpha_signgd_decoupled_limit(4, 0.0).is_err());
    }

    #[test]
    fn decoupled_is_increasing() {
        let v: Vec<f64> = (0..200)
            .map(|t| alpha_signgd_decoupled(t, 6, 0.1, 0.5).unwrap())
            .collect();
        assert!(v.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn psi_at_origin() {
        let expected = 1.0 / (16.0 * 3f64.sqrt());
        assert!((psi(0.0, 0.0, 4, 4) - expected).abs() < 1e-16);
        assert!((expected - 0.036_084_4).abs() < 1e-7);
    }

    #[test]
    fn first_step_is_eta() {
        let s = coupled_signgd_scalar_step(&CoupledSignState::initial(10, 10, 0.1), 10, 10, 0.5);
        assert_eq!((s.a, s.b), (0.1, 0.1));
        assert_eq!(s.phase, Phase::Growth);
        assert!((s.alpha(10) - 0.64).abs() < 1e-14);
    }

    #[test]
    fn decay_run_rises_then_falls() {
        let run = coupled_signgd_run_with_decay(4, 4, 0.05, 0.5, 0.5, 1e-6, 100_000).unwrap();
        let alphas = run.trajectory.alphas();
        let last = *alphas.last().unwrap();
        assert!(last < 1e-6 * run.peak_alpha);
        assert!(run.peak_step > 0 && (run.peak_step as usize) < alphas.len() - 1);
        assert!(run.decay_events > 0);
        assert_eq!(run.final_state.phase, Phase::Oscillating);
    }

    #[test]
    fn tiny_budget_times_out_with_partial() {
        match coupled_signgd_run_with_decay(4, 4, 0.05, 0.5, 0.5, 1e-6, 3) {
            Err(Error::Timeout { budget, partial }) => {
                assert_eq!(budget, 3);
                assert_eq!(partial.points.len(), 4);
            }
            other => panic!("expected timeout, got {other:?}"),
        }
    }

    #[test]
    fn bad_parameters() {
        assert!(coupled_signgd_run_with_decay(4, 4, 0.05, 0.5, 1.0, 1e-6, 10).is_err());
        assert!(coupled_signgd_run_with_decay(4, 4, 0.05, 0.5, 0.5, 0.0, 10).is_err());
    }
}
