//! Predicted trajectories of `α_t = (1/K)‖W_tᵀ𝟙‖²` under each optimizer,
//! independent of any matrix simulation.

mod lemma;
mod ode;
mod sgd;
mod sign;

use serde::Serialize;

pub use lemma::{alpha_increment_decomposition, IncrementDecomposition};
pub use ode::{ode_alpha_bound, ode_alpha_closed_form, ode_bound_constant, ode_roots, OdeRoots};
pub use sgd::{
    alpha_sgd_decoupled, char_roots, fit_rowsum_constant, rowsum_alpha, rowsum_bound_constant, rowsum_recursion_coupled,
    CharRoots,
};
pub use sign::{
    alpha_signgd_decoupled, alpha_signgd_decoupled_limit, coupled_signgd_run_with_decay,
    coupled_signgd_scalar_step, psi, CoupledDecayRun, CoupledSignState, Phase,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    SgdDecoupled,
    SgdCoupled,
    SignGdDecoupled,
    SignGdCoupled,
    Ode,
}

/// Parameters an oracle was evaluated with. Unused ones are `None`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct OracleParams {
    pub eta: Option<f64>,
    pub lambda: Option<f64>,
    pub beta: Option<f64>,
    pub k: Option<usize>,
    pub alpha0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleTrajectory {
    pub kind: OracleKind,
    pub params: OracleParams,
    /// `(t, α_t)` pairs in increasing `t`.
    pub points: Vec<(f64, f64)>,
}

impl OracleTrajectory {
    pub fn new(kind: OracleKind, params: OracleParams) -> Self {
        Self {
            kind,
            params,
            points: Vec::new(),
        }
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.points.iter().map(|&(_, a)| a).collect()
    }

    pub fn last_alpha(&self) -> Option<f64> {
        self.points.last().map(|&(_, a)| a)
    }

    /// `t,alpha_predicted` CSV with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,alpha_predicted\n");
        for (t, a) in &self.points {
            out.push_str(&format!("{t},{a}\n"));
        }
        out
    }
}

/// Closed-form trajectory for decoupled SGD over `0..=steps`.
pub fn sgd_decoupled_trajectory(alpha0: f64, eta: f64, lambda: f64, steps: u64) -> OracleTrajectory {
    let mut tr = OracleTrajectory::new(
        OracleKind::SgdDecoupled,
        OracleParams {
            eta: Some(eta),
            lambda: Some(lambda),
            alpha0: Some(alpha0),
            ..Default::default()
        },
    );
    tr.points = (0..=steps)
        .map(|t| (t as f64, alpha_sgd_decoupled(t, alpha0, eta, lambda)))
        .collect();
    tr
}

/// Row-sum recursion trajectory for coupled SGD, starting from `m₀ = W₀ᵀ𝟙`
/// of a `K`-row weight matrix.
pub fn sgd_coupled_trajectory(
    m0: &[f64],
    k: usize,
    eta: f64,
    beta: f64,
    lambda: f64,
    steps: u64,
) -> OracleTrajectory {
    let ms = rowsum_recursion_coupled(m0, eta, beta, lambda, steps as usize);
    let mut tr = OracleTrajectory::new(
        OracleKind::SgdCoupled,
        OracleParams {
            eta: Some(eta),
            lambda: Some(lambda),
            beta: Some(beta),
            k: Some(k),
            alpha0: Some(rowsum_alpha(m0, k)),
        },
    );
    tr.points = ms
        .iter()
        .enumerate()
        .map(|(t, m)| (t as f64, rowsum_alpha(m, k)))
        .collect();
    tr
}

/// Closed-form trajectory for decoupled SignGD from `W₀ = 0`.
pub fn signgd_decoupled_trajectory(
    k: usize,
    eta: f64,
    lambda: f64,
    steps: u64,
) -> crate::Result<OracleTrajectory> {
    let mut tr = OracleTrajectory::new(
        OracleKind::SignGdDecoupled,
        OracleParams {
            eta: Some(eta),
            lambda: Some(lambda),
            k: Some(k),
            alpha0: Some(0.0),
            ..Default::default()
        },
    );
    for t in 0..=steps {
        tr.points.push((t as f64, alpha_signgd_decoupled(t, k, eta, lambda)?));
    }
    Ok(tr)
}

/// Closed-form ODE solution sampled at `t = i·dt`.
pub fn ode_trajectory(
    alpha0: f64,
    lambda: f64,
    beta: f64,
    dt: f64,
    samples: u64,
) -> crate::Result<OracleTrajectory> {
    let mut tr = OracleTrajectory::new(
        OracleKind::Ode,
        OracleParams {
            lambda: Some(lambda),
            beta: Some(beta),
            alpha0: Some(alpha0),
            ..Default::default()
        },
    );
    for i in 0..=samples {
        let t = i as f64 * dt;
        tr.points.push((t, ode_alpha_closed_form(t, alpha0, lambda, beta)?));
    }
    Ok(tr)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_header_and_rows() {
        let tr = sgd_decoupled_trajectory(1.0, 0.1, 0.5, 2);
        assert_eq!(tr.to_csv().lines().count(), 4);
        assert!(tr.to_csv().starts_with("t,alpha_predicted\n0,1\n"));
    }

    #[test]
    fn coupled_trajectory_without_momentum_matches_closed_form() {
        let tr = sgd_coupled_trajectory(&[1.0, -2.0], 2, 0.1, 0.0, 0.5, 20);
        let cf = sgd_decoupled_trajectory(2.5, 0.1, 0.5, 20);
        for (a, b) in tr.alphas().iter().zip(cf.alphas()) {
            assert!((a - b).abs() <= 1e-14 * b.abs().max(1e-300));
        }
    }
}
