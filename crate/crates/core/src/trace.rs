//! Per-block iteration records shared by both optimizers.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::conic::Status;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    Init,
    Beamforming,
    Location,
    Ris,
    Scheduling,
    Power,
    Trajectory,
    PassivePhase,
    Active,
    /// Final re-evaluation on the rounded schedule.
    Rounded,
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Block::Init => "init",
            Block::Beamforming => "beamforming",
            Block::Location => "location",
            Block::Ris => "ris",
            Block::Scheduling => "scheduling",
            Block::Power => "power",
            Block::Trajectory => "trajectory",
            Block::PassivePhase => "passive_phase",
            Block::Active => "active",
            Block::Rounded => "rounded",
        };
        f.write_str(s)
    }
}

/// What happened to one block update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// The candidate was kept.
    Accepted,
    /// The solver was fine but the true objective would have dropped, or
    /// the candidate violated a constraint; the previous block was kept.
    Rejected,
    /// The solver did not return an optimal point; the previous block was kept.
    Failed(Status),
    /// Nothing to optimize (e.g. no active elements).
    Skipped,
}

impl Outcome {
    pub fn is_failure(self) -> bool {
        matches!(self, Outcome::Failed(_))
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Accepted => f.write_str("accepted"),
            Outcome::Rejected => f.write_str("rejected"),
            Outcome::Failed(s) => write!(f, "failed_{s}"),
            Outcome::Skipped => f.write_str("skipped"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub tau_nats: f64,
    pub block: Block,
    pub status: Outcome,
    pub residual: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    IterationCap,
    /// Every block failed in one outer iteration.
    Breakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub rows: Vec<TraceRow>,
    /// Objective after initialization (index 0) and after each outer iteration.
    pub taus: Vec<f64>,
    pub termination: Termination,
}

impl IterationTrace {
    pub fn new() -> Self {
        IterationTrace {
            rows: Vec::new(),
            taus: Vec::new(),
            termination: Termination::IterationCap,
        }
    }

    pub fn iterations(&self) -> usize {
        self.taus.len().saturating_sub(1)
    }

    /// Most negative change between consecutive outer iterations.
    pub fn worst_decrease(&self) -> f64 {
        self.taus
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::min)
    }

    pub fn is_monotone(&self, tol: f64) -> bool {
        self.worst_decrease() >= -tol
    }

    /// Largest residual recorded for any accepted block.
    pub fn worst_residual(&self) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.status == Outcome::Accepted)
            .map(|r| r.residual)
            .fold(0.0, f64::max)
    }
}

impl Default for IterationTrace {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monotonicity() {
        let mut t = IterationTrace::new();
        t.taus = vec![0.1, 0.2, 0.2, 0.3];
        assert!(t.is_monotone(1e-6));
        assert_eq!(t.iterations(), 3);
        t.taus.push(0.29);
        assert!(!t.is_monotone(1e-6));
        assert!((t.worst_decrease() + 0.01).abs() < 1e-12);
    }

    #[test]
    fn labels() {
        assert_eq!(Outcome::Failed(Status::Infeasible).to_string(), "failed_infeasible");
        assert_eq!(Block::PassivePhase.to_string(), "passive_phase");
    }
}
