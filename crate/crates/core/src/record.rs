//! Per-episode metric aggregation.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::envcore::StepOutcome;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Learning episodes (for baselines: plain rollouts over the same episodes).
    Train,
    /// Greedy evaluation episodes on held-out dynamics streams.
    Eval,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Train => "train",
            Phase::Eval => "eval",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: u64,
    pub phase: Phase,
    pub exploration_prob: f64,
    pub steps: u64,
    pub mean_r_sync: f64,
    pub mean_r_place: f64,
    pub mean_r_total: f64,
    pub sum_r_total: f64,
    /// Mean per-step shortest-path detection rate.
    pub spr_detect_rate: f64,
    /// Mean per-step load-balancing capacity loss.
    pub lb_loss: f64,
    pub relocations: u64,
}

impl EpisodeRecord {
    pub fn is_finite(&self) -> bool {
        [
            self.exploration_prob,
            self.mean_r_sync,
            self.mean_r_place,
            self.mean_r_total,
            self.sum_r_total,
            self.spr_detect_rate,
            self.lb_loss,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Default)]
pub struct EpisodeStats {
    steps: u64,
    r_sync: f64,
    r_place: f64,
    r_total: f64,
    spr_rate: f64,
    lb_loss: f64,
    lb_steps: u64,
    relocations: u64,
}

impl EpisodeStats {
    pub fn push(&mut self, out: &StepOutcome) {
        self.steps += 1;
        self.r_sync += out.r_sync;
        self.r_place += out.r_place;
        self.r_total += out.r_total;
        self.spr_rate += out.metrics.spr.rate;
        if let Some(lb) = out.metrics.lb {
            self.lb_loss += lb.loss;
            self.lb_steps += 1;
        }
        if out.relocated {
            self.relocations += 1;
        }
    }

    pub fn finish(&self, episode: u64, phase: Phase, exploration_prob: f64) -> EpisodeRecord {
        let per_step = |sum: f64, n: u64| if n > 0 { sum / n as f64 } else { 0.0 };
        EpisodeRecord {
            episode,
            phase,
            exploration_prob,
            steps: self.steps,
            mean_r_sync: per_step(self.r_sync, self.steps),
            mean_r_place: per_step(self.r_place, self.steps),
            mean_r_total: per_step(self.r_total, self.steps),
            sum_r_total: self.r_total,
            spr_detect_rate: per_step(self.spr_rate, self.steps),
            lb_loss: per_step(self.lb_loss, self.lb_steps),
            relocations: self.relocations,
        }
    }
}
