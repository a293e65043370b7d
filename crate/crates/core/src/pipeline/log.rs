use std::fmt::Write as _;

use serde_json::json;

use crate::clustering::ClusterMode;

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub step: u64,
    pub loss: f64,
    pub loss_cluster: f64,
    pub loss_label: f64,
    pub k: ClusterMode,
    pub lr: f32,
    pub elapsed_s: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventKind {
    /// Clustering before the first step.
    Initial,
    /// Re-embedding and re-clustering after a step.
    Reassign,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterEvent {
    /// Step after which the event ran (0 for the initial clustering).
    pub step: u64,
    pub k: usize,
    pub kind: EventKind,
}

/// Per-step training record of one stage.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingLog {
    pub stage: String,
    pub records: Vec<StepRecord>,
    pub events: Vec<ClusterEvent>,
    pub notes: Vec<String>,
}

fn k_json(k: ClusterMode) -> serde_json::Value {
    match k {
        ClusterMode::Clusters(k) => json!(k),
        ClusterMode::Singleton => json!("singleton"),
    }
}

impl TrainingLog {
    pub fn new(stage: &str) -> Self {
        Self {
            stage: stage.to_string(),
            ..Self::default()
        }
    }

    pub fn k_trace(&self) -> Vec<ClusterMode> {
        self.records.iter().map(|r| r.k).collect()
    }

    pub fn reassignments(&self) -> impl Iterator<Item = &ClusterEvent> {
        self.events.iter().filter(|e| e.kind == EventKind::Reassign)
    }

    /// JSON lines: notes and cluster events first, then one record every
    /// `every` steps plus the final step. Losses are per batch sums.
    pub fn to_jsonl(&self, every: u64) -> String {
        let mut out = String::new();
        for n in &self.notes {
            let _ = writeln!(out, "{}", json!({ "stage": self.stage, "note": n }));
        }
        for e in &self.events {
            let kind = match e.kind {
                EventKind::Initial => "initial_clustering",
                EventKind::Reassign => "reassign",
            };
            let _ = writeln!(out, "{}", json!({ "stage": self.stage, "event": kind, "step": e.step, "K": e.k }));
        }
        let last = self.records.last().map(|r| r.step);
        for r in &self.records {
            if r.step % every.max(1) != 0 && Some(r.step) != last && r.step != 1 {
                continue;
            }
            let line = json!({
                "step": r.step,
                "loss": r.loss,
                "loss_cluster": r.loss_cluster,
                "loss_label": r.loss_label,
                "K": k_json(r.k),
                "lr": r.lr,
                "elapsed_s": r.elapsed_s,
            });
            let _ = writeln!(out, "{line}");
        }
        out
    }
}
