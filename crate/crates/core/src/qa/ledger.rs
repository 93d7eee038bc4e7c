//! Risk bookkeeping, gain prediction and greedy storyline selection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::cost::{CostModel, StorylineKind, Target};

/// Per-pose loss triple; also used for loss changes, where negative is better.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Losses {
    pub gen: f64,
    pub cate: f64,
    pub part: f64,
}

impl Losses {
    /// `gen + v_cate cate + v_part part`.
    pub fn weighted(&self, m: &CostModel) -> f64 {
        self.gen + m.v_cate * self.cate + m.v_part * self.part
    }

    /// Keeps only the components flagged by `mask`.
    pub fn masked(self, mask: [bool; 3]) -> Losses {
        Losses {
            gen: if mask[0] { self.gen } else { 0.0 },
            cate: if mask[1] { self.cate } else { 0.0 },
            part: if mask[2] { self.part } else { 0.0 },
        }
    }

    /// Optimistic prior: one unit of loss decrease per component the storyline targets.
    pub fn prior(kind: StorylineKind) -> Losses {
        let c = kind.components();
        Losses {
            gen: -1.0,
            cate: -1.0,
            part: -1.0,
        }
        .masked(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainRecord {
    pub kind: StorylineKind,
    pub target: Target,
    /// Realized loss change of the targeted components.
    pub delta: Losses,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskPoint {
    pub storyline: usize,
    pub risk: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RiskLedger {
    /// Current losses per pose.
    pub losses: Vec<Losses>,
    /// Current `P(PO)` per pose.
    pub probabilities: Vec<f64>,
    pub records: Vec<GainRecord>,
    /// Realized cost so far.
    pub cost: f64,
    pub trajectory: Vec<RiskPoint>,
}

impl RiskLedger {
    /// `sum_PO P(PO) (L_gen + L_cate + L_part) + Cost`.
    pub fn risk(&self, m: &CostModel) -> f64 {
        let expected: f64 = self
            .losses
            .iter()
            .zip(&self.probabilities)
            .map(|(l, p)| p * l.weighted(m))
            .sum();
        expected + self.cost
    }
}

/// Historical mean of realized loss changes for `kind` on `target`, or the prior.
pub fn predict_gains(ledger: &RiskLedger, kind: StorylineKind, target: Target) -> Losses {
    let hist: Vec<&GainRecord> = ledger
        .records
        .iter()
        .filter(|r| r.kind == kind && r.target == target)
        .collect();
    if hist.is_empty() {
        return Losses::prior(kind);
    }
    let n = hist.len() as f64;
    Losses {
        gen: hist.iter().map(|r| r.delta.gen).sum::<f64>() / n,
        cate: hist.iter().map(|r| r.delta.cate).sum::<f64>() / n,
        part: hist.iter().map(|r| r.delta.part).sum::<f64>() / n,
    }
}

/// Laplace-smoothed yes ratio `(yes + 1) / (asked + 2)` per pose, normalized to sum to one.
pub fn estimate_pose_probability(counts: &[(usize, usize)]) -> Result<Vec<f64>> {
    if counts.is_empty() {
        return Ok(Vec::new());
    }
    let mut p = Vec::with_capacity(counts.len());
    for &(yes, asked) in counts {
        if yes > asked {
            return Err(Error::Config(format!(
                "{yes} yes answers out of {asked} questions"
            )));
        }
        p.push((yes as f64 + 1.0) / (asked as f64 + 2.0));
    }
    let total: f64 = p.iter().sum();
    Ok(p.into_iter().map(|v| v / total).collect())
}

/// One entry of the candidate set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub kind: StorylineKind,
    pub target: Target,
    pub probability: f64,
    pub cost: f64,
}

/// `-P(PO) * dL / Cost` with the predicted loss change.
pub fn selection_score(ledger: &RiskLedger, c: &Candidate, m: &CostModel) -> f64 {
    let d = predict_gains(ledger, c.kind, c.target).weighted(m);
    -c.probability * d / c.cost
}

/// Index of the candidate with the largest [`selection_score`]. Ties go to the
/// lower cost, then the lower target, then the lower kind.
pub fn select_next_storyline(
    ledger: &RiskLedger,
    omega: &[Candidate],
    m: &CostModel,
) -> Result<usize> {
    if omega.is_empty() {
        return Err(Error::Empty("no candidate storylines"));
    }
    if let Some(c) = omega
        .iter()
        .find(|c| !(c.cost > 0.0 && c.cost.is_finite()) || !c.probability.is_finite())
    {
        return Err(Error::Config(format!(
            "candidate {c:?} has no positive finite cost"
        )));
    }
    let scores: Vec<f64> = omega
        .iter()
        .map(|c| selection_score(ledger, c, m))
        .collect();
    let mut best = 0;
    for i in 1..omega.len() {
        let (a, b) = (&omega[i], &omega[best]);
        let better = scores[i]
            .total_cmp(&scores[best])
            .then_with(|| b.cost.total_cmp(&a.cost))
            .then_with(|| b.target.cmp(&a.target))
            .then_with(|| b.kind.cmp(&a.kind))
            .is_gt();
        if better {
            best = i;
        }
    }
    Ok(best)
}
