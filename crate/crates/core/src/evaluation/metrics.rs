use serde::{Deserialize, Serialize};
use tracing::debug;

use super::direction::{ClassScores, Direction, DIRECTIONS};
use crate::{Error, Result};

/// Counts indexed `[truth][prediction]` in Increase, Stable, Decrease order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[usize; 3]; 3],
}

impl ConfusionMatrix {
    pub fn from_labels(predicted: &[Direction], truth: &[Direction]) -> Self {
        let mut m = Self::default();
        for (p, t) in predicted.iter().zip(truth) {
            m.counts[t.index()][p.index()] += 1;
        }
        m
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> usize {
        (0..3).map(|i| self.counts[i][i]).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// True instances of the class.
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelMetrics {
    pub confusion: ConfusionMatrix,
    pub increase: ClassMetrics,
    pub stable: ClassMetrics,
    pub decrease: ClassMetrics,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
    pub total: usize,
}

impl LabelMetrics {
    pub fn class(&self, d: Direction) -> &ClassMetrics {
        match d {
            Direction::Increase => &self.increase,
            Direction::Stable => &self.stable,
            Direction::Decrease => &self.decrease,
        }
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-class and macro precision, recall and F1 plus accuracy. Empty
/// denominators give 0; macro values average all three classes.
pub fn compute_metrics(predicted: &[Direction], truth: &[Direction]) -> Result<LabelMetrics> {
    if predicted.len() != truth.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} truth labels",
            predicted.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::invalid("no scored days"));
    }
    let confusion = ConfusionMatrix::from_labels(predicted, truth);
    let c = &confusion.counts;
    let class = |k: usize| {
        let tp = c[k][k];
        let predicted_k: usize = (0..3).map(|t| c[t][k]).sum();
        let support: usize = c[k].iter().sum();
        let precision = ratio(tp, predicted_k);
        let recall = ratio(tp, support);
        // 2PR/(P+R) as one division of counts, so F1 rounds only once.
        let f1 = ratio(2 * tp, predicted_k + support);
        ClassMetrics {
            precision,
            recall,
            f1,
            support,
        }
    };
    let per: Vec<ClassMetrics> = (0..3).map(class).collect();
    let mean = |f: fn(&ClassMetrics) -> f64| per.iter().map(f).sum::<f64>() / 3.0;
    Ok(LabelMetrics {
        confusion,
        increase: per[0],
        stable: per[1],
        decrease: per[2],
        macro_precision: mean(|m| m.precision),
        macro_recall: mean(|m| m.recall),
        macro_f1: mean(|m| m.f1),
        accuracy: ratio(confusion.trace(), confusion.total()),
        total: confusion.total(),
    })
}

/// Rank-based AUC (Mann-Whitney U with midranks); `None` when either class
/// is absent.
pub fn binary_auc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Ranks i+1..=j+1 share their average.
        let midrank = (i + j + 2) as f64 / 2.0;
        rank_sum += midrank * order[i..=j].iter().filter(|&&k| positive[k]).count() as f64;
        i = j + 1;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos * n_neg) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AucReport {
    /// Mean over the classes that had both positives and negatives.
    pub macro_auc: f64,
    pub increase: Option<f64>,
    pub stable: Option<f64>,
    pub decrease: Option<f64>,
}

/// One-vs-rest AUC per class using that class's probability as the score.
pub fn auc_ovr(scores: &[ClassScores], truth: &[Direction]) -> Result<AucReport> {
    if scores.len() != truth.len() {
        return Err(Error::invalid(format!(
            "{} scores for {} labels",
            scores.len(),
            truth.len()
        )));
    }
    let per: Vec<Option<f64>> = DIRECTIONS
        .iter()
        .map(|&d| {
            let s: Vec<f64> = scores.iter().map(|c| c.get(d)).collect();
            let pos: Vec<bool> = truth.iter().map(|&t| t == d).collect();
            let auc = binary_auc(&s, &pos);
            if auc.is_none() {
                debug!(class = %d, "class lacks positives or negatives; skipped in AUC");
            }
            auc
        })
        .collect();
    let scored: Vec<f64> = per.iter().flatten().copied().collect();
    if scored.is_empty() {
        return Err(Error::invalid("no class has both positive and negative examples"));
    }
    Ok(AucReport {
        macro_auc: scored.iter().sum::<f64>() / scored.len() as f64,
        increase: per[0],
        stable: per[1],
        decrease: per[2],
    })
}
