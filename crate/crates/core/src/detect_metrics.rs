//! Detection metrics: binary P/R/F1, supporting-evidence P/R/F1 (micro
//! averaged), joint accuracy and average-precision AUPR.

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;

use crate::detection::{predict_from_scores, DetectionConfig};
use crate::dialog::{DetectionExample, EvidenceSet, Label, PredictionRecord};
use crate::error::MetricError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    /// Empty denominators give 0.
    pub fn from_counts(hits: usize, predicted: usize, relevant: usize) -> Self {
        let ratio = |d: usize| if d == 0 { 0.0 } else { hits as f64 / d as f64 };
        let (precision, recall) = (ratio(predicted), ratio(relevant));
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Prf {
            precision,
            recall,
            f1,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub examples: usize,
}

pub fn confusion(gold: &[Label], pred: &[Label]) -> Result<Confusion, MetricError> {
    if gold.len() != pred.len() {
        return Err(MetricError::LengthMismatch {
            left: gold.len(),
            right: pred.len(),
        });
    }
    let mut c = Confusion {
        examples: gold.len(),
        ..Confusion::default()
    };
    for (g, p) in gold.iter().zip(pred) {
        match (g.is_positive(), p.is_positive()) {
            (true, true) => c.tp += 1,
            (false, true) => c.fp += 1,
            (true, false) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

/// Precision/recall/F1 with contradiction as the positive class.
pub fn binary_prf(gold: &[Label], pred: &[Label]) -> Result<Prf, MetricError> {
    let c = confusion(gold, pred)?;
    Ok(Prf::from_counts(c.tp, c.tp + c.fp, c.tp + c.fn_))
}

/// Pairs each gold example with the prediction of the same id.
pub fn align<'a>(
    gold: &'a [DetectionExample],
    preds: &'a [PredictionRecord],
) -> Result<Vec<(&'a DetectionExample, &'a PredictionRecord)>, MetricError> {
    let by_id: HashMap<&str, &PredictionRecord> =
        preds.iter().map(|p| (p.id.as_str(), p)).collect();
    let pairs = gold
        .iter()
        .map(|g| {
            by_id
                .get(g.id.as_str())
                .map(|&p| (g, p))
                .ok_or_else(|| MetricError::IdMismatch { id: g.id.clone() })
        })
        .collect::<Result<Vec<_>, _>>()?;
    if by_id.len() != gold.len() || preds.len() != gold.len() {
        let gold_ids: std::collections::HashSet<&str> =
            gold.iter().map(|g| g.id.as_str()).collect();
        let extra = preds
            .iter()
            .find(|p| !gold_ids.contains(p.id.as_str()))
            .map_or_else(|| "<duplicate prediction id>".to_owned(), |p| p.id.clone());
        return Err(MetricError::IdMismatch { id: extra });
    }
    Ok(pairs)
}

fn gold_label(g: &DetectionExample) -> Result<Label, MetricError> {
    g.gold_label
        .ok_or_else(|| MetricError::MissingLabel { id: g.id.clone() })
}

/// Micro-averaged over (example, evidence index) pairs. Predicted evidence
/// on gold-negative examples counts toward the precision denominator.
pub fn evidence_prf(
    gold: &[DetectionExample],
    preds: &[PredictionRecord],
) -> Result<Prf, MetricError> {
    let mut hits = 0;
    let mut predicted = 0;
    let mut relevant = 0;
    for (g, p) in align(gold, preds)? {
        let gold_ev = if gold_label(g)?.is_positive() {
            g.gold_evidence_or_empty()
        } else {
            EvidenceSet::new()
        };
        hits += p.evidence.intersection(&gold_ev).count();
        predicted += p.evidence.len();
        relevant += gold_ev.len();
    }
    Ok(Prf::from_counts(hits, predicted, relevant))
}

/// Correct label, and for gold positives, predicted evidence covering the
/// gold evidence.
pub fn joint_correct(
    gold_label: Label,
    gold_evidence: &EvidenceSet,
    pred: &PredictionRecord,
) -> bool {
    pred.label == gold_label
        && (!gold_label.is_positive() || pred.evidence.is_superset(gold_evidence))
}

pub fn joint_accuracy(
    gold: &[DetectionExample],
    preds: &[PredictionRecord],
) -> Result<f64, MetricError> {
    let pairs = align(gold, preds)?;
    if pairs.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    let mut correct = 0usize;
    for (g, p) in &pairs {
        correct += usize::from(joint_correct(
            gold_label(g)?,
            &g.gold_evidence_or_empty(),
            p,
        ));
    }
    Ok(correct as f64 / pairs.len() as f64)
}

/// Average precision: Σ (R_k − R_{k−1}) · P_k over descending score cut
/// points, with tied scores forming a single cut.
pub fn aupr(gold: &[Label], scores: &[f64]) -> Result<f64, MetricError> {
    if gold.len() != scores.len() {
        return Err(MetricError::LengthMismatch {
            left: gold.len(),
            right: scores.len(),
        });
    }
    let positives = gold.iter().filter(|l| l.is_positive()).count();
    if positives == 0 {
        return Err(MetricError::NoPositives);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let (mut tp, mut seen) = (0usize, 0usize);
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    let mut i = 0;
    while i < order.len() {
        let cut = scores[order[i]];
        while i < order.len() && scores[order[i]] == cut {
            tp += usize::from(gold[order[i]].is_positive());
            seen += 1;
            i += 1;
        }
        let recall = tp as f64 / positives as f64;
        let precision = tp as f64 / seen as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Ok(ap)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionEvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// `None` when the gold set has no positives.
    pub aupr: Option<f64>,
    pub se_precision: f64,
    pub se_recall: f64,
    pub se_f1: f64,
    pub joint_accuracy: f64,
    pub counts: Confusion,
}

/// Scores predictions against gold examples.
///
/// Predictions carrying pair scores are re-thresholded at `config.eta`, so
/// one prediction file supports any threshold.
pub fn evaluate(
    gold: &[DetectionExample],
    preds: &[PredictionRecord],
    config: &DetectionConfig,
) -> Result<DetectionEvalReport, MetricError> {
    let pairs = align(gold, preds)?;
    if pairs.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    let recomputed: Vec<PredictionRecord> = pairs
        .iter()
        .map(|(_, p)| {
            if p.pair_scores.is_empty() {
                (*p).clone()
            } else {
                predict_from_scores(&p.id, p.pair_scores.clone(), config)
            }
        })
        .collect();
    let golds: Vec<DetectionExample> = pairs.iter().map(|(g, _)| (*g).clone()).collect();
    let gold_labels = golds
        .iter()
        .map(gold_label)
        .collect::<Result<Vec<_>, _>>()?;
    let pred_labels: Vec<Label> = recomputed.iter().map(|p| p.label).collect();
    let scores: Vec<f64> = recomputed.iter().map(|p| p.score).collect();

    let counts = confusion(&gold_labels, &pred_labels)?;
    let binary = Prf::from_counts(counts.tp, counts.tp + counts.fp, counts.tp + counts.fn_);
    let aupr = match aupr(&gold_labels, &scores) {
        Ok(v) => Some(v),
        Err(MetricError::NoPositives) => None,
        Err(e) => return Err(e),
    };
    let se = evidence_prf(&golds, &recomputed)?;
    Ok(DetectionEvalReport {
        precision: binary.precision,
        recall: binary.recall,
        f1: binary.f1,
        aupr,
        se_precision: se.precision,
        se_recall: se.recall,
        se_f1: se.f1,
        joint_accuracy: joint_accuracy(&golds, &recomputed)?,
        counts,
    })
}

impl DetectionEvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }

    pub fn columns(&self) -> [(&'static str, String); 4] {
        let pct = |x: f64| format!("{:.1}", 100.0 * x);
        [
            (
                "P/R/F1",
                format!(
                    "{}/{}/{}",
                    pct(self.precision),
                    pct(self.recall),
                    pct(self.f1)
                ),
            ),
            ("AUPR", self.aupr.map_or_else(|| "-".into(), pct)),
            (
                "SE (P/R/F1)",
                format!(
                    "{}/{}/{}",
                    pct(self.se_precision),
                    pct(self.se_recall),
                    pct(self.se_f1)
                ),
            ),
            ("Joint-Acc.", pct(self.joint_accuracy)),
        ]
    }
}

impl fmt::Display for DetectionEvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cols = self.columns();
        let widths: Vec<usize> = cols.iter().map(|(h, v)| h.len().max(v.len())).collect();
        let header: Vec<String> = cols
            .iter()
            .zip(&widths)
            .map(|((h, _), w)| format!("{h:>w$}"))
            .collect();
        let values: Vec<String> = cols
            .iter()
            .zip(&widths)
            .map(|((_, v), w)| format!("{v:>w$}"))
            .collect();
        writeln!(f, "{}", header.join(" | "))?;
        writeln!(f, "{}", values.join(" | "))?;
        write!(
            f,
            "(tp={} fp={} fn={} tn={}, {} examples)",
            self.counts.tp, self.counts.fp, self.counts.fn_, self.counts.tn, self.counts.examples
        )
    }
}
