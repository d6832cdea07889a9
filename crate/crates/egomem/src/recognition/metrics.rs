//! Open-set accuracy metrics and the multi-class confusion matrix.

use crate::error::{Error, Result};
use crate::io::pgm::GrayImage;

use super::OpenSetVerdict;

/// Ground truth for one open-set query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QueryTruth {
    /// The query belongs to this enrolled identity.
    Enrolled(String),
    /// The query belongs to nobody in the database.
    Impostor,
}

/// Tallied open-set outcomes. A known verdict with the wrong label counts as
/// a false negative, not a true positive.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpenSetCounts {
    pub true_positives: usize,
    pub false_negatives: usize,
    pub true_negatives: usize,
    pub false_positives: usize,
}

impl OpenSetCounts {
    /// TP / (TP + FN); `None` when no enrolled queries exist.
    pub fn positive_accuracy(&self) -> Option<f64> {
        let denom = self.true_positives + self.false_negatives;
        (denom > 0).then(|| self.true_positives as f64 / denom as f64)
    }

    /// TN / (TN + FP); `None` when no impostor queries exist.
    pub fn negative_accuracy(&self) -> Option<f64> {
        let denom = self.true_negatives + self.false_positives;
        (denom > 0).then(|| self.true_negatives as f64 / denom as f64)
    }
}

pub fn open_set_counts(
    verdicts: &[OpenSetVerdict],
    truth: &[QueryTruth],
) -> Result<OpenSetCounts> {
    if verdicts.len() != truth.len() {
        return Err(Error::Domain(format!(
            "{} verdicts against {} truths",
            verdicts.len(),
            truth.len()
        )));
    }
    let mut counts = OpenSetCounts::default();
    for (verdict, truth) in verdicts.iter().zip(truth) {
        match (truth, verdict.known_label()) {
            (QueryTruth::Enrolled(want), Some(got)) if got == want => {
                counts.true_positives += 1
            }
            (QueryTruth::Enrolled(_), _) => counts.false_negatives += 1,
            (QueryTruth::Impostor, None) => counts.true_negatives += 1,
            (QueryTruth::Impostor, Some(_)) => counts.false_positives += 1,
        }
    }
    Ok(counts)
}

pub fn positive_accuracy(verdicts: &[OpenSetVerdict], truth: &[QueryTruth]) -> Result<Option<f64>> {
    Ok(open_set_counts(verdicts, truth)?.positive_accuracy())
}

pub fn negative_accuracy(verdicts: &[OpenSetVerdict], truth: &[QueryTruth]) -> Result<Option<f64>> {
    Ok(open_set_counts(verdicts, truth)?.negative_accuracy())
}

/// Multi-class confusion matrix: rows are truth, columns are prediction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    labels: Vec<String>,
    counts: Vec<usize>,
}

impl ConfusionMatrix {
    pub fn new(labels: Vec<String>) -> Self {
        let n = labels.len();
        ConfusionMatrix {
            labels,
            counts: vec![0; n * n],
        }
    }

    pub fn from_predictions(
        labels: Vec<String>,
        truth: &[usize],
        predicted: &[usize],
    ) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::Domain("truth/prediction length mismatch".into()));
        }
        let mut m = ConfusionMatrix::new(labels);
        for (&t, &p) in truth.iter().zip(predicted) {
            m.record(t, p)?;
        }
        Ok(m)
    }

    pub fn record(&mut self, truth: usize, predicted: usize) -> Result<()> {
        let n = self.labels.len();
        if truth >= n || predicted >= n {
            return Err(Error::Domain(format!(
                "class index out of range: truth {truth}, predicted {predicted}, classes {n}"
            )));
        }
        self.counts[truth * n + predicted] += 1;
        Ok(())
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn count(&self, truth: usize, predicted: usize) -> usize {
        self.counts[truth * self.labels.len() + predicted]
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Trace over total; `None` on an empty matrix.
    pub fn accuracy(&self) -> Option<f64> {
        let total = self.total();
        if total == 0 {
            return None;
        }
        let n = self.labels.len();
        let correct: usize = (0..n).map(|i| self.counts[i * n + i]).sum();
        Some(correct as f64 / total as f64)
    }

    /// Expected accuracy of uniform guessing, 1 / n_classes.
    pub fn chance_level(&self) -> f64 {
        1.0 / self.labels.len() as f64
    }

    /// Tab-separated rendering with a header row of predicted labels.
    pub fn to_tsv(&self) -> String {
        let n = self.labels.len();
        let mut out = String::from("truth\\pred");
        for label in &self.labels {
            out.push('\t');
            out.push_str(label);
        }
        out.push('\n');
        for t in 0..n {
            out.push_str(&self.labels[t]);
            for p in 0..n {
                out.push('\t');
                out.push_str(&self.counts[t * n + p].to_string());
            }
            out.push('\n');
        }
        out
    }

    /// Renders the matrix as a grayscale heatmap, `cell` pixels per entry,
    /// intensities normalized to the largest count.
    pub fn to_heatmap(&self, cell: usize) -> GrayImage {
        let n = self.labels.len();
        let max = self.counts.iter().copied().max().unwrap_or(0).max(1);
        let size = n * cell;
        let mut img = GrayImage::filled(size.max(1), size.max(1), 0);
        for t in 0..n {
            for p in 0..n {
                let v = (self.counts[t * n + p] * 255 / max) as u8;
                for y in 0..cell {
                    for x in 0..cell {
                        img.set(p * cell + x, t * cell + y, v);
                    }
                }
            }
        }
        img
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn known(label: &str) -> OpenSetVerdict {
        OpenSetVerdict::Known {
            label: label.into(),
            distance: 0.1,
        }
    }

    fn unknown() -> OpenSetVerdict {
        OpenSetVerdict::Unknown { distance: 9.0 }
    }

    #[test]
    fn positive_accuracy_arithmetic() {
        let verdicts = vec![known("a"), known("a"), known("a"), unknown()];
        let truth = vec![
            QueryTruth::Enrolled("a".into()),
            QueryTruth::Enrolled("a".into()),
            QueryTruth::Enrolled("a".into()),
            QueryTruth::Enrolled("a".into()),
        ];
        let counts = open_set_counts(&verdicts, &truth).unwrap();
        assert_eq!(counts.true_positives, 3);
        assert_eq!(counts.false_negatives, 1);
        assert_eq!(counts.positive_accuracy(), Some(0.75));
        assert_eq!(counts.negative_accuracy(), None);
    }

    #[test]
    fn wrong_label_counts_as_false_negative() {
        let verdicts = vec![known("b")];
        let truth = vec![QueryTruth::Enrolled("a".into())];
        let counts = open_set_counts(&verdicts, &truth).unwrap();
        assert_eq!(counts.true_positives, 0);
        assert_eq!(counts.false_negatives, 1);
    }

    #[test]
    fn all_impostors_rejected_gives_full_negative_accuracy() {
        let verdicts = vec![unknown(), unknown(), unknown()];
        let truth = vec![QueryTruth::Impostor; 3];
        assert_eq!(
            negative_accuracy(&verdicts, &truth).unwrap(),
            Some(1.0)
        );
        assert_eq!(positive_accuracy(&verdicts, &truth).unwrap(), None);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(open_set_counts(&[unknown()], &[]).is_err());
    }

    #[test]
    fn confusion_matrix_counts_and_accuracy() {
        let labels = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        let truth = vec![0, 0, 1, 1, 2, 2, 2];
        let pred = vec![0, 1, 1, 1, 2, 0, 2];
        let m = ConfusionMatrix::from_predictions(labels, &truth, &pred).unwrap();
        assert_eq!(m.count(0, 0), 1);
        assert_eq!(m.count(0, 1), 1);
        assert_eq!(m.count(1, 1), 2);
        assert_eq!(m.count(2, 0), 1);
        assert_eq!(m.count(2, 2), 2);
        assert_eq!(m.total(), 7);
        let acc = m.accuracy().unwrap();
        assert!((acc - 5.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn chance_level_for_twelve_classes() {
        let labels: Vec<String> = (0..12).map(|i| format!("p{i}")).collect();
        let m = ConfusionMatrix::new(labels);
        assert!((m.chance_level() - 1.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn tsv_round_and_heatmap_shape() {
        let labels = vec!["a".to_string(), "b".to_string()];
        let mut m = ConfusionMatrix::new(labels);
        m.record(0, 0).unwrap();
        m.record(1, 0).unwrap();
        let tsv = m.to_tsv();
        assert!(tsv.starts_with("truth\\pred\ta\tb\n"));
        assert!(tsv.contains("a\t1\t0\n"));
        let heat = m.to_heatmap(8);
        assert_eq!(heat.width, 16);
        assert_eq!(heat.height, 16);
        assert_eq!(heat.get(0, 0), 255);
    }
}
