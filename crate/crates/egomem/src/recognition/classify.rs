//! Closed-set reference classifiers: nearest centroid and a one-layer
//! linear softmax trained by full-batch gradient descent.

use crate::error::{Error, Result};

use super::metrics::ConfusionMatrix;

/// Which reference classifier to train.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassifierKind {
    NearestCentroid,
    LinearSoftmax,
}

pub trait Classifier {
    fn predict(&self, features: &[f64]) -> usize;
}

/// Per-class mean vectors; predicts the nearest centroid.
#[derive(Debug, Clone)]
pub struct NearestCentroid {
    centroids: Vec<Vec<f64>>,
}

impl NearestCentroid {
    pub fn train(data: &[(Vec<f64>, usize)], n_classes: usize) -> Result<Self> {
        let dim = validate_training_set(data, n_classes)?;
        let mut centroids = vec![vec![0.0; dim]; n_classes];
        let mut counts = vec![0usize; n_classes];
        for (x, y) in data {
            for (c, v) in centroids[*y].iter_mut().zip(x) {
                *c += v;
            }
            counts[*y] += 1;
        }
        for (centroid, count) in centroids.iter_mut().zip(counts) {
            for c in centroid.iter_mut() {
                *c /= count as f64;
            }
        }
        Ok(NearestCentroid { centroids })
    }
}

impl Classifier for NearestCentroid {
    fn predict(&self, features: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (k, centroid) in self.centroids.iter().enumerate() {
            let d: f64 = centroid
                .iter()
                .zip(features)
                .map(|(c, x)| (c - x) * (c - x))
                .sum();
            if d < best_d {
                best_d = d;
                best = k;
            }
        }
        best
    }
}

#[derive(Debug, Clone)]
pub struct SoftmaxConfig {
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for SoftmaxConfig {
    fn default() -> Self {
        SoftmaxConfig {
            epochs: 300,
            learning_rate: 1.0,
        }
    }
}

/// One-layer softmax classifier over standardized features.
#[derive(Debug, Clone)]
pub struct LinearSoftmax {
    weights: Vec<Vec<f64>>, // n_classes x dim
    bias: Vec<f64>,
    means: Vec<f64>,
    stds: Vec<f64>,
    /// Accepted loss after each epoch, starting with the initial loss.
    pub loss_history: Vec<f64>,
}

impl LinearSoftmax {
    /// Full-batch gradient descent with backtracking: a step that would
    /// increase the loss is halved until it does not, so the recorded loss
    /// history is non-increasing on any data.
    pub fn train(
        data: &[(Vec<f64>, usize)],
        n_classes: usize,
        config: &SoftmaxConfig,
    ) -> Result<Self> {
        let dim = validate_training_set(data, n_classes)?;
        let (means, stds) = standardization(data, dim);
        let standardized: Vec<(Vec<f64>, usize)> = data
            .iter()
            .map(|(x, y)| (standardize(x, &means, &stds), *y))
            .collect();

        let mut weights = vec![vec![0.0; dim]; n_classes];
        let mut bias = vec![0.0; n_classes];
        let (mut loss, mut grad_w, mut grad_b) =
            softmax_loss_and_grad(&weights, &bias, &standardized, n_classes);
        let mut history = vec![loss];

        for _ in 0..config.epochs {
            let mut step = config.learning_rate;
            let mut accepted = false;
            for _ in 0..30 {
                let trial_w: Vec<Vec<f64>> = weights
                    .iter()
                    .zip(&grad_w)
                    .map(|(wr, gr)| wr.iter().zip(gr).map(|(w, g)| w - step * g).collect())
                    .collect();
                let trial_b: Vec<f64> = bias
                    .iter()
                    .zip(&grad_b)
                    .map(|(b, g)| b - step * g)
                    .collect();
                let (new_loss, new_gw, new_gb) =
                    softmax_loss_and_grad(&trial_w, &trial_b, &standardized, n_classes);
                if new_loss <= loss {
                    weights = trial_w;
                    bias = trial_b;
                    loss = new_loss;
                    grad_w = new_gw;
                    grad_b = new_gb;
                    accepted = true;
                    break;
                }
                step /= 2.0;
            }
            if !accepted {
                break;
            }
            history.push(loss);
        }

        Ok(LinearSoftmax {
            weights,
            bias,
            means,
            stds,
            loss_history: history,
        })
    }
}

impl Classifier for LinearSoftmax {
    fn predict(&self, features: &[f64]) -> usize {
        let x = standardize(features, &self.means, &self.stds);
        let mut best = 0;
        let mut best_z = f64::NEG_INFINITY;
        for (k, (w, b)) in self.weights.iter().zip(&self.bias).enumerate() {
            let z: f64 = w.iter().zip(&x).map(|(w, x)| w * x).sum::<f64>() + b;
            if z > best_z {
                best_z = z;
                best = k;
            }
        }
        best
    }
}

/// Mean cross-entropy loss and its analytic gradient for a linear softmax.
pub fn softmax_loss_and_grad(
    weights: &[Vec<f64>],
    bias: &[f64],
    data: &[(Vec<f64>, usize)],
    n_classes: usize,
) -> (f64, Vec<Vec<f64>>, Vec<f64>) {
    let dim = weights[0].len();
    let n = data.len() as f64;
    let mut loss = 0.0;
    let mut grad_w = vec![vec![0.0; dim]; n_classes];
    let mut grad_b = vec![0.0; n_classes];

    for (x, y) in data {
        let logits: Vec<f64> = weights
            .iter()
            .zip(bias)
            .map(|(w, b)| w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + b)
            .collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        loss -= (exps[*y] / total).ln();
        for k in 0..n_classes {
            let p = exps[k] / total;
            let delta = p - if k == *y { 1.0 } else { 0.0 };
            for (g, xv) in grad_w[k].iter_mut().zip(x) {
                *g += delta * xv;
            }
            grad_b[k] += delta;
        }
    }

    loss /= n;
    for row in &mut grad_w {
        for g in row.iter_mut() {
            *g /= n;
        }
    }
    for g in &mut grad_b {
        *g /= n;
    }
    (loss, grad_w, grad_b)
}

fn validate_training_set(data: &[(Vec<f64>, usize)], n_classes: usize) -> Result<usize> {
    if n_classes < 2 {
        return Err(Error::Config("need at least two classes".into()));
    }
    let dim = data
        .first()
        .map(|(x, _)| x.len())
        .ok_or_else(|| Error::Config("empty training set".into()))?;
    if dim == 0 || data.iter().any(|(x, _)| x.len() != dim) {
        return Err(Error::Config("inconsistent feature dimensions".into()));
    }
    let mut counts = vec![0usize; n_classes];
    for (_, y) in data {
        if *y >= n_classes {
            return Err(Error::Config(format!(
                "label {y} out of range for {n_classes} classes"
            )));
        }
        counts[*y] += 1;
    }
    if let Some(class) = counts.iter().position(|&c| c == 0) {
        return Err(Error::Config(format!(
            "class {class} has zero training samples"
        )));
    }
    Ok(dim)
}

fn standardization(data: &[(Vec<f64>, usize)], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let n = data.len() as f64;
    let mut means = vec![0.0; dim];
    for (x, _) in data {
        for (m, v) in means.iter_mut().zip(x) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= n;
    }
    let mut stds = vec![0.0; dim];
    for (x, _) in data {
        for ((s, v), m) in stds.iter_mut().zip(x).zip(&means) {
            *s += (v - m) * (v - m);
        }
    }
    for s in &mut stds {
        *s = (*s / n).sqrt();
        if *s < 1e-12 {
            *s = 1.0;
        }
    }
    (means, stds)
}

fn standardize(x: &[f64], means: &[f64], stds: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(means)
        .zip(stds)
        .map(|((v, m), s)| (v - m) / s)
        .collect()
}

/// Trains the requested reference classifier.
pub fn train_closed_set(
    data: &[(Vec<f64>, usize)],
    n_classes: usize,
    kind: ClassifierKind,
) -> Result<Box<dyn Classifier>> {
    Ok(match kind {
        ClassifierKind::NearestCentroid => Box::new(NearestCentroid::train(data, n_classes)?),
        ClassifierKind::LinearSoftmax => Box::new(LinearSoftmax::train(
            data,
            n_classes,
            &SoftmaxConfig::default(),
        )?),
    })
}

/// Closed-set evaluation result.
#[derive(Debug, Clone)]
pub struct ClosedSetReport {
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub chance_level: f64,
}

/// Runs a trained model over a labeled test set; the confusion matrix has
/// truth on rows and predictions on columns.
pub fn eval_closed_set(
    model: &dyn Classifier,
    test: &[(Vec<f64>, usize)],
    labels: Vec<String>,
) -> Result<ClosedSetReport> {
    if test.is_empty() {
        return Err(Error::Config("empty test set".into()));
    }
    let truth: Vec<usize> = test.iter().map(|(_, y)| *y).collect();
    let predicted: Vec<usize> = test.iter().map(|(x, _)| model.predict(x)).collect();
    let confusion = ConfusionMatrix::from_predictions(labels, &truth, &predicted)?;
    let accuracy = confusion.accuracy().expect("non-empty test set");
    let chance_level = confusion.chance_level();
    Ok(ClosedSetReport {
        confusion,
        accuracy,
        chance_level,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recognition::OracleEmbedder;

    fn separable_corpus(
        n_classes: usize,
        per_class: usize,
        seed: u64,
    ) -> Vec<(Vec<f64>, usize)> {
        let oracle = OracleEmbedder::new(n_classes.max(4), 6.0, 0.5, seed);
        let mut data = Vec::new();
        for class in 0..n_classes {
            for s in 0..per_class {
                data.push((oracle.embed(class, s as u64).values().to_vec(), class));
            }
        }
        data
    }

    #[test]
    fn separable_data_is_classified_perfectly() {
        let train = separable_corpus(4, 10, 1);
        let test = separable_corpus(4, 5, 2);
        for kind in [ClassifierKind::NearestCentroid, ClassifierKind::LinearSoftmax] {
            let model = train_closed_set(&train, 4, kind).unwrap();
            let labels = (0..4).map(|i| format!("c{i}")).collect();
            let report = eval_closed_set(model.as_ref(), &test, labels).unwrap();
            assert_eq!(report.accuracy, 1.0, "{kind:?}");
            assert!((report.chance_level - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_sample_class_is_a_config_error() {
        let mut train = separable_corpus(3, 5, 3);
        train.retain(|(_, y)| *y != 1);
        assert!(matches!(
            NearestCentroid::train(&train, 3),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            LinearSoftmax::train(&train, 3, &SoftmaxConfig::default()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn softmax_loss_is_monotone_on_separable_data() {
        let train = separable_corpus(3, 12, 4);
        let model = LinearSoftmax::train(&train, 3, &SoftmaxConfig::default()).unwrap();
        assert!(model.loss_history.len() > 2);
        for pair in model.loss_history.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12, "loss rose: {pair:?}");
        }
        // learned something
        assert!(model.loss_history.last().unwrap() < &0.1);
    }

    #[test]
    fn analytic_gradient_matches_central_differences() {
        let data = vec![
            (vec![0.3, -1.2, 0.7], 0),
            (vec![-0.5, 0.9, 0.1], 1),
            (vec![1.1, 0.2, -0.8], 2),
            (vec![0.0, 0.4, 0.6], 1),
            (vec![-0.9, -0.3, 0.2], 0),
        ];
        let n_classes = 3;
        let weights = vec![
            vec![0.11, -0.2, 0.05],
            vec![-0.07, 0.13, 0.21],
            vec![0.02, 0.08, -0.17],
        ];
        let bias = vec![0.05, -0.1, 0.02];
        let (_, grad_w, grad_b) = softmax_loss_and_grad(&weights, &bias, &data, n_classes);

        let h = 1e-5;
        let loss_at = |w: &[Vec<f64>], b: &[f64]| softmax_loss_and_grad(w, b, &data, n_classes).0;

        for k in 0..n_classes {
            for d in 0..3 {
                let mut wp = weights.clone();
                let mut wm = weights.clone();
                wp[k][d] += h;
                wm[k][d] -= h;
                let numeric = (loss_at(&wp, &bias) - loss_at(&wm, &bias)) / (2.0 * h);
                let analytic = grad_w[k][d];
                let rel = (numeric - analytic).abs() / analytic.abs().max(1e-8);
                assert!(rel < 1e-4, "w[{k}][{d}]: analytic {analytic}, numeric {numeric}");
            }
            let mut bp = bias.clone();
            let mut bm = bias.clone();
            bp[k] += h;
            bm[k] -= h;
            let numeric = (loss_at(&weights, &bp) - loss_at(&weights, &bm)) / (2.0 * h);
            let rel = (numeric - grad_b[k]).abs() / grad_b[k].abs().max(1e-8);
            assert!(rel < 1e-4, "b[{k}]");
        }
    }

    #[test]
    fn twelve_class_chance_level() {
        let train = separable_corpus(12, 4, 5);
        let model = train_closed_set(&train, 12, ClassifierKind::NearestCentroid).unwrap();
        let labels = (0..12).map(|i| format!("p{i}")).collect();
        let report = eval_closed_set(model.as_ref(), &train, labels).unwrap();
        assert!((report.chance_level - 1.0 / 12.0).abs() < 1e-12);
    }
}
