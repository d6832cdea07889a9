//! Open-set person identification: an embedding database queried by k=1
//! nearest neighbor with a distance threshold, reference embedders for faces
//! and voices, closed-set classifiers, and the evaluation metrics.

mod classify;
mod metrics;

pub use classify::{
    eval_closed_set, train_closed_set, Classifier, ClassifierKind, ClosedSetReport,
    LinearSoftmax, NearestCentroid, SoftmaxConfig,
};
pub use metrics::{
    negative_accuracy, open_set_counts, positive_accuracy, ConfusionMatrix, OpenSetCounts,
    QueryTruth,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::{AlignedFace, Gammatonegram, ALIGNED_SIZE};
use crate::seeds::substream2;

/// Operating-point distance thresholds shipped as defaults.
pub const DEFAULT_FACE_THRESHOLD: f64 = 0.4;
pub const DEFAULT_VOICE_THRESHOLD: f64 = 1.7;

/// A fixed-dimension vector of finite reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(
                "embedding must be non-empty and finite".into(),
            ));
        }
        Ok(Embedding(values))
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn distance(&self, other: &Embedding) -> Result<f64> {
        if self.dimension() != other.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                actual: other.dimension(),
            });
        }
        Ok(self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }
}

/// Label -> embeddings store for k=1 nearest-neighbor lookup.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingDb {
    entries: Vec<(String, Embedding)>,
}

impl EmbeddingDb {
    pub fn new() -> Self {
        EmbeddingDb::default()
    }

    pub fn enroll(&mut self, label: impl Into<String>, embedding: Embedding) -> Result<()> {
        if let Some((_, first)) = self.entries.first() {
            if first.dimension() != embedding.dimension() {
                return Err(Error::DimensionMismatch {
                    expected: first.dimension(),
                    actual: embedding.dimension(),
                });
            }
        }
        self.entries.push((label.into(), embedding));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dimension(&self) -> Option<usize> {
        self.entries.first().map(|(_, e)| e.dimension())
    }

    pub fn entries(&self) -> &[(String, Embedding)] {
        &self.entries
    }

    /// Distinct labels in enrollment order.
    pub fn labels(&self) -> Vec<String> {
        let mut labels = Vec::new();
        for (label, _) in &self.entries {
            if !labels.contains(label) {
                labels.push(label.clone());
            }
        }
        labels
    }

    pub fn contains_label(&self, label: &str) -> bool {
        self.entries.iter().any(|(l, _)| l == label)
    }
}

/// Outcome of an open-set query.
#[derive(Debug, Clone, PartialEq)]
pub enum OpenSetVerdict {
    Known { label: String, distance: f64 },
    Unknown { distance: f64 },
}

impl OpenSetVerdict {
    pub fn distance(&self) -> f64 {
        match self {
            OpenSetVerdict::Known { distance, .. } => *distance,
            OpenSetVerdict::Unknown { distance } => *distance,
        }
    }

    pub fn known_label(&self) -> Option<&str> {
        match self {
            OpenSetVerdict::Known { label, .. } => Some(label),
            OpenSetVerdict::Unknown { .. } => None,
        }
    }
}

/// k=1 nearest neighbor with a distance threshold: the query is the nearest
/// enrolled identity when the distance is at most `threshold`, otherwise an
/// unknown person.
pub fn classify_open_set(
    db: &EmbeddingDb,
    query: &Embedding,
    threshold: f64,
) -> Result<OpenSetVerdict> {
    if db.is_empty() {
        return Err(Error::Domain("embedding database is empty".into()));
    }
    if threshold <= 0.0 {
        return Err(Error::Domain("threshold must be positive".into()));
    }
    let mut best: Option<(&str, f64)> = None;
    for (label, emb) in db.entries() {
        let d = query.distance(emb)?;
        if best.map_or(true, |(_, bd)| d < bd) {
            best = Some((label, d));
        }
    }
    let (label, distance) = best.expect("non-empty database");
    Ok(if distance <= threshold {
        OpenSetVerdict::Known {
            label: label.to_string(),
            distance,
        }
    } else {
        OpenSetVerdict::Unknown { distance }
    })
}

/// Turns an aligned face into an embedding.
pub trait FaceEmbedder {
    fn embed_face(&self, face: &AlignedFace) -> Embedding;
}

/// Turns a gammatonegram into an embedding.
pub trait VoiceEmbedder {
    fn embed_voice(&self, features: &Gammatonegram) -> Embedding;
}

/// Reference face embedder: the aligned face downsampled to a coarse grid of
/// block means, normalized to [0, 1].
#[derive(Debug, Clone)]
pub struct PixelGridEmbedder {
    pub grid: usize,
}

impl Default for PixelGridEmbedder {
    fn default() -> Self {
        PixelGridEmbedder { grid: 12 }
    }
}

impl FaceEmbedder for PixelGridEmbedder {
    fn embed_face(&self, face: &AlignedFace) -> Embedding {
        let g = self.grid;
        let block = ALIGNED_SIZE / g;
        let img = face.image();
        let mut values = Vec::with_capacity(g * g);
        for by in 0..g {
            for bx in 0..g {
                let mut sum = 0.0;
                for y in 0..block {
                    for x in 0..block {
                        sum += img.get(bx * block + x, by * block + y) as f64;
                    }
                }
                values.push(sum / (block * block) as f64 / 255.0);
            }
        }
        Embedding::new(values).expect("block means are finite")
    }
}

/// Reference voice embedder: mean energy per filter row.
#[derive(Debug, Clone, Default)]
pub struct RowEnergyEmbedder;

impl VoiceEmbedder for RowEnergyEmbedder {
    fn embed_voice(&self, features: &Gammatonegram) -> Embedding {
        Embedding::new(features.row_means()).expect("row means are finite")
    }
}

/// Test-oriented embedder with analytically known geometry: each class sits
/// on its own axis at a fixed separation, samples jitter inside a bounded
/// ball around the centroid.
#[derive(Debug, Clone)]
pub struct OracleEmbedder {
    pub dimension: usize,
    pub separation: f64,
    pub jitter: f64,
    pub seed: u64,
}

impl OracleEmbedder {
    pub fn new(dimension: usize, separation: f64, jitter: f64, seed: u64) -> Self {
        OracleEmbedder {
            dimension,
            separation,
            jitter,
            seed,
        }
    }

    pub fn centroid(&self, class_index: usize) -> Embedding {
        assert!(class_index < self.dimension, "class axis out of range");
        let mut v = vec![0.0; self.dimension];
        v[class_index] = self.separation;
        Embedding::new(v).expect("axis centroid is finite")
    }

    /// Deterministic sample: centroid plus jitter with norm at most `jitter`.
    pub fn embed(&self, class_index: usize, sample_index: u64) -> Embedding {
        let centroid = self.centroid(class_index);
        let mut rng = ChaCha8Rng::seed_from_u64(substream2(
            self.seed,
            class_index as u64,
            sample_index,
        ));
        let per_coord = self.jitter / (self.dimension as f64).sqrt();
        let values = centroid
            .values()
            .iter()
            .map(|&c| c + rng.random_range(-per_coord..=per_coord))
            .collect();
        Embedding::new(values).expect("jittered centroid is finite")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{align_face, gammatonegram};
    use crate::io::pgm::GrayImage;
    use crate::mot::BoundingBox;

    fn face_from(img: GrayImage) -> AlignedFace {
        let bbox =
            BoundingBox::new(0.0, 0.0, img.width as f64, img.height as f64).unwrap();
        align_face(&img, &bbox).unwrap()
    }

    #[test]
    fn identical_faces_embed_identically() {
        let img = GrayImage::filled(180, 180, 120);
        let e1 = PixelGridEmbedder::default().embed_face(&face_from(img.clone()));
        let e2 = PixelGridEmbedder::default().embed_face(&face_from(img));
        assert_eq!(e1, e2);
        assert_eq!(e1.dimension(), 144);
    }

    #[test]
    fn silence_embeds_to_zero_vector() {
        let silence = vec![0.0; 16_000];
        let g = gammatonegram(&[&silence], 16_000, 32).unwrap();
        let e = RowEnergyEmbedder.embed_voice(&g);
        assert!(e.values().iter().all(|&v| v == 0.0));

        let e2 = RowEnergyEmbedder.embed_voice(&g);
        assert_eq!(e, e2);
    }

    #[test]
    fn exact_match_is_known_at_distance_zero() {
        let mut db = EmbeddingDb::new();
        let emb = Embedding::new(vec![1.0, 2.0, 3.0]).unwrap();
        db.enroll("ada", emb.clone()).unwrap();
        let verdict = classify_open_set(&db, &emb, 0.1).unwrap();
        assert_eq!(verdict.known_label(), Some("ada"));
        assert_eq!(verdict.distance(), 0.0);
    }

    #[test]
    fn distant_query_is_unknown() {
        let mut db = EmbeddingDb::new();
        db.enroll("ada", Embedding::new(vec![0.0, 0.0]).unwrap())
            .unwrap();
        let t = 0.5;
        let query = Embedding::new(vec![2.0 * t, 0.0]).unwrap();
        let verdict = classify_open_set(&db, &query, t).unwrap();
        assert!(verdict.known_label().is_none());
        assert!((verdict.distance() - 2.0 * t).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let mut db = EmbeddingDb::new();
        db.enroll("ada", Embedding::new(vec![0.0, 0.0]).unwrap())
            .unwrap();
        let query = Embedding::new(vec![0.0; 3]).unwrap();
        assert!(matches!(
            classify_open_set(&db, &query, 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(db.enroll("bob", Embedding::new(vec![0.0; 5]).unwrap()).is_err());
    }

    #[test]
    fn raising_threshold_never_unknowns_a_known() {
        let mut db = EmbeddingDb::new();
        db.enroll("a", Embedding::new(vec![0.0, 0.0]).unwrap()).unwrap();
        db.enroll("b", Embedding::new(vec![3.0, 0.0]).unwrap()).unwrap();
        let query = Embedding::new(vec![1.2, 0.4]).unwrap();
        let mut last_known = false;
        for step in 1..=20 {
            let t = step as f64 * 0.2;
            let known = classify_open_set(&db, &query, t)
                .unwrap()
                .known_label()
                .is_some();
            assert!(!last_known || known, "verdict flipped back at t={t}");
            last_known = known;
        }
        assert!(last_known);
    }

    #[test]
    fn verdicts_survive_consistent_relabeling() {
        let emb = |v: Vec<f64>| Embedding::new(v).unwrap();
        let mut db1 = EmbeddingDb::new();
        db1.enroll("x", emb(vec![0.0, 0.0])).unwrap();
        db1.enroll("y", emb(vec![4.0, 0.0])).unwrap();
        let mut db2 = EmbeddingDb::new();
        db2.enroll("y2", emb(vec![0.0, 0.0])).unwrap();
        db2.enroll("x2", emb(vec![4.0, 0.0])).unwrap();

        let query = emb(vec![0.3, 0.1]);
        let v1 = classify_open_set(&db1, &query, 1.0).unwrap();
        let v2 = classify_open_set(&db2, &query, 1.0).unwrap();
        assert_eq!(v1.known_label(), Some("x"));
        assert_eq!(v2.known_label(), Some("y2"));
        assert_eq!(v1.distance(), v2.distance());
    }

    #[test]
    fn oracle_embedder_geometry_holds() {
        let oracle = OracleEmbedder::new(8, 3.0, 0.5, 1);
        for class in 0..4 {
            for sample in 0..10 {
                let e = oracle.embed(class, sample);
                let d = e.distance(&oracle.centroid(class)).unwrap();
                assert!(d <= 0.5 + 1e-12, "jitter {d} exceeds bound");
            }
        }
        let d01 = oracle.centroid(0).distance(&oracle.centroid(1)).unwrap();
        assert!((d01 - 3.0 * 2f64.sqrt()).abs() < 1e-12);
    }
}
