//! Constant-velocity Kalman filter over the bounding-box state
//! [cx, cy, area, aspect, vcx, vcy, varea].
//!
//! Aspect ratio is modeled as constant; center and area carry velocities.

use nalgebra::{SMatrix, SVector};

use super::bbox::BoundingBox;
use super::TrackerParams;

pub type StateVector = SVector<f64, 7>;
pub type Covariance = SMatrix<f64, 7, 7>;
type Measurement = SVector<f64, 4>;

const MIN_EXTENT: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct KalmanBoxFilter {
    state: StateVector,
    covariance: Covariance,
}

impl KalmanBoxFilter {
    /// Initializes from a detection with zero velocities and a diagonal
    /// covariance that is loose on the unobserved velocity terms.
    pub fn from_detection(bbox: &BoundingBox) -> Self {
        let z = measurement_from_bbox(bbox);
        let mut state = StateVector::zeros();
        for i in 0..4 {
            state[i] = z[i];
        }
        let mut covariance = Covariance::zeros();
        for i in 0..4 {
            covariance[(i, i)] = 10.0;
        }
        for i in 4..7 {
            covariance[(i, i)] = 1e4;
        }
        KalmanBoxFilter { state, covariance }
    }

    pub fn state(&self) -> &StateVector {
        &self.state
    }

    pub fn covariance(&self) -> &Covariance {
        &self.covariance
    }

    pub fn bbox(&self) -> BoundingBox {
        bbox_from_state(&self.state)
    }

    pub fn predict(&mut self, params: &TrackerParams) {
        // A shrinking area must not cross zero during prediction.
        if self.state[2] + self.state[6] <= 0.0 {
            self.state[6] = 0.0;
        }
        let f = transition();
        self.state = f * self.state;
        self.covariance = f * self.covariance * f.transpose() + process_noise(params);
        self.symmetrize();
        self.clamp_extent();
    }

    pub fn update(&mut self, bbox: &BoundingBox, params: &TrackerParams) {
        let h = observation();
        let z = measurement_from_bbox(bbox);
        let r = measurement_noise(params);

        let innovation: Measurement = z - h * self.state;
        let s = h * self.covariance * h.transpose() + r;
        let s_inv = s.try_inverse().expect("innovation covariance invertible");
        let gain = self.covariance * h.transpose() * s_inv;

        self.state += gain * innovation;
        // Joseph form keeps the covariance symmetric positive semidefinite.
        let identity = Covariance::identity();
        let ikh = identity - gain * h;
        self.covariance =
            ikh * self.covariance * ikh.transpose() + gain * r * gain.transpose();
        self.symmetrize();
        self.clamp_extent();
    }

    fn symmetrize(&mut self) {
        self.covariance = (self.covariance + self.covariance.transpose()) * 0.5;
    }

    fn clamp_extent(&mut self) {
        if self.state[2] < MIN_EXTENT {
            self.state[2] = MIN_EXTENT;
        }
        if self.state[3] < MIN_EXTENT {
            self.state[3] = MIN_EXTENT;
        }
    }
}

fn transition() -> Covariance {
    let mut f = Covariance::identity();
    f[(0, 4)] = 1.0;
    f[(1, 5)] = 1.0;
    f[(2, 6)] = 1.0;
    f
}

fn observation() -> SMatrix<f64, 4, 7> {
    let mut h = SMatrix::<f64, 4, 7>::zeros();
    for i in 0..4 {
        h[(i, i)] = 1.0;
    }
    h
}

fn process_noise(params: &TrackerParams) -> Covariance {
    let base = [1.0, 1.0, 1.0, 1.0, 0.01, 0.01, 1e-4];
    let mut q = Covariance::zeros();
    for (i, b) in base.iter().enumerate() {
        q[(i, i)] = b * params.process_noise;
    }
    q
}

fn measurement_noise(params: &TrackerParams) -> SMatrix<f64, 4, 4> {
    let base = [1.0, 1.0, 10.0, 10.0];
    let mut r = SMatrix::<f64, 4, 4>::zeros();
    for (i, b) in base.iter().enumerate() {
        r[(i, i)] = b * params.measurement_noise;
    }
    r
}

fn measurement_from_bbox(bbox: &BoundingBox) -> Measurement {
    let (cx, cy) = bbox.center();
    Measurement::new(cx, cy, bbox.area(), bbox.width() / bbox.height())
}

fn bbox_from_state(state: &StateVector) -> BoundingBox {
    let area = state[2].max(MIN_EXTENT);
    let aspect = state[3].max(MIN_EXTENT);
    let w = (area * aspect).sqrt();
    let h = area / w;
    let x1 = (state[0] - w / 2.0).max(0.0);
    let y1 = (state[1] - h / 2.0).max(0.0);
    BoundingBox::new(x1, y1, x1 + w, y1 + h).expect("state yields a valid box")
}
