use nalgebra::{SMatrix, SVector};

use crate::temporal_metrics::BBox;

pub type State = SVector<f64, 6>;
pub type Cov = SMatrix<f64, 6, 6>;
type Meas = SVector<f64, 4>;
type ObsMatrix = SMatrix<f64, 4, 6>;

/// Noise model for the box filter, in pixels and frames.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NoiseParams {
    pub q_pos: f64,
    pub q_vel: f64,
    pub q_size: f64,
    pub r_meas: f64,
    pub p0_pos: f64,
    pub p0_size: f64,
    pub p0_vel: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            q_pos: 1.0,
            q_vel: 10.0,
            q_size: 4.0,
            r_meas: 4.0,
            p0_pos: 4.0,
            p0_size: 4.0,
            p0_vel: 100.0,
        }
    }
}

/// Constant-velocity center, random-walk size: `(cx, cy, w, h, vx, vy)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub mean: State,
    pub covariance: Cov,
}

fn transition() -> Cov {
    let mut f = Cov::identity();
    f[(0, 4)] = 1.0;
    f[(1, 5)] = 1.0;
    f
}

fn observation() -> ObsMatrix {
    let mut h = ObsMatrix::zeros();
    for i in 0..4 {
        h[(i, i)] = 1.0;
    }
    h
}

fn measurement(b: &BBox) -> Meas {
    Meas::new(b.cx, b.cy, b.w, b.h)
}

impl KalmanState {
    /// Starts at `b` with zero velocity and the prior covariance.
    pub fn init(b: &BBox, noise: &NoiseParams) -> Self {
        let mean = State::from_column_slice(&[b.cx, b.cy, b.w, b.h, 0.0, 0.0]);
        let covariance = Cov::from_diagonal(&State::from_column_slice(&[
            noise.p0_pos,
            noise.p0_pos,
            noise.p0_size,
            noise.p0_size,
            noise.p0_vel,
            noise.p0_vel,
        ]));
        Self { mean, covariance }
    }

    pub fn predict(&mut self, noise: &NoiseParams) {
        let f = transition();
        let q = Cov::from_diagonal(&State::from_column_slice(&[
            noise.q_pos,
            noise.q_pos,
            noise.q_size,
            noise.q_size,
            noise.q_vel,
            noise.q_vel,
        ]));
        self.mean = f * self.mean;
        self.covariance = f * self.covariance * f.transpose() + q;
        self.symmetrize();
    }

    /// Standard measurement update with a box observation.
    pub fn update(&mut self, b: &BBox, noise: &NoiseParams) {
        let h = observation();
        let r = SMatrix::<f64, 4, 4>::identity() * noise.r_meas;
        let innovation = measurement(b) - h * self.mean;
        let s = h * self.covariance * h.transpose() + r;
        let Some(s_inv) = s.try_inverse() else {
            return;
        };
        let gain = self.covariance * h.transpose() * s_inv;
        self.mean += gain * innovation;
        // Joseph form keeps the covariance symmetric positive definite
        let i_kh = Cov::identity() - gain * h;
        self.covariance = i_kh * self.covariance * i_kh.transpose() + gain * r * gain.transpose();
        self.symmetrize();
    }

    pub fn bbox(&self) -> BBox {
        BBox::new(self.mean[0], self.mean[1], self.mean[2].max(1e-6), self.mean[3].max(1e-6))
    }

    pub fn velocity(&self) -> (f64, f64) {
        (self.mean[4], self.mean[5])
    }

    fn symmetrize(&mut self) {
        self.covariance = (self.covariance + self.covariance.transpose()) * 0.5;
    }
}
