//! Constant-velocity Kalman filtering over the 4-state vector
//! (px, py, vx, vy) with position-only measurements.
//!
//! Both sensor feeds run the same model; only the measurement noise differs
//! (camera vs GPS-class V2V). The process noise is a white-noise-acceleration
//! model whose discretization scales with the prediction interval, so the
//! same filter serves the 40 Hz camera stream and the 10 Hz BSM stream.

use nalgebra::{Matrix2, Matrix2x4, Matrix4, Vector2, Vector4};
use serde::{Deserialize, Serialize};

/// Errors from filter construction and stepping.
#[derive(Debug, Clone, PartialEq)]
pub enum FilterError {
    /// Prediction asked to run backwards in time.
    NegativeDt { dt: f64 },
    /// Measurement noise covariance is not positive definite.
    NonPositiveDefiniteR,
    /// Process noise intensity must be nonnegative.
    NegativeProcessNoise { q: f64 },
}

impl std::fmt::Display for FilterError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FilterError::NegativeDt { dt } => write!(f, "prediction dt = {dt} is negative"),
            FilterError::NonPositiveDefiniteR => {
                write!(f, "measurement noise R is not positive definite")
            }
            FilterError::NegativeProcessNoise { q } => {
                write!(f, "process noise intensity q = {q} is negative")
            }
        }
    }
}

impl std::error::Error for FilterError {}

/// Filtered state at a timestamp: x = (px, py, vx, vy) with covariance P.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackState {
    pub x: Vector4<f64>,
    pub p: Matrix4<f64>,
    /// Seconds on the monotonic pipeline clock.
    pub t: f64,
}

impl TrackState {
    pub fn new(x: Vector4<f64>, p: Matrix4<f64>, t: f64) -> Self {
        Self { x, p, t }
    }

    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.x[0], self.x[1])
    }

    pub fn velocity(&self) -> Vector2<f64> {
        Vector2::new(self.x[2], self.x[3])
    }
}

/// Constant-velocity model parameters shared by every track of one sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KfModel {
    /// White-noise-acceleration intensity per axis, m^2/s^3.
    pub process_noise: f64,
    /// Measurement noise variance per position axis, m^2.
    pub measurement_variance: [f64; 2],
    /// Velocity variance used when initializing a new track, m^2/s^2.
    pub init_velocity_variance: f64,
}

impl KfModel {
    pub fn new(
        process_noise: f64,
        measurement_variance: [f64; 2],
        init_velocity_variance: f64,
    ) -> Result<Self, FilterError> {
        if process_noise < 0.0 {
            return Err(FilterError::NegativeProcessNoise { q: process_noise });
        }
        if measurement_variance.iter().any(|&v| v <= 0.0) {
            return Err(FilterError::NonPositiveDefiniteR);
        }
        Ok(Self { process_noise, measurement_variance, init_velocity_variance })
    }

    /// State transition for a prediction interval of `dt` seconds.
    pub fn transition(dt: f64) -> Matrix4<f64> {
        let mut f = Matrix4::identity();
        f[(0, 2)] = dt;
        f[(1, 3)] = dt;
        f
    }

    /// Measurement map selecting (px, py).
    pub fn measurement_map() -> Matrix2x4<f64> {
        Matrix2x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0)
    }

    /// Discretized process noise for an interval of `dt` seconds:
    /// per axis, q * [dt^3/3, dt^2/2; dt^2/2, dt] in (position, velocity)
    /// blocks.
    pub fn process_noise_cov(&self, dt: f64) -> Matrix4<f64> {
        let q = self.process_noise;
        let d3 = q * dt * dt * dt / 3.0;
        let d2 = q * dt * dt / 2.0;
        let d1 = q * dt;
        let mut m = Matrix4::zeros();
        m[(0, 0)] = d3;
        m[(1, 1)] = d3;
        m[(0, 2)] = d2;
        m[(2, 0)] = d2;
        m[(1, 3)] = d2;
        m[(3, 1)] = d2;
        m[(2, 2)] = d1;
        m[(3, 3)] = d1;
        m
    }

    pub fn measurement_noise_cov(&self) -> Matrix2<f64> {
        Matrix2::new(self.measurement_variance[0], 0.0, 0.0, self.measurement_variance[1])
    }

    /// State for a brand-new track: position from the first measurement,
    /// zero velocity with an uninformative velocity prior.
    pub fn init_state(&self, z: Vector2<f64>, t: f64) -> TrackState {
        let x = Vector4::new(z[0], z[1], 0.0, 0.0);
        let mut p = Matrix4::zeros();
        p[(0, 0)] = self.measurement_variance[0];
        p[(1, 1)] = self.measurement_variance[1];
        p[(2, 2)] = self.init_velocity_variance;
        p[(3, 3)] = self.init_velocity_variance;
        TrackState::new(x, p, t)
    }
}

/// Prediction step: x' = F x (no control input), P' = F P F^T + Q(dt).
pub fn kf_predict(s: &TrackState, model: &KfModel, dt: f64) -> Result<TrackState, FilterError> {
    if dt < 0.0 {
        return Err(FilterError::NegativeDt { dt });
    }
    let f = KfModel::transition(dt);
    let x = f * s.x;
    let p = f * s.p * f.transpose() + model.process_noise_cov(dt);
    Ok(TrackState::new(x, symmetrize(&p), s.t + dt))
}

/// Measurement update with a position observation z = (px, py).
///
/// Standard update with the posterior covariance computed in Joseph form,
/// which keeps P symmetric positive semi-definite under roundoff.
pub fn kf_update(s: &TrackState, model: &KfModel, z: Vector2<f64>) -> TrackState {
    let h = KfModel::measurement_map();
    let r = model.measurement_noise_cov();

    let innovation = z - h * s.x;
    let innovation_cov = h * s.p * h.transpose() + r;
    // R is positive definite by model construction, so S is invertible.
    let s_inv = innovation_cov
        .try_inverse()
        .expect("innovation covariance invertible with positive definite R");
    let gain = s.p * h.transpose() * s_inv;

    let x = s.x + gain * innovation;
    let i_kh = Matrix4::identity() - gain * h;
    let p = i_kh * s.p * i_kh.transpose() + gain * r * gain.transpose();
    TrackState::new(x, symmetrize(&p), s.t)
}

fn symmetrize(p: &Matrix4<f64>) -> Matrix4<f64> {
    (p + p.transpose()) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> KfModel {
        KfModel::new(0.5, [0.25, 0.25], 100.0).unwrap()
    }

    fn assert_psd(p: &Matrix4<f64>) {
        for i in 0..4 {
            for j in 0..4 {
                assert!((p[(i, j)] - p[(j, i)]).abs() < 1e-9, "not symmetric");
            }
        }
        let eig = p.symmetric_eigenvalues();
        assert!(eig.iter().all(|&l| l >= -1e-9), "negative eigenvalue: {eig:?}");
    }

    #[test]
    fn zero_state_is_fixed_point() {
        let s = TrackState::new(Vector4::zeros(), Matrix4::identity(), 0.0);
        let out = kf_predict(&s, &model(), 0.1).unwrap();
        assert_eq!(out.x, Vector4::zeros());
        assert!((out.t - 0.1).abs() < 1e-12);
    }

    #[test]
    fn constant_velocity_advance() {
        let m = KfModel::new(0.0, [0.25, 0.25], 100.0).unwrap();
        let s = TrackState::new(Vector4::new(10.0, 0.0, 2.0, 0.0), Matrix4::identity(), 0.0);
        let out = kf_predict(&s, &m, 0.5).unwrap();
        assert_eq!(out.x, Vector4::new(11.0, 0.0, 2.0, 0.0));
    }

    #[test]
    fn predicted_covariance_matches_hand_product() {
        // P = I, Q = 0, dt = 0.1: P' = F F^T, checked entrywise against the
        // hand-multiplied product.
        let m = KfModel::new(0.0, [0.25, 0.25], 100.0).unwrap();
        let s = TrackState::new(Vector4::zeros(), Matrix4::identity(), 0.0);
        let out = kf_predict(&s, &m, 0.1).unwrap();
        #[rustfmt::skip]
        let expected = Matrix4::new(
            1.01, 0.0,  0.1, 0.0,
            0.0,  1.01, 0.0, 0.1,
            0.1,  0.0,  1.0, 0.0,
            0.0,  0.1,  0.0, 1.0,
        );
        for i in 0..4 {
            for j in 0..4 {
                assert!(
                    (out.p[(i, j)] - expected[(i, j)]).abs() < 1e-12,
                    "P'[{i},{j}] = {} expected {}",
                    out.p[(i, j)],
                    expected[(i, j)]
                );
            }
        }
    }

    #[test]
    fn negative_dt_rejected() {
        let s = TrackState::new(Vector4::zeros(), Matrix4::identity(), 1.0);
        assert!(matches!(
            kf_predict(&s, &model(), -0.01),
            Err(FilterError::NegativeDt { .. })
        ));
    }

    #[test]
    fn zero_innovation_keeps_state() {
        let s = TrackState::new(Vector4::new(3.0, -2.0, 1.0, 0.5), Matrix4::identity(), 0.0);
        let z = Vector2::new(3.0, -2.0);
        let out = kf_update(&s, &model(), z);
        assert!((out.x - s.x).norm() < 1e-12);
    }

    #[test]
    fn scalar_analogue_gain_half() {
        // P' = 1, R = 1 per axis: K = 0.5 and posterior position variance 0.5.
        let m = KfModel::new(0.5, [1.0, 1.0], 100.0).unwrap();
        let mut p = Matrix4::zeros();
        p[(0, 0)] = 1.0;
        p[(1, 1)] = 1.0;
        p[(2, 2)] = 1.0;
        p[(3, 3)] = 1.0;
        let s = TrackState::new(Vector4::zeros(), p, 0.0);
        let out = kf_update(&s, &m, Vector2::new(2.0, 0.0));
        assert!((out.x[0] - 1.0).abs() < 1e-12, "K*y = 0.5*2 = 1, got {}", out.x[0]);
        assert!((out.p[(0, 0)] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn update_shrinks_measured_subspace() {
        let s = TrackState::new(Vector4::new(1.0, 1.0, 0.0, 0.0), Matrix4::identity() * 4.0, 0.0);
        let out = kf_update(&s, &model(), Vector2::new(1.5, 0.5));
        let before = s.p[(0, 0)] + s.p[(1, 1)];
        let after = out.p[(0, 0)] + out.p[(1, 1)];
        assert!(after <= before + 1e-12);
    }

    #[test]
    fn covariance_stays_psd_through_steps() {
        let m = model();
        let mut s = m.init_state(Vector2::new(10.0, -3.0), 0.0);
        for k in 1..200 {
            s = kf_predict(&s, &m, 0.025).unwrap();
            if k % 4 == 0 {
                let drift = 0.01 * k as f64;
                s = kf_update(&s, &m, Vector2::new(10.0 + drift, -3.0));
            }
            assert_psd(&s.p);
        }
    }

    #[test]
    fn model_rejects_bad_noise() {
        assert!(matches!(
            KfModel::new(0.5, [0.0, 0.25], 100.0),
            Err(FilterError::NonPositiveDefiniteR)
        ));
        assert!(matches!(
            KfModel::new(-1.0, [0.25, 0.25], 100.0),
            Err(FilterError::NegativeProcessNoise { .. })
        ));
    }

    #[test]
    fn repeated_updates_converge_to_stationary_target() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let m = KfModel::new(0.01, [0.25, 0.25], 100.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let noise = Normal::new(0.0, 0.5).unwrap();
        let truth = Vector2::new(20.0, 5.0);

        let mut s = m.init_state(
            Vector2::new(truth[0] + noise.sample(&mut rng), truth[1] + noise.sample(&mut rng)),
            0.0,
        );
        for _ in 0..400 {
            s = kf_predict(&s, &m, 0.025).unwrap();
            let z = Vector2::new(
                truth[0] + noise.sample(&mut rng),
                truth[1] + noise.sample(&mut rng),
            );
            s = kf_update(&s, &m, z);
        }
        // Position error should be within 3 sigma of the steady-state
        // covariance (pre-run Monte-Carlo reference puts sigma ~ 0.1 m here).
        let sigma = s.p[(0, 0)].sqrt().max(s.p[(1, 1)].sqrt());
        let err = (s.position() - truth).norm();
        assert!(err < 3.0 * sigma * 2.0_f64.sqrt(), "err {err}, sigma {sigma}");
    }
}
