//! Deterministic mappings between scene space and auditory space.
//!
//! A sound source at scene position `s` heard by a microphone pair produces
//! an interaural time difference (ITD) of `(‖s−M_L‖ − ‖s−M_R‖)/ν` under
//! direct propagation at constant sound speed `ν`. Because the microphone
//! positions are measured by hand, an affine correction `c1·itd + c0` is
//! applied on top; its coefficients come from a least-squares calibration
//! against observed (position, ITD) pairs.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in scene (cyclopean) coordinates, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenePoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl ScenePoint {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn from_vector(v: Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    /// Euclidean distance to another point.
    pub fn distance(&self, other: &ScenePoint) -> f64 {
        (self.to_vector() - other.to_vector()).norm()
    }
}

/// A 1D auditory observation: an interaural time difference in seconds.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct ItdValue(pub f64);

impl ItdValue {
    pub fn seconds(&self) -> f64 {
        self.0
    }
}

/// Microphone pair geometry, sound speed and affine calibration coefficients.
///
/// `c1` and `c0` default to the identity calibration (1, 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicPairConfig {
    pub mic_left: ScenePoint,
    pub mic_right: ScenePoint,
    /// Sound speed in m/s.
    pub sound_speed: f64,
    /// Multiplicative calibration coefficient (dimensionless).
    pub c1: f64,
    /// Additive calibration coefficient (seconds).
    pub c0: f64,
}

impl Default for MicPairConfig {
    /// A head-mounted pair: microphones 10 cm apart on the x axis,
    /// sound speed 343 m/s, identity calibration.
    fn default() -> Self {
        Self {
            mic_left: ScenePoint::new(-0.05, 0.0, 0.0),
            mic_right: ScenePoint::new(0.05, 0.0, 0.0),
            sound_speed: 343.0,
            c1: 1.0,
            c0: 0.0,
        }
    }
}

impl MicPairConfig {
    /// Distance between the two microphones, meters.
    pub fn baseline(&self) -> f64 {
        self.mic_left.distance(&self.mic_right)
    }

    /// Largest reachable |raw ITD|: `baseline / sound_speed`.
    pub fn raw_itd_bound(&self) -> f64 {
        self.baseline() / self.sound_speed
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mic_left.is_finite() || !self.mic_right.is_finite() {
            return Err(Error::InvalidInput(
                "microphone positions must be finite".into(),
            ));
        }
        if !(self.sound_speed > 0.0) || !self.sound_speed.is_finite() {
            return Err(Error::InvalidInput(format!(
                "sound_speed must be positive and finite, got {}",
                self.sound_speed
            )));
        }
        if self.baseline() == 0.0 {
            return Err(Error::InvalidInput(
                "microphones must not coincide (zero baseline)".into(),
            ));
        }
        if self.c1 == 0.0 || !self.c1.is_finite() || !self.c0.is_finite() {
            return Err(Error::InvalidInput(format!(
                "calibration coefficients must be finite with c1 != 0, got c1={} c0={}",
                self.c1, self.c0
            )));
        }
        Ok(())
    }

    /// Raw ITD of a source at `s`: `(‖s−M_L‖ − ‖s−M_R‖)/ν`.
    ///
    /// Bounded in magnitude by `baseline/ν` (triangle inequality).
    pub fn raw_itd(&self, s: &ScenePoint) -> Result<ItdValue> {
        self.validate()?;
        if !s.is_finite() {
            return Err(Error::InvalidInput(format!(
                "scene point must be finite, got ({}, {}, {})",
                s.x, s.y, s.z
            )));
        }
        let dl = s.distance(&self.mic_left);
        let dr = s.distance(&self.mic_right);
        Ok(ItdValue((dl - dr) / self.sound_speed))
    }

    /// Affine-corrected ITD: `c1·raw_itd(s) + c0`.
    pub fn corrected_itd(&self, s: &ScenePoint) -> Result<ItdValue> {
        let raw = self.raw_itd(s)?;
        Ok(ItdValue(self.c1 * raw.0 + self.c0))
    }

    /// Project a batch of 3D points into the auditory space.
    pub fn project_points(&self, points: &[ScenePoint]) -> Result<Vec<ItdValue>> {
        points.iter().map(|p| self.corrected_itd(p)).collect()
    }
}

/// Least-squares fit of the affine calibration coefficients.
///
/// Regresses the observed ITDs against the raw mapping `raw_itd(s, cfg0)`
/// and returns `cfg0` with `c1`, `c0` replaced by the ordinary least-squares
/// solution. Requires at least two pairs with distinct raw ITD values.
pub fn calibrate(pairs: &[(ScenePoint, ItdValue)], cfg0: &MicPairConfig) -> Result<MicPairConfig> {
    cfg0.validate()?;
    if pairs.len() < 2 {
        return Err(Error::DegenerateFit(format!(
            "calibration needs at least 2 pairs, got {}",
            pairs.len()
        )));
    }

    let n = pairs.len() as f64;
    let mut sx = 0.0;
    let mut sy = 0.0;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (s, itd) in pairs {
        if !itd.0.is_finite() {
            return Err(Error::InvalidInput("observed ITD must be finite".into()));
        }
        let x = cfg0.raw_itd(s)?.0;
        let y = itd.0;
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }

    // Normal equations of the 2-parameter fit. Degenerate when the raw ITDs
    // carry no spread.
    let det = n * sxx - sx * sx;
    let spread = sxx - sx * sx / n;
    if spread <= 1e-30 || det == 0.0 {
        return Err(Error::DegenerateFit(
            "all raw ITD values identical; cannot fit an affine correction".into(),
        ));
    }
    let c1 = (n * sxy - sx * sy) / det;
    let c0 = (sy - c1 * sx) / n;
    if c1 == 0.0 {
        return Err(Error::DegenerateFit(
            "fitted c1 is zero; observed ITDs carry no dependence on the mapping".into(),
        ));
    }

    let mut cfg = cfg0.clone();
    cfg.c1 = c1;
    cfg.c0 = c0;
    Ok(cfg)
}

/// Root-mean-square calibration residual of `cfg` over `pairs`.
pub fn calibration_rms(pairs: &[(ScenePoint, ItdValue)], cfg: &MicPairConfig) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::InvalidInput("no calibration pairs".into()));
    }
    let mut ss = 0.0;
    for (s, itd) in pairs {
        let pred = cfg.corrected_itd(s)?.0;
        ss += (pred - itd.0).powi(2);
    }
    Ok((ss / pairs.len() as f64).sqrt())
}
