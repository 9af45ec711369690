//! Three-source surface-crack model: two edge emitters at `(±δx/2, 0, 0)`
//! and one at the crack floor `(0, 0, −δz)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::RMatrix;
use crate::psf::{labels, Axis, ParamIndex, PointSource, Scene};
use crate::qfim::Jacobian;

pub const WIDTH: &str = "dx";
pub const DEPTH: &str = "dz";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrackSpec {
    pub delta_x: f64,
    pub delta_z: f64,
    pub kzr: f64,
}

impl CrackSpec {
    pub fn new(delta_x: f64, delta_z: f64, kzr: f64) -> Result<Self> {
        let spec = Self { delta_x, delta_z, kzr };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_x.is_finite() && self.delta_x >= 0.0) || !(self.delta_z.is_finite() && self.delta_z >= 0.0) {
            return Err(Error::InvalidScene(format!(
                "crack width and depth must be finite and nonnegative, got ({}, {})",
                self.delta_x, self.delta_z
            )));
        }
        if !(self.kzr.is_finite() && self.kzr > 0.0) {
            return Err(Error::InvalidScene(format!("kzr must be positive and finite, got {}", self.kzr)));
        }
        Ok(())
    }

    /// Left edge, right edge, floor.
    pub fn sources(&self) -> [PointSource; 3] {
        [
            PointSource::new(-self.delta_x / 2.0, 0.0, 0.0),
            PointSource::new(self.delta_x / 2.0, 0.0, 0.0),
            PointSource::new(0.0, 0.0, -self.delta_z),
        ]
    }

    /// The same crack with zero depth (a flat surface with two marked edges).
    pub fn flat(&self) -> Self {
        Self { delta_z: 0.0, ..*self }
    }
}

pub fn build_crack(spec: &CrackSpec) -> Result<Scene> {
    spec.validate()?;
    Scene::new(spec.sources().to_vec(), spec.kzr)
}

/// `(δx₁, δx₂, δz₃)`: the displacements the crack geometry moves.
pub fn crack_params() -> Vec<ParamIndex> {
    vec![ParamIndex::new(0, Axis::X), ParamIndex::new(1, Axis::X), ParamIndex::new(2, Axis::Z)]
}

/// Maps the `(δx₁, δx₂, δz₃)` information to `(δx, δz)`.
pub fn crack_jacobian() -> Jacobian {
    let m = RMatrix::from_row_slice(2, 3, &[-0.5, 0.5, 0.0, 0.0, 0.0, -1.0]);
    Jacobian::new(m, labels(&crack_params()), vec![WIDTH.into(), DEPTH.into()]).expect("crack Jacobian has full rank")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometry() {
        let s = build_crack(&CrackSpec::new(2.0, 1.0, 100.0).unwrap()).unwrap();
        assert_eq!(s.sources()[0], PointSource::new(-1.0, 0.0, 0.0));
        assert_eq!(s.sources()[1], PointSource::new(1.0, 0.0, 0.0));
        assert_eq!(s.sources()[2], PointSource::new(0.0, 0.0, -1.0));
    }

    #[test]
    fn flat_crack_is_a_valid_scene() {
        let s = build_crack(&CrackSpec::new(0.0, 0.0, 100.0).unwrap()).unwrap();
        assert!(s.coincident_pair().is_some());
    }

    #[test]
    fn negative_width_is_rejected() {
        assert!(CrackSpec::new(-0.1, 0.0, 100.0).is_err());
    }

    #[test]
    fn jacobian_labels() {
        let j = crack_jacobian();
        assert_eq!(j.source_params, vec!["dx1", "dx2", "dz3"]);
        assert_eq!(j.target_params, vec!["dx", "dz"]);
    }
}
