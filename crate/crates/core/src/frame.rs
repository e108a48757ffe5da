//! Coordinate changes between the input system and the frame a chart is
//! built in.

use serde::Serialize;

/// One change of variables, written as `old = g(new)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FrameStep {
    /// `old = A new`, row-major.
    Linear { matrix: [[f64; 2]; 2] },
    /// `old = (u, v + F(u))` with `F` given by its power-series coefficients.
    Shear { series: Vec<f64> },
}

impl FrameStep {
    pub fn flip_y() -> Self {
        FrameStep::Linear {
            matrix: [[1.0, 0.0], [0.0, -1.0]],
        }
    }

    fn apply(&self, (u, v): (f64, f64)) -> (f64, f64) {
        match self {
            FrameStep::Linear { matrix: a } => (a[0][0] * u + a[0][1] * v, a[1][0] * u + a[1][1] * v),
            FrameStep::Shear { series } => {
                let f = series.iter().rev().fold(0.0, |acc, c| acc * u + c);
                (u, v + f)
            }
        }
    }

    fn det(&self) -> f64 {
        match self {
            FrameStep::Linear { matrix: a } => a[0][0] * a[1][1] - a[0][1] * a[1][0],
            FrameStep::Shear { .. } => 1.0,
        }
    }
}

/// Composite change from chart-frame coordinates back to the input frame.
/// Steps are stored in the order they were applied to the input system.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Frame {
    pub steps: Vec<FrameStep>,
}

impl Frame {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn is_identity(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn then(mut self, step: FrameStep) -> Self {
        self.steps.push(step);
        self
    }

    /// Maps a point of the chart frame to the input frame.
    pub fn to_input(&self, p: (f64, f64)) -> (f64, f64) {
        self.steps.iter().rev().fold(p, |acc, s| s.apply(acc))
    }

    /// Jacobian determinant of [`Frame::to_input`]; constant because every
    /// nonlinear step is a shear.
    pub fn det(&self) -> f64 {
        self.steps.iter().map(FrameStep::det).product()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composition_order() {
        let f = Frame::identity()
            .then(FrameStep::Shear {
                series: vec![0.0, 0.0, 1.0],
            })
            .then(FrameStep::Linear {
                matrix: [[0.5, 0.0], [0.0, -0.5]],
            });
        // new (2, 2) -> after scaling (1, -1) -> after shear (1, -1 + 1)
        assert_eq!(f.to_input((2.0, 2.0)), (1.0, 0.0));
        assert_eq!(f.det(), -0.25);
    }
}
