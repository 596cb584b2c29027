use serde::{Deserialize, Serialize};

use super::{Matrix, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum InitScheme {
    /// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`, fan-in taken as `cols`.
    UniformFanIn,
    Normal {
        std_dev: f64,
    },
}

/// Draws a `rows x cols` matrix; values come from `rng` in row-major order.
pub fn init_params(rows: usize, cols: usize, scheme: InitScheme, rng: &mut RngStream) -> Matrix {
    let mut m = Matrix::zeros(rows, cols);
    match scheme {
        InitScheme::UniformFanIn => {
            let bound = 1.0 / libm::sqrt(cols.max(1) as f64);
            for v in m.as_mut_slice() {
                *v = rng.uniform(-bound, bound);
            }
        }
        InitScheme::Normal { std_dev } => {
            for v in m.as_mut_slice() {
                *v = rng.normal(0.0, std_dev);
            }
        }
    }
    m
}
