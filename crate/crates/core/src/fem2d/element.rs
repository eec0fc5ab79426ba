use nalgebra::SMatrix;

use crate::error::{Error, Result};

pub type ElementMatrix = SMatrix<f64, 8, 8>;

/// Plane-stress bilinear stiffness of a unit square element with unit thickness.
///
/// Closed form of the exact (2×2 Gauss) integral, dofs ordered
/// `(x, y)` per node counter-clockwise from the lower-left corner.
pub fn element_stiffness(e: f64, nu: f64) -> Result<ElementMatrix> {
    if !(e.is_finite() && e > 0.0) {
        return Err(Error::InvalidParameter(format!("E = {e} must be positive")));
    }
    if !(0.0..0.5).contains(&nu) {
        return Err(Error::InvalidParameter(format!("nu = {nu} must lie in [0, 0.5)")));
    }
    let k = [
        0.5 - nu / 6.0,
        0.125 + nu / 8.0,
        -0.25 - nu / 12.0,
        -0.125 + 3.0 * nu / 8.0,
        -0.25 + nu / 12.0,
        -0.125 - nu / 8.0,
        nu / 6.0,
        0.125 - 3.0 * nu / 8.0,
    ];
    #[rustfmt::skip]
    let idx: [[usize; 8]; 8] = [
        [0, 1, 2, 3, 4, 5, 6, 7],
        [1, 0, 7, 6, 5, 4, 3, 2],
        [2, 7, 0, 5, 6, 3, 4, 1],
        [3, 6, 5, 0, 7, 2, 1, 4],
        [4, 5, 6, 7, 0, 1, 2, 3],
        [5, 4, 3, 2, 1, 0, 7, 6],
        [6, 3, 4, 1, 2, 7, 0, 5],
        [7, 2, 1, 4, 3, 6, 5, 0],
    ];
    let scale = e / (1.0 - nu * nu);
    Ok(ElementMatrix::from_fn(|i, j| scale * k[idx[i][j]]))
}
