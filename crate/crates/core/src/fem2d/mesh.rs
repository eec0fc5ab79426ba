use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Structured grid of `nelx × nely` unit square elements.
///
/// Nodes are numbered column by column from the top-left corner,
/// `node = ix·(nely + 1) + iy` with `iy` counted downwards; node `k` owns the
/// degrees of freedom `2k` (x) and `2k + 1` (y). Elements follow the same
/// column-major order, `e = ex·nely + ey`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mesh2D {
    pub nelx: usize,
    pub nely: usize,
}

impl Mesh2D {
    pub fn new(nelx: usize, nely: usize) -> Result<Self> {
        if nelx == 0 || nely == 0 {
            return Err(Error::InvalidParameter(format!(
                "mesh {nelx}x{nely} needs at least one element per direction"
            )));
        }
        Ok(Self { nelx, nely })
    }

    pub fn n_elements(&self) -> usize {
        self.nelx * self.nely
    }

    pub fn n_nodes(&self) -> usize {
        (self.nelx + 1) * (self.nely + 1)
    }

    /// `m = 2(nelx + 1)(nely + 1)`.
    pub fn n_dofs(&self) -> usize {
        2 * self.n_nodes()
    }

    pub fn node(&self, ix: usize, iy: usize) -> usize {
        ix * (self.nely + 1) + iy
    }

    pub fn element(&self, ex: usize, ey: usize) -> usize {
        ex * self.nely + ey
    }

    /// `(ex, ey)` of element `e`.
    pub fn element_coords(&self, e: usize) -> (usize, usize) {
        (e / self.nely, e % self.nely)
    }

    /// Degrees of freedom of element `e`, counter-clockwise from the lower-left
    /// node, matching the node order of [`super::element_stiffness`].
    pub fn element_dofs(&self, e: usize) -> [usize; 8] {
        let (ex, ey) = self.element_coords(e);
        let n1 = self.node(ex, ey);
        let n2 = self.node(ex + 1, ey);
        [
            2 * n1 + 2,
            2 * n1 + 3,
            2 * n2 + 2,
            2 * n2 + 3,
            2 * n2,
            2 * n2 + 1,
            2 * n1,
            2 * n1 + 1,
        ]
    }
}
