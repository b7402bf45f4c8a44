//! Uniform rectangular grids for cell-centered fields.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A uniform rectangular grid over `[0, extent_x] x [0, extent_y]`,
/// discretized into `nx * ny` cells. Fields live at cell centers and are
/// stored x-fastest: `index = iy * nx + ix`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    extent: [f64; 2],
    cells: [usize; 2],
}

impl SpatialGrid {
    pub fn new(extent: [f64; 2], cells: [usize; 2]) -> Result<Self> {
        if extent[0] <= 0.0 || extent[1] <= 0.0 {
            return Err(Error::InvalidArgument("grid extents must be positive".into()));
        }
        if cells[0] == 0 || cells[1] == 0 {
            return Err(Error::InvalidArgument("grid must have at least one cell per axis".into()));
        }
        Ok(Self { extent, cells })
    }

    /// Square grid over `[0, extent]^2` with `n x n` cells.
    pub fn square(extent: f64, n: usize) -> Result<Self> {
        Self::new([extent, extent], [n, n])
    }

    pub fn extent(&self) -> [f64; 2] {
        self.extent
    }

    pub fn cells(&self) -> [usize; 2] {
        self.cells
    }

    pub fn nx(&self) -> usize {
        self.cells[0]
    }

    pub fn ny(&self) -> usize {
        self.cells[1]
    }

    pub fn n_points(&self) -> usize {
        self.cells[0] * self.cells[1]
    }

    pub fn dx(&self) -> f64 {
        self.extent[0] / self.cells[0] as f64
    }

    pub fn dy(&self) -> f64 {
        self.extent[1] / self.cells[1] as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dy()
    }

    /// Total domain area.
    pub fn area(&self) -> f64 {
        self.extent[0] * self.extent[1]
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        debug_assert!(ix < self.nx() && iy < self.ny());
        iy * self.nx() + ix
    }

    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx(), idx / self.nx())
    }

    pub fn center(&self, idx: usize) -> (f64, f64) {
        let (ix, iy) = self.coords(idx);
        ((ix as f64 + 0.5) * self.dx(), (iy as f64 + 0.5) * self.dy())
    }

    /// Index of the cell obtained by rotating cell `idx` by 180 degrees
    /// about the domain center.
    pub fn rotated_index(&self, idx: usize) -> usize {
        let (ix, iy) = self.coords(idx);
        self.index(self.nx() - 1 - ix, self.ny() - 1 - iy)
    }

    /// Interior lattice of `k x k` probe cells, evenly spaced. Mirrors the
    /// nine-location comparison layout when `k = 3`.
    pub fn probe_lattice(&self, k: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(k * k);
        for j in 0..k {
            for i in 0..k {
                let ix = (self.nx() * (i + 1)) / (k + 1);
                let iy = (self.ny() * (j + 1)) / (k + 1);
                out.push(self.index(ix.min(self.nx() - 1), iy.min(self.ny() - 1)));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centers_and_areas() {
        let g = SpatialGrid::square(400.0, 40).unwrap();
        assert_eq!(g.n_points(), 1600);
        assert_eq!(g.cell_area(), 100.0);
        assert_eq!(g.center(0), (5.0, 5.0));
        assert_eq!(g.center(g.index(39, 39)), (395.0, 395.0));
    }

    #[test]
    fn rotation_is_involutive() {
        let g = SpatialGrid::new([100.0, 200.0], [7, 5]).unwrap();
        for idx in 0..g.n_points() {
            assert_eq!(g.rotated_index(g.rotated_index(idx)), idx);
        }
    }

    #[test]
    fn probe_lattice_interior() {
        let g = SpatialGrid::square(400.0, 20).unwrap();
        let probes = g.probe_lattice(3);
        assert_eq!(probes.len(), 9);
        for p in probes {
            let (ix, iy) = g.coords(p);
            assert!(ix > 0 && ix < 19 && iy > 0 && iy < 19);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(SpatialGrid::new([0.0, 1.0], [4, 4]).is_err());
        assert!(SpatialGrid::new([1.0, 1.0], [0, 4]).is_err());
    }
}
