//! Structured rectangular grids.

use crate::{Error, Result};

/// Tensor-product partition of an axis-aligned rectangle.
///
/// Cell `(i, j)` is `[x_i, x_{i+1}] x [y_j, y_{j+1}]`; cells are numbered
/// `j * nx + i`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    x_coords: Vec<f64>,
    y_coords: Vec<f64>,
    level: Option<u32>,
}

/// Affine map from the reference square `[-1,1]^2` onto one cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellGeometry {
    pub x0: f64,
    pub y0: f64,
    pub hx: f64,
    pub hy: f64,
}

impl CellGeometry {
    pub fn map(&self, xi: f64, eta: f64) -> (f64, f64) {
        (
            self.x0 + 0.5 * (xi + 1.0) * self.hx,
            self.y0 + 0.5 * (eta + 1.0) * self.hy,
        )
    }

    pub fn to_reference(&self, x: f64, y: f64) -> (f64, f64) {
        (
            2.0 * (x - self.x0) / self.hx - 1.0,
            2.0 * (y - self.y0) / self.hy - 1.0,
        )
    }

    pub fn jacobian_det(&self) -> f64 {
        0.25 * self.hx * self.hy
    }

    /// `d(xi)/dx` and `d(eta)/dy`.
    pub fn inverse_jacobian(&self) -> [f64; 2] {
        [2.0 / self.hx, 2.0 / self.hy]
    }

    pub fn area(&self) -> f64 {
        self.hx * self.hy
    }

    pub fn diameter(&self) -> f64 {
        self.hx.max(self.hy)
    }
}

impl Mesh {
    /// Uniform `2^(level-1) x 2^(level-1)` grid on the unit square.
    pub fn build_uniform(level: u32) -> Result<Self> {
        if level == 0 || level > 16 {
            return Err(Error::InvalidLevel(level));
        }
        let n = 1usize << (level - 1);
        let coords: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
        Ok(Self {
            x_coords: coords.clone(),
            y_coords: coords,
            level: Some(level),
        })
    }

    pub fn from_coords(x_coords: Vec<f64>, y_coords: Vec<f64>) -> Result<Self> {
        for (name, c) in [("x", &x_coords), ("y", &y_coords)] {
            if c.len() < 2 {
                return Err(Error::InvalidMesh(format!("{name} needs at least two coordinates")));
            }
            if c.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::InvalidMesh(format!("{name} coordinates not strictly increasing")));
            }
        }
        Ok(Self {
            x_coords,
            y_coords,
            level: None,
        })
    }

    pub fn x_coords(&self) -> &[f64] {
        &self.x_coords
    }

    pub fn y_coords(&self) -> &[f64] {
        &self.y_coords
    }

    /// Refinement level for grids from [`Mesh::build_uniform`].
    pub fn level(&self) -> Option<u32> {
        self.level
    }

    pub fn nx(&self) -> usize {
        self.x_coords.len() - 1
    }

    pub fn ny(&self) -> usize {
        self.y_coords.len() - 1
    }

    pub fn num_cells(&self) -> usize {
        self.nx() * self.ny()
    }

    pub fn cell_index(&self, i: usize, j: usize) -> usize {
        j * self.nx() + i
    }

    pub fn cell_geometry(&self, i: usize, j: usize) -> Result<CellGeometry> {
        if i >= self.nx() || j >= self.ny() {
            return Err(Error::CellOutOfRange {
                i,
                j,
                nx: self.nx(),
                ny: self.ny(),
            });
        }
        Ok(self.geometry_unchecked(i, j))
    }

    pub(crate) fn geometry_unchecked(&self, i: usize, j: usize) -> CellGeometry {
        CellGeometry {
            x0: self.x_coords[i],
            y0: self.y_coords[j],
            hx: self.x_coords[i + 1] - self.x_coords[i],
            hy: self.y_coords[j + 1] - self.y_coords[j],
        }
    }

    /// Iterates `(i, j, geometry)` in cell-number order.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, CellGeometry)> + '_ {
        let nx = self.nx();
        (0..self.num_cells()).map(move |c| {
            let (i, j) = (c % nx, c / nx);
            (i, j, self.geometry_unchecked(i, j))
        })
    }

    /// Largest cell diameter.
    pub fn h(&self) -> f64 {
        let max_gap = |c: &[f64]| c.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        max_gap(&self.x_coords).max(max_gap(&self.y_coords))
    }

    /// Bisects every cell in both directions.
    pub fn refine(&self) -> Self {
        let bisect = |c: &[f64]| {
            let mut out = Vec::with_capacity(2 * c.len() - 1);
            for w in c.windows(2) {
                out.push(w[0]);
                out.push(0.5 * (w[0] + w[1]));
            }
            out.push(*c.last().unwrap());
            out
        };
        Self {
            x_coords: bisect(&self.x_coords),
            y_coords: bisect(&self.y_coords),
            level: self.level.map(|l| l + 1),
        }
    }

    /// Cell containing `(x, y)`; points on interior lines go to the cell on
    /// the upper/right side, points on the outer boundary are clamped in.
    pub fn locate(&self, x: f64, y: f64) -> (usize, usize) {
        let find = |c: &[f64], t: f64| {
            let n = c.len() - 1;
            let pos = c.partition_point(|&v| v <= t);
            pos.saturating_sub(1).min(n - 1)
        };
        (find(&self.x_coords, x), find(&self.y_coords, y))
    }
}
