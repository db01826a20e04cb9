//! Uniform grids: the discrete metric spaces the solvers operate on.
//!
//! A grid never materializes its distance matrix. It is fully described by
//! the point count, the spacing `h` and the distance exponent `k`; the matrix
//! with entries `h^k |i-j|^k` (1D) or `h^k (|i-i'| + |j-j'|)^k` (2D Manhattan)
//! is only implied, and matrix-vector products against it are carried out by
//! the recursion in [`crate::multiply`].

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest implied distance entry before a precision warning is logged.
/// Entries near 1e15 leave fewer than two decimal digits of slack in f64,
/// so accumulated recursion intermediates start losing low-order bits.
pub const MAGNITUDE_WARN_THRESHOLD: f64 = 1e15;

/// 1D uniform grid of `size` points with spacing `spacing` and distance
/// exponent `power`: implied distances are `spacing^power * |i-j|^power`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformGrid1D<T> {
    size: usize,
    spacing: T,
    power: u32,
}

impl<T: Scalar> UniformGrid1D<T> {
    pub fn new(size: usize, spacing: T, power: u32) -> Result<Self> {
        if size < 1 {
            return Err(Error::ConfigInvalid {
                reason: "grid size must be at least 1".into(),
            });
        }
        if !(spacing > T::zero()) || !spacing.is_finite() {
            return Err(Error::ConfigInvalid {
                reason: format!("grid spacing must be positive and finite, got {spacing}"),
            });
        }
        if power < 1 {
            return Err(Error::ConfigInvalid {
                reason: "distance power must be at least 1".into(),
            });
        }
        let grid = Self {
            size,
            spacing,
            power,
        };
        grid.warn_if_large();
        Ok(grid)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn spacing(&self) -> T {
        self.spacing
    }

    pub fn power(&self) -> u32 {
        self.power
    }

    /// Largest implied distance entry, `(spacing * (size-1))^power`.
    pub fn magnitude_bound(&self, power: u32) -> f64 {
        let extent = self.spacing.to_f64().unwrap_or(f64::INFINITY) * (self.size.max(1) - 1) as f64;
        extent.powi(power as i32)
    }

    fn warn_if_large(&self) {
        let bound = self.magnitude_bound(self.power);
        if bound > MAGNITUDE_WARN_THRESHOLD {
            log::warn!(
                "1D grid distance entries reach {bound:.3e}; accumulated sums may lose precision"
            );
        }
    }
}

/// Square 2D uniform grid of `side * side` points, flattened column-major.
/// Implied distances are the `power`-th power of the Manhattan grid distance
/// scaled by `spacing^power`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformGrid2D<T> {
    side: usize,
    spacing: T,
    power: u32,
}

impl<T: Scalar> UniformGrid2D<T> {
    pub fn new(side: usize, spacing: T, power: u32) -> Result<Self> {
        if side < 1 {
            return Err(Error::ConfigInvalid {
                reason: "grid side must be at least 1".into(),
            });
        }
        if !(spacing > T::zero()) || !spacing.is_finite() {
            return Err(Error::ConfigInvalid {
                reason: format!("grid spacing must be positive and finite, got {spacing}"),
            });
        }
        if power < 1 {
            return Err(Error::ConfigInvalid {
                reason: "distance power must be at least 1".into(),
            });
        }
        let grid = Self {
            side,
            spacing,
            power,
        };
        let bound = grid.magnitude_bound(power);
        if bound > MAGNITUDE_WARN_THRESHOLD {
            log::warn!(
                "2D grid distance entries reach {bound:.3e}; accumulated sums may lose precision"
            );
        }
        Ok(grid)
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// Total point count `side^2`.
    pub fn points(&self) -> usize {
        self.side * self.side
    }

    pub fn spacing(&self) -> T {
        self.spacing
    }

    pub fn power(&self) -> u32 {
        self.power
    }

    /// Largest implied distance entry, `(spacing * 2(side-1))^power`.
    pub fn magnitude_bound(&self, power: u32) -> f64 {
        let extent =
            self.spacing.to_f64().unwrap_or(f64::INFINITY) * (2 * (self.side.max(1) - 1)) as f64;
        extent.powi(power as i32)
    }
}

/// Either grid kind, for code that is agnostic to the dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Grid<T> {
    Line(UniformGrid1D<T>),
    Square(UniformGrid2D<T>),
}

impl<T: Scalar> Grid<T> {
    /// Number of grid points (vector length for measures on this grid).
    pub fn points(&self) -> usize {
        match self {
            Grid::Line(g) => g.size(),
            Grid::Square(g) => g.points(),
        }
    }

    pub fn spacing(&self) -> T {
        match self {
            Grid::Line(g) => g.spacing(),
            Grid::Square(g) => g.spacing(),
        }
    }

    pub fn power(&self) -> u32 {
        match self {
            Grid::Line(g) => g.power(),
            Grid::Square(g) => g.power(),
        }
    }

    pub fn magnitude_bound(&self, power: u32) -> f64 {
        match self {
            Grid::Line(g) => g.magnitude_bound(power),
            Grid::Square(g) => g.magnitude_bound(power),
        }
    }
}

impl<T> From<UniformGrid1D<T>> for Grid<T> {
    fn from(g: UniformGrid1D<T>) -> Self {
        Grid::Line(g)
    }
}

impl<T> From<UniformGrid2D<T>> for Grid<T> {
    fn from(g: UniformGrid2D<T>) -> Self {
        Grid::Square(g)
    }
}
