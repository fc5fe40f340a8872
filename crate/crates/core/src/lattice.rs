//! Site indexing and neighbor enumeration for the unbounded lattice `Z^d`,
//! the periodic torus used by forward simulations, and the centered boxes
//! used by the truncated linear solvers.
//!
//! Neighbor order is fixed everywhere: `+e1, -e1, +e2, -e2, ...`.

use std::fmt;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LatticeError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("torus side length {0} must be even and at least 4")]
    BadSide(usize),
    #[error("box radius {0} must be at least 1")]
    BadRadius(usize),
    #[error("lattice coordinate overflow")]
    CoordinateOverflow,
    #[error("index {index} out of range for {len} sites")]
    IndexOutOfRange { index: usize, len: usize },
}

/// A point of `Z^d`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Site(SmallVec<[i32; 4]>);

impl Site {
    pub fn new(coords: impl IntoIterator<Item = i32>) -> Self {
        Site(coords.into_iter().collect())
    }

    pub fn origin(dim: usize) -> Self {
        Site(SmallVec::from_elem(0, dim))
    }

    /// The unit vector along `axis` (0-based), so `unit(d, 0)` is `e1`.
    pub fn unit(dim: usize, axis: usize) -> Self {
        let mut s = Self::origin(dim);
        s.0[axis] = 1;
        s
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i32] {
        &self.0
    }

    pub fn is_origin(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    pub fn l1_norm(&self) -> u64 {
        self.0.iter().map(|&c| u64::from(c.unsigned_abs())).sum()
    }

    /// Neighbor in direction `slot`, where slot `2k` is `+e_{k+1}` and
    /// slot `2k+1` is `-e_{k+1}`.
    pub fn neighbor(&self, slot: usize) -> Result<Site, LatticeError> {
        let axis = slot / 2;
        if axis >= self.dim() {
            return Err(LatticeError::IndexOutOfRange {
                index: slot,
                len: 2 * self.dim(),
            });
        }
        let mut out = self.clone();
        let step = if slot % 2 == 0 { 1 } else { -1 };
        out.0[axis] = out.0[axis]
            .checked_add(step)
            .ok_or(LatticeError::CoordinateOverflow)?;
        Ok(out)
    }

    /// All `2d` neighbors in the fixed order.
    pub fn neighbors(&self) -> Result<Vec<Site>, LatticeError> {
        (0..2 * self.dim()).map(|s| self.neighbor(s)).collect()
    }

    fn check_dim(&self, dim: usize) -> Result<(), LatticeError> {
        if self.dim() != dim {
            return Err(LatticeError::DimensionMismatch {
                expected: dim,
                actual: self.dim(),
            });
        }
        Ok(())
    }
}

impl fmt::Debug for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Either the periodic torus or the unbounded lattice.
#[derive(Debug, Clone, Copy)]
pub enum Geometry<'a> {
    Torus(&'a Torus),
    Unbounded { dim: usize },
}

/// Neighbors of `site` in the given geometry, in the fixed slot order.
pub fn neighbors(site: &Site, geometry: Geometry<'_>) -> Result<Vec<Site>, LatticeError> {
    match geometry {
        Geometry::Unbounded { dim } => {
            site.check_dim(dim)?;
            site.neighbors()
        }
        Geometry::Torus(torus) => {
            let idx = torus.index(site)?;
            Ok(torus
                .neighbors(idx)
                .iter()
                .map(|&n| torus.site(n as usize))
                .collect())
        }
    }
}

/// The torus `(Z / L Z)^d` with a precomputed neighbor table.
#[derive(Debug, Clone)]
pub struct Torus {
    dim: usize,
    side: usize,
    len: usize,
    table: Vec<u32>,
}

impl Torus {
    pub fn new(dim: usize, side: usize) -> Result<Self, LatticeError> {
        if dim == 0 {
            return Err(LatticeError::ZeroDimension);
        }
        if side < 4 || side % 2 != 0 {
            return Err(LatticeError::BadSide(side));
        }
        let len = side
            .checked_pow(dim as u32)
            .filter(|&n| n <= u32::MAX as usize)
            .ok_or(LatticeError::CoordinateOverflow)?;
        let mut table = Vec::with_capacity(len * 2 * dim);
        let mut stride = 1usize;
        let mut strides = Vec::with_capacity(dim);
        for _ in 0..dim {
            strides.push(stride);
            stride *= side;
        }
        for idx in 0..len {
            for &s in &strides {
                let c = (idx / s) % side;
                let up = if c + 1 == side { idx + s - side * s } else { idx + s };
                let down = if c == 0 { idx + side * s - s } else { idx - s };
                table.push(up as u32);
                table.push(down as u32);
            }
        }
        Ok(Torus {
            dim,
            side,
            len,
            table,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// Number of sites, `L^d`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn degree(&self) -> usize {
        2 * self.dim
    }

    /// Neighbor indices of `idx` in slot order.
    #[inline]
    pub fn neighbors(&self, idx: usize) -> &[u32] {
        let k = 2 * self.dim;
        &self.table[idx * k..(idx + 1) * k]
    }

    #[inline]
    pub fn neighbor(&self, idx: usize, slot: usize) -> usize {
        self.table[idx * 2 * self.dim + slot] as usize
    }

    /// Linear index of a site; coordinates are reduced modulo `L` first.
    pub fn index(&self, site: &Site) -> Result<usize, LatticeError> {
        site.check_dim(self.dim)?;
        let side = self.side as i64;
        let mut idx = 0usize;
        for &c in site.coords().iter().rev() {
            idx = idx * self.side + i64::from(c).rem_euclid(side) as usize;
        }
        Ok(idx)
    }

    /// Inverse of [`Torus::index`], with coordinates in `[0, L)`.
    pub fn site(&self, mut idx: usize) -> Site {
        let mut coords = SmallVec::<[i32; 4]>::with_capacity(self.dim);
        for _ in 0..self.dim {
            coords.push((idx % self.side) as i32);
            idx /= self.side;
        }
        Site(coords)
    }

    pub fn origin(&self) -> usize {
        0
    }
}

/// The centered box `[-M, M]^d`. Sites with some `|x_k| = M` form the
/// boundary layer; everything else is interior and has all `2d`
/// neighbors inside the box.
#[derive(Debug, Clone)]
pub struct CenteredBox {
    dim: usize,
    radius: usize,
    side: usize,
    len: usize,
    strides: Vec<usize>,
}

impl CenteredBox {
    pub fn new(dim: usize, radius: usize) -> Result<Self, LatticeError> {
        if dim == 0 {
            return Err(LatticeError::ZeroDimension);
        }
        if radius == 0 {
            return Err(LatticeError::BadRadius(radius));
        }
        let side = 2 * radius + 1;
        let len = side
            .checked_pow(dim as u32)
            .ok_or(LatticeError::CoordinateOverflow)?;
        let strides = (0..dim).map(|k| side.pow(k as u32)).collect();
        Ok(CenteredBox {
            dim,
            radius,
            side,
            len,
            strides,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    /// Index of `site`, or `None` when it lies outside the box.
    pub fn index(&self, site: &Site) -> Option<usize> {
        if site.dim() != self.dim {
            return None;
        }
        let m = self.radius as i64;
        let mut idx = 0usize;
        for (k, &c) in site.coords().iter().enumerate() {
            let c = i64::from(c);
            if c.abs() > m {
                return None;
            }
            idx += (c + m) as usize * self.strides[k];
        }
        Some(idx)
    }

    pub fn site(&self, mut idx: usize) -> Site {
        let m = self.radius as i32;
        let mut coords = SmallVec::<[i32; 4]>::with_capacity(self.dim);
        for _ in 0..self.dim {
            coords.push((idx % self.side) as i32 - m);
            idx /= self.side;
        }
        Site(coords)
    }

    pub fn origin(&self) -> usize {
        self.strides.iter().map(|s| s * self.radius).sum()
    }

    pub fn is_boundary(&self, mut idx: usize) -> bool {
        for _ in 0..self.dim {
            let c = idx % self.side;
            if c == 0 || c + 1 == self.side {
                return true;
            }
            idx /= self.side;
        }
        false
    }

    /// Boundary mask for every index.
    pub fn boundary_mask(&self) -> Vec<bool> {
        (0..self.len).map(|i| self.is_boundary(i)).collect()
    }

    /// Neighbor of `idx` in `slot`, or `None` if it falls outside the box.
    pub fn neighbor(&self, idx: usize, slot: usize) -> Option<usize> {
        let axis = slot / 2;
        let s = self.strides[axis];
        let c = (idx / s) % self.side;
        if slot % 2 == 0 {
            (c + 1 < self.side).then(|| idx + s)
        } else {
            (c > 0).then(|| idx - s)
        }
    }

    /// Chebyshev distance of `idx` from the origin.
    pub fn sup_norm(&self, mut idx: usize) -> usize {
        let mut best = 0;
        for _ in 0..self.dim {
            let c = (idx % self.side) as i64 - self.radius as i64;
            best = best.max(c.unsigned_abs() as usize);
            idx /= self.side;
        }
        best
    }
}
