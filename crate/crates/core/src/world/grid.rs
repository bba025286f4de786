use crate::Vec3;

use super::WorldError;

/// Integer voxel coordinates `(ix, iy, iz)`.
pub type Index3 = [usize; 3];

/// Dense boolean occupancy grid.
///
/// Voxel `i` covers the half-open cell `origin + i * resolution .. origin + (i + 1) * resolution`
/// on each axis; its representative point is the cell center.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    origin: Vec3,
    resolution: f64,
    dims: [usize; 3],
    occupied: Vec<bool>,
}

impl VoxelGrid {
    /// An all-free grid.
    pub fn new(origin: Vec3, resolution: f64, dims: [usize; 3]) -> Result<Self, WorldError> {
        if !(resolution > 0.0) || !resolution.is_finite() {
            return Err(WorldError::InvalidGrid(format!(
                "resolution must be positive, got {resolution}"
            )));
        }
        if dims.contains(&0) {
            return Err(WorldError::InvalidGrid(format!("dims must all be >= 1, got {dims:?}")));
        }
        if !origin.iter().all(|v| v.is_finite()) {
            return Err(WorldError::InvalidGrid("origin must be finite".into()));
        }
        let len = dims[0]
            .checked_mul(dims[1])
            .and_then(|v| v.checked_mul(dims[2]))
            .ok_or_else(|| WorldError::InvalidGrid(format!("dims {dims:?} overflow")))?;
        Ok(Self {
            origin,
            resolution,
            dims,
            occupied: vec![false; len],
        })
    }

    /// Builds a grid from per-voxel occupancy probabilities (storage order, x fastest).
    /// A voxel is occupied when its probability is at least `eps_occ`.
    pub fn from_probabilities(
        origin: Vec3,
        resolution: f64,
        dims: [usize; 3],
        probabilities: &[f64],
        eps_occ: f64,
    ) -> Result<Self, WorldError> {
        let mut grid = Self::new(origin, resolution, dims)?;
        if probabilities.len() != grid.len() {
            return Err(WorldError::InvalidGrid(format!(
                "expected {} probabilities, got {}",
                grid.len(),
                probabilities.len()
            )));
        }
        for (cell, &p) in grid.occupied.iter_mut().zip(probabilities) {
            *cell = p >= eps_occ;
        }
        Ok(grid)
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.occupied.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupied.is_empty()
    }

    /// Lower corner of the mapped volume.
    pub fn min_corner(&self) -> Vec3 {
        self.origin
    }

    /// Upper corner of the mapped volume.
    pub fn max_corner(&self) -> Vec3 {
        self.origin + Vec3::new(self.dims[0] as f64, self.dims[1] as f64, self.dims[2] as f64) * self.resolution
    }

    /// Length of the bounding-box diagonal.
    pub fn diameter(&self) -> f64 {
        (self.max_corner() - self.min_corner()).norm()
    }

    #[inline]
    pub fn linear(&self, idx: Index3) -> usize {
        idx[0] + self.dims[0] * (idx[1] + self.dims[1] * idx[2])
    }

    #[inline]
    pub fn unlinear(&self, i: usize) -> Index3 {
        let x = i % self.dims[0];
        let rest = i / self.dims[0];
        [x, rest % self.dims[1], rest / self.dims[1]]
    }

    pub fn in_range(&self, idx: Index3) -> bool {
        idx.iter().zip(&self.dims).all(|(&i, &d)| i < d)
    }

    #[inline]
    pub fn is_occupied(&self, idx: Index3) -> bool {
        self.occupied[self.linear(idx)]
    }

    #[inline]
    pub fn is_occupied_linear(&self, i: usize) -> bool {
        self.occupied[i]
    }

    pub fn set_occupied(&mut self, idx: Index3, value: bool) {
        let i = self.linear(idx);
        self.occupied[i] = value;
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied.iter().filter(|&&o| o).count()
    }

    /// Occupied voxels in storage order (z slowest, x fastest).
    pub fn iter_occupied(&self) -> impl Iterator<Item = Index3> + '_ {
        self.occupied
            .iter()
            .enumerate()
            .filter(|(_, &o)| o)
            .map(|(i, _)| self.unlinear(i))
    }

    /// Center of voxel `idx`.
    pub fn index_to_world(&self, idx: Index3) -> Vec3 {
        self.origin + Vec3::new(idx[0] as f64 + 0.5, idx[1] as f64 + 0.5, idx[2] as f64 + 0.5) * self.resolution
    }

    /// True when `p` lies inside the closed mapped volume.
    pub fn contains(&self, p: &Vec3) -> bool {
        let lo = self.min_corner();
        let hi = self.max_corner();
        (0..3).all(|a| p[a] >= lo[a] && p[a] <= hi[a])
    }

    /// Voxel containing `p`; points on the upper boundary face map to the last voxel.
    pub fn world_to_index(&self, p: &Vec3) -> Option<Index3> {
        if !self.contains(p) {
            return None;
        }
        let mut idx = [0usize; 3];
        for a in 0..3 {
            let u = ((p[a] - self.origin[a]) / self.resolution).floor();
            idx[a] = (u.max(0.0) as usize).min(self.dims[a] - 1);
        }
        Some(idx)
    }

    /// Clamps `p` into the mapped volume.
    pub fn clamp_point(&self, p: &Vec3) -> Vec3 {
        let lo = self.min_corner();
        let hi = self.max_corner();
        Vec3::new(p.x.clamp(lo.x, hi.x), p.y.clamp(lo.y, hi.y), p.z.clamp(lo.z, hi.z))
    }

    /// Marks every voxel whose center lies in the closed box `[lo, hi]`.
    pub fn fill_box(&mut self, lo: Vec3, hi: Vec3) {
        for iz in 0..self.dims[2] {
            for iy in 0..self.dims[1] {
                for ix in 0..self.dims[0] {
                    let c = self.index_to_world([ix, iy, iz]);
                    if (0..3).all(|a| c[a] >= lo[a] && c[a] <= hi[a]) {
                        self.set_occupied([ix, iy, iz], true);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_geometry() {
        assert!(VoxelGrid::new(Vec3::zeros(), 0.0, [1, 1, 1]).is_err());
        assert!(VoxelGrid::new(Vec3::zeros(), -1.0, [1, 1, 1]).is_err());
        assert!(VoxelGrid::new(Vec3::zeros(), 0.5, [0, 1, 1]).is_err());
    }

    #[test]
    fn index_world_round_trip() {
        let g = VoxelGrid::new(Vec3::new(-1.0, 2.0, 0.5), 0.4, [5, 3, 4]).unwrap();
        for i in 0..g.len() {
            let idx = g.unlinear(i);
            assert_eq!(g.linear(idx), i);
            assert_eq!(g.world_to_index(&g.index_to_world(idx)), Some(idx));
        }
    }

    #[test]
    fn upper_face_maps_to_last_voxel() {
        let g = VoxelGrid::new(Vec3::zeros(), 0.5, [4, 4, 1]).unwrap();
        assert_eq!(g.world_to_index(&Vec3::new(2.0, 2.0, 0.5)), Some([3, 3, 0]));
        assert_eq!(g.world_to_index(&Vec3::new(2.0001, 0.0, 0.0)), None);
    }

    #[test]
    fn probabilities_threshold() {
        let g = VoxelGrid::from_probabilities(Vec3::zeros(), 1.0, [2, 1, 1], &[0.49, 0.5], 0.5).unwrap();
        assert!(!g.is_occupied([0, 0, 0]));
        assert!(g.is_occupied([1, 0, 0]));
    }
}
