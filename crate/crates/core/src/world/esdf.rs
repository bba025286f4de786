use crate::Vec3;

use super::{Index3, VoxelGrid, WorldError};

/// Default saturation distance for free space.
pub const DEFAULT_ESDF_CAP: f64 = 10.0;

/// Euclidean signed distance field sampled at voxel centers.
///
/// Free voxels store the distance to the nearest occupied voxel center (saturated at
/// `cap`); occupied voxels store the negated distance to the nearest free voxel center.
#[derive(Debug, Clone)]
pub struct EsdfGrid {
    grid: VoxelGrid,
    phi: Vec<f64>,
    cap: f64,
    inv_res: f64,
}

/// Squared-distance transform of a 1-D sampled function (lower envelope of parabolas).
/// `f[q]` is `INFINITY` where there is no site.
fn edt_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let Some(first) = f.iter().position(|x| x.is_finite()) else {
        out.fill(f64::INFINITY);
        return;
    };
    let mut k = 0usize;
    v[0] = first;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    let inter = |q: usize, p: usize| {
        let (qf, pf) = (q as f64, p as f64);
        ((f[q] + qf * qf) - (f[p] + pf * pf)) / (2.0 * qf - 2.0 * pf)
    };
    for q in first + 1..n {
        if !f[q].is_finite() {
            continue;
        }
        let mut s = inter(q, v[k]);
        while s <= z[k] {
            k -= 1;
            s = inter(q, v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Exact squared voxel-unit distance from every voxel to the nearest voxel where
/// `is_site` holds. Separable over the three axes.
fn squared_distance_transform(dims: [usize; 3], is_site: impl Fn(usize) -> bool) -> Vec<f64> {
    let len = dims[0] * dims[1] * dims[2];
    let mut d: Vec<f64> = (0..len).map(|i| if is_site(i) { 0.0 } else { f64::INFINITY }).collect();
    let max_dim = *dims.iter().max().unwrap_or(&1);
    let mut line = vec![0.0; max_dim];
    let mut out = vec![0.0; max_dim];
    let mut v = vec![0usize; max_dim];
    let mut z = vec![0.0; max_dim + 1];
    let strides = [1, dims[0], dims[0] * dims[1]];
    for axis in 0..3 {
        let n = dims[axis];
        let stride = strides[axis];
        let (o1, o2) = match axis {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        for b in 0..dims[o2] {
            for a in 0..dims[o1] {
                let base = a * strides[o1] + b * strides[o2];
                for q in 0..n {
                    line[q] = d[base + q * stride];
                }
                edt_1d(&line[..n], &mut out[..n], &mut v, &mut z);
                for q in 0..n {
                    d[base + q * stride] = out[q];
                }
            }
        }
    }
    d
}

/// Builds the signed distance field of `grid`, saturating free-space distances at `cap`.
pub fn compute_esdf(grid: &VoxelGrid, cap: f64) -> Result<EsdfGrid, WorldError> {
    if !(cap > 0.0) || !cap.is_finite() {
        return Err(WorldError::InvalidGrid(format!("ESDF cap must be positive, got {cap}")));
    }
    let dims = grid.dims();
    let res = grid.resolution();
    let to_occupied = squared_distance_transform(dims, |i| grid.is_occupied_linear(i));
    let to_free = squared_distance_transform(dims, |i| !grid.is_occupied_linear(i));
    let phi = (0..grid.len())
        .map(|i| {
            if grid.is_occupied_linear(i) {
                let d = to_free[i];
                if d.is_finite() {
                    -res * d.sqrt()
                } else {
                    -cap
                }
            } else {
                let d = to_occupied[i];
                if d.is_finite() {
                    (res * d.sqrt()).min(cap)
                } else {
                    cap
                }
            }
        })
        .collect();
    Ok(EsdfGrid {
        grid: grid.clone(),
        phi,
        cap,
        inv_res: 1.0 / res,
    })
}

/// Interpolation stencil around a query point: base corner, fractional offsets, and
/// which axes were clamped (zero derivative there).
struct Stencil {
    base: Index3,
    frac: [f64; 3],
    flat: [bool; 3],
}

impl EsdfGrid {
    pub fn grid(&self) -> &VoxelGrid {
        &self.grid
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }

    pub fn resolution(&self) -> f64 {
        self.grid.resolution()
    }

    pub fn phi_values(&self) -> &[f64] {
        &self.phi
    }

    /// Stored value at a voxel center.
    #[inline]
    pub fn phi_voxel(&self, idx: Index3) -> f64 {
        self.phi[self.grid.linear(idx)]
    }

    #[inline]
    fn stencil(&self, p: &Vec3) -> Stencil {
        let dims = self.grid.dims();
        let origin = self.grid.origin();
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        let mut flat = [false; 3];
        for a in 0..3 {
            let d = dims[a];
            if d == 1 {
                flat[a] = true;
                continue;
            }
            let u = (p[a] - origin[a]) * self.inv_res - 0.5;
            let top = (d - 1) as f64;
            if u <= 0.0 {
                flat[a] = u < 0.0;
            } else if u >= top {
                base[a] = d - 2;
                frac[a] = 1.0;
                flat[a] = u > top;
            } else {
                let i0 = (u.floor() as usize).min(d - 2);
                base[a] = i0;
                frac[a] = u - i0 as f64;
            }
        }
        Stencil { base, frac, flat }
    }

    #[inline]
    fn corners(&self, s: &Stencil) -> [[[f64; 2]; 2]; 2] {
        let dims = self.grid.dims();
        let step = |a: usize| usize::from(dims[a] > 1);
        let sx = step(0);
        let sy = step(1) * dims[0];
        let sz = step(2) * dims[0] * dims[1];
        let i = self.grid.linear(s.base);
        let p = &self.phi;
        [
            [[p[i], p[i + sz]], [p[i + sy], p[i + sy + sz]]],
            [[p[i + sx], p[i + sx + sz]], [p[i + sx + sy], p[i + sx + sy + sz]]],
        ]
    }

    /// Trilinear interpolation of the voxel-center field. Points outside the map are
    /// clamped to the boundary.
    #[inline]
    pub fn phi_at(&self, p: &Vec3) -> f64 {
        let s = self.stencil(p);
        let c = self.corners(&s);
        let [fx, fy, fz] = s.frac;
        let lerp = |a: f64, b: f64, t: f64| a + (b - a) * t;
        let c00 = lerp(c[0][0][0], c[1][0][0], fx);
        let c01 = lerp(c[0][0][1], c[1][0][1], fx);
        let c10 = lerp(c[0][1][0], c[1][1][0], fx);
        let c11 = lerp(c[0][1][1], c[1][1][1], fx);
        lerp(lerp(c00, c10, fy), lerp(c01, c11, fy), fz)
    }

    /// Strict variant of [`phi_at`](Self::phi_at): errors outside the mapped volume.
    pub fn try_phi_at(&self, p: &Vec3) -> Result<f64, WorldError> {
        if !self.grid.contains(p) {
            return Err(WorldError::OutOfBounds { point: [p.x, p.y, p.z] });
        }
        Ok(self.phi_at(p))
    }

    /// Interpolated value and its exact gradient (the gradient of the trilinear
    /// interpolant; zero along clamped axes).
    pub fn phi_and_gradient(&self, p: &Vec3) -> (f64, Vec3) {
        let s = self.stencil(p);
        let c = self.corners(&s);
        let [fx, fy, fz] = s.frac;
        let w = |f: f64, bit: usize| if bit == 1 { f } else { 1.0 - f };
        let dw = |bit: usize| if bit == 1 { 1.0 } else { -1.0 };
        let mut value = 0.0;
        let mut grad = Vec3::zeros();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    let v = c[i][j][k];
                    value += w(fx, i) * w(fy, j) * w(fz, k) * v;
                    grad.x += dw(i) * w(fy, j) * w(fz, k) * v;
                    grad.y += w(fx, i) * dw(j) * w(fz, k) * v;
                    grad.z += w(fx, i) * w(fy, j) * dw(k) * v;
                }
            }
        }
        for a in 0..3 {
            grad[a] = if s.flat[a] { 0.0 } else { grad[a] * self.inv_res };
        }
        (value, grad)
    }

    /// `p` itself when its clearance is at least `margin`, else the closest voxel
    /// center within `radius` that has it. `None` when there is no such center.
    pub fn nearest_clear(&self, p: &Vec3, margin: f64, radius: f64) -> Option<Vec3> {
        let p = self.grid.clamp_point(p);
        if self.phi_at(&p) >= margin {
            return Some(p);
        }
        let center = self.grid.world_to_index(&p)?;
        let reach = (radius * self.inv_res).ceil() as usize;
        let dims = self.grid.dims();
        let mut best: Option<(f64, Vec3)> = None;
        for x in center[0].saturating_sub(reach)..=(center[0] + reach).min(dims[0] - 1) {
            for y in center[1].saturating_sub(reach)..=(center[1] + reach).min(dims[1] - 1) {
                for z in center[2].saturating_sub(reach)..=(center[2] + reach).min(dims[2] - 1) {
                    if self.phi_voxel([x, y, z]) < margin {
                        continue;
                    }
                    let c = self.grid.index_to_world([x, y, z]);
                    let d = (c - p).norm_squared();
                    if d <= radius * radius && best.is_none_or(|(b, _)| d < b) {
                        best = Some((d, c));
                    }
                }
            }
        }
        best.map(|(_, c)| c)
    }
}
