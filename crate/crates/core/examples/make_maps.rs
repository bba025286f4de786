//! Regenerates the shipped scenario maps.
//!
//! ```text
//! cargo run -p chase-core --example make_maps -- scenarios
//! ```

use std::fmt::Write as _;
use std::path::PathBuf;

use chase_core::world::{parse_map, VoxelGrid};
use chase_core::Vec3;

struct MapSpec {
    origin: Vec3,
    resolution: f64,
    dims: [usize; 3],
    /// World-space boxes `(lo, hi)`; a voxel is occupied when its center lies inside.
    boxes: Vec<(Vec3, Vec3)>,
}

impl MapSpec {
    fn index_range(&self, lo: &Vec3, hi: &Vec3) -> Option<([usize; 3], [usize; 3])> {
        let mut a = [0; 3];
        let mut b = [0; 3];
        for d in 0..3 {
            let first = ((lo[d] - self.origin[d]) / self.resolution - 0.5).ceil().max(0.0);
            let last = ((hi[d] - self.origin[d]) / self.resolution - 0.5)
                .floor()
                .min(self.dims[d] as f64 - 1.0);
            if last < first {
                return None;
            }
            a[d] = first as usize;
            b[d] = last as usize;
        }
        Some((a, b))
    }

    fn text(&self, title: &str) -> String {
        let d = self.dims;
        let o = self.origin;
        let mut out = format!(
            "# {title}\nvxmap {} {} {} {} {} {} {}\n",
            d[0], d[1], d[2], self.resolution, o.x, o.y, o.z
        );
        for (lo, hi) in &self.boxes {
            if let Some((a, b)) = self.index_range(lo, hi) {
                let _ = writeln!(out, "box {} {} {} {} {} {}", a[0], a[1], a[2], b[0], b[1], b[2]);
            }
        }
        out
    }

    fn grid(&self) -> VoxelGrid {
        let mut g = VoxelGrid::new(self.origin, self.resolution, self.dims).unwrap();
        for (lo, hi) in &self.boxes {
            g.fill_box(*lo, *hi);
        }
        g
    }
}

fn v(x: f64, y: f64, z: f64) -> Vec3 {
    Vec3::new(x, y, z)
}

fn trivial() -> MapSpec {
    MapSpec {
        origin: Vec3::zeros(),
        resolution: 0.2,
        dims: [100, 60, 30],
        boxes: Vec::new(),
    }
}

/// Twelve blocks on a 4 x 3 street grid, each cut into an L, U or T so that every
/// corner hides a pocket. Buildings span the full map height.
fn city() -> MapSpec {
    let top = 6.0;
    let cols = [(2.0, 7.0), (11.0, 16.0), (20.0, 25.0), (29.0, 34.0)];
    let rows = [(2.0, 8.0), (12.0, 18.0), (22.0, 28.0)];
    let mut boxes = Vec::new();
    for (r, &(y0, y1)) in rows.iter().enumerate() {
        for (c, &(x0, x1)) in cols.iter().enumerate() {
            let (xm, ym) = ((x0 + x1) / 2.0, (y0 + y1) / 2.0);
            match (3 * r + c) % 4 {
                // L: notch cut from the street-facing corner
                0 => {
                    boxes.push((v(x0, y0, 0.0), v(x1, ym, top)));
                    boxes.push((v(x0, ym, 0.0), v(xm, y1, top)));
                }
                // U: courtyard open to the north
                1 => {
                    boxes.push((v(x0, y0, 0.0), v(x1, y0 + 2.0, top)));
                    boxes.push((v(x0, y0, 0.0), v(x0 + 1.6, y1, top)));
                    boxes.push((v(x1 - 1.6, y0, 0.0), v(x1, y1, top)));
                }
                // T: bar along the south side with a stem
                2 => {
                    boxes.push((v(x0, y0, 0.0), v(x1, y0 + 2.2, top)));
                    boxes.push((v(xm - 1.0, y0, 0.0), v(xm + 1.0, y1, top)));
                }
                // mirrored L
                _ => {
                    boxes.push((v(x0, ym, 0.0), v(x1, y1, top)));
                    boxes.push((v(xm, y0, 0.0), v(x1, ym, top)));
                }
            }
        }
    }
    MapSpec {
        origin: Vec3::zeros(),
        resolution: 0.2,
        dims: [180, 150, 30],
        boxes,
    }
}

/// A 6 x 4 field of thin L-shaped walls under a 3 m ceiling. Each L opens in a
/// different direction, so a target walking the aisles keeps ducking behind one.
fn hiding() -> MapSpec {
    let (arm, th, top): (f64, f64, f64) = (1.4, 0.4, 3.0);
    let mut boxes = Vec::new();
    for (i, cx) in [4.0f64, 8.0, 12.0, 16.0, 20.0, 24.0].into_iter().enumerate() {
        for (j, cy) in [4.0f64, 8.0, 12.0, 16.0].into_iter().enumerate() {
            let o = (i + 2 * j) % 4;
            let sx = if o < 2 { 1.0 } else { -1.0 };
            let sy = if o == 0 || o == 3 { 1.0 } else { -1.0 };
            let (xa, xb) = (cx.min(cx + sx * arm), cx.max(cx + sx * arm));
            let (ya, yb) = (cy.min(cy + sy * arm), cy.max(cy + sy * arm));
            boxes.push((
                v(xa - th / 2.0, cy - th / 2.0, 0.0),
                v(xb + th / 2.0, cy + th / 2.0, top),
            ));
            boxes.push((
                v(cx - th / 2.0, ya - th / 2.0, 0.0),
                v(cx + th / 2.0, yb + th / 2.0, top),
            ));
        }
    }
    MapSpec {
        origin: Vec3::zeros(),
        resolution: 0.2,
        dims: [140, 100, 15],
        boxes,
    }
}

fn main() {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "scenarios".into()));
    std::fs::create_dir_all(&dir).expect("create output directory");
    for (name, title, spec) in [
        ("trivial", "empty 20 x 12 x 6 m block", trivial()),
        (
            "city",
            "12 non-convex buildings on a 4 x 3 street grid, 36 x 30 x 6 m",
            city(),
        ),
        ("hiding", "24 L-shaped walls in a 28 x 20 x 3 m hall", hiding()),
    ] {
        let text = spec.text(title);
        // the compact form must describe exactly the voxels the boxes cover
        assert_eq!(parse_map(&text).unwrap(), spec.grid(), "{name}");
        let path = dir.join(format!("{name}.vxmap"));
        std::fs::write(&path, text).expect("write map");
        println!("wrote {}", path.display());
    }
}
