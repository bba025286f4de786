use serde::{Deserialize, Serialize};

use crate::Vec3;

use super::ViewpointSkeleton;

/// `normal · x <= offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfSpace {
    pub normal: Vec3,
    pub offset: f64,
}

impl HalfSpace {
    pub fn violation(&self, p: &Vec3) -> f64 {
        self.normal.dot(p) - self.offset
    }
}

/// The first two half-spaces of a corridor are its end faces; the remaining four are
/// its sides.
pub const FACE_CONSTRAINTS: usize = 2;

/// Oriented box around the hop `start -> end`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corridor {
    pub half_spaces: [HalfSpace; 6],
    pub start: Vec3,
    pub end: Vec3,
}

impl Corridor {
    pub fn contains(&self, p: &Vec3, tol: f64) -> bool {
        self.half_spaces.iter().all(|h| h.violation(p) <= tol)
    }

    pub fn max_violation(&self, p: &Vec3) -> f64 {
        self.half_spaces
            .iter()
            .map(|h| h.violation(p))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Moves the start face back along the hop by `by`.
    pub fn extend_start(&mut self, by: f64) {
        self.half_spaces[0].offset += by;
    }

    /// Unit axis and side directions `(a, e1, e2)`.
    pub fn frame(&self) -> (Vec3, Vec3, Vec3) {
        (
            self.half_spaces[1].normal,
            self.half_spaces[2].normal,
            self.half_spaces[4].normal,
        )
    }

    /// The 8 box corners, start face first.
    pub fn corners(&self) -> [Vec3; 8] {
        let (a, e1, e2) = self.frame();
        let lo = -self.half_spaces[0].offset;
        let hi = self.half_spaces[1].offset;
        let (s1, s1n) = (self.half_spaces[2].offset, -self.half_spaces[3].offset);
        let (s2, s2n) = (self.half_spaces[4].offset, -self.half_spaces[5].offset);
        let mut out = [Vec3::zeros(); 8];
        for (i, c) in out.iter_mut().enumerate() {
            let along = if i < 4 { lo } else { hi };
            let u = if i & 1 == 0 { s1n } else { s1 };
            let v = if i & 2 == 0 { s2n } else { s2 };
            *c = a * along + e1 * u + e2 * v;
        }
        out
    }
}

#[allow(clippy::too_many_arguments)]
fn box_from_frame(
    a: Vec3,
    e1: Vec3,
    e2: Vec3,
    lo: f64,
    hi: f64,
    p: &Vec3,
    r_c: f64,
    start: Vec3,
    end: Vec3,
) -> Corridor {
    let o1 = e1.dot(p);
    let o2 = e2.dot(p);
    Corridor {
        half_spaces: [
            HalfSpace {
                normal: -a,
                offset: -lo,
            },
            HalfSpace { normal: a, offset: hi },
            HalfSpace {
                normal: e1,
                offset: o1 + r_c,
            },
            HalfSpace {
                normal: -e1,
                offset: -o1 + r_c,
            },
            HalfSpace {
                normal: e2,
                offset: o2 + r_c,
            },
            HalfSpace {
                normal: -e2,
                offset: -o2 + r_c,
            },
        ],
        start,
        end,
    }
}

/// Box spanning exactly from `start` to `end` along the hop with half-width `r_c`
/// across it. The side frame orthonormalizes the world axis least aligned with the
/// hop. A zero-length hop yields an axis-aligned cube of half-width `r_c`.
pub fn corridor_for_segment(start: &Vec3, end: &Vec3, r_c: f64) -> Corridor {
    let d = end - start;
    let len = d.norm();
    if len == 0.0 {
        let (x, y, z) = (Vec3::x(), Vec3::y(), Vec3::z());
        let c = x.dot(start);
        return box_from_frame(x, y, z, c - r_c, c + r_c, start, r_c, *start, *end);
    }
    let a = d / len;
    let mut axis = 0;
    for k in 1..3 {
        if a[k].abs() < a[axis].abs() {
            axis = k;
        }
    }
    let w = Vec3::ith(axis, 1.0);
    let e1 = (w - a * a.dot(&w)).normalize();
    let e2 = a.cross(&e1);
    box_from_frame(a, e1, e2, a.dot(start), a.dot(end), start, r_c, *start, *end)
}

pub fn corridors_from_skeleton(skeleton: &ViewpointSkeleton, r_c: f64) -> Vec<Corridor> {
    skeleton
        .points
        .windows(2)
        .map(|w| corridor_for_segment(&w[0], &w[1], r_c))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_aligned_segment() {
        let c = corridor_for_segment(&Vec3::zeros(), &Vec3::new(2.0, 0.0, 0.0), 0.2);
        let h = &c.half_spaces;
        assert_eq!(h[0].normal, -Vec3::x());
        assert_eq!(h[0].offset, 0.0);
        assert_eq!(h[1].normal, Vec3::x());
        assert_eq!(h[1].offset, 2.0);
        assert_eq!(h[2].normal, Vec3::y());
        assert_eq!(h[4].normal, Vec3::z());
        for s in &h[2..] {
            assert!((s.offset - 0.2).abs() < 1e-15);
        }
        assert!(c.contains(&Vec3::new(1.0, 0.19, -0.19), 0.0));
        assert!(!c.contains(&Vec3::new(1.0, 0.21, 0.0), 0.0));
        assert!(!c.contains(&Vec3::new(-0.01, 0.0, 0.0), 0.0));
        let mut e = c.clone();
        e.extend_start(0.5);
        assert!(e.contains(&Vec3::new(-0.49, 0.0, 0.0), 0.0));
        assert!(!e.contains(&Vec3::new(-0.51, 0.0, 0.0), 0.0));
        assert_eq!(e.corners()[0].x, -0.5);
    }

    #[test]
    fn endpoints_lie_on_faces() {
        let a = Vec3::new(1.0, -2.0, 0.5);
        let b = Vec3::new(2.3, 0.4, 1.7);
        let c = corridor_for_segment(&a, &b, 0.2);
        assert!(c.half_spaces[0].violation(&a).abs() < 1e-12);
        assert!(c.half_spaces[1].violation(&b).abs() < 1e-12);
        assert!(c.contains(&a, 1e-12) && c.contains(&b, 1e-12));
    }

    #[test]
    fn degenerate_segment_is_cube() {
        let p = Vec3::new(1.0, 2.0, 3.0);
        let c = corridor_for_segment(&p, &p, 0.5);
        assert!(c.contains(&(p + Vec3::new(0.49, -0.49, 0.49)), 0.0));
        assert!(!c.contains(&(p + Vec3::new(0.51, 0.0, 0.0)), 0.0));
        assert!(!c.contains(&(p + Vec3::new(0.0, 0.0, -0.51)), 0.0));
    }

    #[test]
    fn corners_satisfy_all_constraints() {
        let c = corridor_for_segment(&Vec3::new(0.3, 0.1, 1.0), &Vec3::new(-1.0, 1.5, 2.0), 0.2);
        for p in c.corners() {
            assert!(c.contains(&p, 1e-12));
            let active = c.half_spaces.iter().filter(|h| h.violation(&p).abs() < 1e-12).count();
            assert_eq!(active, 3);
        }
    }
}
