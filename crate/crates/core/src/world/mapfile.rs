//! Plain-text voxel map format.
//!
//! ```text
//! vxmap <dimx> <dimy> <dimz> <resolution> <ox> <oy> <oz>
//! occ <ix> <iy> <iz>
//! box <ix0> <iy0> <iz0> <ix1> <iy1> <iz1>
//! ```
//!
//! `box` marks every voxel in the inclusive index range.
//!
//! `#` starts a comment that runs to the end of the line; blank lines are ignored.
//! [`write_map`] emits the canonical form (no comments, occupied voxels in storage
//! order), which [`parse_map`] reads back bit-exactly.

use std::fmt::Write as _;

use crate::Vec3;

use super::{VoxelGrid, WorldError};

fn parse_err(line: usize, message: impl Into<String>) -> WorldError {
    WorldError::MapParse {
        line,
        message: message.into(),
    }
}

fn field<T: std::str::FromStr>(line: usize, name: &str, tok: Option<&str>) -> Result<T, WorldError> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing field `{name}`")))?;
    tok.parse()
        .map_err(|_| parse_err(line, format!("invalid value `{tok}` for field `{name}`")))
}

pub fn parse_map(text: &str) -> Result<VoxelGrid, WorldError> {
    let mut grid: Option<VoxelGrid> = None;
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut toks = content.split_whitespace();
        let keyword = toks.next().unwrap_or_default();
        match (&mut grid, keyword) {
            (None, "vxmap") => {
                let dims = [
                    field::<usize>(line, "dimx", toks.next())?,
                    field::<usize>(line, "dimy", toks.next())?,
                    field::<usize>(line, "dimz", toks.next())?,
                ];
                let resolution: f64 = field(line, "resolution", toks.next())?;
                let origin = Vec3::new(
                    field(line, "ox", toks.next())?,
                    field(line, "oy", toks.next())?,
                    field(line, "oz", toks.next())?,
                );
                if let Some(extra) = toks.next() {
                    return Err(parse_err(line, format!("malformed header: trailing token `{extra}`")));
                }
                if !(resolution > 0.0) {
                    return Err(parse_err(
                        line,
                        format!("field `resolution` must be positive, got {resolution}"),
                    ));
                }
                let g = VoxelGrid::new(origin, resolution, dims)
                    .map_err(|e| parse_err(line, format!("malformed header: {e}")))?;
                grid = Some(g);
            }
            (None, other) => {
                return Err(parse_err(
                    line,
                    format!("malformed header: expected `vxmap`, found `{other}`"),
                ));
            }
            (Some(g), "occ") => {
                let idx = [
                    field::<usize>(line, "ix", toks.next())?,
                    field::<usize>(line, "iy", toks.next())?,
                    field::<usize>(line, "iz", toks.next())?,
                ];
                if let Some(extra) = toks.next() {
                    return Err(parse_err(line, format!("trailing token `{extra}`")));
                }
                if !g.in_range(idx) {
                    return Err(parse_err(
                        line,
                        format!("index out of range: {idx:?} for dims {:?}", g.dims()),
                    ));
                }
                g.set_occupied(idx, true);
            }
            (Some(g), "box") => {
                let names = ["ix0", "iy0", "iz0", "ix1", "iy1", "iz1"];
                let mut v = [0usize; 6];
                for (slot, name) in v.iter_mut().zip(names) {
                    *slot = field(line, name, toks.next())?;
                }
                if let Some(extra) = toks.next() {
                    return Err(parse_err(line, format!("trailing token `{extra}`")));
                }
                let (lo, hi) = ([v[0], v[1], v[2]], [v[3], v[4], v[5]]);
                if (0..3).any(|a| lo[a] > hi[a]) {
                    return Err(parse_err(line, format!("empty box {lo:?}..{hi:?}")));
                }
                if !g.in_range(hi) {
                    return Err(parse_err(
                        line,
                        format!("index out of range: {hi:?} for dims {:?}", g.dims()),
                    ));
                }
                for iz in lo[2]..=hi[2] {
                    for iy in lo[1]..=hi[1] {
                        for ix in lo[0]..=hi[0] {
                            g.set_occupied([ix, iy, iz], true);
                        }
                    }
                }
            }
            (Some(_), "vxmap") => return Err(parse_err(line, "duplicate header")),
            (Some(_), other) => {
                return Err(parse_err(line, format!("unknown record `{other}`")));
            }
        }
    }
    grid.ok_or_else(|| parse_err(0, "malformed header: missing `vxmap` line"))
}

pub fn write_map(grid: &VoxelGrid) -> String {
    let d = grid.dims();
    let o = grid.origin();
    let mut out = format!(
        "vxmap {} {} {} {} {} {} {}\n",
        d[0],
        d[1],
        d[2],
        grid.resolution(),
        o.x,
        o.y,
        o.z
    );
    for [x, y, z] in grid.iter_occupied() {
        let _ = writeln!(out, "occ {x} {y} {z}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_voxel() {
        let g = parse_map("vxmap 4 4 1 0.5 0 0 0\nocc 1 1 0\n").unwrap();
        assert_eq!(g.len(), 16);
        assert_eq!(g.occupied_count(), 1);
        assert!(g.is_occupied([1, 1, 0]));
    }

    #[test]
    fn box_records_fill_inclusive_ranges() {
        let g = parse_map("vxmap 5 5 3 1 0 0 0\nbox 1 1 0 2 3 1\n").unwrap();
        assert_eq!(g.occupied_count(), 2 * 3 * 2);
        assert!(g.is_occupied([2, 3, 1]) && !g.is_occupied([3, 3, 1]));
        assert!(parse_map("vxmap 5 5 3 1 0 0 0\nbox 1 1 0 5 1 1\n").is_err());
        assert!(parse_map("vxmap 5 5 3 1 0 0 0\nbox 2 1 0 1 1 1\n").is_err());
    }

    #[test]
    fn empty_voxel_list_is_all_free() {
        let g = parse_map("# a comment\nvxmap 3 2 2 1 0 0 0 # trailing\n").unwrap();
        assert_eq!(g.occupied_count(), 0);
        assert_eq!(g.len(), 12);
    }

    #[test]
    fn out_of_range_index() {
        let err = parse_map("vxmap 4 4 1 0.5 0 0 0\nocc 5 0 0\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("index out of range"), "{msg}");
        assert!(msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn header_errors_name_the_field() {
        let msg = parse_map("vxmap 4 4 1 0 0 0 0\n").unwrap_err().to_string();
        assert!(msg.contains("resolution"), "{msg}");
        let msg = parse_map("vxmap 4 x 1 1 0 0 0\n").unwrap_err().to_string();
        assert!(msg.contains("dimy"), "{msg}");
        let msg = parse_map("occ 1 1 1\n").unwrap_err().to_string();
        assert!(msg.contains("malformed header"), "{msg}");
        let msg = parse_map("").unwrap_err().to_string();
        assert!(msg.contains("missing"), "{msg}");
    }

    proptest! {
        #[test]
        fn canonical_text_round_trips(
            dims in (1usize..6, 1usize..6, 1usize..4),
            res in 0.01f64..3.0,
            origin in (-50.0f64..50.0, -50.0f64..50.0, -5.0f64..5.0),
            bits in proptest::collection::vec(any::<bool>(), 150),
        ) {
            let dims = [dims.0, dims.1, dims.2];
            let mut g = VoxelGrid::new(Vec3::new(origin.0, origin.1, origin.2), res, dims).unwrap();
            for i in 0..g.len() {
                if bits[i] {
                    let idx = g.unlinear(i);
                    g.set_occupied(idx, true);
                }
            }
            let text = write_map(&g);
            let parsed = parse_map(&text).unwrap();
            prop_assert_eq!(&parsed, &g);
            prop_assert_eq!(write_map(&parsed), text);
        }
    }
}
