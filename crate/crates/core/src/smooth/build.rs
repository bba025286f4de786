use nalgebra::{DMatrix, DVector};

use crate::preplan::{Corridor, ViewpointSkeleton, FACE_CONSTRAINTS};

use super::poly::{basis_row, falling_factorial, jerk_gram};
use super::qp::QpProblem;
use super::{InitState, SmoothError, SmoothParams};

/// Index of coefficient `i` of axis `d` on segment `k`.
pub fn var_index(order: usize, k: usize, d: usize, i: usize) -> usize {
    (k * 3 + d) * (order + 1) + i
}

pub(crate) fn durations(skeleton: &ViewpointSkeleton, corridors: &[Corridor]) -> Result<Vec<f64>, SmoothError> {
    let n = skeleton.points.len().saturating_sub(1);
    if n == 0 || skeleton.times.len() != n + 1 || corridors.len() != n {
        return Err(SmoothError::Mismatch {
            segments: n,
            corridors: corridors.len(),
        });
    }
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let dt = skeleton.times[k + 1] - skeleton.times[k];
        if !(dt > 0.0) {
            return Err(SmoothError::DegenerateSegment { segment: k + 1 });
        }
        out.push(dt);
    }
    Ok(out)
}

/// Sample times `T s / (M - 1)` for `s = 0..M`.
pub(crate) fn sample_times(duration: f64, samples: usize) -> impl Iterator<Item = f64> {
    (0..samples).map(move |s| duration * s as f64 / (samples - 1) as f64)
}

/// Assembles the jerk-plus-viewpoint QP in local segment time. Equality rows: initial
/// position, velocity, acceleration, then C² continuity per interior knot. Inequality
/// rows: the six corridor half-spaces at each of `samples` times per segment, with the
/// side faces tightened by `side_shrink`. The initial point itself is not constrained.
pub fn build_qp(
    corridors: &[Corridor],
    skeleton: &ViewpointSkeleton,
    init: &InitState,
    params: &SmoothParams,
    samples: usize,
) -> Result<QpProblem, SmoothError> {
    params.validate()?;
    let durs = durations(skeleton, corridors)?;
    let n = durs.len();
    let order = params.order;
    let nc = order + 1;
    let nv = 3 * nc * n;
    let var = |k, d, i| var_index(order, k, d, i);

    let mut p = DMatrix::zeros(nv, nv);
    let mut q = DVector::zeros(nv);
    for (k, &dur) in durs.iter().enumerate() {
        let gram = jerk_gram(order, dur);
        let end = basis_row(order, dur, 0);
        let target = skeleton.points[k + 1];
        for d in 0..3 {
            let base = var(k, d, 0);
            for i in 0..nc {
                for j in 0..nc {
                    p[(base + i, base + j)] += 2.0 * (gram[(i, j)] + params.lambda * end[i] * end[j]);
                }
                q[base + i] -= 2.0 * params.lambda * target[d] * end[i];
            }
        }
    }

    let m_eq = 9 * n;
    let mut a_eq = DMatrix::zeros(m_eq, nv);
    let mut b_eq = DVector::zeros(m_eq);
    let initial = [init.pos, init.vel, init.acc];
    for (r, value) in initial.iter().enumerate() {
        for d in 0..3 {
            let row = r * 3 + d;
            a_eq[(row, var(0, d, r))] = falling_factorial(r, r);
            b_eq[row] = value[d];
        }
    }
    for k in 0..n - 1 {
        for r in 0..3 {
            let left = basis_row(order, durs[k], r);
            for d in 0..3 {
                let row = 9 + k * 9 + r * 3 + d;
                for (i, v) in left.iter().enumerate() {
                    a_eq[(row, var(k, d, i))] = *v;
                }
                a_eq[(row, var(k + 1, d, r))] -= falling_factorial(r, r);
            }
        }
    }

    // the first sample of segment 0 is pinned by the initial state; its rows would only
    // duplicate equality rows
    let m_in = 6 * (samples * n - 1);
    let mut a_in = DMatrix::zeros(m_in, nv);
    let mut b_in = DVector::zeros(m_in);
    let mut row = 0;
    for (k, (corridor, &dur)) in corridors.iter().zip(&durs).enumerate() {
        for t in sample_times(dur, samples).skip(usize::from(k == 0)) {
            let basis = basis_row(order, t, 0);
            for (h, hs) in corridor.half_spaces.iter().enumerate() {
                for d in 0..3 {
                    for (i, v) in basis.iter().enumerate() {
                        a_in[(row, var(k, d, i))] = hs.normal[d] * v;
                    }
                }
                let shrink = if h < FACE_CONSTRAINTS { 0.0 } else { params.side_shrink };
                b_in[row] = hs.offset - shrink;
                row += 1;
            }
        }
    }

    Ok(QpProblem {
        p,
        q,
        a_eq,
        b_eq,
        a_in,
        b_in,
    })
}
