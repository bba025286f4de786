use crate::visibility::{segment_clear, visibility_score};
use crate::world::{EsdfGrid, WorldError};
use crate::Vec3;

use super::{start_clearance, PreplanError, PreplanParams, ViewpointLayer, ViewpointSkeleton};

/// Directed hop from node `from` of the previous layer (or the start node) to node
/// `to` of the next layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub weight: f64,
}

/// Visibility scores of one layer's nodes against the previous, own, and next layer targets.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeScores {
    pub prev: Vec<f64>,
    pub own: Vec<f64>,
    pub next: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayeredGraph {
    pub start: Vec3,
    pub start_time: f64,
    pub start_target: Vec3,
    pub layers: Vec<ViewpointLayer>,
    /// `edges[l]` enters `layers[l]`; sources are the start node for `l == 0`.
    pub edges: Vec<Vec<Edge>>,
}

fn trapezoid(len: f64, first: f64, inner: f64, last: f64, samples: usize) -> f64 {
    len * (0.5 * (first + last) + inner) / (samples - 1) as f64
}

fn inverse_geometric_mean(a: f64, b: f64) -> f64 {
    if a > 0.0 && b > 0.0 {
        1.0 / (a * b).sqrt()
    } else {
        f64::INFINITY
    }
}

/// Inverse geometric mean of the trapezoid-rule integrals of `ψ(·; x_a)` and
/// `ψ(·; x_b)` along the hop `v_a -> v_b`. Infinite when either integral is not
/// positive, including zero-length hops.
pub fn edge_visibility_cost(
    esdf: &EsdfGrid,
    v_a: &Vec3,
    v_b: &Vec3,
    x_a: &Vec3,
    x_b: &Vec3,
    samples: usize,
) -> Result<f64, WorldError> {
    let n = samples.max(2);
    let len = (v_b - v_a).norm();
    let (mut inner_a, mut inner_b) = (0.0, 0.0);
    for i in 1..n - 1 {
        let p = v_a + (v_b - v_a) * (i as f64 / (n - 1) as f64);
        inner_a += visibility_score(esdf, &p, x_a)?;
        inner_b += visibility_score(esdf, &p, x_b)?;
    }
    let ia = trapezoid(
        len,
        visibility_score(esdf, v_a, x_a)?,
        inner_a,
        visibility_score(esdf, v_b, x_a)?,
        n,
    );
    let ib = trapezoid(
        len,
        visibility_score(esdf, v_a, x_b)?,
        inner_b,
        visibility_score(esdf, v_b, x_b)?,
        n,
    );
    Ok(inverse_geometric_mean(ia, ib))
}

/// Hop evaluation between two consecutive layers with cached endpoint scores.
struct Hop<'a> {
    esdf: &'a EsdfGrid,
    params: &'a PreplanParams,
    prev_target: Vec3,
    cur_target: Vec3,
    clearance: f64,
}

struct End {
    pos: Vec3,
    /// Score against the previous layer's target.
    psi_prev: f64,
    /// Score against the current layer's target.
    psi_cur: f64,
}

impl Hop<'_> {
    fn distance_term(&self, w: &Vec3) -> f64 {
        let dev = (self.cur_target - w).norm() - self.params.d_des;
        self.params.w_d * dev * dev
    }

    /// Visibility cost; with `exact == false` interior samples are replaced by the
    /// field cap, which bounds the cost from below.
    fn visibility_cost(&self, u: &End, w: &End, len: f64, exact: bool) -> Result<f64, WorldError> {
        let n = self.params.edge_samples;
        let f = |psi: f64| self.params.psi_floor.map_or(psi, |m| psi.max(m));
        let (mut inner_a, mut inner_b) = (0.0, 0.0);
        for i in 1..n - 1 {
            if exact {
                let p = u.pos + (w.pos - u.pos) * (i as f64 / (n - 1) as f64);
                inner_a += f(visibility_score(self.esdf, &p, &self.prev_target)?);
                inner_b += f(visibility_score(self.esdf, &p, &self.cur_target)?);
            } else {
                inner_a += f(self.esdf.cap());
                inner_b += f(self.esdf.cap());
            }
        }
        let ia = trapezoid(len, f(u.psi_prev), inner_a, f(w.psi_prev), n);
        let ib = trapezoid(len, f(u.psi_cur), inner_b, f(w.psi_cur), n);
        Ok(inverse_geometric_mean(ia, ib))
    }

    fn combine(&self, len: f64, cv: f64, dist_term: f64) -> f64 {
        len * len + self.params.w_v * cv + dist_term
    }

    /// Lower bound on the hop weight, `None` when the hop is certainly absent.
    fn lower_bound(&self, u: &End, w: &End, dist_term: f64) -> Option<f64> {
        let len = (w.pos - u.pos).norm();
        if len == 0.0 || len > self.params.d_max {
            return None;
        }
        let cv = self.visibility_cost(u, w, len, false).ok()?;
        cv.is_finite().then(|| self.combine(len, cv, dist_term))
    }

    fn weight(&self, u: &End, w: &End, dist_term: f64) -> Result<Option<f64>, WorldError> {
        let len = (w.pos - u.pos).norm();
        if len == 0.0 || len > self.params.d_max {
            return Ok(None);
        }
        let cv = self.visibility_cost(u, w, len, true)?;
        if !cv.is_finite() {
            return Ok(None);
        }
        if !segment_clear(self.esdf, &u.pos, &w.pos, self.clearance)? {
            return Ok(None);
        }
        Ok(Some(self.combine(len, cv, dist_term)))
    }
}

fn scores_against(esdf: &EsdfGrid, points: &[Vec3], target: &Vec3) -> Result<Vec<f64>, WorldError> {
    points.iter().map(|p| visibility_score(esdf, p, target)).collect()
}

/// The start node is not a sampled candidate and may currently be occluded; its
/// scores are floored at zero so an occluded chaser can still move to a visible one.
fn start_scores(esdf: &EsdfGrid, start: &Vec3, t0: &Vec3, t1: &Vec3) -> Result<(f64, f64), WorldError> {
    Ok((
        visibility_score(esdf, start, t0)?.max(0.0),
        visibility_score(esdf, start, t1)?.max(0.0),
    ))
}

fn check_layers(layers: &[ViewpointLayer]) -> Result<(), PreplanError> {
    if layers.is_empty() {
        return Err(PreplanError::EmptyLayer { layer: 1 });
    }
    if let Some(l) = layers.iter().position(|l| l.is_empty()) {
        return Err(PreplanError::EmptyLayer { layer: l + 1 });
    }
    Ok(())
}

/// Builds the full layered graph with every admissible hop.
pub fn build_graph(
    esdf: &EsdfGrid,
    start: &Vec3,
    start_time: f64,
    start_target: &Vec3,
    layers: &[ViewpointLayer],
    params: &PreplanParams,
) -> Result<LayeredGraph, PreplanError> {
    params.validate()?;
    check_layers(layers)?;
    let (start_own, start_next) = start_scores(esdf, start, start_target, &layers[0].target)?;
    let mut edges = Vec::with_capacity(layers.len());
    for (l, layer) in layers.iter().enumerate() {
        let prev_target = if l == 0 { *start_target } else { layers[l - 1].target };
        let hop = Hop {
            esdf,
            params,
            prev_target,
            cur_target: layer.target,
            clearance: if l == 0 {
                start_clearance(esdf, start, params.r_safe)
            } else {
                params.r_safe
            },
        };
        let sources: Vec<End> = if l == 0 {
            vec![End {
                pos: *start,
                psi_prev: start_own,
                psi_cur: start_next,
            }]
        } else {
            let prev = &layers[l - 1];
            let next = scores_against(esdf, &prev.candidates, &layer.target)?;
            prev.candidates
                .iter()
                .zip(&prev.scores)
                .zip(next)
                .map(|((&pos, &own), next)| End {
                    pos,
                    psi_prev: own,
                    psi_cur: next,
                })
                .collect()
        };
        let back = scores_against(esdf, &layer.candidates, &prev_target)?;
        let sinks: Vec<End> = layer
            .candidates
            .iter()
            .zip(back)
            .zip(&layer.scores)
            .map(|((&pos, prev), &own)| End {
                pos,
                psi_prev: prev,
                psi_cur: own,
            })
            .collect();
        let dist_terms: Vec<f64> = sinks.iter().map(|w| hop.distance_term(&w.pos)).collect();
        let mut layer_edges = Vec::new();
        for (from, u) in sources.iter().enumerate() {
            for (to, w) in sinks.iter().enumerate() {
                if let Some(weight) = hop.weight(u, w, dist_terms[to])? {
                    layer_edges.push(Edge { from, to, weight });
                }
            }
        }
        edges.push(layer_edges);
    }
    Ok(LayeredGraph {
        start: *start,
        start_time,
        start_target: *start_target,
        layers: layers.to_vec(),
        edges,
    })
}

fn backtrack(preds: &[Vec<usize>], last: usize) -> Vec<usize> {
    let mut choices = vec![0; preds.len()];
    let mut node = last;
    for l in (0..preds.len()).rev() {
        choices[l] = node;
        node = preds[l][node];
    }
    choices
}

fn argmin(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if v.is_finite() && best.is_none_or(|b| v < values[b]) {
            best = Some(i);
        }
    }
    best
}

/// Minimum-weight path through one node per layer by dynamic programming. Ties go
/// to the lowest candidate index.
pub fn solve_viewpoint_sequence(graph: &LayeredGraph) -> Result<ViewpointSkeleton, PreplanError> {
    check_layers(&graph.layers)?;
    let mut cost: Vec<f64> = vec![0.0];
    let mut preds = Vec::with_capacity(graph.layers.len());
    for (l, layer) in graph.layers.iter().enumerate() {
        let mut next = vec![f64::INFINITY; layer.len()];
        let mut pred = vec![usize::MAX; layer.len()];
        let mut edges: Vec<&Edge> = graph.edges[l].iter().collect();
        edges.sort_by_key(|e| (e.to, e.from));
        for e in edges {
            let total = cost[e.from] + e.weight;
            if total < next[e.to] {
                next[e.to] = total;
                pred[e.to] = e.from;
            }
        }
        if next.iter().all(|c| !c.is_finite()) {
            return Err(PreplanError::Unreachable { layer: l + 1 });
        }
        cost = next;
        preds.push(pred);
    }
    let last = argmin(&cost).expect("last layer reachable");
    let choices = backtrack(&preds, last);
    let mut points = vec![graph.start];
    let mut times = vec![graph.start_time];
    let mut targets = vec![graph.start_target];
    for (layer, &c) in graph.layers.iter().zip(&choices) {
        points.push(layer.candidates[c]);
        times.push(layer.time);
        targets.push(layer.target);
    }
    Ok(ViewpointSkeleton {
        points,
        times,
        targets,
        choices,
        total_cost: cost[last],
    })
}

/// Same optimum as `solve_viewpoint_sequence(build_graph(..))` without materializing
/// the graph: for every node, predecessors are tried in order of a lower bound on the
/// path cost and the expensive clearance test stops once the bound exceeds the best
/// path found. Returns the chosen indices, total cost, and number of full hop tests.
pub fn solve_layered(
    esdf: &EsdfGrid,
    start: &Vec3,
    start_target: &Vec3,
    layers: &[ViewpointLayer],
    params: &PreplanParams,
) -> Result<(Vec<usize>, f64, usize), PreplanError> {
    params.validate()?;
    check_layers(layers)?;
    let (start_own, start_next) = start_scores(esdf, start, start_target, &layers[0].target)?;
    let mut cost: Vec<f64> = vec![0.0];
    let mut preds = Vec::with_capacity(layers.len());
    let mut evaluated = 0;
    for (l, layer) in layers.iter().enumerate() {
        let prev_target = if l == 0 { *start_target } else { layers[l - 1].target };
        let hop = Hop {
            esdf,
            params,
            prev_target,
            cur_target: layer.target,
            clearance: if l == 0 {
                start_clearance(esdf, start, params.r_safe)
            } else {
                params.r_safe
            },
        };
        // Only reachable sources matter.
        let sources: Vec<(usize, End)> = if l == 0 {
            vec![(
                0,
                End {
                    pos: *start,
                    psi_prev: start_own,
                    psi_cur: start_next,
                },
            )]
        } else {
            let prev = &layers[l - 1];
            let mut v = Vec::new();
            for (i, &pos) in prev.candidates.iter().enumerate() {
                if cost[i].is_finite() {
                    v.push((
                        i,
                        End {
                            pos,
                            psi_prev: prev.scores[i],
                            psi_cur: visibility_score(esdf, &pos, &layer.target)?,
                        },
                    ));
                }
            }
            v
        };
        let mut next = vec![f64::INFINITY; layer.len()];
        let mut pred = vec![usize::MAX; layer.len()];
        let mut order: Vec<(f64, usize)> = Vec::new();
        for (to, &pos) in layer.candidates.iter().enumerate() {
            let w = End {
                pos,
                psi_prev: visibility_score(esdf, &pos, &prev_target)?,
                psi_cur: layer.scores[to],
            };
            let dist_term = hop.distance_term(&pos);
            order.clear();
            for (slot, (from, u)) in sources.iter().enumerate() {
                if let Some(lb) = hop.lower_bound(u, &w, dist_term) {
                    order.push((cost[*from] + lb, slot));
                }
            }
            order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let (mut best, mut best_from) = (f64::INFINITY, usize::MAX);
            for &(bound, slot) in &order {
                let (from, u) = &sources[slot];
                if bound > best || (bound == best && *from > best_from) {
                    break;
                }
                evaluated += 1;
                if let Some(weight) = hop.weight(u, &w, dist_term)? {
                    let total = cost[*from] + weight;
                    if total < best || (total == best && *from < best_from) {
                        best = total;
                        best_from = *from;
                    }
                }
            }
            next[to] = best;
            pred[to] = best_from;
        }
        if next.iter().all(|c| !c.is_finite()) {
            return Err(PreplanError::Unreachable { layer: l + 1 });
        }
        cost = next;
        preds.push(pred);
    }
    let last = argmin(&cost).expect("last layer reachable");
    Ok((backtrack(&preds, last), cost[last], evaluated))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preplan::candidate_viewpoints;
    use crate::world::{compute_esdf, VoxelGrid};

    fn open() -> EsdfGrid {
        let g = VoxelGrid::new(Vec3::zeros(), 0.25, [40, 40, 16]).unwrap();
        compute_esdf(&g, 10.0).unwrap()
    }

    fn layer(k: usize, target: Vec3, candidates: Vec<Vec3>, e: &EsdfGrid) -> ViewpointLayer {
        let scores = candidates
            .iter()
            .map(|c| visibility_score(e, c, &target).unwrap())
            .collect();
        ViewpointLayer {
            k,
            time: k as f64,
            target,
            candidates,
            scores,
            relaxed: false,
        }
    }

    #[test]
    fn empty_map_unit_hop_costs_inverse_cap() {
        let e = open();
        let a = Vec3::new(2.0, 2.0, 1.0);
        let b = Vec3::new(3.0, 2.0, 1.0);
        let x = Vec3::new(5.0, 5.0, 1.0);
        let cv = edge_visibility_cost(&e, &a, &b, &x, &x, 2).unwrap();
        assert!((cv - 0.1).abs() < 1e-15);
        let cv5 = edge_visibility_cost(&e, &a, &b, &x, &x, 5).unwrap();
        assert!((cv5 - 0.1).abs() < 1e-15);
        assert_eq!(edge_visibility_cost(&e, &a, &a, &x, &x, 2).unwrap(), f64::INFINITY);
    }

    #[test]
    fn far_layers_have_no_edges() {
        let e = open();
        let params = PreplanParams {
            d_max: 1.0,
            ..Default::default()
        };
        let t = Vec3::new(5.0, 5.0, 1.0);
        let l1 = layer(1, t, vec![Vec3::new(1.0, 1.0, 2.0), Vec3::new(1.0, 9.0, 2.0)], &e);
        let l2 = layer(2, t, vec![Vec3::new(8.0, 1.0, 2.0), Vec3::new(8.0, 9.0, 2.0)], &e);
        let g = build_graph(&e, &Vec3::new(1.0, 1.5, 2.0), 0.0, &t, &[l1, l2], &params).unwrap();
        assert_eq!(g.edges[0].len(), 1);
        assert!(g.edges[1].is_empty());
        assert_eq!(
            solve_viewpoint_sequence(&g),
            Err(PreplanError::Unreachable { layer: 2 })
        );
    }

    #[test]
    fn open_map_is_complete_bipartite() {
        let e = open();
        let params = PreplanParams::default();
        let t = Vec3::new(5.0, 5.0, 1.0);
        let pts1 = vec![
            Vec3::new(3.0, 3.0, 2.0),
            Vec3::new(3.2, 3.0, 2.0),
            Vec3::new(3.0, 3.4, 2.2),
        ];
        let pts2 = vec![Vec3::new(3.5, 3.5, 2.0), Vec3::new(3.6, 3.0, 2.0)];
        let l1 = layer(1, t, pts1, &e);
        let l2 = layer(2, t, pts2, &e);
        let g = build_graph(&e, &Vec3::new(3.0, 3.1, 2.1), 0.0, &t, &[l1, l2], &params).unwrap();
        assert_eq!(g.edges[0].len(), 3);
        assert_eq!(g.edges[1].len(), 6);
    }

    #[test]
    fn single_candidate() {
        let e = open();
        let t = Vec3::new(5.0, 5.0, 1.0);
        let only = Vec3::new(4.0, 4.0, 2.0);
        let l1 = layer(1, t, vec![only], &e);
        let g = build_graph(&e, &Vec3::new(4.5, 4.0, 2.0), 0.0, &t, &[l1], &PreplanParams::default()).unwrap();
        let s = solve_viewpoint_sequence(&g).unwrap();
        assert_eq!(s.points[1], only);
        assert_eq!(s.choices, vec![0]);
    }

    #[test]
    fn pruned_solver_matches_full_graph() {
        let mut g = VoxelGrid::new(Vec3::zeros(), 0.4, [30, 30, 10]).unwrap();
        g.fill_box(Vec3::new(5.0, 3.0, 0.0), Vec3::new(5.8, 9.0, 3.0));
        g.fill_box(Vec3::new(7.0, 6.0, 0.0), Vec3::new(9.0, 6.8, 2.0));
        let e = compute_esdf(&g, 10.0).unwrap();
        let params = PreplanParams {
            grid_stride: 0.8,
            ..Default::default()
        };
        let targets = [
            Vec3::new(6.5, 5.0, 0.6),
            Vec3::new(7.0, 5.4, 0.6),
            Vec3::new(7.5, 5.6, 0.6),
            Vec3::new(8.0, 5.2, 0.6),
        ];
        let layers: Vec<_> = targets
            .iter()
            .enumerate()
            .map(|(i, t)| candidate_viewpoints(&e, i + 1, i as f64 + 1.0, t, &params, &Vec3::zeros()).unwrap())
            .collect();
        let start = Vec3::new(6.6, 3.2, 2.0);
        let t0 = Vec3::new(6.2, 5.0, 0.6);
        let graph = build_graph(&e, &start, 0.0, &t0, &layers, &params).unwrap();
        let full = solve_viewpoint_sequence(&graph).unwrap();
        let (choices, cost, evaluated) = solve_layered(&e, &start, &t0, &layers, &params).unwrap();
        assert_eq!(choices, full.choices);
        assert_eq!(cost.to_bits(), full.total_cost.to_bits());
        let all_edges: usize = graph.edges.iter().map(|e| e.len()).sum();
        assert!(evaluated < all_edges, "{evaluated} vs {all_edges}");
    }
}
