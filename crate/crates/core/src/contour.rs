//! Marching-squares level curves on a rectangular grid.

use std::collections::HashMap;

/// Grid edge carrying a crossing point: horizontal edges start at `(ix, iy)`
/// and go right, vertical ones go up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Edge {
    H(usize, usize),
    V(usize, usize),
}

/// Level curves of `values[iy][ix]` sampled at `(xs[ix], ys[iy])`.
///
/// Cells with a non-finite corner are skipped, so holes in the data cut the
/// curves. Segments are chained into polylines; closed curves repeat their
/// first point at the end.
pub fn contour_lines(xs: &[f64], ys: &[f64], values: &[Vec<f64>], level: f64) -> Vec<Vec<(f64, f64)>> {
    let (nx, ny) = (xs.len(), ys.len());
    assert!(values.len() == ny && values.iter().all(|r| r.len() == nx), "grid shape mismatch");
    let pos = |e: Edge| -> (f64, f64) {
        let (a, b, pa, pb) = match e {
            Edge::H(i, j) => (values[j][i], values[j][i + 1], (xs[i], ys[j]), (xs[i + 1], ys[j])),
            Edge::V(i, j) => (values[j][i], values[j + 1][i], (xs[i], ys[j]), (xs[i], ys[j + 1])),
        };
        let t = if a == b { 0.5 } else { ((level - a) / (b - a)).clamp(0.0, 1.0) };
        (pa.0 + t * (pb.0 - pa.0), pa.1 + t * (pb.1 - pa.1))
    };

    let mut segs: Vec<(Edge, Edge)> = Vec::new();
    for j in 0..ny.saturating_sub(1) {
        for i in 0..nx.saturating_sub(1) {
            let c = [values[j][i], values[j][i + 1], values[j + 1][i + 1], values[j + 1][i]];
            if c.iter().any(|v| !v.is_finite()) {
                continue;
            }
            let above = c.map(|v| v >= level);
            let case = above.iter().enumerate().fold(0, |acc, (k, &b)| acc | ((b as u8) << k));
            // edges: bottom, right, top, left
            let (b, r, t, l) = (Edge::H(i, j), Edge::V(i + 1, j), Edge::H(i, j + 1), Edge::V(i, j));
            match case {
                0 | 15 => {}
                1 | 14 => segs.push((l, b)),
                2 | 13 => segs.push((b, r)),
                3 | 12 => segs.push((l, r)),
                4 | 11 => segs.push((r, t)),
                6 | 9 => segs.push((b, t)),
                7 | 8 => segs.push((l, t)),
                5 | 10 => {
                    // saddle: resolve with the cell-centre average
                    let centre = 0.25 * c.iter().sum::<f64>() >= level;
                    if (case == 5) == centre {
                        segs.push((l, t));
                        segs.push((b, r));
                    } else {
                        segs.push((l, b));
                        segs.push((r, t));
                    }
                }
                _ => unreachable!(),
            }
        }
    }

    let mut by_edge: HashMap<Edge, Vec<usize>> = HashMap::new();
    for (k, &(a, b)) in segs.iter().enumerate() {
        by_edge.entry(a).or_default().push(k);
        by_edge.entry(b).or_default().push(k);
    }
    let mut used = vec![false; segs.len()];
    let next_from = |e: Edge, used: &mut Vec<bool>| -> Option<Edge> {
        let k = *by_edge.get(&e)?.iter().find(|&&k| !used[k])?;
        used[k] = true;
        let (a, b) = segs[k];
        Some(if a == e { b } else { a })
    };

    let mut lines = Vec::new();
    for k in 0..segs.len() {
        if used[k] {
            continue;
        }
        used[k] = true;
        let (a, b) = segs[k];
        let mut fwd = vec![a, b];
        while let Some(e) = next_from(*fwd.last().unwrap(), &mut used) {
            fwd.push(e);
        }
        let mut back = Vec::new();
        while let Some(e) = next_from(*back.last().unwrap_or(&a), &mut used) {
            back.push(e);
        }
        back.reverse();
        back.extend(fwd);
        lines.push(back.into_iter().map(pos).collect());
    }
    lines
}
